//! Reclamation planning and adjoint insertion.
//!
//! A temporary can be reclaimed once its history is certified
//! output-isolable: every operation writing it is a basis permutation
//! whose targets stay inside the temp set, every other use is a control,
//! external controls of the defining history are unwritten up to the
//! boundary, and nothing touches the set afterwards. Under those
//! conditions replaying the defining history adjointed restores the set
//! exactly, for every input state, without touching anything live. The
//! planner reclaims entanglement-connected temp groups per scope at the
//! earliest such boundary; refusals are data, not errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{DependenceGraph, EntanglementTrace, Liveness, ReleaseGroup};
use crate::frontend::{Diagnostic, Severity, Span};
use crate::ir::{
    adjoint_of, refresh_points, Operation, OperationKind, Point, Program, ResourceId,
    Role,
};

/// Why a temporary was not reclaimed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefusalReason {
    Measured,
    AliasedLive,
    NonQfreeHistory,
    CrossBoundaryEntangled,
    UsedLater,
}

impl fmt::Display for RefusalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RefusalReason::Measured => "measured",
            RefusalReason::AliasedLive => "aliased-live",
            RefusalReason::NonQfreeHistory => "non-qfree-history",
            RefusalReason::CrossBoundaryEntangled => "cross-boundary-entangled",
            RefusalReason::UsedLater => "used-later",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Refusal {
    pub resource: ResourceId,
    pub name: String,
    pub reason: RefusalReason,
    pub point: Point,
}

#[derive(Debug, Error)]
pub enum ReclaimError {
    #[error("stale plan: program fingerprint mismatch")]
    StalePlan,
    #[error("unknown resource {0:?}")]
    UnknownResource(ResourceId),
    #[error("point p{0} out of range")]
    PointOutOfRange(Point),
}

/// Proof obligations discharged when a temp set was certified
/// output-isolable at a boundary point.
#[derive(Debug, Clone, Serialize)]
pub struct IsolabilityCertificate {
    pub temps: Vec<ResourceId>,
    pub boundary: Point,
    /// Points whose targets lie inside the temp set, in program order.
    pub defining_ops: Vec<Point>,
    /// Points touching the set only through controls.
    pub transfer_ops: Vec<Point>,
    /// Per defining op: the external controls checked stable over
    /// (definition, boundary].
    pub control_stability_witness: Vec<(Point, Vec<ResourceId>)>,
}

/// One planned reclamation: the certificate, the adjoint segment to
/// splice in, and where.
#[derive(Debug, Clone, Serialize)]
pub struct PlanGroup {
    pub certificate: IsolabilityCertificate,
    pub segment: Vec<Operation>,
    /// The segment is spliced immediately after this point.
    pub insertion_point: Point,
}

/// Output of early-reclamation planning over one program.
#[derive(Debug, Clone, Serialize)]
pub struct ReclamationPlan {
    pub groups: Vec<PlanGroup>,
    pub refusals: Vec<Refusal>,
    fingerprint: u64,
}

impl ReclamationPlan {
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Keeps only the groups accepted by `keep`; used to apply a plan
    /// scope by scope.
    pub fn retain_groups<F>(&mut self, keep: F)
    where
        F: FnMut(&PlanGroup) -> bool,
    {
        self.groups.retain(keep);
    }

    /// Release view on the original numbering: each group's temps are
    /// free strictly after its boundary.
    pub fn releases(&self) -> Vec<ReleaseGroup> {
        self.groups
            .iter()
            .map(|g| ReleaseGroup {
                temps: g.certificate.temps.clone(),
                release: g.certificate.boundary,
            })
            .collect()
    }

    pub fn json(&self, program: &Program) -> serde_json::Value {
        serde_json::json!({
            "groups": self.groups.iter().map(|g| serde_json::json!({
                "temps": g.certificate.temps.iter()
                    .map(|t| program.resource(*t).name.clone()).collect::<Vec<_>>(),
                "boundary": g.certificate.boundary,
                "segment": g.segment.iter().map(op_text).collect::<Vec<_>>(),
                "insertion_point": g.insertion_point,
            })).collect::<Vec<_>>(),
            "refusals": self.refusals.iter().map(|r| serde_json::json!({
                "resource": r.name,
                "reason": r.reason,
                "point": r.point,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Compact text form of an operation, used in plan exports and reports.
pub fn op_text(op: &Operation) -> String {
    let names: Vec<&str> = op.operands.iter().map(|o| o.name.as_str()).collect();
    match &op.kind {
        OperationKind::Gate(g) => format!("{} {}", g.name(), names.join(", ")),
        OperationKind::AdjointGate(g) => format!("adjoint {} {}", g.name(), names.join(", ")),
        OperationKind::Call(f) => format!("{f}({})", names.join(", ")),
        OperationKind::AdjointCall(f) => format!("adjoint {f}({})", names.join(", ")),
        OperationKind::Measure => format!("measure {}", names.join(", ")),
    }
}

/// Outcome of a certification attempt: a refusal is data, not an error.
#[derive(Debug, Clone)]
pub enum Certification {
    Certified(IsolabilityCertificate),
    Refused(RefusalReason),
}

impl Certification {
    pub fn certificate(self) -> Option<IsolabilityCertificate> {
        match self {
            Certification::Certified(c) => Some(c),
            Certification::Refused(_) => None,
        }
    }

    pub fn refusal(&self) -> Option<RefusalReason> {
        match self {
            Certification::Certified(_) => None,
            Certification::Refused(r) => Some(*r),
        }
    }
}

/// Certifies that the subcircuit up to `p` is output-isolable with
/// respect to `temps`: (a) nothing after `p` touches the set, (b) every
/// defining operation is qfree with all targets inside the set, (c)
/// external controls of each defining operation are unwritten between
/// the definition and `p`, and (d) every other operation touching the
/// set uses it only as controls. A measurement anywhere in the set's
/// history refuses outright.
pub fn certify_isolability(
    program: &Program,
    _trace: &EntanglementTrace,
    temps: &BTreeSet<ResourceId>,
    p: Point,
) -> Result<Certification, ReclaimError> {
    if p == 0 || p as usize > program.len() {
        return Err(ReclaimError::PointOutOfRange(p));
    }
    if let Some(r) = temps
        .iter()
        .find(|r| r.0 as usize >= program.resources.len())
    {
        return Err(ReclaimError::UnknownResource(*r));
    }
    let refuse = |reason| Ok(Certification::Refused(reason));
    let mut defining = Vec::new();
    let mut transfers = Vec::new();
    for op in &program.operations {
        let touches: Vec<&crate::ir::Operand> = op
            .operands
            .iter()
            .filter(|o| temps.contains(&o.resource))
            .collect();
        if touches.is_empty() {
            continue;
        }
        if op.point > p {
            return refuse(RefusalReason::UsedLater);
        }
        if matches!(op.kind, OperationKind::Measure) {
            return refuse(RefusalReason::Measured);
        }
        let writes_temp = touches.iter().any(|o| o.role == Role::Target);
        if writes_temp {
            // Defining op: every target must stay inside the set,
            // otherwise inverting it would rewrite a live resource.
            if op.targets().any(|o| !temps.contains(&o.resource)) {
                return refuse(RefusalReason::CrossBoundaryEntangled);
            }
            if !op.qfree {
                return refuse(RefusalReason::NonQfreeHistory);
            }
            defining.push(op.point);
        } else {
            transfers.push(op.point);
        }
    }
    // Control stability: external controls of the defining history must
    // hold their value until the boundary, or the adjoint replay reads
    // the wrong state. Writes by other defining ops are replayed by the
    // segment itself and are exempt (their targets are inside the set).
    let mut witness = Vec::new();
    for d in &defining {
        let def_op = program.op(*d);
        let external: Vec<ResourceId> = def_op
            .controls()
            .map(|o| o.resource)
            .filter(|r| !temps.contains(r))
            .collect();
        for c in &external {
            for q in (*d + 1)..=p {
                if program.op(q).writes(*c) {
                    return refuse(RefusalReason::CrossBoundaryEntangled);
                }
            }
        }
        witness.push((*d, external));
    }
    Ok(Certification::Certified(IsolabilityCertificate {
        temps: temps.iter().copied().collect(),
        boundary: p,
        defining_ops: defining,
        transfer_ops: transfers,
        control_stability_witness: witness,
    }))
}

/// Temp groups per scope, each paired with its only viable boundary (the
/// group's last touch). Connectivity combines the final entanglement
/// graph (paths may run through live resources such as outputs) with
/// control coupling: a defining operation reading one temporary while
/// writing another ties their restorations together even when no
/// entanglement edge exists, because the adjoint replay must see the
/// control's pre-release state.
fn temp_groups(program: &Program, trace: &EntanglementTrace) -> Vec<(BTreeSet<ResourceId>, Point)> {
    let n = program.len() as Point;
    let mut adjacency: Vec<(ResourceId, ResourceId)> = trace.edges_at(n);
    for op in &program.operations {
        for target in op.targets() {
            if !program.resource(target.resource).is_temporary() {
                continue;
            }
            for control in op.controls() {
                if program.resource(control.resource).is_temporary() {
                    adjacency.push((target.resource, control.resource));
                }
            }
        }
    }
    let component_of = |seed: ResourceId| -> Vec<ResourceId> {
        let mut members = vec![seed];
        let mut frontier = vec![seed];
        while let Some(r) = frontier.pop() {
            for (a, b) in &adjacency {
                let next = if *a == r {
                    *b
                } else if *b == r {
                    *a
                } else {
                    continue;
                };
                if !members.contains(&next) {
                    members.push(next);
                    frontier.push(next);
                }
            }
        }
        members
    };
    let mut grouped: BTreeSet<ResourceId> = BTreeSet::new();
    let mut groups = Vec::new();
    for scope in &program.scopes {
        for rid in &scope.declared {
            let r = program.resource(*rid);
            if !r.is_temporary() || grouped.contains(rid) {
                continue;
            }
            let members: BTreeSet<ResourceId> = component_of(*rid)
                .into_iter()
                .filter(|m| {
                    let mr = program.resource(*m);
                    mr.is_temporary() && mr.scope == r.scope
                })
                .collect();
            let last_touch = members
                .iter()
                .filter_map(|m| program.last_touch(*m))
                .max();
            if let Some(boundary) = last_touch {
                groups.push((members.clone(), boundary));
            }
            grouped.extend(members);
        }
    }
    // At a shared boundary, deeper scopes first: an inner segment may
    // read an outer temp that the outer segment is about to un-write.
    groups.sort_by_key(|(members, boundary)| {
        let first = members.iter().next().copied();
        let depth = first
            .map(|m| scope_depth(program, program.resource(m).scope))
            .unwrap_or(0);
        (*boundary, std::cmp::Reverse(depth), first)
    });
    groups
}

fn scope_depth(program: &Program, scope: crate::ir::ScopeId) -> usize {
    let mut depth = 0;
    let mut cur = Some(scope);
    while let Some(s) = cur {
        depth += 1;
        cur = program.scope(s).parent;
    }
    depth
}

/// Plans early reclamation: for each connected temp group within a
/// scope, certify the earliest boundary (nothing may touch the group
/// afterwards, so this is its last touch) and build the adjoint segment
/// from the defining history. Constraint checks run first and force
/// refusals; untouched temporaries need no reclamation.
///
/// When an inner scope's defining history reads an outer temporary, the
/// outer group's segment is deferred to the inner group's insertion
/// point and ordered after it, keeping the control intact while the
/// inner replay runs.
pub fn plan_early_reclamation(
    program: &Program,
    _ddg: &DependenceGraph,
    trace: &EntanglementTrace,
    liveness: &Liveness,
) -> ReclamationPlan {
    let constraint_refusals = check_constraints(program, liveness, trace);
    let refused_early: BTreeSet<ResourceId> =
        constraint_refusals.iter().map(|r| r.resource).collect();
    let mut refusals = constraint_refusals;

    // Deepest scopes first, so inner insertion points are final before
    // any outer group defers to them.
    let mut candidates: Vec<(BTreeSet<ResourceId>, Point)> = temp_groups(program, trace)
        .into_iter()
        .filter(|(members, _)| !members.iter().any(|m| refused_early.contains(m)))
        .collect();
    candidates.sort_by_key(|(members, boundary)| {
        let first = members.iter().next().copied();
        let depth = first
            .map(|m| scope_depth(program, program.resource(m).scope))
            .unwrap_or(0);
        (std::cmp::Reverse(depth), *boundary, first)
    });

    let mut planned: Vec<(BTreeSet<ResourceId>, Point)> = Vec::new();
    let mut groups = Vec::new();
    for (members, boundary) in candidates {
        // Defer past any already-planned (deeper) segment whose defining
        // history reads one of this group's temps as a control.
        let mut insertion = boundary;
        for (inner_members, inner_insertion) in &planned {
            let inner_reads_us = program.operations.iter().any(|op| {
                op.targets().any(|t| inner_members.contains(&t.resource))
                    && op.controls().any(|c| members.contains(&c.resource))
            });
            if inner_reads_us {
                insertion = insertion.max(*inner_insertion);
            }
        }
        let outcome = certify_isolability(program, trace, &members, insertion)
            .expect("group members and boundary come from the program itself");
        match outcome {
            Certification::Certified(mut certificate) => {
                certificate.boundary = boundary;
                let defining: Vec<Operation> = certificate
                    .defining_ops
                    .iter()
                    .map(|p| program.op(*p).clone())
                    .collect();
                let segment = adjoint_of(&defining)
                    .expect("defining history is measurement-free by certification");
                planned.push((members, insertion));
                groups.push(PlanGroup {
                    certificate,
                    segment,
                    insertion_point: insertion,
                });
            }
            Certification::Refused(reason) => {
                for m in &members {
                    refusals.push(Refusal {
                        resource: *m,
                        name: program.resource(*m).name.clone(),
                        reason,
                        point: boundary,
                    });
                }
            }
        }
    }
    // Emission order: by insertion point, deeper scopes first at ties.
    groups.sort_by_key(|g| {
        let first = g.certificate.temps.first().copied();
        let depth = first
            .map(|m| scope_depth(program, program.resource(m).scope))
            .unwrap_or(0);
        (g.insertion_point, std::cmp::Reverse(depth), first)
    });
    refusals.sort_by_key(|r| (r.resource, r.point));
    refusals.dedup_by_key(|r| r.resource);
    ReclamationPlan {
        groups,
        refusals,
        fingerprint: program.fingerprint(),
    }
}

/// Standalone constraint checks. Refusals for: measured
/// temporaries; temporaries whose declared name goes dead while another
/// alias is still used (reclamation at the name-level candidate would be
/// premature); temporaries entangled across their scope boundary whose
/// history cannot be certified.
pub fn check_constraints(
    program: &Program,
    _liveness: &Liveness,
    trace: &EntanglementTrace,
) -> Vec<Refusal> {
    let mut refusals = Vec::new();
    for r in program.temporaries() {
        if let Some(m) = r.measured_at {
            refusals.push(Refusal {
                resource: r.id,
                name: r.name.clone(),
                reason: RefusalReason::Measured,
                point: m,
            });
            continue;
        }
        if r.aliases.len() > 1 {
            let named_last = program
                .operations
                .iter()
                .rev()
                .find(|op| op.operands.iter().any(|o| o.resource == r.id && o.name == r.name))
                .map(|op| op.point);
            let any_last = program.last_touch(r.id);
            if let (Some(named), Some(any)) = (named_last, any_last) {
                if any > named {
                    refusals.push(Refusal {
                        resource: r.id,
                        name: r.name.clone(),
                        reason: RefusalReason::AliasedLive,
                        point: named,
                    });
                }
            }
        }
    }
    // Cross-boundary: a temp still entangled with an outside resource at
    // its scope exit, with no certificate obtainable at its last touch.
    let already: BTreeSet<ResourceId> = refusals.iter().map(|r| r.resource).collect();
    for (members, boundary) in temp_groups(program, trace) {
        if members.iter().any(|m| already.contains(m)) {
            continue;
        }
        let certified = matches!(
            certify_isolability(program, trace, &members, boundary),
            Ok(Certification::Certified(_))
        );
        if certified {
            continue;
        }
        for m in &members {
            let r = program.resource(*m);
            let scope = program.scope(r.scope);
            let exit = if scope.exit == 0 {
                program.len() as Point
            } else {
                scope.exit
            };
            let crosses = trace
                .edges_at(exit)
                .iter()
                .any(|(a, b)| {
                    let partner = if *a == *m {
                        Some(*b)
                    } else if *b == *m {
                        Some(*a)
                    } else {
                        None
                    };
                    partner.is_some_and(|p| program.resource(p).scope != r.scope)
                });
            if crosses {
                refusals.push(Refusal {
                    resource: *m,
                    name: r.name.clone(),
                    reason: RefusalReason::CrossBoundaryEntangled,
                    point: boundary,
                });
            }
        }
    }
    refusals
}

/// A transformed program together with the release points of its
/// restored temporaries (in the transformed numbering) and a provenance
/// map back to the input program's points.
#[derive(Debug, Clone)]
pub struct Transformed {
    pub program: Program,
    /// Temps restored by inserted segments, with the point after which
    /// each group is free (the last point of its segment).
    pub releases: Vec<ReleaseGroup>,
    /// For each new point (1-based), the originating input point
    /// (inserted segment ops map to their group's boundary).
    pub provenance: Vec<Point>,
    /// First point of a trailing global-uncompute suffix, if one exists.
    pub suffix_start: Option<Point>,
    pub warnings: Vec<Diagnostic>,
}

/// Splices each plan group's adjoint segment immediately after its
/// boundary and renumbers. Inserted operations are marked adjoint and
/// reference the forward points they invert.
pub fn insert_early_uncompute(
    program: &Program,
    plan: &ReclamationPlan,
) -> Result<Transformed, ReclaimError> {
    if plan.fingerprint != program.fingerprint() {
        return Err(ReclaimError::StalePlan);
    }
    let mut new_ops: Vec<Operation> = Vec::new();
    let mut provenance: Vec<Point> = Vec::new();
    let mut fwd_map: BTreeMap<Point, Point> = BTreeMap::new();
    let mut releases: Vec<(Vec<ResourceId>, usize)> = Vec::new();
    for op in &program.operations {
        let mut placed = op.clone();
        placed.point = (new_ops.len() + 1) as Point;
        fwd_map.insert(op.point, placed.point);
        provenance.push(op.point);
        new_ops.push(placed);
        for group in plan.groups.iter().filter(|g| g.insertion_point == op.point) {
            for seg_op in &group.segment {
                let mut placed = seg_op.clone();
                placed.point = (new_ops.len() + 1) as Point;
                // The inverted forward op is already placed, so its new
                // point is known.
                placed.inverse_of = seg_op.inverse_of.and_then(|f| fwd_map.get(&f).copied());
                provenance.push(group.insertion_point);
                new_ops.push(placed);
            }
            releases.push((
                group.certificate.temps.clone(),
                new_ops.len(),
            ));
        }
    }
    let mut out = program.clone();
    out.operations = new_ops;
    refresh_points(&mut out);
    out.validate().map_err(|_| ReclaimError::StalePlan)?;
    Ok(Transformed {
        program: out,
        releases: releases
            .into_iter()
            .map(|(temps, release)| ReleaseGroup {
                temps,
                release: release as Point,
            })
            .collect(),
        provenance,
        suffix_start: None,
        warnings: Vec::new(),
    })
}

/// Appends the adjoint of every temporary's defining history after the
/// last forward operation (compute-then-uncompute). Temporaries with a
/// measured or boundary-crossing history are left dirty with a warning;
/// restoration is claimed only for groups whose external controls stay
/// stable through the end.
pub fn insert_global_uncompute(program: &Program) -> Transformed {
    let n = program.len() as Point;
    let trace = crate::analysis::build_entanglement_trace(program, &[]);
    let mut warnings = Vec::new();
    let mut appended: Vec<Point> = Vec::new();
    let mut claims: Vec<Vec<ResourceId>> = Vec::new();
    let mut handled: BTreeSet<ResourceId> = BTreeSet::new();
    for (members, _boundary) in temp_groups(program, &trace) {
        if members.iter().any(|m| handled.contains(m)) {
            continue;
        }
        handled.extend(members.iter().copied());
        let mut dirty = None;
        for m in &members {
            if program.resource(*m).measured_at.is_some() {
                dirty = Some("its history contains a measurement");
                break;
            }
        }
        let mut defining = Vec::new();
        if dirty.is_none() {
            'ops: for op in &program.operations {
                let writes_member = op.targets().any(|o| members.contains(&o.resource));
                if !writes_member {
                    continue;
                }
                if op.targets().any(|o| !members.contains(&o.resource)) {
                    dirty = Some("its history writes resources outside the temp set");
                    break 'ops;
                }
                defining.push(op.point);
            }
        }
        if let Some(why) = dirty {
            for m in &members {
                warnings.push(Diagnostic {
                    severity: Severity::Warning,
                    code: "W002",
                    span: Span {
                        line: 0,
                        col: 0,
                        end_line: 0,
                        end_col: 0,
                    },
                    message: format!(
                        "temporary `{}` left dirty by global uncompute: {why}",
                        program.resource(*m).name
                    ),
                    path: program.name.clone(),
                });
            }
            continue;
        }
        // Bennett validity: the replay only restores a basis-permutation
        // history (copy-outs commute with it) whose external controls
        // survive untouched to the end.
        let mut unverified = None;
        if !defining.iter().all(|d| program.op(*d).qfree) {
            unverified = Some("its history is not a basis permutation");
        }
        'stability: for d in &defining {
            for c in program.op(*d).controls() {
                if members.contains(&c.resource) {
                    continue;
                }
                for q in (*d + 1)..=n {
                    if program.op(q).writes(c.resource) {
                        unverified =
                            Some("a control of its history is overwritten before the suffix runs");
                        break 'stability;
                    }
                }
            }
        }
        appended.extend(defining.iter().copied());
        match unverified {
            None => claims.push(members.iter().copied().collect()),
            Some(why) => {
                for m in &members {
                    warnings.push(Diagnostic {
                        severity: Severity::Warning,
                        code: "W003",
                        span: Span {
                            line: 0,
                            col: 0,
                            end_line: 0,
                            end_col: 0,
                        },
                        message: format!(
                            "global uncompute of `{}` is appended but unverified: {why}",
                            program.resource(*m).name
                        ),
                        path: program.name.clone(),
                    });
                }
            }
        }
    }
    appended.sort();
    let defining_ops: Vec<Operation> = appended.iter().map(|p| program.op(*p).clone()).collect();
    let suffix = adjoint_of(&defining_ops).expect("measured histories were excluded");
    let mut out = program.clone();
    let mut provenance: Vec<Point> = (1..=n).collect();
    for (i, mut op) in suffix.into_iter().enumerate() {
        op.point = n + 1 + i as Point;
        provenance.push(n.max(1));
        out.operations.push(op);
    }
    refresh_points(&mut out);
    let releases = claims
        .into_iter()
        .map(|temps| {
            let release = out
                .operations
                .iter()
                .rev()
                .find(|op| temps.iter().any(|t| op.touches(*t)))
                .map(|op| op.point)
                .unwrap_or(out.operations.len() as Point);
            ReleaseGroup { temps, release }
        })
        .collect();
    let suffix_start = (out.len() as Point > n).then_some(n + 1);
    Transformed {
        program: out,
        releases,
        provenance,
        suffix_start,
        warnings,
    }
}

/// Splices the adjoint of the unitary defining history of `temps` after
/// `boundary` with no certification at all. Exists so the verification
/// suite can demonstrate that refused reclamations really do break the
/// restoration invariant or the observable outputs.
pub fn insert_uncompute_unchecked(
    program: &Program,
    temps: &BTreeSet<ResourceId>,
    boundary: Point,
) -> Result<Transformed, ReclaimError> {
    if boundary == 0 || boundary as usize > program.len() {
        return Err(ReclaimError::PointOutOfRange(boundary));
    }
    for t in temps {
        if t.0 as usize >= program.resources.len() {
            return Err(ReclaimError::UnknownResource(*t));
        }
    }
    let defining: Vec<Operation> = program
        .operations
        .iter()
        .filter(|op| {
            op.point <= boundary
                && !matches!(op.kind, OperationKind::Measure)
                && op.targets().any(|o| temps.contains(&o.resource))
        })
        .cloned()
        .collect();
    let segment = adjoint_of(&defining).expect("measure ops filtered out");
    let mut new_ops = Vec::new();
    let mut provenance = Vec::new();
    let mut release = 0usize;
    for op in &program.operations {
        let mut placed = op.clone();
        placed.point = (new_ops.len() + 1) as Point;
        provenance.push(op.point);
        new_ops.push(placed);
        if op.point == boundary {
            for seg_op in &segment {
                let mut placed = seg_op.clone();
                placed.point = (new_ops.len() + 1) as Point;
                placed.inverse_of = None;
                provenance.push(boundary);
                new_ops.push(placed);
            }
            release = new_ops.len();
        }
    }
    let mut out = program.clone();
    out.operations = new_ops;
    refresh_points(&mut out);
    Ok(Transformed {
        program: out,
        releases: vec![ReleaseGroup {
            temps: temps.iter().copied().collect(),
            release: release as Point,
        }],
        provenance,
        suffix_start: None,
        warnings: Vec::new(),
    })
}

/// Checks the emergent parameter-passing discipline on every function:
/// a by-value parameter's net history within the body must vanish by the
/// end (every write structurally cancelled by its adjoint with stable
/// controls in between, or the parameter used purely as a control).
/// `ref` and returned parameters are exempt.
pub fn enforce_param_semantics(program: &Program) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for def in program.functions.values() {
        check_function_params(&def.body, &def.name, &mut diags);
    }
    check_function_params(program, &program.name, &mut diags);
    diags
}

fn check_function_params(body: &Program, fname: &str, diags: &mut Vec<Diagnostic>) {
    let span = Span {
        line: 0,
        col: 0,
        end_line: 0,
        end_col: 0,
    };
    for pid in &body.params {
        let param = body.resource(*pid);
        if param.persistent {
            continue;
        }
        let touching: Vec<&Operation> = body
            .operations
            .iter()
            .filter(|op| op.touches(*pid))
            .collect();
        let control_only = touching
            .iter()
            .all(|op| op.operands.iter().all(|o| o.resource != *pid || o.role == Role::Control));
        if control_only {
            // Control-only use restores basis-state callers exactly. If
            // the body leaves a coupled temporary dirty, a superposed
            // caller argument may stay entangled with it.
            let mut dirty_partner = None;
            for op in &touching {
                if !op.kind.is_call() && op.operands.len() > 1 {
                    for o in op.targets() {
                        let t = body.resource(o.resource);
                        if t.is_temporary() && !body_restores(body, o.resource) {
                            dirty_partner = Some(t.name.clone());
                        }
                    }
                }
            }
            if let Some(partner) = dirty_partner {
                diags.push(Diagnostic {
                    severity: Severity::Warning,
                    code: "W001",
                    span,
                    message: format!(
                        "`{}`: by-value parameter `{}` controls unreclaimed temporary \
                         `{partner}`; a superposed argument may remain entangled after the call",
                        fname, param.name
                    ),
                    path: fname.to_string(),
                });
            }
            continue;
        }
        if !writes_cancel(body, *pid) {
            diags.push(Diagnostic {
                severity: Severity::Error,
                code: "E020",
                span,
                message: format!(
                    "pass-by-value violation: `{}` modifies by-value parameter `{}` \
                     without restoring it (declare the parameter `ref` or undo the writes)",
                    fname, param.name
                ),
                path: fname.to_string(),
            });
        }
    }
}

/// True if some adjoint operation in the body writes `r`.
fn body_restores(body: &Program, r: ResourceId) -> bool {
    body.operations
        .iter()
        .any(|op| op.kind.is_adjoint() && op.writes(r))
}

/// Structural cancellation of the writes to `r`: operations targeting it
/// must nest as mirrored adjoint pairs with their controls unwritten in
/// between.
fn writes_cancel(body: &Program, r: ResourceId) -> bool {
    let writers: Vec<&Operation> = body
        .operations
        .iter()
        .filter(|op| op.writes(r))
        .collect();
    let mut stack: Vec<&Operation> = Vec::new();
    for op in writers {
        if matches!(op.kind, OperationKind::Measure) {
            return false;
        }
        if let Some(top) = stack.last() {
            if is_adjoint_pair(top, op) && controls_stable_between(body, top, op) {
                stack.pop();
                continue;
            }
        }
        stack.push(op);
    }
    stack.is_empty()
}

fn is_adjoint_pair(a: &Operation, b: &Operation) -> bool {
    if a.operands.len() != b.operands.len() {
        return false;
    }
    let operands_match = a
        .operands
        .iter()
        .zip(&b.operands)
        .all(|(x, y)| x.resource == y.resource && x.role == y.role);
    if !operands_match {
        return false;
    }
    match (&a.kind, &b.kind) {
        (OperationKind::Gate(g1), OperationKind::Gate(g2)) => g1 == g2 && g1.is_self_inverse(),
        (OperationKind::Gate(g1), OperationKind::AdjointGate(g2))
        | (OperationKind::AdjointGate(g1), OperationKind::Gate(g2)) => g1 == g2,
        (OperationKind::Call(f1), OperationKind::AdjointCall(f2))
        | (OperationKind::AdjointCall(f1), OperationKind::Call(f2)) => f1 == f2,
        _ => false,
    }
}

fn controls_stable_between(body: &Program, first: &Operation, second: &Operation) -> bool {
    first.controls().all(|c| {
        ((first.point + 1)..second.point).all(|q| !body.op(q).writes(c.resource))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{build_dependence_graph, build_entanglement_trace, compute_liveness};
    use crate::frontend::{parse, SourceUnit};

    const RUNNING_EXAMPLE: &str = r#"
void f(qubit x, ref qubit t) { CX x, t; }
void g(qubit x, ref qubit t) { X t; CX x, t; }
void h(qubit x, ref qubit t) { CX x, t; }
void k(ref qubit y) { X y; }

qubit[] compute(qubit x1, qubit x2, qubit y1, qubit y2) {
    qubit t1, t2, t3, t4;
    f(x1, t1);
    g(x1, t2);
    CNOT t1, t2;
    CNOT t2, y1;
    h(x1, t3);
    h(x2, t4);
    CNOT t3, y2;
    CNOT t4, y2;
    k(y2);
    return [y1, y2];
}
"#;

    fn compile(src: &str) -> Program {
        parse(&SourceUnit::new(src, "t.qls"))
            .unwrap()
            .entry_program(None)
            .unwrap()
    }

    fn plan_for(program: &Program) -> ReclamationPlan {
        let ddg = build_dependence_graph(program);
        let trace = build_entanglement_trace(program, &[]);
        let liveness = compute_liveness(program, &trace);
        plan_early_reclamation(program, &ddg, &trace, &liveness)
    }

    fn rid(p: &Program, name: &str) -> ResourceId {
        p.resource_by_name(name).unwrap().id
    }

    #[test]
    fn running_example_certificate_at_p4() {
        let p = compile(RUNNING_EXAMPLE);
        let trace = build_entanglement_trace(&p, &[]);
        let temps: BTreeSet<ResourceId> = [rid(&p, "t1"), rid(&p, "t2")].into();
        let cert = certify_isolability(&p, &trace, &temps, 4)
            .unwrap()
            .certificate()
            .expect("certifiable at p4");
        assert_eq!(cert.defining_ops, vec![1, 2, 3]);
        assert_eq!(cert.transfer_ops, vec![4]);
    }

    #[test]
    fn t3_t4_refused_at_p7_because_p8_touches_t4() {
        let p = compile(RUNNING_EXAMPLE);
        let trace = build_entanglement_trace(&p, &[]);
        let temps: BTreeSet<ResourceId> = [rid(&p, "t3"), rid(&p, "t4")].into();
        assert_eq!(
            certify_isolability(&p, &trace, &temps, 7).unwrap().refusal(),
            Some(RefusalReason::UsedLater)
        );
        assert!(certify_isolability(&p, &trace, &temps, 8)
            .unwrap()
            .refusal()
            .is_none());
    }

    #[test]
    fn non_qfree_history_is_refused() {
        let p = compile("void main(ref qubit y) { qubit t; H t; CX t, y; }");
        let trace = build_entanglement_trace(&p, &[]);
        let temps: BTreeSet<ResourceId> = [rid(&p, "t")].into();
        assert_eq!(
            certify_isolability(&p, &trace, &temps, 2).unwrap().refusal(),
            Some(RefusalReason::NonQfreeHistory)
        );
        // Caller-contract errors are distinct from refusals.
        assert!(matches!(
            certify_isolability(&p, &trace, &temps, 99),
            Err(ReclaimError::PointOutOfRange(99))
        ));
    }

    #[test]
    fn running_example_plan_has_expected_segments() {
        let p = compile(RUNNING_EXAMPLE);
        let plan = plan_for(&p);
        assert_eq!(plan.groups.len(), 2);
        assert!(plan.refusals.is_empty());

        let g1 = &plan.groups[0];
        assert_eq!(g1.certificate.boundary, 4);
        let seg1: Vec<String> = g1.segment.iter().map(op_text).collect();
        assert_eq!(
            seg1,
            vec!["CX t1, t2", "adjoint g(x1, t2)", "adjoint f(x1, t1)"]
        );

        let g2 = &plan.groups[1];
        assert_eq!(g2.certificate.boundary, 8);
        let seg2: Vec<String> = g2.segment.iter().map(op_text).collect();
        assert_eq!(seg2, vec!["adjoint h(x2, t4)", "adjoint h(x1, t3)"]);
    }

    #[test]
    fn no_temporaries_means_empty_plan() {
        let p = compile("void main(qubit x, ref qubit y) { CX x, y; }");
        let plan = plan_for(&p);
        assert!(plan.is_empty());
        assert!(plan.refusals.is_empty());
    }

    #[test]
    fn measured_temp_is_refused() {
        let p = compile("void main(qubit x, ref qubit y) { qubit t; CX x, t; measure t; }");
        let plan = plan_for(&p);
        assert!(plan.is_empty());
        assert_eq!(plan.refusals.len(), 1);
        assert_eq!(plan.refusals[0].reason, RefusalReason::Measured);
    }

    #[test]
    fn live_alias_is_refused() {
        let p = compile(
            "void main(qubit x, ref qubit y, ref qubit z) { qubit t; alias u = t; CX x, t; CX t, y; CX u, z; }",
        );
        let plan = plan_for(&p);
        let refusal = plan
            .refusals
            .iter()
            .find(|r| r.name == "t")
            .expect("t should be refused");
        assert_eq!(refusal.reason, RefusalReason::AliasedLive);
        // Name-level candidate: last use spelled `t` is p2.
        assert_eq!(refusal.point, 2);
    }

    #[test]
    fn swap_into_output_is_cross_boundary() {
        let p = compile("void main(qubit x, ref qubit y) { qubit t; CX x, t; SWAP t, y; }");
        let plan = plan_for(&p);
        assert_eq!(plan.refusals.len(), 1);
        assert_eq!(
            plan.refusals[0].reason,
            RefusalReason::CrossBoundaryEntangled
        );
    }

    #[test]
    fn rewritten_control_between_def_and_boundary_is_refused() {
        // a is rewritten at p3 after defining t at p2; replaying CX a, t
        // would read the wrong control.
        let p = compile(
            "void main(ref qubit y) { qubit a, t; X a; CX a, t; X a; CX t, y; }",
        );
        let trace = build_entanglement_trace(&p, &[]);
        let temps: BTreeSet<ResourceId> = [rid(&p, "t")].into();
        assert_eq!(
            certify_isolability(&p, &trace, &temps, 4).unwrap().refusal(),
            Some(RefusalReason::CrossBoundaryEntangled)
        );
        // Reclaiming {a, t} jointly replays the X a writes and is fine.
        let both: BTreeSet<ResourceId> = [rid(&p, "a"), rid(&p, "t")].into();
        assert!(certify_isolability(&p, &trace, &both, 4)
            .unwrap()
            .refusal()
            .is_none());
    }

    #[test]
    fn early_insertion_matches_expected_shape() {
        let p = compile(RUNNING_EXAMPLE);
        let plan = plan_for(&p);
        let out = insert_early_uncompute(&p, &plan).unwrap();
        assert_eq!(out.program.len(), 14);
        let names: Vec<String> = out.program.operations.iter().map(op_text).collect();
        assert_eq!(names[4], "CX t1, t2");
        assert_eq!(names[5], "adjoint g(x1, t2)");
        assert_eq!(names[6], "adjoint f(x1, t1)");
        assert_eq!(names[7], "h(x1, t3)");
        assert_eq!(names[11], "adjoint h(x2, t4)");
        assert_eq!(names[13], "k(y2)");
        assert_eq!(out.releases.len(), 2);
        assert_eq!(out.releases[0].release, 7);
        assert_eq!(out.releases[1].release, 13);
        // Inserted ops reference the forward ops they invert.
        assert_eq!(out.program.op(5).inverse_of, Some(3));
        assert_eq!(out.program.op(7).inverse_of, Some(1));
        out.program.validate().unwrap();
    }

    #[test]
    fn empty_plan_leaves_program_unchanged() {
        let p = compile("void main(qubit x, ref qubit y) { CX x, y; }");
        let plan = plan_for(&p);
        let out = insert_early_uncompute(&p, &plan).unwrap();
        assert_eq!(out.program.operations, p.operations);
    }

    #[test]
    fn stale_plan_is_rejected() {
        let p = compile(RUNNING_EXAMPLE);
        let plan = plan_for(&p);
        let other = compile("void main(qubit x, ref qubit y) { CX x, y; }");
        assert!(matches!(
            insert_early_uncompute(&other, &plan),
            Err(ReclaimError::StalePlan)
        ));
    }

    #[test]
    fn global_uncompute_appends_reversed_history() {
        let p = compile(RUNNING_EXAMPLE);
        let out = insert_global_uncompute(&p);
        assert_eq!(out.program.len(), 14);
        assert_eq!(out.suffix_start, Some(10));
        let suffix: Vec<String> = out.program.operations[9..].iter().map(op_text).collect();
        assert_eq!(
            suffix,
            vec![
                "adjoint h(x2, t4)",
                "adjoint h(x1, t3)",
                "CX t1, t2",
                "adjoint g(x1, t2)",
                "adjoint f(x1, t1)"
            ]
        );
        assert_eq!(out.releases.len(), 2);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn global_uncompute_skips_measured_temp_with_warning() {
        let p = compile("void main(qubit x, ref qubit y) { qubit t; CX x, t; measure t; X y; }");
        let out = insert_global_uncompute(&p);
        assert_eq!(out.program.len(), p.len());
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].message.contains("dirty"));
        assert!(out.releases.is_empty());
    }

    #[test]
    fn global_uncompute_without_temps_is_identity() {
        let p = compile("void main(qubit x, ref qubit y) { CX x, y; }");
        let out = insert_global_uncompute(&p);
        assert_eq!(out.program.operations, p.operations);
        assert_eq!(out.suffix_start, None);
    }

    #[test]
    fn control_only_by_value_param_passes() {
        let p = compile(RUNNING_EXAMPLE);
        let diags = enforce_param_semantics(&p);
        assert!(
            diags.iter().all(|d| d.severity != Severity::Error),
            "{diags:?}"
        );
    }

    #[test]
    fn unrestored_write_to_by_value_param_is_an_error() {
        let p = compile("void bad(qubit x) { X x; }\nvoid main(qubit a, ref qubit y) { bad(a); CX a, y; }");
        let diags = enforce_param_semantics(&p);
        assert!(diags
            .iter()
            .any(|d| d.code == "E020" && d.message.contains("bad")));
    }

    #[test]
    fn mirrored_writes_to_by_value_param_pass() {
        let p = compile(
            "void flip2(qubit x) { X x; X x; }\nvoid main(qubit a, ref qubit y) { flip2(a); CX a, y; }",
        );
        let diags = enforce_param_semantics(&p);
        assert!(diags.iter().all(|d| d.severity != Severity::Error));
    }

    #[test]
    fn ref_param_may_be_modified() {
        let p = compile("void set(ref qubit x) { X x; }\nvoid main(ref qubit y) { set(y); }");
        let diags = enforce_param_semantics(&p);
        assert!(diags.iter().all(|d| d.severity != Severity::Error));
    }

    #[test]
    fn call_coupled_temps_in_one_scope_are_grouped_jointly() {
        // cpy creates no entanglement edge for its by-value control, but
        // t's replay must see a's pre-release state, so they form one
        // group with a single segment.
        let p = compile(
            "void cpy(qubit c, ref qubit t) { CX c, t; }\nvoid main(qubit x, ref qubit y) { qubit a, t; cpy(x, a); cpy(a, t); CX t, y; }",
        );
        let plan = plan_for(&p);
        assert_eq!(plan.groups.len(), 1);
        assert_eq!(plan.groups[0].certificate.temps.len(), 2);
        let seg: Vec<String> = plan.groups[0].segment.iter().map(op_text).collect();
        assert_eq!(seg, vec!["adjoint cpy(a, t)", "adjoint cpy(x, a)"]);
    }

    #[test]
    fn outer_segment_defers_past_inner_segment_reading_it() {
        // s's last forward touch is p2, but the inner group's segment
        // replays cpy(s, t) and must run first; s's segment defers to the
        // same insertion point and is emitted after.
        let p = compile(
            "void cpy(qubit c, ref qubit t) { CX c, t; }\nvoid main(qubit x, ref qubit y) { qubit s; cpy(x, s); { qubit t; cpy(s, t); CX t, y; } }",
        );
        let plan = plan_for(&p);
        assert_eq!(plan.groups.len(), 2);
        assert_eq!(plan.groups[0].insertion_point, 3);
        assert_eq!(plan.groups[1].insertion_point, 3);
        // Inner group (t) first, outer (s) second.
        let first_temps: Vec<&str> = plan.groups[0]
            .certificate
            .temps
            .iter()
            .map(|r| p.resource(*r).name.as_str())
            .collect();
        assert_eq!(first_temps, vec!["t"]);
        let out = insert_early_uncompute(&p, &plan).unwrap();
        let names: Vec<String> = out.program.operations.iter().map(op_text).collect();
        assert_eq!(
            names,
            vec![
                "cpy(x, s)",
                "cpy(s, t)",
                "CX t, y",
                "adjoint cpy(s, t)",
                "adjoint cpy(x, s)"
            ]
        );
    }
}
