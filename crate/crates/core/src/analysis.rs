//! Dependence, entanglement, and lifetime analysis.
//!
//! Three static structures drive reclamation: the data dependence graph
//! (forward edges between points sharing a resource where at least one
//! access writes), the entanglement trace (per-point undirected graphs
//! over resources, grown conservatively from multi-qubit operations),
//! and the liveness fixpoint that propagates through both direct future
//! uses and entanglement with live resources. Lifetimes are the
//! contiguous intervals of live points; the live-set sizes bound peak
//! circuit width.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::ir::{OperationKind, Point, Program, ResourceId, ResourceKind, Role};

/// Access classification per the control/target role split: controls
/// read, targets write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AccessPair {
    WriteRead,
    WriteWrite,
    ReadWrite,
}

/// A dependence edge `from < to`, with the shared resource and access
/// pair that induced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DepEdge {
    pub from: Point,
    pub to: Point,
    pub resource: ResourceId,
    pub access: AccessPair,
}

/// Forward-edge DAG over program points 1..=n.
#[derive(Debug, Clone)]
pub struct DependenceGraph {
    pub n: usize,
    pub edges: Vec<DepEdge>,
}

impl DependenceGraph {
    /// Distinct (from, to) pairs, deduplicated across shared resources.
    pub fn edge_pairs(&self) -> Vec<(Point, Point)> {
        let mut pairs: Vec<(Point, Point)> = self.edges.iter().map(|e| (e.from, e.to)).collect();
        pairs.sort();
        pairs.dedup();
        pairs
    }

    pub fn predecessors(&self, point: Point) -> impl Iterator<Item = Point> + '_ {
        let mut seen = std::collections::BTreeSet::new();
        self.edges
            .iter()
            .filter(move |e| e.to == point)
            .map(|e| e.from)
            .filter(move |p| seen.insert(*p))
    }
}

/// Builds the dependence graph of an alias-resolved program: one edge per
/// ordered pair of operations sharing a resource where at least one
/// access is a write. Read-read sharing produces no edge.
pub fn build_dependence_graph(program: &Program) -> DependenceGraph {
    let mut accesses: BTreeMap<ResourceId, Vec<(Point, bool)>> = BTreeMap::new();
    for op in &program.operations {
        for o in &op.operands {
            accesses
                .entry(o.resource)
                .or_default()
                .push((op.point, o.role == Role::Target));
        }
    }
    let mut edges = Vec::new();
    for (resource, acc) in &accesses {
        for i in 0..acc.len() {
            for j in (i + 1)..acc.len() {
                let (pi, wi) = acc[i];
                let (pj, wj) = acc[j];
                let access = match (wi, wj) {
                    (true, false) => AccessPair::WriteRead,
                    (true, true) => AccessPair::WriteWrite,
                    (false, true) => AccessPair::ReadWrite,
                    (false, false) => continue,
                };
                edges.push(DepEdge {
                    from: pi,
                    to: pj,
                    resource: *resource,
                    access,
                });
            }
        }
    }
    edges.sort_by_key(|e| (e.from, e.to, e.resource));
    DependenceGraph {
        n: program.len(),
        edges,
    }
}

/// An undirected entanglement edge and the point that introduced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EntEdge {
    pub a: ResourceId,
    pub b: ResourceId,
    pub introduced_at: Point,
}

/// A reclamation group's release: after `release` has executed, `temps`
/// are restored and their incident entanglement edges are dropped from
/// `release + 1` on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReleaseGroup {
    pub temps: Vec<ResourceId>,
    pub release: Point,
}

/// Per-point undirected graphs over resources. Edges accumulate from
/// multi-qubit operations and are removed only by certified releases.
#[derive(Debug, Clone)]
pub struct EntanglementTrace {
    pub n: usize,
    pub edges: Vec<EntEdge>,
    drop_from: BTreeMap<ResourceId, Point>,
}

impl EntanglementTrace {
    /// Edges present in the graph at point `p`.
    pub fn edges_at(&self, p: Point) -> Vec<(ResourceId, ResourceId)> {
        self.edges
            .iter()
            .filter(|e| self.visible(e, p))
            .map(|e| (e.a, e.b))
            .collect()
    }

    fn visible(&self, e: &EntEdge, p: Point) -> bool {
        if e.introduced_at > p {
            return false;
        }
        for r in [e.a, e.b] {
            if let Some(drop) = self.drop_from.get(&r) {
                if e.introduced_at < *drop && *drop <= p {
                    return false;
                }
            }
        }
        true
    }

    /// Final-point edge set, deduplicated to unordered pairs.
    pub fn final_pairs(&self) -> Vec<(ResourceId, ResourceId)> {
        let mut pairs = self.edges_at(self.n as Point);
        pairs.sort();
        pairs.dedup();
        pairs
    }

    /// Connected component of `seed` in the graph at point `p`.
    pub fn component_at(&self, seed: ResourceId, p: Point) -> Vec<ResourceId> {
        let edges = self.edges_at(p);
        let mut members = vec![seed];
        let mut frontier = vec![seed];
        while let Some(r) = frontier.pop() {
            for (a, b) in &edges {
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
        members.sort();
        members
    }

    pub fn incident_at(&self, r: ResourceId, p: Point) -> bool {
        self.edges_at(p).iter().any(|(a, b)| *a == r || *b == r)
    }
}

/// Builds the entanglement trace. Every multi-qubit operation introduces
/// an edge between each pair of its operands, except pairs involving a
/// by-value (control-role) operand of a call: the callee restores those
/// parameters at its boundary, so no coupling escapes the call for them.
/// When releases are supplied, edges incident to a released temporary are
/// dropped from the point after its segment completes.
pub fn build_entanglement_trace(program: &Program, releases: &[ReleaseGroup]) -> EntanglementTrace {
    let mut edges = Vec::new();
    for op in &program.operations {
        if matches!(op.kind, OperationKind::Measure) {
            continue;
        }
        let coupled: Vec<&crate::ir::Operand> = op
            .operands
            .iter()
            .filter(|o| !(op.kind.is_call() && o.role == Role::Control))
            .collect();
        for i in 0..coupled.len() {
            for j in (i + 1)..coupled.len() {
                let (mut a, mut b) = (coupled[i].resource, coupled[j].resource);
                if b < a {
                    std::mem::swap(&mut a, &mut b);
                }
                edges.push(EntEdge {
                    a,
                    b,
                    introduced_at: op.point,
                });
            }
        }
    }
    let mut drop_from = BTreeMap::new();
    for group in releases {
        for t in &group.temps {
            drop_from.insert(*t, group.release + 1);
        }
    }
    EntanglementTrace {
        n: program.len(),
        edges,
        drop_from,
    }
}

/// The liveness predicate live(v, p) for every resource and point.
#[derive(Debug, Clone)]
pub struct Liveness {
    pub n: usize,
    live: Vec<Vec<bool>>,
}

impl Liveness {
    pub fn live(&self, r: ResourceId, p: Point) -> bool {
        if p == 0 || p as usize > self.n {
            return false;
        }
        self.live[(p - 1) as usize][r.0 as usize]
    }

    /// Contiguous live interval of `r`, if it is live anywhere.
    pub fn interval(&self, r: ResourceId) -> Option<(Point, Point)> {
        let mut lo = None;
        let mut hi = None;
        for p in 1..=self.n as Point {
            if self.live(r, p) {
                lo.get_or_insert(p);
                hi = Some(p);
            }
        }
        lo.zip(hi)
    }

    /// Live set at point `p`.
    pub fn live_set(&self, p: Point) -> Vec<ResourceId> {
        if p == 0 || p as usize > self.n {
            return Vec::new();
        }
        self.live[(p - 1) as usize]
            .iter()
            .enumerate()
            .filter(|(_, l)| **l)
            .map(|(i, _)| ResourceId(i as u32))
            .collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.live
            .iter()
            .map(|row| row.iter().filter(|l| **l).count())
            .collect()
    }

    pub fn wmax(&self) -> usize {
        self.counts().into_iter().max().unwrap_or(0)
    }
}

/// Least fixpoint of the liveness rules:
///
/// 1. a resource is live at `p` if some later operation uses it (and it
///    has been touched by point `p`);
/// 2. a resource is live at `p` if it is entangled at `p` with a live
///    resource;
/// 3. parameters of the analyzed function are live over the whole
///    program (their state is caller-visible at exit), and persistent
///    locals are live through the end from their first touch.
pub fn compute_liveness(program: &Program, trace: &EntanglementTrace) -> Liveness {
    let n = program.len();
    let nres = program.resources.len();
    let mut live = vec![vec![false; nres]; n];
    let mut first_touch = vec![Point::MAX; nres];
    let mut use_points: Vec<Vec<Point>> = vec![Vec::new(); nres];
    for op in &program.operations {
        for o in &op.operands {
            let i = o.resource.0 as usize;
            first_touch[i] = first_touch[i].min(op.point);
            use_points[i].push(op.point);
        }
    }
    for r in &program.resources {
        let i = r.id.0 as usize;
        let base_from = match r.kind {
            ResourceKind::Input | ResourceKind::Output | ResourceKind::Parameter => Some(1),
            ResourceKind::Temporary if r.persistent => Some(if first_touch[i] == Point::MAX {
                n as Point
            } else {
                first_touch[i]
            }),
            ResourceKind::Temporary => None,
        };
        for p in 1..=n as Point {
            let direct = first_touch[i] <= p && use_points[i].iter().any(|u| *u > p);
            let base = base_from.map(|from| p >= from).unwrap_or(false);
            if direct || base {
                live[(p - 1) as usize][i] = true;
            }
        }
    }
    // Entanglement propagation to fixpoint.
    let edges_per_point: Vec<Vec<(usize, usize)>> = (1..=n as Point)
        .map(|p| {
            trace
                .edges_at(p)
                .into_iter()
                .map(|(a, b)| (a.0 as usize, b.0 as usize))
                .collect()
        })
        .collect();
    let mut changed = true;
    while changed {
        changed = false;
        for p in 0..n {
            for (a, b) in &edges_per_point[p] {
                if live[p][*a] && !live[p][*b] {
                    live[p][*b] = true;
                    changed = true;
                }
                if live[p][*b] && !live[p][*a] {
                    live[p][*a] = true;
                    changed = true;
                }
            }
        }
    }
    Liveness { n, live }
}

/// Per-resource lifetime intervals plus live-set sizes.
#[derive(Debug, Clone, Serialize)]
pub struct LifetimeRow {
    pub resource: ResourceId,
    pub name: String,
    pub conservative: Option<(Point, Point)>,
    pub effective: Option<(Point, Point)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LifetimeTable {
    pub rows: Vec<LifetimeRow>,
    /// Live-set size per point under the effective (release-aware) view.
    pub live_counts: Vec<usize>,
    pub wmax: usize,
    /// Live-set size per point ignoring releases.
    pub conservative_counts: Vec<usize>,
    pub wmax_conservative: usize,
}

impl LifetimeTable {
    pub fn row(&self, name: &str) -> Option<&LifetimeRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Computes conservative intervals from the release-free liveness and
/// effective intervals from liveness recomputed with the releases'
/// entanglement-edge drops applied.
pub fn compute_lifetimes(
    program: &Program,
    conservative: &Liveness,
    releases: &[ReleaseGroup],
) -> LifetimeTable {
    let effective_liveness = if releases.is_empty() {
        conservative.clone()
    } else {
        let trace = build_entanglement_trace(program, releases);
        compute_liveness(program, &trace)
    };
    let released_at: BTreeMap<ResourceId, Point> = releases
        .iter()
        .flat_map(|g| g.temps.iter().map(|t| (*t, g.release)))
        .collect();
    let rows = program
        .resources
        .iter()
        .map(|r| {
            let cons = conservative.interval(r.id);
            let eff = effective_liveness.interval(r.id).map(|(lo, hi)| {
                // A released temp is free strictly after its release point.
                match released_at.get(&r.id) {
                    Some(release) => (lo, hi.min(*release)),
                    None => (lo, hi),
                }
            });
            LifetimeRow {
                resource: r.id,
                name: r.name.clone(),
                conservative: cons,
                effective: eff,
            }
        })
        .collect();
    let live_counts = effective_liveness.counts();
    let wmax = effective_liveness.wmax();
    let conservative_counts = conservative.counts();
    let wmax_conservative = conservative.wmax();
    LifetimeTable {
        rows,
        live_counts,
        wmax,
        conservative_counts,
        wmax_conservative,
    }
}

/// Longest directed path in the dependence graph under per-point costs.
/// With unit costs the length equals the optimal block-level depth.
/// Returns (total cost, path points); ties break toward lower points.
pub fn critical_path<F>(ddg: &DependenceGraph, cost: F) -> (u64, Vec<Point>)
where
    F: Fn(Point) -> u64,
{
    if ddg.n == 0 {
        return (0, Vec::new());
    }
    let mut best = vec![0u64; ddg.n + 1];
    let mut pred = vec![0 as Point; ddg.n + 1];
    for p in 1..=ddg.n as Point {
        best[p as usize] = cost(p);
    }
    // Edges always go forward, so ascending point order is topological.
    for p in 1..=ddg.n as Point {
        for e in ddg.edges.iter().filter(|e| e.to == p) {
            let via = best[e.from as usize] + cost(p);
            if via > best[p as usize] {
                best[p as usize] = via;
                pred[p as usize] = e.from;
            } else if via == best[p as usize]
                && pred[p as usize] != 0
                && e.from < pred[p as usize]
            {
                pred[p as usize] = e.from;
            }
        }
    }
    let mut end = 1 as Point;
    for p in 1..=ddg.n as Point {
        if best[p as usize] > best[end as usize] {
            end = p;
        }
    }
    let mut path = vec![end];
    let mut cur = end;
    while pred[cur as usize] != 0 {
        cur = pred[cur as usize];
        path.push(cur);
    }
    path.reverse();
    (best[end as usize], path)
}

// ---------------------------------------------------------------------------
// Exports

/// DOT rendering of the dependence graph.
pub fn dependence_dot(program: &Program, ddg: &DependenceGraph) -> String {
    let mut out = String::from("digraph dependence {\n");
    for op in &program.operations {
        out.push_str(&format!(
            "  p{} [label=\"p{}: {}\"];\n",
            op.point,
            op.point,
            op.name()
        ));
    }
    for e in &ddg.edges {
        let access = match e.access {
            AccessPair::WriteRead => "WR",
            AccessPair::WriteWrite => "WW",
            AccessPair::ReadWrite => "RW",
        };
        out.push_str(&format!(
            "  p{} -> p{} [label=\"{} {}\"];\n",
            e.from,
            e.to,
            program.resource(e.resource).name,
            access
        ));
    }
    out.push_str("}\n");
    out
}

/// DOT rendering of the entanglement graph at the final point.
pub fn entanglement_dot(program: &Program, trace: &EntanglementTrace) -> String {
    let mut out = String::from("graph entanglement {\n");
    let mut printed = std::collections::BTreeSet::new();
    for e in &trace.edges {
        if printed.insert((e.a, e.b)) {
            out.push_str(&format!(
                "  {} -- {} [label=\"p{}\"];\n",
                program.resource(e.a).name,
                program.resource(e.b).name,
                e.introduced_at
            ));
        }
    }
    out.push_str("}\n");
    out
}

/// JSON export of the lifetime table:
/// `{"lifetimes": [{"resource", "conservative": [lo, hi], "effective": [lo, hi]}],
///   "live_counts": [...], "wmax": N, ...}`.
pub fn lifetimes_json(table: &LifetimeTable) -> serde_json::Value {
    serde_json::json!({
        "lifetimes": table.rows.iter().map(|row| {
            serde_json::json!({
                "resource": row.name,
                "conservative": row.conservative.map(|(lo, hi)| vec![lo, hi]),
                "effective": row.effective.map(|(lo, hi)| vec![lo, hi]),
            })
        }).collect::<Vec<_>>(),
        "live_counts": table.live_counts,
        "wmax": table.wmax,
        "conservative_counts": table.conservative_counts,
        "wmax_conservative": table.wmax_conservative,
    })
}

/// Per-point width profile as CSV lines `point,live_count`.
pub fn width_profile_csv(table: &LifetimeTable) -> String {
    let mut out = String::from("point,live_count\n");
    for (i, c) in table.live_counts.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, c));
    }
    out
}
