//! Program representation shared by all passes.
//!
//! A compiled program is an ordered sequence of operations over scoped
//! quantum resources. Operations are numbered by *program points* starting
//! at 1; analyses and transforms all speak in terms of these points.
//! Resources are the unit at which liveness and reclamation are decided:
//! several source identifiers may alias one resource, and the analyses
//! never look at identifiers again after resolution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Index of a resource within a program's resource table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ResourceId(pub u32);

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Index of a lexical scope within a program's scope tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ScopeId(pub u32);

/// 1-based program point. Point `i` denotes the state immediately after
/// the i-th operation has run.
pub type Point = u32;

/// Role of an operand within one operation. Controls are reads, targets
/// are writes for the purposes of dependence analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Role {
    Control,
    Target,
}

/// One operand of an operation. The source `name` is kept purely for
/// diagnostics and alias-aware refusal reasons; analyses use `resource`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Operand {
    pub resource: ResourceId,
    pub role: Role,
    pub name: String,
}

/// The primitive gate alphabet. X, CX, CCX and SWAP permute computational
/// basis states (qfree); H, S and T do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Gate {
    X,
    H,
    S,
    T,
    Cx,
    Ccx,
    Swap,
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::X => "X",
            Gate::H => "H",
            Gate::S => "S",
            Gate::T => "T",
            Gate::Cx => "CX",
            Gate::Ccx => "CCX",
            Gate::Swap => "SWAP",
        }
    }

    pub fn from_name(name: &str) -> Option<Gate> {
        match name {
            "X" => Some(Gate::X),
            "H" => Some(Gate::H),
            "S" => Some(Gate::S),
            "T" => Some(Gate::T),
            "CX" | "CNOT" => Some(Gate::Cx),
            "CCX" | "TOFFOLI" => Some(Gate::Ccx),
            "SWAP" => Some(Gate::Swap),
            _ => None,
        }
    }

    /// Number of operands, and how roles are assigned (controls first).
    pub fn arity(&self) -> usize {
        match self {
            Gate::X | Gate::H | Gate::S | Gate::T => 1,
            Gate::Cx | Gate::Swap => 2,
            Gate::Ccx => 3,
        }
    }

    pub fn control_count(&self) -> usize {
        match self {
            Gate::Cx => 1,
            Gate::Ccx => 2,
            _ => 0,
        }
    }

    /// True iff the gate is a permutation of computational basis states.
    pub fn is_qfree(&self) -> bool {
        matches!(self, Gate::X | Gate::Cx | Gate::Ccx | Gate::Swap)
    }

    /// True iff the gate is its own inverse.
    pub fn is_self_inverse(&self) -> bool {
        matches!(self, Gate::X | Gate::H | Gate::Cx | Gate::Ccx | Gate::Swap)
    }
}

/// What an operation does. Adjoint variants invert the corresponding
/// forward form; self-inverse primitives are canonicalized to `Gate`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum OperationKind {
    Gate(Gate),
    AdjointGate(Gate),
    Call(String),
    AdjointCall(String),
    Measure,
}

impl OperationKind {
    pub fn is_adjoint(&self) -> bool {
        matches!(
            self,
            OperationKind::AdjointGate(_) | OperationKind::AdjointCall(_)
        )
    }

    pub fn is_call(&self) -> bool {
        matches!(
            self,
            OperationKind::Call(_) | OperationKind::AdjointCall(_)
        )
    }
}

/// One unitary block or measurement in the compiled sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Operation {
    pub point: Point,
    pub kind: OperationKind,
    pub operands: Vec<Operand>,
    /// True iff the operation permutes computational basis states.
    /// Derived from the gate table, or for calls as the conjunction over
    /// the callee body.
    pub qfree: bool,
    /// For adjoint operations inserted by a transform: the program point
    /// of the forward operation this one inverts, when it is present in
    /// the same program.
    pub inverse_of: Option<Point>,
}

impl Operation {
    pub fn name(&self) -> &str {
        match &self.kind {
            OperationKind::Gate(g) | OperationKind::AdjointGate(g) => g.name(),
            OperationKind::Call(n) | OperationKind::AdjointCall(n) => n,
            OperationKind::Measure => "measure",
        }
    }

    pub fn touches(&self, r: ResourceId) -> bool {
        self.operands.iter().any(|o| o.resource == r)
    }

    pub fn targets(&self) -> impl Iterator<Item = &Operand> {
        self.operands.iter().filter(|o| o.role == Role::Target)
    }

    pub fn controls(&self) -> impl Iterator<Item = &Operand> {
        self.operands.iter().filter(|o| o.role == Role::Control)
    }

    pub fn writes(&self, r: ResourceId) -> bool {
        self.operands
            .iter()
            .any(|o| o.resource == r && o.role == Role::Target)
    }
}

/// Classification of a resource within its program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ResourceKind {
    /// By-value parameter of the entry function.
    Input,
    /// Reference parameter or returned resource of the entry function.
    Output,
    /// Scope-local register, initialized to |0>.
    Temporary,
    /// Parameter of a non-entry function, within that function's body.
    Parameter,
}

/// A physical quantum register. All identifiers bound to it are listed in
/// `aliases`; liveness and reclamation are decided per resource, never per
/// identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Resource {
    pub id: ResourceId,
    pub name: String,
    pub kind: ResourceKind,
    pub scope: ScopeId,
    /// True iff declared `ref` or returned: the state is observable past
    /// the end of the program and is never reclaimed.
    pub persistent: bool,
    pub measured_at: Option<Point>,
    pub aliases: BTreeSet<String>,
}

impl Resource {
    pub fn is_temporary(&self) -> bool {
        self.kind == ResourceKind::Temporary && !self.persistent
    }
}

/// A lexical scope. `entry`/`exit` are the first and last program points
/// of operations contained in the scope (including nested scopes); an
/// empty scope has `entry > exit`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Scope {
    pub id: ScopeId,
    pub parent: Option<ScopeId>,
    pub declared: Vec<ResourceId>,
    /// Alias bindings introduced in this scope, in source order.
    pub aliases: Vec<(String, ResourceId)>,
    pub entry: Point,
    pub exit: Point,
}

/// A named function. By-value parameters must satisfy the restoration
/// discipline checked by the reclaim pass; `ref` parameters and returned
/// names are persistent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<FunctionParam>,
    pub returns: Vec<String>,
    pub body: Program,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionParam {
    pub name: String,
    pub by_ref: bool,
}

/// A scope tree plus an ordered operation sequence. For the entry function
/// this is the unit of analysis; for callees it is the `body` carried by
/// their [`FunctionDef`] (with an empty `functions` map).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Program {
    /// Name of the function this program was assembled from.
    pub name: String,
    pub operations: Vec<Operation>,
    pub scopes: Vec<Scope>,
    pub resources: Vec<Resource>,
    /// Entry parameters in declaration order.
    pub params: Vec<ResourceId>,
    pub functions: BTreeMap<String, FunctionDef>,
}

/// Errors raised by IR-level transforms.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum IrError {
    #[error("recursive call cycle: {0}")]
    RecursiveCall(String),
    #[error("undefined function `{0}`")]
    UndefinedFunction(String),
    #[error("irreversible history: sequence contains a measurement at p{0}")]
    IrreversibleHistory(Point),
    #[error("invalid program: {0}")]
    Invalid(String),
}

impl Program {
    pub fn len(&self) -> usize {
        self.operations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operations.is_empty()
    }

    pub fn resource(&self, id: ResourceId) -> &Resource {
        &self.resources[id.0 as usize]
    }

    pub fn scope(&self, id: ScopeId) -> &Scope {
        &self.scopes[id.0 as usize]
    }

    /// Operation at a 1-based program point.
    pub fn op(&self, point: Point) -> &Operation {
        &self.operations[(point - 1) as usize]
    }

    pub fn resource_by_name(&self, name: &str) -> Option<&Resource> {
        self.resources.iter().find(|r| r.aliases.contains(name))
    }

    pub fn temporaries(&self) -> impl Iterator<Item = &Resource> {
        self.resources.iter().filter(|r| r.is_temporary())
    }

    pub fn contains_calls(&self) -> bool {
        self.operations.iter().any(|op| op.kind.is_call())
    }

    /// First program point touching `r`, if any.
    pub fn first_touch(&self, r: ResourceId) -> Option<Point> {
        self.operations
            .iter()
            .find(|op| op.touches(r))
            .map(|op| op.point)
    }

    /// Last program point touching `r`, if any.
    pub fn last_touch(&self, r: ResourceId) -> Option<Point> {
        self.operations
            .iter()
            .rev()
            .find(|op| op.touches(r))
            .map(|op| op.point)
    }

    /// Scope nesting check: `inner` equals or is nested inside `outer`.
    pub fn scope_within(&self, inner: ScopeId, outer: ScopeId) -> bool {
        let mut cur = Some(inner);
        while let Some(s) = cur {
            if s == outer {
                return true;
            }
            cur = self.scope(s).parent;
        }
        false
    }

    /// Structural fingerprint used to detect stale reclamation plans.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for op in &self.operations {
            op.point.hash(&mut h);
            op.name().hash(&mut h);
            op.kind.is_adjoint().hash(&mut h);
            matches!(op.kind, OperationKind::Measure).hash(&mut h);
            for o in &op.operands {
                o.resource.0.hash(&mut h);
                (o.role == Role::Target).hash(&mut h);
            }
        }
        self.resources.len().hash(&mut h);
        h.finish()
    }

    /// Checks the structural invariants: contiguous points, proper scope
    /// nesting, distinct operands, and valid cross-references.
    pub fn validate(&self) -> Result<(), IrError> {
        for (i, op) in self.operations.iter().enumerate() {
            if op.point != (i + 1) as Point {
                return Err(IrError::Invalid(format!(
                    "operation at index {i} has point {}, expected {}",
                    op.point,
                    i + 1
                )));
            }
            let mut seen = BTreeSet::new();
            for o in &op.operands {
                if !seen.insert(o.resource) {
                    return Err(IrError::Invalid(format!(
                        "duplicate operand {} at p{}",
                        self.resource(o.resource).name,
                        op.point
                    )));
                }
                if o.resource.0 as usize >= self.resources.len() {
                    return Err(IrError::Invalid(format!(
                        "operand references unknown resource at p{}",
                        op.point
                    )));
                }
            }
            if matches!(op.kind, OperationKind::Measure)
                && (op.operands.len() != 1 || op.operands[0].role != Role::Target)
            {
                return Err(IrError::Invalid(format!(
                    "measure at p{} must have exactly one target and no controls",
                    op.point
                )));
            }
            if let Some(fwd) = op.inverse_of {
                if fwd == 0 || fwd as usize > self.operations.len() {
                    return Err(IrError::Invalid(format!(
                        "adjoint at p{} references invalid forward point p{fwd}",
                        op.point
                    )));
                }
            }
        }
        let n = self.operations.len() as Point;
        for r in &self.resources {
            if let Some(m) = r.measured_at {
                if m == 0 || m > n {
                    return Err(IrError::Invalid(format!(
                        "resource {} measured at invalid point p{m}",
                        r.name
                    )));
                }
            }
            let scope = self.scope(r.scope);
            if scope.entry <= scope.exit {
                for op in &self.operations {
                    if op.touches(r.id) && (op.point < scope.entry || op.point > scope.exit) {
                        return Err(IrError::Invalid(format!(
                            "resource {} used at p{} outside its scope [p{}, p{}]",
                            r.name, op.point, scope.entry, scope.exit
                        )));
                    }
                }
            }
        }
        // Sibling scope intervals must not partially overlap.
        for a in &self.scopes {
            for b in &self.scopes {
                if a.id == b.id || a.entry > a.exit || b.entry > b.exit {
                    continue;
                }
                let disjoint = a.exit < b.entry || b.exit < a.entry;
                let a_in_b = b.entry <= a.entry && a.exit <= b.exit;
                let b_in_a = a.entry <= b.entry && b.exit <= a.exit;
                if !(disjoint || a_in_b || b_in_a) {
                    return Err(IrError::Invalid(format!(
                        "scopes {} and {} partially overlap",
                        a.id.0, b.id.0
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Returns the adjoint of a measurement-free operation sequence: the
/// reverse order with every operation replaced by its inverse. Applying
/// the input followed by the output is the identity on all touched
/// resources. Points in the result are renumbered from 1; `inverse_of`
/// records each source operation's original point.
pub fn adjoint_of(ops: &[Operation]) -> Result<Vec<Operation>, IrError> {
    if let Some(m) = ops
        .iter()
        .find(|op| matches!(op.kind, OperationKind::Measure))
    {
        return Err(IrError::IrreversibleHistory(m.point));
    }
    let mut out = Vec::with_capacity(ops.len());
    for (i, op) in ops.iter().rev().enumerate() {
        let kind = match &op.kind {
            OperationKind::Gate(g) => {
                if g.is_self_inverse() {
                    OperationKind::Gate(*g)
                } else {
                    OperationKind::AdjointGate(*g)
                }
            }
            OperationKind::AdjointGate(g) => OperationKind::Gate(*g),
            OperationKind::Call(f) => OperationKind::AdjointCall(f.clone()),
            OperationKind::AdjointCall(f) => OperationKind::Call(f.clone()),
            OperationKind::Measure => unreachable!(),
        };
        out.push(Operation {
            point: (i + 1) as Point,
            kind,
            operands: op.operands.clone(),
            qfree: op.qfree,
            inverse_of: Some(op.point),
        });
    }
    Ok(out)
}

/// Result of inlining: the expanded program plus a provenance map giving,
/// for every new point (1-based), the point of the originating operation
/// in the input program.
#[derive(Debug, Clone)]
pub struct Inlined {
    pub program: Program,
    pub provenance: Vec<Point>,
}

impl Inlined {
    /// Last new point whose originating operation is at or before `p`.
    pub fn last_point_from(&self, p: Point) -> Point {
        let mut last = 0;
        for (i, origin) in self.provenance.iter().enumerate() {
            if *origin <= p {
                last = (i + 1) as Point;
            }
        }
        last
    }
}

/// Expands every call into its callee body, renumbering points
/// contiguously. Adjoint calls expand to the reversed adjoint of the
/// callee body. Callee locals become fresh temporaries of the caller.
pub fn inline(program: &Program) -> Result<Inlined, IrError> {
    check_call_graph(program)?;
    let mut out = Program {
        name: program.name.clone(),
        operations: Vec::new(),
        scopes: program.scopes.clone(),
        resources: program.resources.clone(),
        params: program.params.clone(),
        functions: BTreeMap::new(),
    };
    let mut provenance = Vec::new();
    for op in &program.operations {
        let expanded = expand_op(op, program, &mut out)?;
        for ex in expanded {
            let point = (out.operations.len() + 1) as Point;
            provenance.push(op.point);
            out.operations.push(Operation { point, ..ex });
        }
    }
    // Scope ranges and measurement points are re-derived on the new
    // numbering rather than remapped op by op.
    refresh_points(&mut out);
    Ok(Inlined {
        program: out,
        provenance,
    })
}

fn expand_op(op: &Operation, src: &Program, out: &mut Program) -> Result<Vec<Operation>, IrError> {
    match &op.kind {
        OperationKind::Gate(_) | OperationKind::AdjointGate(_) | OperationKind::Measure => {
            Ok(vec![op.clone()])
        }
        OperationKind::Call(f) | OperationKind::AdjointCall(f) => {
            let def = src
                .functions
                .get(f)
                .ok_or_else(|| IrError::UndefinedFunction(f.clone()))?;
            let body_ops = instantiate_body(def, &op.operands, src, out)?;
            if matches!(op.kind, OperationKind::AdjointCall(_)) {
                adjoint_of(&body_ops).map_err(|_| {
                    IrError::IrreversibleHistory(op.point)
                })
            } else {
                Ok(body_ops)
            }
        }
    }
}

/// Binds callee parameters to the call operands, maps callee locals to
/// fresh caller resources, and recursively expands nested calls.
fn instantiate_body(
    def: &FunctionDef,
    args: &[Operand],
    src: &Program,
    out: &mut Program,
) -> Result<Vec<Operation>, IrError> {
    if args.len() != def.params.len() {
        return Err(IrError::Invalid(format!(
            "call of `{}` with {} operands, expected {}",
            def.name,
            args.len(),
            def.params.len()
        )));
    }
    let body = &def.body;
    let mut map: BTreeMap<ResourceId, ResourceId> = BTreeMap::new();
    for (param_id, arg) in body.params.iter().zip(args) {
        map.insert(*param_id, arg.resource);
    }
    // Fresh scope for the expansion, parented at the caller root.
    let scope_id = ScopeId(out.scopes.len() as u32);
    out.scopes.push(Scope {
        id: scope_id,
        parent: Some(ScopeId(0)),
        declared: Vec::new(),
        aliases: Vec::new(),
        entry: 0,
        exit: 0,
    });
    for r in &body.resources {
        if map.contains_key(&r.id) {
            continue;
        }
        let fresh = ResourceId(out.resources.len() as u32);
        out.resources.push(Resource {
            id: fresh,
            name: format!("{}.{}", def.name, r.name),
            kind: ResourceKind::Temporary,
            scope: scope_id,
            persistent: false,
            measured_at: None,
            aliases: BTreeSet::from([format!("{}.{}", def.name, r.name)]),
        });
        out.scopes[scope_id.0 as usize].declared.push(fresh);
        map.insert(r.id, fresh);
    }
    let mut ops = Vec::new();
    for op in &body.operations {
        let remapped = Operation {
            point: op.point,
            kind: op.kind.clone(),
            operands: op
                .operands
                .iter()
                .map(|o| {
                    let resource = map[&o.resource];
                    Operand {
                        resource,
                        role: o.role,
                        name: out.resources[resource.0 as usize].name.clone(),
                    }
                })
                .collect(),
            qfree: op.qfree,
            inverse_of: None,
        };
        for ex in expand_op(&remapped, src, out)? {
            ops.push(ex);
        }
    }
    for (i, op) in ops.iter_mut().enumerate() {
        op.point = (i + 1) as Point;
    }
    Ok(ops)
}

/// Recomputes scope entry/exit ranges and `measured_at` from the current
/// operation sequence.
pub fn refresh_points(program: &mut Program) {
    for scope in &mut program.scopes {
        scope.entry = 0;
        scope.exit = 0;
    }
    let declared_in: BTreeMap<ResourceId, ScopeId> = program
        .resources
        .iter()
        .map(|r| (r.id, r.scope))
        .collect();
    let mut ranges: BTreeMap<ScopeId, (Point, Point)> = BTreeMap::new();
    for op in &program.operations {
        for o in &op.operands {
            let mut scope = Some(declared_in[&o.resource]);
            while let Some(s) = scope {
                let e = ranges.entry(s).or_insert((op.point, op.point));
                e.0 = e.0.min(op.point);
                e.1 = e.1.max(op.point);
                scope = program.scopes[s.0 as usize].parent;
            }
        }
    }
    for (sid, (lo, hi)) in ranges {
        program.scopes[sid.0 as usize].entry = lo;
        program.scopes[sid.0 as usize].exit = hi;
    }
    // Root scope spans the whole program.
    if !program.operations.is_empty() && !program.scopes.is_empty() {
        program.scopes[0].entry = 1;
        program.scopes[0].exit = program.operations.len() as Point;
    }
    for r in &mut program.resources {
        r.measured_at = None;
    }
    for op in &program.operations {
        if matches!(op.kind, OperationKind::Measure) {
            let rid = op.operands[0].resource;
            let r = &mut program.resources[rid.0 as usize];
            if r.measured_at.is_none() {
                r.measured_at = Some(op.point);
            }
        }
    }
}

/// Detects call cycles and undefined callees over the whole unit.
pub fn check_call_graph(program: &Program) -> Result<(), IrError> {
    fn visit(
        name: &str,
        functions: &BTreeMap<String, FunctionDef>,
        stack: &mut Vec<String>,
        done: &mut BTreeSet<String>,
    ) -> Result<(), IrError> {
        if done.contains(name) {
            return Ok(());
        }
        if let Some(pos) = stack.iter().position(|s| s == name) {
            let mut cycle: Vec<&str> = stack[pos..].iter().map(String::as_str).collect();
            cycle.push(name);
            return Err(IrError::RecursiveCall(cycle.join(" -> ")));
        }
        stack.push(name.to_string());
        let def = functions
            .get(name)
            .ok_or_else(|| IrError::UndefinedFunction(name.to_string()))?;
        for op in &def.body.operations {
            if let OperationKind::Call(f) | OperationKind::AdjointCall(f) = &op.kind {
                visit(f, functions, stack, done)?;
            }
        }
        stack.pop();
        done.insert(name.to_string());
        Ok(())
    }
    let mut done = BTreeSet::new();
    for op in &program.operations {
        if let OperationKind::Call(f) | OperationKind::AdjointCall(f) = &op.kind {
            visit(f, &program.functions, &mut Vec::new(), &mut done)?;
        }
    }
    Ok(())
}

/// Recomputes the `qfree` flag on every operation: primitive gates from
/// the gate table, calls as the conjunction over the callee body.
/// Unresolvable callees are conservatively non-qfree.
pub fn derive_qfree(program: &mut Program) {
    fn call_qfree(
        name: &str,
        functions: &BTreeMap<String, FunctionDef>,
        seen: &mut BTreeSet<String>,
        memo: &mut BTreeMap<String, bool>,
    ) -> bool {
        if let Some(v) = memo.get(name) {
            return *v;
        }
        if !seen.insert(name.to_string()) {
            return false;
        }
        let result = match functions.get(name) {
            None => false,
            Some(def) => def.body.operations.iter().all(|op| match &op.kind {
                OperationKind::Gate(g) | OperationKind::AdjointGate(g) => g.is_qfree(),
                OperationKind::Call(f) | OperationKind::AdjointCall(f) => {
                    call_qfree(f, functions, seen, memo)
                }
                OperationKind::Measure => false,
            }),
        };
        seen.remove(name);
        memo.insert(name.to_string(), result);
        result
    }
    let functions = program.functions.clone();
    let mut memo = BTreeMap::new();
    for op in &mut program.operations {
        op.qfree = match &op.kind {
            OperationKind::Gate(g) | OperationKind::AdjointGate(g) => g.is_qfree(),
            OperationKind::Call(f) | OperationKind::AdjointCall(f) => {
                call_qfree(f, &functions, &mut BTreeSet::new(), &mut memo)
            }
            OperationKind::Measure => false,
        };
    }
    for def_name in functions.keys() {
        // Callee bodies carry their own flags for when they are analyzed
        // stand-alone.
        let mut body = program.functions[def_name].body.clone();
        for op in &mut body.operations {
            op.qfree = match &op.kind {
                OperationKind::Gate(g) | OperationKind::AdjointGate(g) => g.is_qfree(),
                OperationKind::Call(f) | OperationKind::AdjointCall(f) => {
                    call_qfree(f, &functions, &mut BTreeSet::new(), &mut memo)
                }
                OperationKind::Measure => false,
            };
        }
        program.functions.get_mut(def_name).unwrap().body = body;
    }
}
