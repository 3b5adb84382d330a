//! Desk-scale statevector oracle.
//!
//! Dense double-precision simulation of inlined programs on up to twelve
//! qubits, with measurement handled by enumerating the full outcome
//! ensemble. Used by tests and by `qlsc verify` to check the restoration
//! invariant, output equivalence across strategies, and parameter-passing
//! semantics. Deliberately simple: every resource gets its own qubit and
//! gates are applied one at a time.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use serde::Serialize;
use thiserror::Error;

use crate::ir::{inline, Gate, Operation, OperationKind, Point, Program, ResourceId};

/// Dense simulation budget.
pub const MAX_QUBITS: usize = 12;

/// Restoration and norm tolerance.
pub const EPS_RESTORE: f64 = 1e-12;
/// Output-equivalence trace-distance tolerance.
pub const EPS_EQUIV: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("qubit budget exceeded: program needs {needed} qubits, limit is {limit}")]
    BudgetExceeded { needed: usize, limit: usize },
    #[error("unresolved opaque call `{0}`; inline the program before simulating")]
    UnresolvedCall(String),
    #[error("unknown resource {0:?} in simulation request")]
    UnknownResource(ResourceId),
    #[error("state norm drifted to {0} (> 1e-12 from 1)")]
    NormDrift(f64),
}

/// Maps each resource of an inlined program to a dedicated qubit index.
#[derive(Debug, Clone)]
pub struct QubitLayout {
    index: BTreeMap<ResourceId, usize>,
}

impl QubitLayout {
    pub fn for_program(program: &Program) -> Result<QubitLayout, SimError> {
        let needed = program.resources.len();
        if needed > MAX_QUBITS {
            return Err(SimError::BudgetExceeded {
                needed,
                limit: MAX_QUBITS,
            });
        }
        Ok(QubitLayout {
            index: program
                .resources
                .iter()
                .enumerate()
                .map(|(i, r)| (r.id, i))
                .collect(),
        })
    }

    pub fn qubit(&self, r: ResourceId) -> Option<usize> {
        self.index.get(&r).copied()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

/// Amplitudes over the mapped qubits, little-endian: bit `q` of an index
/// holds qubit `q`.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub amps: Vec<Complex64>,
    pub qubits: usize,
}

impl StateVector {
    pub fn zeros(qubits: usize) -> StateVector {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { amps, qubits }
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn l2_distance(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Initial single-qubit state for one resource.
#[derive(Debug, Clone, Copy)]
pub struct QubitInit {
    pub zero: Complex64,
    pub one: Complex64,
}

impl QubitInit {
    pub fn basis(value: bool) -> QubitInit {
        if value {
            QubitInit {
                zero: Complex64::new(0.0, 0.0),
                one: Complex64::new(1.0, 0.0),
            }
        } else {
            QubitInit {
                zero: Complex64::new(1.0, 0.0),
                one: Complex64::new(0.0, 0.0),
            }
        }
    }
}

/// Assignment of initial states to resources; unmentioned resources start
/// in |0>.
pub type InputState = BTreeMap<ResourceId, QubitInit>;

/// All-basis input over the given resources, by bit pattern.
pub fn basis_input(resources: &[ResourceId], pattern: usize) -> InputState {
    resources
        .iter()
        .enumerate()
        .map(|(i, r)| (*r, QubitInit::basis(pattern >> i & 1 == 1)))
        .collect()
}

/// Haar-random product state over the given resources.
pub fn random_product_input(resources: &[ResourceId], rng: &mut ChaCha8Rng) -> InputState {
    resources
        .iter()
        .map(|r| {
            let u: f64 = rng.gen();
            let theta = (1.0 - 2.0 * u).acos();
            let phi: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            (
                *r,
                QubitInit {
                    zero: Complex64::new((theta / 2.0).cos(), 0.0),
                    one: Complex64::from_polar((theta / 2.0).sin(), phi),
                },
            )
        })
        .collect()
}

/// Input sampling for the verification checks: exhaustive basis inputs
/// over the entry parameters plus a fixed number of seeded random product
/// states.
#[derive(Debug, Clone, Copy)]
pub struct SamplingPolicy {
    pub random_products: usize,
    pub seed: u64,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy {
            random_products: 16,
            seed: 42,
        }
    }
}

impl SamplingPolicy {
    pub fn inputs(&self, resources: &[ResourceId]) -> Vec<InputState> {
        let mut out = Vec::new();
        for pattern in 0..(1usize << resources.len()) {
            out.push(basis_input(resources, pattern));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.random_products {
            out.push(random_product_input(resources, &mut rng));
        }
        out
    }

    /// Basis inputs only, for checks restricted to classical arguments.
    pub fn basis_inputs(&self, resources: &[ResourceId]) -> Vec<InputState> {
        (0..(1usize << resources.len()))
            .map(|pattern| basis_input(resources, pattern))
            .collect()
    }
}

/// One measurement branch: the post-measurement state, its probability,
/// and the recorded (point, outcome) pairs.
#[derive(Debug, Clone)]
pub struct Branch {
    pub probability: f64,
    pub state: StateVector,
    pub outcomes: Vec<(Point, bool)>,
}

/// Full outcome ensemble of a simulation.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub branches: Vec<Branch>,
    pub layout: QubitLayout,
}

impl Ensemble {
    /// Ensemble-averaged reduced density matrix over `subset`, ordered by
    /// ascending resource id.
    pub fn reduced(&self, subset: &[ResourceId]) -> Result<ReducedState, SimError> {
        let mut sorted = subset.to_vec();
        sorted.sort();
        sorted.dedup();
        let qubits: Vec<usize> = sorted
            .iter()
            .map(|r| self.layout.qubit(*r).ok_or(SimError::UnknownResource(*r)))
            .collect::<Result<_, _>>()?;
        let dim = 1usize << qubits.len();
        let mut rho = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
        for branch in &self.branches {
            let r = reduced_density(&branch.state, &qubits);
            rho += r * Complex64::new(branch.probability, 0.0);
        }
        Ok(ReducedState {
            resources: sorted,
            matrix: rho,
        })
    }
}

/// Density matrix over a named subset of resources.
#[derive(Debug, Clone)]
pub struct ReducedState {
    pub resources: Vec<ResourceId>,
    pub matrix: nalgebra::DMatrix<Complex64>,
}

impl ReducedState {
    pub fn trace(&self) -> f64 {
        (0..self.matrix.nrows())
            .map(|i| self.matrix[(i, i)].re)
            .sum()
    }

    /// Tr(rho^2), 1 for pure states.
    pub fn purity(&self) -> f64 {
        let sq = &self.matrix * &self.matrix;
        (0..sq.nrows()).map(|i| sq[(i, i)].re).sum()
    }

    /// Population of the all-zeros basis state.
    pub fn zero_population(&self) -> f64 {
        self.matrix[(0, 0)].re
    }

    /// Trace distance (1/2)||rho - sigma||_1 via the Hermitian
    /// eigendecomposition of the difference.
    pub fn trace_distance(&self, other: &ReducedState) -> f64 {
        let diff = &self.matrix - &other.matrix;
        let eig = nalgebra::SymmetricEigen::new(diff);
        0.5 * eig.eigenvalues.iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// Partial trace of a pure state over the complement of `qubits`.
fn reduced_density(state: &StateVector, qubits: &[usize]) -> nalgebra::DMatrix<Complex64> {
    let k = qubits.len();
    let dim = 1usize << k;
    let env: Vec<usize> = (0..state.qubits).filter(|q| !qubits.contains(q)).collect();
    let mut rho = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
    let compose = |sub: usize, e: usize| -> usize {
        let mut idx = 0usize;
        for (pos, q) in qubits.iter().enumerate() {
            if sub >> pos & 1 == 1 {
                idx |= 1 << q;
            }
        }
        for (pos, q) in env.iter().enumerate() {
            if e >> pos & 1 == 1 {
                idx |= 1 << q;
            }
        }
        idx
    };
    for a in 0..dim {
        for b in 0..dim {
            let mut sum = Complex64::new(0.0, 0.0);
            for e in 0..(1usize << env.len()) {
                sum += state.amps[compose(a, e)] * state.amps[compose(b, e)].conj();
            }
            rho[(a, b)] = sum;
        }
    }
    rho
}

/// Step-by-step simulator over an outcome ensemble.
pub struct Simulator {
    pub ensemble: Ensemble,
}

impl Simulator {
    /// Initializes the product state described by `input` over all
    /// resources of `program` (unmentioned resources start in |0>).
    pub fn new(program: &Program, input: &InputState) -> Result<Simulator, SimError> {
        let layout = QubitLayout::for_program(program)?;
        let qubits = layout.len();
        let mut state = StateVector::zeros(qubits);
        for (r, init) in input {
            let q = layout.qubit(*r).ok_or(SimError::UnknownResource(*r))?;
            apply_single(&mut state, q, |a, b| {
                (init.zero * a + Complex64::new(0.0, 0.0) * b, init.one * a)
            });
        }
        Ok(Simulator {
            ensemble: Ensemble {
                branches: vec![Branch {
                    probability: 1.0,
                    state,
                    outcomes: Vec::new(),
                }],
                layout,
            },
        })
    }

    pub fn apply(&mut self, op: &Operation) -> Result<(), SimError> {
        match &op.kind {
            OperationKind::Call(f) | OperationKind::AdjointCall(f) => {
                return Err(SimError::UnresolvedCall(f.clone()))
            }
            OperationKind::Measure => {
                let q = self
                    .ensemble
                    .layout
                    .qubit(op.operands[0].resource)
                    .ok_or(SimError::UnknownResource(op.operands[0].resource))?;
                self.measure(q, op.point);
                return Ok(());
            }
            OperationKind::Gate(g) | OperationKind::AdjointGate(g) => {
                let dagger = matches!(op.kind, OperationKind::AdjointGate(_));
                let qubits: Vec<usize> = op
                    .operands
                    .iter()
                    .map(|o| {
                        self.ensemble
                            .layout
                            .qubit(o.resource)
                            .ok_or(SimError::UnknownResource(o.resource))
                    })
                    .collect::<Result<_, _>>()?;
                for branch in &mut self.ensemble.branches {
                    apply_gate(&mut branch.state, *g, dagger, &qubits);
                    let norm = branch.state.norm();
                    if (norm - 1.0).abs() > EPS_RESTORE * 10.0 {
                        return Err(SimError::NormDrift(norm));
                    }
                }
            }
        }
        Ok(())
    }

    fn measure(&mut self, qubit: usize, point: Point) {
        let mut next = Vec::new();
        for branch in self.ensemble.branches.drain(..) {
            for outcome in [false, true] {
                let mut amps = branch.state.amps.clone();
                let mut prob = 0.0;
                for (i, a) in amps.iter_mut().enumerate() {
                    if (i >> qubit & 1 == 1) == outcome {
                        prob += a.norm_sqr();
                    } else {
                        *a = Complex64::new(0.0, 0.0);
                    }
                }
                if prob < 1e-15 {
                    continue;
                }
                let scale = Complex64::new(1.0 / prob.sqrt(), 0.0);
                for a in amps.iter_mut() {
                    *a *= scale;
                }
                let mut outcomes = branch.outcomes.clone();
                outcomes.push((point, outcome));
                next.push(Branch {
                    probability: branch.probability * prob,
                    state: StateVector {
                        amps,
                        qubits: branch.state.qubits,
                    },
                    outcomes,
                });
            }
        }
        self.ensemble.branches = next;
    }
}

fn apply_single<F>(state: &mut StateVector, qubit: usize, f: F)
where
    F: Fn(Complex64, Complex64) -> (Complex64, Complex64),
{
    let bit = 1usize << qubit;
    for i in 0..state.amps.len() {
        if i & bit == 0 {
            let (a, b) = (state.amps[i], state.amps[i | bit]);
            let (na, nb) = f(a, b);
            state.amps[i] = na;
            state.amps[i | bit] = nb;
        }
    }
}

fn apply_gate(state: &mut StateVector, gate: Gate, dagger: bool, qubits: &[usize]) {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    match gate {
        Gate::X => apply_single(state, qubits[0], |a, b| (b, a)),
        Gate::H => apply_single(state, qubits[0], |a, b| {
            (
                (a + b) * Complex64::new(inv_sqrt2, 0.0),
                (a - b) * Complex64::new(inv_sqrt2, 0.0),
            )
        }),
        Gate::S => {
            let phase = if dagger {
                Complex64::new(0.0, -1.0)
            } else {
                Complex64::new(0.0, 1.0)
            };
            apply_single(state, qubits[0], move |a, b| (a, b * phase));
        }
        Gate::T => {
            let angle = if dagger {
                -std::f64::consts::FRAC_PI_4
            } else {
                std::f64::consts::FRAC_PI_4
            };
            let phase = Complex64::from_polar(1.0, angle);
            apply_single(state, qubits[0], move |a, b| (a, b * phase));
        }
        Gate::Cx => {
            let (c, t) = (1usize << qubits[0], 1usize << qubits[1]);
            for i in 0..state.amps.len() {
                if i & c != 0 && i & t == 0 {
                    state.amps.swap(i, i | t);
                }
            }
        }
        Gate::Ccx => {
            let (c1, c2, t) = (
                1usize << qubits[0],
                1usize << qubits[1],
                1usize << qubits[2],
            );
            for i in 0..state.amps.len() {
                if i & c1 != 0 && i & c2 != 0 && i & t == 0 {
                    state.amps.swap(i, i | t);
                }
            }
        }
        Gate::Swap => {
            let (a, b) = (1usize << qubits[0], 1usize << qubits[1]);
            for i in 0..state.amps.len() {
                if i & a != 0 && i & b == 0 {
                    state.amps.swap(i, (i & !a) | b);
                }
            }
        }
    }
}

/// Runs an inlined, call-free program to completion.
pub fn simulate(program: &Program, input: &InputState) -> Result<Ensemble, SimError> {
    let mut sim = Simulator::new(program, input)?;
    for op in &program.operations {
        sim.apply(op)?;
    }
    Ok(sim.ensemble)
}

/// Verification report for an equivalence check, serialized by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub check: String,
    pub inputs: usize,
    pub max_trace_distance: f64,
    pub pass: bool,
}

/// Verification report for a restoration check.
#[derive(Debug, Clone, Serialize)]
pub struct RestorationReport {
    pub check: String,
    pub inputs: usize,
    pub min_zero_population: f64,
    pub min_purity: f64,
    pub pass: bool,
}

/// Compares the reduced states over `observed` between two programs on
/// every sampled input. Programs are inlined here; both must bind the
/// observed and parameter resources under the same ids.
pub fn verify_equivalence(
    p1: &Program,
    p2: &Program,
    observed: &[ResourceId],
    policy: &SamplingPolicy,
) -> Result<EquivalenceReport, SimError> {
    let i1 = inline(p1).map_err(|e| SimError::UnresolvedCall(e.to_string()))?;
    let i2 = inline(p2).map_err(|e| SimError::UnresolvedCall(e.to_string()))?;
    let inputs = policy.inputs(&p1.params);
    let mut max_distance: f64 = 0.0;
    for input in &inputs {
        let r1 = simulate(&i1.program, input)?.reduced(observed)?;
        let r2 = simulate(&i2.program, input)?.reduced(observed)?;
        max_distance = max_distance.max(r1.trace_distance(&r2));
    }
    Ok(EquivalenceReport {
        check: format!("equivalence[{} vs {}]", p1.name, p2.name),
        inputs: inputs.len(),
        max_trace_distance: max_distance,
        pass: max_distance <= EPS_EQUIV,
    })
}

/// A restoration obligation: `temps` must be back in |0> and unentangled
/// once the program point `release` has executed.
#[derive(Debug, Clone)]
pub struct RestorationCheck {
    pub temps: Vec<ResourceId>,
    pub release: Point,
}

/// Checks that each temp set is restored at its release point: |0>
/// population and reduced-state purity at least 1 - 1e-12 on every
/// sampled input.
pub fn verify_restoration(
    program: &Program,
    checks: &[RestorationCheck],
    policy: &SamplingPolicy,
) -> Result<RestorationReport, SimError> {
    let inlined = inline(program).map_err(|e| SimError::UnresolvedCall(e.to_string()))?;
    let stops: Vec<(usize, &RestorationCheck)> = checks
        .iter()
        .map(|c| (inlined.last_point_from(c.release) as usize, c))
        .collect();
    let inputs = policy.inputs(&program.params);
    let mut min_pop: f64 = 1.0;
    let mut min_purity: f64 = 1.0;
    for input in &inputs {
        let mut sim = Simulator::new(&inlined.program, input)?;
        for (idx, op) in inlined.program.operations.iter().enumerate() {
            sim.apply(op)?;
            for (stop, check) in &stops {
                if *stop == idx + 1 {
                    for temp in &check.temps {
                        let rho = sim.ensemble.reduced(&[*temp])?;
                        min_pop = min_pop.min(rho.zero_population());
                        min_purity = min_purity.min(rho.purity());
                    }
                }
            }
        }
        // Release points past the last operation are checked on the final
        // state.
        for (stop, check) in &stops {
            if *stop == 0 && inlined.program.is_empty() {
                for temp in &check.temps {
                    let rho = sim.ensemble.reduced(&[*temp])?;
                    min_pop = min_pop.min(rho.zero_population());
                    min_purity = min_purity.min(rho.purity());
                }
            }
        }
    }
    Ok(RestorationReport {
        check: format!("restoration[{}]", program.name),
        inputs: inputs.len(),
        min_zero_population: min_pop,
        min_purity,
        pass: min_pop >= 1.0 - EPS_RESTORE && min_purity >= 1.0 - EPS_RESTORE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Operand, Role};
    use std::collections::BTreeSet;

    fn tiny_program(ops: Vec<(OperationKind, Vec<(u32, Role)>)>, resources: usize) -> Program {
        let resources: Vec<crate::ir::Resource> = (0..resources)
            .map(|i| crate::ir::Resource {
                id: ResourceId(i as u32),
                name: format!("q{i}"),
                kind: crate::ir::ResourceKind::Temporary,
                scope: crate::ir::ScopeId(0),
                persistent: false,
                measured_at: None,
                aliases: BTreeSet::from([format!("q{i}")]),
            })
            .collect();
        let operations = ops
            .into_iter()
            .enumerate()
            .map(|(i, (kind, operands))| Operation {
                point: (i + 1) as Point,
                kind,
                operands: operands
                    .into_iter()
                    .map(|(r, role)| Operand {
                        resource: ResourceId(r),
                        role,
                        name: format!("q{r}"),
                    })
                    .collect(),
                qfree: true,
                inverse_of: None,
            })
            .collect();
        Program {
            name: "test".to_string(),
            operations,
            scopes: vec![crate::ir::Scope {
                id: crate::ir::ScopeId(0),
                parent: None,
                declared: resources.iter().map(|r| r.id).collect(),
                aliases: Vec::new(),
                entry: 1,
                exit: 1,
            }],
            resources,
            params: vec![],
            functions: std::collections::BTreeMap::new(),
        }
    }

    #[test]
    fn empty_program_keeps_basis_state() {
        let p = tiny_program(vec![], 2);
        let e = simulate(&p, &InputState::new()).unwrap();
        assert_eq!(e.branches.len(), 1);
        assert!((e.branches[0].state.amps[0].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn double_hadamard_is_identity() {
        let ops = vec![
            (OperationKind::Gate(Gate::H), vec![(0, Role::Target)]),
            (OperationKind::Gate(Gate::H), vec![(0, Role::Target)]),
        ];
        let p = tiny_program(ops, 1);
        let e = simulate(&p, &InputState::new()).unwrap();
        let expected = StateVector::zeros(1);
        assert!(e.branches[0].state.l2_distance(&expected) < 1e-12);
    }

    #[test]
    fn bell_pair_reduced_state_is_maximally_mixed() {
        let ops = vec![
            (OperationKind::Gate(Gate::H), vec![(0, Role::Target)]),
            (
                OperationKind::Gate(Gate::Cx),
                vec![(0, Role::Control), (1, Role::Target)],
            ),
        ];
        let p = tiny_program(ops, 2);
        let e = simulate(&p, &InputState::new()).unwrap();
        let rho = e.reduced(&[ResourceId(0)]).unwrap();
        assert!((rho.matrix[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((rho.matrix[(1, 1)].re - 0.5).abs() < 1e-12);
        assert!(rho.matrix[(0, 1)].norm() < 1e-12);
        assert!((rho.purity() - 0.5).abs() < 1e-12);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_state_reduced_to_first_qubit_is_pure_zero() {
        let ops = vec![(OperationKind::Gate(Gate::H), vec![(1, Role::Target)])];
        let p = tiny_program(ops, 2);
        let e = simulate(&p, &InputState::new()).unwrap();
        let rho = e.reduced(&[ResourceId(0)]).unwrap();
        assert!((rho.zero_population() - 1.0).abs() < 1e-12);
        assert!((rho.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_of_pure_vs_mixed() {
        let pure = tiny_program(vec![], 1);
        let e1 = simulate(&pure, &InputState::new()).unwrap();
        let rho1 = e1.reduced(&[ResourceId(0)]).unwrap();
        let ops = vec![
            (OperationKind::Gate(Gate::H), vec![(0, Role::Target)]),
            (
                OperationKind::Gate(Gate::Cx),
                vec![(0, Role::Control), (1, Role::Target)],
            ),
        ];
        let mixed = tiny_program(ops, 2);
        let e2 = simulate(&mixed, &InputState::new()).unwrap();
        let rho2 = e2.reduced(&[ResourceId(0)]).unwrap();
        let d = rho1.trace_distance(&rho2);
        assert!((d - 0.5).abs() < 1e-12, "got {d}");
    }

    #[test]
    fn measurement_enumerates_both_branches() {
        let ops = vec![
            (OperationKind::Gate(Gate::H), vec![(0, Role::Target)]),
            (OperationKind::Measure, vec![(0, Role::Target)]),
        ];
        let p = tiny_program(ops, 1);
        let e = simulate(&p, &InputState::new()).unwrap();
        assert_eq!(e.branches.len(), 2);
        for b in &e.branches {
            assert!((b.probability - 0.5).abs() < 1e-12);
            assert!((b.state.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let p = tiny_program(vec![], 13);
        assert!(matches!(
            simulate(&p, &InputState::new()),
            Err(SimError::BudgetExceeded { needed: 13, .. })
        ));
    }

    #[test]
    fn s_then_s_dagger_is_identity() {
        let ops = vec![
            (OperationKind::Gate(Gate::H), vec![(0, Role::Target)]),
            (OperationKind::Gate(Gate::S), vec![(0, Role::Target)]),
            (OperationKind::AdjointGate(Gate::S), vec![(0, Role::Target)]),
            (OperationKind::Gate(Gate::H), vec![(0, Role::Target)]),
        ];
        let p = tiny_program(ops, 1);
        let e = simulate(&p, &InputState::new()).unwrap();
        assert!(e.branches[0].state.l2_distance(&StateVector::zeros(1)) < 1e-12);
    }

    #[test]
    fn swap_exchanges_amplitudes() {
        let ops = vec![
            (OperationKind::Gate(Gate::X), vec![(0, Role::Target)]),
            (
                OperationKind::Gate(Gate::Swap),
                vec![(0, Role::Target), (1, Role::Target)],
            ),
        ];
        let p = tiny_program(ops, 2);
        let e = simulate(&p, &InputState::new()).unwrap();
        // After X(q0); SWAP(q0,q1): state |q1 q0> = |10>, index 0b10.
        assert!((e.branches[0].state.amps[2].re - 1.0).abs() < 1e-12);
    }
}
