//! ASAP scheduling, depth/width metrics, and register pooling.
//!
//! Depth is measured as the number of ASAP layers over the dependence
//! graph, which for unit costs equals the critical-path length. The
//! global compute-then-uncompute strategy sequences its adjoint suffix
//! after the entire forward phase, so its suffix layers start only once
//! the forward layers are done; early reclamation has no such barrier
//! and its segments overlap independent forward work. Width is the peak
//! live-set size; the register allocator pools temporaries whose
//! effective lifetimes are disjoint onto shared physical qubits.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    build_dependence_graph, build_entanglement_trace, compute_lifetimes, compute_liveness,
    DependenceGraph, LifetimeTable,
};
use crate::ir::{inline, Point, Program, ResourceId};
use crate::reclaim::{
    insert_early_uncompute, insert_global_uncompute, plan_early_reclamation, ReclaimError,
};
use crate::Strategy;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("gate granularity requires an inlined program (found call `{0}`)")]
    NotInlined(String),
    #[error("internal metric invariant violated: {0}")]
    MetricInvariant(String),
    #[error("inline failed: {0}")]
    Inline(#[from] crate::ir::IrError),
    #[error("reclamation failed: {0}")]
    Reclaim(#[from] ReclaimError),
}

/// Cost granularity for depth metrics: unit cost per block (operation)
/// or per primitive gate after inlining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Block,
    Gate,
}

/// An ASAP schedule: layers of pairwise dependence-free points.
#[derive(Debug, Clone, Serialize)]
pub struct Schedule {
    pub layers: Vec<Vec<Point>>,
    pub depth: usize,
    /// Distinct resources touched per layer.
    pub active_per_layer: Vec<usize>,
}

impl Schedule {
    pub fn layer_of(&self, p: Point) -> Option<usize> {
        self.layers.iter().position(|l| l.contains(&p))
    }
}

/// Places each operation in the earliest layer after all its dependence
/// predecessors. Operations at or past `barrier` additionally wait for
/// every earlier operation to finish (the compute/uncompute split of the
/// global strategy). With unit costs and no barrier, the depth equals
/// the critical-path length.
pub fn schedule_asap(
    program: &Program,
    ddg: &DependenceGraph,
    granularity: Granularity,
    barrier: Option<Point>,
) -> Result<Schedule, ScheduleError> {
    if granularity == Granularity::Gate {
        if let Some(call) = program.operations.iter().find(|op| op.kind.is_call()) {
            return Err(ScheduleError::NotInlined(call.name().to_string()));
        }
    }
    let n = program.len();
    let mut level = vec![0usize; n + 1];
    let mut preds: BTreeMap<Point, Vec<Point>> = BTreeMap::new();
    for e in &ddg.edges {
        preds.entry(e.to).or_default().push(e.from);
    }
    let mut forward_depth = 0usize;
    for p in 1..=n as Point {
        let mut lv = 1usize;
        if let Some(ps) = preds.get(&p) {
            for q in ps {
                lv = lv.max(level[*q as usize] + 1);
            }
        }
        if let Some(b) = barrier {
            if p >= b {
                lv = lv.max(forward_depth + 1);
            } else {
                forward_depth = forward_depth.max(lv);
            }
        }
        level[p as usize] = lv;
    }
    let depth = level[1..=n].iter().copied().max().unwrap_or(0);
    let mut layers = vec![Vec::new(); depth];
    for p in 1..=n as Point {
        layers[level[p as usize] - 1].push(p);
    }
    let active_per_layer = layers
        .iter()
        .map(|layer| {
            let mut active = BTreeSet::new();
            for p in layer {
                for o in &program.op(*p).operands {
                    active.insert(o.resource);
                }
            }
            active.len()
        })
        .collect();
    Ok(Schedule {
        layers,
        depth,
        active_per_layer,
    })
}

/// Resource-to-physical-qubit assignment from lifetime-interval pooling.
#[derive(Debug, Clone, Serialize)]
pub struct RegisterMap {
    pub assignment: BTreeMap<ResourceId, usize>,
    /// Qubits reserved for parameters, outputs, and persistent locals.
    pub dedicated: usize,
    /// Qubits shared among temporaries by linear scan.
    pub pool: usize,
    /// Peak number of simultaneously live mapped resources.
    pub peak: usize,
}

impl RegisterMap {
    pub fn total_qubits(&self) -> usize {
        self.dedicated + self.pool
    }
}

/// Linear-scan allocation over effective lifetimes. Parameters, outputs,
/// and persistent locals get dedicated qubits; temporaries share pool
/// qubits whenever their effective intervals are disjoint, lowest free
/// index first. The peak equals the table's W_max.
pub fn allocate_registers(program: &Program, lifetimes: &LifetimeTable) -> RegisterMap {
    let mut assignment = BTreeMap::new();
    let mut next = 0usize;
    for r in &program.resources {
        if !r.is_temporary() {
            assignment.insert(r.id, next);
            next += 1;
        }
    }
    let dedicated = next;
    let mut temps: Vec<(Point, Point, ResourceId)> = Vec::new();
    let mut unused: Vec<ResourceId> = Vec::new();
    for r in program.resources.iter().filter(|r| r.is_temporary()) {
        match lifetimes
            .rows
            .iter()
            .find(|row| row.resource == r.id)
            .and_then(|row| row.effective)
        {
            Some((lo, hi)) => temps.push((lo, hi, r.id)),
            None => unused.push(r.id),
        }
    }
    temps.sort();
    let mut pool_free: BTreeSet<usize> = BTreeSet::new();
    let mut pool_size = 0usize;
    let mut active: Vec<(Point, usize)> = Vec::new(); // (expiry, pool index)
    for (lo, hi, id) in temps {
        active.retain(|(expiry, q)| {
            if *expiry < lo {
                pool_free.insert(*q);
                false
            } else {
                true
            }
        });
        let q = match pool_free.iter().next().copied() {
            Some(q) => {
                pool_free.remove(&q);
                q
            }
            None => {
                let q = pool_size;
                pool_size += 1;
                q
            }
        };
        active.push((hi, q));
        assignment.insert(id, dedicated + q);
    }
    for id in unused {
        // Never-live scratch can sit on any pool qubit.
        if pool_size == 0 {
            pool_size = 1;
        }
        assignment.insert(id, dedicated);
    }
    RegisterMap {
        assignment,
        dedicated,
        pool: pool_size,
        peak: lifetimes.wmax,
    }
}

/// True if no point has two live resources mapped to one qubit.
pub fn allocation_is_valid(
    program: &Program,
    lifetimes: &LifetimeTable,
    map: &RegisterMap,
) -> bool {
    for p in 1..=program.len() as Point {
        let mut used = BTreeSet::new();
        for row in &lifetimes.rows {
            if let Some((lo, hi)) = row.effective {
                if lo <= p && p <= hi {
                    if let Some(q) = map.assignment.get(&row.resource) {
                        if !used.insert(*q) {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

/// Depth and width metrics for one strategy.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StrategyMetrics {
    pub depth_block: usize,
    pub depth_gate: usize,
    pub wmax: usize,
}

/// Side-by-side metrics for the three uncomputation strategies.
#[derive(Debug, Clone, Serialize)]
pub struct StrategyReport {
    pub none: StrategyMetrics,
    pub global: StrategyMetrics,
    pub early: StrategyMetrics,
    /// Temporaries the early planner refused, by name.
    pub early_refusals: Vec<String>,
    pub global_warnings: usize,
}

impl StrategyReport {
    pub fn json(&self) -> serde_json::Value {
        serde_json::json!({
            "depth_none": self.none.depth_block,
            "depth_global": self.global.depth_block,
            "depth_early": self.early.depth_block,
            "wmax_none": self.none.wmax,
            "wmax_global": self.global.wmax,
            "wmax_early": self.early.wmax,
            "gate_depth": {
                "none": self.none.depth_gate,
                "global": self.global.depth_gate,
                "early": self.early.depth_gate,
            },
            "early_refusals": self.early_refusals,
            "global_warnings": self.global_warnings,
        })
    }

    /// Aligned-column text rendering.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str("strategy  depth(block)  depth(gate)  wmax\n");
        for (name, m) in [
            ("none", &self.none),
            ("global", &self.global),
            ("early", &self.early),
        ] {
            out.push_str(&format!(
                "{name:<8}  {:>12}  {:>11}  {:>4}\n",
                m.depth_block, m.depth_gate, m.wmax
            ));
        }
        out
    }

    /// Same table with the gate-granularity depth leading.
    pub fn table_gate(&self) -> String {
        let mut out = String::new();
        out.push_str("strategy  depth(gate)  depth(block)  wmax\n");
        for (name, m) in [
            ("none", &self.none),
            ("global", &self.global),
            ("early", &self.early),
        ] {
            out.push_str(&format!(
                "{name:<8}  {:>11}  {:>12}  {:>4}\n",
                m.depth_gate, m.depth_block, m.wmax
            ));
        }
        out
    }
}

fn metrics_for(
    program: &Program,
    releases: &[crate::analysis::ReleaseGroup],
    block_barrier: Option<Point>,
) -> Result<StrategyMetrics, ScheduleError> {
    let ddg = build_dependence_graph(program);
    let block = schedule_asap(program, &ddg, Granularity::Block, block_barrier)?;
    let inlined = inline(program)?;
    let gate_barrier = block_barrier.and_then(|b| {
        inlined
            .provenance
            .iter()
            .position(|origin| *origin >= b)
            .map(|i| (i + 1) as Point)
    });
    let gate_ddg = build_dependence_graph(&inlined.program);
    let gate = schedule_asap(&inlined.program, &gate_ddg, Granularity::Gate, gate_barrier)?;
    let trace = build_entanglement_trace(program, releases);
    let liveness_cons = compute_liveness(program, &build_entanglement_trace(program, &[]));
    let _ = trace;
    let table = compute_lifetimes(program, &liveness_cons, releases);
    Ok(StrategyMetrics {
        depth_block: block.depth,
        depth_gate: gate.depth,
        wmax: table.wmax,
    })
}

/// Compiles the program under all three strategies and reports depth at
/// both granularities plus peak width. Early reclamation can never do
/// worse than the global baseline; a violation is an internal error.
pub fn compare_strategies(program: &Program) -> Result<StrategyReport, ScheduleError> {
    let none = metrics_for(program, &[], None)?;

    let global = insert_global_uncompute(program);
    let global_metrics = metrics_for(&global.program, &global.releases, global.suffix_start)?;

    let ddg = build_dependence_graph(program);
    let trace = build_entanglement_trace(program, &[]);
    let liveness = compute_liveness(program, &trace);
    let plan = plan_early_reclamation(program, &ddg, &trace, &liveness);
    let early = insert_early_uncompute(program, &plan)?;
    let early_metrics = metrics_for(&early.program, &early.releases, None)?;

    if early_metrics.depth_block > global_metrics.depth_block
        || early_metrics.depth_gate > global_metrics.depth_gate
    {
        return Err(ScheduleError::MetricInvariant(format!(
            "depth_early ({}/{}) exceeds depth_global ({}/{})",
            early_metrics.depth_block,
            early_metrics.depth_gate,
            global_metrics.depth_block,
            global_metrics.depth_gate
        )));
    }
    if early_metrics.wmax > global_metrics.wmax {
        return Err(ScheduleError::MetricInvariant(format!(
            "wmax_early ({}) exceeds wmax_global ({})",
            early_metrics.wmax, global_metrics.wmax
        )));
    }
    Ok(StrategyReport {
        none,
        global: global_metrics,
        early: early_metrics,
        early_refusals: plan.refusals.iter().map(|r| r.name.clone()).collect(),
        global_warnings: global.warnings.len(),
    })
}

/// Applies a strategy to a program, returning the transformed program
/// with its release schedule.
pub fn apply_strategy(
    program: &Program,
    strategy: Strategy,
) -> Result<crate::reclaim::Transformed, ScheduleError> {
    match strategy {
        Strategy::None => Ok(crate::reclaim::Transformed {
            program: program.clone(),
            releases: Vec::new(),
            provenance: (1..=program.len() as Point).collect(),
            suffix_start: None,
            warnings: Vec::new(),
        }),
        Strategy::Global => Ok(insert_global_uncompute(program)),
        Strategy::Early => {
            let ddg = build_dependence_graph(program);
            let trace = build_entanglement_trace(program, &[]);
            let liveness = compute_liveness(program, &trace);
            let plan = plan_early_reclamation(program, &ddg, &trace, &liveness);
            Ok(insert_early_uncompute(program, &plan)?)
        }
    }
}
