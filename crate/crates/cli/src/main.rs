//! `qlsc` — command-line driver for the QLS compiler.
//!
//! One subcommand per pipeline stage: `check` validates, `analyze` emits
//! lifetime tables and graphs, `compile` emits the transformed program,
//! `report` compares strategies, `verify` runs the statevector oracle,
//! and `export` writes a flat gate list.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qls_core::analysis::{
    build_dependence_graph, build_entanglement_trace, compute_lifetimes, compute_liveness,
    dependence_dot, entanglement_dot, lifetimes_json, width_profile_csv,
};
use qls_core::frontend::{parse, pretty_program, resolve_aliases, Severity, SourceUnit};
use qls_core::ir::{inline, OperationKind, Program};
use qls_core::reclaim::{enforce_param_semantics, plan_early_reclamation};
use qls_core::schedule::{allocate_registers, apply_strategy, compare_strategies};
use qls_core::sim::{
    verify_equivalence, verify_restoration, RestorationCheck, SamplingPolicy, SimError,
};
use qls_core::Strategy;

const EXIT_OK: u8 = 0;
const EXIT_PARSE: u8 = 1;
const EXIT_REFUSAL: u8 = 2;
const EXIT_VERIFY: u8 = 3;
const EXIT_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(
    name = "qlsc",
    about = "Compiler for the QLS scoped quantum language with liveness-guided uncomputation",
    after_help = "Exit codes: 0 ok, 1 parse/validation error, 2 plan refusal under --strict, \
                  3 verification failure, 4 simulation budget exceeded."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    None,
    Global,
    Early,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::None => Strategy::None,
            StrategyArg::Global => Strategy::Global,
            StrategyArg::Early => Strategy::Early,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Emit {
    Json,
    Dot,
    Table,
    Qasm,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum GranularityArg {
    Block,
    Gate,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a source file, including parameter-passing
    /// checks.
    Check {
        input: PathBuf,
        #[arg(long)]
        entry: Option<String>,
    },
    /// Emit the lifetime table, dependence/entanglement graphs, and the
    /// early-reclamation plan.
    Analyze {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        emit: Emit,
        #[arg(long)]
        entry: Option<String>,
        /// Also write a per-point width profile CSV to this path.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fail (exit 2) if any temporary is refused reclamation.
        #[arg(long)]
        strict: bool,
    },
    /// Transform the program under a strategy and print it.
    Compile {
        input: PathBuf,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long, value_enum, default_value = "table")]
        emit: Emit,
        #[arg(long)]
        entry: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// Compare depth and peak width across all three strategies.
    Report {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        emit: Emit,
        /// Depth column shown in the text table (JSON always carries
        /// both).
        #[arg(long, value_enum, default_value = "block")]
        granularity: GranularityArg,
        #[arg(long)]
        entry: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the statevector oracle: output preservation and restoration.
    Verify {
        input: PathBuf,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long, default_value = "42")]
        seed: u64,
        #[arg(long, value_enum, default_value = "table")]
        emit: Emit,
        #[arg(long)]
        entry: Option<String>,
    },
    /// Write the inlined program as a flat gate list (adjoints suffixed
    /// `_dg`).
    Export {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "none")]
        strategy: StrategyArg,
        #[arg(long)]
        entry: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("{err}");
            err.exit_code()
        }
    };
    ExitCode::from(code)
}

#[derive(Debug)]
enum CliError {
    Io(String),
    Diagnostics(Vec<qls_core::frontend::Diagnostic>),
    Invalid(String),
    Budget(String),
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) | CliError::Invalid(m) | CliError::Budget(m) | CliError::Internal(m) => {
                write!(f, "{m}")
            }
            CliError::Diagnostics(diags) => {
                for d in diags {
                    writeln!(f, "{d}")?;
                }
                Ok(())
            }
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Diagnostics(_) | CliError::Invalid(_) => EXIT_PARSE,
            CliError::Budget(_) => EXIT_BUDGET,
            CliError::Internal(_) => EXIT_VERIFY,
        }
    }
}

fn load(input: &PathBuf, entry: Option<&str>) -> Result<Program, CliError> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?;
    let src = SourceUnit::new(text, input.display().to_string());
    let unit = parse(&src).map_err(CliError::Diagnostics)?;
    let program = unit
        .entry_program(entry)
        .map_err(|d| CliError::Diagnostics(vec![d]))?;
    let program = resolve_aliases(&program).map_err(CliError::Diagnostics)?;
    program
        .validate()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    qls_core::ir::check_call_graph(&program).map_err(|e| CliError::Invalid(e.to_string()))?;
    Ok(program)
}

fn write_out(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Check { input, entry } => {
            let program = load(&input, entry.as_deref())?;
            let diags = enforce_param_semantics(&program);
            for d in &diags {
                eprintln!("{d}");
            }
            if diags.iter().any(|d| d.severity == Severity::Error) {
                return Ok(EXIT_PARSE);
            }
            println!(
                "ok: {} points, {} resources, {} functions",
                program.len(),
                program.resources.len(),
                program.functions.len()
            );
            Ok(EXIT_OK)
        }
        Command::Analyze {
            input,
            emit,
            entry,
            profile,
            out,
            strict,
        } => {
            let program = load(&input, entry.as_deref())?;
            let ddg = build_dependence_graph(&program);
            let trace = build_entanglement_trace(&program, &[]);
            let liveness = compute_liveness(&program, &trace);
            let plan = plan_early_reclamation(&program, &ddg, &trace, &liveness);
            let table = compute_lifetimes(&program, &liveness, &plan.releases());
            if let Some(path) = &profile {
                std::fs::write(path, width_profile_csv(&table))
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
            let content = match emit {
                Emit::Json => {
                    let mut v = lifetimes_json(&table);
                    v["plan"] = plan.json(&program);
                    v["dependence_edges"] = serde_json::json!(ddg
                        .edge_pairs()
                        .iter()
                        .map(|(a, b)| serde_json::json!([a, b]))
                        .collect::<Vec<_>>());
                    v["entanglement_edges"] = serde_json::json!(trace
                        .edges
                        .iter()
                        .map(|e| serde_json::json!({
                            "a": program.resource(e.a).name,
                            "b": program.resource(e.b).name,
                            "introduced_at": e.introduced_at,
                        }))
                        .collect::<Vec<_>>());
                    format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
                }
                Emit::Dot => format!(
                    "{}\n{}",
                    dependence_dot(&program, &ddg),
                    entanglement_dot(&program, &trace)
                ),
                Emit::Table | Emit::Qasm => {
                    let mut s = String::from("resource    conservative    effective\n");
                    for row in &table.rows {
                        let fmt = |iv: Option<(u32, u32)>| match iv {
                            Some((lo, hi)) => format!("[p{lo}, p{hi}]"),
                            None => "-".to_string(),
                        };
                        s.push_str(&format!(
                            "{:<10}  {:<14}  {:<14}\n",
                            row.name,
                            fmt(row.conservative),
                            fmt(row.effective)
                        ));
                    }
                    s.push_str(&format!(
                        "wmax {} (conservative {})\n",
                        table.wmax, table.wmax_conservative
                    ));
                    s
                }
            };
            write_out(&out, &content)?;
            if strict && !plan.refusals.is_empty() {
                for r in &plan.refusals {
                    eprintln!("refused: {} ({}) at p{}", r.name, r.reason, r.point);
                }
                return Ok(EXIT_REFUSAL);
            }
            Ok(EXIT_OK)
        }
        Command::Compile {
            input,
            strategy,
            emit,
            entry,
            out,
            strict,
        } => {
            let program = load(&input, entry.as_deref())?;
            let strategy = Strategy::from(strategy);
            let transformed =
                apply_strategy(&program, strategy).map_err(|e| CliError::Internal(e.to_string()))?;
            if strict && strategy == Strategy::Early {
                let ddg = build_dependence_graph(&program);
                let trace = build_entanglement_trace(&program, &[]);
                let liveness = compute_liveness(&program, &trace);
                let plan = plan_early_reclamation(&program, &ddg, &trace, &liveness);
                if !plan.refusals.is_empty() {
                    for r in &plan.refusals {
                        eprintln!("refused: {} ({}) at p{}", r.name, r.reason, r.point);
                    }
                    return Ok(EXIT_REFUSAL);
                }
            }
            for w in &transformed.warnings {
                eprintln!("{w}");
            }
            let content = match emit {
                Emit::Json => format!(
                    "{}\n",
                    serde_json::to_string_pretty(&transformed.program).unwrap()
                ),
                Emit::Qasm => flat_gate_list(&transformed)?,
                Emit::Table | Emit::Dot => pretty_program(&transformed.program),
            };
            write_out(&out, &content)?;
            Ok(EXIT_OK)
        }
        Command::Report {
            input,
            emit,
            granularity,
            entry,
            out,
        } => {
            let program = load(&input, entry.as_deref())?;
            let report =
                compare_strategies(&program).map_err(|e| CliError::Internal(e.to_string()))?;
            let content = match emit {
                Emit::Json => format!(
                    "{}\n",
                    serde_json::to_string_pretty(&report.json()).unwrap()
                ),
                _ => match granularity {
                    GranularityArg::Block => report.table(),
                    GranularityArg::Gate => report.table_gate(),
                },
            };
            write_out(&out, &content)?;
            Ok(EXIT_OK)
        }
        Command::Verify {
            input,
            strategy,
            seed,
            emit,
            entry,
        } => {
            let program = load(&input, entry.as_deref())?;
            let strategy = Strategy::from(strategy);
            let policy = SamplingPolicy {
                random_products: 16,
                seed,
            };
            let transformed =
                apply_strategy(&program, strategy).map_err(|e| CliError::Internal(e.to_string()))?;
            let mut reports = Vec::new();
            let mut pass = true;

            let persistent: Vec<_> = program
                .resources
                .iter()
                .filter(|r| r.persistent)
                .map(|r| r.id)
                .collect();
            if strategy != Strategy::None && !persistent.is_empty() {
                let eq = verify_equivalence(&program, &transformed.program, &persistent, &policy)
                    .map_err(map_sim_err)?;
                pass &= eq.pass;
                reports.push(serde_json::json!({
                    "check": format!("output-preservation[{strategy}]"),
                    "inputs": eq.inputs,
                    "max_trace_distance": eq.max_trace_distance,
                    "pass": eq.pass,
                }));
            }

            let checks: Vec<RestorationCheck> = match strategy {
                Strategy::None => {
                    // No reclamation: every touched temporary is expected
                    // to be back in |0> at program end, which fails for
                    // dirty programs.
                    let temps: Vec<_> = program
                        .temporaries()
                        .filter(|r| program.first_touch(r.id).is_some())
                        .map(|r| r.id)
                        .collect();
                    if temps.is_empty() || program.is_empty() {
                        Vec::new()
                    } else {
                        vec![RestorationCheck {
                            temps,
                            release: program.len() as u32,
                        }]
                    }
                }
                _ => transformed
                    .releases
                    .iter()
                    .map(|g| RestorationCheck {
                        temps: g.temps.clone(),
                        release: g.release,
                    })
                    .collect(),
            };
            if !checks.is_empty() {
                let rest = verify_restoration(&transformed.program, &checks, &policy)
                    .map_err(map_sim_err)?;
                pass &= rest.pass;
                reports.push(serde_json::json!({
                    "check": format!("restoration[{strategy}]"),
                    "inputs": rest.inputs,
                    "min_zero_population": rest.min_zero_population,
                    "min_purity": rest.min_purity,
                    "pass": rest.pass,
                }));
            }

            match emit {
                Emit::Json => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&serde_json::Value::Array(reports)).unwrap()
                    );
                }
                _ => {
                    for r in &reports {
                        let status = if r["pass"].as_bool().unwrap() {
                            "PASS"
                        } else {
                            "FAIL"
                        };
                        println!("{status}  {}", r["check"].as_str().unwrap());
                    }
                }
            }
            Ok(if pass { EXIT_OK } else { EXIT_VERIFY })
        }
        Command::Export {
            input,
            strategy,
            entry,
            out,
        } => {
            let program = load(&input, entry.as_deref())?;
            let transformed = apply_strategy(&program, Strategy::from(strategy))
                .map_err(|e| CliError::Internal(e.to_string()))?;
            let content = flat_gate_list(&transformed)?;
            write_out(&out, &content)?;
            Ok(EXIT_OK)
        }
    }
}

fn map_sim_err(e: SimError) -> CliError {
    match e {
        SimError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
        other => CliError::Internal(other.to_string()),
    }
}

/// One gate per line over physical qubits: `NAME q[i], q[j]`, adjoints
/// suffixed `_dg`, measurements as `MEASURE q[i]`. Release points are
/// mapped through the inline provenance so restored temporaries share
/// pool qubits.
fn flat_gate_list(transformed: &qls_core::reclaim::Transformed) -> Result<String, CliError> {
    let inlined =
        inline(&transformed.program).map_err(|e| CliError::Invalid(e.to_string()))?;
    let gate_releases: Vec<qls_core::analysis::ReleaseGroup> = transformed
        .releases
        .iter()
        .map(|g| qls_core::analysis::ReleaseGroup {
            temps: g.temps.clone(),
            release: inlined.last_point_from(g.release),
        })
        .collect();
    let p = &inlined.program;
    let trace = build_entanglement_trace(p, &[]);
    let liveness = compute_liveness(p, &trace);
    let table = compute_lifetimes(p, &liveness, &gate_releases);
    let map = allocate_registers(p, &table);
    let mut out = format!("// qubits: {}\n", map.total_qubits());
    for op in &p.operations {
        let regs: Vec<String> = op
            .operands
            .iter()
            .map(|o| format!("q[{}]", map.assignment[&o.resource]))
            .collect();
        let line = match &op.kind {
            OperationKind::Gate(g) => format!("{} {}", g.name(), regs.join(", ")),
            OperationKind::AdjointGate(g) => format!("{}_dg {}", g.name(), regs.join(", ")),
            OperationKind::Measure => format!("MEASURE {}", regs.join(", ")),
            OperationKind::Call(f) | OperationKind::AdjointCall(f) => {
                return Err(CliError::Invalid(format!(
                    "unresolved call `{f}` after inlining"
                )))
            }
        };
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}
