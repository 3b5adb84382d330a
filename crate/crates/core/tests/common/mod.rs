#![allow(dead_code)]

//! Shared helpers for the integration suites: seeded structured-program
//! generation and corpus loading. The generator emits source text and
//! runs it through the real frontend, so generated programs exercise the
//! same path as user input.
//!
//! Generated programs follow the structured shape the lifetime analyses
//! are designed for: inputs are only ever read, temporaries are defined by
//! qfree operations whose external controls are never written afterwards,
//! and transfers copy temp state onto outputs.

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

use qls_core::frontend::{parse, SourceUnit};
use qls_core::ir::Program;

pub fn compile(src: &str) -> Program {
    let unit = parse(&SourceUnit::new(src, "gen.qls"))
        .unwrap_or_else(|e| panic!("generated source failed to parse: {e:?}\n{src}"));
    unit.entry_program(None).expect("entry")
}

pub fn load_corpus(name: &str) -> Program {
    let path = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    let unit = parse(&SourceUnit::new(text, name)).unwrap_or_else(|e| panic!("{name}: {e:?}"));
    unit.entry_program(None).expect("entry")
}

pub fn corpus_files() -> Vec<String> {
    let dir = format!("{}/../../corpus", env!("CARGO_MANIFEST_DIR"));
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .expect("corpus directory")
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".qls"))
        .collect();
    names.sort();
    names
}

#[derive(Clone, Copy)]
pub struct GenConfig {
    pub inputs: usize,
    pub outputs: usize,
    pub segments: usize,
    /// Chance (out of 100) that a segment nests an inner scope.
    pub nesting_pct: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            inputs: 2,
            outputs: 2,
            segments: 3,
            nesting_pct: 30,
        }
    }
}

/// Control candidates: program inputs may couple through helper calls
/// (no entanglement edge escapes the by-value boundary); temporaries
/// couple through primitive gates only.
#[derive(Clone, Copy, PartialEq)]
enum ControlKind {
    Input,
    Temp,
}

#[allow(clippy::too_many_arguments)]
/// Emits one scope of temp preparation and transfer. Controls come from
/// the inputs and from already-defined temporaries of this or enclosing
/// scopes; none of them is written again while this scope is open, and
/// every declared temp is transferred onto an output after any nested
/// scope closes.
fn emit_scope(
    out: &mut String,
    rng: &mut ChaCha8Rng,
    indent: &str,
    avail_controls: &[(String, ControlKind)],
    outputs: &[String],
    label: &mut usize,
    allow_nested: bool,
    nesting_pct: u32,
) {
    let temp_count = rng.gen_range(1..=3usize);
    let temps: Vec<String> = (0..temp_count)
        .map(|_| {
            *label += 1;
            format!("t{label}")
        })
        .collect();
    out.push_str(&format!("{indent}qubit {};\n", temps.join(", ")));
    // Preparation phase: each temp gets one or two qfree defining ops.
    for (i, t) in temps.iter().enumerate() {
        let defs = rng.gen_range(1..=2usize);
        for _ in 0..defs {
            let mut pool: Vec<(String, ControlKind)> = avail_controls.to_vec();
            // Earlier temps of this scope may control later ones: control
            // coupling puts them in the same reclamation group.
            pool.extend(temps[..i].iter().map(|n| (n.clone(), ControlKind::Temp)));
            match rng.gen_range(0..3u32) {
                0 if !pool.is_empty() => {
                    let (c, kind) = &pool[rng.gen_range(0..pool.len())];
                    if *kind == ControlKind::Input && rng.gen_bool(0.5) {
                        out.push_str(&format!("{indent}cpy({c}, {t});\n"));
                    } else {
                        out.push_str(&format!("{indent}CX {c}, {t};\n"));
                    }
                }
                1 if pool.len() >= 2 => {
                    let a = rng.gen_range(0..pool.len());
                    let mut b = rng.gen_range(0..pool.len());
                    while b == a {
                        b = rng.gen_range(0..pool.len());
                    }
                    let (ca, ka) = &pool[a];
                    let (cb, kb) = &pool[b];
                    if *ka == ControlKind::Input && *kb == ControlKind::Input && rng.gen_bool(0.5)
                    {
                        out.push_str(&format!("{indent}mix2({ca}, {cb}, {t});\n"));
                    } else {
                        out.push_str(&format!("{indent}CCX {ca}, {cb}, {t};\n"));
                    }
                }
                _ => out.push_str(&format!("{indent}X {t};\n")),
            }
        }
    }
    if allow_nested && rng.gen_range(0..100) < nesting_pct {
        let mut inner_controls = avail_controls.to_vec();
        inner_controls.extend(temps.iter().map(|n| (n.clone(), ControlKind::Temp)));
        out.push_str(&format!("{indent}{{\n"));
        emit_scope(
            out,
            rng,
            &format!("{indent}    "),
            &inner_controls,
            outputs,
            label,
            false,
            nesting_pct,
        );
        out.push_str(&format!("{indent}}}\n"));
    }
    // Transfer phase: every temp contributes to an output after nested
    // scopes close, so an enclosing temp always outlives inner segments.
    for t in &temps {
        let y = &outputs[rng.gen_range(0..outputs.len())];
        out.push_str(&format!("{indent}CX {t}, {y};\n"));
    }
    if temps.len() >= 2 && rng.gen_bool(0.3) {
        let a = rng.gen_range(0..temps.len());
        let mut b = rng.gen_range(0..temps.len());
        while b == a {
            b = rng.gen_range(0..temps.len());
        }
        let y = &outputs[rng.gen_range(0..outputs.len())];
        out.push_str(&format!("{indent}CCX {}, {}, {y};\n", temps[a], temps[b]));
    }
}

/// Seeded structured program: a sequence of temp scopes and non-qfree
/// output work. Deterministic per seed.
pub fn random_structured_source(seed: u64, cfg: &GenConfig) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<String> = (1..=cfg.inputs).map(|i| format!("x{i}")).collect();
    let outputs: Vec<String> = (1..=cfg.outputs).map(|i| format!("y{i}")).collect();
    let mut params: Vec<String> = inputs.iter().map(|x| format!("qubit {x}")).collect();
    params.extend(outputs.iter().map(|y| format!("ref qubit {y}")));
    let mut src = String::from("void cpy(qubit c, ref qubit t) { CX c, t; }\n");
    src.push_str("void mix2(qubit a, qubit b, ref qubit t) { CX a, t; CX b, t; }\n\n");
    src.push_str(&format!("void main({}) {{\n", params.join(", ")));
    let controls: Vec<(String, ControlKind)> = inputs
        .iter()
        .map(|x| (x.clone(), ControlKind::Input))
        .collect();
    let mut label = 0usize;
    for _ in 0..cfg.segments {
        match rng.gen_range(0..10u32) {
            // Occasional non-qfree work directly on an output.
            0 => {
                let y = &outputs[rng.gen_range(0..outputs.len())];
                let g = ["H", "S", "T"][rng.gen_range(0..3usize)];
                src.push_str(&format!("    {g} {y};\n"));
            }
            _ => {
                src.push_str("    {\n");
                emit_scope(
                    &mut src,
                    &mut rng,
                    "        ",
                    &controls,
                    &outputs,
                    &mut label,
                    true,
                    cfg.nesting_pct,
                );
                src.push_str("    }\n");
            }
        }
    }
    src.push_str("}\n");
    src
}

pub fn random_structured_program(seed: u64, cfg: &GenConfig) -> Program {
    compile(&random_structured_source(seed, cfg))
}

/// The strict-improvement family: a depth-`d` qfree chain preparing one
/// temporary, a transfer, and a depth-`d` non-qfree chain on the output
/// that depends on the transfer. Early reclamation overlaps the adjoint
/// chain with the output chain; the global suffix runs after everything.
pub fn improvement_family_source(d: usize) -> String {
    assert!(d >= 1);
    let mut src = String::from("void main(qubit x, ref qubit y) {\n    qubit t;\n");
    src.push_str("    CX x, t;\n");
    for _ in 1..d {
        src.push_str("    X t;\n");
    }
    src.push_str("    CX t, y;\n");
    for _ in 0..d {
        src.push_str("    S y;\n");
    }
    src.push_str("}\n");
    src
}

/// `k` sequential scopes each preparing and transferring one temporary;
/// under early reclamation all share one pool qubit.
pub fn disjoint_temps_source(k: usize) -> String {
    let mut src = String::from("void main(qubit x, ref qubit y) {\n");
    for _ in 0..k {
        src.push_str("    { qubit t; CX x, t; CX t, y; }\n");
    }
    src.push_str("}\n");
    src
}
