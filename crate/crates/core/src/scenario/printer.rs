use std::fmt::Write;

use num_complex::Complex64 as C64;

use super::ast::*;

fn real(x: f64) -> String {
    format!("{x:?}")
}

fn complex(z: C64) -> String {
    if z.im == 0.0 {
        return real(z.re);
    }
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{sign}{}i", real(z.re), real(z.im.abs()))
}

fn matrix(rows: &[Vec<C64>]) -> String {
    let rows: Vec<String> = rows.iter().map(|r| r.iter().map(|&z| complex(z)).collect::<Vec<_>>().join(", ")).collect();
    format!("[{}]", rows.join("; "))
}

fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Renders an AST in canonical form: metadata, declarations, then steps.
pub fn print(ast: &ScenarioAst) -> String {
    let mut out = String::new();
    if let Some(name) = &ast.name {
        writeln!(out, "scenario {}", quoted(name)).unwrap();
    }
    if let Some(seed) = ast.seed {
        writeln!(out, "seed {seed}").unwrap();
    }
    for decl in &ast.declarations {
        let line = match &decl.kind {
            DeclKind::System { label, dim } => format!("system {label} dim {dim}"),
            DeclKind::Apparatus { label, dim, ready } => format!("apparatus {label} dim {dim} ready {ready}"),
            DeclKind::Environment { label, dim } => format!("environment {label} dim {dim}"),
            DeclKind::Observer { label } => format!("observer {label}"),
            DeclKind::InitState { system, amplitudes, .. } => {
                let amps: Vec<String> = amplitudes.iter().map(|&z| complex(z)).collect();
                format!("state {system} = ({})", amps.join(", "))
            }
            DeclKind::Observable { name, targets, def } => {
                let def = match def {
                    ObservableDef::SpinZ => BUILTIN_SPIN_Z.to_string(),
                    ObservableDef::Pointer => "pointer".to_string(),
                    ObservableDef::Matrix(rows) => matrix(rows),
                };
                format!("observable {name} on {} = {def}", targets.join("+"))
            }
        };
        writeln!(out, "{line}").unwrap();
    }
    for step in &ast.steps {
        let line = match &step.kind {
            StepKind::Premeasure { system, apparatus, observable } => {
                format!("premeasure {system} with {apparatus} using {observable}")
            }
            StepKind::Measure { observer, observable, system, seed } => {
                let mut s = format!("measure {observer} {observable} on {system}");
                if let Some(seed) = seed {
                    write!(s, " seed {seed}").unwrap();
                }
                s
            }
            StepKind::UnitaryView { observer } => format!("unitary-view {observer}"),
            StepKind::Decohere { target, env, overlap } => {
                format!("decohere {target} into {env} overlap {}", real(*overlap))
            }
            StepKind::StabilityCheck { observer, partition, target } => {
                format!("stability-check {observer} partition {partition} target {target}")
            }
            StepKind::CrossCheck { observer, friend } => format!("cross-check {observer} against {friend}"),
        };
        writeln!(out, "{line}").unwrap();
    }
    out
}
