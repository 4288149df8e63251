use std::collections::HashMap;

use num_complex::Complex64 as C64;

use super::ast::*;
use super::error::{ParseError, ParseErrorKind};
use super::lexer::{tokenize, Token, TokenKind};
use crate::tensor::{CMatrix, INVARIANT_TOL};

const STATEMENTS: &[&str] = &[
    "scenario",
    "seed",
    "system",
    "apparatus",
    "environment",
    "observer",
    "state",
    "observable",
    "premeasure",
    "measure",
    "unitary-view",
    "decohere",
    "stability-check",
    "cross-check",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SystemKind {
    Plain,
    Apparatus,
    Environment,
}

#[derive(Default)]
struct Scope {
    systems: Vec<(String, SystemKind, usize)>,
    observers: Vec<String>,
    observables: HashMap<String, Vec<String>>,
    initialized: Vec<String>,
}

impl Scope {
    fn system(&self, label: &str) -> Option<(SystemKind, usize)> {
        self.systems.iter().find(|(l, _, _)| l == label).map(|&(_, k, d)| (k, d))
    }
}

struct Line<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Line<'a> {
    fn peek(&self) -> &'a Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn next(&mut self) -> &'a Token {
        let t = self.peek();
        if self.pos < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, tok: &Token, expected: &[&str]) -> ParseError {
        ParseError::new(
            ParseErrorKind::UnexpectedToken,
            tok.line,
            tok.column,
            format!("unexpected {}", tok.kind.describe()),
        )
        .expecting(expected)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let tok = self.next();
        match &tok.kind {
            TokenKind::Word(w) if w == kw => Ok(()),
            _ => Err(self.unexpected(tok, &[&format!("`{kw}`")])),
        }
    }

    fn ident(&mut self) -> Result<(String, &'a Token), ParseError> {
        let tok = self.next();
        match &tok.kind {
            TokenKind::Word(w) => Ok((w.clone(), tok)),
            _ => Err(self.unexpected(tok, &["identifier"])),
        }
    }

    fn int(&mut self) -> Result<(u64, &'a Token), ParseError> {
        let tok = self.next();
        match &tok.kind {
            TokenKind::Number { int: Some(n), .. } => Ok((*n, tok)),
            _ => Err(self.unexpected(tok, &["integer"])),
        }
    }

    fn sym(&mut self, c: char) -> Result<(), ParseError> {
        let tok = self.next();
        match tok.kind {
            TokenKind::Sym(s) if s == c => Ok(()),
            _ => Err(self.unexpected(tok, &[&format!("`{c}`")])),
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek().kind == TokenKind::Sym(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn float(&mut self) -> Result<(f64, &'a Token), ParseError> {
        let start = self.peek();
        let sign = if self.eat_sym('-') {
            -1.0
        } else {
            self.eat_sym('+');
            1.0
        };
        let tok = self.next();
        match tok.kind {
            TokenKind::Number { value, .. } => Ok((sign * value, start)),
            _ => Err(self.unexpected(tok, &["number"])),
        }
    }

    /// `[sign] NUMBER [ (+|-) IMAG ]` or `[sign] IMAG`.
    fn complex(&mut self) -> Result<C64, ParseError> {
        let sign = if self.eat_sym('-') {
            -1.0
        } else {
            self.eat_sym('+');
            1.0
        };
        let tok = self.next();
        let re = match tok.kind {
            TokenKind::Number { value, .. } => sign * value,
            TokenKind::Imag(value) => return Ok(C64::new(0.0, sign * value)),
            _ => return Err(self.unexpected(tok, &["number"])),
        };
        let im_sign = match self.peek().kind {
            TokenKind::Sym('+') => 1.0,
            TokenKind::Sym('-') => -1.0,
            _ => return Ok(C64::new(re, 0.0)),
        };
        self.pos += 1;
        let tok = self.next();
        match tok.kind {
            TokenKind::Imag(value) => Ok(C64::new(re, im_sign * value)),
            _ => Err(self.unexpected(tok, &["imaginary number"])),
        }
    }

    fn amplitudes(&mut self) -> Result<Vec<C64>, ParseError> {
        self.sym('(')?;
        let mut out = vec![self.complex()?];
        loop {
            let tok = self.next();
            match tok.kind {
                TokenKind::Sym(',') => out.push(self.complex()?),
                TokenKind::Sym(')') => return Ok(out),
                _ => return Err(self.unexpected(tok, &["`,`", "`)`"])),
            }
        }
    }

    fn matrix(&mut self) -> Result<Vec<Vec<C64>>, ParseError> {
        self.sym('[')?;
        let mut rows = vec![vec![self.complex()?]];
        loop {
            let tok = self.next();
            match tok.kind {
                TokenKind::Sym(',') => rows.last_mut().expect("non-empty").push(self.complex()?),
                TokenKind::Sym(';') => rows.push(vec![self.complex()?]),
                TokenKind::Sym(']') => return Ok(rows),
                _ => return Err(self.unexpected(tok, &["`,`", "`;`", "`]`"])),
            }
        }
    }

    fn end(&mut self) -> Result<(), ParseError> {
        let tok = self.next();
        match tok.kind {
            TokenKind::Newline => Ok(()),
            _ => Err(self.unexpected(tok, &["end of line"])),
        }
    }
}

fn at(tok: &Token, kind: ParseErrorKind, message: String) -> ParseError {
    ParseError::new(kind, tok.line, tok.column, message)
}

fn forward(tok: &Token, what: &str, name: &str) -> ParseError {
    at(tok, ParseErrorKind::ForwardReference, format!("{what} `{name}` is not declared before use"))
}

fn dim_of(value: u64, tok: &Token) -> Result<usize, ParseError> {
    if value == 0 || value > (1 << 20) {
        return Err(at(tok, ParseErrorKind::InvalidValue, format!("dimension {value} must lie in 1..=2^20")));
    }
    Ok(value as usize)
}

/// Parses and statically checks a scenario source.
pub fn parse(source: &str) -> Result<ScenarioAst, ParseError> {
    let tokens = tokenize(source)?;
    let mut ast = ScenarioAst::default();
    let mut scope = Scope::default();
    for line_tokens in tokens.split_inclusive(|t| t.kind == TokenKind::Newline) {
        if line_tokens.len() <= 1 {
            continue;
        }
        let mut line = Line { tokens: line_tokens, pos: 0 };
        statement(&mut line, &mut ast, &mut scope)?;
    }
    Ok(ast)
}

fn statement(line: &mut Line<'_>, ast: &mut ScenarioAst, scope: &mut Scope) -> Result<(), ParseError> {
    let head = line.next();
    let line_no = head.line;
    let keyword = match &head.kind {
        TokenKind::Word(w) => w.as_str(),
        _ => return Err(line.unexpected(head, &["statement keyword"])),
    };
    match keyword {
        "scenario" => {
            let tok = line.next();
            let TokenKind::Str(name) = &tok.kind else {
                return Err(line.unexpected(tok, &["string"]));
            };
            line.end()?;
            if ast.name.is_some() {
                return Err(at(head, ParseErrorKind::Duplicate, "scenario name given twice".into()));
            }
            ast.name = Some(name.clone());
        }
        "seed" => {
            let (seed, _) = line.int()?;
            line.end()?;
            if ast.seed.is_some() {
                return Err(at(head, ParseErrorKind::Duplicate, "default seed given twice".into()));
            }
            ast.seed = Some(seed);
        }
        "system" | "apparatus" | "environment" => {
            let (label, label_tok) = line.ident()?;
            line.keyword("dim")?;
            let (dim, dim_tok) = line.int()?;
            let dim = dim_of(dim, dim_tok)?;
            let kind = match keyword {
                "system" => DeclKind::System { label: label.clone(), dim },
                "environment" => DeclKind::Environment { label: label.clone(), dim },
                _ => {
                    line.keyword("ready")?;
                    let (ready, ready_tok) = line.int()?;
                    if ready as usize >= dim {
                        return Err(at(
                            ready_tok,
                            ParseErrorKind::DimensionMismatch,
                            format!("ready index {ready} out of range for dim {dim}"),
                        ));
                    }
                    DeclKind::Apparatus { label: label.clone(), dim, ready: ready as usize }
                }
            };
            line.end()?;
            if scope.system(&label).is_some() {
                return Err(at(label_tok, ParseErrorKind::Duplicate, format!("subsystem `{label}` already declared")));
            }
            let sk = match keyword {
                "system" => SystemKind::Plain,
                "apparatus" => SystemKind::Apparatus,
                _ => SystemKind::Environment,
            };
            scope.systems.push((label, sk, dim));
            ast.declarations.push(Decl { kind, line: line_no });
        }
        "observer" => {
            let (label, tok) = line.ident()?;
            line.end()?;
            if scope.observers.contains(&label) {
                return Err(at(tok, ParseErrorKind::Duplicate, format!("observer `{label}` already declared")));
            }
            scope.observers.push(label.clone());
            ast.declarations.push(Decl { kind: DeclKind::Observer { label }, line: line_no });
        }
        "state" => {
            let (system, tok) = line.ident()?;
            line.sym('=')?;
            let open = line.peek();
            let amplitudes = line.amplitudes()?;
            line.end()?;
            let Some((_, dim)) = scope.system(&system) else {
                return Err(forward(tok, "subsystem", &system));
            };
            if scope.initialized.contains(&system) {
                return Err(at(tok, ParseErrorKind::Duplicate, format!("state of `{system}` already given")));
            }
            if amplitudes.len() != dim {
                return Err(at(
                    open,
                    ParseErrorKind::DimensionMismatch,
                    format!("`{system}` has dim {dim} but {} amplitudes were given", amplitudes.len()),
                ));
            }
            let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(at(open, ParseErrorKind::ZeroNorm, format!("state has zero norm for `{system}`")));
            }
            scope.initialized.push(system.clone());
            ast.declarations.push(Decl { kind: DeclKind::InitState { system, amplitudes, norm }, line: line_no });
        }
        "observable" => {
            let (name, name_tok) = line.ident()?;
            line.keyword("on")?;
            let mut targets = vec![line.ident()?];
            while line.eat_sym('+') {
                targets.push(line.ident()?);
            }
            line.sym('=')?;
            let def_tok = line.peek();
            let def = match &def_tok.kind {
                TokenKind::Word(w) if w == BUILTIN_SPIN_Z => {
                    line.next();
                    ObservableDef::SpinZ
                }
                TokenKind::Word(w) if w == "pointer" => {
                    line.next();
                    ObservableDef::Pointer
                }
                TokenKind::Sym('[') => ObservableDef::Matrix(line.matrix()?),
                _ => return Err(line.unexpected(def_tok, &["`spin-z`", "`pointer`", "matrix"])),
            };
            line.end()?;
            if name == BUILTIN_SPIN_Z || scope.observables.contains_key(&name) {
                return Err(at(name_tok, ParseErrorKind::Duplicate, format!("observable `{name}` already declared")));
            }
            let mut side = 1usize;
            let mut labels = Vec::new();
            for (label, tok) in &targets {
                let Some((_, dim)) = scope.system(label) else {
                    return Err(forward(tok, "subsystem", label));
                };
                if labels.contains(label) {
                    return Err(at(tok, ParseErrorKind::Duplicate, format!("`{label}` listed twice")));
                }
                labels.push(label.clone());
                side = side.saturating_mul(dim);
            }
            check_observable_def(&def, side, targets.len(), def_tok)?;
            scope.observables.insert(name.clone(), labels.clone());
            ast.declarations.push(Decl { kind: DeclKind::Observable { name, targets: labels, def }, line: line_no });
        }
        "premeasure" => {
            let (system, sys_tok) = line.ident()?;
            line.keyword("with")?;
            let (apparatus, app_tok) = line.ident()?;
            line.keyword("using")?;
            let (observable, obs_tok) = line.ident()?;
            line.end()?;
            let sys_dim = require_system(scope, &system, sys_tok)?;
            match scope.system(&apparatus) {
                None => return Err(forward(app_tok, "apparatus", &apparatus)),
                Some((SystemKind::Apparatus, _)) => {}
                Some(_) => {
                    return Err(at(app_tok, ParseErrorKind::InvalidValue, format!("`{apparatus}` is not an apparatus")))
                }
            }
            if system == apparatus {
                return Err(at(app_tok, ParseErrorKind::InvalidValue, "system and apparatus must differ".into()));
            }
            check_observable_use(scope, &observable, obs_tok, &system, sys_dim)?;
            ast.steps.push(Step { kind: StepKind::Premeasure { system, apparatus, observable }, line: line_no });
        }
        "measure" => {
            let (observer, observer_tok) = line.ident()?;
            let (observable, obs_tok) = line.ident()?;
            line.keyword("on")?;
            let (system, sys_tok) = line.ident()?;
            let seed = if line.peek().kind == TokenKind::Word("seed".into()) {
                line.next();
                Some(line.int()?.0)
            } else {
                None
            };
            line.end()?;
            require_observer(scope, &observer, observer_tok)?;
            let sys_dim = require_system(scope, &system, sys_tok)?;
            if system == observer {
                return Err(at(sys_tok, ParseErrorKind::InvalidValue, format!("`{observer}` cannot measure itself")));
            }
            check_observable_use(scope, &observable, obs_tok, &system, sys_dim)?;
            ast.steps.push(Step { kind: StepKind::Measure { observer, observable, system, seed }, line: line_no });
        }
        "unitary-view" => {
            let (observer, tok) = line.ident()?;
            line.end()?;
            require_observer(scope, &observer, tok)?;
            ast.steps.push(Step { kind: StepKind::UnitaryView { observer }, line: line_no });
        }
        "decohere" => {
            let (target, target_tok) = line.ident()?;
            line.keyword("into")?;
            let (env, env_tok) = line.ident()?;
            line.keyword("overlap")?;
            let (overlap, overlap_tok) = line.float()?;
            line.end()?;
            require_system(scope, &target, target_tok)?;
            match scope.system(&env) {
                None => return Err(forward(env_tok, "environment", &env)),
                Some((SystemKind::Environment, _)) => {}
                Some(_) => {
                    return Err(at(env_tok, ParseErrorKind::InvalidValue, format!("`{env}` is not an environment")))
                }
            }
            if target == env {
                return Err(at(env_tok, ParseErrorKind::InvalidValue, "target and environment must differ".into()));
            }
            if !(0.0..=1.0).contains(&overlap) {
                return Err(at(
                    overlap_tok,
                    ParseErrorKind::InvalidValue,
                    format!("overlap {overlap} must lie in [0, 1]"),
                ));
            }
            ast.steps.push(Step { kind: StepKind::Decohere { target, env, overlap }, line: line_no });
        }
        "stability-check" => {
            let (observer, observer_tok) = line.ident()?;
            line.keyword("partition")?;
            let (partition, part_tok) = line.ident()?;
            line.keyword("target")?;
            let (target, target_tok) = line.ident()?;
            line.end()?;
            require_observer(scope, &observer, observer_tok)?;
            if !scope.observables.contains_key(&partition) {
                return Err(forward(part_tok, "observable", &partition));
            }
            if !scope.observables.contains_key(&target) {
                return Err(forward(target_tok, "observable", &target));
            }
            ast.steps.push(Step { kind: StepKind::StabilityCheck { observer, partition, target }, line: line_no });
        }
        "cross-check" => {
            let (observer, observer_tok) = line.ident()?;
            line.keyword("against")?;
            let (friend, friend_tok) = line.ident()?;
            line.end()?;
            require_observer(scope, &observer, observer_tok)?;
            require_observer(scope, &friend, friend_tok)?;
            if observer == friend {
                return Err(at(
                    friend_tok,
                    ParseErrorKind::InvalidValue,
                    "an observer cannot cross-check itself".into(),
                ));
            }
            ast.steps.push(Step { kind: StepKind::CrossCheck { observer, friend }, line: line_no });
        }
        other => {
            return Err(at(head, ParseErrorKind::UnknownKeyword, format!("unknown keyword `{other}`"))
                .expecting(&STATEMENTS.iter().map(|s| &s[..]).collect::<Vec<_>>()))
        }
    }
    Ok(())
}

fn require_system(scope: &Scope, label: &str, tok: &Token) -> Result<usize, ParseError> {
    scope.system(label).map(|(_, d)| d).ok_or_else(|| forward(tok, "subsystem", label))
}

fn require_observer(scope: &Scope, label: &str, tok: &Token) -> Result<(), ParseError> {
    if scope.observers.iter().any(|o| o == label) {
        Ok(())
    } else {
        Err(forward(tok, "observer", label))
    }
}

fn check_observable_use(
    scope: &Scope,
    name: &str,
    tok: &Token,
    system: &str,
    sys_dim: usize,
) -> Result<(), ParseError> {
    match scope.observables.get(name) {
        Some(targets) if targets.len() == 1 && targets[0] == system => Ok(()),
        Some(targets) => Err(at(
            tok,
            ParseErrorKind::DimensionMismatch,
            format!("observable `{name}` acts on {}, not on `{system}`", targets.join("+")),
        )),
        None if name == BUILTIN_SPIN_Z => {
            if sys_dim == 2 {
                Ok(())
            } else {
                Err(at(
                    tok,
                    ParseErrorKind::DimensionMismatch,
                    format!("spin-z needs dim 2, `{system}` has dim {sys_dim}"),
                ))
            }
        }
        None => Err(forward(tok, "observable", name)),
    }
}

fn check_observable_def(def: &ObservableDef, side: usize, n_targets: usize, tok: &Token) -> Result<(), ParseError> {
    match def {
        ObservableDef::SpinZ if side != 2 || n_targets != 1 => {
            Err(at(tok, ParseErrorKind::DimensionMismatch, "spin-z acts on a single subsystem of dim 2".into()))
        }
        ObservableDef::Pointer if n_targets != 1 => {
            Err(at(tok, ParseErrorKind::DimensionMismatch, "pointer acts on a single apparatus".into()))
        }
        ObservableDef::Matrix(rows) => {
            if rows.len() != side || rows.iter().any(|r| r.len() != side) {
                return Err(at(
                    tok,
                    ParseErrorKind::DimensionMismatch,
                    format!("matrix must be {side}x{side} for the declared targets"),
                ));
            }
            let m = CMatrix::from_rows(rows).map_err(|e| at(tok, ParseErrorKind::InvalidValue, e.to_string()))?;
            if !m.is_hermitian(INVARIANT_TOL) {
                return Err(at(tok, ParseErrorKind::InvalidValue, "observable matrix is not Hermitian".into()));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}
