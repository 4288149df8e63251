use num_complex::Complex64 as C64;

/// A parsed scenario: metadata, declarations, then steps.
///
/// Equality ignores source lines so that a printed and re-parsed program
/// compares equal to the original.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioAst {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub declarations: Vec<Decl>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone)]
pub struct Decl {
    pub kind: DeclKind,
    pub line: usize,
}

impl PartialEq for Decl {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeclKind {
    System {
        label: String,
        dim: usize,
    },
    Apparatus {
        label: String,
        dim: usize,
        ready: usize,
    },
    Environment {
        label: String,
        dim: usize,
    },
    Observer {
        label: String,
    },
    /// Amplitudes as written; `norm` is their Euclidean norm, divided out
    /// before the state is used.
    InitState {
        system: String,
        amplitudes: Vec<C64>,
        norm: f64,
    },
    Observable {
        name: String,
        targets: Vec<String>,
        def: ObservableDef,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservableDef {
    SpinZ,
    Pointer,
    Matrix(Vec<Vec<C64>>),
}

#[derive(Debug, Clone)]
pub struct Step {
    pub kind: StepKind,
    pub line: usize,
}

impl PartialEq for Step {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepKind {
    Premeasure { system: String, apparatus: String, observable: String },
    Measure { observer: String, observable: String, system: String, seed: Option<u64> },
    UnitaryView { observer: String },
    Decohere { target: String, env: String, overlap: f64 },
    StabilityCheck { observer: String, partition: String, target: String },
    CrossCheck { observer: String, friend: String },
}

impl StepKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            StepKind::Premeasure { .. } => "premeasure",
            StepKind::Measure { .. } => "measure",
            StepKind::UnitaryView { .. } => "unitary-view",
            StepKind::Decohere { .. } => "decohere",
            StepKind::StabilityCheck { .. } => "stability-check",
            StepKind::CrossCheck { .. } => "cross-check",
        }
    }
}

/// Name under which the builtin spin observable can be used without a
/// declaration.
pub const BUILTIN_SPIN_Z: &str = "spin-z";

impl ScenarioAst {
    pub fn observers(&self) -> impl Iterator<Item = &str> {
        self.declarations.iter().filter_map(|d| match &d.kind {
            DeclKind::Observer { label } => Some(label.as_str()),
            _ => None,
        })
    }

    pub fn count_systems(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for d in &self.declarations {
            match d.kind {
                DeclKind::System { .. } => counts.0 += 1,
                DeclKind::Apparatus { .. } => counts.1 += 1,
                DeclKind::Environment { .. } => counts.2 += 1,
                _ => {}
            }
        }
        counts
    }
}
