//! Labeled tensor-product layouts, pure and mixed states, and observables.
//!
//! Subsystem order is the registry's declaration order; every Kronecker
//! layout in the crate derives from it.

use std::fmt;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tensor::{self, CMatrix, CVector, SpectralDecomposition, INVARIANT_TOL, MAX_ENTRIES, MERGE_TOL};

/// Minimum eigenvalue tolerated for a density matrix.
pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subsystem {
    pub label: String,
    pub dim: usize,
}

impl Subsystem {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        Self { label: label.into(), dim }
    }
}

/// Ordered list of named subsystems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemRegistry {
    systems: Vec<Subsystem>,
}

impl SystemRegistry {
    pub fn new(systems: Vec<Subsystem>) -> Result<Self> {
        if systems.is_empty() {
            return Err(Error::Usage("registry needs at least one subsystem".into()));
        }
        let mut total: usize = 1;
        for (i, s) in systems.iter().enumerate() {
            if s.label.is_empty() {
                return Err(Error::Usage("subsystem labels must be non-empty".into()));
            }
            if s.dim == 0 {
                return Err(Error::Usage(format!("subsystem `{}` has dimension 0", s.label)));
            }
            if systems[..i].iter().any(|o| o.label == s.label) {
                return Err(Error::Usage(format!("duplicate subsystem label `{}`", s.label)));
            }
            total = total
                .checked_mul(s.dim)
                .filter(|&t| t <= MAX_ENTRIES)
                .ok_or_else(|| Error::Sizing(format!("total dimension exceeds {MAX_ENTRIES}")))?;
        }
        Ok(Self { systems })
    }

    /// Shorthand for tests and builders: `[("s", 2), ("O", 3)]`.
    pub fn from_pairs(pairs: &[(&str, usize)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(l, d)| Subsystem::new(l, d)).collect())
    }

    pub fn systems(&self) -> &[Subsystem] {
        &self.systems
    }

    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.systems.iter().map(|s| s.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.systems.iter().map(|s| s.dim).product()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.systems.iter().position(|s| s.label == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    pub fn get(&self, label: &str) -> Result<&Subsystem> {
        self.systems
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| Error::Usage(format!("unknown subsystem `{label}`")))
    }

    /// Registry restricted to the given subsystem indices (kept in registry order).
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        let systems =
            self.systems.iter().enumerate().filter(|(i, _)| keep.contains(i)).map(|(_, s)| s.clone()).collect();
        Self::new(systems)
    }

    /// Splits a global basis index into per-subsystem digits.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.systems.len()];
        for (k, s) in self.systems.iter().enumerate().rev() {
            out[k] = index % s.dim;
            index /= s.dim;
        }
        out
    }

    pub fn basis_label(&self, index: usize) -> String {
        self.digits(index)
            .iter()
            .zip(&self.systems)
            .map(|(d, s)| format!("{}={}", s.label, d))
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl fmt::Display for SystemRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.systems.iter().map(|s| format!("{}:{}", s.label, s.dim)).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateForm {
    Pure(CVector),
    Mixed(CMatrix),
}

/// A pure or mixed state over a registry.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    registry: SystemRegistry,
    form: StateForm,
}

impl State {
    pub fn pure(registry: SystemRegistry, ket: CVector) -> Result<Self> {
        if ket.dim() != registry.total_dim() {
            return Err(Error::Usage(format!(
                "ket of dim {} does not fit registry {registry} (total {})",
                ket.dim(),
                registry.total_dim()
            )));
        }
        let norm = ket.norm();
        if (norm - 1.0).abs() > INVARIANT_TOL {
            return Err(Error::Contract(format!("ket norm {norm} is not 1")));
        }
        Ok(Self { registry, form: StateForm::Pure(ket) })
    }

    pub fn mixed(registry: SystemRegistry, rho: CMatrix) -> Result<Self> {
        let n = registry.total_dim();
        if !rho.is_square() || rho.rows() != n {
            return Err(Error::Usage(format!(
                "density matrix {}x{} does not fit registry {registry}",
                rho.rows(),
                rho.cols()
            )));
        }
        let herm = rho.hermiticity_error();
        if herm > INVARIANT_TOL {
            return Err(Error::Contract(format!("density matrix not Hermitian ({herm:.3e})")));
        }
        let tr = rho.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > INVARIANT_TOL {
            return Err(Error::Contract(format!("density matrix trace {tr} is not 1")));
        }
        let (values, _) = tensor::eigh(&rho)?;
        if values[0] < -PSD_TOL {
            return Err(Error::Contract(format!("density matrix has negative eigenvalue {}", values[0])));
        }
        Ok(Self { registry, form: StateForm::Mixed(rho) })
    }

    pub(crate) fn pure_renormalized(registry: SystemRegistry, ket: CVector) -> Result<Self> {
        let ket = ket.normalized().map_err(|_| Error::DegenerateMeasurement)?;
        Self::pure(registry, ket)
    }

    pub(crate) fn mixed_unchecked(registry: SystemRegistry, rho: CMatrix) -> Self {
        Self { registry, form: StateForm::Mixed(rho) }
    }

    pub fn registry(&self) -> &SystemRegistry {
        &self.registry
    }

    pub fn form(&self) -> &StateForm {
        &self.form
    }

    pub fn is_pure_form(&self) -> bool {
        matches!(self.form, StateForm::Pure(_))
    }

    pub fn ket(&self) -> Option<&CVector> {
        match &self.form {
            StateForm::Pure(v) => Some(v),
            StateForm::Mixed(_) => None,
        }
    }

    pub fn density_matrix(&self) -> CMatrix {
        match &self.form {
            StateForm::Pure(v) => CMatrix::outer(v, v),
            StateForm::Mixed(rho) => rho.clone(),
        }
    }

    /// tr(ρ²)
    pub fn purity(&self) -> f64 {
        match &self.form {
            StateForm::Pure(v) => v.norm().powi(4),
            StateForm::Mixed(rho) => rho.entries().iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// Largest deviation from the type invariants (norm, trace, Hermiticity).
    pub fn invariant_error(&self) -> f64 {
        match &self.form {
            StateForm::Pure(v) => (v.norm() - 1.0).abs(),
            StateForm::Mixed(rho) => {
                let tr = (rho.trace() - C64::new(1.0, 0.0)).norm();
                tr.max(rho.hermiticity_error())
            }
        }
    }

    /// Reduced state on the listed subsystems.
    pub fn reduced(&self, keep: &[&str]) -> Result<State> {
        let idx: Vec<usize> = keep
            .iter()
            .map(|l| self.registry.index_of(l).ok_or_else(|| Error::Usage(format!("unknown subsystem `{l}`"))))
            .collect::<Result<_>>()?;
        if idx.len() == self.registry.len() {
            return Ok(self.clone());
        }
        let rho = tensor::partial_trace(&self.density_matrix(), &self.registry.dims(), &idx)?;
        Ok(State::mixed_unchecked(self.registry.restrict(&idx)?, rho))
    }

    /// Applies an operator V as ψ ↦ Vψ or ρ ↦ VρV†.
    pub(crate) fn transformed(&self, op: &CMatrix) -> Result<State> {
        let form = match &self.form {
            StateForm::Pure(v) => StateForm::Pure(op.apply(v)?),
            StateForm::Mixed(rho) => StateForm::Mixed(rho.conjugate_by(op)?),
        };
        Ok(State { registry: self.registry.clone(), form })
    }
}

/// Builds the product state from one normalized component per subsystem.
pub fn product_state(registry: &SystemRegistry, components: &[CVector]) -> Result<State> {
    if components.len() != registry.len() {
        return Err(Error::Usage(format!("expected {} components, got {}", registry.len(), components.len())));
    }
    let mut ket: Option<CVector> = None;
    for (c, s) in components.iter().zip(registry.systems()) {
        if c.dim() != s.dim {
            return Err(Error::Usage(format!("component for `{}` has dim {}, expected {}", s.label, c.dim(), s.dim)));
        }
        if (c.norm() - 1.0).abs() > 1e-8 {
            return Err(Error::Usage(format!("component for `{}` is not normalized", s.label)));
        }
        ket = Some(match ket {
            None => c.clone(),
            Some(k) => k.kron(c)?,
        });
    }
    let ket = ket.expect("registry is non-empty").normalized()?;
    State::pure(registry.clone(), ket)
}

/// Lifts `op` acting on `target` to the full registry space.
pub fn embed(op: &CMatrix, registry: &SystemRegistry, target: &str) -> Result<CMatrix> {
    embed_multi(op, registry, &[target])
}

/// Lifts `op` acting on the joint space of `targets` (in the listed order)
/// to the full registry space, as identity on every other subsystem.
pub fn embed_multi(op: &CMatrix, registry: &SystemRegistry, targets: &[&str]) -> Result<CMatrix> {
    if targets.is_empty() {
        return Err(Error::Usage("embedding needs at least one target".into()));
    }
    let mut positions = Vec::with_capacity(targets.len());
    for t in targets {
        let p = registry.index_of(t).ok_or_else(|| Error::Usage(format!("unknown subsystem `{t}`")))?;
        if positions.contains(&p) {
            return Err(Error::Usage(format!("subsystem `{t}` listed twice")));
        }
        positions.push(p);
    }
    let target_dims: Vec<usize> = positions.iter().map(|&p| registry.systems()[p].dim).collect();
    let side: usize = target_dims.iter().product();
    if !op.is_square() || op.rows() != side {
        return Err(Error::Usage(format!(
            "operator is {}x{}, target space has dimension {side}",
            op.rows(),
            op.cols()
        )));
    }
    let n = registry.total_dim();
    if n.checked_mul(n).is_none_or(|e| e > MAX_ENTRIES) {
        return Err(Error::Sizing(format!("embedded operator of side {n} too large")));
    }
    let digits: Vec<Vec<usize>> = (0..n).map(|g| registry.digits(g)).collect();
    let local = |d: &[usize]| positions.iter().zip(&target_dims).fold(0, |acc, (&p, &dim)| acc * dim + d[p]);
    let rest_equal =
        |a: &[usize], b: &[usize]| a.iter().zip(b).enumerate().all(|(k, (x, y))| positions.contains(&k) || x == y);

    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        let li = local(&digits[i]);
        for j in 0..n {
            if rest_equal(&digits[i], &digits[j]) {
                out[(i, j)] = op[(li, local(&digits[j]))];
            }
        }
    }
    Ok(out)
}

pub fn to_density(state: &State) -> State {
    match state.form() {
        StateForm::Pure(_) => State::mixed_unchecked(state.registry().clone(), state.density_matrix()),
        StateForm::Mixed(_) => state.clone(),
    }
}

/// A Hermitian operator on one or more declared subsystems, with one
/// outcome label per eigenvalue group.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    name: String,
    targets: Vec<Subsystem>,
    matrix: CMatrix,
    decomposition: SpectralDecomposition,
    labels: Vec<String>,
}

impl Observable {
    /// Labels are given per eigenvalue group in ascending eigenvalue order.
    pub fn new(
        name: impl Into<String>,
        targets: Vec<Subsystem>,
        matrix: CMatrix,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let name = name.into();
        if targets.is_empty() {
            return Err(Error::Usage(format!("observable `{name}` has no target")));
        }
        let side: usize = targets.iter().map(|t| t.dim).product();
        if !matrix.is_square() || matrix.rows() != side {
            return Err(Error::Usage(format!(
                "observable `{name}` matrix is {}x{}, target dimension is {side}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let herm = matrix.hermiticity_error();
        if herm > INVARIANT_TOL {
            return Err(Error::Contract(format!("observable `{name}` is not Hermitian ({herm:.3e})")));
        }
        let decomposition = tensor::spectral_decompose(&matrix, MERGE_TOL)?;
        let labels = match labels {
            Some(l) if l.len() == decomposition.len() => l,
            Some(l) => {
                return Err(Error::Configuration(format!(
                    "observable `{name}` has {} eigenvalue groups but {} labels",
                    decomposition.len(),
                    l.len()
                )))
            }
            None => decomposition.groups.iter().map(|g| eigenvalue_label(g.eigenvalue)).collect(),
        };
        Ok(Self { name, targets, matrix, decomposition, labels })
    }

    /// S_z = diag(+1/2, −1/2) with labels ↑ / ↓.
    pub fn spin_z(name: impl Into<String>, target: impl Into<String>) -> Self {
        let m = CMatrix::from_real(2, 2, &[0.5, 0.0, 0.0, -0.5]).expect("2x2");
        Self::new(name, vec![Subsystem::new(target, 2)], m, Some(vec!["↓".into(), "↑".into()]))
            .expect("spin-z is Hermitian")
    }

    /// Pointer-basis reading of an apparatus of dimension `dim`: eigenvalue k
    /// on basis vector k, labeled Φk.
    pub fn pointer(name: impl Into<String>, target: impl Into<String>, dim: usize) -> Self {
        let diag: Vec<C64> = (0..dim).map(|k| C64::new(k as f64, 0.0)).collect();
        let labels = (0..dim).map(|k| format!("Φ{k}")).collect();
        Self::new(name, vec![Subsystem::new(target, dim)], CMatrix::from_diag(&diag), Some(labels))
            .expect("diagonal matrix is Hermitian")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn targets(&self) -> &[Subsystem] {
        &self.targets
    }

    pub fn target_labels(&self) -> Vec<&str> {
        self.targets.iter().map(|t| t.label.as_str()).collect()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomposition
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn group_of_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Whether every target exists in `registry` with a matching dimension.
    pub fn fits(&self, registry: &SystemRegistry) -> bool {
        self.targets.iter().all(|t| registry.get(&t.label).map(|s| s.dim == t.dim).unwrap_or(false))
    }

    pub fn check_fits(&self, registry: &SystemRegistry) -> Result<()> {
        if self.fits(registry) {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "observable `{}` on {:?} is not compatible with registry {registry}",
                self.name,
                self.target_labels()
            )))
        }
    }

    pub fn embedded(&self, registry: &SystemRegistry) -> Result<CMatrix> {
        self.check_fits(registry)?;
        embed_multi(&self.matrix, registry, &self.target_labels())
    }

    /// Spectral projectors lifted to `registry`, ascending eigenvalue order.
    pub fn embedded_projectors(&self, registry: &SystemRegistry) -> Result<Vec<CMatrix>> {
        self.check_fits(registry)?;
        let targets = self.target_labels();
        self.decomposition.groups.iter().map(|g| embed_multi(&g.projector, registry, &targets)).collect()
    }

    /// Whether the two observables commute (same targets required).
    pub fn commutes_with(&self, other: &Observable) -> bool {
        if self.targets != other.targets {
            return true;
        }
        let ab = self.matrix.matmul(&other.matrix).expect("same side");
        let ba = other.matrix.matmul(&self.matrix).expect("same side");
        ab.max_abs_diff(&ba) <= INVARIANT_TOL
    }
}

pub(crate) fn eigenvalue_label(value: f64) -> String {
    let v = if value.abs() < 1e-12 { 0.0 } else { value };
    format!("{v:+.6}")
}

/// tr(ρ·O) for an observable lifted to the state's registry.
pub fn expectation(state: &State, obs: &Observable) -> Result<f64> {
    let op = obs.embedded(state.registry())?;
    let value = match state.form() {
        StateForm::Pure(v) => v.inner(&op.apply(v)?),
        StateForm::Mixed(rho) => op.matmul(rho)?.trace(),
    };
    if value.im.abs() > INVARIANT_TOL {
        return Err(Error::Contract(format!("expectation has imaginary part {}", value.im)));
    }
    Ok(value.re)
}
