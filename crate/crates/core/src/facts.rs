//! Collapse vs unitary probabilities, stability of facts across observers,
//! and decoherence through an environment subsystem.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::perspectives::{FactRecord, PerspectiveLedger};
use crate::qstate::{embed_multi, Observable, State, StateForm};
use crate::tensor::{CMatrix, CVector, INVARIANT_TOL};

/// Default cutoff below which a stability deviation counts as zero.
pub const DEFAULT_THRESHOLD: f64 = 1e-6;

/// Branches whose probability falls below this contribute nothing to the
/// composed probability.
pub const NULL_BRANCH: f64 = 1e-14;

/// Amplitudes W(bᵢ, a) and W(c, bᵢ) through N intermediate alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeChain {
    w_ba: Vec<C64>,
    w_cb: Vec<C64>,
}

impl AmplitudeChain {
    pub fn new(w_ba: Vec<C64>, w_cb: Vec<C64>) -> Result<Self> {
        if w_ba.is_empty() || w_ba.len() != w_cb.len() {
            return Err(Error::Usage(format!(
                "chain needs equal non-empty amplitude lists (got {} and {})",
                w_ba.len(),
                w_cb.len()
            )));
        }
        if w_ba.iter().chain(&w_cb).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Usage("chain amplitudes must be finite".into()));
        }
        let weight: f64 = w_ba.iter().map(|z| z.norm_sqr()).sum();
        if weight > 1.0 + INVARIANT_TOL {
            return Err(Error::Contract(format!("Σ|W(bᵢ,a)|² = {weight} exceeds 1")));
        }
        Ok(Self { w_ba, w_cb })
    }

    pub fn from_real(w_ba: &[f64], w_cb: &[f64]) -> Result<Self> {
        let c = |v: &[f64]| v.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::new(c(w_ba), c(w_cb))
    }

    pub fn len(&self) -> usize {
        self.w_ba.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w_ba.is_empty()
    }

    pub fn w_ba(&self) -> &[C64] {
        &self.w_ba
    }

    pub fn w_cb(&self) -> &[C64] {
        &self.w_cb
    }

    fn paths(&self) -> impl Iterator<Item = C64> + '_ {
        self.w_cb.iter().zip(&self.w_ba).map(|(cb, ba)| cb * ba)
    }
}

/// Σᵢ |W(c,bᵢ)|²·|W(bᵢ,a)|²
pub fn p_collapse(chain: &AmplitudeChain) -> f64 {
    chain.paths().map(|z| z.norm_sqr()).sum()
}

/// |Σᵢ W(c,bᵢ)·W(bᵢ,a)|²
pub fn p_unitary(chain: &AmplitudeChain) -> f64 {
    chain.paths().sum::<C64>().norm_sqr()
}

pub fn interference_deficit(chain: &AmplitudeChain) -> f64 {
    (p_unitary(chain) - p_collapse(chain)).abs()
}

/// Mutually exclusive alternatives aᵢ and a further fact b, as projectors on
/// one state space.
#[derive(Debug, Clone, PartialEq)]
pub struct FactPartition {
    projectors: Vec<CMatrix>,
    target: CMatrix,
}

impl FactPartition {
    pub fn new(projectors: Vec<CMatrix>, target: CMatrix) -> Result<Self> {
        let Some(first) = projectors.first() else {
            return Err(Error::Contract("partition has no alternatives".into()));
        };
        let n = first.rows();
        if projectors.iter().any(|p| !p.is_square() || p.rows() != n) || !target.is_square() || target.rows() != n {
            return Err(Error::Usage("partition projectors must share one square shape".into()));
        }
        let mut sum = CMatrix::zeros(n, n);
        for (i, p) in projectors.iter().enumerate() {
            if !p.is_hermitian(INVARIANT_TOL) || p.matmul(p)?.max_abs_diff(p) > INVARIANT_TOL {
                return Err(Error::Contract(format!("alternative {i} is not an orthogonal projector")));
            }
            for q in &projectors[..i] {
                if p.matmul(q)?.max_abs() > INVARIANT_TOL {
                    return Err(Error::Contract("partition projectors are not mutually orthogonal".into()));
                }
            }
            sum = sum.add(p)?;
        }
        if sum.max_abs_diff(&CMatrix::identity(n)) > INVARIANT_TOL {
            return Err(Error::Contract("partition projectors do not sum to the identity".into()));
        }
        if !target.is_hermitian(INVARIANT_TOL) || target.matmul(&target)?.max_abs_diff(&target) > INVARIANT_TOL {
            return Err(Error::Contract("target fact is not an orthogonal projector".into()));
        }
        Ok(Self { projectors, target })
    }

    /// Partition from the spectral projectors of `partition`, target from the
    /// greatest-eigenvalue projector of `target`, both lifted to `registry`.
    pub fn from_observables(
        partition: &Observable,
        target: &Observable,
        registry: &crate::qstate::SystemRegistry,
    ) -> Result<Self> {
        let projectors = partition.embedded_projectors(registry)?;
        let top = target.decomposition().groups.last().expect("non-empty spectrum");
        let lifted = embed_multi(&top.projector, registry, &target.target_labels())?;
        Self::new(projectors, lifted)
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    pub fn target(&self) -> &CMatrix {
        &self.target
    }

    pub fn dim(&self) -> usize {
        self.target.rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub p_direct: f64,
    pub p_composed: f64,
    pub deviation: f64,
    pub stable: bool,
}

/// Compares P(b) = tr(Bρ) with Σᵢ P(b|aᵢ)P(aᵢ) = Σᵢ tr(B Aᵢ ρ Aᵢ).
pub fn stability_deviation(state: &State, partition: &FactPartition, threshold: f64) -> Result<StabilityReport> {
    let n = state.registry().total_dim();
    if partition.dim() != n {
        return Err(Error::Usage(format!("partition acts on dimension {}, state on {n}", partition.dim())));
    }
    let rho = state.density_matrix();
    let b = partition.target();
    let p_direct = b.matmul(&rho)?.trace().re;
    let mut p_composed = 0.0;
    for a in partition.projectors() {
        let weight = a.matmul(&rho)?.trace().re;
        if weight < NULL_BRANCH {
            continue;
        }
        p_composed += b.matmul(a)?.matmul(&rho)?.matmul(a)?.trace().re;
    }
    let deviation = (p_direct - p_composed).abs();
    Ok(StabilityReport { p_direct, p_composed, deviation, stable: deviation <= threshold })
}

/// ‖ρ − Σᵢ AᵢρAᵢ‖_F: the coherence between partition branches.
pub fn interference_witness(state: &State, projectors: &[CMatrix]) -> Result<f64> {
    let rho = state.density_matrix();
    let mut dephased = CMatrix::zeros(rho.rows(), rho.cols());
    for a in projectors {
        dephased = dephased.add(&a.matmul(&rho)?.matmul(a)?)?;
    }
    Ok(rho.sub(&dephased)?.frobenius_norm())
}

/// Expresses a pure state, a partition and a target ket as an amplitude
/// chain: W(bᵢ,a) = ‖Aᵢψ‖ and W(c,bᵢ) = ⟨t|Aᵢψ⟩/‖Aᵢψ‖.
pub fn chain_from_state(ket: &CVector, projectors: &[CMatrix], target: &CVector) -> Result<AmplitudeChain> {
    let mut w_ba = Vec::with_capacity(projectors.len());
    let mut w_cb = Vec::with_capacity(projectors.len());
    for a in projectors {
        let branch = a.apply(ket)?;
        let weight = branch.norm();
        if weight < NULL_BRANCH {
            w_ba.push(C64::new(0.0, 0.0));
            w_cb.push(C64::new(0.0, 0.0));
            continue;
        }
        w_ba.push(C64::new(weight, 0.0));
        w_cb.push(target.inner(&branch) / weight);
    }
    AmplitudeChain::new(w_ba, w_cb)
}

/// Environment vectors with pairwise overlap `eta`, one per branch, living in
/// the first `branches` coordinates of an environment of dimension `env_dim`.
///
/// The vectors are the rows of a Cholesky factor of the Gram matrix
/// (1−η)·I + η·J, so the first vector is always |0⟩.
pub fn overlap_family(branches: usize, eta: f64, env_dim: usize) -> Result<Vec<CVector>> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Usage(format!("overlap {eta} must lie in [0, 1]")));
    }
    if branches == 0 {
        return Err(Error::Usage("need at least one branch".into()));
    }
    let needed = if eta >= 1.0 { 1 } else { branches };
    if env_dim < needed {
        return Err(Error::Sizing(format!(
            "environment of dim {env_dim} cannot hold {branches} branches with overlap {eta}"
        )));
    }
    let gram = |i: usize, j: usize| if i == j { 1.0 } else { eta };
    let mut l = vec![vec![0.0f64; branches]; branches];
    for i in 0..branches {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (gram(i, i) - s).max(0.0).sqrt();
            } else if l[j][j] > 1e-12 {
                l[i][j] = (gram(i, j) - s) / l[j][j];
            }
        }
    }
    l.into_iter()
        .map(|row| {
            let mut data = vec![C64::new(0.0, 0.0); env_dim];
            for (k, x) in row.into_iter().enumerate().filter(|&(_, x)| x != 0.0) {
                data[k] = C64::new(x, 0.0);
            }
            CVector::new(data).map_err(Error::from)?.normalized().map_err(Error::from)
        })
        .collect()
}

/// Correlates basis state i of `target` with `env_vectors[i]`:
/// |i⟩⊗|0⟩_E ↦ |i⟩⊗|Eᵢ⟩.
pub fn decohere(state: &State, target: &str, env: &str, env_vectors: &[CVector]) -> Result<State> {
    let registry = state.registry();
    let t = registry.get(target)?.clone();
    let e = registry.get(env)?.clone();
    if t.label == e.label {
        return Err(Error::Usage("target and environment must differ".into()));
    }
    if env_vectors.len() != t.dim {
        return Err(Error::Usage(format!(
            "`{target}` has {} branches but {} environment vectors were given",
            t.dim,
            env_vectors.len()
        )));
    }
    for (i, v) in env_vectors.iter().enumerate() {
        if v.dim() != e.dim {
            return Err(Error::Usage(format!("environment vector {i} has dim {}, expected {}", v.dim(), e.dim)));
        }
        if (v.norm() - 1.0).abs() > 1e-8 {
            return Err(Error::Usage(format!("environment vector {i} is not normalized")));
        }
    }
    let ground = CMatrix::outer(&CVector::basis(e.dim, 0), &CVector::basis(e.dim, 0));
    let lifted_ground = embed_multi(&ground, registry, &[env])?;
    let population = match state.form() {
        StateForm::Pure(v) => lifted_ground.apply(v)?.norm().powi(2),
        StateForm::Mixed(rho) => lifted_ground.matmul(rho)?.trace().re,
    };
    if population < 1.0 - INVARIANT_TOL {
        return Err(Error::Precondition(format!(
            "environment `{env}` is not in its ready state (population {population})"
        )));
    }

    let side = t.dim * e.dim;
    let mut local = CMatrix::zeros(side, side);
    let zero = CVector::basis(e.dim, 0);
    for (i, v) in env_vectors.iter().enumerate() {
        let branch = CMatrix::outer(&CVector::basis(t.dim, i), &CVector::basis(t.dim, i));
        local = local.add(&crate::tensor::kron(&branch, &CMatrix::outer(v, &zero))?)?;
    }
    let op = embed_multi(&local, registry, &[target, env])?;
    let out = state.transformed(&op)?;
    let err = out.invariant_error();
    if err > INVARIANT_TOL {
        return Err(Error::Contract(format!("decoherence broke normalization ({err:.3e})")));
    }
    Ok(out)
}

/// State an observer uses for stability questions: subsystems in `ignore`
/// are traced out unless an observable in `keep_for` acts on them.
pub fn accessible_state(state: &State, ignore: &[&str], keep_for: &[&Observable]) -> Result<State> {
    let needed: Vec<&str> = keep_for.iter().flat_map(|o| o.target_labels()).collect();
    let keep: Vec<&str> = state
        .registry()
        .systems()
        .iter()
        .map(|s| s.label.as_str())
        .filter(|l| !ignore.contains(l) || needed.contains(l))
        .collect();
    if keep.is_empty() {
        return Err(Error::Usage("nothing left after tracing out the environment".into()));
    }
    state.reduced(&keep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactClass {
    /// In the observer's own log, and stable for it.
    RelativeStable,
    /// In the log but the composition law fails for this observer.
    Relative,
    /// Not in the log, yet usable through the composition law.
    Stable,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactStanding {
    pub class: FactClass,
    /// None when the observer's registry cannot host the partition.
    pub report: Option<StabilityReport>,
    /// Some alternative carries non-negligible weight, so Σᵢ P(b|aᵢ)P(aᵢ) is defined.
    pub well_defined: bool,
}

/// Classifies `fact` for every ledger.
///
/// Relative means a record with the same system, observable and outcome sits
/// in that observer's log. Stable means the composition law holds within
/// `threshold` on the observer's accessible state (subsystems in `ignore`
/// traced out); an observer whose registry cannot host the partition but
/// holds the fact is stable post-collapse.
pub fn classify_fact(
    fact: &FactRecord,
    ledgers: &[&PerspectiveLedger],
    partition: &Observable,
    target: &Observable,
    ignore: &[&str],
    threshold: f64,
) -> Result<BTreeMap<String, FactStanding>> {
    let mut out = BTreeMap::new();
    for ledger in ledgers {
        let relative = ledger
            .facts()
            .iter()
            .any(|f| f.system == fact.system && f.observable == fact.observable && f.outcome == fact.outcome);
        let state = accessible_state(ledger.state(), ignore, &[partition, target])?;
        let standing = if partition.fits(state.registry()) && target.fits(state.registry()) {
            let fp = FactPartition::from_observables(partition, target, state.registry())?;
            let report = stability_deviation(&state, &fp, threshold)?;
            let rho = state.density_matrix();
            let mut well_defined = false;
            for a in fp.projectors() {
                well_defined |= a.matmul(&rho)?.trace().re >= NULL_BRANCH;
            }
            let stable = report.stable && well_defined;
            let class = match (relative, stable) {
                (true, true) => FactClass::RelativeStable,
                (true, false) => FactClass::Relative,
                (false, true) => FactClass::Stable,
                (false, false) => FactClass::Neither,
            };
            FactStanding { class, report: Some(report), well_defined }
        } else if relative {
            FactStanding { class: FactClass::RelativeStable, report: None, well_defined: true }
        } else {
            FactStanding { class: FactClass::Neither, report: None, well_defined: false }
        };
        out.insert(ledger.observer().to_string(), standing);
    }
    Ok(out)
}
