//! Observer-relative states and facts.
//!
//! Each observer holds its own [`PerspectiveLedger`]: the state it assigns to
//! everything it describes (never itself) and the ordered log of facts that
//! happened relative to it. Measurements collapse only the measuring
//! observer's ledger; other observers describe the same interactions
//! unitarily through [`unitary_view`].

use num_complex::Complex64 as C64;
use rand_core::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::facts;
use crate::qstate::{embed_multi, Observable, State, StateForm, Subsystem};
use crate::rng;
use crate::tensor::{CMatrix, CVector, INVARIANT_TOL};

/// Probabilities below this are treated as exactly zero when sampling.
pub const NULL_PROBABILITY: f64 = 1e-12;

/// One outcome that happened relative to one observer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactRecord {
    pub observer: String,
    pub system: String,
    pub observable: String,
    pub outcome: String,
    pub eigenvalue: f64,
    pub probability: f64,
    pub step: u64,
    /// Uniform variate that selected the outcome.
    pub draw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerspectiveLedger {
    observer: String,
    state: State,
    facts: Vec<FactRecord>,
    rng_seed: u64,
}

impl PerspectiveLedger {
    pub fn new(observer: impl Into<String>, state: State, rng_seed: u64) -> Result<Self> {
        let observer = observer.into();
        if state.registry().contains(&observer) {
            return Err(Error::Usage(format!("observer `{observer}` cannot be part of the state it describes")));
        }
        Ok(Self { observer, state, facts: Vec::new(), rng_seed })
    }

    pub fn observer(&self) -> &str {
        &self.observer
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn facts(&self) -> &[FactRecord] {
        &self.facts
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Whether a fact about any of `systems` is already in the log.
    pub fn has_interacted_with(&self, systems: &[&str]) -> bool {
        self.facts.iter().any(|f| f.system.split('+').any(|s| systems.contains(&s)))
    }

    fn with_state(&self, state: State) -> Self {
        Self { state, ..self.clone() }
    }
}

/// Born probability of every eigenvalue group, ascending eigenvalue order.
pub fn born_probabilities(state: &State, obs: &Observable) -> Result<Vec<f64>> {
    let projectors = obs.embedded_projectors(state.registry())?;
    projectors
        .iter()
        .map(|p| {
            let value = match state.form() {
                StateForm::Pure(v) => C64::new(p.apply(v)?.norm().powi(2), 0.0),
                StateForm::Mixed(rho) => p.matmul(rho)?.trace(),
            };
            Ok(value.re.max(0.0))
        })
        .collect()
}

/// Inverse-CDF selection over groups in ascending order, skipping null groups.
pub(crate) fn select_outcome(probs: &[f64], u: f64) -> Result<usize> {
    let live: Vec<(usize, f64)> = probs.iter().copied().enumerate().filter(|&(_, p)| p >= NULL_PROBABILITY).collect();
    let total: f64 = live.iter().map(|&(_, p)| p).sum();
    let Some(&(last, _)) = live.last() else {
        return Err(Error::DegenerateMeasurement);
    };
    let target = u * total;
    let mut cumulative = 0.0;
    for &(i, p) in &live {
        cumulative += p;
        if target < cumulative {
            return Ok(i);
        }
    }
    Ok(last)
}

/// Measures `obs` with a caller-supplied uniform variate in [0, 1).
pub fn measure_with_draw(
    ledger: &PerspectiveLedger,
    obs: &Observable,
    u: f64,
) -> Result<(PerspectiveLedger, FactRecord)> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::Usage(format!("draw {u} is outside [0, 1)")));
    }
    let registry = ledger.state.registry();
    let probs = born_probabilities(&ledger.state, obs)?;
    let k = select_outcome(&probs, u)?;
    let p = probs[k];
    let projector = &obs.embedded_projectors(registry)?[k];
    let post = match ledger.state.form() {
        StateForm::Pure(v) => State::pure_renormalized(registry.clone(), projector.apply(v)?)?,
        StateForm::Mixed(rho) => {
            let collapsed = projector.matmul(rho)?.matmul(projector)?.scale(C64::new(1.0 / p, 0.0));
            State::mixed_unchecked(registry.clone(), collapsed)
        }
    };
    let record = FactRecord {
        observer: ledger.observer.clone(),
        system: obs.target_labels().join("+"),
        observable: obs.name().to_string(),
        outcome: obs.labels()[k].clone(),
        eigenvalue: obs.decomposition().groups[k].eigenvalue,
        probability: p.min(1.0),
        step: ledger.facts.len() as u64,
        draw: u,
    };
    let mut next = ledger.with_state(post);
    next.facts.push(record.clone());
    Ok((next, record))
}

/// Observer-relative collapse: samples an outcome with its Born weight,
/// projects the ledger's state and logs the fact.
pub fn measure<R: RngCore + ?Sized>(
    ledger: &PerspectiveLedger,
    obs: &Observable,
    rng: &mut R,
) -> Result<(PerspectiveLedger, FactRecord)> {
    obs.check_fits(ledger.state.registry())?;
    measure_with_draw(ledger, obs, rng::uniform(rng))
}

/// Apparatus basis index assigned to each eigenvalue group (ascending group
/// order). Groups take the non-ready indices in descending-eigenvalue order,
/// so the largest eigenvalue lands on the first non-ready pointer state.
pub fn pointer_indices(groups: usize, apparatus_dim: usize, ready: usize) -> Result<Vec<usize>> {
    if ready >= apparatus_dim {
        return Err(Error::Usage(format!("ready index {ready} out of range for apparatus of dim {apparatus_dim}")));
    }
    if apparatus_dim < groups + 1 {
        return Err(Error::Sizing(format!(
            "apparatus of dim {apparatus_dim} cannot record {groups} outcomes plus a ready state"
        )));
    }
    let free: Vec<usize> = (0..apparatus_dim).filter(|&k| k != ready).collect();
    Ok((0..groups).map(|g| free[groups - 1 - g]).collect())
}

/// The isometry Σᵢ Pᵢ ⊗ |pointerᵢ⟩⟨ready| lifted to `registry`.
fn premeasure_operator(
    registry: &crate::qstate::SystemRegistry,
    system: &str,
    apparatus: &Subsystem,
    obs: &Observable,
    ready: usize,
) -> Result<CMatrix> {
    let pointers = pointer_indices(obs.decomposition().len(), apparatus.dim, ready)?;
    let ready_ket = CVector::basis(apparatus.dim, ready);
    let mut local = CMatrix::zeros(obs.matrix().rows() * apparatus.dim, obs.matrix().rows() * apparatus.dim);
    for (group, &ptr) in obs.decomposition().groups.iter().zip(&pointers) {
        let shift = CMatrix::outer(&CVector::basis(apparatus.dim, ptr), &ready_ket);
        local = local.add(&crate::tensor::kron(&group.projector, &shift)?)?;
    }
    embed_multi(&local, registry, &[system, &apparatus.label])
}

/// Probability that `label` has basis index `index` in `state`.
fn basis_population(state: &State, label: &str, index: usize) -> Result<f64> {
    let sub = state.registry().get(label)?;
    let proj = CMatrix::outer(&CVector::basis(sub.dim, index), &CVector::basis(sub.dim, index));
    let lifted = embed_multi(&proj, state.registry(), &[label])?;
    Ok(match state.form() {
        StateForm::Pure(v) => lifted.apply(v)?.norm().powi(2),
        StateForm::Mixed(rho) => lifted.matmul(rho)?.trace().re,
    })
}

/// von Neumann pre-measurement: correlates each eigenbranch of `obs` on
/// `system` with a distinct pointer state of `apparatus`.
pub fn premeasure(state: &State, system: &str, apparatus: &str, obs: &Observable, ready_index: usize) -> Result<State> {
    let registry = state.registry();
    if obs.target_labels() != [system] {
        return Err(Error::Usage(format!("observable `{}` does not act on `{system}`", obs.name())));
    }
    obs.check_fits(registry)?;
    if system == apparatus {
        return Err(Error::Usage("system and apparatus must differ".into()));
    }
    let app = registry.get(apparatus)?.clone();
    pointer_indices(obs.decomposition().len(), app.dim, ready_index)?;
    let ready_population = basis_population(state, apparatus, ready_index)?;
    if ready_population < 1.0 - INVARIANT_TOL {
        return Err(Error::Precondition(format!(
            "apparatus `{apparatus}` is not in its ready state (population {ready_population})"
        )));
    }
    let op = premeasure_operator(registry, system, &app, obs, ready_index)?;
    let out = state.transformed(&op)?;
    check_norm(&out)?;
    Ok(out)
}

fn check_norm(state: &State) -> Result<()> {
    let err = state.invariant_error();
    if err > INVARIANT_TOL {
        return Err(Error::Contract(format!("state left the unit sphere (error {err:.3e})")));
    }
    Ok(())
}

/// Observable reading the pointer basis that [`premeasure`] writes to.
///
/// Each pointer state carries the eigenvalue and outcome label of the group
/// it records; the ready state is labeled `ready` and sits below every
/// recorded eigenvalue, unused pointer states above them.
pub fn pointer_observable(
    name: impl Into<String>,
    apparatus: &Subsystem,
    ready: usize,
    obs: &Observable,
) -> Result<Observable> {
    let groups = &obs.decomposition().groups;
    let pointers = pointer_indices(groups.len(), apparatus.dim, ready)?;
    let lo = groups.first().map(|g| g.eigenvalue).unwrap_or(0.0);
    let hi = groups.last().map(|g| g.eigenvalue).unwrap_or(0.0);
    let mut diag = vec![None; apparatus.dim];
    diag[ready] = Some(lo - 1.0);
    for (g, &ptr) in groups.iter().zip(&pointers) {
        diag[ptr] = Some(g.eigenvalue);
    }
    let mut labels = vec!["ready".to_string()];
    labels.extend(obs.labels().iter().cloned());
    let mut extra = 0.0;
    for (k, slot) in diag.iter_mut().enumerate() {
        if slot.is_none() {
            extra += 1.0;
            *slot = Some(hi + extra);
            labels.push(format!("Φ{k}"));
        }
    }
    let diag: Vec<C64> = diag.into_iter().map(|x| C64::new(x.expect("filled"), 0.0)).collect();
    Observable::new(name, vec![apparatus.clone()], CMatrix::from_diag(&diag), Some(labels))
}

/// One discrete evolution step applied without collapse.
#[derive(Debug, Clone, PartialEq)]
pub enum EvolutionStep {
    Unitary { targets: Vec<String>, matrix: CMatrix },
    Premeasure { system: String, apparatus: String, observable: Observable, ready: usize },
    Decohere { target: String, env: String, vectors: Vec<CVector> },
}

impl EvolutionStep {
    pub fn systems(&self) -> Vec<&str> {
        match self {
            EvolutionStep::Unitary { targets, .. } => targets.iter().map(String::as_str).collect(),
            EvolutionStep::Premeasure { system, apparatus, .. } => vec![system, apparatus],
            EvolutionStep::Decohere { target, env, .. } => vec![target, env],
        }
    }
}

/// Evolves the ledger's state through `steps` purely unitarily: no collapse
/// and no facts are logged.
pub fn unitary_view(ledger: &PerspectiveLedger, steps: &[EvolutionStep]) -> Result<PerspectiveLedger> {
    evolve(ledger, steps, true)
}

/// Applies `steps` to the ledger's state. With `fresh` set, steps touching a
/// subsystem the observer already holds facts about are rejected.
pub(crate) fn evolve(ledger: &PerspectiveLedger, steps: &[EvolutionStep], fresh: bool) -> Result<PerspectiveLedger> {
    let mut state = ledger.state.clone();
    for step in steps {
        let systems = step.systems();
        if let Some(missing) = systems.iter().find(|s| !state.registry().contains(s)) {
            return Err(Error::Usage(format!(
                "observer `{}` does not describe subsystem `{missing}`",
                ledger.observer
            )));
        }
        if fresh && ledger.has_interacted_with(&systems) {
            return Err(Error::Precondition(format!(
                "observer `{}` already holds facts about {systems:?}",
                ledger.observer
            )));
        }
        state = match step {
            EvolutionStep::Unitary { targets, matrix } => {
                let id = CMatrix::identity(matrix.rows());
                let uu = matrix.matmul(&crate::tensor::dagger(matrix))?;
                if uu.max_abs_diff(&id) > INVARIANT_TOL {
                    return Err(Error::Contract("evolution operator is not unitary".into()));
                }
                let targets: Vec<&str> = targets.iter().map(String::as_str).collect();
                state.transformed(&embed_multi(matrix, state.registry(), &targets)?)?
            }
            EvolutionStep::Premeasure { system, apparatus, observable, ready } => {
                premeasure(&state, system, apparatus, observable, *ready)?
            }
            EvolutionStep::Decohere { target, env, vectors } => facts::decohere(&state, target, env, vectors)?,
        };
        check_norm(&state)?;
    }
    Ok(ledger.with_state(state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossCheckStatus {
    Agree,
    Disagree,
    /// The friend measured an incompatible observable after the checked fact.
    InformationDestroyed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub status: CrossCheckStatus,
    pub friend_fact: FactRecord,
    pub pointer_fact: Option<FactRecord>,
    pub system_fact: Option<FactRecord>,
}

impl CrossCheck {
    pub fn agreement(&self) -> bool {
        self.status == CrossCheckStatus::Agree
    }

    pub fn information_destroyed(friend_fact: FactRecord) -> Self {
        Self { status: CrossCheckStatus::InformationDestroyed, friend_fact, pointer_fact: None, system_fact: None }
    }
}

/// W checks the friend's reading.
///
/// W first reads `pointer_obs` on its own state. The pointer reading is the
/// same physical record that produced the friend's fact, so it is resolved
/// with the friend's uniform variate against W's Born weights; it matches the
/// friend's outcome exactly when W's pointer branches carry the friend's
/// weights. If `system_obs` is given, W then measures the friend's system in
/// the friend's basis with its own stream.
pub fn cross_check<R: RngCore + ?Sized>(
    wigner: &PerspectiveLedger,
    friend_fact: &FactRecord,
    pointer_obs: &Observable,
    system_obs: Option<&Observable>,
    rng: &mut R,
) -> Result<(PerspectiveLedger, CrossCheck)> {
    if pointer_obs.group_of_label(&friend_fact.outcome).is_none() {
        return Err(Error::Configuration(format!(
            "pointer observable `{}` has no outcome labeled `{}`",
            pointer_obs.name(),
            friend_fact.outcome
        )));
    }
    if let Some(sys) = system_obs {
        if sys.group_of_label(&friend_fact.outcome).is_none() {
            return Err(Error::Configuration(format!(
                "observable `{}` has no outcome labeled `{}`",
                sys.name(),
                friend_fact.outcome
            )));
        }
    }
    pointer_obs.check_fits(wigner.state.registry())?;
    let (ledger, pointer_fact) = measure_with_draw(wigner, pointer_obs, friend_fact.draw)?;
    let (ledger, system_fact) = match system_obs {
        Some(sys) => {
            let (l, f) = measure(&ledger, sys, rng)?;
            (l, Some(f))
        }
        None => (ledger, None),
    };
    let agree = pointer_fact.outcome == friend_fact.outcome
        && system_fact.as_ref().is_none_or(|f| f.outcome == friend_fact.outcome);
    let status = if agree { CrossCheckStatus::Agree } else { CrossCheckStatus::Disagree };
    Ok((ledger, CrossCheck { status, friend_fact: friend_fact.clone(), pointer_fact: Some(pointer_fact), system_fact }))
}

/// Exact probability that the pointer reading and the system reading carry
/// the same label: Σ_ℓ tr((P_ℓ ⊗ Q_ℓ) ρ).
pub fn correlation_probability(state: &State, pointer_obs: &Observable, system_obs: &Observable) -> Result<f64> {
    let registry = state.registry();
    let pointer_proj = pointer_obs.embedded_projectors(registry)?;
    let system_proj = system_obs.embedded_projectors(registry)?;
    let rho = state.density_matrix();
    let mut total = 0.0;
    for (k, label) in system_obs.labels().iter().enumerate() {
        if let Some(j) = pointer_obs.group_of_label(label) {
            total += pointer_proj[j].matmul(&system_proj[k])?.matmul(&rho)?.trace().re;
        }
    }
    Ok(total)
}
