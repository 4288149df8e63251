use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use super::ast::*;
use super::error::RuntimeError;
use crate::error::Error;
use crate::facts::{self, FactPartition, StabilityReport, DEFAULT_THRESHOLD};
use crate::perspectives::{self, CrossCheck, EvolutionStep, FactRecord, PerspectiveLedger};
use crate::qstate::{product_state, Observable, Subsystem, SystemRegistry};
use crate::rng::{derive_seed, SplitMix64};
use crate::tensor::{CMatrix, CVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Replaces the scenario's own `seed` statement when set.
    pub seed: Option<u64>,
    pub threshold: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed: None, threshold: DEFAULT_THRESHOLD }
    }
}

/// What one step produced.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum StepOutcome {
    Premeasure { line: usize, system: String, apparatus: String, observable: String },
    Measure { line: usize, fact: FactRecord },
    UnitaryView { line: usize, observer: String, applied: usize },
    Decohere { line: usize, target: String, env: String, overlap: f64 },
    StabilityCheck(StabilityCheckOutcome),
    CrossCheck(CrossCheckOutcome),
}

impl StepOutcome {
    pub fn line(&self) -> usize {
        match self {
            StepOutcome::Premeasure { line, .. }
            | StepOutcome::Measure { line, .. }
            | StepOutcome::UnitaryView { line, .. }
            | StepOutcome::Decohere { line, .. } => *line,
            StepOutcome::StabilityCheck(s) => s.line,
            StepOutcome::CrossCheck(c) => c.line,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCheckOutcome {
    pub line: usize,
    pub observer: String,
    pub partition: String,
    pub target: String,
    pub report: StabilityReport,
    /// Coherence between partition branches in the checked state.
    pub witness: f64,
    /// The observer's ledger as it stood at the check.
    pub ledger: PerspectiveLedger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheckOutcome {
    pub line: usize,
    pub observer: String,
    pub friend: String,
    pub check: CrossCheck,
    /// Exact probability that pointer and system readings agree, computed
    /// on the checking observer's state before it measured.
    pub correlation: Option<f64>,
}

/// A pointer reading that some premeasure step wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerRecord {
    pub system: String,
    pub apparatus: String,
    pub observable: Observable,
    pub pointer: Observable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub name: Option<String>,
    pub seed: u64,
    pub threshold: f64,
    pub registry: SystemRegistry,
    pub environments: Vec<String>,
    /// One ledger per observer, in declaration order.
    pub ledgers: Vec<PerspectiveLedger>,
    pub outcomes: Vec<StepOutcome>,
    pub pointers: Vec<PointerRecord>,
}

impl ScenarioResult {
    pub fn ledger(&self, observer: &str) -> Option<&PerspectiveLedger> {
        self.ledgers.iter().find(|l| l.observer() == observer)
    }

    pub fn stability_checks(&self) -> impl Iterator<Item = &StabilityCheckOutcome> {
        self.outcomes.iter().filter_map(|o| match o {
            StepOutcome::StabilityCheck(s) => Some(s),
            _ => None,
        })
    }

    pub fn cross_checks(&self) -> impl Iterator<Item = &CrossCheckOutcome> {
        self.outcomes.iter().filter_map(|o| match o {
            StepOutcome::CrossCheck(c) => Some(c),
            _ => None,
        })
    }
}

struct Observer {
    ledger: PerspectiveLedger,
    rng: SplitMix64,
    /// Index of the first interaction event not yet reflected in the ledger.
    cursor: usize,
}

struct Machine {
    registry: SystemRegistry,
    apparatus_ready: BTreeMap<String, usize>,
    environments: Vec<String>,
    observables: BTreeMap<String, Observable>,
    observers: Vec<Observer>,
    events: Vec<EvolutionStep>,
    pointers: Vec<PointerRecord>,
    threshold: f64,
}

/// Executes the steps of a parsed scenario in order.
pub fn interpret(ast: &ScenarioAst, options: &RunOptions) -> Result<ScenarioResult, RuntimeError> {
    let seed = options.seed.or(ast.seed).unwrap_or(0);
    let mut machine = Machine::build(ast, seed, options.threshold)?;
    let mut outcomes = Vec::with_capacity(ast.steps.len());
    for step in &ast.steps {
        let outcome = machine.step(step).map_err(RuntimeError::at(step.line))?;
        outcomes.push(outcome);
    }
    Ok(ScenarioResult {
        name: ast.name.clone(),
        seed,
        threshold: options.threshold,
        registry: machine.registry,
        environments: machine.environments,
        ledgers: machine.observers.into_iter().map(|o| o.ledger).collect(),
        outcomes,
        pointers: machine.pointers,
    })
}

fn build_observable(
    name: &str,
    targets: &[String],
    def: &ObservableDef,
    registry: &SystemRegistry,
) -> crate::Result<Observable> {
    let subs: Vec<Subsystem> = targets.iter().map(|t| registry.get(t).cloned()).collect::<crate::Result<_>>()?;
    match def {
        ObservableDef::SpinZ => Ok(Observable::spin_z(name, subs[0].label.clone())),
        ObservableDef::Pointer => Ok(Observable::pointer(name, subs[0].label.clone(), subs[0].dim)),
        ObservableDef::Matrix(rows) => Observable::new(name, subs, CMatrix::from_rows(rows)?, None),
    }
}

impl Machine {
    fn build(ast: &ScenarioAst, seed: u64, threshold: f64) -> Result<Self, RuntimeError> {
        let mut systems = Vec::new();
        let mut apparatus_ready = BTreeMap::new();
        let mut environments = Vec::new();
        let mut initial: BTreeMap<&str, CVector> = BTreeMap::new();
        for decl in &ast.declarations {
            match &decl.kind {
                DeclKind::System { label, dim } => systems.push((Subsystem::new(label.clone(), *dim), 0)),
                DeclKind::Apparatus { label, dim, ready } => {
                    apparatus_ready.insert(label.clone(), *ready);
                    systems.push((Subsystem::new(label.clone(), *dim), *ready));
                }
                DeclKind::Environment { label, dim } => {
                    environments.push(label.clone());
                    systems.push((Subsystem::new(label.clone(), *dim), 0));
                }
                DeclKind::InitState { system, amplitudes, norm } => {
                    let scaled: Vec<C64> = amplitudes.iter().map(|z| z / norm).collect();
                    let ket = CVector::new(scaled).map_err(|e| RuntimeError::at(decl.line)(e.into()))?;
                    initial.insert(system, ket);
                }
                _ => {}
            }
        }
        let registry = SystemRegistry::new(systems.iter().map(|(s, _)| s.clone()).collect())
            .map_err(RuntimeError::at(ast.declarations.first().map_or(0, |d| d.line)))?;

        let mut observables = BTreeMap::new();
        for decl in &ast.declarations {
            if let DeclKind::Observable { name, targets, def } = &decl.kind {
                let obs = build_observable(name, targets, def, &registry).map_err(RuntimeError::at(decl.line))?;
                observables.insert(name.clone(), obs);
            }
        }

        let mut observers = Vec::new();
        for decl in &ast.declarations {
            let DeclKind::Observer { label } = &decl.kind else { continue };
            let at = RuntimeError::at(decl.line);
            let own: Vec<(&Subsystem, usize)> =
                systems.iter().filter(|(s, _)| &s.label != label).map(|(s, r)| (s, *r)).collect();
            if own.is_empty() {
                return Err(at(Error::Usage(format!("observer `{label}` has nothing to describe"))));
            }
            let reg = SystemRegistry::new(own.iter().map(|(s, _)| (*s).clone()).collect()).map_err(&at)?;
            let components: Vec<CVector> = own
                .iter()
                .map(|(s, ready)| match initial.get(s.label.as_str()) {
                    Some(ket) => ket.clone(),
                    None => CVector::basis(s.dim, *ready),
                })
                .collect();
            let state = product_state(&reg, &components).map_err(&at)?;
            let rng_seed = derive_seed(seed, observers.len() as u64);
            let ledger = PerspectiveLedger::new(label.clone(), state, rng_seed).map_err(&at)?;
            observers.push(Observer { ledger, rng: SplitMix64::new(rng_seed), cursor: 0 });
        }

        Ok(Self {
            registry,
            apparatus_ready,
            environments,
            observables,
            observers,
            events: Vec::new(),
            pointers: Vec::new(),
            threshold,
        })
    }

    fn observable(&self, name: &str, system: Option<&str>) -> crate::Result<Observable> {
        if let Some(obs) = self.observables.get(name) {
            return Ok(obs.clone());
        }
        match (name, system) {
            (BUILTIN_SPIN_Z, Some(system)) => Ok(Observable::spin_z(BUILTIN_SPIN_Z, system)),
            _ => Err(Error::Usage(format!("unknown observable `{name}`"))),
        }
    }

    fn observer_index(&self, label: &str) -> crate::Result<usize> {
        self.observers
            .iter()
            .position(|o| o.ledger.observer() == label)
            .ok_or_else(|| Error::Usage(format!("unknown observer `{label}`")))
    }

    /// Brings an observer up to date with interaction events it can
    /// describe. Events that involve the observer itself are skipped.
    fn catch_up(&mut self, index: usize, fresh: bool) -> crate::Result<usize> {
        let observer = &mut self.observers[index];
        let pending: Vec<EvolutionStep> = self.events[observer.cursor..]
            .iter()
            .filter(|e| e.systems().iter().all(|s| observer.ledger.state().registry().contains(s)))
            .cloned()
            .collect();
        observer.cursor = self.events.len();
        if !pending.is_empty() {
            observer.ledger = perspectives::evolve(&observer.ledger, &pending, fresh)?;
        }
        Ok(pending.len())
    }

    fn step(&mut self, step: &Step) -> crate::Result<StepOutcome> {
        let line = step.line;
        match &step.kind {
            StepKind::Premeasure { system, apparatus, observable } => {
                let obs = self.observable(observable, Some(system))?;
                let ready = self.apparatus_ready[apparatus];
                let app = self.registry.get(apparatus)?.clone();
                let pointer = perspectives::pointer_observable(format!("{apparatus}.pointer"), &app, ready, &obs)?;
                self.pointers.push(PointerRecord {
                    system: system.clone(),
                    apparatus: apparatus.clone(),
                    observable: obs.clone(),
                    pointer,
                });
                self.events.push(EvolutionStep::Premeasure {
                    system: system.clone(),
                    apparatus: apparatus.clone(),
                    observable: obs,
                    ready,
                });
                Ok(StepOutcome::Premeasure {
                    line,
                    system: system.clone(),
                    apparatus: apparatus.clone(),
                    observable: observable.clone(),
                })
            }
            StepKind::Decohere { target, env, overlap } => {
                let branches = self.registry.get(target)?.dim;
                let env_dim = self.registry.get(env)?.dim;
                let vectors = facts::overlap_family(branches, *overlap, env_dim)?;
                self.events.push(EvolutionStep::Decohere { target: target.clone(), env: env.clone(), vectors });
                Ok(StepOutcome::Decohere { line, target: target.clone(), env: env.clone(), overlap: *overlap })
            }
            StepKind::Measure { observer, observable, system, seed } => {
                let index = self.observer_index(observer)?;
                let obs = self.observable(observable, Some(system))?;
                self.catch_up(index, false)?;
                let o = &mut self.observers[index];
                let (ledger, fact) = match seed {
                    Some(k) => perspectives::measure(&o.ledger, &obs, &mut SplitMix64::new(*k))?,
                    None => perspectives::measure(&o.ledger, &obs, &mut o.rng)?,
                };
                o.ledger = ledger;
                Ok(StepOutcome::Measure { line, fact })
            }
            StepKind::UnitaryView { observer } => {
                let index = self.observer_index(observer)?;
                let applied = self.catch_up(index, true)?;
                Ok(StepOutcome::UnitaryView { line, observer: observer.clone(), applied })
            }
            StepKind::StabilityCheck { observer, partition, target } => {
                let index = self.observer_index(observer)?;
                self.catch_up(index, false)?;
                let part_obs = self.observable(partition, None)?;
                let target_obs = self.observable(target, None)?;
                let ledger = self.observers[index].ledger.clone();
                let ignore: Vec<&str> = self.environments.iter().map(String::as_str).collect();
                let state = facts::accessible_state(ledger.state(), &ignore, &[&part_obs, &target_obs])?;
                let fp = FactPartition::from_observables(&part_obs, &target_obs, state.registry())?;
                let report = facts::stability_deviation(&state, &fp, self.threshold)?;
                let witness = facts::interference_witness(&state, fp.projectors())?;
                Ok(StepOutcome::StabilityCheck(StabilityCheckOutcome {
                    line,
                    observer: observer.clone(),
                    partition: partition.clone(),
                    target: target.clone(),
                    report,
                    witness,
                    ledger,
                }))
            }
            StepKind::CrossCheck { observer, friend } => self.cross_check(line, observer, friend),
        }
    }

    fn cross_check(&mut self, line: usize, observer: &str, friend: &str) -> crate::Result<StepOutcome> {
        let index = self.observer_index(observer)?;
        let friend_index = self.observer_index(friend)?;
        let record = self
            .pointers
            .iter()
            .rev()
            .find(|p| p.apparatus == friend)
            .cloned()
            .ok_or_else(|| Error::Precondition(format!("`{friend}` never premeasured anything")))?;
        let friend_facts = self.observers[friend_index].ledger.facts();
        let position = friend_facts
            .iter()
            .rposition(|f| f.system == record.system && f.observable == record.observable.name())
            .ok_or_else(|| {
                Error::Precondition(format!(
                    "`{friend}` holds no `{}` fact about `{}`",
                    record.observable.name(),
                    record.system
                ))
            })?;
        let friend_fact = friend_facts[position].clone();
        let destroyed = friend_facts[position + 1..].iter().any(|later| {
            later.system == record.system
                && self
                    .observable(&later.observable, Some(&record.system))
                    .map_or(true, |o| !o.commutes_with(&record.observable))
        });
        let outcome = |check, correlation| {
            StepOutcome::CrossCheck(CrossCheckOutcome {
                line,
                observer: observer.to_string(),
                friend: friend.to_string(),
                check,
                correlation,
            })
        };
        if destroyed {
            return Ok(outcome(CrossCheck::information_destroyed(friend_fact), None));
        }
        self.catch_up(index, false)?;
        let o = &mut self.observers[index];
        let correlation = perspectives::correlation_probability(o.ledger.state(), &record.pointer, &record.observable)?;
        let (ledger, check) =
            perspectives::cross_check(&o.ledger, &friend_fact, &record.pointer, Some(&record.observable), &mut o.rng)?;
        o.ledger = ledger;
        Ok(outcome(check, Some(correlation)))
    }
}
