//! Run reports: JSON (canonical), CSV (fact logs only) and plain text.

use std::fmt::Write;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::facts;
use crate::perspectives::{CrossCheckStatus, FactRecord, PerspectiveLedger};
use crate::qstate::StateForm;
use crate::scenario::interp::{PointerRecord, ScenarioResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Amplitudes or populations listed per observer.
pub const TOP_ENTRIES: usize = 8;

/// A float written with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Real {
    pub fn text(self) -> String {
        format!("{:.16e}", self.0)
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return serializer.serialize_none();
        }
        serde_json::Number::from_str(&self.text()).map_err(serde::ser::Error::custom)?.serialize(serializer)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: Option<String>,
    pub seed: u64,
    pub threshold: Real,
    pub observers: Vec<ObserverSection>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObserverSection {
    pub observer: String,
    pub state: StateSummary,
    pub facts: Vec<FactEntry>,
    pub stability: Vec<StabilityEntry>,
    pub cross_checks: Vec<CrossCheckEntry>,
    pub witnesses: Vec<WitnessEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsystemEntry {
    pub label: String,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateSummary {
    pub systems: Vec<SubsystemEntry>,
    pub form: &'static str,
    pub purity: Real,
    /// Largest amplitudes (pure) or diagonal populations (mixed).
    pub top: Vec<BasisEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisEntry {
    pub basis: String,
    pub re: Real,
    pub im: Real,
    pub probability: Real,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactEntry {
    pub step: u64,
    pub system: String,
    pub observable: String,
    pub outcome: String,
    pub eigenvalue: Real,
    pub probability: Real,
    pub draw: Real,
}

impl From<&FactRecord> for FactEntry {
    fn from(f: &FactRecord) -> Self {
        Self {
            step: f.step,
            system: f.system.clone(),
            observable: f.observable.clone(),
            outcome: f.outcome.clone(),
            eigenvalue: Real(f.eigenvalue),
            probability: Real(f.probability),
            draw: Real(f.draw),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityEntry {
    pub line: usize,
    pub partition: String,
    pub target: String,
    pub p_direct: Real,
    pub p_composed: Real,
    pub deviation: Real,
    pub stable: bool,
    pub witness: Real,
    pub facts_at_check: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossCheckEntry {
    pub line: usize,
    pub friend: String,
    pub status: CrossCheckStatus,
    pub friend_outcome: String,
    pub pointer_outcome: Option<String>,
    pub system_outcome: Option<String>,
    pub correlation: Option<Real>,
}

/// Coherence between the pointer branches of one premeasurement, as the
/// observer's final state carries it.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessEntry {
    pub apparatus: String,
    pub observable: String,
    pub witness: Real,
}

fn summarize(ledger: &PerspectiveLedger) -> StateSummary {
    let state = ledger.state();
    let registry = state.registry();
    let mut entries: Vec<(usize, f64, f64, f64)> = match state.form() {
        StateForm::Pure(v) => v.entries().iter().enumerate().map(|(i, z)| (i, z.re, z.im, z.norm_sqr())).collect(),
        StateForm::Mixed(rho) => rho.diagonal().iter().enumerate().map(|(i, z)| (i, z.re, 0.0, z.re)).collect(),
    };
    entries.sort_by(|a, b| b.3.total_cmp(&a.3).then(a.0.cmp(&b.0)));
    let top = entries
        .into_iter()
        .filter(|e| e.3 > 0.0)
        .take(TOP_ENTRIES)
        .map(|(i, re, im, p)| BasisEntry {
            basis: registry.basis_label(i),
            re: Real(re),
            im: Real(im),
            probability: Real(p),
        })
        .collect();
    StateSummary {
        systems: registry.systems().iter().map(|s| SubsystemEntry { label: s.label.clone(), dim: s.dim }).collect(),
        form: if state.is_pure_form() { "pure" } else { "mixed" },
        purity: Real(state.purity()),
        top,
    }
}

fn witnesses(ledger: &PerspectiveLedger, pointers: &[PointerRecord]) -> Vec<WitnessEntry> {
    let mut out = Vec::new();
    for record in pointers {
        if !record.pointer.fits(ledger.state().registry()) {
            continue;
        }
        if out
            .iter()
            .any(|w: &WitnessEntry| w.apparatus == record.apparatus && w.observable == record.observable.name())
        {
            continue;
        }
        let witness = record
            .pointer
            .embedded_projectors(ledger.state().registry())
            .and_then(|p| facts::interference_witness(ledger.state(), &p));
        if let Ok(w) = witness {
            out.push(WitnessEntry {
                apparatus: record.apparatus.clone(),
                observable: record.observable.name().to_string(),
                witness: Real(w),
            });
        }
    }
    out
}

impl RunReport {
    pub fn from_result(result: &ScenarioResult) -> Self {
        let observers = result
            .ledgers
            .iter()
            .map(|ledger| {
                let name = ledger.observer();
                let stability = result
                    .stability_checks()
                    .filter(|s| s.observer == name)
                    .map(|s| StabilityEntry {
                        line: s.line,
                        partition: s.partition.clone(),
                        target: s.target.clone(),
                        p_direct: Real(s.report.p_direct),
                        p_composed: Real(s.report.p_composed),
                        deviation: Real(s.report.deviation),
                        stable: s.report.stable,
                        witness: Real(s.witness),
                        facts_at_check: s.ledger.facts().len(),
                    })
                    .collect();
                let cross_checks = result
                    .cross_checks()
                    .filter(|c| c.observer == name)
                    .map(|c| CrossCheckEntry {
                        line: c.line,
                        friend: c.friend.clone(),
                        status: c.check.status,
                        friend_outcome: c.check.friend_fact.outcome.clone(),
                        pointer_outcome: c.check.pointer_fact.as_ref().map(|f| f.outcome.clone()),
                        system_outcome: c.check.system_fact.as_ref().map(|f| f.outcome.clone()),
                        correlation: c.correlation.map(Real),
                    })
                    .collect();
                ObserverSection {
                    observer: name.to_string(),
                    state: summarize(ledger),
                    facts: ledger.facts().iter().map(FactEntry::from).collect(),
                    stability,
                    cross_checks,
                    witnesses: witnesses(ledger, &result.pointers),
                }
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: result.name.clone(),
            seed: result.seed,
            threshold: Real(result.threshold),
            observers,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Fact logs of every observer, one row per fact.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("observer,step,system,observable,outcome,eigenvalue,probability,draw\n");
        for section in &self.observers {
            for f in &section.facts {
                let fields = [
                    csv_field(&section.observer),
                    f.step.to_string(),
                    csv_field(&f.system),
                    csv_field(&f.observable),
                    csv_field(&f.outcome),
                    f.eigenvalue.text(),
                    f.probability.text(),
                    f.draw.text(),
                ];
                writeln!(out, "{}", fields.join(",")).unwrap();
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "scenario: {}", self.scenario.as_deref().unwrap_or("(unnamed)")).unwrap();
        writeln!(out, "seed: {}", self.seed).unwrap();
        for s in &self.observers {
            let dims: Vec<String> = s.state.systems.iter().map(|x| format!("{}:{}", x.label, x.dim)).collect();
            writeln!(out).unwrap();
            writeln!(
                out,
                "observer {}: {} fact{}",
                s.observer,
                s.facts.len(),
                if s.facts.len() == 1 { "" } else { "s" }
            )
            .unwrap();
            writeln!(out, "  state [{}] {}, purity {}", dims.join(", "), s.state.form, s.state.purity.text()).unwrap();
            for e in &s.state.top {
                writeln!(out, "    |{}>  {} {:+.16e}i  p={}", e.basis, e.re.text(), e.im.0, e.probability.text())
                    .unwrap();
            }
            for f in &s.facts {
                writeln!(
                    out,
                    "  fact #{}: {} on {} = {} (eigenvalue {}, p={})",
                    f.step,
                    f.observable,
                    f.system,
                    f.outcome,
                    f.eigenvalue.text(),
                    f.probability.text()
                )
                .unwrap();
            }
            for w in &s.witnesses {
                writeln!(out, "  interference witness ({} via {}): {}", w.observable, w.apparatus, w.witness.text())
                    .unwrap();
            }
            for st in &s.stability {
                writeln!(
                    out,
                    "  stability (line {}) {} / {}: p_direct={} p_composed={} deviation={} {} (witness {}, facts {})",
                    st.line,
                    st.partition,
                    st.target,
                    st.p_direct.text(),
                    st.p_composed.text(),
                    st.deviation.text(),
                    if st.stable { "stable" } else { "not stable" },
                    st.witness.text(),
                    st.facts_at_check
                )
                .unwrap();
            }
            for c in &s.cross_checks {
                let status = match c.status {
                    CrossCheckStatus::Agree => "agree",
                    CrossCheckStatus::Disagree => "disagree",
                    CrossCheckStatus::InformationDestroyed => "information destroyed",
                };
                write!(
                    out,
                    "  cross-check (line {}) against {}: {status}; friend saw {}",
                    c.line, c.friend, c.friend_outcome
                )
                .unwrap();
                if let Some(p) = &c.pointer_outcome {
                    write!(out, ", pointer read {p}").unwrap();
                }
                if let Some(corr) = c.correlation {
                    write!(out, ", correlation {}", corr.text()).unwrap();
                }
                writeln!(out).unwrap();
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
