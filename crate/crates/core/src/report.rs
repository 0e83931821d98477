//! Versioned JSON report combining the audit, effect estimates,
//! counterfactual predictions and group metrics of one scenario.
//!
//! Output depends only on the inputs and the seed: maps are ordered, Monte
//! Carlo draws come from per-record streams and reductions run in a fixed
//! order, so the worker count never changes a byte.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::counterfactual::{
    fair_predict, unfair_out_edges, FairPredictOptions, Outcome, Sampling, UnfairEdges,
};
use crate::dataset::{Bindings, Dataset};
use crate::dsl::ScenarioSpec;
use crate::effects::{
    ade, aie, ate, backdoor_effect, ett, nci, observed_gap, pse, AieVariant, EffectError,
    EffectEstimate, Estimator, PathInterventionSpec, Source,
};
use crate::error::Error;
use crate::graph::{
    audit_paths, minimal_adjustment_sets, recommend_criteria, AuditReport, Recommendation,
};
use crate::metrics::{
    demographic_parity, error_rate_parity, predictive_parity, ErrorRateGaps, GroupGap,
    GroupedCounts, MetricError,
};
use crate::scm::{ModelError, Record, StructuralModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inputs {
    pub scenario: InputDigest,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<InputDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectEntry {
    pub name: &'static str,
    pub active: f64,
    pub baseline: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adjustment: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EffectEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterfactualEntry {
    pub record: usize,
    pub values: Record,
    pub fair_prediction: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct CounterfactualSection {
    pub unfair_edges: Vec<String>,
    pub records: Vec<CounterfactualEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSection {
    pub source: &'static str,
    pub counts: GroupedCounts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demographic_parity: Option<GroupGap>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_rates: Option<ErrorRateGaps>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictive_parity: Option<GroupGap>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Sections {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recommendation: Option<Recommendation>,
    pub effects: Vec<EffectEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterfactuals: Option<CounterfactualSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: u32,
    pub tool: Tool,
    pub inputs: Inputs,
    pub seed: u64,
    pub sections: Sections,
}

impl Report {
    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// What to report on.
#[derive(Debug, Clone, Copy)]
pub struct ReportInput<'a> {
    pub scenario_text: &'a str,
    pub spec: &'a ScenarioSpec,
    /// Raw bytes of the data file (for the digest) and its parsed form.
    pub data: Option<(&'a [u8], &'a Dataset)>,
    /// Overrides the scenario's `bind` block.
    pub bindings: Option<&'a Bindings>,
    /// Aggregate counts used when no data is given.
    pub counts: Option<GroupedCounts>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportOptions {
    pub seed: u64,
    pub mc_samples: usize,
    pub counterfactual_records: usize,
    pub counterfactual_samples: usize,
    pub max_adjustment: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            seed: 0,
            mc_samples: 100_000,
            counterfactual_records: 5,
            counterfactual_samples: 1000,
            max_adjustment: 3,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

// Closed form where the model allows it, Monte Carlo otherwise.
fn estimate<F>(seed: u64, n: usize, f: F) -> (Option<EffectEstimate>, Option<String>)
where
    F: Fn(Estimator) -> Result<EffectEstimate, EffectError>,
{
    let fallback = |e: &EffectError| {
        matches!(
            e,
            EffectError::Model(ModelError::UnsupportedMechanism(_)) | EffectError::NotBernoulli(_)
        )
    };
    match f(Estimator::ClosedForm) {
        Ok(v) => (Some(v), None),
        Err(e) if fallback(&e) => match f(Estimator::MonteCarlo { n, seed }) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        },
        Err(e) => (None, Some(e.to_string())),
    }
}

fn effects_section(m: &StructuralModel, opts: &ReportOptions) -> Vec<EffectEntry> {
    let g = m.graph();
    let (a, abar) = (1.0, 0.0);
    let (seed, n) = (opts.seed, opts.mc_samples);
    let entry = |name, (estimate, skipped): (Option<EffectEstimate>, Option<String>)| EffectEntry {
        name,
        active: a,
        baseline: abar,
        adjustment: None,
        estimate,
        skipped,
    };
    let mut out = vec![
        entry("ate", estimate(seed, n, |e| ate(m, a, abar, e))),
        entry("ade", estimate(seed, n, |e| ade(m, a, abar, false, e))),
        entry(
            "aie",
            estimate(seed, n, |e| aie(m, a, abar, AieVariant::BaselineDirect, e)),
        ),
    ];
    let unfair = match unfair_out_edges(g) {
        Ok(set) => estimate(seed, n, |e| {
            pse(
                m,
                &PathInterventionSpec::new(abar, a, set.iter().cloned()),
                e,
            )
        }),
        Err(err) => (None, Some(err.to_string())),
    };
    out.push(entry("pse_unfair", unfair));
    out.push(entry("ett", estimate(seed, n, |e| ett(m, a, abar, e))));
    out.push(entry("nci", estimate(seed, n, |e| nci(m, a, abar, e))));
    out.push(entry(
        "observed_gap",
        estimate(seed, n, |e| observed_gap(Source::Model(m, e), a, abar)),
    ));

    let (sa, sy) = (
        g.sensitive().unwrap_or_default(),
        g.outcome().unwrap_or_default(),
    );
    let backdoor = match minimal_adjustment_sets(
        g,
        sa,
        sy,
        opts.max_adjustment.min(g.len().saturating_sub(2)),
    ) {
        Ok(sets) => match sets.into_iter().next() {
            Some(set) => {
                let mut e = entry(
                    "backdoor",
                    estimate(seed, n, |e| {
                        backdoor_effect(Source::Model(m, e), a, abar, &set, true)
                    }),
                );
                e.adjustment = Some(set.into_iter().collect());
                e
            }
            None => entry(
                "backdoor",
                (None, Some("no adjustment set within the size limit".into())),
            ),
        },
        Err(err) => entry("backdoor", (None, Some(err.to_string()))),
    };
    out.push(backdoor);
    out
}

fn counterfactual_section(m: &StructuralModel, opts: &ReportOptions) -> CounterfactualSection {
    let g = m.graph();
    let unfair = match unfair_out_edges(g) {
        Ok(set) => set,
        Err(e) => {
            return CounterfactualSection {
                skipped: Some(e.to_string()),
                ..Default::default()
            }
        }
    };
    let mut section = CounterfactualSection {
        unfair_edges: unfair
            .iter()
            .map(|c| format!("{} -> {c}", g.sensitive().unwrap_or_default()))
            .collect(),
        ..Default::default()
    };
    let data = match m.sample(opts.counterfactual_records, opts.seed) {
        Ok(d) => d,
        Err(e) => {
            section.skipped = Some(e.to_string());
            return section;
        }
    };
    let options = FairPredictOptions {
        sampling: Sampling {
            n_samples: opts.counterfactual_samples,
            seed: opts.seed,
        },
        ..Default::default()
    };
    for i in 0..data.len() {
        let values = data.record(i).expect("index in range");
        match fair_predict(m, &values, &UnfairEdges::Explicit(unfair.clone()), options) {
            Ok(fair_prediction) => section.records.push(CounterfactualEntry {
                record: i,
                values,
                fair_prediction,
            }),
            Err(e) => {
                section.skipped = Some(e.to_string());
                section.records.clear();
                break;
            }
        }
    }
    section
}

fn metrics_section(source: &'static str, counts: GroupedCounts) -> MetricsSection {
    fn keep<T>(skipped: &mut Vec<String>, name: &str, r: Result<T, MetricError>) -> Option<T> {
        r.map_err(|e| skipped.push(format!("{name}: {e}"))).ok()
    }
    let mut skipped = Vec::new();
    let demographic_parity = keep(
        &mut skipped,
        "demographic_parity",
        demographic_parity(&counts),
    );
    let error_rates = keep(&mut skipped, "error_rates", error_rate_parity(&counts));
    let predictive_parity = keep(
        &mut skipped,
        "predictive_parity",
        predictive_parity(&counts),
    );
    MetricsSection {
        source,
        counts,
        demographic_parity,
        error_rates,
        predictive_parity,
        skipped,
    }
}

/// Builds the report. Sections that do not apply to the scenario are
/// omitted; estimates that fail are kept with the reason they were skipped.
pub fn build_report(input: &ReportInput<'_>, opts: &ReportOptions) -> Result<Report, Error> {
    let spec = input.spec;
    let g = &spec.graph;
    let mut sections = Sections::default();
    if g.sensitive().is_some() && g.outcome().is_some() {
        let audit = audit_paths(g)?;
        sections.recommendation = Some(recommend_criteria(&audit));
        sections.audit = Some(audit);
        if let Some(m) = &spec.model {
            sections.effects = effects_section(m, opts);
            sections.counterfactuals = Some(counterfactual_section(m, opts));
        }
    }
    let bindings = input.bindings.or(spec.bindings.as_ref());
    sections.metrics = match (input.data, bindings, input.counts) {
        (Some((_, data)), Some(b), _) => Some(metrics_section("data", data.confusion(b)?)),
        (Some(_), None, _) => {
            return Err(Error::Invalid("data given without column bindings".into()))
        }
        (None, _, Some(c)) => Some(metrics_section("fixture", c)),
        (None, _, None) => None,
    };
    Ok(Report {
        schema: SCHEMA_VERSION,
        tool: Tool {
            name: "fairlens",
            version: env!("CARGO_PKG_VERSION"),
        },
        inputs: Inputs {
            scenario: InputDigest {
                name: spec.name.clone(),
                sha256: sha256_hex(input.scenario_text.as_bytes()),
            },
            data: input.data.map(|(bytes, d)| InputDigest {
                name: format!("{} rows", d.len()),
                sha256: sha256_hex(bytes),
            }),
        },
        seed: opts.seed,
        sections,
    })
}
