//! Interventional and path-specific effects of the sensitive node on the
//! outcome: total, direct, indirect, path-specific, effect of treatment on
//! the treated, non-causal information and back-door adjustment.
//!
//! Closed forms enumerate Bernoulli configurations exactly (linear-Gaussian
//! continuous nodes only); Monte-Carlo estimates work for every mechanism.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::dataset::{DataError, Dataset};
use crate::graph::{satisfies_backdoor, CausalGraph, GraphError};
use crate::parallel::sum_rows;
use crate::rng::{Purpose, StreamKey};
use crate::scm::{
    exact_expectation, least_squares_predictor, population_moments, Law, ModelError, Regime,
    StructuralModel,
};

pub const DEFAULT_MC_SAMPLES: usize = 100_000;
const MIN_EVENT_PROBABILITY: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EffectError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("adjustment set {0:?} does not satisfy the back-door criterion")]
    BackdoorViolated(Vec<String>),
    #[error("stratum {0} has no records with the requested treatment value")]
    EmptyStratum(String),
    #[error("no direct edge from `{0}` to `{1}`")]
    NoDirectEdge(String, String),
    #[error("`{0}` is not a child of the sensitive node")]
    NotOutEdge(String),
    #[error("`{0}` must be a Bernoulli node")]
    NotBernoulli(String),
    #[error("conditioning event has probability {0:e}")]
    DegenerateConditioning(f64),
    #[error("Monte-Carlo sample size must be at least 2")]
    TooFewSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    ClosedForm,
    MonteCarlo { n: usize, seed: u64 },
}

impl Estimator {
    pub fn monte_carlo(seed: u64) -> Self {
        Estimator::MonteCarlo {
            n: DEFAULT_MC_SAMPLES,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectEstimate {
    pub value: f64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// False when a back-door check was skipped on request.
    pub verified: bool,
}

impl EffectEstimate {
    fn closed(value: f64) -> Self {
        EffectEstimate {
            value,
            method: Method::ClosedForm,
            n_samples: None,
            std_error: None,
            seed: None,
            verified: true,
        }
    }

    fn mc(value: f64, std_error: f64, n: usize, seed: u64) -> Self {
        EffectEstimate {
            value,
            method: Method::MonteCarlo,
            n_samples: Some(n),
            std_error: Some(std_error),
            seed: Some(seed),
            verified: true,
        }
    }
}

/// Which value of the sensitive node each outgoing edge transmits: edges
/// into `active_edges` carry `active`, all others carry `baseline`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathInterventionSpec {
    pub baseline: f64,
    pub active: f64,
    /// Children of the sensitive node whose incoming edge is active.
    pub active_edges: BTreeSet<String>,
}

impl PathInterventionSpec {
    pub fn new<I, S>(baseline: f64, active: f64, active_children: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        PathInterventionSpec {
            baseline,
            active,
            active_edges: active_children.into_iter().map(Into::into).collect(),
        }
    }

    /// Every outgoing edge of the sensitive node active.
    pub fn all_active(g: &CausalGraph, baseline: f64, active: f64) -> Result<Self, GraphError> {
        let a = sensitive(g)?;
        Ok(Self::new(
            baseline,
            active,
            g.children_idx(a).iter().map(|&c| g.name(c).to_string()),
        ))
    }

    pub(crate) fn regime(&self, m: &StructuralModel) -> Result<Regime, EffectError> {
        let g = m.graph();
        let a = sensitive(g)?;
        for child in &self.active_edges {
            let c = g.index_of(child)?;
            if !g.children_idx(a).contains(&c) {
                return Err(EffectError::NotOutEdge(child.clone()));
            }
        }
        let values = g.children_idx(a).iter().map(|&c| {
            let v = if self.active_edges.contains(g.name(c)) {
                self.active
            } else {
                self.baseline
            };
            (c, v)
        });
        Ok(Regime::new(m, a, values))
    }
}

fn sensitive(g: &CausalGraph) -> Result<usize, GraphError> {
    g.sensitive_idx().ok_or(GraphError::RolesUnset)
}

fn roles(g: &CausalGraph) -> Result<(usize, usize), GraphError> {
    match (g.sensitive_idx(), g.outcome_idx()) {
        (Some(a), Some(y)) => Ok((a, y)),
        _ => Err(GraphError::RolesUnset),
    }
}

fn same_regime(r: &Regime, s: &Regime) -> bool {
    r.edge_values == s.edge_values
}

// Plain Monte-Carlo mean of the outcome under a regime.
fn mc_mean(
    m: &StructuralModel,
    y: usize,
    regime: &Regime,
    n: usize,
    seed: u64,
    term: u32,
) -> (f64, f64) {
    let key = StreamKey::new(seed, Purpose::Term(term));
    let width = m.graph().len();
    let none = vec![None; width];
    let sums = sum_rows(n, 2, |r, acc| {
        let mut stream = key.record(r as u64);
        let mut noise = vec![0.0; width];
        m.draw_noise(&mut stream, &mut noise);
        let mut out = vec![0.0; width];
        m.evaluate(&noise, &none, Some(regime), &mut out);
        acc[0] = out[y];
        acc[1] = out[y] * out[y];
    });
    let nf = n as f64;
    let mean = sums[0] / nf;
    let var = ((sums[1] - sums[0] * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

// Self-normalized importance-weighted mean of the outcome among worlds whose
// factual sensitive value equals `given`, with weights P(A = given | pa(A)).
fn mc_conditional_mean(
    m: &StructuralModel,
    y: usize,
    a: usize,
    given: f64,
    regime: Option<&Regime>,
    n: usize,
    seed: u64,
    term: u32,
) -> Result<(f64, f64), EffectError> {
    let key = StreamKey::new(seed, Purpose::Term(term));
    let width = m.graph().len();
    let mut forced = vec![None; width];
    forced[a] = Some(given);
    let sums = sum_rows(n, 5, |r, acc| {
        let mut stream = key.record(r as u64);
        let mut noise = vec![0.0; width];
        m.draw_noise(&mut stream, &mut noise);
        let mut out = vec![0.0; width];
        m.evaluate(&noise, &forced, regime, &mut out);
        let p1 = m.prob_one(a, |p| out[p]);
        let w = if given == 1.0 { p1 } else { 1.0 - p1 };
        let v = out[y];
        acc.copy_from_slice(&[w, w * v, w * w, w * w * v, w * w * v * v]);
    });
    let [sw, swy, sww, swwy, swwyy] = [sums[0], sums[1], sums[2], sums[3], sums[4]];
    if sw / (n as f64) < MIN_EVENT_PROBABILITY {
        return Err(EffectError::DegenerateConditioning(sw / n as f64));
    }
    let est = swy / sw;
    let spread = (swwyy - 2.0 * est * swwy + est * est * sww).max(0.0);
    Ok((est, spread.sqrt() / sw))
}

fn check_mc(n: usize) -> Result<(), EffectError> {
    if n < 2 {
        return Err(EffectError::TooFewSamples);
    }
    Ok(())
}

/// `<Y under r1> - <Y under r0>`.
fn contrast(
    m: &StructuralModel,
    r1: &Regime,
    r0: &Regime,
    est: Estimator,
) -> Result<EffectEstimate, EffectError> {
    let (_, y) = roles(m.graph())?;
    match est {
        Estimator::ClosedForm => {
            if same_regime(r1, r0) {
                crate::scm::exact_support(m)?;
                return Ok(EffectEstimate::closed(0.0));
            }
            let (v1, _) = exact_expectation(m, y, Some(r1), &[])?;
            let (v0, _) = exact_expectation(m, y, Some(r0), &[])?;
            Ok(EffectEstimate::closed(v1 - v0))
        }
        Estimator::MonteCarlo { n, seed } => {
            check_mc(n)?;
            if same_regime(r1, r0) {
                return Ok(EffectEstimate::mc(0.0, 0.0, n, seed));
            }
            let (v1, s1) = mc_mean(m, y, r1, n, seed, 0);
            let (v0, s0) = mc_mean(m, y, r0, n, seed, 1);
            Ok(EffectEstimate::mc(v1 - v0, s1.hypot(s0), n, seed))
        }
    }
}

/// Average total effect `<Y_a> - <Y_abar>`.
pub fn ate(
    m: &StructuralModel,
    a: f64,
    abar: f64,
    est: Estimator,
) -> Result<EffectEstimate, EffectError> {
    let s = sensitive(m.graph())?;
    contrast(m, &Regime::all(m, s, a), &Regime::all(m, s, abar), est)
}

/// Path-specific effect `<Y under spec> - <Y_abar>`.
pub fn pse(
    m: &StructuralModel,
    spec: &PathInterventionSpec,
    est: Estimator,
) -> Result<EffectEstimate, EffectError> {
    let s = sensitive(m.graph())?;
    let r1 = spec.regime(m)?;
    contrast(m, &r1, &Regime::all(m, s, spec.baseline), est)
}

fn direct_child(m: &StructuralModel) -> Result<(usize, usize), EffectError> {
    let g = m.graph();
    let (a, y) = roles(g)?;
    if !g.children_idx(a).contains(&y) {
        return Err(EffectError::NoDirectEdge(
            g.name(a).into(),
            g.name(y).into(),
        ));
    }
    Ok((a, y))
}

// Regime with the direct edge carrying `direct` and every other out-edge
// carrying `rest`.
fn split_regime(m: &StructuralModel, direct: f64, rest: f64) -> Result<Regime, EffectError> {
    let (a, y) = direct_child(m)?;
    let values = m
        .graph()
        .children_idx(a)
        .iter()
        .map(|&c| (c, if c == y { direct } else { rest }));
    Ok(Regime::new(m, a, values))
}

/// Average direct effect. With `active_variant = false` this is
/// `<Y_a(M_abar)> - <Y_abar>`; with `true` it is `<Y_a> - <Y_abar(M_a)>`.
pub fn ade(
    m: &StructuralModel,
    a: f64,
    abar: f64,
    active_variant: bool,
    est: Estimator,
) -> Result<EffectEstimate, EffectError> {
    let (s, _) = direct_child(m)?;
    if active_variant {
        contrast(m, &Regime::all(m, s, a), &split_regime(m, abar, a)?, est)
    } else {
        contrast(m, &split_regime(m, a, abar)?, &Regime::all(m, s, abar), est)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AieVariant {
    /// Direct edge held at the baseline: `<Y_abar(M_a)> - <Y_abar>`.
    BaselineDirect,
    /// Direct edge held at the active value: `<Y_a> - <Y_a(M_abar)>`.
    ActiveDirect,
}

/// Average indirect effect.
pub fn aie(
    m: &StructuralModel,
    a: f64,
    abar: f64,
    variant: AieVariant,
    est: Estimator,
) -> Result<EffectEstimate, EffectError> {
    let (s, _) = direct_child(m)?;
    match variant {
        AieVariant::BaselineDirect => {
            contrast(m, &split_regime(m, abar, a)?, &Regime::all(m, s, abar), est)
        }
        AieVariant::ActiveDirect => {
            contrast(m, &Regime::all(m, s, a), &split_regime(m, a, abar)?, est)
        }
    }
}

fn bernoulli_sensitive(m: &StructuralModel) -> Result<(usize, usize), EffectError> {
    let (a, y) = roles(m.graph())?;
    if !matches!(m.law(a), Law::Bernoulli { .. }) {
        return Err(EffectError::NotBernoulli(m.graph().name(a).into()));
    }
    Ok((a, y))
}

fn binary_value(m: &StructuralModel, a: usize, v: f64) -> Result<(), EffectError> {
    if v != 0.0 && v != 1.0 {
        return Err(ModelError::InvalidQuery(format!(
            "`{}` can only take values 0 or 1, not {v}",
            m.graph().name(a)
        ))
        .into());
    }
    Ok(())
}

fn degenerate(e: ModelError) -> EffectError {
    match e {
        ModelError::DegenerateConditioning(p) => EffectError::DegenerateConditioning(p),
        other => other.into(),
    }
}

// E[Y_{x} | A = given] - E[Y | A = given].
fn conditional_contrast(
    m: &StructuralModel,
    x: f64,
    given: f64,
    est: Estimator,
) -> Result<EffectEstimate, EffectError> {
    let (a, y) = bernoulli_sensitive(m)?;
    binary_value(m, a, x)?;
    binary_value(m, a, given)?;
    let regime = Regime::all(m, a, x);
    match est {
        Estimator::ClosedForm => {
            let (v1, _) =
                exact_expectation(m, y, Some(&regime), &[(a, given)]).map_err(degenerate)?;
            let (v0, _) = exact_expectation(m, y, None, &[(a, given)]).map_err(degenerate)?;
            Ok(EffectEstimate::closed(if x == given {
                0.0
            } else {
                v1 - v0
            }))
        }
        Estimator::MonteCarlo { n, seed } => {
            check_mc(n)?;
            let (v1, s1) = mc_conditional_mean(m, y, a, given, Some(&regime), n, seed, 0)?;
            if x == given {
                return Ok(EffectEstimate::mc(0.0, 0.0, n, seed));
            }
            let (v0, s0) = mc_conditional_mean(m, y, a, given, None, n, seed, 1)?;
            Ok(EffectEstimate::mc(v1 - v0, s1.hypot(s0), n, seed))
        }
    }
}

/// Effect of treatment on the treated: `E[Y_a | A = abar] - E[Y | A = abar]`.
pub fn ett(
    m: &StructuralModel,
    a: f64,
    abar: f64,
    est: Estimator,
) -> Result<EffectEstimate, EffectError> {
    conditional_contrast(m, a, abar, est)
}

/// Non-causal information: `E[Y_abar | A = a] - E[Y | A = abar]`.
pub fn nci(
    m: &StructuralModel,
    a: f64,
    abar: f64,
    est: Estimator,
) -> Result<EffectEstimate, EffectError> {
    let (s, y) = bernoulli_sensitive(m)?;
    binary_value(m, s, a)?;
    binary_value(m, s, abar)?;
    let regime = Regime::all(m, s, abar);
    match est {
        Estimator::ClosedForm => {
            let (v1, _) = exact_expectation(m, y, Some(&regime), &[(s, a)]).map_err(degenerate)?;
            let (v0, _) = exact_expectation(m, y, None, &[(s, abar)]).map_err(degenerate)?;
            Ok(EffectEstimate::closed(v1 - v0))
        }
        Estimator::MonteCarlo { n, seed } => {
            check_mc(n)?;
            let (v1, s1) = mc_conditional_mean(m, y, s, a, Some(&regime), n, seed, 0)?;
            let (v0, s0) = mc_conditional_mean(m, y, s, abar, None, n, seed, 1)?;
            Ok(EffectEstimate::mc(v1 - v0, s1.hypot(s0), n, seed))
        }
    }
}

/// Inputs for back-door adjustment.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    /// Closed form enumerates the Bernoulli adjustment variables; Monte
    /// Carlo samples the model and applies the plug-in estimator.
    Model(&'a StructuralModel, Estimator),
    Data(&'a CausalGraph, &'a Dataset),
}

impl Source<'_> {
    fn graph(&self) -> &CausalGraph {
        match self {
            Source::Model(m, _) => m.graph(),
            Source::Data(g, _) => g,
        }
    }
}

fn check_adjustment(
    g: &CausalGraph,
    adjustment: &BTreeSet<String>,
    verify: bool,
) -> Result<(usize, usize), EffectError> {
    let (a, y) = roles(g)?;
    if verify && !satisfies_backdoor(g, adjustment, g.name(a), g.name(y))? {
        return Err(EffectError::BackdoorViolated(
            adjustment.iter().cloned().collect(),
        ));
    }
    if !verify {
        g.indices_of(adjustment)?;
    }
    Ok((a, y))
}

/// `sum_c E[Y | A = a_value, C = c] P(C = c)` for the adjustment set `C`.
/// With `verify` the back-door criterion is checked first; without it the
/// estimate is marked unverified.
pub fn backdoor_adjust(
    source: Source<'_>,
    a_value: f64,
    adjustment: &BTreeSet<String>,
    verify: bool,
) -> Result<EffectEstimate, EffectError> {
    adjusted_contrast(source, &[a_value], adjustment, verify)
}

/// Back-door adjusted `E[Y | do(a)] - E[Y | do(abar)]`.
pub fn backdoor_effect(
    source: Source<'_>,
    a: f64,
    abar: f64,
    adjustment: &BTreeSet<String>,
    verify: bool,
) -> Result<EffectEstimate, EffectError> {
    adjusted_contrast(source, &[a, abar], adjustment, verify)
}

/// `E[Y | A = a] - E[Y | A = abar]` with no adjustment.
pub fn observed_gap(source: Source<'_>, a: f64, abar: f64) -> Result<EffectEstimate, EffectError> {
    let mut e = adjusted_contrast(source, &[a, abar], &BTreeSet::new(), false)?;
    e.verified = true;
    Ok(e)
}

// One value: the adjusted mean. Two values: the difference of adjusted means.
fn adjusted_contrast(
    source: Source<'_>,
    values: &[f64],
    adjustment: &BTreeSet<String>,
    verify: bool,
) -> Result<EffectEstimate, EffectError> {
    let g = source.graph();
    let (a, y) = check_adjustment(g, adjustment, verify)?;
    let sign = |k: usize| if k == 0 { 1.0 } else { -1.0 };
    let mut out = match source {
        Source::Model(m, Estimator::ClosedForm) => {
            let mut total = 0.0;
            for (k, &v) in values.iter().enumerate() {
                total += sign(k) * exact_adjusted_mean(m, a, y, v, adjustment)?;
            }
            EffectEstimate::closed(total)
        }
        Source::Model(m, Estimator::MonteCarlo { n, seed }) => {
            check_mc(n)?;
            let data = m.sample(n, seed)?;
            let mut e = plug_in(&data, g.name(a), g.name(y), values, adjustment)?;
            e.seed = Some(seed);
            e
        }
        Source::Data(_, data) => plug_in(data, g.name(a), g.name(y), values, adjustment)?,
    };
    out.verified = verify;
    Ok(out)
}

fn exact_adjusted_mean(
    m: &StructuralModel,
    a: usize,
    y: usize,
    a_value: f64,
    adjustment: &BTreeSet<String>,
) -> Result<f64, EffectError> {
    let g = m.graph();
    if (0..g.len()).all(|i| matches!(m.law(i), Law::Linear { .. } | Law::Point(_))) {
        // Jointly Gaussian: averaging the regression over the adjustment
        // variables leaves only the coefficient on A.
        let mut inputs = adjustment.clone();
        inputs.insert(g.name(a).to_string());
        let beta = least_squares_predictor(m, g.name(y), &inputs)?;
        let mom = population_moments(m, &BTreeMap::new())?;
        let (mu_y, mu_a) = (mom.mean_of(g.name(y))?, mom.mean_of(g.name(a))?);
        return Ok(mu_y + beta[g.name(a)] * (a_value - mu_a));
    }
    bernoulli_sensitive(m)?;
    let cs = g.indices_of(adjustment)?;
    for &c in &cs {
        if !matches!(m.law(c), Law::Bernoulli { .. }) {
            return Err(ModelError::UnsupportedMechanism(format!(
                "exact adjustment needs Bernoulli adjustment variables; `{}` is continuous",
                g.name(c)
            ))
            .into());
        }
    }
    let mut total = 0.0;
    for config in 0u32..(1u32 << cs.len()) {
        let cond: Vec<(usize, f64)> = cs
            .iter()
            .enumerate()
            .map(|(k, &c)| (c, ((config >> k) & 1) as f64))
            .collect();
        let p_c = match exact_expectation(m, y, None, &cond) {
            Ok((_, p)) => p,
            Err(ModelError::DegenerateConditioning(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        let mut with_a = cond.clone();
        with_a.push((a, a_value));
        let (mean, _) = exact_expectation(m, y, None, &with_a).map_err(degenerate)?;
        total += p_c * mean;
    }
    Ok(total)
}

// Stratified plug-in estimate with influence-function standard errors.
fn plug_in(
    data: &Dataset,
    a: &str,
    y: &str,
    values: &[f64],
    adjustment: &BTreeSet<String>,
) -> Result<EffectEstimate, EffectError> {
    let av = data.column(a)?;
    let yv = data.column(y)?;
    let cols: Vec<Vec<f64>> = adjustment
        .iter()
        .map(|c| data.column(c))
        .collect::<Result<_, _>>()?;
    let n = data.len();
    if n < 2 {
        return Err(EffectError::TooFewSamples);
    }
    let stratum_of: Vec<Vec<u64>> = (0..n)
        .map(|i| cols.iter().map(|c| c[i].to_bits()).collect())
        .collect();
    let mut strata: BTreeMap<&[u64], usize> = BTreeMap::new();
    for key in &stratum_of {
        let next = strata.len();
        strata.entry(key.as_slice()).or_insert(next);
    }
    let describe = |key: &[u64]| {
        adjustment
            .iter()
            .zip(key)
            .map(|(c, b)| format!("{c}={}", f64::from_bits(*b)))
            .collect::<Vec<_>>()
            .join(",")
    };
    let sid: Vec<usize> = stratum_of.iter().map(|k| strata[k.as_slice()]).collect();
    let s = strata.len();
    let mut size = vec![0usize; s];
    for &k in &sid {
        size[k] += 1;
    }

    let mut value = 0.0;
    let mut influence = vec![0.0; n];
    for (k, &target) in values.iter().enumerate() {
        let sign = if k == 0 { 1.0 } else { -1.0 };
        let mut treated = vec![0usize; s];
        let mut sum_y = vec![0.0; s];
        for i in 0..n {
            if av[i] == target {
                treated[sid[i]] += 1;
                sum_y[sid[i]] += yv[i];
            }
        }
        for (key, &j) in &strata {
            if treated[j] == 0 {
                return Err(EffectError::EmptyStratum(describe(key)));
            }
        }
        let mean: Vec<f64> = (0..s).map(|j| sum_y[j] / treated[j] as f64).collect();
        let est: f64 = (0..s).map(|j| size[j] as f64 / n as f64 * mean[j]).sum();
        value += sign * est;
        for i in 0..n {
            let j = sid[i];
            let mut phi = mean[j] - est;
            if av[i] == target {
                phi += size[j] as f64 / treated[j] as f64 * (yv[i] - mean[j]);
            }
            influence[i] += sign * phi;
        }
    }
    let se = influence.iter().map(|v| v * v).sum::<f64>().sqrt() / n as f64;
    Ok(EffectEstimate {
        value,
        method: Method::MonteCarlo,
        n_samples: Some(n),
        std_error: Some(se),
        seed: None,
        verified: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphSpec;
    use crate::scm::{build_model, Mechanism};

    fn model(g: CausalGraph, mechs: Vec<(&str, Mechanism)>) -> StructuralModel {
        build_model(
            g,
            mechs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        )
        .unwrap()
    }

    fn confounded() -> StructuralModel {
        let g = GraphSpec::new()
            .nodes(["C", "A", "Y"])
            .edge("C", "A")
            .edge("C", "Y")
            .edge("A", "Y")
            .sensitive("A")
            .outcome("Y")
            .build()
            .unwrap();
        let ln4 = 4f64.ln();
        model(
            g,
            vec![
                ("C", Mechanism::bernoulli(0.5)),
                ("A", Mechanism::logistic(-ln4, &[("C", 2.0 * ln4)])),
                ("Y", Mechanism::linear(0.0, &[("A", 1.0), ("C", 2.0)], 1.0)),
            ],
        )
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn confounded_enumeration() {
        let m = confounded();
        let src = Source::Model(&m, Estimator::ClosedForm);
        let adjusted = backdoor_effect(src, 1.0, 0.0, &set(&["C"]), true).unwrap();
        assert!((adjusted.value - 1.0).abs() < 1e-12);
        let naive = observed_gap(src, 1.0, 0.0).unwrap();
        assert!((naive.value - 2.2).abs() < 1e-12);
        assert!((ate(&m, 1.0, 0.0, Estimator::ClosedForm).unwrap().value - 1.0).abs() < 1e-12);
        assert!((ett(&m, 1.0, 0.0, Estimator::ClosedForm).unwrap().value - 1.0).abs() < 1e-12);
        assert!((ett(&m, 0.0, 1.0, Estimator::ClosedForm).unwrap().value + 1.0).abs() < 1e-12);
        assert!((nci(&m, 1.0, 0.0, Estimator::ClosedForm).unwrap().value - 1.2).abs() < 1e-12);
    }

    #[test]
    fn backdoor_violation_and_override() {
        let g = GraphSpec::new()
            .nodes(["A", "M", "Y"])
            .edge("A", "M")
            .edge("M", "Y")
            .sensitive("A")
            .outcome("Y")
            .build()
            .unwrap();
        let m = model(
            g,
            vec![
                ("A", Mechanism::bernoulli(0.5)),
                ("M", Mechanism::logistic(0.0, &[("A", 1.0)])),
                ("Y", Mechanism::linear(0.0, &[("M", 1.0)], 1.0)),
            ],
        );
        let src = Source::Model(&m, Estimator::ClosedForm);
        assert!(matches!(
            backdoor_adjust(src, 1.0, &set(&["M"]), true),
            Err(EffectError::BackdoorViolated(_))
        ));
        let forced = backdoor_adjust(src, 1.0, &set(&["M"]), false).unwrap();
        assert!(!forced.verified);
        // no back-door path: adjustment by nothing equals conditioning
        let adj = backdoor_adjust(src, 1.0, &BTreeSet::new(), true).unwrap();
        let (cond, _) = exact_expectation(&m, 2, None, &[(0, 1.0)]).unwrap();
        assert!((adj.value - cond).abs() < 1e-15);
    }

    #[test]
    fn empty_stratum_in_data() {
        let g = confounded().graph().clone();
        let rows = vec![
            vec![0.0, 0.0, 1.0],
            vec![0.0, 1.0, 2.0],
            vec![1.0, 1.0, 3.0],
        ];
        let d = Dataset::new(vec!["C".into(), "A".into(), "Y".into()], rows).unwrap();
        let err = backdoor_adjust(Source::Data(&g, &d), 0.0, &set(&["C"]), true).unwrap_err();
        assert_eq!(err, EffectError::EmptyStratum("C=1".into()));
    }

    #[test]
    fn equal_values_give_zero() {
        let m = confounded();
        assert_eq!(ate(&m, 1.0, 1.0, Estimator::ClosedForm).unwrap().value, 0.0);
        assert_eq!(ett(&m, 1.0, 1.0, Estimator::ClosedForm).unwrap().value, 0.0);
        let spec = PathInterventionSpec::new(0.0, 1.0, Vec::<String>::new());
        assert_eq!(pse(&m, &spec, Estimator::ClosedForm).unwrap().value, 0.0);
    }

    #[test]
    fn spec_must_use_out_edges() {
        let m = confounded();
        let spec = PathInterventionSpec::new(0.0, 1.0, ["C"]);
        assert_eq!(
            pse(&m, &spec, Estimator::ClosedForm).unwrap_err(),
            EffectError::NotOutEdge("C".into())
        );
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let m = confounded();
        let est = Estimator::MonteCarlo {
            n: 100_000,
            seed: 5,
        };
        for (mc, exact) in [
            (ate(&m, 1.0, 0.0, est), 1.0),
            (ett(&m, 0.0, 1.0, est), -1.0),
            (nci(&m, 1.0, 0.0, est), 1.2),
        ] {
            let mc = mc.unwrap();
            assert!(
                (mc.value - exact).abs() < 4.0 * mc.std_error.unwrap(),
                "{mc:?} vs {exact}"
            );
        }
        let adj = backdoor_effect(Source::Model(&m, est), 1.0, 0.0, &set(&["C"]), true).unwrap();
        assert!((adj.value - 1.0).abs() < 4.0 * adj.std_error.unwrap());
    }

    #[test]
    fn degenerate_conditioning() {
        let g = GraphSpec::new()
            .nodes(["A", "Y"])
            .edge("A", "Y")
            .sensitive("A")
            .outcome("Y")
            .build()
            .unwrap();
        let m = model(
            g,
            vec![
                ("A", Mechanism::bernoulli(1.0)),
                ("Y", Mechanism::linear(0.0, &[("A", 1.0)], 1.0)),
            ],
        );
        assert!(matches!(
            ett(&m, 1.0, 0.0, Estimator::ClosedForm),
            Err(EffectError::DegenerateConditioning(_))
        ));
    }
}
