//! Twin-network counterfactuals: abduction of the noise behind an observed
//! record, path-specific counterfactual outcomes, corrected descendants and
//! path-specific counterfactually fair prediction.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::effects::{EffectError, PathInterventionSpec};
use crate::graph::{enumerate_paths, CausalGraph, FairnessLabel, GraphError};
use crate::parallel::{map_indexed, sum_rows};
use crate::rng::{Purpose, StreamKey};
use crate::scm::{Law, ModelError, Record, Regime, StructuralModel};

/// Default Monte-Carlo size for abduction and correction.
pub const DEFAULT_CF_SAMPLES: usize = 1000;
const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CounterfactualError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Effect(#[from] EffectError),
    #[error("record contradicts the mechanism of `{node}` (residual {residual:e})")]
    InconsistentRecord { node: String, residual: f64 },
    #[error("record does not observe `{0}`")]
    MissingObservation(String),
    #[error("`{0}` is not a descendant of the sensitive node")]
    NotDescendant(String),
    #[error("edge {0} lies on a causal path to the outcome with unlabeled edges")]
    LabelUnknown(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("a baseline value is required for a non-binary sensitive node")]
    NoBaseline,
    #[error("sample count must be at least 1")]
    NoSamples,
}

type Result<T> = std::result::Result<T, CounterfactualError>;

/// Factual graph plus counterfactual copies of the sensitive node's
/// descendants. Each copy reuses the noise of its factual node.
#[derive(Debug, Clone)]
pub struct TwinModel {
    base: StructuralModel,
    spec: PathInterventionSpec,
    regime: Regime,
    duplicated: BTreeMap<String, String>,
}

impl TwinModel {
    pub fn base(&self) -> &StructuralModel {
        &self.base
    }

    pub fn spec(&self) -> &PathInterventionSpec {
        &self.spec
    }

    /// Factual node to counterfactual copy.
    pub fn duplicated(&self) -> &BTreeMap<String, String> {
        &self.duplicated
    }

    /// Nodes whose noise feeds both the factual node and its copy.
    pub fn shared_noise(&self) -> Vec<&str> {
        self.duplicated.keys().map(String::as_str).collect()
    }

    /// Inputs of a counterfactual copy: copies of duplicated parents, the
    /// factual node for shared parents, and `A=value` for the sensitive node.
    pub fn counterfactual_parents(&self, copy: &str) -> Result<Vec<String>> {
        let g = self.base.graph();
        let factual = self
            .duplicated
            .iter()
            .find(|(_, c)| c.as_str() == copy)
            .map(|(f, _)| f.as_str())
            .ok_or_else(|| GraphError::UnknownNode(copy.to_string()))?;
        let i = g.index_of(factual)?;
        Ok(g.parents_idx(i)
            .iter()
            .map(|&p| {
                if p == self.regime.sensitive {
                    format!(
                        "{}={}",
                        g.name(p),
                        self.regime.edge_values[i].unwrap_or(f64::NAN)
                    )
                } else {
                    self.duplicated
                        .get(g.name(p))
                        .cloned()
                        .unwrap_or_else(|| g.name(p).to_string())
                }
            })
            .collect())
    }

    /// Joint samples of both sides: base columns then copies. The factual
    /// columns are identical to `base().sample(n, seed)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let factual = self.base.sample(n, seed)?;
        let g = self.base.graph();
        let key = StreamKey::new(seed, Purpose::Sample);
        let width = g.len();
        let copies: Vec<usize> = (0..width)
            .filter(|&i| self.duplicated.contains_key(g.name(i)))
            .collect();
        let none = vec![None; width];
        let cf_rows = map_indexed(n, |r| {
            let mut stream = key.record(r as u64);
            let mut noise = vec![0.0; width];
            self.base.draw_noise(&mut stream, &mut noise);
            let mut out = vec![0.0; width];
            self.base
                .evaluate(&noise, &none, Some(&self.regime), &mut out);
            copies.iter().map(|&i| out[i]).collect::<Vec<f64>>()
        });
        let mut columns = g.names().to_vec();
        columns.extend(copies.iter().map(|&i| self.duplicated[g.name(i)].clone()));
        let rows = factual
            .rows()
            .iter()
            .zip(cf_rows)
            .map(|(f, c)| f.iter().copied().chain(c).collect())
            .collect();
        Ok(Dataset::new(columns, rows).expect("twin columns are distinct"))
    }
}

/// Wires the counterfactual side of `m` according to `spec`.
pub fn build_twin(m: &StructuralModel, spec: &PathInterventionSpec) -> Result<TwinModel> {
    let g = m.graph();
    let a = g.sensitive_idx().ok_or(GraphError::RolesUnset)?;
    let regime = spec.regime(m)?;
    let desc = g.descendant_mask(a);
    let duplicated = (0..g.len())
        .filter(|&i| desc[i])
        .map(|i| (g.name(i).to_string(), format!("{}*", g.name(i))))
        .collect();
    Ok(TwinModel {
        base: m.clone(),
        spec: spec.clone(),
        regime,
        duplicated,
    })
}

/// Posterior over the noise terms given a record.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoisePosterior {
    /// Point mass on the noise of every node constrained by the record.
    /// `free` nodes are unconstrained and keep their prior.
    Exact {
        noise: BTreeMap<String, f64>,
        free: BTreeSet<String>,
    },
    /// Weighted draws of the full noise vector (node declaration order);
    /// weights sum to one.
    Sampled {
        nodes: Vec<String>,
        samples: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

enum Posterior {
    Exact {
        noise: Vec<f64>,
        free: Vec<bool>,
    },
    Sampled {
        samples: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

fn observations(m: &StructuralModel, record: &Record) -> Result<Vec<Option<f64>>> {
    let g = m.graph();
    let mut obs = vec![None; g.len()];
    for (k, v) in record {
        obs[g.index_of(k)?] = Some(*v);
    }
    Ok(obs)
}

fn inconsistent(g: &CausalGraph, i: usize, residual: f64) -> CounterfactualError {
    CounterfactualError::InconsistentRecord {
        node: g.name(i).to_string(),
        residual,
    }
}

fn check_binary(g: &CausalGraph, i: usize, x: f64) -> Result<()> {
    if x != 0.0 && x != 1.0 {
        return Err(inconsistent(g, i, x));
    }
    Ok(())
}

fn infer(
    m: &StructuralModel,
    obs: &[Option<f64>],
    n_samples: usize,
    seed: u64,
) -> Result<Posterior> {
    let g = m.graph();
    let n = g.len();
    let a = g.sensitive_idx();
    let a_desc = a
        .map(|a| g.descendant_mask(a))
        .unwrap_or_else(|| vec![false; n]);
    let mut observed_below = vec![false; n];
    for &i in g.topological_order().iter().rev() {
        observed_below[i] = g
            .children_idx(i)
            .iter()
            .any(|&c| obs[c].is_some() || observed_below[c]);
    }
    for i in 0..n {
        if obs[i].is_some() {
            if let Law::Expr { .. } = m.law(i) {
                if !m.mech(i).is_additive() {
                    return Err(CounterfactualError::Unsupported(format!(
                        "cannot abduct the noise of `{}`: its formula is not additive in eps",
                        g.name(i)
                    )));
                }
            }
        }
    }
    let exact = (0..n).all(|i| match obs[i] {
        None => !observed_below[i],
        Some(_) => !(matches!(m.law(i), Law::Bernoulli { .. }) && a_desc[i]),
    });

    if exact {
        let mut noise = vec![0.0; n];
        let mut free = vec![false; n];
        for &i in g.topological_order() {
            let Some(x) = obs[i] else {
                free[i] = true;
                continue;
            };
            let parent = |p: usize| obs[p].expect("parents of observed nodes are observed here");
            noise[i] = match m.law(i) {
                Law::Bernoulli { .. } => {
                    check_binary(g, i, x)?;
                    let p = m.prob_one(i, parent);
                    match (x == 1.0, p) {
                        (true, p) if p > 0.0 => p / 2.0,
                        (false, p) if p < 1.0 => (1.0 + p) / 2.0,
                        _ => return Err(inconsistent(g, i, x - p)),
                    }
                }
                Law::Point(v) => {
                    if (x - v).abs() > TOLERANCE {
                        return Err(inconsistent(g, i, x - v));
                    }
                    0.0
                }
                Law::Linear { sigma, .. } | Law::Expr { sigma, .. } => {
                    let eps = x - m.structural_part(i, parent);
                    if *sigma == 0.0 && eps.abs() > TOLERANCE {
                        return Err(inconsistent(g, i, eps));
                    }
                    eps
                }
            };
        }
        return Ok(Posterior::Exact { noise, free });
    }

    if n_samples == 0 {
        return Err(CounterfactualError::NoSamples);
    }
    for i in 0..n {
        if let Some(x) = obs[i] {
            if matches!(m.law(i), Law::Bernoulli { .. }) {
                check_binary(g, i, x)?;
            }
        }
    }
    let key = StreamKey::new(seed, Purpose::Abduction);
    let draws: Vec<(Vec<f64>, f64)> = map_indexed(n_samples, |s| {
        let mut stream = key.record(s as u64);
        let mut prior = vec![0.0; n];
        m.draw_noise(&mut stream, &mut prior);
        let mut noise = prior.clone();
        let mut vals = vec![0.0; n];
        let mut log_w = 0.0;
        for &i in g.topological_order() {
            let parent = |p: usize| vals[p];
            let Some(x) = obs[i] else {
                vals[i] = m.node_value(i, parent, noise[i]);
                continue;
            };
            match m.law(i) {
                Law::Bernoulli { .. } => {
                    let p = m.prob_one(i, parent);
                    if x == 1.0 {
                        log_w += p.ln();
                        noise[i] = prior[i] * p;
                    } else {
                        log_w += (1.0 - p).ln();
                        noise[i] = p + prior[i] * (1.0 - p);
                    }
                }
                Law::Point(v) => {
                    if (x - v).abs() > TOLERANCE {
                        log_w = f64::NEG_INFINITY;
                    }
                }
                Law::Linear { sigma, .. } | Law::Expr { sigma, .. } => {
                    let eps = x - m.structural_part(i, parent);
                    noise[i] = eps;
                    if *sigma > 0.0 {
                        log_w -= 0.5 * (eps / sigma).powi(2) + sigma.ln();
                    } else if eps.abs() > TOLERANCE {
                        log_w = f64::NEG_INFINITY;
                    }
                }
            }
            vals[i] = x;
        }
        (noise, log_w)
    });
    let max = draws.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        let first = (0..n).find(|&i| obs[i].is_some()).unwrap_or(0);
        return Err(inconsistent(g, first, f64::INFINITY));
    }
    let raw: Vec<f64> = draws.iter().map(|d| (d.1 - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let samples = draws.into_iter().map(|d| d.0).collect();
    Ok(Posterior::Sampled { samples, weights })
}

/// Posterior over the noise of every node given a (possibly partial)
/// record. Exact when every unobserved node lacks observed descendants,
/// observed continuous nodes are additive, and no observed Bernoulli node
/// descends from the sensitive node; otherwise likelihood-weighted samples.
pub fn abduct(
    m: &StructuralModel,
    record: &Record,
    n_samples: usize,
    seed: u64,
) -> Result<NoisePosterior> {
    let g = m.graph();
    if let Some(a) = g.sensitive() {
        if !record.contains_key(a) {
            return Err(CounterfactualError::MissingObservation(a.to_string()));
        }
    }
    let obs = observations(m, record)?;
    Ok(match infer(m, &obs, n_samples, seed)? {
        Posterior::Exact { noise, free } => NoisePosterior::Exact {
            noise: (0..g.len())
                .filter(|&i| !free[i] && m.stochastic(i))
                .map(|i| (g.name(i).to_string(), noise[i]))
                .collect(),
            free: (0..g.len())
                .filter(|&i| free[i])
                .map(|i| g.name(i).to_string())
                .collect(),
        },
        Posterior::Sampled { samples, weights } => NoisePosterior::Sampled {
            nodes: g.names().to_vec(),
            samples,
            weights,
        },
    })
}

/// Summary of a counterfactual quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub mean: f64,
    pub std_error: f64,
    /// The mean is exact (no sampling error).
    pub exact: bool,
    /// Set when the quantity is fully determined by the record.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<f64>,
    pub n_samples: usize,
    #[serde(skip)]
    pub samples: Vec<f64>,
    #[serde(skip)]
    pub weights: Vec<f64>,
}

impl Outcome {
    fn point(v: f64) -> Self {
        Outcome {
            mean: v,
            std_error: 0.0,
            exact: true,
            point: Some(v),
            n_samples: 0,
            samples: vec![v],
            weights: vec![1.0],
        }
    }

    fn weighted(samples: Vec<f64>, weights: Vec<f64>) -> Self {
        let mean: f64 = samples.iter().zip(&weights).map(|(v, w)| v * w).sum();
        let spread: f64 = samples
            .iter()
            .zip(&weights)
            .map(|(v, w)| (w * (v - mean)).powi(2))
            .sum();
        Outcome {
            mean,
            std_error: spread.sqrt(),
            exact: false,
            point: None,
            n_samples: samples.len(),
            samples,
            weights,
        }
    }
}

/// Monte-Carlo controls for counterfactual queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sampling {
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            n_samples: DEFAULT_CF_SAMPLES,
            seed: 0,
        }
    }
}

/// Distribution of `target` on the counterfactual side of the twin network
/// built from `spec`, given the record.
pub fn counterfactual_outcome(
    m: &StructuralModel,
    record: &Record,
    spec: &PathInterventionSpec,
    target: &str,
    sampling: Sampling,
) -> Result<Outcome> {
    let g = m.graph();
    let a = g.sensitive_idx().ok_or(GraphError::RolesUnset)?;
    let t = g.index_of(target)?;
    if !record.contains_key(g.name(a)) {
        return Err(CounterfactualError::MissingObservation(
            g.name(a).to_string(),
        ));
    }
    let regime = spec.regime(m)?;
    let obs = observations(m, record)?;
    let desc = g.descendant_mask(a);
    let forced: Vec<Option<f64>> = (0..g.len())
        .map(|i| if desc[i] { None } else { obs[i] })
        .collect();
    let eval = |noise: &[f64]| {
        let mut out = vec![0.0; g.len()];
        m.evaluate(noise, &forced, Some(&regime), &mut out);
        out[t]
    };

    match infer(m, &obs, sampling.n_samples, sampling.seed)? {
        Posterior::Exact { noise, free } => {
            let anc = g.ancestor_mask(t);
            let relevant: Vec<usize> = (0..g.len())
                .filter(|&i| free[i] && (i == t || anc[i]))
                .collect();
            let value = eval(&noise);
            if relevant.iter().all(|&i| !m.stochastic(i)) {
                return Ok(Outcome::point(value));
            }
            let affine = relevant
                .iter()
                .all(|&i| matches!(m.law(i), Law::Linear { .. } | Law::Point(_)));
            let additive_target = relevant.iter().all(|&i| i == t || !m.stochastic(i))
                && !matches!(
                    m.law(t),
                    Law::Expr {
                        explicit_eps: true,
                        ..
                    }
                );
            if affine || additive_target {
                // affine in zero-mean free noise: the mean sits at zero noise
                return Ok(Outcome {
                    point: None,
                    ..Outcome::point(value)
                });
            }
            if sampling.n_samples < 2 {
                return Err(CounterfactualError::NoSamples);
            }
            let key = StreamKey::new(sampling.seed, Purpose::Prior);
            let width = g.len();
            let samples = map_indexed(sampling.n_samples, |s| {
                let mut prior = vec![0.0; width];
                m.draw_noise(&mut key.record(s as u64), &mut prior);
                let mixed: Vec<f64> = (0..width)
                    .map(|i| if free[i] { prior[i] } else { noise[i] })
                    .collect();
                eval(&mixed)
            });
            let w = 1.0 / samples.len() as f64;
            let weights = vec![w; samples.len()];
            let mut out = Outcome::weighted(samples, weights);
            let n = out.n_samples as f64;
            // unweighted draws: use the unbiased variance
            let ss = sum_rows(out.samples.len(), 1, |k, acc| {
                acc[0] = (out.samples[k] - out.mean).powi(2)
            })[0];
            out.std_error = (ss / (n - 1.0) / n).sqrt();
            Ok(out)
        }
        Posterior::Sampled { samples, weights } => {
            let values = map_indexed(samples.len(), |k| eval(&samples[k]));
            Ok(Outcome::weighted(values, weights))
        }
    }
}

/// Value of a descendant of the sensitive node with the spec's regime
/// applied, keeping the record's noise. Closed form when abduction is exact.
pub fn corrected_descendant(
    m: &StructuralModel,
    record: &Record,
    node: &str,
    spec: &PathInterventionSpec,
    sampling: Sampling,
) -> Result<Outcome> {
    let g = m.graph();
    let a = g.sensitive_idx().ok_or(GraphError::RolesUnset)?;
    if !g.descendant_mask(a)[g.index_of(node)?] {
        return Err(CounterfactualError::NotDescendant(node.to_string()));
    }
    counterfactual_outcome(m, record, spec, node, sampling)
}

/// Source of the unfair outgoing edges of the sensitive node.
#[derive(Debug, Clone, PartialEq)]
pub enum UnfairEdges {
    /// An edge `A -> X` is unfair when some causal path to the outcome that
    /// starts with it is unfair.
    FromLabels,
    /// Children of the sensitive node whose incoming edge is unfair.
    Explicit(BTreeSet<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FairPredictOptions {
    /// Value fed along unfair edges; defaults to `1 - a` for binary `A`.
    pub baseline: Option<f64>,
    /// Condition on the record's outcome value as well.
    pub include_outcome: bool,
    pub sampling: Sampling,
}

/// Unfair outgoing edges of the sensitive node derived from edge labels.
pub fn unfair_out_edges(g: &CausalGraph) -> Result<BTreeSet<String>> {
    let (Some(a), Some(y)) = (g.sensitive(), g.outcome()) else {
        return Err(GraphError::RolesUnset.into());
    };
    let paths = enumerate_paths(g, a, y)?;
    let mut unfair = BTreeSet::new();
    for &c in g.children_idx(g.index_of(a)?) {
        let child = g.name(c);
        let labels: Vec<FairnessLabel> = paths
            .iter()
            .filter(|p| p.is_causal() && p.nodes()[1] == child)
            .map(|p| p.fairness(g))
            .collect();
        if labels.contains(&FairnessLabel::Unfair) {
            unfair.insert(child.to_string());
        } else if labels.contains(&FairnessLabel::Unknown) {
            return Err(CounterfactualError::LabelUnknown(format!("{a} -> {child}")));
        }
    }
    Ok(unfair)
}

/// Path-specific counterfactually fair prediction of the outcome: unfair
/// edges out of the sensitive node carry the baseline value, fair ones the
/// observed value, and the record's noise is kept.
pub fn fair_predict(
    m: &StructuralModel,
    record: &Record,
    unfair: &UnfairEdges,
    options: FairPredictOptions,
) -> Result<Outcome> {
    let g = m.graph();
    let (Some(a), Some(y)) = (g.sensitive(), g.outcome()) else {
        return Err(GraphError::RolesUnset.into());
    };
    let a_value = *record
        .get(a)
        .ok_or_else(|| CounterfactualError::MissingObservation(a.to_string()))?;
    let unfair = match unfair {
        UnfairEdges::FromLabels => unfair_out_edges(g)?,
        UnfairEdges::Explicit(set) => set.clone(),
    };
    let baseline = match options.baseline {
        Some(b) => b,
        None if m.mechanism(a)?.is_bernoulli() && (a_value == 0.0 || a_value == 1.0) => {
            1.0 - a_value
        }
        None => return Err(CounterfactualError::NoBaseline),
    };
    let children = g
        .children_idx(g.index_of(a)?)
        .iter()
        .map(|&c| g.name(c).to_string());
    let active: Vec<String> = children.filter(|c| !unfair.contains(c)).collect();
    let spec = PathInterventionSpec::new(baseline, a_value, active);
    let mut observed = record.clone();
    if !options.include_outcome {
        observed.remove(y);
    }
    counterfactual_outcome(m, &observed, &spec, y, options.sampling)
}
