//! Structural causal models over a [`CausalGraph`]: mechanisms, ancestral
//! sampling, interventions, structural evaluation and exact moments.

mod moments;

pub(crate) use moments::{exact_expectation, exact_support};
pub use moments::{least_squares_predictor, partial_correlation, population_moments, Moments};

use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{Dataset, Provenance};
use crate::expr::{sigmoid, Compiled, Expr, ExprError};
use crate::graph::{CausalGraph, GraphError};
use crate::parallel::map_indexed;
use crate::rng::{Purpose, StreamKey};

/// Node name to value.
pub type Record = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("node `{0}` has no mechanism")]
    MissingMechanism(String),
    #[error("node `{node}`: {detail}")]
    ParentMismatch { node: String, detail: String },
    #[error("node `{node}`: {detail}")]
    BadParameter { node: String, detail: String },
    #[error("unsupported mechanism: {0}")]
    UnsupportedMechanism(String),
    #[error("inputs are collinear; the normal equations are singular")]
    SingularSystem,
    #[error("no noise value for stochastic node `{0}`")]
    MissingNoise(String),
    #[error("conditioning event has probability {0:e}")]
    DegenerateConditioning(f64),
    #[error("{0}")]
    InvalidQuery(String),
}

/// How a node's value is produced from its parents and its noise.
#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    BernoulliRoot {
        p: f64,
    },
    /// `P(X = 1 | pa) = sigmoid(intercept + sum coef * parent)`.
    BernoulliLogistic {
        intercept: f64,
        coefficients: BTreeMap<String, f64>,
    },
    LinearGaussian {
        intercept: f64,
        coefficients: BTreeMap<String, f64>,
        noise_std: f64,
    },
    /// `value = f(pa) + eps` when the formula does not mention `eps`,
    /// otherwise `value = f(pa, eps)`; `eps ~ N(0, noise_std^2)`.
    Expression {
        formula: Expr,
        noise_std: f64,
    },
    /// Result of an intervention.
    PointMass {
        value: f64,
    },
}

fn coef_map(coefficients: &[(&str, f64)]) -> BTreeMap<String, f64> {
    coefficients
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect()
}

impl Mechanism {
    pub fn bernoulli(p: f64) -> Self {
        Mechanism::BernoulliRoot { p }
    }

    pub fn logistic(intercept: f64, coefficients: &[(&str, f64)]) -> Self {
        Mechanism::BernoulliLogistic {
            intercept,
            coefficients: coef_map(coefficients),
        }
    }

    pub fn linear(intercept: f64, coefficients: &[(&str, f64)], noise_std: f64) -> Self {
        Mechanism::LinearGaussian {
            intercept,
            coefficients: coef_map(coefficients),
            noise_std,
        }
    }

    pub fn expression(formula: &str, noise_std: f64) -> Result<Self, ExprError> {
        Ok(Mechanism::Expression {
            formula: Expr::parse(formula)?,
            noise_std,
        })
    }

    pub fn is_bernoulli(&self) -> bool {
        matches!(
            self,
            Mechanism::BernoulliRoot { .. } | Mechanism::BernoulliLogistic { .. }
        )
    }

    pub fn noise_std(&self) -> f64 {
        match self {
            Mechanism::LinearGaussian { noise_std, .. }
            | Mechanism::Expression { noise_std, .. } => *noise_std,
            _ => 0.0,
        }
    }

    /// Noise enters as `f(pa) + eps`.
    pub fn is_additive(&self) -> bool {
        match self {
            Mechanism::LinearGaussian { .. } => true,
            Mechanism::Expression { formula, .. } => formula.is_additive(),
            _ => false,
        }
    }

    fn referenced(&self) -> BTreeSet<String> {
        match self {
            Mechanism::BernoulliLogistic { coefficients, .. }
            | Mechanism::LinearGaussian { coefficients, .. } => {
                coefficients.keys().cloned().collect()
            }
            Mechanism::Expression { formula, .. } => formula.variables(),
            Mechanism::BernoulliRoot { .. } | Mechanism::PointMass { .. } => BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Law {
    Bernoulli {
        root_p: Option<f64>,
        intercept: f64,
        coef: Vec<(usize, f64)>,
    },
    Linear {
        intercept: f64,
        coef: Vec<(usize, f64)>,
        sigma: f64,
    },
    Expr {
        f: Compiled,
        sigma: f64,
        explicit_eps: bool,
    },
    Point(f64),
}

/// Per-child value of the sensitive node, used for path-specific regimes.
/// Children without an entry read the sensitive node's own value.
#[derive(Debug, Clone)]
pub(crate) struct Regime {
    pub sensitive: usize,
    pub edge_values: Vec<Option<f64>>,
}

impl Regime {
    pub(crate) fn new(
        m: &StructuralModel,
        sensitive: usize,
        values: impl IntoIterator<Item = (usize, f64)>,
    ) -> Self {
        let mut edge_values = vec![None; m.graph.len()];
        for (child, v) in values {
            edge_values[child] = Some(v);
        }
        Regime {
            sensitive,
            edge_values,
        }
    }

    /// `do(A = value)` as seen by every child.
    pub(crate) fn all(m: &StructuralModel, sensitive: usize, value: f64) -> Self {
        let children = m.graph.children_idx(sensitive).iter().map(|&c| (c, value));
        Self::new(m, sensitive, children)
    }
}

/// A validated structural model. Immutable after construction.
#[derive(Debug, Clone)]
pub struct StructuralModel {
    graph: CausalGraph,
    mechanisms: Vec<Mechanism>,
    laws: Vec<Law>,
}

impl PartialEq for StructuralModel {
    fn eq(&self, other: &Self) -> bool {
        self.graph == other.graph && self.mechanisms == other.mechanisms
    }
}

/// Binds one mechanism to every node of `g`, checking parameters and that
/// every mechanism references exactly the node's graph parents.
pub fn build_model(
    g: CausalGraph,
    mechanisms: BTreeMap<String, Mechanism>,
) -> Result<StructuralModel, ModelError> {
    for name in mechanisms.keys() {
        g.index_of(name)?;
    }
    let mut mechs = Vec::with_capacity(g.len());
    let mut laws = Vec::with_capacity(g.len());
    for i in 0..g.len() {
        let name = g.name(i);
        let mech = mechanisms
            .get(name)
            .cloned()
            .ok_or_else(|| ModelError::MissingMechanism(name.to_string()))?;
        laws.push(compile(&g, i, &mech)?);
        mechs.push(mech);
    }
    Ok(StructuralModel {
        graph: g,
        mechanisms: mechs,
        laws,
    })
}

fn compile(g: &CausalGraph, i: usize, mech: &Mechanism) -> Result<Law, ModelError> {
    let node = g.name(i).to_string();
    let bad = |detail: String| ModelError::BadParameter {
        node: node.clone(),
        detail,
    };
    let finite = |what: &str, v: f64| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(bad(format!("{what} must be finite, got {v}")))
        }
    };
    let sigma_ok = |s: f64| {
        if s.is_finite() && s >= 0.0 {
            Ok(())
        } else {
            Err(bad(format!(
                "noise standard deviation must be >= 0, got {s}"
            )))
        }
    };

    let parents: BTreeSet<String> = g
        .parents_idx(i)
        .iter()
        .map(|&p| g.name(p).to_string())
        .collect();
    if !matches!(mech, Mechanism::PointMass { .. }) {
        let referenced = mech.referenced();
        if referenced != parents {
            let extra: Vec<&String> = referenced.difference(&parents).collect();
            let missing: Vec<&String> = parents.difference(&referenced).collect();
            let detail = if !extra.is_empty() {
                format!("mechanism references non-parent(s) {extra:?}")
            } else {
                format!("graph parent(s) {missing:?} missing from the mechanism")
            };
            return Err(ModelError::ParentMismatch { node, detail });
        }
    }
    let coef = |c: &BTreeMap<String, f64>| -> Result<Vec<(usize, f64)>, ModelError> {
        c.iter()
            .map(|(k, v)| {
                finite(&format!("coefficient on {k}"), *v)?;
                Ok((g.index_of(k)?, *v))
            })
            .collect()
    };

    Ok(match mech {
        Mechanism::BernoulliRoot { p } => {
            if !(0.0..=1.0).contains(p) {
                return Err(bad(format!("probability must lie in [0, 1], got {p}")));
            }
            Law::Bernoulli {
                root_p: Some(*p),
                intercept: 0.0,
                coef: Vec::new(),
            }
        }
        Mechanism::BernoulliLogistic {
            intercept,
            coefficients,
        } => {
            finite("intercept", *intercept)?;
            Law::Bernoulli {
                root_p: None,
                intercept: *intercept,
                coef: coef(coefficients)?,
            }
        }
        Mechanism::LinearGaussian {
            intercept,
            coefficients,
            noise_std,
        } => {
            finite("intercept", *intercept)?;
            sigma_ok(*noise_std)?;
            Law::Linear {
                intercept: *intercept,
                coef: coef(coefficients)?,
                sigma: *noise_std,
            }
        }
        Mechanism::Expression { formula, noise_std } => {
            sigma_ok(*noise_std)?;
            let f = formula
                .compile(&|name| g.index_of(name).ok())
                .map_err(|v| ModelError::ParentMismatch {
                    node: node.clone(),
                    detail: format!("unknown identifier `{v}`"),
                })?;
            Law::Expr {
                f,
                sigma: *noise_std,
                explicit_eps: formula.uses_eps(),
            }
        }
        Mechanism::PointMass { value } => {
            finite("value", *value)?;
            Law::Point(*value)
        }
    })
}

impl StructuralModel {
    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn mechanism(&self, node: &str) -> Result<&Mechanism, ModelError> {
        Ok(&self.mechanisms[self.graph.index_of(node)?])
    }

    /// Mechanisms in node declaration order.
    pub fn mechanisms(&self) -> impl Iterator<Item = (&str, &Mechanism)> {
        self.graph
            .names()
            .iter()
            .map(String::as_str)
            .zip(&self.mechanisms)
    }

    pub(crate) fn mech(&self, i: usize) -> &Mechanism {
        &self.mechanisms[i]
    }

    pub(crate) fn law(&self, i: usize) -> &Law {
        &self.laws[i]
    }

    /// Hex SHA-256 of a canonical description of the model.
    pub fn fingerprint(&self) -> String {
        let canonical = format!("{:?}|{:?}", self.graph.to_spec(), self.mechanisms);
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Replaces each assigned node's mechanism by a point mass and removes its
    /// incoming edges.
    pub fn intervene(
        &self,
        assignments: &BTreeMap<String, f64>,
    ) -> Result<StructuralModel, ModelError> {
        let targets = self.graph.indices_of(assignments.keys())?;
        let graph = self.graph.without_incoming(&targets);
        let mut mechanisms: BTreeMap<String, Mechanism> = self
            .mechanisms()
            .map(|(n, m)| (n.to_string(), m.clone()))
            .collect();
        for (name, value) in assignments {
            mechanisms.insert(name.clone(), Mechanism::PointMass { value: *value });
        }
        build_model(graph, mechanisms)
    }

    /// Nodes whose value depends on a noise term.
    pub fn is_stochastic(&self, node: &str) -> Result<bool, ModelError> {
        let i = self.graph.index_of(node)?;
        Ok(self.stochastic(i))
    }

    pub(crate) fn stochastic(&self, i: usize) -> bool {
        match &self.laws[i] {
            Law::Bernoulli { .. } => true,
            Law::Linear { sigma, .. } | Law::Expr { sigma, .. } => *sigma > 0.0,
            Law::Point(_) => false,
        }
    }

    /// Deterministic evaluation in topological order. Noise values are in
    /// the node's own units: a uniform on [0, 1) for Bernoulli nodes and the
    /// additive (or `eps`) term otherwise.
    pub fn eval_record(&self, noise: &Record, forced: &Record) -> Result<Record, ModelError> {
        let n = self.graph.len();
        let mut forced_v = vec![None; n];
        for (k, v) in forced {
            forced_v[self.graph.index_of(k)?] = Some(*v);
        }
        let mut noise_v = vec![0.0; n];
        for (k, v) in noise {
            noise_v[self.graph.index_of(k)?] = *v;
        }
        for i in 0..n {
            if forced_v[i].is_none()
                && self.stochastic(i)
                && !noise.contains_key(self.graph.name(i))
            {
                return Err(ModelError::MissingNoise(self.graph.name(i).to_string()));
            }
        }
        let mut out = vec![0.0; n];
        self.evaluate(&noise_v, &forced_v, None, &mut out);
        Ok(self.to_record(&out))
    }

    pub(crate) fn to_record(&self, values: &[f64]) -> Record {
        self.graph
            .names()
            .iter()
            .cloned()
            .zip(values.iter().copied())
            .collect()
    }

    pub(crate) fn prob_one(&self, i: usize, parent: impl Fn(usize) -> f64) -> f64 {
        match &self.laws[i] {
            Law::Bernoulli {
                root_p: Some(p), ..
            } => *p,
            Law::Bernoulli {
                intercept, coef, ..
            } => sigmoid(intercept + coef.iter().map(|&(p, c)| c * parent(p)).sum::<f64>()),
            _ => unreachable!("probability of a non-Bernoulli node"),
        }
    }

    /// `f(pa)` for additive nodes, i.e. the value with zero noise.
    pub(crate) fn structural_part(&self, i: usize, parent: impl Fn(usize) -> f64) -> f64 {
        match &self.laws[i] {
            Law::Linear {
                intercept, coef, ..
            } => intercept + coef.iter().map(|&(p, c)| c * parent(p)).sum::<f64>(),
            Law::Expr { f, .. } => f.eval(&parent, 0.0),
            Law::Point(v) => *v,
            Law::Bernoulli { .. } => unreachable!("Bernoulli nodes have no additive part"),
        }
    }

    pub(crate) fn node_value(&self, i: usize, parent: impl Fn(usize) -> f64, noise: f64) -> f64 {
        match &self.laws[i] {
            Law::Bernoulli { .. } => (noise < self.prob_one(i, parent)) as u8 as f64,
            Law::Expr {
                f,
                explicit_eps: true,
                ..
            } => f.eval(&parent, noise),
            _ => self.structural_part(i, parent) + noise,
        }
    }

    /// Draws one noise value per node from the prior.
    pub(crate) fn draw_noise(&self, stream: &mut crate::rng::RecordStream, out: &mut [f64]) {
        for (i, law) in self.laws.iter().enumerate() {
            let d = stream.next_node();
            out[i] = match law {
                Law::Bernoulli { .. } => d.uniform(),
                Law::Linear { sigma, .. } | Law::Expr { sigma, .. } => sigma * d.normal(),
                Law::Point(_) => 0.0,
            };
        }
    }

    /// Structural evaluation with optional forced values and an optional
    /// path-specific regime for the sensitive node's children.
    pub(crate) fn evaluate(
        &self,
        noise: &[f64],
        forced: &[Option<f64>],
        regime: Option<&Regime>,
        out: &mut [f64],
    ) {
        for &i in self.graph.topological_order() {
            let v = match forced[i] {
                Some(v) => v,
                None => {
                    let vals = &*out;
                    let lookup = |p: usize| match regime {
                        Some(r) if p == r.sensitive => r.edge_values[i].unwrap_or(vals[p]),
                        _ => vals[p],
                    };
                    self.node_value(i, lookup, noise[i])
                }
            };
            out[i] = v;
        }
    }

    /// Ancestral sampling of `n` records. Bit-reproducible for a given
    /// `(model, n, seed)` on any platform and for any worker count.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset, ModelError> {
        if n == 0 {
            return Err(ModelError::InvalidQuery(
                "sample size must be at least 1".into(),
            ));
        }
        let key = StreamKey::new(seed, Purpose::Sample);
        let width = self.graph.len();
        let none = vec![None; width];
        let rows = map_indexed(n, |r| {
            let mut stream = key.record(r as u64);
            let mut noise = vec![0.0; width];
            self.draw_noise(&mut stream, &mut noise);
            let mut out = vec![0.0; width];
            self.evaluate(&noise, &none, None, &mut out);
            out
        });
        let dataset =
            Dataset::new(self.graph.names().to_vec(), rows).expect("rows match the node count");
        Ok(dataset.with_provenance(Provenance {
            seed,
            model_hash: self.fingerprint(),
        }))
    }
}
