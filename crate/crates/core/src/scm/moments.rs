use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use super::{Law, ModelError, Regime, StructuralModel};

const MAX_BERNOULLI: usize = 20;
const MIN_EVENT_PROBABILITY: f64 = 1e-12;

/// Exact mean vector and covariance matrix, in node declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub nodes: Vec<String>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// A factor with `cov = factor * factor^T`, one row per node.
    pub factor: DMatrix<f64>,
}

impl Moments {
    pub fn index(&self, node: &str) -> Result<usize, ModelError> {
        self.nodes
            .iter()
            .position(|n| n == node)
            .ok_or_else(|| crate::graph::GraphError::UnknownNode(node.to_string()).into())
    }

    pub fn mean_of(&self, node: &str) -> Result<f64, ModelError> {
        Ok(self.mean[self.index(node)?])
    }

    pub fn cov_of(&self, a: &str, b: &str) -> Result<f64, ModelError> {
        Ok(self.cov[(self.index(a)?, self.index(b)?)])
    }
}

/// Checks that exact enumeration applies: no expression mechanisms, every
/// Bernoulli node has only Bernoulli or constant parents, and few enough
/// Bernoulli nodes to enumerate. Returns the Bernoulli nodes in topological
/// order.
pub(crate) fn exact_support(m: &StructuralModel) -> Result<Vec<usize>, ModelError> {
    let g = m.graph();
    let mut bern = Vec::new();
    for &i in g.topological_order() {
        match m.law(i) {
            Law::Expr { .. } => {
                return Err(ModelError::UnsupportedMechanism(format!(
                    "node `{}` uses an expression mechanism",
                    g.name(i)
                )))
            }
            Law::Bernoulli { .. } => {
                if let Some(&p) = g
                    .parents_idx(i)
                    .iter()
                    .find(|&&p| !matches!(m.law(p), Law::Bernoulli { .. } | Law::Point(_)))
                {
                    return Err(ModelError::UnsupportedMechanism(format!(
                        "Bernoulli node `{}` has continuous parent `{}`",
                        g.name(i),
                        g.name(p)
                    )));
                }
                bern.push(i);
            }
            _ => {}
        }
    }
    if bern.len() > MAX_BERNOULLI {
        return Err(ModelError::UnsupportedMechanism(format!(
            "{} Bernoulli nodes exceed the enumeration limit of {MAX_BERNOULLI}",
            bern.len()
        )));
    }
    Ok(bern)
}

/// Visits every Bernoulli configuration with its probability and the
/// conditional mean of every node. `conditions` restrict the enumeration to
/// configurations matching the given Bernoulli values.
fn enumerate(
    m: &StructuralModel,
    regime: Option<&Regime>,
    conditions: &[(usize, f64)],
    mut visit: impl FnMut(f64, &[f64]),
) -> Result<(), ModelError> {
    let bern = exact_support(m)?;
    let g = m.graph();
    for &(c, _) in conditions {
        if !matches!(m.law(c), Law::Bernoulli { .. }) {
            return Err(ModelError::UnsupportedMechanism(format!(
                "can only condition on Bernoulli nodes, not `{}`",
                g.name(c)
            )));
        }
        if let Some(r) = regime {
            if g.descendant_mask(r.sensitive)[c] {
                return Err(ModelError::InvalidQuery(format!(
                    "cannot condition on `{}`, a descendant of the intervened node",
                    g.name(c)
                )));
            }
        }
    }
    let mut bit_of = vec![usize::MAX; g.len()];
    for (k, &i) in bern.iter().enumerate() {
        bit_of[i] = k;
    }
    let mut x = vec![0.0; g.len()];
    'configs: for config in 0u32..(1u32 << bern.len()) {
        let mut weight = 1.0;
        for &i in g.topological_order() {
            let vals = &x;
            let lookup = |p: usize| match regime {
                Some(r) if p == r.sensitive => r.edge_values[i].unwrap_or(vals[p]),
                _ => vals[p],
            };
            let v = match m.law(i) {
                Law::Bernoulli { .. } => {
                    let bit = (config >> bit_of[i]) & 1;
                    let p = m.prob_one(i, lookup);
                    weight *= if bit == 1 { p } else { 1.0 - p };
                    if weight == 0.0 {
                        continue 'configs;
                    }
                    bit as f64
                }
                _ => m.structural_part(i, lookup),
            };
            x[i] = v;
        }
        if conditions.iter().any(|&(c, v)| x[c] != v) {
            continue;
        }
        visit(weight, &x);
    }
    Ok(())
}

/// Exact `E[target]` in the world defined by `regime`, given Bernoulli
/// `conditions`, together with the probability of the conditioning event.
pub(crate) fn exact_expectation(
    m: &StructuralModel,
    target: usize,
    regime: Option<&Regime>,
    conditions: &[(usize, f64)],
) -> Result<(f64, f64), ModelError> {
    let (mut total, mut acc) = (0.0, 0.0);
    enumerate(m, regime, conditions, |w, x| {
        total += w;
        acc += w * x[target];
    })?;
    if total < MIN_EVENT_PROBABILITY {
        return Err(ModelError::DegenerateConditioning(total));
    }
    Ok((acc / total, total))
}

// Noise loadings: row i expresses node i's zero-mean Gaussian part as a
// combination of the independent noise terms of every node.
fn loadings(m: &StructuralModel) -> DMatrix<f64> {
    let n = m.graph().len();
    let mut l = DMatrix::zeros(n, n);
    for &i in m.graph().topological_order() {
        if let Law::Linear { coef, sigma, .. } = m.law(i) {
            for &(p, c) in coef {
                let row = l.row(p).clone_owned() * c;
                let mut target = l.row_mut(i);
                target += row;
            }
            l[(i, i)] = *sigma;
        }
    }
    l
}

/// Exact moments of a model whose continuous nodes are linear-Gaussian and
/// whose Bernoulli nodes have only Bernoulli parents, optionally conditioned
/// on values of Bernoulli nodes. Mixture moments are combined across all
/// Bernoulli configurations.
pub fn population_moments(
    m: &StructuralModel,
    condition: &BTreeMap<String, f64>,
) -> Result<Moments, ModelError> {
    let g = m.graph();
    let conditions: Vec<(usize, f64)> = condition
        .iter()
        .map(|(k, v)| Ok((g.index_of(k)?, *v)))
        .collect::<Result<_, ModelError>>()?;
    let n = g.len();
    let mut configs: Vec<(f64, DVector<f64>)> = Vec::new();
    enumerate(m, None, &conditions, |w, x| {
        configs.push((w, DVector::from_column_slice(x)))
    })?;
    let total: f64 = configs.iter().map(|(w, _)| w).sum();
    if total < MIN_EVENT_PROBABILITY {
        return Err(ModelError::DegenerateConditioning(total));
    }
    let mut mean = DVector::zeros(n);
    for (w, x) in &configs {
        mean += x * (*w / total);
    }
    let l = loadings(m);
    let mut factor = DMatrix::zeros(n, n + configs.len());
    factor.columns_mut(0, n).copy_from(&l);
    for (k, (w, x)) in configs.iter().enumerate() {
        let d = (x - &mean) * (*w / total).sqrt();
        factor.column_mut(n + k).copy_from(&d);
    }
    let cov = &factor * factor.transpose();
    Ok(Moments {
        nodes: g.names().to_vec(),
        mean,
        cov,
        factor,
    })
}

fn submatrix(cov: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| cov[(rows[r], cols[c])])
}

fn full_rank(a: &DMatrix<f64>) -> bool {
    if a.nrows() == 0 {
        return true;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    max > 0.0 && sv.min() > 1e-10 * max
}

/// Coefficients of the best linear predictor of `target` from `inputs`
/// under the model's exact second moments (centered normal equations).
pub fn least_squares_predictor(
    m: &StructuralModel,
    target: &str,
    inputs: &BTreeSet<String>,
) -> Result<BTreeMap<String, f64>, ModelError> {
    if inputs.contains(target) {
        return Err(ModelError::InvalidQuery(format!(
            "target `{target}` is also an input"
        )));
    }
    let g = m.graph();
    let t = g.index_of(target)?;
    let xs = g.indices_of(inputs)?;
    let mom = population_moments(m, &BTreeMap::new())?;
    let sxx = submatrix(&mom.cov, &xs, &xs);
    let sxy = submatrix(&mom.cov, &xs, &[t]);
    if !full_rank(&sxx) {
        return Err(ModelError::SingularSystem);
    }
    let theta = sxx.lu().solve(&sxy).ok_or(ModelError::SingularSystem)?;
    Ok(inputs.iter().cloned().zip(theta.iter().copied()).collect())
}

/// Partial correlation of `u` and `v` given `z`, from exact moments. Returns
/// 0 when either conditional variance vanishes.
///
/// Works on the covariance factor: the rows of `u` and `v` are projected off
/// the row space of `z`, which avoids inverting an ill-conditioned block.
pub fn partial_correlation(
    mom: &Moments,
    u: &str,
    v: &str,
    z: &BTreeSet<String>,
) -> Result<f64, ModelError> {
    let ui = mom.index(u)?;
    let vi = mom.index(v)?;
    let zs: Vec<usize> = z.iter().map(|n| mom.index(n)).collect::<Result<_, _>>()?;
    let f = &mom.factor;
    let mut ru = f.row(ui).transpose();
    let mut rv = f.row(vi).transpose();
    let (nu, nv) = (ru.norm(), rv.norm());
    if !zs.is_empty() {
        let fz = DMatrix::from_fn(f.ncols(), zs.len(), |r, c| f[(zs[c], r)]);
        let svd = fz.svd(true, false);
        let basis = svd.u.expect("left singular vectors requested");
        let max = svd.singular_values.max();
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s > 1e-12 * max {
                let q = basis.column(k);
                ru -= q * q.dot(&ru);
                rv -= q * q.dot(&rv);
            }
        }
    }
    let (a, b) = (ru.norm(), rv.norm());
    if a <= 1e-12 * nu || b <= 1e-12 * nv {
        return Ok(0.0);
    }
    Ok(ru.dot(&rv) / (a * b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphSpec;
    use crate::scm::{build_model, Mechanism};

    fn music(alpha: f64, beta: f64, gamma: f64) -> StructuralModel {
        let g = GraphSpec::new()
            .nodes(["A", "M", "X", "Y"])
            .edge("A", "X")
            .edge("M", "X")
            .edge("M", "Y")
            .build()
            .unwrap();
        let mechs = [
            ("A", Mechanism::linear(0.0, &[], 1.0)),
            ("M", Mechanism::linear(0.0, &[], 1.0)),
            (
                "X",
                Mechanism::linear(0.0, &[("A", alpha), ("M", beta)], 0.0),
            ),
            ("Y", Mechanism::linear(0.0, &[("M", gamma)], 0.0)),
        ];
        build_model(
            g,
            mechs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        )
        .unwrap()
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn music_covariances() {
        let mom = population_moments(&music(1.0, 2.0, 3.0), &BTreeMap::new()).unwrap();
        assert_eq!(mom.cov_of("X", "Y").unwrap(), 6.0);
        assert_eq!(mom.cov_of("X", "X").unwrap(), 5.0);
        assert_eq!(mom.cov_of("A", "Y").unwrap(), 0.0);
    }

    #[test]
    fn music_predictors() {
        let m = music(1.0, 2.0, 3.0);
        let one = least_squares_predictor(&m, "Y", &set(&["X"])).unwrap();
        assert!((one["X"] - 1.2).abs() < 1e-12);
        let two = least_squares_predictor(&m, "Y", &set(&["X", "A"])).unwrap();
        assert!((two["X"] - 1.5).abs() < 1e-12);
        assert!((two["A"] + 1.5).abs() < 1e-12);
    }

    #[test]
    fn independent_target_gets_zero_weights() {
        let m = music(1.0, 2.0, 3.0);
        let theta = least_squares_predictor(&m, "Y", &set(&["A"])).unwrap();
        assert_eq!(theta["A"], 0.0);
    }

    #[test]
    fn collinear_inputs_are_singular() {
        let m = music(0.0, 2.0, 3.0);
        // X = 2M exactly, so {X, M} is collinear
        assert_eq!(
            least_squares_predictor(&m, "Y", &set(&["X", "M"])).unwrap_err(),
            ModelError::SingularSystem
        );
    }

    #[test]
    fn zero_coefficients_give_diagonal_noise() {
        let g = GraphSpec::new()
            .nodes(["A", "B"])
            .edge("A", "B")
            .build()
            .unwrap();
        let mechs = [
            ("A", Mechanism::linear(1.0, &[], 2.0)),
            ("B", Mechanism::linear(-1.0, &[("A", 0.0)], 0.5)),
        ];
        let m = build_model(
            g,
            mechs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        )
        .unwrap();
        let mom = population_moments(&m, &BTreeMap::new()).unwrap();
        assert_eq!(
            mom.cov,
            DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.25])
        );
        assert_eq!(mom.mean.as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn chain_variance() {
        let g = GraphSpec::new()
            .nodes(["A", "Y"])
            .edge("A", "Y")
            .build()
            .unwrap();
        let mechs = [
            ("A", Mechanism::linear(0.0, &[], 1.0)),
            ("Y", Mechanism::linear(0.0, &[("A", 2.0)], 1.0)),
        ];
        let m = build_model(
            g,
            mechs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        )
        .unwrap();
        let mom = population_moments(&m, &BTreeMap::new()).unwrap();
        assert_eq!(mom.cov_of("Y", "Y").unwrap(), 5.0);
    }

    #[test]
    fn bernoulli_mixture_moments() {
        // Y = 3A + eps with A ~ Bern(0.25): var = 9 * 0.1875 + 1
        let g = GraphSpec::new()
            .nodes(["A", "Y"])
            .edge("A", "Y")
            .build()
            .unwrap();
        let mechs = [
            ("A", Mechanism::bernoulli(0.25)),
            ("Y", Mechanism::linear(0.0, &[("A", 3.0)], 1.0)),
        ];
        let m = build_model(
            g,
            mechs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        )
        .unwrap();
        let mom = population_moments(&m, &BTreeMap::new()).unwrap();
        assert!((mom.mean_of("Y").unwrap() - 0.75).abs() < 1e-15);
        assert!((mom.cov_of("Y", "Y").unwrap() - (9.0 * 0.1875 + 1.0)).abs() < 1e-12);
        assert!((mom.cov_of("A", "Y").unwrap() - 3.0 * 0.1875).abs() < 1e-12);
        let given = population_moments(&m, &[("A".to_string(), 1.0)].into()).unwrap();
        assert_eq!(given.mean_of("Y").unwrap(), 3.0);
        assert_eq!(given.cov_of("Y", "Y").unwrap(), 1.0);
    }

    #[test]
    fn expressions_are_unsupported() {
        let g = GraphSpec::new()
            .nodes(["A", "Y"])
            .edge("A", "Y")
            .build()
            .unwrap();
        let mechs = [
            ("A", Mechanism::bernoulli(0.5)),
            ("Y", Mechanism::expression("tanh(A)", 1.0).unwrap()),
        ];
        let m = build_model(
            g,
            mechs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        )
        .unwrap();
        assert!(matches!(
            population_moments(&m, &BTreeMap::new()),
            Err(ModelError::UnsupportedMechanism(_))
        ));
    }

    #[test]
    fn partial_correlation_of_collider() {
        let mom = population_moments(&music(1.0, 2.0, 3.0), &BTreeMap::new()).unwrap();
        assert_eq!(
            partial_correlation(&mom, "A", "Y", &BTreeSet::new()).unwrap(),
            0.0
        );
        assert!(
            partial_correlation(&mom, "A", "Y", &set(&["X"]))
                .unwrap()
                .abs()
                > 0.1
        );
    }
}
