#![allow(dead_code)]

use std::collections::BTreeMap;

use fairlens::graph::{CausalGraph, GraphSpec};
use fairlens::scm::{build_model, Mechanism, StructuralModel};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub struct Draws(ChaCha8Rng);

impl Draws {
    pub fn new(seed: u64) -> Self {
        Draws(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    /// Magnitude in [0.5, 2] with a random sign, kept away from zero so that
    /// generic cancellations stay rare.
    pub fn coefficient(&mut self) -> f64 {
        let v = self.range(0.5, 2.0);
        if self.unit() < 0.5 {
            -v
        } else {
            v
        }
    }
}

/// Random DAG over `n` nodes `V0..V{n-1}` with edges only from lower to
/// higher index.
pub fn random_dag(d: &mut Draws, n: usize, density: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for j in 1..n {
        for i in 0..j {
            if d.unit() < density {
                edges.push((i, j));
            }
        }
    }
    edges
}

pub fn node_name(i: usize) -> String {
    format!("V{i}")
}

pub fn graph_of(n: usize, edges: &[(usize, usize)], roles: Option<(usize, usize)>) -> CausalGraph {
    let mut spec = GraphSpec::new().nodes((0..n).map(node_name));
    for &(i, j) in edges {
        spec = spec.edge(&node_name(i), &node_name(j));
    }
    if let Some((a, y)) = roles {
        spec = spec.sensitive(&node_name(a)).outcome(&node_name(y));
    }
    spec.build().unwrap()
}

/// Linear-Gaussian mechanisms with random coefficients on every edge of `g`.
pub fn random_linear(d: &mut Draws, g: &CausalGraph) -> StructuralModel {
    let mut mechs = BTreeMap::new();
    for i in 0..g.len() {
        let coefs: Vec<(String, f64)> = g
            .parents_idx(i)
            .iter()
            .map(|&p| (g.name(p).to_string(), d.coefficient()))
            .collect();
        let refs: Vec<(&str, f64)> = coefs.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let intercept = d.range(-1.0, 1.0);
        let sigma = d.range(0.5, 1.5);
        mechs.insert(
            g.name(i).to_string(),
            Mechanism::linear(intercept, &refs, sigma),
        );
    }
    build_model(g.clone(), mechs).unwrap()
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let sorted = |s: &[f64]| {
        let mut v = s.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

pub fn column_where(
    data: &fairlens::dataset::Dataset,
    col: &str,
    cond: &str,
    value: f64,
) -> Vec<f64> {
    let x = data.column(col).unwrap();
    let c = data.column(cond).unwrap();
    x.into_iter()
        .zip(c)
        .filter(|&(_, v)| v == value)
        .map(|(x, _)| x)
        .collect()
}
