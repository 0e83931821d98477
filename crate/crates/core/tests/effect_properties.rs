mod common;

use std::collections::BTreeSet;

use common::{graph_of, node_name, random_dag, random_linear, Draws};
use fairlens::effects::{
    ade, aie, ate, ett, nci, observed_gap, pse, AieVariant, EffectEstimate, Estimator,
    PathInterventionSpec, Source,
};
use fairlens::presets::preset;
use fairlens::scm::{Mechanism, StructuralModel};
use proptest::prelude::*;

fn model(name: &str) -> StructuralModel {
    preset(name).unwrap().spec().model.unwrap()
}

fn mc(n: usize, seed: u64) -> Estimator {
    Estimator::MonteCarlo { n, seed }
}

fn se(e: &EffectEstimate) -> f64 {
    e.std_error.unwrap()
}

fn coefficient(m: &StructuralModel, parent: &str, child: &str) -> f64 {
    match m.mechanism(child).unwrap() {
        Mechanism::LinearGaussian { coefficients, .. } => coefficients[parent],
        other => panic!("{child} is not linear: {other:?}"),
    }
}

// Sum over directed paths from `a` to `y` whose first edge enters a node in
// `first`, of the product of edge coefficients.
fn path_sum(m: &StructuralModel, a: &str, y: &str, first: &BTreeSet<String>) -> f64 {
    fn walk(m: &StructuralModel, node: &str, y: &str, product: f64) -> f64 {
        if node == y {
            return product;
        }
        let g = m.graph();
        let i = g.index_of(node).unwrap();
        g.children_idx(i)
            .iter()
            .map(|&c| {
                let child = g.name(c);
                walk(m, child, y, product * coefficient(m, node, child))
            })
            .sum()
    }
    first
        .iter()
        .map(|c| walk(m, c, y, coefficient(m, a, c)))
        .sum()
}

fn random_mediation(seed: u64) -> (StructuralModel, String, String) {
    let mut d = Draws::new(seed);
    let n = 3 + d.below(5);
    let mut edges = random_dag(&mut d, n, 0.5);
    if !edges.contains(&(0, n - 1)) {
        edges.push((0, n - 1));
    }
    let g = graph_of(n, &edges, Some((0, n - 1)));
    (random_linear(&mut d, &g), node_name(0), node_name(n - 1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_pse_is_a_path_product(seed in any::<u64>(), mask in any::<u32>(), a in -2.0f64..2.0, abar in -2.0f64..2.0) {
        let (m, an, yn) = random_mediation(seed);
        let g = m.graph();
        let children: Vec<String> = g
            .children_idx(g.index_of(&an).unwrap())
            .iter()
            .map(|&c| g.name(c).to_string())
            .collect();
        let active: BTreeSet<String> = children
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, c)| c.clone())
            .collect();
        let spec = PathInterventionSpec::new(abar, a, active.iter().cloned());
        let got = pse(&m, &spec, Estimator::ClosedForm).unwrap().value;
        let want = path_sum(&m, &an, &yn, &active) * (a - abar);
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn pse_extremes(seed in any::<u64>(), a in -2.0f64..2.0, abar in -2.0f64..2.0) {
        let (m, _, _) = random_mediation(seed);
        let cf = Estimator::ClosedForm;
        let all = PathInterventionSpec::all_active(m.graph(), abar, a).unwrap();
        let total = ate(&m, a, abar, cf).unwrap().value;
        prop_assert!((pse(&m, &all, cf).unwrap().value - total).abs() <= 1e-12);
        let none = PathInterventionSpec::new(abar, a, Vec::<String>::new());
        prop_assert_eq!(pse(&m, &none, cf).unwrap().value, 0.0);
    }

    #[test]
    fn closed_forms_carry_no_sampling_fields(seed in any::<u64>()) {
        let (m, _, _) = random_mediation(seed);
        let e = ate(&m, 1.0, 0.0, Estimator::ClosedForm).unwrap();
        prop_assert!(e.std_error.is_none() && e.n_samples.is_none() && e.seed.is_none());
    }
}

#[test]
fn monte_carlo_agrees_with_closed_form_on_linear_presets() {
    for name in [
        "college",
        "mediation",
        "music",
        "confounded",
        "collider-web",
    ] {
        let m = model(name);
        let exact = ate(&m, 1.0, 0.0, Estimator::ClosedForm).unwrap().value;
        let e = ate(&m, 1.0, 0.0, mc(1_000_000, 4)).unwrap();
        assert!(se(&e) >= 0.0);
        assert!(
            (e.value - exact).abs() <= 4.0 * se(&e),
            "{name}: {} vs {exact} (se {})",
            e.value,
            se(&e)
        );
    }
}

#[test]
fn decomposition_holds_under_monte_carlo() {
    for name in ["college", "mediation", "college-nonlinear"] {
        let m = model(name);
        let est = mc(200_000, 8);
        let total = ate(&m, 1.0, 0.0, est).unwrap();
        let direct = ade(&m, 1.0, 0.0, false, est).unwrap();
        let indirect = aie(&m, 0.0, 1.0, AieVariant::BaselineDirect, est).unwrap();
        let residual = total.value - (direct.value - indirect.value);
        let tol = 4.0 * (se(&total) + se(&direct) + se(&indirect));
        assert!(
            residual.abs() <= tol,
            "{name}: residual {residual}, tolerance {tol}"
        );
    }
}

#[test]
fn observed_gap_splits_into_nci_and_ett() {
    for name in ["college", "mediation", "confounded"] {
        let m = model(name);
        let cf = Estimator::ClosedForm;
        let gap = observed_gap(Source::Model(&m, cf), 1.0, 0.0).unwrap().value;
        let split = nci(&m, 1.0, 0.0, cf).unwrap().value - ett(&m, 0.0, 1.0, cf).unwrap().value;
        assert!((gap - split).abs() <= 1e-12, "{name}: {gap} vs {split}");

        let est = mc(200_000, 12);
        let gap = observed_gap(Source::Model(&m, est), 1.0, 0.0).unwrap();
        let n = nci(&m, 1.0, 0.0, est).unwrap();
        let e = ett(&m, 0.0, 1.0, est).unwrap();
        let residual = gap.value - (n.value - e.value);
        let tol = 4.0 * (se(&gap) + se(&n) + se(&e));
        assert!(
            residual.abs() <= tol,
            "{name}: residual {residual}, tolerance {tol}"
        );
    }
}
