use std::collections::BTreeSet;

use fairlens::graph::{
    audit_paths, d_separated, enumerate_paths, is_blocked, satisfies_backdoor, CausalGraph,
    FairnessLabel, GraphSpec, Path,
};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Dag {
    n: usize,
    order: Vec<usize>,
    edges: Vec<(usize, usize, FairnessLabel)>,
}

fn name(i: usize) -> String {
    format!("N{i}")
}

fn label(k: u8) -> FairnessLabel {
    match k % 3 {
        0 => FairnessLabel::Fair,
        1 => FairnessLabel::Unfair,
        _ => FairnessLabel::Unknown,
    }
}

fn dag(max: usize) -> impl Strategy<Value = Dag> {
    (2..=max)
        .prop_flat_map(|n| {
            let pairs = n * (n - 1) / 2;
            (
                Just(n),
                Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
                proptest::collection::vec((proptest::bool::weighted(0.45), 0u8..3), pairs),
            )
        })
        .prop_map(|(n, order, bits)| {
            let mut edges = Vec::new();
            let mut k = 0;
            for j in 1..n {
                for i in 0..j {
                    if bits[k].0 {
                        edges.push((i, j, label(bits[k].1)));
                    }
                    k += 1;
                }
            }
            Dag { n, order, edges }
        })
}

impl Dag {
    fn graph(&self, roles: Option<(usize, usize)>) -> CausalGraph {
        let mut spec = GraphSpec::new().nodes(self.order.iter().map(|&i| name(i)));
        for &(i, j, l) in &self.edges {
            spec = spec.labeled(&name(i), &name(j), l);
        }
        if let Some((a, y)) = roles {
            spec = spec.sensitive(&name(a)).outcome(&name(y));
        }
        spec.build().unwrap()
    }

    fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.iter().any(|&(p, c, _)| p == i && c == j)
    }

    fn descendants(&self, i: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![i];
        while let Some(v) = stack.pop() {
            for &(p, c, _) in &self.edges {
                if p == v && out.insert(c) {
                    stack.push(c);
                }
            }
        }
        out
    }
}

fn index(s: &str) -> usize {
    s[1..].parse().unwrap()
}

// A path is blocked iff some interior node is a conditioned non-collider, or
// a collider that is unconditioned and has no conditioned descendant.
fn oracle_blocked(d: &Dag, nodes: &[usize], z: &BTreeSet<usize>) -> bool {
    (1..nodes.len().saturating_sub(1)).any(|k| {
        let w = nodes[k];
        let collider = d.has_edge(nodes[k - 1], w) && d.has_edge(nodes[k + 1], w);
        if collider {
            !z.contains(&w) && d.descendants(w).is_disjoint(z)
        } else {
            z.contains(&w)
        }
    })
}

fn path_indices(p: &Path) -> Vec<usize> {
    p.nodes().iter().map(|s| index(s)).collect()
}

fn names_of(set: &BTreeSet<usize>) -> BTreeSet<String> {
    set.iter().map(|&i| name(i)).collect()
}

fn subsets(items: &[usize]) -> Vec<BTreeSet<usize>> {
    (0u32..1 << items.len())
        .map(|mask| {
            (0..items.len())
                .filter(|k| mask >> k & 1 == 1)
                .map(|k| items[k])
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn topological_order_respects_edges(d in dag(8)) {
        let g = d.graph(None);
        let order = g.topological_order();
        prop_assert_eq!(order.len(), d.n);
        let pos = |name: &str| order.iter().position(|&i| g.name(i) == name).unwrap();
        for &(i, j, _) in &d.edges {
            prop_assert!(pos(&name(i)) < pos(&name(j)));
        }
    }

    #[test]
    fn blocking_matches_two_condition_oracle(d in dag(6), u in 0usize..6, v in 0usize..6) {
        let (u, v) = (u % d.n, v % d.n);
        prop_assume!(u != v);
        let g = d.graph(None);
        let rest: Vec<usize> = (0..d.n).filter(|&i| i != u && i != v).collect();
        let paths = enumerate_paths(&g, &name(u), &name(v)).unwrap();
        for z in subsets(&rest) {
            let zn = names_of(&z);
            let mut all_blocked = true;
            for p in &paths {
                let want = oracle_blocked(&d, &path_indices(p), &z);
                prop_assert_eq!(is_blocked(p, &zn, &g).unwrap(), want, "{} given {:?}", p, zn);
                all_blocked &= want;
            }
            let (us, vs) = (names_of(&[u].into()), names_of(&[v].into()));
            let sep = d_separated(&g, &us, &vs, &zn).unwrap();
            prop_assert_eq!(sep, all_blocked);
            prop_assert_eq!(sep, d_separated(&g, &vs, &us, &zn).unwrap());
        }
    }

    #[test]
    fn backdoor_supersets_keep_blocking(d in dag(7), a in 0usize..7, y in 0usize..7) {
        let (a, y) = (a % d.n, y % d.n);
        prop_assume!(a != y);
        let g = d.graph(None);
        let desc = d.descendants(a);
        let back_door: Vec<Vec<usize>> = enumerate_paths(&g, &name(a), &name(y))
            .unwrap()
            .iter()
            .filter(|p| p.starts_backward())
            .map(path_indices)
            .collect();
        // Nodes that are colliders on some back-door path, or descend from one.
        let mut openers = BTreeSet::new();
        for p in &back_door {
            for k in 1..p.len() - 1 {
                if d.has_edge(p[k - 1], p[k]) && d.has_edge(p[k + 1], p[k]) {
                    openers.insert(p[k]);
                    openers.extend(d.descendants(p[k]));
                }
            }
        }
        let candidates: Vec<usize> = (0..d.n)
            .filter(|&i| i != a && i != y && !desc.contains(&i))
            .collect();
        for c in subsets(&candidates) {
            if !satisfies_backdoor(&g, &names_of(&c), &name(a), &name(y)).unwrap() {
                continue;
            }
            let blocked: Vec<&Vec<usize>> =
                back_door.iter().filter(|p| oracle_blocked(&d, p, &c)).collect();
            prop_assert_eq!(blocked.len(), back_door.len());
            for &w in &candidates {
                if c.contains(&w) || openers.contains(&w) {
                    continue;
                }
                let mut bigger = c.clone();
                bigger.insert(w);
                for p in &blocked {
                    prop_assert!(oracle_blocked(&d, p, &bigger));
                }
                prop_assert!(satisfies_backdoor(&g, &names_of(&bigger), &name(a), &name(y)).unwrap());
            }
        }
    }

    #[test]
    fn path_fairness_is_unfair_iff_an_edge_is(d in dag(7), a in 0usize..7, y in 0usize..7) {
        let (a, y) = (a % d.n, y % d.n);
        prop_assume!(a != y);
        let g = d.graph(Some((a, y)));
        let label_of = |p: usize, c: usize| {
            d.edges
                .iter()
                .find(|&&(i, j, _)| (i, j) == (p, c) || (i, j) == (c, p))
                .unwrap()
                .2
        };
        for path in audit_paths(&g).unwrap().paths {
            let nodes: Vec<usize> = path.nodes.iter().map(|s| index(s)).collect();
            let labels: Vec<FairnessLabel> =
                nodes.windows(2).map(|w| label_of(w[0], w[1])).collect();
            let unfair = labels.contains(&FairnessLabel::Unfair);
            prop_assert_eq!(path.fairness == FairnessLabel::Unfair, unfair);
            if !unfair {
                let all_fair = labels.iter().all(|&l| l == FairnessLabel::Fair);
                let want = if all_fair { FairnessLabel::Fair } else { FairnessLabel::Unknown };
                prop_assert_eq!(path.fairness, want);
            }
        }
    }
}
