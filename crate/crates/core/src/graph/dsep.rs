use std::collections::BTreeSet;

use super::{CausalGraph, GraphError};

/// True iff every path from an element of `x` to an element of `y` is
/// blocked given `z`.
///
/// Runs the linear-time reachability ("Bayes ball") search rather than
/// enumerating paths, so it stays cheap on dense graphs.
pub fn d_separated(
    g: &CausalGraph,
    x: &BTreeSet<String>,
    y: &BTreeSet<String>,
    z: &BTreeSet<String>,
) -> Result<bool, GraphError> {
    for (a, b) in [(x, y), (x, z), (y, z)] {
        if let Some(shared) = a.intersection(b).next() {
            return Err(GraphError::OverlappingSets(shared.clone()));
        }
    }
    let xs = g.indices_of(x)?;
    let ys = g.indices_of(y)?;
    let zs = g.indices_of(z)?;
    let reach = reachable(g, &xs, &zs, None);
    Ok(ys.iter().all(|&v| !reach[v]))
}

/// Nodes reachable from `sources` along active trails given `conditioned`.
/// When `cut_outgoing` is set, edges leaving that node are ignored.
pub(crate) fn reachable(
    g: &CausalGraph,
    sources: &[usize],
    conditioned: &[usize],
    cut_outgoing: Option<usize>,
) -> Vec<bool> {
    let n = g.len();
    let parents = |v: usize| {
        g.parents_idx(v)
            .iter()
            .copied()
            .filter(move |&p| Some(p) != cut_outgoing)
    };
    let children = |v: usize| {
        let cut = Some(v) == cut_outgoing;
        g.children_idx(v).iter().copied().filter(move |_| !cut)
    };

    let mut in_z = vec![false; n];
    for &c in conditioned {
        in_z[c] = true;
    }
    // conditioned nodes together with their ancestors
    let mut opens_collider = vec![false; n];
    let mut stack: Vec<usize> = conditioned.to_vec();
    while let Some(v) = stack.pop() {
        if !opens_collider[v] {
            opens_collider[v] = true;
            stack.extend(parents(v));
        }
    }

    // (node, arrived_from_child)
    let mut visited = vec![[false; 2]; n];
    let mut reached = vec![false; n];
    let mut queue: Vec<(usize, bool)> = sources.iter().map(|&s| (s, true)).collect();
    while let Some((v, up)) = queue.pop() {
        if visited[v][up as usize] {
            continue;
        }
        visited[v][up as usize] = true;
        if !in_z[v] {
            reached[v] = true;
        }
        if up {
            if !in_z[v] {
                queue.extend(parents(v).map(|p| (p, true)));
                queue.extend(children(v).map(|c| (c, false)));
            }
        } else {
            if !in_z[v] {
                queue.extend(children(v).map(|c| (c, false)));
            }
            if opens_collider[v] {
                queue.extend(parents(v).map(|p| (p, true)));
            }
        }
    }
    for &s in sources {
        reached[s] = false;
    }
    reached
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_paths, is_blocked, GraphSpec};

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn music() -> CausalGraph {
        GraphSpec::new()
            .nodes(["A", "M", "X", "Y"])
            .edge("A", "X")
            .edge("M", "X")
            .edge("M", "Y")
            .build()
            .unwrap()
    }

    #[test]
    fn collider_closes_music_path() {
        let g = music();
        assert!(d_separated(&g, &set(&["A"]), &set(&["Y"]), &set(&[])).unwrap());
        assert!(!d_separated(&g, &set(&["A"]), &set(&["Y"]), &set(&["X"])).unwrap());
    }

    #[test]
    fn disconnected_is_separated() {
        let g = GraphSpec::new()
            .nodes(["A", "B", "C"])
            .edge("A", "C")
            .build()
            .unwrap();
        assert!(d_separated(&g, &set(&["A"]), &set(&["B"]), &set(&[])).unwrap());
    }

    #[test]
    fn overlapping_sets_rejected() {
        let g = music();
        assert_eq!(
            d_separated(&g, &set(&["A"]), &set(&["A"]), &set(&[])).unwrap_err(),
            GraphError::OverlappingSets("A".into())
        );
        assert!(d_separated(&g, &set(&["A"]), &set(&["Y"]), &set(&["Y"])).is_err());
    }

    fn brute_force(g: &CausalGraph, u: &str, v: &str, z: &BTreeSet<String>) -> bool {
        enumerate_paths(g, u, v)
            .unwrap()
            .iter()
            .all(|p| is_blocked(p, z, g).unwrap())
    }

    #[test]
    fn agrees_with_path_enumeration_on_fixed_graph() {
        let g = GraphSpec::new()
            .nodes(["E", "C", "X", "A", "Y", "B", "Z"])
            .edge("E", "A")
            .edge("E", "C")
            .edge("X", "C")
            .edge("X", "Y")
            .edge("C", "A")
            .edge("C", "Y")
            .edge("A", "Y")
            .edge("A", "B")
            .edge("B", "Y")
            .edge("B", "Z")
            .edge("Y", "Z")
            .build()
            .unwrap();
        let names: Vec<String> = g.names().to_vec();
        for u in &names {
            for v in &names {
                if u >= v {
                    continue;
                }
                let rest: Vec<&String> = names.iter().filter(|n| *n != u && *n != v).collect();
                for mask in 0u32..(1 << rest.len()) {
                    let z: BTreeSet<String> = rest
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask & (1 << i) != 0)
                        .map(|(_, n)| (*n).clone())
                        .collect();
                    let fast = d_separated(&g, &set(&[u]), &set(&[v]), &z).unwrap();
                    assert_eq!(fast, brute_force(&g, u, v, &z), "{u} {v} {z:?}");
                    let swapped = d_separated(&g, &set(&[v]), &set(&[u]), &z).unwrap();
                    assert_eq!(fast, swapped);
                }
            }
        }
    }
}
