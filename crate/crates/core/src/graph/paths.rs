use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{CausalGraph, FairnessLabel, GraphError};

pub const DEFAULT_PATH_BUDGET: usize = 10_000;

/// Direction of one step of a path, relative to the traversal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    /// `nodes[i] -> nodes[i + 1]`
    Forward,
    /// `nodes[i] <- nodes[i + 1]`
    Backward,
}

/// A simple path: consecutive nodes are adjacent, no node repeats.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Path {
    nodes: Vec<String>,
    steps: Vec<Step>,
}

impl Path {
    /// Builds a path from its node sequence, reading directions off `g`.
    pub fn through(g: &CausalGraph, nodes: &[&str]) -> Result<Path, GraphError> {
        let mut steps = Vec::with_capacity(nodes.len().saturating_sub(1));
        for w in nodes.windows(2) {
            if g.has_edge(w[0], w[1]) {
                steps.push(Step::Forward);
            } else if g.has_edge(w[1], w[0]) {
                steps.push(Step::Backward);
            } else {
                return Err(GraphError::NotAdjacent(w[0].to_string(), w[1].to_string()));
            }
        }
        Ok(Path {
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
            steps,
        })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn start(&self) -> &str {
        &self.nodes[0]
    }

    pub fn end(&self) -> &str {
        &self.nodes[self.nodes.len() - 1]
    }

    /// Every step points away from the start.
    pub fn is_causal(&self) -> bool {
        self.steps.iter().all(|&s| s == Step::Forward)
    }

    pub fn starts_backward(&self) -> bool {
        self.steps.first() == Some(&Step::Backward)
    }

    /// Edges on the path as `(parent, child)` pairs in traversal order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.steps.iter().enumerate().map(move |(i, s)| match s {
            Step::Forward => (self.nodes[i].as_str(), self.nodes[i + 1].as_str()),
            Step::Backward => (self.nodes[i + 1].as_str(), self.nodes[i].as_str()),
        })
    }

    /// Fairness of the path from its edge labels.
    pub fn fairness(&self, g: &CausalGraph) -> FairnessLabel {
        FairnessLabel::combine(
            self.edges()
                .map(|(p, c)| g.label(p, c).unwrap_or(FairnessLabel::Unknown)),
        )
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.nodes[0])?;
        for (i, s) in self.steps.iter().enumerate() {
            let arrow = match s {
                Step::Forward => " -> ",
                Step::Backward => " <- ",
            };
            write!(f, "{arrow}{}", self.nodes[i + 1])?;
        }
        Ok(())
    }
}

/// All simple paths between `src` and `dst`, sorted by node sequence.
pub fn enumerate_paths(g: &CausalGraph, src: &str, dst: &str) -> Result<Vec<Path>, GraphError> {
    enumerate_paths_with_limit(g, src, dst, DEFAULT_PATH_BUDGET)
}

pub fn enumerate_paths_with_limit(
    g: &CausalGraph,
    src: &str,
    dst: &str,
    limit: usize,
) -> Result<Vec<Path>, GraphError> {
    let s = g.index_of(src)?;
    let t = g.index_of(dst)?;
    if s == t {
        return Err(GraphError::SameEndpoints(src.to_string()));
    }
    let mut found: Vec<(Vec<usize>, Vec<Step>)> = Vec::new();
    let mut on_path = vec![false; g.len()];
    let mut nodes = vec![s];
    let mut steps = Vec::new();
    on_path[s] = true;
    dfs(
        g,
        t,
        &mut on_path,
        &mut nodes,
        &mut steps,
        &mut found,
        limit,
    )?;

    let mut paths: Vec<Path> = found
        .into_iter()
        .map(|(ns, st)| Path {
            nodes: ns.into_iter().map(|i| g.name(i).to_string()).collect(),
            steps: st,
        })
        .collect();
    paths.sort_by(|a, b| a.nodes.cmp(&b.nodes));
    Ok(paths)
}

fn dfs(
    g: &CausalGraph,
    target: usize,
    on_path: &mut [bool],
    nodes: &mut Vec<usize>,
    steps: &mut Vec<Step>,
    found: &mut Vec<(Vec<usize>, Vec<Step>)>,
    limit: usize,
) -> Result<(), GraphError> {
    let here = *nodes.last().expect("path is never empty");
    let next = g
        .children_idx(here)
        .iter()
        .map(|&c| (c, Step::Forward))
        .chain(g.parents_idx(here).iter().map(|&p| (p, Step::Backward)));
    for (v, step) in next.collect::<Vec<_>>() {
        if on_path[v] {
            continue;
        }
        nodes.push(v);
        steps.push(step);
        if v == target {
            if found.len() == limit {
                return Err(GraphError::PathBudgetExceeded(limit));
            }
            found.push((nodes.clone(), steps.clone()));
        } else {
            on_path[v] = true;
            dfs(g, target, on_path, nodes, steps, found, limit)?;
            on_path[v] = false;
        }
        nodes.pop();
        steps.pop();
    }
    Ok(())
}

/// True iff both path edges adjacent to `node` point into it.
pub fn is_collider(path: &Path, node: &str) -> Result<bool, GraphError> {
    let pos = interior_position(path, node)?;
    Ok(path.steps[pos - 1] == Step::Forward && path.steps[pos] == Step::Backward)
}

fn interior_position(path: &Path, node: &str) -> Result<usize, GraphError> {
    match path.nodes.iter().position(|n| n == node) {
        Some(i) if i > 0 && i + 1 < path.nodes.len() => Ok(i),
        _ => Err(GraphError::NotInterior(node.to_string())),
    }
}

/// A path is blocked by `z` when some non-collider on it is in `z`, or some
/// collider on it has neither itself nor a descendant in `z`.
pub fn is_blocked(path: &Path, z: &BTreeSet<String>, g: &CausalGraph) -> Result<bool, GraphError> {
    for n in z {
        g.index_of(n)?;
    }
    for end in [path.start(), path.end()] {
        if z.contains(end) {
            return Err(GraphError::EndpointConditioned(end.to_string()));
        }
    }
    for node in &path.nodes[1..path.nodes.len() - 1] {
        if is_collider(path, node)? {
            let idx = g.index_of(node)?;
            let opened = z.contains(node)
                || g.descendant_mask(idx)
                    .iter()
                    .enumerate()
                    .any(|(d, &m)| m && z.contains(g.name(d)));
            if !opened {
                return Ok(true);
            }
        } else if z.contains(node) {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphSpec;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn acyclic() -> CausalGraph {
        GraphSpec::new()
            .nodes(["X1", "X2", "X3", "X4"])
            .edge("X1", "X3")
            .edge("X2", "X3")
            .edge("X3", "X4")
            .edge("X2", "X4")
            .build()
            .unwrap()
    }

    fn collider_web() -> CausalGraph {
        GraphSpec::new()
            .nodes(["E", "C", "X", "A", "Y"])
            .edge("E", "A")
            .edge("E", "C")
            .edge("X", "C")
            .edge("X", "Y")
            .edge("C", "A")
            .edge("C", "Y")
            .edge("A", "Y")
            .build()
            .unwrap()
    }

    #[test]
    fn paths_between_x1_and_x2() {
        let g = acyclic();
        let paths = enumerate_paths(&g, "X1", "X2").unwrap();
        let shown: Vec<String> = paths.iter().map(|p| p.to_string()).collect();
        assert_eq!(shown, ["X1 -> X3 <- X2", "X1 -> X3 -> X4 <- X2"]);
    }

    #[test]
    fn college_paths() {
        let g = GraphSpec::new()
            .nodes(["A", "Q", "D", "Y"])
            .edge("A", "D")
            .edge("A", "Y")
            .edge("D", "Y")
            .edge("Q", "Y")
            .build()
            .unwrap();
        let shown: Vec<String> = enumerate_paths(&g, "A", "Y")
            .unwrap()
            .iter()
            .map(|p| p.to_string())
            .collect();
        assert_eq!(shown, ["A -> D -> Y", "A -> Y"]);
    }

    #[test]
    fn disconnected_has_no_paths() {
        let g = GraphSpec::new().nodes(["A", "B"]).build().unwrap();
        assert!(enumerate_paths(&g, "A", "B").unwrap().is_empty());
        assert!(matches!(
            enumerate_paths(&g, "A", "A"),
            Err(GraphError::SameEndpoints(_))
        ));
    }

    #[test]
    fn budget_is_enforced() {
        let g = acyclic();
        assert_eq!(
            enumerate_paths_with_limit(&g, "X1", "X2", 1).unwrap_err(),
            GraphError::PathBudgetExceeded(1)
        );
    }

    #[test]
    fn colliders() {
        let g = acyclic();
        let p = Path::through(&g, &["X1", "X3", "X2"]).unwrap();
        assert!(is_collider(&p, "X3").unwrap());
        let q = Path::through(&g, &["X2", "X3", "X4"]).unwrap();
        assert!(!is_collider(&q, "X3").unwrap());
        assert!(matches!(
            is_collider(&q, "X2"),
            Err(GraphError::NotInterior(_))
        ));
    }

    #[test]
    fn blocking_in_collider_web() {
        let g = collider_web();
        let through_x = Path::through(&g, &["A", "C", "X", "Y"]).unwrap();
        assert!(is_blocked(&through_x, &set(&["C"]), &g).unwrap());
        let through_e = Path::through(&g, &["A", "E", "C", "X", "Y"]).unwrap();
        assert!(!is_blocked(&through_e, &set(&["C"]), &g).unwrap());
        assert!(is_blocked(&through_e, &set(&["C", "X"]), &g).unwrap());
        assert!(is_blocked(&through_e, &set(&[]), &g).unwrap());
        assert!(matches!(
            is_blocked(&through_e, &set(&["A"]), &g),
            Err(GraphError::EndpointConditioned(_))
        ));
    }

    #[test]
    fn descendant_of_collider_opens_path() {
        let g = acyclic();
        let p = Path::through(&g, &["X1", "X3", "X2"]).unwrap();
        assert!(is_blocked(&p, &set(&[]), &g).unwrap());
        assert!(!is_blocked(&p, &set(&["X4"]), &g).unwrap());
    }
}
