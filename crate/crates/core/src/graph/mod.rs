//! Labeled causal DAGs: validation, relatives, path enumeration, d-separation,
//! the back-door criterion and fairness audits of the paths leaving the
//! sensitive attribute.

mod audit;
mod backdoor;
mod dsep;
mod paths;

pub use audit::{
    audit_paths, recommend_criteria, AuditReport, AuditedPath, PathKind, Recommendation, Verdict,
};
pub use backdoor::{minimal_adjustment_sets, satisfies_backdoor};
pub use dsep::d_separated;
pub use paths::{
    enumerate_paths, enumerate_paths_with_limit, is_blocked, is_collider, Path, Step,
    DEFAULT_PATH_BUDGET,
};

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while building or querying a [`CausalGraph`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` declared twice")]
    DuplicateNode(String),
    #[error("edge {0} -> {1} declared twice")]
    DuplicateEdge(String, String),
    #[error("directed cycle: {}", .cycle.join(" -> "))]
    CycleDetected { cycle: Vec<String> },
    #[error("node `{0}` cannot be both sensitive and outcome")]
    RoleConflict(String),
    #[error("sensitive and outcome roles must both be set")]
    RolesUnset,
    #[error("`{0}` is not an interior node of the path")]
    NotInterior(String),
    #[error("path endpoint `{0}` is in the conditioning set")]
    EndpointConditioned(String),
    #[error("node sets overlap on `{0}`")]
    OverlappingSets(String),
    #[error("path enumeration exceeded the budget of {0} paths")]
    PathBudgetExceeded(usize),
    #[error("`{0}` and `{1}` are not adjacent")]
    NotAdjacent(String, String),
    #[error("path endpoints must differ (both are `{0}`)")]
    SameEndpoints(String),
    #[error("adjustment size {requested} exceeds the {available} nodes other than treatment and outcome")]
    AdjustmentTooLarge { requested: usize, available: usize },
}

/// Analyst-provided fairness designation of an edge (or of a path).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "lowercase")]
pub enum FairnessLabel {
    Fair,
    Unfair,
    #[default]
    Unknown,
}

impl FairnessLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            FairnessLabel::Fair => "fair",
            FairnessLabel::Unfair => "unfair",
            FairnessLabel::Unknown => "unknown",
        }
    }

    /// Combines edge labels along a path: any unfair edge makes the path
    /// unfair, all-fair edges make it fair, anything else is unknown.
    pub fn combine<I: IntoIterator<Item = FairnessLabel>>(labels: I) -> FairnessLabel {
        let mut all_fair = true;
        for l in labels {
            match l {
                FairnessLabel::Unfair => return FairnessLabel::Unfair,
                FairnessLabel::Unknown => all_fair = false,
                FairnessLabel::Fair => {}
            }
        }
        if all_fair {
            FairnessLabel::Fair
        } else {
            FairnessLabel::Unknown
        }
    }
}

impl fmt::Display for FairnessLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unvalidated graph description, as produced by a parser or by hand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphSpec {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String, FairnessLabel)>,
    pub sensitive: Option<String>,
    pub outcome: Option<String>,
}

impl GraphSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(mut self, name: impl Into<String>) -> Self {
        self.nodes.push(name.into());
        self
    }

    pub fn nodes<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.nodes.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn edge(self, parent: &str, child: &str) -> Self {
        self.labeled(parent, child, FairnessLabel::Unknown)
    }

    pub fn labeled(mut self, parent: &str, child: &str, label: FairnessLabel) -> Self {
        self.edges
            .push((parent.to_string(), child.to_string(), label));
        self
    }

    pub fn sensitive(mut self, name: &str) -> Self {
        self.sensitive = Some(name.to_string());
        self
    }

    pub fn outcome(mut self, name: &str) -> Self {
        self.outcome = Some(name.to_string());
        self
    }

    pub fn build(&self) -> Result<CausalGraph, GraphError> {
        validate_graph(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    pub label: FairnessLabel,
}

/// Immutable, validated DAG with fairness labels and optional roles.
///
/// Nodes keep their declaration order; every query that returns a set of
/// nodes returns it sorted by name.
#[derive(Debug, Clone)]
pub struct CausalGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    sensitive: Option<usize>,
    outcome: Option<usize>,
    topo: Vec<usize>,
}

impl PartialEq for CausalGraph {
    fn eq(&self, other: &Self) -> bool {
        let edge_set = |g: &CausalGraph| {
            g.edges
                .iter()
                .map(|e| (g.names[e.parent].clone(), g.names[e.child].clone(), e.label))
                .collect::<BTreeSet<_>>()
        };
        self.names == other.names
            && self.sensitive() == other.sensitive()
            && self.outcome() == other.outcome()
            && edge_set(self) == edge_set(other)
    }
}

/// Validates node/edge lists into a [`CausalGraph`], rejecting cycles.
pub fn validate_graph(raw: &GraphSpec) -> Result<CausalGraph, GraphError> {
    let mut index = HashMap::with_capacity(raw.nodes.len());
    for (i, n) in raw.nodes.iter().enumerate() {
        if index.insert(n.clone(), i).is_some() {
            return Err(GraphError::DuplicateNode(n.clone()));
        }
    }
    let lookup = |n: &str| {
        index
            .get(n)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(n.to_string()))
    };

    let n = raw.nodes.len();
    let mut parents = vec![Vec::new(); n];
    let mut children = vec![Vec::new(); n];
    let mut edges = Vec::with_capacity(raw.edges.len());
    let mut seen = BTreeSet::new();
    for (p, c, label) in &raw.edges {
        let (pi, ci) = (lookup(p)?, lookup(c)?);
        if pi == ci {
            return Err(GraphError::CycleDetected {
                cycle: vec![p.clone(), p.clone()],
            });
        }
        if !seen.insert((pi, ci)) {
            return Err(GraphError::DuplicateEdge(p.clone(), c.clone()));
        }
        parents[ci].push(pi);
        children[pi].push(ci);
        edges.push(Edge {
            parent: pi,
            child: ci,
            label: *label,
        });
    }
    for list in parents.iter_mut().chain(children.iter_mut()) {
        list.sort_unstable();
    }

    let sensitive = raw.sensitive.as_deref().map(lookup).transpose()?;
    let outcome = raw.outcome.as_deref().map(lookup).transpose()?;
    if let (Some(s), Some(o)) = (sensitive, outcome) {
        if s == o {
            return Err(GraphError::RoleConflict(raw.nodes[s].clone()));
        }
    }

    let topo = match topological_order(&parents, &children) {
        Some(order) => order,
        None => {
            let cycle = find_cycle(&children)
                .into_iter()
                .map(|i| raw.nodes[i].clone())
                .collect();
            return Err(GraphError::CycleDetected { cycle });
        }
    };

    Ok(CausalGraph {
        names: raw.nodes.clone(),
        index,
        parents,
        children,
        edges,
        sensitive,
        outcome,
        topo,
    })
}

// Kahn's algorithm; ties broken by declaration index so the order is stable.
fn topological_order(parents: &[Vec<usize>], children: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..parents.len())
        .filter(|&i| indegree[i] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(parents.len());
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    (order.len() == parents.len()).then_some(order)
}

fn find_cycle(children: &[Vec<usize>]) -> Vec<usize> {
    // 0 = unvisited, 1 = on stack, 2 = done
    fn visit(
        v: usize,
        children: &[Vec<usize>],
        state: &mut [u8],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        state[v] = 1;
        stack.push(v);
        for &c in &children[v] {
            if state[c] == 1 {
                let start = stack.iter().position(|&s| s == c).unwrap_or(0);
                let mut cycle = stack[start..].to_vec();
                cycle.push(c);
                return Some(cycle);
            }
            if state[c] == 0 {
                if let Some(cycle) = visit(c, children, state, stack) {
                    return Some(cycle);
                }
            }
        }
        stack.pop();
        state[v] = 2;
        None
    }
    let mut state = vec![0u8; children.len()];
    for v in 0..children.len() {
        if state[v] == 0 {
            if let Some(cycle) = visit(v, children, &mut state, &mut Vec::new()) {
                return cycle;
            }
        }
    }
    Vec::new()
}

/// Parents, children, ancestors and descendants of one node (all strict).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Relatives {
    pub parents: BTreeSet<String>,
    pub children: BTreeSet<String>,
    pub ancestors: BTreeSet<String>,
    pub descendants: BTreeSet<String>,
}

impl CausalGraph {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize, GraphError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> bool {
        match (self.index.get(parent), self.index.get(child)) {
            (Some(&p), Some(&c)) => self.children[p].binary_search(&c).is_ok(),
            _ => false,
        }
    }

    pub fn label(&self, parent: &str, child: &str) -> Option<FairnessLabel> {
        let (p, c) = (*self.index.get(parent)?, *self.index.get(child)?);
        self.label_idx(p, c)
    }

    pub(crate) fn label_idx(&self, p: usize, c: usize) -> Option<FairnessLabel> {
        self.edges
            .iter()
            .find(|e| e.parent == p && e.child == c)
            .map(|e| e.label)
    }

    pub fn sensitive(&self) -> Option<&str> {
        self.sensitive.map(|i| self.names[i].as_str())
    }

    pub fn outcome(&self) -> Option<&str> {
        self.outcome.map(|i| self.names[i].as_str())
    }

    pub(crate) fn sensitive_idx(&self) -> Option<usize> {
        self.sensitive
    }

    pub(crate) fn outcome_idx(&self) -> Option<usize> {
        self.outcome
    }

    /// Topological order (declaration order breaks ties).
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn parents_idx(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children_idx(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Strict descendants of `i` as a membership mask.
    pub(crate) fn descendant_mask(&self, i: usize) -> Vec<bool> {
        self.reach_mask(i, &self.children)
    }

    pub(crate) fn ancestor_mask(&self, i: usize) -> Vec<bool> {
        self.reach_mask(i, &self.parents)
    }

    fn reach_mask(&self, start: usize, adj: &[Vec<usize>]) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let mut stack = adj[start].clone();
        while let Some(v) = stack.pop() {
            if !mask[v] {
                mask[v] = true;
                stack.extend_from_slice(&adj[v]);
            }
        }
        mask
    }

    fn names_of(&self, mask: &[bool]) -> BTreeSet<String> {
        mask.iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| self.names[i].clone())
            .collect()
    }

    /// Strict relatives of `node`: a node is never its own ancestor or descendant.
    pub fn relatives(&self, node: &str) -> Result<Relatives, GraphError> {
        let i = self.index_of(node)?;
        Ok(Relatives {
            parents: self.parents[i]
                .iter()
                .map(|&p| self.names[p].clone())
                .collect(),
            children: self.children[i]
                .iter()
                .map(|&c| self.names[c].clone())
                .collect(),
            ancestors: self.names_of(&self.ancestor_mask(i)),
            descendants: self.names_of(&self.descendant_mask(i)),
        })
    }

    pub(crate) fn indices_of<'a, I>(&self, names: I) -> Result<Vec<usize>, GraphError>
    where
        I: IntoIterator<Item = &'a String>,
    {
        names.into_iter().map(|n| self.index_of(n)).collect()
    }

    /// Returns a copy with every edge into the given nodes removed, as used by
    /// interventions. Labels of the surviving edges are kept.
    pub fn without_incoming(&self, nodes: &[usize]) -> CausalGraph {
        let spec = GraphSpec {
            nodes: self.names.clone(),
            edges: self
                .edges
                .iter()
                .filter(|e| !nodes.contains(&e.child))
                .map(|e| {
                    (
                        self.names[e.parent].clone(),
                        self.names[e.child].clone(),
                        e.label,
                    )
                })
                .collect(),
            sensitive: self.sensitive().map(str::to_string),
            outcome: self.outcome().map(str::to_string),
        };
        validate_graph(&spec).expect("removing edges keeps a valid DAG")
    }

    /// Unvalidated description that rebuilds this graph.
    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            nodes: self.names.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| {
                    (
                        self.names[e.parent].clone(),
                        self.names[e.child].clone(),
                        e.label,
                    )
                })
                .collect(),
            sensitive: self.sensitive().map(str::to_string),
            outcome: self.outcome().map(str::to_string),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn acyclic_example() -> CausalGraph {
        GraphSpec::new()
            .nodes(["X1", "X2", "X3", "X4"])
            .edge("X1", "X3")
            .edge("X2", "X3")
            .edge("X3", "X4")
            .edge("X2", "X4")
            .build()
            .unwrap()
    }

    #[test]
    fn accepts_acyclic_example() {
        let g = acyclic_example();
        assert_eq!(g.len(), 4);
        assert_eq!(g.topological_order().len(), 4);
    }

    #[test]
    fn back_link_creates_cycle() {
        let err = GraphSpec::new()
            .nodes(["X1", "X2", "X3", "X4"])
            .edge("X1", "X3")
            .edge("X2", "X3")
            .edge("X3", "X4")
            .edge("X2", "X4")
            .edge("X4", "X1")
            .build()
            .unwrap_err();
        match err {
            GraphError::CycleDetected { cycle } => {
                assert_eq!(cycle.first(), cycle.last());
                assert!(cycle.contains(&"X4".to_string()) && cycle.contains(&"X1".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_node_is_valid() {
        let g = GraphSpec::new().node("A").build().unwrap();
        let r = g.relatives("A").unwrap();
        assert_eq!(r, Relatives::default());
    }

    #[test]
    fn unknown_and_duplicate_edges() {
        assert_eq!(
            GraphSpec::new()
                .node("A")
                .edge("A", "B")
                .build()
                .unwrap_err(),
            GraphError::UnknownNode("B".into())
        );
        assert_eq!(
            GraphSpec::new()
                .nodes(["A", "B"])
                .edge("A", "B")
                .edge("A", "B")
                .build()
                .unwrap_err(),
            GraphError::DuplicateEdge("A".into(), "B".into())
        );
        assert!(matches!(
            GraphSpec::new().nodes(["A", "A"]).build(),
            Err(GraphError::DuplicateNode(_))
        ));
        assert!(matches!(
            GraphSpec::new()
                .nodes(["A"])
                .sensitive("A")
                .outcome("A")
                .build(),
            Err(GraphError::RoleConflict(_))
        ));
    }

    #[test]
    fn relatives_of_collider() {
        let g = acyclic_example();
        let r = g.relatives("X3").unwrap();
        assert_eq!(
            r.parents,
            ["X1", "X2"].iter().map(|s| s.to_string()).collect()
        );
        assert_eq!(r.descendants, ["X4".to_string()].into_iter().collect());
        assert_eq!(r.ancestors.len(), 2);
        assert!(g.relatives("nope").is_err());
    }

    #[test]
    fn chain_descendants_are_transitive() {
        let g = GraphSpec::new()
            .nodes(["A", "B", "C"])
            .edge("A", "B")
            .edge("B", "C")
            .build()
            .unwrap();
        let r = g.relatives("A").unwrap();
        assert_eq!(
            r.descendants,
            ["B", "C"].iter().map(|s| s.to_string()).collect()
        );
        assert!(r.ancestors.is_empty());
    }

    #[test]
    fn path_label_combination() {
        use FairnessLabel::*;
        assert_eq!(FairnessLabel::combine([Fair, Unfair, Unknown]), Unfair);
        assert_eq!(FairnessLabel::combine([Fair, Fair]), Fair);
        assert_eq!(FairnessLabel::combine([Fair, Unknown]), Unknown);
    }

    #[test]
    fn equality_ignores_edge_order() {
        let a = GraphSpec::new()
            .nodes(["A", "B", "C"])
            .edge("A", "B")
            .edge("B", "C")
            .build()
            .unwrap();
        let b = GraphSpec::new()
            .nodes(["A", "B", "C"])
            .edge("B", "C")
            .edge("A", "B")
            .build()
            .unwrap();
        assert_eq!(a, b);
    }
}
