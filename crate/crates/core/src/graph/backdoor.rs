use std::collections::BTreeSet;

use super::dsep::reachable;
use super::{CausalGraph, GraphError};

/// Back-door criterion for `c` relative to `(a, y)`: no member of `c` is a
/// descendant of `a`, and `c` blocks every path from `a` to `y` that starts
/// with an edge into `a`.
pub fn satisfies_backdoor(
    g: &CausalGraph,
    c: &BTreeSet<String>,
    a: &str,
    y: &str,
) -> Result<bool, GraphError> {
    let ai = g.index_of(a)?;
    let yi = g.index_of(y)?;
    let cs = g.indices_of(c)?;
    for end in [a, y] {
        if c.contains(end) {
            return Err(GraphError::EndpointConditioned(end.to_string()));
        }
    }
    let desc = g.descendant_mask(ai);
    if cs.iter().any(|&i| desc[i]) {
        return Ok(false);
    }
    // With a's outgoing edges cut, the only trails left from a are back-door
    // ones. Collider openings are unaffected because c holds no descendant of a.
    Ok(!reachable(g, &[ai], &cs, Some(ai))[yi])
}

/// Inclusion-minimal back-door adjustment sets of at most `max_size` nodes,
/// by size, then lexicographically.
pub fn minimal_adjustment_sets(
    g: &CausalGraph,
    a: &str,
    y: &str,
    max_size: usize,
) -> Result<Vec<BTreeSet<String>>, GraphError> {
    let ai = g.index_of(a)?;
    let yi = g.index_of(y)?;
    if ai == yi {
        return Err(GraphError::SameEndpoints(a.to_string()));
    }
    let available = g.len() - 2;
    if max_size > available {
        return Err(GraphError::AdjustmentTooLarge {
            requested: max_size,
            available,
        });
    }
    let desc = g.descendant_mask(ai);
    let mut candidates: Vec<String> = (0..g.len())
        .filter(|&i| i != ai && i != yi && !desc[i])
        .map(|i| g.name(i).to_string())
        .collect();
    candidates.sort();

    let mut found: Vec<BTreeSet<String>> = Vec::new();
    for size in 0..=max_size.min(candidates.len()) {
        for combo in combinations(candidates.len(), size) {
            let set: BTreeSet<String> = combo.iter().map(|&i| candidates[i].clone()).collect();
            if found.iter().any(|f| f.is_subset(&set)) {
                continue;
            }
            if satisfies_backdoor(g, &set, a, y)? {
                found.push(set);
            }
        }
    }
    Ok(found)
}

// k-subsets of 0..n in lexicographic order
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}
