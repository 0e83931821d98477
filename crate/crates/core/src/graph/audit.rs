use serde::Serialize;

use super::paths::enumerate_paths;
use super::{CausalGraph, FairnessLabel, GraphError, Path};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Causal,
    BackDoor,
    Other,
}

impl PathKind {
    pub fn of(path: &Path) -> PathKind {
        if path.is_causal() {
            PathKind::Causal
        } else if path.starts_backward() {
            PathKind::BackDoor
        } else {
            PathKind::Other
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PathKind::Causal => "causal",
            PathKind::BackDoor => "back_door",
            PathKind::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditedPath {
    pub target: String,
    pub path: String,
    #[serde(skip)]
    pub nodes: Vec<String>,
    pub kind: PathKind,
    pub fairness: FairnessLabel,
    /// Only causal paths carrying an unfair edge are problematic.
    pub problematic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub sensitive: String,
    pub outcome: String,
    /// Paths from the sensitive node to the outcome first, then to every
    /// other node in name order.
    pub paths: Vec<AuditedPath>,
}

impl AuditReport {
    pub fn outcome_paths(&self) -> impl Iterator<Item = &AuditedPath> {
        self.paths.iter().filter(move |p| p.target == self.outcome)
    }

    pub fn causal_outcome_paths(&self) -> impl Iterator<Item = &AuditedPath> {
        self.outcome_paths().filter(|p| p.kind == PathKind::Causal)
    }
}

/// Classifies every path leaving the sensitive node by kind and fairness.
///
/// Edge labels on back-door paths are recorded in the per-path fairness but
/// never make a back-door path problematic.
pub fn audit_paths(g: &CausalGraph) -> Result<AuditReport, GraphError> {
    let (Some(a), Some(y)) = (g.sensitive(), g.outcome()) else {
        return Err(GraphError::RolesUnset);
    };
    let mut targets: Vec<&str> = g
        .names()
        .iter()
        .map(String::as_str)
        .filter(|n| *n != a && *n != y)
        .collect();
    targets.sort();
    targets.insert(0, y);

    let mut paths = Vec::new();
    for target in targets {
        for p in enumerate_paths(g, a, target)? {
            let kind = PathKind::of(&p);
            let fairness = p.fairness(g);
            paths.push(AuditedPath {
                target: target.to_string(),
                path: p.to_string(),
                nodes: p.nodes().to_vec(),
                kind,
                fairness,
                problematic: kind == PathKind::Causal && fairness == FairnessLabel::Unfair,
            });
        }
    }
    Ok(AuditReport {
        sensitive: a.to_string(),
        outcome: y.to_string(),
        paths,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Appropriate,
    Inappropriate,
    CannotDetermine,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Appropriate => "appropriate",
            Verdict::Inappropriate => "inappropriate",
            Verdict::CannotDetermine => "cannot determine",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub demographic_parity: Verdict,
    pub error_rate_parity: Verdict,
    pub calibration: Verdict,
    pub rationale: Vec<String>,
}

/// Which group criteria suit the labeled data-generation mechanism, judged
/// from the causal paths between the sensitive node and the outcome.
pub fn recommend_criteria(audit: &AuditReport) -> Recommendation {
    let causal: Vec<&AuditedPath> = audit.causal_outcome_paths().collect();
    let count = |l: FairnessLabel| causal.iter().filter(|p| p.fairness == l).count();
    let (unfair, fair, unknown) = (
        count(FairnessLabel::Unfair),
        count(FairnessLabel::Fair),
        count(FairnessLabel::Unknown),
    );
    let (a, y) = (&audit.sensitive, &audit.outcome);
    let mut rationale = Vec::new();
    let back_door = audit
        .outcome_paths()
        .filter(|p| p.kind == PathKind::BackDoor)
        .count();
    if back_door > 0 {
        rationale.push(format!(
            "{back_door} back-door path(s) between {a} and {y} carry no influence of {a} and are not problematic"
        ));
    }

    let (dp, rates) = if causal.is_empty() {
        rationale.push(format!(
            "no causal path from {a} to {y}: any dependence of {y} on {a} is non-causal, so matching \
             error rates or calibration is permissible and enforcing independence is not required"
        ));
        (Verdict::Inappropriate, Verdict::Appropriate)
    } else if unfair == causal.len() {
        rationale.push(format!(
            "every causal path from {a} to {y} is unfair: the prediction should be independent of {a}"
        ));
        (Verdict::Appropriate, Verdict::Inappropriate)
    } else if unfair > 0 {
        rationale.push(format!(
            "{unfair} of {} causal paths from {a} to {y} are unfair: criteria that accept the dependence \
             of {y} on {a} would inherit that unfairness",
            causal.len()
        ));
        let dp = if fair > 0 {
            rationale.push(format!(
                "{fair} causal path(s) are fair: full independence would also remove legitimate influence; \
                 consider path-specific measures"
            ));
            Verdict::Inappropriate
        } else {
            rationale.push(format!("{unknown} causal path(s) are unlabeled"));
            Verdict::CannotDetermine
        };
        (dp, Verdict::Inappropriate)
    } else if unknown > 0 {
        rationale.push(format!(
            "{unknown} causal path(s) from {a} to {y} carry unlabeled edges; label them to decide"
        ));
        (Verdict::CannotDetermine, Verdict::CannotDetermine)
    } else {
        rationale.push(format!(
            "every causal path from {a} to {y} is fair: the prediction may contain that influence"
        ));
        (Verdict::Inappropriate, Verdict::Appropriate)
    };

    Recommendation {
        demographic_parity: dp,
        error_rate_parity: rates,
        calibration: rates,
        rationale,
    }
}
