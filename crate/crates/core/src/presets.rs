//! Built-in scenarios.

use crate::dsl::{parse_spec, ScenarioSpec};
use crate::metrics::{Counts, GroupedCounts};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub source: &'static str,
    /// Aggregate confusion counts shipped with rate-only scenarios.
    pub counts: Option<GroupedCounts>,
}

impl Preset {
    pub fn spec(&self) -> ScenarioSpec {
        parse_spec(self.source).expect("built-in scenarios parse")
    }
}

// Group 0: 4834 positives and 5166 negatives; group 1: 3299 and 6701.
const COMPAS_COUNTS: GroupedCounts = GroupedCounts {
    groups: [
        Counts {
            tp: 3480,
            fp: 2320,
            tn: 2846,
            fn_: 1354,
        },
        Counts {
            tp: 1725,
            fp: 1575,
            tn: 5126,
            fn_: 1574,
        },
    ],
};

const CORE: [Preset; 6] = [
    Preset {
        name: "college",
        description: "admissions with a direct and a department-mediated path",
        source: include_str!("../presets/college.cg"),
        counts: None,
    },
    Preset {
        name: "mediation",
        description: "linear mediation through M and L with a confounder",
        source: include_str!("../presets/mediation.cg"),
        counts: None,
    },
    Preset {
        name: "music",
        description: "collider at the initial score",
        source: include_str!("../presets/music.cg"),
        counts: None,
    },
    Preset {
        name: "confounded",
        description: "binary confounder of treatment and outcome",
        source: include_str!("../presets/confounded.cg"),
        counts: None,
    },
    Preset {
        name: "collider-web",
        description: "back-door paths where conditioning on C opens a collider",
        source: include_str!("../presets/collider_web.cg"),
        counts: None,
    },
    Preset {
        name: "compas-rates",
        description: "aggregate risk-tool rates by group",
        source: include_str!("../presets/compas_rates.cg"),
        counts: Some(COMPAS_COUNTS),
    },
];

const EXTRA: [Preset; 2] = [
    Preset {
        name: "hiring",
        description: "a single back-door path and no causal path",
        source: include_str!("../presets/hiring.cg"),
        counts: None,
    },
    Preset {
        name: "college-nonlinear",
        description: "admissions with a gender-department interaction",
        source: include_str!("../presets/college_nonlinear.cg"),
        counts: None,
    },
];

/// The six reference scenarios.
pub fn presets() -> Vec<Preset> {
    CORE.to_vec()
}

/// Reference scenarios plus auxiliary examples.
pub fn builtins() -> Vec<Preset> {
    CORE.iter().chain(&EXTRA).copied().collect()
}

/// Looks up a built-in by name; a trailing `.cg` and underscores are accepted.
pub fn preset(name: &str) -> Option<Preset> {
    let key = name.strip_suffix(".cg").unwrap_or(name).replace('_', "-");
    builtins().into_iter().find(|p| p.name == key)
}
