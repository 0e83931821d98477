//! Crate-wide error type and its coarse classification.

use serde::Serialize;
use thiserror::Error;

use crate::counterfactual::CounterfactualError;
use crate::dataset::DataError;
use crate::dsl::DslError;
use crate::effects::EffectError;
use crate::graph::GraphError;
use crate::metrics::MetricError;
use crate::scm::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    /// Inputs are malformed or inconsistent.
    Validation,
    /// Inputs are well formed but the requested quantity cannot be computed.
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Effect(#[from] EffectError),
    #[error(transparent)]
    Counterfactual(#[from] CounterfactualError),
    #[error("{0}")]
    Invalid(String),
}

fn model_category(e: &ModelError) -> Category {
    match e {
        ModelError::SingularSystem | ModelError::DegenerateConditioning(_) => Category::Numeric,
        _ => Category::Validation,
    }
}

fn metric_category(e: &MetricError) -> Category {
    match e {
        MetricError::EmptyGroup(_)
        | MetricError::DegenerateLabels(_)
        | MetricError::NoPositivePredictions(_)
        | MetricError::ZeroDenominator => Category::Numeric,
        _ => Category::Validation,
    }
}

fn data_category(e: &DataError) -> Category {
    match e {
        DataError::Metric(m) => metric_category(m),
        _ => Category::Validation,
    }
}

fn effect_category(e: &EffectError) -> Category {
    match e {
        EffectError::Model(m) => model_category(m),
        EffectError::Data(d) => data_category(d),
        EffectError::EmptyStratum(_) | EffectError::DegenerateConditioning(_) => Category::Numeric,
        _ => Category::Validation,
    }
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Model(e) => model_category(e),
            Error::Metric(e) => metric_category(e),
            Error::Data(e) => data_category(e),
            Error::Effect(e) => effect_category(e),
            Error::Counterfactual(CounterfactualError::Model(e)) => model_category(e),
            Error::Counterfactual(CounterfactualError::Effect(e)) => effect_category(e),
            _ => Category::Validation,
        }
    }

    /// Short machine-readable tag of the failing module.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dsl(DslError::Syntax { .. }) => "syntax",
            Error::Dsl(DslError::Semantic { .. }) => "semantic",
            Error::Graph(_) => "graph",
            Error::Model(_) => "model",
            Error::Data(_) => "data",
            Error::Metric(_) => "metric",
            Error::Effect(_) => "effect",
            Error::Counterfactual(_) => "counterfactual",
            Error::Invalid(_) => "invalid",
        }
    }
}
