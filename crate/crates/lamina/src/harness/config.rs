use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kikai::StepOrder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    Baseline,
    DecisionLinear,
    LeastSquaresTp,
    LinearTp,
    Fa,
    Dfa,
    NeuralDecision,
}

impl ExperimentName {
    pub fn all() -> [ExperimentName; 7] {
        [
            ExperimentName::Baseline,
            ExperimentName::DecisionLinear,
            ExperimentName::LeastSquaresTp,
            ExperimentName::LinearTp,
            ExperimentName::Fa,
            ExperimentName::Dfa,
            ExperimentName::NeuralDecision,
        ]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::Baseline => "baseline",
            ExperimentName::DecisionLinear => "decision-linear",
            ExperimentName::LeastSquaresTp => "least-squares-tp",
            ExperimentName::LinearTp => "linear-tp",
            ExperimentName::Fa => "fa",
            ExperimentName::Dfa => "dfa",
            ExperimentName::NeuralDecision => "neural-decision",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::all()
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Self::all().iter().map(|n| n.as_str()).collect();
                Error::Config(format!(
                    "unknown experiment '{s}'; valid names: {}",
                    valid.join(", ")
                ))
            })
    }

    /// One-line architecture and training summary.
    pub fn summary(&self) -> &'static str {
        match self {
            ExperimentName::Baseline => {
                "three dense layers (784-128-32-10, ReLU+BatchNorm), gradient targets throughout"
            }
            ExperimentName::DecisionLinear => {
                "refit tree-regressor ensemble (9x32 trees, depth 11) under a linear head; \
                 40-iteration input descent supplies the tree targets"
            }
            ExperimentName::LeastSquaresTp => {
                "four dense layers (784-128-128-128-10); incoming targets from ridge \
                 regression against the weights, activations handled by gradient"
            }
            ExperimentName::LinearTp => {
                "four dense layers (784-128-128-128-10); hidden targets from learned \
                 reverse models trained on alternating epochs"
            }
            ExperimentName::Fa => {
                "two affine layers (784-32-10); backward route through fixed random \
                 matrices instead of the weights"
            }
            ExperimentName::Dfa => {
                "three layers (784-32-32-10); the output error projects directly onto \
                 every hidden layer through fixed random matrices"
            }
            ExperimentName::NeuralDecision => {
                "dropout linear front-end (784-256) under a refit tree-classifier \
                 ensemble (depth 10); front-end targets picked by hill climbing over \
                 stochastic candidates"
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepOrderConfig {
    StepXFirst,
    StepFirst,
}

impl From<StepOrderConfig> for StepOrder {
    fn from(c: StepOrderConfig) -> StepOrder {
        match c {
            StepOrderConfig::StepXFirst => StepOrder::StepXFirst,
            StepOrderConfig::StepFirst => StepOrder::StepFirst,
        }
    }
}

/// Everything a run needs; one TOML document per experiment ships in the
/// crate's `configs/` directory and command-line flags override its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub name: ExperimentName,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Double the batch size every this many epochs, capped at the training
    /// subset size. Zero disables the schedule.
    pub batch_double_every: usize,
    pub step_order: StepOrderConfig,
    pub diagnostics: bool,
    pub train_subset: usize,
    pub test_subset: usize,
    pub lr: f64,
    /// Ridge regularization for least-squares target steps.
    pub ridge_lambda: f64,
    /// Multiplier on gradient targets (1.0 applies the rule literally).
    pub step_x_scale: f64,
    pub input_descent_iterations: usize,
    pub input_descent_step: f64,
    pub dropout_p: f64,
    /// Per-epoch linear decay of the dropout probability; 0 keeps it fixed.
    pub dropout_decay: f64,
    /// Hill-climbing candidate count.
    pub candidates: usize,
    pub ensemble_capacity: usize,
    pub tree_max_depth: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The checked-in per-experiment defaults, compiled into the binary.
    pub fn default_for(name: ExperimentName) -> Self {
        let text = match name {
            ExperimentName::Baseline => include_str!("../../configs/baseline.toml"),
            ExperimentName::DecisionLinear => include_str!("../../configs/decision-linear.toml"),
            ExperimentName::LeastSquaresTp => include_str!("../../configs/least-squares-tp.toml"),
            ExperimentName::LinearTp => include_str!("../../configs/linear-tp.toml"),
            ExperimentName::Fa => include_str!("../../configs/fa.toml"),
            ExperimentName::Dfa => include_str!("../../configs/dfa.toml"),
            ExperimentName::NeuralDecision => include_str!("../../configs/neural-decision.toml"),
        };
        Self::from_toml_str(text).expect("bundled configs parse")
    }
}
