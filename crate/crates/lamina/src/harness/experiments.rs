use crate::error::Result;
use crate::harness::config::{ExperimentConfig, ExperimentName};
use crate::kaku::{Criterion, Optimizer};
use crate::kikai::{
    DfaLearner, FaLearner, GradLearner, InputDescent, LeastSquaresLearner, StackSlot,
    StackedLearner, TargetPropLearner,
};
use crate::layers::{BatchNormLayer, DropoutLayer, Layer, LinearLayer, ReluLayer, Sequential};
use crate::numerics::Rng;
use crate::trees::{CartConfig, EstimatorSpec, TemporalEnsemble, TreeLayerLearner};
use crate::trees::ensemble::EstimatorKind;

const IMAGE_FEATURES: usize = 784;
const CLASSES: usize = 10;

/// Build the stack for a named experiment. Layer widths, losses and update
/// rules are fixed per experiment; learning rates, ridge strength, descent
/// iterations, dropout and ensemble shape come from the config.
pub fn build_experiment(config: &ExperimentConfig, rng: &mut Rng) -> Result<StackedLearner> {
    let stack = match config.name {
        ExperimentName::Baseline => build_baseline(config, rng),
        ExperimentName::DecisionLinear => build_decision_linear(config, rng)?,
        ExperimentName::LeastSquaresTp => build_least_squares_tp(config, rng),
        ExperimentName::LinearTp => build_linear_tp(config, rng),
        ExperimentName::Fa => build_fa(config, rng),
        ExperimentName::Dfa => build_dfa(config, rng),
        ExperimentName::NeuralDecision => build_neural_decision(config, rng)?,
    };
    Ok(stack
        .with_step_order(config.step_order.into())
        .with_diagnostics(config.diagnostics))
}

fn dense_block(d_in: usize, d_out: usize, rng: &mut Rng) -> Sequential {
    // linear -> relu -> batchnorm
    Sequential::new(vec![
        Box::new(LinearLayer::new(d_in, d_out, rng)),
        Box::new(ReluLayer::new()),
        Box::new(BatchNormLayer::new(d_out)),
    ])
}

fn build_baseline(config: &ExperimentConfig, rng: &mut Rng) -> StackedLearner {
    let lr = config.lr;
    let slots = vec![
        StackSlot::standard(Box::new(
            GradLearner::new(
                "dense-1",
                dense_block(IMAGE_FEATURES, 128, &mut rng.child("l1")),
                Criterion::sse(),
                Optimizer::adam(lr),
            )
            .with_step_x_scale(config.step_x_scale),
        )),
        StackSlot::standard(Box::new(
            GradLearner::new(
                "dense-2",
                dense_block(128, 32, &mut rng.child("l2")),
                Criterion::sse(),
                Optimizer::adam(lr),
            )
            .with_step_x_scale(config.step_x_scale),
        )),
        StackSlot::standard(Box::new(
            GradLearner::new(
                "head",
                Sequential::new(vec![Box::new(LinearLayer::new(
                    32,
                    CLASSES,
                    &mut rng.child("l3"),
                ))]),
                Criterion::cross_entropy(),
                Optimizer::adam(lr),
            )
            .with_step_x_scale(config.step_x_scale),
        )),
    ];
    StackedLearner::new("baseline", slots, Criterion::cross_entropy())
}

fn build_decision_linear(config: &ExperimentConfig, rng: &mut Rng) -> Result<StackedLearner> {
    let spec = EstimatorSpec {
        config: CartConfig::with_max_depth(config.tree_max_depth),
        kind: EstimatorKind::Regression { outputs: 32 },
    };
    let trees = TreeLayerLearner::new(
        "tree-bank",
        TemporalEnsemble::new(config.ensemble_capacity, spec)?,
    );
    // batchnorm over the tree outputs, then the classifier head
    let head_module = Sequential::new(vec![
        Box::new(BatchNormLayer::new(32)),
        Box::new(LinearLayer::new(32, CLASSES, &mut rng.child("head"))),
        Box::new(ReluLayer::new()),
    ]);
    let head = GradLearner::new(
        "head",
        head_module,
        Criterion::cross_entropy(),
        Optimizer::adam(config.lr),
    )
    .with_input_descent(InputDescent {
        iterations: config.input_descent_iterations,
        step: config.input_descent_step,
    });
    let slots = vec![
        StackSlot::standard(Box::new(trees)),
        StackSlot::standard(Box::new(head)),
    ];
    Ok(StackedLearner::new(
        "decision-linear",
        slots,
        Criterion::cross_entropy(),
    ))
}

fn build_least_squares_tp(config: &ExperimentConfig, rng: &mut Rng) -> StackedLearner {
    let lr = config.lr;
    let lambda = config.ridge_lambda;
    // linear -> batchnorm -> relu per hidden layer
    let hidden_suffix = |rng: &mut Rng, width: usize| {
        let _ = rng;
        Sequential::new(vec![
            Box::new(BatchNormLayer::new(width)) as Box<dyn Layer>,
            Box::new(ReluLayer::new()),
        ])
    };
    let slots = vec![
        StackSlot::standard(Box::new(GradLearner::new(
            "dense-1",
            Sequential::new(vec![
                Box::new(LinearLayer::new(IMAGE_FEATURES, 128, &mut rng.child("l1"))),
                Box::new(BatchNormLayer::new(128)),
                Box::new(ReluLayer::new()),
            ]),
            Criterion::sse(),
            Optimizer::adam(lr),
        ))),
        StackSlot::standard(Box::new(LeastSquaresLearner::new(
            "ridge-2",
            LinearLayer::new(128, 128, &mut rng.child("l2")),
            hidden_suffix(rng, 128),
            Criterion::sse(),
            Optimizer::adam(lr),
            lambda,
        ))),
        StackSlot::standard(Box::new(LeastSquaresLearner::new(
            "ridge-3",
            LinearLayer::new(128, 128, &mut rng.child("l3")),
            hidden_suffix(rng, 128),
            Criterion::sse(),
            Optimizer::adam(lr),
            lambda,
        ))),
        StackSlot::standard(Box::new(LeastSquaresLearner::new(
            "ridge-head",
            LinearLayer::new(128, CLASSES, &mut rng.child("l4")),
            Sequential::default(),
            Criterion::cross_entropy(),
            Optimizer::adam(lr),
            lambda,
        ))),
    ];
    StackedLearner::new("least-squares-tp", slots, Criterion::cross_entropy())
}

fn reverse_model(d_out: usize, d_in: usize, rng: &mut Rng) -> Sequential {
    Sequential::new(vec![
        Box::new(LinearLayer::new(d_out, d_in, &mut rng.child("rev1"))),
        Box::new(BatchNormLayer::new(d_in)),
        Box::new(ReluLayer::new()),
        Box::new(LinearLayer::new(d_in, d_in, &mut rng.child("rev2"))),
        Box::new(BatchNormLayer::new(d_in)),
    ])
}

fn build_linear_tp(config: &ExperimentConfig, rng: &mut Rng) -> StackedLearner {
    let lr = config.lr;
    let tp_layer = |name: &str, d_in: usize, d_out: usize, rng: &mut Rng| {
        let forward = Sequential::new(vec![
            Box::new(LinearLayer::new(d_in, d_out, &mut rng.child("fwd"))) as Box<dyn Layer>,
            Box::new(ReluLayer::new()),
        ]);
        TargetPropLearner::new(
            name,
            forward,
            reverse_model(d_out, d_in, rng),
            Criterion::sse(),
            Optimizer::adam(lr),
            Optimizer::adam(lr),
        )
    };
    let slots = vec![
        StackSlot::standard(Box::new(GradLearner::new(
            "dense-1",
            Sequential::new(vec![
                Box::new(LinearLayer::new(IMAGE_FEATURES, 128, &mut rng.child("l1"))),
                Box::new(ReluLayer::new()),
            ]),
            Criterion::sse(),
            Optimizer::adam(lr),
        ))),
        StackSlot::standard(Box::new(tp_layer("reverse-2", 128, 128, &mut rng.child("l2")))),
        StackSlot::standard(Box::new(tp_layer("reverse-3", 128, 128, &mut rng.child("l3")))),
        StackSlot::standard(Box::new(GradLearner::new(
            "head",
            Sequential::new(vec![Box::new(LinearLayer::new(
                128,
                CLASSES,
                &mut rng.child("l4"),
            ))]),
            Criterion::cross_entropy(),
            Optimizer::adam(lr),
        ))),
    ];
    StackedLearner::new("linear-tp", slots, Criterion::cross_entropy())
}

fn build_fa(config: &ExperimentConfig, rng: &mut Rng) -> StackedLearner {
    let lr = config.lr;
    let slots = vec![
        StackSlot::standard(Box::new(FaLearner::new(
            "fa-1",
            IMAGE_FEATURES,
            32,
            true,
            Criterion::sse(),
            Optimizer::adam(lr),
            &mut rng.child("l1"),
        ))),
        StackSlot::standard(Box::new(FaLearner::new(
            "fa-head",
            32,
            CLASSES,
            false,
            Criterion::cross_entropy(),
            Optimizer::adam(lr),
            &mut rng.child("l2"),
        ))),
    ];
    StackedLearner::new("fa", slots, Criterion::cross_entropy())
}

fn build_dfa(config: &ExperimentConfig, rng: &mut Rng) -> StackedLearner {
    let lr = config.lr;
    let bn_relu = |width: usize| {
        Sequential::new(vec![
            Box::new(BatchNormLayer::new(width)) as Box<dyn Layer>,
            Box::new(ReluLayer::new()),
        ])
    };
    let slots = vec![
        StackSlot::global(Box::new(DfaLearner::new(
            "dfa-1",
            IMAGE_FEATURES,
            32,
            CLASSES,
            bn_relu(32),
            Criterion::cross_entropy(),
            Optimizer::adam(lr),
            &mut rng.child("l1"),
        ))),
        StackSlot::global(Box::new(DfaLearner::new(
            "dfa-2",
            32,
            32,
            CLASSES,
            bn_relu(32),
            Criterion::cross_entropy(),
            Optimizer::adam(lr),
            &mut rng.child("l2"),
        ))),
        StackSlot::global(Box::new(FaLearner::new(
            "fa-head",
            32,
            CLASSES,
            false,
            Criterion::cross_entropy(),
            Optimizer::adam(lr),
            &mut rng.child("l3"),
        ))),
    ];
    StackedLearner::new("dfa", slots, Criterion::cross_entropy())
}

fn build_neural_decision(config: &ExperimentConfig, rng: &mut Rng) -> Result<StackedLearner> {
    let front = GradLearner::new(
        "dropout-front",
        Sequential::new(vec![
            Box::new(
                DropoutLayer::new(config.dropout_p, rng.child("dropout"))?
                    .with_decay(config.dropout_decay),
            ),
            Box::new(LinearLayer::new(IMAGE_FEATURES, 256, &mut rng.child("l1"))),
            Box::new(BatchNormLayer::new(256)),
        ]),
        Criterion::mse(),
        Optimizer::adam(config.lr),
    );
    let spec = EstimatorSpec {
        config: CartConfig::with_max_depth(config.tree_max_depth),
        kind: EstimatorKind::Classification { classes: CLASSES },
    };
    let trees = TreeLayerLearner::new(
        "tree-classifier",
        TemporalEnsemble::new(config.ensemble_capacity, spec)?,
    );
    let slots = vec![
        StackSlot::standard(Box::new(front)),
        StackSlot::standard(Box::new(trees)).with_hill_climb(config.candidates),
    ];
    Ok(StackedLearner::new(
        "neural-decision",
        slots,
        Criterion::cross_entropy(),
    ))
}
