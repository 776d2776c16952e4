//! Central finite-difference verification of hand-written backward passes.
//!
//! The check projects the layer output onto a fixed random direction to get a
//! scalar loss, computes its analytic gradient via `backward`, and compares
//! against central differences of the forward pass alone. Every function
//! evaluation runs on a fresh clone of the pristine layer, so stochastic
//! layers (dropout) see the identical mask on each probe and running
//! statistics never leak between evaluations.

use crate::error::Result;
use crate::layers::{Layer, Mode, Sequential};
use crate::numerics::{Matrix, Rng};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub step: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            rtol: 1e-5,
            atol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub name: String,
    pub max_rel_error: f64,
    pub entries_checked: usize,
    pub pass: bool,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} ({} entries, max relative error {:.3e})",
            self.name,
            if self.pass { "pass" } else { "FAIL" },
            self.entries_checked,
            self.max_rel_error
        )
    }
}

fn projected_loss(module: &Sequential, x: &Matrix, r: &Matrix) -> Result<f64> {
    let mut work = module.clone();
    let y = work.forward(x, Mode::Train)?;
    Ok(y.hadamard(r)?.sum())
}

/// Check a module's input and parameter gradients against central
/// differences on `x`. Inputs should stay away from ReLU kinks by more than
/// the step size.
pub fn check_module(
    name: &str,
    module: &Sequential,
    x: &Matrix,
    rng: &mut Rng,
    cfg: GradCheckConfig,
) -> Result<GradCheckReport> {
    // size the projection off the pure predict path, which consumes no rng,
    // then run the single analytic forward on a clone of the pristine module
    let y_shape = module.predict(x)?;
    let r = rng.gaussian(y_shape.rows(), y_shape.cols(), 0.0, 1.0);
    let mut analytic = module.clone();
    analytic.forward(x, Mode::Train)?;
    let dx = analytic.backward(&r, true)?;
    let param_grads: Vec<Matrix> = analytic
        .param_grad_pairs()
        .into_iter()
        .map(|(_, g)| g.clone())
        .collect();

    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    let mut worst_pair = (0.0, 0.0);

    let mut compare = |fd: f64, an: f64| {
        let denom = fd.abs().max(an.abs());
        let rel = if denom > 0.0 { (fd - an).abs() / denom } else { 0.0 };
        if (fd - an).abs() > cfg.atol && rel > max_rel {
            max_rel = rel;
            worst_pair = (fd, an);
        }
        checked += 1;
    };

    // input gradient
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let mut hi = x.clone();
            hi.set(i, j, hi.get(i, j) + cfg.step);
            let mut lo = x.clone();
            lo.set(i, j, lo.get(i, j) - cfg.step);
            let fd = (projected_loss(module, &hi, &r)? - projected_loss(module, &lo, &r)?)
                / (2.0 * cfg.step);
            compare(fd, dx.get(i, j));
        }
    }

    // parameter gradients, slot by slot
    let n_slots = param_grads.len();
    for slot in 0..n_slots {
        let n_entries = param_grads[slot].data().len();
        for k in 0..n_entries {
            let eval = |delta: f64| -> Result<f64> {
                let mut work = module.clone();
                work.param_grad_pairs()[slot].0.data_mut()[k] += delta;
                let y = work.forward(x, Mode::Train)?;
                Ok(y.hadamard(&r)?.sum())
            };
            let fd = (eval(cfg.step)? - eval(-cfg.step)?) / (2.0 * cfg.step);
            compare(fd, param_grads[slot].data()[k]);
        }
    }

    Ok(GradCheckReport {
        name: name.to_string(),
        max_rel_error: max_rel,
        entries_checked: checked,
        pass: max_rel < cfg.rtol,
    })
}

/// Random input with entries bounded away from zero, so ReLU masks are
/// stable under the finite-difference step.
pub fn kink_safe_input(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        sign * rng.uniform_in(0.1, 1.1)
    })
}

/// The standard battery: every layer type alone, then composed stacks, on a
/// set of seeded random shapes. Returns one report per case.
pub fn standard_battery(seed: u64) -> Result<Vec<GradCheckReport>> {
    use crate::layers::{BatchNormLayer, DropoutLayer, LinearLayer, ReluLayer};

    let mut rng = Rng::new(seed);
    let cfg = GradCheckConfig::default();
    let mut reports = Vec::new();

    let shapes = [
        (5usize, 7usize, 4usize),
        (4, 3, 6),
        (6, 8, 2),
        (3, 5, 5),
        (8, 4, 3),
        (5, 6, 6),
        (4, 7, 2),
        (7, 3, 4),
        (6, 5, 8),
        (5, 4, 4),
        (4, 6, 3),
        (9, 5, 2),
    ];

    for (idx, &(batch, d_in, d_out)) in shapes.iter().enumerate() {
        let mut init = rng.child(&format!("init:{idx}"));
        let x = kink_safe_input(batch, d_in, &mut rng.child(&format!("x:{idx}")));
        let mut check_rng = rng.child(&format!("proj:{idx}"));

        let linear = Sequential::new(vec![Box::new(LinearLayer::new(d_in, d_out, &mut init))]);
        reports.push(check_module(
            &format!("linear[{batch}x{d_in}->{d_out}]"),
            &linear,
            &x,
            &mut check_rng,
            cfg,
        )?);

        let relu = Sequential::new(vec![Box::new(ReluLayer::new())]);
        reports.push(check_module(
            &format!("relu[{batch}x{d_in}]"),
            &relu,
            &x,
            &mut check_rng,
            cfg,
        )?);

        let dropout = Sequential::new(vec![Box::new(DropoutLayer::new(
            0.3,
            init.child("dropout"),
        )?)]);
        reports.push(check_module(
            &format!("dropout[{batch}x{d_in}]"),
            &dropout,
            &x,
            &mut check_rng,
            cfg,
        )?);

        let bn = Sequential::new(vec![Box::new(BatchNormLayer::new(d_in))]);
        reports.push(check_module(
            &format!("batchnorm[{batch}x{d_in}]"),
            &bn,
            &x,
            &mut check_rng,
            cfg,
        )?);

        // composed stack: linear -> relu -> batchnorm -> dropout -> linear
        let composed = Sequential::new(vec![
            Box::new(LinearLayer::new(d_in, d_out, &mut init)),
            Box::new(ReluLayer::new()),
            Box::new(BatchNormLayer::new(d_out)),
            Box::new(DropoutLayer::new(0.2, init.child("dropout2"))?),
            Box::new(LinearLayer::new(d_out, 3, &mut init)),
        ]);
        reports.push(check_module(
            &format!("composed[{batch}x{d_in}->{d_out}->3]"),
            &composed,
            &x,
            &mut check_rng,
            cfg,
        )?);
    }

    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{BatchNormLayer, DropoutLayer, LinearLayer, ReluLayer};

    #[test]
    fn every_layer_type_passes_on_random_input() {
        let mut rng = Rng::new(1234);
        let mut init = rng.child("init");
        let x = kink_safe_input(5, 7, &mut rng.child("x"));
        let cfg = GradCheckConfig::default();

        let cases: Vec<(&str, Sequential)> = vec![
            (
                "linear",
                Sequential::new(vec![Box::new(LinearLayer::new(7, 4, &mut init))]),
            ),
            ("relu", Sequential::new(vec![Box::new(ReluLayer::new())])),
            (
                "dropout",
                Sequential::new(vec![Box::new(
                    DropoutLayer::new(0.4, init.child("drop")).unwrap(),
                )]),
            ),
            (
                "batchnorm",
                Sequential::new(vec![Box::new(BatchNormLayer::new(7))]),
            ),
        ];
        for (name, module) in cases {
            let report =
                check_module(name, &module, &x, &mut rng.child(name), cfg).unwrap();
            assert!(report.pass, "{report}");
        }
    }

    #[test]
    fn composed_stack_backward_matches_finite_differences() {
        let mut rng = Rng::new(4321);
        let mut init = rng.child("init");
        let module = Sequential::new(vec![
            Box::new(LinearLayer::new(6, 8, &mut init)),
            Box::new(ReluLayer::new()),
            Box::new(BatchNormLayer::new(8)),
            Box::new(DropoutLayer::new(0.25, init.child("drop")).unwrap()),
            Box::new(LinearLayer::new(8, 3, &mut init)),
        ]);
        let x = kink_safe_input(5, 6, &mut rng.child("x"));
        let report = check_module(
            "composed",
            &module,
            &x,
            &mut rng.child("check"),
            GradCheckConfig::default(),
        )
        .unwrap();
        assert!(report.pass, "{report}");
    }
}
