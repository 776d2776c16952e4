use crate::error::{Error, Result};
use crate::kaku::{
    next_machine_id, suffix_loss, Assessment, Criterion, Io, LearningMachine, MachineId, State,
    StateValue,
};

use std::collections::HashMap;

/// Where a layer's target comes from during the backward walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetRouting {
    /// The io produced by the successor's `step_x` (the ordinary chain).
    FromSuccessor,
    /// The stack's global target, with the global output error published to
    /// the layer through state (direct feedback).
    Global,
}

/// How a layer's `step_x` is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepXKind {
    Standard,
    /// Generate `candidates` stochastic forward passes of the incoming layer
    /// and let the machine pick per-sample winners (hill climbing against a
    /// stochastic incoming layer).
    HillClimbIncoming { candidates: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOrder {
    /// Compute the incoming target before updating parameters (as in
    /// ordinary backpropagation).
    StepXFirst,
    /// Update parameters first, then compute the incoming target from the
    /// updated layer.
    StepFirst,
}

/// One layer slot of a stack.
#[derive(Clone)]
pub struct StackSlot {
    pub machine: Box<dyn LearningMachine>,
    pub routing: TargetRouting,
    pub step_x_kind: StepXKind,
}

impl StackSlot {
    pub fn standard(machine: Box<dyn LearningMachine>) -> Self {
        StackSlot {
            machine,
            routing: TargetRouting::FromSuccessor,
            step_x_kind: StepXKind::Standard,
        }
    }

    pub fn global(machine: Box<dyn LearningMachine>) -> Self {
        StackSlot {
            machine,
            routing: TargetRouting::Global,
            step_x_kind: StepXKind::Standard,
        }
    }

    pub fn with_hill_climb(mut self, candidates: usize) -> Self {
        self.step_x_kind = StepXKind::HillClimbIncoming { candidates };
        self
    }
}

/// Per-layer diagnostics for one training step.
#[derive(Debug, Clone, Default)]
pub struct LayerStepRecord {
    pub layer: String,
    /// Global error reduction across this layer's parameter update.
    pub ger: Option<f64>,
    /// Local error reduction across this layer's parameter update.
    pub ler: Option<f64>,
    /// Mean absolute deviation between the propagated target and the
    /// output of the layer below.
    pub target_mad: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct StepMetrics {
    /// Global loss of the forward pass, before any update.
    pub global_loss: f64,
    /// Number of `step_x` invocations during the walk.
    pub step_x_calls: usize,
    pub layers: Vec<LayerStepRecord>,
}

/// A deep model as a linear stack of semi-autonomous machines.
///
/// `train_step` runs the forward chain caching every inter-layer io, then
/// walks the layers back to front: each machine receives as target exactly
/// what its successor's `step_x` produced (or the global target, by routing),
/// updates itself, and hands a fresh target down.
pub struct StackedLearner {
    id: MachineId,
    name: String,
    slots: Vec<StackSlot>,
    global_criterion: Criterion,
    step_order: StepOrder,
    diagnostics: bool,
    epoch: u64,
    step_state: State,
    forward_chains: HashMap<crate::kaku::IoId, Vec<Io>>,
}

impl StackedLearner {
    pub fn new(name: &str, slots: Vec<StackSlot>, global_criterion: Criterion) -> Self {
        assert!(!slots.is_empty(), "a stack needs at least one layer");
        StackedLearner {
            id: next_machine_id(),
            name: name.to_string(),
            slots,
            global_criterion,
            step_order: StepOrder::StepXFirst,
            diagnostics: false,
            epoch: 0,
            step_state: State::new(),
            forward_chains: HashMap::new(),
        }
    }

    pub fn with_step_order(mut self, order: StepOrder) -> Self {
        self.step_order = order;
        self
    }

    pub fn with_diagnostics(mut self, on: bool) -> Self {
        self.diagnostics = on;
        self
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[StackSlot] {
        &self.slots
    }

    pub fn machine(&self, i: usize) -> &dyn LearningMachine {
        self.slots[i].machine.as_ref()
    }

    pub fn global_criterion(&self) -> &Criterion {
        &self.global_criterion
    }

    fn suffix_refs(&self, from: usize) -> Vec<&dyn LearningMachine> {
        self.slots[from..].iter().map(|s| s.machine.as_ref()).collect()
    }

    fn measure_pre(&self, i: usize, x_i: &Io, t_i: &Io, t_global: &Io) -> Result<(f64, f64)> {
        let ger_pre = suffix_loss(&self.global_criterion, &self.suffix_refs(i), x_i, t_global)?;
        let m = self.slots[i].machine.as_ref();
        let ler_pre = m.assess_y(&m.predict(x_i)?, t_i)?.value;
        Ok((ger_pre, ler_pre))
    }

    /// Run one full training step on a minibatch, returning the per-layer
    /// diagnostics gathered along the way.
    pub fn train_step(&mut self, x: &Io, t: &Io) -> Result<StepMetrics> {
        let mut outer = State::new();
        self.forward(x, &mut outer, true)?;
        self.walk(x, t, &mut outer)
    }

    /// The backward walk over a previously forwarded chain.
    fn walk(&mut self, x: &Io, t: &Io, outer: &mut State) -> Result<StepMetrics> {
        let ios = self
            .forward_chains
            .get(&x.id())
            .cloned()
            .ok_or_else(|| {
                Error::Ordering(format!("{}: step before forward for this io", self.name))
            })?;
        let n = self.slots.len();
        let y_final = &ios[n];

        let mut metrics = StepMetrics {
            global_loss: self
                .global_criterion
                .evaluate(y_final.single(), t.single())?,
            step_x_calls: 0,
            layers: vec![LayerStepRecord::default(); n],
        };

        // publish the global output error for any direct-feedback layer
        if self
            .slots
            .iter()
            .any(|s| s.routing == TargetRouting::Global)
        {
            let ge = self
                .global_criterion
                .gradient(y_final.single(), t.single())?;
            for (i, slot) in self.slots.iter().enumerate() {
                if slot.routing == TargetRouting::Global {
                    self.step_state.store(
                        slot.machine.id(),
                        ios[i].id(),
                        "global_error",
                        StateValue::Matrix(ge.clone()),
                    );
                }
            }
        }

        let mut t_cur = t.clone();
        for i in (0..n).rev() {
            let x_i = ios[i].clone();
            let t_i = match self.slots[i].routing {
                TargetRouting::Global => t.clone(),
                TargetRouting::FromSuccessor => t_cur.clone(),
            };
            metrics.layers[i].layer = self.slots[i].machine.name().to_string();

            let pre = if self.diagnostics {
                Some(self.measure_pre(i, &x_i, &t_i, t)?)
            } else {
                None
            };

            // does the layer below want a target from us?
            let propagate = i > 0 && self.slots[i - 1].routing == TargetRouting::FromSuccessor;

            if self.slots[i].machine.has_accumulate() {
                let (below, at) = self.slots.split_at_mut(i);
                let _ = below;
                at[0].machine.accumulate(&x_i, &t_i, &mut self.step_state)?;
            }

            let mut t_next: Option<Io> = None;
            let mut run_step_x = |slots: &mut [StackSlot],
                                  state: &mut State,
                                  calls: &mut usize|
             -> Result<Option<Io>> {
                if !propagate {
                    return Ok(None);
                }
                let (below, at) = slots.split_at_mut(i);
                let slot = &mut at[0];
                *calls += 1;
                match slot.step_x_kind {
                    StepXKind::Standard => slot.machine.step_x(&x_i, &t_i, state).map(Some),
                    StepXKind::HillClimbIncoming { candidates } => {
                        let incoming = below.last().ok_or_else(|| {
                            Error::Config(
                                "hill climbing needs an incoming layer below this one".into(),
                            )
                        })?;
                        let tree = slot
                            .machine
                            .as_any()
                            .downcast_ref::<crate::trees::TreeLayerLearner>()
                            .ok_or_else(|| {
                                Error::Config(
                                    "hill-climbing step_x is only available on tree layers".into(),
                                )
                            })?;
                        tree.hill_climb_step_x(
                            incoming.machine.as_ref(),
                            &ios[i - 1],
                            &t_i,
                            candidates,
                        )
                        .map(Some)
                    }
                }
            };

            match self.step_order {
                StepOrder::StepXFirst => {
                    t_next = run_step_x(&mut self.slots, &mut self.step_state, &mut metrics.step_x_calls)?;
                    self.slots[i]
                        .machine
                        .step(&x_i, &t_i, &mut self.step_state)?;
                }
                StepOrder::StepFirst => {
                    self.slots[i]
                        .machine
                        .step(&x_i, &t_i, &mut self.step_state)?;
                    t_next = run_step_x(&mut self.slots, &mut self.step_state, &mut metrics.step_x_calls)?;
                }
            }

            if let (Some((ger_pre, ler_pre)), rec) = (pre, &mut metrics.layers[i]) {
                let ger_post =
                    suffix_loss(&self.global_criterion, &self.suffix_refs(i), &x_i, t)?;
                let m = self.slots[i].machine.as_ref();
                let ler_post = m.assess_y(&m.predict(&x_i)?, &t_i)?.value;
                rec.ger = Some(ger_pre - ger_post);
                rec.ler = Some(ler_pre - ler_post);
            }

            if let Some(ref t_next) = t_next {
                if self.diagnostics {
                    let mad = t_next.single().sub(x_i.single())?.mean_abs();
                    metrics.layers[i].target_mad = Some(mad);
                }
                t_cur = t_next.clone();
            }
        }

        // remember what the lowest layer was given, for a nested step_x
        outer.store(self.id, x.id(), "t0", StateValue::Io(t_cur));
        outer.store(self.id, x.id(), "stepped", StateValue::Flag(true));
        Ok(metrics)
    }
}

impl Clone for StackedLearner {
    fn clone(&self) -> Self {
        StackedLearner {
            id: self.id,
            name: self.name.clone(),
            slots: self.slots.clone(),
            global_criterion: self.global_criterion,
            step_order: self.step_order,
            diagnostics: self.diagnostics,
            epoch: self.epoch,
            step_state: self.step_state.clone(),
            forward_chains: self.forward_chains.clone(),
        }
    }
}

impl LearningMachine for StackedLearner {
    fn id(&self) -> MachineId {
        self.id
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Io, _state: &mut State, release: bool) -> Result<Io> {
        // a fresh step begins: drop the previous step's scratch state
        self.step_state.clear();
        self.forward_chains.clear();
        let mut ios = vec![x.clone()];
        for slot in &mut self.slots {
            let next = slot
                .machine
                .forward(ios.last().unwrap(), &mut self.step_state, release)?;
            ios.push(next);
        }
        let out = ios.last().unwrap().clone();
        self.forward_chains.insert(x.id(), ios);
        Ok(out)
    }

    fn predict(&self, x: &Io) -> Result<Io> {
        let mut cur = x.clone();
        for slot in &self.slots {
            cur = slot.machine.predict(&cur)?;
        }
        Ok(cur)
    }

    fn assess_y(&self, y: &Io, t: &Io) -> Result<Assessment> {
        self.global_criterion.assess(y, t)
    }

    fn step(&mut self, x: &Io, t: &Io, state: &mut State) -> Result<()> {
        self.walk(x, t, state)?;
        Ok(())
    }

    fn step_x(&mut self, x: &Io, t: &Io, state: &mut State) -> Result<Io> {
        // declared dependency on step: refuse to run before it
        if !state.fetch_flag(self.id, x.id(), "stepped") {
            return Err(Error::Ordering(format!(
                "{}: step_x requires step to have run for this io",
                self.name
            )));
        }
        let t0 = state.fetch_io(self.id, x.id(), "t0")?.clone();
        let _ = t;
        self.slots[0].machine.step_x(x, &t0, &mut self.step_state)
    }

    fn on_epoch(&mut self, epoch: u64) {
        self.epoch = epoch;
        for slot in &mut self.slots {
            slot.machine.on_epoch(epoch);
        }
    }

    fn clone_machine(&self) -> Box<dyn LearningMachine> {
        Box::new(self.clone())
    }

    fn param_fingerprint(&self) -> u64 {
        let mut h: u64 = 0x57ac;
        for slot in &self.slots {
            h = h.rotate_left(23) ^ slot.machine.param_fingerprint();
        }
        h
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}
