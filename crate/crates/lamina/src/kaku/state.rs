use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kaku::{Assessment, Io, IoId, MachineId};
use crate::numerics::Matrix;

/// A value a machine may stash for the current learning step.
#[derive(Debug, Clone)]
pub enum StateValue {
    Matrix(Matrix),
    Io(Io),
    Assessment(Assessment),
    Flag(bool),
    Scalar(f64),
}

/// Scratch storage for one training step, keyed by
/// `(machine identity, io identity, name)`. Entries for distinct ios never
/// alias, so the same machine can be mid-flight on several inputs. The owning
/// stack creates a fresh `State` per step and drops it afterwards.
#[derive(Debug, Default, Clone)]
pub struct State {
    entries: HashMap<(MachineId, IoId, String), StateValue>,
}

impl State {
    pub fn new() -> Self {
        State::default()
    }

    pub fn store(&mut self, machine: MachineId, io: IoId, key: &str, value: StateValue) {
        self.entries.insert((machine, io, key.to_string()), value);
    }

    pub fn fetch(&self, machine: MachineId, io: IoId, key: &str) -> Option<&StateValue> {
        self.entries.get(&(machine, io, key.to_string()))
    }

    pub fn contains(&self, machine: MachineId, io: IoId, key: &str) -> bool {
        self.fetch(machine, io, key).is_some()
    }

    fn missing(machine: MachineId, key: &str) -> Error {
        Error::MissingState {
            machine: format!("{machine:?}"),
            key: key.to_string(),
        }
    }

    pub fn fetch_matrix(&self, machine: MachineId, io: IoId, key: &str) -> Result<&Matrix> {
        match self.fetch(machine, io, key) {
            Some(StateValue::Matrix(m)) => Ok(m),
            _ => Err(Self::missing(machine, key)),
        }
    }

    pub fn fetch_io(&self, machine: MachineId, io: IoId, key: &str) -> Result<&Io> {
        match self.fetch(machine, io, key) {
            Some(StateValue::Io(io)) => Ok(io),
            _ => Err(Self::missing(machine, key)),
        }
    }

    pub fn fetch_flag(&self, machine: MachineId, io: IoId, key: &str) -> bool {
        matches!(self.fetch(machine, io, key), Some(StateValue::Flag(true)))
    }

    /// Remove every entry belonging to the given io.
    pub fn clear_io(&mut self, io: IoId) {
        self.entries.retain(|(_, id, _), _| *id != io);
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
