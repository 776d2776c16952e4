use std::sync::atomic::{AtomicU64, Ordering};

use crate::numerics::Matrix;

static NEXT_IO_ID: AtomicU64 = AtomicU64::new(1);

/// Identity token of an [`Io`]. Every construction gets a fresh one, so two
/// ios with equal tensors are still distinguishable in [`crate::kaku::State`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IoId(u64);

/// Ordered tuple of matrices with a unique identity, used uniformly for
/// inputs, outputs and targets.
///
/// Cloning preserves the identity (a clone is a snapshot of the same logical
/// value); only `new`/`from_matrix` mint fresh ids.
#[derive(Debug, Clone)]
pub struct Io {
    id: IoId,
    parts: Vec<Matrix>,
}

impl Io {
    pub fn new(parts: Vec<Matrix>) -> Self {
        assert!(!parts.is_empty(), "an io must carry at least one matrix");
        Io {
            id: IoId(NEXT_IO_ID.fetch_add(1, Ordering::Relaxed)),
            parts,
        }
    }

    pub fn from_matrix(m: Matrix) -> Self {
        Io::new(vec![m])
    }

    pub fn id(&self) -> IoId {
        self.id
    }

    pub fn parts(&self) -> &[Matrix] {
        &self.parts
    }

    /// The first (and in practice usually only) matrix.
    pub fn single(&self) -> &Matrix {
        &self.parts[0]
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Fingerprint over all parts; ignores the identity token.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
        for p in &self.parts {
            h = h.rotate_left(17) ^ p.fingerprint();
        }
        h
    }
}
