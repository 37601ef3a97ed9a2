use crate::counter::{hash3, open_unit};
use crate::numeric::ln;
use crate::tree::{Tree, VertexId};

use super::WalkError;

/// Unit-mean exponential clocks `Y(ν, μ, k)` keyed by an oriented edge
/// and a crossing index.
///
/// The map is a pure function of `(seed, ν, μ, k)`, so every walk, path
/// extension or replay that queries the same key sees the same value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClockSource {
    seed: u64,
}

impl ClockSource {
    pub const fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub const fn seed(&self) -> u64 {
        self.seed
    }

    /// `Y(from, to, k)` without an adjacency check.
    #[inline]
    pub fn sample(&self, from: VertexId, to: VertexId, k: u64) -> f64 {
        -ln(open_unit(hash3(self.seed, from as u64, to as u64, k)))
    }

    /// `Y(from, to, k)` for adjacent vertices of `tree`.
    pub fn sample_checked(&self, tree: &Tree, from: VertexId, to: VertexId, k: u64) -> Result<f64, WalkError> {
        if from >= tree.len() || to >= tree.len() || !adjacent(tree, from, to) {
            return Err(WalkError::NotAdjacent(from, to));
        }
        Ok(self.sample(from, to, k))
    }
}

pub(crate) fn adjacent(tree: &Tree, a: VertexId, b: VertexId) -> bool {
    tree.parent(a) == Some(b) || tree.parent(b) == Some(a)
}

/// Free-function form of [`ClockSource::sample_checked`].
pub fn clock_sample(clocks: &ClockSource, tree: &Tree, from: VertexId, to: VertexId, k: u64) -> Result<f64, WalkError> {
    clocks.sample_checked(tree, from, to, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_finite() {
        let c = ClockSource::new(42);
        assert_eq!(c.sample(3, 1, 7), c.sample(3, 1, 7));
        assert_ne!(c.sample(3, 1, 7), c.sample(1, 3, 7));
        assert_ne!(c.sample(3, 1, 7), ClockSource::new(43).sample(3, 1, 7));
        // The extreme hash words still map inside (0, 1).
        assert!((-ln(open_unit(0))).is_finite());
        assert!((-ln(open_unit(u64::MAX))) > 0.0);
    }

    #[test]
    fn adjacency_is_checked() {
        let t = Tree::path(3);
        let c = ClockSource::new(1);
        assert!(c.sample_checked(&t, 1, 2, 0).is_ok());
        assert!(c.sample_checked(&t, 2, 1, 0).is_ok());
        assert_eq!(c.sample_checked(&t, 0, 2, 0), Err(WalkError::NotAdjacent(0, 2)));
        assert!(c.sample_checked(&t, 0, 9, 0).is_err());
    }

    #[test]
    fn mean_is_one() {
        let c = ClockSource::new(7);
        let n = 1_000_000u64;
        let mean: f64 = (0..n).map(|k| c.sample(k as usize, k as usize + 1, k % 3)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 3e-3, "{mean}");
    }
}
