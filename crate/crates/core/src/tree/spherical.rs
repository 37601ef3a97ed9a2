use alloc::vec::Vec;

use super::growth::{pgr_from_log_sizes, PgrEstimate};
use super::{Tree, TreeError, NO_PARENT};
use crate::numeric::ln;

/// A spherically symmetric tree stored as one child count per generation.
///
/// Every vertex at generation `g` has `branching[g]` children. Level sizes
/// are kept as logarithms, so depths far beyond anything materialisable
/// are cheap.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalTree {
    branching: Vec<u32>,
    log_sizes: Vec<f64>,
}

impl SphericalTree {
    /// `branching[g]` children per vertex at generation `g`, for
    /// `g < branching.len()`; the depth cap is `branching.len()`.
    pub fn new(branching: Vec<u32>) -> Result<Self, TreeError> {
        if branching.is_empty() {
            return Err(TreeError::InvalidSpec("depth_cap must be at least 1"));
        }
        let mut log_sizes = Vec::with_capacity(branching.len() + 1);
        let mut acc = 0.0;
        log_sizes.push(acc);
        for &c in &branching {
            acc += if c == 0 { f64::NEG_INFINITY } else { ln(f64::from(c)) };
            log_sizes.push(acc);
        }
        Ok(Self { branching, log_sizes })
    }

    /// Expands a profile whose last entry repeats forever.
    pub fn from_profile(profile: &[u32], depth_cap: u32) -> Result<Self, TreeError> {
        let Some(&last) = profile.last() else {
            return Err(TreeError::InvalidSpec("profile is empty"));
        };
        let branching = (0..depth_cap as usize).map(|g| profile.get(g).copied().unwrap_or(last)).collect();
        Self::new(branching)
    }

    /// Root has one child; vertices at generations `1, 2, 4, 8, ...` have
    /// `d` children; all others have one.
    pub fn zd_like(d: u32, depth_cap: u32) -> Self {
        let branching = (0..depth_cap).map(|g| if g >= 1 && g.is_power_of_two() { d } else { 1 }).collect();
        Self::new(branching).unwrap_or_else(|_| Self::path(0))
    }

    /// Every vertex, the root included, has `k` children.
    pub fn regular(k: u32, depth_cap: u32) -> Self {
        Self::new(alloc::vec![k; depth_cap.max(1) as usize]).expect("nonempty")
    }

    pub fn path(depth_cap: u32) -> Self {
        Self::regular(1, depth_cap)
    }

    /// Chooses child counts greedily so that `|E_n|` tracks `target(n)`
    /// from below within a factor of two (once `target(n) ≥ 1`).
    pub fn tracking(depth_cap: u32, target: impl Fn(u32) -> f64) -> Result<Self, TreeError> {
        let mut branching = Vec::with_capacity(depth_cap as usize);
        let mut size = 1.0f64;
        for g in 0..depth_cap {
            let want = target(g + 1) / size;
            let c = if want.is_finite() && want >= 2.0 { libm::floor(want).min(f64::from(u32::MAX)) as u32 } else { 1 };
            size *= f64::from(c);
            branching.push(c);
        }
        Self::new(branching)
    }

    pub fn depth_cap(&self) -> u32 {
        self.branching.len() as u32
    }

    /// Children per vertex at generation `g` (0 at or beyond the cap).
    pub fn children_at(&self, g: u32) -> u32 {
        self.branching.get(g as usize).copied().unwrap_or(0)
    }

    pub fn branching(&self) -> &[u32] {
        &self.branching
    }

    /// `ln |E_n|`, or `-∞` once the tree has died.
    pub fn log_level_size(&self, n: u32) -> f64 {
        self.log_sizes.get(n as usize).copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn level_size(&self, n: u32) -> f64 {
        libm::exp(self.log_level_size(n))
    }

    /// Keeps generations `0..=depth`.
    pub fn truncate(&self, depth: u32) -> Self {
        let keep = (depth.max(1) as usize).min(self.branching.len());
        Self::new(self.branching[..keep].to_vec()).expect("nonempty")
    }

    /// Finite-depth proxy for `liminf ln|E_n| / ln n`.
    pub fn pgr_estimate(&self) -> Result<PgrEstimate, TreeError> {
        pgr_from_log_sizes(self.depth_cap(), |n| self.log_level_size(n))
    }

    /// Expands into an arena tree, vertices numbered level by level.
    pub fn materialize(&self, vertex_budget: usize) -> Result<Tree, TreeError> {
        let budget = vertex_budget.min(NO_PARENT as usize - 1);
        let mut total = 1.0;
        for n in 1..=self.depth_cap() {
            total += self.level_size(n);
        }
        if total > budget as f64 {
            return Err(TreeError::TooLarge(vertex_budget));
        }
        let mut parent = Vec::with_capacity(total as usize);
        parent.push(NO_PARENT);
        let mut level = 0..1u32;
        for &c in &self.branching {
            let start = parent.len() as u32;
            for v in level.clone() {
                for _ in 0..c {
                    parent.push(v);
                }
            }
            level = start..parent.len() as u32;
        }
        Ok(Tree::assemble(parent, Some(self.depth_cap())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zd_sizes() {
        let t = SphericalTree::zd_like(2, 4);
        let sizes: Vec<f64> = (1..=4).map(|n| t.level_size(n)).collect();
        assert_eq!(sizes, [1.0, 2.0, 4.0, 4.0]);
        let explicit = t.materialize(100).unwrap();
        assert_eq!(explicit.level_sizes(), [1, 1, 2, 4, 4]);
    }

    #[test]
    fn zd_sizes_follow_dyadic_rule() {
        let t = SphericalTree::zd_like(2, 300);
        assert_eq!(t.level_size(1), 1.0);
        for n in 2..=300u32 {
            // One doubling per power of two below n.
            let expected = 2f64.powi((n - 1).ilog2() as i32 + 1);
            assert!((t.level_size(n) - expected).abs() < 1e-6 * expected, "n = {n}");
        }
    }

    #[test]
    fn profile_repeats_last_entry() {
        let t = SphericalTree::from_profile(&[1, 3, 2], 6).unwrap();
        assert_eq!(t.branching(), &[1, 3, 2, 2, 2, 2]);
        assert!(SphericalTree::from_profile(&[], 3).is_err());
    }

    #[test]
    fn tracking_stays_within_factor_two() {
        let t = SphericalTree::tracking(2000, |n| f64::from(n) * f64::from(n)).unwrap();
        for n in 2..=2000u32 {
            let r = t.level_size(n) / (f64::from(n) * f64::from(n));
            assert!((0.5..=1.0).contains(&r), "n = {n}, ratio {r}");
        }
    }

    #[test]
    fn materialize_respects_budget() {
        let t = SphericalTree::regular(2, 20);
        assert_eq!(t.materialize(1000), Err(TreeError::TooLarge(1000)));
        assert_eq!(t.truncate(9).materialize(1023).unwrap().len(), 1023);
    }

    #[test]
    fn dead_profile() {
        let t = SphericalTree::from_profile(&[2, 0], 5).unwrap();
        assert_eq!(t.level_size(1), 2.0);
        assert_eq!(t.level_size(2), 0.0);
        let explicit = t.materialize(10).unwrap();
        assert_eq!(explicit.len(), 3);
        assert_eq!(explicit.depth_cap(), 5);
        assert!(explicit.is_dead_end(1));
    }
}
