//! One-dimensional ruin probabilities along tree paths, modified
//! conductances, cutset minimisation and the critical-exponent estimators.
//!
//! For an edge `e` with prefix sum `S_<(e) = Σ_{g<e} 1/δ_g`,
//!
//! ```text
//! ψ(e) = S_<(e) / (1/w_e + S_<(e)),   Ψ(e) = Π_{g≤e} ψ(g),   c(e) = Ψ(e) / (1 − ψ(e)),
//! ```
//!
//! with `ψ = Ψ = c = 1` on level-1 edges. Everything is accumulated in
//! log space, so profiles stay finite at depths where `Ψ` itself
//! underflows.

use alloc::vec;
use alloc::vec::Vec;

use crate::numeric::{exp, ln_1p, log_add_exp};
use crate::tree::{EdgeId, Tree, TreeError};
use crate::weights::{WeightError, WeightScheme};

mod cutset;
mod estimate;

pub(crate) use cutset::{children_sum, min_cut_values};
pub use cutset::{cutset_min, cutset_min_levels, CutsetShape, LogScores};
pub use estimate::{
    branching_number_estimate, brr_estimate, critical_check, rt_estimate, series_converges, BisectionConfig,
    CriticalReport, CriticalVerdict, Estimate, Probe, Regime,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuinError {
    #[error("{0}")]
    Tree(#[from] TreeError),
    #[error("{0}")]
    Weights(#[from] WeightError),
    #[error("score of edge {0} must be finite and nonnegative")]
    InvalidScore(usize),
    #[error("score array has {got} entries, need {need}")]
    ScoreLength { got: usize, need: usize },
    #[error("this tree shape only accepts {0}")]
    UnsupportedScores(&'static str),
    #[error("estimator needs depth_cap >= {required}, got {depth_cap}")]
    TooShallow { depth_cap: u32, required: u32 },
    #[error("invalid bisection bracket or tolerance")]
    InvalidBracket,
    #[error("no branch reaches depth_cap")]
    Extinct,
    #[error("classification is not monotone in lambda")]
    Inconsistent { trace: Vec<Probe> },
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + ln_1p(exp(-x))
    } else {
        ln_1p(exp(x))
    }
}

/// One edge of the top-down recursion.
#[derive(Clone, Copy, Debug)]
struct Step {
    log_s: f64,
    log_w: f64,
    psi: f64,
    log_psi: f64,
    log_one_minus_psi: f64,
    log_big_psi: f64,
    log_c: f64,
}

impl Step {
    fn first(lw: f64, ld: f64) -> Self {
        Self {
            log_s: -ld,
            log_w: -lw,
            psi: 1.0,
            log_psi: 0.0,
            log_one_minus_psi: f64::NEG_INFINITY,
            log_big_psi: 0.0,
            log_c: 0.0,
        }
    }

    fn child(&self, lw: f64, ld: f64) -> Self {
        // q = w_e · S_<(e), so ψ = q / (1 + q).
        let log_q = lw + self.log_s;
        let log_psi = -softplus(-log_q);
        let log_one_minus_psi = -softplus(log_q);
        let log_big_psi = self.log_big_psi + log_psi;
        Self {
            log_s: log_add_exp(self.log_s, -ld),
            log_w: log_add_exp(self.log_w, -lw),
            psi: 1.0 / (1.0 + exp(-log_q)),
            log_psi,
            log_one_minus_psi,
            log_big_psi,
            log_c: log_big_psi - log_one_minus_psi,
        }
    }
}

/// Per-edge ruin data, indexed by edge id (entry 0, the root, is unused).
#[derive(Clone, Debug, PartialEq)]
pub struct RuinProfile {
    psi: Vec<f64>,
    log_psi: Vec<f64>,
    log_one_minus_psi: Vec<f64>,
    log_big_psi: Vec<f64>,
    log_s: Vec<f64>,
    log_w: Vec<f64>,
    log_c: Vec<f64>,
}

/// The same data for level-uniform schemes, indexed by generation
/// (entry 0 is unused).
pub type LevelProfile = RuinProfile;

impl RuinProfile {
    fn with_len(n: usize) -> Self {
        Self {
            psi: vec![f64::NAN; n],
            log_psi: vec![f64::NAN; n],
            log_one_minus_psi: vec![f64::NAN; n],
            log_big_psi: vec![0.0; n],
            log_s: vec![f64::NEG_INFINITY; n],
            log_w: vec![f64::NEG_INFINITY; n],
            log_c: vec![f64::NAN; n],
        }
    }

    fn set(&mut self, i: usize, s: &Step) {
        self.psi[i] = s.psi;
        self.log_psi[i] = s.log_psi;
        self.log_one_minus_psi[i] = s.log_one_minus_psi;
        self.log_big_psi[i] = s.log_big_psi;
        self.log_s[i] = s.log_s;
        self.log_w[i] = s.log_w;
        self.log_c[i] = s.log_c;
    }

    fn get(&self, i: usize) -> Step {
        Step {
            log_s: self.log_s[i],
            log_w: self.log_w[i],
            psi: self.psi[i],
            log_psi: self.log_psi[i],
            log_one_minus_psi: self.log_one_minus_psi[i],
            log_big_psi: self.log_big_psi[i],
            log_c: self.log_c[i],
        }
    }

    /// Number of slots, including the unused slot 0.
    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.len() <= 1
    }

    pub fn psi(&self, e: EdgeId) -> f64 {
        self.psi[e]
    }

    pub fn log_psi(&self, e: EdgeId) -> f64 {
        self.log_psi[e]
    }

    /// `ln(1 − ψ(e))`; `-∞` on level-1 edges.
    pub fn log_one_minus_psi(&self, e: EdgeId) -> f64 {
        self.log_one_minus_psi[e]
    }

    /// `Ψ(e)`, which may underflow to zero deep in the tree.
    pub fn big_psi(&self, e: EdgeId) -> f64 {
        exp(self.log_big_psi[e])
    }

    pub fn log_big_psi(&self, e: EdgeId) -> f64 {
        self.log_big_psi[e]
    }

    /// `ln Ψ` for every slot, for use as cutset scores.
    pub fn log_big_psi_all(&self) -> &[f64] {
        &self.log_big_psi
    }

    /// `S(e) = Σ_{g≤e} 1/δ_g`.
    pub fn s(&self, e: EdgeId) -> f64 {
        exp(self.log_s[e])
    }

    pub fn log_s(&self, e: EdgeId) -> f64 {
        self.log_s[e]
    }

    /// `W(e) = Σ_{g≤e} 1/w_g`.
    pub fn w_sum(&self, e: EdgeId) -> f64 {
        exp(self.log_w[e])
    }

    pub fn log_w_sum(&self, e: EdgeId) -> f64 {
        self.log_w[e]
    }

    /// Modified conductance `c(e)`.
    pub fn conductance(&self, e: EdgeId) -> f64 {
        exp(self.log_c[e])
    }

    pub fn log_conductance(&self, e: EdgeId) -> f64 {
        self.log_c[e]
    }

    pub fn log_conductance_all(&self) -> &[f64] {
        &self.log_c
    }
}

/// One top-down pass over `tree`.
pub fn compute_profile(tree: &Tree, scheme: &WeightScheme) -> Result<RuinProfile, RuinError> {
    scheme.validate()?;
    let mut profile = RuinProfile::with_len(tree.len());
    for &v in &tree.by_level()[1..] {
        let v = v as usize;
        let (lw, ld) = scheme.edge_log_weights(tree, v)?;
        let step = match tree.parent_raw(v) {
            0 => Step::first(lw, ld),
            p => profile.get(p).child(lw, ld),
        };
        profile.set(v, &step);
    }
    Ok(profile)
}

/// Profile of a level-uniform scheme for generations `1..=depth`; it
/// applies to every edge of that generation in any tree.
pub fn compute_level_profile(scheme: &WeightScheme, depth: u32) -> Result<LevelProfile, RuinError> {
    scheme.validate()?;
    let mut profile = RuinProfile::with_len(depth as usize + 1);
    let mut prev: Option<Step> = None;
    for g in 1..=depth {
        let (lw, ld) =
            scheme.level_log_weights(g).ok_or(RuinError::UnsupportedScores("level-uniform weight schemes"))?;
        let step = match prev {
            None => Step::first(lw, ld),
            Some(p) => p.child(lw, ld),
        };
        profile.set(g as usize, &step);
        prev = Some(step);
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::SphericalTree;

    #[test]
    fn orrw_examples() {
        for delta in [0.5, 1.0, 2.0, 8.0] {
            let p = compute_level_profile(&WeightScheme::orrw(delta).unwrap(), 50).unwrap();
            assert_eq!((p.psi(1), p.big_psi(1), p.conductance(1)), (1.0, 1.0, 1.0));
            let expected = 3.0 / (3.0 + delta);
            assert!((p.psi(4) - expected).abs() <= 1e-15 * expected);
        }
        let p = compute_level_profile(&WeightScheme::orrw(1.0).unwrap(), 100).unwrap();
        for n in 1..=100 {
            let expected = 1.0 / n as f64;
            assert!((p.big_psi(n) - expected).abs() <= 1e-13 * expected);
        }
    }

    #[test]
    fn conductance_relation() {
        let p = compute_level_profile(&WeightScheme::biased(1.5, 0.7).unwrap(), 40).unwrap();
        for g in 2..=40 {
            let c = p.big_psi(g) / (1.0 - p.psi(g));
            assert!((p.conductance(g) - c).abs() <= 1e-12 * c);
            assert!(p.log_big_psi(g) <= p.log_big_psi(g - 1));
        }
    }

    #[test]
    fn tree_profile_matches_level_profile() {
        let t = SphericalTree::zd_like(3, 20).materialize(1 << 20).unwrap();
        let scheme = WeightScheme::biased(2.0, 3.0).unwrap();
        let p = compute_profile(&t, &scheme).unwrap();
        let l = compute_level_profile(&scheme, 20).unwrap();
        for e in t.edges() {
            let g = t.generation(e) as usize;
            assert_eq!(p.psi(e), l.psi(g));
            assert_eq!(p.log_big_psi(e), l.log_big_psi(g));
        }
    }

    #[test]
    fn deep_biased_profile_stays_finite() {
        for beta in [0.5, 4.0] {
            let p = compute_level_profile(&WeightScheme::biased(beta, 2.0).unwrap(), 1 << 14).unwrap();
            let last = 1 << 14;
            assert!(p.log_big_psi(last).is_finite());
            assert!(p.log_conductance(last).is_finite());
            assert!(p.psi(last) > 0.0 && p.psi(last) <= 1.0);
            assert!(p.log_one_minus_psi(last).is_finite());
        }
    }

    #[test]
    fn explicit_scheme_needs_tree() {
        let s = WeightScheme::Explicit { w: vec![1.0; 4], delta: vec![1.0; 4] };
        assert!(compute_level_profile(&s, 3).is_err());
        assert!(compute_profile(&Tree::path(3), &s).is_ok());
    }
}
