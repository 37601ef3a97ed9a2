use alloc::vec::Vec;

use super::{ClockSource, Driver, EdgeRates, Outcome, PathOutcome, PathWalk, StopReason, StopRule, WalkError, Walker};
use crate::counter::derive_seed;
use crate::numeric::sqrt;
use crate::tree::{EdgeId, Tree};
use crate::weights::WeightScheme;

/// Smallest replica count accepted by [`path_extension_ruin_mc`].
pub const MIN_REPLICAS: u64 = 100;

/// Per-replica step cap for path extensions; one-dimensional ruin walks
/// end long before this in every regime we simulate.
const PATH_BUDGET: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RuinEstimate {
    pub estimate: f64,
    pub hits: u64,
    pub replicas: u64,
    /// Binomial standard error `sqrt(p(1−p)/N)`.
    pub sigma: f64,
    /// `estimate ± 3σ`, clipped to `[0, 1]`.
    pub interval: (f64, f64),
    /// Replicas that hit the step cap (counted as misses).
    pub truncated: u64,
}

impl RuinEstimate {
    pub fn from_counts(hits: u64, replicas: u64, truncated: u64) -> Self {
        let p = hits as f64 / replicas as f64;
        let sigma = sqrt(p * (1.0 - p) / replicas as f64);
        Self {
            estimate: p,
            hits,
            replicas,
            sigma,
            interval: ((p - 3.0 * sigma).max(0.0), (p + 3.0 * sigma).min(1.0)),
            truncated,
        }
    }
}

/// Whether the extension on `[ϱ, e⁺]` driven by `clocks` hits `e⁺` before
/// returning to the root. Also reports whether the step cap was hit.
pub(crate) fn extension_hits(tree: &Tree, rates: &EdgeRates, e: EdgeId, clocks: &ClockSource) -> (bool, bool) {
    let mut walk = PathWalk::root_path(tree, e, rates);
    match walk.run(clocks, true, PATH_BUDGET) {
        PathOutcome::HitEnd => (true, false),
        PathOutcome::Returned => (false, false),
        PathOutcome::Budget => (false, true),
    }
}

/// Estimates `Ψ(e) = P(T(e⁺) < T(ϱ))` for the walk restricted to
/// `[ϱ, e⁺]`, with replica `i` driven by clocks seeded
/// `derive_seed(seed, i)`.
pub fn path_extension_ruin_mc(
    tree: &Tree,
    scheme: &WeightScheme,
    e: EdgeId,
    replicas: u64,
    seed: u64,
) -> Result<RuinEstimate, WalkError> {
    ruin_mc_range(tree, scheme, e, replicas, seed, 0..replicas)
        .map(|(hits, truncated)| RuinEstimate::from_counts(hits, replicas, truncated))
}

/// Hit and truncation counts for the replicas in `range`; lets callers
/// split the work without changing the result.
pub fn ruin_mc_range(
    tree: &Tree,
    scheme: &WeightScheme,
    e: EdgeId,
    replicas: u64,
    seed: u64,
    range: core::ops::Range<u64>,
) -> Result<(u64, u64), WalkError> {
    tree.check_edge(e)?;
    if replicas < MIN_REPLICAS {
        return Err(WalkError::TooFewReplicas { got: replicas, need: MIN_REPLICAS });
    }
    let rates = EdgeRates::new(tree, scheme)?;
    let mut hits = 0;
    let mut truncated = 0;
    for i in range {
        let (hit, cut) = extension_hits(tree, &rates, e, &ClockSource::new(derive_seed(seed, i)));
        hits += u64::from(hit);
        truncated += u64::from(cut);
    }
    Ok((hits, truncated))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EscapeReport {
    /// Fraction of runs reaching the target depth before the root.
    pub frequency: f64,
    pub escaped: u64,
    pub runs: u64,
    pub seeds: Vec<u64>,
    pub outcomes: Vec<Outcome>,
}

impl EscapeReport {
    pub fn from_outcomes(seeds: Vec<u64>, outcomes: Vec<Outcome>) -> Self {
        let escaped = outcomes.iter().filter(|o| o.stopped_by == StopReason::ReachedDepth).count() as u64;
        let runs = outcomes.len() as u64;
        Self { frequency: if runs == 0 { 0.0 } else { escaped as f64 / runs as f64 }, escaped, runs, seeds, outcomes }
    }

    /// Binomial standard error of the frequency.
    pub fn sigma(&self) -> f64 {
        let p = self.frequency;
        sqrt(p * (1.0 - p) / self.runs.max(1) as f64)
    }
}

/// Runs one walk per seed from the root until it reaches depth `depth`,
/// returns to the root or makes `budget` steps.
pub fn escape_mc(
    tree: &Tree,
    scheme: &WeightScheme,
    driver: Driver,
    depth: u32,
    budget: u64,
    seeds: &[u64],
) -> Result<EscapeReport, WalkError> {
    let stop = StopRule::budget(budget).with_return().with_depth(depth);
    let mut walker = Walker::new(tree, scheme)?;
    let mut outcomes = Vec::with_capacity(seeds.len());
    for &s in seeds {
        walker.reset();
        outcomes.push(walker.run(driver, &stop, s)?);
    }
    Ok(EscapeReport::from_outcomes(seeds.to_vec(), outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_one_always_hits() {
        let t = Tree::path(5);
        let r = path_extension_ruin_mc(&t, &WeightScheme::orrw(3.0).unwrap(), 1, 1000, 1).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert!(path_extension_ruin_mc(&t, &WeightScheme::Unit, 1, 99, 1).is_err());
    }

    #[test]
    fn orrw_one_matches_harmonic() {
        let t = Tree::path(10);
        let r = path_extension_ruin_mc(&t, &WeightScheme::orrw(1.0).unwrap(), 10, 20_000, 3).unwrap();
        assert!((r.estimate - 0.1).abs() <= 3.0 * r.sigma, "{r:?}");
    }

    #[test]
    fn path_walks_escape_rarely() {
        let t = Tree::path(30);
        let seeds: Vec<u64> = (0..50).collect();
        let r = escape_mc(&t, &WeightScheme::Unit, Driver::Direct, 30, 100_000, &seeds).unwrap();
        assert!(r.frequency < 0.2);
        assert_eq!(r.outcomes.len(), 50);
    }
}
