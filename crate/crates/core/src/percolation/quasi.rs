use alloc::vec::Vec;

use super::PercolationError;
use crate::counter::derive_seed;
use crate::numeric::wilson_interval;
use crate::ruin::compute_profile;
use crate::tree::{EdgeId, Tree, VertexId, ROOT};
use crate::walker::{extension_hits, ClockSource, EdgeRates, PathOutcome, PathWalk};
use crate::weights::WeightScheme;

/// Smallest number of clock seeds accepted.
pub const MIN_CLOCK_SEEDS: u64 = 10_000;
/// Pairs whose conditioning event occurs fewer times are unusable.
pub const MIN_CONDITIONED: u64 = 100;

const BUDGET: u64 = 1 << 32;
const Z: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairEstimate {
    pub e1: EdgeId,
    pub e2: EdgeId,
    /// `e₁ ∧ e₂`; conditioning is on the edge into it being open.
    pub meet: VertexId,
    pub conditioned: u64,
    pub both: u64,
    pub first: u64,
    pub second: u64,
    /// `P(both | anc) / (P(e₁ | anc) P(e₂ | anc))`.
    pub ratio: f64,
    /// Ratio bounds from the Wilson intervals of the three frequencies.
    pub ratio_interval: (f64, f64),
    pub usable: bool,
    /// Mean of `L(e)`, the clock time spent on `(e⁺, e⁻)` between the
    /// first visit of `e⁺` and the return to the root; NaN when the pair
    /// meets at the root.
    pub mean_return_time: f64,
    /// `S(e) = Σ_{g≤e} 1/δ_g`, the exact mean of `L(e)`.
    pub expected_return_time: f64,
    /// Seeds where `e_i ∈ C_CP` disagreed with the race `L(e) > L*(e_i)`.
    pub race_mismatches: u64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuasiReport {
    pub pairs: Vec<PairEstimate>,
    /// Largest ratio over usable pairs, or NaN if none is usable.
    pub max_ratio: f64,
    /// Lower end of that pair's ratio interval.
    pub max_ratio_lower: f64,
}

struct Counts {
    conditioned: u64,
    both: u64,
    first: u64,
    second: u64,
    return_time: f64,
    mismatches: u64,
}

/// Empirical quasi-independence constant of `C_CP` over clock seeds
/// `derive_seed(seed, i)`, `i < clock_seeds`.
pub fn quasi_independence_estimate(
    tree: &Tree,
    scheme: &WeightScheme,
    pairs: &[(EdgeId, EdgeId)],
    clock_seeds: u64,
    seed: u64,
) -> Result<QuasiReport, PercolationError> {
    if clock_seeds < MIN_CLOCK_SEEDS {
        return Err(PercolationError::TooFewSeeds { got: clock_seeds, need: MIN_CLOCK_SEEDS });
    }
    let rates = EdgeRates::new(tree, scheme)?;
    let profile = compute_profile(tree, scheme)?;
    let mut out = Vec::with_capacity(pairs.len());
    for &(e1, e2) in pairs {
        tree.check_edge(e1)?;
        tree.check_edge(e2)?;
        let meet = tree.meet(e1, e2);
        if meet == e1 || meet == e2 {
            return Err(PercolationError::NestedPair(e1, e2));
        }
        let mut c = Counts { conditioned: 0, both: 0, first: 0, second: 0, return_time: 0.0, mismatches: 0 };
        for i in 0..clock_seeds {
            let clocks = ClockSource::new(derive_seed(seed, i));
            one_seed(tree, &rates, e1, e2, meet, &clocks, &mut c);
        }
        out.push(summarise(e1, e2, meet, &c, if meet == ROOT { f64::NAN } else { profile.s(meet) }));
    }
    let best = out.iter().filter(|p| p.usable).max_by(|a, b| a.ratio.total_cmp(&b.ratio));
    let (max_ratio, max_ratio_lower) = best.map_or((f64::NAN, f64::NAN), |p| (p.ratio, p.ratio_interval.0));
    Ok(QuasiReport { pairs: out, max_ratio, max_ratio_lower })
}

fn one_seed(
    tree: &Tree,
    rates: &EdgeRates,
    e1: EdgeId,
    e2: EdgeId,
    meet: VertexId,
    clocks: &ClockSource,
    c: &mut Counts,
) {
    if meet == ROOT {
        let (a, _) = extension_hits(tree, rates, e1, clocks);
        let (b, _) = extension_hits(tree, rates, e2, clocks);
        c.conditioned += 1;
        c.first += u64::from(a);
        c.second += u64::from(b);
        c.both += u64::from(a && b);
        return;
    }
    let mut walk = PathWalk::root_path(tree, meet, rates);
    if walk.run(clocks, true, BUDGET) != PathOutcome::HitEnd {
        return;
    }
    c.conditioned += 1;

    let mut back = walk.clone();
    back.run(clocks, false, BUDGET);
    let l = back.up_time(back.end());
    c.return_time += l;

    let mut open = [false; 2];
    for (slot, &e) in [e1, e2].iter().enumerate() {
        let below = &tree.path_to(e)[tree.generation(meet) as usize + 1..];
        let mut ext = walk.clone();
        let mut segment = PathWalk::new(meet);
        for &v in below {
            ext.push_edge(v, rates);
            segment.push_edge(v, rates);
        }
        open[slot] = ext.run(clocks, true, BUDGET) == PathOutcome::HitEnd;
        segment.run_to_end(clocks, BUDGET);
        let l_star = segment.down_time(1);
        c.mismatches += u64::from(open[slot] != (l > l_star));
    }
    c.first += u64::from(open[0]);
    c.second += u64::from(open[1]);
    c.both += u64::from(open[0] && open[1]);
}

fn summarise(e1: EdgeId, e2: EdgeId, meet: VertexId, c: &Counts, expected: f64) -> PairEstimate {
    let n = c.conditioned;
    let usable = n >= MIN_CONDITIONED && c.first > 0 && c.second > 0;
    let freq = |k: u64| k as f64 / n.max(1) as f64;
    let ratio = if usable { freq(c.both) / (freq(c.first) * freq(c.second)) } else { f64::NAN };
    let (b_lo, b_hi) = wilson_interval(c.both, n, Z);
    let (f_lo, f_hi) = wilson_interval(c.first, n, Z);
    let (s_lo, s_hi) = wilson_interval(c.second, n, Z);
    let ratio_interval = if usable { (b_lo / (f_hi * s_hi), b_hi / (f_lo * s_lo)) } else { (f64::NAN, f64::NAN) };
    PairEstimate {
        e1,
        e2,
        meet,
        conditioned: n,
        both: c.both,
        first: c.first,
        second: c.second,
        ratio,
        ratio_interval,
        usable,
        mean_return_time: if meet == ROOT || n == 0 { f64::NAN } else { c.return_time / n as f64 },
        expected_return_time: expected,
        race_mismatches: c.mismatches,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::SphericalTree;

    #[test]
    fn pairs_must_branch() {
        let t = Tree::path(4);
        let s = WeightScheme::Unit;
        assert!(matches!(
            quasi_independence_estimate(&t, &s, &[(2, 4)], 10_000, 0),
            Err(PercolationError::NestedPair(2, 4))
        ));
        assert!(quasi_independence_estimate(&t, &s, &[], 10, 0).is_err());
    }

    #[test]
    fn race_identity_and_return_time() {
        let t = SphericalTree::regular(2, 5).materialize(1 << 8).unwrap();
        let lvl5 = t.level_edges(5).unwrap();
        let a = lvl5[0];
        let b = lvl5[3];
        let r = quasi_independence_estimate(&t, &WeightScheme::orrw(1.0).unwrap(), &[(a, b)], 10_000, 5).unwrap();
        let p = &r.pairs[0];
        assert_eq!(t.generation(p.meet), 3);
        assert_eq!(p.race_mismatches, 0);
        assert!(p.usable);
        // L(e) is exponential with mean S(e) = 3 here.
        let sd = p.expected_return_time / (p.conditioned as f64).sqrt();
        assert!((p.mean_return_time - p.expected_return_time).abs() < 4.0 * sd, "{p:?}");
    }
}
