//! Percolations on trees: the correlated clock percolation `C_CP`, the
//! independent `ψ`-percolation, level-probability percolation, and the
//! quasi-independence estimator for `C_CP`.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::ruin::{LevelProfile, RuinError, RuinProfile};
use crate::tree::{EdgeId, SkeletonTree, SphericalTree, Tree, TreeError, ROOT};
use crate::walker::{ClockSource, EdgeRates, PathOutcome, PathWalk, WalkError};
use crate::weights::{WeightError, WeightScheme};
use crate::BitSet;

mod quasi;

pub use quasi::{quasi_independence_estimate, PairEstimate, QuasiReport, MIN_CLOCK_SEEDS, MIN_CONDITIONED};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PercolationError {
    #[error("{0}")]
    Tree(#[from] TreeError),
    #[error("{0}")]
    Weights(#[from] WeightError),
    #[error("{0}")]
    Walk(#[from] WalkError),
    #[error("{0}")]
    Ruin(#[from] RuinError),
    #[error("level percolation needs delta > 0")]
    BadDelta,
    #[error("profile covers {got} slots but the tree needs {need}")]
    ProfileMismatch { got: usize, need: usize },
    #[error("edges {0} and {1} are nested; pairs must branch apart")]
    NestedPair(EdgeId, EdgeId),
    #[error("need at least {need} clock seeds, got {got}")]
    TooFewSeeds { got: u64, need: u64 },
}

/// Open edges of one percolation sample on an arena tree.
///
/// Only edges whose parent edge is in the root cluster are ever decided,
/// so `open` equals the root cluster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PercolationSample {
    pub open: BitSet,
    /// Root-cluster edges in exploration order.
    pub cluster: Vec<EdgeId>,
    pub max_depth: u32,
    /// The cluster reaches the exploration depth.
    pub survived: bool,
}

impl PercolationSample {
    fn explored(tree: &Tree, open: BitSet, cluster: Vec<EdgeId>, depth: u32) -> Self {
        let max_depth = cluster.iter().map(|&e| tree.generation(e)).max().unwrap_or(0);
        Self { open, cluster, max_depth, survived: max_depth >= depth }
    }
}

/// Open-vertex counts per level for samplers on compressed trees.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelSample {
    /// Open root-cluster edges at generations `0..=depth` (slot 0 is 1).
    pub counts: Vec<u64>,
    pub max_depth: u32,
    pub survived: bool,
}

impl LevelSample {
    fn from_counts(counts: Vec<u64>) -> Self {
        let max_depth = counts.iter().rposition(|&c| c > 0).unwrap_or(0) as u32;
        let survived = max_depth as usize + 1 == counts.len();
        Self { counts, max_depth, survived }
    }
}

/// Step cap for each path extension decided by [`sample_ccp`].
const EXTENSION_BUDGET: u64 = 1 << 32;

/// The cluster `C_CP(ϱ) = {e : T^{(e)}(e⁺) < T^{(e)}(ϱ)}`.
///
/// Each edge is decided by the path extension on `[ϱ, e⁺]` driven by the
/// shared `clocks`. Extensions to `e` and to a child `g` of `e` agree up
/// to their first visit of `e⁺`, so the walk for `g` resumes from the
/// state in which the walk for `e` first hit `e⁺`.
pub fn sample_ccp(
    tree: &Tree,
    scheme: &WeightScheme,
    clocks: &ClockSource,
) -> Result<PercolationSample, PercolationError> {
    sample_ccp_to_depth(tree, scheme, clocks, tree.depth_cap())
}

/// [`sample_ccp`] explored only through generation `depth`.
pub fn sample_ccp_to_depth(
    tree: &Tree,
    scheme: &WeightScheme,
    clocks: &ClockSource,
    depth: u32,
) -> Result<PercolationSample, PercolationError> {
    let rates = EdgeRates::new(tree, scheme)?;
    let depth = depth.min(tree.depth_cap());
    let mut open = BitSet::new(tree.len());
    let mut cluster = Vec::new();
    let mut stack: Vec<(EdgeId, PathWalk)> = Vec::new();
    stack.push((ROOT, PathWalk::new(ROOT)));
    while let Some((v, walk)) = stack.pop() {
        if tree.generation(v) >= depth {
            continue;
        }
        for c in tree.children(v).rev() {
            let mut ext = walk.clone();
            ext.push_edge(c, &rates);
            if ext.run(clocks, true, EXTENSION_BUDGET) == PathOutcome::HitEnd {
                open.insert(c);
                cluster.push(c);
                stack.push((c, ext));
            }
        }
    }
    Ok(PercolationSample::explored(tree, open, cluster, depth))
}

fn check_profile(len: usize, need: usize) -> Result<(), PercolationError> {
    if len < need {
        return Err(PercolationError::ProfileMismatch { got: len, need });
    }
    Ok(())
}

/// Independent percolation with edge `e` open with probability `ψ(e)`.
pub fn sample_independent_psi<R: Rng + ?Sized>(
    tree: &Tree,
    profile: &RuinProfile,
    rng: &mut R,
) -> Result<PercolationSample, PercolationError> {
    check_profile(profile.len(), tree.len())?;
    explore_independent(tree, tree.depth_cap(), rng, |e| profile.psi(e))
}

fn explore_independent<R: Rng + ?Sized>(
    tree: &Tree,
    depth: u32,
    rng: &mut R,
    p: impl Fn(EdgeId) -> f64,
) -> Result<PercolationSample, PercolationError> {
    let mut open = BitSet::new(tree.len());
    let mut cluster = Vec::new();
    let mut frontier = alloc::vec![ROOT];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &v in &frontier {
            for c in tree.children(v) {
                let q = p(c);
                if q >= 1.0 || (q > 0.0 && rng.random::<f64>() < q) {
                    open.insert(c);
                    cluster.push(c);
                    next.push(c);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(PercolationSample::explored(tree, open, cluster, depth))
}

/// `ψ`-percolation on a spherically symmetric tree with a level-uniform
/// profile: open counts per level are binomial.
pub fn sample_independent_psi_levels<R: Rng + ?Sized>(
    tree: &SphericalTree,
    profile: &LevelProfile,
    rng: &mut R,
) -> Result<LevelSample, PercolationError> {
    check_profile(profile.len(), tree.depth_cap() as usize + 1)?;
    Ok(binomial_levels(tree, rng, |g| profile.psi(g as usize)))
}

fn binomial_levels<R: Rng + ?Sized>(tree: &SphericalTree, rng: &mut R, p: impl Fn(u32) -> f64) -> LevelSample {
    let depth = tree.depth_cap();
    let mut counts = Vec::with_capacity(depth as usize + 1);
    counts.push(1u64);
    let mut open = 1u64;
    for g in 1..=depth {
        let trials = open.saturating_mul(u64::from(tree.children_at(g - 1)));
        let q = p(g).clamp(0.0, 1.0);
        open = if trials == 0 || q == 0.0 {
            0
        } else if q >= 1.0 {
            trials
        } else {
            Binomial::new(trials, q).expect("valid binomial").sample(rng)
        };
        counts.push(open);
        if open == 0 {
            counts.resize(depth as usize + 1, 0);
            break;
        }
    }
    LevelSample::from_counts(counts)
}

/// Opening probability for level-probability percolation: `1 − δ/n` at
/// level `n`, with levels `n ≤ δ` forced open unless `clamped`, in which
/// case they use `max(0, 1 − δ/n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelRule {
    pub delta: f64,
    pub clamped: bool,
}

impl LevelRule {
    pub fn new(delta: f64) -> Result<Self, PercolationError> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(PercolationError::BadDelta);
        }
        Ok(Self { delta, clamped: false })
    }

    pub fn clamped(delta: f64) -> Result<Self, PercolationError> {
        Ok(Self { clamped: true, ..Self::new(delta)? })
    }

    pub fn probability(&self, n: u32) -> f64 {
        let n = f64::from(n);
        if !self.clamped && n <= self.delta {
            1.0
        } else {
            (1.0 - self.delta / n).max(0.0)
        }
    }
}

pub fn sample_level_prob<R: Rng + ?Sized>(
    tree: &Tree,
    rule: &LevelRule,
    rng: &mut R,
) -> Result<PercolationSample, PercolationError> {
    LevelRule::new(rule.delta)?;
    explore_independent(tree, tree.depth_cap(), rng, |e| rule.probability(tree.generation(e)))
}

pub fn sample_level_prob_levels<R: Rng + ?Sized>(
    tree: &SphericalTree,
    rule: &LevelRule,
    rng: &mut R,
) -> Result<LevelSample, PercolationError> {
    LevelRule::new(rule.delta)?;
    Ok(binomial_levels(tree, rng, |g| rule.probability(g)))
}

/// Level-probability percolation on a skeleton tree. A unary chain
/// covering generations `a..=b` survives whole with probability
/// `Π_{n=a}^{b} p(n)`; a broken chain is cut at an exact sampled point.
pub fn sample_level_prob_skeleton<R: Rng + ?Sized>(
    tree: &SkeletonTree,
    rule: &LevelRule,
    rng: &mut R,
) -> Result<LevelSample, PercolationError> {
    LevelRule::new(rule.delta)?;
    let depth = tree.depth_cap();
    // prefix[n] = Σ_{k≤n} ln p(k), with dead levels counted separately.
    let mut prefix = Vec::with_capacity(depth as usize + 1);
    let mut dead = Vec::with_capacity(depth as usize + 1);
    prefix.push(0.0);
    dead.push(0u32);
    for n in 1..=depth {
        let p = rule.probability(n);
        let (lp, d) = if p > 0.0 { (crate::numeric::ln(p), 0) } else { (0.0, 1) };
        prefix.push(prefix[n as usize - 1] + lp);
        dead.push(dead[n as usize - 1] + d);
    }
    let survives_through = |a: u32, k: u32, log_u: f64| -> bool {
        dead[k as usize] == dead[a as usize - 1] && log_u < prefix[k as usize] - prefix[a as usize - 1]
    };

    let nodes = tree.nodes();
    let mut diff = alloc::vec![0i64; depth as usize + 2];
    diff[0] = 1;
    diff[1] = -1;
    let mut queue = Vec::new();
    queue.extend(tree.child_nodes(0));
    while let Some(i) = queue.pop() {
        let node = nodes[i];
        let (a, b) = (node.chain_start, node.generation);
        let log_u = crate::numeric::ln(rng.random::<f64>().max(f64::MIN_POSITIVE));
        let reached = if survives_through(a, b, log_u) {
            queue.extend(tree.child_nodes(i));
            b
        } else {
            // Deepest k in a-1..b with the chain open through k.
            let (mut lo, mut hi) = (a - 1, b);
            while lo < hi {
                let mid = lo + (hi - lo).div_ceil(2);
                if survives_through(a, mid, log_u) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            lo
        };
        if reached >= a {
            diff[a as usize] += 1;
            diff[reached as usize + 1] -= 1;
        }
    }
    let mut acc = 0i64;
    let counts = diff[..=depth as usize]
        .iter()
        .map(|d| {
            acc += d;
            acc as u64
        })
        .collect();
    Ok(LevelSample::from_counts(counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::derive_seed;
    use crate::ruin::{compute_level_profile, compute_profile};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn level_rule_values() {
        let r = LevelRule::new(0.5).unwrap();
        assert_eq!(r.probability(1), 0.5);
        let r = LevelRule::new(3.0).unwrap();
        assert_eq!((r.probability(1), r.probability(3), r.probability(6)), (1.0, 1.0, 0.5));
        let r = LevelRule::clamped(3.0).unwrap();
        assert_eq!((r.probability(1), r.probability(3), r.probability(6)), (0.0, 0.0, 0.5));
        assert!(LevelRule::new(0.0).is_err());
    }

    #[test]
    fn ccp_is_monotone_and_opens_level_one() {
        let t = SphericalTree::regular(2, 8).materialize(1 << 10).unwrap();
        let scheme = WeightScheme::orrw(1.0).unwrap();
        for seed in 0..30 {
            let s = sample_ccp(&t, &scheme, &ClockSource::new(seed)).unwrap();
            assert!(s.open.contains(1) && s.open.contains(2));
            for &e in &s.cluster {
                assert!(t.parent(e) == Some(ROOT) || s.open.contains(t.parent_raw(e)));
            }
            assert_eq!(s, sample_ccp(&t, &scheme, &ClockSource::new(seed)).unwrap());
        }
    }

    #[test]
    fn ccp_matches_direct_extension() {
        let t = SphericalTree::regular(2, 6).materialize(1 << 10).unwrap();
        let scheme = WeightScheme::orrw(0.5).unwrap();
        let rates = EdgeRates::new(&t, &scheme).unwrap();
        for seed in 0..40 {
            let clocks = ClockSource::new(derive_seed(1, seed));
            let s = sample_ccp(&t, &scheme, &clocks).unwrap();
            for e in t.edges() {
                let (hit, _) = crate::walker::extension_hits(&t, &rates, e, &clocks);
                assert_eq!(hit, s.open.contains(e), "seed {seed} edge {e}");
            }
        }
    }

    #[test]
    fn psi_percolation_marginals() {
        let t = SphericalTree::zd_like(2, 6).materialize(1 << 10).unwrap();
        let p = compute_profile(&t, &WeightScheme::orrw(1.0).unwrap()).unwrap();
        let mut r = rng(3);
        let n = 20_000;
        let e = t.level_edges(3).unwrap()[0];
        let mut hits = 0;
        for _ in 0..n {
            let s = sample_independent_psi(&t, &p, &mut r).unwrap();
            assert!(s.open.contains(1));
            hits += usize::from(s.open.contains(e));
        }
        // Open iff both ancestors below level 1 are open: ψ(2)·ψ(3) = Ψ(3).
        let freq = hits as f64 / n as f64;
        let want = p.big_psi(e);
        assert!((freq - want).abs() < 3.0 * (want * (1.0 - want) / n as f64).sqrt() + 1e-9);
    }

    #[test]
    fn binomial_levels_match_explicit_mean() {
        let s = SphericalTree::zd_like(3, 12);
        let p = compute_level_profile(&WeightScheme::orrw(1.0).unwrap(), 12).unwrap();
        let mut r = rng(9);
        let trials = 4000;
        let mean: f64 =
            (0..trials).map(|_| sample_independent_psi_levels(&s, &p, &mut r).unwrap().counts[12] as f64).sum::<f64>()
                / f64::from(trials);
        let want = s.level_size(12) * p.big_psi(12);
        assert!((mean - want).abs() < 0.1 * want, "{mean} vs {want}");
    }

    #[test]
    fn skeleton_level_percolation_matches_expanded_tree() {
        let rule = LevelRule::new(1.0).unwrap();
        let pmf = [0.25, 0.0, 0.0, 0.75];
        let depth = 40;
        let mut a = 0.0;
        let mut b = 0.0;
        let runs = 300;
        let mut r = rng(4);
        for seed in 0..runs {
            let s = SkeletonTree::sample(&pmf, seed, depth, 1 << 20).unwrap();
            let t = s.expand(1 << 22).unwrap();
            for _ in 0..10 {
                a += sample_level_prob_skeleton(&s, &rule, &mut r).unwrap().counts[20] as f64;
                b += sample_level_prob(&t, &rule, &mut r)
                    .unwrap()
                    .cluster
                    .iter()
                    .filter(|&&e| t.generation(e) == 20)
                    .count() as f64;
            }
        }
        let (a, b) = (a / (runs * 10) as f64, b / (runs * 10) as f64);
        assert!((a - b).abs() < 0.15 * b.max(0.1), "{a} vs {b}");
    }

    #[test]
    fn level_one_open_with_half() {
        let t = SphericalTree::regular(4, 2).materialize(100).unwrap();
        let rule = LevelRule::new(0.5).unwrap();
        let mut r = rng(1);
        let mut open = 0;
        for _ in 0..5000 {
            let s = sample_level_prob(&t, &rule, &mut r).unwrap();
            open += (1..=4).filter(|&e| s.open.contains(e)).count();
        }
        assert!((open as f64 / 20_000.0 - 0.5).abs() < 0.02);
    }
}
