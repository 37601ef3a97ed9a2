use alloc::vec;
use alloc::vec::Vec;

use super::RuinError;
use crate::numeric::LogSum;
use crate::tree::{SkeletonTree, SphericalTree, Tree, ROOT};

/// Logarithms of nonnegative edge scores.
#[derive(Clone, Copy, Debug)]
pub enum LogScores<'a> {
    /// Indexed by edge id; slot 0 is ignored.
    PerEdge(&'a [f64]),
    /// Indexed by generation; slot 0 is ignored.
    PerGeneration(&'a [f64]),
}

impl LogScores<'_> {
    fn need(&self, need: usize) -> Result<(), RuinError> {
        let got = match self {
            Self::PerEdge(s) | Self::PerGeneration(s) => s.len(),
        };
        if got < need {
            return Err(RuinError::ScoreLength { got, need });
        }
        Ok(())
    }
}

/// Trees on which `min_π Σ_{e∈π} score(e)` over cutsets inside the first
/// `depth` generations can be computed.
pub trait CutsetShape {
    fn depth_cap(&self) -> u32;

    /// `ln min_π Σ_{e∈π} exp(scale · base(e))`, or `-∞` when some cutset
    /// has zero total.
    fn log_cutset_min(&self, base: LogScores<'_>, scale: f64, depth: u32) -> Result<f64, RuinError>;

    /// As [`log_cutset_min`](Self::log_cutset_min), but only rays that
    /// reach `depth_cap` need to be cut; branches dying earlier carry no
    /// score. This is what the critical-exponent estimators minimise.
    fn log_ray_cutset_min(&self, base: LogScores<'_>, scale: f64, depth: u32) -> Result<f64, RuinError> {
        self.log_cutset_min(base, scale, depth)
    }

    /// Largest base score over the edges of the deepest nonempty
    /// generation.
    fn max_frontier_score(&self, base: LogScores<'_>) -> Result<f64, RuinError>;
}

fn per_generation_only<'a>(base: LogScores<'a>) -> Result<&'a [f64], RuinError> {
    match base {
        LogScores::PerGeneration(s) => Ok(s),
        LogScores::PerEdge(_) => Err(RuinError::UnsupportedScores("per-generation scores")),
    }
}

fn check_depth(depth: u32, cap: u32) -> Result<(), RuinError> {
    if depth == 0 || depth > cap {
        return Err(crate::tree::TreeError::GenerationOutOfRange { requested: depth, depth_cap: cap }.into());
    }
    Ok(())
}

#[inline]
fn scaled(scale: f64, x: f64) -> f64 {
    // Keeps 0·(-∞) from turning into NaN.
    if x == f64::NEG_INFINITY {
        x
    } else {
        scale * x
    }
}

impl CutsetShape for Tree {
    fn depth_cap(&self) -> u32 {
        Tree::depth_cap(self)
    }

    fn log_cutset_min(&self, base: LogScores<'_>, scale: f64, depth: u32) -> Result<f64, RuinError> {
        tree_log_min(self, base, scale, depth, None)
    }

    fn log_ray_cutset_min(&self, base: LogScores<'_>, scale: f64, depth: u32) -> Result<f64, RuinError> {
        let cap = Tree::depth_cap(self);
        let mut alive = vec![false; self.len()];
        for &v in self.by_level()[1..].iter().rev() {
            let v = v as usize;
            if alive[v] || self.generation(v) == cap {
                alive[v] = true;
                alive[self.parent_raw(v)] = true;
            }
        }
        if !alive[ROOT] {
            return Err(RuinError::Extinct);
        }
        tree_log_min(self, base, scale, depth, Some(&alive))
    }

    fn max_frontier_score(&self, base: LogScores<'_>) -> Result<f64, RuinError> {
        let Some(deepest) = (1..=Tree::depth_cap(self)).rev().find(|&g| !self.level_slice(g).is_empty()) else {
            return Ok(f64::NEG_INFINITY);
        };
        let level = self.level_slice(deepest).iter().map(|&v| v as usize);
        Ok(match base {
            LogScores::PerEdge(s) => {
                base.need(self.len())?;
                level.map(|v| s[v]).fold(f64::NEG_INFINITY, f64::max)
            }
            LogScores::PerGeneration(s) => {
                base.need(deepest as usize + 1)?;
                s[deepest as usize]
            }
        })
    }
}

fn tree_log_min(
    tree: &Tree,
    base: LogScores<'_>,
    scale: f64,
    depth: u32,
    alive: Option<&[bool]>,
) -> Result<f64, RuinError> {
    check_depth(depth, tree.depth_cap())?;
    let order = tree.prefix_by_level(depth);
    let score = |v: usize| match base {
        LogScores::PerEdge(s) => scaled(scale, s[v]),
        LogScores::PerGeneration(s) => scaled(scale, s[tree.generation(v) as usize]),
    };
    match base {
        LogScores::PerEdge(_) => base.need(tree.len())?,
        LogScores::PerGeneration(_) => base.need(depth as usize + 1)?,
    }
    let kept = |v: usize| alive.map_or(true, |a| a[v]);
    let mut minc = vec![f64::NEG_INFINITY; tree.len()];
    for &v in order[1..].iter().rev() {
        let v = v as usize;
        if !kept(v) {
            continue;
        }
        let own = score(v);
        minc[v] = if tree.generation(v) == depth || tree.is_leaf(v) {
            own
        } else {
            let mut below = LogSum::new();
            for &c in tree.child_slice(v) {
                if kept(c as usize) {
                    below.add(minc[c as usize]);
                }
            }
            own.min(below.value())
        };
    }
    let mut total = LogSum::new();
    for c in tree.children(0) {
        if kept(c) {
            total.add(minc[c]);
        }
    }
    Ok(total.value())
}

impl CutsetShape for SphericalTree {
    fn depth_cap(&self) -> u32 {
        SphericalTree::depth_cap(self)
    }

    fn log_cutset_min(&self, base: LogScores<'_>, scale: f64, depth: u32) -> Result<f64, RuinError> {
        check_depth(depth, SphericalTree::depth_cap(self))?;
        let s = per_generation_only(base)?;
        base.need(depth as usize + 1)?;
        let mut m = scaled(scale, s[depth as usize]);
        for g in (1..depth).rev() {
            let own = scaled(scale, s[g as usize]);
            let c = self.children_at(g);
            m = if c == 0 { own } else { own.min(crate::numeric::ln(f64::from(c)) + m) };
        }
        let c = self.children_at(0);
        Ok(if c == 0 { f64::NEG_INFINITY } else { crate::numeric::ln(f64::from(c)) + m })
    }

    fn max_frontier_score(&self, base: LogScores<'_>) -> Result<f64, RuinError> {
        let s = per_generation_only(base)?;
        let mut deepest = SphericalTree::depth_cap(self);
        while deepest > 1 && self.level_size(deepest) == 0.0 {
            deepest -= 1;
        }
        base.need(deepest as usize + 1)?;
        Ok(s[deepest as usize])
    }
}

/// Range-minimum table over a generation-indexed array.
struct SparseMin {
    levels: Vec<Vec<f64>>,
}

impl SparseMin {
    fn new(values: Vec<f64>) -> Self {
        let mut levels = vec![values];
        let mut width = 1;
        while 2 * width <= levels[0].len() {
            let prev = levels.last().expect("nonempty");
            let next: Vec<f64> = (0..prev.len() - width).map(|i| prev[i].min(prev[i + width])).collect();
            levels.push(next);
            width *= 2;
        }
        Self { levels }
    }

    /// Minimum over `lo..=hi`.
    fn query(&self, lo: usize, hi: usize) -> f64 {
        let k = (hi - lo + 1).ilog2() as usize;
        self.levels[k][lo].min(self.levels[k][hi + 1 - (1 << k)])
    }
}

fn skeleton_log_min(
    tree: &SkeletonTree,
    base: LogScores<'_>,
    scale: f64,
    depth: u32,
    alive: Option<&[bool]>,
) -> Result<f64, RuinError> {
    check_depth(depth, tree.depth_cap())?;
    let s = per_generation_only(base)?;
    base.need(depth as usize + 1)?;
    let table = SparseMin::new(s[..=depth as usize].iter().map(|&x| scaled(scale, x)).collect());
    let kept = |i: usize| alive.map_or(true, |a| a[i]);
    let nodes = tree.nodes();
    let mut minc = vec![f64::NAN; nodes.len()];
    for i in (1..nodes.len()).rev() {
        let node = nodes[i];
        if node.chain_start > depth || !kept(i) {
            continue;
        }
        let chain = table.query(node.chain_start as usize, node.generation.min(depth) as usize);
        let kids = tree.child_nodes(i);
        minc[i] = if node.generation >= depth || kids.is_empty() {
            chain
        } else {
            let mut below = LogSum::new();
            for k in kids.filter(|&k| kept(k)) {
                below.add(minc[k]);
            }
            chain.min(below.value())
        };
    }
    let mut total = LogSum::new();
    for k in tree.child_nodes(0).filter(|&k| kept(k)) {
        total.add(minc[k]);
    }
    Ok(total.value())
}

impl CutsetShape for SkeletonTree {
    fn depth_cap(&self) -> u32 {
        SkeletonTree::depth_cap(self)
    }

    fn log_cutset_min(&self, base: LogScores<'_>, scale: f64, depth: u32) -> Result<f64, RuinError> {
        skeleton_log_min(self, base, scale, depth, None)
    }

    fn log_ray_cutset_min(&self, base: LogScores<'_>, scale: f64, depth: u32) -> Result<f64, RuinError> {
        let cap = SkeletonTree::depth_cap(self);
        let nodes = self.nodes();
        let mut alive = vec![false; nodes.len()];
        for i in (1..nodes.len()).rev() {
            if alive[i] || nodes[i].generation == cap {
                alive[i] = true;
                alive[nodes[i].parent as usize] = true;
            }
        }
        if !alive[0] {
            return Err(RuinError::Extinct);
        }
        skeleton_log_min(self, base, scale, depth, Some(&alive))
    }

    fn max_frontier_score(&self, base: LogScores<'_>) -> Result<f64, RuinError> {
        let s = per_generation_only(base)?;
        let deepest = self.nodes().iter().map(|n| n.generation).max().unwrap_or(1).max(1);
        base.need(deepest as usize + 1)?;
        Ok(s[deepest as usize])
    }
}

/// Exact minimum of `Σ_{e∈π} score(e)` over cutsets `π` within the first
/// `n` generations, in linear arithmetic. `score` is indexed by edge id.
pub fn cutset_min(tree: &Tree, score: &[f64], n: u32) -> Result<f64, RuinError> {
    check_depth(n, tree.depth_cap())?;
    if score.len() < tree.len() {
        return Err(RuinError::ScoreLength { got: score.len(), need: tree.len() });
    }
    let order = tree.prefix_by_level(n);
    for &v in &order[1..] {
        let x = score[v as usize];
        if !(x.is_finite() && x >= 0.0) {
            return Err(RuinError::InvalidScore(v as usize));
        }
    }
    Ok(min_cut_values(tree, score, n)[0])
}

/// Bottom-up `minc` for every vertex within depth `n`; slot 0 holds the
/// total over level-1 edges. Shared with the max-flow construction so
/// that both use identical arithmetic.
pub(crate) fn min_cut_values(tree: &Tree, score: &[f64], n: u32) -> Vec<f64> {
    let order = tree.prefix_by_level(n);
    let mut minc = vec![0.0f64; tree.len()];
    for &v in order[1..].iter().rev() {
        let v = v as usize;
        minc[v] = if tree.generation(v) == n || tree.is_leaf(v) {
            score[v]
        } else {
            score[v].min(children_sum(tree, &minc, v))
        };
    }
    minc[0] = children_sum(tree, &minc, 0);
    minc
}

/// [`cutset_min`] on a spherically symmetric tree with one score per
/// generation (slot 0 ignored).
pub fn cutset_min_levels(tree: &SphericalTree, score: &[f64], n: u32) -> Result<f64, RuinError> {
    check_depth(n, tree.depth_cap())?;
    if score.len() <= n as usize {
        return Err(RuinError::ScoreLength { got: score.len(), need: n as usize + 1 });
    }
    if let Some(g) = (1..=n as usize).find(|&g| !(score[g].is_finite() && score[g] >= 0.0)) {
        return Err(RuinError::InvalidScore(g));
    }
    Ok(level_min_cut_values(tree, score, n)[0])
}

/// `minc` per generation; slot 0 holds the total over level-1 edges.
pub(crate) fn level_min_cut_values(tree: &SphericalTree, score: &[f64], n: u32) -> Vec<f64> {
    let mut minc = vec![0.0f64; n as usize + 1];
    minc[n as usize] = score[n as usize];
    for g in (1..n as usize).rev() {
        let c = tree.children_at(g as u32);
        minc[g] = if c == 0 { score[g] } else { score[g].min(f64::from(c) * minc[g + 1]) };
    }
    minc[0] = f64::from(tree.children_at(0)) * minc[1];
    minc
}

#[inline]
pub(crate) fn children_sum(tree: &Tree, values: &[f64], v: usize) -> f64 {
    tree.child_slice(v).iter().map(|&c| values[c as usize]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{exp, ln};

    #[test]
    fn examples() {
        let t = SphericalTree::regular(2, 6).materialize(1000).unwrap();
        let score: Vec<f64> = (0..t.len()).map(|v| libm::pow(2.0, -f64::from(t.generation(v)))).collect();
        for n in 1..=6 {
            assert_eq!(cutset_min(&t, &score, n).unwrap(), 1.0);
        }

        let p = Tree::path(9);
        let score: Vec<f64> = (0..10).map(|v| 1.0 / v.max(1) as f64).collect();
        for n in 1..=9 {
            assert_eq!(cutset_min(&p, &score, n).unwrap(), 1.0 / f64::from(n));
        }

        let z = SphericalTree::zd_like(2, 8).materialize(1000).unwrap();
        let score: Vec<f64> = (0..z.len()).map(|v| if z.generation(v) == 3 { 0.0 } else { 1.0 }).collect();
        assert_eq!(cutset_min(&z, &score, 5).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let p = Tree::path(3);
        assert!(cutset_min(&p, &[0.0; 4], 4).is_err());
        assert!(cutset_min(&p, &[0.0; 3], 2).is_err());
        assert_eq!(cutset_min(&p, &[0.0, 1.0, -1.0, 1.0], 3), Err(RuinError::InvalidScore(2)));
    }

    #[test]
    fn shapes_agree() {
        let sph = SphericalTree::zd_like(3, 40);
        let t = sph.materialize(1 << 22).unwrap();
        let base: Vec<f64> = (0..=40).map(|g| -ln(f64::from(g).max(1.0))).collect();
        for depth in [1, 2, 7, 40] {
            for lambda in [0.3, 1.0, 1.7, 3.0] {
                let a = sph.log_cutset_min(LogScores::PerGeneration(&base), lambda, depth).unwrap();
                let b = t.log_cutset_min(LogScores::PerGeneration(&base), lambda, depth).unwrap();
                assert!((a - b).abs() < 1e-9, "depth {depth} lambda {lambda}: {a} vs {b}");
                let lin: Vec<f64> = (0..t.len()).map(|v| exp(lambda * base[t.generation(v) as usize])).collect();
                let c = ln(cutset_min(&t, &lin, depth).unwrap());
                assert!((a - c).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn skeleton_matches_expansion() {
        let base: Vec<f64> = (0..=80).map(|g| -ln(f64::from(g).max(1.0))).collect();
        for seed in 0..8 {
            let s = SkeletonTree::sample(&[0.25, 0.0, 0.0, 0.75], seed, 80, 1 << 20).unwrap();
            let t = s.expand(1 << 22).unwrap();
            for depth in [1, 5, 33, 80] {
                let a = s.log_cutset_min(LogScores::PerGeneration(&base), 1.3, depth).unwrap();
                let b = t.log_cutset_min(LogScores::PerGeneration(&base), 1.3, depth).unwrap();
                assert!((a - b).abs() < 1e-9 || a == b, "seed {seed} depth {depth}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn ray_minimum_ignores_dead_branches() {
        // Root edge 1 splits into a dead end (2) and a chain reaching
        // depth 4 (3, 4, 5).
        let t = Tree::from_parents(&[None, Some(0), Some(1), Some(1), Some(3), Some(4)]).unwrap();
        let base = [0.0, -1.0, -2.0, -3.0, -4.0, -5.0];
        let with_dead = t.log_cutset_min(LogScores::PerEdge(&base), 1.0, 4).unwrap();
        let rays = t.log_ray_cutset_min(LogScores::PerEdge(&base), 1.0, 4).unwrap();
        assert!((with_dead - ln(exp(-2.0) + exp(-5.0))).abs() < 1e-12);
        assert_eq!(rays, -5.0);

        let base: Vec<f64> = (0..=80).map(|g| -ln(f64::from(g).max(1.0))).collect();
        let mut extinct = 0;
        for seed in 0..12 {
            let s = SkeletonTree::sample(&[0.4, 0.0, 0.0, 0.6], seed, 80, 1 << 20).unwrap();
            let t = s.expand(1 << 22).unwrap();
            for depth in [3, 40, 80] {
                match (
                    s.log_ray_cutset_min(LogScores::PerGeneration(&base), 1.3, depth),
                    t.log_ray_cutset_min(LogScores::PerGeneration(&base), 1.3, depth),
                ) {
                    (Ok(a), Ok(b)) => assert!((a - b).abs() < 1e-9, "seed {seed} depth {depth}: {a} vs {b}"),
                    (Err(RuinError::Extinct), Err(RuinError::Extinct)) => extinct += 1,
                    other => panic!("seed {seed}: {other:?}"),
                }
            }
        }
        assert!(extinct > 0);
    }

    #[test]
    fn sparse_min_queries() {
        let v: Vec<f64> = (0..37).map(|i| ((i * 7919) % 31) as f64).collect();
        let t = SparseMin::new(v.clone());
        for lo in 0..37 {
            for hi in lo..37 {
                let want = v[lo..=hi].iter().copied().fold(f64::INFINITY, f64::min);
                assert_eq!(t.query(lo, hi), want);
            }
        }
    }
}
