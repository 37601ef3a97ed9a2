//! The generalised once-reinforced walk: each edge carries weight `w_e`
//! until its first crossing and `δ_e` afterwards.
//!
//! Two drivers produce the same law. The direct driver samples each jump
//! from the current weights. Rubin's construction attaches exponential
//! clocks to (oriented edge, crossing index) keys and jumps along the
//! edge whose accumulated clock time rings first; because the clocks are
//! a pure function of the key, walks restricted to subtrees (extensions)
//! are coupled with the full walk.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tree::{EdgeId, Tree, TreeError, VertexId, ROOT};
use crate::weights::{WeightError, WeightScheme};
use crate::BitSet;

mod clock;
mod mc;
mod path;

pub use clock::{clock_sample, ClockSource};
pub(crate) use mc::extension_hits;
pub use mc::{escape_mc, path_extension_ruin_mc, ruin_mc_range, EscapeReport, RuinEstimate, MIN_REPLICAS};
pub use path::{PathOutcome, PathWalk};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WalkError {
    #[error("{0}")]
    Tree(#[from] TreeError),
    #[error("{0}")]
    Weights(#[from] WeightError),
    #[error("vertices {0} and {1} are not adjacent")]
    NotAdjacent(VertexId, VertexId),
    #[error("vertex {0} has no neighbour inside the walk's subtree")]
    Isolated(VertexId),
    #[error("restriction does not fit the tree")]
    BadRestriction,
    #[error("need at least {need} replicas, got {got}")]
    TooFewReplicas { got: u64, need: u64 },
    #[error("step budget must be at least 1")]
    ZeroBudget,
}

/// Linear weights per edge, shared by every driver so that all of them
/// perform identical arithmetic.
#[derive(Clone, Debug)]
pub(crate) enum EdgeRates {
    Uniform { w: f64, delta: f64 },
    Table { w: Vec<f64>, delta: Vec<f64> },
}

impl EdgeRates {
    pub(crate) fn new(tree: &Tree, scheme: &WeightScheme) -> Result<Self, WeightError> {
        scheme.validate()?;
        Ok(match *scheme {
            WeightScheme::Unit => Self::Uniform { w: 1.0, delta: 1.0 },
            WeightScheme::Orrw { delta } => Self::Uniform { w: 1.0, delta },
            _ => {
                let mut w = vec![f64::NAN; tree.len()];
                let mut delta = vec![f64::NAN; tree.len()];
                for e in tree.edges() {
                    (w[e], delta[e]) = scheme.edge_weights(tree, e)?;
                }
                Self::Table { w, delta }
            }
        })
    }

    #[inline]
    pub(crate) fn w(&self, e: EdgeId) -> f64 {
        match self {
            Self::Uniform { w, .. } => *w,
            Self::Table { w, .. } => w[e],
        }
    }

    #[inline]
    pub(crate) fn delta(&self, e: EdgeId) -> f64 {
        match self {
            Self::Uniform { delta, .. } => *delta,
            Self::Table { delta, .. } => delta[e],
        }
    }
}

/// Clock rate for the `j`-th jump from `from` to `to`: `w` for the first
/// jump away from the root, `δ` otherwise (an upward jump always follows
/// a downward one).
pub fn rate(scheme: &WeightScheme, tree: &Tree, from: VertexId, to: VertexId, j: u64) -> Result<f64, WalkError> {
    if from >= tree.len() || to >= tree.len() || !clock::adjacent(tree, from, to) {
        return Err(WalkError::NotAdjacent(from, to));
    }
    let downward = tree.parent(to) == Some(from);
    let e = if downward { to } else { from };
    let (w, delta) = scheme.edge_weights(tree, e)?;
    Ok(if j == 0 && downward { w } else { delta })
}

/// When a walk stops; the conditions combine disjunctively.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StopRule {
    pub return_to_root: bool,
    pub reach_depth: Option<u32>,
    pub budget: u64,
}

impl StopRule {
    pub fn budget(budget: u64) -> Self {
        Self { return_to_root: false, reach_depth: None, budget }
    }

    pub fn with_return(mut self) -> Self {
        self.return_to_root = true;
        self
    }

    pub fn with_depth(mut self, depth: u32) -> Self {
        self.reach_depth = Some(depth);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StopReason {
    ReturnedToRoot,
    ReachedDepth,
    Budget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Driver {
    Direct,
    Rubin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Outcome {
    pub stopped_by: StopReason,
    pub steps: u64,
    pub max_depth: u32,
    pub returned: bool,
    pub final_vertex: VertexId,
}

/// Which edges the walk may use.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Restriction {
    Full,
    /// Edge ids allowed; must form a subtree containing the root.
    Edges(BitSet),
}

impl Restriction {
    /// The path `[ϱ, tip]`.
    pub fn path(tree: &Tree, tip: VertexId) -> Self {
        let mut edges = BitSet::new(tree.len());
        for v in tree.path_to(tip).into_iter().skip(1) {
            edges.insert(v);
        }
        Self::Edges(edges)
    }

    #[inline]
    fn allows(&self, e: EdgeId) -> bool {
        match self {
            Self::Full => true,
            Self::Edges(set) => set.contains(e),
        }
    }
}

/// Mutable walk data: position, crossed edges and per-oriented-edge
/// crossing counts and consumed clock time.
///
/// Arrays are sized to the tree once and reset lazily through a list of
/// touched edges, so one state can drive many short replicas on a large
/// tree.
#[derive(Clone, Debug)]
pub struct WalkState {
    current: VertexId,
    steps: u64,
    max_depth: u32,
    crossed: BitSet,
    down_count: Vec<u32>,
    up_count: Vec<u32>,
    down_time: Vec<f64>,
    up_time: Vec<f64>,
    touched: Vec<u32>,
    trajectory: Vec<u32>,
    trajectory_limit: usize,
}

impl WalkState {
    fn new(n: usize) -> Self {
        Self {
            current: ROOT,
            steps: 0,
            max_depth: 0,
            crossed: BitSet::new(n),
            down_count: vec![0; n],
            up_count: vec![0; n],
            down_time: vec![0.0; n],
            up_time: vec![0.0; n],
            touched: Vec::new(),
            trajectory: Vec::new(),
            trajectory_limit: 0,
        }
    }

    fn reset(&mut self) {
        for &e in &self.touched {
            let e = e as usize;
            self.crossed.remove(e);
            self.down_count[e] = 0;
            self.up_count[e] = 0;
            self.down_time[e] = 0.0;
            self.up_time[e] = 0.0;
        }
        self.touched.clear();
        self.current = ROOT;
        self.steps = 0;
        self.max_depth = 0;
        self.trajectory.clear();
        if self.trajectory_limit > 0 {
            self.trajectory.push(ROOT as u32);
        }
    }

    pub fn current(&self) -> VertexId {
        self.current
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    /// `e ∈ E_n`.
    pub fn is_crossed(&self, e: EdgeId) -> bool {
        self.crossed.contains(e)
    }

    /// Edges crossed so far, in first-crossing order.
    pub fn crossed_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.touched.iter().map(|&e| e as usize)
    }

    /// `(downward, upward)` crossings of edge `e`.
    pub fn crossings(&self, e: EdgeId) -> (u32, u32) {
        (self.down_count[e], self.up_count[e])
    }

    /// Visited vertices, starting with the root, up to the configured limit.
    pub fn trajectory(&self) -> &[u32] {
        &self.trajectory
    }
}

/// A walk on a fixed tree, weight scheme and optional restriction.
#[derive(Clone, Debug)]
pub struct Walker<'t> {
    tree: &'t Tree,
    rates: EdgeRates,
    restriction: Restriction,
    state: WalkState,
}

impl<'t> Walker<'t> {
    pub fn new(tree: &'t Tree, scheme: &WeightScheme) -> Result<Self, WalkError> {
        Self::restricted(tree, scheme, Restriction::Full)
    }

    pub fn restricted(tree: &'t Tree, scheme: &WeightScheme, restriction: Restriction) -> Result<Self, WalkError> {
        if let Restriction::Edges(set) = &restriction {
            if set.len() != tree.len() {
                return Err(WalkError::BadRestriction);
            }
        }
        let mut state = WalkState::new(tree.len());
        state.reset();
        Ok(Self { tree, rates: EdgeRates::new(tree, scheme)?, restriction, state })
    }

    /// Keeps the first `limit` visited vertices (root included).
    pub fn record_trajectory(&mut self, limit: usize) {
        self.state.trajectory_limit = limit;
        self.state.reset();
    }

    pub fn state(&self) -> &WalkState {
        &self.state
    }

    /// Back to the root with nothing crossed.
    pub fn reset(&mut self) {
        self.state.reset();
    }

    fn mark_move(&mut self, to: VertexId, downward_edge: Option<EdgeId>) {
        let st = &mut self.state;
        if let Some(e) = downward_edge {
            if st.crossed.insert(e) {
                st.touched.push(e as u32);
            }
        }
        st.current = to;
        st.steps += 1;
        st.max_depth = st.max_depth.max(self.tree.generation(to));
        if st.trajectory.len() < st.trajectory_limit {
            st.trajectory.push(to as u32);
        }
    }

    /// One jump to a neighbour chosen with probability proportional to
    /// `δ` for crossed edges and `w` for the others.
    pub fn step_direct<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<VertexId, WalkError> {
        let v = self.state.current;
        let tree = self.tree;
        let mut total = 0.0;
        let up = v != ROOT && self.restriction.allows(v);
        if up {
            total += self.rates.delta(v);
        }
        for &c in tree.child_slice(v) {
            let c = c as usize;
            if self.restriction.allows(c) {
                total += self.child_weight(c);
            }
        }
        if total == 0.0 {
            return Err(WalkError::Isolated(v));
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = None;
        if up {
            u -= self.rates.delta(v);
            if u < 0.0 {
                pick = Some(tree.parent_raw(v));
            }
        }
        if pick.is_none() {
            let mut last = None;
            for &c in tree.child_slice(v) {
                let c = c as usize;
                if !self.restriction.allows(c) {
                    continue;
                }
                last = Some(c);
                u -= self.child_weight(c);
                if u < 0.0 {
                    pick = Some(c);
                    break;
                }
            }
            // Rounding can leave u marginally nonnegative.
            pick = pick.or(last).or(if up { Some(tree.parent_raw(v)) } else { None });
        }
        let to = pick.expect("nonzero total");
        self.record_crossing(v, to);
        Ok(to)
    }

    #[inline]
    fn child_weight(&self, c: EdgeId) -> f64 {
        if self.state.crossed.contains(c) {
            self.rates.delta(c)
        } else {
            self.rates.w(c)
        }
    }

    fn record_crossing(&mut self, from: VertexId, to: VertexId) {
        if self.tree.parent_raw(to) == from && to != ROOT {
            self.state.down_count[to] += 1;
            self.mark_move(to, Some(to));
        } else {
            self.state.up_count[from] += 1;
            self.mark_move(to, None);
        }
    }

    /// One jump of Rubin's construction: the neighbour `μ` minimising the
    /// accumulated clock time `Σ_{i≤k_μ} Y(ν, μ, i) / r(ν, μ, i)`, where
    /// `k_μ` counts earlier jumps from `ν` to `μ`. Ties go to the lowest
    /// vertex id.
    pub fn step_rubin(&mut self, clocks: &ClockSource) -> Result<VertexId, WalkError> {
        let v = self.state.current;
        let tree = self.tree;
        let st = &self.state;
        let mut best: Option<(f64, VertexId)> = None;
        if v != ROOT && self.restriction.allows(v) {
            let p = tree.parent_raw(v);
            let t = st.up_time[v] + clocks.sample(v, p, u64::from(st.up_count[v])) / self.rates.delta(v);
            best = Some((t, p));
        }
        for &c in tree.child_slice(v) {
            let c = c as usize;
            if !self.restriction.allows(c) {
                continue;
            }
            let k = st.down_count[c];
            let r = if k == 0 { self.rates.w(c) } else { self.rates.delta(c) };
            let t = st.down_time[c] + clocks.sample(v, c, u64::from(k)) / r;
            if best.map_or(true, |(bt, _)| t < bt) {
                best = Some((t, c));
            }
        }
        let Some((t, to)) = best else {
            return Err(WalkError::Isolated(v));
        };
        if to == tree.parent_raw(v) && v != ROOT {
            self.state.up_time[v] = t;
        } else {
            self.state.down_time[to] = t;
        }
        self.record_crossing(v, to);
        Ok(to)
    }

    fn check_stop(&self, stop: &StopRule) -> Option<StopReason> {
        let st = &self.state;
        if stop.return_to_root && st.current == ROOT && st.steps > 0 {
            return Some(StopReason::ReturnedToRoot);
        }
        if stop.reach_depth.is_some_and(|d| self.tree.generation(st.current) >= d) {
            return Some(StopReason::ReachedDepth);
        }
        if st.steps >= stop.budget {
            return Some(StopReason::Budget);
        }
        None
    }

    /// Steps from the current state until `stop` fires. Direct walks draw
    /// their jumps from a ChaCha8 stream seeded with `seed`; Rubin walks
    /// use `ClockSource::new(seed)`.
    pub fn run(&mut self, driver: Driver, stop: &StopRule, seed: u64) -> Result<Outcome, WalkError> {
        if stop.budget == 0 {
            return Err(WalkError::ZeroBudget);
        }
        let reason = match driver {
            Driver::Direct => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                loop {
                    if let Some(r) = self.check_stop(stop) {
                        break r;
                    }
                    self.step_direct(&mut rng)?;
                }
            }
            Driver::Rubin => {
                let clocks = ClockSource::new(seed);
                self.run_rubin(&clocks, stop)?
            }
        };
        Ok(self.outcome(reason))
    }

    /// [`Walker::run`] with an explicit clock source.
    pub fn run_rubin(&mut self, clocks: &ClockSource, stop: &StopRule) -> Result<StopReason, WalkError> {
        if stop.budget == 0 {
            return Err(WalkError::ZeroBudget);
        }
        loop {
            if let Some(r) = self.check_stop(stop) {
                return Ok(r);
            }
            self.step_rubin(clocks)?;
        }
    }

    fn outcome(&self, stopped_by: StopReason) -> Outcome {
        let st = &self.state;
        Outcome {
            stopped_by,
            steps: st.steps,
            max_depth: st.max_depth,
            returned: st.current == ROOT && st.steps > 0,
            final_vertex: st.current,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::SphericalTree;

    fn binary(depth: u32) -> Tree {
        SphericalTree::regular(2, depth).materialize(1 << 20).unwrap()
    }

    #[test]
    fn rate_examples() {
        let t = Tree::path(3);
        let s = WeightScheme::orrw(2.0).unwrap();
        assert_eq!(rate(&s, &t, 1, 2, 0).unwrap(), 1.0);
        assert_eq!(rate(&s, &t, 1, 2, 1).unwrap(), 2.0);
        assert_eq!(rate(&s, &t, 2, 1, 0).unwrap(), 2.0);
        assert!(rate(&s, &t, 0, 2, 0).is_err());
    }

    #[test]
    fn direct_step_probabilities() {
        let t = binary(2);
        let s = WeightScheme::orrw(3.0).unwrap();
        let mut w = Walker::new(&t, &s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 40_000;
        let mut left = 0;
        for _ in 0..n {
            w.reset();
            left += usize::from(w.step_direct(&mut rng).unwrap() == 1);
        }
        assert!((left as f64 / n as f64 - 0.5).abs() < 0.015);

        // Left edge crossed, right edge not: left has weight δ.
        let mut left = 0;
        for _ in 0..n {
            w.reset();
            w.step_direct(&mut rng).unwrap();
            while w.state().current() != ROOT || !w.state().is_crossed(1) || w.state().is_crossed(2) {
                if w.state().current() == ROOT && w.state().is_crossed(2) {
                    w.reset();
                }
                w.step_direct(&mut rng).unwrap();
            }
            left += usize::from(w.step_direct(&mut rng).unwrap() == 1);
        }
        assert!((left as f64 / n as f64 - 0.75).abs() < 0.015);
    }

    #[test]
    fn leaf_goes_to_parent() {
        let t = Tree::path(1);
        let mut w = Walker::new(&t, &WeightScheme::Unit).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(w.step_direct(&mut rng).unwrap(), 1);
        assert_eq!(w.step_direct(&mut rng).unwrap(), 0);
        let out = w.run(Driver::Rubin, &StopRule::budget(10).with_return(), 3).unwrap();
        assert!(out.returned && out.steps <= 2);
    }

    #[test]
    fn single_edge_rubin_is_deterministic() {
        let t = Tree::path(1);
        let mut w = Walker::new(&t, &WeightScheme::orrw(0.3).unwrap()).unwrap();
        let c = ClockSource::new(99);
        assert_eq!(w.step_rubin(&c).unwrap(), 1);
        assert_eq!(w.step_rubin(&c).unwrap(), 0);
    }

    #[test]
    fn counts_track_steps() {
        let t = binary(5);
        let mut w = Walker::new(&t, &WeightScheme::orrw(0.7).unwrap()).unwrap();
        w.run(Driver::Rubin, &StopRule::budget(500), 11).unwrap();
        let total: u64 = t
            .edges()
            .map(|e| {
                let (d, u) = w.state().crossings(e);
                u64::from(d + u)
            })
            .sum();
        assert_eq!(total, 500);
        for e in t.edges() {
            let (d, u) = w.state().crossings(e);
            assert_eq!(w.state().is_crossed(e), d > 0);
            assert!(d == u || d == u + 1);
        }
        w.reset();
        assert!(t.edges().all(|e| w.state().crossings(e) == (0, 0) && !w.state().is_crossed(e)));
    }

    #[test]
    fn restricted_walk_stays_inside() {
        let t = binary(4);
        let tip = t.level_edges(4).unwrap()[5];
        let mut w = Walker::restricted(&t, &WeightScheme::Unit, Restriction::path(&t, tip)).unwrap();
        w.record_trajectory(1000);
        w.run(Driver::Direct, &StopRule::budget(999), 4).unwrap();
        let path = t.path_to(tip);
        assert!(w.state().trajectory().iter().all(|v| path.contains(&(*v as usize))));
    }
}
