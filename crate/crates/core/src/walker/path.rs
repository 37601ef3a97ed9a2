use alloc::vec::Vec;

use super::{ClockSource, EdgeRates};
use crate::tree::{Tree, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathOutcome {
    /// Reached the far end of the path.
    HitEnd,
    /// Came back to the start vertex.
    Returned,
    Budget,
}

/// Rubin's construction restricted to a path `v_0, v_1, ..., v_L` of a
/// tree, started at `v_0`.
///
/// This is the walk on the subtree `[v_0, v_L]` with the clocks `Y` keyed
/// by the original vertex ids, stored as a birth-death chain. It makes the
/// same floating-point comparisons as [`super::Walker::step_rubin`] on
/// that subtree. The path can be extended by one vertex while a walk sits
/// at its end, which is how extensions to deeper edges reuse the
/// trajectory up to their first visit of the shared prefix.
#[derive(Clone, Debug)]
pub struct PathWalk {
    vertices: Vec<u32>,
    w: Vec<f64>,
    delta: Vec<f64>,
    down_count: Vec<u32>,
    up_count: Vec<u32>,
    down_time: Vec<f64>,
    up_time: Vec<f64>,
    pos: usize,
    steps: u64,
}

impl PathWalk {
    pub fn new(start: VertexId) -> Self {
        Self {
            vertices: alloc::vec![start as u32],
            w: alloc::vec![f64::NAN],
            delta: alloc::vec![f64::NAN],
            down_count: alloc::vec![0],
            up_count: alloc::vec![0],
            down_time: alloc::vec![0.0],
            up_time: alloc::vec![0.0],
            pos: 0,
            steps: 0,
        }
    }

    /// Appends vertex `v` reached through an edge with weights `(w, δ)`.
    pub fn push(&mut self, v: VertexId, w: f64, delta: f64) {
        self.vertices.push(v as u32);
        self.w.push(w);
        self.delta.push(delta);
        self.down_count.push(0);
        self.up_count.push(0);
        self.down_time.push(0.0);
        self.up_time.push(0.0);
    }

    pub(crate) fn push_edge(&mut self, e: VertexId, rates: &EdgeRates) {
        self.push(e, rates.w(e), rates.delta(e));
    }

    /// Path from the root to `tip`.
    pub(crate) fn root_path(tree: &Tree, tip: VertexId, rates: &EdgeRates) -> Self {
        let path = tree.path_to(tip);
        let mut walk = Self::new(path[0]);
        for &v in &path[1..] {
            walk.push_edge(v, rates);
        }
        walk
    }

    /// Highest index `L`.
    pub fn end(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn vertex(&self) -> VertexId {
        self.vertices[self.pos] as usize
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Clock time consumed by jumps from `v_i` to `v_{i-1}`.
    pub fn up_time(&self, i: usize) -> f64 {
        self.up_time[i]
    }

    /// Clock time consumed by jumps from `v_{i-1}` to `v_i`.
    pub fn down_time(&self, i: usize) -> f64 {
        self.down_time[i]
    }

    /// `(downward, upward)` crossings of the edge into `v_i`.
    pub fn crossings(&self, i: usize) -> (u32, u32) {
        (self.down_count[i], self.up_count[i])
    }

    /// One jump; returns the new position.
    #[inline]
    pub fn step(&mut self, clocks: &ClockSource) -> usize {
        let i = self.pos;
        let here = self.vertices[i] as usize;
        let up = if i > 0 {
            let to = self.vertices[i - 1] as usize;
            Some(self.up_time[i] + clocks.sample(here, to, u64::from(self.up_count[i])) / self.delta[i])
        } else {
            None
        };
        let down = if i < self.end() {
            let j = i + 1;
            let k = self.down_count[j];
            let r = if k == 0 { self.w[j] } else { self.delta[j] };
            Some(self.down_time[j] + clocks.sample(here, self.vertices[j] as usize, u64::from(k)) / r)
        } else {
            None
        };
        // Ties go to the parent, which has the lower vertex id.
        let go_down = match (up, down) {
            (Some(u), Some(d)) => d < u,
            (None, Some(_)) => true,
            (Some(_), None) => false,
            (None, None) => return i,
        };
        if go_down {
            self.down_time[i + 1] = down.expect("down candidate");
            self.down_count[i + 1] += 1;
            self.pos = i + 1;
        } else {
            self.up_time[i] = up.expect("up candidate");
            self.up_count[i] += 1;
            self.pos = i - 1;
        }
        self.steps += 1;
        self.pos
    }

    /// Steps until the walk returns to `v_0`, or reaches `v_L` when
    /// `stop_at_end` is set, or has made `budget` steps in total.
    pub fn run(&mut self, clocks: &ClockSource, stop_at_end: bool, budget: u64) -> PathOutcome {
        let end = self.end();
        if end == 0 {
            return PathOutcome::Returned;
        }
        loop {
            if self.steps >= budget {
                return PathOutcome::Budget;
            }
            let p = self.step(clocks);
            if p == 0 {
                return PathOutcome::Returned;
            }
            if stop_at_end && p == end {
                return PathOutcome::HitEnd;
            }
        }
    }

    /// Steps until the walk reaches `v_L`, passing through `v_0` freely.
    pub fn run_to_end(&mut self, clocks: &ClockSource, budget: u64) -> PathOutcome {
        let end = self.end();
        while self.pos != end {
            if self.steps >= budget {
                return PathOutcome::Budget;
            }
            self.step(clocks);
        }
        PathOutcome::HitEnd
    }
}
