use alloc::vec::Vec;

use rand::distr::Distribution;
use rand::distr::{weighted::WeightedIndex, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::generate::validate_pmf;
use super::{Tree, TreeError, NO_PARENT};

/// The random polynomial tree stored through its branch vertices only.
///
/// A vertex at generation `n ≥ 1` branches (`ε_n = 1`) with probability
/// `1/n` and otherwise has a single child, so almost all of the tree is
/// unary chains. Each [`SkeletonNode`] is a branch vertex, a frontier
/// vertex at the depth cap, or the root; it records the chain of unary
/// edges leading into it from the previous node.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonTree {
    pub(crate) nodes: Vec<SkeletonNode>,
    pub(crate) child_offsets: Vec<u32>,
    pub(crate) depth_cap: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SkeletonNode {
    /// Generation of the node vertex itself.
    pub generation: u32,
    /// Generation of the first edge on the incoming chain; the chain
    /// covers edges `chain_start..=generation`. Zero for the root.
    pub chain_start: u32,
    pub parent: u32,
}

impl SkeletonTree {
    /// Samples `T_m` for the offspring law `pmf[k] = P(L = k − 1)`.
    pub fn sample(pmf: &[f64], seed: u64, depth_cap: u32, node_budget: usize) -> Result<Self, TreeError> {
        validate_pmf(pmf)?;
        if pmf[0] == 1.0 {
            return Err(TreeError::InvalidPmf("P(L = -1) must be below 1"));
        }
        if depth_cap == 0 {
            return Err(TreeError::InvalidSpec("depth_cap must be at least 1"));
        }
        let law = WeightedIndex::new(pmf).map_err(|_| TreeError::InvalidPmf("weights rejected"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut nodes = Vec::new();
        nodes.push(SkeletonNode { generation: 0, chain_start: 0, parent: NO_PARENT });
        nodes.push(SkeletonNode { generation: 1, chain_start: 1, parent: 0 });
        let mut child_offsets = Vec::new();
        child_offsets.push(1u32);
        child_offsets.push(2);

        // Nodes are appended in BFS order, so children are contiguous.
        let mut next = 1;
        while next < nodes.len() {
            let b = nodes[next].generation;
            if b < depth_cap {
                let kids = law.sample(&mut rng);
                if nodes.len() + kids > node_budget {
                    return Err(TreeError::TooLarge(node_budget));
                }
                for _ in 0..kids {
                    let u: f64 = rng.sample(Open01);
                    // P(next branching beyond k) = b/k for unary chains.
                    let k = libm::ceil(f64::from(b) / u);
                    let end = if k >= f64::from(depth_cap) { depth_cap } else { (k as u32).max(b + 1) };
                    nodes.push(SkeletonNode { generation: end, chain_start: b + 1, parent: next as u32 });
                }
            }
            child_offsets.push(nodes.len() as u32);
            next += 1;
        }
        Ok(Self { nodes, child_offsets, depth_cap })
    }

    pub fn depth_cap(&self) -> u32 {
        self.depth_cap
    }

    pub fn nodes(&self) -> &[SkeletonNode] {
        &self.nodes
    }

    /// Child node indices of node `i`.
    pub fn child_nodes(&self, i: usize) -> core::ops::Range<usize> {
        self.child_offsets[i] as usize..self.child_offsets[i + 1] as usize
    }

    /// Some vertex sits at the depth cap.
    pub fn survives(&self) -> bool {
        self.nodes[1..].iter().any(|n| n.generation == self.depth_cap)
    }

    /// Number of vertices at generation `n` in the expanded tree.
    pub fn level_size(&self, n: u32) -> u64 {
        self.nodes[1..].iter().filter(|node| node.chain_start <= n && n <= node.generation).count() as u64
    }

    /// All level sizes `0..=depth_cap` by a difference array.
    pub fn level_sizes(&self) -> Vec<u64> {
        let cap = self.depth_cap as usize;
        let mut diff = alloc::vec![0i64; cap + 2];
        diff[0] = 1;
        diff[1] = -1;
        for node in &self.nodes[1..] {
            diff[node.chain_start as usize] += 1;
            diff[node.generation as usize + 1] -= 1;
        }
        let mut acc = 0i64;
        diff[..=cap]
            .iter()
            .map(|d| {
                acc += d;
                acc as u64
            })
            .collect()
    }

    /// Number of vertices in the expanded tree.
    pub fn vertex_count(&self) -> u64 {
        1 + self.nodes[1..].iter().map(|n| u64::from(n.generation - n.chain_start + 1)).sum::<u64>()
    }

    /// Expands every chain into an arena tree.
    ///
    /// The root node maps to vertex 0 and each chain is laid out
    /// consecutively, so vertex ids follow node order rather than levels.
    pub fn expand(&self, vertex_budget: usize) -> Result<Tree, TreeError> {
        let total = self.vertex_count();
        if total > vertex_budget.min(NO_PARENT as usize - 1) as u64 {
            return Err(TreeError::TooLarge(vertex_budget));
        }
        let mut parent = Vec::with_capacity(total as usize);
        let mut end_vertex = alloc::vec![0u32; self.nodes.len()];
        parent.push(NO_PARENT);
        for (i, node) in self.nodes.iter().enumerate().skip(1) {
            let mut above = end_vertex[node.parent as usize];
            for _ in node.chain_start..=node.generation {
                parent.push(above);
                above = parent.len() as u32 - 1;
            }
            end_vertex[i] = above;
        }
        Ok(Tree::assemble(parent, Some(self.depth_cap)))
    }
}
