//! Rooted trees in arena form, plus the two compressed shapes used for
//! trees too large to materialise.
//!
//! Vertices are numbered `0..len`, the root is vertex `0`, and every
//! non-root vertex has a parent with a strictly lower index. An edge is
//! identified with its child endpoint, so edge ids are `1..len`.

use alloc::vec;
use alloc::vec::Vec;

use crate::BitSet;

mod generate;
mod growth;
mod skeleton;
mod spherical;

pub use generate::{generate, generate_with_budget, validate_pmf, TreeKind, TreeSpec, DEFAULT_VERTEX_BUDGET};
pub use growth::PgrEstimate;
pub use skeleton::SkeletonTree;
pub use spherical::SphericalTree;

pub type VertexId = usize;
/// An edge, named by its child endpoint `e⁺`.
pub type EdgeId = usize;

pub const ROOT: VertexId = 0;
const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("tree has no vertices")]
    Empty,
    #[error("vertex 0 must be the root and have no parent")]
    RootHasParent,
    #[error("vertex {0} has no parent; only vertex 0 may be the root")]
    MissingParent(usize),
    #[error("vertex {vertex} references parent {parent}, which is not a lower index")]
    ForwardReference { vertex: usize, parent: usize },
    #[error("unknown edge {0}")]
    UnknownEdge(usize),
    #[error("generation {requested} outside 1..={depth_cap}")]
    GenerationOutOfRange { requested: u32, depth_cap: u32 },
    #[error("invalid distribution: {0}")]
    InvalidPmf(&'static str),
    #[error("invalid tree spec: {0}")]
    InvalidSpec(&'static str),
    #[error("tree would exceed the vertex budget of {0}")]
    TooLarge(usize),
    #[error("growth estimate needs depth_cap >= 16, got {0}")]
    TooShallow(u32),
    #[error("tree has more than u32::MAX vertices")]
    Overflow,
}

/// Immutable rooted tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tree {
    parent: Vec<u32>,
    generation: Vec<u32>,
    child_offsets: Vec<u32>,
    children: Vec<u32>,
    level_offsets: Vec<u32>,
    by_level: Vec<u32>,
    depth_cap: u32,
}

impl Tree {
    /// Builds a tree from a parent array: entry 0 must be `None`, every
    /// other entry must name a lower index.
    pub fn from_parents(parents: &[Option<usize>]) -> Result<Self, TreeError> {
        let raw = check_parents(parents)?;
        Ok(Self::assemble(raw, None))
    }

    /// Single-vertex tree.
    pub fn root_only() -> Self {
        Self::assemble(vec![NO_PARENT], None)
    }

    /// Path `ϱ = 0 - 1 - ... - length`.
    pub fn path(length: usize) -> Self {
        let mut parent = Vec::with_capacity(length + 1);
        parent.push(NO_PARENT);
        parent.extend(0..length as u32);
        Self::assemble(parent, None)
    }

    /// `parent` must already satisfy the lower-index rule.
    pub(crate) fn assemble(parent: Vec<u32>, depth_cap: Option<u32>) -> Self {
        let n = parent.len();
        let mut generation = vec![0u32; n];
        let mut max_gen = 0;
        for v in 1..n {
            let g = generation[parent[v] as usize] + 1;
            generation[v] = g;
            max_gen = max_gen.max(g);
        }
        let depth_cap = depth_cap.map_or(max_gen, |c| c.max(max_gen));

        let mut child_offsets = vec![0u32; n + 1];
        for &p in &parent[1..] {
            child_offsets[p as usize + 1] += 1;
        }
        for i in 0..n {
            child_offsets[i + 1] += child_offsets[i];
        }
        let mut fill = child_offsets.clone();
        let mut children = vec![0u32; n.saturating_sub(1)];
        for (v, &p) in parent.iter().enumerate().skip(1) {
            let p = p as usize;
            children[fill[p] as usize] = v as u32;
            fill[p] += 1;
        }

        let levels = depth_cap as usize + 1;
        let mut level_offsets = vec![0u32; levels + 1];
        for &g in &generation {
            level_offsets[g as usize + 1] += 1;
        }
        for i in 0..levels {
            level_offsets[i + 1] += level_offsets[i];
        }
        let mut fill = level_offsets.clone();
        let mut by_level = vec![0u32; n];
        for (v, &g) in generation.iter().enumerate() {
            by_level[fill[g as usize] as usize] = v as u32;
            fill[g as usize] += 1;
        }

        Self { parent, generation, child_offsets, children, level_offsets, by_level, depth_cap }
    }

    /// Number of vertices.
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    /// Always false: a tree has at least its root.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn edge_count(&self) -> usize {
        self.len() - 1
    }

    /// Edge ids `1..len`.
    pub fn edges(&self) -> core::ops::Range<EdgeId> {
        1..self.len()
    }

    pub fn depth_cap(&self) -> u32 {
        self.depth_cap
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        match self.parent[v] {
            NO_PARENT => None,
            p => Some(p as usize),
        }
    }

    /// Parent array in the form accepted by [`Tree::from_parents`].
    pub fn parents(&self) -> Vec<Option<usize>> {
        (0..self.len()).map(|v| self.parent(v)).collect()
    }

    #[inline]
    pub fn generation(&self, v: VertexId) -> u32 {
        self.generation[v]
    }

    #[inline]
    pub(crate) fn parent_raw(&self, v: VertexId) -> usize {
        self.parent[v] as usize
    }

    #[inline]
    pub(crate) fn child_slice(&self, v: VertexId) -> &[u32] {
        &self.children[self.child_offsets[v] as usize..self.child_offsets[v + 1] as usize]
    }

    pub fn children(&self, v: VertexId) -> impl DoubleEndedIterator<Item = VertexId> + ExactSizeIterator + '_ {
        self.child_slice(v).iter().map(|&c| c as usize)
    }

    #[inline]
    pub fn child_count(&self, v: VertexId) -> usize {
        (self.child_offsets[v + 1] - self.child_offsets[v]) as usize
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.child_count(v) == 0
    }

    /// A leaf strictly above the depth cap.
    pub fn is_dead_end(&self, v: VertexId) -> bool {
        self.is_leaf(v) && self.generation[v] < self.depth_cap
    }

    #[inline]
    pub(crate) fn level_slice(&self, n: u32) -> &[u32] {
        &self.by_level[self.level_offsets[n as usize] as usize..self.level_offsets[n as usize + 1] as usize]
    }

    /// Vertices ordered by generation, then index.
    pub(crate) fn by_level(&self) -> &[u32] {
        &self.by_level
    }

    /// Vertices in the first `depth` generations (inclusive), ordered by
    /// generation then index.
    pub(crate) fn prefix_by_level(&self, depth: u32) -> &[u32] {
        let end = self.level_offsets[(depth.min(self.depth_cap) + 1) as usize] as usize;
        &self.by_level[..end]
    }

    /// All edges at generation `n`, ascending.
    pub fn level_edges(&self, n: u32) -> Result<Vec<EdgeId>, TreeError> {
        self.check_generation(n)?;
        Ok(self.level_slice(n).iter().map(|&v| v as usize).collect())
    }

    /// Number of vertices at each generation `0..=depth_cap`.
    pub fn level_sizes(&self) -> Vec<u64> {
        self.level_offsets.windows(2).map(|w| u64::from(w[1] - w[0])).collect()
    }

    pub(crate) fn check_generation(&self, n: u32) -> Result<(), TreeError> {
        if n == 0 || n > self.depth_cap {
            return Err(TreeError::GenerationOutOfRange { requested: n, depth_cap: self.depth_cap });
        }
        Ok(())
    }

    pub(crate) fn check_edge(&self, e: EdgeId) -> Result<(), TreeError> {
        if e == ROOT || e >= self.len() {
            return Err(TreeError::UnknownEdge(e));
        }
        Ok(())
    }

    /// `a ≤ b` in the ancestral order (a vertex is its own ancestor).
    pub fn is_ancestor(&self, a: VertexId, b: VertexId) -> bool {
        let mut v = b;
        while self.generation[v] > self.generation[a] {
            v = self.parent[v] as usize;
        }
        v == a
    }

    /// Deepest common ancestor of two vertices (`e₁ ∧ e₂` for edges).
    pub fn meet(&self, a: VertexId, b: VertexId) -> VertexId {
        let (mut a, mut b) = (a, b);
        while self.generation[a] > self.generation[b] {
            a = self.parent[a] as usize;
        }
        while self.generation[b] > self.generation[a] {
            b = self.parent[b] as usize;
        }
        while a != b {
            a = self.parent[a] as usize;
            b = self.parent[b] as usize;
        }
        a
    }

    /// Vertices on the path from the root to `v`, root first.
    pub fn path_to(&self, v: VertexId) -> Vec<VertexId> {
        let mut path = Vec::with_capacity(self.generation[v] as usize + 1);
        let mut u = v;
        path.push(u);
        while u != ROOT {
            u = self.parent[u] as usize;
            path.push(u);
        }
        path.reverse();
        path
    }

    /// Restriction to generations `0..=depth`; surviving vertices keep
    /// their relative order.
    pub fn truncate(&self, depth: u32) -> Tree {
        if depth >= self.depth_cap {
            return self.clone();
        }
        let mut remap = vec![NO_PARENT; self.len()];
        let mut parent = Vec::new();
        for v in 0..self.len() {
            if self.generation[v] <= depth {
                remap[v] = parent.len() as u32;
                parent.push(match self.parent[v] {
                    NO_PARENT => NO_PARENT,
                    p => remap[p as usize],
                });
            }
        }
        Self::assemble(parent, Some(depth))
    }

    /// Same vertices with a larger depth cap (leaves above it become dead ends).
    pub fn with_depth_cap(&self, depth_cap: u32) -> Tree {
        Self::assemble(self.parent.clone(), Some(depth_cap))
    }

    /// True iff every root-to-leaf path of the materialised tree contains
    /// exactly one edge of `cut`. Dead-end leaves count: their paths must
    /// be cut too.
    pub fn validate_cutset(&self, cut: &Cutset) -> Result<bool, TreeError> {
        let mut in_cut = BitSet::new(self.len());
        for &e in cut.edges() {
            self.check_edge(e)?;
            in_cut.insert(e);
        }
        if self.len() == 1 {
            return Ok(cut.is_empty());
        }
        let mut crossings = vec![0u8; self.len()];
        for &v in &self.by_level[1..] {
            let v = v as usize;
            let above = crossings[self.parent[v] as usize];
            let here = above + u8::from(in_cut.contains(v));
            if here > 1 {
                return Ok(false);
            }
            crossings[v] = here;
            if self.is_leaf(v) && here != 1 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Level-`n` edges plus the terminal edges of dead-end leaves above `n`.
    pub fn closing_cutset(&self, n: u32) -> Result<Cutset, TreeError> {
        self.check_generation(n)?;
        let mut edges: Vec<EdgeId> = self.level_slice(n).iter().map(|&v| v as usize).collect();
        for g in 1..n {
            edges.extend(self.level_slice(g).iter().map(|&v| v as usize).filter(|&v| self.is_leaf(v)));
        }
        Ok(edges.into_iter().collect())
    }

    /// Finite-depth proxy for `liminf ln|E_n| / ln n`.
    pub fn pgr_estimate(&self) -> Result<PgrEstimate, TreeError> {
        let sizes = self.level_sizes();
        growth::pgr_from_log_sizes(self.depth_cap, |n| {
            let s = sizes[n as usize];
            if s == 0 {
                f64::NEG_INFINITY
            } else {
                crate::numeric::ln(s as f64)
            }
        })
    }
}

/// Builds a tree from a parent array. See [`Tree::from_parents`].
pub fn build_explicit(parents: &[Option<usize>]) -> Result<Tree, TreeError> {
    Tree::from_parents(parents)
}

fn check_parents(parents: &[Option<usize>]) -> Result<Vec<u32>, TreeError> {
    if parents.is_empty() {
        return Err(TreeError::Empty);
    }
    if parents.len() >= NO_PARENT as usize {
        return Err(TreeError::Overflow);
    }
    if parents[0].is_some() {
        return Err(TreeError::RootHasParent);
    }
    let mut raw = Vec::with_capacity(parents.len());
    raw.push(NO_PARENT);
    for (v, p) in parents.iter().enumerate().skip(1) {
        match *p {
            None => return Err(TreeError::MissingParent(v)),
            Some(p) if p >= v => return Err(TreeError::ForwardReference { vertex: v, parent: p }),
            Some(p) => raw.push(p as u32),
        }
    }
    Ok(raw)
}

/// A set of edges, kept sorted and deduplicated.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cutset {
    edges: Vec<EdgeId>,
}

impl Cutset {
    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.edges.binary_search(&e).is_ok()
    }
}

impl FromIterator<EdgeId> for Cutset {
    fn from_iter<I: IntoIterator<Item = EdgeId>>(iter: I) -> Self {
        let mut edges: Vec<EdgeId> = iter.into_iter().collect();
        edges.sort_unstable();
        edges.dedup();
        Self { edges }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(depth: u32) -> Tree {
        SphericalTree::regular(2, depth).materialize(1 << 20).unwrap()
    }

    #[test]
    fn explicit_examples() {
        let t = build_explicit(&[None]).unwrap();
        assert_eq!((t.len(), t.depth_cap()), (1, 0));

        let t = build_explicit(&[None, Some(0), Some(0)]).unwrap();
        assert_eq!((0..3).map(|v| t.generation(v)).collect::<Vec<_>>(), vec![0, 1, 1]);
        assert_eq!(t.children(0).collect::<Vec<_>>(), vec![1, 2]);

        let t = build_explicit(&[None, Some(0), Some(1), Some(2)]).unwrap();
        assert_eq!(t.generation(3), 3);
        assert_eq!(t, Tree::path(3));
    }

    #[test]
    fn explicit_errors() {
        assert_eq!(build_explicit(&[]), Err(TreeError::Empty));
        assert_eq!(build_explicit(&[None, Some(1)]), Err(TreeError::ForwardReference { vertex: 1, parent: 1 }));
        assert_eq!(
            build_explicit(&[None, Some(2), Some(0)]),
            Err(TreeError::ForwardReference { vertex: 1, parent: 2 })
        );
        assert_eq!(build_explicit(&[Some(0)]), Err(TreeError::RootHasParent));
        assert_eq!(build_explicit(&[None, None]), Err(TreeError::MissingParent(1)));
    }

    #[test]
    fn level_edges_examples() {
        let zd = SphericalTree::zd_like(2, 4).materialize(1000).unwrap();
        assert_eq!(zd.level_edges(3).unwrap().len(), 4);
        let path = Tree::path(7);
        for n in 1..=7 {
            assert_eq!(path.level_edges(n).unwrap(), vec![n as usize]);
        }
        assert!(matches!(Tree::root_only().level_edges(1), Err(TreeError::GenerationOutOfRange { .. })));
    }

    #[test]
    fn cutset_examples() {
        let t = binary(3);
        let level2: Cutset = t.level_edges(2).unwrap().into_iter().collect();
        assert!(t.validate_cutset(&level2).unwrap());

        let path = Tree::path(3);
        assert!(!path.validate_cutset(&[1, 2].into_iter().collect()).unwrap());
        assert!(path.validate_cutset(&[2].into_iter().collect()).unwrap());

        assert!(!t.validate_cutset(&[1].into_iter().collect()).unwrap());
        assert_eq!(t.validate_cutset(&[99].into_iter().collect()), Err(TreeError::UnknownEdge(99)));
    }

    #[test]
    fn dead_ends_must_be_cut() {
        // 0 - 1 - 2 - 3, and a dead end 0 - 4.
        let t = build_explicit(&[None, Some(0), Some(1), Some(2), Some(0)]).unwrap();
        let level3: Cutset = t.level_edges(3).unwrap().into_iter().collect();
        assert!(!t.validate_cutset(&level3).unwrap());
        let closing = t.closing_cutset(3).unwrap();
        assert_eq!(closing.edges(), &[3, 4]);
        assert!(t.validate_cutset(&closing).unwrap());
    }

    #[test]
    fn meet_and_ancestry() {
        let t = binary(3);
        let leaves = t.level_edges(3).unwrap();
        let a = leaves[0];
        let b = leaves[1];
        let m = t.meet(a, b);
        assert_eq!(t.generation(m), 2);
        assert!(t.is_ancestor(m, a) && t.is_ancestor(m, b) && t.is_ancestor(ROOT, a));
        assert!(!t.is_ancestor(a, b));
        assert_eq!(t.meet(leaves[0], leaves[7]), ROOT);
        assert_eq!(t.path_to(a).len(), 4);
    }

    #[test]
    fn truncate_keeps_order() {
        let t = binary(4).truncate(2);
        assert_eq!(t.len(), 7);
        assert_eq!(t.depth_cap(), 2);
        assert_eq!(t, binary(2));
    }
}
