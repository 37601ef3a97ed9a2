use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SkeletonTree, SphericalTree, Tree, TreeError, NO_PARENT};

/// Upper bound on generated vertices unless the caller picks another.
pub const DEFAULT_VERTEX_BUDGET: usize = 50_000_000;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum TreeKind {
    Explicit {
        parents: Vec<Option<usize>>,
    },
    /// `profile[g]` children per vertex at generation `g`; the last entry repeats.
    SphericallySymmetric {
        profile: Vec<u32>,
    },
    ZdLike {
        d: u32,
    },
    /// `offspring[k] = P(k children)`.
    GaltonWatson {
        offspring: Vec<f64>,
    },
    /// `pmf[k] = P(L = k − 1)`.
    Polynomial {
        pmf: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreeSpec {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: TreeKind,
    pub seed: u64,
    pub depth_cap: u32,
}

/// Entries finite, nonnegative, summing to one within `1e-12`.
pub fn validate_pmf(pmf: &[f64]) -> Result<(), TreeError> {
    if pmf.is_empty() {
        return Err(TreeError::InvalidPmf("empty"));
    }
    if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(TreeError::InvalidPmf("entries must be finite and nonnegative"));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(TreeError::InvalidPmf("entries must sum to 1"));
    }
    Ok(())
}

pub fn generate(spec: &TreeSpec) -> Result<Tree, TreeError> {
    generate_with_budget(spec, DEFAULT_VERTEX_BUDGET)
}

/// Materialises `spec` truncated at its depth cap; the output depends only
/// on `spec`.
pub fn generate_with_budget(spec: &TreeSpec, vertex_budget: usize) -> Result<Tree, TreeError> {
    if spec.depth_cap == 0 {
        return Err(TreeError::InvalidSpec("depth_cap must be at least 1"));
    }
    match &spec.kind {
        TreeKind::Explicit { parents } => {
            let tree = Tree::from_parents(parents)?;
            Ok(tree.truncate(spec.depth_cap).with_depth_cap(spec.depth_cap))
        }
        TreeKind::SphericallySymmetric { profile } => {
            SphericalTree::from_profile(profile, spec.depth_cap)?.materialize(vertex_budget)
        }
        TreeKind::ZdLike { d } => {
            if *d < 2 {
                return Err(TreeError::InvalidSpec("zd_like needs d >= 2"));
            }
            SphericalTree::zd_like(*d, spec.depth_cap).materialize(vertex_budget)
        }
        TreeKind::GaltonWatson { offspring } => galton_watson(offspring, spec.seed, spec.depth_cap, vertex_budget),
        TreeKind::Polynomial { pmf } => {
            SkeletonTree::sample(pmf, spec.seed, spec.depth_cap, vertex_budget)?.expand(vertex_budget)
        }
    }
}

fn galton_watson(offspring: &[f64], seed: u64, depth_cap: u32, budget: usize) -> Result<Tree, TreeError> {
    validate_pmf(offspring)?;
    let law = WeightedIndex::new(offspring).map_err(|_| TreeError::InvalidPmf("weights rejected"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = budget.min(NO_PARENT as usize - 1);
    let mut parent = Vec::new();
    parent.push(NO_PARENT);
    let mut level = 0..1usize;
    for _ in 0..depth_cap {
        let start = parent.len();
        for v in level.clone() {
            let k = law.sample(&mut rng);
            if parent.len() + k > budget {
                return Err(TreeError::TooLarge(budget));
            }
            parent.extend(core::iter::repeat(v as u32).take(k));
        }
        level = start..parent.len();
    }
    Ok(Tree::assemble(parent, Some(depth_cap)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: TreeKind, depth_cap: u32) -> TreeSpec {
        TreeSpec { kind, seed: 7, depth_cap }
    }

    #[test]
    fn zd_like_examples() {
        let t = generate(&spec(TreeKind::ZdLike { d: 2 }, 4)).unwrap();
        let sizes: Vec<usize> = (1..=4).map(|n| t.level_edges(n).unwrap().len()).collect();
        assert_eq!(sizes, [1, 2, 4, 4]);
        assert!(generate(&spec(TreeKind::ZdLike { d: 1 }, 4)).is_err());
    }

    #[test]
    fn unary_profile_is_a_path() {
        let t = generate(&spec(TreeKind::SphericallySymmetric { profile: alloc::vec![1] }, 10)).unwrap();
        assert_eq!(t, Tree::path(10));
    }

    #[test]
    fn polynomial_first_branch() {
        let t = generate(&spec(TreeKind::Polynomial { pmf: alloc::vec![0.0, 0.0, 1.0] }, 3)).unwrap();
        assert_eq!(t.child_count(t.level_edges(1).unwrap()[0]), 2);
    }

    #[test]
    fn invalid_pmfs() {
        for pmf in [alloc::vec![], alloc::vec![0.5, 0.4], alloc::vec![-0.1, 1.1], alloc::vec![f64::NAN]] {
            assert!(generate(&spec(TreeKind::GaltonWatson { offspring: pmf.clone() }, 3)).is_err());
            assert!(generate(&spec(TreeKind::Polynomial { pmf }, 3)).is_err());
        }
        assert!(validate_pmf(&[0.3, 0.7 + 1e-13]).is_ok());
    }

    #[test]
    fn galton_watson_is_deterministic() {
        let s = spec(TreeKind::GaltonWatson { offspring: alloc::vec![0.0, 0.5, 0.5] }, 12);
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        let other = TreeSpec { seed: 8, ..s.clone() };
        assert_ne!(generate(&s).unwrap().parents(), generate(&other).unwrap().parents());
    }

    #[test]
    fn explicit_is_truncated() {
        let parents = Tree::path(5).parents();
        let t = generate(&spec(TreeKind::Explicit { parents }, 3)).unwrap();
        assert_eq!(t, Tree::path(3));
        let t = generate(&spec(TreeKind::Explicit { parents: Tree::path(2).parents() }, 4)).unwrap();
        assert_eq!(t.depth_cap(), 4);
        assert!(t.is_dead_end(2));
    }
}
