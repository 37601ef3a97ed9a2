//! Where a tree comes from: a file, or a generator written as a short
//! string.
//!
//! | string | tree |
//! |---|---|
//! | `zd:D` | root with one child, branching `D` at generations `2^k` |
//! | `regular:K` | every vertex has `K` children |
//! | `path` | a ray |
//! | `profile:a,b,c` | spherically symmetric, last entry repeats |
//! | `gw:p0,p1,...` | Galton-Watson with offspring pmf |
//! | `poly:p-1,p0,p1,...` | random polynomial tree, pmf of `L` from `-1` |
//! | anything else | a tree file |
//!
//! The first four are kept level-symmetric so that deep computations
//! never materialise them; random trees use `--seed`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use branchruin_core::tree::{
    generate_with_budget, validate_pmf, SkeletonTree, SphericalTree, TreeKind, TreeSpec, DEFAULT_VERTEX_BUDGET,
};
use branchruin_core::weights::WeightScheme;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::format::{read_tree_file, TreeFile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TreeSource {
    ZdLike(u32),
    Regular(u32),
    Path,
    Profile(Vec<u32>),
    GaltonWatson(Vec<f64>),
    Polynomial(Vec<f64>),
    File(PathBuf),
}

fn list<T: FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',').map(|x| x.trim().parse::<T>().map_err(|_| format!("bad list entry `{x}`"))).collect()
}

impl FromStr for TreeSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let positive = |x: &str| match x.parse::<u32>() {
            Ok(v) if v >= 1 => Ok(v),
            _ => Err(format!("`{s}`: expected a positive integer")),
        };
        Ok(match head {
            "zd" => {
                let d = positive(rest)?;
                if d < 2 {
                    return Err("zd needs d >= 2".into());
                }
                Self::ZdLike(d)
            }
            "regular" => Self::Regular(positive(rest)?),
            "path" if rest.is_empty() => Self::Path,
            "profile" => Self::Profile(list(rest)?),
            "gw" => Self::GaltonWatson(list(rest)?),
            "poly" => Self::Polynomial(list(rest)?),
            _ => Self::File(PathBuf::from(s)),
        })
    }
}

impl TryFrom<String> for TreeSource {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<TreeSource> for String {
    fn from(t: TreeSource) -> String {
        t.to_string()
    }
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for TreeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ZdLike(d) => write!(f, "zd:{d}"),
            Self::Regular(k) => write!(f, "regular:{k}"),
            Self::Path => write!(f, "path"),
            Self::Profile(p) => write!(f, "profile:{}", join(p)),
            Self::GaltonWatson(p) => write!(f, "gw:{}", join(p)),
            Self::Polynomial(p) => write!(f, "poly:{}", join(p)),
            Self::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// A loaded tree in the cheapest representation that supports the
/// request.
#[derive(Clone, Debug)]
pub enum Loaded {
    Explicit(TreeFile),
    Spherical(SphericalTree),
    Skeleton(SkeletonTree),
}

impl TreeSource {
    /// The level-symmetric shape, if this source has one.
    pub fn spherical(&self, depth: u32) -> Result<Option<SphericalTree>, CliError> {
        Ok(match self {
            Self::ZdLike(d) => Some(SphericalTree::zd_like(*d, depth)),
            Self::Regular(k) => Some(SphericalTree::regular(*k, depth)),
            Self::Path => Some(SphericalTree::path(depth)),
            Self::Profile(p) => Some(SphericalTree::from_profile(p, depth)?),
            _ => None,
        })
    }

    /// Loads the tree with generations up to `depth` (ignored for files,
    /// which carry their own cap).
    pub fn load(&self, depth: u32, seed: u64) -> Result<Loaded, CliError> {
        if let Some(s) = self.spherical(depth)? {
            return Ok(Loaded::Spherical(s));
        }
        Ok(match self {
            Self::Polynomial(pmf) => {
                validate_pmf(pmf)?;
                Loaded::Skeleton(SkeletonTree::sample(pmf, seed, depth, DEFAULT_VERTEX_BUDGET)?)
            }
            Self::GaltonWatson(pmf) => {
                let spec = TreeSpec { kind: TreeKind::GaltonWatson { offspring: pmf.clone() }, seed, depth_cap: depth };
                Loaded::Explicit(TreeFile { tree: generate_with_budget(&spec, DEFAULT_VERTEX_BUDGET)?, weights: None })
            }
            Self::File(path) => {
                Loaded::Explicit(read_tree_file(path).map_err(|source| CliError::File { path: path.clone(), source })?)
            }
            _ => unreachable!("spherical sources handled above"),
        })
    }

    /// Loads and materialises as an arena tree.
    pub fn load_explicit(&self, depth: u32, seed: u64) -> Result<TreeFile, CliError> {
        Ok(match self.load(depth, seed)? {
            Loaded::Explicit(f) => f,
            Loaded::Spherical(s) => TreeFile { tree: s.materialize(DEFAULT_VERTEX_BUDGET)?, weights: None },
            Loaded::Skeleton(s) => TreeFile { tree: s.expand(DEFAULT_VERTEX_BUDGET)?, weights: None },
        })
    }
}

impl Loaded {
    pub fn depth_cap(&self) -> u32 {
        match self {
            Self::Explicit(f) => f.tree.depth_cap(),
            Self::Spherical(s) => s.depth_cap(),
            Self::Skeleton(s) => s.depth_cap(),
        }
    }

    pub fn file_scheme(&self) -> Option<WeightScheme> {
        match self {
            Self::Explicit(f) => f.scheme(),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for s in ["zd:4", "regular:2", "path", "profile:2,1,3", "gw:0.2,0.3,0.5", "poly:0.25,0,0,0.75", "trees/a.txt"] {
            let t: TreeSource = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        assert!("zd:1".parse::<TreeSource>().is_err());
        assert!("regular:x".parse::<TreeSource>().is_err());
        assert!("gw:0.5,a".parse::<TreeSource>().is_err());
    }

    #[test]
    fn loads_cheapest_shape() {
        assert!(matches!("zd:2".parse::<TreeSource>().unwrap().load(64, 0).unwrap(), Loaded::Spherical(_)));
        let poly: TreeSource = "poly:0.25,0,0,0.75".parse().unwrap();
        assert!(matches!(poly.load(64, 3).unwrap(), Loaded::Skeleton(_)));
        let t = "zd:2".parse::<TreeSource>().unwrap().load_explicit(4, 0).unwrap();
        assert_eq!(t.tree.level_sizes(), vec![1, 1, 2, 4, 4]);
    }
}
