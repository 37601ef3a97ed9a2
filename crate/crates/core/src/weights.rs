//! Initial and reinforced edge weights, and the M-ratio condition.

use alloc::vec::Vec;

use crate::numeric::{abs, exp, ln, log_add_exp};
use crate::tree::{EdgeId, Tree, TreeError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WeightError {
    #[error("{0}")]
    Tree(#[from] TreeError),
    #[error("explicit scheme has no weights for edge {0}")]
    MissingEdge(EdgeId),
    #[error("weights of edge {0} must be positive and finite")]
    NonPositive(EdgeId),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// The weight pair `(w_e, δ_e)` for every edge.
///
/// `w_e` drives the first crossing of an edge, `δ_e` every later one.
/// Explicit arrays are indexed by edge id (the child vertex); entry 0
/// is ignored.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum WeightScheme {
    Unit,
    Orrw {
        delta: f64,
    },
    /// `w_e = β^{-|e|}`, `δ_e = δ·β^{-|e|}`.
    Biased {
        beta: f64,
        delta: f64,
    },
    Explicit {
        w: Vec<f64>,
        delta: Vec<f64>,
    },
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl WeightScheme {
    pub fn orrw(delta: f64) -> Result<Self, WeightError> {
        let s = Self::Orrw { delta };
        s.validate()?;
        Ok(s)
    }

    pub fn biased(beta: f64, delta: f64) -> Result<Self, WeightError> {
        let s = Self::Biased { beta, delta };
        s.validate()?;
        Ok(s)
    }

    /// Checks the family parameters; explicit arrays are checked edge by
    /// edge on use, or all at once by [`WeightScheme::validate_for`].
    pub fn validate(&self) -> Result<(), WeightError> {
        match *self {
            Self::Unit | Self::Explicit { .. } => Ok(()),
            Self::Orrw { delta } => {
                if positive(delta) {
                    Ok(())
                } else {
                    Err(WeightError::InvalidParameter("delta must be positive and finite"))
                }
            }
            Self::Biased { beta, delta } => {
                if positive(beta) && positive(delta) {
                    Ok(())
                } else {
                    Err(WeightError::InvalidParameter("beta and delta must be positive and finite"))
                }
            }
        }
    }

    /// Checks that every edge of `tree` has valid weights.
    pub fn validate_for(&self, tree: &Tree) -> Result<(), WeightError> {
        self.validate()?;
        if let Self::Explicit { .. } = self {
            for e in tree.edges() {
                self.edge_weights(tree, e)?;
            }
        }
        Ok(())
    }

    /// True when the weights depend on the generation only.
    pub fn is_level_uniform(&self) -> bool {
        !matches!(self, Self::Explicit { .. })
    }

    /// `(ln w, ln δ)` for an edge at generation `g` of a level-uniform
    /// scheme; `None` for explicit schemes.
    pub fn level_log_weights(&self, g: u32) -> Option<(f64, f64)> {
        match *self {
            Self::Unit => Some((0.0, 0.0)),
            Self::Orrw { delta } => Some((0.0, ln(delta))),
            Self::Biased { beta, delta } => {
                let lw = -f64::from(g) * ln(beta);
                Some((lw, ln(delta) + lw))
            }
            Self::Explicit { .. } => None,
        }
    }

    /// `(w_e, δ_e)`.
    pub fn edge_weights(&self, tree: &Tree, e: EdgeId) -> Result<(f64, f64), WeightError> {
        tree.check_edge(e)?;
        Ok(match self {
            Self::Unit => (1.0, 1.0),
            Self::Orrw { delta } => (1.0, *delta),
            Self::Biased { beta, delta } => {
                let scale = libm::pow(*beta, -f64::from(tree.generation(e)));
                (scale, delta * scale)
            }
            Self::Explicit { w, delta } => explicit_pair(w, delta, e)?,
        })
    }

    /// `(ln w_e, ln δ_e)`, exact in log space for deep biased edges.
    pub fn edge_log_weights(&self, tree: &Tree, e: EdgeId) -> Result<(f64, f64), WeightError> {
        tree.check_edge(e)?;
        match self {
            Self::Explicit { w, delta } => {
                let (w, d) = explicit_pair(w, delta, e)?;
                Ok((ln(w), ln(d)))
            }
            _ => Ok(self.level_log_weights(tree.generation(e)).expect("level-uniform")),
        }
    }

    /// The constant `δ` when `δ_e = δ·w_e` holds for every edge by
    /// construction.
    pub fn multiplicative_factor(&self) -> Option<f64> {
        match *self {
            Self::Unit => Some(1.0),
            Self::Orrw { delta } | Self::Biased { delta, .. } => Some(delta),
            Self::Explicit { .. } => None,
        }
    }
}

fn explicit_pair(w: &[f64], delta: &[f64], e: EdgeId) -> Result<(f64, f64), WeightError> {
    match (w.get(e), delta.get(e)) {
        (Some(&w), Some(&d)) if positive(w) && positive(d) => Ok((w, d)),
        (Some(_), Some(_)) => Err(WeightError::NonPositive(e)),
        _ => Err(WeightError::MissingEdge(e)),
    }
}

/// Free-function form of [`WeightScheme::edge_weights`].
pub fn edge_weights(scheme: &WeightScheme, tree: &Tree, e: EdgeId) -> Result<(f64, f64), WeightError> {
    scheme.edge_weights(tree, e)
}

/// Smallest `M ≥ 1` bounding `S(e)/W(e)` and its reciprocal on the
/// truncation, where `S(e) = Σ_{g≤e} 1/δ_g` and `W(e) = Σ_{g≤e} 1/w_g`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MRatio {
    pub value: f64,
    /// The per-level maximum rises strictly over the deepest tenth of the
    /// generations, suggesting `M = ∞` on the infinite tree.
    pub diverging: bool,
}

impl MRatio {
    /// `+∞` when flagged as diverging, else the truncation value.
    pub fn effective(&self) -> f64 {
        if self.diverging {
            f64::INFINITY
        } else {
            self.value
        }
    }
}

pub fn m_ratio(tree: &Tree, scheme: &WeightScheme) -> Result<MRatio, WeightError> {
    scheme.validate()?;
    if let Some(delta) = scheme.multiplicative_factor() {
        // The ratio is identically 1/δ.
        return Ok(MRatio { value: delta.max(1.0 / delta), diverging: false });
    }
    let n = tree.len();
    let cap = tree.depth_cap() as usize;
    let mut log_s = alloc::vec![f64::NEG_INFINITY; n];
    let mut log_w = alloc::vec![f64::NEG_INFINITY; n];
    let mut level_max = alloc::vec![0.0f64; cap + 1];
    for &v in &tree.by_level()[1..] {
        let v = v as usize;
        let p = tree.parent_raw(v);
        let (lw, ld) = scheme.edge_log_weights(tree, v)?;
        log_s[v] = log_add_exp(log_s[p], -ld);
        log_w[v] = log_add_exp(log_w[p], -lw);
        let g = tree.generation(v) as usize;
        level_max[g] = level_max[g].max(abs(log_s[v] - log_w[v]));
    }
    Ok(summarise(&level_max[1..]))
}

fn summarise(level_log_max: &[f64]) -> MRatio {
    let value = exp(level_log_max.iter().copied().fold(0.0, f64::max));
    let depth = level_log_max.len();
    let window = (depth / 10).max(2);
    let diverging =
        depth >= 20 && level_log_max[depth - window..].windows(2).all(|w| w[1] > w[0] + 1e-9 * w[0].max(1e-300));
    MRatio { value, diverging }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::SphericalTree;

    #[test]
    fn edge_weight_examples() {
        let t = SphericalTree::regular(2, 3).materialize(100).unwrap();
        let e2 = t.level_edges(2).unwrap()[0];
        assert_eq!(WeightScheme::orrw(2.0).unwrap().edge_weights(&t, e2).unwrap(), (1.0, 2.0));
        assert_eq!(WeightScheme::biased(2.0, 3.0).unwrap().edge_weights(&t, e2).unwrap(), (0.25, 0.75));
        assert_eq!(WeightScheme::Unit.edge_weights(&t, e2).unwrap(), (1.0, 1.0));
        assert!(WeightScheme::Unit.edge_weights(&t, 0).is_err());
    }

    #[test]
    fn explicit_lookup_errors() {
        let t = Tree::path(3);
        let s = WeightScheme::Explicit { w: alloc::vec![0.0, 1.0, 2.0], delta: alloc::vec![0.0, 1.0, -1.0] };
        assert_eq!(s.edge_weights(&t, 1).unwrap(), (1.0, 1.0));
        assert_eq!(s.edge_weights(&t, 2), Err(WeightError::NonPositive(2)));
        assert_eq!(s.edge_weights(&t, 3), Err(WeightError::MissingEdge(3)));
        assert!(s.validate_for(&t).is_err());
    }

    #[test]
    fn invalid_family_parameters() {
        assert!(WeightScheme::orrw(0.0).is_err());
        assert!(WeightScheme::orrw(f64::INFINITY).is_err());
        assert!(WeightScheme::biased(-1.0, 1.0).is_err());
    }

    #[test]
    fn m_ratio_examples() {
        let t = SphericalTree::zd_like(2, 30).materialize(10_000).unwrap();
        assert_eq!(m_ratio(&t, &WeightScheme::orrw(3.0).unwrap()).unwrap().value, 3.0);
        assert_eq!(m_ratio(&t, &WeightScheme::orrw(0.25).unwrap()).unwrap().value, 4.0);
        assert_eq!(m_ratio(&t, &WeightScheme::Unit).unwrap().value, 1.0);
        assert_eq!(m_ratio(&t, &WeightScheme::biased(2.0, 1.0).unwrap()).unwrap().value, 1.0);
    }

    #[test]
    fn explicit_multiplicative_matches_closed_form() {
        let t = Tree::path(200);
        let w: Vec<f64> = (0..=200).map(|i| 1.0 + (i % 7) as f64).collect();
        let delta: Vec<f64> = w.iter().map(|x| 2.5 * x).collect();
        let m = m_ratio(&t, &WeightScheme::Explicit { w, delta }).unwrap();
        assert!((m.value - 2.5).abs() < 1e-12 * 2.5);
        assert!(!m.diverging);
    }

    #[test]
    fn growing_reinforcement_diverges() {
        let t = Tree::path(400);
        let w = alloc::vec![1.0; 401];
        let delta: Vec<f64> = (0..=400).map(|i| 1.0 + i as f64).collect();
        let m = m_ratio(&t, &WeightScheme::Explicit { w, delta }).unwrap();
        assert!(m.diverging && m.effective().is_infinite());
        assert!(m.value > 10.0);
    }
}
