use alloc::vec::Vec;

use super::cutset::{CutsetShape, LogScores};
use super::RuinError;
use crate::numeric::{ln, regression_slope};

/// Settings shared by the bisection estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BisectionConfig {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub tol: f64,
    /// Smallest accepted depth cap.
    pub min_depth: u32,
    /// A regression slope of `ln m` per depth doubling below this counts
    /// as vanishing.
    pub slope_threshold: f64,
    /// Number of doublings in the regression window.
    pub window: u32,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self { lambda_lo: 0.01, lambda_hi: 64.0, tol: 0.02, min_depth: 1 << 10, slope_threshold: -0.05, window: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Regime {
    Vanishing,
    Bounded,
}

/// One classified value of `λ`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Probe {
    pub lambda: f64,
    pub regime: Regime,
    pub slope: f64,
    /// `(depth, ln cutset_min)` at each depth of the window.
    pub log_mins: Vec<(u32, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub value: f64,
    /// Final `(bounded, vanishing)` bracket.
    pub bracket: (f64, f64),
    pub trace: Vec<Probe>,
    /// False when the frontier scores failed the `Ψ → 0` check, in which
    /// case the value is `+∞` and no bisection ran.
    pub decay_ok: bool,
}

fn window_depths(depth_cap: u32, cfg: &BisectionConfig) -> Result<Vec<u32>, RuinError> {
    let top = depth_cap.ilog2();
    if depth_cap < cfg.min_depth || top < cfg.window || cfg.window == 0 {
        return Err(RuinError::TooShallow { depth_cap, required: cfg.min_depth.max(1 << cfg.window.max(1)) });
    }
    Ok((top - cfg.window..=top).map(|j| 1u32 << j).collect())
}

fn classify<S: CutsetShape + ?Sized>(
    shape: &S,
    base: LogScores<'_>,
    scale: f64,
    lambda: f64,
    depths: &[u32],
    cfg: &BisectionConfig,
) -> Result<Probe, RuinError> {
    let mut log_mins = Vec::with_capacity(depths.len());
    for &n in depths {
        log_mins.push((n, shape.log_ray_cutset_min(base, scale, n)?));
    }
    let ys: Vec<f64> = log_mins.iter().map(|&(_, y)| y).collect();
    let slope = if ys.contains(&f64::NEG_INFINITY) { f64::NEG_INFINITY } else { regression_slope(&ys) };
    let regime = if slope < cfg.slope_threshold { Regime::Vanishing } else { Regime::Bounded };
    Ok(Probe { lambda, regime, slope, log_mins })
}

fn bisect(
    cfg: &BisectionConfig,
    mut probe: impl FnMut(f64) -> Result<Probe, RuinError>,
) -> Result<Estimate, RuinError> {
    let (mut lo, mut hi) = (cfg.lambda_lo, cfg.lambda_hi);
    if !(lo.is_finite() && hi.is_finite() && lo < hi && cfg.tol > 0.0) {
        return Err(RuinError::InvalidBracket);
    }
    let mut trace = Vec::new();
    let at_lo = probe(lo)?;
    let at_hi = probe(hi)?;
    let (rlo, rhi) = (at_lo.regime, at_hi.regime);
    trace.push(at_lo);
    trace.push(at_hi);
    match (rlo, rhi) {
        (Regime::Bounded, Regime::Vanishing) => {}
        (Regime::Vanishing, Regime::Vanishing) => {
            return Ok(Estimate { value: 0.0, bracket: (0.0, lo), trace, decay_ok: true });
        }
        (Regime::Bounded, Regime::Bounded) => {
            return Ok(Estimate { value: f64::INFINITY, bracket: (hi, f64::INFINITY), trace, decay_ok: true });
        }
        (Regime::Vanishing, Regime::Bounded) => return Err(RuinError::Inconsistent { trace }),
    }
    while hi - lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        let p = probe(mid)?;
        match p.regime {
            Regime::Bounded => lo = mid,
            Regime::Vanishing => hi = mid,
        }
        trace.push(p);
    }
    Ok(Estimate { value: 0.5 * (lo + hi), bracket: (lo, hi), trace, decay_ok: true })
}

/// Estimates `RT = sup{λ : inf_π Σ Ψ(e)^λ > 0}` from `ln Ψ` scores.
///
/// Each `λ` is classified by regressing `ln cutset_min` over the last
/// `cfg.window` depth doublings. If the deepest generation still has
/// `Ψ ≥ 1/2` the decay assumption fails and `+∞` is reported instead.
pub fn rt_estimate<S: CutsetShape + ?Sized>(
    shape: &S,
    log_big_psi: LogScores<'_>,
    cfg: &BisectionConfig,
) -> Result<Estimate, RuinError> {
    let depths = window_depths(shape.depth_cap(), cfg)?;
    if shape.max_frontier_score(log_big_psi)? >= ln(0.5) {
        return Ok(Estimate {
            value: f64::INFINITY,
            bracket: (cfg.lambda_hi, f64::INFINITY),
            trace: Vec::new(),
            decay_ok: false,
        });
    }
    bisect(cfg, |lambda| classify(shape, log_big_psi, lambda, lambda, &depths, cfg))
}

/// `-ln g` per generation: the base score of the branching-ruin number.
pub(crate) fn log_generation_scores(depth_cap: u32) -> Vec<f64> {
    (0..=depth_cap).map(|g| if g == 0 { 0.0 } else { -ln(f64::from(g)) }).collect()
}

/// Estimates `br_r = sup{λ : inf_π Σ |e|^{-λ} > 0}`.
pub fn brr_estimate<S: CutsetShape + ?Sized>(shape: &S, cfg: &BisectionConfig) -> Result<Estimate, RuinError> {
    let depths = window_depths(shape.depth_cap(), cfg)?;
    let base = log_generation_scores(shape.depth_cap());
    let base = LogScores::PerGeneration(&base);
    bisect(cfg, |lambda| classify(shape, base, lambda, lambda, &depths, cfg))
}

/// Estimates `br = sup{λ : inf_π Σ λ^{-|e|} > 0}`.
pub fn branching_number_estimate<S: CutsetShape + ?Sized>(
    shape: &S,
    cfg: &BisectionConfig,
) -> Result<Estimate, RuinError> {
    let depths = window_depths(shape.depth_cap(), cfg)?;
    let base: Vec<f64> = (0..=shape.depth_cap()).map(|g| -f64::from(g)).collect();
    let base = LogScores::PerGeneration(&base);
    bisect(cfg, |lambda| classify(shape, base, ln(lambda), lambda, &depths, cfg))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CriticalVerdict {
    RecurrentCriterionMet,
    TransientCriterionMet,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriticalReport {
    pub verdict: CriticalVerdict,
    /// Classification of `inf_π Σ |e|^{-δ_c}`.
    pub recurrent_probe: Probe,
    /// Classification of `inf_π Σ 1/(|e|^{δ_c} f(|e|))`.
    pub transient_probe: Probe,
    /// Fitted decay exponent of the dyadic blocks of `Σ 1/(n f(n))`.
    pub series_exponent: f64,
    pub series_converges: bool,
}

/// Exponent above which the dyadic-block decay counts as summable.
const SERIES_EXPONENT: f64 = 1.25;

/// Decides whether `Σ_n 1/(n f(n))` converges from its first `depth_cap`
/// terms: dyadic block sums `B_j` are fitted as `B_j ≈ C j^{-p}` over the
/// upper half of the blocks and the series is declared convergent when
/// `p > 1.25`. Returns `(converges, p)`.
pub fn series_converges(f: impl Fn(u32) -> f64, depth_cap: u32) -> Result<(bool, f64), RuinError> {
    let top = (depth_cap + 1).ilog2().saturating_sub(1);
    if top < 4 {
        return Err(RuinError::TooShallow { depth_cap, required: 31 });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in 1..=top {
        let mut block = 0.0;
        for n in (1u32 << j)..(1u32 << (j + 1)) {
            let fn_ = f(n);
            if !(fn_.is_finite() && fn_ > 0.0) {
                return Err(RuinError::InvalidScore(n as usize));
            }
            block += 1.0 / (f64::from(n) * fn_);
        }
        if 2 * j >= top {
            xs.push(ln(f64::from(j)));
            ys.push(ln(block));
        }
    }
    if ys.contains(&f64::NEG_INFINITY) {
        return Ok((true, f64::INFINITY));
    }
    let p = -slope_xy(&xs, &ys);
    Ok((p > SERIES_EXPONENT, p))
}

fn slope_xy(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Evaluates the two cutset criteria at the critical exponent `δ_c`.
pub fn critical_check<S: CutsetShape + ?Sized>(
    shape: &S,
    delta_c: f64,
    f: impl Fn(u32) -> f64,
    cfg: &BisectionConfig,
) -> Result<CriticalReport, RuinError> {
    if !(delta_c.is_finite() && delta_c > 0.0) {
        return Err(RuinError::InvalidBracket);
    }
    let cap = shape.depth_cap();
    let depths = window_depths(cap, cfg)?;
    let plain = log_generation_scores(cap);
    let recurrent_probe = classify(shape, LogScores::PerGeneration(&plain), delta_c, delta_c, &depths, cfg)?;

    let mut weighted = Vec::with_capacity(plain.len());
    weighted.push(0.0);
    for g in 1..=cap {
        let fg = f(g);
        if !(fg.is_finite() && fg > 0.0) {
            return Err(RuinError::InvalidScore(g as usize));
        }
        weighted.push(delta_c * plain[g as usize] - ln(fg));
    }
    let transient_probe = classify(shape, LogScores::PerGeneration(&weighted), 1.0, delta_c, &depths, cfg)?;
    let (series_converges, series_exponent) = series_converges(&f, cap)?;

    let verdict = if recurrent_probe.regime == Regime::Vanishing {
        CriticalVerdict::RecurrentCriterionMet
    } else if transient_probe.regime == Regime::Bounded && series_converges {
        CriticalVerdict::TransientCriterionMet
    } else {
        CriticalVerdict::Inconclusive
    };
    Ok(CriticalReport { verdict, recurrent_probe, transient_probe, series_exponent, series_converges })
}
