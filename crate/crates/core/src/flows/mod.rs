//! Electrical network quantities on trees: effective conductance, max
//! flows from capacities, flow energy and the `C_λ` bound.

use alloc::vec;
use alloc::vec::Vec;

use crate::numeric::{exp, ln, CompensatedSum};
use crate::ruin::{min_cut_values, RuinError, RuinProfile};
use crate::tree::{Tree, TreeError, ROOT};

mod levels;

pub use levels::{effective_conductance_levels, max_flow_levels, proptrans_flow_levels, LevelFlow, LevelProptrans};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("{0}")]
    Tree(#[from] TreeError),
    #[error("{0}")]
    Ruin(#[from] RuinError),
    #[error("value at slot {0} must be finite and nonnegative")]
    Domain(usize),
    #[error("array has {got} entries, need {need}")]
    Length { got: usize, need: usize },
    #[error("lambda must exceed 1")]
    LambdaTooSmall,
    #[error("f must take values in [0, 1] with f(0) = 1")]
    BadSequence,
}

/// How the level-`k` boundary connects to infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Boundary {
    /// All boundary vertices are joined to infinity by a perfect conductor.
    Shorted,
    /// Each boundary vertex reaches infinity through this conductance,
    /// e.g. the known conductance of the subtree that was cut off.
    Tail(f64),
}

impl Boundary {
    fn resistance(&self) -> f64 {
        match *self {
            Self::Shorted => 0.0,
            Self::Tail(c) => 1.0 / c,
        }
    }

    fn check(&self) -> Result<(), FlowError> {
        match *self {
            Self::Tail(c) if c.is_nan() || c < 0.0 => Err(FlowError::Domain(0)),
            _ => Ok(()),
        }
    }
}

fn check_values(values: &[f64], slots: impl Iterator<Item = usize>) -> Result<(), FlowError> {
    for i in slots {
        let x = values[i];
        if x.is_nan() || x < 0.0 {
            return Err(FlowError::Domain(i));
        }
    }
    Ok(())
}

fn check_len(values: &[f64], need: usize) -> Result<(), FlowError> {
    if values.len() < need {
        return Err(FlowError::Length { got: values.len(), need });
    }
    Ok(())
}

/// `C_eff^{(k)}` from the root to the level-`k` boundary for `k = 1..=n`,
/// by series/parallel reduction. `conductance` is indexed by edge id; a
/// zero conductance is an open circuit. Dead-end leaves above `k` carry
/// no current.
pub fn effective_conductance(
    tree: &Tree,
    conductance: &[f64],
    n: u32,
    boundary: Boundary,
) -> Result<Vec<f64>, FlowError> {
    tree.check_generation(n)?;
    check_len(conductance, tree.len())?;
    check_values(conductance, tree.edges())?;
    boundary.check()?;
    let mut resistance = vec![0.0f64; tree.len()];
    let mut out = Vec::with_capacity(n as usize);
    for k in 1..=n {
        let order = tree.prefix_by_level(k);
        for &v in order.iter().rev() {
            let v = v as usize;
            resistance[v] = if tree.generation(v) == k {
                boundary.resistance()
            } else if tree.is_leaf(v) {
                f64::INFINITY
            } else if let [c] = tree.child_slice(v) {
                let c = *c as usize;
                1.0 / conductance[c] + resistance[c]
            } else {
                let mut g = 0.0;
                for &c in tree.child_slice(v) {
                    let c = c as usize;
                    g += 1.0 / (1.0 / conductance[c] + resistance[c]);
                }
                1.0 / g
            };
        }
        out.push(1.0 / resistance[ROOT]);
    }
    Ok(out)
}

/// `(1/C_Q) · C_eff / (1 + C_eff)`, a lower bound on the escape
/// probability.
pub fn escape_lower_bound(c_eff: f64, c_q: f64) -> f64 {
    let ratio = if c_eff.is_infinite() { 1.0 } else { c_eff / (1.0 + c_eff) };
    ratio / c_q
}

/// Nonnegative edge throughputs, indexed by edge id.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Flow {
    pub theta: Vec<f64>,
    /// Total throughput of level-1 edges.
    pub source: f64,
    /// Generation of the sink level.
    pub depth: u32,
}

impl Flow {
    /// Largest `|θ_e − Σ_children θ_g| / θ_e` over internal edges above
    /// the sink level.
    pub fn conservation_error(&self, tree: &Tree) -> f64 {
        tree.prefix_by_level(self.depth.saturating_sub(1))
            .iter()
            .skip(1)
            .map(|&v| v as usize)
            .filter(|&v| !tree.is_leaf(v))
            .map(|v| {
                let out = crate::ruin::children_sum(tree, &self.theta, v);
                let t = self.theta[v];
                if t == 0.0 {
                    out.abs()
                } else {
                    (t - out).abs() / t
                }
            })
            .fold(0.0, f64::max)
    }
}

/// A flow with `θ_e ≤ cap(e)` and source strength equal to the minimum
/// cutset sum of `cap` within depth `n`.
///
/// Bottom-up `F(e) = min(cap(e), Σ_children F(g))`, then each edge's
/// throughput is split among its children in proportion to their `F`.
pub fn max_flow_from_capacities(tree: &Tree, cap: &[f64], n: u32) -> Result<Flow, FlowError> {
    tree.check_generation(n)?;
    check_len(cap, tree.len())?;
    let order = tree.prefix_by_level(n);
    check_values(cap, order[1..].iter().map(|&v| v as usize))?;
    if let Some(&v) = order[1..].iter().find(|&&v| cap[v as usize].is_infinite()) {
        return Err(FlowError::Domain(v as usize));
    }
    let f = min_cut_values(tree, cap, n);
    let mut theta = vec![0.0f64; tree.len()];
    for c in tree.children(ROOT) {
        theta[c] = f[c];
    }
    for &v in &order[1..] {
        let v = v as usize;
        if tree.generation(v) == n || tree.is_leaf(v) {
            continue;
        }
        let below = crate::ruin::children_sum(tree, &f, v);
        let t = theta[v];
        if t == below {
            for &c in tree.child_slice(v) {
                theta[c as usize] = f[c as usize];
            }
        } else if below > 0.0 {
            let r = t / below;
            for &c in tree.child_slice(v) {
                theta[c as usize] = f[c as usize] * r;
            }
        }
    }
    Ok(Flow { theta, source: f[0], depth: n })
}

/// `Σ_e θ_e² / c(e)` over edges within the flow's depth, with
/// compensated summation. Edges with `θ_e = 0` contribute nothing.
pub fn flow_energy(tree: &Tree, flow: &Flow, conductance: &[f64]) -> Result<f64, FlowError> {
    check_len(conductance, tree.len())?;
    check_len(&flow.theta, tree.len())?;
    let mut sum = CompensatedSum::default();
    for &v in &tree.prefix_by_level(flow.depth)[1..] {
        let v = v as usize;
        let t = flow.theta[v];
        if t != 0.0 {
            let c = conductance[v];
            if c.is_nan() || c < 0.0 {
                return Err(FlowError::Domain(v));
            }
            sum.add(t * t / c);
        }
    }
    Ok(sum.value())
}

/// `C_λ = (λ + 2) / (λ − 1)`.
pub fn c_lambda(lambda: f64) -> Result<f64, FlowError> {
    if lambda.is_nan() || lambda <= 1.0 {
        return Err(FlowError::LambdaTooSmall);
    }
    Ok((lambda + 2.0) / (lambda - 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropfuncCheck {
    pub sum: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Evaluates `Σ_{n≥0} f(n) Π_{i=1}^{n} (1 − f(i))^{λ−1}` over the given
/// prefix of `f` and compares it with `C_λ`.
pub fn propfunc_bound_check(f: &[f64], lambda: f64) -> Result<PropfuncCheck, FlowError> {
    let bound = c_lambda(lambda)?;
    if f.first() != Some(&1.0) || f.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(FlowError::BadSequence);
    }
    let mut sum = CompensatedSum::default();
    sum.add(f[0]);
    let mut log_prod = 0.0;
    for &x in &f[1..] {
        log_prod += (lambda - 1.0) * crate::numeric::ln_1p(-x);
        if log_prod == f64::NEG_INFINITY {
            break;
        }
        sum.add(x * exp(log_prod));
    }
    let sum = sum.value();
    Ok(PropfuncCheck { sum, bound, holds: sum <= bound })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProptransReport {
    /// `u_e` per slot (1 on level-1 edges).
    pub u: Vec<f64>,
    /// Capacities `u_e · c(e)`.
    pub capacity: Vec<f64>,
    pub energy: f64,
    pub c_lambda: f64,
    pub energy_within_bound: bool,
    /// Largest `Σ_{g≤e} u_g` over sink-level and dead-end edges.
    pub max_prefix_u: f64,
    pub prefix_within_bound: bool,
    /// Every level-1 capacity underflowed to zero.
    pub zero_flow: bool,
}

/// `u_e = (1 − ψ(e)) Ψ(e)^{λ−1}` in log form (`u_e = 1` when `|e| = 1`).
#[inline]
pub(crate) fn log_u(profile: &RuinProfile, slot: usize, lambda: f64, first_level: bool) -> f64 {
    if first_level {
        0.0
    } else {
        (lambda - 1.0) * profile.log_big_psi(slot) + profile.log_one_minus_psi(slot)
    }
}

/// The unit-flow candidate of the transience argument: capacities
/// `u_e · c(e)`, their max flow within depth `n`, its energy and the
/// prefix sums of `u`.
pub fn proptrans_flow(
    tree: &Tree,
    profile: &RuinProfile,
    lambda: f64,
    n: u32,
) -> Result<(Flow, ProptransReport), FlowError> {
    let bound = c_lambda(lambda)?;
    tree.check_generation(n)?;
    if profile.len() < tree.len() {
        return Err(FlowError::Length { got: profile.len(), need: tree.len() });
    }
    let mut u = vec![0.0f64; tree.len()];
    let mut capacity = vec![0.0f64; tree.len()];
    let mut conductance = vec![0.0f64; tree.len()];
    let mut prefix = vec![0.0f64; tree.len()];
    let mut max_prefix = 0.0f64;
    for &v in &tree.prefix_by_level(n)[1..] {
        let v = v as usize;
        let first = tree.generation(v) == 1;
        let lu = log_u(profile, v, lambda, first);
        u[v] = exp(lu);
        capacity[v] = exp(lu + profile.log_conductance(v));
        conductance[v] = profile.conductance(v);
        prefix[v] = prefix[tree.parent_raw(v)] + u[v];
        if tree.generation(v) == n || tree.is_leaf(v) {
            max_prefix = max_prefix.max(prefix[v]);
        }
    }
    let flow = max_flow_from_capacities(tree, &capacity, n)?;
    let energy = flow_energy(tree, &flow, &conductance)?;
    let zero_flow = tree.children(ROOT).all(|c| capacity[c] == 0.0);
    let report = ProptransReport {
        u,
        capacity,
        energy,
        c_lambda: bound,
        energy_within_bound: energy <= bound,
        max_prefix_u: max_prefix,
        prefix_within_bound: max_prefix <= bound,
        zero_flow,
    };
    Ok((flow, report))
}

/// `ln` of the effective-conductance entries, for callers that plot them.
pub fn log_sequence(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&x| ln(x)).collect()
}
