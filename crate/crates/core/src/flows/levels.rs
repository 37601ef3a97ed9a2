//! Level-uniform versions for spherically symmetric trees: every edge of a
//! generation carries the same conductance, capacity and throughput, so
//! the reductions run over generations in log space.

use alloc::vec;
use alloc::vec::Vec;

use super::Boundary;
use super::{c_lambda, FlowError};
use crate::numeric::{exp, ln, CompensatedSum};
use crate::ruin::LevelProfile;
use crate::tree::{SphericalTree, TreeError};

fn check_depth(tree: &SphericalTree, n: u32) -> Result<(), FlowError> {
    if n == 0 || n > tree.depth_cap() {
        return Err(TreeError::GenerationOutOfRange { requested: n, depth_cap: tree.depth_cap() }.into());
    }
    Ok(())
}

/// `C_eff^{(k)}` for `k = 1..=n`, with `log_conductance[g]` the log
/// conductance of each generation-`g` edge. Once the tree dies out the
/// sequence is 0.
pub fn effective_conductance_levels(
    tree: &SphericalTree,
    log_conductance: &[f64],
    n: u32,
    boundary: Boundary,
) -> Result<Vec<f64>, FlowError> {
    check_depth(tree, n)?;
    if log_conductance.len() <= n as usize {
        return Err(FlowError::Length { got: log_conductance.len(), need: n as usize + 1 });
    }
    if let Some(g) = (1..=n as usize).find(|&g| log_conductance[g].is_nan() || log_conductance[g] == f64::INFINITY) {
        return Err(FlowError::Domain(g));
    }
    boundary.check()?;
    let tail = match boundary {
        Boundary::Shorted => f64::NEG_INFINITY,
        Boundary::Tail(c) => -ln(c),
    };
    let mut series = CompensatedSum::default();
    let mut out = Vec::with_capacity(n as usize);
    for k in 1..=n {
        let size = tree.log_level_size(k);
        if size == f64::NEG_INFINITY {
            out.push(0.0);
            continue;
        }
        series.add(exp(-log_conductance[k as usize] - size));
        let r = series.value() + exp(tail - size);
        out.push(1.0 / r);
    }
    Ok(out)
}

/// Per-generation throughputs of a level-uniform flow, in log form.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelFlow {
    /// `ln θ_g` for each generation-`g` edge; slot 0 unused.
    pub log_theta: Vec<f64>,
    pub source: f64,
    pub depth: u32,
}

impl LevelFlow {
    pub fn theta(&self, g: u32) -> f64 {
        exp(self.log_theta[g as usize])
    }

    /// `Σ_g |E_g| θ_g² / c_g` with `log_conductance` per generation.
    pub fn energy(&self, tree: &SphericalTree, log_conductance: &[f64]) -> f64 {
        let mut sum = CompensatedSum::default();
        for g in 1..=self.depth {
            let t = self.log_theta[g as usize];
            if t == f64::NEG_INFINITY {
                continue;
            }
            sum.add(exp(tree.log_level_size(g) + 2.0 * t - log_conductance[g as usize]));
        }
        sum.value()
    }
}

/// Max flow for level-uniform log capacities: bottom-up
/// `ln F_g = min(ln cap_g, ln k_g + ln F_{g+1})`, then each edge's flow is
/// shared evenly among its `k_g` children.
pub fn max_flow_levels(tree: &SphericalTree, log_cap: &[f64], n: u32) -> Result<LevelFlow, FlowError> {
    check_depth(tree, n)?;
    if log_cap.len() <= n as usize {
        return Err(FlowError::Length { got: log_cap.len(), need: n as usize + 1 });
    }
    if let Some(g) = (1..=n as usize).find(|&g| log_cap[g].is_nan() || log_cap[g] == f64::INFINITY) {
        return Err(FlowError::Domain(g));
    }
    let n = n as usize;
    let mut f = vec![f64::NEG_INFINITY; n + 1];
    f[n] = log_cap[n];
    for g in (1..n).rev() {
        let k = tree.children_at(g as u32);
        f[g] = if k == 0 { log_cap[g] } else { log_cap[g].min(ln(f64::from(k)) + f[g + 1]) };
    }
    let mut log_theta = vec![f64::NEG_INFINITY; n + 1];
    log_theta[1] = f[1];
    for g in 2..=n {
        let k = tree.children_at(g as u32 - 1);
        if k == 0 {
            break;
        }
        log_theta[g] = log_theta[g - 1] - ln(f64::from(k));
    }
    let source = exp(ln(f64::from(tree.children_at(0))) + f[1]);
    Ok(LevelFlow { log_theta, source, depth: n as u32 })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelProptrans {
    pub flow: LevelFlow,
    /// `ln u_g` per generation.
    pub log_u: Vec<f64>,
    pub energy: f64,
    pub c_lambda: f64,
    pub energy_within_bound: bool,
    pub max_prefix_u: f64,
    pub prefix_within_bound: bool,
    pub zero_flow: bool,
}

/// Level-uniform version of [`super::proptrans_flow`].
pub fn proptrans_flow_levels(
    tree: &SphericalTree,
    profile: &LevelProfile,
    lambda: f64,
    n: u32,
) -> Result<LevelProptrans, FlowError> {
    let bound = c_lambda(lambda)?;
    check_depth(tree, n)?;
    if profile.len() <= n as usize {
        return Err(FlowError::Length { got: profile.len(), need: n as usize + 1 });
    }
    let n_us = n as usize;
    let mut log_u = vec![f64::NEG_INFINITY; n_us + 1];
    let mut log_cap = vec![f64::NEG_INFINITY; n_us + 1];
    let log_c: Vec<f64> = (0..=n_us).map(|g| profile.log_conductance(g)).collect();
    let mut prefix = CompensatedSum::default();
    let mut max_prefix = 0.0f64;
    for g in 1..=n_us {
        log_u[g] = super::log_u(profile, g, lambda, g == 1);
        log_cap[g] = log_u[g] + log_c[g];
        prefix.add(exp(log_u[g]));
        if g == n_us || tree.children_at(g as u32) == 0 {
            max_prefix = max_prefix.max(prefix.value());
            if g < n_us {
                break;
            }
        }
    }
    let flow = max_flow_levels(tree, &log_cap, n)?;
    let energy = flow.energy(tree, &log_c);
    Ok(LevelProptrans {
        zero_flow: exp(log_cap[1]) == 0.0,
        flow,
        log_u,
        energy,
        c_lambda: bound,
        energy_within_bound: energy <= bound,
        max_prefix_u: max_prefix,
        prefix_within_bound: max_prefix <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{effective_conductance, flow_energy, max_flow_from_capacities};
    use crate::ruin::{compute_level_profile, compute_profile, cutset_min_levels};
    use crate::weights::WeightScheme;

    #[test]
    fn level_conductance_matches_tree() {
        for (sph, scheme) in [
            (SphericalTree::zd_like(3, 12), WeightScheme::orrw(1.0).unwrap()),
            (SphericalTree::regular(2, 10), WeightScheme::Unit),
            (SphericalTree::from_profile(&[2, 1, 3, 0], 6).unwrap(), WeightScheme::orrw(0.5).unwrap()),
        ] {
            let n = sph.depth_cap();
            let t = sph.materialize(1 << 20).unwrap();
            let tp = compute_profile(&t, &scheme).unwrap();
            let lp = compute_level_profile(&scheme, n).unwrap();
            let c: Vec<f64> = (0..t.len()).map(|v| tp.conductance(v)).collect();
            let lc: Vec<f64> = (0..=n as usize).map(|g| lp.log_conductance(g)).collect();
            for b in [Boundary::Shorted, Boundary::Tail(0.7)] {
                let a = effective_conductance(&t, &c, n, b).unwrap();
                let l = effective_conductance_levels(&sph, &lc, n, b).unwrap();
                for (x, y) in a.iter().zip(&l) {
                    assert!((x - y).abs() <= 1e-10 * x.max(1e-300), "{x} {y}");
                }
            }
            let cap: Vec<f64> = (0..t.len()).map(|v| 1.0 / (1.0 + f64::from(t.generation(v)))).collect();
            let lcap: Vec<f64> = (0..=n).map(|g| -ln(1.0 + f64::from(g))).collect();
            let f = max_flow_from_capacities(&t, &cap, n).unwrap();
            let lf = max_flow_levels(&sph, &lcap, n).unwrap();
            assert!((f.source - lf.source).abs() <= 1e-12 * f.source.max(1e-300));
            let score: Vec<f64> = lcap.iter().map(|&x| exp(x)).collect();
            assert!((lf.source - cutset_min_levels(&sph, &score, n).unwrap()).abs() <= 1e-12);
            let e = flow_energy(&t, &f, &c).unwrap();
            assert!((e - lf.energy(&sph, &lc)).abs() <= 1e-10 * e.max(1e-300));
        }
    }

    #[test]
    fn binary_tree_unit_conductance() {
        let t = SphericalTree::regular(2, 20);
        let c = effective_conductance_levels(&t, &[0.0; 21], 20, Boundary::Tail(1.0)).unwrap();
        assert!(c.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zd_orrw_regimes() {
        let n = 1 << 12;
        for (delta, transient) in [(1.0, true), (8.0, false)] {
            let t = SphericalTree::zd_like(4, n);
            let p = compute_level_profile(&WeightScheme::orrw(delta).unwrap(), n).unwrap();
            let c = effective_conductance_levels(&t, p.log_conductance_all(), n, Boundary::Shorted).unwrap();
            assert!(c.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
            let last = c[n as usize - 1];
            if transient {
                assert!(last > 0.05 && c[n as usize / 2 - 1] / last < 1.5, "{last}");
            } else {
                assert!(last < 1e-3, "{last}");
            }
        }
    }

    #[test]
    fn proptrans_zd4() {
        let t = SphericalTree::zd_like(4, 1 << 11);
        let p = compute_level_profile(&WeightScheme::orrw(1.0).unwrap(), 1 << 11).unwrap();
        let mut sources = Vec::new();
        for n in [1 << 8, 1 << 9, 1 << 10, 1 << 11] {
            let r = proptrans_flow_levels(&t, &p, 1.5, n).unwrap();
            assert!(r.energy_within_bound && r.prefix_within_bound, "{} {}", r.energy, r.max_prefix_u);
            assert!(!r.zero_flow);
            sources.push(r.flow.source);
        }
        assert!(sources.iter().all(|&s| s > 0.5 * sources[0]), "{sources:?}");
    }

    #[test]
    fn proptrans_path_source_vanishes() {
        let t = SphericalTree::path(1 << 12);
        let p = compute_level_profile(&WeightScheme::Unit, 1 << 12).unwrap();
        let s: Vec<f64> = [1u32 << 6, 1 << 9, 1 << 12]
            .iter()
            .map(|&n| proptrans_flow_levels(&t, &p, 2.0, n).unwrap().flow.source)
            .collect();
        assert!(s[1] < s[0] && s[2] < s[1] && s[2] < 1e-3, "{s:?}");
    }
}
