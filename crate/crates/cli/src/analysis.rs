//! Dispatches each computation to the representation of the loaded tree:
//! level recursions for spherically symmetric shapes, chain-compressed
//! recursions for skeletons, per-edge recursions otherwise.

use std::borrow::Cow;

use branchruin_core::counter::derive_seed;
use branchruin_core::flows::{
    effective_conductance, effective_conductance_levels, proptrans_flow, proptrans_flow_levels, Boundary,
};
use branchruin_core::percolation::{
    sample_ccp_to_depth, sample_independent_psi, sample_independent_psi_levels, sample_level_prob,
    sample_level_prob_levels, sample_level_prob_skeleton, LevelRule,
};
use branchruin_core::ruin::{
    branching_number_estimate, brr_estimate, compute_level_profile, compute_profile, critical_check, rt_estimate,
    BisectionConfig, CriticalReport, CutsetShape, Estimate, LogScores,
};
use branchruin_core::tree::{SphericalTree, Tree, DEFAULT_VERTEX_BUDGET};
use branchruin_core::walker::{ClockSource, Driver, EscapeReport, Outcome, StopRule, WalkError, Walker};
use branchruin_core::weights::WeightScheme;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::source::Loaded;

fn level_only(scheme: &WeightScheme) -> Result<(), CliError> {
    if scheme.is_level_uniform() {
        Ok(())
    } else {
        Err(CliError::Usage("per-edge weights need an explicit tree".into()))
    }
}

fn shape(loaded: &Loaded) -> &dyn CutsetShape {
    match loaded {
        Loaded::Explicit(f) => &f.tree,
        Loaded::Spherical(s) => s,
        Loaded::Skeleton(s) => s,
    }
}

pub fn rt(loaded: &Loaded, scheme: &WeightScheme, cfg: &BisectionConfig) -> Result<Estimate, CliError> {
    Ok(match loaded {
        Loaded::Explicit(f) => {
            let p = compute_profile(&f.tree, scheme)?;
            rt_estimate(&f.tree, LogScores::PerEdge(p.log_big_psi_all()), cfg)?
        }
        Loaded::Spherical(_) | Loaded::Skeleton(_) => {
            level_only(scheme)?;
            let p = compute_level_profile(scheme, loaded.depth_cap())?;
            rt_estimate(shape(loaded), LogScores::PerGeneration(p.log_big_psi_all()), cfg)?
        }
    })
}

pub fn brr(loaded: &Loaded, cfg: &BisectionConfig) -> Result<Estimate, CliError> {
    Ok(brr_estimate(shape(loaded), cfg)?)
}

pub fn br(loaded: &Loaded, cfg: &BisectionConfig) -> Result<Estimate, CliError> {
    Ok(branching_number_estimate(shape(loaded), cfg)?)
}

/// `f(n) = ln(n + 1)^p`.
pub fn log_power(p: f64) -> impl Fn(u32) -> f64 {
    move |n| libm_pow(f64::from(n + 1).ln(), p)
}

fn libm_pow(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else {
        x.powf(p)
    }
}

pub fn critical(
    loaded: &Loaded,
    delta_c: f64,
    f_power: f64,
    cfg: &BisectionConfig,
) -> Result<CriticalReport, CliError> {
    Ok(critical_check(shape(loaded), delta_c, log_power(f_power), cfg)?)
}

/// `C_eff^{(k)}` at the requested depths.
pub fn conductance(
    loaded: &Loaded,
    scheme: &WeightScheme,
    depths: &[u32],
    boundary: Boundary,
) -> Result<Vec<(u32, f64)>, CliError> {
    let n = depths.iter().copied().max().unwrap_or(0);
    let seq = match loaded {
        Loaded::Explicit(f) => {
            let p = compute_profile(&f.tree, scheme)?;
            let c: Vec<f64> = (0..f.tree.len()).map(|v| if v == 0 { 0.0 } else { p.conductance(v) }).collect();
            effective_conductance(&f.tree, &c, n, boundary)?
        }
        Loaded::Spherical(s) => {
            level_only(scheme)?;
            let p = compute_level_profile(scheme, n)?;
            effective_conductance_levels(s, p.log_conductance_all(), n, boundary)?
        }
        Loaded::Skeleton(_) => return Err(CliError::Usage("conductance needs an explicit or symmetric tree".into())),
    };
    Ok(depths.iter().map(|&k| (k, seq[k as usize - 1])).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProptransSummary {
    pub lambda: f64,
    pub depth: u32,
    pub source: f64,
    pub energy: f64,
    /// Energy of the flow rescaled to unit strength.
    pub unit_energy: f64,
    pub c_lambda: f64,
    pub energy_within_bound: bool,
    pub max_prefix_u: f64,
    pub prefix_within_bound: bool,
    pub zero_flow: bool,
    pub conservation_error: f64,
    /// Set when `λ` is not below the RT estimate given by the caller.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn proptrans(loaded: &Loaded, scheme: &WeightScheme, lambda: f64, n: u32) -> Result<ProptransSummary, CliError> {
    let unit = |energy: f64, source: f64| if source > 0.0 { energy / (source * source) } else { f64::INFINITY };
    Ok(match loaded {
        Loaded::Explicit(f) => {
            let p = compute_profile(&f.tree, scheme)?;
            let (flow, r) = proptrans_flow(&f.tree, &p, lambda, n)?;
            ProptransSummary {
                lambda,
                depth: n,
                source: flow.source,
                energy: r.energy,
                unit_energy: unit(r.energy, flow.source),
                c_lambda: r.c_lambda,
                energy_within_bound: r.energy_within_bound,
                max_prefix_u: r.max_prefix_u,
                prefix_within_bound: r.prefix_within_bound,
                zero_flow: r.zero_flow,
                conservation_error: flow.conservation_error(&f.tree),
                warning: None,
            }
        }
        Loaded::Spherical(s) => {
            level_only(scheme)?;
            let p = compute_level_profile(scheme, n)?;
            let r = proptrans_flow_levels(s, &p, lambda, n)?;
            ProptransSummary {
                lambda,
                depth: n,
                source: r.flow.source,
                energy: r.energy,
                unit_energy: unit(r.energy, r.flow.source),
                c_lambda: r.c_lambda,
                energy_within_bound: r.energy_within_bound,
                max_prefix_u: r.max_prefix_u,
                prefix_within_bound: r.prefix_within_bound,
                zero_flow: r.zero_flow,
                conservation_error: 0.0,
                warning: None,
            }
        }
        Loaded::Skeleton(_) => return Err(CliError::Usage("flows need an explicit or symmetric tree".into())),
    })
}

/// Walk escape experiment with replica `i` seeded by `derive_seed(seed, i)`;
/// replicas are spread over the rayon pool in fixed chunks so the result
/// does not depend on the thread count.
pub fn escape(
    loaded: &Loaded,
    scheme: &WeightScheme,
    driver: Driver,
    depth: u32,
    budget: u64,
    replicas: u64,
    seed: u64,
) -> Result<EscapeReport, CliError> {
    escape_on(&*walk_tree(loaded, depth)?, scheme, driver, depth, budget, replicas, seed)
}

/// The arena tree a walk to `depth` runs on.
pub fn walk_tree(loaded: &Loaded, depth: u32) -> Result<Cow<'_, Tree>, CliError> {
    Ok(match loaded {
        Loaded::Explicit(f) => Cow::Borrowed(&f.tree),
        Loaded::Spherical(s) => Cow::Owned(s.truncate(depth).materialize(DEFAULT_VERTEX_BUDGET)?),
        Loaded::Skeleton(s) => Cow::Owned(s.expand(DEFAULT_VERTEX_BUDGET)?),
    })
}

/// [`escape`] on an already materialised tree.
pub fn escape_on(
    tree: &Tree,
    scheme: &WeightScheme,
    driver: Driver,
    depth: u32,
    budget: u64,
    replicas: u64,
    seed: u64,
) -> Result<EscapeReport, CliError> {
    walks(tree, scheme, driver, &StopRule::budget(budget).with_return().with_depth(depth), replicas, seed)
}

/// Independent walks from the root under `stop`.
pub fn walks(
    tree: &Tree,
    scheme: &WeightScheme,
    driver: Driver,
    stop: &StopRule,
    replicas: u64,
    seed: u64,
) -> Result<EscapeReport, CliError> {
    let seeds: Vec<u64> = (0..replicas).map(|i| derive_seed(seed, i)).collect();
    let parts: Vec<Vec<Outcome>> = seeds
        .par_chunks(8)
        .map(|chunk| {
            let mut walker = Walker::new(tree, scheme)?;
            chunk
                .iter()
                .map(|&s| {
                    walker.reset();
                    walker.run(driver, stop, s)
                })
                .collect::<Result<Vec<_>, WalkError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(EscapeReport::from_outcomes(seeds, parts.into_iter().flatten().collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PercolationMode {
    Ccp,
    Psi,
    Level,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercolationSummary {
    pub mode: PercolationMode,
    pub depth: u32,
    pub trials: u64,
    pub survived: u64,
    pub frequency: f64,
    pub sigma: f64,
    pub mean_max_depth: f64,
    pub seed: u64,
}

/// `trials` independent percolation samples, trial `i` seeded by
/// `derive_seed(seed, i)`. `delta` is used by the level rule only.
pub fn percolation(
    loaded: &Loaded,
    scheme: &WeightScheme,
    mode: PercolationMode,
    delta: f64,
    trials: u64,
    depth: u32,
    seed: u64,
) -> Result<PercolationSummary, CliError> {
    let depth = depth.min(loaded.depth_cap());
    let runs: Vec<(bool, u32)> = match (mode, loaded) {
        (PercolationMode::Psi, Loaded::Spherical(s)) => {
            level_only(scheme)?;
            let s: SphericalTree = s.truncate(depth);
            let p = compute_level_profile(scheme, depth)?;
            par_trials(trials, seed, |rng| {
                let r = sample_independent_psi_levels(&s, &p, rng)?;
                Ok((r.survived, r.max_depth))
            })?
        }
        (PercolationMode::Level, Loaded::Spherical(s)) => {
            let s = s.truncate(depth);
            let rule = LevelRule::new(delta)?;
            par_trials(trials, seed, |rng| {
                let r = sample_level_prob_levels(&s, &rule, rng)?;
                Ok((r.survived, r.max_depth))
            })?
        }
        (PercolationMode::Level, Loaded::Skeleton(s)) => {
            let rule = LevelRule::new(delta)?;
            par_trials(trials, seed, |rng| {
                let r = sample_level_prob_skeleton(s, &rule, rng)?;
                Ok((r.survived, r.max_depth))
            })?
        }
        _ => {
            let tree = match loaded {
                Loaded::Explicit(f) => f.tree.truncate(depth),
                Loaded::Spherical(s) => s.truncate(depth).materialize(DEFAULT_VERTEX_BUDGET)?,
                Loaded::Skeleton(s) => s.expand(DEFAULT_VERTEX_BUDGET)?.truncate(depth),
            };
            match mode {
                PercolationMode::Ccp => (0..trials)
                    .into_par_iter()
                    .map(|i| {
                        let r = sample_ccp_to_depth(&tree, scheme, &ClockSource::new(derive_seed(seed, i)), depth)?;
                        Ok((r.survived, r.max_depth))
                    })
                    .collect::<Result<_, CliError>>()?,
                PercolationMode::Psi => {
                    let p = compute_profile(&tree, scheme)?;
                    par_trials(trials, seed, |rng| {
                        let r = sample_independent_psi(&tree, &p, rng)?;
                        Ok((r.survived, r.max_depth))
                    })?
                }
                PercolationMode::Level => {
                    let rule = LevelRule::new(delta)?;
                    par_trials(trials, seed, |rng| {
                        let r = sample_level_prob(&tree, &rule, rng)?;
                        Ok((r.survived, r.max_depth))
                    })?
                }
            }
        }
    };
    let survived = runs.iter().filter(|r| r.0).count() as u64;
    let frequency = survived as f64 / trials.max(1) as f64;
    Ok(PercolationSummary {
        mode,
        depth,
        trials,
        survived,
        frequency,
        sigma: (frequency * (1.0 - frequency) / trials.max(1) as f64).sqrt(),
        mean_max_depth: runs.iter().map(|r| f64::from(r.1)).sum::<f64>() / trials.max(1) as f64,
        seed,
    })
}

fn par_trials<T: Send>(
    trials: u64,
    seed: u64,
    f: impl Fn(&mut ChaCha8Rng) -> Result<T, CliError> + Sync,
) -> Result<Vec<T>, CliError> {
    (0..trials).into_par_iter().map(|i| f(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, i)))).collect()
}
