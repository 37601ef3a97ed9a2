//! The δ-sweep: for each reinforcement value, the RT estimate, the walk
//! escape frequency, ψ-percolation survival and the effective-conductance
//! trace, each cell seeded from `derive_seed(master, index)`.

use std::io::Write;

use branchruin_core::counter::derive_seed;
use branchruin_core::flows::Boundary;
use branchruin_core::ruin::BisectionConfig;
use branchruin_core::walker::Driver;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, PercolationMode};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::VERSION;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSweepParams {
    pub deltas: Vec<f64>,
    pub rt_depth: u32,
    pub tol: f64,
    pub walk_depth: u32,
    pub walk_budget: u64,
    pub walk_replicas: u64,
    pub rubin: bool,
    pub percolation_depth: u32,
    pub percolation_trials: u64,
    pub conductance_depths: Vec<u32>,
}

impl Default for PhaseSweepParams {
    fn default() -> Self {
        Self {
            deltas: Vec::new(),
            rt_depth: 1 << 12,
            tol: 0.02,
            walk_depth: 200,
            walk_budget: 1_000_000,
            walk_replicas: 200,
            rubin: false,
            percolation_depth: 1 << 12,
            percolation_trials: 400,
            conductance_depths: vec![1 << 8, 1 << 9, 1 << 10, 1 << 11, 1 << 12],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub delta: f64,
    pub seed: u64,
    pub rt: Option<f64>,
    pub rt_decay_ok: Option<bool>,
    pub escape_frequency: Option<f64>,
    pub escape_sigma: Option<f64>,
    pub percolation_survival: Option<f64>,
    pub conductance: Vec<(u32, f64)>,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub cells: Vec<SweepCell>,
}

/// Runs every grid cell; a failing measurement is recorded in the cell's
/// `errors` and the sweep continues.
pub fn phase_sweep(cfg: &ExperimentConfig) -> Result<SweepReport, CliError> {
    let p = &cfg.sweep;
    if p.deltas.is_empty() {
        return Err(CliError::Usage("the delta grid is empty".into()));
    }
    if let Some(d) = p.deltas.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(CliError::Usage(format!("delta {d} must be positive")));
    }
    let deepest =
        p.conductance_depths.iter().copied().chain([p.rt_depth, p.walk_depth, p.percolation_depth]).max().unwrap_or(1);
    let loaded = cfg.tree.load(deepest, cfg.seed)?;
    let file_scheme = loaded.file_scheme();
    let bisection = BisectionConfig { tol: p.tol, ..BisectionConfig::default() };
    let driver = if p.rubin { Driver::Rubin } else { Driver::Direct };
    let walk_tree = analysis::walk_tree(&loaded, p.walk_depth);

    let cells = p
        .deltas
        .par_iter()
        .enumerate()
        .map(|(index, &delta)| {
            let seed = derive_seed(cfg.seed, index as u64);
            let mut cell = SweepCell {
                index,
                delta,
                seed,
                rt: None,
                rt_decay_ok: None,
                escape_frequency: None,
                escape_sigma: None,
                percolation_survival: None,
                conductance: Vec::new(),
                errors: Vec::new(),
            };
            let scheme = match cfg.scheme.with_delta(delta).resolve(file_scheme.clone()) {
                Ok(s) => s,
                Err(e) => {
                    cell.errors.push(format!("scheme: {e}"));
                    return cell;
                }
            };
            let rt_tree = truncated(&loaded, p.rt_depth);
            match rt_tree.and_then(|t| analysis::rt(&t, &scheme, &bisection)) {
                Ok(e) => {
                    cell.rt = Some(e.value);
                    cell.rt_decay_ok = Some(e.decay_ok);
                }
                Err(e) => cell.errors.push(format!("rt: {e}")),
            }
            let escape = walk_tree.as_ref().map_err(|e| CliError::Diagnostic(e.to_string())).and_then(|t| {
                analysis::escape_on(
                    t,
                    &scheme,
                    driver,
                    p.walk_depth,
                    p.walk_budget,
                    p.walk_replicas,
                    derive_seed(seed, 1),
                )
            });
            match escape {
                Ok(r) => {
                    cell.escape_sigma = Some(r.sigma());
                    cell.escape_frequency = Some(r.frequency);
                }
                Err(e) => cell.errors.push(format!("escape: {e}")),
            }
            match analysis::percolation(
                &loaded,
                &scheme,
                PercolationMode::Psi,
                delta,
                p.percolation_trials,
                p.percolation_depth,
                derive_seed(seed, 2),
            ) {
                Ok(r) => cell.percolation_survival = Some(r.frequency),
                Err(e) => cell.errors.push(format!("percolation: {e}")),
            }
            if !p.conductance_depths.is_empty() {
                match analysis::conductance(&loaded, &scheme, &p.conductance_depths, Boundary::Shorted) {
                    Ok(c) => cell.conductance = c,
                    Err(e) => cell.errors.push(format!("conductance: {e}")),
                }
            }
            cell
        })
        .collect();
    Ok(SweepReport { version: VERSION.into(), config: cfg.clone(), cells })
}

fn truncated(loaded: &crate::source::Loaded, depth: u32) -> Result<crate::source::Loaded, CliError> {
    use crate::source::Loaded;
    Ok(match loaded {
        Loaded::Spherical(s) => Loaded::Spherical(s.truncate(depth)),
        Loaded::Explicit(f) => {
            let mut f = f.clone();
            f.tree = f.tree.truncate(depth);
            Loaded::Explicit(f)
        }
        Loaded::Skeleton(s) if s.depth_cap() == depth => Loaded::Skeleton(s.clone()),
        Loaded::Skeleton(_) => return Err(CliError::Usage("skeleton trees are analysed at their own depth".into())),
    })
}

impl SweepReport {
    pub fn to_json(&self) -> Result<String, CliError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per cell; the conductance column holds the deepest value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "index",
            "delta",
            "seed",
            "rt",
            "rt_decay_ok",
            "escape_frequency",
            "escape_sigma",
            "percolation_survival",
            "conductance_depth",
            "conductance",
            "errors",
        ])?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for c in &self.cells {
            let last = c.conductance.last();
            w.write_record([
                c.index.to_string(),
                c.delta.to_string(),
                c.seed.to_string(),
                opt(c.rt),
                c.rt_decay_ok.map(|b| b.to_string()).unwrap_or_default(),
                opt(c.escape_frequency),
                opt(c.escape_sigma),
                opt(c.percolation_survival),
                last.map(|l| l.0.to_string()).unwrap_or_default(),
                last.map(|l| l.1.to_string()).unwrap_or_default(),
                c.errors.join("; "),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
