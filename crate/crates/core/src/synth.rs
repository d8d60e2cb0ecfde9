//! Synthetic i.i.d. Gaussian gradient control.
//!
//! Draws uncorrelated Gaussian fields, drives them through the cascade engine
//! across the five topologies, and fits mean total cascade size against N.
//! The resulting exponent sits at the random-diffusion baseline and its
//! spread across topologies is the topology-invariance check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{run_cascade, CascadeConfig, CascadeRecord, Phase};
use crate::error::{Error, Result};
use crate::fss::{ScalingFit, StatKind};
use crate::graph::{DiffusionGraph, GraphParams, Topology};
use crate::seeding::derive_seed;
use crate::Real;

/// Default scale list: the training N values for matched pool sizes.
pub const DEFAULT_SCALES: [usize; 8] = [81, 121, 201, 281, 401, 481, 801, 2001];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub sigma: f64,
    /// Trials per (topology, N, seed); mirrors the training snapshot count.
    pub n_trials: usize,
    pub topologies: Vec<Topology>,
    pub scales: Vec<usize>,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub graph_params: GraphParams,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sigma: 0.5,
            n_trials: 51,
            topologies: Topology::ALL.to_vec(),
            scales: DEFAULT_SCALES.to_vec(),
            seeds: (0..6).collect(),
            master_seed: 0,
            graph_params: GraphParams::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma <= 0.0 {
            return Err(Error::InvalidConfig("sigma must be > 0".into()));
        }
        if self.n_trials == 0 || self.topologies.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig(
                "synth campaign needs trials, topologies, and seeds".into(),
            ));
        }
        if self.scales.len() < 3 {
            return Err(Error::InvalidConfig(
                "synth campaign needs >= 3 scales".into(),
            ));
        }
        Ok(())
    }
}

/// One synthetic cascade with its topology tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthRecord {
    pub topology: Topology,
    pub record: CascadeRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSummary {
    pub per_topology: Vec<(Topology, ScalingFit)>,
    /// Mean of per-topology exponents.
    pub d_synth: f64,
    /// Coefficient of variation (population std / mean) across topologies.
    pub cv: f64,
}

fn cv_of(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Runs the full synthetic campaign: for every (topology, N, seed) draw
/// `n_trials` Gaussian fields, cascade each, and record the total size.
pub fn run_synth_campaign<F: Real>(
    config: &SynthConfig,
    cascade: &CascadeConfig,
) -> Result<(Vec<SynthRecord>, SynthSummary)> {
    config.validate()?;
    cascade.validate()?;

    let mut cells: Vec<(Topology, usize, u64)> = Vec::new();
    for &topo in &config.topologies {
        for &n in &config.scales {
            for &seed in &config.seeds {
                cells.push((topo, n, seed));
            }
        }
    }

    let results: Vec<Result<Vec<SynthRecord>>> = cells
        .par_iter()
        .map(|&(topo, n, seed)| {
            let gen_seed = derive_seed(
                config.master_seed,
                "synth-graph",
                &[topo as u64, n as u64, seed],
            );
            let graph = DiffusionGraph::generate(topo, n, &config.graph_params, gen_seed)?;
            let mut records = Vec::with_capacity(config.n_trials);
            for trial in 0..config.n_trials {
                let draw_seed = derive_seed(
                    config.master_seed,
                    "synth-field",
                    &[topo as u64, n as u64, seed, trial as u64],
                );
                let mut rng = ChaCha8Rng::seed_from_u64(draw_seed);
                let field: Vec<F> = (0..n)
                    .map(|_| {
                        let v: f64 = rng.sample(rand_distr::StandardNormal);
                        F::from_config(v * config.sigma)
                    })
                    .collect();
                let (_, mut record) = run_cascade(&field, &graph, cascade)?;
                record.epoch = trial as u32;
                record.seed = seed;
                record.phase = Phase::Unknown;
                records.push(SynthRecord {
                    topology: topo,
                    record,
                });
            }
            Ok(records)
        })
        .collect();

    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    let summary = summarize(&records, &config.topologies)?;
    Ok((records, summary))
}

/// Per-topology mean-total fits plus the cross-topology spread.
pub fn summarize(records: &[SynthRecord], topologies: &[Topology]) -> Result<SynthSummary> {
    let mut per_topology = Vec::new();
    for &topo in topologies {
        let recs: Vec<CascadeRecord> = records
            .iter()
            .filter(|r| r.topology == topo)
            .map(|r| r.record)
            .collect();
        let fit = crate::fss::fit_scaling(&recs, StatKind::MeanTotal)?;
        per_topology.push((topo, fit));
    }
    let exponents: Vec<f64> = per_topology.iter().map(|(_, f)| f.exponent).collect();
    let d_synth = exponents.iter().sum::<f64>() / exponents.len() as f64;
    let cv = if exponents.len() > 1 { cv_of(&exponents) } else { 0.0 };
    Ok(SynthSummary {
        per_topology,
        d_synth,
        cv,
    })
}

/// Exponent table across a parameter sweep, plus the CV of exponents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter: String,
    pub entries: Vec<(f64, SynthSummary)>,
    /// CV of the mean exponent across sweep values.
    pub cv: f64,
}

fn sweep(
    parameter: &str,
    values: &[f64],
    config: &SynthConfig,
    make: impl Fn(f64) -> CascadeConfig,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::EmptyInput("sweep values"));
    }
    let mut entries = Vec::with_capacity(values.len());
    for &v in values {
        let cascade = make(v);
        let (_, summary) = run_synth_campaign::<f64>(config, &cascade)?;
        entries.push((v, summary));
    }
    let exponents: Vec<f64> = entries.iter().map(|(_, s)| s.d_synth).collect();
    let cv = if exponents.len() > 1 { cv_of(&exponents) } else { 0.0 };
    Ok(SweepTable {
        parameter: parameter.to_string(),
        entries,
        cv,
    })
}

pub fn alpha_sweep(
    alphas: &[f64],
    config: &SynthConfig,
    base: &CascadeConfig,
) -> Result<SweepTable> {
    sweep("alpha", alphas, config, |alpha| CascadeConfig {
        alpha,
        ..*base
    })
}

pub fn quantile_sweep(
    quantiles: &[f64],
    config: &SynthConfig,
    base: &CascadeConfig,
) -> Result<SweepTable> {
    sweep("quantile", quantiles, config, |quantile| CascadeConfig {
        quantile,
        ..*base
    })
}
