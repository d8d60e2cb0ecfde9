//! Campaign orchestration: populates the run store, drives the synthetic
//! control, and turns a populated store into figure datasets plus a single
//! summary with every headline number.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeRecord, Phase};
use crate::config::CampaignConfig;
use crate::error::{Error, Result};
use crate::fss::{
    bootstrap_d, ccdf, collapse_dispersion, fit_scaling, leave_one_out, time_resolved_d,
    BootstrapConfig, BootstrapResult, CcdfCurve, ScalingFit, StatKind,
};
use crate::graph::DiffusionGraph;
use crate::mlp::train_run;
use crate::store::{self, LoadedRun, RunMeta};
use crate::synth::{alpha_sweep, quantile_sweep, run_synth_campaign, SweepTable, SynthSummary};
use crate::Scalar;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub executed: usize,
    pub skipped: usize,
    pub quarantined: usize,
}

/// Runs (or resumes) the training campaign. Completed runs are skipped;
/// partial directories are quarantined and re-run.
pub fn cmd_train(config: &CampaignConfig) -> Result<TrainReport> {
    config.validate()?;
    let store = &config.output_dir;
    fs::create_dir_all(store.join("runs"))?;
    fs::write(store.join("config.txt"), config.dump())?;

    let mut report = TrainReport::default();
    let mut pending: Vec<(usize, usize)> = Vec::new();
    for &h in &config.hidden_sizes {
        for seed_index in 0..config.seeds_per_scale {
            let dir = store::run_dir(store, h, seed_index);
            if dir.exists() {
                if store::is_complete(&dir) {
                    report.skipped += 1;
                    continue;
                }
                store::quarantine(&dir)?;
                report.quarantined += 1;
            }
            pending.push((h, seed_index));
        }
    }

    let results: Vec<Result<()>> = pending
        .par_iter()
        .map(|&(h, seed_index)| run_one(config, h, seed_index))
        .collect();
    for r in results {
        r?;
    }
    report.executed = pending.len();
    Ok(report)
}

fn run_one(config: &CampaignConfig, h: usize, seed_index: usize) -> Result<()> {
    let n = 4 * h + 1;
    let gen_seed = config.graph_seed(h, seed_index);
    let graph = DiffusionGraph::generate(config.topology, n, &config.graph_params(), gen_seed)?;
    let run_cfg = config.run_config(h, seed_index);
    let output = train_run::<Scalar>(&run_cfg, &graph)?;
    let meta = RunMeta {
        schema_version: store::SCHEMA_VERSION,
        h,
        n_params: n,
        seed_index,
        run_seed: run_cfg.seed,
        init_scale: config.init_scale,
        activation: config.activation,
        eta: config.eta,
        epochs: config.epochs,
        snapshot_interval: config.snapshot_interval,
        alpha: config.alpha,
        quantile: config.quantile,
        max_steps: config.max_steps,
        topology: config.topology,
        gen_seed,
        probe_mode: config.probe_mode,
        grok_window: config.grok_window,
        trace_only: config.trace_only,
        grokking_epoch: output.trace.grokking_epoch,
        complete: true,
    };
    store::write_run(&store::run_dir(&config.output_dir, h, seed_index), &meta, &output)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthArtifacts {
    pub summary: SynthSummary,
    pub alpha_sweep: Option<SweepTable>,
    pub quantile_sweep: Option<SweepTable>,
}

/// Runs the synthetic control campaign; with `sweep`, also the alpha and
/// quantile robustness sweeps.
pub fn cmd_synth(config: &CampaignConfig, sweep: bool) -> Result<SynthArtifacts> {
    let synth_cfg = config.synth_config();
    let cascade = config.cascade();
    let dir = config.output_dir.join("synth");
    fs::create_dir_all(&dir)?;

    let (records, summary) = run_synth_campaign::<Scalar>(&synth_cfg, &cascade)?;
    store::write_synth_records(&dir.join("records.csv"), &records)?;

    let artifacts = SynthArtifacts {
        summary,
        alpha_sweep: if sweep {
            Some(alpha_sweep(&[0.1, 0.3, 0.5], &synth_cfg, &cascade)?)
        } else {
            None
        },
        quantile_sweep: if sweep {
            Some(quantile_sweep(&[0.80, 0.90, 0.95], &synth_cfg, &cascade)?)
        } else {
            None
        },
    };
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&artifacts)?,
    )?;
    Ok(artifacts)
}

pub fn load_synth_artifacts(store: &Path) -> Result<Option<SynthArtifacts>> {
    let path = store.join("synth").join("summary.json");
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    Ok(Some(serde_json::from_str(&text).map_err(|e| {
        Error::corrupt(&path, format!("bad synth summary: {e}"))
    })?))
}

/// Per-run Gini/grokking alignment: where the weight-concentration peak sits
/// relative to the grokking epoch, and how prominent it is over the
/// pre-grokking baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GiniAlignment {
    pub h: usize,
    pub seed_index: usize,
    pub grokking_epoch: usize,
    pub gini_peak_epoch: usize,
    /// (peak - baseline) / baseline with baseline = mean Gini before grokking.
    pub prominence: f64,
}

pub fn gini_alignment(run: &LoadedRun) -> Option<GiniAlignment> {
    let grok = run.meta.grokking_epoch?;
    let gini = &run.trace.gini;
    if gini.is_empty() {
        return None;
    }
    let (peak_epoch, peak) = gini
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(be, bv), (e, &v)| {
            if v > bv {
                (e, v)
            } else {
                (be, bv)
            }
        });
    let baseline_end = grok.max(1).min(gini.len());
    let baseline = gini[..baseline_end].iter().sum::<f64>() / baseline_end as f64;
    let prominence = if baseline > 0.0 {
        (peak - baseline) / baseline
    } else {
        0.0
    };
    Some(GiniAlignment {
        h: run.meta.h,
        seed_index: run.meta.seed_index,
        grokking_epoch: grok,
        gini_peak_epoch: peak_epoch,
        prominence,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coverage {
    pub n_runs: usize,
    pub n_grokked: usize,
    pub runs_per_scale: BTreeMap<usize, usize>,
    pub grokked_per_scale: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub coverage: Coverage,
    pub d_aggregate: ScalingFit,
    pub gamma: ScalingFit,
    pub d_pre: Option<BootstrapResult>,
    pub d_post: Option<BootstrapResult>,
    pub d_synth: Option<f64>,
    pub cv_topology: Option<f64>,
    pub loo: Vec<(usize, f64)>,
    pub loo_max_deviation: f64,
    pub collapse_dispersion_fitted: f64,
    pub collapse_dispersion_unscaled: f64,
    pub ccdf_monotone: bool,
    pub median_cascade_steps: f64,
    /// Analysis knobs without a single canonical choice, flagged in every output.
    pub time_window: usize,
    pub resample_unit: String,
}

/// Everything `analyze` computes, including the full per-epoch series.
pub struct Analysis {
    pub summary: AnalysisSummary,
    pub d_t: Vec<(usize, ScalingFit)>,
    pub ccdf_curves: Vec<(usize, CcdfCurve)>,
    pub gini_rows: Vec<GiniAlignment>,
    pub bootstrap_pre: Option<BootstrapResult>,
    pub bootstrap_post: Option<BootstrapResult>,
}

/// Loads every complete run, assigns phases, and emits all figure datasets
/// plus `analysis/summary.json`. Fails on an empty store; proceeds with a
/// coverage report when some scales are missing.
pub fn cmd_analyze(config: &CampaignConfig) -> Result<Analysis> {
    let store = &config.output_dir;
    let dirs = store::list_run_dirs(store)?;
    let mut runs = Vec::new();
    for dir in &dirs {
        if store::is_complete(dir) {
            runs.push(store::load_run(dir)?);
        }
    }
    if runs.is_empty() {
        return Err(Error::corrupt(store, "no complete runs to analyze"));
    }

    let mut coverage = Coverage {
        n_runs: runs.len(),
        n_grokked: 0,
        runs_per_scale: BTreeMap::new(),
        grokked_per_scale: BTreeMap::new(),
    };
    let mut records: Vec<CascadeRecord> = Vec::new();
    let mut gini_rows = Vec::new();
    for run in &runs {
        *coverage.runs_per_scale.entry(run.meta.n_params).or_default() += 1;
        if run.meta.grokking_epoch.is_some() {
            coverage.n_grokked += 1;
            *coverage
                .grokked_per_scale
                .entry(run.meta.n_params)
                .or_default() += 1;
        }
        if let Some(row) = gini_alignment(run) {
            gini_rows.push(row);
        }
        let grok = run.meta.grokking_epoch;
        for mut r in run.records.iter().copied() {
            r.phase = match grok {
                Some(g) if (r.epoch as usize) < g => Phase::Pre,
                Some(_) => Phase::Post,
                None => Phase::Unknown,
            };
            records.push(r);
        }
    }

    // a nested `gini/` store holds the large trace-only campaign for the
    // weight-concentration check; its runs feed the alignment table only,
    // never the scaling fits
    let gini_store = store.join("gini");
    if gini_store.join("runs").exists() {
        for dir in store::list_run_dirs(&gini_store)? {
            if store::is_complete(&dir) {
                if let Some(row) = gini_alignment(&store::load_run(&dir)?) {
                    gini_rows.push(row);
                }
            }
        }
    }

    let d_aggregate = fit_scaling(&records, StatKind::Max)?;
    let gamma = fit_scaling(&records, StatKind::Mean)?;

    let snapshot_epochs: Vec<usize> = (0..=config.epochs)
        .step_by(config.snapshot_interval.max(1))
        .collect();
    let d_t = time_resolved_d(&records, &snapshot_epochs, config.time_window);

    let boot_cfg = BootstrapConfig {
        n_resamples: config.bootstrap_resamples,
        rng_seed: config.bootstrap_seed,
        unit: config.resample_unit,
    };
    let bootstrap_pre = bootstrap_d(&records, Phase::Pre, &boot_cfg).ok();
    let bootstrap_post = bootstrap_d(&records, Phase::Post, &boot_cfg).ok();

    let loo = leave_one_out(&records, StatKind::Max)
        .map(|v| {
            v.into_iter()
                .map(|(n, fit)| (n, fit.exponent))
                .collect::<Vec<_>>()
        })
        .unwrap_or_default();
    let loo_max_deviation = loo
        .iter()
        .map(|(_, d)| (d - d_aggregate.exponent).abs())
        .fold(0.0, f64::max);

    let mut by_scale: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for r in &records {
        by_scale.entry(r.n_params).or_default().push(r.size);
    }
    let mut ccdf_curves = Vec::new();
    let mut ccdf_monotone = true;
    for (&n, sizes) in &by_scale {
        let curve = ccdf(sizes)?;
        ccdf_monotone &= curve.probabilities.windows(2).all(|w| w[0] >= w[1]);
        ccdf_curves.push((n, curve));
    }
    let collapse_dispersion_fitted = collapse_dispersion(&ccdf_curves, d_aggregate.exponent);
    let collapse_dispersion_unscaled = collapse_dispersion(&ccdf_curves, 0.0);

    let mut steps: Vec<f64> = records.iter().map(|r| r.steps as f64).collect();
    steps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_cascade_steps = crate::fss::percentile(&steps, 0.5);

    let synth = load_synth_artifacts(store)?;

    let summary = AnalysisSummary {
        coverage,
        d_aggregate,
        gamma,
        d_pre: bootstrap_pre.clone().map(strip_samples),
        d_post: bootstrap_post.clone().map(strip_samples),
        d_synth: synth.as_ref().map(|s| s.summary.d_synth),
        cv_topology: synth.as_ref().map(|s| s.summary.cv),
        loo,
        loo_max_deviation,
        collapse_dispersion_fitted,
        collapse_dispersion_unscaled,
        ccdf_monotone,
        median_cascade_steps,
        time_window: config.time_window,
        resample_unit: match config.resample_unit {
            crate::fss::ResampleUnit::Records => "records".into(),
            crate::fss::ResampleUnit::Seeds => "seeds".into(),
        },
    };

    let analysis = Analysis {
        summary,
        d_t,
        ccdf_curves,
        gini_rows,
        bootstrap_pre,
        bootstrap_post,
    };
    write_analysis_artifacts(store, &analysis)?;
    Ok(analysis)
}

fn strip_samples(mut b: BootstrapResult) -> BootstrapResult {
    b.samples = Vec::new();
    b
}

fn write_analysis_artifacts(store: &Path, analysis: &Analysis) -> Result<()> {
    let dir = store.join("analysis");
    fs::create_dir_all(&dir)?;
    let f = store::format_float;

    store::write_csv(
        &dir.join("d_t.csv"),
        "epoch,exponent,r_squared,std_error,n_scales",
        analysis.d_t.iter().map(|(t, fit)| {
            format!(
                "{t},{},{},{},{}",
                f(fit.exponent),
                f(fit.r_squared),
                f(fit.std_error),
                fit.points.len()
            )
        }),
    )?;

    let d = analysis.summary.d_aggregate.exponent;
    let mut ccdf_rows = Vec::new();
    for (n, curve) in &analysis.ccdf_curves {
        let rescaled = curve.rescaled_support(*n as f64, d);
        for ((s, p), r) in curve
            .support
            .iter()
            .zip(&curve.probabilities)
            .zip(&rescaled)
        {
            ccdf_rows.push(format!("{n},{s},{},{}", f(*p), f(*r)));
        }
    }
    store::write_csv(
        &dir.join("ccdf.csv"),
        "n_params,s,p_greater,s_rescaled",
        ccdf_rows,
    )?;

    for (name, boot) in [
        ("bootstrap_pre.csv", &analysis.bootstrap_pre),
        ("bootstrap_post.csv", &analysis.bootstrap_post),
    ] {
        if let Some(b) = boot {
            store::write_csv(
                &dir.join(name),
                "exponent",
                b.samples.iter().map(|s| f(*s)),
            )?;
        }
    }

    store::write_csv(
        &dir.join("loo.csv"),
        "excluded_n,exponent",
        analysis
            .summary
            .loo
            .iter()
            .map(|(n, e)| format!("{n},{}", f(*e))),
    )?;

    store::write_csv(
        &dir.join("gini_alignment.csv"),
        "h,seed_index,grokking_epoch,gini_peak_epoch,prominence",
        analysis.gini_rows.iter().map(|r| {
            format!(
                "{},{},{},{},{}",
                r.h,
                r.seed_index,
                r.grokking_epoch,
                r.gini_peak_epoch,
                f(r.prominence)
            )
        }),
    )?;

    let points_csv = |fit: &ScalingFit| -> Vec<String> {
        fit.points
            .iter()
            .map(|(n, y)| format!("{},{},{}", n, f(*y), fit.kind.tag()))
            .collect()
    };
    let mut fit_rows = points_csv(&analysis.summary.d_aggregate);
    fit_rows.extend(points_csv(&analysis.summary.gamma));
    store::write_csv(&dir.join("fss_points.csv"), "n_params,statistic,kind", fit_rows)?;

    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&analysis.summary)?,
    )?;
    Ok(())
}

pub fn load_summary(store: &Path) -> Result<AnalysisSummary> {
    let path = store.join("analysis").join("summary.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::corrupt(&path, format!("missing analysis summary: {e}")))?;
    serde_json::from_str(&text).map_err(|e| Error::corrupt(&path, format!("bad summary: {e}")))
}
