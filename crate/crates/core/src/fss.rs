//! Statistics over cascade records: log-log exponent fits, CCDF and data
//! collapse, time-resolved exponents, phase-split bootstrap, leave-one-out
//! robustness.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeRecord, Phase};
use crate::error::{Error, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    Max,
    Mean,
    MeanTotal,
}

impl StatKind {
    pub fn tag(self) -> &'static str {
        match self {
            StatKind::Max => "max",
            StatKind::Mean => "mean",
            StatKind::MeanTotal => "mean_total",
        }
    }
}

/// Ordinary least squares on (log10 x, log10 y).
#[derive(Debug, Clone, Copy)]
pub struct OlsLine<F> {
    pub slope: F,
    pub intercept: F,
    pub r_squared: F,
    pub std_error: F,
    /// Zero variance in y: slope 0 by convention, r_squared meaningless.
    pub degenerate: bool,
}

pub fn log_log_ols<F: Real>(points: &[(F, F)]) -> Result<OlsLine<F>> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs >= 3 points, got {}",
            points.len()
        )));
    }
    for &(x, y) in points {
        if !(x > F::zero() && y > F::zero()) {
            return Err(Error::InvalidConfig(format!(
                "power-law fit needs positive coordinates, got ({x}, {y})"
            )));
        }
    }
    let n = F::from_config(points.len() as f64);
    let logs: Vec<(F, F)> = points
        .iter()
        .map(|&(x, y)| (x.log10(), y.log10()))
        .collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<F>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<F>() / n;
    let mut sxx = F::zero();
    let mut syy = F::zero();
    let mut sxy = F::zero();
    for &(x, y) in &logs {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == F::zero() {
        return Err(Error::InvalidConfig(
            "power-law fit needs distinct x values".into(),
        ));
    }
    if syy == F::zero() {
        return Ok(OlsLine {
            slope: F::zero(),
            intercept: mean_y,
            r_squared: F::zero(),
            std_error: F::zero(),
            degenerate: true,
        });
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = (sxy * sxy) / (sxx * syy);
    let residual = (syy - slope * sxy).max(F::zero());
    let dof = F::from_config((points.len() - 2) as f64);
    let std_error = (residual / dof / sxx).sqrt();
    Ok(OlsLine {
        slope,
        intercept,
        r_squared,
        std_error,
        degenerate: false,
    })
}

/// A fitted scaling relation y ~ N^exponent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub std_error: f64,
    pub points: Vec<(f64, f64)>,
    pub kind: StatKind,
    pub degenerate: bool,
}

pub fn fit_power_law(points: &[(f64, f64)], kind: StatKind) -> Result<ScalingFit> {
    {
        let mut xs: Vec<u64> = points.iter().map(|p| p.0.to_bits()).collect();
        xs.sort_unstable();
        xs.dedup();
        if xs.len() != points.len() {
            return Err(Error::InvalidConfig(
                "power-law fit needs distinct N values".into(),
            ));
        }
    }
    let line = log_log_ols(points)?;
    Ok(ScalingFit {
        exponent: line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        std_error: line.std_error,
        points: points.to_vec(),
        kind,
        degenerate: line.degenerate,
    })
}

/// Per-scale statistic over records: max, mean, or mean of totals.
/// (Mean and MeanTotal aggregate identically; the kind records whether the
/// inputs were per-epoch cascades or per-trial totals.)
pub fn aggregate_stats(records: &[CascadeRecord], kind: StatKind) -> Vec<(usize, f64)> {
    let mut by_scale: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for r in records {
        by_scale.entry(r.n_params).or_default().push(r.size);
    }
    by_scale
        .into_iter()
        .map(|(n, sizes)| {
            let stat = match kind {
                StatKind::Max => sizes.iter().copied().max().unwrap_or(0) as f64,
                StatKind::Mean | StatKind::MeanTotal => {
                    sizes.iter().sum::<u64>() as f64 / sizes.len() as f64
                }
            };
            (n, stat)
        })
        .collect()
}

/// Aggregate then fit, dropping scales whose statistic is non-positive.
pub fn fit_scaling(records: &[CascadeRecord], kind: StatKind) -> Result<ScalingFit> {
    let points: Vec<(f64, f64)> = aggregate_stats(records, kind)
        .into_iter()
        .filter(|&(_, y)| y > 0.0)
        .map(|(n, y)| (n as f64, y))
        .collect();
    fit_power_law(&points, kind)
}

/// Per-snapshot-epoch exponent: pools records with |epoch - t| <= window,
/// takes the per-scale max, and fits. Epochs with fewer than 3 usable
/// scales are skipped.
pub fn time_resolved_d(
    records: &[CascadeRecord],
    snapshot_epochs: &[usize],
    window: usize,
) -> Vec<(usize, ScalingFit)> {
    let mut series = Vec::new();
    for &t in snapshot_epochs {
        let lo = t.saturating_sub(window);
        let hi = t + window;
        let pool: Vec<CascadeRecord> = records
            .iter()
            .filter(|r| (lo..=hi).contains(&(r.epoch as usize)))
            .copied()
            .collect();
        if let Ok(fit) = fit_scaling(&pool, StatKind::Max) {
            series.push((t, fit));
        }
    }
    series
}

/// Complementary cumulative distribution P(>s) on the sorted unique support.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CcdfCurve {
    pub support: Vec<u64>,
    pub probabilities: Vec<f64>,
    pub n_samples: usize,
}

impl CcdfCurve {
    /// Support rescaled by N^d for the data collapse.
    pub fn rescaled_support(&self, n_params: f64, d: f64) -> Vec<f64> {
        let norm = n_params.powf(d);
        self.support.iter().map(|&s| s as f64 / norm).collect()
    }

    pub fn p_greater(&self, s: u64) -> f64 {
        // piecewise-constant: P(>s) = prob at the largest support point <= s
        match self.support.partition_point(|&v| v <= s) {
            0 => 1.0,
            i => self.probabilities[i - 1],
        }
    }
}

pub fn ccdf(sizes: &[u64]) -> Result<CcdfCurve> {
    if sizes.is_empty() {
        return Err(Error::EmptyInput("ccdf sizes"));
    }
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut support = Vec::new();
    let mut probabilities = Vec::new();
    let mut i = 0;
    while i < n {
        let v = sorted[i];
        let j = sorted.partition_point(|&x| x <= v);
        support.push(v);
        probabilities.push((n - j) as f64 / n as f64);
        i = j;
    }
    Ok(CcdfCurve {
        support,
        probabilities,
        n_samples: n,
    })
}

/// Collapse dispersion: mean, over a shared log-support grid, of the spread
/// in P(>s) across scales after rescaling s by N^d. Smaller is a better
/// collapse. Zero-size entries are ignored (log-undefined).
pub fn collapse_dispersion(curves: &[(usize, CcdfCurve)], d: f64) -> f64 {
    // each curve as (log10(s/N^d), P) step function
    let rescaled: Vec<Vec<(f64, f64)>> = curves
        .iter()
        .map(|(n, c)| {
            c.support
                .iter()
                .zip(&c.probabilities)
                .filter(|(&s, _)| s > 0)
                .map(|(&s, &p)| ((s as f64 / (*n as f64).powf(d)).log10(), p))
                .collect()
        })
        .collect();
    // a curve with no positive sizes, or a shared window that is empty,
    // means the curves do not overlap at all: worst possible collapse
    if rescaled.iter().any(|c| c.is_empty()) {
        return 1.0;
    }
    let lo = rescaled
        .iter()
        .map(|c| c[0].0)
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = rescaled
        .iter()
        .map(|c| c[c.len() - 1].0)
        .fold(f64::INFINITY, f64::min);
    let mut grid: Vec<f64> = rescaled
        .iter()
        .flat_map(|c| c.iter().map(|p| p.0))
        .filter(|x| (lo..=hi).contains(x))
        .collect();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    if grid.is_empty() {
        return 1.0;
    }
    let eval = |curve: &[(f64, f64)], x: f64| -> f64 {
        match curve.partition_point(|p| p.0 <= x) {
            0 => 1.0,
            i => curve[i - 1].1,
        }
    };
    let mut total = 0.0;
    for &x in &grid {
        let vals: Vec<f64> = rescaled.iter().map(|c| eval(c, x)).collect();
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        total += max - min;
    }
    total / grid.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleUnit {
    Records,
    Seeds,
}

#[derive(Debug, Clone, Copy)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub rng_seed: u64,
    pub unit: ResampleUnit,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_resamples: 10_000,
            rng_seed: 0,
            unit: ResampleUnit::Records,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub p2_5: f64,
    pub p97_5: f64,
    /// Resamples discarded for covering fewer than 3 scales.
    pub n_discarded: usize,
}

/// Bootstrap distribution of the max-statistic exponent for one phase.
/// Records must already carry phase tags; pools are per (scale, phase).
pub fn bootstrap_d(
    records: &[CascadeRecord],
    phase: Phase,
    cfg: &BootstrapConfig,
) -> Result<BootstrapResult> {
    let mut pools: BTreeMap<usize, Vec<&CascadeRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.phase == phase) {
        pools.entry(r.n_params).or_default().push(r);
    }
    if pools.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "bootstrap needs >= 3 scales with {} records, got {}",
            phase.tag(),
            pools.len()
        )));
    }
    // seed lists per scale for the seed-level resampling unit
    let seed_pools: BTreeMap<usize, Vec<(u64, Vec<&CascadeRecord>)>> = pools
        .iter()
        .map(|(&n, recs)| {
            let mut by_seed: BTreeMap<u64, Vec<&CascadeRecord>> = BTreeMap::new();
            for &r in recs {
                by_seed.entry(r.seed).or_default().push(r);
            }
            (n, by_seed.into_iter().collect())
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut samples = Vec::with_capacity(cfg.n_resamples);
    let mut discarded = 0usize;
    let discard_cap = 1000 + 10 * cfg.n_resamples;
    while samples.len() < cfg.n_resamples {
        let mut points: Vec<(f64, f64)> = Vec::with_capacity(pools.len());
        match cfg.unit {
            ResampleUnit::Records => {
                for (&n, pool) in &pools {
                    let mut smax = 0u64;
                    for _ in 0..pool.len() {
                        let r = pool[rng.random_range(0..pool.len())];
                        smax = smax.max(r.size);
                    }
                    if smax > 0 {
                        points.push((n as f64, smax as f64));
                    }
                }
            }
            ResampleUnit::Seeds => {
                for (&n, seeds) in &seed_pools {
                    let mut smax = 0u64;
                    for _ in 0..seeds.len() {
                        let (_, recs) = &seeds[rng.random_range(0..seeds.len())];
                        for r in recs {
                            smax = smax.max(r.size);
                        }
                    }
                    if smax > 0 {
                        points.push((n as f64, smax as f64));
                    }
                }
            }
        }
        if points.len() < 3 {
            discarded += 1;
            if discarded > discard_cap {
                return Err(Error::InsufficientData(
                    "bootstrap: too many resamples with < 3 usable scales".into(),
                ));
            }
            continue;
        }
        match log_log_ols(&points) {
            Ok(line) => samples.push(line.slope),
            Err(_) => {
                discarded += 1;
                if discarded > discard_cap {
                    return Err(Error::InsufficientData(
                        "bootstrap: too many degenerate resamples".into(),
                    ));
                }
            }
        }
    }

    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(BootstrapResult {
        p2_5: percentile(&sorted, 0.025),
        p97_5: percentile(&sorted, 0.975),
        mean,
        std: var.sqrt(),
        samples,
        n_discarded: discarded,
    })
}

/// Type-7 percentile of a pre-sorted slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let rank = (n - 1) as f64 * q;
    let lo = rank.floor() as usize;
    if lo + 1 < n {
        sorted[lo] + (rank - lo as f64) * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[n - 1]
    }
}

/// One fit per excluded scale; requires at least 4 scales.
pub fn leave_one_out(
    records: &[CascadeRecord],
    kind: StatKind,
) -> Result<Vec<(usize, ScalingFit)>> {
    let scales: Vec<usize> = {
        let mut s: Vec<usize> = records.iter().map(|r| r.n_params).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    if scales.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "leave-one-out needs >= 4 scales, got {}",
            scales.len()
        )));
    }
    let mut out = Vec::with_capacity(scales.len());
    for &excluded in &scales {
        let subset: Vec<CascadeRecord> = records
            .iter()
            .filter(|r| r.n_params != excluded)
            .copied()
            .collect();
        out.push((excluded, fit_scaling(&subset, kind)?));
    }
    Ok(out)
}
