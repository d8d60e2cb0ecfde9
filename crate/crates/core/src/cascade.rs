//! Threshold-diffusion cascade engine.
//!
//! A gradient field is injected into a diffusion graph; nodes whose gradient
//! magnitude exceeds a self-organizing threshold (a high quantile of |g|,
//! frozen for the whole cascade) topple synchronously, keeping (1-alpha) of
//! their value and donating alpha*g_i/k_i to each neighbor. The avalanche
//! size counts topple events across all steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DiffusionGraph;
use crate::Real;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CascadeConfig {
    /// Diffusion strength: fraction of a supercritical gradient redistributed.
    pub alpha: f64,
    /// Quantile of |g| defining the threshold.
    pub quantile: f64,
    /// Hard cap on cascade iterations.
    pub max_steps: usize,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            alpha: 0.3,
            quantile: 0.90,
            max_steps: 20,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "quantile must be in (0,1), got {}",
                self.quantile
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Training phase a cascade record belongs to, assigned during analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pre,
    Post,
    Unknown,
}

impl Phase {
    pub fn tag(self) -> &'static str {
        match self {
            Phase::Pre => "pre",
            Phase::Post => "post",
            Phase::Unknown => "unknown",
        }
    }
}

/// One avalanche: total topple events, steps taken, and where it came from.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CascadeRecord {
    pub size: u64,
    pub steps: u32,
    pub epoch: u32,
    pub seed: u64,
    pub n_params: usize,
    pub phase: Phase,
    pub threshold: f64,
}

/// Type-7 (linear interpolation) quantile of |g|.
pub fn compute_threshold<F: Real>(gradient: &[F], q: f64) -> Result<F> {
    if gradient.is_empty() {
        return Err(Error::EmptyInput("gradient"));
    }
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    let mut mags: Vec<F> = gradient.iter().map(|g| g.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = mags.len();
    let rank = (n - 1) as f64 * q;
    let lo = rank.floor() as usize;
    let frac = F::from_config(rank - rank.floor());
    if lo + 1 < n {
        Ok(mags[lo] + frac * (mags[lo + 1] - mags[lo]))
    } else {
        Ok(mags[n - 1])
    }
}

/// One synchronous toppling step. Donations are computed from the pre-step
/// field; isolated nodes never topple. Returns the new field and |S|.
pub fn diffusion_step<F: Real>(
    field: &[F],
    graph: &DiffusionGraph,
    tau: F,
    alpha: F,
) -> Result<(Vec<F>, usize)> {
    let mut next = field.to_vec();
    let toppled = diffusion_step_into(field, &mut next, graph, tau, alpha)?;
    Ok((next, toppled))
}

/// In-place variant: `next` must already hold a copy of `field`.
fn diffusion_step_into<F: Real>(
    field: &[F],
    next: &mut [F],
    graph: &DiffusionGraph,
    tau: F,
    alpha: F,
) -> Result<usize> {
    if field.len() != graph.n_nodes() {
        return Err(Error::LengthMismatch {
            context: "diffusion_step",
            expected: graph.n_nodes(),
            got: field.len(),
        });
    }
    let mut toppled = 0usize;
    for i in 0..field.len() {
        let g = field[i];
        if g.abs() <= tau {
            continue;
        }
        let neighbors = graph.neighbors(i);
        let k = neighbors.len();
        if k == 0 {
            continue;
        }
        toppled += 1;
        let donation = alpha * g / F::from_config(k as f64);
        next[i] -= alpha * g;
        for &j in neighbors {
            next[j] += donation;
        }
    }
    Ok(toppled)
}

/// Runs a full cascade: the threshold is computed once from the initial
/// gradient and held fixed; steps repeat until quiescence or `max_steps`.
/// `epoch` and `seed` are carried into the record unchanged.
pub fn run_cascade<F: Real>(
    gradient: &[F],
    graph: &DiffusionGraph,
    config: &CascadeConfig,
) -> Result<(Vec<F>, CascadeRecord)> {
    config.validate()?;
    let tau = compute_threshold(gradient, config.quantile)?;
    let alpha = F::from_config(config.alpha);

    let mut current = gradient.to_vec();
    let mut next = gradient.to_vec();
    let mut size = 0u64;
    let mut steps = 0u32;
    for _ in 0..config.max_steps {
        next.copy_from_slice(&current);
        let toppled = diffusion_step_into(&current, &mut next, graph, tau, alpha)?;
        if toppled == 0 {
            break;
        }
        size += toppled as u64;
        steps += 1;
        std::mem::swap(&mut current, &mut next);
    }

    let record = CascadeRecord {
        size,
        steps,
        epoch: 0,
        seed: 0,
        n_params: gradient.len(),
        phase: Phase::Unknown,
        threshold: tau.as_f64(),
    };
    Ok((current, record))
}
