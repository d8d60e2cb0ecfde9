//! On-disk run store: one directory per run, plain-text formats throughout.
//!
//! Layout under the store root:
//!   config.txt                   campaign config dump
//!   runs/{h}_{seed_index}/       trace.csv, snapshots.csv, meta.json
//!   synth/                       records.csv, summary.json, sweeps.json
//!   analysis/                    figure datasets and summary.json
//!
//! meta.json is written last; a run directory without a complete meta.json
//! is treated as corrupt and quarantined.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeRecord, Phase};
use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::mlp::{Activation, ProbeMode, RunOutput, TrainingTrace};
use crate::synth::SynthRecord;
use crate::Scalar;

pub const SCHEMA_VERSION: u32 = 1;
pub const TRACE_HEADER: &str = "epoch,accuracy,loss,gini,avalanche_size,cascade_steps";
pub const SYNTH_HEADER: &str = "topology,n_params,seed,trial,size,steps,threshold";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub schema_version: u32,
    pub h: usize,
    pub n_params: usize,
    pub seed_index: usize,
    pub run_seed: u64,
    pub init_scale: f64,
    pub activation: Activation,
    pub eta: f64,
    pub epochs: usize,
    pub snapshot_interval: usize,
    pub alpha: f64,
    pub quantile: f64,
    pub max_steps: usize,
    pub topology: Topology,
    pub gen_seed: u64,
    pub probe_mode: ProbeMode,
    pub grok_window: usize,
    pub trace_only: bool,
    pub grokking_epoch: Option<usize>,
    pub complete: bool,
}

pub fn run_dir(store: &Path, h: usize, seed_index: usize) -> PathBuf {
    store.join("runs").join(format!("{h}_{seed_index}"))
}

/// Shortest round-trip decimal; stable across runs and hosts.
fn fmt_f(v: f64) -> String {
    format!("{v}")
}

pub fn write_run(dir: &Path, meta: &RunMeta, output: &RunOutput<Scalar>) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut trace = BufWriter::new(fs::File::create(dir.join("trace.csv"))?);
    writeln!(trace, "{TRACE_HEADER}")?;
    for (e, rec) in output.records.iter().enumerate() {
        writeln!(
            trace,
            "{e},{},{},{},{},{}",
            fmt_f(output.trace.accuracy[e]),
            fmt_f(output.trace.loss[e]),
            fmt_f(output.trace.gini[e]),
            rec.size,
            rec.steps
        )?;
    }
    trace.flush()?;

    if !meta.trace_only {
        let mut snaps = BufWriter::new(fs::File::create(dir.join("snapshots.csv"))?);
        let n = meta.n_params;
        let header: Vec<String> = std::iter::once("epoch".to_string())
            .chain((0..n).map(|i| format!("g{i}")))
            .collect();
        writeln!(snaps, "{}", header.join(","))?;
        for (epoch, grad) in &output.snapshots {
            write!(snaps, "{epoch}")?;
            for g in grad {
                write!(snaps, ",{}", fmt_f(*g))?;
            }
            writeln!(snaps)?;
        }
        snaps.flush()?;
    }

    // meta.json last: its presence marks the run complete
    let json = serde_json::to_string_pretty(meta)?;
    fs::write(dir.join("meta.json"), json)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub meta: RunMeta,
    pub trace: TrainingTrace,
    pub records: Vec<CascadeRecord>,
}

pub fn read_meta(dir: &Path) -> Result<RunMeta> {
    let path = dir.join("meta.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::corrupt(dir, format!("missing meta.json: {e}")))?;
    let meta: RunMeta = serde_json::from_str(&text)
        .map_err(|e| Error::corrupt(dir, format!("bad meta.json: {e}")))?;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(Error::corrupt(
            dir,
            format!("unknown schema version {}", meta.schema_version),
        ));
    }
    Ok(meta)
}

pub fn is_complete(dir: &Path) -> bool {
    read_meta(dir).map(|m| m.complete).unwrap_or(false)
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let meta = read_meta(dir)?;
    let file = fs::File::open(dir.join("trace.csv"))
        .map_err(|e| Error::corrupt(dir, format!("missing trace.csv: {e}")))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::corrupt(dir, "empty trace.csv"))?
        .map_err(Error::Io)?;
    if header != TRACE_HEADER {
        return Err(Error::corrupt(dir, format!("unknown trace schema '{header}'")));
    }

    let mut trace = TrainingTrace {
        accuracy: Vec::new(),
        loss: Vec::new(),
        gini: Vec::new(),
        grokking_epoch: meta.grokking_epoch,
        seed: meta.run_seed,
        h: meta.h,
        snapshot_epochs: Vec::new(),
    };
    let mut records = Vec::new();
    for line in lines {
        let line = line.map_err(Error::Io)?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::corrupt(dir, format!("bad trace row '{line}'")));
        }
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::corrupt(dir, format!("bad float '{s}': {e}")))
        };
        let epoch: u32 = fields[0]
            .parse()
            .map_err(|e| Error::corrupt(dir, format!("bad epoch: {e}")))?;
        trace.accuracy.push(parse_f(fields[1])?);
        trace.loss.push(parse_f(fields[2])?);
        trace.gini.push(parse_f(fields[3])?);
        records.push(CascadeRecord {
            size: fields[4]
                .parse()
                .map_err(|e| Error::corrupt(dir, format!("bad size: {e}")))?,
            steps: fields[5]
                .parse()
                .map_err(|e| Error::corrupt(dir, format!("bad steps: {e}")))?,
            epoch,
            seed: meta.run_seed,
            n_params: meta.n_params,
            phase: Phase::Unknown,
            threshold: 0.0,
        });
    }
    Ok(LoadedRun {
        meta,
        trace,
        records,
    })
}

/// Sorted list of run directories under `store/runs`.
pub fn list_run_dirs(store: &Path) -> Result<Vec<PathBuf>> {
    let runs = store.join("runs");
    if !runs.exists() {
        return Ok(Vec::new());
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(&runs)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir() && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("quarantine")))
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Moves a partial or corrupt run directory aside so it can be re-run.
pub fn quarantine(dir: &Path) -> Result<PathBuf> {
    let name = dir
        .file_name()
        .ok_or_else(|| Error::corrupt(dir, "run directory has no name"))?
        .to_string_lossy()
        .to_string();
    let parent = dir.parent().unwrap_or(Path::new("."));
    for k in 0.. {
        let target = parent.join(format!("quarantine-{name}-{k}"));
        if !target.exists() {
            fs::rename(dir, &target)?;
            return Ok(target);
        }
    }
    unreachable!()
}

pub fn write_synth_records(path: &Path, records: &[SynthRecord]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{SYNTH_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.topology.tag(),
            r.record.n_params,
            r.record.seed,
            r.record.epoch,
            r.record.size,
            r.record.steps,
            fmt_f(r.record.threshold)
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_synth_records(path: &Path) -> Result<Vec<SynthRecord>> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::corrupt(path, "empty synth records"))?
        .map_err(Error::Io)?;
    if header != SYNTH_HEADER {
        return Err(Error::corrupt(path, format!("unknown synth schema '{header}'")));
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line.map_err(Error::Io)?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::corrupt(path, format!("bad synth row '{line}'")));
        }
        let err = |e: String| Error::corrupt(path, e);
        records.push(SynthRecord {
            topology: Topology::from_tag(f[0])?,
            record: CascadeRecord {
                n_params: f[1].parse().map_err(|e| err(format!("{e}")))?,
                seed: f[2].parse().map_err(|e| err(format!("{e}")))?,
                epoch: f[3].parse().map_err(|e| err(format!("{e}")))?,
                size: f[4].parse().map_err(|e| err(format!("{e}")))?,
                steps: f[5].parse().map_err(|e| err(format!("{e}")))?,
                threshold: f[6].parse().map_err(|e| err(format!("{e}")))?,
                phase: Phase::Unknown,
            },
        });
    }
    Ok(records)
}

/// Writes a CSV with an explicit header; rows are pre-formatted.
pub fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_float(v: f64) -> String {
    fmt_f(v)
}
