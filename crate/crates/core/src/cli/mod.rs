//! Command-line runs: config resolution, run directories, manifests,
//! sweeps and plot scripts.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod outputs;
pub mod plots;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::experiments::sweep::{cell_dir_name, cells, derived_seed, parse_axes};
use config::{apply_overrides, parse_text, Resolved};
use manifest::{digest_file, now, run_id, FileDigest, RunLock, RunManifest, MANIFEST_FILE};
use outputs::OutputSet;

pub const TOOL: &str = "qel";
pub const THREADS_ENV: &str = "QEL_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Spectrum,
    Greens,
    Wegner,
    Count,
    Initial,
    Dynamics,
    Floquet,
    Decay,
    Sweep,
    IdentityCheck,
}

impl Subcommand {
    pub const ALL: [Subcommand; 10] = [
        Self::Spectrum,
        Self::Greens,
        Self::Wegner,
        Self::Count,
        Self::Initial,
        Self::Dynamics,
        Self::Floquet,
        Self::Decay,
        Self::Sweep,
        Self::IdentityCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Greens => "greens",
            Self::Wegner => "wegner",
            Self::Count => "count",
            Self::Initial => "initial",
            Self::Dynamics => "dynamics",
            Self::Floquet => "floquet",
            Self::Decay => "decay",
            Self::Sweep => "sweep",
            Self::IdentityCheck => "identity-check",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::config("sweep.experiment", format!("unknown subcommand `{s}`")))
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub subcommand: Subcommand,
    /// Config text file or a `manifest.json` from an earlier run.
    pub config: Option<PathBuf>,
    /// `key=value` overrides applied after the file.
    pub overrides: Vec<String>,
    /// Parent of the run directory.
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

impl RunRequest {
    pub fn new(subcommand: Subcommand, out: impl Into<PathBuf>) -> Self {
        Self {
            subcommand,
            config: None,
            overrides: Vec::new(),
            out: out.into(),
            threads: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub manifest: RunManifest,
    pub summary: Value,
    /// Progress remarks not written to any output file.
    pub notes: Vec<String>,
}

/// Process exit code for an error: 2 config, 3 numerical, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::InvalidInput(_)
        | Error::UnknownDistribution(_)
        | Error::ProfileViolation { .. }
        | Error::DimensionMismatch { .. }
        | Error::SizeOverflow { .. } => 2,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

fn looks_like_manifest(path: &Path, text: &str) -> bool {
    path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{')
}

/// Resolves the config of a request.
pub fn resolve(req: &RunRequest) -> Result<Resolved> {
    let mut raw = match &req.config {
        None => Default::default(),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            if looks_like_manifest(p, &text) {
                let m: RunManifest = serde_json::from_str(&text)?;
                if m.subcommand != req.subcommand.name() {
                    return Err(Error::config(
                        "subcommand",
                        format!("manifest was produced by `{}`", m.subcommand),
                    ));
                }
                m.config
            } else {
                parse_text(&text)?
            }
        }
    };
    apply_overrides(&mut raw, &req.overrides)?;
    if let Some(s) = req.seed {
        raw.insert("disorder.seed".into(), s.to_string());
    }
    Resolved::new(raw)
}

fn threads(req: &RunRequest) -> Result<Option<usize>> {
    if let Some(t) = req.threads {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::config(THREADS_ENV, format!("`{v}` is not a thread count"))),
        _ => Ok(None),
    }
}

/// Resolves, runs and records one invocation.
pub fn run(req: &RunRequest) -> Result<RunOutcome> {
    let cfg = resolve(req)?;
    let dir = req.out.join(run_id(req.subcommand.name(), &cfg));
    match threads(req)? {
        Some(0) => Err(Error::config("threads", "must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(|| execute(req.subcommand, &cfg, &dir)),
        None => execute(req.subcommand, &cfg, &dir),
    }
}

/// Runs `sub` into `dir`, replacing earlier outputs there.
pub fn execute(sub: Subcommand, cfg: &Resolved, dir: &Path) -> Result<RunOutcome> {
    let _lock = RunLock::acquire(dir)?;
    let mpath = dir.join(MANIFEST_FILE);
    if mpath.exists() {
        fs::remove_file(&mpath)?;
    }
    let started = now();
    let mut out = OutputSet::new(dir);
    let mut inputs: Vec<FileDigest> = Vec::new();
    let mut notes = Vec::new();
    let summary = match sub {
        Subcommand::Spectrum => commands::spectrum(cfg, &mut out)?,
        Subcommand::Greens => commands::greens(cfg, &mut out)?,
        Subcommand::Wegner => commands::wegner_cmd(cfg, &mut out)?,
        Subcommand::Count => commands::count_cmd(cfg, &mut out)?,
        Subcommand::Initial => commands::initial_cmd(cfg, &mut out)?,
        Subcommand::Dynamics => commands::dynamics(cfg, &mut out, &mut inputs)?,
        Subcommand::Floquet => commands::floquet(cfg, &mut out)?,
        Subcommand::Decay => commands::decay_cmd(cfg, &mut out)?,
        Subcommand::IdentityCheck => commands::identity_check(cfg, &mut out)?,
        Subcommand::Sweep => sweep(cfg, &mut out, &mut notes)?,
    };
    out.json("summary.json", &summary)?;
    out.text("config.txt", &cfg.to_text())?;
    let files = out
        .files()
        .iter()
        .map(|f| {
            let mut d = digest_file(&dir.join(f))?;
            d.path = f.clone();
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: sub.name().into(),
        run_id: dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        master_seed: cfg.seed(),
        config: cfg.map().clone(),
        started_at: started,
        finished_at: now(),
        files,
        inputs,
    };
    manifest.save(dir)?;
    Ok(RunOutcome {
        run_dir: dir.to_path_buf(),
        manifest,
        summary,
        notes,
    })
}

/// Config of grid cell `index`.
pub fn cell_config(base: &Resolved, cell: &[(String, String)], index: usize) -> Result<Resolved> {
    let mut cfg = base.clone();
    for (k, v) in cell {
        if k.starts_with("sweep.") || k == "disorder.seed" {
            return Err(Error::config("sweep.axes", format!("`{k}` cannot be swept")));
        }
        cfg = cfg.with(k, v)?;
    }
    cfg.with("disorder.seed", &derived_seed(base.seed(), index).to_string())
}

fn sweep(cfg: &Resolved, out: &mut OutputSet, notes: &mut Vec<String>) -> Result<Value> {
    let axes = parse_axes(cfg.str("sweep.axes")).map_err(|e| Error::config("sweep.axes", e.to_string()))?;
    let sub = Subcommand::parse(cfg.str("sweep.experiment"))?;
    if sub == Subcommand::Sweep {
        return Err(Error::config("sweep.experiment", "sweeps cannot nest"));
    }
    let grid = cells(&axes);
    let configs: Vec<Resolved> = grid
        .iter()
        .enumerate()
        .map(|(i, c)| cell_config(cfg, c, i))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut cells_json = Vec::new();
    for (i, (cell, ccfg)) in grid.iter().zip(&configs).enumerate() {
        let dir = out.dir().join(cell_dir_name(i));
        let done = RunManifest::load(&dir.join(MANIFEST_FILE))
            .ok()
            .filter(|m| m.config == *ccfg.map() && m.subcommand == sub.name() && m.outputs_intact(&dir));
        let (status, message) = if done.is_some() {
            notes.push(format!("{} reused", cell_dir_name(i)));
            ("ok".to_string(), String::new())
        } else {
            match execute(sub, ccfg, &dir) {
                Ok(_) => ("ok".to_string(), String::new()),
                Err(e) => {
                    notes.push(format!("{} failed: {e}", cell_dir_name(i)));
                    ("failed".to_string(), e.to_string())
                }
            }
        };
        let mut row = vec![cell_dir_name(i), ccfg.seed().to_string()];
        row.extend(cell.iter().map(|(_, v)| v.clone()));
        row.extend([status.clone(), message.clone()]);
        rows.push(row);
        cells_json.push(json!({
            "cell": cell_dir_name(i),
            "seed": ccfg.seed(),
            "values": cell.iter().map(|(k, v)| (k.clone(), v.clone())).collect::<std::collections::BTreeMap<_, _>>(),
            "status": status,
            "message": message,
        }));
    }
    let mut header: Vec<&str> = vec!["cell", "seed"];
    header.extend(axes.iter().map(|a| a.key.as_str()));
    header.extend(["status", "message"]);
    out.csv("sweep.csv", &header, rows)?;
    Ok(json!({
        "experiment": sub.name(),
        "cells": cells_json,
        "failed": cells_json.iter().filter(|c| c["status"] == "failed").count(),
    }))
}
