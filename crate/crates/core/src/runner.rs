//! Experiment orchestration and data-file emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Experiment, RunConfig};
use crate::continuous::{integrate_master, monte_carlo_average, DiffusiveSimulator, Hierarchy, JumpSimulator, McSummary, Unraveling};
use crate::convergence::no_count_convergence;
use crate::counting_stats::{one_count_density_scan, prob_m_counts, QuadratureOptions};
use crate::discrete::{sample_trajectory_seeded, Measurement, SampleOptions};
use crate::error::{Error, Result};
use crate::model::{build_collision_exact, discretize_profile_with, DiscretizeOptions, PhotonProfile, SystemModel};
use crate::oracles::{tla_table, TwoLevelAtomSpec};

pub const MANIFEST: &str = "manifest.json";

/// Full-precision CSV number.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    library_version: &'static str,
    experiment: Experiment,
    seed: u64,
    trajectory_streams: &'static str,
    wall_time_seconds: f64,
    files: &'a [FileEntry],
    config: &'a RunConfig,
}

/// Files written by one run; each is hashed as it is written.
struct Output {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, data: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), data)?;
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(data)),
            bytes: data.len(),
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

fn entry_header(prefix: &str, d: usize) -> Vec<String> {
    let mut cols = Vec::new();
    for i in 0..d {
        for j in 0..d {
            cols.push(format!("{prefix}{i}{j}_re"));
            cols.push(format!("{prefix}{i}{j}_im"));
        }
    }
    cols
}

fn push_entries(row: &mut Vec<String>, rho: &crate::linalg::CMat) {
    let d = rho.nrows();
    for i in 0..d {
        for j in 0..d {
            row.push(num(rho[(i, j)].re));
            row.push(num(rho[(i, j)].im));
        }
    }
}

fn csv(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s.into_bytes()
}

fn master(cfg: &RunConfig, model: &SystemModel, profile: &PhotonProfile, out: &mut Output) -> Result<()> {
    let c = cfg.continuum()?;
    let path = integrate_master(model, profile, c.t_end, c.dt, c.stride)?;
    let d = model.dim();
    let mut header = vec!["t".to_string()];
    header.extend(entry_header("rho", d));
    header.push("trace".into());
    let rows: Vec<Vec<String>> = path
        .times
        .iter()
        .zip(&path.states)
        .map(|(t, h)| {
            let mut r = vec![num(*t)];
            push_entries(&mut r, &h.rho);
            r.push(num(h.trace()));
            r
        })
        .collect();
    out.write("master.csv", &csv(&header, &rows))?;

    #[derive(Serialize)]
    struct Peak {
        level: usize,
        max_population: f64,
        at_time: f64,
    }
    let peaks: Vec<Peak> = (0..d)
        .map(|k| {
            let (i, v) = path
                .states
                .iter()
                .map(|h| h.rho[(k, k)].re)
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            Peak {
                level: k,
                max_population: v,
                at_time: path.times[i],
            }
        })
        .collect();
    out.json(
        "master_summary.json",
        &serde_json::json!({ "max_trace_drift": path.max_trace_drift, "peaks": peaks }),
    )
}

fn summary_files(kind: &str, s: &McSummary, d: usize, out: &mut Output) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(entry_header("rho", d));
    header.extend(entry_header("stderr_rho", d));
    let rows: Vec<Vec<String>> = (0..s.times.len())
        .map(|k| {
            let mut r = vec![num(s.times[k])];
            push_entries(&mut r, &s.mean[k].rho);
            // ρ occupies the first 2d² entries of the flattened layout
            r.extend(s.stderr[k][..2 * d * d].iter().map(|x| num(*x)));
            r
        })
        .collect();
    out.write(&format!("{kind}_mean.csv"), &csv(&header, &rows))?;
    out.json(
        &format!("{kind}_summary.json"),
        &serde_json::json!({
            "kind": s.kind,
            "trajectories": s.trajectories,
            "seed": s.seed,
            "times": s.times,
            "mean": s.mean.iter().map(Hierarchy::flatten).collect::<Vec<_>>(),
            "stderr": s.stderr,
            "layout": "rho, rho01, rho00; each column-major with re, im interleaved",
        }),
    )
}

fn unraveling(cfg: &RunConfig, kind: Unraveling, model: &SystemModel, profile: &PhotonProfile, out: &mut Output) -> Result<()> {
    let opts = cfg.step_options()?;
    let d = model.dim();
    let summary = monte_carlo_average(kind, model, profile, &opts, cfg.trajectories, cfg.seed)?;
    let mut header = vec!["t".to_string()];
    header.extend(entry_header("rho", d));
    header.push("trace".into());
    let mut rows = Vec::new();
    let name = match kind {
        Unraveling::Jump => {
            header.extend(["k".to_string(), "counts".to_string()]);
            let p = JumpSimulator::new(model, profile, &opts)?.run(cfg.seed, 0)?;
            for i in 0..p.times.len() {
                let mut r = vec![num(p.times[i])];
                push_entries(&mut r, &p.states[i].rho);
                r.extend([num(p.states[i].trace()), num(p.intensities[i]), p.counts[i].to_string()]);
                rows.push(r);
            }
            "jump"
        }
        Unraveling::Diffusive => {
            header.extend(["r".to_string(), "w".to_string()]);
            let p = DiffusiveSimulator::new(model, profile, &opts)?.run(cfg.seed, 0)?;
            for i in 0..p.times.len() {
                let mut r = vec![num(p.times[i])];
                push_entries(&mut r, &p.states[i].rho);
                r.extend([num(p.states[i].trace()), num(p.rates[i]), num(p.wiener[i])]);
                rows.push(r);
            }
            "diffusive"
        }
    };
    out.write(&format!("{name}_path_0.csv"), &csv(&header, &rows))?;
    summary_files(name, &summary, d, out)
}

fn discrete(cfg: &RunConfig, kind: Measurement, model: &SystemModel, profile: &PhotonProfile, out: &mut Output) -> Result<()> {
    let disc_cfg = cfg.discretization()?;
    let opts = DiscretizeOptions {
        allow_unnormalized: cfg.allow_unnormalized_profile,
        ..Default::default()
    };
    let disc = discretize_profile_with(profile, disc_cfg.tau, disc_cfg.horizon, &opts)?;
    let blocks = build_collision_exact(model, disc_cfg.tau)?;
    let steps = disc.len();
    let mut sample = SampleOptions::new(steps);
    sample.record_states = false;
    let trajs = (0..cfg.trajectories as u64)
        .into_par_iter()
        .map(|i| sample_trajectory_seeded(model, &blocks, &disc, kind, &sample, cfg.seed, i))
        .collect::<Result<Vec<_>>>()?;

    let header: Vec<String> = ["trajectory", "log_probability", "count_total", "first_count_time", "outcomes"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = trajs
        .iter()
        .enumerate()
        .map(|(i, t)| {
            vec![
                i.to_string(),
                num(t.log_prob.last().copied().unwrap_or(0.0)),
                t.count_total().to_string(),
                t.first_count_time().map(num).unwrap_or_default(),
                t.outcome_string(),
            ]
        })
        .collect();
    out.write("discrete_outcomes.csv", &csv(&header, &rows))?;

    let first = &trajs[0];
    let d = model.dim();
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend((0..d).map(|k| format!("population_{k}")));
    header.extend(["p_future".to_string(), "log_probability".to_string(), "outcome".to_string()]);
    let rows: Vec<Vec<String>> = (0..=first.steps())
        .map(|j| {
            let mut r = vec![j.to_string(), num(j as f64 * disc.tau())];
            r.extend(first.populations[j].iter().map(|x| num(*x)));
            r.push(num(first.p_future[j]));
            r.push(num(first.log_prob[j]));
            r.push(if j == 0 {
                String::new()
            } else {
                kind.symbol(first.outcomes[j - 1] as usize).to_string()
            });
            r
        })
        .collect();
    out.write("discrete_path_0.csv", &csv(&header, &rows))
}

/// One row of the count-number table.
#[derive(Clone, Debug, Serialize)]
pub struct StatsRow {
    pub t: f64,
    #[serde(rename = "P0")]
    pub p0: f64,
    #[serde(rename = "P1")]
    pub p1: f64,
    #[serde(rename = "P2")]
    pub p2: f64,
    pub quadrature_error: f64,
    pub normalization_residual: f64,
}

/// `P_0^t(m)` for `m ≤ 2` over the configured times.
pub fn stats_report(model: &SystemModel, profile: &PhotonProfile, times: &[f64], q: &QuadratureOptions) -> Result<Vec<StatsRow>> {
    times
        .iter()
        .map(|&t| {
            let e: Vec<_> = (0..=2).map(|m| prob_m_counts(model, profile, t, m, q)).collect::<Result<_>>()?;
            Ok(StatsRow {
                t,
                p0: e[0].value,
                p1: e[1].value,
                p2: e[2].value,
                quadrature_error: e.iter().map(|x| x.error_estimate).sum(),
                normalization_residual: (e[0].value + e[1].value + e[2].value - 1.0).abs(),
            })
        })
        .collect()
}

fn counting_stats(cfg: &RunConfig, model: &SystemModel, profile: &PhotonProfile, out: &mut Output) -> Result<()> {
    let s = cfg.counting_stats_spec()?;
    let q = QuadratureOptions {
        intervals: s.intervals,
        intervals_2d: s.intervals_2d,
    };
    let rows = stats_report(model, profile, &s.times, &q)?;
    out.json("counting_stats.json", &rows)?;
    if let (Some(n), Some(&t)) = (s.scan_intervals, s.times.last()) {
        let scan = one_count_density_scan(model, profile, t, n)?;
        let rows: Vec<Vec<String>> = scan.iter().map(|(a, b)| vec![num(*a), num(*b)]).collect();
        out.write("density_scan.csv", &csv(&["t1".to_string(), "density".to_string()], &rows))?;
    }
    Ok(())
}

fn convergence(cfg: &RunConfig, model: &SystemModel, profile: &PhotonProfile, out: &mut Output) -> Result<()> {
    let c = cfg.convergence_spec()?;
    let report = no_count_convergence(
        model,
        profile,
        c.tau0,
        c.levels,
        &c.times,
        c.reference_dt,
        cfg.allow_unnormalized_profile,
    )?;
    out.json("convergence.json", &report)
}

fn oracle(cfg: &RunConfig, profile: PhotonProfile, out: &mut Output) -> Result<()> {
    let o = cfg.oracle_spec()?;
    let spec = TwoLevelAtomSpec::new(o.gamma, profile)?;
    out.json("oracle_tla.json", &tla_table(&spec, &o.times)?)
}

/// Runs the configured experiment, writing data files and a manifest into
/// `dir`. Returns the data files in write order.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<Vec<FileEntry>> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = Output::new(dir)?;
    let profile = cfg.profile.build()?;
    if !cfg.allow_unnormalized_profile && !profile.is_vacuum() {
        profile.check_normalization(DiscretizeOptions::default().tolerance)?;
    }
    log::info!("running {:?} into {}", cfg.experiment, dir.display());
    if cfg.experiment == Experiment::Oracle {
        oracle(cfg, profile, &mut out)?;
    } else {
        let model = cfg.model_spec()?.build()?;
        match cfg.experiment {
            Experiment::Master => master(cfg, &model, &profile, &mut out)?,
            Experiment::Jump => unraveling(cfg, Unraveling::Jump, &model, &profile, &mut out)?,
            Experiment::Diffusive => unraveling(cfg, Unraveling::Diffusive, &model, &profile, &mut out)?,
            Experiment::DiscreteCounting => discrete(cfg, Measurement::Counting, &model, &profile, &mut out)?,
            Experiment::DiscreteHomodyne => discrete(cfg, Measurement::Homodyne, &model, &profile, &mut out)?,
            Experiment::CountingStats => counting_stats(cfg, &model, &profile, &mut out)?,
            Experiment::Convergence => convergence(cfg, &model, &profile, &mut out)?,
            Experiment::Oracle => unreachable!("handled above"),
        }
    }
    let manifest = Manifest {
        library_version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment,
        seed: cfg.seed,
        trajectory_streams: "trajectory i draws from ChaCha8 stream i seeded with the base seed",
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: &out.files,
        config: cfg,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(dir.join(MANIFEST), text)?;
    Ok(out.files)
}

/// Checks that every file in a manifest exists with the recorded digest.
pub fn verify_manifest(dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(dir.join(MANIFEST))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let files = v["files"].as_array().ok_or_else(|| Error::Config("manifest has no file list".into()))?;
    let mut problems = String::new();
    for f in files {
        let name = f["path"].as_str().unwrap_or_default();
        let data = std::fs::read(dir.join(name))?;
        if hex::encode(Sha256::digest(&data)) != f["sha256"].as_str().unwrap_or_default() {
            let _ = writeln!(problems, "{name}: checksum mismatch");
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Numeric {
            what: format!("manifest verification\n{problems}"),
            residual: 1.0,
        })
    }
}
