use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ris_fbl_core::scenario::{run_episode, sweep, EpisodeResult, SweepGrid, SweepSummary, SweepTable};

use crate::spec::{Axis, ExperimentSpec};
use crate::svg::{LineChart, Series};

pub const RESOLVED_FILE: &str = "resolved.toml";
pub const EPISODE_FILE: &str = "episode.jsonl";

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

fn mbps(rate_bps: f64) -> String {
    format!("{}", rate_bps / 1e6)
}

/// One JSON object per line, without wall-clock fields.
pub fn episode_jsonl(result: &EpisodeResult) -> String {
    let mut line = serde_json::to_string(result).expect("episode results serialize");
    line.push('\n');
    line
}

#[derive(Debug)]
pub struct RunOutput {
    pub result: EpisodeResult,
    pub files: Vec<PathBuf>,
}

pub fn cmd_run(spec: &ExperimentSpec) -> Result<RunOutput> {
    let dir = &spec.output_dir;
    prepare_dir(dir)?;
    let result = run_episode(&spec.system, spec.system.rng_seed, &spec.episode);
    let mut files = vec![
        write(dir.join(RESOLVED_FILE), &spec.resolved_toml())?,
        write(dir.join(EPISODE_FILE), &episode_jsonl(&result))?,
    ];
    if let Some(t) = &result.steady_state_trace {
        files.push(write(dir.join("trace_steady_state.csv"), &t.to_csv())?);
    }
    for t in &result.traces {
        files.push(write(dir.join(format!("trace_{}.csv", t.label)), &t.trace.to_csv())?);
    }
    if result.status.is_failed() {
        bail!("episode failed: {:?}", result.status);
    }
    Ok(RunOutput { result, files })
}

pub fn summary_csv(summary: &[SweepSummary]) -> String {
    let mut out = String::from("eta,m,ok,failed,r_q1,r_median,r_q3,r_ada_q1,r_ada_median,r_ada_q3\n");
    let q = |x: Option<f64>| x.map(|v| format!("{v:.12}")).unwrap_or_default();
    for s in summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.eta,
            s.m,
            s.ok,
            s.failed,
            q(s.r.map(|r| r.q1)),
            q(s.r.map(|r| r.median)),
            q(s.r.map(|r| r.q3)),
            q(s.r_ada.map(|r| r.q1)),
            q(s.r_ada.map(|r| r.median)),
            q(s.r_ada.map(|r| r.q3)),
        );
    }
    out
}

#[derive(Debug)]
pub struct SweepOutput {
    /// One table per rate target, in grid order.
    pub tables: Vec<(f64, SweepTable)>,
    pub files: Vec<PathBuf>,
}

fn median_series(label: String, summary: &[SweepSummary], m: usize) -> Series {
    Series {
        label,
        points: summary
            .iter()
            .filter(|s| s.m == m)
            .map(|s| (s.eta as f64, s.r.map(|q| q.median).unwrap_or(f64::NAN)))
            .collect(),
    }
}

fn chart(title: String, log_x: bool, series: Vec<Series>) -> LineChart {
    LineChart {
        title,
        x_label: "blocklength eta (symbols)".into(),
        y_label: "median resilience r".into(),
        log_x,
        y_range: (0.0, 1.0),
        series,
    }
}

pub fn cmd_sweep(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<SweepOutput> {
    let dir = &spec.output_dir;
    prepare_dir(dir)?;
    let mut files = vec![write(dir.join(RESOLVED_FILE), &spec.resolved_toml())?];
    let grid = SweepGrid {
        blocklengths: spec.sweep.eta_grid.clone(),
        ris_elements: spec.sweep.m_grid.clone(),
        seeds: spec.sweep.seeds.clone(),
    };
    let mut tables = Vec::new();
    let mut summaries = Vec::new();
    for &rate in &spec.sweep.rate_target_grid_bps {
        let config = spec.system_for_target(rate);
        let table = sweep(&config, &grid, &spec.episode, jobs)
            .with_context(|| format!("sweep at r_des = {} Mbit/s", mbps(rate)))?;
        let tag = mbps(rate);
        files.push(write(dir.join(format!("sweep_rdes{tag}mbps.csv")), &table.to_csv())?);
        let summary = table.summarize();
        files.push(write(
            dir.join(format!("summary_rdes{tag}mbps.csv")),
            &summary_csv(&summary),
        )?);
        summaries.push((rate, summary));
        tables.push((rate, table));
    }

    if spec.emit_plots {
        let log_x = spec.sweep.eta_axis == Axis::Log;
        for &m in &spec.sweep.m_grid {
            let series = summaries
                .iter()
                .map(|(rate, s)| median_series(format!("r_des = {} Mbit/s", mbps(*rate)), s, m))
                .collect();
            let c = chart(format!("Resilience over blocklength, M = {m}"), log_x, series);
            files.push(write(dir.join(format!("r_vs_eta_m{m}.svg")), &c.render())?);
        }
        if spec.sweep.m_grid.len() > 1 {
            for (rate, s) in &summaries {
                let series = spec
                    .sweep
                    .m_grid
                    .iter()
                    .map(|&m| median_series(format!("M = {m}"), s, m))
                    .collect();
                let c = chart(
                    format!("Resilience over blocklength, r_des = {} Mbit/s", mbps(*rate)),
                    log_x,
                    series,
                );
                files.push(write(
                    dir.join(format!("r_vs_eta_rdes{}mbps.svg", mbps(*rate))),
                    &c.render(),
                )?);
            }
        }
    }
    Ok(SweepOutput { tables, files })
}

/// Resolved configuration text and the keys that took defaults.
pub fn cmd_validate(spec: &ExperimentSpec) -> (String, Vec<String>) {
    (spec.resolved_toml(), spec.defaults_applied.clone())
}
