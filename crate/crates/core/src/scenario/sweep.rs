use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    prepare_baseline, respond, Decision, EpisodeOptions, EpisodeResult, ScenarioError,
};
use crate::model::SystemConfig;

pub const CSV_HEADER: &str = "eta,m,seed,decision,r_abs,r_ada,r_rec,r,psi_final,steps,status";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepGrid {
    pub blocklengths: Vec<u64>,
    pub ris_elements: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl SweepGrid {
    fn validate(&self) -> Result<(), ScenarioError> {
        if self.blocklengths.is_empty() {
            return Err(ScenarioError::EmptyGrid("eta"));
        }
        if self.ris_elements.is_empty() {
            return Err(ScenarioError::EmptyGrid("m"));
        }
        if self.seeds.is_empty() {
            return Err(ScenarioError::EmptyGrid("seeds"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eta: u64,
    pub m: usize,
    pub seed: u64,
    pub decision: Option<Decision>,
    pub r_abs: f64,
    pub r_ada: f64,
    pub r_rec: f64,
    pub r: f64,
    pub psi_final: f64,
    pub steps: usize,
    pub status: String,
    pub failed: bool,
}

impl SweepRow {
    pub fn from_episode(eta: u64, m: usize, res: &EpisodeResult) -> Self {
        Self {
            eta,
            m,
            seed: res.seed,
            decision: res.decision,
            r_abs: res.r_abs,
            r_ada: res.r_ada,
            r_rec: res.r_rec,
            r: res.r,
            psi_final: res.psi_final,
            steps: res.steps,
            status: res.status.label(),
            failed: res.status.is_failed(),
        }
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12}")
    } else {
        String::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    fn of(values: &[f64]) -> Option<Self> {
        Some(Self {
            q1: quantile(values, 0.25)?,
            median: quantile(values, 0.5)?,
            q3: quantile(values, 0.75)?,
        })
    }
}

/// Linear-interpolation sample quantile (`h = (n - 1) p`).
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub eta: u64,
    pub m: usize,
    pub ok: usize,
    pub failed: usize,
    pub r: Option<Quartiles>,
    pub r_ada: Option<Quartiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                row.eta,
                row.m,
                row.seed,
                row.decision.map(Decision::as_str).unwrap_or(""),
                num(row.r_abs),
                num(row.r_ada),
                num(row.r_rec),
                num(row.r),
                num(row.psi_final),
                row.steps,
                row.status
            );
        }
        out
    }

    /// Median and quartiles over seeds for every `(eta, m)`, in grid order.
    /// Failed cells are left out and counted.
    pub fn summarize(&self) -> Vec<SweepSummary> {
        let mut keys: Vec<(u64, usize)> = Vec::new();
        for row in &self.rows {
            if !keys.contains(&(row.eta, row.m)) {
                keys.push((row.eta, row.m));
            }
        }
        keys.into_iter()
            .map(|(eta, m)| {
                let cell: Vec<&SweepRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.eta == eta && r.m == m)
                    .collect();
                let ok: Vec<&&SweepRow> = cell.iter().filter(|r| !r.failed).collect();
                let r: Vec<f64> = ok.iter().map(|row| row.r).collect();
                let r_ada: Vec<f64> = ok.iter().map(|row| row.r_ada).collect();
                SweepSummary {
                    eta,
                    m,
                    ok: ok.len(),
                    failed: cell.len() - ok.len(),
                    r: Quartiles::of(&r),
                    r_ada: Quartiles::of(&r_ada),
                }
            })
            .collect()
    }
}

fn with_workers<T: Send>(
    jobs: Option<usize>,
    work: impl FnOnce() -> T + Send,
) -> Result<T, ScenarioError> {
    match jobs {
        None => Ok(work()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map(|pool| pool.install(work))
            .map_err(|e| ScenarioError::Workers(e.to_string())),
    }
}

/// Full episode results for every `(eta, m, seed)` cell, ordered by `eta`,
/// then `m`, then seed. `jobs = None` uses all available cores.
pub fn sweep_episodes(
    config: &SystemConfig,
    grid: &SweepGrid,
    options: &EpisodeOptions,
    jobs: Option<usize>,
) -> Result<Vec<EpisodeResult>, ScenarioError> {
    grid.validate()?;
    config.validate()?;
    let bases: Vec<(usize, u64)> = grid
        .ris_elements
        .iter()
        .flat_map(|&m| grid.seeds.iter().map(move |&s| (m, s)))
        .collect();
    with_workers(jobs, || {
        let baselines: Vec<_> = bases
            .par_iter()
            .map(|&(m, seed)| {
                let mut c = config.clone();
                c.n_ris_elements = m;
                prepare_baseline(&c, seed, options).map_err(|(stage, e)| (c, stage, e))
            })
            .collect();
        let cells: Vec<(u64, usize)> = grid
            .blocklengths
            .iter()
            .flat_map(|&eta| (0..bases.len()).map(move |b| (eta, b)))
            .collect();
        cells
            .par_iter()
            .map(|&(eta, b)| match &baselines[b] {
                Ok(base) => respond(base, eta, options),
                Err((c, stage, e)) => {
                    let mut c = c.clone();
                    c.blocklength = eta;
                    EpisodeResult::failed(&c, bases[b].1, options, *stage, e)
                }
            })
            .collect()
    })
}

pub fn sweep(
    config: &SystemConfig,
    grid: &SweepGrid,
    options: &EpisodeOptions,
    jobs: Option<usize>,
) -> Result<SweepTable, ScenarioError> {
    let episodes = sweep_episodes(config, grid, options, jobs)?;
    Ok(SweepTable {
        rows: episodes
            .iter()
            .map(|e| SweepRow::from_episode(e.blocklength, e.n_ris_elements, e))
            .collect(),
    })
}
