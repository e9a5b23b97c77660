//! Library implementations of the `cfs` subcommands.

use rayon::prelude::*;
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::action::causal_action;
use crate::error::{Error, Result};
use crate::geometry::{plot_rows, write_plot_csv, PlotRow};
use crate::gradient::{fd_check, GradCheckReport};
use crate::io::{
    IsoEntry, OracleComparison, OracleInfo, Origin, ResultFile, RunSpec, SeedOutcome, StoredConfiguration,
};
use crate::operators::Configuration;
use crate::optimize::{multi_restart, OptimizerSettings};
use crate::oracles::{
    asymptotic_table, dirac2d_config, dirac4d_config, iso_lagrangian, orthogonal_min_config, DiracSphere,
};
use crate::parametrize::{decode, init_random, Shape, UnconstrainedParams};

fn attach_configuration(file: &mut ResultFile, config: &Configuration, pairs: bool) -> Result<()> {
    let report = causal_action(config)?;
    file.action = Some(report.action);
    file.boundedness = Some(report.boundedness);
    file.class_counts = Some(report.class_counts());
    if pairs {
        file.pair_lagrangians = Some(report.pair_lagrangians.clone());
    }
    file.configuration = Some(StoredConfiguration::from_configuration(config));
    Ok(())
}

fn compare_with_table(file: &mut ResultFile) {
    if let Some(s) = file.action {
        file.oracle_comparison
            .extend(asymptotic_table(file.n, file.f, file.m).iter().map(|p| OracleComparison::new(p, s)));
    }
}

/// Path of the plot export that accompanies a result file.
pub fn plot_path_for(result: &Path) -> PathBuf {
    result.with_extension("plot.csv")
}

fn write_plot(config: &Configuration, ref_index: usize, rescale: Option<f64>, out: &Path) -> Result<Vec<PlotRow>> {
    let rows = plot_rows(config, ref_index, rescale)?;
    write_plot_csv(&rows, BufWriter::new(File::create(out)?))?;
    Ok(rows)
}

pub fn cmd_minimize(spec: &RunSpec) -> Result<ResultFile> {
    spec.validate()?;
    let start = Instant::now();
    let shape = Shape::new(spec.n, spec.f, spec.m)?;
    let restarts = multi_restart(shape, &spec.seeds, &spec.settings)?;
    let mut file = ResultFile::empty(Origin::Optimizer, spec.n, spec.f, spec.m);
    file.spec = Some(spec.clone());
    file.best_index = Some(restarts.best_index);
    file.runs = spec
        .seeds
        .iter()
        .zip(&restarts.results)
        .map(|(&seed, r)| match r {
            Ok(run) => {
                let mut run = run.clone();
                if !spec.export_trace {
                    run.action_trace.clear();
                }
                SeedOutcome { seed, result: Some(run), error: None }
            }
            Err(e) => SeedOutcome { seed, result: None, error: Some(e.clone()) },
        })
        .collect();
    let best = restarts.best();
    let config = decode(&UnconstrainedParams::from_flat(shape, &best.final_params)?)?;
    attach_configuration(&mut file, &config, spec.export_pairs)?;
    compare_with_table(&mut file);
    file.wall_time_seconds = start.elapsed().as_secs_f64();
    if let Some(path) = &spec.output_path {
        file.save(path)?;
        if spec.export_plot && spec.n == 1 {
            write_plot(&config, 0, None, &plot_path_for(path))?;
        }
    }
    Ok(file)
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleRequest {
    Dirac2d { m: usize, seed: u64 },
    Dirac4d { m: usize, seed: u64 },
    Orthogonal { n: usize, f: usize, m: usize },
    /// Every pair from the grid of Bloch lengths.
    Iso { taus: Vec<f64> },
}

fn sphere_file(kind: &str, d: &DiracSphere, n: usize, f: usize, m: usize, seed: u64) -> Result<ResultFile> {
    let mut file = ResultFile::empty(Origin::Oracle, n, f, m);
    file.oracle = Some(OracleInfo {
        kind: kind.into(),
        seed: Some(seed),
        tau: Some(d.tau),
        min_angle: Some(d.sphere.min_angle),
    });
    attach_configuration(&mut file, &d.config, false)?;
    let s = file.action.unwrap_or(f64::NAN);
    file.oracle_comparison.push(OracleComparison::new(&d.exact, s));
    file.oracle_comparison.push(OracleComparison::new(&d.asymptotic, s));
    Ok(file)
}

pub fn cmd_oracle(request: &OracleRequest) -> Result<ResultFile> {
    let start = Instant::now();
    let mut file = match request {
        OracleRequest::Dirac2d { m, seed } => sphere_file("dirac2d", &dirac2d_config(*m, *seed)?, 1, 2, *m, *seed)?,
        OracleRequest::Dirac4d { m, seed } => sphere_file("dirac4d", &dirac4d_config(*m, *seed)?, 2, 4, *m, *seed)?,
        OracleRequest::Orthogonal { n, f, m } => {
            let config = orthogonal_min_config(*n, *f, *m)?;
            let mut file = ResultFile::empty(Origin::Oracle, *n, *f, *m);
            file.oracle = Some(OracleInfo { kind: "orthogonal".into(), seed: None, tau: None, min_angle: None });
            attach_configuration(&mut file, &config, false)?;
            compare_with_table(&mut file);
            file
        }
        OracleRequest::Iso { taus } => {
            if let Some(&t) = taus.iter().find(|&&t| !(t >= 1.0)) {
                return Err(Error::TauBelowOne { tau: t });
            }
            let mut file = ResultFile::empty(Origin::Oracle, 1, 2, 0);
            file.oracle = Some(OracleInfo { kind: "iso".into(), seed: None, tau: None, min_angle: None });
            let table: Vec<IsoEntry> = taus
                .iter()
                .flat_map(|&a| taus.iter().map(move |&b| IsoEntry { tau: a, tau2: b, value: iso_lagrangian(a, b) }))
                .collect();
            file.action = table.iter().map(|e| e.value).reduce(f64::min);
            file.iso_table = Some(table);
            file
        }
    };
    file.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(file)
}

pub fn cmd_plot(result_path: &Path, ref_index: usize, rescale: Option<f64>, out: &Path) -> Result<Vec<PlotRow>> {
    let file = ResultFile::load(result_path)?;
    if file.n != 1 {
        return Err(Error::NotSpinOne { n: file.n });
    }
    write_plot(&file.config()?, ref_index, rescale, out)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckEntry {
    pub seed: u64,
    pub report: GradCheckReport,
}

/// Sampling widths for gradient-check points, away from degenerate spectra.
pub const CHECK_SIGMA_C: f64 = 0.3;
pub const CHECK_SIGMA_MU: f64 = 0.1;
pub const CHECK_MU0: f64 = 0.5;

pub fn cmd_check_grad(shape: Shape, seeds: &[u64], step: f64) -> Result<Vec<GradCheckEntry>> {
    seeds
        .iter()
        .map(|&seed| {
            let p = init_random(shape, seed, CHECK_SIGMA_C, CHECK_SIGMA_MU, CHECK_MU0)?;
            Ok(GradCheckEntry { seed, report: fd_check(&p, step)? })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub ns: Vec<usize>,
    pub fs: Vec<usize>,
    pub ms: Vec<usize>,
    /// Use `f = m` for every cell instead of the `fs` list.
    pub f_equals_m: bool,
}

impl SweepGrid {
    pub fn cells(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for &n in &self.ns {
            for &m in &self.ms {
                if self.f_equals_m {
                    out.push((n, m, m));
                } else {
                    out.extend(self.fs.iter().map(|&f| (n, f, m)));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub f: usize,
    pub m: usize,
    pub best_action: Option<f64>,
    pub oracle_action: Option<f64>,
    pub ratio: Option<f64>,
    pub boundedness: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log S` against `log m`, when `m` varies.
    pub slope_vs_m: Option<f64>,
    pub slope_vs_f: Option<f64>,
}

/// Slope of the least-squares line through `(x, y)`; `None` with fewer than two distinct `x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if pts.len() < 2 || sxx < 1e-300 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

pub const SUMMARY_HEADER: &str = "n,f,m,best_action,oracle_action,ratio,boundedness,error";

pub fn cell_file_name(n: usize, f: usize, m: usize) -> String {
    format!("n{n}_f{f}_m{m}.json")
}

pub fn cmd_sweep(grid: &SweepGrid, seeds: &[u64], settings: &OptimizerSettings, out_dir: &Path) -> Result<SweepSummary> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    settings.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(n, f, m)| {
            let mut spec = RunSpec::new(n, f, m, seeds.to_vec());
            spec.settings = settings.clone();
            spec.output_path = Some(out_dir.join(cell_file_name(n, f, m)));
            let oracle_action = asymptotic_table(n, f, m).first().map(|p| p.action);
            match cmd_minimize(&spec) {
                Ok(file) => {
                    let s = file.action;
                    SweepRow {
                        n,
                        f,
                        m,
                        best_action: s,
                        oracle_action,
                        ratio: s.zip(oracle_action).map(|(a, b)| a / b),
                        boundedness: file.boundedness,
                        error: None,
                    }
                }
                Err(e) => {
                    log::warn!("sweep cell n={n} f={f} m={m} failed: {e}");
                    SweepRow {
                        n,
                        f,
                        m,
                        best_action: None,
                        oracle_action,
                        ratio: None,
                        boundedness: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    let fit = |key: fn(&SweepRow) -> usize| {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.best_action.map(|s| (key(r) as f64, s)))
            .collect();
        loglog_slope(&pts)
    };
    let summary = SweepSummary {
        slope_vs_m: fit(|r| r.m),
        slope_vs_f: fit(|r| r.f),
        rows,
    };
    write_summary(&summary, out_dir)?;
    Ok(summary)
}

fn write_summary(summary: &SweepSummary, out_dir: &Path) -> Result<()> {
    use std::io::Write;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    let mut w = BufWriter::new(File::create(out_dir.join("summary.csv"))?);
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in &summary.rows {
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.n,
            r.f,
            r.m,
            opt(r.best_action),
            opt(r.oracle_action),
            opt(r.ratio),
            opt(r.boundedness),
            err
        )?;
    }
    w.flush()?;
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(out_dir.join("summary.json"), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0].iter().map(|&m| (m, 0.5 / m)).collect();
        assert!((loglog_slope(&pts).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&[(2.0, 1.0), (2.0, 3.0)]), None);
        assert_eq!(loglog_slope(&[(2.0, 1.0)]), None);
    }

    #[test]
    fn grid_cells() {
        let g = SweepGrid { ns: vec![1], fs: vec![], ms: vec![2, 4], f_equals_m: true };
        assert_eq!(g.cells(), vec![(1, 2, 2), (1, 4, 4)]);
        let g = SweepGrid { ns: vec![1], fs: vec![2, 4], ms: vec![2], f_equals_m: false };
        assert_eq!(g.cells(), vec![(1, 2, 2), (1, 4, 2)]);
    }

    #[test]
    fn oracle_files() {
        let f = cmd_oracle(&OracleRequest::Orthogonal { n: 2, f: 8, m: 2 }).unwrap();
        assert!((f.action.unwrap() - 1.0 / 32.0).abs() < 1e-12);
        let f = cmd_oracle(&OracleRequest::Iso { taus: vec![1.0, 1.5, 2.0] }).unwrap();
        assert!((f.action.unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(f.iso_table.unwrap().len(), 9);
        let f = cmd_oracle(&OracleRequest::Dirac2d { m: 6, seed: 0 }).unwrap();
        assert!(f.oracle_comparison[0].delta.abs() < 1e-10);
        assert!(cmd_oracle(&OracleRequest::Iso { taus: vec![0.5] }).is_err());
    }

    #[test]
    fn minimize_small_case() {
        let mut spec = RunSpec::new(1, 2, 2, vec![0, 1, 2]);
        spec.export_trace = true;
        let f = cmd_minimize(&spec).unwrap();
        assert!((f.action.unwrap() - 0.25).abs() < 1e-4);
        assert_eq!(f.runs.len(), 3);
        assert!(!f.runs[0].result.as_ref().unwrap().action_trace.is_empty());
    }
}
