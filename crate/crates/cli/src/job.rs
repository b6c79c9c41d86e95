//! Fully resolved subcommand invocations and their execution.
//!
//! A [`Job`] holds every parameter that influences the outputs, so it is what
//! the run manifest stores and what `replay` executes again.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use volstab_core::export::{
    read_curve_csv, read_episodes_csv, write_acf_csv, write_curve_csv, write_episodes_csv,
    write_histogram_csv, write_json, write_trajectories_csv,
};
use volstab_core::model::sim_ticker;
use volstab_core::returns::{read_returns_csv, write_returns_csv, write_stats_json};
use volstab_core::stats::{bin_index, compare_curves};
use volstab_core::{
    daily_returns, fht_pdf, load_prices, market_stats, mean_acf, mfht_curve, simulate_ensemble,
    sweep_windows, to_returns, verdict, Binning, Direction, FhtEpisode, ModelParams, PriceLayout,
    ReturnSeries, ScanOptions, SimConfig, ThresholdWindow, Verdict, WindowFamily,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Input {
    Returns(PathBuf),
    Prices { path: PathBuf, layout: PriceLayout },
}

impl Input {
    fn path(&self) -> &Path {
        match self {
            Input::Returns(p) | Input::Prices { path: p, .. } => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowSpec {
    Family(WindowFamily),
    Manual {
        theta_i: f64,
        theta_f: f64,
        direction: Direction,
    },
}

impl WindowSpec {
    pub fn build(&self, sigma_bar: f64) -> volstab_core::Result<Vec<ThresholdWindow>> {
        match *self {
            WindowSpec::Family(f) => f.windows(sigma_bar),
            WindowSpec::Manual {
                theta_i,
                theta_f,
                direction,
            } => Ok(vec![ThresholdWindow::new(theta_i, theta_f, sigma_bar, direction)?]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeJob {
    pub input: Input,
    pub windows: WindowSpec,
    /// Threshold scale; the dataset's own market volatility when `None`.
    pub sigma_bar: Option<f64>,
    pub bins: usize,
    pub min_count: usize,
    pub scan: ScanOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Job {
    Simulate {
        model: ModelParams,
        sim: SimConfig,
        trajectories: bool,
    },
    Analyze(AnalyzeJob),
    Mfht {
        episodes: PathBuf,
        window_id: Option<String>,
        bins: usize,
        min_count: usize,
    },
    FhtPdf {
        episodes: PathBuf,
        window_id: Option<String>,
        bins: usize,
    },
    Acf {
        input: Input,
        max_lag: usize,
        absolute: bool,
    },
    Compare {
        empirical: PathBuf,
        model: PathBuf,
    },
}

/// What a job reports besides its files.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub results: serde_json::Value,
    /// Set when the job ran but found nothing to report.
    pub no_data: Option<String>,
}

impl Outcome {
    fn ok(results: serde_json::Value) -> Self {
        Outcome { results, no_data: None }
    }
}

/// Output directory of one run. Tracks the files written and refuses to
/// write over, or into, any input.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    inputs: Vec<PathBuf>,
    written: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path, inputs: &[&Path]) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::Output {
            path: root.to_path_buf(),
            source: e,
        })?;
        let inputs = inputs
            .iter()
            .map(|p| fs::canonicalize(p).map_err(|e| volstab_core::Error::io(p, e).into()))
            .collect::<Result<_>>()?;
        Ok(RunDir {
            root: root.to_path_buf(),
            inputs,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn file(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        let resolved = fs::canonicalize(&self.root)
            .map_err(|e| volstab_core::Error::io(&self.root, e))?
            .join(name);
        if let Some(input) = self.inputs.iter().find(|i| resolved == **i || resolved.starts_with(i) && i.is_dir()) {
            return Err(CliError::Config(format!(
                "output {} would overwrite input {}",
                path.display(),
                input.display()
            )));
        }
        self.written.push(name.to_owned());
        Ok(path)
    }
}

fn load_series(input: &Input, dir: &mut RunDir) -> Result<Vec<ReturnSeries>> {
    match input {
        Input::Returns(p) => Ok(read_returns_csv(p)?),
        Input::Prices { path, layout } => {
            let report = load_prices(path, *layout)?;
            let rs = report
                .series
                .iter()
                .map(to_returns)
                .collect::<volstab_core::Result<Vec<_>>>()?;
            if rs.is_empty() {
                return Err(volstab_core::Error::Empty("price data").into());
            }
            write_returns_csv(&dir.file("returns.csv")?, &rs)?;
            write_json(
                &dir.file("ingest.json")?,
                &json!({
                    "series": rs.len(),
                    "dropped_rows": report.dropped.iter().map(|(t, n)| json!({"ticker": t, "rows": n})).collect::<Vec<_>>(),
                    "skipped": report.skipped,
                }),
            )?;
            Ok(rs)
        }
    }
}

fn empty_verdict(window_id: &str) -> Verdict {
    Verdict {
        window_id: window_id.to_owned(),
        interior_maximum: false,
        argmax_bin: None,
        max_mfht: None,
        edge_ratio_low: None,
        edge_ratio_high: None,
        populated_bins: 0,
    }
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Simulate { .. } => "simulate",
            Job::Analyze(_) => "analyze",
            Job::Mfht { .. } => "mfht",
            Job::FhtPdf { .. } => "fht-pdf",
            Job::Acf { .. } => "acf",
            Job::Compare { .. } => "compare",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Job::Simulate { sim, .. } => Some(sim.seed),
            _ => None,
        }
    }

    pub fn inputs(&self) -> Vec<&Path> {
        match self {
            Job::Simulate { .. } => vec![],
            Job::Analyze(a) => vec![a.input.path()],
            Job::Mfht { episodes, .. } | Job::FhtPdf { episodes, .. } => vec![episodes],
            Job::Acf { input, .. } => vec![input.path()],
            Job::Compare { empirical, model } => vec![empirical, model],
        }
    }

    pub fn execute(&self, dir: &mut RunDir) -> Result<Outcome> {
        match self {
            Job::Simulate {
                model,
                sim,
                trajectories,
            } => simulate(model, sim, *trajectories, dir),
            Job::Analyze(a) => analyze(a, dir),
            Job::Mfht {
                episodes,
                window_id,
                bins,
                min_count,
            } => mfht(episodes, window_id.as_deref(), *bins, *min_count, dir),
            Job::FhtPdf {
                episodes,
                window_id,
                bins,
            } => pdf(episodes, window_id.as_deref(), *bins, dir),
            Job::Acf {
                input,
                max_lag,
                absolute,
            } => autocorrelation(input, *max_lag, *absolute, dir),
            Job::Compare { empirical, model } => compare(empirical, model, dir),
        }
    }
}

fn simulate(mp: &ModelParams, sim: &SimConfig, trajectories: bool, dir: &mut RunDir) -> Result<Outcome> {
    let trajs = simulate_ensemble(mp, sim)?;
    let escapes: usize = trajs.iter().map(|t| t.escapes).sum();
    // a zero-day run has no returns, only the initial states
    if trajectories || sim.days == 0 {
        write_trajectories_csv(&dir.file("trajectories.csv")?, &trajs)?;
    }
    if sim.days == 0 {
        return Ok(Outcome::ok(json!({
            "n_series": sim.n_series,
            "days": 0,
            "sigma_bar": null,
            "escapes": 0,
        })));
    }
    let rs = trajs
        .iter()
        .enumerate()
        .map(|(i, t)| daily_returns(t, sim_ticker(i)))
        .collect::<volstab_core::Result<Vec<_>>>()?;
    let stats = market_stats(&rs)?;
    write_returns_csv(&dir.file("returns.csv")?, &rs)?;
    write_stats_json(&dir.file("stats.json")?, &stats)?;
    Ok(Outcome::ok(json!({
        "n_series": sim.n_series,
        "days": sim.days,
        "dt": sim.dt(),
        "sigma_bar": stats.sigma_bar,
        "escapes": escapes,
    })))
}

fn analyze(job: &AnalyzeJob, dir: &mut RunDir) -> Result<Outcome> {
    let rs = load_series(&job.input, dir)?;
    let stats = market_stats(&rs)?;
    write_stats_json(&dir.file("stats.json")?, &stats)?;
    let sigma_bar = job.sigma_bar.unwrap_or(stats.sigma_bar);
    let windows = job.windows.build(sigma_bar)?;
    let mut sweep = sweep_windows(&rs, &windows, job.scan)?;
    let groups: Vec<(ThresholdWindow, Vec<FhtEpisode>)> = windows
        .iter()
        .filter_map(|w| sweep.remove(&w.id()))
        .collect();
    write_episodes_csv(&dir.file("episodes.csv")?, &groups)?;

    let binning = Binning::Log { bins: job.bins };
    let mut rows = Vec::with_capacity(groups.len());
    for (w, eps) in &groups {
        let id = w.id();
        let v = if eps.is_empty() {
            empty_verdict(&id)
        } else {
            let c = mfht_curve(eps, &binning, job.min_count, Some(*w))?;
            write_curve_csv(&dir.file(&format!("curve_{id}.csv"))?, &c)?;
            verdict(&c, &id)
        };
        write_json(&dir.file(&format!("verdict_{id}.json"))?, &v)?;
        rows.push((eps.len(), v));
    }
    let total: usize = rows.iter().map(|(n, _)| n).sum();
    let passing = rows.iter().filter(|(_, v)| v.interior_maximum).count();
    write_json(
        &dir.file("verdicts.json")?,
        &rows
            .iter()
            .map(|(n, v)| json!({"episodes": n, "verdict": v}))
            .collect::<Vec<_>>(),
    )?;
    Ok(Outcome {
        results: json!({
            "n_series": rs.len(),
            "sigma_bar_data": stats.sigma_bar,
            "sigma_bar": sigma_bar,
            "windows": rows.len(),
            "episodes": total,
            "interior_maximum": passing,
        }),
        no_data: (total == 0).then(|| "no threshold crossings in any series".to_owned()),
    })
}

fn episode_groups(
    path: &Path,
    window_id: Option<&str>,
) -> Result<Vec<volstab_core::export::EpisodeGroup>> {
    let mut groups = read_episodes_csv(path)?;
    if let Some(id) = window_id {
        groups.retain(|g| g.window_id == id);
        if groups.is_empty() {
            return Err(CliError::Config(format!("no episodes for window `{id}` in {}", path.display())));
        }
    }
    Ok(groups)
}

fn mfht(path: &Path, window_id: Option<&str>, bins: usize, min_count: usize, dir: &mut RunDir) -> Result<Outcome> {
    let groups = episode_groups(path, window_id)?;
    let mut verdicts = Vec::new();
    for g in &groups {
        let c = mfht_curve(&g.episodes, &Binning::Log { bins }, min_count, None)?;
        write_curve_csv(&dir.file(&format!("curve_{}.csv", g.window_id))?, &c)?;
        let v = verdict(&c, &g.window_id);
        write_json(&dir.file(&format!("verdict_{}.json", g.window_id))?, &v)?;
        verdicts.push(v);
    }
    Ok(Outcome {
        no_data: groups.is_empty().then(|| "episode table is empty".to_owned()),
        results: json!({ "verdicts": verdicts }),
    })
}

fn pdf(path: &Path, window_id: Option<&str>, bins: usize, dir: &mut RunDir) -> Result<Outcome> {
    let groups = episode_groups(path, window_id)?;
    let mut summary = Vec::new();
    for g in &groups {
        let h = fht_pdf(&g.episodes, &Binning::IntegerLog { bins })?;
        write_histogram_csv(&dir.file(&format!("fht_pdf_{}.csv", g.window_id))?, &h)?;
        let k = h.modal_bin();
        let in_mode: Vec<f64> = g
            .episodes
            .iter()
            .map(|e| e.fht as f64)
            .filter(|&f| bin_index(&h.bin_edges, f) == Some(k))
            .collect();
        summary.push(json!({
            "window_id": g.window_id,
            "episodes": h.total(),
            "modal_bin": k,
            "modal_fht": in_mode.iter().sum::<f64>() / in_mode.len() as f64,
        }));
    }
    Ok(Outcome {
        no_data: groups.is_empty().then(|| "episode table is empty".to_owned()),
        results: json!({ "pdfs": summary }),
    })
}

fn autocorrelation(input: &Input, max_lag: usize, absolute: bool, dir: &mut RunDir) -> Result<Outcome> {
    let rs = load_series(input, dir)?;
    let a = mean_acf(&rs, max_lag, absolute)?;
    let name = if absolute { "acf_abs.csv" } else { "acf.csv" };
    write_acf_csv(&dir.file(name)?, &a)?;
    let t = rs.iter().map(ReturnSeries::len).sum::<usize>() as f64 / rs.len() as f64;
    let band = 3.0 / t.sqrt();
    let tail = &a.values[1..];
    Ok(Outcome::ok(json!({
        "absolute": absolute,
        "band": band,
        "mean_abs_acf": tail.iter().map(|v| v.abs()).sum::<f64>() / tail.len().max(1) as f64,
        "lags_above_band": tail.iter().filter(|v| **v > band).count(),
    })))
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

fn compare(empirical: &Path, model: &Path, dir: &mut RunDir) -> Result<Outcome> {
    let e = read_curve_csv(empirical)?;
    let m = read_curve_csv(model)?;
    let report = compare_curves(&e, &m, &stem(empirical), &stem(model))?;
    write_json(&dir.file("comparison.json")?, &report)?;
    Ok(Outcome::ok(json!({
        "rebinned": report.rebinned,
        "overlapping_bins": report.bins.len(),
        "peak_offset_bins": report.peak_offset_bins,
        "empirical_interior_maximum": report.empirical.interior_maximum,
        "model_interior_maximum": report.model.interior_maximum,
    })))
}
