use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use volstab_core::stats::{DEFAULT_CURVE_BINS, DEFAULT_MIN_COUNT};
use volstab_core::{Direction, EntryRule, PriceLayout, ScanOptions, VolatilitySpan, WindowFamily};

use crate::config::{ModelArgs, RawConfig};
use crate::error::{CliError, Result};
use crate::job::{AnalyzeJob, Input, Job, WindowSpec};

#[derive(Parser, Debug)]
#[command(name = "volstab", version, about = "Simulate return ensembles and measure their stability through mean first hitting times")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// key = value model configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config file)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: runs/<unix time>-seed<seed>]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads [default: all cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate an ensemble of return series
    Simulate(SimulateArgs),
    /// Extract FHT episodes and MFHT curves with verdicts from returns or prices
    Analyze(AnalyzeArgs),
    /// MFHT curves and verdicts from an episode table
    Mfht(MfhtArgs),
    /// FHT probability densities from an episode table
    FhtPdf(FhtPdfArgs),
    /// Mean autocorrelation of returns or absolute returns
    Acf(AcfArgs),
    /// Compare an empirical and a model MFHT curve
    Compare(CompareArgs),
    /// Re-run the job recorded in a manifest and check its outputs
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also write the daily `series,day,x,v` states
    #[arg(long)]
    pub trajectories: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum Layout {
    /// One `date,close` file per ticker (file or directory)
    PerStock,
    /// One `date,<ticker>...` table
    Wide,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false, id = "source")]
pub struct InputArgs {
    /// `ticker,day_index,return` table
    #[arg(long, group = "source")]
    pub returns: Option<PathBuf>,
    /// Price file or directory of per-ticker files
    #[arg(long, group = "source")]
    pub prices: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SourceArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "per-stock")]
    pub layout: Layout,
}

impl SourceArgs {
    fn resolve(&self) -> Input {
        match (&self.input.returns, &self.input.prices) {
            (Some(r), _) => Input::Returns(r.clone()),
            (None, Some(p)) => Input::Prices {
                path: p.clone(),
                layout: match self.layout {
                    Layout::PerStock => PriceLayout::PerStock,
                    Layout::Wide => PriceLayout::Wide,
                },
            },
            (None, None) => unreachable!("clap enforces one input source"),
        }
    }
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// fig1a | fig1b | fig1c | fig2a | fig2b | fig2c | manual [default: fig1a]
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long = "theta-i", allow_negative_numbers = true)]
    pub theta_i: Option<f64>,
    #[arg(long = "theta-f", allow_negative_numbers = true)]
    pub theta_f: Option<f64>,
    /// crash | rally [default: from the order of the thresholds]
    #[arg(long)]
    pub direction: Option<Direction>,
    /// Log-spaced volatility bins
    #[arg(long, default_value_t = DEFAULT_CURVE_BINS)]
    pub bins: usize,
    #[arg(long = "min-count", default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
    /// crossing | level
    #[arg(long = "entry-rule", default_value = "crossing")]
    pub entry_rule: EntryRule,
    /// both | exclude-entry | exclude-hit
    #[arg(long = "vol-span", default_value = "both")]
    pub vol_span: VolatilitySpan,
    /// Threshold scale [default: market volatility of the input]
    #[arg(long = "sigma-bar")]
    pub sigma_bar: Option<f64>,
}

impl AnalyzeArgs {
    fn window_spec(&self) -> Result<WindowSpec> {
        let manual_flags = self.theta_i.is_some() || self.theta_f.is_some() || self.direction.is_some();
        match self.window.as_deref() {
            None if !manual_flags => Ok(WindowSpec::Family(WindowFamily::Fig1a)),
            None | Some("manual") => {
                let (Some(theta_i), Some(theta_f)) = (self.theta_i, self.theta_f) else {
                    return Err(CliError::Config("a manual window needs --theta-i and --theta-f".into()));
                };
                let direction = self.direction.unwrap_or(if theta_f < theta_i {
                    Direction::Crash
                } else {
                    Direction::Rally
                });
                let spec = WindowSpec::Manual {
                    theta_i,
                    theta_f,
                    direction,
                };
                spec.build(1.0)?;
                Ok(spec)
            }
            Some(name) => {
                if manual_flags {
                    return Err(CliError::Config(format!(
                        "--theta-i/--theta-f/--direction only apply to --window manual, not `{name}`"
                    )));
                }
                Ok(WindowSpec::Family(name.parse()?))
            }
        }
    }
}

#[derive(Args, Debug)]
pub struct EpisodeArgs {
    /// Episode table written by `analyze`
    #[arg(long)]
    pub episodes: PathBuf,
    /// Restrict to one window, e.g. crash_-0.10_-1.50
    #[arg(long = "window-id")]
    pub window_id: Option<String>,
}

#[derive(Args, Debug)]
pub struct MfhtArgs {
    #[command(flatten)]
    pub episodes: EpisodeArgs,
    #[arg(long, default_value_t = DEFAULT_CURVE_BINS)]
    pub bins: usize,
    #[arg(long = "min-count", default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
}

#[derive(Args, Debug)]
pub struct FhtPdfArgs {
    #[command(flatten)]
    pub episodes: EpisodeArgs,
    /// Log-spaced FHT bins (edges snapped to half-integers)
    #[arg(long, default_value_t = DEFAULT_CURVE_BINS)]
    pub bins: usize,
}

#[derive(Args, Debug)]
pub struct AcfArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long = "max-lag", default_value_t = 20)]
    pub max_lag: usize,
    /// Autocorrelation of |r| instead of r
    #[arg(long)]
    pub absolute: bool,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Reference curve CSV; the model curve is rebinned onto its grid
    #[arg(long)]
    pub empirical: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

fn check_bins(bins: usize) -> Result<()> {
    if bins == 0 {
        return Err(CliError::Config("--bins must be at least 1".into()));
    }
    Ok(())
}

/// Merges config file and flags into a resolved job. `None` for `replay`.
pub fn resolve(command: &Command, common: &Common) -> Result<Option<Job>> {
    let job = match command {
        Command::Simulate(s) => {
            let mut raw = match &common.config {
                Some(p) => RawConfig::load(p)?,
                None => RawConfig::default(),
            };
            s.model.apply(&mut raw);
            if let Some(seed) = common.seed {
                raw.set("seed", seed);
            }
            let (model, sim) = raw.resolve()?;
            Job::Simulate {
                model,
                sim,
                trajectories: s.trajectories,
            }
        }
        Command::Analyze(a) => {
            check_bins(a.bins)?;
            if let Some(s) = a.sigma_bar {
                if !(s.is_finite() && s > 0.0) {
                    return Err(CliError::Config("--sigma-bar must be finite and > 0".into()));
                }
            }
            Job::Analyze(AnalyzeJob {
                input: a.source.resolve(),
                windows: a.window_spec()?,
                sigma_bar: a.sigma_bar,
                bins: a.bins,
                min_count: a.min_count,
                scan: ScanOptions {
                    entry: a.entry_rule,
                    span: a.vol_span,
                },
            })
        }
        Command::Mfht(m) => {
            check_bins(m.bins)?;
            Job::Mfht {
                episodes: m.episodes.episodes.clone(),
                window_id: m.episodes.window_id.clone(),
                bins: m.bins,
                min_count: m.min_count,
            }
        }
        Command::FhtPdf(f) => {
            check_bins(f.bins)?;
            Job::FhtPdf {
                episodes: f.episodes.episodes.clone(),
                window_id: f.episodes.window_id.clone(),
                bins: f.bins,
            }
        }
        Command::Acf(a) => Job::Acf {
            input: a.source.resolve(),
            max_lag: a.max_lag,
            absolute: a.absolute,
        },
        Command::Compare(c) => Job::Compare {
            empirical: c.empirical.clone(),
            model: c.model.clone(),
        },
        Command::Replay(_) => return Ok(None),
    };
    Ok(Some(job))
}
