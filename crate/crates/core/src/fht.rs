//! First-hitting-time episodes of a return series inside a threshold window.
//!
//! For a crash window the return must first come down to the start threshold
//! `Θi = θi·σ̄` and then, on a later day, reach the final threshold
//! `Θf = θf·σ̄ < Θi`. The number of days in between is the first hitting time
//! (FHT); the population standard deviation of the returns over the episode is
//! its volatility. Rally windows mirror every inequality.
//!
//! Scan rules:
//!
//! * entry (default) is a crossing of `Θi`: `r(t0)` is past `Θi` while
//!   `r(t0 - 1)` is not, or `t0 = 0`; with [`EntryRule::Level`] any day past
//!   `Θi` qualifies;
//! * a day that is already at or past `Θf` on entry yields no episode;
//! * after a hit at day `t` scanning resumes at `t + 1`, so episodes never
//!   overlap;
//! * an episode still open at the end of the series is discarded.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::population_std;
use crate::returns::ReturnSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Crash,
    Rally,
}

impl Direction {
    /// Whether `r` is at or beyond `level` in this direction.
    #[inline]
    pub fn reached(self, r: f64, level: f64) -> bool {
        match self {
            Direction::Crash => r <= level,
            Direction::Rally => r >= level,
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            Direction::Crash => Direction::Rally,
            Direction::Rally => Direction::Crash,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Crash => "crash",
            Direction::Rally => "rally",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crash" => Ok(Direction::Crash),
            "rally" => Ok(Direction::Rally),
            _ => Err(Error::invalid("direction", format!("`{s}` is not crash|rally"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryRule {
    #[default]
    Crossing,
    Level,
}

impl FromStr for EntryRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crossing" => Ok(EntryRule::Crossing),
            "level" => Ok(EntryRule::Level),
            _ => Err(Error::invalid("entry_rule", format!("`{s}` is not crossing|level"))),
        }
    }
}

/// Which days of an episode enter its volatility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolatilitySpan {
    /// Entry day through hit day.
    #[default]
    Both,
    ExcludeEntry,
    ExcludeHit,
}

impl VolatilitySpan {
    fn range(self, start: usize, hit: usize) -> std::ops::Range<usize> {
        match self {
            VolatilitySpan::Both => start..hit + 1,
            VolatilitySpan::ExcludeEntry => start + 1..hit + 1,
            VolatilitySpan::ExcludeHit => start..hit,
        }
    }
}

impl FromStr for VolatilitySpan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(VolatilitySpan::Both),
            "exclude-entry" => Ok(VolatilitySpan::ExcludeEntry),
            "exclude-hit" => Ok(VolatilitySpan::ExcludeHit),
            _ => Err(Error::invalid(
                "vol_span",
                format!("`{s}` is not both|exclude-entry|exclude-hit"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScanOptions {
    pub entry: EntryRule,
    pub span: VolatilitySpan,
}

/// Start and final thresholds as multiples of the market volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdWindow {
    pub theta_i: f64,
    pub theta_f: f64,
    pub sigma_bar: f64,
    pub direction: Direction,
}

impl ThresholdWindow {
    pub fn new(theta_i: f64, theta_f: f64, sigma_bar: f64, direction: Direction) -> Result<Self> {
        let w = ThresholdWindow {
            theta_i,
            theta_f,
            sigma_bar,
            direction,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_i.is_finite() && self.theta_f.is_finite()) {
            return Err(Error::invalid("theta", "thresholds must be finite"));
        }
        if !(self.sigma_bar.is_finite() && self.sigma_bar > 0.0) {
            return Err(Error::invalid("sigma_bar", "must be finite and > 0"));
        }
        let ordered = match self.direction {
            Direction::Crash => self.theta_f < self.theta_i,
            Direction::Rally => self.theta_f > self.theta_i,
        };
        if !ordered {
            return Err(Error::invalid(
                "theta_f",
                format!(
                    "{} window needs theta_f {} theta_i (got {} vs {})",
                    self.direction,
                    if self.direction == Direction::Crash { "<" } else { ">" },
                    self.theta_f,
                    self.theta_i
                ),
            ));
        }
        Ok(())
    }

    pub fn start_level(&self) -> f64 {
        self.theta_i * self.sigma_bar
    }

    pub fn final_level(&self) -> f64 {
        self.theta_f * self.sigma_bar
    }

    /// Same window for the sign-flipped series.
    pub fn mirrored(&self) -> Self {
        ThresholdWindow {
            theta_i: -self.theta_i,
            theta_f: -self.theta_f,
            sigma_bar: self.sigma_bar,
            direction: self.direction.mirrored(),
        }
    }

    /// Stable label, e.g. `crash_-0.10_-1.50`.
    pub fn id(&self) -> String {
        format!("{}_{:+.2}_{:+.2}", self.direction, self.theta_i, self.theta_f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FhtEpisode {
    pub ticker: String,
    pub start_index: usize,
    /// Days from entry to hit, at least 1.
    pub fht: usize,
    pub volatility: f64,
}

impl FhtEpisode {
    pub fn hit_index(&self) -> usize {
        self.start_index + self.fht
    }
}

pub fn extract_episodes(rs: &ReturnSeries, w: &ThresholdWindow) -> Result<Vec<FhtEpisode>> {
    extract_episodes_with(rs, w, ScanOptions::default())
}

pub fn extract_episodes_with(
    rs: &ReturnSeries,
    w: &ThresholdWindow,
    opts: ScanOptions,
) -> Result<Vec<FhtEpisode>> {
    w.validate()?;
    Ok(scan(&rs.returns, w, opts)
        .into_iter()
        .map(|(start, hit)| {
            let span = opts.span.range(start, hit);
            FhtEpisode {
                ticker: rs.ticker.clone(),
                start_index: start,
                fht: hit - start,
                volatility: population_std(&rs.returns[span]),
            }
        })
        .collect())
}

/// Linear scan returning `(entry, hit)` index pairs.
fn scan(r: &[f64], w: &ThresholdWindow, opts: ScanOptions) -> Vec<(usize, usize)> {
    let dir = w.direction;
    let (start, fin) = (w.start_level(), w.final_level());
    let mut out = Vec::new();
    let mut t = 0;
    while t < r.len() {
        let entered = dir.reached(r[t], start)
            && match opts.entry {
                EntryRule::Crossing => t == 0 || !dir.reached(r[t - 1], start),
                EntryRule::Level => true,
            };
        if !entered || dir.reached(r[t], fin) {
            t += 1;
            continue;
        }
        match (t + 1..r.len()).find(|&u| dir.reached(r[u], fin)) {
            Some(hit) => {
                out.push((t, hit));
                t = hit + 1;
            }
            // censored: nothing later can finish either
            None => break,
        }
    }
    out
}

/// Episodes per window, keyed by [`ThresholdWindow::id`].
pub type SweepResult = BTreeMap<String, (ThresholdWindow, Vec<FhtEpisode>)>;

/// Applies every window to every series. Episodes within a window are ordered
/// by series (input order) then start index.
pub fn sweep_windows(
    rs: &[ReturnSeries],
    windows: &[ThresholdWindow],
    opts: ScanOptions,
) -> Result<SweepResult> {
    for w in windows {
        w.validate()?;
    }
    let mut out = SweepResult::new();
    for w in windows {
        let per_series: Vec<Vec<FhtEpisode>> = rs
            .par_iter()
            .map(|s| extract_episodes_with(s, w, opts))
            .collect::<Result<_>>()?;
        out.insert(w.id(), (*w, per_series.into_iter().flatten().collect()));
    }
    Ok(out)
}

/// Built-in window families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowFamily {
    Fig1a,
    Fig1b,
    Fig1c,
    Fig2a,
    Fig2b,
    Fig2c,
}

impl WindowFamily {
    pub const ALL: [WindowFamily; 6] = [
        WindowFamily::Fig1a,
        WindowFamily::Fig1b,
        WindowFamily::Fig1c,
        WindowFamily::Fig2a,
        WindowFamily::Fig2b,
        WindowFamily::Fig2c,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WindowFamily::Fig1a => "fig1a",
            WindowFamily::Fig1b => "fig1b",
            WindowFamily::Fig1c => "fig1c",
            WindowFamily::Fig2a => "fig2a",
            WindowFamily::Fig2b => "fig2b",
            WindowFamily::Fig2c => "fig2c",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            WindowFamily::Fig1a | WindowFamily::Fig1b | WindowFamily::Fig1c => Direction::Crash,
            _ => Direction::Rally,
        }
    }

    /// Multiplier pairs `(θi, θf)` for the crash orientation, in steps of 0.1.
    ///
    /// * `a`: the single window (-0.1, -1.5);
    /// * `b`: fixed width -1.4, θi sliding from +0.9 down to -1.6;
    /// * `c`: fixed θi = -0.1, θf from -0.5 down to -3.0.
    fn crash_thetas(self) -> Vec<(f64, f64)> {
        match self {
            WindowFamily::Fig1a | WindowFamily::Fig2a => vec![(-0.1, -1.5)],
            WindowFamily::Fig1b | WindowFamily::Fig2b => (0..=25)
                .map(|k| ((9 - k) as f64 / 10.0, (-5 - k) as f64 / 10.0))
                .collect(),
            WindowFamily::Fig1c | WindowFamily::Fig2c => {
                (5..=30).map(|k| (-0.1, -(k as f64) / 10.0)).collect()
            }
        }
    }

    pub fn windows(self, sigma_bar: f64) -> Result<Vec<ThresholdWindow>> {
        let sign = match self.direction() {
            Direction::Crash => 1.0,
            Direction::Rally => -1.0,
        };
        self.crash_thetas()
            .into_iter()
            .map(|(ti, tf)| ThresholdWindow::new(sign * ti, sign * tf, sigma_bar, self.direction()))
            .collect()
    }
}

impl FromStr for WindowFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WindowFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid("window", format!("unknown window family `{s}`")))
    }
}
