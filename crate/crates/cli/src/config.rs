//! Model configuration: a `key = value` file merged with command-line flags.
//!
//! Recognised keys: `m n a b c v_start x0 dt steps_per_day day_length days
//! n_series seed x_escape`. `dt` is an alternative to `day_length`
//! (`day_length = dt * steps_per_day`); giving both inconsistently is an error.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use clap::Args;
use volstab_core::{EscapeRule, ModelParams, SimConfig};

use crate::error::{CliError, Result};

pub const KEYS: [&str; 14] = [
    "m",
    "n",
    "a",
    "b",
    "c",
    "v_start",
    "x0",
    "dt",
    "steps_per_day",
    "day_length",
    "days",
    "n_series",
    "seed",
    "x_escape",
];

/// Raw `key -> value` pairs; a later `set` replaces an earlier value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig(BTreeMap<String, String>);

impl RawConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| CliError::ConfigFile {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(err(format!("empty value for `{key}`")));
            }
            if map.insert(key.to_owned(), value.to_owned()).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
        }
        Ok(RawConfig(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| volstab_core::Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_owned(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    /// Resolves into validated model and simulation parameters, filling
    /// unspecified keys from the defaults.
    pub fn resolve(&self) -> Result<(ModelParams, SimConfig)> {
        let mut mp = ModelParams::default();
        let mut sim = SimConfig::default();
        macro_rules! take {
            ($key:literal, $slot:expr) => {
                if let Some(v) = self.num($key)? {
                    $slot = v;
                }
            };
        }
        take!("m", mp.potential.m);
        take!("n", mp.potential.n);
        take!("a", mp.cir.a);
        take!("b", mp.cir.b);
        take!("c", mp.cir.c);
        take!("v_start", mp.cir.v_start);
        take!("x0", mp.x0);
        take!("steps_per_day", sim.steps_per_day);
        take!("day_length", sim.day_length);
        take!("days", sim.days);
        take!("n_series", sim.n_series);
        take!("seed", sim.seed);
        if let Some(dt) = self.num::<f64>("dt")? {
            let implied = dt * f64::from(sim.steps_per_day);
            if self.get("day_length").is_some() && (implied - sim.day_length).abs() > 1e-12 * implied.abs() {
                return Err(CliError::Config(format!(
                    "dt * steps_per_day = {implied} contradicts day_length = {}",
                    sim.day_length
                )));
            }
            sim.day_length = implied;
        }
        if let Some(v) = self.get("x_escape") {
            sim.x_escape = parse_escape(v)?;
        }
        mp.validate()?;
        sim.validate()?;
        Ok((mp, sim))
    }
}

pub fn parse_escape(v: &str) -> Result<EscapeRule> {
    match v {
        "auto" => Ok(EscapeRule::Auto),
        "never" => Ok(EscapeRule::Never),
        other => other
            .parse()
            .map(EscapeRule::Below)
            .map_err(|_| CliError::Config(format!("`x_escape`: expected auto, never or a number, got `{other}`"))),
    }
}

/// Flags overriding config-file keys; each is named after its key.
#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub m: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub n: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long = "v_start", alias = "v-start", allow_negative_numbers = true)]
    pub v_start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub x0: Option<f64>,
    /// Euler step in model time; sets day_length = dt * steps_per_day
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "steps_per_day", alias = "steps-per-day")]
    pub steps_per_day: Option<u32>,
    /// Model time units per trading day
    #[arg(long = "day_length", alias = "day-length")]
    pub day_length: Option<f64>,
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long = "n_series", alias = "n-series")]
    pub n_series: Option<usize>,
    /// auto | never | <level>
    #[arg(long = "x_escape", alias = "x-escape", allow_negative_numbers = true)]
    pub x_escape: Option<String>,
}

impl ModelArgs {
    pub fn apply(&self, raw: &mut RawConfig) {
        macro_rules! put {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    raw.set(stringify!($field), v);
                })*
            };
        }
        put!(m, n, a, b, c, v_start, x0, dt, steps_per_day, day_length, days, n_series, x_escape);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RawConfig> {
        RawConfig::parse(text, Path::new("t.conf"))
    }

    #[test]
    fn comments_and_blank_lines() {
        let raw = parse("# paper values\nm = 2\n\nn=3 # trailing\n").unwrap();
        assert_eq!(raw.get("m"), Some("2"));
        assert_eq!(raw.get("n"), Some("3"));
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(matches!(parse("q = 1"), Err(CliError::ConfigFile { line: 1, .. })));
        assert!(matches!(parse("m = 1\nm = 2"), Err(CliError::ConfigFile { line: 2, .. })));
        assert!(matches!(parse("m 1"), Err(CliError::ConfigFile { .. })));
    }

    #[test]
    fn defaults_when_empty() {
        let (mp, sim) = parse("").unwrap().resolve().unwrap();
        assert_eq!(mp, ModelParams::default());
        assert_eq!(sim, SimConfig::default());
    }

    #[test]
    fn flags_override_file() {
        let mut raw = parse("days = 10\nseed = 4").unwrap();
        ModelArgs {
            days: Some(20),
            ..Default::default()
        }
        .apply(&mut raw);
        let (_, sim) = raw.resolve().unwrap();
        assert_eq!((sim.days, sim.seed), (20, 4));
    }

    #[test]
    fn dt_sets_day_length() {
        let (_, sim) = parse("dt = 0.01\nsteps_per_day = 5").unwrap().resolve().unwrap();
        assert!((sim.day_length - 0.05).abs() < 1e-15);
        assert!(parse("dt = 0.01\nsteps_per_day = 5\nday_length = 1").unwrap().resolve().is_err());
        assert!(parse("dt = 0.01\nsteps_per_day = 5\nday_length = 0.05").unwrap().resolve().is_ok());
    }

    #[test]
    fn invalid_values() {
        assert!(matches!(parse("a = x").unwrap().resolve(), Err(CliError::Config(_))));
        assert!(matches!(
            parse("a = -1").unwrap().resolve(),
            Err(CliError::Core(volstab_core::Error::InvalidParameter { .. }))
        ));
        assert_eq!(parse_escape("-3").unwrap(), EscapeRule::Below(-3.0));
        assert!(parse_escape("soon").is_err());
    }
}
