//! Nonlinear Heston model: a return variable `x` moving in the cubic potential
//! `U(x) = m x^3 + n x^2`, driven by a square-root (CIR) variance `v`:
//!
//! ```text
//! dx = -(U'(x) + v/2) dt + sqrt(v) dW1
//! dv = a (b - v) dt + c sqrt(v) dW2
//! ```
//!
//! `W1` and `W2` are independent. The potential has a local minimum at `x = 0`
//! and a barrier at `x = -2n / (3m)`; past the barrier `x` runs off to `-inf`
//! in finite time, so a simulated path that falls below an escape level is
//! re-injected at `x0` (see [`SimConfig::x_escape`]).
//!
//! The variance uses full-truncation Euler: the internal state may dip below
//! zero, only its positive part enters the coefficients, and only the positive
//! part is ever reported.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::returns::ReturnSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub m: f64,
    pub n: f64,
}

impl PotentialParams {
    /// Location of the barrier top, when the potential is metastable.
    pub fn barrier(&self) -> Option<f64> {
        (self.m > 0.0 && self.n > 0.0).then(|| -2.0 * self.n / (3.0 * self.m))
    }

    pub fn is_metastable(&self) -> bool {
        self.barrier().is_some()
    }
}

impl Default for PotentialParams {
    fn default() -> Self {
        PotentialParams { m: 2.0, n: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirParams {
    /// Reversion rate.
    pub a: f64,
    /// Long-run variance level.
    pub b: f64,
    /// Volatility of variance.
    pub c: f64,
    pub v_start: f64,
}

impl CirParams {
    /// `2ab / c^2`; below 1 the variance can reach zero. Infinite when `c = 0`.
    pub fn feller_ratio(&self) -> f64 {
        2.0 * self.a * self.b / (self.c * self.c)
    }
}

impl Default for CirParams {
    fn default() -> Self {
        CirParams {
            a: 2.0,
            b: 0.01,
            c: 0.83,
            v_start: 8.62e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelParams {
    pub potential: PotentialParams,
    pub cir: CirParams,
    pub x0: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("m", self.potential.m),
            ("n", self.potential.n),
            ("a", self.cir.a),
            ("b", self.cir.b),
            ("c", self.cir.c),
            ("v_start", self.cir.v_start),
            ("x0", self.x0),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::invalid(name, format!("must be finite, got {value}")));
            }
        }
        // m = n = 0 (flat potential) is allowed; negative coefficients are not.
        if self.potential.m < 0.0 {
            return Err(Error::invalid("m", "must be >= 0"));
        }
        if self.potential.n < 0.0 {
            return Err(Error::invalid("n", "must be >= 0"));
        }
        if self.cir.a <= 0.0 {
            return Err(Error::invalid("a", "must be > 0"));
        }
        if self.cir.b <= 0.0 {
            return Err(Error::invalid("b", "must be > 0"));
        }
        if self.cir.c < 0.0 {
            return Err(Error::invalid("c", "must be >= 0"));
        }
        if self.cir.v_start < 0.0 {
            return Err(Error::invalid("v_start", "must be >= 0"));
        }
        Ok(())
    }
}

/// Escape handling for paths that leave the metastable well.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EscapeRule {
    /// Re-inject at `x0` once `x` falls below twice the barrier position.
    /// No re-injection when the potential has no barrier.
    #[default]
    Auto,
    Below(f64),
    Never,
}

/// Integration and sampling grid.
///
/// One trading day spans `day_length` model time units and is integrated in
/// `steps_per_day` Euler steps of `dt = day_length / steps_per_day`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub day_length: f64,
    pub steps_per_day: u32,
    pub days: usize,
    pub n_series: usize,
    pub seed: u64,
    pub x_escape: EscapeRule,
}

/// Model time per trading day that brings the simulated market volatility to
/// the empirical scale (about 0.024 per day) with the default parameters.
pub const CALIBRATED_DAY_LENGTH: f64 = 0.07;

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            day_length: CALIBRATED_DAY_LENGTH,
            steps_per_day: 50,
            days: 3000,
            n_series: 1071,
            seed: 20_160_101,
            x_escape: EscapeRule::Auto,
        }
    }
}

impl SimConfig {
    pub fn dt(&self) -> f64 {
        self.day_length / f64::from(self.steps_per_day)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.day_length.is_finite() && self.day_length > 0.0) {
            return Err(Error::invalid("day_length", "must be finite and > 0"));
        }
        if self.steps_per_day == 0 {
            return Err(Error::invalid("steps_per_day", "must be >= 1"));
        }
        if self.n_series == 0 {
            return Err(Error::invalid("n_series", "must be >= 1"));
        }
        if let EscapeRule::Below(level) = self.x_escape {
            if !level.is_finite() {
                return Err(Error::invalid("x_escape", "must be finite"));
            }
        }
        Ok(())
    }

    fn escape_level(&self, p: &ModelParams) -> Option<f64> {
        match self.x_escape {
            EscapeRule::Auto => p.potential.barrier().map(|xb| 2.0 * xb),
            EscapeRule::Below(level) => Some(level),
            EscapeRule::Never => None,
        }
    }
}

/// Daily samples of one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of re-injections after escapes over the barrier.
    pub escapes: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

pub fn potential(x: f64, p: &PotentialParams) -> f64 {
    x * x * (p.m * x + p.n)
}

pub fn potential_gradient(x: f64, p: &PotentialParams) -> f64 {
    x * (3.0 * p.m * x + 2.0 * p.n)
}

/// One full-truncation Euler step of the variance, without the final floor.
/// The simulator carries this internal state between steps.
pub fn cir_step_unfloored(v: f64, p: &CirParams, dt: f64, dw: f64) -> f64 {
    let vp = v.max(0.0);
    v + p.a * (p.b - vp) * dt + p.c * vp.sqrt() * dw
}

/// Variance after one step, floored at zero.
pub fn cir_step(v: f64, p: &CirParams, dt: f64, dw: f64) -> f64 {
    cir_step_unfloored(v, p, dt, dw).max(0.0)
}

/// One Euler-Maruyama step of the return equation; `v` must be non-negative.
pub fn heston_step(x: f64, v: f64, mp: &ModelParams, dt: f64, dw1: f64) -> f64 {
    x - (potential_gradient(x, &mp.potential) + 0.5 * v) * dt + v.sqrt() * dw1
}

/// Independent Wiener increment pairs `(dW1, dW2)` for one series.
///
/// The stream is a ChaCha8 generator keyed by the master seed, with the series
/// index as its stream id, so every series can be regenerated in isolation.
pub struct WienerPairs {
    rng: ChaCha8Rng,
    sqrt_dt: f64,
}

impl WienerPairs {
    pub fn new(seed: u64, series_index: usize, dt: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(series_index as u64);
        WienerPairs {
            rng,
            sqrt_dt: dt.sqrt(),
        }
    }
}

impl Iterator for WienerPairs {
    type Item = (f64, f64);

    #[inline]
    fn next(&mut self) -> Option<(f64, f64)> {
        let z1: f64 = StandardNormal.sample(&mut self.rng);
        let z2: f64 = StandardNormal.sample(&mut self.rng);
        Some((z1 * self.sqrt_dt, z2 * self.sqrt_dt))
    }
}

pub fn simulate_series(mp: &ModelParams, cfg: &SimConfig, series_index: usize) -> Result<Trajectory> {
    let noise = WienerPairs::new(cfg.seed, series_index, cfg.dt());
    simulate_with_increments(mp, cfg, series_index, noise)
}

/// Integrates one path on the `cfg` grid using caller-supplied `(dW1, dW2)`
/// increments, which must already be scaled to `cfg.dt()`.
pub fn simulate_with_increments<I>(
    mp: &ModelParams,
    cfg: &SimConfig,
    series_index: usize,
    mut increments: I,
) -> Result<Trajectory>
where
    I: Iterator<Item = (f64, f64)>,
{
    mp.validate()?;
    cfg.validate()?;
    if series_index >= cfg.n_series {
        return Err(Error::invalid(
            "series_index",
            format!("{series_index} out of range for {} series", cfg.n_series),
        ));
    }
    let dt = cfg.dt();
    let escape = cfg.escape_level(mp);

    let mut xs = Vec::with_capacity(cfg.days + 1);
    let mut vs = Vec::with_capacity(cfg.days + 1);
    let mut x = mp.x0;
    let mut v = mp.cir.v_start;
    let mut escapes = 0;
    xs.push(x);
    vs.push(v.max(0.0));
    for day in 1..=cfg.days {
        for _ in 0..cfg.steps_per_day {
            let (dw1, dw2) = increments
                .next()
                .ok_or_else(|| Error::invalid("increments", "noise stream exhausted"))?;
            let vp = v.max(0.0);
            x = heston_step(x, vp, mp, dt, dw1);
            v = cir_step_unfloored(v, &mp.cir, dt, dw2);
            if escape.is_some_and(|level| x < level) {
                x = mp.x0;
                escapes += 1;
            }
        }
        if !x.is_finite() {
            return Err(Error::Diverged {
                series: series_index,
                day,
            });
        }
        xs.push(x);
        vs.push(v.max(0.0));
    }
    Ok(Trajectory {
        x: xs,
        v: vs,
        escapes,
    })
}

/// Sums `factor` consecutive increment pairs, turning a fine-grid stream into
/// the Brownian increments of a grid `factor` times coarser.
pub struct Coarsened<I> {
    inner: I,
    factor: usize,
}

impl<I> Coarsened<I> {
    pub fn new(inner: I, factor: usize) -> Self {
        Coarsened { inner, factor }
    }
}

impl<I: Iterator<Item = (f64, f64)>> Iterator for Coarsened<I> {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<(f64, f64)> {
        let mut acc = (0.0, 0.0);
        for _ in 0..self.factor {
            let (a, b) = self.inner.next()?;
            acc.0 += a;
            acc.1 += b;
        }
        Some(acc)
    }
}

/// Simulates all `cfg.n_series` paths in parallel; output is in index order and
/// independent of scheduling.
pub fn simulate_ensemble(mp: &ModelParams, cfg: &SimConfig) -> Result<Vec<Trajectory>> {
    mp.validate()?;
    cfg.validate()?;
    (0..cfg.n_series)
        .into_par_iter()
        .map(|i| simulate_series(mp, cfg, i))
        .collect()
}

/// One-day increments of `x`, used as the simulated daily returns.
pub fn daily_returns(t: &Trajectory, ticker: impl Into<String>) -> Result<ReturnSeries> {
    if t.x.len() < 2 {
        return Err(Error::InsufficientData {
            what: "trajectory",
            needed: 2,
            got: t.x.len(),
        });
    }
    let returns = t.x.windows(2).map(|w| w[1] - w[0]).collect();
    ReturnSeries::new(ticker, returns)
}

/// Ticker label used for simulated series.
pub fn sim_ticker(index: usize) -> String {
    format!("sim{index:05}")
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: PotentialParams = PotentialParams { m: 2.0, n: 3.0 };

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn potential_values() {
        assert_eq!(potential(0.0, &P), 0.0);
        assert_eq!(potential(-1.0, &P), 1.0);
        assert_eq!(potential(1.0, &P), 5.0);
    }

    #[test]
    fn gradient_values() {
        assert_eq!(potential_gradient(0.0, &P), 0.0);
        assert_eq!(P.barrier(), Some(-1.0));
        assert_eq!(potential_gradient(-1.0, &P), 0.0);
        assert_eq!(potential_gradient(1.0, &P), 12.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let h = 1e-5;
        for i in -200..=200 {
            let x = i as f64 / 100.0;
            let fd = (potential(x + h, &P) - potential(x - h, &P)) / (2.0 * h);
            let g = potential_gradient(x, &P);
            let scale = g.abs().max(1.0);
            assert!((fd - g).abs() / scale < 1e-6, "x={x}: fd={fd} g={g}");
        }
    }

    #[test]
    fn cir_step_cases() {
        let fixed = CirParams {
            a: 2.0,
            b: 0.01,
            c: 0.0,
            v_start: 0.0,
        };
        assert_eq!(cir_step(0.01, &fixed, 0.37, 5.0), 0.01);
        assert!(close(cir_step(0.0, &fixed, 0.01, 0.0), 0.0002, 1e-18));
        let noisy = CirParams::default();
        assert_eq!(cir_step(1e-6, &noisy, 0.01, -1.0), 0.0);
        assert!(cir_step_unfloored(1e-6, &noisy, 0.01, -1.0) < 0.0);
    }

    #[test]
    fn negative_internal_state_only_drifts_up() {
        let p = CirParams::default();
        let v = cir_step_unfloored(-1e-3, &p, 0.01, 10.0);
        assert!(close(v, -1e-3 + p.a * p.b * 0.01, 1e-18));
    }

    #[test]
    fn heston_step_cases() {
        let mp = ModelParams::default();
        assert_eq!(heston_step(0.0, 0.0, &mp, 0.01, 0.3), 0.0);
        assert!(close(heston_step(0.0, 0.01, &mp, 0.01, 0.0), -5e-5, 1e-18));
        assert!(close(heston_step(0.1, 0.0, &mp, 0.01, 0.0), 0.0934, 1e-15));
    }

    #[test]
    fn feller_ratio_of_defaults() {
        let r = CirParams::default().feller_ratio();
        assert!(close(r, 0.04 / 0.6889, 1e-12));
        assert!(r < 1.0);
    }

    #[test]
    fn zero_days_gives_initial_state_only() {
        let cfg = SimConfig {
            days: 0,
            n_series: 1,
            ..SimConfig::default()
        };
        let t = simulate_series(&ModelParams::default(), &cfg, 0).unwrap();
        assert_eq!(t.x, vec![0.0]);
        assert_eq!(t.v, vec![8.62e-5]);
        assert!(matches!(
            daily_returns(&t, "x"),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = SimConfig {
            days: 5,
            n_series: 2,
            ..SimConfig::default()
        };
        let mut mp = ModelParams::default();
        mp.cir.c = f64::NAN;
        assert!(simulate_series(&mp, &cfg, 0).is_err());
        assert!(simulate_series(&ModelParams::default(), &cfg, 2).is_err());
        let bad = SimConfig {
            steps_per_day: 0,
            ..cfg
        };
        assert!(simulate_series(&ModelParams::default(), &bad, 0).is_err());
    }

    #[test]
    fn deterministic_per_series() {
        let cfg = SimConfig {
            days: 50,
            n_series: 4,
            steps_per_day: 10,
            ..SimConfig::default()
        };
        let mp = ModelParams::default();
        let a = simulate_series(&mp, &cfg, 3).unwrap();
        let b = simulate_series(&mp, &cfg, 3).unwrap();
        assert_eq!(a, b);
        let ens = simulate_ensemble(&mp, &cfg).unwrap();
        assert_eq!(ens[3], a);
        assert_ne!(ens[2], a);
    }

    #[test]
    fn first_differences() {
        let t = Trajectory {
            x: vec![0.0, 0.01, 0.01],
            v: vec![0.0; 3],
            escapes: 0,
        };
        let r = daily_returns(&t, "s").unwrap();
        assert_eq!(r.returns, vec![0.01, 0.0]);
        let t = Trajectory {
            x: vec![0.3; 7],
            v: vec![0.0; 7],
            escapes: 0,
        };
        let r = daily_returns(&t, "s").unwrap();
        assert_eq!(r.len(), 6);
        assert!(r.returns.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn escape_rule_levels() {
        let mp = ModelParams::default();
        let cfg = SimConfig::default();
        assert_eq!(cfg.escape_level(&mp), Some(-2.0));
        let flat = ModelParams {
            potential: PotentialParams { m: 0.0, n: 0.0 },
            ..mp
        };
        assert_eq!(cfg.escape_level(&flat), None);
        let never = SimConfig {
            x_escape: EscapeRule::Never,
            ..cfg
        };
        assert_eq!(never.escape_level(&mp), None);
    }
}
