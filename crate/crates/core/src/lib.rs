//! Stability of return series measured by mean first hitting times.
//!
//! The crate simulates ensembles from a nonlinear Heston model ([`model`]),
//! ingests empirical price data ([`returns`]), extracts first-hitting-time
//! episodes for threshold windows ([`fht`]) and aggregates them into
//! MFHT-vs-volatility curves, PDFs and autocorrelations ([`stats`]).

pub mod error;
pub mod export;
pub mod fht;
pub mod model;
pub mod moments;
pub mod returns;
pub mod stats;

pub use error::{Error, Result};
pub use fht::{
    extract_episodes, extract_episodes_with, sweep_windows, Direction, EntryRule, FhtEpisode,
    ScanOptions, ThresholdWindow, VolatilitySpan, WindowFamily,
};
pub use model::{
    daily_returns, simulate_ensemble, simulate_series, simulate_with_increments, CirParams,
    Coarsened, EscapeRule, ModelParams, PotentialParams, SimConfig, Trajectory, WienerPairs,
};
pub use returns::{load_prices, market_stats, to_returns, MarketStats, PriceLayout, PriceSeries, ReturnSeries};
pub use stats::{
    acf, fht_pdf, locate_maximum, mean_acf, mfht_curve, return_pdf, verdict, vol_pdf, AcfSeries,
    Binning, Histogram, MfhtCurve, Verdict,
};
