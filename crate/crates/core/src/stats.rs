//! Aggregation of episodes into MFHT-vs-volatility curves, histogram PDFs and
//! autocorrelation functions.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fht::{FhtEpisode, ThresholdWindow};
use crate::returns::ReturnSeries;

/// A curve maximum must exceed both edge bins by this factor to count as an
/// interior maximum.
pub const PROMINENCE: f64 = 1.5;

pub const DEFAULT_CURVE_BINS: usize = 30;
pub const DEFAULT_MIN_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    /// Equal-ratio bins spanning the positive data range.
    Log { bins: usize },
    /// Equal-width bins spanning the data range.
    Linear { bins: usize },
    /// Log-spaced bins snapped to half-integers, for integer-valued data.
    IntegerLog { bins: usize },
    /// Explicit, strictly increasing edges; values outside are ignored.
    Edges(Vec<f64>),
}

impl Binning {
    /// Resolves the bin edges for a data set.
    pub fn edges_for(&self, values: &[f64]) -> Result<Vec<f64>> {
        let range = |positive_only: bool| -> Result<(f64, f64)> {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in values {
                if v.is_finite() && (!positive_only || v > 0.0) {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if lo > hi {
                Err(Error::Empty("binnable values"))
            } else {
                Ok((lo, hi))
            }
        };
        let check_bins = |bins: usize| {
            if bins == 0 {
                Err(Error::invalid("bins", "must be >= 1"))
            } else {
                Ok(())
            }
        };
        match self {
            Binning::Log { bins } => {
                check_bins(*bins)?;
                let (lo, hi) = range(true)?;
                if lo == hi {
                    return Ok(vec![lo / 1.05, lo * 1.05]);
                }
                Ok(log_edges(lo, hi, *bins))
            }
            Binning::Linear { bins } => {
                check_bins(*bins)?;
                let (lo, hi) = range(false)?;
                if lo == hi {
                    let half = if lo == 0.0 { 0.5 } else { 0.05 * lo.abs() };
                    return Ok(vec![lo - half, lo + half]);
                }
                let step = (hi - lo) / *bins as f64;
                let mut edges: Vec<f64> = (0..=*bins).map(|k| lo + step * k as f64).collect();
                edges[*bins] = hi;
                Ok(edges)
            }
            Binning::IntegerLog { bins } => {
                check_bins(*bins)?;
                let (lo, hi) = range(false)?;
                let (lo, hi) = (lo.round() - 0.5, hi.round() + 0.5);
                if lo <= 0.0 {
                    return Err(Error::invalid("values", "integer-log binning needs values >= 1"));
                }
                let mut edges: Vec<f64> = log_edges(lo, hi, *bins)
                    .into_iter()
                    .map(|e| (e - 0.5).round() + 0.5)
                    .collect();
                edges.dedup();
                Ok(edges)
            }
            Binning::Edges(edges) => {
                if edges.len() < 2 || edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less)) {
                    return Err(Error::invalid("bin_edges", "need >= 2 strictly increasing edges"));
                }
                Ok(edges.clone())
            }
        }
    }
}

fn log_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let step = (lhi - llo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|k| (llo + step * k as f64).exp()).collect();
    edges[0] = lo;
    edges[bins] = hi;
    edges
}

/// Index of the half-open bin `[e_k, e_{k+1})` holding `v`; the top edge
/// belongs to the last bin.
pub fn bin_index(edges: &[f64], v: f64) -> Option<usize> {
    let last = edges.len().checked_sub(1)?;
    if !(v >= edges[0] && v <= edges[last]) {
        return None;
    }
    let k = edges.partition_point(|&e| e <= v);
    Some((k - 1).min(last - 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfhtCurve {
    pub bin_edges: Vec<f64>,
    /// Mean FHT per bin; `None` for bins below `min_count`.
    pub mfht: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    pub min_count: usize,
    pub window: Option<ThresholdWindow>,
}

impl MfhtCurve {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Indices of bins with a reported MFHT.
    pub fn populated(&self) -> Vec<usize> {
        (0..self.n_bins()).filter(|&k| self.mfht[k].is_some()).collect()
    }

    pub fn bin_bounds(&self, k: usize) -> (f64, f64) {
        (self.bin_edges[k], self.bin_edges[k + 1])
    }
}

pub fn mfht_curve(
    episodes: &[FhtEpisode],
    binning: &Binning,
    min_count: usize,
    window: Option<ThresholdWindow>,
) -> Result<MfhtCurve> {
    if episodes.is_empty() {
        return Err(Error::Empty("episode list"));
    }
    let vols: Vec<f64> = episodes.iter().map(|e| e.volatility).collect();
    let edges = binning.edges_for(&vols)?;
    let n = edges.len() - 1;
    let mut counts = vec![0usize; n];
    // integer sums keep the mean independent of episode order
    let mut sums = vec![0u64; n];
    for e in episodes {
        if let Some(k) = bin_index(&edges, e.volatility) {
            counts[k] += 1;
            sums[k] += e.fht as u64;
        }
    }
    let mfht = counts
        .iter()
        .zip(&sums)
        .map(|(&c, &s)| (c > 0 && c >= min_count).then(|| s as f64 / c as f64))
        .collect();
    Ok(MfhtCurve {
        bin_edges: edges,
        mfht,
        counts,
        min_count,
        window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Maximum {
    pub bin: usize,
    pub mfht: f64,
    /// Neither the first nor the last populated bin.
    pub interior: bool,
}

/// Populated bin with the largest MFHT. Ties go to an interior bin, then to
/// the lower volatility. `None` with fewer than three populated bins.
pub fn locate_maximum(c: &MfhtCurve) -> Option<Maximum> {
    let pop = c.populated();
    if pop.len() < 3 {
        return None;
    }
    let last = pop.len() - 1;
    let mut best: Option<Maximum> = None;
    for (j, &k) in pop.iter().enumerate() {
        let cand = Maximum {
            bin: k,
            mfht: c.mfht[k].expect("populated"),
            interior: j != 0 && j != last,
        };
        best = match best {
            None => Some(cand),
            Some(b) if cand.mfht > b.mfht || (cand.mfht == b.mfht && cand.interior && !b.interior) => {
                Some(cand)
            }
            keep => keep,
        };
    }
    best
}

/// Pass/fail summary of the nonmonotonicity test for one curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub window_id: String,
    pub interior_maximum: bool,
    pub argmax_bin: Option<usize>,
    pub max_mfht: Option<f64>,
    pub edge_ratio_low: Option<f64>,
    pub edge_ratio_high: Option<f64>,
    pub populated_bins: usize,
}

pub fn verdict(c: &MfhtCurve, window_id: &str) -> Verdict {
    let pop = c.populated();
    let Some(max) = locate_maximum(c) else {
        return Verdict {
            window_id: window_id.to_owned(),
            interior_maximum: false,
            argmax_bin: None,
            max_mfht: None,
            edge_ratio_low: None,
            edge_ratio_high: None,
            populated_bins: pop.len(),
        };
    };
    let first = c.mfht[pop[0]].expect("populated");
    let last = c.mfht[pop[pop.len() - 1]].expect("populated");
    let low = max.mfht / first;
    let high = max.mfht / last;
    Verdict {
        window_id: window_id.to_owned(),
        interior_maximum: max.interior && low >= PROMINENCE && high >= PROMINENCE,
        argmax_bin: Some(max.bin),
        max_mfht: Some(max.mfht),
        edge_ratio_low: Some(low),
        edge_ratio_high: Some(high),
        populated_bins: pop.len(),
    }
}

/// Density histogram: `density[k] * width[k]` sums to one over binned values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub density: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn width(&self, k: usize) -> f64 {
        self.bin_edges[k + 1] - self.bin_edges[k]
    }

    /// Bin with the highest density (lowest index on ties).
    pub fn modal_bin(&self) -> usize {
        let mut best = 0;
        for k in 1..self.density.len() {
            if self.density[k] > self.density[best] {
                best = k;
            }
        }
        best
    }
}

pub fn histogram(values: &[f64], binning: &Binning) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::Empty("value list"));
    }
    let edges = binning.edges_for(values)?;
    let n = edges.len() - 1;
    let mut counts = vec![0usize; n];
    for &v in values {
        if let Some(k) = bin_index(&edges, v) {
            counts[k] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::Empty("histogram range"));
    }
    let density = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 / (total as f64 * (edges[k + 1] - edges[k])))
        .collect();
    Ok(Histogram {
        bin_edges: edges,
        density,
        counts,
    })
}

pub fn default_fht_binning() -> Binning {
    Binning::IntegerLog { bins: DEFAULT_CURVE_BINS }
}

pub fn fht_pdf(episodes: &[FhtEpisode], binning: &Binning) -> Result<Histogram> {
    if episodes.is_empty() {
        return Err(Error::Empty("episode list"));
    }
    let values: Vec<f64> = episodes.iter().map(|e| e.fht as f64).collect();
    histogram(&values, binning)
}

/// Histogram of all returns pooled across series.
pub fn return_pdf(rs: &[ReturnSeries], binning: &Binning) -> Result<Histogram> {
    let pooled: Vec<f64> = rs.iter().flat_map(|s| s.returns.iter().copied()).collect();
    histogram(&pooled, binning)
}

/// Histogram of volatility values (episode volatilities or sampled variances).
pub fn vol_pdf(values: &[f64], binning: &Binning) -> Result<Histogram> {
    histogram(values, binning)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfSeries {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
}

/// Sample autocorrelation at lags `0..=max_lag`, normalized by the lag-0
/// autocovariance.
pub fn acf(series: &[f64], max_lag: usize, absolute: bool) -> Result<AcfSeries> {
    if series.len() <= max_lag + 1 {
        return Err(Error::InsufficientData {
            what: "autocorrelation",
            needed: max_lag + 2,
            got: series.len(),
        });
    }
    let xs: Vec<f64> = if absolute {
        series.iter().map(|x| x.abs()).collect()
    } else {
        series.to_vec()
    };
    let mu = xs.iter().sum::<f64>() / xs.len() as f64;
    let dev: Vec<f64> = xs.iter().map(|x| x - mu).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    if c0 <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let values = (0..=max_lag)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                dev[k..].iter().zip(&dev).map(|(a, b)| a * b).sum::<f64>() / c0
            }
        })
        .collect();
    Ok(AcfSeries {
        lags: (0..=max_lag).collect(),
        values,
    })
}

/// Per-lag mean of the autocorrelations of every series.
pub fn mean_acf(rs: &[ReturnSeries], max_lag: usize, absolute: bool) -> Result<AcfSeries> {
    if rs.is_empty() {
        return Err(Error::Empty("return series list"));
    }
    let each: Vec<AcfSeries> = rs
        .par_iter()
        .map(|s| acf(&s.returns, max_lag, absolute))
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; max_lag + 1];
    for a in &each {
        for (acc, v) in values.iter_mut().zip(&a.values) {
            *acc += v;
        }
    }
    for v in &mut values {
        *v /= each.len() as f64;
    }
    Ok(AcfSeries {
        lags: (0..=max_lag).collect(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDifference {
    pub bin: usize,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub empirical: f64,
    pub model: f64,
    /// `model - empirical`
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rebinned: bool,
    pub bins: Vec<BinDifference>,
    pub empirical: Verdict,
    pub model: Verdict,
    /// Model peak bin minus empirical peak bin on the empirical grid.
    pub peak_offset_bins: Option<i64>,
}

/// Moves the populated bins of `c` onto `edges`, each by its bin centre,
/// combining MFHTs as count-weighted means.
pub fn rebin(c: &MfhtCurve, edges: &[f64]) -> MfhtCurve {
    let n = edges.len().saturating_sub(1);
    let mut counts = vec![0usize; n];
    let mut weighted = vec![0.0; n];
    for k in c.populated() {
        let (lo, hi) = c.bin_bounds(k);
        let centre = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if let Some(t) = bin_index(edges, centre) {
            counts[t] += c.counts[k];
            weighted[t] += c.counts[k] as f64 * c.mfht[k].expect("populated");
        }
    }
    let mfht = counts
        .iter()
        .zip(&weighted)
        .map(|(&n, &w)| (n > 0).then(|| w / n as f64))
        .collect();
    MfhtCurve {
        bin_edges: edges.to_vec(),
        mfht,
        counts,
        min_count: c.min_count,
        window: c.window,
    }
}

pub fn compare_curves(
    empirical: &MfhtCurve,
    model: &MfhtCurve,
    empirical_id: &str,
    model_id: &str,
) -> Result<Comparison> {
    if empirical.populated().is_empty() || model.populated().is_empty() {
        return Err(Error::Empty("curve"));
    }
    let rebinned = empirical.bin_edges != model.bin_edges;
    let aligned = if rebinned {
        rebin(model, &empirical.bin_edges)
    } else {
        model.clone()
    };
    let bins: Vec<BinDifference> = (0..empirical.n_bins())
        .filter_map(|k| match (empirical.mfht[k], aligned.mfht[k]) {
            (Some(e), Some(m)) => Some(BinDifference {
                bin: k,
                bin_lo: empirical.bin_edges[k],
                bin_hi: empirical.bin_edges[k + 1],
                empirical: e,
                model: m,
                difference: m - e,
            }),
            _ => None,
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::NoOverlap);
    }
    let peak_offset_bins = match (locate_maximum(empirical), locate_maximum(&aligned)) {
        (Some(e), Some(m)) => Some(m.bin as i64 - e.bin as i64),
        _ => None,
    };
    Ok(Comparison {
        rebinned,
        bins,
        empirical: verdict(empirical, empirical_id),
        model: verdict(model, model_id),
        peak_offset_bins,
    })
}
