//! Small sample-moment helpers shared by the ingest and statistics modules.
//!
//! All dispersion measures use the population convention (divide by `n`).

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation. Returns NaN for an empty slice.
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mu = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - mu) * (x - mu)).sum();
    (ss / xs.len() as f64).sqrt()
}

/// Central moment of order `k`.
fn central_moment(xs: &[f64], mu: f64, k: i32) -> f64 {
    xs.iter().map(|x| (x - mu).powi(k)).sum::<f64>() / xs.len() as f64
}

pub fn skewness(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    let m2 = central_moment(xs, mu, 2);
    central_moment(xs, mu, 3) / m2.powf(1.5)
}

/// Excess kurtosis (zero for a Gaussian).
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    let m2 = central_moment(xs, mu, 2);
    central_moment(xs, mu, 4) / (m2 * m2) - 3.0
}

/// Pearson correlation of two equal-length slices.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}
