//! Quadratic brute-force first-hitting-time extraction used as a reference.
//!
//! Every index is tried as a start; each candidate scans forward on its own
//! for the first hit. Accepted episodes block candidates up to their hit day.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEpisode {
    pub start: usize,
    pub fht: usize,
    pub volatility: f64,
}

/// `crash = true` uses `<=` comparisons, otherwise `>=`.
pub fn brute_force(r: &[f64], start_level: f64, final_level: f64, crash: bool, crossing: bool) -> Vec<OracleEpisode> {
    let past = |x: f64, level: f64| if crash { x <= level } else { x >= level };
    let mut out = Vec::new();
    let mut blocked_until = 0;
    for t0 in 0..r.len() {
        if t0 < blocked_until {
            continue;
        }
        let entry = past(r[t0], start_level) && (!crossing || t0 == 0 || !past(r[t0 - 1], start_level));
        if !entry || past(r[t0], final_level) {
            continue;
        }
        let hit = (t0 + 1..r.len()).find(|&u| past(r[u], final_level));
        if let Some(h) = hit {
            out.push(OracleEpisode {
                start: t0,
                fht: h - t0,
                volatility: two_pass_std(&r[t0..=h]),
            });
            blocked_until = h + 1;
        }
    }
    out
}

fn two_pass_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}
