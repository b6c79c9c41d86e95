//! Sweeps the model time per trading day and prints the simulated market
//! volatility together with the crash/rally MFHT verdicts.
//!
//! cargo run --release -p volstab-core --example calibrate -- 0.05 0.07 0.1

use std::time::Instant;

use volstab_core::fht::WindowFamily;
use volstab_core::stats::{DEFAULT_CURVE_BINS, DEFAULT_MIN_COUNT};
use volstab_core::{
    daily_returns, market_stats, mean_acf, mfht_curve, simulate_ensemble, sweep_windows, verdict,
    Binning, ModelParams, ScanOptions, SimConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lengths: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse())
        .collect::<Result<_, _>>()?;
    let lengths = if lengths.is_empty() { vec![SimConfig::default().day_length] } else { lengths };
    let mp = ModelParams::default();
    for day_length in lengths {
        let cfg = SimConfig {
            day_length,
            ..SimConfig::default()
        };
        let t0 = Instant::now();
        let paths = simulate_ensemble(&mp, &cfg)?;
        let escapes: usize = paths.iter().map(|p| p.escapes).sum();
        let rs = paths
            .iter()
            .enumerate()
            .map(|(i, p)| daily_returns(p, format!("s{i}")))
            .collect::<Result<Vec<_>, _>>()?;
        let stats = market_stats(&rs)?;
        println!(
            "day_length {day_length}: sigma_bar {:.5}, escapes {escapes}, {:.1?}",
            stats.sigma_bar,
            t0.elapsed()
        );
        let plain = mean_acf(&rs, 20, false)?;
        let abs = mean_acf(&rs, 20, true)?;
        let band = 3.0 / (cfg.days as f64).sqrt();
        let above = abs.values[1..].iter().filter(|&&v| v > band).count();
        let mean_plain = plain.values[1..].iter().map(|v| v.abs()).sum::<f64>() / 20.0;
        println!("  acf: mean|plain| {mean_plain:.4}, abs lags above band {above}/20");
        for fam in WindowFamily::ALL {
            let windows = fam.windows(stats.sigma_bar)?;
            let sweep = sweep_windows(&rs, &windows, ScanOptions::default())?;
            let mut passed = 0;
            let mut eligible = 0;
            for (id, (w, eps)) in &sweep {
                if eps.is_empty() {
                    continue;
                }
                let c = mfht_curve(eps, &Binning::Log { bins: DEFAULT_CURVE_BINS }, DEFAULT_MIN_COUNT, Some(*w))?;
                let v = verdict(&c, id);
                if windows.len() == 1 {
                    println!(
                        "  {} {id}: episodes {}, populated {}, interior {}, ratios {:?} {:?}",
                        fam.name(),
                        eps.len(),
                        v.populated_bins,
                        v.interior_maximum,
                        v.edge_ratio_low,
                        v.edge_ratio_high
                    );
                }
                if eps.len() >= 200 {
                    eligible += 1;
                    passed += usize::from(v.interior_maximum);
                }
            }
            if windows.len() > 1 {
                println!("  {}: {passed}/{eligible} eligible windows pass", fam.name());
            }
        }
    }
    Ok(())
}
