use chrono::NaiveDate;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use volstab_core::moments::{excess_kurtosis, skewness};
use volstab_core::returns::{read_returns_csv, write_returns_csv};
use volstab_core::stats::{bin_index, histogram, rebin};
use volstab_core::{
    acf, daily_returns, fht_pdf, market_stats, mfht_curve, return_pdf, simulate_ensemble, to_returns,
    Binning, FhtEpisode, ModelParams, PriceSeries, ReturnSeries, SimConfig,
};

fn prices(p: Vec<f64>) -> PriceSeries {
    let d0 = NaiveDate::from_ymd_opt(2001, 1, 2).unwrap();
    PriceSeries {
        ticker: "P".into(),
        dates: (0..p.len()).map(|i| d0 + chrono::Days::new(i as u64)).collect(),
        prices: p,
    }
}

fn episodes_strategy() -> impl Strategy<Value = Vec<FhtEpisode>> {
    prop::collection::vec((1usize..500, 1e-4f64..0.5), 1..200).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (fht, vol))| FhtEpisode {
                ticker: format!("t{}", i % 7),
                start_index: i,
                fht,
                volatility: vol,
            })
            .collect()
    })
}

#[test]
fn geometric_fht_histogram_matches_pmf() {
    let p = 0.08;
    let n = 20_000;
    let geo = Geometric::new(p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    // rand_distr counts failures before the first success; FHT counts trials
    let eps: Vec<FhtEpisode> = (0..n)
        .map(|i| FhtEpisode {
            ticker: "g".into(),
            start_index: i,
            fht: geo.sample(&mut rng) as usize + 1,
            volatility: 0.01,
        })
        .collect();
    let h = fht_pdf(&eps, &volstab_core::stats::default_fht_binning()).unwrap();
    for k in 0..h.counts.len() {
        let (lo, hi) = (h.bin_edges[k], h.bin_edges[k + 1]);
        // integers inside a half-integer-edged bin
        let first = (lo + 0.5) as u32;
        let last = (hi - 0.5) as u32;
        let prob: f64 = (first..=last).map(|j| p * (1.0 - p).powi(j as i32 - 1)).sum();
        let expected = n as f64 * prob;
        let se = (n as f64 * prob * (1.0 - prob)).sqrt();
        let observed = h.counts[k] as f64;
        assert!(
            (observed - expected).abs() <= 3.0 * se.max(1.0),
            "bin [{lo}, {hi}): observed {observed}, expected {expected:.1} ± {se:.1}"
        );
        let density_expected = prob / (hi - lo);
        if prob > 0.01 {
            assert!((h.density[k] - density_expected).abs() <= 3.0 * se / (n as f64 * (hi - lo)));
        }
    }
}

#[test]
fn white_noise_acf_is_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let a = acf(&xs, 20, false).unwrap();
    assert_eq!(a.values[0], 1.0);
    for (lag, v) in a.lags.iter().zip(&a.values).skip(1) {
        assert!(v.abs() < 0.01, "lag {lag}: {v}");
    }
}

#[test]
fn simulated_returns_have_fat_tails() {
    let cfg = SimConfig {
        days: 2000,
        n_series: 40,
        steps_per_day: 20,
        ..SimConfig::default()
    };
    let rs: Vec<ReturnSeries> = simulate_ensemble(&ModelParams::default(), &cfg)
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, t)| daily_returns(t, i.to_string()).unwrap())
        .collect();
    let pooled: Vec<f64> = rs.iter().flat_map(|s| s.returns.clone()).collect();
    let k = excess_kurtosis(&pooled);
    assert!(k > 0.0, "excess kurtosis {k}");
    let h = return_pdf(&rs, &Binning::Linear { bins: 60 }).unwrap();
    let mass: f64 = (0..h.counts.len()).map(|k| h.density[k] * h.width(k)).sum();
    assert!((mass - 1.0).abs() < 1e-9);
}

#[test]
fn symmetric_sample_histogram_has_no_skew() {
    let xs: Vec<f64> = (-50..=50).map(|i| i as f64 * 0.01).flat_map(|x| [x, -x]).collect();
    // odd bin count: zero sits mid-bin, no sample lies on an edge
    let h = histogram(&xs, &Binning::Linear { bins: 21 }).unwrap();
    let mids: Vec<f64> = (0..h.counts.len())
        .flat_map(|k| {
            let m = 0.5 * (h.bin_edges[k] + h.bin_edges[k + 1]);
            std::iter::repeat_n(m, h.counts[k])
        })
        .collect();
    assert!(skewness(&mids).abs() < 1e-6);
    assert!(skewness(&xs).abs() < 1e-12);
}

proptest! {
    #[test]
    fn returns_invariant_under_power_of_two_scaling(
        p in prop::collection::vec(0.5f64..500.0, 2..60),
        e in -20i32..20,
    ) {
        let scale = 2f64.powi(e);
        let a = to_returns(&prices(p.clone())).unwrap();
        let b = to_returns(&prices(p.iter().map(|x| x * scale).collect())).unwrap();
        prop_assert_eq!(a.returns, b.returns);
    }

    #[test]
    fn returns_nearly_invariant_under_any_scaling(
        p in prop::collection::vec(0.5f64..500.0, 2..60),
        scale in 1e-3f64..1e3,
    ) {
        let a = to_returns(&prices(p.clone())).unwrap();
        let b = to_returns(&prices(p.iter().map(|x| x * scale).collect())).unwrap();
        for (x, y) in a.returns.iter().zip(&b.returns) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-3));
        }
    }

    #[test]
    fn sigma_is_recomputable(r in prop::collection::vec(-0.2f64..0.2, 1..300)) {
        let s = ReturnSeries::new("x", r.clone()).unwrap();
        let n = r.len() as f64;
        let mu = r.iter().sum::<f64>() / n;
        let direct = (r.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!(s.sigma >= 0.0);
        prop_assert!((s.sigma - direct).abs() <= 1e-12 * direct.max(1e-300));
    }

    #[test]
    fn sigma_bar_is_permutation_invariant(
        sigmas in prop::collection::vec(prop::collection::vec(-0.1f64..0.1, 2..20), 1..30),
        seed in any::<u64>(),
    ) {
        let rs: Vec<ReturnSeries> = sigmas
            .into_iter()
            .enumerate()
            .map(|(i, r)| ReturnSeries::new(i.to_string(), r).unwrap())
            .collect();
        let mut shuffled = rs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        prop_assert_eq!(
            market_stats(&rs).unwrap().sigma_bar.to_bits(),
            market_stats(&shuffled).unwrap().sigma_bar.to_bits()
        );
    }

    #[test]
    fn returns_csv_round_trip(
        series in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 1..40), 1..6),
    ) {
        let rs: Vec<ReturnSeries> = series
            .into_iter()
            .enumerate()
            .map(|(i, r)| ReturnSeries::new(format!("T{i}"), r).unwrap())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_returns_csv(&path, &rs).unwrap();
        prop_assert_eq!(read_returns_csv(&path).unwrap(), rs);
    }

    #[test]
    fn curve_is_permutation_invariant(eps in episodes_strategy(), seed in any::<u64>()) {
        let binning = Binning::Log { bins: 12 };
        let a = mfht_curve(&eps, &binning, 2, None).unwrap();
        let mut shuffled = eps.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        prop_assert_eq!(a, mfht_curve(&shuffled, &binning, 2, None).unwrap());
    }

    #[test]
    fn curve_counts_and_bounds(eps in episodes_strategy(), min_count in 1usize..6) {
        let c = mfht_curve(&eps, &Binning::Log { bins: 15 }, min_count, None).unwrap();
        prop_assert_eq!(c.counts.iter().sum::<usize>(), eps.len());
        let lo = eps.iter().map(|e| e.fht).min().unwrap() as f64;
        let hi = eps.iter().map(|e| e.fht).max().unwrap() as f64;
        for (m, &n) in c.mfht.iter().zip(&c.counts) {
            match m {
                Some(m) => {
                    prop_assert!(n >= min_count);
                    prop_assert!(lo <= *m && *m <= hi);
                }
                None => prop_assert!(n < min_count),
            }
        }
    }

    #[test]
    fn merging_adjacent_bins_gives_weighted_mean(eps in episodes_strategy(), cut in 1usize..9) {
        let fine: Vec<f64> = (0..=10).map(|k| 1e-4 * 5000f64.powf(k as f64 / 10.0)).collect();
        let mut merged = fine.clone();
        merged.remove(cut);
        let a = mfht_curve(&eps, &Binning::Edges(fine), 1, None).unwrap();
        let b = mfht_curve(&eps, &Binning::Edges(merged), 1, None).unwrap();
        let (n1, n2) = (a.counts[cut - 1], a.counts[cut]);
        prop_assert_eq!(b.counts[cut - 1], n1 + n2);
        if n1 + n2 > 0 {
            let w = (a.mfht[cut - 1].unwrap_or(0.0) * n1 as f64 + a.mfht[cut].unwrap_or(0.0) * n2 as f64)
                / (n1 + n2) as f64;
            let got = b.mfht[cut - 1].unwrap();
            prop_assert!((got - w).abs() <= 1e-9 * w);
        }
    }

    #[test]
    fn rebinning_onto_own_grid_is_identity(eps in episodes_strategy()) {
        let c = mfht_curve(&eps, &Binning::Log { bins: 8 }, 1, None).unwrap();
        let r = rebin(&c, &c.bin_edges);
        prop_assert_eq!(r.counts, c.counts);
        for (x, y) in r.mfht.iter().zip(&c.mfht) {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12 * y),
                (None, None) => {}
                _ => prop_assert!(false, "populated bins differ"),
            }
        }
    }

    #[test]
    fn histogram_is_normalized(
        xs in prop::collection::vec(-5.0f64..5.0, 1..400),
        bins in 1usize..40,
    ) {
        let h = histogram(&xs, &Binning::Linear { bins }).unwrap();
        prop_assert_eq!(h.total(), xs.len());
        let mass: f64 = (0..h.counts.len()).map(|k| h.density[k] * h.width(k)).sum();
        prop_assert!((mass - 1.0).abs() < 1e-9);
        prop_assert!(h.density.iter().all(|&d| d >= 0.0));
        for &x in &xs {
            prop_assert!(bin_index(&h.bin_edges, x).is_some());
        }
    }

    #[test]
    fn acf_invariant_under_negation(xs in prop::collection::vec(-1.0f64..1.0, 25..200)) {
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        for absolute in [false, true] {
            if let Ok(a) = acf(&xs, 10, absolute) {
                let b = acf(&neg, 10, absolute).unwrap();
                prop_assert_eq!(a.values[0], 1.0);
                for (x, y) in a.values.iter().zip(&b.values) {
                    prop_assert!((x - y).abs() < 1e-12);
                    prop_assert!(x.abs() <= 1.0 + 1e-12);
                }
            }
        }
    }
}
