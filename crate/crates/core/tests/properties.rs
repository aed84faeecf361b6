use ndarray::{s, Array2};
use proptest::prelude::*;
use swift_core::analysis::cosine_sim;
use swift_core::data::{split, standardize, windows, ForecastData, RawSeries, Split, SplitScheme};
use swift_core::training::{onecycle_lr, peak_step, TrainConfig};
use swift_core::wavelet::{dwt1, idwt1, make_filters, WaveletName};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-10.0f64..10.0, rows * cols).prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn series_case() -> impl Strategy<Value = (WaveletName, Array2<f64>)> {
    (prop::sample::select(WaveletName::ALL.to_vec()), 1usize..4, 4usize..40)
        .prop_flat_map(|(w, c, half)| (Just(w), matrix(c, 2 * half.max(4))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perfect_reconstruction((w, x) in series_case()) {
        let f = make_filters(w.as_str()).unwrap();
        let back = idwt1(&dwt1(x.view(), &f).unwrap(), &f).unwrap();
        prop_assert!((&back - &x).iter().all(|d| d.abs() < 1e-10));
    }

    #[test]
    fn energy_preserved((w, x) in series_case()) {
        let f = make_filters(w.as_str()).unwrap();
        let b = dwt1(x.view(), &f).unwrap();
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let eb: f64 = b.approx.iter().chain(b.detail.iter()).map(|v| v * v).sum();
        prop_assert!((ex - eb).abs() <= 1e-10 * ex.max(1.0));
    }

    #[test]
    fn analysis_is_linear((w, x) in series_case(), a in -3.0f64..3.0, seed in 0u64..1000) {
        let f = make_filters(w.as_str()).unwrap();
        let y = x.mapv(|v| (v * 1.7 + seed as f64).sin());
        let lhs = dwt1((&x * a + &y).view(), &f).unwrap();
        let bx = dwt1(x.view(), &f).unwrap();
        let by = dwt1(y.view(), &f).unwrap();
        let ra = &lhs.approx - &(&bx.approx * a + &by.approx);
        let rd = &lhs.detail - &(&bx.detail * a + &by.detail);
        prop_assert!(ra.iter().chain(rd.iter()).all(|d| d.abs() < 1e-10));
    }

    #[test]
    fn window_count_formula(start in 0usize..50, len in 0usize..200, t in 1usize..40, h in 1usize..30, stride in 1usize..7) {
        let s = Array2::<f64>::zeros((2, 300));
        let r = start..start + len;
        match windows(&s, r, t, h, stride) {
            Ok(w) => {
                prop_assert!(len >= t + h);
                prop_assert_eq!(w.len(), (len - t - h) / stride + 1);
            }
            Err(_) => prop_assert!(len < t + h),
        }
    }

    #[test]
    fn no_leakage_across_splits(len in 200usize..3000, half_t in 1usize..20, half_h in 1usize..12) {
        let (t, h) = (2 * half_t, 2 * half_h);
        let spec = split(len, SplitScheme::Ratio).unwrap();
        let data = ForecastData { series: Array2::zeros((1, len)), split: spec.clone() };
        for which in [Split::Train, Split::Val, Split::Test] {
            let Ok(w) = data.windows(which, t, h) else { continue };
            let own = spec.range(which);
            for &st in &w.starts {
                let target = st + t..st + t + h;
                prop_assert!(target.start >= own.start && target.end <= own.end);
                if which == Split::Train {
                    prop_assert!(st >= own.start);
                }
            }
        }
    }

    #[test]
    fn standardization_ignores_held_out_rows(x in matrix(3, 60), shift in -50.0f64..50.0) {
        let raw = RawSeries { values: x, channel_names: vec!["a".into(), "b".into(), "c".into()], timestamps: None };
        let spec = split(60, SplitScheme::Ratio).unwrap();
        let (_, a) = standardize(&raw, spec.train.clone()).unwrap();
        let mut other = raw.clone();
        other.values.slice_mut(s![.., spec.train.end..]).mapv_inplace(|v| v * 2.0 + shift);
        let (_, b) = standardize(&other, spec.train.clone()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn cosine_scale(a in matrix(4, 5), b in matrix(4, 5), k in prop::sample::select(vec![-7.5, -0.3, 0.01, 2.0, 123.0])) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3) && b.iter().any(|v| v.abs() > 1e-3));
        let base = cosine_sim(&a, &b).unwrap();
        let scaled = cosine_sim(&(&a * k), &b).unwrap();
        prop_assert!((scaled - k.signum() * base).abs() < 1e-12);
    }

    #[test]
    fn schedule_rises_then_falls(total in 3usize..2000, pct in 0.05f64..0.95) {
        let cfg = TrainConfig { pct_start: pct, ..TrainConfig::default() };
        let p = peak_step(total, pct);
        let lrs: Vec<f64> = (0..total).map(|i| onecycle_lr(i, total, &cfg).unwrap()).collect();
        prop_assert!(lrs[..=p].windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(lrs[p..].windows(2).all(|w| w[1] <= w[0]));
        prop_assert!((lrs[p] - cfg.max_lr).abs() < 1e-12);
        prop_assert!((lrs[total - 1] - cfg.max_lr / cfg.final_div_factor).abs() < 1e-9);
    }
}
