use proptest::prelude::*;
use swift_cli::config::RunConfig;

fn config_text() -> impl Strategy<Value = String> {
    (
        (1usize..200, 1usize..100, 0usize..20, prop::sample::select(vec![1usize, 3, 5, 9])),
        (
            prop::sample::select(vec!["linear", "mlp"]),
            prop::sample::select(vec!["share", "split"]),
            prop::sample::select(vec!["mean", "revin", "none"]),
            prop::sample::select(vec!["haar", "db2", "sym4", "coif1"]),
        ),
        (any::<bool>(), any::<bool>(), any::<bool>()),
        (1usize..50, 1usize..512, 1e-6f64..1.0, 0.01f64..0.99, any::<u64>()),
        prop::sample::select(vec!["ett_hourly", "ett_minute", "ratio"]),
    )
        .prop_map(|((t, h, n, k), (head, mode, norm, wav), (conv, dwt, ci), (ep, bs, lr, pct, seed), scheme)| {
            let channels = if n == 0 { "auto".to_string() } else { n.to_string() };
            format!(
                "data.path=d/{t}.csv\ndata.split_scheme={scheme}\nout.dir=runs/{seed}\n\
                 model.lookback={}\nmodel.horizon={}\nmodel.channels={channels}\nmodel.kernel_size={k}\n\
                 model.head={head}\nmodel.head_mode={mode}\nmodel.norm={norm}\nmodel.wavelet={wav}\n\
                 model.conv={conv}\nmodel.dwt={dwt}\nmodel.channel_independent={ci}\n\
                 train.epochs={ep}\ntrain.batch_size={bs}\ntrain.max_lr={lr}\ntrain.pct_start={pct}\ntrain.seed={seed}\n",
                2 * t,
                2 * h
            )
        })
}

proptest! {
    #[test]
    fn canonical_form_round_trips(text in config_text()) {
        let cfg = RunConfig::parse(&text).unwrap();
        let canon = cfg.to_text();
        let again = RunConfig::parse(&canon).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.to_text(), canon);
    }
}
