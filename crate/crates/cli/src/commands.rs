//! Subcommand implementations. Each writes its human-readable report to
//! `out` and returns a structured result.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use swift_core::analysis::{analyze_pair, export_heatmap, PairReport, WeightTriple};
use swift_core::data::{load_csv, split, standardize, synth_nonstationary, write_csv, ForecastData, RawSeries, Scaler, Split, SynthParams};
use swift_core::model::{MacReport, ModelConfig, SwiftModel};
use swift_core::training::{evaluate, train, History, Metrics};
use swift_core::Error as CoreError;

use crate::checkpoint::SavedRun;
use crate::config::{apply_overrides, model_config_from_kv, parse_kv, KvMap, RunConfig};
use crate::error::{CliError, CliResult};

pub const CHECKPOINT_FILE: &str = "model.swft";
pub const HISTORY_FILE: &str = "history.csv";
pub const STATS_FILE: &str = "stats.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const CONFIG_FILE: &str = "config.txt";

fn emit(out: &mut dyn Write, line: impl AsRef<str>) -> CliResult<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| CliError::io("<stdout>", e))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Loads and splits the configured dataset, standardizing with `scaler` if
/// given, otherwise with statistics fitted on the training range.
pub fn prepare_data(run: &RunConfig, scaler: Option<&Scaler>) -> CliResult<(ForecastData, Scaler)> {
    let raw = load_csv(&run.data_path)?;
    let spec = split(raw.len(), run.split_scheme)?;
    let (series, scaler) = match scaler {
        Some(s) => {
            if s.mean.len() != raw.channels() {
                return Err(CoreError::ConfigMismatch(format!(
                    "checkpoint has {} channels, data has {}",
                    s.mean.len(),
                    raw.channels()
                ))
                .into());
            }
            (s.transform(&raw.values), s.clone())
        }
        None => {
            let (scaled, s) = standardize(&raw, spec.train.clone())?;
            (scaled.values, s)
        }
    };
    Ok((ForecastData { series, split: spec }, scaler))
}

fn split_metrics(model: &SwiftModel, data: &ForecastData, which: Split) -> CliResult<Metrics> {
    let w = data.windows(which, model.config.lookback, model.config.horizon)?;
    Ok(evaluate(model, &w)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: History,
    pub val: Metrics,
    pub test: Metrics,
    pub checkpoint: PathBuf,
}

/// Trains, then writes checkpoint, history, statistics, resolved config and
/// a summary into the run's output directory.
pub fn cmd_train(run: &RunConfig, out: &mut dyn Write) -> CliResult<TrainReport> {
    let (data, scaler) = prepare_data(run, None)?;
    let n = data.series.nrows();
    let mut model_cfg = run.model.clone();
    if model_cfg.channels == 0 {
        model_cfg.channels = n;
    } else if model_cfg.channels != n {
        return Err(CoreError::ConfigMismatch(format!(
            "model.channels is {} but the data has {n} channels",
            model_cfg.channels
        ))
        .into());
    }
    let (model, history) = train(&model_cfg, &run.train, &data)?;
    let val = split_metrics(&model, &data, Split::Val)?;
    let test = split_metrics(&model, &data, Split::Test)?;

    create_dir(&run.out_dir)?;
    let best = &history.epochs[history.best];
    let state: BTreeMap<String, String> = [
        ("best_epoch".to_string(), best.epoch.to_string()),
        ("val_mse".to_string(), val.mse.to_string()),
    ]
    .into();
    let mut resolved = run.clone();
    resolved.model = model_cfg;
    let saved = SavedRun {
        run: resolved.clone(),
        model,
        scaler,
        state,
    };
    let ckpt = run.out_dir.join(CHECKPOINT_FILE);
    saved.save(&ckpt)?;
    history.write_csv(run.out_dir.join(HISTORY_FILE))?;
    saved.scaler.write_csv(run.out_dir.join(STATS_FILE))?;
    let cfg_path = run.out_dir.join(CONFIG_FILE);
    fs::write(&cfg_path, resolved.to_text()).map_err(|e| CliError::io(&cfg_path, e))?;
    let summary = format!(
        "best_epoch={}\nval_mse={}\nval_mae={}\ntest_mse={}\ntest_mae={}\n",
        best.epoch, val.mse, val.mae, test.mse, test.mae
    );
    let sum_path = run.out_dir.join(SUMMARY_FILE);
    fs::write(&sum_path, &summary).map_err(|e| CliError::io(&sum_path, e))?;
    emit(
        out,
        format!(
            "test_mse={} test_mae={} val_mse={} best_epoch={} checkpoint={}",
            test.mse,
            test.mae,
            val.mse,
            best.epoch,
            ckpt.display()
        ),
    )?;
    Ok(TrainReport {
        history,
        val,
        test,
        checkpoint: ckpt,
    })
}

pub fn cmd_train_file(path: &Path, overrides: &[String], out: &mut dyn Write) -> CliResult<TrainReport> {
    cmd_train(&RunConfig::load(path, overrides)?, out)
}

/// Validation and test metrics of a checkpoint on its dataset. Only `data.*`
/// keys may be overridden.
pub fn cmd_eval(checkpoint: &Path, overrides: &[String], out: &mut dyn Write) -> CliResult<Vec<(Split, Metrics)>> {
    let saved = SavedRun::load(checkpoint)?;
    if let Some(o) = overrides.iter().find(|o| !o.trim_start().starts_with("data.")) {
        return Err(CliError::Config(format!("eval only accepts data.* overrides, got `{o}`")));
    }
    let mut kv = saved.run.to_kv();
    apply_overrides(&mut kv, overrides)?;
    let run = RunConfig::from_kv(kv)?;
    let (data, _) = prepare_data(&run, Some(&saved.scaler))?;
    let mut results = Vec::new();
    for which in [Split::Val, Split::Test] {
        let m = split_metrics(&saved.model, &data, which)?;
        emit(out, format!("split={} mse={} mae={}", which.as_str(), m.mse, m.mae))?;
        results.push((which, m));
    }
    Ok(results)
}

/// Forecasts the `horizon` rows following the last `lookback` rows of
/// `input`, in the data's original units.
pub fn cmd_predict(checkpoint: &Path, input: &Path, output: &Path, out: &mut dyn Write) -> CliResult<RawSeries> {
    let saved = SavedRun::load(checkpoint)?;
    let cfg = &saved.model.config;
    let raw = load_csv(input)?;
    if raw.channels() != cfg.channels {
        return Err(CoreError::ConfigMismatch(format!(
            "checkpoint expects {} channels, {} has {}",
            cfg.channels,
            input.display(),
            raw.channels()
        ))
        .into());
    }
    if raw.channel_names != saved.scaler.channel_names {
        log::warn!("input column names differ from the training data; matching by position");
    }
    if raw.len() < cfg.lookback {
        return Err(CoreError::InvalidData(format!(
            "short input: {} has {} rows but the lookback is {}",
            input.display(),
            raw.len(),
            cfg.lookback
        ))
        .into());
    }
    let recent = raw.values.slice(ndarray::s![.., raw.len() - cfg.lookback..]).to_owned();
    let x = saved.scaler.transform(&recent);
    let y = saved.model.predict(x.view())?;
    let forecast = RawSeries {
        values: saved.scaler.inverse(&y),
        channel_names: raw.channel_names.clone(),
        timestamps: None,
    };
    write_csv(&forecast, output)?;
    emit(
        out,
        format!(
            "wrote {} channels x {} steps to {}",
            forecast.channels(),
            forecast.len(),
            output.display()
        ),
    )?;
    Ok(forecast)
}

/// Compares the heads of a shared-head and a split-head checkpoint and
/// writes `report.csv` plus heatmaps to `out_dir`.
pub fn cmd_analyze(share: &Path, split_ckpt: &Path, out_dir: &Path, out: &mut dyn Write) -> CliResult<PairReport> {
    let a = SavedRun::load(share)?;
    let b = SavedRun::load(split_ckpt)?;
    let report = analyze_pair(&a.model, &b.model)?;
    let triple = WeightTriple::from_models(&a.model, &b.model)?;
    create_dir(out_dir)?;
    let report_path = out_dir.join("report.csv");
    fs::write(&report_path, report.to_csv()).map_err(|e| CliError::io(&report_path, e))?;
    for (name, w) in [("shared", &triple.shared), ("low", &triple.low), ("high", &triple.high)] {
        export_heatmap(w, out_dir.join(format!("{name}.pgm")))?;
    }
    emit(out, format!("sim_shared_low={}", report.sim_shared_low))?;
    emit(out, format!("sim_shared_high={}", report.sim_shared_high))?;
    emit(out, format!("sim_low_high={}", report.sim_low_high))?;
    if report.high_degenerate {
        emit(out, "high-band regressor degenerate; fitted on the low band only")?;
    }
    emit(out, report.equation())?;
    Ok(report)
}

pub fn cmd_synth(len: usize, seed: u64, params: &SynthParams, output: &Path, out: &mut dyn Write) -> CliResult<RawSeries> {
    let series = synth_nonstationary(len, seed, params)?;
    write_csv(&series, output)?;
    emit(out, format!("wrote {} rows to {}", series.len(), output.display()))?;
    Ok(series)
}

/// Parameter and MAC counts for a model configuration given as `model.*`
/// keys. `model.channels` must be explicit.
pub fn cmd_count(kv: KvMap, out: &mut dyn Write) -> CliResult<(usize, MacReport)> {
    let cfg: ModelConfig = model_config_from_kv(kv)?;
    if cfg.channels == 0 {
        return Err(CliError::Config("count needs an explicit model.channels".into()));
    }
    let model = swift_core::model::init_model(&cfg, 0)?;
    let params = model.count_params();
    let macs = model.count_macs();
    emit(out, format!("params={params}"))?;
    emit(out, format!("head_macs={} ({:.2} M)", macs.head, macs.head as f64 / 1e6))?;
    emit(out, format!("conv_macs={}", macs.conv))?;
    emit(out, format!("norm_macs={}", macs.norm))?;
    emit(out, format!("total_macs={} ({:.2} M)", macs.total, macs.total as f64 / 1e6))?;
    Ok((params, macs))
}

/// Reads a `model.*` config file (other sections are ignored) and applies overrides.
pub fn count_kv(config: Option<&Path>, overrides: &[String]) -> CliResult<KvMap> {
    let mut kv = match config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            parse_kv(&text)?
        }
        None => KvMap::new(),
    };
    kv.retain(|k, _| k.starts_with("model."));
    apply_overrides(&mut kv, overrides)?;
    Ok(kv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRun {
    pub name: String,
    pub overrides: Vec<String>,
    pub report: TrainReport,
}

/// Every combination of `key=v1,v2,...` lines, in sorted key order.
pub fn expand_grid(grid: &KvMap) -> Vec<Vec<String>> {
    let mut combos: Vec<Vec<String>> = vec![Vec::new()];
    for (k, values) in grid {
        let vals: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        combos = combos
            .into_iter()
            .flat_map(|c| {
                vals.iter().map(move |v| {
                    let mut next = c.clone();
                    next.push(format!("{k}={v}"));
                    next
                })
            })
            .collect();
    }
    combos
}

/// Trains every grid point of `grid_path` on top of `base`, `jobs` at a
/// time, each into `<out.dir>/run-NNN`, and writes `<out.dir>/grid.csv`.
pub fn cmd_grid(base: &Path, grid_path: &Path, jobs: usize, out: &mut dyn Write) -> CliResult<Vec<GridRun>> {
    let base_run = RunConfig::load(base, &[])?;
    let text = fs::read_to_string(grid_path).map_err(|e| CliError::io(grid_path, e))?;
    let grid = parse_kv(&text)?;
    if grid.contains_key("out.dir") {
        return Err(CliError::Config("grid cannot vary out.dir".into()));
    }
    let combos = expand_grid(&grid);
    let runs: Vec<(String, Vec<String>, RunConfig)> = combos
        .into_iter()
        .enumerate()
        .map(|(i, overrides)| {
            let name = format!("run-{i:03}");
            let mut kv = base_run.to_kv();
            apply_overrides(&mut kv, &overrides)?;
            kv.insert("out.dir".into(), base_run.out_dir.join(&name).display().to_string());
            Ok((name, overrides, RunConfig::from_kv(kv)?))
        })
        .collect::<CliResult<_>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let results: Vec<CliResult<TrainReport>> = pool.install(|| {
        runs.par_iter()
            .map(|(_, _, cfg)| cmd_train(cfg, &mut std::io::sink()))
            .collect()
    });

    create_dir(&base_run.out_dir)?;
    let mut table = String::from("run,overrides,val_mse,test_mse,test_mae\n");
    let mut done = Vec::new();
    for ((name, overrides, _), res) in runs.into_iter().zip(results) {
        let report = res?;
        let joined = overrides.join(";");
        table.push_str(&format!("{name},{joined},{},{},{}\n", report.val.mse, report.test.mse, report.test.mae));
        emit(out, format!("{name} [{joined}] test_mse={} test_mae={}", report.test.mse, report.test.mae))?;
        done.push(GridRun {
            name,
            overrides,
            report,
        });
    }
    let p = base_run.out_dir.join("grid.csv");
    fs::write(&p, table).map_err(|e| CliError::io(&p, e))?;
    Ok(done)
}
