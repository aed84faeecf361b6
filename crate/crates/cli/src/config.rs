//! Line-oriented `key=value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use swift_core::data::SplitScheme;
use swift_core::model::ModelConfig;
use swift_core::training::TrainConfig;

use crate::error::{CliError, CliResult};

pub type KvMap = BTreeMap<String, String>;

/// Parses `key=value` lines. Blank lines and lines starting with `#` are
/// ignored; whitespace around keys and values is trimmed.
pub fn parse_kv(text: &str) -> CliResult<KvMap> {
    let mut map = KvMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key=value, got `{line}`", i + 1)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(CliError::Config(format!("line {}: empty key", i + 1)));
        }
        if map.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}

/// Applies `key=value` override strings on top of `map`.
pub fn apply_overrides(map: &mut KvMap, overrides: &[String]) -> CliResult<()> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{o}` is not key=value")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(())
}

/// Sorted `key=value` lines.
pub fn render_kv(map: &KvMap) -> String {
    map.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// Consumes keys from a map, remembering which ones were used.
struct Fields {
    map: KvMap,
}

impl Fields {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn required(&mut self, key: &str) -> CliResult<String> {
        self.take(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    fn parse<T: FromStr>(&mut self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: Display,
    {
        match self.take(key) {
            None => Ok(default),
            Some(v) => parse_value(key, &v),
        }
    }

    fn finish(self) -> CliResult<()> {
        match self.map.keys().next() {
            Some(k) => Err(CliError::Config(format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> CliResult<T>
where
    T::Err: Display,
{
    v.parse()
        .map_err(|e| CliError::Config(format!("key `{key}`: cannot parse `{v}`: {e}")))
}

fn model_from_fields(f: &mut Fields) -> CliResult<ModelConfig> {
    let lookback: usize = parse_value("model.lookback", &f.required("model.lookback")?)?;
    let horizon: usize = parse_value("model.horizon", &f.required("model.horizon")?)?;
    let channels = match f.take("model.channels").as_deref() {
        None | Some("auto") => 0,
        Some(v) => parse_value("model.channels", v)?,
    };
    let d = ModelConfig::new(lookback, horizon, channels);
    Ok(ModelConfig {
        kernel_size: f.parse("model.kernel_size", d.kernel_size)?,
        head: f.parse("model.head", d.head)?,
        head_mode: f.parse("model.head_mode", d.head_mode)?,
        norm: f.parse("model.norm", d.norm)?,
        wavelet: f.parse("model.wavelet", d.wavelet)?,
        mlp_hidden: f.parse("model.mlp_hidden", d.mlp_hidden)?,
        conv: f.parse("model.conv", d.conv)?,
        dwt: f.parse("model.dwt", d.dwt)?,
        channel_independent: f.parse("model.channel_independent", d.channel_independent)?,
        ..d
    })
}

/// `model.*` entries of a configuration; `channels == 0` renders as `auto`.
pub fn model_to_kv(m: &ModelConfig) -> KvMap {
    let channels = if m.channels == 0 {
        "auto".to_string()
    } else {
        m.channels.to_string()
    };
    [
        ("model.lookback", m.lookback.to_string()),
        ("model.horizon", m.horizon.to_string()),
        ("model.channels", channels),
        ("model.kernel_size", m.kernel_size.to_string()),
        ("model.head", m.head.to_string()),
        ("model.head_mode", m.head_mode.to_string()),
        ("model.norm", m.norm.to_string()),
        ("model.wavelet", m.wavelet.to_string()),
        ("model.mlp_hidden", m.mlp_hidden.to_string()),
        ("model.conv", m.conv.to_string()),
        ("model.dwt", m.dwt.to_string()),
        ("model.channel_independent", m.channel_independent.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// A model configuration from `model.*` keys only (other keys rejected).
pub fn model_config_from_kv(map: KvMap) -> CliResult<ModelConfig> {
    let mut f = Fields { map };
    let m = model_from_fields(&mut f)?;
    f.finish()?;
    Ok(m)
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_path: PathBuf,
    pub split_scheme: SplitScheme,
    pub out_dir: PathBuf,
    /// `channels == 0` means "take the channel count from the data".
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_kv(map: KvMap) -> CliResult<Self> {
        let mut f = Fields { map };
        let data_path = PathBuf::from(f.required("data.path")?);
        let split_scheme = parse_value("data.split_scheme", &f.required("data.split_scheme")?)?;
        let out_dir = PathBuf::from(f.required("out.dir")?);
        let model = model_from_fields(&mut f)?;
        let d = TrainConfig::default();
        let train = TrainConfig {
            epochs: f.parse("train.epochs", d.epochs)?,
            batch_size: f.parse("train.batch_size", d.batch_size)?,
            max_lr: f.parse("train.max_lr", d.max_lr)?,
            beta1: f.parse("train.beta1", d.beta1)?,
            beta2: f.parse("train.beta2", d.beta2)?,
            eps: f.parse("train.eps", d.eps)?,
            pct_start: f.parse("train.pct_start", d.pct_start)?,
            div_factor: f.parse("train.div_factor", d.div_factor)?,
            final_div_factor: f.parse("train.final_div_factor", d.final_div_factor)?,
            patience: f.parse("train.patience", d.patience)?,
            seed: f.parse("train.seed", d.seed)?,
        };
        f.finish()?;
        train.validate()?;
        Ok(RunConfig {
            data_path,
            split_scheme,
            out_dir,
            model,
            train,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        Self::from_kv(parse_kv(text)?)
    }

    pub fn load(path: &Path, overrides: &[String]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut map = parse_kv(&text)?;
        apply_overrides(&mut map, overrides)?;
        Self::from_kv(map)
    }

    pub fn to_kv(&self) -> KvMap {
        let t = &self.train;
        let mut map = model_to_kv(&self.model);
        let entries = [
            ("data.path", self.data_path.display().to_string()),
            ("data.split_scheme", self.split_scheme.to_string()),
            ("out.dir", self.out_dir.display().to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.max_lr", t.max_lr.to_string()),
            ("train.beta1", t.beta1.to_string()),
            ("train.beta2", t.beta2.to_string()),
            ("train.eps", t.eps.to_string()),
            ("train.pct_start", t.pct_start.to_string()),
            ("train.div_factor", t.div_factor.to_string()),
            ("train.final_div_factor", t.final_div_factor.to_string()),
            ("train.patience", t.patience.to_string()),
            ("train.seed", t.seed.to_string()),
        ];
        map.extend(entries.into_iter().map(|(k, v)| (k.to_string(), v)));
        map
    }

    /// Canonical form: every key, sorted, one per line.
    pub fn to_text(&self) -> String {
        render_kv(&self.to_kv())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use swift_core::model::{HeadMode, NormMode};

    const MINIMAL: &str = "
        # comment
        data.path = data/ETTh1.csv
        data.split_scheme = ett_hourly
        model.lookback = 720
        model.horizon = 96
        out.dir = runs/a
    ";

    #[test]
    fn minimal_uses_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.model.channels, 0);
        assert_eq!(c.model.mlp_hidden, 720);
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.split_scheme, SplitScheme::EttHourly);
    }

    #[test]
    fn canonical_round_trip() {
        let text = format!("{MINIMAL}\nmodel.norm=revin\nmodel.head_mode=split\ntrain.max_lr=0.0123\n");
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.model.norm, NormMode::Revin);
        assert_eq!(c.model.head_mode, HeadMode::Split);
        let canon = c.to_text();
        let again = RunConfig::parse(&canon).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_text(), canon);
    }

    #[test]
    fn order_insensitive() {
        let lines: Vec<&str> = MINIMAL.lines().rev().collect();
        assert_eq!(RunConfig::parse(&lines.join("\n")).unwrap(), RunConfig::parse(MINIMAL).unwrap());
    }

    #[test]
    fn errors_name_the_key() {
        let missing = MINIMAL.replace("model.lookback = 720", "");
        let e = RunConfig::parse(&missing).unwrap_err();
        assert!(e.to_string().contains("model.lookback"));
        assert_eq!(e.exit_code(), 2);

        let unknown = format!("{MINIMAL}\nmodel.depth=3\n");
        assert!(RunConfig::parse(&unknown).unwrap_err().to_string().contains("model.depth"));

        let bad = format!("{MINIMAL}\ntrain.epochs=ten\n");
        assert!(RunConfig::parse(&bad).unwrap_err().to_string().contains("train.epochs"));

        let dup = format!("{MINIMAL}\nout.dir=x\n");
        assert!(RunConfig::parse(&dup).unwrap_err().to_string().contains("duplicate"));
    }
}
