//! Run configuration: a flat key=value file where every key mirrors a CLI
//! flag, merged with flag overrides before validation.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};

/// Which gradient path drives the selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorId {
    Sfess,
    SfessV,
    Gs,
    Stgs,
}

impl EstimatorId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sfess" => Ok(Self::Sfess),
            "sfess_v" => Ok(Self::SfessV),
            "gs" => Ok(Self::Gs),
            "stgs" => Ok(Self::Stgs),
            other => Err(Error::Config(format!(
                "unknown estimator '{other}' (expected sfess, sfess_v, gs, stgs)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Sfess => "sfess",
            Self::SfessV => "sfess_v",
            Self::Gs => "gs",
            Self::Stgs => "stgs",
        }
    }

    pub fn is_score_function(&self) -> bool {
        matches!(self, Self::Sfess | Self::SfessV)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Classification,
    Reconstruction,
}

impl Task {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(Self::Classification),
            "reconstruction" => Ok(Self::Reconstruction),
            other => Err(Error::Config(format!(
                "unknown task '{other}' (expected classification or reconstruction)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Classification => "classification",
            Self::Reconstruction => "reconstruction",
        }
    }
}

/// Objective fed to the selector's gradient estimator.
///
/// `HardZeroOne` is a non-differentiable 0/1 exact-match scorer for
/// classification; it only makes sense with score-function estimators. The
/// downstream network keeps training through its own differentiable loss
/// either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveId {
    Loss,
    HardZeroOne,
}

impl ObjectiveId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "loss" => Ok(Self::Loss),
            "hard01" => Ok(Self::HardZeroOne),
            other => Err(Error::Config(format!(
                "unknown objective '{other}' (expected loss or hard01)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Loss => "loss",
            Self::HardZeroOne => "hard01",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Synthetic {
        n: usize,
        informative: Vec<usize>,
        samples: usize,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
}

/// Full experiment description. Defaults are desk-scale: small splits, 50
/// epochs, batch 256.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub task: Task,
    pub k: usize,
    pub estimator: EstimatorId,
    pub m: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub lr_selector: f64,
    pub lr_downstream: f64,
    pub selector_betas: (f64, f64),
    pub downstream_betas: (f64, f64),
    pub weight_decay: f64,
    pub tau_start: f64,
    pub tau_end: f64,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub objective: ObjectiveId,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

fn parse_number<T: std::str::FromStr>(map: &KvMap, key: &str, default: T) -> Result<T> {
    match map.get(key) {
        None => Ok(default),
        Some(raw) => raw
            .parse()
            .map_err(|_| Error::Config(format!("cannot parse {key}='{raw}'"))),
    }
}

fn parse_pair(map: &KvMap, key: &str, default: (f64, f64)) -> Result<(f64, f64)> {
    match map.get(key) {
        None => Ok(default),
        Some(raw) => {
            let parts: Vec<&str> = raw.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::Config(format!(
                    "{key} must be two comma-separated numbers, got '{raw}'"
                )));
            }
            let a = parts[0]
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse {key}='{raw}'")))?;
            let b = parts[1]
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse {key}='{raw}'")))?;
            Ok((a, b))
        }
    }
}

fn parse_usize_list(raw: &str, key: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse {key}='{raw}'")))
        })
        .collect()
}

pub type KvMap = BTreeMap<String, String>;

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_kv_text(text: &str) -> Result<KvMap> {
    let mut map = KvMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected key=value, got '{line}'",
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

const KNOWN_KEYS: &[&str] = &[
    "dataset",
    "images",
    "labels",
    "n",
    "informative",
    "samples",
    "task",
    "k",
    "estimator",
    "m",
    "batch",
    "epochs",
    "train_size",
    "val_size",
    "test_size",
    "lr_selector",
    "lr_downstream",
    "selector_betas",
    "downstream_betas",
    "weight_decay",
    "tau_start",
    "tau_end",
    "hidden",
    "dropout",
    "objective",
    "seed",
    "out",
];

impl RunConfig {
    /// Builds and validates a config from a merged key-value map.
    pub fn from_kv(map: &KvMap) -> Result<Self> {
        for key in map.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown config key '{key}'")));
            }
        }
        let dataset_kind = map.get("dataset").map(String::as_str).unwrap_or("synthetic");
        let dataset = match dataset_kind {
            "synthetic" => {
                let n = parse_number(map, "n", 20usize)?;
                let informative = match map.get("informative") {
                    Some(raw) => parse_usize_list(raw, "informative")?,
                    None => (0..5.min(n)).collect(),
                };
                let samples = parse_number(map, "samples", 6000usize)?;
                DatasetSpec::Synthetic {
                    n,
                    informative,
                    samples,
                }
            }
            "idx" => {
                let images = map
                    .get("images")
                    .ok_or_else(|| Error::Config("dataset=idx needs images=<path>".into()))?;
                let labels = map
                    .get("labels")
                    .ok_or_else(|| Error::Config("dataset=idx needs labels=<path>".into()))?;
                DatasetSpec::Idx {
                    images: PathBuf::from(images),
                    labels: PathBuf::from(labels),
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown dataset '{other}' (expected synthetic or idx)"
                )))
            }
        };
        let task = match map.get("task") {
            Some(raw) => Task::parse(raw)?,
            None => Task::Classification,
        };
        let estimator = match map.get("estimator") {
            Some(raw) => EstimatorId::parse(raw)?,
            None => EstimatorId::SfessV,
        };
        let objective = match map.get("objective") {
            Some(raw) => ObjectiveId::parse(raw)?,
            None => ObjectiveId::Loss,
        };
        let hidden = match map.get("hidden") {
            Some(raw) => parse_usize_list(raw, "hidden")?,
            None => match task {
                Task::Classification => vec![128, 128],
                Task::Reconstruction => vec![256],
            },
        };
        let config = Self {
            dataset,
            task,
            k: parse_number(map, "k", 5usize)?,
            estimator,
            m: parse_number(map, "m", 5usize)?,
            batch_size: parse_number(map, "batch", 256usize)?,
            epochs: parse_number(map, "epochs", 50usize)?,
            train_size: parse_number(map, "train_size", 4000usize)?,
            val_size: parse_number(map, "val_size", 1000usize)?,
            test_size: parse_number(map, "test_size", 1000usize)?,
            lr_selector: parse_number(map, "lr_selector", 1e-2)?,
            lr_downstream: parse_number(map, "lr_downstream", 1e-4)?,
            selector_betas: parse_pair(map, "selector_betas", (0.99, 0.999))?,
            downstream_betas: parse_pair(map, "downstream_betas", (0.9, 0.999))?,
            weight_decay: parse_number(map, "weight_decay", 1e-4)?,
            tau_start: parse_number(map, "tau_start", 1.0)?,
            tau_end: parse_number(map, "tau_end", 0.01)?,
            hidden,
            dropout: parse_number(
                map,
                "dropout",
                match task {
                    Task::Classification => 0.2,
                    Task::Reconstruction => 0.0,
                },
            )?,
            objective,
            seed: parse_number(map, "seed", 0u64)?,
            out_dir: map.get("out").map(PathBuf::from),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let n = match &self.dataset {
            DatasetSpec::Synthetic { n, informative, .. } => {
                if informative.is_empty() || informative.len() >= *n {
                    return Err(Error::Config(
                        "synthetic dataset needs 0 < |informative| < n".into(),
                    ));
                }
                Some(*n)
            }
            DatasetSpec::Idx { images, labels } => {
                for path in [images, labels] {
                    if !path.exists() {
                        return Err(Error::Config(format!(
                            "referenced file does not exist: {}",
                            path.display()
                        )));
                    }
                }
                None
            }
        };
        if let Some(n) = n {
            if self.k == 0 || self.k >= n {
                return Err(Error::Config(format!(
                    "need 0 < k < n, got k={} n={n}",
                    self.k
                )));
            }
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.estimator == EstimatorId::SfessV && self.m < 2 {
            return Err(Error::Config("estimator sfess_v needs m >= 2".into()));
        }
        if self.objective == ObjectiveId::HardZeroOne && !self.estimator.is_score_function() {
            return Err(Error::Config(
                "objective hard01 is non-differentiable and needs sfess or sfess_v".into(),
            ));
        }
        if self.objective == ObjectiveId::HardZeroOne && self.task != Task::Classification {
            return Err(Error::Config("objective hard01 needs task=classification".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.train_size == 0 {
            return Err(Error::Config(
                "batch, epochs, and train_size must be positive".into(),
            ));
        }
        if !(self.tau_start > 0.0 && self.tau_end > 0.0) {
            return Err(Error::Config("temperature bounds must be positive".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }

    /// The flat key-value view written into run metadata.
    pub fn to_kv(&self) -> KvMap {
        let mut map = KvMap::new();
        match &self.dataset {
            DatasetSpec::Synthetic {
                n,
                informative,
                samples,
            } => {
                map.insert("dataset".into(), "synthetic".into());
                map.insert("n".into(), n.to_string());
                map.insert(
                    "informative".into(),
                    informative
                        .iter()
                        .map(|i| i.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                );
                map.insert("samples".into(), samples.to_string());
            }
            DatasetSpec::Idx { images, labels } => {
                map.insert("dataset".into(), "idx".into());
                map.insert("images".into(), images.display().to_string());
                map.insert("labels".into(), labels.display().to_string());
            }
        }
        map.insert("task".into(), self.task.as_str().into());
        map.insert("k".into(), self.k.to_string());
        map.insert("estimator".into(), self.estimator.as_str().into());
        map.insert("m".into(), self.m.to_string());
        map.insert("batch".into(), self.batch_size.to_string());
        map.insert("epochs".into(), self.epochs.to_string());
        map.insert("train_size".into(), self.train_size.to_string());
        map.insert("val_size".into(), self.val_size.to_string());
        map.insert("test_size".into(), self.test_size.to_string());
        map.insert("lr_selector".into(), self.lr_selector.to_string());
        map.insert("lr_downstream".into(), self.lr_downstream.to_string());
        map.insert(
            "selector_betas".into(),
            format!("{},{}", self.selector_betas.0, self.selector_betas.1),
        );
        map.insert(
            "downstream_betas".into(),
            format!("{},{}", self.downstream_betas.0, self.downstream_betas.1),
        );
        map.insert("weight_decay".into(), self.weight_decay.to_string());
        map.insert("tau_start".into(), self.tau_start.to_string());
        map.insert("tau_end".into(), self.tau_end.to_string());
        map.insert(
            "hidden".into(),
            self.hidden
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        map.insert("dropout".into(), self.dropout.to_string());
        map.insert("objective".into(), self.objective.as_str().into());
        map.insert("seed".into(), self.seed.to_string());
        if let Some(out) = &self.out_dir {
            map.insert("out".into(), out.display().to_string());
        }
        map
    }
}
