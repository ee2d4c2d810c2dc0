//! Flat `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Result, StemoError};
use crate::morl::{Ablation, ModelConfig, TrainConfig};
use crate::nodeembed::WalkConfig;

use super::synthetic::{ChangepointSpec, DiffusionSpec, PeriodicSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    Changepoint,
    Periodic,
    Diffusion,
}

impl SyntheticKind {
    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Changepoint => "changepoint",
            SyntheticKind::Periodic => "periodic",
            SyntheticKind::Diffusion => "diffusion",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "changepoint" => Ok(SyntheticKind::Changepoint),
            "periodic" => Ok(SyntheticKind::Periodic),
            "diffusion" | "diffusion-ramp" => Ok(SyntheticKind::Diffusion),
            other => Err(StemoError::Config(format!(
                "unknown synthetic kind {other:?}; expected changepoint, periodic or diffusion"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticKind),
    Csv { series: PathBuf, graph: PathBuf },
}

/// Everything an experiment needs. Field names double as config keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    // synthetic data
    pub n: usize,
    /// Rows for periodic and diffusion data; blocks of `horizon` rows for changepoint.
    pub length: usize,
    pub sigma: f64,
    pub t_c: usize,
    pub lags: Vec<usize>,
    pub ramp: usize,
    pub shared_amp: f64,
    pub private_amp: f64,
    // model
    pub horizon: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub q_hidden: usize,
    pub kappa: f64,
    /// `None` derives the kernel width from the distance matrix.
    pub eta: Option<f64>,
    pub p: f64,
    pub q: f64,
    pub rho: f64,
    pub dtw_window: Option<usize>,
    pub time_feature: bool,
    // training
    pub n_omega: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub predictor_lr: f64,
    pub max_episodes: usize,
    pub warmup_episodes: usize,
    pub update_every: usize,
    pub target_sync: u64,
    pub lambda_ramp_frac: f64,
    pub double_selection: bool,
    pub dense_supervision: bool,
    pub replay_capacity: usize,
    pub eval_every: usize,
    pub patience: usize,
    pub seed: u64,
    // ablations
    pub no_similarity: bool,
    pub no_embedding: bool,
    pub fixed_policy: Option<usize>,
    // splits and windows
    pub train_frac: f64,
    pub val_frac: f64,
    /// Window stride inside each split; 0 means one window per `horizon` rows.
    pub stride: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        let w = WalkConfig::default();
        let c = ChangepointSpec::default();
        Self {
            source: DataSource::Synthetic(SyntheticKind::Changepoint),
            n: c.n,
            length: c.blocks,
            sigma: c.sigma,
            t_c: c.t_c,
            lags: c.lags,
            ramp: c.ramp,
            shared_amp: c.shared_amp,
            private_amp: c.private_amp,
            horizon: m.horizon,
            hidden: m.hidden,
            embed_dim: w.dim,
            q_hidden: m.q_hidden,
            kappa: m.kappa,
            eta: None,
            p: w.p,
            q: w.q,
            rho: m.rho,
            dtw_window: m.dtw_window,
            time_feature: m.time_feature,
            n_omega: t.n_omega,
            batch_size: t.batch_size,
            lr: t.q_lr,
            predictor_lr: t.predictor_lr,
            max_episodes: t.max_episodes,
            warmup_episodes: t.warmup_episodes,
            update_every: t.update_every,
            target_sync: t.target_sync,
            lambda_ramp_frac: t.lambda_ramp_frac,
            double_selection: t.double_selection,
            dense_supervision: t.dense_supervision,
            replay_capacity: t.replay_capacity,
            eval_every: t.eval_every,
            patience: t.patience,
            seed: t.seed,
            no_similarity: false,
            no_embedding: false,
            fixed_policy: None,
            train_frac: 0.7,
            val_frac: 0.1,
            stride: 1,
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> StemoError {
    StemoError::Config(format!("{key} = {value:?}: expected {what}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, what))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, value, "true or false")),
    }
}

fn parse_opt<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<Option<T>> {
    match value {
        "none" | "auto" | "" => Ok(None),
        v => parse_num(key, v, what).map(Some),
    }
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or(none.to_string(), T::to_string)
}

impl ExperimentConfig {
    /// The settings the acceptance suite uses for the changepoint task.
    pub fn changepoint_task(seed: u64) -> Self {
        Self {
            kappa: 5.0,
            time_feature: true,
            predictor_lr: 0.005,
            warmup_episodes: 500,
            lambda_ramp_frac: 1.0,
            dense_supervision: true,
            stride: 0,
            seed,
            ..Self::default()
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (key, value) = (key.trim(), value.trim());
        match key {
            "source" => {
                self.source = match value {
                    "csv" => match &self.source {
                        DataSource::Csv { .. } => self.source.clone(),
                        _ => DataSource::Csv {
                            series: PathBuf::new(),
                            graph: PathBuf::new(),
                        },
                    },
                    kind => DataSource::Synthetic(SyntheticKind::parse(kind)?),
                }
            }
            "series_path" | "graph_path" => {
                let (mut series, mut graph) = match &self.source {
                    DataSource::Csv { series, graph } => (series.clone(), graph.clone()),
                    DataSource::Synthetic(_) => (PathBuf::new(), PathBuf::new()),
                };
                if key == "series_path" {
                    series = PathBuf::from(value);
                } else {
                    graph = PathBuf::from(value);
                }
                self.source = DataSource::Csv { series, graph };
            }
            "n" => self.n = parse_num(key, value, "a node count")?,
            "length" => self.length = parse_num(key, value, "a length")?,
            "sigma" => self.sigma = parse_num(key, value, "a number")?,
            "t_c" => self.t_c = parse_num(key, value, "a step index")?,
            "lags" => {
                self.lags = value
                    .split(',')
                    .map(|s| parse_num(key, s.trim(), "comma-separated lags"))
                    .collect::<Result<_>>()?
            }
            "ramp" => self.ramp = parse_num(key, value, "a step count")?,
            "shared_amp" => self.shared_amp = parse_num(key, value, "a number")?,
            "private_amp" => self.private_amp = parse_num(key, value, "a number")?,
            "horizon" | "T" => self.horizon = parse_num(key, value, "an integer")?,
            "hidden" | "h" => self.hidden = parse_num(key, value, "an integer")?,
            "embed_dim" | "e" => self.embed_dim = parse_num(key, value, "an integer")?,
            "q_hidden" => self.q_hidden = parse_num(key, value, "an integer")?,
            "kappa" => self.kappa = parse_num(key, value, "a number")?,
            "eta" => self.eta = parse_opt(key, value, "a number or auto")?,
            "p" => self.p = parse_num(key, value, "a number")?,
            "q" => self.q = parse_num(key, value, "a number")?,
            "rho" => self.rho = parse_num(key, value, "a number")?,
            "dtw_window" => self.dtw_window = parse_opt(key, value, "an integer or none")?,
            "time_feature" => self.time_feature = parse_bool(key, value)?,
            "n_omega" => self.n_omega = parse_num(key, value, "an integer")?,
            "batch_size" => self.batch_size = parse_num(key, value, "an integer")?,
            "lr" => self.lr = parse_num(key, value, "a number")?,
            "predictor_lr" => self.predictor_lr = parse_num(key, value, "a number")?,
            "max_episodes" => self.max_episodes = parse_num(key, value, "an integer")?,
            "warmup_episodes" => self.warmup_episodes = parse_num(key, value, "an integer")?,
            "update_every" => self.update_every = parse_num(key, value, "an integer")?,
            "target_sync" => self.target_sync = parse_num(key, value, "an integer")?,
            "lambda_ramp_frac" => self.lambda_ramp_frac = parse_num(key, value, "a number")?,
            "double_selection" => self.double_selection = parse_bool(key, value)?,
            "dense_supervision" => self.dense_supervision = parse_bool(key, value)?,
            "replay_capacity" => self.replay_capacity = parse_num(key, value, "an integer")?,
            "eval_every" => self.eval_every = parse_num(key, value, "an integer")?,
            "patience" => self.patience = parse_num(key, value, "an integer")?,
            "seed" => self.seed = parse_num(key, value, "an unsigned integer")?,
            "no_similarity" => self.no_similarity = parse_bool(key, value)?,
            "no_embedding" => self.no_embedding = parse_bool(key, value)?,
            "fixed_policy" => self.fixed_policy = parse_opt(key, value, "a halt step or none")?,
            "train_frac" => self.train_frac = parse_num(key, value, "a fraction")?,
            "val_frac" => self.val_frac = parse_num(key, value, "a fraction")?,
            "stride" => self.stride = parse_num(key, value, "an integer")?,
            other => return Err(StemoError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| StemoError::Config(format!("line {}: expected key = value, got {line:?}", i + 1)))?;
            cfg.set(k, v)
                .map_err(|e| StemoError::Config(format!("line {}: {}", i + 1, e.root())))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| StemoError::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies `key=value` overrides, as given on the command line.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| StemoError::Config(format!("override {o:?} is not key=value")))?;
            self.set(k, v)?;
        }
        self.validate()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match &self.source {
            DataSource::Synthetic(kind) => {
                let _ = writeln!(s, "source = {}", kind.name());
            }
            DataSource::Csv { series, graph } => {
                let _ = writeln!(s, "source = csv");
                let _ = writeln!(s, "series_path = {}", series.display());
                let _ = writeln!(s, "graph_path = {}", graph.display());
            }
        }
        let lags: Vec<String> = self.lags.iter().map(usize::to_string).collect();
        let pairs: Vec<(&str, String)> = vec![
            ("n", self.n.to_string()),
            ("length", self.length.to_string()),
            ("sigma", self.sigma.to_string()),
            ("t_c", self.t_c.to_string()),
            ("lags", lags.join(",")),
            ("ramp", self.ramp.to_string()),
            ("shared_amp", self.shared_amp.to_string()),
            ("private_amp", self.private_amp.to_string()),
            ("horizon", self.horizon.to_string()),
            ("hidden", self.hidden.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("q_hidden", self.q_hidden.to_string()),
            ("kappa", self.kappa.to_string()),
            ("eta", fmt_opt(&self.eta, "auto")),
            ("p", self.p.to_string()),
            ("q", self.q.to_string()),
            ("rho", self.rho.to_string()),
            ("dtw_window", fmt_opt(&self.dtw_window, "none")),
            ("time_feature", self.time_feature.to_string()),
            ("n_omega", self.n_omega.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("lr", self.lr.to_string()),
            ("predictor_lr", self.predictor_lr.to_string()),
            ("max_episodes", self.max_episodes.to_string()),
            ("warmup_episodes", self.warmup_episodes.to_string()),
            ("update_every", self.update_every.to_string()),
            ("target_sync", self.target_sync.to_string()),
            ("lambda_ramp_frac", self.lambda_ramp_frac.to_string()),
            ("double_selection", self.double_selection.to_string()),
            ("dense_supervision", self.dense_supervision.to_string()),
            ("replay_capacity", self.replay_capacity.to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("patience", self.patience.to_string()),
            ("seed", self.seed.to_string()),
            ("no_similarity", self.no_similarity.to_string()),
            ("no_embedding", self.no_embedding.to_string()),
            ("fixed_policy", fmt_opt(&self.fixed_policy, "none")),
            ("train_frac", self.train_frac.to_string()),
            ("val_frac", self.val_frac.to_string()),
            ("stride", self.stride.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(StemoError::Config(format!("horizon must be at least 2, got {}", self.horizon)));
        }
        if let Some(tau) = self.fixed_policy {
            if tau >= self.horizon {
                return Err(StemoError::Config(format!("fixed_policy {tau} outside [0, {}]", self.horizon - 1)));
            }
        }
        if !(self.train_frac > 0.0 && self.val_frac >= 0.0 && self.train_frac + self.val_frac < 1.0) {
            return Err(StemoError::Config(format!(
                "split fractions {}/{} leave no test data",
                self.train_frac, self.val_frac
            )));
        }
        if let DataSource::Csv { series, graph } = &self.source {
            if series.as_os_str().is_empty() || graph.as_os_str().is_empty() {
                return Err(StemoError::Config("csv source needs series_path and graph_path".into()));
            }
        }
        if self.lags.is_empty() {
            return Err(StemoError::Config("lags must not be empty".into()));
        }
        self.model_config().validate()?;
        self.train_config().validate()
    }

    pub fn window_stride(&self) -> usize {
        if self.stride == 0 {
            self.horizon
        } else {
            self.stride
        }
    }

    pub fn ablation(&self) -> Ablation {
        Ablation {
            no_similarity: self.no_similarity,
            no_embedding: self.no_embedding,
            fixed_policy: self.fixed_policy,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            horizon: self.horizon,
            hidden: self.hidden,
            q_hidden: self.q_hidden,
            kappa: self.kappa,
            rho: self.rho,
            gamma: 1.0,
            walk: WalkConfig {
                p: self.p,
                q: self.q,
                dim: self.embed_dim,
                ..WalkConfig::default()
            },
            dtw_window: self.dtw_window,
            time_feature: self.time_feature,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_episodes: self.max_episodes,
            warmup_episodes: self.warmup_episodes,
            batch_size: self.batch_size,
            n_omega: self.n_omega,
            replay_capacity: self.replay_capacity,
            predictor_lr: self.predictor_lr,
            q_lr: self.lr,
            update_every: self.update_every,
            target_sync: self.target_sync,
            lambda_ramp_frac: self.lambda_ramp_frac,
            double_selection: self.double_selection,
            dense_supervision: self.dense_supervision,
            eval_every: self.eval_every,
            patience: self.patience,
            seed: self.seed,
        }
    }

    pub fn changepoint_spec(&self) -> ChangepointSpec {
        ChangepointSpec {
            n: self.n,
            blocks: self.length,
            block_len: self.horizon,
            t_c: self.t_c,
            lags: self.lags.clone(),
            ramp: self.ramp,
            sigma: self.sigma,
            shared_amp: self.shared_amp,
            private_amp: self.private_amp,
            seed: self.seed,
            ..ChangepointSpec::default()
        }
    }

    pub fn periodic_spec(&self) -> PeriodicSpec {
        PeriodicSpec {
            n: self.n,
            days: self.length.div_ceil(288).max(1),
            sigma: self.sigma,
            seed: self.seed,
        }
    }

    pub fn diffusion_spec(&self) -> DiffusionSpec {
        DiffusionSpec {
            n: self.n,
            len: self.length,
            sigma: self.sigma,
            seed: self.seed,
            ..DiffusionSpec::default()
        }
    }
}
