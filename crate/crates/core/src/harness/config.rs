use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::TaskKind;
use crate::optim::TrainConfig;
use crate::synthetic::{ClassTag, CompositionKind, SamplerKind};

/// How the penalty constant `C0` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum C0Choice {
    Fixed(f64),
    /// Best validation loss over the default grid on a pilot fit at the
    /// smallest `n` of the grid.
    Validated,
}

/// Everything a rate experiment needs. Parsed from flat `key = value` text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub class: ClassTag,
    pub d: usize,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub penalty: String,
    pub mix: f64,
    pub c0: C0Choice,
    /// Fixed λ for every `n`, overriding the `C0` rule.
    pub lambda: Option<f64>,
    pub noise_sd: f64,
    pub bound: f64,
    pub sampler: SamplerKind,
    pub bias: bool,
    pub mc_m: usize,
    pub train: TrainConfig,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "task",
    "class",
    "s",
    "beta",
    "pieces",
    "d",
    "k",
    "n_grid",
    "replicates",
    "penalty",
    "mix",
    "c0",
    "lambda",
    "noise_sd",
    "bound",
    "sampler",
    "bias",
    "mc_m",
    "max_iters",
    "tol",
    "step0",
    "backtrack_factor",
    "restarts",
    "init_scale",
    "accelerated",
    "continuation",
    "seed",
    "out",
];

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|(_, v)| v.as_str())
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| cfg_err(format!("line {line}: cannot parse {key} = {v}"))),
        }
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| cfg_err(format!("missing required key `{key}`")))
    }
}

fn parse_entries(text: &str) -> Result<Entries> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(format!("line {}: expected `key = value`", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(cfg_err(format!("line {}: unknown key `{k}`", i + 1)));
        }
        if map.insert(k.to_string(), (i + 1, v.to_string())).is_some() {
            return Err(cfg_err(format!("line {}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(Entries(map))
}

fn parse_class(e: &Entries) -> Result<ClassTag> {
    let name: String = e.require("class")?;
    let s = || e.require::<f64>("s");
    Ok(match name.as_str() {
        "smooth" => ClassTag::Smooth { s: s()? },
        "analytic" => ClassTag::Analytic,
        "besov" => ClassTag::Besov { s: s()? },
        "piecewise" => ClassTag::Piecewise {
            s: s()?,
            beta: e.require("beta")?,
            m: e.or("pieces", 2)?,
        },
        "additive" => ClassTag::Composition {
            kind: CompositionKind::Additive,
            s: s()?,
        },
        "single_index" => ClassTag::Composition {
            kind: CompositionKind::SingleIndex,
            s: s()?,
        },
        "constant" => ClassTag::Constant,
        other => return Err(cfg_err(format!("unknown class `{other}`"))),
    })
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let e = parse_entries(text)?;
        let task = match e.require::<String>("task")?.as_str() {
            "regression" => TaskKind::Regression,
            "binary" => TaskKind::Binary,
            "multiclass" => TaskKind::multiclass(e.require("k")?)?,
            other => return Err(cfg_err(format!("unknown task `{other}`"))),
        };
        if e.raw("k").is_some() && !matches!(task, TaskKind::Multiclass { .. }) {
            return Err(cfg_err("`k` is only valid for multiclass tasks"));
        }
        let n_grid = e
            .require::<String>("n_grid")?
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| cfg_err(format!("bad n_grid entry `{}`", v.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        let c0 = match e.raw("c0") {
            None | Some("auto") => C0Choice::Validated,
            Some(_) => C0Choice::Fixed(e.require("c0")?),
        };
        let defaults = TrainConfig::default();
        let train = TrainConfig {
            max_iters: e.or("max_iters", defaults.max_iters)?,
            tol: e.or("tol", defaults.tol)?,
            step0: e.or("step0", defaults.step0)?,
            backtrack_factor: e.or("backtrack_factor", defaults.backtrack_factor)?,
            restarts: e.or("restarts", defaults.restarts)?,
            init_scale: e.or("init_scale", defaults.init_scale)?,
            accelerated: e.or("accelerated", defaults.accelerated)?,
            continuation: e.or("continuation", defaults.continuation)?,
            seed: 0,
        };
        let cfg = Self {
            task,
            class: parse_class(&e)?,
            d: e.require("d")?,
            n_grid,
            replicates: e.or("replicates", 1)?,
            penalty: e.or("penalty", "l1".to_string())?,
            mix: e.or("mix", 0.5)?,
            c0,
            lambda: e.get("lambda")?,
            noise_sd: e.or("noise_sd", 0.5)?,
            bound: e.or("bound", 1.0)?,
            sampler: SamplerKind::parse(e.raw("sampler").unwrap_or("uniform"))?,
            bias: e.or("bias", true)?,
            mc_m: e.or("mc_m", 20_000)?,
            train,
            seed: e.or("seed", 0)?,
            out: e.get::<String>("out")?.map(PathBuf::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.class.validate(self.d)?;
        self.train.validate()?;
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg_err("n_grid must be non-empty and strictly increasing"));
        }
        if self.replicates == 0 {
            return Err(cfg_err("replicates must be >= 1"));
        }
        if let C0Choice::Fixed(c0) = self.c0 {
            if !(c0 > 0.0 && c0.is_finite()) {
                return Err(cfg_err(format!("c0 must be positive, got {c0}")));
            }
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(cfg_err(format!("lambda must be >= 0, got {l}")));
            }
        }
        crate::penalties::PenaltyKind::from_name(&self.penalty, 1.0, self.mix)?;
        let bound_ok = if self.class == ClassTag::Constant {
            self.bound.is_finite()
        } else {
            self.bound > 0.0 && self.bound.is_finite()
        };
        if !bound_ok || !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(cfg_err("bound must be positive and noise_sd nonnegative"));
        }
        if self.mc_m < crate::evaluation::MIN_MC_SAMPLES {
            return Err(cfg_err(format!(
                "mc_m must be at least {}",
                crate::evaluation::MIN_MC_SAMPLES
            )));
        }
        Ok(())
    }
}
