//! Flat `key = value` run configuration.
//!
//! A config file holds one `key = value` pair per line; `#` starts a comment.
//! Command-line flags are applied on top of the file. Keys may be written
//! with `-` or `_`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sketchy_cgm::losses::LossKind;
use sketchy_cgm::probgen::{Noise, SyntheticCompletionSpec, SyntheticPhaseSpec};
use sketchy_cgm::solver::{Template, Variant};
use sketchy_cgm::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    SketchTest,
    BenchMemory,
    Gen,
}

impl Command {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "solve" => Ok(Command::Solve),
            "sketch-test" => Ok(Command::SketchTest),
            "bench-memory" => Ok(Command::BenchMemory),
            "gen" => Ok(Command::Gen),
            other => Err(Error::InvalidParameter(format!("unknown subcommand '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Completion(SyntheticCompletionSpec),
    Phase(SyntheticPhaseSpec),
    /// `i j value` files; the test file is optional.
    Triples { train: PathBuf, test: Option<PathBuf> },
}

impl ProblemSource {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSource::Completion(_) => "completion",
            ProblemSource::Phase(_) => "phase",
            ProblemSource::Triples { .. } => "triples",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaChoice {
    Value(f64),
    /// Mean of the measurements (phase retrieval).
    MeanB,
    /// A multiple of the nuclear norm of the planted matrix (synthetic
    /// completion only).
    Nuclear(f64),
    /// One solve per value.
    Sweep(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub ns: Vec<usize>,
    pub views: usize,
    pub rank: usize,
    /// Solver iterations per size; peaks are reached in the first few.
    pub iters: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SketchTestConfig {
    pub m: usize,
    pub n: usize,
    pub ranks: Vec<usize>,
    pub trials: usize,
    pub tail_rank: usize,
    pub tail_trials: usize,
    /// Frobenius norm of the tail beyond `tail_rank`.
    pub tau: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem: ProblemSource,
    pub template: Template,
    pub loss: LossKind,
    pub rank: usize,
    pub alpha: AlphaChoice,
    pub eps: f64,
    pub max_iters: usize,
    pub variant: Variant,
    pub seed: u64,
    /// Metrics every this many iterations; 0 records them only at the end.
    pub trace_every: usize,
    pub out: PathBuf,
    pub bench: BenchConfig,
    pub sketch_test: SketchTestConfig,
}

const KEYS: &[&str] = &[
    "problem",
    "template",
    "loss",
    "huber_delta",
    "rank",
    "alpha",
    "alpha_mode",
    "alpha_sweep",
    "eps",
    "max_iters",
    "variant",
    "seed",
    "trace_every",
    "out",
    // synthetic completion
    "m",
    "n",
    "true_rank",
    "observed",
    "test_fraction",
    "noise_std",
    // synthetic phase retrieval
    "views",
    "noise",
    "snr_db",
    // triple files
    "train",
    "test",
    // bench-memory
    "bench_n",
    "bench_iters",
    // sketch-test
    "sketch_m",
    "sketch_n",
    "sketch_ranks",
    "trials",
    "tail_rank",
    "tail_trials",
    "tau",
];

pub type ConfigMap = BTreeMap<String, String>;

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Parses `key = value` lines into a map, reporting the offending line.
pub fn parse_kv(text: &str) -> Result<ConfigMap> {
    let mut map = ConfigMap::new();
    for (k, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(Error::Parse {
                line: k + 1,
                message: format!("expected 'key = value', found '{body}'"),
            });
        };
        let key = normalize(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Parse {
                line: k + 1,
                message: format!("unknown key '{key}'"),
            });
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

pub fn load_kv(path: &Path) -> Result<ConfigMap> {
    parse_kv(&fs::read_to_string(path)?)
}

/// Applies `key=value` overrides on top of `base`.
pub fn merge(base: &mut ConfigMap, overrides: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    for (key, value) in overrides {
        let key = normalize(&key);
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidParameter(format!("unknown key '{key}'")));
        }
        base.insert(key, value);
    }
    Ok(())
}

struct Reader<'a>(&'a ConfigMap);

impl Reader<'_> {
    fn get<V: std::str::FromStr>(&self, key: &str, default: V) -> Result<V> {
        match self.0.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad value '{raw}' for '{key}'"))),
        }
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn list<V: std::str::FromStr>(&self, key: &str, default: Vec<V>) -> Result<Vec<V>> {
        match self.0.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("bad list entry '{s}' for '{key}'")))
                })
                .collect(),
        }
    }
}

impl RunConfig {
    pub fn from_map(command: Command, map: &ConfigMap) -> Result<Self> {
        let r = Reader(map);
        let seed: u64 = r.get("seed", 0)?;
        let problem = match r.str("problem").unwrap_or("completion") {
            "completion" => ProblemSource::Completion(SyntheticCompletionSpec {
                m: r.get("m", 50)?,
                n: r.get("n", 40)?,
                rank: r.get("true_rank", 2)?,
                observed: r.get("observed", 0.5)?,
                test_fraction: r.get("test_fraction", 0.1)?,
                noise_std: r.get("noise_std", 0.0)?,
                seed,
            }),
            "phase" => {
                let snr_db = r.get("snr_db", 20.0)?;
                let noise = match r.str("noise").unwrap_or("none") {
                    "none" => Noise::None,
                    "gaussian" => Noise::Gaussian { snr_db },
                    "poisson" => Noise::Poisson { snr_db },
                    other => return Err(Error::InvalidParameter(format!("unknown noise model '{other}'"))),
                };
                ProblemSource::Phase(SyntheticPhaseSpec {
                    n: r.get("n", 64)?,
                    views: r.get("views", 20)?,
                    noise,
                    seed,
                })
            }
            "triples" => ProblemSource::Triples {
                train: PathBuf::from(
                    r.str("train")
                        .ok_or_else(|| Error::InvalidParameter("problem 'triples' needs a 'train' file".into()))?,
                ),
                test: r.str("test").map(PathBuf::from),
            },
            other => return Err(Error::InvalidParameter(format!("unknown problem '{other}'"))),
        };
        let is_phase = matches!(problem, ProblemSource::Phase(_));
        let template = match r.str("template") {
            Some(t) => Template::parse(t)?,
            None if is_phase => Template::Psd,
            None => Template::Schatten1,
        };
        let loss = match r.str("loss").unwrap_or("gauss") {
            "huber" => LossKind::Huber {
                delta: r.get("huber_delta", 1.0)?,
            },
            other => LossKind::parse(other)?,
        };
        let variant = match r.str("variant") {
            Some(v) => Variant::parse(v)?,
            None if loss == LossKind::Poisson && is_phase => Variant::Poisson,
            None => Variant::Standard,
        };
        let alpha = if map.contains_key("alpha_sweep") {
            AlphaChoice::Sweep(r.list("alpha_sweep", vec![])?)
        } else {
            match r.str("alpha_mode") {
                Some("mean-b") | Some("mean_b") => AlphaChoice::MeanB,
                Some("nuclear") => AlphaChoice::Nuclear(r.get("alpha", 1.0)?),
                Some("value") | None => match map.get("alpha") {
                    Some(_) => AlphaChoice::Value(r.get("alpha", 0.0)?),
                    None if is_phase => AlphaChoice::MeanB,
                    None => AlphaChoice::Nuclear(1.0),
                },
                Some(other) => return Err(Error::InvalidParameter(format!("unknown alpha mode '{other}'"))),
            }
        };
        let cfg = RunConfig {
            command,
            problem,
            template,
            loss,
            rank: r.get("rank", 1)?,
            alpha,
            eps: r.get("eps", 1e-6)?,
            max_iters: r.get("max_iters", 1000)?,
            variant,
            seed,
            trace_every: r.get("trace_every", 0)?,
            out: PathBuf::from(r.str("out").unwrap_or("out")),
            bench: BenchConfig {
                ns: r.list("bench_n", (8..=13).map(|k| 1usize << k).collect())?,
                views: r.get("views", 10)?,
                rank: r.get("rank", 1)?,
                iters: r.get("bench_iters", 3)?,
                seed,
            },
            sketch_test: SketchTestConfig {
                m: r.get("sketch_m", 200)?,
                n: r.get("sketch_n", 150)?,
                ranks: r.list("sketch_ranks", vec![1, 3, 5])?,
                trials: r.get("trials", 50)?,
                tail_rank: r.get("tail_rank", 5)?,
                tail_trials: r.get("tail_trials", 100)?,
                tau: r.get("tau", 0.1)?,
                seed,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-field consistency.
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidParameter("rank must be at least 1".into()));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidParameter("eps must be nonnegative".into()));
        }
        if self.template == Template::Psd && !matches!(self.problem, ProblemSource::Phase(_)) {
            return Err(Error::InvalidParameter(
                "the psd template needs a square problem; use problem = phase".into(),
            ));
        }
        if self.template == Template::Schatten1 && matches!(self.problem, ProblemSource::Phase(_)) {
            return Err(Error::InvalidParameter(
                "phase retrieval lives over the complex field; use template = psd".into(),
            ));
        }
        if self.variant == Variant::Poisson && self.loss != LossKind::Poisson {
            return Err(Error::InvalidParameter("the poisson variant needs the poisson loss".into()));
        }
        match &self.alpha {
            AlphaChoice::Value(a) | AlphaChoice::Nuclear(a) if !(*a > 0.0 && a.is_finite()) => {
                Err(Error::InvalidParameter(format!("alpha must be positive, got {a}")))
            }
            AlphaChoice::Nuclear(_) if !matches!(self.problem, ProblemSource::Completion(_)) => Err(
                Error::InvalidParameter("alpha_mode nuclear needs a synthetic completion problem".into()),
            ),
            AlphaChoice::Sweep(v) if v.is_empty() || v.iter().any(|a| !(*a > 0.0)) => {
                Err(Error::InvalidParameter("alpha_sweep needs positive values".into()))
            }
            _ => Ok(()),
        }
    }
}
