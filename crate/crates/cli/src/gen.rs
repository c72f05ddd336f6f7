//! Writes synthetic problems to disk.

use std::fs;
use std::io::Write;

use serde_json::json;

use sketchy_cgm::probgen::{gen_completion_problem, gen_phase_problem, write_triples};
use sketchy_cgm::{Error, Result};

use crate::config::{ProblemSource, RunConfig};
use crate::solve::write_json;

/// Completion problems become `train.txt` / `test.txt` triple files; phase
/// problems become `b.csv` and `truth.csv` (`re,im` rows). `problem.json`
/// records the generator parameters, which regenerate the operator.
pub fn run_gen(cfg: &RunConfig) -> Result<Vec<String>> {
    fs::create_dir_all(&cfg.out)?;
    match &cfg.problem {
        ProblemSource::Completion(spec) => {
            let p = gen_completion_problem::<f64>(spec)?;
            write_triples(&cfg.out.join("train.txt"), p.op.entries(), p.b.as_slice())?;
            write_triples(&cfg.out.join("test.txt"), &p.test.entries, p.test.values.as_slice())?;
            write_json(
                &cfg.out.join("problem.json"),
                &json!({
                    "problem": "completion",
                    "m": spec.m, "n": spec.n, "true_rank": spec.rank,
                    "observed": spec.observed, "test_fraction": spec.test_fraction,
                    "noise_std": spec.noise_std, "seed": spec.seed,
                }),
            )?;
            Ok(vec!["train.txt".into(), "test.txt".into(), "problem.json".into()])
        }
        ProblemSource::Phase(spec) => {
            let p = gen_phase_problem::<f64>(spec)?;
            let mut b = fs::File::create(cfg.out.join("b.csv"))?;
            for v in p.b.iter() {
                writeln!(b, "{v}")?;
            }
            let mut truth = fs::File::create(cfg.out.join("truth.csv"))?;
            for v in p.truth.iter() {
                writeln!(truth, "{},{}", v.re, v.im)?;
            }
            write_json(
                &cfg.out.join("problem.json"),
                &json!({
                    "problem": "phase",
                    "n": spec.n, "views": spec.views, "noise": format!("{:?}", spec.noise),
                    "seed": spec.seed, "alpha": p.alpha,
                }),
            )?;
            Ok(vec!["b.csv".into(), "truth.csv".into(), "problem.json".into()])
        }
        ProblemSource::Triples { .. } => Err(Error::InvalidParameter(
            "gen needs a synthetic problem (completion or phase)".into(),
        )),
    }
}
