//! Library behind the `sketchycgm` binary: configuration, the four
//! subcommands and their on-disk artifacts.

pub mod bench;
pub mod config;
pub mod gen;
pub mod solve;

use serde_json::json;
use sketchy_cgm::{Error, Result};

use config::{Command, RunConfig};

/// Runs a subcommand and returns a one-line human summary.
pub fn run(cfg: &RunConfig) -> Result<String> {
    match cfg.command {
        Command::Solve => {
            let summaries = solve::run_solve(cfg)?;
            Ok(summaries
                .iter()
                .map(|s| format!("objective {:.6e} gap {:.3e} iters {} peak {}", s.objective, s.gap, s.iters, s.peak_scalars))
                .collect::<Vec<_>>()
                .join("\n"))
        }
        Command::Gen => Ok(format!("wrote {}", gen::run_gen(cfg)?.join(", "))),
        Command::BenchMemory => {
            std::fs::create_dir_all(&cfg.out)?;
            let rows = bench::run_bench_memory(&cfg.bench)?;
            bench::write_bench(&cfg.out.join("bench.csv"), &rows)?;
            let fit = bench::linear_fit(&rows);
            let ratios = bench::dense_ratios(&rows);
            Ok(format!(
                "sketchycgm peak ~ {:.1} + {:.2} n (max residual {:.2}%); dense ratios {:?}",
                fit.a,
                fit.b,
                100.0 * fit.max_relative_residual,
                ratios.iter().map(|r| r.2).collect::<Vec<_>>()
            ))
        }
        Command::SketchTest => {
            std::fs::create_dir_all(&cfg.out)?;
            let report = sketch_test::run_sketch_test(&cfg.sketch_test)?;
            solve::write_json(&cfg.out.join("report.json"), &report)?;
            let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
            Ok(format!(
                "exactness {} (worst {:.2e}); tail bound {} (mean {:.4} vs {:.4})",
                verdict(report.exactness_pass),
                report.exactness.iter().map(|r| r.max_relative_error).fold(0.0, f64::max),
                verdict(report.tail_pass),
                report.tail_mean_error,
                report.tail_bound
            ))
        }
    }
}

/// Machine-readable error report.
pub fn error_json(err: &Error) -> serde_json::Value {
    let mut v = json!({ "error": err.kind(), "message": err.to_string() });
    if let Error::Parse { line, .. } | Error::IndexOutOfRange { line, .. } = err {
        v["line"] = json!(line);
    }
    v
}
