//! Peak live-scalar counts of SketchyCGM and the dense reference on
//! phase retrieval problems of growing size.

use std::path::Path;

use sketchy_cgm::ledger::AllocationLedger;
use sketchy_cgm::losses::{Loss, Normalization};
use sketchy_cgm::probgen::{gen_phase_problem, Noise, SyntheticPhaseSpec};
use sketchy_cgm::reference::{DenseCgm, DENSE_LIMIT};
use sketchy_cgm::solver::{ProblemSpec, SketchyCgm, Template, Variant};
use sketchy_cgm::Result;

use crate::config::BenchConfig;
use crate::solve::csv_error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchRow {
    pub n: usize,
    pub sketchy_peak: u64,
    /// `None` when `n^2` exceeds the dense guard.
    pub dense_peak: Option<u64>,
}

pub fn run_bench_memory(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.ns
        .iter()
        .map(|&n| {
            Ok(BenchRow {
                n,
                sketchy_peak: sketchy_peak(n, cfg)?,
                dense_peak: if n.saturating_mul(n) <= DENSE_LIMIT {
                    Some(dense_peak(n, cfg)?)
                } else {
                    None
                },
            })
        })
        .collect()
}

fn spec_for(n: usize, cfg: &BenchConfig) -> SyntheticPhaseSpec {
    SyntheticPhaseSpec { n, views: cfg.views, noise: Noise::None, seed: cfg.seed }
}

fn sketchy_peak(n: usize, cfg: &BenchConfig) -> Result<u64> {
    let ledger = AllocationLedger::new();
    ledger.scope(|| -> Result<()> {
        let p = gen_phase_problem::<f64>(&spec_for(n, cfg))?;
        let loss = Loss::gauss(p.b.clone(), Normalization::Sum)?;
        let spec = ProblemSpec::new(p.op.clone(), loss, p.alpha, Template::Psd)
            .rank(cfg.rank)
            .max_iters(cfg.iters)
            .eps(f64::MIN_POSITIVE)
            .seed(cfg.seed);
        drop(p);
        let mut solver = SketchyCgm::new(spec)?;
        for _ in 0..cfg.iters {
            solver.step()?;
        }
        solver.reconstruct()?;
        Ok(())
    })?;
    Ok(ledger.peak())
}

fn dense_peak(n: usize, cfg: &BenchConfig) -> Result<u64> {
    let ledger = AllocationLedger::new();
    ledger.scope(|| -> Result<()> {
        let p = gen_phase_problem::<f64>(&spec_for(n, cfg))?;
        let loss = Loss::gauss(p.b.clone(), Normalization::Sum)?;
        let spec = ProblemSpec::new(p.op.clone(), loss, p.alpha, Template::Psd).seed(cfg.seed);
        let cgm = DenseCgm::new(&spec.op, &spec.loss, spec.alpha, Template::Psd, Variant::Standard, spec.spectral)?;
        cgm.run(cfg.iters, 0.0, false)?;
        Ok(())
    })?;
    Ok(ledger.peak())
}

pub fn write_bench(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["n", "sketchycgm_peak_scalars", "dense_cgm_peak_scalars"])
        .map_err(csv_error)?;
    for r in rows {
        let dense = r.dense_peak.map(|d| d.to_string()).unwrap_or_else(|| "oom-guard".into());
        w.write_record([r.n.to_string(), r.sketchy_peak.to_string(), dense])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares fit `peak ~ a + b n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub a: f64,
    pub b: f64,
    /// `max |peak - (a + b n)| / peak`.
    pub max_relative_residual: f64,
}

pub fn linear_fit(rows: &[BenchRow]) -> LinearFit {
    let k = rows.len() as f64;
    let (sx, sy) = rows
        .iter()
        .fold((0.0, 0.0), |(sx, sy), r| (sx + r.n as f64, sy + r.sketchy_peak as f64));
    let (mx, my) = (sx / k, sy / k);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for r in rows {
        let dx = r.n as f64 - mx;
        sxy += dx * (r.sketchy_peak as f64 - my);
        sxx += dx * dx;
    }
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let max_relative_residual = rows
        .iter()
        .map(|r| {
            let y = r.sketchy_peak as f64;
            (y - (a + b * r.n as f64)).abs() / y
        })
        .fold(0.0, f64::max);
    LinearFit { a, b, max_relative_residual }
}

/// Ratios of dense peaks at consecutive sizes where both were run.
pub fn dense_ratios(rows: &[BenchRow]) -> Vec<(usize, usize, f64)> {
    rows.windows(2)
        .filter_map(|w| match (w[0].dense_peak, w[1].dense_peak) {
            (Some(a), Some(b)) => Some((w[0].n, w[1].n, b as f64 / a as f64)),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_line() {
        let rows: Vec<BenchRow> = [100, 200, 400]
            .iter()
            .map(|&n| BenchRow { n, sketchy_peak: 50 + 7 * n as u64, dense_peak: None })
            .collect();
        let fit = linear_fit(&rows);
        assert!((fit.a - 50.0).abs() < 1e-9 && (fit.b - 7.0).abs() < 1e-12);
        assert!(fit.max_relative_residual < 1e-12);
    }

    #[test]
    fn ratios_skip_guarded_rows() {
        let rows = [
            BenchRow { n: 1, sketchy_peak: 1, dense_peak: Some(10) },
            BenchRow { n: 2, sketchy_peak: 2, dense_peak: Some(40) },
            BenchRow { n: 4, sketchy_peak: 4, dense_peak: None },
        ];
        assert_eq!(dense_ratios(&rows), vec![(1, 2, 4.0)]);
    }
}
