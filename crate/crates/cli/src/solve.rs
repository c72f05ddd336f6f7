use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use sketchy_cgm::ledger::AllocationLedger;
use sketchy_cgm::linalg::thin_svd;
use sketchy_cgm::losses::{Loss, LossKind, Normalization};
use sketchy_cgm::operators::MeasurementOperator;
use sketchy_cgm::probgen::{gen_completion_problem, gen_phase_problem, load_triples, Triples};
use sketchy_cgm::reference::{phase_aligned_error, test_error, EvalSpec};
use sketchy_cgm::scalar::Scalar;
use sketchy_cgm::sketch::FactoredMatrix;
use sketchy_cgm::solver::{IterationRecord, ProblemSpec, SketchyCgm, Solution, Status};
use sketchy_cgm::{Error, Result};

use crate::config::{AlphaChoice, ProblemSource, RunConfig};

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub gap: f64,
    pub objective: f64,
    pub iters: usize,
    pub peak_scalars: u64,
    pub metrics: BTreeMap<String, f64>,
}

impl Summary {
    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }
}

/// Runs `solve`, writing artifacts to `cfg.out`. An alpha sweep writes one
/// subdirectory per value plus `sweep.csv`.
pub fn run_solve(cfg: &RunConfig) -> Result<Vec<Summary>> {
    fs::create_dir_all(&cfg.out)?;
    match &cfg.alpha {
        AlphaChoice::Sweep(values) => {
            let mut summaries = Vec::with_capacity(values.len());
            for (k, &alpha) in values.iter().enumerate() {
                let mut single = cfg.clone();
                single.alpha = AlphaChoice::Value(alpha);
                single.out = cfg.out.join(format!("alpha_{k}"));
                fs::create_dir_all(&single.out)?;
                summaries.push(solve_one(&single)?);
            }
            write_sweep(&cfg.out.join("sweep.csv"), values, &summaries)?;
            Ok(summaries)
        }
        _ => Ok(vec![solve_one(cfg)?]),
    }
}

fn solve_one(cfg: &RunConfig) -> Result<Summary> {
    let ledger = AllocationLedger::new();
    let Outcome { trace, status, iterations, objective, gap, mut metrics, alpha } = ledger.scope(|| match &cfg.problem {
        ProblemSource::Completion(spec) => {
            let problem = gen_completion_problem::<f64>(spec)?;
            let alpha = match cfg.alpha {
                AlphaChoice::Nuclear(scale) => scale * nuclear_norm(&problem.left, &problem.right),
                AlphaChoice::Value(a) => a,
                _ => return Err(Error::InvalidParameter("alpha_mode mean-b applies to phase retrieval".into())),
            };
            let (b, test) = labels_for(cfg.loss, problem.b.clone(), problem.test.clone());
            let loss = Loss::new(cfg.loss, b, Normalization::Mean)?;
            let spec = configure(ProblemSpec::new(problem.op.clone(), loss, alpha, cfg.template), cfg);
            let (left, right) = (problem.left.clone(), problem.right.clone());
            let solution = run_traced(spec, cfg.trace_every, |f| {
                let mut out = vec![("relative_error".to_string(), factored_relative_error(f, &left, &right))];
                if !test.entries.is_empty() {
                    out.push(("test_error".into(), test_error(f, &test).unwrap_or(f64::NAN)));
                }
                out
            })?;
            finish(solution, BTreeMap::new(), alpha, &cfg.out)
        }
        ProblemSource::Phase(spec) => {
            let problem = gen_phase_problem::<f64>(spec)?;
            let alpha = match cfg.alpha {
                AlphaChoice::MeanB => problem.alpha,
                AlphaChoice::Value(a) => a,
                _ => return Err(Error::InvalidParameter("phase retrieval takes alpha or alpha_mode mean-b".into())),
            };
            let loss = Loss::new(cfg.loss, problem.b.clone(), Normalization::Sum)?;
            let spec = configure(ProblemSpec::new(problem.op.clone(), loss, alpha, cfg.template), cfg);
            let truth = problem.truth.clone();
            let solution = run_traced(spec, cfg.trace_every, |f| {
                let err = phase_aligned_error(&f.leading_vector(), &truth).unwrap_or(f64::NAN);
                vec![("phase_aligned_error".to_string(), err)]
            })?;
            finish(solution, BTreeMap::new(), alpha, &cfg.out)
        }
        ProblemSource::Triples { train, test } => {
            let train = load_triples(existing(train)?)?;
            let alpha = match cfg.alpha {
                AlphaChoice::Value(a) => a,
                _ => return Err(Error::InvalidParameter("triple files need an explicit alpha".into())),
            };
            let test = match test {
                Some(path) => Some(align_test(&train, &load_triples(existing(path)?)?)),
                None => None,
            };
            let values = DVector::from_vec(train.values.clone());
            let empty = EvalSpec { entries: vec![], values: DVector::zeros(0), loss: cfg.loss };
            let (b, test) = labels_for(cfg.loss, values, test.unwrap_or(empty));
            let loss = Loss::new(cfg.loss, b, Normalization::Mean)?;
            let spec = configure(ProblemSpec::<f64, _>::new(train.operator()?, loss, alpha, cfg.template), cfg);
            let mut extra = BTreeMap::new();
            extra.insert("rows".to_string(), train.m as f64);
            extra.insert("cols".to_string(), train.n as f64);
            let solution = run_traced(spec, cfg.trace_every, |f| {
                if test.entries.is_empty() {
                    vec![]
                } else {
                    vec![("test_error".to_string(), test_error(f, &test).unwrap_or(f64::NAN))]
                }
            })?;
            finish(solution, extra, alpha, &cfg.out)
        }
    })?;
    if let Some(last) = trace.last() {
        metrics.extend(last.metrics.iter().cloned());
    }
    metrics.insert("alpha".into(), alpha);
    metrics.insert("converged".into(), if status == Status::Converged { 1.0 } else { 0.0 });
    write_trace(&cfg.out.join("trace.csv"), &trace)?;
    let summary = Summary {
        gap,
        objective,
        iters: iterations,
        peak_scalars: ledger.peak(),
        metrics,
    };
    write_json(&cfg.out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// A finished run with the field-specific factors already written.
struct Outcome {
    trace: Vec<IterationRecord>,
    status: Status,
    iterations: usize,
    objective: f64,
    gap: f64,
    metrics: BTreeMap<String, f64>,
    alpha: f64,
}

fn finish<T: Scalar>(solution: Solution<T>, metrics: BTreeMap<String, f64>, alpha: f64, out: &Path) -> Result<Outcome> {
    solution.factors.write_csv(out)?;
    Ok(Outcome {
        trace: solution.trace,
        status: solution.status,
        iterations: solution.iterations,
        objective: solution.objective,
        gap: solution.gap,
        metrics,
        alpha,
    })
}

fn existing(path: &Path) -> Result<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("data file '{}' not found", path.display()),
        )))
    }
}

fn configure<T: Scalar, O: MeasurementOperator<T>>(spec: ProblemSpec<T, O>, cfg: &RunConfig) -> ProblemSpec<T, O> {
    spec.rank(cfg.rank)
        .eps(cfg.eps)
        .max_iters(cfg.max_iters)
        .variant(cfg.variant)
        .seed(cfg.seed)
}

fn run_traced<T, O, F>(spec: ProblemSpec<T, O>, trace_every: usize, metrics: F) -> Result<Solution<T>>
where
    T: Scalar,
    O: MeasurementOperator<T>,
    F: FnMut(&FactoredMatrix<T>) -> Vec<(String, f64)>,
{
    let every = if trace_every == 0 { usize::MAX } else { trace_every };
    SketchyCgm::new(spec)?.run(Some(every), metrics)
}

/// The logistic loss needs `+-1` labels: values above the midpoint `0`
/// (synthetic data) or `3.5` (ratings, via [`Triples::binarized`]) map to `+1`.
fn labels_for(loss: LossKind, b: DVector<f64>, mut test: EvalSpec<f64>) -> (DVector<f64>, EvalSpec<f64>) {
    test.loss = loss;
    if loss != LossKind::Logistic {
        return (b, test);
    }
    let already = |v: &DVector<f64>| v.iter().all(|x| *x == 1.0 || *x == -1.0);
    let rating = |v: &DVector<f64>| v.iter().all(|x| *x >= 1.0);
    let threshold = if rating(&b) && !already(&b) { 3.5 } else { 0.0 };
    let sign = |x: f64| if x > threshold { 1.0 } else { -1.0 };
    if !already(&b) {
        test.values = test.values.map(sign);
        (b.map(sign), test)
    } else {
        (b, test)
    }
}

/// Test entries re-indexed into the training matrix; entries in rows or
/// columns absent from training are dropped.
fn align_test(train: &Triples, test: &Triples) -> EvalSpec<f64> {
    let rows: HashMap<usize, usize> = train.row_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let cols: HashMap<usize, usize> = train.col_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let mut entries = Vec::new();
    let mut values = Vec::new();
    for (&(i, j), &v) in test.entries.iter().zip(&test.values) {
        if let (Some(&r), Some(&c)) = (rows.get(&test.row_ids[i]), cols.get(&test.col_ids[j])) {
            entries.push((r, c));
            values.push(v);
        }
    }
    EvalSpec { entries, values: DVector::from_vec(values), loss: LossKind::Gauss }
}

fn nuclear_norm(left: &DMatrix<f64>, right: &DMatrix<f64>) -> f64 {
    thin_svd(&(left * right.transpose())).s.iter().sum()
}

/// `||U S V^T - L R^T||_F / ||L R^T||_F` without forming either matrix.
pub fn factored_relative_error(f: &FactoredMatrix<f64>, left: &DMatrix<f64>, right: &DMatrix<f64>) -> f64 {
    let s = DMatrix::from_diagonal(&f.sigma);
    let uu = f.u.transpose() * &f.u;
    let vv = f.v.transpose() * &f.v;
    let est = (&s * uu * &s * vv).trace();
    let truth = ((left.transpose() * left) * (right.transpose() * right)).trace();
    let cross = (&s * (f.u.transpose() * left) * (right.transpose() * &f.v)).trace();
    (est + truth - 2.0 * cross).max(0.0).sqrt() / truth.sqrt()
}

pub fn write_trace(path: &Path, trace: &[IterationRecord]) -> Result<()> {
    let mut names: Vec<String> = Vec::new();
    for record in trace {
        for (name, _) in &record.metrics {
            if !names.contains(name) {
                names.push(name.clone());
            }
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let mut header = vec!["t", "objective", "gap", "eta", "wall_ms"];
    header.extend(names.iter().map(String::as_str));
    w.write_record(&header).map_err(csv_error)?;
    for record in trace {
        let mut row = vec![
            record.t.to_string(),
            record.objective.to_string(),
            record.gap.to_string(),
            record.eta.to_string(),
            format!("{:.3}", record.wall_ms),
        ];
        row.extend(names.iter().map(|n| record.metric(n).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn write_sweep(path: &Path, alphas: &[f64], summaries: &[Summary]) -> Result<()> {
    let mut names: Vec<&String> = summaries.iter().flat_map(|s| s.metrics.keys()).collect();
    names.sort();
    names.dedup();
    names.retain(|n| n.as_str() != "alpha");
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let mut header = vec!["alpha", "objective", "gap", "iters"];
    header.extend(names.iter().map(|s| s.as_str()));
    w.write_record(&header).map_err(csv_error)?;
    for (alpha, s) in alphas.iter().zip(summaries) {
        let mut row = vec![alpha.to_string(), s.objective.to_string(), s.gap.to_string(), s.iters.to_string()];
        row.extend(names.iter().map(|n| s.metrics.get(*n).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidParameter(format!("csv: {other:?}")),
    }
}
