use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use sketchy_cgm::Result;
use sketchy_cgm_cli::config::{load_kv, merge, Command, ConfigMap, RunConfig};
use sketchy_cgm_cli::{error_json, run};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Solve,
    SketchTest,
    BenchMemory,
    Gen,
}

/// Storage-optimal conditional gradient solver.
#[derive(Debug, Parser)]
#[command(name = "sketchycgm", version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// completion | phase | triples
    #[arg(long)]
    problem: Option<String>,
    /// schatten1 | psd
    #[arg(long)]
    template: Option<String>,
    /// gauss | huber | logistic | poisson
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    rank: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// value | mean-b | nuclear
    #[arg(long)]
    alpha_mode: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    /// standard | poisson
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    trace_every: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other config key, e.g. `--set views=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Cli {
    fn config(&self) -> Result<RunConfig> {
        let mut map = match &self.config {
            Some(path) => load_kv(path)?,
            None => ConfigMap::new(),
        };
        let flags = [
            ("problem", &self.problem),
            ("template", &self.template),
            ("loss", &self.loss),
            ("rank", &self.rank),
            ("alpha", &self.alpha),
            ("alpha_mode", &self.alpha_mode),
            ("eps", &self.eps),
            ("max_iters", &self.max_iters),
            ("variant", &self.variant),
            ("seed", &self.seed),
            ("trace_every", &self.trace_every),
        ];
        let mut overrides: Vec<(String, String)> = flags
            .iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        if let Some(out) = &self.out {
            overrides.push(("out".into(), out.display().to_string()));
        }
        for pair in &self.set {
            let (k, v) = pair.split_once('=').ok_or_else(|| {
                sketchy_cgm::Error::InvalidParameter(format!("--set expects KEY=VALUE, got '{pair}'"))
            })?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        merge(&mut map, overrides)?;
        let command = match self.command {
            Sub::Solve => Command::Solve,
            Sub::SketchTest => Command::SketchTest,
            Sub::BenchMemory => Command::BenchMemory,
            Sub::Gen => Command::Gen,
        };
        RunConfig::from_map(command, &map)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.config().and_then(|cfg| run(&cfg)) {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", error_json(&err));
            ExitCode::from(2)
        }
    }
}
