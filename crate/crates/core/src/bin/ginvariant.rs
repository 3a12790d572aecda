use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ginvariant::density::Family;
use ginvariant::estimator::{EmConfig, Init};
use ginvariant::experiments::{
    fit_command, fz_map, ingest_orientations, run_estimation_sweep, run_roc, simulate, write_quaternions, write_roc,
    write_sweep, FitOptions, Format, GroupKind, Method, RocConfig, RocMethod, SimulateConfig, SweepConfig,
};
use ginvariant::Result;

/// Orientation statistics under crystal symmetry.
#[derive(Parser)]
#[command(name = "ginvariant", version)]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "cubic")]
    group: GroupKind,
    #[arg(long, global = true, default_value = "vmf")]
    family: Family,
    /// Output file (simulate, fit, fz-map) or output stem (sweep, roc).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Reduced sweep and ROC sizes.
    #[arg(long, global = true)]
    desk: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EmArgs {
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
}

impl EmArgs {
    fn config(&self, seed: u64) -> EmConfig {
        EmConfig {
            max_iters: self.max_iters,
            tol: self.tol,
            n_restarts: self.restarts,
            init: Init::FromData,
            seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a wrapped sample and write it as q1,q2,q3,q4.
    Simulate {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 50.0)]
        kappa: f64,
        #[arg(long, default_value_t = 1)]
        clusters: usize,
        /// Keep the raw draws instead of fundamental-zone representatives.
        #[arg(long)]
        no_wrap: bool,
    },
    /// Fit one population, or several with a test against one.
    Fit {
        input: PathBuf,
        #[arg(long, default_value = "quat")]
        format: Format,
        #[arg(long, default_value_t = 1)]
        clusters: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[command(flatten)]
        em: EmArgs,
    },
    /// Estimation accuracy over a grid of concentrations.
    Sweep {
        /// Comma-separated concentrations; overrides the default grid.
        #[arg(long, value_delimiter = ',')]
        kappas: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        /// Generating families; defaults to --family.
        #[arg(long, value_delimiter = ',')]
        generate: Option<Vec<Family>>,
        #[command(flatten)]
        em: EmArgs,
    },
    /// One-versus-two population detection study.
    Roc {
        #[arg(long)]
        sets: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 50.0)]
        kappa: f64,
        #[arg(long, default_value_t = 0.5)]
        p_bimodal: f64,
        #[arg(long)]
        min_separation: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<RocMethod>>,
        #[command(flatten)]
        em: EmArgs,
    },
    /// Map orientations to their fundamental-zone representatives.
    FzMap {
        input: PathBuf,
        #[arg(long, default_value = "quat")]
        format: Format,
    },
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn stem(out: &Option<PathBuf>, default: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| Path::new(default).to_path_buf())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            n,
            kappa,
            clusters,
            no_wrap,
        } => {
            let sim = simulate(&SimulateConfig {
                family: cli.family,
                group: cli.group,
                kappa,
                n,
                clusters,
                wrap: !no_wrap,
                seed: cli.seed,
            })?;
            let header = serde_json::to_string(&sim)?;
            write_quaternions(output(&cli.out)?, &sim.sample, Some(&header))
        }
        Command::Fit {
            input,
            format,
            clusters,
            alpha,
            em,
        } => {
            let opts = FitOptions {
                family: cli.family,
                group: cli.group,
                clusters,
                alpha_level: alpha,
                em: em.config(cli.seed),
            };
            opts.em.validate()?;
            let report = fit_command(&input, format, &opts)?;
            let mut w = output(&cli.out)?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            Ok(w.flush()?)
        }
        Command::Sweep {
            kappas,
            trials,
            n,
            methods,
            generate,
            em,
        } => {
            let mut cfg = if cli.desk {
                SweepConfig::desk(cli.family, cli.group, cli.seed)
            } else {
                SweepConfig::full(cli.family, cli.group, cli.seed)
            };
            cfg.n = n;
            cfg.em = em.config(cli.seed);
            if let Some(k) = kappas {
                cfg.kappa_grid = k;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(m) = methods {
                cfg.methods = m;
            }
            if let Some(g) = generate {
                cfg.generate = g;
            }
            let out = run_estimation_sweep(&cfg)?;
            let (csv, json) = write_sweep(&out, &stem(&cli.out, "sweep"))?;
            eprintln!("wrote {} and {}", csv.display(), json.display());
            Ok(())
        }
        Command::Roc {
            sets,
            n,
            kappa,
            p_bimodal,
            min_separation,
            alpha,
            methods,
            em,
        } => {
            let mut cfg = if cli.desk {
                RocConfig::desk(cli.family, cli.group, cli.seed)
            } else {
                RocConfig::full(cli.family, cli.group, cli.seed)
            };
            if let Some(s) = sets {
                cfg.sets = s;
            }
            cfg.n = n;
            cfg.kappa = kappa;
            cfg.p_bimodal = p_bimodal;
            cfg.min_separation = min_separation;
            cfg.alpha_level = alpha;
            cfg.em = em.config(cli.seed);
            if let Some(m) = methods {
                cfg.methods = m;
            }
            let out = run_roc(&cfg)?;
            for s in &out.summary {
                eprintln!(
                    "{:<16} auc {:>7} fpr {:>7} tpr {:>7}",
                    s.method.as_str(),
                    fmt_opt(s.auc),
                    fmt_opt(s.fpr_at_threshold),
                    fmt_opt(s.tpr_at_threshold)
                );
            }
            let (csv, json) = write_roc(&out, &stem(&cli.out, "roc"))?;
            eprintln!("wrote {} and {}", csv.display(), json.display());
            Ok(())
        }
        Command::FzMap { input, format } => {
            let xs = ingest_orientations(&input, format)?;
            let mapped = fz_map(&xs, cli.group)?;
            write_quaternions(output(&cli.out)?, &mapped, None)
        }
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
