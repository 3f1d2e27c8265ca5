use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pinchflow::config::{load_config, ConfigError, RunConfig};
use pinchflow::controller::{run, RunError, RunReport, RunStatus};
use pinchflow::exact::{product_sphere_curvatures, ProductSphereState};
use pinchflow::oracle::product_sphere_oracle;
use pinchflow::poincare::poincare_gamma_search;
use pinchflow::report::{emit_report, emit_timeseries};

const EXIT_VIOLATION: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "pinchflow", version, about = "Pinched mean curvature flow with surgery in the sphere")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write timeseries.csv and report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a scenario and fail on any monitored invariant.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Brute-force the constant of the algebraic Poincare inequality.
    GammaSearch {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
        #[arg(long, default_value_t = 200_000)]
        budget: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare exact product-sphere curvatures with finite differences of the embedding.
    Oracle {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        k_curv: f64,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig, ExitCode> {
    match load_config(&path.to_string_lossy()) {
        Ok(mut c) => {
            if let Some(s) = seed {
                c.seed = s;
            }
            Ok(c)
        }
        Err(e) => {
            eprintln!("{e}");
            Err(ExitCode::from(EXIT_CONFIG))
        }
    }
}

fn execute(cfg: &RunConfig) -> Result<RunReport, ExitCode> {
    run(cfg).map_err(|e| {
        eprintln!("{e}");
        match e {
            RunError::Config(_) | RunError::NotInClass(_) => ExitCode::from(EXIT_CONFIG),
        }
    })
}

fn write_outputs(report: &RunReport, out: &Path) -> Result<(), ExitCode> {
    let res = std::fs::create_dir_all(out)
        .and_then(|_| emit_timeseries(report, &out.join("timeseries.csv")))
        .and_then(|_| emit_report(report, &out.join("report.json")));
    res.map_err(|e| {
        eprintln!("cannot write to {}: {e}", out.display());
        ExitCode::FAILURE
    })
}

fn summary(report: &RunReport) {
    let status = serde_json::to_string(&report.status).unwrap_or_default();
    println!("status {}", status.trim_matches('"'));
    if let Some(c) = &report.classification {
        println!("classification {c}");
    }
    println!("steps {} Kt_final {:e} surgeries {}", report.steps, report.t_final_k, report.events.len());
    for d in &report.diagnostics {
        println!("note: {d}");
    }
    for v in &report.invariant_violations {
        println!("violation: {v}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Run { config, out, seed } => (|| {
            let cfg = load(&config, seed)?;
            let report = execute(&cfg)?;
            write_outputs(&report, &out)?;
            summary(&report);
            Ok(if report.invariant_violations.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VIOLATION) })
        })(),
        Cmd::Verify { config, out, seed } => (|| {
            let cfg = load(&config, seed)?;
            let report = execute(&cfg)?;
            if let Some(out) = out {
                write_outputs(&report, &out)?;
            }
            for c in &report.estimates.checks {
                println!("{} {:<22} sup {:e}  {}", if c.violated { "FAIL" } else { "ok  " }, c.name, c.sup, c.detail);
            }
            summary(&report);
            let bad = !report.invariant_violations.is_empty() || report.status == RunStatus::UnresolvedSingularity;
            Ok(if bad { ExitCode::from(EXIT_VIOLATION) } else { ExitCode::SUCCESS })
        })(),
        Cmd::GammaSearch { n, alpha, eta, budget, seed, out } => (|| {
            let g = poincare_gamma_search(n, alpha, eta, budget, seed).map_err(|e| {
                eprintln!("{}", ConfigError::Violations(vec![e.to_string()]));
                ExitCode::from(EXIT_CONFIG)
            })?;
            let text = serde_json::to_string_pretty(&g).expect("serializes");
            match out {
                Some(p) => std::fs::write(&p, text + "\n").map_err(|e| {
                    eprintln!("cannot write {}: {e}", p.display());
                    ExitCode::FAILURE
                })?,
                None => println!("{text}"),
            }
            Ok(if g.gamma > 0.0 { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VIOLATION) })
        })(),
        Cmd::Oracle { n, k_curv, tol } => (|| {
            if n < 2 || !(k_curv > 0.0) {
                eprintln!("need n >= 2 and K > 0");
                return Err(ExitCode::from(EXIT_CONFIG));
            }
            let mut worst = 0.0f64;
            for k in 1..n {
                for i in 1..20 {
                    let u = i as f64 * std::f64::consts::FRAC_PI_2 / 20.0;
                    let s = ProductSphereState::new(n, k, u).map_err(|_| ExitCode::from(EXIT_CONFIG))?;
                    let exact = product_sphere_curvatures(&s, k_curv).map_err(|_| ExitCode::from(EXIT_CONFIG))?;
                    let mut fd = product_sphere_oracle(n, k, k_curv, u);
                    fd.sort_by(f64::total_cmp);
                    let scale = exact.as_slice().iter().fold(k_curv.sqrt(), |m, l| m.max(l.abs()));
                    for (a, b) in exact.as_slice().iter().zip(&fd) {
                        worst = worst.max((a - b).abs() / scale);
                    }
                }
            }
            println!("product spheres n={n}: max relative curvature error {worst:e} (tol {tol:e})");
            Ok(if worst <= tol { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VIOLATION) })
        })(),
    };
    r.unwrap_or_else(|c| c)
}
