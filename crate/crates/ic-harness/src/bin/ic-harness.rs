use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ic_harness::adversary::AdversarySpec;
use ic_harness::analyze::{analyze_trace_text, report_lines};
use ic_harness::codec::codec_report;
use ic_harness::config::{ConfigError, ExperimentConfig, SchemeKind};
use ic_harness::runner::{comm_fit, run_experiment, write_outputs, RunOutput};
use ic_harness::{iter_base_len, iter_comm_bound};

const USAGE: u8 = 2;
const ASSERTION: u8 = 1;

#[derive(Parser)]
#[command(
    name = "ic-harness",
    about = "Seeded experiments for interactive coding schemes"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trials and write per-trial JSONL and per-cell CSV.
    Run(RunArgs),
    /// Run a T sweep and fit communication against T.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Largest accepted slope of the fit.
        #[arg(long, default_value_t = 18000.0)]
        max_slope: f64,
    },
    /// Decompose a challenge-response trace and check it.
    AnalyzeTrace {
        trace: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Exhaustive AMD and rand5 sweeps, with test vectors.
    CodecTest {
        #[arg(long = "k", default_values_t = vec![4u32])]
        k: Vec<u32>,
        /// Write the report with test vectors as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output path without extension.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scheme, when no config file is given: cr, iter, iter_uf, uf_compiled.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long = "n")]
    n: Option<usize>,
    /// Comma-separated budgets.
    #[arg(long = "t", value_delimiter = ',')]
    t: Option<Vec<usize>>,
    /// Adversary as JSON, e.g. '{"generator":{"name":"prefix_burst"},"choice":"erase"}'.
    #[arg(long)]
    adversary: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

fn build_config(a: &RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &a.config {
        Some(p) => {
            let cfg = ExperimentConfig::from_file(p)?;
            if a.scheme.is_some() || a.n.is_some() {
                return Err(ConfigError::Invalid {
                    field: "scheme",
                    msg: "give --scheme/--n either in the file or as flags".into(),
                });
            }
            cfg
        }
        None => {
            let scheme = a.scheme.as_deref().ok_or(ConfigError::Invalid {
                field: "scheme",
                msg: "required without --config".into(),
            })?;
            let scheme: SchemeKind =
                serde_json::from_value(serde_json::Value::String(scheme.into()))?;
            let adversary: AdversarySpec = match &a.adversary {
                Some(s) => serde_json::from_str(s)?,
                None => AdversarySpec::default(),
            };
            let value = serde_json::json!({
                "scheme": scheme,
                "N": a.n.ok_or(ConfigError::Invalid { field: "N", msg: "required without --config".into() })?,
                "T": a.t.clone().unwrap_or_else(|| vec![0]),
                "adversary": adversary,
                "trials": a.trials.unwrap_or(100),
            });
            serde_json::from_value(value)?
        }
    };
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    if let Some(t) = &a.t {
        cfg.t_values = t.clone();
    }
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(a: &RunArgs) -> Result<(ExperimentConfig, RunOutput), ExitCode> {
    let cfg = build_config(a).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(USAGE)
    })?;
    let out = run_experiment(&cfg).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(USAGE)
    })?;
    for c in &out.cells {
        println!(
            "{} N={} T={}: trials {} success {:.4} comm mean {:.1} max {} violations {} premature {} aborted {} crashed {}",
            c.scheme, c.n, c.t, c.trials, c.success_rate, c.mean_comm, c.max_comm, c.lemma_violations, c.premature_bob, c.aborted, c.crashed
        );
    }
    if let Some(base) = &cfg.out {
        match write_outputs(&cfg, &out, base) {
            Ok((j, c)) => println!("wrote {} and {}", j.display(), c.display()),
            Err(e) => {
                eprintln!("error: {e}");
                return Err(ExitCode::from(USAGE));
            }
        }
    }
    Ok((cfg, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Command::Run(a) => match execute(&a) {
            Ok((_, out)) if out.assertion_failures() == 0 => ExitCode::SUCCESS,
            Ok((_, out)) => {
                eprintln!(
                    "{} trials failed a checked property",
                    out.assertion_failures()
                );
                ExitCode::from(ASSERTION)
            }
            Err(code) => code,
        },
        Command::Sweep { run, max_slope } => {
            let (cfg, out) = match execute(&run) {
                Ok(v) => v,
                Err(code) => return code,
            };
            let mut failed = out.assertion_failures() > 0;
            match comm_fit(&out.results) {
                Some((a, b)) => {
                    let ok = b <= max_slope;
                    println!(
                        "fit: comm = {a:.1} + {b:.3} T (slope bound {max_slope}): {}",
                        if ok { "PASS" } else { "FAIL" }
                    );
                    failed |= !ok;
                }
                None => println!("fit: needs at least two distinct T values"),
            }
            if !cfg.scheme.is_cr() {
                if let Some(l0) = iter_base_len(&cfg) {
                    let over = out
                        .results
                        .iter()
                        .filter(|r| r.comm_bits as f64 > iter_comm_bound(l0, max_slope, r.t))
                        .count();
                    println!(
                        "per-run bound 8*{l0} + {max_slope} T: {over} runs above{}",
                        if over == 0 { ": PASS" } else { ": FAIL" }
                    );
                    failed |= over > 0;
                }
            }
            if failed {
                ExitCode::from(ASSERTION)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::AnalyzeTrace { trace, json } => {
            let text = match std::fs::read_to_string(&trace) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", trace.display());
                    return ExitCode::from(USAGE);
                }
            };
            match analyze_trace_text(&text) {
                Ok(r) => {
                    if json {
                        println!(
                            "{}",
                            serde_json::to_string_pretty(&r).expect("report serializes")
                        );
                    } else {
                        for l in report_lines(&r) {
                            println!("{l}");
                        }
                    }
                    if r.pass() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(ASSERTION)
                    }
                }
                Err(e) => {
                    eprintln!("error: {}: {e}", trace.display());
                    ExitCode::from(USAGE)
                }
            }
        }
        Command::CodecTest { k, out } => {
            let report = match codec_report(&k) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(USAGE);
                }
            };
            for a in &report.amd {
                println!("{}", a.line());
            }
            println!("{}", report.rand5.line());
            if let Some(p) = out {
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                if let Err(e) = std::fs::write(&p, text) {
                    eprintln!("error: {}: {e}", p.display());
                    return ExitCode::from(USAGE);
                }
                println!("wrote {}", p.display());
            }
            if report.pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(ASSERTION)
            }
        }
    }
}
