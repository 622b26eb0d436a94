//! Batch front-end: load scenario files or presets, run simulations and
//! comparisons, emit reports and plot-ready CSV data.
//!
//! Exit codes: 0 clean completion, 1 config or internal error, 2 envelope
//! violations, 3 numeric abort.

use std::path::PathBuf;
use std::thread;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ppfsync_core::engine::{envelope_audit, run_scenario, write_outputs, SimLog};
use ppfsync_core::graph::gain_check;
use ppfsync_core::ppf::TransformVariant;
use ppfsync_core::scenario::{load_scenario, presets, Overrides, ScenarioConfig};

/// Default output root when neither `--out` nor the config name one.
const OUT_ENV: &str = "PPF_SYNC_OUT";

#[derive(Parser)]
#[command(name = "ppfsync", version, about = "Leader-follower synchronization of unknown nonlinear multi-agent systems under neuro-adaptive funnel control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write states/controls/errors/epsilon/weights CSVs,
    /// events.jsonl and report.json
    Run {
        /// Scenario file path or preset name (see list-examples)
        scenario: String,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run both transform variants with the same seed and compare chattering
    Compare {
        scenario: String,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Print the gain sufficiency report for a scenario
    CheckGains { scenario: String },
    /// Parse and validate a scenario without running it
    Validate { scenario: String },
    /// List the built-in example scenarios
    ListExamples,
}

#[derive(Args)]
struct OverrideArgs {
    /// Output directory (default: config out_dir, then `$PPF_SYNC_OUT/{name}`,
    /// then `./out/{name}`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Integrator step override, seconds
    #[arg(long)]
    step: Option<f64>,
    /// Horizon override, seconds
    #[arg(long)]
    horizon: Option<f64>,
    /// Transform variant override
    #[arg(long, value_enum)]
    transform: Option<TransformArg>,
    /// Log every n-th step (1 = raw rate)
    #[arg(long)]
    decimate: Option<usize>,
}

#[derive(Copy, Clone, ValueEnum)]
enum TransformArg {
    Sign,
    Erf,
}

impl From<TransformArg> for TransformVariant {
    fn from(v: TransformArg) -> Self {
        match v {
            TransformArg::Sign => TransformVariant::SignExact,
            TransformArg::Erf => TransformVariant::ErfSmooth,
        }
    }
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            step: self.step,
            horizon: self.horizon,
            transform: self.transform.map(Into::into),
            decimate: self.decimate,
            out_dir: self.out.clone(),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { scenario, overrides } => cmd_run(&scenario, &overrides),
        Command::Compare { scenario, overrides } => cmd_compare(&scenario, &overrides),
        Command::CheckGains { scenario } => cmd_check_gains(&scenario),
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::ListExamples => {
            for (name, description, _) in presets() {
                println!("{name:<22} {description}");
            }
            Ok(0)
        }
    }
}

fn out_dir_for(cfg: &ScenarioConfig, suffix: Option<&str>) -> PathBuf {
    let mut base = cfg.sim.out_dir.clone().unwrap_or_else(|| {
        std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"))
            .join(&cfg.name)
    });
    if let Some(suffix) = suffix {
        base = base.join(suffix);
    }
    base
}

fn exit_code_for(log: &SimLog) -> i32 {
    if log.summary.aborted {
        3
    } else if log.summary.total_violations() > 0 {
        2
    } else {
        0
    }
}

fn print_run_summary(log: &SimLog) {
    let s = &log.summary;
    println!(
        "t_end = {:.4} s   aborted = {}   envelope violations = {}   clamp steps = {}",
        s.final_time,
        s.aborted,
        s.total_violations(),
        s.clamp_steps.iter().sum::<usize>(),
    );
    println!(
        "final ||e|| = {:.6}   max ||W_i|| = {:?}",
        s.final_error_norm,
        s.max_weight_norms.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
    );
    for event in log.events.iter().take(5) {
        println!("event: {}", serde_json::to_string(event).unwrap_or_default());
    }
    if log.events.len() > 5 {
        println!("... {} more events in events.jsonl", log.events.len() - 5);
    }
}

fn cmd_run(scenario: &str, args: &OverrideArgs) -> Result<i32> {
    let cfg = load_scenario(scenario, &args.to_overrides())?;
    let log = run_scenario(&cfg)?;
    let dir = out_dir_for(&cfg, None);
    write_outputs(&log, &dir).with_context(|| format!("writing outputs to {}", dir.display()))?;
    println!("scenario '{}' ({:?} transform), artifacts in {}", cfg.name, log.meta.variant, dir.display());
    print_run_summary(&log);
    Ok(exit_code_for(&log))
}

fn cmd_compare(scenario: &str, args: &OverrideArgs) -> Result<i32> {
    let mut base = args.to_overrides();
    base.transform = None;
    let mk = |variant: TransformVariant| -> Result<ScenarioConfig> {
        let ov = Overrides { transform: Some(variant), ..base.clone() };
        Ok(load_scenario(scenario, &ov)?)
    };
    let cfg_sign = mk(TransformVariant::SignExact)?;
    let cfg_erf = mk(TransformVariant::ErfSmooth)?;

    // the two runs are independent jobs sharing nothing but the config
    let handle = thread::spawn(move || run_scenario(&cfg_sign));
    let log_erf = run_scenario(&cfg_erf)?;
    let log_sign = handle
        .join()
        .map_err(|_| anyhow!("sign-variant worker panicked"))?
        .map_err(|e| anyhow!("{e}"))?;

    let cfg = load_scenario(scenario, &base)?;
    let dir = out_dir_for(&cfg, None);
    write_outputs(&log_sign, &dir.join("sign"))?;
    write_outputs(&log_erf, &dir.join("erf"))?;

    let channels = log_sign.channels();
    let max_abs_eps = |log: &SimLog| -> Vec<f64> {
        let mut out = vec![0.0f64; channels];
        for row in &log.rows {
            for c in 0..channels {
                out[c] = out[c].max(row.eps[c].abs());
            }
        }
        out
    };
    let eps_sign = max_abs_eps(&log_sign);
    let eps_erf = max_abs_eps(&log_erf);

    println!("channel  TV(sign)        TV(erf)         max|eps| sign  max|eps| erf");
    for c in 0..channels {
        println!(
            "{:>7}  {:<14.6e}  {:<14.6e}  {:<13.4}  {:<13.4}",
            c + 1,
            log_sign.summary.control_total_variation[c],
            log_erf.summary.control_total_variation[c],
            eps_sign[c],
            eps_erf[c],
        );
    }
    for (tag, log) in [("sign", &log_sign), ("erf", &log_erf)] {
        println!(
            "{tag}: t_end = {:.4} s, aborted = {}, violations = {}",
            log.summary.final_time,
            log.summary.aborted,
            log.summary.total_violations(),
        );
    }

    let report = serde_json::json!({
        "scenario": cfg.name,
        "seed": cfg.sim.seed,
        "sign": {
            "aborted": log_sign.summary.aborted,
            "final_time": log_sign.summary.final_time,
            "violations": log_sign.summary.total_violations(),
            "control_total_variation": log_sign.summary.control_total_variation,
            "max_abs_eps": eps_sign,
        },
        "erf": {
            "aborted": log_erf.summary.aborted,
            "final_time": log_erf.summary.final_time,
            "violations": log_erf.summary.total_violations(),
            "control_total_variation": log_erf.summary.control_total_variation,
            "max_abs_eps": eps_erf,
        },
        "audit": {
            "sign": envelope_audit(&log_sign),
            "erf": envelope_audit(&log_erf),
        },
    });
    std::fs::write(dir.join("compare_report.json"), serde_json::to_string_pretty(&report)?)?;
    println!("comparison report in {}", dir.join("compare_report.json").display());

    Ok(exit_code_for(&log_sign).max(exit_code_for(&log_erf)))
}

fn cmd_check_gains(scenario: &str) -> Result<i32> {
    let cfg = load_scenario(scenario, &Overrides::default())?;
    let report = gain_check(
        &cfg.graph,
        cfg.gains.c,
        cfg.gains.k,
        cfg.basis.phi_bound(),
        None,
        cfg.bounds.as_ref(),
    )?;
    let pinned: Vec<usize> = (0..cfg.graph.node_count())
        .filter(|&i| cfg.graph.pinning()[i] > 0.0)
        .map(|i| i + 1)
        .collect();
    println!(
        "graph: {} nodes, strongly connected, pinned: {:?}",
        cfg.graph.node_count(),
        pinned
    );
    println!(
        "gains: c = {}, k = {}, phi_M = sqrt({}) = {:.6}",
        report.c,
        report.k,
        cfg.basis.neuron_count(),
        report.phi_m
    );
    println!("sigma_min(Q)   = {:.9}", report.sigma_min_q);
    println!("sigma_max(P)   = {:.9}", report.sigma_max_p);
    println!("sigma_max(A)   = {:.9}", report.sigma_max_a);
    println!("sigma_max(L+B) = {:.9}", report.sigma_max_lb);
    println!("k_required = c / (2 sigma_min(Q)) = {:.9}   (configured k = {})", report.k_required, report.k);
    let flag = |ok: bool| if ok { "satisfied" } else { "NOT satisfied" };
    println!(
        "coupling-gain condition, adjacency form   (c s(Q) > phi_M s(P) s(A) / 2):     {}",
        flag(report.cond_adjacency)
    );
    println!(
        "coupling-gain condition, coupling form    (c s(Q) > phi_M s(P1) s(L+B) / 2):  {}",
        flag(report.cond_coupling)
    );
    println!(
        "coupling-gain condition, squared form     (c s(Q) > phi_M s(P) s(A)^2 / 2):   {}",
        flag(report.cond_adjacency_squared)
    );
    println!(
        "H = [[{:.6}, {:.6}], [{:.6}, {:.6}]], sigma_min(H) = {:.9}, positive definite: {}",
        report.h_matrix[0][0],
        report.h_matrix[0][1],
        report.h_matrix[1][0],
        report.h_matrix[1][1],
        report.sigma_min_h,
        report.h_positive_definite
    );
    match &report.bounds {
        Some(b) => {
            println!("h vector = [{:.6}, {:.6}]", b.h_vector[0], b.h_vector[1]);
            println!("UUB thresholds: ||eps|| > {:.6}, ||W_tilde||_F > {:.6}", b.epsilon_bound, b.weight_bound);
        }
        None => println!("UUB thresholds: add a [bounds] section to the scenario to compute them"),
    }
    Ok(0)
}

fn cmd_validate(scenario: &str) -> Result<i32> {
    let cfg = load_scenario(scenario, &Overrides::default())?;
    println!(
        "OK: '{}' ({} agents, {} output(s) each, T = {} s, h = {} s, transform = {:?})",
        cfg.name,
        cfg.plant.node_count(),
        cfg.plant.node_dim(),
        cfg.sim.horizon,
        cfg.sim.step,
        cfg.transforms[0][0].variant,
    );
    Ok(0)
}
