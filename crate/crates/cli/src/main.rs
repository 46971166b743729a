use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use srsw_core::config::{PreparedRun, RunConfig};
use srsw_core::ensemble::{run_ensemble, run_member};
use srsw_core::io::write_snapshot;
use srsw_core::noise::NoisePath;
use srsw_core::picard::picard_solve;
use srsw_core::stepper::TrajectoryRecord;
use srsw_core::verify::{reports_table, run_suite, SuiteConfig, SUITES};
use srsw_core::SrswError;

/// Exit codes: 0 success, 1 config error or failed check, 2 blow-up,
/// 3 Picard non-convergence.
#[derive(Parser)]
#[command(
    name = "srsw",
    version,
    about = "Stochastic rotating shallow water on the torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (overrides `ensemble.base_seed`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory.
    Simulate(Common),
    /// Run the Picard approximating sequence on one noise path.
    Picard(Common),
    /// Integrate `ensemble.paths` independent trajectories.
    Ensemble(Common),
    /// Run an estimate-check suite.
    Verify {
        /// advective | growth | envelope | continuity | blowup | all
        suite: String,
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Config(String),
    BlowUp(String),
    NoConvergence(String),
    CheckFailed(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) | Failure::CheckFailed(_) => 1,
            Failure::BlowUp(_) => 2,
            Failure::NoConvergence(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m)
            | Failure::BlowUp(m)
            | Failure::NoConvergence(m)
            | Failure::CheckFailed(m) => m,
        }
    }
}

impl From<SrswError> for Failure {
    fn from(e: SrswError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("i/o error: {e}"))
    }
}

type Outcome = Result<(), Failure>;

struct Ctx {
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn write(&self, name: &str, contents: &str) -> Outcome {
        fs::write(self.out.join(name), contents)?;
        Ok(())
    }
}

fn load_run(common: &Common) -> Result<(PreparedRun, Ctx), Failure> {
    let path = common.config.as_ref().ok_or_else(|| {
        Failure::Config("config error in `--config`: a config file is required".into())
    })?;
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = common.seed {
        config = config.with_seed(seed);
    }
    let out = common
        .out
        .clone()
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let run = config.prepare()?;
    fs::create_dir_all(&out)?;
    Ok((
        run,
        Ctx {
            out,
            quiet: common.quiet,
        },
    ))
}

fn record_json(run: &PreparedRun, rec: &TrajectoryRecord) -> String {
    let doc = json!({
        "config_hash": run.config_hash,
        "seed": rec.seed,
        "config": run.config,
        "summary": rec.summary(),
    });
    serde_json::to_string_pretty(&doc).expect("record serializes")
}

fn write_snapshots(ctx: &Ctx, run: &PreparedRun, rec: &TrajectoryRecord) -> Outcome {
    let mut wanted: Vec<usize> = Vec::new();
    if run.config.output.snapshot_every > 0 {
        wanted.extend(rec.states.iter().map(|(k, _)| *k));
    }
    if run.config.output.final_snapshot {
        if let Some((k, _)) = rec.states.last() {
            wanted.push(*k);
        }
    }
    wanted.sort_unstable();
    wanted.dedup();
    if wanted.is_empty() {
        return Ok(());
    }
    let dir = ctx.out.join("snapshots");
    fs::create_dir_all(&dir)?;
    let extra = json!({ "config_hash": run.config_hash, "scheme": run.config.scheme.id() });
    for k in wanted {
        let Some(state) = rec.state_at_step(k) else {
            continue;
        };
        write_snapshot(
            &dir.join(format!("step_{k:07}")),
            &["v1", "v2", "h"],
            &state.components(),
            k as f64 * rec.dt,
            rec.seed,
            Some(extra.clone()),
        )?;
    }
    Ok(())
}

fn simulate(common: &Common) -> Outcome {
    let (mut run, ctx) = load_run(common)?;
    if run.config.output.final_snapshot && run.integration.store_every == 0 {
        // the driver always keeps the last state
        run.integration.store_every = run.integration.steps().max(1);
    }
    let rec = run_member(&run, 0)?;
    ctx.write("norms.csv", &rec.norms_csv())?;
    ctx.write("record.json", &record_json(&run, &rec))?;
    write_snapshots(&ctx, &run, &rec)?;
    let s = rec.summary();
    ctx.say(format!(
        "simulate: {} steps, dt={}, final norm12={:e}, sup norm12={:e}",
        s.steps, s.dt, s.final_norm12, s.sup_norm12
    ));
    if rec.blown_up {
        return Err(Failure::BlowUp(format!(
            "blow-up at t={} ({})",
            rec.last_finite_time,
            rec.blowup_reason.as_deref().unwrap_or("unknown")
        )));
    }
    Ok(())
}

fn picard(common: &Common) -> Outcome {
    let (run, ctx) = load_run(common)?;
    let pc = run.picard_config();
    let path = NoisePath::for_basis(
        &run.basis,
        pc.integration.dt,
        pc.integration.steps(),
        pc.integration.seed,
    )?;
    let outcome = picard_solve(&run.initial, run.model(), &path, &pc)?;
    ctx.write("iterates.csv", &outcome.iterates_csv())?;
    ctx.write("limit_norms.csv", &outcome.limit().norms_csv())?;
    let doc = json!({
        "config_hash": run.config_hash,
        "seed": pc.integration.seed,
        "config": run.config,
        "converged": outcome.converged,
        "failure": outcome.failure,
        "direct_residual": outcome.direct_residual,
        "iterates": outcome.iterates.iter().map(|it| it.summary()).collect::<Vec<_>>(),
    });
    ctx.write(
        "picard.json",
        &serde_json::to_string_pretty(&doc).expect("serializes"),
    )?;
    for it in &outcome.iterates {
        ctx.say(format!(
            "n={} distance={:e} t22={:e}",
            it.index, it.distance, it.t22
        ));
    }
    if let Some(f) = &outcome.failure {
        return Err(Failure::BlowUp(format!("picard iterate blew up: {f}")));
    }
    if !outcome.converged {
        return Err(Failure::NoConvergence(format!(
            "no convergence within {} iterates (last distance {:e})",
            pc.max_iter,
            outcome.distances().last().copied().unwrap_or(f64::NAN)
        )));
    }
    ctx.say(format!(
        "converged; residual against direct solve {:e}",
        outcome.direct_residual
    ));
    Ok(())
}

fn ensemble(common: &Common) -> Outcome {
    let (run, ctx) = load_run(common)?;
    let stats = run_ensemble(&run)?;
    ctx.write("ensemble_rows.csv", &stats.rows_csv())?;
    ctx.write("ensemble.json", &stats.aggregate_json())?;
    for s in &stats.aggregates.staying_probability {
        let what = match s.level {
            Some(r) => format!("below R={r}"),
            None => "finite".into(),
        };
        ctx.say(format!(
            "{what}: {}/{} paths, p={:.4} CI [{:.4}, {:.4}]",
            s.staying, s.paths, s.probability, s.ci_low, s.ci_high
        ));
    }
    Ok(())
}

fn verify(suite: &str, common: &Common) -> Outcome {
    if !SUITES.contains(&suite) {
        return Err(Failure::Config(format!(
            "config error in `suite`: unknown suite '{suite}' (expected one of {})",
            SUITES.join(", ")
        )));
    }
    let cfg: SuiteConfig = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Config(format!("config error: {e}")))?
        }
        None => SuiteConfig::default(),
    };
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out)?;
    let ctx = Ctx {
        out,
        quiet: common.quiet,
    };
    let reports = run_suite(suite, &cfg)?;
    for r in &reports {
        ctx.write(&format!("{}.json", r.id), &r.to_json()?)?;
    }
    ctx.say(reports_table(&reports));
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.id.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::CheckFailed(format!(
            "failed: {}",
            failed.join(", ")
        )))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Picard(c) => picard(c),
        Command::Ensemble(c) => ensemble(c),
        Command::Verify { suite, common } => verify(suite, common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("srsw: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
