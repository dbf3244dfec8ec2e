use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use magsplit::MethodId;
use magsplit_harness::check::{render_table, run_checks};
use magsplit_harness::longrun::{run_longrun, LongrunOverrides, LongrunPlan};
use magsplit_harness::output::{
    longrun_records, output_path, sweep_records, write_meta, write_records, write_slopes, Coord, Meta, Record,
};
use magsplit_harness::reference::{make_reference, Reference, REFERENCE_ITERS};
use magsplit_harness::sweep::run_sweep;
use magsplit_harness::{builtin_experiment, ExperimentConfig, ExperimentId, HarnessError, MethodEntry, Result, Scale, TimeUnit};

#[derive(Parser)]
#[command(name = "magsplit", version, about = "Splitting integrators for charged particles: probes, sweeps and long runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Built-in experiment: gradb2d, penning_ideal, penning_bottle, penning_asym.
    #[arg(long)]
    experiment: Option<String>,
    /// TOML configuration file; overrides --experiment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the long durations of the original runs.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the structure probes and print a pass/fail table.
    Check,
    /// Step-size sweep with max-over-trajectory errors and fitted slopes.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// One long run reduced to windowed extrema.
    Longrun {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        fp_iters: Option<u32>,
        /// Composition table for Composed.
        #[arg(long)]
        composition: Option<String>,
        /// Step size in cyclotron periods.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        window: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Build, self-check and store the reference trajectory of a sweep.
    Reference {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the effective configuration as TOML.
    ShowConfig {
        #[command(flatten)]
        source: Source,
    },
}

fn load(source: &Source) -> Result<ExperimentConfig> {
    if let Some(path) = &source.config {
        return ExperimentConfig::from_toml(&fs::read_to_string(path)?);
    }
    let id: ExperimentId = source
        .experiment
        .as_deref()
        .ok_or_else(|| HarnessError::Config("pass --experiment or --config".into()))?
        .parse()?;
    builtin_experiment(id, if source.full_scale { Scale::Full } else { Scale::Desk })
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

fn sweep(source: &Source, out: &Path) -> Result<()> {
    let cfg = load(source)?;
    let result = run_sweep(&cfg)?;
    let path = cfg.output.as_ref().map(PathBuf::from).map_or_else(|| output_path(out, &cfg, "sweep"), Ok)?;
    write_records(&path, &cfg, &sweep_records(&result))?;
    report(&path);
    let slopes = path.with_file_name(format!("{}_slopes.csv", path.file_stem().unwrap_or_default().to_string_lossy()));
    write_slopes(&slopes, &cfg, &result)?;
    report(&slopes);
    let mut meta = Meta::new("sweep", &cfg);
    meta.reference = result.reference.clone();
    meta.notes.push("values are maxima over the trajectory; t_or_window is the final time".into());
    meta.notes.push("alpha_error = |alpha - alpha_ref| / max(|alpha_ref - alpha_ref(0)|, 2 pi)".into());
    for (m, h, why) in &result.diverged {
        meta.notes.push(format!("{m} at h = {h:e} diverged: {why}"));
    }
    report(&write_meta(&path, &meta)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn longrun(
    source: &Source,
    method: Option<&str>,
    fp_iters: Option<u32>,
    composition: Option<String>,
    h: Option<f64>,
    steps: Option<u64>,
    window: Option<u64>,
    out: &Path,
) -> Result<()> {
    let cfg = load(source)?;
    let method = match method {
        None => None,
        Some(name) => {
            let id: MethodId = name.parse().map_err(|e: magsplit::Error| HarnessError::Config(e.to_string()))?;
            let mut e = MethodEntry::new(id);
            e.fp_iters = fp_iters;
            if id == MethodId::Composed {
                e.composition = composition;
                e.inner = Some(MethodId::ImplMidpoint);
            }
            Some(e)
        }
    };
    let overrides = LongrunOverrides { method, h: h.map(|h| (h, TimeUnit::Cyclotron)), n_steps: steps, window };
    let plan = LongrunPlan::from_config(&cfg, &overrides)?;
    let result = run_longrun(&cfg, &plan)?;
    let path = output_path(out, &cfg, "longrun")?;
    write_records(&path, &cfg, &longrun_records(&result))?;
    report(&path);
    let mut meta = Meta::new("longrun", &cfg);
    meta.notes.push(format!("{} with h = {:e}, {} steps, window {}", result.method, result.h, plan.n_steps, plan.window));
    if let Some(k) = result.diverged_at {
        meta.notes.push(format!("state stopped being finite at step {k}"));
    }
    report(&write_meta(&path, &meta)?);
    match result.diverged_at {
        Some(k) => Err(HarnessError::Numerical(format!("{} diverged at step {k}", result.method))),
        None => Ok(()),
    }
}

fn reference(source: &Source, out: &Path) -> Result<()> {
    let cfg = load(source)?;
    let r = make_reference(&cfg)?;
    let (interval, samples) = match &r {
        Reference::Sampled { interval, samples, .. } => (*interval, samples.clone()),
        Reference::Analytic(ex) => {
            let units = magsplit_harness::Units::of(&cfg)?;
            let every = magsplit_harness::reference::compare_interval(&cfg, &units)?;
            let horizon = magsplit_harness::reference::sweep_horizon(&cfg, &units)?;
            let n = (horizon / every).ceil() as usize;
            (every, (0..=n).map(|j| ex.state(j as f64 * every)).collect())
        }
    };
    let h_ref = match r.provenance() {
        magsplit_harness::reference::Provenance::Numerical { h_ref, .. } => h_ref,
        magsplit_harness::reference::Provenance::Analytic => 0.0,
    };
    let mut records = Vec::with_capacity(samples.len() * 6);
    for (j, y) in samples.iter().enumerate() {
        let t = j as f64 * interval;
        for (name, v) in [("q_x", y.q.x), ("q_y", y.q.y), ("q_z", y.q.z), ("p_x", y.p.x), ("p_y", y.p.y), ("p_z", y.p.z)] {
            records.push(Record { method: "reference".into(), h: h_ref, fp_iters: REFERENCE_ITERS, observable: name.into(), at: Coord::Time(t), value: v });
        }
    }
    let path = output_path(out, &cfg, "reference")?;
    write_records(&path, &cfg, &records)?;
    report(&path);
    let mut meta = Meta::new("reference", &cfg);
    meta.reference = Some(r.provenance());
    report(&write_meta(&path, &meta)?);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Check => {
            let rows = run_checks()?;
            print!("{}", render_table(&rows));
            let failed = rows.iter().filter(|r| !r.passed()).count();
            println!("{} probes, {failed} failed", rows.len());
            Ok(failed == 0)
        }
        Command::Sweep { source, out } => sweep(&source, &out).map(|_| true),
        Command::Longrun { source, method, fp_iters, composition, h, steps, window, out } => {
            longrun(&source, method.as_deref(), fp_iters, composition, h, steps, window, &out).map(|_| true)
        }
        Command::Reference { source, out } => reference(&source, &out).map(|_| true),
        Command::ShowConfig { source } => {
            print!("{}", load(&source)?.to_toml());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
