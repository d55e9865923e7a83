use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use log::info;

use optomech::experiments::{
    failure_manifest, preset, run_preset, simulate, sweep, write_json, write_run, write_sweep,
    Preset, PresetOptions, RunConfig, SweepAxis, SweepGrid,
};
use optomech::liouvillian::{DissipationMode, VariantId};
use optomech::validation;

#[derive(Parser)]
#[command(name = "optomech", version, about = "Optomechanical master-equation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write its trajectory and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured variant tag.
        #[arg(long)]
        variant: Option<VariantId>,
        /// literal or preserving.
        #[arg(long)]
        mode: Option<DissipationMode>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coherence time along one parameter axis.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated, strictly increasing values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate the data behind one figure.
    Preset {
        /// fig1, fig2a, fig2b, fig3a, fig3b, fig4a, fig4b or fig4c.
        id: Preset,
        #[arg(long)]
        out: PathBuf,
        /// Skip the truncation refinement and use the default dimensions.
        #[arg(long)]
        no_converge: bool,
        /// Only write the planned configurations.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run the built-in invariant checks.
    Validate,
}

fn read_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run(config: &Path, variant: Option<VariantId>, mode: Option<DissipationMode>, out: &Path) -> anyhow::Result<()> {
    let mut config = read_config(config)?;
    if let Some(v) = variant {
        config.variant = v;
    }
    if let Some(m) = mode {
        config.mode = m;
    }
    let stem = config.variant.tag();
    fs::create_dir_all(out)?;
    match simulate(&config, false) {
        Ok(outcome) => {
            let (csv, manifest) = write_run(out, stem, &outcome)?;
            match outcome.coherence_time {
                Some(t) => println!("coherence time κt = {t:.6}"),
                None => println!("threshold {} not reached", config.threshold),
            }
            println!("wrote {} and {}", csv.display(), manifest.display());
            Ok(())
        }
        Err(e) => {
            write_json(&out.join(format!("{stem}.json")), &failure_manifest(&config, &e))?;
            Err(e.into())
        }
    }
}

fn run_sweep(config: &Path, axis: SweepAxis, values: Vec<f64>, out: &Path) -> anyhow::Result<()> {
    let base = read_config(config)?;
    let grid = SweepGrid::new(axis, values, base)?;
    let result = sweep(&grid)?;
    let (csv, manifest) = write_sweep(out, &format!("sweep_{axis}"), &result)?;
    for p in &result.points {
        match p.outcome.coherence_time {
            Some(t) => println!("{axis} = {:.6}: κt = {t:.6}", p.value),
            None => println!("{axis} = {:.6}: not reached", p.value),
        }
    }
    println!("wrote {} and {}", csv.display(), manifest.display());
    Ok(())
}

fn run_preset_cmd(id: Preset, out: &Path, no_converge: bool, dry_run: bool) -> anyhow::Result<()> {
    fs::create_dir_all(out)?;
    if dry_run {
        let plan = preset(id);
        write_json(&out.join(format!("{id}_plan.json")), &serde_json::to_value(&plan)?)?;
        println!("wrote plan for {id}");
        return Ok(());
    }
    let opts = PresetOptions {
        converge: !no_converge,
        ..Default::default()
    };
    let report = run_preset(id, Some(out), &opts)?;
    for note in &report.notes {
        info!("{id}: {note}");
    }
    write_json(
        &out.join(format!("{id}_convergence.json")),
        &serde_json::json!({ "reports": report.convergence, "notes": report.notes }),
    )?;
    for (label, o) in &report.runs {
        println!("{label}: κt = {}", o.coherence_time.map_or("not reached".into(), |t| format!("{t:.6}")));
    }
    for (label, s) in &report.sweeps {
        println!("{label}:");
        for p in &s.points {
            println!(
                "  {} = {:.6}: {}",
                s.grid.axis,
                p.value,
                p.outcome.coherence_time.map_or("not reached".into(), |t| format!("κt = {t:.6}"))
            );
        }
    }
    Ok(())
}

fn validate() -> anyhow::Result<()> {
    let checks = validation::run_all();
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if failed > 0 {
        bail!("{failed} of {} checks failed", checks.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, variant, mode, out } => run(&config, variant, mode, &out),
        Command::Sweep { config, axis, values, out } => run_sweep(&config, axis, values, &out),
        Command::Preset { id, out, no_converge, dry_run } => run_preset_cmd(id, &out, no_converge, dry_run),
        Command::Validate => validate(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
