//! Named configurations that regenerate the figure data sets.
//!
//! All presets share Δ = 0, g0 = 0.8 ω_m, κ = 0.05 ω_m, γ_m = κ/3, the
//! (|0⟩ + |3⟩)/√2 ⊗ |0⟩ initial state and dim_cavity = 6. The squeezing
//! strength of the fig4b/fig4c g0 scans is r = 0.5.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use serde::Serialize;

use super::{
    converge_dim_mech, simulate, sweep, write_run, write_sweep, RunConfig, RunOutcome, SweepAxis,
    SweepGrid, SweepPoint, SweepResult,
};
use crate::error::{Error, Result};
use crate::evolution::ConvergenceReport;
use crate::fock::SpaceSpec;
use crate::liouvillian::VariantId;
use crate::reservoir::ReservoirSpec;

const DIM_CAVITY: usize = 6;
const DIM_MECH_VACUUM: usize = 30;
const DIM_MECH_THERMAL: usize = 80;
const HOT: f64 = 20.0;
/// Occupancy used by fig3b when the n_th = 20 scan cannot be truncated.
const FALLBACK_N_TH: f64 = 5.0;
const WINDOW_RETRIES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig1,
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
    Fig4c,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Fig1,
        Preset::Fig2a,
        Preset::Fig2b,
        Preset::Fig3a,
        Preset::Fig3b,
        Preset::Fig4a,
        Preset::Fig4b,
        Preset::Fig4c,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2a => "fig2a",
            Preset::Fig2b => "fig2b",
            Preset::Fig3a => "fig3a",
            Preset::Fig3b => "fig3b",
            Preset::Fig4a => "fig4a",
            Preset::Fig4b => "fig4b",
            Preset::Fig4c => "fig4c",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.id() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown preset `{s}`")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PresetRun {
    pub label: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct PresetSweep {
    pub label: String,
    pub grid: SweepGrid,
}

/// What a preset runs, before truncation checks.
#[derive(Debug, Clone, Serialize)]
pub struct PresetPlan {
    pub preset: Preset,
    pub runs: Vec<PresetRun>,
    pub sweeps: Vec<PresetSweep>,
    /// Sweeps assembled from the runs' coherence times, as (label, axis, run labels).
    pub tables: Vec<(String, SweepAxis, Vec<String>)>,
    /// The most demanding configuration; its converged dim_mech is applied
    /// to every run and sweep that shares its temperature class.
    pub probe: Option<RunConfig>,
}

fn space(dim_mech: usize) -> SpaceSpec {
    SpaceSpec {
        dim_cavity: DIM_CAVITY,
        dim_mech,
    }
}

fn config(variant: VariantId, reservoir: ReservoirSpec, t_max_kappa: f64) -> RunConfig {
    let dim = if reservoir.n_th > 0.0 {
        DIM_MECH_THERMAL
    } else {
        DIM_MECH_VACUUM
    };
    RunConfig::standard(variant, reservoir, space(dim), t_max_kappa)
}

fn run(label: &str, config: RunConfig) -> PresetRun {
    PresetRun {
        label: label.to_string(),
        config,
    }
}

fn g0_scan(variant: VariantId, reservoir: ReservoirSpec) -> (Vec<PresetRun>, Vec<String>) {
    let windows = [(0.01, "g0_0.01", 2.0), (0.1, "g0_0.1", 1.0), (0.8, "g0_0.8", 0.1)];
    let mut runs = Vec::new();
    let mut labels = Vec::new();
    for (g0, label, window) in windows {
        let mut c = config(variant, reservoir, window);
        c.params.g0 = g0;
        runs.push(run(label, c));
        labels.push(label.to_string());
    }
    (runs, labels)
}

pub fn preset(id: Preset) -> PresetPlan {
    use VariantId::*;
    let hot = ReservoirSpec::thermal(HOT);
    let vacuum = ReservoirSpec::thermal(0.0);
    let mut plan = PresetPlan {
        preset: id,
        runs: Vec::new(),
        sweeps: Vec::new(),
        tables: Vec::new(),
        probe: None,
    };
    match id {
        Preset::Fig1 => {
            plan.runs = vec![
                run("vacuum_DSME_THERMAL", config(DsmeThermal, vacuum, 1.5)),
                run("vacuum_SME_DRESSED_THERMAL", config(SmeDressedThermal, vacuum, 1.5)),
                run("nth20_DSME_THERMAL_HIGHT", config(DsmeThermalHighT, hot, 0.1)),
                run("nth20_SME_DRESSED_THERMAL", config(SmeDressedThermal, hot, 0.1)),
            ];
            plan.probe = Some(config(SmeDressedThermal, hot, 0.1));
        }
        Preset::Fig2a => {
            let sq = ReservoirSpec::squeezed(0.0, 0.5, 0.0);
            plan.runs = vec![
                run("sqvac_DSME_SQUEEZED", config(DsmeSqueezed, sq, 1.5)),
                run("sqvac_SME_DRESSED_SQUEEZED", config(SmeDressedSqueezed, sq, 1.5)),
                run("vacuum_DSME_THERMAL", config(DsmeThermal, vacuum, 1.5)),
            ];
        }
        Preset::Fig2b => {
            let sq = ReservoirSpec::squeezed(HOT, 0.5, 0.0);
            plan.runs = vec![
                run("sqth_DSME_SQUEEZED_HIGHT", config(DsmeSqueezedHighT, sq, 0.1)),
                run("sqth_SME_DRESSED_SQUEEZED", config(SmeDressedSqueezed, sq, 0.1)),
                run("nth20_DSME_THERMAL_HIGHT", config(DsmeThermalHighT, hot, 0.1)),
            ];
            plan.probe = Some(config(SmeDressedSqueezed, sq, 0.1));
        }
        Preset::Fig3a => {
            let thetas: Vec<f64> = (0..=12).map(|k| PI * k as f64 / 6.0).collect();
            let sq = ReservoirSpec::squeezed(HOT, 0.5, 0.0);
            let mut base = config(DsmeSqueezedHighT, sq, 0.1);
            base.samples = 800;
            let mut control = config(DsmeThermalHighT, sq, 0.1);
            control.samples = 800;
            plan.sweeps = vec![
                PresetSweep {
                    label: "theta_DSME_SQUEEZED_HIGHT".into(),
                    grid: SweepGrid::new(SweepAxis::Theta, thetas.clone(), base.clone()).expect("valid grid"),
                },
                PresetSweep {
                    label: "theta_DSME_THERMAL_HIGHT".into(),
                    grid: SweepGrid::new(SweepAxis::Theta, thetas, control).expect("valid grid"),
                },
            ];
            plan.probe = Some(base);
        }
        Preset::Fig3b => {
            let rs: Vec<f64> = (0..=10).map(|k| 0.2 * k as f64).collect();
            let mut base = config(DsmeSqueezedHighT, ReservoirSpec::squeezed(HOT, 0.0, PI), 0.2);
            base.samples = 800;
            let mut probe = base.clone();
            probe.reservoir.r = 2.0;
            plan.sweeps = vec![PresetSweep {
                label: "r_DSME_SQUEEZED_HIGHT".into(),
                grid: SweepGrid::new(SweepAxis::R, rs, base).expect("valid grid"),
            }];
            plan.probe = Some(probe);
        }
        Preset::Fig4a | Preset::Fig4b | Preset::Fig4c => {
            let (variant, reservoir) = match id {
                Preset::Fig4a => (DsmeThermalHighT, hot),
                Preset::Fig4b => (DsmeSqueezedHighT, ReservoirSpec::squeezed(HOT, 0.5, 0.0)),
                _ => (DsmeSqueezedHighT, ReservoirSpec::squeezed(HOT, 0.5, PI)),
            };
            let (runs, labels) = g0_scan(variant, reservoir);
            plan.probe = Some(runs[0].config.clone());
            plan.runs = runs;
            plan.tables = vec![(format!("g0_{variant}"), SweepAxis::G0, labels)];
        }
    }
    plan
}

#[derive(Debug, Clone, Copy)]
pub struct PresetOptions {
    /// Run the truncation refinement on the probe configuration first.
    pub converge: bool,
    pub max_rounds: usize,
    /// Largest refined dim_mech a convergence round may request.
    pub max_dim_mech: usize,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            converge: true,
            max_rounds: 3,
            max_dim_mech: 120,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PresetReport {
    pub plan: PresetPlan,
    pub runs: Vec<(String, RunOutcome)>,
    pub sweeps: Vec<(String, SweepResult)>,
    pub convergence: Vec<ConvergenceReport>,
    pub notes: Vec<String>,
}

impl PresetReport {
    pub fn run(&self, label: &str) -> Option<&RunOutcome> {
        self.runs.iter().find(|(l, _)| l == label).map(|(_, o)| o)
    }

    pub fn sweep(&self, label: &str) -> Option<&SweepResult> {
        self.sweeps.iter().find(|(l, _)| l == label).map(|(_, s)| s)
    }

    /// Every outcome the preset produced, sweep points included.
    pub fn outcomes(&self) -> impl Iterator<Item = &RunOutcome> {
        self.runs
            .iter()
            .map(|(_, o)| o)
            .chain(self.sweeps.iter().flat_map(|(_, s)| s.points.iter().map(|p| &p.outcome)))
    }
}

/// Runs `config`, doubling the window until the threshold is crossed.
fn simulate_covering(config: &RunConfig) -> Result<RunOutcome> {
    let mut c = config.clone();
    let mut outcome = simulate(&c, false)?;
    for _ in 0..WINDOW_RETRIES {
        if outcome.coherence_time.is_some() {
            break;
        }
        c.t_max_kappa *= 2.0;
        warn!("threshold not reached; widening window to {}", c.t_max_kappa);
        outcome = simulate(&c, false)?;
        outcome.flags.push(format!("window widened to t_max_kappa = {}", c.t_max_kappa));
    }
    Ok(outcome)
}

fn same_class(a: &RunConfig, b: &RunConfig) -> bool {
    (a.reservoir.n_th > 0.0) == (b.reservoir.n_th > 0.0)
}

/// Executes a preset and, when `out` is given, writes one CSV and one
/// manifest per run and per sweep into it.
pub fn run_preset(id: Preset, out: Option<&Path>, opts: &PresetOptions) -> Result<PresetReport> {
    let mut plan = preset(id);
    let mut notes = Vec::new();
    let mut convergence = Vec::new();

    if opts.converge {
        if let Some(probe) = plan.probe.clone() {
            let (space, reports) = converge_dim_mech(&probe, opts.max_rounds, opts.max_dim_mech)?;
            let converged = reports.last().is_some_and(|r| r.converged);
            convergence.extend(reports);
            let space = SpaceSpec {
                dim_mech: space.dim_mech.min(opts.max_dim_mech),
                ..space
            };
            if converged {
                notes.push(format!("converged dim_mech = {}", space.dim_mech));
            } else {
                notes.push(format!(
                    "truncation not converged for the probe configuration; using dim_mech = {}",
                    space.dim_mech
                ));
            }
            if !converged && id == Preset::Fig3b {
                notes.push(format!(
                    "n_th reduced from {HOT} to {FALLBACK_N_TH} because the high-r points cannot be truncated"
                ));
                // slower decoherence at the lower temperature needs a longer window
                for s in &mut plan.sweeps {
                    s.grid.base.reservoir.n_th = FALLBACK_N_TH;
                    s.grid.base.t_max_kappa *= HOT / FALLBACK_N_TH;
                }
                notes.push(format!(
                    "fallback sweep keeps dim_mech = {} without a second convergence round",
                    probe.space.dim_mech
                ));
            } else {
                for r in plan.runs.iter_mut().filter(|r| same_class(&r.config, &probe)) {
                    r.config.space = space;
                }
                for s in plan.sweeps.iter_mut().filter(|s| same_class(&s.grid.base, &probe)) {
                    s.grid.base.space = space;
                }
            }
        }
    }

    let mut runs = Vec::new();
    for r in &plan.runs {
        info!("{id}: running {}", r.label);
        let mut outcome = simulate_covering(&r.config)?;
        outcome.flags.extend(notes.iter().cloned());
        if let Some(dir) = out {
            write_run(dir, &r.label, &outcome)?;
        }
        runs.push((r.label.clone(), outcome));
    }

    let mut sweeps = Vec::new();
    for s in &plan.sweeps {
        info!("{id}: sweeping {}", s.label);
        let mut result = sweep(&s.grid)?;
        for p in &mut result.points {
            p.outcome.flags.extend(notes.iter().cloned());
        }
        if let Some(dir) = out {
            write_sweep(dir, &s.label, &result)?;
        }
        sweeps.push((s.label.clone(), result));
    }

    for (label, axis, members) in &plan.tables {
        let picked: Vec<&RunOutcome> = members
            .iter()
            .filter_map(|m| runs.iter().find(|(l, _)| l == m).map(|(_, o)| o))
            .collect();
        let values: Vec<f64> = picked.iter().map(|o| axis_value(*axis, &o.config)).collect();
        let base = picked.first().map(|o| o.config.clone()).expect("table has members");
        let result = SweepResult {
            grid: SweepGrid::new(*axis, values.clone(), base)?,
            points: values
                .iter()
                .zip(&picked)
                .map(|(&value, o)| SweepPoint {
                    value,
                    outcome: (*o).clone(),
                })
                .collect(),
            wall_time: picked.iter().map(|o| o.wall_time).sum(),
        };
        if let Some(dir) = out {
            write_sweep(dir, label, &result)?;
        }
        sweeps.push((label.clone(), result));
    }

    Ok(PresetReport {
        plan,
        runs,
        sweeps,
        convergence,
        notes,
    })
}

fn axis_value(axis: SweepAxis, c: &RunConfig) -> f64 {
    match axis {
        SweepAxis::R => c.reservoir.r,
        SweepAxis::Theta => c.reservoir.theta,
        SweepAxis::G0 => c.params.g0,
    }
}
