//! Initial states, the cavity coherence observable, runs, sweeps and presets.

mod output;
mod presets;

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;
use std::time::Instant;

use log::{debug, info, warn};
use ndarray::{Array1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{
    convergence_check, integrate_with, refine, ConvergenceReport, IntegratorOptions, SampleDiagnostics,
    StepStats,
};
use crate::fock::{DensityMatrix, Ket, SpaceSpec, C64};
use crate::liouvillian::{build_liouvillian, DissipationMode, RateTable, VariantId};
use crate::model::SystemParams;
use crate::reservoir::ReservoirSpec;

pub use output::{
    failure_manifest, read_sweep_csv, read_trajectory_csv, run_manifest, sweep_manifest, write_json,
    write_run, write_sweep, write_sweep_csv, write_trajectory_csv, SweepRow, TrajectoryRow,
    SWEEP_HEADER, TRAJECTORY_HEADER,
};
pub use presets::{
    preset, run_preset, Preset, PresetOptions, PresetPlan, PresetReport, PresetRun, PresetSweep,
};

/// (cos(ζ/2)|p⟩ + e^{iφ} sin(ζ/2)|q⟩)_c ⊗ |u⟩_m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialStateSpec {
    pub zeta_half: f64,
    pub phi: f64,
    pub p: usize,
    pub q: usize,
    pub u: usize,
}

impl Default for InitialStateSpec {
    fn default() -> Self {
        Self {
            zeta_half: FRAC_PI_4,
            phi: 0.0,
            p: 0,
            q: 3,
            u: 0,
        }
    }
}

impl InitialStateSpec {
    pub fn validate(&self, space: &SpaceSpec) -> Result<()> {
        if self.p == self.q {
            return Err(Error::InvalidParameter("p and q must differ".into()));
        }
        for (what, index, limit) in [
            ("p", self.p, space.dim_cavity),
            ("q", self.q, space.dim_cavity),
            ("u", self.u, space.dim_mech),
        ] {
            if index >= limit {
                return Err(Error::IndexOutOfRange { what, index, limit });
            }
        }
        if !(self.zeta_half.is_finite() && self.phi.is_finite()) {
            return Err(Error::InvalidParameter("state angles must be finite".into()));
        }
        Ok(())
    }

    /// |⟨p|Tr_m ρ(0)|q⟩| = |cos(ζ/2) sin(ζ/2)|.
    pub fn initial_coherence(&self) -> f64 {
        (self.zeta_half.cos() * self.zeta_half.sin()).abs()
    }
}

pub fn initial_state(spec: &InitialStateSpec, space: &SpaceSpec) -> Result<DensityMatrix> {
    space.validate()?;
    spec.validate(space)?;
    let mut psi = Array1::zeros(space.dim());
    psi[space.index(spec.p, spec.u)] += C64::new(spec.zeta_half.cos(), 0.0);
    psi[space.index(spec.q, spec.u)] += C64::from_polar(spec.zeta_half.sin(), spec.phi);
    Ok(DensityMatrix::from_ket(&Ket::new(psi)?))
}

/// |⟨p| Tr_m ρ |q⟩|.
pub fn coherence(rho: ArrayView2<C64>, p: usize, q: usize, space: &SpaceSpec) -> Result<f64> {
    if rho.nrows() != space.dim() || rho.ncols() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: rho.nrows(),
        });
    }
    for (what, index) in [("p", p), ("q", q)] {
        if index >= space.dim_cavity {
            return Err(Error::IndexOutOfRange {
                what,
                index,
                limit: space.dim_cavity,
            });
        }
    }
    let dm = space.dim_mech;
    let sum: C64 = (0..dm).map(|l| rho[[p * dm + l, q * dm + l]]).sum();
    Ok(sum.norm())
}

/// First time at which `values` drops below `threshold`, linearly interpolated;
/// `None` when it never does.
pub fn coherence_time(times: &[f64], values: &[f64], threshold: f64) -> Option<f64> {
    let k = values.iter().position(|&v| v < threshold)?;
    if k == 0 {
        return Some(times[0]);
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let (v0, v1) = (values[k - 1], values[k]);
    let frac = ((v0 - threshold) / (v0 - v1)).clamp(0.0, 1.0);
    Some(t0 + frac * (t1 - t0))
}

fn default_samples() -> usize {
    400
}

fn default_threshold() -> f64 {
    0.1
}

/// One simulation, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: SystemParams,
    pub reservoir: ReservoirSpec,
    pub variant: VariantId,
    #[serde(default)]
    pub mode: DissipationMode,
    pub space: SpaceSpec,
    #[serde(default)]
    pub initial: InitialStateSpec,
    /// End of the sampling window in units of 1/κ (1/ω_m when κ = 0).
    pub t_max_kappa: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Absolute level of P_pq; 0.1 is 20% of the default initial 0.5.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub include_hamiltonian: bool,
    #[serde(default)]
    pub integrator: IntegratorOptions,
}

impl RunConfig {
    /// Fig. 1 style defaults: Δ = 0, g0 = 0.8, κ = 0.05, γ_m = κ/3.
    pub fn standard(variant: VariantId, reservoir: ReservoirSpec, space: SpaceSpec, t_max_kappa: f64) -> Self {
        Self {
            params: SystemParams::new(0.0, 0.8, 0.05),
            reservoir,
            variant,
            mode: DissipationMode::TracePreserving,
            space,
            initial: InitialStateSpec::default(),
            t_max_kappa,
            samples: default_samples(),
            threshold: default_threshold(),
            include_hamiltonian: false,
            integrator: IntegratorOptions::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.reservoir.validate()?;
        self.space.validate()?;
        self.initial.validate(&self.space)?;
        self.integrator.validate()?;
        if !(self.t_max_kappa > 0.0 && self.t_max_kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_max_kappa must be positive, got {}",
                self.t_max_kappa
            )));
        }
        if self.samples < 2 {
            return Err(Error::InvalidParameter("at least two samples are required".into()));
        }
        let p0 = self.initial.initial_coherence();
        if !(self.threshold > 0.0 && self.threshold <= p0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "threshold must lie in (0, {p0}], got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Rate that sets the reported time unit.
    pub fn time_unit(&self) -> f64 {
        if self.params.kappa > 0.0 {
            self.params.kappa
        } else {
            self.params.omega_m
        }
    }

    /// Uniform sample grid on [0, t_max_kappa] in reported units.
    pub fn sample_grid(&self) -> Vec<f64> {
        let n = self.samples - 1;
        (0..=n).map(|k| self.t_max_kappa * k as f64 / n as f64).collect()
    }
}

/// Everything a run produced, before it is written out.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    /// Sample times in units of 1/κ.
    pub kappa_t: Vec<f64>,
    pub coherence: Vec<f64>,
    pub diagnostics: Vec<SampleDiagnostics>,
    pub coherence_time: Option<f64>,
    pub stats: StepStats,
    pub completed: bool,
    pub rates: RateTable,
    pub nnz: usize,
    pub wall_time: f64,
    pub flags: Vec<String>,
}

impl RunOutcome {
    pub fn max_trace_err(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.trace_err).fold(0.0, f64::max)
    }

    pub fn max_herm_err(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.herm_err).fold(0.0, f64::max)
    }

    pub fn min_eig(&self) -> Option<f64> {
        self.diagnostics.iter().filter_map(|d| d.min_eig).reduce(f64::min)
    }
}

/// Builds the generator, integrates and records P_pq at every sample.
///
/// With `stop_at_threshold` the integration ends at the first sample below
/// the threshold, which is all a coherence time needs.
pub fn simulate(config: &RunConfig, stop_at_threshold: bool) -> Result<RunOutcome> {
    config.validate()?;
    let start = Instant::now();
    let mut flags = Vec::new();
    if config.params.kappa == 0.0 {
        flags.push("kappa = 0: times are reported in units of 1/omega_m".to_string());
    }
    let mut l = build_liouvillian(
        config.variant,
        config.mode,
        &config.params,
        &config.reservoir,
        &config.space,
    )?;
    if config.include_hamiltonian {
        l = l.with_hamiltonian(&config.params)?;
    }
    debug!(
        "generator with {} nonzeros assembled in {:.2}s",
        l.generator().nnz(),
        start.elapsed().as_secs_f64()
    );
    let rho0 = initial_state(&config.initial, &config.space)?;
    let unit = config.time_unit();
    let grid = config.sample_grid();
    let times: Vec<f64> = grid.iter().map(|t| t / unit).collect();
    let (p, q, space, threshold) = (config.initial.p, config.initial.q, config.space, config.threshold);

    let traj = integrate_with(&l, &rho0, &times, &config.integrator, |_, rho| {
        let value = coherence(rho.view(), p, q, &space).expect("state lives on the configured space");
        if stop_at_threshold && value < threshold {
            ControlFlow::Break(value)
        } else {
            ControlFlow::Continue(value)
        }
    })?;
    let kappa_t: Vec<f64> = grid[..traj.len()].to_vec();
    let coherence_time = coherence_time(&kappa_t, &traj.states, threshold);
    if coherence_time.is_none() {
        flags.push(format!(
            "P_pq stayed above {threshold} up to t_max_kappa = {}",
            config.t_max_kappa
        ));
    }
    let wall_time = start.elapsed().as_secs_f64();
    info!(
        "{} ({}) on {}x{}: coherence time {:?} in {:.2}s",
        config.variant, config.mode, space.dim_cavity, space.dim_mech, coherence_time, wall_time
    );
    Ok(RunOutcome {
        config: config.clone(),
        kappa_t,
        coherence: traj.states,
        diagnostics: traj.diagnostics,
        coherence_time,
        stats: traj.stats,
        completed: traj.completed,
        rates: *l.rates(),
        nnz: l.generator().nnz(),
        wall_time,
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    R,
    Theta,
    G0,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::R => "r",
            SweepAxis::Theta => "theta",
            SweepAxis::G0 => "g0",
        }
    }

    pub fn apply(self, base: &RunConfig, value: f64) -> RunConfig {
        let mut c = base.clone();
        match self {
            SweepAxis::R => c.reservoir.r = value,
            SweepAxis::Theta => c.reservoir.theta = value,
            SweepAxis::G0 => c.params.g0 = value,
        }
        c
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r" => Ok(SweepAxis::R),
            "theta" => Ok(SweepAxis::Theta),
            "g0" => Ok(SweepAxis::G0),
            _ => Err(Error::InvalidParameter(format!(
                "unknown sweep axis `{s}` (expected r, theta or g0)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub base: RunConfig,
}

impl SweepGrid {
    pub fn new(axis: SweepAxis, values: Vec<f64>, base: RunConfig) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("sweep needs at least one value".into()));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("sweep values must be strictly increasing".into()));
        }
        for &v in &values {
            axis.apply(&base, v).validate()?;
        }
        Ok(Self { axis, values, base })
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub grid: SweepGrid,
    pub points: Vec<SweepPoint>,
    pub wall_time: f64,
}

impl SweepResult {
    pub fn coherence_times(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.outcome.coherence_time).collect()
    }

    pub fn rows(&self) -> Vec<SweepRow> {
        self.points
            .iter()
            .map(|p| SweepRow {
                axis: self.grid.axis.name().to_string(),
                value: p.value,
                coherence_time_kappa_t: p.outcome.coherence_time,
                variant: p.outcome.config.variant,
                mode: p.outcome.config.mode,
            })
            .collect()
    }
}

/// Coherence time at every grid value; points run in parallel, results keep grid order.
pub fn sweep(grid: &SweepGrid) -> Result<SweepResult> {
    let start = Instant::now();
    let points: Vec<SweepPoint> = grid
        .values
        .par_iter()
        .map(|&value| {
            let config = grid.axis.apply(&grid.base, value);
            simulate(&config, true).map(|outcome| SweepPoint { value, outcome })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        grid: grid.clone(),
        points,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Compares P_pq(t) on the configured truncation and its refinement.
pub fn check_convergence(config: &RunConfig) -> Result<ConvergenceReport> {
    let mut probe = config.clone();
    probe.integrator.eig_stride = 0;
    convergence_check(config.space, |space| {
        let mut c = probe.clone();
        c.space = *space;
        Ok(simulate(&c, true)?.coherence)
    })
}

/// Grows dim_mech by ×1.5 until the refinement test passes, `max_rounds` is
/// spent, or the refined dimension would exceed `max_dim_mech`.
pub fn converge_dim_mech(
    config: &RunConfig,
    max_rounds: usize,
    max_dim_mech: usize,
) -> Result<(SpaceSpec, Vec<ConvergenceReport>)> {
    let mut space = config.space;
    let mut reports = Vec::new();
    for _ in 0..max_rounds.max(1) {
        if refine(&space).dim_mech > max_dim_mech && !reports.is_empty() {
            break;
        }
        let mut c = config.clone();
        c.space = space;
        let report = check_convergence(&c)?;
        let ok = report.converged;
        info!(
            "convergence at dim_mech = {}: relative deviation {:.3e}",
            space.dim_mech, report.relative_deviation
        );
        reports.push(report);
        if ok {
            return Ok((space, reports));
        }
        space.dim_mech = (space.dim_mech * 3).div_ceil(2);
    }
    warn!("truncation not converged at dim_mech = {}", space.dim_mech);
    Ok((space, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{tensor, trace};
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use std::f64::consts::FRAC_PI_2;

    fn small_space() -> SpaceSpec {
        SpaceSpec::new(4, 3).unwrap()
    }

    #[test]
    fn default_initial_state() {
        let space = small_space();
        let rho = initial_state(&InitialStateSpec::default(), &space).unwrap();
        assert_abs_diff_eq!(coherence(rho.matrix().view(), 0, 3, &space).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(trace(rho.matrix().view()).re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_and_phased_initial_states() {
        let space = small_space();
        let spec = InitialStateSpec { zeta_half: 0.0, ..Default::default() };
        let rho = initial_state(&spec, &space).unwrap();
        assert_eq!(coherence(rho.matrix().view(), 0, 3, &space).unwrap(), 0.0);
        assert_eq!(rho.matrix()[[0, 0]], C64::new(1.0, 0.0));
        let spec = InitialStateSpec { phi: FRAC_PI_2, ..Default::default() };
        let rho = initial_state(&spec, &space).unwrap();
        assert_abs_diff_eq!(coherence(rho.matrix().view(), 0, 3, &space).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn initial_state_validation() {
        let space = small_space();
        for bad in [
            InitialStateSpec { q: 0, ..Default::default() },
            InitialStateSpec { q: 4, ..Default::default() },
            InitialStateSpec { u: 3, ..Default::default() },
        ] {
            assert!(initial_state(&bad, &space).is_err());
        }
    }

    #[test]
    fn coherence_ignores_mechanical_state() {
        let space = small_space();
        let cavity = Array2::from_shape_fn((4, 4), |(i, j)| {
            if (i == 0 || i == 3) && (j == 0 || j == 3) {
                C64::new(0.5, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let weights = [0.6, 0.3, 0.1];
        let mech = Array2::from_shape_fn((3, 3), |(i, j)| {
            if i == j {
                C64::new(weights[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let rho = tensor(&cavity, &mech);
        assert_abs_diff_eq!(coherence(rho.view(), 0, 3, &space).unwrap(), 0.5, epsilon = 1e-15);
        let diag = Array2::from_diag(&rho.diag().to_owned());
        assert_eq!(coherence(diag.view(), 0, 3, &space).unwrap(), 0.0);
        assert!(coherence(rho.view(), 0, 4, &space).is_err());
    }

    #[test]
    fn crossing_interpolation() {
        let rate = 0.3;
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.01).collect();
        let values: Vec<f64> = times.iter().map(|t| 0.5 * (-4.5 * rate * t).exp()).collect();
        let exact = 5f64.ln() / (4.5 * rate);
        let found = coherence_time(&times, &values, 0.1).unwrap();
        assert!((found - exact).abs() < 1e-4);
        assert_eq!(coherence_time(&times, &vec![0.5; times.len()], 0.1), None);
        let at_start = coherence_time(&times, &values, 0.5).unwrap();
        assert!(at_start.abs() < 1e-12);
        assert_eq!(coherence_time(&[], &[], 0.1), None);
    }

    #[test]
    fn decoherence_free_run_is_flat() {
        let mut params = SystemParams::new(0.0, 0.8, 0.0);
        params.gamma_m = 0.0;
        let config = RunConfig {
            params,
            samples: 11,
            ..RunConfig::standard(VariantId::DsmeThermal, ReservoirSpec::thermal(0.0), small_space(), 5.0)
        };
        let out = simulate(&config, false).unwrap();
        assert!(out.coherence.iter().all(|&p| (p - 0.5).abs() < 1e-14));
        assert_eq!(out.coherence_time, None);
        assert_eq!(out.kappa_t.len(), 11);
        assert!(!out.flags.is_empty());
    }

    #[test]
    fn config_json_round_trip_and_rejection() {
        let config = RunConfig::standard(
            VariantId::DsmeSqueezedHighT,
            ReservoirSpec::squeezed(2.0, 0.5, 1.0),
            small_space(),
            0.2,
        );
        let text = serde_json::to_string(&config).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), config);
        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["unexpected"] = serde_json::Value::Bool(true);
        assert!(RunConfig::from_json(&value.to_string()).is_err());
        let minimal = r#"{"params": {"delta": 0, "g0": 0.8, "kappa": 0.05, "gamma_m": 0.0166},
            "reservoir": {"n_th": 0}, "variant": "DSME_THERMAL",
            "space": {"dim_cavity": 4, "dim_mech": 3}, "t_max_kappa": 1}"#;
        let parsed = RunConfig::from_json(minimal).unwrap();
        assert_eq!(parsed.samples, 400);
        assert_eq!(parsed.threshold, 0.1);
        assert_eq!(parsed.mode, DissipationMode::TracePreserving);
        assert!(!parsed.include_hamiltonian);
        let bad_threshold = RunConfig { threshold: 0.7, ..parsed };
        assert!(bad_threshold.validate().is_err());
    }

    #[test]
    fn sweep_grid_validation() {
        let base = RunConfig::standard(VariantId::DsmeThermal, ReservoirSpec::thermal(0.0), small_space(), 1.0);
        assert!(SweepGrid::new(SweepAxis::R, vec![], base.clone()).is_err());
        assert!(SweepGrid::new(SweepAxis::R, vec![0.5, 0.2], base.clone()).is_err());
        assert!(SweepGrid::new(SweepAxis::Theta, vec![0.0, 7.0], base.clone()).is_err());
        assert!(SweepGrid::new(SweepAxis::G0, vec![0.1, 0.8], base).is_ok());
        assert_eq!("theta".parse::<SweepAxis>().unwrap(), SweepAxis::Theta);
        assert!("phi".parse::<SweepAxis>().is_err());
    }
}
