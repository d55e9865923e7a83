//! Time integration of dρ/dt = L ρ.
//!
//! The default integrator is the Dormand–Prince 5(4) pair with first-same-as-last
//! reuse and its continuous extension for sampling, acting on the
//! column-stacked ρ through sparse matrix-vector products.
//! A dense exponential propagator serves as an oracle on small spaces.

use std::collections::HashMap;
use std::ops::ControlFlow;

use log::debug;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{expm, min_eigenvalue, DensityMatrix, Operator, SpaceSpec, C64, ZERO};
use crate::liouvillian::{unvectorize, vectorize, SuperOperator};

/// Largest Hilbert dimension accepted by the dense exponential.
pub const EXPM_DIM_LIMIT: usize = 32;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    AdaptiveRk,
    ExactExpm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step, in units of 1/ω_m.
    pub max_step: f64,
    pub method: Method,
    /// Minimum eigenvalue is computed every `eig_stride` samples and at the
    /// last one; 0 disables the check.
    pub eig_stride: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: 10.0,
            method: Method::AdaptiveRk,
            eig_stride: 40,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rtol and atol must be positive (got {}, {})",
                self.rtol, self.atol
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "max_step must be positive, got {}",
                self.max_step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleDiagnostics {
    /// |Tr ρ − 1|.
    pub trace_err: f64,
    /// Largest Hermiticity correction applied since the previous sample.
    pub herm_err: f64,
    /// Smallest eigenvalue of ρ, when it was checked at this sample.
    pub min_eig: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Samples of the evolution, possibly reduced by an observer.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    /// Sample times in units of 1/ω_m.
    pub times: Vec<f64>,
    pub states: Vec<T>,
    pub diagnostics: Vec<SampleDiagnostics>,
    pub stats: StepStats,
    /// False when the observer stopped the run before the last requested time.
    pub completed: bool,
}

impl<T> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_trace_err(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.trace_err).fold(0.0, f64::max)
    }

    pub fn max_herm_err(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.herm_err).fold(0.0, f64::max)
    }

    pub fn min_eig_watermark(&self) -> Option<f64> {
        self.diagnostics
            .iter()
            .filter_map(|d| d.min_eig)
            .reduce(f64::min)
    }

    /// Running minimum of the checked eigenvalues, one entry per sample.
    pub fn running_watermark(&self) -> Vec<Option<f64>> {
        let mut low: Option<f64> = None;
        self.diagnostics
            .iter()
            .map(|d| {
                if let Some(e) = d.min_eig {
                    low = Some(low.map_or(e, |l| l.min(e)));
                }
                low
            })
            .collect()
    }
}

fn check_inputs(gen: &SuperOperator, rho0: &DensityMatrix, times: &[f64]) -> Result<()> {
    if rho0.dim() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            found: rho0.dim(),
        });
    }
    if times.is_empty() {
        return Err(Error::InvalidParameter("no sample times requested".into()));
    }
    if !(times[0] >= 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "sample times must be non-negative and strictly increasing".into(),
        ));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("sample times must be finite".into()));
    }
    Ok(())
}

/// Integrates and keeps every sampled density matrix.
pub fn integrate(
    gen: &impl AsRef<SuperOperator>,
    rho0: &DensityMatrix,
    times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory<Operator>> {
    integrate_with(gen, rho0, times, opts, |_, rho| ControlFlow::Continue(rho.clone()))
}

/// Integrates and hands each sample to `observe`.
///
/// `Continue(x)` records `x`; `Break(x)` records `x` and ends the run.
pub fn integrate_with<T, F>(
    gen: &impl AsRef<SuperOperator>,
    rho0: &DensityMatrix,
    times: &[f64],
    opts: &IntegratorOptions,
    mut observe: F,
) -> Result<Trajectory<T>>
where
    F: FnMut(f64, &Operator) -> ControlFlow<T, T>,
{
    let gen = gen.as_ref();
    opts.validate()?;
    check_inputs(gen, rho0, times)?;
    let d = gen.dim();
    let mut recorder = Recorder::new(d, times.len(), opts.eig_stride);
    let initial = vectorize(rho0.matrix().view()).to_vec();

    match opts.method {
        Method::ExactExpm => {
            if d > EXPM_DIM_LIMIT {
                return Err(Error::DimensionTooLarge {
                    dim: d,
                    limit: EXPM_DIM_LIMIT,
                });
            }
            let dense = gen.to_dense();
            let mut cache: HashMap<u64, Array2<C64>> = HashMap::new();
            let mut y = initial;
            let mut t = 0.0;
            for (k, &ts) in times.iter().enumerate() {
                let dt = ts - t;
                if dt > 0.0 {
                    let prop = cache
                        .entry(dt.to_bits())
                        .or_insert_with(|| expm(&dense.mapv(|z| z * dt)));
                    y = prop.dot(&ndarray::Array1::from(y)).to_vec();
                    t = ts;
                }
                if recorder.record(k, ts, &y, 0.0, &mut observe).is_break() {
                    return Ok(recorder.finish(StepStats::default(), false));
                }
            }
            Ok(recorder.finish(StepStats::default(), true))
        }
        Method::AdaptiveRk => {
            let (stats, completed) = Dopri5::new(gen, opts).run(initial, times, &mut recorder, &mut observe)?;
            Ok(recorder.finish(stats, completed))
        }
    }
}

struct Recorder<T> {
    dim: usize,
    total: usize,
    eig_stride: usize,
    times: Vec<f64>,
    states: Vec<T>,
    diagnostics: Vec<SampleDiagnostics>,
}

impl<T> Recorder<T> {
    fn new(dim: usize, total: usize, eig_stride: usize) -> Self {
        Self {
            dim,
            total,
            eig_stride,
            times: Vec::with_capacity(total),
            states: Vec::with_capacity(total),
            diagnostics: Vec::with_capacity(total),
        }
    }

    fn record<F>(&mut self, k: usize, t: f64, y: &[C64], herm_err: f64, observe: &mut F) -> ControlFlow<()>
    where
        F: FnMut(f64, &Operator) -> ControlFlow<T, T>,
    {
        let rho = unvectorize(y, self.dim);
        let tr: C64 = (0..self.dim).map(|i| rho[[i, i]]).sum();
        let check_eig = self.eig_stride > 0 && (k.is_multiple_of(self.eig_stride) || k + 1 == self.total);
        let (value, stop) = match observe(t, &rho) {
            ControlFlow::Continue(v) => (v, false),
            ControlFlow::Break(v) => (v, true),
        };
        // the final recorded sample always gets an eigenvalue check
        let min_eig = (check_eig || (stop && self.eig_stride > 0)).then(|| min_eigenvalue(rho.view()));
        self.times.push(t);
        self.states.push(value);
        self.diagnostics.push(SampleDiagnostics {
            trace_err: (tr - 1.0).norm(),
            herm_err,
            min_eig,
        });
        if stop {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    }

    fn finish(self, stats: StepStats, completed: bool) -> Trajectory<T> {
        Trajectory {
            times: self.times,
            states: self.states,
            diagnostics: self.diagnostics,
            stats,
            completed,
        }
    }
}

/// y ← y + a·x.
fn axpy(a: f64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// y(t + θh) from the step's continuous extension.
fn interpolate(theta: f64, y: &[C64], dense: &[Vec<C64>; 4], out: &mut [C64]) {
    let [r2, r3, r4, r5] = dense;
    let one = 1.0 - theta;
    for i in 0..y.len() {
        out[i] = y[i] + theta * (r2[i] + one * (r3[i] + theta * (r4[i] + one * r5[i])));
    }
}

/// Replaces column-stacked ρ by (ρ + ρ†)/2 and returns the largest change.
fn symmetrize(y: &mut [C64], d: usize) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..d {
        let diag = &mut y[j + j * d];
        worst = worst.max(diag.im.abs());
        diag.im = 0.0;
        for i in 0..j {
            let upper = y[i + j * d];
            let lower = y[j + i * d];
            let mean = 0.5 * (upper + lower.conj());
            worst = worst.max((upper - mean).norm());
            y[i + j * d] = mean;
            y[j + i * d] = mean.conj();
        }
    }
    worst
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ for the embedded error estimate.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Dense-output weights.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

struct Dopri5<'a> {
    gen: &'a SuperOperator,
    opts: &'a IntegratorOptions,
    stats: StepStats,
    upper: Vec<u32>,
}

impl<'a> Dopri5<'a> {
    fn new(gen: &'a SuperOperator, opts: &'a IntegratorOptions) -> Self {
        let d = gen.dim();
        let upper = (0..d)
            .flat_map(|j| (0..=j).map(move |i| (i + j * d) as u32))
            .collect();
        Self {
            gen,
            opts,
            stats: StepStats::default(),
            upper,
        }
    }

    /// Evaluates the upper triangle only and mirrors it, which is exact for a
    /// Hermiticity-preserving generator acting on a Hermitian state.
    fn rhs(&mut self, y: &[C64], out: &mut [C64]) {
        self.stats.rhs_evals += 1;
        let d = self.gen.dim();
        self.gen.matrix().matvec_rows_into(&self.upper, y, out);
        for j in 0..d {
            out[j + j * d].im = 0.0;
            for i in 0..j {
                out[j + i * d] = out[i + j * d].conj();
            }
        }
    }

    fn error_norm(&self, err: &[C64], y: &[C64], ynew: &[C64]) -> f64 {
        let mut acc = 0.0;
        for ((e, a), b) in err.iter().zip(y).zip(ynew) {
            let scale = self.opts.atol + self.opts.rtol * a.norm_sqr().max(b.norm_sqr()).sqrt();
            acc += e.norm_sqr() / (scale * scale);
        }
        (acc / err.len() as f64).sqrt()
    }

    fn initial_step(&mut self, y: &[C64], f0: &[C64], span: f64) -> f64 {
        let zeros = vec![ZERO; y.len()];
        let d0 = self.error_norm(y, &zeros, y);
        let d1 = self.error_norm(f0, &zeros, y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        let y1: Vec<C64> = y.iter().zip(f0).map(|(a, f)| a + h0 * f).collect();
        let mut f1 = vec![ZERO; y.len()];
        self.rhs(&y1, &mut f1);
        let df: Vec<C64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        let d2 = self.error_norm(&df, &zeros, y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (1e-6f64).max(h0 * 1e-3)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.opts.max_step)
    }

    /// Continuous-extension coefficients for the step y → ynew.
    fn dense_coefficients(&self, step: f64, y: &[C64], ynew: &[C64], k: &[Vec<C64>], out: &mut [Vec<C64>; 4]) {
        let [r2, r3, r4, r5] = out;
        for i in 0..y.len() {
            let dy = ynew[i] - y[i];
            let a = step * k[0][i] - dy;
            r2[i] = dy;
            r3[i] = a;
            r4[i] = dy - step * k[6][i] - a;
            r5[i] = step
                * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
        }
    }

    fn run<T, F>(
        mut self,
        mut y: Vec<C64>,
        times: &[f64],
        recorder: &mut Recorder<T>,
        observe: &mut F,
    ) -> Result<(StepStats, bool)>
    where
        F: FnMut(f64, &Operator) -> ControlFlow<T, T>,
    {
        let n = y.len();
        let d = self.gen.dim();
        let mut k = vec![vec![ZERO; n]; 7];
        let mut stage = vec![ZERO; n];
        let mut ynew = vec![ZERO; n];
        let mut err = vec![ZERO; n];

        let mut t = 0.0;
        let mut herm_since_sample = 0.0f64;
        let mut next = 0;
        if times[0] == 0.0 {
            if recorder.record(0, 0.0, &y, 0.0, observe).is_break() {
                return Ok((self.stats, false));
            }
            next = 1;
        }
        if next == times.len() {
            return Ok((self.stats, true));
        }

        let mut f0 = vec![ZERO; n];
        self.rhs(&y, &mut f0);
        k[0].copy_from_slice(&f0);
        let mut h = self.initial_step(&y, &k[0], times[times.len() - 1]);

        let t_end = times[times.len() - 1];
        let mut sample = vec![ZERO; n];
        let mut dense = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
        while next < times.len() {
            let last_step = t + h >= t_end;
            let step = if last_step { t_end - t } else { h };
            if step <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t, h: step });
            }

            let combos: [&[(usize, f64)]; 5] = [
                &[(0, A21)],
                &[(0, A31), (1, A32)],
                &[(0, A41), (1, A42), (2, A43)],
                &[(0, A51), (1, A52), (2, A53), (3, A54)],
                &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)],
            ];
            for (s, combo) in combos.iter().enumerate() {
                stage.copy_from_slice(&y);
                for &(j, a) in combo.iter() {
                    axpy(step * a, &k[j], &mut stage);
                }
                let mut out = std::mem::take(&mut k[s + 1]);
                self.rhs(&stage, &mut out);
                k[s + 1] = out;
            }
            ynew.copy_from_slice(&y);
            for (j, b) in [(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)] {
                axpy(step * b, &k[j], &mut ynew);
            }
            let mut last = std::mem::take(&mut k[6]);
            self.rhs(&ynew, &mut last);
            k[6] = last;
            err.fill(ZERO);
            for (j, e) in [(0, E1), (2, E3), (3, E4), (4, E5), (5, E6), (6, E7)] {
                axpy(step * e, &k[j], &mut err);
            }
            let norm = self.error_norm(&err, &y, &ynew);

            if !norm.is_finite() {
                self.stats.rejected += 1;
                h = step * MIN_FACTOR;
                if h < 1e-12 {
                    return Err(Error::NonFinite { t });
                }
                continue;
            }
            if norm > 1.0 {
                self.stats.rejected += 1;
                h = step * (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
                continue;
            }

            self.stats.accepted += 1;
            let t_new = if last_step { t_end } else { t + step };
            if times[next] < t_new {
                self.dense_coefficients(step, &y, &ynew, &k, &mut dense);
            }
            let mut stopped = false;
            while next < times.len() && times[next] <= t_new {
                let ts = times[next];
                if ts == t_new {
                    sample.copy_from_slice(&ynew);
                } else {
                    interpolate((ts - t) / step, &y, &dense, &mut sample);
                }
                herm_since_sample = herm_since_sample.max(symmetrize(&mut sample, d));
                let flow = recorder.record(next, ts, &sample, herm_since_sample, observe);
                herm_since_sample = 0.0;
                next += 1;
                if flow.is_break() {
                    stopped = true;
                    break;
                }
            }
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            herm_since_sample = herm_since_sample.max(symmetrize(&mut y, d));
            // L maps Hermitian matrices to Hermitian ones, so its action on
            // the symmetrized state is the symmetrized derivative.
            symmetrize(&mut k[6], d);
            k.swap(0, 6);
            if stopped {
                debug!("observer stopped integration at t = {t}");
                return Ok((self.stats, false));
            }
            let factor = if norm == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            h = (step * factor).min(self.opts.max_step);
        }
        debug!(
            "integration finished: {} accepted, {} rejected, {} rhs evaluations",
            self.stats.accepted, self.stats.rejected, self.stats.rhs_evals
        );
        Ok((self.stats, true))
    }
}

/// Dense e^{Lt} vec(ρ0) on spaces with D ≤ 32.
pub fn exact_expm_evolve(gen: &impl AsRef<SuperOperator>, rho0: &DensityMatrix, t: f64) -> Result<Operator> {
    let gen = gen.as_ref();
    let d = gen.dim();
    if d > EXPM_DIM_LIMIT {
        return Err(Error::DimensionTooLarge {
            dim: d,
            limit: EXPM_DIM_LIMIT,
        });
    }
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho0.dim(),
        });
    }
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite, got {t}")));
    }
    let prop = expm(&gen.to_dense().mapv(|z| z * t));
    let y = prop.dot(&vectorize(rho0.matrix().view()));
    Ok(unvectorize(y.as_slice().expect("contiguous"), d))
}

/// dim_mech × 1.5 (rounded up) and dim_cavity + 2.
pub fn refine(space: &SpaceSpec) -> SpaceSpec {
    SpaceSpec {
        dim_cavity: space.dim_cavity + 2,
        dim_mech: (space.dim_mech * 3).div_ceil(2),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub baseline: SpaceSpec,
    pub refined: SpaceSpec,
    /// max_t |P_ref(t) − P_base(t)| over the common samples.
    pub max_deviation: f64,
    /// `max_deviation / P_base(0)`.
    pub relative_deviation: f64,
    pub tolerance: f64,
    pub converged: bool,
}

/// Relative deviation above which a truncation counts as unconverged.
pub const CONVERGENCE_TOL: f64 = 0.01;

/// Compares an observable series on `baseline` against the refined truncation.
///
/// `series(space)` returns the observable at a fixed sample grid; samples are
/// compared over the shorter of the two series.
pub fn convergence_check<F>(baseline: SpaceSpec, mut series: F) -> Result<ConvergenceReport>
where
    F: FnMut(&SpaceSpec) -> Result<Vec<f64>>,
{
    let refined = refine(&baseline);
    let base = series(&baseline)?;
    let fine = series(&refined)?;
    if base.is_empty() || fine.is_empty() {
        return Err(Error::InvalidParameter("convergence series is empty".into()));
    }
    let max_deviation = base
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = base[0].abs();
    let relative_deviation = if scale > 0.0 { max_deviation / scale } else { max_deviation };
    Ok(ConvergenceReport {
        baseline,
        refined,
        max_deviation,
        relative_deviation,
        tolerance: CONVERGENCE_TOL,
        converged: relative_deviation <= CONVERGENCE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{hermiticity_error, max_abs_diff, partial_trace_mech, trace, Ket};
    use crate::liouvillian::{build_liouvillian, dissipator, DissipationMode, VariantId};
    use crate::model::SystemParams;
    use crate::reservoir::ReservoirSpec;
    use ndarray::Array1;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn cat_state(space: &SpaceSpec, p: usize, q: usize) -> DensityMatrix {
        let mut psi = Array1::zeros(space.dim());
        psi[space.index(p, 0)] = C64::new(FRAC_1_SQRT_2, 0.0);
        psi[space.index(q, 0)] = C64::new(FRAC_1_SQRT_2, 0.0);
        DensityMatrix::from_ket(&Ket::new(psi).unwrap())
    }

    fn grid(t_max: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| t_max * k as f64 / n as f64).collect()
    }

    #[test]
    fn amplitude_decay() {
        let space = SpaceSpec::new(3, 2).unwrap();
        let kappa = 0.05;
        let gen = dissipator(&space.a()).unwrap().scaled(C64::new(kappa, 0.0));
        let rho0 = DensityMatrix::from_ket(&Ket::basis(space.dim(), space.index(1, 0)).unwrap());
        let times = grid(5.0 / kappa, 50);
        let nc = space.n_cavity();
        let traj = integrate(&gen, &rho0, &times, &IntegratorOptions::default()).unwrap();
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            let n = trace(nc.dot(rho).view()).re;
            let exact = (-kappa * t).exp();
            assert!((n - exact).abs() <= 1e-6 * exact, "t={t}: {n} vs {exact}");
        }
        assert!(traj.completed);
        assert!(traj.max_trace_err() < 1e-10);
    }

    #[test]
    fn pure_dephasing_of_cat_state() {
        let space = SpaceSpec::new(4, 2).unwrap();
        let rate = 0.005;
        let gen = dissipator(&space.n_cavity()).unwrap().scaled(C64::new(rate, 0.0));
        let rho0 = cat_state(&space, 0, 3);
        let times = grid(100.0, 40);
        let traj = integrate(&gen, &rho0, &times, &IntegratorOptions::default()).unwrap();
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            let p = partial_trace_mech(rho.view(), &space).unwrap()[[0, 3]].norm();
            let exact = 0.5 * (-4.5 * rate * t).exp();
            assert!((p - exact).abs() <= 1e-6 * exact);
        }
    }

    #[test]
    fn zero_generator_is_static() {
        let gen = SuperOperator::zero(6);
        let space = SpaceSpec::new(3, 2).unwrap();
        let rho0 = cat_state(&space, 0, 2);
        let traj = integrate(&gen, &rho0, &grid(10.0, 5), &IntegratorOptions::default()).unwrap();
        for rho in &traj.states {
            assert_eq!(rho, rho0.matrix());
        }
        assert_eq!(exact_expm_evolve(&gen, &rho0, 3.0).unwrap(), *rho0.matrix());
    }

    fn small_thermal() -> (SpaceSpec, crate::liouvillian::Liouvillian) {
        let space = SpaceSpec::new(2, 3).unwrap();
        let params = SystemParams::new(0.0, 0.4, 0.3);
        let l = build_liouvillian(
            VariantId::DsmeThermal,
            DissipationMode::TracePreserving,
            &params,
            &ReservoirSpec::thermal(0.5),
            &space,
        )
        .unwrap();
        (space, l)
    }

    #[test]
    fn expm_semigroup_and_identity() {
        let (space, l) = small_thermal();
        let rho0 = cat_state(&space, 0, 1);
        assert!(max_abs_diff(&exact_expm_evolve(&l, &rho0, 0.0).unwrap(), rho0.matrix()) < 1e-15);
        let mid = exact_expm_evolve(&l, &rho0, 1.3).unwrap();
        let mid = DensityMatrix::new(mid).unwrap();
        let two_step = exact_expm_evolve(&l, &mid, 2.1).unwrap();
        let one_step = exact_expm_evolve(&l, &rho0, 3.4).unwrap();
        assert!(max_abs_diff(&two_step, &one_step) < 1e-10);
    }

    #[test]
    fn integrator_matches_exponential() {
        let (space, l) = small_thermal();
        let rho0 = cat_state(&space, 0, 1);
        let opts = IntegratorOptions::default();
        let times = grid(20.0, 20);
        let traj = integrate(&l, &rho0, &times, &opts).unwrap();
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            let exact = exact_expm_evolve(&l, &rho0, *t).unwrap();
            assert!(max_abs_diff(rho, &exact) < 10.0 * opts.rtol);
        }
        let dense = integrate(&l, &rho0, &times, &IntegratorOptions { method: Method::ExactExpm, ..opts }).unwrap();
        for (a, b) in traj.states.iter().zip(&dense.states) {
            assert!(max_abs_diff(a, b) < 10.0 * opts.rtol);
        }
    }

    #[test]
    fn deterministic_and_hermitian() {
        let (space, l) = small_thermal();
        let rho0 = cat_state(&space, 0, 1);
        let times = grid(15.0, 30);
        let opts = IntegratorOptions { eig_stride: 1, ..Default::default() };
        let a = integrate(&l, &rho0, &times, &opts).unwrap();
        let b = integrate(&l, &rho0, &times, &opts).unwrap();
        assert_eq!(a.states, b.states);
        assert!(a.states.iter().all(|r| hermiticity_error(r.view()) == 0.0));
        assert!(a.min_eig_watermark().unwrap() > -1e-10);
        assert_eq!(a.diagnostics.len(), times.len());
    }

    #[test]
    fn observer_can_stop_early() {
        let (space, l) = small_thermal();
        let rho0 = cat_state(&space, 0, 1);
        let times = grid(20.0, 40);
        let traj = integrate_with(&l, &rho0, &times, &IntegratorOptions::default(), |t, _| {
            if t >= 5.0 {
                ControlFlow::Break(t)
            } else {
                ControlFlow::Continue(t)
            }
        })
        .unwrap();
        assert!(!traj.completed);
        assert_eq!(traj.len(), 11);
        assert!(traj.diagnostics.last().unwrap().min_eig.is_some());
    }

    #[test]
    fn rejects_bad_inputs() {
        let (space, l) = small_thermal();
        let rho0 = cat_state(&space, 0, 1);
        let opts = IntegratorOptions::default();
        assert!(integrate(&l, &rho0, &[1.0, 0.5], &opts).is_err());
        assert!(integrate(&l, &rho0, &[], &opts).is_err());
        let wrong = DensityMatrix::from_ket(&Ket::basis(4, 0).unwrap());
        assert!(matches!(
            integrate(&l, &wrong, &[0.0, 1.0], &opts),
            Err(Error::DimensionMismatch { .. })
        ));
        let big = SuperOperator::zero(33);
        let rho_big = DensityMatrix::from_ket(&Ket::basis(33, 0).unwrap());
        assert!(matches!(
            exact_expm_evolve(&big, &rho_big, 1.0),
            Err(Error::DimensionTooLarge { .. })
        ));
        let bad = IntegratorOptions { rtol: 0.0, ..opts };
        assert!(integrate(&l, &rho0, &[0.0, 1.0], &bad).is_err());
    }

    #[test]
    fn convergence_of_decoupled_run() {
        let report = convergence_check(SpaceSpec::new(4, 3).unwrap(), |space| {
            let params = SystemParams::new(0.0, 0.0, 0.05);
            let l = build_liouvillian(
                VariantId::DsmeThermal,
                DissipationMode::TracePreserving,
                &params,
                &ReservoirSpec::thermal(0.0),
                space,
            )?;
            let rho0 = cat_state(space, 0, 3);
            let traj = integrate_with(&l, &rho0, &grid(40.0, 20), &IntegratorOptions::default(), |_, rho| {
                ControlFlow::Continue(partial_trace_mech(rho.view(), space).unwrap()[[0, 3]].norm())
            })?;
            Ok(traj.states)
        })
        .unwrap();
        assert_eq!(report.refined, SpaceSpec { dim_cavity: 6, dim_mech: 5 });
        assert!(report.relative_deviation < 1e-9);
        assert!(report.converged);
    }
}
