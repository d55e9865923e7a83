//! Fast self-checks of the generator algebra and the integrator, run by the
//! `validate` subcommand.

use std::ops::ControlFlow;

use ndarray::Array2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::Result;
use crate::evolution::{exact_expm_evolve, integrate, integrate_with, IntegratorOptions};
use crate::experiments::{coherence, initial_state, InitialStateSpec};
use crate::fock::{dagger, max_abs_diff, trace, DensityMatrix, Ket, Operator, SpaceSpec, C64};
use crate::liouvillian::{
    assemble_from_bath_integrals, build_liouvillian, dissipator, expand_dressed_dissipator,
    DissipationMode, VariantId,
};
use crate::model::SystemParams;
use crate::reservoir::{squeeze_dephasing_factor, ReservoirSpec};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check {
        name,
        passed: value <= limit,
        detail: format!("{value:.3e} (limit {limit:.0e})"),
    }
}

fn random_matrix(rng: &mut StdRng, d: usize) -> Operator {
    Array2::from_shape_fn((d, d), |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn reductions() -> Result<f64> {
    let space = SpaceSpec::new(4, 6)?;
    let params = SystemParams::new(0.0, 0.8, 0.05);
    let spec = ReservoirSpec::thermal(2.0);
    let mode = DissipationMode::TracePreserving;
    let mut worst = 0.0f64;
    for (sq, th) in [
        (VariantId::DsmeSqueezed, VariantId::DsmeThermal),
        (VariantId::DsmeSqueezedHighT, VariantId::DsmeThermalHighT),
        (VariantId::SmeDressedSqueezed, VariantId::SmeDressedThermal),
    ] {
        let a = build_liouvillian(sq, mode, &params, &spec, &space)?;
        let b = build_liouvillian(th, mode, &params, &spec, &space)?;
        worst = worst.max(a.generator().max_abs_diff(b.generator()));
    }
    Ok(worst)
}

fn dissipator_action(rng: &mut StdRng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let o = random_matrix(rng, 12);
        let rho = random_matrix(rng, 12);
        let od = dagger(&o);
        let odo = od.dot(&o);
        let direct = o.dot(&rho).dot(&od) - (odo.dot(&rho) + rho.dot(&odo)).mapv(|z| 0.5 * z);
        worst = worst.max(max_abs_diff(&dissipator(&o)?.apply(rho.view())?, &direct));
    }
    Ok(worst)
}

fn dressed_expansion() -> Result<f64> {
    let space = SpaceSpec::new(3, 6)?;
    let mut worst = 0.0f64;
    for g0 in [0.1, 0.8] {
        let parts = expand_dressed_dissipator(&SystemParams::new(0.0, g0, 0.05), &space)?;
        let sum = parts.main.add(&parts.dephasing).add(&parts.residual);
        worst = worst.max(sum.max_abs_diff(&dissipator(&space.b())?));
    }
    Ok(worst)
}

fn bath_assembly() -> Result<f64> {
    let space = SpaceSpec::new(3, 5)?;
    let params = SystemParams::new(0.0, 0.8, 0.05);
    let spec = ReservoirSpec::squeezed(20.0, 0.5, 1.3);
    let direct = build_liouvillian(
        VariantId::DsmeSqueezedHighT,
        DissipationMode::TracePreserving,
        &params,
        &spec,
        &space,
    )?;
    Ok(assemble_from_bath_integrals(&params, &spec, &space)?.max_abs_diff(direct.generator()))
}

fn cavity_decay() -> Result<f64> {
    let space = SpaceSpec::new(3, 2)?;
    let kappa = 0.05;
    let gen = dissipator(&space.a())?.scaled(C64::new(kappa, 0.0));
    let rho0 = DensityMatrix::from_ket(&Ket::basis(space.dim(), space.index(1, 0))?);
    let times: Vec<f64> = (0..=20).map(|k| k as f64 * 5.0 / kappa / 20.0).collect();
    let nc = space.n_cavity();
    let traj = integrate(&gen, &rho0, &times, &IntegratorOptions::default())?;
    Ok(traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, rho)| {
            let exact = (-kappa * t).exp();
            (trace(nc.dot(rho).view()).re - exact).abs() / exact
        })
        .fold(0.0, f64::max))
}

fn pure_dephasing() -> Result<f64> {
    let space = SpaceSpec::new(4, 2)?;
    let rate = 0.005;
    let gen = dissipator(&space.n_cavity())?.scaled(C64::new(rate, 0.0));
    let rho0 = initial_state(&InitialStateSpec::default(), &space)?;
    let times: Vec<f64> = (0..=20).map(|k| k as f64 * 5.0).collect();
    let traj = integrate_with(&gen, &rho0, &times, &IntegratorOptions::default(), |_, rho| {
        ControlFlow::Continue(coherence(rho.view(), 0, 3, &space).unwrap_or(f64::NAN))
    })?;
    Ok(traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, p)| {
            let exact = 0.5 * (-4.5 * rate * t).exp();
            (p - exact).abs() / exact
        })
        .fold(0.0, f64::max))
}

fn integrator_vs_expm() -> Result<f64> {
    let space = SpaceSpec::new(2, 3)?;
    let l = build_liouvillian(
        VariantId::DsmeThermal,
        DissipationMode::TracePreserving,
        &SystemParams::new(0.0, 0.8, 0.05),
        &ReservoirSpec::thermal(1.0),
        &space,
    )?;
    let rho0 = initial_state(&InitialStateSpec { q: 1, ..Default::default() }, &space)?;
    let times: Vec<f64> = (1..=20).map(|k| k as f64 * 2.0).collect();
    let traj = integrate(&l, &rho0, &times, &IntegratorOptions::default())?;
    let mut worst = 0.0f64;
    for (t, rho) in traj.times.iter().zip(&traj.states) {
        worst = worst.max(max_abs_diff(rho, &exact_expm_evolve(&l, &rho0, *t)?));
    }
    Ok(worst)
}

fn dephasing_factor() -> f64 {
    (0..=20)
        .map(|k| {
            let r = 0.1 * k as f64;
            let at_pi = (squeeze_dephasing_factor(r, std::f64::consts::PI) - (-2.0 * r).exp()).abs();
            let at_zero = (squeeze_dephasing_factor(r, 0.0) - (2.0 * r).exp()).abs() / (2.0 * r).exp();
            at_pi.max(at_zero)
        })
        .fold(0.0, f64::max)
}

fn trace_preservation() -> Result<f64> {
    let space = SpaceSpec::new(4, 5)?;
    let params = SystemParams::new(0.0, 0.8, 0.05);
    let spec = ReservoirSpec::squeezed(3.0, 0.6, 2.0);
    let mut worst = 0.0f64;
    for v in VariantId::ALL {
        let l = build_liouvillian(v, DissipationMode::TracePreserving, &params, &spec, &space)?;
        worst = worst.max(l.generator().trace_drift());
    }
    Ok(worst)
}

/// Runs every check; an error inside a check counts as a failure.
pub fn run_all() -> Vec<Check> {
    let mut rng = StdRng::seed_from_u64(2024);
    let results: Vec<(&'static str, Result<f64>, f64)> = vec![
        ("reductions at r = 0", reductions(), 1e-12),
        ("dissipator action vs direct formula", dissipator_action(&mut rng), 1e-12),
        ("dressed dissipator expansion", dressed_expansion(), 1e-12),
        ("bath-integral assembly", bath_assembly(), 1e-12),
        ("trace preservation of every variant", trace_preservation(), 1e-12),
        ("cavity amplitude decay (relative)", cavity_decay(), 1e-6),
        ("pure dephasing of P_03 (relative)", pure_dephasing(), 1e-6),
        ("adaptive integrator vs dense exponential", integrator_vs_expm(), 1e-7),
        ("squeeze dephasing factor at theta = 0, pi", Ok(dephasing_factor()), 1e-14),
    ];
    results
        .into_iter()
        .map(|(name, value, limit)| match value {
            Ok(v) => check(name, v, limit),
            Err(e) => Check {
                name,
                passed: false,
                detail: e.to_string(),
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
