//! Optomechanical Hamiltonians, dressed states and dressed energies.
//!
//! All quantities are in units of the mechanical frequency ω_m, which is
//! therefore pinned to 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{dagger, polaron_unitary, Ket, Operator, SpaceSpec, C64};

/// Physical constants of the driven cavity with a movable mirror.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Laser detuning Δ = ω_L − ω_c.
    pub delta: f64,
    #[serde(default = "unit")]
    pub omega_m: f64,
    /// Single-photon coupling g0.
    pub g0: f64,
    pub kappa: f64,
    pub gamma_m: f64,
    /// Drive amplitude E; only the lab-frame Hamiltonian accepts E ≠ 0.
    #[serde(default)]
    pub drive: f64,
}

fn unit() -> f64 {
    1.0
}

impl SystemParams {
    /// Driveless parameters with γ_m = κ/3, the default used by all figure presets.
    pub fn new(delta: f64, g0: f64, kappa: f64) -> Self {
        Self {
            delta,
            omega_m: 1.0,
            g0,
            kappa,
            gamma_m: kappa / 3.0,
            drive: 0.0,
        }
    }

    /// Dimensionless coupling β0 = g0/ω_m.
    pub fn beta0(&self) -> f64 {
        self.g0 / self.omega_m
    }

    /// Checks ranges. Rates may be zero so that decoherence-free runs are expressible.
    pub fn validate(&self) -> Result<()> {
        if self.omega_m != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "omega_m is the unit of frequency and must be 1, got {}",
                self.omega_m
            )));
        }
        let checks = [
            ("g0", self.g0),
            ("kappa", self.kappa),
            ("gamma_m", self.gamma_m),
            ("drive", self.drive),
        ];
        for (name, value) in checks {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidParameter("delta must be finite".into()));
        }
        Ok(())
    }
}

/// Lab-frame Hamiltonian in the frame rotating with the laser:
/// −Δ a†a + ω_m b†b − g0 a†a (b + b†) + E (a† − a).
pub fn hamiltonian_lab(params: &SystemParams, space: &SpaceSpec) -> Result<Operator> {
    params.validate()?;
    space.validate()?;
    let a = space.a();
    let b = space.b();
    let nc = space.n_cavity();
    let position = &b + &dagger(&b);
    let h = nc.mapv(|z| -params.delta * z) + space.n_mech().mapv(|z| params.omega_m * z)
        - nc.dot(&position).mapv(|z| params.g0 * z)
        + (dagger(&a) - &a).mapv(|z| params.drive * z);
    Ok(h)
}

/// Polaron-frame Hamiltonian −Δ a†a + ω_m b†b − (g0²/ω_m)(a†a)², diagonal in the product basis.
pub fn hamiltonian_polaron(params: &SystemParams, space: &SpaceSpec) -> Result<Operator> {
    params.validate()?;
    space.validate()?;
    if params.drive != 0.0 {
        return Err(Error::UnsupportedRegime(
            "the polaron frame is defined only for a vanishing drive".into(),
        ));
    }
    let d = space.dim();
    let mut h = Operator::zeros((d, d));
    for n in 0..space.dim_cavity {
        for m in 0..space.dim_mech {
            let i = space.index(n, m);
            h[[i, i]] = C64::new(dressed_energy(n, m, params), 0.0);
        }
    }
    Ok(h)
}

/// Closed-form dressed energy E′ = −nΔ + mω_m − n² g0²/ω_m.
pub fn dressed_energy(n: usize, m: usize, params: &SystemParams) -> f64 {
    let n = n as f64;
    -n * params.delta + m as f64 * params.omega_m - n * n * params.g0 * params.g0 / params.omega_m
}

/// Dressed state |k⟩ ⊗ exp(k β0 (b† − b)) |l⟩.
pub fn dressed_state(k: usize, l: usize, params: &SystemParams, space: &SpaceSpec) -> Result<Ket> {
    if k >= space.dim_cavity {
        return Err(Error::IndexOutOfRange {
            what: "cavity level",
            index: k,
            limit: space.dim_cavity,
        });
    }
    if l >= space.dim_mech {
        return Err(Error::IndexOutOfRange {
            what: "mechanical level",
            index: l,
            limit: space.dim_mech,
        });
    }
    let u = polaron_unitary(params, space)?;
    let bare = Ket::basis(space.dim(), space.index(k, l))?;
    let psi = u.dot(bare.amplitudes());
    // The truncated displacement is unitary only up to edge leakage; renormalise.
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ket::new(psi.mapv(|z| z / norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{hermiticity_error, max_abs_diff, ONE};
    use approx::assert_abs_diff_eq;

    #[test]
    fn free_oscillator_limit() {
        let space = SpaceSpec::new(3, 4).unwrap();
        let params = SystemParams::new(0.0, 0.0, 0.05);
        let h = hamiltonian_lab(&params, &space).unwrap();
        assert!(max_abs_diff(&h, &space.n_mech()) < 1e-15);
    }

    #[test]
    fn vacuum_energy_and_hermiticity() {
        let space = SpaceSpec::new(4, 6).unwrap();
        let params = SystemParams::new(0.3, 0.8, 0.05);
        let h = hamiltonian_lab(&params, &space).unwrap();
        assert_eq!(h[[0, 0]], C64::new(0.0, 0.0));
        assert!(hermiticity_error(h.view()) < 1e-12);
    }

    #[test]
    fn drive_term_is_anti_hermitian() {
        let space = SpaceSpec::new(3, 3).unwrap();
        let mut params = SystemParams::new(0.2, 0.4, 0.05);
        let h0 = hamiltonian_lab(&params, &space).unwrap();
        params.drive = 0.7;
        let h = hamiltonian_lab(&params, &space).unwrap();
        let drive_part = &h - &h0;
        let a = space.a();
        let expect = (dagger(&a) - &a).mapv(|z| 0.7 * z);
        assert!(max_abs_diff(&drive_part, &expect) < 1e-15);
        assert!(max_abs_diff(&drive_part, &dagger(&drive_part).mapv(|z| -z)) < 1e-15);
        assert!(matches!(
            hamiltonian_polaron(&params, &space),
            Err(Error::UnsupportedRegime(_))
        ));
    }

    #[test]
    fn polaron_hamiltonian_is_diagonal_with_closed_form_entries() {
        let space = SpaceSpec::new(4, 5).unwrap();
        let params = SystemParams::new(0.0, 0.8, 0.05);
        let h = hamiltonian_polaron(&params, &space).unwrap();
        for ((i, j), z) in h.indexed_iter() {
            if i != j {
                assert_eq!(*z, C64::new(0.0, 0.0));
            }
        }
        assert_abs_diff_eq!(h[[space.index(1, 0), space.index(1, 0)]].re, -0.64, epsilon = 1e-15);
    }

    #[test]
    fn dressed_energy_closed_form() {
        let p = SystemParams::new(0.0, 0.8, 0.05);
        assert_eq!(dressed_energy(0, 0, &p), 0.0);
        assert_abs_diff_eq!(dressed_energy(1, 1, &p), 0.36, epsilon = 1e-15);
        let q = SystemParams::new(0.5, 0.5, 0.05);
        assert_abs_diff_eq!(dressed_energy(2, 0, &q), -2.0, epsilon = 1e-15);
    }

    #[test]
    fn dressed_state_trivial_cases() {
        let space = SpaceSpec::new(3, 10).unwrap();
        let params = SystemParams::new(0.0, 0.8, 0.05);
        let psi = dressed_state(0, 4, &params, &space).unwrap();
        assert!((psi.amplitudes()[space.index(0, 4)] - ONE).norm() < 1e-14);
        let bare = SystemParams::new(0.0, 0.0, 0.05);
        let psi = dressed_state(2, 3, &bare, &space).unwrap();
        assert!((psi.amplitudes()[space.index(2, 3)] - ONE).norm() < 1e-14);
        assert!(dressed_state(3, 0, &params, &space).is_err());
        assert!(dressed_state(0, 10, &params, &space).is_err());
    }

    #[test]
    fn dressed_state_energy_matches_closed_form() {
        let space = SpaceSpec::new(3, 40).unwrap();
        let params = SystemParams::new(0.0, 0.8, 0.05);
        let h = hamiltonian_lab(&params, &space).unwrap();
        let psi = dressed_state(1, 0, &params, &space).unwrap();
        assert_abs_diff_eq!(psi.expectation(&h).re, -0.64, epsilon = 1e-4);
    }
}
