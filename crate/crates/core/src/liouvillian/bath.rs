//! Second-order bath integrals assembled into a GKSL generator.
//!
//! The interaction χ(t) = e^{−iω_m t} B + e^{iω_m t} B† + 2β0 N̂_c couples the
//! mirror to its reservoir. Each pair of components (L_i, L_j) picks up a
//! one-sided correlation integral Γ_ij; keeping only the secular pairs and the
//! damping part K = Γ + Γ† of that matrix gives
//! Σ_ij K_ij (L_i ρ L_j† − ½{L_j† L_i, ρ}).

use ndarray::Array2;

use crate::error::Result;
use crate::fock::{dagger, min_eigenvalue, Operator, SpaceSpec, C64};
use crate::model::SystemParams;
use crate::reservoir::{squeezed_coefficients, ReservoirSpec};

use super::{dressed_mech_jump, SandwichSum, SuperOperator};

/// Jump-operator components with their one-sided correlation integrals.
#[derive(Debug, Clone)]
pub struct BathCorrelations {
    pub operators: Vec<Operator>,
    pub gamma: Array2<C64>,
}

impl BathCorrelations {
    /// Mirror reservoir in the components {B, B†, 2β0 N̂_c}.
    pub fn mechanical(params: &SystemParams, spec: &ReservoirSpec, space: &SpaceSpec) -> Self {
        let half = 0.5 * params.gamma_m;
        let c = squeezed_coefficients(spec);
        let (ch, sh) = (spec.r.cosh(), spec.r.sinh());
        let low_freq = ch * ch + sh * sh + 2.0 * ch * sh * C64::from_polar(1.0, -spec.theta);

        let big_b = dressed_mech_jump(params.beta0(), space);
        let shift = space.n_cavity().mapv(|z| 2.0 * params.beta0() * z);
        let mut gamma = Array2::zeros((3, 3));
        gamma[[0, 0]] = C64::new(half * (c.n_eff + 1.0), 0.0);
        gamma[[1, 1]] = C64::new(half * c.n_eff, 0.0);
        gamma[[0, 1]] = -half * c.m_eff.conj();
        gamma[[1, 0]] = -half * c.m_eff;
        gamma[[2, 2]] = half * spec.kt() * low_freq;
        Self {
            operators: vec![big_b.clone(), dagger(&big_b), shift],
            gamma,
        }
    }

    /// Cavity squeezed vacuum in the components {a, a†}.
    pub fn cavity(params: &SystemParams, spec: &ReservoirSpec, space: &SpaceSpec) -> Self {
        let half = 0.5 * params.kappa;
        let c = squeezed_coefficients(spec);
        let a = space.a();
        let mut gamma = Array2::zeros((2, 2));
        gamma[[0, 0]] = C64::new(half * (c.n_cav + 1.0), 0.0);
        gamma[[1, 1]] = C64::new(half * c.n_cav, 0.0);
        gamma[[0, 1]] = -half * c.m_cav.conj();
        gamma[[1, 0]] = -half * c.m_cav;
        Self {
            operators: vec![a.clone(), dagger(&a)],
            gamma,
        }
    }

    /// Damping part K_ij = Γ_ij + Γ_ji*; the Lamb-shift part is discarded.
    pub fn kossakowski(&self) -> KossakowskiBlock {
        let matrix = &self.gamma + &self.gamma.t().mapv(|z| z.conj());
        KossakowskiBlock {
            operators: self.operators.clone(),
            matrix,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KossakowskiBlock {
    pub operators: Vec<Operator>,
    pub matrix: Array2<C64>,
}

impl KossakowskiBlock {
    /// A positive semidefinite K makes the generator completely positive.
    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(self.matrix.view())
    }

    fn push_into(&self, sum: &mut SandwichSum) {
        let n = self.operators.len();
        for i in 0..n {
            for j in 0..n {
                let k = self.matrix[[i, j]];
                if k == C64::new(0.0, 0.0) {
                    continue;
                }
                let li = &self.operators[i];
                let lj_dag = dagger(&self.operators[j]);
                let prod = lj_dag.dot(li);
                sum.push(k, Some(li), Some(&lj_dag));
                sum.push(-0.5 * k, Some(&prod), None);
                sum.push(-0.5 * k, None, Some(&prod));
            }
        }
    }
}

/// Squeezed high-temperature dressed-state generator rebuilt from bath integrals.
pub fn assemble_from_bath_integrals(
    params: &SystemParams,
    spec: &ReservoirSpec,
    space: &SpaceSpec,
) -> Result<SuperOperator> {
    params.validate()?;
    spec.validate()?;
    space.validate()?;
    let mut sum = SandwichSum::new(space.dim());
    BathCorrelations::mechanical(params, spec, space)
        .kossakowski()
        .push_into(&mut sum);
    BathCorrelations::cavity(params, spec, space)
        .kossakowski()
        .push_into(&mut sum);
    Ok(sum.assemble())
}
