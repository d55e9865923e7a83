//! Dense operator algebra on truncated Fock spaces.
//!
//! The full Hilbert space is always ordered cavity ⊗ mechanical, so the
//! product state |n⟩_c ⊗ |l⟩_m sits at index `n * dim_mech + l`.

use log::warn;
use nalgebra::DMatrix;
use ndarray::{s, Array1, Array2, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;

pub type C64 = Complex64;

/// Dense square complex matrix acting on a truncated space.
pub type Operator = Array2<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

const STATE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = -1e-10;

/// Truncation of the two modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub dim_cavity: usize,
    pub dim_mech: usize,
}

impl SpaceSpec {
    pub fn new(dim_cavity: usize, dim_mech: usize) -> Result<Self> {
        let space = Self {
            dim_cavity,
            dim_mech,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        for dim in [self.dim_cavity, self.dim_mech] {
            if dim < 2 {
                return Err(Error::InvalidDimension { dim });
            }
        }
        Ok(())
    }

    /// Total dimension D = dim_cavity × dim_mech.
    pub fn dim(&self) -> usize {
        self.dim_cavity * self.dim_mech
    }

    /// Position of |n⟩_c ⊗ |l⟩_m in the product basis.
    pub fn index(&self, n: usize, l: usize) -> usize {
        n * self.dim_mech + l
    }

    /// Cavity operator `op` embedded as `op ⊗ I_m`.
    pub fn cavity(&self, op: &Operator) -> Operator {
        tensor(op, &identity(self.dim_mech))
    }

    /// Mechanical operator `op` embedded as `I_c ⊗ op`.
    pub fn mech(&self, op: &Operator) -> Operator {
        tensor(&identity(self.dim_cavity), op)
    }

    /// Cavity annihilation operator â on the full space.
    pub fn a(&self) -> Operator {
        self.cavity(&destroy_unchecked(self.dim_cavity))
    }

    /// Mechanical annihilation operator b̂ on the full space.
    pub fn b(&self) -> Operator {
        self.mech(&destroy_unchecked(self.dim_mech))
    }

    /// Photon number N̂_c on the full space.
    pub fn n_cavity(&self) -> Operator {
        self.cavity(&number(self.dim_cavity))
    }

    /// Phonon number b̂†b̂ on the full space.
    pub fn n_mech(&self) -> Operator {
        self.mech(&number(self.dim_mech))
    }
}

/// Normalised state vector on a product space.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket(Array1<C64>);

impl Ket {
    pub fn new(amplitudes: Array1<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "ket norm {norm:.15} differs from 1"
            )));
        }
        Ok(Self(amplitudes))
    }

    /// Computational basis vector |index⟩.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange {
                what: "basis index",
                index,
                limit: dim,
            });
        }
        let mut v = Array1::zeros(dim);
        v[index] = ONE;
        Ok(Self(v))
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// ⟨self| op |self⟩.
    pub fn expectation(&self, op: &Operator) -> C64 {
        let v = op.dot(&self.0);
        self.0.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn projector(&self) -> Operator {
        let n = self.0.len();
        Array2::from_shape_fn((n, n), |(i, j)| self.0[i] * self.0[j].conj())
    }
}

/// Validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    pub fn new(matrix: Operator) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidState("density matrix must be square".into()));
        }
        let herm = hermiticity_error(matrix.view());
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix not Hermitian (max deviation {herm:.3e})"
            )));
        }
        let tr = trace(matrix.view());
        if (tr - ONE).norm() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = min_eigenvalue(matrix.view());
        if min_eig < PSD_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix not positive semidefinite (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(Self(matrix))
    }

    pub fn from_ket(ket: &Ket) -> Self {
        Self(ket.projector())
    }

    pub fn matrix(&self) -> &Operator {
        &self.0
    }

    pub fn into_matrix(self) -> Operator {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Annihilation operator on `dim` levels: entry (n, n+1) = √(n+1).
pub fn destroy(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    Ok(destroy_unchecked(dim))
}

fn destroy_unchecked(dim: usize) -> Operator {
    let mut a = Array2::zeros((dim, dim));
    for n in 0..dim - 1 {
        a[[n, n + 1]] = C64::new(((n + 1) as f64).sqrt(), 0.0);
    }
    a
}

pub fn identity(dim: usize) -> Operator {
    Array2::eye(dim)
}

/// diag(0, 1, …, dim−1).
pub fn number(dim: usize) -> Operator {
    Array2::from_diag(&Array1::from_shape_fn(dim, |n| C64::new(n as f64, 0.0)))
}

pub fn dagger(op: &Operator) -> Operator {
    op.t().mapv(|z| z.conj())
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a.dot(b) - b.dot(a)
}

/// Kronecker product A ⊗ B (A is the slow index).
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), &x) in a.indexed_iter() {
        if x == ZERO {
            continue;
        }
        out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
            .assign(&b.mapv(|y| x * y));
    }
    out
}

pub fn trace(m: ArrayView2<C64>) -> C64 {
    m.diag().sum()
}

/// max |m − m†| entrywise.
pub fn hermiticity_error(m: ArrayView2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &Operator, b: &Operator) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn to_nalgebra(m: ArrayView2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

fn from_nalgebra(m: &DMatrix<C64>) -> Operator {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Matrix exponential by scaling-and-squaring with Padé approximants.
pub fn expm(m: &Operator) -> Operator {
    from_nalgebra(&to_nalgebra(m.view()).exp())
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: ArrayView2<C64>) -> f64 {
    let n = m.nrows();
    let herm = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[[i, j]] + m[[j, i]].conj()));
    herm.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Hermitian eigenvalues, ascending, together with eigenvectors (columns).
pub fn eigh(m: &Operator) -> (Vec<f64>, Operator) {
    let eig = to_nalgebra(m.view()).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let n = m.nrows();
    let vectors = Array2::from_shape_fn((n, n), |(i, k)| eig.eigenvectors[(i, order[k])]);
    (values, vectors)
}

/// Displacement operator exp(α b† − α* b) on `dim` levels.
pub fn displacement(dim: usize, alpha: C64) -> Result<Operator> {
    let b = destroy(dim)?;
    if alpha.norm_sqr() > dim as f64 / 4.0 {
        warn!(
            "displacement |α|² = {:.3} exceeds dim/4 = {:.3}; truncation error likely",
            alpha.norm_sqr(),
            dim as f64 / 4.0
        );
    }
    let generator = dagger(&b).mapv(|z| alpha * z) - b.mapv(|z| alpha.conj() * z);
    Ok(expm(&generator))
}

/// exp(β0 N̂_c ⊗ (b† − b)), the map from bare product states to dressed states.
///
/// N̂_c is diagonal, so the exponential is block diagonal with one
/// displacement D(n β0) per photon number n.
pub fn polaron_unitary(params: &SystemParams, space: &SpaceSpec) -> Result<Operator> {
    space.validate()?;
    let dm = space.dim_mech;
    let beta0 = params.beta0();
    let mut u = Array2::zeros((space.dim(), space.dim()));
    for n in 0..space.dim_cavity {
        let block = displacement(dm, C64::new(n as f64 * beta0, 0.0))?;
        u.slice_mut(s![n * dm..(n + 1) * dm, n * dm..(n + 1) * dm])
            .assign(&block);
    }
    Ok(u)
}

/// Tr_m ρ, returned as a dim_cavity × dim_cavity matrix.
pub fn partial_trace_mech(rho: ArrayView2<C64>, space: &SpaceSpec) -> Result<Operator> {
    let d = space.dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho.nrows(),
        });
    }
    let dc = space.dim_cavity;
    let dm = space.dim_mech;
    Ok(Array2::from_shape_fn((dc, dc), |(p, q)| {
        (0..dm).map(|l| rho[[p * dm + l, q * dm + l]]).sum()
    }))
}
