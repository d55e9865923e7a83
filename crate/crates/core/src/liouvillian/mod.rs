//! Master-equation generators as sparse superoperators.
//!
//! Density matrices are vectorised by stacking columns: entry ρ_ij sits at
//! `i + j·D`. Under that convention the map ρ ↦ AρB is the matrix Bᵀ ⊗ A,
//! which is what [`SandwichSum`] assembles row by row.

mod bath;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{dagger, Operator, SpaceSpec, C64, I, ONE, ZERO};
use crate::model::{hamiltonian_polaron, SystemParams};
use crate::reservoir::{
    dephasing_rate_squeezed, dephasing_rate_thermal, sme_extra_rates, squeezed_coefficients,
    ReservoirSpec,
};
use crate::sparse::CsrMatrix;

pub use bath::{assemble_from_bath_integrals, BathCorrelations, KossakowskiBlock};

/// One tag per printed master equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariantId {
    /// Dressed-state ME with a thermal bath.
    #[serde(rename = "DSME_THERMAL")]
    DsmeThermal,
    /// Standard ME in the dressed basis: thermal bath plus γ_m(2n_th+1)β0² D[N̂_c].
    #[serde(rename = "SME_DRESSED_THERMAL")]
    SmeDressedThermal,
    /// Standard ME with bare operators and a squeezed thermal bath.
    #[serde(rename = "SME_SQUEEZED_BARE")]
    SmeSqueezedBare,
    /// Dressed-state ME with a squeezed thermal bath.
    #[serde(rename = "DSME_SQUEEZED")]
    DsmeSqueezed,
    /// Thermal DSME with the high-temperature cavity dephasing term.
    #[serde(rename = "DSME_THERMAL_HIGHT")]
    DsmeThermalHighT,
    /// Squeezed DSME with the phase-dependent high-temperature dephasing term.
    #[serde(rename = "DSME_SQUEEZED_HIGHT")]
    DsmeSqueezedHighT,
    /// Dressed-basis standard ME with a squeezed bath and both extra dephasing terms.
    #[serde(rename = "SME_DRESSED_SQUEEZED")]
    SmeDressedSqueezed,
}

impl VariantId {
    pub const ALL: [VariantId; 7] = [
        VariantId::DsmeThermal,
        VariantId::SmeDressedThermal,
        VariantId::SmeSqueezedBare,
        VariantId::DsmeSqueezed,
        VariantId::DsmeThermalHighT,
        VariantId::DsmeSqueezedHighT,
        VariantId::SmeDressedSqueezed,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            VariantId::DsmeThermal => "DSME_THERMAL",
            VariantId::SmeDressedThermal => "SME_DRESSED_THERMAL",
            VariantId::SmeSqueezedBare => "SME_SQUEEZED_BARE",
            VariantId::DsmeSqueezed => "DSME_SQUEEZED",
            VariantId::DsmeThermalHighT => "DSME_THERMAL_HIGHT",
            VariantId::DsmeSqueezedHighT => "DSME_SQUEEZED_HIGHT",
            VariantId::SmeDressedSqueezed => "SME_DRESSED_SQUEEZED",
        }
    }

    pub fn is_squeezed(self) -> bool {
        matches!(
            self,
            VariantId::SmeSqueezedBare
                | VariantId::DsmeSqueezed
                | VariantId::DsmeSqueezedHighT
                | VariantId::SmeDressedSqueezed
        )
    }

    /// Whether the mechanical jump operators are b̂ − β0 N̂_c rather than b̂.
    pub fn is_dressed(self) -> bool {
        self != VariantId::SmeSqueezedBare
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for VariantId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariantId::ALL
            .into_iter()
            .find(|v| v.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

/// How the squeezed pair-correlation terms are written.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DissipationMode {
    /// Sandwich terms only, −γM* oρo − γM o†ρo†, exactly as printed.
    #[serde(rename = "PAPER_LITERAL", alias = "literal")]
    PaperLiteral,
    /// Sandwich terms completed with their anticommutators; trace preserving.
    #[default]
    #[serde(rename = "TRACE_PRESERVING", alias = "preserving")]
    TracePreserving,
}

impl DissipationMode {
    pub fn tag(self) -> &'static str {
        match self {
            DissipationMode::PaperLiteral => "PAPER_LITERAL",
            DissipationMode::TracePreserving => "TRACE_PRESERVING",
        }
    }
}

impl fmt::Display for DissipationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DissipationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "literal" | "paper_literal" => Ok(DissipationMode::PaperLiteral),
            "preserving" | "trace_preserving" => Ok(DissipationMode::TracePreserving),
            _ => Err(Error::InvalidParameter(format!(
                "unknown dissipation mode `{s}` (expected literal or preserving)"
            ))),
        }
    }
}

/// Column-stacked vector of a square matrix.
pub fn vectorize(m: ArrayView2<C64>) -> Array1<C64> {
    m.t().iter().copied().collect()
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &[C64], dim: usize) -> Operator {
    assert_eq!(v.len(), dim * dim);
    Array2::from_shape_fn((dim, dim), |(i, j)| v[i + j * dim])
}

/// A linear map on D × D matrices stored as a D² × D² sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: CsrMatrix,
}

impl SuperOperator {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            matrix: CsrMatrix::zeros(dim * dim, dim * dim),
        }
    }

    pub fn from_matrix(dim: usize, matrix: CsrMatrix) -> Self {
        assert_eq!(matrix.nrows(), dim * dim);
        assert_eq!(matrix.ncols(), dim * dim);
        Self { dim, matrix }
    }

    /// Hilbert-space dimension D.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    pub fn apply(&self, rho: ArrayView2<C64>) -> Result<Operator> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.nrows(),
            });
        }
        let v = vectorize(rho);
        let out = self.matrix.matvec(v.as_slice().expect("contiguous"));
        Ok(unvectorize(&out, self.dim))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(other, ONE)
    }

    pub fn add_scaled(&self, other: &Self, scale: C64) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            matrix: self.matrix.add_scaled(&other.matrix, scale),
        }
    }

    pub fn scaled(&self, scale: C64) -> Self {
        Self {
            dim: self.dim,
            matrix: self.matrix.scaled(scale),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.matrix.max_abs_diff(&other.matrix)
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.nnz() == 0
    }

    /// max_c |(vec(I)† L)_c|, zero for a trace-preserving generator.
    pub fn trace_drift(&self) -> f64 {
        let d = self.dim;
        let mut sums = vec![ZERO; d * d];
        for i in 0..d {
            for (c, v) in self.matrix.row(i + i * d) {
                sums[c] += v;
            }
        }
        sums.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Array2<C64> {
        self.matrix.to_dense()
    }
}

impl AsRef<SuperOperator> for SuperOperator {
    fn as_ref(&self) -> &SuperOperator {
        self
    }
}

/// Nonzero pattern of one factor of a sandwich product.
#[derive(Clone)]
enum Factor {
    Identity,
    /// For a left factor: rows of A. For a right factor: columns of B.
    Lines(Vec<Vec<(usize, C64)>>),
}

impl Factor {
    fn rows_of(op: &Operator) -> Self {
        Factor::Lines(
            op.rows()
                .into_iter()
                .map(|row| nonzeros(row.iter().copied()))
                .collect(),
        )
    }

    fn cols_of(op: &Operator) -> Self {
        Factor::Lines(
            op.columns()
                .into_iter()
                .map(|col| nonzeros(col.iter().copied()))
                .collect(),
        )
    }
}

fn nonzeros(line: impl Iterator<Item = C64>) -> Vec<(usize, C64)> {
    line.enumerate().filter(|(_, v)| *v != ZERO).collect()
}

/// Accumulates terms c·AρB and assembles their sum into one sparse matrix.
#[derive(Clone)]
pub struct SandwichSum {
    dim: usize,
    terms: Vec<(C64, Factor, Factor)>,
}

impl SandwichSum {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
        }
    }

    /// Adds `coef · left · ρ · right`; `None` stands for the identity.
    pub fn push(&mut self, coef: C64, left: Option<&Operator>, right: Option<&Operator>) {
        if coef == ZERO {
            return;
        }
        for op in left.iter().chain(right.iter()) {
            assert_eq!(op.dim(), (self.dim, self.dim), "operator dimension mismatch");
        }
        let l = left.map_or(Factor::Identity, Factor::rows_of);
        let r = right.map_or(Factor::Identity, Factor::cols_of);
        self.terms.push((coef, l, r));
    }

    pub fn assemble(&self) -> SuperOperator {
        let d = self.dim;
        let matrix = CsrMatrix::from_row_fn(d * d, d * d, |row, buf| {
            let (i, j) = (row % d, row / d);
            for (coef, left, right) in &self.terms {
                match (left, right) {
                    (Factor::Identity, Factor::Identity) => buf.push((row, *coef)),
                    (Factor::Lines(a), Factor::Identity) => {
                        buf.extend(a[i].iter().map(|&(k, v)| (k + j * d, coef * v)));
                    }
                    (Factor::Identity, Factor::Lines(b)) => {
                        buf.extend(b[j].iter().map(|&(l, v)| (i + l * d, coef * v)));
                    }
                    (Factor::Lines(a), Factor::Lines(b)) => {
                        for &(k, av) in &a[i] {
                            let ca = coef * av;
                            buf.extend(b[j].iter().map(|&(l, bv)| (k + l * d, ca * bv)));
                        }
                    }
                }
            }
        });
        SuperOperator { dim: d, matrix }
    }

    /// rate · D[o].
    pub fn push_dissipator(&mut self, rate: f64, o: &Operator) {
        if rate == 0.0 {
            return;
        }
        let od = dagger(o);
        let odo = od.dot(o);
        self.push(C64::new(rate, 0.0), Some(o), Some(&od));
        self.push(C64::new(-0.5 * rate, 0.0), Some(&odo), None);
        self.push(C64::new(-0.5 * rate, 0.0), None, Some(&odo));
    }

    /// −M* oρo − M o†ρo†, plus ½M*{oo, ρ} + ½M{o†o†, ρ} when trace preserving.
    pub fn push_squeeze_cross(&mut self, m: C64, o: &Operator, mode: DissipationMode) {
        if m == ZERO {
            return;
        }
        let od = dagger(o);
        self.push(-m.conj(), Some(o), Some(o));
        self.push(-m, Some(&od), Some(&od));
        if mode == DissipationMode::TracePreserving {
            let oo = o.dot(o);
            let odod = od.dot(&od);
            self.push(0.5 * m.conj(), Some(&oo), None);
            self.push(0.5 * m.conj(), None, Some(&oo));
            self.push(0.5 * m, Some(&odod), None);
            self.push(0.5 * m, None, Some(&odod));
        }
    }

    /// −i[H, ρ].
    pub fn push_coherent(&mut self, h: &Operator) {
        self.push(-I, Some(h), None);
        self.push(I, None, Some(h));
    }
}

fn check_square(o: &Operator) -> Result<usize> {
    if !o.is_square() {
        return Err(Error::DimensionMismatch {
            expected: o.nrows(),
            found: o.ncols(),
        });
    }
    Ok(o.nrows())
}

/// D[o]ρ = oρo† − ½{o†o, ρ}.
pub fn dissipator(o: &Operator) -> Result<SuperOperator> {
    let mut sum = SandwichSum::new(check_square(o)?);
    sum.push_dissipator(1.0, o);
    Ok(sum.assemble())
}

/// Squeezed-bath pair-correlation term for jump operator `o` and correlation `m`.
pub fn squeeze_cross_term(o: &Operator, m: C64, mode: DissipationMode) -> Result<SuperOperator> {
    let mut sum = SandwichSum::new(check_square(o)?);
    sum.push_squeeze_cross(m, o, mode);
    Ok(sum.assemble())
}

/// ρ ↦ left · ρ · right.
pub fn sandwich(left: &Operator, right: &Operator) -> Result<SuperOperator> {
    let dim = check_square(left)?;
    if right.dim() != left.dim() {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: right.nrows(),
        });
    }
    let mut sum = SandwichSum::new(dim);
    sum.push(ONE, Some(left), Some(right));
    Ok(sum.assemble())
}

/// −i[H, ·].
pub fn coherent_term(h: &Operator) -> Result<SuperOperator> {
    let mut sum = SandwichSum::new(check_square(h)?);
    sum.push_coherent(h);
    Ok(sum.assemble())
}

/// Every coefficient entering a variant, recorded for run manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateTable {
    /// Coefficient of D[o_m] (o_m = b̂ − β0N̂_c, or b̂ for the bare variant).
    pub mech_down: f64,
    /// Coefficient of D[o_m†].
    pub mech_up: f64,
    /// γ_m M_eff in the mechanical pair-correlation term.
    pub mech_pair: C64,
    pub cav_down: f64,
    pub cav_up: f64,
    /// κ M in the cavity pair-correlation term.
    pub cav_pair: C64,
    /// Coefficient of D[N̂_c].
    pub dephasing: f64,
    /// Coefficient of N̂_c ρ N̂_c.
    pub sandwich: f64,
    pub beta0: f64,
}

impl RateTable {
    pub fn for_variant(variant: VariantId, params: &SystemParams, spec: &ReservoirSpec) -> Self {
        let beta0 = params.beta0();
        let g = params.gamma_m;
        let k = params.kappa;
        let n = spec.n_th;
        let mut t = RateTable {
            mech_down: g * (n + 1.0),
            mech_up: g * n,
            mech_pair: ZERO,
            cav_down: k,
            cav_up: 0.0,
            cav_pair: ZERO,
            dephasing: 0.0,
            sandwich: 0.0,
            beta0,
        };
        if variant.is_squeezed() {
            let c = squeezed_coefficients(spec);
            t.mech_down = g * (c.n_eff + 1.0);
            t.mech_up = g * c.n_eff;
            t.mech_pair = g * c.m_eff;
            t.cav_down = k * (c.n_cav + 1.0);
            t.cav_up = k * c.n_cav;
            t.cav_pair = k * c.m_cav;
        }
        match variant {
            VariantId::DsmeThermal | VariantId::SmeSqueezedBare | VariantId::DsmeSqueezed => {}
            VariantId::SmeDressedThermal => t.dephasing = g * (2.0 * n + 1.0) * beta0 * beta0,
            VariantId::DsmeThermalHighT => t.dephasing = dephasing_rate_thermal(params, spec),
            VariantId::DsmeSqueezedHighT => t.dephasing = dephasing_rate_squeezed(params, spec),
            VariantId::SmeDressedSqueezed => {
                let extra = sme_extra_rates(params, spec);
                t.dephasing = extra.dephasing_rate;
                t.sandwich = extra.sandwich_rate;
            }
        }
        t
    }
}

/// A master-equation generator together with what it represents.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    generator: SuperOperator,
    variant: VariantId,
    mode: DissipationMode,
    space: SpaceSpec,
    includes_hamiltonian: bool,
    rates: RateTable,
}

impl Liouvillian {
    pub fn generator(&self) -> &SuperOperator {
        &self.generator
    }

    pub fn variant(&self) -> VariantId {
        self.variant
    }

    pub fn mode(&self) -> DissipationMode {
        self.mode
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn rates(&self) -> &RateTable {
        &self.rates
    }

    pub fn includes_hamiltonian(&self) -> bool {
        self.includes_hamiltonian
    }

    /// Adds the coherent polaron-frame term −i[H′, ρ].
    pub fn with_hamiltonian(mut self, params: &SystemParams) -> Result<Self> {
        if self.includes_hamiltonian {
            return Ok(self);
        }
        let h = hamiltonian_polaron(params, &self.space)?;
        self.generator = self.generator.add(&coherent_term(&h)?);
        self.includes_hamiltonian = true;
        Ok(self)
    }
}

impl AsRef<SuperOperator> for Liouvillian {
    fn as_ref(&self) -> &SuperOperator {
        &self.generator
    }
}

/// b̂ − β0 N̂_c on the full space.
pub fn dressed_mech_jump(beta0: f64, space: &SpaceSpec) -> Operator {
    space.b() - space.n_cavity().mapv(|z| beta0 * z)
}

/// Interaction-picture generator for one variant.
pub fn build_liouvillian(
    variant: VariantId,
    mode: DissipationMode,
    params: &SystemParams,
    spec: &ReservoirSpec,
    space: &SpaceSpec,
) -> Result<Liouvillian> {
    params.validate()?;
    spec.validate()?;
    space.validate()?;
    if params.drive != 0.0 {
        return Err(Error::UnsupportedRegime(
            "master equations are built in the driveless polaron frame".into(),
        ));
    }
    let rates = RateTable::for_variant(variant, params, spec);
    let mech_jump = if variant.is_dressed() {
        dressed_mech_jump(rates.beta0, space)
    } else {
        space.b()
    };
    let a = space.a();
    let nc = space.n_cavity();

    let mut sum = SandwichSum::new(space.dim());
    sum.push_dissipator(rates.mech_down, &mech_jump);
    sum.push_dissipator(rates.mech_up, &dagger(&mech_jump));
    sum.push_dissipator(rates.cav_down, &a);
    sum.push_dissipator(rates.cav_up, &dagger(&a));
    sum.push_squeeze_cross(rates.mech_pair, &mech_jump, mode);
    sum.push_squeeze_cross(rates.cav_pair, &a, mode);
    sum.push_dissipator(rates.dephasing, &nc);
    if rates.sandwich != 0.0 {
        match mode {
            DissipationMode::PaperLiteral => {
                sum.push(C64::new(rates.sandwich, 0.0), Some(&nc), Some(&nc))
            }
            // completed like the cross terms it descends from
            DissipationMode::TracePreserving => sum.push_dissipator(rates.sandwich, &nc),
        }
    }

    Ok(Liouvillian {
        generator: sum.assemble(),
        variant,
        mode,
        space: *space,
        includes_hamiltonian: false,
        rates,
    })
}

/// D[b̂] split as D[B] + β0² D[N̂_c] + residual, with B = b̂ − β0 N̂_c.
#[derive(Debug, Clone)]
pub struct DressedExpansion {
    pub main: SuperOperator,
    pub dephasing: SuperOperator,
    /// Cross terms β0(BρN̂_c + N̂_cρB†) − ½β0{B†N̂_c + N̂_cB, ρ}, dropped under the RWA.
    pub residual: SuperOperator,
}

pub fn expand_dressed_dissipator(params: &SystemParams, space: &SpaceSpec) -> Result<DressedExpansion> {
    if params.drive != 0.0 {
        return Err(Error::UnsupportedRegime(
            "the dressed expansion assumes a vanishing drive".into(),
        ));
    }
    space.validate()?;
    let beta0 = params.beta0();
    let big_b = dressed_mech_jump(beta0, space);
    let nc = space.n_cavity();
    let d = space.dim();

    let main = dissipator(&big_b)?;
    let mut deph = SandwichSum::new(d);
    deph.push_dissipator(beta0 * beta0, &nc);

    let bd = dagger(&big_b);
    let cross = bd.dot(&nc) + nc.dot(&big_b);
    let mut res = SandwichSum::new(d);
    let beta = C64::new(beta0, 0.0);
    res.push(beta, Some(&big_b), Some(&nc));
    res.push(beta, Some(&nc), Some(&bd));
    res.push(-0.5 * beta, Some(&cross), None);
    res.push(-0.5 * beta, None, Some(&cross));

    Ok(DressedExpansion {
        main,
        dephasing: deph.assemble(),
        residual: res.assemble(),
    })
}
