//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Hamiltonians are stored in angular-frequency units (rad/ms for the
//! switching protocols, rad/µs for the pulse model). Spectra are reported in
//! the matching cyclic unit (kHz or MHz), i.e. eigenvalues divided by 2π, so
//! that inverse temperatures carried as `hβ` multiply them directly.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

pub type C64 = Complex64;

const HERMITIAN_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-9;
const MAX_EXP_DIM: usize = 16;

/// Default number of midpoint slices used by [`propagate`].
pub const DEFAULT_SLICES: usize = 4000;

/// Square complex matrix acting on a fixed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
}

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::Dimension("operator dimension must be positive".into()));
        }
        Ok(Self { m })
    }

    /// Builds an operator from row-major entries.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} entries for dim {dim}, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_real_rows(dim: usize, entries: &[f64]) -> Result<Self> {
        let c: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_rows(dim, &c)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            m: self.m.transpose(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { m: &self.m * s }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add(&self, other: &Operator) -> Self {
        Self {
            m: &self.m + &other.m,
        }
    }

    pub fn mul(&self, other: &Operator) -> Self {
        Self {
            m: &self.m * &other.m,
        }
    }

    /// Kronecker product `self ⊗ other`; `self` indexes the slow (outer) factor.
    pub fn kron(&self, other: &Operator) -> Self {
        Self {
            m: self.m.kronecker(&other.m),
        }
    }

    /// Largest element-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        (&self.m - &other.m)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn unitarity_error(&self) -> f64 {
        let prod = self.adjoint().mul(self);
        prod.max_abs_diff(&Operator::identity(self.dim()))
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_error() <= HERMITIAN_TOL * self.max_abs().max(1.0)
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_error() < UNITARY_TOL
    }

    pub fn ensure_hermitian(&self) -> Result<()> {
        if self.is_hermitian() {
            Ok(())
        } else {
            Err(validation(format!(
                "operator is not Hermitian (max |A - A†| = {:e})",
                self.hermiticity_error()
            )))
        }
    }

    /// `⟨bra|self|ket⟩` for column vectors.
    pub fn sandwich(&self, bra: &[C64], ket: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (r, b) in bra.iter().enumerate() {
            let row: C64 = ket
                .iter()
                .enumerate()
                .map(|(c, k)| self.m[(r, c)] * k)
                .sum();
            acc += b.conj() * row;
        }
        acc
    }
}

/// Pseudo-spin-1/2 operators on a two-level subspace `{|0⟩, |1⟩}`.
pub mod spin {
    use super::{Operator, C64};

    /// `S_z′ = (|1⟩⟨1| − |0⟩⟨0|)/2`.
    pub fn sz() -> Operator {
        Operator::from_real_rows(2, &[-0.5, 0.0, 0.0, 0.5]).expect("2x2")
    }

    /// `S_x′ = (|0⟩⟨1| + |1⟩⟨0|)/2`.
    pub fn sx() -> Operator {
        Operator::from_real_rows(2, &[0.0, 0.5, 0.5, 0.0]).expect("2x2")
    }

    /// `S_y′ = (−i|0⟩⟨1| + i|1⟩⟨0|)/2`.
    pub fn sy() -> Operator {
        let z = C64::new(0.0, 0.0);
        Operator::from_rows(2, &[z, C64::new(0.0, -0.5), C64::new(0.0, 0.5), z]).expect("2x2")
    }
}

/// Eigen-decomposition of a Hermitian operator.
///
/// `energies` are ascending and expressed in cyclic units (eigenvalue / 2π).
/// Each eigenvector has its largest-modulus component real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub energies: Vec<f64>,
    pub eigenvectors: Vec<Vec<C64>>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Gap between the two lowest levels.
    pub fn gap(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }

    /// Rebuilds `Σ f(E_k)|v_k⟩⟨v_k|` using cyclic energies.
    pub fn recompose(&self, f: impl Fn(f64) -> C64) -> Operator {
        let weights: Vec<C64> = self.energies.iter().map(|&e| f(e)).collect();
        self.recompose_weights(&weights)
    }

    /// `Σ w_k |v_k⟩⟨v_k|`.
    pub fn recompose_weights(&self, weights: &[C64]) -> Operator {
        let n = self.dim();
        let mut m = DMatrix::<C64>::zeros(n, n);
        for (&w, v) in weights.iter().zip(&self.eigenvectors) {
            for r in 0..n {
                for c in 0..n {
                    m[(r, c)] += w * v[r] * v[c].conj();
                }
            }
        }
        Operator { m }
    }

    /// `|⟨a_j|U|b_i⟩|²` indexed `[i][j]`: transition `b_i → a_j` under `u`.
    pub fn transition_probabilities(
        start: &SpectralDecomposition,
        u: &Operator,
        end: &SpectralDecomposition,
    ) -> Vec<Vec<f64>> {
        start
            .eigenvectors
            .iter()
            .map(|vi| {
                end.eigenvectors
                    .iter()
                    .map(|vj| u.sandwich(vj, vi).norm_sqr())
                    .collect()
            })
            .collect()
    }
}

/// Density matrix: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        op.ensure_hermitian()?;
        let tr = op.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(validation(format!("density matrix trace {tr} != 1")));
        }
        let spec = eig_hermitian(&op.scale_real(2.0 * PI))?;
        if let Some(&lo) = spec.energies.first() {
            if lo < -1e-12 {
                return Err(validation(format!(
                    "density matrix has negative eigenvalue {lo:e}"
                )));
            }
        }
        Ok(Self { op })
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    /// `⟨v|ρ|v⟩`.
    pub fn population(&self, v: &[C64]) -> f64 {
        self.op.sandwich(v, v).re
    }
}

/// `exp(scale · a)` by Padé scaling-and-squaring.
pub fn matrix_exp(a: &Operator, scale: C64) -> Result<Operator> {
    if a.dim() > MAX_EXP_DIM {
        return Err(Error::Dimension(format!(
            "matrix_exp supports dim <= {MAX_EXP_DIM}, got {}",
            a.dim()
        )));
    }
    let scaled = &a.m * scale;
    Ok(Operator { m: scaled.exp() })
}

/// Unitary `exp(-i·h·dt)` for Hermitian `h`.
pub fn unitary_step(h: &Operator, dt: f64) -> Result<Operator> {
    matrix_exp(h, C64::new(0.0, -dt))
}

/// Raw (angular-unit) eigenvalues, ascending, with the phase convention applied.
pub(crate) fn eigh_raw(a: &Operator) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    a.ensure_hermitian()?;
    let n = a.dim();
    // Symmetrize so that rounding noise in the lower triangle cannot leak in.
    let sym = (&a.m + a.m.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for k in order {
        values.push(eig.eigenvalues[k]);
        let mut v: Vec<C64> = eig.eigenvectors.column(k).iter().copied().collect();
        fix_phase(&mut v);
        vectors.push(v);
    }
    Ok((values, vectors))
}

/// Rotates `v` so its largest-modulus component (first on ties) is real positive.
fn fix_phase(v: &mut [C64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let Some(pivot) = v.iter().position(|z| z.norm() >= max - 1e-12) else {
        return;
    };
    let p = v[pivot];
    if p.norm() == 0.0 {
        return;
    }
    let phase = p.conj() / p.norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[pivot] = C64::new(v[pivot].norm(), 0.0);
}

pub fn eig_hermitian(a: &Operator) -> Result<SpectralDecomposition> {
    let (values, eigenvectors) = eigh_raw(a)?;
    Ok(SpectralDecomposition {
        energies: values.into_iter().map(|w| w / (2.0 * PI)).collect(),
        eigenvectors,
    })
}

/// Time-ordered propagator by the midpoint rule.
///
/// `h_of_t` receives the slice midpoint time and must return a Hermitian
/// operator in angular-frequency units reciprocal to the time unit.
pub fn propagate<F>(h_of_t: F, duration: f64, slices: usize) -> Result<Operator>
where
    F: Fn(f64) -> Result<Operator>,
{
    if slices == 0 {
        return Err(validation("slices must be >= 1"));
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(validation(format!("invalid duration {duration}")));
    }
    let dt = duration / slices as f64;
    let mut u: Option<Operator> = None;
    for k in 0..slices {
        let h = h_of_t((k as f64 + 0.5) * dt)?;
        h.ensure_hermitian()?;
        let step = unitary_step(&h, dt)?;
        u = Some(match u {
            None => step,
            Some(acc) => step.mul(&acc),
        });
    }
    Ok(u.expect("slices >= 1"))
}

/// Inverse temperature `hβ` in units reciprocal to the cyclic energy unit.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InverseTemperature(f64);

impl InverseTemperature {
    pub fn new(h_beta: f64) -> Result<Self> {
        if !h_beta.is_finite() || h_beta < 0.0 {
            return Err(validation(format!(
                "inverse temperature must be finite and non-negative, got {h_beta}"
            )));
        }
        Ok(Self(h_beta))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Normalized Gibbs weights for cyclic energies.
pub fn gibbs_populations(energies: &[f64], h_beta: InverseTemperature) -> Vec<f64> {
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies
        .iter()
        .map(|e| (-h_beta.value() * (e - e0)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// `exp(−hβ·H/h) / Z` for a Hamiltonian given in angular units.
pub fn thermal_state(h: &Operator, h_beta: f64) -> Result<DensityMatrix> {
    let beta = InverseTemperature::new(h_beta)?;
    let spec = eig_hermitian(h)?;
    let pops = gibbs_populations(&spec.energies, beta);
    let weights: Vec<C64> = pops.iter().map(|&p| C64::new(p, 0.0)).collect();
    let rho = spec.recompose_weights(&weights);
    DensityMatrix::new(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let a = spin::sx().add(&spin::sz());
        let e = matrix_exp(&a, c(0.0, 0.0)).unwrap();
        assert!(e.max_abs_diff(&Operator::identity(2)) < 1e-15);
    }

    #[test]
    fn exp_pi_sx_is_minus_i_sigma_x() {
        // exp(−iπ S_x′) = exp(−iπσx/2) = −iσx; a full 2π turn gives −1.
        let full = matrix_exp(&spin::sx(), c(0.0, -2.0 * PI)).unwrap();
        assert!(full.max_abs_diff(&Operator::identity(2).scale_real(-1.0)) < 1e-12);
        let half = matrix_exp(&spin::sx(), c(0.0, -PI)).unwrap();
        let expected =
            Operator::from_rows(2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, -1.0), c(0.0, 0.0)])
                .unwrap();
        assert!(half.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn exp_of_diagonal() {
        let a = Operator::diagonal(&[c(0.3, 0.0), c(-1.2, 0.0)]);
        let s = c(0.5, -0.7);
        let e = matrix_exp(&a, s).unwrap();
        assert!((e.get(0, 0) - (s * 0.3).exp()).norm() < 1e-13);
        assert!((e.get(1, 1) - (s * -1.2).exp()).norm() < 1e-13);
        assert!(e.get(0, 1).norm() < 1e-15);
    }

    #[test]
    fn exp_rejects_large_dims() {
        assert!(matches!(
            matrix_exp(&Operator::identity(17), c(1.0, 0.0)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn non_square_rejected() {
        let m = DMatrix::<C64>::zeros(2, 3);
        assert!(matches!(Operator::from_matrix(m), Err(Error::Dimension(_))));
    }

    #[test]
    fn eig_of_start_hamiltonian() {
        let h = spin::sz().scale_real(2.0 * PI * 2.0);
        let s = eig_hermitian(&h).unwrap();
        assert_abs_diff_eq!(s.energies[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.energies[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvectors[0][0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvectors[1][1].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eig_of_end_hamiltonian() {
        let h = spin::sz()
            .scale_real(2.0)
            .add(&spin::sx().scale_real(5.0))
            .scale_real(2.0 * PI);
        let s = eig_hermitian(&h).unwrap();
        let half = 29f64.sqrt() / 2.0;
        assert_abs_diff_eq!(s.energies[0], -half, epsilon = 1e-12);
        assert_abs_diff_eq!(s.energies[1], half, epsilon = 1e-12);
        let back = s.recompose(|e| c(2.0 * PI * e, 0.0));
        assert!(back.max_abs_diff(&h) < 1e-10);
    }

    #[test]
    fn eig_degenerate_identity() {
        let s = eig_hermitian(&Operator::identity(2).scale_real(2.0 * PI)).unwrap();
        assert_eq!(s.energies.len(), 2);
        for e in &s.energies {
            assert_abs_diff_eq!(*e, 1.0, epsilon = 1e-12);
        }
        let v = &s.eigenvectors;
        let overlap: C64 = v[0].iter().zip(&v[1]).map(|(a, b)| a.conj() * b).sum();
        assert!(overlap.norm() < 1e-12);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let a = Operator::from_real_rows(2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(eig_hermitian(&a), Err(Error::Validation(_))));
    }

    #[test]
    fn propagate_constant_matches_single_exponential() {
        let h = spin::sx().scale_real(3.0).add(&spin::sz().scale_real(-1.5));
        let u = propagate(|_| Ok(h.clone()), 0.7, 37).unwrap();
        let direct = unitary_step(&h, 0.7).unwrap();
        assert!(u.max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn propagate_zero_hamiltonian() {
        let u = propagate(|_| Ok(Operator::zeros(2)), 1.0, 10).unwrap();
        assert!(u.max_abs_diff(&Operator::identity(2)) < 1e-15);
    }

    #[test]
    fn propagate_rejects_non_hermitian_and_zero_slices() {
        let bad = Operator::from_real_rows(2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(propagate(|_| Ok(bad.clone()), 1.0, 4).is_err());
        assert!(propagate(|_| Ok(Operator::zeros(2)), 1.0, 0).is_err());
    }

    #[test]
    fn thermal_state_infinite_temperature() {
        let h = spin::sz().scale_real(2.0 * PI * 2.0);
        let rho = thermal_state(&h, 0.0).unwrap();
        assert!(rho
            .operator()
            .max_abs_diff(&Operator::identity(2).scale_real(0.5))
            < 1e-15);
    }

    #[test]
    fn thermal_state_gibbs_ratio() {
        let h = spin::sz().scale_real(2.0 * PI * 2.0);
        let rho = thermal_state(&h, 0.22).unwrap();
        let ground = rho.operator().get(0, 0).re;
        // 1 / (1 + e^{-0.44})
        assert_abs_diff_eq!(ground, 0.608_259_030_746_514_4, epsilon = 1e-12);
    }

    #[test]
    fn thermal_state_zero_temperature_limit() {
        let h = spin::sz().scale_real(2.0 * PI * 2.0);
        let rho = thermal_state(&h, 100.0).unwrap();
        assert_abs_diff_eq!(rho.operator().get(0, 0).re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn thermal_state_rejects_negative_beta() {
        let h = spin::sz();
        assert!(matches!(thermal_state(&h, -0.1), Err(Error::Validation(_))));
        assert!(thermal_state(&h, f64::NAN).is_err());
    }
}
