//! Two-qubit spin state of a spin-0 decay into a fermion pair.
//!
//! Basis order is lexicographic over `(slot A, slot B)`:
//! `|↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩`. Slot A is the τ⁺ spin and slot B the τ⁻ spin,
//! both quantized along ẑ = τ⁺ momentum. With this assignment the first
//! index of `C_ij = Tr[ρ σ_i ⊗ σ_j]` belongs to τ⁺, which is the index order
//! of the event density `1 + h⁺·C·h⁻` and of the moment rule
//! `⟨n_i⁺ n_j⁻⟩ = −C_ij/9`. Swapping the slots transposes `C` and flips
//! the sign of every CP-odd entry (`C_xy`, `C_yx`) and hence of `Q_CP`.

use nalgebra::{Complex, Matrix2, Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Slot of the τ⁺ spin in the two-qubit tensor product.
pub const TAU_PLUS_SLOT: Subsystem = Subsystem::A;

const NORM_TOL: f64 = 1e-9;
const HERMITIAN_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// CP mixing angle α in radians. The same slot carries the generic spin
/// phase ξ_f of other spin-0 → f f̄ decays.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseAngle(f64);

impl PhaseAngle {
    pub const fn new(radians: f64) -> Self {
        PhaseAngle(radians)
    }

    pub fn from_degrees(degrees: f64) -> Self {
        PhaseAngle(degrees.to_radians())
    }

    pub const fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// Relative phase `e^{2iα}` between `|↑↓⟩` and `|↓↑⟩`.
    pub fn relative_phase(self) -> C64 {
        Complex::from_polar(1.0, 2.0 * self.0)
    }
}

impl From<f64> for PhaseAngle {
    fn from(radians: f64) -> Self {
        PhaseAngle(radians)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Pure two-qubit state in the fixed basis order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    amps: Vector4<C64>,
}

impl SpinState {
    /// `(|↑↓⟩ + e^{2iα}|↓↑⟩)/√2`.
    pub fn family(alpha: PhaseAngle) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let zero = Complex::new(0.0, 0.0);
        SpinState {
            amps: Vector4::new(zero, Complex::new(h, 0.0), alpha.relative_phase() * h, zero),
        }
    }

    pub fn from_amplitudes(amps: [C64; 4]) -> Self {
        SpinState {
            amps: Vector4::from(amps),
        }
    }

    /// Product state `a ⊗ b` from single-qubit amplitudes `(↑, ↓)`.
    pub fn product(a: [C64; 2], b: [C64; 2]) -> Self {
        SpinState::from_amplitudes([a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]])
    }

    pub fn amplitudes(&self) -> [C64; 4] {
        [self.amps[0], self.amps[1], self.amps[2], self.amps[3]]
    }

    pub fn vector(&self) -> &Vector4<C64> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &SpinState) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// Applies a single-qubit operator on one slot.
    pub fn apply_local(&self, side: Subsystem, u: &Matrix2<C64>) -> SpinState {
        let id = Matrix2::identity();
        let op = match side {
            Subsystem::A => kron(u, &id),
            Subsystem::B => kron(&id, u),
        };
        SpinState {
            amps: op * self.amps,
        }
    }
}

pub fn state_vector(alpha: PhaseAngle) -> SpinState {
    SpinState::family(alpha)
}

/// Hermitian, unit-trace, positive semidefinite 4×4 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Matrix4<C64>);

impl DensityMatrix {
    pub fn from_state(state: &SpinState) -> Result<Self> {
        let norm_sq = state.norm_sqr();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        let v = state.vector();
        Ok(DensityMatrix(v * v.adjoint()))
    }

    /// Validates and wraps an arbitrary 4×4 matrix.
    pub fn from_matrix(m: Matrix4<C64>) -> Result<Self> {
        let herm_err = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > HERMITIAN_TOL {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (max deviation {herm_err:e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > HERMITIAN_TOL || tr.im.abs() > HERMITIAN_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr} != 1")));
        }
        let min_eig = hermitian_eigenvalues(&m).into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidDensity(format!(
                "not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(DensityMatrix(m))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Matrix4::identity() * Complex::new(0.25, 0.0))
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ.
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `Re Tr[ρ O]`.
    pub fn expectation(&self, op: &Matrix4<C64>) -> f64 {
        (self.0 * op).trace().re
    }
}

pub fn density_matrix(state: &SpinState) -> Result<DensityMatrix> {
    DensityMatrix::from_state(state)
}

/// Single-qubit Pauli matrix, `k ∈ {0: I, 1: X, 2: Y, 3: Z}`.
pub fn pauli(k: usize) -> Matrix2<C64> {
    let o = Complex::new(0.0, 0.0);
    let l = Complex::new(1.0, 0.0);
    let i = Complex::new(0.0, 1.0);
    match k {
        0 => Matrix2::new(l, o, o, l),
        1 => Matrix2::new(o, l, l, o),
        2 => Matrix2::new(o, -i, i, o),
        3 => Matrix2::new(l, o, o, -l),
        _ => panic!("Pauli index {k} out of range"),
    }
}

/// `σ_i ⊗ σ_j` with both indices in `0..4`.
pub fn pauli_pair(i: usize, j: usize) -> Matrix4<C64> {
    kron(&pauli(i), &pauli(j))
}

pub fn kron(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Real 3×3 spin-correlation tensor, first index on τ⁺.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix(pub Matrix3<f64>);

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn xx(&self) -> f64 {
        self.0[(0, 0)]
    }

    pub fn xy(&self) -> f64 {
        self.0[(0, 1)]
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn det(&self) -> f64 {
        self.0.determinant()
    }

    /// `max |C Cᵀ − I|` entrywise.
    pub fn orthogonality_defect(&self) -> f64 {
        (self.0 * self.0.transpose() - Matrix3::identity()).amax()
    }

    pub fn max_abs_diff(&self, other: &CorrelationMatrix) -> f64 {
        (self.0 - other.0).amax()
    }
}

pub fn correlation_matrix(rho: &DensityMatrix) -> CorrelationMatrix {
    CorrelationMatrix(Matrix3::from_fn(|i, j| {
        rho.expectation(&pauli_pair(i + 1, j + 1))
    }))
}

pub fn correlation_matrix_closed(alpha: PhaseAngle) -> CorrelationMatrix {
    let (s, c) = (2.0 * alpha.radians()).sin_cos();
    CorrelationMatrix(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, -1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVectors {
    pub b_plus: Vector3<f64>,
    pub b_minus: Vector3<f64>,
}

pub fn bloch_vectors(rho: &DensityMatrix) -> BlochVectors {
    BlochVectors {
        b_plus: Vector3::from_fn(|i, _| rho.expectation(&pauli_pair(i + 1, 0))),
        b_minus: Vector3::from_fn(|j, _| rho.expectation(&pauli_pair(0, j + 1))),
    }
}

/// Partial trace over the complementary slot.
pub fn reduced_density(rho: &DensityMatrix, side: Subsystem) -> Matrix2<C64> {
    let m = rho.matrix();
    Matrix2::from_fn(|r, c| match side {
        Subsystem::A => m[(2 * r, 2 * c)] + m[(2 * r + 1, 2 * c + 1)],
        Subsystem::B => m[(r, c)] + m[(r + 2, c + 2)],
    })
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub(crate) fn hermitian_eigenvalues(m: &Matrix4<C64>) -> [f64; 4] {
    let herm = (m + m.adjoint()) * Complex::new(0.5, 0.0);
    let ev = herm.symmetric_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2], ev[3]];
    out.sort_by(f64::total_cmp);
    out
}

/// Eigenvalues of a 2×2 Hermitian matrix in closed form, ascending.
pub(crate) fn hermitian_eigenvalues_2x2(m: &Matrix2<C64>) -> [f64; 2] {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    [mean - r, mean + r]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

    fn c(re: f64, im: f64) -> C64 {
        Complex::new(re, im)
    }

    fn up() -> [C64; 2] {
        [c(1.0, 0.0), c(0.0, 0.0)]
    }

    fn down() -> [C64; 2] {
        [c(0.0, 0.0), c(1.0, 0.0)]
    }

    #[test]
    fn state_vector_bell_points() {
        let psi = state_vector(PhaseAngle::new(0.0)).amplitudes();
        assert_abs_diff_eq!(psi[1].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(psi[2].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_eq!(psi[0], c(0.0, 0.0));
        assert_eq!(psi[3], c(0.0, 0.0));

        let psi = state_vector(PhaseAngle::new(FRAC_PI_2)).amplitudes();
        assert_abs_diff_eq!(psi[2].re, -FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(psi[2].im, 0.0, epsilon = 1e-15);

        // T-gate phase at π/8
        let psi = state_vector(PhaseAngle::new(FRAC_PI_8)).amplitudes();
        let rel = psi[2] / psi[1];
        assert_abs_diff_eq!(rel.re, FRAC_PI_4.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(rel.im, FRAC_PI_4.sin(), epsilon = 1e-15);
    }

    #[test]
    fn density_matrix_off_diagonals() {
        let rho = density_matrix(&state_vector(PhaseAngle::new(0.0))).unwrap();
        assert_abs_diff_eq!(rho.matrix()[(1, 2)].re, 0.5, epsilon = 1e-15);

        let rho = density_matrix(&state_vector(PhaseAngle::new(FRAC_PI_8))).unwrap();
        let expect = Complex::from_polar(0.5, -FRAC_PI_4);
        assert_abs_diff_eq!(rho.matrix()[(1, 2)].re, expect.re, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.matrix()[(1, 2)].im, expect.im, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.matrix().trace().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn density_matrix_rejects_unnormalized() {
        let s = SpinState::from_amplitudes([c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(density_matrix(&s), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn from_matrix_validates() {
        assert!(DensityMatrix::from_matrix(Matrix4::identity() * c(0.25, 0.0)).is_ok());
        assert!(DensityMatrix::from_matrix(Matrix4::identity() * c(0.5, 0.0)).is_err());
        let mut m = Matrix4::zeros();
        m[(0, 0)] = c(1.5, 0.0);
        m[(1, 1)] = c(-0.5, 0.0);
        assert!(DensityMatrix::from_matrix(m).is_err());
        let mut m = Matrix4::identity() * c(0.25, 0.0);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix::from_matrix(m).is_err());
    }

    #[test]
    fn correlation_matrix_examples() {
        let at = |a: f64| correlation_matrix(&density_matrix(&state_vector(PhaseAngle::new(a))).unwrap());

        let c0 = at(0.0);
        assert!(c0.max_abs_diff(&CorrelationMatrix(Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)))) < 1e-12);

        let c4 = at(FRAC_PI_4);
        let want = CorrelationMatrix(Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0));
        assert!(c4.max_abs_diff(&want) < 1e-12);

        // pins the Pauli and slot conventions
        let c8 = at(FRAC_PI_8);
        assert_abs_diff_eq!(c8.xx(), FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(c8.get(1, 1), FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(c8.xy(), -FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(c8.get(1, 0), FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_examples() {
        let c = correlation_matrix_closed(PhaseAngle::new(FRAC_PI_2));
        let want = CorrelationMatrix(Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, -1.0)));
        assert!(c.max_abs_diff(&want) < 1e-15);
        assert_abs_diff_eq!(c.det(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_matches_trace_form() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = PhaseAngle::new(rng.random::<f64>() * 2.0 * PI);
            let traced = correlation_matrix(&density_matrix(&state_vector(a)).unwrap());
            let closed = correlation_matrix_closed(a);
            assert!(traced.max_abs_diff(&closed) < 1e-12);
            assert_abs_diff_eq!(closed.det(), -1.0, epsilon = 1e-10);
            assert!(closed.orthogonality_defect() < 1e-10);
            let shifted = correlation_matrix_closed(PhaseAngle::new(a.radians() + PI));
            assert!(closed.max_abs_diff(&shifted) < 1e-12);
            let rho = density_matrix(&state_vector(a)).unwrap();
            for side in [Subsystem::A, Subsystem::B] {
                let red = reduced_density(&rho, side);
                assert!((red - Matrix2::identity() * c(0.5, 0.0)).iter().all(|z| z.norm() < 1e-12));
            }
        }
    }

    #[test]
    fn bloch_vectors_examples() {
        let b = bloch_vectors(&density_matrix(&state_vector(PhaseAngle::new(0.37))).unwrap());
        assert!(b.b_plus.amax() < 1e-12 && b.b_minus.amax() < 1e-12);

        let upup = density_matrix(&SpinState::product(up(), up())).unwrap();
        let b = bloch_vectors(&upup);
        assert_eq!(b.b_plus, Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(b.b_minus, Vector3::new(0.0, 0.0, 1.0));

        let b = bloch_vectors(&DensityMatrix::maximally_mixed());
        assert!(b.b_plus.amax() < 1e-15 && b.b_minus.amax() < 1e-15);
    }

    #[test]
    fn reduced_density_examples() {
        let rho = density_matrix(&SpinState::product(up(), down())).unwrap();
        let ra = reduced_density(&rho, Subsystem::A);
        assert_eq!(ra, Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)));
        let rb = reduced_density(&rho, Subsystem::B);
        assert_eq!(rb, Matrix2::new(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)));

        let red = reduced_density(&DensityMatrix::maximally_mixed(), Subsystem::B);
        assert_eq!(red, Matrix2::identity() * c(0.5, 0.0));

        let rho = density_matrix(&state_vector(PhaseAngle::new(1.1))).unwrap();
        let ev = hermitian_eigenvalues_2x2(&reduced_density(&rho, Subsystem::A));
        assert_abs_diff_eq!(ev[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn local_phase_on_bell_state_generates_family() {
        let alpha = 0.3;
        let u = Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), Complex::from_polar(1.0, 2.0 * alpha));
        let rotated = SpinState::family(PhaseAngle::new(0.0)).apply_local(Subsystem::A, &u);
        let target = SpinState::family(PhaseAngle::new(alpha));
        assert_abs_diff_eq!(rotated.inner(&target).norm(), 1.0, epsilon = 1e-14);
    }
}
