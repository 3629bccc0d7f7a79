//! Spectrum-based entanglement and metrology measures.
//!
//! All of these are invariant under local unitaries, so on the ideal family
//! they cannot see α. They are computed from the state every time so that
//! the flatness over α is a measured fact rather than an assumption.

use nalgebra::{Complex, Matrix4, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spinstate::{
    correlation_matrix, density_matrix, hermitian_eigenvalues, hermitian_eigenvalues_2x2,
    pauli_pair, reduced_density, state_vector, CorrelationMatrix, DensityMatrix, PhaseAngle,
    SpinState, Subsystem, C64,
};

pub const CONCURRENCE_MAX: f64 = 1.0;
pub const NEGATIVITY_MAX: f64 = 0.5;
pub const ENTROPY_MAX_BITS: f64 = 1.0;
pub const CHSH_MAX: f64 = 2.0 * std::f64::consts::SQRT_2;
pub const QFI_MAX: f64 = 4.0;

const PURITY_TOL: f64 = 1e-8;
const SPECTRAL_FLOOR: f64 = 1e-13;

/// Wootters concurrence.
pub fn concurrence(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    let yy = pauli_pair(2, 2);
    let flipped = yy * m.conjugate() * yy;

    // λ_i² are the eigenvalues of √ρ ρ̃ √ρ, which is Hermitian.
    let sqrt_rho = hermitian_sqrt(m);
    let r = sqrt_rho * flipped * sqrt_rho;
    // Rounding leaves eigenvalues near 1e-16 whose square roots would bias C by 1e-8.
    let mut lambdas = hermitian_eigenvalues(&r).map(|x| if x > SPECTRAL_FLOOR { x.sqrt() } else { 0.0 });
    lambdas.sort_by(|a, b| b.total_cmp(a));
    (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0)
}

fn hermitian_sqrt(m: &Matrix4<C64>) -> Matrix4<C64> {
    let herm = (m + m.adjoint()) * Complex::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let d = Matrix4::from_diagonal(
        &eig.eigenvalues.map(|x| Complex::new(if x > SPECTRAL_FLOOR { x.sqrt() } else { 0.0 }, 0.0)),
    );
    eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// Partial transpose on slot B.
pub fn partial_transpose(m: &Matrix4<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| {
        let (ra, rb) = (r / 2, r % 2);
        let (ca, cb) = (c / 2, c % 2);
        m[(2 * ra + cb, 2 * ca + rb)]
    })
}

/// Sum of the magnitudes of the negative eigenvalues of `ρ^{T_B}`.
pub fn negativity(rho: &DensityMatrix) -> f64 {
    hermitian_eigenvalues(&partial_transpose(rho.matrix()))
        .iter()
        .filter(|&&x| x < 0.0)
        .map(|x| -x)
        .sum()
}

/// Entanglement entropy of a pure state in bits.
pub fn entanglement_entropy(rho: &DensityMatrix) -> Result<f64> {
    let purity = rho.purity();
    if (purity - 1.0).abs() > PURITY_TOL {
        return Err(Error::MixedState { purity });
    }
    let ev = hermitian_eigenvalues_2x2(&reduced_density(rho, Subsystem::A));
    Ok(ev
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0))
}

/// Maximal CHSH value from the Horodecki criterion, `2√(m₁ + m₂)` over
/// the two largest eigenvalues of `CᵀC`.
pub fn chsh_max(c: &CorrelationMatrix) -> f64 {
    let t = c.matrix().transpose() * c.matrix();
    let mut ev: Vec<f64> = t.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    2.0 * (ev[0] + ev[1]).max(0.0).sqrt()
}

/// Pure-state quantum Fisher information `4(⟨∂ψ|∂ψ⟩ − |⟨ψ|∂ψ⟩|²)`.
pub fn pure_state_qfi(psi: &SpinState, dpsi: &SpinState) -> f64 {
    4.0 * (dpsi.norm_sqr() - psi.inner(dpsi).norm_sqr())
}

/// `∂|ψ(α)⟩/∂α` for the decay family.
pub fn family_derivative(alpha: PhaseAngle) -> SpinState {
    let zero = Complex::new(0.0, 0.0);
    let d = Complex::new(0.0, 2.0) * alpha.relative_phase() * std::f64::consts::FRAC_1_SQRT_2;
    SpinState::from_amplitudes([zero, zero, d, zero])
}

/// QFI of the decay family with respect to α, from the analytic derivative.
pub fn qfi_alpha(alpha: PhaseAngle) -> f64 {
    pure_state_qfi(&state_vector(alpha), &family_derivative(alpha))
}

/// QFI with the derivative replaced by a central finite difference of step `h`.
pub fn qfi_alpha_finite_difference(alpha: PhaseAngle, h: f64) -> f64 {
    let a = alpha.radians();
    let plus = state_vector(PhaseAngle::new(a + h)).amplitudes();
    let minus = state_vector(PhaseAngle::new(a - h)).amplitudes();
    let scale = Complex::new(0.5 / h, 0.0);
    let d: [C64; 4] = std::array::from_fn(|k| (plus[k] - minus[k]) * scale);
    pure_state_qfi(&state_vector(alpha), &SpinState::from_amplitudes(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub concurrence: f64,
    pub negativity: f64,
    pub entropy_bits: f64,
    pub chsh_max: f64,
    pub qfi: f64,
}

impl MeasureReport {
    pub const NAMES: [&'static str; 5] = ["concurrence", "negativity", "entropy", "chsh", "qfi"];
    pub const MAXIMA: [f64; 5] = [
        CONCURRENCE_MAX,
        NEGATIVITY_MAX,
        ENTROPY_MAX_BITS,
        CHSH_MAX,
        QFI_MAX,
    ];

    pub fn at(alpha: PhaseAngle) -> Result<Self> {
        let rho = density_matrix(&state_vector(alpha))?;
        Ok(MeasureReport {
            concurrence: concurrence(&rho),
            negativity: negativity(&rho),
            entropy_bits: entanglement_entropy(&rho)?,
            chsh_max: chsh_max(&correlation_matrix(&rho)),
            qfi: qfi_alpha(alpha),
        })
    }

    pub fn values(&self) -> [f64; 5] {
        [
            self.concurrence,
            self.negativity,
            self.entropy_bits,
            self.chsh_max,
            self.qfi,
        ]
    }

    /// Each measure divided by its maximum.
    pub fn normalized(&self) -> [f64; 5] {
        let v = self.values();
        std::array::from_fn(|k| v[k] / Self::MAXIMA[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessScan {
    pub points: Vec<(PhaseAngle, MeasureReport)>,
    /// max − min over the grid, in `MeasureReport::NAMES` order.
    pub max_deviation: [f64; 5],
}

pub fn flatness_scan(grid: &[PhaseAngle]) -> Result<FlatnessScan> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let points = grid
        .par_iter()
        .map(|&a| MeasureReport::at(a).map(|r| (a, r)))
        .collect::<Result<Vec<_>>>()?;
    let mut lo = [f64::INFINITY; 5];
    let mut hi = [f64::NEG_INFINITY; 5];
    for (_, r) in &points {
        for (k, v) in r.values().into_iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    Ok(FlatnessScan {
        points,
        max_deviation: std::array::from_fn(|k| hi[k] - lo[k]),
    })
}
