//! Stabilizer Rényi entropy of order two and the CP witnesses built on it.
//!
//! For a two-qubit pure state
//!
//! ```text
//! M₂ = −log₂( Σ_P ⟨P⟩⁴ / 16 ) − 2 = log₂(4 / Ξ),   Ξ = Σ_P ⟨P⟩⁴
//! ```
//!
//! with `P` running over the 16 Hermitian Pauli strings. On the decay family
//! only `II` and the five nonzero correlation entries contribute and
//! `Ξ(α) = 4 − sin²4α`, so `M₂` vanishes at the Clifford phases `α = kπ/4`
//! and peaks at `log₂(4/3)` on the T-gate phases `α = π/8 + kπ/4`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spinstate::{pauli_pair, CorrelationMatrix, DensityMatrix, PhaseAngle};

/// `log₂(4/3)`, the largest M₂ reached on the decay family.
pub const M2_MAX: f64 = 0.415_037_499_278_843_8;

pub const DEFAULT_STABILIZER_TOL: f64 = 1e-9;

const PURITY_TOL: f64 = 1e-8;
const STRUCTURE_TOL: f64 = 1e-6;

const PAULI_LETTERS: [char; 4] = ['I', 'X', 'Y', 'Z'];

/// `⟨P⟩` for the 16 two-qubit Pauli strings, in lexicographic order
/// `II, IX, IY, IZ, XI, …, ZZ` (index `4a + b`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliSpectrum(pub [f64; 16]);

impl PauliSpectrum {
    pub fn label(index: usize) -> String {
        [PAULI_LETTERS[index / 4], PAULI_LETTERS[index % 4]].iter().collect()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.0[4 * a + b]
    }

    /// `Σ ⟨P⟩²`, equal to `4 Tr ρ²`.
    pub fn square_sum(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

pub fn pauli_expectations(rho: &DensityMatrix) -> PauliSpectrum {
    let mut values = [0.0; 16];
    values[0] = 1.0;
    for (k, v) in values.iter_mut().enumerate().skip(1) {
        *v = rho.expectation(&pauli_pair(k / 4, k % 4));
    }
    PauliSpectrum(values)
}

/// `Ξ = Σ_P ⟨P⟩⁴`.
pub fn quartic_sum(spec: &PauliSpectrum) -> f64 {
    spec.0.iter().map(|v| (v * v) * (v * v)).sum()
}

/// `M₂` in bits from the Pauli-moment definition. Pure states only.
pub fn sre_m2(rho: &DensityMatrix) -> Result<f64> {
    let purity = rho.purity();
    if (purity - 1.0).abs() > PURITY_TOL {
        return Err(Error::MixedState { purity });
    }
    let xi = quartic_sum(&pauli_expectations(rho));
    Ok(m2_from_quartic(xi))
}

fn m2_from_quartic(xi: f64) -> f64 {
    let n = 2.0;
    (-(xi / 16.0).log2() - n).max(0.0)
}

/// `M₂(α) = log₂(4 / (4 − sin²4α))`.
pub fn sre_m2_closed(alpha: PhaseAngle) -> f64 {
    let s = (4.0 * alpha.radians()).sin();
    (4.0 / (4.0 - s * s)).log2()
}

/// `Ξ(α) = 4 − sin²4α`.
pub fn quartic_sum_closed(alpha: PhaseAngle) -> f64 {
    let s = (4.0 * alpha.radians()).sin();
    4.0 - s * s
}

fn check_family_structure(c: &CorrelationMatrix) -> Result<()> {
    let m = c.matrix();
    let checks = [
        ((m[(0, 0)] - m[(1, 1)]).abs(), "C_xx = C_yy"),
        ((m[(0, 1)] + m[(1, 0)]).abs(), "C_xy = -C_yx"),
        ((m[(2, 2)] + 1.0).abs(), "C_zz = -1"),
        (
            m[(0, 2)].abs().max(m[(2, 0)].abs()).max(m[(1, 2)].abs()).max(m[(2, 1)].abs()),
            "C_xz = C_zx = C_yz = C_zy = 0",
        ),
    ];
    for (dev, name) in checks {
        if !(dev <= STRUCTURE_TOL) {
            return Err(Error::StructureViolation(format!("{name} (deviation {dev:e})")));
        }
    }
    Ok(())
}

/// `W_CP = 2 + 2(C_xx⁴ + C_xy⁴)`.
pub fn w_cp_from_correlations(c: &CorrelationMatrix) -> Result<f64> {
    check_family_structure(c)?;
    Ok(w_cp_formula(c.xx(), c.xy()))
}

/// `Q_CP = −2 C_xy C_xx`.
pub fn q_cp_from_correlations(c: &CorrelationMatrix) -> Result<f64> {
    check_family_structure(c)?;
    Ok(q_cp_formula(c.xx(), c.xy()))
}

pub(crate) fn w_cp_formula(cxx: f64, cxy: f64) -> f64 {
    let (a, b) = (cxx * cxx, cxy * cxy);
    2.0 + 2.0 * (a * a + b * b)
}

pub(crate) fn q_cp_formula(cxx: f64, cxy: f64) -> f64 {
    -2.0 * cxy * cxx
}

/// `M₂ = log₂(4 / W)` for a witness value in `[3, 4]`.
pub fn m2_from_wcp(w: f64) -> f64 {
    (4.0 / w).log2().max(0.0)
}

pub fn m2_from_qcp(q: f64) -> Result<f64> {
    if !(q.abs() <= 1.0 + 1e-12) {
        return Err(Error::NonPhysical(format!("|Q_CP| = {} exceeds 1", q.abs())));
    }
    let q2 = (q * q).min(1.0);
    Ok((4.0 / (4.0 - q2)).log2())
}

/// `M₂(ρ) < tol`. Exact for members of the decay family; on other pure
/// states it only says the Pauli spectrum looks like a stabilizer spectrum.
pub fn is_stabilizer(rho: &DensityMatrix, tol: f64) -> Result<bool> {
    Ok(sre_m2(rho)? < tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagicReport {
    pub xi: f64,
    pub m2_bits: f64,
    pub w_cp: f64,
    pub q_cp: f64,
}

impl MagicReport {
    /// Analytic values on the decay family.
    pub fn at(alpha: PhaseAngle) -> Self {
        let c = crate::spinstate::correlation_matrix_closed(alpha);
        let xi = quartic_sum_closed(alpha);
        MagicReport {
            xi,
            m2_bits: m2_from_quartic(xi),
            w_cp: w_cp_formula(c.xx(), c.xy()),
            q_cp: q_cp_formula(c.xx(), c.xy()),
        }
    }
}
