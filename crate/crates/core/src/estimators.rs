//! Sample-level estimators: correlation tomography, the two magic witnesses,
//! reconstructed M₂, and the classical tomography and acoplanarity baselines.

use std::f64::consts::{LN_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magic::{m2_from_wcp, q_cp_formula, w_cp_formula};
use crate::montecarlo::{acoplanarity, SampleView};
use crate::spinstate::PhaseAngle;

pub const WCP_MIN: f64 = 3.0;
pub const WCP_MAX: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservableId {
    Tomo,
    Aco,
    Qcp,
    Wcp,
    M2,
}

impl ObservableId {
    pub const ALL: [ObservableId; 5] = [
        ObservableId::Tomo,
        ObservableId::Aco,
        ObservableId::Qcp,
        ObservableId::Wcp,
        ObservableId::M2,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ObservableId::Tomo => "tomo",
            ObservableId::Aco => "aco",
            ObservableId::Qcp => "qcp",
            ObservableId::Wcp => "wcp",
            ObservableId::M2 => "m2",
        }
    }

    pub fn min_events(self) -> usize {
        match self {
            ObservableId::Tomo => 9,
            _ => 2,
        }
    }
}

impl fmt::Display for ObservableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ObservableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        ObservableId::ALL
            .into_iter()
            .find(|o| o.id() == lower)
            .ok_or_else(|| {
                let valid: Vec<_> = ObservableId::ALL.iter().map(|o| o.id()).collect();
                Error::Parse(format!(
                    "unknown observable '{s}' (valid: {})",
                    valid.join(", ")
                ))
            })
    }
}

/// How the quartic witness is treated when it leaves its pure-state range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WcpProjection {
    /// `2 + 2(ĉ_xx⁴ + ĉ_xy⁴)` as computed.
    #[default]
    Raw,
    /// Clamped to `[3, 4]`.
    Clamped,
}

impl FromStr for WcpProjection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(WcpProjection::Raw),
            "clamped" => Ok(WcpProjection::Clamped),
            _ => Err(Error::Parse(format!("unknown W_CP projection '{s}' (raw, clamped)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableEstimate {
    pub observable: ObservableId,
    pub value: f64,
    pub std_error: f64,
    pub n_events: usize,
    /// Value before range projection; equals `value` unless `clamped`.
    pub raw_value: f64,
    pub clamped: bool,
}

impl ObservableEstimate {
    fn plain(observable: ObservableId, value: f64, std_error: f64, n_events: usize) -> Self {
        ObservableEstimate {
            observable,
            value,
            std_error,
            n_events,
            raw_value: value,
            clamped: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationEstimate {
    pub c_hat: Matrix3<f64>,
    pub std_errors: Matrix3<f64>,
    /// Covariance of the `ĉ_xx` and `ĉ_xy` estimates.
    pub cov_xx_xy: f64,
    pub n_events: usize,
}

fn require(view: &SampleView<'_>, need: usize) -> Result<()> {
    if view.len() < need {
        return Err(Error::SampleTooSmall {
            got: view.len(),
            need,
        });
    }
    Ok(())
}

pub fn estimate_correlations(view: SampleView<'_>) -> Result<CorrelationEstimate> {
    require(&view, 2)?;
    let n = view.len() as f64;
    let mut sum = Matrix3::<f64>::zeros();
    let mut sum_sq = Matrix3::<f64>::zeros();
    let mut sum_xx_xy = 0.0;
    for e in view.events {
        let p = e.n_plus * e.n_minus.transpose();
        sum += p;
        sum_sq += p.component_mul(&p);
        sum_xx_xy += p[(0, 0)] * p[(0, 1)];
    }
    let mean = sum / n;
    let var = (sum_sq / n - mean.component_mul(&mean)) * (n / (n - 1.0));
    let cov = (sum_xx_xy / n - mean[(0, 0)] * mean[(0, 1)]) * (n / (n - 1.0));
    let k = view.kernel.estimator_scale();
    Ok(CorrelationEstimate {
        c_hat: mean * k,
        std_errors: var.map(|v| k.abs() * (v.max(0.0) / n).sqrt()),
        cov_xx_xy: k * k * cov / n,
        n_events: view.len(),
    })
}

/// `(ĉ_xx, ĉ_xy)` only; the inner loop of the sensitivity engine.
fn xx_xy(view: &SampleView<'_>) -> (f64, f64) {
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for e in view.events {
        sxx += e.n_plus.x * e.n_minus.x;
        sxy += e.n_plus.x * e.n_minus.y;
    }
    let k = view.kernel.estimator_scale() / view.len() as f64;
    (k * sxx, k * sxy)
}

pub fn estimate_qcp(view: SampleView<'_>) -> Result<ObservableEstimate> {
    let c = estimate_correlations(view)?;
    let (cxx, cxy) = (c.c_hat[(0, 0)], c.c_hat[(0, 1)]);
    let (vxx, vxy) = (c.std_errors[(0, 0)].powi(2), c.std_errors[(0, 1)].powi(2));
    let var = 4.0 * (cxx * cxx * vxy + cxy * cxy * vxx + 2.0 * cxx * cxy * c.cov_xx_xy);
    Ok(ObservableEstimate::plain(
        ObservableId::Qcp,
        q_cp_formula(cxx, cxy),
        var.max(0.0).sqrt(),
        c.n_events,
    ))
}

pub fn estimate_wcp(view: SampleView<'_>) -> Result<ObservableEstimate> {
    let c = estimate_correlations(view)?;
    let (cxx, cxy) = (c.c_hat[(0, 0)], c.c_hat[(0, 1)]);
    let (vxx, vxy) = (c.std_errors[(0, 0)].powi(2), c.std_errors[(0, 1)].powi(2));
    let (gxx, gxy) = (8.0 * cxx.powi(3), 8.0 * cxy.powi(3));
    let var = gxx * gxx * vxx + gxy * gxy * vxy + 2.0 * gxx * gxy * c.cov_xx_xy;
    let raw = w_cp_formula(cxx, cxy);
    let value = raw.clamp(WCP_MIN, WCP_MAX);
    Ok(ObservableEstimate {
        observable: ObservableId::Wcp,
        value,
        std_error: var.max(0.0).sqrt(),
        n_events: c.n_events,
        raw_value: raw,
        clamped: value != raw,
    })
}

/// `M₂ = log₂(4/W_CP)` with `W_CP` projected onto `[3, 4]` first.
pub fn estimate_m2(view: SampleView<'_>) -> Result<ObservableEstimate> {
    let w = estimate_wcp(view)?;
    Ok(ObservableEstimate {
        observable: ObservableId::M2,
        value: m2_from_wcp(w.value),
        std_error: w.std_error / (w.value * LN_2),
        n_events: w.n_events,
        raw_value: (4.0 / w.raw_value).log2(),
        clamped: w.clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaFit {
    /// Maximum-likelihood α in `(−π/2, π/2]`.
    pub alpha_hat: f64,
    /// `1/√(observed information)`.
    pub std_error: f64,
    pub log_likelihood: f64,
}

/// Per-event density written as `A + u cos θ − v sin θ` with `θ = 2α`.
struct LikelihoodTerms {
    a: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl LikelihoodTerms {
    fn new(view: &SampleView<'_>) -> Self {
        let s = view.kernel.sign();
        let n = view.len();
        let (mut a, mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for e in view.events {
            let (p, m) = (&e.n_plus, &e.n_minus);
            a.push(1.0 - s * p.z * m.z);
            u.push(s * (p.x * m.x + p.y * m.y));
            v.push(s * (p.x * m.y - p.y * m.x));
        }
        LikelihoodTerms { a, u, v }
    }

    fn value(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let mut sum = 0.0;
        for k in 0..self.a.len() {
            sum += (self.a[k] + self.u[k] * c - self.v[k] * s).ln();
        }
        sum
    }

    /// `(L, L', L'')` in θ.
    fn derivatives(&self, theta: f64) -> (f64, f64, f64) {
        let (s, c) = theta.sin_cos();
        let (mut l0, mut l1, mut l2) = (0.0, 0.0, 0.0);
        for k in 0..self.a.len() {
            let p = self.a[k] + self.u[k] * c - self.v[k] * s;
            let d1 = (-self.u[k] * s - self.v[k] * c) / p;
            let d2 = (-self.u[k] * c + self.v[k] * s) / p;
            l0 += p.ln();
            l1 += d1;
            l2 += d2 - d1 * d1;
        }
        (l0, l1, l2)
    }
}

const FIT_GRID: usize = 32;
const GOLDEN_STEPS: usize = 24;
const NEWTON_STEPS: usize = 8;

/// One-parameter maximum-likelihood fit of α over the exact event density.
pub fn fit_alpha(view: SampleView<'_>) -> Result<AlphaFit> {
    require(&view, ObservableId::Tomo.min_events())?;
    let terms = LikelihoodTerms::new(&view);

    let step = TAU / FIT_GRID as f64;
    let grid: Vec<(f64, f64)> = (0..FIT_GRID)
        .map(|k| {
            let t = -PI + k as f64 * step;
            (t, terms.value(t))
        })
        .collect();
    let (best_t, best_l) = grid
        .iter()
        .copied()
        .filter(|(_, l)| !l.is_nan())
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::FitFailed("likelihood undefined on the whole grid".into()))?;
    let worst_l = grid.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    if !best_l.is_finite() {
        return Err(Error::FitFailed("likelihood is not finite".into()));
    }
    if best_l - worst_l <= 1e-12 * (1.0 + best_l.abs()) {
        return Err(Error::FitFailed("likelihood is flat in α".into()));
    }

    // golden section inside the neighbouring grid cells
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (best_t - step, best_t + step);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (terms.value(x1), terms.value(x2));
    for _ in 0..GOLDEN_STEPS {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = terms.value(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = terms.value(x1);
        }
    }
    let mut theta = 0.5 * (lo + hi);

    // Newton polish, accepted only while it climbs
    let (mut l0, mut l1, mut l2) = terms.derivatives(theta);
    for _ in 0..NEWTON_STEPS {
        if !(l2 < 0.0) {
            break;
        }
        let delta = -l1 / l2;
        if delta.abs() > step {
            break;
        }
        let (n0, n1, n2) = terms.derivatives(theta + delta);
        if !(n0 >= l0) {
            break;
        }
        theta += delta;
        (l0, l1, l2) = (n0, n1, n2);
        if delta.abs() < 1e-12 {
            break;
        }
    }

    // θ = 2α, information in α is 4× that in θ
    let info_alpha = -4.0 * l2;
    let std_error = if info_alpha > 0.0 {
        1.0 / info_alpha.sqrt()
    } else {
        f64::INFINITY
    };
    Ok(AlphaFit {
        alpha_hat: wrap_half_pi(0.5 * theta),
        std_error,
        log_likelihood: l0,
    })
}

/// Wraps to `(−π/2, π/2]`.
fn wrap_half_pi(a: f64) -> f64 {
    let w = a - PI * (a / PI).round();
    if w <= -PI / 2.0 {
        w + PI
    } else {
        w
    }
}

/// Tomography baseline: CP-odd projection `sin 2(α̂ − α₀)` of the
/// maximum-likelihood phase. Vanishes on average at α₀ and at α₀ + π/2.
pub fn tomography_statistic(view: SampleView<'_>, alpha0: PhaseAngle) -> Result<ObservableEstimate> {
    let fit = fit_alpha(view)?;
    let d = 2.0 * (fit.alpha_hat - alpha0.radians());
    Ok(ObservableEstimate::plain(
        ObservableId::Tomo,
        d.sin(),
        2.0 * d.cos().abs() * fit.std_error,
        view.len(),
    ))
}

/// Acoplanarity baseline: `⟨sin(φ* + 2α₀)⟩` oriented so that it equals
/// `(π²/32) sin 2(α − α₀)` in expectation under either kernel sign.
pub fn acoplanarity_statistic(view: SampleView<'_>, alpha0: PhaseAngle) -> Result<ObservableEstimate> {
    require(&view, 2)?;
    let shift = 2.0 * alpha0.radians();
    let orient = -view.kernel.sign();
    let (mut n, mut s1, mut s2) = (0usize, 0.0, 0.0);
    for e in view.events {
        let Ok(phi) = acoplanarity(e) else { continue };
        let x = orient * (phi + shift).sin();
        n += 1;
        s1 += x;
        s2 += x * x;
    }
    if n < 2 {
        return Err(Error::SampleTooSmall { got: n, need: 2 });
    }
    let nf = n as f64;
    let mean = s1 / nf;
    let var = (s2 / nf - mean * mean) * nf / (nf - 1.0);
    Ok(ObservableEstimate::plain(
        ObservableId::Aco,
        mean,
        (var.max(0.0) / nf).sqrt(),
        n,
    ))
}

/// Full estimate for any observable.
pub fn estimate(observable: ObservableId, view: SampleView<'_>, alpha0: PhaseAngle) -> Result<ObservableEstimate> {
    match observable {
        ObservableId::Tomo => tomography_statistic(view, alpha0),
        ObservableId::Aco => acoplanarity_statistic(view, alpha0),
        ObservableId::Qcp => estimate_qcp(view),
        ObservableId::Wcp => estimate_wcp(view),
        ObservableId::M2 => estimate_m2(view),
    }
}

/// Point value only, as used per sub-sample by the significance engine.
pub fn statistic(
    observable: ObservableId,
    view: SampleView<'_>,
    alpha0: PhaseAngle,
    wcp: WcpProjection,
) -> Result<f64> {
    require(&view, observable.min_events())?;
    match observable {
        ObservableId::Qcp => {
            let (cxx, cxy) = xx_xy(&view);
            Ok(q_cp_formula(cxx, cxy))
        }
        ObservableId::Wcp => {
            let (cxx, cxy) = xx_xy(&view);
            let raw = w_cp_formula(cxx, cxy);
            Ok(match wcp {
                WcpProjection::Raw => raw,
                WcpProjection::Clamped => raw.clamp(WCP_MIN, WCP_MAX),
            })
        }
        ObservableId::M2 => {
            let (cxx, cxy) = xx_xy(&view);
            Ok(m2_from_wcp(w_cp_formula(cxx, cxy).clamp(WCP_MIN, WCP_MAX)))
        }
        ObservableId::Tomo => {
            let fit = fit_alpha(view)?;
            Ok((2.0 * (fit.alpha_hat - alpha0.radians())).sin())
        }
        ObservableId::Aco => acoplanarity_statistic(view, alpha0).map(|e| e.value),
    }
}
