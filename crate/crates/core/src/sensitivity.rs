//! Sub-sample significance: `Z = |μ − μ₀| / σ` over disjoint sub-samples of
//! a generated pool, the events needed for a 5σ observation, and √N
//! extrapolation to a target yield.
//!
//! A run at `(α, observable, n_sub)` generates `n_subsamples` sub-samples of
//! `n_sub` events each at α and the same number at the null angle, evaluates
//! the observable on each, and compares the two sets of values. Sub-sample
//! `k` is events `k·n_sub .. (k+1)·n_sub` of a single ChaCha stream, so the
//! pool is never held in memory.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{statistic, ObservableId, WcpProjection};
use crate::montecarlo::{generate_into, Event, KernelSign, RngStream, SampleView};
use crate::spinstate::PhaseAngle;

/// Projected HL-LHC yield of reconstructed π⁺π⁻ di-tau Higgs events.
pub const HL_LHC_YIELD: usize = 35_000;

/// Label of the spectrum-based QI pseudo-observable in scan output.
pub const QI_BLIND_ID: &str = "qi";

const POOL_TAG: u64 = 0x706f_6f6c;
const NULL_TAG: u64 = 0x6e75_6c6c;
const MAX_EXCLUDED_FRACTION: f64 = 0.10;
const CONFIRM_TOL: f64 = 0.10;

/// Which sub-sample spread enters the denominator of Z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpreadConvention {
    /// Spread of the observable over the null sub-samples.
    #[default]
    Null,
    /// Spread over the sub-samples at the signal point.
    Signal,
}

impl std::str::FromStr for SpreadConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "null" => Ok(SpreadConvention::Null),
            "signal" => Ok(SpreadConvention::Signal),
            _ => Err(Error::Parse(format!("unknown spread convention '{s}' (null, signal)"))),
        }
    }
}

impl SpreadConvention {
    pub fn tag(self) -> &'static str {
        match self {
            SpreadConvention::Null => "null",
            SpreadConvention::Signal => "signal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceConfig {
    /// Events per pool at the reference size; `pool_size / n_subsamples`
    /// is the reference sub-sample size.
    pub pool_size: usize,
    pub n_subsamples: usize,
    pub alpha_null: PhaseAngle,
    pub target_z: f64,
    /// Detector degradation; Z is divided by it.
    pub reduction_factor: f64,
    pub spread: SpreadConvention,
    pub wcp_projection: WcpProjection,
    pub kernel: KernelSign,
    /// Signal and null pools share one random stream.
    pub common_random_numbers: bool,
    /// Largest pool a confirmation run may generate.
    pub max_pool_events: usize,
    /// Below this reference Z the observable counts as blind (`N₅σ = ∞`).
    pub z_floor: f64,
    pub n_target: usize,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        SignificanceConfig {
            pool_size: 1_000_000,
            n_subsamples: 500,
            alpha_null: PhaseAngle::new(0.0),
            target_z: 5.0,
            reduction_factor: 1.0,
            spread: SpreadConvention::Null,
            wcp_projection: WcpProjection::Raw,
            kernel: KernelSign::MinusC,
            common_random_numbers: true,
            max_pool_events: 20_000_000,
            z_floor: 0.1,
            n_target: HL_LHC_YIELD,
        }
    }
}

impl SignificanceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_subsamples < 2 {
            return bad("n_subsamples must be at least 2");
        }
        if self.pool_size < self.n_subsamples {
            return bad("pool_size must be at least n_subsamples");
        }
        if !(self.reduction_factor >= 1.0 && self.reduction_factor.is_finite()) {
            return bad("reduction_factor must be a finite number >= 1");
        }
        if !(self.target_z > 0.0 && self.target_z.is_finite()) {
            return bad("target_z must be positive");
        }
        if !(self.z_floor >= 0.0) {
            return bad("z_floor must be nonnegative");
        }
        if !self.alpha_null.radians().is_finite() {
            return bad("alpha_null must be finite");
        }
        if self.n_target == 0 {
            return bad("n_target must be positive");
        }
        Ok(())
    }

    /// Largest sub-sample size the base pool affords.
    pub fn n_ref(&self) -> usize {
        self.pool_size / self.n_subsamples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsampleSummary {
    pub mean: f64,
    pub std_dev: f64,
    pub used: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub z: f64,
    pub mu: f64,
    pub mu0: f64,
    pub sigma: f64,
    pub signal: SubsampleSummary,
    pub null: SubsampleSummary,
    pub n_sub: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct N5Sigma {
    /// Events for `target_z`; `+∞` when the observable is blind at α.
    pub n5sigma: f64,
    pub n_ref: usize,
    pub z_ref: f64,
    /// Sub-sample size and Z of the confirmation run, if one was made.
    pub confirm: Option<(usize, f64)>,
}

/// `z_ref · √(n_target / n_ref)`.
pub fn extrapolate_z(z_ref: f64, n_ref: usize, n_target: usize) -> f64 {
    z_ref * (n_target as f64 / n_ref as f64).sqrt()
}

/// Significance engine that caches null-pool summaries across calls.
pub struct Engine {
    cfg: SignificanceConfig,
    rng: RngStream,
    null_cache: Mutex<HashMap<(u64, usize, ObservableId), SubsampleSummary>>,
}

impl Engine {
    pub fn new(cfg: SignificanceConfig, rng: RngStream) -> Result<Self> {
        cfg.validate()?;
        Ok(Engine {
            cfg,
            rng,
            null_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn rng(&self) -> &RngStream {
        &self.rng
    }

    pub fn config(&self) -> &SignificanceConfig {
        &self.cfg
    }

    fn signal_stream(&self, alpha: PhaseAngle, obs: ObservableId, n_sub: usize) -> RngStream {
        if self.cfg.common_random_numbers {
            self.rng.derive(&[POOL_TAG, n_sub as u64])
        } else {
            self.rng
                .derive(&[POOL_TAG, n_sub as u64, alpha.radians().to_bits(), obs as u64])
        }
    }

    fn null_stream(&self, n_sub: usize) -> RngStream {
        if self.cfg.common_random_numbers {
            self.rng.derive(&[POOL_TAG, n_sub as u64])
        } else {
            self.rng.derive(&[NULL_TAG, n_sub as u64])
        }
    }

    /// Observable values on each sub-sample; `None` marks a degenerate one.
    pub fn subsample_values(
        &self,
        alpha: PhaseAngle,
        obs: ObservableId,
        n_sub: usize,
        stream: &RngStream,
    ) -> Vec<Option<f64>> {
        let cfg = &self.cfg;
        (0..cfg.n_subsamples)
            .into_par_iter()
            .map_init(
                || vec![Event::default(); n_sub],
                |buf, k| {
                    generate_into(alpha, cfg.kernel, stream, (k * n_sub) as u64, buf);
                    statistic(obs, SampleView::new(buf, cfg.kernel), cfg.alpha_null, cfg.wcp_projection).ok()
                },
            )
            .collect()
    }

    fn summarize(&self, values: &[Option<f64>]) -> Result<SubsampleSummary> {
        let used: Vec<f64> = values.iter().flatten().copied().collect();
        let excluded = values.len() - used.len();
        if excluded as f64 > MAX_EXCLUDED_FRACTION * values.len() as f64 || used.len() < 2 {
            return Err(Error::TooManyExclusions {
                excluded,
                total: values.len(),
            });
        }
        let n = used.len() as f64;
        let mean = used.iter().sum::<f64>() / n;
        let var = used.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Ok(SubsampleSummary {
            mean,
            std_dev: var.sqrt(),
            used: used.len(),
            excluded,
        })
    }

    fn null_summary(&self, obs: ObservableId, n_sub: usize) -> Result<SubsampleSummary> {
        let stream = self.null_stream(n_sub);
        let key = (stream.stream_id, n_sub, obs);
        if let Some(s) = self.null_cache.lock().unwrap().get(&key) {
            return Ok(*s);
        }
        let values = self.subsample_values(self.cfg.alpha_null, obs, n_sub, &stream);
        let s = self.summarize(&values)?;
        self.null_cache.lock().unwrap().insert(key, s);
        Ok(s)
    }

    pub fn significance(&self, alpha: PhaseAngle, obs: ObservableId, n_sub: usize) -> Result<SignificanceResult> {
        if n_sub < obs.min_events() {
            return Err(Error::SampleTooSmall {
                got: n_sub,
                need: obs.min_events(),
            });
        }
        let null = self.null_summary(obs, n_sub)?;
        let signal = self.summarize(&self.subsample_values(
            alpha,
            obs,
            n_sub,
            &self.signal_stream(alpha, obs, n_sub),
        ))?;
        let sigma = match self.cfg.spread {
            SpreadConvention::Null => null.std_dev,
            SpreadConvention::Signal => signal.std_dev,
        };
        let diff = (signal.mean - null.mean).abs();
        let z = if sigma > 0.0 {
            diff / sigma
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Ok(SignificanceResult {
            z: z / self.cfg.reduction_factor,
            mu: signal.mean,
            mu0: null.mean,
            sigma,
            signal,
            null,
            n_sub,
        })
    }

    /// Events needed for `target_z`: √N scaling from the reference run plus
    /// one confirmation run at the predicted size.
    pub fn n5sigma(&self, alpha: PhaseAngle, obs: ObservableId) -> Result<N5Sigma> {
        let cfg = &self.cfg;
        let n_ref = cfg.n_ref().max(obs.min_events());
        let z_ref = self.significance(alpha, obs, n_ref)?.z;
        if !(z_ref >= cfg.z_floor) || z_ref == 0.0 {
            return Ok(N5Sigma {
                n5sigma: f64::INFINITY,
                n_ref,
                z_ref,
                confirm: None,
            });
        }
        let predicted = n_ref as f64 * (cfg.target_z / z_ref).powi(2);
        let n_pred = (predicted.ceil() as usize).max(obs.min_events());
        if n_pred.saturating_mul(cfg.n_subsamples) > cfg.max_pool_events {
            return Ok(N5Sigma {
                n5sigma: predicted,
                n_ref,
                z_ref,
                confirm: None,
            });
        }
        let z_c = self.significance(alpha, obs, n_pred)?.z;
        let n5 = if (z_c / cfg.target_z - 1.0).abs() <= CONFIRM_TOL || z_c == 0.0 {
            n_pred as f64
        } else {
            let repredicted = n_pred as f64 * (cfg.target_z / z_c).powi(2);
            0.5 * (n_pred as f64 + repredicted)
        };
        Ok(N5Sigma {
            n5sigma: n5,
            n_ref,
            z_ref,
            confirm: Some((n_pred, z_c)),
        })
    }

    pub fn scan(&self, observables: &[ObservableId], grid: &[PhaseAngle], include_qi: bool) -> Result<SensitivityCurve> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let cfg = &self.cfg;
        let mut rows = Vec::new();
        for &alpha in grid {
            for &obs in observables {
                let r = self.n5sigma(alpha, obs)?;
                rows.push(ScanRow {
                    alpha: alpha.radians(),
                    observable: obs.id().to_string(),
                    n_sub: r.n_ref,
                    z: r.z_ref,
                    n5sigma: r.n5sigma,
                    n_target: cfg.n_target,
                    z_target: extrapolate_z(r.z_ref, r.n_ref, cfg.n_target),
                    n_subsamples: cfg.n_subsamples,
                    pool_size: r.n_ref * cfg.n_subsamples,
                    seed: self.rng.seed,
                    reduction_factor: cfg.reduction_factor,
                });
            }
            if include_qi {
                // Spectrum-based measures do not depend on α, so there is no signal.
                rows.push(ScanRow {
                    alpha: alpha.radians(),
                    observable: QI_BLIND_ID.to_string(),
                    n_sub: cfg.n_ref(),
                    z: 0.0,
                    n5sigma: f64::INFINITY,
                    n_target: cfg.n_target,
                    z_target: 0.0,
                    n_subsamples: cfg.n_subsamples,
                    pool_size: cfg.n_ref() * cfg.n_subsamples,
                    seed: self.rng.seed,
                    reduction_factor: cfg.reduction_factor,
                });
            }
        }
        Ok(SensitivityCurve { rows })
    }
}

pub fn subsample_significance(
    alpha: PhaseAngle,
    observable: ObservableId,
    n_sub: usize,
    cfg: &SignificanceConfig,
    rng: &RngStream,
) -> Result<SignificanceResult> {
    Engine::new(*cfg, *rng)?.significance(alpha, observable, n_sub)
}

pub fn n5sigma(alpha: PhaseAngle, observable: ObservableId, cfg: &SignificanceConfig, rng: &RngStream) -> Result<N5Sigma> {
    Engine::new(*cfg, *rng)?.n5sigma(alpha, observable)
}

pub fn scan(
    observables: &[ObservableId],
    grid: &[PhaseAngle],
    cfg: &SignificanceConfig,
    rng: &RngStream,
) -> Result<SensitivityCurve> {
    Engine::new(*cfg, *rng)?.scan(observables, grid, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub alpha: f64,
    pub observable: String,
    /// Reference sub-sample size at which `z` was measured.
    pub n_sub: usize,
    #[serde(rename = "Z", with = "crate::io::float_or_inf")]
    pub z: f64,
    #[serde(rename = "N5sigma", with = "crate::io::float_or_inf")]
    pub n5sigma: f64,
    pub n_target: usize,
    #[serde(rename = "Z_target", with = "crate::io::float_or_inf")]
    pub z_target: f64,
    pub n_subsamples: usize,
    pub pool_size: usize,
    pub seed: u64,
    pub reduction_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub rows: Vec<ScanRow>,
}

impl SensitivityCurve {
    pub fn alphas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.alpha) {
                out.push(r.alpha);
            }
        }
        out
    }

    pub fn series(&self, observable: &str) -> Vec<&ScanRow> {
        self.rows.iter().filter(|r| r.observable == observable).collect()
    }

    pub fn z_values(&self, observable: &str) -> Vec<f64> {
        self.series(observable).iter().map(|r| r.z).collect()
    }

    pub fn n5sigma_values(&self, observable: &str) -> Vec<f64> {
        self.series(observable).iter().map(|r| r.n5sigma).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

    fn small_cfg() -> SignificanceConfig {
        SignificanceConfig {
            pool_size: 200_000,
            n_subsamples: 200,
            ..Default::default()
        }
    }

    #[test]
    fn extrapolation_examples() {
        assert_abs_diff_eq!(extrapolate_z(5.0, 893, 35_000), 31.3, epsilon = 0.05);
        assert_abs_diff_eq!(extrapolate_z(5.0, 12_769, 35_000), 8.28, epsilon = 0.01);
        assert_eq!(extrapolate_z(3.7, 1234, 1234), 3.7);
    }

    #[test]
    fn config_validation() {
        assert!(SignificanceConfig::default().validate().is_ok());
        let bad = [
            SignificanceConfig { n_subsamples: 1, ..Default::default() },
            SignificanceConfig { pool_size: 10, n_subsamples: 20, ..Default::default() },
            SignificanceConfig { reduction_factor: 0.5, ..Default::default() },
            SignificanceConfig { target_z: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(Engine::new(cfg, RngStream::new(1)).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn null_point_has_no_signal() {
        let rng = RngStream::new(3);
        for obs in [ObservableId::Qcp, ObservableId::Wcp, ObservableId::Aco] {
            let z = subsample_significance(PhaseAngle::new(0.0), obs, 500, &small_cfg(), &rng).unwrap().z;
            assert!(z < 3.0, "{obs}: {z}");
            let cfg = SignificanceConfig { common_random_numbers: false, ..small_cfg() };
            let z = subsample_significance(PhaseAngle::new(0.0), obs, 500, &cfg, &rng).unwrap().z;
            assert!(z < 3.0, "{obs} independent pools: {z}");
        }
    }

    #[test]
    fn qcp_clifford_node_and_peak() {
        let eng = Engine::new(small_cfg(), RngStream::new(4)).unwrap();
        let peak = eng.significance(PhaseAngle::new(FRAC_PI_8), ObservableId::Qcp, 900).unwrap();
        assert!((peak.z - 5.0).abs() < 1.0, "{peak:?}");
        let node = eng.significance(PhaseAngle::new(FRAC_PI_4), ObservableId::Qcp, 900).unwrap();
        assert!(node.z < 0.5, "{node:?}");
    }

    #[test]
    fn reduction_divides_exactly() {
        let rng = RngStream::new(5);
        let a = subsample_significance(PhaseAngle::new(0.3), ObservableId::Qcp, 400, &small_cfg(), &rng).unwrap();
        let cfg4 = SignificanceConfig { reduction_factor: 4.0, ..small_cfg() };
        let b = subsample_significance(PhaseAngle::new(0.3), ObservableId::Qcp, 400, &cfg4, &rng).unwrap();
        assert_eq!(b.z, a.z / 4.0);
    }

    #[test]
    fn blind_point_is_infinite() {
        let r = n5sigma(PhaseAngle::new(0.0), ObservableId::Qcp, &small_cfg(), &RngStream::new(6)).unwrap();
        assert!(r.n5sigma.is_infinite());
    }

    #[test]
    fn exclusions_counted() {
        let eng = Engine::new(small_cfg(), RngStream::new(7)).unwrap();
        let values = vec![Some(1.0), None, Some(2.0), Some(3.0)];
        assert!(matches!(eng.summarize(&values), Err(Error::TooManyExclusions { excluded: 1, total: 4 })));
        let mut values = vec![Some(1.0); 19];
        values.push(None);
        let s = eng.summarize(&values).unwrap();
        assert_eq!((s.used, s.excluded), (19, 1));
    }

    #[test]
    fn scan_includes_blind_curve() {
        let cfg = SignificanceConfig {
            pool_size: 20_000,
            n_subsamples: 20,
            ..Default::default()
        };
        let grid = [0.0, FRAC_PI_8].map(PhaseAngle::new);
        let curve = scan(&[ObservableId::Qcp], &grid, &cfg, &RngStream::new(8)).unwrap();
        assert_eq!(curve.rows.len(), 4);
        assert_eq!(curve.z_values(QI_BLIND_ID), vec![0.0, 0.0]);
        assert!(curve.n5sigma_values("qcp")[0].is_infinite());
        assert!(curve.n5sigma_values("qcp")[1].is_finite());
        assert_eq!(curve.alphas(), vec![0.0, FRAC_PI_8]);
        assert!(scan(&[ObservableId::Qcp], &[], &cfg, &RngStream::new(8)).is_err());
    }
}
