//! Event generation for τ⁺τ⁻ → π⁺ν̄ π⁻ν spin correlations.
//!
//! Pion directions are drawn from
//!
//! ```text
//! p(n⁺, n⁻) = [1 + n⁺ · M · n⁻] / (4π)²,   M = s · C(α)
//! ```
//!
//! with `s = −1` by default, which makes `−9⟨n_i⁺ n_j⁻⟩ = C_ij` hold on the
//! generated sample. Sampling is exact: n⁺ is uniform on the sphere and n⁻
//! is drawn from its conditional density `(1 + a·n⁻)/(4π)` with `a = Mᵀn⁺`,
//! as a polar cosine about `a` plus a uniform azimuth.
//!
//! Every event consumes exactly four `f64` draws (eight ChaCha words), so the
//! `k`-th event of a stream can be generated directly from word position
//! `8k`. Chunked generation therefore reproduces serial generation bit for bit.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spinstate::{correlation_matrix_closed, PhaseAngle};

const WORDS_PER_EVENT: u128 = 8;
const CHUNK: usize = 1 << 14;
const AXIS_TOL: f64 = 1e-9;

/// Sign `s` of the generation kernel `M = s·C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelSign {
    /// `M = −C`, estimator `C_ij = −9⟨n_i⁺ n_j⁻⟩`.
    #[default]
    MinusC,
    /// `M = +C`, estimator `C_ij = +9⟨n_i⁺ n_j⁻⟩`.
    PlusC,
}

impl KernelSign {
    pub fn sign(self) -> f64 {
        match self {
            KernelSign::MinusC => -1.0,
            KernelSign::PlusC => 1.0,
        }
    }

    /// Factor turning `⟨n_i⁺ n_j⁻⟩` into `C_ij`.
    pub fn estimator_scale(self) -> f64 {
        9.0 * self.sign()
    }

    pub fn tag(self) -> &'static str {
        match self {
            KernelSign::MinusC => "minus-C",
            KernelSign::PlusC => "plus-C",
        }
    }

    pub fn kernel(self, alpha: PhaseAngle) -> Matrix3<f64> {
        correlation_matrix_closed(alpha).matrix() * self.sign()
    }
}

impl fmt::Display for KernelSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for KernelSign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minus-C" | "minus-c" | "minus" | "-" => Ok(KernelSign::MinusC),
            "plus-C" | "plus-c" | "plus" | "+" => Ok(KernelSign::PlusC),
            _ => Err(Error::Parse(format!(
                "unknown kernel sign '{s}' (expected minus-C or plus-C)"
            ))),
        }
    }
}

/// Seed plus stream id of a ChaCha8 generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// Child stream labelled by `labels`; same seed, hashed stream id.
    pub fn derive(&self, labels: &[u64]) -> RngStream {
        let mut h = splitmix64(self.stream_id ^ 0x5eed_5eed_5eed_5eed);
        for &l in labels {
            h = splitmix64(h ^ l);
        }
        RngStream {
            seed: self.seed,
            stream_id: h,
        }
    }

    /// Generator positioned at the first draw of event `event_index`.
    pub fn generator_at(&self, event_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng.set_word_pos(event_index as u128 * WORDS_PER_EVENT);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Pion directions in the respective τ rest frames.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Event {
    pub n_plus: Vector3<f64>,
    pub n_minus: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventSample {
    pub events: Vec<Event>,
    pub alpha_true: PhaseAngle,
    pub seed: u64,
    pub stream_id: u64,
    pub kernel: KernelSign,
}

impl EventSample {
    pub fn count(&self) -> usize {
        self.events.len()
    }

    pub fn view(&self) -> SampleView<'_> {
        SampleView {
            events: &self.events,
            kernel: self.kernel,
        }
    }
}

/// Borrowed run of events with the kernel convention they were drawn under.
#[derive(Debug, Clone, Copy)]
pub struct SampleView<'a> {
    pub events: &'a [Event],
    pub kernel: KernelSign,
}

impl<'a> SampleView<'a> {
    pub fn new(events: &'a [Event], kernel: KernelSign) -> Self {
        SampleView { events, kernel }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Inverse-CDF draw of `c ∈ [−1, 1]` with density `(1 + a·c)/2`.
pub fn conditional_cosine_draw(a: f64, u: f64) -> Result<f64> {
    if !(a.abs() <= 1.0 + AXIS_TOL) {
        return Err(Error::NonPhysical(format!(
            "conditional slope |a| = {} exceeds 1",
            a.abs()
        )));
    }
    Ok(cosine_draw(a.clamp(-1.0, 1.0), u))
}

#[inline]
fn cosine_draw(a: f64, u: f64) -> f64 {
    // Root of a c² + 2c + (2 − a − 4u) = 0 in the form that stays finite at a = 0.
    let disc = (1.0 - a) * (1.0 - a) + 4.0 * a * u;
    ((4.0 * u - 2.0 + a) / (1.0 + disc.max(0.0).sqrt())).clamp(-1.0, 1.0)
}

#[inline]
fn draw_event(kernel: &Matrix3<f64>, rng: &mut ChaCha8Rng) -> Event {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let u4: f64 = rng.random();

    let z = 1.0 - 2.0 * u1;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let (sp, cp) = (TAU * u2).sin_cos();
    let n_plus = Vector3::new(r * cp, r * sp, z);

    let axis = kernel.tr_mul(&n_plus);
    let slope = axis.norm();
    assert!(
        slope <= 1.0 + AXIS_TOL,
        "kernel has a singular value above 1 (|Mᵀn⁺| = {slope})"
    );
    let (dir, slope) = if slope > 1e-300 {
        (axis / slope, slope.min(1.0))
    } else {
        (Vector3::z(), 0.0)
    };
    let c = cosine_draw(slope, u3);
    let s = (1.0 - c * c).max(0.0).sqrt();
    let (sq, cq) = (TAU * u4).sin_cos();

    // ẑ × dir keeps the frame covariant under rotations about ẑ.
    let perp = Vector3::new(-dir.y, dir.x, 0.0);
    let pn = perp.norm();
    let e1 = if pn > 1e-12 { perp / pn } else { Vector3::x() };
    let e2 = dir.cross(&e1);
    let n_minus = dir * c + (e1 * cq + e2 * sq) * s;

    Event { n_plus, n_minus }
}

/// Fills `out` with events `start .. start + out.len()` of `rng`.
pub fn generate_into(alpha: PhaseAngle, kernel: KernelSign, rng: &RngStream, start: u64, out: &mut [Event]) {
    let m = kernel.kernel(alpha);
    let mut g = rng.generator_at(start);
    for e in out.iter_mut() {
        *e = draw_event(&m, &mut g);
    }
}

pub fn sample_events(alpha: PhaseAngle, n: usize, rng: &RngStream) -> Result<EventSample> {
    sample_events_with(alpha, n, rng, KernelSign::default())
}

/// Chunked parallel generation.
pub fn sample_events_with(alpha: PhaseAngle, n: usize, rng: &RngStream, kernel: KernelSign) -> Result<EventSample> {
    if n == 0 {
        return Err(Error::SampleTooSmall { got: 0, need: 1 });
    }
    let mut events = vec![Event::default(); n];
    events
        .par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(k, chunk)| generate_into(alpha, kernel, rng, (k * CHUNK) as u64, chunk));
    Ok(EventSample {
        events,
        alpha_true: alpha,
        seed: rng.seed,
        stream_id: rng.stream_id,
        kernel,
    })
}

/// Single-pass generation with one generator, for cross-checking the chunked path.
pub fn sample_events_serial(alpha: PhaseAngle, n: usize, rng: &RngStream, kernel: KernelSign) -> Result<EventSample> {
    if n == 0 {
        return Err(Error::SampleTooSmall { got: 0, need: 1 });
    }
    let mut events = vec![Event::default(); n];
    generate_into(alpha, kernel, rng, 0, &mut events);
    Ok(EventSample {
        events,
        alpha_true: alpha,
        seed: rng.seed,
        stream_id: rng.stream_id,
        kernel,
    })
}

/// Signed azimuth from the transverse part of n⁺ to that of n⁻, in `[0, 2π)`.
///
/// With this orientation `⟨sin φ*⟩ = (π²/32) sin 2α` under the default kernel,
/// positive for small α > 0.
pub fn acoplanarity(event: &Event) -> Result<f64> {
    let (p, m) = (&event.n_plus, &event.n_minus);
    let tp = p.x.hypot(p.y);
    let tm = m.x.hypot(m.y);
    if tp < 1e-12 && tm < 1e-12 {
        return Err(Error::UndefinedPlane);
    }
    let cross = p.x * m.y - p.y * m.x;
    let dot = p.x * m.x + p.y * m.y;
    let phi = cross.atan2(dot);
    Ok(if phi < 0.0 { phi + TAU } else { phi })
}
