//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI, SQRT_2};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::Complex;

use cpmagic::cli::{reproduce, ReproduceConfig};
use cpmagic::estimators::ObservableId;
use cpmagic::magic::{q_cp_from_correlations, sre_m2, sre_m2_closed, w_cp_from_correlations, MagicReport};
use cpmagic::montecarlo::{sample_events, RngStream};
use cpmagic::qi_measures::MeasureReport;
use cpmagic::sensitivity::{extrapolate_z, Engine, N5Sigma, SignificanceConfig};
use cpmagic::spinstate::{correlation_matrix, density_matrix, state_vector, PhaseAngle};

type C = Complex<f64>;

const SEED: u64 = 7_349_201;
const TARGET_YIELD: usize = 35_000;

// ---- independent state-vector oracle ----

fn psi(alpha: f64) -> [C; 4] {
    let h = 1.0 / SQRT_2;
    [
        C::new(0.0, 0.0),
        C::new(h, 0.0),
        C::from_polar(h, 2.0 * alpha),
        C::new(0.0, 0.0),
    ]
}

fn sigma(k: usize) -> [[C; 2]; 2] {
    let (o, l, i) = (C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 1.0));
    match k {
        0 => [[l, o], [o, l]],
        1 => [[o, l], [l, o]],
        2 => [[o, -i], [i, o]],
        _ => [[l, o], [o, -l]],
    }
}

/// ⟨ψ|σ_i ⊗ σ_j|ψ⟩ by explicit index sums.
fn pauli_expect(v: &[C; 4], i: usize, j: usize) -> f64 {
    let (a, b) = (sigma(i), sigma(j));
    let mut acc = C::new(0.0, 0.0);
    for r1 in 0..2 {
        for r2 in 0..2 {
            for c1 in 0..2 {
                for c2 in 0..2 {
                    acc += v[2 * r1 + r2].conj() * a[r1][c1] * b[r2][c2] * v[2 * c1 + c2];
                }
            }
        }
    }
    acc.re
}

fn oracle_xi(alpha: f64) -> f64 {
    let v = psi(alpha);
    let mut s = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            s += pauli_expect(&v, i, j).powi(4);
        }
    }
    s
}

fn oracle_c(alpha: f64) -> [[f64; 3]; 3] {
    let (s, c) = (2.0 * alpha).sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, -1.0]]
}

fn alpha_grid(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| 2.0 * PI * k as f64 / n as f64)
}

// ---- criteria ----

type Outcome = (bool, String);

fn closed_form_sre() -> Outcome {
    let t = Instant::now();
    let mut dev_oracle: f64 = 0.0;
    let mut dev_sum: f64 = 0.0;
    for a in alpha_grid(720) {
        let closed = sre_m2_closed(PhaseAngle::new(a));
        dev_oracle = dev_oracle.max((closed - (4.0 / oracle_xi(a)).log2()).abs());
        let summed = sre_m2(&density_matrix(&state_vector(PhaseAngle::new(a))).unwrap()).unwrap();
        dev_sum = dev_sum.max((closed - summed).abs());
    }
    let peak = sre_m2_closed(PhaseAngle::new(FRAC_PI_8));
    let peak_ok = (peak - 0.415_037_499_3).abs() < 1e-10 && (peak - (4.0f64 / 3.0).log2()).abs() <= 1e-12;
    let zeros = (0..=8).all(|k| sre_m2_closed(PhaseAngle::new(k as f64 * FRAC_PI_4)) == 0.0);
    let secs = t.elapsed().as_secs_f64();
    (
        dev_oracle <= 1e-12 && dev_sum <= 1e-12 && peak_ok && zeros && secs < 1.0,
        format!(
            "vs oracle {dev_oracle:.1e}, vs Pauli sum {dev_sum:.1e}, M2(pi/8)={peak:.12}, exact zeros {zeros}, {secs:.2}s"
        ),
    )
}

fn cp_blindness() -> Outcome {
    let t = Instant::now();
    let expected = [1.0, 0.5, 1.0, 2.0 * SQRT_2, 4.0];
    let mut worst: f64 = 0.0;
    for a in alpha_grid(256) {
        let r = MeasureReport::at(PhaseAngle::new(a)).unwrap();
        let got = [r.concurrence, r.negativity, r.entropy_bits, r.chsh_max, r.qfi];
        for (g, e) in got.iter().zip(expected) {
            worst = worst.max((g - e).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    (worst <= 1e-9 && secs < 5.0, format!("max deviation {worst:.1e} over 256 angles, {secs:.2}s"))
}

fn correlation_identities() -> Outcome {
    let mut worst_c: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for a in alpha_grid(720) {
        let v = psi(a);
        let c = correlation_matrix(&density_matrix(&state_vector(PhaseAngle::new(a))).unwrap());
        let closed = oracle_c(a);
        for i in 0..3 {
            for j in 0..3 {
                worst_c = worst_c
                    .max((c.get(i, j) - pauli_expect(&v, i + 1, j + 1)).abs())
                    .max((c.get(i, j) - closed[i][j]).abs());
            }
        }
        let xi = 4.0 - (4.0 * a).sin().powi(2);
        let m = MagicReport::at(PhaseAngle::new(a));
        worst = worst
            .max((m.xi - xi).abs())
            .max((oracle_xi(a) - xi).abs())
            .max((q_cp_from_correlations(&c).unwrap() - (4.0 * a).sin()).abs())
            .max((w_cp_from_correlations(&c).unwrap() - xi).abs());
    }
    (
        worst_c <= 1e-12 && worst <= 1e-12,
        format!("C(alpha) dev {worst_c:.1e}, Xi/Q/W dev {worst:.1e}"),
    )
}

fn mc_moments() -> Outcome {
    let t = Instant::now();
    let n = 1_000_000usize;
    let mut worst_pull: f64 = 0.0;
    let mut worst_se: f64 = 0.0;
    for (k, a) in [0.0, FRAC_PI_8, 0.3].into_iter().enumerate() {
        let s = sample_events(PhaseAngle::new(a), n, &RngStream::with_stream(SEED, 100 + k as u64)).unwrap();
        let c = oracle_c(a);
        for i in 0..3 {
            for j in 0..3 {
                let (mut sum, mut sum_sq) = (0.0, 0.0);
                for e in &s.events {
                    let x = -9.0 * e.n_plus[i] * e.n_minus[j];
                    sum += x;
                    sum_sq += x * x;
                }
                let mean = sum / n as f64;
                let var = (sum_sq / n as f64 - mean * mean) * n as f64 / (n - 1) as f64;
                let se = (var / n as f64).sqrt();
                worst_se = worst_se.max(se * (n as f64).sqrt());
                worst_pull = worst_pull.max((mean - c[i][j]).abs() / se);
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    // Uncorrelated entries sit exactly at the 3/√N bound; allow for noise in the sample spread.
    (
        worst_pull <= 4.0 && worst_se <= 3.0 * 1.01 && secs < 60.0,
        format!("max pull {worst_pull:.2} se, max se*sqrt(N) {worst_se:.3}, {secs:.1}s"),
    )
}

fn engine() -> &'static Engine {
    static ENGINE: OnceLock<Engine> = OnceLock::new();
    ENGINE.get_or_init(|| Engine::new(SignificanceConfig::default(), RngStream::new(SEED)).unwrap())
}

const FOUR: [ObservableId; 4] = [ObservableId::Tomo, ObservableId::Aco, ObservableId::Qcp, ObservableId::Wcp];

fn at_peak() -> &'static [(ObservableId, N5Sigma)] {
    static PEAK: OnceLock<Vec<(ObservableId, N5Sigma)>> = OnceLock::new();
    PEAK.get_or_init(|| {
        FOUR.iter()
            .map(|&o| (o, engine().n5sigma(PhaseAngle::new(FRAC_PI_8), o).unwrap()))
            .collect()
    })
}

fn peak_of(o: ObservableId) -> N5Sigma {
    at_peak().iter().find(|(x, _)| *x == o).unwrap().1
}

fn within_rel(x: f64, reference: f64, tol: f64) -> bool {
    (x / reference - 1.0).abs() <= tol
}

fn within_factor(x: f64, reference: f64, f: f64) -> bool {
    x >= reference / f && x <= reference * f
}

fn n5sigma_at_peak() -> Outcome {
    let t = Instant::now();
    let (q, w) = (peak_of(ObservableId::Qcp).n5sigma, peak_of(ObservableId::Wcp).n5sigma);
    let (tomo, aco) = (peak_of(ObservableId::Tomo).n5sigma, peak_of(ObservableId::Aco).n5sigma);
    let ratio = w / q;
    let ok = within_rel(q, 893.0, 0.15)
        && within_rel(w, 12_769.0, 0.25)
        && within_rel(ratio, 14.3, 0.25)
        && within_factor(tomo, 178.0, 2.0)
        && within_factor(aco, 218.0, 2.0);
    let secs = t.elapsed().as_secs_f64();
    (
        ok && secs < 1800.0,
        format!("qcp {q:.0}, wcp {w:.0}, ratio {ratio:.2}, tomo {tomo:.0}, aco {aco:.0}, {secs:.1}s"),
    )
}

fn significance_at_target_yield() -> Outcome {
    let z = |o| {
        let r = peak_of(o);
        extrapolate_z(r.z_ref, r.n_ref, TARGET_YIELD)
    };
    let (q, w, tomo, aco) = (
        z(ObservableId::Qcp),
        z(ObservableId::Wcp),
        z(ObservableId::Tomo),
        z(ObservableId::Aco),
    );
    let ok = within_rel(q, 31.0, 0.20)
        && within_rel(w, 8.3, 0.30)
        && within_factor(tomo, 70.0, 2.0)
        && within_factor(aco, 63.0, 2.0);

    let reduced = Engine::new(
        SignificanceConfig {
            reduction_factor: 4.0,
            ..SignificanceConfig::default()
        },
        RngStream::new(SEED),
    )
    .unwrap();
    let exact = FOUR.iter().all(|&o| {
        let r = peak_of(o);
        reduced.significance(PhaseAngle::new(FRAC_PI_8), o, r.n_ref).unwrap().z == r.z_ref / 4.0
    });
    (
        ok && exact,
        format!("qcp {q:.1}, wcp {w:.2}, tomo {tomo:.1}, aco {aco:.1}; reduction by 4 exact: {exact}"),
    )
}

fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

fn signal_order() -> Outcome {
    let alphas = [0.02, 0.04, 0.08];
    let n = engine().config().n_ref();
    let power = |o| {
        let shifts: Vec<f64> = alphas
            .iter()
            .map(|&a| {
                let r = engine().significance(PhaseAngle::new(a), o, n).unwrap();
                (r.mu - r.mu0).abs()
            })
            .collect();
        log_slope(&alphas, &shifts)
    };
    let (pq, pw) = (power(ObservableId::Qcp), power(ObservableId::Wcp));
    (
        (pq - 1.0).abs() <= 0.2 && (pw - 2.0).abs() <= 0.3,
        format!("qcp power {pq:.3}, 4-wcp power {pw:.3}"),
    )
}

fn node_structure() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for &o in &FOUR {
        let nodes: &[f64] = match o {
            ObservableId::Qcp | ObservableId::Wcp => &[0.0, FRAC_PI_4, FRAC_PI_2],
            _ => &[0.0, FRAC_PI_2],
        };
        let peak = peak_of(o).n5sigma;
        let mut least = f64::INFINITY;
        for &node in nodes {
            for a in [node - 0.02, node, node + 0.02] {
                if (0.0..=FRAC_PI_2 + 1e-12).contains(&a) {
                    least = least.min(engine().n5sigma(PhaseAngle::new(a), o).unwrap().n5sigma);
                }
            }
        }
        ok &= least > 10.0 * peak;
        detail.push(format!("{} {:.0}x", o.id(), least / peak));
    }
    (ok, format!("smallest N5sigma near nodes over pi/8 value: {}", detail.join(", ")))
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let cfg = ReproduceConfig {
        seed: 99,
        events: 20_000,
        pool: 100_000,
        subsamples: 100,
        scan_grid: [0.0, FRAC_PI_8, FRAC_PI_4].map(PhaseAngle::new).to_vec(),
        reduction_factor: 4.0,
    };
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    reproduce(&cfg, d1.path()).unwrap();
    reproduce(&cfg, d2.path()).unwrap();
    let (a, b) = (read_dir_sorted(d1.path()), read_dir_sorted(d2.path()));
    let n = a.len();
    let same = a == b && n >= 8;
    (same, format!("{n} files byte-identical across two runs: {same}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("closed-form SRE", closed_form_sre),
        ("CP-blindness of spectrum measures", cp_blindness),
        ("correlation and Xi identities", correlation_identities),
        ("Monte Carlo moment contract", mc_moments),
        ("N5sigma at alpha = pi/8", n5sigma_at_peak),
        ("significance at 35k events", significance_at_target_yield),
        ("signal order near alpha = 0", signal_order),
        ("node structure", node_structure),
        ("determinism of reproduce", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let (ok, detail) = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| (false, "panicked".to_string()));
        if !ok {
            failed += 1;
        }
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
