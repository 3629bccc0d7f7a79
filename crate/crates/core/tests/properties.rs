use nalgebra::{Complex, Rotation3, Vector3};
use proptest::prelude::*;

use cpmagic::estimators::{estimate_m2, estimate_wcp, WCP_MAX, WCP_MIN};
use cpmagic::magic::M2_MAX;
use cpmagic::montecarlo::{sample_events, RngStream};
use cpmagic::qi_measures::{chsh_max, concurrence, negativity};
use cpmagic::spinstate::{correlation_matrix_closed, density_matrix, CorrelationMatrix, PhaseAngle, SpinState};

fn unit_axis() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(z, phi)| {
        let r = (1.0 - z * z).sqrt();
        Vector3::new(r * phi.cos(), r * phi.sin(), z)
    })
}

proptest! {
    #[test]
    fn chsh_invariant_under_local_rotations(
        a in 0.0f64..6.3,
        ax1 in unit_axis(), t1 in -3.0f64..3.0,
        ax2 in unit_axis(), t2 in -3.0f64..3.0,
    ) {
        let c = correlation_matrix_closed(PhaseAngle::new(a));
        let r1 = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(ax1), t1);
        let r2 = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(ax2), t2);
        let rotated = CorrelationMatrix(r1.matrix() * c.matrix() * r2.matrix().transpose());
        prop_assert!((chsh_max(&rotated) - chsh_max(&c)).abs() < 1e-12);
    }

    #[test]
    fn pure_state_negativity_is_half_concurrence(
        re in proptest::array::uniform4(-1.0f64..1.0),
        im in proptest::array::uniform4(-1.0f64..1.0),
    ) {
        let norm: f64 = re.iter().chain(im.iter()).map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let amps: [Complex<f64>; 4] = std::array::from_fn(|k| Complex::new(re[k], im[k]) / norm);
        // |a d − b c| is the pure-state concurrence over two.
        let oracle = 2.0 * (amps[0] * amps[3] - amps[1] * amps[2]).norm();
        let rho = density_matrix(&SpinState::from_amplitudes(amps)).unwrap();
        prop_assert!((concurrence(&rho) - oracle).abs() < 1e-6);
        prop_assert!((negativity(&rho) - 0.5 * oracle).abs() < 1e-9);
    }

    #[test]
    fn projected_estimates_stay_in_range(a in 0.0f64..3.2, seed in 0u64..1_000, n in 2usize..400) {
        let s = sample_events(PhaseAngle::new(a), n, &RngStream::new(seed)).unwrap();
        let w = estimate_wcp(s.view()).unwrap();
        prop_assert!((WCP_MIN..=WCP_MAX).contains(&w.value));
        prop_assert_eq!(w.clamped, w.value != w.raw_value);
        let m = estimate_m2(s.view()).unwrap();
        prop_assert!(m.value >= 0.0 && m.value <= M2_MAX + 1e-15);
    }
}
