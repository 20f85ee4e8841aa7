use std::f64::consts::SQRT_2;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use proptest::prelude::*;

use swpe_core::analyzer::{AnalyzerSetting, Outcome};
use swpe_core::link::p_link_multiplexed;
use swpe_core::phase_matching::pmc_residual;
use swpe_core::state::CMatrix4;
use swpe_core::stats::{
    bell_s_exact, exact_frequencies, fidelity, fidelity_pure, project_physical, reconstruct_from_frequencies,
    BellSettings,
};
use swpe_core::{
    feedback_success, projector, validate_density, werner_state, DensityMatrix, FeedbackConfig,
};

fn density_from(entries: &[f64]) -> DensityMatrix {
    let g = Matrix4::from_iterator((0..16).map(|i| Complex64::new(entries[2 * i], entries[2 * i + 1])));
    let m: CMatrix4 = g * g.adjoint();
    let tr = m.trace().re;
    let m = m.unscale(tr);
    DensityMatrix::from_matrix_unchecked((m + m.adjoint()).scale(0.5))
}

fn random_density() -> impl Strategy<Value = DensityMatrix> {
    prop::collection::vec(-1.0f64..1.0, 32)
        .prop_filter("non-degenerate", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(|v| density_from(&v))
}

fn random_pure() -> impl Strategy<Value = Vector4<Complex64>> {
    prop::collection::vec(-1.0f64..1.0, 8)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(|v| Vector4::from_iterator((0..4).map(|i| Complex64::new(v[2 * i], v[2 * i + 1]))).normalize())
}

fn max_dev(a: &CMatrix4, b: &CMatrix4) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn tsirelson_bound_holds(rho in random_density()) {
        let s = bell_s_exact(&rho, &BellSettings::default()).unwrap();
        prop_assert!(s <= 2.0 * SQRT_2 + 1e-9);
    }

    #[test]
    fn werner_states_are_valid(theta in 0.0f64..=90.0, v in 0.0f64..=1.0) {
        let rho = werner_state(theta, v).unwrap();
        prop_assert!(validate_density(rho.matrix()).is_empty());
    }

    #[test]
    fn projectors_resolve_identity(angle in 0.0f64..180.0) {
        for setting in [AnalyzerSetting::Linear(angle), AnalyzerSetting::Circular] {
            let t = projector(setting, Outcome::Transmit).unwrap();
            let r = projector(setting, Outcome::Reflect).unwrap();
            let sum = t + r;
            for i in 0..2 {
                for j in 0..2 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((sum[(i, j)] - Complex64::from(want)).norm() <= 1e-15);
                }
            }
        }
    }

    #[test]
    fn feedback_equals_multiplexed(eta in 0.0f64..=1.0, chi in 0.0f64..=1.0, n in 1u64..200) {
        let fb = FeedbackConfig { eta, chi, n, delta_t: 1.0 };
        let a = feedback_success(&fb).unwrap().exact;
        let b = p_link_multiplexed(eta * chi, n as u32).exact;
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn multiplexed_probability_is_bounded(p in 1e-9f64..=1.0, m in 1u32..100) {
        let pr = p_link_multiplexed(p, m);
        prop_assert!(pr.exact <= pr.linear.min(1.0) + 1e-15);
        prop_assert!(p_link_multiplexed(p, m + 1).exact >= pr.exact);
        prop_assert!(p_link_multiplexed((p * 1.01).min(1.0), m).exact >= pr.exact);
        if pr.linear <= 0.1 {
            prop_assert!((pr.linear - pr.exact) / pr.exact <= 0.05);
        }
    }

    #[test]
    fn pmc_mirror_symmetry(w in -89.0f64..89.0, r in -89.0f64..89.0, s in -89.0f64..89.0) {
        prop_assert!((pmc_residual(w, r, s) - pmc_residual(-w, -r, -s)).abs() < 1e-14);
    }

    #[test]
    fn pmc_matched_is_exact(a in -89.0f64..89.0) {
        prop_assert_eq!(pmc_residual(a, a, 0.0), 0.0);
    }

    #[test]
    fn pmc_factorization(w in -89.0f64..89.0, r in -89.0f64..89.0) {
        // ‖k‖² − 1 = 8 sin(w/2) cos(r/2) sin((w − r)/2) with the Stokes mode on axis.
        let (a, b) = (w.to_radians(), r.to_radians());
        let f = 8.0 * (a / 2.0).sin() * (b / 2.0).cos() * ((a - b) / 2.0).sin();
        let oracle = ((1.0 + f).sqrt() - 1.0).abs();
        prop_assert!((pmc_residual(w, r, 0.0) - oracle).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tomography_inverts_exact_data(rho in random_density()) {
        let raw = reconstruct_from_frequencies(&exact_frequencies(&rho)).unwrap();
        prop_assert!(max_dev(raw.matrix(), rho.matrix()) <= 1e-10);
    }

    #[test]
    fn projection_is_idempotent_and_trace_preserving(rho in random_density(), shift in 0.0f64..0.3) {
        // Push the spectrum down while keeping unit trace.
        let m = rho.matrix().scale(1.0 + 4.0 * shift) - CMatrix4::identity().scale(shift);
        let raw = DensityMatrix::from_matrix_unchecked(m);
        let once = project_physical(&raw).unwrap();
        prop_assert!(validate_density(once.matrix()).is_empty());
        prop_assert!((once.trace() - 1.0).abs() <= 1e-12);
        let twice = project_physical(&once).unwrap();
        prop_assert!(max_dev(once.matrix(), twice.matrix()) <= 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric(a in random_density(), b in random_density()) {
        let ab = fidelity(&a, &b).unwrap();
        let ba = fidelity(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-10);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn fidelity_matches_pure_formula(rho in random_density(), psi in random_pure()) {
        let general = fidelity(&rho, &DensityMatrix::from_pure(&psi)).unwrap();
        let pure = fidelity_pure(&rho, &psi).unwrap();
        prop_assert!((general - pure).abs() <= 1e-10);
    }
}
