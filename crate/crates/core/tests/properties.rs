mod support;

use gfmlab_core::numeric::RationalFunction;
use proptest::prelude::*;
use support::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn roots_reconstruct_coefficients((roots, lead) in root_sets()) {
        check_root_reconstruction(&roots, lead)?;
    }

    #[test]
    fn random_coefficient_roots_reconstruct(coeffs in (2..=11usize).prop_flat_map(|n| prop::collection::vec(-3.0..3.0f64, n))) {
        check_coefficient_reconstruction(&coeffs)?;
    }

    #[test]
    fn eigenvalues_match_characteristic_polynomial(entries in matrices_8x8()) {
        check_eigen_vs_char_poly(&entries)?;
    }

    #[test]
    fn real_embedding_equals_complex_response(z in real_rf(4)) {
        check_embedding(&z)?;
    }

    #[test]
    fn frequency_translation_is_shifted_evaluation(z in real_rf(4), s in complex_in(2.0 * W1)) {
        check_translation(&z, s)?;
    }

    #[test]
    fn real_functions_are_conjugate_symmetric(z in real_rf(4), s in complex_in(2.0 * W1)) {
        let a = z.evaluate(s.conj()).unwrap();
        prop_assert!(rel(a, z.evaluate(s).unwrap().conj()) <= 1e-12);
    }

    #[test]
    fn negative_feedback_is_pointwise(g in real_rf(3), h in real_rf(3), s in complex_in(2.0 * W1)) {
        let cl = RationalFunction::negative_feedback(&g, &h).unwrap();
        let (gs, hs) = (g.evaluate(s).unwrap(), h.evaluate(s).unwrap());
        prop_assume!((1.0 + gs * hs).norm() > 1e-3);
        prop_assert!(rel(cl.evaluate(s).unwrap(), gs / (1.0 + gs * hs)) <= 1e-10);
    }
}
