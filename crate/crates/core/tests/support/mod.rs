//! Strategies and checks shared by the property suite and the acceptance target.

use std::f64::consts::PI;

use gfmlab_core::numeric::*;
use gfmlab_core::torque::embed_dq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const W1: f64 = 100.0 * PI;

pub type Check = Result<(), TestCaseError>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn complex_in(r: f64) -> impl Strategy<Value = Complex64> {
    (-r..r, -r..r).prop_map(|(a, b)| c(a, b))
}

/// Real-coefficient rational function in the per-unit variable `s/ω1`, monic denominator.
pub fn real_rf(max_deg: usize) -> impl Strategy<Value = RationalFunction> {
    (1..=max_deg)
        .prop_flat_map(|deg| (prop::collection::vec(-2.0..2.0f64, deg + 1), prop::collection::vec(0.2..3.0f64, deg)))
        .prop_map(|(num, den)| {
            let scale = |v: &[f64]| v.iter().enumerate().map(|(k, x)| x / W1.powi(k as i32)).collect::<Vec<_>>();
            let mut den = den;
            den.push(1.0);
            RationalFunction::from_real(&scale(&num), &scale(&den)).unwrap()
        })
}

pub fn root_sets() -> impl Strategy<Value = (Vec<Complex64>, Complex64)> {
    (
        (1..=10usize).prop_flat_map(|n| prop::collection::vec(complex_in(5.0), n)),
        complex_in(3.0).prop_filter("nonzero", |z| z.norm() > 0.1),
    )
}

pub fn matrices_8x8() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 64)
}

fn pairing_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm() / x.norm().max(1.0)))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Characteristic polynomial by the Faddeev–LeVerrier recursion.
fn char_poly(a: &DMatrix<f64>) -> Vec<Complex64> {
    let n = a.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + DMatrix::identity(n, n) * coeffs[n + 1 - k];
        coeffs[n - k] = -(a * &m).trace() / k as f64;
    }
    coeffs.into_iter().map(|x| c(x, 0.0)).collect()
}

fn reconstruction_error(p: &Poly) -> Result<f64, TestCaseError> {
    let got = polynomial_roots(p.coeffs()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(got.len(), p.degree());
    let back = Poly::from_roots(&got).scale(p.leading());
    let scale = p.coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(p.coeffs().iter().zip(back.coeffs()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale)
}

/// Roots of a polynomial built from known roots multiply back to its coefficients.
pub fn check_root_reconstruction(roots: &[Complex64], lead: Complex64) -> Check {
    let err = reconstruction_error(&Poly::from_roots(roots).scale(lead))?;
    prop_assert!(err <= 1e-6, "relative coefficient error {err:e}");
    Ok(())
}

pub fn check_coefficient_reconstruction(coeffs: &[f64]) -> Check {
    let mut coeffs = coeffs.to_vec();
    let last = coeffs.len() - 1;
    coeffs[last] += 4.0f64.copysign(coeffs[last]);
    let err = reconstruction_error(&Poly::from_real(&coeffs))?;
    prop_assert!(err <= 1e-6, "relative coefficient error {err:e}");
    Ok(())
}

pub fn check_eigen_vs_char_poly(entries: &[f64]) -> Check {
    let a = DMatrix::from_row_slice(8, 8, entries);
    let oracle = polynomial_roots(&char_poly(&a)).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let got = eigenvalues(&a).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(got.len(), 8);
    let err = pairing_error(&got, &oracle);
    prop_assert!(err <= 1e-6, "eigenvalue mismatch {err:e}");
    Ok(())
}

/// Split dq parts and the 2x2 real realization reproduce `[[Re, −Im], [Im, Re]]`
/// of the complex response at every verdict-grid frequency.
pub fn check_embedding(z: &RationalFunction) -> Check {
    let dq = embed_dq(z, W1).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let ss = realize_complex(&z.translate_frequency(W1)).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for w in hz_log_grid(1.0, 100.0, 400) {
        let s = c(0.0, w);
        // Zdq(s) = Z(s + jω1); its coefficient conjugate is Z(s − jω1)
        let up = z.evaluate(s + c(0.0, W1)).unwrap();
        let down = z.evaluate(s - c(0.0, W1)).unwrap();
        let zd = 0.5 * (up + down);
        let zq = (up - down) / c(0.0, 2.0);
        let want = [[zd, -zq], [zq, zd]];
        let m = dq.matrix(s).unwrap();
        let r = ss.freq_response(s).unwrap();
        let norm = up.norm().max(down.norm());
        for i in 0..2 {
            for k in 0..2 {
                prop_assert!((m[i][k] - want[i][k]).norm() <= 1e-9 * norm, "split at {w}: {} vs {}", m[i][k], want[i][k]);
                prop_assert!((r[(i, k)] - want[i][k]).norm() <= 1e-9 * norm, "realization at {w}");
            }
        }
        prop_assert!(rel(dq.evaluate(s).unwrap(), up) <= 1e-9);
    }
    Ok(())
}

pub fn check_translation(z: &RationalFunction, s: Complex64) -> Check {
    let want = z.evaluate(s + c(0.0, W1)).unwrap();
    let err = rel(z.translate_frequency(W1).evaluate(s).unwrap(), want);
    prop_assert!(err <= 1e-10, "translation error {err:e}");
    Ok(())
}
