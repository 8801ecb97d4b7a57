use num_complex::Complex64;

use super::poly::Poly;
use super::NumericError;

/// Scaled residual accepted for every returned root.
pub const ROOT_TOLERANCE: f64 = 1e-8;

const EPS: f64 = f64::EPSILON;

fn n1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// All roots of the polynomial with ascending coefficients `coeffs`.
///
/// Uses a balanced companion matrix reduced by single-shift complex QR, then
/// polishes every root with Newton steps on the original coefficients.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>, NumericError> {
    let p = Poly::new(coeffs.to_vec());
    let n = p.degree();
    if n == 0 {
        return Err(NumericError::DegreeTooLow);
    }
    if !p.is_finite() {
        return Err(NumericError::NonFinite);
    }
    let c = p.coeffs();
    let mut roots = Vec::with_capacity(n);
    // exact zero roots
    let mut lo = 0;
    while c[lo] == Complex64::new(0.0, 0.0) {
        roots.push(Complex64::new(0.0, 0.0));
        lo += 1;
    }
    let reduced = &c[lo..];
    let m = reduced.len() - 1;
    if m == 1 {
        roots.push(-reduced[0] / reduced[1]);
    } else if m > 1 {
        let lead = reduced[m];
        let mut h = vec![vec![Complex64::new(0.0, 0.0); m]; m];
        for j in 0..m {
            h[0][j] = -reduced[m - 1 - j] / lead;
        }
        for i in 1..m {
            h[i][i - 1] = Complex64::new(1.0, 0.0);
        }
        balance_complex(&mut h);
        let eig = hessenberg_eigenvalues(&mut h, 100 * m)?;
        roots.extend(eig);
    }
    let dp = p.derivative();
    for r in roots.iter_mut() {
        *r = polish(&p, &dp, *r);
    }
    for r in &roots {
        let scale = p.eval_scale(*r);
        let res = p.eval(*r).norm();
        if scale > 0.0 && res / scale > ROOT_TOLERANCE {
            return Err(NumericError::RootResidual { residual: res / scale });
        }
    }
    Ok(roots)
}

fn polish(p: &Poly, dp: &Poly, mut z: Complex64) -> Complex64 {
    let mut fz = p.eval(z).norm();
    for _ in 0..4 {
        let d = dp.eval(z);
        if d.norm() == 0.0 || fz == 0.0 {
            break;
        }
        let cand = z - p.eval(z) / d;
        let fc = p.eval(cand).norm();
        if fc < fz {
            z = cand;
            fz = fc;
        } else {
            break;
        }
    }
    z
}

/// Parlett–Reinsch diagonal balancing with radix 2.
fn balance_complex(a: &mut [Vec<Complex64>]) {
    let n = a.len();
    let radix = 2.0;
    let sqrdx = radix * radix;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += n1(a[j][i]);
                    r += n1(a[i][j]);
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / radix;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= radix;
                    c *= sqrdx;
                }
                g = r * radix;
                while c > g {
                    f /= radix;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[i][j] *= g;
                    }
                    for row in a.iter_mut() {
                        row[i] *= f;
                    }
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Eigenvalues of a complex upper-Hessenberg matrix by shifted QR with Givens rotations.
fn hessenberg_eigenvalues(h: &mut [Vec<Complex64>], cap: usize) -> Result<Vec<Complex64>, NumericError> {
    let n = h.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut eig = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut its = 0usize;
    let mut total = 0usize;
    loop {
        if hi == 0 {
            eig.push(h[0][0]);
            break;
        }
        let mut l = hi;
        while l > 0 {
            let s = n1(h[l - 1][l - 1]) + n1(h[l][l]);
            let sub = n1(h[l][l - 1]);
            if sub <= EPS * s || sub < f64::MIN_POSITIVE {
                h[l][l - 1] = zero;
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig.push(h[hi][hi]);
            hi -= 1;
            its = 0;
            continue;
        }
        total += 1;
        its += 1;
        if total > cap {
            return Err(NumericError::RootNonConvergence { degree: n });
        }
        let mu = if its % 11 == 0 {
            h[hi][hi] + Complex64::new(0.75, 0.5) * n1(h[hi][hi - 1])
        } else {
            wilkinson(h[hi - 1][hi - 1], h[hi - 1][hi], h[hi][hi - 1], h[hi][hi])
        };
        for k in l..=hi {
            h[k][k] -= mu;
        }
        let mut rots: Vec<(Complex64, Complex64)> = Vec::with_capacity(hi - l);
        for k in l..hi {
            let a = h[k][k];
            let b = h[k + 1][k];
            let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let (c1, c2) = if r == 0.0 {
                (Complex64::new(1.0, 0.0), zero)
            } else {
                (a / r, b / r)
            };
            for j in k..=hi {
                let x = h[k][j];
                let y = h[k + 1][j];
                h[k][j] = c1.conj() * x + c2.conj() * y;
                h[k + 1][j] = -c2 * x + c1 * y;
            }
            rots.push((c1, c2));
        }
        for (idx, &(c1, c2)) in rots.iter().enumerate() {
            let k = l + idx;
            let top = (k + 1).min(hi);
            for row in h.iter_mut().take(top + 1).skip(l) {
                let x = row[k];
                let y = row[k + 1];
                row[k] = x * c1 + y * c2;
                row[k + 1] = -x * c2.conj() + y * c1.conj();
            }
        }
        for k in l..=hi {
            h[k][k] += mu;
        }
    }
    Ok(eig)
}

fn wilkinson(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5) * ((a - d) * 0.5) + b * c;
    let sq = disc.sqrt();
    let l1 = half_tr + sq;
    let l2 = half_tr - sq;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}
