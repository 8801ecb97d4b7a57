use num_complex::Complex64;

use super::NumericError;

/// Maximum polynomial degree accepted by constructors and composition.
pub const MAX_DEGREE: usize = 64;

/// Complex polynomial stored with ascending powers of `s`.
///
/// Trailing exact zeros are trimmed, so the last coefficient is nonzero
/// unless the polynomial is identically zero (stored as `[0]`).
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == Complex64::new(0.0, 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        Poly { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn constant(c: Complex64) -> Self {
        Poly::new(vec![c])
    }

    /// The monomial `s`.
    pub fn s() -> Self {
        Poly::from_real(&[0.0, 1.0])
    }

    pub fn zero() -> Self {
        Poly::new(vec![])
    }

    pub fn one() -> Self {
        Poly::from_real(&[1.0])
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut p = Poly::one();
        for &r in roots {
            p = p.mul(&Poly::new(vec![-r, Complex64::new(1.0, 0.0)]));
        }
        p
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == Complex64::new(0.0, 0.0)
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// Sum of `|c_k|·|s|^k`, the natural scale of a Horner evaluation at `s`.
    pub fn eval_scale(&self, s: Complex64) -> f64 {
        let r = s.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let z = Complex64::new(0.0, 0.0);
        Poly::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(z) + other.coeffs.get(k).copied().unwrap_or(z)
                })
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, k: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// `p(s + a)` by binomial expansion of every power.
    pub fn shift(&self, a: Complex64) -> Poly {
        let n = self.coeffs.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        // binom holds C(i, k) for the current i
        let mut binom = vec![0.0f64; n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            binom[i] = 1.0;
            for k in (1..i).rev() {
                binom[k] += binom[k - 1];
            }
            binom[0] = 1.0;
            let mut apow = Complex64::new(1.0, 0.0);
            for k in (0..=i).rev() {
                out[k] += c * binom[k] * apow;
                apow *= a;
            }
        }
        Poly::new(out)
    }

    /// Polynomial with conjugated coefficients, so that `p̄(s) = conj(p(conj(s)))`.
    pub fn conj_coeffs(&self) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c.conj()).collect())
    }

    /// True when every imaginary part is below `tol` relative to the largest coefficient.
    pub fn is_real(&self, tol: f64) -> bool {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        self.coeffs.iter().all(|c| c.im.abs() <= tol * scale.max(f64::MIN_POSITIVE))
    }

    pub fn real_part(&self) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| Complex64::new(c.re, 0.0)).collect())
    }

    pub fn check_degree(&self) -> Result<(), NumericError> {
        if self.degree() > MAX_DEGREE {
            Err(NumericError::DegreeCap { degree: self.degree() })
        } else {
            Ok(())
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// `a − b` with coefficients that cancel to rounding level set to exact zero.
///
/// `rel` is measured against `|a_k| + |b_k|` per coefficient.
pub fn sub_cancelling(a: &Poly, b: &Poly, rel: f64) -> Poly {
    let n = a.coeffs.len().max(b.coeffs.len());
    let z = Complex64::new(0.0, 0.0);
    Poly::new(
        (0..n)
            .map(|k| {
                let x = a.coeffs.get(k).copied().unwrap_or(z);
                let y = b.coeffs.get(k).copied().unwrap_or(z);
                let d = x - y;
                if d.norm() <= rel * (x.norm() + y.norm()) {
                    z
                } else {
                    d
                }
            })
            .collect(),
    )
}
