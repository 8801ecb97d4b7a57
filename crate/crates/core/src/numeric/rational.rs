use num_complex::Complex64;

use super::poly::Poly;
use super::roots::polynomial_roots;
use super::NumericError;

/// Ratio of complex polynomials in the Laplace variable.
///
/// The denominator is normalized so its leading coefficient is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalFunction {
    num: Poly,
    den: Poly,
}

/// A zero and a pole closer than the requested tolerance.
#[derive(Clone, Copy, Debug)]
pub struct NearCancellation {
    pub zero: Complex64,
    pub pole: Complex64,
}

impl RationalFunction {
    pub fn new(num: Poly, den: Poly) -> Result<Self, NumericError> {
        if den.is_zero() {
            return Err(NumericError::ZeroDenominator);
        }
        num.check_degree()?;
        den.check_degree()?;
        if !num.is_finite() || !den.is_finite() {
            return Err(NumericError::NonFinite);
        }
        let lead = den.leading();
        let inv = Complex64::new(1.0, 0.0) / lead;
        let mut den = den.scale(inv);
        let mut c = den.coeffs().to_vec();
        *c.last_mut().unwrap() = Complex64::new(1.0, 0.0);
        den = Poly::new(c);
        Ok(RationalFunction { num: num.scale(inv), den })
    }

    /// Real-coefficient convenience constructor (ascending powers).
    pub fn from_real(num: &[f64], den: &[f64]) -> Result<Self, NumericError> {
        Self::new(Poly::from_real(num), Poly::from_real(den))
    }

    pub fn constant(k: f64) -> Self {
        Self::constant_complex(Complex64::new(k, 0.0))
    }

    pub fn constant_complex(k: Complex64) -> Self {
        RationalFunction { num: Poly::constant(k), den: Poly::one() }
    }

    /// The Laplace variable `s`.
    pub fn s() -> Self {
        RationalFunction { num: Poly::s(), den: Poly::one() }
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Relative degree is non-negative.
    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn evaluate(&self, s: Complex64) -> Result<Complex64, NumericError> {
        let d = self.den.eval(s);
        if d.norm() <= 1e-300 {
            return Err(NumericError::PoleAtEvaluation { re: s.re, im: s.im });
        }
        Ok(self.num.eval(s) / d)
    }

    /// Frequency response at `jω`.
    pub fn at_jw(&self, omega: f64) -> Result<Complex64, NumericError> {
        self.evaluate(Complex64::new(0.0, omega))
    }

    pub fn add(&self, other: &Self) -> Result<Self, NumericError> {
        if self.den == other.den {
            return Self::new(self.num.add(&other.num), self.den.clone());
        }
        Self::new(
            self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self, NumericError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        RationalFunction { num: self.num.scale(Complex64::new(-1.0, 0.0)), den: self.den.clone() }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, NumericError> {
        Self::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn scale(&self, k: Complex64) -> Self {
        RationalFunction { num: self.num.scale(k), den: self.den.clone() }
    }

    pub fn reciprocal(&self) -> Result<Self, NumericError> {
        if self.num.is_zero() {
            return Err(NumericError::ZeroDenominator);
        }
        Self::new(self.den.clone(), self.num.clone())
    }

    pub fn div(&self, other: &Self) -> Result<Self, NumericError> {
        if other.num.is_zero() {
            return Err(NumericError::ZeroDenominator);
        }
        Self::new(self.num.mul(&other.den), self.den.mul(&other.num))
    }

    /// `G/(1 + G·H)`.
    pub fn negative_feedback(g: &Self, h: &Self) -> Result<Self, NumericError> {
        Self::new(
            g.num.mul(&h.den),
            g.den.mul(&h.den).add(&g.num.mul(&h.num)),
        )
    }

    /// Substitutes `s → s + jω1`.
    pub fn translate_frequency(&self, omega1: f64) -> Self {
        let a = Complex64::new(0.0, omega1);
        // Shifting keeps the leading coefficient, so normalization is preserved.
        RationalFunction { num: self.num.shift(a), den: self.den.shift(a) }
    }

    /// Function with conjugated coefficients.
    pub fn conj_coeffs(&self) -> Self {
        RationalFunction { num: self.num.conj_coeffs(), den: self.den.conj_coeffs() }
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.num.is_real(tol) && self.den.is_real(tol)
    }

    /// Zero/pole pairs closer than `rel` relative to the pole magnitude (absolute near the origin).
    pub fn near_cancellations(&self, rel: f64) -> Result<Vec<NearCancellation>, NumericError> {
        if self.num.degree() == 0 || self.den.degree() == 0 {
            return Ok(Vec::new());
        }
        let zeros = polynomial_roots(self.num.coeffs())?;
        let poles = polynomial_roots(self.den.coeffs())?;
        Ok(pair_close(&zeros, &poles, rel)
            .into_iter()
            .map(|(i, j)| NearCancellation { zero: zeros[i], pole: poles[j] })
            .collect())
    }

    /// Removes near-cancelling zero/pole pairs and rebuilds the polynomials from the
    /// remaining roots. Only used on explicit request.
    pub fn remove_near_cancellations(&self, rel: f64) -> Result<Self, NumericError> {
        if self.num.degree() == 0 || self.den.degree() == 0 {
            return Ok(self.clone());
        }
        let zeros = polynomial_roots(self.num.coeffs())?;
        let poles = polynomial_roots(self.den.coeffs())?;
        let pairs = pair_close(&zeros, &poles, rel);
        if pairs.is_empty() {
            return Ok(self.clone());
        }
        let keep_z: Vec<Complex64> = zeros
            .iter()
            .enumerate()
            .filter(|(i, _)| !pairs.iter().any(|p| p.0 == *i))
            .map(|(_, &z)| z)
            .collect();
        let keep_p: Vec<Complex64> = poles
            .iter()
            .enumerate()
            .filter(|(j, _)| !pairs.iter().any(|p| p.1 == *j))
            .map(|(_, &p)| p)
            .collect();
        let num = Poly::from_roots(&keep_z).scale(self.num.leading());
        Self::new(num, Poly::from_roots(&keep_p))
    }
}

fn pair_close(zeros: &[Complex64], poles: &[Complex64], rel: f64) -> Vec<(usize, usize)> {
    let mut used = vec![false; poles.len()];
    let mut out = Vec::new();
    for (i, z) in zeros.iter().enumerate() {
        let best = poles
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, p)| (j, (z - p).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((j, d)) = best {
            if d <= rel * poles[j].norm().max(1.0) {
                used[j] = true;
                out.push((i, j));
            }
        }
    }
    out
}
