use num_complex::Complex64;

use super::{CircuitParams, Equivalent, ModelError, OuterLoopParams};
use crate::numeric::J;

const MAX_ITER: usize = 50;
const TOL: f64 = 1e-9;
const STRICT: f64 = 1e-13;

/// Steady state in the grid-aligned dq frame (`Vg = Vg_mag + j0`).
#[derive(Clone, Debug, PartialEq)]
pub struct OperatingPoint {
    pub theta0: f64,
    pub e0: f64,
    pub vd0: f64,
    pub vq0: f64,
    pub id0: f64,
    pub iq0: f64,
    pub uid0: f64,
    pub uiq0: f64,
    pub ed0: f64,
    pub eq0: f64,
    /// Controller output ahead of the delay.
    pub ucd0: f64,
    pub ucq0: f64,
    pub vg0: f64,
    pub p0: f64,
    pub q0: f64,
    pub iterations: usize,
}

impl OperatingPoint {
    pub fn v(&self) -> Complex64 {
        Complex64::new(self.vd0, self.vq0)
    }

    pub fn i(&self) -> Complex64 {
        Complex64::new(self.id0, self.iq0)
    }

    pub fn ui(&self) -> Complex64 {
        Complex64::new(self.uid0, self.uiq0)
    }

    pub fn uc(&self) -> Complex64 {
        Complex64::new(self.ucd0, self.ucq0)
    }

    pub fn emf(&self) -> Complex64 {
        Complex64::new(self.ed0, self.eq0)
    }
}

struct Phasors {
    z: Complex64,
    g: Complex64,
    gd: Complex64,
    lg: f64,
    lf: f64,
    vg: Complex64,
}

impl Phasors {
    fn new(circuit: &CircuitParams, eq: &Equivalent) -> Result<Self, ModelError> {
        let (z, g, gd) = eq.steady()?;
        if (z + J * circuit.lg).norm() < 1e-12 {
            return Err(ModelError::DegenerateDenominator);
        }
        if gd.norm() < 1e-12 {
            return Err(ModelError::DegenerateDenominator);
        }
        Ok(Phasors { z, g, gd, lg: circuit.lg, lf: circuit.lf, vg: Complex64::new(circuit.vg_mag, 0.0) })
    }

    /// Current, PCC voltage and their derivatives with respect to θ and E.
    fn eval(&self, theta: f64, e: f64) -> [Complex64; 6] {
        let rot = Complex64::from_polar(1.0, theta);
        let zt = self.z + J * self.lg;
        let i = (self.g * e * rot - self.vg) / zt;
        let v = self.vg + J * self.lg * i;
        let di_dth = self.g * J * e * rot / zt;
        let di_de = self.g * rot / zt;
        [i, v, di_dth, di_de, J * self.lg * di_dth, J * self.lg * di_de]
    }

    fn finish(&self, theta: f64, e: f64, iterations: usize) -> OperatingPoint {
        let [i, v, ..] = self.eval(theta, e);
        let ui = v + J * self.lf * i;
        let uc = ui / self.gd;
        let s = v * i.conj();
        OperatingPoint {
            theta0: theta,
            e0: e,
            vd0: v.re,
            vq0: v.im,
            id0: i.re,
            iq0: i.im,
            uid0: ui.re,
            uiq0: ui.im,
            ed0: e * theta.cos(),
            eq0: e * theta.sin(),
            ucd0: uc.re,
            ucq0: uc.im,
            vg0: self.vg.re,
            p0: s.re,
            q0: s.im,
            iterations,
        }
    }
}

fn power_and_jacobian(ph: &Phasors, theta: f64, e: f64) -> (f64, f64, [f64; 2], [f64; 2]) {
    let [i, v, di_t, di_e, dv_t, dv_e] = ph.eval(theta, e);
    let p = (v * i.conj()).re;
    let vm = v.norm();
    let dp = |dv: Complex64, di: Complex64| (dv * i.conj() + v * di.conj()).re;
    let dvm = |dv: Complex64| (v.conj() * dv).re / vm.max(1e-300);
    (p, vm, [dp(dv_t, di_t), dp(dv_e, di_e)], [dvm(dv_t), dvm(dv_e)])
}

/// Newton iteration on `(θ0, E0)` enforcing `P = Pref` and `|V| = Vref` at the PCC.
///
/// Without grid inductance the PCC voltage is pinned to the grid, so `Vref` must equal
/// `Vg_mag` and the EMF magnitude is taken as `Vref`.
pub fn solve_operating_point(
    circuit: &CircuitParams,
    outer: &OuterLoopParams,
    eq: &Equivalent,
) -> Result<OperatingPoint, ModelError> {
    circuit.validate()?;
    outer.validate()?;
    let ph = Phasors::new(circuit, eq)?;
    let pref = outer.pref;
    let vref = outer.vref;

    if circuit.lg == 0.0 {
        if (vref - circuit.vg_mag).abs() > 1e-12 {
            return Err(ModelError::VoltageInfeasible);
        }
        let th0 = (pref * ph.z.im / (vref * vref)).clamp(-0.98, 0.98).asin();
        return newton_1d(&ph, th0, |ph, th| {
            let (p, _, dp, _) = power_and_jacobian(ph, th, vref);
            (p - pref, dp[0])
        })
        .map(|(th, it)| ph.finish(th, vref, it));
    }

    let limit = vref * circuit.vg_mag / circuit.lg;
    if pref.abs() >= limit {
        return Err(ModelError::TransferLimit { pref, limit });
    }

    let xeq = ph.z.im;
    let smax = 80f64.to_radians().sin();
    let mut th = (pref * (circuit.lg + xeq) / (vref * circuit.vg_mag)).clamp(-smax, smax).asin();
    let mut e = vref;
    let residual = |th: f64, e: f64| {
        let (p, vm, _, _) = power_and_jacobian(&ph, th, e);
        [p - pref, vm - vref]
    };
    let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
    let mut r = residual(th, e);
    for it in 0..MAX_ITER {
        if norm(r) < STRICT {
            return Ok(ph.finish(th, e, it));
        }
        let (_, _, dp, dv) = power_and_jacobian(&ph, th, e);
        let det = dp[0] * dv[1] - dp[1] * dv[0];
        if !det.is_finite() || det.abs() < 1e-300 {
            break;
        }
        let dth = (r[0] * dv[1] - r[1] * dp[1]) / det;
        let de = (dp[0] * r[1] - dv[0] * r[0]) / det;
        let mut step = 1.0;
        loop {
            let nr = residual(th - step * dth, e - step * de);
            if norm(nr) < norm(r) || step < 1e-4 {
                th -= step * dth;
                e -= step * de;
                r = nr;
                break;
            }
            step *= 0.5;
        }
    }
    if norm(r) < TOL {
        return Ok(ph.finish(th, e, MAX_ITER));
    }
    Err(ModelError::NonConvergence { iterations: MAX_ITER, residual: norm(r) })
}

/// Re-solves the EMF magnitude for `|V| = Vref` with the angle held at `theta`.
pub fn solve_angle_fixed(
    circuit: &CircuitParams,
    outer: &OuterLoopParams,
    eq: &Equivalent,
    theta: f64,
) -> Result<OperatingPoint, ModelError> {
    circuit.validate()?;
    outer.validate()?;
    let ph = Phasors::new(circuit, eq)?;
    if circuit.lg == 0.0 {
        return Ok(ph.finish(theta, outer.vref, 0));
    }
    let vref = outer.vref;
    newton_1d(&ph, vref, |ph, e| {
        let (_, vm, _, dv) = power_and_jacobian(ph, theta, e);
        (vm - vref, dv[1])
    })
    .map(|(e, it)| ph.finish(theta, e, it))
}

fn newton_1d(
    ph: &Phasors,
    x0: f64,
    f: impl Fn(&Phasors, f64) -> (f64, f64),
) -> Result<(f64, usize), ModelError> {
    let mut x = x0;
    let mut last = f64::INFINITY;
    for it in 0..MAX_ITER {
        let (r, d) = f(ph, x);
        last = r.abs();
        if last < STRICT {
            return Ok((x, it));
        }
        if d == 0.0 || !d.is_finite() {
            break;
        }
        x -= r / d;
    }
    if last < TOL {
        return Ok((x, MAX_ITER));
    }
    Err(ModelError::NonConvergence { iterations: MAX_ITER, residual: last })
}
