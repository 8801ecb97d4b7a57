use std::f64::consts::PI;

use num_complex::Complex64;

use super::{check, DelayMode, DelayModel, Frame, ModelError};
use crate::numeric::{Poly, RationalFunction};

/// Filter applied to the virtual resistance: a notch at ω1 in the stationary
/// frame, a high-pass in the rotating frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NotchSpec {
    pub zeta: f64,
    pub hpf_hz: f64,
}

impl Default for NotchSpec {
    fn default() -> Self {
        NotchSpec { zeta: 0.1, hpf_hz: 5.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CurrentController {
    QuasiPr { kpi: f64, kri: f64, omega_ri: f64 },
    Pi { kpi: f64, kii: f64 },
}

impl CurrentController {
    pub fn kpi(&self) -> f64 {
        match *self {
            CurrentController::QuasiPr { kpi, .. } | CurrentController::Pi { kpi, .. } => kpi,
        }
    }
}

/// `G_R(s) = (s² + ω1²)/(s² + 2ζω1·s + ω1²)`.
pub fn notch(zeta: f64, omega1: f64) -> RationalFunction {
    let w2 = omega1 * omega1;
    RationalFunction::from_real(&[w2, 0.0, 1.0], &[w2, 2.0 * zeta * omega1, 1.0]).expect("monic")
}

/// Virtual admittance `1/((Lv/ω1)·s + G_R·Rv)`.
///
/// The rotating variant is `1/((Lv/ω1)(s + jω1) + Rv·s/(s + ωh))`.
pub fn build_virtual_admittance(
    lv: f64,
    rv: f64,
    frame: Frame,
    filt: &NotchSpec,
    omega1: f64,
) -> Result<RationalFunction, ModelError> {
    check(lv > 0.0, "Lv must be positive")?;
    check(rv >= 0.0, "Rv must be non-negative")?;
    let l = lv / omega1;
    match frame {
        Frame::Stationary => {
            if rv == 0.0 {
                return Ok(RationalFunction::from_real(&[omega1 / lv], &[0.0, 1.0])?);
            }
            check(filt.zeta > 0.0, "notch damping must be positive")?;
            let w2 = omega1 * omega1;
            let q = Poly::from_real(&[w2, 2.0 * filt.zeta * omega1, 1.0]);
            let den = Poly::from_real(&[0.0, l]).mul(&q).add(&Poly::from_real(&[rv * w2, 0.0, rv]));
            Ok(RationalFunction::new(q, den)?)
        }
        Frame::Rotating => {
            let sig = Poly::new(vec![Complex64::new(0.0, omega1), Complex64::new(1.0, 0.0)]).scale(Complex64::new(l, 0.0));
            if rv == 0.0 {
                return Ok(RationalFunction::new(Poly::one(), sig)?);
            }
            check(filt.hpf_hz > 0.0, "HPF corner must be positive")?;
            let wh = 2.0 * PI * filt.hpf_hz;
            let p = Poly::from_real(&[wh, 1.0]);
            let den = sig.mul(&p).add(&Poly::from_real(&[0.0, rv]));
            Ok(RationalFunction::new(p, den)?)
        }
    }
}

/// Current controller. The rotating-frame quasi-PR is the frequency-translated stationary one.
pub fn build_current_controller(
    kind: &CurrentController,
    frame: Frame,
    omega1: f64,
) -> Result<RationalFunction, ModelError> {
    match *kind {
        CurrentController::QuasiPr { kpi, kri, omega_ri } => {
            check(kpi >= 0.0 && kri >= 0.0 && omega_ri >= 0.0, "controller gains must be non-negative")?;
            let w2 = omega1 * omega1;
            let g = RationalFunction::from_real(
                &[kpi * w2, 2.0 * omega_ri * kpi + kri, kpi],
                &[w2, 2.0 * omega_ri, 1.0],
            )?;
            Ok(match frame {
                Frame::Stationary => g,
                Frame::Rotating => g.translate_frequency(omega1),
            })
        }
        CurrentController::Pi { kpi, kii } => {
            check(kpi >= 0.0 && kii >= 0.0, "controller gains must be non-negative")?;
            if kii == 0.0 {
                return Ok(RationalFunction::constant(kpi));
            }
            Ok(RationalFunction::from_real(&[kii * omega1, kpi], &[0.0, 1.0])?)
        }
    }
}

/// Delay as a rational function: unity, or the order-n Padé approximant of `e^{−s·Td}`.
pub fn build_delay(model: &DelayModel) -> Result<RationalFunction, ModelError> {
    model.validate()?;
    match model.mode {
        DelayMode::Neglect => Ok(RationalFunction::constant(1.0)),
        DelayMode::Pade(_) if model.td == 0.0 => Ok(RationalFunction::constant(1.0)),
        DelayMode::Pade(n) => {
            let n = n as usize;
            let fact = |k: usize| (1..=k).fold(1.0, |a, b| a * b as f64);
            let mut num = Vec::with_capacity(n + 1);
            let mut den = Vec::with_capacity(n + 1);
            for k in 0..=n {
                let ck = fact(2 * n - k) * fact(n) / (fact(2 * n) * fact(k) * fact(n - k));
                let tk = model.td.powi(k as i32);
                den.push(ck * tk);
                num.push(if k % 2 == 0 { ck * tk } else { -ck * tk });
            }
            Ok(RationalFunction::from_real(&num, &den)?)
        }
    }
}
