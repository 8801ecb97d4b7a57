use std::f64::consts::PI;

use num_complex::Complex64;

use super::blocks::build_delay;
use super::{Frame, InnerLoopConfig, ModelError};
use crate::numeric::{Poly, RationalFunction, ResponseTable};

/// Thevenin form of the converter seen from the PCC: `V = Geq·E − Zeq·i`.
///
/// `zeq` and `geq` share their denominator. Functions live in the domain of `frame`.
#[derive(Clone, Debug, PartialEq)]
pub struct Equivalent {
    pub frame: Frame,
    pub omega1: f64,
    pub zeq: RationalFunction,
    pub geq: RationalFunction,
    /// Delay in the same domain as `zeq`.
    pub gd: RationalFunction,
}

impl Equivalent {
    /// Point of the Laplace variable that corresponds to fundamental-frequency steady state.
    pub fn steady_point(&self) -> Complex64 {
        match self.frame {
            Frame::Stationary => Complex64::new(0.0, self.omega1),
            Frame::Rotating => Complex64::new(0.0, 0.0),
        }
    }

    /// `(Zeq, Geq, Gd)` at steady state.
    pub fn steady(&self) -> Result<(Complex64, Complex64, Complex64), ModelError> {
        let s = self.steady_point();
        Ok((self.zeq.evaluate(s)?, self.geq.evaluate(s)?, self.gd.evaluate(s)?))
    }

    /// Rotating-frame (dq-domain) counterpart.
    pub fn to_dq(&self) -> Equivalent {
        match self.frame {
            Frame::Rotating => self.clone(),
            Frame::Stationary => Equivalent {
                frame: Frame::Rotating,
                omega1: self.omega1,
                zeq: self.zeq.translate_frequency(self.omega1),
                geq: self.geq.translate_frequency(self.omega1),
                gd: self.gd.translate_frequency(self.omega1),
            },
        }
    }
}

/// `Zeq = (Gd·Gi·Fcc + (Lf/ω1)·s)/(Gd(Gi·Gv·Fvc − Fv) + 1)` and
/// `Geq = Gd·Gi·Gv/(same denominator)`, formed over one common denominator.
pub fn derive_equivalent_impedance(
    cfg: &InnerLoopConfig,
    lf: f64,
    omega1: f64,
) -> Result<Equivalent, ModelError> {
    cfg.validate()?;
    let gd_ab = build_delay(&cfg.gd)?;
    let (gd, sigma) = match cfg.frame {
        Frame::Stationary => (gd_ab, Poly::s()),
        Frame::Rotating => (
            gd_ab.translate_frequency(omega1),
            Poly::new(vec![Complex64::new(0.0, omega1), Complex64::new(1.0, 0.0)]),
        ),
    };
    let (nd, dd) = (gd.num(), gd.den());
    let (ni, di) = (cfg.gi.num(), cfg.gi.den());
    let (nv, dv) = (cfg.gv.num(), cfg.gv.den());
    let (nc, dc) = (cfg.fcc.num(), cfg.fcc.den());
    let (nf, df) = (cfg.fv.num(), cfg.fv.den());
    let lf_s = sigma.scale(Complex64::new(lf / omega1, 0.0));

    // when Fvc = 0 the voltage controller leaves the Zeq denominator
    let base = dd.mul(di).mul(dc).mul(df);
    let pi = if cfg.fvc { base.mul(dv) } else { base.clone() };
    let fwd = nd.mul(ni).mul(nc).mul(df);
    let num_z = if cfg.fvc { fwd.mul(dv) } else { fwd }.add(&lf_s.mul(&pi));
    let fv_term = nd.mul(nf).mul(di).mul(dc);
    let fv_term = if cfg.fvc { fv_term.mul(dv) } else { fv_term };
    let mut den_z = pi.sub(&fv_term);
    if cfg.fvc {
        den_z = den_z.add(&nd.mul(ni).mul(nv).mul(dc).mul(df));
    }
    if den_z.is_zero() {
        return Err(ModelError::DegenerateDenominator);
    }
    let num_g = nd.mul(ni).mul(nv).mul(dc).mul(df);
    let (num_g, den_g) = if cfg.fvc { (num_g, den_z.clone()) } else { (num_g, den_z.mul(dv)) };
    Ok(Equivalent {
        frame: cfg.frame,
        omega1,
        zeq: RationalFunction::new(num_z, den_z)?,
        geq: RationalFunction::new(num_g, den_g)?,
        gd,
    })
}

/// Sampled impedance with the low-frequency resistance metric.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpedanceProfile {
    pub table: ResponseTable,
    /// `Re Zeq(j·2π·5)`.
    pub req_5hz: f64,
}

impl ImpedanceProfile {
    pub fn req(&self) -> Vec<f64> {
        self.table.values.iter().map(|z| z.re).collect()
    }

    pub fn xeq(&self) -> Vec<f64> {
        self.table.values.iter().map(|z| z.im).collect()
    }
}

pub fn impedance_profile(zeq: &RationalFunction, omega: &[f64]) -> Result<ImpedanceProfile, ModelError> {
    let table = ResponseTable::sample(zeq, omega)?;
    let req_5hz = zeq.at_jw(2.0 * PI * 5.0)?.re;
    Ok(ImpedanceProfile { table, req_5hz })
}
