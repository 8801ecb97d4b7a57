//! Complex torque coefficients and the net-damping criterion.
//!
//! The electrical torque is the `Δθ → ΔP` response of the converter and grid,
//! the mechanical torque follows from the synchronization law. Coefficients are
//! split as `K(ω) + jω·D(ω)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::converter::{CircuitParams, Equivalent, ModelError, OperatingPoint};
use crate::numeric::{hz_log_grid, Poly, RationalFunction, ResponseTable, J};

/// `Zdq(s) = Zd(s) + j·Zq(s)` with real-coefficient parts over a shared denominator.
#[derive(Clone, Debug, PartialEq)]
pub struct DqImpedance {
    pub zd: RationalFunction,
    pub zq: RationalFunction,
}

impl DqImpedance {
    /// Splits a complex-coefficient dq-domain function into its real-coefficient parts:
    /// `Zd = (Z + Z̄)/2`, `Zq = (Z − Z̄)/(2j)`, `Z̄` the coefficient conjugate.
    pub fn split(zdq: &RationalFunction) -> Result<DqImpedance, ModelError> {
        let (a, q) = split_parts(zdq.num(), zdq.den());
        let re = Poly::new(a.coeffs().iter().map(|c| Complex64::new(c.re, 0.0)).collect());
        let im = Poly::new(a.coeffs().iter().map(|c| Complex64::new(c.im, 0.0)).collect());
        Ok(DqImpedance { zd: RationalFunction::new(re, q.clone())?, zq: RationalFunction::new(im, q)? })
    }

    /// Series inductance `L` seen in the dq frame: `Zd = (L/ω1)·s`, `Zq = L`.
    pub fn inductive(l: f64, omega1: f64) -> DqImpedance {
        DqImpedance {
            zd: RationalFunction::from_real(&[0.0, l / omega1], &[1.0]).expect("constant denominator"),
            zq: RationalFunction::constant(l),
        }
    }

    /// `Zd(s) + j·Zq(s)`.
    pub fn evaluate(&self, s: Complex64) -> Result<Complex64, ModelError> {
        Ok(self.zd.evaluate(s)? + J * self.zq.evaluate(s)?)
    }

    /// `[[Zd, −Zq], [Zq, Zd]]` at `s`.
    pub fn matrix(&self, s: Complex64) -> Result<[[Complex64; 2]; 2], ModelError> {
        let d = self.zd.evaluate(s)?;
        let q = self.zq.evaluate(s)?;
        Ok([[d, -q], [q, d]])
    }
}

/// For `Z = N/D`: returns `(N·D̄, D·D̄)` with the second factor made exactly real.
fn split_parts(n: &Poly, d: &Poly) -> (Poly, Poly) {
    let a = n.mul(&d.conj_coeffs());
    let q = d.mul(&d.conj_coeffs()).real_part();
    (a, q)
}

/// dq components of a stationary-frame real-coefficient impedance.
pub fn embed_dq(zab: &RationalFunction, omega1: f64) -> Result<DqImpedance, ModelError> {
    if !zab.is_real(1e-12) {
        return Err(ModelError::InvalidParameter("stationary-frame impedance must have real coefficients".into()));
    }
    DqImpedance::split(&zab.translate_frequency(omega1))
}

/// Quasi-static EMF power behind `Z + Zg` with all impedances frozen at `s`.
pub fn steady_state_power(
    theta: f64,
    e: f64,
    vg: f64,
    z: &DqImpedance,
    zg: &DqImpedance,
    s: Complex64,
) -> Result<Complex64, ModelError> {
    let r = z.zd.evaluate(s)? + zg.zd.evaluate(s)?;
    let x = z.zq.evaluate(s)? + zg.zq.evaluate(s)?;
    let den = r * r + x * x;
    if den.norm() < 1e-300 {
        return Err(ModelError::SingularResponse { omega: s.im });
    }
    Ok((e * vg * theta.sin() * x + (e * e - e * vg * theta.cos()) * r) / den)
}

/// θ-derivative of [`steady_state_power`] as a function of `s`:
/// `E0·Vg0·[(Zq + Zgq)·cosθ0 + (Zd + Zgd)·sinθ0] / [(Zd + Zgd)² + (Zq + Zgq)²]`.
pub fn quasi_static_power_angle(
    theta0: f64,
    e0: f64,
    vg0: f64,
    z: &DqImpedance,
    zg: &DqImpedance,
) -> Result<RationalFunction, ModelError> {
    let r = z.zd.add(&zg.zd)?;
    let x = z.zq.add(&zg.zq)?;
    // both sums share one denominator because the parts of each impedance do
    let (a, b, q) = if r.den() == x.den() {
        (r.num().clone(), x.num().clone(), r.den().clone())
    } else {
        (r.num().mul(x.den()), x.num().mul(r.den()), r.den().mul(x.den()))
    };
    let k = Complex64::new(e0 * vg0, 0.0);
    let c = Complex64::new(theta0.cos(), 0.0);
    let sn = Complex64::new(theta0.sin(), 0.0);
    let num = b.scale(c).add(&a.scale(sn)).mul(&q).scale(k);
    let den = a.mul(&a).add(&b.mul(&b));
    if den.is_zero() {
        return Err(ModelError::DegenerateDenominator);
    }
    Ok(RationalFunction::new(num, den)?)
}

/// Small-signal circuit responses of the converter on its grid.
///
/// With `W = Geq/(Zeq + Zg)` in the dq frame, an EMF perturbation `ΔE` produces
/// `ΔI = W·ΔE` and `ΔV = Zg·ΔI`; the PCC power and voltage magnitude follow by
/// linearizing `P = Vᵀ·I` and `|V|`.
#[derive(Clone, Debug)]
pub struct PowerAngleModel {
    w: DqImpedance,
    zg: DqImpedance,
    v0: [f64; 2],
    i0: [f64; 2],
    /// `ΔE` direction per radian of angle, `[−Eq0, Ed0]`.
    dir_theta: [f64; 2],
    /// `ΔE` direction per unit of magnitude, `[cosθ0, sinθ0]`.
    dir_mag: [f64; 2],
}

impl PowerAngleModel {
    pub fn new(op: &OperatingPoint, eq: &Equivalent, circuit: &CircuitParams) -> Result<Self, ModelError> {
        let dq = eq.to_dq();
        let w1 = circuit.omega1;
        let l = circuit.lg / w1;
        // Zeq + (Lg/ω1)(s + jω1), formed over the impedance denominator
        let sig = Poly::new(vec![Complex64::new(0.0, w1 * l), Complex64::new(l, 0.0)]);
        let w = if dq.geq.den() == dq.zeq.den() {
            let den = dq.zeq.num().add(&sig.mul(dq.zeq.den()));
            RationalFunction::new(dq.geq.num().clone(), den)?
        } else {
            let total = dq.zeq.add(&RationalFunction::new(sig, Poly::one())?)?;
            dq.geq.div(&total)?
        };
        Ok(PowerAngleModel {
            w: DqImpedance::split(&w)?,
            zg: DqImpedance::inductive(circuit.lg, w1),
            v0: [op.vd0, op.vq0],
            i0: [op.id0, op.iq0],
            dir_theta: [-op.eq0, op.ed0],
            dir_mag: [op.theta0.cos(), op.theta0.sin()],
        })
    }

    /// `(ΔP, Δ|V|)` per unit of EMF perturbation along `dir` at `s`.
    fn respond(&self, s: Complex64, dir: [f64; 2]) -> Result<(Complex64, Complex64), ModelError> {
        let w = self.w.matrix(s)?;
        let zg = self.zg.matrix(s)?;
        let di = [w[0][0] * dir[0] + w[0][1] * dir[1], w[1][0] * dir[0] + w[1][1] * dir[1]];
        let dv = [zg[0][0] * di[0] + zg[0][1] * di[1], zg[1][0] * di[0] + zg[1][1] * di[1]];
        let dp = self.v0[0] * di[0] + self.v0[1] * di[1] + self.i0[0] * dv[0] + self.i0[1] * dv[1];
        let vm = (self.v0[0].powi(2) + self.v0[1].powi(2)).sqrt();
        let dvm = (self.v0[0] * dv[0] + self.v0[1] * dv[1]) / vm;
        Ok((dp, dvm))
    }

    /// `(G_Pθ, G_PE, G_Vθ, G_VE)` at `s`.
    pub fn plant(&self, s: Complex64) -> Result<[Complex64; 4], ModelError> {
        let (p_th, v_th) = self.respond(s, self.dir_theta)?;
        let (p_e, v_e) = self.respond(s, self.dir_mag)?;
        Ok([p_th, p_e, v_th, v_e])
    }

    /// `ΔP/Δθ` with the EMF magnitude frozen.
    pub fn power_angle(&self, s: Complex64) -> Result<Complex64, ModelError> {
        Ok(self.respond(s, self.dir_theta)?.0)
    }

    /// `ΔP/Δθ` with the integral voltage loop `ΔE = (Kiv/s)(−Δ|V|)` closed.
    pub fn power_angle_with_avc(&self, s: Complex64, kiv: f64) -> Result<Complex64, ModelError> {
        let [p_th, p_e, v_th, v_e] = self.plant(s)?;
        if kiv == 0.0 {
            return Ok(p_th);
        }
        let k = kiv / s;
        let den = 1.0 + k * v_e;
        if den.norm() < 1e-300 {
            return Err(ModelError::SingularResponse { omega: s.im });
        }
        Ok(p_th - p_e * k / den * v_th)
    }

    /// `G_Pθ` as a rational function of the dq-frame Laplace variable.
    pub fn power_angle_rf(&self) -> Result<RationalFunction, ModelError> {
        let (wd, wq) = (&self.w.zd, &self.w.zq);
        debug_assert_eq!(wd.den(), wq.den());
        let q = wd.den();
        let [ex, ey] = self.dir_theta.map(|x| Complex64::new(x, 0.0));
        // ΔI numerators over q
        let id = wd.num().scale(ex).sub(&wq.num().scale(ey));
        let iq = wq.num().scale(ex).add(&wd.num().scale(ey));
        let (zgd, zgq) = (self.zg.zd.num(), self.zg.zq.num());
        let vd = zgd.mul(&id).sub(&zgq.mul(&iq));
        let vq = zgq.mul(&id).add(&zgd.mul(&iq));
        let c = |x: f64| Complex64::new(x, 0.0);
        let num = id
            .scale(c(self.v0[0]))
            .add(&iq.scale(c(self.v0[1])))
            .add(&vd.scale(c(self.i0[0])))
            .add(&vq.scale(c(self.i0[1])));
        Ok(RationalFunction::new(num, q.clone())?)
    }
}

/// Exact `G_Pθ(s)` of the converter on its grid with the EMF magnitude frozen.
pub fn linearized_power_angle(
    op: &OperatingPoint,
    eq: &Equivalent,
    circuit: &CircuitParams,
) -> Result<RationalFunction, ModelError> {
    PowerAngleModel::new(op, eq, circuit)?.power_angle_rf()
}

/// `ΔP/Δθ` with the voltage-magnitude loop closed, sampled over `omega`.
pub fn power_angle_with_avc(
    op: &OperatingPoint,
    eq: &Equivalent,
    circuit: &CircuitParams,
    kiv: f64,
    omega: &[f64],
) -> Result<ResponseTable, ModelError> {
    let m = PowerAngleModel::new(op, eq, circuit)?;
    let values = omega.iter().map(|&w| m.power_angle_with_avc(J * w, kiv)).collect::<Result<Vec<_>, _>>()?;
    Ok(ResponseTable::new(omega.to_vec(), values)?)
}

/// How the synchronization law enters as a mechanical torque.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MechanicalPath {
    /// `s/G_PSC(s)`: the angle integrates the PSC output.
    #[default]
    SOverGpsc,
    /// `1/G_PSC(s)`.
    Verbatim,
}

impl MechanicalPath {
    pub fn torque(self, gpsc: &RationalFunction, omega: f64) -> Result<Complex64, ModelError> {
        let g = gpsc.at_jw(omega)?;
        if g.norm() < 1e-300 {
            return Err(ModelError::SingularResponse { omega });
        }
        Ok(match self {
            MechanicalPath::SOverGpsc => J * omega / g,
            MechanicalPath::Verbatim => 1.0 / g,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeLabel {
    /// Synchronous oscillation near the fundamental.
    So,
    /// Sub-synchronous oscillation.
    Sso,
    /// Crossing above 1.1·ω1.
    Super,
}

impl ModeLabel {
    pub fn classify(omega: f64, omega1: f64) -> ModeLabel {
        if omega < 0.9 * omega1 {
            ModeLabel::Sso
        } else if omega <= 1.1 * omega1 {
            ModeLabel::So
        } else {
            ModeLabel::Super
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModeLabel::So => "SO",
            ModeLabel::Sso => "SSO",
            ModeLabel::Super => "SUPER",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intersection {
    pub omega_star: f64,
    pub net_damping: f64,
    /// `|Km + Ke|` at the refined crossing.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TorqueProfile {
    pub omega: Vec<f64>,
    pub ke: Vec<f64>,
    pub de: Vec<f64>,
    pub km: Vec<f64>,
    pub dm: Vec<f64>,
    pub intersections: Vec<Intersection>,
    pub omega1: f64,
}

/// Relative bisection tolerance on crossing frequencies.
pub const CROSSING_TOL: f64 = 1e-4;

/// Default verdict grid: 400 logarithmic points over 1–100 Hz, rad/s.
pub fn default_torque_grid() -> Vec<f64> {
    hz_log_grid(1.0, 100.0, 400)
}

fn split_torque(t: Complex64, omega: f64) -> (f64, f64) {
    (t.re, t.im / omega)
}

fn sample_only(
    electrical: &(dyn Fn(f64) -> Result<Complex64, ModelError> + Sync),
    gpsc: &RationalFunction,
    path: MechanicalPath,
    omega: &[f64],
    omega1: f64,
) -> Result<TorqueProfile, ModelError> {
    ResponseTable::new(omega.to_vec(), vec![Complex64::new(0.0, 0.0); omega.len()])?;
    let mut p = TorqueProfile {
        omega: omega.to_vec(),
        ke: Vec::with_capacity(omega.len()),
        de: Vec::with_capacity(omega.len()),
        km: Vec::with_capacity(omega.len()),
        dm: Vec::with_capacity(omega.len()),
        intersections: Vec::new(),
        omega1,
    };
    for &w in omega {
        let (ke, de) = split_torque(electrical(w)?, w);
        let (km, dm) = split_torque(path.torque(gpsc, w)?, w);
        p.ke.push(ke);
        p.de.push(de);
        p.km.push(km);
        p.dm.push(dm);
    }
    Ok(p)
}

/// Samples the torque coefficients and refines every zero of `Km + Ke` by bisection.
pub fn complex_torque_profile(
    electrical: &(dyn Fn(f64) -> Result<Complex64, ModelError> + Sync),
    gpsc: &RationalFunction,
    path: MechanicalPath,
    omega: &[f64],
    omega1: f64,
) -> Result<TorqueProfile, ModelError> {
    let mut p = sample_only(electrical, gpsc, path, omega, omega1)?;
    let total = |w: f64| -> Result<(f64, f64), ModelError> {
        let (ke, de) = split_torque(electrical(w)?, w);
        let (km, dm) = split_torque(path.torque(gpsc, w)?, w);
        Ok((km + ke, dm + de))
    };
    for k in 0..omega.len().saturating_sub(1) {
        let fa = p.km[k] + p.ke[k];
        let fb = p.km[k + 1] + p.ke[k + 1];
        if fa == 0.0 || fa.signum() == fb.signum() {
            continue;
        }
        let (mut lo, mut hi, mut flo) = (omega[k], omega[k + 1], fa);
        while (hi - lo) > CROSSING_TOL * lo {
            let mid = 0.5 * (lo + hi);
            let (fm, _) = total(mid)?;
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let mid = 0.5 * (lo + hi);
        let (k_sum, d_sum) = total(mid)?;
        p.intersections.push(Intersection { omega_star: mid, net_damping: d_sum, residual: k_sum.abs() });
    }
    Ok(p)
}

impl TorqueProfile {
    /// Profile from sampled electrical torque (e.g. a measured scan); crossings are
    /// located by linear interpolation between grid points.
    pub fn from_table(
        electrical: &ResponseTable,
        gpsc: &RationalFunction,
        path: MechanicalPath,
        omega1: f64,
    ) -> Result<TorqueProfile, ModelError> {
        let lookup = |w: f64| -> Result<Complex64, ModelError> {
            let k = electrical.omega.iter().position(|&x| x == w).ok_or(ModelError::SingularResponse { omega: w })?;
            Ok(electrical.values[k])
        };
        let mut p = TorqueProfile { intersections: Vec::new(), ..sample_only(&lookup, gpsc, path, &electrical.omega, omega1)? };
        for k in 0..p.omega.len().saturating_sub(1) {
            let fa = p.km[k] + p.ke[k];
            let fb = p.km[k + 1] + p.ke[k + 1];
            if fa == 0.0 || fa.signum() == fb.signum() {
                continue;
            }
            let t = fa / (fa - fb);
            let lerp = |a: f64, b: f64| a + t * (b - a);
            p.intersections.push(Intersection {
                omega_star: lerp(p.omega[k], p.omega[k + 1]),
                net_damping: lerp(p.dm[k] + p.de[k], p.dm[k + 1] + p.de[k + 1]),
                residual: 0.0,
            });
        }
        Ok(p)
    }

    pub fn freq_hz(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w / (2.0 * PI)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalMode {
    pub omega_star: f64,
    pub net_damping: f64,
    pub label: ModeLabel,
}

impl CriticalMode {
    pub fn f_star_hz(&self) -> f64 {
        self.omega_star / (2.0 * PI)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub critical_modes: Vec<CriticalMode>,
    /// No zero of `Km + Ke` inside the scanned range.
    pub no_crossing: bool,
}

impl StabilityVerdict {
    /// The crossing with the smallest net damping.
    pub fn worst(&self) -> Option<&CriticalMode> {
        self.critical_modes.iter().min_by(|a, b| a.net_damping.total_cmp(&b.net_damping))
    }
}

/// Stable iff `Dm + De > 0` at every crossing of `Km + Ke`.
pub fn net_damping_verdict(profile: &TorqueProfile) -> StabilityVerdict {
    let critical_modes: Vec<CriticalMode> = profile
        .intersections
        .iter()
        .map(|x| CriticalMode {
            omega_star: x.omega_star,
            net_damping: x.net_damping,
            label: ModeLabel::classify(x.omega_star, profile.omega1),
        })
        .collect();
    StabilityVerdict {
        stable: critical_modes.iter().all(|m| m.net_damping > 0.0),
        no_crossing: critical_modes.is_empty(),
        critical_modes,
    }
}
