//! Closed-loop small-signal models in the stationary- and rotating-frame realizations.
//!
//! Both models live in the grid-aligned dq frame. In the stationary realization the
//! inner-loop controllers act on grid-frame signals and only the EMF vector rotates
//! with θ. In the rotating realization the controllers act in the converter frame,
//! so the measured voltage and current and the controller output pass through
//! linearized frame transformations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::converter::{build_delay, CircuitParams, Frame, InnerLoopConfig, ModelError, OperatingPoint, OuterLoopParams};
use crate::numeric::{realize_complex, realize_real, Interconnection, RationalFunction, RealStateSpace, Signal};
use crate::numeric::Poly;

/// θ-coupling vectors of the linearized frame transformations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupling {
    /// EMF vector per radian, `[−Eq0, Ed0]`.
    pub g_e: [f64; 2],
    /// Measured voltage, `[Vq0, −Vd0]`.
    pub g_u: [f64; 2],
    /// Measured current, `[Iq0, −Id0]`.
    pub g_i: [f64; 2],
    /// Modulation voltage, `[−Uiq0, Uid0]`.
    pub g_ui: [f64; 2],
    /// Controller output ahead of the delay, `[−Ucq0, Ucd0]`; equals `g_ui` when the delay is neglected.
    pub g_uc: [f64; 2],
}

pub fn coupling_matrices(op: &OperatingPoint) -> Coupling {
    Coupling {
        g_e: [-op.eq0, op.ed0],
        g_u: [op.vq0, -op.vd0],
        g_i: [op.iq0, -op.id0],
        g_ui: [-op.uiq0, op.uid0],
        g_uc: [-op.ucq0, op.ucd0],
    }
}

impl Coupling {
    /// Rotating-frame couplings that make the rotating realization reproduce the
    /// stationary one: current coupling removed, voltage coupling replaced by `−g_e`
    /// and the output coupling by `fv·g_e`. Exact for a constant decoupling gain `fv`.
    pub fn ablated(&self, fv: f64) -> Coupling {
        let g_u = [-self.g_e[0], -self.g_e[1]];
        Coupling { g_i: [0.0, 0.0], g_u, g_uc: [-fv * g_u[0], -fv * g_u[1]], ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ThetaSource {
    /// θ produced by the power-synchronization loop.
    #[default]
    Psc,
    /// θ driven by the external input `theta`.
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AvcMode {
    #[default]
    Active,
    /// Integrator kept with zero gain; the state count is unchanged.
    Frozen,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct AssemblyOptions {
    pub theta: ThetaSource,
    pub avc: AvcMode,
    /// Replaces the couplings computed from the operating point.
    pub coupling: Option<Coupling>,
}

/// Assembled model with inputs `{Pref, theta, vg_d, vg_q}` and outputs `{P, theta, E}`.
#[derive(Clone, Debug)]
pub struct SmallSignalModel {
    pub realization: Frame,
    pub state_space: RealStateSpace,
    pub coupling: Coupling,
    pub op: OperatingPoint,
    pub blocks: Vec<(String, usize, usize)>,
    pub omega1: f64,
}

pub const IN_PREF: usize = 0;
pub const IN_THETA: usize = 1;
pub const OUT_P: usize = 0;
pub const OUT_THETA: usize = 1;
pub const OUT_E: usize = 2;

fn rot(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, s], [-s, c]]
}

fn transpose(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

fn mat_vec(m: [[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// `[M | v]`: two outputs from a 2-vector input and a scalar input.
fn frame_block(m: [[f64; 2]; 2], v: [f64; 2]) -> RealStateSpace {
    RealStateSpace::gain(DMatrix::from_row_slice(2, 3, &[m[0][0], m[0][1], v[0], m[1][0], m[1][1], v[1]]))
}

const I2: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];
const NEG_I2: [[f64; 2]; 2] = [[-1.0, 0.0], [0.0, -1.0]];

fn scaled(k: f64) -> [[f64; 2]; 2] {
    [[k, 0.0], [0.0, k]]
}

pub fn assemble_model(
    realization: Frame,
    circuit: &CircuitParams,
    outer: &OuterLoopParams,
    cfg: &InnerLoopConfig,
    op: &OperatingPoint,
    options: &AssemblyOptions,
) -> Result<SmallSignalModel, ModelError> {
    if cfg.frame != realization {
        return Err(ModelError::InvalidParameter(format!(
            "inner-loop configuration is {} but the {} realization was requested",
            cfg.frame.name(),
            realization.name()
        )));
    }
    circuit.validate()?;
    outer.validate()?;
    cfg.validate()?;
    let w1 = circuit.omega1;
    let dq = cfg.to_rotating(w1);
    let gd = build_delay(&cfg.gd)?.translate_frequency(w1);
    let coupling = options.coupling.unwrap_or_else(|| coupling_matrices(op));

    let mut net = Interconnection::new();
    let pref = net.add_input("Pref");
    let theta_in = net.add_input("theta");
    let vg = net.add_input("vg_d");
    net.add_input("vg_q");

    let psc_tf = RationalFunction::from_real(&[w1 * outer.kpsc * outer.omega_p], &[0.0, outer.omega_p, 1.0])?;
    let psc = net.add_block("psc", realize_real(&psc_tf)?);
    let kiv = if options.avc == AvcMode::Active { outer.kiv } else { 0.0 };
    let avc = net.add_block(
        "avc",
        RealStateSpace::new(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, kiv),
            DMatrix::zeros(1, 1),
            vec!["u".into()],
            vec!["y".into()],
        )?,
    );
    let gv = net.add_block("gv", realize_complex(&dq.gv)?);
    let gi = net.add_block("gi", realize_complex(&dq.gi)?);
    let fcc = net.add_block("fcc", realize_complex(&dq.fcc)?);
    let fv = net.add_block("fv", realize_complex(&dq.fv)?);
    let gdb = net.add_block("gd", realize_complex(&gd)?);
    let lt = (circuit.lf + circuit.lg) / w1;
    let admittance = RationalFunction::new(
        Poly::constant(Complex64::new(1.0 / lt, 0.0)),
        Poly::new(vec![Complex64::new(0.0, w1), Complex64::new(1.0, 0.0)]),
    )?;
    let y = net.add_block("grid", realize_complex(&admittance)?);
    let v = net.add_block("v_pcc", RealStateSpace::gain(DMatrix::identity(2, 2)));
    let p = net.add_block(
        "power",
        RealStateSpace::gain(DMatrix::from_row_slice(1, 4, &[op.id0, op.iq0, op.vd0, op.vq0])),
    );
    let vm0 = op.v().norm();
    let vmag = net.add_block("v_mag", RealStateSpace::gain(DMatrix::from_row_slice(1, 2, &[op.vd0 / vm0, op.vq0 / vm0])));

    let out = |b: usize| Signal::Block(b, 0);
    let theta = match options.theta {
        ThetaSource::Psc => out(psc),
        ThetaSource::External => theta_in,
    };

    // outer loops
    net.wire(psc, 0, pref, 1.0);
    net.wire(psc, 0, out(p), -1.0);
    net.wire(avc, 0, out(vmag), -1.0);

    // circuit: grid current from the modulation voltage, PCC voltage by division
    let k = circuit.lg / (circuit.lf + circuit.lg);
    net.wire2(y, 0, out(gdb), I2);
    net.wire2(y, 0, vg, NEG_I2);
    net.wire2(v, 0, out(gdb), scaled(k));
    net.wire2(v, 0, vg, scaled(1.0 - k));
    net.wire2(p, 0, out(v), I2);
    net.wire2(p, 2, out(y), I2);
    net.wire2(vmag, 0, out(v), I2);

    let t = rot(op.theta0);
    let ti = transpose(t);
    // (voltage seen by the controller, current seen by the controller, EMF reference)
    let (vc, ic, eref) = match realization {
        Frame::Stationary => {
            let es = net.add_block("emf", frame_block_scalar(ti, coupling.g_e));
            net.wire(es, 0, out(avc), 1.0);
            net.wire(es, 1, theta, 1.0);
            net.wire2(gdb, 0, out(gi), I2);
            net.wire2(gdb, 0, out(fv), I2);
            (out(v), out(y), out(es))
        }
        Frame::Rotating => {
            let vcb = net.add_block("v_ctrl", frame_block(t, mat_vec(t, coupling.g_u)));
            net.wire2(vcb, 0, out(v), I2);
            net.wire(vcb, 2, theta, 1.0);
            let icb = net.add_block("i_ctrl", frame_block(t, mat_vec(t, coupling.g_i)));
            net.wire2(icb, 0, out(y), I2);
            net.wire(icb, 2, theta, 1.0);
            let ec = net.add_block("emf", RealStateSpace::gain(DMatrix::from_row_slice(2, 1, &[1.0, 0.0])));
            net.wire(ec, 0, out(avc), 1.0);
            let us = net.add_block("u_grid", frame_block(ti, coupling.g_uc));
            net.wire2(us, 0, out(gi), I2);
            net.wire2(us, 0, out(fv), I2);
            net.wire(us, 2, theta, 1.0);
            net.wire2(gdb, 0, out(us), I2);
            (out(vcb), out(icb), out(ec))
        }
    };
    net.wire2(gv, 0, eref, I2);
    if cfg.fvc {
        net.wire2(gv, 0, vc, NEG_I2);
    }
    net.wire2(fcc, 0, ic, I2);
    net.wire2(gi, 0, out(gv), I2);
    net.wire2(gi, 0, out(fcc), NEG_I2);
    net.wire2(fv, 0, vc, I2);

    net.add_output("P", vec![(out(p), 1.0)]);
    net.add_output("theta", vec![(theta, 1.0)]);
    net.add_output("E", vec![(out(avc), 1.0)]);
    let state_space = net.build()?;
    Ok(SmallSignalModel { realization, state_space, coupling, op: op.clone(), blocks: net.state_offsets(), omega1: w1 })
}

/// `[M[:,0] | v]`: two outputs from a scalar magnitude input and a scalar angle input.
fn frame_block_scalar(m: [[f64; 2]; 2], v: [f64; 2]) -> RealStateSpace {
    RealStateSpace::gain(DMatrix::from_row_slice(2, 2, &[m[0][0], v[0], m[1][0], v[1]]))
}

/// Eigenvalues below this magnitude are structural (a frozen integrator).
pub const STRUCTURAL_ZERO: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pole {
    pub value: Complex64,
    pub zeta: f64,
    pub omega_n: f64,
}

impl Pole {
    fn new(value: Complex64) -> Pole {
        let omega_n = value.norm();
        let zeta = if omega_n > 0.0 { -value.re / omega_n } else { 1.0 };
        Pole { value, zeta, omega_n }
    }

    pub fn is_structural(&self) -> bool {
        self.omega_n < STRUCTURAL_ZERO
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoleSet {
    pub poles: Vec<Pole>,
    pub omega1: f64,
}

impl PoleSet {
    pub fn new(mut values: Vec<Complex64>, omega1: f64) -> PoleSet {
        values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        PoleSet { poles: values.into_iter().map(Pole::new).collect(), omega1 }
    }

    fn decisive(&self) -> impl Iterator<Item = &Pole> {
        self.poles.iter().filter(|p| !p.is_structural())
    }

    /// Largest real part among non-structural poles.
    pub fn max_real(&self) -> f64 {
        self.decisive().map(|p| p.value.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.max_real() < 0.0
    }

    /// Non-structural pole with the largest real part, upper half-plane representative.
    pub fn dominant(&self) -> Option<Pole> {
        self.decisive()
            .copied()
            .max_by(|a, b| a.value.re.total_cmp(&b.value.re).then(a.value.im.total_cmp(&b.value.im)))
    }

    /// Oscillatory pair nearest the fundamental, among poles with `|Re| < ω1`.
    pub fn so_pair(&self) -> Option<Pole> {
        self.decisive()
            .filter(|p| p.value.im > 1e-6 && p.value.re.abs() < self.omega1)
            .copied()
            .min_by(|a, b| (a.value.im - self.omega1).abs().total_cmp(&(b.value.im - self.omega1).abs()))
    }

    /// Least-damped pair with imaginary part in `(0, 0.9·ω1)`.
    pub fn sso_pair(&self) -> Option<Pole> {
        self.decisive()
            .filter(|p| p.value.im > 1e-6 && p.value.im < 0.9 * self.omega1)
            .copied()
            .min_by(|a, b| a.zeta.total_cmp(&b.zeta))
    }

    /// Every complex pole has its conjugate within `tol` (relative).
    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        self.poles.iter().all(|p| {
            p.value.im.abs() <= tol * p.omega_n.max(1.0)
                || self.poles.iter().any(|q| (q.value - p.value.conj()).norm() <= tol * p.omega_n.max(1.0))
        })
    }
}

pub fn closed_loop_poles(model: &SmallSignalModel) -> Result<PoleSet, ModelError> {
    Ok(PoleSet::new(model.state_space.eigenvalues()?, model.omega1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResponse {
    pub t: Vec<f64>,
    /// `ΔP` in per unit.
    pub dp: Vec<f64>,
    pub overshoot: f64,
    /// Time after which `ΔP` stays within 2% of the step, `None` if it never settles.
    pub settling_time: Option<f64>,
    pub final_value: f64,
    pub diverging: bool,
}

/// Default integration step.
pub const STEP_DT: f64 = 1e-4;

/// `ΔP` response to a `ΔPref` step, by zero-order-hold stepping of the model.
pub fn step_response(model: &SmallSignalModel, delta_pref: f64, horizon: f64, dt: f64) -> Result<StepResponse, ModelError> {
    if !(dt > 0.0 && dt <= STEP_DT && horizon > 0.0) {
        return Err(ModelError::InvalidParameter("step size must be in (0, 1e-4] s and the horizon positive".into()));
    }
    let ss = &model.state_space;
    let n = ss.n_states();
    // exp([[A, B], [0, 0]]·dt) carries the discrete input matrix in its upper-right block
    let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&ss.a * dt));
    for i in 0..n {
        aug[(i, n)] = ss.b[(i, IN_PREF)] * dt;
    }
    let phi = aug.exp();
    let ad = phi.view((0, 0), (n, n)).into_owned();
    let bd = phi.view((0, n), (n, 1)).into_owned();
    let c = ss.c.row(OUT_P).into_owned();
    let d = ss.d[(OUT_P, IN_PREF)];
    let steps = (horizon / dt).round() as usize;
    let mut x = nalgebra::DVector::<f64>::zeros(n);
    let mut t = Vec::with_capacity(steps + 1);
    let mut dp = Vec::with_capacity(steps + 1);
    let mut diverging = false;
    for k in 0..=steps {
        let yk = (&c * &x)[0] + d * delta_pref;
        t.push(k as f64 * dt);
        dp.push(yk);
        if !yk.is_finite() || yk.abs() > 1e6 * delta_pref.abs().max(1e-12) {
            diverging = true;
            break;
        }
        x = &ad * x + &bd * delta_pref;
    }
    let poles = closed_loop_poles(model)?;
    diverging |= !poles.is_stable();
    Ok(metrics(t, dp, delta_pref, diverging))
}

fn metrics(t: Vec<f64>, dp: Vec<f64>, target: f64, diverging: bool) -> StepResponse {
    let final_value = dp.last().copied().unwrap_or(0.0);
    if target == 0.0 {
        let settled = dp.iter().all(|&y| y == 0.0);
        return StepResponse {
            t,
            dp,
            overshoot: 0.0,
            settling_time: if settled { Some(0.0) } else { None },
            final_value,
            diverging,
        };
    }
    let peak = dp.iter().map(|y| y / target).fold(f64::NEG_INFINITY, f64::max);
    let overshoot = (peak - 1.0).max(0.0);
    let band = 0.02 * target.abs();
    let last_out = dp.iter().rposition(|y| (y - target).abs() > band);
    let settling_time = match last_out {
        None => Some(0.0),
        Some(k) if k + 1 < t.len() => Some(t[k + 1]),
        Some(_) => None,
    };
    StepResponse { t, dp, overshoot, settling_time, final_value, diverging }
}
