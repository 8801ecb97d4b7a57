//! Nonlinear averaged time-domain simulation of the converter, its inner and
//! outer loops and the series grid circuit.
//!
//! Signals are carried as complex numbers: `α + jβ` in the stationary frame and
//! `d + jq` in the converter-aligned rotating frame. The controller blocks act
//! on these complex signals directly, so real-coefficient stationary blocks and
//! complex-coefficient rotating blocks share one code path.

mod scan;

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;

use crate::closedloop::AvcMode;
use crate::converter::{
    derive_equivalent_impedance, solve_operating_point, CircuitParams, Frame, InnerLoopConfig, ModelError,
    OperatingPoint, OuterLoopParams, SystemParams, VirtualAdmittanceDesign,
};
use crate::numeric::{balanced_canonical, Complex64, NumericError, RationalFunction, J};

pub use scan::{
    classify_stability, scan_impedance, scan_torque, Classification, ScanResult, StabilityClass, QUALITY_LIMIT,
    SCAN_SETTLE, SCAN_WINDOW,
};

/// Default integration step, s.
pub const DEFAULT_STEP: f64 = 5e-5;
/// Largest admissible integration step, s.
pub const MAX_STEP: f64 = 1e-4;
/// Physical signal magnitude that aborts a run, pu.
pub const BLOW_UP: f64 = 100.0;
/// Duration of the soft-start ramp, s.
pub const SOFT_START: f64 = 0.2;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("{quantity} reached {value:.3e} pu at t = {time:.6} s")]
    BlowUp { time: f64, quantity: &'static str, value: f64, trace: Box<Trace> },
    #[error("ill-posed algebraic loop at t = {time} s")]
    IllPosedLoop { time: f64 },
    #[error("trace too short: {available:.4} s available, {required:.4} s required")]
    WindowTooShort { available: f64, required: f64 },
    #[error("scan point at {freq_hz} Hz rejected, fit residual {quality:.3e}")]
    Quality { freq_hz: f64, quality: f64 },
}

/// Parameter change applied during a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    /// Dotted parameter path as accepted by [`SystemParams::set`].
    pub path: String,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InjectionTarget {
    /// Positive-sequence voltage added to the grid EMF.
    GridVoltage,
    /// Sinusoid added to the synchronization angle.
    Angle,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Injection {
    pub target: InjectionTarget,
    pub freq_hz: f64,
    pub amplitude: f64,
    pub start: f64,
}

impl Injection {
    fn voltage(&self, t: f64) -> Complex64 {
        if self.target != InjectionTarget::GridVoltage || t < self.start {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.amplitude, 2.0 * PI * self.freq_hz * (t - self.start))
    }

    fn angle(&self, t: f64) -> f64 {
        if self.target != InjectionTarget::Angle || t < self.start {
            return 0.0;
        }
        self.amplitude * (2.0 * PI * self.freq_hz * (t - self.start)).sin()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Start {
    /// All states at the solved operating point.
    #[default]
    OperatingPoint,
    /// Zero states with grid voltage and references ramped over [`SOFT_START`].
    SoftStart,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Synchronization {
    /// Angle produced by the power-synchronization loop.
    #[default]
    Psc,
    /// Angle held at its initial value (injections still add to it).
    Fixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimScenario {
    pub circuit: CircuitParams,
    pub outer: OuterLoopParams,
    pub cfg: InnerLoopConfig,
    /// Parametric source of `cfg`, required for `inner.*` events.
    pub design: Option<VirtualAdmittanceDesign>,
    pub time_step: f64,
    pub duration: f64,
    pub events: Vec<Event>,
    pub injection: Option<Injection>,
    pub start: Start,
    pub synchronization: Synchronization,
    pub avc: AvcMode,
    /// Offset added to the initial angle, rad.
    pub theta_kick: f64,
}

impl SimScenario {
    pub fn from_params(params: &SystemParams, duration: f64) -> Result<SimScenario, SimError> {
        params.validate()?;
        Ok(SimScenario {
            circuit: params.circuit.clone(),
            outer: params.outer.clone(),
            cfg: params.config()?,
            design: Some(params.design.clone()),
            time_step: DEFAULT_STEP,
            duration,
            events: Vec::new(),
            injection: None,
            start: Start::OperatingPoint,
            synchronization: Synchronization::Psc,
            avc: AvcMode::Active,
            theta_kick: 0.0,
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.circuit.validate()?;
        self.outer.validate()?;
        self.cfg.validate()?;
        let h = self.time_step;
        invalid(h > 0.0 && h <= MAX_STEP, "time step must be in (0, 1e-4] s")?;
        invalid(self.duration > 0.0 && self.duration.is_finite(), "duration must be positive")?;
        invalid(self.events.windows(2).all(|w| w[0].time <= w[1].time), "events must be time-ordered")?;
        let td = self.cfg.gd.sim_delay();
        invalid(td == 0.0 || td >= h, "a non-zero delay must span at least one time step")?;
        if let Some(inj) = &self.injection {
            invalid(inj.amplitude.abs() <= 0.05, "injection amplitude must not exceed 0.05 pu")?;
            invalid(inj.freq_hz > 0.0 && inj.freq_hz.is_finite(), "injection frequency must be positive")?;
        }
        invalid(self.theta_kick.is_finite(), "angle kick must be finite")?;
        for e in &self.events {
            invalid(e.path.starts_with("inner.") <= self.design.is_some(), "inner.* events need a parametric design")?;
        }
        Ok(())
    }

    /// Number of samples in the produced trace.
    pub fn samples(&self) -> usize {
        (self.duration / self.time_step).round() as usize + 1
    }

    fn equivalent_op(&self) -> Result<OperatingPoint, SimError> {
        let eq = derive_equivalent_impedance(&self.cfg, self.circuit.lf, self.circuit.omega1)?;
        Ok(solve_operating_point(&self.circuit, &self.outer, &eq)?)
    }
}

/// Uniformly sampled simulation output.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Trace {
    pub t: Vec<f64>,
    pub i_alpha: Vec<f64>,
    pub i_beta: Vec<f64>,
    pub v_alpha: Vec<f64>,
    pub v_beta: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Angle relative to the grid voltage, rad.
    pub theta: Vec<f64>,
    pub e: Vec<f64>,
    pub omega1: f64,
}

pub const TRACE_COLUMNS: [&str; 9] = ["t", "i_alpha", "i_beta", "v_alpha", "v_beta", "P", "Q", "theta", "E"];

impl Trace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn time_step(&self) -> f64 {
        if self.t.len() < 2 {
            return 0.0;
        }
        self.t[1] - self.t[0]
    }

    /// Samples with `t ≤ t_end`.
    pub fn truncated(&self, t_end: f64) -> Trace {
        let h = self.time_step();
        let n = self.t.iter().take_while(|&&t| t <= t_end + 0.5 * h).count();
        let mut out = Trace { omega1: self.omega1, ..Trace::default() };
        let src = [&self.t, &self.i_alpha, &self.i_beta, &self.v_alpha, &self.v_beta, &self.p, &self.q, &self.theta, &self.e];
        for (dst, col) in out.columns_mut().into_iter().zip(src) {
            dst.extend_from_slice(&col[..n]);
        }
        out
    }

    pub fn current(&self, k: usize) -> Complex64 {
        Complex64::new(self.i_alpha[k], self.i_beta[k])
    }

    pub fn voltage(&self, k: usize) -> Complex64 {
        Complex64::new(self.v_alpha[k], self.v_beta[k])
    }

    /// Sample `k` in `TRACE_COLUMNS` order.
    pub fn row(&self, k: usize) -> [f64; 9] {
        [
            self.t[k],
            self.i_alpha[k],
            self.i_beta[k],
            self.v_alpha[k],
            self.v_beta[k],
            self.p[k],
            self.q[k],
            self.theta[k],
            self.e[k],
        ]
    }

    /// CSV with a header row; values use the shortest round-trip decimal form.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", TRACE_COLUMNS.join(","))?;
        for k in 0..self.len() {
            let row = self.row(k).map(|x| format!("{x}"));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Trace, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty trace file")?;
        if header.split(',').collect::<Vec<_>>() != TRACE_COLUMNS {
            return Err(format!("unexpected header {header:?}"));
        }
        let mut tr = Trace::default();
        for (n, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|x| x.parse::<f64>().map_err(|e| format!("line {}: {e}", n + 2)))
                .collect::<Result<_, _>>()?;
            if vals.len() != 9 {
                return Err(format!("line {}: expected 9 columns", n + 2));
            }
            for (col, x) in tr.columns_mut().into_iter().zip(vals) {
                col.push(x);
            }
        }
        Ok(tr)
    }

    fn columns_mut(&mut self) -> [&mut Vec<f64>; 9] {
        [
            &mut self.t,
            &mut self.i_alpha,
            &mut self.i_beta,
            &mut self.v_alpha,
            &mut self.v_beta,
            &mut self.p,
            &mut self.q,
            &mut self.theta,
            &mut self.e,
        ]
    }

    fn push(&mut self, t: f64, out: &Outputs) {
        self.t.push(t);
        self.i_alpha.push(out.i.re);
        self.i_beta.push(out.i.im);
        self.v_alpha.push(out.v.re);
        self.v_beta.push(out.v.im);
        self.p.push(out.p);
        self.q.push(out.q);
        self.theta.push(out.theta);
        self.e.push(out.e);
    }
}

/// Controller block realized on complex signals.
#[derive(Clone, Debug)]
struct Block {
    a: DMatrix<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
    d: Complex64,
    /// Balancing scale: canonical state = `scale ⊙ state`.
    scale: Vec<f64>,
}

impl Block {
    fn new(name: &str, rf: &RationalFunction) -> Result<Block, SimError> {
        if !rf.is_proper() {
            return Err(SimError::Invalid(format!("{name} is improper and cannot be simulated")));
        }
        let (cs, scale) = balanced_canonical(rf)?;
        let n = cs.a.nrows();
        Ok(Block {
            b: (0..n).map(|i| cs.b[(i, 0)]).collect(),
            c: (0..n).map(|j| cs.c[(0, j)]).collect(),
            d: cs.d,
            a: cs.a,
            scale,
        })
    }

    fn order(&self) -> usize {
        self.b.len()
    }

    fn output(&self, z: &[Complex64], u: Complex64) -> Complex64 {
        self.c.iter().zip(z).map(|(c, x)| c * x).sum::<Complex64>() + self.d * u
    }

    fn derivative(&self, z: &[Complex64], u: Complex64, dz: &mut [Complex64]) {
        let n = self.order();
        for i in 0..n {
            let mut acc = self.b[i] * u;
            for j in 0..n {
                acc += self.a[(i, j)] * z[j];
            }
            dz[i] = acc;
        }
    }

    /// State that reproduces the sinusoidal steady state `u·e^{jΩt}` → `y·e^{jΩt}` at t = 0.
    ///
    /// The output row is stacked under `(jΩ − A)` so that blocks with a pole at
    /// `jΩ` (integrators in the rotating frame) still get the state that yields `y`.
    fn steady_state(&self, omega: f64, u: Complex64, y: Complex64) -> Result<Vec<Complex64>, SimError> {
        let n = self.order();
        if n == 0 {
            return Ok(Vec::new());
        }
        let m = DMatrix::from_fn(n + 1, n, |i, j| {
            if i < n {
                let diag = if i == j { J * omega } else { Complex64::new(0.0, 0.0) };
                diag - self.a[(i, j)]
            } else {
                self.c[j]
            }
        });
        let rhs = DMatrix::from_fn(n + 1, 1, |i, _| if i < n { self.b[i] * u } else { y - self.d * u });
        let sol = m.svd(true, true).solve(&rhs, 1e-14).map_err(|e| SimError::Invalid(e.to_string()))?;
        Ok((0..n).map(|i| sol[(i, 0)]).collect())
    }
}

const GV: usize = 0;
const GI: usize = 1;
const FCC: usize = 2;
const FV: usize = 3;
const BLOCK_NAMES: [&str; 4] = ["Gv", "Gi", "Fcc", "Fv"];

/// Parameters and realized blocks in force over one stretch between events.
#[derive(Clone, Debug)]
struct Plant {
    circuit: CircuitParams,
    outer: OuterLoopParams,
    frame: Frame,
    fvc: bool,
    td: f64,
    blocks: [Block; 4],
    offsets: [usize; 4],
    n: usize,
}

impl Plant {
    fn new(circuit: &CircuitParams, outer: &OuterLoopParams, cfg: &InnerLoopConfig) -> Result<Plant, SimError> {
        let fns = [&cfg.gv, &cfg.gi, &cfg.fcc, &cfg.fv];
        let mut blocks = Vec::with_capacity(4);
        for (name, rf) in BLOCK_NAMES.iter().zip(fns) {
            blocks.push(Block::new(name, rf)?);
        }
        let blocks: [Block; 4] = blocks.try_into().expect("four blocks");
        let mut offsets = [0; 4];
        let mut at = 1;
        for (k, b) in blocks.iter().enumerate() {
            offsets[k] = at;
            at += b.order();
        }
        Ok(Plant {
            circuit: circuit.clone(),
            outer: outer.clone(),
            frame: cfg.frame,
            fvc: cfg.fvc,
            td: cfg.gd.sim_delay(),
            blocks,
            offsets,
            n: at + 3,
        })
    }

    fn idx_xp(&self) -> usize {
        self.n - 3
    }

    fn idx_theta(&self) -> usize {
        self.n - 2
    }

    fn idx_e(&self) -> usize {
        self.n - 1
    }

    fn block_states<'a>(&self, x: &'a [Complex64], k: usize) -> &'a [Complex64] {
        &x[self.offsets[k]..self.offsets[k] + self.blocks[k].order()]
    }

    fn coupling(&self) -> f64 {
        self.circuit.lg / (self.circuit.lf + self.circuit.lg)
    }

    /// Controller output in the stationary frame and the block inputs.
    fn control(&self, x: &[Complex64], rot: Complex64, eref: Complex64, v: Complex64) -> (Complex64, [Complex64; 4]) {
        let vc = rot * v;
        let ic = rot * x[0];
        let fvc = if self.fvc { 1.0 } else { 0.0 };
        let u_gv = eref - vc * fvc;
        let y_gv = self.blocks[GV].output(self.block_states(x, GV), u_gv);
        let y_fcc = self.blocks[FCC].output(self.block_states(x, FCC), ic);
        let u_gi = y_gv - y_fcc;
        let y_gi = self.blocks[GI].output(self.block_states(x, GI), u_gi);
        let y_fv = self.blocks[FV].output(self.block_states(x, FV), vc);
        ((y_gi + y_fv) * rot.conj(), [u_gv, u_gi, ic, vc])
    }
}

/// Instantaneous quantities at one evaluation point.
#[derive(Clone, Copy, Debug)]
struct Outputs {
    i: Complex64,
    v: Complex64,
    uc: Complex64,
    p: f64,
    q: f64,
    theta: f64,
    e: f64,
}

/// Exogenous quantities of a scenario.
#[derive(Clone, Debug)]
struct Drive {
    start: Start,
    synchronization: Synchronization,
    avc: AvcMode,
    injection: Option<Injection>,
}

impl Drive {
    fn ramp(&self, t: f64) -> f64 {
        match self.start {
            Start::OperatingPoint => 1.0,
            Start::SoftStart => (t / SOFT_START).clamp(0.0, 1.0),
        }
    }
}

/// History of the modulation voltage, sampled at the step instants.
struct DelayLine {
    samples: Vec<Complex64>,
    /// Number of history samples before t = 0.
    head: usize,
}

impl DelayLine {
    /// Cubic Lagrange interpolation at fractional step position `pos` (0 ↔ t = 0).
    fn at(&self, pos: f64) -> Complex64 {
        let p = pos + self.head as f64;
        let last = self.samples.len() - 1;
        let base = ((p.floor() as isize) - 1).clamp(0, last as isize - 3) as usize;
        let u = p - base as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..4 {
            let mut w = 1.0;
            for m in 0..4 {
                if m != j {
                    w *= (u - m as f64) / (j as f64 - m as f64);
                }
            }
            acc += self.samples[base + j] * w;
        }
        acc
    }
}

struct Simulator<'a> {
    plant: Plant,
    drive: Drive,
    h: f64,
    omega1: f64,
    delay: DelayLine,
    scenario: &'a SimScenario,
}

impl Simulator<'_> {
    fn grid(&self, t: f64) -> Complex64 {
        let c = &self.plant.circuit;
        let vg = Complex64::from_polar(self.drive.ramp(t) * c.vg_mag, self.omega1 * t);
        vg + self.drive.injection.map_or(Complex64::new(0.0, 0.0), |inj| inj.voltage(t))
    }

    /// Evaluates outputs and, when `dx` is given, the state derivative at step
    /// position `pos` (time `pos·h`).
    fn eval(&self, pos: f64, x: &[Complex64], dx: Option<&mut [Complex64]>) -> Result<Outputs, SimError> {
        let pl = &self.plant;
        let t = pos * self.h;
        let r = self.drive.ramp(t);
        let vg = self.grid(t);
        let theta = x[pl.idx_theta()].re + self.drive.injection.map_or(0.0, |inj| inj.angle(t));
        let e = x[pl.idx_e()].re;
        let phi = self.omega1 * t + theta;
        let (rot, eref) = match pl.frame {
            Frame::Stationary => (Complex64::new(1.0, 0.0), Complex64::from_polar(r * e, phi)),
            Frame::Rotating => (Complex64::from_polar(1.0, -phi), Complex64::new(r * e, 0.0)),
        };
        let k = pl.coupling();
        let ui = if pl.td > 0.0 {
            self.delay.at(pos - pl.td / self.h)
        } else {
            // the modulation is affine in the PCC voltage: two evaluations fix it
            let a = pl.control(x, rot, eref, Complex64::new(0.0, 0.0)).0;
            let m = pl.control(x, rot, eref, Complex64::new(1.0, 0.0)).0 - a;
            let den = Complex64::new(1.0, 0.0) - m * k;
            if den.norm() < 1e-9 {
                return Err(SimError::IllPosedLoop { time: t });
            }
            (a + m * (1.0 - k) * vg) / den
        };
        let v = vg + (ui - vg) * k;
        let (uc, inputs) = pl.control(x, rot, eref, v);
        let i = x[0];
        let s = v * i.conj();
        let out = Outputs { i, v, uc, p: s.re, q: s.im, theta, e };
        if let Some(dx) = dx {
            let lt = pl.circuit.lf + pl.circuit.lg;
            dx[0] = (ui - vg) * (self.omega1 / lt);
            for (kb, u) in inputs.iter().enumerate() {
                let off = pl.offsets[kb];
                let n = pl.blocks[kb].order();
                pl.blocks[kb].derivative(&x[off..off + n], *u, &mut dx[off..off + n]);
            }
            let o = &pl.outer;
            let xp = x[pl.idx_xp()].re;
            let (dxp, dth) = match self.drive.synchronization {
                Synchronization::Psc => (o.omega_p * (self.omega1 * o.kpsc * (r * o.pref - s.re) - xp), xp),
                Synchronization::Fixed => (0.0, 0.0),
            };
            let de = match self.drive.avc {
                AvcMode::Active => o.kiv * (r * o.vref - v.norm()),
                AvcMode::Frozen => 0.0,
            };
            dx[pl.idx_xp()] = Complex64::new(dxp, 0.0);
            dx[pl.idx_theta()] = Complex64::new(dth, 0.0);
            dx[pl.idx_e()] = Complex64::new(de, 0.0);
        }
        Ok(out)
    }

    fn rk4(&self, k: usize, x: &[Complex64]) -> Result<Vec<Complex64>, SimError> {
        let n = x.len();
        let h = self.h;
        let pos = k as f64;
        let zero = Complex64::new(0.0, 0.0);
        let mut k1 = vec![zero; n];
        let mut k2 = vec![zero; n];
        let mut k3 = vec![zero; n];
        let mut k4 = vec![zero; n];
        let axpy = |a: f64, d: &[Complex64]| x.iter().zip(d).map(|(x, d)| x + d * a).collect::<Vec<_>>();
        self.eval(pos, x, Some(&mut k1))?;
        self.eval(pos + 0.5, &axpy(0.5 * h, &k1), Some(&mut k2))?;
        self.eval(pos + 0.5, &axpy(0.5 * h, &k2), Some(&mut k3))?;
        self.eval(pos + 1.0, &axpy(h, &k3), Some(&mut k4))?;
        Ok((0..n).map(|i| x[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0)).collect())
    }
}

/// Initial state and modulation history.
fn initial_state(s: &SimScenario, plant: &Plant, head: usize) -> Result<(Vec<Complex64>, Vec<Complex64>), SimError> {
    let zero = Complex64::new(0.0, 0.0);
    let mut x = vec![zero; plant.n];
    let w1 = s.circuit.omega1;
    match s.start {
        Start::SoftStart => {
            x[plant.idx_e()] = Complex64::new(s.outer.vref, 0.0);
            x[plant.idx_theta()] = Complex64::new(s.theta_kick, 0.0);
            Ok((x, vec![zero; head + 1]))
        }
        Start::OperatingPoint => {
            let op = s.equivalent_op()?;
            let (rot, eref, omega) = match plant.frame {
                Frame::Stationary => (Complex64::new(1.0, 0.0), op.emf(), w1),
                Frame::Rotating => (Complex64::from_polar(1.0, -op.theta0), Complex64::new(op.e0, 0.0), 0.0),
            };
            let vc = rot * op.v();
            let ic = rot * op.i();
            let fvc = if plant.fvc { 1.0 } else { 0.0 };
            let eval = |rf: &RationalFunction, u: Complex64| rf.evaluate(J * omega).map(|g| g * u);
            let cfg = &s.cfg;
            let u_gv = eref - vc * fvc;
            let y_gv = eval(&cfg.gv, u_gv)?;
            let y_fcc = eval(&cfg.fcc, ic)?;
            let u_gi = y_gv - y_fcc;
            let y_gi = eval(&cfg.gi, u_gi)?;
            let y_fv = eval(&cfg.fv, vc)?;
            let io = [(u_gv, y_gv), (u_gi, y_gi), (ic, y_fcc), (vc, y_fv)];
            for (kb, (u, y)) in io.into_iter().enumerate() {
                let z = plant.blocks[kb].steady_state(omega, u, y)?;
                let off = plant.offsets[kb];
                x[off..off + z.len()].copy_from_slice(&z);
            }
            x[0] = op.i();
            x[plant.idx_theta()] = Complex64::new(op.theta0 + s.theta_kick, 0.0);
            x[plant.idx_e()] = Complex64::new(op.e0, 0.0);
            // grid-frame modulation phasor, rotating at ω1 in the stationary frame
            let uc = (y_gi + y_fv) * rot.conj();
            let h = s.time_step;
            let history = (0..=head).map(|j| uc * Complex64::from_polar(1.0, w1 * h * (j as f64 - head as f64)));
            Ok((x, history.collect()))
        }
    }
}

/// Carries block states across a parameter change in canonical coordinates so
/// that the filter memory is preserved; blocks whose order changes restart at zero.
fn transfer_states(old: &Plant, new: &Plant, x: &[Complex64]) -> Vec<Complex64> {
    let mut y = vec![Complex64::new(0.0, 0.0); new.n];
    y[0] = x[0];
    for k in 0..4 {
        let (bo, bn) = (&old.blocks[k], &new.blocks[k]);
        if bo.order() != bn.order() {
            continue;
        }
        for j in 0..bo.order() {
            y[new.offsets[k] + j] = x[old.offsets[k] + j] * (bo.scale[j] / bn.scale[j]);
        }
    }
    y[new.idx_xp()] = x[old.idx_xp()];
    y[new.idx_theta()] = x[old.idx_theta()];
    y[new.idx_e()] = x[old.idx_e()];
    y
}

/// Runs the nonlinear averaged model with fixed-step RK4.
pub fn simulate(s: &SimScenario) -> Result<Trace, SimError> {
    s.validate()?;
    let h = s.time_step;
    let plant = Plant::new(&s.circuit, &s.outer, &s.cfg)?;
    let head = max_delay_steps(s, plant.td) + 4;
    let (mut x, history) = initial_state(s, &plant, head)?;
    let steps = s.samples() - 1;
    let mut samples = history;
    samples.reserve(steps + 1);
    let mut sim = Simulator {
        plant,
        drive: Drive { start: s.start, synchronization: s.synchronization, avc: s.avc, injection: s.injection },
        h,
        omega1: s.circuit.omega1,
        delay: DelayLine { samples, head },
        scenario: s,
    };
    let mut params = SystemParams {
        circuit: s.circuit.clone(),
        outer: s.outer.clone(),
        design: s.design.clone().unwrap_or_default(),
        frame: s.cfg.frame,
    };
    let mut pending = s.events.iter().peekable();
    let mut trace = Trace { omega1: sim.omega1, ..Trace::default() };
    for k in 0..=steps {
        let t = k as f64 * h;
        while let Some(ev) = pending.next_if(|e| e.time <= t + 0.5 * h) {
            x = sim.apply_event(&mut params, ev, &x)?;
        }
        let out = sim.eval(k as f64, &x, None)?;
        trace.push(t, &out);
        if let Some((quantity, value)) = blow_up(&out, &x) {
            return Err(SimError::BlowUp { time: t, quantity, value, trace: Box::new(trace) });
        }
        if k == steps {
            break;
        }
        x = sim.rk4(k, &x)?;
        let uc = sim.eval((k + 1) as f64, &x, None)?.uc;
        sim.delay.samples.push(uc);
    }
    Ok(trace)
}

impl Simulator<'_> {
    fn apply_event(&mut self, params: &mut SystemParams, ev: &Event, x: &[Complex64]) -> Result<Vec<Complex64>, SimError> {
        params.set_f64(&ev.path, ev.value)?;
        let cfg = if ev.path.starts_with("inner.") { params.config()? } else { self.scenario.cfg.clone() };
        params.circuit.validate()?;
        params.outer.validate()?;
        let plant = Plant::new(&params.circuit, &params.outer, &cfg)?;
        let td_steps = plant.td / self.h;
        if plant.td > 0.0 && (td_steps < 1.0 || td_steps.ceil() as usize + 4 > self.delay.head) {
            return Err(SimError::Invalid(format!("event {} changes the delay beyond the buffer", ev.path)));
        }
        if plant.td > 0.0 && self.plant.td == 0.0 {
            return Err(SimError::Invalid("cannot switch from zero to non-zero delay during a run".into()));
        }
        let y = transfer_states(&self.plant, &plant, x);
        self.omega1 = params.circuit.omega1;
        self.plant = plant;
        Ok(y)
    }
}

fn max_delay_steps(s: &SimScenario, td: f64) -> usize {
    // leave room for delay-increasing events
    let mut steps = (td / s.time_step).ceil() as usize;
    for e in s.events.iter().filter(|e| e.path == "inner.td") {
        steps = steps.max((e.value / s.time_step).ceil() as usize);
    }
    steps
}

fn blow_up(out: &Outputs, x: &[Complex64]) -> Option<(&'static str, f64)> {
    let checks = [("current", out.i.norm()), ("PCC voltage", out.v.norm()), ("modulation", out.uc.norm()), ("EMF", out.e.abs())];
    for (name, value) in checks {
        if !value.is_finite() || value > BLOW_UP {
            return Some((name, value));
        }
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Some(("state", f64::NAN));
    }
    None
}

fn invalid(cond: bool, msg: &str) -> Result<(), SimError> {
    if cond {
        Ok(())
    } else {
        Err(SimError::Invalid(msg.to_string()))
    }
}
