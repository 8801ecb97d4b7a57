use std::f64::consts::PI;

use rayon::prelude::*;

use super::{simulate, Injection, InjectionTarget, SimError, SimScenario, Start, Synchronization, Trace};
use crate::closedloop::AvcMode;
use crate::numeric::{Complex64, J};

/// Transient discarded before every scan window, s.
pub const SCAN_SETTLE: f64 = 1.0;
/// Minimum scan window, rounded up to whole perturbation periods, s.
pub const SCAN_WINDOW: f64 = 0.4;
/// Largest accepted single-frequency fit residual.
pub const QUALITY_LIMIT: f64 = 0.05;

/// Frequency-scan measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub freq_hz: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Relative residual of the single-frequency fit per point.
    pub quality: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilityClass {
    Stable,
    Unstable,
    Marginal,
}

impl StabilityClass {
    pub fn name(self) -> &'static str {
        match self {
            StabilityClass::Stable => "stable",
            StabilityClass::Unstable => "unstable",
            StabilityClass::Marginal => "marginal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Classification {
    pub class: StabilityClass,
    pub dominant_hz: f64,
    /// Least-squares slope of the log peak envelope, 1/s.
    pub growth_rate: f64,
}

/// Growth-rate magnitude separating stable/unstable from marginal, 1/s.
const GROWTH_THRESHOLD: f64 = 0.5;

struct Window {
    start: usize,
    len: usize,
}

fn window(freq_hz: f64, h: f64) -> Window {
    let periods = (SCAN_WINDOW * freq_hz).ceil().max(1.0);
    Window { start: (SCAN_SETTLE / h).round() as usize, len: (periods / (freq_hz * h)).round() as usize }
}

fn scan_base(base: &SimScenario, sync: Synchronization, avc: AvcMode) -> SimScenario {
    SimScenario {
        events: Vec::new(),
        injection: None,
        start: Start::OperatingPoint,
        synchronization: sync,
        avc,
        theta_kick: 0.0,
        ..base.clone()
    }
}

fn with_injection(sc: &SimScenario, target: InjectionTarget, freq_hz: f64, amplitude: f64, w: &Window) -> SimScenario {
    SimScenario {
        injection: Some(Injection { target, freq_hz, amplitude, start: 0.0 }),
        duration: (w.start + w.len) as f64 * sc.time_step,
        ..sc.clone()
    }
}

/// Complex amplitude of `x` at `omega`, with the residual of the fit relative to the fit.
///
/// The window spans whole periods, so a constant offset (the undamped dc
/// transient of a lossless circuit) does not bias the amplitude; it is removed
/// before the residual is formed.
fn project(x: &[Complex64], t: &[f64], omega: f64) -> (Complex64, f64) {
    let n = x.len() as f64;
    let rot: Vec<Complex64> = t.iter().map(|&t| Complex64::from_polar(1.0, omega * t)).collect();
    let amp = x.iter().zip(&rot).map(|(x, r)| x * r.conj()).sum::<Complex64>() / n;
    let mean = x.iter().sum::<Complex64>() / n;
    let resid = x.iter().zip(&rot).map(|(x, r)| (x - mean - amp * r).norm_sqr()).sum::<f64>();
    (amp, (resid / (n * amp.norm_sqr())).sqrt())
}

/// Cosine/sine amplitude of a real signal: `x ≈ c + Re(X·e^{jωt})`.
fn project_real(x: &[f64], t: &[f64], omega: f64) -> (Complex64, f64) {
    let n = x.len() as f64;
    let amp = x.iter().zip(t).map(|(x, &t)| Complex64::from_polar(*x, -omega * t)).sum::<Complex64>() * (2.0 / n);
    let mean = x.iter().sum::<f64>() / n;
    let fit = |t: f64| (amp * Complex64::from_polar(1.0, omega * t)).re;
    let resid = x.iter().zip(t).map(|(x, &t)| (x - mean - fit(t)).powi(2)).sum::<f64>();
    let norm = t.iter().map(|&t| fit(t).powi(2)).sum::<f64>();
    (amp, (resid / norm).sqrt())
}

fn check_quality(freq_hz: f64, quality: f64) -> Result<(), SimError> {
    if quality.is_finite() && quality < QUALITY_LIMIT {
        Ok(())
    } else {
        Err(SimError::Quality { freq_hz, quality })
    }
}

/// Measures `Zeq(j2πf) = −ΔV/ΔI` by positive-sequence injection in the grid EMF
/// with the outer loops disabled (angle and EMF magnitude held).
pub fn scan_impedance(base: &SimScenario, freqs_hz: &[f64], amplitude: f64) -> Result<ScanResult, SimError> {
    if !(amplitude > 0.0 && amplitude <= 0.02) {
        return Err(SimError::Invalid("impedance scan amplitude must be in (0, 0.02] pu".into()));
    }
    let sc = scan_base(base, Synchronization::Fixed, AvcMode::Frozen);
    let h = sc.time_step;
    let windows: Vec<Window> = freqs_hz.iter().map(|&f| window(f, h)).collect();
    let longest = windows.iter().map(|w| w.start + w.len).max().unwrap_or(0);
    let baseline = simulate(&SimScenario { duration: longest as f64 * h, ..sc.clone() })?;
    let points: Vec<Result<(Complex64, f64), SimError>> = freqs_hz
        .par_iter()
        .zip(&windows)
        .map(|(&f, w)| {
            let tr = simulate(&with_injection(&sc, InjectionTarget::GridVoltage, f, amplitude, w))?;
            let range = w.start..w.start + w.len;
            let t = &tr.t[range.clone()];
            let dv: Vec<Complex64> = range.clone().map(|k| tr.voltage(k) - baseline.voltage(k)).collect();
            let di: Vec<Complex64> = range.map(|k| tr.current(k) - baseline.current(k)).collect();
            let omega = 2.0 * PI * f;
            let (v, qv) = project(&dv, t, omega);
            let (i, qi) = project(&di, t, omega);
            let quality = qv.max(qi);
            check_quality(f, quality)?;
            Ok((-v / i, quality))
        })
        .collect();
    collect(freqs_hz, points)
}

/// Measures `ΔP/Δθ` by driving the synchronization angle with `±amplitude`
/// sinusoids; the pair difference cancels the operating point and even-order terms.
pub fn scan_torque(base: &SimScenario, freqs_hz: &[f64], amplitude: f64, avc: AvcMode) -> Result<ScanResult, SimError> {
    if !(amplitude > 0.0 && amplitude <= 0.01) {
        return Err(SimError::Invalid("angle scan amplitude must be in (0, 0.01] rad".into()));
    }
    let sc = scan_base(base, Synchronization::Fixed, avc);
    let h = sc.time_step;
    let points: Vec<Result<(Complex64, f64), SimError>> = freqs_hz
        .par_iter()
        .map(|&f| {
            let w = window(f, h);
            let up = simulate(&with_injection(&sc, InjectionTarget::Angle, f, amplitude, &w))?;
            let down = simulate(&with_injection(&sc, InjectionTarget::Angle, f, -amplitude, &w))?;
            let range = w.start..w.start + w.len;
            let t = &up.t[range.clone()];
            let dp: Vec<f64> = range.clone().map(|k| 0.5 * (up.p[k] - down.p[k])).collect();
            let dth: Vec<f64> = range.map(|k| 0.5 * (up.theta[k] - down.theta[k])).collect();
            let omega = 2.0 * PI * f;
            let (p, quality) = project_real(&dp, t, omega);
            let (th, _) = project_real(&dth, t, omega);
            check_quality(f, quality)?;
            Ok((p / th, quality))
        })
        .collect();
    collect(freqs_hz, points)
}

fn collect(freqs_hz: &[f64], points: Vec<Result<(Complex64, f64), SimError>>) -> Result<ScanResult, SimError> {
    let mut out = ScanResult { freq_hz: freqs_hz.to_vec(), values: Vec::new(), quality: Vec::new() };
    for p in points {
        let (v, q) = p?;
        out.values.push(v);
        out.quality.push(q);
    }
    Ok(out)
}

/// Classifies the active-power oscillation of a trace after `window_start`.
pub fn classify_stability(trace: &Trace, window_start: f64) -> Result<Classification, SimError> {
    let f1 = trace.omega1 / (2.0 * PI);
    let required = window_start + 20.0 / f1;
    let available = trace.t.last().copied().unwrap_or(0.0);
    let h = trace.time_step();
    if available < required || h <= 0.0 {
        return Err(SimError::WindowTooShort { available, required });
    }
    let k0 = trace.t.iter().position(|&t| t >= window_start - 0.5 * h).unwrap_or(0);
    let t = &trace.t[k0..];
    let x = detrend(t, &trace.p[k0..]);

    // dominant frequency on decimated samples (content of interest is below 100 Hz)
    let stride = ((1e-3 / h).round() as usize).max(1);
    let ts: Vec<f64> = t.iter().step_by(stride).copied().collect();
    let xs: Vec<f64> = x.iter().step_by(stride).copied().collect();
    let power = |f: f64| {
        let w = 2.0 * PI * f;
        xs.iter().zip(&ts).map(|(x, &t)| x * (-J * w * t).exp()).sum::<Complex64>().norm()
    };
    let df: f64 = 0.05;
    let grid: Vec<f64> = (0..=((100.0 - 1.0) / df).round() as usize).map(|k| 1.0 + k as f64 * df).collect();
    let mags: Vec<f64> = grid.iter().map(|&f| power(f)).collect();
    let best = (0..mags.len()).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).expect("non-empty grid");
    let mut dominant = grid[best];
    if best > 0 && best + 1 < mags.len() {
        let (a, b, c) = (mags[best - 1], mags[best], mags[best + 1]);
        let den = a - 2.0 * b + c;
        if den.abs() > 0.0 {
            dominant += 0.5 * df * (a - c) / den;
        }
    }

    let span = t.len();
    let mut chunk = ((1.0 / dominant) / h).round() as usize;
    if span / chunk.max(1) < 4 {
        chunk = span / 4;
    }
    let (mut et, mut el) = (Vec::new(), Vec::new());
    let mut k = 0;
    while k + chunk <= span {
        let (kp, peak) = (k..k + chunk).map(|j| (j, x[j].abs())).fold((k, 0.0), |m, c| if c.1 > m.1 { c } else { m });
        if peak > 0.0 {
            et.push(t[kp]);
            el.push(peak.ln());
        }
        k += chunk;
    }
    if et.len() < 3 {
        return Err(SimError::WindowTooShort { available, required });
    }
    let growth_rate = slope(&et, &el);
    let class = if growth_rate > GROWTH_THRESHOLD {
        StabilityClass::Unstable
    } else if growth_rate < -GROWTH_THRESHOLD {
        StabilityClass::Stable
    } else {
        StabilityClass::Marginal
    };
    Ok(Classification { class, dominant_hz: dominant, growth_rate })
}

fn slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(y).map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = t.iter().map(|t| (t - mt).powi(2)).sum();
    sxy / sxx
}

fn detrend(t: &[f64], x: &[f64]) -> Vec<f64> {
    let b = slope(t, x);
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let mx = x.iter().sum::<f64>() / n;
    x.iter().zip(t).map(|(x, t)| x - mx - b * (t - mt)).collect()
}
