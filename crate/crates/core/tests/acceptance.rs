//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod support;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use gfmlab_core::closedloop::*;
use gfmlab_core::converter::*;
use gfmlab_core::emt::*;
use gfmlab_core::numeric::{hz_log_grid, Complex64, J};
use gfmlab_core::torque::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};
use rayon::prelude::*;

const W1: f64 = OMEGA1;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn params(sets: &[(&str, f64)]) -> SystemParams {
    let mut p = SystemParams::default();
    for (k, v) in sets {
        p.set_f64(k, *v).expect("known parameter");
    }
    p
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn model(p: &SystemParams, frame: Frame, options: &AssemblyOptions) -> Result<SmallSignalModel, String> {
    let op = p.operating_point().map_err(err)?;
    let cfg = p.design.config(frame, p.circuit.omega1).map_err(err)?;
    assemble_model(frame, &p.circuit, &p.outer, &cfg, &op, options).map_err(err)
}

fn poles(p: &SystemParams) -> Result<PoleSet, String> {
    closed_loop_poles(&model(p, p.frame, &AssemblyOptions::default())?).map_err(err)
}

fn power_angle(p: &SystemParams) -> Result<PowerAngleModel, String> {
    PowerAngleModel::new(&p.operating_point().map_err(err)?, &p.equivalent().map_err(err)?, &p.circuit).map_err(err)
}

fn verdict(p: &SystemParams) -> Result<StabilityVerdict, String> {
    let pa = power_angle(p)?;
    let e = |w: f64| pa.power_angle(J * w);
    let prof = complex_torque_profile(&e, &p.outer.gpsc(W1), MechanicalPath::default(), &default_torque_grid(), W1)
        .map_err(err)?;
    Ok(net_damping_verdict(&prof))
}

/// Angle-kicked run, kept up to the blow-up point if it diverges.
fn kicked(p: &SystemParams, duration: f64, kick: f64) -> Result<Trace, String> {
    let sc = SimScenario { theta_kick: kick, ..SimScenario::from_params(p, duration).map_err(err)? };
    match simulate(&sc) {
        Ok(t) => Ok(t),
        Err(SimError::BlowUp { trace, .. }) => Ok(*trace),
        Err(e) => Err(e.to_string()),
    }
}

fn classify(p: &SystemParams, duration: f64, kick: f64, from: f64) -> Result<Classification, String> {
    classify_stability(&kicked(p, duration, kick)?, from).map_err(err)
}

/// Mean stationary-frame current over the last `periods` fundamental periods, relative to its amplitude.
fn dc_offset(tr: &Trace, periods: f64) -> f64 {
    let n = tr.len();
    let m = (periods / 50.0 / tr.time_step()).round() as usize;
    let mean = (n - m..n).map(|k| tr.current(k)).sum::<Complex64>() / m as f64;
    let amp = (n - m..n).map(|k| tr.current(k).norm()).sum::<f64>() / m as f64;
    mean.norm() / amp
}

fn spread(f: &[f64]) -> f64 {
    let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo - 1.0
}

fn req5(p: &SystemParams) -> Result<f64, String> {
    Ok(p.equivalent().map_err(err)?.zeq.at_jw(2.0 * PI * 5.0).map_err(err)?.re)
}

fn impedance_oracle() -> Outcome {
    let freqs: Vec<f64> = hz_log_grid(2.0, 200.0, 10).iter().map(|w| w / (2.0 * PI)).collect();
    let (mut mag, mut phase) = (0.0f64, 0.0f64);
    for frame in [Frame::Stationary, Frame::Rotating] {
        let p = SystemParams { frame, ..SystemParams::default() };
        let zeq = p.equivalent().map_err(err)?.zeq;
        let scan = scan_impedance(&SimScenario::from_params(&p, 1.0).map_err(err)?, &freqs, 0.02).map_err(err)?;
        for (k, f) in freqs.iter().enumerate() {
            let z = zeq.at_jw(2.0 * PI * f).map_err(err)?;
            mag = mag.max((scan.values[k].norm() / z.norm() - 1.0).abs());
            phase = phase.max((scan.values[k] / z).arg().to_degrees().abs());
        }
    }
    ensure!(mag < 0.02 && phase < 2.0, "magnitude error {:.3}%, phase error {phase:.3} deg", 100.0 * mag);
    Ok(format!("both realizations, 10 points: magnitude error {:.3}%, phase error {phase:.3} deg", 100.0 * mag))
}

fn high_gain_asymptote() -> Outcome {
    let p = params(&[("inner.kpi", 1000.0)]);
    let zeq = p.equivalent().map_err(err)?.zeq;
    let d = &p.design;
    let zeta = d.notch.zeta;
    let mut worst = 0.0f64;
    for w in hz_log_grid(1.0, 100.0, 400) {
        let s = J * w;
        let gr = (s * s + W1 * W1) / (s * s + 2.0 * zeta * W1 * s + W1 * W1);
        let target = d.lv / W1 * s + d.rv * gr;
        worst = worst.max((zeq.evaluate(s).map_err(err)? - target).norm() / target.norm());
    }
    ensure!(worst < 0.01, "sup relative deviation {:.3}%", 100.0 * worst);
    Ok(format!("kpi = 1000: sup relative deviation {:.4}%", 100.0 * worst))
}

fn impedance_trends() -> Outcome {
    let rv = 0.1;
    let by_kpi = [0.5, 1.0, 2.0, 3.0]
        .iter()
        .map(|&k| req5(&params(&[("inner.rv", rv), ("inner.kpi", k)])))
        .collect::<Result<Vec<_>, _>>()?;
    ensure!(by_kpi.windows(2).all(|w| w[1] >= w[0]), "Req(5 Hz) over kpi not nondecreasing: {by_kpi:?}");
    ensure!(by_kpi.iter().all(|&r| r <= rv), "Req(5 Hz) above Rv: {by_kpi:?}");
    let fv0 = req5(&params(&[("inner.rv", rv)]))?;
    let fv1 = req5(&params(&[("inner.rv", rv), ("inner.fv", 1.0)]))?;
    ensure!(fv1 >= fv0, "Fv = 1 gives {fv1} < Fv = 0 {fv0}");
    let by_rv = [0.08, 0.10, 0.12].iter().map(|&r| req5(&params(&[("inner.rv", r)]))).collect::<Result<Vec<_>, _>>()?;
    ensure!(by_rv.windows(2).all(|w| w[1] >= w[0]), "Req(5 Hz) over Rv not nondecreasing: {by_rv:?}");
    let a = req5(&params(&[("inner.lv", 0.1)]))?;
    let b = req5(&params(&[("inner.lv", 0.3)]))?;
    let change = ((b - a) / a).abs();
    ensure!(change < 0.1, "Lv 0.1 -> 0.3 changes Req(5 Hz) by {:.2}%", 100.0 * change);
    Ok(format!(
        "Req(5 Hz) kpi {:.4?}, Rv {:.4?}, Fv {fv0:.4} -> {fv1:.4}, Lv change {:.2}%",
        by_kpi,
        by_rv,
        100.0 * change
    ))
}

struct ThreeWay {
    verdict_stable: bool,
    mode: ModeLabel,
    poles_stable: bool,
    sim: StabilityClass,
    freqs: [f64; 3],
}

fn three_way(p: &SystemParams, duration: f64, kick: f64, from: f64) -> Result<ThreeWay, String> {
    let v = verdict(p)?;
    let worst = v.worst().ok_or("no crossing of Km + Ke")?;
    let ps = poles(p)?;
    let dom = ps.dominant().ok_or("no poles")?;
    let c = classify(p, duration, kick, from)?;
    Ok(ThreeWay {
        verdict_stable: v.stable,
        mode: worst.label,
        poles_stable: ps.is_stable(),
        sim: c.class,
        freqs: [worst.f_star_hz(), dom.value.im.abs() / (2.0 * PI), c.dominant_hz],
    })
}

fn stability_flip() -> Outcome {
    let stable = three_way(&params(&[("inner.rv", 0.05)]), 3.0, 0.01, 0.3)?;
    let unstable = three_way(&params(&[("inner.rv", 0.10)]), 1.5, 1e-4, 0.2)?;
    ensure!(
        stable.verdict_stable && stable.poles_stable && stable.sim == StabilityClass::Stable,
        "Rv 0.05: verdict {}, poles {}, simulator {}",
        stable.verdict_stable,
        stable.poles_stable,
        stable.sim.name()
    );
    ensure!(
        !unstable.verdict_stable && !unstable.poles_stable && unstable.sim == StabilityClass::Unstable,
        "Rv 0.10: verdict {}, poles {}, simulator {}",
        unstable.verdict_stable,
        unstable.poles_stable,
        unstable.sim.name()
    );
    ensure!(unstable.mode == ModeLabel::Sso, "Rv 0.10 mode {:?}", unstable.mode);
    for (name, r) in [("0.05", &stable), ("0.10", &unstable)] {
        ensure!(spread(&r.freqs) < 0.2, "Rv {name}: frequencies {:?} disagree", r.freqs);
    }
    Ok(format!(
        "Rv 0.05 stable, Rv 0.10 unstable SSO; Hz (net damping, pole, simulator): {:.2?} and {:.2?}",
        stable.freqs, unstable.freqs
    ))
}

fn inductance_recovery() -> Outcome {
    let r = three_way(&params(&[("inner.rv", 0.10), ("inner.lv", 0.3)]), 3.0, 0.01, 0.3)?;
    ensure!(
        r.verdict_stable && r.poles_stable && r.sim == StabilityClass::Stable,
        "verdict {}, poles {}, simulator {}",
        r.verdict_stable,
        r.poles_stable,
        r.sim.name()
    );
    Ok(format!("Rv 0.10, Lv 0.3 stable under all three methods; Hz {:.2?}", r.freqs))
}

fn grid_strength_ordering() -> Outcome {
    let grid = hz_log_grid(5.0, 30.0, 100);
    let de = |lg: f64| -> Result<Vec<f64>, String> {
        let pa = power_angle(&params(&[("circuit.lg", lg)]))?;
        grid.iter().map(|&w| Ok(pa.power_angle(J * w).map_err(err)?.im / w)).collect()
    };
    let weak = de(0.8)?;
    let stiff = de(0.05)?;
    let margin = weak.iter().zip(&stiff).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    ensure!(margin > 0.0, "De(Lg 0.8) - De(Lg 0.05) reaches {margin}");
    Ok(format!("min De(Lg 0.8) - De(Lg 0.05) over 5-30 Hz = {margin:.4e}"))
}

fn frame_damping() -> Outcome {
    let zeta = |pref: f64| -> Result<[f64; 4], String> {
        let p = params(&[("outer.pref", pref)]);
        let ab = closed_loop_poles(&model(&p, Frame::Stationary, &AssemblyOptions::default())?).map_err(err)?;
        let dq = closed_loop_poles(&model(&p, Frame::Rotating, &AssemblyOptions::default())?).map_err(err)?;
        let z = |x: Option<Pole>| x.map(|p| p.zeta).ok_or("missing pole pair".to_string());
        Ok([z(ab.sso_pair())?, z(dq.sso_pair())?, z(ab.so_pair())?, z(dq.so_pair())?])
    };
    let [sso_ab, sso_dq, so_ab, so_dq] = zeta(1.0)?;
    ensure!(sso_dq > sso_ab && so_dq < so_ab, "inverter: SSO {sso_ab} / {sso_dq}, SO {so_ab} / {so_dq}");
    let [rsso_ab, rsso_dq, rso_ab, rso_dq] = zeta(-1.0)?;
    ensure!(rsso_dq < rsso_ab && rso_dq > rso_ab, "rectifier: SSO {rsso_ab} / {rsso_dq}, SO {rso_ab} / {rso_dq}");
    Ok(format!(
        "zeta stationary/rotating: inverter SSO {sso_ab:.4}/{sso_dq:.4}, SO {so_ab:.4}/{so_dq:.4}; \
         rectifier SSO {rsso_ab:.4}/{rsso_dq:.4}, SO {rso_ab:.4}/{rso_dq:.4}"
    ))
}

fn step_ordering() -> Outcome {
    let over = |pref: f64, frame: Frame| -> Result<f64, String> {
        let p = params(&[("outer.pref", pref), ("inner.lv", 0.3)]);
        let step = 0.1 * pref.signum();
        let r = step_response(&model(&p, frame, &AssemblyOptions::default())?, step, 3.0, 1e-4).map_err(err)?;
        let target = pref + step;
        let fin = pref + r.final_value;
        ensure!(!r.diverging && r.settling_time.is_some(), "{frame:?} {pref}: response does not settle");
        ensure!(((fin - target) / target).abs() < 0.02, "{frame:?} {pref}: final {fin} vs {target}");
        Ok(r.overshoot)
    };
    let (inv_ab, inv_dq) = (over(1.0, Frame::Stationary)?, over(1.0, Frame::Rotating)?);
    let (rec_ab, rec_dq) = (over(-1.0, Frame::Stationary)?, over(-1.0, Frame::Rotating)?);
    ensure!(inv_dq < inv_ab, "inverter overshoot rotating {inv_dq} >= stationary {inv_ab}");
    ensure!(rec_dq > rec_ab, "rectifier overshoot rotating {rec_dq} <= stationary {rec_ab}");
    Ok(format!(
        "overshoot stationary/rotating: inverter {inv_ab:.4}/{inv_dq:.4}, rectifier {rec_ab:.4}/{rec_dq:.4}; final within 2%"
    ))
}

fn cross_model() -> Outcome {
    let p = SystemParams::default();
    let pa = power_angle(&p)?;
    let kiv = p.outer.kiv;
    let opts = AssemblyOptions { theta: ThetaSource::External, avc: AvcMode::Frozen, coupling: None };
    let frozen = model(&p, Frame::Stationary, &opts)?;
    let active = model(&p, Frame::Stationary, &AssemblyOptions { avc: AvcMode::Active, ..opts })?;
    let (mut e_frozen, mut e_active) = (0.0f64, 0.0f64);
    for w in hz_log_grid(1.0, 100.0, 400) {
        let a = frozen.state_space.channel(OUT_P, IN_THETA, J * w).map_err(err)?;
        let b = pa.power_angle(J * w).map_err(err)?;
        e_frozen = e_frozen.max((a - b).norm() / b.norm());
        let a = active.state_space.channel(OUT_P, IN_THETA, J * w).map_err(err)?;
        let b = pa.power_angle_with_avc(J * w, kiv).map_err(err)?;
        e_active = e_active.max((a - b).norm() / b.norm());
    }
    ensure!(e_frozen < 0.01 && e_active < 0.01, "state space vs power-angle: frozen {e_frozen:e}, active {e_active:e}");
    let freqs: Vec<f64> = hz_log_grid(1.0, 100.0, 8).iter().map(|w| w / (2.0 * PI)).collect();
    let sc = SimScenario::from_params(&p, 1.0).map_err(err)?;
    let mut e_scan = 0.0f64;
    for (avc, ss) in [(AvcMode::Frozen, &frozen), (AvcMode::Active, &active)] {
        let scan = scan_torque(&sc, &freqs, 0.01, avc).map_err(err)?;
        for (k, hz) in freqs.iter().enumerate() {
            let s = J * 2.0 * PI * hz;
            let analytic = match avc {
                AvcMode::Frozen => pa.power_angle(s),
                AvcMode::Active => pa.power_angle_with_avc(s, kiv),
            }
            .map_err(err)?;
            let assembled = ss.state_space.channel(OUT_P, IN_THETA, s).map_err(err)?;
            for b in [analytic, assembled] {
                e_scan = e_scan.max((scan.values[k] - b).norm() / b.norm());
            }
        }
    }
    ensure!(e_scan < 0.02, "simulator torque scans deviate by {:.3}%", 100.0 * e_scan);
    Ok(format!(
        "frozen {e_frozen:.1e}, active {e_active:.1e} over 1-100 Hz; scans within {:.3}% at 8 points",
        100.0 * e_scan
    ))
}

fn so_case(sets: &[(&str, f64)]) -> SystemParams {
    let mut p = params(&[("outer.kpsc", 0.17), ("outer.omega_p", 2.0 * PI * 1000.0), ("inner.rv", 0.08), ("inner.kpi", 0.5)]);
    for (k, v) in sets {
        p.set_f64(k, *v).expect("known parameter");
    }
    p
}

fn so_reproduction() -> Outcome {
    let so = |sets: &[(&str, f64)]| classify(&so_case(sets), 0.6, 1e-6, 0.1);
    let base = so(&[])?;
    ensure!(base.class == StabilityClass::Unstable, "Kpsc 0.17, Fv 0 classified {}", base.class.name());
    ensure!((45.0..=55.0).contains(&base.dominant_hz), "dominant {} Hz outside [45, 55]", base.dominant_hz);
    let grown = kicked(&so_case(&[]), 1.5, 1e-6)?;
    let stable_fv = kicked(&so_case(&[("inner.fv", 1.0)]), 1.5, 1e-6)?;
    let (dc_u, dc_s) = (dc_offset(&grown, 5.0), dc_offset(&stable_fv, 5.0));
    ensure!(dc_u > 1e-2 && dc_s < 1e-4, "dc offset unstable {dc_u:e}, stabilized {dc_s:e}");
    let cases = [
        ("Fv 1", vec![("inner.fv", 1.0)], StabilityClass::Stable),
        ("kpi 3", vec![("inner.kpi", 3.0)], StabilityClass::Stable),
        ("kpi 3, Rv 0.05", vec![("inner.kpi", 3.0), ("inner.rv", 0.05)], StabilityClass::Unstable),
        ("kpi 3, Rv 0.10", vec![("inner.kpi", 3.0), ("inner.rv", 0.10)], StabilityClass::Stable),
    ];
    let mut notes = vec![format!("Fv 0 unstable at {:.2} Hz, current dc offset {:.1e}", base.dominant_hz, dc_u)];
    for (name, sets, want) in cases {
        let c = so(&sets)?;
        ensure!(c.class == want, "{name}: classified {} (growth {:.3})", c.class.name(), c.growth_rate);
        notes.push(format!("{name} {}", c.class.name()));
    }
    Ok(notes.join("; "))
}

fn run<T: std::fmt::Debug>(name: &str, r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| format!("{name}: {e}"))
}

fn property_suite() -> Outcome {
    let runner = || TestRunner::new_with_rng(Config { cases: 256, failure_persistence: None, ..Config::default() }, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    run("root reconstruction", runner().run(&support::root_sets(), |(r, l)| support::check_root_reconstruction(&r, l)))?;
    run(
        "coefficient reconstruction",
        runner().run(&(2..=11usize).prop_flat_map(|n| prop::collection::vec(-3.0..3.0f64, n)), |c| {
            support::check_coefficient_reconstruction(&c)
        }),
    )?;
    run("eigenvalues", runner().run(&support::matrices_8x8(), |m| support::check_eigen_vs_char_poly(&m)))?;
    run("embedding", runner().run(&support::real_rf(4), |z| support::check_embedding(&z)))?;
    run(
        "frequency translation",
        runner().run(&(support::real_rf(4), support::complex_in(2.0 * W1)), |(z, s)| support::check_translation(&z, s)),
    )?;
    Ok("256 cases each: roots 1e-6, eigenvalues 1e-6, embedding 1e-9, translation 1e-10".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("impedance oracle match", impedance_oracle),
        ("high-gain asymptote", high_gain_asymptote),
        ("impedance trend suite", impedance_trends),
        ("virtual resistance stability flip", stability_flip),
        ("virtual inductance recovery", inductance_recovery),
        ("grid-strength damping ordering", grid_strength_ordering),
        ("frame damping comparison", frame_damping),
        ("step overshoot ordering", step_ordering),
        ("cross-model consistency", cross_model),
        ("synchronous oscillation reproduction", so_reproduction),
        ("numeric property suite", property_suite),
    ];
    let start = Instant::now();
    let results: Vec<(Outcome, f64)> = criteria
        .par_iter()
        .map(|(_, f)| {
            let t = Instant::now();
            (f(), t.elapsed().as_secs_f64())
        })
        .collect();
    let mut failed = 0;
    for (k, ((name, _), (outcome, secs))) in criteria.iter().zip(&results).enumerate() {
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} {name} ({secs:.1} s): {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name} ({secs:.1} s): {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} of 11 passed in {:.1} s", 11 - failed, start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
