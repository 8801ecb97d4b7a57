use std::f64::consts::PI;

use gfmlab_core::closedloop::*;
use gfmlab_core::converter::*;
use gfmlab_core::numeric::{hz_log_grid, Complex64, J};
use gfmlab_core::torque::PowerAngleModel;

const W1: f64 = OMEGA1;

struct Setup {
    circuit: CircuitParams,
    outer: OuterLoopParams,
    design: VirtualAdmittanceDesign,
}

impl Setup {
    fn new(lg: f64, pref: f64, f: impl FnOnce(&mut VirtualAdmittanceDesign)) -> Setup {
        let mut design = VirtualAdmittanceDesign::default();
        f(&mut design);
        Setup {
            circuit: CircuitParams { lg, ..Default::default() },
            outer: OuterLoopParams { pref, ..Default::default() },
            design,
        }
    }

    fn equivalent(&self, frame: Frame) -> (InnerLoopConfig, Equivalent) {
        let cfg = self.design.config(frame, W1).unwrap();
        let eq = derive_equivalent_impedance(&cfg, self.circuit.lf, W1).unwrap();
        (cfg, eq)
    }

    fn op(&self) -> OperatingPoint {
        let (_, eq) = self.equivalent(Frame::Stationary);
        solve_operating_point(&self.circuit, &self.outer, &eq).unwrap()
    }

    fn model(&self, frame: Frame, options: &AssemblyOptions) -> SmallSignalModel {
        let (cfg, _) = self.equivalent(frame);
        assemble_model(frame, &self.circuit, &self.outer, &cfg, &self.op(), options).unwrap()
    }
}

#[test]
fn coupling_examples() {
    let s = Setup::new(0.05, 0.0, |d| {
        d.fv = 1.0;
        d.delay = DelayModel::neglect();
    });
    let op = s.op();
    let c = coupling_matrices(&op);
    assert!((c.g_e[0]).abs() < 1e-12 && (c.g_e[1] - 1.0).abs() < 1e-12, "{c:?}");
    assert_eq!(c.g_i, [op.iq0, -op.id0]);
    assert!(c.g_i[0].abs() < 1e-12 && c.g_i[1].abs() < 1e-12);
}

#[test]
fn filter_drop_identity() {
    for lg in [0.05, 0.3, 0.8] {
        let s = Setup::new(lg, 0.7, |d| d.delay = DelayModel::neglect());
        let op = s.op();
        let c = coupling_matrices(&op);
        let sum = ((c.g_u[0] + c.g_ui[0]).powi(2) + (c.g_u[1] + c.g_ui[1]).powi(2)).sqrt();
        assert!((sum - s.circuit.lf * op.i().norm()).abs() < 1e-9);
        assert_eq!(c.g_ui, c.g_uc);
    }
}

#[test]
fn frame_mismatch_is_rejected() {
    let s = Setup::new(0.05, 1.0, |_| {});
    let (cfg, _) = s.equivalent(Frame::Stationary);
    let r = assemble_model(Frame::Rotating, &s.circuit, &s.outer, &cfg, &s.op(), &AssemblyOptions::default());
    assert!(matches!(r, Err(ModelError::InvalidParameter(_))));
}

#[test]
fn power_angle_channel_matches_circuit_linearization() {
    let s = Setup::new(0.05, 1.0, |d| d.rv = 0.1);
    let opts = AssemblyOptions { theta: ThetaSource::External, avc: AvcMode::Frozen, coupling: None };
    let m = s.model(Frame::Stationary, &opts);
    let (_, eq) = s.equivalent(Frame::Stationary);
    let pa = PowerAngleModel::new(&s.op(), &eq, &s.circuit).unwrap();
    let active = s.model(Frame::Stationary, &AssemblyOptions { avc: AvcMode::Active, ..opts });
    for w in hz_log_grid(1.0, 100.0, 50) {
        let a = m.state_space.channel(OUT_P, IN_THETA, J * w).unwrap();
        let b = pa.power_angle(J * w).unwrap();
        assert!((a - b).norm() < 1e-6 * b.norm(), "{w}: {a} vs {b}");
        let a = active.state_space.channel(OUT_P, IN_THETA, J * w).unwrap();
        let b = pa.power_angle_with_avc(J * w, s.outer.kiv).unwrap();
        assert!((a - b).norm() < 1e-6 * b.norm(), "{w}: {a} vs {b}");
    }
}

#[test]
fn ablated_rotating_model_matches_stationary_poles() {
    for pref in [1.0, -1.0] {
        let s = Setup::new(0.05, pref, |d| d.fv = 0.5);
        let op = s.op();
        let ab = closed_loop_poles(&s.model(Frame::Stationary, &AssemblyOptions::default())).unwrap();
        let opts = AssemblyOptions { coupling: Some(coupling_matrices(&op).ablated(0.5)), ..Default::default() };
        let dq = closed_loop_poles(&s.model(Frame::Rotating, &opts)).unwrap();
        assert_eq!(ab.poles.len(), dq.poles.len());
        for p in &ab.poles {
            let best = dq.poles.iter().map(|q| (q.value - p.value).norm()).fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-3 * p.omega_n.max(1.0), "{:?} unmatched ({best})", p.value);
        }
    }
}

#[test]
fn unit_dc_gain_and_fixed_structure() {
    let s = Setup::new(0.05, 1.0, |_| {});
    for frame in [Frame::Stationary, Frame::Rotating] {
        let m = s.model(frame, &AssemblyOptions::default());
        let g = m.state_space.channel(OUT_P, IN_PREF, Complex64::new(1e-9, 0.0)).unwrap();
        assert!((g - 1.0).norm() < 1e-6, "{g}");
        let frozen = s.model(frame, &AssemblyOptions { avc: AvcMode::Frozen, ..Default::default() });
        assert_eq!(frozen.state_space.n_states(), m.state_space.n_states());
        let zero_kiv = Setup { outer: OuterLoopParams { kiv: 0.0, ..s.outer.clone() }, ..Setup::new(0.05, 1.0, |_| {}) };
        assert_eq!(zero_kiv.model(frame, &AssemblyOptions::default()).state_space.n_states(), m.state_space.n_states());
        assert!(m.state_space.n_states() <= 64);
    }
}

#[test]
fn poles_are_conjugate_closed_and_baseline_stable() {
    let s = Setup::new(0.05, 1.0, |d| d.rv = 0.05);
    for frame in [Frame::Stationary, Frame::Rotating] {
        let p = closed_loop_poles(&s.model(frame, &AssemblyOptions::default())).unwrap();
        assert!(p.is_conjugate_closed(1e-6));
        assert!(p.is_stable(), "{frame:?}: {}", p.max_real());
        assert!(p.so_pair().is_some() && p.sso_pair().is_some());
    }
}

#[test]
fn unstable_case_dominant_pole_is_sub_synchronous() {
    let s = Setup::new(0.05, 1.0, |d| d.rv = 0.1);
    let p = closed_loop_poles(&s.model(Frame::Stationary, &AssemblyOptions::default())).unwrap();
    let dom = p.dominant().unwrap();
    assert!(dom.value.re > 0.0 && dom.value.im.abs() < 0.9 * W1, "{dom:?}");
}

#[test]
fn frame_damping_orderings() {
    let zeta = |pref: f64| {
        let s = Setup::new(0.05, pref, |_| {});
        let ab = closed_loop_poles(&s.model(Frame::Stationary, &AssemblyOptions::default())).unwrap();
        let dq = closed_loop_poles(&s.model(Frame::Rotating, &AssemblyOptions::default())).unwrap();
        (ab.sso_pair().unwrap().zeta, dq.sso_pair().unwrap().zeta, ab.so_pair().unwrap().zeta, dq.so_pair().unwrap().zeta)
    };
    let (sso_ab, sso_dq, so_ab, so_dq) = zeta(1.0);
    assert!(sso_dq > sso_ab && so_dq < so_ab, "{sso_ab} {sso_dq} {so_ab} {so_dq}");
    let (sso_ab, sso_dq, so_ab, so_dq) = zeta(-1.0);
    assert!(sso_dq < sso_ab && so_dq > so_ab, "{sso_ab} {sso_dq} {so_ab} {so_dq}");
}

#[test]
fn step_response_metrics() {
    let s = Setup::new(0.05, 1.0, |d| d.rv = 0.05);
    let m = s.model(Frame::Stationary, &AssemblyOptions::default());
    let zero = step_response(&m, 0.0, 0.2, 1e-4).unwrap();
    assert!(zero.dp.iter().all(|&y| y == 0.0));
    let r = step_response(&m, 0.1, 8.0, 1e-4).unwrap();
    assert!(!r.diverging);
    assert!((r.final_value - 0.1).abs() < 0.002, "{}", r.final_value);
    assert!(r.settling_time.is_some());
    assert!(step_response(&m, 0.1, 1.0, 2e-4).is_err());
}

#[test]
fn step_decay_follows_dominant_pole() {
    let s = Setup::new(0.05, 1.0, |d| d.rv = 0.05);
    let m = s.model(Frame::Stationary, &AssemblyOptions::default());
    let poles = closed_loop_poles(&m).unwrap();
    let dom = poles.dominant().unwrap();
    let r = step_response(&m, 0.1, 4.0, 1e-4).unwrap();
    // peak deviation per oscillation period after the fast transients have died out
    let period = if dom.value.im.abs() > 1e-3 { 2.0 * PI / dom.value.im.abs() } else { 0.05 };
    let chunk = (period / 1e-4).round() as usize;
    let (mut ts, mut ls) = (Vec::new(), Vec::new());
    let start = (0.5 / 1e-4) as usize;
    let mut k = start;
    while k + chunk < r.dp.len() {
        let peak = r.dp[k..k + chunk].iter().map(|y| (y - r.final_value).abs()).fold(0.0, f64::max);
        if peak > 1e-9 {
            ts.push(r.t[k]);
            ls.push(peak.ln());
        }
        k += chunk;
        if ts.len() >= 12 {
            break;
        }
    }
    let n = ts.len() as f64;
    let (mt, ml) = (ts.iter().sum::<f64>() / n, ls.iter().sum::<f64>() / n);
    let slope = ts.iter().zip(&ls).map(|(t, l)| (t - mt) * (l - ml)).sum::<f64>()
        / ts.iter().map(|t| (t - mt).powi(2)).sum::<f64>();
    assert!((slope / dom.value.re - 1.0).abs() < 0.1, "slope {slope} vs {}", dom.value.re);
}

#[test]
fn step_overshoot_ordering() {
    let over = |pref: f64, frame: Frame| {
        let s = Setup::new(0.05, pref, |d| {
            d.rv = 0.05;
            d.lv = 0.3;
        });
        let m = s.model(frame, &AssemblyOptions::default());
        let r = step_response(&m, 0.1, 3.0, 1e-4).unwrap();
        assert!((r.final_value - 0.1).abs() < 0.002);
        r.overshoot
    };
    assert!(over(1.0, Frame::Rotating) < over(1.0, Frame::Stationary));
    assert!(over(-1.0, Frame::Rotating) > over(-1.0, Frame::Stationary));
}
