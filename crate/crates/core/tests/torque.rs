use std::f64::consts::PI;

use gfmlab_core::converter::*;
use gfmlab_core::numeric::{hz_log_grid, Complex64, RationalFunction, J};
use gfmlab_core::torque::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const W1: f64 = OMEGA1;

fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
    (a - b).norm() <= rel * b.norm().max(1e-300)
}

struct Case {
    circuit: CircuitParams,
    outer: OuterLoopParams,
    eq: Equivalent,
    op: OperatingPoint,
}

fn case(lg: f64, f: impl FnOnce(&mut VirtualAdmittanceDesign)) -> Case {
    let mut d = VirtualAdmittanceDesign::default();
    f(&mut d);
    let circuit = CircuitParams { lg, ..Default::default() };
    let outer = OuterLoopParams::default();
    let cfg = d.config(Frame::Stationary, W1).unwrap();
    let eq = derive_equivalent_impedance(&cfg, circuit.lf, W1).unwrap();
    let op = solve_operating_point(&circuit, &outer, &eq).unwrap();
    Case { circuit, outer, eq, op }
}

fn verdict(c: &Case) -> StabilityVerdict {
    let m = PowerAngleModel::new(&c.op, &c.eq, &c.circuit).unwrap();
    let e = |w: f64| m.power_angle(J * w);
    let p = complex_torque_profile(&e, &c.outer.gpsc(W1), MechanicalPath::default(), &default_torque_grid(), W1)
        .unwrap();
    net_damping_verdict(&p)
}

#[test]
fn embed_examples() {
    let l = RationalFunction::from_real(&[0.0, 0.2 / W1], &[1.0]).unwrap();
    let dq = embed_dq(&l, W1).unwrap();
    let s = Complex64::new(1.5, 40.0);
    assert!(close(dq.zd.evaluate(s).unwrap(), s * 0.2 / W1, 1e-12));
    assert!(close(dq.zq.evaluate(s).unwrap(), Complex64::new(0.2, 0.0), 1e-12));
    let r = embed_dq(&RationalFunction::constant(0.3), W1).unwrap();
    assert!(close(r.zd.evaluate(s).unwrap(), Complex64::new(0.3, 0.0), 1e-15));
    assert!(r.zq.evaluate(s).unwrap().norm() < 1e-15);
    assert!(embed_dq(&RationalFunction::constant_complex(J), W1).is_err());
}

#[test]
fn embed_recombines_and_is_real() {
    let c = case(0.05, |_| {});
    let dq = embed_dq(&c.eq.zeq, W1).unwrap();
    assert!(dq.zd.is_real(0.0) && dq.zq.is_real(0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let s = Complex64::new(rng.gen_range(-50.0..50.0), rng.gen_range(-700.0..700.0));
        let want = c.eq.zeq.evaluate(s + J * W1).unwrap();
        assert!(close(dq.evaluate(s).unwrap(), want, 1e-9));
    }
}

#[test]
fn power_law_reductions() {
    let z = DqImpedance::inductive(0.1, W1);
    let zg = DqImpedance::inductive(0.05, W1);
    let s0 = Complex64::new(0.0, 0.0);
    assert!(steady_state_power(0.0, 1.0, 1.0, &z, &zg, s0).unwrap().norm() < 1e-15);
    let p = steady_state_power(0.4, 1.1, 1.0, &z, &zg, s0).unwrap();
    assert!(close(p, Complex64::new(1.1 * 0.4f64.sin() / 0.15, 0.0), 1e-12));
    let g = quasi_static_power_angle(0.0, 1.0, 1.0, &z, &zg).unwrap();
    assert!(close(g.evaluate(s0).unwrap(), Complex64::new(1.0 / 0.15, 0.0), 1e-12));
}

#[test]
fn quasi_static_derivative_matches_central_difference() {
    let c = case(0.05, |_| {});
    let z = embed_dq(&c.eq.zeq, W1).unwrap();
    let zg = DqImpedance::inductive(0.05, W1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pairs = vec![(0.3, J * 2.0 * PI * 20.0)];
    for _ in 0..10 {
        pairs.push((rng.gen_range(-0.8..0.8), J * 2.0 * PI * rng.gen_range(1.0..100.0)));
    }
    for (th, s) in pairs {
        let g = quasi_static_power_angle(th, 1.05, 1.0, &z, &zg).unwrap().evaluate(s).unwrap();
        let h = 1e-6;
        let fd = (steady_state_power(th + h, 1.05, 1.0, &z, &zg, s).unwrap()
            - steady_state_power(th - h, 1.05, 1.0, &z, &zg, s).unwrap())
            / (2.0 * h);
        assert!(close(g, fd, 1e-6), "{g} vs {fd}");
    }
}

#[test]
fn exact_power_angle_pointwise_and_rational_agree() {
    let c = case(0.05, |_| {});
    let m = PowerAngleModel::new(&c.op, &c.eq, &c.circuit).unwrap();
    let rf = m.power_angle_rf().unwrap();
    for w in hz_log_grid(1.0, 100.0, 60) {
        let a = m.power_angle(J * w).unwrap();
        assert!(close(rf.at_jw(w).unwrap(), a, 1e-8));
        assert_eq!(m.power_angle_with_avc(J * w, 0.0).unwrap(), a);
    }
}

#[test]
fn exact_power_angle_matches_finite_difference_of_circuit() {
    // at s → 0 the circuit is the phasor steady state; perturb θ with E frozen
    let c = case(0.05, |_| {});
    let (z, g, _) = c.eq.steady().unwrap();
    let p = |th: f64| {
        let i = (g * c.op.e0 * Complex64::from_polar(1.0, th) - 1.0) / (z + J * 0.05);
        let v = 1.0 + J * 0.05 * i;
        (v * i.conj()).re
    };
    let h = 1e-6;
    let fd = (p(c.op.theta0 + h) - p(c.op.theta0 - h)) / (2.0 * h);
    let rf = linearized_power_angle(&c.op, &c.eq, &c.circuit).unwrap();
    let g0 = rf.evaluate(Complex64::new(0.0, 0.0)).unwrap();
    assert!((g0.re - fd).abs() < 1e-6 * fd.abs() && g0.im.abs() < 1e-9);
}

#[test]
fn avc_dc_limit_matches_resolve() {
    let c = case(0.05, |_| {});
    let h = 1e-4;
    let moved = solve_angle_fixed(&c.circuit, &c.outer, &c.eq, c.op.theta0 + h).unwrap();
    let back = solve_angle_fixed(&c.circuit, &c.outer, &c.eq, c.op.theta0 - h).unwrap();
    let sens = (moved.p0 - back.p0) / (2.0 * h);
    let t = power_angle_with_avc(&c.op, &c.eq, &c.circuit, 50.0, &[2.0 * PI * 1e-4]).unwrap();
    assert!((t.values[0].re - sens).abs() < 1e-3 * sens.abs(), "{} vs {sens}", t.values[0]);
}

#[test]
fn mechanical_coefficients() {
    let outer = OuterLoopParams::default();
    let g = outer.gpsc(W1);
    let grid = default_torque_grid();
    let zero = |_w: f64| Ok(Complex64::new(0.0, 0.0));
    let v = complex_torque_profile(&zero, &g, MechanicalPath::Verbatim, &grid, W1).unwrap();
    let km = 1.0 / (W1 * outer.kpsc);
    let dm = 1.0 / (W1 * outer.kpsc * outer.omega_p);
    assert!(v.km.iter().all(|k| (k - km).abs() < 1e-12 * km));
    assert!(v.dm.iter().all(|d| (d - dm).abs() < 1e-12 * dm));

    let d = complex_torque_profile(&zero, &g, MechanicalPath::SOverGpsc, &grid, W1).unwrap();
    for (k, w) in grid.iter().enumerate() {
        assert!((d.km[k] + w * w / (W1 * outer.kpsc * outer.omega_p)).abs() < 1e-9 * d.km[k].abs());
        assert!((d.dm[k] - 1.0 / (W1 * outer.kpsc)).abs() < 1e-12);
    }

    // pure gain: the corner frequency far above the grid
    let fast = OuterLoopParams { omega_p: 1e12, ..outer }.gpsc(W1);
    let v = complex_torque_profile(&zero, &fast, MechanicalPath::Verbatim, &grid, W1).unwrap();
    assert!(v.dm.iter().all(|d| d.abs() < 1e-12) && v.km.iter().all(|k| (k - km).abs() < 1e-9));
    let d = complex_torque_profile(&zero, &fast, MechanicalPath::SOverGpsc, &grid, W1).unwrap();
    assert!(d.km.iter().all(|k| k.abs() < 1e-6) && d.dm.iter().all(|x| (x - km).abs() < 1e-9));
}

#[test]
fn synthetic_no_crossing() {
    let g = OuterLoopParams::default().gpsc(W1);
    let stiff = |_w: f64| Ok(Complex64::new(1e3, 0.0));
    let p = complex_torque_profile(&stiff, &g, MechanicalPath::SOverGpsc, &default_torque_grid(), W1).unwrap();
    let v = net_damping_verdict(&p);
    assert!(v.stable && v.no_crossing && v.critical_modes.is_empty());
}

#[test]
fn crossings_are_refined() {
    let c = case(0.05, |d| d.rv = 0.1);
    let m = PowerAngleModel::new(&c.op, &c.eq, &c.circuit).unwrap();
    let e = |w: f64| m.power_angle(J * w);
    let p = complex_torque_profile(&e, &c.outer.gpsc(W1), MechanicalPath::default(), &default_torque_grid(), W1)
        .unwrap();
    assert!(!p.intersections.is_empty());
    for x in &p.intersections {
        let scale = p.km.iter().map(|k| k.abs()).fold(0.0, f64::max);
        assert!(x.residual < 1e-3 * scale, "{x:?}");
    }
}

#[test]
fn virtual_resistance_flips_verdict() {
    let stable = verdict(&case(0.05, |d| d.rv = 0.05));
    assert!(stable.stable && !stable.no_crossing, "{stable:?}");
    let unstable = verdict(&case(0.05, |d| d.rv = 0.10));
    assert!(!unstable.stable, "{unstable:?}");
    assert_eq!(unstable.worst().unwrap().label, ModeLabel::Sso);
    let restored = verdict(&case(0.05, |d| {
        d.rv = 0.10;
        d.lv = 0.3;
    }));
    assert!(restored.stable, "{restored:?}");
}

#[test]
fn weak_grid_has_more_damping_torque() {
    let grid = hz_log_grid(5.0, 30.0, 60);
    let de = |lg: f64| {
        let c = case(lg, |_| {});
        let m = PowerAngleModel::new(&c.op, &c.eq, &c.circuit).unwrap();
        grid.iter().map(|&w| m.power_angle(J * w).unwrap().im / w).collect::<Vec<_>>()
    };
    let weak = de(0.8);
    let stiff = de(0.05);
    assert!(weak.iter().zip(&stiff).all(|(a, b)| a > b));
}

#[test]
fn table_profile_interpolates() {
    let c = case(0.05, |d| d.rv = 0.1);
    let m = PowerAngleModel::new(&c.op, &c.eq, &c.circuit).unwrap();
    let grid = default_torque_grid();
    let values = grid.iter().map(|&w| m.power_angle(J * w).unwrap()).collect();
    let table = gfmlab_core::numeric::ResponseTable::new(grid.clone(), values).unwrap();
    let g = c.outer.gpsc(W1);
    let p = TorqueProfile::from_table(&table, &g, MechanicalPath::default(), W1).unwrap();
    let e = |w: f64| m.power_angle(J * w);
    let exact = complex_torque_profile(&e, &g, MechanicalPath::default(), &grid, W1).unwrap();
    assert_eq!(p.intersections.len(), exact.intersections.len());
    for (a, b) in p.intersections.iter().zip(&exact.intersections) {
        assert!((a.omega_star / b.omega_star - 1.0).abs() < 1e-3);
    }
}
