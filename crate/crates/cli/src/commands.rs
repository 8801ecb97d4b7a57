//! One analysis per command; sweeps fan the analysis out over parameter values.

use std::f64::consts::PI;

use gfmlab_core::closedloop::{assemble_model, closed_loop_poles, step_response, AssemblyOptions, AvcMode};
use gfmlab_core::converter::{derive_equivalent_impedance, Frame, ModelError, SystemParams, PARAMETER_PATHS};
use gfmlab_core::emt::{
    classify_stability, scan_impedance, scan_torque, simulate, SimError, SimScenario, Synchronization, TRACE_COLUMNS,
};
use gfmlab_core::numeric::{Complex64, J};
use gfmlab_core::torque::{complex_torque_profile, net_damping_verdict, PowerAngleModel, TorqueProfile};
use rayon::prelude::*;

use crate::config::{hz_grid, Analysis, Scenario};
use crate::output::{num, PlotSpec, Table};
use crate::{Command, RunError};

pub struct Bundle {
    pub tables: Vec<(String, Table, Option<PlotSpec<'static>>)>,
    pub messages: Vec<String>,
}

struct Point {
    tables: Vec<(&'static str, Table)>,
    messages: Vec<String>,
}

pub fn name(cmd: Command) -> &'static str {
    match cmd {
        Command::Impedance => "impedance",
        Command::Torque => "torque",
        Command::Verdict => "verdict",
        Command::Poles => "poles",
        Command::Step => "step",
        Command::Simulate => "simulate",
        Command::ScanZ => "scan-z",
        Command::ScanT => "scan-t",
    }
}

fn plot(table: &str) -> Option<PlotSpec<'static>> {
    let (title, ys, log_x): (&'static str, Vec<usize>, bool) = match table {
        "impedance" => ("Equivalent impedance", vec![1, 2], true),
        "torque" => ("Torque coefficients", vec![1, 2, 3, 4], true),
        "poles" => ("Closed-loop poles", vec![2], false),
        "step" => ("Power step response", vec![1], false),
        "trace" => ("Active power", vec![5], false),
        "scan_z" => ("Scanned impedance", vec![1, 2], true),
        "scan_t" => ("Scanned torque coefficients", vec![1, 2], true),
        _ => return None,
    };
    // poles plot Im over Re, grouped by realization
    let (x, group) = match table {
        "poles" => (1, Some(0)),
        _ => (0, None),
    };
    Some(PlotSpec { title, x, ys, group, log_x })
}

/// Runs `cmd` for the scenario, once per sweep value when a sweep is given.
pub fn execute(cmd: Command, scenario: &Scenario) -> Result<Bundle, RunError> {
    let a = &scenario.analysis;
    let mut points: Vec<(Option<String>, SystemParams)> = Vec::new();
    match &a.sweep {
        None => points.push((None, scenario.params.clone())),
        Some(sweep) => {
            if !PARAMETER_PATHS.contains(&sweep.path.as_str()) {
                return Err(RunError::Config(format!("sweep: unknown parameter path {:?}", sweep.path)));
            }
            let mut values = sweep.values.clone();
            let numeric: Option<Vec<f64>> = values.iter().map(|v| v.parse::<f64>().ok()).collect();
            if let Some(x) = numeric {
                let mut order: Vec<usize> = (0..values.len()).collect();
                order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
                values = order.into_iter().map(|k| values[k].clone()).collect();
            }
            for v in values {
                let mut p = scenario.params.clone();
                p.set(&sweep.path, &v).map_err(|e| RunError::Config(format!("sweep {}={v}: {e}", sweep.path)))?;
                p.validate().map_err(|e| RunError::Config(format!("sweep {}={v}: {e}", sweep.path)))?;
                points.push((Some(v), p));
            }
        }
    }

    let results: Vec<Result<Point, RunError>> = points.par_iter().map(|(_, p)| run_point(cmd, p, a)).collect();
    let mut merged: Vec<(String, Table, Option<PlotSpec<'static>>)> = Vec::new();
    let mut messages = Vec::new();
    for ((value, _), result) in points.iter().zip(results) {
        let point = result?;
        for line in point.messages {
            messages.push(match value {
                Some(v) => format!("[{}={v}] {line}", a.sweep.as_ref().expect("swept").path),
                None => line,
            });
        }
        for (name, mut table) in point.tables {
            if let Some(v) = value {
                table.header.push("sweep".into());
                for row in &mut table.rows {
                    row.push(v.clone());
                }
            }
            match merged.iter_mut().find(|(n, _, _)| n == name) {
                Some((_, t, _)) => t.rows.extend(table.rows),
                None => {
                    let mut spec = plot(name);
                    if let Some(s) = spec.as_mut().filter(|s| s.group.is_none() && value.is_some()) {
                        s.group = Some(table.header.len() - 1);
                    }
                    merged.push((name.to_string(), table, spec));
                }
            }
        }
    }
    Ok(Bundle { tables: merged, messages })
}

fn run_point(cmd: Command, p: &SystemParams, a: &Analysis) -> Result<Point, RunError> {
    match cmd {
        Command::Impedance => impedance(p, a),
        Command::Torque => torque(p, a),
        Command::Verdict => verdict(p, a),
        Command::Poles => poles(p),
        Command::Step => step(p, a),
        Command::Simulate => simulate_run(p, a),
        Command::ScanZ => scan_z(p, a),
        Command::ScanT => scan_t(p, a),
    }
}

fn single(name: &'static str, table: Table) -> Point {
    Point { tables: vec![(name, table)], messages: Vec::new() }
}

/// Positive-sequence impedance at `f`; a rotating realization is evaluated at `j(ω − ω1)`.
fn impedance(p: &SystemParams, a: &Analysis) -> Result<Point, RunError> {
    let w1 = p.circuit.omega1;
    let eq = derive_equivalent_impedance(&p.config()?, p.circuit.lf, w1)?;
    let mut t = Table::new(&["f_hz", "re_pu", "im_pu"]);
    for f in hz_grid(a.f_min_hz, a.f_max_hz, a.points) {
        let w = 2.0 * PI * f;
        let s = match p.frame {
            Frame::Stationary => J * w,
            Frame::Rotating => J * (w - w1),
        };
        let z = eq.zeq.evaluate(s).map_err(ModelError::from)?;
        t.push(vec![num(f), num(z.re), num(z.im)]);
    }
    Ok(single("impedance", t))
}

fn profile(p: &SystemParams, a: &Analysis) -> Result<TorqueProfile, RunError> {
    let w1 = p.circuit.omega1;
    let eq = derive_equivalent_impedance(&p.config()?, p.circuit.lf, w1)?;
    let op = p.operating_point()?;
    let model = PowerAngleModel::new(&op, &eq, &p.circuit)?;
    let kiv = p.outer.kiv;
    let electrical = |w: f64| match a.avc {
        AvcMode::Frozen => model.power_angle(J * w),
        AvcMode::Active => model.power_angle_with_avc(J * w, kiv),
    };
    let omega: Vec<f64> = hz_grid(a.f_min_hz, a.f_max_hz, a.points).iter().map(|f| 2.0 * PI * f).collect();
    Ok(complex_torque_profile(&electrical, &p.outer.gpsc(w1), a.mechanical, &omega, w1)?)
}

fn torque(p: &SystemParams, a: &Analysis) -> Result<Point, RunError> {
    let prof = profile(p, a)?;
    let mut t = Table::new(&["f_hz", "Ke", "De", "Km", "Dm"]);
    for (k, f) in prof.freq_hz().into_iter().enumerate() {
        t.push(vec![num(f), num(prof.ke[k]), num(prof.de[k]), num(prof.km[k]), num(prof.dm[k])]);
    }
    Ok(single("torque", t))
}

fn verdict(p: &SystemParams, a: &Analysis) -> Result<Point, RunError> {
    let v = net_damping_verdict(&profile(p, a)?);
    let mut t = Table::new(&["case", "stable", "mode", "f_star_hz", "net_damping"]);
    let row = match v.worst() {
        Some(m) => vec![a.name.clone(), v.stable.to_string(), m.label.name().into(), num(m.f_star_hz()), num(m.net_damping)],
        None => vec![a.name.clone(), v.stable.to_string(), "none".into(), String::new(), String::new()],
    };
    let msg = format!("{}: {}", a.name, if v.stable { "stable" } else { "unstable" });
    let msg = match v.worst() {
        Some(m) => format!("{msg} ({} crossing at {:.3} Hz, net damping {:.4})", m.label.name(), m.f_star_hz(), m.net_damping),
        None => format!("{msg} (no crossing of Km + Ke in the grid)"),
    };
    t.push(row);
    Ok(Point { tables: vec![("verdict", t)], messages: vec![msg] })
}

fn poles(p: &SystemParams) -> Result<Point, RunError> {
    let op = p.operating_point()?;
    let mut t = Table::new(&["realization", "re", "im", "zeta"]);
    let mut messages = Vec::new();
    for frame in [Frame::Stationary, Frame::Rotating] {
        let cfg = p.design.config(frame, p.circuit.omega1)?;
        let model = assemble_model(frame, &p.circuit, &p.outer, &cfg, &op, &AssemblyOptions::default())?;
        let set = closed_loop_poles(&model)?;
        for pole in &set.poles {
            t.push(vec![frame.name().into(), num(pole.value.re), num(pole.value.im), num(pole.zeta)]);
        }
        let pair = |x: Option<gfmlab_core::closedloop::Pole>| match x {
            Some(x) => format!("{:.4} at {:.2} Hz", x.zeta, x.value.im / (2.0 * PI)),
            None => "none".into(),
        };
        messages.push(format!(
            "{}: {} (max Re {:.4}); SSO pair zeta {}; SO pair zeta {}",
            frame.name(),
            if set.is_stable() { "stable" } else { "unstable" },
            set.max_real(),
            pair(set.sso_pair()),
            pair(set.so_pair()),
        ));
    }
    Ok(Point { tables: vec![("poles", t)], messages })
}

fn step(p: &SystemParams, a: &Analysis) -> Result<Point, RunError> {
    let op = p.operating_point()?;
    let model = assemble_model(p.frame, &p.circuit, &p.outer, &p.config()?, &op, &AssemblyOptions::default())?;
    let r = step_response(&model, a.step_size, a.horizon, a.step_dt)?;
    let mut t = Table::new(&["t_s", "dP_pu"]);
    for (time, dp) in r.t.iter().zip(&r.dp) {
        t.push(vec![num(*time), num(*dp)]);
    }
    let settle = r.settling_time.map_or("never".to_string(), |s| format!("{s:.4} s"));
    let msg = format!(
        "{} step {}: overshoot {:.4}, settling {settle}, final {:.6}{}",
        p.frame.name(),
        a.step_size,
        r.overshoot,
        r.final_value,
        if r.diverging { " (diverging)" } else { "" }
    );
    Ok(Point { tables: vec![("step", t)], messages: vec![msg] })
}

fn sim_base(p: &SystemParams, a: &Analysis, duration: f64) -> Result<SimScenario, RunError> {
    Ok(SimScenario { time_step: a.time_step, ..SimScenario::from_params(p, duration)? })
}

fn simulate_run(p: &SystemParams, a: &Analysis) -> Result<Point, RunError> {
    let sc = SimScenario {
        events: a.events.clone(),
        start: a.start,
        synchronization: Synchronization::Psc,
        theta_kick: a.theta_kick,
        ..sim_base(p, a, a.duration)?
    };
    let mut messages = Vec::new();
    let trace = match simulate(&sc) {
        Ok(tr) => tr,
        Err(SimError::BlowUp { time, quantity, value, trace }) => {
            messages.push(format!("blow-up at t = {time:.5} s: |{quantity}| = {value:.3e} pu; trace truncated"));
            *trace
        }
        Err(e) => return Err(e.into()),
    };
    let mut t = Table::new(&TRACE_COLUMNS);
    for k in 0..trace.len() {
        t.push(trace.row(k).iter().map(|x| num(*x)).collect());
    }
    let mut c = Table::new(&["case", "class", "dominant_hz", "growth_rate", "end_s"]);
    let end = trace.t.last().copied().unwrap_or(0.0);
    match classify_stability(&trace, a.classify_from) {
        Ok(cl) => {
            messages.push(format!(
                "{}: {} at {:.3} Hz, growth rate {:.4} 1/s",
                a.name,
                cl.class.name(),
                cl.dominant_hz,
                cl.growth_rate
            ));
            c.push(vec![a.name.clone(), cl.class.name().into(), num(cl.dominant_hz), num(cl.growth_rate), num(end)]);
        }
        Err(e) => {
            messages.push(format!("{}: unclassified ({e})", a.name));
            c.push(vec![a.name.clone(), "unclassified".into(), String::new(), String::new(), num(end)]);
        }
    }
    Ok(Point { tables: vec![("trace", t), ("classification", c)], messages })
}

fn scan_z(p: &SystemParams, a: &Analysis) -> Result<Point, RunError> {
    let freqs = hz_grid(a.scan_f_min_hz, a.scan_f_max_hz, a.scan_points);
    let r = scan_impedance(&sim_base(p, a, 1.0)?, &freqs, a.voltage_amplitude)?;
    let mut t = Table::new(&["f_hz", "re_pu", "im_pu", "quality"]);
    for k in 0..freqs.len() {
        let z: Complex64 = r.values[k];
        t.push(vec![num(freqs[k]), num(z.re), num(z.im), num(r.quality[k])]);
    }
    Ok(single("scan_z", t))
}

fn scan_t(p: &SystemParams, a: &Analysis) -> Result<Point, RunError> {
    let freqs = hz_grid(a.scan_f_min_hz, a.scan_f_max_hz, a.scan_points);
    let r = scan_torque(&sim_base(p, a, 1.0)?, &freqs, a.angle_amplitude, a.avc)?;
    let mut t = Table::new(&["f_hz", "Ke", "De", "quality"]);
    for k in 0..freqs.len() {
        let g = r.values[k];
        t.push(vec![num(freqs[k]), num(g.re), num(g.im / (2.0 * PI * freqs[k])), num(r.quality[k])]);
    }
    Ok(single("scan_t", t))
}
