//! Scenario files: TOML with `[circuit]`, `[outer]`, `[inner]` and `[analysis]` sections.

use gfmlab_core::closedloop::AvcMode;
use gfmlab_core::converter::{CircuitParams, OuterLoopParams, SystemParams, OMEGA1};
use gfmlab_core::emt::{Event, Start, DEFAULT_STEP};
use gfmlab_core::torque::MechanicalPath;
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub circuit: CircuitSection,
    pub outer: OuterSection,
    pub inner: InnerSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub lf: f64,
    pub lg: f64,
    pub vg_mag: f64,
    /// W
    pub power_base: f64,
    /// V (line-to-ground RMS)
    pub voltage_base: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterSection {
    pub kpsc: f64,
    /// rad/s
    pub omega_p: f64,
    pub kiv: f64,
    pub pref: f64,
    pub vref: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerSection {
    /// `stationary` or `rotating`
    pub frame: String,
    /// `quasi_pr` or `pi`
    pub controller: String,
    pub lv: f64,
    pub rv: f64,
    pub kpi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kri: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_ri: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kii: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fv_lpf_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub td: Option<f64>,
    /// 0 neglects the delay
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pade_order: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notch_zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hpf_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native_dq: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub time: f64,
    pub path: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_min_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_max_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// `frozen` or `active`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avc: Option<String>,
    /// `s_over_gpsc` or `verbatim`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanical: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_kick: Option<f64>,
    /// `operating_point` or `soft_start`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify_from: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_f_min_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_f_max_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage_amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_amplitude: Option<f64>,
    /// `path=v1,v2,...`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventSpec>,
}

/// Analysis settings with every default filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub name: String,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub points: usize,
    pub avc: AvcMode,
    pub mechanical: MechanicalPath,
    pub step_size: f64,
    pub horizon: f64,
    pub step_dt: f64,
    pub duration: f64,
    pub time_step: f64,
    pub theta_kick: f64,
    pub start: Start,
    pub classify_from: f64,
    pub scan_f_min_hz: f64,
    pub scan_f_max_hz: f64,
    pub scan_points: usize,
    pub voltage_amplitude: f64,
    pub angle_amplitude: f64,
    pub sweep: Option<Sweep>,
    pub events: Vec<Event>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub path: String,
    pub values: Vec<String>,
}

impl Sweep {
    pub fn parse(spec: &str) -> Result<Sweep, RunError> {
        let (path, values) =
            spec.split_once('=').ok_or_else(|| RunError::Config(format!("sweep {spec:?}: expected key=v1,v2,...")))?;
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
        if values.iter().any(|v| v.is_empty()) {
            return Err(RunError::Config(format!("sweep {spec:?}: empty value")));
        }
        Ok(Sweep { path: path.trim().to_string(), values })
    }

    pub fn render(&self) -> String {
        format!("{}={}", self.path, self.values.join(","))
    }
}

/// Parsed scenario: the base parameter set and the analysis settings.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub params: SystemParams,
    pub analysis: Analysis,
}

pub fn parse(text: &str, origin: &str) -> Result<ScenarioFile, RunError> {
    toml::from_str(text).map_err(|e| RunError::Config(format!("{origin}: {e}")))
}

fn name<T: Copy>(key: &str, value: &str, table: &[(&str, T)]) -> Result<T, RunError> {
    table.iter().find(|(n, _)| *n == value).map(|(_, v)| *v).ok_or_else(|| {
        let allowed: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
        RunError::Config(format!("{key}: unknown value {value:?} (expected one of {})", allowed.join(", ")))
    })
}

impl ScenarioFile {
    pub fn resolve(&self, default_name: &str) -> Result<Scenario, RunError> {
        let c = &self.circuit;
        let o = &self.outer;
        let mut params = SystemParams {
            circuit: CircuitParams {
                lf: c.lf,
                lg: c.lg,
                vg_mag: c.vg_mag,
                omega1: c.omega1.unwrap_or(OMEGA1),
                power_base: c.power_base,
                voltage_base: c.voltage_base,
            },
            outer: OuterLoopParams { kpsc: o.kpsc, omega_p: o.omega_p, kiv: o.kiv, pref: o.pref, vref: o.vref },
            ..SystemParams::default()
        };
        let i = &self.inner;
        let mut set = |path: &str, value: String| params.set(path, &value).map_err(|e| RunError::Config(e.to_string()));
        set("inner.frame", i.frame.clone())?;
        set("inner.controller", i.controller.clone())?;
        let quasi_pr = i.controller == "quasi_pr";
        let required = |key: &str, v: Option<f64>, needed: bool| match (v, needed) {
            (Some(_), false) => Err(RunError::Config(format!("inner.{key} does not apply to controller {:?}", i.controller))),
            (None, true) => Err(RunError::Config(format!("inner.{key} is required for controller {:?}", i.controller))),
            _ => Ok(v),
        };
        let kri = required("kri", i.kri, quasi_pr)?;
        let omega_ri = required("omega_ri", i.omega_ri, quasi_pr)?;
        let kii = required("kii", i.kii, !quasi_pr)?;
        let mut numbers = vec![("inner.lv", Some(i.lv)), ("inner.rv", Some(i.rv)), ("inner.kpi", Some(i.kpi))];
        numbers.extend([
            ("inner.kri", kri),
            ("inner.omega_ri", omega_ri),
            ("inner.kii", kii),
            ("inner.fv", i.fv),
            ("inner.fv_lpf_hz", i.fv_lpf_hz),
            ("inner.td", i.td),
            ("inner.notch_zeta", i.notch_zeta),
            ("inner.hpf_hz", i.hpf_hz),
        ]);
        for (path, v) in numbers {
            if let Some(v) = v {
                set(path, format!("{v}"))?;
            }
        }
        if let Some(n) = i.pade_order {
            set("inner.pade_order", n.to_string())?;
        }
        if let Some(b) = i.native_dq {
            set("inner.native_dq", b.to_string())?;
        }
        params.validate().map_err(|e| RunError::Config(e.to_string()))?;

        let a = &self.analysis;
        let avc = name("analysis.avc", a.avc.as_deref().unwrap_or("frozen"), &[("frozen", AvcMode::Frozen), ("active", AvcMode::Active)])?;
        let mechanical = name(
            "analysis.mechanical",
            a.mechanical.as_deref().unwrap_or("s_over_gpsc"),
            &[("s_over_gpsc", MechanicalPath::SOverGpsc), ("verbatim", MechanicalPath::Verbatim)],
        )?;
        let start = name(
            "analysis.start",
            a.start.as_deref().unwrap_or("operating_point"),
            &[("operating_point", Start::OperatingPoint), ("soft_start", Start::SoftStart)],
        )?;
        let analysis = Analysis {
            name: a.name.clone().unwrap_or_else(|| default_name.to_string()),
            f_min_hz: a.f_min_hz.unwrap_or(1.0),
            f_max_hz: a.f_max_hz.unwrap_or(100.0),
            points: a.points.unwrap_or(400),
            avc,
            mechanical,
            step_size: a.step_size.unwrap_or(0.1),
            horizon: a.horizon.unwrap_or(3.0),
            step_dt: a.step_dt.unwrap_or(1e-4),
            duration: a.duration.unwrap_or(2.0),
            time_step: a.time_step.unwrap_or(DEFAULT_STEP),
            theta_kick: a.theta_kick.unwrap_or(0.0),
            start,
            classify_from: a.classify_from.unwrap_or(0.2),
            scan_f_min_hz: a.scan_f_min_hz.unwrap_or(2.0),
            scan_f_max_hz: a.scan_f_max_hz.unwrap_or(200.0),
            scan_points: a.scan_points.unwrap_or(10),
            voltage_amplitude: a.voltage_amplitude.unwrap_or(0.02),
            angle_amplitude: a.angle_amplitude.unwrap_or(0.01),
            sweep: a.sweep.as_deref().map(Sweep::parse).transpose()?,
            events: a.events.iter().map(|e| Event { time: e.time, path: e.path.clone(), value: e.value }).collect(),
        };
        check_grid("analysis frequency grid", analysis.f_min_hz, analysis.f_max_hz, analysis.points)?;
        check_grid("analysis scan grid", analysis.scan_f_min_hz, analysis.scan_f_max_hz, analysis.scan_points)?;
        Ok(Scenario { params, analysis })
    }
}

fn check_grid(what: &str, lo: f64, hi: f64, n: usize) -> Result<(), RunError> {
    if lo > 0.0 && hi >= lo && n >= 1 && (n > 1 || lo == hi) {
        Ok(())
    } else {
        Err(RunError::Config(format!("{what}: need 0 < min ≤ max and at least two points")))
    }
}

/// Logarithmic grid in Hz.
pub fn hz_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

impl Scenario {
    /// Fully resolved scenario file; parsing it reproduces this scenario.
    pub fn to_file(&self) -> ScenarioFile {
        let p = &self.params;
        let get = |path: &str| p.get(path).expect("known path");
        let num = |path: &str| get(path).parse::<f64>().expect("numeric");
        let quasi_pr = get("inner.controller") == "quasi_pr";
        let a = &self.analysis;
        ScenarioFile {
            circuit: CircuitSection {
                lf: p.circuit.lf,
                lg: p.circuit.lg,
                vg_mag: p.circuit.vg_mag,
                power_base: p.circuit.power_base,
                voltage_base: p.circuit.voltage_base,
                omega1: Some(p.circuit.omega1),
            },
            outer: OuterSection {
                kpsc: p.outer.kpsc,
                omega_p: p.outer.omega_p,
                kiv: p.outer.kiv,
                pref: p.outer.pref,
                vref: p.outer.vref,
            },
            inner: InnerSection {
                frame: get("inner.frame"),
                controller: get("inner.controller"),
                lv: num("inner.lv"),
                rv: num("inner.rv"),
                kpi: num("inner.kpi"),
                kri: quasi_pr.then(|| num("inner.kri")),
                omega_ri: quasi_pr.then(|| num("inner.omega_ri")),
                kii: (!quasi_pr).then(|| num("inner.kii")),
                fv: Some(num("inner.fv")),
                fv_lpf_hz: Some(num("inner.fv_lpf_hz")),
                td: Some(num("inner.td")),
                pade_order: Some(get("inner.pade_order").parse().expect("integer")),
                notch_zeta: Some(num("inner.notch_zeta")),
                hpf_hz: Some(num("inner.hpf_hz")),
                native_dq: Some(get("inner.native_dq") == "true"),
            },
            analysis: AnalysisSection {
                name: Some(a.name.clone()),
                f_min_hz: Some(a.f_min_hz),
                f_max_hz: Some(a.f_max_hz),
                points: Some(a.points),
                avc: Some(match a.avc {
                    AvcMode::Frozen => "frozen".into(),
                    AvcMode::Active => "active".into(),
                }),
                mechanical: Some(match a.mechanical {
                    MechanicalPath::SOverGpsc => "s_over_gpsc".into(),
                    MechanicalPath::Verbatim => "verbatim".into(),
                }),
                step_size: Some(a.step_size),
                horizon: Some(a.horizon),
                step_dt: Some(a.step_dt),
                duration: Some(a.duration),
                time_step: Some(a.time_step),
                theta_kick: Some(a.theta_kick),
                start: Some(match a.start {
                    Start::OperatingPoint => "operating_point".into(),
                    Start::SoftStart => "soft_start".into(),
                }),
                classify_from: Some(a.classify_from),
                scan_f_min_hz: Some(a.scan_f_min_hz),
                scan_f_max_hz: Some(a.scan_f_max_hz),
                scan_points: Some(a.scan_points),
                voltage_amplitude: Some(a.voltage_amplitude),
                angle_amplitude: Some(a.angle_amplitude),
                sweep: a.sweep.as_ref().map(Sweep::render),
                events: a.events.iter().map(|e| EventSpec { time: e.time, path: e.path.clone(), value: e.value }).collect(),
            },
        }
    }
}
