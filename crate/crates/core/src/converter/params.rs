use std::f64::consts::PI;

use super::{
    derive_equivalent_impedance, solve_operating_point, CircuitParams, CurrentController, DelayMode, Equivalent,
    Frame, InnerLoopConfig, ModelError, OperatingPoint, OuterLoopParams, VirtualAdmittanceDesign,
};

/// Complete parameter set of one case, addressable by dotted paths such as
/// `inner.rv` or `outer.kpsc`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    pub circuit: CircuitParams,
    pub outer: OuterLoopParams,
    pub design: VirtualAdmittanceDesign,
    pub frame: Frame,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            circuit: CircuitParams::default(),
            outer: OuterLoopParams::default(),
            design: VirtualAdmittanceDesign::default(),
            frame: Frame::Stationary,
        }
    }
}

/// Every settable path.
pub const PARAMETER_PATHS: &[&str] = &[
    "circuit.lf",
    "circuit.lg",
    "circuit.vg_mag",
    "circuit.omega1",
    "circuit.power_base",
    "circuit.voltage_base",
    "outer.kpsc",
    "outer.omega_p",
    "outer.kiv",
    "outer.pref",
    "outer.vref",
    "inner.frame",
    "inner.controller",
    "inner.lv",
    "inner.rv",
    "inner.kpi",
    "inner.kri",
    "inner.omega_ri",
    "inner.kii",
    "inner.fv",
    "inner.fv_lpf_hz",
    "inner.td",
    "inner.pade_order",
    "inner.notch_zeta",
    "inner.hpf_hz",
    "inner.native_dq",
];

impl SystemParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.circuit.validate()?;
        self.outer.validate()?;
        self.config().map(|_| ())
    }

    pub fn config(&self) -> Result<InnerLoopConfig, ModelError> {
        let cfg = self.design.config(self.frame, self.circuit.omega1)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Equivalent impedance of the stationary realization (the operating point
    /// is frame independent).
    pub fn equivalent(&self) -> Result<Equivalent, ModelError> {
        let cfg = self.design.config(Frame::Stationary, self.circuit.omega1)?;
        derive_equivalent_impedance(&cfg, self.circuit.lf, self.circuit.omega1)
    }

    pub fn operating_point(&self) -> Result<OperatingPoint, ModelError> {
        solve_operating_point(&self.circuit, &self.outer, &self.equivalent()?)
    }

    pub fn get(&self, path: &str) -> Result<String, ModelError> {
        let d = &self.design;
        let f = |x: f64| Ok(format!("{x}"));
        match path {
            "circuit.lf" => f(self.circuit.lf),
            "circuit.lg" => f(self.circuit.lg),
            "circuit.vg_mag" => f(self.circuit.vg_mag),
            "circuit.omega1" => f(self.circuit.omega1),
            "circuit.power_base" => f(self.circuit.power_base),
            "circuit.voltage_base" => f(self.circuit.voltage_base),
            "outer.kpsc" => f(self.outer.kpsc),
            "outer.omega_p" => f(self.outer.omega_p),
            "outer.kiv" => f(self.outer.kiv),
            "outer.pref" => f(self.outer.pref),
            "outer.vref" => f(self.outer.vref),
            "inner.frame" => Ok(self.frame.name().to_string()),
            "inner.controller" => Ok(match d.current {
                CurrentController::QuasiPr { .. } => "quasi_pr".into(),
                CurrentController::Pi { .. } => "pi".into(),
            }),
            "inner.lv" => f(d.lv),
            "inner.rv" => f(d.rv),
            "inner.kpi" => f(d.current.kpi()),
            "inner.kri" | "inner.omega_ri" => match d.current {
                CurrentController::QuasiPr { kri, omega_ri, .. } => f(if path == "inner.kri" { kri } else { omega_ri }),
                _ => Err(wrong_kind(path)),
            },
            "inner.kii" => match d.current {
                CurrentController::Pi { kii, .. } => f(kii),
                _ => Err(wrong_kind(path)),
            },
            "inner.fv" => f(d.fv),
            "inner.fv_lpf_hz" => f(d.fv_lpf_hz.unwrap_or(0.0)),
            "inner.td" => f(d.delay.td),
            "inner.pade_order" => Ok(match d.delay.mode {
                DelayMode::Neglect => "0".into(),
                DelayMode::Pade(n) => n.to_string(),
            }),
            "inner.notch_zeta" => f(d.notch.zeta),
            "inner.hpf_hz" => f(d.notch.hpf_hz),
            "inner.native_dq" => Ok(d.native_dq.to_string()),
            _ => Err(unknown(path)),
        }
    }

    /// Sets one parameter from its textual value.
    pub fn set(&mut self, path: &str, value: &str) -> Result<(), ModelError> {
        let value = value.trim();
        let num = || {
            value.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                ModelError::InvalidParameter(format!("{path}: expected a number, got {value:?}"))
            })
        };
        let d = &mut self.design;
        match path {
            "circuit.lf" => self.circuit.lf = num()?,
            "circuit.lg" => self.circuit.lg = num()?,
            "circuit.vg_mag" => self.circuit.vg_mag = num()?,
            "circuit.omega1" => self.circuit.omega1 = num()?,
            "circuit.power_base" => self.circuit.power_base = num()?,
            "circuit.voltage_base" => self.circuit.voltage_base = num()?,
            "outer.kpsc" => self.outer.kpsc = num()?,
            "outer.omega_p" => self.outer.omega_p = num()?,
            "outer.kiv" => self.outer.kiv = num()?,
            "outer.pref" => self.outer.pref = num()?,
            "outer.vref" => self.outer.vref = num()?,
            "inner.frame" => {
                self.frame = match value {
                    "stationary" => Frame::Stationary,
                    "rotating" => Frame::Rotating,
                    _ => return Err(ModelError::InvalidParameter(format!("{path}: unknown frame {value:?}"))),
                }
            }
            "inner.controller" => {
                let kpi = d.current.kpi();
                d.current = match (value, d.current) {
                    ("quasi_pr", c @ CurrentController::QuasiPr { .. }) | ("pi", c @ CurrentController::Pi { .. }) => c,
                    ("quasi_pr", _) => CurrentController::QuasiPr { kpi, kri: 0.4, omega_ri: 2.0 * PI },
                    ("pi", _) => CurrentController::Pi { kpi, kii: 0.2 },
                    _ => return Err(ModelError::InvalidParameter(format!("{path}: unknown controller {value:?}"))),
                }
            }
            "inner.lv" => d.lv = num()?,
            "inner.rv" => d.rv = num()?,
            "inner.kpi" => {
                let x = num()?;
                match &mut d.current {
                    CurrentController::QuasiPr { kpi, .. } | CurrentController::Pi { kpi, .. } => *kpi = x,
                }
            }
            "inner.kri" | "inner.omega_ri" => {
                let x = num()?;
                match &mut d.current {
                    CurrentController::QuasiPr { kri, omega_ri, .. } => {
                        *(if path == "inner.kri" { kri } else { omega_ri }) = x
                    }
                    _ => return Err(wrong_kind(path)),
                }
            }
            "inner.kii" => {
                let x = num()?;
                match &mut d.current {
                    CurrentController::Pi { kii, .. } => *kii = x,
                    _ => return Err(wrong_kind(path)),
                }
            }
            "inner.fv" => d.fv = num()?,
            "inner.fv_lpf_hz" => {
                let x = num()?;
                d.fv_lpf_hz = (x != 0.0).then_some(x);
            }
            "inner.td" => d.delay.td = num()?,
            "inner.pade_order" => {
                d.delay.mode = match value.parse::<u8>() {
                    Ok(0) => DelayMode::Neglect,
                    Ok(n) => DelayMode::Pade(n),
                    Err(_) => {
                        return Err(ModelError::InvalidParameter(format!("{path}: expected an integer, got {value:?}")))
                    }
                }
            }
            "inner.notch_zeta" => d.notch.zeta = num()?,
            "inner.hpf_hz" => d.notch.hpf_hz = num()?,
            "inner.native_dq" => {
                d.native_dq = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => return Err(ModelError::InvalidParameter(format!("{path}: expected a boolean, got {value:?}"))),
                }
            }
            _ => return Err(unknown(path)),
        }
        Ok(())
    }

    /// Numeric form of [`SystemParams::set`]; booleans take 0/1 and the delay order its integer value.
    pub fn set_f64(&mut self, path: &str, value: f64) -> Result<(), ModelError> {
        let text = match path {
            "inner.pade_order" | "inner.native_dq" if value.fract() == 0.0 && value >= 0.0 => {
                format!("{}", value as u64)
            }
            _ => format!("{value}"),
        };
        self.set(path, &text)
    }
}

fn unknown(path: &str) -> ModelError {
    ModelError::InvalidParameter(format!("unknown parameter path {path:?}"))
}

fn wrong_kind(path: &str) -> ModelError {
    ModelError::InvalidParameter(format!("{path} does not apply to the configured current controller"))
}
