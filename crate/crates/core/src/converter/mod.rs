//! Inner-loop blocks, equivalent output impedance and steady-state operating point.

mod blocks;
mod impedance;
mod oppoint;
mod params;

use std::f64::consts::PI;

pub use blocks::{
    build_current_controller, build_delay, build_virtual_admittance, notch, CurrentController, NotchSpec,
};
pub use impedance::{derive_equivalent_impedance, impedance_profile, Equivalent, ImpedanceProfile};
pub use oppoint::{solve_angle_fixed, solve_operating_point, OperatingPoint};
pub use params::{SystemParams, PARAMETER_PATHS};

use crate::numeric::{NumericError, RationalFunction};

/// Nominal angular frequency of a 50 Hz system.
pub const OMEGA1: f64 = 100.0 * PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate impedance denominator")]
    DegenerateDenominator,
    #[error("operating point did not converge within {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("reference power {pref} exceeds the static transfer limit {limit}")]
    TransferLimit { pref: f64, limit: f64 },
    #[error("singular response at {omega} rad/s")]
    SingularResponse { omega: f64 },
    #[error("PCC voltage reference cannot be met without grid impedance")]
    VoltageInfeasible,
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Series filter and grid circuit of the single-converter system.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitParams {
    pub lf: f64,
    pub lg: f64,
    pub vg_mag: f64,
    pub omega1: f64,
    pub power_base: f64,
    pub voltage_base: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        CircuitParams { lf: 0.1, lg: 0.05, vg_mag: 1.0, omega1: OMEGA1, power_base: 3000.0, voltage_base: 110.0 }
    }
}

impl CircuitParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        check(self.lf > 0.0, "Lf must be positive")?;
        check(self.lg >= 0.0, "Lg must be non-negative")?;
        check(self.vg_mag > 0.0, "Vg_mag must be positive")?;
        check(self.omega1 > 0.0, "omega1 must be positive")?;
        check(self.power_base > 0.0 && self.voltage_base > 0.0, "bases must be positive")
    }
}

/// Power-synchronization and voltage-magnitude loops.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterLoopParams {
    pub kpsc: f64,
    pub omega_p: f64,
    pub kiv: f64,
    pub pref: f64,
    pub vref: f64,
}

impl Default for OuterLoopParams {
    fn default() -> Self {
        OuterLoopParams { kpsc: 0.1, omega_p: 2.0 * PI * 3.0, kiv: 50.0, pref: 1.0, vref: 1.0 }
    }
}

impl OuterLoopParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        check(self.kpsc > 0.0, "Kpsc must be positive")?;
        check(self.omega_p > 0.0, "omega_p must be positive")?;
        check(self.kiv >= 0.0, "Kiv must be non-negative")?;
        check(self.vref > 0.0, "Vref must be positive")?;
        check(self.pref.is_finite(), "Pref must be finite")
    }

    /// `G_PSC(s) = ω1·Kpsc·ωp/(s + ωp)`, rad/s per unit of power error.
    pub fn gpsc(&self, omega1: f64) -> RationalFunction {
        RationalFunction::from_real(&[omega1 * self.kpsc * self.omega_p], &[self.omega_p, 1.0])
            .expect("positive corner frequency")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DelayMode {
    Neglect,
    Pade(u8),
}

/// Control transport delay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayModel {
    pub td: f64,
    pub mode: DelayMode,
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel { td: 150e-6, mode: DelayMode::Pade(2) }
    }
}

impl DelayModel {
    pub fn neglect() -> Self {
        DelayModel { td: 0.0, mode: DelayMode::Neglect }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check(self.td >= 0.0 && self.td.is_finite(), "Td must be non-negative")?;
        if let DelayMode::Pade(n) = self.mode {
            check((1..=4).contains(&n), "Pade order must be in 1..=4")?;
        }
        Ok(())
    }

    /// Transport delay used by the time-domain simulator.
    pub fn sim_delay(&self) -> f64 {
        match self.mode {
            DelayMode::Neglect => 0.0,
            DelayMode::Pade(_) => self.td,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    Stationary,
    Rotating,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::Stationary => "stationary",
            Frame::Rotating => "rotating",
        }
    }
}

/// Uniform inner-loop description.
///
/// Blocks are expressed in the domain of `frame`: functions of the stationary
/// Laplace variable, or complex-coefficient dq-domain functions for `Rotating`.
/// The delay always acts on the stationary-frame modulation voltage.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerLoopConfig {
    pub frame: Frame,
    pub fvc: bool,
    pub fcc: RationalFunction,
    pub gv: RationalFunction,
    pub gi: RationalFunction,
    pub fv: RationalFunction,
    pub gd: DelayModel,
}

impl InnerLoopConfig {
    /// Same inner loops realized in the rotating frame (every block translated by `jω1`).
    pub fn to_rotating(&self, omega1: f64) -> InnerLoopConfig {
        match self.frame {
            Frame::Rotating => self.clone(),
            Frame::Stationary => InnerLoopConfig {
                frame: Frame::Rotating,
                fvc: self.fvc,
                fcc: self.fcc.translate_frequency(omega1),
                gv: self.gv.translate_frequency(omega1),
                gi: self.gi.translate_frequency(omega1),
                fv: self.fv.translate_frequency(omega1),
                gd: self.gd,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.gd.validate()?;
        // an improper Fcc (series virtual impedance) is valid for the impedance
        // derivation; realization rejects it separately
        for (name, b) in [("Fcc", &self.fcc), ("Gv", &self.gv), ("Gi", &self.gi), ("Fv", &self.fv)] {
            check(name == "Fcc" || b.is_proper(), &format!("{name} must be proper"))?;
            if self.frame == Frame::Stationary {
                check(b.is_real(1e-12), &format!("{name} must have real coefficients in the stationary frame"))?;
            }
        }
        Ok(())
    }
}

/// Parametric virtual-admittance + current-control scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct VirtualAdmittanceDesign {
    pub lv: f64,
    pub rv: f64,
    pub notch: NotchSpec,
    pub current: CurrentController,
    /// Voltage decoupling gain (0 disables).
    pub fv: f64,
    /// Optional first-order low-pass corner on the decoupling path, Hz.
    pub fv_lpf_hz: Option<f64>,
    pub delay: DelayModel,
    /// Rotating-frame variant: translated stationary blocks, or native dq blocks (HPF on Rv).
    pub native_dq: bool,
}

impl Default for VirtualAdmittanceDesign {
    fn default() -> Self {
        VirtualAdmittanceDesign {
            lv: 0.1,
            rv: 0.05,
            notch: NotchSpec::default(),
            current: CurrentController::QuasiPr { kpi: 2.0, kri: 0.4, omega_ri: 2.0 * PI },
            fv: 0.0,
            fv_lpf_hz: None,
            delay: DelayModel::default(),
            native_dq: false,
        }
    }
}

impl VirtualAdmittanceDesign {
    pub fn config(&self, frame: Frame, omega1: f64) -> Result<InnerLoopConfig, ModelError> {
        self.delay.validate()?;
        let fv = match self.fv_lpf_hz {
            None => RationalFunction::constant(self.fv),
            Some(fc) => {
                check(fc > 0.0, "Fv low-pass corner must be positive")?;
                let wc = 2.0 * PI * fc;
                RationalFunction::from_real(&[self.fv * wc], &[wc, 1.0])?
            }
        };
        let stationary = InnerLoopConfig {
            frame: Frame::Stationary,
            fvc: true,
            fcc: RationalFunction::constant(1.0),
            gv: build_virtual_admittance(self.lv, self.rv, Frame::Stationary, &self.notch, omega1)?,
            gi: build_current_controller(&self.current, Frame::Stationary, omega1)?,
            fv,
            gd: self.delay,
        };
        match frame {
            Frame::Stationary => Ok(stationary),
            Frame::Rotating if !self.native_dq => Ok(stationary.to_rotating(omega1)),
            Frame::Rotating => Ok(InnerLoopConfig {
                gv: build_virtual_admittance(self.lv, self.rv, Frame::Rotating, &self.notch, omega1)?,
                gi: build_current_controller(&self.current, Frame::Rotating, omega1)?,
                ..stationary.to_rotating(omega1)
            }),
        }
    }
}

fn check(cond: bool, msg: &str) -> Result<(), ModelError> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(msg.to_string()))
    }
}
