//! Small-signal stability workbench for grid-forming voltage-source converters.
//!
//! Layers, bottom-up: [`numeric`] (rational functions, roots, eigenvalues,
//! state-space interconnection), [`converter`] (inner-loop blocks, equivalent
//! impedance, operating point), [`torque`] (complex torque coefficients and the
//! net-damping verdict), [`closedloop`] (stationary and rotating frame
//! small-signal models) and [`emt`] (nonlinear averaged time-domain oracle).

pub mod closedloop;
pub mod converter;
pub mod emt;
pub mod numeric;
pub mod torque;
