//! TCL2 coefficients gamma11(t), gamma10(t) and eta11(t).
//!
//! Each coefficient is a frequency integral of a bath weight times an inner
//! time integral over the pulse-segmented history:
//!
//! ```text
//! gamma11(t) = int_0^wmax dw I(w) (2 n(w) + 1) P_cos(w - 1, t)
//! gamma10(t) = int_0^wmax dw I(w) (2 n(w) + 1) P_exp(w - 1, t)
//! eta11(t)   = int_0^wmax dw I(w) n(w)         P_cos(w - 1, t)
//! ```
//!
//! The inner integrals `P` are closed forms ([`segments`]); the outer one is
//! adaptive Gauss-Kronrod with panels no wider than half an oscillation of
//! the inner phase. [`lag`] holds a second evaluation route used by the
//! propagator.

pub mod lag;
pub mod segments;

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{BathParams, KernelValues, SimConfig, SpectralDensity, OMEGA0};
use crate::quadrature::{integrate, uniform_breaks, Tolerance};

pub use lag::{LagPrimitive, LagTable, LagValues};
pub use segments::{pulsed_time_integral, pulsed_time_integral_in_window, segment_cos, segment_exp, Flavor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("segment endpoints out of order: need a <= b <= t, got a={a}, b={b}, t={t}")]
    SegmentOrder { a: f64, b: f64, t: f64 },
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("frequency quadrature did not converge at t={t}: estimate {estimate}, error bound {error_bound:e}")]
    NotConverged { t: f64, estimate: f64, error_bound: f64 },
}

/// Settings of the frequency quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub omega_max: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    /// Lower bound on the Kronrod node density per 2*pi of inner phase.
    pub min_nodes_per_oscillation: usize,
}

impl QuadratureSpec {
    pub fn from_config(config: &SimConfig) -> Self {
        QuadratureSpec {
            omega_max: config.omega_max(),
            rel_tol: config.numerics.rel_tol,
            max_panels: config.numerics.max_panels,
            min_nodes_per_oscillation: 30,
        }
    }

    pub(crate) fn tolerance(&self) -> Tolerance {
        Tolerance {
            rel: self.rel_tol,
            rel_to_abs_integral: 1e-6,
            max_panels: self.max_panels,
        }
    }

    /// Initial partition of [0, omega_max] for inner phases up to `max_lag`.
    pub(crate) fn breaks(&self, max_lag: f64) -> Vec<f64> {
        let oscillations_per_panel = 15.0 / self.min_nodes_per_oscillation as f64;
        let width = if max_lag > 0.0 {
            (2.0 * PI * oscillations_per_panel / max_lag).min(OMEGA0)
        } else {
            OMEGA0
        };
        uniform_breaks(0.0, self.omega_max, width, self.max_panels / 2)
    }
}

/// The two frequency weights, `I (2 n + 1)` and `I n`, with their finite
/// limits at w = 0.
#[derive(Debug, Clone, Copy)]
pub struct BathWeights {
    pub sd: SpectralDensity,
    pub bath: BathParams,
}

impl BathWeights {
    pub fn from_config(config: &SimConfig) -> Self {
        BathWeights {
            sd: config.spectral_density(),
            bath: config.bath(),
        }
    }

    #[inline]
    pub fn thermal(&self, omega: f64) -> f64 {
        if self.bath.kt == 0.0 {
            0.0
        } else if omega == 0.0 {
            self.sd.alpha * self.bath.kt
        } else {
            self.sd.eval(omega) * self.bath.occupation(omega)
        }
    }

    #[inline]
    pub fn decay(&self, omega: f64) -> f64 {
        self.sd.eval(omega) + 2.0 * self.thermal(omega)
    }
}

#[derive(Clone, Copy)]
enum Weight {
    Decay,
    Thermal,
}

fn kernel_integral(config: &SimConfig, t: f64, window: u64, weight: Weight, flavor: Flavor) -> Result<Complex64, KernelError> {
    if !(t >= 0.0) {
        return Err(KernelError::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let weights = BathWeights::from_config(config);
    if matches!(weight, Weight::Thermal) && config.kt == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let schedule = config.schedule();
    let spec = QuadratureSpec::from_config(config);
    let w_of = |omega: f64| match weight {
        Weight::Decay => weights.decay(omega),
        Weight::Thermal => weights.thermal(omega),
    };
    let breaks = spec.breaks(t);
    let res = match flavor {
        Flavor::Cos => integrate(
            |omega| {
                let p = segments::pulsed_cos_in_window(&schedule, window, omega - OMEGA0, t);
                [Complex64::new(w_of(omega) * p, 0.0)]
            },
            &breaks,
            spec.tolerance(),
        ),
        Flavor::Exp => integrate(
            |omega| [pulsed_time_integral_in_window(&schedule, window, omega - OMEGA0, t, Flavor::Exp) * w_of(omega)],
            &breaks,
            spec.tolerance(),
        ),
    };
    if !res.converged {
        return Err(KernelError::NotConverged {
            t,
            estimate: res.value[0].norm(),
            error_bound: res.error[0],
        });
    }
    Ok(res.value[0])
}

/// gamma11(t) in the window containing `t` (left-closed).
pub fn kernel_gamma11(config: &SimConfig, t: f64) -> Result<f64, KernelError> {
    let w = config.schedule().pulse_count(t);
    Ok(kernel_integral(config, t, w, Weight::Decay, Flavor::Cos)?.re)
}

pub fn kernel_gamma10(config: &SimConfig, t: f64) -> Result<Complex64, KernelError> {
    let w = config.schedule().pulse_count(t);
    kernel_integral(config, t, w, Weight::Decay, Flavor::Exp)
}

pub fn kernel_eta11(config: &SimConfig, t: f64) -> Result<f64, KernelError> {
    let w = config.schedule().pulse_count(t);
    Ok(kernel_integral(config, t, w, Weight::Thermal, Flavor::Cos)?.re)
}

/// All three coefficients at `t`, each from its own frequency quadrature.
pub fn kernel_values(config: &SimConfig, t: f64) -> Result<KernelValues, KernelError> {
    let w = config.schedule().pulse_count(t);
    kernel_values_in_window(config, t, w)
}

/// All three coefficients at `t`, evaluated with the sign pattern of window
/// `window`. At a pulse instant `m*dt`, window `m - 1` gives the limit from
/// the left and window `m` the limit from the right.
pub fn kernel_values_in_window(config: &SimConfig, t: f64, window: u64) -> Result<KernelValues, KernelError> {
    Ok(KernelValues {
        t,
        pulse_count: window,
        gamma11: kernel_integral(config, t, window, Weight::Decay, Flavor::Cos)?.re,
        gamma10: kernel_integral(config, t, window, Weight::Decay, Flavor::Exp)?,
        eta11: kernel_integral(config, t, window, Weight::Thermal, Flavor::Cos)?.re,
    })
}
