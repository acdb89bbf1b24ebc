//! Domain types shared by the kernel, propagator and oracle code.
//!
//! Units: hbar = 1 and the qubit splitting omega0 = 1, so frequencies are in
//! units of omega0, times in units of 1/omega0 and temperatures in units of
//! hbar*omega0. Times are reported in cycles (2*pi/omega0) only at the I/O
//! boundary.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

/// Qubit splitting. Everything else is measured against it.
pub const OMEGA0: f64 = 1.0;

/// Slack used when deciding whether a time sits exactly on a pulse instant.
const PULSE_SNAP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` given more than once")]
    Duplicate { line: usize, key: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("frequency must be non-negative, got {0}")]
    NegativeFrequency(f64),
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

/// Converts a time in 1/omega0 into cycles of the qubit precession.
pub fn to_cycles(t: f64) -> f64 {
    t / (2.0 * PI)
}

/// Converts a time in cycles of the qubit precession into 1/omega0.
pub fn from_cycles(cycles: f64) -> f64 {
    cycles * 2.0 * PI
}

/// Numerical knobs of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    /// Relative tolerance of the frequency quadrature.
    pub rel_tol: f64,
    /// Frequency truncation as a multiple of the bath cutoff.
    pub omega_max_factor: f64,
    /// Panel budget of the adaptive quadrature.
    pub max_panels: usize,
    /// RK4 steps per pulse interval; total step count when pulses are off.
    /// `None` selects the defaults described on [`crate::propagator::StepGrid`].
    pub substeps: Option<usize>,
    /// Keep every n-th ODE step in the output.
    pub sample_stride: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            rel_tol: 1e-8,
            omega_max_factor: 30.0,
            max_panels: 200_000,
            substeps: None,
            sample_stride: 1,
        }
    }
}

/// Full dimensionless parameterization of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub omega0: f64,
    pub omega_c: f64,
    pub kt: f64,
    pub alpha: f64,
    /// Pulse spacing in 1/omega0; `None` switches the pulses off.
    pub pulse_interval: Option<f64>,
    pub t_final: f64,
    pub initial_rho11: f64,
    pub initial_rho10: Complex64,
    pub numerics: Numerics,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::paper_default()
    }
}

impl SimConfig {
    /// Cutoff 5*omega0, kT = 0.1*hbar*omega0, unit coupling scale, the
    /// superposition (|0> + |1>)/sqrt(2), no pulses and a one-cycle horizon.
    pub fn paper_default() -> Self {
        SimConfig {
            omega0: OMEGA0,
            omega_c: 5.0,
            kt: 0.1,
            alpha: 1.0,
            pulse_interval: None,
            t_final: 2.0 * PI,
            initial_rho11: 0.5,
            initial_rho10: Complex64::new(0.5, 0.0),
            numerics: Numerics::default(),
        }
    }

    pub fn with_pulse_interval(mut self, dt: Option<f64>) -> Self {
        self.pulse_interval = dt;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.omega0 != OMEGA0 {
            return Err(invalid("omega0", "the qubit splitting is the unit of frequency and must be 1"));
        }
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(invalid("omega_c", format!("must be > 0, got {}", self.omega_c)));
        }
        if !(self.kt >= 0.0 && self.kt.is_finite()) {
            return Err(invalid("kt", format!("must be >= 0, got {}", self.kt)));
        }
        // alpha = 0 is accepted: it decouples the bath entirely.
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be >= 0, got {}", self.alpha)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(invalid("t_final", format!("must be > 0, got {}", self.t_final)));
        }
        if let Some(dt) = self.pulse_interval {
            if !(dt > 0.0 && dt < self.t_final) {
                return Err(invalid(
                    "pulse_interval",
                    format!("must satisfy 0 < pulse_interval < t_final, got {dt}"),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.initial_rho11) {
            return Err(invalid("initial_rho11", format!("must lie in [0, 1], got {}", self.initial_rho11)));
        }
        let bound = self.initial_rho11 * (1.0 - self.initial_rho11);
        if self.initial_rho10.norm_sqr() > bound * (1.0 + 1e-12) + 1e-15 {
            return Err(invalid(
                "initial_rho10",
                format!(
                    "|rho10|^2 = {} exceeds rho11*(1-rho11) = {bound}",
                    self.initial_rho10.norm_sqr()
                ),
            ));
        }
        let n = &self.numerics;
        if !(n.rel_tol > 0.0 && n.rel_tol < 1.0) {
            return Err(invalid("rel_tol", format!("must lie in (0, 1), got {}", n.rel_tol)));
        }
        if !(n.omega_max_factor * self.omega_c > OMEGA0) {
            return Err(invalid("omega_max_factor", "truncation frequency must exceed omega0"));
        }
        if n.max_panels < 16 {
            return Err(invalid("max_panels", "need at least 16 panels"));
        }
        if n.substeps == Some(0) {
            return Err(invalid("substeps", "must be >= 1"));
        }
        if n.sample_stride == 0 {
            return Err(invalid("sample_stride", "must be >= 1"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> PulseSchedule {
        match self.pulse_interval {
            Some(dt) => PulseSchedule::periodic(dt),
            None => PulseSchedule::disabled(),
        }
    }

    pub fn spectral_density(&self) -> SpectralDensity {
        SpectralDensity {
            omega_c: self.omega_c,
            alpha: self.alpha,
        }
    }

    pub fn bath(&self) -> BathParams {
        BathParams { kt: self.kt }
    }

    pub fn initial_state(&self) -> QubitState {
        QubitState {
            rho11: self.initial_rho11,
            rho10: self.initial_rho10,
        }
    }

    pub fn omega_max(&self) -> f64 {
        self.numerics.omega_max_factor * self.omega_c
    }
}

/// Periodic grid of instantaneous z-axis pi pulses at t = m*interval,
/// m = 1, 2, ...
///
/// Inter-pulse windows are left-closed: a time exactly on the m-th pulse
/// instant already belongs to window m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSchedule {
    pub interval: f64,
    pub enabled: bool,
}

impl PulseSchedule {
    /// Panics if `interval` is not a positive finite number.
    pub fn periodic(interval: f64) -> Self {
        assert!(interval > 0.0 && interval.is_finite(), "pulse interval must be positive");
        PulseSchedule {
            interval,
            enabled: true,
        }
    }

    pub fn disabled() -> Self {
        PulseSchedule {
            interval: f64::INFINITY,
            enabled: false,
        }
    }

    /// Number of pulses applied up to and including time `t`.
    ///
    /// Times within a relative 1e-9 of a pulse instant are snapped onto it,
    /// so that `pulse_count(m * interval) == m` survives rounding.
    pub fn pulse_count(&self, t: f64) -> u64 {
        if !self.enabled || t <= 0.0 {
            return 0;
        }
        let x = t / self.interval;
        let nearest = x.round();
        if (x - nearest).abs() <= PULSE_SNAP * nearest.max(1.0) {
            nearest as u64
        } else {
            x.floor() as u64
        }
    }

    /// (-1)^N_p, as +1.0 or -1.0.
    pub fn sign(&self, t: f64) -> f64 {
        parity_sign(self.pulse_count(t))
    }

    /// Start of the `window`-th inter-pulse window (0 for a disabled schedule).
    pub fn window_start(&self, window: u64) -> f64 {
        if self.enabled {
            window as f64 * self.interval
        } else {
            0.0
        }
    }
}

pub(crate) fn parity_sign(n: u64) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

pub fn pulse_count(schedule: &PulseSchedule, t: f64) -> u64 {
    schedule.pulse_count(t)
}

pub fn sign_function(schedule: &PulseSchedule, tau: f64) -> i32 {
    if schedule.pulse_count(tau).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Ohmic spectral density with exponential cutoff, I(w) = alpha*w*exp(-w/omega_c).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDensity {
    pub omega_c: f64,
    pub alpha: f64,
}

impl SpectralDensity {
    pub fn value(&self, omega: f64) -> Result<f64, DomainError> {
        if omega < 0.0 {
            return Err(DomainError::NegativeFrequency(omega));
        }
        Ok(self.eval(omega))
    }

    #[inline]
    pub(crate) fn eval(&self, omega: f64) -> f64 {
        self.alpha * omega * (-omega / self.omega_c).exp()
    }

    /// Closed form of the integral of I over [0, omega_max].
    pub fn integral_up_to(&self, omega_max: f64) -> f64 {
        let x = omega_max / self.omega_c;
        self.alpha * self.omega_c * self.omega_c * (1.0 - (1.0 + x) * (-x).exp())
    }
}

pub fn spectral_value(sd: &SpectralDensity, omega: f64) -> Result<f64, DomainError> {
    sd.value(omega)
}

/// Thermal bath at temperature kT (in units of hbar*omega0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathParams {
    pub kt: f64,
}

impl BathParams {
    pub fn bose_occupation(&self, omega: f64) -> Result<f64, DomainError> {
        if omega <= 0.0 {
            return Err(DomainError::NonPositiveFrequency(omega));
        }
        Ok(self.occupation(omega))
    }

    /// n_B(w) = e^{-x}/(1 - e^{-x}), x = w/kT; no overflow for large x.
    #[inline]
    pub(crate) fn occupation(&self, omega: f64) -> f64 {
        if self.kt == 0.0 {
            return 0.0;
        }
        let x = omega / self.kt;
        (-x).exp() / -(-x).exp_m1()
    }
}

pub fn bose_occupation(bath: &BathParams, omega: f64) -> Result<f64, DomainError> {
    bath.bose_occupation(omega)
}

/// Reduced qubit state in the toggling frame. rho00 = 1 - rho11 is implied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub rho11: f64,
    pub rho10: Complex64,
}

impl QubitState {
    pub fn rho00(&self) -> f64 {
        1.0 - self.rho11
    }

    pub fn rho01(&self) -> Complex64 {
        self.rho10.conj()
    }

    /// Population inside [-eps, 1 + eps] and |rho10|^2 <= rho11*rho00 + eps.
    pub fn is_physical(&self, eps: f64) -> bool {
        let pop_ok = self.rho11 >= -eps && self.rho11 <= 1.0 + eps;
        pop_ok && self.rho10.norm_sqr() <= self.rho11 * self.rho00() + eps
    }
}

/// The TCL2 coefficients at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValues {
    pub t: f64,
    /// Inter-pulse window the coefficients were evaluated in.
    pub pulse_count: u64,
    pub gamma11: f64,
    pub gamma10: Complex64,
    pub eta11: f64,
}

impl KernelValues {
    pub fn zero(t: f64, pulse_count: u64) -> Self {
        KernelValues {
            t,
            pulse_count,
            gamma11: 0.0,
            gamma10: Complex64::new(0.0, 0.0),
            eta11: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub pulse_count: u64,
    pub state: QubitState,
    /// Absent for trajectories that do not come from the TCL2 equations.
    pub kernels: Option<KernelValues>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Number of output samples outside the physical region.
    pub positivity_violations: usize,
    pub first_violation_t: Option<f64>,
    pub min_rho11: f64,
    pub max_rho11: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Linear interpolation of (rho11, rho10) at time `t` inside the sampled range.
    pub fn state_at(&self, t: f64) -> Option<QubitState> {
        let s = &self.samples;
        if s.is_empty() || t < s[0].t || t > s[s.len() - 1].t {
            return None;
        }
        let i = s.partition_point(|x| x.t <= t);
        if i == s.len() {
            return Some(s[s.len() - 1].state);
        }
        let (lo, hi) = (&s[i - 1], &s[i]);
        let w = (t - lo.t) / (hi.t - lo.t);
        Some(QubitState {
            rho11: lo.state.rho11 + w * (hi.state.rho11 - lo.state.rho11),
            rho10: lo.state.rho10 + (hi.state.rho10 - lo.state.rho10) * w,
        })
    }
}
