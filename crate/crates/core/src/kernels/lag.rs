//! Kernels rebuilt from a single lag primitive.
//!
//! For a frequency weight `w`, let
//!
//! ```text
//! G_w(tau) = int_0^wmax dw w(w) (exp(i W tau) - 1) / (i W),   W = w - 1.
//! ```
//!
//! Every segment integral is a difference of two such primitives, so in
//! inter-pulse window `n` the exp-flavor kernel collapses to
//!
//! ```text
//! K(t) = (-1)^n G(t) + 2 sum_{k=1..n} (-1)^(n-k) G(t - k dt).
//! ```
//!
//! On a step grid aligned with the pulses all lags `t - k dt` fall on the
//! same half-step lattice, so a table of `G` serves every RK stage.
//!
//! Small lags use adaptive quadrature. Large lags use the asymptotic form
//!
//! ```text
//! G_w(tau) ~ pi w(1) + i PV int w/(w-1) + exp(-i tau) sum_k i^(k+1) phi^(k)(0) / tau^(k+1)
//! ```
//!
//! with `phi(w) = w(w) / (i (w - 1))`: the pole at w = 1 gives the golden-rule
//! constant and the hard edge at w = 0 gives a series in 1/tau whose terms
//! shrink until k ~ R tau, R being the distance from the origin to the
//! nearest singularity of `phi` (the pole at 1 or the Matsubara poles at
//! 2 pi kT i). The series is cut once its terms drop below 1e-15 relative;
//! when that never happens the quadrature route is used instead.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::segments::segment_exp_raw;
use super::{BathWeights, KernelError, QuadratureSpec};
use crate::model::{parity_sign, KernelValues, SimConfig, OMEGA0};
use crate::quadrature::{integrate, uniform_breaks, Tolerance};

const MAX_TERMS: usize = 170;
const SERIES_TARGET: f64 = 1e-15;

/// `G` for the decay weight `I (2n+1)` and the thermal weight `I n`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LagValues {
    pub decay: Complex64,
    pub thermal: Complex64,
}

impl std::ops::Add for LagValues {
    type Output = LagValues;
    fn add(self, o: LagValues) -> LagValues {
        LagValues {
            decay: self.decay + o.decay,
            thermal: self.thermal + o.thermal,
        }
    }
}

impl std::ops::Mul<f64> for LagValues {
    type Output = LagValues;
    fn mul(self, s: f64) -> LagValues {
        LagValues {
            decay: self.decay * s,
            thermal: self.thermal * s,
        }
    }
}

impl LagValues {
    /// Converts accumulated exp-flavor sums into kernel values.
    pub fn into_kernels(self, t: f64, pulse_count: u64) -> KernelValues {
        KernelValues {
            t,
            pulse_count,
            gamma11: 2.0 * self.decay.re,
            gamma10: self.decay,
            eta11: 2.0 * self.thermal.re,
        }
    }
}

#[derive(Debug, Clone)]
struct Asymptotic {
    limit: LagValues,
    // partial sums of the Taylor coefficients of each weight at w = 0
    decay_sums: Vec<f64>,
    thermal_sums: Vec<f64>,
    has_thermal: bool,
}

/// Lag primitive `G` for both weights of one configuration.
#[derive(Debug, Clone)]
pub struct LagPrimitive {
    weights: BathWeights,
    spec: QuadratureSpec,
    tol: Tolerance,
    asymptotic: Option<Asymptotic>,
    switch_lag: f64,
}

fn zeta_even(n: usize) -> f64 {
    match n {
        2 => PI.powi(2) / 6.0,
        4 => PI.powi(4) / 90.0,
        6 => PI.powi(6) / 945.0,
        _ => {
            let mut s = 1.0;
            for k in 2..2000u32 {
                let term = (k as f64).powi(-(n as i32));
                s += term;
                if term < 1e-18 {
                    break;
                }
            }
            s
        }
    }
}

/// Taylor coefficients at w = 0 of the decay and thermal weights, truncated
/// where they stop being representable.
fn taylor_coefficients(weights: &BathWeights) -> (Vec<f64>, Vec<f64>) {
    let alpha = weights.sd.alpha;
    let wc = weights.sd.omega_c;
    let kt = weights.bath.kt;
    let mut exp_c = vec![1.0; MAX_TERMS + 1];
    for j in 1..=MAX_TERMS {
        exp_c[j] = exp_c[j - 1] * (-1.0 / wc) / j as f64;
    }
    let mut spectral = vec![0.0; MAX_TERMS + 1];
    for n in 1..=MAX_TERMS {
        spectral[n] = alpha * exp_c[n - 1];
    }
    if kt == 0.0 {
        let thermal = vec![0.0; MAX_TERMS + 1];
        return (spectral, thermal);
    }
    // x/(e^x - 1) = sum_m B_m x^m / m!, x = w/kT
    let inv = 1.0 / (2.0 * PI * kt);
    let mut bern = vec![0.0; MAX_TERMS + 1];
    bern[0] = 1.0;
    bern[1] = -0.5 / kt;
    let mut len = MAX_TERMS + 1;
    for m in (2..=MAX_TERMS).step_by(2) {
        let sign = if (m / 2) % 2 == 1 { 1.0 } else { -1.0 };
        let v = sign * 2.0 * zeta_even(m) * inv.powi(m as i32);
        if !v.is_finite() || v.abs() > 1e250 {
            len = m;
            break;
        }
        bern[m] = v;
    }
    let mut thermal = vec![0.0; len];
    for n in 0..len {
        let mut s = 0.0;
        for m in 0..=n {
            s += exp_c[n - m] * bern[m];
        }
        thermal[n] = alpha * kt * s;
    }
    let decay = (0..len).map(|n| spectral[n] + 2.0 * thermal[n]).collect();
    (decay, thermal)
}

fn partial_sums(c: &[f64]) -> Vec<f64> {
    c.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Principal value of int_0^wmax f(w)/(w - 1) dw.
fn principal_value(f: impl Fn(f64) -> f64, omega_max: f64, max_panels: usize) -> f64 {
    let tol = Tolerance {
        rel: 1e-14,
        rel_to_abs_integral: 1e-3,
        max_panels,
    };
    let split = omega_max.min(2.0 * OMEGA0);
    let f1 = f(OMEGA0);
    let near = integrate(
        |w| [Complex64::new((f(w) - f1) / (w - OMEGA0), 0.0)],
        &[0.0, 0.5 * OMEGA0, OMEGA0, 0.5 * (OMEGA0 + split), split],
        tol,
    );
    let mut pv = near.value[0].re + f1 * (split - OMEGA0).ln();
    if omega_max > split {
        let far = integrate(
            |w| [Complex64::new(f(w) / (w - OMEGA0), 0.0)],
            &uniform_breaks(split, omega_max, 0.5, max_panels / 2),
            tol,
        );
        pv += far.value[0].re;
    }
    pv
}

impl LagPrimitive {
    /// Quadrature tolerance is tightened 100x below the configured one (but
    /// not past 1e-13): pulsed kernels are alternating sums of many `G`
    /// values and inherit their absolute error.
    pub fn new(config: &SimConfig) -> Self {
        let rel = (config.numerics.rel_tol * 1e-2).max(1e-13);
        Self::with_tolerance(config, rel)
    }

    pub fn with_tolerance(config: &SimConfig, rel_tol: f64) -> Self {
        let weights = BathWeights::from_config(config);
        let mut spec = QuadratureSpec::from_config(config);
        spec.rel_tol = rel_tol;
        let tol = spec.tolerance();

        let has_thermal = config.kt > 0.0;
        let reach = if has_thermal {
            (2.0 * PI * config.kt).min(OMEGA0)
        } else {
            OMEGA0
        };
        let switch_lag = (36.0 / reach).max(40.0);

        let (decay_c, thermal_c) = taylor_coefficients(&weights);
        let pv_decay = principal_value(|w| weights.decay(w), spec.omega_max, spec.max_panels);
        let pv_thermal = if has_thermal {
            principal_value(|w| weights.thermal(w), spec.omega_max, spec.max_panels)
        } else {
            0.0
        };
        let limit = LagValues {
            decay: Complex64::new(PI * weights.decay(OMEGA0), pv_decay),
            thermal: Complex64::new(PI * weights.thermal(OMEGA0), pv_thermal),
        };
        let asymptotic = Some(Asymptotic {
            limit,
            decay_sums: partial_sums(&decay_c),
            thermal_sums: partial_sums(&thermal_c),
            has_thermal,
        });
        LagPrimitive {
            weights,
            spec,
            tol,
            asymptotic,
            switch_lag,
        }
    }

    /// Lags at or beyond this value try the asymptotic series first.
    pub fn switch_lag(&self) -> f64 {
        self.switch_lag
    }

    /// `G(tau)` for both weights.
    pub fn eval(&self, tau: f64) -> Result<LagValues, KernelError> {
        if tau >= self.switch_lag {
            if let Some(v) = self.eval_asymptotic(tau) {
                return Ok(v);
            }
        }
        self.eval_quadrature(tau)
    }

    pub fn eval_quadrature(&self, tau: f64) -> Result<LagValues, KernelError> {
        if !(tau >= 0.0) {
            return Err(KernelError::NegativeTime(tau));
        }
        if tau == 0.0 {
            return Ok(LagValues::default());
        }
        let w = &self.weights;
        let res = integrate(
            |omega| {
                let e = segment_exp_raw(omega - OMEGA0, tau, 0.0, tau);
                [e * w.decay(omega), e * w.thermal(omega)]
            },
            &self.spec.breaks(tau),
            self.tol,
        );
        if !res.converged {
            return Err(KernelError::NotConverged {
                t: tau,
                estimate: res.value[0].norm(),
                error_bound: res.error[0],
            });
        }
        Ok(LagValues {
            decay: res.value[0],
            thermal: res.value[1],
        })
    }

    /// Large-lag expansion; `None` when the series does not reach its
    /// target accuracy at this lag.
    pub fn eval_asymptotic(&self, tau: f64) -> Option<LagValues> {
        let a = self.asymptotic.as_ref()?;
        if !(tau > 0.0) {
            return None;
        }
        let terms = a.decay_sums.len().min(a.thermal_sums.len());
        // both weights are measured against the larger (decay) scale
        let target_d = SERIES_TARGET * a.limit.decay.norm().max(a.limit.thermal.norm());
        let target_t = target_d;
        let i = Complex64::new(0.0, 1.0);
        let mut ik = Complex64::new(1.0, 0.0);
        let mut fk = 1.0 / tau; // k! / tau^(k+1)
        let mut sum = LagValues::default();
        let mut smallest = f64::INFINITY;
        let mut quiet = 0;
        for k in 0..terms {
            if k > 0 {
                fk *= k as f64 / tau;
                ik *= i;
            }
            // i^(k+1) * (i S_k) = -i^k S_k
            let md = a.decay_sums[k] * fk;
            let mt = if a.has_thermal { a.thermal_sums[k] * fk } else { 0.0 };
            sum.decay -= ik * md;
            sum.thermal -= ik * mt;
            let small = md.abs() <= target_d && mt.abs() <= target_t;
            quiet = if small { quiet + 1 } else { 0 };
            if quiet >= 2 {
                let phase = Complex64::new(0.0, -tau).exp();
                return Some(LagValues {
                    decay: a.limit.decay + phase * sum.decay,
                    thermal: a.limit.thermal + phase * sum.thermal,
                });
            }
            let size = md.abs() / target_d.max(f64::MIN_POSITIVE) + mt.abs() / target_t.max(f64::MIN_POSITIVE);
            if size > 0.0 {
                smallest = smallest.min(size);
            }
            if size > 1e6 * smallest {
                return None;
            }
        }
        None
    }
}

/// Combines lag values into kernels for window `window`.
/// `lag(k)` must return `G(t - k dt)`.
pub fn assemble<F>(window: u64, mut lag: F) -> Result<LagValues, KernelError>
where
    F: FnMut(u64) -> Result<LagValues, KernelError>,
{
    let mut acc = lag(0)? * parity_sign(window);
    for k in 1..=window {
        acc = acc + lag(k)? * (2.0 * parity_sign(window - k));
    }
    Ok(acc)
}

/// Kernels at an arbitrary time, from the lag primitive without caching.
pub fn kernel_values_from_lags(config: &SimConfig, prim: &LagPrimitive, t: f64, window: u64) -> Result<KernelValues, KernelError> {
    let schedule = config.schedule();
    let acc = assemble(window, |k| {
        let start = schedule.window_start(k);
        prim.eval((t - start).max(0.0))
    })?;
    Ok(acc.into_kernels(t, window))
}

/// `G` on the lattice `j * spacing`, filled on demand in parallel chunks.
#[derive(Debug, Clone)]
pub struct LagTable {
    prim: LagPrimitive,
    spacing: f64,
    values: Vec<LagValues>,
}

impl LagTable {
    const CHUNK: usize = 512;

    pub fn new(prim: LagPrimitive, spacing: f64) -> Self {
        LagTable {
            prim,
            spacing,
            values: Vec::new(),
        }
    }

    pub fn primitive(&self) -> &LagPrimitive {
        &self.prim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn get(&mut self, index: usize) -> Result<LagValues, KernelError> {
        if index >= self.values.len() {
            let start = self.values.len();
            let end = (index + 1).max(start + Self::CHUNK);
            let prim = &self.prim;
            let spacing = self.spacing;
            let fresh: Result<Vec<_>, _> = (start..end).into_par_iter().map(|j| prim.eval(j as f64 * spacing)).collect();
            self.values.extend(fresh?);
        }
        Ok(self.values[index])
    }
}
