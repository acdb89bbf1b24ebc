//! Closed-form inner time integrals over one segment, and their assembly over
//! the alternating-sign pulse windows.

use num_complex::Complex64;

use super::KernelError;
use crate::model::PulseSchedule;

/// Which inner time integral to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    /// `2 cos(W (t - t1))`, the weight of gamma11 and eta11.
    Cos,
    /// `exp(i W (t - t1))`, the weight of gamma10.
    Exp,
}

/// sin(x)/x with the series branch below |x| = 1e-4 (truncation error < 1e-18).
#[inline]
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

fn check_order(t: f64, a: f64, b: f64) -> Result<(), KernelError> {
    if a <= b && b <= t && a.is_finite() && t.is_finite() {
        Ok(())
    } else {
        Err(KernelError::SegmentOrder { a, b, t })
    }
}

/// `int_a^b 2 cos(W (t - t1)) dt1` with the removable singularity at W = 0
/// taken exactly.
pub fn segment_cos(omega: f64, t: f64, a: f64, b: f64) -> Result<f64, KernelError> {
    check_order(t, a, b)?;
    Ok(segment_cos_raw(omega, t, a, b))
}

/// `int_a^b exp(i W (t - t1)) dt1`.
pub fn segment_exp(omega: f64, t: f64, a: f64, b: f64) -> Result<Complex64, KernelError> {
    check_order(t, a, b)?;
    Ok(segment_exp_raw(omega, t, a, b))
}

// (2/W)[sin W(t-a) - sin W(t-b)] = 2 (b-a) cos(W(t-m)) sinc(W(b-a)/2), m = (a+b)/2
#[inline]
pub(crate) fn segment_cos_raw(omega: f64, t: f64, a: f64, b: f64) -> f64 {
    let len = b - a;
    let mid = 0.5 * (a + b);
    2.0 * len * (omega * (t - mid)).cos() * sinc(0.5 * omega * len)
}

#[inline]
pub(crate) fn segment_exp_raw(omega: f64, t: f64, a: f64, b: f64) -> Complex64 {
    let len = b - a;
    let mid = 0.5 * (a + b);
    let (s, c) = (omega * (t - mid)).sin_cos();
    Complex64::new(c, s) * (len * sinc(0.5 * omega * len))
}

/// Inner time integral over `[0, t]` with the interaction sign flipped at
/// every pulse: the partial window `[N_p dt, t]` enters with +1 and the j-th
/// most recent full window with `-(-1)^j`.
pub fn pulsed_time_integral(schedule: &PulseSchedule, omega: f64, t: f64, flavor: Flavor) -> Result<Complex64, KernelError> {
    if !(t >= 0.0) {
        return Err(KernelError::NegativeTime(t));
    }
    let window = schedule.pulse_count(t);
    Ok(pulsed_time_integral_in_window(schedule, window, omega, t, flavor))
}

/// Same as [`pulsed_time_integral`] with the window index supplied by the
/// caller. Used for one-sided limits at pulse instants, where the time alone
/// does not say which side is wanted.
pub fn pulsed_time_integral_in_window(
    schedule: &PulseSchedule,
    window: u64,
    omega: f64,
    t: f64,
    flavor: Flavor,
) -> Complex64 {
    if !schedule.enabled {
        return segment(flavor, omega, t, 0.0, t);
    }
    let dt = schedule.interval;
    let start = (window as f64 * dt).min(t);
    let mut acc = segment(flavor, omega, t, start, t);
    for j in 0..window {
        let a = (window - 1 - j) as f64 * dt;
        let b = ((window - j) as f64 * dt).min(t);
        let s = segment(flavor, omega, t, a, b);
        if j % 2 == 0 {
            acc -= s;
        } else {
            acc += s;
        }
    }
    acc
}

#[inline]
fn segment(flavor: Flavor, omega: f64, t: f64, a: f64, b: f64) -> Complex64 {
    match flavor {
        Flavor::Cos => Complex64::new(segment_cos_raw(omega, t, a, b), 0.0),
        Flavor::Exp => segment_exp_raw(omega, t, a, b),
    }
}

/// Real-only fast path of the cos flavor used inside the frequency quadrature.
#[inline]
pub(crate) fn pulsed_cos_in_window(schedule: &PulseSchedule, window: u64, omega: f64, t: f64) -> f64 {
    if !schedule.enabled {
        return segment_cos_raw(omega, t, 0.0, t);
    }
    let dt = schedule.interval;
    let start = (window as f64 * dt).min(t);
    let mut acc = segment_cos_raw(omega, t, start, t);
    // every full window has the same length, so the sinc factor is shared
    if window > 0 {
        let shared = 2.0 * dt * sinc(0.5 * omega * dt);
        let mut past = 0.0;
        for j in 0..window {
            let mid = ((window - 1 - j) as f64 + 0.5) * dt;
            let c = (omega * (t - mid)).cos();
            if j % 2 == 0 {
                past -= c;
            } else {
                past += c;
            }
        }
        acc += shared * past;
    }
    acc
}
