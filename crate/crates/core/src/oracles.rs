//! Independent reference computations used to validate the simulator:
//! Markov rates, brute-force kernels, a sign-weighted time integral on plain
//! Gauss-Legendre nodes, and exact single-excitation dynamics of a
//! discretized bath at zero temperature.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

use crate::kernels::{BathWeights, Flavor};
use crate::propagator::StepGrid;
use crate::model::{parity_sign, sign_function, PulseSchedule, QubitState, Sample, SimConfig, Trajectory, OMEGA0};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("the exact oracle needs kT = 0, got {0}")]
    NonZeroTemperature(f64),
    #[error("the exact oracle needs a pure initial qubit state, |rho10|^2 = rho11 (1 - rho11)")]
    NotPure,
    #[error("invalid bath discretization: {0}")]
    Discretization(String),
    #[error("brute-force quadrature did not settle after {0} refinements")]
    NotSettled(usize),
}

/// Long-time (Markov) limits without pulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovRates {
    pub gamma11: f64,
    pub eta11: f64,
    /// `Re gamma10`.
    pub gamma10_re: f64,
}

pub fn markov_rates(config: &SimConfig) -> MarkovRates {
    let w = BathWeights::from_config(config);
    MarkovRates {
        gamma11: 2.0 * PI * w.decay(OMEGA0),
        eta11: 2.0 * PI * w.thermal(OMEGA0),
        gamma10_re: PI * w.decay(OMEGA0),
    }
}

/// Which coefficient a brute-force evaluation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Gamma11,
    Gamma10,
    Eta11,
}

fn simpson_nodes(a: f64, b: f64, n: usize) -> impl Iterator<Item = (f64, f64)> {
    let h = (b - a) / n as f64;
    (0..=n).map(move |i| {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        (a + i as f64 * h, w * h / 3.0)
    })
}

/// Brute-force kernel at `t`: composite Simpson in both frequency and the
/// inner time variable, with the sign function evaluated pointwise. The inner
/// range is split at pulse instants (Simpson cannot see a jump) and the
/// frequency range at `40 kT`, below which the thermal weight varies on the
/// scale `kT`. Both grids are doubled, with one Richardson step per level,
/// until two successive extrapolations agree to `rel_tol`.
pub fn brute_force_kernel(config: &SimConfig, t: f64, kind: KernelKind, rel_tol: f64) -> Result<Complex64, OracleError> {
    let weights = BathWeights::from_config(config);
    let schedule = config.schedule();
    let omega_max = config.omega_max();
    let s_t = sign_function(&schedule, t) as f64;
    let mut pieces = vec![0.0];
    if schedule.enabled {
        let mut k = 1;
        while (k as f64) * schedule.interval < t {
            pieces.push(k as f64 * schedule.interval);
            k += 1;
        }
    }
    pieces.push(t);

    let oscillations = |width: f64| (width * t / (2.0 * PI)).ceil() as usize;
    let mut bands: Vec<(f64, f64, usize)> = Vec::new();
    let split = if config.kt > 0.0 { (40.0 * config.kt).min(omega_max) } else { 0.0 };
    if split > 0.0 {
        let n = (16 * oscillations(split)).max((8.0 * split / config.kt).ceil() as usize);
        bands.push((0.0, split, n.next_multiple_of(2)));
    }
    if split < omega_max {
        let n = (16 * oscillations(omega_max - split)).max(64);
        bands.push((split, omega_max, n.next_multiple_of(2)));
    }

    let eval = |scale: usize, n_time: usize| -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for &(lo, hi, n) in &bands {
            for (omega, wo) in simpson_nodes(lo, hi, n * scale) {
                let weight = match kind {
                    KernelKind::Eta11 => weights.thermal(omega),
                    _ => weights.decay(omega),
                };
                if weight == 0.0 {
                    continue;
                }
                let mut inner = Complex64::new(0.0, 0.0);
                for p in pieces.windows(2) {
                    let mid = 0.5 * (p[0] + p[1]);
                    let s1 = sign_function(&schedule, mid) as f64;
                    for (t1, wt) in simpson_nodes(p[0], p[1], n_time) {
                        let phase = (omega - OMEGA0) * (t - t1);
                        let f = match kind {
                            KernelKind::Gamma10 => Complex64::from_polar(1.0, phase),
                            _ => Complex64::new(2.0 * phase.cos(), 0.0),
                        };
                        inner += f * (s1 * wt);
                    }
                }
                total += inner * (s_t * weight * wo);
            }
        }
        total
    };

    let span = pieces.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max);
    let mut n_time = ((omega_max * span / PI).ceil() as usize * 4).next_multiple_of(2).max(16);
    let mut scale = 1;
    let mut prev = eval(scale, n_time);
    let mut prev_extrapolated: Option<Complex64> = None;
    for _ in 0..MAX_REFINEMENTS {
        scale *= 2;
        n_time *= 2;
        let next = eval(scale, n_time);
        let extrapolated = next + (next - prev) / 15.0;
        if let Some(e) = prev_extrapolated {
            if (extrapolated - e).norm() <= rel_tol * extrapolated.norm() {
                return Ok(extrapolated);
            }
        }
        prev = next;
        prev_extrapolated = Some(extrapolated);
    }
    Err(OracleError::NotSettled(MAX_REFINEMENTS))
}

const MAX_REFINEMENTS: usize = 6;

const GL_ORDER: usize = 20;

/// Oracle bath cutoff in units of omega_c.
pub const ORACLE_CUTOFF_FACTOR: f64 = 10.0;

/// Default number of oracle bath modes.
pub const DEFAULT_MODES: usize = 400;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `s(t) int_0^t s(t1) f(W (t - t1)) dt1` with `f = 2 cos` or `exp(i .)`,
/// summed on Gauss-Legendre panels of at most half a radian of phase and
/// split at pulse instants. Reference for the closed-form segment sums.
pub fn sign_weighted_time_integral(schedule: &PulseSchedule, omega: f64, t: f64, flavor: Flavor) -> Complex64 {
    let nodes = gauss_legendre(GL_ORDER);
    let s_t = sign_function(schedule, t) as f64;
    let mut cuts = vec![0.0];
    if schedule.enabled {
        let mut k = 1;
        while (k as f64) * schedule.interval < t {
            cuts.push(k as f64 * schedule.interval);
            k += 1;
        }
    }
    cuts.push(t);
    let mut acc = Complex64::new(0.0, 0.0);
    for c in cuts.windows(2) {
        let (a, b) = (c[0], c[1]);
        if b <= a {
            continue;
        }
        let panels = ((omega.abs() * (b - a) / 0.5).ceil() as usize).max(1);
        let w = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * w;
            let half = 0.5 * w;
            for &(x, wx) in &nodes {
                let t1 = lo + half * (x + 1.0);
                let phase = omega * (t - t1);
                let f = match flavor {
                    Flavor::Cos => Complex64::new(2.0 * phase.cos(), 0.0),
                    Flavor::Exp => Complex64::from_polar(1.0, phase),
                };
                acc += f * (sign_function(schedule, t1) as f64 * wx * half);
            }
        }
    }
    acc * s_t
}

/// Bath of `K` modes on a uniform grid `(k - 1/2) dw`, `dw = cutoff / K`,
/// with couplings `g_k^2 = I(w_k) dw`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedBath {
    pub frequencies: Vec<f64>,
    pub couplings: Vec<f64>,
}

impl DiscretizedBath {
    pub fn uniform(config: &SimConfig, modes: usize, cutoff: f64) -> Result<Self, OracleError> {
        if modes == 0 || !(cutoff > 0.0) {
            return Err(OracleError::Discretization(format!("modes={modes}, cutoff={cutoff}")));
        }
        let sd = config.spectral_density();
        let dw = cutoff / modes as f64;
        let frequencies: Vec<f64> = (0..modes).map(|k| (k as f64 + 0.5) * dw).collect();
        let couplings = frequencies.iter().map(|&w| (sd.eval(w) * dw).sqrt()).collect();
        Ok(DiscretizedBath { frequencies, couplings })
    }

    /// Default oracle bath: `modes` modes over [0, 10 omega_c]. The spectral
    /// weight beyond the cutoff is ~5e-4 of the total, and 400 modes then
    /// push the first recurrence past 8 cycles.
    pub fn for_oracle(config: &SimConfig, modes: usize) -> Result<Self, OracleError> {
        Self::uniform(config, modes, ORACLE_CUTOFF_FACTOR * config.omega_c)
    }

    /// First recurrence time `2 pi / dw` of the discrete bath.
    pub fn recurrence_time(&self) -> f64 {
        let dw = self.frequencies[0] * 2.0;
        2.0 * PI / dw
    }

    /// Largest cutoff whose recurrence time exceeds `horizon` by `margin`.
    pub fn cutoff_for_horizon(modes: usize, horizon: f64, margin: f64) -> f64 {
        2.0 * PI * modes as f64 / (margin * horizon)
    }
}

/// Unitary evolution with `H_0 + s(t) V` in the single-excitation sector,
/// via one eigendecomposition per sign.
struct SplitEvolution {
    plus: Eigen,
    minus: Eigen,
}

struct Eigen {
    vectors: DMatrix<Complex64>,
    values: Vec<f64>,
}

impl SplitEvolution {
    fn new(bath: &DiscretizedBath) -> Self {
        let n = bath.frequencies.len() + 1;
        let build = |sign: f64| {
            let mut h = DMatrix::<f64>::zeros(n, n);
            h[(0, 0)] = OMEGA0;
            for (k, (&w, &g)) in bath.frequencies.iter().zip(&bath.couplings).enumerate() {
                h[(k + 1, k + 1)] = w;
                h[(0, k + 1)] = sign * g;
                h[(k + 1, 0)] = sign * g;
            }
            let eig = SymmetricEigen::new(h);
            Eigen {
                vectors: eig.eigenvectors.map(|x| Complex64::new(x, 0.0)),
                values: eig.eigenvalues.iter().copied().collect(),
            }
        };
        SplitEvolution {
            plus: build(1.0),
            minus: build(-1.0),
        }
    }

    fn step(&self, psi: &DVector<Complex64>, tau: f64, sign: f64) -> DVector<Complex64> {
        let eig = if sign > 0.0 { &self.plus } else { &self.minus };
        let mut c = eig.vectors.tr_mul(psi);
        for (ci, &e) in c.iter_mut().zip(&eig.values) {
            *ci *= Complex64::from_polar(1.0, -e * tau);
        }
        &eig.vectors * c
    }
}

/// Exact zero-temperature dynamics sampled at `times` (ascending, >= 0).
///
/// The qubit starts in the pure state with `rho11(0)` and `|rho10(0)|`
/// from the config and the bath in vacuum. Reported states are in the
/// frame rotating with the bare qubit, where `rho11 = |c_e|^2` and
/// `|rho10| = |c_e| |c_g|`; the phase of `rho10` is frame dependent and is
/// reported as that of `c_e e^{i t}` times the initial phase.
pub fn single_excitation_at(config: &SimConfig, bath: &DiscretizedBath, times: &[f64]) -> Result<Trajectory, OracleError> {
    if config.kt != 0.0 {
        return Err(OracleError::NonZeroTemperature(config.kt));
    }
    let p = config.initial_rho11;
    let c_g = (1.0 - p).max(0.0).sqrt();
    if (config.initial_rho10.norm() - (p * (1.0 - p)).sqrt()).abs() > 1e-12 {
        return Err(OracleError::NotPure);
    }
    let phase0 = if config.initial_rho10.norm() > 0.0 {
        config.initial_rho10 / config.initial_rho10.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let evo = SplitEvolution::new(bath);
    let schedule = config.schedule();
    let n = bath.frequencies.len() + 1;
    let mut psi = DVector::<Complex64>::zeros(n);
    psi[0] = Complex64::new(p.sqrt(), 0.0);

    let mut samples = Vec::with_capacity(times.len());
    let mut now = 0.0;
    for &target in times {
        // advance window by window so each piece has a single sign
        while now < target {
            let window = schedule.pulse_count(now);
            let end = if schedule.enabled {
                schedule.window_start(window + 1).min(target)
            } else {
                target
            };
            let sign = parity_sign(window);
            psi = evo.step(&psi, end - now, sign);
            now = end;
        }
        let c_e = psi[0] * Complex64::from_polar(1.0, OMEGA0 * target);
        let state = if target == 0.0 {
            // exact, rather than through sqrt(p)^2
            config.initial_state()
        } else {
            QubitState {
                rho11: c_e.norm_sqr(),
                rho10: phase0 * c_e * c_g,
            }
        };
        samples.push(Sample {
            t: target,
            pulse_count: schedule.pulse_count(target),
            state,
            kernels: None,
        });
    }
    Ok(Trajectory {
        samples,
        diagnostics: Default::default(),
    })
}

/// Exact dynamics sampled at the times [`propagate`](crate::propagator::propagate)
/// would report for the same config.
pub fn single_excitation_simulate(config: &SimConfig, bath: &DiscretizedBath) -> Result<Trajectory, OracleError> {
    let grid = StepGrid::for_config(config);
    let times = grid.sample_times(config.numerics.sample_stride, config.t_final);
    single_excitation_at(config, bath, &times)
}

/// Total probability `sum |c|^2` after evolving to `t` (unitarity check).
pub fn single_excitation_norm(config: &SimConfig, bath: &DiscretizedBath, t: f64) -> f64 {
    let evo = SplitEvolution::new(bath);
    let schedule = config.schedule();
    let n = bath.frequencies.len() + 1;
    let mut psi = DVector::<Complex64>::zeros(n);
    psi[0] = Complex64::new(1.0, 0.0);
    let mut now = 0.0;
    while now < t {
        let window = schedule.pulse_count(now);
        let end = if schedule.enabled {
            schedule.window_start(window + 1).min(t)
        } else {
            t
        };
        psi = evo.step(&psi, end - now, parity_sign(window));
        now = end;
    }
    psi.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::pulsed_time_integral;

    #[test]
    fn markov_examples() {
        let c = SimConfig::paper_default();
        let m = markov_rates(&c);
        assert!((m.gamma11 - 5.144_704_155_483_18).abs() < 1e-12);
        assert!((m.eta11 - 2.335_586_037_634_940_4e-4).abs() < 1e-16);
        // detailed balance of the rates
        let n = c.bath().bose_occupation(1.0).unwrap();
        assert!((m.eta11 / m.gamma11 - n / (2.0 * n + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let nodes = gauss_legendre(GL_ORDER);
        let sum_w: f64 = nodes.iter().map(|n| n.1).sum();
        assert!((sum_w - 2.0).abs() < 1e-14);
        let x38: f64 = nodes.iter().map(|(x, w)| w * x.powi(38)).sum();
        assert!((x38 - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn sign_weighted_integral_agrees_with_segments() {
        let s = PulseSchedule::periodic(0.37);
        for &(w, t) in &[(0.0, 1.0), (2.5, 3.9), (-7.0, 0.37)] {
            for flavor in [Flavor::Cos, Flavor::Exp] {
                let a = sign_weighted_time_integral(&s, w, t, flavor);
                let b = pulsed_time_integral(&s, w, t, flavor).unwrap();
                assert!((a - b).norm() < 1e-12, "{w} {t} {a} {b}");
            }
        }
    }

    #[test]
    fn unitary_evolution_conserves_norm() {
        let mut c = SimConfig::paper_default().with_pulse_interval(Some(0.3));
        c.alpha = 0.01;
        c.kt = 0.0;
        let bath = DiscretizedBath::uniform(&c, 200, 30.0).unwrap();
        let norm = single_excitation_norm(&c, &bath, 20.0);
        assert!((norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_coupling_is_trivial() {
        let mut c = SimConfig::paper_default();
        c.alpha = 0.0;
        c.kt = 0.0;
        let bath = DiscretizedBath::uniform(&c, 50, 20.0).unwrap();
        let tr = single_excitation_at(&c, &bath, &[0.0, 1.0, 7.5]).unwrap();
        for s in &tr.samples {
            assert!((s.state.rho11 - 0.5).abs() < 1e-12);
            assert!((s.state.rho10 - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn simulate_uses_the_propagator_sample_times() {
        let mut c = weak(Some(0.2));
        c.t_final = 1.1;
        c.numerics.substeps = Some(4);
        let bath = DiscretizedBath::for_oracle(&c, 50).unwrap();
        let tr = single_excitation_simulate(&c, &bath).unwrap();
        let tcl = crate::propagator::propagate(&c).unwrap();
        assert_eq!(tr.times(), tcl.times());
        assert_eq!(tr.samples[0].state, c.initial_state());
    }

    #[test]
    fn rejects_finite_temperature() {
        let c = SimConfig::paper_default();
        let bath = DiscretizedBath::uniform(&c, 10, 10.0).unwrap();
        assert!(matches!(single_excitation_at(&c, &bath, &[1.0]), Err(OracleError::NonZeroTemperature(_))));
        assert!(DiscretizedBath::uniform(&c, 0, 10.0).is_err());
    }

    fn weak(dt: Option<f64>) -> SimConfig {
        let mut c = SimConfig::paper_default().with_pulse_interval(dt);
        c.alpha = 0.01;
        c.kt = 0.0;
        c
    }

    #[test]
    fn discrete_couplings_carry_the_spectral_weight() {
        let c = weak(None);
        let bath = DiscretizedBath::for_oracle(&c, DEFAULT_MODES).unwrap();
        let sum: f64 = bath.couplings.iter().map(|g| g * g).sum();
        let exact = c.spectral_density().integral_up_to(c.omega_max());
        assert!(((sum - exact) / exact).abs() < 0.01);
        assert!(bath.recurrence_time() > 10.0 * PI);
    }

    #[test]
    fn doubling_modes_barely_changes_the_oracle() {
        let times: Vec<f64> = (1..=50).map(|i| i as f64 * 10.0 * PI / 50.0).collect();
        for dt in [None, Some(0.032 * 2.0 * PI)] {
            let c = weak(dt);
            let a = single_excitation_at(&c, &DiscretizedBath::for_oracle(&c, 400).unwrap(), &times).unwrap();
            let b = single_excitation_at(&c, &DiscretizedBath::for_oracle(&c, 800).unwrap(), &times).unwrap();
            for (x, y) in a.samples.iter().zip(&b.samples) {
                let d = (x.state.rho11 - y.state.rho11).abs();
                assert!(d < 1e-4, "t {} diff {d}", x.t);
            }
        }
    }

    #[test]
    fn brute_force_matches_markov_scale() {
        let mut c = SimConfig::paper_default();
        c.omega_c = 2.0;
        let g = brute_force_kernel(&c, 0.5, KernelKind::Gamma11, 1e-8).unwrap();
        let direct = crate::kernels::kernel_gamma11(&c, 0.5).unwrap();
        assert!(((g.re - direct) / direct).abs() < 1e-6);
    }
}
