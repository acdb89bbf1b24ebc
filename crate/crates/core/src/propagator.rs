//! Fixed-step RK4 integration of
//!
//! ```text
//! d rho11/dt = -gamma11(t) rho11 + eta11(t)
//! d rho10/dt = -gamma10(t) rho10
//! ```
//!
//! on a grid whose steps never straddle a pulse instant. The toggling-frame
//! state is continuous across pulses; the kernels are not (they change sign),
//! so every stage of a step uses the sign pattern of the window the step
//! lies in, including the stage sitting on the closing pulse instant.

use num_complex::Complex64;
use thiserror::Error;

use crate::kernels::lag::{assemble, kernel_values_from_lags};
use crate::kernels::{kernel_values_in_window, KernelError, LagPrimitive, LagTable};
use crate::model::{ConfigError, Diagnostics, KernelValues, PulseSchedule, QubitState, Sample, SimConfig, Trajectory};

/// Population slack of the positivity diagnostic.
pub const POSITIVITY_EPS: f64 = 1e-6;

/// Default RK4 steps per pulse interval.
pub const DEFAULT_SUBSTEPS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("kernel evaluation failed at t={t}: {source}")]
    Kernel { t: f64, source: KernelError },
}

/// Step layout of one run.
///
/// With pulses, `h = dt / substeps` and the grid is aligned with the pulse
/// instants. Without pulses, `h = t_final / N` with `N = substeps` when
/// given and otherwise the smallest `N` with `h <= min(0.005, t_final/2000)`.
/// A final shorter step covers any remainder of `t_final`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepGrid {
    pub h: f64,
    pub steps: usize,
    /// Steps per pulse window; `None` without pulses.
    pub steps_per_window: Option<usize>,
    /// Length of the trailing partial step (0 when the grid ends on t_final).
    pub tail: f64,
}

impl StepGrid {
    pub fn for_config(config: &SimConfig) -> Self {
        match config.pulse_interval {
            Some(dt) => {
                let sub = config.numerics.substeps.unwrap_or(DEFAULT_SUBSTEPS);
                let h = dt / sub as f64;
                let ratio = config.t_final / h;
                let mut steps = ratio.floor() as usize;
                if ratio - steps as f64 > 1.0 - 1e-9 {
                    steps += 1;
                }
                let tail = config.t_final - steps as f64 * h;
                let tail = if tail > 1e-9 * h { tail } else { 0.0 };
                StepGrid {
                    h,
                    steps,
                    steps_per_window: Some(sub),
                    tail,
                }
            }
            None => {
                let n = config.numerics.substeps.unwrap_or_else(|| {
                    let h = (config.t_final / 2000.0).min(0.005);
                    (config.t_final / h).ceil() as usize
                });
                StepGrid {
                    h: config.t_final / n as f64,
                    steps: n,
                    steps_per_window: None,
                    tail: 0.0,
                }
            }
        }
    }

    /// Window of the step starting at grid point `n` (also the left-closed
    /// window of the time `n h`).
    pub fn window_at(&self, n: usize) -> u64 {
        match self.steps_per_window {
            Some(s) => (n / s) as u64,
            None => 0,
        }
    }

    pub fn time_at(&self, n: usize) -> f64 {
        n as f64 * self.h
    }

    /// Times at which [`propagate`] records samples.
    pub fn sample_times(&self, stride: usize, t_final: f64) -> Vec<f64> {
        let mut out: Vec<f64> = (0..=self.steps)
            .filter(|&n| n % stride == 0 || n == self.steps)
            .map(|n| self.time_at(n))
            .collect();
        if self.tail > 0.0 {
            out.push(t_final);
        }
        out
    }
}

/// Where the propagator gets its kernels from.
pub trait KernelSource {
    /// Kernels at grid half-step `half_index` (time `half_index * h / 2`)
    /// with the sign pattern of `window`.
    fn on_grid(&mut self, half_index: usize, window: u64) -> Result<KernelValues, KernelError>;
    /// Kernels at an arbitrary time (used by the trailing partial step).
    fn off_grid(&mut self, t: f64, window: u64) -> Result<KernelValues, KernelError>;
}

/// Lag-table source: every stage time and every lag `t - k dt` is a
/// multiple of `h/2`, so one table of `G` serves all kernel evaluations.
pub struct TabulatedKernels {
    table: LagTable,
    config: SimConfig,
    halves_per_window: usize,
}

impl TabulatedKernels {
    pub fn new(config: &SimConfig, grid: &StepGrid) -> Self {
        let prim = LagPrimitive::new(config);
        TabulatedKernels {
            table: LagTable::new(prim, 0.5 * grid.h),
            config: config.clone(),
            halves_per_window: grid.steps_per_window.map_or(0, |s| 2 * s),
        }
    }
}

impl KernelSource for TabulatedKernels {
    fn on_grid(&mut self, half_index: usize, window: u64) -> Result<KernelValues, KernelError> {
        let t = half_index as f64 * self.table.spacing();
        let hw = self.halves_per_window;
        let table = &mut self.table;
        let acc = assemble(window, |k| {
            let back = k as usize * hw;
            debug_assert!(back <= half_index);
            table.get(half_index - back)
        })?;
        Ok(acc.into_kernels(t, window))
    }

    fn off_grid(&mut self, t: f64, window: u64) -> Result<KernelValues, KernelError> {
        kernel_values_from_lags(&self.config, self.table.primitive(), t, window)
    }
}

/// Uncached source that runs a frequency quadrature per stage. Slow; kept
/// as the reference the tabulated path is checked against.
pub struct DirectKernels {
    config: SimConfig,
    half_step: f64,
}

impl DirectKernels {
    pub fn new(config: &SimConfig, grid: &StepGrid) -> Self {
        DirectKernels {
            config: config.clone(),
            half_step: 0.5 * grid.h,
        }
    }
}

impl KernelSource for DirectKernels {
    fn on_grid(&mut self, half_index: usize, window: u64) -> Result<KernelValues, KernelError> {
        kernel_values_in_window(&self.config, half_index as f64 * self.half_step, window)
    }

    fn off_grid(&mut self, t: f64, window: u64) -> Result<KernelValues, KernelError> {
        kernel_values_in_window(&self.config, t, window)
    }
}

#[derive(Clone, Copy)]
struct Rates {
    gamma11: f64,
    gamma10: Complex64,
    eta11: f64,
}

impl From<&KernelValues> for Rates {
    fn from(k: &KernelValues) -> Self {
        Rates {
            gamma11: k.gamma11,
            gamma10: k.gamma10,
            eta11: k.eta11,
        }
    }
}

fn rhs(r: Rates, y: (f64, Complex64)) -> (f64, Complex64) {
    (-r.gamma11 * y.0 + r.eta11, -r.gamma10 * y.1)
}

fn rk4_step(y: (f64, Complex64), h: f64, k_start: Rates, k_mid: Rates, k_end: Rates) -> (f64, Complex64) {
    let d1 = rhs(k_start, y);
    let d2 = rhs(k_mid, (y.0 + 0.5 * h * d1.0, y.1 + d1.1 * (0.5 * h)));
    let d3 = rhs(k_mid, (y.0 + 0.5 * h * d2.0, y.1 + d2.1 * (0.5 * h)));
    let d4 = rhs(k_end, (y.0 + h * d3.0, y.1 + d3.1 * h));
    (
        y.0 + h / 6.0 * (d1.0 + 2.0 * d2.0 + 2.0 * d3.0 + d4.0),
        y.1 + (d1.1 + d2.1 * 2.0 + d3.1 * 2.0 + d4.1) * (h / 6.0),
    )
}

fn record(out: &mut Trajectory, t: f64, schedule: &PulseSchedule, y: (f64, Complex64), kernels: KernelValues) {
    let state = QubitState { rho11: y.0, rho10: y.1 };
    let d = &mut out.diagnostics;
    if !state.is_physical(POSITIVITY_EPS) {
        d.positivity_violations += 1;
        d.first_violation_t.get_or_insert(t);
    }
    d.min_rho11 = d.min_rho11.min(y.0);
    d.max_rho11 = d.max_rho11.max(y.0);
    out.samples.push(Sample {
        t,
        pulse_count: schedule.pulse_count(t),
        state,
        kernels: Some(kernels),
    });
}

/// Integrates the TCL2 equations for `config` using tabulated kernels.
pub fn propagate(config: &SimConfig) -> Result<Trajectory, PropagationError> {
    config.validate()?;
    let grid = StepGrid::for_config(config);
    let mut source = TabulatedKernels::new(config, &grid);
    propagate_with(config, &grid, &mut source)
}

/// Integrates with a frequency quadrature at every stage (no caching).
pub fn propagate_direct(config: &SimConfig) -> Result<Trajectory, PropagationError> {
    config.validate()?;
    let grid = StepGrid::for_config(config);
    let mut source = DirectKernels::new(config, &grid);
    propagate_with(config, &grid, &mut source)
}

pub fn propagate_with<S: KernelSource>(config: &SimConfig, grid: &StepGrid, source: &mut S) -> Result<Trajectory, PropagationError> {
    let schedule = config.schedule();
    let stride = config.numerics.sample_stride;
    let at = |t: f64| move |source: KernelError| PropagationError::Kernel { t, source };

    let mut out = Trajectory {
        samples: Vec::with_capacity(grid.steps / stride + 2),
        diagnostics: Diagnostics {
            min_rho11: config.initial_rho11,
            max_rho11: config.initial_rho11,
            ..Diagnostics::default()
        },
    };
    let mut y = (config.initial_rho11, config.initial_rho10);
    record(&mut out, 0.0, &schedule, y, KernelValues::zero(0.0, 0));

    let mut k_start = source.on_grid(0, 0).map_err(at(0.0))?;
    for n in 0..grid.steps {
        let w = grid.window_at(n);
        let t_mid = grid.time_at(n) + 0.5 * grid.h;
        let t_end = grid.time_at(n + 1);
        if k_start.pulse_count != w {
            // first step of a new window: re-evaluate with the new sign pattern
            k_start = source.on_grid(2 * n, w).map_err(at(grid.time_at(n)))?;
        }
        let k_mid = source.on_grid(2 * n + 1, w).map_err(at(t_mid))?;
        let k_end = source.on_grid(2 * n + 2, w).map_err(at(t_end))?;
        y = rk4_step(y, grid.h, (&k_start).into(), (&k_mid).into(), (&k_end).into());

        let next_window = grid.window_at(n + 1);
        let is_sample = (n + 1) % stride == 0 || n + 1 == grid.steps;
        let k_next = if next_window == w {
            k_end
        } else {
            source.on_grid(2 * n + 2, next_window).map_err(at(t_end))?
        };
        if is_sample {
            record(&mut out, t_end, &schedule, y, k_next);
        }
        k_start = k_next;
    }

    if grid.tail > 0.0 {
        let t0 = grid.time_at(grid.steps);
        let w = grid.window_at(grid.steps);
        let h = grid.tail;
        let t_end = config.t_final;
        let k0 = source.off_grid(t0, w).map_err(at(t0))?;
        let k1 = source.off_grid(t0 + 0.5 * h, w).map_err(at(t0 + 0.5 * h))?;
        let k2 = source.off_grid(t_end, w).map_err(at(t_end))?;
        y = rk4_step(y, h, (&k0).into(), (&k1).into(), (&k2).into());
        let w_end = schedule.pulse_count(t_end);
        let k_sample = if w_end == w {
            k2
        } else {
            source.off_grid(t_end, w_end).map_err(at(t_end))?
        };
        record(&mut out, t_end, &schedule, y, k_sample);
    }
    Ok(out)
}

/// Thermal equilibrium population of the upper level, 1/(e^{1/kT} + 1).
pub fn steady_state_thermal(kt: f64) -> f64 {
    if kt <= 0.0 {
        return 0.0;
    }
    let x = 1.0 / kt;
    // e^{-x}/(1 + e^{-x}) stays finite for small kT
    let e = (-x).exp();
    e / (1.0 + e)
}

/// Closed-form coherence `rho10(t) = rho10(0) exp(-int_0^t gamma10)` at
/// every grid point, with the exponent integrated by Simpson's rule step by
/// step (each step inside one pulse window). Independent of the RK4 update.
pub fn coherence_by_quadrature(config: &SimConfig) -> Result<Vec<(f64, Complex64)>, PropagationError> {
    config.validate()?;
    let grid = StepGrid::for_config(config);
    let mut source = TabulatedKernels::new(config, &grid);
    let at = |t: f64| move |source: KernelError| PropagationError::Kernel { t, source };
    let mut acc = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(grid.steps + 1);
    out.push((0.0, config.initial_rho10));
    for n in 0..grid.steps {
        let w = grid.window_at(n);
        let t = grid.time_at(n);
        let k0 = source.on_grid(2 * n, w).map_err(at(t))?;
        let k1 = source.on_grid(2 * n + 1, w).map_err(at(t))?;
        let k2 = source.on_grid(2 * n + 2, w).map_err(at(t))?;
        acc += (k0.gamma10 + k1.gamma10 * 4.0 + k2.gamma10) * (grid.h / 6.0);
        out.push((grid.time_at(n + 1), config.initial_rho10 * (-acc).exp()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn small(dt: Option<f64>) -> SimConfig {
        let mut c = SimConfig::paper_default();
        c.t_final = 1.0;
        c.pulse_interval = dt;
        c
    }

    #[test]
    fn steady_state_examples() {
        assert!((steady_state_thermal(0.1) - 4.539_786_870_243_439_5e-5).abs() < 1e-18);
        assert!((steady_state_thermal(1e6) - 0.5).abs() < 1e-6);
        assert_eq!(steady_state_thermal(0.0), 0.0);
        assert_eq!(steady_state_thermal(1e-4), 0.0);
    }

    #[test]
    fn grid_aligns_with_pulses() {
        let mut c = small(Some(0.1));
        c.numerics.substeps = Some(4);
        let g = StepGrid::for_config(&c);
        assert_eq!(g.steps, 40);
        assert_eq!(g.tail, 0.0);
        assert_eq!(g.window_at(3), 0);
        assert_eq!(g.window_at(4), 1);

        c.t_final = 1.013;
        let g = StepGrid::for_config(&c);
        assert_eq!(g.steps, 40);
        assert!((g.tail - 0.013).abs() < 1e-12);
    }

    #[test]
    fn default_grid_without_pulses() {
        let mut c = small(None);
        let g = StepGrid::for_config(&c);
        assert_eq!(g.steps, 2000);
        c.t_final = 20.0;
        assert_eq!(StepGrid::for_config(&c).steps, 4000);
        c.numerics.substeps = Some(10);
        assert_eq!(StepGrid::for_config(&c).h, 2.0);
    }

    #[test]
    fn zero_coupling_freezes_state() {
        let mut c = small(Some(0.05));
        c.alpha = 0.0;
        let tr = propagate(&c).unwrap();
        for s in &tr.samples {
            assert_eq!(s.state.rho11, 0.5);
            assert_eq!(s.state.rho10, Complex64::new(0.5, 0.0));
        }
    }

    #[test]
    fn tabulated_matches_direct() {
        for dt in [None, Some(0.13)] {
            let mut c = small(dt);
            c.t_final = 0.6;
            c.numerics.substeps = Some(if dt.is_some() { 4 } else { 24 });
            let a = propagate(&c).unwrap();
            let b = propagate_direct(&c).unwrap();
            assert_eq!(a.samples.len(), b.samples.len());
            for (x, y) in a.samples.iter().zip(&b.samples) {
                assert_eq!(x.t, y.t);
                assert!((x.state.rho11 - y.state.rho11).abs() < 1e-9);
                assert!((x.state.rho10 - y.state.rho10).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn tail_step_reaches_t_final() {
        let mut c = small(Some(0.1));
        c.t_final = 0.53;
        c.numerics.substeps = Some(5);
        let tr = propagate(&c).unwrap();
        let last = tr.last().unwrap();
        assert!((last.t - 0.53).abs() < 1e-15);
        assert_eq!(last.pulse_count, 5);
        let times = StepGrid::for_config(&c).sample_times(1, c.t_final);
        assert_eq!(times, tr.times());
    }

    #[test]
    fn coherence_matches_integrating_factor() {
        let dt = 0.016 * 2.0 * PI;
        let mut c = small(Some(dt));
        c.t_final = 20.0 * dt;
        let tr = propagate(&c).unwrap();
        let exact = coherence_by_quadrature(&c).unwrap();
        assert_eq!(tr.samples.len(), exact.len());
        for (s, (t, e)) in tr.samples.iter().zip(&exact) {
            assert_eq!(s.t, *t);
            assert!((s.state.rho10 - e).norm() < 1e-7 * e.norm(), "t {t}");
        }
    }

    #[test]
    fn sample_stride_thins_output() {
        let mut c = small(None);
        c.numerics.substeps = Some(100);
        c.numerics.sample_stride = 7;
        let tr = propagate(&c).unwrap();
        // 0, 7, ..., 98, 100
        assert_eq!(tr.samples.len(), 16);
        assert_eq!(tr.last().unwrap().t, 1.0);
    }
}
