//! Kernel values against numbers frozen from the brute-force double
//! integral (2D Simpson, refined to 1e-12), plus cross-route checks.

use num_complex::Complex64;

use tclpulse::kernels::{kernel_values, kernel_values_in_window, LagPrimitive};
use tclpulse::kernels::lag::kernel_values_from_lags;
use tclpulse::model::SimConfig;
use tclpulse::oracles::markov_rates;

struct Frozen {
    dt: Option<f64>,
    t: f64,
    gamma11: f64,
    gamma10: Complex64,
    eta11: f64,
}

const FROZEN: [Frozen; 2] = [
    Frozen {
        dt: None,
        t: 1.0,
        gamma11: 4.730_608_005_770_316,
        gamma10: Complex64::new(2.365_304_002_885_158, 5.183_565_371_937_717),
        eta11: 2.811_220_172_316_871_2e-2,
    },
    Frozen {
        dt: Some(0.25),
        t: 1.1,
        gamma11: 2.333_367_189_171_325_7,
        gamma10: Complex64::new(1.166_683_594_585_653_3, -1.066_637_204_241_504_2),
        eta11: 1.524_247_278_874_547_6e-3,
    },
];

#[test]
fn direct_quadrature_matches_frozen_oracle_values() {
    for f in &FROZEN {
        let c = SimConfig::paper_default().with_pulse_interval(f.dt);
        let k = kernel_values(&c, f.t).unwrap();
        assert!(((k.gamma11 - f.gamma11) / f.gamma11).abs() < 1e-7, "{}", k.gamma11);
        assert!((k.gamma10 - f.gamma10).norm() / f.gamma10.norm() < 1e-7, "{}", k.gamma10);
        assert!(((k.eta11 - f.eta11) / f.eta11).abs() < 1e-7, "{}", k.eta11);
    }
}

#[test]
fn lag_route_matches_frozen_oracle_values() {
    for f in &FROZEN {
        let c = SimConfig::paper_default().with_pulse_interval(f.dt);
        let prim = LagPrimitive::new(&c);
        let window = c.schedule().pulse_count(f.t);
        let k = kernel_values_from_lags(&c, &prim, f.t, window).unwrap();
        assert!(((k.gamma11 - f.gamma11) / f.gamma11).abs() < 1e-7);
        assert!((k.gamma10 - f.gamma10).norm() / f.gamma10.norm() < 1e-7);
        assert!(((k.eta11 - f.eta11) / f.eta11).abs() < 1e-7);
    }
}

#[test]
fn long_lags_approach_markov_rates_without_pulses() {
    let c = SimConfig::paper_default();
    let prim = LagPrimitive::new(&c);
    let m = markov_rates(&c);
    // the thermal tail decays like 1/t, so compare far out
    let k = kernel_values_from_lags(&c, &prim, 5.0e4, 0).unwrap();
    assert!(((k.gamma11 - m.gamma11) / m.gamma11).abs() < 1e-4);
    assert!(((k.gamma10.re - m.gamma10_re) / m.gamma10_re).abs() < 1e-4);
    assert!(((k.eta11 - m.eta11) / m.eta11).abs() < 0.05);
}

#[test]
fn one_sided_limits_at_a_pulse_differ_by_sign() {
    let c = SimConfig::paper_default().with_pulse_interval(Some(0.2));
    let t = 1.0;
    let prim = LagPrimitive::new(&c);
    for w in [4u64, 5] {
        let a = kernel_values_in_window(&c, t, w).unwrap();
        let b = kernel_values_from_lags(&c, &prim, t, w).unwrap();
        assert!((a.gamma10 - b.gamma10).norm() < 1e-8 * a.gamma10.norm());
    }
    let left = kernel_values_in_window(&c, t, 4).unwrap();
    let right = kernel_values_in_window(&c, t, 5).unwrap();
    assert!((left.gamma11 + right.gamma11).abs() < 1e-9 * left.gamma11.abs());
}
