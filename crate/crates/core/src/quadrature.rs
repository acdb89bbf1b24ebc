//! Globally adaptive 15-point Gauss-Kronrod quadrature for vectors of
//! complex integrands sharing one set of nodes.

// rule constants are quoted to the digits of the reference tables
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

// Kronrod abscissae; odd indices are shared with the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Outcome of [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<const M: usize> {
    pub value: [Complex64; M],
    /// Estimated absolute error per component.
    pub error: [f64; M],
    pub panels: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    /// Absolute floor expressed relative to the integral of |f| over the
    /// whole range. Integrals that cancel almost completely would otherwise
    /// never meet a purely relative target.
    pub rel_to_abs_integral: f64,
    pub max_panels: usize,
}

#[derive(Clone, Copy)]
struct Panel<const M: usize> {
    a: f64,
    b: f64,
    value: [Complex64; M],
    error: [f64; M],
    abs: [f64; M],
    priority: f64,
}

impl<const M: usize> PartialEq for Panel<M> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl<const M: usize> Eq for Panel<M> {}
impl<const M: usize> PartialOrd for Panel<M> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const M: usize> Ord for Panel<M> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

fn rescale(err: f64, resasc: f64) -> f64 {
    if resasc == 0.0 || err == 0.0 {
        return err;
    }
    resasc * (200.0 * err / resasc).powf(1.5).min(1.0)
}

fn gk15<const M: usize, F>(f: &mut F, a: f64, b: f64) -> ([Complex64; M], [f64; M], [f64; M])
where
    F: FnMut(f64) -> [Complex64; M],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let zero = Complex64::new(0.0, 0.0);
    let fc = f(center);
    let mut kron = [zero; M];
    let mut gauss = [zero; M];
    let mut abs = [0.0; M];
    let mut fvals = [[zero; M]; 15];
    fvals[7] = fc;
    for c in 0..M {
        kron[c] = fc[c] * WGK[7];
        gauss[c] = fc[c] * WG[3];
        abs[c] = fc[c].norm() * WGK[7];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fvals[j] = f1;
        fvals[14 - j] = f2;
        for c in 0..M {
            kron[c] += (f1[c] + f2[c]) * WGK[j];
            abs[c] += (f1[c].norm() + f2[c].norm()) * WGK[j];
            if j % 2 == 1 {
                gauss[c] += (f1[c] + f2[c]) * WG[j / 2];
            }
        }
    }
    let mut err = [0.0; M];
    for c in 0..M {
        let mean = kron[c] * 0.5;
        let mut asc = WGK[7] * (fc[c] - mean).norm();
        for j in 0..7 {
            asc += WGK[j] * ((fvals[j][c] - mean).norm() + (fvals[14 - j][c] - mean).norm());
        }
        let diff = (kron[c] - gauss[c]) * half;
        let e_re = rescale(diff.re.abs(), asc * half.abs());
        let e_im = rescale(diff.im.abs(), asc * half.abs());
        err[c] = e_re + e_im;
        kron[c] *= half;
        abs[c] *= half.abs();
    }
    (kron, err, abs)
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, starting from the panels
/// delimited by `breaks` and bisecting the worst panel until every component
/// meets `tol`.
pub fn integrate<const M: usize, F>(mut f: F, breaks: &[f64], tol: Tolerance) -> QuadResult<M>
where
    F: FnMut(f64) -> [Complex64; M],
{
    assert!(breaks.len() >= 2, "need at least one panel");
    let zero = Complex64::new(0.0, 0.0);
    let mut raw = Vec::with_capacity(breaks.len() - 1);
    for w in breaks.windows(2) {
        let (v, e, ab) = gk15(&mut f, w[0], w[1]);
        raw.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
            abs: ab,
            priority: 0.0,
        });
    }

    let mut total = [zero; M];
    let mut total_err = [0.0; M];
    let mut total_abs = [0.0; M];
    for p in &raw {
        for c in 0..M {
            total[c] += p.value[c];
            total_err[c] += p.error[c];
            total_abs[c] += p.abs[c];
        }
    }
    // Scales used to rank panels; fixed after the first pass.
    let mut scale = [0.0; M];
    for c in 0..M {
        scale[c] = (tol.rel * total[c].norm()).max(tol.rel * tol.rel_to_abs_integral * total_abs[c]);
    }
    let priority = |err: &[f64; M]| -> f64 {
        let mut p: f64 = 0.0;
        for c in 0..M {
            if scale[c] > 0.0 {
                p = p.max(err[c] / scale[c]);
            } else if err[c] > 0.0 {
                p = f64::INFINITY;
            }
        }
        p
    };

    let mut heap: BinaryHeap<Panel<M>> = raw
        .into_iter()
        .map(|mut p| {
            p.priority = priority(&p.error);
            p
        })
        .collect();
    let mut panels = heap.len();
    let mut frozen: Vec<Panel<M>> = Vec::new();

    let done = |total: &[Complex64; M], total_err: &[f64; M], total_abs: &[f64; M]| {
        (0..M).all(|c| {
            let target = (tol.rel * total[c].norm()).max(tol.rel * tol.rel_to_abs_integral * total_abs[c]);
            total_err[c] <= target
        })
    };

    let mut converged = done(&total, &total_err, &total_abs);
    while !converged {
        if panels >= tol.max_panels {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot split further in floating point
            frozen.push(worst);
            continue;
        }
        let (v1, e1, a1) = gk15(&mut f, worst.a, mid);
        let (v2, e2, a2) = gk15(&mut f, mid, worst.b);
        for c in 0..M {
            total[c] += v1[c] + v2[c] - worst.value[c];
            total_err[c] += e1[c] + e2[c] - worst.error[c];
            total_abs[c] += a1[c] + a2[c] - worst.abs[c];
        }
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
            abs: a1,
            priority: priority(&e1),
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
            abs: a2,
            priority: priority(&e2),
        });
        panels += 1;
        converged = done(&total, &total_err, &total_abs);
    }

    // Re-sum from the panels to shed the drift of the running updates.
    let mut value = [zero; M];
    let mut error = [0.0; M];
    for p in heap.iter().chain(frozen.iter()) {
        for c in 0..M {
            value[c] += p.value[c];
            error[c] += p.error[c];
        }
    }
    QuadResult {
        value,
        error,
        panels,
        converged,
    }
}

/// Evenly spaced break points over `[a, b]` with panels no wider than `max_width`.
pub fn uniform_breaks(a: f64, b: f64, max_width: f64, max_count: usize) -> Vec<f64> {
    let n = (((b - a) / max_width).ceil() as usize).clamp(1, max_count.max(1));
    (0..=n)
        .map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 })
        .collect()
}
