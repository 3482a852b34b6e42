//! Adaptive Gauss–Kronrod (G10/K21) quadrature with global subdivision.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel, max_intervals: 2000 }
    }

    pub const fn with_max_intervals(mut self, n: usize) -> Self {
        self.max_intervals = n;
        self
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-12, 1e-10)
    }
}

/// Result of an integration: value plus estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0, intervals: 0 });
    }
    if b < a {
        return integrate(f, b, a, tol).map(|e| Estimate { value: -e.value, ..e });
    }
    let (v, e) = kronrod21(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    loop {
        let target = tol.abs.max(tol.rel * total.abs());
        if total_err <= target {
            break;
        }
        if heap.len() >= tol.max_intervals {
            if !total.is_finite() || total_err > 1e3 * target {
                return Err(Error::Quadrature { estimate: total, error: total_err });
            }
            break;
        }
        let seg = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval cannot be split further at double precision.
            heap.push(Segment { error: 0.0, ..seg });
            total_err = heap.iter().map(|s| s.error).sum();
            if heap.iter().all(|s| s.error == 0.0) {
                break;
            }
            continue;
        }
        let (v1, e1) = kronrod21(&f, seg.a, mid);
        let (v2, e2) = kronrod21(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    if !value.is_finite() {
        return Err(Error::Quadrature { estimate: value, error });
    }
    Ok(Estimate { value, error, intervals: heap.len() })
}

/// Integrates `f` over `[a, ∞)` via the map `x = a + t/(1-t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tolerance) -> Result<Estimate> {
    integrate(
        |t| {
            let s = 1.0 - t;
            let x = a + t / s;
            let v = f(x) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integrates `f` over `[a, b]` with `0 < a < b` on a logarithmic scale,
/// `x = e^u`. Suited to integrands spread over many decades.
pub fn integrate_log<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    debug_assert!(a > 0.0 && b > a);
    integrate(
        |u| {
            let x = u.exp();
            f(x) * x
        },
        a.ln(),
        b.ln(),
        tol,
    )
}

/// Composite 21-point Kronrod rule on `panels` equal sub-intervals. Returned
/// nodes and weights can be reused across many smooth integrands.
pub fn composite_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(panels * 21);
    let width = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let center = lo + 0.5 * width;
        let half = 0.5 * width;
        for j in 0..10 {
            out.push((center - half * XGK[j], half * WGK[j]));
            out.push((center + half * XGK[j], half * WGK[j]));
        }
        out.push((center, half * WGK[10]));
    }
    out
}

/// Runs nested integrations inside an integrand while remembering the first
/// failure, so the outer call can still report it.
#[derive(Default)]
pub struct FailureSlot {
    first: Cell<Option<Error>>,
}

impl FailureSlot {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unwraps a nested result, recording the error and yielding its estimate.
    pub fn take_value(&self, r: Result<Estimate>) -> f64 {
        match r {
            Ok(e) => e.value,
            Err(err) => {
                let est = match &err {
                    Error::Quadrature { estimate, .. } => *estimate,
                    _ => f64::NAN,
                };
                let prev = self.first.take();
                self.first.set(prev.or(Some(err)));
                if est.is_finite() {
                    est
                } else {
                    0.0
                }
            }
        }
    }

    pub fn record(&self, err: Error) {
        let prev = self.first.take();
        self.first.set(prev.or(Some(err)));
    }

    /// Returns `value` unless a nested step failed.
    pub fn finish<T>(self, value: T) -> Result<T> {
        match self.first.into_inner() {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-14);
        assert!((g - 2.0).abs() < 1e-14);
    }

    #[test]
    fn kronrod_exact_for_degree_31() {
        for deg in [0, 5, 19, 30, 31] {
            let (v, _) = kronrod21(&|x: f64| x.powi(deg), 0.0, 1.0);
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        // ∫₀¹ 1/√x = 2
        let e = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, Tolerance::new(1e-10, 1e-10)).unwrap();
        assert!((e.value - 2.0).abs() < 1e-8, "{e:?}");
    }

    #[test]
    fn adaptive_handles_kink() {
        let e = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((e.value - (0.045 + 0.245)).abs() < 1e-12);
    }

    #[test]
    fn semi_infinite_gaussian() {
        let e = integrate_to_infinity(|x| (-x * x).exp(), 0.0, Tolerance::default()).unwrap();
        assert!((e.value - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn log_scale_power_law() {
        // ∫₁^1e6 x^-1.1 dx = 10 (1 - 1e6^-0.1)
        let e = integrate_log(|x: f64| x.powf(-1.1), 1.0, 1e6, Tolerance::default()).unwrap();
        let exact = 10.0 * (1.0 - 1e6f64.powf(-0.1));
        assert!((e.value - exact).abs() < 1e-9);
    }

    #[test]
    fn composite_nodes_integrate_smooth_function() {
        let nodes = composite_nodes(0.0, 3.0, 4);
        let v: f64 = nodes.iter().map(|&(x, w)| w * x.sin()).sum();
        assert!((v - (1.0 - 3f64.cos())).abs() < 1e-14);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let e = integrate(|x| x, 1.0, 0.0, Tolerance::default()).unwrap();
        assert!((e.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_convergence_reports_estimate() {
        let tol = Tolerance::new(0.0, 1e-15).with_max_intervals(3);
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, tol);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
