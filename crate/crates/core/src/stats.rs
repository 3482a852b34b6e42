//! Small statistics helpers shared by the simulator and the test oracles.

use serde::{Deserialize, Serialize};

/// A point estimate with a symmetric 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub half_width: f64,
}

impl Interval {
    pub fn lo(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo() <= other.hi() && other.lo() <= self.hi()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// 97.5% Student-t quantile; exact table for small dof, normal beyond.
fn t975(dof: usize) -> f64 {
    const T: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
        2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
        2.052, 2.048, 2.045, 2.042,
    ];
    match dof {
        0 => f64::INFINITY,
        d if d <= 30 => T[d - 1],
        _ => 1.96,
    }
}

/// Confidence interval from independent replicate means.
pub fn replicate_interval(xs: &[f64]) -> Interval {
    let n = xs.len();
    let hw = if n < 2 { f64::INFINITY } else { t975(n - 1) * (variance(xs) / n as f64).sqrt() };
    Interval { mean: mean(xs), half_width: hw }
}

/// Splits `xs` into `batches` contiguous batches and builds the interval
/// from the batch means.
pub fn batch_means(xs: &[f64], batches: usize) -> Interval {
    let batches = batches.max(2).min(xs.len().max(1));
    let size = xs.len() / batches;
    if size == 0 {
        return Interval { mean: mean(xs), half_width: f64::INFINITY };
    }
    let means: Vec<f64> = (0..batches).map(|b| mean(&xs[b * size..(b + 1) * size])).collect();
    let hw = replicate_interval(&means).half_width;
    Interval { mean: mean(xs), half_width: hw }
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Total-variation distance between two PMFs on a common support.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|i| (get(p, i) - get(q, i)).abs()).sum::<f64>()
}

/// Normalized histogram of nonnegative integer counts.
pub fn histogram(counts: &[usize]) -> Vec<f64> {
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut h = vec![0.0; max + 1];
    for &c in counts {
        h[c] += 1.0;
    }
    let n = counts.len().max(1) as f64;
    h.iter_mut().for_each(|x| *x /= n);
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_uniform_grid_is_small() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!((ks_distance(&xs, |x| x) - 0.0005).abs() < 1e-12);
    }

    #[test]
    fn tv_bounds() {
        assert_eq!(tv_distance(&[1.0], &[0.0, 1.0]), 1.0);
        assert_eq!(tv_distance(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
    }

    #[test]
    fn batch_interval_contains_mean() {
        let xs: Vec<f64> = (0..400).map(|i| (i % 7) as f64).collect();
        let iv = batch_means(&xs, 20);
        assert!(iv.half_width.is_finite());
        assert!(iv.lo() <= 3.0 && iv.hi() >= 2.9);
        assert_eq!(histogram(&[0, 2, 2]), vec![1.0 / 3.0, 0.0, 2.0 / 3.0]);
    }
}
