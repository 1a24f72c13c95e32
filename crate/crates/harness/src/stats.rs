//! Small statistical helpers: running moments, batch means, regression slopes, weighted
//! paired differences, and the two-sample Kolmogorov–Smirnov test.

use gibbsdyn::gibbs::{estimate, Estimate};
use gibbsdyn::Result;

#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    pub count: f64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1.0;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        ((self.sum_sq - self.count * m * m) / (self.count - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count).sqrt()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and batch-means standard error of a correlated series.
pub fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
    let size = xs.len() / batches;
    let mut m = Moments::default();
    for b in 0..batches {
        m.push(mean(&xs[b * size..(b + 1) * size]));
    }
    (mean(&xs[..size * batches]), m.std_error())
}

/// Least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().cloned().zip(y.iter().cloned()).collect();
    gibbsdyn::flow::least_squares_slope(&pts)
}

/// Weighted mean of the paired differences `after − before`, with its standard error.
pub fn paired_difference(log_weights: &[f64], before: &[f64], after: &[f64]) -> Result<Estimate> {
    let d: Vec<f64> = after.iter().zip(before).map(|(a, b)| a - b).collect();
    estimate(log_weights, &d)
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    (d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d))
}

/// Tail `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2j²λ²}` of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
