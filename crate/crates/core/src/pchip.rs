//! Monotone piecewise cubic Hermite interpolation (Fritsch-Carlson slopes
//! with the harmonic-mean rule), constant outside the node range.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, floor};

#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
    /// `(start, step)` when the nodes are an arithmetic sequence.
    uniform: Option<(f64, f64)>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::InvalidParameter("pchip needs matching, non-empty node lists".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("pchip nodes must be strictly ascending".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("pchip values must be finite".into()));
        }
        let slopes = slopes(&x, &y);
        let uniform = detect_uniform(&x);
        Ok(Pchip { x, y, slopes, uniform })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.interval(t);
        let (x0, x1) = (self.x[k], self.x[k + 1]);
        if t == x0 {
            return self.y[k];
        }
        let h = x1 - x0;
        let s = (t - x0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.slopes[k] + h01 * self.y[k + 1] + h11 * h * self.slopes[k + 1]
    }

    /// Index `k` with `x[k] <= t < x[k+1]`, for `t` strictly inside the range.
    fn interval(&self, t: f64) -> usize {
        let last = self.x.len() - 2;
        if let Some((start, step)) = self.uniform {
            let guess = (floor((t - start) / step).max(0.0) as usize).min(last);
            // nodes are computed, not accumulated, so at most one step off
            let mut k = guess;
            if self.x[k] > t && k > 0 {
                k -= 1;
            } else if k < last && self.x[k + 1] <= t {
                k += 1;
            }
            return k;
        }
        match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(last),
            Err(i) => (i - 1).min(last),
        }
    }
}

fn detect_uniform(x: &[f64]) -> Option<(f64, f64)> {
    if x.len() < 3 {
        return None;
    }
    let n = x.len() - 1;
    let step = (x[n] - x[0]) / n as f64;
    let ok = x
        .iter()
        .enumerate()
        .all(|(i, &v)| abs(v - (x[0] + i as f64 * step)) <= 1e-9 * step);
    ok.then_some((x[0], step))
}

fn slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return alloc::vec![0.0];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return alloc::vec![delta[0], delta[0]];
    }
    let mut d = alloc::vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// Shape-preserving three-point end slope.
fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() || m0 == 0.0 {
        0.0
    } else if m0.signum() != m1.signum() && abs(d) > abs(3.0 * m0) {
        3.0 * m0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn exact_at_nodes_and_constant_outside() {
        let x: Vec<f64> = (0..11).map(|i| -1.0 + i as f64 * 0.2).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let p = Pchip::new(x.clone(), y.clone()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(p.eval(*a), *b);
        }
        assert_eq!(p.eval(5.0), y[10]);
        assert_eq!(p.eval(-5.0), y[0]);
    }

    #[test]
    fn matches_reference_values() {
        let p = Pchip::new(vec![0.0, 1.0, 3.0, 4.0], vec![0.0, 1.0, 1.5, 4.0]).unwrap();
        let expected_slopes = [1.25, 3.0 / 7.0, 0.5, 3.25];
        for (d, e) in p.slopes.iter().zip(expected_slopes) {
            assert!((d - e).abs() < 1e-14);
        }
        assert!((p.eval(0.5) - 0.602_678_571_428_571_4).abs() < 1e-14);
        assert!((p.eval(2.0) - 1.232_142_857_142_857_2).abs() < 1e-14);
        assert!((p.eval(3.5) - 2.406_25).abs() < 1e-14);
    }

    #[test]
    fn flat_segments_stay_flat() {
        let p = Pchip::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 2.0, 2.0, 3.0]).unwrap();
        for i in 0..=100 {
            let t = 1.0 + i as f64 / 100.0;
            assert_eq!(p.eval(t), 2.0);
        }
    }

    #[test]
    fn uniform_and_binary_search_agree() {
        let x: Vec<f64> = (0..401).map(|i| -2.0 + i as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().map(|v| libm::sin(3.0 * v)).collect();
        let fast = Pchip::new(x.clone(), y.clone()).unwrap();
        assert!(fast.uniform.is_some());
        let mut slow = fast.clone();
        slow.uniform = None;
        for i in 0..1000 {
            let t = -2.1 + i as f64 * 0.0042;
            assert_eq!(fast.eval(t), slow.eval(t));
        }
    }
}
