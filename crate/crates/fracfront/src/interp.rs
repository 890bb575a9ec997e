//! Monotone cubic interpolation (Fritsch-Carlson) with derivative
//! evaluation, used for tabulated profiles that must stay monotone
//! between nodes.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    uniform_step: Option<f64>,
}

impl Pchip {
    /// Build from strictly increasing abscissae. Node slopes follow the
    /// Fritsch-Carlson weighted harmonic mean, which preserves local
    /// monotonicity of the data.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::InvalidParameter(format!(
                "pchip needs matching arrays of at least 2 nodes, got {} and {}",
                n,
                y.len()
            )));
        }
        for i in 1..n {
            if !(x[i] > x[i - 1]) {
                return Err(Error::InvalidParameter(format!(
                    "pchip abscissae must increase strictly, violated at index {i}"
                )));
            }
        }
        let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
        let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut m = vec![0.0; n];
        m[0] = edge_slope(h[0], h.get(1).copied().unwrap_or(h[0]), d[0], d.get(1).copied().unwrap_or(d[0]));
        m[n - 1] = edge_slope(
            h[n - 2],
            if n >= 3 { h[n - 3] } else { h[n - 2] },
            d[n - 2],
            if n >= 3 { d[n - 3] } else { d[n - 2] },
        );
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= 0.0 {
                m[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        let step = h[0];
        let uniform_step = if h.iter().all(|&hi| (hi - step).abs() <= 1e-12 * step) {
            Some(step)
        } else {
            None
        };
        Ok(Pchip { x, y, m, uniform_step })
    }

    fn segment(&self, t: f64) -> usize {
        // clamped lookup: points outside the table use the nearest
        // segment's cubic (callers handle far-field themselves)
        if let Some(step) = self.uniform_step {
            let k = (t - self.x[0]) / step;
            if k <= 0.0 {
                return 0;
            }
            return (k as usize).min(self.x.len() - 2);
        }
        match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.x.len() - 2),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let u = (t - self.x[i]) / h;
        let (h00, h10, h01, h11) = hermite_basis(u);
        h00 * self.y[i] + h10 * h * self.m[i] + h01 * self.y[i + 1] + h11 * h * self.m[i + 1]
    }

    pub fn eval_deriv(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let u = (t - self.x[i]) / h;
        let dh00 = (6.0 * u * u - 6.0 * u) / h;
        let dh10 = 3.0 * u * u - 4.0 * u + 1.0;
        let dh01 = (-6.0 * u * u + 6.0 * u) / h;
        let dh11 = 3.0 * u * u - 2.0 * u;
        dh00 * self.y[i] + dh10 * self.m[i] + dh01 * self.y[i + 1] + dh11 * self.m[i + 1]
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }
}

fn hermite_basis(u: f64) -> (f64, f64, f64, f64) {
    let u2 = u * u;
    let u3 = u2 * u;
    (
        2.0 * u3 - 3.0 * u2 + 1.0,
        u3 - 2.0 * u2 + u,
        -2.0 * u3 + 3.0 * u2,
        u3 - u2,
    )
}

fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    // three-point estimate, clipped to keep the end segment shape-safe
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|&t| (t - 2.0).tanh()).collect();
        let p = Pchip::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((p.eval(*xi) - yi).abs() < 1e-14);
        }
    }

    #[test]
    fn preserves_monotone_data() {
        let x: Vec<f64> = (0..50).map(|i| -5.0 + 0.2 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&t| 0.5 + t.atan() / std::f64::consts::PI).collect();
        let p = Pchip::new(x, y).unwrap();
        let mut prev = p.eval(-5.0);
        let mut t = -5.0 + 1e-3;
        while t < 4.8 {
            let v = p.eval(t);
            assert!(v >= prev - 1e-12, "monotonicity broken at {t}");
            prev = v;
            t += 1e-3;
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let x: Vec<f64> = (0..200).map(|i| -3.0 + 0.03 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&t| (0.7 * t).sin()).collect();
        let p = Pchip::new(x, y).unwrap();
        for &t in &[-2.5, -1.0, 0.31, 1.7, 2.6] {
            let fd = (p.eval(t + 1e-6) - p.eval(t - 1e-6)) / 2e-6;
            assert!((p.eval_deriv(t) - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn interpolation_error_smooth_function() {
        // cubic-order accuracy on a smooth function, h = 0.05
        let x: Vec<f64> = (0..201).map(|i| -5.0 + 0.05 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&t| 0.5 + t.atan() / std::f64::consts::PI).collect();
        let p = Pchip::new(x, y).unwrap();
        let mut worst: f64 = 0.0;
        let mut t: f64 = -4.9;
        while t < 4.9 {
            let exact = 0.5 + t.atan() / std::f64::consts::PI;
            worst = worst.max((p.eval(t) - exact).abs());
            t += 0.0107;
        }
        assert!(worst < 5e-6, "pchip error {worst}");
    }

    #[test]
    fn rejects_unsorted_input() {
        assert!(Pchip::new(vec![0.0, 0.0, 1.0], vec![1.0, 2.0, 3.0]).is_err());
        assert!(Pchip::new(vec![0.0], vec![1.0]).is_err());
    }
}
