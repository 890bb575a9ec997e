//! Quadrature drivers: compensated summation, fixed Gauss-Legendre
//! panels on linear or log-spaced subdivisions, and an adaptive
//! Gauss-Kronrod integrator for one-dimensional integrals.

use crate::error::{Error, Result};
use crate::special::{gauss_legendre, GK15_NODES, GK15_WG, GK15_WK};
use serde::{Deserialize, Serialize};

/// Controls for the singular-integral evaluators. `delta_in` is the
/// inner cutoff radius around the singularity, `z_max` the outer
/// truncation radius, `radial_nodes`/`angular_nodes` the rule sizes per
/// panel, `tol` the target for adaptive refinement.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuadratureSpec {
    pub delta_in: f64,
    pub z_max: f64,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    pub tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            delta_in: 1e-6,
            z_max: 1e3,
            radial_nodes: 32,
            angular_nodes: 32,
            tol: 1e-6,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_in > 0.0 && self.delta_in < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_in must lie in (0, 1), got {}",
                self.delta_in
            )));
        }
        if !(self.z_max > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "z_max must exceed 1, got {}",
                self.z_max
            )));
        }
        if self.radial_nodes < 16 || self.angular_nodes < 16 {
            return Err(Error::InvalidParameter(format!(
                "node counts must be at least 16, got radial={} angular={}",
                self.radial_nodes, self.angular_nodes
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive and finite, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Kahan-Babuska compensated accumulator. Summation order is fixed by
/// the caller, which keeps parallel and sequential runs bit-identical
/// when both reduce in index order.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        KahanSum { sum: 0.0, comp: 0.0 }
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum a slice in index order with compensation.
pub fn kahan_total(xs: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Gauss-Legendre panel rule: `panels` equal subintervals of [a, b],
/// `nodes` points each. Returns abscissae and weights.
pub fn panel_rule_linear(a: f64, b: f64, panels: usize, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(nodes);
    let mut xs = Vec::with_capacity(panels * nodes);
    let mut ws = Vec::with_capacity(panels * nodes);
    let h = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (&t, &w) in gx.iter().zip(&gw) {
            xs.push(mid + 0.5 * h * t);
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Panels spaced geometrically between a and b (both positive), which
/// resolves integrands with power-law behaviour near a.
pub fn panel_rule_log(a: f64, b: f64, panels: usize, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(a > 0.0 && b > a);
    let (gx, gw) = gauss_legendre(nodes);
    let ratio = (b / a).powf(1.0 / panels as f64);
    let mut xs = Vec::with_capacity(panels * nodes);
    let mut ws = Vec::with_capacity(panels * nodes);
    let mut lo = a;
    for _ in 0..panels {
        let hi = lo * ratio;
        let mid = 0.5 * (lo + hi);
        let h = hi - lo;
        for (&t, &w) in gx.iter().zip(&gw) {
            xs.push(mid + 0.5 * h * t);
            ws.push(0.5 * h * w);
        }
        lo = hi;
    }
    (xs, ws)
}

fn gk15_panel(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut ik = KahanSum::new();
    let mut ig = KahanSum::new();
    for i in 0..15 {
        let v = f(mid + half * GK15_NODES[i]);
        ik.add(GK15_WK[i] * v);
        ig.add(GK15_WG[i] * v);
    }
    let ik = half * ik.value();
    let ig = half * ig.value();
    ((ik), (ik - ig).abs())
}

/// Adaptive Gauss-Kronrod integration of f over [a, b]. Splits the
/// worst panel until the summed error estimate drops below
/// max(abs_tol, rel_tol * |integral|) or the panel budget is exhausted.
/// Returns (value, error_estimate).
pub fn integrate_adaptive(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<(f64, f64)> {
    // (neg error, a, b, value) in a vec kept sorted by error
    let (v0, e0) = gk15_panel(&mut f, a, b);
    let mut panels: Vec<(f64, f64, f64, f64)> = vec![(e0, a, b, v0)];
    loop {
        let total: f64 = kahan_total(&panels.iter().map(|p| p.3).collect::<Vec<_>>());
        let err: f64 = panels.iter().map(|p| p.0).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok((total, err));
        }
        if panels.len() >= max_panels {
            return Err(Error::UnderResolved(format!(
                "adaptive quadrature stalled at {} panels, err {:.3e} > tol {:.3e}",
                panels.len(),
                err,
                abs_tol.max(rel_tol * total.abs())
            )));
        }
        // split the panel with the largest error estimate
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
            .unwrap();
        let (_, pa, pb, _) = panels.swap_remove(idx);
        let pm = 0.5 * (pa + pb);
        let (vl, el) = gk15_panel(&mut f, pa, pm);
        let (vr, er) = gk15_panel(&mut f, pm, pb);
        panels.push((el, pa, pm, vl));
        panels.push((er, pm, pb, vr));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spec_defaults_validate() {
        QuadratureSpec::default().validate().unwrap();
    }

    #[test]
    fn spec_rejects_bad_fields() {
        let mut q = QuadratureSpec::default();
        q.delta_in = 1.5;
        assert!(q.validate().is_err());
        let mut q = QuadratureSpec::default();
        q.z_max = 0.5;
        assert!(q.validate().is_err());
        let mut q = QuadratureSpec::default();
        q.radial_nodes = 8;
        assert!(q.validate().is_err());
        let mut q = QuadratureSpec::default();
        q.tol = -1.0;
        assert!(q.validate().is_err());
    }

    #[test]
    fn kahan_beats_naive_on_cancellation() {
        // sum 1 + 1e-16 repeated; naive summation loses the small terms
        let mut acc = KahanSum::new();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-16);
        }
        assert!((acc.value() - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn linear_panels_integrate_smooth() {
        let (xs, ws) = panel_rule_linear(0.0, PI, 8, 16);
        let s: f64 = xs.iter().zip(&ws).map(|(&x, &w)| w * x.sin()).sum();
        assert!((s - 2.0).abs() < 1e-13);
    }

    #[test]
    fn log_panels_resolve_power_law() {
        // int_{1e-6}^{1} x^{-1/2} dx = 2 (1 - 1e-3)
        let (xs, ws) = panel_rule_log(1e-6, 1.0, 24, 16);
        let s: f64 = xs.iter().zip(&ws).map(|(&x, &w)| w / x.sqrt()).sum();
        let exact = 2.0 * (1.0 - 1e-3);
        assert!((s - exact).abs() < 1e-12);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        // int_-1^1 1/(x^2 + 1e-4) dx = 2 atan(100) / 1e-2
        let f = |x: f64| 1.0 / (x * x + 1e-4);
        let (v, e) = integrate_adaptive(f, -1.0, 1.0, 1e-10, 1e-12, 2000).unwrap();
        let exact = 2.0 * 100f64.atan() / 1e-2;
        assert!((v - exact).abs() < 1e-8);
        assert!(e < 1e-7);
    }

    #[test]
    fn adaptive_reports_budget_exhaustion() {
        // integrable singularity right at an endpoint with a tiny budget
        let f = |x: f64| (x - 1e-9).abs().powf(-0.9);
        let r = integrate_adaptive(f, 0.0, 1.0, 1e-14, 1e-14, 4);
        assert!(matches!(r, Err(Error::UnderResolved(_))));
    }
}
