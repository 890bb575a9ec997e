//! Explicit evolution of a 2-D phase field under the rescaled nonlocal
//! Allen-Cahn flow
//!
//!     du/dt = (eps^{2s} I u - C_{2,s} W'(u)) / (eps eta_eps),
//!
//! with I the kernel operator normalized as -(-Delta)^s / c*_{2,s}. The
//! operator is applied spectrally on a window grid padded to twice its
//! side length; the padding ring is filled once with the far-field tail
//! of the initial data, so the window sees the correct plateau feed
//! instead of a value cliff at its edge.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::aeps::eta_eps;
use crate::error::{Error, Result};
use crate::exec::{self, Mode};
use crate::fft::{apply_multiplier_1d, fft_freq, Fft2};
use crate::geometry::Surface;
use crate::nonlocal::constant_cns;
use crate::phase_field::{PhaseTransition, Potential};
use crate::special::gamma;

/// Length of the auxiliary 1-D grid used to precompute the operator
/// image of a flat background profile.
const FLAT_GRID: usize = 1 << 21;

/// Largest deviation from the background allowed on the window edge.
/// The profile tails are algebraic, so a front a couple of units from
/// the boundary still leaves ~1e-2 there; beyond this bound the window
/// is too small for the far-field closure to make sense.
const EDGE_TOL: f64 = 0.05;

/// Safety factor on the measured-norm step bound.
const DT_MEASURED_SAFETY: f64 = 0.2;

/// Safety factor on the linearized spectral step bound.
const DT_SPECTRAL_SAFETY: f64 = 0.9;

/// Uniform square grid on [-extent, extent]^2 with `nodes` points per
/// side, inclusive of both endpoints.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub nodes: usize,
    pub extent: f64,
}

impl GridSpec {
    pub fn new(nodes: usize, extent: f64) -> Result<GridSpec> {
        if nodes < 16 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 16 nodes per side, got {nodes}"
            )));
        }
        if !extent.is_finite() || extent <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "grid extent {extent} must be positive"
            )));
        }
        Ok(GridSpec { nodes, extent })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.nodes - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.spacing()
    }
}

/// Fractional Laplacian normalization c*_{n,s} in
/// (-Delta)^s = -c*_{n,s} I_n^s, equal to
/// 4^s Gamma(n/2 + s) s / (pi^{n/2} Gamma(1 - s)).
fn c_star(n: usize, s: f64) -> f64 {
    4.0_f64.powf(s) * gamma(n as f64 / 2.0 + s) * s
        / (PI.powf(n as f64 / 2.0) * gamma(1.0 - s))
}

/// Band-limited lattice realization of I on the padded grid. With the
/// window centered in a grid of twice its side length, a weight at lag
/// j and its periodic alias cannot both touch window nodes, so the
/// periodic convolution is exact for the padded field.
struct Operator2 {
    nodes: usize,
    padded: usize,
    /// Row/column offset of the window block inside the padded grid.
    offset: usize,
    fft: Fft2,
    symbol: Vec<f64>,
    /// Sup of |symbol|, attained at the corner Nyquist mode.
    symbol_max: f64,
}

impl Operator2 {
    fn new(grid: &GridSpec, s: f64) -> Operator2 {
        let nodes = grid.nodes;
        let padded = 2 * nodes;
        let offset = (padded - nodes) / 2;
        let h = grid.spacing();
        let cs = c_star(2, s);
        let scale = 2.0 * PI / (padded as f64 * h);
        let freqs = fft_freq(padded);
        let mut symbol = vec![0.0; padded * padded];
        let mut symbol_max = 0.0_f64;
        for (bi, &fi) in freqs.iter().enumerate() {
            for (bj, &fj) in freqs.iter().enumerate() {
                let k2 = (fi * scale) * (fi * scale) + (fj * scale) * (fj * scale);
                let v = -k2.powf(s) / cs;
                symbol[bi * padded + bj] = v;
                symbol_max = symbol_max.max(v.abs());
            }
        }
        Operator2 {
            nodes,
            padded,
            offset,
            fft: Fft2::new(padded),
            symbol,
            symbol_max,
        }
    }

    /// Operator image of a full padded field, cropped to the window.
    fn image(&self, padded_field: &[f64]) -> Vec<f64> {
        let n = self.nodes;
        let m = self.padded;
        let q = self.offset;
        let out = self.fft.apply_symbol(padded_field, &self.symbol);
        let mut img = vec![0.0; n * n];
        for r in 0..n {
            img[r * n..(r + 1) * n].copy_from_slice(&out[(r + q) * m + q..(r + q) * m + q + n]);
        }
        img
    }

    /// Apply to a window field read as zero outside the window.
    fn apply(&self, window: &[f64]) -> Vec<f64> {
        let n = self.nodes;
        let m = self.padded;
        let q = self.offset;
        let mut field = vec![0.0; m * m];
        for r in 0..n {
            field[(r + q) * m + q..(r + q) * m + q + n]
                .copy_from_slice(&window[r * n..(r + 1) * n]);
        }
        self.image(&field)
    }
}

/// Static far field the window values are measured against. The flat
/// variant stores the background line along one axis together with its
/// operator image, computed once on a long auxiliary grid.
#[derive(Clone)]
enum Background {
    Zero,
    Flat {
        axis: usize,
        line: Vec<f64>,
        image_line: Vec<f64>,
    },
}

impl Background {
    fn at(&self, n: usize, idx: usize) -> f64 {
        match self {
            Background::Zero => 0.0,
            Background::Flat { axis, line, .. } => {
                line[if *axis == 0 { idx % n } else { idx / n }]
            }
        }
    }
}

/// Discrete front state: window values plus the static background they
/// decay to, with the physical parameters of the flow.
#[derive(Clone)]
pub struct FrontField {
    pub grid: GridSpec,
    /// Node values, row-major with x varying fastest.
    pub values: Vec<f64>,
    pub time: f64,
    pub s: f64,
    pub eps: f64,
    pub eta: f64,
    /// Nodes pushed back into [0, 1] after an update. Stays zero in a
    /// healthy run.
    pub clamp_events: u64,
    potential: Potential,
    /// Dimensional reduction constant C_{2,s} scaling the reaction.
    cns: f64,
    background: Background,
    /// Operator image of the fixed tail extension on the padding ring;
    /// empty when the extension vanishes there.
    ring_image: Vec<f64>,
    op: Arc<Operator2>,
}

/// Identify the axis of an axis-aligned unit normal.
fn aligned_axis(normal: &[f64]) -> Result<(usize, f64)> {
    let mut axis = None;
    for (i, &c) in normal.iter().enumerate() {
        if c.abs() > 1e-12 {
            if axis.is_some() {
                return Err(Error::InvalidParameter(
                    "background split needs an axis-aligned front plane".into(),
                ));
            }
            axis = Some((i, c.signum()));
        }
    }
    axis.ok_or_else(|| Error::InvalidParameter("hyperplane normal is zero".into()))
}

/// Operator image of the 1-D background profile phi((sign c - b)/eps)
/// along one coordinate, sampled on the window line. The profile is
/// continued periodically as a tent wave so the auxiliary grid has no
/// jump at the wrap seam; the compensating mirror front sits a quarter
/// million interface widths away and contributes below 1e-5.
fn flat_image_line(
    pt: &PhaseTransition,
    eps: f64,
    grid: &GridSpec,
    sign: f64,
    offset: f64,
    cs2: f64,
) -> Vec<f64> {
    let n = grid.nodes;
    let h = grid.spacing();
    let period = FLAT_GRID as f64 * h;
    let j0 = (FLAT_GRID - n) / 2;
    let c0 = grid.coord(0);
    let front = sign * offset;
    let s = pt.s;
    let line = exec::map_range(Mode::auto(), FLAT_GRID, |j| {
        let t = c0 + (j as f64 - j0 as f64) * h - front;
        let tent = ((t - 0.25 * period).rem_euclid(period) - 0.5 * period).abs() - 0.25 * period;
        pt.eval_phi(sign * tent / eps)
    });
    let scale = 2.0 * PI / period;
    let mult: Vec<f64> = fft_freq(FLAT_GRID)
        .iter()
        .map(|&f| -(f * scale).abs().powf(2.0 * s) / cs2)
        .collect();
    let img = apply_multiplier_1d(&line, &mult);
    img[j0..j0 + n].to_vec()
}

/// Build the initial field u = phi(d(x)/eps) for a front surface. The
/// background split is chosen by surface kind: hyperplanes and graphs
/// flatten to a 1-D profile line, spheres to the zero plateau.
pub fn init_front(
    surface: &Surface,
    pt: &PhaseTransition,
    eps: f64,
    grid: GridSpec,
) -> Result<FrontField> {
    if surface.dim() != 2 {
        return Err(Error::InvalidParameter(format!(
            "front evolution runs on a 2-d grid, surface has dimension {}",
            surface.dim()
        )));
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "interface width {eps} must be positive"
        )));
    }
    let h = grid.spacing();
    if eps < 2.0 * h {
        return Err(Error::UnderResolved(format!(
            "interface width {eps} is under two grid spacings {h:.4e}"
        )));
    }
    let s = pt.s;
    let eta = eta_eps(s, eps)?;
    let cns = constant_cns(2, s)?;
    let cs2 = c_star(2, s);
    let n = grid.nodes;

    let flat: Option<(usize, f64, f64)> = match surface {
        Surface::Hyperplane { normal, offset } => {
            let (axis, sign) = aligned_axis(normal)?;
            Some((axis, sign, *offset))
        }
        Surface::Graph { .. } => Some((1, 1.0, 0.0)),
        Surface::Sphere { .. } => None,
        Surface::Cylinder { .. } => {
            return Err(Error::InvalidParameter(
                "cylinder fronts are 3-d; use a sphere or graph section".into(),
            ));
        }
    };

    let values = exec::map_range(Mode::auto(), n * n, |idx| {
        let x = grid.coord(idx % n);
        let y = grid.coord(idx / n);
        pt.eval_phi(surface.distance(&[x, y]) / eps)
    });

    let background = match flat {
        Some((axis, sign, offset)) => {
            let line: Vec<f64> = (0..n)
                .map(|i| pt.eval_phi((sign * grid.coord(i) - offset) / eps))
                .collect();
            let image_line = flat_image_line(pt, eps, &grid, sign, offset, cs2);
            Background::Flat {
                axis,
                line,
                image_line,
            }
        }
        None => Background::Zero,
    };

    let mut edge_dev = 0.0_f64;
    for iy in 0..n {
        for ix in 0..n {
            if ix != 0 && ix != n - 1 && iy != 0 && iy != n - 1 {
                continue;
            }
            let idx = iy * n + ix;
            edge_dev = edge_dev.max((values[idx] - background.at(n, idx)).abs());
        }
    }
    if edge_dev > EDGE_TOL {
        return Err(Error::InvalidParameter(format!(
            "front does not flatten inside the window: boundary deviation \
             {edge_dev:.3e} exceeds {EDGE_TOL}; enlarge the window"
        )));
    }

    let op = Arc::new(Operator2::new(&grid, s));

    // The pure hyperplane deviates from its background by exactly zero,
    // so only curved surfaces need the tail ring.
    let needs_ring = !matches!(surface, Surface::Hyperplane { .. });
    let ring_image = if needs_ring {
        let m = op.padded;
        let q = op.offset;
        let c0 = grid.coord(0);
        let ring = exec::map_range(Mode::auto(), m * m, |idx| {
            let r = idx / m;
            let c = idx % m;
            if r >= q && r < q + n && c >= q && c < q + n {
                return 0.0;
            }
            let x = c0 + (c as f64 - q as f64) * h;
            let y = c0 + (r as f64 - q as f64) * h;
            let u = pt.eval_phi(surface.distance(&[x, y]) / eps);
            match flat {
                None => u,
                Some((axis, sign, offset)) => {
                    let bc = if axis == 0 { x } else { y };
                    u - pt.eval_phi((sign * bc - offset) / eps)
                }
            }
        });
        op.image(&ring)
    } else {
        Vec::new()
    };

    Ok(FrontField {
        grid,
        values,
        time: 0.0,
        s,
        eps,
        eta,
        clamp_events: 0,
        potential: pt.potential,
        cns,
        background,
        ring_image,
        op,
    })
}

/// Best-fit circle through the extracted level set.
#[derive(Clone, Debug)]
pub struct CircleFit {
    pub center: [f64; 2],
    pub radius: f64,
    /// Max |distance to center - radius| over the points, relative to
    /// the radius.
    pub circularity: f64,
}

/// Level-set crossing points, with a circle fit when one is sensible.
#[derive(Clone, Debug)]
pub struct FrontCurve {
    pub points: Vec<[f64; 2]>,
    pub circle: Option<CircleFit>,
}

/// Algebraic least-squares circle through the points. Returns None for
/// degenerate clouds (too few points, collinear, or a fit radius far
/// outside the window).
fn fit_circle(points: &[[f64; 2]], extent: f64) -> Option<CircleFit> {
    if points.len() < 8 {
        return None;
    }
    let mut m = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for p in points {
        let (x, y) = (p[0], p[1]);
        let q = x * x + y * y;
        m[(0, 0)] += x * x;
        m[(0, 1)] += x * y;
        m[(0, 2)] += x;
        m[(1, 1)] += y * y;
        m[(1, 2)] += y;
        m[(2, 2)] += 1.0;
        rhs[0] += q * x;
        rhs[1] += q * y;
        rhs[2] += q;
    }
    m[(1, 0)] = m[(0, 1)];
    m[(2, 0)] = m[(0, 2)];
    m[(2, 1)] = m[(1, 2)];
    let sol = m.lu().solve(&rhs)?;
    let center = [sol[0] / 2.0, sol[1] / 2.0];
    let r2 = sol[2] + center[0] * center[0] + center[1] * center[1];
    if !(r2 > 0.0) {
        return None;
    }
    let radius = r2.sqrt();
    if !radius.is_finite() || radius > 10.0 * extent {
        return None;
    }
    let mut worst = 0.0_f64;
    for p in points {
        let d = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
        worst = worst.max((d - radius).abs());
    }
    Some(CircleFit {
        center,
        radius,
        circularity: worst / radius,
    })
}

impl FrontField {
    /// I u on the window: padded spectral image of the deviation from
    /// the background, plus the precomputed background and tail-ring
    /// images.
    fn diffusion(&self) -> Vec<f64> {
        let n = self.grid.nodes;
        let mut img = match &self.background {
            Background::Zero => self.op.apply(&self.values),
            Background::Flat {
                axis,
                line,
                image_line,
            } => {
                let a = *axis;
                let v = exec::map_range(Mode::auto(), n * n, |idx| {
                    self.values[idx] - line[if a == 0 { idx % n } else { idx / n }]
                });
                let mut img = self.op.apply(&v);
                for (idx, o) in img.iter_mut().enumerate() {
                    *o += image_line[if a == 0 { idx % n } else { idx / n }];
                }
                img
            }
        };
        if !self.ring_image.is_empty() {
            for (o, r) in img.iter_mut().zip(&self.ring_image) {
                *o += r;
            }
        }
        img
    }

    /// Right-hand side du/dt at the current state.
    pub fn rhs(&self) -> Vec<f64> {
        let img = self.diffusion();
        let e2s = self.eps.powf(2.0 * self.s);
        let inv = 1.0 / (self.eps * self.eta);
        exec::map_range(Mode::auto(), self.values.len(), |idx| {
            inv * (e2s * img[idx] - self.cns * self.potential.w_prime(self.values[idx]))
        })
    }

    /// Step size from the measured operator norm on the current state,
    /// hard-limited by the linearized spectral bound
    /// 2 eps eta / (eps^{2s} sup|symbol| + C_{2,s} sup|W''|).
    pub fn stable_dt(&self) -> f64 {
        let img = self.diffusion();
        let lam = img.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        let h = self.grid.spacing();
        let e2s = self.eps.powf(2.0 * self.s);
        let mut w2 = 0.0_f64;
        for j in 0..=1200 {
            let u = -0.1 + 1.2 * j as f64 / 1200.0;
            w2 = w2.max(self.potential.w_second(u).abs());
        }
        let hard = DT_SPECTRAL_SAFETY * 2.0 * self.eps * self.eta
            / (e2s * self.op.symbol_max + self.cns * w2);
        let measured = if lam > 0.0 {
            DT_MEASURED_SAFETY * self.eps * self.eta * h.powf(2.0 * self.s).min(1.0) / (e2s * lam)
        } else {
            f64::INFINITY
        };
        measured.min(hard)
    }

    /// One explicit Euler step. Counts nodes pushed back into [0, 1]
    /// and fails if any value escapes [-0.1, 1.1].
    pub fn step(&self, dt: f64) -> Result<FrontField> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "step size {dt} must be positive and finite"
            )));
        }
        let n = self.grid.nodes;
        let img = self.diffusion();
        let gain = dt / (self.eps * self.eta);
        let e2s = self.eps.powf(2.0 * self.s);
        let rows: Vec<(Vec<f64>, u64, Option<f64>)> = exec::map_range(Mode::auto(), n, |iy| {
            let mut row = Vec::with_capacity(n);
            let mut clamps = 0_u64;
            let mut escaped = None;
            for ix in 0..n {
                let idx = iy * n + ix;
                let u = self.values[idx];
                let mut w = u + gain * (e2s * img[idx] - self.cns * self.potential.w_prime(u));
                if !(-0.1..=1.1).contains(&w) && escaped.is_none() {
                    escaped = Some(w);
                }
                if w < 0.0 {
                    w = 0.0;
                    clamps += 1;
                } else if w > 1.0 {
                    w = 1.0;
                    clamps += 1;
                }
                row.push(w);
            }
            (row, clamps, escaped)
        });
        let mut values = Vec::with_capacity(n * n);
        let mut clamps = self.clamp_events;
        for (row, c, escaped) in rows {
            if let Some(value) = escaped {
                return Err(Error::Unstable {
                    t: self.time,
                    value,
                });
            }
            clamps += c;
            values.extend_from_slice(&row);
        }
        let mut next = self.clone();
        next.values = values;
        next.time += dt;
        next.clamp_events = clamps;
        Ok(next)
    }

    /// Level-set crossings of u = level on grid edges, by linear
    /// interpolation, with a least-squares circle fit when the point
    /// cloud supports one.
    pub fn extract_front(&self, level: f64) -> Result<FrontCurve> {
        if !(0.0 < level && level < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "level {level} must lie strictly between 0 and 1"
            )));
        }
        let n = self.grid.nodes;
        let h = self.grid.spacing();
        let mut points = Vec::new();
        for iy in 0..n {
            for ix in 0..n {
                let a = self.values[iy * n + ix] - level;
                if ix + 1 < n {
                    let b = self.values[iy * n + ix + 1] - level;
                    if a * b < 0.0 {
                        let t = a / (a - b);
                        points.push([self.grid.coord(ix) + t * h, self.grid.coord(iy)]);
                    }
                }
                if iy + 1 < n {
                    let b = self.values[(iy + 1) * n + ix] - level;
                    if a * b < 0.0 {
                        let t = a / (a - b);
                        points.push([self.grid.coord(ix), self.grid.coord(iy) + t * h]);
                    }
                }
            }
        }
        if points.is_empty() {
            return Err(Error::NoFront);
        }
        let circle = fit_circle(&points, self.grid.extent);
        Ok(FrontCurve { points, circle })
    }

    /// Node values as CSV with fixed column order x,y,u.
    pub fn snapshot_csv(&self) -> String {
        let n = self.grid.nodes;
        let mut out = String::with_capacity(n * n * 60 + 8);
        out.push_str("x,y,u\n");
        for iy in 0..n {
            for ix in 0..n {
                out.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e}\n",
                    self.grid.coord(ix),
                    self.grid.coord(iy),
                    self.values[iy * n + ix]
                ));
            }
        }
        out
    }
}
