//! Analytic signed-distance surfaces. Sphere, hyperplane, and cylinder
//! carry closed-form distance and second-order data; graph surfaces get
//! distance from Newton projection and derivatives from central
//! differences. Sign convention: d > 0 inside the enclosed region
//! (inside the ball, above the graph), and |grad d| = 1 in the tube.

use crate::error::{Error, Result};
use crate::quad::QuadratureSpec;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Validity radius assigned to hyperplanes in place of +infinity.
pub const HYPERPLANE_RHO_CAP: f64 = 1e6;

pub type GraphFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Surface {
    /// Ball boundary, d(x) = radius - |x - center|.
    Sphere { center: Vec<f64>, radius: f64 },
    /// d(x) = normal . x - offset, |normal| = 1.
    Hyperplane { normal: Vec<f64>, offset: f64 },
    /// Axis along the last coordinate, d(x) = radius - |x'| with x' the
    /// first n-1 coordinates.
    Cylinder { radius: f64, dim: usize },
    /// Height field x_n = g(x'), region above the graph, distance by
    /// projection. `rho` is supplied by the caller since the curvature
    /// of the closure is not inspectable.
    Graph { dim: usize, g: GraphFn, rho: f64 },
}

impl std::fmt::Debug for Surface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Surface::Sphere { center, radius } => f
                .debug_struct("Sphere")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            Surface::Hyperplane { normal, offset } => f
                .debug_struct("Hyperplane")
                .field("normal", normal)
                .field("offset", offset)
                .finish(),
            Surface::Cylinder { radius, dim } => f
                .debug_struct("Cylinder")
                .field("radius", radius)
                .field("dim", dim)
                .finish(),
            Surface::Graph { dim, rho, .. } => f
                .debug_struct("Graph")
                .field("dim", dim)
                .field("rho", rho)
                .finish(),
        }
    }
}

/// Signed distance with its first and second derivatives at one point.
#[derive(Debug, Clone)]
pub struct DifferentialData {
    pub d: f64,
    pub grad: Vec<f64>,
    pub hessian: DMatrix<f64>,
    pub laplacian: f64,
    /// Eigenvalues of the Hessian with the gradient direction last, so
    /// the final entry is 0.
    pub eigenvalues: Vec<f64>,
    /// Orthogonal matrix whose last column is the gradient.
    pub eigenbasis: DMatrix<f64>,
}

impl Surface {
    pub fn sphere(center: Vec<f64>, radius: f64) -> Result<Surface> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        if center.is_empty() {
            return Err(Error::InvalidParameter("sphere center is empty".into()));
        }
        Ok(Surface::Sphere { center, radius })
    }

    pub fn hyperplane(normal: Vec<f64>, offset: f64) -> Result<Surface> {
        let norm = norm(&normal);
        if norm < 1e-12 {
            return Err(Error::InvalidParameter("hyperplane normal is zero".into()));
        }
        let normal = normal.iter().map(|v| v / norm).collect();
        Ok(Surface::Hyperplane { normal, offset })
    }

    pub fn cylinder(radius: f64, dim: usize) -> Result<Surface> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cylinder radius must be positive, got {radius}"
            )));
        }
        if dim < 2 {
            return Err(Error::InvalidParameter(
                "cylinder needs dimension at least 2".into(),
            ));
        }
        Ok(Surface::Cylinder { radius, dim })
    }

    pub fn graph(dim: usize, g: GraphFn, rho: f64) -> Result<Surface> {
        if dim < 2 {
            return Err(Error::InvalidParameter(
                "graph surface needs dimension at least 2".into(),
            ));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "graph surface needs a positive finite rho, got {rho}"
            )));
        }
        Ok(Surface::Graph { dim, g, rho })
    }

    pub fn dim(&self) -> usize {
        match self {
            Surface::Sphere { center, .. } => center.len(),
            Surface::Hyperplane { normal, .. } => normal.len(),
            Surface::Cylinder { dim, .. } => *dim,
            Surface::Graph { dim, .. } => *dim,
        }
    }

    /// Validity radius of the tubular neighborhood, half the minimal
    /// curvature radius for the curved closed forms.
    pub fn rho(&self) -> f64 {
        match self {
            Surface::Sphere { radius, .. } => radius / 2.0,
            Surface::Hyperplane { .. } => HYPERPLANE_RHO_CAP,
            Surface::Cylinder { radius, .. } => radius / 2.0,
            Surface::Graph { rho, .. } => *rho,
        }
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            Surface::Sphere { center, radius } => {
                let r = dist(x, center);
                radius - r
            }
            Surface::Hyperplane { normal, offset } => dot(normal, x) - offset,
            Surface::Cylinder { radius, .. } => {
                let rp = norm(&x[..x.len() - 1]);
                radius - rp
            }
            Surface::Graph { g, .. } => {
                let (foot, _) = self.project_to_graph(x, g);
                let n = x.len();
                let mut dd = 0.0;
                for i in 0..n - 1 {
                    dd += (x[i] - foot[i]) * (x[i] - foot[i]);
                }
                let gy = g(&foot);
                dd += (x[n - 1] - gy) * (x[n - 1] - gy);
                let sign = if x[n - 1] >= g(&x[..n - 1]) { 1.0 } else { -1.0 };
                sign * dd.sqrt()
            }
        }
    }

    /// Newton projection of x onto the graph; returns the foot's base
    /// coordinates and the iteration count.
    fn project_to_graph(&self, x: &[f64], g: &GraphFn) -> (Vec<f64>, usize) {
        let n = x.len();
        let m = n - 1;
        let rho = self.rho();
        let h = 1e-5 * rho;
        let mut y: Vec<f64> = x[..m].to_vec();
        let mut iters = 0;
        for it in 0..60 {
            iters = it + 1;
            let gy = g(&y);
            // finite-difference gradient of g at y
            let mut gg = vec![0.0; m];
            for i in 0..m {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[i] += h;
                ym[i] -= h;
                gg[i] = (g(&yp) - g(&ym)) / (2.0 * h);
            }
            let e = gy - x[n - 1];
            // residual of the stationarity condition
            let mut f = vec![0.0; m];
            let mut fn2 = 0.0;
            for i in 0..m {
                f[i] = y[i] - x[i] + e * gg[i];
                fn2 += f[i] * f[i];
            }
            if fn2.sqrt() < 1e-13 * (1.0 + norm(x)) {
                break;
            }
            // Gauss-Newton metric I + gg gg^T, inverted by Sherman-Morrison
            let gg2 = dot(&gg, &gg);
            let fg = dot(&f, &gg);
            for i in 0..m {
                let step = f[i] - gg[i] * fg / (1.0 + gg2);
                y[i] -= step;
            }
        }
        (y, iters)
    }

    fn fd_distance_data(&self, x: &[f64], rho: f64) -> (Vec<f64>, DMatrix<f64>) {
        let n = x.len();
        let h = 1e-5 * rho;
        let mut grad = vec![0.0; n];
        let mut hess = DMatrix::<f64>::zeros(n, n);
        let d0 = self.distance(x);
        for i in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let dp = self.distance(&xp);
            let dm = self.distance(&xm);
            grad[i] = (dp - dm) / (2.0 * h);
            hess[(i, i)] = (dp - 2.0 * d0 + dm) / (h * h);
        }
        for i in 0..n {
            for j in i + 1..n {
                let mut xpp = x.to_vec();
                let mut xpm = x.to_vec();
                let mut xmp = x.to_vec();
                let mut xmm = x.to_vec();
                xpp[i] += h;
                xpp[j] += h;
                xpm[i] += h;
                xpm[j] -= h;
                xmp[i] -= h;
                xmp[j] += h;
                xmm[i] -= h;
                xmm[j] -= h;
                let v = (self.distance(&xpp) - self.distance(&xpm) - self.distance(&xmp)
                    + self.distance(&xmm))
                    / (4.0 * h * h);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        (grad, hess)
    }

    pub fn differential_data(&self, x: &[f64]) -> Result<DifferentialData> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::InvalidParameter(format!(
                "point has dimension {}, surface has {}",
                x.len(),
                n
            )));
        }
        let rho = self.rho();
        let d = self.distance(x);
        if d.abs() >= 2.0 * rho {
            return Err(Error::OutOfNeighborhood { d, rho });
        }
        match self {
            Surface::Sphere { center, .. } => {
                let r = dist(x, center);
                let xi: Vec<f64> = (0..n).map(|i| (center[i] - x[i]) / r).collect();
                // D^2 d = -(I - xhat xhat^T)/r with xhat = (x-c)/r = -grad
                let mut hess = DMatrix::<f64>::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let p = if i == j { 1.0 } else { 0.0 };
                        hess[(i, j)] = -(p - xi[i] * xi[j]) / r;
                    }
                }
                let lap = -((n - 1) as f64) / r;
                let basis = frame_with_last(&xi);
                let mut eigs = vec![-1.0 / r; n];
                eigs[n - 1] = 0.0;
                Ok(DifferentialData {
                    d,
                    grad: xi,
                    hessian: hess,
                    laplacian: lap,
                    eigenvalues: eigs,
                    eigenbasis: basis,
                })
            }
            Surface::Hyperplane { normal, .. } => {
                let basis = frame_with_last(normal);
                Ok(DifferentialData {
                    d,
                    grad: normal.clone(),
                    hessian: DMatrix::zeros(n, n),
                    laplacian: 0.0,
                    eigenvalues: vec![0.0; n],
                    eigenbasis: basis,
                })
            }
            Surface::Cylinder { .. } => {
                let m = n - 1;
                let rp = norm(&x[..m]);
                let mut grad = vec![0.0; n];
                for i in 0..m {
                    grad[i] = -x[i] / rp;
                }
                let mut hess = DMatrix::<f64>::zeros(n, n);
                for i in 0..m {
                    for j in 0..m {
                        let p = if i == j { 1.0 } else { 0.0 };
                        hess[(i, j)] = -(p - (x[i] / rp) * (x[j] / rp)) / rp;
                    }
                }
                let lap = -((m - 1) as f64) / rp;
                // tangent frame: angular directions then the axis
                let basis = frame_with_last(&grad);
                let mut eigs = vec![-1.0 / rp; m - 1];
                eigs.resize(m, 0.0); // axis direction
                eigs.push(0.0); // gradient direction
                if m == 1 {
                    // two parallel lines in the plane: flat
                    return Ok(DifferentialData {
                        d,
                        grad,
                        hessian: DMatrix::zeros(n, n),
                        laplacian: 0.0,
                        eigenvalues: vec![0.0; n],
                        eigenbasis: basis,
                    });
                }
                // frame_with_last gives an orthonormal frame, but for the
                // cylinder the tangent block must separate the angular
                // direction from the axis; build it explicitly for n = 3
                let basis = if n == 3 {
                    let theta = [-grad[1], grad[0], 0.0];
                    let mut b = DMatrix::<f64>::zeros(3, 3);
                    for i in 0..3 {
                        b[(i, 0)] = theta[i];
                        b[(i, 1)] = if i == 2 { 1.0 } else { 0.0 };
                        b[(i, 2)] = grad[i];
                    }
                    b
                } else {
                    basis
                };
                Ok(DifferentialData {
                    d,
                    grad,
                    hessian: hess,
                    laplacian: lap,
                    eigenvalues: eigs,
                    eigenbasis: basis,
                })
            }
            Surface::Graph { .. } => {
                let (grad, hess) = self.fd_distance_data(x, rho);
                let gnorm = norm(&grad);
                let grad: Vec<f64> = grad.iter().map(|v| v / gnorm).collect();
                let lap = hess.trace();
                let eig = nalgebra::linalg::SymmetricEigen::new(hess.clone());
                // order eigenpairs: gradient direction last, others by value
                let mut idx: Vec<usize> = (0..n).collect();
                let overlap: Vec<f64> = (0..n)
                    .map(|j| {
                        (0..n).map(|i| eig.eigenvectors[(i, j)] * grad[i]).sum::<f64>()
                    })
                    .collect();
                let gdir = (0..n)
                    .max_by(|&a, &b| overlap[a].abs().total_cmp(&overlap[b].abs()))
                    .unwrap();
                idx.retain(|&j| j != gdir);
                idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
                let mut eigs = Vec::with_capacity(n);
                let mut basis = DMatrix::<f64>::zeros(n, n);
                for (col, &j) in idx.iter().enumerate() {
                    eigs.push(eig.eigenvalues[j]);
                    for i in 0..n {
                        basis[(i, col)] = eig.eigenvectors[(i, j)];
                    }
                }
                eigs.push(0.0);
                for i in 0..n {
                    basis[(i, n - 1)] = grad[i];
                }
                // the numerical eigenvectors are not exactly orthogonal
                // to the substituted gradient; re-orthonormalize the
                // tangent columns against it and each other
                for col in 0..n - 1 {
                    for prev in (0..col).chain(std::iter::once(n - 1)) {
                        let mut p = 0.0;
                        for i in 0..n {
                            p += basis[(i, col)] * basis[(i, prev)];
                        }
                        for i in 0..n {
                            basis[(i, col)] -= p * basis[(i, prev)];
                        }
                    }
                    let mut nn = 0.0;
                    for i in 0..n {
                        nn += basis[(i, col)] * basis[(i, col)];
                    }
                    let nn = nn.sqrt();
                    for i in 0..n {
                        basis[(i, col)] /= nn;
                    }
                }
                Ok(DifferentialData {
                    d,
                    grad,
                    hessian: hess,
                    laplacian: lap,
                    eigenvalues: eigs,
                    eigenbasis: basis,
                })
            }
        }
    }

    /// Integral over S^{n-2} of A(y') = 1/2 sum_i lambda_i y_i'^2, equal
    /// to |S^{n-2}| Delta d / (2(n-1)).
    pub fn sphere_average_a(&self, x: &[f64], quad: &QuadratureSpec) -> Result<f64> {
        let n = self.dim();
        if n < 2 || n > 3 {
            return Err(Error::InvalidParameter(format!(
                "sphere_average_a supports n in {{2,3}}, got {n}"
            )));
        }
        quad.validate()?;
        let data = self.differential_data(x)?;
        if data.d.abs() >= self.rho() {
            return Err(Error::OutOfNeighborhood {
                d: data.d,
                rho: self.rho(),
            });
        }
        let lam = &data.eigenvalues;
        if n == 2 {
            // S^0 carries counting measure on {-1, +1}
            return Ok(lam[0]);
        }
        // n = 3: uniform angular rule on S^1, exact for this quadratic
        let m = quad.angular_nodes.max(16);
        let mut acc = crate::quad::KahanSum::new();
        let dt = 2.0 * std::f64::consts::PI / m as f64;
        for k in 0..m {
            let t = (k as f64 + 0.5) * dt;
            let (c, s) = (t.cos(), t.sin());
            acc.add(0.5 * (lam[0] * c * c + lam[1] * s * s) * dt);
        }
        Ok(acc.value())
    }
}

/// Orthogonal matrix whose last column is the given unit vector, built
/// from the Householder reflection exchanging e_n and v.
fn frame_with_last(v: &[f64]) -> DMatrix<f64> {
    let n = v.len();
    let mut en = vec![0.0; n];
    en[n - 1] = 1.0;
    let mut w: Vec<f64> = (0..n).map(|i| en[i] - v[i]).collect();
    let wn = norm(&w);
    if wn < 1e-14 {
        return DMatrix::identity(n, n);
    }
    for wi in &mut w {
        *wi /= wn;
    }
    let mut h = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] -= 2.0 * w[i] * w[j];
        }
    }
    h
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[allow(unused)]
pub(crate) fn dvec(a: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::sphere_area;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_circle() -> Surface {
        Surface::sphere(vec![0.0, 0.0], 1.0).unwrap()
    }

    fn surfaces_under_test() -> Vec<Surface> {
        vec![
            unit_circle(),
            Surface::sphere(vec![0.3, -0.2, 0.1], 2.0).unwrap(),
            Surface::hyperplane(vec![0.0, 0.0, 1.0], 0.0).unwrap(),
            Surface::hyperplane(vec![1.0, 2.0, 2.0], 0.5).unwrap(),
            Surface::cylinder(1.0, 3).unwrap(),
            Surface::graph(
                2,
                Arc::new(|y: &[f64]| 0.1 * y[0] * y[0]),
                1.0,
            )
            .unwrap(),
        ]
    }

    fn random_point_in_tube(surf: &Surface, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = surf.dim();
        let rho = surf.rho().min(5.0);
        loop {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let d = surf.distance(&x);
            if d.abs() < 0.9 * rho {
                return x;
            }
        }
    }

    #[test]
    fn distance_closed_forms() {
        let s = unit_circle();
        assert!((s.distance(&[0.5, 0.0]) - 0.5).abs() < 1e-15);
        assert!((s.distance(&[0.0, 0.0]) - 1.0).abs() < 1e-15);
        let h = Surface::hyperplane(vec![0.0, 1.0], 0.0).unwrap();
        assert!((h.distance(&[3.0, 0.7]) - 0.7).abs() < 1e-15);
        let c = Surface::cylinder(1.0, 3).unwrap();
        assert!((c.distance(&[0.5, 0.0, 9.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constructor_validation() {
        assert!(Surface::sphere(vec![0.0, 0.0], -1.0).is_err());
        assert!(Surface::hyperplane(vec![0.0, 0.0], 0.0).is_err());
        assert!(Surface::cylinder(0.0, 3).is_err());
        assert!(Surface::cylinder(1.0, 1).is_err());
    }

    #[test]
    fn gradient_is_unit_and_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for surf in surfaces_under_test() {
            for _ in 0..100 {
                let x = random_point_in_tube(&surf, &mut rng);
                let data = surf.differential_data(&x).unwrap();
                assert!(
                    (norm(&data.grad) - 1.0).abs() < 1e-8,
                    "grad norm off on {surf:?}"
                );
                let h = 1e-6;
                for i in 0..x.len() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (surf.distance(&xp) - surf.distance(&xm)) / (2.0 * h);
                    assert!(
                        (fd - data.grad[i]).abs() < 1e-6,
                        "fd gradient mismatch on {surf:?} at {x:?}: {fd} vs {}",
                        data.grad[i]
                    );
                }
            }
        }
    }

    #[test]
    fn hessian_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for surf in surfaces_under_test() {
            for _ in 0..20 {
                let x = random_point_in_tube(&surf, &mut rng);
                let data = surf.differential_data(&x).unwrap();
                let n = x.len();
                assert!((data.hessian.trace() - data.laplacian).abs() < 1e-10);
                // Hessian annihilates the gradient; finite-difference
                // surfaces carry the h = 1e-5 rho round-off floor
                let tol = if matches!(surf, Surface::Graph { .. }) { 2e-5 } else { 1e-8 };
                for i in 0..n {
                    let mut v = 0.0;
                    for j in 0..n {
                        v += data.hessian[(i, j)] * data.grad[j];
                    }
                    assert!(v.abs() < tol, "D2d grad != 0 on {surf:?}");
                }
                // orthogonal eigenbasis with gradient in the last column
                let t = &data.eigenbasis;
                let gram = t.transpose() * t;
                for i in 0..n {
                    for j in 0..n {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((gram[(i, j)] - want).abs() < 1e-10);
                    }
                }
                for i in 0..n {
                    assert!((t[(i, n - 1)] - data.grad[i]).abs() < 1e-7);
                }
                assert_eq!(*data.eigenvalues.last().unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn laplacian_examples() {
        let h = Surface::hyperplane(vec![0.0, 0.0, 1.0], 0.0).unwrap();
        let data = h.differential_data(&[1.0, 2.0, 0.3]).unwrap();
        assert_eq!(data.laplacian, 0.0);

        let s = unit_circle();
        let data = s.differential_data(&[1.0, 0.0]).unwrap();
        assert!((data.laplacian + 1.0).abs() < 1e-12);

        let b = Surface::sphere(vec![0.0, 0.0, 0.0], 2.0).unwrap();
        let data = b.differential_data(&[2.0, 0.0, 0.0]).unwrap();
        assert!((data.laplacian + 1.0).abs() < 1e-12);
        // mean curvature -lap/(n-1) = 1/2
        assert!((-data.laplacian / 2.0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn eigenvalue_shift_formula() {
        // lambda_i(d) = -kappa_i / (1 - kappa_i d) along the normal line
        for surf in [
            unit_circle(),
            Surface::sphere(vec![0.0; 3], 2.0).unwrap(),
            Surface::cylinder(1.5, 3).unwrap(),
        ] {
            let rho = surf.rho();
            let n = surf.dim();
            // a boundary point and its inward normal
            let x0: Vec<f64> = match &surf {
                Surface::Sphere { center, radius } => {
                    let mut x = center.clone();
                    x[0] += radius;
                    x
                }
                Surface::Cylinder { radius, dim } => {
                    let mut x = vec![0.0; *dim];
                    x[0] = *radius;
                    x
                }
                _ => unreachable!(),
            };
            let g0 = surf.differential_data(&x0).unwrap();
            let kappas: Vec<f64> = g0.eigenvalues[..n - 1].to_vec(); // at d = 0, lambda_i = -kappa_i
            for &dd in &[-rho / 2.0, 0.0, rho / 2.0] {
                let x: Vec<f64> = (0..n).map(|i| x0[i] + dd * g0.grad[i]).collect();
                let data = surf.differential_data(&x).unwrap();
                // numerical Hessian spectrum at x
                let (_, hfd) = surf.fd_distance_data(&x, rho);
                let mut fd_eigs = nalgebra::linalg::SymmetricEigen::new(hfd)
                    .eigenvalues
                    .iter()
                    .cloned()
                    .collect::<Vec<f64>>();
                fd_eigs.sort_by(|a, b| a.total_cmp(b));
                let mut form: Vec<f64> = kappas
                    .iter()
                    .map(|&l0| {
                        let kappa = -l0;
                        -kappa / (1.0 - kappa * dd)
                    })
                    .collect();
                form.push(0.0);
                form.sort_by(|a, b| a.total_cmp(b));
                let mut closed = data.eigenvalues.clone();
                closed.sort_by(|a, b| a.total_cmp(b));
                for i in 0..n {
                    assert!(
                        (form[i] - fd_eigs[i]).abs() < 1e-5,
                        "formula vs fd spectrum on {surf:?} at d={dd}: {form:?} vs {fd_eigs:?}"
                    );
                    assert!((form[i] - closed[i]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn sphere_average_matches_laplacian_identity() {
        let quad = QuadratureSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for surf in [
            unit_circle(),
            Surface::sphere(vec![0.1, 0.0, -0.2], 2.0).unwrap(),
            Surface::cylinder(1.0, 2).unwrap(),
            Surface::cylinder(2.0, 3).unwrap(),
        ] {
            let n = surf.dim();
            for _ in 0..10 {
                let x = random_point_in_tube(&surf, &mut rng);
                let avg = surf.sphere_average_a(&x, &quad).unwrap();
                let data = surf.differential_data(&x).unwrap();
                let want =
                    0.5 * sphere_area(n - 1) * data.laplacian / (n as f64 - 1.0);
                assert!(
                    (avg - want).abs() < 1e-6,
                    "sphere average off on {surf:?}: {avg} vs {want}"
                );
            }
        }
    }

    #[test]
    fn sphere_average_examples() {
        let quad = QuadratureSpec::default();
        let h = Surface::hyperplane(vec![0.0, 1.0], 0.0).unwrap();
        assert!(h.sphere_average_a(&[0.4, 0.1], &quad).unwrap().abs() < 1e-14);
        let s2 = unit_circle();
        assert!((s2.sphere_average_a(&[1.0, 0.0], &quad).unwrap() + 1.0).abs() < 1e-12);
        let s3 = Surface::sphere(vec![0.0; 3], 1.0).unwrap();
        let v = s3.sphere_average_a(&[1.0, 0.0, 0.0], &quad).unwrap();
        assert!((v + std::f64::consts::PI).abs() < 1e-10);
    }

    #[test]
    fn out_of_neighborhood_detected() {
        let s = unit_circle();
        let r = s.differential_data(&[5.0, 0.0]);
        assert!(matches!(r, Err(Error::OutOfNeighborhood { .. })));
        // sphere_average_a uses the tighter Q_rho
        let quad = QuadratureSpec::default();
        let r = s.sphere_average_a(&[0.3, 0.0], &quad); // d = 0.7 > rho = 0.5
        assert!(matches!(r, Err(Error::OutOfNeighborhood { .. })));
    }

    #[test]
    fn graph_distance_and_curvature() {
        // parabola y = x^2/10: on the axis the foot is the vertex, the
        // curvature there is 1/5, so lambda_1 = -(1/5)/(1 - d/5)
        let g = Surface::graph(2, Arc::new(|y: &[f64]| 0.1 * y[0] * y[0]), 1.0).unwrap();
        let d = g.distance(&[0.0, 1.0]);
        assert!((d - 1.0).abs() < 1e-10);
        let data = g.differential_data(&[0.0, 1.0]).unwrap();
        assert!((data.eigenvalues[0] + 0.25).abs() < 1e-5);
        assert!((data.grad[0]).abs() < 1e-6);
        assert!((data.grad[1] - 1.0).abs() < 1e-6);
        // below the graph the sign flips
        assert!(g.distance(&[0.0, -0.5]) < 0.0);
    }

    #[test]
    fn flat_graph_matches_hyperplane() {
        let g = Surface::graph(3, Arc::new(|_: &[f64]| 0.25), 2.0).unwrap();
        let x = [0.3, -0.7, 0.9];
        assert!((g.distance(&x) - 0.65).abs() < 1e-10);
        let data = g.differential_data(&x).unwrap();
        assert!(data.laplacian.abs() < 1e-6);
    }
}
