//! Limit targets of the convergence theorem: the fractional mean
//! curvature kappa[x,d] with its one-sided split for s < 1/2, the
//! constants c2 and c_star = c1 c2 for s > 1/2, and the per-point
//! target value assembled across the three regimes.

use crate::error::{Error, Result};
use crate::exec::{self, Mode};
use crate::geometry::Surface;
use crate::phase_field::{energy_constant_c1, PhaseTransition};
use crate::quad::{integrate_adaptive, KahanSum, QuadratureSpec};
use crate::special::sphere_area;
use serde::Serialize;

/// Geometric ratio of the radial marching grid used to bracket the
/// sign changes of d(x + r omega) - d(x) along a ray.
const RAY_MARCH_RATIO: f64 = 1.08;

/// Below this radius the ray profile is handled by its quadratic
/// model mu r + (omega^T H omega) r^2 / 2 instead of evaluation:
/// near-tangent rays have their first root at radii where the profile
/// values sink under evaluation round-off, while the model root
/// -2 mu / (omega^T H omega) carries only an O(r) relative error.
const RAY_MODEL_RADIUS: f64 = 1e-5;

/// Profile values smaller than this are round-off; sign decisions
/// hold the previous sign instead of trusting them.
const RAY_NOISE_FLOOR: f64 = 1e-14;

/// Where s sits relative to the critical order 1/2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn classify(s: f64) -> Result<Regime> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "order s must lie in (0,1), got {s}"
            )));
        }
        if (s - 0.5).abs() < 1e-12 {
            Ok(Regime::Critical)
        } else if s < 0.5 {
            Ok(Regime::Subcritical)
        } else {
            Ok(Regime::Supercritical)
        }
    }
}

/// Fractional mean curvature at a point, together with the two
/// one-sided set measures whose difference defines it.
#[derive(Clone, Copy, Debug)]
pub struct FractionalCurvature {
    pub kappa: f64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub err: f64,
}

/// Ingredients behind a limit target value.
#[derive(Clone, Debug, Serialize)]
pub enum TargetParts {
    Kappa {
        kappa_plus: f64,
        kappa_minus: f64,
    },
    MeanCurvature {
        laplacian_d: f64,
        equator_area: f64,
        prefactor: f64,
    },
    OneDimensional,
}

/// The theorem's limit value at one point.
#[derive(Clone, Debug, Serialize)]
pub struct LimitTarget {
    pub s: f64,
    pub regime: Regime,
    pub value: f64,
    pub parts: TargetParts,
}

struct RayMass {
    plus: f64,
    minus: f64,
    err: f64,
}

fn sign_of(v: f64, tie: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        tie
    }
}

fn bisect_root(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, sgn_lo: f64, tie: f64) -> f64 {
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= 1e-15 * hi {
            break;
        }
        if sign_of(f(mid), tie) == sgn_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Kernel mass of the radial set where the ray profile has the target
/// sign. The profile f(r) = d(x + r omega) - d(x) starts at sign(mu)
/// near zero, so the set always opens at the first root; a root under
/// the model radius comes from the quadratic model, the rest from
/// marching and bisection. Exact ties are assigned to neither set.
fn ray_mass(f: &dyn Fn(f64) -> f64, mu: f64, kw: f64, s: f64, z_max: f64) -> RayMass {
    if mu == 0.0 {
        return RayMass {
            plus: 0.0,
            minus: 0.0,
            err: 0.0,
        };
    }
    let target = if mu < 0.0 { 1.0 } else { -1.0 };
    let tie = -target;
    let mut sign = -target;
    let mut roots: Vec<f64> = Vec::new();
    let mut err = 0.0;
    if mu * kw < 0.0 {
        let am = -2.0 * mu / kw;
        if am < RAY_MODEL_RADIUS {
            roots.push(am);
            sign = -sign;
            err += am.powf(-2.0 * s) * am * kw.abs();
        }
    }
    let mut prev = 0.0_f64;
    let mut r = RAY_MODEL_RADIUS;
    loop {
        let v = f(r);
        let sv = if v.abs() <= RAY_NOISE_FLOOR {
            sign
        } else {
            sign_of(v, tie)
        };
        if sv != sign {
            let root = if prev == 0.0 {
                RAY_MODEL_RADIUS
            } else {
                bisect_root(f, prev, r, sign, tie)
            };
            roots.push(root);
            sign = sv;
        }
        if r >= z_max {
            break;
        }
        prev = r;
        r = (r * RAY_MARCH_RATIO).min(z_max);
    }
    let mut mass = KahanSum::new();
    let mut in_set = false;
    let mut a = 0.0_f64;
    for &root in &roots {
        if in_set {
            mass.add((a.powf(-2.0 * s) - root.powf(-2.0 * s)) / (2.0 * s));
        } else {
            a = root;
        }
        in_set = !in_set;
    }
    if in_set {
        // the final interval runs to infinity; its kernel tail is exact
        mass.add(a.powf(-2.0 * s) / (2.0 * s));
    }
    if let Some(&last) = roots.last() {
        if last >= 0.5 * z_max {
            // a crossing this far out leaves the set's behavior beyond
            // the truncation radius unsettled
            err += z_max.powf(-2.0 * s) / (2.0 * s);
        }
    }
    let m = mass.value();
    RayMass {
        plus: if target > 0.0 { m } else { 0.0 },
        minus: if target < 0.0 { m } else { 0.0 },
        err,
    }
}

/// Directions, quadrature weights, and gradient components mu for the
/// angular rule. Per-ray kernel masses behave like |mu|^{-2s} near the
/// tangent equator, so the polar variable is substituted as
/// mu = t^{1/(1-2s)}, which makes the transformed integrand bounded.
fn kappa_rays(frame: &[Vec<f64>], s: f64, nodes: usize) -> Vec<(Vec<f64>, f64, f64)> {
    let n = frame.len();
    let p = 1.0 / (1.0 - 2.0 * s);
    let mut rays = Vec::new();
    match n {
        1 => {
            let g = &frame[0];
            rays.push((g.clone(), 1.0, 1.0));
            rays.push((vec![-g[0]], 1.0, -1.0));
        }
        2 => {
            let (et, eg) = (&frame[0], &frame[1]);
            let (gx, gw) = crate::special::gauss_legendre(nodes);
            let half_pi = std::f64::consts::FRAC_PI_2;
            for (cusp, side) in [
                (half_pi, -1.0),
                (half_pi, 1.0),
                (3.0 * half_pi, -1.0),
                (3.0 * half_pi, 1.0),
            ] {
                for (&tx, &tw) in gx.iter().zip(&gw) {
                    let t = 0.5 * (tx + 1.0);
                    let theta = cusp + side * half_pi * t.powf(p);
                    let w = 0.5 * tw * half_pi * p * t.powf(p - 1.0);
                    let (c, sn) = (theta.cos(), theta.sin());
                    let dir = vec![c * eg[0] + sn * et[0], c * eg[1] + sn * et[1]];
                    rays.push((dir, w, c));
                }
            }
        }
        3 => {
            let (e1, e2, eg) = (&frame[0], &frame[1], &frame[2]);
            let (gx, gw) = crate::special::gauss_legendre(nodes);
            let waz = 2.0 * std::f64::consts::PI / nodes as f64;
            for hemi in [1.0, -1.0] {
                for (&tx, &tw) in gx.iter().zip(&gw) {
                    let t = 0.5 * (tx + 1.0);
                    let mu = hemi * t.powf(p);
                    let wp = 0.5 * tw * p * t.powf(p - 1.0);
                    let rho = (1.0 - mu * mu).max(0.0).sqrt();
                    for j in 0..nodes {
                        let phi = (j as f64 + 0.5) * waz;
                        let (cp, sp) = (phi.cos(), phi.sin());
                        let dir: Vec<f64> = (0..3)
                            .map(|k| rho * (cp * e1[k] + sp * e2[k]) + mu * eg[k])
                            .collect();
                        rays.push((dir, wp * waz, mu));
                    }
                }
            }
        }
        _ => unreachable!("angular rules cover n in 1..=3"),
    }
    rays
}

pub(crate) fn kappa_core(
    dist: &(dyn Fn(&[f64]) -> f64 + Sync),
    d0: f64,
    x: &[f64],
    frame: &[Vec<f64>],
    hess: &nalgebra::DMatrix<f64>,
    hnorm: f64,
    s: f64,
    quad: &QuadratureSpec,
    mode: Mode,
) -> Result<FractionalCurvature> {
    let n = x.len();
    let rays = kappa_rays(frame, s, quad.angular_nodes);
    let parts = exec::map_slice(mode, &rays, |(dir, w, mu)| {
        let f = |r: f64| {
            let y: Vec<f64> = (0..n).map(|k| x[k] + r * dir[k]).collect();
            dist(&y) - d0
        };
        let mut kw = 0.0;
        for i in 0..n {
            for j in 0..n {
                kw += dir[i] * hess[(i, j)] * dir[j];
            }
        }
        let m = ray_mass(&f, *mu, kw, s, quad.z_max);
        (w * m.plus, w * m.minus, w * m.err)
    });
    let mut plus = KahanSum::new();
    let mut minus = KahanSum::new();
    let mut err = 0.0;
    for (p, m, e) in &parts {
        plus.add(*p);
        minus.add(*m);
        err += e;
    }
    // third-order residue of the quadratic near-field model: the sets
    // inside the model radius pinch into a slab of angular width
    // ~ |H| r, and the model resolves it up to a further O(r) factor
    let shell = sphere_area(n.max(2) - 1) * hnorm * RAY_MODEL_RADIUS
        * RAY_MODEL_RADIUS.powf(1.0 - 2.0 * s)
        / (1.0 - 2.0 * s);
    let (kp, km) = (plus.value(), minus.value());
    Ok(FractionalCurvature {
        kappa: kp - km,
        kappa_plus: kp,
        kappa_minus: km,
        err: err + shell,
    })
}

/// Fractional mean curvature kappa[x,d] = kappa^+ - kappa^-, where
/// kappa^+ measures {z : d(x+z) > d(x), grad d(x).z < 0} and kappa^-
/// measures {z : d(x+z) < d(x), grad d(x).z > 0}, both against the
/// kernel |z|^{-n-2s}. Along each angular ray the set where the two
/// indicators differ is a union of intervals located by root
/// bracketing, and each interval contributes its exact kernel mass.
pub fn fractional_curvature_mode(
    surface: &Surface,
    x: &[f64],
    s: f64,
    quad: &QuadratureSpec,
    mode: Mode,
) -> Result<FractionalCurvature> {
    if !(s > 0.0 && s < 0.5) {
        return Err(Error::InvalidRegime(format!(
            "kappa is defined for s in (0, 1/2); got s = {s}"
        )));
    }
    quad.validate()?;
    let dd = surface.differential_data(x)?;
    let n = surface.dim();
    let frame: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| dd.eigenbasis[(i, j)]).collect())
        .collect();
    let hnorm = dd.eigenvalues.iter().fold(0.0_f64, |m, &e| m.max(e.abs()));
    kappa_core(
        &|y| surface.distance(y),
        dd.d,
        x,
        &frame,
        &dd.hessian,
        hnorm,
        s,
        quad,
        mode,
    )
}

/// As `fractional_curvature_mode` with the compiled-in default mode.
pub fn fractional_curvature(
    surface: &Surface,
    x: &[f64],
    s: f64,
    quad: &QuadratureSpec,
) -> Result<FractionalCurvature> {
    fractional_curvature_mode(surface, x, s, quad, Mode::auto())
}

fn c2_form_integrals(n: usize, s: f64, quad: &QuadratureSpec) -> Result<(f64, f64)> {
    let nf = n as f64;
    let m = nf + 2.0 * s;
    let q_max = 1e4;
    let rel = (quad.tol * 1e-5).clamp(1e-12, 1e-9);
    let f1 = |q: f64| {
        q.powf(nf)
            * ((m + 2.0) * (1.0 + q * q).powf(-(m + 4.0) / 2.0)
                - (1.0 + q * q).powf(-(m + 2.0) / 2.0))
    };
    let f2 = |q: f64| {
        q.powf(nf - 2.0) * ((nf - 1.0) - q * q) * (1.0 + q * q).powf(-(m + 2.0) / 2.0)
    };
    let (i1, _) = integrate_adaptive(f1, 0.0, q_max, 1e-13, rel, 4000)?;
    let (i2, _) = integrate_adaptive(f2, 0.0, q_max, 1e-13, rel, 4000)?;
    // both integrands decay like -q^{-2s-2}, so the truncated tail is
    // -q_max^{-1-2s}/(1+2s) up to O(q_max^{-3-2s})
    let tail = -q_max.powf(-1.0 - 2.0 * s) / (1.0 + 2.0 * s);
    Ok((i1 + tail, i2 + tail))
}

/// The angular constant c2 for s > 1/2, evaluated through both
/// integral forms as a mutual cross-check.
pub fn constant_c2(n: usize, s: f64, quad: &QuadratureSpec) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "c2 needs n >= 2, got {n}"
        )));
    }
    if !(s > 0.5 && s < 1.0) {
        return Err(Error::InvalidRegime(format!(
            "c2 is defined for s in (1/2, 1); got s = {s}"
        )));
    }
    quad.validate()?;
    let m = n as f64 + 2.0 * s;
    let (q1, q2) = c2_form_integrals(n, s, quad)?;
    let (v1, v2) = (m * q1, m * q2);
    if (v1 - v2).abs() > 1e-8 {
        return Err(Error::CrossFormDisagreement {
            a: v1,
            b: v2,
            tol: 1e-8,
        });
    }
    Ok(v1)
}

/// The limit prefactor c_star = c1 c2 for s > 1/2. Also re-evaluates
/// the defining display directly, pairing the q-integral with the
/// interaction double integral (which equals 2 c1) computed under a
/// refined quadrature, and errors if the two paths disagree.
pub fn constant_cstar(
    n: usize,
    s: f64,
    pt: &PhaseTransition,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if (pt.s - s).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "profile was solved for s = {}, c_star requested at s = {s}",
            pt.s
        )));
    }
    let c1 = energy_constant_c1(pt, quad)?;
    let c2 = constant_c2(n, s, quad)?;
    let product = c1 * c2;
    let mut refined = quad.clone();
    refined.radial_nodes *= 2;
    refined.delta_in *= 0.5;
    let c1_refined = energy_constant_c1(pt, &refined)?;
    let (q1, _) = c2_form_integrals(n, s, quad)?;
    let direct = 0.5 * (n as f64 + 2.0 * s) * q1 * (2.0 * c1_refined);
    if (direct - product).abs() > 1e-4 * product.abs() {
        return Err(Error::CrossFormDisagreement {
            a: direct,
            b: product,
            tol: 1e-4,
        });
    }
    Ok(product)
}

/// The theorem's limit value at x: kappa[x,d] below the critical
/// order, a mean-curvature multiple of the distance Laplacian at and
/// above it, and identically zero in one dimension.
pub fn theorem_target(
    surface: &Surface,
    x: &[f64],
    n: usize,
    s: f64,
    pt: &PhaseTransition,
    quad: &QuadratureSpec,
) -> Result<LimitTarget> {
    if n != surface.dim() {
        return Err(Error::InvalidParameter(format!(
            "surface has dimension {}, target requested in dimension {n}",
            surface.dim()
        )));
    }
    let regime = Regime::classify(s)?;
    if n == 1 {
        surface.differential_data(x)?;
        return Ok(LimitTarget {
            s,
            regime,
            value: 0.0,
            parts: TargetParts::OneDimensional,
        });
    }
    match regime {
        Regime::Subcritical => {
            let k = fractional_curvature(surface, x, s, quad)?;
            Ok(LimitTarget {
                s,
                regime,
                value: k.kappa,
                parts: TargetParts::Kappa {
                    kappa_plus: k.kappa_plus,
                    kappa_minus: k.kappa_minus,
                },
            })
        }
        Regime::Critical | Regime::Supercritical => {
            let dd = surface.differential_data(x)?;
            let equator = sphere_area(n - 1);
            let prefactor = match regime {
                Regime::Critical => 0.5,
                _ => 0.5 * constant_cstar(n, s, pt, quad)?,
            };
            Ok(LimitTarget {
                s,
                regime,
                value: prefactor * equator / (n as f64 - 1.0) * dd.laplacian,
                parts: TargetParts::MeanCurvature {
                    laplacian_d: dd.laplacian,
                    equator_area: equator,
                    prefactor,
                },
            })
        }
    }
}

/// The constants entering the limit statements for one (n, s) pair.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantsTable {
    pub n: usize,
    pub s: f64,
    pub c_ns: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_star: f64,
}

pub fn constants_table(
    n: usize,
    s: f64,
    pt: &PhaseTransition,
    quad: &QuadratureSpec,
) -> Result<ConstantsTable> {
    Ok(ConstantsTable {
        n,
        s,
        c_ns: crate::nonlocal::constant_cns(n, s)?,
        c1: energy_constant_c1(pt, quad)?,
        c2: constant_c2(n, s, quad)?,
        c_star: constant_cstar(n, s, pt, quad)?,
    })
}
