//! Finsler norms, their convex duals, and the control-translated Tonelli
//! Lagrangian phi_u(x,y) = (1/2) F(x, y - u(x))^2 with its conjugate
//! phi_u^*(x,xi) = (1/2) F^*(x,xi)^2 + <xi, u(x)>.
//!
//! Two concrete families:
//! - Quadratic: F(x,y) = sqrt(y . a(x) y), with closed-form dual
//!   F^*(x,xi) = sqrt(xi . a(x)^{-1} xi).
//! - Randers: F(x,y) = sqrt(y . a(x) y) + <beta(x), y>, dual computed
//!   numerically (angular scan plus Newton polish) and audited against a
//!   brute-force sup oracle.

use crate::algebra::{Covector, Point, SymMat2, TangentVec, Vec2};
use crate::control::ControlField;
use crate::error::{CoreError, Result};

/// Scalar Fourier perturbation of the metric: a(x) = base + sum_m dir_m *
/// (amp_cos cos(2 pi k.x/L) + amp_sin sin(2 pi k.x/L)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricMode {
    pub k: [i32; 2],
    pub amp_cos: f64,
    pub amp_sin: f64,
    pub dir: SymMat2,
}

/// Position-dependent symmetric positive definite metric field a(x).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub l: f64,
    pub base: SymMat2,
    pub modes: Vec<MetricMode>,
}

impl MetricField {
    pub fn constant(l: f64, base: SymMat2) -> Self {
        Self {
            l,
            base,
            modes: Vec::new(),
        }
    }

    pub fn at(&self, x: Point) -> SymMat2 {
        let mut a = self.base;
        for m in &self.modes {
            let phase = 2.0 * std::f64::consts::PI
                * (m.k[0] as f64 * x.x + m.k[1] as f64 * x.y)
                / self.l;
            let (s, c) = phase.sin_cos();
            a = a + m.dir * (m.amp_cos * c + m.amp_sin * s);
        }
        a
    }

    pub fn is_constant(&self) -> bool {
        self.modes.is_empty()
    }
}

/// Position-dependent norm data defining F and F^*.
#[derive(Debug, Clone, PartialEq)]
pub enum FinslerSpec {
    Quadratic { metric: MetricField },
    /// Randers: quadratic part plus a drift covector field beta(x) with
    /// beta . a^{-1} beta < 1 everywhere (strong convexity).
    Randers {
        metric: MetricField,
        drift: ControlField,
    },
}

/// Angular resolution of the coarse scan that seeds the Randers dual solve.
const RANDERS_SCAN: usize = 512;
/// Newton iteration cap for Randers numeric solves.
const RANDERS_NEWTON_CAP: usize = 60;

impl FinslerSpec {
    pub fn euclidean(l: f64) -> Self {
        FinslerSpec::Quadratic {
            metric: MetricField::constant(l, SymMat2::IDENTITY),
        }
    }

    pub fn metric(&self) -> &MetricField {
        match self {
            FinslerSpec::Quadratic { metric } | FinslerSpec::Randers { metric, .. } => metric,
        }
    }

    pub fn is_randers(&self) -> bool {
        matches!(self, FinslerSpec::Randers { .. })
    }

    pub fn torus_side(&self) -> f64 {
        self.metric().l
    }

    fn drift_at(&self, x: Point) -> Vec2 {
        match self {
            FinslerSpec::Quadratic { .. } => Vec2::ZERO,
            FinslerSpec::Randers { drift, .. } => drift.eval(x),
        }
    }

    /// Check SPD of a(x) and the Randers smallness bound on a sample grid.
    pub fn validate(&self, samples_per_axis: usize) -> Result<()> {
        let l = self.torus_side();
        for j in 0..samples_per_axis {
            for i in 0..samples_per_axis {
                let x = Point::new(
                    l * i as f64 / samples_per_axis as f64,
                    l * j as f64 / samples_per_axis as f64,
                );
                let a = self.metric().at(x);
                let (lmin, _) = a.eigenvalues();
                if lmin <= 0.0 {
                    return Err(CoreError::InvalidSpec(format!(
                        "metric not SPD at ({:.3},{:.3}): min eigenvalue {lmin:.3e}",
                        x.x, x.y
                    )));
                }
                if let FinslerSpec::Randers { .. } = self {
                    let beta = self.drift_at(x);
                    let s = a.inverse().quad(beta);
                    if s >= 1.0 {
                        return Err(CoreError::InvalidSpec(format!(
                            "Randers smallness violated at ({:.3},{:.3}): beta.a^-1 beta = {s:.4}",
                            x.x, x.y
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// F(x, y).
    pub fn eval_f(&self, x: Point, y: TangentVec) -> f64 {
        let a = self.metric().at(x);
        let q = a.quad(y.0).max(0.0).sqrt();
        q + self.drift_at(x).dot(y.0)
    }

    /// F^*(x, xi) = sup_{F(x,y)=1} <xi, y>. Closed form for the quadratic
    /// variant; angular scan plus Newton polish for Randers.
    pub fn eval_f_dual(&self, x: Point, xi: Covector) -> Result<f64> {
        match self {
            FinslerSpec::Quadratic { metric } => {
                let b = metric.at(x).inverse();
                Ok(b.quad(xi.0).max(0.0).sqrt())
            }
            FinslerSpec::Randers { metric, .. } => {
                if xi.0.norm() == 0.0 {
                    return Ok(0.0);
                }
                let a = metric.at(x);
                let beta = self.drift_at(x);
                let f = |e: Vec2| a.quad(e).sqrt() + beta.dot(e);
                let grad_f = |e: Vec2| {
                    let ae = a.apply(e);
                    let s = a.quad(e).sqrt();
                    Vec2::new(ae.x / s + beta.x, ae.y / s + beta.y)
                };
                // g(theta) = <xi, e> / F(e) on the unit circle; the maximizer is
                // unique by strict convexity of the unit ball.
                let g = |t: f64| {
                    let e = Vec2::new(t.cos(), t.sin());
                    xi.0.dot(e) / f(e)
                };
                let dg = |t: f64| {
                    let e = Vec2::new(t.cos(), t.sin());
                    let ep = e.rot90();
                    let fe = f(e);
                    (xi.0.dot(ep) * fe - xi.0.dot(e) * grad_f(e).dot(ep)) / (fe * fe)
                };
                let mut best_t = 0.0;
                let mut best = f64::NEG_INFINITY;
                for i in 0..RANDERS_SCAN {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / RANDERS_SCAN as f64;
                    let v = g(t);
                    if v > best {
                        best = v;
                        best_t = t;
                    }
                }
                // Newton on dg(t) = 0 with a finite-difference second derivative.
                let mut t = best_t;
                let fd = 1e-7;
                let mut residual = dg(t).abs();
                for _ in 0..RANDERS_NEWTON_CAP {
                    let d1 = dg(t);
                    residual = d1.abs();
                    if residual < 1e-13 * (1.0 + xi.0.norm()) {
                        return Ok(g(t));
                    }
                    let d2 = (dg(t + fd) - dg(t - fd)) / (2.0 * fd);
                    if d2.abs() < 1e-300 {
                        break;
                    }
                    let step = d1 / d2;
                    // Stay within the scanned basin.
                    let step = step.clamp(
                        -2.0 * std::f64::consts::PI / RANDERS_SCAN as f64,
                        2.0 * std::f64::consts::PI / RANDERS_SCAN as f64,
                    );
                    t -= step;
                }
                if residual < 1e-8 * (1.0 + xi.0.norm()) {
                    Ok(g(t))
                } else {
                    Err(CoreError::NumericFailure {
                        context: "randers dual newton",
                        residual,
                        iters: RANDERS_NEWTON_CAP,
                    })
                }
            }
        }
    }

    /// Gradient of (1/2) F(x,.)^2 at z (zero at z = 0; F^2 is C^1 there).
    fn half_f_squared_grad(&self, x: Point, z: Vec2) -> Vec2 {
        let a = self.metric().at(x);
        let s2 = a.quad(z);
        if s2 == 0.0 {
            return Vec2::ZERO;
        }
        let s = s2.sqrt();
        let beta = self.drift_at(x);
        let fz = s + beta.dot(z);
        // grad F = a z / s + beta; grad (F^2/2) = F grad F.
        let az = a.apply(z);
        Vec2::new(fz * (az.x / s + beta.x), fz * (az.y / s + beta.y))
    }

    /// Hessian of (1/2) F(x,.)^2 at z != 0 (closed form; used by the Newton
    /// inverse Legendre solve).
    fn half_f_squared_hess(&self, x: Point, z: Vec2) -> SymMat2 {
        let a = self.metric().at(x);
        let s = a.quad(z).sqrt();
        let beta = self.drift_at(x);
        let az = a.apply(z);
        let gf = Vec2::new(az.x / s + beta.x, az.y / s + beta.y);
        let fz = s + beta.dot(z);
        // hess F = a/s - (az)(az)^T / s^3; hess(F^2/2) = gf gf^T + F hess F.
        SymMat2::new(
            gf.x * gf.x + fz * (a.a11 / s - az.x * az.x / (s * s * s)),
            gf.x * gf.y + fz * (a.a12 / s - az.x * az.y / (s * s * s)),
            gf.y * gf.y + fz * (a.a22 / s - az.y * az.y / (s * s * s)),
        )
    }

    /// Busemann-Hausdorff volume density of the base norm: sqrt(det a) in the
    /// quadratic case; pi / |{F(x,.) <= 1}| computed by polar quadrature for
    /// Randers (trapezoid on a smooth periodic integrand, 2048 points).
    pub fn measure_density(&self, x: Point) -> f64 {
        match self {
            FinslerSpec::Quadratic { metric } => metric.at(x).det().sqrt(),
            FinslerSpec::Randers { .. } => {
                let n = 2048;
                let mut area = 0.0;
                for i in 0..n {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    let e = Vec2::new(t.cos(), t.sin());
                    let r = 1.0 / self.eval_f(x, TangentVec(e));
                    area += 0.5 * r * r;
                }
                area *= 2.0 * std::f64::consts::PI / n as f64;
                std::f64::consts::PI / area
            }
        }
    }
}

/// phi_u(x,y) = (1/2) F(x, y - u(x))^2.
pub fn phi_u(spec: &FinslerSpec, u: &ControlField, x: Point, y: TangentVec) -> f64 {
    let z = y.0 - u.eval(x);
    let f = spec.eval_f(x, TangentVec(z));
    0.5 * f * f
}

/// Closed-form conjugate phi_u^*(x,xi) = (1/2) F^*(x,xi)^2 + <xi, u(x)>.
pub fn phi_u_conj(spec: &FinslerSpec, u: &ControlField, x: Point, xi: Covector) -> Result<f64> {
    let fd = spec.eval_f_dual(x, xi)?;
    Ok(0.5 * fd * fd + xi.0.dot(u.eval(x)))
}

/// Brute-force conjugate oracle: sup over a y-grid of <xi,y> - phi_u(x,y).
///
/// A coarse pass over the whole box locates the basin; the stated `step` is
/// then applied in a refinement window around the coarse maximizer. Errors if
/// the final maximizer touches the box boundary (box too small).
pub fn phi_u_conj_bruteforce(
    spec: &FinslerSpec,
    u: &ControlField,
    x: Point,
    xi: Covector,
    search_box: f64,
    step: f64,
) -> Result<f64> {
    let objective = |y: Vec2| xi.0.dot(y) - phi_u(spec, u, x, TangentVec(y));

    // Symmetric grid around `center` so the center itself is always sampled.
    let scan = |center: Vec2, half: f64, step: f64| -> (Vec2, f64) {
        let m = (half / step).ceil() as i64;
        let mut best = f64::NEG_INFINITY;
        let mut best_y = center;
        for j in -m..=m {
            let y_y = center.y + step * j as f64;
            for i in -m..=m {
                let y_x = center.x + step * i as f64;
                let v = objective(Vec2::new(y_x, y_y));
                if v > best {
                    best = v;
                    best_y = Vec2::new(y_x, y_y);
                }
            }
        }
        (best_y, best)
    };

    let coarse_step = (search_box / 256.0).max(step);
    let (coarse_y, coarse_v) = scan(Vec2::ZERO, search_box, coarse_step);
    let (fine_y, fine_v) = if coarse_step > step {
        scan(coarse_y, 3.0 * coarse_step, step)
    } else {
        (coarse_y, coarse_v)
    };

    if fine_y.x.abs() >= search_box - coarse_step || fine_y.y.abs() >= search_box - coarse_step {
        return Err(CoreError::BoxTooSmall(fine_y.x, fine_y.y));
    }
    Ok(fine_v)
}

/// Legendre map of the translated Lagrangian: xi = d_y phi_u(x,y).
pub fn legendre_forward(
    spec: &FinslerSpec,
    u: &ControlField,
    x: Point,
    y: TangentVec,
) -> Covector {
    let z = y.0 - u.eval(x);
    Covector(spec.half_f_squared_grad(x, z))
}

/// Inverse Legendre map: d_xi phi_u^*(x,xi) = L_x^{-1}(xi) + u(x).
///
/// Quadratic: a^{-1} xi + u. Randers: damped Newton on the forward map with
/// the closed-form fiber Hessian.
pub fn legendre_inverse(
    spec: &FinslerSpec,
    u: &ControlField,
    x: Point,
    xi: Covector,
) -> Result<TangentVec> {
    let ux = u.eval(x);
    match spec {
        FinslerSpec::Quadratic { metric } => {
            let b = metric.at(x).inverse();
            Ok(TangentVec(b.apply(xi.0) + ux))
        }
        FinslerSpec::Randers { metric, .. } => {
            if xi.0.norm() == 0.0 {
                return Ok(TangentVec(ux));
            }
            let scale = 1.0 + xi.0.norm();
            let mut z = metric.at(x).inverse().apply(xi.0);
            if z.norm() == 0.0 {
                z = Vec2::new(1e-8, 0.0);
            }
            let mut residual = f64::INFINITY;
            for it in 0..RANDERS_NEWTON_CAP {
                let r = spec.half_f_squared_grad(x, z) - xi.0;
                residual = r.norm();
                if residual < 1e-12 * scale {
                    return Ok(TangentVec(z + ux));
                }
                let h = spec.half_f_squared_hess(x, z);
                let step = h.inverse().apply(r);
                // Damped update: halve until the residual decreases.
                let mut alpha = 1.0;
                let mut accepted = false;
                for _ in 0..30 {
                    let z_try = z - step * alpha;
                    if z_try.norm() > 0.0
                        && (spec.half_f_squared_grad(x, z_try) - xi.0).norm() < residual
                    {
                        z = z_try;
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    return Err(CoreError::NumericFailure {
                        context: "randers inverse legendre",
                        residual,
                        iters: it,
                    });
                }
            }
            Err(CoreError::NumericFailure {
                context: "randers inverse legendre",
                residual,
                iters: RANDERS_NEWTON_CAP,
            })
        }
    }
}

/// Fiber Hessian of the dual: d^2_{xi xi} (1/2) F^*(x,xi)^2, computed by
/// central differences (step 1e-5) of the u-free inverse Legendre map. The
/// control never enters: translation does not affect the fiber Hessian, and
/// this routine has no `u` argument at all.
///
/// For Randers specs xi = 0 is rejected (the dual Hessian is direction
/// dependent at the origin).
pub fn hessian_dual(spec: &FinslerSpec, x: Point, xi: Covector) -> Result<SymMat2> {
    if spec.is_randers() && xi.0.norm() == 0.0 {
        return Err(CoreError::PreconditionViolated(
            "Randers dual Hessian is direction-dependent at xi = 0".into(),
        ));
    }
    let u0 = ControlField::zero(spec.torus_side());
    let h = 1e-5;
    let lx = |v: Vec2| -> Result<Vec2> { Ok(legendre_inverse(spec, &u0, x, Covector(v))?.0) };
    let gxp = lx(xi.0 + Vec2::new(h, 0.0))?;
    let gxm = lx(xi.0 - Vec2::new(h, 0.0))?;
    let gyp = lx(xi.0 + Vec2::new(0.0, h))?;
    let gym = lx(xi.0 - Vec2::new(0.0, h))?;
    let hxx = (gxp.x - gxm.x) / (2.0 * h);
    let hyy = (gyp.y - gym.y) / (2.0 * h);
    let hxy = 0.5 * ((gxp.y - gxm.y) / (2.0 * h) + (gyp.x - gym.x) / (2.0 * h));
    let hess = SymMat2::new(hxx, hxy, hyy);
    let (lmin, _) = hess.eigenvalues();
    if lmin <= 0.0 {
        return Err(CoreError::ConvexityViolation(lmin));
    }
    Ok(hess)
}

/// Minimum dual-Hessian eigenvalue over a sample set: the uniform ellipticity
/// constant of the operator induced by phi_u^* (independent of u).
pub fn ellipticity_constant(spec: &FinslerSpec, samples: &[(Point, Covector)]) -> Result<f64> {
    let mut c = f64::INFINITY;
    for &(x, xi) in samples {
        let (lmin, _) = hessian_dual(spec, x, xi)?.eigenvalues();
        c = c.min(lmin);
    }
    if c <= 0.0 {
        return Err(CoreError::ConvexityViolation(c));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn randers_spec(l: f64, a: SymMat2, beta: Vec2) -> FinslerSpec {
        FinslerSpec::Randers {
            metric: MetricField::constant(l, a),
            drift: ControlField::constant(l, beta),
        }
    }

    #[test]
    fn euclidean_norm_345() {
        let spec = FinslerSpec::euclidean(1.0);
        let f = spec.eval_f(Point::new(0.0, 0.0), TangentVec::new(3.0, 4.0));
        assert_relative_eq!(f, 5.0);
    }

    #[test]
    fn anisotropic_norm_and_dual() {
        let spec = FinslerSpec::Quadratic {
            metric: MetricField::constant(1.0, SymMat2::diag(4.0, 1.0)),
        };
        let x = Point::new(0.3, 0.3);
        assert_relative_eq!(spec.eval_f(x, TangentVec::new(1.0, 0.0)), 2.0);
        assert_relative_eq!(
            spec.eval_f_dual(x, Covector::new(2.0, 0.0)).unwrap(),
            1.0
        );
    }

    #[test]
    fn randers_norm_shifts_by_drift() {
        let spec = randers_spec(1.0, SymMat2::IDENTITY, Vec2::new(0.5, 0.0));
        let f = spec.eval_f(Point::new(0.0, 0.0), TangentVec::new(1.0, 0.0));
        assert_relative_eq!(f, 1.5);
    }

    #[test]
    fn randers_dual_matches_bruteforce_sup() {
        let spec = randers_spec(1.0, SymMat2::IDENTITY, Vec2::new(0.5, 0.0));
        let x = Point::new(0.0, 0.0);
        let xi = Covector::new(1.0, 0.0);
        let numeric = spec.eval_f_dual(x, xi).unwrap();
        // Brute-force sup of <xi,y>/F(y) over 1e5 directions.
        let mut best = f64::NEG_INFINITY;
        for i in 0..100_000 {
            let t = 2.0 * std::f64::consts::PI * i as f64 / 1e5;
            let e = Vec2::new(t.cos(), t.sin());
            best = best.max(xi.0.dot(e) / spec.eval_f(x, TangentVec(e)));
        }
        assert_relative_eq!(numeric, best, epsilon = 1e-6);
    }

    #[test]
    fn phi_u_translation_examples() {
        let spec = FinslerSpec::euclidean(1.0);
        let x = Point::new(0.5, 0.5);
        let u0 = ControlField::zero(1.0);
        assert_relative_eq!(phi_u(&spec, &u0, x, TangentVec::new(1.0, 0.0)), 0.5);

        let u1 = ControlField::constant(1.0, Vec2::new(1.0, 0.0));
        assert_relative_eq!(phi_u(&spec, &u1, x, TangentVec::new(1.0, 0.0)), 0.0);

        let spec2 = FinslerSpec::Quadratic {
            metric: MetricField::constant(1.0, SymMat2::diag(4.0, 1.0)),
        };
        let u2 = ControlField::constant(1.0, Vec2::new(0.2, 0.0));
        assert_relative_eq!(
            phi_u(&spec2, &u2, x, TangentVec::new(1.0, 0.0)),
            0.5 * 4.0 * 0.64,
            epsilon = 1e-14
        );
    }

    #[test]
    fn conjugate_translation_rule_examples() {
        let spec = FinslerSpec::euclidean(1.0);
        let x = Point::new(0.1, 0.2);
        let u0 = ControlField::zero(1.0);
        assert_relative_eq!(
            phi_u_conj(&spec, &u0, x, Covector::new(1.0, 0.0)).unwrap(),
            0.5
        );
        let u = ControlField::constant(1.0, Vec2::new(0.2, 0.0));
        assert_relative_eq!(
            phi_u_conj(&spec, &u, x, Covector::new(1.0, 0.0)).unwrap(),
            0.7
        );
    }

    #[test]
    fn bruteforce_conjugate_examples() {
        let spec = FinslerSpec::euclidean(1.0);
        let x = Point::new(0.0, 0.0);
        let u0 = ControlField::zero(1.0);
        let v = phi_u_conj_bruteforce(&spec, &u0, x, Covector::new(1.0, 0.0), 4.0, 1e-2).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-3);

        let u = ControlField::constant(1.0, Vec2::new(0.2, 0.0));
        let v = phi_u_conj_bruteforce(&spec, &u, x, Covector::new(1.0, 0.0), 4.0, 1e-3).unwrap();
        assert_relative_eq!(v, 0.7, epsilon = 1e-3);

        let v = phi_u_conj_bruteforce(&spec, &u0, x, Covector::new(0.0, 0.0), 4.0, 1e-2).unwrap();
        assert_relative_eq!(v, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn bruteforce_flags_small_box() {
        let spec = FinslerSpec::euclidean(1.0);
        let u0 = ControlField::zero(1.0);
        // Optimizer for xi=(6,0) sits at y=(6,0), outside a box of half-width 2.
        let err = phi_u_conj_bruteforce(
            &spec,
            &u0,
            Point::new(0.0, 0.0),
            Covector::new(6.0, 0.0),
            2.0,
            1e-2,
        );
        assert!(matches!(err, Err(CoreError::BoxTooSmall(_, _))));
    }

    #[test]
    fn legendre_forward_examples() {
        let spec = FinslerSpec::euclidean(1.0);
        let u0 = ControlField::zero(1.0);
        let x = Point::new(0.0, 0.0);
        let y = TangentVec::new(0.3, -0.8);
        let xi = legendre_forward(&spec, &u0, x, y);
        assert_relative_eq!(xi.0.x, y.0.x);
        assert_relative_eq!(xi.0.y, y.0.y);

        let spec2 = FinslerSpec::Quadratic {
            metric: MetricField::constant(1.0, SymMat2::diag(4.0, 1.0)),
        };
        let u = ControlField::constant(1.0, Vec2::new(0.2, 0.0));
        let xi = legendre_forward(&spec2, &u, x, TangentVec::new(1.0, 1.0));
        assert_relative_eq!(xi.0.x, 3.2, epsilon = 1e-14);
        assert_relative_eq!(xi.0.y, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn legendre_roundtrip_quadratic_and_randers() {
        let quad = FinslerSpec::Quadratic {
            metric: MetricField::constant(1.0, SymMat2::new(3.0, 0.4, 1.5)),
        };
        let randers = randers_spec(1.0, SymMat2::new(2.0, 0.3, 1.2), Vec2::new(0.3, -0.2));
        let u = ControlField::constant(1.0, Vec2::new(0.1, 0.07));
        let x = Point::new(0.2, 0.8);
        for (spec, tol) in [(&quad, 1e-10), (&randers, 1e-6)] {
            for i in 0..25 {
                let y = TangentVec::new(
                    (i as f64 * 0.7).sin() * 2.0,
                    (i as f64 * 1.3).cos() * 2.0,
                );
                let xi = legendre_forward(spec, &u, x, y);
                let back = legendre_inverse(spec, &u, x, xi).unwrap();
                assert!(
                    (back.0 - y.0).norm() < tol,
                    "roundtrip error {:?} for sample {i}",
                    (back.0 - y.0).norm()
                );
            }
        }
    }

    #[test]
    fn hessian_dual_quadratic_is_inverse_metric() {
        let spec = FinslerSpec::Quadratic {
            metric: MetricField::constant(1.0, SymMat2::diag(4.0, 1.0)),
        };
        let h = hessian_dual(&spec, Point::new(0.0, 0.0), Covector::new(0.7, -0.3)).unwrap();
        assert_relative_eq!(h.a11, 0.25, epsilon = 1e-10);
        assert_relative_eq!(h.a12, 0.0, epsilon = 1e-10);
        assert_relative_eq!(h.a22, 1.0, epsilon = 1e-10);
        let (c, _) = h.eigenvalues();
        assert_relative_eq!(c, 0.25, epsilon = 1e-10);
    }

    #[test]
    fn hessian_dual_randers_positive_and_rejects_origin() {
        let spec = randers_spec(1.0, SymMat2::IDENTITY, Vec2::new(0.3, 0.0));
        let h = hessian_dual(&spec, Point::new(0.0, 0.0), Covector::new(0.8, 0.5)).unwrap();
        assert!(h.eigenvalues().0 > 0.0);
        assert!(hessian_dual(&spec, Point::new(0.0, 0.0), Covector::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn randers_smallness_validation() {
        let bad = randers_spec(1.0, SymMat2::IDENTITY, Vec2::new(1.2, 0.0));
        assert!(bad.validate(8).is_err());
        let good = randers_spec(1.0, SymMat2::IDENTITY, Vec2::new(0.5, 0.0));
        assert!(good.validate(8).is_ok());
    }

    #[test]
    fn measure_density_quadratic_vs_randers_quadrature() {
        // For beta = 0 the Randers polar quadrature must reproduce sqrt(det a).
        let a = SymMat2::new(2.0, 0.3, 1.1);
        let quad = FinslerSpec::Quadratic {
            metric: MetricField::constant(1.0, a),
        };
        let degenerate_randers = randers_spec(1.0, a, Vec2::ZERO);
        let x = Point::new(0.4, 0.6);
        assert_relative_eq!(
            quad.measure_density(x),
            degenerate_randers.measure_density(x),
            epsilon = 1e-10
        );
    }

    #[test]
    fn translation_rule_is_linear_in_u() {
        let spec = randers_spec(1.0, SymMat2::new(1.5, 0.2, 1.0), Vec2::new(0.2, 0.1));
        let x = Point::new(0.3, 0.7);
        let xi = Covector::new(0.9, -0.4);
        let u1 = ControlField::constant(1.0, Vec2::new(0.3, -0.1));
        let u2 = ControlField::constant(1.0, Vec2::new(-0.2, 0.25));
        let sum = u1.fourier_sum(&u2);
        let lhs = phi_u_conj(&spec, &sum, x, xi).unwrap() - phi_u_conj(&spec, &u1, x, xi).unwrap();
        let rhs = xi.0.dot(u2.eval(x));
        assert_relative_eq!(lhs, rhs, epsilon = 1e-14);
    }

    #[test]
    fn phi_u_not_two_homogeneous_under_control() {
        let spec = FinslerSpec::euclidean(1.0);
        let u = ControlField::constant(1.0, Vec2::new(0.5, 0.0));
        let x = Point::new(0.0, 0.0);
        let y = TangentVec::new(1.0, 0.0);
        let v1 = phi_u(&spec, &u, x, y);
        let v2 = phi_u(&spec, &u, x, TangentVec::new(2.0, 0.0));
        assert!((v2 - 4.0 * v1).abs() > 0.1, "phi_u must not be 2-homogeneous");
    }
}
