//! Control vector fields u(x) on the torus.
//!
//! Two representations: a truncated real Fourier series (cos/sin modes, so the
//! field is real by construction and conjugate symmetry c(-k) = conj(c(k))
//! holds automatically), and raw grid samples with bilinear interpolation.

use crate::algebra::{Point, Vec2};

/// One real Fourier mode of a vector field:
/// `u_k(x) = coeff_cos * cos(2 pi k.x / L) + coeff_sin * sin(2 pi k.x / L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierMode {
    pub k: [i32; 2],
    pub coeff_cos: Vec2,
    pub coeff_sin: Vec2,
}

/// A control field u : T^2 -> R^2.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlField {
    /// Truncated Fourier series on the torus of side `l`.
    Fourier { l: f64, modes: Vec<FourierMode> },
    /// Node samples on an `n x n` grid over [0,l)^2, bilinearly interpolated.
    Grid { l: f64, n: usize, values: Vec<Vec2> },
}

impl ControlField {
    /// The zero field on a torus of side `l`.
    pub fn zero(l: f64) -> Self {
        ControlField::Fourier {
            l,
            modes: Vec::new(),
        }
    }

    /// A constant field.
    pub fn constant(l: f64, value: Vec2) -> Self {
        ControlField::Fourier {
            l,
            modes: vec![FourierMode {
                k: [0, 0],
                coeff_cos: value,
                coeff_sin: Vec2::ZERO,
            }],
        }
    }

    pub fn torus_side(&self) -> f64 {
        match self {
            ControlField::Fourier { l, .. } | ControlField::Grid { l, .. } => *l,
        }
    }

    /// Evaluate u at x (x is wrapped periodically).
    pub fn eval(&self, x: Point) -> Vec2 {
        match self {
            ControlField::Fourier { l, modes } => {
                let mut u = Vec2::ZERO;
                for m in modes {
                    let phase =
                        2.0 * std::f64::consts::PI * (m.k[0] as f64 * x.x + m.k[1] as f64 * x.y)
                            / l;
                    let (s, c) = phase.sin_cos();
                    u = u + m.coeff_cos * c + m.coeff_sin * s;
                }
                u
            }
            ControlField::Grid { l, n, values } => {
                let nf = *n as f64;
                let fx = (x.x / l * nf).rem_euclid(nf);
                let fy = (x.y / l * nf).rem_euclid(nf);
                let i0 = fx.floor() as usize % n;
                let j0 = fy.floor() as usize % n;
                let tx = fx - fx.floor();
                let ty = fy - fy.floor();
                let i1 = (i0 + 1) % n;
                let j1 = (j0 + 1) % n;
                let v = |i: usize, j: usize| values[j * n + i];
                v(i0, j0) * ((1.0 - tx) * (1.0 - ty))
                    + v(i1, j0) * (tx * (1.0 - ty))
                    + v(i0, j1) * ((1.0 - tx) * ty)
                    + v(i1, j1) * (tx * ty)
            }
        }
    }

    /// Divergence of u at x. Closed form for the Fourier representation;
    /// centered differences (step l/1024) for grid samples.
    pub fn divergence(&self, x: Point) -> f64 {
        match self {
            ControlField::Fourier { l, modes } => {
                let two_pi_over_l = 2.0 * std::f64::consts::PI / l;
                let mut d = 0.0;
                for m in modes {
                    let kx = m.k[0] as f64 * two_pi_over_l;
                    let ky = m.k[1] as f64 * two_pi_over_l;
                    let phase =
                        2.0 * std::f64::consts::PI * (m.k[0] as f64 * x.x + m.k[1] as f64 * x.y)
                            / l;
                    let (s, c) = phase.sin_cos();
                    // d/dx [c_cos cos + c_sin sin] = -kx c_cos sin + kx c_sin cos, etc.
                    d += -s * (kx * m.coeff_cos.x + ky * m.coeff_cos.y)
                        + c * (kx * m.coeff_sin.x + ky * m.coeff_sin.y);
                }
                d
            }
            ControlField::Grid { l, .. } => {
                let h = l / 1024.0;
                let ux = (self.eval(Point::new(x.x + h, x.y)).x
                    - self.eval(Point::new(x.x - h, x.y)).x)
                    / (2.0 * h);
                let uy = (self.eval(Point::new(x.x, x.y + h)).y
                    - self.eval(Point::new(x.x, x.y - h)).y)
                    / (2.0 * h);
                ux + uy
            }
        }
    }

    /// Maximum analytic divergence magnitude over a sample grid (used as the
    /// divergence-free precondition check; exact zero for rotated-gradient
    /// Fourier modes).
    pub fn max_divergence(&self, samples_per_axis: usize) -> f64 {
        let l = self.torus_side();
        let mut m: f64 = 0.0;
        for j in 0..samples_per_axis {
            for i in 0..samples_per_axis {
                let x = Point::new(
                    l * i as f64 / samples_per_axis as f64,
                    l * j as f64 / samples_per_axis as f64,
                );
                m = m.max(self.divergence(x).abs());
            }
        }
        m
    }

    /// Conservative C^1 bound: for Fourier, sum over modes of
    /// (1 + |k| 2 pi / L) * |coefficients|; for grid samples, the sampled
    /// sup-norm plus the sup of one-sided difference quotients.
    pub fn c1_bound(&self) -> f64 {
        match self {
            ControlField::Fourier { l, modes } => {
                let two_pi_over_l = 2.0 * std::f64::consts::PI / l;
                modes
                    .iter()
                    .map(|m| {
                        let kn = ((m.k[0] as f64).powi(2) + (m.k[1] as f64).powi(2)).sqrt();
                        let amp = (m.coeff_cos.dot(m.coeff_cos) + m.coeff_sin.dot(m.coeff_sin))
                            .sqrt();
                        (1.0 + kn * two_pi_over_l) * amp
                    })
                    .sum()
            }
            ControlField::Grid { l, n, values } => {
                let h = l / *n as f64;
                let mut sup = 0.0f64;
                let mut dsup = 0.0f64;
                for j in 0..*n {
                    for i in 0..*n {
                        let v = values[j * n + i];
                        sup = sup.max(v.norm());
                        let vx = values[j * n + (i + 1) % n];
                        let vy = values[((j + 1) % n) * n + i];
                        dsup = dsup.max((vx - v).norm() / h).max((vy - v).norm() / h);
                    }
                }
                sup + dsup
            }
        }
    }

    /// Sampled sup-norm of |u|.
    pub fn sup_norm(&self, samples_per_axis: usize) -> f64 {
        let l = self.torus_side();
        let mut m: f64 = 0.0;
        for j in 0..samples_per_axis {
            for i in 0..samples_per_axis {
                let x = Point::new(
                    l * i as f64 / samples_per_axis as f64,
                    l * j as f64 / samples_per_axis as f64,
                );
                m = m.max(self.eval(x).norm());
            }
        }
        m
    }

    /// u1 + u2 for two Fourier fields on the same torus. Panics if the sides
    /// differ or either field is grid-sampled.
    pub fn fourier_sum(&self, other: &ControlField) -> ControlField {
        match (self, other) {
            (
                ControlField::Fourier { l: l1, modes: m1 },
                ControlField::Fourier { l: l2, modes: m2 },
            ) => {
                assert_eq!(l1, l2, "control fields live on different tori");
                let mut modes = m1.clone();
                modes.extend_from_slice(m2);
                ControlField::Fourier { l: *l1, modes }
            }
            _ => panic!("fourier_sum requires two Fourier-represented fields"),
        }
    }

    /// Scale all coefficients by `s` (Fourier representation only).
    pub fn scaled(&self, s: f64) -> ControlField {
        match self {
            ControlField::Fourier { l, modes } => ControlField::Fourier {
                l: *l,
                modes: modes
                    .iter()
                    .map(|m| FourierMode {
                        k: m.k,
                        coeff_cos: m.coeff_cos * s,
                        coeff_sin: m.coeff_sin * s,
                    })
                    .collect(),
            },
            ControlField::Grid { l, n, values } => ControlField::Grid {
                l: *l,
                n: *n,
                values: values.iter().map(|v| *v * s).collect(),
            },
        }
    }
}

/// Rotated-gradient (divergence-free) mode built from a scalar Fourier mode:
/// u = rot90(grad( amp_cos cos(2 pi k.x/L) + amp_sin sin(2 pi k.x/L) )).
pub fn rotated_gradient_mode(l: f64, k: [i32; 2], amp_cos: f64, amp_sin: f64) -> FourierMode {
    let two_pi_over_l = 2.0 * std::f64::consts::PI / l;
    let kv = Vec2::new(k[0] as f64 * two_pi_over_l, k[1] as f64 * two_pi_over_l);
    // grad(cos) = -k sin, grad(sin) = k cos; then rotate 90 degrees.
    FourierMode {
        k,
        coeff_cos: kv.rot90() * amp_sin,
        coeff_sin: kv.rot90() * (-amp_cos),
    }
}

/// Gradient mode built from a scalar Fourier mode:
/// u = grad( amp_cos cos(2 pi k.x/L) + amp_sin sin(2 pi k.x/L) ).
pub fn gradient_mode(l: f64, k: [i32; 2], amp_cos: f64, amp_sin: f64) -> FourierMode {
    let two_pi_over_l = 2.0 * std::f64::consts::PI / l;
    let kv = Vec2::new(k[0] as f64 * two_pi_over_l, k[1] as f64 * two_pi_over_l);
    FourierMode {
        k,
        coeff_cos: kv * amp_sin,
        coeff_sin: kv * (-amp_cos),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_field_evaluates_everywhere() {
        let u = ControlField::constant(1.0, Vec2::new(0.3, -0.2));
        let v = u.eval(Point::new(0.77, 0.13));
        assert_relative_eq!(v.x, 0.3);
        assert_relative_eq!(v.y, -0.2);
        assert_eq!(u.divergence(Point::new(0.2, 0.4)), 0.0);
    }

    #[test]
    fn rotated_gradient_mode_is_divergence_free() {
        let l = 2.0;
        let m = rotated_gradient_mode(l, [2, -1], 0.7, 0.3);
        let u = ControlField::Fourier { l, modes: vec![m] };
        assert_eq!(u.max_divergence(16), 0.0);
    }

    #[test]
    fn gradient_mode_divergence_matches_laplacian() {
        let l = 1.0;
        let k = [1, 2];
        let u = ControlField::Fourier {
            l,
            modes: vec![gradient_mode(l, k, 1.0, 0.0)],
        };
        // div grad cos(2 pi k.x) = -|2 pi k|^2 cos(2 pi k.x)
        let x = Point::new(0.13, 0.37);
        let two_pi = 2.0 * std::f64::consts::PI;
        let expected = -(two_pi * two_pi * 5.0) * (two_pi * (x.x + 2.0 * x.y)).cos();
        assert_relative_eq!(u.divergence(x), expected, epsilon = 1e-9);
    }

    #[test]
    fn fourier_divergence_matches_finite_differences() {
        let l = 1.3;
        let u = ControlField::Fourier {
            l,
            modes: vec![
                FourierMode {
                    k: [1, 0],
                    coeff_cos: Vec2::new(0.2, 0.1),
                    coeff_sin: Vec2::new(-0.3, 0.05),
                },
                FourierMode {
                    k: [2, 1],
                    coeff_cos: Vec2::new(0.05, -0.07),
                    coeff_sin: Vec2::new(0.02, 0.09),
                },
            ],
        };
        let x = Point::new(0.3, 0.9);
        let h = 1e-6;
        let fd = (u.eval(Point::new(x.x + h, x.y)).x - u.eval(Point::new(x.x - h, x.y)).x)
            / (2.0 * h)
            + (u.eval(Point::new(x.x, x.y + h)).y - u.eval(Point::new(x.x, x.y - h)).y) / (2.0 * h);
        assert_relative_eq!(u.divergence(x), fd, epsilon = 1e-7);
    }

    #[test]
    fn grid_field_interpolates_and_wraps() {
        let n = 4;
        let mut values = vec![Vec2::ZERO; n * n];
        values[0] = Vec2::new(1.0, 0.0);
        let u = ControlField::Grid {
            l: 1.0,
            n,
            values,
        };
        assert_relative_eq!(u.eval(Point::new(0.0, 0.0)).x, 1.0);
        // Halfway to the next node.
        assert_relative_eq!(u.eval(Point::new(0.125, 0.0)).x, 0.5);
        // Wrapping: halfway before node 0 from the other side.
        assert_relative_eq!(u.eval(Point::new(0.875, 0.0)).x, 0.5);
    }

    #[test]
    fn c1_bound_dominates_samples() {
        let l = 1.0;
        let u = ControlField::Fourier {
            l,
            modes: vec![FourierMode {
                k: [3, 1],
                coeff_cos: Vec2::new(0.1, 0.0),
                coeff_sin: Vec2::new(0.0, 0.2),
            }],
        };
        assert!(u.c1_bound() >= u.sup_norm(32));
    }
}
