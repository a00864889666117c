//! Small fixed-size linear algebra for the 2-torus: points, tangent vectors,
//! covectors, and symmetric 2x2 matrices with closed-form eigensolves.

use std::ops::{Add, Mul, Neg, Sub};

/// A point on the torus [0,L)^2 (coordinates are not wrapped here; wrapping
/// is the grid's job).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Wrap into [0, l) in both axes.
    pub fn wrap(self, l: f64) -> Self {
        Self {
            x: self.x.rem_euclid(l),
            y: self.y.rem_euclid(l),
        }
    }

    /// Shortest representative of `self - other` on the torus of side `l`,
    /// componentwise in [-l/2, l/2).
    pub fn torus_offset(self, other: Point, l: f64) -> Vec2 {
        let wrap_half = |d: f64| {
            let mut d = d.rem_euclid(l);
            if d >= 0.5 * l {
                d -= l;
            }
            d
        };
        Vec2::new(wrap_half(self.x - other.x), wrap_half(self.y - other.y))
    }

    /// Torus distance to `other` on side `l`.
    pub fn torus_distance(self, other: Point, l: f64) -> f64 {
        self.torus_offset(other, l).norm()
    }
}

/// A plain 2-vector. Used for both tangent vectors and covectors; the two
/// roles are distinguished by the newtypes below.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Counterclockwise rotation by 90 degrees: J v = (-v_y, v_x).
    pub fn rot90(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Tangent vector at a point (an element of T_x M).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TangentVec(pub Vec2);

/// Covector at a point (an element of T_x^* M).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Covector(pub Vec2);

impl TangentVec {
    pub const fn new(x: f64, y: f64) -> Self {
        Self(Vec2::new(x, y))
    }
}

impl Covector {
    pub const fn new(x: f64, y: f64) -> Self {
        Self(Vec2::new(x, y))
    }

    /// The canonical pairing <xi, y>.
    pub fn pair(self, v: TangentVec) -> f64 {
        self.0.dot(v.0)
    }
}

/// Symmetric 2x2 matrix stored as (a11, a12, a22).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMat2 {
    pub const IDENTITY: SymMat2 = SymMat2 {
        a11: 1.0,
        a12: 0.0,
        a22: 1.0,
    };

    pub const fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Self { a11, a12, a22 }
    }

    pub const fn diag(a11: f64, a22: f64) -> Self {
        Self { a11, a12: 0.0, a22 }
    }

    pub fn det(self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    pub fn trace(self) -> f64 {
        self.a11 + self.a22
    }

    /// Eigenvalues in ascending order (closed form for symmetric 2x2).
    pub fn eigenvalues(self) -> (f64, f64) {
        let half_tr = 0.5 * self.trace();
        let disc = (0.5 * (self.a11 - self.a22)).powi(2) + self.a12 * self.a12;
        let r = disc.max(0.0).sqrt();
        (half_tr - r, half_tr + r)
    }

    pub fn is_spd(self) -> bool {
        self.eigenvalues().0 > 0.0
    }

    pub fn inverse(self) -> SymMat2 {
        let d = self.det();
        SymMat2::new(self.a22 / d, -self.a12 / d, self.a11 / d)
    }

    pub fn apply(self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.a11 * v.x + self.a12 * v.y,
            self.a12 * v.x + self.a22 * v.y,
        )
    }

    /// Quadratic form v . A v.
    pub fn quad(self, v: Vec2) -> f64 {
        v.dot(self.apply(v))
    }

    /// Inverse square root of an SPD matrix, via the closed-form eigensolve.
    pub fn inv_sqrt(self) -> SymMat2 {
        let (l1, l2) = self.eigenvalues();
        // Eigenvector for l2 (the larger eigenvalue).
        let (c, s) = if self.a12.abs() > 1e-300 {
            let t = l2 - self.a11;
            let n = (self.a12 * self.a12 + t * t).sqrt();
            (self.a12 / n, t / n)
        } else if self.a11 >= self.a22 {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let w1 = 1.0 / l1.sqrt();
        let w2 = 1.0 / l2.sqrt();
        // V diag(w) V^T with V = [[s, c], [-c, s]] ... assemble directly:
        // columns: e2 = (c, s), e1 = (-s, c)
        SymMat2::new(
            w2 * c * c + w1 * s * s,
            (w2 - w1) * c * s,
            w2 * s * s + w1 * c * c,
        )
    }
}

impl Mul<f64> for SymMat2 {
    type Output = SymMat2;
    fn mul(self, s: f64) -> SymMat2 {
        SymMat2::new(self.a11 * s, self.a12 * s, self.a22 * s)
    }
}

impl Add for SymMat2 {
    type Output = SymMat2;
    fn add(self, o: SymMat2) -> SymMat2 {
        SymMat2::new(self.a11 + o.a11, self.a12 + o.a12, self.a22 + o.a22)
    }
}
