//! Planar geometry primitives shared by every module: angles, points, poses,
//! body twists and a small fixed-size 3x3 matrix.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Wraps an angle into `(-pi, pi]`. Angles already in range are returned untouched.
pub fn normalize_angle<T: Scalar>(a: T) -> T {
    let pi = T::PI();
    if a > -pi && a <= pi {
        return a;
    }
    let two_pi = pi + pi;
    let mut r = a % two_pi;
    if r > pi {
        r = r - two_pi;
    } else if r <= -pi {
        r = r + two_pi;
    }
    r
}

/// Smallest signed difference `a - b`, wrapped into `(-pi, pi]`.
#[inline]
pub fn angle_diff<T: Scalar>(a: T, b: T) -> T {
    normalize_angle(a - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> T {
        self.x.hypot(self.y)
    }

    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(&self, o: &Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn distance(&self, o: &Self) -> T {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    /// Rotates the vector counter-clockwise by `angle`.
    pub fn rotate(&self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(&self, o: &Self, t: T) -> Self {
        Self::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }
}

impl<T: Scalar> Add for Point2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Neg for Point2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Planar pose with heading kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Scalar> Pose2<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn position(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// `self ⊕ other`: applies `other`, expressed in this pose's frame.
    pub fn compose(&self, other: &Self) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self::new(
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// Pose of `other` expressed in this pose's frame (`self⁻¹ ⊕ other`).
    pub fn between(&self, other: &Self) -> Self {
        let (s, c) = self.theta.sin_cos();
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        Self::new(c * dx + s * dy, -s * dx + c * dy, other.theta - self.theta)
    }

    /// Maps a point from this pose's frame into the parent frame.
    pub fn transform_point(&self, p: &Point2<T>) -> Point2<T> {
        let (s, c) = self.theta.sin_cos();
        Point2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }
}

/// Body-frame velocity command `(v_x, v_y, omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist<T> {
    pub vx: T,
    pub vy: T,
    pub omega: T,
}

impl<T: Scalar> Twist<T> {
    pub fn new(vx: T, vy: T, omega: T) -> Self {
        Self { vx, vy, omega }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.vx == T::zero() && self.vy == T::zero() && self.omega == T::zero()
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.vx, self.vy, self.omega]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Pose increment produced by holding this twist for `dt` (exact constant-twist arc).
    pub fn exp(&self, dt: T) -> Pose2<T> {
        let dtheta = self.omega * dt;
        if dtheta.abs() < T::lit(1e-9) {
            return Pose2::new(self.vx * dt, self.vy * dt, dtheta);
        }
        let (s, c) = dtheta.sin_cos();
        let w = self.omega;
        Pose2::new(
            (self.vx * s + self.vy * (c - T::one())) / w,
            (self.vx * (T::one() - c) + self.vy * s) / w,
            dtheta,
        )
    }
}

impl<T: Scalar> Add for Twist<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.vx + o.vx, self.vy + o.vy, self.omega + o.omega)
    }
}

impl<T: Scalar> Mul<T> for Twist<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.vx * s, self.vy * s, self.omega * s)
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Scalar> Mat3<T> {
    pub fn zeros() -> Self {
        Self([[T::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        Self::diag([T::one(); 3])
    }

    pub fn diag(d: [T; 3]) -> Self {
        let mut m = Self::zeros();
        for (i, v) in d.iter().enumerate() {
            m.0[i][i] = *v;
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.0[r][c]
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros();
        for r in 0..3 {
            for c in 0..3 {
                m.0[c][r] = self.0[r][c];
            }
        }
        m
    }

    pub fn mul_vec(&self, v: [T; 3]) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.0[r][0] * v[0] + self.0[r][1] * v[1] + self.0[r][2] * v[2];
        }
        out
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut m = Self::zeros();
        for r in 0..3 {
            for c in 0..3 {
                m.0[r][c] = (0..3).fold(T::zero(), |acc, k| acc + self.0[r][k] * o.0[k][c]);
            }
        }
        m
    }

    pub fn add_mat(&self, o: &Self) -> Self {
        let mut m = *self;
        for r in 0..3 {
            for c in 0..3 {
                m.0[r][c] = m.0[r][c] + o.0[r][c];
            }
        }
        m
    }

    pub fn scale(&self, s: T) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|v| *v = *v * s);
        m
    }

    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn determinant(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Adjugate inverse; `None` when the matrix is singular.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.determinant();
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        let m = &self.0;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        Some(Self(adj).scale(T::one() / det))
    }

    /// `(A + Aᵀ) / 2`
    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        let t = self.transpose();
        self.add_mat(&t).scale(half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn normalize_wraps_into_half_open_interval() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(2.0 * PI + 0.1) - 0.1).abs() < 1e-12);
        assert!((normalize_angle(-2.0 * PI - 0.1) + 0.1).abs() < 1e-12);
        assert_eq!(normalize_angle(0.5_f32), 0.5_f32);
    }

    #[test]
    fn compose_then_between_roundtrips() {
        let a = Pose2::<f64>::new(1.0, -2.0, 0.7);
        let b = Pose2::new(0.3, 0.4, -2.9);
        let c = a.compose(&b);
        let back = a.between(&c);
        assert!((back.x - b.x).abs() < 1e-12);
        assert!((back.y - b.y).abs() < 1e-12);
        assert!(angle_diff(back.theta, b.theta).abs() < 1e-12);
        let id = a.compose(&a.inverse());
        assert!(id.x.abs() < 1e-12 && id.y.abs() < 1e-12 && id.theta.abs() < 1e-12);
    }

    #[test]
    fn twist_exp_matches_fine_euler() {
        let tw = Twist::new(0.4, -0.2, 0.9);
        let exact = tw.exp(1.0);
        let mut p = Pose2::identity();
        let n = 200_000;
        let h = 1.0 / n as f64;
        for _ in 0..n {
            p = p.compose(&Pose2::new(tw.vx * h, tw.vy * h, tw.omega * h));
        }
        assert!((p.x - exact.x).abs() < 1e-5);
        assert!((p.y - exact.y).abs() < 1e-5);
        assert!((p.theta - exact.theta).abs() < 1e-9);
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let m = Mat3::<f64>([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 0.0]]);
        assert!(m.inverse().is_none());
        let a = Mat3::<f64>([[2.0, 1.0, 0.0], [0.5, 3.0, 1.0], [0.0, -1.0, 4.0]]);
        let prod = a.mul_mat(&a.inverse().unwrap());
        for r in 0..3 {
            for c in 0..3 {
                let e = if r == c { 1.0 } else { 0.0 };
                assert!((prod.get(r, c) - e).abs() < 1e-12);
            }
        }
    }
}
