//! Small fixed-size linear algebra: 3-vectors, 3×3 matrices, tangent frames.

use std::ops::{Add, AddAssign, Div, Index, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::num::Real;

/// A 3-vector. Doubles as an RGB triple.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

/// Linear RGB triple.
pub type Rgb<T> = Vec3<T>;

#[inline]
pub fn vec3<T>(x: T, y: T, z: T) -> Vec3<T> {
    Vec3 { x, y, z }
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::splat(T::zero())
    }

    #[inline]
    pub fn splat(v: T) -> Self {
        Vec3 { x: v, y: v, z: v }
    }

    pub fn from_f64(v: [f64; 3]) -> Self {
        Vec3::new(T::lit(v[0]), T::lit(v[1]), T::lit(v[2]))
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.x.as_f64(), self.y.as_f64(), self.z.as_f64()]
    }

    /// Converts between scalar types.
    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()), U::lit(self.z.as_f64()))
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn length_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn length(self) -> T {
        self.length_squared().sqrt()
    }

    /// Unit vector in the same direction; the zero vector stays zero.
    #[inline]
    pub fn normalized(self) -> Self {
        let len = self.length();
        if len > T::zero() {
            self / len
        } else {
            self
        }
    }

    #[inline]
    pub fn mul_elem(self, o: Self) -> Self {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    #[inline]
    pub fn div_elem(self, o: Self) -> Self {
        Vec3::new(self.x / o.x, self.y / o.y, self.z / o.z)
    }

    #[inline]
    pub fn map(self, f: impl Fn(T) -> T) -> Self {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }

    #[inline]
    pub fn min_elem(self, o: Self) -> Self {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn max_elem(self, o: Self) -> Self {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    #[inline]
    pub fn max_component(self) -> T {
        self.x.max(self.y).max(self.z)
    }

    #[inline]
    pub fn min_component(self) -> T {
        self.x.min(self.y).min(self.z)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn from_array(a: [T; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    /// Rec. 709 luminance.
    #[inline]
    pub fn luminance(self) -> T {
        T::lit(0.2126) * self.x + T::lit(0.7152) * self.y + T::lit(0.0722) * self.z
    }

    /// Mirror reflection of an incoming direction about `n`.
    #[inline]
    pub fn reflect(self, n: Self) -> Self {
        self - n * (T::lit(2.0) * self.dot(n))
    }

    /// Index of the axis with the largest magnitude component.
    pub fn max_axis(self) -> usize {
        if self.x >= self.y && self.x >= self.z {
            0
        } else if self.y >= self.z {
            1
        } else {
            2
        }
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> MulAssign<T> for Vec3<T> {
    #[inline]
    fn mul_assign(&mut self, s: T) {
        *self = *self * s;
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> std::iter::Sum for Vec3<T> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Vec3::zero(), |a, b| a + b)
    }
}

/// Row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<T> {
    pub rows: [[T; 3]; 3],
}

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Mat3 { rows: [[o, z, z], [z, o, z], [z, z, o]] }
    }

    pub fn from_rows(r0: Vec3<T>, r1: Vec3<T>, r2: Vec3<T>) -> Self {
        Mat3 { rows: [r0.to_array(), r1.to_array(), r2.to_array()] }
    }

    /// From nine row-major entries.
    pub fn from_row_major_f64(v: &[f64; 9]) -> Self {
        let mut rows = [[T::zero(); 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = T::lit(v[3 * i + j]);
            }
        }
        Mat3 { rows }
    }

    pub fn to_row_major_f64(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                out[3 * i + j] = self.rows[i][j].as_f64();
            }
        }
        out
    }

    #[inline]
    pub fn row(&self, i: usize) -> Vec3<T> {
        Vec3::from_array(self.rows[i])
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    /// Multiplies by the transpose without forming it.
    #[inline]
    pub fn mul_vec_transposed(&self, v: Vec3<T>) -> Vec3<T> {
        self.row(0) * v.x + self.row(1) * v.y + self.row(2) * v.z
    }

    pub fn transpose(&self) -> Self {
        let r = &self.rows;
        Mat3 {
            rows: [[r[0][0], r[1][0], r[2][0]], [r[0][1], r[1][1], r[2][1]], [r[0][2], r[1][2], r[2][2]]],
        }
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut rows = [[T::zero(); 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = (0..3).map(|k| self.rows[i][k] * o.rows[k][j]).sum();
            }
        }
        Mat3 { rows }
    }

    pub fn determinant(&self) -> T {
        self.row(0).dot(self.row(1).cross(self.row(2)))
    }

    /// Orthonormal with determinant +1, within `tol` per entry of `RᵀR − I`.
    pub fn is_rotation(&self, tol: T) -> bool {
        let rtr = self.transpose().mul_mat(self);
        let id = Self::identity();
        for i in 0..3 {
            for j in 0..3 {
                if (rtr.rows[i][j] - id.rows[i][j]).abs() > tol {
                    return false;
                }
            }
        }
        (self.determinant() - T::one()).abs() <= tol
    }
}

/// Orthonormal basis around a unit normal.
#[derive(Clone, Copy, Debug)]
pub struct Frame<T> {
    pub tangent: Vec3<T>,
    pub bitangent: Vec3<T>,
    pub normal: Vec3<T>,
}

impl<T: Real> Frame<T> {
    /// Branchless basis construction (Duff et al. 2017).
    pub fn from_normal(n: Vec3<T>) -> Self {
        let sign = if n.z >= T::zero() { T::one() } else { -T::one() };
        let a = -T::one() / (sign + n.z);
        let b = n.x * n.y * a;
        let tangent = Vec3::new(T::one() + sign * n.x * n.x * a, sign * b, -sign * n.x);
        let bitangent = Vec3::new(b, sign + n.y * n.y * a, -n.y);
        Frame { tangent, bitangent, normal: n }
    }

    #[inline]
    pub fn to_world(&self, local: Vec3<T>) -> Vec3<T> {
        self.tangent * local.x + self.bitangent * local.y + self.normal * local.z
    }

    #[inline]
    pub fn to_local(&self, world: Vec3<T>) -> Vec3<T> {
        Vec3::new(world.dot(self.tangent), world.dot(self.bitangent), world.dot(self.normal))
    }
}

/// Rotation whose rows are the camera axes for a camera at `eye` looking at
/// `target`; image y points down.
pub fn look_at_rotation<T: Real>(eye: Vec3<T>, target: Vec3<T>, up: Vec3<T>) -> Mat3<T> {
    let forward = (target - eye).normalized();
    let mut right = forward.cross(up);
    if right.length() < T::lit(1e-9) {
        right = forward.cross(Vec3::new(T::one(), T::zero(), T::zero()));
    }
    let right = right.normalized();
    let down = forward.cross(right);
    Mat3::from_rows(right, down, forward)
}
