//! Dense per-pixel maps: RGB images, scalar maps, and boolean masks.
//!
//! Continuous pixel coordinates place the center of pixel `(i, j)` at
//! `(i + 0.5, j + 0.5)`; row 0 is the top of the image.

use std::ops::{Add, Mul};

use rayon::prelude::*;

use crate::math::Rgb;
use crate::num::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Map<P> {
    width: usize,
    height: usize,
    data: Vec<P>,
}

pub type RgbMap<T> = Map<Rgb<T>>;
pub type ScalarMap<T> = Map<T>;
pub type Mask = Map<bool>;

/// One bilinear tap: integer pixel coordinates and its weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tap<T> {
    pub x: usize,
    pub y: usize,
    pub weight: T,
}

impl<P: Clone> Map<P> {
    pub fn filled(width: usize, height: usize, value: P) -> Self {
        Map { width, height, data: vec![value; width * height] }
    }

    /// Wraps row-major data; `None` if the length does not match.
    pub fn from_vec(width: usize, height: usize, data: Vec<P>) -> Option<Self> {
        (data.len() == width * height).then_some(Map { width, height, data })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn same_size<Q>(&self, other: &Map<Q>) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &P {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: P) {
        self.data[y * self.width + x] = value;
    }

    #[inline]
    pub fn pixels(&self) -> &[P] {
        &self.data
    }

    #[inline]
    pub fn pixels_mut(&mut self) -> &mut [P] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<P> {
        self.data
    }

    pub fn map<Q>(&self, f: impl Fn(&P) -> Q) -> Map<Q> {
        Map { width: self.width, height: self.height, data: self.data.iter().map(f).collect() }
    }

    /// Pixel containing continuous coordinate `(u, v)`, if inside.
    #[inline]
    pub fn pixel_at<T: Real>(&self, u: T, v: T) -> Option<(usize, usize)> {
        if !(u >= T::zero() && v >= T::zero()) {
            return None;
        }
        let (x, y) = (u.floor().to_usize()?, v.floor().to_usize()?);
        (x < self.width && y < self.height).then_some((x, y))
    }

    #[inline]
    pub fn nearest<T: Real>(&self, u: T, v: T) -> Option<&P> {
        self.pixel_at(u, v).map(|(x, y)| self.get(x, y))
    }
}

impl<P: Clone + Send + Sync> Map<P> {
    /// Builds a map by evaluating `f(x, y)` for every pixel in parallel.
    pub fn from_fn_par(width: usize, height: usize, f: impl Fn(usize, usize) -> P + Sync) -> Self {
        let data = (0..width * height).into_par_iter().map(|i| f(i % width, i / width)).collect();
        Map { width, height, data }
    }
}

/// The four bilinear taps around continuous coordinate `(u, v)` with edge clamping.
#[inline]
pub fn bilinear_taps<T: Real>(width: usize, height: usize, u: T, v: T) -> [Tap<T>; 4] {
    let half = T::lit(0.5);
    let fx = (u - half).clamp_to(T::zero(), T::from_usize_lossy(width - 1));
    let fy = (v - half).clamp_to(T::zero(), T::from_usize_lossy(height - 1));
    let x0 = fx.floor().to_usize().unwrap_or(0).min(width - 1);
    let y0 = fy.floor().to_usize().unwrap_or(0).min(height - 1);
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let tx = fx - T::from_usize_lossy(x0);
    let ty = fy - T::from_usize_lossy(y0);
    let (sx, sy) = (T::one() - tx, T::one() - ty);
    [
        Tap { x: x0, y: y0, weight: sx * sy },
        Tap { x: x1, y: y0, weight: tx * sy },
        Tap { x: x0, y: y1, weight: sx * ty },
        Tap { x: x1, y: y1, weight: tx * ty },
    ]
}

impl<P> Map<P>
where
    P: Copy + Add<Output = P>,
{
    /// Bilinear interpolation at continuous coordinates, clamped at the border.
    #[inline]
    pub fn bilinear<T: Real>(&self, u: T, v: T) -> P
    where
        P: Mul<T, Output = P>,
    {
        let taps = bilinear_taps(self.width, self.height, u, v);
        self.combine_taps(&taps, |p| p)
    }

    /// Weighted sum over `taps` of `f(pixel)`, in tap order.
    #[inline]
    pub fn combine_taps<T: Real, Q>(&self, taps: &[Tap<T>; 4], f: impl Fn(P) -> Q) -> Q
    where
        Q: Copy + Add<Output = Q> + Mul<T, Output = Q>,
    {
        let mut acc = f(*self.get(taps[0].x, taps[0].y)) * taps[0].weight;
        for t in &taps[1..] {
            acc = acc + f(*self.get(t.x, t.y)) * t.weight;
        }
        acc
    }
}

impl<T: Real> Map<Rgb<T>> {
    pub fn scale(&self, s: T) -> Self {
        self.map(|p| *p * s)
    }

    pub fn all_finite_nonnegative(&self) -> bool {
        self.data.iter().all(|p| p.is_finite() && p.min_component() >= T::zero())
    }
}
