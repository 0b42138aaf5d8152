//! Occupancy images with bilinear interpolation.

use crate::error::{Error, Result};
use crate::real::Real;

/// Values at or above this count as fully inside when measuring area.
pub const AREA_THRESHOLD: f64 = 0.999;

/// A row-major occupancy grid with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Silhouette<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Real> Silhouette<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("silhouette must have positive size".into()));
        }
        if values.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "silhouette {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(i) = values
            .iter()
            .position(|v| !(*v >= T::zero() && *v <= T::one()))
        {
            return Err(Error::InvalidConfig(format!(
                "silhouette value at index {i} is outside [0, 1]"
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a grid by evaluating `f(column, row)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                values.push(f(col, row));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn pixel(&self, col: usize, row: usize) -> T {
        self.values[row * self.width + col]
    }

    /// Bilinear interpolation with pixel `(a, b)` sampled at its center
    /// `(a + 0.5, b + 0.5)`. Border pixels extend up to the image edge; any
    /// query outside `[0, W] x [0, H]` reads as background (0).
    pub fn interp(&self, x: T, y: T) -> T {
        let w = T::from_usize_lossy(self.width);
        let h = T::from_usize_lossy(self.height);
        if !(x >= T::zero() && x <= w && y >= T::zero() && y <= h) {
            return T::zero();
        }
        let half = T::lit(0.5);
        let fx = x - half;
        let fy = y - half;
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let clamp = |v: T, n: usize| -> usize {
            if v < T::zero() {
                0
            } else {
                v.to_usize().unwrap_or(usize::MAX).min(n - 1)
            }
        };
        let c0 = clamp(x0, self.width);
        let c1 = clamp(x0 + T::one(), self.width);
        let r0 = clamp(y0, self.height);
        let r1 = clamp(y0 + T::one(), self.height);
        let top = self.pixel(c0, r0) * (T::one() - tx) + self.pixel(c1, r0) * tx;
        let bottom = self.pixel(c0, r1) * (T::one() - tx) + self.pixel(c1, r1) * tx;
        top * (T::one() - ty) + bottom * ty
    }

    /// Number of pixels whose value is (numerically) 1.
    pub fn area(&self) -> T {
        let cut = T::lit(AREA_THRESHOLD);
        T::from_usize_lossy(self.values.iter().filter(|v| **v >= cut).count())
    }
}
