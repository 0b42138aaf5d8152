//! Reconstruction metrics: 3D Chamfer distance and voxel IoU, both reported
//! multiplied by 100.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud3};
use crate::real::{dist2_3d, Real};

pub const REPORT_SCALE: f64 = 100.0;
pub const DEFAULT_VOXEL_RESOLUTION: usize = 32;
/// Padding added to each side of the default bounds, as a fraction of the
/// largest extent.
pub const BOUNDS_PADDING: f64 = 0.02;

fn mean_min_dist2<T: Real>(from: &[Point3<T>], to: &[Point3<T>]) -> T {
    let mins: Vec<T> = from
        .par_iter()
        .map(|p| to.iter().map(|q| dist2_3d(p, q)).fold(T::infinity(), T::min))
        .collect();
    mins.into_iter().fold(T::zero(), |acc, v| acc + v) / T::from_usize_lossy(from.len())
}

/// Symmetric mean of squared nearest-neighbor distances, times 100.
pub fn chamfer_3d<T: Real>(a: &PointCloud3<T>, b: &PointCloud3<T>) -> Result<T> {
    chamfer_3d_points(a.points(), b.points())
}

pub fn chamfer_3d_points<T: Real>(a: &[Point3<T>], b: &[Point3<T>]) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok((mean_min_dist2(a, b) + mean_min_dist2(b, a)) * T::lit(REPORT_SCALE))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds3<T> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Real> Bounds3<T> {
    /// Bounding box of all given points, `None` when there are none.
    pub fn enclosing<'a>(points: impl IntoIterator<Item = &'a Point3<T>>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Self { min: first, max: first };
        for p in it {
            for a in 0..3 {
                b.min[a] = b.min[a].min(p[a]);
                b.max[a] = b.max[a].max(p[a]);
            }
        }
        Some(b)
    }

    /// Grows every side by `fraction` of the largest extent (or by
    /// `fraction` itself when the box is a single point).
    pub fn padded(&self, fraction: T) -> Self {
        let largest = (0..3)
            .map(|a| self.max[a] - self.min[a])
            .fold(T::zero(), T::max);
        let pad = if largest > T::zero() { largest * fraction } else { fraction };
        Self {
            min: std::array::from_fn(|a| self.min[a] - pad),
            max: std::array::from_fn(|a| self.max[a] + pad),
        }
    }
}

/// Union bounding box of both clouds, padded by 2%.
pub fn default_bounds<T: Real>(a: &PointCloud3<T>, b: &PointCloud3<T>) -> Bounds3<T> {
    Bounds3::enclosing(a.points().iter().chain(b.points()))
        .expect("point clouds are nonempty")
        .padded(T::lit(BOUNDS_PADDING))
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid<T> {
    resolution: usize,
    occupancy: Vec<bool>,
    bounds: Bounds3<T>,
}

impl<T: Real> VoxelGrid<T> {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn bounds(&self) -> &Bounds3<T> {
        &self.bounds
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|o| **o).count()
    }

    #[inline]
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.resolution + j) * self.resolution + k
    }

    pub fn is_occupied(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupancy[self.linear_index(i, j, k)]
    }

    /// Cell of `p`, or `None` outside the bounds. Points on the upper face
    /// belong to the last cell.
    pub fn cell_of(&self, p: &Point3<T>) -> Option<[usize; 3]> {
        let r = self.resolution;
        let mut out = [0; 3];
        for a in 0..3 {
            let (lo, hi) = (self.bounds.min[a], self.bounds.max[a]);
            if !(p[a] >= lo && p[a] <= hi) {
                return None;
            }
            let ext = hi - lo;
            out[a] = if ext > T::zero() {
                let f = ((p[a] - lo) / ext * T::from_usize_lossy(r)).floor();
                f.to_usize().unwrap_or(0).min(r - 1)
            } else {
                0
            };
        }
        Some(out)
    }
}

pub fn voxelize<T: Real>(points: &[Point3<T>], bounds: Bounds3<T>, resolution: usize) -> VoxelGrid<T> {
    assert!(resolution > 0, "voxel resolution must be positive");
    let mut grid = VoxelGrid {
        resolution,
        occupancy: vec![false; resolution * resolution * resolution],
        bounds,
    };
    for p in points {
        if let Some([i, j, k]) = grid.cell_of(p) {
            let idx = grid.linear_index(i, j, k);
            grid.occupancy[idx] = true;
        }
    }
    grid
}

/// Intersection over union times 100; 100 when both grids are empty.
pub fn iou<T: Real>(g1: &VoxelGrid<T>, g2: &VoxelGrid<T>) -> Result<T> {
    if g1.resolution != g2.resolution || g1.bounds != g2.bounds {
        return Err(Error::ShapeMismatch);
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (a, b) in g1.occupancy.iter().zip(&g2.occupancy) {
        inter += usize::from(*a && *b);
        union += usize::from(*a || *b);
    }
    let scale = T::lit(REPORT_SCALE);
    if union == 0 {
        return Ok(scale);
    }
    Ok(T::from_usize_lossy(inter) / T::from_usize_lossy(union) * scale)
}

/// CD and IoU at the default resolution over the default bounds.
pub fn compare_clouds<T: Real>(a: &PointCloud3<T>, b: &PointCloud3<T>) -> Result<(T, T)> {
    let cd = chamfer_3d(a, b)?;
    let bounds = default_bounds(a, b);
    let ga = voxelize(a.points(), bounds, DEFAULT_VOXEL_RESOLUTION);
    let gb = voxelize(b.points(), bounds, DEFAULT_VOXEL_RESOLUTION);
    Ok((cd, iou(&ga, &gb)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(p: Vec<Point3<f64>>) -> PointCloud3<f64> {
        PointCloud3::new(p).unwrap()
    }

    fn unit_bounds() -> Bounds3<f64> {
        Bounds3 { min: [0.0; 3], max: [1.0; 3] }
    }

    #[test]
    fn chamfer_hand_values() {
        let a = cloud(vec![[0.0, 0.0, 0.0]]);
        let b = cloud(vec![[0.0, 0.0, 1.0]]);
        assert_eq!(chamfer_3d(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer_3d(&a, &b).unwrap(), 200.0);
        assert!(chamfer_3d_points::<f64>(&[], &[[0.0; 3]]).is_err());
    }

    #[test]
    fn chamfer_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let na = rng.gen_range(1..50);
            let nb = rng.gen_range(1..50);
            let a: Vec<Point3<f64>> = (0..na).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
            let b: Vec<Point3<f64>> = (0..nb).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
            let mut ab = 0.0;
            for p in &a {
                let mut best = f64::MAX;
                for q in &b {
                    let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                    if d < best {
                        best = d;
                    }
                }
                ab += best;
            }
            let mut ba = 0.0;
            for q in &b {
                let mut best = f64::MAX;
                for p in &a {
                    let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                    if d < best {
                        best = d;
                    }
                }
                ba += best;
            }
            let expect = 100.0 * (ab / na as f64 + ba / nb as f64);
            let got = chamfer_3d_points(&a, &b).unwrap();
            assert!((got - expect).abs() <= 1e-12 * expect.max(1.0));
            assert!((got - chamfer_3d_points(&b, &a).unwrap()).abs() <= 1e-12 * expect.max(1.0));
        }
    }

    #[test]
    fn voxel_center_and_upper_face() {
        let g = voxelize(&[[0.5, 0.5, 0.5]], unit_bounds(), 32);
        assert_eq!(g.occupied_count(), 1);
        assert!(g.is_occupied(16, 16, 16));
        let g = voxelize(&[[1.0, 1.0, 0.0]], unit_bounds(), 32);
        assert!(g.is_occupied(31, 31, 0));
        let g = voxelize(&[[1.5, 0.5, 0.5]], unit_bounds(), 32);
        assert_eq!(g.occupied_count(), 0);
    }

    #[test]
    fn empty_cloud_is_empty_grid() {
        let g = voxelize::<f64>(&[], unit_bounds(), 32);
        assert_eq!(g.occupancy().len(), 32 * 32 * 32);
        assert_eq!(g.occupied_count(), 0);
        assert_eq!(iou(&g, &g).unwrap(), 100.0);
    }

    #[test]
    fn dense_cloud_fills_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Point3<f64>> = (0..1_000_000).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let g = voxelize(&pts, unit_bounds(), 32);
        assert!(g.occupied_count() as f64 / 32768.0 > 0.99);
    }

    #[test]
    fn iou_cases() {
        let b = unit_bounds();
        let pts: Vec<Point3<f64>> = (0..8).map(|i| [i as f64 / 8.0 + 0.01, 0.5, 0.5]).collect();
        let all = voxelize(&pts, b, 8);
        let half = voxelize(&pts[..4], b, 8);
        let other = voxelize(&pts[4..], b, 8);
        assert_eq!(iou(&all, &all).unwrap(), 100.0);
        assert_eq!(iou(&half, &other).unwrap(), 0.0);
        assert_eq!(iou(&half, &all).unwrap(), 50.0);
        assert_eq!(iou(&all, &half).unwrap(), 50.0);
        let coarse = voxelize(&pts, b, 4);
        assert!(matches!(iou(&all, &coarse), Err(Error::ShapeMismatch)));
    }

    #[test]
    fn voxelize_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Point3<f64>> = (0..200).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let small = voxelize(&pts[..100], unit_bounds(), 16);
        let big = voxelize(&pts, unit_bounds(), 16);
        assert!(small.occupancy().iter().zip(big.occupancy()).all(|(s, b)| !*s || *b));
    }

    #[test]
    fn default_bounds_pad_flat_clouds() {
        let a = cloud(vec![[-0.4, -0.4, 0.0], [0.4, 0.4, 0.0]]);
        let b = default_bounds(&a, &a);
        assert!((b.min[2] + 0.016).abs() < 1e-12 && (b.max[2] - 0.016).abs() < 1e-12);
        let (cd, iou) = compare_clouds(&a, &a).unwrap();
        assert_eq!((cd, iou), (0.0, 100.0));
    }
}
