//! Point types, the fused pinhole camera and perspective projection.
//!
//! Image coordinates are continuous pixel coordinates: origin at the top-left
//! corner, x to the right, y downward, one unit per pixel. Pixel `(a, b)` covers
//! `[a, a+1) x [b, b+1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{cross3, dot3, normalize3, Real};

pub type Point2<T> = [T; 2];
pub type Point3<T> = [T; 3];

/// Smallest admissible homogeneous depth.
pub const DEPTH_EPSILON: f64 = 1e-8;

/// An ordered, nonempty set of finite 3D points. Index `j` names the same
/// logical point for the lifetime of an optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud3<T> {
    points: Vec<Point3<T>>,
}

impl<T: Real> PointCloud3<T> {
    pub fn new(points: Vec<Point3<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        if let Some(j) = points
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidConfig(format!("point {j} is not finite")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    pub(crate) fn points_mut(&mut self) -> &mut [Point3<T>] {
        &mut self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point3<T>> {
        self.points
    }
}

/// An irregular set of 2D points in pixel coordinates. Points are not clipped
/// to the image.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSet2<T> {
    points: Vec<Point2<T>>,
}

impl<T: Real> PointSet2<T> {
    pub fn new(points: Vec<Point2<T>>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[Point2<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point2<T>> {
        self.points
    }
}

impl<T: Real> From<Vec<Point2<T>>> for PointSet2<T> {
    fn from(points: Vec<Point2<T>>) -> Self {
        Self::new(points)
    }
}

/// Fused intrinsics and extrinsics, `[q 1]^T ~ C [p 1]^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera<T> {
    matrix: [[T; 4]; 3],
    view_id: usize,
}

impl<T: Real> Camera<T> {
    /// Validates finiteness and a nonsingular left 3x3 block.
    pub fn new(matrix: [[T; 4]; 3], view_id: usize) -> Result<Self> {
        if !matrix.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::InvalidCamera(format!(
                "view {view_id}: matrix has non-finite entries"
            )));
        }
        let rows: [Point3<T>; 3] =
            std::array::from_fn(|r| [matrix[r][0], matrix[r][1], matrix[r][2]]);
        let det = dot3(&rows[0], &cross3(&rows[1], &rows[2]));
        if det == T::zero() || !det.is_finite() {
            return Err(Error::InvalidCamera(format!(
                "view {view_id}: left 3x3 block is singular"
            )));
        }
        Ok(Self { matrix, view_id })
    }

    /// `K [R | t]` with square pixels and zero skew.
    pub fn from_intrinsics(
        focal: T,
        principal: Point2<T>,
        rotation: [[T; 3]; 3],
        translation: Point3<T>,
        view_id: usize,
    ) -> Result<Self> {
        let k = [
            [focal, T::zero(), principal[0]],
            [T::zero(), focal, principal[1]],
            [T::zero(), T::zero(), T::one()],
        ];
        let mut m = [[T::zero(); 4]; 3];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, out) in row.iter_mut().enumerate() {
                *out = (0..3)
                    .map(|i| {
                        let rt = if c < 3 { rotation[i][c] } else { translation[i] };
                        k[r][i] * rt
                    })
                    .sum();
            }
        }
        Self::new(m, view_id)
    }

    /// Camera at `eye` looking at `target`. Camera axes follow the image
    /// frame: x right, y down (opposite to `up`), z forward.
    pub fn look_at(
        eye: Point3<T>,
        target: Point3<T>,
        up: Point3<T>,
        focal: T,
        principal: Point2<T>,
        view_id: usize,
    ) -> Result<Self> {
        let forward = normalize3(&[target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]]);
        let right = cross3(&forward, &up);
        if dot3(&right, &right) <= T::epsilon() {
            return Err(Error::InvalidCamera(format!(
                "view {view_id}: up vector is parallel to the viewing direction"
            )));
        }
        let right = normalize3(&right);
        let down = cross3(&forward, &right);
        let rotation = [right, down, forward];
        let translation: Point3<T> = std::array::from_fn(|r| -dot3(&rotation[r], &eye));
        Self::from_intrinsics(focal, principal, rotation, translation, view_id)
    }

    pub fn matrix(&self) -> &[[T; 4]; 3] {
        &self.matrix
    }

    pub fn view_id(&self) -> usize {
        self.view_id
    }

    /// Same pose with the image plane scaled by `factor` (focal length and
    /// principal point both scale), e.g. when changing image resolution.
    pub fn scaled_image(&self, factor: T) -> Result<Self> {
        let mut m = self.matrix;
        for row in m.iter_mut().take(2) {
            for v in row.iter_mut() {
                *v *= factor;
            }
        }
        Self::new(m, self.view_id)
    }

    #[inline]
    fn homogeneous(&self, p: &Point3<T>) -> Point3<T> {
        std::array::from_fn(|r| {
            let m = &self.matrix[r];
            m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + m[3]
        })
    }

    /// Homogeneous depth `row3 . [p 1]`.
    pub fn depth(&self, p: &Point3<T>) -> T {
        self.homogeneous(p)[2]
    }

    /// Projects one point; `index` labels the point in a depth error.
    pub fn project_point(&self, p: &Point3<T>, index: usize) -> Result<Point2<T>> {
        let [a, b, w] = self.homogeneous(p);
        self.check_depth(w, index)?;
        Ok([a / w, b / w])
    }

    /// Jacobian of the perspective map at `p`:
    /// `[(w r1 - a r3) / w^2, (w r2 - b r3) / w^2]`.
    pub fn project_jacobian(&self, p: &Point3<T>, index: usize) -> Result<[[T; 3]; 2]> {
        let [a, b, w] = self.homogeneous(p);
        self.check_depth(w, index)?;
        let w2 = w * w;
        let m = &self.matrix;
        Ok([
            std::array::from_fn(|c| (w * m[0][c] - a * m[2][c]) / w2),
            std::array::from_fn(|c| (w * m[1][c] - b * m[2][c]) / w2),
        ])
    }

    /// Jacobian-transpose times a 2D vector, `J^T g`, without forming `J`.
    #[inline]
    pub(crate) fn pullback(&self, p: &Point3<T>, g: &Point2<T>, index: usize) -> Result<Point3<T>> {
        let [a, b, w] = self.homogeneous(p);
        self.check_depth(w, index)?;
        let inv = T::one() / w;
        let qx = a * inv;
        let qy = b * inv;
        let m = &self.matrix;
        Ok(std::array::from_fn(|c| {
            inv * (g[0] * (m[0][c] - qx * m[2][c]) + g[1] * (m[1][c] - qy * m[2][c]))
        }))
    }

    #[inline]
    fn check_depth(&self, w: T, index: usize) -> Result<()> {
        if w > T::lit(DEPTH_EPSILON) {
            Ok(())
        } else {
            Err(Error::Depth {
                view: self.view_id,
                point: index,
                depth: w.as_f64(),
            })
        }
    }
}

/// A camera together with the size of the image it observes.
#[derive(Clone, Debug, PartialEq)]
pub struct View<T> {
    pub camera: Camera<T>,
    pub width: usize,
    pub height: usize,
}

/// Projects every point of `cloud`, preserving order.
pub fn project<T: Real>(cloud: &PointCloud3<T>, cam: &Camera<T>) -> Result<PointSet2<T>> {
    cloud
        .points()
        .iter()
        .enumerate()
        .map(|(j, p)| cam.project_point(p, j))
        .collect::<Result<Vec<_>>>()
        .map(PointSet2::new)
}

/// `d q / d p` for a single point.
pub fn project_jacobian<T: Real>(p: &Point3<T>, cam: &Camera<T>) -> Result<[[T; 3]; 2]> {
    cam.project_jacobian(p, 0)
}

/// Serialized camera layout used by the camera file.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CameraRecord {
    pub view_id: usize,
    pub width: usize,
    pub height: usize,
    pub matrix: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

impl<T: Real> View<T> {
    pub fn to_record(&self, image: Option<String>) -> CameraRecord {
        CameraRecord {
            view_id: self.camera.view_id,
            width: self.width,
            height: self.height,
            matrix: self
                .camera
                .matrix
                .iter()
                .flatten()
                .map(|v| v.as_f64())
                .collect(),
            image,
        }
    }

    pub fn from_record(rec: &CameraRecord) -> Result<Self> {
        if rec.matrix.len() != 12 {
            return Err(Error::InvalidCamera(format!(
                "view {}: expected 12 matrix entries, found {}",
                rec.view_id,
                rec.matrix.len()
            )));
        }
        if rec.width == 0 || rec.height == 0 {
            return Err(Error::InvalidCamera(format!(
                "view {}: image size must be positive",
                rec.view_id
            )));
        }
        let m = std::array::from_fn(|r| std::array::from_fn(|c| T::lit(rec.matrix[r * 4 + c])));
        Ok(Self {
            camera: Camera::new(m, rec.view_id)?,
            width: rec.width,
            height: rec.height,
        })
    }
}
