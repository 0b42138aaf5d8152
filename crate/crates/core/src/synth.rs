//! Synthetic scenes whose silhouettes are exact splat footprints of a known
//! ground-truth cloud.

use std::f64::consts::TAU;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{project, Camera, Point3, PointCloud3, View};
use crate::real::{dot3, Real};
use crate::silhouette::Silhouette;

/// Image size the default focal length and splat radius refer to.
pub const REFERENCE_IMAGE_SIZE: usize = 64;
/// Focal length in pixels at the reference size; with the default ring
/// radius this makes a 0.8-wide object span half the image.
pub const REFERENCE_FOCAL: f64 = 80.0;
pub const REFERENCE_SPLAT_RADIUS: f64 = 1.5;
pub const DEFAULT_RING_RADIUS: f64 = 2.0;

pub const SQUARE_HALF_EXTENT: f64 = 0.4;
pub const BAR_HALF_LENGTH: f64 = 0.6;
pub const BAR_CROSS_SECTION: f64 = 0.05;
pub const HELIX_RADIUS: f64 = 0.35;
pub const HELIX_HALF_HEIGHT: f64 = 0.6;
pub const HELIX_TURNS: f64 = 2.0;
pub const HELIX_THICKNESS: f64 = 0.03;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    /// Planar lamina `[-0.4, 0.4]^2 x {0}`.
    Square,
    /// Two thin perpendicular bars crossing at the origin, one along x and
    /// one along y.
    TwoBars,
    /// Two-turn helix around the y axis, thickened.
    Helix,
    FromFile(PathBuf),
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeKind::Square => f.write_str("square"),
            ShapeKind::TwoBars => f.write_str("two-bars"),
            ShapeKind::Helix => f.write_str("helix"),
            ShapeKind::FromFile(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "square" => Ok(ShapeKind::Square),
            "two-bars" | "twobars" | "bars" => Ok(ShapeKind::TwoBars),
            "helix" => Ok(ShapeKind::Helix),
            other => match other.strip_prefix("file:") {
                Some(path) => Ok(ShapeKind::FromFile(PathBuf::from(&s[s.len() - path.len()..]))),
                None => Err(Error::InvalidConfig(format!("unknown shape {s:?}"))),
            },
        }
    }
}

/// Focal length that keeps the object's image footprint constant across
/// resolutions.
pub fn focal_for(image_size: usize) -> f64 {
    REFERENCE_FOCAL * image_size as f64 / REFERENCE_IMAGE_SIZE as f64
}

pub fn splat_radius_for(image_size: usize) -> f64 {
    REFERENCE_SPLAT_RADIUS * image_size as f64 / REFERENCE_IMAGE_SIZE as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneParams {
    pub points: usize,
    pub views: usize,
    pub image_size: usize,
    pub ring_radius: f64,
    pub focal: f64,
    pub splat_radius: f64,
    pub seed: u64,
}

impl SceneParams {
    /// Defaults scaled to `image_size`: 2048 points, 5 views.
    pub fn at_resolution(image_size: usize) -> Self {
        Self {
            points: 2048,
            views: 5,
            image_size,
            ring_radius: DEFAULT_RING_RADIUS,
            focal: focal_for(image_size),
            splat_radius: splat_radius_for(image_size),
            seed: 0,
        }
    }
}

impl Default for SceneParams {
    fn default() -> Self {
        Self::at_resolution(REFERENCE_IMAGE_SIZE)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec<T> {
    pub gt_cloud: PointCloud3<T>,
    pub views: Vec<View<T>>,
    pub splat_radius: T,
}

impl<T: Real> SceneSpec<T> {
    pub fn new(gt_cloud: PointCloud3<T>, views: Vec<View<T>>, splat_radius: T) -> Result<Self> {
        if !(splat_radius > T::zero()) {
            return Err(Error::InvalidConfig("splat radius must be positive".into()));
        }
        for v in &views {
            project(&gt_cloud, &v.camera)?;
        }
        Ok(Self { gt_cloud, views, splat_radius })
    }

    pub fn silhouettes(&self) -> Result<Vec<Silhouette<T>>> {
        self.views
            .iter()
            .map(|v| splat_silhouette(&self.gt_cloud, &v.camera, v.width, v.height, self.splat_radius))
            .collect()
    }

    /// Same poses re-imaged at `image_size` (square images), with focal
    /// length and splat radius scaled proportionally.
    pub fn rescaled(&self, image_size: usize) -> Result<Self> {
        let mut views = Vec::with_capacity(self.views.len());
        let mut factor = T::one();
        for v in &self.views {
            factor = T::from_usize_lossy(image_size) / T::from_usize_lossy(v.width);
            views.push(View {
                camera: v.camera.scaled_image(factor)?,
                width: image_size,
                height: image_size * v.height / v.width,
            });
        }
        Self::new(self.gt_cloud.clone(), views, self.splat_radius * factor)
    }
}

/// `n` cameras evenly spaced on the horizontal circle of `radius` around the
/// origin, looking at it with y up. Camera `i` sits at angle `2 pi i / n`
/// measured from +x toward +z.
pub fn ring_cameras<T: Real>(n: usize, radius: T, focal: T, image_size: usize) -> Result<Vec<View<T>>> {
    if n == 0 {
        return Err(Error::InvalidConfig("ring needs at least one view".into()));
    }
    if !(radius > T::zero()) || !(focal > T::zero()) || image_size == 0 {
        return Err(Error::InvalidConfig("ring radius, focal length and image size must be positive".into()));
    }
    let c = T::from_usize_lossy(image_size) * T::lit(0.5);
    (0..n)
        .map(|i| {
            let angle = T::lit(TAU * i as f64 / n as f64);
            let eye = [radius * angle.cos(), T::zero(), radius * angle.sin()];
            let camera = Camera::look_at(eye, [T::zero(); 3], [T::zero(), T::one(), T::zero()], focal, [c, c], i)?;
            Ok(View { camera, width: image_size, height: image_size })
        })
        .collect()
}

/// Binary silhouette: pixels whose center is within `radius` of a projection.
pub fn splat_silhouette<T: Real>(
    cloud: &PointCloud3<T>,
    cam: &Camera<T>,
    width: usize,
    height: usize,
    radius: T,
) -> Result<Silhouette<T>> {
    let proj = project(cloud, cam)?;
    let mut values = vec![T::zero(); width * height];
    let half = T::lit(0.5);
    let r2 = radius * radius;
    let span = |lo: T, n: usize| -> Option<usize> {
        if lo < T::zero() {
            Some(0)
        } else {
            lo.to_usize().filter(|v| *v < n)
        }
    };
    for q in proj.points() {
        let (Some(c0), Some(r0)) = (span((q[0] - radius - half).floor(), width), span((q[1] - radius - half).floor(), height))
        else {
            continue;
        };
        let c1 = (q[0] + radius - half).ceil();
        let r1 = (q[1] + radius - half).ceil();
        if c1 < T::zero() || r1 < T::zero() {
            continue;
        }
        let c1 = c1.to_usize().unwrap_or(usize::MAX).min(width - 1);
        let r1 = r1.to_usize().unwrap_or(usize::MAX).min(height - 1);
        for row in r0..=r1 {
            let dy = T::from_usize_lossy(row) + half - q[1];
            for col in c0..=c1 {
                let dx = T::from_usize_lossy(col) + half - q[0];
                if dx * dx + dy * dy <= r2 {
                    values[row * width + col] = T::one();
                }
            }
        }
    }
    Silhouette::new(width, height, values)
}

fn lit3<T: Real>(p: [f64; 3]) -> Point3<T> {
    [T::lit(p[0]), T::lit(p[1]), T::lit(p[2])]
}

fn square_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let e = SQUARE_HALF_EXTENT;
    (0..n).map(|_| [rng.gen_range(-e..=e), rng.gen_range(-e..=e), 0.0]).collect()
}

fn two_bar_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let h = BAR_CROSS_SECTION / 2.0;
    let l = BAR_HALF_LENGTH;
    (0..n)
        .map(|i| {
            let along = rng.gen_range(-l..=l);
            let a = rng.gen_range(-h..=h);
            let b = rng.gen_range(-h..=h);
            if i % 2 == 0 {
                [along, a, b]
            } else {
                [a, along, b]
            }
        })
        .collect()
}

fn helix_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| {
            let t: f64 = rng.gen();
            let angle = TAU * HELIX_TURNS * t;
            let center = [
                HELIX_RADIUS * angle.cos(),
                -HELIX_HALF_HEIGHT + 2.0 * HELIX_HALF_HEIGHT * t,
                HELIX_RADIUS * angle.sin(),
            ];
            // uniform offset inside the thickening ball
            let offset = loop {
                let o = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                if dot3(&o, &o) <= 1.0f64 {
                    break o;
                }
            };
            std::array::from_fn(|a| center[a] + HELIX_THICKNESS * offset[a])
        })
        .collect()
}

/// Centers a loaded cloud on its bounding-box midpoint and shrinks it into
/// the unit ball when it does not already fit.
pub fn normalize_cloud<T: Real>(cloud: &PointCloud3<T>) -> Result<PointCloud3<T>> {
    let pts = cloud.points();
    let mut lo = pts[0];
    let mut hi = pts[0];
    for p in pts {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let mid: Point3<T> = std::array::from_fn(|a| (lo[a] + hi[a]) * T::lit(0.5));
    let centered: Vec<Point3<T>> = pts.iter().map(|p| std::array::from_fn(|a| p[a] - mid[a])).collect();
    let radius = centered.iter().map(|p| dot3(p, p).sqrt()).fold(T::zero(), T::max);
    let scale = if radius > T::one() { T::one() / radius } else { T::one() };
    PointCloud3::new(
        centered
            .into_iter()
            .map(|p| std::array::from_fn(|a| p[a] * scale))
            .collect(),
    )
}

/// Ground-truth cloud for `shape`; `params.points` is ignored for files.
pub fn make_cloud<T: Real>(shape: &ShapeKind, points: usize, seed: u64) -> Result<PointCloud3<T>> {
    if points == 0 && !matches!(shape, ShapeKind::FromFile(_)) {
        return Err(Error::InvalidConfig("scene needs at least one point".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = match shape {
        ShapeKind::Square => square_points(points, &mut rng),
        ShapeKind::TwoBars => two_bar_points(points, &mut rng),
        ShapeKind::Helix => helix_points(points, &mut rng),
        ShapeKind::FromFile(path) => return normalize_cloud(&crate::io::read_cloud::<T>(path)?),
    };
    PointCloud3::new(raw.into_iter().map(lit3).collect())
}

pub fn make_scene<T: Real>(shape: &ShapeKind, params: &SceneParams) -> Result<SceneSpec<T>> {
    let gt = make_cloud(shape, params.points, params.seed)?;
    let views = ring_cameras(params.views, T::lit(params.ring_radius), T::lit(params.focal), params.image_size)?;
    SceneSpec::new(gt, views, T::lit(params.splat_radius))
}
