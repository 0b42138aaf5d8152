//! Irregular point supervision drawn from a silhouette.
//!
//! [`sample_sas`] is the structure adaptive lattice sampler; the others are
//! the ablation alternatives (uniform rejection, pixel centers, pixels topped
//! up with random points, Poisson disk, and per-epoch random resampling).

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, PointSet2};
use crate::real::{dist2_2d, Real};
use crate::silhouette::Silhouette;

/// Max rejections per requested point before the random sampler gives up.
pub const REJECTIONS_PER_POINT: usize = 10_000;

const POISSON_ATTEMPTS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMethod {
    Sas,
    Random,
    Pixel,
    PixelPlusRandom,
    PoissonDisk,
    Dynamic,
}

impl SamplerMethod {
    pub const ALL: [SamplerMethod; 6] = [
        SamplerMethod::Random,
        SamplerMethod::Pixel,
        SamplerMethod::PixelPlusRandom,
        SamplerMethod::PoissonDisk,
        SamplerMethod::Dynamic,
        SamplerMethod::Sas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerMethod::Sas => "sas",
            SamplerMethod::Random => "random",
            SamplerMethod::Pixel => "pixel",
            SamplerMethod::PixelPlusRandom => "pixel-plus-random",
            SamplerMethod::PoissonDisk => "poisson",
            SamplerMethod::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for SamplerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sas" => Ok(SamplerMethod::Sas),
            "random" | "rand" => Ok(SamplerMethod::Random),
            "pixel" => Ok(SamplerMethod::Pixel),
            "pixel-plus-random" | "pixel+random" | "pix+ran" => Ok(SamplerMethod::PixelPlusRandom),
            "poisson" | "poisson-disk" => Ok(SamplerMethod::PoissonDisk),
            "dynamic" => Ok(SamplerMethod::Dynamic),
            other => Err(Error::InvalidConfig(format!("unknown sampler {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    /// Requested point count `K`.
    pub k_target: usize,
    /// A point is inside when its interpolated value exceeds this.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { method: SamplerMethod::Sas, k_target: 5000, threshold: 0.5, seed: 0 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_target == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold {} must lie in (0, 1)",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic child seed for `stream` (an epoch, a view index, ...):
/// `mix64(seed + golden * (stream + 1))` shifted right by one, so children
/// always fit in an `i64`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(stream.wrapping_add(1)))) >> 1
}

fn check_nonempty<T: Real>(s: &Silhouette<T>, cfg: &SamplerConfig) -> Result<()> {
    cfg.validate()?;
    if s.area() <= T::zero() {
        return Err(Error::EmptySilhouette);
    }
    Ok(())
}

/// Dispatches on `cfg.method`; `Dynamic` draws its epoch-0 set.
pub fn sample<T: Real>(s: &Silhouette<T>, cfg: &SamplerConfig) -> Result<PointSet2<T>> {
    match cfg.method {
        SamplerMethod::Sas => sample_sas(s, cfg),
        SamplerMethod::Random => sample_random(s, cfg),
        SamplerMethod::Pixel => sample_pixel(s, cfg),
        SamplerMethod::PixelPlusRandom => sample_pixel_plus_random(s, cfg),
        SamplerMethod::PoissonDisk => sample_poisson(s, cfg),
        SamplerMethod::Dynamic => resample_dynamic(s, cfg, 0),
    }
}

/// Lattice with stride `sqrt(A / K)` anchored at `(0, 0)`, keeping lattice
/// points whose interpolated value exceeds the threshold. Emits roughly `K`
/// points in row-major order; the seed is ignored.
pub fn sample_sas<T: Real>(s: &Silhouette<T>, cfg: &SamplerConfig) -> Result<PointSet2<T>> {
    check_nonempty(s, cfg)?;
    let stride = sas_stride(s, cfg.k_target);
    let thr = T::lit(cfg.threshold);
    let w = T::from_usize_lossy(s.width());
    let h = T::from_usize_lossy(s.height());
    let mut out = Vec::with_capacity(cfg.k_target + cfg.k_target / 4);
    let mut row = 0usize;
    loop {
        let y = T::from_usize_lossy(row) * stride;
        if y >= h {
            break;
        }
        let mut col = 0usize;
        loop {
            let x = T::from_usize_lossy(col) * stride;
            if x >= w {
                break;
            }
            if s.interp(x, y) > thr {
                out.push([x, y]);
            }
            col += 1;
        }
        row += 1;
    }
    Ok(PointSet2::new(out))
}

/// `sqrt(A / K)`.
pub fn sas_stride<T: Real>(s: &Silhouette<T>, k: usize) -> T {
    (s.area() / T::from_usize_lossy(k)).sqrt()
}

fn draw_inside<T: Real>(
    s: &Silhouette<T>,
    thr: T,
    count: usize,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Point2<T>>,
) -> Result<()> {
    let w = s.width() as f64;
    let h = s.height() as f64;
    let limit = REJECTIONS_PER_POINT.saturating_mul(count);
    let mut rejections = 0;
    let mut accepted = 0;
    while accepted < count {
        let p = [T::lit(rng.gen_range(0.0..w)), T::lit(rng.gen_range(0.0..h))];
        if s.interp(p[0], p[1]) > thr {
            out.push(p);
            accepted += 1;
        } else {
            rejections += 1;
            if rejections > limit {
                return Err(Error::NonTermination { rejections, accepted, requested: count });
            }
        }
    }
    Ok(())
}

/// Uniform rejection sampling until exactly `K` inside points are collected.
pub fn sample_random<T: Real>(s: &Silhouette<T>, cfg: &SamplerConfig) -> Result<PointSet2<T>> {
    check_nonempty(s, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.k_target);
    draw_inside(s, T::lit(cfg.threshold), cfg.k_target, &mut rng, &mut out)?;
    Ok(PointSet2::new(out))
}

fn inside_pixel_centers<T: Real>(s: &Silhouette<T>, thr: T) -> Vec<Point2<T>> {
    let half = T::lit(0.5);
    let mut out = Vec::new();
    for row in 0..s.height() {
        for col in 0..s.width() {
            if s.pixel(col, row) > thr {
                out.push([T::from_usize_lossy(col) + half, T::from_usize_lossy(row) + half]);
            }
        }
    }
    out
}

/// All inside pixel centers, cyclically repeated up to `K` when there are
/// fewer. Never truncates when there are more.
pub fn sample_pixel<T: Real>(s: &Silhouette<T>, cfg: &SamplerConfig) -> Result<PointSet2<T>> {
    check_nonempty(s, cfg)?;
    let centers = inside_pixel_centers(s, T::lit(cfg.threshold));
    if centers.is_empty() {
        return Err(Error::EmptySilhouette);
    }
    let n = centers.len().max(cfg.k_target);
    Ok(PointSet2::new(centers.iter().copied().cycle().take(n).collect()))
}

/// Inside pixel centers, with any deficit below `K` filled by random draws.
pub fn sample_pixel_plus_random<T: Real>(s: &Silhouette<T>, cfg: &SamplerConfig) -> Result<PointSet2<T>> {
    check_nonempty(s, cfg)?;
    let thr = T::lit(cfg.threshold);
    let mut out = inside_pixel_centers(s, thr);
    if out.is_empty() {
        return Err(Error::EmptySilhouette);
    }
    if out.len() < cfg.k_target {
        let deficit = cfg.k_target - out.len();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        draw_inside(s, thr, deficit, &mut rng, &mut out)?;
    }
    Ok(PointSet2::new(out))
}

/// Poisson disk radius `sqrt(A / K) / sqrt(2)`.
pub fn poisson_radius<T: Real>(s: &Silhouette<T>, k: usize) -> T {
    sas_stride(s, k) / T::lit(2.0).sqrt()
}

struct DiskGrid<T> {
    cell: f64,
    nx: usize,
    ny: usize,
    slots: Vec<Option<usize>>,
    points: Vec<Point2<T>>,
}

impl<T: Real> DiskGrid<T> {
    fn new(w: f64, h: f64, radius: f64) -> Self {
        let cell = radius / std::f64::consts::SQRT_2;
        let nx = ((w / cell).ceil() as usize).max(1);
        let ny = ((h / cell).ceil() as usize).max(1);
        Self { cell, nx, ny, slots: vec![None; nx * ny], points: Vec::new() }
    }

    fn coords(&self, p: &[f64; 2]) -> (usize, usize) {
        (
            ((p[0] / self.cell) as usize).min(self.nx - 1),
            ((p[1] / self.cell) as usize).min(self.ny - 1),
        )
    }

    fn fits(&self, p: &[f64; 2], radius: T) -> bool {
        let (cx, cy) = self.coords(p);
        let pt = [T::lit(p[0]), T::lit(p[1])];
        let r2 = radius * radius;
        for row in cy.saturating_sub(2)..=(cy + 2).min(self.ny - 1) {
            for col in cx.saturating_sub(2)..=(cx + 2).min(self.nx - 1) {
                if let Some(i) = self.slots[row * self.nx + col] {
                    if dist2_2d(&self.points[i], &pt) < r2 {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn insert(&mut self, p: &[f64; 2]) -> usize {
        let (cx, cy) = self.coords(p);
        let i = self.points.len();
        self.points.push([T::lit(p[0]), T::lit(p[1])]);
        self.slots[cy * self.nx + cx] = Some(i);
        i
    }
}

/// Bridson dart throwing restricted to the inside region. Every inside pixel
/// (in shuffled order) seeds a new front when it is not yet covered, so
/// disconnected parts of the silhouette all receive samples.
pub fn sample_poisson<T: Real>(s: &Silhouette<T>, cfg: &SamplerConfig) -> Result<PointSet2<T>> {
    check_nonempty(s, cfg)?;
    let thr = T::lit(cfg.threshold);
    let radius = poisson_radius(s, cfg.k_target);
    let r = radius.as_f64();
    let w = s.width() as f64;
    let h = s.height() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut grid = DiskGrid::<T>::new(w, h, r);
    let inside = |p: &[f64; 2]| {
        p[0] >= 0.0 && p[0] < w && p[1] >= 0.0 && p[1] < h && s.interp(T::lit(p[0]), T::lit(p[1])) > thr
    };

    let mut seeds: Vec<(usize, usize)> = (0..s.height())
        .flat_map(|row| (0..s.width()).map(move |col| (col, row)))
        .filter(|&(col, row)| s.pixel(col, row) > thr)
        .collect();
    seeds.shuffle(&mut rng);

    let mut active: Vec<usize> = Vec::new();
    for (col, row) in seeds {
        let p = [col as f64 + rng.gen::<f64>(), row as f64 + rng.gen::<f64>()];
        if !inside(&p) || !grid.fits(&p, radius) {
            continue;
        }
        active.push(grid.insert(&p));
        while !active.is_empty() {
            let slot = rng.gen_range(0..active.len());
            let base = grid.points[active[slot]];
            let base = [base[0].as_f64(), base[1].as_f64()];
            let mut placed = false;
            for _ in 0..POISSON_ATTEMPTS {
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                let dist = r * (1.0 + rng.gen::<f64>());
                let cand = [base[0] + dist * angle.cos(), base[1] + dist * angle.sin()];
                if inside(&cand) && grid.fits(&cand, radius) {
                    active.push(grid.insert(&cand));
                    placed = true;
                    break;
                }
            }
            if !placed {
                active.swap_remove(slot);
            }
        }
    }
    Ok(PointSet2::new(grid.points))
}

/// Random sampling whose seed is `derive_seed(cfg.seed, epoch)`.
pub fn resample_dynamic<T: Real>(s: &Silhouette<T>, cfg: &SamplerConfig, epoch: u64) -> Result<PointSet2<T>> {
    let cfg = SamplerConfig { seed: derive_seed(cfg.seed, epoch), ..*cfg };
    sample_random(s, &cfg)
}
