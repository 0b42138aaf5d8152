//! Two-sided 2D Chamfer matching between projections and supervision, summed
//! over views, with analytic gradients back to the 3D points.
//!
//! Per view, with projections `q_j` (J of them) and supervision `g_k` (K):
//!
//! ```text
//! d = 1/J sum_j mean_{g in aNN(q_j)} |q_j - g|^2 + 1/K sum_k mean_{q in bNN(g_k)} |g_k - q|^2
//! ```
//!
//! and the multi-view loss is the plain sum of `d` over views. At nearest
//! neighbor ties the lowest-index neighbor is used, so the (sub)gradient is
//! deterministic. All sums run in view order, then point order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, Point2, Point3, PointCloud3, PointSet2};
use crate::nn_index::{Index2, Neighbor};
use crate::real::Real;

/// Which terms are active and how many neighbors each averages over.
/// `NN(a, b)` in ablation notation is `nn_first = a, nn_second = b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossConfig {
    pub nn_first: usize,
    pub nn_second: usize,
    pub use_first: bool,
    pub use_second: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self::nn(1, 1)
    }
}

impl LossConfig {
    pub fn nn(a: usize, b: usize) -> Self {
        Self { nn_first: a, nn_second: b, use_first: true, use_second: true }
    }

    /// Projection-to-supervision term only.
    pub fn first_only() -> Self {
        Self { use_second: false, ..Self::default() }
    }

    /// Supervision-to-projection term only.
    pub fn second_only() -> Self {
        Self { use_first: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.use_first && !self.use_second {
            return Err(Error::InvalidConfig("at least one loss term must be enabled".into()));
        }
        if self.nn_first == 0 || self.nn_second == 0 {
            return Err(Error::InvalidConfig("neighbor counts must be positive".into()));
        }
        Ok(())
    }
}

/// Loss value, per-view breakdown and gradient with respect to each 3D point.
#[derive(Clone, Debug, PartialEq)]
pub struct LossReport<T> {
    pub total: T,
    pub per_view: Vec<T>,
    pub grad: Vec<Point3<T>>,
}

/// Chamfer value and its gradient with respect to each projection.
pub fn chamfer_2d<T: Real>(
    proj: &PointSet2<T>,
    sup: &PointSet2<T>,
    cfg: &LossConfig,
) -> Result<(T, Vec<Point2<T>>)> {
    cfg.validate()?;
    if proj.is_empty() || sup.is_empty() {
        return Err(Error::EmptySet);
    }
    let sup_index = Index2::build(sup)?;
    chamfer_indexed(proj.points(), sup.points(), &sup_index, cfg)
}

/// [`chamfer_2d`] against a prebuilt supervision index.
fn chamfer_indexed<T: Real>(
    proj: &[Point2<T>],
    sup: &[Point2<T>],
    sup_index: &Index2<T>,
    cfg: &LossConfig,
) -> Result<(T, Vec<Point2<T>>)> {
    let j_count = proj.len();
    let k_count = sup.len();
    if j_count == 0 || k_count == 0 {
        return Err(Error::EmptySet);
    }
    let two = T::lit(2.0);
    let mut grad = vec![[T::zero(); 2]; j_count];
    let mut neighbors: Vec<Neighbor<T>> = Vec::with_capacity(cfg.nn_first.max(cfg.nn_second));
    let mut value = T::zero();

    if cfg.use_first {
        let a = cfg.nn_first;
        if a > k_count {
            return Err(Error::KTooLarge { k: a, available: k_count });
        }
        let inv_a = T::one() / T::from_usize_lossy(a);
        let scale = two / (T::from_usize_lossy(j_count) * T::from_usize_lossy(a));
        let mut sum = T::zero();
        for (j, q) in proj.iter().enumerate() {
            sup_index.knn_into(q, a, &mut neighbors)?;
            let mut d = T::zero();
            for n in &neighbors {
                let g = &sup[n.index];
                d += n.dist2;
                grad[j][0] += scale * (q[0] - g[0]);
                grad[j][1] += scale * (q[1] - g[1]);
            }
            sum += d * inv_a;
        }
        value += sum / T::from_usize_lossy(j_count);
    }

    if cfg.use_second {
        let b = cfg.nn_second;
        if b > j_count {
            return Err(Error::KTooLarge { k: b, available: j_count });
        }
        let proj_index = Index2::from_points(proj)?;
        let inv_b = T::one() / T::from_usize_lossy(b);
        let scale = two / (T::from_usize_lossy(k_count) * T::from_usize_lossy(b));
        let mut sum = T::zero();
        for g in sup {
            proj_index.knn_into(g, b, &mut neighbors)?;
            let mut d = T::zero();
            for n in &neighbors {
                let q = &proj[n.index];
                d += n.dist2;
                grad[n.index][0] += scale * (q[0] - g[0]);
                grad[n.index][1] += scale * (q[1] - g[1]);
            }
            sum += d * inv_b;
        }
        value += sum / T::from_usize_lossy(k_count);
    }

    Ok((value, grad))
}

/// One camera with its supervision and the supervision's search index.
#[derive(Clone, Debug)]
pub struct SupervisedView<T> {
    camera: Camera<T>,
    supervision: PointSet2<T>,
    index: Index2<T>,
}

impl<T: Real> SupervisedView<T> {
    pub fn new(camera: Camera<T>, supervision: PointSet2<T>) -> Result<Self> {
        let index = Index2::build(&supervision)?;
        Ok(Self { camera, supervision, index })
    }

    pub fn camera(&self) -> &Camera<T> {
        &self.camera
    }

    pub fn supervision(&self) -> &PointSet2<T> {
        &self.supervision
    }

    fn evaluate(&self, cloud: &PointCloud3<T>, cfg: &LossConfig) -> Result<(T, Vec<Point3<T>>)> {
        let proj: Vec<Point2<T>> = cloud
            .points()
            .iter()
            .enumerate()
            .map(|(j, p)| self.camera.project_point(p, j))
            .collect::<Result<_>>()?;
        let (value, dproj) = chamfer_indexed(&proj, self.supervision.points(), &self.index, cfg)?;
        let grad = cloud
            .points()
            .iter()
            .zip(&dproj)
            .enumerate()
            .map(|(j, (p, g))| self.camera.pullback(p, g, j))
            .collect::<Result<_>>()?;
        Ok((value, grad))
    }
}

/// Sum of per-view Chamfer losses and the gradient with respect to each 3D point.
pub fn multi_view_loss<T: Real>(
    cloud: &PointCloud3<T>,
    views: &[SupervisedView<T>],
    cfg: &LossConfig,
) -> Result<LossReport<T>> {
    cfg.validate()?;
    let results: Vec<Result<(T, Vec<Point3<T>>)>> =
        views.par_iter().map(|v| v.evaluate(cloud, cfg)).collect();
    let mut per_view = Vec::with_capacity(views.len());
    let mut grad = vec![[T::zero(); 3]; cloud.len()];
    for r in results {
        let (value, g) = r?;
        per_view.push(value);
        for (acc, gj) in grad.iter_mut().zip(&g) {
            acc[0] += gj[0];
            acc[1] += gj[1];
            acc[2] += gj[2];
        }
    }
    let total = per_view.iter().fold(T::zero(), |acc, v| acc + *v);
    Ok(LossReport { total, per_view, grad })
}

/// Convenience form taking raw `(camera, supervision)` pairs.
pub fn multi_view_loss_pairs<T: Real>(
    cloud: &PointCloud3<T>,
    views: &[(Camera<T>, PointSet2<T>)],
    cfg: &LossConfig,
) -> Result<LossReport<T>> {
    let views = views
        .iter()
        .map(|(c, s)| SupervisedView::new(c.clone(), s.clone()))
        .collect::<Result<Vec<_>>>()?;
    multi_view_loss(cloud, &views, cfg)
}
