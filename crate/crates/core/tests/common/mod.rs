//! Brute-force oracles and random scene builders shared by the integration
//! tests.
#![allow(dead_code)]

use projmatch::geometry::{project, Camera, Point2, PointCloud3, PointSet2};
use projmatch::loss::{multi_view_loss, LossConfig, SupervisedView};
use projmatch::{Index2D, Silhouette};
use rand::Rng;

pub fn dist2(a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// All points ordered by `(distance, index)`; the first `k` are returned.
pub fn brute_knn(pts: &[Point2<f64>], q: &Point2<f64>, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = pts.iter().enumerate().map(|(i, p)| (i, dist2(p, q))).collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Chamfer value and per-projection gradient, straight from the definition.
pub fn brute_chamfer(proj: &[Point2<f64>], sup: &[Point2<f64>], cfg: &LossConfig) -> (f64, Vec<Point2<f64>>) {
    let (j, k) = (proj.len() as f64, sup.len() as f64);
    let mut value = 0.0;
    let mut grad = vec![[0.0; 2]; proj.len()];
    if cfg.use_first {
        let a = cfg.nn_first as f64;
        for (i, q) in proj.iter().enumerate() {
            for (n, d) in brute_knn(sup, q, cfg.nn_first) {
                value += d / (a * j);
                grad[i][0] += 2.0 * (q[0] - sup[n][0]) / (a * j);
                grad[i][1] += 2.0 * (q[1] - sup[n][1]) / (a * j);
            }
        }
    }
    if cfg.use_second {
        let b = cfg.nn_second as f64;
        for g in sup {
            for (n, d) in brute_knn(proj, g, cfg.nn_second) {
                value += d / (b * k);
                grad[n][0] += 2.0 * (proj[n][0] - g[0]) / (b * k);
                grad[n][1] += 2.0 * (proj[n][1] - g[1]) / (b * k);
            }
        }
    }
    (value, grad)
}

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn random_config(rng: &mut impl Rng) -> LossConfig {
    let mut cfg = LossConfig::nn(rng.gen_range(1..=3), rng.gen_range(1..=3));
    match rng.gen_range(0..4) {
        0 => cfg.use_first = false,
        1 => cfg.use_second = false,
        _ => {}
    }
    cfg
}

pub struct GradScene {
    pub cloud: PointCloud3<f64>,
    pub views: Vec<SupervisedView<f64>>,
    pub cfg: LossConfig,
}

/// Cloud in a ball of radius 0.5, cameras on random directions at distance
/// 2 to 3 looking at the origin, supervision uniform in a 64 x 64 image.
pub fn random_grad_scene(rng: &mut impl Rng, max_j: usize, max_views: usize, max_k: usize) -> GradScene {
    let j = rng.gen_range(4..=max_j);
    let pts = (0..j)
        .map(|_| loop {
            let p: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-0.5..0.5));
            if p.iter().map(|v| v * v).sum::<f64>() <= 0.25 {
                break p;
            }
        })
        .collect();
    let cloud = PointCloud3::new(pts).unwrap();
    let views = (0..rng.gen_range(1..=max_views))
        .map(|v| {
            let dir = loop {
                let d: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 0.1 && n <= 1.0 && d[1].abs() / n < 0.9 {
                    break d.map(|x| x / n);
                }
            };
            let r = rng.gen_range(2.0..3.0);
            let cam = Camera::look_at(dir.map(|x| x * r), [0.0; 3], [0.0, 1.0, 0.0], 80.0, [32.0, 32.0], v).unwrap();
            let k = rng.gen_range(4..=max_k);
            let sup = (0..k).map(|_| [rng.gen_range(0.0..64.0), rng.gen_range(0.0..64.0)]).collect();
            SupervisedView::new(cam, PointSet2::new(sup)).unwrap()
        })
        .collect();
    GradScene { cloud, views, cfg: random_config(rng) }
}

/// Every neighbor list the loss uses, per view.
pub fn assignment(cloud: &PointCloud3<f64>, views: &[SupervisedView<f64>], cfg: &LossConfig) -> Vec<Vec<usize>> {
    let ids = |idx: &Index2D, q: &Point2<f64>, k: usize| idx.knn(q, k).unwrap().iter().map(|n| n.index).collect();
    let mut out = Vec::new();
    for v in views {
        let proj = project(cloud, v.camera()).unwrap();
        let sup = v.supervision();
        if cfg.use_first {
            let idx = Index2D::build(sup).unwrap();
            out.extend(proj.points().iter().map(|q| ids(&idx, q, cfg.nn_first)));
        }
        if cfg.use_second {
            let idx = Index2D::build(&proj).unwrap();
            out.extend(sup.points().iter().map(|g| ids(&idx, g, cfg.nn_second)));
        }
    }
    out
}

fn with_coord(cloud: &PointCloud3<f64>, j: usize, c: usize, delta: f64) -> PointCloud3<f64> {
    let mut pts = cloud.points().to_vec();
    pts[j][c] += delta;
    PointCloud3::new(pts).unwrap()
}

pub struct GradCheck {
    pub checked: usize,
    pub skipped_ties: usize,
    pub max_rel: f64,
}

/// Central differences with step `h` on up to `max_points` points. A
/// coordinate counts as tie-adjacent (and is skipped) when either perturbed
/// cloud changes any neighbor assignment.
pub fn gradient_check(s: &GradScene, h: f64, max_points: usize, rng: &mut impl Rng) -> GradCheck {
    let report = multi_view_loss(&s.cloud, &s.views, &s.cfg).unwrap();
    let base = assignment(&s.cloud, &s.views, &s.cfg);
    let mut idx: Vec<usize> = (0..s.cloud.len()).collect();
    for i in (1..idx.len()).rev() {
        idx.swap(i, rng.gen_range(0..=i));
    }
    idx.truncate(max_points);
    let mut out = GradCheck { checked: 0, skipped_ties: 0, max_rel: 0.0 };
    for &j in &idx {
        for c in 0..3 {
            let plus = with_coord(&s.cloud, j, c, h);
            let minus = with_coord(&s.cloud, j, c, -h);
            if assignment(&plus, &s.views, &s.cfg) != base || assignment(&minus, &s.views, &s.cfg) != base {
                out.skipped_ties += 1;
                continue;
            }
            let lp = multi_view_loss(&plus, &s.views, &s.cfg).unwrap().total;
            let lm = multi_view_loss(&minus, &s.views, &s.cfg).unwrap().total;
            let fd = (lp - lm) / (2.0 * h);
            out.max_rel = out.max_rel.max(rel_err(report.grad[j][c], fd, 1e-6));
            out.checked += 1;
        }
    }
    out
}

/// Union of one to four filled discs in a 64 x 64 image.
pub fn disc_silhouette(rng: &mut impl Rng) -> Silhouette {
    let discs: Vec<([f64; 2], f64)> = (0..rng.gen_range(1..=4))
        .map(|_| ([rng.gen_range(12.0..52.0), rng.gen_range(12.0..52.0)], rng.gen_range(5.0..14.0)))
        .collect();
    Silhouette::from_fn(64, 64, |col, row| {
        let p = [col as f64 + 0.5, row as f64 + 0.5];
        if discs.iter().any(|(c, r)| dist2(&p, c) <= r * r) {
            1.0
        } else {
            0.0
        }
    })
    .unwrap()
}
