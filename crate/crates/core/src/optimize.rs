//! Direct recovery of a point cloud from silhouettes: sample supervision per
//! view, then run Adam on the raw coordinates against the multi-view
//! matching loss.
//!
//! The loss is measured in squared pixels while coordinates are in world
//! units. The default learning rate assumes scenes where the object spans
//! roughly half of a 64x64 image (see [`crate::synth`]); other scales need a
//! matching `learning_rate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::chamfer_3d;
use crate::geometry::{Camera, Point3, PointCloud3};
use crate::loss::{multi_view_loss, LossConfig, SupervisedView};
use crate::real::Real;
use crate::sampling::{derive_seed, resample_dynamic, sample, SamplerConfig, SamplerMethod};
use crate::silhouette::Silhouette;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    UnitSphereUniform,
    UnitCubeUniform,
    Provided,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub init: InitMode,
    pub seed: u64,
    /// 0 keeps the supervision fixed; otherwise it is redrawn every this
    /// many steps.
    pub resample_every: usize,
    pub log_every: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            steps: 20_000,
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            init: InitMode::UnitSphereUniform,
            seed: 0,
            resample_every: 0,
            log_every: 100,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        let unit = |b: f64| b > 0.0 && b < 1.0;
        if !unit(self.adam_beta1) || !unit(self.adam_beta2) {
            return bad("Adam betas must lie in (0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        if self.log_every == 0 {
            return bad("log interval must be at least 1");
        }
        Ok(())
    }
}

/// Adam over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    t: i32,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(cfg: &OptimConfig, params: usize) -> Self {
        Self {
            lr: T::lit(cfg.learning_rate),
            beta1: T::lit(cfg.adam_beta1),
            beta2: T::lit(cfg.adam_beta2),
            eps: T::lit(cfg.adam_eps),
            t: 0,
            m: vec![T::zero(); params],
            v: vec![T::zero(); params],
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (one - self.beta1) * *g;
            *v = self.beta2 * *v + (one - self.beta2) * *g * *g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// `j` points uniform in the unit ball or in `[-0.5, 0.5]^3`.
pub fn init_cloud<T: Real>(j: usize, cfg: &OptimConfig) -> Result<PointCloud3<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let points: Vec<Point3<T>> = match cfg.init {
        InitMode::UnitSphereUniform => (0..j)
            .map(|_| loop {
                let p: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 1.0 {
                    break [T::lit(p[0]), T::lit(p[1]), T::lit(p[2])];
                }
            })
            .collect(),
        InitMode::UnitCubeUniform => (0..j)
            .map(|_| std::array::from_fn(|_| T::lit(rng.gen_range(-0.5..0.5))))
            .collect(),
        InitMode::Provided => {
            return Err(Error::InvalidConfig("provided initialization needs an initial cloud".into()))
        }
    };
    PointCloud3::new(points)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord<T> {
    pub step: usize,
    pub total: T,
    pub per_view: Vec<T>,
    pub reference_cd: Option<T>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimTrace<T> {
    pub records: Vec<TraceRecord<T>>,
    /// Loss before the update of every step, then the final loss.
    pub losses: Vec<T>,
}

impl<T: Real> OptimTrace<T> {
    /// Reference CD of the first logged record, if one was tracked.
    pub fn initial_reference_cd(&self) -> Option<T> {
        self.records.first().and_then(|r| r.reference_cd)
    }

    pub fn final_reference_cd(&self) -> Option<T> {
        self.records.last().and_then(|r| r.reference_cd)
    }

    pub fn final_loss(&self) -> Option<T> {
        self.losses.last().copied()
    }

    /// Exponential moving average of `losses` with `alpha = 2 / (window + 1)`.
    pub fn smoothed(&self, window: usize) -> Vec<T> {
        let alpha = T::lit(2.0 / (window as f64 + 1.0));
        let mut acc = None;
        self.losses
            .iter()
            .map(|l| {
                let next = match acc {
                    None => *l,
                    Some(a) => a + alpha * (*l - a),
                };
                acc = Some(next);
                next
            })
            .collect()
    }

    /// `step,total,view_0,...,view_{n-1}[,reference_cd]` lines with a header.
    pub fn to_csv(&self) -> String {
        use crate::io::format_decimal;
        let views = self.records.first().map_or(0, |r| r.per_view.len());
        let with_ref = self.records.iter().any(|r| r.reference_cd.is_some());
        let mut header = vec!["step".to_string(), "total".to_string()];
        header.extend((0..views).map(|i| format!("view_{i}")));
        if with_ref {
            header.push("reference_cd".into());
        }
        let mut out = header.join(",");
        out.push('\n');
        for r in &self.records {
            let mut row = vec![r.step.to_string(), format_decimal(r.total.as_f64())];
            row.extend(r.per_view.iter().map(|v| format_decimal(v.as_f64())));
            if with_ref {
                row.push(r.reference_cd.map(|v| format_decimal(v.as_f64())).unwrap_or_default());
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Optional inputs to [`run_with`].
#[derive(Clone, Copy, Debug)]
pub struct RunOptions<'a, T> {
    /// Starting cloud for [`InitMode::Provided`].
    pub initial: Option<&'a PointCloud3<T>>,
    /// Ground truth tracked in the trace as 3D CD.
    pub reference: Option<&'a PointCloud3<T>>,
}

impl<T> Default for RunOptions<'_, T> {
    fn default() -> Self {
        Self { initial: None, reference: None }
    }
}

fn supervision_for<T: Real>(
    scene: &[(Camera<T>, Silhouette<T>)],
    sampler: &SamplerConfig,
    epoch: u64,
) -> Result<Vec<SupervisedView<T>>> {
    scene
        .iter()
        .enumerate()
        .map(|(i, (cam, sil))| {
            let cfg = SamplerConfig { seed: derive_seed(sampler.seed, i as u64), ..*sampler };
            let pts = if sampler.method == SamplerMethod::Dynamic {
                resample_dynamic(sil, &cfg, epoch)?
            } else if epoch == 0 {
                sample(sil, &cfg)?
            } else {
                sample(sil, &SamplerConfig { seed: derive_seed(cfg.seed, epoch), ..cfg })?
            };
            SupervisedView::new(cam.clone(), pts)
        })
        .collect()
}

/// Per-view supervision for a scene, each view seeded from
/// `derive_seed(sampler.seed, view_index)`.
pub fn build_supervision<T: Real>(
    scene: &[(Camera<T>, Silhouette<T>)],
    sampler: &SamplerConfig,
) -> Result<Vec<SupervisedView<T>>> {
    supervision_for(scene, sampler, 0)
}

pub fn run<T: Real>(
    scene: &[(Camera<T>, Silhouette<T>)],
    j: usize,
    sampler: &SamplerConfig,
    loss: &LossConfig,
    optim: &OptimConfig,
) -> Result<(PointCloud3<T>, OptimTrace<T>)> {
    run_with(scene, j, sampler, loss, optim, RunOptions::default())
}

pub fn run_with<T: Real>(
    scene: &[(Camera<T>, Silhouette<T>)],
    j: usize,
    sampler: &SamplerConfig,
    loss: &LossConfig,
    optim: &OptimConfig,
    opts: RunOptions<'_, T>,
) -> Result<(PointCloud3<T>, OptimTrace<T>)> {
    optim.validate()?;
    loss.validate()?;
    sampler.validate()?;
    if scene.is_empty() {
        return Err(Error::InvalidConfig("scene has no views".into()));
    }
    let mut cloud = match (optim.init, opts.initial) {
        (InitMode::Provided, Some(c)) => c.clone(),
        (InitMode::Provided, None) => {
            return Err(Error::InvalidConfig("provided initialization needs an initial cloud".into()))
        }
        _ => init_cloud(j, optim)?,
    };
    let mut views = supervision_for(scene, sampler, 0)?;
    let mut epoch = 0u64;
    let mut adam = Adam::new(optim, cloud.len() * 3);
    let mut trace = OptimTrace { records: Vec::new(), losses: Vec::with_capacity(optim.steps + 1) };
    let mut flat_grad = vec![T::zero(); cloud.len() * 3];

    let diverged = |step: usize| move |e: Error| Error::Diverged { step, source: Box::new(e) };

    for step in 0..=optim.steps {
        if optim.resample_every > 0 && step > 0 && step % optim.resample_every == 0 {
            let next = (step / optim.resample_every) as u64;
            if next != epoch {
                epoch = next;
                views = supervision_for(scene, sampler, epoch)?;
            }
        }
        let report = multi_view_loss(&cloud, &views, loss).map_err(diverged(step))?;
        if !report.total.is_finite() {
            return Err(Error::Diverged {
                step,
                source: Box::new(Error::InvalidConfig("loss became non-finite".into())),
            });
        }
        trace.losses.push(report.total);
        let last = step == optim.steps;
        if step % optim.log_every == 0 || last {
            let reference_cd = opts.reference.map(|r| chamfer_3d(&cloud, r)).transpose()?;
            trace.records.push(TraceRecord {
                step,
                total: report.total,
                per_view: report.per_view.clone(),
                reference_cd,
            });
        }
        if last {
            break;
        }
        for (dst, g) in flat_grad.chunks_exact_mut(3).zip(&report.grad) {
            dst.copy_from_slice(g);
        }
        let params = cloud.points_mut().as_flattened_mut();
        adam.step(params, &flat_grad);
    }
    Ok((cloud, trace))
}
