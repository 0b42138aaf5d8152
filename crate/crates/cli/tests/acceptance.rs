//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Set `ACCEPTANCE_ONLY=1,2,9` to run a subset.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{brute_chamfer, brute_knn, disc_silhouette, dist2, gradient_check, random_grad_scene, rel_err};
use projmatch::eval::{chamfer_3d, compare_clouds, default_bounds, iou, voxelize, DEFAULT_VOXEL_RESOLUTION};
use projmatch::geometry::{Point2, PointCloud3, PointSet2};
use projmatch::loss::{chamfer_2d, LossConfig};
use projmatch::sampling::{poisson_radius, resample_dynamic, sample, SamplerConfig, SamplerMethod};
use projmatch::synth::{make_scene, SceneParams, ShapeKind};
use projmatch::{Camera, Index2D, PointCloud, SceneSpec, Silhouette};
use projmatch_cli::commands::{cmd_reconstruct, eval_line, ReconstructArgs, RunArgs};
use projmatch_cli::manifest::{RunManifest, RunSettings, MANIFEST_FILE};
use projmatch_cli::scene_dir::write_scene;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut checked, mut skipped, mut worst) = (0, 0, 0.0f64);
    for _ in 0..50 {
        let scene = random_grad_scene(&mut rng, 128, 4, 300);
        let c = gradient_check(&scene, 1e-5, usize::MAX, &mut rng);
        checked += c.checked;
        skipped += c.skipped_ties;
        worst = worst.max(c.max_rel);
    }
    let t = start.elapsed();
    let pass = worst < 1e-4 && checked > 0 && t < Duration::from_secs(60);
    outcome(
        pass,
        format!("50 scenes, {checked} coordinates, {skipped} tie-adjacent skipped, max rel err {worst:.2e}, {:.1}s", secs(t)),
    )
}

fn nn_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    let mut instances = 0;
    for k in [1, 5] {
        for lattice in [false, true] {
            let gen = |rng: &mut ChaCha8Rng| -> Point2<f64> {
                if lattice {
                    [rng.gen_range(0..40) as f64, rng.gen_range(0..40) as f64]
                } else {
                    [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)]
                }
            };
            let pts: Vec<Point2<f64>> = (0..1000).map(|_| gen(&mut rng)).collect();
            let queries: Vec<Point2<f64>> = (0..1000).map(|_| gen(&mut rng)).collect();
            let idx = Index2D::from_points(&pts).unwrap();
            for q in &queries {
                let got: Vec<(usize, f64)> = idx.knn(q, k).unwrap().iter().map(|n| (n.index, n.dist2)).collect();
                mismatches += usize::from(got != brute_knn(&pts, q, k));
            }
            instances += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        mismatches == 0 && t < Duration::from_secs(10),
        format!("{instances} instances of 1000 points x 1000 queries, k in {{1, 5}}, {mismatches} mismatches, {:.2}s", secs(t)),
    )
}

fn chamfer_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let configs = [
        LossConfig::nn(1, 1),
        LossConfig::nn(5, 1),
        LossConfig::nn(1, 5),
        LossConfig::nn(5, 5),
        LossConfig::first_only(),
        LossConfig::second_only(),
    ];
    let mut worst = 0.0f64;
    let mut cases = 0;
    for _ in 0..200 {
        let set = |rng: &mut ChaCha8Rng| -> Vec<Point2<f64>> {
            let n = rng.gen_range(5..=30);
            let lattice = rng.gen_bool(0.5);
            (0..n)
                .map(|_| {
                    if lattice {
                        [rng.gen_range(0..6) as f64, rng.gen_range(0..6) as f64]
                    } else {
                        [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)]
                    }
                })
                .collect()
        };
        let proj = set(&mut rng);
        let sup = set(&mut rng);
        for cfg in &configs {
            let (v, g) = chamfer_2d(&PointSet2::new(proj.clone()), &PointSet2::new(sup.clone()), cfg).unwrap();
            let (bv, bg) = brute_chamfer(&proj, &sup, cfg);
            worst = worst.max(rel_err(v, bv, 1e-300));
            for (a, b) in g.iter().zip(&bg) {
                worst = worst.max(rel_err(a[0], b[0], 1e-12)).max(rel_err(a[1], b[1], 1e-12));
            }
            cases += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-10 && t < Duration::from_secs(5),
        format!("{cases} cases over 6 loss variants, max rel err {worst:.2e}, {:.2}s", secs(t)),
    )
}

/// Ten splatted views of random built-in scenes and ten disc unions.
fn synthetic_silhouettes() -> Vec<Silhouette> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let shapes = [ShapeKind::Square, ShapeKind::TwoBars, ShapeKind::Helix];
    let mut out = Vec::new();
    for i in 0..10 {
        let params = SceneParams { points: 1024, views: 6, seed: rng.gen(), ..SceneParams::default() };
        let scene = make_scene::<f64>(&shapes[i % 3], &params).unwrap();
        let sils = scene.silhouettes().unwrap();
        out.push(sils[rng.gen_range(0..sils.len())].clone());
    }
    out.extend((0..10).map(|_| disc_silhouette(&mut rng)));
    out
}

fn sampler_contracts() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    let sils = synthetic_silhouettes();
    for (s, sil) in sils.iter().enumerate() {
        let k = rng.gen_range(500..=3000);
        let seed = rng.gen();
        for method in SamplerMethod::ALL {
            let cfg = SamplerConfig { method, k_target: k, threshold: 0.5, seed };
            let pts = sample(sil, &cfg).unwrap();
            if pts.is_empty() || pts.points().iter().any(|p| !(sil.interp(p[0], p[1]) > 0.5)) {
                failures.push(format!("{method} outside on silhouette {s}"));
            }
            match method {
                SamplerMethod::Sas => {
                    let other = sample(sil, &SamplerConfig { seed: seed ^ 0xdead_beef, ..cfg }).unwrap();
                    if other != pts {
                        failures.push(format!("sas depends on the seed on silhouette {s}"));
                    }
                    let n = pts.len() as f64;
                    if n < 0.7 * k as f64 || n > 1.3 * k as f64 {
                        failures.push(format!("sas emitted {n} for k = {k} on silhouette {s}"));
                    }
                }
                SamplerMethod::PoissonDisk => {
                    let r2 = poisson_radius(sil, k).powi(2);
                    let p = pts.points();
                    let close = (0..p.len()).any(|i| (0..i).any(|j| dist2(&p[i], &p[j]) < r2));
                    if close {
                        failures.push(format!("poisson points closer than the radius on silhouette {s}"));
                    }
                }
                SamplerMethod::Dynamic => {
                    let e1 = resample_dynamic(sil, &cfg, 1).unwrap();
                    let e2 = resample_dynamic(sil, &cfg, 2).unwrap();
                    if e1 == pts || e1 == e2 {
                        failures.push(format!("dynamic repeats an epoch on silhouette {s}"));
                    }
                }
                _ => {}
            }
        }
    }
    let t = start.elapsed();
    let pass = failures.is_empty() && t < Duration::from_secs(30);
    let mut detail = format!("{} silhouettes x {} samplers, {:.2}s", sils.len(), SamplerMethod::ALL.len(), secs(t));
    if !failures.is_empty() {
        detail.push_str(&format!("; {}", failures.join("; ")));
    }
    outcome(pass, detail)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Loss {
    Both,
    First,
    Second,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
struct RunKey {
    shape: u8,
    loss: Loss,
    k: usize,
    res: usize,
    seed: u64,
}

impl RunKey {
    fn square() -> Self {
        RunKey { shape: 0, loss: Loss::Both, k: 3000, res: 64, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug)]
struct RunResult {
    initial_cd: f64,
    final_cd: f64,
    time: Duration,
}

/// Full-length runs, each computed once and shared between criteria.
struct Runs {
    scenes: HashMap<(u8, usize), SceneSpec>,
    done: HashMap<RunKey, RunResult>,
}

impl Runs {
    fn new() -> Self {
        Runs { scenes: HashMap::new(), done: HashMap::new() }
    }

    fn scene(&mut self, shape: u8, res: usize) -> SceneSpec {
        if let Some(s) = self.scenes.get(&(shape, res)) {
            return s.clone();
        }
        let kind = if shape == 0 { ShapeKind::Square } else { ShapeKind::TwoBars };
        let base = self
            .scenes
            .entry((shape, 64))
            .or_insert_with(|| {
                make_scene(&kind, &SceneParams { points: 2048, views: 6, ..SceneParams::at_resolution(64) }).unwrap()
            })
            .clone();
        // other resolutions re-render the same ground truth and cameras
        let scene = base.rescaled(res).unwrap();
        self.scenes.insert((shape, res), scene.clone());
        scene
    }

    fn get(&mut self, key: RunKey) -> RunResult {
        if let Some(r) = self.done.get(&key) {
            return *r;
        }
        let scene = self.scene(key.shape, key.res);
        let pairs: Vec<(Camera, Silhouette)> =
            scene.views.iter().map(|v| v.camera.clone()).zip(scene.silhouettes().unwrap()).collect();
        let mut settings = RunSettings::default();
        settings.points = 2048;
        settings.sampler = SamplerConfig { method: SamplerMethod::Sas, k_target: key.k, threshold: 0.5, seed: 0 };
        settings.loss = match key.loss {
            Loss::Both => LossConfig::nn(1, 1),
            Loss::First => LossConfig::first_only(),
            Loss::Second => LossConfig::second_only(),
        };
        settings.optim.steps = 20_000;
        settings.optim.learning_rate = 1e-4;
        let settings = settings.with_seed(key.seed);
        let start = Instant::now();
        let (cloud, trace) = settings.run(&pairs, Some(&scene.gt_cloud)).unwrap();
        let result = RunResult {
            initial_cd: trace.initial_reference_cd().unwrap(),
            final_cd: chamfer_3d(&cloud, &scene.gt_cloud).unwrap(),
            time: start.elapsed(),
        };
        eprintln!(
            "  run {key:?}: cd {:.4} -> {:.4} in {:.0}s",
            result.initial_cd,
            result.final_cd,
            secs(result.time)
        );
        self.done.insert(key, result);
        result
    }
}

fn shape_recovery(runs: &mut Runs) -> Outcome {
    let square = runs.get(RunKey::square());
    let bars = runs.get(RunKey { shape: 1, ..RunKey::square() });
    let red = |r: &RunResult| 100.0 * (1.0 - r.final_cd / r.initial_cd);
    let time = square.time + bars.time;
    let pass = red(&square) >= 95.0 && red(&bars) >= 85.0 && time < Duration::from_secs(15 * 60);
    outcome(
        pass,
        format!(
            "square {:.3} -> {:.4} ({:.1}% >= 95%), two-bars {:.3} -> {:.4} ({:.1}% >= 85%), {:.0}s",
            square.initial_cd,
            square.final_cd,
            red(&square),
            bars.initial_cd,
            bars.final_cd,
            red(&bars),
            secs(time)
        ),
    )
}

fn ablation_ordering(runs: &mut Runs) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in 0..3 {
        let cd = |runs: &mut Runs, loss| runs.get(RunKey { loss, seed, ..RunKey::square() }).final_cd;
        let (both, first, second) = (cd(runs, Loss::Both), cd(runs, Loss::First), cd(runs, Loss::Second));
        let checks = [both <= second, second <= first, first >= 2.0 * both];
        pass &= checks.iter().all(|c| *c);
        let yn = |c: bool| if c { "yes" } else { "no" };
        parts.push(format!(
            "seed {seed}: both {both:.4}, second-only {second:.4}, first-only {first:.4} \
             (both<=second {}, second<=first {}, first>=2x both {})",
            yn(checks[0]),
            yn(checks[1]),
            yn(checks[2])
        ));
    }
    outcome(pass, parts.join("; "))
}

fn k_robustness(runs: &mut Runs) -> Outcome {
    let cds: Vec<f64> = [1000, 3000, 5000].iter().map(|&k| runs.get(RunKey { k, ..RunKey::square() }).final_cd).collect();
    let max = cds.iter().cloned().fold(f64::MIN, f64::max);
    let min = cds.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (max - min) / min;
    outcome(
        spread <= 0.20,
        format!("cd at k = 1000/3000/5000: {:.4} / {:.4} / {:.4}, spread (max-min)/min {:.1}% <= 20%", cds[0], cds[1], cds[2], 100.0 * spread),
    )
}

fn resolution_robustness(runs: &mut Runs) -> Outcome {
    let low = runs.get(RunKey { res: 32, ..RunKey::square() }).final_cd;
    let high = runs.get(RunKey { res: 128, ..RunKey::square() }).final_cd;
    let degeneration = (low - high) / high;
    outcome(
        degeneration <= 0.35,
        format!("cd at 32px {low:.4}, at 128px {high:.4}, degeneration {:.1}% <= 35%", 100.0 * degeneration),
    )
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let scene_dir = tmp.path().join("scene");
    let scene: SceneSpec = make_scene(&ShapeKind::Square, &SceneParams { views: 6, ..SceneParams::default() }).unwrap();
    write_scene(&scene_dir, &scene).unwrap();
    let args = ReconstructArgs {
        scene: Some(scene_dir.clone()),
        run: RunArgs {
            k: 3000,
            sampler: SamplerMethod::Sas,
            threshold: 0.5,
            steps: 1000,
            lr: 1e-3,
            points: 2048,
            loss: projmatch_cli::commands::LossVariant::Both,
            nn_first: 1,
            nn_second: 1,
            seed: 7,
            init: projmatch_cli::commands::InitArg::Sphere,
            resample_every: 0,
            log_every: 50,
        },
        out: Some(tmp.path().join("first")),
        manifest: None,
    };
    let first = cmd_reconstruct(&args).unwrap();
    let manifest_path = first.outputs.recon.with_file_name(MANIFEST_FILE);
    let read = |m: &RunManifest| (fs::read(&m.outputs.recon).unwrap(), fs::read(&m.outputs.trace).unwrap());
    let a = read(&first);
    // identical manifest; the second run overwrites the same outputs
    let again = ReconstructArgs { scene: None, out: None, manifest: Some(manifest_path.clone()), ..args };
    let second = cmd_reconstruct(&again).unwrap();
    let b = read(&second);
    let same = first == second && a == b;
    outcome(same, format!("recon.xyz {} bytes, trace.csv {} bytes, identical: {same}", a.0.len(), a.1.len()))
}

fn eval_binary(a: &Path, b: &Path) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_projmatch")).arg("eval").arg(a).arg(b).output().unwrap();
    assert!(out.status.success());
    String::from_utf8(out.stdout).unwrap()
}

fn well_formed(line: &str) -> bool {
    let Some(body) = line.strip_suffix('\n') else { return false };
    let fields: Vec<&str> = body.split(' ').collect();
    let number = |s: &str| {
        let (int, frac) = s.split_once('.').unwrap_or(("", ""));
        !int.is_empty() && int.bytes().all(|c| c.is_ascii_digit()) && frac.len() == 6 && frac.bytes().all(|c| c.is_ascii_digit())
    };
    fields.len() == 2
        && fields[0].strip_prefix("cd=").is_some_and(number)
        && fields[1].strip_prefix("iou=").is_some_and(number)
}

fn metric_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut problems = Vec::new();
    for _ in 0..10 {
        let n = rng.gen_range(1..500);
        let a: PointCloud =
            PointCloud3::new((0..n).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect()).unwrap();
        if chamfer_3d(&a, &a).unwrap() != 0.0 {
            problems.push("chamfer_3d(a, a) != 0".to_string());
        }
        let bounds = default_bounds(&a, &a);
        let g = voxelize(a.points(), bounds, DEFAULT_VOXEL_RESOLUTION);
        if iou(&g, &g.clone()).unwrap() != 100.0 {
            problems.push("iou of identical grids != 100".to_string());
        }
    }
    let tmp = tempfile::tempdir().unwrap();
    let pa = tmp.path().join("a.xyz");
    let pb = tmp.path().join("b.xyz");
    fs::write(&pa, "0 0 0\n1 0 0\n0 1 0\n").unwrap();
    fs::write(&pb, "0 0 0.1\n1 0 0\n0 1.5 0\n").unwrap();
    let same = eval_binary(&pa, &pa);
    if same != "cd=0.000000 iou=100.000000\n" {
        problems.push(format!("eval a a printed {same:?}"));
    }
    let line = eval_binary(&pa, &pb);
    let ca: PointCloud = projmatch::io::read_cloud(&pa).unwrap();
    let cb: PointCloud = projmatch::io::read_cloud(&pb).unwrap();
    let (cd, i) = compare_clouds(&ca, &cb).unwrap();
    if !well_formed(&line) || line != format!("{}\n", eval_line(cd, i)) {
        problems.push(format!("eval a b printed {line:?}"));
    }
    let detail = if problems.is_empty() {
        format!("10 random clouds; eval prints {:?}", line.trim_end())
    } else {
        problems.join("; ")
    };
    outcome(problems.is_empty(), detail)
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut runs = Runs::new();
    let names = [
        "gradient correctness",
        "nn oracle equivalence",
        "chamfer oracle equivalence",
        "sampler contracts",
        "shape recovery",
        "ablation ordering",
        "k robustness",
        "resolution robustness",
        "reproducibility",
        "metric sanity",
    ];
    let mut failed = 0;
    for (i, name) in names.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            println!("SKIP criterion {n:>2} {name}");
            continue;
        }
        let o = match n {
            1 => gradients(),
            2 => nn_oracle(),
            3 => chamfer_oracle(),
            4 => sampler_contracts(),
            5 => shape_recovery(&mut runs),
            6 => ablation_ordering(&mut runs),
            7 => k_robustness(&mut runs),
            8 => resolution_robustness(&mut runs),
            9 => reproducibility(),
            _ => metric_sanity(),
        };
        failed += usize::from(!o.pass);
        println!("{} criterion {n:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
