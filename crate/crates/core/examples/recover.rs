//! Reconstructs a synthetic scene and reports the 3D CD before and after.
//!
//! `cargo run --release -p projmatch --example recover -- [shape] [steps] [first|second|both] [k] [res] [seed]`

use std::time::Instant;

use projmatch::loss::LossConfig;
use projmatch::optimize::{run_with, OptimConfig, RunOptions};
use projmatch::sampling::{SamplerConfig, SamplerMethod};
use projmatch::synth::{make_scene, SceneParams, ShapeKind};

fn main() -> projmatch::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let shape: ShapeKind = arg(0, "square").parse()?;
    let steps: usize = arg(1, "20000").parse().unwrap();
    let loss = match arg(2, "both").as_str() {
        "first" => LossConfig::first_only(),
        "second" => LossConfig::second_only(),
        _ => LossConfig::default(),
    };
    let k: usize = arg(3, "3000").parse().unwrap();
    let res: usize = arg(4, "64").parse().unwrap();
    let seed: u64 = arg(5, "0").parse().unwrap();

    let params = SceneParams { views: 6, ..SceneParams::at_resolution(res) };
    let scene = make_scene::<f64>(&shape, &params)?;
    let pairs: Vec<_> = scene
        .views
        .iter()
        .map(|v| v.camera.clone())
        .zip(scene.silhouettes()?)
        .collect();
    let sampler = SamplerConfig { method: SamplerMethod::Sas, k_target: k, threshold: 0.5, seed };
    let optim = OptimConfig { steps, seed, log_every: (steps / 10).max(1), ..OptimConfig::default() };
    let start = Instant::now();
    let opts = RunOptions { initial: None, reference: Some(&scene.gt_cloud) };
    let (_, trace) = run_with(&pairs, 2048, &sampler, &loss, &optim, opts)?;
    for r in &trace.records {
        println!("step {:>6} loss {:>12.4} cd {:.4}", r.step, r.total, r.reference_cd.unwrap());
    }
    let first = trace.initial_reference_cd().unwrap();
    let last = trace.final_reference_cd().unwrap();
    println!(
        "{shape} cd {first:.4} -> {last:.4} ({:.1}% reduction) in {:.1?}",
        100.0 * (1.0 - last / first),
        start.elapsed()
    );
    Ok(())
}
