//! End-to-end run on one synthetic scene, optionally dumping every stage.
//!
//! Run with `cargo run --release --example full_pipeline [dump_dir]`.

use std::path::PathBuf;
use std::time::Instant;

use graspmap::config::Config;
use graspmap::pipeline::{dump, run_pipeline, PipelineInput};
use graspmap::scenegen::generate_scene;

fn main() -> graspmap::Result<()> {
    let mut cfg = Config::default();
    cfg.scene.seed = 11;
    cfg.scene.noise_sigma = 0.002;
    cfg.pipeline.losses = true;
    let scene = generate_scene(&cfg.scene)?;
    let input = PipelineInput::from_scene(&scene, &cfg)?;

    let t = Instant::now();
    let out = run_pipeline(&input, &cfg)?;
    let r = &out.report;
    println!(
        "{} regions, {} grasps for {} labels in {:.1} ms: CR {:.3} CFR {:.3} AS {:.3}",
        out.regions.len(),
        r.num_pred,
        r.num_gt,
        t.elapsed().as_secs_f64() * 1e3,
        r.cr,
        r.cfr,
        r.as_mean
    );
    if let Some(l) = &out.losses {
        println!("losses of the driving maps: {:.3e}", l.total);
    }
    for d in out.decoded.iter().take(3) {
        println!("  score {:.2} t {:.3?} width {:.3}", d.grasp.score, d.grasp.t, d.grasp.width);
    }
    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        dump(&out, &cfg, &dir)?;
        println!("dumped to {}", dir.display());
    }
    Ok(())
}
