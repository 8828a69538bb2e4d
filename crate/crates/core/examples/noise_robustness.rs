//! Metrics as depth noise grows, for exact and zero center offsets.
//!
//! Run with `cargo run --release --example noise_robustness [scenes]`.

use graspmap::config::Config;
use graspmap::pipeline::{run_pipeline, PipelineInput};
use graspmap::scenegen::generate_scene;

fn main() -> graspmap::Result<()> {
    let n: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let scenes = (0..n)
        .map(|seed| {
            let mut cfg = Config::default();
            cfg.scene.seed = seed;
            generate_scene(&cfg.scene).map(|s| (cfg, s))
        })
        .collect::<graspmap::Result<Vec<_>>>()?;

    println!("sigma_mm,exact_offsets,CR,CFR,AS");
    for sigma in [0.0, 0.001, 0.002, 0.003] {
        for exact in [true, false] {
            let (mut cr, mut cfr, mut as_mean) = (0.0, 0.0, 0.0);
            for (cfg, scene) in &scenes {
                let mut cfg = cfg.clone();
                cfg.scene.noise_sigma = sigma;
                cfg.decode.exact_offsets = exact;
                let input = PipelineInput::from_scene(&scene.with_noise(sigma), &cfg)?;
                let r = run_pipeline(&input, &cfg)?.report;
                cr += r.cr;
                cfr += r.cfr;
                as_mean += r.as_mean;
            }
            let k = scenes.len() as f64;
            println!("{},{exact},{:.4},{:.4},{:.4}", sigma * 1e3, cr / k, cfr / k, as_mean / k);
        }
    }
    Ok(())
}
