//! Generate a tabletop scene and save its depth map and labels.
//!
//! Run with `cargo run --release --example synth_scene [seed] [out_dir]`.

use std::path::PathBuf;

use graspmap::io::{encode_pfm, write_jsonl};
use graspmap::scenegen::{generate_scene, SceneSpec};

fn main() -> graspmap::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = SceneSpec {
        seed,
        noise_sigma: 0.001,
        ..SceneSpec::default()
    };
    let scene = generate_scene(&spec)?;
    for o in &scene.objects {
        let t = o.pose.translation.vector;
        let labels = scene.labels.iter().filter(|l| l.object == o.id).count();
        println!("object {} {:?} at ({:+.3}, {:+.3}): {labels} labels", o.id, o.shape, t.x, t.y);
    }
    let valid = scene.depth.iter().filter(|&&z| z > 0.0).count();
    println!("{} labels, {valid} valid depth pixels", scene.labels.len());

    if let Some(dir) = args.next().map(PathBuf::from) {
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("depth.pfm"), encode_pfm(&scene.depth))?;
        write_jsonl(&dir.join("labels.jsonl"), &scene.label_poses())?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
