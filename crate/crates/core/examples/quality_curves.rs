//! Coverage, collision-free and antipodal curves over top-k predictions.
//!
//! Run with `cargo run --release --example quality_curves [curves.csv]`.

use graspmap::config::Config;
use graspmap::eval::curves_csv;
use graspmap::pipeline::run_synthetic;

fn main() -> graspmap::Result<()> {
    let mut cfg = Config::default();
    cfg.scene.seed = 5;
    cfg.eval.curve_ks = vec![1, 2, 5, 10, 20, 50, 100];
    let (_, out) = run_synthetic(&cfg)?;
    let csv = curves_csv(&out.report.curve);
    match std::env::args().nth(1) {
        Some(path) => {
            std::fs::write(&path, &csv)?;
            println!("wrote {path}");
        }
        None => print!("{csv}"),
    }
    Ok(())
}
