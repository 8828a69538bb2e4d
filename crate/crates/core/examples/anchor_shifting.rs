//! Fit rotation anchors to observed angles and compare with uniform anchors.
//!
//! Run with `cargo run --example anchor_shifting`.

use graspmap::anchors::{fitting_error, shift_step, uniform_anchors, AnchorSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> graspmap::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // Mostly top-down grasps with a few tilted ones.
    let samples: Vec<f64> = (0..2000)
        .map(|_| {
            let mode = [0.0, 0.0, 0.0, 0.52, -0.52][rng.random_range(0..5)];
            mode + rng.random_range(-0.05..0.05)
        })
        .collect();

    let mut anchors = uniform_anchors(7);
    println!("iter 0 error {:.5} anchors {:+.3?}", fitting_error(&anchors, &samples)?, anchors);
    for it in 1..=5 {
        anchors = shift_step(&anchors, &samples, 1)?;
        println!("iter {it} error {:.5} anchors {:+.3?}", fitting_error(&anchors, &samples)?, anchors);
    }

    // Streaming use: samples accumulate until the buffer passes K.
    let mut set = AnchorSet::uniform(7, 500, 1)?;
    let pairs: Vec<(f64, f64)> = samples.chunks(2).map(|c| (c[0], c[1])).collect();
    for chunk in pairs.chunks(200) {
        let refit = set.buffer_update(chunk)?;
        println!("buffered {:4} refit {refit}", set.buffer().len());
    }
    println!("gamma anchors {:+.3?}", set.gamma());
    println!("worst quantization error {:.4} rad", set.max_quantization_error());
    Ok(())
}
