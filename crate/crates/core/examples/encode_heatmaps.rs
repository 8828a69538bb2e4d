//! Encode grasp labels into confidence, angle, width and depth maps and read
//! the attributes back from the grid cells.
//!
//! Run with `cargo run --example encode_heatmaps [out_dir]`; with an output
//! directory the maps are also written as PFM files.

use std::path::PathBuf;

use graspmap::heatmap::{encode, HeatmapConfig, PixelGrasp};
use graspmap::io::Format;
use graspmap::pipeline::write_heatmaps;
use graspmap::scenegen::{generate_scene, SceneSpec};

fn main() -> graspmap::Result<()> {
    let scene = generate_scene(&SceneSpec::default())?;
    let labels = scene.projected_labels();
    let cfg = HeatmapConfig::default();
    let pixel: Vec<PixelGrasp> = labels.iter().map(PixelGrasp::from).collect();
    let maps = encode(&pixel, &cfg)?;

    let peaks = maps.confidence.iter().filter(|&&v| v == 1.0).count();
    let occupied = maps.occupancy().iter().filter(|&&o| o).count();
    let (hr, wr) = cfg.grid_shape();
    println!("{} labels, {peaks} unit peaks, {occupied} of {} cells occupied", labels.len(), hr * wr);

    // Several labels can share a cell; the strongest anchor is read back.
    let mut cells: Vec<(usize, usize)> = labels.iter().map(|l| (l.pixel.0 / cfg.grid, l.pixel.1 / cfg.grid)).collect();
    cells.dedup();
    for &(i, j) in cells.iter().take(5) {
        let thetas: Vec<String> = labels
            .iter()
            .filter(|l| (l.pixel.0 / cfg.grid, l.pixel.1 / cfg.grid) == (i, j))
            .map(|l| format!("{:+.3}", l.grasp.theta))
            .collect();
        let active: Vec<usize> = (0..cfg.k_a).filter(|&a| maps.theta[(i, j, a)] > 0.0).collect();
        let a = maps.decode_cell(i, j, &cfg);
        println!(
            "cell ({i},{j}) label thetas [{}] anchors {active:?} -> theta {:+.3} w {:.3} d {:+.4}",
            thetas.join(", "),
            a.theta,
            a.width,
            a.depth_offset
        );
    }

    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        std::fs::create_dir_all(&dir)?;
        write_heatmaps(&dir, "", &maps, Format::Pfm)?;
        println!("wrote maps to {}", dir.display());
    }
    Ok(())
}
