//! Heatmap-guided region aggregation.
//!
//! The confidence map is reduced to the attribute grid, the strongest cells
//! become region centers, and around each center a ball of radius equal to
//! the decoded grasp width is cropped from the cloud and farthest-point
//! sampled to a fixed size.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{deproject, CameraIntrinsics, DepthMap};
use crate::heatmap::{downsample_bilinear, HeatmapConfig, HeatmapSet};
use crate::pointops::{farthest_point_sample, PointCloud, SpatialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationConfig {
    /// Regions per scene.
    pub k_center: usize,
    /// Points per region.
    pub n_g: usize,
    /// Balls with fewer points are dropped.
    pub min_region_points: usize,
    /// Neighbours per region point in the pixel fusion map.
    pub fusion_k: usize,
    /// Build the pixel fusion map.
    pub fusion_map: bool,
    /// Keep at most this many ball points (lowest indices first) before sampling.
    pub ball_cap: Option<usize>,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            k_center: 48,
            n_g: 512,
            min_region_points: 16,
            fusion_k: 16,
            fusion_map: false,
            ball_cap: None,
        }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_center == 0 {
            return Err(Error::InvalidInput("k_center must be at least 1".into()));
        }
        if self.min_region_points == 0 || self.n_g < self.min_region_points {
            return Err(Error::InvalidInput(format!(
                "need n_g ({}) >= min_region_points ({}) >= 1",
                self.n_g, self.min_region_points
            )));
        }
        if self.ball_cap == Some(0) {
            return Err(Error::InvalidInput("ball_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// A selected grid cell lifted to 3-D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionCenter {
    /// Grid cell `(row, col)`.
    pub cell: (usize, usize),
    /// Peak pixel `(row, col)` inside the cell.
    pub pixel: (usize, usize),
    pub center: Vector3<f64>,
    /// Decoded grasp width, used as the crop radius.
    pub radius: f64,
    /// Decoded in-plane angle of the cell.
    pub theta: f64,
    /// Decoded depth offset of the cell.
    pub depth_offset: f64,
    /// Downsampled confidence of the cell.
    pub score: f64,
}

/// A fixed-size local point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    #[serde(flatten)]
    pub center: RegionCenter,
    /// `n_g` indices into the scene cloud.
    pub indices: Vec<usize>,
    /// Distinct points in the ball before padding.
    pub ball_size: usize,
    /// Per region point, the source pixels of its nearest cloud points.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pixel_knn: Option<Vec<Vec<(usize, usize)>>>,
}

/// Ranks grid cells by downsampled confidence and lifts the best ones.
///
/// Cells are taken in descending order (row-major among equals). A cell is
/// skipped, and the next one taken instead, when none of its pixels has
/// valid depth or when its decoded width is not positive.
pub fn select_centers(
    maps: &HeatmapSet,
    depth: &DepthMap,
    intr: &CameraIntrinsics,
    hcfg: &HeatmapConfig,
    cfg: &AggregationConfig,
) -> Result<Vec<RegionCenter>> {
    hcfg.validate()?;
    cfg.validate()?;
    maps.check(hcfg)?;
    intr.check_shape("depth map", depth.dim())?;
    if depth.dim() != maps.confidence.dim() {
        return Err(Error::Shape("depth and confidence maps differ in size".into()));
    }
    let grid = hcfg.grid_shape();
    let reduced = downsample_bilinear(&maps.confidence, grid)?;
    let mut cells: Vec<(f64, usize, usize)> = reduced
        .indexed_iter()
        .filter(|(_, &v)| v > 0.0)
        .map(|((i, j), &v)| (v, i, j))
        .collect();
    // Stable: equal scores keep row-major order.
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));

    let r = hcfg.grid;
    let mut out = Vec::with_capacity(cfg.k_center);
    for (score, i, j) in cells {
        if out.len() == cfg.k_center {
            break;
        }
        let mut peak: Option<((usize, usize), f64)> = None;
        for row in i * r..(i + 1) * r {
            for col in j * r..(j + 1) * r {
                let z = depth[(row, col)];
                let q = maps.confidence[(row, col)];
                if z.is_finite() && z > 0.0 && peak.is_none_or(|(_, best)| q > best) {
                    peak = Some(((row, col), q));
                }
            }
        }
        let Some((pixel, _)) = peak else { continue };
        let attr = maps.decode_cell(i, j, hcfg);
        let z = depth[pixel] + attr.depth_offset;
        if !(attr.width > 0.0) || !(z > 0.0) {
            continue;
        }
        out.push(RegionCenter {
            cell: (i, j),
            pixel,
            center: deproject(pixel.1 as f64, pixel.0 as f64, z, intr)?,
            radius: attr.width,
            theta: attr.theta,
            depth_offset: attr.depth_offset,
            score,
        });
    }
    Ok(out)
}

/// Spatial index over a scene cloud, reusable across region queries.
pub struct RegionIndex<'a> {
    cloud: &'a PointCloud,
    grid: SpatialGrid,
}

impl<'a> RegionIndex<'a> {
    pub fn new(cloud: &'a PointCloud) -> Result<Self> {
        Ok(Self {
            cloud,
            grid: SpatialGrid::new(&cloud.points, 0.02)?,
        })
    }

    pub fn cloud(&self) -> &PointCloud {
        self.cloud
    }

    /// Ball crop followed by farthest point sampling (from the first ball
    /// point) to `n_g`, repeat-padding thin balls.
    pub fn aggregate(&self, centers: &[RegionCenter], cfg: &AggregationConfig) -> Result<Vec<Region>> {
        cfg.validate()?;
        let mut ball = Vec::new();
        let mut local = Vec::new();
        let mut regions = Vec::with_capacity(centers.len());
        for c in centers {
            self.grid.ball_query_into(&c.center, c.radius, &mut ball);
            if let Some(cap) = cfg.ball_cap {
                ball.truncate(cap);
            }
            if ball.len() < cfg.min_region_points {
                continue;
            }
            local.clear();
            local.extend(ball.iter().map(|&i| self.cloud.points[i]));
            let take = cfg.n_g.min(ball.len());
            let picked = farthest_point_sample(&local, take, 0)?;
            let mut indices: Vec<usize> = picked.iter().map(|&k| ball[k]).collect();
            for k in 0..cfg.n_g - take {
                indices.push(indices[k % take]);
            }
            let pixel_knn = if cfg.fusion_map {
                Some(self.fusion_map(&indices, cfg.fusion_k)?)
            } else {
                None
            };
            regions.push(Region {
                center: *c,
                indices,
                ball_size: ball.len(),
                pixel_knn,
            });
        }
        Ok(regions)
    }

    fn fusion_map(&self, indices: &[usize], k: usize) -> Result<Vec<Vec<(usize, usize)>>> {
        let pixels = self.cloud.pixels.as_ref().ok_or_else(|| {
            Error::InvalidInput("fusion map needs a cloud built from a depth map".into())
        })?;
        let queries: Vec<Vector3<f64>> = indices.iter().map(|&i| self.cloud.points[i]).collect();
        let k = k.min(self.cloud.len());
        Ok(self
            .grid
            .knn(&queries, k)?
            .into_iter()
            .map(|nn| nn.into_iter().map(|i| pixels[i]).collect())
            .collect())
    }
}

/// One-shot form of [`RegionIndex::aggregate`].
pub fn aggregate_regions(
    cloud: &PointCloud,
    centers: &[RegionCenter],
    cfg: &AggregationConfig,
) -> Result<Vec<Region>> {
    RegionIndex::new(cloud)?.aggregate(centers, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grasp2D5;
    use crate::heatmap::{encode, PixelGrasp};
    use crate::pointops::{ball_query, depth_to_cloud};
    use ndarray::Array2;

    fn setup() -> (HeatmapConfig, CameraIntrinsics) {
        let h = HeatmapConfig {
            height: 48,
            width: 64,
            ..HeatmapConfig::default()
        };
        let intr = CameraIntrinsics::new(60.0, 60.0, 31.5, 23.5, 64, 48).unwrap();
        (h, intr)
    }

    fn grasp(u: f64, v: f64) -> PixelGrasp {
        PixelGrasp {
            grasp: Grasp2D5 {
                u,
                v,
                theta: 0.3,
                w: 0.05,
                d: 0.01,
                gamma: 0.0,
                beta: 0.0,
            },
            width_px: 8.0,
        }
    }

    #[test]
    fn single_peak_selects_its_cell() {
        let (h, intr) = setup();
        let maps = encode(&[grasp(20.0, 13.0)], &h).unwrap();
        let depth = Array2::from_elem((48, 64), 1.0);
        let cfg = AggregationConfig {
            k_center: 1,
            ..AggregationConfig::default()
        };
        let c = select_centers(&maps, &depth, &intr, &h, &cfg).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].cell, (1, 2));
        assert_eq!(c[0].pixel, (13, 20));
        assert!((c[0].radius - 0.05).abs() < 1e-12);
        let want = deproject(20.0, 13.0, 1.01, &intr).unwrap();
        assert!((c[0].center - want).norm() < 1e-12);
    }

    #[test]
    fn equal_peaks_come_out_row_major() {
        let (h, intr) = setup();
        let maps = encode(&[grasp(51.5, 35.5), grasp(11.5, 35.5), grasp(43.5, 11.5)], &h).unwrap();
        let depth = Array2::from_elem((48, 64), 1.0);
        let cfg = AggregationConfig {
            k_center: 2,
            ..AggregationConfig::default()
        };
        let c = select_centers(&maps, &depth, &intr, &h, &cfg).unwrap();
        let cells: Vec<_> = c.iter().map(|c| c.cell).collect();
        assert_eq!(cells, vec![(1, 5), (4, 1)]);
    }

    #[test]
    fn enough_budget_takes_every_live_cell() {
        let (h, intr) = setup();
        let maps = encode(&[grasp(20.0, 13.0), grasp(50.0, 30.0)], &h).unwrap();
        let depth = Array2::from_elem((48, 64), 1.0);
        let c = select_centers(&maps, &depth, &intr, &h, &AggregationConfig::default()).unwrap();
        let live = downsample_bilinear(&maps.confidence, h.grid_shape())
            .unwrap()
            .iter()
            .filter(|&&v| v > 0.0)
            .count();
        // Neighbouring cells touched only by the Gaussian tail decode to zero width.
        assert_eq!(c.len(), 2);
        assert!(live >= 2);
    }

    #[test]
    fn cell_without_depth_is_replaced() {
        let (h, intr) = setup();
        let maps = encode(&[grasp(20.0, 13.0), grasp(50.0, 30.0)], &h).unwrap();
        let mut depth = Array2::from_elem((48, 64), 1.0);
        for r in 8..16 {
            for c in 16..24 {
                depth[(r, c)] = f64::NAN;
            }
        }
        let cfg = AggregationConfig {
            k_center: 1,
            ..AggregationConfig::default()
        };
        let c = select_centers(&maps, &depth, &intr, &h, &cfg).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].cell, (3, 6));
    }

    fn center_at(p: Vector3<f64>, radius: f64) -> RegionCenter {
        RegionCenter {
            cell: (0, 0),
            pixel: (0, 0),
            center: p,
            radius,
            theta: 0.0,
            depth_offset: 0.0,
            score: 1.0,
        }
    }

    #[test]
    fn full_ball_is_a_permutation() {
        let (_, intr) = setup();
        let depth = Array2::from_elem((48, 64), 1.0);
        let cloud = depth_to_cloud(&depth, &intr, 2).unwrap();
        let cfg = AggregationConfig {
            n_g: cloud.len(),
            ..AggregationConfig::default()
        };
        let r = aggregate_regions(&cloud, &[center_at(Vector3::new(0.0, 0.0, 1.0), 5.0)], &cfg).unwrap();
        let mut idx = r[0].indices.clone();
        idx.sort();
        assert_eq!(idx, (0..cloud.len()).collect::<Vec<_>>());
    }

    #[test]
    fn thin_ball_is_padded_or_dropped() {
        let pts: Vec<_> = (0..300).map(|i| Vector3::new(i as f64 * 1e-4, 0.0, 1.0)).collect();
        let cloud = PointCloud::from_points(pts);
        let c = center_at(Vector3::new(0.0, 0.0, 1.0), 1.0);
        let r = aggregate_regions(&cloud, &[c], &AggregationConfig::default()).unwrap();
        assert_eq!(r[0].indices.len(), 512);
        assert_eq!(r[0].ball_size, 300);
        assert!(r[0].indices.iter().all(|&i| i < 300));
        let mut distinct = r[0].indices.clone();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), 300);

        let small = PointCloud::from_points(cloud.points[..15].to_vec());
        assert!(aggregate_regions(&small, &[c], &AggregationConfig::default()).unwrap().is_empty());
        let edge = PointCloud::from_points(cloud.points[..16].to_vec());
        assert_eq!(aggregate_regions(&edge, &[c], &AggregationConfig::default()).unwrap().len(), 1);
    }

    #[test]
    fn region_points_stay_in_ball() {
        let (_, intr) = setup();
        let depth = Array2::from_shape_fn((48, 64), |(r, c)| 1.0 + 0.002 * ((r * c) % 7) as f64);
        let cloud = depth_to_cloud(&depth, &intr, 1).unwrap();
        let c = center_at(Vector3::new(0.05, -0.03, 1.0), 0.08);
        let cfg = AggregationConfig {
            n_g: 64,
            fusion_map: true,
            ..AggregationConfig::default()
        };
        let r = aggregate_regions(&cloud, &[c], &cfg).unwrap();
        let oracle = ball_query(&cloud.points, &c.center, c.radius, usize::MAX);
        assert_eq!(r[0].ball_size, oracle.len());
        assert!(r[0].indices.iter().all(|i| oracle.binary_search(i).is_ok()));
        let fm = r[0].pixel_knn.as_ref().unwrap();
        assert_eq!(fm.len(), 64);
        assert!(fm.iter().all(|v| v.len() == 16));
        // A point's nearest neighbour is itself.
        let pixels = cloud.pixels.as_ref().unwrap();
        for (k, &i) in r[0].indices.iter().enumerate() {
            assert_eq!(fm[k][0], pixels[i]);
        }
        assert_eq!(r, aggregate_regions(&cloud, &[c], &cfg).unwrap());
    }
}
