//! Kernels and metrics against brute-force references on hand-built edge cases.

mod common;

use graspmap::eval::{collision_check, coverage_rate, evaluate, EvalConfig, SceneIndex};
use graspmap::geometry::{compose_rotation, Grasp6D, GripperSpec};
use graspmap::pointops::{ball_query, farthest_point_sample, knn, PointCloud, SpatialGrid};
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
    Vector3::new(x, y, z)
}

#[test]
fn fps_around_the_grid_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [1, 2, 127, 128, 129, 500, 4096] {
        let pts = common::random_cloud(&mut rng, n);
        for k in [1, n.min(7), n.min(128), n] {
            assert_eq!(farthest_point_sample(&pts, k, n / 2).unwrap(), common::fps_oracle(&pts, k, n / 2), "n {n} k {k}");
        }
    }
}

#[test]
fn fps_on_identical_points_takes_lowest_indices() {
    let pts = vec![v(0.1, 0.1, 0.1); 300];
    let got = farthest_point_sample(&pts, 5, 3).unwrap();
    assert_eq!(got, vec![3, 0, 1, 2, 4]);
    assert_eq!(got, common::fps_oracle(&pts, 5, 3));
    assert!(farthest_point_sample(&pts, 301, 0).is_err());
}

#[test]
fn ball_boundary_is_inclusive() {
    let pts = vec![v(0.5, 0.0, 0.0), v(0.0, 0.25, 0.0), v(0.0, 0.0, -0.5), v(0.5000001, 0.0, 0.0)];
    let c = Vector3::zeros();
    assert_eq!(ball_query(&pts, &c, 0.5, usize::MAX), vec![0, 1, 2]);
    assert_eq!(common::ball_oracle(&pts, &c, 0.5), vec![0, 1, 2]);
    let grid = SpatialGrid::new(&pts, 0.1).unwrap();
    assert_eq!(grid.ball_query(&c, 0.5, usize::MAX), vec![0, 1, 2]);
    assert_eq!(grid.ball_query(&c, 0.5, 2), vec![0, 1]);
}

#[test]
fn knn_ties_resolve_by_index() {
    let pts: Vec<Vector3<f64>> = (0..27)
        .map(|i| v((i % 3) as f64, ((i / 3) % 3) as f64, (i / 9) as f64))
        .collect();
    let q = [v(1.0, 1.0, 1.0)];
    let want = common::knn_oracle(&pts, &q[0], 7);
    assert_eq!(want, vec![13, 4, 10, 12, 14, 16, 22]);
    assert_eq!(knn(&q, &pts, 7).unwrap()[0], want);
    assert_eq!(SpatialGrid::new(&pts, 0.7).unwrap().knn(&q, 7).unwrap()[0], want);
}

#[test]
fn points_on_finger_faces_do_not_collide() {
    let gripper = GripperSpec::default();
    let g = Grasp6D::new(v(0.0, 0.0, 0.5), &compose_rotation(0.3, 0.2, -0.1), 0.05, 1.0);
    let r = g.rotation();
    let world = |l: Vector3<f64>| g.t + r * l;
    // Finger spans y in (w/2, w/2 + t) in the gripper frame.
    for (local, hit) in [
        (v(0.0, 0.03, 0.0), true),
        (v(0.0, 0.0, 0.0), false),
        (v(0.0, 0.0351, 0.0), false),
        (v(0.0, 0.03, 0.0101), false),
        (v(-0.025, 0.0, 0.0), true),
        (v(0.019, -0.031, 0.009), true),
    ] {
        let p = [world(local)];
        assert_eq!(collision_check(&g, &p, &gripper), hit, "{local:?}");
        assert_eq!(common::collision_oracle(&g, &p, &gripper), hit, "{local:?}");
    }
}

#[test]
fn metrics_match_brute_force_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let gripper = GripperSpec::default();
    let cfg = EvalConfig::default();
    for _ in 0..50 {
        let rand_grasp = |rng: &mut ChaCha8Rng| {
            let rot = compose_rotation(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let t = v(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(0.4..0.5));
            Grasp6D::new(t, &rot, rng.random_range(0.02..0.08), rng.random_range(0.0..1.0))
        };
        let gt: Vec<Grasp6D> = (0..20).map(|_| rand_grasp(&mut rng)).collect();
        let pred: Vec<Grasp6D> = gt
            .iter()
            .take(10)
            .map(|g| {
                let jitter = Rotation3::from_euler_angles(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                );
                Grasp6D::new(g.t + v(0.01, -0.01, 0.005), &(g.rotation() * jitter), g.width, g.score)
            })
            .collect();
        let pts: Vec<Vector3<f64>> = (0..2000)
            .map(|_| v(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(0.4..0.5)))
            .collect();
        let mut cloud = PointCloud::from_points(pts);
        cloud.normals = Some(vec![v(0.0, 0.0, -1.0); cloud.len()]);

        let report = evaluate(&pred, &gt, &cloud, &gripper, &cfg).unwrap();
        let cr = common::coverage_oracle(&pred, &gt, cfg.trans_thresh, cfg.rot_thresh);
        assert_eq!(report.cr, cr);
        assert_eq!(coverage_rate(&pred, &gt, cfg.trans_thresh, cfg.rot_thresh).unwrap(), cr);
        let free = pred
            .iter()
            .filter(|g| !common::collision_oracle(g, &cloud.points, &gripper))
            .count();
        assert_eq!(report.cfr, free as f64 / pred.len() as f64);
        let index = SceneIndex::new(&cloud).unwrap();
        for (i, g) in pred.iter().enumerate() {
            assert_eq!(index.antipodal(g, &gripper, cfg.mu).unwrap().score, report.antipodal[i]);
            assert_eq!(index.collides(g, &gripper), report.collides[i]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fps_and_ball_agree_with_oracles(
        coords in prop::collection::vec((-1i32..=1, -1i32..=1, 0i32..=2, -50i32..50), 2..300),
        k_frac in 0.0f64..1.0,
        r in 0.0f64..0.15,
    ) {
        // Quantized coordinates force frequent distance ties.
        let pts: Vec<Vector3<f64>> = coords
            .iter()
            .map(|&(a, b, c, e)| v(a as f64 * 0.05, b as f64 * 0.05, c as f64 * 0.05 + e as f64 * 1e-4))
            .collect();
        let k = ((pts.len() as f64 * k_frac) as usize).max(1);
        prop_assert_eq!(farthest_point_sample(&pts, k, 0).unwrap(), common::fps_oracle(&pts, k, 0));
        let c = pts[pts.len() / 2];
        let want = common::ball_oracle(&pts, &c, r);
        prop_assert_eq!(ball_query(&pts, &c, r, usize::MAX), want.clone());
        prop_assert_eq!(SpatialGrid::new(&pts, 0.03).unwrap().ball_query(&c, r, usize::MAX), want);
    }
}
