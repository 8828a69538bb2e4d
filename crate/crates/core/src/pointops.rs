//! Point-cloud kernels: depth-to-cloud, farthest point sampling, ball query,
//! k-nearest neighbours and normal estimation.
//!
//! Every kernel has a brute-force form; [`SpatialGrid`] provides accelerated
//! ball and KNN queries that return exactly the same index sets.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{deproject, CameraIntrinsics, DepthMap};

/// Points in the camera frame with optional per-point attributes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    /// Unit normals, one per point.
    pub normals: Option<Vec<Vector3<f64>>>,
    /// RGB in `[0, 1]`, one per point.
    pub colors: Option<Vec<[f32; 3]>>,
    /// Source pixel `(row, col)` for clouds built from a depth map.
    pub pixels: Option<Vec<(usize, usize)>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Vector3<f64>>) -> Self {
        Self {
            points,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err(Error::Shape(format!(
                    "{} normals for {n} points",
                    normals.len()
                )));
            }
            if let Some(bad) = normals.iter().position(|v| (v.norm() - 1.0).abs() > 1e-6) {
                return Err(Error::InvalidInput(format!(
                    "normal {bad} is not unit length"
                )));
            }
        }
        if let Some(c) = &self.colors {
            if c.len() != n {
                return Err(Error::Shape(format!("{} colors for {n} points", c.len())));
            }
        }
        if let Some(p) = &self.pixels {
            if p.len() != n {
                return Err(Error::Shape(format!("{} pixels for {n} points", p.len())));
            }
        }
        Ok(())
    }

    /// Sub-cloud with the given indices, carrying all attributes.
    pub fn select(&self, idx: &[usize]) -> PointCloud {
        PointCloud {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| idx.iter().map(|&i| n[i]).collect()),
            colors: self
                .colors
                .as_ref()
                .map(|c| idx.iter().map(|&i| c[i]).collect()),
            pixels: self
                .pixels
                .as_ref()
                .map(|p| idx.iter().map(|&i| p[i]).collect()),
        }
    }
}

#[inline(always)]
pub(crate) fn dist2(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// One point per valid pixel on the `stride` lattice, in row-major order.
///
/// Pixels whose depth is non-finite or not positive are skipped.
pub fn depth_to_cloud(
    depth: &DepthMap,
    intr: &CameraIntrinsics,
    stride: usize,
) -> Result<PointCloud> {
    intr.check_shape("depth map", depth.dim())?;
    if stride == 0 {
        return Err(Error::InvalidInput("stride must be at least 1".into()));
    }
    let (h, w) = depth.dim();
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for r in (0..h).step_by(stride) {
        for c in (0..w).step_by(stride) {
            let z = depth[(r, c)];
            if z.is_finite() && z > 0.0 {
                points.push(deproject(c as f64, r as f64, z, intr)?);
                pixels.push((r, c));
            }
        }
    }
    Ok(PointCloud {
        points,
        pixels: Some(pixels),
        ..PointCloud::default()
    })
}

const LANES: usize = 8;

/// Greedy max-min sampling of `n` indices starting from `start`.
///
/// Ties are broken toward the lowest index.
pub fn farthest_point_sample(points: &[Vector3<f64>], n: usize, start: usize) -> Result<Vec<usize>> {
    if n == 0 || n > points.len() {
        return Err(Error::InvalidInput(format!(
            "cannot sample {n} points from a cloud of {}",
            points.len()
        )));
    }
    if start >= points.len() {
        return Err(Error::InvalidInput(format!(
            "start index {start} out of range for {} points",
            points.len()
        )));
    }
    Ok(if points.len() >= GRID_FPS_MIN {
        fps_grid(points, n, start)
    } else {
        fps_dense(points, n, start)
    })
}

/// Below this size the dense sweep beats the cell-pruned one.
const GRID_FPS_MIN: usize = 128;

fn fps_dense(points: &[Vector3<f64>], n: usize, start: usize) -> Vec<usize> {
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let zs: Vec<f64> = points.iter().map(|p| p.z).collect();
    let mut min_d = vec![f64::INFINITY; points.len()];
    let mut out = Vec::with_capacity(n);
    let mut cur = start;
    loop {
        out.push(cur);
        min_d[cur] = f64::NEG_INFINITY;
        if out.len() == n {
            return out;
        }
        let (px, py, pz) = (xs[cur], ys[cur], zs[cur]);
        // Vectorizable pass: update distances and track the maximum per
        // lane; then the first index attaining it, so ties go low.
        let mut lane = [f64::NEG_INFINITY; LANES];
        let mut chunks_d = min_d.chunks_exact_mut(LANES);
        let mut chunks_x = xs.chunks_exact(LANES);
        let mut chunks_y = ys.chunks_exact(LANES);
        let mut chunks_z = zs.chunks_exact(LANES);
        for (((md, cx), cy), cz) in (&mut chunks_d).zip(&mut chunks_x).zip(&mut chunks_y).zip(&mut chunks_z) {
            for l in 0..LANES {
                let dx = cx[l] - px;
                let dy = cy[l] - py;
                let dz = cz[l] - pz;
                let d = dx * dx + dy * dy + dz * dz;
                let m = if d < md[l] { d } else { md[l] };
                md[l] = m;
                lane[l] = if m > lane[l] { m } else { lane[l] };
            }
        }
        let tail = chunks_d.into_remainder();
        let (tx, ty, tz) = (chunks_x.remainder(), chunks_y.remainder(), chunks_z.remainder());
        for l in 0..tail.len() {
            let dx = tx[l] - px;
            let dy = ty[l] - py;
            let dz = tz[l] - pz;
            let d = dx * dx + dy * dy + dz * dz;
            let m = if d < tail[l] { d } else { tail[l] };
            tail[l] = m;
            lane[l] = if m > lane[l] { m } else { lane[l] };
        }
        let best_d = lane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best = min_d.iter().position(|&d| d == best_d).expect("maximum is attained");
        cur = best;
    }
}

struct FpsCell {
    lo: [f64; 3],
    hi: [f64; 3],
    start: usize,
    end: usize,
    /// Largest running distance in the cell and its first position.
    max: f64,
    arg: usize,
}

impl FpsCell {
    fn refresh(&mut self, min_d: &[f64]) {
        self.max = f64::NEG_INFINITY;
        self.arg = self.start;
        for k in self.start..self.end {
            if min_d[k] > self.max {
                self.max = min_d[k];
                self.arg = k;
            }
        }
    }
}

/// Same result as [`fps_dense`], skipping cells that cannot change.
///
/// Points are bucketed into cells (ascending index within a cell). A cell
/// whose box is farther from the new sample than its largest running
/// distance is left alone: rounding is monotone, so the computed distance of
/// every point in it is at least the computed box bound.
fn fps_grid(points: &[Vector3<f64>], n: usize, start: usize) -> Vec<usize> {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let extent = (hi - lo).max().max(1e-12);
    // Roughly 32 points per cell for surface-like data.
    let g = ((points.len() as f64 / 32.0).sqrt().ceil() as usize).clamp(1, 64);
    let cell = extent / g as f64;
    let key = |p: &Vector3<f64>| {
        let f = |v: f64, o: f64| (((v - o) / cell) as usize).min(g - 1);
        f(p.x, lo.x) + g * (f(p.y, lo.y) + g * f(p.z, lo.z))
    };
    let mut order: Vec<usize> = (0..points.len()).collect();
    let keys: Vec<usize> = points.iter().map(key).collect();
    order.sort_by_key(|&i| keys[i]);
    let mut pos = vec![0usize; points.len()];
    for (k, &i) in order.iter().enumerate() {
        pos[i] = k;
    }
    let xs: Vec<f64> = order.iter().map(|&i| points[i].x).collect();
    let ys: Vec<f64> = order.iter().map(|&i| points[i].y).collect();
    let zs: Vec<f64> = order.iter().map(|&i| points[i].z).collect();
    let mut cells: Vec<FpsCell> = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let mut e = k;
        let mut c = FpsCell {
            lo: [f64::INFINITY; 3],
            hi: [f64::NEG_INFINITY; 3],
            start: k,
            end: k,
            max: f64::INFINITY,
            arg: k,
        };
        while e < order.len() && keys[order[e]] == keys[order[k]] {
            for (a, v) in [xs[e], ys[e], zs[e]].into_iter().enumerate() {
                c.lo[a] = c.lo[a].min(v);
                c.hi[a] = c.hi[a].max(v);
            }
            e += 1;
        }
        c.end = e;
        cells.push(c);
        k = e;
    }
    let cell_of: Vec<usize> = {
        let mut v = vec![0usize; order.len()];
        for (ci, c) in cells.iter().enumerate() {
            v[c.start..c.end].fill(ci);
        }
        v
    };

    let mut min_d = vec![f64::INFINITY; points.len()];
    let mut out = Vec::with_capacity(n);
    let mut cur = start;
    loop {
        out.push(cur);
        let pk = pos[cur];
        min_d[pk] = f64::NEG_INFINITY;
        cells[cell_of[pk]].refresh(&min_d);
        if out.len() == n {
            return out;
        }
        let (px, py, pz) = (xs[pk], ys[pk], zs[pk]);
        for c in cells.iter_mut() {
            let gap = |v: f64, l: f64, h: f64| {
                if v < l {
                    l - v
                } else if v > h {
                    v - h
                } else {
                    0.0
                }
            };
            let ax = gap(px, c.lo[0], c.hi[0]);
            let ay = gap(py, c.lo[1], c.hi[1]);
            let az = gap(pz, c.lo[2], c.hi[2]);
            if ax * ax + ay * ay + az * az > c.max {
                continue;
            }
            let mut max = f64::NEG_INFINITY;
            let mut arg = c.start;
            for k in c.start..c.end {
                let dx = xs[k] - px;
                let dy = ys[k] - py;
                let dz = zs[k] - pz;
                let d = dx * dx + dy * dy + dz * dz;
                let m = if d < min_d[k] { d } else { min_d[k] };
                min_d[k] = m;
                if m > max {
                    max = m;
                    arg = k;
                }
            }
            c.max = max;
            c.arg = arg;
        }
        let mut best: Option<(f64, usize)> = None;
        for c in &cells {
            let i = order[c.arg];
            if c.max > f64::NEG_INFINITY
                && best.is_none_or(|(d, b)| c.max > d || (c.max == d && i < b))
            {
                best = Some((c.max, i));
            }
        }
        cur = best.expect("unselected points remain").1;
    }
}

/// Indices within `radius` of `center` (inclusive), ascending, truncated to `cap`.
pub fn ball_query(points: &[Vector3<f64>], center: &Vector3<f64>, radius: f64, cap: usize) -> Vec<usize> {
    let r2 = radius * radius;
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| dist2(p, center) <= r2)
        .map(|(i, _)| i)
        .take(cap)
        .collect()
}

/// The `k` nearest indices per query, ascending distance, ties by index.
pub fn knn(queries: &[Vector3<f64>], points: &[Vector3<f64>], k: usize) -> Result<Vec<Vec<usize>>> {
    check_k(k, points.len())?;
    Ok(queries
        .iter()
        .map(|q| {
            let mut cand: Vec<(f64, usize)> =
                points.iter().enumerate().map(|(i, p)| (dist2(p, q), i)).collect();
            select_k(&mut cand, k);
            cand.into_iter().map(|(_, i)| i).collect()
        })
        .collect())
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k > n {
        return Err(Error::InvalidInput(format!(
            "k = {k} exceeds cloud size {n}"
        )));
    }
    Ok(())
}

fn cmp_pair(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Keeps the `k` smallest `(distance, index)` pairs, sorted.
fn select_k(cand: &mut Vec<(f64, usize)>, k: usize) {
    if k < cand.len() {
        if k > 0 {
            cand.select_nth_unstable_by(k - 1, cmp_pair);
        }
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp_pair);
}

/// Uniform voxel grid over a fixed point set.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    origin: Vector3<f64>,
    cell: f64,
    dims: [i64; 3],
    starts: Vec<u32>,
    entries: Vec<u32>,
    points: Vec<Vector3<f64>>,
}

const MAX_CELLS: i64 = 1 << 22;

impl SpatialGrid {
    /// Builds a grid with the given cell edge; the edge grows if the point
    /// extent would need an excessive number of cells.
    pub fn new(points: &[Vector3<f64>], cell: f64) -> Result<Self> {
        if !(cell > 0.0 && cell.is_finite()) {
            return Err(Error::InvalidInput(format!("grid cell must be positive, got {cell}")));
        }
        if points.len() >= u32::MAX as usize {
            return Err(Error::InvalidInput("cloud too large for grid index".into()));
        }
        let (lo, hi) = bounds(points);
        let ext = hi - lo;
        let mut cell = cell;
        let dims = loop {
            let d = [0, 1, 2].map(|a| ((ext[a] / cell).floor() as i64 + 1).max(1));
            if d[0] * d[1] * d[2] <= MAX_CELLS {
                break d;
            }
            cell *= 1.5;
        };
        let ncell = (dims[0] * dims[1] * dims[2]) as usize;
        let mut grid = Self {
            origin: lo,
            cell,
            dims,
            starts: vec![0; ncell + 1],
            entries: vec![0; points.len()],
            points: points.to_vec(),
        };
        let ids: Vec<usize> = points.iter().map(|p| grid.flat(grid.coords(p))).collect();
        for &id in &ids {
            grid.starts[id + 1] += 1;
        }
        for i in 0..ncell {
            grid.starts[i + 1] += grid.starts[i];
        }
        let mut fill = grid.starts.clone();
        for (i, &id) in ids.iter().enumerate() {
            grid.entries[fill[id] as usize] = i as u32;
            fill[id] += 1;
        }
        Ok(grid)
    }

    /// Picks a cell edge so that cells hold roughly `per_cell` points,
    /// treating the cloud as a surface.
    pub fn with_density(points: &[Vector3<f64>], per_cell: f64) -> Result<Self> {
        let (lo, hi) = bounds(points);
        let mut e = [hi.x - lo.x, hi.y - lo.y, hi.z - lo.z];
        e.sort_by(|a, b| b.total_cmp(a));
        let n = points.len().max(1) as f64;
        let area = (e[0] * e[1]).max(e[0] * e[0] * 1e-6);
        let cell = (area * per_cell / n).sqrt().max(1e-6);
        Self::new(points, if cell.is_finite() { cell } else { 1.0 })
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn coords(&self, p: &Vector3<f64>) -> [i64; 3] {
        let c = (p - self.origin) / self.cell;
        [c.x, c.y, c.z].map(|v| {
            let v = v.floor();
            if v.is_finite() {
                v as i64
            } else {
                0
            }
        })
    }

    fn flat(&self, c: [i64; 3]) -> usize {
        let c = [0, 1, 2].map(|a| c[a].clamp(0, self.dims[a] - 1));
        ((c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]) as usize
    }

    fn cell_entries(&self, x: i64, y: i64, z: i64) -> &[u32] {
        let id = ((z * self.dims[1] + y) * self.dims[0] + x) as usize;
        &self.entries[self.starts[id] as usize..self.starts[id + 1] as usize]
    }

    /// Same result as [`ball_query`] on the indexed points.
    pub fn ball_query(&self, center: &Vector3<f64>, radius: f64, cap: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.ball_query_into(center, radius, &mut out);
        out.truncate(cap);
        out
    }

    /// Every index within `radius`, ascending, written to `out`.
    pub fn ball_query_into(&self, center: &Vector3<f64>, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        if self.points.is_empty() || !(radius >= 0.0) {
            return;
        }
        let r2 = radius * radius;
        let lo = self.coords(&center.add_scalar(-radius));
        let hi = self.coords(&center.add_scalar(radius));
        // One cell of padding absorbs rounding in the coordinate mapping.
        let range = |a: usize| (lo[a] - 1).max(0)..=(hi[a] + 1).min(self.dims[a] - 1);
        for z in range(2) {
            for y in range(1) {
                for x in range(0) {
                    for &i in self.cell_entries(x, y, z) {
                        if dist2(&self.points[i as usize], center) <= r2 {
                            out.push(i as usize);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
    }

    /// Same result as [`knn`] on the indexed points.
    pub fn knn(&self, queries: &[Vector3<f64>], k: usize) -> Result<Vec<Vec<usize>>> {
        check_k(k, self.points.len())?;
        let mut cand = Vec::new();
        Ok(queries
            .iter()
            .map(|q| {
                self.knn_one(q, k, &mut cand);
                cand.iter().map(|&(_, i)| i).collect()
            })
            .collect())
    }

    /// Sorted `(squared distance, index)` of the `k` nearest points to `q`.
    pub(crate) fn knn_one(&self, q: &Vector3<f64>, k: usize, cand: &mut Vec<(f64, usize)>) {
        cand.clear();
        if k == 0 {
            return;
        }
        let c = self.coords(q);
        let mut ring = 0i64;
        loop {
            self.visit_shell(c, ring, |i| cand.push((dist2(&self.points[i], q), i)));
            let covers_all = (0..3).all(|a| c[a] - ring <= 0 && c[a] + ring >= self.dims[a] - 1);
            if cand.len() >= k {
                select_k(cand, k);
                let dk = cand[k - 1].0.sqrt();
                if covers_all || dk < ring as f64 * self.cell * (1.0 - 1e-9) {
                    return;
                }
            } else if covers_all {
                select_k(cand, k);
                return;
            }
            ring += 1;
        }
    }

    /// Visits every point in cells at Chebyshev distance exactly `ring` from `c`.
    fn visit_shell(&self, c: [i64; 3], ring: i64, mut f: impl FnMut(usize)) {
        let lo = [0, 1, 2].map(|a| (c[a] - ring).max(0));
        let hi = [0, 1, 2].map(|a| (c[a] + ring).min(self.dims[a] - 1));
        if (0..3).any(|a| lo[a] > hi[a]) {
            return;
        }
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                if (z - c[2]).abs() == ring || (y - c[1]).abs() == ring {
                    for x in lo[0]..=hi[0] {
                        self.cell_entries(x, y, z).iter().for_each(|&i| f(i as usize));
                    }
                } else {
                    // Interior of this row was visited by an earlier ring.
                    for x in [c[0] - ring, c[0] + ring] {
                        if x >= lo[0] && x <= hi[0] && (ring > 0 || x == c[0]) {
                            self.cell_entries(x, y, z).iter().for_each(|&i| f(i as usize));
                        }
                        if ring == 0 {
                            break;
                        }
                    }
                }
            }
        }
    }
}

fn bounds(points: &[Vector3<f64>]) -> (Vector3<f64>, Vector3<f64>) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in points {
        if p.iter().all(|v| v.is_finite()) {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
    }
    if lo.x > hi.x {
        (Vector3::zeros(), Vector3::zeros())
    } else {
        (lo, hi)
    }
}

/// Per-point normals from the `k`-neighbourhood covariance, oriented toward
/// the camera origin.
///
/// Returns the cloud with normals and a validity flag per point; points whose
/// neighbourhood has rank below two get the viewing direction as a stand-in
/// normal and are flagged invalid.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<(PointCloud, Vec<bool>)> {
    if k < 3 {
        return Err(Error::InvalidInput(format!("normal estimation needs k >= 3, got {k}")));
    }
    check_k(k, cloud.len())?;
    let grid = SpatialGrid::with_density(&cloud.points, k as f64)?;
    let mut cand = Vec::new();
    let mut normals = Vec::with_capacity(cloud.len());
    let mut valid = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        grid.knn_one(p, k, &mut cand);
        let mean = cand
            .iter()
            .fold(Vector3::zeros(), |acc, &(_, i)| acc + cloud.points[i])
            / k as f64;
        let mut cov = Matrix3::zeros();
        for &(_, i) in cand.iter() {
            let d = cloud.points[i] - mean;
            cov += d * d.transpose();
        }
        let eig = SymmetricEigen::new(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let largest = eig.eigenvalues[order[2]];
        let middle = eig.eigenvalues[order[1]];
        let view = -p.normalize();
        if !(largest > 0.0) || middle <= 1e-10 * largest {
            normals.push(if view.iter().all(|v| v.is_finite()) { view } else { -Vector3::z() });
            valid.push(false);
            continue;
        }
        let mut n: Vector3<f64> = eig.eigenvectors.column(order[0]).into_owned().normalize();
        if n.dot(p) > 0.0 {
            n = -n;
        }
        normals.push(n);
        valid.push(true);
    }
    let mut out = cloud.clone();
    out.normals = Some(normals);
    Ok((out, valid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam(w: u32, h: u32) -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, (w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0, w, h)
            .unwrap()
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| Vector3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    #[test]
    fn grid_fps_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..60 {
            let n = rng.random_range(130..3000);
            let pts: Vec<Vector3<f64>> = if trial % 2 == 0 {
                random_cloud(&mut rng, n)
            } else {
                // Coarse lattice: many exact ties and duplicates.
                (0..n)
                    .map(|_| {
                        Vector3::new(
                            rng.random_range(0..6) as f64,
                            rng.random_range(0..6) as f64,
                            rng.random_range(0..3) as f64 * 0.5,
                        )
                    })
                    .collect()
            };
            let k = rng.random_range(1..=n.min(600));
            let start = rng.random_range(0..n);
            assert_eq!(fps_grid(&pts, k, start), fps_dense(&pts, k, start), "trial {trial}");
        }
    }

    #[test]
    fn plane_depth_gives_plane_cloud() {
        let d = Array2::from_elem((6, 8), 1.0);
        let c = depth_to_cloud(&d, &cam(8, 6), 1).unwrap();
        assert_eq!(c.len(), 48);
        assert!(c.points.iter().all(|p| p.z == 1.0));
    }

    #[test]
    fn stride_lattice_count() {
        let d = Array2::from_elem((2, 2), 1.0);
        assert_eq!(depth_to_cloud(&d, &cam(2, 2), 2).unwrap().len(), 1);
    }

    #[test]
    fn invalid_pixels_skipped() {
        let mut d = Array2::from_elem((5, 7), 0.5);
        d[(2, 3)] = f64::NAN;
        let c = depth_to_cloud(&d, &cam(7, 5), 1).unwrap();
        assert_eq!(c.len(), 34);
        assert!(!c.pixels.unwrap().contains(&(2, 3)));
        d[(0, 0)] = -1.0;
        d[(0, 1)] = 0.0;
        assert_eq!(depth_to_cloud(&d, &cam(7, 5), 1).unwrap().len(), 32);
    }

    #[test]
    fn depth_shape_must_match() {
        let d = Array2::from_elem((5, 5), 1.0);
        assert!(matches!(depth_to_cloud(&d, &cam(7, 5), 1), Err(Error::Shape(_))));
    }

    #[test]
    fn fps_small_cases() {
        let pts = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.4, 0.0, 0.0),
        ];
        assert_eq!(farthest_point_sample(&pts, 1, 2).unwrap(), vec![2]);
        assert_eq!(farthest_point_sample(&pts, 2, 0).unwrap(), vec![0, 1]);
        assert_eq!(farthest_point_sample(&pts, 3, 0).unwrap(), vec![0, 1, 2]);
        assert!(farthest_point_sample(&pts, 4, 0).is_err());
    }

    #[test]
    fn fps_duplicates_pick_lowest_index() {
        let pts = vec![Vector3::zeros(); 4];
        assert_eq!(farthest_point_sample(&pts, 4, 2).unwrap(), vec![2, 0, 1, 3]);
    }

    #[test]
    fn fps_min_spacing_shrinks_with_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_cloud(&mut rng, 200);
        let full = farthest_point_sample(&pts, 60, 0).unwrap();
        let mut prev = f64::INFINITY;
        for n in 2..=60 {
            let sel = &full[..n];
            assert_eq!(sel, &farthest_point_sample(&pts, n, 0).unwrap()[..]);
            let mut m = f64::INFINITY;
            for a in 0..n {
                for b in a + 1..n {
                    m = m.min(dist2(&pts[sel[a]], &pts[sel[b]]));
                }
            }
            assert!(m <= prev);
            prev = m;
        }
    }

    #[test]
    fn ball_query_examples() {
        let pts = vec![Vector3::new(0.5, 0.0, 0.0), Vector3::new(1.5, 0.0, 0.0)];
        assert_eq!(ball_query(&pts, &Vector3::zeros(), 1.0, 10), vec![0]);
        let edge = vec![Vector3::new(0.0, 1.0, 0.0)];
        assert_eq!(ball_query(&edge, &Vector3::zeros(), 1.0, 10), vec![0]);
        let grid = SpatialGrid::new(&edge, 0.25).unwrap();
        assert_eq!(grid.ball_query(&Vector3::zeros(), 1.0, 10), vec![0]);
    }

    #[test]
    fn knn_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = random_cloud(&mut rng, 30);
        let r = knn(&[pts[7]], &pts, 1).unwrap();
        assert_eq!(r[0], vec![7]);
        let all = knn(&[Vector3::zeros()], &pts, 30).unwrap();
        let mut seen = all[0].clone();
        seen.sort();
        assert_eq!(seen, (0..30).collect::<Vec<_>>());
        assert!(knn(&[Vector3::zeros()], &pts, 31).is_err());
    }

    #[test]
    fn grid_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..50 {
            let n = rng.random_range(1..400);
            let pts = random_cloud(&mut rng, n);
            let grid = SpatialGrid::new(&pts, rng.random_range(0.02..0.5)).unwrap();
            let qs: Vec<_> = (0..10)
                .map(|_| Vector3::new(rng.random_range(-0.5..1.5), rng.random(), rng.random()))
                .collect();
            let k = rng.random_range(1..=n.min(20));
            assert_eq!(grid.knn(&qs, k).unwrap(), knn(&qs, &pts, k).unwrap(), "trial {trial}");
            for q in &qs {
                let r = rng.random_range(0.01..0.6);
                assert_eq!(grid.ball_query(q, r, usize::MAX), ball_query(&pts, q, r, usize::MAX));
            }
        }
    }

    #[test]
    fn plane_normals_face_camera() {
        let d = Array2::from_elem((20, 20), 1.0);
        let c = depth_to_cloud(&d, &cam(20, 20), 1).unwrap();
        let (c, valid) = estimate_normals(&c, 8).unwrap();
        assert!(valid.iter().all(|&v| v));
        for n in c.normals.unwrap() {
            assert!((n - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn sphere_normals_are_radial() {
        let n = 4000;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let pts: Vec<_> = (0..n)
            .map(|i| {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - y * y).sqrt();
                let a = golden * i as f64;
                Vector3::new(r * a.cos(), y, r * a.sin())
            })
            .collect();
        let (c, valid) = estimate_normals(&PointCloud::from_points(pts), 12).unwrap();
        let normals = c.normals.unwrap();
        for ((p, n), v) in c.points.iter().zip(&normals).zip(valid) {
            assert!(v);
            assert!(n.dot(p) <= 0.0);
            assert!(n.dot(&-p).acos() < 5f64.to_radians());
        }
    }

    #[test]
    fn collinear_neighbourhood_is_flagged() {
        let pts: Vec<_> = (0..10).map(|i| Vector3::new(i as f64, 0.0, 1.0)).collect();
        let (c, valid) = estimate_normals(&PointCloud::from_points(pts), 4).unwrap();
        assert!(valid.iter().all(|v| !v));
        c.validate().unwrap();
    }
}
