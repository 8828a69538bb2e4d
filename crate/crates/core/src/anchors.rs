//! Non-uniform rotation anchors for the out-of-plane angles `γ` and `β`.
//!
//! Anchors are fitted to observed angles by alternating nearest-anchor
//! assignment and a per-anchor least-squares update. Because each sample is
//! assigned to exactly one anchor, the normal equations are diagonal and the
//! update is the mean of each anchor's samples. [`AnchorSet`] buffers samples
//! and refits once the buffer grows past its threshold.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatmap::nearest_of;

/// `k` midpoints of equal sub-intervals of `[-π/2, π/2]`.
pub fn uniform_anchors(k: usize) -> Vec<f64> {
    let pitch = PI / k as f64;
    (0..k).map(|i| -FRAC_PI_2 + (i as f64 + 0.5) * pitch).collect()
}

fn require_anchors(anchors: &[f64]) -> Result<()> {
    if anchors.is_empty() {
        return Err(Error::InvalidInput("at least one anchor is required".into()));
    }
    Ok(())
}

/// Nearest anchor per sample, ties to the lower index.
pub fn assign_nearest(samples: &[f64], anchors: &[f64]) -> Result<Vec<usize>> {
    require_anchors(anchors)?;
    Ok(samples.iter().map(|&s| nearest_of(anchors, s)).collect())
}

/// Sum of squared distances from each sample to its nearest anchor.
pub fn fitting_error(anchors: &[f64], samples: &[f64]) -> Result<f64> {
    require_anchors(anchors)?;
    Ok(samples
        .iter()
        .map(|&s| {
            let a = anchors[nearest_of(anchors, s)];
            (a - s) * (a - s)
        })
        .sum())
}

/// `iterations` rounds of assignment followed by the mean update.
///
/// Anchors with no samples keep their value; the result is sorted and
/// clamped to `[-π/2, π/2]`.
pub fn shift_step(anchors: &[f64], samples: &[f64], iterations: usize) -> Result<Vec<f64>> {
    require_anchors(anchors)?;
    if iterations == 0 {
        return Err(Error::InvalidInput("shift iterations must be at least 1".into()));
    }
    let mut cur = anchors.to_vec();
    if samples.is_empty() {
        return Ok(cur);
    }
    let mut sum = vec![0.0; cur.len()];
    let mut count = vec![0usize; cur.len()];
    for _ in 0..iterations {
        sum.iter_mut().for_each(|v| *v = 0.0);
        count.iter_mut().for_each(|v| *v = 0);
        for &s in samples {
            let i = nearest_of(&cur, s);
            sum[i] += s;
            count[i] += 1;
        }
        for i in 0..cur.len() {
            if count[i] > 0 {
                cur[i] = sum[i] / count[i] as f64;
            }
        }
        cur.sort_by(f64::total_cmp);
        cur.iter_mut().for_each(|a| *a = a.clamp(-FRAC_PI_2, FRAC_PI_2));
    }
    Ok(cur)
}

/// γ and β anchors with the streaming sample buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AnchorSetRecord", into = "AnchorSetRecord")]
pub struct AnchorSet {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    /// Refit once the buffer holds more than this many samples.
    pub flush_threshold: usize,
    /// Shift iterations per refit.
    pub iterations: usize,
    buffer: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct AnchorSetRecord {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    k_r: usize,
    #[serde(rename = "K", default = "default_threshold")]
    flush_threshold: usize,
    #[serde(rename = "T", default = "default_iterations")]
    iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    buffer: Vec<(f64, f64)>,
}

fn default_threshold() -> usize {
    10_000
}

fn default_iterations() -> usize {
    1
}

impl TryFrom<AnchorSetRecord> for AnchorSet {
    type Error = Error;

    fn try_from(r: AnchorSetRecord) -> Result<Self> {
        if r.gamma.len() != r.k_r || r.beta.len() != r.k_r {
            return Err(Error::InvalidInput(format!(
                "anchor lists of length {} and {} do not match k_r = {}",
                r.gamma.len(),
                r.beta.len(),
                r.k_r
            )));
        }
        Self::from_anchors(r.gamma, r.beta, r.flush_threshold, r.iterations).map(|mut s| {
            s.buffer = r.buffer;
            s
        })
    }
}

impl From<AnchorSet> for AnchorSetRecord {
    fn from(s: AnchorSet) -> Self {
        Self {
            k_r: s.gamma.len(),
            gamma: s.gamma,
            beta: s.beta,
            flush_threshold: s.flush_threshold,
            iterations: s.iterations,
            buffer: s.buffer,
        }
    }
}

impl Default for AnchorSet {
    fn default() -> Self {
        Self::uniform(7, default_threshold(), default_iterations()).expect("valid defaults")
    }
}

impl AnchorSet {
    pub fn uniform(k_r: usize, flush_threshold: usize, iterations: usize) -> Result<Self> {
        Self::from_anchors(uniform_anchors(k_r), uniform_anchors(k_r), flush_threshold, iterations)
    }

    pub fn from_anchors(
        gamma: Vec<f64>,
        beta: Vec<f64>,
        flush_threshold: usize,
        iterations: usize,
    ) -> Result<Self> {
        if gamma.is_empty() || gamma.len() != beta.len() {
            return Err(Error::InvalidInput(format!(
                "need equal, non-empty anchor lists (got {} and {})",
                gamma.len(),
                beta.len()
            )));
        }
        if iterations == 0 {
            return Err(Error::InvalidInput("shift iterations must be at least 1".into()));
        }
        for list in [&gamma, &beta] {
            if list.windows(2).any(|w| !(w[0] <= w[1]))
                || list.iter().any(|a| !(a.abs() <= FRAC_PI_2))
            {
                return Err(Error::InvalidInput(
                    "anchors must be sorted within [-pi/2, pi/2]".into(),
                ));
            }
        }
        Ok(Self {
            gamma,
            beta,
            flush_threshold,
            iterations,
            buffer: Vec::new(),
        })
    }

    pub fn k_r(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn buffer(&self) -> &[(f64, f64)] {
        &self.buffer
    }

    /// Nearest `(γ index, β index)`.
    pub fn nearest_pair(&self, gamma: f64, beta: f64) -> (usize, usize) {
        (nearest_of(&self.gamma, gamma), nearest_of(&self.beta, beta))
    }

    /// Class index `i·k_r + j` of the nearest anchor pair.
    pub fn class_of(&self, gamma: f64, beta: f64) -> usize {
        let (i, j) = self.nearest_pair(gamma, beta);
        i * self.k_r() + j
    }

    /// Anchor angles `(γ̃_i, β̃_j)` of a class index.
    pub fn class_angles(&self, class: usize) -> (f64, f64) {
        let k = self.k_r();
        (self.gamma[class / k], self.beta[class % k])
    }

    /// Largest distance from any angle in `[-π/2, π/2]` to its nearest
    /// anchor, over both axes.
    pub fn max_quantization_error(&self) -> f64 {
        [&self.gamma, &self.beta]
            .iter()
            .map(|a| {
                let mut m = (a[0] + FRAC_PI_2).max(FRAC_PI_2 - a[a.len() - 1]);
                for w in a.windows(2) {
                    m = m.max((w[1] - w[0]) / 2.0);
                }
                m
            })
            .fold(0.0, f64::max)
    }

    /// Appends `(γ, β)` samples; refits and clears the buffer once it holds
    /// more than the threshold. Returns whether a refit happened.
    pub fn buffer_update(&mut self, samples: &[(f64, f64)]) -> Result<bool> {
        self.buffer.extend_from_slice(samples);
        if self.buffer.len() > self.flush_threshold {
            self.flush()?;
            return Ok(true);
        }
        Ok(false)
    }

    /// Refits both axes on the current buffer and clears it.
    pub fn flush(&mut self) -> Result<()> {
        let g: Vec<f64> = self.buffer.iter().map(|s| s.0).collect();
        let b: Vec<f64> = self.buffer.iter().map(|s| s.1).collect();
        self.gamma = shift_step(&self.gamma, &g, self.iterations)?;
        self.beta = shift_step(&self.beta, &b, self.iterations)?;
        self.buffer.clear();
        Ok(())
    }

    /// Runs `rounds` refits over a fixed sample set, as if the same batch had
    /// been streamed repeatedly.
    pub fn fit(&mut self, samples: &[(f64, f64)], rounds: usize) -> Result<()> {
        let g: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let b: Vec<f64> = samples.iter().map(|s| s.1).collect();
        for _ in 0..rounds {
            self.gamma = shift_step(&self.gamma, &g, self.iterations)?;
            self.beta = shift_step(&self.beta, &b, self.iterations)?;
        }
        Ok(())
    }
}
