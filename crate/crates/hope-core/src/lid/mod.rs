//! Local intrinsic dimension estimation from two-neighbor distance ratios.
//!
//! For every point in a cloud, let r1 and r2 be the distances to its
//! nearest and second-nearest neighbors. Under a locally uniform density
//! the ratio mu = r2 / r1 follows a Pareto law whose shape parameter is
//! the intrinsic dimension d, independent of the local density itself:
//!
//! ```text
//!     P(mu > t) = t^(-d),   t >= 1
//! ```
//!
//! Two estimators are provided. The likelihood form treats the largest
//! ratios as censored rather than observed, since they are the tail most
//! contaminated by inhomogeneity, which keeps the estimate consistent
//! while still discarding them:
//!
//! ```text
//!     d_hat = m / (sum_{i<=m} ln mu_(i) + (n - m) ln mu_(m))
//! ```
//!
//! where mu_(1) <= ... <= mu_(n) are sorted ratios and m keeps all but
//! the top `discard_fraction`. The regression form fits a line through
//! the origin to the empirical survival function in log coordinates:
//!
//! ```text
//!     -ln(1 - F_i)  ~  d * ln mu_(i),   F_i = i / n
//! ```
//!
//! over the same kept prefix. Ratios are scale-free, so both estimators
//! are invariant to rescaling, rigid motion, and permutation of the
//! cloud.
//!
//! Clouds can optionally be voxel-downsampled first: the first three
//! coordinates select a cubic voxel and every channel is averaged per
//! occupied voxel, which removes sensor-density artifacts before the
//! neighbor statistics are taken.

mod kdtree;

pub mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[cfg(test)]
use kdtree::sq_dist;
use kdtree::KdTree;

/// A dense point cloud: `len` points in row-major order, each with `dim`
/// finite channels. The first three channels are spatial coordinates in
/// meters when the cloud comes from a sensor; further channels carry
/// per-point features.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    /// Wraps row-major point data. The length must be a multiple of
    /// `dim` and every value finite.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("point dimension must be >= 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not fill rows of width {dim}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("nonfinite coordinate".into()));
        }
        Ok(Self { dim, data })
    }

    /// Number of channels per point.
    #[must_use]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points.
    #[must_use]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The `i`-th point as a coordinate slice.
    #[must_use]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Iterates over points in storage order.
    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Raw row-major storage.
    #[must_use]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Voxel downsampling settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelConfig {
    /// When false, [`voxelize`] passes the cloud through untouched.
    pub enabled: bool,
    /// Cubic voxel edge length in meters.
    pub size_m: f64,
}

impl Default for VoxelConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            size_m: 0.5,
        }
    }
}

/// Which estimator [`estimate_lid`] applies to the sorted ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LidMethod {
    /// Censored maximum likelihood (the default).
    #[serde(rename = "mle")]
    Mle,
    /// Through-origin least squares on the log survival function.
    #[serde(rename = "regress")]
    Regression,
}

impl std::str::FromStr for LidMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(Self::Mle),
            "regress" => Ok(Self::Regression),
            other => Err(Error::InvalidParameter(format!(
                "unknown estimator '{other}', expected 'mle' or 'regress'"
            ))),
        }
    }
}

/// Full estimation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidConfig {
    pub voxel: VoxelConfig,
    pub method: LidMethod,
    /// Fraction of the largest ratios excluded from the fit, in [0, 1).
    pub discard_fraction: f64,
}

impl Default for LidConfig {
    fn default() -> Self {
        Self {
            voxel: VoxelConfig::default(),
            method: LidMethod::Mle,
            discard_fraction: 0.1,
        }
    }
}

/// Result of [`estimate_lid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LidEstimate {
    /// Estimated intrinsic dimension, finite and positive.
    pub d_hat: f64,
    /// Points whose ratio entered the estimator after deduplication and
    /// tail discard.
    pub n_used: usize,
    pub method: LidMethod,
    pub discard_fraction: f64,
}

/// Averages the cloud into cubic voxels keyed by the first three
/// coordinates (fewer if the cloud is lower-dimensional). Every channel,
/// spatial ones included, is averaged per occupied voxel; output points
/// are ordered by voxel index, so the result is deterministic.
pub fn voxelize(cloud: &PointCloud, config: &VoxelConfig) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !config.enabled {
        return Ok(cloud.clone());
    }
    if !(config.size_m > 0.0) || !config.size_m.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "voxel size must be positive and finite, got {}",
            config.size_m
        )));
    }
    let spatial = cloud.dim().min(3);
    let mut cells: BTreeMap<[i64; 3], (u64, Vec<f64>)> = BTreeMap::new();
    for p in cloud.iter_points() {
        let mut key = [0i64; 3];
        for (a, slot) in key.iter_mut().enumerate().take(spatial) {
            *slot = (p[a] / config.size_m).floor() as i64;
        }
        let entry = cells
            .entry(key)
            .or_insert_with(|| (0, vec![0.0; cloud.dim()]));
        entry.0 += 1;
        for (acc, v) in entry.1.iter_mut().zip(p.iter()) {
            *acc += v;
        }
    }
    let mut data = Vec::with_capacity(cells.len() * cloud.dim());
    for (_, (count, sums)) in cells {
        let inv = 1.0 / count as f64;
        data.extend(sums.into_iter().map(|s| s * inv));
    }
    PointCloud::new(cloud.dim(), data)
}

/// Distances from each point to its two nearest neighbors, `(r1, r2)`
/// with `0 < r1 <= r2`, in ascending point order. Points with an exact
/// duplicate elsewhere in the cloud have `r1 = 0` and are dropped from
/// the output; their copies still participate as neighbors of everything
/// else.
pub fn two_nn_distances(cloud: &PointCloud) -> Result<Vec<(f64, f64)>> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    if count_distinct(cloud) < 3 {
        return Err(Error::InsufficientPoints);
    }
    let tree = KdTree::build(cloud);
    let mut out = Vec::with_capacity(cloud.len());
    for i in 0..cloud.len() {
        let (d1, d2) = tree.two_nearest_sq(i);
        if d1 == 0.0 {
            continue;
        }
        out.push((d1.sqrt(), d2.sqrt()));
    }
    Ok(out)
}

fn count_distinct(cloud: &PointCloud) -> usize {
    let mut order: Vec<u32> = (0..cloud.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        let pa = cloud.point(a as usize);
        let pb = cloud.point(b as usize);
        pa.iter()
            .zip(pb.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut distinct = 0;
    let mut prev: Option<&[f64]> = None;
    for &i in &order {
        let p = cloud.point(i as usize);
        if prev != Some(p) {
            distinct += 1;
            prev = Some(p);
        }
    }
    distinct
}

/// Estimates the intrinsic dimension of a cloud: optional voxel pass,
/// two-neighbor ratios, sort, tail discard, then the configured fit.
///
/// Fails with [`Error::DegenerateRatios`] when every kept ratio equals
/// one (a perfectly regular cloud carries no dimension signal).
pub fn estimate_lid(cloud: &PointCloud, config: &LidConfig) -> Result<LidEstimate> {
    if !(0.0..1.0).contains(&config.discard_fraction) {
        return Err(Error::InvalidParameter(format!(
            "discard fraction must lie in [0, 1), got {}",
            config.discard_fraction
        )));
    }
    let reduced = voxelize(cloud, &config.voxel)?;
    let pairs = two_nn_distances(&reduced)?;

    let mut mu: Vec<f64> = pairs.iter().map(|(r1, r2)| r2 / r1).collect();
    mu.sort_unstable_by(f64::total_cmp);
    let n_all = mu.len();
    let n_drop = (config.discard_fraction * n_all as f64).floor() as usize;
    let m = n_all - n_drop;
    debug_assert!(m >= 1);

    let (d_hat, n_used) = match config.method {
        LidMethod::Mle => {
            // Censored likelihood: each discarded ratio is only known to
            // exceed the largest kept one, so it contributes the
            // threshold log-ratio instead of its own.
            let threshold = mu[m - 1].ln();
            let sum: f64 = mu[..m].iter().map(|r| r.ln()).sum::<f64>() + n_drop as f64 * threshold;
            if sum <= 0.0 {
                return Err(Error::DegenerateRatios);
            }
            (m as f64 / sum, m)
        }
        LidMethod::Regression => {
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            let mut fitted = 0;
            for (i, r) in mu[..m].iter().enumerate() {
                let rank = (i + 1) as f64;
                let tail = 1.0 - rank / n_all as f64;
                if tail <= 0.0 {
                    continue;
                }
                let x = r.ln();
                let y = -tail.ln();
                sxy += x * y;
                sxx += x * x;
                fitted += 1;
            }
            if sxx <= 0.0 {
                return Err(Error::DegenerateRatios);
            }
            (sxy / sxx, fitted)
        }
    };

    if !d_hat.is_finite() || d_hat <= 0.0 {
        return Err(Error::DegenerateRatios);
    }
    Ok(LidEstimate {
        d_hat,
        n_used,
        method: config.method,
        discard_fraction: config.discard_fraction,
    })
}
