//! Deterministic center and width placement driven by partition lengths.
//!
//! All construction happens on the unit interval (or unit square) and is then
//! mapped affinely onto the problem's bounding box. Widths scale with the
//! axis length in 1D and with the geometric mean of the two axis lengths in 2D.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the unit-sum constraint on partition lengths.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Two unit-domain coordinates closer than this are the same center.
pub const DUPLICATE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    One,
    Two,
}

impl Dimension {
    pub fn as_usize(self) -> usize {
        match self {
            Dimension::One => 1,
            Dimension::Two => 2,
        }
    }
}

/// Axis-aligned box. One-dimensional problems ignore the `y` extent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBounds {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl DomainBounds {
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new([lower, 0.0], [upper, 1.0])
    }

    pub fn rect(lower: [f64; 2], upper: [f64; 2]) -> Result<Self> {
        Self::new(lower, upper)
    }

    pub fn unit_square() -> Self {
        DomainBounds { lower: [0.0, 0.0], upper: [1.0, 1.0] }
    }

    fn new(lower: [f64; 2], upper: [f64; 2]) -> Result<Self> {
        for axis in 0..2 {
            if !(lower[axis].is_finite() && upper[axis].is_finite() && lower[axis] < upper[axis]) {
                return Err(Error::invalid(format!("empty bounds on axis {axis}: [{}, {}]", lower[axis], upper[axis])));
            }
        }
        Ok(DomainBounds { lower, upper })
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn map(&self, axis: usize, unit: f64) -> f64 {
        self.lower[axis] + unit * self.length(axis)
    }

    pub fn contains(&self, dim: Dimension, p: [f64; 2]) -> bool {
        let axes = dim.as_usize();
        (0..axes).all(|a| p[a] >= self.lower[a] && p[a] <= self.upper[a])
    }

    pub fn diagonal(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::One => self.length(0),
            Dimension::Two => self.length(0).hypot(self.length(1)),
        }
    }
}

fn validate_lengths(lengths: &[f64], what: &str) -> Result<()> {
    if lengths.is_empty() {
        return Err(Error::invalid(format!("{what}: at least one partition required")));
    }
    if let Some(bad) = lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::invalid(format!("{what}: partition length {bad} is not positive")));
    }
    let sum: f64 = lengths.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::invalid(format!("{what}: lengths sum to {sum}, expected 1")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec1D {
    lengths: Vec<f64>,
    points_per_partition: usize,
    width_scale: f64,
}

impl PartitionSpec1D {
    pub fn new(lengths: Vec<f64>, points_per_partition: usize, width_scale: f64) -> Result<Self> {
        validate_lengths(&lengths, "1D partition")?;
        if points_per_partition < 2 {
            return Err(Error::invalid("points per partition must be at least 2"));
        }
        if !(width_scale > 0.0 && width_scale.is_finite()) {
            return Err(Error::invalid(format!("width scale must be positive, got {width_scale}")));
        }
        Ok(PartitionSpec1D { lengths, points_per_partition, width_scale })
    }

    pub fn from_logits(logits: &[f64], points_per_partition: usize, width_scale: f64) -> Result<Self> {
        Self::new(softmax_lengths(logits)?, points_per_partition, width_scale)
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn points_per_partition(&self) -> usize {
        self.points_per_partition
    }

    pub fn width_scale(&self) -> f64 {
        self.width_scale
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec2D {
    lengths_x: Vec<f64>,
    lengths_y: Vec<f64>,
    points_x: usize,
    points_y: usize,
    width_scale: f64,
}

impl PartitionSpec2D {
    pub fn new(
        lengths_x: Vec<f64>,
        lengths_y: Vec<f64>,
        points_x: usize,
        points_y: usize,
        width_scale: f64,
    ) -> Result<Self> {
        validate_lengths(&lengths_x, "x partition")?;
        validate_lengths(&lengths_y, "y partition")?;
        if points_x == 0 || points_y == 0 {
            return Err(Error::invalid("points per block must be positive on both axes"));
        }
        if !(width_scale > 0.0 && width_scale.is_finite()) {
            return Err(Error::invalid(format!("width scale must be positive, got {width_scale}")));
        }
        Ok(PartitionSpec2D { lengths_x, lengths_y, points_x, points_y, width_scale })
    }

    pub fn lengths_x(&self) -> &[f64] {
        &self.lengths_x
    }

    pub fn lengths_y(&self) -> &[f64] {
        &self.lengths_y
    }

    pub fn points_x(&self) -> usize {
        self.points_x
    }

    pub fn points_y(&self) -> usize {
        self.points_y
    }

    pub fn width_scale(&self) -> f64 {
        self.width_scale
    }
}

/// Origin of a center: a partition (block index, row-major over `x` then `y`
/// in 2D) or the partition-independent global grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CenterTag {
    Partition(usize),
    Global,
}

/// Gaussian centers with their widths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledBasis {
    pub dim: Dimension,
    pub centers: Vec<[f64; 2]>,
    pub widths: Vec<f64>,
    pub tags: Vec<CenterTag>,
}

impl SampledBasis {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Keeps the listed entries, in the given order.
    pub fn select(&self, keep: &[usize]) -> SampledBasis {
        SampledBasis {
            dim: self.dim,
            centers: keep.iter().map(|&i| self.centers[i]).collect(),
            widths: keep.iter().map(|&i| self.widths[i]).collect(),
            tags: keep.iter().map(|&i| self.tags[i]).collect(),
        }
    }

    pub fn partition_count(&self) -> usize {
        self.tags.iter().filter(|t| matches!(t, CenterTag::Partition(_))).count()
    }

    pub fn global_count(&self) -> usize {
        self.tags.iter().filter(|t| matches!(t, CenterTag::Global)).count()
    }
}

/// Maps unconstrained logits onto the open unit simplex.
pub fn softmax_lengths(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax of an empty logit vector"));
    }
    if let Some(bad) = logits.iter().find(|z| !z.is_finite()) {
        return Err(Error::invalid(format!("non-finite logit {bad}")));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Prefix sums `0 = x_0 < x_1 < … < x_k = 1` of the partition lengths.
pub fn partition_boundaries(lengths: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(lengths.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for (j, l) in lengths.iter().enumerate() {
        acc += l;
        out.push(if j + 1 == lengths.len() { 1.0 } else { acc });
    }
    out
}

/// Unit-interval partition nodes `x_{j-1} + (m/N) ℓ_j`, `m = 0..=N`, with the
/// shared interior boundaries kept once. Returns `(coordinate, partition)`.
fn unit_partition_nodes(lengths: &[f64], n: usize) -> Vec<(f64, usize)> {
    let bounds = partition_boundaries(lengths);
    let mut nodes: Vec<(f64, usize)> = Vec::with_capacity(lengths.len() * n + 1);
    for (j, l) in lengths.iter().enumerate() {
        for m in 0..=n {
            let x = if m == n { bounds[j + 1] } else { bounds[j] + (m as f64 / n as f64) * l };
            if let Some(&(last, _)) = nodes.last() {
                if (x - last).abs() < DUPLICATE_TOL {
                    continue;
                }
            }
            nodes.push((x, j));
        }
    }
    nodes
}

fn unit_global_nodes(count: usize) -> impl Iterator<Item = f64> {
    (1..=count).map(move |r| r as f64 / (count as f64 + 1.0))
}

/// Centers and widths for a 1D partition.
///
/// Produces `kN + 1` partition centers with width `k_σ ℓ_j / N` followed by
/// `kN` global centers at `r / (kN + 1)` with width `k_σ / (kN)`, both
/// scaled by the interval length.
pub fn sample_1d(spec: &PartitionSpec1D, bounds: &DomainBounds) -> SampledBasis {
    let n = spec.points_per_partition;
    let k = spec.lengths.len();
    let scale = bounds.length(0);
    let ks = spec.width_scale;

    let nodes = unit_partition_nodes(&spec.lengths, n);
    let global = k * n;
    let total = nodes.len() + global;
    let mut centers = Vec::with_capacity(total);
    let mut widths = Vec::with_capacity(total);
    let mut tags = Vec::with_capacity(total);

    for (u, j) in nodes {
        centers.push([bounds.map(0, u), 0.0]);
        widths.push(ks * spec.lengths[j] / n as f64 * scale);
        tags.push(CenterTag::Partition(j));
    }
    let global_width = ks / global as f64 * scale;
    for u in unit_global_nodes(global) {
        centers.push([bounds.map(0, u), 0.0]);
        widths.push(global_width);
        tags.push(CenterTag::Global);
    }
    SampledBasis { dim: Dimension::One, centers, widths, tags }
}

/// Cell-centred nodes: `N` per partition at `x_{j-1} + (m + ½) ℓ_j / N`.
fn unit_block_nodes(lengths: &[f64], n: usize) -> Vec<Vec<f64>> {
    let bounds = partition_boundaries(lengths);
    lengths
        .iter()
        .enumerate()
        .map(|(j, l)| (0..n).map(|m| bounds[j] + (m as f64 + 0.5) / n as f64 * l).collect())
        .collect()
}

/// Centers and widths for a 2D tensor partition.
///
/// Block `(i, j)` receives an `N_x × N_y` grid with isotropic width
/// `k_σ √((ℓˣ_i / N_x)(ℓʸ_j / N_y))`; the global grid has `k_x N_x × k_y N_y`
/// nodes at `r / (k N + 1)` per axis.
pub fn sample_2d(spec: &PartitionSpec2D, bounds: &DomainBounds) -> SampledBasis {
    let (kx, ky) = (spec.lengths_x.len(), spec.lengths_y.len());
    let (nx, ny) = (spec.points_x, spec.points_y);
    let ks = spec.width_scale;
    let scale = (bounds.length(0) * bounds.length(1)).sqrt();

    let xs = unit_block_nodes(&spec.lengths_x, nx);
    let ys = unit_block_nodes(&spec.lengths_y, ny);
    let total = 2 * kx * ky * nx * ny;
    let mut centers = Vec::with_capacity(total);
    let mut widths = Vec::with_capacity(total);
    let mut tags = Vec::with_capacity(total);

    for i in 0..kx {
        for j in 0..ky {
            let sigma = ks * ((spec.lengths_x[i] / nx as f64) * (spec.lengths_y[j] / ny as f64)).sqrt() * scale;
            for &u in &xs[i] {
                for &v in &ys[j] {
                    centers.push([bounds.map(0, u), bounds.map(1, v)]);
                    widths.push(sigma);
                    tags.push(CenterTag::Partition(i * ky + j));
                }
            }
        }
    }

    let (gx, gy) = (kx * nx, ky * ny);
    let global_width = ks * (1.0 / gx as f64 * 1.0 / gy as f64).sqrt() * scale;
    let gys: Vec<f64> = unit_global_nodes(gy).collect();
    for u in unit_global_nodes(gx) {
        for &v in &gys {
            centers.push([bounds.map(0, u), bounds.map(1, v)]);
            widths.push(global_width);
            tags.push(CenterTag::Global);
        }
    }
    SampledBasis { dim: Dimension::Two, centers, widths, tags }
}
