//! Gridded signed distance fields for irregular 2D domains.
//!
//! Distances are positive inside the domain, zero on the boundary and
//! negative outside. The field is sampled on a uniform node grid over a
//! bounding box and interpolated bilinearly in between.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{DomainBounds, SampledBasis};

/// Polar "flower" `r(θ) = r0 + a cos(m (θ - θ0))` about `center`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowerParams {
    pub center: [f64; 2],
    pub base_radius: f64,
    pub amplitude: f64,
    pub petals: u32,
}

impl Default for FlowerParams {
    fn default() -> Self {
        FlowerParams { center: [0.5, 0.5], base_radius: 0.28, amplitude: 0.10, petals: 5 }
    }
}

impl FlowerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_radius > 0.0) || self.amplitude.abs() >= self.base_radius {
            return Err(Error::Geometry(format!(
                "flower radius degenerates: r0 = {}, a = {}",
                self.base_radius, self.amplitude
            )));
        }
        if self.petals == 0 {
            return Err(Error::Geometry("flower needs at least one petal".into()));
        }
        Ok(())
    }

    /// Positive inside, zero on the boundary (in radial units).
    pub fn level(&self, p: [f64; 2]) -> f64 {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let theta = dy.atan2(dx);
        self.base_radius + self.amplitude * (self.petals as f64 * theta).cos() - dx.hypot(dy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampKind {
    PolynomialPower,
    QuinticSmoothstep,
}

/// Near-boundary relaxation of PDE rows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdfWeightParams {
    pub w_near: f64,
    pub w_far: f64,
    pub delta: f64,
    pub exponent: f64,
    pub ramp: RampKind,
}

impl SdfWeightParams {
    /// Transition band of 7% of `diameter`, near/far ratio 0.05, quintic ramp.
    pub fn for_diameter(diameter: f64) -> Self {
        SdfWeightParams {
            w_near: 0.05,
            w_far: 1.0,
            delta: 0.07 * diameter,
            exponent: 1.0,
            ramp: RampKind::QuinticSmoothstep,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.w_near > 0.0
            && self.w_near <= self.w_far
            && self.w_far.is_finite()
            && self.delta > 0.0
            && self.exponent > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid SDF weight parameters {self:?}")))
        }
    }

    fn ramp(&self, s: f64) -> f64 {
        match self.ramp {
            RampKind::PolynomialPower => s.powf(self.exponent),
            RampKind::QuinticSmoothstep => s * s * s * (s * (6.0 * s - 15.0) + 10.0),
        }
    }
}

/// Weight applied to a PDE row at signed distance `d ≥ 0` from the boundary.
pub fn pde_weight(d: f64, params: &SdfWeightParams) -> f64 {
    let s = (d.max(0.0) / params.delta).min(1.0);
    if s >= 1.0 {
        return params.w_far;
    }
    params.w_near + (params.w_far - params.w_near) * params.ramp(s)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdfField {
    bounds: DomainBounds,
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl SdfField {
    /// Builds a field from a level function that is positive inside.
    ///
    /// Cells whose corners differ in sign are subdivided; zero crossings on
    /// the sub-cell edges are located by bisection on the level function and
    /// joined by marching squares. Each node then gets the exact distance to
    /// the nearest of these segments, signed by the mask.
    pub fn from_level_fn(bounds: DomainBounds, nx: usize, ny: usize, level: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Geometry("SDF grid needs at least 2 nodes per axis".into()));
        }
        let hx = bounds.length(0) / (nx - 1) as f64;
        let hy = bounds.length(1) / (ny - 1) as f64;
        let node = |i: usize, j: usize| [bounds.lower[0] + i as f64 * hx, bounds.lower[1] + j as f64 * hy];
        let mut inside = vec![false; nx * ny];
        let mut raw = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let v = level(node(i, j));
                raw[j * nx + i] = v;
                inside[j * nx + i] = v > 0.0;
            }
        }

        let crossing = |a: [f64; 2], b: [f64; 2], fa: f64| -> [f64; 2] {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let lerp = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let side_a = fa > 0.0;
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if (level(lerp(mid)) > 0.0) == side_a {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lerp(0.5 * (lo + hi))
        };

        // marching squares on a SUBDIV-times finer grid inside every cell the
        // boundary crosses; crossings are exact up to bisection
        let mut segs: Vec<[[f64; 2]; 2]> = Vec::new();
        let (sx, sy) = (hx / SUBDIV as f64, hy / SUBDIV as f64);
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let k = j * nx + i;
                let corners = [inside[k], inside[k + 1], inside[k + nx], inside[k + nx + 1]];
                if corners.iter().all(|&c| c == corners[0]) {
                    continue;
                }
                let origin = node(i, j);
                let sub = |a: usize, b: usize| [origin[0] + a as f64 * sx, origin[1] + b as f64 * sy];
                let mut v = [[0.0; SUBDIV + 1]; SUBDIV + 1];
                for (a, row) in v.iter_mut().enumerate() {
                    for (b, val) in row.iter_mut().enumerate() {
                        *val = level(sub(a, b));
                    }
                }
                for a in 0..SUBDIV {
                    for b in 0..SUBDIV {
                        let c = [(a, b), (a + 1, b), (a + 1, b + 1), (a, b + 1)];
                        let val = |q: usize| v[c[q].0][c[q].1];
                        // edges: bottom, right, top, left
                        let mut hits: [Option<[f64; 2]>; 4] = [None; 4];
                        for (e, (q0, q1)) in [(0, 1), (1, 2), (3, 2), (0, 3)].into_iter().enumerate() {
                            if (val(q0) > 0.0) != (val(q1) > 0.0) {
                                hits[e] = Some(crossing(sub(c[q0].0, c[q0].1), sub(c[q1].0, c[q1].1), val(q0)));
                            }
                        }
                        let found: Vec<[f64; 2]> = hits.iter().flatten().copied().collect();
                        match found.len() {
                            2 => segs.push([found[0], found[1]]),
                            4 => {
                                let mid = [origin[0] + (a as f64 + 0.5) * sx, origin[1] + (b as f64 + 0.5) * sy];
                                let h = hits.map(|x| x.unwrap());
                                if (level(mid) > 0.0) == (val(0) > 0.0) {
                                    segs.push([h[0], h[1]]);
                                    segs.push([h[2], h[3]]);
                                } else {
                                    segs.push([h[0], h[3]]);
                                    segs.push([h[1], h[2]]);
                                }
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        if segs.is_empty() {
            return Err(Error::Geometry("level function has no zero crossing on the grid".into()));
        }
        let index = SegmentIndex::new(segs);

        let mut values = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let d = index.distance(node(i, j));
                values[j * nx + i] = if inside[j * nx + i] { d } else { -d };
            }
        }
        Ok(SdfField { bounds, nx, ny, values })
    }

    pub fn bounds(&self) -> &DomainBounds {
        &self.bounds
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn spacing(&self) -> [f64; 2] {
        [self.bounds.length(0) / (self.nx - 1) as f64, self.bounds.length(1) / (self.ny - 1) as f64]
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.spacing();
        [self.bounds.lower[0] + i as f64 * h[0], self.bounds.lower[1] + j as f64 * h[1]]
    }

    pub fn node_value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    fn cell_coords(&self, p: [f64; 2]) -> (usize, usize, f64, f64) {
        let h = self.spacing();
        let fx = ((p[0] - self.bounds.lower[0]) / h[0]).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((p[1] - self.bounds.lower[1]) / h[1]).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        (i, j, fx - i as f64, fy - j as f64)
    }

    fn bilinear(&self, p: [f64; 2], f: impl Fn(usize, usize) -> f64) -> f64 {
        let (i, j, tx, ty) = self.cell_coords(p);
        (1.0 - tx) * (1.0 - ty) * f(i, j)
            + tx * (1.0 - ty) * f(i + 1, j)
            + (1.0 - tx) * ty * f(i, j + 1)
            + tx * ty * f(i + 1, j + 1)
    }

    /// Bilinear interpolation of the distance.
    pub fn value_at(&self, p: [f64; 2]) -> f64 {
        self.bilinear(p, |i, j| self.node_value(i, j))
    }

    /// Central-difference gradient at a node (one-sided on the grid edge).
    pub fn node_gradient(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.spacing();
        let (il, ir) = (i.saturating_sub(1), (i + 1).min(self.nx - 1));
        let (jl, jr) = (j.saturating_sub(1), (j + 1).min(self.ny - 1));
        [
            (self.node_value(ir, j) - self.node_value(il, j)) / ((ir - il) as f64 * h[0]),
            (self.node_value(i, jr) - self.node_value(i, jl)) / ((jr - jl) as f64 * h[1]),
        ]
    }

    pub fn gradient_at(&self, p: [f64; 2]) -> [f64; 2] {
        [self.bilinear(p, |i, j| self.node_gradient(i, j)[0]), self.bilinear(p, |i, j| self.node_gradient(i, j)[1])]
    }

    /// Outward unit normal `-∇d / |∇d|`.
    pub fn normal_at(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let g = self.gradient_at(p);
        let norm = g[0].hypot(g[1]);
        if !(norm > 0.0) {
            return Err(Error::Geometry(format!("vanishing SDF gradient at {p:?}")));
        }
        Ok([-g[0] / norm, -g[1] / norm])
    }

    /// Writes `x,y,d` rows for every grid node.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["x", "y", "d"]).map_err(|e| csv_err(path, e))?;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let p = self.node(i, j);
                w.write_record(&[fmt(p[0]), fmt(p[1]), fmt(self.node_value(i, j))]).map_err(|e| csv_err(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

const SUBDIV: usize = 4;

fn segment_distance2(p: [f64; 2], s: &[[f64; 2]; 2]) -> f64 {
    let d = [s[1][0] - s[0][0], s[1][1] - s[0][1]];
    let w = [p[0] - s[0][0], p[1] - s[0][1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 { ((w[0] * d[0] + w[1] * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (ex, ey) = (w[0] - t * d[0], w[1] - t * d[1]);
    ex * ex + ey * ey
}

/// Boundary segments sorted by midpoint abscissa for pruned nearest queries.
struct SegmentIndex {
    segs: Vec<[[f64; 2]; 2]>,
    mids: Vec<f64>,
    half_span: f64,
}

impl SegmentIndex {
    fn new(mut segs: Vec<[[f64; 2]; 2]>) -> Self {
        let mid = |s: &[[f64; 2]; 2]| 0.5 * (s[0][0] + s[1][0]);
        segs.sort_by(|a, b| mid(a).total_cmp(&mid(b)));
        let mids: Vec<f64> = segs.iter().map(mid).collect();
        let half_span = segs.iter().map(|s| 0.5 * (s[1][0] - s[0][0]).abs()).fold(0.0, f64::max);
        SegmentIndex { segs, mids, half_span }
    }

    fn distance(&self, p: [f64; 2]) -> f64 {
        let start = self.mids.partition_point(|&x| x < p[0]);
        let mut best = f64::INFINITY;
        let far = |dx: f64, best: f64| {
            let gap = dx.abs() - self.half_span;
            gap > 0.0 && gap * gap >= best
        };
        for k in start..self.segs.len() {
            if far(self.mids[k] - p[0], best) {
                break;
            }
            best = best.min(segment_distance2(p, &self.segs[k]));
        }
        for k in (0..start).rev() {
            if far(p[0] - self.mids[k], best) {
                break;
            }
            best = best.min(segment_distance2(p, &self.segs[k]));
        }
        best.sqrt()
    }
}

/// Signed distance field of a flower on the unit square, `resolution` nodes
/// per axis.
pub fn flower_sdf(params: &FlowerParams, resolution: usize) -> Result<SdfField> {
    params.validate()?;
    if resolution < 64 {
        return Err(Error::Geometry(format!("SDF resolution {resolution} below 64")));
    }
    SdfField::from_level_fn(DomainBounds::unit_square(), resolution, resolution, |p| params.level(p))
}

/// Resampled zero level set with outward normals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Boundary {
    pub points: Vec<[f64; 2]>,
    pub normals: Vec<[f64; 2]>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum EdgeId {
    H(usize, usize),
    V(usize, usize),
}

/// Marching-squares zero contour of the field, as one closed loop ordered
/// counter-clockwise and starting at its right-most vertex.
pub fn zero_contour(sdf: &SdfField) -> Result<Vec<[f64; 2]>> {
    let (nx, ny) = sdf.shape();
    let val = |i: usize, j: usize| sdf.node_value(i, j);
    let inside = |i: usize, j: usize| val(i, j) > 0.0;
    let interp = |a: [f64; 2], b: [f64; 2], fa: f64, fb: f64| {
        let t = fa / (fa - fb);
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    };

    let mut points: HashMap<EdgeId, [f64; 2]> = HashMap::new();
    let mut links: HashMap<EdgeId, Vec<EdgeId>> = HashMap::new();
    let mut link = |a: EdgeId, b: EdgeId| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };

    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [inside(i, j), inside(i + 1, j), inside(i + 1, j + 1), inside(i, j + 1)];
            let bottom = EdgeId::H(i, j);
            let right = EdgeId::V(i + 1, j);
            let top = EdgeId::H(i, j + 1);
            let left = EdgeId::V(i, j);
            let mut crossed = Vec::with_capacity(4);
            if c[0] != c[1] {
                crossed.push(bottom);
            }
            if c[1] != c[2] {
                crossed.push(right);
            }
            if c[2] != c[3] {
                crossed.push(top);
            }
            if c[3] != c[0] {
                crossed.push(left);
            }
            for &e in &crossed {
                points.entry(e).or_insert_with(|| match e {
                    EdgeId::H(a, b) => interp(sdf.node(a, b), sdf.node(a + 1, b), val(a, b), val(a + 1, b)),
                    EdgeId::V(a, b) => interp(sdf.node(a, b), sdf.node(a, b + 1), val(a, b), val(a, b + 1)),
                });
            }
            match crossed.len() {
                0 => {}
                2 => link(crossed[0], crossed[1]),
                4 => {
                    let center = 0.25 * (val(i, j) + val(i + 1, j) + val(i + 1, j + 1) + val(i, j + 1));
                    if (center > 0.0) == c[0] {
                        link(bottom, right);
                        link(top, left);
                    } else {
                        link(bottom, left);
                        link(top, right);
                    }
                }
                _ => unreachable!("a cell has an even number of sign changes"),
            }
        }
    }
    if points.is_empty() {
        return Err(Error::Geometry("SDF has an empty zero level set".into()));
    }
    if links.values().any(|l| l.len() != 2) {
        return Err(Error::Geometry("zero level set touches the grid border".into()));
    }

    let mut visited: HashSet<EdgeId> = HashSet::new();
    let mut loops: Vec<Vec<[f64; 2]>> = Vec::new();
    let mut keys: Vec<EdgeId> = links.keys().copied().collect();
    keys.sort_by_key(|e| match *e {
        EdgeId::H(a, b) => (0, b, a),
        EdgeId::V(a, b) => (1, b, a),
    });
    for start in keys {
        if visited.contains(&start) {
            continue;
        }
        let mut poly = Vec::new();
        let mut prev: Option<EdgeId> = None;
        let mut cur = start;
        loop {
            visited.insert(cur);
            poly.push(points[&cur]);
            let nbrs = &links[&cur];
            let next = if Some(nbrs[0]) == prev { nbrs[1] } else { nbrs[0] };
            prev = Some(cur);
            if next == start || visited.contains(&next) {
                break;
            }
            cur = next;
        }
        loops.push(poly);
    }
    if loops.len() != 1 {
        return Err(Error::Geometry(format!("expected one boundary loop, found {}", loops.len())));
    }
    let mut poly = loops.pop().unwrap();
    let area: f64 = (0..poly.len())
        .map(|k| {
            let a = poly[k];
            let b = poly[(k + 1) % poly.len()];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    if area < 0.0 {
        poly.reverse();
    }
    let first = (0..poly.len())
        .max_by(|&a, &b| poly[a][0].total_cmp(&poly[b][0]).then(poly[b][1].total_cmp(&poly[a][1])))
        .unwrap();
    poly.rotate_left(first);
    Ok(poly)
}

/// Zero level set resampled to `n_points` arclength-uniform points, each
/// with the outward SDF normal.
pub fn extract_boundary(sdf: &SdfField, n_points: usize) -> Result<Boundary> {
    if n_points == 0 {
        return Err(Error::invalid("boundary needs at least one point"));
    }
    let poly = zero_contour(sdf)?;
    let n = poly.len();
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        cum.push(cum[k] + (b[0] - a[0]).hypot(b[1] - a[1]));
    }
    let total = cum[n];
    let mut points = Vec::with_capacity(n_points);
    let mut seg = 0;
    for q in 0..n_points {
        let s = total * q as f64 / n_points as f64;
        while seg + 1 < n && cum[seg + 1] < s {
            seg += 1;
        }
        let a = poly[seg];
        let b = poly[(seg + 1) % n];
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
        points.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
    let normals = points.iter().map(|&p| sdf.normal_at(p)).collect::<Result<Vec<_>>>()?;
    Ok(Boundary { points, normals })
}

/// Keeps the basis entries whose interpolated distance is positive.
pub fn clip_centers(basis: &SampledBasis, sdf: &SdfField) -> Result<SampledBasis> {
    let keep: Vec<usize> = (0..basis.len()).filter(|&i| sdf.value_at(basis.centers[i]) > 0.0).collect();
    if keep.is_empty() {
        return Err(Error::Geometry("no centers remain inside the domain".into()));
    }
    Ok(basis.select(&keep))
}

/// Writes resampled boundary points and normals as CSV.
pub fn write_boundary_csv(boundary: &Boundary, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "x,y,nx,ny").map_err(|e| Error::io(path, e))?;
    for (p, n) in boundary.points.iter().zip(&boundary.normals) {
        writeln!(f, "{},{},{},{}", fmt(p[0]), fmt(p[1]), fmt(n[0]), fmt(n[1])).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_2d, PartitionSpec2D};
    use approx::assert_abs_diff_eq;

    fn circle(r0: f64, res: usize) -> SdfField {
        let p = FlowerParams { center: [0.5, 0.5], base_radius: r0, amplitude: 0.0, petals: 5 };
        flower_sdf(&p, res).unwrap()
    }

    #[test]
    fn circle_sdf_is_accurate() {
        let sdf = circle(0.3, 129);
        let h = sdf.spacing()[0];
        let (nx, ny) = sdf.shape();
        let mut worst = 0.0f64;
        for j in 0..ny {
            for i in 0..nx {
                let p = sdf.node(i, j);
                let exact = 0.3 - (p[0] - 0.5).hypot(p[1] - 0.5);
                worst = worst.max((sdf.node_value(i, j) - exact).abs());
            }
        }
        assert!(worst <= 2.0 * h, "max error {worst} vs spacing {h}");
    }

    #[test]
    fn circle_sdf_satisfies_eikonal_in_the_interior() {
        let sdf = circle(0.35, 129);
        let h = sdf.spacing()[0];
        let (nx, ny) = sdf.shape();
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let d = sdf.node_value(i, j);
                let p = sdf.node(i, j);
                let r = (p[0] - 0.5).hypot(p[1] - 0.5);
                // skip the kink of the distance field at the circle center
                if d.abs() > 3.0 * h && r > 3.0 * h {
                    let g = sdf.node_gradient(i, j);
                    let n = g[0].hypot(g[1]);
                    assert!((0.9..=1.1).contains(&n), "|grad d| = {n} at {p:?}");
                }
            }
        }
    }

    #[test]
    fn flower_center_is_deepest_interior() {
        let params = FlowerParams::default();
        let sdf = flower_sdf(&params, 200).unwrap();
        let d = sdf.value_at(params.center);
        assert!(d > 0.0);
        assert!(d >= params.base_radius - params.amplitude.abs() - sdf.spacing()[0]);
    }

    #[test]
    fn five_petal_mask_is_one_region() {
        let sdf = flower_sdf(&FlowerParams::default(), 400).unwrap();
        // a single closed zero contour means a single connected inside region
        let contour = zero_contour(&sdf).unwrap();
        assert!(contour.len() > 100);
    }

    #[test]
    fn rejects_degenerate_flower() {
        let p = FlowerParams { amplitude: 0.3, ..FlowerParams::default() };
        assert!(flower_sdf(&p, 128).is_err());
        assert!(flower_sdf(&FlowerParams::default(), 32).is_err());
    }

    #[test]
    fn circle_boundary_points_and_normals() {
        let sdf = circle(0.3, 201);
        let h = sdf.spacing()[0];
        let b = extract_boundary(&sdf, 4).unwrap();
        assert_eq!(b.points.len(), 4);
        let angles: Vec<f64> = b.points.iter().map(|p| (p[1] - 0.5).atan2(p[0] - 0.5)).collect();
        for p in &b.points {
            assert_abs_diff_eq!((p[0] - 0.5).hypot(p[1] - 0.5), 0.3, epsilon = 2.0 * h);
        }
        for k in 0..4 {
            let mut gap = angles[(k + 1) % 4] - angles[k];
            while gap < 0.0 {
                gap += 2.0 * std::f64::consts::PI;
            }
            assert_abs_diff_eq!(gap, std::f64::consts::FRAC_PI_2, epsilon = 0.02);
        }

        let b = extract_boundary(&sdf, 360).unwrap();
        for (p, n) in b.points.iter().zip(&b.normals) {
            let radial = (p[1] - 0.5).atan2(p[0] - 0.5);
            let normal = n[1].atan2(n[0]);
            let mut diff = (radial - normal).abs();
            if diff > std::f64::consts::PI {
                diff = 2.0 * std::f64::consts::PI - diff;
            }
            assert!(diff.to_degrees() <= 1.0, "normal off by {} deg", diff.to_degrees());
        }
    }

    #[test]
    fn resampled_gaps_are_uniform() {
        let sdf = flower_sdf(&FlowerParams::default(), 300).unwrap();
        let b = extract_boundary(&sdf, 500).unwrap();
        let n = b.points.len();
        let gaps: Vec<f64> = (0..n)
            .map(|k| {
                let a = b.points[k];
                let c = b.points[(k + 1) % n];
                (c[0] - a[0]).hypot(c[1] - a[1])
            })
            .collect();
        let mean = gaps.iter().sum::<f64>() / n as f64;
        assert!(gaps.iter().all(|g| (g - mean).abs() <= 0.05 * mean));
    }

    #[test]
    fn two_disjoint_loops_are_rejected() {
        let level = |p: [f64; 2]| {
            let a = 0.15 - (p[0] - 0.25).hypot(p[1] - 0.5);
            let b = 0.15 - (p[0] - 0.75).hypot(p[1] - 0.5);
            a.max(b)
        };
        let sdf = SdfField::from_level_fn(DomainBounds::unit_square(), 100, 100, level).unwrap();
        assert!(extract_boundary(&sdf, 10).is_err());
    }

    #[test]
    fn clipping() {
        let spec = PartitionSpec2D::new(vec![0.5, 0.5], vec![0.5, 0.5], 6, 6, 1.0).unwrap();
        let basis = sample_2d(&spec, &DomainBounds::unit_square());
        let full = SdfField::from_level_fn(DomainBounds::rect([-0.5, -0.5], [1.5, 1.5]).unwrap(), 81, 81, |p| {
            0.99 - (p[0] - 0.5).abs().max((p[1] - 0.5).abs())
        })
        .unwrap();
        assert_eq!(clip_centers(&basis, &full).unwrap(), basis);

        let sdf = flower_sdf(&FlowerParams::default(), 200).unwrap();
        let clipped = clip_centers(&basis, &sdf).unwrap();
        assert!(clipped.len() < basis.len());
        assert!(clipped.centers.iter().all(|&c| sdf.value_at(c) > 0.0));
        assert!(!clipped.centers.contains(&[1.0 / 24.0, 1.0 / 24.0]));

        let tiny =
            SdfField::from_level_fn(DomainBounds::unit_square(), 65, 65, |p| 0.01 - (p[0] - 0.013).hypot(p[1] - 0.013))
                .unwrap();
        assert!(clip_centers(&basis, &tiny).is_err());
    }

    #[test]
    fn weight_endpoints_and_midpoint() {
        let params =
            SdfWeightParams { w_near: 0.05, w_far: 1.0, delta: 0.1, exponent: 2.0, ramp: RampKind::QuinticSmoothstep };
        assert_eq!(pde_weight(0.0, &params), 0.05);
        assert_eq!(pde_weight(0.1, &params), 1.0);
        assert_eq!(pde_weight(5.0, &params), 1.0);
        assert_abs_diff_eq!(pde_weight(0.05, &params), 0.525, epsilon = 1e-15);

        let power = SdfWeightParams { ramp: RampKind::PolynomialPower, ..params };
        assert_eq!(pde_weight(0.0, &power), 0.05);
        assert_abs_diff_eq!(pde_weight(0.05, &power), 0.05 + 0.95 * 0.25, epsilon = 1e-15);
    }

    #[test]
    fn weight_is_monotone_and_continuous() {
        for ramp in [RampKind::QuinticSmoothstep, RampKind::PolynomialPower] {
            let params = SdfWeightParams { w_near: 0.02, w_far: 1.0, delta: 0.2, exponent: 3.0, ramp };
            // ρ' is bounded by 15/8 (quintic) and p (power)
            let slope = match ramp {
                RampKind::QuinticSmoothstep => 15.0 / 8.0,
                RampKind::PolynomialPower => 3.0,
            };
            let step = 1e-4;
            let mut prev = pde_weight(0.0, &params);
            for k in 1..3000 {
                let w = pde_weight(k as f64 * step, &params);
                assert!(w >= prev);
                assert!(w - prev <= (params.w_far - params.w_near) * (step / params.delta) * slope + 1e-12);
                prev = w;
            }
        }
    }
}
