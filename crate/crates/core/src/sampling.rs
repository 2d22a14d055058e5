//! Collocation sets: uniform tensor-product grids, boundary and initial
//! subsets of space-time boxes, and shuffled mini-batches.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("bad bounds: {0}")]
    BadBounds(String),
    #[error("malformed collocation CSV at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Interior,
    DirichletBoundary,
    NeumannBoundary,
    Initial,
    Data,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Interior => "interior",
            Role::DirichletBoundary => "dirichlet",
            Role::NeumannBoundary => "neumann",
            Role::Initial => "initial",
            Role::Data => "data",
        })
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "interior" => Role::Interior,
            "dirichlet" => Role::DirichletBoundary,
            "neumann" => Role::NeumannBoundary,
            "initial" => Role::Initial,
            "data" => Role::Data,
            other => return Err(format!("unknown role `{other}`")),
        })
    }
}

/// One axis of a uniform grid, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Self {
        Self { lo, hi, count }
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(SamplingError::BadBounds(format!(
                "need finite lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.count < 2 {
            return Err(SamplingError::BadBounds(format!(
                "need at least 2 nodes per axis, got {}",
                self.count
            )));
        }
        Ok(())
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollocationSet {
    pub dim: usize,
    /// Row-major coordinates, `dim` per point.
    pub points: Vec<f64>,
    pub role: Role,
    /// Outward unit normals in the (x, y) plane, Neumann sets only.
    pub normals: Option<Vec<[f64; 2]>>,
}

impl CollocationSet {
    pub fn new(dim: usize, points: Vec<f64>, role: Role) -> Self {
        assert!(dim > 0 && points.len().is_multiple_of(dim));
        Self {
            dim,
            points,
            role,
            normals: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    /// Keeps the points satisfying `keep`, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&[f64]) -> bool) -> Self {
        let mut out = Self::new(self.dim, Vec::new(), self.role);
        let mut normals = self.normals.as_ref().map(|_| Vec::new());
        for (i, p) in self.iter().enumerate() {
            if keep(p) {
                out.points.extend_from_slice(p);
                if let (Some(dst), Some(src)) = (normals.as_mut(), self.normals.as_ref()) {
                    dst.push(src[i]);
                }
            }
        }
        out.normals = normals;
        out
    }

    /// Comma-separated export: one column per coordinate, a role column, and
    /// `nx,ny` columns when normals are present.
    pub fn to_csv(&self, names: &[&str]) -> String {
        assert_eq!(names.len(), self.dim);
        let mut out = names.join(",");
        out.push_str(",role");
        if self.normals.is_some() {
            out.push_str(",nx,ny");
        }
        out.push('\n');
        for (i, p) in self.iter().enumerate() {
            let coords: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&coords.join(","));
            out.push_str(&format!(",{}", self.role));
            if let Some(n) = &self.normals {
                out.push_str(&format!(",{:?},{:?}", n[i][0], n[i][1]));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, SamplingError> {
        let bad = |line: usize, reason: String| SamplingError::Parse { line, reason };
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad(1, "empty file".into()))?
            .split(',')
            .collect();
        let role_col = header
            .iter()
            .position(|&h| h == "role")
            .ok_or_else(|| bad(1, "missing role column".into()))?;
        let has_normals = header.len() == role_col + 3;
        let mut set = CollocationSet::new(role_col.max(1), Vec::new(), Role::Interior);
        let mut normals = Vec::new();
        for (k, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != header.len() {
                return Err(bad(k + 2, "wrong column count".into()));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(k + 2, format!("not a number: {s}")));
            for c in &cols[..role_col] {
                set.points.push(num(c)?);
            }
            set.role = cols[role_col].parse().map_err(|e| bad(k + 2, e))?;
            if has_normals {
                normals.push([num(cols[role_col + 1])?, num(cols[role_col + 2])?]);
            }
        }
        if has_normals {
            set.normals = Some(normals);
        }
        Ok(set)
    }
}

/// Tensor-product grid over `axes` (first axis varies slowest), endpoints
/// included, tagged as interior.
pub fn uniform_grid(axes: &[Axis]) -> Result<CollocationSet, SamplingError> {
    if axes.is_empty() {
        return Err(SamplingError::BadBounds("no axes".into()));
    }
    for a in axes {
        a.validate()?;
    }
    let nodes: Vec<Vec<f64>> = axes.iter().map(Axis::nodes).collect();
    let total: usize = axes.iter().map(|a| a.count).product();
    let mut points = Vec::with_capacity(total * axes.len());
    let mut idx = vec![0usize; axes.len()];
    for _ in 0..total {
        points.extend(idx.iter().zip(&nodes).map(|(&i, n)| n[i]));
        for d in (0..axes.len()).rev() {
            idx[d] += 1;
            if idx[d] < axes[d].count {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(CollocationSet::new(axes.len(), points, Role::Interior))
}

/// Which sides of a rectangle `[x.lo, x.hi] x [y.lo, y.hi]` to include.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edges {
    pub x_lo: bool,
    pub x_hi: bool,
    pub y_lo: bool,
    pub y_hi: bool,
}

impl Edges {
    pub const ALL: Edges = Edges {
        x_lo: true,
        x_hi: true,
        y_lo: true,
        y_hi: true,
    };
    pub const X_SIDES: Edges = Edges {
        x_lo: true,
        x_hi: true,
        y_lo: false,
        y_hi: false,
    };
    pub const Y_SIDES: Edges = Edges {
        x_lo: false,
        x_hi: false,
        y_lo: true,
        y_hi: true,
    };
}

/// Spatial boundary nodes of the `x` by `y` grid selected by `edges`,
/// crossed with `times` when given. Corners belong to the x-sides (normal
/// along x), so a corner is only included when its x-side is selected.
/// Neumann sets carry outward unit normals.
pub fn boundary_subset(
    x: &Axis,
    y: &Axis,
    times: Option<&[f64]>,
    edges: Edges,
    role: Role,
) -> Result<CollocationSet, SamplingError> {
    x.validate()?;
    y.validate()?;
    let xs = x.nodes();
    let ys = y.nodes();
    let mut spatial: Vec<([f64; 2], [f64; 2])> = Vec::new();
    for (i, &xv) in xs.iter().enumerate() {
        for (j, &yv) in ys.iter().enumerate() {
            let normal = if i == 0 {
                edges.x_lo.then_some([-1.0, 0.0])
            } else if i + 1 == xs.len() {
                edges.x_hi.then_some([1.0, 0.0])
            } else if j == 0 {
                edges.y_lo.then_some([0.0, -1.0])
            } else if j + 1 == ys.len() {
                edges.y_hi.then_some([0.0, 1.0])
            } else {
                None
            };
            if let Some(n) = normal {
                spatial.push(([xv, yv], n));
            }
        }
    }
    let dim = if times.is_some() { 3 } else { 2 };
    let mut set = CollocationSet::new(dim, Vec::new(), role);
    let mut normals = Vec::new();
    let single = [f64::NAN];
    for &t in times.unwrap_or(&single) {
        for (p, n) in &spatial {
            set.points.extend_from_slice(p);
            if times.is_some() {
                set.points.push(t);
            }
            normals.push(*n);
        }
    }
    if role == Role::NeumannBoundary {
        set.normals = Some(normals);
    }
    Ok(set)
}

/// The spatial grid at time `t0` (every node, boundary included).
pub fn initial_subset(spatial: &[Axis], t0: f64) -> Result<CollocationSet, SamplingError> {
    let mut points = Vec::new();
    let dim = spatial.len() + 1;
    if spatial.is_empty() {
        points.push(t0);
    } else {
        for p in uniform_grid(spatial)?.iter() {
            points.extend_from_slice(p);
            points.push(t0);
        }
    }
    Ok(CollocationSet::new(dim, points, Role::Initial))
}

/// Disjoint interior / boundary / initial sets covering a uniform
/// `x * y * t` grid: the initial set is the whole `t = t.lo` slice, the
/// boundary set is the spatial boundary for later times, and the interior
/// set is everything else.
#[derive(Clone, Debug)]
pub struct SpaceTimeSets {
    pub interior: CollocationSet,
    pub boundary: CollocationSet,
    pub initial: CollocationSet,
}

impl SpaceTimeSets {
    pub fn build(x: &Axis, y: &Axis, t: &Axis) -> Result<Self, SamplingError> {
        t.validate()?;
        let later: Vec<f64> = t.nodes()[1..].to_vec();
        let boundary = boundary_subset(x, y, Some(&later), Edges::ALL, Role::DirichletBoundary)?;
        let initial = initial_subset(&[*x, *y], t.lo)?;
        let interior = uniform_grid(&[*x, *y, *t])?
            .filter(|p| p[0] != x.lo && p[0] != x.hi && p[1] != y.lo && p[1] != y.hi && p[2] != t.lo);
        Ok(Self {
            interior,
            boundary,
            initial,
        })
    }
}

/// Shuffled partition of `0..len` into batches of `batch_size` (the last
/// one may be short). Deterministic in `(seed, epoch)`; a batch size of zero
/// or at least `len` yields a single batch.
pub fn batches(len: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..len).collect();
    if batch_size == 0 || batch_size >= len {
        return vec![order];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::f64::consts::PI;

    #[test]
    fn grid_includes_endpoints() {
        let g = uniform_grid(&[Axis::new(0.0, 1.0, 2)]).unwrap();
        assert_eq!(g.points, vec![0.0, 1.0]);
    }

    #[test]
    fn grid_sizes() {
        let t_end = 1.0 / (2.0 * 2f64.sqrt());
        let g = uniform_grid(&[
            Axis::new(0.0, 1.0, 40),
            Axis::new(0.0, 1.0, 40),
            Axis::new(0.0, t_end, 20),
        ])
        .unwrap();
        assert_eq!(g.len(), 32000);
        let t = Axis::new(0.0, 0.1, 40);
        let g = uniform_grid(&[Axis::new(0.0, 1.0, 20), Axis::new(0.0, 1.0, 20), t]).unwrap();
        assert_eq!(g.len(), 16000);
        assert!((t.spacing() - 0.1 / 39.0).abs() < 1e-15);
        let nodes = t.nodes();
        for w in nodes.windows(2) {
            assert!(((w[1] - w[0]) - t.spacing()).abs() <= 1e-12 * t.spacing());
        }
    }

    #[test]
    fn bad_bounds() {
        assert!(uniform_grid(&[Axis::new(1.0, 0.0, 5)]).is_err());
        assert!(uniform_grid(&[Axis::new(0.0, 1.0, 1)]).is_err());
        assert!(uniform_grid(&[Axis::new(0.0, f64::INFINITY, 3)]).is_err());
    }

    #[test]
    fn boundary_of_three_by_three() {
        let a = Axis::new(0.0, 1.0, 3);
        let b = boundary_subset(&a, &a, None, Edges::ALL, Role::NeumannBoundary).unwrap();
        assert_eq!(b.len(), 8);
        let distinct: HashSet<(u64, u64)> = b.iter().map(|p| (p[0].to_bits(), p[1].to_bits())).collect();
        assert_eq!(distinct.len(), 8);
        let normals = b.normals.as_ref().unwrap();
        let corner = b.iter().position(|p| p == [0.0, 0.0]).unwrap();
        assert_eq!(normals[corner], [-1.0, 0.0]);
        for (p, n) in b.iter().zip(normals) {
            // Each point lies on the edge its normal points out of.
            let on_edge = match (n[0], n[1]) {
                (x, _) if x < 0.0 => p[0] == 0.0,
                (x, _) if x > 0.0 => p[0] == 1.0,
                (_, y) if y < 0.0 => p[1] == 0.0,
                _ => p[1] == 1.0,
            };
            assert!(on_edge);
        }
    }

    #[test]
    fn x_and_y_sides_are_disjoint() {
        let a = Axis::new(0.0, 1.0, 5);
        let fx = boundary_subset(&a, &a, None, Edges::X_SIDES, Role::DirichletBoundary).unwrap();
        let fy = boundary_subset(&a, &a, None, Edges::Y_SIDES, Role::NeumannBoundary).unwrap();
        assert_eq!(fx.len(), 10);
        assert_eq!(fy.len(), 6);
        assert!(fx.normals.is_none());
        for p in fy.iter() {
            assert!(p[0] > 0.0 && p[0] < 1.0);
        }
    }

    #[test]
    fn membrane_oracle_vanishes_on_boundary() {
        let a = Axis::new(0.0, 1.0, 11);
        let times = Axis::new(0.0, 0.35, 5).nodes();
        let b = boundary_subset(&a, &a, Some(&times), Edges::ALL, Role::DirichletBoundary).unwrap();
        for p in b.iter() {
            let u = (PI * p[0]).sin() * (PI * p[1]).sin() * (2f64.sqrt() * PI * p[2]).cos();
            assert!(u.abs() < 1e-15);
        }
    }

    #[test]
    fn initial_subset_examples() {
        let a = Axis::new(0.0, 1.0, 3);
        let s = initial_subset(&[a, a], 0.0).unwrap();
        assert_eq!(s.len(), 9);
        assert!(s.iter().all(|p| p[2] == 0.0));
        let mid = s.iter().find(|p| p[0] == 0.5 && p[1] == 0.5).unwrap();
        assert_eq!((PI * mid[0]).sin() * (PI * mid[1]).sin(), 1.0);
        let t_only = initial_subset(&[], 0.0).unwrap();
        assert_eq!(t_only.points, vec![0.0]);
    }

    #[test]
    fn space_time_sets_partition_the_grid() {
        let (x, y, t) = (Axis::new(0.0, 1.0, 6), Axis::new(0.0, 1.0, 5), Axis::new(0.0, 0.5, 4));
        let sets = SpaceTimeSets::build(&x, &y, &t).unwrap();
        let key = |p: &[f64]| (p[0].to_bits(), p[1].to_bits(), p[2].to_bits());
        let mut seen = HashSet::new();
        for s in [&sets.interior, &sets.boundary, &sets.initial] {
            for p in s.iter() {
                assert!(seen.insert(key(p)), "point {p:?} has two roles");
            }
        }
        let full = uniform_grid(&[x, y, t]).unwrap();
        assert_eq!(seen.len(), full.len());
        assert!(full.iter().all(|p| seen.contains(&key(p))));
    }

    #[test]
    fn batch_partitions() {
        let b = batches(10, 4, 1, 0);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(batches(10, 10, 1, 0), vec![(0..10).collect::<Vec<_>>()]);
        assert_eq!(batches(10, 0, 1, 0).len(), 1);
        assert_eq!(batches(100, 7, 42, 3), batches(100, 7, 42, 3));
        assert_ne!(batches(100, 7, 42, 3), batches(100, 7, 42, 4));
    }

    #[test]
    fn csv_round_trip() {
        let a = Axis::new(0.0, 1.0, 4);
        let b = boundary_subset(&a, &a, Some(&[0.0, 0.25]), Edges::Y_SIDES, Role::NeumannBoundary).unwrap();
        let text = b.to_csv(&["x", "y", "t"]);
        assert!(text.starts_with("x,y,t,role,nx,ny\n"));
        assert_eq!(CollocationSet::from_csv(&text).unwrap(), b);
    }
}
