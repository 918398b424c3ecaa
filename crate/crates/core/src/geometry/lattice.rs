//! Shifted cubic lattices, the direction set `D`, directional
//! half-neighbourhoods of a crack, and the bad-cube classification built on them.

use rayon::prelude::*;

use super::crack::CrackSurface;
use super::predicates::{to_point, Point};
use crate::error::{Error, Result};

/// Relative tolerance of the intersection predicates: `eps_geom = GEOM_TOL * h`.
pub const GEOM_TOL: f64 = 1e-9;

/// The cubic lattice `h Z^n + h y` restricted to cubes meeting an open box.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedGrid {
    h: f64,
    y: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    zmin: Vec<i64>,
    zmax: Vec<i64>,
}

impl ShiftedGrid {
    pub fn new(h: f64, y: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if !(2..=3).contains(&n) || lo.len() != n || hi.len() != n {
            return Err(Error::param("shifted grid needs dimension 2 or 3 with matching box bounds"));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::param(format!("grid spacing must be positive, got {h}")));
        }
        if y.iter().any(|&t| !(0.0..1.0).contains(&t)) {
            return Err(Error::param(format!("offset {y:?} must lie in [0,1)^n")));
        }
        if (0..n).any(|d| !(hi[d] > lo[d])) {
            return Err(Error::param("box must have positive extent"));
        }
        let mut zmin = vec![0; n];
        let mut zmax = vec![0; n];
        for d in 0..n {
            // open cube (h z + h y, h z + h y + h) meets open (lo, hi)
            let a = (lo[d] - h * y[d]) / h - 1.0;
            let b = (hi[d] - h * y[d]) / h;
            zmin[d] = a.floor() as i64 + 1;
            zmax[d] = b.ceil() as i64 - 1;
        }
        Ok(Self { h, y, lo, hi, zmin, zmax })
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn offset(&self) -> &[f64] {
        &self.y
    }

    pub fn box_lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn box_hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn eps(&self) -> f64 {
        GEOM_TOL * self.h
    }

    /// Inclusive range of cube indices along `axis`.
    pub fn cube_range(&self, axis: usize) -> (i64, i64) {
        (self.zmin[axis], self.zmax[axis])
    }

    fn cubes_along(&self, axis: usize) -> usize {
        (self.zmax[axis] - self.zmin[axis] + 1) as usize
    }

    pub fn num_cubes(&self) -> usize {
        (0..self.dim()).map(|d| self.cubes_along(d)).product()
    }

    pub fn cube_flat(&self, z: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for d in 0..self.dim() {
            if z[d] < self.zmin[d] || z[d] > self.zmax[d] {
                return None;
            }
            idx = idx * self.cubes_along(d) + (z[d] - self.zmin[d]) as usize;
        }
        Some(idx)
    }

    pub fn cube_multi(&self, mut flat: usize) -> Vec<i64> {
        let n = self.dim();
        let mut z = vec![0; n];
        for d in (0..n).rev() {
            let m = self.cubes_along(d);
            z[d] = self.zmin[d] + (flat % m) as i64;
            flat /= m;
        }
        z
    }

    /// `h z + h y`, the lower corner of cube `z`.
    pub fn lattice_point(&self, z: &[i64]) -> Vec<f64> {
        z.iter().zip(&self.y).map(|(&zi, &yi)| self.h * (zi as f64 + yi)).collect()
    }

    /// Index of the cube whose half-open closure `[corner, corner + h)` contains `x`.
    /// Coordinates within `1e-9 h` of a lattice hyperplane snap onto it.
    pub fn locate(&self, x: &[f64]) -> Vec<i64> {
        x.iter()
            .zip(&self.y)
            .map(|(&xi, &yi)| {
                let t = xi / self.h - yi;
                let r = t.round();
                if (t - r).abs() < GEOM_TOL { r as i64 } else { t.floor() as i64 }
            })
            .collect()
    }

    /// Lattice corners span `zmin ..= zmax + 1` along each axis.
    pub(crate) fn corner_dims(&self) -> Vec<usize> {
        (0..self.dim()).map(|d| self.cubes_along(d) + 1).collect()
    }

    pub(crate) fn corner_flat(&self, z: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for d in 0..self.dim() {
            if z[d] < self.zmin[d] || z[d] > self.zmax[d] + 1 {
                return None;
            }
            idx = idx * (self.cubes_along(d) + 1) + (z[d] - self.zmin[d]) as usize;
        }
        Some(idx)
    }

    pub(crate) fn num_corners(&self) -> usize {
        self.corner_dims().iter().product()
    }
}

/// Which member of `D` a direction is; decides the designated cube corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionKind {
    Axis { i: usize },
    Sum { i: usize, j: usize },
    Diff { i: usize, j: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub kind: DirectionKind,
    pub vector: [i64; 3],
}

impl Direction {
    pub fn as_f64(&self, n: usize) -> Vec<f64> {
        self.vector[..n].iter().map(|&v| v as f64).collect()
    }

    pub fn length(&self) -> f64 {
        (self.vector.iter().map(|v| v * v).sum::<i64>() as f64).sqrt()
    }

    /// Integer offsets, relative to the cube's lower corner, of the corners
    /// tested against the half-neighbourhood of this direction.
    pub fn designated_corners(&self, n: usize) -> Vec<Vec<i64>> {
        let (fixed, shift): (Vec<usize>, Option<usize>) = match self.kind {
            DirectionKind::Axis { i } => (vec![i], None),
            DirectionKind::Sum { i, j } => (vec![i, j], None),
            DirectionKind::Diff { i, j } => (vec![i, j], Some(j)),
        };
        let mut out = Vec::new();
        for mask in 0..1usize << n {
            if fixed.iter().any(|&f| mask >> f & 1 == 1) {
                continue;
            }
            let mut eta: Vec<i64> = (0..n).map(|d| (mask >> d & 1) as i64).collect();
            if let Some(j) = shift {
                eta[j] += 1;
            }
            out.push(eta);
        }
        out
    }
}

/// `D = {e_i} u {e_i + e_j} u {e_i - e_j}`, `i != j`, as distinct vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    n: usize,
    dirs: Vec<Direction>,
}

impl DirectionSet {
    pub fn new(n: usize) -> Self {
        let mut dirs = Vec::new();
        let unit = |i: usize| {
            let mut v = [0i64; 3];
            v[i] = 1;
            v
        };
        for i in 0..n {
            dirs.push(Direction { kind: DirectionKind::Axis { i }, vector: unit(i) });
        }
        for i in 0..n {
            for j in i + 1..n {
                let mut v = unit(i);
                v[j] = 1;
                dirs.push(Direction { kind: DirectionKind::Sum { i, j }, vector: v });
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let mut v = unit(i);
                    v[j] = -1;
                    dirs.push(Direction { kind: DirectionKind::Diff { i, j }, vector: v });
                }
            }
        }
        Self { n, dirs }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Direction> {
        self.dirs.iter()
    }

    pub fn get(&self, k: usize) -> &Direction {
        &self.dirs[k]
    }

    /// `sum_{e in D} |e . nu| / |e|`.
    pub fn slab_constant(&self, nu: &[f64]) -> f64 {
        self.dirs
            .iter()
            .map(|d| d.as_f64(self.n).iter().zip(nu).map(|(a, b)| a * b).sum::<f64>().abs() / d.length())
            .sum()
    }
}

/// Whether the closed segment `[p, q]` meets the crack, within `eps`.
pub fn segment_hits_crack(p: &[f64], q: &[f64], crack: &CrackSurface, eps: f64) -> Result<bool> {
    let (pp, qq) = (to_point(p), to_point(q));
    if pp == qq {
        return Err(Error::Degenerate("segment endpoints coincide".into()));
    }
    Ok(segment_hits(&pp, &qq, crack, eps))
}

fn segment_hits(p: &Point, q: &Point, crack: &CrackSurface, eps: f64) -> bool {
    crack.simplices().iter().any(|s| {
        let (lo, hi) = s.bbox();
        for d in 0..3 {
            if p[d].max(q[d]) < lo[d] - eps || p[d].min(q[d]) > hi[d] + eps {
                return false;
            }
        }
        s.distance_to_segment(p, q) <= eps
    })
}

/// `p` lies in the half-neighbourhood `J^{h e}` iff `[p, p + h e]` meets the crack.
pub fn in_half_neighborhood(p: &[f64], e: &[f64], h: f64, crack: &CrackSurface) -> bool {
    let pp = to_point(p);
    let mut q = pp;
    for (d, &ed) in e.iter().enumerate() {
        q[d] += h * ed;
    }
    segment_hits(&pp, &q, crack, GEOM_TOL * h)
}

/// Half-neighbourhood membership of every lattice corner, per direction of `D`.
#[derive(Debug, Clone)]
pub struct HalfNeighborhoods {
    dirs: DirectionSet,
    member: Vec<Vec<bool>>,
}

impl HalfNeighborhoods {
    pub fn compute(grid: &ShiftedGrid, crack: &CrackSurface) -> Result<Self> {
        let n = grid.dim();
        if crack.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: crack.dim() });
        }
        let dirs = DirectionSet::new(n);
        let total = grid.num_corners();
        let member = dirs
            .iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|dir| {
                let mut flags = vec![false; total];
                let e = dir.as_f64(n);
                let h = grid.h();
                let eps = grid.eps();
                for s in crack.simplices() {
                    let (lo, hi) = s.bbox();
                    // candidate corners p with [p, p + h e] touching the bbox
                    let mut ranges = Vec::with_capacity(n);
                    let mut empty = false;
                    for d in 0..n {
                        let a = lo[d] - (h * e[d]).max(0.0) - eps;
                        let b = hi[d] - (h * e[d]).min(0.0) + eps;
                        let (zlo, zhi) = grid.cube_range(d);
                        let za = ((a / h - grid.offset()[d]).ceil() as i64).max(zlo);
                        let zb = ((b / h - grid.offset()[d]).floor() as i64).min(zhi + 1);
                        if za > zb {
                            empty = true;
                            break;
                        }
                        ranges.push((za, zb));
                    }
                    if empty {
                        continue;
                    }
                    for_each_index(&ranges, |z| {
                        let flat = grid.corner_flat(z).expect("clipped to corner range");
                        if !flags[flat] {
                            let p = grid.lattice_point(z);
                            flags[flat] = in_half_neighborhood(&p, &e, h, crack);
                        }
                    });
                }
                flags
            })
            .collect();
        Ok(Self { dirs, member })
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.dirs
    }

    /// Membership of lattice corner `z` in `J^{h e_k}`; corners outside the
    /// tabulated range are reported as outside.
    pub fn contains(&self, grid: &ShiftedGrid, k: usize, z: &[i64]) -> bool {
        grid.corner_flat(z).map(|f| self.member[k][f]).unwrap_or(false)
    }
}

pub(crate) fn for_each_index(ranges: &[(i64, i64)], mut f: impl FnMut(&[i64])) {
    if ranges.iter().any(|(a, b)| a > b) {
        return;
    }
    let mut z: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        f(&z);
        let mut d = ranges.len();
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            z[d] += 1;
            if z[d] <= ranges[d].1 {
                break;
            }
            z[d] = ranges[d].0;
        }
    }
}

/// Bad-cube flags of a shifted grid relative to a crack.
#[derive(Debug, Clone)]
pub struct CubeClassification {
    grid: ShiftedGrid,
    bad: Vec<bool>,
}

impl CubeClassification {
    pub fn grid(&self) -> &ShiftedGrid {
        &self.grid
    }

    pub fn is_bad(&self, z: &[i64]) -> bool {
        self.grid.cube_flat(z).map(|f| self.bad[f]).unwrap_or(false)
    }

    pub fn bad_count(&self) -> usize {
        self.bad.iter().filter(|&&b| b).count()
    }

    pub fn bad_cubes(&self) -> Vec<Vec<i64>> {
        self.bad
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(f, _)| self.grid.cube_multi(f))
            .collect()
    }

    pub fn flags(&self) -> &[bool] {
        &self.bad
    }

    /// Builds a classification from an explicit bad set; cubes outside the grid are ignored.
    pub fn from_bad_set(grid: ShiftedGrid, cubes: &[Vec<i64>]) -> Self {
        let mut bad = vec![false; grid.num_cubes()];
        for z in cubes {
            if let Some(f) = grid.cube_flat(z) {
                bad[f] = true;
            }
        }
        Self { grid, bad }
    }
}

/// Classifies every cube: bad iff some direction `e` of `D` has a designated
/// corner inside `J^{h e}`.
pub fn classify_cubes(grid: &ShiftedGrid, crack: &CrackSurface) -> Result<CubeClassification> {
    let table = HalfNeighborhoods::compute(grid, crack)?;
    Ok(classify_with(grid, &table))
}

pub fn classify_with(grid: &ShiftedGrid, table: &HalfNeighborhoods) -> CubeClassification {
    let n = grid.dim();
    let corners: Vec<Vec<Vec<i64>>> = table.directions().iter().map(|d| d.designated_corners(n)).collect();
    let bad = (0..grid.num_cubes())
        .into_par_iter()
        .map(|flat| {
            let z = grid.cube_multi(flat);
            corners.iter().enumerate().any(|(k, offs)| {
                offs.iter().any(|off| {
                    let c: Vec<i64> = z.iter().zip(off).map(|(a, b)| a + b).collect();
                    table.contains(grid, k, &c)
                })
            })
        })
        .collect();
    CubeClassification { grid: grid.clone(), bad }
}

/// `h^n sum_{e in D} sum_z 1_{J^{he}}(h z + h y) / (h |e|)` over the lower
/// corners of the cubes meeting the box.
pub fn discrete_jump_energy(grid: &ShiftedGrid, crack: &CrackSurface) -> Result<f64> {
    let table = HalfNeighborhoods::compute(grid, crack)?;
    Ok(jump_energy_with(grid, &table))
}

pub fn jump_energy_with(grid: &ShiftedGrid, table: &HalfNeighborhoods) -> f64 {
    let n = grid.dim();
    let h = grid.h();
    let mut total = 0.0;
    for (k, dir) in table.directions().iter().enumerate() {
        let count = (0..grid.num_cubes())
            .filter(|&flat| table.contains(grid, k, &grid.cube_multi(flat)))
            .count();
        total += count as f64 / (h * dir.length());
    }
    h.powi(n as i32) * total
}

/// `H^{n-1}` of the boundary of the union of bad cubes (exposed faces only).
pub fn bad_cube_boundary_measure(c: &CubeClassification) -> f64 {
    let grid = c.grid();
    let n = grid.dim();
    let face = grid.h().powi(n as i32 - 1);
    let mut count = 0usize;
    for z in c.bad_cubes() {
        for d in 0..n {
            for s in [-1i64, 1] {
                let mut nb = z.clone();
                nb[d] += s;
                if !c.is_bad(&nb) {
                    count += 1;
                }
            }
        }
    }
    count as f64 * face
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vertical_crack() -> CrackSurface {
        CrackSurface::segment([0.5, 0.0], [0.5, 1.0]).unwrap()
    }

    fn unit_grid(h: f64, y: [f64; 2]) -> ShiftedGrid {
        ShiftedGrid::new(h, y.to_vec(), vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    /// Exhaustive Definition check for the vertical crack `{x1 = 1/2} x [0, 1]`,
    /// using the exact crossing of `[p, p + h e]` with the line `x1 = 1/2`.
    fn brute_bad(grid: &ShiftedGrid, z: &[i64]) -> bool {
        let h = grid.h();
        let hits = |p: &[f64], e: &[i64; 3]| -> bool {
            let (e0, e1) = (e[0] as f64, e[1] as f64);
            if e0 == 0.0 {
                return p[0] == 0.5 && {
                    let (a, b) = (p[1].min(p[1] + h * e1), p[1].max(p[1] + h * e1));
                    b >= 0.0 && a <= 1.0
                };
            }
            let t = (0.5 - p[0]) / (h * e0);
            if !(0.0..=1.0).contains(&t) {
                return false;
            }
            let x1 = p[1] + t * h * e1;
            (0.0..=1.0).contains(&x1)
        };
        let dirs = DirectionSet::new(2);
        for dir in dirs.iter() {
            for off in dir.designated_corners(2) {
                let c: Vec<i64> = z.iter().zip(&off).map(|(a, b)| a + b).collect();
                if hits(&grid.lattice_point(&c), &dir.vector) {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn direction_set_sizes() {
        assert_eq!(DirectionSet::new(2).len(), 5);
        assert_eq!(DirectionSet::new(3).len(), 12);
        let c = DirectionSet::new(2).slab_constant(&[1.0, 0.0]);
        assert!((c - (1.0 + 3.0 / 2f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn designated_corners_follow_the_case_analysis() {
        let dirs = DirectionSet::new(2);
        let by_kind = |k: DirectionKind| dirs.iter().find(|d| d.kind == k).unwrap().designated_corners(2);
        assert_eq!(by_kind(DirectionKind::Axis { i: 0 }), vec![vec![0, 0], vec![0, 1]]);
        assert_eq!(by_kind(DirectionKind::Sum { i: 0, j: 1 }), vec![vec![0, 0]]);
        assert_eq!(by_kind(DirectionKind::Diff { i: 0, j: 1 }), vec![vec![0, 1]]);
        assert_eq!(by_kind(DirectionKind::Diff { i: 1, j: 0 }), vec![vec![1, 0]]);
    }

    #[test]
    fn segment_hit_examples() {
        let c = vertical_crack();
        assert!(segment_hits_crack(&[0.4, 0.3], &[0.6, 0.3], &c, 1e-12).unwrap());
        assert!(!segment_hits_crack(&[0.1, 0.3], &[0.2, 0.3], &c, 1e-12).unwrap());
        assert!(segment_hits_crack(&[0.5, 0.3], &[0.5, 0.4], &c, 1e-12).unwrap());
        assert!(segment_hits_crack(&[0.5, 0.3], &[0.5, 0.3], &c, 1e-12).is_err());
    }

    #[test]
    fn coplanar_overlap_agrees_with_point_sampling() {
        let c = vertical_crack();
        let cases = [([0.5, -0.5], [0.5, 0.2]), ([0.5, 1.2], [0.5, 1.4]), ([0.5, 0.9], [0.5, 1.5])];
        for (p, q) in cases {
            let sampled = (0..=1000).any(|k| {
                let t = k as f64 / 1000.0;
                let y = p[1] + t * (q[1] - p[1]);
                (0.0..=1.0).contains(&y)
            });
            assert_eq!(segment_hits_crack(&p, &q, &c, 1e-12).unwrap(), sampled);
        }
    }

    #[test]
    fn half_neighborhood_examples() {
        let c = vertical_crack();
        assert!(in_half_neighborhood(&[0.45, 0.3], &[1.0, 0.0], 0.1, &c));
        assert!(!in_half_neighborhood(&[0.6, 0.3], &[1.0, 0.0], 0.1, &c));
        assert!(!in_half_neighborhood(&[0.45, 0.3], &[0.0, 1.0], 0.1, &c));
    }

    #[test]
    fn empty_and_far_cracks_give_no_bad_cubes() {
        let g = unit_grid(0.25, [0.0, 0.0]);
        let c = classify_cubes(&g, &CrackSurface::empty(2)).unwrap();
        assert_eq!(c.bad_count(), 0);
        assert_eq!(discrete_jump_energy(&g, &CrackSurface::empty(2)).unwrap(), 0.0);
        let far = CrackSurface::segment([3.0, 0.0], [3.0, 1.0]).unwrap();
        assert_eq!(classify_cubes(&g, &far).unwrap().bad_count(), 0);
    }

    #[test]
    fn classification_matches_brute_force() {
        let c = vertical_crack();
        for (h, y) in [(0.25, [0.0, 0.0]), (0.25, [0.3, 0.7]), (0.1, [0.5, 0.5]), (1.0 / 64.0, [0.13, 0.91])] {
            let g = unit_grid(h, y);
            let cls = classify_cubes(&g, &c).unwrap();
            assert!(g.num_cubes() <= 10_000);
            for flat in 0..g.num_cubes() {
                let z = g.cube_multi(flat);
                assert_eq!(cls.is_bad(&z), brute_bad(&g, &z), "h={h} y={y:?} z={z:?}");
            }
        }
        let g = unit_grid(0.25, [0.0, 0.0]);
        assert_eq!(g.num_cubes(), 16);
        let cls = classify_cubes(&g, &c).unwrap();
        // lattice-aligned crack: the two columns touching x1 = 1/2
        assert_eq!(cls.bad_count(), 8);
    }

    #[test]
    fn jump_energy_matches_enumeration() {
        let c = vertical_crack();
        let g = unit_grid(0.25, [0.0, 0.0]);
        let mut direct = 0.0;
        for dir in DirectionSet::new(2).iter() {
            let e = dir.as_f64(2);
            for flat in 0..g.num_cubes() {
                let p = g.lattice_point(&g.cube_multi(flat));
                if in_half_neighborhood(&p, &e, 0.25, &c) {
                    direct += 0.25f64.powi(2) / (0.25 * dir.length());
                }
            }
        }
        let e = discrete_jump_energy(&g, &c).unwrap();
        assert!((e - direct).abs() < 1e-14);
        assert!(e > 0.0);
    }

    #[test]
    fn boundary_measure_examples() {
        let g = unit_grid(0.25, [0.0, 0.0]);
        let one = CubeClassification::from_bad_set(g.clone(), &[vec![1, 1]]);
        assert!((bad_cube_boundary_measure(&one) - 1.0).abs() < 1e-15);
        let two = CubeClassification::from_bad_set(g.clone(), &[vec![1, 1], vec![2, 1]]);
        assert!((bad_cube_boundary_measure(&two) - 1.5).abs() < 1e-15);
        let none = CubeClassification::from_bad_set(g, &[]);
        assert_eq!(bad_cube_boundary_measure(&none), 0.0);
    }

    #[test]
    fn enlarging_the_crack_never_shrinks_the_bad_set() {
        let g = unit_grid(0.1, [0.37, 0.61]);
        let small = vertical_crack();
        let mut big = small.clone();
        big.push(crate::geometry::crack::Simplex::new(2, &[vec![0.1, 0.2], vec![0.8, 0.35]]).unwrap()).unwrap();
        let a = classify_cubes(&g, &small).unwrap();
        let b = classify_cubes(&g, &big).unwrap();
        for (x, y) in a.flags().iter().zip(b.flags()) {
            assert!(!x || *y);
        }
        assert!(b.bad_count() > a.bad_count());
    }

    #[test]
    fn grid_rejects_bad_offsets() {
        assert!(ShiftedGrid::new(0.1, vec![1.0, 0.0], vec![0.0; 2], vec![1.0; 2]).is_err());
        assert!(ShiftedGrid::new(0.0, vec![0.0, 0.0], vec![0.0; 2], vec![1.0; 2]).is_err());
    }
}
