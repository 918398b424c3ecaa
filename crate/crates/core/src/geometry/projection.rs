//! Measures of orthogonal projections onto coordinate hyperplanes.
//!
//! In the plane a projection is a union of intervals and is measured exactly.
//! In space each piece projects to a convex polygon and the union is
//! rasterized; the returned error bound covers the cells cut by polygon edges.

use super::crack::CrackSurface;
use super::lattice::CubeClassification;
use super::predicates::{to_point, Point};
use crate::error::{Error, Result};

/// A convex piece of space: a segment, a flat polygon or a box given by its
/// corners. Only the convex hull of `points` matters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPiece {
    pub points: Vec<Point>,
}

impl ConvexPiece {
    pub fn segment(a: &[f64], b: &[f64]) -> Self {
        Self { points: vec![to_point(a), to_point(b)] }
    }

    /// Axis-aligned box `[lo, hi]` in dimension `lo.len()`.
    pub fn cuboid(lo: &[f64], hi: &[f64]) -> Self {
        let n = lo.len();
        let points = (0..1usize << n)
            .map(|mask| {
                let c: Vec<f64> = (0..n).map(|d| if mask >> d & 1 == 1 { hi[d] } else { lo[d] }).collect();
                to_point(&c)
            })
            .collect();
        Self { points }
    }

    /// Clips against the box `[lo, hi]`; `None` if nothing is left.
    pub fn clip(&self, lo: &[f64], hi: &[f64]) -> Option<Self> {
        let mut pts = self.points.clone();
        for d in 0..lo.len() {
            pts = clip_halfspace(&pts, d, lo[d], 1.0);
            pts = clip_halfspace(&pts, d, hi[d], -1.0);
            if pts.is_empty() {
                return None;
            }
        }
        Some(Self { points: pts })
    }
}

/// Keeps the part of the convex hull of `pts` with `sign * (x_d - c) >= 0`.
/// Works on the full point cloud: every edge between kept/dropped points
/// contributes a crossing, which over-generates points inside the hull only.
fn clip_halfspace(pts: &[Point], d: usize, c: f64, sign: f64) -> Vec<Point> {
    let side = |p: &Point| sign * (p[d] - c);
    let mut out: Vec<Point> = pts.iter().filter(|p| side(p) >= 0.0).copied().collect();
    if out.len() == pts.len() {
        return out;
    }
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            let (sa, sb) = (side(a), side(b));
            if (sa > 0.0 && sb < 0.0) || (sa < 0.0 && sb > 0.0) {
                let t = sa / (sa - sb);
                let mut x = [0.0; 3];
                for k in 0..3 {
                    x[k] = a[k] + t * (b[k] - a[k]);
                }
                x[d] = c;
                out.push(x);
            }
        }
    }
    out
}

/// Pieces of a crack surface.
pub fn crack_pieces(crack: &CrackSurface) -> Vec<ConvexPiece> {
    crack.simplices().iter().map(|s| ConvexPiece { points: s.vertices().to_vec() }).collect()
}

/// The closed bad cubes of a classification.
pub fn bad_cube_pieces(c: &CubeClassification) -> Vec<ConvexPiece> {
    let g = c.grid();
    let h = g.h();
    c.bad_cubes()
        .iter()
        .map(|z| {
            let lo = g.lattice_point(z);
            let hi: Vec<f64> = lo.iter().map(|x| x + h).collect();
            ConvexPiece::cuboid(&lo, &hi)
        })
        .collect()
}

/// Exposed faces of the bad-cube union, one flat piece per face.
pub fn bad_boundary_face_pieces(c: &CubeClassification) -> Vec<ConvexPiece> {
    let g = c.grid();
    let h = g.h();
    let n = g.dim();
    let mut out = Vec::new();
    for z in c.bad_cubes() {
        let lo = g.lattice_point(&z);
        for d in 0..n {
            for s in [0i64, 1] {
                let mut nb = z.clone();
                nb[d] += 2 * s - 1;
                if c.is_bad(&nb) {
                    continue;
                }
                let mut flo = lo.clone();
                let mut fhi: Vec<f64> = lo.iter().map(|x| x + h).collect();
                flo[d] += s as f64 * h;
                fhi[d] = flo[d];
                out.push(ConvexPiece::cuboid(&flo, &fhi));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionEstimate {
    pub value: f64,
    /// Zero for interval unions; a rasterization bound otherwise.
    pub error_bound: f64,
}

fn axis_of(xi: &[f64], n: usize) -> Result<usize> {
    if xi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: xi.len() });
    }
    let nonzero: Vec<usize> = (0..n).filter(|&d| xi[d] != 0.0).collect();
    match nonzero.as_slice() {
        [k] if (xi[*k].abs() - 1.0).abs() < 1e-12 => Ok(*k),
        _ => Err(Error::param(format!("unsupported projection direction {xi:?}; only coordinate axes are handled"))),
    }
}

/// `H^{n-1}(pi_xi(A))` for a coordinate direction `xi`.
pub fn projection_measure(n: usize, a: &[ConvexPiece], xi: &[f64], resolution: f64) -> Result<ProjectionEstimate> {
    projection_difference(n, a, &[], xi, resolution)
}

/// `H^{n-1}(pi_xi(A) \ pi_xi(B))`.
pub fn projection_difference(
    n: usize,
    a: &[ConvexPiece],
    b: &[ConvexPiece],
    xi: &[f64],
    resolution: f64,
) -> Result<ProjectionEstimate> {
    let axis = axis_of(xi, n)?;
    match n {
        2 => {
            let other = 1 - axis;
            let ia = interval_union(a, other);
            let ib = interval_union(b, other);
            let value = union_length(&ia) - intersection_length(&ia, &ib);
            Ok(ProjectionEstimate { value: value.max(0.0), error_bound: 0.0 })
        }
        3 => {
            if !(resolution > 0.0) {
                return Err(Error::param("rasterization resolution must be positive"));
            }
            Ok(raster_difference(a, b, axis, resolution))
        }
        _ => Err(Error::param(format!("unsupported dimension {n}"))),
    }
}

fn interval_union(pieces: &[ConvexPiece], coord: usize) -> Vec<(f64, f64)> {
    let mut iv: Vec<(f64, f64)> = pieces
        .iter()
        .filter(|p| !p.points.is_empty())
        .map(|p| {
            let lo = p.points.iter().map(|x| x[coord]).fold(f64::INFINITY, f64::min);
            let hi = p.points.iter().map(|x| x[coord]).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    iv.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in iv {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    merged
}

fn union_length(iv: &[(f64, f64)]) -> f64 {
    iv.iter().map(|(a, b)| b - a).sum()
}

/// Both inputs sorted and disjoint.
fn intersection_length(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j, mut total) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            total += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Counter-clockwise convex hull (monotone chain) of planar points.
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for p in &pts {
        while hull.len() >= 2 && turn(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && turn(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let m = poly.len();
    (0..m)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % m]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        * 0.5
}

fn perimeter(poly: &[[f64; 2]]) -> f64 {
    let m = poly.len();
    (0..m)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % m]);
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
        })
        .sum()
}

fn projected_polygons(pieces: &[ConvexPiece], axis: usize) -> Vec<Vec<[f64; 2]>> {
    let (u, v) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    pieces
        .iter()
        .map(|p| convex_hull(p.points.iter().map(|x| [x[u], x[v]]).collect()))
        .filter(|poly| poly.len() >= 3 && polygon_area(poly) > 1e-14)
        .collect()
}

fn raster_difference(a: &[ConvexPiece], b: &[ConvexPiece], axis: usize, eps: f64) -> ProjectionEstimate {
    let pa = projected_polygons(a, axis);
    let pb = projected_polygons(b, axis);
    if pa.is_empty() {
        return ProjectionEstimate { value: 0.0, error_bound: 0.0 };
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in pa.iter().flatten() {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let nx = (((hi[0] - lo[0]) / eps).ceil() as usize).max(1);
    let ny = (((hi[1] - lo[1]) / eps).ceil() as usize).max(1);
    let mut mask = vec![0u8; nx * ny];
    let mut paint = |poly: &[[f64; 2]], val: u8| {
        let (mut plo, mut phi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in poly {
            for k in 0..2 {
                plo[k] = plo[k].min(p[k]);
                phi[k] = phi[k].max(p[k]);
            }
        }
        let i0 = (((plo[0] - lo[0]) / eps - 0.5).ceil().max(0.0)) as usize;
        let j0 = (((plo[1] - lo[1]) / eps - 0.5).ceil().max(0.0)) as usize;
        let i1 = ((((phi[0] - lo[0]) / eps - 0.5).floor() + 1.0).max(0.0) as usize).min(nx);
        let j1 = ((((phi[1] - lo[1]) / eps - 0.5).floor() + 1.0).max(0.0) as usize).min(ny);
        for i in i0..i1 {
            let x = lo[0] + (i as f64 + 0.5) * eps;
            for j in j0..j1 {
                let y = lo[1] + (j as f64 + 0.5) * eps;
                if inside_ccw(poly, x, y) {
                    let cell = &mut mask[i * ny + j];
                    if val == 1 && *cell == 0 {
                        *cell = 1;
                    } else if val == 2 {
                        *cell = 2;
                    }
                }
            }
        }
    };
    for poly in &pa {
        paint(poly, 1);
    }
    for poly in &pb {
        paint(poly, 2);
    }
    let count = mask.iter().filter(|&&m| m == 1).count();
    let per: f64 = pa.iter().chain(pb.iter()).map(|p| perimeter(p)).sum();
    ProjectionEstimate { value: count as f64 * eps * eps, error_bound: std::f64::consts::SQRT_2 * eps * per }
}

fn inside_ccw(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let m = poly.len();
    (0..m).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % m]);
        (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]) >= 0.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_examples() {
        let seg = [ConvexPiece::segment(&[0.5, -0.5], &[0.5, 0.5])];
        assert_eq!(projection_measure(2, &seg, &[0.0, 1.0], 0.0).unwrap().value, 0.0);
        assert!((projection_measure(2, &seg, &[1.0, 0.0], 0.0).unwrap().value - 1.0).abs() < 1e-15);
        let two = [ConvexPiece::segment(&[0.0, 0.0], &[1.0, 0.0]), ConvexPiece::segment(&[0.5, 0.2], &[1.5, 0.2])];
        assert!((projection_measure(2, &two, &[0.0, 1.0], 0.0).unwrap().value - 1.5).abs() < 1e-15);
        let minus = [ConvexPiece::segment(&[0.2, 0.0], &[0.7, 0.0])];
        let d = projection_difference(2, &two, &minus, &[0.0, -1.0], 0.0).unwrap();
        assert!((d.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn oblique_direction_rejected() {
        let seg = [ConvexPiece::segment(&[0.0, 0.0], &[1.0, 0.0])];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(projection_measure(2, &seg, &[s, s], 0.0).is_err());
    }

    #[test]
    fn spatial_rasterization_within_bound() {
        // unit square in the plane x3 = 0 and a triangle overlapping it
        let sq = ConvexPiece::cuboid(&[0.0, 0.0, 0.0], &[1.0, 1.0, 0.0]);
        let tri = ConvexPiece { points: vec![[0.5, 0.0, 0.3], [1.5, 0.0, 0.3], [0.5, 1.0, 0.3]] };
        let est = projection_measure(3, &[sq.clone(), tri.clone()], &[0.0, 0.0, 1.0], 1.0 / 64.0).unwrap();
        // square plus the part of the triangle right of x1 = 1: 1 + 1/8
        assert!((est.value - 1.125).abs() <= est.error_bound, "{est:?}");
        // vertical triangle viewed from above has no area
        let wall = ConvexPiece { points: vec![[0.5, 0.0, 0.0], [0.5, 1.0, 0.0], [0.5, 0.0, 1.0]] };
        assert_eq!(projection_measure(3, &[wall.clone()], &[0.0, 0.0, 1.0], 0.01).unwrap().value, 0.0);
        let side = projection_measure(3, &[wall], &[1.0, 0.0, 0.0], 1.0 / 128.0).unwrap();
        assert!((side.value - 0.5).abs() <= side.error_bound);
        let diff = projection_difference(3, &[sq.clone()], &[sq], &[0.0, 0.0, 1.0], 0.05).unwrap();
        assert_eq!(diff.value, 0.0);
    }

    #[test]
    fn clipping() {
        let seg = ConvexPiece::segment(&[-1.0, 0.5], &[2.0, 0.5]);
        let c = seg.clip(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let est = projection_measure(2, &[c], &[0.0, 1.0], 0.0).unwrap();
        assert!((est.value - 1.0).abs() < 1e-15);
        assert!(ConvexPiece::segment(&[2.0, 0.0], &[3.0, 0.0]).clip(&[0.0, 0.0], &[1.0, 1.0]).is_none());
        let tri = ConvexPiece { points: vec![[-1.0, -1.0, 0.0], [3.0, -1.0, 0.0], [-1.0, 3.0, 0.0]] };
        let clipped = tri.clip(&[0.0, 0.0, -1.0], &[1.0, 1.0, 1.0]).unwrap();
        let est = projection_measure(3, &[clipped], &[0.0, 0.0, 1.0], 1.0 / 64.0).unwrap();
        assert!((est.value - 1.0).abs() <= est.error_bound);
    }
}
