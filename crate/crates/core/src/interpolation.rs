//! Lattice sampling, multilinear (hat-function) interpolation, piecewise-constant
//! directional strains with crack cutoff, and the approximant that vanishes on
//! bad cubes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::lattice::{classify_with, for_each_index};
use crate::geometry::projection::{bad_boundary_face_pieces, crack_pieces};
use crate::geometry::{
    projection_difference, CrackSurface, CubeClassification, Direction, HalfNeighborhoods, ProjectionEstimate,
    ShiftedGrid,
};

/// A displacement that can be evaluated pointwise.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// `grad[i][j] = d v_i / d x_j`. Central differences unless overridden.
    fn gradient(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        let step = 1e-6 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let mut g = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += step;
            xm[j] -= step;
            let (vp, vm) = (self.eval(&xp)?, self.eval(&xm)?);
            for i in 0..n {
                g[i][j] = (vp[i] - vm[i]) / (2.0 * step);
            }
        }
        Ok(g)
    }

    /// `e(v) e . e` for a (not necessarily unit) direction `e`.
    fn strain_along(&self, x: &[f64], e: &[f64]) -> Result<f64> {
        let g = self.gradient(x)?;
        Ok((0..e.len()).map(|i| (0..e.len()).map(|j| e[i] * g[i][j] * e[j]).sum::<f64>()).sum())
    }
}

type Eval = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A closed-form field on a closed box.
pub struct FnField {
    lo: Vec<f64>,
    hi: Vec<f64>,
    f: Box<Eval>,
    grad: Option<Box<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>>,
}

impl FnField {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self { lo, hi, f: Box::new(f), grad: None }
    }

    pub fn everywhere(n: usize, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self::new(vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n], f)
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static) -> Self {
        self.grad = Some(Box::new(g));
        self
    }
}

impl VectorField for FnField {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        if x.iter().zip(self.lo.iter().zip(&self.hi)).any(|(v, (a, b))| v < a || v > b) {
            return Err(Error::Evaluation(x.to_vec()));
        }
        let v = (self.f)(x);
        if v.len() != self.dim() || v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Evaluation(x.to_vec()));
        }
        Ok(v)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        match &self.grad {
            Some(g) => {
                self.eval(x)?;
                Ok(g(x))
            }
            None => {
                let n = self.dim();
                let step = 1e-6 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                let mut g = vec![vec![0.0; n]; n];
                for j in 0..n {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[j] += step;
                    xm[j] -= step;
                    let (vp, vm) = ((self.f)(&xp), (self.f)(&xm));
                    for i in 0..n {
                        g[i][j] = (vp[i] - vm[i]) / (2.0 * step);
                    }
                }
                Ok(g)
            }
        }
    }
}

/// `v(xi + h y)` at every lattice point of the grid, with one extra layer on
/// each side so that difference quotients along any `e in D` are available.
#[derive(Debug, Clone)]
pub struct SampledField {
    grid: ShiftedGrid,
    zlo: Vec<i64>,
    dims: Vec<usize>,
    ncomp: usize,
    values: Vec<f64>,
}

impl SampledField {
    pub fn grid(&self) -> &ShiftedGrid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    fn flat(&self, z: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for d in 0..z.len() {
            let off = z[d] - self.zlo[d];
            if off < 0 || off as usize >= self.dims[d] {
                return None;
            }
            idx = idx * self.dims[d] + off as usize;
        }
        Some(idx)
    }

    /// Sample at lattice index `z`.
    pub fn at(&self, z: &[i64]) -> Option<&[f64]> {
        self.flat(z).map(|f| &self.values[f * self.ncomp..(f + 1) * self.ncomp])
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.ncomp
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn cube_and_local(&self, x: &[f64]) -> Result<(Vec<i64>, Vec<f64>)> {
        let g = &self.grid;
        let n = g.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x.len() });
        }
        let z = g.locate(x);
        for d in 0..n {
            let off = z[d] - self.zlo[d];
            if off < 0 || off as usize + 1 >= self.dims[d] {
                return Err(Error::Uncovered(x.to_vec()));
            }
        }
        let corner = g.lattice_point(&z);
        let s = (0..n)
            .map(|d| {
                let t = ((x[d] - corner[d]) / g.h()).clamp(0.0, 1.0);
                if t < crate::geometry::lattice::GEOM_TOL { 0.0 } else { t }
            })
            .collect();
        Ok((z, s))
    }
}

/// Samples `v` at every lattice point needed by the grid's cubes.
pub fn sample(v: &dyn VectorField, grid: &ShiftedGrid) -> Result<SampledField> {
    let n = grid.dim();
    if v.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: v.dim() });
    }
    let zlo: Vec<i64> = (0..n).map(|d| grid.cube_range(d).0 - 1).collect();
    let dims: Vec<usize> = (0..n).map(|d| (grid.cube_range(d).1 - grid.cube_range(d).0 + 4) as usize).collect();
    let mut points = Vec::with_capacity(dims.iter().product());
    let ranges: Vec<(i64, i64)> = (0..n).map(|d| (zlo[d], zlo[d] + dims[d] as i64 - 1)).collect();
    for_each_index(&ranges, |z| points.push(grid.lattice_point(z)));
    let vals = points.par_iter().map(|p| v.eval(p)).collect::<Result<Vec<_>>>()?;
    Ok(SampledField { grid: grid.clone(), zlo, dims, ncomp: n, values: vals.concat() })
}

/// `w(x) = sum_xi v(xi) Delta((x - xi - h y) / h)`, `Delta(x) = prod (1 - |x_i|)^+`.
pub fn interpolate(s: &SampledField, x: &[f64]) -> Result<Vec<f64>> {
    let (z, t) = s.cube_and_local(x)?;
    let n = z.len();
    let mut out = vec![0.0; s.ncomp];
    let mut corner = z.clone();
    for mask in 0..1usize << n {
        let mut w = 1.0;
        for d in 0..n {
            let bit = mask >> d & 1;
            corner[d] = z[d] + bit as i64;
            w *= if bit == 1 { t[d] } else { 1.0 - t[d] };
        }
        if w == 0.0 {
            continue;
        }
        let v = s.at(&corner).expect("corner inside sampled range");
        for (o, vi) in out.iter_mut().zip(v) {
            *o += w * vi;
        }
    }
    Ok(out)
}

/// Gradient of the interpolant inside the cube containing `x`.
pub fn interpolate_gradient(s: &SampledField, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (z, t) = s.cube_and_local(x)?;
    let n = z.len();
    let h = s.grid.h();
    let mut g = vec![vec![0.0; n]; s.ncomp];
    let mut corner = z.clone();
    for mask in 0..1usize << n {
        for d in 0..n {
            corner[d] = z[d] + (mask >> d & 1) as i64;
        }
        let v = s.at(&corner).expect("corner inside sampled range");
        for j in 0..n {
            let mut w = if mask >> j & 1 == 1 { 1.0 / h } else { -1.0 / h };
            for d in (0..n).filter(|&d| d != j) {
                w *= if mask >> d & 1 == 1 { t[d] } else { 1.0 - t[d] };
            }
            for i in 0..s.ncomp {
                g[i][j] += w * v[i];
            }
        }
    }
    Ok(g)
}

/// Hat-kernel weights `Delta((x - xi - h y)/h)` summed over the lattice
/// points of the containing cube.
pub fn partition_of_unity(s: &SampledField, x: &[f64]) -> Result<f64> {
    let (_, t) = s.cube_and_local(x)?;
    let n = t.len();
    Ok((0..1usize << n)
        .map(|mask| (0..n).map(|d| if mask >> d & 1 == 1 { t[d] } else { 1.0 - t[d] }).product::<f64>())
        .sum())
}

/// Piecewise-constant strain in one direction of `D`, one value per cube.
#[derive(Debug, Clone)]
pub struct DirectionalStrainField {
    grid: ShiftedGrid,
    direction: Direction,
    values: Vec<f64>,
    cut: Vec<bool>,
}

impl DirectionalStrainField {
    pub fn direction(&self) -> &Direction {
        &self.direction
    }

    /// Value on cube `z`; zero outside the grid.
    pub fn on_cube(&self, z: &[i64]) -> f64 {
        self.grid.cube_flat(z).map(|f| self.values[f]).unwrap_or(0.0)
    }

    /// Cutoff flag `c = 0`, i.e. the cube's lower corner lies in `J^{he}`.
    pub fn is_cut(&self, z: &[i64]) -> bool {
        self.grid.cube_flat(z).map(|f| self.cut[f]).unwrap_or(false)
    }

    pub fn at(&self, x: &[f64]) -> f64 {
        self.on_cube(&self.grid.locate(x))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `E_e` on every cube: `(v(xi + h e) - v(xi)) . e / h`, zeroed where the
/// lower corner `xi` lies in `J^{he}`. `k` indexes the table's direction set.
pub fn directional_strain(s: &SampledField, k: usize, table: &HalfNeighborhoods) -> Result<DirectionalStrainField> {
    let grid = s.grid();
    let n = grid.dim();
    if k >= table.directions().len() {
        return Err(Error::param(format!("direction index {k} out of range")));
    }
    let dir = *table.directions().get(k);
    let e = dir.as_f64(n);
    let h = grid.h();
    let results = (0..grid.num_cubes())
        .into_par_iter()
        .map(|flat| {
            let z = grid.cube_multi(flat);
            if table.contains(grid, k, &z) {
                return Ok((0.0, true));
            }
            let zn: Vec<i64> = (0..n).map(|d| z[d] + dir.vector[d]).collect();
            let (a, b) = match (s.at(&z), s.at(&zn)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::Uncovered(grid.lattice_point(&zn))),
            };
            let diff: f64 = (0..n).map(|d| (b[d] - a[d]) * e[d]).sum();
            Ok((diff / h, false))
        })
        .collect::<Result<Vec<_>>>()?;
    let (values, cut) = results.into_iter().unzip();
    Ok(DirectionalStrainField { grid: grid.clone(), direction: dir, values, cut })
}

/// Convenience wrapper computing the half-neighbourhood table itself.
pub fn directional_strain_for(s: &SampledField, k: usize, crack: &CrackSurface) -> Result<DirectionalStrainField> {
    let table = HalfNeighborhoods::compute(s.grid(), crack)?;
    directional_strain(s, k, &table)
}

/// The approximant `v_k`: zero on bad cubes, the interpolant elsewhere, on
/// the sub-box `V`.
#[derive(Debug, Clone)]
pub struct Approximant {
    sampled: SampledField,
    classification: CubeClassification,
    table: HalfNeighborhoods,
    v_lo: Vec<f64>,
    v_hi: Vec<f64>,
}

impl Approximant {
    pub fn sampled(&self) -> &SampledField {
        &self.sampled
    }

    pub fn classification(&self) -> &CubeClassification {
        &self.classification
    }

    pub fn table(&self) -> &HalfNeighborhoods {
        &self.table
    }

    pub fn region(&self) -> (&[f64], &[f64]) {
        (&self.v_lo, &self.v_hi)
    }

    pub fn in_bad_cube(&self, x: &[f64]) -> bool {
        self.classification.is_bad(&self.sampled.grid().locate(x))
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let inside = x.iter().zip(self.v_lo.iter().zip(&self.v_hi)).all(|(v, (a, b))| v >= a && v <= b);
        if !inside {
            return Err(Error::Uncovered(x.to_vec()));
        }
        if self.in_bad_cube(x) {
            return Ok(vec![0.0; self.sampled.ncomp()]);
        }
        interpolate(&self.sampled, x)
    }

    pub fn strain(&self, k: usize) -> Result<DirectionalStrainField> {
        directional_strain(&self.sampled, k, &self.table)
    }
}

/// Builds `v_k` on `V = [v_lo, v_hi]`, which must sit inside the grid box with
/// margin at least `2 n h`.
pub fn build_approximant(
    v: &dyn VectorField,
    grid: &ShiftedGrid,
    crack: &CrackSurface,
    v_lo: &[f64],
    v_hi: &[f64],
) -> Result<Approximant> {
    let n = grid.dim();
    if v_lo.len() != n || v_hi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: v_lo.len() });
    }
    let margin = 2.0 * n as f64 * grid.h();
    for d in 0..n {
        if !(v_hi[d] > v_lo[d]) || v_lo[d] - grid.box_lo()[d] < margin || grid.box_hi()[d] - v_hi[d] < margin {
            return Err(Error::param(format!(
                "region V must lie inside the grid box with margin {margin} along axis {d}"
            )));
        }
    }
    let sampled = sample(v, grid)?;
    let table = HalfNeighborhoods::compute(grid, crack)?;
    let classification = classify_with(grid, &table);
    Ok(Approximant { sampled, classification, table, v_lo: v_lo.to_vec(), v_hi: v_hi.to_vec() })
}

fn cube_neighbors(n: usize, z: &[i64]) -> Vec<Vec<i64>> {
    let ranges: Vec<(i64, i64)> = z.iter().map(|&c| (c - 1, c + 1)).collect();
    let mut out = Vec::with_capacity(3usize.pow(n as u32));
    for_each_index(&ranges, |q| out.push(q.to_vec()));
    out
}

/// Largest ratio `|e(w) e . e| / max_nb |E_e|` over the points that fall in
/// good cubes; the denominator runs over the `3^n` cubes around the point.
/// A vanishing numerator gives 0 regardless of the denominator.
pub fn strain_bound_check(approx: &Approximant, ds: &DirectionalStrainField, points: &[Vec<f64>]) -> Result<f64> {
    let s = approx.sampled();
    let n = s.grid().dim();
    let e = ds.direction().as_f64(n);
    let mut worst = 0.0f64;
    for x in points {
        let z = s.grid().locate(x);
        if approx.classification().is_bad(&z) {
            continue;
        }
        let g = interpolate_gradient(s, x)?;
        let num: f64 = (0..n).map(|i| (0..n).map(|j| e[i] * g[i][j] * e[j]).sum::<f64>()).sum::<f64>().abs();
        let scale = num.max(1.0) * 1e-12;
        if num <= scale {
            continue;
        }
        let den = cube_neighbors(n, &z).iter().map(|q| ds.on_cube(q).abs()).fold(0.0, f64::max);
        worst = worst.max(if den <= scale { f64::INFINITY } else { num / den });
    }
    Ok(worst)
}

/// Whether `v_j` is independent of `x_i` on the sampled lattice (within 1e-12).
fn independent_of(s: &SampledField, i: usize, j: usize) -> bool {
    let n = s.grid().dim();
    let ranges: Vec<(i64, i64)> = (0..n).map(|d| (s.zlo[d], s.zlo[d] + s.dims[d] as i64 - 1)).collect();
    let mut ok = true;
    for_each_index(&ranges, |z| {
        if !ok || z[i] == ranges[i].0 {
            return;
        }
        let mut prev = z.to_vec();
        prev[i] -= 1;
        let (a, b) = (s.at(z).unwrap()[j], s.at(&prev).unwrap()[j]);
        if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
            ok = false;
        }
    });
    ok
}

/// Checks that the `j`-th component of the approximant is constant along every
/// axis-`i` fibre of `V` that avoids the shadow of the closed bad set. Returns
/// `None` when `v_j` itself depends on `x_i`, so the check does not apply.
pub fn structure_preservation_check(approx: &Approximant, i: usize, j: usize, fibres_per_axis: usize) -> Option<bool> {
    let s = approx.sampled();
    let g = s.grid();
    let n = g.dim();
    if !independent_of(s, i, j) {
        return None;
    }
    let (lo, hi) = approx.region();
    let h = g.h();
    let bad = approx.classification().bad_cubes();
    let shadowed = |x: &[f64]| {
        bad.iter().any(|z| {
            let c = g.lattice_point(z);
            let meets_v = (0..n).all(|d| c[d] <= hi[d] && c[d] + h >= lo[d]);
            meets_v && (0..n).filter(|&d| d != i).all(|d| x[d] >= c[d] && x[d] <= c[d] + h)
        })
    };
    let others: Vec<usize> = (0..n).filter(|&d| d != i).collect();
    let ranges: Vec<(i64, i64)> = others.iter().map(|_| (0, fibres_per_axis as i64 - 1)).collect();
    let mut ok = true;
    for_each_index(&ranges, |q| {
        if !ok {
            return;
        }
        let mut x = lo.to_vec();
        for (k, &d) in others.iter().enumerate() {
            x[d] = lo[d] + (q[k] as f64 + 0.5) / fibres_per_axis as f64 * (hi[d] - lo[d]);
        }
        if shadowed(&x) {
            return;
        }
        let samples = 4 * ((hi[i] - lo[i]) / h).ceil() as usize + 1;
        let mut first: Option<f64> = None;
        for t in 0..samples {
            x[i] = lo[i] + t as f64 / (samples - 1) as f64 * (hi[i] - lo[i]);
            let val = match approx.eval(&x) {
                Ok(v) => v[j],
                Err(_) => {
                    ok = false;
                    return;
                }
            };
            match first {
                None => first = Some(val),
                Some(f) if (val - f).abs() > 1e-12 * (1.0 + f.abs()) => ok = false,
                _ => {}
            }
        }
    });
    Some(ok)
}

fn midpoint_lattice(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let n = lo.len();
    let ranges: Vec<(i64, i64)> = (0..n).map(|_| (0, per_axis as i64 - 1)).collect();
    let mut out = Vec::new();
    for_each_index(&ranges, |q| {
        out.push((0..n).map(|d| lo[d] + (q[d] as f64 + 0.5) / per_axis as f64 * (hi[d] - lo[d])).collect());
    });
    out
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Fraction of a midpoint lattice of `V` where `|v_k - v| > delta`.
pub fn mismatch_fraction(approx: &Approximant, v: &dyn VectorField, delta: f64, per_axis: usize) -> Result<f64> {
    let (lo, hi) = approx.region();
    let pts = midpoint_lattice(lo, hi, per_axis);
    let bad = pts
        .par_iter()
        .map(|x| Ok(max_abs_diff(&approx.eval(x)?, &v.eval(x)?) > delta))
        .collect::<Result<Vec<bool>>>()?;
    Ok(bad.iter().filter(|&&b| b).count() as f64 / pts.len() as f64)
}

/// Fraction of sample points on the faces of `V` where the approximant differs
/// from `v` by more than `delta`.
pub fn trace_mismatch_fraction(approx: &Approximant, v: &dyn VectorField, delta: f64, per_axis: usize) -> Result<f64> {
    let (lo, hi) = approx.region();
    let n = lo.len();
    let mut pts = Vec::new();
    for d in 0..n {
        for side in [lo[d], hi[d]] {
            for mut x in midpoint_lattice(lo, hi, per_axis) {
                x[d] = side;
                pts.push(x);
            }
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let bad = pts
        .par_iter()
        .map(|x| Ok(max_abs_diff(&approx.eval(x)?, &v.eval(x)?) > delta))
        .collect::<Result<Vec<bool>>>()?;
    Ok(bad.iter().filter(|&&b| b).count() as f64 / pts.len() as f64)
}

/// `H^{n-1}(pi_xi(bad boundary cap V) \ pi_xi(Gamma_v cap V))`.
pub fn bad_set_projection_excess(
    approx: &Approximant,
    crack: &CrackSurface,
    xi: &[f64],
    resolution: f64,
) -> Result<ProjectionEstimate> {
    let (lo, hi) = approx.region();
    let n = lo.len();
    let faces: Vec<_> = bad_boundary_face_pieces(approx.classification())
        .iter()
        .filter_map(|p| p.clip(lo, hi))
        .collect();
    let gamma: Vec<_> = crack_pieces(crack).iter().filter_map(|p| p.clip(lo, hi)).collect();
    projection_difference(n, &faces, &gamma, xi, resolution)
}

/// Weak-convergence probe: `(int_V E_e phi, int_V (e(v) e . e) phi)`, both by
/// a 3-point Gauss rule on each cube clipped to `V`.
pub fn weak_probe(
    approx: &Approximant,
    ds: &DirectionalStrainField,
    v: &dyn VectorField,
    phi: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<(f64, f64)> {
    const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let g = approx.sampled().grid();
    let (lo, hi) = approx.region();
    let n = g.dim();
    let h = g.h();
    let e = ds.direction().as_f64(n);
    let zlo = g.locate(lo);
    let zhi = g.locate(hi);
    let ranges: Vec<(i64, i64)> = (0..n).map(|d| (zlo[d], zhi[d])).collect();
    let mut cubes = Vec::new();
    for_each_index(&ranges, |z| cubes.push(z.to_vec()));
    let parts = cubes
        .par_iter()
        .map(|z| {
            let c = g.lattice_point(z);
            let a: Vec<f64> = (0..n).map(|d| c[d].max(lo[d])).collect();
            let b: Vec<f64> = (0..n).map(|d| (c[d] + h).min(hi[d])).collect();
            if (0..n).any(|d| b[d] <= a[d]) {
                return Ok((0.0, 0.0));
            }
            let ev = ds.on_cube(z);
            let (mut disc, mut cont) = (0.0, 0.0);
            let qr: Vec<(i64, i64)> = (0..n).map(|_| (0, 2)).collect();
            let mut err = None;
            for_each_index(&qr, |q| {
                let mut x = vec![0.0; n];
                let mut w = 1.0;
                for d in 0..n {
                    let half = 0.5 * (b[d] - a[d]);
                    x[d] = a[d] + half * (1.0 + NODES[q[d] as usize]);
                    w *= half * WEIGHTS[q[d] as usize];
                }
                let p = phi(&x);
                disc += w * ev * p;
                match v.strain_along(&x, &e) {
                    Ok(s) => cont += w * s * p,
                    Err(er) => err = Some(er),
                }
            });
            match err {
                Some(er) => Err(er),
                None => Ok((disc, cont)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1)))
}
