//! Tensor-product node grids and nodal displacement fields with breakable faces.
//!
//! A grid node is addressed either by its flat index or by its multi-index.
//! The last axis is the fastest-varying one, so for plate grids the short
//! thickness axis gives a narrow matrix bandwidth.
//!
//! A *face* is the dual face crossing the lattice edge from node `p` to
//! `p + e_axis`; its normal is `e_axis`. Breaking a face removes that edge
//! from every difference quotient.

use crate::error::{Error, Result};

/// Axis-aligned box `lo..hi` split into `cells[d]` equal intervals per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGrid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    cells: Vec<usize>,
    strides: Vec<usize>,
}

impl BoxGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let n = cells.len();
        if n == 0 || lo.len() != n || hi.len() != n {
            return Err(Error::param("grid bounds and cell counts must share one dimension"));
        }
        for d in 0..n {
            if cells[d] == 0 {
                return Err(Error::param(format!("axis {d} has no cells")));
            }
            if !(hi[d] > lo[d]) || !lo[d].is_finite() || !hi[d].is_finite() {
                return Err(Error::param(format!("axis {d} has empty extent {}..{}", lo[d], hi[d])));
            }
        }
        let mut strides = vec![1; n];
        for d in (0..n.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * (cells[d + 1] + 1);
        }
        Ok(Self { lo, hi, cells, strides })
    }

    /// The rescaled plate `omega x (-1/2, 1/2)` with `layers` cells across the thickness.
    pub fn plate(omega_lo: &[f64], omega_hi: &[f64], omega_cells: &[usize], layers: usize) -> Result<Self> {
        Self::plate_with_thickness(omega_lo, omega_hi, omega_cells, layers, 1.0)
    }

    /// The physical plate `omega x (-rho/2, rho/2)`.
    pub fn plate_with_thickness(
        omega_lo: &[f64],
        omega_hi: &[f64],
        omega_cells: &[usize],
        layers: usize,
        thickness: f64,
    ) -> Result<Self> {
        if !(thickness > 0.0) {
            return Err(Error::param("plate thickness must be positive"));
        }
        let mut lo = omega_lo.to_vec();
        let mut hi = omega_hi.to_vec();
        let mut cells = omega_cells.to_vec();
        lo.push(-0.5 * thickness);
        hi.push(0.5 * thickness);
        cells.push(layers);
        Self::new(lo, hi, cells)
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.cells[axis] as f64
    }

    pub fn nodes_along(&self, axis: usize) -> usize {
        self.cells[axis] + 1
    }

    pub fn num_nodes(&self) -> usize {
        self.cells.iter().map(|c| c + 1).product()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.spacing(d)).product()
    }

    /// Measure of a face with normal `e_axis`.
    pub fn face_area(&self, axis: usize) -> f64 {
        (0..self.dim()).filter(|&d| d != axis).map(|d| self.spacing(d)).product()
    }

    /// Measure of the dual face crossing the edge `node -> node + e_axis`:
    /// the product of dual cell lengths along the other axes, halved at the boundary.
    pub fn dual_face_area(&self, axis: usize, node: usize) -> f64 {
        (0..self.dim())
            .filter(|&d| d != axis)
            .map(|d| {
                let h = self.spacing(d);
                if self.on_boundary(node, d) { 0.5 * h } else { h }
            })
            .product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn node_multi(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for d in 0..self.dim() {
            out[d] = index / self.strides[d];
            index %= self.strides[d];
        }
        out
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if i == self.cells[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + i as f64 * self.spacing(axis)
        }
    }

    pub fn node_coord(&self, index: usize) -> Vec<f64> {
        self.node_multi(index)
            .iter()
            .enumerate()
            .map(|(d, &i)| self.coord(d, i))
            .collect()
    }

    pub fn cell_center(&self, cell: &[usize]) -> Vec<f64> {
        cell.iter()
            .enumerate()
            .map(|(d, &i)| self.lo[d] + (i as f64 + 0.5) * self.spacing(d))
            .collect()
    }

    /// Whether `node + e_axis` exists.
    pub fn has_forward(&self, index: usize, axis: usize) -> bool {
        (index / self.strides[axis]) % (self.cells[axis] + 1) < self.cells[axis]
    }

    pub fn axis_index(&self, index: usize, axis: usize) -> usize {
        (index / self.strides[axis]) % (self.cells[axis] + 1)
    }

    pub fn on_boundary(&self, index: usize, axis: usize) -> bool {
        let i = self.axis_index(index, axis);
        i == 0 || i == self.cells[axis]
    }

    /// All cell multi-indices in lexicographic order (last axis fastest).
    pub fn cell_multis(&self) -> Vec<Vec<usize>> {
        let n = self.dim();
        let total = self.num_cells();
        let mut out = Vec::with_capacity(total);
        let mut cur = vec![0usize; n];
        for _ in 0..total {
            out.push(cur.clone());
            for d in (0..n).rev() {
                cur[d] += 1;
                if cur[d] < self.cells[d] {
                    break;
                }
                cur[d] = 0;
            }
        }
        out
    }

    /// Flat node indices of the `2^n` corners of a cell, corner bit `d` set
    /// meaning `+1` along axis `d`.
    pub fn cell_corners(&self, cell: &[usize]) -> Vec<usize> {
        let base = self.node_index(cell);
        (0..1usize << self.dim())
            .map(|mask| {
                (0..self.dim())
                    .filter(|d| mask >> d & 1 == 1)
                    .map(|d| self.strides[d])
                    .sum::<usize>()
                    + base
            })
            .collect()
    }
}

/// Cell-centred gradient `grad[i][j] = d u_i / d x_j`, padded to 3x3.
pub type Gradient = [[f64; 3]; 3];

/// Vector displacement sampled at grid nodes, with a break flag per face.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    grid: BoxGrid,
    ncomp: usize,
    values: Vec<f64>,
    broken: Vec<Vec<bool>>,
}

/// A nodal field on the rescaled plate `omega x (-1/2, 1/2)`.
pub type PlateField = NodalField;

impl NodalField {
    pub fn zeros(grid: BoxGrid) -> Self {
        let ncomp = grid.dim();
        let nn = grid.num_nodes();
        let broken = vec![vec![false; nn]; grid.dim()];
        Self { values: vec![0.0; nn * ncomp], grid, ncomp, broken }
    }

    pub fn from_fn(grid: BoxGrid, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Self {
        let mut out = Self::zeros(grid);
        for node in 0..out.grid.num_nodes() {
            let x = out.grid.node_coord(node);
            let v = f(&x);
            let nc = out.ncomp;
            out.value_mut(node).copy_from_slice(&v[..nc]);
        }
        out
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, node: usize) -> &[f64] {
        &self.values[node * self.ncomp..(node + 1) * self.ncomp]
    }

    pub fn value_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.values[node * self.ncomp..(node + 1) * self.ncomp]
    }

    pub fn is_broken(&self, axis: usize, node: usize) -> bool {
        self.broken[axis][node]
    }

    pub fn set_broken(&mut self, axis: usize, node: usize, broken: bool) {
        debug_assert!(self.grid.has_forward(node, axis));
        self.broken[axis][node] = broken;
    }

    pub fn broken_flags(&self) -> &[Vec<bool>] {
        &self.broken
    }

    pub fn copy_breaks_from(&mut self, other: &NodalField) {
        self.broken = other.broken.clone();
    }

    pub fn clear_breaks(&mut self) {
        for axis in &mut self.broken {
            axis.iter_mut().for_each(|b| *b = false);
        }
    }

    /// Broken faces as `(axis, lower node)` pairs.
    pub fn broken_faces(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (axis, flags) in self.broken.iter().enumerate() {
            for (node, &b) in flags.iter().enumerate() {
                if b {
                    out.push((axis, node));
                }
            }
        }
        out
    }

    /// Midpoint gradient of a cell. Edges crossing a broken face are skipped;
    /// if every edge along some axis is broken the cell carries no bulk
    /// energy and `None` is returned.
    pub fn cell_gradient(&self, cell: &[usize]) -> Option<Gradient> {
        let n = self.grid.dim();
        let corners = self.grid.cell_corners(cell);
        let mut grad = [[0.0; 3]; 3];
        for axis in 0..n {
            let h = self.grid.spacing(axis);
            let mut count = 0usize;
            let mut acc = [0.0; 3];
            for (mask, &lower) in corners.iter().enumerate() {
                if mask >> axis & 1 == 1 || self.broken[axis][lower] {
                    continue;
                }
                let upper = corners[mask | 1 << axis];
                for c in 0..self.ncomp {
                    acc[c] += (self.value(upper)[c] - self.value(lower)[c]) / h;
                }
                count += 1;
            }
            if count == 0 {
                return None;
            }
            for c in 0..self.ncomp {
                grad[c][axis] = acc[c] / count as f64;
            }
        }
        Some(grad)
    }

    /// `a * self + b * other`, keeping the break pattern of `self`.
    pub fn combine(&self, a: f64, other: &NodalField, b: f64) -> Result<NodalField> {
        if self.grid != other.grid || self.ncomp != other.ncomp {
            return Err(Error::DimensionMismatch { expected: self.values.len(), found: other.values.len() });
        }
        let mut out = self.clone();
        for (o, (x, y)) in out.values.iter_mut().zip(self.values.iter().zip(&other.values)) {
            *o = a * x + b * y;
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &NodalField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Symmetric part of a gradient.
pub fn sym_part(grad: &Gradient, n: usize) -> [[f64; 3]; 3] {
    let mut e = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            e[i][j] = 0.5 * (grad[i][j] + grad[j][i]);
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(nx: usize, ny: usize) -> BoxGrid {
        BoxGrid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![nx, ny]).unwrap()
    }

    #[test]
    fn index_roundtrip() {
        let g = BoxGrid::new(vec![0.0; 3], vec![1.0, 2.0, 3.0], vec![3, 4, 5]).unwrap();
        for idx in 0..g.num_nodes() {
            assert_eq!(g.node_index(&g.node_multi(idx)), idx);
        }
        assert_eq!(g.num_nodes(), 4 * 5 * 6);
        assert_eq!(g.stride(2), 1);
        assert_eq!(g.stride(0), 30);
    }

    #[test]
    fn affine_gradient_is_exact() {
        let g = unit_square(4, 3);
        let f = NodalField::from_fn(g, |x| vec![2.0 * x[0] + 3.0 * x[1], -x[0] + 0.5 * x[1]]);
        let grad = f.cell_gradient(&[1, 2]).unwrap();
        assert!((grad[0][0] - 2.0).abs() < 1e-12);
        assert!((grad[0][1] - 3.0).abs() < 1e-12);
        assert!((grad[1][0] + 1.0).abs() < 1e-12);
        assert!((grad[1][1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn broken_column_drops_cell() {
        let g = unit_square(4, 2);
        let mut f = NodalField::from_fn(g.clone(), |x| vec![x[0], 0.0]);
        for j in 0..=2 {
            f.set_broken(0, g.node_index(&[1, j]), true);
        }
        assert!(f.cell_gradient(&[1, 0]).is_none());
        assert!(f.cell_gradient(&[1, 1]).is_none());
        assert!(f.cell_gradient(&[0, 0]).is_some());
    }

    #[test]
    fn one_sided_difference_next_to_single_break() {
        let g = unit_square(2, 2);
        let mut f = NodalField::from_fn(g.clone(), |x| vec![x[0] * x[1], 0.0]);
        f.set_broken(0, g.node_index(&[0, 0]), true);
        let grad = f.cell_gradient(&[0, 0]).unwrap();
        // only the top edge (x1 = 0.5) survives: d/dx0 (x0 x1) = 0.5
        assert!((grad[0][0] - 0.5).abs() < 1e-12);
    }
}
