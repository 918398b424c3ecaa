//! Alternating minimization of the penalized rescaled and limit energies.
//!
//! Crack candidates are straight walls: every mid-surface edge crossing the
//! hyperplane `x_axis = const` between two node layers, extended across the
//! whole thickness. A lateral side may also be released, in which case the
//! Dirichlet constraint on it is dropped and its trace mismatch is paid for by
//! the penalty term.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::elasticity::LameParams;
use crate::energy::{
    limit_energy, penalized_limit, penalized_rescaled, rescaled_energy, BoundaryDatum, EnergyBreakdown,
    LayerQuadrature,
};
use crate::error::{Error, Result};
use crate::kirchhoff_love::{omega_of, plate_node, KLState};
use crate::mesh::{BoxGrid, NodalField, PlateField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolver {
    /// Sparse Cholesky with a few steps of iterative refinement.
    Cholesky,
    /// Conjugate gradients with Jacobi preconditioning.
    Pcg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationRule {
    /// Activate the candidate whose global re-solve lowers the total energy most.
    CellEnergyRelease,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub altmin_max_rounds: usize,
    pub activation_rule: ActivationRule,
    pub seed: u64,
    pub solver: LinearSolver,
    /// Largest number of walls tried by the exhaustive sweep; 0 disables it.
    pub exhaustive_max_cracks: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cg_tol: 1e-10,
            cg_max_iter: 20_000,
            altmin_max_rounds: 20,
            activation_rule: ActivationRule::CellEnergyRelease,
            seed: 0,
            solver: LinearSolver::Cholesky,
            exhaustive_max_cracks: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(Error::param(format!("cg_tol must lie in (0, 1), got {}", self.cg_tol)));
        }
        if self.cg_max_iter == 0 || self.altmin_max_rounds == 0 {
            return Err(Error::param("iteration caps must be positive"));
        }
        Ok(())
    }
}

/// One crack candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Candidate {
    /// All mid-surface edges from node layer `index` to `index + 1` along `axis`.
    Wall { axis: usize, index: usize },
    /// The lateral side `x_axis = lo` (or `hi` when `upper`).
    Side { axis: usize, upper: bool },
}

/// Cut mid-surface edges plus released lateral sides.
#[derive(Debug, Clone, PartialEq)]
pub struct CrackIndicator {
    omega: BoxGrid,
    cuts: Vec<Vec<bool>>,
    released: Vec<bool>,
}

impl CrackIndicator {
    pub fn new(omega: BoxGrid) -> Self {
        let m = omega.dim();
        let nn = omega.num_nodes();
        Self { cuts: vec![vec![false; nn]; m], released: vec![false; 2 * m], omega }
    }

    pub fn omega(&self) -> &BoxGrid {
        &self.omega
    }

    pub fn is_cut(&self, axis: usize, node: usize) -> bool {
        self.cuts[axis][node]
    }

    pub fn cut_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (axis, flags) in self.cuts.iter().enumerate() {
            out.extend(flags.iter().enumerate().filter(|(_, &c)| c).map(|(w, _)| (axis, w)));
        }
        out
    }

    pub fn is_released(&self, axis: usize, upper: bool) -> bool {
        self.released[2 * axis + upper as usize]
    }

    /// Walls first (by axis, then position), then sides.
    pub fn candidates(&self) -> Vec<Candidate> {
        let m = self.omega.dim();
        let mut out = Vec::new();
        for axis in 0..m {
            out.extend((0..self.omega.cells()[axis]).map(|index| Candidate::Wall { axis, index }));
        }
        for axis in 0..m {
            out.push(Candidate::Side { axis, upper: false });
            out.push(Candidate::Side { axis, upper: true });
        }
        out
    }

    fn wall_edges(&self, axis: usize, index: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.omega.num_nodes()).filter(move |&w| self.omega.axis_index(w, axis) == index)
    }

    pub fn contains(&self, c: Candidate) -> bool {
        match c {
            Candidate::Wall { axis, index } => self.wall_edges(axis, index).all(|w| self.cuts[axis][w]),
            Candidate::Side { axis, upper } => self.is_released(axis, upper),
        }
    }

    pub fn with(&self, c: Candidate) -> Self {
        let mut out = self.clone();
        match c {
            Candidate::Wall { axis, index } => {
                let edges: Vec<usize> = self.wall_edges(axis, index).collect();
                for w in edges {
                    out.cuts[axis][w] = true;
                }
            }
            Candidate::Side { axis, upper } => out.released[2 * axis + upper as usize] = true,
        }
        out
    }

    /// Number of walls fully cut.
    pub fn wall_count(&self) -> usize {
        self.candidates()
            .into_iter()
            .filter(|c| matches!(c, Candidate::Wall { .. }) && self.contains(*c))
            .count()
    }

    /// Whether `w` lies within `depth` node layers of a side that is not released.
    fn on_clamped_side(&self, w: usize, depth: usize) -> bool {
        let om = &self.omega;
        (0..om.dim()).any(|a| {
            let i = om.axis_index(w, a);
            (i < depth && !self.is_released(a, false)) || (i + depth > om.cells()[a] && !self.is_released(a, true))
        })
    }
}

/// The energy being minimized.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// `E_rho^g` on a unit-thickness plate grid.
    Rescaled { grid: BoxGrid, rho: f64 },
    /// `E_0^g` on the mid-surface grid of the datum.
    Limit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Minimizer {
    Plate(PlateField),
    Reduced(KLState),
}

impl Minimizer {
    pub fn as_plate(&self) -> Option<&PlateField> {
        match self {
            Minimizer::Plate(v) => Some(v),
            Minimizer::Reduced(_) => None,
        }
    }

    pub fn as_reduced(&self) -> Option<&KLState> {
        match self {
            Minimizer::Reduced(s) => Some(s),
            Minimizer::Plate(_) => None,
        }
    }
}

/// An elastic solution at fixed cracks.
#[derive(Debug, Clone)]
pub struct Solved {
    pub field: Minimizer,
    pub energy: EnergyBreakdown,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub field: Minimizer,
    pub breaks: CrackIndicator,
    pub energy: EnergyBreakdown,
    /// Total energy after every round, starting with the uncracked solve.
    pub trace: Vec<f64>,
    pub rounds: usize,
    pub hit_round_cap: bool,
}

// ---------------------------------------------------------------------------
// assembly

#[derive(Debug, Clone, Copy)]
enum Slot {
    Free(usize),
    Fixed(f64),
}

/// Affine form `sum coef * x[idx] + c0` over the free unknowns.
#[derive(Debug, Clone, Default)]
struct Row {
    terms: Vec<(usize, f64)>,
    c0: f64,
}

impl Row {
    fn constant(c0: f64) -> Self {
        Self { terms: Vec::new(), c0 }
    }

    fn of_slot(s: Slot) -> Self {
        match s {
            Slot::Free(i) => Self { terms: vec![(i, 1.0)], c0: 0.0 },
            Slot::Fixed(v) => Self::constant(v),
        }
    }

    fn axpy(&mut self, a: f64, other: &Row) {
        self.terms.extend(other.terms.iter().map(|&(i, c)| (i, a * c)));
        self.c0 += a * other.c0;
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.c0 + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }
}

/// `rows[c][d]`: averaged difference quotient of component `c` along axis `d`
/// over the unbroken edges of a cell; `None` if some axis has none left.
fn gradient_rows(
    grid: &BoxGrid,
    cell: &[usize],
    ncomp: usize,
    broken: impl Fn(usize, usize) -> bool,
    value: impl Fn(usize, usize) -> Row,
) -> Option<Vec<Vec<Row>>> {
    let n = grid.dim();
    let corners = grid.cell_corners(cell);
    let mut rows = vec![vec![Row::default(); n]; ncomp];
    for axis in 0..n {
        let h = grid.spacing(axis);
        let edges: Vec<(usize, usize)> = corners
            .iter()
            .enumerate()
            .filter(|&(mask, &lo)| mask >> axis & 1 == 0 && !broken(axis, lo))
            .map(|(mask, &lo)| (lo, corners[mask | 1 << axis]))
            .collect();
        if edges.is_empty() {
            return None;
        }
        let w = 1.0 / (h * edges.len() as f64);
        for (c, row) in rows.iter_mut().enumerate() {
            for &(lo, hi) in &edges {
                row[axis].axpy(w, &value(hi, c));
                row[axis].axpy(-w, &value(lo, c));
            }
        }
    }
    Some(rows)
}

/// Symmetric-gradient rows: diagonal entries first, then `i < j`.
fn strain_rows(grad: &[Vec<Row>], dim: usize, scale: impl Fn(usize, usize) -> f64) -> Vec<Row> {
    let mut out = Vec::with_capacity(dim * (dim + 1) / 2);
    for i in 0..dim {
        let mut r = Row::default();
        r.axpy(scale(i, i), &grad[i][i]);
        out.push(r);
    }
    for i in 0..dim {
        for j in i + 1..dim {
            let mut r = Row::default();
            r.axpy(0.5 * scale(i, j), &grad[i][j]);
            r.axpy(0.5 * scale(i, j), &grad[j][i]);
            out.push(r);
        }
    }
    out
}

/// Density `1/2 s^T W s` equal to `1/2 (lambda (tr e)^2 + 2 mu |e|^2)` in the ordering of [`strain_rows`].
fn isotropic_weight(dim: usize, lambda: f64, mu: f64) -> Vec<Vec<f64>> {
    let r = dim * (dim + 1) / 2;
    let mut w = vec![vec![0.0; r]; r];
    for i in 0..dim {
        for j in 0..dim {
            w[i][j] = lambda + if i == j { 2.0 * mu } else { 0.0 };
        }
    }
    for k in dim..r {
        w[k][k] = 4.0 * mu;
    }
    w
}

fn block_diag(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (ra, rb) = (a.len(), b.len());
    let mut w = vec![vec![0.0; ra + rb]; ra + rb];
    for i in 0..ra {
        w[i][..ra].copy_from_slice(&a[i]);
    }
    for i in 0..rb {
        w[ra + i][ra..].copy_from_slice(&b[i]);
    }
    w
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Quadratic `1/2 x^T K x - f^T x + const` over the free unknowns.
struct System {
    slots: Vec<Slot>,
    nfree: usize,
    k: CscMatrix<f64>,
    f: DVector<f64>,
}

/// Builds `K` and `f` from per-cell strain rows, all weighted by `vol`.
fn assemble(nfree: usize, cells: &[Vec<Row>], weight: &[Vec<f64>], vol: f64) -> (CscMatrix<f64>, DVector<f64>) {
    let parts: Vec<(Vec<(usize, usize, f64)>, Vec<(usize, f64)>)> = cells
        .par_iter()
        .map(|rows| {
            let mut trip = Vec::new();
            let mut rhs = Vec::new();
            for (a, ra) in rows.iter().enumerate() {
                for (b, rb) in rows.iter().enumerate() {
                    let w = weight[a][b] * vol;
                    if w == 0.0 {
                        continue;
                    }
                    for &(i, ci) in &ra.terms {
                        for &(j, cj) in &rb.terms {
                            trip.push((i, j, w * ci * cj));
                        }
                        if rb.c0 != 0.0 {
                            rhs.push((i, -w * ci * rb.c0));
                        }
                    }
                }
            }
            (trip, rhs)
        })
        .collect();
    let mut diag = vec![0.0; nfree];
    let mut coo = CooMatrix::new(nfree, nfree);
    let mut f = DVector::zeros(nfree);
    for (trip, rhs) in &parts {
        for &(i, j, v) in trip {
            if i == j {
                diag[i] += v;
            }
            coo.push(i, j, v);
        }
        for &(i, v) in rhs {
            f[i] += v;
        }
    }
    // unknowns the energy never sees are pinned to zero
    for (i, d) in diag.iter().enumerate() {
        if *d == 0.0 {
            coo.push(i, i, 1.0);
            f[i] = 0.0;
        }
    }
    (CscMatrix::from(&coo), f)
}

fn number_free(slots: &mut [Slot]) -> usize {
    let mut nfree = 0;
    for s in slots.iter_mut() {
        if let Slot::Free(i) = s {
            *i = nfree;
            nfree += 1;
        }
    }
    nfree
}

/// Plate unknowns: `node * n + component`.
fn plate_system(grid: &BoxGrid, breaks: &CrackIndicator, g: &BoundaryDatum, p: &LameParams, rho: f64) -> Result<(System, PlateField)> {
    let n = grid.dim();
    let m = n - 1;
    if p.n != n {
        return Err(Error::DimensionMismatch { expected: p.n, found: n });
    }
    if omega_of(grid)? != *breaks.omega() {
        return Err(Error::param("crack indicator and plate grid disagree on the mid-surface"));
    }
    if !(rho > 0.0) {
        return Err(Error::param("rho must be positive"));
    }
    let layers = grid.cells()[m];
    let mut field = g.lift(grid)?;
    for (axis, w) in breaks.cut_edges() {
        for k in 0..=layers {
            field.set_broken(axis, plate_node(layers, w, k), true);
        }
    }
    let nn = grid.num_nodes();
    let clamped: Vec<bool> = (0..nn).map(|node| breaks.on_clamped_side(node / (layers + 1), 1)).collect();

    let cells = grid.cell_multis();
    let active: Vec<bool> = cells
        .iter()
        .map(|c| gradient_rows(grid, c, 0, |a, lo| field.is_broken(a, lo), |_, _| Row::default()).is_some())
        .collect();
    let mut dsu = Dsu::new(nn);
    for (c, _) in cells.iter().zip(&active).filter(|(_, &a)| a) {
        let corners = grid.cell_corners(c);
        for (mask, &lo) in corners.iter().enumerate() {
            for axis in 0..n {
                if mask >> axis & 1 == 0 && !field.is_broken(axis, lo) {
                    dsu.union(lo, corners[mask | 1 << axis]);
                }
            }
        }
    }
    let mut anchored = vec![false; nn];
    for node in 0..nn {
        if clamped[node] {
            let r = dsu.find(node);
            anchored[r] = true;
        }
    }
    let mut slots = vec![Slot::Free(0); nn * n];
    for node in 0..nn {
        let floating = !anchored[dsu.find(node)];
        for c in 0..n {
            if clamped[node] {
                slots[node * n + c] = Slot::Fixed(field.value(node)[c]);
            } else if floating {
                slots[node * n + c] = Slot::Fixed(0.0);
            }
        }
    }
    let nfree = number_free(&mut slots);

    let scale = |i: usize, j: usize| -> f64 {
        match (i == m) as u8 + (j == m) as u8 {
            0 => 1.0,
            1 => 1.0 / rho,
            _ => 1.0 / (rho * rho),
        }
    };
    let rows: Vec<Vec<Row>> = cells
        .par_iter()
        .zip(active.par_iter())
        .filter(|(_, &a)| a)
        .map(|(c, _)| {
            let grad = gradient_rows(grid, c, n, |a, lo| field.is_broken(a, lo), |node, comp| Row::of_slot(slots[node * n + comp]))
                .expect("active cell");
            strain_rows(&grad, n, scale)
        })
        .collect();
    let weight = isotropic_weight(n, p.lambda, p.mu);
    let (k, f) = assemble(nfree, &rows, &weight, grid.cell_volume());
    Ok((System { slots, nfree, k, f }, field))
}

fn plate_field(sys: &System, template: &PlateField, x: &[f64]) -> PlateField {
    let mut v = template.clone();
    for (dst, s) in v.values_mut().iter_mut().zip(&sys.slots) {
        *dst = match *s {
            Slot::Free(i) => x[i],
            Slot::Fixed(val) => val,
        };
    }
    v
}

/// Reduced unknowns: `node * (m + 1) + c`, with `c < m` for `ubar` and `c = m` for `u_n`.
/// The deflection gradient is derived from `u_n` by central differences
/// (one-sided next to cuts) except on clamped boundary nodes, where it is the datum's.
struct ReducedSystem {
    sys: System,
    grad_rows: Vec<Row>,
}

fn reduced_system(breaks: &CrackIndicator, g: &BoundaryDatum, p: &LameParams) -> Result<ReducedSystem> {
    let om = breaks.omega();
    let d = g.state();
    if om != d.omega() {
        return Err(Error::param("crack indicator and datum live on different grids"));
    }
    let m = om.dim();
    if p.n != m + 1 {
        return Err(Error::DimensionMismatch { expected: p.n, found: m + 1 });
    }
    let nc = m + 1;
    let nn = om.num_nodes();
    let clamp1: Vec<bool> = (0..nn).map(|w| breaks.on_clamped_side(w, 1)).collect();
    let clamp2: Vec<bool> = (0..nn).map(|w| breaks.on_clamped_side(w, 2)).collect();

    let cells = om.cell_multis();
    let cut = |a: usize, w: usize| breaks.is_cut(a, w);
    let active: Vec<bool> = cells
        .iter()
        .map(|c| gradient_rows(om, c, 0, cut, |_, _| Row::default()).is_some())
        .collect();
    let mut dsu = Dsu::new(nn);
    for (c, _) in cells.iter().zip(&active).filter(|(_, &a)| a) {
        let corners = om.cell_corners(c);
        for (mask, &lo) in corners.iter().enumerate() {
            for axis in 0..m {
                if mask >> axis & 1 == 0 && !cut(axis, lo) {
                    dsu.union(lo, corners[mask | 1 << axis]);
                }
            }
        }
    }
    let mut anchored = vec![false; nn];
    for w in 0..nn {
        if clamp1[w] {
            let r = dsu.find(w);
            anchored[r] = true;
        }
    }
    let mut slots = vec![Slot::Free(0); nn * nc];
    for w in 0..nn {
        let floating = !anchored[dsu.find(w)];
        for a in 0..m {
            if clamp1[w] {
                slots[w * nc + a] = Slot::Fixed(d.ubar(w)[a]);
            } else if floating {
                slots[w * nc + a] = Slot::Fixed(0.0);
            }
        }
        if clamp2[w] && !floating {
            slots[w * nc + m] = Slot::Fixed(d.un(w));
        } else if floating {
            slots[w * nc + m] = Slot::Fixed(0.0);
        }
    }
    let nfree = number_free(&mut slots);

    let mut grad_rows = vec![Row::default(); nn * m];
    for w in 0..nn {
        for a in 0..m {
            let row = &mut grad_rows[w * m + a];
            if clamp1[w] {
                *row = Row::constant(d.grad_un(w)[a]);
                continue;
            }
            let s = om.stride(a);
            let h = om.spacing(a);
            let fwd = om.has_forward(w, a) && !cut(a, w);
            let bwd = om.axis_index(w, a) > 0 && !cut(a, w - s);
            let un = |node: usize| Row::of_slot(slots[node * nc + m]);
            match (fwd, bwd) {
                (true, true) => {
                    row.axpy(0.5 / h, &un(w + s));
                    row.axpy(-0.5 / h, &un(w - s));
                }
                (true, false) => {
                    row.axpy(1.0 / h, &un(w + s));
                    row.axpy(-1.0 / h, &un(w));
                }
                (false, true) => {
                    row.axpy(1.0 / h, &un(w));
                    row.axpy(-1.0 / h, &un(w - s));
                }
                (false, false) => {}
            }
        }
    }

    let rows: Vec<Vec<Row>> = cells
        .par_iter()
        .zip(active.par_iter())
        .filter(|(_, &a)| a)
        .map(|(c, _)| {
            let ub = gradient_rows(om, c, m, cut, |w, comp| Row::of_slot(slots[w * nc + comp])).expect("active cell");
            let gr = gradient_rows(om, c, m, cut, |w, comp| grad_rows[w * m + comp].clone()).expect("active cell");
            let mut r = strain_rows(&ub, m, |_, _| 1.0);
            r.extend(strain_rows(&gr, m, |_, _| 1.0));
            r
        })
        .collect();
    let lambda0 = 2.0 * p.lambda * p.mu / (p.lambda + 2.0 * p.mu);
    let c0 = isotropic_weight(m, lambda0, p.mu);
    let bend: Vec<Vec<f64>> = c0.iter().map(|r| r.iter().map(|v| v / 12.0).collect()).collect();
    let weight = block_diag(&c0, &bend);
    let (k, f) = assemble(nfree, &rows, &weight, om.cell_volume());
    Ok(ReducedSystem { sys: System { slots, nfree, k, f }, grad_rows })
}

fn reduced_state(rs: &ReducedSystem, breaks: &CrackIndicator, x: &[f64]) -> Result<KLState> {
    let om = breaks.omega();
    let m = om.dim();
    let nc = m + 1;
    let val = |s: Slot| match s {
        Slot::Free(i) => x[i],
        Slot::Fixed(v) => v,
    };
    let mut s = KLState::zeros(om.clone());
    for w in 0..om.num_nodes() {
        for a in 0..m {
            s.ubar_mut(w)[a] = val(rs.sys.slots[w * nc + a]);
            s.grad_un_mut(w)[a] = rs.grad_rows[w * m + a].eval(x);
        }
        s.set_un(w, val(rs.sys.slots[w * nc + m]));
    }
    for (axis, w) in breaks.cut_edges() {
        s.set_cut(axis, w, true)?;
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// linear solvers

fn matvec(k: &CscMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(k.nrows());
    for (j, col) in k.col_iter().enumerate() {
        let xj = x[j];
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            y[i] += v * xj;
        }
    }
    y
}

/// Solves `K x = f`; returns `(x, relative residual, iterations)`.
fn solve_spd(k: &CscMatrix<f64>, f: &DVector<f64>, cfg: &SolverConfig) -> Result<(DVector<f64>, f64, usize)> {
    let n = f.len();
    let fnorm = f.norm();
    if n == 0 || fnorm == 0.0 {
        return Ok((DVector::zeros(n), 0.0, 0));
    }
    match cfg.solver {
        LinearSolver::Cholesky => {
            let chol = CscCholesky::factor(k).map_err(|e| Error::Singular(format!("{e:?}")))?;
            let solve = |b: &DVector<f64>| -> DVector<f64> {
                chol.solve(&DMatrix::from_column_slice(n, 1, b.as_slice())).column(0).into_owned()
            };
            let mut x = solve(f);
            let mut res = (f - matvec(k, &x)).norm() / fnorm;
            let mut steps = 1;
            while res > cfg.cg_tol && steps < 4 {
                let r = f - matvec(k, &x);
                x += solve(&r);
                res = (f - matvec(k, &x)).norm() / fnorm;
                steps += 1;
            }
            if res > cfg.cg_tol {
                return Err(Error::NoConvergence { residual: res, iterations: steps });
            }
            Ok((x, res, steps))
        }
        LinearSolver::Pcg => {
            let mut diag = DVector::<f64>::zeros(n);
            for (j, col) in k.col_iter().enumerate() {
                for (&i, &v) in col.row_indices().iter().zip(col.values()) {
                    if i == j {
                        diag[i] += v;
                    }
                }
            }
            let inv: DVector<f64> = diag.map(|d| if d > 0.0 { 1.0 / d } else { 1.0 });
            let mut x = DVector::<f64>::zeros(n);
            let mut r = f.clone();
            let mut z = r.component_mul(&inv);
            let mut dir = z.clone();
            let mut rz = r.dot(&z);
            for it in 1..=cfg.cg_max_iter {
                let kd = matvec(k, &dir);
                let alpha = rz / dir.dot(&kd);
                x.axpy(alpha, &dir, 1.0);
                r.axpy(-alpha, &kd, 1.0);
                let res = r.norm() / fnorm;
                if res <= cfg.cg_tol {
                    return Ok((x, res, it));
                }
                z = r.component_mul(&inv);
                let rz_new = r.dot(&z);
                dir = &z + &dir * (rz_new / rz);
                rz = rz_new;
            }
            Err(Error::NoConvergence { residual: r.norm() / fnorm, iterations: cfg.cg_max_iter })
        }
    }
}

// ---------------------------------------------------------------------------
// solves

/// Minimizes the rescaled bulk energy at fixed cracks with `v = lift(g)` on
/// every lateral side that is not released.
pub fn elastic_solve(
    grid: &BoxGrid,
    breaks: &CrackIndicator,
    g: &BoundaryDatum,
    p: &LameParams,
    rho: f64,
    cfg: &SolverConfig,
) -> Result<Solved> {
    let (sys, template) = plate_system(grid, breaks, g, p, rho)?;
    let (x, residual, iterations) = solve_spd(&sys.k, &sys.f, cfg)?;
    let v = plate_field(&sys, &template, x.as_slice());
    let energy = penalized_rescaled(&v, p, rho, g)?;
    Ok(Solved { field: Minimizer::Plate(v), energy, residual, iterations })
}

/// Minimizes the membrane plus bending energy of the reduced model at fixed cuts.
pub fn reduced_solve(breaks: &CrackIndicator, g: &BoundaryDatum, p: &LameParams, cfg: &SolverConfig) -> Result<Solved> {
    let rs = reduced_system(breaks, g, p)?;
    let (x, residual, iterations) = solve_spd(&rs.sys.k, &rs.sys.f, cfg)?;
    let s = reduced_state(&rs, breaks, x.as_slice())?;
    let energy = penalized_limit(&s, p, g, LayerQuadrature::Exact)?;
    Ok(Solved { field: Minimizer::Reduced(s), energy, residual, iterations })
}

pub fn solve_model(model: &Model, breaks: &CrackIndicator, g: &BoundaryDatum, p: &LameParams, cfg: &SolverConfig) -> Result<Solved> {
    match model {
        Model::Rescaled { grid, rho } => elastic_solve(grid, breaks, g, p, *rho, cfg),
        Model::Limit => reduced_solve(breaks, g, p, cfg),
    }
}

fn tie_tol(e: f64) -> f64 {
    1e-9 * e.abs().max(1.0)
}

/// Index of the lowest total, preferring the earliest entry among near-ties.
fn best_index(totals: &[f64]) -> Option<usize> {
    let min = totals.iter().copied().fold(f64::INFINITY, f64::min);
    totals.iter().position(|&t| t <= min + tie_tol(min))
}

/// Tries every inactive candidate with a global re-solve and activates the one
/// that lowers the total energy most, if any lowers it by more than
/// `cg_tol * total`.
pub fn activation_step(
    model: &Model,
    breaks: &CrackIndicator,
    current: &Solved,
    g: &BoundaryDatum,
    p: &LameParams,
    cfg: &SolverConfig,
) -> Result<Option<(CrackIndicator, Solved)>> {
    let ActivationRule::CellEnergyRelease = cfg.activation_rule;
    let cands: Vec<CrackIndicator> = breaks
        .candidates()
        .into_iter()
        .filter(|c| !breaks.contains(*c))
        .map(|c| breaks.with(c))
        .collect();
    let solved: Vec<Solved> = cands
        .par_iter()
        .map(|b| solve_model(model, b, g, p, cfg))
        .collect::<Result<_>>()?;
    let totals: Vec<f64> = solved.iter().map(|s| s.energy.total).collect();
    let Some(i) = best_index(&totals) else { return Ok(None) };
    let cur = current.energy.total;
    if totals[i] < cur - cfg.cg_tol * cur.abs().max(f64::MIN_POSITIVE) {
        let mut solved = solved;
        let mut cands = cands;
        Ok(Some((cands.swap_remove(i), solved.swap_remove(i))))
    } else {
        Ok(None)
    }
}

/// Alternates elastic solves and single-candidate activations until no
/// candidate lowers the energy. The energy trace is nonincreasing by construction.
pub fn alternate_minimize(model: &Model, g: &BoundaryDatum, p: &LameParams, cfg: &SolverConfig) -> Result<Outcome> {
    cfg.validate()?;
    let mut breaks = CrackIndicator::new(g.state().omega().clone());
    let mut cur = solve_model(model, &breaks, g, p, cfg)?;
    let mut trace = vec![cur.energy.total];
    let mut rounds = 0;
    let mut hit_round_cap = false;
    loop {
        if rounds == cfg.altmin_max_rounds {
            hit_round_cap = true;
            break;
        }
        rounds += 1;
        match activation_step(model, &breaks, &cur, g, p, cfg)? {
            Some((b, s)) => {
                breaks = b;
                cur = s;
                trace.push(cur.energy.total);
            }
            None => break,
        }
    }
    Ok(Outcome { field: cur.field, breaks, energy: cur.energy, trace, rounds, hit_round_cap })
}

/// Global minimum over all configurations with at most `max_cracks` walls and
/// any single released side (or none).
pub fn exhaustive_walls(model: &Model, g: &BoundaryDatum, p: &LameParams, cfg: &SolverConfig, max_cracks: usize) -> Result<Outcome> {
    cfg.validate()?;
    let base = CrackIndicator::new(g.state().omega().clone());
    let all = base.candidates();
    let walls: Vec<Candidate> = all.iter().copied().filter(|c| matches!(c, Candidate::Wall { .. })).collect();
    let sides: Vec<Candidate> = all.iter().copied().filter(|c| matches!(c, Candidate::Side { .. })).collect();
    let mut configs = vec![base.clone()];
    let mut frontier = vec![(base.clone(), 0usize)];
    for _ in 0..max_cracks {
        let mut next = Vec::new();
        for (b, start) in &frontier {
            for (i, &c) in walls.iter().enumerate().skip(*start) {
                let nb = b.with(c);
                configs.push(nb.clone());
                next.push((nb, i + 1));
            }
        }
        frontier = next;
    }
    configs.extend(sides.iter().map(|&c| base.with(c)));
    let solved: Vec<Solved> = configs
        .par_iter()
        .map(|b| solve_model(model, b, g, p, cfg))
        .collect::<Result<_>>()?;
    let totals: Vec<f64> = solved.iter().map(|s| s.energy.total).collect();
    let i = best_index(&totals).ok_or_else(|| Error::param("no configuration to evaluate"))?;
    let mut solved = solved;
    let s = solved.swap_remove(i);
    Ok(Outcome {
        field: s.field,
        breaks: configs.swap_remove(i),
        energy: s.energy,
        trace: vec![s.energy.total],
        rounds: 1,
        hit_round_cap: false,
    })
}

/// Alternation, then the exhaustive sweep when enabled; the lower total wins.
pub fn minimize(model: &Model, g: &BoundaryDatum, p: &LameParams, cfg: &SolverConfig) -> Result<Outcome> {
    let alt = alternate_minimize(model, g, p, cfg)?;
    if cfg.exhaustive_max_cracks == 0 {
        return Ok(alt);
    }
    let ex = exhaustive_walls(model, g, p, cfg, cfg.exhaustive_max_cracks)?;
    if ex.energy.total < alt.energy.total - tie_tol(alt.energy.total) {
        let mut trace = alt.trace;
        trace.push(ex.energy.total);
        Ok(Outcome { trace, rounds: alt.rounds, hit_round_cap: alt.hit_round_cap, ..ex })
    } else {
        Ok(alt)
    }
}

/// Minimum of `E_0^g` with its minimizer.
pub fn minimize_limit(g: &BoundaryDatum, p: &LameParams, cfg: &SolverConfig) -> Result<(KLState, EnergyBreakdown)> {
    let out = minimize(&Model::Limit, g, p, cfg)?;
    match out.field {
        Minimizer::Reduced(s) => Ok((s, out.energy)),
        Minimizer::Plate(_) => unreachable!("limit model yields a reduced state"),
    }
}

/// Largest normalized directional derivative of the bulk energy at the
/// solution of `breaks`, over `count` random perturbations of the free
/// unknowns. The derivative is taken by symmetric differences of the energy
/// functional and divided by its Cauchy-Schwarz bound `2 sqrt(E(u) q(d))`.
pub fn stationarity_residual(
    model: &Model,
    breaks: &CrackIndicator,
    g: &BoundaryDatum,
    p: &LameParams,
    cfg: &SolverConfig,
    count: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nfree, x, bulk): (usize, DVector<f64>, Box<dyn Fn(&[f64]) -> Result<f64>>) = match model {
        Model::Rescaled { grid, rho } => {
            let (sys, template) = plate_system(grid, breaks, g, p, *rho)?;
            let (x, _, _) = solve_spd(&sys.k, &sys.f, cfg)?;
            let rho = *rho;
            let nfree = sys.nfree;
            (nfree, x, Box::new(move |y: &[f64]| Ok(rescaled_energy(&plate_field(&sys, &template, y), p, rho)?.bulk)))
        }
        Model::Limit => {
            let rs = reduced_system(breaks, g, p)?;
            let (x, _, _) = solve_spd(&rs.sys.k, &rs.sys.f, cfg)?;
            let nfree = rs.sys.nfree;
            let b = breaks.clone();
            (nfree, x, Box::new(move |y: &[f64]| Ok(limit_energy(&reduced_state(&rs, &b, y)?, p, LayerQuadrature::Exact)?.bulk)))
        }
    };
    if nfree == 0 {
        return Ok(0.0);
    }
    let e0 = bulk(x.as_slice())?;
    let mut worst = 0.0f64;
    for _ in 0..count {
        let mut d = DVector::from_fn(nfree, |_, _| rng.random_range(-1.0..1.0));
        let q1 = 0.5 * (bulk((&x + &d).as_slice())? + bulk((&x - &d).as_slice())?) - e0;
        if q1 > 0.0 && e0 > 0.0 {
            d *= (e0 / q1).sqrt();
        }
        let plus = bulk((&x + &d).as_slice())?;
        let minus = bulk((&x - &d).as_slice())?;
        let deriv = 0.5 * (plus - minus);
        let qd = 0.5 * (plus + minus) - e0;
        let bound = 2.0 * (e0 * qd.max(0.0)).sqrt();
        worst = worst.max(if bound > 0.0 { deriv.abs() / bound } else { deriv.abs() });
    }
    Ok(worst)
}

/// Nodes where `|v|` exceeds `1/rho`: candidates for the escaping set of
/// minimizers that diverge as `rho -> 0`.
pub fn escaping_nodes(v: &NodalField, rho: f64) -> usize {
    let bound = 1.0 / rho;
    (0..v.grid().num_nodes())
        .filter(|&w| v.value(w).iter().map(|c| c * c).sum::<f64>().sqrt() > bound)
        .count()
}

/// Fraction of plate nodes where `|v - lift(s)| > delta`.
pub fn minimizer_distance(v: &PlateField, s: &KLState, delta: f64) -> Result<f64> {
    let mut state = s.clone();
    state.clear_cuts();
    let lift = crate::kirchhoff_love::kl_lift(&state, v.grid())?;
    let nn = v.grid().num_nodes();
    let far = (0..nn)
        .filter(|&w| {
            v.value(w)
                .iter()
                .zip(lift.value(w))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                > delta
        })
        .count();
    Ok(far as f64 / nn as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lame2() -> LameParams {
        LameParams::new(1.0, 1.0, 2).unwrap()
    }

    fn bar_datum(cells: usize, t: f64) -> BoundaryDatum {
        let om = BoxGrid::new(vec![0.0], vec![1.0], vec![cells]).unwrap();
        BoundaryDatum::new(KLState::from_fns(om, |x| vec![t * x[0]], |_| 0.0, |_| vec![0.0]).unwrap()).unwrap()
    }

    fn plate(cells: usize, layers: usize) -> BoxGrid {
        BoxGrid::plate(&[0.0], &[1.0], &[cells], layers).unwrap()
    }

    #[test]
    fn uncracked_stretch_reproduces_affine_datum() {
        let g = bar_datum(8, 0.5);
        let grid = plate(8, 4);
        let b = CrackIndicator::new(g.state().omega().clone());
        let s = elastic_solve(&grid, &b, &g, &lame2(), 1.0, &SolverConfig::default()).unwrap();
        let v = s.field.as_plate().unwrap();
        for k in 0..=4 {
            assert!((v.value(plate_node(4, 8, k))[0] - 0.5).abs() < 1e-12);
            assert!(v.value(plate_node(4, 0, k))[0].abs() < 1e-12);
        }
        assert_eq!(s.energy.boundary_penalty, 0.0);
        assert!(s.residual <= 1e-10);
    }

    #[test]
    fn zero_datum_gives_zero() {
        let g = bar_datum(8, 0.0);
        let grid = plate(8, 4);
        let out = alternate_minimize(&Model::Rescaled { grid, rho: 0.1 }, &g, &lame2(), &SolverConfig::default()).unwrap();
        assert_eq!(out.energy.total, 0.0);
        assert_eq!(out.breaks.cut_edges().len(), 0);
    }

    #[test]
    fn reduced_bar_energies() {
        let cfg = SolverConfig::default();
        let (s, e) = minimize_limit(&bar_datum(32, 0.5), &lame2(), &cfg).unwrap();
        assert!((e.total - 1.0 / 3.0).abs() < 1e-9, "{e:?}");
        assert!(s.cut_edges().is_empty());
        let (_, e) = minimize_limit(&bar_datum(32, 1.2), &lame2(), &cfg).unwrap();
        assert!((e.total - 1.0).abs() < 1e-9, "{e:?}");
    }

    #[test]
    fn cracked_bar_halves_are_strain_free() {
        let g = bar_datum(16, 1.0);
        let b = CrackIndicator::new(g.state().omega().clone()).with(Candidate::Wall { axis: 0, index: 8 });
        let s = reduced_solve(&b, &g, &lame2(), &SolverConfig::default()).unwrap();
        let st = s.field.as_reduced().unwrap();
        assert!(st.ubar(3)[0].abs() < 1e-12);
        assert!((st.ubar(12)[0] - 1.0).abs() < 1e-12);
        assert!(s.energy.bulk < 1e-20);
        assert!((s.energy.surface - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rigid_datum_has_zero_energy() {
        let om = BoxGrid::new(vec![0.0], vec![1.0], vec![16]).unwrap();
        let g = BoundaryDatum::new(KLState::from_fns(om, |_| vec![0.3], |_| -0.2, |_| vec![0.0]).unwrap()).unwrap();
        let (s, e) = minimize_limit(&g, &lame2(), &SolverConfig::default()).unwrap();
        assert!(e.total < 1e-20);
        assert!(s.cut_edges().is_empty());
    }

    #[test]
    fn bending_datum_solution_is_stationary() {
        let om = BoxGrid::new(vec![0.0], vec![1.0], vec![24]).unwrap();
        let g = BoundaryDatum::new(
            KLState::from_fns(om, |x| vec![0.1 * x[0]], |x| 0.5 * x[0] * x[0] * (1.0 - x[0]), |x| vec![x[0] - 1.5 * x[0] * x[0]]).unwrap(),
        )
        .unwrap();
        let b = CrackIndicator::new(g.state().omega().clone());
        let cfg = SolverConfig::default();
        let r = stationarity_residual(&Model::Limit, &b, &g, &lame2(), &cfg, 20, 3).unwrap();
        assert!(r < 1e-6, "{r}");
        let grid = plate(24, 4);
        let r = stationarity_residual(&Model::Rescaled { grid, rho: 0.1 }, &b, &g, &lame2(), &cfg, 20, 4).unwrap();
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn assembled_energy_matches_energy_functional() {
        // the quadratic form and the energy module agree on the solution
        let g = bar_datum(12, 0.7);
        let grid = plate(12, 4);
        let b = CrackIndicator::new(g.state().omega().clone());
        let (sys, template) = plate_system(&grid, &b, &g, &lame2(), 0.3).unwrap();
        let (x, _, _) = solve_spd(&sys.k, &sys.f, &SolverConfig::default()).unwrap();
        let v = plate_field(&sys, &template, x.as_slice());
        let e = rescaled_energy(&v, &lame2(), 0.3).unwrap().bulk;
        let zero = rescaled_energy(&plate_field(&sys, &template, &vec![0.0; sys.nfree]), &lame2(), 0.3).unwrap().bulk;
        let quad = 0.5 * x.dot(&matvec(&sys.k, &x)) - sys.f.dot(&x) + zero;
        assert!((e - quad).abs() < 1e-10 * zero.max(1.0), "{e} vs {quad}");
    }

    #[test]
    fn pcg_agrees_with_cholesky() {
        let g = bar_datum(16, 0.4);
        let b = CrackIndicator::new(g.state().omega().clone());
        let model = Model::Rescaled { grid: plate(16, 4), rho: 0.5 };
        let a = solve_model(&model, &b, &g, &lame2(), &SolverConfig::default()).unwrap();
        let cfg = SolverConfig { solver: LinearSolver::Pcg, ..SolverConfig::default() };
        let c = solve_model(&model, &b, &g, &lame2(), &cfg).unwrap();
        assert!((a.energy.total - c.energy.total).abs() < 1e-8);
        assert!(c.iterations > 1);
    }

    #[test]
    fn activation_is_a_fixed_point_when_everything_is_broken() {
        let g = bar_datum(4, 2.0);
        let mut b = CrackIndicator::new(g.state().omega().clone());
        for c in b.candidates() {
            b = b.with(c);
        }
        let cfg = SolverConfig::default();
        let cur = solve_model(&Model::Limit, &b, &g, &lame2(), &cfg).unwrap();
        assert!(activation_step(&Model::Limit, &b, &cur, &g, &lame2(), &cfg).unwrap().is_none());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig { cg_tol: 0.0, ..SolverConfig::default() }.validate().is_err());
        assert!(SolverConfig { altmin_max_rounds: 0, ..SolverConfig::default() }.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }
}
