//! The physical, rescaled and limit energies, and the lateral Dirichlet penalty.

use rayon::prelude::*;

use crate::elasticity::{phi_rho, quadratic_form_c, quadratic_form_c0, rescale_displacement, rescale_strain, LameParams, SymMatrix};
use crate::error::{Error, Result};
use crate::kirchhoff_love::{kl_lift, plate_node, tol_fd, KLState};
use crate::mesh::{sym_part, BoxGrid, NodalField, PlateField};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub bulk: f64,
    pub surface: f64,
    pub boundary_penalty: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(bulk: f64, surface: f64, boundary_penalty: f64) -> Self {
        let (bulk, surface, boundary_penalty) = (bulk + 0.0, surface + 0.0, boundary_penalty + 0.0);
        Self { bulk, surface, boundary_penalty, total: bulk + surface + boundary_penalty }
    }

    pub fn with_penalty(self, penalty: f64) -> Self {
        Self::new(self.bulk, self.surface, self.boundary_penalty + penalty)
    }

    pub const CSV_HEADER: [&'static str; 5] = ["rho", "bulk", "surface", "penalty", "total"];

    pub fn csv_row(&self, rho: f64) -> [String; 5] {
        [rho, self.bulk, self.surface, self.boundary_penalty, self.total].map(|v| format!("{v:e}"))
    }
}

/// Cells in enumeration order with their strain; `None` for cells with no bulk.
fn cell_strains(u: &NodalField) -> Vec<Option<SymMatrix>> {
    let g = u.grid();
    let n = g.dim();
    g.cell_multis()
        .par_iter()
        .map(|c| u.cell_gradient(c).map(|gr| SymMatrix::from_rows(n, &sym_part(&gr, n))))
        .collect()
}

fn surface_sum(u: &NodalField, weight: impl Fn(usize) -> f64) -> f64 {
    let g = u.grid();
    u.broken_flags()
        .iter()
        .enumerate()
        .map(|(axis, flags)| {
            let area: f64 = flags.iter().enumerate().filter(|(_, &b)| b).map(|(node, _)| g.dual_face_area(axis, node)).sum();
            area * weight(axis)
        })
        .sum()
}

/// `1/2 int C e(u) . e(u) + H^{n-1}(J_u)` on the physical plate.
pub fn griffith_energy(u: &NodalField, p: &LameParams) -> Result<EnergyBreakdown> {
    let g = u.grid();
    if g.dim() != p.n || u.ncomp() != p.n {
        return Err(Error::DimensionMismatch { expected: p.n, found: g.dim() });
    }
    let vol = g.cell_volume();
    let mut bulk = 0.0;
    for e in cell_strains(u).into_iter().flatten() {
        bulk += 0.5 * quadratic_form_c(p, &e)? * vol;
    }
    Ok(EnergyBreakdown::new(bulk, surface_sum(u, |_| 1.0), 0.0))
}

/// `E_rho(v) = 1/2 int C e^rho(v) . e^rho(v) + int_{J_v} phi_rho(nu)` on the
/// unit-thickness plate.
pub fn rescaled_energy(v: &PlateField, p: &LameParams, rho: f64) -> Result<EnergyBreakdown> {
    if !(rho > 0.0) {
        return Err(Error::param("rho must be positive"));
    }
    let g = v.grid();
    let n = p.n;
    if g.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: g.dim() });
    }
    let vol = g.cell_volume();
    let mut bulk = 0.0;
    for e in cell_strains(v).into_iter().flatten() {
        bulk += 0.5 * quadratic_form_c(p, &rescale_strain(&e, rho)?)? * vol;
    }
    let surface = surface_sum(v, |axis| {
        let mut nu = vec![0.0; n];
        nu[axis] = 1.0;
        phi_rho(rho, &nu)
    });
    Ok(EnergyBreakdown::new(bulk, surface, 0.0))
}

/// `|F_rho(u) - rho E_rho(v)| / F_rho(u)` with `v` the rescaled field; 0 when both vanish.
pub fn change_of_variables_check(u: &NodalField, p: &LameParams, rho: f64) -> Result<f64> {
    let f = griffith_energy(u, p)?.total;
    let e = rescaled_energy(&rescale_displacement(u, rho)?, p, rho)?.total;
    let gap = (f - rho * e).abs();
    Ok(if f == 0.0 { if gap == 0.0 { 0.0 } else { f64::INFINITY } } else { gap / f })
}

/// Thickness quadrature of the limit bulk term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerQuadrature {
    /// `int_{-1/2}^{1/2} C0 (e - t H) . (e - t H) dt = C0 e . e + C0 H . H / 12`.
    Exact,
    /// Midpoint rule on `M` equal layers, matching a plate grid with `M` layers.
    Midpoint(usize),
}

fn second_moment(q: LayerQuadrature) -> f64 {
    match q {
        LayerQuadrature::Exact => 1.0 / 12.0,
        LayerQuadrature::Midpoint(m) => {
            let m = m.max(1) as f64;
            1.0 / 12.0 - 1.0 / (12.0 * m * m)
        }
    }
}

/// Membrane strain and bending curvature per mid-surface cell.
pub fn reduced_cell_strains(s: &KLState) -> Vec<Option<(SymMatrix, SymMatrix)>> {
    let om = s.omega();
    let m = om.dim();
    let mut ubar = NodalField::zeros(om.clone());
    let mut grad = NodalField::zeros(om.clone());
    for w in 0..om.num_nodes() {
        ubar.value_mut(w).copy_from_slice(s.ubar(w));
        grad.value_mut(w).copy_from_slice(s.grad_un(w));
    }
    for (axis, w) in s.cut_edges() {
        ubar.set_broken(axis, w, true);
        grad.set_broken(axis, w, true);
    }
    om.cell_multis()
        .iter()
        .map(|c| {
            let a = ubar.cell_gradient(c)?;
            let b = grad.cell_gradient(c)?;
            Some((SymMatrix::from_rows(m, &sym_part(&a, m)), SymMatrix::from_rows(m, &sym_part(&b, m))))
        })
        .collect()
}

/// `E_0(u) = 1/2 int C0 e(u) . e(u) + H^{n-1}(J_u)` for `u` the lift of `s`.
pub fn limit_energy(s: &KLState, p: &LameParams, quad: LayerQuadrature) -> Result<EnergyBreakdown> {
    if s.plate_dim() != p.n {
        return Err(Error::DimensionMismatch { expected: p.n, found: s.plate_dim() });
    }
    let vol = s.omega().cell_volume();
    let k2 = second_moment(quad);
    let mut bulk = 0.0;
    for (e, h) in reduced_cell_strains(s).into_iter().flatten() {
        bulk += 0.5 * (quadratic_form_c0(p, &e)? + k2 * quadratic_form_c0(p, &h)?) * vol;
    }
    Ok(EnergyBreakdown::new(bulk, s.cut_measure(), 0.0))
}

/// A Kirchhoff-Love Dirichlet datum for the lateral boundary.
#[derive(Debug, Clone)]
pub struct BoundaryDatum {
    state: KLState,
    scale: f64,
}

impl BoundaryDatum {
    /// Accepts `g` when its stored deflection gradient matches the deflection
    /// to finite-difference accuracy.
    pub fn new(state: KLState) -> Result<Self> {
        let om = state.omega();
        let h = (0..om.dim()).map(|d| om.spacing(d)).fold(0.0, f64::max);
        let mut scale = 1.0f64;
        for w in 0..om.num_nodes() {
            scale = scale.max(state.un(w).abs());
            for v in state.ubar(w).iter().chain(state.grad_un(w)) {
                scale = scale.max(v.abs());
            }
        }
        if !state.is_finite() {
            return Err(Error::param("boundary datum has non-finite values"));
        }
        let res = state.gradient_residual();
        if res > tol_fd(h, scale) {
            return Err(Error::param(format!(
                "boundary datum is not Kirchhoff-Love: gradient residual {res:e}"
            )));
        }
        Ok(Self { state, scale })
    }

    pub fn state(&self) -> &KLState {
        &self.state
    }

    pub fn tol_trace(&self) -> f64 {
        1e-9 * self.scale
    }

    pub fn lift(&self, grid: &BoxGrid) -> Result<PlateField> {
        let mut s = self.state.clone();
        s.clear_cuts();
        kl_lift(&s, grid)
    }
}

/// Lateral boundary nodes of a grid whose last axis is the thickness, each with
/// its dual `H^{n-1}` weight on the face it belongs to. Corner columns of a
/// 3D plate appear once per face.
pub fn lateral_boundary_weights(grid: &BoxGrid) -> Vec<(usize, f64)> {
    let n = grid.dim();
    let m = n - 1;
    let dual = |axis: usize, i: usize| -> f64 {
        let h = grid.spacing(axis);
        if i == 0 || i == grid.cells()[axis] { 0.5 * h } else { h }
    };
    let mut out = Vec::new();
    for node in 0..grid.num_nodes() {
        let mi = grid.node_multi(node);
        for a in 0..m {
            if mi[a] != 0 && mi[a] != grid.cells()[a] {
                continue;
            }
            let w: f64 = (0..n).filter(|&d| d != a).map(|d| dual(d, mi[d])).product();
            out.push((node, w));
        }
    }
    out
}

/// Measure of the lateral boundary where the trace of `u` differs from that of `g`.
pub fn boundary_penalty(u: &PlateField, g: &BoundaryDatum) -> Result<f64> {
    let target = g.lift(u.grid())?;
    let tol = g.tol_trace();
    Ok(lateral_boundary_weights(u.grid())
        .into_iter()
        .filter(|&(node, _)| {
            u.value(node).iter().zip(target.value(node)).any(|(a, b)| (a - b).abs() > tol)
        })
        .map(|(_, w)| w)
        .sum())
}

/// Lateral mismatch for a reduced state: a boundary column mismatches when
/// `ubar`, `u_n` or `grad u_n` differs from the datum.
pub fn boundary_penalty_reduced(s: &KLState, g: &BoundaryDatum) -> Result<f64> {
    let om = s.omega();
    if om != g.state().omega() {
        return Err(Error::param("state and datum live on different grids"));
    }
    let m = om.dim();
    let tol = g.tol_trace();
    let dual = |axis: usize, i: usize| -> f64 {
        let h = om.spacing(axis);
        if i == 0 || i == om.cells()[axis] { 0.5 * h } else { h }
    };
    let d = g.state();
    let mut total = 0.0;
    for w in 0..om.num_nodes() {
        let mi = om.node_multi(w);
        let differs = (s.un(w) - d.un(w)).abs() > tol
            || s.ubar(w).iter().zip(d.ubar(w)).any(|(a, b)| (a - b).abs() > tol)
            || s.grad_un(w).iter().zip(d.grad_un(w)).any(|(a, b)| (a - b).abs() > tol);
        if !differs {
            continue;
        }
        for a in 0..m {
            if mi[a] == 0 || mi[a] == om.cells()[a] {
                total += (0..m).filter(|&k| k != a).map(|k| dual(k, mi[k])).product::<f64>();
            }
        }
    }
    Ok(total)
}

/// `E_rho^g = E_rho + lateral penalty`.
pub fn penalized_rescaled(v: &PlateField, p: &LameParams, rho: f64, g: &BoundaryDatum) -> Result<EnergyBreakdown> {
    Ok(rescaled_energy(v, p, rho)?.with_penalty(boundary_penalty(v, g)?))
}

/// `E_0^g = E_0 + lateral penalty`.
pub fn penalized_limit(s: &KLState, p: &LameParams, g: &BoundaryDatum, quad: LayerQuadrature) -> Result<EnergyBreakdown> {
    Ok(limit_energy(s, p, quad)?.with_penalty(boundary_penalty_reduced(s, g)?))
}

/// `(||e_{a n}(v)||_2, ||e_{n n}(v)||_2)` over the unit-thickness plate, with
/// the unscaled discrete strains of `v`.
pub fn transverse_strain_norms(v: &PlateField) -> (f64, f64) {
    let g = v.grid();
    let n = g.dim();
    let vol = g.cell_volume();
    let (mut an, mut nn) = (0.0, 0.0);
    for e in cell_strains(v).into_iter().flatten() {
        for a in 0..n - 1 {
            an += e.get(a, n - 1).powi(2) * vol;
        }
        nn += e.get(n - 1, n - 1).powi(2) * vol;
    }
    (an.sqrt(), nn.sqrt())
}

/// Mid-surface node indices of the plate columns.
pub fn column_nodes(grid: &BoxGrid, w: usize) -> impl Iterator<Item = usize> {
    let layers = grid.cells()[grid.dim() - 1];
    (0..=layers).map(move |k| plate_node(layers, w, k))
}
