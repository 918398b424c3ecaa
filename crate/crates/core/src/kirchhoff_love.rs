//! Reduced plate states and their 3D lifts.
//!
//! A [`KLState`] lives on a node grid of the mid-surface `omega`. It stores the
//! membrane displacement, the deflection, the deflection gradient (kept as an
//! independent field so that it may jump where the deflection does not) and
//! the set of cut mid-surface edges. Lifting gives
//! `u_a = ubar_a - x_n g_a`, `u_n = u_n(x')`, with every cut edge extended to a
//! full vertical wall of broken faces.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{BoxGrid, NodalField, PlateField};

/// Finite-difference tolerance `10 h^2 * scale`.
pub fn tol_fd(h: f64, scale: f64) -> f64 {
    10.0 * h * h * scale.max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KLState {
    omega: BoxGrid,
    ubar: Vec<f64>,
    un: Vec<f64>,
    grad_un: Vec<f64>,
    cuts: Vec<Vec<bool>>,
}

impl KLState {
    pub fn zeros(omega: BoxGrid) -> Self {
        let m = omega.dim();
        let nn = omega.num_nodes();
        Self { ubar: vec![0.0; nn * m], un: vec![0.0; nn], grad_un: vec![0.0; nn * m], cuts: vec![vec![false; nn]; m], omega }
    }

    /// Samples closed-form `ubar`, `u_n` and `grad u_n` at the nodes.
    pub fn from_fns(
        omega: BoxGrid,
        ubar: impl Fn(&[f64]) -> Vec<f64>,
        un: impl Fn(&[f64]) -> f64,
        grad_un: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<Self> {
        let mut s = Self::zeros(omega);
        let m = s.omega.dim();
        for node in 0..s.omega.num_nodes() {
            let x = s.omega.node_coord(node);
            let (ub, g) = (ubar(&x), grad_un(&x));
            if ub.len() != m || g.len() != m {
                return Err(Error::DimensionMismatch { expected: m, found: ub.len().min(g.len()) });
            }
            s.ubar[node * m..(node + 1) * m].copy_from_slice(&ub);
            s.grad_un[node * m..(node + 1) * m].copy_from_slice(&g);
            s.un[node] = un(&x);
        }
        if !s.is_finite() {
            return Err(Error::param("reduced state has non-finite nodal values"));
        }
        Ok(s)
    }

    pub fn omega(&self) -> &BoxGrid {
        &self.omega
    }

    /// Spatial dimension of the plate, one more than that of `omega`.
    pub fn plate_dim(&self) -> usize {
        self.omega.dim() + 1
    }

    pub fn ubar(&self, node: usize) -> &[f64] {
        let m = self.omega.dim();
        &self.ubar[node * m..(node + 1) * m]
    }

    pub fn ubar_mut(&mut self, node: usize) -> &mut [f64] {
        let m = self.omega.dim();
        &mut self.ubar[node * m..(node + 1) * m]
    }

    pub fn un(&self, node: usize) -> f64 {
        self.un[node]
    }

    pub fn set_un(&mut self, node: usize, v: f64) {
        self.un[node] = v;
    }

    pub fn grad_un(&self, node: usize) -> &[f64] {
        let m = self.omega.dim();
        &self.grad_un[node * m..(node + 1) * m]
    }

    pub fn grad_un_mut(&mut self, node: usize) -> &mut [f64] {
        let m = self.omega.dim();
        &mut self.grad_un[node * m..(node + 1) * m]
    }

    /// Whether the edge from `node` to `node + e_axis` of `omega` is cut.
    pub fn is_cut(&self, axis: usize, node: usize) -> bool {
        self.cuts[axis][node]
    }

    pub fn set_cut(&mut self, axis: usize, node: usize, cut: bool) -> Result<()> {
        if axis >= self.omega.dim() || node >= self.omega.num_nodes() || !self.omega.has_forward(node, axis) {
            return Err(Error::param(format!("no mid-surface edge ({axis}, {node})")));
        }
        self.cuts[axis][node] = cut;
        Ok(())
    }

    pub fn cut_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (axis, flags) in self.cuts.iter().enumerate() {
            out.extend(flags.iter().enumerate().filter(|(_, &c)| c).map(|(node, _)| (axis, node)));
        }
        out
    }

    pub fn clear_cuts(&mut self) {
        self.cuts.iter_mut().for_each(|c| c.iter_mut().for_each(|b| *b = false));
    }

    /// `H^{n-2}`-weighted length of the cut set: each cut edge carries the
    /// measure of its dual face in `omega` (1 when `omega` is an interval).
    pub fn cut_measure(&self) -> f64 {
        self.cut_edges().iter().map(|&(axis, w)| self.omega.dual_face_area(axis, w)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.ubar.iter().chain(&self.un).chain(&self.grad_un).all(|v| v.is_finite())
    }

    /// `a * self + b * other`, keeping the cuts of `self`.
    pub fn combine(&self, a: f64, other: &KLState, b: f64) -> Result<KLState> {
        if self.omega != other.omega {
            return Err(Error::param("reduced states live on different grids"));
        }
        let mut out = self.clone();
        let lin = |x: &mut Vec<f64>, y: &[f64]| x.iter_mut().zip(y).for_each(|(p, q)| *p = a * *p + b * q);
        lin(&mut out.ubar, &other.ubar);
        lin(&mut out.un, &other.un);
        lin(&mut out.grad_un, &other.grad_un);
        Ok(out)
    }

    /// Largest mismatch between `grad_un` and central differences of `u_n`
    /// (one-sided next to cuts and at the boundary; nodes cut on both sides are skipped).
    pub fn gradient_residual(&self) -> f64 {
        let g = &self.omega;
        let m = g.dim();
        let mut worst = 0.0f64;
        for node in 0..g.num_nodes() {
            for a in 0..m {
                let s = g.stride(a);
                let h = g.spacing(a);
                let fwd = g.has_forward(node, a) && !self.cuts[a][node];
                let bwd = g.axis_index(node, a) > 0 && !self.cuts[a][node - s];
                let d = match (fwd, bwd) {
                    (true, true) => (self.un[node + s] - self.un[node - s]) / (2.0 * h),
                    (true, false) => (self.un[node + s] - self.un[node]) / h,
                    (false, true) => (self.un[node] - self.un[node - s]) / h,
                    (false, false) => continue,
                };
                // one-sided quotients are first-order accurate, so compare
                // against the gradient averaged over the edge
                let target = match (fwd, bwd) {
                    (true, true) => self.grad_un[node * m + a],
                    (true, false) => 0.5 * (self.grad_un[node * m + a] + self.grad_un[(node + s) * m + a]),
                    _ => 0.5 * (self.grad_un[node * m + a] + self.grad_un[(node - s) * m + a]),
                };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }

    /// Plain-text form: `n`, `dims`, `h`, `origin` header lines, one row per node
    /// (`ubar.., un, grad_un..`), then a `cracks` section of `axis node` pairs.
    pub fn to_text(&self) -> String {
        let g = &self.omega;
        let m = g.dim();
        let mut out = String::new();
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "n {}", m + 1);
        let _ = writeln!(out, "dims {}", join(&mut g.cells().iter().map(|c| c.to_string())));
        let _ = writeln!(out, "h {}", join(&mut (0..m).map(|d| format!("{:?}", g.spacing(d)))));
        let _ = writeln!(out, "origin {}", join(&mut g.lo().iter().map(|x| format!("{x:?}"))));
        let _ = writeln!(out, "nodes {}", g.num_nodes());
        for node in 0..g.num_nodes() {
            let row = self.ubar(node).iter().chain(std::iter::once(&self.un[node])).chain(self.grad_un(node));
            let _ = writeln!(out, "{}", join(&mut row.map(|x| format!("{x:?}"))));
        }
        let cuts = self.cut_edges();
        let _ = writeln!(out, "cracks {}", cuts.len());
        for (axis, node) in cuts {
            let _ = writeln!(out, "{axis} {node}");
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let err = |line: usize, msg: String| parse_error(path, line, msg);
        let nums = |ln: usize, v: &[String]| -> Result<Vec<f64>> {
            v.iter().map(|t| t.parse::<f64>().map_err(|e| err(ln, format!("bad number {t:?}: {e}")))).collect()
        };
        let (ln, nv) = header(&mut lines, path, "n")?;
        let n = nums(ln, &nv)?.first().copied().ok_or_else(|| err(ln, "missing n".into()))? as usize;
        if !(2..=3).contains(&n) {
            return Err(err(ln, format!("unsupported dimension {n}")));
        }
        let m = n - 1;
        let (ln, dv) = header(&mut lines, path, "dims")?;
        let cells: Vec<usize> = nums(ln, &dv)?.iter().map(|&x| x as usize).collect();
        let (lh, hv) = header(&mut lines, path, "h")?;
        let h = nums(lh, &hv)?;
        let (lo_ln, ov) = header(&mut lines, path, "origin")?;
        let origin = nums(lo_ln, &ov)?;
        if cells.len() != m || h.len() != m || origin.len() != m {
            return Err(err(lo_ln, format!("header needs {m} entries per line")));
        }
        let hi: Vec<f64> = (0..m).map(|d| origin[d] + h[d] * cells[d] as f64).collect();
        let omega = BoxGrid::new(origin, hi, cells).map_err(|e| err(lo_ln, e.to_string()))?;
        let mut s = Self::zeros(omega);
        let (ln, cv) = header(&mut lines, path, "nodes")?;
        let count = nums(ln, &cv)?.first().copied().unwrap_or(-1.0);
        if count as usize != s.omega.num_nodes() {
            return Err(err(ln, format!("expected {} nodes", s.omega.num_nodes())));
        }
        for node in 0..s.omega.num_nodes() {
            let (ln, l) = lines.next().ok_or_else(|| err(0, "truncated node rows".into()))?;
            let row = nums(ln, &l.split_whitespace().map(str::to_string).collect::<Vec<_>>())?;
            if row.len() != 2 * m + 1 {
                return Err(err(ln, format!("expected {} values per node", 2 * m + 1)));
            }
            s.ubar_mut(node).copy_from_slice(&row[..m]);
            s.un[node] = row[m];
            s.grad_un_mut(node).copy_from_slice(&row[m + 1..]);
        }
        let (ln, kv) = header(&mut lines, path, "cracks")?;
        let ncuts = nums(ln, &kv)?.first().copied().unwrap_or(0.0) as usize;
        for _ in 0..ncuts {
            let (ln, l) = lines.next().ok_or_else(|| err(0, "truncated crack list".into()))?;
            let v: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|e| err(ln, format!("bad index {t:?}: {e}"))))
                .collect::<Result<_>>()?;
            if v.len() != 2 {
                return Err(err(ln, "expected `axis node`".into()));
            }
            s.set_cut(v[0], v[1], true).map_err(|e| err(ln, e.to_string()))?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }
}

fn parse_error(path: &Path, line: usize, msg: String) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg }
}

fn header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    path: &Path,
    key: &str,
) -> Result<(usize, Vec<String>)> {
    let (ln, l) = lines.next().ok_or_else(|| parse_error(path, 0, format!("missing {key} line")))?;
    let mut parts = l.split_whitespace();
    if parts.next() != Some(key) {
        return Err(parse_error(path, ln, format!("expected {key}")));
    }
    Ok((ln, parts.map(str::to_string).collect()))
}

/// Index of the plate node above mid-surface node `w` at layer node `k`.
#[inline]
pub fn plate_node(layers: usize, w: usize, k: usize) -> usize {
    w * (layers + 1) + k
}

fn check_plate_grid(omega: &BoxGrid, grid: &BoxGrid) -> Result<()> {
    let m = omega.dim();
    let n = grid.dim();
    let same = n == m + 1
        && grid.cells()[..m] == omega.cells()[..]
        && (0..m).all(|d| (grid.lo()[d] - omega.lo()[d]).abs() < 1e-12 && (grid.hi()[d] - omega.hi()[d]).abs() < 1e-12);
    if !same {
        return Err(Error::param("plate grid does not extend the mid-surface grid"));
    }
    Ok(())
}

/// The Kirchhoff-Love displacement of a reduced state on the plate grid.
pub fn kl_lift(s: &KLState, grid: &BoxGrid) -> Result<PlateField> {
    check_plate_grid(&s.omega, grid)?;
    let m = s.omega.dim();
    let n = m + 1;
    let layers = grid.cells()[m];
    let mut u = NodalField::zeros(grid.clone());
    for w in 0..s.omega.num_nodes() {
        for k in 0..=layers {
            let xn = grid.coord(m, k);
            let node = plate_node(layers, w, k);
            let val = u.value_mut(node);
            for a in 0..m {
                val[a] = s.ubar(w)[a] - xn * s.grad_un(w)[a];
            }
            val[n - 1] = s.un(w);
        }
    }
    for (axis, w) in s.cut_edges() {
        for k in 0..=layers {
            u.set_broken(axis, plate_node(layers, w, k), true);
        }
    }
    Ok(u)
}

/// Mid-surface grid under a plate grid.
pub fn omega_of(grid: &BoxGrid) -> Result<BoxGrid> {
    let m = grid.dim() - 1;
    BoxGrid::new(grid.lo()[..m].to_vec(), grid.hi()[..m].to_vec(), grid.cells()[..m].to_vec())
}

fn thickness_weights(grid: &BoxGrid) -> Vec<f64> {
    let m = grid.dim() - 1;
    let layers = grid.cells()[m];
    let h = grid.spacing(m);
    if layers % 2 == 0 {
        // composite Simpson, exact for cubics in x_n
        (0..=layers)
            .map(|k| {
                let c = if k == 0 || k == layers { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                c * h / 3.0
            })
            .collect()
    } else {
        (0..=layers).map(|k| if k == 0 || k == layers { 0.5 * h } else { h }).collect()
    }
}

/// `int_{-1/2}^{1/2} u_a(x', x_n) dx_n` at every mid-surface node.
pub fn kl_average(u: &PlateField) -> Result<NodalField> {
    let grid = u.grid();
    let m = grid.dim() - 1;
    let omega = omega_of(grid)?;
    let layers = grid.cells()[m];
    let w = thickness_weights(grid);
    let mut out = NodalField::zeros(omega);
    for node in 0..out.grid().num_nodes() {
        let mut acc = vec![0.0; m];
        for (k, wk) in w.iter().enumerate() {
            let v = u.value(plate_node(layers, node, k));
            for a in 0..m {
                acc[a] += wk * v[a];
            }
        }
        out.value_mut(node).copy_from_slice(&acc);
    }
    Ok(out)
}

/// Result of the two-slice reconstruction of the deflection gradient.
#[derive(Debug, Clone)]
pub struct PsiExtraction {
    /// `n - 1` entries per mid-surface node; NaN on excluded columns.
    pub psi: Vec<f64>,
    /// Mid-surface nodes whose column is broken between the slices.
    pub excluded: Vec<usize>,
    /// Largest disagreement with the quotient from the slice pair `(t1, (t1 + t2)/2)`.
    pub slice_dependence: f64,
}

fn value_at_height(u: &PlateField, w: usize, t: f64, comp: usize) -> f64 {
    let grid = u.grid();
    let m = grid.dim() - 1;
    let layers = grid.cells()[m];
    let h = grid.spacing(m);
    let s = ((t - grid.lo()[m]) / h).clamp(0.0, layers as f64);
    let k = (s.floor() as usize).min(layers - 1);
    let f = s - k as f64;
    let a = u.value(plate_node(layers, w, k))[comp];
    let b = u.value(plate_node(layers, w, k + 1))[comp];
    a + f * (b - a)
}

/// `psi_a(x') = (u_a(x', t1) - u_a(x', t2)) / (t2 - t1)`, with values between
/// layer nodes interpolated linearly in `x_n`.
pub fn extract_psi(u: &PlateField, t1: f64, t2: f64) -> Result<PsiExtraction> {
    let grid = u.grid();
    let m = grid.dim() - 1;
    let layers = grid.cells()[m];
    let (lo, hi) = (grid.lo()[m], grid.hi()[m]);
    if !(t1 > lo && t1 < hi && t2 > lo && t2 < hi) || t1 == t2 {
        return Err(Error::param(format!("slices {t1}, {t2} must be distinct and inside the thickness")));
    }
    let t3 = 0.5 * (t1 + t2);
    let h = grid.spacing(m);
    let (bot, top) = (t1.min(t2), t1.max(t2));
    let kb = ((bot - lo) / h).floor() as usize;
    let kt = (((top - lo) / h).ceil() as usize).min(layers);
    let omega = omega_of(grid)?;
    let mut out = PsiExtraction { psi: vec![f64::NAN; omega.num_nodes() * m], excluded: Vec::new(), slice_dependence: 0.0 };
    for w in 0..omega.num_nodes() {
        if (kb..kt).any(|k| u.is_broken(m, plate_node(layers, w, k))) {
            out.excluded.push(w);
            continue;
        }
        for a in 0..m {
            let (v1, v2, v3) = (value_at_height(u, w, t1, a), value_at_height(u, w, t2, a), value_at_height(u, w, t3, a));
            let p = (v1 - v2) / (t2 - t1);
            let q = (v1 - v3) / (t3 - t1);
            out.psi[w * m + a] = p;
            out.slice_dependence = out.slice_dependence.max((p - q).abs());
        }
    }
    Ok(out)
}

/// Structural diagnostics of a plate displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KLReport {
    /// Largest `|e_{i n}(u)|` over cells without broken edges.
    pub max_transverse_strain: f64,
    /// Broken faces whose normal is `e_n`.
    pub non_vertical_breaks: usize,
    /// Largest oscillation of `u_n` along an unbroken column.
    pub un_variation: f64,
    /// Largest residual of the identity
    /// `d_a u_n = 2 d_xi (u . xi) - d_a u_a - d_n u_a`, `xi = (e_a + e_n)/sqrt 2`.
    pub appgra_residual: f64,
}

impl KLReport {
    /// Membership test with tolerance `tol` on the strain and the oscillation of `u_n`.
    pub fn passes(&self, tol: f64) -> bool {
        self.non_vertical_breaks == 0 && self.max_transverse_strain <= tol && self.un_variation <= tol
    }
}

fn cell_uncut(u: &PlateField, cell: &[usize]) -> bool {
    let g = u.grid();
    let n = g.dim();
    let corners = g.cell_corners(cell);
    (0..n).all(|axis| {
        corners
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask >> axis & 1 == 0)
            .all(|(_, &c)| !u.is_broken(axis, c))
    })
}

/// Multilinear value of component `comp` at `x` (inside the grid).
fn sample_at(u: &PlateField, x: &[f64], comp: usize) -> f64 {
    let g = u.grid();
    let n = g.dim();
    let mut base = vec![0usize; n];
    let mut t = vec![0.0; n];
    for d in 0..n {
        let s = ((x[d] - g.lo()[d]) / g.spacing(d)).clamp(0.0, g.cells()[d] as f64);
        let mut i = s.floor() as usize;
        if i == g.cells()[d] {
            i -= 1;
        }
        base[d] = i;
        t[d] = s - i as f64;
    }
    let corners = g.cell_corners(&base);
    let mut acc = 0.0;
    for (mask, &c) in corners.iter().enumerate() {
        let w: f64 = (0..n).map(|d| if mask >> d & 1 == 1 { t[d] } else { 1.0 - t[d] }).product();
        if w != 0.0 {
            acc += w * u.value(c)[comp];
        }
    }
    acc
}

pub fn kl_verify(u: &PlateField) -> KLReport {
    let g = u.grid();
    let n = g.dim();
    let m = n - 1;
    let layers = g.cells()[m];
    let mut rep = KLReport { max_transverse_strain: 0.0, non_vertical_breaks: 0, un_variation: 0.0, appgra_residual: 0.0 };
    rep.non_vertical_breaks = u.broken_flags()[m].iter().filter(|&&b| b).count();

    let cells = g.cell_multis();
    let mut cell_ok = vec![false; cells.len()];
    for (ci, cell) in cells.iter().enumerate() {
        if !cell_uncut(u, cell) {
            continue;
        }
        cell_ok[ci] = true;
        if let Some(gr) = u.cell_gradient(cell) {
            for i in 0..n {
                let e = if i == m { gr[m][m] } else { 0.5 * (gr[i][m] + gr[m][i]) };
                rep.max_transverse_strain = rep.max_transverse_strain.max(e.abs());
            }
        }
    }

    let omega_nodes: usize = g.cells()[..m].iter().map(|c| c + 1).product();
    for w in 0..omega_nodes {
        if (0..layers).any(|k| u.is_broken(m, plate_node(layers, w, k))) {
            continue;
        }
        let vals: Vec<f64> = (0..=layers).map(|k| u.value(plate_node(layers, w, k))[m]).collect();
        let (mn, mx) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        rep.un_variation = rep.un_variation.max(mx - mn);
    }

    // the identity at interior nodes whose surrounding cells are all uncut
    let s = (0..n).map(|d| g.spacing(d)).fold(f64::INFINITY, f64::min);
    let cell_index = |c: &[usize]| -> usize {
        let mut idx = 0;
        for d in 0..n {
            idx = idx * g.cells()[d] + c[d];
        }
        idx
    };
    for node in 0..g.num_nodes() {
        let mi = g.node_multi(node);
        if (0..n).any(|d| mi[d] < 2 || mi[d] + 2 > g.cells()[d]) {
            continue;
        }
        let mut ok = true;
        for mask in 0..1usize << n {
            let c: Vec<usize> = (0..n).map(|d| mi[d] - 1 + (mask >> d & 1)).collect();
            ok &= cell_ok[cell_index(&c)];
        }
        // the diagonal stencil reaches one more cell out
        for d in 0..n {
            for side in [mi[d] - 2, mi[d] + 1] {
                let mut c: Vec<usize> = mi.iter().map(|&i| i.min(g.cells()[d] - 1)).collect();
                c[d] = side;
                ok &= cell_ok[cell_index(&c)];
            }
        }
        if !ok {
            continue;
        }
        let x = g.node_coord(node);
        let central = |comp: usize, axis: usize| -> f64 {
            let st = g.stride(axis);
            (u.value(node + st)[comp] - u.value(node - st)[comp]) / (2.0 * g.spacing(axis))
        };
        for a in 0..m {
            let diag = |sgn: f64| -> f64 {
                let mut y = x.clone();
                y[a] += sgn * s;
                y[m] += sgn * s;
                sample_at(u, &y, a) + sample_at(u, &y, m)
            };
            // 2 d_xi (u . xi) with xi = (e_a + e_n)/sqrt 2 and step s sqrt 2 along xi
            let two_dxi = (diag(1.0) - diag(-1.0)) / (2.0 * s);
            let lhs = central(m, a);
            let rhs = two_dxi - central(a, a) - central(a, m);
            rep.appgra_residual = rep.appgra_residual.max((lhs - rhs).abs());
        }
    }
    rep
}

/// Whether the broken faces of `u` are exactly the vertical walls above the
/// cut edges of `s`.
pub fn jump_decomposition_check(s: &KLState, u: &PlateField) -> bool {
    let g = u.grid();
    let m = s.omega().dim();
    if check_plate_grid(s.omega(), g).is_err() {
        return false;
    }
    let layers = g.cells()[m];
    let mut expected: Vec<(usize, usize)> = s
        .cut_edges()
        .into_iter()
        .flat_map(|(axis, w)| (0..=layers).map(move |k| (axis, plate_node(layers, w, k))))
        .collect();
    expected.sort_unstable();
    let mut actual = u.broken_faces();
    actual.sort_unstable();
    expected == actual
}
