//! Isotropic elasticity: the tensor `C`, its reduced plate counterpart `C0`,
//! the anisotropic surface weight and the thickness rescalings.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::{BoxGrid, NodalField};

/// Constant Lamé coefficients in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LameParams {
    pub lambda: f64,
    pub mu: f64,
    pub n: usize,
}

impl LameParams {
    pub fn new(lambda: f64, mu: f64, n: usize) -> Result<Self> {
        let p = Self { lambda, mu, n };
        if !validate_lame(&p) {
            return Err(Error::InvalidLame { lambda, mu, n });
        }
        Ok(p)
    }

    /// Coercivity constant: `C E . E >= c |E|^2` with `c = min(2 mu, 2 mu + n lambda)`.
    pub fn coercivity(&self) -> f64 {
        (2.0 * self.mu).min(2.0 * self.mu + self.n as f64 * self.lambda)
    }

    /// Scalar `C0` of a one-dimensional plate (n = 2): `2 lambda mu / (lambda + 2 mu) + 2 mu`.
    pub fn reduced_bar_modulus(&self) -> f64 {
        2.0 * self.lambda * self.mu / (self.lambda + 2.0 * self.mu) + 2.0 * self.mu
    }
}

/// `true` iff `mu > 0` and `2 mu + n lambda > 0`, i.e. `C` is positive definite.
pub fn validate_lame(p: &LameParams) -> bool {
    p.lambda.is_finite()
        && p.mu.is_finite()
        && (2..=3).contains(&p.n)
        && p.mu > 0.0
        && 2.0 * p.mu + p.n as f64 * p.lambda > 0.0
}

/// Dense symmetric matrix of order 1..=3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    e: [[f64; 3]; 3],
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "SymMatrix supports orders 1..=3");
        Self { dim, e: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.e[i][i] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.e[i][i] = v;
        }
        m
    }

    /// Builds from a full square array; the upper triangle wins on asymmetry.
    pub fn from_rows(dim: usize, rows: &[[f64; 3]; 3]) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, rows[i][j]);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.e[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.e[i][j] = v;
        self.e[j][i] = v;
    }

    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.e
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.e[i][i]).sum()
    }

    /// Frobenius product `A . B`.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.e[i][j] * other.e[i][j];
            }
        }
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut m = *self;
        for row in m.e.iter_mut() {
            for v in row.iter_mut() {
                *v *= a;
            }
        }
        m
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        let mut m = *self;
        for i in 0..3 {
            for j in 0..3 {
                m.e[i][j] += other.e[i][j];
            }
        }
        m
    }

    fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim != expected {
            return Err(Error::DimensionMismatch { expected, found: self.dim });
        }
        Ok(())
    }
}

/// `C E = lambda tr(E) I + 2 mu E`.
pub fn apply_c(p: &LameParams, e: &SymMatrix) -> Result<SymMatrix> {
    e.check_dim(p.n)?;
    Ok(SymMatrix::identity(p.n).scaled(p.lambda * e.trace()).add(&e.scaled(2.0 * p.mu)))
}

/// `C E . E = lambda (tr E)^2 + 2 mu |E|^2`.
pub fn quadratic_form_c(p: &LameParams, e: &SymMatrix) -> Result<f64> {
    e.check_dim(p.n)?;
    let tr = e.trace();
    Ok(p.lambda * tr * tr + 2.0 * p.mu * e.norm_sq())
}

/// Closed form of the reduced tensor on `(n-1) x (n-1)` strains:
/// `C0 E . E = 2 lambda mu / (lambda + 2 mu) (tr E)^2 + 2 mu |E|^2`.
pub fn quadratic_form_c0(p: &LameParams, e: &SymMatrix) -> Result<f64> {
    e.check_dim(p.n - 1)?;
    let tr = e.trace();
    Ok(2.0 * p.lambda * p.mu / (p.lambda + 2.0 * p.mu) * tr * tr + 2.0 * p.mu * e.norm_sq())
}

/// Embeds an in-plane strain into `n x n` with transverse column `xi`.
pub fn embed_with_transverse(e: &SymMatrix, xi: &[f64]) -> SymMatrix {
    let n = e.dim() + 1;
    let mut full = SymMatrix::zeros(n);
    for i in 0..n - 1 {
        for j in i..n - 1 {
            full.set(i, j, e.get(i, j));
        }
        full.set(i, n - 1, xi[i]);
    }
    full.set(n - 1, n - 1, xi[n - 1]);
    full
}

/// Minimizes `xi -> C E_xi . E_xi` by solving its stationarity system.
///
/// The quadratic is expanded by polarization of `C` on the basis matrices of
/// the transverse entries, so this path never touches the closed form of `C0`.
pub fn reduced_min_oracle(p: &LameParams, e: &SymMatrix) -> Result<(f64, Vec<f64>)> {
    if !validate_lame(p) {
        return Err(Error::InvalidLame { lambda: p.lambda, mu: p.mu, n: p.n });
    }
    e.check_dim(p.n - 1)?;
    let n = p.n;
    let bilinear = |a: &SymMatrix, b: &SymMatrix| -> Result<f64> { Ok(apply_c(p, a)?.dot(b)) };
    let zero_xi = vec![0.0; n];
    let base = embed_with_transverse(e, &zero_xi);
    let basis: Vec<SymMatrix> = (0..n)
        .map(|k| {
            let mut xi = vec![0.0; n];
            xi[k] = 1.0;
            embed_with_transverse(&SymMatrix::zeros(n - 1), &xi)
        })
        .collect();

    let mut hess = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 0..n {
        rhs[i] = -bilinear(&base, &basis[i])?;
        for j in 0..n {
            hess[(i, j)] = bilinear(&basis[i], &basis[j])?;
        }
    }
    let xi = hess
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("transverse stationarity system".into()))?;
    let xi: Vec<f64> = xi.iter().copied().collect();
    let value = quadratic_form_c(p, &embed_with_transverse(e, &xi))?;
    Ok((value, xi))
}

/// Anisotropic surface weight `|(nu_1, ..., nu_{n-1}, nu_n / rho)|`.
pub fn phi_rho(rho: f64, nu: &[f64]) -> f64 {
    debug_assert!(rho > 0.0);
    let last = nu.len() - 1;
    nu.iter()
        .enumerate()
        .map(|(i, &v)| if i == last { v / rho } else { v })
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Rescaled strain of a field on the unit-thickness plate: mixed in-plane /
/// transverse entries scale by `1/rho`, the transverse diagonal by `1/rho^2`.
pub fn rescale_strain(e: &SymMatrix, rho: f64) -> Result<SymMatrix> {
    if !(rho > 0.0) {
        return Err(Error::param("rho must be positive"));
    }
    let n = e.dim();
    let mut out = *e;
    for a in 0..n - 1 {
        out.set(a, n - 1, e.get(a, n - 1) / rho);
    }
    out.set(n - 1, n - 1, e.get(n - 1, n - 1) / (rho * rho));
    Ok(out)
}

/// Pulls a displacement on the physical plate `omega x (-rho/2, rho/2)` back to
/// `omega x (-1/2, 1/2)`: in-plane components unchanged, transverse component
/// multiplied by `rho`. Nodes are shared, so break flags carry over.
pub fn rescale_displacement(u: &NodalField, rho: f64) -> Result<NodalField> {
    if !(rho > 0.0) {
        return Err(Error::param("rho must be positive"));
    }
    let g = u.grid();
    let n = g.dim();
    let thick = g.hi()[n - 1] - g.lo()[n - 1];
    if (thick - rho).abs() > 1e-12 * rho.max(1.0) || (g.lo()[n - 1] + 0.5 * rho).abs() > 1e-12 {
        return Err(Error::param(format!(
            "field is sampled on thickness {thick}, expected a centred slab of thickness {rho}"
        )));
    }
    let target = rescaled_grid(g, 1.0)?;
    let mut v = NodalField::zeros(target);
    v.copy_breaks_from(u);
    for node in 0..g.num_nodes() {
        let src = u.value(node);
        let dst = v.value_mut(node);
        dst.copy_from_slice(src);
        dst[n - 1] *= rho;
    }
    Ok(v)
}

/// Inverse of [`rescale_displacement`].
pub fn unrescale_displacement(v: &NodalField, rho: f64) -> Result<NodalField> {
    if !(rho > 0.0) {
        return Err(Error::param("rho must be positive"));
    }
    let g = v.grid();
    let n = g.dim();
    let target = rescaled_grid(g, rho)?;
    let mut u = NodalField::zeros(target);
    u.copy_breaks_from(v);
    for node in 0..g.num_nodes() {
        let dst = u.value_mut(node);
        dst.copy_from_slice(v.value(node));
        dst[n - 1] /= rho;
    }
    Ok(u)
}

fn rescaled_grid(g: &BoxGrid, thickness: f64) -> Result<BoxGrid> {
    let n = g.dim();
    BoxGrid::plate_with_thickness(&g.lo()[..n - 1], &g.hi()[..n - 1], &g.cells()[..n - 1], g.cells()[n - 1], thickness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, dim: usize) -> SymMatrix {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, rng.random_range(-2.0..2.0));
            }
        }
        m
    }

    /// Jacobi eigenvalues of a symmetric 3x3 (or smaller) matrix.
    fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
        m.clone().symmetric_eigen().eigenvalues.iter().copied().collect()
    }

    #[test]
    fn lame_validation() {
        assert!(validate_lame(&LameParams { lambda: 1.0, mu: 1.0, n: 2 }));
        assert!(!validate_lame(&LameParams { lambda: -1.0, mu: 1.0, n: 3 }));
        assert!(!validate_lame(&LameParams { lambda: 0.0, mu: 0.0, n: 2 }));
        assert!(LameParams::new(0.0, 0.0, 2).is_err());
    }

    #[test]
    fn apply_c_identity_and_zero() {
        let p = LameParams::new(1.0, 1.0, 2).unwrap();
        let ce = apply_c(&p, &SymMatrix::identity(2)).unwrap();
        assert_eq!(ce, SymMatrix::identity(2).scaled(4.0));
        assert_eq!(apply_c(&p, &SymMatrix::zeros(2)).unwrap(), SymMatrix::zeros(2));
        assert!(apply_c(&p, &SymMatrix::identity(3)).is_err());
    }

    #[test]
    fn c_is_positive_definite_by_eigen_decomposition() {
        // C acting on the 6-dimensional space of symmetric 3x3 matrices, written
        // in an orthonormal basis; its spectrum is {2mu (x5), 2mu + 3 lambda}.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mu = rng.random_range(0.1..3.0);
            let lambda = rng.random_range(-0.6 * mu..3.0);
            let p = LameParams::new(lambda, mu, 3).unwrap();
            let mut basis = Vec::new();
            for i in 0..3 {
                for j in i..3 {
                    let mut b = SymMatrix::zeros(3);
                    let s = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
                    b.set(i, j, s);
                    basis.push(b);
                }
            }
            let m = DMatrix::from_fn(6, 6, |a, b| apply_c(&p, &basis[a]).unwrap().dot(&basis[b]));
            let min_eig = sym_eigenvalues(&m).into_iter().fold(f64::INFINITY, f64::min);
            assert!(min_eig > 0.0);
            assert_relative_eq!(min_eig, p.coercivity(), max_relative = 1e-10);
            let e = random_sym(&mut rng, 3);
            assert!(apply_c(&p, &e).unwrap().dot(&e) > 0.0);
        }
    }

    #[test]
    fn quadratic_form_matches_double_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = LameParams::new(1.0, 1.0, 2).unwrap();
        assert_eq!(quadratic_form_c(&p, &SymMatrix::identity(2)).unwrap(), 8.0);
        assert_eq!(quadratic_form_c(&p, &SymMatrix::zeros(2)).unwrap(), 0.0);
        for _ in 0..100 {
            let n = rng.random_range(2..=3);
            let p = LameParams::new(rng.random_range(-0.3..2.0), rng.random_range(0.5..2.0), n).unwrap();
            let e = random_sym(&mut rng, n);
            let q = quadratic_form_c(&p, &e).unwrap();
            let dc = apply_c(&p, &e).unwrap().dot(&e);
            assert!((q - dc).abs() <= 1e-12 * dc.abs().max(1e-300));
        }
    }

    #[test]
    fn reduced_tensor_examples() {
        let p = LameParams::new(1.0, 1.0, 3).unwrap();
        assert_eq!(quadratic_form_c0(&p, &SymMatrix::zeros(2)).unwrap(), 0.0);
        assert_relative_eq!(quadratic_form_c0(&p, &SymMatrix::identity(2)).unwrap(), 20.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(quadratic_form_c0(&p, &SymMatrix::diag(&[1.0, -1.0])).unwrap(), 4.0, max_relative = 1e-14);

        let (v, xi) = reduced_min_oracle(&p, &SymMatrix::zeros(2)).unwrap();
        assert_eq!(v, 0.0);
        assert!(xi.iter().all(|x| x.abs() < 1e-15));

        let (v, xi) = reduced_min_oracle(&p, &SymMatrix::identity(2)).unwrap();
        assert_relative_eq!(v, 20.0 / 3.0, max_relative = 1e-12);
        assert!(xi[0].abs() < 1e-14 && xi[1].abs() < 1e-14);
        assert_relative_eq!(xi[2], -2.0 / 3.0, max_relative = 1e-12);

        let (v, xi) = reduced_min_oracle(&p, &SymMatrix::diag(&[1.0, -1.0])).unwrap();
        assert_relative_eq!(v, 4.0, max_relative = 1e-12);
        assert!(xi.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn reduced_oracle_rejects_invalid_lame() {
        let p = LameParams { lambda: -1.0, mu: 1.0, n: 3 };
        assert!(reduced_min_oracle(&p, &SymMatrix::identity(2)).is_err());
    }

    #[test]
    fn phi_rho_examples() {
        assert_relative_eq!(phi_rho(0.5, &[0.0, 1.0]), 2.0);
        assert_relative_eq!(phi_rho(0.01, &[0.6, 0.0, 0.0]), 0.6);
        assert_relative_eq!(phi_rho(1e-3, &[1.0, 0.0]), 1.0);
        assert_relative_eq!(phi_rho(0.2, &[0.6, 0.8]), (0.36f64 + 16.0).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(phi_rho(0.2, &[0.6, 0.8]), 4.04475, max_relative = 1e-5);
    }

    #[test]
    fn rescale_strain_examples() {
        let rho = 0.1;
        let e = SymMatrix::diag(&[1.0, 1.0, 0.0]);
        assert_eq!(rescale_strain(&e, 0.37).unwrap(), e);
        let mut e = SymMatrix::zeros(3);
        e.set(0, 2, rho);
        assert_relative_eq!(rescale_strain(&e, rho).unwrap().get(0, 2), 1.0);
        let mut e = SymMatrix::zeros(2);
        e.set(1, 1, rho * rho);
        assert_relative_eq!(rescale_strain(&e, rho).unwrap().get(1, 1), 1.0, max_relative = 1e-14);
        assert!(rescale_strain(&e, 0.0).is_err());
    }

    #[test]
    fn rescale_displacement_examples() {
        let rho = 0.5;
        let g = BoxGrid::plate_with_thickness(&[0.0], &[1.0], &[4], 4, rho).unwrap();
        let zero = NodalField::zeros(g.clone());
        let v = rescale_displacement(&zero, rho).unwrap();
        assert!(v.values().iter().all(|&x| x == 0.0));

        let u = NodalField::from_fn(g.clone(), |x| vec![x[0], 0.0]);
        let v = rescale_displacement(&u, rho).unwrap();
        for node in 0..v.grid().num_nodes() {
            let x = v.grid().node_coord(node);
            assert_relative_eq!(v.value(node)[0], x[0]);
            assert_eq!(v.value(node)[1], 0.0);
        }

        // u = (0, x_n) on the thin slab: v_n(x) = rho * (rho x_n) = 0.25 x_n
        let u = NodalField::from_fn(g.clone(), |x| vec![0.0, x[1]]);
        let v = rescale_displacement(&u, rho).unwrap();
        for node in 0..v.grid().num_nodes() {
            let x = v.grid().node_coord(node);
            assert_relative_eq!(v.value(node)[1], 0.25 * x[1], epsilon = 1e-15);
        }
        let back = unrescale_displacement(&v, rho).unwrap();
        assert!(back.max_abs_diff(&u) < 1e-15);
        assert_eq!(back.grid(), u.grid());

        let wrong = BoxGrid::plate_with_thickness(&[0.0], &[1.0], &[4], 4, 0.3).unwrap();
        assert!(rescale_displacement(&NodalField::zeros(wrong), rho).is_err());
    }
}
