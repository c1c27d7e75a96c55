//! Dense linear-algebra helpers on top of faer.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

pub type RMat = Mat<f64>;
pub type CMat = Mat<c64>;

pub fn to_complex(a: MatRef<'_, f64>) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0))
}

pub fn real_part(a: MatRef<'_, c64>) -> RMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].re)
}

pub fn max_imag(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].im.abs());
        }
    }
    m
}

/// (A + Aᵀ)/2
pub fn symmetrize(a: MatRef<'_, f64>) -> RMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

pub fn is_symmetric(a: MatRef<'_, f64>, rel_tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = a.norm_l2().max(f64::MIN_POSITIVE);
    let mut d = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..j {
            d = d.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    d <= rel_tol * scale
}

pub fn fro(a: MatRef<'_, f64>) -> f64 {
    a.norm_l2()
}

pub fn trace(a: MatRef<'_, f64>) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn diag(d: &[f64]) -> RMat {
    let n = d.len();
    Mat::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 })
}

pub fn scaled_identity(n: usize, c: f64) -> RMat {
    Mat::from_fn(n, n, |i, j| if i == j { c } else { 0.0 })
}

/// Singular values in descending order.
pub fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    a.singular_values()
        .map_err(|e| Error::numerical(format!("svd failed: {e:?}")))
}

pub fn sigma_max(a: MatRef<'_, f64>) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Smallest singular value of a square (or the min(m,n)-th of a rectangular) matrix.
pub fn sigma_min(a: MatRef<'_, f64>) -> Result<f64> {
    Ok(singular_values(a)?.last().copied().unwrap_or(0.0))
}

pub fn cond(a: MatRef<'_, f64>) -> Result<f64> {
    let s = singular_values(a)?;
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => Ok(hi / lo),
        (Some(_), Some(_)) => Ok(f64::INFINITY),
        _ => Ok(1.0),
    }
}

pub fn cond_complex(a: MatRef<'_, c64>) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(1.0);
    }
    let s = a
        .singular_values()
        .map_err(|e| Error::numerical(format!("svd failed: {e:?}")))?;
    let hi = s[0];
    let lo = *s.last().unwrap();
    Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

/// Symmetric eigendecomposition, eigenvalues ascending.
pub fn sym_eig(a: MatRef<'_, f64>) -> Result<(Vec<f64>, RMat)> {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::numerical(format!("symmetric eigensolve failed: {e:?}")))?;
    let vals = e.S().column_vector().iter().copied().collect();
    Ok((vals, e.U().to_owned()))
}

pub fn sym_eigvals(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::numerical(format!("symmetric eigensolve failed: {e:?}")))
}

/// General eigendecomposition. Conjugate eigenvalues have conjugate eigenvectors.
pub fn eig(a: MatRef<'_, f64>) -> Result<(Vec<c64>, CMat)> {
    let e = a
        .eigen()
        .map_err(|e| Error::numerical(format!("eigensolve failed: {e:?}")))?;
    let vals = e.S().column_vector().iter().copied().collect();
    Ok((vals, e.U().to_owned()))
}

pub fn eigvals(a: MatRef<'_, f64>) -> Result<Vec<c64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    a.eigenvalues()
        .map_err(|e| Error::numerical(format!("eigensolve failed: {e:?}")))
}

/// max Re λ(A); −∞ for an empty matrix.
pub fn spectral_abscissa(a: MatRef<'_, f64>) -> Result<f64> {
    Ok(eigvals(a)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn solve(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> RMat {
    a.partial_piv_lu().solve(b)
}

pub fn inverse(a: MatRef<'_, f64>) -> RMat {
    a.partial_piv_lu().inverse()
}

pub fn inverse_complex(a: MatRef<'_, c64>) -> CMat {
    a.partial_piv_lu().inverse()
}

pub fn pinv(a: MatRef<'_, f64>) -> Result<RMat> {
    let svd = a
        .thin_svd()
        .map_err(|e| Error::numerical(format!("svd failed: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    let tol = pinv_tol(a.nrows(), a.ncols(), s.iter().copied());
    let k = s.nrows();
    let vs = Mat::from_fn(v.nrows(), k, |i, j| if s[j] > tol { v[(i, j)] / s[j] } else { 0.0 });
    Ok(vs * u.transpose())
}

fn pinv_tol(m: usize, n: usize, s: impl Iterator<Item = f64>) -> f64 {
    let hi = s.fold(0.0f64, f64::max);
    (m.max(n) as f64) * f64::EPSILON * hi
}

pub fn pinv_complex(a: MatRef<'_, c64>) -> Result<CMat> {
    let svd = a
        .thin_svd()
        .map_err(|e| Error::numerical(format!("svd failed: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    let tol = pinv_tol(a.nrows(), a.ncols(), s.iter().map(|x| x.re));
    let k = s.nrows();
    let vs = Mat::from_fn(v.nrows(), k, |i, j| {
        if s[j].re > tol {
            v[(i, j)] / s[j].re
        } else {
            c64::new(0.0, 0.0)
        }
    });
    Ok(vs * u.adjoint())
}

/// Numerical rank with threshold max(m,n)·eps·σ̄.
pub fn rank(a: MatRef<'_, f64>) -> Result<usize> {
    let s = singular_values(a)?;
    let Some(&hi) = s.first() else { return Ok(0) };
    let tol = (a.nrows().max(a.ncols()) as f64) * f64::EPSILON * hi;
    Ok(s.iter().filter(|&&x| x > tol).count())
}

pub fn rank_complex(a: MatRef<'_, c64>) -> Result<usize> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0);
    }
    let s = a
        .singular_values()
        .map_err(|e| Error::numerical(format!("svd failed: {e:?}")))?;
    let hi = s[0];
    let tol = (a.nrows().max(a.ncols()) as f64) * f64::EPSILON * hi;
    Ok(s.iter().filter(|&&x| x > tol).count())
}

pub fn cholesky_lower(a: MatRef<'_, f64>) -> Option<RMat> {
    a.llt(Side::Lower).ok().map(|l| l.L().to_owned())
}

/// Returns F with F Fᵀ = A for symmetric PSD A. Cholesky first; falls back to an
/// eigenvalue square root with negative eigenvalues clamped when they are no
/// worse than `-neg_tol·max(1, λ̄)`.
pub fn psd_factor(a: MatRef<'_, f64>, neg_tol: f64) -> Result<RMat> {
    let s = symmetrize(a);
    if let Some(l) = cholesky_lower(s.as_ref()) {
        if l.as_ref().norm_l2().is_finite() {
            return Ok(l);
        }
    }
    let (vals, vecs) = sym_eig(s.as_ref())?;
    let top = vals.last().copied().unwrap_or(0.0).abs().max(1.0);
    let lo = vals.first().copied().unwrap_or(0.0);
    if lo < -neg_tol * top {
        return Err(Error::numerical(format!(
            "matrix expected PSD has eigenvalue {lo:.3e} (scale {top:.3e})"
        )));
    }
    let n = vals.len();
    Ok(Mat::from_fn(n, n, |i, j| vecs[(i, j)] * vals[j].max(0.0).sqrt()))
}

/// Eigen-split of a diagonalizable square matrix, reused across Sylvester solves.
pub struct Diag {
    vals: Vec<c64>,
    v: CMat,
    vinv: CMat,
}

impl Diag {
    pub fn new(a: MatRef<'_, f64>) -> Result<Self> {
        if is_symmetric(a, 1e-14) {
            let (vals, v) = sym_eig(symmetrize(a).as_ref())?;
            let vc = to_complex(v.as_ref());
            let vinv = Mat::from_fn(vc.ncols(), vc.nrows(), |i, j| vc[(j, i)]);
            return Ok(Diag {
                vals: vals.into_iter().map(|x| c64::new(x, 0.0)).collect(),
                v: vc,
                vinv,
            });
        }
        let (vals, v) = eig(a)?;
        let vinv = inverse_complex(v.as_ref());
        if !vinv.as_ref().norm_l2().is_finite() {
            return Err(Error::IllConditioned {
                condition: f64::INFINITY,
            });
        }
        Ok(Diag { vals, v, vinv })
    }

    pub fn eigenvalues(&self) -> &[c64] {
        &self.vals
    }
}

/// Solves a1·X + X·a2ᵀ + C = 0 by diagonalization with iterative refinement.
pub fn sylvester(a1: MatRef<'_, f64>, a2: MatRef<'_, f64>, c: MatRef<'_, f64>) -> Result<RMat> {
    let d1 = Diag::new(a1)?;
    let d2 = Diag::new(a2)?;
    sylvester_with(&d1, &d2, a1, a2, c)
}

/// Solves A·X + X·Aᵀ + C = 0.
pub fn lyapunov(a: MatRef<'_, f64>, c: MatRef<'_, f64>) -> Result<RMat> {
    let d = Diag::new(a)?;
    let x = sylvester_with(&d, &d, a, a, c)?;
    Ok(symmetrize(x.as_ref()))
}

pub fn sylvester_with(
    d1: &Diag,
    d2: &Diag,
    a1: MatRef<'_, f64>,
    a2: MatRef<'_, f64>,
    c: MatRef<'_, f64>,
) -> Result<RMat> {
    let (n1, n2) = (a1.nrows(), a2.nrows());
    if c.nrows() != n1 || c.ncols() != n2 {
        return Err(Error::Dimension(format!(
            "sylvester rhs is {}x{}, expected {n1}x{n2}",
            c.nrows(),
            c.ncols()
        )));
    }
    let scale = d1
        .vals
        .iter()
        .chain(d2.vals.iter())
        .map(|l| l.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for l1 in &d1.vals {
        for l2 in &d2.vals {
            if (l1 + l2).norm() <= 1e-13 * scale {
                return Err(Error::numerical(
                    "sylvester operator is singular (λ_i + μ_j ≈ 0)",
                ));
            }
        }
    }
    let core = |rhs: MatRef<'_, f64>| -> RMat {
        let ct = &d1.vinv * to_complex(rhs) * d2.vinv.transpose();
        let y = Mat::from_fn(n1, n2, |i, j| -ct[(i, j)] / (d1.vals[i] + d2.vals[j]));
        real_part((&d1.v * y * d2.v.transpose()).as_ref())
    };
    let resid = |x: &RMat| -> RMat { a1 * x + x * a2.transpose() + c };
    let mut x = core(c);
    let mut r = resid(&x);
    let mut rn = r.norm_l2();
    for _ in 0..3 {
        if rn <= 1e-15 * c.norm_l2() {
            break;
        }
        let x2 = &x + core(r.as_ref());
        let r2 = resid(&x2);
        let rn2 = r2.norm_l2();
        if rn2 >= rn {
            break;
        }
        x = x2;
        r = r2;
        rn = rn2;
    }
    Ok(x)
}

/// Kronecker product.
pub fn kron(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> RMat {
    let (p, q) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * p, a.ncols() * q, |i, j| {
        a[(i / p, j / q)] * b[(i % p, j % q)]
    })
}

pub fn select_rows(a: MatRef<'_, f64>, rows: &[usize]) -> RMat {
    Mat::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

pub fn select_block(a: MatRef<'_, f64>, rows: &[usize], cols: &[usize]) -> RMat {
    Mat::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn col_vec(v: &[f64]) -> RMat {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn col_to_vec(a: MatRef<'_, f64>, j: usize) -> Vec<f64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Flip sign so the largest-magnitude entry is positive (first index wins ties).
pub fn sign_normalize(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kron_lyap_oracle(a: &RMat, c: &RMat) -> RMat {
        // vec(AX + XAᵀ) = (I⊗A + A⊗I) vec(X)
        let n = a.nrows();
        let id = scaled_identity(n, 1.0);
        let op = kron(id.as_ref(), a.as_ref()) + kron(a.as_ref(), id.as_ref());
        let rhs = Mat::from_fn(n * n, 1, |k, _| -c[(k % n, k / n)]);
        let x = solve(op.as_ref(), rhs.as_ref());
        Mat::from_fn(n, n, |i, j| x[(i + n * j, 0)])
    }

    #[test]
    fn scalar_lyapunov() {
        let a = scaled_identity(1, -1.0);
        let c = scaled_identity(1, 1.0);
        let x = lyapunov(a.as_ref(), c.as_ref()).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_matches_kronecker() {
        let a = Mat::from_fn(5, 5, |i, j| {
            if i == j {
                -3.0 - i as f64
            } else {
                ((i * 3 + j * 7) % 5) as f64 * 0.3 - 0.6
            }
        });
        let b = Mat::from_fn(5, 2, |i, j| (i + j) as f64 * 0.2 - 0.3);
        let c = &b * b.transpose();
        let x = lyapunov(a.as_ref(), c.as_ref()).unwrap();
        let o = kron_lyap_oracle(&a, &c);
        assert!((&x - &o).norm_l2() <= 1e-10 * o.norm_l2());
    }

    #[test]
    fn sylvester_rectangular() {
        let a1 = Mat::from_fn(3, 3, |i, j| if i == j { -1.0 - i as f64 } else { 0.1 });
        let a2 = Mat::from_fn(2, 2, |i, j| if i == j { -2.0 } else { 0.5 * j as f64 });
        let c = Mat::from_fn(3, 2, |i, j| (i as f64) - (j as f64));
        let x = sylvester(a1.as_ref(), a2.as_ref(), c.as_ref()).unwrap();
        let r = &a1 * &x + &x * a2.transpose() + &c;
        assert!(r.norm_l2() < 1e-12);
    }

    #[test]
    fn psd_factor_handles_singular() {
        let v = col_vec(&[1.0, 2.0, 3.0]);
        let a = &v * v.transpose();
        let f = psd_factor(a.as_ref(), 1e-10).unwrap();
        assert!((&f * f.transpose() - &a).norm_l2() < 1e-12);
    }

    #[test]
    fn pinv_of_tall_matrix() {
        let a = Mat::from_fn(5, 2, |i, j| (i as f64 + 1.0).powi(j as i32 + 1));
        let p = pinv(a.as_ref()).unwrap();
        let pa = &p * &a;
        assert!((pa - scaled_identity(2, 1.0)).norm_l2() < 1e-12);
        let c = to_complex(a.as_ref());
        let pc = pinv_complex(c.as_ref()).unwrap();
        assert!((&pc * &c - to_complex(scaled_identity(2, 1.0).as_ref())).norm_l2() < 1e-12);
    }

    #[test]
    fn sign_normalization() {
        let mut v = vec![0.1, -0.9, 0.3];
        sign_normalize(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.3]);
    }
}
