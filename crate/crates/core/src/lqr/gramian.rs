use faer::{c64, Mat};

use super::hamiltonian::StableEigenbasis;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GramianSource {
    Exact,
    LowRank,
}

/// Φ = factor·factorᵀ together with the modal data that produced it.
#[derive(Debug, Clone)]
pub struct GramianFactor {
    pub factor: RMat,
    pub source: GramianSource,
    pub lambda: Vec<c64>,
    /// (Ω B_d B_dᵀ Ω*) ∘ 𝓒, the Hermitian inner matrix before realification.
    pub cauchy_block: CMat,
}

impl GramianFactor {
    pub fn n(&self) -> usize {
        self.factor.nrows()
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    /// Φ as a dense matrix (diagnostics and small problems only).
    pub fn dense(&self) -> RMat {
        linalg::symmetrize((&self.factor * self.factor.transpose()).as_ref())
    }

    pub fn trace(&self) -> f64 {
        let f = self.factor.norm_l2();
        f * f
    }
}

/// 𝓒_ij = −1/(λ_i + λ̄_j)
pub fn cauchy_matrix(lambda: &[c64]) -> CMat {
    let k = lambda.len();
    Mat::from_fn(k, k, |i, j| -c64::new(1.0, 0.0) / (lambda[i] + lambda[j].conj()))
}

/// Gramian factor from a stable eigenbasis: Y (Ω B_d B_dᵀ Ω* ∘ 𝓒) Y*, realified
/// over conjugate pairs and factored.
pub fn gramian_from_basis(basis: &StableEigenbasis, bd: &RMat) -> Result<GramianFactor> {
    let k = basis.kappa();
    if basis.y.nrows() != bd.nrows() {
        return Err(Error::Dimension("B_d rows differ from state dimension".into()));
    }
    let s = &basis.omega * linalg::to_complex(bd.as_ref());
    let sst = &s * s.adjoint();
    let c = cauchy_matrix(&basis.lambda);
    let inner = Mat::from_fn(k, k, |i, j| sst[(i, j)] * c[(i, j)]);

    let (t, t_inv) = realify_transform(&basis.lambda);
    let n_c = &t * &inner * t.adjoint();
    let scale = n_c.norm_l2().max(f64::MIN_POSITIVE);
    let imag = linalg::max_imag(n_c.as_ref());
    if imag > 1e-8 * scale {
        return Err(Error::numerical(format!(
            "realified Cauchy block has imaginary part {imag:.3e}; eigenvalue pairing is inconsistent"
        )));
    }
    let n_r = linalg::symmetrize(linalg::real_part(n_c.as_ref()).as_ref());
    let yr_c = &basis.y * &t_inv;
    let yr = linalg::real_part(yr_c.as_ref());
    let inner_factor = linalg::psd_factor(n_r.as_ref(), 1e-10).map_err(|_| {
        Error::numerical("Cauchy inner matrix is indefinite beyond tolerance")
    })?;
    let factor = &yr * inner_factor;
    Ok(GramianFactor {
        factor,
        source: if basis.complete { GramianSource::Exact } else { GramianSource::LowRank },
        lambda: basis.lambda.clone(),
        cauchy_block: inner,
    })
}

/// Exact closed-loop Gramian from the full stable eigenbasis.
pub fn closed_loop_gramian(basis: &StableEigenbasis, bd: &RMat) -> Result<GramianFactor> {
    if !basis.complete {
        return Err(Error::invalid("closed_loop_gramian needs the full stable eigenbasis"));
    }
    gramian_from_basis(basis, bd)
}

/// Block-diagonal T with Y = Y_r T: identity for real λ and [[1,1],[i,−i]] for a pair.
fn realify_transform(lambda: &[c64]) -> (CMat, CMat) {
    let k = lambda.len();
    let mut t = Mat::<c64>::zeros(k, k);
    let mut ti = Mat::<c64>::zeros(k, k);
    let one = c64::new(1.0, 0.0);
    let i1 = c64::new(0.0, 1.0);
    let mut j = 0;
    while j < k {
        let l = lambda[j];
        let paired = l.im.abs() > 1e-10 * l.norm()
            && j + 1 < k
            && (lambda[j + 1] - l.conj()).norm() <= 1e-8 * l.norm().max(1.0);
        if paired {
            t[(j, j)] = one;
            t[(j, j + 1)] = one;
            t[(j + 1, j)] = i1;
            t[(j + 1, j + 1)] = -i1;
            ti[(j, j)] = one * 0.5;
            ti[(j, j + 1)] = -i1 * 0.5;
            ti[(j + 1, j)] = one * 0.5;
            ti[(j + 1, j + 1)] = i1 * 0.5;
            j += 2;
        } else {
            t[(j, j)] = one;
            ti[(j, j)] = one;
            j += 1;
        }
    }
    (t, ti)
}

/// Φ from a Lyapunov solve, A_cl Φ + Φ A_clᵀ + B_d B_dᵀ = 0.
pub fn gramian_lyapunov(acl: &RMat, bd: &RMat) -> Result<RMat> {
    let bb = bd * bd.transpose();
    linalg::lyapunov(acl.as_ref(), bb.as_ref())
}

/// ‖A_cl Φ + Φ A_clᵀ + B_d B_dᵀ‖_F / ‖B_d B_dᵀ‖_F
pub fn lyapunov_residual(acl: &RMat, phi: &RMat, bd: &RMat) -> f64 {
    let bb = bd * bd.transpose();
    let r = acl * phi + phi * acl.transpose() + &bb;
    r.norm_l2() / bb.norm_l2().max(f64::MIN_POSITIVE)
}
