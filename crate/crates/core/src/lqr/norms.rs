use faer::linalg::solvers::Solve;
use faer::{c64, Mat};
use serde::Serialize;

use super::gramian::gramian_lyapunov;
use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::model::LtiSystem;

fn require_hurwitz(a: &RMat, which: &str) -> Result<f64> {
    let abscissa = linalg::spectral_abscissa(a.as_ref())?;
    if !(abscissa < 0.0) {
        return Err(Error::Instability(format!(
            "{which} has spectral abscissa {abscissa:.3e}"
        )));
    }
    Ok(abscissa)
}

/// ‖(sI − A)⁻¹B‖_{H₂}
pub fn h2_norm(a: &RMat, b: &RMat) -> Result<f64> {
    require_hurwitz(a, "A_cl")?;
    let p = gramian_lyapunov(a, b)?;
    Ok(linalg::trace(p.as_ref()).max(0.0).sqrt())
}

/// σ̄(C (jωI − A)⁻¹ B)
pub fn freq_gain(a: &RMat, b: &RMat, c: &RMat, omega: f64) -> Result<f64> {
    let n = a.nrows();
    let m = Mat::from_fn(n, n, |i, j| {
        let v = c64::new(-a[(i, j)], 0.0);
        if i == j {
            v + c64::new(0.0, omega)
        } else {
            v
        }
    });
    let x = m.partial_piv_lu().solve(linalg::to_complex(b.as_ref()));
    let g = linalg::to_complex(c.as_ref()) * x;
    let s = g
        .singular_values()
        .map_err(|e| Error::numerical(format!("svd failed: {e:?}")))?;
    Ok(s.first().copied().unwrap_or(0.0))
}

/// ‖C (sI − A)⁻¹ B‖_{H∞} by bisection on the imaginary-axis eigenvalues of
/// [[A, BBᵀ/γ²], [−CᵀC, −Aᵀ]]. Returns the upper end of the final bracket.
pub fn hinf_norm(a: &RMat, b: &RMat, c: &RMat) -> Result<f64> {
    require_hurwitz(a, "A")?;
    let n = a.nrows();
    let poles = linalg::eigvals(a.as_ref())?;
    let mut lo = freq_gain(a, b, c, 0.0)?;
    for p in &poles {
        for w in [p.norm(), p.im.abs()] {
            if w > 0.0 {
                lo = lo.max(freq_gain(a, b, c, w)?);
            }
        }
    }
    if lo == 0.0 {
        return Ok(0.0);
    }
    let bb = b * b.transpose();
    let cc = c.transpose() * c;
    // imaginary-axis eigenvalue frequencies of the γ-Hamiltonian
    let crossings = |gamma: f64| -> Result<Vec<f64>> {
        let inv = 1.0 / (gamma * gamma);
        let h = Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => a[(i, j)],
            (true, false) => bb[(i, j - n)] * inv,
            (false, true) => -cc[(i - n, j)],
            (false, false) => -a[(j - n, i - n)],
        });
        let scale = h.norm_l2().max(1.0);
        Ok(linalg::eigvals(h.as_ref())?
            .into_iter()
            .filter(|l| l.re.abs() <= 1e-8 * scale.max(l.norm()))
            .map(|l| l.im.abs())
            .collect())
    };
    let mut hi = 2.0 * lo;
    for _ in 0..60 {
        if crossings(hi)?.is_empty() {
            break;
        }
        lo = lo.max(hi);
        hi *= 2.0;
    }
    while hi - lo > 1e-4 * lo {
        let mid = 0.5 * (lo + hi);
        let ws = crossings(mid)?;
        if ws.is_empty() {
            hi = mid;
        } else {
            lo = mid;
            for w in ws {
                lo = lo.max(freq_gain(a, b, c, w)?);
            }
            hi = hi.max(lo);
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MatchingError {
    /// ‖g − ĝ‖_{H₂}
    pub abs: f64,
    /// ‖g‖_{H₂}
    pub full_norm: f64,
    pub rel: f64,
}

/// ‖g − ĝ‖_{H₂} for u = −Kx versus u = −K̂x with disturbance input B_d.
///
/// Uses the cascade realization g − ĝ = (sI − Â)⁻¹ B(K̂ − K)(sI − A_cl)⁻¹ B_d,
/// which avoids the cancellation of differencing two nearly equal Gramians.
pub fn model_matching_error(sys: &LtiSystem, k_full: &RMat, k_hat: &RMat) -> Result<MatchingError> {
    let acl = sys.closed_loop(k_full);
    let ahat = sys.closed_loop(k_hat);
    require_hurwitz(&acl, "full-order closed loop A - BK")?;
    require_hurwitz(&ahat, "projected closed loop A - BK_hat")?;
    let phi = gramian_lyapunov(&acl, &sys.bd)?;
    matching_error_with_phi(sys, &acl, &ahat, k_full, k_hat, &phi)
}

pub(crate) fn matching_error_with_phi(
    sys: &LtiSystem,
    acl: &RMat,
    ahat: &RMat,
    k_full: &RMat,
    k_hat: &RMat,
    phi: &RMat,
) -> Result<MatchingError> {
    let coupling = &sys.b * (k_hat - k_full);
    // Â P12 + P12 A_clᵀ + coupling Φ = 0
    let p12 = linalg::sylvester(ahat.as_ref(), acl.as_ref(), (&coupling * phi).as_ref())?;
    let cp = &coupling * p12.transpose();
    let rhs = &cp + cp.transpose();
    let p11 = linalg::lyapunov(ahat.as_ref(), rhs.as_ref())?;
    let abs = linalg::trace(p11.as_ref()).max(0.0).sqrt();
    let full_norm = linalg::trace(phi.as_ref()).max(0.0).sqrt();
    Ok(MatchingError {
        abs,
        full_norm,
        rel: if full_norm > 0.0 { abs / full_norm } else { 0.0 },
    })
}
