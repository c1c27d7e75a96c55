use serde::Serialize;

use super::hamiltonian::{hamiltonian_from, stable_eigenbasis_of, StableEigenbasis};
use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::model::LtiSystem;

#[derive(Debug, Clone)]
pub struct AreSolution {
    pub x: RMat,
    pub k: RMat,
    /// ‖AᵀX + XA + Q − XGX‖_F
    pub residual_norm: f64,
    /// residual_norm / (‖Q‖_F + ‖XGX‖_F)
    pub relative_residual: f64,
    /// max Re λ(A − GX)
    pub spectral_abscissa: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AreReport {
    pub residual_norm: f64,
    pub relative_residual: f64,
    pub spectral_abscissa: f64,
}

impl AreSolution {
    pub fn report(&self) -> AreReport {
        AreReport {
            residual_norm: self.residual_norm,
            relative_residual: self.relative_residual,
            spectral_abscissa: self.spectral_abscissa,
        }
    }
}

/// Residual AᵀX + XA + Q − XGX and its relative size.
pub fn are_residual(a: &RMat, g: &RMat, q: &RMat, x: &RMat) -> (RMat, f64) {
    let xgx = x * g * x;
    let res = a.transpose() * x + x * a + q - &xgx;
    let denom = (q.norm_l2() + xgx.norm_l2()).max(f64::MIN_POSITIVE);
    let rel = res.norm_l2() / denom;
    (res, rel)
}

/// Stabilizing solution of the full-order ARE.
pub fn solve_are_full(sys: &LtiSystem) -> Result<AreSolution> {
    let g = sys.g();
    let (x, _) = solve_are_parts(&sys.a, &g, &sys.q)?;
    finish(sys, &g, x)
}

/// Same as [`solve_are_full`] but also returns the stable eigenbasis it used.
pub fn solve_are_with_basis(sys: &LtiSystem) -> Result<(AreSolution, StableEigenbasis)> {
    let g = sys.g();
    let (x, basis) = solve_are_parts(&sys.a, &g, &sys.q)?;
    Ok((finish(sys, &g, x)?, basis))
}

fn finish(sys: &LtiSystem, g: &RMat, x: RMat) -> Result<AreSolution> {
    let (x, steps) = polish(&sys.a, g, &sys.q, x)?;
    let k = linalg::solve(sys.r.as_ref(), (sys.b.transpose() * &x).as_ref());
    let (res, rel) = are_residual(&sys.a, g, &sys.q, &x);
    let abscissa = linalg::spectral_abscissa((&sys.a - g * &x).as_ref())?;
    if abscissa >= 0.0 {
        return Err(Error::NoStabilizingSolution(format!(
            "closed loop A - GX has spectral abscissa {abscissa:.3e}"
        )));
    }
    Ok(AreSolution {
        x,
        k,
        residual_norm: res.norm_l2(),
        relative_residual: rel,
        spectral_abscissa: abscissa,
        newton_steps: steps,
    })
}

/// X = Z Y⁻¹ from the stable invariant subspace of H, for arbitrary (A, G, Q).
pub fn solve_are_parts(a: &RMat, g: &RMat, q: &RMat) -> Result<(RMat, StableEigenbasis)> {
    let n = a.nrows();
    if n == 0 {
        return Err(Error::invalid("empty system"));
    }
    let h = hamiltonian_from(a, g, q);
    let basis = stable_eigenbasis_of(&h)?;
    let condition = linalg::cond_complex(basis.y.as_ref())?;
    if !(condition < 1e13) {
        return Err(Error::IllConditioned { condition });
    }
    let z = basis.z.as_ref().expect("dense basis keeps Z");
    let xc = z * &basis.omega;
    let imag = linalg::max_imag(xc.as_ref());
    let x = linalg::real_part(xc.as_ref());
    if imag > 1e-6 * x.norm_l2().max(1.0) {
        return Err(Error::numerical(format!(
            "ARE solution has imaginary part {imag:.3e}"
        )));
    }
    Ok((linalg::symmetrize(x.as_ref()), basis))
}

/// Up to two Newton–Kleinman refinement steps, accepted only when they reduce the residual.
fn polish(a: &RMat, g: &RMat, q: &RMat, mut x: RMat) -> Result<(RMat, usize)> {
    let (_, mut rel) = are_residual(a, g, q, &x);
    let mut steps = 0;
    for _ in 0..2 {
        if rel <= 1e-13 {
            break;
        }
        let acl = a - g * &x;
        let rhs = q + &x * g * &x;
        let Ok(x2) = linalg::lyapunov(acl.transpose(), rhs.as_ref()) else {
            break;
        };
        let (_, rel2) = are_residual(a, g, q, &x2);
        if !(rel2 < rel) {
            break;
        }
        x = x2;
        rel = rel2;
        steps += 1;
    }
    Ok((x, steps))
}

/// Solves the reduced-order ARE for given (Ã, G̃, Q̃); used after projection.
pub fn solve_are_matrices(a: &RMat, g: &RMat, q: &RMat) -> Result<(RMat, f64)> {
    let (x, _) = solve_are_parts(a, g, q)?;
    let (x, _) = polish(a, g, q, x)?;
    let (_, rel) = are_residual(a, g, q, &x);
    Ok((x, rel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::Mat;

    fn scalar(a: f64, b: f64, q: f64, r: f64) -> LtiSystem {
        let m = |v: f64| Mat::from_fn(1, 1, |_, _| v);
        LtiSystem::new(m(a), m(b), m(1.0), m(q), m(r)).unwrap()
    }

    #[test]
    fn scalar_stable() {
        let s = solve_are_full(&scalar(-1.0, 1.0, 1.0, 1.0)).unwrap();
        assert!((s.x[(0, 0)] - (2f64.sqrt() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn scalar_integrator() {
        let s = solve_are_full(&scalar(0.0, 1.0, 1.0, 1.0)).unwrap();
        assert!((s.x[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((s.spectral_abscissa + 1.0).abs() < 1e-12);
    }

    #[test]
    fn unstabilizable_rejected() {
        assert!(solve_are_full(&scalar(1.0, 0.0, 1.0, 1.0)).is_err());
    }
}
