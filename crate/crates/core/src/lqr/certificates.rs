use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::model::LtiSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    DirectEig,
    Theorem1,
    Lemma2,
    TheoremA4,
    TheoremA5,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityCertificate {
    pub kind: CertificateKind,
    pub satisfied: bool,
    pub margin: f64,
    pub details: Vec<(String, f64)>,
}

/// Certificate of Lemma 1 form: A + G^{1/2}K_t stable and
/// (A + G^{1/2}K_t)ᵀD_t + D_t(A + G^{1/2}K_t) ⪯ −F.
#[derive(Debug, Clone)]
pub struct BetaCertificate {
    pub k_t: RMat,
    pub d_t: RMat,
    pub f: RMat,
}

fn sym_sqrt(a: &RMat) -> Result<RMat> {
    let (vals, v) = linalg::sym_eig(a.as_ref())?;
    let n = vals.len();
    let s: Vec<f64> = vals.iter().map(|x| x.max(0.0).sqrt()).collect();
    let vs = faer::Mat::from_fn(n, n, |i, j| v[(i, j)] * s[j]);
    Ok(linalg::symmetrize((vs * v.transpose()).as_ref()))
}

/// Upper bound β(A,G,Q) ≥ λ̄(X).
///
/// Without a certificate this uses K_t = −G^{1/2}, D_t = I, F = 2G − A − Aᵀ,
/// which gives λ̄(Q+G)/λ̲(2G − A − Aᵀ) and equals σ̄(Q+G)/(2σ̲(G−A)) for symmetric A.
pub fn beta_bound(a: &RMat, g: &RMat, q: &RMat, cert: Option<&BetaCertificate>) -> Result<f64> {
    let n = a.nrows();
    match cert {
        None => {
            let f = linalg::symmetrize((g * 2.0 - a - a.transpose()).as_ref());
            let fmin = linalg::sym_eigvals(f.as_ref())?[0];
            if !(fmin > 0.0) {
                return Err(Error::InvalidCertificate(format!(
                    "default certificate needs 2G - A - Aᵀ ≻ 0 (λ_min = {fmin:.3e}); supply K_t, D_t, F"
                )));
            }
            let qg = linalg::symmetrize((q + g).as_ref());
            let top = *linalg::sym_eigvals(qg.as_ref())?.last().unwrap();
            Ok(top / fmin)
        }
        Some(c) => {
            if c.k_t.nrows() != n || c.k_t.ncols() != n || c.d_t.nrows() != n || c.f.nrows() != n {
                return Err(Error::Dimension("certificate matrices must be n x n".into()));
            }
            let gh = sym_sqrt(g)?;
            let at = a + &gh * &c.k_t;
            if linalg::spectral_abscissa(at.as_ref())? >= 0.0 {
                return Err(Error::InvalidCertificate("A + G^{1/2}K_t is not Hurwitz".into()));
            }
            let d = linalg::symmetrize(c.d_t.as_ref());
            let f = linalg::symmetrize(c.f.as_ref());
            let dmin = linalg::sym_eigvals(d.as_ref())?[0];
            let fmin = linalg::sym_eigvals(f.as_ref())?[0];
            if !(dmin > 0.0 && fmin > 0.0) {
                return Err(Error::InvalidCertificate("D_t and F must be positive definite".into()));
            }
            let lhs = at.transpose() * &d + &d * &at + &f;
            let lmax = *linalg::sym_eigvals(linalg::symmetrize(lhs.as_ref()).as_ref())?
                .last()
                .unwrap();
            if lmax > 1e-10 * (f.norm_l2() + d.norm_l2()) {
                return Err(Error::InvalidCertificate(format!(
                    "Lyapunov inequality violated by {lmax:.3e}"
                )));
            }
            let dmax = *linalg::sym_eigvals(d.as_ref())?.last().unwrap();
            let num_m = (q + c.k_t.transpose() * &c.k_t) * &d;
            let den_m = &f * &d;
            // products of symmetric PD matrices have real positive spectra
            let num = linalg::eigvals(num_m.as_ref())?
                .iter()
                .map(|l| l.re)
                .fold(f64::NEG_INFINITY, f64::max);
            let den = linalg::eigvals(den_m.as_ref())?
                .iter()
                .map(|l| l.re)
                .fold(f64::INFINITY, f64::min);
            Ok(dmax * num / den)
        }
    }
}

/// max Re λ(A − G X̂) < 0; authoritative.
pub fn direct_eig(sys: &LtiSystem, k_hat: &RMat) -> Result<StabilityCertificate> {
    let abscissa = linalg::spectral_abscissa(sys.closed_loop(k_hat).as_ref())?;
    Ok(StabilityCertificate {
        kind: CertificateKind::DirectEig,
        satisfied: abscissa < 0.0,
        margin: -abscissa,
        details: vec![("spectral_abscissa".into(), abscissa)],
    })
}

/// σ̲(Q) − 2σ̄(X)σ̄(G)σ̄(E) + σ̲(X)²σ̲(G) > 0 with E = X − X̂.
pub fn theorem1(sys: &LtiSystem, x: &RMat, x_hat: &RMat) -> Result<StabilityCertificate> {
    let g = sys.g();
    let e = x - x_hat;
    let sq = linalg::sigma_min(sys.q.as_ref())?;
    let sx = linalg::singular_values(x.as_ref())?;
    let sg = linalg::singular_values(g.as_ref())?;
    let se = linalg::sigma_max(e.as_ref())?;
    let (xmax, xmin) = (sx[0], *sx.last().unwrap());
    let (gmax, gmin) = (sg[0], *sg.last().unwrap());
    let margin = sq - 2.0 * xmax * gmax * se + xmin * xmin * gmin;
    Ok(StabilityCertificate {
        kind: CertificateKind::Theorem1,
        satisfied: margin > 0.0,
        margin,
        details: vec![
            ("sigma_min_q".into(), sq),
            ("sigma_max_x".into(), xmax),
            ("sigma_min_x".into(), xmin),
            ("sigma_max_g".into(), gmax),
            ("sigma_min_g".into(), gmin),
            ("sigma_max_e".into(), se),
        ],
    })
}

/// σ̄(X̃) < σ̲(Q)/(2σ̄(G)β) − β.
pub fn lemma2(sys: &LtiSystem, x_tilde: &RMat, beta: f64) -> Result<StabilityCertificate> {
    let g = sys.g();
    let sq = linalg::sigma_min(sys.q.as_ref())?;
    let gmax = linalg::sigma_max(g.as_ref())?;
    let xt = linalg::sigma_max(x_tilde.as_ref())?;
    let rhs = sq / (2.0 * gmax * beta) - beta;
    let margin = rhs - xt;
    Ok(StabilityCertificate {
        kind: CertificateKind::Lemma2,
        satisfied: margin > 0.0,
        margin,
        details: vec![
            ("sigma_min_q".into(), sq),
            ("sigma_max_g".into(), gmax),
            ("beta".into(), beta),
            ("sigma_max_x_tilde".into(), xt),
        ],
    })
}

/// B square invertible, G = αI, A + Aᵀ ⪯ 0, and P v ≠ 0 for every marginal mode v.
/// `marginal_ok` carries the caller's Assumption-3 screening result.
pub fn theorem_a5(sys: &LtiSystem, marginal_ok: bool) -> Result<StabilityCertificate> {
    let n = sys.n();
    let mut details = Vec::new();
    let square = sys.m() == n;
    let b_rank = if square { linalg::rank(sys.b.as_ref())? } else { 0 };
    let invertible = square && b_rank == n;
    let g = sys.g();
    let alpha = linalg::trace(g.as_ref()) / n as f64;
    let dev = (&g - linalg::scaled_identity(n, alpha)).norm_l2();
    let scalar_g = alpha > 0.0 && dev <= 1e-10 * alpha * (n as f64).sqrt();
    let sym = linalg::symmetrize((&sys.a + sys.a.transpose()).as_ref());
    let top = *linalg::sym_eigvals(sym.as_ref())?.last().unwrap();
    let dissipative = top <= 1e-10 * sys.a.norm_l2().max(1.0);
    details.push(("alpha".into(), alpha));
    details.push(("g_deviation".into(), dev));
    details.push(("max_eig_a_sym".into(), top));
    let ok = invertible && scalar_g && dissipative && marginal_ok;
    Ok(StabilityCertificate {
        kind: CertificateKind::TheoremA5,
        satisfied: ok,
        margin: if ok { 1.0 } else { 0.0 },
        details,
    })
}

/// Almost-equitable partition with every weight block parallel to v̄.
pub fn theorem_a4(almost_equitable: bool, w_parallel_vbar: bool) -> StabilityCertificate {
    let ok = almost_equitable && w_parallel_vbar;
    StabilityCertificate {
        kind: CertificateKind::TheoremA4,
        satisfied: ok,
        margin: if ok { 1.0 } else { 0.0 },
        details: vec![
            ("almost_equitable".into(), almost_equitable as u8 as f64),
            ("w_parallel_vbar".into(), w_parallel_vbar as u8 as f64),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::Mat;

    #[test]
    fn beta_examples() {
        let m1 = |v: f64| Mat::from_fn(1, 1, |_, _| v);
        let b = beta_bound(&m1(-1.0), &m1(1.0), &m1(1.0), None).unwrap();
        assert!((b - 0.5).abs() < 1e-15);
        let b = beta_bound(
            &linalg::scaled_identity(2, -2.0),
            &linalg::scaled_identity(2, 1.0),
            &linalg::scaled_identity(2, 3.0),
            None,
        )
        .unwrap();
        assert!((b - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn explicit_certificate_reproduces_default() {
        let a = linalg::diag(&[-1.0, -0.5, 0.0]);
        let g = linalg::scaled_identity(3, 1.0);
        let q = linalg::scaled_identity(3, 2.0);
        let cert = BetaCertificate {
            k_t: linalg::scaled_identity(3, -1.0),
            d_t: linalg::scaled_identity(3, 1.0),
            f: linalg::symmetrize((&g * 2.0 - &a * 2.0).as_ref()),
        };
        let b1 = beta_bound(&a, &g, &q, None).unwrap();
        let b2 = beta_bound(&a, &g, &q, Some(&cert)).unwrap();
        assert!((b1 - b2).abs() < 1e-12);
    }

    #[test]
    fn violated_certificate_rejected() {
        let a = linalg::scaled_identity(2, -1.0);
        let g = linalg::scaled_identity(2, 1.0);
        let cert = BetaCertificate {
            k_t: linalg::scaled_identity(2, -1.0),
            d_t: linalg::scaled_identity(2, 1.0),
            f: linalg::scaled_identity(2, 10.0),
        };
        assert!(matches!(
            beta_bound(&a, &g, &g, Some(&cert)),
            Err(Error::InvalidCertificate(_))
        ));
    }

    #[test]
    fn destabilizing_gain_flagged() {
        let sys = LtiSystem::new(
            linalg::scaled_identity(2, 0.5),
            linalg::scaled_identity(2, 1.0),
            linalg::scaled_identity(2, 1.0),
            linalg::scaled_identity(2, 1.0),
            linalg::scaled_identity(2, 1.0),
        )
        .unwrap();
        let c = direct_eig(&sys, &Mat::zeros(2, 2)).unwrap();
        assert!(!c.satisfied);
    }
}
