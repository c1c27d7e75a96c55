//! Clustering-based projections and the control-inversion pipeline
//! (project, solve the reduced LQR, lift back).

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::lqr::are::solve_are_matrices;
use crate::lqr::certificates::{self, StabilityCertificate};
use crate::lqr::gramian::GramianFactor;
use crate::model::{ClusterPartition, LtiSystem};
use crate::netgen::pbh_checks;

/// P with P_ij = w_j/‖w_{𝓘_i}‖ for j ∈ 𝓘_i.
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    partition: ClusterPartition,
    w: Vec<f64>,
    /// ŵ: w normalized per cluster, so row i of P is ŵ restricted to 𝓘_i.
    w_hat: Vec<f64>,
    labels: Vec<usize>,
}

pub fn build_projection(partition: &ClusterPartition, w: &[f64]) -> Result<ProjectionMatrix> {
    let n = partition.n();
    if w.len() != n {
        return Err(Error::Dimension(format!("weight length {} differs from n={n}", w.len())));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("weights must be finite"));
    }
    let mut w_hat = vec![0.0; n];
    for (i, set) in partition.sets().iter().enumerate() {
        let nrm = set.iter().map(|&j| w[j] * w[j]).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return Err(Error::DegenerateWeight { cluster: i });
        }
        for &j in set {
            w_hat[j] = w[j] / nrm;
        }
    }
    let p = ProjectionMatrix {
        partition: partition.clone(),
        w: w.to_vec(),
        w_hat,
        labels: partition.labels(),
    };
    p.verify()?;
    Ok(p)
}

impl ProjectionMatrix {
    pub fn partition(&self) -> &ClusterPartition {
        &self.partition
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn w_hat(&self) -> &[f64] {
        &self.w_hat
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    pub fn r(&self) -> usize {
        self.partition.r()
    }

    /// Checks PPᵀ = I and PᵀPw = w.
    pub fn verify(&self) -> Result<()> {
        let mut ortho = 0.0f64;
        for set in self.partition.sets() {
            let s: f64 = set.iter().map(|&j| self.w_hat[j] * self.w_hat[j]).sum();
            ortho = ortho.max((s - 1.0).abs());
        }
        let ptpw = self.apply_t(&self.apply(&linalg::col_vec(&self.w)));
        let wn = linalg::norm2(&self.w);
        let dev = (0..self.n())
            .map(|j| (ptpw[(j, 0)] - self.w[j]).powi(2))
            .sum::<f64>()
            .sqrt();
        if ortho > 1e-12 || dev > 1e-12 * wn {
            return Err(Error::numerical(format!(
                "projection identities violated: |PPᵀ-I| = {ortho:.3e}, |PᵀPw-w| = {dev:.3e}"
            )));
        }
        Ok(())
    }

    pub fn dense(&self) -> RMat {
        let (r, n) = (self.r(), self.n());
        Mat::from_fn(r, n, |i, j| if self.labels[j] == i { self.w_hat[j] } else { 0.0 })
    }

    /// P̂: indicator of cluster membership.
    pub fn binary(&self) -> RMat {
        Mat::from_fn(self.r(), self.n(), |i, j| if self.labels[j] == i { 1.0 } else { 0.0 })
    }

    /// P̄: 1/‖w_{𝓘_i}‖ on the cluster pattern, so that P = P̄ diag(w).
    pub fn nominal(&self) -> RMat {
        let norms: Vec<f64> = self
            .partition
            .sets()
            .iter()
            .map(|s| s.iter().map(|&j| self.w[j] * self.w[j]).sum::<f64>().sqrt())
            .collect();
        Mat::from_fn(self.r(), self.n(), |i, j| {
            if self.labels[j] == i {
                1.0 / norms[i]
            } else {
                0.0
            }
        })
    }

    /// P·X for X with n rows.
    pub fn apply(&self, x: &RMat) -> RMat {
        let mut out = Mat::zeros(self.r(), x.ncols());
        for c in 0..x.ncols() {
            for j in 0..self.n() {
                out[(self.labels[j], c)] += self.w_hat[j] * x[(j, c)];
            }
        }
        out
    }

    /// Pᵀ·Y for Y with r rows.
    pub fn apply_t(&self, y: &RMat) -> RMat {
        Mat::from_fn(self.n(), y.ncols(), |j, c| self.w_hat[j] * y[(self.labels[j], c)])
    }

    /// X·Pᵀ for X with n columns.
    pub fn right_t(&self, x: &RMat) -> RMat {
        let mut out = Mat::zeros(x.nrows(), self.r());
        for j in 0..self.n() {
            let (c, wj) = (self.labels[j], self.w_hat[j]);
            for i in 0..x.nrows() {
                out[(i, c)] += wj * x[(i, j)];
            }
        }
        out
    }

    /// P M Pᵀ
    pub fn congruence(&self, m: &RMat) -> RMat {
        let mp = self.right_t(m);
        linalg::symmetrize(self.apply(&mp).as_ref())
    }

    /// P M Pᵀ without symmetrization (for nonsymmetric A).
    pub fn sandwich(&self, m: &RMat) -> RMat {
        self.apply(&self.right_t(m))
    }
}

/// Projected plant and LQR weights.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub a: RMat,
    pub b: RMat,
    pub bd: RMat,
    pub q: RMat,
    pub g: RMat,
}

pub fn reduce_system(sys: &LtiSystem, p: &ProjectionMatrix) -> Result<ReducedSystem> {
    if p.n() != sys.n() {
        return Err(Error::Dimension("projection and system sizes differ".into()));
    }
    Ok(ReducedSystem {
        a: p.sandwich(&sys.a),
        b: p.apply(&sys.b),
        bd: p.apply(&sys.bd),
        q: p.congruence(&sys.q),
        // G̃ = (PB) R⁻¹ (PB)ᵀ avoids forming the n×n G
        g: {
            let pb = p.apply(&sys.b);
            let rib = sys.solve_r(&pb.transpose().to_owned());
            linalg::symmetrize((&pb * rib).as_ref())
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPolicy {
    /// α = 1e-8·max(1, σ̄(Q̃), σ̄(G̃)), applied to whichever of Q̃/G̃ fails its test.
    #[default]
    Auto,
    /// Given α, applied to whichever of Q̃/G̃ fails its test.
    Fixed(f64),
    /// Never shift; fail instead.
    Never,
}

#[derive(Debug, Clone)]
pub struct ReducedLqr {
    pub x_tilde: RMat,
    pub alpha_q: f64,
    pub alpha_g: f64,
    pub relative_residual: f64,
}

impl ReducedLqr {
    /// The α reported by the Theorem-2 bound (largest shift applied).
    pub fn alpha_used(&self) -> f64 {
        self.alpha_q.max(self.alpha_g)
    }
}

/// Solves the reduced ARE, shifting Q̃ and/or G̃ by αI when (Ã, G̃^{1/2}) is not
/// stabilizable or (Q̃^{1/2}, Ã) is not detectable.
pub fn solve_reduced_lqr(red: &ReducedSystem, policy: AlphaPolicy) -> Result<ReducedLqr> {
    let r = red.a.nrows();
    let gh = linalg::psd_factor(red.g.as_ref(), 1e-10)?;
    let probe = LtiSystem::new(
        red.a.clone(),
        gh,
        linalg::scaled_identity(r, 1.0),
        red.q.clone(),
        linalg::scaled_identity(r, 1.0),
    )?;
    let rep = pbh_checks(&probe)?;
    let alpha = match policy {
        AlphaPolicy::Auto => {
            let sq = linalg::sigma_max(red.q.as_ref())?;
            let sg = linalg::sigma_max(red.g.as_ref())?;
            1e-8 * 1f64.max(sq).max(sg)
        }
        AlphaPolicy::Fixed(a) if a > 0.0 => a,
        AlphaPolicy::Fixed(_) => return Err(Error::invalid("alpha must be positive")),
        AlphaPolicy::Never => 0.0,
    };
    let mut alpha_q = if rep.detectable { 0.0 } else { alpha };
    let mut alpha_g = if rep.stabilizable { 0.0 } else { alpha };
    if !(rep.detectable && rep.stabilizable) && policy == AlphaPolicy::Never {
        return Err(Error::SynthesisFailure(
            "reduced pair fails stabilizability/detectability and shifting is disabled".into(),
        ));
    }
    let attempt = |aq: f64, ag: f64| {
        let q = &red.q + linalg::scaled_identity(r, aq);
        let g = &red.g + linalg::scaled_identity(r, ag);
        solve_are_matrices(&red.a, &g, &q)
    };
    let (x, rel) = match attempt(alpha_q, alpha_g) {
        Ok(v) => v,
        Err(first) => {
            if policy == AlphaPolicy::Never || (alpha_q > 0.0 && alpha_g > 0.0) {
                return Err(Error::SynthesisFailure(first.to_string()));
            }
            alpha_q = alpha;
            alpha_g = alpha;
            attempt(alpha_q, alpha_g).map_err(|e| Error::SynthesisFailure(e.to_string()))?
        }
    };
    Ok(ReducedLqr {
        x_tilde: x,
        alpha_q,
        alpha_g,
        relative_residual: rel,
    })
}

/// X̂ = PᵀX̃P and K̂ = R⁻¹BᵀX̂, with stability certificates.
#[derive(Debug, Clone)]
pub struct ClusteredController {
    pub x_tilde: RMat,
    pub x_hat: RMat,
    pub k_hat: RMat,
    pub alpha_q: f64,
    pub alpha_g: f64,
    pub certificates: Vec<StabilityCertificate>,
}

impl ClusteredController {
    pub fn stable(&self) -> bool {
        self.certificates
            .iter()
            .find(|c| c.kind == certificates::CertificateKind::DirectEig)
            .is_some_and(|c| c.satisfied)
    }

    pub fn alpha_used(&self) -> f64 {
        self.alpha_q.max(self.alpha_g)
    }
}

/// Optional inputs for the sufficient certificates.
#[derive(Debug, Clone, Default)]
pub struct CertificateInputs<'a> {
    /// Full-order ARE solution, enabling Theorem 1.
    pub x_full: Option<&'a RMat>,
    /// β(A,G,Q), enabling Lemma 2.
    pub beta: Option<f64>,
    /// Assumption-3 outcome for Theorem A.5.
    pub marginal_modes_ok: Option<bool>,
}

/// K̂ only: R⁻¹ (PB)ᵀ X̃ P.
pub fn lift_gain(sys: &LtiSystem, p: &ProjectionMatrix, x_tilde: &RMat) -> RMat {
    let pb = p.apply(&sys.b);
    let kt = sys.solve_r(&(pb.transpose() * x_tilde));
    // (K̃P)_{ij} = K̃_{i,label(j)} ŵ_j
    Mat::from_fn(kt.nrows(), p.n(), |i, j| kt[(i, p.labels[j])] * p.w_hat[j])
}

pub fn invert_controller(
    sys: &LtiSystem,
    p: &ProjectionMatrix,
    red: &ReducedLqr,
    extra: &CertificateInputs<'_>,
) -> Result<ClusteredController> {
    // X̃P = (PᵀX̃ᵀ)ᵀ, then X̂ = Pᵀ(X̃P)
    let xp = p.apply_t(&red.x_tilde.transpose().to_owned()).transpose().to_owned();
    let x_hat = linalg::symmetrize(p.apply_t(&xp).as_ref());
    let k_hat = lift_gain(sys, p, &red.x_tilde);
    let mut certs = vec![certificates::direct_eig(sys, &k_hat)?];
    if let Some(x) = extra.x_full {
        certs.push(certificates::theorem1(sys, x, &x_hat)?);
    }
    if let Some(beta) = extra.beta {
        certs.push(certificates::lemma2(sys, &red.x_tilde, beta)?);
    }
    if let Some(ok) = extra.marginal_modes_ok {
        certs.push(certificates::theorem_a5(sys, ok)?);
    }
    Ok(ClusteredController {
        x_tilde: red.x_tilde.clone(),
        x_hat,
        k_hat,
        alpha_q: red.alpha_q,
        alpha_g: red.alpha_g,
        certificates: certs,
    })
}

/// Project, solve, lift: the whole control-inversion pipeline with the direct certificate.
pub fn synthesize(sys: &LtiSystem, p: &ProjectionMatrix, policy: AlphaPolicy) -> Result<ClusteredController> {
    let red = reduce_system(sys, p)?;
    let lqr = solve_reduced_lqr(&red, policy)?;
    invert_controller(sys, p, &lqr, &CertificateInputs::default())
}

/// ξ = ‖(I − PᵀP)F‖_F for a Gramian factor F, evaluated row by row.
pub fn xi_objective(p: &ProjectionMatrix, factor: &GramianFactor) -> f64 {
    xi_of(p, &factor.factor)
}

pub fn xi_of(p: &ProjectionMatrix, f: &RMat) -> f64 {
    let pf = p.apply(f);
    let mut s = 0.0;
    for j in 0..f.nrows() {
        let i = p.labels[j];
        for c in 0..f.ncols() {
            let d = f[(j, c)] - p.w_hat[j] * pf[(i, c)];
            s += d * d;
        }
    }
    s.sqrt()
}

/// ξ² via tr(Φ) − ‖PF‖_F².
pub fn xi_squared_trace_form(p: &ProjectionMatrix, f: &RMat) -> f64 {
    let t = f.norm_l2().powi(2);
    let pf = p.apply(f).norm_l2().powi(2);
    t - pf
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Theorem2Bound {
    pub xi: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub alpha: f64,
    pub beta_tilde: f64,
    pub f: f64,
}

/// f(ξ) = ε₁σ̄(Q)ξ² + 2ε₁ε₂ξ + αε₁ε₃ with Φ^{1/2} the symmetric square root of Φ.
pub fn theorem2_bound(
    p: &ProjectionMatrix,
    sys: &LtiSystem,
    x: &RMat,
    phi: &RMat,
    alpha: f64,
    beta_tilde: f64,
) -> Result<Theorem2Bound> {
    let (vals, v) = linalg::sym_eig(phi.as_ref())?;
    let n = vals.len();
    if vals[0] <= 0.0 || vals[0] <= 1e-14 * vals[n - 1] {
        return Err(Error::numerical("Φ is singular; Theorem 2 needs Φ ≻ 0"));
    }
    let sh: Vec<f64> = vals.iter().map(|x| x.sqrt()).collect();
    let half = Mat::from_fn(n, n, |i, j| v[(i, j)] * sh[j]) * v.transpose();
    let half_inv = Mat::from_fn(n, n, |i, j| v[(i, j)] / sh[j]) * v.transpose();
    let acl = &sys.a - sys.g() * x;
    let inner = &half_inv * &acl * &half;
    let eps1 = (1.0 / sh[0]) / linalg::sigma_min(inner.as_ref())?;
    let eps2 = beta_tilde * linalg::sigma_max(sys.a.as_ref())? * sh[n - 1]
        + linalg::sigma_max((&sys.q * &half).as_ref())?;
    let eps3 = (beta_tilde * beta_tilde + 1.0) * vals[n - 1];
    let xi = xi_of(p, &half);
    let qmax = linalg::sigma_max(sys.q.as_ref())?;
    let f = eps1 * qmax * xi * xi + 2.0 * eps1 * eps2 * xi + alpha * eps1 * eps3;
    Ok(Theorem2Bound {
        xi,
        eps1,
        eps2,
        eps3,
        alpha,
        beta_tilde,
        f,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LinkCount {
    pub two_layer: u64,
    pub full_lqr: u64,
}

/// n + C(r,2) for the two-layer architecture against C(n,2) for full LQR.
pub fn count_links(n: u64, r: u64) -> Result<LinkCount> {
    if r == 0 || r > n {
        return Err(Error::invalid("need 1 <= r <= n"));
    }
    Ok(LinkCount {
        two_layer: n + r * (r - 1) / 2,
        full_lqr: n * (n - 1) / 2,
    })
}

/// Real unit-norm eigenvectors of A for eigenvalues with Re λ ≥ −1e-9·max(1, ‖A‖_F).
/// Complex pairs contribute their real and imaginary parts.
pub fn unstable_modes(a: &RMat) -> Result<RMat> {
    let n = a.nrows();
    let thresh = -1e-9 * a.norm_l2().max(1.0);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if linalg::is_symmetric(a.as_ref(), 1e-14) {
        let (vals, v) = linalg::sym_eig(linalg::symmetrize(a.as_ref()).as_ref())?;
        for (j, &l) in vals.iter().enumerate() {
            if l >= thresh {
                cols.push(linalg::col_to_vec(v.as_ref(), j));
            }
        }
    } else {
        let (vals, v) = linalg::eig(a.as_ref())?;
        for (j, l) in vals.iter().enumerate() {
            if l.re < thresh || l.im < 0.0 {
                continue;
            }
            let re: Vec<f64> = (0..n).map(|i| v[(i, j)].re).collect();
            let im: Vec<f64> = (0..n).map(|i| v[(i, j)].im).collect();
            for part in [re, im] {
                if linalg::norm2(&part) > 1e-12 {
                    cols.push(part);
                }
            }
        }
    }
    for c in cols.iter_mut() {
        let nrm = linalg::norm2(c);
        c.iter_mut().for_each(|x| *x /= nrm);
        linalg::sign_normalize(c);
    }
    Ok(Mat::from_fn(n, cols.len(), |i, j| cols[j][i]))
}

/// Assumption 3 violations: (cluster, mode) pairs with |ŵ_{𝓘_i}ᵀ v_{𝓘_i}| ≤ 1e-10‖v‖.
pub fn assumption3_violations(p: &ProjectionMatrix, modes: &RMat) -> Vec<(usize, usize)> {
    let mut bad = Vec::new();
    for m in 0..modes.ncols() {
        let vn = (0..modes.nrows()).map(|i| modes[(i, m)].powi(2)).sum::<f64>().sqrt();
        for (c, set) in p.partition.sets().iter().enumerate() {
            let ip: f64 = set.iter().map(|&j| p.w_hat[j] * modes[(j, m)]).sum();
            if ip.abs() <= 1e-10 * vn {
                bad.push((c, m));
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_one() {
        let mut w = vec![1.0; 10];
        w[3] = 2.0;
        let part = ClusterPartition::from_one_based(10, &[vec![1, 2], vec![3, 4, 5], vec![6, 7, 8, 9, 10]]).unwrap();
        let p = build_projection(&part, &w).unwrap().dense();
        let s2 = 1.0 / 2f64.sqrt();
        let s6 = 1.0 / 6f64.sqrt();
        let s5 = 1.0 / 5f64.sqrt();
        let expect = [
            [s2, s2, 0., 0., 0., 0., 0., 0., 0., 0.],
            [0., 0., s6, 2. * s6, s6, 0., 0., 0., 0., 0.],
            [0., 0., 0., 0., 0., s5, s5, s5, s5, s5],
        ];
        for i in 0..3 {
            for j in 0..10 {
                assert!((p[(i, j)] - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn singleton_and_single() {
        let w = vec![-1.0, 2.0, 0.5];
        let p = build_projection(&ClusterPartition::singletons(3), &w).unwrap().dense();
        assert_eq!(p[(0, 0)], -1.0);
        assert_eq!(p[(1, 1)], 1.0);
        let p = build_projection(&ClusterPartition::single(4), &[1.0; 4]).unwrap().dense();
        assert!((0..4).all(|j| (p[(0, j)] - 0.5).abs() < 1e-15));
    }

    #[test]
    fn degenerate_weight() {
        let part = ClusterPartition::new(3, vec![vec![0], vec![1, 2]]).unwrap();
        assert!(matches!(
            build_projection(&part, &[1.0, 0.0, 0.0]),
            Err(Error::DegenerateWeight { cluster: 1 })
        ));
    }

    #[test]
    fn link_counts() {
        assert_eq!(count_links(500, 6).unwrap(), LinkCount { two_layer: 515, full_lqr: 124750 });
        assert_eq!(count_links(500, 9).unwrap().two_layer, 536);
        assert_eq!(count_links(7, 1).unwrap().two_layer, 7);
        assert!(count_links(3, 4).is_err());
    }

    #[test]
    fn scalar_reduced_lqr() {
        let m1 = |v: f64| Mat::from_fn(1, 1, |_, _| v);
        let red = ReducedSystem { a: m1(-1.0), b: m1(1.0), bd: m1(1.0), q: m1(1.0), g: m1(1.0) };
        let s = solve_reduced_lqr(&red, AlphaPolicy::Auto).unwrap();
        assert!((s.x_tilde[(0, 0)] - (2f64.sqrt() - 1.0)).abs() < 1e-14);
        assert_eq!(s.alpha_used(), 0.0);
    }

    #[test]
    fn lifted_solution_matches_dense() {
        let n = 5;
        let a = Mat::from_fn(n, n, |i, j| if i == j { -1.0 - i as f64 } else { 0.1 * (i + 2 * j) as f64 / n as f64 });
        let b = Mat::from_fn(n, 2, |i, j| if i % 2 == j { 1.0 } else { 0.3 });
        let i5 = linalg::scaled_identity(n, 1.0);
        let sys = LtiSystem::new(a, b, i5.clone(), i5, linalg::scaled_identity(2, 1.0)).unwrap();
        let part = ClusterPartition::from_labels(&[0, 1, 0, 1, 1]).unwrap();
        let p = build_projection(&part, &[1.0, 2.0, 0.5, 1.0, 3.0]).unwrap();
        let c = synthesize(&sys, &p, AlphaPolicy::Auto).unwrap();
        let pd = p.dense();
        let x_hat = pd.transpose() * &c.x_tilde * &pd;
        assert!((&x_hat - &c.x_hat).norm_l2() <= 1e-12 * x_hat.norm_l2());
        let k_hat = linalg::inverse(sys.r.as_ref()) * sys.b.transpose() * &x_hat;
        assert!((&k_hat - &c.k_hat).norm_l2() <= 1e-12 * k_hat.norm_l2());
    }

    #[test]
    fn alpha_shift_engages() {
        let m1 = |v: f64| Mat::from_fn(1, 1, |_, _| v);
        let red = ReducedSystem { a: m1(1.0), b: m1(0.0), bd: m1(1.0), q: m1(1.0), g: m1(0.0) };
        assert!(solve_reduced_lqr(&red, AlphaPolicy::Never).is_err());
        let s = solve_reduced_lqr(&red, AlphaPolicy::Fixed(1e-6)).unwrap();
        assert_eq!(s.alpha_g, 1e-6);
        assert_eq!(s.alpha_q, 0.0);
        // 2x + 1 - 1e-6 x² = 0, positive root
        let expect = (2.0 + (4.0f64 + 4e-6).sqrt()) / 2e-6;
        assert!((s.x_tilde[(0, 0)] - expect).abs() <= 1e-8 * expect);
    }
}
