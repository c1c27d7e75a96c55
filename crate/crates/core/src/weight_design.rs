//! Per-cluster projection weights: dominant eigenvectors for a stable plant,
//! a penalized quartic on the sphere (tensor power iteration) otherwise, and
//! the alternating clustering/weighting loop.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::cluster_design::{weighted_kmeans, KMeansInit, KMeansProblem};
use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::model::ClusterPartition;
use crate::projection::{assumption3_violations, build_projection, unstable_modes, xi_of, ProjectionMatrix};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightDesignConfig {
    pub rho: f64,
    /// Multiply ρ by ‖Φ_κ‖₂ / tr(V̄ᵀQV̄).
    pub normalize_rho: bool,
    pub delta: f64,
    pub max_iters: usize,
    /// Clusters up to this size get an explicit F_s; larger ones use the implicit apply.
    pub dense_cap: usize,
}

impl Default for WeightDesignConfig {
    fn default() -> Self {
        WeightDesignConfig {
            rho: 0.01,
            normalize_rho: true,
            delta: 0.05,
            max_iters: 100,
            dense_cap: 24,
        }
    }
}

impl WeightDesignConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !(self.delta > 0.0) || self.max_iters == 0 {
            return Err(Error::invalid("weight design needs rho > 0, delta > 0, max_iters >= 1"));
        }
        Ok(())
    }
}

/// Real unit eigenvectors of the eigenvalues with Re λ ≥ 0 and S = V̄V̄ᵀ (formed per block).
#[derive(Debug, Clone)]
pub struct UnstableModes {
    pub v_bar: RMat,
}

impl UnstableModes {
    pub fn of(a: &RMat) -> Result<Self> {
        Ok(UnstableModes { v_bar: unstable_modes(a)? })
    }

    pub fn none(n: usize) -> Self {
        UnstableModes { v_bar: Mat::zeros(n, 0) }
    }

    pub fn count(&self) -> usize {
        self.v_bar.ncols()
    }

    /// S[𝓘,𝓙]
    pub fn s_block(&self, rows: &[usize], cols: &[usize]) -> RMat {
        let v = &self.v_bar;
        Mat::from_fn(rows.len(), cols.len(), |a, b| {
            (0..v.ncols()).map(|k| v[(rows[a], k)] * v[(cols[b], k)]).sum()
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StableWeights {
    pub w_hat: Vec<f64>,
    /// λ̄(Φ_κ[𝓘ᵢ,𝓘ᵢ]) per cluster.
    pub lambda_max: Vec<f64>,
    /// Repeated dominant eigenvalue (within 1e-10 relative); the returned block is one of many optima.
    pub degenerate: Vec<bool>,
}

/// Dominant unit eigenvector of Φ_κ[𝓘ᵢ,𝓘ᵢ] = F_{𝓘ᵢ}F_{𝓘ᵢ}ᵀ for every cluster.
pub fn stable_weight_design(partition: &ClusterPartition, factor: &RMat) -> Result<StableWeights> {
    if factor.nrows() != partition.n() {
        return Err(Error::Dimension("factor rows differ from partition size".into()));
    }
    let mut w_hat = vec![0.0; partition.n()];
    let mut lambda_max = Vec::new();
    let mut degenerate = Vec::new();
    for set in partition.sets() {
        let fb = linalg::select_rows(factor.as_ref(), set);
        let (lam, mut v, deg) = if fb.ncols() == 0 {
            (0.0, unit(set.len()), set.len() > 1)
        } else {
            let svd = fb
                .thin_svd()
                .map_err(|e| Error::numerical(format!("svd failed: {e:?}")))?;
            let s = svd.S().column_vector();
            let s1 = s[0] * s[0];
            let s2 = if s.nrows() > 1 { s[1] * s[1] } else { 0.0 };
            let deg = if set.len() > 1 && s.nrows() == 1 {
                // rank-one block in dimension > 1 still has a unique top direction
                s1 == 0.0
            } else {
                set.len() > 1 && (s1 - s2) <= 1e-10 * s1.max(f64::MIN_POSITIVE)
            };
            (s1, linalg::col_to_vec(svd.U(), 0), deg)
        };
        linalg::sign_normalize(&mut v);
        for (k, &j) in set.iter().enumerate() {
            w_hat[j] = v[k];
        }
        lambda_max.push(lam);
        degenerate.push(deg);
    }
    Ok(StableWeights { w_hat, lambda_max, degenerate })
}

fn unit(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    v
}

/// Unfolding F_s with F_s[(i,k),(j,l)] = 𝓕ˢ_{ijkl}, row-major index i·nᵢ + k.
#[derive(Debug, Clone)]
pub struct SymmetricTensorUnfolding {
    pub n_i: usize,
    pub fs: RMat,
}

impl SymmetricTensorUnfolding {
    /// (w⊗w)ᵀF_s(w⊗w)
    pub fn quartic(&self, w: &[f64]) -> f64 {
        let n = self.n_i;
        let ww: Vec<f64> = (0..n * n).map(|a| w[a / n] * w[a % n]).collect();
        let mut s = 0.0;
        for a in 0..n * n {
            for b in 0..n * n {
                s += ww[a] * self.fs[(a, b)] * ww[b];
            }
        }
        s
    }
}

/// Per-cluster data of the quartic (vᵀΦv)² + ρ(vᵀQv)(vᵀSv).
#[derive(Debug, Clone)]
pub struct ClusterQuartic {
    pub phi: RMat,
    pub q: RMat,
    pub s: RMat,
    pub rho: f64,
}

fn check_square(m: &RMat, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::invalid(format!("{what} block must be {n} x {n}")));
    }
    Ok(())
}

impl ClusterQuartic {
    pub fn new(phi: RMat, q: RMat, s: RMat, rho: f64) -> Result<Self> {
        let n = phi.nrows();
        check_square(&phi, n, "Φ_κ")?;
        check_square(&q, n, "Q")?;
        check_square(&s, n, "S")?;
        if !(rho >= 0.0) {
            return Err(Error::invalid("rho must be nonnegative"));
        }
        Ok(ClusterQuartic { phi, q, s, rho })
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    /// 𝓕 ⊙ w⊗⁴ with the unsymmetrized 𝓕_{ijkl} = Φ_ij Φ_kl + ρ Q_ij S_kl.
    pub fn value(&self, w: &[f64]) -> f64 {
        let wc = linalg::col_vec(w);
        let quad = |m: &RMat| (wc.transpose() * m * &wc)[(0, 0)];
        let p = quad(&self.phi);
        p * p + self.rho * quad(&self.q) * quad(&self.s)
    }

    /// unvec(F_s vec X) without forming F_s.
    pub fn apply(&self, x: &RMat) -> RMat {
        let (p, q, s) = (&self.phi, &self.q, &self.s);
        let xt = x.transpose().to_owned();
        let ip = |a: &RMat| -> f64 {
            let n = a.nrows();
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a[(i, j)] * x[(i, j)]).sum()
        };
        let t1 = p * x * p + p * ip(p) + p * &xt * p;
        let t2 = q * x * s + q * ip(s) + q * &xt * s + s * &xt * q + s * ip(q) + s * x * q;
        t1 * (1.0 / 3.0) + t2 * (self.rho / 6.0)
    }

    pub fn unfold(&self) -> SymmetricTensorUnfolding {
        let n = self.n();
        let (p, q, s, rho) = (&self.phi, &self.q, &self.s, self.rho);
        let fs = Mat::from_fn(n * n, n * n, |a, b| {
            let (i, k) = (a / n, a % n);
            let (j, l) = (b / n, b % n);
            (p[(i, j)] * p[(k, l)] + p[(i, k)] * p[(j, l)] + p[(i, l)] * p[(j, k)]) / 3.0
                + rho / 6.0
                    * (q[(i, j)] * s[(k, l)]
                        + q[(i, k)] * s[(j, l)]
                        + q[(i, l)] * s[(j, k)]
                        + q[(j, k)] * s[(i, l)]
                        + q[(j, l)] * s[(i, k)]
                        + q[(k, l)] * s[(i, j)])
        });
        SymmetricTensorUnfolding { n_i: n, fs }
    }
}

/// F_s for one cluster from its Φ_κ, Q and V̄ blocks.
pub fn build_cluster_tensor(phi: &RMat, q: &RMat, v_rows: &RMat, rho: f64) -> Result<SymmetricTensorUnfolding> {
    if !(rho > 0.0) {
        return Err(Error::invalid("rho must be positive"));
    }
    if v_rows.nrows() != phi.nrows() {
        return Err(Error::invalid("V̄ rows differ from cluster size"));
    }
    let s = v_rows * v_rows.transpose();
    let t = ClusterQuartic::new(phi.clone(), q.clone(), s, rho)?.unfold();
    if !linalg::is_symmetric(t.fs.as_ref(), 1e-12) {
        return Err(Error::numerical("F_s is not symmetric"));
    }
    Ok(t)
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerReport {
    pub history: Vec<f64>,
    pub iters: usize,
    /// Largest shift α used in v ← (unvec(F_s(v⊗v))v + αv)/‖·‖.
    pub shift: f64,
}

fn vec_row_major(v: &RMat) -> Vec<f64> {
    let n = v.nrows();
    (0..n * n).map(|a| v[(a / n, a % n)]).collect()
}

// dominant eigenvector of F_s, then of its (symmetrized) unvec
fn initial_vector(t: &ClusterQuartic, dense_cap: usize) -> Result<Vec<f64>> {
    let n = t.n();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let top = if n <= dense_cap {
        let fs = t.unfold().fs;
        let (_, v) = linalg::sym_eig(fs.as_ref())?;
        linalg::col_to_vec(v.as_ref(), n * n - 1)
    } else {
        lanczos_top(t, 60.min(n * n))?
    };
    let m = linalg::symmetrize(Mat::from_fn(n, n, |i, k| top[i * n + k]).as_ref());
    let (vals, v) = linalg::sym_eig(m.as_ref())?;
    let j = if vals[0].abs() > vals[n - 1].abs() { 0 } else { n - 1 };
    Ok(linalg::col_to_vec(v.as_ref(), j))
}

// largest algebraic eigenpair of the implicit F_s, full reorthogonalization
fn lanczos_top(t: &ClusterQuartic, m: usize) -> Result<Vec<f64>> {
    let n = t.n();
    let nn = n * n;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    // symmetric start: vec(I)/√n plus a fixed deterministic ripple
    let mut q: Vec<f64> = (0..nn)
        .map(|a| if a / n == a % n { 1.0 } else { 0.0 } + 1e-3 * ((a * 7919 % 101) as f64 / 101.0))
        .collect();
    let nq = linalg::norm2(&q);
    q.iter_mut().for_each(|x| *x /= nq);
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for _ in 0..m {
        let x = Mat::from_fn(n, n, |i, k| q[i * n + k]);
        let mut w = vec_row_major(&t.apply(&x));
        alpha.push(linalg::dot(&w, &q));
        basis.push(q.clone());
        for _ in 0..2 {
            for b in &basis {
                let c = linalg::dot(&w, b);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
            }
        }
        let nb = linalg::norm2(&w);
        if nb <= 1e-13 * alpha.iter().fold(1e-300f64, |a, b| a.max(b.abs())) || basis.len() == m {
            break;
        }
        beta.push(nb);
        q = w.iter().map(|x| x / nb).collect();
    }
    let k = alpha.len();
    let tri = Mat::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j || j + 1 == i {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    let (_, y) = linalg::sym_eig(tri.as_ref())?;
    let mut out = vec![0.0; nn];
    for (c, b) in basis.iter().enumerate() {
        let coef = y[(c, k - 1)];
        out.iter_mut().zip(b).for_each(|(o, bi)| *o += coef * bi);
    }
    Ok(out)
}

/// Maximizes (vᵀΦv)² + ρ(vᵀQv)(vᵀSv) on the unit sphere by tensor power iteration.
///
/// Steps that would lower the objective are retried with a doubled shift α,
/// which makes the iteration monotone for α large enough.
pub fn power_iteration(t: &ClusterQuartic, cfg: &WeightDesignConfig) -> Result<(Vec<f64>, PowerReport)> {
    let n = t.n();
    let mut v = initial_vector(t, cfg.dense_cap)?;
    let nv = linalg::norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut f = t.value(&v);
    let mut history = vec![f];
    let mut shift_max = 0.0f64;
    let mut iters = 0;
    if n == 1 {
        return Ok((vec![1.0], PowerReport { history, iters, shift: 0.0 }));
    }
    while iters < cfg.max_iters {
        iters += 1;
        let vc = linalg::col_vec(&v);
        let m = t.apply(&(&vc * vc.transpose()));
        let mv = linalg::col_to_vec((&m * &vc).as_ref(), 0);
        let scale = m.norm_l2().max(f64::MIN_POSITIVE);
        let mut alpha = 0.0;
        let (next, fnext) = loop {
            let mut cand: Vec<f64> = mv.iter().zip(&v).map(|(a, b)| a + alpha * b).collect();
            let nc = linalg::norm2(&cand);
            if nc > 0.0 {
                cand.iter_mut().for_each(|x| *x /= nc);
                let fc = t.value(&cand);
                if fc >= f - 1e-12 * f.abs().max(1e-300) {
                    break (cand, fc);
                }
            }
            alpha = if alpha == 0.0 { scale } else { 2.0 * alpha };
            if alpha > 1e12 * scale {
                return Err(Error::IterationFault { before: f, after: t.value(&v) });
            }
        };
        shift_max = shift_max.max(alpha);
        let ratio = (fnext - f) / f.max(1e-14);
        v = next;
        f = fnext;
        history.push(f);
        if ratio <= cfg.delta {
            break;
        }
    }
    linalg::sign_normalize(&mut v);
    Ok((v, PowerReport { history, iters, shift: shift_max }))
}

#[derive(Debug, Clone, Serialize)]
pub struct UnstableWeights {
    pub w_hat: Vec<f64>,
    pub rho: f64,
    pub clusters: Vec<PowerReport>,
}

/// ρ scaled by ‖Φ_κ‖₂ / tr(V̄ᵀQV̄) when requested.
pub fn effective_rho(factor: &RMat, q: &RMat, modes: &UnstableModes, cfg: &WeightDesignConfig) -> Result<f64> {
    if !cfg.normalize_rho || modes.count() == 0 {
        return Ok(cfg.rho);
    }
    let phi_norm = linalg::sigma_max(factor.as_ref())?.powi(2);
    let vqv = linalg::trace((modes.v_bar.transpose() * q * &modes.v_bar).as_ref());
    if !(vqv > 0.0) {
        return Err(Error::invalid("V̄ᵀQV̄ has zero trace; cannot normalize rho"));
    }
    Ok(cfg.rho * phi_norm / vqv)
}

/// Cluster-wise weights from the penalized quartic for an unstable plant.
pub fn unstable_weight_design(
    partition: &ClusterPartition,
    factor: &RMat,
    q: &RMat,
    modes: &UnstableModes,
    cfg: &WeightDesignConfig,
) -> Result<UnstableWeights> {
    cfg.validate()?;
    let n = partition.n();
    if factor.nrows() != n || q.nrows() != n || modes.v_bar.nrows() != n {
        return Err(Error::Dimension("factor, Q and V̄ must have n rows".into()));
    }
    if modes.count() == 0 {
        return Err(Error::invalid("no unstable modes; use the stable design"));
    }
    let rho = effective_rho(factor, q, modes, cfg)?;
    let mut w_hat = vec![0.0; n];
    let mut reports = Vec::new();
    for set in partition.sets() {
        let fb = linalg::select_rows(factor.as_ref(), set);
        let t = ClusterQuartic::new(
            &fb * fb.transpose(),
            linalg::select_block(q.as_ref(), set, set),
            modes.s_block(set, set),
            rho,
        )?;
        let (v, rep) = power_iteration(&t, cfg)?;
        for (k, &j) in set.iter().enumerate() {
            w_hat[j] = v[k];
        }
        reports.push(rep);
    }
    Ok(UnstableWeights { w_hat, rho, clusters: reports })
}

/// J_e = max over clusters i and rows j, l ∈ 𝓘ᵢ of Σ_{k≠i} ρ‖Q_{j,𝓘ₖ}‖₁‖S_{l,𝓘ₖ}‖₁.
pub fn lemma4_gap(q: &RMat, modes: &UnstableModes, partition: &ClusterPartition, rho: f64) -> f64 {
    let sets = partition.sets();
    let mut best = 0.0f64;
    for (i, si) in sets.iter().enumerate() {
        for &j in si {
            for &l in si {
                let mut sum = 0.0;
                for (k, sk) in sets.iter().enumerate() {
                    if k == i {
                        continue;
                    }
                    let qn: f64 = sk.iter().map(|&c| q[(j, c)].abs()).sum();
                    let sn: f64 = modes.s_block(&[l], sk).row(0).iter().map(|x| x.abs()).sum();
                    sum += rho * qn * sn;
                }
                best = best.max(sum);
            }
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AlternatingConfig {
    pub max_outer: usize,
    pub restarts: usize,
    pub seed: u64,
    pub init: KMeansInit,
    pub weights: WeightDesignConfig,
}

impl Default for AlternatingConfig {
    fn default() -> Self {
        AlternatingConfig {
            max_outer: 20,
            restarts: 10,
            seed: 0,
            init: KMeansInit::KMeansPlusPlus,
            weights: WeightDesignConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlternatingResult {
    pub projection: ProjectionMatrix,
    pub xi_kappa: f64,
    /// ξ_κ of each (clusters, weights) candidate in visiting order.
    pub xi_history: Vec<f64>,
    pub outer_iters: usize,
    /// The partition stopped changing before the cap.
    pub fixed_point: bool,
}

/// Pushes each block of w that is orthogonal to an unstable eigenvector block
/// by 1e-6 along that block.
pub fn repair_assumption3(partition: &ClusterPartition, w: &mut [f64], modes: &UnstableModes) -> Result<usize> {
    if modes.count() == 0 {
        return Ok(0);
    }
    let p = build_projection(partition, w)?;
    let bad = assumption3_violations(&p, &modes.v_bar);
    for &(c, m) in &bad {
        for &j in &partition.sets()[c] {
            w[j] += 1e-6 * modes.v_bar[(j, m)];
        }
    }
    Ok(bad.len())
}

// the k-means data needs W invertible; tiny entries are lifted to 1e-6·max|w|
fn floor_weights(w: &[f64]) -> Vec<f64> {
    let top = w.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    w.iter()
        .map(|&x| if x.abs() < 1e-6 * top { 1e-6 * top * if x < 0.0 { -1.0 } else { 1.0 } } else { x })
        .collect()
}

/// Alternates weighted k-means (weights fixed) and the weight design (clusters fixed)
/// from w⁰ = 𝟏, keeping the candidate with the smallest ξ_κ.
pub fn alternating_design(
    factor: &RMat,
    q: &RMat,
    modes: &UnstableModes,
    r: usize,
    cfg: &AlternatingConfig,
) -> Result<AlternatingResult> {
    let n = factor.nrows();
    if r == 0 || r > n {
        return Err(Error::invalid(format!("need 1 <= r <= n (r={r}, n={n})")));
    }
    let mut w = vec![1.0; n];
    let mut prev: Option<Vec<Vec<usize>>> = None;
    let mut best: Option<(f64, ProjectionMatrix)> = None;
    let mut history = Vec::new();
    let mut fixed_point = false;
    let mut outer = 0;
    let mut consider = |part: &ClusterPartition, w: &[f64], history: &mut Vec<f64>| -> Result<()> {
        let mut w = w.to_vec();
        repair_assumption3(part, &mut w, modes)?;
        let p = build_projection(part, &w)?;
        let xi = xi_of(&p, factor);
        history.push(xi);
        if best.as_ref().is_none_or(|(b, _)| xi < *b) {
            best = Some((xi, p));
        }
        Ok(())
    };
    while outer < cfg.max_outer {
        outer += 1;
        let wf = floor_weights(&w);
        let data = Mat::from_fn(n, factor.ncols(), |j, k| factor[(j, k)] / wf[j]);
        let mut prob = KMeansProblem::new(data, wf.iter().map(|x| x * x).collect(), r)
            .with_restarts(cfg.restarts, cfg.seed);
        prob.init = cfg.init;
        let part = weighted_kmeans(&prob)?.partition;
        consider(&part, &w, &mut history)?;
        w = if modes.count() == 0 {
            stable_weight_design(&part, factor)?.w_hat
        } else {
            unstable_weight_design(&part, factor, q, modes, &cfg.weights)?.w_hat
        };
        consider(&part, &w, &mut history)?;
        let canon = part.canonical();
        if prev.as_ref() == Some(&canon) {
            fixed_point = true;
            break;
        }
        prev = Some(canon);
    }
    let (xi_kappa, projection) = best.unwrap();
    Ok(AlternatingResult {
        projection,
        xi_kappa,
        xi_history: history,
        outer_iters: outer,
        fixed_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sym(rows: &[&[f64]]) -> RMat {
        Mat::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
    }

    #[test]
    fn two_by_two_block() {
        // Φ = [[2,1],[1,2]] = F Fᵀ
        let f = linalg::psd_factor(sym(&[&[2.0, 1.0], &[1.0, 2.0]]).as_ref(), 0.0).unwrap();
        let sw = stable_weight_design(&ClusterPartition::single(2), &f).unwrap();
        let s = 0.5f64.sqrt();
        assert!((sw.w_hat[0] - s).abs() < 1e-14 && (sw.w_hat[1] - s).abs() < 1e-14);
        assert!((sw.lambda_max[0] - 3.0).abs() < 1e-13);
        assert!(!sw.degenerate[0]);
    }

    #[test]
    fn diagonal_block() {
        let f = linalg::diag(&[5f64.sqrt(), 1.0, 1.0]);
        let sw = stable_weight_design(&ClusterPartition::single(3), &f).unwrap();
        assert!((sw.w_hat[0] - 1.0).abs() < 1e-14);
        assert!(sw.w_hat[1].abs() < 1e-14);
        let sw = stable_weight_design(&ClusterPartition::single(3), &linalg::scaled_identity(3, 1.0)).unwrap();
        assert!(sw.degenerate[0]);
    }

    fn random_quartic(n: usize, rho: f64, seed: u64) -> ClusterQuartic {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut psd = |k: usize| {
            let a = Mat::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
            linalg::symmetrize((&a * a.transpose()).as_ref())
        };
        ClusterQuartic::new(psd(n), psd(n), psd(1), rho).unwrap()
    }

    #[test]
    fn unfolding_matches_polynomial_and_apply() {
        let t = random_quartic(3, 0.7, 5);
        let fs = t.unfold();
        assert!(linalg::is_symmetric(fs.fs.as_ref(), 1e-14));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = t.value(&w);
            let b = fs.quartic(&w);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        let x = Mat::from_fn(3, 3, |i, j| (i * 3 + j) as f64 - 4.0);
        let applied = t.apply(&x);
        let xv = vec_row_major(&x);
        for a in 0..9 {
            let dense: f64 = (0..9).map(|b| fs.fs[(a, b)] * xv[b]).sum();
            assert!((dense - applied[(a / 3, a % 3)]).abs() < 1e-12 * dense.abs().max(1.0));
        }
    }

    #[test]
    fn single_mode_identity_phi() {
        // objective 1 + ρ(vᵀv̄)²: maximized along v̄
        let n = 4;
        let vbar: Vec<f64> = vec![0.1, 0.7, -0.3, 0.2];
        let nv = linalg::norm2(&vbar);
        let vbar: Vec<f64> = vbar.iter().map(|x| x / nv).collect();
        let vc = linalg::col_vec(&vbar);
        let t = ClusterQuartic::new(
            linalg::scaled_identity(n, 1.0),
            linalg::scaled_identity(n, 1.0),
            &vc * vc.transpose(),
            0.5,
        )
        .unwrap();
        let cfg = WeightDesignConfig { delta: 1e-12, ..Default::default() };
        let (v, rep) = power_iteration(&t, &cfg).unwrap();
        assert!((linalg::dot(&v, &vbar).abs() - 1.0).abs() < 1e-8);
        assert!((rep.history.last().unwrap() - 1.5).abs() < 1e-8);
    }

    #[test]
    fn power_iteration_monotone() {
        for seed in 0..30 {
            let t = random_quartic(2 + (seed as usize % 5), 0.3, seed);
            let cfg = WeightDesignConfig { delta: 1e-10, max_iters: 200, ..Default::default() };
            let (v, rep) = power_iteration(&t, &cfg).unwrap();
            assert!((linalg::norm2(&v) - 1.0).abs() < 1e-12);
            for w in rep.history.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * w[0].abs());
            }
        }
    }

    #[test]
    fn implicit_and_dense_initialization_agree() {
        let t = random_quartic(5, 0.2, 77);
        let dense = initial_vector(&t, 100).unwrap();
        let implicit = initial_vector(&t, 0).unwrap();
        assert!((linalg::dot(&dense, &implicit).abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn lemma4_trivial_cases() {
        let modes = UnstableModes { v_bar: Mat::from_fn(4, 1, |_, _| 0.5) };
        let qd = linalg::diag(&[1.0, 2.0, 3.0, 4.0]);
        let part = ClusterPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(lemma4_gap(&qd, &modes, &part, 1.0), 0.0);
        let qf = Mat::from_fn(4, 4, |_, _| 1.0);
        assert_eq!(lemma4_gap(&qf, &modes, &ClusterPartition::single(4), 1.0), 0.0);
        // each row: ‖Q_{j,other}‖₁ = 2, ‖S_{l,other}‖₁ = 2·0.25
        assert!((lemma4_gap(&qf, &modes, &part, 2.0) - 2.0 * 2.0 * 0.5).abs() < 1e-15);
    }
}
