use faer::{c64, Mat};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat};
use crate::model::LtiSystem;

/// H = [[A, −G], [−Q, −Aᵀ]]
pub fn hamiltonian(sys: &LtiSystem) -> RMat {
    hamiltonian_from(&sys.a, &sys.g(), &sys.q)
}

pub fn hamiltonian_from(a: &RMat, g: &RMat, q: &RMat) -> RMat {
    let n = a.nrows();
    Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => a[(i, j)],
        (true, false) => -g[(i, j - n)],
        (false, true) => -q[(i - n, j)],
        (false, false) => -a[(j - n, i - n)],
    })
}

/// Stable eigenpairs of the Hamiltonian.
///
/// `y` holds the top (state) blocks of the eigenvectors with unit-norm columns,
/// `omega` the matching rows of Y⁻¹ (or the pseudo-inverse of a partial Y).
#[derive(Debug, Clone)]
pub struct StableEigenbasis {
    pub lambda: Vec<c64>,
    pub y: CMat,
    /// Bottom blocks, scaled consistently with `y`; only kept by the dense solver.
    pub z: Option<CMat>,
    pub omega: CMat,
    /// Whether `lambda` holds every stable eigenvalue.
    pub complete: bool,
    /// κ was increased by one so that a conjugate pair stays together.
    pub pair_adjusted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenbasisSummary {
    pub kappa: usize,
    pub eigenvalues: Vec<[f64; 2]>,
    pub complete: bool,
    pub pair_adjusted: bool,
}

impl StableEigenbasis {
    pub fn kappa(&self) -> usize {
        self.lambda.len()
    }

    pub fn summary(&self) -> EigenbasisSummary {
        EigenbasisSummary {
            kappa: self.kappa(),
            eigenvalues: self.lambda.iter().map(|l| [l.re, l.im]).collect(),
            complete: self.complete,
            pair_adjusted: self.pair_adjusted,
        }
    }

    /// Keeps the first `k` eigenpairs (grown by one to avoid splitting a pair);
    /// Ω₁ becomes the matching rows of the full Ω when complete, else the pseudo-inverse.
    pub fn truncate(&self, k: usize) -> Result<StableEigenbasis> {
        let total = self.kappa();
        if k == 0 || k > total {
            return Err(Error::invalid(format!("kappa {k} outside 1..={total}")));
        }
        let (k, adjusted) = complete_pairs(&self.lambda, k);
        let n = self.y.nrows();
        let y = self.y.subcols(0, k).to_owned();
        let omega = if self.complete {
            self.omega.subrows(0, k).to_owned()
        } else {
            linalg::pinv_complex(y.as_ref())?
        };
        Ok(StableEigenbasis {
            lambda: self.lambda[..k].to_vec(),
            y,
            z: self.z.as_ref().map(|z| z.subcols(0, k).to_owned()),
            omega,
            complete: self.complete && k == n,
            pair_adjusted: adjusted || self.pair_adjusted,
        })
    }

    /// Gap ratio |Re λ_κ| / |Re λ_{κ+1}| given the next eigenvalue, if known.
    pub fn gap_ratio(&self, next: Option<c64>) -> f64 {
        match (self.lambda.last(), next) {
            (Some(l), Some(m)) if m.re != 0.0 => l.re.abs() / m.re.abs(),
            _ => 1.0,
        }
    }
}

/// Grows k by one if it would separate λ_k from its conjugate at position k+1.
pub fn complete_pairs(lambda: &[c64], k: usize) -> (usize, bool) {
    if k < lambda.len() && k > 0 {
        let a = lambda[k - 1];
        let b = lambda[k];
        let tol = 1e-10 * a.norm().max(1e-300);
        if a.im.abs() > tol && (a - b.conj()).norm() <= 1e-8 * a.norm().max(1.0) {
            return (k + 1, true);
        }
    }
    (k, false)
}

/// Sort key for stable eigenvalues: slowest first, ties by |Im|, then
/// positive imaginary part first so conjugate pairs sit as (λ, λ̄).
pub fn sort_stable(pairs: &mut [(c64, usize)]) {
    pairs.sort_by(|a, b| {
        let ka = (a.0.re.abs(), a.0.im.abs(), -a.0.im);
        let kb = (b.0.re.abs(), b.0.im.abs(), -b.0.im);
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });
}

/// Dense eigendecomposition of H, keeping all n stable eigenpairs.
pub fn stable_eigenbasis_dense(sys: &LtiSystem) -> Result<StableEigenbasis> {
    let h = hamiltonian(sys);
    stable_eigenbasis_of(&h)
}

pub fn stable_eigenbasis_of(h: &RMat) -> Result<StableEigenbasis> {
    let n2 = h.nrows();
    let n = n2 / 2;
    let (vals, vecs) = linalg::eig(h.as_ref())?;
    let scale = h.norm_l2().max(1.0);
    let min_real = vals.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
    if n > 0 && min_real <= 1e-10 * scale {
        return Err(Error::SpectralGap { min_real });
    }
    let mut stable: Vec<(c64, usize)> = vals
        .iter()
        .enumerate()
        .filter(|(_, l)| l.re < 0.0)
        .map(|(i, &l)| (l, i))
        .collect();
    if stable.len() != n {
        return Err(Error::NoStabilizingSolution(format!(
            "Hamiltonian has {} stable eigenvalues, expected {n}",
            stable.len()
        )));
    }
    sort_stable(&mut stable);
    let full = Mat::from_fn(n2, n, |i, j| vecs[(i, stable[j].1)]);
    let lambda: Vec<c64> = stable.iter().map(|p| p.0).collect();
    let full = enforce_conjugate_structure(&lambda, full);
    let (y, z) = split_normalize(&full, n);
    let omega = linalg::inverse_complex(y.as_ref());
    if !omega.as_ref().norm_l2().is_finite() {
        return Err(Error::IllConditioned {
            condition: f64::INFINITY,
        });
    }
    Ok(StableEigenbasis {
        lambda,
        y,
        z: Some(z),
        omega,
        complete: true,
        pair_adjusted: false,
    })
}

/// Makes real eigenvalues carry real vectors and conjugate pairs carry
/// exactly conjugate vectors, so realified products are real.
pub fn enforce_conjugate_structure(lambda: &[c64], mut v: CMat) -> CMat {
    let rows = v.nrows();
    let mut j = 0;
    while j < lambda.len() {
        let l = lambda[j];
        let tol = 1e-10 * l.norm().max(1e-300);
        let paired = l.im.abs() > tol
            && j + 1 < lambda.len()
            && (lambda[j + 1] - l.conj()).norm() <= 1e-8 * l.norm().max(1.0);
        if paired {
            for i in 0..rows {
                let x = v[(i, j)];
                v[(i, j + 1)] = x.conj();
            }
            j += 2;
        } else {
            if l.im.abs() <= tol {
                // rotate the phase so the largest entry is real, then drop Im
                let mut best = c64::new(0.0, 0.0);
                for i in 0..rows {
                    if v[(i, j)].norm() > best.norm() {
                        best = v[(i, j)];
                    }
                }
                let ph = if best.norm() > 0.0 { best.conj() / best.norm() } else { c64::new(1.0, 0.0) };
                for i in 0..rows {
                    let x = v[(i, j)] * ph;
                    v[(i, j)] = c64::new(x.re, 0.0);
                }
            }
            j += 1;
        }
    }
    v
}

/// Splits [Y; Z] and scales each column so the Y part has unit norm.
pub fn split_normalize(full: &CMat, n: usize) -> (CMat, CMat) {
    let k = full.ncols();
    let mut y = full.subrows(0, n).to_owned();
    let mut z = full.subrows(n, full.nrows() - n).to_owned();
    for j in 0..k {
        let nrm: f64 = (0..n).map(|i| y[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            for i in 0..n {
                y[(i, j)] /= nrm;
            }
            for i in 0..z.nrows() {
                z[(i, j)] /= nrm;
            }
        }
    }
    (y, z)
}
