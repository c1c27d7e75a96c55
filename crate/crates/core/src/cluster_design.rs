//! Weighted k-means over the rows of Ψ = W⁻¹Φ_κ^{1/2}, plus the input builders
//! for the coherency and open-loop H₂ baselines.

use faer::Mat;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::lqr::gramian::GramianFactor;
use crate::model::{ClusterPartition, Graph, LtiSystem};
use crate::projection::unstable_modes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KMeansInit {
    /// Seeding with probability ∝ wⱼ²·D².
    #[default]
    KMeansPlusPlus,
    /// r distinct rows chosen uniformly.
    Random,
}

#[derive(Debug, Clone)]
pub struct KMeansProblem {
    /// n×κ, row j is ψⱼᵀ.
    pub data: RMat,
    /// wⱼ² > 0
    pub weights: Vec<f64>,
    pub r: usize,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    pub init: KMeansInit,
}

impl KMeansProblem {
    pub fn new(data: RMat, weights: Vec<f64>, r: usize) -> Self {
        KMeansProblem {
            data,
            weights,
            r,
            max_iters: 300,
            restarts: 10,
            seed: 0,
            init: KMeansInit::KMeansPlusPlus,
        }
    }

    pub fn with_restarts(mut self, restarts: usize, seed: u64) -> Self {
        self.restarts = restarts;
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.data.nrows();
        if self.weights.len() != n {
            return Err(Error::Dimension("one weight per data row required".into()));
        }
        if self.r == 0 || self.r > n {
            return Err(Error::invalid(format!("need 1 <= r <= n (r={}, n={n})", self.r)));
        }
        if self.weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("k-means weights must be positive and finite"));
        }
        if self.data.as_ref().norm_l2().is_nan() {
            return Err(Error::invalid("k-means data contains NaN"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub partition: ClusterPartition,
    pub centroids: RMat,
    /// Σⱼ wⱼ²‖ψⱼ − c_{assign(j)}‖²
    pub objective: f64,
    pub iters: usize,
    pub converged: bool,
    /// Objective after each (assign, update) pair of the returned run.
    pub history: Vec<f64>,
    /// Whether every run's history was non-increasing (1e-12 relative slack).
    pub monotone: bool,
}

fn sq_dist(data: &RMat, j: usize, c: &RMat, i: usize) -> f64 {
    (0..data.ncols()).map(|k| (data[(j, k)] - c[(i, k)]).powi(2)).sum()
}

fn centroids_of(p: &KMeansProblem, labels: &[usize]) -> RMat {
    let (n, d, r) = (p.data.nrows(), p.data.ncols(), p.r);
    let mut c = Mat::zeros(r, d);
    let mut mass = vec![0.0; r];
    for j in 0..n {
        let i = labels[j];
        mass[i] += p.weights[j];
        for k in 0..d {
            c[(i, k)] += p.weights[j] * p.data[(j, k)];
        }
    }
    for i in 0..r {
        if mass[i] > 0.0 {
            for k in 0..d {
                c[(i, k)] /= mass[i];
            }
        }
    }
    c
}

/// Objective of a labelling at its weighted centroids.
pub fn kmeans_objective(data: &RMat, weights: &[f64], labels: &[usize], r: usize) -> f64 {
    let p = KMeansProblem::new(data.clone(), weights.to_vec(), r);
    let c = centroids_of(&p, labels);
    (0..data.nrows()).map(|j| weights[j] * sq_dist(data, j, &c, labels[j])).sum()
}

fn init_centroids(p: &KMeansProblem, rng: &mut ChaCha8Rng) -> RMat {
    let (n, d) = (p.data.nrows(), p.data.ncols());
    let rows: Vec<usize> = match p.init {
        KMeansInit::Random => sample(rng, n, p.r).into_vec(),
        KMeansInit::KMeansPlusPlus => {
            let mut chosen = Vec::with_capacity(p.r);
            let first = WeightedIndex::new(&p.weights).map(|w| w.sample(rng)).unwrap_or(0);
            chosen.push(first);
            let mut dist: Vec<f64> = (0..n).map(|j| sq_dist(&p.data, j, &p.data, first)).collect();
            while chosen.len() < p.r {
                let score: Vec<f64> = (0..n).map(|j| p.weights[j] * dist[j]).collect();
                let next = match WeightedIndex::new(&score) {
                    Ok(w) => w.sample(rng),
                    // every remaining point coincides with a chosen one
                    Err(_) => (0..n).find(|j| !chosen.contains(j)).unwrap(),
                };
                chosen.push(next);
                for j in 0..n {
                    dist[j] = dist[j].min(sq_dist(&p.data, j, &p.data, next));
                }
            }
            chosen
        }
    };
    Mat::from_fn(p.r, d, |i, k| p.data[(rows[i], k)])
}

fn assign(p: &KMeansProblem, c: &RMat, labels: &mut [usize]) {
    for (j, l) in labels.iter_mut().enumerate() {
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for i in 0..p.r {
            let d = sq_dist(&p.data, j, c, i);
            if d < bd {
                bd = d;
                best = i;
            }
        }
        *l = best;
    }
}

// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(p: &KMeansProblem, c: &RMat, labels: &mut [usize]) {
    loop {
        let mut count = vec![0usize; p.r];
        labels.iter().for_each(|&l| count[l] += 1);
        let Some(empty) = count.iter().position(|&k| k == 0) else { return };
        let mut best = None;
        let mut bd = -1.0;
        for (j, &l) in labels.iter().enumerate() {
            if count[l] < 2 {
                continue;
            }
            let d = p.weights[j] * sq_dist(&p.data, j, c, l);
            if d > bd {
                bd = d;
                best = Some(j);
            }
        }
        match best {
            Some(j) => labels[j] = empty,
            None => return,
        }
    }
}

struct Run {
    labels: Vec<usize>,
    centroids: RMat,
    objective: f64,
    iters: usize,
    converged: bool,
    history: Vec<f64>,
}

fn lloyd(p: &KMeansProblem, rng: &mut ChaCha8Rng) -> Run {
    let n = p.data.nrows();
    let mut c = init_centroids(p, rng);
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    while iters < p.max_iters {
        iters += 1;
        let prev = labels.clone();
        assign(p, &c, &mut labels);
        repair_empty(p, &c, &mut labels);
        c = centroids_of(p, &labels);
        let obj = (0..n).map(|j| p.weights[j] * sq_dist(&p.data, j, &c, labels[j])).sum();
        history.push(obj);
        if labels == prev {
            converged = true;
            break;
        }
    }
    let objective = *history.last().unwrap();
    Run {
        labels,
        centroids: c,
        objective,
        iters,
        converged,
        history,
    }
}

fn non_increasing(h: &[f64]) -> bool {
    let scale = h.first().copied().unwrap_or(0.0).abs().max(1e-300);
    h.windows(2).all(|w| w[1] <= w[0] + 1e-12 * scale)
}

/// Best of `restarts` Lloyd runs; restart k draws from ChaCha8 stream k of `seed`.
pub fn weighted_kmeans(p: &KMeansProblem) -> Result<KMeansResult> {
    p.validate()?;
    let mut best: Option<Run> = None;
    let mut monotone = true;
    for k in 0..p.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        rng.set_stream(k as u64);
        let run = lloyd(p, &mut rng);
        monotone &= non_increasing(&run.history);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    let run = best.unwrap();
    let partition = ClusterPartition::from_labels(&run.labels)?;
    // reorder centroids to the partition's cluster order
    let order: Vec<usize> = partition.sets().iter().map(|s| run.labels[s[0]]).collect();
    let centroids = Mat::from_fn(order.len(), p.data.ncols(), |i, k| run.centroids[(order[i], k)]);
    Ok(KMeansResult {
        partition,
        centroids,
        objective: run.objective,
        iters: run.iters,
        converged: run.converged,
        history: run.history,
        monotone,
    })
}

fn check_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::Dimension(format!("weight length {} differs from n={n}", w.len())));
    }
    if let Some(j) = w.iter().position(|&x| x == 0.0 || !x.is_finite()) {
        return Err(Error::DegenerateWeight { cluster: j });
    }
    Ok(())
}

fn weighted_problem(f: &RMat, w: &[f64], r: usize) -> Result<KMeansProblem> {
    check_weights(w, f.nrows())?;
    let data = Mat::from_fn(f.nrows(), f.ncols(), |j, k| f[(j, k)] / w[j]);
    Ok(KMeansProblem::new(data, w.iter().map(|x| x * x).collect(), r))
}

/// Ψ = W⁻¹Φ_κ^{1/2}, weights w².
pub fn closed_loop_cluster_inputs(w: &[f64], factor: &GramianFactor, r: usize) -> Result<KMeansProblem> {
    weighted_problem(&factor.factor, w, r)
}

/// The r slowest eigenvectors of −L(𝓖) (unweighted), unit weights.
pub fn coherency_cluster_inputs(graph: &Graph, r: usize) -> Result<KMeansProblem> {
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let n = graph.n;
    if r == 0 || r > n {
        return Err(Error::invalid(format!("need 1 <= r <= n (r={r}, n={n})")));
    }
    let l = graph.laplacian_unweighted();
    // eigenvalues of −L ascending: the slow ones are at the end
    let (_, v) = linalg::sym_eig(l.as_ref())?;
    let data = Mat::from_fn(n, r, |j, k| v[(j, n - 1 - k)]);
    Ok(KMeansProblem::new(data, vec![1.0; n], r))
}

/// Open-loop Gramian restricted to the complement of the marginal modes of A.
/// Returns F with FFᵀ = Φ_o.
pub fn openloop_gramian_factor(sys: &LtiSystem) -> Result<RMat> {
    let n = sys.n();
    let modes = unstable_modes(&sys.a)?;
    let vc = if modes.ncols() == 0 {
        linalg::scaled_identity(n, 1.0)
    } else {
        // orthonormal basis of span(V̄)^⊥
        let s = &modes * modes.transpose();
        let (vals, v) = linalg::sym_eig(s.as_ref())?;
        let top = vals.last().copied().unwrap_or(0.0).max(1.0);
        let keep: Vec<usize> = (0..n).filter(|&j| vals[j] <= 1e-10 * top).collect();
        Mat::from_fn(n, keep.len(), |i, k| v[(i, keep[k])])
    };
    let ac = vc.transpose() * &sys.a * &vc;
    let abscissa = linalg::spectral_abscissa(ac.as_ref())?;
    if !(abscissa < 0.0) {
        return Err(Error::Instability(format!(
            "projected open loop has spectral abscissa {abscissa:.3e}"
        )));
    }
    let bc = vc.transpose() * &sys.bd;
    let pc = linalg::lyapunov(ac.as_ref(), (&bc * bc.transpose()).as_ref())?;
    let fc = linalg::psd_factor(pc.as_ref(), 1e-8)?;
    Ok(vc * fc)
}

/// Ψ = W⁻¹Φ_o^{1/2}, weights w².
pub fn openloop_h2_cluster_inputs(sys: &LtiSystem, w: &[f64], r: usize) -> Result<KMeansProblem> {
    let f = openloop_gramian_factor(sys)?;
    weighted_problem(&f, w, r)
}
