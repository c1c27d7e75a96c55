//! Plant, graph and partition types shared by every stage of the pipeline.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RMat};

/// Undirected weighted graph with positive node weights.
#[derive(Debug, Clone)]
pub struct Graph {
    pub n: usize,
    /// (i, j, a_ij) with i < j.
    pub edges: Vec<(usize, usize, f64)>,
    pub node_weights: Vec<f64>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>, node_weights: Vec<f64>) -> Result<Self> {
        if node_weights.len() != n {
            return Err(Error::invalid("node weight vector length differs from n"));
        }
        if node_weights.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::invalid("node weights must be positive"));
        }
        let mut seen = std::collections::HashSet::new();
        let mut norm = Vec::with_capacity(edges.len());
        for (i, j, w) in edges {
            if i == j {
                return Err(Error::invalid(format!("self-loop at node {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::invalid(format!("edge ({i},{j}) out of range")));
            }
            if !(w > 0.0) {
                return Err(Error::invalid(format!("edge ({i},{j}) has non-positive weight")));
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            if !seen.insert((a, b)) {
                return Err(Error::invalid(format!("duplicate edge ({a},{b})")));
            }
            norm.push((a, b, w));
        }
        Ok(Graph {
            n,
            edges: norm,
            node_weights,
        })
    }

    pub fn unweighted(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        Graph::new(n, pairs.iter().map(|&(i, j)| (i, j, 1.0)).collect(), vec![1.0; n])
    }

    /// Dense adjacency with edge weights.
    pub fn adjacency(&self) -> RMat {
        let mut a = Mat::zeros(self.n, self.n);
        for &(i, j, w) in &self.edges {
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
        a
    }

    /// Negative edge-weighted Laplacian: off-diagonals a_ij, rows summing to zero.
    pub fn laplacian(&self) -> RMat {
        let mut l = self.adjacency();
        for i in 0..self.n {
            let s: f64 = (0..self.n).map(|j| l[(i, j)]).sum();
            l[(i, i)] = -s;
        }
        l
    }

    /// Unweighted negative Laplacian (all edges weight one).
    pub fn laplacian_unweighted(&self) -> RMat {
        let mut l = Mat::zeros(self.n, self.n);
        for &(i, j, _) in &self.edges {
            l[(i, j)] = 1.0;
            l[(j, i)] = 1.0;
            l[(i, i)] -= 1.0;
            l[(j, j)] -= 1.0;
        }
        l
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, _) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }
}

/// Non-empty, disjoint index sets covering 0..n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPartition {
    sets: Vec<Vec<usize>>,
    n: usize,
}

impl ClusterPartition {
    pub fn new(n: usize, mut sets: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for s in sets.iter_mut() {
            if s.is_empty() {
                return Err(Error::invalid("empty cluster"));
            }
            s.sort_unstable();
            for &i in s.iter() {
                if i >= n {
                    return Err(Error::invalid(format!("index {i} out of range for n={n}")));
                }
                if seen[i] {
                    return Err(Error::invalid(format!("index {i} appears in two clusters")));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("index {i} not covered by any cluster")));
        }
        Ok(ClusterPartition { sets, n })
    }

    /// Builds from a label vector; labels are compacted in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        let mut sets: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            let k = *map.entry(l).or_insert_with(|| {
                sets.push(Vec::new());
                sets.len() - 1
            });
            sets[k].push(i);
        }
        ClusterPartition::new(labels.len(), sets)
    }

    /// 1-based index lists as used in serialized partitions.
    pub fn from_one_based(n: usize, sets: &[Vec<usize>]) -> Result<Self> {
        let mut z = Vec::with_capacity(sets.len());
        for s in sets {
            let mut v = Vec::with_capacity(s.len());
            for &i in s {
                if i == 0 {
                    return Err(Error::invalid("1-based index list contains 0"));
                }
                v.push(i - 1);
            }
            z.push(v);
        }
        ClusterPartition::new(n, z)
    }

    pub fn singletons(n: usize) -> Self {
        ClusterPartition {
            sets: (0..n).map(|i| vec![i]).collect(),
            n,
        }
    }

    pub fn single(n: usize) -> Self {
        ClusterPartition {
            sets: vec![(0..n).collect()],
            n,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.sets.len()
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn labels(&self) -> Vec<usize> {
        let mut l = vec![0; self.n];
        for (k, s) in self.sets.iter().enumerate() {
            for &i in s {
                l[i] = k;
            }
        }
        l
    }

    pub fn to_one_based(&self) -> Vec<Vec<usize>> {
        self.sets
            .iter()
            .map(|s| s.iter().map(|i| i + 1).collect())
            .collect()
    }

    /// Canonical form: clusters ordered by smallest member. Two partitions are
    /// the same set partition iff their canonical forms are equal.
    pub fn canonical(&self) -> Vec<Vec<usize>> {
        let mut s = self.sets.clone();
        s.sort_by_key(|v| v[0]);
        s
    }
}

/// LTI plant ẋ = Ax + Bu + B_d d with LQR weights (Q, R).
#[derive(Debug, Clone)]
pub struct LtiSystem {
    pub a: RMat,
    pub b: RMat,
    pub bd: RMat,
    pub q: RMat,
    pub r: RMat,
}

impl LtiSystem {
    pub fn new(a: RMat, b: RMat, bd: RMat, q: RMat, r: RMat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension("A must be square".into()));
        }
        if b.nrows() != n || bd.nrows() != n {
            return Err(Error::Dimension("B and B_d must have n rows".into()));
        }
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::Dimension("Q must be n x n".into()));
        }
        let m = b.ncols();
        if r.nrows() != m || r.ncols() != m {
            return Err(Error::Dimension("R must be m x m".into()));
        }
        if !linalg::is_symmetric(q.as_ref(), 1e-10) || !linalg::is_symmetric(r.as_ref(), 1e-10) {
            return Err(Error::invalid("Q and R must be symmetric"));
        }
        let q = linalg::symmetrize(q.as_ref());
        let r = linalg::symmetrize(r.as_ref());
        if linalg::cholesky_lower(r.as_ref()).is_none() {
            return Err(Error::invalid("R must be positive definite"));
        }
        if n > 0 {
            let qmin = linalg::sym_eigvals(q.as_ref())?[0];
            if qmin < -1e-10 * q.norm_l2().max(1.0) {
                return Err(Error::invalid(format!("Q is not PSD (λ_min = {qmin:.3e})")));
            }
        }
        Ok(LtiSystem { a, b, bd, q, r })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn nb(&self) -> usize {
        self.bd.ncols()
    }

    pub fn r_inv(&self) -> RMat {
        linalg::inverse(self.r.as_ref())
    }

    fn r_is_diagonal(&self) -> bool {
        let m = self.m();
        (0..m).all(|i| (0..m).all(|j| i == j || self.r[(i, j)] == 0.0))
    }

    /// R⁻¹ X, elementwise when R is diagonal.
    pub fn solve_r(&self, x: &RMat) -> RMat {
        let m = self.m();
        if self.r_is_diagonal() {
            return Mat::from_fn(m, x.ncols(), |i, c| x[(i, c)] / self.r[(i, i)]);
        }
        linalg::solve(self.r.as_ref(), x.as_ref())
    }

    /// G = B R⁻¹ Bᵀ
    pub fn g(&self) -> RMat {
        let (n, m) = (self.n(), self.m());
        let nnz = self.b.col_iter().map(|c| c.iter().filter(|x| **x != 0.0).count()).sum::<usize>();
        if self.r_is_diagonal() && nnz * 10 <= n * m {
            // sparse B with diagonal R: accumulate b_k b_kᵀ / r_k over nonzeros
            let mut g = RMat::zeros(n, n);
            for k in 0..m {
                let nz: Vec<(usize, f64)> =
                    (0..n).filter(|&i| self.b[(i, k)] != 0.0).map(|i| (i, self.b[(i, k)])).collect();
                let rk = self.r[(k, k)];
                for &(i, bi) in &nz {
                    for &(j, bj) in &nz {
                        g[(i, j)] += bi * bj / rk;
                    }
                }
            }
            return g;
        }
        let rib = self.solve_r(&self.b.transpose().to_owned());
        linalg::symmetrize((&self.b * rib).as_ref())
    }

    /// B R^{-1/2}
    pub fn b_r_half(&self) -> Result<RMat> {
        let l = linalg::cholesky_lower(self.r.as_ref())
            .ok_or_else(|| Error::invalid("R must be positive definite"))?;
        // R = L Lᵀ, so B L⁻ᵀ has (B L⁻ᵀ)(B L⁻ᵀ)ᵀ = G
        let lt_inv = linalg::inverse(l.transpose());
        Ok(&self.b * lt_inv)
    }

    /// Closed-loop matrix A − B K.
    pub fn closed_loop(&self, k: &RMat) -> RMat {
        &self.a - &self.b * k
    }
}
