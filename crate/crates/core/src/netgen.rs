//! Consensus-network generation and structural checks.

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::model::{ClusterPartition, Graph, LtiSystem};

const MAX_ATTEMPTS: usize = 100;

/// Generator parameters; field names double as the JSON document keys.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConsensusParams {
    pub n: usize,
    pub r_spatial: usize,
    pub p_intra: f64,
    pub ratio: f64,
    #[serde(default = "one")]
    pub weight_lo: f64,
    #[serde(default = "two")]
    pub weight_hi: f64,
    #[serde(default)]
    pub seed: u64,
    /// 1-based node indices where the disturbance enters.
    #[serde(default = "first_node")]
    pub b_d_columns: Vec<usize>,
    /// Use B = M^{1/2}, B_d = M^{1/2}E instead of B = I, B_d = E.
    #[serde(default)]
    pub mass_scaled_inputs: bool,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn first_node() -> Vec<usize> {
    vec![1]
}

impl ConsensusParams {
    pub fn new(n: usize, r_spatial: usize, p_intra: f64, ratio: f64, seed: u64) -> Self {
        ConsensusParams {
            n,
            r_spatial,
            p_intra,
            ratio,
            weight_lo: 1.0,
            weight_hi: 2.0,
            seed,
            b_d_columns: vec![1],
            mass_scaled_inputs: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.r_spatial == 0 || self.r_spatial > self.n {
            return Err(Error::invalid("need n >= r_spatial >= 1"));
        }
        if !(self.p_intra > 0.0 && self.p_intra <= 1.0) {
            return Err(Error::invalid("p_intra must lie in (0, 1]"));
        }
        if !(self.ratio >= 1.0) {
            return Err(Error::invalid("ratio must be >= 1"));
        }
        if !(self.weight_lo > 0.0 && self.weight_lo <= self.weight_hi) {
            return Err(Error::invalid("need 0 < weight_lo <= weight_hi"));
        }
        if self.b_d_columns.is_empty() {
            return Err(Error::invalid("b_d_columns must not be empty"));
        }
        for &c in &self.b_d_columns {
            if c == 0 || c > self.n {
                return Err(Error::invalid(format!("b_d column {c} out of range 1..={}", self.n)));
            }
        }
        Ok(())
    }
}

/// A generated consensus network together with its plant.
#[derive(Debug, Clone)]
pub struct ConsensusNetwork {
    pub graph: Graph,
    pub sys: LtiSystem,
    /// Planted group of each node.
    pub groups: Vec<usize>,
    /// v̄ = M^{1/2}𝟏/√tr(M), the null vector of A.
    pub vbar: Vec<f64>,
}

/// Planted-partition consensus network with A = M^{-1/2} L M^{-1/2}, Q = I, R = I.
pub fn generate_clustered_consensus(p: &ConsensusParams) -> Result<ConsensusNetwork> {
    p.validate()?;
    let n = p.n;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let groups: Vec<usize> = (0..n).map(|i| i * p.r_spatial / n).collect();
    let p_inter = p.p_intra / p.ratio;

    let mut edges = Vec::new();
    let mut connected = false;
    for _ in 0..MAX_ATTEMPTS {
        edges.clear();
        for i in 0..n {
            for j in (i + 1)..n {
                let prob = if groups[i] == groups[j] { p.p_intra } else { p_inter };
                if rng.random::<f64>() < prob {
                    edges.push((i, j, 1.0));
                }
            }
        }
        let g = Graph::new(n, edges.clone(), vec![1.0; n])?;
        if g.is_connected() {
            connected = true;
            break;
        }
    }
    if !connected {
        return Err(Error::GenerationFailure {
            attempts: MAX_ATTEMPTS,
            reason: "sampled graph never connected".into(),
        });
    }
    let masses: Vec<f64> = (0..n)
        .map(|_| p.weight_lo + (p.weight_hi - p.weight_lo) * rng.random::<f64>())
        .collect();
    let graph = Graph::new(n, edges, masses)?;
    let bd_cols: Vec<usize> = p.b_d_columns.iter().map(|c| c - 1).collect();
    let sys = consensus_system(&graph, &bd_cols, p.mass_scaled_inputs)?;
    let vbar = consensus_vbar(&graph);
    Ok(ConsensusNetwork {
        graph,
        sys,
        groups,
        vbar,
    })
}

/// Builds the consensus plant for a given graph; `bd_cols` are 0-based.
pub fn consensus_system(graph: &Graph, bd_cols: &[usize], mass_scaled_inputs: bool) -> Result<LtiSystem> {
    let n = graph.n;
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let l = graph.laplacian();
    let s: Vec<f64> = graph.node_weights.iter().map(|m| m.sqrt()).collect();
    let a = Mat::from_fn(n, n, |i, j| l[(i, j)] / (s[i] * s[j]));
    let a = linalg::symmetrize(a.as_ref());
    let scale = |i: usize| if mass_scaled_inputs { s[i] } else { 1.0 };
    let b = Mat::from_fn(n, n, |i, j| if i == j { scale(i) } else { 0.0 });
    let bd = Mat::from_fn(n, bd_cols.len(), |i, k| if i == bd_cols[k] { scale(i) } else { 0.0 });
    LtiSystem::new(
        a,
        b,
        bd,
        linalg::scaled_identity(n, 1.0),
        linalg::scaled_identity(n, 1.0),
    )
}

pub fn consensus_vbar(graph: &Graph) -> Vec<f64> {
    let tr: f64 = graph.node_weights.iter().sum();
    graph.node_weights.iter().map(|m| (m / tr).sqrt()).collect()
}

/// Aggregate almost-equitable test: every node of 𝓘_k has the same total edge
/// weight into each other cluster 𝓘_l.
pub fn is_almost_equitable(graph: &Graph, partition: &ClusterPartition) -> Result<bool> {
    if partition.n() != graph.n {
        return Err(Error::invalid("partition size differs from node count"));
    }
    let labels = partition.labels();
    let r = partition.r();
    let mut into = vec![vec![0.0f64; r]; graph.n];
    for &(i, j, w) in &graph.edges {
        into[i][labels[j]] += w;
        into[j][labels[i]] += w;
    }
    let scale = graph.edges.iter().map(|e| e.2).fold(0.0, f64::max).max(1.0);
    for set in partition.sets() {
        let k = labels[set[0]];
        for l in 0..r {
            if l == k {
                continue;
            }
            let first = into[set[0]][l];
            if set.iter().any(|&i| (into[i][l] - first).abs() > 1e-9 * scale.max(first.abs())) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PbhReport {
    pub stabilizable: bool,
    pub detectable: bool,
    pub controllable_from_bd: bool,
}

/// PBH eigenvector tests for (A, BR^{-1/2}), (Q^{1/2}, A) and (A, B_d).
pub fn pbh_checks(sys: &LtiSystem) -> Result<PbhReport> {
    let n = sys.n();
    let br = sys.b_r_half()?;
    let qh = linalg::psd_factor(sys.q.as_ref(), 1e-10)?.transpose().to_owned();
    let eigs = linalg::eigvals(sys.a.as_ref())?;
    let marginal = -1e-9 * sys.a.norm_l2().max(1.0);
    let mut rep = PbhReport {
        stabilizable: true,
        detectable: true,
        controllable_from_bd: true,
    };
    for lam in eigs {
        let shifted = Mat::from_fn(n, n, |i, j| {
            let a = c64::new(sys.a[(i, j)], 0.0);
            if i == j {
                a - lam
            } else {
                a
            }
        });
        let unstable = lam.re >= marginal;
        if unstable && rep.stabilizable && !full_row_rank(&shifted, &br)? {
            rep.stabilizable = false;
        }
        if unstable && rep.detectable {
            let st = shifted.transpose().to_owned();
            if !full_row_rank(&st, &qh.transpose().to_owned())? {
                rep.detectable = false;
            }
        }
        if rep.controllable_from_bd && !full_row_rank(&shifted, &sys.bd)? {
            rep.controllable_from_bd = false;
        }
    }
    Ok(rep)
}

// rank [M, B] == n
fn full_row_rank(m: &Mat<c64>, b: &RMat) -> Result<bool> {
    let n = m.nrows();
    let k = b.ncols();
    let aug = Mat::from_fn(n, n + k, |i, j| {
        if j < n {
            m[(i, j)]
        } else {
            c64::new(b[(i, j - n)], 0.0)
        }
    });
    Ok(linalg::rank_complex(aug.as_ref())? == n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_laplacian() {
        let g = Graph::unweighted(2, &[(0, 1)]).unwrap();
        let sys = consensus_system(&g, &[0], false).unwrap();
        assert_eq!(sys.a[(0, 0)], -1.0);
        assert_eq!(sys.a[(0, 1)], 1.0);
        let ev = linalg::sym_eigvals(sys.a.as_ref()).unwrap();
        assert!((ev[0] + 2.0).abs() < 1e-14 && ev[1].abs() < 1e-14);
        let vb = consensus_vbar(&g);
        assert!((vb[0] - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn generated_null_vector() {
        let net = generate_clustered_consensus(&ConsensusParams::new(10, 2, 0.6, 4.0, 11)).unwrap();
        let l = net.graph.laplacian();
        for i in 0..10 {
            let s: f64 = (0..10).map(|j| l[(i, j)]).sum();
            assert!(s.abs() < 1e-12);
        }
        let v = linalg::col_vec(&net.vbar);
        let av = &net.sys.a * &v;
        assert!(av.norm_l2() <= 1e-12);
        let ev = linalg::sym_eigvals(net.sys.a.as_ref()).unwrap();
        assert!(ev[9].abs() < 1e-10 && ev[8] < -1e-8);
    }

    #[test]
    fn generation_is_deterministic() {
        let p = ConsensusParams::new(20, 3, 0.5, 10.0, 5);
        let a = generate_clustered_consensus(&p).unwrap();
        let b = generate_clustered_consensus(&p).unwrap();
        assert_eq!(a.graph.edges, b.graph.edges);
        assert_eq!(a.graph.node_weights, b.graph.node_weights);
    }

    #[test]
    fn argument_errors() {
        let mut p = ConsensusParams::new(5, 6, 0.5, 2.0, 0);
        assert!(generate_clustered_consensus(&p).is_err());
        p.r_spatial = 2;
        p.ratio = 0.5;
        assert!(generate_clustered_consensus(&p).is_err());
    }

    #[test]
    fn generation_failure_when_never_connected() {
        let mut p = ConsensusParams::new(30, 3, 0.01, 1000.0, 1);
        p.weight_hi = 1.0;
        match generate_clustered_consensus(&p) {
            Err(Error::GenerationFailure { attempts, .. }) => assert_eq!(attempts, 100),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn almost_equitable_examples() {
        let k4: Vec<_> = (0..4).flat_map(|i| ((i + 1)..4).map(move |j| (i, j))).collect();
        let g = Graph::unweighted(4, &k4).unwrap();
        let p = ClusterPartition::new(4, vec![vec![0, 3], vec![1], vec![2]]).unwrap();
        assert!(is_almost_equitable(&g, &p).unwrap());

        let c4 = Graph::unweighted(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let p = ClusterPartition::new(4, vec![vec![0, 2], vec![1, 3]]).unwrap();
        assert!(is_almost_equitable(&c4, &p).unwrap());

        let path = Graph::unweighted(3, &[(0, 1), (1, 2)]).unwrap();
        let p = ClusterPartition::new(3, vec![vec![0], vec![1, 2]]).unwrap();
        assert!(!is_almost_equitable(&path, &p).unwrap());

        assert!(is_almost_equitable(&path, &ClusterPartition::singletons(3)).unwrap());
    }

    #[test]
    fn pbh_examples() {
        let i2 = linalg::scaled_identity(2, 1.0);
        let sys = LtiSystem::new(
            linalg::scaled_identity(2, -1.0),
            Mat::zeros(2, 1),
            Mat::from_fn(2, 1, |_, _| 1.0),
            Mat::zeros(2, 2),
            linalg::scaled_identity(1, 1.0),
        )
        .unwrap();
        let rep = pbh_checks(&sys).unwrap();
        assert!(rep.stabilizable && rep.detectable);

        let jordan = Mat::from_fn(2, 2, |i, j| if i == 0 && j == 1 { 1.0 } else { 0.0 });
        let sys = LtiSystem::new(jordan, Mat::zeros(2, 1), i2.clone(), i2.clone(), linalg::scaled_identity(1, 1.0)).unwrap();
        assert!(!pbh_checks(&sys).unwrap().stabilizable);

        let net = generate_clustered_consensus(&ConsensusParams::new(8, 2, 0.7, 3.0, 2)).unwrap();
        let rep = pbh_checks(&net.sys).unwrap();
        assert!(rep.stabilizable && rep.detectable);
    }
}
