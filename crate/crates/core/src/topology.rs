//! Communication graphs, doubly stochastic mixing matrices, the periodic
//! communication schedule and the connectivity constants derived from them.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("graph is disconnected")]
    DisconnectedGraph,
    #[error("uniform weighting is not doubly stochastic on an irregular graph")]
    NonDoublyStochastic,
    #[error("matrix is not symmetric doubly stochastic (deviation {0:e})")]
    NotStochastic(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid topology: {0}")]
    Invalid(String),
    #[error("inadmissible step: alpha * rho = {alpha_rho} must lie in [0, {bound})")]
    InadmissibleStep { alpha_rho: f64, bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Uniform,
    #[default]
    Metropolis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Complete,
    Ring,
    Star,
    EdgeList,
}

/// Undirected graph description, as it appears in experiment configs:
/// `{"kind": "ring", "n": 8, "weighting": "uniform", "edges": [[0, 1], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub kind: GraphKind,
    pub n: usize,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<[usize; 2]>,
}

impl TopologySpec {
    pub fn complete(n: usize, weighting: Weighting) -> Self {
        Self { kind: GraphKind::Complete, n, weighting, edges: Vec::new() }
    }

    pub fn ring(n: usize, weighting: Weighting) -> Self {
        Self { kind: GraphKind::Ring, n, weighting, edges: Vec::new() }
    }

    pub fn star(n: usize, weighting: Weighting) -> Self {
        Self { kind: GraphKind::Star, n, weighting, edges: Vec::new() }
    }

    pub fn edge_list(n: usize, edges: Vec<[usize; 2]>, weighting: Weighting) -> Self {
        Self { kind: GraphKind::EdgeList, n, weighting, edges }
    }

    /// The same graph family with a different client count.
    pub fn with_clients(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    /// Normalized undirected edge set `(i, j)` with `i < j`.
    pub fn edge_set(&self) -> Result<BTreeSet<(usize, usize)>, TopologyError> {
        let n = self.n;
        let mut set = BTreeSet::new();
        match self.kind {
            GraphKind::Complete => {
                for i in 0..n {
                    for j in i + 1..n {
                        set.insert((i, j));
                    }
                }
            }
            GraphKind::Ring => {
                if n >= 2 {
                    for i in 0..n {
                        let j = (i + 1) % n;
                        set.insert((i.min(j), i.max(j)));
                    }
                }
            }
            GraphKind::Star => {
                for j in 1..n {
                    set.insert((0, j));
                }
            }
            GraphKind::EdgeList => {
                for &[a, b] in &self.edges {
                    if a >= n || b >= n {
                        return Err(TopologyError::Invalid(format!("edge ({a}, {b}) out of range for n = {n}")));
                    }
                    if a == b {
                        return Err(TopologyError::Invalid(format!("self-loop at client {a}")));
                    }
                    set.insert((a.min(b), a.max(b)));
                }
            }
        }
        Ok(set)
    }
}

/// Symmetric doubly stochastic gossip matrix with its connectivity measure
/// `lambda = ||W - 11^T / n||_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    w: DMatrix<f64>,
    lambda: f64,
}

impl MixingMatrix {
    /// Wraps an explicit matrix after checking symmetry and stochasticity.
    pub fn from_matrix(w: DMatrix<f64>) -> Result<Self, TopologyError> {
        let lambda = spectral_gap(&w)?;
        Ok(Self { w, lambda })
    }

    /// The trivial `1 x 1` matrix of a single isolated client.
    pub fn single() -> Self {
        Self { w: DMatrix::from_element(1, 1, 1.0), lambda: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Slot `i` of the output is `sum_j w_ij * stacked[j]`.
    pub fn mix(&self, stacked: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, TopologyError> {
        let n = self.n();
        if stacked.len() != n {
            return Err(TopologyError::DimensionMismatch(format!(
                "expected {n} client slots, got {}",
                stacked.len()
            )));
        }
        let d = stacked.first().map_or(0, Vec::len);
        if let Some(bad) = stacked.iter().position(|s| s.len() != d) {
            return Err(TopologyError::DimensionMismatch(format!(
                "slot {bad} has dimension {}, expected {d}",
                stacked[bad].len()
            )));
        }
        let mut out = vec![vec![0.0; d]; n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, src) in stacked.iter().enumerate() {
                let wij = self.w[(i, j)];
                if wij != 0.0 {
                    for (o, s) in row.iter_mut().zip(src) {
                        *o += wij * s;
                    }
                }
            }
        }
        Ok(out)
    }
}

fn is_connected(n: usize, edges: &BTreeSet<(usize, usize)>) -> bool {
    if n == 0 {
        return false;
    }
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Builds the mixing matrix for a graph.
///
/// Uniform weighting puts `1 / (deg + 1)` on every neighbor and on the
/// diagonal, which is only doubly stochastic on regular graphs. Metropolis
/// weighting uses `1 / (1 + max(deg_i, deg_j))` per edge and fills the
/// diagonal so rows sum to one; it is valid on any connected graph.
///
/// A complete graph on one client yields the trivial `[1]` matrix.
pub fn build_mixing(spec: &TopologySpec) -> Result<MixingMatrix, TopologyError> {
    let n = spec.n;
    if n == 1 && spec.kind == GraphKind::Complete {
        return Ok(MixingMatrix::single());
    }
    if n < 2 {
        return Err(TopologyError::Invalid(format!("need at least 2 clients, got {n}")));
    }
    let edges = spec.edge_set()?;
    if !is_connected(n, &edges) {
        return Err(TopologyError::DisconnectedGraph);
    }
    let mut degree = vec![0usize; n];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let mut w = DMatrix::zeros(n, n);
    match spec.weighting {
        Weighting::Uniform => {
            if degree.iter().any(|&d| d != degree[0]) {
                return Err(TopologyError::NonDoublyStochastic);
            }
            let v = 1.0 / (degree[0] + 1) as f64;
            for &(a, b) in &edges {
                w[(a, b)] = v;
                w[(b, a)] = v;
            }
            for i in 0..n {
                w[(i, i)] = v;
            }
        }
        Weighting::Metropolis => {
            for &(a, b) in &edges {
                let v = 1.0 / (1 + degree[a].max(degree[b])) as f64;
                w[(a, b)] = v;
                w[(b, a)] = v;
            }
            for i in 0..n {
                let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
                w[(i, i)] = 1.0 - off;
            }
        }
    }
    MixingMatrix::from_matrix(w)
}

/// Connectivity values below this are reported as exactly zero.
pub const LAMBDA_ZERO_TOL: f64 = 1e-12;

/// `lambda = max(|lambda_2|, |lambda_n|) = ||W - J||_2` for a symmetric
/// doubly stochastic `W`, via a dense symmetric eigensolve of `W - J`.
pub fn spectral_gap(w: &DMatrix<f64>) -> Result<f64, TopologyError> {
    let n = w.nrows();
    if n == 0 || w.ncols() != n {
        return Err(TopologyError::DimensionMismatch(format!("{}x{} is not square", w.nrows(), w.ncols())));
    }
    let mut dev: f64 = 0.0;
    for i in 0..n {
        dev = dev.max((w.row(i).sum() - 1.0).abs());
        dev = dev.max((w.column(i).sum() - 1.0).abs());
        for j in 0..n {
            dev = dev.max((w[(i, j)] - w[(j, i)]).abs());
            if w[(i, j)] < -STOCHASTIC_TOL {
                dev = dev.max(-w[(i, j)]);
            }
        }
    }
    if dev > STOCHASTIC_TOL {
        return Err(TopologyError::NotStochastic(dev));
    }
    let centered = w - DMatrix::from_element(n, n, 1.0 / n as f64);
    let eig = SymmetricEigen::new(centered);
    let lambda = eig.eigenvalues.iter().fold(0.0, |m: f64, e| m.max(e.abs()));
    // eigensolver round-off on W = J would otherwise select the lambda > 0
    // branch of the delta constants
    Ok(if lambda < LAMBDA_ZERO_TOL { 0.0 } else { lambda })
}

/// Whether iteration `t` mixes with `W`: `t` belongs to `{T0, 2 T0, 3 T0, ...}`.
/// Iteration 0 never communicates.
pub fn is_comm_round(t: u64, period: u64) -> bool {
    assert!(period >= 1, "communication period must be >= 1");
    t > 0 && t % period == 0
}

/// Connectivity constants `(delta1, delta2)` used by the convergence bounds.
///
/// For `0 < lambda < 1`:
/// `delta1 = lambda (1 - lambda) [(1 - alpha rho)^2 - lambda^(1/T0)]` and
/// `delta2 = lambda (1 - lambda) (1 - lambda^(1/T0))`.
/// For `lambda = 0`:
/// `delta1 = T0^T0 (1 - alpha rho)^(2 T0 + 2) / (1 + T0)^(T0 + 1)` and
/// `delta2 = T0^T0 / (1 + T0)^(T0 + 1)`.
///
/// Requires `0 <= alpha rho < 1 - lambda^(1 / (2 T0))`.
pub fn delta_params(lambda: f64, period: u64, alpha_rho: f64) -> Result<(f64, f64), TopologyError> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(TopologyError::Invalid(format!("lambda must be in [0, 1), got {lambda}")));
    }
    if period == 0 {
        return Err(TopologyError::Invalid("communication period must be >= 1".into()));
    }
    let t0 = period as f64;
    let bound = 1.0 - lambda.powf(1.0 / (2.0 * t0));
    if !(alpha_rho >= 0.0 && alpha_rho < bound) {
        return Err(TopologyError::InadmissibleStep { alpha_rho, bound });
    }
    if lambda == 0.0 {
        // T0^T0 / (1 + T0)^(T0 + 1), evaluated in log space to stay finite for large T0.
        let base = (t0 * t0.ln() - (t0 + 1.0) * (t0 + 1.0).ln()).exp();
        let delta1 = base * (1.0 - alpha_rho).powf(2.0 * t0 + 2.0);
        Ok((delta1, base))
    } else {
        let root = lambda.powf(1.0 / t0);
        let scale = lambda * (1.0 - lambda);
        let delta1 = scale * ((1.0 - alpha_rho).powi(2) - root);
        let delta2 = scale * (1.0 - root);
        Ok((delta1, delta2))
    }
}

/// `omega = (1 + 3 gamma) / (1 - gamma)`, the Nesterov consensus inflation factor.
pub fn nesterov_omega(gamma: f64) -> f64 {
    (1.0 + 3.0 * gamma) / (1.0 - gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Cyclic Jacobi eigenvalue iteration, used as an independent oracle.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).collect()
    }

    fn oracle_lambda(w: &DMatrix<f64>) -> f64 {
        let n = w.nrows();
        let rows = (0..n).map(|i| (0..n).map(|j| w[(i, j)]).collect()).collect();
        let mut eig = jacobi_eigenvalues(rows);
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        // drop the Perron eigenvalue 1
        eig[1..].iter().fold(0.0, |m: f64, e| m.max(e.abs()))
    }

    fn assert_doubly_stochastic(m: &MixingMatrix) {
        let w = m.matrix();
        let n = w.nrows();
        for i in 0..n {
            assert!((w.row(i).sum() - 1.0).abs() < 1e-12);
            assert!((w.column(i).sum() - 1.0).abs() < 1e-12);
            for j in 0..n {
                assert_eq!(w[(i, j)], w[(j, i)]);
                assert!(w[(i, j)] >= 0.0);
            }
        }
    }

    #[test]
    fn complete_uniform_is_averaging() {
        let m = build_mixing(&TopologySpec::complete(4, Weighting::Uniform)).unwrap();
        assert!(m.matrix().iter().all(|&v| v == 0.25));
        assert!(m.lambda() < 1e-15);
        assert_doubly_stochastic(&m);
        for n in [3, 9, 25] {
            assert_eq!(build_mixing(&TopologySpec::complete(n, Weighting::Metropolis)).unwrap().lambda(), 0.0);
        }
    }

    #[test]
    fn ring4_uniform_lambda() {
        let m = build_mixing(&TopologySpec::ring(4, Weighting::Uniform)).unwrap();
        assert!((m.lambda() - 1.0 / 3.0).abs() < 1e-10);
        assert!((oracle_lambda(m.matrix()) - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn star3_metropolis_matrix() {
        let m = build_mixing(&TopologySpec::star(3, Weighting::Metropolis)).unwrap();
        let third = 1.0 / 3.0;
        let expected = DMatrix::from_row_slice(3, 3, &[third, third, third, third, 2.0 * third, 0.0, third, 0.0, 2.0 * third]);
        assert!((m.matrix() - expected).abs().max() < 1e-15);
        assert!((m.lambda() - 2.0 / 3.0).abs() < 1e-10);
        assert!((oracle_lambda(m.matrix()) - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn ring10_matches_circulant_formula() {
        let m = build_mixing(&TopologySpec::ring(10, Weighting::Uniform)).unwrap();
        let expected = (1..10)
            .map(|k| ((1.0 + 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 10.0).cos()) / 3.0).abs())
            .fold(0.0, f64::max);
        assert!((m.lambda() - expected).abs() < 1e-10);
    }

    #[test]
    fn averaging_matrix_has_zero_gap() {
        let j = DMatrix::from_element(5, 5, 0.2);
        assert!(spectral_gap(&j).unwrap() < 1e-12);
    }

    #[test]
    fn rejects_bad_graphs() {
        let star = TopologySpec::star(4, Weighting::Uniform);
        assert_eq!(build_mixing(&star), Err(TopologyError::NonDoublyStochastic));
        let split = TopologySpec::edge_list(4, vec![[0, 1], [2, 3]], Weighting::Metropolis);
        assert_eq!(build_mixing(&split), Err(TopologyError::DisconnectedGraph));
        let looped = TopologySpec::edge_list(3, vec![[0, 0], [0, 1], [1, 2]], Weighting::Metropolis);
        assert!(matches!(build_mixing(&looped), Err(TopologyError::Invalid(_))));
        assert!(build_mixing(&TopologySpec::ring(1, Weighting::Uniform)).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.1, 0.8]);
        assert!(matches!(spectral_gap(&bad), Err(TopologyError::NotStochastic(_))));
    }

    #[test]
    fn single_client_is_trivial() {
        let m = build_mixing(&TopologySpec::complete(1, Weighting::Uniform)).unwrap();
        assert_eq!(m.n(), 1);
        assert_eq!(m.lambda(), 0.0);
    }

    #[test]
    fn comm_round_schedule() {
        assert!(!is_comm_round(0, 5));
        assert!(is_comm_round(10, 5));
        assert!(!is_comm_round(7, 5));
        assert!(is_comm_round(1, 1));
    }

    #[test]
    fn mix_examples() {
        let ring = build_mixing(&TopologySpec::ring(4, Weighting::Uniform)).unwrap();
        let out = ring.mix(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]).unwrap();
        let expected = [(4.0 + 1.0 + 2.0) / 3.0, 2.0, 3.0, (3.0 + 4.0 + 1.0) / 3.0];
        for (o, e) in out.iter().zip(expected) {
            assert!((o[0] - e).abs() < 1e-15);
        }
        let complete = build_mixing(&TopologySpec::complete(3, Weighting::Uniform)).unwrap();
        let avg = complete.mix(&[vec![0.0, 3.0], vec![3.0, 6.0], vec![6.0, 0.0]]).unwrap();
        for row in &avg {
            assert!((row[0] - 3.0).abs() < 1e-14 && (row[1] - 3.0).abs() < 1e-14);
        }
        let identity = MixingMatrix::from_matrix(DMatrix::identity(2, 2)).unwrap();
        let stacked = vec![vec![1.5, -2.0], vec![0.25, 8.0]];
        assert_eq!(identity.mix(&stacked).unwrap(), stacked);
        assert!(matches!(complete.mix(&[vec![1.0], vec![2.0]]), Err(TopologyError::DimensionMismatch(_))));
        assert!(matches!(complete.mix(&[vec![1.0], vec![2.0], vec![1.0, 2.0]]), Err(TopologyError::DimensionMismatch(_))));
    }

    #[test]
    fn removing_chords_moves_from_complete_to_ring() {
        // Metropolis weights are not monotone under edge removal, so only the
        // endpoints are ordered; every intermediate graph stays in [0, 1).
        let ring: BTreeSet<(usize, usize)> = (0..6).map(|i| (i.min((i + 1) % 6), i.max((i + 1) % 6))).collect();
        let mut edges: Vec<(usize, usize)> = (0..6).flat_map(|i| (i + 1..6).map(move |j| (i, j))).collect();
        let chords: Vec<(usize, usize)> = edges.iter().copied().filter(|e| !ring.contains(e)).collect();
        let lambda_of = |edges: &[(usize, usize)]| {
            let spec = TopologySpec::edge_list(6, edges.iter().map(|&(a, b)| [a, b]).collect(), Weighting::Metropolis);
            build_mixing(&spec).unwrap().lambda()
        };
        let complete = lambda_of(&edges);
        assert!(complete < 1e-12);
        let mut last = complete;
        for chord in chords {
            edges.retain(|&e| e != chord);
            last = lambda_of(&edges);
            assert!((0.0..1.0).contains(&last));
        }
        assert!(last > complete + 0.3);
    }

    #[test]
    fn delta_examples() {
        let (d1, d2) = delta_params(0.0, 2, 0.0).unwrap();
        assert!((d1 - 4.0 / 27.0).abs() < 1e-15 && (d2 - 4.0 / 27.0).abs() < 1e-15);
        let (d1, d2) = delta_params(0.0, 1, 0.0).unwrap();
        assert!((d1 - 0.25).abs() < 1e-15 && (d2 - 0.25).abs() < 1e-15);
        let (d1, d2) = delta_params(1.0 / 3.0, 1, 0.0).unwrap();
        assert!((d1 - 4.0 / 27.0).abs() < 1e-15 && (d2 - 4.0 / 27.0).abs() < 1e-15);
        // lambda = 0 uses the exponent 2 T0 + 2
        let (d1, d2) = delta_params(0.0, 2, 0.1).unwrap();
        assert!((d1 - d2 * 0.9f64.powi(6)).abs() < 1e-15);
        assert!(matches!(delta_params(0.5, 1, 0.5), Err(TopologyError::InadmissibleStep { .. })));
        assert!(delta_params(0.0, 3, 1.0).is_err());
    }

    #[test]
    fn complete_graph_dominates_delta() {
        for t0 in [1u64, 2, 5, 10] {
            for alpha_rho in [0.0, 0.01, 0.05] {
                let (z1, z2) = delta_params(0.0, t0, alpha_rho).unwrap();
                for k in 1..=9 {
                    let lambda = k as f64 / 10.0;
                    if let Ok((d1, d2)) = delta_params(lambda, t0, alpha_rho) {
                        assert!(d1 > 0.0 && d2 > 0.0);
                        assert!(z1 >= d1, "t0={t0} ar={alpha_rho} lambda={lambda}");
                        assert!(z2 >= d2, "t0={t0} ar={alpha_rho} lambda={lambda}");
                    }
                }
            }
        }
    }

    fn connected_graph() -> impl Strategy<Value = TopologySpec> {
        (3usize..9, proptest::collection::vec((0usize..9, 0usize..9), 0..12)).prop_map(|(n, extra)| {
            // spanning path plus random chords keeps the graph connected
            let mut edges: Vec<[usize; 2]> = (0..n - 1).map(|i| [i, i + 1]).collect();
            edges.extend(extra.into_iter().map(|(a, b)| [a % n, b % n]).filter(|[a, b]| a != b));
            TopologySpec::edge_list(n, edges, Weighting::Metropolis)
        })
    }

    proptest! {
        #[test]
        fn metropolis_always_valid(spec in connected_graph()) {
            let m = build_mixing(&spec).unwrap();
            assert_doubly_stochastic(&m);
            prop_assert!(m.lambda() < 1.0);
            let edges = spec.edge_set().unwrap();
            for i in 0..spec.n {
                for j in 0..spec.n {
                    if i != j && m.weight(i, j) > 0.0 {
                        prop_assert!(edges.contains(&(i.min(j), i.max(j))));
                    }
                }
            }
        }

        #[test]
        fn mix_preserves_mean(spec in connected_graph(), seed in proptest::collection::vec(-100.0..100.0f64, 27)) {
            let m = build_mixing(&spec).unwrap();
            let stacked: Vec<Vec<f64>> = (0..spec.n).map(|i| seed[3 * i..3 * i + 3].to_vec()).collect();
            let out = m.mix(&stacked).unwrap();
            for k in 0..3 {
                let before: f64 = stacked.iter().map(|s| s[k]).sum::<f64>() / spec.n as f64;
                let after: f64 = out.iter().map(|s| s[k]).sum::<f64>() / spec.n as f64;
                let scale = stacked.iter().map(|s| s[k].abs()).fold(1.0, f64::max);
                prop_assert!((before - after).abs() <= 1e-12 * scale);
            }
        }
    }
}
