//! Pair-selection matrices, their induced graphs and Laplacian spectra.
//!
//! A [`SelectionMatrix`] is the row-stochastic matrix `A = [a_ij]` that drives
//! node pair selection: a node `i` is drawn uniformly and then picks partner
//! `j` with probability `a_ij`. Its induced graph carries arc `(j, i)` exactly
//! when `a_ij > 0`.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Row sums further than this from one are rejected.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Convergence tolerance handed to the symmetric eigensolver.
pub const EIGEN_TOLERANCE: f64 = 1e-9;

/// Random generators give up after this many disconnected draws.
pub const MAX_GENERATOR_RETRIES: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("selection matrix needs at least 3 nodes, got {0}")]
    TooSmall(usize),
    #[error("selection matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("entry ({row}, {col}) is negative: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("diagonal entry ({index}, {index}) must be zero, got {value}")]
    NonzeroDiagonal { index: usize, value: f64 },
    #[error("row {row} sums to {sum}, expected 1 (matrix is not stochastic)")]
    NotStochastic { row: usize, sum: f64 },
    #[error(
        "induced graph is not weakly connected (connectivity assumption A1 requires a weakly connected graph)"
    )]
    Disconnected,
    #[error("symmetric eigensolver did not converge")]
    EigenFailure,
    #[error("generator did not produce a weakly connected graph after {0} attempts")]
    DisconnectedAfterRetries(usize),
    #[error("bad generator parameter: {0}")]
    BadParameter(String),
    #[error("matrix parse error: {0}")]
    Parse(String),
}

/// Validated row-stochastic selection matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionMatrix {
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl SelectionMatrix {
    /// Checks `rows` against the stochastic-matrix contract. Never renormalizes.
    pub fn validate(rows: Vec<Vec<f64>>) -> Result<Self, GraphError> {
        let n = rows.len();
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(GraphError::NotSquare { row, len: r.len(), n });
            }
        }
        if n < 3 {
            return Err(GraphError::TooSmall(n));
        }
        for (row, r) in rows.iter().enumerate() {
            for (col, &value) in r.iter().enumerate() {
                if !value.is_finite() {
                    return Err(GraphError::NonFinite { row, col });
                }
                if value < 0.0 {
                    return Err(GraphError::NegativeEntry { row, col, value });
                }
            }
            if r[row] != 0.0 {
                return Err(GraphError::NonzeroDiagonal { index: row, value: r[row] });
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(GraphError::NotStochastic { row, sum });
            }
        }
        Ok(SelectionMatrix { n, rows })
    }

    /// Like [`SelectionMatrix::validate`], additionally requiring weak connectivity.
    pub fn validate_connected(rows: Vec<Vec<f64>>) -> Result<Self, GraphError> {
        let a = Self::validate(rows)?;
        if !a.induced_graph().is_weakly_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(a)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Smallest positive entry, `a_*`.
    pub fn min_positive_entry(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .copied()
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn induced_graph(&self) -> InducedGraph {
        let mut arcs = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.rows[i][j] > 0.0 {
                    arcs.push((j, i));
                }
            }
        }
        InducedGraph { n: self.n, arcs }
    }

    /// Weighted Laplacian `D - (A + A^T)` with `d_i = sum_j (a_ij + a_ji)`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut l = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let w = self.rows[i][j] + self.rows[j][i];
                    l[(i, j)] = -w;
                    l[(i, i)] += w;
                }
            }
        }
        l
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MatrixFile { n: self.n, rows: self.rows.clone() })
            .expect("matrix serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# n={}\n", self.n);
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses `{"n": 4, "rows": [[...], ...]}`.
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: MatrixFile =
            serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))?;
        if file.n != file.rows.len() {
            return Err(GraphError::Parse(format!(
                "declared n={} but found {} rows",
                file.n,
                file.rows.len()
            )));
        }
        Self::validate(file.rows)
    }

    /// Parses row-major CSV. An optional `n=<int>` line (bare or after `#`) is
    /// checked against the row count; other `#` lines are comments. Entries
    /// may be decimals or fractions such as `2/3`.
    pub fn from_csv(text: &str) -> Result<Self, GraphError> {
        let mut declared = None;
        let mut body = String::new();
        for line in text.lines() {
            let trimmed = line.trim();
            let meta = trimmed.trim_start_matches('#').trim();
            if let Some(v) = meta.strip_prefix("n=") {
                let n = v
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| GraphError::Parse(format!("bad header line `{trimmed}`")))?;
                declared = Some(n);
            } else if !trimmed.is_empty() && !trimmed.starts_with('#') {
                body.push_str(trimmed);
                body.push('\n');
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(body.as_bytes());
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| GraphError::Parse(e.to_string()))?;
            let row = record
                .iter()
                .map(parse_entry)
                .collect::<Result<Vec<f64>, GraphError>>()?;
            rows.push(row);
        }
        if let Some(n) = declared {
            if n != rows.len() {
                return Err(GraphError::Parse(format!(
                    "declared n={n} but found {} rows",
                    rows.len()
                )));
            }
        }
        Self::validate(rows)
    }

    /// Loads a matrix from a `.json` or `.csv` file, chosen by extension.
    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GraphError::Parse(format!("{}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_csv(&text),
        }
    }
}

impl fmt::Display for SelectionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v:.4}")).collect();
            writeln!(f, "[{}]", line.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    n: usize,
    rows: Vec<Vec<f64>>,
}

pub(crate) fn parse_entry(field: &str) -> Result<f64, GraphError> {
    let bad = || GraphError::Parse(format!("bad matrix entry `{field}`"));
    match field.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            Ok(num / den)
        }
        None => field.parse().map_err(|_| bad()),
    }
}

/// Digraph with arc `(j, i)` for every positive `a_ij`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InducedGraph {
    pub n: usize,
    pub arcs: Vec<(usize, usize)>,
}

impl InducedGraph {
    /// True iff the graph is connected once arc directions are ignored.
    pub fn is_weakly_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut adjacency = vec![Vec::new(); self.n];
        for &(u, v) in &self.arcs {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        reached == self.n
    }
}

pub fn is_weakly_connected(g: &InducedGraph) -> bool {
    g.is_weakly_connected()
}

/// Spectrum of the weighted Laplacian `D - (A + A^T)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralData {
    /// `d_i = sum_j (a_ij + a_ji)`.
    pub degrees: Vec<f64>,
    #[serde(skip)]
    pub laplacian: DMatrix<f64>,
    /// Ascending.
    pub spectrum: Vec<f64>,
    /// Second smallest eigenvalue.
    pub lambda2: f64,
    /// Largest eigenvalue.
    pub lambda_n: f64,
    /// Smallest positive entry of `A`.
    pub a_star: f64,
}

pub fn spectral(a: &SelectionMatrix) -> Result<SpectralData, GraphError> {
    let laplacian = a.laplacian();
    let degrees = (0..a.n()).map(|i| laplacian[(i, i)]).collect();
    let eigen = laplacian
        .clone()
        .try_symmetric_eigen(EIGEN_TOLERANCE * 1e-6, 10_000)
        .ok_or(GraphError::EigenFailure)?;
    let mut spectrum: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    spectrum.sort_by(f64::total_cmp);
    Ok(SpectralData {
        degrees,
        laplacian,
        lambda2: spectrum[1],
        lambda_n: spectrum[spectrum.len() - 1],
        spectrum,
        a_star: a.min_positive_entry(),
    })
}

/// Undirected topology families used to build selection matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    Complete,
    Ring,
    ErdosRenyi { p: f64 },
    WattsStrogatz { k_nn: usize, p_rewire: f64 },
    BarabasiAlbert { m: usize },
}

impl Topology {
    fn is_random(&self) -> bool {
        !matches!(self, Topology::Complete | Topology::Ring)
    }

    fn check(&self, n: usize) -> Result<(), GraphError> {
        if n < 3 {
            return Err(GraphError::TooSmall(n));
        }
        let bad = |msg: String| Err(GraphError::BadParameter(msg));
        match *self {
            Topology::Complete | Topology::Ring => Ok(()),
            Topology::ErdosRenyi { p } if !(p > 0.0 && p <= 1.0) => {
                bad(format!("erdos_renyi p must be in (0, 1], got {p}"))
            }
            Topology::WattsStrogatz { k_nn, p_rewire } => {
                if k_nn < 2 || k_nn % 2 != 0 || k_nn >= n {
                    bad(format!("watts_strogatz k_nn must be even, >= 2 and < n, got {k_nn}"))
                } else if !(0.0..=1.0).contains(&p_rewire) {
                    bad(format!("watts_strogatz p_rewire must be in [0, 1], got {p_rewire}"))
                } else {
                    Ok(())
                }
            }
            Topology::BarabasiAlbert { m } if m == 0 || m >= n => {
                bad(format!("barabasi_albert m must be in 1..n, got {m}"))
            }
            _ => Ok(()),
        }
    }

    fn edges<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; n]; n];
        let link = |adj: &mut Vec<Vec<bool>>, u: usize, v: usize| {
            adj[u][v] = true;
            adj[v][u] = true;
        };
        match *self {
            Topology::Complete => {
                for u in 0..n {
                    for v in (u + 1)..n {
                        link(&mut adj, u, v);
                    }
                }
            }
            Topology::Ring => {
                for u in 0..n {
                    link(&mut adj, u, (u + 1) % n);
                }
            }
            Topology::ErdosRenyi { p } => {
                for u in 0..n {
                    for v in (u + 1)..n {
                        if rng.gen_bool(p) {
                            link(&mut adj, u, v);
                        }
                    }
                }
            }
            Topology::WattsStrogatz { k_nn, p_rewire } => {
                for u in 0..n {
                    for offset in 1..=k_nn / 2 {
                        link(&mut adj, u, (u + offset) % n);
                    }
                }
                for offset in 1..=k_nn / 2 {
                    for u in 0..n {
                        let v = (u + offset) % n;
                        if !adj[u][v] || !rng.gen_bool(p_rewire) {
                            continue;
                        }
                        let free: Vec<usize> = (0..n).filter(|&w| w != u && !adj[u][w]).collect();
                        if let Some(&w) = free.choose(rng) {
                            adj[u][v] = false;
                            adj[v][u] = false;
                            link(&mut adj, u, w);
                        }
                    }
                }
            }
            Topology::BarabasiAlbert { m } => {
                // Seed clique on m + 1 nodes, then preferential attachment.
                let mut endpoints = Vec::new();
                for u in 0..=m {
                    for v in (u + 1)..=m {
                        link(&mut adj, u, v);
                        endpoints.push(u);
                        endpoints.push(v);
                    }
                }
                for u in (m + 1)..n {
                    let mut targets = Vec::with_capacity(m);
                    while targets.len() < m {
                        let &v = endpoints.choose(rng).expect("seed clique is nonempty");
                        if !targets.contains(&v) {
                            targets.push(v);
                        }
                    }
                    for v in targets {
                        link(&mut adj, u, v);
                        endpoints.push(u);
                        endpoints.push(v);
                    }
                }
            }
        }
        adj
    }
}

/// Builds a selection matrix from a topology by uniform row normalization
/// over neighbors. Random families are redrawn until weakly connected.
pub fn generate(topology: Topology, n: usize, seed: u64) -> Result<SelectionMatrix, GraphError> {
    topology.check(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attempts = if topology.is_random() { MAX_GENERATOR_RETRIES } else { 1 };
    for _ in 0..attempts {
        let adj = topology.edges(n, &mut rng);
        if adj.iter().any(|r| !r.iter().any(|&e| e)) {
            continue;
        }
        let rows: Vec<Vec<f64>> = adj
            .iter()
            .map(|r| {
                let degree = r.iter().filter(|&&e| e).count() as f64;
                r.iter().map(|&e| if e { 1.0 / degree } else { 0.0 }).collect()
            })
            .collect();
        let a = SelectionMatrix::validate(rows)?;
        if a.induced_graph().is_weakly_connected() {
            return Ok(a);
        }
    }
    Err(GraphError::DisconnectedAfterRetries(attempts))
}

/// The four-node selection matrix of the reference numerical example.
pub fn reference_matrix() -> SelectionMatrix {
    SelectionMatrix::validate(vec![
        vec![0.0, 1.0 / 2.0, 0.0, 1.0 / 2.0],
        vec![1.0 / 2.0, 0.0, 1.0 / 4.0, 1.0 / 4.0],
        vec![1.0 / 3.0, 0.0, 0.0, 2.0 / 3.0],
        vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 0.0],
    ])
    .expect("reference matrix is stochastic")
}
