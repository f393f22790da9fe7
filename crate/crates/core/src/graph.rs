//! Communication topology: random geometric graphs, explicit edge lists,
//! neighbor sets, and the graph Laplacian.
//!
//! Networks are bidirectional and immutable after construction, so they can
//! be shared freely across concurrent Monte Carlo runs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::stats::{stream_id, RngStream, StreamPurpose};

/// An undirected communication graph over `J` nodes.
#[derive(Debug, Clone)]
pub struct Network {
    node_count: usize,
    positions: Option<Vec<[f64; 2]>>,
    adjacency: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Network {
    fn from_adjacency(node_count: usize, adjacency: Vec<bool>, positions: Option<Vec<[f64; 2]>>) -> Self {
        let mut neighbors = vec![Vec::new(); node_count];
        let mut edge_count = 0;
        for i in 0..node_count {
            for j in 0..node_count {
                if adjacency[i * node_count + j] {
                    neighbors[i].push(j);
                    if i < j {
                        edge_count += 1;
                    }
                }
            }
        }
        Network {
            node_count,
            positions,
            adjacency,
            neighbors,
            edge_count,
        }
    }

    /// Places `j` nodes i.i.d. uniform on the unit square and connects every
    /// pair within Euclidean distance `range`. Deterministic given `seed`.
    ///
    /// The output may be disconnected; callers that need connectivity use
    /// [`Network::connected_geometric`].
    pub fn random_geometric(j: usize, range: f64, seed: u64) -> Network {
        assert!(j >= 1, "need at least one node");
        assert!(
            range > 0.0 && range <= std::f64::consts::SQRT_2,
            "range must lie in (0, sqrt(2)]"
        );
        let mut stream = RngStream::new(seed, stream_id(StreamPurpose::Positions, 0));
        let positions: Vec<[f64; 2]> = (0..j)
            .map(|_| {
                let x = stream.uniform(0.0, 1.0);
                let y = stream.uniform(0.0, 1.0);
                [x, y]
            })
            .collect();
        let mut adjacency = vec![false; j * j];
        for a in 0..j {
            for b in (a + 1)..j {
                let dx = positions[a][0] - positions[b][0];
                let dy = positions[a][1] - positions[b][1];
                if (dx * dx + dy * dy).sqrt() <= range {
                    adjacency[a * j + b] = true;
                    adjacency[b * j + a] = true;
                }
            }
        }
        Network::from_adjacency(j, adjacency, Some(positions))
    }

    /// Resamples geometric graphs (deterministic sub-seeds of `seed`) until a
    /// connected one appears, up to `max_attempts`. Returns the graph and the
    /// attempt index that produced it.
    pub fn connected_geometric(
        j: usize,
        range: f64,
        seed: u64,
        max_attempts: u64,
    ) -> Result<(Network, u64)> {
        for attempt in 0..max_attempts {
            let net = Network::random_geometric(j, range, crate::stats::split_seed(seed, attempt));
            if net.is_connected() {
                return Ok((net, attempt));
            }
        }
        Err(Error::Graph(format!(
            "no connected geometric graph with J = {j}, range = {range} within {max_attempts} attempts"
        )))
    }

    /// Builds a network from an explicit unordered edge list, applying
    /// symmetric closure. Self-loops and out-of-range endpoints are rejected.
    pub fn from_edges(j: usize, edges: &[(usize, usize)]) -> Result<Network> {
        if j == 0 {
            return Err(Error::Graph("node count must be positive".to_string()));
        }
        let mut adjacency = vec![false; j * j];
        for &(a, b) in edges {
            if a == b {
                return Err(Error::Graph(format!("self-loop ({a}, {b}) is not allowed")));
            }
            if a >= j || b >= j {
                return Err(Error::Graph(format!(
                    "edge ({a}, {b}) has an endpoint outside [0, {j})"
                )));
            }
            adjacency[a * j + b] = true;
            adjacency[b * j + a] = true;
        }
        Ok(Network::from_adjacency(j, adjacency, None))
    }

    /// Parses the edge-list text format: first non-comment line holds `J`,
    /// each following line one `i j` edge. `#` starts a comment.
    pub fn from_edge_list_text(text: &str) -> Result<Network> {
        let mut j: Option<usize> = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if j.is_none() {
                j = Some(line.parse().map_err(|_| {
                    Error::Graph(format!("line {}: expected node count, got '{line}'", lineno + 1))
                })?);
                continue;
            }
            let mut parts = line.split_whitespace();
            let a: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Graph(format!("line {}: malformed edge '{line}'", lineno + 1)))?;
            let b: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Graph(format!("line {}: malformed edge '{line}'", lineno + 1)))?;
            if parts.next().is_some() {
                return Err(Error::Graph(format!(
                    "line {}: trailing tokens after edge '{line}'",
                    lineno + 1
                )));
            }
            edges.push((a, b));
        }
        let j = j.ok_or_else(|| Error::Graph("empty edge-list file".to_string()))?;
        Network::from_edges(j, &edges)
    }

    /// Serializes to the edge-list text format accepted by
    /// [`Network::from_edge_list_text`].
    pub fn to_edge_list_text(&self) -> String {
        let mut out = format!("{}\n", self.node_count);
        for i in 0..self.node_count {
            for &n in &self.neighbors[i] {
                if i < n {
                    out.push_str(&format!("{i} {n}\n"));
                }
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Sorted one-hop neighbor list of node `j`.
    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.neighbors[j]
    }

    pub fn degree(&self, j: usize) -> usize {
        self.neighbors[j].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a * self.node_count + b]
    }

    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        self.positions.as_deref()
    }

    /// True iff a traversal from node 0 reaches every node.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    stack.push(v);
                }
            }
        }
        reached == self.node_count
    }

    /// Laplacian `L = D - A` (degree on the diagonal, -1 per edge).
    pub fn laplacian(&self) -> DMatrix<f64> {
        let j = self.node_count;
        let mut l = DMatrix::zeros(j, j);
        for i in 0..j {
            l[(i, i)] = self.neighbors[i].len() as f64;
            for &n in &self.neighbors[i] {
                l[(i, n)] = -1.0;
            }
        }
        l
    }

    /// Largest eigenvalue of the Laplacian.
    ///
    /// Exact symmetric eigendecomposition for J <= 32, power iteration with a
    /// 1e-10 residual beyond that (the Laplacian is positive semi-definite so
    /// the dominant eigenvalue is the largest one).
    pub fn laplacian_max_eigenvalue(&self) -> f64 {
        let l = self.laplacian();
        if self.node_count <= 32 {
            let eig = l.symmetric_eigen();
            return eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        }
        let j = self.node_count;
        let mut v = nalgebra::DVector::from_element(j, 1.0 / (j as f64).sqrt());
        // Break symmetry so we do not start orthogonal to the top eigenvector.
        v[0] += 0.5;
        v /= v.norm();
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let w = &l * &v;
            let norm = w.norm();
            if norm == 0.0 {
                return 0.0;
            }
            let next = w / norm;
            let next_lambda = next.dot(&(&l * &next));
            if (next_lambda - lambda).abs() <= 1e-10 * next_lambda.abs().max(1.0) {
                return next_lambda;
            }
            lambda = next_lambda;
            v = next;
        }
        lambda
    }
}
