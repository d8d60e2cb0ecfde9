//! Diffusion graphs over the flattened parameter index.
//!
//! Node `i` always maps to flattened parameter `i`; the graph only supplies
//! degrees and neighbor lists to the cascade engine. Barabasi-Albert is the
//! default topology; the other four serve as controls.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Ring,
    Lattice2d,
    ErdosRenyi,
    BarabasiAlbert,
    WattsStrogatz,
}

impl Topology {
    pub const ALL: [Topology; 5] = [
        Topology::Ring,
        Topology::Lattice2d,
        Topology::ErdosRenyi,
        Topology::BarabasiAlbert,
        Topology::WattsStrogatz,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Topology::Ring => "ring",
            Topology::Lattice2d => "lattice2d",
            Topology::ErdosRenyi => "erdos_renyi",
            Topology::BarabasiAlbert => "barabasi_albert",
            Topology::WattsStrogatz => "watts_strogatz",
        }
    }

    pub fn from_tag(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(Topology::Ring),
            "lattice2d" => Ok(Topology::Lattice2d),
            "erdos_renyi" => Ok(Topology::ErdosRenyi),
            "barabasi_albert" => Ok(Topology::BarabasiAlbert),
            "watts_strogatz" => Ok(Topology::WattsStrogatz),
            other => Err(Error::Parse(format!("unknown topology '{other}'"))),
        }
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Generation parameters for the control topologies.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GraphParams {
    /// Barabasi-Albert edges per new node.
    pub ba_m: usize,
    /// Target mean degree for Erdos-Renyi (p = mean_degree / (N-1)).
    pub er_mean_degree: f64,
    /// Watts-Strogatz base ring degree (even).
    pub ws_degree: usize,
    /// Watts-Strogatz rewiring probability.
    pub ws_rewire: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            ba_m: 2,
            er_mean_degree: 4.0,
            ws_degree: 4,
            ws_rewire: 0.1,
        }
    }
}

/// Undirected simple graph over N parameter nodes. Immutable after generation.
#[derive(Debug, Clone)]
pub struct DiffusionGraph {
    n: usize,
    adj: Vec<Vec<usize>>,
    topology: Topology,
    gen_seed: u64,
}

impl DiffusionGraph {
    pub fn generate(
        topology: Topology,
        n: usize,
        params: &GraphParams,
        gen_seed: u64,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidConfig(format!(
                "graph needs N >= 3 nodes, got {n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(gen_seed);
        let edges = match topology {
            Topology::Ring => ring_edges(n),
            Topology::Lattice2d => lattice_edges(n),
            Topology::ErdosRenyi => er_edges(n, params.er_mean_degree, &mut rng)?,
            Topology::BarabasiAlbert => ba_edges(n, params.ba_m, &mut rng)?,
            Topology::WattsStrogatz => ws_edges(n, params.ws_degree, params.ws_rewire, &mut rng)?,
        };
        Self::from_edges(topology, n, gen_seed, &edges)
    }

    /// Builds the adjacency from an edge set, deduplicating and sorting.
    fn from_edges(topology: Topology, n: usize, gen_seed: u64, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            debug_assert!(a != b && a < n && b < n);
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(DiffusionGraph {
            n,
            adj,
            topology,
            gen_seed,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn gen_seed(&self) -> u64 {
        self.gen_seed
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        self.adj
            .get(i)
            .map(Vec::len)
            .ok_or(Error::IndexOutOfRange {
                index: i,
                len: self.n,
            })
    }

    /// Panics on out-of-range index; hot-path companion of [`Self::degree`].
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count() as f64 / self.n as f64
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Edge-list text export: one header line, then one "i j" pair per line
    /// with i < j, sorted.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# topology={} n={} gen_seed={}",
            self.topology.tag(),
            self.n,
            self.gen_seed
        )?;
        for (i, list) in self.adj.iter().enumerate() {
            for &j in list {
                if i < j {
                    writeln!(w, "{i} {j}")?;
                }
            }
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or(Error::EmptyInput("edge list"))?
            .map_err(Error::Io)?;
        let mut topology = None;
        let mut n = None;
        let mut gen_seed = 0u64;
        for field in header.trim_start_matches('#').split_whitespace() {
            match field.split_once('=') {
                Some(("topology", v)) => topology = Some(Topology::from_tag(v)?),
                Some(("n", v)) => {
                    n = Some(v.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?)
                }
                Some(("gen_seed", v)) => {
                    gen_seed = v.parse().map_err(|e: std::num::ParseIntError| {
                        Error::Parse(e.to_string())
                    })?
                }
                _ => {}
            }
        }
        let topology = topology.ok_or(Error::Parse("edge list header missing topology".into()))?;
        let n = n.ok_or(Error::Parse("edge list header missing n".into()))?;
        let mut edges = Vec::new();
        for line in lines {
            let line = line.map_err(Error::Io)?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let a: usize = it
                .next()
                .ok_or_else(|| Error::Parse(format!("bad edge line '{line}'")))?
                .parse()
                .map_err(|e: std::num::ParseIntError| Error::Parse(e.to_string()))?;
            let b: usize = it
                .next()
                .ok_or_else(|| Error::Parse(format!("bad edge line '{line}'")))?
                .parse()
                .map_err(|e: std::num::ParseIntError| Error::Parse(e.to_string()))?;
            if a >= n || b >= n || a == b {
                return Err(Error::Parse(format!("invalid edge '{line}' for n={n}")));
            }
            edges.push((a, b));
        }
        Self::from_edges(topology, n, gen_seed, &edges)
    }
}

fn ring_edges(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|i| (i, (i + 1) % n)).collect()
}

/// Near-square grid, 4-neighborhood, non-periodic, truncated to n nodes.
fn lattice_edges(n: usize) -> Vec<(usize, usize)> {
    let cols = (n as f64).sqrt().ceil() as usize;
    let mut edges = Vec::new();
    for i in 0..n {
        let (r, c) = (i / cols, i % cols);
        if c + 1 < cols && i + 1 < n {
            edges.push((i, i + 1));
        }
        let below = (r + 1) * cols + c;
        if below < n {
            edges.push((i, below));
        }
    }
    edges
}

fn er_edges(n: usize, mean_degree: f64, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    let p = mean_degree / (n - 1) as f64;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!(
            "erdos_renyi mean degree {mean_degree} infeasible for N={n}"
        )));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Ok(edges)
}

/// Preferential attachment from an m-clique seed; each new node attaches m
/// distinct edges sampled proportional to current degree.
fn ba_edges(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    if m == 0 || n <= m {
        return Err(Error::InvalidConfig(format!(
            "barabasi_albert needs N > m >= 1, got N={n}, m={m}"
        )));
    }
    let mut edges = Vec::new();
    // degree-weighted sampling via a repeated-endpoint list
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * (m * (m - 1) / 2 + (n - m) * m));
    for i in 0..m {
        for j in (i + 1)..m {
            edges.push((i, j));
            endpoints.push(i);
            endpoints.push(j);
        }
    }
    if m == 1 {
        // degenerate clique has no edges; bootstrap with node 0
        endpoints.push(0);
    }
    let mut targets = Vec::with_capacity(m);
    for v in m..n {
        targets.clear();
        while targets.len() < m {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((v, t));
            endpoints.push(v);
            endpoints.push(t);
        }
    }
    Ok(edges)
}

fn ws_edges(n: usize, k: usize, rewire: f64, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    if k == 0 || k % 2 != 0 || k >= n {
        return Err(Error::InvalidConfig(format!(
            "watts_strogatz needs even 0 < k < N, got k={k}, N={n}"
        )));
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for d in 1..=(k / 2) {
            let j = (i + d) % n;
            edges.push((i, j));
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for idx in 0..edges.len() {
        if rng.random::<f64>() >= rewire {
            continue;
        }
        let (i, old_j) = edges[idx];
        // pick a fresh endpoint, skipping self-loops and duplicates
        let mut candidates: Vec<usize> = (0..n)
            .filter(|&w| w != i && w != old_j && !adj[i].contains(&w))
            .collect();
        if candidates.is_empty() {
            continue;
        }
        candidates.shuffle(rng);
        let new_j = candidates[0];
        edges[idx] = (i, new_j);
        adj[i].retain(|&w| w != old_j);
        adj[old_j].retain(|&w| w != i);
        adj[i].push(new_j);
        adj[new_j].push(i);
    }
    Ok(edges)
}
