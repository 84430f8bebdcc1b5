//! Bayesian model averaging over DAG structures on binary data.
//!
//! Structures are scored by the beta-prior marginal likelihood
//!
//! ```text
//! P(D | G) = Π_i Π_j Γ(s_ij) / Γ(d_ij + s_ij) · Π_k Γ(d_ijk + s_ijk) / Γ(s_ijk)
//! ```
//!
//! with `s_ijk = S / (2 q_i)`, `s_ij = S / q_i`, `q_i = 2^{|Pa(i)|}`, and a
//! uniform prior over structures. Parent configurations are numbered by the
//! binary encoding of the parent values in ascending parent order.
//!
//! Node indices are 0-based throughout this module.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::chain::Kernel;
use crate::numeric::ln_gamma;
use crate::{Error, Result};

/// Largest number of nodes supported (parent sets are `u64` bitmasks).
pub const MAX_NODES: usize = 64;

/// Up to this many nodes, every family score is precomputed by the kernel.
const SCORE_TABLE_MAX_NODES: usize = 12;

/// A directed acyclic graph. `parents[i]` has bit `j` set iff `j → i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dag {
    n: usize,
    parents: Vec<u64>,
}

/// Whether a square boolean adjacency matrix (`adjacency[j][i]` meaning
/// `j → i`) admits a topological order.
pub fn is_acyclic(adjacency: &[Vec<bool>]) -> Result<bool> {
    let n = adjacency.len();
    if let Some(row) = adjacency.iter().position(|r| r.len() != n) {
        return Err(Error::invalid(format!("adjacency row {row} is not of length {n}")));
    }
    if let Some(i) = (0..n).find(|&i| adjacency[i][i]) {
        return Err(Error::invalid(format!("self-loop at node {i}")));
    }
    // Kahn's algorithm
    let mut indegree: Vec<usize> = (0..n).map(|i| (0..n).filter(|&j| adjacency[j][i]).count()).collect();
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut seen = 0;
    while let Some(j) = ready.pop() {
        seen += 1;
        for i in 0..n {
            if adjacency[j][i] {
                indegree[i] -= 1;
                if indegree[i] == 0 {
                    ready.push(i);
                }
            }
        }
    }
    Ok(seen == n)
}

impl Dag {
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_NODES {
            return Err(Error::invalid(format!("DAGs need 1..={MAX_NODES} nodes, got {n}")));
        }
        Ok(Self { n, parents: vec![0; n] })
    }

    pub fn from_adjacency(adjacency: &[Vec<bool>]) -> Result<Self> {
        if !is_acyclic(adjacency)? {
            return Err(Error::invalid("adjacency matrix contains a directed cycle"));
        }
        let mut g = Self::empty(adjacency.len())?;
        for (j, row) in adjacency.iter().enumerate() {
            for (i, &edge) in row.iter().enumerate() {
                if edge {
                    g.parents[i] |= 1 << j;
                }
            }
        }
        Ok(g)
    }

    /// Build from a list of `(from, to)` edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![vec![false; n]; n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::invalid(format!("edge ({a}, {b}) out of range")));
            }
            adjacency[a][b] = true;
        }
        Self::from_adjacency(&adjacency)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to] >> from & 1 == 1
    }

    /// Parent bitmask of `node`.
    #[inline]
    pub fn parent_mask(&self, node: usize) -> u64 {
        self.parents[node]
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(|p| p.count_ones() as usize).sum()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in 0..self.n {
                if self.has_edge(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.has_edge(j, i)).collect())
            .collect()
    }

    /// `reach[v]` = bitmask of nodes reachable from `v` by a non-empty path.
    fn reachability(&self) -> Vec<u64> {
        let n = self.n;
        let mut children = vec![0u64; n];
        for (i, &pa) in self.parents.iter().enumerate() {
            let mut bits = pa;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                children[j] |= 1 << i;
                bits &= bits - 1;
            }
        }
        let mut reach = children.clone();
        // iterate to a fixed point; at most n rounds
        loop {
            let mut changed = false;
            for v in 0..n {
                let mut acc = reach[v];
                let mut bits = reach[v];
                while bits != 0 {
                    let u = bits.trailing_zeros() as usize;
                    acc |= reach[u];
                    bits &= bits - 1;
                }
                if acc != reach[v] {
                    reach[v] = acc;
                    changed = true;
                }
            }
            if !changed {
                return reach;
            }
        }
    }

    /// Single-edge toggles `(from, to)` that keep the graph acyclic, in
    /// lexicographic order. Removals are always allowed; adding `a → b` is
    /// allowed unless `b` already reaches `a`.
    pub fn moves(&self) -> Vec<(usize, usize)> {
        let reach = self.reachability();
        let mut out = Vec::new();
        for a in 0..self.n {
            for (b, &rb) in reach.iter().enumerate() {
                if a != b && (self.has_edge(a, b) || rb >> a & 1 == 0) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// `|Nb(G)|`, the number of valid single-edge toggles.
    pub fn neighborhood_size(&self) -> usize {
        let reach = self.reachability();
        let mut count = 0;
        for a in 0..self.n {
            for (b, &rb) in reach.iter().enumerate() {
                if a != b && (self.has_edge(a, b) || rb >> a & 1 == 0) {
                    count += 1;
                }
            }
        }
        count
    }

    /// The graph with edge `from → to` toggled, without an acyclicity check.
    fn toggled_unchecked(&self, from: usize, to: usize) -> Dag {
        let mut g = self.clone();
        g.parents[to] ^= 1 << from;
        g
    }

    /// Toggle `from → to`; `None` if the result would contain a cycle.
    pub fn toggled(&self, from: usize, to: usize) -> Option<Dag> {
        if from == to || from >= self.n || to >= self.n {
            return None;
        }
        if !self.has_edge(from, to) && self.reachability()[to] >> from & 1 == 1 {
            return None;
        }
        Some(self.toggled_unchecked(from, to))
    }

    pub fn is_acyclic(&self) -> bool {
        let reach = self.reachability();
        (0..self.n).all(|v| reach[v] >> v & 1 == 0)
    }
}

/// All acyclic graphs one edge addition or removal away from `g`.
pub fn neighborhood(g: &Dag) -> Vec<Dag> {
    g.moves().into_iter().map(|(a, b)| g.toggled_unchecked(a, b)).collect()
}

/// Every DAG on `n` labelled nodes (exhaustive; practical for `n ≤ 4`).
pub fn enumerate_dags(n: usize) -> Result<Vec<Dag>> {
    if n > 5 {
        return Err(Error::invalid("exhaustive DAG enumeration is limited to 5 nodes"));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u64..(1 << pairs.len()) {
        let mut g = Dag::empty(n)?;
        for (bit, &(a, b)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                g.parents[b] |= 1 << a;
            }
        }
        if g.is_acyclic() {
            out.push(g);
        }
    }
    Ok(out)
}

/// Observations of `n` binary variables, one row per observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryDataset {
    n: usize,
    rows: Vec<Vec<u8>>,
    /// Row `r` as a bitmask over variables.
    packed: Vec<u64>,
}

impl BinaryDataset {
    pub fn new(n: usize, rows: Vec<Vec<u8>>) -> Result<Self> {
        if n == 0 || n > MAX_NODES {
            return Err(Error::invalid(format!(
                "datasets need 1..={MAX_NODES} columns, got {n}"
            )));
        }
        let mut packed = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse {
                    row: r + 1,
                    column: row.len().min(n) + 1,
                    message: format!("expected {n} columns, found {}", row.len()),
                });
            }
            let mut bits = 0u64;
            for (c, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => bits |= 1 << c,
                    _ => {
                        return Err(Error::Parse {
                            row: r + 1,
                            column: c + 1,
                            message: format!("entry {v} is not 0 or 1"),
                        })
                    }
                }
            }
            packed.push(bits);
        }
        Ok(Self { n, rows, packed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Parse comma-separated `0/1` rows. With `has_header` the first
    /// non-empty line is skipped. Blank lines are ignored.
    pub fn parse_csv(text: &str, has_header: bool) -> Result<Self> {
        let mut rows: Vec<Vec<u8>> = Vec::new();
        let mut width: Option<usize> = None;
        let mut skip_header = has_header;
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if skip_header {
                skip_header = false;
                continue;
            }
            let mut row = Vec::new();
            for (c, cell) in line.split(',').enumerate() {
                let cell = cell.trim();
                let value = match cell {
                    "0" => 0,
                    "1" => 1,
                    _ => {
                        return Err(Error::Parse {
                            row: line_no + 1,
                            column: c + 1,
                            message: format!("entry {cell:?} is not 0 or 1"),
                        })
                    }
                };
                row.push(value);
            }
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::Parse {
                        row: line_no + 1,
                        column: row.len().min(w) + 1,
                        message: format!("expected {w} columns, found {}", row.len()),
                    })
                }
                _ => {}
            }
            rows.push(row);
        }
        let n = width.ok_or_else(|| Error::invalid("dataset has no rows"))?;
        Self::new(n, rows)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let cells: Vec<&str> = row.iter().map(|&v| if v == 1 { "1" } else { "0" }).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Counts `(d_ij0, d_ij1)` of `node` per observed parent configuration
    /// `j`.
    fn family_counts(&self, node: usize, parents: u64) -> BTreeMap<u64, [u32; 2]> {
        let mut counts: BTreeMap<u64, [u32; 2]> = BTreeMap::new();
        for &row in &self.packed {
            let config = extract_bits(row, parents);
            counts.entry(config).or_default()[(row >> node & 1) as usize] += 1;
        }
        counts
    }
}

/// Gather the bits of `value` selected by `mask`, lowest selected bit first.
#[inline]
fn extract_bits(value: u64, mask: u64) -> u64 {
    let mut out = 0u64;
    let mut bits = mask;
    let mut pos = 0;
    while bits != 0 {
        let j = bits.trailing_zeros();
        out |= (value >> j & 1) << pos;
        pos += 1;
        bits &= bits - 1;
    }
    out
}

/// Read a dataset file (see [`BinaryDataset::parse_csv`]).
pub fn load_dataset(path: impl AsRef<Path>, has_header: bool) -> Result<BinaryDataset> {
    let text = fs::read_to_string(path)?;
    BinaryDataset::parse_csv(&text, has_header)
}

pub fn save_dataset(path: impl AsRef<Path>, data: &BinaryDataset) -> Result<()> {
    fs::write(path, data.to_csv())?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmaConfig {
    /// Equivalent sample size `S`.
    pub equivalent_sample_size: f64,
}

impl BmaConfig {
    pub fn new(equivalent_sample_size: f64) -> Result<Self> {
        if !(equivalent_sample_size > 0.0) || !equivalent_sample_size.is_finite() {
            return Err(Error::invalid(format!(
                "equivalent sample size must be positive, got {equivalent_sample_size}"
            )));
        }
        Ok(Self { equivalent_sample_size })
    }
}

/// Log marginal likelihood contribution of `node` with parent set `parents`.
pub fn family_log_score(node: usize, parents: u64, data: &BinaryDataset, cfg: &BmaConfig) -> f64 {
    let q = 2f64.powi(parents.count_ones() as i32);
    let s_ij = cfg.equivalent_sample_size / q;
    let s_ijk = s_ij / 2.0;
    let lg_ij = ln_gamma(s_ij);
    let lg_ijk = ln_gamma(s_ijk);
    // unobserved configurations contribute Γ(s)/Γ(s) = 1
    data.family_counts(node, parents)
        .values()
        .map(|&[d0, d1]| {
            let d = (d0 + d1) as f64;
            lg_ij - ln_gamma(d + s_ij) + ln_gamma(d0 as f64 + s_ijk) - lg_ijk + ln_gamma(d1 as f64 + s_ijk) - lg_ijk
        })
        .sum()
}

/// `log P(D | G)`, the sum of the node family scores.
pub fn log_marginal_likelihood(g: &Dag, data: &BinaryDataset, cfg: &BmaConfig) -> Result<f64> {
    if data.n() != g.n() {
        return Err(Error::invalid(format!(
            "dataset has {} variables, graph has {} nodes",
            data.n(),
            g.n()
        )));
    }
    Ok((0..g.n())
        .map(|i| family_log_score(i, g.parent_mask(i), data, cfg))
        .sum())
}

/// Exact posterior `P(G | D)` over every DAG on `data.n()` nodes.
pub fn exact_posterior(data: &BinaryDataset, cfg: &BmaConfig) -> Result<Vec<(Dag, f64)>> {
    let dags = enumerate_dags(data.n())?;
    let scores: Vec<f64> = dags
        .iter()
        .map(|g| log_marginal_likelihood(g, data, cfg))
        .collect::<Result<_>>()?;
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(dags.into_iter().zip(weights.into_iter().map(|w| w / total)).collect())
}

/// Add/remove-edge Metropolis-Hastings chain targeting `P(G | D)` under a
/// uniform structure prior.
///
/// From `G` a neighbour `G'` is proposed uniformly from `Nb(G)` and accepted
/// with probability `min{1, |Nb(G)| P(G'|D) / (|Nb(G')| P(G|D))}`. The
/// likelihood ratio only involves the family of the toggled edge's head.
#[derive(Debug, Clone)]
pub struct DagKernel {
    data: BinaryDataset,
    cfg: BmaConfig,
    /// `score_table[node << n | parents]` when `n` is small.
    score_table: Option<Vec<f64>>,
}

pub fn mh_dag_kernel(data: BinaryDataset, cfg: BmaConfig) -> DagKernel {
    DagKernel::new(data, cfg)
}

impl DagKernel {
    pub fn new(data: BinaryDataset, cfg: BmaConfig) -> Self {
        let n = data.n();
        let score_table = (n <= SCORE_TABLE_MAX_NODES).then(|| {
            (0..n << n)
                .map(|idx| {
                    let node = idx >> n;
                    let parents = (idx & ((1 << n) - 1)) as u64;
                    if parents >> node & 1 == 1 {
                        f64::NAN
                    } else {
                        family_log_score(node, parents, &data, &cfg)
                    }
                })
                .collect()
        });
        Self { data, cfg, score_table }
    }

    pub fn data(&self) -> &BinaryDataset {
        &self.data
    }

    pub fn config(&self) -> &BmaConfig {
        &self.cfg
    }

    #[inline]
    fn family_score(&self, node: usize, parents: u64) -> f64 {
        match &self.score_table {
            Some(table) => table[node << self.data.n() | parents as usize],
            None => family_log_score(node, parents, &self.data, &self.cfg),
        }
    }

    /// `log P(D|G') − log P(D|G)` for `G'` = `g` with `from → to` toggled,
    /// evaluated on the family of `to` only.
    pub fn local_score_delta(&self, g: &Dag, from: usize, to: usize) -> f64 {
        let before = g.parent_mask(to);
        self.family_score(to, before ^ (1 << from)) - self.family_score(to, before)
    }

    /// Exact one-step law from `g` as `(next, probability)` pairs.
    pub fn transitions(&self, g: &Dag) -> Vec<(Dag, f64)> {
        let moves = g.moves();
        let mut law: BTreeMap<Dag, f64> = BTreeMap::new();
        if moves.is_empty() {
            law.insert(g.clone(), 1.0);
        }
        let propose = 1.0 / moves.len() as f64;
        for &(a, b) in &moves {
            let next = g.toggled_unchecked(a, b);
            let accept = self.acceptance(g, &next, moves.len(), a, b);
            *law.entry(next).or_default() += propose * accept;
            *law.entry(g.clone()).or_default() += propose * (1.0 - accept);
        }
        law.into_iter().filter(|&(_, p)| p > 0.0).collect()
    }

    fn acceptance(&self, g: &Dag, next: &Dag, nb_here: usize, from: usize, to: usize) -> f64 {
        let log_ratio =
            self.local_score_delta(g, from, to) + (nb_here as f64).ln() - (next.neighborhood_size() as f64).ln();
        log_ratio.exp().min(1.0)
    }
}

impl Kernel for DagKernel {
    type State = Dag;

    fn step<R: Rng + ?Sized>(&self, g: &mut Dag, rng: &mut R) {
        let moves = g.moves();
        if moves.is_empty() {
            return;
        }
        let (a, b) = moves[rng.random_range(0..moves.len())];
        let next = g.toggled_unchecked(a, b);
        let accept = self.acceptance(g, &next, moves.len(), a, b);
        if accept >= 1.0 || rng.random::<f64>() < accept {
            debug_assert!(next.is_acyclic());
            *g = next;
        }
    }

    fn is_reversible(&self) -> bool {
        true
    }
}

/// Indicator of the edge `from → to`, an observable bounded by `C = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeIndicator {
    pub from: usize,
    pub to: usize,
}

impl EdgeIndicator {
    #[inline]
    pub fn eval(&self, g: &Dag) -> f64 {
        if g.has_edge(self.from, self.to) {
            1.0
        } else {
            0.0
        }
    }
}

pub fn edge_indicator(from: usize, to: usize) -> Result<EdgeIndicator> {
    if from == to {
        return Err(Error::invalid(format!(
            "edge indicator needs distinct nodes, got {from} twice"
        )));
    }
    Ok(EdgeIndicator { from, to })
}

/// Edges of the 6-node network used to synthesise demonstration data:
/// `0→1, 0→2, 1→3, 2→3, 3→4, 2→5`.
pub const GENERATOR_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (2, 5)];

/// Sample `rows` observations from the generator network.
///
/// Roots are fair coins. A child equals 1 with probability
/// `0.1 + 0.8 · (fraction of parents equal to 1)`.
pub fn generate_dataset<R: Rng + ?Sized>(rows: usize, rng: &mut R) -> BinaryDataset {
    let n = 6;
    let g = Dag::from_edges(n, &GENERATOR_EDGES).expect("generator network is acyclic");
    let mut data = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut row = vec![0u8; n];
        // node indices are already a topological order
        for i in 0..n {
            let pa = g.parent_mask(i);
            let p = if pa == 0 {
                0.5
            } else {
                let ones = (0..n).filter(|&j| pa >> j & 1 == 1 && row[j] == 1).count();
                0.1 + 0.8 * ones as f64 / pa.count_ones() as f64
            };
            row[i] = rng.random_bool(p) as u8;
        }
        data.push(row);
    }
    BinaryDataset::new(n, data).expect("generated rows are binary")
}
