//! Physical link planning from energy affinity.
//!
//! Two pairwise metrics (AEA on horizon averages, SEA on per-slot Gaussian
//! NRE statistics) drive either a greedy agglomerative linker or a divisive
//! maximum-spanning-tree prune.

use serde::{Deserialize, Serialize};

use crate::affinity::{energy_loss, prob_abs_diff_exceeds, prob_negative, prob_same_sign, PairStats};
use crate::model::{distance, CableModel, NetworkModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Aea,
    Sea,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusteringMethod {
    AgglomerativeAea,
    AgglomerativeSea,
    DivisiveAea,
    DivisiveSea,
}

impl ClusteringMethod {
    pub const ALL: [ClusteringMethod; 4] =
        [Self::AgglomerativeAea, Self::AgglomerativeSea, Self::DivisiveAea, Self::DivisiveSea];

    pub fn metric(self) -> MetricKind {
        match self {
            Self::AgglomerativeAea | Self::DivisiveAea => MetricKind::Aea,
            Self::AgglomerativeSea | Self::DivisiveSea => MetricKind::Sea,
        }
    }

    pub fn is_divisive(self) -> bool {
        matches!(self, Self::DivisiveAea | Self::DivisiveSea)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::AgglomerativeAea => "agglomerative_aea",
            Self::AgglomerativeSea => "agglomerative_sea",
            Self::DivisiveAea => "divisive_aea",
            Self::DivisiveSea => "divisive_sea",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringParams {
    /// ε, Wh per km.
    pub aea_penalty: f64,
    /// ζ, per km.
    pub sea_floor: f64,
    /// δ, Wh.
    pub energy_gap: f64,
    /// φ_l
    pub low_threshold: f64,
    /// φ_h
    pub high_threshold: f64,
    pub method: ClusteringMethod,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self {
            aea_penalty: 1e6,
            sea_floor: 1e-6,
            energy_gap: 0.0,
            low_threshold: 0.5,
            high_threshold: 0.5,
            method: ClusteringMethod::DivisiveSea,
        }
    }
}

impl ClusteringParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.aea_penalty > 0.0
            && self.sea_floor > 0.0
            && self.sea_floor < 1.0
            && self.energy_gap >= 0.0
            && (0.0..=1.0).contains(&self.low_threshold)
            && (0.0..=1.0).contains(&self.high_threshold);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("clustering parameters out of range".into()))
        }
    }
}

/// Symmetric 0/1 matrix of installed lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationMatrix {
    links: Vec<Vec<bool>>,
}

impl AssociationMatrix {
    pub fn empty(k: usize) -> Self {
        Self { links: vec![vec![false; k]; k] }
    }

    pub fn from_edges(k: usize, edges: &[(usize, usize)]) -> Self {
        let mut a = Self::empty(k);
        for &(i, j) in edges {
            a.link(i, j);
        }
        a
    }

    pub fn size(&self) -> usize {
        self.links.len()
    }

    /// # Panics
    /// On a self-link.
    pub fn link(&mut self, i: usize, j: usize) {
        assert_ne!(i, j, "a station cannot be linked to itself");
        self.links[i][j] = true;
        self.links[j][i] = true;
    }

    pub fn is_linked(&self, i: usize, j: usize) -> bool {
        self.links[i][j]
    }

    /// Edges `(i, j)` with `i < j` in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let k = self.size();
        (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).filter(|&(i, j)| self.links[i][j]).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn total_length(&self, positions: &[[f64; 2]]) -> f64 {
        self.edges().iter().map(|&(i, j)| distance(positions[i], positions[j])).fold(0.0, |a, d| a + d)
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.links.iter().map(|r| r.iter().map(|&b| b as u8).collect()).collect()
    }
}

/// Per-station, per-slot NRE moments and horizon averages.
#[derive(Debug, Clone, PartialEq)]
pub struct NreTable {
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
    /// `Ê_i = (1/N) Σ_n μ_i^E(n)`.
    pub average: Vec<f64>,
}

impl NreTable {
    pub fn new(mean: Vec<Vec<f64>>, std: Vec<Vec<f64>>) -> Self {
        let average = mean.iter().map(|row| row.iter().sum::<f64>() / row.len() as f64).collect();
        Self { mean, std, average }
    }

    pub fn from_network(net: &NetworkModel) -> Self {
        let stats = net.nre_stats();
        Self::new(
            stats.iter().map(|r| r.iter().map(|s| s.0).collect()).collect(),
            stats.iter().map(|r| r.iter().map(|s| s.1).collect()).collect(),
        )
    }

    /// Only horizon averages, for AEA-only use.
    pub fn from_averages(average: Vec<f64>) -> Self {
        let mean = average.iter().map(|&a| vec![a]).collect();
        let std = average.iter().map(|_| vec![1.0]).collect();
        Self { mean, std, average }
    }

    pub fn bs_count(&self) -> usize {
        self.average.len()
    }

    fn refresh_average(&mut self, i: usize) {
        self.average[i] = self.mean[i].iter().sum::<f64>() / self.mean[i].len() as f64;
    }

    /// `(Π_n P[E_i(n) < 0])^(1/N)`, computed in log space.
    pub fn deficiency(&self, i: usize) -> f64 {
        geometric_mean(self.mean[i].iter().zip(&self.std[i]).map(|(&m, &s)| prob_negative(m, s)))
    }

    /// Geometric mean over slots of the probability both NREs share a sign.
    pub fn same_sign_geomean(&self, i: usize, j: usize) -> f64 {
        geometric_mean(
            (0..self.mean[i].len())
                .map(|n| prob_same_sign(self.mean[i][n], self.std[i][n], self.mean[j][n], self.std[j][n])),
        )
    }
}

fn geometric_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in values {
        if p <= 0.0 {
            return 0.0;
        }
        sum += p.ln();
        count += 1;
    }
    if count == 0 {
        return 0.0;
    }
    (sum / count as f64).exp()
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Everything a metric needs besides the station pair.
#[derive(Debug, Clone, Copy)]
pub struct MetricContext<'a> {
    pub positions: &'a [[f64; 2]],
    pub params: &'a ClusteringParams,
    pub cable: &'a CableModel,
    pub tau: f64,
}

impl MetricContext<'_> {
    fn dist(&self, i: usize, j: usize) -> f64 {
        distance(self.positions[i], self.positions[j])
    }

    fn in_range(&self, i: usize, j: usize) -> bool {
        self.dist(i, j) <= self.cable.sharing_range_km
    }
}

fn aea_qualifies(i: usize, j: usize, table: &NreTable, ctx: &MetricContext) -> bool {
    ctx.in_range(i, j) && sign(table.average[i]) != sign(table.average[j])
}

fn sea_qualifies(i: usize, j: usize, table: &NreTable, ctx: &MetricContext) -> bool {
    ctx.in_range(i, j) && table.same_sign_geomean(i, j) < ctx.params.low_threshold
}

pub fn aea_metric(i: usize, j: usize, table: &NreTable, ctx: &MetricContext) -> f64 {
    let d = ctx.dist(i, j);
    if aea_qualifies(i, j, table, ctx) {
        let (a, b) = (table.average[i], table.average[j]);
        let transfer = a.abs().min(b.abs());
        a.max(b) - a.min(b) - energy_loss(transfer, d, ctx.cable, ctx.tau)
    } else {
        -ctx.params.aea_penalty * d
    }
}

pub fn sea_metric(i: usize, j: usize, table: &NreTable, ctx: &MetricContext) -> f64 {
    let d = ctx.dist(i, j);
    if sea_qualifies(i, j, table, ctx) {
        let slots = table.mean[i].len();
        let total: f64 = (0..slots)
            .map(|n| {
                let pair = PairStats {
                    mu_i: table.mean[i][n],
                    sigma_i: table.std[i][n],
                    mu_j: table.mean[j][n],
                    sigma_j: table.std[j][n],
                };
                prob_abs_diff_exceeds(&pair, ctx.params.energy_gap)
            })
            .sum();
        total / slots as f64
    } else {
        ctx.params.sea_floor * d
    }
}

fn metric(kind: MetricKind, i: usize, j: usize, table: &NreTable, ctx: &MetricContext) -> f64 {
    match kind {
        MetricKind::Aea => aea_metric(i, j, table, ctx),
        MetricKind::Sea => sea_metric(i, j, table, ctx),
    }
}

fn qualifies(kind: MetricKind, i: usize, j: usize, table: &NreTable, ctx: &MetricContext) -> bool {
    match kind {
        MetricKind::Aea => aea_qualifies(i, j, table, ctx),
        MetricKind::Sea => sea_qualifies(i, j, table, ctx),
    }
}

fn is_deficient(kind: MetricKind, i: usize, table: &NreTable, params: &ClusteringParams) -> bool {
    match kind {
        MetricKind::Aea => table.average[i] < 0.0,
        MetricKind::Sea => table.deficiency(i) > params.high_threshold,
    }
}

/// Greedy agglomerative linking: repeatedly take the most deficient station
/// and link it to its best-scoring in-range non-deficient neighbour.
pub fn agglomerative_cluster(kind: MetricKind, table: &NreTable, ctx: &MetricContext) -> AssociationMatrix {
    let k = table.bs_count();
    let mut table = table.clone();
    let mut a = AssociationMatrix::empty(k);
    let mut pending: Vec<bool> = (0..k).map(|i| is_deficient(kind, i, &table, ctx.params)).collect();
    // Each pass either drops a station or installs a new link.
    let cap = k + k * k;
    for _ in 0..cap {
        let worst = (0..k).filter(|&i| pending[i]).fold(None, |best: Option<(usize, f64)>, i| {
            let score = match kind {
                MetricKind::Aea => -table.average[i],
                MetricKind::Sea => table.deficiency(i),
            };
            match best {
                Some((_, s)) if s >= score => best,
                _ => Some((i, score)),
            }
        });
        let Some((hat_i, _)) = worst else { break };

        let neighbours: Vec<usize> =
            (0..k).filter(|&j| j != hat_i && ctx.in_range(hat_i, j) && !a.is_linked(hat_i, j)).collect();
        let candidates: Vec<usize> =
            neighbours.iter().copied().filter(|&j| !is_deficient(kind, j, &table, ctx.params)).collect();
        if candidates.is_empty() {
            pending[hat_i] = false;
            continue;
        }
        let mut hat_j = candidates[0];
        let mut best = metric(kind, hat_i, hat_j, &table, ctx);
        for &j in &candidates[1..] {
            let m = metric(kind, hat_i, j, &table, ctx);
            if m > best {
                best = m;
                hat_j = j;
            }
        }
        a.link(hat_i, hat_j);

        match kind {
            MetricKind::Aea => {
                if best > 0.0 {
                    table.average[hat_j] = best;
                    pending[hat_i] = false;
                } else {
                    table.average[hat_j] = 0.0;
                    table.average[hat_i] = best;
                }
            }
            MetricKind::Sea => {
                for n in 0..table.mean[hat_i].len() {
                    let shift = table.mean[hat_i][n].abs().min(table.mean[hat_j][n].abs());
                    table.mean[hat_i][n] += shift;
                    table.mean[hat_j][n] -= shift;
                }
                table.refresh_average(hat_i);
                table.refresh_average(hat_j);
                if !is_deficient(kind, hat_i, &table, ctx.params) {
                    pending[hat_i] = false;
                }
            }
        }
    }
    a
}

/// Maximum-weight spanning forest by Kruskal's algorithm. Ties go to the
/// lexicographically smaller edge.
pub fn max_spanning_tree(weights: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let k = weights.len();
    let mut edges: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    edges.sort_by(|&(a, b), &(c, d)| weights[c][d].total_cmp(&weights[a][b]).then((a, b).cmp(&(c, d))));
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut tree = Vec::with_capacity(k.saturating_sub(1));
    for (i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri.max(rj)] = ri.min(rj);
            tree.push((i, j));
            if tree.len() + 1 == k {
                break;
            }
        }
    }
    tree.sort();
    tree
}

/// Divisive clustering: full-mesh metric weights, maximum spanning tree, then
/// drop tree edges that are out of range or fail the metric's affinity test.
pub fn divisive_cluster(kind: MetricKind, table: &NreTable, ctx: &MetricContext) -> AssociationMatrix {
    let k = table.bs_count();
    let mut w = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let m = metric(kind, i, j, table, ctx);
            w[i][j] = m;
            w[j][i] = m;
        }
    }
    let kept: Vec<(usize, usize)> =
        max_spanning_tree(&w).into_iter().filter(|&(i, j)| qualifies(kind, i, j, table, ctx)).collect();
    AssociationMatrix::from_edges(k, &kept)
}

pub fn cluster(method: ClusteringMethod, table: &NreTable, ctx: &MetricContext) -> AssociationMatrix {
    if method.is_divisive() {
        divisive_cluster(method.metric(), table, ctx)
    } else {
        agglomerative_cluster(method.metric(), table, ctx)
    }
}

/// Clusters a built network with its own cable range and NRE statistics.
pub fn cluster_network(net: &NetworkModel, params: &ClusteringParams, method: ClusteringMethod) -> AssociationMatrix {
    let positions = net.positions();
    let ctx = MetricContext { positions: &positions, params, cable: &net.cable, tau: net.slot_duration_h };
    cluster(method, &NreTable::from_network(net), &ctx)
}
