//! Samplers for the final active-set size.
//!
//! Seeds are the nodes `0..a`. Node labels are exchangeable in `G(n, p)`, so
//! the law of `A*` is the same as with uniformly chosen seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Full description of the randomness of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSpec { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Independent seed for a sub-task, so that nested replicate loops do
    /// not reuse streams.
    pub fn derive(&self, tag: u64) -> RngSpec {
        RngSpec { seed: splitmix(self.seed ^ splitmix(self.stream.wrapping_add(tag.rotate_left(32)))), stream: 0 }
    }
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PercolationOutcome {
    pub final_size: u64,
    pub stop_time: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generations: Option<u64>,
}

/// Above this size edges are drawn by geometric skipping instead of one
/// uniform per pair.
pub const PER_PAIR_MAX_N: u64 = 10_000;
/// Default refusal threshold for samplers that materialize the graph.
pub const DEFAULT_GRAPH_CAP: u64 = 100_000;
const MAX_ADJACENCY_ENTRIES: f64 = 4e8;

/// Uniform on `(0, 1]`, so its logarithm is finite.
fn open_uniform<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Number of Bernoulli(`p`) trials up to and including the first success,
/// by inversion. `ln_q = ln(1 - p)`; the value saturates at `u64::MAX`.
fn geometric<R: Rng>(rng: &mut R, ln_q: f64) -> u64 {
    let g = (open_uniform(rng).ln() / ln_q).floor();
    if g >= (u64::MAX - 1) as f64 {
        u64::MAX
    } else {
        1 + g as u64
    }
}

/// Simple undirected graph as adjacency lists.
#[derive(Debug, Clone)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
}

impl Graph {
    /// Samples `G(n, p)`. For `n ≤ PER_PAIR_MAX_N` every pair consumes one
    /// uniform in a fixed order, so graphs drawn with the same stream and
    /// `p₁ ≤ p₂` are nested.
    pub fn sample<R: Rng>(n: u64, p: f64, cap: u64, rng: &mut R) -> Result<Graph> {
        if n > cap {
            return Err(Error::CapExceeded { n, cap, what: "graph sampling" });
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("p = {p} must be in [0, 1]")));
        }
        let nf = n as f64;
        if nf * (nf - 1.0) * p > MAX_ADJACENCY_ENTRIES {
            return Err(Error::CapExceeded { n, cap, what: "graph sampling (expected edge count)" });
        }
        let n = n as usize;
        let mut adj = vec![Vec::new(); n];
        if n as u64 <= PER_PAIR_MAX_N {
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < p {
                        adj[i].push(j as u32);
                        adj[j].push(i as u32);
                    }
                }
            }
        } else if p > 0.0 {
            // walk the lower triangle row by row, jumping over absent edges
            let ln_q = (-p).ln_1p();
            let (mut v, mut w) = (1u64, 0u64);
            let n64 = n as u64;
            let mut first = true;
            loop {
                let step = if first { geometric(rng, ln_q) - 1 } else { geometric(rng, ln_q) };
                first = false;
                w = w.saturating_add(step);
                while v < n64 && w >= v {
                    w -= v;
                    v += 1;
                }
                if v >= n64 {
                    break;
                }
                adj[v as usize].push(w as u32);
                adj[w as usize].push(v as u32);
            }
        }
        Ok(Graph { adj })
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Runs the cascade from seeds `0..a` to its fixpoint and returns the
    /// final active count and the number of generations that activated
    /// at least one node.
    pub fn percolate(&self, a: usize, r: u32) -> (u64, u64) {
        let n = self.adj.len();
        let mut marks = vec![0u32; n];
        let mut active = vec![false; n];
        let mut frontier: Vec<u32> = (0..a.min(n) as u32).collect();
        for &s in &frontier {
            active[s as usize] = true;
        }
        let mut total = frontier.len() as u64;
        let mut generations = 0;
        let mut next = Vec::new();
        while !frontier.is_empty() {
            for &u in &frontier {
                for &v in &self.adj[u as usize] {
                    let v = v as usize;
                    if !active[v] {
                        marks[v] += 1;
                        if marks[v] >= r {
                            active[v] = true;
                            next.push(v as u32);
                        }
                    }
                }
            }
            if !next.is_empty() {
                generations += 1;
                total += next.len() as u64;
            }
            std::mem::swap(&mut frontier, &mut next);
            next.clear();
        }
        (total, generations)
    }

    /// Number of nodes of degree strictly less than `r`.
    pub fn low_degree_count(&self, r: u32) -> u64 {
        self.adj.iter().filter(|l| l.len() < r as usize).count() as u64
    }
}

fn check(params: &ModelParams) -> Result<()> {
    params.validate()
}

/// Builds the graph and runs the cascade generation by generation.
pub fn sample_graph(params: &ModelParams, rng: RngSpec) -> Result<PercolationOutcome> {
    sample_graph_capped(params, rng, DEFAULT_GRAPH_CAP)
}

pub fn sample_graph_capped(params: &ModelParams, rng: RngSpec, cap: u64) -> Result<PercolationOutcome> {
    check(params)?;
    let g = Graph::sample(params.n, params.p, cap, &mut rng.rng())?;
    let (size, generations) = g.percolate(params.a as usize, params.r);
    Ok(PercolationOutcome { final_size: size, stop_time: size, trajectory: None, generations: Some(generations) })
}

/// Node-at-a-time exploration: at step `t` one active node is used and marks
/// each inactive node independently with probability `p`.
pub fn sample_markchain(params: &ModelParams, rng: RngSpec) -> Result<PercolationOutcome> {
    check(params)?;
    let mut rng = rng.rng();
    let (n, a, r) = (params.n, params.a, params.r);
    let mut marks: Vec<u32> = vec![0; (n - a) as usize];
    let mut active = a;
    let mut trajectory = vec![a];
    let mut t = 0u64;
    while active > t {
        t += 1;
        if params.p > 0.0 {
            let mut i = 0;
            while i < marks.len() {
                if rng.random::<f64>() < params.p {
                    marks[i] += 1;
                    if marks[i] >= r {
                        marks.swap_remove(i);
                        active += 1;
                        continue;
                    }
                }
                i += 1;
            }
        }
        trajectory.push(active);
    }
    Ok(PercolationOutcome { final_size: active, stop_time: t, trajectory: Some(trajectory), generations: None })
}

/// Reusable buffers for the activation-time sampler.
#[derive(Debug, Default, Clone)]
pub struct ActivationSampler {
    counts: Vec<u32>,
}

impl ActivationSampler {
    pub fn new() -> Self {
        Self::default()
    }

    /// One replicate driven by `rng`; returns the stop time `T = A*`.
    pub fn stop_time<R: Rng>(&mut self, params: &ModelParams, rng: &mut R) -> u64 {
        let (n, a) = (params.n, params.a);
        if params.p <= 0.0 {
            return a;
        }
        self.counts.clear();
        self.counts.resize(n as usize + 1, 0);
        let ln_q = (-params.p).ln_1p();
        for _ in 0..(n - a) {
            let mut y = 0u64;
            for _ in 0..params.r {
                y = y.saturating_add(geometric(rng, ln_q));
                if y > n {
                    break;
                }
            }
            if y <= n {
                self.counts[y as usize] += 1;
            }
        }
        let mut active = a;
        let mut t = 0u64;
        while active > t {
            t += 1;
            active += self.counts[t as usize] as u64;
        }
        t
    }

    /// Replicate with the full trajectory `A(0..=T)`.
    pub fn outcome<R: Rng>(&mut self, params: &ModelParams, rng: &mut R) -> PercolationOutcome {
        let t_stop = self.stop_time(params, rng);
        let mut trajectory = Vec::with_capacity(t_stop as usize + 1);
        let mut active = params.a;
        trajectory.push(active);
        for t in 1..=t_stop {
            if params.p > 0.0 {
                active += self.counts[t as usize] as u64;
            }
            trajectory.push(active);
        }
        PercolationOutcome { final_size: t_stop, stop_time: t_stop, trajectory: Some(trajectory), generations: None }
    }
}

/// Draws the activation times `Y_i` (time of the `r`-th mark) directly and
/// sweeps `A(t) = a + #{Y_i ≤ t}` for the first `t` with `A(t) = t`.
pub fn sample_activation_times(params: &ModelParams, rng: RngSpec) -> Result<PercolationOutcome> {
    check(params)?;
    Ok(ActivationSampler::new().outcome(params, &mut rng.rng()))
}

/// Activation time of a single node, `+∞` (as `None`) when `p = 0`.
pub fn sample_activation_time<R: Rng>(p: f64, r: u32, rng: &mut R) -> Option<u64> {
    if p <= 0.0 {
        return None;
    }
    let ln_q = (-p).ln_1p();
    Some((0..r).fold(0u64, |y, _| y.saturating_add(geometric(rng, ln_q))))
}

/// Samples `G(n, p)` and counts nodes of degree below `r`.
///
/// Only degrees are needed, so edges are always drawn by geometric skipping.
pub fn count_low_degree(params: &ModelParams, rng: RngSpec) -> Result<u64> {
    count_low_degree_capped(params, rng, DEFAULT_GRAPH_CAP)
}

pub fn count_low_degree_capped(params: &ModelParams, rng: RngSpec, cap: u64) -> Result<u64> {
    check(params)?;
    if params.n > cap {
        return Err(Error::CapExceeded { n: params.n, cap, what: "degree sampling" });
    }
    let (n, p, r) = (params.n, params.p, params.r);
    if p <= 0.0 {
        return Ok(n);
    }
    let mut deg = vec![0u32; n as usize];
    if p >= 1.0 {
        deg.iter_mut().for_each(|d| *d = (n - 1) as u32);
    } else {
        let mut rng = rng.rng();
        let ln_q = (-p).ln_1p();
        let (mut v, mut w) = (1u64, 0u64);
        let mut first = true;
        loop {
            let step = if first { geometric(&mut rng, ln_q) - 1 } else { geometric(&mut rng, ln_q) };
            first = false;
            w = w.saturating_add(step);
            while v < n && w >= v {
                w -= v;
                v += 1;
            }
            if v >= n {
                break;
            }
            deg[v as usize] += 1;
            deg[w as usize] += 1;
        }
    }
    Ok(deg.iter().filter(|&&d| d < r).count() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binom;
    use crate::model::activation_prob;

    fn params(n: u64, p: f64, r: u32, a: u64) -> ModelParams {
        ModelParams::with_degenerate(n, p, r, a).unwrap()
    }

    type Sampler = fn(&ModelParams, RngSpec) -> Result<PercolationOutcome>;
    const SAMPLERS: [(&str, Sampler); 3] =
        [("graph", sample_graph), ("markchain", sample_markchain), ("activation", sample_activation_times)];

    #[test]
    fn degenerate_p() {
        for (name, s) in SAMPLERS {
            let o = s(&params(20, 0.0, 2, 3), RngSpec::new(1, 0)).unwrap();
            assert_eq!((o.final_size, o.stop_time), (3, 3), "{name}");
            let o = s(&params(20, 1.0, 2, 3), RngSpec::new(1, 0)).unwrap();
            assert_eq!(o.final_size, 20, "{name}");
            let o = s(&params(7, 0.3, 2, 7), RngSpec::new(1, 0)).unwrap();
            assert_eq!((o.final_size, o.stop_time), (7, 7), "{name}");
        }
        assert_eq!(count_low_degree(&params(50, 0.0, 2, 1), RngSpec::new(0, 0)).unwrap(), 50);
        assert_eq!(count_low_degree(&params(50, 1.0, 2, 1), RngSpec::new(0, 0)).unwrap(), 0);
    }

    #[test]
    fn outcome_invariants() {
        let p = params(300, 0.02, 2, 6);
        for stream in 0..200 {
            for (name, s) in SAMPLERS {
                let o = s(&p, RngSpec::new(9, stream)).unwrap();
                assert_eq!(o.final_size, o.stop_time, "{name}");
                assert!(o.final_size >= p.a && o.final_size <= p.n, "{name}");
                if let Some(traj) = &o.trajectory {
                    let t_stop = o.stop_time as usize;
                    assert_eq!(traj.len(), t_stop + 1);
                    assert!(traj[..t_stop].iter().enumerate().all(|(t, &x)| x > t as u64));
                    assert_eq!(traj[t_stop], o.stop_time);
                }
            }
        }
    }

    #[test]
    fn deterministic_per_stream() {
        let p = params(500, 0.01, 2, 10);
        for (name, s) in SAMPLERS {
            let a = s(&p, RngSpec::new(42, 3)).unwrap();
            let b = s(&p, RngSpec::new(42, 3)).unwrap();
            assert_eq!(a, b, "{name}");
        }
        assert_ne!(RngSpec::new(1, 2).derive(0), RngSpec::new(1, 2).derive(1));
    }

    #[test]
    fn activation_time_law() {
        // P(Y <= 2) for r = 2, p = 0.5 is 1/4
        let mut rng = RngSpec::new(5, 0).rng();
        let reps = 400_000;
        let hits = (0..reps).filter(|_| sample_activation_time(0.5, 2, &mut rng).unwrap() <= 2).count();
        let phat = hits as f64 / reps as f64;
        let pi = activation_prob(2.0, 0.5, 2).unwrap().pi;
        assert_eq!(pi, 0.25);
        assert!((phat - pi).abs() < 4.0 * (pi * (1.0 - pi) / reps as f64).sqrt());
    }

    #[test]
    fn three_nodes_two_seeds() {
        // the third node activates iff both seed edges are present
        let p = params(3, 0.5, 2, 2);
        let reps = 100_000u64;
        for (name, s) in SAMPLERS {
            let hits = (0..reps).filter(|&i| s(&p, RngSpec::new(11, i)).unwrap().final_size == 3).count();
            let phat = hits as f64 / reps as f64;
            assert!((phat - 0.25).abs() < 4.0 * (0.25f64 * 0.75 / reps as f64).sqrt(), "{name}: {phat}");
        }
    }

    #[test]
    fn coupled_graphs_are_monotone_in_p() {
        for i in 0..1000 {
            let spec = RngSpec::new(77, i);
            let lo = sample_graph(&params(40, 0.04, 2, 3), spec).unwrap();
            let hi = sample_graph(&params(40, 0.07, 2, 3), spec).unwrap();
            assert!(hi.final_size >= lo.final_size);
        }
    }

    #[test]
    fn residual_dominates_low_degree_nodes() {
        let p = params(2000, 0.003, 2, 30);
        for i in 0..200 {
            let g = Graph::sample(p.n, p.p, DEFAULT_GRAPH_CAP, &mut RngSpec::new(3, i).rng()).unwrap();
            let (size, _) = g.percolate(p.a as usize, p.r);
            // low-degree seeds stay active, so only non-seeds count
            let low_non_seed = (p.a as usize..g.node_count()).filter(|&v| g.degree(v) < p.r as usize).count() as u64;
            assert!(p.n - size >= low_non_seed);
            assert!(g.low_degree_count(p.r) >= low_non_seed);
        }
    }

    #[test]
    fn skip_sampler_edge_count() {
        let (n, p) = (20_000u64, 2e-4);
        let mut total = 0usize;
        let reps = 20;
        for i in 0..reps {
            let g = Graph::sample(n, p, DEFAULT_GRAPH_CAP, &mut RngSpec::new(8, i).rng()).unwrap();
            total += g.edge_count();
        }
        let mean = total as f64 / reps as f64;
        let expect = (n * (n - 1) / 2) as f64 * p;
        assert!((mean - expect).abs() < 4.0 * (expect / reps as f64).sqrt(), "{mean} vs {expect}");
    }

    #[test]
    fn low_degree_mean() {
        let p = params(1000, 0.005, 2, 1);
        let reps = 100_000u64;
        let total: u64 = (0..reps).map(|i| count_low_degree(&p, RngSpec::new(21, i)).unwrap()).sum();
        let mean = total as f64 / reps as f64;
        let expect = 1000.0 * binom::cdf(999, 1, 0.005);
        assert!((mean / expect - 1.0).abs() < 0.02, "{mean} vs {expect}");
    }

    #[test]
    fn caps() {
        let p = params(200_000, 1e-5, 2, 10);
        assert!(matches!(sample_graph(&p, RngSpec::new(0, 0)), Err(Error::CapExceeded { .. })));
        assert!(matches!(count_low_degree(&p, RngSpec::new(0, 0)), Err(Error::CapExceeded { .. })));
    }
}
