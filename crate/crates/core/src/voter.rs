//! Majority voter dynamics on the ternary directed tree.
//!
//! Above the base layer a ringing vertex adopts the majority opinion of its
//! children; at or below the base layer it flips a fresh fair coin. The
//! stationary state is read off exactly: the opinion of `v` at time `t` is
//! the value it adopted at its last ring before `t`, which is either that
//! ring's coin or the majority of its children's opinions at the ring time.

use rustc_hash::FxHashMap;

use crate::clocks::{ClockStream, Ring};
use crate::error::{Error, Result};
use crate::guards::CostGuards;
use crate::mc;
use crate::spin::Spin;
use crate::stats::{correlation, Estimate};
use crate::tree::{Node, TreeWindow, VertexRef};

/// Majority of three opinions.
pub fn majority3(a: Spin, b: Spin, c: Spin) -> Spin {
    Spin::from_sign(a.value() + b.value() + c.value())
}

/// Probability that the majority of three fair coins changes when each coin
/// is turned over independently with probability `p`:
/// `M(p) = 3p/2 - 3p^2/2 + p^3`.
pub fn majority_flip_prob(p: f64) -> f64 {
    1.5 * p - 1.5 * p * p + p * p * p
}

/// Exact opinion queries for one realization of clocks and coins.
#[derive(Debug)]
pub struct OpinionQuery {
    window: TreeWindow,
    clock: ClockStream,
    memo: Option<FxHashMap<(u64, i64), Spin>>,
    visits: u64,
    visit_limit: u64,
}

impl OpinionQuery {
    pub fn new(window: TreeWindow, clock: ClockStream) -> Result<Self> {
        if window.arity().is_multiple_of(2) {
            return Err(Error::InvalidWindow(format!(
                "majority needs an odd number of children, got {}",
                window.arity()
            )));
        }
        Ok(Self {
            window,
            clock,
            memo: Some(FxHashMap::default()),
            visits: 0,
            visit_limit: CostGuards::default().max_visits_per_sample,
        })
    }

    pub fn with_memo(mut self, enabled: bool) -> Self {
        self.memo = enabled.then(FxHashMap::default);
        self
    }

    pub fn with_visit_limit(mut self, limit: u64) -> Self {
        self.visit_limit = limit;
        self
    }

    pub fn window(&self) -> &TreeWindow {
        &self.window
    }

    pub fn visits(&self) -> u64 {
        self.visits
    }

    pub fn clock_mut(&mut self) -> &mut ClockStream {
        &mut self.clock
    }

    /// Switches to the clocks of `seed`, keeping allocated storage.
    pub fn reset(&mut self, seed: u64) {
        self.clock.reseed(seed);
        if let Some(memo) = self.memo.as_mut() {
            memo.clear();
        }
        self.visits = 0;
    }

    pub fn into_clock(self) -> ClockStream {
        self.clock
    }

    /// Opinion of `v` at time `t`.
    pub fn opinion(&mut self, v: &VertexRef, t: f64) -> Result<Spin> {
        let node = self.window.node(v)?;
        self.opinion_of(node, t)
    }

    /// Opinion of a window node at time `t`.
    pub fn opinion_of(&mut self, node: Node, t: f64) -> Result<Spin> {
        let ring = self.clock.last_ring_before(node.id, t);
        self.adopted_at(node, ring)
    }

    /// The opinion `node` adopted at `ring`; children are read just before it.
    fn adopted_at(&mut self, node: Node, ring: Ring) -> Result<Spin> {
        self.visits += 1;
        if self.visits > self.visit_limit {
            return Err(Error::CostGuard {
                guard: "max_visits_per_sample",
                requested: self.visits,
                limit: self.visit_limit,
            });
        }
        if node.layer <= self.window.base_layer() {
            return Ok(self.clock.coin_at(node.id, ring.index));
        }
        if let Some(&s) = self.memo.as_ref().and_then(|m| m.get(&(node.id, ring.index))) {
            return Ok(s);
        }
        let mut sum = 0;
        for c in 0..self.window.arity() {
            let child = self.window.child_node(node, c);
            sum += self.opinion_of(child, ring.time)?.value();
        }
        let s = Spin::from_sign(sum);
        if let Some(memo) = self.memo.as_mut() {
            memo.insert((node.id, ring.index), s);
        }
        Ok(s)
    }
}

fn check_depth(n: u32, guards: &CostGuards) -> Result<()> {
    if n > guards.voter_max_depth {
        return Err(Error::CostGuard {
            guard: "voter_max_depth",
            requested: u64::from(n),
            limit: u64::from(guards.voter_max_depth),
        });
    }
    Ok(())
}

/// Monte Carlo estimate of `E[B_0(x_n) B_T(x_n)]` for a vertex `n` layers
/// above the coin layer.
pub fn estimate_autocorr(
    n: u32,
    horizon: f64,
    samples: u64,
    seed: u64,
    guards: &CostGuards,
) -> Result<Estimate> {
    Ok(estimate_autocorr_curve(n, &[horizon], samples, seed, guards)?[0])
}

/// Autocorrelations at several lags, sharing each sample's clocks.
pub fn estimate_autocorr_curve(
    n: u32,
    horizons: &[f64],
    samples: u64,
    seed: u64,
    guards: &CostGuards,
) -> Result<Vec<Estimate>> {
    if samples < 1 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if horizons.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("lags must be finite and >= 0".into()));
    }
    check_depth(n, guards)?;
    let window = TreeWindow::new(3, n as i32, 0)?;
    let limit = guards.max_visits_per_sample;
    let init = || {
        OpinionQuery::new(window, ClockStream::new(0)).map(|q| q.with_visit_limit(limit))
    };
    let sums = mc::sum_counts_with(samples, seed, horizons.len(), init, |q, _, s| {
        let q = q.as_mut().map_err(|e| e.clone())?;
        q.reset(s);
        let root = window.root_node();
        let start = q.opinion_of(root, 0.0)?;
        horizons
            .iter()
            .map(|&t| Ok(i64::from(start.value() * q.opinion_of(root, t)?.value())))
            .collect()
    })?;
    Ok(sums
        .into_iter()
        .map(|s| Estimate::from_moments(s as f64, samples as f64, samples))
        .collect())
}

/// Pairwise correlations of time-0 opinions across vertices of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    /// `(i, j, correlation)` for every pair `i < j`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub max_abs_correlation: f64,
    pub samples: u64,
}

/// Samples the time-0 opinions of `m` distinct vertices of layer `n` (their
/// descendant sets are disjoint) and reports all pairwise correlations.
pub fn layer_independence_stat(
    n: u32,
    m: usize,
    samples: u64,
    seed: u64,
    guards: &CostGuards,
) -> Result<IndependenceReport> {
    if m < 2 || samples < 2 {
        return Err(Error::InvalidArgument(
            "need at least two vertices and two samples".into(),
        ));
    }
    let mut levels = 0u32;
    while 3usize.pow(levels) < m {
        levels += 1;
    }
    check_depth(n + levels, guards)?;
    let window = TreeWindow::new(3, (n + levels) as i32, 0)?;
    let targets: Vec<Node> = window
        .layer_vertices(n as i32)?
        .iter()
        .take(m)
        .map(|v| window.node(v))
        .collect::<Result<_>>()?;
    let limit = guards.max_visits_per_sample;
    let rows = mc::collect_samples(samples, seed, |_, s| {
        let mut q = OpinionQuery::new(window, ClockStream::new(s))?.with_visit_limit(limit);
        targets
            .iter()
            .map(|&node| Ok(q.opinion_of(node, 0.0)?.value() as f64))
            .collect::<Result<Vec<f64>>>()
    })?;
    let columns: Vec<Vec<f64>> = (0..m).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut pairs = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            pairs.push((i, j, correlation(&columns[i], &columns[j])));
        }
    }
    let max_abs_correlation = pairs.iter().map(|p| p.2.abs()).fold(0.0, f64::max);
    Ok(IndependenceReport {
        pairs,
        max_abs_correlation,
        samples,
    })
}
