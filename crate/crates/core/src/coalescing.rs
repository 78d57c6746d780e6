//! Coalescing particles on the directed tree.
//!
//! When the clock of a vertex rings, every particle on its children moves up
//! to it, merging into one. With all vertices at or below the base layer
//! permanently occupied, the stationary process is determined by the clocks
//! alone and can be read off exactly by recursing backward in time: a vertex
//! holds a particle just before `t` iff, since its parent's last ring before
//! `t`, it rang at least once while one of its children held a particle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rustc_hash::FxHashMap;

use crate::clocks::ClockStream;
use crate::error::{Error, Result};
use crate::guards::CostGuards;
use crate::mc;
use crate::stats::Estimate;
use crate::tree::{Node, TreeWindow, VertexRef};

/// Exact state queries for one realization of the clocks.
#[derive(Debug)]
pub struct ParticleQuery {
    window: TreeWindow,
    clock: ClockStream,
    memo: Option<FxHashMap<(u64, i64), bool>>,
    visits: u64,
    visit_limit: u64,
    max_depth: u32,
}

impl ParticleQuery {
    pub fn new(window: TreeWindow, clock: ClockStream) -> Self {
        Self {
            window,
            clock,
            memo: Some(FxHashMap::default()),
            visits: 0,
            visit_limit: CostGuards::default().max_visits_per_sample,
            max_depth: 0,
        }
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

    /// Switches to the clocks of `seed`, keeping allocated storage.
    pub fn reset(&mut self, seed: u64) {
        self.clock.reseed(seed);
        if let Some(memo) = self.memo.as_mut() {
            memo.clear();
        }
        self.visits = 0;
        self.max_depth = 0;
    }

    /// Vertex-state evaluations so far.
    pub fn visits(&self) -> u64 {
        self.visits
    }

    /// Deepest layer offset below the anchor whose state was evaluated.
    pub fn max_depth_reached(&self) -> u32 {
        self.max_depth
    }

    /// Whether `v` holds a particle just before time `t`.
    ///
    /// The anchor root has no parent in the window; use
    /// [`ParticleQuery::flow_event`] for it.
    pub fn has_particle(&mut self, v: &VertexRef, t: f64) -> Result<bool> {
        let node = self.window.node(v)?;
        self.note(node)?;
        if node.layer <= self.window.base_layer() {
            return Ok(true);
        }
        let parent = self.window.parent_node(node).ok_or_else(|| {
            Error::InvalidArgument("the anchor root has no parent inside the window".into())
        })?;
        let since = self.clock.last_ring_before(parent.id, t).time;
        self.pulled(node, since, t)
    }

    /// Whether particles flowed into the anchor root during `[0, horizon)`.
    pub fn flow_event(&mut self, horizon: f64) -> Result<bool> {
        let root = self.window.root_node();
        if horizon <= 0.0 {
            return Ok(false);
        }
        self.note(root)?;
        if root.layer <= self.window.base_layer() {
            return Err(Error::InvalidArgument(
                "flow into the root needs a window of depth >= 1".into(),
            ));
        }
        for index in self.clock.ring_indices_in(root.id, 0.0, horizon) {
            if self.any_child_occupied(root, index)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn note(&mut self, node: Node) -> Result<()> {
        self.visits += 1;
        if self.visits > self.visit_limit {
            return Err(Error::CostGuard {
                guard: "max_visits_per_sample",
                requested: self.visits,
                limit: self.visit_limit,
            });
        }
        let depth = (self.window.anchor_layer() - node.layer) as u32;
        self.max_depth = self.max_depth.max(depth);
        Ok(())
    }

    /// Whether `node` rang in `(lo, hi)` while some child was occupied.
    fn pulled(&mut self, node: Node, lo: f64, hi: f64) -> Result<bool> {
        let mut ring = self.clock.last_ring_before(node.id, hi);
        while ring.time > lo {
            if self.any_child_occupied(node, ring.index)? {
                return Ok(true);
            }
            let index = ring.index - 1;
            ring.time = self.clock.ring_time(node.id, index);
            ring.index = index;
        }
        Ok(false)
    }

    /// Whether a child of `node` is occupied just before ring `index` of `node`.
    fn any_child_occupied(&mut self, node: Node, index: i64) -> Result<bool> {
        for c in 0..self.window.arity() {
            let child = self.window.child_node(node, c);
            if self.occupied_at_parent_ring(child, node, index)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn occupied_at_parent_ring(&mut self, child: Node, parent: Node, index: i64) -> Result<bool> {
        self.note(child)?;
        if child.layer <= self.window.base_layer() {
            return Ok(true);
        }
        if let Some(&hit) = self.memo.as_ref().and_then(|m| m.get(&(child.id, index))) {
            return Ok(hit);
        }
        let hi = self.clock.ring_time(parent.id, index);
        let lo = self.clock.ring_time(parent.id, index - 1);
        let occupied = self.pulled(child, lo, hi)?;
        if let Some(memo) = self.memo.as_mut() {
            memo.insert((child.id, index), occupied);
        }
        Ok(occupied)
    }
}

/// Monte Carlo estimate of the flow probability into a vertex `n` layers
/// above the permanently occupied base, on the binary tree.
pub fn estimate_rho(
    n: u32,
    horizon: f64,
    samples: u64,
    seed: u64,
    guards: &CostGuards,
) -> Result<Estimate> {
    Ok(estimate_rho_curve(2, n, &[horizon], samples, seed, guards)?[0])
}

/// Flow probabilities for several horizons from the same clock realizations.
pub fn estimate_rho_curve(
    arity: u32,
    n: u32,
    horizons: &[f64],
    samples: u64,
    seed: u64,
    guards: &CostGuards,
) -> Result<Vec<Estimate>> {
    if n < 1 {
        return Err(Error::InvalidArgument("layer depth n must be >= 1".into()));
    }
    if samples < 1 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if horizons.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("horizons must be finite and >= 0".into()));
    }
    if n > guards.coalescing_max_depth {
        return Err(Error::CostGuard {
            guard: "coalescing_max_depth",
            requested: u64::from(n),
            limit: u64::from(guards.coalescing_max_depth),
        });
    }
    let window = TreeWindow::new(arity, n as i32, 0)?;
    let limit = guards.max_visits_per_sample;
    let init = || ParticleQuery::new(window, ClockStream::new(0)).with_visit_limit(limit);
    let hits = mc::sum_counts_with(samples, seed, horizons.len(), init, |query, _, s| {
        query.reset(s);
        horizons
            .iter()
            .map(|&t| query.flow_event(t).map(i64::from))
            .collect()
    })?;
    Ok(hits
        .into_iter()
        .map(|h| Estimate::wilson(h as u64, samples))
        .collect())
}

/// The undirected analogue on the torus `(Z / side Z)^dim`: starting from
/// all sites occupied, a ring at `x` pulls every particle on a neighbour of
/// `x` onto `x`. Returns the particle density at times `0, 1, ..., horizon`.
pub fn lattice_density_decay(
    side: u32,
    dim: u32,
    horizon: u32,
    seed: u64,
    guards: &CostGuards,
) -> Result<Vec<f64>> {
    if side < 3 || dim < 1 {
        return Err(Error::InvalidArgument(
            "torus needs side >= 3 and dimension >= 1".into(),
        ));
    }
    let sites = u64::from(side)
        .checked_pow(dim)
        .filter(|&s| s <= guards.lattice_max_sites)
        .ok_or(Error::CostGuard {
            guard: "lattice_max_sites",
            requested: u64::from(side).saturating_pow(dim),
            limit: guards.lattice_max_sites,
        })? as usize;
    if f64::from(horizon) > guards.max_horizon {
        return Err(Error::CostGuard {
            guard: "max_horizon",
            requested: u64::from(horizon),
            limit: guards.max_horizon as u64,
        });
    }

    let side = side as usize;
    let strides: Vec<usize> = (0..dim).map(|k| side.pow(k)).collect();
    let neighbours = |x: usize| {
        strides.iter().flat_map(move |&stride| {
            let coord = (x / stride) % side;
            let up = if coord + 1 == side { x + stride - side * stride } else { x + stride };
            let down = if coord == 0 { x + (side - 1) * stride } else { x - stride };
            [up, down]
        })
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut occupied = vec![true; sites];
    let mut count = sites;
    let mut density = Vec::with_capacity(horizon as usize + 1);
    density.push(1.0);
    let total_rate = sites as f64;
    let mut t = 0.0f64;
    let mut next_sample = 1u32;
    while next_sample <= horizon {
        t += rng.sample::<f64, _>(Exp1) / total_rate;
        while next_sample <= horizon && f64::from(next_sample) <= t {
            density.push(count as f64 / sites as f64);
            next_sample += 1;
        }
        let x = rng.random_range(0..sites);
        let mut pulled = 0;
        for y in neighbours(x) {
            if occupied[y] {
                occupied[y] = false;
                pulled += 1;
            }
        }
        if pulled > 0 {
            count -= pulled;
            if !occupied[x] {
                occupied[x] = true;
                count += 1;
            }
        }
    }
    Ok(density)
}
