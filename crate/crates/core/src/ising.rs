//! Glauber dynamics with layer-dependent couplings, coupled to the majority
//! voter chain, and the infection process that dominates their disagreements.
//!
//! A vertex of layer `k` is joined to its parent by an edge of strength
//! `J_k` and to each child by an edge of strength `J_{k-1}`. Configurations
//! are weighted by `exp(sum beta * J * spin * spin)`, so aligned neighbours
//! are favoured.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rustc_hash::{FxHashMap, FxHashSet};

use crate::clocks::ClockStream;
use crate::error::{Error, Result};
use crate::guards::CostGuards;
use crate::mc;
use crate::spin::Spin;
use crate::tree::{Node, TreeWindow};
use crate::voter::OpinionQuery;

/// Default number of gaps inspected by the growth check.
pub const GROWTH_CHECK_HORIZON: u32 = 1000;

/// Coupling strengths `k -> J_k`; zero on layers `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingSchedule {
    /// `J_k = scale * |k|^exponent` for `k <= 0`.
    Power { scale: f64, exponent: f64 },
}

impl CouplingSchedule {
    /// `J_k = k^2`.
    pub fn k_squared() -> Self {
        Self::Power {
            scale: 1.0,
            exponent: 2.0,
        }
    }

    /// A power schedule, validated up to [`GROWTH_CHECK_HORIZON`].
    pub fn power(scale: f64, exponent: f64) -> Result<Self> {
        let s = Self::Power { scale, exponent };
        s.validate(GROWTH_CHECK_HORIZON)?;
        Ok(s)
    }

    /// Parses `ksq` or `power:<scale>:<exponent>`.
    pub fn parse(id: &str) -> Result<Self> {
        if id == "ksq" {
            return Ok(Self::k_squared());
        }
        let parts: Vec<&str> = id.split(':').collect();
        if let ["power", scale, exponent] = parts[..] {
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Schedule(format!("bad number {s:?} in {id:?}")))
            };
            return Self::power(num(scale)?, num(exponent)?);
        }
        Err(Error::Schedule(format!("unknown schedule {id:?}")))
    }

    pub fn id(&self) -> String {
        match *self {
            Self::Power { scale, exponent } if scale == 1.0 && exponent == 2.0 => "ksq".into(),
            Self::Power { scale, exponent } => format!("power:{scale}:{exponent}"),
        }
    }

    pub fn coupling(&self, k: i32) -> f64 {
        if k >= 1 {
            return 0.0;
        }
        match *self {
            Self::Power { scale, exponent } => scale * f64::from(-k).powf(exponent),
        }
    }

    /// `J_{k-1} - J_k`.
    pub fn gap(&self, k: i32) -> f64 {
        self.coupling(k - 1) - self.coupling(k)
    }

    /// Checks `J_{-j-1} >= J_{-j}` and `J_{-j-1} - J_{-j} >= j` for
    /// `j < horizon`.
    pub fn validate(&self, horizon: u32) -> Result<()> {
        let Self::Power { scale, exponent } = *self;
        if !(scale.is_finite() && exponent.is_finite() && scale >= 0.0 && exponent > 0.0) {
            return Err(Error::Schedule(format!(
                "power schedule needs scale >= 0 and exponent > 0, got {scale} and {exponent}"
            )));
        }
        for j in 0..horizon {
            let gap = self.gap(-(j as i32));
            if gap < 0.0 {
                return Err(Error::Schedule(format!("couplings decrease at layer -{j}")));
            }
            if gap < f64::from(j) {
                return Err(Error::Schedule(format!(
                    "coupling gap {gap} at layer -{j} is below the required growth {j}"
                )));
            }
        }
        Ok(())
    }
}

/// Heat-bath probability that a vertex of layer `k` chooses `+`.
pub fn glauber_plus_prob(
    k: i32,
    parent: Option<Spin>,
    children: &[Spin],
    beta: f64,
    schedule: &CouplingSchedule,
) -> f64 {
    let from_parent = parent.map_or(0.0, |p| schedule.coupling(k) * f64::from(p.value()));
    let from_children: i32 = children.iter().map(|c| c.value()).sum();
    let h = beta * (from_parent + schedule.coupling(k - 1) * f64::from(from_children));
    1.0 / (1.0 + (-2.0 * h).exp())
}

/// Upper bound on the chance that an update at layer `k` disagrees with the
/// children's majority: `e^{-2 beta gap} / (1 + e^{-2 beta gap})`.
pub fn disagreement_bound(k: i32, beta: f64, schedule: &CouplingSchedule) -> Result<f64> {
    let gap = schedule.gap(k);
    if gap < 0.0 {
        return Err(Error::Schedule(format!("couplings decrease at layer {k}")));
    }
    let w = (-2.0 * beta * gap).exp();
    Ok(w / (1.0 + w))
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")))
    }
}

fn check_horizon(horizon: f64, guards: &CostGuards) -> Result<()> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad horizon {horizon}")));
    }
    if horizon > guards.max_horizon {
        return Err(Error::CostGuard {
            guard: "max_horizon",
            requested: horizon.ceil() as u64,
            limit: guards.max_horizon as u64,
        });
    }
    Ok(())
}

fn check_size(window: &TreeWindow, guards: &CostGuards) -> Result<u64> {
    let size = window.subtree_size()?;
    if size > guards.ising_max_vertices {
        return Err(Error::CostGuard {
            guard: "ising_max_vertices",
            requested: size,
            limit: guards.ising_max_vertices,
        });
    }
    Ok(size)
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    node: Node,
    index: i64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so that `BinaryHeap` pops the earliest event.
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.node.id.cmp(&self.node.id))
    }
}

/// Opportunities and creations recorded at one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerTally {
    pub layer: i32,
    /// Updates at which the children agreed across the two chains.
    pub opportunities: u64,
    /// Opportunities after which the updated vertex disagreed.
    pub creations: u64,
    pub bound: f64,
}

/// A disagreement created by an update whose children agreed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Creation {
    pub time: f64,
    pub node: u64,
    pub layer: i32,
}

/// Voter chain `B` and Ising chain `F` driven by shared clocks.
#[derive(Debug)]
pub struct CoupledChain {
    window: TreeWindow,
    beta: f64,
    schedule: CouplingSchedule,
    clock: ClockStream,
    voter: Vec<Spin>,
    ising: Vec<Spin>,
    disagreements: u64,
    now: f64,
    queue: BinaryHeap<Event>,
    tallies: Vec<LayerTally>,
    creations: Vec<Creation>,
    trajectory: Vec<(f64, u64)>,
}

impl CoupledChain {
    /// Starts both chains from the exact voter state at time 0.
    pub fn new(
        window: TreeWindow,
        beta: f64,
        schedule: CouplingSchedule,
        seed: u64,
        guards: &CostGuards,
    ) -> Result<Self> {
        check_beta(beta)?;
        if window.arity() != 3 {
            return Err(Error::InvalidWindow("the coupled chain needs arity 3".into()));
        }
        let size = check_size(&window, guards)?;
        let mut query = OpinionQuery::new(window, ClockStream::new(seed))?
            .with_visit_limit(guards.max_visits_per_sample);
        let mut voter = Vec::with_capacity(size as usize);
        for node in window.nodes()? {
            voter.push(query.opinion_of(node, 0.0)?);
        }
        let mut clock = query.into_clock();
        let mut queue = BinaryHeap::with_capacity(size as usize);
        for node in window.nodes()? {
            queue.push(Event {
                time: clock.ring_time(node.id, 1),
                node,
                index: 1,
            });
        }
        let tallies = (window.base_layer() + 1..=window.anchor_layer())
            .rev()
            .map(|layer| {
                Ok(LayerTally {
                    layer,
                    opportunities: 0,
                    creations: 0,
                    bound: disagreement_bound(layer, beta, &schedule)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            window,
            beta,
            schedule,
            clock,
            ising: voter.clone(),
            voter,
            disagreements: 0,
            now: 0.0,
            queue,
            tallies,
            creations: Vec::new(),
            trajectory: vec![(0.0, 0)],
        })
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn voter(&self, node: Node) -> Spin {
        self.voter[node.id as usize]
    }

    pub fn ising(&self, node: Node) -> Spin {
        self.ising[node.id as usize]
    }

    pub fn disagreements(&self) -> u64 {
        self.disagreements
    }

    /// Per-layer tallies, from the anchor layer downwards.
    pub fn tallies(&self) -> &[LayerTally] {
        &self.tallies
    }

    pub fn creations(&self) -> &[Creation] {
        &self.creations
    }

    /// `(time, |D|)` at time 0 and after every change of `|D|`.
    pub fn trajectory(&self) -> &[(f64, u64)] {
        &self.trajectory
    }

    /// Applies every ring in `[now, horizon)`.
    pub fn run_until(&mut self, horizon: f64) {
        while let Some(&ev) = self.queue.peek() {
            if ev.time >= horizon {
                break;
            }
            self.queue.pop();
            self.apply(ev);
            self.queue.push(Event {
                time: self.clock.ring_time(ev.node.id, ev.index + 1),
                node: ev.node,
                index: ev.index + 1,
            });
        }
        self.now = self.now.max(horizon);
    }

    fn apply(&mut self, ev: Event) {
        let node = ev.node;
        let i = node.id as usize;
        let before = self.voter[i] != self.ising[i];
        if node.layer <= self.window.base_layer() {
            let coin = self.clock.coin_at(node.id, ev.index);
            self.voter[i] = coin;
            self.ising[i] = coin;
        } else {
            let mut voter_kids = [Spin::Plus; 3];
            let mut ising_kids = [Spin::Plus; 3];
            for c in 0..3 {
                let child = self.window.child_node(node, c).id as usize;
                voter_kids[c as usize] = self.voter[child];
                ising_kids[c as usize] = self.ising[child];
            }
            let parent = self
                .window
                .parent_node(node)
                .map(|p| self.ising[p.id as usize]);
            let p_plus =
                glauber_plus_prob(node.layer, parent, &ising_kids, self.beta, &self.schedule);
            let u = self.clock.uniform_at(node.id, ev.index);
            self.voter[i] = Spin::from_sign(voter_kids.iter().map(|s| s.value()).sum());
            self.ising[i] = if u < p_plus { Spin::Plus } else { Spin::Minus };
            if voter_kids == ising_kids {
                let created = self.voter[i] != self.ising[i];
                let tally = &mut self.tallies[(self.window.anchor_layer() - node.layer) as usize];
                tally.opportunities += 1;
                if created {
                    tally.creations += 1;
                    self.creations.push(Creation {
                        time: ev.time,
                        node: node.id,
                        layer: node.layer,
                    });
                }
            }
        }
        let after = self.voter[i] != self.ising[i];
        if before != after {
            if after {
                self.disagreements += 1;
            } else {
                self.disagreements -= 1;
            }
            self.trajectory.push((ev.time, self.disagreements));
        }
    }
}

/// Summary of one coupled run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledReport {
    pub depth: u32,
    pub beta: f64,
    pub horizon: f64,
    pub tallies: Vec<LayerTally>,
    pub creations: Vec<Creation>,
    pub trajectory: Vec<(f64, u64)>,
    pub final_disagreements: u64,
}

/// Runs the coupled chains on the ternary window of the given depth below
/// layer 0 up to `horizon`.
pub fn coupled_simulate(
    depth: u32,
    beta: f64,
    schedule: &CouplingSchedule,
    horizon: f64,
    seed: u64,
    guards: &CostGuards,
) -> Result<CoupledReport> {
    check_horizon(horizon, guards)?;
    let window = TreeWindow::new(3, 0, -(depth as i32))?;
    let mut chain = CoupledChain::new(window, beta, *schedule, seed, guards)?;
    chain.run_until(horizon);
    Ok(CoupledReport {
        depth,
        beta,
        horizon,
        tallies: chain.tallies.clone(),
        creations: chain.creations.clone(),
        trajectory: chain.trajectory.clone(),
        final_disagreements: chain.disagreements,
    })
}

/// Independent coupled runs with seeds derived from `master_seed`; the
/// per-layer tallies are summed.
pub fn coupled_replicas(
    depth: u32,
    beta: f64,
    schedule: &CouplingSchedule,
    horizon: f64,
    replicas: u64,
    master_seed: u64,
    guards: &CostGuards,
) -> Result<Vec<LayerTally>> {
    if replicas < 1 {
        return Err(Error::InvalidArgument("need at least one replica".into()));
    }
    let reports = mc::collect_samples(replicas, master_seed, |_, s| {
        coupled_simulate(depth, beta, schedule, horizon, s, guards)
    })?;
    let mut total = reports[0].tallies.clone();
    for r in &reports[1..] {
        for (t, x) in total.iter_mut().zip(&r.tallies) {
            t.opportunities += x.opportunities;
            t.creations += x.creations;
        }
    }
    Ok(total)
}

/// Origination rate of a single vertex of layer `k`.
pub fn origination_rate(k: i32, beta: f64, schedule: &CouplingSchedule) -> f64 {
    (-2.0 * beta * schedule.gap(k)).exp()
}

/// Parent-closed set of infected vertices in a ternary window below layer 0.
#[derive(Debug, Clone)]
pub struct InfectionState {
    window: TreeWindow,
    infected: FxHashSet<u64>,
    infected_children: FxHashMap<u64, u8>,
    /// Infected vertices without infected children, i.e. those that may cure.
    curable: Vec<u64>,
    curable_slot: FxHashMap<u64, usize>,
}

impl InfectionState {
    pub fn new(window: TreeWindow) -> Self {
        Self {
            window,
            infected: FxHashSet::default(),
            infected_children: FxHashMap::default(),
            curable: Vec::new(),
            curable_slot: FxHashMap::default(),
        }
    }

    pub fn count(&self) -> u64 {
        self.infected.len() as u64
    }

    pub fn is_infected(&self, node: Node) -> bool {
        self.infected.contains(&node.id)
    }

    pub fn curable_count(&self) -> usize {
        self.curable.len()
    }

    fn mark_curable(&mut self, id: u64) {
        self.curable_slot.insert(id, self.curable.len());
        self.curable.push(id);
    }

    fn unmark_curable(&mut self, id: u64) {
        if let Some(slot) = self.curable_slot.remove(&id) {
            self.curable.swap_remove(slot);
            if let Some(&moved) = self.curable.get(slot) {
                self.curable_slot.insert(moved, slot);
            }
        }
    }

    /// Infects `node` and its whole path to the window root; returns the
    /// number of newly infected vertices.
    pub fn originate(&mut self, node: Node) -> u64 {
        let mut added = 0;
        let mut current = Some(node);
        let mut from_child = false;
        while let Some(v) = current {
            let fresh = self.infected.insert(v.id);
            if from_child {
                let n = self.infected_children.entry(v.id).or_insert(0);
                *n += 1;
                if *n == 1 {
                    self.unmark_curable(v.id);
                }
            }
            if !fresh {
                break;
            }
            added += 1;
            if !from_child {
                self.mark_curable(v.id);
            }
            from_child = true;
            current = self.window.parent_node(v);
        }
        added
    }

    /// Cures the `slot`-th curable vertex.
    fn cure_slot(&mut self, slot: usize) {
        let id = self.curable[slot];
        self.unmark_curable(id);
        self.infected.remove(&id);
        self.infected_children.remove(&id);
        let layer = self.window.anchor_layer() - self.depth_of(id);
        if let Some(parent) = self.window.parent_node(Node { id, layer }) {
            let n = self
                .infected_children
                .get_mut(&parent.id)
                .expect("infected vertex has an infected parent");
            *n -= 1;
            if *n == 0 {
                self.infected_children.remove(&parent.id);
                self.mark_curable(parent.id);
            }
        }
    }

    fn depth_of(&self, mut id: u64) -> i32 {
        let d = u64::from(self.window.arity());
        let mut depth = 0;
        while id > 0 {
            id = (id - 1) / d;
            depth += 1;
        }
        depth
    }

    /// Whether every infected vertex other than the root has an infected
    /// parent and the child counts match.
    pub fn is_parent_closed(&self) -> bool {
        let d = u64::from(self.window.arity());
        let mut counts: FxHashMap<u64, u8> = FxHashMap::default();
        for &id in &self.infected {
            if id > 0 {
                let parent = (id - 1) / d;
                if !self.infected.contains(&parent) {
                    return false;
                }
                *counts.entry(parent).or_insert(0) += 1;
            }
        }
        counts == self.infected_children
            && self.curable.len() == self.infected.len() - counts.len()
    }
}

/// Summary of one infection run.
#[derive(Debug, Clone, PartialEq)]
pub struct InfectionReport {
    pub depth: u32,
    pub beta: f64,
    pub horizon: f64,
    /// `(time, infected count)` at time 0 and after every event.
    pub trajectory: Vec<(f64, u64)>,
    pub time_average: f64,
    pub max_count: u64,
    pub originations: u64,
    pub cures: u64,
    /// Events after which parent-closure failed; zero unless the
    /// implementation is broken.
    pub closure_violations: u64,
}

/// Event-driven simulation of the infection process on layers `0..=-depth`.
/// Every vertex of layer `k` originates infections at rate
/// [`origination_rate`]; an infected vertex without infected children cures
/// at rate 1/2.
pub fn infection_simulate(
    depth: u32,
    beta: f64,
    schedule: &CouplingSchedule,
    horizon: f64,
    seed: u64,
    guards: &CostGuards,
) -> Result<InfectionReport> {
    check_beta(beta)?;
    check_horizon(horizon, guards)?;
    let window = TreeWindow::new(3, 0, -(depth as i32))?;
    check_size(&window, guards)?;

    // Total origination rate per layer, j = 0..=depth.
    let layer_rates: Vec<f64> = (0..=depth)
        .map(|j| 3f64.powi(j as i32) * origination_rate(-(j as i32), beta, schedule))
        .collect();
    let birth_total: f64 = layer_rates.iter().sum();
    if !birth_total.is_finite() {
        return Err(Error::Numerical("origination rate overflow".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = InfectionState::new(window);
    let mut now = 0.0;
    let mut trajectory = vec![(0.0, 0)];
    let (mut area, mut max_count) = (0.0, 0u64);
    let (mut originations, mut cures, mut closure_violations) = (0u64, 0u64, 0u64);
    loop {
        let cure_total = 0.5 * state.curable_count() as f64;
        let total = birth_total + cure_total;
        if total <= 0.0 {
            break;
        }
        let wait: f64 = Exp1.sample(&mut rng);
        let next = now + wait / total;
        if next >= horizon {
            break;
        }
        area += state.count() as f64 * (next - now);
        now = next;
        let pick = rng.random::<f64>() * total;
        if pick < birth_total {
            let mut acc = 0.0;
            let mut j = depth;
            for (layer, &r) in layer_rates.iter().enumerate() {
                acc += r;
                if pick < acc {
                    j = layer as u32;
                    break;
                }
            }
            let width = 3u64.pow(j);
            let first = (width - 1) / 2;
            let id = first + rng.random_range(0..width);
            state.originate(Node {
                id,
                layer: -(j as i32),
            });
            originations += 1;
        } else {
            let slot = rng.random_range(0..state.curable_count());
            state.cure_slot(slot);
            cures += 1;
        }
        if !state.is_parent_closed() {
            closure_violations += 1;
        }
        max_count = max_count.max(state.count());
        trajectory.push((now, state.count()));
    }
    area += state.count() as f64 * (horizon - now);
    Ok(InfectionReport {
        depth,
        beta,
        horizon,
        trajectory,
        time_average: if horizon > 0.0 { area / horizon } else { 0.0 },
        max_count,
        originations,
        cures,
        closure_violations,
    })
}

/// Independent infection runs with seeds derived from `master_seed`.
pub fn infection_replicas(
    depth: u32,
    beta: f64,
    schedule: &CouplingSchedule,
    horizon: f64,
    replicas: u64,
    master_seed: u64,
    guards: &CostGuards,
) -> Result<Vec<InfectionReport>> {
    mc::collect_samples(replicas, master_seed, |_, s| {
        infection_simulate(depth, beta, schedule, horizon, s, guards)
    })
}

/// Value of the infection-rate series and the number of terms used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSum {
    pub sum: f64,
    pub terms: u32,
    /// The sum is below the cure rate 1/2.
    pub bounded: bool,
}

const MAX_RATE_TERMS: u32 = 1_000_000;
const DIVERGENCE_RUN: u32 = 64;

/// `sum_{j >= 0} (j + 1) 3^j e^{-2 beta (J_{-j-1} - J_{-j})}`.
///
/// Summation stops once the geometric tail bound `a_{j+1} / (1 - r_j)`,
/// with `r_j` the ratio of consecutive terms, drops below `tol`. This bound
/// is valid when the ratios are non-increasing, which holds for convex
/// schedules. Ratios that stay at or above 1 for 64 terms in a row are
/// reported as divergence.
pub fn infection_rate_sum(beta: f64, schedule: &CouplingSchedule, tol: f64) -> Result<RateSum> {
    check_beta(beta)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    schedule.validate(GROWTH_CHECK_HORIZON)?;
    let ln3 = 3f64.ln();
    let log_term =
        |j: u32| f64::from(j + 1).ln() + f64::from(j) * ln3 - 2.0 * beta * schedule.gap(-(j as i32));
    let mut sum = 0.0;
    let mut run = 0;
    let mut prev = log_term(0);
    for j in 0..MAX_RATE_TERMS {
        sum += prev.exp();
        let next = log_term(j + 1);
        let log_ratio = next - prev;
        if log_ratio >= 0.0 {
            run += 1;
            if run >= DIVERGENCE_RUN || !sum.is_finite() {
                return Err(Error::Divergence(format!(
                    "term ratio at least 1 for {run} consecutive terms at beta = {beta}"
                )));
            }
        } else {
            run = 0;
            let tail = next.exp() / (1.0 - log_ratio.exp());
            if tail < tol {
                return Ok(RateSum {
                    sum,
                    terms: j + 1,
                    bounded: sum < 0.5,
                });
            }
        }
        prev = next;
    }
    Err(Error::Numerical(format!(
        "rate sum did not settle within {MAX_RATE_TERMS} terms"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use Spin::{Minus, Plus};

    #[test]
    fn schedule_values_and_checks() {
        let s = CouplingSchedule::k_squared();
        assert_eq!(s.coupling(1), 0.0);
        assert_eq!(s.coupling(0), 0.0);
        assert_eq!(s.coupling(-3), 9.0);
        assert_eq!(s.gap(-3), 7.0);
        assert!(s.validate(100).is_ok());
        assert!(CouplingSchedule::power(1.0, 1.5).is_err());
        assert!(CouplingSchedule::power(-1.0, 2.0).is_err());
        assert_eq!(CouplingSchedule::parse("ksq").unwrap(), s);
        assert_eq!(CouplingSchedule::parse("power:2:2").unwrap().id(), "power:2:2");
        assert!(CouplingSchedule::parse("cubic").is_err());
    }

    #[test]
    fn heat_bath_cases() {
        let s = CouplingSchedule::k_squared();
        assert_eq!(glauber_plus_prob(1, Some(Plus), &[Plus, Minus, Minus], 0.7, &s), 0.5);
        // Unanimous children against the parent.
        let beta = 0.4;
        let against = glauber_plus_prob(-1, Some(Plus), &[Minus, Minus, Minus], beta, &s);
        let w = (-2.0 * beta * (3.0 * s.coupling(-2) - s.coupling(-1))).exp();
        assert_abs_diff_eq!(against, w / (1.0 + w), epsilon = 1e-12);
        assert!(against <= disagreement_bound(-1, beta, &s).unwrap());
        // Two to one with the parent on the minority side attains the bound.
        let p_plus = glauber_plus_prob(-1, Some(Plus), &[Minus, Minus, Plus], beta, &s);
        assert_abs_diff_eq!(p_plus, disagreement_bound(-1, beta, &s).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn bound_values() {
        let flat = CouplingSchedule::Power {
            scale: 0.0,
            exponent: 1.0,
        };
        assert_eq!(disagreement_bound(-2, 1.0, &flat).unwrap(), 0.5);
        let s = CouplingSchedule::k_squared();
        let e2 = (-2.0f64).exp();
        assert_abs_diff_eq!(
            disagreement_bound(0, 1.0, &s).unwrap(),
            e2 / (1.0 + e2),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(disagreement_bound(0, 1.0, &s).unwrap(), 0.119_202_922, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn bound_below_half_and_exponential(beta in 0.01f64..10.0, scale in 0.0f64..5.0, k in -30i32..=0) {
            let s = CouplingSchedule::Power { scale, exponent: 2.0 };
            let b = disagreement_bound(k, beta, &s).unwrap();
            let w = (-2.0 * beta * s.gap(k)).exp();
            prop_assert!(b > 0.0 || w == 0.0);
            prop_assert!(b <= 0.5 && b <= w);
        }

        #[test]
        fn heat_bath_spin_flip_symmetry(
            beta in 0.01f64..3.0,
            k in -6i32..=0,
            signs in proptest::collection::vec(any::<bool>(), 4),
        ) {
            let s = CouplingSchedule::k_squared();
            let spin = |b: bool| if b { Plus } else { Minus };
            let kids = [spin(signs[1]), spin(signs[2]), spin(signs[3])];
            let flipped = kids.map(|c| -c);
            let p = glauber_plus_prob(k, Some(spin(signs[0])), &kids, beta, &s);
            let q = glauber_plus_prob(k, Some(-spin(signs[0])), &flipped, beta, &s);
            prop_assert!((p + q - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rate_sum_monotone(b1 in 1.0f64..4.0, db in 0.01f64..2.0, s1 in 1.0f64..3.0, ds in 0.0f64..2.0) {
            let s = CouplingSchedule::Power { scale: s1, exponent: 2.0 };
            let wider = CouplingSchedule::Power { scale: s1 + ds, exponent: 2.0 };
            let a = infection_rate_sum(b1, &s, 1e-12).unwrap().sum;
            let hotter = infection_rate_sum(b1 + db, &s, 1e-12).unwrap().sum;
            let wide = infection_rate_sum(b1, &wider, 1e-12).unwrap().sum;
            prop_assert!(hotter < a);
            prop_assert!(wide <= a);
        }
    }

    #[test]
    fn rate_sum_closed_form() {
        let s = CouplingSchedule::k_squared();
        let r = infection_rate_sum(2.0, &s, 1e-12).unwrap();
        let q = 3.0 * (-8.0f64).exp();
        let exact = (-4.0f64).exp() / ((1.0 - q) * (1.0 - q));
        assert_abs_diff_eq!(r.sum, exact, epsilon = 1e-12);
        assert!(r.bounded);
        assert_abs_diff_eq!(r.sum, 0.018353, epsilon = 1e-6);
    }

    #[test]
    fn rate_sum_divergence() {
        let s = CouplingSchedule::k_squared();
        let critical = 3f64.ln() / 4.0;
        assert!(matches!(
            infection_rate_sum(critical * 0.9, &s, 1e-9),
            Err(Error::Divergence(_))
        ));
        assert!(matches!(
            infection_rate_sum(critical, &s, 1e-9),
            Err(Error::Divergence(_))
        ));
        assert!(infection_rate_sum(critical * 1.2, &s, 1e-9).is_ok());
    }

    #[test]
    fn infection_state_closure() {
        let w = TreeWindow::new(3, 0, -3).unwrap();
        let mut st = InfectionState::new(w);
        let leaf = w.node(&w.vertex(&[2, 0, 1]).unwrap()).unwrap();
        assert_eq!(st.originate(leaf), 4);
        assert!(st.is_parent_closed());
        let other = w.node(&w.vertex(&[2, 1]).unwrap()).unwrap();
        assert_eq!(st.originate(other), 1);
        assert_eq!(st.curable_count(), 2);
        assert!(st.is_parent_closed());
        while st.curable_count() > 0 {
            st.cure_slot(0);
            assert!(st.is_parent_closed());
        }
        assert_eq!(st.count(), 0);
    }

    #[test]
    fn infection_simulation_small() {
        let g = CostGuards::default();
        let s = CouplingSchedule::k_squared();
        let r = infection_simulate(5, 0.5, &s, 30.0, 3, &g).unwrap();
        assert_eq!(r.closure_violations, 0);
        assert!(r.originations > 0);
        let mut prev = 0;
        for w in r.trajectory.windows(2) {
            assert!(w[1].0 > w[0].0);
            // An origination at layer k adds at most 1 - k vertices.
            assert!(w[1].1 <= w[0].1 + 6);
            prev = w[1].1;
        }
        assert_eq!(prev, r.trajectory.last().unwrap().1);
        assert_eq!(infection_simulate(5, 0.5, &s, 30.0, 3, &g).unwrap(), r);
    }

    #[test]
    fn coupled_chain_starts_equal_and_tracks_voter() {
        let g = CostGuards::default();
        let s = CouplingSchedule::k_squared();
        let w = TreeWindow::new(3, 0, -4).unwrap();
        for seed in 0..5 {
            let mut chain = CoupledChain::new(w, 1.0, s, seed, &g).unwrap();
            assert_eq!(chain.disagreements(), 0);
            chain.run_until(3.0);
            let mut exact = OpinionQuery::new(w, ClockStream::new(seed)).unwrap();
            for node in w.nodes().unwrap() {
                assert_eq!(chain.voter(node), exact.opinion_of(node, 3.0).unwrap());
            }
            let counted = w
                .nodes()
                .unwrap()
                .filter(|&n| chain.voter(n) != chain.ising(n))
                .count() as u64;
            assert_eq!(counted, chain.disagreements());
        }
    }

    #[test]
    fn coupled_guards() {
        let g = CostGuards {
            ising_max_vertices: 100,
            ..CostGuards::default()
        };
        let s = CouplingSchedule::k_squared();
        assert!(matches!(
            coupled_simulate(5, 1.0, &s, 1.0, 1, &g),
            Err(Error::CostGuard { guard: "ising_max_vertices", .. })
        ));
        assert!(coupled_simulate(2, 0.0, &s, 1.0, 1, &g).is_err());
    }

    proptest! {
        #[test]
        fn infection_stays_parent_closed(
            ops in proptest::collection::vec((any::<bool>(), 0u32..5, any::<u64>()), 1..60),
        ) {
            let w = TreeWindow::new(3, 0, -4).unwrap();
            let mut state = InfectionState::new(w);
            for (cure, depth, pick) in ops {
                if cure {
                    if state.curable_count() > 0 {
                        let before = state.count();
                        state.cure_slot((pick % state.curable_count() as u64) as usize);
                        prop_assert_eq!(state.count(), before - 1);
                    }
                } else {
                    let width = 3u64.pow(depth);
                    let id = (width - 1) / 2 + pick % width;
                    let node = Node { id, layer: -(depth as i32) };
                    let before = state.count();
                    let added = state.originate(node);
                    prop_assert!(added <= u64::from(depth) + 1);
                    prop_assert_eq!(state.count(), before + added);
                    prop_assert!(state.is_infected(w.root_node()));
                }
                prop_assert!(state.is_parent_closed());
            }
        }
    }
}
