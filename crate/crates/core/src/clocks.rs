//! Reproducible rate-1 Poisson clocks, one per tree vertex.
//!
//! Every vertex owns two small xoshiro256++ streams whose seeds hash the
//! master key together with the vertex's node id: one generates rings forward
//! from time 0, the other backward. Each ring consumes an Exp(1) gap, a fair coin and a uniform from
//! its stream, so the draws attached to ring index `i` never depend on the
//! order in which rings were requested.
//!
//! Ring index 1 is the first ring at or after time 0 and index 0 is the last
//! ring before time 0; earlier rings get decreasing indices.

use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rand_xoshiro::Xoshiro256PlusPlus;
use rustc_hash::FxHashMap;
use std::ops::RangeInclusive;

use crate::spin::Spin;

/// A ring of a vertex clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    pub time: f64,
    pub index: i64,
}

#[derive(Debug, Clone, Copy)]
struct RingDraw {
    time: f64,
    coin: Spin,
    uniform: f64,
}

#[derive(Debug, Default)]
struct VertexClock {
    forward: Vec<RingDraw>,
    backward: Vec<RingDraw>,
    forward_rng: Option<Xoshiro256PlusPlus>,
    backward_rng: Option<Xoshiro256PlusPlus>,
}

impl VertexClock {
    fn clear(&mut self) {
        self.forward.clear();
        self.backward.clear();
        self.forward_rng = None;
        self.backward_rng = None;
    }
}

/// Derives an independent 64-bit seed for sub-stream `stream` of `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.random()
}

#[derive(Debug)]
pub struct ClockStream {
    key: [u8; 32],
    /// Node id to position in `slab`.
    index: FxHashMap<u64, u32>,
    /// Per-vertex storage; entries past `index.len()` are spare buffers kept
    /// by [`ClockStream::reseed`].
    slab: Vec<VertexClock>,
    negate_coins: bool,
}

const FORWARD: u64 = 0;
const BACKWARD: u64 = 1;

impl ClockStream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: ChaCha8Rng::seed_from_u64(seed).get_seed(),
            index: FxHashMap::default(),
            slab: Vec::new(),
            negate_coins: false,
        }
    }

    /// Switches to the clocks of `seed`, reusing the allocated storage. The
    /// result behaves exactly like `ClockStream::new(seed)` with the current
    /// coin negation.
    pub fn reseed(&mut self, seed: u64) {
        self.key = ChaCha8Rng::seed_from_u64(seed).get_seed();
        self.index.clear();
    }

    /// Same clocks and uniforms, with every coin flipped.
    pub fn with_negated_coins(mut self) -> Self {
        self.negate_coins = !self.negate_coins;
        self
    }

    /// Number of vertices whose clock has been touched.
    pub fn touched_vertices(&self) -> usize {
        self.index.len()
    }

    fn stream_rng(&self, node: u64, direction: u64) -> Xoshiro256PlusPlus {
        let mut h = rustc_hash::FxHasher::default();
        (self.key, node, direction).hash(&mut h);
        Xoshiro256PlusPlus::seed_from_u64(h.finish())
    }

    fn slot(&mut self, node: u64) -> usize {
        let next = self.index.len();
        let slot = *self.index.entry(node).or_insert(next as u32) as usize;
        if slot == next {
            if slot < self.slab.len() {
                self.slab[slot].clear();
            } else {
                self.slab.push(VertexClock::default());
            }
        }
        slot
    }

    fn draw(rng: &mut Xoshiro256PlusPlus) -> RingDraw {
        let time: f64 = rng.sample(Exp1);
        let coin = if rng.random::<bool>() {
            Spin::Plus
        } else {
            Spin::Minus
        };
        let uniform: f64 = rng.random();
        RingDraw {
            time,
            coin,
            uniform,
        }
    }

    fn extend_forward(&mut self, slot: usize, node: u64) {
        if self.slab[slot].forward_rng.is_none() {
            self.slab[slot].forward_rng = Some(self.stream_rng(node, FORWARD));
        }
        let clock = &mut self.slab[slot];
        let mut ring = Self::draw(clock.forward_rng.as_mut().unwrap());
        ring.time += clock.forward.last().map_or(0.0, |r| r.time);
        clock.forward.push(ring);
    }

    fn extend_backward(&mut self, slot: usize, node: u64) {
        if self.slab[slot].backward_rng.is_none() {
            self.slab[slot].backward_rng = Some(self.stream_rng(node, BACKWARD));
        }
        let clock = &mut self.slab[slot];
        let mut ring = Self::draw(clock.backward_rng.as_mut().unwrap());
        ring.time = clock.backward.last().map_or(0.0, |r| r.time) - ring.time;
        clock.backward.push(ring);
    }

    fn ring_draw(&mut self, node: u64, index: i64) -> RingDraw {
        let slot = self.slot(node);
        if index >= 1 {
            let i = (index - 1) as usize;
            while self.slab[slot].forward.len() <= i {
                self.extend_forward(slot, node);
            }
            self.slab[slot].forward[i]
        } else {
            let i = (-index) as usize;
            while self.slab[slot].backward.len() <= i {
                self.extend_backward(slot, node);
            }
            self.slab[slot].backward[i]
        }
    }

    /// Time of ring `index` of `node`.
    pub fn ring_time(&mut self, node: u64, index: i64) -> f64 {
        self.ring_draw(node, index).time
    }

    /// The greatest ring strictly before `t`.
    pub fn last_ring_before(&mut self, node: u64, t: f64) -> Ring {
        let slot = self.slot(node);
        if t > 0.0 {
            while self.slab[slot].forward.last().is_none_or(|r| r.time < t) {
                self.extend_forward(slot, node);
            }
            let forward = &self.slab[slot].forward;
            let count = forward.partition_point(|r| r.time < t);
            if count > 0 {
                Ring {
                    time: forward[count - 1].time,
                    index: count as i64,
                }
            } else {
                Ring {
                    time: self.ring_time(node, 0),
                    index: 0,
                }
            }
        } else {
            while self.slab[slot].backward.last().is_none_or(|r| r.time >= t) {
                self.extend_backward(slot, node);
            }
            let backward = &self.slab[slot].backward;
            let i = backward.partition_point(|r| r.time >= t);
            Ring {
                time: backward[i].time,
                index: -(i as i64),
            }
        }
    }

    /// Indices of the rings of `node` in `[s, t)`; empty when `s >= t`.
    pub fn ring_indices_in(&mut self, node: u64, s: f64, t: f64) -> RangeInclusive<i64> {
        if s >= t {
            #[allow(clippy::reversed_empty_ranges)]
            return 1..=0;
        }
        let before_s = self.last_ring_before(node, s).index;
        let before_t = self.last_ring_before(node, t).index;
        before_s + 1..=before_t
    }

    /// All rings of `node` in `[s, t)`, in increasing time order.
    pub fn rings_in(&mut self, node: u64, s: f64, t: f64) -> Vec<Ring> {
        self.ring_indices_in(node, s, t)
            .map(|index| Ring {
                time: self.ring_time(node, index),
                index,
            })
            .collect()
    }

    /// Fair ±1 coin attached to ring `index` of `node`.
    pub fn coin_at(&mut self, node: u64, index: i64) -> Spin {
        let coin = self.ring_draw(node, index).coin;
        if self.negate_coins {
            -coin
        } else {
            coin
        }
    }

    /// Uniform in `[0, 1)` attached to ring `index` of `node`.
    pub fn uniform_at(&mut self, node: u64, index: i64) -> f64 {
        self.ring_draw(node, index).uniform
    }
}
