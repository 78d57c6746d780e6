/// Cost limits applied before and during sampling. These are configuration,
/// not constants: the CLI lets users override every field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostGuards {
    /// Largest window depth for the coalescing sampler.
    pub coalescing_max_depth: u32,
    /// Largest window depth for the voter sampler.
    pub voter_max_depth: u32,
    /// Vertex-state evaluations allowed in a single sample.
    pub max_visits_per_sample: u64,
    /// Largest lattice, in sites, for the torus demo.
    pub lattice_max_sites: u64,
    /// Largest window, in vertices, for the coupled and infection simulations.
    pub ising_max_vertices: u64,
    /// Longest simulated horizon for the event-driven simulations.
    pub max_horizon: f64,
}

impl Default for CostGuards {
    fn default() -> Self {
        Self {
            coalescing_max_depth: 24,
            voter_max_depth: 14,
            max_visits_per_sample: 10_000_000,
            lattice_max_sites: 10_000_000,
            ising_max_vertices: 2_000_000,
            max_horizon: 1.0e6,
        }
    }
}
