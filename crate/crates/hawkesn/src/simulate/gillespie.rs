//! Classic constant-rate stochastic SIR sampled with the direct (Gillespie)
//! method.
//!
//! This is a deliberately independent reference implementation: it knows
//! nothing about kernels, pre-sampled recoveries or compensator inversion,
//! and exists to validate the generalized sampler in the exponential-recovery
//! case where the two models coincide.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Outcome of one Gillespie run.
#[derive(Debug, Clone)]
pub struct GillespieRun {
    /// Total number of individuals ever infected.
    pub final_size: u64,
    /// Times of the infection events, starting at 0.
    pub infection_times: Vec<f64>,
}

/// Simulate classic SIR: infection rate `beta * S/N * I`, recovery rate
/// `gamma * I`, one initial infection at time 0.
pub fn simulate(beta: f64, gamma: f64, population: u64, rng: &mut ChaCha8Rng) -> GillespieRun {
    assert!(population >= 1);
    let n = population as f64;
    let mut susceptible = population - 1;
    let mut infected = 1u64;
    let mut cumulative = 1u64;
    let mut t = 0.0;
    let mut infection_times = vec![0.0];

    while infected > 0 {
        let rate_infection = beta * (susceptible as f64) / n * infected as f64;
        let rate_recovery = gamma * infected as f64;
        let total = rate_infection + rate_recovery;
        if total <= 0.0 {
            break;
        }
        t += -(1.0 - rng.random::<f64>()).ln() / total;
        if rng.random::<f64>() * total < rate_infection {
            susceptible -= 1;
            infected += 1;
            cumulative += 1;
            infection_times.push(t);
        } else {
            infected -= 1;
        }
    }

    GillespieRun { final_size: cumulative, infection_times }
}

fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Final sizes of `runs` independent seeded simulations.
pub fn final_sizes(beta: f64, gamma: f64, population: u64, runs: usize, seed: u64) -> Vec<u64> {
    (0..runs as u64)
        .into_par_iter()
        .map(|run| simulate(beta, gamma, population, &mut run_rng(seed, run)).final_size)
        .collect()
}

/// The `k`-th infection time (0-based) of each run that reached it.
pub fn kth_infection_times(
    beta: f64,
    gamma: f64,
    population: u64,
    runs: usize,
    seed: u64,
    k: usize,
) -> Vec<f64> {
    (0..runs as u64)
        .into_par_iter()
        .filter_map(|run| {
            simulate(beta, gamma, population, &mut run_rng(seed, run))
                .infection_times
                .get(k)
                .copied()
        })
        .collect()
}
