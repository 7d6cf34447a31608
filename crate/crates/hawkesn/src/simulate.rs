//! Sampling generalized stochastic SIR realizations.
//!
//! Infections and recoveries are drawn in pairs: every new infection
//! immediately receives a recovery time from the configured distribution.
//! Because recoveries of existing infections are then known ahead of time,
//! the infection intensity is piecewise constant between decisions and the
//! next infection time is obtained by exact segment-by-segment inversion of
//! the cumulative intensity applied to a unit-rate exponential draw.

pub mod gillespie;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascades::{Event, SirRealization};
use crate::error::{Error, Result};
use crate::kernels::SirSpec;

/// Default cap on the number of sampled infections per realization.
pub const DEFAULT_MAX_EVENTS: usize = 1_000_000;

/// Configuration for one simulation run or batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub sir: SirSpec,
    pub seed: u64,
    pub max_events: usize,
    /// Optional time cap; infections past it are discarded and the run stops.
    pub horizon: Option<f64>,
}

impl SimConfig {
    pub fn new(sir: SirSpec, seed: u64) -> Self {
        SimConfig { sir, seed, max_events: DEFAULT_MAX_EVENTS, horizon: None }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_max_events(mut self, max_events: usize) -> Self {
        self.max_events = max_events;
        self
    }
}

/// Mark distribution `P(m) = (alpha - 1) m^{-alpha}` on `m >= 1`,
/// sampled by inverting the CDF.
pub fn mark_from_uniform(u: f64, alpha: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&u));
    (1.0 - u).powf(-1.0 / (alpha - 1.0))
}

/// Recovery entry ordered by time (earliest first in the heap).
#[derive(Debug, Clone, Copy)]
struct PendingRecovery {
    time: f64,
    weight: f64,
}

impl PartialEq for PendingRecovery {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time
    }
}
impl Eq for PendingRecovery {}
impl PartialOrd for PendingRecovery {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PendingRecovery {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap, we want the earliest recovery
        other.time.total_cmp(&self.time)
    }
}

fn exp1(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let s = -(1.0 - rng.random::<f64>()).ln();
        if s > 0.0 {
            return s;
        }
    }
}

fn positive_uniform(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u = rng.random::<f64>();
        if u > 0.0 {
            return u;
        }
    }
}

/// Two independent ChaCha streams per (seed, run): one for event timing,
/// one for marks, so marked and unmarked runs share identical timing draws.
fn run_rngs(seed: u64, run_index: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut time_rng = ChaCha8Rng::seed_from_u64(seed);
    time_rng.set_stream(2 * run_index);
    let mut mark_rng = ChaCha8Rng::seed_from_u64(seed);
    mark_rng.set_stream(2 * run_index + 1);
    (time_rng, mark_rng)
}

fn run_realization(
    sir: &SirSpec,
    max_events: usize,
    horizon: Option<f64>,
    time_rng: &mut ChaCha8Rng,
    mark_alpha: Option<f64>,
    mark_rng: &mut ChaCha8Rng,
) -> SirRealization {
    let population = sir.population_count();
    let pop_f = population as f64;
    let rho = sir.rho;
    let recovery = &sir.recovery;

    let mut infections: Vec<Event> = Vec::new();
    let mut recoveries: Vec<f64> = Vec::new();
    let mut pending: BinaryHeap<PendingRecovery> = BinaryHeap::new();
    let mut active_mass = 0.0;

    let draw_mark = |mark_rng: &mut ChaCha8Rng| match mark_alpha {
        Some(alpha) => mark_from_uniform(mark_rng.random::<f64>(), alpha),
        None => 1.0,
    };
    let weight_of = |mark: f64| if rho == 0.0 { 1.0 } else { mark.powf(rho) };

    // initial infection at time 0 with a pre-sampled recovery
    let first_mark = draw_mark(mark_rng);
    let first_recovery = recovery.quantile(positive_uniform(time_rng)).max(f64::MIN_POSITIVE);
    infections.push(Event::new(0.0, first_mark));
    recoveries.push(first_recovery);
    pending.push(PendingRecovery { time: first_recovery, weight: weight_of(first_mark) });
    active_mass += weight_of(first_mark);

    let mut now = 0.0_f64;
    while (infections.len() as u64) < population && infections.len() < max_events {
        let susceptible = pop_f - infections.len() as f64;
        let rate_coeff = sir.beta * susceptible / pop_f;

        // invert the piecewise-linear cumulative intensity for a unit-rate draw
        let mut budget = exp1(time_rng);
        let mut seg_start = now;
        let mut next_time = None;
        loop {
            let Some(&head) = pending.peek() else {
                break; // nobody infected: the intensity is zero forever
            };
            let lambda = rate_coeff * active_mass;
            if !(lambda > 0.0) {
                break; // beta = 0: no infection will ever occur
            }
            if head.time.is_infinite() {
                // remaining individuals never recover: constant rate
                next_time = Some(seg_start + budget / lambda);
                break;
            }
            let segment_mass = lambda * (head.time - seg_start);
            if segment_mass >= budget {
                next_time = Some(seg_start + budget / lambda);
                break;
            }
            budget -= segment_mass;
            seg_start = head.time;
            pending.pop();
            active_mass -= head.weight;
        }

        let Some(mut t) = next_time else {
            break; // cumulative intensity mass exhausted: next infection at infinity
        };
        if let Some(h) = horizon {
            if t > h {
                break;
            }
        }
        if t <= now {
            t = now.next_up();
        }
        now = t;

        let mark = draw_mark(mark_rng);
        let mut rec_time = now + recovery.quantile(positive_uniform(time_rng));
        if rec_time <= now {
            rec_time = now.next_up();
        }
        infections.push(Event::new(now, mark));
        recoveries.push(rec_time);
        pending.push(PendingRecovery { time: rec_time, weight: weight_of(mark) });
        active_mass += weight_of(mark);
    }

    SirRealization::new(infections, recoveries).expect("sampler maintains realization invariants")
}

/// Simulate one unmarked realization (all marks are 1).
pub fn simulate_sir(cfg: &SimConfig) -> Result<SirRealization> {
    cfg.validate()?;
    let (mut time_rng, mut mark_rng) = run_rngs(cfg.seed, 0);
    Ok(run_realization(&cfg.sir, cfg.max_events, cfg.horizon, &mut time_rng, None, &mut mark_rng))
}

/// Simulate one marked realization: each infection carries a mark drawn from
/// the power law with exponent `alpha` and contributes `mark^rho` to the
/// infection intensity.
pub fn simulate_marked(cfg: &SimConfig, alpha: f64) -> Result<SirRealization> {
    cfg.validate()?;
    if !(alpha > 1.0) {
        return Err(Error::InvalidParameter(format!("mark exponent alpha must exceed 1, got {alpha}")));
    }
    let (mut time_rng, mut mark_rng) = run_rngs(cfg.seed, 0);
    Ok(run_realization(&cfg.sir, cfg.max_events, cfg.horizon, &mut time_rng, Some(alpha), &mut mark_rng))
}

/// Simulate a batch of independent realizations; run `i` uses its own RNG
/// stream derived from `(seed, i)`, so results do not depend on scheduling.
pub fn simulate_batch(cfg: &SimConfig, runs: usize, alpha: Option<f64>) -> Result<Vec<SirRealization>> {
    cfg.validate()?;
    if let Some(a) = alpha {
        if !(a > 1.0) {
            return Err(Error::InvalidParameter(format!("mark exponent alpha must exceed 1, got {a}")));
        }
    }
    Ok((0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let (mut time_rng, mut mark_rng) = run_rngs(cfg.seed, run);
            run_realization(&cfg.sir, cfg.max_events, cfg.horizon, &mut time_rng, alpha, &mut mark_rng)
        })
        .collect())
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        self.sir.validate()?;
        if self.max_events == 0 {
            return Err(Error::InvalidParameter("max_events must be at least 1".into()));
        }
        Ok(())
    }
}

/// Empirical distribution of epidemic final sizes over repeated simulation.
#[derive(Debug, Clone, Serialize)]
pub struct SizeDistribution {
    population: u64,
    runs: usize,
    /// `counts[k-1]` = number of runs that ended with final size `k`.
    counts: Vec<u64>,
}

impl SizeDistribution {
    pub fn population(&self) -> u64 {
        self.population
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Empirical `P[final size <= k]` (unsmoothed).
    pub fn cdf(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let upto = (k.min(self.population)) as usize;
        let hits: u64 = self.counts[..upto].iter().sum();
        hits as f64 / self.runs as f64
    }

    /// Additively smoothed `P[final size = k]` over the support `[1, N]`,
    /// so sizes unseen in a finite sample keep positive likelihood.
    pub fn likelihood(&self, k: u64) -> f64 {
        if k == 0 || k > self.population {
            return 0.0;
        }
        (self.counts[(k - 1) as usize] + 1) as f64 / (self.runs as f64 + self.population as f64)
    }

    pub fn log_likelihood(&self, k: u64) -> f64 {
        self.likelihood(k).ln()
    }
}

/// Estimate the final-size distribution of `spec` from `runs` independent
/// seeded simulations.
pub fn size_distribution(spec: &SirSpec, runs: usize, seed: u64) -> Result<SizeDistribution> {
    if runs == 0 {
        return Err(Error::Precondition("size distribution needs at least one run".into()));
    }
    let cfg = SimConfig::new(*spec, seed);
    let sizes: Vec<usize> =
        simulate_batch(&cfg, runs, None)?.iter().map(|r| r.final_size()).collect();
    let population = spec.population_count();
    let mut counts = vec![0u64; population as usize];
    for s in sizes {
        counts[(s - 1).min(population as usize - 1)] += 1;
    }
    Ok(SizeDistribution { population, runs, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelFamily, RecoveryDistribution, SirSpec, DEFAULT_MARK_EXPONENT};
    use approx::assert_relative_eq;

    fn exp_sir(beta: f64, gamma: f64, population: f64) -> SirSpec {
        SirSpec::new(
            beta,
            RecoveryDistribution::new(KernelFamily::Exp, gamma, None).unwrap(),
            population,
        )
        .unwrap()
    }

    #[test]
    fn population_one_never_enters_the_loop() {
        let cfg = SimConfig::new(exp_sir(2.0, 1.0, 1.0), 42);
        let real = simulate_sir(&cfg).unwrap();
        assert_eq!(real.final_size(), 1);
        assert_eq!(real.infections()[0].time, 0.0);
        assert!(real.recoveries()[0] > 0.0);
    }

    #[test]
    fn zero_infection_rate_stops_after_the_seed_case() {
        let cfg = SimConfig::new(exp_sir(0.0, 1.0, 100.0), 7);
        let real = simulate_sir(&cfg).unwrap();
        assert_eq!(real.final_size(), 1);
    }

    #[test]
    fn same_config_reproduces_bit_identical_realizations() {
        let cfg = SimConfig::new(exp_sir(2.5, 0.5, 200.0), 123);
        let a = simulate_sir(&cfg).unwrap();
        let b = simulate_sir(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn recoveries_strictly_follow_their_infections() {
        for seed in 0..20 {
            let cfg = SimConfig::new(exp_sir(1.5, 1.0, 50.0), seed);
            let real = simulate_sir(&cfg).unwrap();
            for (e, &r) in real.infections().iter().zip(real.recoveries()) {
                assert!(r > e.time);
            }
            let times: Vec<f64> = real.infections().iter().map(|e| e.time).collect();
            assert!(times.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn marked_with_zero_rho_matches_unmarked_times() {
        let spec = exp_sir(2.0, 0.8, 100.0);
        let cfg = SimConfig::new(spec, 99);
        let unmarked = simulate_sir(&cfg).unwrap();
        let marked = simulate_marked(&cfg, DEFAULT_MARK_EXPONENT).unwrap();
        assert_eq!(unmarked.final_size(), marked.final_size());
        for (a, b) in unmarked.infections().iter().zip(marked.infections()) {
            assert_eq!(a.time, b.time); // bitwise: timing draws share a stream
        }
        assert!(marked.infections().iter().any(|e| e.mark > 1.0));
    }

    #[test]
    fn mark_inverse_cdf_examples() {
        let m = mark_from_uniform(0.5, DEFAULT_MARK_EXPONENT);
        assert_relative_eq!(m, 0.5f64.powf(-1.0 / 1.016), max_relative = 1e-12);
        assert_relative_eq!(m, 1.978, max_relative = 1e-3);
        for u in [0.0, 0.1, 0.9, 0.999_999] {
            assert!(mark_from_uniform(u, DEFAULT_MARK_EXPONENT) >= 1.0);
        }
    }

    #[test]
    fn marked_rejects_bad_alpha() {
        let cfg = SimConfig::new(exp_sir(1.0, 1.0, 10.0), 0);
        assert!(simulate_marked(&cfg, 1.0).is_err());
    }

    #[test]
    fn horizon_truncates_the_run() {
        let cfg = SimConfig::new(exp_sir(5.0, 0.1, 500.0), 3).with_horizon(0.5);
        let real = simulate_sir(&cfg).unwrap();
        assert!(real.infections().iter().all(|e| e.time <= 0.5));
        assert!(real.final_size() < 500);
    }

    #[test]
    fn max_events_caps_the_run() {
        let cfg = SimConfig::new(exp_sir(5.0, 0.1, 500.0), 3).with_max_events(10);
        assert_eq!(simulate_sir(&cfg).unwrap().final_size(), 10);
    }

    #[test]
    fn si_limit_infects_everyone() {
        // gamma = 0: nobody recovers, so with beta > 0 the epidemic always
        // reaches the whole population.
        let cfg = SimConfig::new(exp_sir(1.0, 0.0, 40.0), 11);
        assert_eq!(simulate_sir(&cfg).unwrap().final_size(), 40);
    }

    #[test]
    fn two_individual_race_probability() {
        // N = 2, beta = gamma: the second infection (rate beta/2 while one
        // individual is infected) wins the race against recovery (rate gamma)
        // with probability (beta/2) / (beta/2 + gamma) = 1/3.
        let spec = exp_sir(1.0, 1.0, 2.0);
        let runs = 5000;
        let sizes = simulate_batch(&SimConfig::new(spec, 314), runs, None).unwrap();
        let p2 = sizes.iter().filter(|r| r.final_size() == 2).count() as f64 / runs as f64;
        assert!((p2 - 1.0 / 3.0).abs() < 0.02, "P[size = 2] = {p2}");
    }

    #[test]
    fn final_size_mean_tracks_gillespie_oracle() {
        let runs = 400;
        let spec = exp_sir(2.0, 1.0, 100.0);
        let ours: f64 = simulate_batch(&SimConfig::new(spec, 5), runs, None)
            .unwrap()
            .iter()
            .map(|r| r.final_size() as f64)
            .sum::<f64>()
            / runs as f64;
        let oracle_sizes = gillespie::final_sizes(2.0, 1.0, 100, runs, 6);
        let oracle: f64 = oracle_sizes.iter().map(|&s| s as f64).sum::<f64>() / runs as f64;
        // crude agreement check; the acceptance suite runs the KS version
        assert!(
            (ours - oracle).abs() < 8.0,
            "mean final size {ours} vs oracle {oracle}"
        );
    }

    #[test]
    fn size_distribution_point_mass_without_spread() {
        let spec = exp_sir(0.0, 1.0, 10.0);
        let dist = size_distribution(&spec, 200, 0).unwrap();
        assert_eq!(dist.cdf(1), 1.0);
        assert_eq!(dist.counts()[0], 200);
    }

    #[test]
    fn size_distribution_cdf_is_monotone_and_reaches_one() {
        let spec = exp_sir(3.0, 1.0, 30.0);
        let dist = size_distribution(&spec, 500, 9).unwrap();
        let mut prev = 0.0;
        for k in 1..=30 {
            let c = dist.cdf(k);
            assert!(c >= prev);
            prev = c;
        }
        assert_eq!(dist.cdf(30), 1.0);
        // smoothed likelihoods are positive on the whole support and vanish outside
        assert!(dist.likelihood(17) > 0.0);
        assert_eq!(dist.likelihood(0), 0.0);
        assert_eq!(dist.likelihood(31), 0.0);
        let total: f64 = (1..=30).map(|k| dist.likelihood(k)).sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn two_state_race_via_analytic_probability_general_params() {
        // same race with beta = 2, gamma = 0.5: p = 1 / (1 + 2 gamma / beta) = 2/3
        let spec = exp_sir(2.0, 0.5, 2.0);
        let sizes = simulate_batch(&SimConfig::new(spec, 2718), 5000, None).unwrap();
        let p2 = sizes.iter().filter(|r| r.final_size() == 2).count() as f64 / 5000.0;
        assert!((p2 - 2.0 / 3.0).abs() < 0.02, "P[size = 2] = {p2}");
    }

    #[test]
    fn bounded_support_recovery_families_simulate() {
        for family in [KernelFamily::Linear, KernelFamily::Quadratic] {
            let rec = RecoveryDistribution::new(family, 0.5, None).unwrap();
            let spec = SirSpec::new(1.5, rec, 60.0).unwrap();
            let real = simulate_sir(&SimConfig::new(spec, 21)).unwrap();
            let end = rec.support_end();
            for (e, &r) in real.infections().iter().zip(real.recoveries()) {
                assert!(r - e.time <= end);
            }
        }
    }
}
