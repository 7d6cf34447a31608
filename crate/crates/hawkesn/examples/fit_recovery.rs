//! Recover epidemic parameters when recoveries are unobserved: simulate
//! stochastic SIR, hide the recovery times, and jointly fit the
//! finite-population self-exciting likelihood on the infection times only.
//!
//! ```bash
//! cargo run --release --example fit_recovery
//! ```

use hawkesn::cascades::Cascade;
use hawkesn::fit::{fit_joint, fit_sir, FitConfig};
use hawkesn::kernels::{KernelFamily, RecoveryDistribution, SirSpec};
use hawkesn::simulate::{simulate_batch, SimConfig};

fn main() -> hawkesn::Result<()> {
    let (beta, gamma, population) = (2.5, 0.5, 100.0);
    let truth = SirSpec::new(
        beta,
        RecoveryDistribution::new(KernelFamily::Exp, gamma, None)?,
        population,
    )?;
    println!(
        "truth: beta = {beta}, gamma = {gamma}, N = {population}, n* = {}",
        beta / gamma
    );

    let realizations = simulate_batch(&SimConfig::new(truth, 11), 30, None)?;

    // full observation: the SIR likelihood sees infections and recoveries
    let cfg = FitConfig::new(KernelFamily::Exp).with_seed(1).with_restarts(5);
    let sir_fit = fit_sir(&realizations, &cfg)?;
    println!(
        "SIR fit (recoveries observed):   beta = {:.3}, gamma = {:.3}, N = {:.1}",
        sir_fit.spec.beta, sir_fit.spec.recovery.theta, sir_fit.spec.population
    );

    // hidden recoveries: fit the self-exciting likelihood on infections only
    let cascades: Vec<Cascade> = realizations
        .iter()
        .enumerate()
        .map(|(i, r)| r.cascade(format!("c{i}")))
        .collect();
    let hawkes_fit = fit_joint(&cascades, &cfg)?;
    let view = &hawkes_fit.sir_view;
    println!(
        "HawkesN fit (recoveries hidden): beta = {:.3}, gamma = {:.3}, N = {:.1}",
        view.beta, view.recovery.theta, hawkes_fit.params.population
    );
    println!(
        "kernel form: kappa = {:.3}, theta = {:.3}, converged = {}, nll = {:.1}",
        hawkes_fit.params.kernel.kappa,
        hawkes_fit.params.kernel.theta,
        hawkes_fit.converged,
        hawkes_fit.neg_loglik
    );
    Ok(())
}
