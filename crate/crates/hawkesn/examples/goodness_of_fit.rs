//! Residual analysis: rescale cascades under fitted models, run the KS,
//! excess-dispersion and Ljung-Box tests, and compare two kernels by KS
//! distance.
//!
//! ```bash
//! cargo run --release --example goodness_of_fit
//! ```

use hawkesn::cascades::Cascade;
use hawkesn::fit::{fit_cascade, FitConfig};
use hawkesn::gof::{compare_models, gof_report, ModelComparison, DEFAULT_KS_GAP};
use hawkesn::kernels::{KernelFamily, RecoveryDistribution, SirSpec};
use hawkesn::simulate::{simulate_batch, SimConfig};

fn main() -> hawkesn::Result<()> {
    let truth = SirSpec::new(
        2.5,
        RecoveryDistribution::new(KernelFamily::Exp, 0.5, None)?,
        150.0,
    )?;
    let cascades: Vec<Cascade> = simulate_batch(&SimConfig::new(truth, 33), 25, None)?
        .into_iter()
        .filter(|r| r.len() >= 20)
        .enumerate()
        .map(|(i, r)| r.cascade(format!("c{i}")))
        .collect();
    println!("{} cascades with at least 20 events", cascades.len());

    let cfg_exp = FitConfig::new(KernelFamily::Exp).with_seed(1).with_restarts(5);
    let cfg_pl = FitConfig::new(KernelFamily::PowerLaw).with_seed(1).with_restarts(5).pin_c(2.0);

    let mut wins = [0usize; 3]; // exp, powerlaw, tie
    let mut passes = [0usize; 2];
    for cascade in &cascades {
        let fit_exp = fit_cascade(cascade, &cfg_exp)?;
        let fit_pl = fit_cascade(cascade, &cfg_pl)?;
        let report_exp = gof_report(&fit_exp.params, cascade)?;
        let report_pl = gof_report(&fit_pl.params, cascade)?;
        passes[0] += report_exp.pass_at(0.01).ks as usize;
        passes[1] += report_pl.pass_at(0.01).ks as usize;
        match compare_models(&report_exp, &report_pl, DEFAULT_KS_GAP) {
            ModelComparison::FirstBetter => wins[0] += 1,
            ModelComparison::SecondBetter => wins[1] += 1,
            ModelComparison::Tie => wins[2] += 1,
        }
    }
    println!("KS pass rate at 0.01:  exp {}/{n}, powerlaw {}/{n}", passes[0], passes[1], n = cascades.len());
    println!(
        "KS-distance comparison (gap {DEFAULT_KS_GAP}): exp better {}, powerlaw better {}, tie {}",
        wins[0], wins[1], wins[2]
    );

    // one detailed report
    let fit = fit_cascade(&cascades[0], &cfg_exp)?;
    let report = gof_report(&fit.params, &cascades[0])?;
    println!(
        "\ncascade {}: D = {:.3} (p = {:.3}), ED p = {:.3}, LB p = {:.3} over {} intervals",
        cascades[0].id, report.ks_d, report.ks_p, report.ed_p, report.lb_p, report.n_taus
    );
    Ok(())
}
