//! Final-size prediction: fit on an observed prefix, extract features,
//! train the sigma regressor with rotating-fold cross validation, and
//! compare against the no-growth baseline.
//!
//! ```bash
//! cargo run --release --example predict_popularity
//! ```

use hawkesn::cascades::Cascade;
use hawkesn::fit::{fit_cascade, FitConfig};
use hawkesn::kernels::{KernelFamily, RecoveryDistribution, SirSpec};
use hawkesn::predict::{are, combine_predictions, extract_features, train_sigma, CvConfig, TrainingRow};
use hawkesn::simulate::{simulate_sir, SimConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> hawkesn::Result<()> {
    // heterogeneous ground truth: each cascade gets its own rates
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let mut cascades: Vec<Cascade> = Vec::new();
    let mut seed = 0;
    while cascades.len() < 80 && seed < 600 {
        let beta = 1.2 + rng.random::<f64>() * 1.8;
        let gamma = 0.3 + rng.random::<f64>() * 0.9;
        let spec = SirSpec::new(
            beta,
            RecoveryDistribution::new(KernelFamily::Exp, gamma, None)?,
            200.0,
        )?;
        let real = simulate_sir(&SimConfig::new(spec, 7000 + seed))?;
        seed += 1;
        if real.len() >= 30 {
            cascades.push(real.cascade(format!("c{seed}")));
        }
    }
    println!("{} cascades in the corpus", cascades.len());

    let cfg_exp = FitConfig::new(KernelFamily::Exp).with_seed(4).with_restarts(5);
    let cfg_pl = FitConfig::new(KernelFamily::PowerLaw).with_seed(4).with_restarts(5).pin_c(2.0);
    let mut rows_exp = Vec::new();
    let mut rows_pl = Vec::new();
    let mut baseline = Vec::new();
    for cascade in &cascades {
        // observe the first half of the events
        let k = (cascade.len() as f64 * 0.5).ceil() as usize;
        let prefix = cascade.prefix(k)?;
        let t_obs = prefix.last_time();
        let fit_exp = fit_cascade(&prefix, &cfg_exp)?;
        let fit_pl = fit_cascade(&prefix, &cfg_pl)?;
        rows_exp.push(TrainingRow {
            features: extract_features(&fit_exp.params, cascade, t_obs)?,
            final_size: cascade.len(),
        });
        rows_pl.push(TrainingRow {
            features: extract_features(&fit_pl.params, cascade, t_obs)?,
            final_size: cascade.len(),
        });
        baseline.push(are(k as f64, cascade.len()));
    }

    let cv = CvConfig { folds: 10, train_folds: 4, seed: 9 };
    let trained_exp = train_sigma(&rows_exp, &cv)?;
    let trained_pl = train_sigma(&rows_pl, &cv)?;

    let mut combined = Vec::new();
    for (a, b) in trained_exp.predictions.iter().zip(&trained_pl.predictions) {
        let avg = combine_predictions(&[a.predicted, b.predicted])?;
        combined.push(are(avg, a.true_size));
    }
    let median = |mut xs: Vec<f64>| {
        xs.sort_by(f64::total_cmp);
        xs[xs.len() / 2]
    };
    println!("median ARE, no-growth baseline: {:.3}", median(baseline));
    println!("median ARE, exp features:       {:.3}", trained_exp.median_are());
    println!("median ARE, power-law features: {:.3}", trained_pl.median_are());
    println!("median ARE, combined average:   {:.3}", median(combined));

    let p = &trained_exp.predictions[0];
    println!(
        "\nexample cascade {}: observed {}, fitted N {:.1}, sigma {:.3} -> predicted {:.1} (true {})",
        p.cascade_id, p.observed_count, p.population, p.sigma_hat, p.predicted, p.true_size
    );
    Ok(())
}
