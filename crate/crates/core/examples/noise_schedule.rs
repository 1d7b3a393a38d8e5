//! Linear-beta DDPM schedule: the ᾱ table, the inference timesteps and one
//! forward-noise / inversion round trip.
//!
//! ```text
//! cargo run --release --example noise_schedule
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sewdiff::scheduler::{DdpmScheduler, SchedulerConfig};

fn main() -> sewdiff::Result<()> {
    let s = DdpmScheduler::new(SchedulerConfig::default())?;
    for t in [0, 99, 249, 499, 749, 999] {
        let ab = s.alpha_bars[t];
        println!("t = {t:>3}  ᾱ = {ab:.6}  SNR = {:.4e}", ab / (1.0 - ab));
    }
    let ts = s.inference_timesteps(50)?;
    println!("50 inference steps: {:?} … {:?}", &ts[..3], &ts[ts.len() - 3..]);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x0: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let eps: Vec<f64> = (0..16).map(|_| rng.sample(StandardNormal)).collect();
    let xt = s.add_noise(&x0, &eps, 600)?;
    let back = s.predict_x0(&eps, 600, &xt)?;
    let err = x0.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("noised to t = 600 and inverted with the true noise: max error {err:.2e}");
    Ok(())
}
