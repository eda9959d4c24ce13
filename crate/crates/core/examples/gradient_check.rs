//! Compare the analytic minibatch gradient with central differences.
//!
//! cargo run --example gradient_check

use msl::inferrer::{batch_loss, gradient, init_params, Minibatch};
use msl::Architecture;
use rand::Rng;

fn main() -> msl::Result<()> {
    let arch = Architecture::new(1, 4)?;
    let params = init_params(arch, 3);
    let mut rng = msl::rng::rng_from_seed(3);
    let mut batch = Minibatch::new(arch.input_dim());
    for _ in 0..6 {
        let patch: Vec<f64> = (0..arch.input_dim()).map(|_| rng.random_range(0.0..1.0)).collect();
        batch.push(&patch, rng.random_range(0.0..1.0))?;
    }
    let analytic = gradient(&params, &batch)?;
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for i in 0..arch.param_count() {
        let (mut p, mut m) = (params.clone(), params.clone());
        p.as_mut_slice()[i] += h;
        m.as_mut_slice()[i] -= h;
        let numeric = (batch_loss(&p, &batch) - batch_loss(&m, &batch)) / (2.0 * h);
        let a = analytic.as_slice()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
    }
    println!("{} parameters, max relative error {worst:.2e}", arch.param_count());
    Ok(())
}
