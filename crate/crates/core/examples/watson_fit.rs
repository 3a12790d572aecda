//! Axial data: Watson EM over the quotient of the cubic group.

use std::sync::Arc;

use ginvariant::estimator::{em_watson, EmConfig};
use ginvariant::sampler::{sample_watson, uniform_quaternion, wrap_to_fz, RngStream};
use ginvariant::symgroup::SymmetryGroup;

fn main() -> ginvariant::Result<()> {
    let group = Arc::new(SymmetryGroup::cubic());
    let mut rng = RngStream::new(5);
    for kappa in [10.0, 50.0, 100.0] {
        let mu = uniform_quaternion(&mut rng);
        let xs = wrap_to_fz(&sample_watson(&mu, kappa, 1000, &mut rng), &group)?;
        let fit = em_watson(&xs, &group, &EmConfig::default())?;
        println!(
            "kappa_o {kappa:>5}  kappa_hat {:>8.3}  d_G {:.5}  loglik {:.2}",
            fit.model.kappa(),
            group.distance(&mu, &fit.model.mu()),
            fit.loglik
        );
    }
    Ok(())
}
