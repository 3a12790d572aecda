//! The sign-folded VMF E-step visits half the group and reaches the same
//! fixed point as the plain one.

use std::sync::Arc;
use std::time::Instant;

use ginvariant::estimator::{em_vmf, em_vmf_hyperbolic, EmConfig};
use ginvariant::sampler::{sample_vmf, uniform_quaternion, wrap_to_fz, RngStream};
use ginvariant::symgroup::SymmetryGroup;

fn main() -> ginvariant::Result<()> {
    let group = Arc::new(SymmetryGroup::cubic());
    let mut rng = RngStream::new(3);
    let mu = uniform_quaternion(&mut rng);
    let xs = wrap_to_fz(&sample_vmf(&mu, 50.0, 1000, &mut rng), &group)?;
    let cfg = EmConfig::default();

    let t = Instant::now();
    let plain = em_vmf(&xs, &group, &cfg)?;
    let plain_time = t.elapsed();
    let t = Instant::now();
    let folded = em_vmf_hyperbolic(&xs, &group, &cfg)?;
    let folded_time = t.elapsed();

    println!("plain      {plain_time:>10.2?}  kappa {:.10}", plain.model.kappa());
    println!("hyperbolic {folded_time:>10.2?}  kappa {:.10}", folded.model.kappa());
    println!("mean gap   {:.2e}", group.distance(&plain.model.mu(), &folded.model.mu()));
    Ok(())
}
