//! Likelihood-ratio test of one population against two.

use std::sync::Arc;

use ginvariant::cluster::glrt_multimodal;
use ginvariant::density::Family;
use ginvariant::estimator::EmConfig;
use ginvariant::sampler::{sample_vmf, uniform_quaternion, wrap_to_fz, OrientationSample, RngStream};
use ginvariant::symgroup::SymmetryGroup;

fn main() -> ginvariant::Result<()> {
    let group = Arc::new(SymmetryGroup::cubic());
    let mut rng = RngStream::new(8);
    let cfg = EmConfig::default();

    let single = wrap_to_fz(&sample_vmf(&uniform_quaternion(&mut rng), 50.0, 1000, &mut rng), &group)?;
    let mut raw = sample_vmf(&uniform_quaternion(&mut rng), 50.0, 500, &mut rng).into_inner();
    raw.extend(sample_vmf(&uniform_quaternion(&mut rng), 50.0, 500, &mut rng).iter());
    let double = wrap_to_fz(&OrientationSample::new(raw), &group)?;

    for (name, xs) in [("one population", &single), ("two populations", &double)] {
        let t = glrt_multimodal(xs, &group, 2, Family::Vmf, 0.05, &cfg)?;
        println!(
            "{name:<16} statistic {:>9.2}  threshold {:.2} (dof {})  reject {}",
            t.statistic, t.threshold, t.dof, t.reject_h0
        );
    }
    Ok(())
}
