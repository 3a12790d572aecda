//! Two wrapped populations: mixture EM against symmetry-aware and naive k-means.

use std::sync::Arc;

use ginvariant::cluster::{best_permutation, em_mixture, kmeans_spherical, KMeansMode};
use ginvariant::density::Family;
use ginvariant::estimator::EmConfig;
use ginvariant::sampler::{sample_vmf, uniform_quaternion, wrap_to_fz, OrientationSample, RngStream};
use ginvariant::symgroup::SymmetryGroup;

fn main() -> ginvariant::Result<()> {
    let group = Arc::new(SymmetryGroup::cubic());
    let mut rng = RngStream::new(17);
    let truth = [uniform_quaternion(&mut rng), uniform_quaternion(&mut rng)];
    let mut raw = sample_vmf(&truth[0], 50.0, 500, &mut rng).into_inner();
    raw.extend(sample_vmf(&truth[1], 50.0, 500, &mut rng).iter());
    let xs = wrap_to_fz(&OrientationSample::new(raw), &group)?;

    let em = em_mixture(&xs, &group, 2, Family::Vmf, &EmConfig::default())?;
    let em_means: Vec<_> = em.model.clusters().iter().map(|c| c.mu()).collect();
    let m = best_permutation(&em_means, &truth, &group)?;
    println!("mixture EM        mean cos d_G {:.5}  alpha {:?}", m.mean_cosine(), em.model.alpha());

    for (name, mode) in [
        ("k-means (naive)", KMeansMode::Naive),
        ("k-means (G-aware)", KMeansMode::SymmetryAware(group.clone())),
    ] {
        let km = kmeans_spherical(&xs, 2, &mode, Family::Vmf, &mut rng)?;
        let m = best_permutation(&km.centroids, &truth, &group)?;
        println!("{name:<17} mean cos d_G {:.5}  sizes {:?}", m.mean_cosine(), km.counts());
    }
    Ok(())
}
