//! A small concentration sweep written to CSV and JSON in a temporary directory.

use ginvariant::density::Family;
use ginvariant::estimator::EmConfig;
use ginvariant::experiments::{run_estimation_sweep, write_sweep, GroupKind, Method, SweepConfig};

fn main() -> ginvariant::Result<()> {
    let cfg = SweepConfig {
        generate: vec![Family::Vmf],
        methods: vec![Method::MlNaive, Method::MlModified, Method::EmVmf],
        kappa_grid: vec![5.0, 20.0, 50.0, 80.0],
        n: 1000,
        trials: 5,
        seed: 1,
        group: GroupKind::Cubic,
        em: EmConfig::default(),
    };
    let out = run_estimation_sweep(&cfg)?;
    println!("{:<12} {:>6} {:>10} {:>10}", "method", "kappa", "cos d_G", "kappa_hat");
    for s in &out.summary {
        println!(
            "{:<12} {:>6} {:>10.5} {:>10.3}",
            s.method,
            s.kappa_o,
            s.mean_inner_product.unwrap_or(f64::NAN),
            s.mean_kappa_hat.unwrap_or(f64::NAN)
        );
    }
    let dir = std::env::temp_dir().join("ginvariant-sweep");
    let (csv, json) = write_sweep(&out, &dir)?;
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}
