//! Susceptibility scan of a short chain with exact diagonalization.
//!
//! `cargo run --release --example peak_scan -- 12`

use spinchain::model::ModelParams;
use spinchain::scan::{scan_delta_f, Backend, Observable, ScanConfig};

fn main() -> spinchain::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(12);
    let backend = if n <= 16 { Backend::Exact } else { Backend::Dmrg };
    let config = ScanConfig::new(
        ModelParams::with_defaults(n, 2.0),
        backend,
        Observable::FidelitySusceptibility,
    );
    let result = scan_delta_f(&config)?;
    for s in result.samples.iter().filter(|s| !s.refined) {
        println!("{:.3}  {:.6e}", s.delta_f, s.susceptibility.unwrap_or(f64::NAN));
    }
    if let Some(p) = result.susceptibility_peak {
        println!("peak at delta_f = {:.4} (S = {:.6e})", p.location, p.value);
    }
    Ok(())
}
