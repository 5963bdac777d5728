//! Runs the desk instance with and without component-wise perturbations
//! and prints both proximity-target traces.
//!
//! Usage: `desk [sigma]` (default 0.01; 0 disables noise).

use std::time::Instant;

use dfs_core::desk::{self, DeskInstance};
use dfs_core::{art_run, better_targeted, superiorize_cw, NoiseModel, Target};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sigma: f64 = std::env::args().nth(1).map_or(Ok(desk::NOISE.sigma), |s| s.parse())?;
    let noise = (sigma > 0.0).then_some(NoiseModel { sigma, ..desk::NOISE });
    let inst = DeskInstance::new(noise)?;
    let system = &inst.system;
    println!(
        "rows={} dropped={} nnz={} Pr(x_hat)={:.6} phi(x_hat)={:.4}",
        system.num_rows(),
        system.dropped_rows(),
        system.nnz(),
        system.proximity(inst.x_hat.values())?,
        inst.target.evaluate(inst.x_hat.values())
    );

    let feasibility = inst.feasibility()?;
    let start = inst.zero_start();
    let t0 = Instant::now();
    let plain = art_run(system, &feasibility, &inst.target, &start, desk::SWEEPS)?;
    let t1 = Instant::now();
    let config = inst.superiorization(desk::SWEEPS)?;
    let sup = superiorize_cw(system, &config, &feasibility, &inst.target, &start)?;
    let t2 = Instant::now();

    println!(" k   prox(sup)   phi(sup) accepted |   prox(art)   phi(art)");
    for (r, s) in sup.records().iter().zip(plain.records()) {
        println!(
            "{:2} {:11.4} {:10.3} {:8} | {:11.4} {:10.3}",
            r.k, r.proximity, r.target, r.probes_accepted, s.proximity, s.target
        );
    }
    println!("art {:?}, cw {:?}, {}", t1 - t0, t2 - t1, sup.work.unwrap_or_default());
    match better_targeted(&sup, (1, desk::SWEEPS), &plain, (1, desk::SWEEPS), 1000) {
        Ok(cmp) => println!("{cmp}"),
        Err(e) => println!("comparison failed: {e}"),
    }
    Ok(())
}
