//! Rough timings for the design and solve paths (not a test).

use std::time::Instant;

use specshare::dual::{solve_quantized, DesignMethod, SolverOptions};
use specshare::fading::{sample_training_set, BandModels};
use specshare::full_csi::ConstraintSet;
use specshare::lloyd::{run_gla, CodebookInit};

fn main() {
    let models = vec![BandModels::default()];
    let ts = sample_training_set(&models, 20_000, 13).unwrap();
    let band = ts.band(0);

    let t = Instant::now();
    let out = run_gla(band, 8, 0.01, 0.9, &CodebookInit::Quantile, 1e-6, 500).unwrap();
    println!(
        "cold gla L=8: {:?} iters={} converged={}",
        t.elapsed(),
        out.report.iterations,
        out.report.converged
    );

    let t = Instant::now();
    let warm = run_gla(
        band,
        8,
        0.01,
        1.1,
        &CodebookInit::Levels(out.codebook.levels.clone()),
        1e-6,
        500,
    )
    .unwrap();
    println!(
        "warm gla (mu x1.2): {:?} iters={}",
        t.elapsed(),
        warm.report.iterations
    );

    let c = ConstraintSet::narrowband(2.0, Some(1.0));
    for restarts in [1usize, 3] {
        let mut opts = SolverOptions::new(8);
        opts.restarts = restarts;
        let t = Instant::now();
        let sol = solve_quantized(&ts, &models, &c, &opts).unwrap();
        println!(
            "solve gla L=8 restarts={}: {:?} designs={} lambda={} mu={:?} cap={:.6}",
            restarts,
            t.elapsed(),
            sol.report.designs_run,
            sol.duals.lambda,
            sol.duals.mu,
            sol.capacity
        );
    }

    let opts = SolverOptions::new(8).with_method(DesignMethod::Aqpa);
    let t = Instant::now();
    let sol = solve_quantized(&ts, &models, &c, &opts).unwrap();
    println!(
        "solve aqpa L=8: {:?} designs={} cap={:.6}",
        t.elapsed(),
        sol.report.designs_run,
        sol.capacity
    );
}
