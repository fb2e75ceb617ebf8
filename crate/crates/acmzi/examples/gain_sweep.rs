use acmzi::{
    fisher_report, gain_sweep, hd_optimal_gain, InterferometerConfig, LossConfig,
};

// Unbalancing the recombination amplifier: homodyne rides the gain ratio
// down to the quantum bound while the intensity readout barely moves.
fn main() -> acmzi::Result<()> {
    let cfg = InterferometerConfig::standard();
    let loss = LossConfig::lossless();
    let bound = fisher_report(&cfg)?.qcrb;

    println!("{:>6} {:>14} {:>14} {:>12}", "G2/G1", "homodyne", "intensity", "phi_opt_id");
    for row in gain_sweep(&cfg, &loss, 1.0, 6.0, 0.5)? {
        let hd = row
            .hd_delta_phi
            .map(|v| format!("{v:.7}"))
            .unwrap_or_else(|| "blind".into());
        let id = row
            .id_delta_phi
            .map(|v| format!("{v:.7}"))
            .unwrap_or_else(|| "blind".into());
        let phi = row
            .id_phi_opt
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "-".into());
        println!("{:>6.2} {hd:>14} {id:>14} {phi:>12}", row.ratio);
    }

    let (g2, best) = hd_optimal_gain(&cfg, &loss)?;
    println!("\nclosed-form optimum: G2 = {g2:.4} (ratio {:.4})", g2 / cfg.g1_gain());
    println!("delta_phi there = {:.8} vs qcrb {:.8}", best.delta_phi, bound);
    Ok(())
}
