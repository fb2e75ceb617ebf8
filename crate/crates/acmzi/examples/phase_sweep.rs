use std::f64::consts::PI;

use acmzi::{
    fisher_report, hd_sensitivity, id_sensitivity, optimal_phase, sql, DetectionScheme,
    InterferometerConfig, LossConfig,
};

// Phase response of the reference device: both readouts swept across the
// fringe, against the quantum and classical benchmarks.
fn main() -> acmzi::Result<()> {
    let cfg = InterferometerConfig::standard();
    let loss = LossConfig::lossless();
    let bounds = fisher_report(&cfg)?;
    let classical = sql(&cfg)?;

    println!("device: N_c = {}, G1^2 = {}, G2^2 = {}", cfg.n_c(), 5.0, 5.0);
    println!("qcrb = {:.7}, sql = {:.7}\n", bounds.qcrb, classical);
    println!("{:>8} {:>14} {:>14}", "phi", "homodyne", "intensity");
    for k in 0..15 {
        let phi = 2.8 + 0.05 * k as f64;
        let hd = hd_sensitivity(&cfg, &loss, phi)
            .map(|r| format!("{:.7}", r.delta_phi))
            .unwrap_or_else(|_| "blind".into());
        let id = id_sensitivity(&cfg, &loss, phi)
            .map(|r| format!("{:.7}", r.delta_phi))
            .unwrap_or_else(|_| "blind".into());
        println!("{phi:>8.3} {hd:>14} {id:>14}");
    }

    let (phi_hd, best_hd) = optimal_phase(&cfg, &loss, DetectionScheme::Homodyne)?;
    let (phi_id, best_id) = optimal_phase(&cfg, &loss, DetectionScheme::Intensity)?;
    println!("\nbest homodyne   {:.7} at phi = {:.6} (pi = {:.6})", best_hd.delta_phi, phi_hd, PI);
    println!("best intensity  {:.7} at phi = {:.6}", best_id.delta_phi, phi_id);
    println!(
        "intensity sits {:.2}x above the quantum bound, homodyne {:.2}x",
        best_id.delta_phi / bounds.qcrb,
        best_hd.delta_phi / bounds.qcrb
    );
    Ok(())
}
