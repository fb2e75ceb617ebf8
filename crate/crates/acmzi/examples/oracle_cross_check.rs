use std::f64::consts::PI;

use acmzi::{
    build_interferometer_network, coefficient_set_from, coefficients_lossy, evolve_lossless,
    hd_variance, id_variance, observable_stats, prepare_probe, propagate_moments, qfi_of_state,
    qfi_phase_averaged, qfi_pure, signal_input, InterferometerConfig, LossConfig, ObservableSpec,
};

// The three independent engines answering the same questions: closed forms,
// the Gaussian moment network, and dense number-basis evolution.
fn main() -> acmzi::Result<()> {
    let cfg = InterferometerConfig::from_gains_squared(1.0, 1.25, 1.44, 0.0, PI, 0.5, 0.5)?;
    let loss = LossConfig::new(0.9, 0.8, 0.85, 0.95)?;
    let phi = 0.9;

    // Closed-form transfer coefficients against the composed network.
    let closed = coefficients_lossy(&cfg, &loss, phi);
    let net = build_interferometer_network(&cfg, &loss, phi)?;
    let from_net = coefficient_set_from(&net, phi)?;
    let mut gap: f64 = 0.0;
    for k in 0..7 {
        gap = gap.max((closed.t()[k] - from_net.t()[k]).norm());
        gap = gap.max((closed.m()[k] - from_net.m()[k]).norm());
    }
    println!("coefficients, closed form vs network:   {gap:.3e}");
    let comm = (closed.commutator_sum_a() - 1.0)
        .abs()
        .max((closed.commutator_sum_b() - 1.0).abs());
    println!("commutator sum residual:                {comm:.3e}");

    // Moment engine against the closed-form variances.
    let input = signal_input(&cfg, net.n_modes())?;
    let moments = propagate_moments(&net, &input)?;
    let (_, y_var) = observable_stats(&moments, &ObservableSpec::QuadratureY { mode: 1 })?;
    let (_, n_var) = observable_stats(&moments, &ObservableSpec::PhotonSum { modes: vec![0, 1] })?;
    println!(
        "quadrature variance, closed vs moments: {:.3e}",
        (y_var - hd_variance(&cfg, &loss, phi)?).abs()
    );
    println!(
        "photon variance, closed vs moments:     {:.3e}",
        (n_var - id_variance(&cfg, &loss, phi)?).abs()
    );

    // Dense number-basis evolution against both, without loss.
    let unit = LossConfig::lossless();
    let state = evolve_lossless(&cfg, phi, 30)?;
    let (mean_y, fock_y) = state.quadrature_y_stats(1)?;
    println!(
        "quadrature variance, closed vs dense:   {:.3e}  (mean {mean_y:.6})",
        (fock_y - hd_variance(&cfg, &unit, phi)?).abs()
    );
    let (_, fock_n) = state.photon_sum_stats(&[0, 1])?;
    println!(
        "photon variance, closed vs dense:       {:.3e}",
        (fock_n - id_variance(&cfg, &unit, phi)?).abs()
    );

    // Fisher information three ways at the same small device.
    let probe = prepare_probe(&cfg, 16)?;
    println!(
        "fisher (pure), closed vs dense:         {:.3e}",
        (qfi_pure(&cfg) - qfi_of_state(&probe)?).abs()
    );
    println!(
        "fisher (averaged), closed value:        {:.6}",
        qfi_phase_averaged(&cfg)
    );
    Ok(())
}
