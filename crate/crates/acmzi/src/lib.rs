pub mod cli;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod metrology;
pub mod model;
pub mod optimize;

pub use cli::{
    cmd_gain_sweep, cmd_loss_map, cmd_sensitivity, cmd_verify, run_main, Dataset, LossMapBundle,
    OutputFormat, RunConfig,
};
pub use error::{Error, Result};
pub use fock::{
    apply_beam_splitter, apply_phase, apply_two_mode_squeezer, coherent_on_signal,
    evolve_lossless, prepare_probe, qfi_of_state, qfi_phase_averaged_oracle, DenseState,
};
pub use gaussian::{
    build_interferometer_network, coefficient_set_from, compose, observable_stats,
    probe_network, propagate_moments, signal_input, BogoliubovTransform, InputSpec, MomentSet,
    ObservableSpec,
};
pub use metrology::{
    fisher_report, hd_optimal_gain, hd_sensitivity, hd_sensitivity_lossless, hd_slope,
    hd_variance, id_sensitivity, id_sensitivity_lossless, id_slope, id_variance, qcrb,
    qfi_phase_averaged, qfi_pure, sql, sql_with_policy, DetectionScheme, FisherReport,
    SensitivityReport, SqlPolicy,
};
pub use model::{
    coefficients_lossless, coefficients_lossy, CoefficientSet, InterferometerConfig, LossConfig,
};
pub use optimize::{
    extract_boundary, gain_sweep, loss_map, optimal_phase, optimize_gain, point_sensitivity,
    sql_beating_cells, BoundaryCurve, GainSweepRow, Plane, SweepGrid, DEFAULT_G2_SQ_MAX,
};
