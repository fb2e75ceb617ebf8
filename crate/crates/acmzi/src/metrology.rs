use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{coefficients_lossy, InterferometerConfig, LossConfig};

/// Pump phases the closed-form detection formulas are derived for.
const THETA_TOL: f64 = 1e-9;
/// Phase factors smaller than this give no usable signal slope.
const PHASE_FACTOR_TOL: f64 = 1e-10;
/// Absolute slope floor below which the working point is treated as blind.
const SLOPE_TOL: f64 = 1e-12;

/// Readout strategy at the output ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionScheme {
    /// Homodyne readout of the Y quadrature on the amplified MZI output.
    Homodyne,
    /// Photon-number sum over both amplifier outputs.
    Intensity,
}

impl std::fmt::Display for DetectionScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DetectionScheme::Homodyne => write!(f, "hd"),
            DetectionScheme::Intensity => write!(f, "id"),
        }
    }
}

/// Choice of photon budget that defines the standard quantum limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SqlPolicy {
    /// Photons entering the two MZI arms, before any internal loss.
    #[default]
    MziInput,
    /// Photons surviving the internal couplers of the two arms.
    AfterInternalLoss,
}

/// Phase estimate quality at one working point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityReport {
    pub scheme: DetectionScheme,
    pub phi: f64,
    /// One-shot phase uncertainty sqrt(variance) / |slope|.
    pub delta_phi: f64,
    /// Signed derivative of the mean signal with respect to the phase.
    pub slope: f64,
    /// Variance of the measured observable.
    pub variance: f64,
    pub sql_value: f64,
    pub qcrb_value: f64,
    pub beats_sql: bool,
}

/// Quantum Fisher information of the phase-probing state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherReport {
    /// Fisher information of the pure probe with an external phase reference.
    pub f_pure: f64,
    /// Fisher information after averaging out the reference phase.
    pub f_averaged: f64,
    /// Cramer-Rao phase bound 1 / sqrt(f_averaged).
    pub qcrb: f64,
}

fn check_pump_phases(cfg: &InterferometerConfig) -> Result<()> {
    if cfg.theta1().abs() > THETA_TOL || (cfg.theta2() - PI).abs() > THETA_TOL {
        return Err(Error::UnsupportedPhaseConfig);
    }
    Ok(())
}

/// Derivative of the mean Y quadrature of the amplified MZI output with
/// respect to the phase: 2 sqrt(n_c T R eta_b eta_c) G2 cos(phi).
pub fn hd_slope(cfg: &InterferometerConfig, loss: &LossConfig, phi: f64) -> Result<f64> {
    check_pump_phases(cfg)?;
    Ok(2.0
        * cfg.alpha()
        * (cfg.bs_t() * cfg.bs_r()).sqrt()
        * cfg.g2_gain()
        * (loss.eta_b() * loss.eta_c()).sqrt()
        * phi.cos())
}

/// Variance of the same quadrature. Independent of the local-oscillator
/// angle because the readout mode carries no anomalous fluctuations.
pub fn hd_variance(cfg: &InterferometerConfig, loss: &LossConfig, phi: f64) -> Result<f64> {
    check_pump_phases(cfg)?;
    let (g1, s1) = (cfg.g1_gain(), cfg.g1_small());
    let (g2, s2) = (cfg.g2_gain(), cfg.g2_small());
    let (t, r) = (cfg.bs_t(), cfg.bs_r());
    let (ea, eb, ec, ed) = (loss.eta_a(), loss.eta_b(), loss.eta_c(), loss.eta_d());
    // Grouped form of the noise polynomial; the two squares keep the large
    // gain terms from cancelling catastrophically.
    let a = g1 * ea.sqrt() * s2 - t * g2 * s1 * (eb * ed).sqrt();
    let b = r * g2 * s1 * (eb * ec).sqrt();
    let (sin, cos) = phi.sin_cos();
    Ok(2.0 * (a + b * cos).powi(2) + 2.0 * (b * sin).powi(2) + 2.0 * s2 * s2 * (1.0 - ea) + 1.0)
}

/// Homodyne phase sensitivity at a fixed working point.
pub fn hd_sensitivity(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
    phi: f64,
) -> Result<SensitivityReport> {
    let slope = hd_slope(cfg, loss, phi)?;
    if phi.cos().abs() < PHASE_FACTOR_TOL || slope.abs() < SLOPE_TOL {
        return Err(Error::ZeroSlope { phi });
    }
    let variance = hd_variance(cfg, loss, phi)?;
    finish_report(cfg, DetectionScheme::Homodyne, phi, slope, variance)
}

/// Homodyne sensitivity of the lossless device through the reduced
/// closed form (A + B cos phi) / (D cos^2 phi); agrees with
/// `hd_sensitivity` at unit transmission and serves as a cross-check.
pub fn hd_sensitivity_lossless(cfg: &InterferometerConfig, phi: f64) -> Result<SensitivityReport> {
    check_pump_phases(cfg)?;
    let (g1, s1) = (cfg.g1_gain(), cfg.g1_small());
    let (g2, s2) = (cfg.g2_gain(), cfg.g2_small());
    let (t, r) = (cfg.bs_t(), cfg.bs_r());
    let a = g2 * g2 * s1 * s1 * t * t + r * r * g2 * g2 * s1 * s1 + g1 * g1 * s2 * s2
        - 2.0 * g1 * g2 * s1 * s2 * t
        + 0.5;
    let b = 2.0 * g2 * s1 * r * (g1 * s2 - g2 * s1 * t);
    let slope = 2.0 * (cfg.n_c() * t * r).sqrt() * g2 * phi.cos();
    if phi.cos().abs() < PHASE_FACTOR_TOL || slope.abs() < SLOPE_TOL {
        return Err(Error::ZeroSlope { phi });
    }
    let variance = 2.0 * (a + b * phi.cos());
    finish_report(cfg, DetectionScheme::Homodyne, phi, slope, variance)
}

/// Recombination gain minimizing the homodyne uncertainty at phi = pi for a
/// fixed front end and loss budget. Returns the optimal large gain G2 and
/// the report at the optimum. The minimizer of the noise-to-slope ratio in
/// the hyperbolic parameter r = g2 / G2 is
///   r* = G1 g1 sqrt(eta_a) Q / (eta_a G1^2 + 1 - eta_a - 1/2),
/// with Q = sqrt(eta_b) (T sqrt(eta_d) + R sqrt(eta_c)); r* >= 1 means the
/// uncertainty keeps improving toward infinite gain and no finite optimum
/// exists.
pub fn hd_optimal_gain(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
) -> Result<(f64, SensitivityReport)> {
    check_pump_phases(cfg)?;
    let g1 = cfg.g1_gain();
    let s1 = cfg.g1_small();
    let ea = loss.eta_a();
    let p = ea * g1 * g1 + 1.0 - ea;
    let q = loss.eta_b().sqrt()
        * (cfg.bs_t() * loss.eta_d().sqrt() + cfg.bs_r() * loss.eta_c().sqrt());
    let r_opt = g1 * s1 * ea.sqrt() * q / (p - 0.5);
    if r_opt >= 1.0 {
        return Err(Error::NoValidGain { ratio: r_opt });
    }
    let g2 = 1.0 / (1.0 - r_opt * r_opt).sqrt();
    let tuned = cfg.with_g2_gain(g2)?;
    let report = hd_sensitivity(&tuned, loss, PI)?;
    Ok((g2, report))
}

/// Phase derivative of the mean photon sum over both amplifier outputs,
/// written with an overall sign such that the value is positive on (0, pi)
/// for typical gain settings. The measured signal actually decreases there,
/// so the signed slope used in reports is the negative of this quantity.
pub fn id_slope(cfg: &InterferometerConfig, loss: &LossConfig, phi: f64) -> Result<f64> {
    check_pump_phases(cfg)?;
    Ok(id_slope_prefactor(cfg, loss) * phi.sin())
}

fn id_slope_prefactor(cfg: &InterferometerConfig, loss: &LossConfig) -> f64 {
    let (g1, s1) = (cfg.g1_gain(), cfg.g1_small());
    let (g2, s2) = (cfg.g2_gain(), cfg.g2_small());
    let (t, r) = (cfg.bs_t(), cfg.bs_r());
    let sum2 = g2 * g2 + s2 * s2;
    2.0 * t
        * r
        * loss.eta_b()
        * (loss.eta_d() * loss.eta_c()).sqrt()
        * sum2
        * (cfg.n_c() - s1 * s1)
        + 4.0 * r * g2 * g1 * s2 * s1 * (loss.eta_a() * loss.eta_b() * loss.eta_c()).sqrt()
}

/// Variance of the photon sum over both amplifier outputs, evaluated from
/// the readout coefficients by Gaussian factorization of the quartic
/// moments.
pub fn id_variance(cfg: &InterferometerConfig, loss: &LossConfig, phi: f64) -> Result<f64> {
    check_pump_phases(cfg)?;
    let cs = coefficients_lossy(cfg, loss, phi);
    let (tc, mc) = (cs.t(), cs.m());
    // Creation-type couplings feed vacuum noise into each port.
    let n_a: f64 = [1, 2, 4, 5, 6].iter().map(|&k| tc[k].norm_sqr()).sum();
    let n_b = mc[0].norm_sqr() + mc[3].norm_sqr();
    // Cross coupling of the two ports through the annihilation-type inputs.
    let p = tc[0] * mc[0].conj() + tc[3] * mc[3].conj();
    let coherent = tc[2].norm_sqr() * (1.0 + 2.0 * n_a)
        + mc[2].norm_sqr() * (1.0 + 2.0 * n_b)
        + 4.0 * (tc[2].conj() * mc[2] * p).re;
    Ok(cfg.n_c() * coherent + n_a * (1.0 + n_a) + n_b * (1.0 + n_b) + 2.0 * p.norm_sqr())
}

/// Intensity-readout phase sensitivity at a fixed working point.
pub fn id_sensitivity(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
    phi: f64,
) -> Result<SensitivityReport> {
    let slope = -id_slope(cfg, loss, phi)?;
    if phi.sin().abs() < PHASE_FACTOR_TOL || slope.abs() < SLOPE_TOL {
        return Err(Error::ZeroSlope { phi });
    }
    let variance = id_variance(cfg, loss, phi)?;
    finish_report(cfg, DetectionScheme::Intensity, phi, slope, variance)
}

/// Intensity sensitivity of the lossless device through the fully reduced
/// radical form; agrees with `id_sensitivity` at unit transmission.
pub fn id_sensitivity_lossless(cfg: &InterferometerConfig, phi: f64) -> Result<SensitivityReport> {
    check_pump_phases(cfg)?;
    let (g1, s1) = (cfg.g1_gain(), cfg.g1_small());
    let (g2, s2) = (cfg.g2_gain(), cfg.g2_small());
    let (t, r) = (cfg.bs_t(), cfg.bs_r());
    let n_c = cfg.n_c();
    let sum1 = g1 * g1 + s1 * s1;
    let sum2 = g2 * g2 + s2 * s2;
    let (sin, cos) = phi.sin_cos();

    let root_i = 2.0 * t * r * sum2 * (n_c - s1 * s1) + 4.0 * g1 * g2 * s1 * s2 * r;
    let i_val = root_i * root_i;
    let j_val = g1 * s1 * sum2 * (2.0 * t * r - 2.0 + 2.0 * t * r * cos)
        + 2.0 * g2 * s2 * sum1 * (t - r * cos);
    let k_val = (2.0 * g2 * g1 * s2 - s1 * sum2).powi(2) * t * r * (n_c + 1.0)
        + (sum2 * g1 - 2.0 * g2 * s2 * s1).powi(2) * t * r * n_c
        + 4.0 * g2 * g2 * s2 * s2 * r * r;
    let l_val = (2.0 * g2 * g1 * s2 - s1 * sum2 * (t - r)).powi(2) * t * r * (n_c + 1.0)
        + (sum2 * g1 * (t - r) - 2.0 * g2 * s1 * s2).powi(2) * t * r * n_c
        + 4.0 * t * t * r * r * sum2 * sum2 * n_c;

    let slope = -root_i * sin;
    if sin.abs() < PHASE_FACTOR_TOL || slope.abs() < SLOPE_TOL {
        return Err(Error::ZeroSlope { phi });
    }
    let delta_sq = k_val / i_val + (j_val * j_val + l_val * (cos + 1.0).powi(2)) / (i_val * sin * sin);
    let variance = delta_sq * slope * slope;
    finish_report(cfg, DetectionScheme::Intensity, phi, slope, variance)
}

fn finish_report(
    cfg: &InterferometerConfig,
    scheme: DetectionScheme,
    phi: f64,
    slope: f64,
    variance: f64,
) -> Result<SensitivityReport> {
    let delta_phi = variance.sqrt() / slope.abs();
    let sql_value = sql(cfg)?;
    let qcrb_value = fisher_report(cfg)?.qcrb;
    Ok(SensitivityReport {
        scheme,
        phi,
        delta_phi,
        slope,
        variance,
        sql_value,
        qcrb_value,
        beats_sql: delta_phi < sql_value,
    })
}

/// Fisher information of the pure two-arm probe referenced to an external
/// phase standard: 4 Var(n) of the phase arm.
pub fn qfi_pure(cfg: &InterferometerConfig) -> f64 {
    let (g1, s1) = (cfg.g1_gain(), cfg.g1_small());
    let (t, r) = (cfg.bs_t(), cfg.bs_r());
    let sum1 = g1 * g1 + s1 * s1;
    cfg.n_c() * (4.0 * t * t + 4.0 * t * r * sum1)
        + s1 * s1 * (4.0 * r * r * g1 * g1 + 4.0 * t * r)
}

/// Fisher information once the free propagation phase is averaged out; the
/// coherent seed no longer contributes its own Poisson term.
pub fn qfi_phase_averaged(cfg: &InterferometerConfig) -> f64 {
    let (g1, s1) = (cfg.g1_gain(), cfg.g1_small());
    let (t, r) = (cfg.bs_t(), cfg.bs_r());
    let sum1 = g1 * g1 + s1 * s1;
    4.0 * cfg.n_c() * t * r * sum1 + s1 * s1 * (4.0 * r * r * g1 * g1 + 4.0 * t * r)
}

/// Cramer-Rao bound 1 / sqrt(F) for a Fisher information F.
pub fn qcrb(fisher: f64) -> Result<f64> {
    if !fisher.is_finite() || fisher <= 0.0 {
        return Err(Error::NonpositiveFisher(fisher));
    }
    Ok(1.0 / fisher.sqrt())
}

/// Both Fisher informations of the probe plus the phase-averaged bound.
pub fn fisher_report(cfg: &InterferometerConfig) -> Result<FisherReport> {
    let f_pure = qfi_pure(cfg);
    let f_averaged = qfi_phase_averaged(cfg);
    Ok(FisherReport {
        f_pure,
        f_averaged,
        qcrb: qcrb(f_averaged)?,
    })
}

/// Standard quantum limit 1 / sqrt(N) with the default photon budget (all
/// photons entering the MZI arms).
pub fn sql(cfg: &InterferometerConfig) -> Result<f64> {
    sql_with_policy(cfg, &LossConfig::lossless(), SqlPolicy::MziInput)
}

/// Standard quantum limit with an explicit photon-budget policy.
pub fn sql_with_policy(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
    policy: SqlPolicy,
) -> Result<f64> {
    let s1 = cfg.g1_small();
    let n = match policy {
        SqlPolicy::MziInput => cfg.n_c() + s1 * s1,
        SqlPolicy::AfterInternalLoss => {
            // Arm occupations right after the input splitter.
            let n_phase_arm = cfg.bs_r() * s1 * s1 + cfg.bs_t() * cfg.n_c();
            let n_other_arm = cfg.bs_t() * s1 * s1 + cfg.bs_r() * cfg.n_c();
            loss.eta_c() * n_phase_arm + loss.eta_d() * n_other_arm
        }
    };
    if n <= 0.0 {
        return Err(Error::ZeroPhotons);
    }
    Ok(1.0 / n.sqrt())
}
