use std::f64::consts::PI;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrology::{
    hd_optimal_gain, hd_sensitivity, id_sensitivity, DetectionScheme, SensitivityReport,
};
use crate::model::{InterferometerConfig, LossConfig};

/// Grid points of the coarse phase scan feeding the refinement step.
const PHASE_GRID: usize = 721;
/// Absolute phase tolerance of the refined working point, in radians.
const PHASE_TOL: f64 = 1e-8;
/// Gain tolerance of the outer search over G2.
const GAIN_TOL: f64 = 1e-4;
/// Default ceiling on G2^2 for gain searches.
pub const DEFAULT_G2_SQ_MAX: f64 = 500.0;

/// Golden-section minimizer over [a, b]. The objective may return infinity
/// for unusable points; only comparisons are performed on the values.
/// Returns the best probed point and its value.
fn golden_section(f: &mut dyn FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv * (b - a);
    let mut x2 = a + inv * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Treats recoverable evaluation failures (blind working point, no usable
/// gain, everything divergent) as "no value here"; anything else is a real
/// error that must surface.
fn soften(err: Error) -> Result<Option<SensitivityReport>> {
    match err {
        Error::ZeroSlope { .. } | Error::NoValidGain { .. } | Error::AllDivergent => Ok(None),
        other => Err(other),
    }
}

fn scheme_report(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
    scheme: DetectionScheme,
    phi: f64,
) -> Result<SensitivityReport> {
    match scheme {
        DetectionScheme::Homodyne => hd_sensitivity(cfg, loss, phi),
        DetectionScheme::Intensity => id_sensitivity(cfg, loss, phi),
    }
}

/// Best working phase on (0, 2 pi) for the given readout. The uncertainty is
/// symmetric about phi = pi for the supported pump phases, so the returned
/// point is folded into (0, pi]. A coarse scan locates the basin and a
/// golden-section pass refines it to 1e-8 rad.
pub fn optimal_phase(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
    scheme: DetectionScheme,
) -> Result<(f64, SensitivityReport)> {
    // Surface unsupported pump phases as a hard error before scanning.
    match scheme_report(cfg, loss, scheme, 1.0) {
        Err(Error::UnsupportedPhaseConfig) => return Err(Error::UnsupportedPhaseConfig),
        _ => {}
    }
    let objective = |phi: f64| -> f64 {
        match scheme_report(cfg, loss, scheme, phi) {
            Ok(rep) => rep.delta_phi,
            Err(_) => f64::INFINITY,
        }
    };
    let step = 2.0 * PI / PHASE_GRID as f64;
    let mut best_k = 0;
    let mut best = f64::INFINITY;
    for k in 1..PHASE_GRID {
        let v = objective(step * k as f64);
        if v < best {
            best = v;
            best_k = k;
        }
    }
    if !best.is_finite() {
        return Err(Error::AllDivergent);
    }
    let mut center = step * best_k as f64;
    if center > PI {
        center = 2.0 * PI - center;
    }
    let lo = (center - step).max(step * 1e-3);
    let hi = (center + step).min(2.0 * PI - step * 1e-3);
    let (mut phi_opt, refined) = golden_section(&mut |p| objective(p), lo, hi, PHASE_TOL);
    if !refined.is_finite() {
        return Err(Error::AllDivergent);
    }
    if phi_opt > PI {
        let folded = 2.0 * PI - phi_opt;
        if scheme_report(cfg, loss, scheme, folded).is_ok() {
            phi_opt = folded;
        }
    }
    let report = scheme_report(cfg, loss, scheme, phi_opt)?;
    Ok((phi_opt, report))
}

/// Cheap inner phase optimization used while searching over the gain: a
/// 181-point scan away from the blind edges plus one refinement pass.
fn id_phi_opt_cheap(cfg: &InterferometerConfig, loss: &LossConfig) -> Option<f64> {
    let n: usize = 181;
    let lo_edge = 0.05;
    let hi_edge = 2.0 * PI - 0.05;
    let step = (hi_edge - lo_edge) / (n - 1) as f64;
    let eval = |phi: f64| -> f64 {
        match id_sensitivity(cfg, loss, phi) {
            Ok(rep) => rep.delta_phi,
            Err(_) => f64::INFINITY,
        }
    };
    let mut best_k = 0;
    let mut best = f64::INFINITY;
    for k in 0..n {
        let v = eval(lo_edge + step * k as f64);
        if v < best {
            best = v;
            best_k = k;
        }
    }
    if !best.is_finite() {
        return None;
    }
    let lo = lo_edge + step * best_k.saturating_sub(1) as f64;
    let hi = lo_edge + step * (best_k + 1).min(n - 1) as f64;
    let (_, refined) = golden_section(&mut |p| eval(p), lo, hi, PHASE_TOL);
    refined.is_finite().then_some(refined)
}

/// Best recombination gain G2 within (1, sqrt(g2_sq_max)] for the given
/// readout, together with the report at its best working phase.
///
/// Homodyne: the closed-form optimum at phi = pi is used when it exists and
/// respects the ceiling; otherwise the uncertainty is still improving at the
/// boundary and the ceiling gain is returned. Intensity: nested search, an
/// outer golden-section pass over G2 around an inner phase optimization;
/// the balanced gain G2 = G1 is always kept as a candidate so optimizing
/// never loses to the balanced device.
pub fn optimize_gain(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
    scheme: DetectionScheme,
    g2_sq_max: f64,
) -> Result<(f64, SensitivityReport)> {
    if !g2_sq_max.is_finite() || g2_sq_max <= 1.0 {
        return Err(Error::InvalidGain(g2_sq_max));
    }
    let ceiling = g2_sq_max.sqrt();
    match scheme {
        DetectionScheme::Homodyne => {
            match hd_optimal_gain(cfg, loss) {
                Ok((g2, report)) if g2 <= ceiling => Ok((g2, report)),
                Ok(_) | Err(Error::NoValidGain { .. }) => {
                    // Monotone improvement all the way to the ceiling.
                    let tuned = cfg.with_g2_gain(ceiling)?;
                    let report = hd_sensitivity(&tuned, loss, PI)?;
                    Ok((ceiling, report))
                }
                Err(other) => Err(other),
            }
        }
        DetectionScheme::Intensity => {
            let eval = |g2: f64| -> f64 {
                match cfg.with_g2_gain(g2) {
                    Ok(tuned) => id_phi_opt_cheap(&tuned, loss).unwrap_or(f64::INFINITY),
                    Err(_) => f64::INFINITY,
                }
            };
            let (mut g2_best, mut val_best) =
                golden_section(&mut |g| eval(g), 1.0 + GAIN_TOL, ceiling, GAIN_TOL);
            let balanced = cfg.g1_gain();
            if balanced <= ceiling {
                let val = eval(balanced);
                if val < val_best {
                    g2_best = balanced;
                    val_best = val;
                }
            }
            if !val_best.is_finite() {
                return Err(Error::AllDivergent);
            }
            let tuned = cfg.with_g2_gain(g2_best)?;
            let (_, report) = optimal_phase(&tuned, loss, DetectionScheme::Intensity)?;
            Ok((g2_best, report))
        }
    }
}

/// One gain setting of a sweep over the recombination gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSweepRow {
    /// Gain ratio G2 / G1.
    pub ratio: f64,
    pub g2_gain: f64,
    /// Homodyne uncertainty at phi = pi; None where the readout is blind.
    pub hd_delta_phi: Option<f64>,
    /// Intensity-readout working phase; None where every phase is blind.
    pub id_phi_opt: Option<f64>,
    pub id_delta_phi: Option<f64>,
}

/// Sweeps the gain ratio G2 / G1 over [ratio_min, ratio_max] in steps of
/// ratio_step, reporting the homodyne uncertainty at phi = pi and the
/// phase-optimized intensity uncertainty for each setting.
pub fn gain_sweep(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
    ratio_min: f64,
    ratio_max: f64,
    ratio_step: f64,
) -> Result<Vec<GainSweepRow>> {
    if !(ratio_min.is_finite() && ratio_max.is_finite() && ratio_step.is_finite())
        || ratio_min < 1.0
        || ratio_max < ratio_min
        || ratio_step <= 0.0
    {
        return Err(Error::InvalidConfig(format!(
            "gain ratio sweep [{ratio_min}, {ratio_max}] step {ratio_step} must satisfy \
             1 <= min <= max and step > 0"
        )));
    }
    let count = ((ratio_max - ratio_min) / ratio_step + 1.0 + 1e-9).floor() as usize;
    let ratios: Vec<f64> = (0..count).map(|k| ratio_min + ratio_step * k as f64).collect();
    ratios
        .par_iter()
        .map(|&ratio| {
            let g2 = ratio * cfg.g1_gain();
            let tuned = cfg.with_g2_gain(g2)?;
            let hd = match hd_sensitivity(&tuned, loss, PI) {
                Ok(rep) => Some(rep.delta_phi),
                Err(e) => soften(e)?.map(|r| r.delta_phi),
            };
            let (id_phi, id_dphi) = match optimal_phase(&tuned, loss, DetectionScheme::Intensity) {
                Ok((phi, rep)) => (Some(phi), Some(rep.delta_phi)),
                Err(e) => {
                    soften(e)?;
                    (None, None)
                }
            };
            Ok(GainSweepRow {
                ratio,
                g2_gain: g2,
                hd_delta_phi: hd,
                id_phi_opt: id_phi,
                id_delta_phi: id_dphi,
            })
        })
        .collect()
}

/// Which pair of transmissions a two-dimensional loss scan varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    /// Vary (eta_a, eta_b), the lines outside the MZI; arms stay lossless.
    External,
    /// Vary (eta_c, eta_d), the MZI arms; external lines stay lossless.
    Internal,
}

impl Plane {
    pub fn axis_names(&self) -> (&'static str, &'static str) {
        match self {
            Plane::External => ("eta_a", "eta_b"),
            Plane::Internal => ("eta_c", "eta_d"),
        }
    }

    pub fn loss(&self, x: f64, y: f64) -> Result<LossConfig> {
        match self {
            Plane::External => LossConfig::external(x, y),
            Plane::Internal => LossConfig::internal(x, y),
        }
    }
}

impl FromStr for Plane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "external" => Ok(Plane::External),
            "internal" => Ok(Plane::Internal),
            other => Err(Error::InvalidConfig(format!(
                "unknown loss plane '{other}', expected 'internal' or 'external'"
            ))),
        }
    }
}

impl std::fmt::Display for Plane {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Plane::External => write!(f, "external"),
            Plane::Internal => write!(f, "internal"),
        }
    }
}

/// Rectangular scan result over a loss plane. `values[(i, j)]` belongs to
/// (xs[i], ys[j]); divergent cells carry NaN there and are flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub x_name: String,
    pub y_name: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Array2<f64>,
    pub divergent: Array2<bool>,
    /// Per-cell optimized gain ratio G2 / G1, present for optimized scans.
    pub gain_ratios: Option<Array2<f64>>,
}

impl SweepGrid {
    pub fn all_divergent(&self) -> bool {
        self.divergent.iter().all(|&d| d)
    }

    /// Finite value at (i, j), None for divergent cells.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        (!self.divergent[(i, j)]).then(|| self.values[(i, j)])
    }
}

/// Evaluates one loss-plane cell. Balanced homodyne reads at phi = pi with
/// the configured gain; optimized homodyne retunes G2 by the closed form.
/// Intensity readout optimizes the phase per cell, and optionally the gain.
fn cell_report(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
    scheme: DetectionScheme,
    optimize: bool,
    g2_sq_max: f64,
) -> Result<Option<(f64, SensitivityReport)>> {
    let outcome = match (scheme, optimize) {
        (DetectionScheme::Homodyne, false) => {
            hd_sensitivity(cfg, loss, PI).map(|rep| (cfg.g2_gain(), rep))
        }
        (DetectionScheme::Intensity, false) => {
            optimal_phase(cfg, loss, DetectionScheme::Intensity)
                .map(|(_, rep)| (cfg.g2_gain(), rep))
        }
        (_, true) => optimize_gain(cfg, loss, scheme, g2_sq_max),
    };
    match outcome {
        Ok(pair) => Ok(Some(pair)),
        Err(e) => Ok(soften(e)?.map(|rep| (cfg.g2_gain(), rep))),
    }
}

/// Sensitivity at a single loss point under the same policy the map scan
/// uses: balanced cells read out at their scheme's optimum, optimized cells
/// retune the recombination gain first. None marks a divergent point.
pub fn point_sensitivity(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
    scheme: DetectionScheme,
    optimize: bool,
    g2_sq_max: f64,
) -> Result<Option<f64>> {
    Ok(cell_report(cfg, loss, scheme, optimize, g2_sq_max)?.map(|(_, rep)| rep.delta_phi))
}

/// Scans a loss plane on a resolution x resolution grid of transmissions in
/// [0, 1]. With `optimize` set, the recombination gain is retuned per cell
/// under the G2^2 ceiling and the winning ratios are recorded.
pub fn loss_map(
    cfg: &InterferometerConfig,
    plane: Plane,
    scheme: DetectionScheme,
    resolution: usize,
    optimize: bool,
    g2_sq_max: f64,
) -> Result<SweepGrid> {
    if resolution < 16 {
        return Err(Error::InvalidConfig(format!(
            "loss map resolution {resolution} is below the minimum of 16"
        )));
    }
    let axis: Vec<f64> = (0..resolution)
        .map(|k| k as f64 / (resolution - 1) as f64)
        .collect();
    let cells: Vec<Result<Option<(f64, SensitivityReport)>>> = (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / resolution, idx % resolution);
            let loss = plane.loss(axis[i], axis[j])?;
            cell_report(cfg, &loss, scheme, optimize, g2_sq_max)
        })
        .collect();

    let mut values = Array2::from_elem((resolution, resolution), f64::NAN);
    let mut divergent = Array2::from_elem((resolution, resolution), true);
    let mut ratios = Array2::from_elem((resolution, resolution), f64::NAN);
    for (idx, cell) in cells.into_iter().enumerate() {
        let (i, j) = (idx / resolution, idx % resolution);
        if let Some((g2, rep)) = cell? {
            values[(i, j)] = rep.delta_phi;
            divergent[(i, j)] = false;
            ratios[(i, j)] = g2 / cfg.g1_gain();
        }
    }
    let (x_name, y_name) = plane.axis_names();
    Ok(SweepGrid {
        x_name: x_name.to_string(),
        y_name: y_name.to_string(),
        xs: axis.clone(),
        ys: axis,
        values,
        divergent,
        gain_ratios: optimize.then_some(ratios),
    })
}

/// Counts grid cells whose uncertainty beats the given reference level.
pub fn sql_beating_cells(grid: &SweepGrid, level: f64) -> usize {
    grid.values
        .iter()
        .zip(grid.divergent.iter())
        .filter(|(v, d)| !**d && **v < level)
        .count()
}

/// Iso-uncertainty contour on a loss plane.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub level: f64,
    /// Contour points in plane coordinates, chained nearest-neighbor.
    pub points: Vec<(f64, f64)>,
}

/// Traces the `level` contour of a scanned quantity. `eval` must be the same
/// cell evaluator the grid was built from (divergent cells as None). Every
/// sign change along a grid row or column is sharpened by bisection until
/// the residual |value - level| drops below 1e-6 * level.
pub fn extract_boundary(
    grid: &SweepGrid,
    eval: impl Fn(f64, f64) -> Option<f64> + Sync,
    level: f64,
) -> Result<BoundaryCurve> {
    if !(level.is_finite() && level > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "contour level {level} must be positive and finite"
        )));
    }
    let sided = |v: Option<f64>| v.unwrap_or(f64::INFINITY) - level;
    let tol = 1e-6 * level;
    let bisect = |mut a: f64, mut b: f64, f: &dyn Fn(f64) -> f64| -> Option<f64> {
        let mut fa = f(a);
        let fb = f(b);
        if fa == 0.0 {
            return Some(a);
        }
        if fb == 0.0 {
            return Some(b);
        }
        if (fa > 0.0) == (fb > 0.0) {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let fm = f(mid);
            if fm.abs() <= tol {
                return Some(mid);
            }
            if (fm > 0.0) == (fa > 0.0) {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
            if b - a < 1e-15 {
                break;
            }
        }
        None
    };

    let nx = grid.xs.len();
    let ny = grid.ys.len();
    let mut raw: Vec<(f64, f64)> = Vec::new();
    // Row scans: crossings along x at fixed y.
    let row_hits: Vec<(f64, f64)> = (0..ny)
        .into_par_iter()
        .flat_map_iter(|j| {
            let y = grid.ys[j];
            let mut hits = Vec::new();
            for i in 0..nx - 1 {
                let a = sided(grid.get(i, j));
                let b = sided(grid.get(i + 1, j));
                if a.is_finite() || b.is_finite() {
                    if (a > 0.0) != (b > 0.0) {
                        let f = |x: f64| sided(eval(x, y));
                        if let Some(x) = bisect(grid.xs[i], grid.xs[i + 1], &f) {
                            hits.push((x, y));
                        }
                    }
                }
            }
            hits
        })
        .collect();
    raw.extend(row_hits);
    // Column scans: crossings along y at fixed x.
    let col_hits: Vec<(f64, f64)> = (0..nx)
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = grid.xs[i];
            let mut hits = Vec::new();
            for j in 0..ny - 1 {
                let a = sided(grid.get(i, j));
                let b = sided(grid.get(i, j + 1));
                if a.is_finite() || b.is_finite() {
                    if (a > 0.0) != (b > 0.0) {
                        let f = |y: f64| sided(eval(x, y));
                        if let Some(y) = bisect(grid.ys[j], grid.ys[j + 1], &f) {
                            hits.push((x, y));
                        }
                    }
                }
            }
            hits
        })
        .collect();
    raw.extend(col_hits);

    // Chain nearest neighbors starting from the lowest-leftmost point so the
    // curve comes out in drawing order.
    let mut points = Vec::with_capacity(raw.len());
    if !raw.is_empty() {
        let start = raw
            .iter()
            .enumerate()
            .min_by(|(_, p), (_, q)| p.partial_cmp(q).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        let mut current = raw.swap_remove(start);
        points.push(current);
        while !raw.is_empty() {
            let (k, _) = raw
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let d = (p.0 - current.0).powi(2) + (p.1 - current.1).powi(2);
                    (k, d)
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            current = raw.swap_remove(k);
            points.push(current);
        }
    }
    Ok(BoundaryCurve { level, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrology::sql;

    fn fig_config() -> InterferometerConfig {
        InterferometerConfig::standard()
    }

    #[test]
    fn homodyne_phase_optimum_sits_at_pi() {
        let cfg = fig_config();
        let (phi, rep) = optimal_phase(&cfg, &LossConfig::lossless(), DetectionScheme::Homodyne)
            .unwrap();
        assert!((phi - PI).abs() < 1e-6);
        let expect = 1.0 / 5000.0_f64.sqrt();
        assert!((rep.delta_phi - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn balanced_intensity_optimum_approaches_pi() {
        let cfg = fig_config();
        let (phi, rep) = optimal_phase(&cfg, &LossConfig::lossless(), DetectionScheme::Intensity)
            .unwrap();
        assert!(phi <= PI);
        assert!((phi - PI).abs() < 1e-3);
        let expect = 2271.0_f64.sqrt() / 4522.0;
        assert!((rep.delta_phi - expect).abs() < 1e-6 * expect);
    }

    #[test]
    fn unbalanced_intensity_optimum_detunes_from_pi() {
        let cfg = fig_config().with_g2_gain(2.0 * 5.0_f64.sqrt()).unwrap();
        let (phi, _) = optimal_phase(&cfg, &LossConfig::lossless(), DetectionScheme::Intensity)
            .unwrap();
        // Frozen from the coefficient formulas at ratio 2.
        assert!((phi - 3.09567960).abs() < 1e-4);
        assert!(phi > PI / 2.0 && phi < PI);
    }

    #[test]
    fn dead_signal_line_makes_every_phase_divergent() {
        let cfg = fig_config();
        let loss = LossConfig::internal(0.0, 0.0).unwrap();
        assert!(matches!(
            optimal_phase(&cfg, &loss, DetectionScheme::Intensity),
            Err(Error::AllDivergent)
        ));
    }

    #[test]
    fn homodyne_gain_search_respects_the_ceiling() {
        let cfg = fig_config();
        // Lossless optimum G2 = 9 fits under the default ceiling.
        let (g2, rep) =
            optimize_gain(&cfg, &LossConfig::lossless(), DetectionScheme::Homodyne, 500.0)
                .unwrap();
        assert!((g2 - 9.0).abs() < 1e-9);
        let expect = 1.0 / 9000.0_f64.sqrt();
        assert!((rep.delta_phi - expect).abs() < 1e-9 * expect);
        // A tight ceiling clips the same search.
        let (g2c, repc) =
            optimize_gain(&cfg, &LossConfig::lossless(), DetectionScheme::Homodyne, 16.0)
                .unwrap();
        assert!((g2c - 4.0).abs() < 1e-12);
        assert!(repc.delta_phi > rep.delta_phi);
        // Heavy idler loss has no finite optimum; the ceiling wins.
        let heavy = LossConfig::new(0.8, 1.0, 1.0, 1.0).unwrap();
        let (g2h, _) = optimize_gain(&cfg, &heavy, DetectionScheme::Homodyne, 500.0).unwrap();
        assert!((g2h - 500.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn lossless_intensity_gain_optimum_is_balanced() {
        let cfg = fig_config();
        let (g2, _) =
            optimize_gain(&cfg, &LossConfig::lossless(), DetectionScheme::Intensity, 500.0)
                .unwrap();
        assert!((g2 / cfg.g1_gain() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn gain_sweep_rows_cover_the_requested_ratios() {
        let cfg = fig_config();
        let rows = gain_sweep(&cfg, &LossConfig::lossless(), 1.0, 2.0, 0.5).unwrap();
        assert_eq!(rows.len(), 3);
        assert!((rows[0].ratio - 1.0).abs() < 1e-12);
        assert!((rows[2].ratio - 2.0).abs() < 1e-12);
        let hd0 = rows[0].hd_delta_phi.unwrap();
        assert!((hd0 - 1.0 / 5000.0_f64.sqrt()).abs() < 1e-12);
        for row in &rows {
            assert!(row.id_delta_phi.unwrap() > 0.0);
            assert!(row.id_phi_opt.unwrap() <= PI);
        }
        assert!(gain_sweep(&cfg, &LossConfig::lossless(), 0.5, 2.0, 0.5).is_err());
        assert!(gain_sweep(&cfg, &LossConfig::lossless(), 1.0, 2.0, -0.1).is_err());
    }

    #[test]
    fn loss_map_flags_dead_columns_as_divergent() {
        let cfg = fig_config();
        let grid = loss_map(
            &cfg,
            Plane::Internal,
            DetectionScheme::Homodyne,
            16,
            false,
            500.0,
        )
        .unwrap();
        assert_eq!(grid.x_name, "eta_c");
        // eta_c = 0 kills the homodyne slope everywhere along the column.
        for j in 0..16 {
            assert!(grid.divergent[(0, j)]);
        }
        assert!(!grid.all_divergent());
        assert!(grid.get(15, 15).unwrap() > 0.0);
        assert!(loss_map(&cfg, Plane::Internal, DetectionScheme::Homodyne, 8, false, 500.0)
            .is_err());
    }

    #[test]
    fn optimized_map_never_loses_to_the_balanced_map() {
        let cfg = fig_config();
        let bal = loss_map(
            &cfg,
            Plane::Internal,
            DetectionScheme::Homodyne,
            16,
            false,
            500.0,
        )
        .unwrap();
        let opt = loss_map(
            &cfg,
            Plane::Internal,
            DetectionScheme::Homodyne,
            16,
            true,
            500.0,
        )
        .unwrap();
        let ratios = opt.gain_ratios.as_ref().unwrap();
        for i in 0..16 {
            for j in 0..16 {
                match (bal.get(i, j), opt.get(i, j)) {
                    (Some(b), Some(o)) => {
                        assert!(o <= b * (1.0 + 1e-9), "cell ({i}, {j}): {o} vs {b}");
                        // The optimum can retune below the balanced gain at
                        // heavy loss, but G2 >= 1 bounds the ratio from below.
                        assert!(ratios[(i, j)] >= 1.0 / cfg.g1_gain());
                    }
                    (None, None) => {}
                    other => panic!("divergence mismatch at ({i}, {j}): {other:?}"),
                }
            }
        }
        let better = sql_beating_cells(&opt, sql(&cfg).unwrap());
        let base = sql_beating_cells(&bal, sql(&cfg).unwrap());
        assert!(better > base);
    }

    #[test]
    fn boundary_points_sit_on_the_level_set() {
        let cfg = fig_config();
        let grid = loss_map(
            &cfg,
            Plane::Internal,
            DetectionScheme::Homodyne,
            21,
            true,
            500.0,
        )
        .unwrap();
        let level = sql(&cfg).unwrap();
        let eval = |x: f64, y: f64| -> Option<f64> {
            let loss = Plane::Internal.loss(x, y).ok()?;
            cell_report(&cfg, &loss, DetectionScheme::Homodyne, true, 500.0)
                .ok()
                .flatten()
                .map(|(_, rep)| rep.delta_phi)
        };
        let curve = extract_boundary(&grid, eval, level).unwrap();
        assert!(!curve.points.is_empty());
        for &(x, y) in &curve.points {
            let v = eval(x, y).unwrap();
            assert!(
                (v - level).abs() <= 1e-6 * level,
                "residual at ({x}, {y}): {v} vs {level}"
            );
        }
        // Consecutive chained points stay close on the 21-cell lattice.
        for pair in curve.points.windows(2) {
            let d = ((pair[0].0 - pair[1].0).powi(2) + (pair[0].1 - pair[1].1).powi(2)).sqrt();
            assert!(d < 0.35, "chain jump of {d}");
        }
    }
}
