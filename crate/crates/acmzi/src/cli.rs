use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::fock::{prepare_probe, qfi_of_state};
use crate::gaussian::{
    build_interferometer_network, coefficient_set_from, observable_stats, probe_network,
    propagate_moments, signal_input, ObservableSpec,
};
use crate::metrology::{
    fisher_report, hd_sensitivity, hd_sensitivity_lossless, hd_slope, hd_variance, id_sensitivity,
    id_sensitivity_lossless, id_variance, qfi_pure, sql, DetectionScheme,
};
use crate::model::{coefficients_lossy, InterferometerConfig, LossConfig};
use crate::optimize::{
    extract_boundary, gain_sweep, loss_map, point_sensitivity, Plane, DEFAULT_G2_SQ_MAX,
};

/// Serialization target for datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown format '{other}', expected 'csv' or 'json'"
            ))),
        }
    }
}

/// Every accepted key with a short description; the single source for
/// parsing, the usage text, and config files.
const KEYS: &[(&str, &str)] = &[
    ("n_c", "mean photon number of the coherent drive (default 1000)"),
    ("alpha", "coherent amplitude; alternative to n_c (n_c = alpha^2)"),
    ("g1_gain", "first amplifier gain G1 (default sqrt 5)"),
    ("g1_small", "first amplifier cross gain g1 (default from G1)"),
    ("g2_gain", "second amplifier gain G2 (default G1)"),
    ("g2_small", "second amplifier cross gain g2 (default from G2)"),
    ("theta1", "first pump phase in radians (default 0)"),
    ("theta2", "second pump phase in radians (default pi)"),
    ("bs_t", "splitter transmission (default 0.5)"),
    ("bs_r", "splitter reflectivity (default 1 - bs_t)"),
    ("eta_a", "transmission of the idler line (default 1)"),
    ("eta_b", "transmission of the readout line (default 1)"),
    ("eta_c", "transmission of the phase arm (default 1)"),
    ("eta_d", "transmission of the reference arm (default 1)"),
    ("phi_min", "sensitivity sweep start in radians (default 2.8)"),
    ("phi_max", "sensitivity sweep end in radians (default 3.5)"),
    ("phi_steps", "sensitivity sweep point count (default 141)"),
    ("ratio_min", "gain sweep start for G2/G1 (default 1)"),
    ("ratio_max", "gain sweep end for G2/G1 (default 6)"),
    ("ratio_step", "gain sweep step (default 0.05)"),
    ("plane", "loss plane, 'internal' or 'external' (default internal)"),
    ("resolution", "loss map grid points per axis (default 101)"),
    ("g2_sq_max", "ceiling on G2^2 during gain optimization (default 500)"),
    ("scheme", "detection scheme for loss maps, 'hd' or 'id' (default hd)"),
    ("output", "output path stem (default: the subcommand name)"),
    ("format", "output format, 'csv' or 'json' (default csv)"),
    ("seed", "random seed for verify (default 7)"),
    ("samples", "random samples per verify check (default 200)"),
    ("tolerance_scale", "multiplier on verify tolerances (default 1)"),
    ("emit_plot", "also write a gnuplot script, true/false (default false)"),
];

/// All run settings, each optional until resolved. Precedence: command-line
/// flags override config-file keys override built-in defaults.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    n_c: Option<f64>,
    alpha: Option<f64>,
    g1_gain: Option<f64>,
    g1_small: Option<f64>,
    g2_gain: Option<f64>,
    g2_small: Option<f64>,
    theta1: Option<f64>,
    theta2: Option<f64>,
    bs_t: Option<f64>,
    bs_r: Option<f64>,
    eta_a: Option<f64>,
    eta_b: Option<f64>,
    eta_c: Option<f64>,
    eta_d: Option<f64>,
    phi_min: Option<f64>,
    phi_max: Option<f64>,
    phi_steps: Option<usize>,
    ratio_min: Option<f64>,
    ratio_max: Option<f64>,
    ratio_step: Option<f64>,
    plane: Option<Plane>,
    resolution: Option<usize>,
    g2_sq_max: Option<f64>,
    scheme: Option<DetectionScheme>,
    output: Option<String>,
    format: Option<OutputFormat>,
    seed: Option<u64>,
    samples: Option<usize>,
    tolerance_scale: Option<f64>,
    emit_plot: Option<bool>,
}

fn parse_number(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| {
            Error::InvalidConfig(format!("key '{key}' needs a finite number, got '{value}'"))
        })
}

fn parse_count(key: &str, value: &str) -> Result<usize> {
    value.parse::<usize>().map_err(|_| {
        Error::InvalidConfig(format!(
            "key '{key}' needs a non-negative integer, got '{value}'"
        ))
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::InvalidConfig(format!(
            "key '{key}' needs true or false, got '{value}'"
        ))),
    }
}

impl RunConfig {
    /// Assigns one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n_c" => self.n_c = Some(parse_number(key, value)?),
            "alpha" => self.alpha = Some(parse_number(key, value)?),
            "g1_gain" => self.g1_gain = Some(parse_number(key, value)?),
            "g1_small" => self.g1_small = Some(parse_number(key, value)?),
            "g2_gain" => self.g2_gain = Some(parse_number(key, value)?),
            "g2_small" => self.g2_small = Some(parse_number(key, value)?),
            "theta1" => self.theta1 = Some(parse_number(key, value)?),
            "theta2" => self.theta2 = Some(parse_number(key, value)?),
            "bs_t" => self.bs_t = Some(parse_number(key, value)?),
            "bs_r" => self.bs_r = Some(parse_number(key, value)?),
            "eta_a" => self.eta_a = Some(parse_number(key, value)?),
            "eta_b" => self.eta_b = Some(parse_number(key, value)?),
            "eta_c" => self.eta_c = Some(parse_number(key, value)?),
            "eta_d" => self.eta_d = Some(parse_number(key, value)?),
            "phi_min" => self.phi_min = Some(parse_number(key, value)?),
            "phi_max" => self.phi_max = Some(parse_number(key, value)?),
            "phi_steps" => self.phi_steps = Some(parse_count(key, value)?),
            "ratio_min" => self.ratio_min = Some(parse_number(key, value)?),
            "ratio_max" => self.ratio_max = Some(parse_number(key, value)?),
            "ratio_step" => self.ratio_step = Some(parse_number(key, value)?),
            "plane" => self.plane = Some(value.parse()?),
            "resolution" => self.resolution = Some(parse_count(key, value)?),
            "g2_sq_max" => self.g2_sq_max = Some(parse_number(key, value)?),
            "scheme" => {
                self.scheme = Some(match value {
                    "hd" => DetectionScheme::Homodyne,
                    "id" => DetectionScheme::Intensity,
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "unknown scheme '{other}', expected 'hd' or 'id'"
                        )))
                    }
                })
            }
            "output" => self.output = Some(value.to_string()),
            "format" => self.format = Some(value.parse()?),
            "seed" => {
                self.seed = Some(value.parse::<u64>().map_err(|_| {
                    Error::InvalidConfig(format!(
                        "key 'seed' needs a non-negative integer, got '{value}'"
                    ))
                })?)
            }
            "samples" => self.samples = Some(parse_count(key, value)?),
            "tolerance_scale" => self.tolerance_scale = Some(parse_number(key, value)?),
            "emit_plot" => self.emit_plot = Some(parse_bool(key, value)?),
            other => {
                return Err(Error::InvalidConfig(format!("unknown key '{other}'")));
            }
        }
        Ok(())
    }

    /// Applies a flat key=value config file; '#' starts a comment.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::ConfigParse {
                    line: number + 1,
                    reason: format!("expected key=value, got '{line}'"),
                });
            };
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::ConfigParse {
                    line: number + 1,
                    reason: message_of(&e),
                })?;
        }
        Ok(())
    }

    pub fn output_stem(&self, default: &str) -> String {
        self.output.clone().unwrap_or_else(|| default.to_string())
    }

    pub fn format(&self) -> OutputFormat {
        self.format.unwrap_or_default()
    }

    pub fn emit_plot(&self) -> bool {
        self.emit_plot.unwrap_or(false)
    }

    fn resolve(&self) -> Result<Resolved> {
        let n_c = match (self.n_c, self.alpha) {
            (Some(n), Some(a)) => {
                if (n - a * a).abs() > 1e-9 * n.abs().max(1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "n_c = {n} conflicts with alpha = {a} (alpha^2 = {})",
                        a * a
                    )));
                }
                n
            }
            (Some(n), None) => n,
            (None, Some(a)) => a * a,
            (None, None) => 1000.0,
        };
        let g1_gain = match (self.g1_gain, self.g1_small) {
            (Some(g), _) => g,
            (None, Some(s)) => (1.0 + s * s).sqrt(),
            (None, None) => 5.0_f64.sqrt(),
        };
        let g1_small = self
            .g1_small
            .unwrap_or_else(|| (g1_gain * g1_gain - 1.0).max(0.0).sqrt());
        let g2_gain = match (self.g2_gain, self.g2_small) {
            (Some(g), _) => g,
            (None, Some(s)) => (1.0 + s * s).sqrt(),
            (None, None) => g1_gain,
        };
        let g2_small = self
            .g2_small
            .unwrap_or_else(|| (g2_gain * g2_gain - 1.0).max(0.0).sqrt());
        let (bs_t, bs_r) = match (self.bs_t, self.bs_r) {
            (Some(t), Some(r)) => (t, r),
            (Some(t), None) => (t, 1.0 - t),
            (None, Some(r)) => (1.0 - r, r),
            (None, None) => (0.5, 0.5),
        };
        let device = InterferometerConfig::from_parts(
            n_c,
            g1_gain,
            g1_small,
            g2_gain,
            g2_small,
            self.theta1.unwrap_or(0.0),
            self.theta2.unwrap_or(PI),
            bs_t,
            bs_r,
        )?;
        let loss = LossConfig::new(
            self.eta_a.unwrap_or(1.0),
            self.eta_b.unwrap_or(1.0),
            self.eta_c.unwrap_or(1.0),
            self.eta_d.unwrap_or(1.0),
        )?;
        Ok(Resolved {
            device,
            loss,
            phi_min: self.phi_min.unwrap_or(2.8),
            phi_max: self.phi_max.unwrap_or(3.5),
            phi_steps: self.phi_steps.unwrap_or(141),
            ratio_min: self.ratio_min.unwrap_or(1.0),
            ratio_max: self.ratio_max.unwrap_or(6.0),
            ratio_step: self.ratio_step.unwrap_or(0.05),
            plane: self.plane.unwrap_or(Plane::Internal),
            resolution: self.resolution.unwrap_or(101),
            g2_sq_max: self.g2_sq_max.unwrap_or(DEFAULT_G2_SQ_MAX),
            scheme: self.scheme.unwrap_or(DetectionScheme::Homodyne),
            seed: self.seed.unwrap_or(7),
            samples: self.samples.unwrap_or(200),
            tolerance_scale: self.tolerance_scale.unwrap_or(1.0),
        })
    }
}

struct Resolved {
    device: InterferometerConfig,
    loss: LossConfig,
    phi_min: f64,
    phi_max: f64,
    phi_steps: usize,
    ratio_min: f64,
    ratio_max: f64,
    ratio_step: f64,
    plane: Plane,
    resolution: usize,
    g2_sq_max: f64,
    scheme: DetectionScheme,
    seed: u64,
    samples: usize,
    tolerance_scale: f64,
}

/// Rectangular numeric table with named, unit-tagged columns. Missing cells
/// mark divergent results; they serialize as empty CSV fields or JSON null,
/// never as non-finite tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    units: Vec<String>,
    metadata: Vec<(String, String)>,
    rows: Vec<Vec<Option<f64>>>,
}

impl Dataset {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Self {
            columns: columns.iter().map(|(n, _)| n.to_string()).collect(),
            units: columns.iter().map(|(_, u)| u.to_string()).collect(),
            metadata: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_metadata(&mut self, key: &str, value: impl std::fmt::Display) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn push_row(&mut self, row: Vec<Option<f64>>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                actual: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Comment-prefixed metadata, a header row, then one line per row with
    /// 17-significant-digit floats so every value round-trips exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# acmzi dataset\n");
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str(&format!("# units = {}\n", self.units.join(",")));
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|cell| match cell {
                    Some(v) => format!("{v:.16e}"),
                    None => String::new(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Columns mirrored as arrays under their names, plus a metadata object;
    /// divergent cells become null.
    pub fn to_json(&self) -> Value {
        let mut meta = Map::new();
        for (k, v) in &self.metadata {
            meta.insert(k.clone(), Value::String(v.clone()));
        }
        let mut data = Map::new();
        for (i, name) in self.columns.iter().enumerate() {
            let series: Vec<Value> = self
                .rows
                .iter()
                .map(|row| match row[i] {
                    Some(v) => Value::from(v),
                    None => Value::Null,
                })
                .collect();
            data.insert(name.clone(), Value::Array(series));
        }
        let mut root = Map::new();
        root.insert("metadata".to_string(), Value::Object(meta));
        root.insert(
            "columns".to_string(),
            Value::Array(self.columns.iter().map(|c| Value::from(c.as_str())).collect()),
        );
        root.insert(
            "units".to_string(),
            Value::Array(self.units.iter().map(|u| Value::from(u.as_str())).collect()),
        );
        root.insert("data".to_string(), Value::Object(data));
        Value::Object(root)
    }

    pub fn write_to(&self, stem: &str, format: OutputFormat) -> Result<PathBuf> {
        let path = PathBuf::from(format!("{stem}.{}", format.extension()));
        let body = match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => {
                let mut text = serde_json::to_string_pretty(&self.to_json())
                    .expect("plain value tree always serializes");
                text.push('\n');
                text
            }
        };
        std::fs::write(&path, body)?;
        Ok(path)
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn base_dataset(command: &str, columns: &[(&str, &str)], res: &Resolved) -> Dataset {
    let mut ds = Dataset::new(columns);
    ds.add_metadata("command", command);
    ds.add_metadata("tool_version", env!("CARGO_PKG_VERSION"));
    ds.add_metadata("timestamp_unix", unix_now());
    let c = &res.device;
    ds.add_metadata("n_c", c.n_c());
    ds.add_metadata("g1_gain", c.g1_gain());
    ds.add_metadata("g1_small", c.g1_small());
    ds.add_metadata("g2_gain", c.g2_gain());
    ds.add_metadata("g2_small", c.g2_small());
    ds.add_metadata("theta1", c.theta1());
    ds.add_metadata("theta2", c.theta2());
    ds.add_metadata("bs_t", c.bs_t());
    ds.add_metadata("bs_r", c.bs_r());
    ds.add_metadata("eta_a", res.loss.eta_a());
    ds.add_metadata("eta_b", res.loss.eta_b());
    ds.add_metadata("eta_c", res.loss.eta_c());
    ds.add_metadata("eta_d", res.loss.eta_d());
    ds
}

/// Math failures that mark a single point divergent instead of aborting.
fn divergent_ok<T>(outcome: Result<T>) -> Result<Option<T>> {
    match outcome {
        Ok(v) => Ok(Some(v)),
        Err(Error::ZeroSlope { .. }) | Err(Error::NoValidGain { .. }) | Err(Error::AllDivergent) => {
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Phase sweep of both detection schemes with their quantum bounds.
pub fn cmd_sensitivity(run: &RunConfig) -> Result<Dataset> {
    let res = run.resolve()?;
    if res.phi_steps == 0 {
        return Err(Error::Usage("phi_steps must be at least 1".into()));
    }
    if !(res.phi_min.is_finite() && res.phi_max.is_finite()) || res.phi_min > res.phi_max {
        return Err(Error::Usage(format!(
            "empty phase range [{}, {}]",
            res.phi_min, res.phi_max
        )));
    }
    let fisher = fisher_report(&res.device)?;
    let sql_value = sql(&res.device)?;
    let mut ds = base_dataset(
        "sensitivity",
        &[
            ("phi", "rad"),
            ("delta_phi_hd", "rad"),
            ("delta_phi_id", "rad"),
            ("qcrb", "rad"),
            ("sql", "rad"),
            ("divergent", "1"),
        ],
        &res,
    );
    ds.add_metadata("phi_min", res.phi_min);
    ds.add_metadata("phi_max", res.phi_max);
    ds.add_metadata("phi_steps", res.phi_steps);
    let mut live = 0usize;
    for k in 0..res.phi_steps {
        let phi = if res.phi_steps == 1 {
            res.phi_min
        } else {
            res.phi_min
                + k as f64 * (res.phi_max - res.phi_min) / (res.phi_steps - 1) as f64
        };
        let hd = divergent_ok(hd_sensitivity(&res.device, &res.loss, phi))?
            .map(|rep| rep.delta_phi);
        let id = divergent_ok(id_sensitivity(&res.device, &res.loss, phi))?
            .map(|rep| rep.delta_phi);
        if hd.is_some() || id.is_some() {
            live += 1;
        }
        let divergent = hd.is_none() || id.is_none();
        ds.push_row(vec![
            Some(phi),
            hd,
            id,
            Some(fisher.qcrb),
            Some(sql_value),
            Some(if divergent { 1.0 } else { 0.0 }),
        ])?;
    }
    if live == 0 {
        return Err(Error::AllDivergent);
    }
    Ok(ds)
}

/// Sweep of the recombination gain ratio G2/G1 at the schemes' optimal
/// working points.
pub fn cmd_gain_sweep(run: &RunConfig) -> Result<Dataset> {
    let res = run.resolve()?;
    let rows = gain_sweep(
        &res.device,
        &res.loss,
        res.ratio_min,
        res.ratio_max,
        res.ratio_step,
    )?;
    let fisher = fisher_report(&res.device)?;
    let sql_value = sql(&res.device)?;
    let mut ds = base_dataset(
        "gain-sweep",
        &[
            ("ratio", "1"),
            ("phi_opt_id", "rad"),
            ("delta_phi_hd", "rad"),
            ("delta_phi_id", "rad"),
            ("qcrb", "rad"),
            ("sql", "rad"),
            ("divergent", "1"),
        ],
        &res,
    );
    ds.add_metadata("ratio_min", res.ratio_min);
    ds.add_metadata("ratio_max", res.ratio_max);
    ds.add_metadata("ratio_step", res.ratio_step);
    let mut live = 0usize;
    for row in &rows {
        if row.hd_delta_phi.is_some() || row.id_delta_phi.is_some() {
            live += 1;
        }
        let divergent = row.hd_delta_phi.is_none() || row.id_delta_phi.is_none();
        ds.push_row(vec![
            Some(row.ratio),
            row.id_phi_opt,
            row.hd_delta_phi,
            row.id_delta_phi,
            Some(fisher.qcrb),
            Some(sql_value),
            Some(if divergent { 1.0 } else { 0.0 }),
        ])?;
    }
    if live == 0 {
        return Err(Error::AllDivergent);
    }
    Ok(ds)
}

/// Loss-map products: the scanned grid, both quantum-advantage boundaries,
/// and the retuned-gain contour data.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMapBundle {
    pub grid: Dataset,
    pub sql_fixed: Dataset,
    pub sql_optimized: Dataset,
    pub gain: Dataset,
}

/// Scans one loss plane twice, with the built gain and with the gain retuned
/// per cell, and traces where each map crosses the standard quantum limit
/// (SQL0: fixed gain, SQL1: optimized gain).
pub fn cmd_loss_map(run: &RunConfig) -> Result<LossMapBundle> {
    let res = run.resolve()?;
    let fixed = loss_map(
        &res.device,
        res.plane,
        res.scheme,
        res.resolution,
        false,
        res.g2_sq_max,
    )?;
    let tuned = loss_map(
        &res.device,
        res.plane,
        res.scheme,
        res.resolution,
        true,
        res.g2_sq_max,
    )?;
    if fixed.all_divergent() && tuned.all_divergent() {
        return Err(Error::AllDivergent);
    }
    let level = sql(&res.device)?;
    let device = res.device;
    let plane = res.plane;
    let scheme = res.scheme;
    let ceiling = res.g2_sq_max;
    let eval = |optimize: bool| {
        move |x: f64, y: f64| -> Option<f64> {
            let loss = plane.loss(x, y).ok()?;
            point_sensitivity(&device, &loss, scheme, optimize, ceiling)
                .ok()
                .flatten()
        }
    };
    let boundary_fixed = extract_boundary(&fixed, eval(false), level)?;
    let boundary_tuned = extract_boundary(&tuned, eval(true), level)?;

    let (x_name, y_name) = res.plane.axis_names();
    let mut grid = base_dataset(
        "loss-map",
        &[
            (x_name, "1"),
            (y_name, "1"),
            ("delta_phi_fixed", "rad"),
            ("delta_phi_optimized", "rad"),
            ("divergent", "1"),
        ],
        &res,
    );
    grid.add_metadata("plane", res.plane);
    grid.add_metadata("scheme", res.scheme);
    grid.add_metadata("resolution", res.resolution);
    grid.add_metadata("g2_sq_max", res.g2_sq_max);
    grid.add_metadata("sql_level", level);
    let mut gain = base_dataset(
        "loss-map",
        &[
            (x_name, "1"),
            (y_name, "1"),
            ("gain_ratio", "1"),
            ("divergent", "1"),
        ],
        &res,
    );
    gain.add_metadata("plane", res.plane);
    gain.add_metadata("scheme", res.scheme);
    gain.add_metadata("resolution", res.resolution);
    gain.add_metadata("g2_sq_max", res.g2_sq_max);
    let ratios = tuned
        .gain_ratios
        .as_ref()
        .expect("optimized scan always records gain ratios");
    for i in 0..res.resolution {
        for j in 0..res.resolution {
            let fixed_cell = fixed.get(i, j);
            let tuned_cell = tuned.get(i, j);
            let divergent = fixed_cell.is_none() || tuned_cell.is_none();
            grid.push_row(vec![
                Some(fixed.xs[i]),
                Some(fixed.ys[j]),
                fixed_cell,
                tuned_cell,
                Some(if divergent { 1.0 } else { 0.0 }),
            ])?;
            let ratio = tuned_cell.map(|_| ratios[(i, j)]);
            gain.push_row(vec![
                Some(fixed.xs[i]),
                Some(fixed.ys[j]),
                ratio,
                Some(if ratio.is_none() { 1.0 } else { 0.0 }),
            ])?;
        }
    }

    let boundary_dataset = |name: &str, curve: &crate::optimize::BoundaryCurve| -> Result<Dataset> {
        let mut ds = base_dataset(name, &[(x_name, "1"), (y_name, "1")], &res);
        ds.add_metadata("plane", res.plane);
        ds.add_metadata("scheme", res.scheme);
        ds.add_metadata("level", curve.level);
        for &(x, y) in &curve.points {
            ds.push_row(vec![Some(x), Some(y)])?;
        }
        Ok(ds)
    };
    Ok(LossMapBundle {
        grid,
        sql_fixed: boundary_dataset("loss-map-sql0", &boundary_fixed)?,
        sql_optimized: boundary_dataset("loss-map-sql1", &boundary_tuned)?,
        gain,
    })
}

struct CheckOutcome {
    id: u32,
    name: &'static str,
    samples: usize,
    residual: f64,
    tolerance: f64,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn random_device(rng: &mut ChaCha8Rng, pumps_pinned: bool, n_c_floor: f64) -> InterferometerConfig {
    let n_c = rng.random_range(n_c_floor..1500.0);
    let g1 = rng.random_range(1.05..2.5);
    let g2 = rng.random_range(1.05..2.5);
    let (theta1, theta2) = if pumps_pinned {
        (0.0, PI)
    } else {
        (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI))
    };
    let t = rng.random_range(0.1..0.9);
    InterferometerConfig::from_gains(n_c, g1, g2, theta1, theta2, t, 1.0 - t)
        .expect("sampled parameters are always valid")
}

fn random_loss(rng: &mut ChaCha8Rng) -> LossConfig {
    LossConfig::new(
        rng.random_range(0.05..1.0),
        rng.random_range(0.05..1.0),
        rng.random_range(0.05..1.0),
        rng.random_range(0.05..1.0),
    )
    .expect("sampled transmissions are always valid")
}

fn engine_stats(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
    phi: f64,
    obs: &ObservableSpec,
) -> Result<(f64, f64)> {
    let net = build_interferometer_network(cfg, loss, phi)?;
    let input = signal_input(cfg, net.n_modes())?;
    let moments = propagate_moments(&net, &input)?;
    observable_stats(&moments, obs)
}

/// Central difference of the engine mean signal; the step is wide enough to
/// keep the subtraction above roundoff yet small enough for 1e-6 accuracy.
const FD_STEP: f64 = 1e-4;

fn engine_mean_derivative(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
    phi: f64,
    obs: &ObservableSpec,
) -> Result<f64> {
    let (up, _) = engine_stats(cfg, loss, phi + FD_STEP, obs)?;
    let (down, _) = engine_stats(cfg, loss, phi - FD_STEP, obs)?;
    Ok((up - down) / (2.0 * FD_STEP))
}

/// Cross-validation battery over seeded random device settings. Returns the
/// residual table and whether every check stayed inside its tolerance.
pub fn cmd_verify(run: &RunConfig) -> Result<(Dataset, bool)> {
    let res = run.resolve()?;
    let samples = res.samples.max(1);
    let quadrature = ObservableSpec::QuadratureY { mode: 1 };
    let photon_sum = ObservableSpec::PhotonSum { modes: vec![0, 1] };
    let mut outcomes: Vec<CheckOutcome> = Vec::new();
    let mut run_check = |id: u32,
                         name: &'static str,
                         n: usize,
                         tolerance: f64,
                         body: &mut dyn FnMut(&mut ChaCha8Rng) -> Result<f64>|
     -> Result<()> {
        // One fresh stream per check keeps the table stable no matter how
        // many draws the other checks consume.
        let mut rng = ChaCha8Rng::seed_from_u64(res.seed.wrapping_add(id as u64));
        let mut residual = 0.0_f64;
        for _ in 0..n {
            residual = residual.max(body(&mut rng)?);
        }
        outcomes.push(CheckOutcome {
            id,
            name,
            samples: n,
            residual,
            tolerance,
        });
        Ok(())
    };

    run_check(1, "coefficient_commutators", samples, 1e-10, &mut |rng| {
        let cfg = random_device(rng, false, 0.5);
        let loss = random_loss(rng);
        let phi = rng.random_range(0.0..2.0 * PI);
        let cs = coefficients_lossy(&cfg, &loss, phi);
        Ok((cs.commutator_sum_a() - 1.0)
            .abs()
            .max((cs.commutator_sum_b() - 1.0).abs()))
    })?;

    run_check(2, "network_matches_coefficients", samples, 1e-12, &mut |rng| {
        let cfg = random_device(rng, false, 0.5);
        let loss = random_loss(rng);
        let phi = rng.random_range(0.0..2.0 * PI);
        let closed = coefficients_lossy(&cfg, &loss, phi);
        let net = build_interferometer_network(&cfg, &loss, phi)?;
        let from_net = coefficient_set_from(&net, phi)?;
        let mut worst = 0.0_f64;
        for k in 0..7 {
            worst = worst.max((closed.t()[k] - from_net.t()[k]).norm());
            worst = worst.max((closed.m()[k] - from_net.m()[k]).norm());
        }
        Ok(worst)
    })?;

    run_check(3, "hd_variance_vs_moments", samples, 1e-8, &mut |rng| {
        let cfg = random_device(rng, true, 0.5);
        let loss = random_loss(rng);
        let phi = rng.random_range(0.0..2.0 * PI);
        let (_, engine) = engine_stats(&cfg, &loss, phi, &quadrature)?;
        Ok(relative_gap(hd_variance(&cfg, &loss, phi)?, engine))
    })?;

    run_check(4, "hd_slope_vs_finite_difference", samples, 1e-6, &mut |rng| {
        let cfg = random_device(rng, true, 10.0);
        let loss = random_loss(rng);
        let phi = rng.random_range(0.3..1.2);
        let fd = engine_mean_derivative(&cfg, &loss, phi, &quadrature)?;
        Ok(relative_gap(hd_slope(&cfg, &loss, phi)?, fd))
    })?;

    run_check(5, "id_variance_vs_moments", samples, 1e-8, &mut |rng| {
        let cfg = random_device(rng, true, 0.5);
        let loss = random_loss(rng);
        let phi = rng.random_range(0.0..2.0 * PI);
        let (_, engine) = engine_stats(&cfg, &loss, phi, &photon_sum)?;
        Ok(relative_gap(id_variance(&cfg, &loss, phi)?, engine))
    })?;

    run_check(6, "id_slope_vs_finite_difference", samples, 1e-6, &mut |rng| {
        let cfg = random_device(rng, true, 10.0);
        let loss = random_loss(rng);
        let phi = rng.random_range(0.3..1.2);
        let fd = engine_mean_derivative(&cfg, &loss, phi, &photon_sum)?;
        let rep = id_sensitivity(&cfg, &loss, phi)?;
        Ok(relative_gap(rep.slope, fd))
    })?;

    run_check(7, "hd_lossless_limit_match", samples, 1e-12, &mut |rng| {
        let cfg = random_device(rng, true, 0.5);
        let phi = rng.random_range(0.3..1.2);
        let lossy = hd_sensitivity(&cfg, &LossConfig::lossless(), phi)?;
        let reduced = hd_sensitivity_lossless(&cfg, phi)?;
        Ok(relative_gap(lossy.delta_phi, reduced.delta_phi))
    })?;

    run_check(8, "pure_fisher_vs_moments", samples, 1e-10, &mut |rng| {
        let cfg = random_device(rng, false, 0.5);
        let net = probe_network(&cfg)?;
        let input = signal_input(&cfg, net.n_modes())?;
        let moments = propagate_moments(&net, &input)?;
        let (_, var) = observable_stats(&moments, &ObservableSpec::PhotonSum { modes: vec![2] })?;
        Ok(relative_gap(qfi_pure(&cfg), 4.0 * var))
    })?;

    run_check(9, "id_lossless_limit_match", samples, 1e-8, &mut |rng| {
        let cfg = random_device(rng, true, 10.0);
        let phi = rng.random_range(0.3..1.2);
        let lossy = id_sensitivity(&cfg, &LossConfig::lossless(), phi)?;
        let reduced = id_sensitivity_lossless(&cfg, phi)?;
        Ok(relative_gap(lossy.delta_phi, reduced.delta_phi))
    })?;

    run_check(10, "fock_probe_fisher", 1, 1e-5, &mut |_| {
        let cfg = InterferometerConfig::from_gains_squared(1.0, 1.25, 1.25, 0.0, PI, 0.5, 0.5)?;
        let probe = prepare_probe(&cfg, 16)?;
        Ok(relative_gap(qfi_of_state(&probe)?, qfi_pure(&cfg)))
    })?;

    let mut ds = base_dataset(
        "verify",
        &[
            ("check_id", "1"),
            ("samples", "1"),
            ("max_residual", "1"),
            ("tolerance", "1"),
            ("pass", "1"),
        ],
        &res,
    );
    ds.add_metadata("seed", res.seed);
    ds.add_metadata("samples", res.samples);
    ds.add_metadata("tolerance_scale", res.tolerance_scale);
    let mut all_pass = true;
    for outcome in &outcomes {
        ds.add_metadata(&format!("check_{}", outcome.id), outcome.name);
        let tolerance = outcome.tolerance * res.tolerance_scale;
        let pass = outcome.residual <= tolerance;
        all_pass &= pass;
        ds.push_row(vec![
            Some(outcome.id as f64),
            Some(outcome.samples as f64),
            Some(outcome.residual),
            Some(tolerance),
            Some(if pass { 1.0 } else { 0.0 }),
        ])?;
    }
    Ok((ds, all_pass))
}

fn message_of(e: &Error) -> String {
    match e {
        Error::InvalidConfig(s) => s.clone(),
        other => other.to_string(),
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::AllDivergent => 3,
        _ => 1,
    }
}

pub fn usage() -> String {
    let mut text = String::from(
        "acmzi - phase sensitivity of an actively correlated Mach-Zehnder interferometer\n\
         \n\
         usage: acmzi <subcommand> [--config FILE] [--key value]...\n\
         \n\
         subcommands:\n\
         \x20 sensitivity   sweep the working phase, write delta-phi for both schemes\n\
         \x20 gain-sweep    sweep the recombination gain ratio G2/G1\n\
         \x20 loss-map      scan a loss plane and trace the quantum-advantage boundaries\n\
         \x20 verify        run the seeded cross-validation battery\n\
         \n\
         Config files hold one key = value per line; '#' starts a comment.\n\
         Command-line flags override file keys, which override defaults.\n\
         \n\
         keys:\n",
    );
    for (key, help) in KEYS {
        text.push_str(&format!("  {key:<16} {help}\n"));
    }
    text.push_str(
        "\nexit codes: 0 success, 1 usage or config error, 2 verification failure,\n\
         3 every requested point divergent\n",
    );
    text
}

fn parse_flags(tokens: &[String]) -> Result<Vec<(String, String)>> {
    let mut flags = Vec::new();
    let mut it = tokens.iter();
    while let Some(token) = it.next() {
        let Some(stripped) = token.strip_prefix("--") else {
            return Err(Error::Usage(format!(
                "unexpected argument '{token}', expected --key value"
            )));
        };
        if let Some((key, value)) = stripped.split_once('=') {
            flags.push((key.to_string(), value.to_string()));
        } else {
            let Some(value) = it.next() else {
                return Err(Error::Usage(format!("flag '--{stripped}' needs a value")));
            };
            flags.push((stripped.to_string(), value.clone()));
        }
    }
    Ok(flags)
}

fn plot_script(command: &str, stem: &str) -> Option<String> {
    let header = "# gnuplot script generated by acmzi\n\
                  set datafile separator ','\n\
                  set grid\n";
    match command {
        "sensitivity" => Some(format!(
            "{header}set xlabel 'phi [rad]'\nset ylabel 'delta phi [rad]'\nset logscale y\n\
             plot '{stem}.csv' using 1:2 with lines title 'homodyne', \\\n\
             \x20    '{stem}.csv' using 1:3 with lines title 'intensity', \\\n\
             \x20    '{stem}.csv' using 1:4 with lines dashtype 2 title 'qcrb', \\\n\
             \x20    '{stem}.csv' using 1:5 with lines dashtype 3 title 'sql'\n"
        )),
        "gain-sweep" => Some(format!(
            "{header}set xlabel 'G2/G1'\nset ylabel 'delta phi [rad]'\nset logscale y\n\
             plot '{stem}.csv' using 1:3 with lines title 'homodyne', \\\n\
             \x20    '{stem}.csv' using 1:4 with lines title 'intensity', \\\n\
             \x20    '{stem}.csv' using 1:5 with lines dashtype 2 title 'qcrb', \\\n\
             \x20    '{stem}.csv' using 1:6 with lines dashtype 3 title 'sql'\n"
        )),
        "loss-map" => Some(format!(
            "{header}set xlabel 'transmission x'\nset ylabel 'transmission y'\n\
             set xrange [0:1]\nset yrange [0:1]\n\
             plot '{stem}_sql0.csv' using 1:2 with points pt 7 ps 0.4 title 'SQL0', \\\n\
             \x20    '{stem}_sql1.csv' using 1:2 with points pt 5 ps 0.4 title 'SQL1'\n"
        )),
        _ => None,
    }
}

fn maybe_emit_plot(run: &RunConfig, command: &str, stem: &str) -> Result<()> {
    if !run.emit_plot() {
        return Ok(());
    }
    if run.format() != OutputFormat::Csv {
        eprintln!("note: plot scripts read csv output; skipping for json format");
        return Ok(());
    }
    if let Some(script) = plot_script(command, stem) {
        let path = format!("{stem}.plt");
        std::fs::write(&path, script)?;
        println!("wrote {path}");
    }
    Ok(())
}

fn execute(args: &[String]) -> Result<i32> {
    let Some(first) = args.first() else {
        eprint!("{}", usage());
        return Err(Error::Usage("missing subcommand".into()));
    };
    if first == "--help" || first == "-h" || first == "help" {
        print!("{}", usage());
        return Ok(0);
    }
    let command = first.as_str();
    if !matches!(command, "sensitivity" | "gain-sweep" | "loss-map" | "verify") {
        return Err(Error::Usage(format!(
            "unknown subcommand '{command}', expected sensitivity, gain-sweep, loss-map, or verify"
        )));
    }
    let flags = parse_flags(&args[1..])?;
    let mut run = RunConfig::default();
    for (key, value) in &flags {
        if key == "config" {
            let text = std::fs::read_to_string(value)?;
            run.apply_config_text(&text)?;
        }
    }
    for (key, value) in &flags {
        if key != "config" {
            run.set(key, value)
                .map_err(|e| Error::Usage(message_of(&e)))?;
        }
    }
    let format = run.format();
    match command {
        "sensitivity" => {
            let ds = cmd_sensitivity(&run)?;
            let stem = run.output_stem("sensitivity");
            let path = ds.write_to(&stem, format)?;
            println!("wrote {} ({} rows)", path.display(), ds.rows().len());
            maybe_emit_plot(&run, command, &stem)?;
            Ok(0)
        }
        "gain-sweep" => {
            let ds = cmd_gain_sweep(&run)?;
            let stem = run.output_stem("gain_sweep");
            let path = ds.write_to(&stem, format)?;
            println!("wrote {} ({} rows)", path.display(), ds.rows().len());
            maybe_emit_plot(&run, command, &stem)?;
            Ok(0)
        }
        "loss-map" => {
            let bundle = cmd_loss_map(&run)?;
            let stem = run.output_stem("loss_map");
            let path = bundle.grid.write_to(&stem, format)?;
            println!("wrote {} ({} rows)", path.display(), bundle.grid.rows().len());
            for (ds, suffix) in [
                (&bundle.sql_fixed, "_sql0"),
                (&bundle.sql_optimized, "_sql1"),
                (&bundle.gain, "_gain"),
            ] {
                let path = ds.write_to(&format!("{stem}{suffix}"), format)?;
                println!("wrote {} ({} rows)", path.display(), ds.rows().len());
            }
            maybe_emit_plot(&run, command, &stem)?;
            Ok(0)
        }
        "verify" => {
            let (ds, all_pass) = cmd_verify(&run)?;
            println!(
                "{:>3}  {:<34} {:>8} {:>14} {:>12}  {}",
                "id", "check", "samples", "max residual", "tolerance", "status"
            );
            for row in ds.rows() {
                let id = row[0].unwrap_or(0.0) as u32;
                let name = ds
                    .metadata_value(&format!("check_{id}"))
                    .unwrap_or("unknown");
                println!(
                    "{:>3}  {:<34} {:>8} {:>14.3e} {:>12.1e}  {}",
                    id,
                    name,
                    row[1].unwrap_or(0.0) as usize,
                    row[2].unwrap_or(f64::NAN),
                    row[3].unwrap_or(f64::NAN),
                    if row[4] == Some(1.0) { "pass" } else { "FAIL" }
                );
            }
            let stem = run.output_stem("verify");
            let path = ds.write_to(&stem, format)?;
            println!("wrote {}", path.display());
            if all_pass {
                println!("verification passed");
                Ok(0)
            } else {
                println!("verification FAILED");
                Ok(2)
            }
        }
        _ => unreachable!("subcommand validated above"),
    }
}

/// Full front end: returns the process exit code.
pub fn run_main(args: &[String]) -> i32 {
    match execute(args) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}
