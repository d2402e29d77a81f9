//! Parameter sweeps: Cartesian expansion over swept axes, parallel
//! replication, deterministic CSV/JSON emission, and the adaptive-M lookup
//! table derived from sweep results.
//!
//! Determinism contract: every emitted row is a pure function of the sweep
//! spec and the master seed. Replication seeds are pre-assigned from the
//! (point, replication) indices and rows are emitted in row-major axis
//! order, so reruns and different worker counts produce byte-identical
//! output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::engine::{run_simulation, Scenario, StageTotals, ThroughputStats};
use crate::error::{Result, SimError};
use crate::lora;
use crate::scenario::ScenarioFile;
use crate::seed;

/// CSV schema identifier, bumped on any column change.
pub const CSV_SCHEMA: &str = "sweep-v1";

const SWEEP_TAG: u64 = 0x5357_4545_50; // "SWEEP"

/// A parameter that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "p_a")]
    ActivationProb,
    #[serde(rename = "M")]
    MultirateFactor,
    #[serde(rename = "SF")]
    SpreadingFactor,
    #[serde(rename = "semi_angle_deg")]
    SemiAngleDeg,
    #[serde(rename = "cell_radius_m")]
    CellRadiusM,
}

impl SweepParam {
    pub fn column_name(&self) -> &'static str {
        match self {
            SweepParam::ActivationProb => "p_a",
            SweepParam::MultirateFactor => "M",
            SweepParam::SpreadingFactor => "SF",
            SweepParam::SemiAngleDeg => "semi_angle_deg",
            SweepParam::CellRadiusM => "cell_radius_m",
        }
    }

    pub fn from_column_name(name: &str) -> Option<Self> {
        match name {
            "p_a" => Some(SweepParam::ActivationProb),
            "M" => Some(SweepParam::MultirateFactor),
            "SF" => Some(SweepParam::SpreadingFactor),
            "semi_angle_deg" => Some(SweepParam::SemiAngleDeg),
            "cell_radius_m" => Some(SweepParam::CellRadiusM),
        _ => None,
        }
    }

    /// Apply one swept value to a scenario.
    fn apply(&self, scenario: &mut Scenario, value: f64) -> Result<()> {
        match self {
            SweepParam::ActivationProb => scenario.activation_prob = value,
            SweepParam::MultirateFactor => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(SimError::domain(format!(
                        "M values must be positive integers, got {value}"
                    )));
                }
                scenario.multirate_factor = value as usize;
            }
            SweepParam::SpreadingFactor => {
                if value.fract() != 0.0 {
                    return Err(SimError::domain(format!(
                        "SF values must be integers, got {value}"
                    )));
                }
                scenario.lora.sf_row = lora::sf_row(value as u8)?;
            }
            SweepParam::SemiAngleDeg => scenario.owc_cell.semi_angle_deg = value,
            SweepParam::CellRadiusM => scenario.owc_cell.cell_radius_m = value,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Axis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// A fully resolved sweep specification.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: Scenario,
    pub axes: Vec<Axis>,
    pub replications: usize,
    pub output_format: OutputFormat,
    pub validate: bool,
    pub max_points: usize,
}

fn default_replications() -> usize { 20 }
fn default_max_points() -> usize { 10_000 }
fn default_output_format() -> OutputFormat { OutputFormat::Csv }

/// On-disk sweep spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpecFile {
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_output_format")]
    pub output_format: OutputFormat,
    #[serde(default)]
    pub validate: bool,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
    #[serde(default)]
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub base: ScenarioFile,
}

impl SweepSpecFile {
    pub fn into_spec(self) -> Result<SweepSpec> {
        let mut errs = Vec::new();
        if self.axes.is_empty() {
            errs.push("sweep requires at least one axis".to_string());
        }
        for axis in &self.axes {
            if axis.values.is_empty() {
                errs.push(format!("axis {} has no values", axis.param.column_name()));
            }
        }
        if self.replications < 1 {
            errs.push("replications must be >= 1".to_string());
        }
        if !errs.is_empty() {
            return Err(SimError::Validation(errs));
        }
        Ok(SweepSpec {
            base: self.base.into_scenario()?,
            axes: self.axes,
            replications: self.replications,
            output_format: self.output_format,
            validate: self.validate,
            max_points: self.max_points,
        })
    }
}

pub fn parse_sweep_spec_str(text: &str, origin: &str) -> Result<SweepSpec> {
    let file: SweepSpecFile = toml::from_str(text).map_err(|e| SimError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    file.into_spec()
}

pub fn parse_sweep_spec(path: &Path) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_sweep_spec_str(&text, &path.display().to_string())
}

/// One emitted sweep row: the swept values in axis order plus aggregated
/// statistics over the replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub values: Vec<f64>,
    pub throughput_mean: f64,
    pub throughput_ci95: f64,
    pub stage_totals: StageTotals,
}

/// A result table: axis labels plus rows in row-major sweep order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResults {
    pub axes: Vec<SweepParam>,
    pub rows: Vec<SweepRow>,
}

fn cartesian_points(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for p in &points {
            for &v in &axis.values {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        points = next;
    }
    points
}

fn aggregate(reps: &[ThroughputStats]) -> (f64, f64, StageTotals) {
    let totals = reps.iter().fold(StageTotals::default(), |mut acc, r| {
        acc.activated += r.stage_totals.activated;
        acc.captured += r.stage_totals.captured;
        acc.forwarded += r.stage_totals.forwarded;
        acc.decoded += r.stage_totals.decoded;
        acc
    });
    if reps.len() == 1 {
        return (reps[0].throughput_mean, reps[0].throughput_ci95, totals);
    }
    let n = reps.len() as f64;
    let mean = reps.iter().map(|r| r.throughput_mean).sum::<f64>() / n;
    let var = reps
        .iter()
        .map(|r| (r.throughput_mean - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt(), totals)
}

/// Execute a sweep on a pool of `workers` threads.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResults> {
    let points = cartesian_points(&spec.axes);
    if points.len() > spec.max_points {
        return Err(SimError::CapExceeded { points: points.len(), cap: spec.max_points });
    }

    // build and validate every point scenario up front so a bad point
    // aborts before any simulation runs
    let mut scenarios = Vec::with_capacity(points.len());
    for values in &points {
        let mut s = spec.base.clone();
        for (axis, &v) in spec.axes.iter().zip(values) {
            axis.param.apply(&mut s, v)?;
        }
        s.validate()?;
        scenarios.push(s);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SimError::domain(format!("failed to build worker pool: {e}")))?;

    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.replications).map(move |r| (p, r)))
        .collect();
    let master = spec.base.master_seed;
    let rep_stats: Vec<ThroughputStats> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(p, r)| {
                let mut s = scenarios[p].clone();
                s.master_seed = seed::derive_seed(master, &[SWEEP_TAG, p as u64, r as u64]);
                run_simulation(&s)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let rows = points
        .into_iter()
        .enumerate()
        .map(|(p, values)| {
            let reps = &rep_stats[p * spec.replications..(p + 1) * spec.replications];
            let (mean, ci, totals) = aggregate(reps);
            SweepRow {
                values,
                throughput_mean: mean,
                throughput_ci95: ci,
                stage_totals: totals,
            }
        })
        .collect();

    Ok(SweepResults { axes: spec.axes.iter().map(|a| a.param).collect(), rows })
}

const STAT_COLUMNS: [&str; 6] =
    ["throughput_mean", "throughput_ci95", "activated", "captured", "forwarded", "decoded"];

/// Render results as CSV. The leading comment line carries the schema tag.
pub fn to_csv(results: &SweepResults) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# schema: {CSV_SCHEMA}");
    let mut header: Vec<&str> = results.axes.iter().map(|a| a.column_name()).collect();
    header.extend(STAT_COLUMNS);
    let _ = writeln!(out, "{}", header.join(","));
    for row in &results.rows {
        let mut fields: Vec<String> = row.values.iter().map(|v| format!("{v}")).collect();
        fields.push(format!("{}", row.throughput_mean));
        fields.push(format!("{}", row.throughput_ci95));
        fields.push(format!("{}", row.stage_totals.activated));
        fields.push(format!("{}", row.stage_totals.captured));
        fields.push(format!("{}", row.stage_totals.forwarded));
        fields.push(format!("{}", row.stage_totals.decoded));
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

/// Render results as a JSON array of row objects.
pub fn to_json(results: &SweepResults) -> String {
    let rows: Vec<serde_json::Value> = results
        .rows
        .iter()
        .map(|row| {
            let mut obj = serde_json::Map::new();
            for (axis, v) in results.axes.iter().zip(&row.values) {
                obj.insert(axis.column_name().to_string(), serde_json::json!(v));
            }
            obj.insert("throughput_mean".into(), serde_json::json!(row.throughput_mean));
            obj.insert("throughput_ci95".into(), serde_json::json!(row.throughput_ci95));
            obj.insert("activated".into(), serde_json::json!(row.stage_totals.activated));
            obj.insert("captured".into(), serde_json::json!(row.stage_totals.captured));
            obj.insert("forwarded".into(), serde_json::json!(row.stage_totals.forwarded));
            obj.insert("decoded".into(), serde_json::json!(row.stage_totals.decoded));
            serde_json::Value::Object(obj)
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("rows serialize")
}

/// Parse a CSV produced by [`to_csv`] back into a result table.
pub fn parse_results_csv(text: &str) -> Result<SweepResults> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| SimError::Parse { path: "results".into(), message: "empty CSV".into() })?;
    let cols: Vec<&str> = header.split(',').collect();
    let stat_start = cols
        .iter()
        .position(|c| *c == "throughput_mean")
        .ok_or_else(|| SimError::Parse {
            path: "results".into(),
            message: "missing throughput_mean column".into(),
        })?;
    let axes: Vec<SweepParam> = cols[..stat_start]
        .iter()
        .map(|c| {
            SweepParam::from_column_name(c).ok_or_else(|| SimError::Parse {
                path: "results".into(),
                message: format!("unknown parameter column {c}"),
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(SimError::Parse {
                path: "results".into(),
                message: format!("row {} has {} fields, expected {}", lineno + 2, fields.len(), cols.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|e| SimError::Parse {
                path: "results".into(),
                message: format!("bad number {s:?}: {e}"),
            })
        };
        let values = fields[..stat_start].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
        rows.push(SweepRow {
            values,
            throughput_mean: parse(fields[stat_start])?,
            throughput_ci95: parse(fields[stat_start + 1])?,
            stage_totals: StageTotals {
                activated: parse(fields[stat_start + 2])? as u64,
                captured: parse(fields[stat_start + 3])? as u64,
                forwarded: parse(fields[stat_start + 4])? as u64,
                decoded: parse(fields[stat_start + 5])? as u64,
            },
        });
    }
    Ok(SweepResults { axes, rows })
}

/// One lookup-table entry: the throughput-maximising M for a setting of
/// all other swept parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveMRow {
    /// Values of the non-M axes, in their sweep order.
    pub key: Vec<f64>,
    pub best_m: f64,
    pub throughput_mean: f64,
    pub throughput_ci95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveMTable {
    /// Column names for `key`.
    pub key_columns: Vec<&'static str>,
    pub rows: Vec<AdaptiveMRow>,
}

impl AdaptiveMTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# schema: adaptive-m-v1");
        let mut header: Vec<&str> = self.key_columns.clone();
        header.extend(["best_M", "throughput_mean", "throughput_ci95"]);
        let _ = writeln!(out, "{}", header.join(","));
        for row in &self.rows {
            let mut fields: Vec<String> = row.key.iter().map(|v| format!("{v}")).collect();
            fields.push(format!("{}", row.best_m));
            fields.push(format!("{}", row.throughput_mean));
            fields.push(format!("{}", row.throughput_ci95));
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }
}

/// Reduce a result table with an M axis to the per-setting best M.
/// Exact mean ties break toward the smaller M.
pub fn build_adaptive_m_table(results: &SweepResults) -> Result<AdaptiveMTable> {
    let m_idx = results
        .axes
        .iter()
        .position(|a| *a == SweepParam::MultirateFactor)
        .ok_or_else(|| SimError::MissingAxis("M".into()))?;
    let key_columns: Vec<&'static str> = results
        .axes
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != m_idx)
        .map(|(_, a)| a.column_name())
        .collect();

    // first-appearance order keeps output deterministic
    let mut table: Vec<AdaptiveMRow> = Vec::new();
    for row in &results.rows {
        let key: Vec<f64> = row
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != m_idx)
            .map(|(_, v)| *v)
            .collect();
        let m = row.values[m_idx];
        match table.iter_mut().find(|r| r.key == key) {
            Some(entry) => {
                let better = row.throughput_mean > entry.throughput_mean
                    || (row.throughput_mean == entry.throughput_mean && m < entry.best_m);
                if better {
                    entry.best_m = m;
                    entry.throughput_mean = row.throughput_mean;
                    entry.throughput_ci95 = row.throughput_ci95;
                }
            }
            None => table.push(AdaptiveMRow {
                key,
                best_m: m,
                throughput_mean: row.throughput_mean,
                throughput_ci95: row.throughput_ci95,
            }),
        }
    }
    Ok(AdaptiveMTable { key_columns, rows: table })
}
