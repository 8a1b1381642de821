//! Report emission: a JSON bundle with full config provenance, a per-result
//! CSV table, and a smoothed training curve for external plotting. Emission
//! is a pure function of its inputs so re-running produces identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{write_atomic, RunConfig};
use super::eval::Metrics;
use super::trainer::EpisodeRow;
use super::HarnessError;

pub const METRICS_FILE: &str = "metrics.json";
pub const TABLE_FILE: &str = "table.csv";
pub const CURVE_FILE: &str = "training_curve.csv";
pub const RESULTS_FILE: &str = "results.json";

const TABLE_HEADER: &str = "environment,success_rate,chebyshev,episode_length";
const CURVE_HEADER: &str = "episode,mean_final_chebyshev";
const CURVE_WINDOW: usize = 100;

/// Labeled metrics collected across evaluate/baseline/generalize calls.
/// Keys are labels like `anechoic`, `random`, or `med->low`; the map keeps
/// them sorted so reports are stable regardless of insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultSet(pub BTreeMap<String, Metrics>);

impl ResultSet {
    pub fn insert(&mut self, label: impl Into<String>, metrics: Metrics) {
        self.0.insert(label.into(), metrics);
    }

    /// Loads the set from `path`, or starts empty if the file is absent.
    pub fn load_or_empty(path: &Path) -> Result<Self, HarnessError> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let mut text = serde_json::to_string_pretty(self).expect("serializable");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    config: &'a RunConfig,
    results: &'a BTreeMap<String, Metrics>,
}

/// Writes `metrics.json` (config plus all results), `table.csv` (one row
/// per result), and `training_curve.csv` (per-episode final Chebyshev,
/// trailing 100-episode mean) into `out_dir`.
pub fn emit_report(
    out_dir: &Path,
    cfg: &RunConfig,
    results: &ResultSet,
    log: &[EpisodeRow],
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out_dir)?;

    let mut json = serde_json::to_string_pretty(&ReportDoc { config: cfg, results: &results.0 })
        .expect("serializable");
    json.push('\n');
    write_atomic(&out_dir.join(METRICS_FILE), json.as_bytes())?;

    let mut table = String::from(TABLE_HEADER);
    table.push('\n');
    for (label, m) in &results.0 {
        writeln!(
            table,
            "{label},{:.1},{:.1},{:.1}",
            m.success_rate, m.mean_final_chebyshev, m.mean_episode_length
        )
        .expect("write to string");
    }
    write_atomic(&out_dir.join(TABLE_FILE), table.as_bytes())?;

    let mut curve = String::from(CURVE_HEADER);
    curve.push('\n');
    let mut window_sum: f64 = 0.0;
    for (i, row) in log.iter().enumerate() {
        window_sum += row.final_chebyshev as f64;
        if i >= CURVE_WINDOW {
            window_sum -= log[i - CURVE_WINDOW].final_chebyshev as f64;
        }
        let mean = window_sum / (i + 1).min(CURVE_WINDOW) as f64;
        writeln!(curve, "{},{mean:.4}", row.episode).expect("write to string");
    }
    write_atomic(&out_dir.join(CURVE_FILE), curve.as_bytes())?;
    Ok(())
}
