//! Falsely-flagged counts over an availability × threshold grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{analytic_expected_fp, simulate, Scenario, SimError, SimulationConfig, DAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FftGrid {
    /// Population, seed, engine and scale; availability and thresholds are
    /// taken from the grid.
    pub base: SimulationConfig,
    pub availabilities: Vec<f64>,
    pub thresholds_days: Vec<u64>,
}

impl FftGrid {
    pub fn standard(base: SimulationConfig) -> Self {
        FftGrid {
            base,
            availabilities: vec![0.85, 0.90, 0.95],
            thresholds_days: vec![30, 60, 90, 120, 150, 180],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FftCell {
    pub scenario: Scenario,
    pub availability: f64,
    pub theta_days: u64,
    pub shape_n: f64,
    pub fp: u64,
    pub fp_sigma: f64,
    pub fp_full_scale: f64,
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub analytic_expected_fp: Option<f64>,
}

/// One simulation per availability; both scenarios come from the same pass.
pub fn fft_table(grid: &FftGrid) -> Result<Vec<FftCell>, SimError> {
    let mut out = Vec::new();
    for &a in &grid.availabilities {
        let mut cfg = grid.base.clone();
        cfg.availability_target = a;
        cfg.thresholds = grid.thresholds_days.iter().map(|d| d * DAY).collect();
        let outcome = simulate(&cfg)?;
        for scenario in [Scenario::Once, Scenario::Multi] {
            for cell in &outcome.cells {
                let c = cell.counts(scenario);
                out.push(FftCell {
                    scenario,
                    availability: a,
                    theta_days: cell.theta_seconds / DAY,
                    shape_n: cell.shape_n,
                    fp: c.fp,
                    fp_sigma: c.fp_sigma,
                    fp_full_scale: c.fp as f64 / cfg.scale_factor,
                    tp: c.tp,
                    fn_: c.fn_,
                    precision: c.precision(),
                    recall: c.recall(),
                    analytic_expected_fp: match scenario {
                        Scenario::Multi => Some(analytic_expected_fp(&cfg, cell.theta_seconds)?),
                        Scenario::Once => None,
                    },
                });
            }
        }
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

pub fn write_fft_csv(path: &Path, cells: &[FftCell]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "scenario",
        "availability",
        "theta_days",
        "shape_n",
        "fp",
        "fp_sigma",
        "fp_full_scale",
        "tp",
        "fn",
        "precision",
        "recall",
        "analytic_expected_fp",
    ])?;
    for c in cells {
        let scenario = match c.scenario {
            Scenario::Once => "once",
            Scenario::Multi => "multi",
        };
        w.write_record([
            scenario.to_string(),
            c.availability.to_string(),
            c.theta_days.to_string(),
            format!("{:e}", c.shape_n),
            c.fp.to_string(),
            c.fp_sigma.to_string(),
            format!("{:e}", c.fp_full_scale),
            c.tp.to_string(),
            c.fn_.to_string(),
            opt(c.precision),
            opt(c.recall),
            opt(c.analytic_expected_fp),
        ])?;
    }
    w.flush()
}
