//! The diagnostics matrix over all models and sizes.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cli::config::{ExperimentConfig, GridSpec, ModelKind, OutputSpec, XMax};
use crate::cli::experiment::evaluate;
use crate::error::Result;
use crate::models::combinatorial::double_center;
use crate::rng::worker_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SuiteSize {
    Smoke,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuitePoint {
    pub n: u64,
    pub fitted_constant: f64,
    #[serde(default)]
    pub mgf_c1: Option<f64>,
    #[serde(default)]
    pub tail_c2: Option<f64>,
    /// `sup_{x ≤ 1} |ratio − 1|`
    pub sup_deviation: f64,
    pub rate: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub model: String,
    pub points: Vec<SuitePoint>,
    /// Fitted constants satisfy `C_next ≤ 2 C_prev`.
    pub stable: bool,
    pub lemma_stable: bool,
    /// `sup_{x ≤ 1}|ratio − 1| ≤ 5·rate` at the largest size.
    pub sup_bound: bool,
    #[serde(default)]
    pub error: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub size: SuiteSize,
    pub seed: u64,
    pub entries: Vec<SuiteEntry>,
    pub pass: bool,
}

/// `next ≤ 2·prev` along the sequence, all values finite.
pub fn factor_two_stable(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite()) && values.windows(2).all(|w| w[1] <= 2.0 * w[0])
}

struct Member {
    label: String,
    configs: Vec<ExperimentConfig>,
}

fn config(model: ModelKind, params: serde_json::Value) -> ExperimentConfig {
    ExperimentConfig {
        model,
        model_params: params,
        grid: GridSpec {
            x_max: XMax::Auto,
            points: 41,
        },
        mc: None,
        output: OutputSpec::default(),
        workers: None,
        base_dir: Default::default(),
    }
}

/// Doubly centered array with entries drawn uniformly from `[−1, 1]`.
pub fn random_array(seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut rng = worker_rng(seed, n);
    let raw: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    double_center(&raw)
}

fn members(size: SuiteSize, seed: u64) -> Vec<Member> {
    let full = size == SuiteSize::Full;
    let pick = |v: &[u64]| -> Vec<u64> {
        if full {
            v.to_vec()
        } else {
            v[..2].to_vec()
        }
    };
    let mut out = Vec::new();
    out.push(Member {
        label: "antivoter".into(),
        configs: pick(&[100, 1000, 10000])
            .into_iter()
            .map(|n| config(ModelKind::Antivoter, json!({ "n": n })))
            .collect(),
    });
    for system in ["binary-expansion", "reflected-extreme"] {
        out.push(Member {
            label: format!("binarycode/{system}"),
            configs: pick(&[10, 14, 20])
                .into_iter()
                .map(|k| config(ModelKind::Binarycode, json!({ "n": (1u64 << k) - 2, "system": system })))
                .collect(),
        });
    }
    for (label, beta, sign) in [("curieweiss/case1", 0.5, None), ("curieweiss/case2+", 1.5, Some("+"))] {
        out.push(Member {
            label: label.into(),
            configs: pick(&[1000, 10000, 100000])
                .into_iter()
                .map(|n| {
                    let mut p = json!({ "n": n, "beta": beta, "h": 0.0 });
                    if let Some(s) = sign {
                        p["sign"] = json!(s);
                    }
                    config(ModelKind::Curieweiss, p)
                })
                .collect(),
        });
    }
    out.push(Member {
        label: "independent/rademacher".into(),
        configs: pick(&[100, 400, 1600])
            .into_iter()
            .map(|n| config(ModelKind::Independent, json!({ "rademacher": n })))
            .collect(),
    });
    let sizes: Vec<usize> = if full { (5..=9).collect() } else { vec![5, 6, 7] };
    out.push(Member {
        label: "combinatorial".into(),
        configs: sizes
            .into_iter()
            .map(|n| config(ModelKind::Combinatorial, json!({ "array": random_array(seed, n) })))
            .collect(),
    });
    out
}

/// Runs the matrix, writing `summary.json` and one table per point into
/// `out_dir`.
pub fn run_suite(size: SuiteSize, seed: u64, out_dir: &Path) -> Result<SuiteSummary> {
    let tables = out_dir.join("tables");
    std::fs::create_dir_all(&tables)?;
    let mut entries = Vec::new();
    for member in members(size, seed) {
        let mut points = Vec::new();
        let mut error = None;
        for cfg in &member.configs {
            match evaluate(cfg, None) {
                Ok(o) => {
                    let file = format!("{}_{}.csv", member.label.replace(['/', '+'], "_"), o.report.n);
                    std::fs::write(tables.join(file), o.table.to_csv())?;
                    let rate = o.report.extras.get("rate").copied().unwrap_or(f64::NAN);
                    points.push(SuitePoint {
                        n: o.report.n,
                        fitted_constant: o.report.fitted_constant,
                        mgf_c1: o.report.extras.get("mgf_c1").copied(),
                        tail_c2: o.report.extras.get("tail_c2").copied(),
                        sup_deviation: o.table.max_abs_deviation(1.0),
                        rate,
                        pass: o.report.pass,
                    });
                }
                Err(e) => {
                    error = Some(e.to_string());
                    break;
                }
            }
        }
        let fitted: Vec<f64> = points.iter().map(|p| p.fitted_constant).collect();
        let stable = factor_two_stable(&fitted);
        let series = |f: fn(&SuitePoint) -> Option<f64>| -> bool {
            let v: Option<Vec<f64>> = points.iter().map(f).collect();
            v.is_some_and(|v| factor_two_stable(&v))
        };
        let lemma_stable = series(|p| p.mgf_c1) && series(|p| p.tail_c2);
        let sup_bound = points.last().is_some_and(|p| p.sup_deviation <= 5.0 * p.rate);
        let pass = error.is_none() && stable && sup_bound && points.iter().all(|p| p.pass);
        entries.push(SuiteEntry {
            model: member.label,
            points,
            stable,
            lemma_stable,
            sup_bound,
            error,
            pass,
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    let summary = SuiteSummary {
        size,
        seed,
        entries,
        pass,
    };
    std::fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}
