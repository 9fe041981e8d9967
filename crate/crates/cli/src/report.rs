//! JSON report assembly. Rerunning with an identical (config, seed) must
//! reproduce every record bit-identically except the wall-clock fields
//! (`runtime_ms` and the aggregate runtime).

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm_certificate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sin_theta_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misclassification: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detect_yes: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    pub runtime_ms: f64,
}

impl TrialRecord {
    pub fn new(trial: usize, seed: u64) -> Self {
        TrialRecord {
            trial,
            seed,
            outcome: "solved".into(),
            objective: None,
            residual: None,
            relative_error: None,
            norm_certificate: None,
            sin_theta_sq: None,
            mean_error: None,
            misclassification: None,
            detect_yes: None,
            rank: None,
            runtime_ms: 0.0,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub library_version: String,
    pub task: String,
    pub seed: u64,
    pub config: Value,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Value,
    pub total_runtime_ms: f64,
}

/// Aggregates the numeric fields across trials (mean / min / max), plus
/// outcome counts.
pub fn aggregate(trials: &[TrialRecord]) -> Value {
    fn stats(vals: Vec<f64>) -> Option<Value> {
        if vals.is_empty() {
            return None;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some(serde_json::json!({"mean": mean, "min": min, "max": max}))
    }
    let mut out = serde_json::Map::new();
    let solved = trials.iter().filter(|t| t.outcome == "solved").count();
    out.insert("trials".into(), Value::from(trials.len()));
    out.insert("solved".into(), Value::from(solved));
    out.insert("bad_input".into(), Value::from(trials.len() - solved));
    let fields: [(&str, fn(&TrialRecord) -> Option<f64>); 7] = [
        ("objective", |t| t.objective),
        ("residual", |t| t.residual),
        ("relative_error", |t| t.relative_error),
        ("norm_certificate", |t| t.norm_certificate),
        ("sin_theta_sq", |t| t.sin_theta_sq),
        ("mean_error", |t| t.mean_error),
        ("misclassification", |t| t.misclassification),
    ];
    for (name, get) in fields {
        if let Some(s) = stats(trials.iter().filter_map(get).collect()) {
            out.insert(name.into(), s);
        }
    }
    let yes = trials.iter().filter(|t| t.detect_yes == Some(true)).count();
    if trials.iter().any(|t| t.detect_yes.is_some()) {
        out.insert("yes_rate".into(), Value::from(yes as f64 / trials.len() as f64));
    }
    Value::Object(out)
}

/// Long-format CSV (one row per trial and metric) for plotting.
pub fn long_format_csv(trials: &[TrialRecord]) -> String {
    let mut out = String::from("trial,seed,metric,value\n");
    for t in trials {
        let mut push = |metric: &str, v: f64| {
            out.push_str(&format!("{},{},{},{:?}\n", t.trial, t.seed, metric, v));
        };
        if let Some(v) = t.objective {
            push("objective", v);
        }
        if let Some(v) = t.residual {
            push("residual", v);
        }
        if let Some(v) = t.relative_error {
            push("relative_error", v);
        }
        if let Some(v) = t.norm_certificate {
            push("norm_certificate", v);
        }
        if let Some(v) = t.sin_theta_sq {
            push("sin_theta_sq", v);
        }
        if let Some(v) = t.mean_error {
            push("mean_error", v);
        }
        if let Some(v) = t.misclassification {
            push("misclassification", v);
        }
        if let Some(v) = t.detect_yes {
            push("detect_yes", if v { 1.0 } else { 0.0 });
        }
    }
    out
}
