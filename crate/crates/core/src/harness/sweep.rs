use std::path::Path;

use serde::Serialize;

use super::config::{validate_sweep, ExperimentConfig, SweepAxis, SweepSpec};
use super::output::{csv_string, format_float, json_string, write_atomic, write_report};
use super::run::{run, RunReport};
use crate::error::{Error, Result};
use crate::functionals::delta_lambda;

/// Values at or below this are treated as zero when taking logarithms.
pub const DEGENERATE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    #[serde(rename = "N")]
    pub particles: usize,
    pub beta: f64,
    pub lambda: f64,
    pub delta_lambda: Option<f64>,
    pub status: &'static str,
    pub reason: Option<String>,
    pub alpha_t_star: Option<f64>,
    pub opnorm_t_star: Option<f64>,
    pub trace_t_star: Option<f64>,
    pub c_v: Option<f64>,
    pub lemma_constant: Option<f64>,
}

/// Least-squares line through `(log x, log y)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub points: usize,
    pub degenerate: bool,
}

impl LogLogFit {
    pub fn fit(x: &[f64], y: &[f64]) -> Self {
        let points = x.len().min(y.len());
        let degenerate = LogLogFit { slope: None, intercept: None, points, degenerate: true };
        if points < 2 || y.iter().any(|v| !(*v > DEGENERATE_FLOOR)) || x.iter().any(|v| !(*v > 0.0)) {
            return degenerate;
        }
        let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let n = points as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
        if sxx <= 0.0 {
            return degenerate;
        }
        let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        LogLogFit { slope: Some(slope), intercept: Some(my - slope * mx), points, degenerate: false }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub t_star: f64,
    pub rows: Vec<SweepRow>,
    /// `log α(t*)` against `log N`.
    pub alpha_fit: LogLogFit,
    /// `log ‖μ - |φ⟩⟨φ|‖_op (t*)` against `log N`.
    pub xi_fit: LogLogFit,
    /// Whether `α(t*)` is non-increasing along increasing `N` (N sweeps only).
    pub alpha_non_increasing: Option<bool>,
}

pub struct SweepResult {
    pub summary: SweepSummary,
    pub reports: Vec<Option<RunReport>>,
}

fn run_dir_name(axis: SweepAxis, value: f64) -> String {
    format!("{}={}", axis.name(), value)
}

/// Runs every sweep point (concurrently), skipping and recording points that
/// fail validation or abort.
pub fn sweep(base: &ExperimentConfig, spec: &SweepSpec) -> Result<SweepResult> {
    validate_sweep(spec)?;
    let t_star = base.t_star();
    let configs: Vec<Result<ExperimentConfig>> = spec
        .values
        .iter()
        .map(|v| {
            let c = base.with_axis(spec.axis, *v)?;
            c.validate()?;
            Ok(c)
        })
        .collect();
    let outcomes: Vec<Result<RunReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| {
                scope.spawn(move || match c {
                    Ok(c) => run(c),
                    Err(e) => Err(Error::InvalidParameter(e.to_string())),
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut reports = Vec::with_capacity(outcomes.len());
    for ((value, cfg), outcome) in spec.values.iter().zip(&configs).zip(outcomes) {
        let cfg_ref = cfg.as_ref().ok();
        let (particles, beta, lambda) = match cfg_ref {
            Some(c) => (c.particles, c.beta, c.lambda),
            None => match base.with_axis(spec.axis, *value) {
                Ok(c) => (c.particles, c.beta, c.lambda),
                Err(_) => (base.particles, base.beta, base.lambda),
            },
        };
        let mut row = SweepRow {
            value: *value,
            particles,
            beta,
            lambda,
            delta_lambda: delta_lambda(lambda, beta).ok(),
            status: "ok",
            reason: None,
            alpha_t_star: None,
            opnorm_t_star: None,
            trace_t_star: None,
            c_v: None,
            lemma_constant: None,
        };
        match outcome {
            Ok(report) => {
                row.alpha_t_star = Some(report.interpolate(t_star, |r| r.alpha));
                row.opnorm_t_star = Some(report.interpolate(t_star, |r| r.opnorm_dist));
                row.trace_t_star = Some(report.interpolate(t_star, |r| r.trace_dist));
                row.c_v = Some(report.fit.c_v);
                row.lemma_constant = Some(report.fit.lemma_constant);
                reports.push(Some(report));
            }
            Err(e) => {
                row.status = if cfg_ref.is_some() { "failed" } else { "skipped" };
                row.reason = Some(e.to_string());
                reports.push(None);
            }
        }
        rows.push(row);
    }

    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.status == "ok").collect();
    let ns: Vec<f64> = ok.iter().map(|r| r.particles as f64).collect();
    let alphas: Vec<f64> = ok.iter().map(|r| r.alpha_t_star.unwrap_or(f64::NAN)).collect();
    let opnorms: Vec<f64> = ok.iter().map(|r| r.opnorm_t_star.unwrap_or(f64::NAN)).collect();
    let alpha_non_increasing = (spec.axis == SweepAxis::Particles).then(|| {
        let mut pairs: Vec<(usize, f64)> = ok.iter().map(|r| (r.particles, r.alpha_t_star.unwrap_or(f64::NAN))).collect();
        pairs.sort_by_key(|p| p.0);
        pairs.windows(2).all(|w| w[1].1 <= w[0].1)
    });
    let summary = SweepSummary {
        axis: spec.axis,
        values: spec.values.clone(),
        t_star,
        alpha_fit: LogLogFit::fit(&ns, &alphas),
        xi_fit: LogLogFit::fit(&ns, &opnorms),
        alpha_non_increasing,
        rows,
    };
    Ok(SweepResult { summary, reports })
}

const SUMMARY_COLUMNS: [&str; 12] = [
    "value",
    "N",
    "beta",
    "lambda",
    "delta_lambda",
    "status",
    "alpha_t_star",
    "opnorm_t_star",
    "trace_t_star",
    "c_v",
    "lemma_constant",
    "reason",
];

pub fn summary_csv(summary: &SweepSummary) -> String {
    let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
    csv_string(
        &SUMMARY_COLUMNS,
        summary.rows.iter().map(|r| {
            vec![
                format_float(r.value),
                r.particles.to_string(),
                format_float(r.beta),
                format_float(r.lambda),
                opt(r.delta_lambda),
                r.status.to_string(),
                opt(r.alpha_t_star),
                opt(r.opnorm_t_star),
                opt(r.trace_t_star),
                opt(r.c_v),
                opt(r.lemma_constant),
                r.reason.as_deref().unwrap_or("").replace([',', '\n'], ";"),
            ]
        }),
    )
}

/// Per-run subdirectories plus `summary.csv` and `summary.json`.
pub fn write_sweep(dir: &Path, result: &SweepResult) -> Result<()> {
    for (row, report) in result.summary.rows.iter().zip(&result.reports) {
        if let Some(report) = report {
            write_report(&dir.join(run_dir_name(result.summary.axis, row.value)), report)?;
        }
    }
    write_atomic(&dir.join("summary.csv"), summary_csv(&result.summary).as_bytes())?;
    write_atomic(&dir.join("summary.json"), json_string(&result.summary).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
N = 2
M = 8
L = 8.0
beta = 0.2
lambda = 0.3
dt = 0.01
steps = 20
sample_every = 5

[interaction]
shape = "box"
amplitude = 1.0
radius = 1.0
"#;

    #[test]
    fn loglog_fit_recovers_power_law() {
        let x = [2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 0.7 * v.powf(-0.4)).collect();
        let f = LogLogFit::fit(&x, &y);
        assert!((f.slope.unwrap() + 0.4).abs() < 1e-12);
        assert!(LogLogFit::fit(&x, &[0.0; 4]).degenerate);
        assert!(LogLogFit::fit(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).degenerate);
    }

    #[test]
    fn free_sweep_is_degenerate() {
        let base = ExperimentConfig::from_toml_str(BASE, &["interaction.amplitude=0.0".into()]).unwrap();
        let spec = SweepSpec { axis: SweepAxis::Particles, values: vec![2.0, 3.0, 4.0] };
        let r = sweep(&base, &spec).unwrap();
        assert!(r.summary.alpha_fit.degenerate);
        assert!(r.summary.rows.iter().all(|row| row.status == "ok"));
    }

    #[test]
    fn lambda_sweep_reports_delta() {
        let base = ExperimentConfig::from_toml_str(BASE, &[]).unwrap();
        let spec = SweepSpec { axis: SweepAxis::Lambda, values: vec![0.2, 0.5, 0.8] };
        let r = sweep(&base, &spec).unwrap();
        for row in &r.summary.rows {
            assert_eq!(row.delta_lambda, Some(delta_lambda(row.value, 0.2).unwrap()));
        }
        assert!(r.summary.alpha_non_increasing.is_none());
    }

    #[test]
    fn guard_violations_are_skipped() {
        let base = ExperimentConfig::from_toml_str(BASE, &[]).unwrap();
        let spec = SweepSpec { axis: SweepAxis::Particles, values: vec![2.0, 3.0, 20.0] };
        let r = sweep(&base, &spec).unwrap();
        assert_eq!(r.summary.rows[2].status, "skipped");
        assert!(r.summary.rows[2].reason.as_ref().unwrap().contains("2^27"));
        assert!(r.reports[2].is_none());
        let short = SweepSpec { axis: SweepAxis::Particles, values: vec![2.0, 3.0] };
        assert!(sweep(&base, &short).is_err());
    }
}
