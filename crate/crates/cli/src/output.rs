//! Table and CSV renderings. Tables round to display precision (two
//! decimals); CSV and JSON keep full precision.

use serde::Serialize;

use raysr_core::fitting::{FitResult, ValidationMetrics};
use raysr_core::scene::{EstimateReport, SweepRow, TargetOutcome};
use raysr_core::{ModelVariant, ShapeKind, SuccessRate, Warning};

fn deg(v: f64) -> String {
    format!("{v:.2}°")
}

fn pct(p: f64) -> String {
    format!("{:.2}%", 100.0 * p)
}

fn warning_label(w: &Warning) -> String {
    match w {
        Warning::OutOfRange { w_deg, .. } => format!("out_of_range({w_deg})"),
        Warning::Grazing { view_angle_deg } => format!("grazing({view_angle_deg:.1})"),
    }
}

fn warning_list(ws: &[Warning]) -> String {
    ws.iter().map(warning_label).collect::<Vec<_>>().join(";")
}

fn shape_name(k: ShapeKind) -> &'static str {
    match k {
        ShapeKind::Disc => "disc",
        ShapeKind::Square => "square",
    }
}

/// Left-aligned columns separated by two spaces, no trailing blanks.
fn render(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            s.push_str(cell);
            if i + 1 < cells.len() {
                s.extend(std::iter::repeat_n(' ', w - cell.chars().count() + 2));
            }
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(header.to_vec());
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

pub fn report_table(report: &EstimateReport) -> String {
    let rows: Vec<Vec<String>> = report
        .targets
        .iter()
        .map(|t| match &t.outcome {
            TargetOutcome::Ok { shape, extent, success_rate, warnings, .. } => {
                let width = match shape {
                    ShapeKind::Disc => deg(extent.w_x),
                    ShapeKind::Square => format!("{} x {}", deg(extent.w_x), deg(extent.w_y)),
                };
                vec![t.id.clone(), shape_name(*shape).into(), width, pct(success_rate.value), warning_list(warnings)]
            }
            TargetOutcome::Error { error } => {
                vec![t.id.clone(), "-".into(), "-".into(), "-".into(), format!("error: {error}")]
            }
        })
        .collect();
    render(&["id", "shape", "width", "success", "notes"], &rows)
}

pub fn report_csv(report: &EstimateReport) -> String {
    let header = [
        "id",
        "status",
        "shape",
        "w_x_deg",
        "w_y_deg",
        "mu_x",
        "sigma_x",
        "sigma_y",
        "success_rate",
        "method",
        "error_bound",
        "warnings",
        "error",
    ];
    let rows: Vec<Vec<String>> = report
        .targets
        .iter()
        .map(|t| match &t.outcome {
            TargetOutcome::Ok { shape, extent, params, success_rate, warnings, .. } => vec![
                t.id.clone(),
                "ok".into(),
                shape_name(*shape).into(),
                extent.w_x.to_string(),
                extent.w_y.to_string(),
                params.mu_x.to_string(),
                params.sigma_x.to_string(),
                params.sigma_y.to_string(),
                success_rate.value.to_string(),
                method_name(success_rate),
                success_rate.error_bound.to_string(),
                warning_list(warnings),
                String::new(),
            ],
            TargetOutcome::Error { error } => {
                let mut row = vec![t.id.clone(), "error".into()];
                row.extend(std::iter::repeat_n(String::new(), 10));
                row.push(error.clone());
                row
            }
        })
        .collect();
    csv_text(&header, &rows)
}

fn method_name(sr: &SuccessRate) -> String {
    serde_json::to_value(sr.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

pub fn fit_table(fit: &FitResult) -> String {
    let k = fit.spec.constants();
    let r = &fit.regressions;
    let mut rows = vec![
        vec!["sigma_x".into(), format!("{:.4}", k.a), format!("{:.4}", k.b), format!("{:.3}", r.sigma_x.r_squared)],
        vec!["sigma_y".into(), format!("{:.4}", k.c), format!("{:.4}", k.d), format!("{:.3}", r.sigma_y.r_squared)],
    ];
    if let Some(m) = &r.mu_x {
        rows.push(vec!["mu_x".into(), format!("{:.4}", k.e), format!("{:.4}", k.f), format!("{:.3}", m.r_squared)]);
    }
    let mut out =
        format!("variant {}: {} trials, {} screened out\n", fit.spec.variant(), fit.trials_total, fit.screened_out);
    out.push_str(&render(&["parameter", "slope", "intercept", "r2"], &rows));
    if let Some(g) = fit.spec.amplitude_constants() {
        out.push_str(&format!(
            "amplitude slopes: sigma_x {:.5}  sigma_y {:.5}  mu_x {:.5}\n",
            g.sigma_x, g.sigma_y, g.mu_x
        ));
    }
    out
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.digits$}"))
}

pub fn metrics_table(m: &ValidationMetrics) -> String {
    let mut out = format!(
        "variant {}  conditions {}\nMAE {} pp  R2 {:.3}  AIC {}\nLOOCV MAE {} pp  LOOCV R2 {}\n",
        m.variant,
        m.conditions,
        format_args!("{:.2}", m.mae),
        m.r_squared,
        opt(m.aic, 2),
        opt(m.loocv_mae, 2),
        opt(m.loocv_r_squared, 3),
    );
    let rows: Vec<Vec<String>> =
        m.per_condition.iter().map(|c| vec![deg(c.w), deg(c.a), pct(c.observed_sr), pct(c.estimated_sr)]).collect();
    out.push_str(&render(&["W", "A", "observed", "estimated"], &rows));
    out
}

pub fn metrics_csv(m: &ValidationMetrics) -> String {
    let rows: Vec<Vec<String>> = m
        .per_condition
        .iter()
        .map(|c| vec![c.w.to_string(), c.a.to_string(), c.observed_sr.to_string(), c.estimated_sr.to_string()])
        .collect();
    csv_text(&["w_deg", "a_deg", "observed_sr", "estimated_sr"], &rows)
}

pub struct SweepOutput {
    pub shape: ShapeKind,
    pub variant: ModelVariant,
    pub seed: Option<u64>,
    pub rows: Vec<SweepRow>,
    pub monte_carlo: Option<Vec<SuccessRate>>,
}

#[derive(Serialize)]
struct SweepDocument<'a> {
    raysr_sweep: u32,
    shape: ShapeKind,
    variant: ModelVariant,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    rows: Vec<SweepJsonRow<'a>>,
}

#[derive(Serialize)]
struct SweepJsonRow<'a> {
    #[serde(flatten)]
    row: &'a SweepRow,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<&'a SuccessRate>,
}

impl SweepOutput {
    fn mc(&self, i: usize) -> Option<&SuccessRate> {
        self.monte_carlo.as_ref().map(|m| &m[i])
    }

    pub fn to_json(&self) -> String {
        let doc = SweepDocument {
            raysr_sweep: 1,
            shape: self.shape,
            variant: self.variant,
            seed: self.seed,
            rows: self.rows.iter().enumerate().map(|(i, row)| SweepJsonRow { row, monte_carlo: self.mc(i) }).collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("sweep serializes");
        s.push('\n');
        s
    }

    pub fn table(&self) -> String {
        let mut header = vec!["W", "success"];
        if self.monte_carlo.is_some() {
            header.push("monte_carlo");
        }
        header.push("notes");
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = vec![deg(r.w_deg), pct(r.success_rate.value)];
                if let Some(mc) = self.mc(i) {
                    row.push(format!("{} ± {}", pct(mc.value), pct(mc.error_bound)));
                }
                row.push(warning_list(&r.warnings));
                row
            })
            .collect();
        render(&header, &rows)
    }

    pub fn csv(&self) -> String {
        let mut header = vec!["w_deg", "success_rate", "mu_x", "sigma_x", "sigma_y", "method"];
        if self.monte_carlo.is_some() {
            header.extend(["mc_success_rate", "mc_error_bound"]);
        }
        header.push("warnings");
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = vec![
                    r.w_deg.to_string(),
                    r.success_rate.value.to_string(),
                    r.params.mu_x.to_string(),
                    r.params.sigma_x.to_string(),
                    r.params.sigma_y.to_string(),
                    method_name(&r.success_rate),
                ];
                if let Some(mc) = self.mc(i) {
                    row.extend([mc.value.to_string(), mc.error_bound.to_string()]);
                }
                row.push(warning_list(&r.warnings));
                row
            })
            .collect();
        csv_text(&header, &rows)
    }
}
