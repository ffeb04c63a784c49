use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use raysr_core::fitting::{fit_model_with, read_trials, validate, write_trials, KsOptions, TrialRecord};
use raysr_core::scene::{estimate_scene, parse_scene, sweep};
use raysr_core::synth::SyntheticDesign;
use raysr_core::{sr_monte_carlo, EvalOptions, ModelSpec, ModelVariant, OffsetMode, Region, ShapeKind, SuccessRate};
use raysr_service::AppState;

use crate::output::{self, SweepOutput};
use crate::{Cli, CliError, Command, Format};

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<ModelSpec, CliError> {
    ModelSpec::from_json(&read_text(path)?).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn load_trials(path: &Path) -> Result<Vec<TrialRecord>, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    read_trials(file).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))
        }
    }
}

fn check_variant(spec: &ModelSpec, wanted: Option<ModelVariant>) -> Result<(), CliError> {
    match wanted {
        Some(v) if v != spec.variant() => {
            Err(CliError::Invalid(format!("model variant {} does not match requested variant {v}", spec.variant())))
        }
        _ => Ok(()),
    }
}

fn preset(variant: ModelVariant) -> Result<ModelSpec, CliError> {
    ModelSpec::preset(variant).ok_or_else(|| {
        CliError::Invalid(format!(
            "variant {variant} has no shipped constants; pass a model document (--model or RAYSR_MODEL)"
        ))
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let default_model = cli.default_model;
    match cli.command {
        Command::Estimate { scene, model, out } => {
            let text = read_text(&scene)?;
            let parsed = parse_scene(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", scene.display())))?;
            // --model, then the scene's own model_path, then RAYSR_MODEL, then the preset
            let from_scene = parsed.options.model_path.as_ref().map(|p| {
                let p = PathBuf::from(p);
                if p.is_relative() {
                    scene.parent().unwrap_or(Path::new(".")).join(p)
                } else {
                    p
                }
            });
            let spec = match model.or(from_scene).or(default_model) {
                Some(path) => load_model(&path)?,
                None => preset(parsed.options.variant)?,
            };
            let report = estimate_scene(&parsed, &spec).map_err(|e| CliError::Invalid(e.to_string()))?;
            let text = match out.format.unwrap_or(Format::Json) {
                Format::Json => report.to_json(),
                Format::Table => output::report_table(&report),
                Format::Csv => output::report_csv(&report),
            };
            emit(&out.output, &text)
        }
        Command::Fit { trials, variant, diagnostics, lilliefors, out } => {
            let records = load_trials(&trials)?;
            let fit = fit_model_with(&records, variant.into(), KsOptions { lilliefors })
                .map_err(|e| CliError::Invalid(format!("{}: {e}", trials.display())))?;
            if let Some(path) = &diagnostics {
                emit(&Some(path.clone()), &fit.to_json())?;
            }
            eprintln!(
                "fit {}: {} trials, {} screened out, {} of {} cells pass KS on both axes",
                fit.spec.variant(),
                fit.trials_total,
                fit.screened_out,
                fit.normality_reports
                    .iter()
                    .filter(|c| c.x.is_some_and(|r| r.pass) && c.y.is_some_and(|r| r.pass))
                    .count(),
                fit.normality_summary.cells_tested,
            );
            let text = match out.format.unwrap_or(Format::Json) {
                Format::Json => fit.spec.to_json(),
                Format::Table => output::fit_table(&fit),
                Format::Csv => return Err(CliError::Invalid("fit supports --format json or table".into())),
            };
            emit(&out.output, &text)
        }
        Command::Validate { model, trials, out } => {
            let spec = load_model(&model)?;
            let records = load_trials(&trials)?;
            let metrics =
                validate(&spec, &records).map_err(|e| CliError::Invalid(format!("{}: {e}", trials.display())))?;
            let text = match out.format.unwrap_or(Format::Json) {
                Format::Json => metrics.to_json(),
                Format::Table => output::metrics_table(&metrics),
                Format::Csv => output::metrics_csv(&metrics),
            };
            emit(&out.output, &text)
        }
        Command::Sweep { shape, from, to, step, model, variant, amplitude, no_offset, mc_samples, seed, out } => {
            let variant = variant.map(ModelVariant::from);
            let spec = match model.or(default_model) {
                Some(path) => {
                    let spec = load_model(&path)?;
                    check_variant(&spec, variant)?;
                    spec
                }
                None => preset(variant.unwrap_or(ModelVariant::Baseline))?,
            };
            if spec.variant() == ModelVariant::WithAmplitude && amplitude.is_none() {
                return Err(CliError::Invalid("with_amplitude models need --amplitude".into()));
            }
            let opts = EvalOptions { amplitude, offset: if no_offset { OffsetMode::Zero } else { OffsetMode::Model } };
            let kind = ShapeKind::from(shape);
            let rows = sweep(&spec, kind, from, to, step, &opts).map_err(|e| CliError::Invalid(e.to_string()))?;
            let monte_carlo = match mc_samples {
                None => None,
                Some(n) => Some(
                    rows.iter()
                        .map(|r| {
                            let region = match kind {
                                ShapeKind::Disc => Region::Disc { diameter: r.w_deg },
                                ShapeKind::Square => Region::Rect { w_x: r.w_deg, w_y: r.w_deg },
                            };
                            sr_monte_carlo(&r.params, region, n, seed)
                        })
                        .collect::<Result<Vec<SuccessRate>, _>>()
                        .map_err(|e| CliError::Invalid(e.to_string()))?,
                ),
            };
            let sweep =
                SweepOutput { shape: kind, variant: spec.variant(), seed: mc_samples.map(|_| seed), rows, monte_carlo };
            let text = match out.format.unwrap_or(Format::Csv) {
                Format::Json => sweep.to_json(),
                Format::Table => sweep.table(),
                Format::Csv => sweep.csv(),
            };
            emit(&out.output, &text)
        }
        Command::Synth { model, trials_per_cell, participants, outlier_rate, seed, output } => {
            let spec = match model.or(default_model) {
                Some(path) => load_model(&path)?,
                None => ModelSpec::baseline(),
            };
            if !(0.0..=1.0).contains(&outlier_rate) || trials_per_cell < 2 || participants == 0 {
                return Err(CliError::Invalid(
                    "need --trials-per-cell >= 2, --participants >= 1 and --outlier-rate in [0, 1]".into(),
                ));
            }
            let mut constants = *spec.constants();
            if !spec.variant().uses_offset() {
                constants.e = 0.0;
                constants.f = 0.0;
            }
            let design = SyntheticDesign {
                participants,
                trials_per_cell,
                outlier_rate,
                constants,
                amplitude_constants: spec.amplitude_constants().copied(),
                ..SyntheticDesign::full_size(seed)
            };
            let data = design.generate();
            let mut buf = Vec::new();
            write_trials(&mut buf, &data.trials).map_err(|e| CliError::Io(e.to_string()))?;
            emit(&output, &String::from_utf8(buf).expect("csv is utf-8"))
        }
        Command::Serve { port, host, model } => {
            let custom = model.or(default_model).map(|p| load_model(&p)).transpose()?;
            let state = AppState::new(custom);
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .map_err(|e| CliError::Io(format!("cannot bind {host}:{port}: {e}")))?;
                let addr = listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?;
                eprintln!("serving /api/v1 on http://{addr}");
                raysr_service::serve(listener, state).await.map_err(|e| CliError::Io(e.to_string()))
            })
        }
    }
}
