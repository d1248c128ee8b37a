use std::io::Write;
use std::path::{Path, PathBuf};

use diner_core::lensless::{
    measurement_psnr, pearson, reconstruct, simulate, synthetic_phantom, MeasurementSet,
    OpticsConfig,
};
use diner_core::numerics::{ComplexGrid, Grid};
use diner_core::spectral::{band_ratios, extract_learned_inr, SpectrumReport};
use diner_core::training::{
    fit, invariance_report, Arrangement, InvarianceReport, Model, SampleSet, TrainConfig,
};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, ModelKind};
use crate::cli::{
    FitArgs, InvarianceArgs, OpticsArgs, ReconstructArgs, SimulateArgs, SpectrumArgs,
};
use crate::config::{require_path, resolve_train, BackboneKind, ModelChoice};
use crate::error::{CliError, Result};
use crate::fsutil::write_atomic;
use crate::imageio::{
    read_image, read_json, read_signal, write_image_pair, write_json, write_pfm, write_video,
};

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

/// Checks that `dir` exists as a directory or can be created, without
/// creating anything.
fn check_output_dir(dir: &Path) -> Result<()> {
    let mut probe = dir;
    loop {
        match std::fs::metadata(probe) {
            Ok(m) if m.is_dir() => {
                if m.permissions().readonly() {
                    return Err(CliError::io(
                        probe,
                        std::io::Error::new(
                            std::io::ErrorKind::PermissionDenied,
                            "directory is read-only",
                        ),
                    ));
                }
                return Ok(());
            }
            Ok(_) => {
                return Err(CliError::io(
                    probe,
                    std::io::Error::new(
                        std::io::ErrorKind::NotADirectory,
                        "output path is not a directory",
                    ),
                ))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => match probe.parent() {
                Some(p) if !p.as_os_str().is_empty() => probe = p,
                _ => return Ok(()),
            },
            Err(e) => return Err(CliError::io(probe, e)),
        }
    }
}

fn create_output_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |f| f.write_all(text.as_bytes()))
}

/// JSON to `path`, or to stdout when `None`.
fn emit<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    match path {
        Some(p) => write_json(p, value),
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(value).expect("report serializes")
            );
            Ok(())
        }
    }
}

fn model_output(model: &Model, shape: &[usize], channels: usize) -> Result<Grid> {
    let out = model.predict(shape)?;
    Ok(Grid::new(shape.to_vec(), channels, out.into_vec())?)
}

#[derive(Debug, Serialize)]
struct FitSummary {
    final_psnr_db: f64,
    epochs: usize,
    parameters: usize,
    table_rows: usize,
    outputs: Vec<PathBuf>,
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let cfg = args.run.merged(&args.input, &args.out)?;
    let input = require_path(&cfg.input, "--input")?;
    let out = require_path(&cfg.out, "--out")?;
    let choice = ModelChoice::resolve(BackboneKind::Mlp, &cfg.model);
    let base = TrainConfig {
        use_table: false,
        ..TrainConfig::for_activation(choice.activation())
    };
    let train = resolve_train(base, &cfg.train)?;
    check_output_dir(&out)?;
    let signal = read_signal(&input)?;
    for w in choice.warnings() {
        warn(&w);
    }

    let shape = signal.shape().to_vec();
    let channels = signal.channels();
    let spec = choice.spec(shape.len(), channels);
    let data = SampleSet::new(signal);
    let mut model = Model::init(&spec, &shape, &train)?;
    let log = fit(&mut model, &data, &train)?;
    let recon = model_output(&model, &shape, channels)?;

    create_output_dir(&out)?;
    let mut outputs = vec![out.join("model.dinr"), out.join("metrics.csv")];
    let ck = Checkpoint {
        kind: ModelKind::Fit,
        spec,
        shape: shape.clone(),
        train: train.clone(),
        epoch: train.epochs,
        model,
    };
    ck.save(&outputs[0])?;
    write_text(&outputs[1], &log.to_csv())?;
    if shape.len() == 3 {
        outputs.push(write_video(&out, "reconstruction", &recon)?);
    } else {
        write_image_pair(&out, "reconstruction", &recon)?;
        let ext = if channels == 1 { "pgm" } else { "ppm" };
        outputs.push(out.join("reconstruction.pfm"));
        outputs.push(out.join(format!("reconstruction.{ext}")));
    }
    emit(
        None,
        &FitSummary {
            final_psnr_db: log.final_psnr(),
            epochs: train.epochs,
            parameters: ck.model.backbone.param_count(),
            table_rows: ck.model.table.as_ref().map_or(0, |t| t.len()),
            outputs,
        },
    )
}

#[derive(Debug, Serialize)]
struct InvarianceOutput {
    #[serde(flatten)]
    report: InvarianceReport,
    tolerance_db: f64,
    pass: bool,
}

pub fn cmd_invariance(args: &InvarianceArgs) -> Result<()> {
    let cfg = args.run.merged(&args.input, &None)?;
    let input = require_path(&cfg.input, "--input")?;
    let choice = ModelChoice::resolve(BackboneKind::Mlp, &cfg.model);
    let base = TrainConfig::for_activation(choice.activation());
    let train = resolve_train(base, &cfg.train)?;
    if !train.use_table {
        return Err(CliError::Usage(
            "invariance needs the coordinate table".into(),
        ));
    }
    if args.tolerance_db.is_nan() || args.tolerance_db < 0.0 {
        return Err(CliError::Usage(format!(
            "--tolerance-db must be >= 0, got {}",
            args.tolerance_db
        )));
    }
    let orders = args
        .orders
        .split(',')
        .map(|s| Arrangement::parse(s, train.seed))
        .collect::<diner_core::Result<Vec<_>>>()?;
    if let Some(p) = &args.report {
        check_output_dir(p.parent().unwrap_or(Path::new(".")))?;
    }
    let signal = read_signal(&input)?;
    for w in choice.warnings() {
        warn(&w);
    }
    let spec = choice.spec(signal.ndim(), signal.channels());
    let report = invariance_report(&SampleSet::new(signal), &spec, &train, &orders)?;
    let gap = report.max_gap_db;
    // Strict comparison: a zero tolerance is never met.
    let pass = gap < args.tolerance_db;
    emit(
        args.report.as_deref(),
        &InvarianceOutput {
            report,
            tolerance_db: args.tolerance_db,
            pass,
        },
    )?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Tolerance {
            gap_db: gap,
            tolerance_db: args.tolerance_db,
        })
    }
}

#[derive(Debug, Serialize)]
struct SpectrumOutput {
    input: SpectrumReport,
    learned_inr: Option<SpectrumReport>,
}

pub fn cmd_spectrum(args: &SpectrumArgs) -> Result<()> {
    let img = read_image(&args.input)?;
    let ck = args
        .checkpoint
        .as_deref()
        .map(Checkpoint::load)
        .transpose()?;
    let input = band_ratios(&img, args.bands)?;
    let learned_inr = match ck {
        Some(ck) => {
            let path = args.checkpoint.as_deref().unwrap();
            if ck.kind != ModelKind::Fit || ck.shape.len() != 2 {
                return Err(CliError::format(path, "expected a 2D image checkpoint"));
            }
            let table = ck
                .model
                .table
                .as_ref()
                .ok_or_else(|| CliError::format(path, "checkpoint has no coordinate table"))?;
            let inr = extract_learned_inr(&ck.model.backbone, table, &ck.shape)?;
            Some(band_ratios(&inr, args.bands)?)
        }
        None => None,
    };
    emit(
        args.report.as_deref(),
        &SpectrumOutput { input, learned_inr },
    )
}

/// Written next to the intensity images by `lensless simulate`. Paths are
/// relative to the manifest; all lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementManifest {
    pub lambda_m: f64,
    pub pitch_m: f64,
    pub heights_m: Vec<f64>,
    pub files: Vec<PathBuf>,
}

fn optics_from(args: &OpticsArgs) -> Result<OpticsConfig> {
    let d = OpticsConfig::synthetic();
    Ok(OpticsConfig::new(
        args.wavelength.unwrap_or(d.wavelength),
        args.pitch.unwrap_or(d.pixel_pitch),
        args.heights.clone().unwrap_or(d.heights),
    )?)
}

fn single_channel(path: &Path) -> Result<Grid> {
    let g = read_image(path)?;
    if g.channels() != 1 {
        return Err(CliError::format(path, "expected a single-channel image"));
    }
    Ok(g)
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    manifest: PathBuf,
    heights_m: Vec<f64>,
    extent: (usize, usize),
    peak_intensity: f64,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let optics = optics_from(&args.optics)?;
    check_output_dir(&args.out)?;
    let object = match &args.amplitude {
        Some(a) => {
            let amp = single_channel(a)?;
            let phase = match &args.phase {
                Some(p) => {
                    let ph = single_channel(p)?;
                    if !ph.same_layout(&amp) {
                        return Err(CliError::format(p, "phase and amplitude differ in size"));
                    }
                    ph.into_vec()
                }
                None => vec![0.0; amp.len()],
            };
            ComplexGrid::from_polar(amp.shape()[0], amp.shape()[1], amp.as_slice(), &phase)?
        }
        None => synthetic_phantom(args.size),
    };
    let meas = simulate(&object, &optics)?;

    create_output_dir(&args.out)?;
    let (h, w) = (object.height(), object.width());
    write_pfm(
        &args.out.join("object_amplitude.pfm"),
        &Grid::new(vec![h, w], 1, object.amplitude())?,
    )?;
    write_pfm(
        &args.out.join("object_phase.pfm"),
        &Grid::new(vec![h, w], 1, object.phase())?,
    )?;
    let mut files = Vec::new();
    for (i, g) in meas.intensities().iter().enumerate() {
        let name = PathBuf::from(format!("height_{i:03}.pfm"));
        write_pfm(&args.out.join(&name), g)?;
        files.push(name);
    }
    let manifest = args.out.join("measurements.json");
    write_json(
        &manifest,
        &MeasurementManifest {
            lambda_m: optics.wavelength,
            pitch_m: optics.pixel_pitch,
            heights_m: optics.heights.clone(),
            files,
        },
    )?;
    emit(
        None,
        &SimulateSummary {
            manifest,
            heights_m: optics.heights,
            extent: meas.extent(),
            peak_intensity: meas.peak(),
        },
    )
}

pub fn read_measurements(path: &Path) -> Result<(MeasurementSet, OpticsConfig)> {
    let m: MeasurementManifest = read_json(path)?;
    if m.files.len() != m.heights_m.len() {
        return Err(CliError::format(
            path,
            "files and heights_m differ in length",
        ));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let images = m
        .files
        .iter()
        .map(|f| single_channel(&dir.join(f)))
        .collect::<Result<Vec<_>>>()?;
    let optics = OpticsConfig::new(m.lambda_m, m.pitch_m, m.heights_m.clone())?;
    Ok((MeasurementSet::new(m.heights_m, images)?, optics))
}

#[derive(Debug, Serialize)]
struct ReconstructSummary {
    measurement_psnr_db: f64,
    amplitude_correlation: Option<f64>,
    epochs: usize,
    warnings: Vec<String>,
    outputs: Vec<PathBuf>,
}

pub fn cmd_reconstruct(args: &ReconstructArgs) -> Result<()> {
    let cfg = args.run.merged(&args.measurements, &args.out)?;
    let manifest = require_path(&cfg.input, "--measurements")?;
    let out = require_path(&cfg.out, "--out")?;
    let choice = ModelChoice::resolve(BackboneKind::Siren, &cfg.model);
    let train = resolve_train(TrainConfig::for_activation(choice.activation()), &cfg.train)?;
    check_output_dir(&out)?;
    let (meas, optics) = read_measurements(&manifest)?;
    let truth = args
        .truth_amplitude
        .as_deref()
        .map(single_channel)
        .transpose()?;
    for w in choice.warnings() {
        warn(&w);
    }

    let spec = choice.spec(2, 2);
    let rec = reconstruct(&meas, &optics, &spec, &train)?;
    for w in &rec.warnings {
        warn(w);
    }
    let predicted = simulate(&rec.field, &optics)?;
    let measurement_psnr_db = measurement_psnr(&predicted, &meas)?;
    let amplitude = rec.field.amplitude();
    let amplitude_correlation = match &truth {
        Some(t) if t.len() == amplitude.len() => Some(pearson(&amplitude, t.as_slice())),
        Some(_) => {
            return Err(CliError::format(
                args.truth_amplitude.as_deref().unwrap(),
                "truth amplitude differs in size from the measurements",
            ))
        }
        None => None,
    };

    let (h, w) = meas.extent();
    create_output_dir(&out)?;
    write_image_pair(&out, "amplitude", &Grid::new(vec![h, w], 1, amplitude)?)?;
    write_pfm(
        &out.join("phase.pfm"),
        &Grid::new(vec![h, w], 1, rec.field.phase())?,
    )?;
    write_text(&out.join("metrics.csv"), &rec.log.to_csv())?;
    let ck = Checkpoint {
        kind: ModelKind::Lensless,
        spec,
        shape: vec![h, w],
        train: train.clone(),
        epoch: train.epochs,
        model: rec.model,
    };
    ck.save(&out.join("model.dinr"))?;
    let outputs = [
        "amplitude.pfm",
        "amplitude.pgm",
        "phase.pfm",
        "metrics.csv",
        "model.dinr",
    ]
    .iter()
    .map(|n| out.join(n))
    .collect();
    emit(
        None,
        &ReconstructSummary {
            measurement_psnr_db,
            amplitude_correlation,
            epochs: train.epochs,
            warnings: rec.warnings,
            outputs,
        },
    )
}
