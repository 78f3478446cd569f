//! Dataset generation, sample loading, model training and evaluation glue
//! shared by the CLI commands.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use faultlab_core::cnn::{cnn_train, CnnConfig, CnnModel};
use faultlab_core::eval::EvaluationReport;
use faultlab_core::fault::{generate_labeled_maps, FaultLabel};
use faultlab_core::imaging::{
    flatten_gray, flatten_rgb, rsrp_to_gray, rsrp_to_rgb, split_indices, Colormap, ColorMode,
    LabeledSample,
};
use faultlab_core::nb::nb_fit;
use faultlab_core::nef::nef_fit_classifier;
use faultlab_core::netpbm::{read_pgm, read_ppm, write_pgm, write_ppm};
use faultlab_core::persist::{read_model, write_model, Fnv64, ModelMeta, TrainedModel};
use faultlab_core::rf::rf_fit;

use crate::config::RunConfig;
use crate::manifest::{self, Manifest, ManifestRow};

/// The four trainable model kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKind {
    Nb,
    Rf,
    Cnn,
    Nef,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Nb, ModelKind::Rf, ModelKind::Cnn, ModelKind::Nef];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Nb => "nb",
            ModelKind::Rf => "rf",
            ModelKind::Cnn => "cnn",
            ModelKind::Nef => "nef",
        }
    }
}

/// Create a file that must not already exist; run directories are
/// write-once.
pub fn create_new(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cannot create directory {}", parent.display()))?;
    }
    let file = File::create_new(path)
        .with_context(|| format!("refusing to overwrite {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn manifest_path(out_dir: &Path) -> PathBuf {
    out_dir.join("manifest.csv")
}

pub fn model_path(out_dir: &Path, kind: ModelKind, color: ColorMode) -> PathBuf {
    out_dir
        .join("models")
        .join(format!("{}_{}.bin", kind.name(), color.name()))
}

/// Generate every labeled map, write PGM/PPM images and the manifest.
pub fn generate(config: &RunConfig) -> Result<usize> {
    let out_dir = &config.out_dir;
    let manifest_file = manifest_path(out_dir);
    if manifest_file.exists() {
        bail!(
            "dataset already generated: {} exists",
            manifest_file.display()
        );
    }
    let cmap = Colormap::default();
    let maps = generate_labeled_maps(&config.scenario, &config.dataset)
        .map_err(|e| anyhow!("generation failed: {e}"))?;
    let mut rows = Vec::with_capacity(maps.len());
    for (id, (fault, map)) in maps.iter().enumerate() {
        let gray = rsrp_to_gray(map, config.gray_lo_dbm, config.gray_hi_dbm)
            .map_err(|e| anyhow!("gray rendering failed: {e}"))?;
        let rgb = rsrp_to_rgb(map, config.gray_lo_dbm, config.gray_hi_dbm, &cmap)
            .map_err(|e| anyhow!("rgb rendering failed: {e}"))?;
        let gray_rel = format!("images/{id:05}_gray.pgm");
        let rgb_rel = format!("images/{id:05}_rgb.ppm");
        let mut gray_out = create_new(&out_dir.join(&gray_rel))?;
        write_pgm(&gray, &mut gray_out)?;
        gray_out.flush()?;
        let mut rgb_out = create_new(&out_dir.join(&rgb_rel))?;
        write_ppm(&rgb, &mut rgb_out)?;
        rgb_out.flush()?;
        rows.push(ManifestRow {
            sample_id: id,
            fault: fault.clone(),
            gray_path: gray_rel,
            rgb_path: rgb_rel,
        });
    }
    let mut sink = create_new(&manifest_file)?;
    sink.write_all(manifest::render(&rows).as_bytes())?;
    sink.flush()?;
    Ok(rows.len())
}

/// Fingerprint of the whole dataset: the manifest bytes followed by every
/// image file's bytes in manifest order. Trained models embed this hash so
/// evaluation can refuse a dataset the model was not fitted on.
pub fn dataset_hash(out_dir: &Path, manifest: &Manifest) -> Result<u64> {
    let mut hash = Fnv64::resume(manifest.hash);
    for row in &manifest.rows {
        for rel in [&row.gray_path, &row.rgb_path] {
            let path = out_dir.join(rel);
            let bytes = std::fs::read(&path)
                .with_context(|| format!("missing image {}", path.display()))?;
            hash.update(&bytes);
        }
    }
    Ok(hash.finish())
}

/// Load every sample of the manifest in one color mode.
pub fn load_samples(
    out_dir: &Path,
    manifest: &Manifest,
    color: ColorMode,
) -> Result<Vec<LabeledSample>> {
    let mut samples = Vec::with_capacity(manifest.rows.len());
    for row in &manifest.rows {
        let features = match color {
            ColorMode::Gray => {
                let path = out_dir.join(&row.gray_path);
                let file =
                    File::open(&path).with_context(|| format!("missing image {}", path.display()))?;
                let img = read_pgm(&mut BufReader::new(file))
                    .map_err(|e| anyhow!("{}: {e}", path.display()))?;
                flatten_gray(&img)
            }
            ColorMode::Rgb => {
                let path = out_dir.join(&row.rgb_path);
                let file =
                    File::open(&path).with_context(|| format!("missing image {}", path.display()))?;
                let img = read_ppm(&mut BufReader::new(file))
                    .map_err(|e| anyhow!("{}: {e}", path.display()))?;
                flatten_rgb(&img)
            }
        };
        samples.push(LabeledSample {
            features,
            label: row.fault.label,
            provenance: row.fault.clone(),
        });
    }
    Ok(samples)
}

/// The CNN geometry for this run and color mode.
pub fn cnn_config(config: &RunConfig, color: ColorMode) -> CnnConfig {
    CnnConfig {
        in_channels: match color {
            ColorMode::Gray => 1,
            ColorMode::Rgb => 3,
        },
        in_height: config.scenario.grid_height_px,
        in_width: config.scenario.grid_width_px,
        conv1_filters: config.cnn.conv1_filters,
        conv2_filters: config.cnn.conv2_filters,
        kernel_size: config.cnn.kernel_size,
        batch_size: config.cnn.batch_size,
        learning_rate: config.cnn.learning_rate,
        max_epochs: config.cnn.max_epochs,
        seed: config.cnn.seed,
    }
}

/// Fit one model kind on the given training samples.
pub fn fit(
    kind: ModelKind,
    config: &RunConfig,
    color: ColorMode,
    train: &[LabeledSample],
) -> Result<TrainedModel> {
    Ok(match kind {
        ModelKind::Nb => TrainedModel::Nb(nb_fit(train).map_err(|e| anyhow!("nb: {e}"))?),
        ModelKind::Rf => {
            TrainedModel::Rf(rf_fit(train, &config.rf).map_err(|e| anyhow!("rf: {e}"))?)
        }
        ModelKind::Cnn => {
            let cnn = cnn_config(config, color);
            cnn.validate().map_err(|e| anyhow!("cnn: {e}"))?;
            TrainedModel::Cnn(cnn_train(train, &cnn).map_err(|e| anyhow!("cnn: {e}"))?)
        }
        ModelKind::Nef => TrainedModel::Nef(
            nef_fit_classifier(train, &config.nef).map_err(|e| anyhow!("nef: {e}"))?,
        ),
    })
}

/// Classify one sample with any model kind.
pub fn predict(model: &TrainedModel, features: &[f64]) -> Result<FaultLabel> {
    Ok(match model {
        TrainedModel::Nb(m) => m.predict(features).map_err(|e| anyhow!("nb: {e}"))?,
        TrainedModel::Rf(m) => m.predict(features).map_err(|e| anyhow!("rf: {e}"))?,
        TrainedModel::Cnn(m) => {
            let input = CnnModel::features_to_input(&m.config, features)
                .map_err(|e| anyhow!("cnn: {e}"))?;
            m.predict(&input).map_err(|e| anyhow!("cnn: {e}"))?
        }
        TrainedModel::Nef(m) => m.predict_rate(features).map_err(|e| anyhow!("nef: {e}"))?,
    })
}

/// Evaluate a model over a sample subset.
pub fn evaluate_subset(
    model: &TrainedModel,
    color: ColorMode,
    samples: &[LabeledSample],
    indices: &[usize],
) -> Result<EvaluationReport> {
    let mut truth = Vec::with_capacity(indices.len());
    let mut predicted = Vec::with_capacity(indices.len());
    for &i in indices {
        truth.push(samples[i].label);
        predicted.push(predict(model, &samples[i].features)?);
    }
    let history = match model {
        TrainedModel::Cnn(m) => Some(m.history.clone()),
        _ => None,
    };
    EvaluationReport::from_predictions(model.kind_name(), color, &truth, &predicted, history)
        .map_err(|e| anyhow!("evaluation failed: {e}"))
}

/// Train one model on the 70% split and persist it with its provenance.
pub fn train_and_save(
    config: &RunConfig,
    kind: ModelKind,
    color: ColorMode,
) -> Result<PathBuf> {
    let manifest = manifest::read(&manifest_path(&config.out_dir))?;
    let samples = load_samples(&config.out_dir, &manifest, color)?;
    let labels: Vec<FaultLabel> = samples.iter().map(|s| s.label).collect();
    let (train_idx, _) = split_indices(&labels, config.train_fraction, config.split_seed)
        .map_err(|e| anyhow!("split: {e}"))?;
    let train: Vec<LabeledSample> = train_idx.iter().map(|&i| samples[i].clone()).collect();
    let model = fit(kind, config, color, &train)?;
    let meta = ModelMeta {
        split_seed: config.split_seed,
        manifest_hash: dataset_hash(&config.out_dir, &manifest)?,
        color_mode: color,
    };
    let path = model_path(&config.out_dir, kind, color);
    let mut sink = create_new(&path)?;
    write_model(&mut sink, &model, &meta).map_err(|e| anyhow!("write model: {e}"))?;
    sink.flush()?;
    Ok(path)
}

/// Which split a stored model is evaluated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalSplit {
    Test,
    Train,
}

/// Load a stored model, guard against stale datasets, and evaluate it on
/// the held-out split (or, explicitly allowed, the training split).
pub fn evaluate_saved(
    config: &RunConfig,
    kind: ModelKind,
    color: ColorMode,
    split: EvalSplit,
) -> Result<EvaluationReport> {
    let manifest = manifest::read(&manifest_path(&config.out_dir))?;
    let path = model_path(&config.out_dir, kind, color);
    let file = File::open(&path).with_context(|| format!("missing model {}", path.display()))?;
    let (model, meta) = read_model(&mut BufReader::new(file))
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
    if meta.manifest_hash != dataset_hash(&config.out_dir, &manifest)? {
        bail!(
            "model {} was trained on a different dataset (manifest hash mismatch)",
            path.display()
        );
    }
    if meta.color_mode != color {
        bail!("model {} was trained in {} mode", path.display(), meta.color_mode.name());
    }
    let samples = load_samples(&config.out_dir, &manifest, color)?;
    let labels: Vec<FaultLabel> = samples.iter().map(|s| s.label).collect();
    let (train_idx, test_idx) = split_indices(&labels, config.train_fraction, meta.split_seed)
        .map_err(|e| anyhow!("split: {e}"))?;
    let indices = match split {
        EvalSplit::Test => &test_idx,
        EvalSplit::Train => &train_idx,
    };
    evaluate_subset(&model, color, &samples, indices)
}

/// Train and evaluate every model in every requested color mode with one
/// shared split; returns reports in (model, color) order.
pub fn compare(config: &RunConfig) -> Result<Vec<EvaluationReport>> {
    let manifest = manifest::read(&manifest_path(&config.out_dir))?;
    let mut reports = Vec::new();
    let mut split: Option<(Vec<usize>, Vec<usize>)> = None;
    let mut per_color: Vec<(ColorMode, Vec<LabeledSample>)> = Vec::new();
    for &color in &config.color_modes {
        let samples = load_samples(&config.out_dir, &manifest, color)?;
        if split.is_none() {
            let labels: Vec<FaultLabel> = samples.iter().map(|s| s.label).collect();
            split = Some(
                split_indices(&labels, config.train_fraction, config.split_seed)
                    .map_err(|e| anyhow!("split: {e}"))?,
            );
        }
        per_color.push((color, samples));
    }
    let (train_idx, test_idx) = split.expect("at least one color mode");
    for kind in ModelKind::ALL {
        for (color, samples) in &per_color {
            let train: Vec<LabeledSample> =
                train_idx.iter().map(|&i| samples[i].clone()).collect();
            let model = fit(kind, config, *color, &train)?;
            reports.push(evaluate_subset(&model, *color, samples, &test_idx)?);
        }
    }
    Ok(reports)
}
