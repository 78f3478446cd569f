//! Flat INI-style run configuration: `[section]` headers and `key = value`
//! lines. Unknown sections, unknown keys, duplicates and type errors are all
//! rejected with file/line diagnostics. Every key has a default, so an empty
//! file is the desk-scale default run.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

use faultlab_core::fault::DatasetSpec;
use faultlab_core::imaging::{ColorMode, DEFAULT_GRAY_HI_DBM, DEFAULT_GRAY_LO_DBM};
use faultlab_core::nef::{LifParams, NefConfig};
use faultlab_core::rf::RfConfig;
use faultlab_core::scenario::{hex_sectors, HexLayout, ScenarioConfig};

/// CNN hyperparameters from the config file; the input geometry is filled
/// in per color mode at training time.
#[derive(Debug, Clone)]
pub struct CnnSettings {
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub kernel_size: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

/// Everything one pipeline run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub dataset: DatasetSpec,
    pub split_seed: u64,
    pub train_fraction: f64,
    pub gray_lo_dbm: f64,
    pub gray_hi_dbm: f64,
    pub rf: RfConfig,
    pub cnn: CnnSettings,
    pub nef: NefConfig,
    pub out_dir: PathBuf,
    pub color_modes: Vec<ColorMode>,
}

impl RunConfig {
    /// Parse a config file; missing keys fall back to the defaults.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let raw = RawConfig::parse(&text, path)?;
        build(raw, path)
    }

    /// Full validation of the assembled configuration.
    pub fn validate(&self) -> Result<()> {
        self.scenario
            .validate()
            .map_err(|e| anyhow!("scenario: {e}"))?;
        self.dataset
            .validate(&self.scenario)
            .map_err(|e| anyhow!("dataset: {e}"))?;
        if self.gray_lo_dbm >= self.gray_hi_dbm {
            bail!("imaging: gray_lo_dbm must be below gray_hi_dbm");
        }
        if !(0.0..1.0).contains(&self.train_fraction) || self.train_fraction <= 0.0 {
            bail!("split: train_fraction must lie in (0, 1)");
        }
        if self.color_modes.is_empty() {
            bail!("output: color_modes must name at least one mode");
        }
        Ok(())
    }
}

struct Entry {
    value: String,
    line: usize,
    consumed: bool,
}

struct RawConfig {
    entries: BTreeMap<(String, String), Entry>,
    path: String,
}

const SECTIONS: &[&str] = &[
    "scenario", "dataset", "split", "imaging", "rf", "cnn", "nef", "output",
];

impl RawConfig {
    fn parse(text: &str, path: &Path) -> Result<RawConfig> {
        let path_str = path.display().to_string();
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("{path_str}:{line_no}: unterminated section header"))?
                    .trim()
                    .to_string();
                if !SECTIONS.contains(&name.as_str()) {
                    bail!("{path_str}:{line_no}: unknown section [{name}]");
                }
                section = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{path_str}:{line_no}: expected `key = value`");
            };
            let section = section
                .clone()
                .ok_or_else(|| anyhow!("{path_str}:{line_no}: key outside any [section]"))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if let Some(old) = entries.insert(
                (section.clone(), key.clone()),
                Entry {
                    value,
                    line: line_no,
                    consumed: false,
                },
            ) {
                bail!(
                    "{path_str}:{line_no}: duplicate key `{key}` in [{section}] (first at line {})",
                    old.line
                );
            }
        }
        Ok(RawConfig {
            entries,
            path: path_str,
        })
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match self.entries.get_mut(&(section.to_string(), key.to_string())) {
            None => Ok(default),
            Some(entry) => {
                entry.consumed = true;
                entry.value.parse::<T>().map_err(|e| {
                    anyhow!(
                        "{}:{}: bad value for {section}.{key}: {e}",
                        self.path,
                        entry.line
                    )
                })
            }
        }
    }

    fn get_list_u32(&mut self, section: &str, key: &str) -> Result<Option<Vec<u32>>> {
        match self.entries.get_mut(&(section.to_string(), key.to_string())) {
            None => Ok(None),
            Some(entry) => {
                entry.consumed = true;
                let mut out = Vec::new();
                for part in entry.value.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    out.push(part.parse::<u32>().map_err(|e| {
                        anyhow!(
                            "{}:{}: bad value for {section}.{key}: {e}",
                            self.path,
                            entry.line
                        )
                    })?);
                }
                Ok(Some(out))
            }
        }
    }

    fn get_color_modes(&mut self, section: &str, key: &str) -> Result<Vec<ColorMode>> {
        match self.entries.get_mut(&(section.to_string(), key.to_string())) {
            None => Ok(vec![ColorMode::Gray, ColorMode::Rgb]),
            Some(entry) => {
                entry.consumed = true;
                let mut out = Vec::new();
                for part in entry.value.split(',') {
                    match part.trim() {
                        "gray" => out.push(ColorMode::Gray),
                        "rgb" => out.push(ColorMode::Rgb),
                        other => bail!(
                            "{}:{}: bad color mode `{other}` (expected gray or rgb)",
                            self.path,
                            entry.line
                        ),
                    }
                }
                Ok(out)
            }
        }
    }

    fn reject_unconsumed(&self) -> Result<()> {
        let mut leftovers: Vec<(&(String, String), &Entry)> = self
            .entries
            .iter()
            .filter(|(_, e)| !e.consumed)
            .collect();
        leftovers.sort_by_key(|(_, e)| e.line);
        if let Some(((section, key), entry)) = leftovers.first() {
            bail!(
                "{}:{}: unknown key `{key}` in [{section}]",
                self.path,
                entry.line
            );
        }
        Ok(())
    }
}

fn build(mut raw: RawConfig, _path: &Path) -> Result<RunConfig> {
    let layout = HexLayout {
        num_sites: raw.get("scenario", "num_sites", 7usize)?,
        inter_site_distance_m: raw.get("scenario", "inter_site_distance_m", 900.0)?,
        bs_height_m: raw.get("scenario", "bs_height_m", 60.0)?,
        tx_power_dbm: raw.get("scenario", "tx_power_dbm", 43.0)?,
        antenna_gain_dbi: raw.get("scenario", "antenna_gain_dbi", 18.3)?,
    };
    if layout.num_sites == 0 || layout.num_sites > 7 {
        bail!("scenario.num_sites must lie in 1..=7 (one central site plus up to six ring sites)");
    }
    let grid_width_px = raw.get("scenario", "grid_width_px", 64usize)?;
    let grid_height_px = raw.get("scenario", "grid_height_px", 64usize)?;
    let pixel_size_m = raw.get("scenario", "pixel_size_m", 50.0)?;
    let default_origin_x = -(grid_width_px as f64) * pixel_size_m / 2.0;
    let default_origin_y = -(grid_height_px as f64) * pixel_size_m / 2.0;
    let scenario = ScenarioConfig {
        sectors: hex_sectors(&layout),
        carrier_freq_mhz: raw.get("scenario", "carrier_freq_mhz", 2100.0)?,
        grid_width_px,
        grid_height_px,
        pixel_size_m,
        grid_origin_m: (
            raw.get("scenario", "grid_origin_x_m", default_origin_x)?,
            raw.get("scenario", "grid_origin_y_m", default_origin_y)?,
        ),
        pathloss_intercept_db: raw.get("scenario", "pathloss_intercept_db", 128.1)?,
        pathloss_slope: raw.get("scenario", "pathloss_slope", 37.6)?,
        shadowing_sigma_db: raw.get("scenario", "shadowing_sigma_db", 4.5)?,
        shadowing_smooth_radius_px: raw.get("scenario", "shadowing_smooth_radius_px", 10usize)?,
        rsrp_floor_dbm: raw.get("scenario", "rsrp_floor_dbm", -140.0)?,
        base_seed: raw.get("scenario", "base_seed", 1u64)?,
    };

    let all_sites: Vec<u32> = scenario.site_ids();
    let target_sites = raw
        .get_list_u32("dataset", "target_sites")?
        .unwrap_or(all_sites);
    let dataset = DatasetSpec {
        target_sites,
        normal_samples: raw.get("dataset", "normal_samples", 31usize)?,
        include_cell_outage: raw.get("dataset", "cell_outage", true)?,
        include_site_outage: raw.get("dataset", "site_outage", true)?,
        include_tx_power: raw.get("dataset", "tx_power", true)?,
        include_cio_positive: raw.get("dataset", "cio_positive", true)?,
        include_cio_negative: raw.get("dataset", "cio_negative", true)?,
        include_uptilt: raw.get("dataset", "uptilt", true)?,
        include_downtilt: raw.get("dataset", "downtilt", true)?,
        base_seed: raw.get("dataset", "base_seed", 0u64)?,
    };

    let features_per_split = raw.get("rf", "features_per_split", 0usize)?;
    let rf = RfConfig {
        n_trees: raw.get("rf", "trees", 100usize)?,
        max_depth: raw.get("rf", "max_depth", 5usize)?,
        features_per_split: if features_per_split == 0 {
            None
        } else {
            Some(features_per_split)
        },
        bootstrap: raw.get("rf", "bootstrap", true)?,
        seed: raw.get("rf", "seed", 7u64)?,
    };

    let cnn = CnnSettings {
        conv1_filters: raw.get("cnn", "conv1_filters", 8usize)?,
        conv2_filters: raw.get("cnn", "conv2_filters", 16usize)?,
        kernel_size: raw.get("cnn", "kernel_size", 3usize)?,
        batch_size: raw.get("cnn", "batch_size", 32usize)?,
        learning_rate: raw.get("cnn", "learning_rate", 0.001)?,
        max_epochs: raw.get("cnn", "max_epochs", 100usize)?,
        seed: raw.get("cnn", "seed", 3u64)?,
    };

    let nef = NefConfig {
        projection_dim: raw.get("nef", "projection_dim", 32usize)?,
        n_neurons: raw.get("nef", "neurons", 800usize)?,
        regularization: raw.get("nef", "regularization", 0.1)?,
        lif: LifParams {
            tau_rc: raw.get("nef", "tau_rc", 0.02)?,
            tau_ref: raw.get("nef", "tau_ref", 0.002)?,
        },
        synapse_tau: raw.get("nef", "synapse_tau", 0.005)?,
        seed: raw.get("nef", "seed", 5u64)?,
    };

    let config = RunConfig {
        scenario,
        dataset,
        split_seed: raw.get("split", "seed", 42u64)?,
        train_fraction: raw.get("split", "train_fraction", 0.7)?,
        gray_lo_dbm: raw.get("imaging", "gray_lo_dbm", DEFAULT_GRAY_LO_DBM)?,
        gray_hi_dbm: raw.get("imaging", "gray_hi_dbm", DEFAULT_GRAY_HI_DBM)?,
        rf,
        cnn,
        nef,
        out_dir: PathBuf::from(raw.get("output", "dir", "out".to_string())?),
        color_modes: raw.get_color_modes("output", "color_modes")?,
    };
    raw.reject_unconsumed()?;
    Ok(config)
}
