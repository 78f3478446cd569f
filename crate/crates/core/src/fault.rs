//! Fault injection: labeled single-fault perturbations of a scenario and the
//! deterministic enumeration of the synthetic dataset.
//!
//! One fault at a time is applied to one target site (one sector for a cell
//! outage); every other sector is left untouched. The enumeration order and
//! per-instance seeds are fixed, so a dataset is a pure function of the
//! scenario and the dataset spec.

use crate::error::{Error, Result};
use crate::scenario::{RsrpMap, ScenarioConfig};

/// The eight dataset classes. Integer codes 0-7 in this order are a
/// serialization contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum FaultLabel {
    Normal = 0,
    CellOutage = 1,
    SiteOutage = 2,
    TxPower = 3,
    CioPositive = 4,
    CioNegative = 5,
    AntennaUptilt = 6,
    AntennaDowntilt = 7,
}

/// Number of classes.
pub const NUM_CLASSES: usize = 8;

impl FaultLabel {
    pub const ALL: [FaultLabel; NUM_CLASSES] = [
        FaultLabel::Normal,
        FaultLabel::CellOutage,
        FaultLabel::SiteOutage,
        FaultLabel::TxPower,
        FaultLabel::CioPositive,
        FaultLabel::CioNegative,
        FaultLabel::AntennaUptilt,
        FaultLabel::AntennaDowntilt,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<FaultLabel> {
        FaultLabel::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::invalid(format!("unknown fault label code {code}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultLabel::Normal => "normal",
            FaultLabel::CellOutage => "cell_outage",
            FaultLabel::SiteOutage => "site_outage",
            FaultLabel::TxPower => "tx_power",
            FaultLabel::CioPositive => "cio_positive",
            FaultLabel::CioNegative => "cio_negative",
            FaultLabel::AntennaUptilt => "antenna_uptilt",
            FaultLabel::AntennaDowntilt => "antenna_downtilt",
        }
    }
}

/// Faulty transmit power sweep, dBm (default is 43).
pub const TX_POWER_FAULT_RANGE_DBM: std::ops::RangeInclusive<i64> = 25..=35;
/// CIO fault magnitudes, dB.
pub const CIO_FAULT_DB: f64 = 10.0;
/// Tilt fault sweep magnitude, degrees.
pub const TILT_FAULT_MAX_DEG: i64 = 25;

/// One labeled perturbation of the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultInstance {
    pub label: FaultLabel,
    /// Target site id; ignored for Normal.
    pub target_site: u32,
    /// Target sector within the site; used only by CellOutage.
    pub target_sector: u8,
    /// dBm for TxPower, dB for CIO faults, degrees for tilt faults;
    /// unused otherwise.
    pub parameter_value: f64,
    /// Seed of the shadowing sample drawn for this instance's map.
    pub sample_seed: u64,
}

impl FaultInstance {
    /// Check the per-label legality of the parameter and sector fields.
    pub fn validate(&self) -> Result<()> {
        let v = self.parameter_value;
        let integral = v.fract() == 0.0;
        match self.label {
            FaultLabel::Normal | FaultLabel::SiteOutage => Ok(()),
            FaultLabel::CellOutage => {
                if self.target_sector < 3 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "cell outage sector index {} outside 0..3",
                        self.target_sector
                    )))
                }
            }
            FaultLabel::TxPower => {
                if integral && TX_POWER_FAULT_RANGE_DBM.contains(&(v as i64)) {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "tx power fault value {v} outside integer 25..=35 dBm"
                    )))
                }
            }
            FaultLabel::CioPositive => {
                if v == CIO_FAULT_DB {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("cio+ fault value {v} must be +10 dB")))
                }
            }
            FaultLabel::CioNegative => {
                if v == -CIO_FAULT_DB {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("cio- fault value {v} must be -10 dB")))
                }
            }
            FaultLabel::AntennaUptilt => {
                if integral && (1..=TILT_FAULT_MAX_DEG).contains(&(v as i64)) {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "uptilt fault value {v} outside integer 1..=25 degrees"
                    )))
                }
            }
            FaultLabel::AntennaDowntilt => {
                if integral && (-TILT_FAULT_MAX_DEG..=-1).contains(&(v as i64)) {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "downtilt fault value {v} outside integer -25..=-1 degrees"
                    )))
                }
            }
        }
    }
}

/// Which fault classes to include and how many Normal samples to draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    /// Sites that receive faults; all other sites stay untouched.
    pub target_sites: Vec<u32>,
    /// Number of Normal-class samples (distinct shadowing seeds).
    pub normal_samples: usize,
    pub include_cell_outage: bool,
    pub include_site_outage: bool,
    pub include_tx_power: bool,
    pub include_cio_positive: bool,
    pub include_cio_negative: bool,
    pub include_uptilt: bool,
    pub include_downtilt: bool,
    /// Offset added to the running-index sample seeds.
    pub base_seed: u64,
}

impl DatasetSpec {
    /// All faults enabled on the given target sites.
    pub fn all_faults(target_sites: Vec<u32>, normal_samples: usize) -> Self {
        DatasetSpec {
            target_sites,
            normal_samples,
            include_cell_outage: true,
            include_site_outage: true,
            include_tx_power: true,
            include_cio_positive: true,
            include_cio_negative: true,
            include_uptilt: true,
            include_downtilt: true,
            base_seed: 0,
        }
    }

    pub fn validate(&self, config: &ScenarioConfig) -> Result<()> {
        if self.normal_samples == 0 {
            return Err(Error::invalid("normal_samples must be at least 1"));
        }
        if self.target_sites.is_empty() {
            return Err(Error::invalid("target_sites must be nonempty"));
        }
        let sites = config.site_ids();
        for site in &self.target_sites {
            if !sites.contains(site) {
                return Err(Error::invalid(format!(
                    "target site {site} does not exist in the scenario"
                )));
            }
        }
        Ok(())
    }
}

/// Return a copy of `config` with the fault applied. Normal returns the
/// input unchanged; outages flip `enabled`, the remaining faults set the
/// relevant parameter on all three sectors of the target site.
pub fn apply_fault(config: &ScenarioConfig, fault: &FaultInstance) -> Result<ScenarioConfig> {
    fault.validate()?;
    let mut out = config.clone();
    if fault.label == FaultLabel::Normal {
        return Ok(out);
    }
    let site = fault.target_site;
    if !config.sectors.iter().any(|s| s.site_id == site) {
        return Err(Error::invalid(format!("unknown target site {site}")));
    }
    match fault.label {
        FaultLabel::Normal => unreachable!(),
        FaultLabel::CellOutage => {
            let sector = out
                .sectors
                .iter_mut()
                .find(|s| s.site_id == site && s.sector_index == fault.target_sector)
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "site {site} has no sector {}",
                        fault.target_sector
                    ))
                })?;
            sector.enabled = false;
        }
        FaultLabel::SiteOutage => {
            for s in out.sectors.iter_mut().filter(|s| s.site_id == site) {
                s.enabled = false;
            }
        }
        FaultLabel::TxPower => {
            for s in out.sectors.iter_mut().filter(|s| s.site_id == site) {
                s.tx_power_dbm = fault.parameter_value;
            }
        }
        FaultLabel::CioPositive | FaultLabel::CioNegative => {
            for s in out.sectors.iter_mut().filter(|s| s.site_id == site) {
                s.cio_db = fault.parameter_value;
            }
        }
        FaultLabel::AntennaUptilt | FaultLabel::AntennaDowntilt => {
            for s in out.sectors.iter_mut().filter(|s| s.site_id == site) {
                s.tilt_deg = fault.parameter_value;
            }
        }
    }
    Ok(out)
}

/// Enumerate the dataset in its fixed order: Normal samples first, then per
/// target site: 3 cell outages, 1 site outage, 11 transmit-power values,
/// CIO +10, CIO -10, uptilts 1..=25 and downtilts -1..=-25. Each instance
/// gets sample_seed = base_seed + running index over the emitted sequence.
pub fn enumerate_dataset(spec: &DatasetSpec) -> Vec<FaultInstance> {
    let mut out = Vec::new();
    let push = |label, site, sector, value, out: &mut Vec<FaultInstance>| {
        let seed = spec.base_seed.wrapping_add(out.len() as u64);
        out.push(FaultInstance {
            label,
            target_site: site,
            target_sector: sector,
            parameter_value: value,
            sample_seed: seed,
        });
    };
    for _ in 0..spec.normal_samples {
        push(FaultLabel::Normal, 0, 0, 0.0, &mut out);
    }
    for &site in &spec.target_sites {
        if spec.include_cell_outage {
            for sector in 0..3u8 {
                push(FaultLabel::CellOutage, site, sector, 0.0, &mut out);
            }
        }
        if spec.include_site_outage {
            push(FaultLabel::SiteOutage, site, 0, 0.0, &mut out);
        }
        if spec.include_tx_power {
            for dbm in TX_POWER_FAULT_RANGE_DBM {
                push(FaultLabel::TxPower, site, 0, dbm as f64, &mut out);
            }
        }
        if spec.include_cio_positive {
            push(FaultLabel::CioPositive, site, 0, CIO_FAULT_DB, &mut out);
        }
        if spec.include_cio_negative {
            push(FaultLabel::CioNegative, site, 0, -CIO_FAULT_DB, &mut out);
        }
        if spec.include_uptilt {
            for deg in 1..=TILT_FAULT_MAX_DEG {
                push(FaultLabel::AntennaUptilt, site, 0, deg as f64, &mut out);
            }
        }
        if spec.include_downtilt {
            for deg in 1..=TILT_FAULT_MAX_DEG {
                push(FaultLabel::AntennaDowntilt, site, 0, -(deg as f64), &mut out);
            }
        }
    }
    out
}

/// Compute the RSRP map of every enumerated instance, in enumeration order.
pub fn generate_labeled_maps(
    config: &ScenarioConfig,
    spec: &DatasetSpec,
) -> Result<Vec<(FaultInstance, RsrpMap)>> {
    let instances = enumerate_dataset(spec);
    let mut out = Vec::with_capacity(instances.len());
    for fault in instances {
        let perturbed = apply_fault(config, &fault)?;
        let map = perturbed.compute_rsrp_map(fault.sample_seed);
        out.push((fault, map));
    }
    Ok(out)
}
