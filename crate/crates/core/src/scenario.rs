//! Multi-site cellular scenario and best-server RSRP map computation.
//!
//! A scenario is a set of 3-sector macro sites over a rectangular pixel grid.
//! Path loss follows the log-distance macro-urban form
//! `PL = intercept + slope * log10(d_km)`, antennas use a two-plane parabolic
//! pattern, and lognormal shadowing is a smoothed white-noise field shared by
//! all sectors of one map sample. Every computation is a pure function of the
//! configuration and the sample seed.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// One sector (one transmitter) of a 3-sector site.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorConfig {
    pub site_id: u32,
    /// 0, 1 or 2 within the site.
    pub sector_index: u8,
    /// Antenna position in meters.
    pub position_m: (f64, f64),
    /// Antenna height above ground in meters.
    pub height_m: f64,
    /// Boresight azimuth, degrees clockwise from +y, in [0, 360).
    pub azimuth_deg: f64,
    /// Electrical tilt in degrees; positive is uptilt, negative downtilt.
    pub tilt_deg: f64,
    pub tx_power_dbm: f64,
    /// Cell individual offset in dB; biases serving-cell selection only.
    pub cio_db: f64,
    /// Peak antenna gain in dBi.
    pub antenna_gain_dbi: f64,
    pub enabled: bool,
}

/// Horizontal 3 dB beamwidth of the sector pattern, degrees.
const HORIZ_BEAMWIDTH_DEG: f64 = 65.0;
/// Vertical 3 dB beamwidth of the sector pattern, degrees.
const VERT_BEAMWIDTH_DEG: f64 = 10.0;
/// Front-to-back attenuation cap, dB.
const MAX_ATTENUATION_DB: f64 = 30.0;
/// Vertical-plane attenuation cap, dB.
const MAX_VERT_ATTENUATION_DB: f64 = 20.0;

impl SectorConfig {
    /// Antenna gain toward a direction given as horizontal offset from
    /// boresight (wrapped to (-180, 180]) and elevation angle from horizontal
    /// (positive up), both in degrees.
    ///
    /// Two-plane parabolic pattern: each plane contributes a bounded
    /// quadratic attenuation and the combined attenuation is capped at the
    /// front-to-back value.
    pub fn antenna_gain_db(&self, horiz_offset_deg: f64, elev_angle_deg: f64) -> f64 {
        let h = (horiz_offset_deg / HORIZ_BEAMWIDTH_DEG).powi(2) * 12.0;
        let a_h = -h.min(MAX_ATTENUATION_DB);
        let v = ((elev_angle_deg - self.tilt_deg) / VERT_BEAMWIDTH_DEG).powi(2) * 12.0;
        let a_v = -v.min(MAX_VERT_ATTENUATION_DB);
        self.antenna_gain_dbi + (a_h + a_v).max(-MAX_ATTENUATION_DB)
    }
}

/// Full scenario: sectors, grid geometry, propagation and shadowing constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub sectors: Vec<SectorConfig>,
    pub carrier_freq_mhz: f64,
    pub grid_width_px: usize,
    pub grid_height_px: usize,
    /// Edge length of one pixel in meters.
    pub pixel_size_m: f64,
    /// Position of the grid's (row 0, col 0) corner in meters.
    pub grid_origin_m: (f64, f64),
    pub pathloss_intercept_db: f64,
    /// Path-loss slope per decade of km.
    pub pathloss_slope: f64,
    pub shadowing_sigma_db: f64,
    pub shadowing_smooth_radius_px: usize,
    pub rsrp_floor_dbm: f64,
    pub base_seed: u64,
}

/// Parameters of the default hexagonal layout: one central site surrounded by
/// up to six ring sites, three sectors each at azimuths 0/120/240.
#[derive(Debug, Clone)]
pub struct HexLayout {
    pub num_sites: usize,
    pub inter_site_distance_m: f64,
    pub bs_height_m: f64,
    pub tx_power_dbm: f64,
    pub antenna_gain_dbi: f64,
}

impl Default for HexLayout {
    /// Masts tall enough, and pixels small enough, that the vertical
    /// antenna pattern resolves on the grid: ground elevation angles span
    /// roughly -30..-2 degrees across a cell, so both tilt directions
    /// produce distinct ring-shaped signatures instead of hitting the
    /// pattern caps everywhere.
    fn default() -> Self {
        HexLayout {
            num_sites: 7,
            inter_site_distance_m: 900.0,
            bs_height_m: 60.0,
            tx_power_dbm: 43.0,
            antenna_gain_dbi: 18.3,
        }
    }
}

/// Sector list for a hexagonal layout centered at the origin.
pub fn hex_sectors(layout: &HexLayout) -> Vec<SectorConfig> {
    let mut sectors = Vec::with_capacity(layout.num_sites * 3);
    for site in 0..layout.num_sites {
        let position_m = if site == 0 {
            (0.0, 0.0)
        } else {
            let angle = (site as f64 - 1.0) * 60.0_f64.to_radians();
            (
                layout.inter_site_distance_m * angle.cos(),
                layout.inter_site_distance_m * angle.sin(),
            )
        };
        for sector_index in 0..3u8 {
            sectors.push(SectorConfig {
                site_id: site as u32,
                sector_index,
                position_m,
                height_m: layout.bs_height_m,
                azimuth_deg: f64::from(sector_index) * 120.0,
                tilt_deg: 0.0,
                tx_power_dbm: layout.tx_power_dbm,
                cio_db: 0.0,
                antenna_gain_dbi: layout.antenna_gain_dbi,
                enabled: true,
            });
        }
    }
    sectors
}

impl Default for ScenarioConfig {
    /// Desk-scale default: 7 sites (21 sectors) on a 64x64 grid of 50 m
    /// pixels centered on the middle site. Shadowing is a 4.5 dB field with
    /// a long correlation length; the wide blobs are what make the noise
    /// violate per-pixel independence the way real clutter does.
    fn default() -> Self {
        ScenarioConfig {
            sectors: hex_sectors(&HexLayout::default()),
            carrier_freq_mhz: 2100.0,
            grid_width_px: 64,
            grid_height_px: 64,
            pixel_size_m: 50.0,
            grid_origin_m: (-1600.0, -1600.0),
            pathloss_intercept_db: 128.1,
            pathloss_slope: 37.6,
            shadowing_sigma_db: 4.5,
            shadowing_smooth_radius_px: 10,
            rsrp_floor_dbm: -140.0,
            base_seed: 1,
        }
    }
}

/// Distances below this are clamped before the log-distance evaluation.
const MIN_PATHLOSS_DISTANCE_M: f64 = 10.0;

impl ScenarioConfig {
    /// Log-distance path loss in dB at the given 3-D distance.
    pub fn path_loss_db(&self, distance_m: f64) -> f64 {
        let d_km = distance_m.max(MIN_PATHLOSS_DISTANCE_M) / 1000.0;
        self.pathloss_intercept_db + self.pathloss_slope * d_km.log10()
    }

    /// Center of pixel (row, col) in meters.
    pub fn pixel_center_m(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.grid_origin_m.0 + (col as f64 + 0.5) * self.pixel_size_m,
            self.grid_origin_m.1 + (row as f64 + 0.5) * self.pixel_size_m,
        )
    }

    /// RSRP in dBm received from one enabled sector at pixel (row, col),
    /// clamped below at the scenario floor. `shadowing` is the per-sample
    /// shadowing grid in dB, applied as extra loss.
    pub fn rsrp_at(
        &self,
        row: usize,
        col: usize,
        sector: &SectorConfig,
        shadowing: &[f64],
    ) -> f64 {
        debug_assert!(sector.enabled, "rsrp_at requires an enabled sector");
        let (px, py) = self.pixel_center_m(row, col);
        let dx = px - sector.position_m.0;
        let dy = py - sector.position_m.1;
        let ground_m = dx.hypot(dy);
        let distance_m = (ground_m * ground_m + sector.height_m * sector.height_m).sqrt();
        // Bearing measured clockwise from +y, matching the azimuth convention.
        let bearing_deg = dx.atan2(dy).to_degrees();
        let horiz_offset = wrap_deg(bearing_deg - sector.azimuth_deg);
        let elev_deg = (-sector.height_m).atan2(ground_m).to_degrees();
        let gain = sector.antenna_gain_db(horiz_offset, elev_deg);
        let value = sector.tx_power_dbm + gain
            - self.path_loss_db(distance_m)
            - shadowing[row * self.grid_width_px + col];
        value.max(self.rsrp_floor_dbm)
    }

    /// Serving sector at pixel (row, col): the enabled sector maximizing
    /// RSRP + CIO, ties broken by lowest sector index. Returns the index into
    /// `sectors` and the serving sector's physical RSRP (without the CIO
    /// bias). All sectors disabled yields `(-1, rsrp_floor_dbm)`.
    pub fn best_server(&self, row: usize, col: usize, shadowing: &[f64]) -> (i32, f64) {
        let mut best: Option<(usize, f64, f64)> = None;
        for (idx, sector) in self.sectors.iter().enumerate() {
            if !sector.enabled {
                continue;
            }
            let rsrp = self.rsrp_at(row, col, sector, shadowing);
            let biased = rsrp + sector.cio_db;
            let better = match best {
                None => true,
                Some((_, _, best_biased)) => biased > best_biased,
            };
            if better {
                best = Some((idx, rsrp, biased));
            }
        }
        match best {
            Some((idx, rsrp, _)) => (idx as i32, rsrp),
            None => (-1, self.rsrp_floor_dbm),
        }
    }

    /// Per-sample shadowing field in dB: unit white Gaussian noise, smoothed
    /// by a separable box filter applied twice, centered, and rescaled to the
    /// configured empirical standard deviation. Deterministic in
    /// (base_seed, sample_seed).
    pub fn shadowing_grid(&self, sample_seed: u64) -> Vec<f64> {
        let n = self.grid_width_px * self.grid_height_px;
        if self.shadowing_sigma_db == 0.0 {
            return vec![0.0; n];
        }
        let mut rng = rng::stream_rng(self.base_seed, rng::mix(0x5AD0, sample_seed));
        let mut grid: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let r = self.shadowing_smooth_radius_px;
        if r > 0 {
            for _ in 0..2 {
                box_blur_rows(&mut grid, self.grid_width_px, self.grid_height_px, r);
                box_blur_cols(&mut grid, self.grid_width_px, self.grid_height_px, r);
            }
        }
        let mean = grid.iter().sum::<f64>() / n as f64;
        let var = grid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std < 1e-30 {
            return vec![0.0; n];
        }
        let scale = self.shadowing_sigma_db / std;
        for v in &mut grid {
            *v = (*v - mean) * scale;
        }
        grid
    }

    /// Best-server RSRP map for one sample seed.
    pub fn compute_rsrp_map(&self, sample_seed: u64) -> RsrpMap {
        let shadowing = self.shadowing_grid(sample_seed);
        let (w, h) = (self.grid_width_px, self.grid_height_px);
        let mut rsrp_dbm = Vec::with_capacity(w * h);
        let mut serving_sector = Vec::with_capacity(w * h);
        for row in 0..h {
            for col in 0..w {
                let (idx, rsrp) = self.best_server(row, col, &shadowing);
                serving_sector.push(idx);
                rsrp_dbm.push(rsrp);
            }
        }
        RsrpMap {
            width: w,
            height: h,
            rsrp_dbm,
            serving_sector,
        }
    }

    /// Check the structural invariants of a full scenario.
    pub fn validate(&self) -> Result<()> {
        if self.grid_width_px < 8 || self.grid_height_px < 8 {
            return Err(Error::invalid("grid dimensions must be at least 8 pixels"));
        }
        if self.pixel_size_m <= 0.0 {
            return Err(Error::invalid("pixel_size_m must be positive"));
        }
        if self.shadowing_sigma_db < 0.0 {
            return Err(Error::invalid("shadowing_sigma_db must be non-negative"));
        }
        let mut site_ids: Vec<u32> = self.sectors.iter().map(|s| s.site_id).collect();
        site_ids.sort_unstable();
        site_ids.dedup();
        for site in &site_ids {
            let site_sectors: Vec<&SectorConfig> =
                self.sectors.iter().filter(|s| s.site_id == *site).collect();
            if site_sectors.len() != 3 {
                return Err(Error::invalid(format!(
                    "site {site} has {} sectors, expected 3",
                    site_sectors.len()
                )));
            }
            let mut indices: Vec<u8> = site_sectors.iter().map(|s| s.sector_index).collect();
            indices.sort_unstable();
            if indices != [0, 1, 2] {
                return Err(Error::invalid(format!(
                    "site {site} sector indices must be 0,1,2"
                )));
            }
            for a in 0..3 {
                for b in (a + 1)..3 {
                    let diff = (site_sectors[a].azimuth_deg - site_sectors[b].azimuth_deg)
                        .rem_euclid(360.0);
                    if (diff - 120.0).abs() > 1e-6 && (diff - 240.0).abs() > 1e-6 {
                        return Err(Error::invalid(format!(
                            "site {site} azimuths must be pairwise 120 degrees apart"
                        )));
                    }
                }
            }
        }
        let span_x = self.grid_width_px as f64 * self.pixel_size_m;
        let span_y = self.grid_height_px as f64 * self.pixel_size_m;
        for sector in &self.sectors {
            if !(0.0..=60.0).contains(&sector.tx_power_dbm) {
                return Err(Error::invalid(format!(
                    "sector ({}, {}) tx_power_dbm {} outside [0, 60]",
                    sector.site_id, sector.sector_index, sector.tx_power_dbm
                )));
            }
            if sector.antenna_gain_dbi < 0.0 {
                return Err(Error::invalid("antenna_gain_dbi must be non-negative"));
            }
            let (x, y) = sector.position_m;
            let in_x = x >= self.grid_origin_m.0 - span_x && x <= self.grid_origin_m.0 + 2.0 * span_x;
            let in_y = y >= self.grid_origin_m.1 - span_y && y <= self.grid_origin_m.1 + 2.0 * span_y;
            if !in_x || !in_y {
                return Err(Error::invalid(format!(
                    "sector ({}, {}) lies more than one grid span outside the grid",
                    sector.site_id, sector.sector_index
                )));
            }
        }
        Ok(())
    }

    /// Distinct site ids present in the scenario, ascending.
    pub fn site_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.sectors.iter().map(|s| s.site_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Wrap an angle in degrees to (-180, 180].
fn wrap_deg(angle: f64) -> f64 {
    let r = angle.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Box blur along rows with truncated windows at the edges.
fn box_blur_rows(grid: &mut [f64], width: usize, height: usize, radius: usize) {
    let mut out = vec![0.0; grid.len()];
    for row in 0..height {
        let base = row * width;
        for col in 0..width {
            let lo = col.saturating_sub(radius);
            let hi = (col + radius).min(width - 1);
            let sum: f64 = grid[base + lo..=base + hi].iter().sum();
            out[base + col] = sum / (hi - lo + 1) as f64;
        }
    }
    grid.copy_from_slice(&out);
}

/// Box blur along columns with truncated windows at the edges.
fn box_blur_cols(grid: &mut [f64], width: usize, height: usize, radius: usize) {
    let mut out = vec![0.0; grid.len()];
    for col in 0..width {
        for row in 0..height {
            let lo = row.saturating_sub(radius);
            let hi = (row + radius).min(height - 1);
            let mut sum = 0.0;
            for r in lo..=hi {
                sum += grid[r * width + col];
            }
            out[row * width + col] = sum / (hi - lo + 1) as f64;
        }
    }
    grid.copy_from_slice(&out);
}

/// Best-server RSRP over the scenario grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RsrpMap {
    pub width: usize,
    pub height: usize,
    /// RSRP of the serving sector in dBm, clamped at the scenario floor.
    pub rsrp_dbm: Vec<f64>,
    /// Index into `sectors` of the serving sector, -1 if none is enabled.
    pub serving_sector: Vec<i32>,
}

impl RsrpMap {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.rsrp_dbm[row * self.width + col]
    }

    pub fn serving_at(&self, row: usize, col: usize) -> i32 {
        self.serving_sector[row * self.width + col]
    }

    /// Mean absolute per-pixel difference against another map of equal size.
    pub fn mean_abs_diff(&self, other: &RsrpMap) -> f64 {
        assert_eq!(self.rsrp_dbm.len(), other.rsrp_dbm.len());
        let sum: f64 = self
            .rsrp_dbm
            .iter()
            .zip(&other.rsrp_dbm)
            .map(|(a, b)| (a - b).abs())
            .sum();
        sum / self.rsrp_dbm.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_sector_config() -> ScenarioConfig {
        let mut cfg = ScenarioConfig {
            sectors: vec![SectorConfig {
                site_id: 0,
                sector_index: 0,
                position_m: (0.0, 0.0),
                height_m: 0.0,
                azimuth_deg: 0.0,
                tilt_deg: 0.0,
                tx_power_dbm: 43.0,
                cio_db: 0.0,
                antenna_gain_dbi: 18.3,
                enabled: true,
            }],
            ..ScenarioConfig::default()
        };
        cfg.shadowing_sigma_db = 0.0;
        cfg
    }

    #[test]
    fn path_loss_at_reference_distances() {
        let cfg = ScenarioConfig::default();
        assert!((cfg.path_loss_db(1000.0) - 128.1).abs() < 1e-12);
        assert!((cfg.path_loss_db(10_000.0) - 165.7).abs() < 1e-12);
        // Clamp below 10 m removes the log singularity.
        assert_eq!(cfg.path_loss_db(0.0), cfg.path_loss_db(10.0));
    }

    #[test]
    fn path_loss_monotone_in_distance() {
        let cfg = ScenarioConfig::default();
        let mut prev = f64::NEG_INFINITY;
        for step in 0..200 {
            let d = step as f64 * 73.0;
            let pl = cfg.path_loss_db(d);
            assert!(pl >= prev);
            prev = pl;
        }
    }

    #[test]
    fn antenna_gain_reference_points() {
        let sector = &single_sector_config().sectors[0];
        assert!((sector.antenna_gain_db(0.0, 0.0) - 18.3).abs() < 1e-12);
        assert!((sector.antenna_gain_db(65.0, 0.0) - 6.3).abs() < 1e-12);
        assert!((sector.antenna_gain_db(180.0, 0.0) - (-11.7)).abs() < 1e-12);
    }

    #[test]
    fn antenna_gain_bounds() {
        let mut sector = single_sector_config().sectors[0].clone();
        sector.tilt_deg = 7.0;
        for phi in [-180.0, -90.0, -10.0, 0.0, 33.3, 180.0] {
            for theta in [-40.0, -7.0, 0.0, 7.0, 40.0] {
                let g = sector.antenna_gain_db(phi, theta);
                assert!(g <= sector.antenna_gain_dbi + 1e-12);
                assert!(g >= sector.antenna_gain_dbi - 30.0 - 1e-12);
            }
        }
    }

    #[test]
    fn tilt_symmetry_mirrors_elevation() {
        let base = single_sector_config().sectors[0].clone();
        for t in [1.0, 4.5, 12.0, 25.0] {
            let mut up = base.clone();
            up.tilt_deg = t;
            let mut down = base.clone();
            down.tilt_deg = -t;
            for theta in [-30.0, -t, 0.0, t, 17.0] {
                let a = up.antenna_gain_db(10.0, theta);
                let b = down.antenna_gain_db(10.0, -theta);
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rsrp_boresight_link_budget() {
        // Height 0 and a sector placed on a pixel center give an exactly
        // 1000 m boresight link toward the pixel twenty 50 m rows up (+y).
        let mut cfg = single_sector_config();
        cfg.sectors[0].position_m = cfg.pixel_center_m(10, 20);
        let zero = vec![0.0; cfg.grid_width_px * cfg.grid_height_px];
        let target = cfg.pixel_center_m(30, 20);
        assert!((target.1 - cfg.sectors[0].position_m.1 - 1000.0).abs() < 1e-9);
        let rsrp = cfg.rsrp_at(30, 20, &cfg.sectors[0].clone(), &zero);
        assert!((rsrp - (-66.8)).abs() < 1e-9, "rsrp = {rsrp}");
    }

    #[test]
    fn rsrp_floor_clamp_and_tx_linearity() {
        let mut cfg = single_sector_config();
        cfg.sectors[0].position_m = cfg.pixel_center_m(10, 20);
        let zero = vec![0.0; cfg.grid_width_px * cfg.grid_height_px];
        let base = cfg.rsrp_at(20, 20, &cfg.sectors[0].clone(), &zero);

        let mut weak = cfg.clone();
        weak.sectors[0].tx_power_dbm = 25.0;
        let lower = weak.rsrp_at(20, 20, &weak.sectors[0].clone(), &zero);
        assert!((base - lower - 18.0).abs() < 1e-9);

        let mut floored = cfg.clone();
        floored.rsrp_floor_dbm = -20.0;
        let clamped = floored.rsrp_at(20, 20, &floored.sectors[0].clone(), &zero);
        assert_eq!(clamped, -20.0);
    }

    #[test]
    fn best_server_cio_biases_selection_not_value() {
        // Two co-located sectors, equal power; the second gets +10 dB CIO.
        let mut cfg = single_sector_config();
        let mut second = cfg.sectors[0].clone();
        second.sector_index = 1;
        second.cio_db = 10.0;
        cfg.sectors.push(second);
        let zero = vec![0.0; cfg.grid_width_px * cfg.grid_height_px];
        let (idx, value) = cfg.best_server(20, 20, &zero);
        assert_eq!(idx, 1);
        let unbiased = cfg.rsrp_at(20, 20, &cfg.sectors[0].clone(), &zero);
        assert_eq!(value, unbiased);
    }

    #[test]
    fn best_server_bias_overcomes_5_db_gap() {
        // Sector 1 is 5 dB weaker but carries +10 dB CIO: it must serve, and
        // the map must record its weaker physical RSRP.
        let mut cfg = single_sector_config();
        let mut second = cfg.sectors[0].clone();
        second.sector_index = 1;
        second.tx_power_dbm -= 5.0;
        second.cio_db = 10.0;
        cfg.sectors.push(second);
        let zero = vec![0.0; cfg.grid_width_px * cfg.grid_height_px];
        let first = cfg.rsrp_at(20, 20, &cfg.sectors[0].clone(), &zero);
        let (idx, value) = cfg.best_server(20, 20, &zero);
        assert_eq!(idx, 1);
        assert!((value - (first - 5.0)).abs() < 1e-9);
    }

    #[test]
    fn best_server_single_sector_ignores_cio() {
        let mut cfg = single_sector_config();
        cfg.sectors[0].cio_db = -37.0;
        let zero = vec![0.0; cfg.grid_width_px * cfg.grid_height_px];
        let (idx, value) = cfg.best_server(5, 5, &zero);
        assert_eq!(idx, 0);
        assert_eq!(value, cfg.rsrp_at(5, 5, &cfg.sectors[0].clone(), &zero));
    }

    #[test]
    fn best_server_all_disabled() {
        let mut cfg = single_sector_config();
        cfg.sectors[0].enabled = false;
        let zero = vec![0.0; cfg.grid_width_px * cfg.grid_height_px];
        assert_eq!(cfg.best_server(0, 0, &zero), (-1, cfg.rsrp_floor_dbm));
    }

    #[test]
    fn shadowing_zero_sigma_is_zero_grid() {
        let mut cfg = ScenarioConfig::default();
        cfg.shadowing_sigma_db = 0.0;
        assert!(cfg.shadowing_grid(3).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shadowing_is_deterministic_and_seed_sensitive() {
        let cfg = ScenarioConfig::default();
        let a = cfg.shadowing_grid(11);
        let b = cfg.shadowing_grid(11);
        assert_eq!(a, b);
        let c = cfg.shadowing_grid(12);
        let differing = a.iter().zip(&c).filter(|(x, y)| x != y).count();
        assert!(differing as f64 >= 0.99 * a.len() as f64);
    }

    #[test]
    fn shadowing_moments_match_config() {
        let cfg = ScenarioConfig::default();
        let g = cfg.shadowing_grid(0);
        let n = g.len() as f64;
        let mean = g.iter().sum::<f64>() / n;
        assert!(mean.abs() < 0.5);
        let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((var.sqrt() - cfg.shadowing_sigma_db).abs() < 1e-9);
    }

    #[test]
    fn map_all_disabled_is_uniform_floor() {
        let mut cfg = ScenarioConfig::default();
        for s in &mut cfg.sectors {
            s.enabled = false;
        }
        let map = cfg.compute_rsrp_map(0);
        assert!(map.rsrp_dbm.iter().all(|v| *v == cfg.rsrp_floor_dbm));
        assert!(map.serving_sector.iter().all(|v| *v == -1));
    }

    #[test]
    fn map_serving_indices_in_range() {
        let cfg = ScenarioConfig::default();
        let map = cfg.compute_rsrp_map(7);
        assert!(map
            .serving_sector
            .iter()
            .all(|v| *v >= 0 && (*v as usize) < cfg.sectors.len()));
    }

    #[test]
    fn map_is_deterministic() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.compute_rsrp_map(5), cfg.compute_rsrp_map(5));
    }

    #[test]
    fn disabling_a_sector_only_weakens_its_pixels() {
        let cfg = ScenarioConfig::default();
        let before = cfg.compute_rsrp_map(3);
        let mut without = cfg.clone();
        without.sectors[4].enabled = false;
        let after = without.compute_rsrp_map(3);
        for px in 0..before.rsrp_dbm.len() {
            if before.rsrp_dbm[px] != after.rsrp_dbm[px] {
                assert_eq!(before.serving_sector[px], 4, "pixel {px} changed without serving change");
            }
            assert!(after.rsrp_dbm[px] <= before.rsrp_dbm[px] + 1e-12);
            if before.serving_sector[px] != 4 {
                assert_eq!(before.rsrp_dbm[px], after.rsrp_dbm[px]);
                assert_eq!(before.serving_sector[px], after.serving_sector[px]);
            }
        }
    }

    #[test]
    fn uniform_tx_shift_moves_every_pixel_by_delta() {
        let mut cfg = ScenarioConfig::default();
        cfg.rsrp_floor_dbm = -300.0; // keep every pixel off the clamp
        let base = cfg.compute_rsrp_map(9);
        let delta = 2.5;
        let mut raised = cfg.clone();
        for s in &mut raised.sectors {
            s.tx_power_dbm += delta;
        }
        let shifted = raised.compute_rsrp_map(9);
        for px in 0..base.rsrp_dbm.len() {
            assert!((shifted.rsrp_dbm[px] - base.rsrp_dbm[px] - delta).abs() < 1e-9);
            assert_eq!(shifted.serving_sector[px], base.serving_sector[px]);
        }
    }

    #[test]
    fn cio_neutral_with_single_enabled_sector() {
        let mut cfg = ScenarioConfig::default();
        for s in &mut cfg.sectors {
            s.enabled = false;
        }
        cfg.sectors[10].enabled = true;
        let base = cfg.compute_rsrp_map(2);
        let mut biased = cfg.clone();
        biased.sectors[10].cio_db = -25.0;
        assert_eq!(base, biased.compute_rsrp_map(2));
    }

    #[test]
    fn default_scenario_validates() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn validate_rejects_bad_azimuths() {
        let mut cfg = ScenarioConfig::default();
        cfg.sectors[1].azimuth_deg = 100.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn validate_rejects_tiny_grid() {
        let mut cfg = ScenarioConfig::default();
        cfg.grid_width_px = 4;
        assert!(cfg.validate().is_err());
    }
}
