//! Image rendering and dataset pre-processing: RSRP grids to grayscale and
//! RGB pixel images, flattening to feature vectors, and the stratified
//! train/test split.
//!
//! Rounding is round-half-up everywhere so rendered bytes are identical
//! across platforms.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::fault::{FaultInstance, FaultLabel};
use crate::rng;
use crate::scenario::RsrpMap;

/// Display range used when normalizing RSRP values to pixels, dBm.
pub const DEFAULT_GRAY_LO_DBM: f64 = -130.0;
pub const DEFAULT_GRAY_HI_DBM: f64 = -50.0;

/// Whether a dataset is rendered as grayscale or RGB features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorMode {
    Gray,
    Rgb,
}

impl ColorMode {
    pub fn name(self) -> &'static str {
        match self {
            ColorMode::Gray => "gray",
            ColorMode::Rgb => "rgb",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            ColorMode::Gray => 0,
            ColorMode::Rgb => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ColorMode::Gray),
            1 => Ok(ColorMode::Rgb),
            other => Err(Error::invalid(format!("unknown color mode code {other}"))),
        }
    }
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

/// Piecewise-linear colormap over [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Colormap {
    /// (position, r, g, b) stops; positions strictly increasing from 0 to 1.
    pub stops: Vec<(f64, [u8; 3])>,
}

impl Default for Colormap {
    /// Dark blue through blue, green and yellow to red.
    fn default() -> Self {
        Colormap {
            stops: vec![
                (0.0, [0, 0, 128]),
                (0.25, [0, 0, 255]),
                (0.5, [0, 255, 0]),
                (0.75, [255, 255, 0]),
                (1.0, [255, 0, 0]),
            ],
        }
    }
}

impl Colormap {
    pub fn validate(&self) -> Result<()> {
        if self.stops.len() < 2 {
            return Err(Error::invalid("colormap needs at least 2 stops"));
        }
        if self.stops[0].0 != 0.0 || self.stops[self.stops.len() - 1].0 != 1.0 {
            return Err(Error::invalid("colormap must start at 0 and end at 1"));
        }
        if self.stops.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid("colormap stops must be strictly increasing"));
        }
        Ok(())
    }

    /// Color at position t in [0, 1], interpolated per channel between the
    /// enclosing stops with round-half-up.
    fn eval(&self, t: f64) -> [u8; 3] {
        let last = self.stops.len() - 1;
        if t >= self.stops[last].0 {
            return self.stops[last].1;
        }
        let seg = self
            .stops
            .windows(2)
            .position(|w| t < w[1].0)
            .unwrap_or(last - 1);
        let (t0, c0) = self.stops[seg];
        let (t1, c1) = self.stops[seg + 1];
        let frac = (t - t0) / (t1 - t0);
        let mut out = [0u8; 3];
        for ch in 0..3 {
            let v = f64::from(c0[ch]) + (f64::from(c1[ch]) - f64::from(c0[ch])) * frac;
            out[ch] = round_u8(v);
        }
        out
    }
}

/// Round half up and clamp to the byte range.
fn round_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

fn normalize(rsrp: f64, lo_dbm: f64, hi_dbm: f64) -> f64 {
    ((rsrp - lo_dbm) / (hi_dbm - lo_dbm)).clamp(0.0, 1.0)
}

/// Affine map from RSRP to 8-bit grayscale over [lo_dbm, hi_dbm].
pub fn rsrp_to_gray(map: &RsrpMap, lo_dbm: f64, hi_dbm: f64) -> Result<GrayImage> {
    if lo_dbm >= hi_dbm {
        return Err(Error::invalid("gray range requires lo < hi"));
    }
    let pixels = map
        .rsrp_dbm
        .iter()
        .map(|&v| round_u8(255.0 * normalize(v, lo_dbm, hi_dbm)))
        .collect();
    Ok(GrayImage {
        width: map.width,
        height: map.height,
        pixels,
    })
}

/// Colormapped rendering of an RSRP grid.
pub fn rsrp_to_rgb(map: &RsrpMap, lo_dbm: f64, hi_dbm: f64, cmap: &Colormap) -> Result<RgbImage> {
    if lo_dbm >= hi_dbm {
        return Err(Error::invalid("rgb range requires lo < hi"));
    }
    cmap.validate()?;
    let pixels = map
        .rsrp_dbm
        .iter()
        .map(|&v| cmap.eval(normalize(v, lo_dbm, hi_dbm)))
        .collect();
    Ok(RgbImage {
        width: map.width,
        height: map.height,
        pixels,
    })
}

/// BT.601 luma conversion with round-half-up.
pub fn rgb_to_gray(img: &RgbImage) -> GrayImage {
    let pixels = img
        .pixels
        .iter()
        .map(|px| {
            round_u8(0.299 * f64::from(px[0]) + 0.587 * f64::from(px[1]) + 0.114 * f64::from(px[2]))
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

/// Row-major flattening into [0, 1] features.
pub fn flatten_gray(img: &GrayImage) -> Vec<f64> {
    img.pixels.iter().map(|&p| f64::from(p) / 255.0).collect()
}

/// Row-major flattening with r,g,b interleaved per pixel, into [0, 1].
pub fn flatten_rgb(img: &RgbImage) -> Vec<f64> {
    let mut out = Vec::with_capacity(img.pixels.len() * 3);
    for px in &img.pixels {
        for ch in px {
            out.push(f64::from(*ch) / 255.0);
        }
    }
    out
}

/// One dataset element: features in [0, 1], its class, and the fault that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: FaultLabel,
    pub provenance: FaultInstance,
}

/// Stratified split indices: per class, a seeded shuffle followed by a
/// floor(train_fraction * n) cut, with at least one sample on each side.
/// Returned index lists are sorted ascending and partition 0..samples.len().
pub fn split_indices(
    labels: &[FaultLabel],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&train_fraction) || train_fraction <= 0.0 {
        return Err(Error::invalid("train_fraction must lie in (0, 1)"));
    }
    let mut rng = rng::stream_rng(seed, 0x5917);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in FaultLabel::ALL {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == label)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::invalid(format!(
                "class {} has {} sample(s); need at least 2 to split",
                label.name(),
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n = members.len();
        // Tiny epsilon keeps exact multiples (e.g. 0.7 * 10) on the intended
        // side of the floor.
        let cut = ((train_fraction * n as f64 + 1e-9).floor() as usize).clamp(1, n - 1);
        train.extend_from_slice(&members[..cut]);
        test.extend_from_slice(&members[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified 70:30-style split over owned samples.
pub fn train_test_split(
    samples: &[LabeledSample],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    let labels: Vec<FaultLabel> = samples.iter().map(|s| s.label).collect();
    let (train_idx, test_idx) = split_indices(&labels, train_fraction, seed)?;
    let train = train_idx.iter().map(|&i| samples[i].clone()).collect();
    let test = test_idx.iter().map(|&i| samples[i].clone()).collect();
    Ok((train, test))
}

/// Pearson correlation between two equal-length feature vectors.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}
