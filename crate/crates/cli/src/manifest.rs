//! Dataset manifest CSV: one row per generated sample with its label,
//! fault parameters, seed and image paths. The file's FNV-1a hash binds
//! trained models to the dataset they came from.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use faultlab_core::fault::{FaultInstance, FaultLabel};
use faultlab_core::persist::fnv1a;

pub const MANIFEST_HEADER: &str =
    "sample_id,label_code,label_name,target_site,target_sector,parameter_value,sample_seed,gray_path,rgb_path";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub sample_id: usize,
    pub fault: FaultInstance,
    pub gray_path: String,
    pub rgb_path: String,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
    /// FNV-1a hash of the manifest file bytes.
    pub hash: u64,
}

/// Render the manifest CSV (header plus one line per row).
pub fn render(rows: &[ManifestRow]) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for row in rows {
        let f = &row.fault;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.sample_id,
            f.label.code(),
            f.label.name(),
            f.target_site,
            f.target_sector,
            f.parameter_value,
            f.sample_seed,
            row.gray_path,
            row.rgb_path,
        ));
    }
    out
}

/// Read and parse a manifest file, recording its content hash.
pub fn read(path: &Path) -> Result<Manifest> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("cannot read manifest {}", path.display()))?;
    let hash = fnv1a(&bytes);
    let text = String::from_utf8(bytes).context("manifest is not UTF-8")?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == MANIFEST_HEADER => {}
        _ => bail!("manifest {} has an unexpected header", path.display()),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            bail!("manifest line {line_no}: expected 9 fields, got {}", fields.len());
        }
        let parse_err = |what: &str| anyhow!("manifest line {line_no}: bad {what}");
        let label = FaultLabel::from_code(
            fields[1].parse::<u8>().map_err(|_| parse_err("label code"))?,
        )
        .map_err(|_| parse_err("label code"))?;
        if fields[2] != label.name() {
            bail!("manifest line {line_no}: label name does not match its code");
        }
        rows.push(ManifestRow {
            sample_id: fields[0].parse().map_err(|_| parse_err("sample id"))?,
            fault: FaultInstance {
                label,
                target_site: fields[3].parse().map_err(|_| parse_err("target site"))?,
                target_sector: fields[4].parse().map_err(|_| parse_err("target sector"))?,
                parameter_value: fields[5].parse().map_err(|_| parse_err("parameter"))?,
                sample_seed: fields[6].parse().map_err(|_| parse_err("sample seed"))?,
            },
            gray_path: fields[7].to_string(),
            rgb_path: fields[8].to_string(),
        });
    }
    if rows.is_empty() {
        bail!("manifest {} has no samples", path.display());
    }
    Ok(Manifest { rows, hash })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn row(id: usize, label: FaultLabel, value: f64) -> ManifestRow {
        ManifestRow {
            sample_id: id,
            fault: FaultInstance {
                label,
                target_site: 2,
                target_sector: 1,
                parameter_value: value,
                sample_seed: id as u64,
            },
            gray_path: format!("images/{id:05}_gray.pgm"),
            rgb_path: format!("images/{id:05}_rgb.ppm"),
        }
    }

    #[test]
    fn roundtrip_preserves_rows() {
        let rows = vec![
            row(0, FaultLabel::Normal, 0.0),
            row(1, FaultLabel::TxPower, 30.0),
            row(2, FaultLabel::CioNegative, -10.0),
        ];
        let text = render(&rows);
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(text.as_bytes()).unwrap();
        let manifest = read(file.path()).unwrap();
        assert_eq!(manifest.rows, rows);
        assert_eq!(manifest.hash, fnv1a(text.as_bytes()));
    }

    #[test]
    fn integer_valued_parameters_render_compactly() {
        let text = render(&[row(1, FaultLabel::TxPower, 30.0)]);
        assert!(text.contains(",30,"), "{text}");
    }

    #[test]
    fn corrupt_manifests_are_rejected() {
        for text in [
            "wrong header\n1,2,3\n",
            &format!("{MANIFEST_HEADER}\n0,9,bogus,0,0,0,0,a,b\n"),
            &format!("{MANIFEST_HEADER}\n0,0,tx_power,0,0,0,0,a,b\n"),
            &format!("{MANIFEST_HEADER}\n"),
        ] {
            let mut file = tempfile::NamedTempFile::new().unwrap();
            file.write_all(text.as_bytes()).unwrap();
            assert!(read(file.path()).is_err(), "{text:?}");
        }
    }
}
