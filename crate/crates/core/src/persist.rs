//! Versioned little-endian model files.
//!
//! Layout: 4-byte magic (NBM1 / RFM1 / CNM1 / NEF1), version byte, meta
//! header (split seed, manifest hash, color mode), then the model payload.
//! Readers fail with a byte offset on any malformed field.

use std::io::{Read, Write};

use crate::cnn::{CnnConfig, CnnModel, Tensor};
use crate::error::{Error, Result};
use crate::fault::NUM_CLASSES;
use crate::imaging::ColorMode;
use crate::nb::GaussianNbModel;
use crate::nef::{Connection, Ensemble, LifParams, NefClassifier};
use crate::rf::{RandomForestModel, TreeNode};

const VERSION: u8 = 1;

pub const MAGIC_NB: &[u8; 4] = b"NBM1";
pub const MAGIC_RF: &[u8; 4] = b"RFM1";
pub const MAGIC_CNN: &[u8; 4] = b"CNM1";
pub const MAGIC_NEF: &[u8; 4] = b"NEF1";

/// Provenance embedded in every model file; lets evaluation rebuild the
/// exact train/test split and refuse stale datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelMeta {
    pub split_seed: u64,
    pub manifest_hash: u64,
    pub color_mode: ColorMode,
}

/// Any trained classifier.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Nb(GaussianNbModel),
    Rf(RandomForestModel),
    Cnn(CnnModel),
    Nef(NefClassifier),
}

impl TrainedModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainedModel::Nb(_) => "nb",
            TrainedModel::Rf(_) => "rf",
            TrainedModel::Cnn(_) => "cnn",
            TrainedModel::Nef(_) => "nef",
        }
    }
}

/// Incremental FNV-1a 64-bit hash; used to fingerprint datasets.
#[derive(Debug, Clone)]
pub struct Fnv64 {
    state: u64,
}

impl Default for Fnv64 {
    fn default() -> Self {
        Fnv64 {
            state: 0xcbf2_9ce4_8422_2325,
        }
    }
}

impl Fnv64 {
    /// Continue hashing from a previously computed state.
    pub fn resume(state: u64) -> Fnv64 {
        Fnv64 { state }
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.state ^= u64::from(b);
            self.state = self.state.wrapping_mul(0x100_0000_01b3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.state
    }
}

/// One-shot FNV-1a 64-bit hash.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = Fnv64::default();
    h.update(bytes);
    h.finish()
}

struct Enc {
    buf: Vec<u8>,
}

impl Enc {
    fn new() -> Enc {
        Enc { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64_slice(&mut self, values: &[f64]) {
        self.u64(values.len() as u64);
        for &v in values {
            self.f64(v);
        }
    }

    fn usize_slice(&mut self, values: &[usize]) {
        self.u64(values.len() as u64);
        for &v in values {
            self.u64(v as u64);
        }
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Dec<'a> {
    fn new(buf: &'a [u8]) -> Dec<'a> {
        Dec { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let slice = &self.buf[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(Error::format(
                self.buf.len(),
                format!("truncated while reading {what}"),
            )),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn len(&mut self, what: &str) -> Result<usize> {
        let n = self.u64(what)?;
        usize::try_from(n).map_err(|_| Error::format(self.pos, format!("{what} length overflow")))
    }

    fn f64_slice(&mut self, what: &str) -> Result<Vec<f64>> {
        let n = self.len(what)?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64(what)?);
        }
        Ok(out)
    }

    fn usize_slice(&mut self, what: &str) -> Result<Vec<usize>> {
        let n = self.len(what)?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.u64(what)? as usize);
        }
        Ok(out)
    }
}

/// Serialize a model with its meta header.
pub fn write_model<W: Write>(sink: &mut W, model: &TrainedModel, meta: &ModelMeta) -> Result<()> {
    let mut enc = Enc::new();
    let magic = match model {
        TrainedModel::Nb(_) => MAGIC_NB,
        TrainedModel::Rf(_) => MAGIC_RF,
        TrainedModel::Cnn(_) => MAGIC_CNN,
        TrainedModel::Nef(_) => MAGIC_NEF,
    };
    enc.buf.extend_from_slice(magic);
    enc.u8(VERSION);
    enc.u64(meta.split_seed);
    enc.u64(meta.manifest_hash);
    enc.u8(meta.color_mode.code());
    match model {
        TrainedModel::Nb(m) => encode_nb(&mut enc, m),
        TrainedModel::Rf(m) => encode_rf(&mut enc, m),
        TrainedModel::Cnn(m) => encode_cnn(&mut enc, m),
        TrainedModel::Nef(m) => encode_nef(&mut enc, m),
    }
    sink.write_all(&enc.buf)?;
    Ok(())
}

/// Read back any model file produced by [`write_model`].
pub fn read_model<R: Read>(source: &mut R) -> Result<(TrainedModel, ModelMeta)> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut dec = Dec::new(&bytes);
    let magic: [u8; 4] = dec.take(4, "magic")?.try_into().unwrap();
    let version = dec.u8("version")?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let split_seed = dec.u64("split seed")?;
    let manifest_hash = dec.u64("manifest hash")?;
    let color_mode = ColorMode::from_code(dec.u8("color mode")?)
        .map_err(|_| Error::format(dec.pos - 1, "bad color mode byte"))?;
    let meta = ModelMeta {
        split_seed,
        manifest_hash,
        color_mode,
    };
    let model = match &magic {
        m if m == MAGIC_NB => TrainedModel::Nb(decode_nb(&mut dec)?),
        m if m == MAGIC_RF => TrainedModel::Rf(decode_rf(&mut dec)?),
        m if m == MAGIC_CNN => TrainedModel::Cnn(decode_cnn(&mut dec)?),
        m if m == MAGIC_NEF => TrainedModel::Nef(decode_nef(&mut dec)?),
        _ => return Err(Error::format(0, "unknown model magic")),
    };
    Ok((model, meta))
}

fn encode_nb(enc: &mut Enc, m: &GaussianNbModel) {
    enc.u32(m.num_features as u32);
    for p in &m.class_log_priors {
        enc.f64(*p);
    }
    for row in &m.means {
        enc.f64_slice(row);
    }
    for row in &m.variances {
        enc.f64_slice(row);
    }
}

fn decode_nb(dec: &mut Dec) -> Result<GaussianNbModel> {
    let num_features = dec.u32("nb feature count")? as usize;
    let mut class_log_priors = [0.0; NUM_CLASSES];
    for p in &mut class_log_priors {
        *p = dec.f64("nb prior")?;
    }
    let mut means = Vec::with_capacity(NUM_CLASSES);
    for _ in 0..NUM_CLASSES {
        means.push(dec.f64_slice("nb means")?);
    }
    let mut variances = Vec::with_capacity(NUM_CLASSES);
    for _ in 0..NUM_CLASSES {
        variances.push(dec.f64_slice("nb variances")?);
    }
    Ok(GaussianNbModel {
        class_log_priors,
        means,
        variances,
        num_features,
    })
}

fn encode_tree(enc: &mut Enc, node: &TreeNode) {
    match node {
        TreeNode::Leaf { class_counts } => {
            enc.u8(0);
            for &c in class_counts {
                enc.u64(c);
            }
        }
        TreeNode::Internal {
            feature,
            threshold,
            n_samples,
            decrease,
            left,
            right,
        } => {
            enc.u8(1);
            enc.u32(*feature as u32);
            enc.f64(*threshold);
            enc.u64(*n_samples);
            enc.f64(*decrease);
            encode_tree(enc, left);
            encode_tree(enc, right);
        }
    }
}

fn decode_tree(dec: &mut Dec) -> Result<TreeNode> {
    match dec.u8("tree node tag")? {
        0 => {
            let mut class_counts = [0u64; NUM_CLASSES];
            for c in &mut class_counts {
                *c = dec.u64("leaf count")?;
            }
            Ok(TreeNode::Leaf { class_counts })
        }
        1 => {
            let feature = dec.u32("split feature")? as usize;
            let threshold = dec.f64("split threshold")?;
            let n_samples = dec.u64("node sample count")?;
            let decrease = dec.f64("impurity decrease")?;
            let left = Box::new(decode_tree(dec)?);
            let right = Box::new(decode_tree(dec)?);
            Ok(TreeNode::Internal {
                feature,
                threshold,
                n_samples,
                decrease,
                left,
                right,
            })
        }
        tag => Err(Error::format(dec.pos - 1, format!("bad tree tag {tag}"))),
    }
}

fn encode_rf(enc: &mut Enc, m: &RandomForestModel) {
    enc.u32(m.num_features as u32);
    enc.u32(m.features_per_split as u32);
    enc.u32(m.max_depth as u32);
    enc.u64(m.seed);
    enc.u64(m.trees.len() as u64);
    for (tree, oob) in m.trees.iter().zip(&m.oob_indices) {
        enc.u64(oob.len() as u64);
        for &i in oob {
            enc.u32(i);
        }
        encode_tree(enc, tree);
    }
}

fn decode_rf(dec: &mut Dec) -> Result<RandomForestModel> {
    let num_features = dec.u32("rf feature count")? as usize;
    let features_per_split = dec.u32("rf features per split")? as usize;
    let max_depth = dec.u32("rf max depth")? as usize;
    let seed = dec.u64("rf seed")?;
    let n_trees = dec.len("rf tree count")?;
    let mut trees = Vec::with_capacity(n_trees);
    let mut oob_indices = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n_oob = dec.len("oob count")?;
        let mut oob = Vec::with_capacity(n_oob);
        for _ in 0..n_oob {
            oob.push(dec.u32("oob index")?);
        }
        oob_indices.push(oob);
        trees.push(decode_tree(dec)?);
    }
    Ok(RandomForestModel {
        trees,
        features_per_split,
        max_depth,
        oob_indices,
        seed,
        num_features,
    })
}

fn encode_tensor(enc: &mut Enc, t: &Tensor) {
    enc.usize_slice(&t.shape);
    enc.f64_slice(&t.data);
}

fn decode_tensor(dec: &mut Dec) -> Result<Tensor> {
    let shape = dec.usize_slice("tensor shape")?;
    let data = dec.f64_slice("tensor data")?;
    Tensor::new(&shape, data).map_err(|_| Error::format(dec.pos, "tensor shape/data mismatch"))
}

fn encode_cnn(enc: &mut Enc, m: &CnnModel) {
    enc.u32(m.config.in_channels as u32);
    enc.u32(m.config.in_height as u32);
    enc.u32(m.config.in_width as u32);
    enc.u32(m.config.conv1_filters as u32);
    enc.u32(m.config.conv2_filters as u32);
    enc.u32(m.config.kernel_size as u32);
    enc.u32(m.config.batch_size as u32);
    enc.f64(m.config.learning_rate);
    enc.u32(m.config.max_epochs as u32);
    enc.u64(m.config.seed);
    encode_tensor(enc, &m.conv1_w);
    enc.f64_slice(&m.conv1_b);
    encode_tensor(enc, &m.conv2_w);
    enc.f64_slice(&m.conv2_b);
    encode_tensor(enc, &m.fc_w);
    enc.f64_slice(&m.fc_b);
    enc.f64_slice(&m.history);
}

fn decode_cnn(dec: &mut Dec) -> Result<CnnModel> {
    let config = CnnConfig {
        in_channels: dec.u32("cnn channels")? as usize,
        in_height: dec.u32("cnn height")? as usize,
        in_width: dec.u32("cnn width")? as usize,
        conv1_filters: dec.u32("cnn conv1 filters")? as usize,
        conv2_filters: dec.u32("cnn conv2 filters")? as usize,
        kernel_size: dec.u32("cnn kernel")? as usize,
        batch_size: dec.u32("cnn batch size")? as usize,
        learning_rate: dec.f64("cnn learning rate")?,
        max_epochs: dec.u32("cnn max epochs")? as usize,
        seed: dec.u64("cnn seed")?,
    };
    Ok(CnnModel {
        config,
        conv1_w: decode_tensor(dec)?,
        conv1_b: dec.f64_slice("conv1 bias")?,
        conv2_w: decode_tensor(dec)?,
        conv2_b: dec.f64_slice("conv2 bias")?,
        fc_w: decode_tensor(dec)?,
        fc_b: dec.f64_slice("fc bias")?,
        history: dec.f64_slice("loss history")?,
    })
}

fn encode_nef(enc: &mut Enc, m: &NefClassifier) {
    enc.u32(m.num_features as u32);
    enc.u32(m.dim as u32);
    enc.f64_slice(&m.projection);
    enc.f64_slice(&m.coord_lo);
    enc.f64_slice(&m.coord_hi);
    enc.u32(m.ensemble.n_neurons as u32);
    enc.u32(m.ensemble.dim as u32);
    enc.f64(m.ensemble.lif.tau_rc);
    enc.f64(m.ensemble.lif.tau_ref);
    enc.f64_slice(&m.ensemble.encoders);
    enc.f64_slice(&m.ensemble.gains);
    enc.f64_slice(&m.ensemble.biases);
    enc.f64_slice(&m.ensemble.max_rates);
    enc.f64_slice(&m.ensemble.intercepts);
    enc.f64_slice(&m.readout.decoders);
    enc.u32(m.readout.out_dim as u32);
    enc.f64(m.readout.synapse_tau);
}

fn decode_nef(dec: &mut Dec) -> Result<NefClassifier> {
    let num_features = dec.u32("nef feature count")? as usize;
    let dim = dec.u32("nef projection dim")? as usize;
    let projection = dec.f64_slice("nef projection")?;
    let coord_lo = dec.f64_slice("nef coord lo")?;
    let coord_hi = dec.f64_slice("nef coord hi")?;
    let n_neurons = dec.u32("ensemble size")? as usize;
    let ens_dim = dec.u32("ensemble dim")? as usize;
    let lif = LifParams {
        tau_rc: dec.f64("tau_rc")?,
        tau_ref: dec.f64("tau_ref")?,
    };
    let ensemble = Ensemble {
        n_neurons,
        dim: ens_dim,
        lif,
        encoders: dec.f64_slice("encoders")?,
        gains: dec.f64_slice("gains")?,
        biases: dec.f64_slice("biases")?,
        max_rates: dec.f64_slice("max rates")?,
        intercepts: dec.f64_slice("intercepts")?,
    };
    let decoders = dec.f64_slice("decoders")?;
    let out_dim = dec.u32("readout dim")? as usize;
    let synapse_tau = dec.f64("synapse tau")?;
    Ok(NefClassifier {
        num_features,
        dim,
        projection,
        coord_lo,
        coord_hi,
        ensemble,
        readout: Connection {
            decoders,
            out_dim,
            synapse_tau,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault::{FaultInstance, FaultLabel};
    use crate::imaging::LabeledSample;
    use crate::nb::nb_fit;
    use crate::nef::{nef_fit_classifier, NefConfig};
    use crate::rf::{rf_fit, RfConfig};
    use crate::rng;
    use rand::Rng;
    use std::io::Cursor;

    fn meta() -> ModelMeta {
        ModelMeta {
            split_seed: 42,
            manifest_hash: 0xDEADBEEF,
            color_mode: ColorMode::Rgb,
        }
    }

    fn tiny_dataset(seed: u64) -> Vec<LabeledSample> {
        let mut rng = rng::stream_rng(seed, 0);
        let mut out = Vec::new();
        for code in 0..4u8 {
            for _ in 0..5 {
                let label = FaultLabel::from_code(code).unwrap();
                let features: Vec<f64> = (0..24)
                    .map(|_| f64::from(code) / 4.0 + 0.1 * rng.random::<f64>())
                    .collect();
                out.push(LabeledSample {
                    features,
                    label,
                    provenance: FaultInstance {
                        label,
                        target_site: 0,
                        target_sector: 0,
                        parameter_value: 0.0,
                        sample_seed: 0,
                    },
                });
            }
        }
        out
    }

    fn roundtrip(model: TrainedModel) -> (TrainedModel, ModelMeta) {
        let mut bytes = Vec::new();
        write_model(&mut bytes, &model, &meta()).unwrap();
        read_model(&mut Cursor::new(bytes)).unwrap()
    }

    #[test]
    fn nb_roundtrip_preserves_model_and_meta() {
        let model = nb_fit(&tiny_dataset(1)).unwrap();
        let (back, m) = roundtrip(TrainedModel::Nb(model.clone()));
        assert_eq!(m, meta());
        match back {
            TrainedModel::Nb(b) => assert_eq!(b, model),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn rf_roundtrip_preserves_trees() {
        let config = RfConfig {
            n_trees: 5,
            ..RfConfig::default()
        };
        let model = rf_fit(&tiny_dataset(2), &config).unwrap();
        let (back, _) = roundtrip(TrainedModel::Rf(model.clone()));
        match back {
            TrainedModel::Rf(b) => assert_eq!(b, model),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn cnn_roundtrip_preserves_weights_and_history() {
        let config = crate::cnn::CnnConfig {
            in_channels: 1,
            in_height: 8,
            in_width: 8,
            conv1_filters: 2,
            conv2_filters: 2,
            max_epochs: 2,
            ..crate::cnn::CnnConfig::default()
        };
        let mut rng = rng::stream_rng(5, 5);
        let samples: Vec<LabeledSample> = (0..6)
            .map(|i| {
                let label = FaultLabel::from_code(i % 3).unwrap();
                LabeledSample {
                    features: (0..64).map(|_| rng.random::<f64>()).collect(),
                    label,
                    provenance: FaultInstance {
                        label,
                        target_site: 0,
                        target_sector: 0,
                        parameter_value: 0.0,
                        sample_seed: 0,
                    },
                }
            })
            .collect();
        let model = crate::cnn::cnn_train(&samples, &config).unwrap();
        let (back, _) = roundtrip(TrainedModel::Cnn(model.clone()));
        match back {
            TrainedModel::Cnn(b) => assert_eq!(b, model),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn nef_roundtrip_preserves_predictions() {
        let config = NefConfig {
            projection_dim: 8,
            n_neurons: 50,
            ..NefConfig::default()
        };
        let data = tiny_dataset(3);
        let model = nef_fit_classifier(&data, &config).unwrap();
        let (back, _) = roundtrip(TrainedModel::Nef(model.clone()));
        match back {
            TrainedModel::Nef(b) => {
                assert_eq!(b, model);
                for s in data.iter().step_by(3) {
                    assert_eq!(
                        b.predict_rate(&s.features).unwrap(),
                        model.predict_rate(&s.features).unwrap()
                    );
                }
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn truncated_and_corrupt_files_are_rejected() {
        let model = nb_fit(&tiny_dataset(1)).unwrap();
        let mut bytes = Vec::new();
        write_model(&mut bytes, &TrainedModel::Nb(model), &meta()).unwrap();
        let truncated = &bytes[..bytes.len() / 2];
        assert!(read_model(&mut Cursor::new(truncated.to_vec())).is_err());

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(read_model(&mut Cursor::new(bad_magic)).is_err());

        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert!(read_model(&mut Cursor::new(bad_version)).is_err());
    }

    #[test]
    fn fnv1a_reference_values() {
        // Standard FNV-1a test vectors.
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }
}
