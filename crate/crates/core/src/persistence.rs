//! Binary file formats and the plain-text run configuration.
//!
//! All multi-byte values are little-endian. Network weights are stored as
//! 32-bit floats, calibration scores and the SVDD center as 64-bit floats.
//!
//! ```text
//! model        "ICADMDL1" version:u32 nets:u32
//!              { layers:u32 { in:u32 out:u32 activation:u8 bias:u8 }* }*
//!              kind:u8 (1 vae, 2 svdd)
//!              [svdd: weight_decay:f64 center_len:u32 center:f64*]
//!              params:f32*            (layer order, weights row-major then bias)
//! calibration  "ICADCAL1" scorer:u8 fingerprint:[u8;8] count:u32 scores:f64*
//! dataset      "ICADDAT1" count:u32 dim:u32 has_r:u8 values:f32* [r:f64*]
//! ```
//!
//! Files are written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::conformal::CalibrationSet;
use crate::error::{Error, Result};
use crate::example::{common_dim, Example};
use crate::models::{SvddModel, VaeModel};
use crate::neural::{Activation, DenseLayer, Mlp};
use crate::nonconformity::{Scorer, ScorerKind};

pub const MODEL_MAGIC: [u8; 8] = *b"ICADMDL1";
pub const CALIBRATION_MAGIC: [u8; 8] = *b"ICADCAL1";
pub const DATASET_MAGIC: [u8; 8] = *b"ICADDAT1";
pub const MODEL_VERSION: u32 = 1;

const KIND_VAE: u8 = 1;
const KIND_SVDD: u8 = 2;

/// Architecture of one layer as recorded on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: u32,
    pub out_dim: u32,
    pub activation: Activation,
    pub bias: bool,
}

impl LayerSpec {
    fn param_count(&self) -> usize {
        let w = self.in_dim as usize * self.out_dim as usize;
        w + if self.bias { self.out_dim as usize } else { 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Vae,
    Svdd { weight_decay: f64, center: Vec<f64> },
}

/// On-disk view of a model: descriptors plus the flat 32-bit payload.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub nets: Vec<Vec<LayerSpec>>,
    pub kind: ModelKind,
    pub params: Vec<f32>,
}

fn net_specs(net: &Mlp) -> Vec<LayerSpec> {
    net.layers()
        .iter()
        .map(|l| LayerSpec {
            in_dim: l.in_dim() as u32,
            out_dim: l.out_dim() as u32,
            activation: l.activation(),
            bias: l.has_bias(),
        })
        .collect()
}

fn net_from(specs: &[LayerSpec], params: &mut impl Iterator<Item = f32>) -> Result<Mlp> {
    let layers = specs
        .iter()
        .map(|s| {
            let (i, o) = (s.in_dim as usize, s.out_dim as usize);
            let weights: Vec<f64> = params.by_ref().take(i * o).map(f64::from).collect();
            let bias = s
                .bias
                .then(|| params.by_ref().take(o).map(f64::from).collect::<Vec<_>>());
            DenseLayer::new(i, o, weights, bias, s.activation)
        })
        .collect::<Result<Vec<_>>>()?;
    Mlp::new(layers)
}

impl ModelFile {
    pub fn from_vae(vae: &VaeModel) -> Self {
        let mut params: Vec<f32> = vae.encoder().flat_params().iter().map(|&v| v as f32).collect();
        params.extend(vae.decoder().flat_params().iter().map(|&v| v as f32));
        Self {
            nets: vec![net_specs(vae.encoder()), net_specs(vae.decoder())],
            kind: ModelKind::Vae,
            params,
        }
    }

    pub fn from_svdd(svdd: &SvddModel) -> Result<Self> {
        Ok(Self {
            nets: vec![net_specs(svdd.mapper())],
            kind: ModelKind::Svdd {
                weight_decay: svdd.weight_decay(),
                center: svdd.center()?.to_vec(),
            },
            params: svdd.mapper().flat_params().iter().map(|&v| v as f32).collect(),
        })
    }

    pub fn param_count(&self) -> usize {
        self.nets.iter().flatten().map(LayerSpec::param_count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.nets.is_empty() || self.nets.iter().any(Vec::is_empty) {
            return Err(Error::InvalidModel("model has an empty layer stack".into()));
        }
        if let Some(s) = self.nets.iter().flatten().find(|s| s.in_dim == 0 || s.out_dim == 0) {
            return Err(Error::InvalidModel(format!("zero-sized layer {s:?}")));
        }
        let expected_nets = match self.kind {
            ModelKind::Vae => 2,
            ModelKind::Svdd { .. } => 1,
        };
        if self.nets.len() != expected_nets {
            return Err(Error::InvalidModel(format!(
                "expected {expected_nets} networks, found {}",
                self.nets.len()
            )));
        }
        if self.param_count() != self.params.len() {
            return Err(Error::InvalidModel(format!(
                "payload has {} values, architecture needs {}",
                self.params.len(),
                self.param_count()
            )));
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out = Vec::with_capacity(64 + self.params.len() * 4);
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.nets.len() as u32).to_le_bytes());
        for net in &self.nets {
            out.extend_from_slice(&(net.len() as u32).to_le_bytes());
            for s in net {
                out.extend_from_slice(&s.in_dim.to_le_bytes());
                out.extend_from_slice(&s.out_dim.to_le_bytes());
                out.push(s.activation.code());
                out.push(u8::from(s.bias));
            }
        }
        match &self.kind {
            ModelKind::Vae => out.push(KIND_VAE),
            ModelKind::Svdd { weight_decay, center } => {
                out.push(KIND_SVDD);
                out.extend_from_slice(&weight_decay.to_le_bytes());
                out.extend_from_slice(&(center.len() as u32).to_le_bytes());
                for c in center {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MODEL_MAGIC)?;
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::VersionMismatch {
                expected: MODEL_VERSION,
                found: version,
            });
        }
        let n_nets = r.u32()? as usize;
        let mut nets = Vec::with_capacity(n_nets.min(16));
        for _ in 0..n_nets {
            let n_layers = r.u32()? as usize;
            let mut net = Vec::with_capacity(n_layers.min(64));
            for _ in 0..n_layers {
                let in_dim = r.u32()?;
                let out_dim = r.u32()?;
                let activation = Activation::from_code(r.u8()?)?;
                let bias = match r.u8()? {
                    0 => false,
                    1 => true,
                    code => {
                        return Err(Error::UnknownCode {
                            what: "bias flag",
                            code,
                        })
                    }
                };
                net.push(LayerSpec {
                    in_dim,
                    out_dim,
                    activation,
                    bias,
                });
            }
            nets.push(net);
        }
        let kind = match r.u8()? {
            KIND_VAE => ModelKind::Vae,
            KIND_SVDD => {
                let weight_decay = r.f64()?;
                let len = r.u32()? as usize;
                let center = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                ModelKind::Svdd { weight_decay, center }
            }
            code => {
                return Err(Error::UnknownCode {
                    what: "model kind",
                    code,
                })
            }
        };
        let count: usize = nets.iter().flatten().map(LayerSpec::param_count).sum();
        r.need(count.saturating_mul(4))?;
        let params = (0..count).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        let file = Self { nets, kind, params };
        file.validate()?;
        Ok(file)
    }

    pub fn into_backbone(self) -> Result<crate::conformal::Backbone> {
        use crate::conformal::Backbone;
        self.validate()?;
        let mut params = self.params.into_iter();
        match self.kind {
            ModelKind::Vae => {
                let enc = net_from(&self.nets[0], &mut params)?;
                let dec = net_from(&self.nets[1], &mut params)?;
                Ok(Backbone::Vae(VaeModel::new(enc, dec)?))
            }
            ModelKind::Svdd { weight_decay, center } => {
                let mapper = net_from(&self.nets[0], &mut params)?;
                Ok(Backbone::Svdd(SvddModel::with_center(mapper, center, weight_decay)?))
            }
        }
    }
}

/// Encodes a trained model.
pub fn encode_backbone(backbone: &crate::conformal::Backbone) -> Result<Vec<u8>> {
    use crate::conformal::Backbone;
    match backbone {
        Backbone::Vae(m) => ModelFile::from_vae(m).encode(),
        Backbone::Svdd(m) => ModelFile::from_svdd(m)?.encode(),
    }
}

pub fn decode_backbone(bytes: &[u8]) -> Result<crate::conformal::Backbone> {
    ModelFile::decode(bytes)?.into_backbone()
}

pub fn save_model(path: &Path, backbone: &crate::conformal::Backbone) -> Result<()> {
    atomic_write(path, &encode_backbone(backbone)?)
}

pub fn load_model(path: &Path) -> Result<crate::conformal::Backbone> {
    decode_backbone(&read(path)?)
}

/// Rounds the network weights to their stored 32-bit precision, yielding the
/// exact model a later load would see.
pub fn quantize(backbone: &crate::conformal::Backbone) -> Result<crate::conformal::Backbone> {
    decode_backbone(&encode_backbone(backbone)?)
}

fn digest8(bytes: &[u8]) -> [u8; 8] {
    let d = Sha256::digest(bytes);
    let mut out = [0u8; 8];
    out.copy_from_slice(&d[..8]);
    out
}

/// Fingerprint of a scorer: a truncated SHA-256 of its serialized model, or of
/// its hyperparameters and proper training set.
pub fn scorer_fingerprint(scorer: &Scorer) -> [u8; 8] {
    let mut buf = vec![scorer.kind().code()];
    match scorer {
        Scorer::Vae(m) => {
            buf.extend(ModelFile::from_vae(m).encode().expect("valid vae encodes"));
        }
        Scorer::Svdd(m) => match ModelFile::from_svdd(m).and_then(|f| f.encode()) {
            Ok(bytes) => buf.extend(bytes),
            Err(_) => buf.extend(b"uncentered"),
        },
        Scorer::Knn { train, k } => {
            buf.extend_from_slice(&(*k as u64).to_le_bytes());
            push_examples(&mut buf, train);
        }
        Scorer::Kde { train, bandwidth } => {
            for h in bandwidth.values() {
                buf.extend_from_slice(&h.to_le_bytes());
            }
            push_examples(&mut buf, train);
        }
    }
    digest8(&buf)
}

fn push_examples(buf: &mut Vec<u8>, data: &[Example]) {
    buf.extend_from_slice(&(data.len() as u64).to_le_bytes());
    for e in data {
        buf.extend_from_slice(&(e.dim() as u64).to_le_bytes());
        for v in e.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn encode_calibration(cal: &CalibrationSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(25 + cal.len() * 8);
    out.extend_from_slice(&CALIBRATION_MAGIC);
    out.push(cal.kind().code());
    out.extend_from_slice(&cal.fingerprint());
    out.extend_from_slice(&(cal.len() as u32).to_le_bytes());
    for s in cal.scores() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn decode_calibration(bytes: &[u8]) -> Result<CalibrationSet> {
    let mut r = Reader::new(bytes);
    r.magic(CALIBRATION_MAGIC)?;
    let kind = ScorerKind::from_code(r.u8()?)?;
    let mut fingerprint = [0u8; 8];
    fingerprint.copy_from_slice(r.take(8)?);
    let count = r.u32()? as usize;
    r.need(count.saturating_mul(8))?;
    let scores = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    CalibrationSet::from_sorted(scores, kind, fingerprint)
}

pub fn save_calibration(path: &Path, cal: &CalibrationSet) -> Result<()> {
    atomic_write(path, &encode_calibration(cal))
}

pub fn load_calibration(path: &Path) -> Result<CalibrationSet> {
    decode_calibration(&read(path)?)
}

/// Loads a calibration file and checks that it was produced by `scorer`.
pub fn load_calibration_for(path: &Path, scorer: &Scorer) -> Result<CalibrationSet> {
    let cal = load_calibration(path)?;
    cal.check_scorer(scorer)?;
    Ok(cal)
}

/// Examples with an optional corruption level per example.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub r: Option<Vec<f64>>,
}

impl Dataset {
    pub fn dim(&self) -> Result<usize> {
        common_dim(&self.examples)
    }
}

pub fn encode_dataset(ds: &Dataset) -> Result<Vec<u8>> {
    let dim = ds.dim()?;
    if let Some(r) = &ds.r {
        crate::error::check_dim("dataset r values", ds.examples.len(), r.len())?;
    }
    let n = ds.examples.len();
    let mut out = Vec::with_capacity(17 + n * dim * 4 + n * 8);
    out.extend_from_slice(&DATASET_MAGIC);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.push(u8::from(ds.r.is_some()));
    for e in &ds.examples {
        for &v in e.iter() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    if let Some(r) = &ds.r {
        for v in r {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(bytes);
    r.magic(DATASET_MAGIC)?;
    let count = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let has_r = match r.u8()? {
        0 => false,
        1 => true,
        code => {
            return Err(Error::UnknownCode {
                what: "dataset r flag",
                code,
            })
        }
    };
    if count == 0 || dim == 0 {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    let payload =
        count
            .saturating_mul(dim)
            .saturating_mul(4)
            .saturating_add(if has_r { count.saturating_mul(8) } else { 0 });
    r.need(payload)?;
    let examples = (0..count)
        .map(|_| {
            let v = (0..dim).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
            Example::new(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let rv = if has_r {
        Some((0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    r.finish()?;
    Ok(Dataset { examples, r: rv })
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    atomic_write(path, &encode_dataset(ds)?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&read(path)?)
}

/// Plain `key = value` configuration. Blank lines and `#` comments are ignored;
/// keys are kept sorted so rendering is canonical.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValueConfig {
    entries: BTreeMap<String, String>,
}

impl KeyValueConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config {
                    line: i + 1,
                    message: format!("expected key=value, got {line:?}"),
                });
            };
            let key = k.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config {
                    line: i + 1,
                    message: format!("invalid key {key:?}"),
                });
            }
            if entries.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config {
                    line: i + 1,
                    message: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// Sets a key; values are stored trimmed and must fit on one line.
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let v = value.to_string().replace(['\n', '\r'], " ").trim().to_string();
        self.entries.insert(key.to_string(), v);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parses a typed value, `None` when the key is absent.
    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| Error::Config {
                line: 0,
                message: format!("{key}: {e}"),
            }),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.render().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Config {
            line: 0,
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn need(&self, n: usize) -> Result<()> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            Err(Error::Truncated { needed: n, available })
        } else {
            Ok(())
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        self.need(n)?;
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, expected: [u8; 8]) -> Result<()> {
        let mut found = [0u8; 8];
        let n = self.bytes.len().min(8);
        found[..n].copy_from_slice(&self.bytes[..n]);
        if found != expected {
            return Err(Error::BadMagic { expected, found });
        }
        self.pos = 8;
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn finish(&self) -> Result<()> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            extra => Err(Error::TrailingBytes(extra)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_layer_stack_rejected_at_save() {
        let file = ModelFile {
            nets: vec![vec![]],
            kind: ModelKind::Svdd {
                weight_decay: 0.0,
                center: vec![],
            },
            params: vec![],
        };
        assert!(matches!(file.encode(), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn unsorted_calibration_rejected() {
        let cal = CalibrationSet::new(vec![1.0, 2.0], ScorerKind::Svdd, [7; 8]).unwrap();
        let mut bytes = encode_calibration(&cal);
        // swap the two scores
        let n = bytes.len();
        let (a, b) = bytes[n - 16..].split_at_mut(8);
        a.swap_with_slice(b);
        assert!(matches!(decode_calibration(&bytes), Err(Error::UnsortedCalibration(1))));
    }

    #[test]
    fn bad_magic_and_truncation() {
        let cal = CalibrationSet::new(vec![1.0, 2.0], ScorerKind::Knn, [1; 8]).unwrap();
        let mut bytes = encode_calibration(&cal);
        assert!(matches!(
            decode_calibration(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated { .. })
        ));
        bytes[0] = b'X';
        assert!(matches!(decode_calibration(&bytes), Err(Error::BadMagic { .. })));
        assert!(matches!(decode_calibration(b"ICA"), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn model_version_checked() {
        let svdd = SvddModel::with_center(Mlp::identity(2), vec![0.5, 0.5], 0.1).unwrap();
        let mut bytes = ModelFile::from_svdd(&svdd).unwrap().encode().unwrap();
        bytes[8] = 9;
        assert!(matches!(
            ModelFile::decode(&bytes),
            Err(Error::VersionMismatch { expected: 1, found: 9 })
        ));
    }

    #[test]
    fn config_parse_and_render() {
        let cfg = KeyValueConfig::parse("# run\nseed = 7\n\nmethod=svdd\n").unwrap();
        assert_eq!(cfg.get("seed"), Some("7"));
        assert_eq!(cfg.parsed::<u64>("seed").unwrap(), Some(7));
        assert_eq!(cfg.render(), "method=svdd\nseed=7\n");
        assert!(KeyValueConfig::parse("novalue").is_err());
        assert!(KeyValueConfig::parse("a=1\na=2").is_err());
        assert!(cfg.parsed::<u64>("method").is_err());
    }

    #[test]
    fn dataset_trailing_bytes() {
        let ds = Dataset {
            examples: vec![Example::new(vec![1.0, 2.0]).unwrap()],
            r: None,
        };
        let mut bytes = encode_dataset(&ds).unwrap();
        bytes.push(0);
        assert!(matches!(decode_dataset(&bytes), Err(Error::TrailingBytes(1))));
    }
}
