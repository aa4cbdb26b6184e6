//! `PRB1` model files.
//!
//! ```text
//! "PRB1" | u32 version
//! | u32 input | u32 projection | u32 hidden
//! | f64 dropout | f64 l2 | f64 pos_weight | f64 neg_weight | f64 lr
//! | u32 batch | u32 max_epochs | u32 patience | u64 seed | u32 resamples
//! | u8 selector (0 = all layers, 1 = single) | u32 layer | u16 len, fingerprint
//! | u64 parameter count | f64 parameters (projection W, b, hidden W, b, output w, b)
//! ```

use std::path::Path;

use super::{Params, ProbeConfig, ProbeModel, Shape, TrainedOn};
use crate::embeddings::LayerSelector;
use crate::error::{Error, Result};
use crate::io::{put_string, read_file, write_atomic, Reader};

pub const PRB_MAGIC: &[u8; 4] = b"PRB1";
const VERSION: u32 = 1;
const FORMAT: &str = "PRB1";

fn u32_field(v: usize, what: &str) -> Result<[u8; 4]> {
    u32::try_from(v)
        .map(u32::to_le_bytes)
        .map_err(|_| Error::format(FORMAT, format!("{what} exceeds u32")))
}

impl ProbeModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.try_to_bytes().expect("model dimensions fit the header")
    }

    fn try_to_bytes(&self) -> Result<Vec<u8>> {
        let c = &self.config;
        let s = self.params.shape();
        let mut out = Vec::with_capacity(128 + 8 * self.params.as_slice().len());
        out.extend_from_slice(PRB_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&u32_field(s.input, "input dim")?);
        out.extend_from_slice(&u32_field(s.projection, "projection dim")?);
        out.extend_from_slice(&u32_field(s.hidden, "hidden units")?);
        for v in [c.dropout_rate, c.l2_lambda, c.positive_weight, c.negative_weight, c.learning_rate] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&u32_field(c.batch_size, "batch size")?);
        out.extend_from_slice(&u32_field(c.max_epochs, "max epochs")?);
        out.extend_from_slice(&u32_field(c.patience, "patience")?);
        out.extend_from_slice(&c.seed.to_le_bytes());
        out.extend_from_slice(&u32_field(c.bootstrap_resamples, "resamples")?);
        let (mode, layer) = match self.trained_on.selector {
            LayerSelector::AllLayers => (0u8, 0usize),
            LayerSelector::SingleLayer(k) => (1u8, k),
        };
        out.push(mode);
        out.extend_from_slice(&u32_field(layer, "layer")?);
        put_string(&mut out, &self.trained_on.fingerprint, FORMAT)?;
        out.extend_from_slice(&(self.params.as_slice().len() as u64).to_le_bytes());
        for v in self.params.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, FORMAT);
        if r.take(4, "magic")? != PRB_MAGIC {
            return Err(Error::format(FORMAT, "bad magic"));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::format(FORMAT, format!("unsupported version {version}")));
        }
        let shape = Shape {
            input: r.u32("input dim")? as usize,
            projection: r.u32("projection dim")? as usize,
            hidden: r.u32("hidden units")? as usize,
        };
        let config = ProbeConfig {
            projection_dim: shape.projection,
            hidden_units: shape.hidden,
            dropout_rate: r.f64("dropout")?,
            l2_lambda: r.f64("l2")?,
            positive_weight: r.f64("positive weight")?,
            negative_weight: r.f64("negative weight")?,
            learning_rate: r.f64("learning rate")?,
            batch_size: r.u32("batch size")? as usize,
            max_epochs: r.u32("max epochs")? as usize,
            patience: r.u32("patience")? as usize,
            seed: r.u64("seed")?,
            bootstrap_resamples: r.u32("resamples")? as usize,
        };
        config.validate()?;
        let selector = match (r.u8("selector")?, r.u32("layer")? as usize) {
            (0, _) => LayerSelector::AllLayers,
            (1, k) => LayerSelector::SingleLayer(k),
            (m, _) => return Err(Error::format(FORMAT, format!("unknown selector mode {m}"))),
        };
        let fingerprint = r.string("fingerprint")?;
        let count = r.u64("parameter count")? as usize;
        if r.remaining() != count.saturating_mul(8) {
            return Err(Error::format(FORMAT, "parameter block length does not match count"));
        }
        let data = (0..count).map(|_| r.f64("parameter")).collect::<Result<Vec<_>>>()?;
        let params = Params::from_vec(shape, data)?;
        if !params.is_finite() {
            return Err(Error::format(FORMAT, "non-finite parameter"));
        }
        Ok(ProbeModel {
            config,
            params,
            trained_on: TrainedOn {
                selector,
                fingerprint,
            },
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        ProbeModel::from_bytes(&read_file(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.try_to_bytes()?)
    }
}
