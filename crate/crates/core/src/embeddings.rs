//! Per-occurrence, per-layer embedding vectors and the `EMB1` file format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "EMB1" | u32 records | u32 layers | u32 dim_per_layer
//! | records x (u16 key_len, key bytes)
//! | records x layers x dim_per_layer f32
//! ```

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{put_string, read_file, sha256_hex, write_atomic, Reader};
use crate::sampler::{key_synset, occurrence_key};
use crate::taxonomy::TaxonomyGraph;

pub const EMB_MAGIC: &[u8; 4] = b"EMB1";
const FORMAT: &str = "EMB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "layer")]
pub enum LayerSelector {
    AllLayers,
    SingleLayer(usize),
}

impl std::fmt::Display for LayerSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayerSelector::AllLayers => f.write_str("all"),
            LayerSelector::SingleLayer(k) => write!(f, "{k}"),
        }
    }
}

impl std::str::FromStr for LayerSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(LayerSelector::AllLayers);
        }
        s.parse()
            .map(LayerSelector::SingleLayer)
            .map_err(|_| Error::Config(format!("layer must be `all` or an index, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    layer_count: usize,
    dim: usize,
    keys: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingStore {
    /// `data` holds `keys.len() * layer_count * dim` values, record-major.
    pub fn new(keys: Vec<String>, layer_count: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if layer_count == 0 || dim == 0 {
            return Err(Error::format(FORMAT, "layer_count and dim must be positive"));
        }
        let expected = keys.len() * layer_count * dim;
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(
                FORMAT,
                format!("non-finite value in record `{}`", keys[pos / (layer_count * dim)]),
            ));
        }
        let mut index = HashMap::with_capacity(keys.len());
        for (i, k) in keys.iter().enumerate() {
            if index.insert(k.clone(), i).is_some() {
                return Err(Error::format(FORMAT, format!("duplicate key `{k}`")));
            }
        }
        Ok(EmbeddingStore {
            layer_count,
            dim,
            keys,
            index,
            data,
        })
    }

    pub fn layer_count(&self) -> usize {
        self.layer_count
    }

    pub fn dim_per_layer(&self) -> usize {
        self.dim
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    /// Width of the vectors returned for `sel`.
    pub fn width(&self, sel: LayerSelector) -> usize {
        match sel {
            LayerSelector::AllLayers => self.layer_count * self.dim,
            LayerSelector::SingleLayer(_) => self.dim,
        }
    }

    pub fn check_selector(&self, sel: LayerSelector) -> Result<()> {
        match sel {
            LayerSelector::SingleLayer(k) if k >= self.layer_count => Err(Error::LayerOutOfRange {
                layer: k,
                layer_count: self.layer_count,
            }),
            _ => Ok(()),
        }
    }

    /// The concatenation of all layers, or one layer's slice.
    pub fn fetch(&self, key: &str, sel: LayerSelector) -> Result<&[f32]> {
        self.check_selector(sel)?;
        let i = *self
            .index
            .get(key)
            .ok_or_else(|| Error::MissingKey(key.to_string()))?;
        let record = self.layer_count * self.dim;
        let row = &self.data[i * record..(i + 1) * record];
        Ok(match sel {
            LayerSelector::AllLayers => row,
            LayerSelector::SingleLayer(k) => &row[k * self.dim..(k + 1) * self.dim],
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let key_bytes: usize = self.keys.iter().map(|k| 2 + k.len()).sum();
        let mut out = Vec::with_capacity(16 + key_bytes + 4 * self.data.len());
        out.extend_from_slice(EMB_MAGIC);
        for v in [self.keys.len(), self.layer_count, self.dim] {
            let v = u32::try_from(v).map_err(|_| Error::format(FORMAT, "header field exceeds u32"))?;
            out.extend_from_slice(&v.to_le_bytes());
        }
        for k in &self.keys {
            put_string(&mut out, k, FORMAT)?;
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, FORMAT);
        let magic = r.take(4, "magic")?;
        if magic != EMB_MAGIC {
            return Err(Error::format(FORMAT, format!("bad magic {magic:?}")));
        }
        let records = r.u32("record count")? as usize;
        let layers = r.u32("layer count")? as usize;
        let dim = r.u32("dim")? as usize;
        let mut keys = Vec::with_capacity(records.min(1 << 20));
        for i in 0..records {
            keys.push(r.string(&format!("key {i}"))?);
        }
        let values = records
            .checked_mul(layers)
            .and_then(|v| v.checked_mul(dim))
            .ok_or_else(|| Error::format(FORMAT, "header sizes overflow"))?;
        if r.remaining() != values * 4 {
            return Err(Error::format(
                FORMAT,
                format!(
                    "data block has {} bytes, header implies {}",
                    r.remaining(),
                    values * 4
                ),
            ));
        }
        let mut data = Vec::with_capacity(values);
        for _ in 0..values {
            data.push(r.f32("value")?);
        }
        EmbeddingStore::new(keys, layers, dim, data)
    }

    pub fn read(path: &Path) -> Result<Self> {
        EmbeddingStore::from_bytes(&read_file(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    /// SHA-256 of the serialized store.
    pub fn fingerprint(&self) -> String {
        sha256_hex(&self.to_bytes().expect("store was validated on construction"))
    }
}

/// One layer of i.i.d. standard normal values per key.
pub fn generate_random(keys: &[String], dim: usize, seed: u64) -> Result<EmbeddingStore> {
    if dim == 0 {
        return Err(Error::Config("dim must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..keys.len() * dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    EmbeddingStore::new(keys.to_vec(), 1, dim, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub dim: usize,
    /// Noise standard deviation of layer 0.
    pub sigma: f64,
    pub layers: usize,
    /// Layer `k` uses noise `sigma * (1 + layer_growth * k)`.
    pub layer_growth: f64,
    pub seed: u64,
}

impl PlantedConfig {
    pub fn layer_sigma(&self, k: usize) -> f64 {
        self.sigma * (1.0 + self.layer_growth * k as f64)
    }
}

/// Minimum `dim` accepted by [`generate_planted`]: the size of the largest
/// ancestor-or-self set in the graph.
pub fn anchor_dims(g: &TaxonomyGraph) -> usize {
    (0..g.len()).map(|i| g.ancestors(i).len() + 1).max().unwrap_or(1)
}

/// Synthetic store where hypernymy is decodable by construction.
///
/// Each synset's ancestor-or-self indicator (length `|N|`) is multiplied by a
/// seeded Gaussian projection to `dim` (one projection per layer, entries
/// `N(0, 1/dim)`), and every occurrence adds its own `N(0, sigma_k^2)` noise.
/// Keys are `synset#idx`; their synset part must exist in `g`.
pub fn generate_planted(g: &TaxonomyGraph, keys: &[String], cfg: &PlantedConfig) -> Result<EmbeddingStore> {
    let anchors = anchor_dims(g);
    if cfg.dim < anchors {
        return Err(Error::Config(format!(
            "dim {} is smaller than the {anchors} anchor dimensions of this graph",
            cfg.dim
        )));
    }
    if cfg.layers == 0 {
        return Err(Error::Config("layers must be positive".into()));
    }
    if !(cfg.sigma >= 0.0 && cfg.layer_growth >= 0.0) {
        return Err(Error::Config("sigma and layer_growth must be non-negative".into()));
    }
    let n = g.len();
    let scale = 1.0 / (cfg.dim as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // projections[k][node][d]
    let projections: Vec<Vec<Vec<f64>>> = (0..cfg.layers)
        .map(|_| {
            (0..n)
                .map(|_| {
                    (0..cfg.dim)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            scale * z
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let indicator: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut a = g.ancestors(i);
            a.push(i);
            a
        })
        .collect();

    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut data = Vec::with_capacity(keys.len() * cfg.layers * cfg.dim);
    for key in keys {
        let node = g.index_of(key_synset(key))?;
        for (k, proj) in projections.iter().enumerate() {
            let sigma = cfg.layer_sigma(k);
            let mut signal = vec![0.0f64; cfg.dim];
            for &a in &indicator[node] {
                for (s, w) in signal.iter_mut().zip(&proj[a]) {
                    *s += w;
                }
            }
            for s in signal {
                let noise: f64 = StandardNormal.sample(&mut noise_rng);
                data.push((s + sigma * noise) as f32);
            }
        }
    }
    EmbeddingStore::new(keys.to_vec(), cfg.layers, cfg.dim, data)
}

/// `synset#0 .. synset#(per_synset-1)` for every synset of `g`.
pub fn occurrence_keys(g: &TaxonomyGraph, per_synset: usize) -> Vec<String> {
    g.synsets()
        .iter()
        .flat_map(|s| (0..per_synset).map(move |k| occurrence_key(&s.id, k)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::random_tree;
    use proptest::prelude::*;

    fn keys(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}#0")).collect()
    }

    #[test]
    fn file_size_arithmetic() {
        let store = EmbeddingStore::new(vec!["a#0".into(), "b#0".into()], 3, 4, vec![0.5; 24]).unwrap();
        let bytes = store.to_bytes().unwrap();
        assert_eq!(bytes.len(), 16 + 2 * (2 + 3) + 2 * 3 * 4 * 4);
    }

    #[test]
    fn fetch_slices() {
        let store = EmbeddingStore::new(vec!["k#0".into()], 3, 2, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(store.fetch("k#0", LayerSelector::SingleLayer(1)).unwrap(), &[3., 4.]);
        assert_eq!(store.fetch("k#0", LayerSelector::AllLayers).unwrap(), &[1., 2., 3., 4., 5., 6.]);
        assert!(matches!(store.fetch("nope", LayerSelector::AllLayers), Err(Error::MissingKey(_))));
        assert!(matches!(
            store.fetch("k#0", LayerSelector::SingleLayer(3)),
            Err(Error::LayerOutOfRange { layer: 3, layer_count: 3 })
        ));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let store = generate_random(&keys(3), 4, 1).unwrap();
        let mut bytes = store.to_bytes().unwrap();
        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(EmbeddingStore::from_bytes(truncated), Err(Error::Format { .. })));
        let nan_at = bytes.len() - 4;
        bytes[nan_at..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(EmbeddingStore::from_bytes(&bytes), Err(Error::Format { .. })));
        bytes[0] = b'X';
        let err = EmbeddingStore::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn random_store_statistics() {
        let store = generate_random(&keys(100), 100, 42).unwrap();
        let vals: Vec<f64> = store.keys().iter().flat_map(|k| store.fetch(k, LayerSelector::AllLayers).unwrap().to_vec()).map(f64::from).collect();
        assert_eq!(vals.len(), 10_000);
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 0.05, "{mean}");
        assert!((var - 1.0).abs() < 0.05, "{var}");
        assert_eq!(store, generate_random(&keys(100), 100, 42).unwrap());
        assert_ne!(store, generate_random(&keys(100), 100, 43).unwrap());
    }

    #[test]
    fn atomic_write_and_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.emb");
        let store = generate_random(&keys(5), 3, 9).unwrap();
        store.write(&path).unwrap();
        assert_eq!(EmbeddingStore::read(&path).unwrap(), store);
    }

    #[test]
    fn planted_rejects_small_dim() {
        let g = random_tree(30, 2, 1);
        let cfg = PlantedConfig { dim: 2, sigma: 0.0, layers: 1, layer_growth: 0.0, seed: 1 };
        assert!(matches!(generate_planted(&g, &occurrence_keys(&g, 1), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn planted_noise_free_occurrences_coincide() {
        let g = random_tree(20, 3, 4);
        let cfg = PlantedConfig { dim: 16, sigma: 0.0, layers: 2, layer_growth: 1.0, seed: 3 };
        let store = generate_planted(&g, &occurrence_keys(&g, 2), &cfg).unwrap();
        let a = store.fetch("c0005.n.01#0", LayerSelector::AllLayers).unwrap();
        let b = store.fetch("c0005.n.01#1", LayerSelector::AllLayers).unwrap();
        assert_eq!(a, b);
        assert_eq!(store.layer_count(), 2);
        assert_eq!(store, generate_planted(&g, &occurrence_keys(&g, 2), &cfg).unwrap());
    }

    #[test]
    fn planted_large_sigma_looks_random() {
        let g = random_tree(20, 3, 4);
        let cfg = PlantedConfig { dim: 50, sigma: 1e4, layers: 1, layer_growth: 0.0, seed: 3 };
        let store = generate_planted(&g, &occurrence_keys(&g, 10), &cfg).unwrap();
        let vals: Vec<f64> = store
            .keys()
            .iter()
            .flat_map(|k| store.fetch(k, LayerSelector::AllLayers).unwrap().to_vec())
            .map(|v| f64::from(v) / 1e4)
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 0.05 && (var - 1.0).abs() < 0.05, "{mean} {var}");
    }

    proptest! {
        #[test]
        fn emb1_round_trip_is_bit_exact(
            layers in 1usize..4,
            dim in 1usize..6,
            vals in proptest::collection::vec(-1e6f32..1e6, 0..60),
        ) {
            let record = layers * dim;
            let n = vals.len() / record;
            let data = vals[..n * record].to_vec();
            let store = EmbeddingStore::new(keys(n), layers, dim, data).unwrap();
            let bytes = store.to_bytes().unwrap();
            let back = EmbeddingStore::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes().unwrap(), bytes);
            for k in back.keys() {
                let all = back.fetch(k, LayerSelector::AllLayers).unwrap().to_vec();
                let parts: Vec<f32> = (0..layers)
                    .flat_map(|l| back.fetch(k, LayerSelector::SingleLayer(l)).unwrap().to_vec())
                    .collect();
                prop_assert_eq!(all, parts);
            }
        }
    }
}
