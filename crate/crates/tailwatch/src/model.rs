//! Persisted baselines.
//!
//! A model file is JSON with a format tag and version, the kind of baseline,
//! the identifier of the partition PRNG and the provenance of the fit. Point
//! sets and statistic arrays are stored as base64 of packed little-endian
//! `f64`, so a saved model scores bit-for-bit like the in-memory one.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tailwatch_core::gem::PARTITION_PRNG;
use tailwatch_core::{GemBaseline, NominalBaseline, PcaBaseline, PointSet, ProjectedGemBaseline};

use crate::error::{Error, Result};

pub const FORMAT: &str = "tailwatch-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gem(GemBaseline),
    Pca(PcaBaseline),
    PcaGem(ProjectedGemBaseline),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Gem(_) => "gem",
            Model::Pca(_) => "pca",
            Model::PcaGem(_) => "pca+gem",
        }
    }

    /// The PCA part, if any.
    pub fn pca(&self) -> Option<&PcaBaseline> {
        match self {
            Model::Gem(_) => None,
            Model::Pca(p) => Some(p),
            Model::PcaGem(pg) => Some(pg.pca()),
        }
    }
}

impl NominalBaseline for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Gem(b) => NominalBaseline::dim(b),
            Model::Pca(b) => NominalBaseline::dim(b),
            Model::PcaGem(b) => NominalBaseline::dim(b),
        }
    }

    fn sorted_stats(&self) -> &[f64] {
        match self {
            Model::Gem(b) => NominalBaseline::sorted_stats(b),
            Model::Pca(b) => NominalBaseline::sorted_stats(b),
            Model::PcaGem(b) => NominalBaseline::sorted_stats(b),
        }
    }

    fn score(&self, x: &[f64]) -> tailwatch_core::Result<f64> {
        match self {
            Model::Gem(b) => NominalBaseline::score(b, x),
            Model::Pca(b) => NominalBaseline::score(b, x),
            Model::PcaGem(b) => NominalBaseline::score(b, x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the input file, hex.
    pub input_sha256: String,
    pub seed: u64,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub tool: String,
}

impl Provenance {
    pub fn new(input: &[u8], seed: u64, parameters: BTreeMap<String, serde_json::Value>) -> Self {
        Provenance {
            input_sha256: hex::encode(Sha256::digest(input)),
            seed,
            parameters,
            tool: concat!("tailwatch ", env!("CARGO_PKG_VERSION")).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: Model,
    pub provenance: Provenance,
}

mod packed {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn encode(v: &[f64]) -> String {
        let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
        STANDARD.encode(bytes)
    }

    pub fn decode(s: &str) -> Result<Vec<f64>, String> {
        let bytes = STANDARD.decode(s).map_err(|e| e.to_string())?;
        if bytes.len() % 8 != 0 {
            return Err("packed f64 array has a partial element".into());
        }
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let s = String::deserialize(d)?;
        decode(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct RawGem {
    dim: usize,
    n1: usize,
    k: usize,
    seed: u64,
    #[serde(with = "packed")]
    reference: Vec<f64>,
    #[serde(with = "packed")]
    sorted_stats: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPca {
    dim: usize,
    rank: usize,
    gamma_achieved: f64,
    #[serde(with = "packed")]
    mean: Vec<f64>,
    /// Row-major `dim × rank`.
    #[serde(with = "packed")]
    basis: Vec<f64>,
    #[serde(with = "packed")]
    eigenvalues: Vec<f64>,
    #[serde(with = "packed")]
    sorted_stats: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawFile {
    format: String,
    version: u32,
    kind: String,
    prng: String,
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pca: Option<RawPca>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gem: Option<RawGem>,
}

fn raw_gem(b: &GemBaseline) -> RawGem {
    RawGem {
        dim: b.dim(),
        n1: b.n1(),
        k: b.k(),
        seed: b.seed(),
        reference: b.reference().as_flat().to_vec(),
        sorted_stats: b.sorted_stats().to_vec(),
    }
}

fn raw_pca(b: &PcaBaseline) -> RawPca {
    RawPca {
        dim: b.dim(),
        rank: b.rank(),
        gamma_achieved: b.gamma_achieved(),
        mean: b.mean().to_vec(),
        basis: b.basis().to_vec(),
        eigenvalues: b.eigenvalues().to_vec(),
        sorted_stats: b.sorted_stats().to_vec(),
    }
}

fn gem_from_raw(r: RawGem) -> Result<GemBaseline> {
    let s1 = PointSet::from_flat(r.dim, r.reference)?;
    if s1.len() != r.n1 {
        return Err(Error::Model(format!("reference set holds {} points, header says {}", s1.len(), r.n1)));
    }
    Ok(GemBaseline::from_parts(s1, r.k, r.sorted_stats, r.seed)?)
}

fn pca_from_raw(r: RawPca) -> Result<PcaBaseline> {
    if r.mean.len() != r.dim {
        return Err(Error::Model("mean length does not match dim".into()));
    }
    Ok(PcaBaseline::from_parts(r.mean, r.basis, r.eigenvalues, r.rank, r.sorted_stats)?)
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String> {
        let (pca, gem) = match &self.model {
            Model::Gem(g) => (None, Some(raw_gem(g))),
            Model::Pca(p) => (Some(raw_pca(p)), None),
            Model::PcaGem(pg) => (Some(raw_pca(pg.pca())), Some(raw_gem(pg.gem()))),
        };
        let raw = RawFile {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            kind: self.model.kind().into(),
            prng: PARTITION_PRNG.into(),
            provenance: self.provenance.clone(),
            pca,
            gem,
        };
        serde_json::to_string_pretty(&raw).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawFile = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        if raw.format != FORMAT {
            return Err(Error::Model(format!("unknown format tag {:?}", raw.format)));
        }
        if raw.version != FORMAT_VERSION {
            return Err(Error::Model(format!("unsupported format version {}", raw.version)));
        }
        if raw.prng != PARTITION_PRNG {
            return Err(Error::Model(format!(
                "model was partitioned with {:?}, this build uses {PARTITION_PRNG:?}",
                raw.prng
            )));
        }
        let model = match (raw.kind.as_str(), raw.pca, raw.gem) {
            ("gem", None, Some(g)) => Model::Gem(gem_from_raw(g)?),
            ("pca", Some(p), None) => Model::Pca(pca_from_raw(p)?),
            ("pca+gem", Some(p), Some(g)) => Model::PcaGem(ProjectedGemBaseline::from_parts(pca_from_raw(p)?, gem_from_raw(g)?)?),
            (kind, _, _) => return Err(Error::Model(format!("kind {kind:?} does not match the stored sections"))),
        };
        Ok(ModelFile { model, provenance: raw.provenance })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
