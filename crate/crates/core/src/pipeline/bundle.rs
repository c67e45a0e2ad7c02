use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{PipelineConfig, Policy};
use crate::autoenc::Autoencoder;
use crate::dataio::{AttackTaxonomy, CategoricalEncoder, NormParams, Schema};
use crate::dbn::DbnModel;
use crate::featsel::FeatureSubset;
use crate::som::AnomalyModel;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HIDS";
pub const FORMAT_MAJOR: u16 = 1;
pub const FORMAT_MINOR: u16 = 0;
/// Byte offset and length of the timestamp, which the checksum skips.
pub const TIMESTAMP_RANGE: std::ops::Range<usize> = 8..16;
const HEADER_LEN: usize = 24;
const DIGEST_LEN: usize = 32;

/// Everything needed to score new records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedBundle {
    pub version: String,
    pub schema: Schema,
    pub taxonomy: Option<AttackTaxonomy>,
    pub encoder: CategoricalEncoder,
    pub norm: NormParams,
    pub subset: FeatureSubset,
    pub autoencoder: Autoencoder,
    pub latent_norm: NormParams,
    pub anomaly: AnomalyModel,
    pub dbn: DbnModel,
    pub label_names: Vec<String>,
    pub normal_id: Option<usize>,
    pub policy: Policy,
    pub config: PipelineConfig,
}

impl TrainedBundle {
    /// Checks that component dimensions chain.
    pub fn validate(&self) -> Result<()> {
        let chain = |what: &str, a: usize, b: usize| {
            if a == b {
                Ok(())
            } else {
                Err(Error::Bundle(format!("{what}: {a} vs {b}")))
            }
        };
        chain("encoded columns vs normalization", self.encoder.output_names().len(), self.norm.dim())?;
        chain("selected features vs autoencoder input", self.subset.len(), self.autoencoder.input_dim())?;
        chain("autoencoder latent vs latent scaler", self.autoencoder.latent_dim(), self.latent_norm.dim())?;
        chain("autoencoder latent vs SOM", self.autoencoder.latent_dim(), self.anomaly.grid.dim())?;
        chain("autoencoder latent vs DBN input", self.autoencoder.latent_dim(), self.dbn.n_inputs())?;
        chain("DBN classes vs label map", self.dbn.n_classes(), self.label_names.len())?;
        self.autoencoder.validate().map_err(|e| Error::Bundle(e.to_string()))?;
        self.dbn.validate()?;
        if let Some(i) = self.normal_id {
            if i >= self.label_names.len() {
                return Err(Error::Bundle(format!("normal class id {i} outside the label map")));
            }
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    /// Id of the reserved "unknown-attack" verdict.
    pub fn unknown_id(&self) -> usize {
        self.label_names.len()
    }

    /// Serializes into the versioned container with a given timestamp.
    pub fn to_bytes_at(&self, timestamp: u64) -> Result<Vec<u8>> {
        let payload = serde_json::to_vec(self)?;
        let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + DIGEST_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_MAJOR.to_le_bytes());
        out.extend_from_slice(&FORMAT_MINOR.to_le_bytes());
        out.extend_from_slice(&timestamp.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        let digest = checksum(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        self.to_bytes_at(now)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::Bundle("not a model bundle (bad magic bytes)".into()));
        }
        let major = u16::from_le_bytes([bytes[4], bytes[5]]);
        let minor = u16::from_le_bytes([bytes[6], bytes[7]]);
        if major > FORMAT_MAJOR {
            return Err(Error::Bundle(format!(
                "bundle format {major}.{minor} is newer than supported {FORMAT_MAJOR}.{FORMAT_MINOR}; refusing to load"
            )));
        }
        if bytes.len() < HEADER_LEN + DIGEST_LEN {
            return Err(Error::Bundle("checksum mismatch: bundle is truncated".into()));
        }
        let len = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
        if bytes.len() != HEADER_LEN + len + DIGEST_LEN {
            return Err(Error::Bundle(format!(
                "checksum mismatch: bundle is {} bytes, header declares {}",
                bytes.len(),
                HEADER_LEN + len + DIGEST_LEN
            )));
        }
        let (body, digest) = bytes.split_at(HEADER_LEN + len);
        if checksum(body).as_slice() != digest {
            return Err(Error::Bundle("checksum mismatch: bundle is corrupt".into()));
        }
        let bundle: TrainedBundle = serde_json::from_slice(&body[HEADER_LEN..])?;
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// SHA-256 over everything except the timestamp field.
fn checksum(body: &[u8]) -> [u8; DIGEST_LEN] {
    let mut h = Sha256::new();
    h.update(&body[..TIMESTAMP_RANGE.start]);
    h.update(&body[TIMESTAMP_RANGE.end..]);
    h.finalize().into()
}

/// Hex digest of a bundle file's checksum trailer.
pub fn bundle_digest(bytes: &[u8]) -> Option<String> {
    let tail = bytes.get(bytes.len().checked_sub(DIGEST_LEN)?..)?;
    Some(tail.iter().map(|b| format!("{b:02x}")).collect())
}
