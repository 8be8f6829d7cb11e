//! Parameter checkpoints: a JSON document holding a format tag, a version,
//! the network descriptor and every layer's tensors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LayerParams, NetworkSpec, Parameters};
use crate::error::{io_err, invalid, Result};

pub const CHECKPOINT_FORMAT: &str = "modrl-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    spec: NetworkSpec,
    layers: Vec<LayerParams>,
}

pub fn save_checkpoint(path: impl AsRef<Path>, spec: &NetworkSpec, params: &Parameters) -> Result<()> {
    spec.check_params(params)?;
    let doc = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        spec: spec.clone(),
        layers: params.layers().to_vec(),
    };
    let text = serde_json::to_string(&doc)?;
    std::fs::write(path.as_ref(), text).map_err(io_err(path))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(NetworkSpec, Parameters)> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(io_err(path.as_ref()))?;
    let doc: Checkpoint = serde_json::from_str(&text)?;
    if doc.format != CHECKPOINT_FORMAT {
        return Err(invalid(format!("not a checkpoint file (format {:?})", doc.format)));
    }
    if doc.version != CHECKPOINT_VERSION {
        return Err(invalid(format!("unsupported checkpoint version {}", doc.version)));
    }
    let params = Parameters::from_layers(doc.layers);
    doc.spec.check_params(&params)?;
    Ok((doc.spec, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let spec = NetworkSpec::vector_reference(18, 2, 4).unwrap();
        let params = spec.init_params(42);
        save_checkpoint(&path, &spec, &params).unwrap();
        let (spec2, params2) = load_checkpoint(&path).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(params.flatten().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                   params2.flatten().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn wrong_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let spec = NetworkSpec::mlp(2, &[], 1, 1).unwrap();
        save_checkpoint(&path, &spec, &spec.init_params(0)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap().replace("\"version\":1", "\"version\":9");
        std::fs::write(&path, text).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
