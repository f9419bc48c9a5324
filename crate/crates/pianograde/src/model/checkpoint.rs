//! Single-file checkpoint archive: a JSON header (model config + parameter
//! names in order) followed by one PSYT tensor blob per parameter.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::psyt::{read_psyt_raw, write_psyt_raw};
use crate::model::{DifficultyModel, ModelConfig};

const MAGIC: &[u8; 4] = b"PGCK";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    params: Vec<String>,
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &DifficultyModel) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = Header {
        config: model.config().clone(),
        params: model.named_params().iter().map(|p| p.name.clone()).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let io_err = |e: std::io::Error| Error::Format(format!("checkpoint write failed: {e}"));
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&json).map_err(io_err)?;
    for entry in model.named_params() {
        let t = entry.var.as_tensor();
        let values = t.flatten_all()?.to_vec1::<f32>()?;
        write_psyt_raw(&mut w, t.dims(), &values)?;
    }
    w.flush().map_err(io_err)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<DifficultyModel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io_err = |e: std::io::Error| Error::Format(format!("checkpoint read failed: {e}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {magic:?}, expected PGCK",
            path.display()
        )));
    }
    let mut u4 = [0u8; 4];
    r.read_exact(&mut u4).map_err(io_err)?;
    let version = u32::from_le_bytes(u4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let mut u8b = [0u8; 8];
    r.read_exact(&mut u8b).map_err(io_err)?;
    let json_len = u64::from_le_bytes(u8b) as usize;
    let mut json = vec![0u8; json_len];
    r.read_exact(&mut json).map_err(io_err)?;
    let header: Header = serde_json::from_slice(&json)?;

    // Any well-formed config builds the same parameter set; the stored
    // tensors then overwrite the fresh initialization in archive order.
    let model = DifficultyModel::new(header.config, 0)?;
    let expected: Vec<&str> = model.named_params().iter().map(|p| p.name.as_str()).collect();
    if header.params != expected {
        return Err(Error::Format(format!(
            "{}: checkpoint parameter list does not match the config ({} stored, {} expected)",
            path.display(),
            header.params.len(),
            expected.len()
        )));
    }
    for entry in model.named_params() {
        let (dims, values) = read_psyt_raw(&mut r)?;
        if dims != entry.var.dims() {
            return Err(Error::Format(format!(
                "{}: parameter {} has shape {dims:?}, config implies {:?}",
                path.display(),
                entry.name,
                entry.var.dims()
            )));
        }
        let t = Tensor::from_vec(values, dims, entry.var.device())?;
        entry.var.set(&t)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureTensor, Modality, NUM_BINS};
    use crate::model::TaskKind;
    use ndarray::Array3;

    fn sample() -> FeatureTensor {
        let data = Array3::from_shape_fn((NUM_BINS, 24, 1), |(b, t, _)| {
            ((b + t) % 5) as f32 / 5.0
        });
        FeatureTensor::new(data, 5.0, Modality::Cqt).unwrap()
    }

    #[test]
    fn round_trip_preserves_outputs_exactly() {
        let model =
            DifficultyModel::new(ModelConfig::difficulty(Modality::Cqt), 42).unwrap();
        let x = sample();
        let before = model.forward(&x).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_checkpoint(f.path(), &model).unwrap();
        let loaded = load_checkpoint(f.path()).unwrap();
        let after = loaded.forward(&x).unwrap();
        assert_eq!(
            before.head_activations(&TaskKind::Difficulty).unwrap(),
            after.head_activations(&TaskKind::Difficulty).unwrap()
        );
    }

    #[test]
    fn rejects_truncated_archive() {
        let model =
            DifficultyModel::new(ModelConfig::difficulty(Modality::Cqt), 1).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_checkpoint(f.path(), &model).unwrap();
        let bytes = std::fs::read(f.path()).unwrap();
        std::fs::write(f.path(), &bytes[..bytes.len() / 2]).unwrap();
        assert!(load_checkpoint(f.path()).is_err());
    }

    #[test]
    fn rejects_wrong_magic() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), b"NOPE").unwrap();
        assert!(load_checkpoint(f.path()).is_err());
    }
}
