//! Checkpoint file.
//!
//! Layout: magic "VLAN", u32 version = 1, u64 step, u32 tensor count;
//! per tensor: u16 name length, UTF-8 name, u8 ndim, ndim x u32 dims,
//! fp32 little-endian data; trailing CRC32 over everything between the
//! magic and the checksum itself.
//!
//! The RNG resume state and the resolved config snapshot ride along as
//! reserved-name tensor records ("meta.rng_state" as u16 chunks,
//! "meta.config" as one byte per element), keeping the container layout
//! uniform while making checkpoints self-describing.

use crate::error::{Result, VlanError};
use crate::params::ModelParams;
use crate::tensor::Tensor;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"VLAN";
const VERSION: u32 = 1;
const RNG_NAME: &str = "meta.rng_state";
const CONFIG_NAME: &str = "meta.config";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub version: u32,
    pub step: u64,
    pub tensors: Vec<(String, Tensor<f32>)>,
    pub rng_state: [u64; 2],
    pub config_snapshot: String,
}

fn push_tensor(buf: &mut Vec<u8>, name: &str, t: &Tensor<f32>) -> Result<()> {
    let name_bytes = name.as_bytes();
    if name_bytes.len() > u16::MAX as usize {
        return Err(VlanError::Format(format!("tensor name too long: {name}")));
    }
    buf.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
    buf.extend_from_slice(name_bytes);
    let shape = t.shape();
    if shape.len() > u8::MAX as usize {
        return Err(VlanError::Format("tensor rank exceeds u8".into()));
    }
    buf.push(shape.len() as u8);
    for &d in shape {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

fn rng_state_tensor(state: [u64; 2]) -> Tensor<f32> {
    // Each u64 split into four little-endian u16 chunks; u16 fits exactly
    // in an f32 mantissa.
    let mut vals = Vec::with_capacity(8);
    for word in state {
        for i in 0..4 {
            vals.push(((word >> (16 * i)) & 0xFFFF) as f32);
        }
    }
    Tensor::new(vec![8], vals).expect("fixed shape")
}

fn rng_state_from_tensor(t: &Tensor<f32>) -> Result<[u64; 2]> {
    if t.numel() != 8 {
        return Err(VlanError::Format("rng state record must have 8 entries".into()));
    }
    let mut out = [0u64; 2];
    for (w, chunk) in t.data().chunks(4).enumerate() {
        for (i, &v) in chunk.iter().enumerate() {
            out[w] |= ((v as u64) & 0xFFFF) << (16 * i);
        }
    }
    Ok(out)
}

pub fn save(
    path: &Path,
    params: &ModelParams<f32>,
    step: u64,
    rng_state: [u64; 2],
    config_snapshot: &str,
) -> Result<()> {
    let mut payload = Vec::new();
    payload.extend_from_slice(&VERSION.to_le_bytes());
    payload.extend_from_slice(&step.to_le_bytes());
    let count = params.len() + 2;
    payload.extend_from_slice(&(count as u32).to_le_bytes());
    push_tensor(&mut payload, RNG_NAME, &rng_state_tensor(rng_state))?;
    let config_tensor = Tensor::new(
        vec![config_snapshot.len().max(1)],
        if config_snapshot.is_empty() {
            vec![0f32]
        } else {
            config_snapshot.bytes().map(|b| b as f32).collect()
        },
    )?;
    push_tensor(&mut payload, CONFIG_NAME, &config_tensor)?;
    for (_, p) in params.iter() {
        push_tensor(&mut payload, &p.name, &p.value)?;
    }
    let crc = crc32fast::hash(&payload);

    let mut file = File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&payload)?;
    file.write_all(&crc.to_le_bytes())?;
    file.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(VlanError::Format(format!("bad checkpoint magic {magic:?}")));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if rest.len() < 4 {
        return Err(VlanError::Format("checkpoint truncated".into()));
    }
    let (payload, crc_bytes) = rest.split_at(rest.len() - 4);
    let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored_crc != computed {
        return Err(VlanError::Format(format!(
            "checkpoint CRC mismatch: stored {stored_crc:#010x}, computed {computed:#010x}"
        )));
    }

    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > payload.len() {
            return Err(VlanError::Format("checkpoint truncated".into()));
        }
        let s = &payload[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };

    let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(VlanError::Format(format!("unsupported checkpoint version {version}")));
    }
    let step = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
    let count = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;

    let mut tensors = Vec::with_capacity(count);
    let mut rng_state = [0u64; 2];
    let mut config_snapshot = String::new();
    for _ in 0..count {
        let name_len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(&mut pos, name_len)?.to_vec())
            .map_err(|e| VlanError::Format(format!("tensor name not UTF-8: {e}")))?;
        let ndim = take(&mut pos, 1)?[0] as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize);
        }
        let numel: usize = shape.iter().product();
        let raw = take(&mut pos, numel * 4)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor::new(shape, data)?;
        match name.as_str() {
            RNG_NAME => rng_state = rng_state_from_tensor(&tensor)?,
            CONFIG_NAME => {
                config_snapshot = tensor.data().iter().map(|&b| b as u8 as char).collect();
            }
            _ => tensors.push((name, tensor)),
        }
    }
    if pos != payload.len() {
        return Err(VlanError::Format("trailing bytes in checkpoint".into()));
    }
    Ok(Checkpoint { version, step, tensors, rng_state, config_snapshot })
}

impl Checkpoint {
    /// Copies stored values into a freshly built parameter collection.
    /// Name sets and shapes must match exactly.
    pub fn restore_into(&self, params: &mut ModelParams<f32>) -> Result<()> {
        if self.tensors.len() != params.len() {
            return Err(VlanError::Format(format!(
                "checkpoint has {} parameters, model has {}",
                self.tensors.len(),
                params.len()
            )));
        }
        for (name, tensor) in &self.tensors {
            let id = params
                .id(name)
                .ok_or_else(|| VlanError::Format(format!("checkpoint parameter '{name}' unknown to model")))?;
            if params.value(id).shape() != tensor.shape() {
                return Err(VlanError::Format(format!(
                    "parameter '{name}' shape {:?} does not match checkpoint {:?}",
                    params.value(id).shape(),
                    tensor.shape()
                )));
            }
            params.value_mut(id).data_mut().copy_from_slice(tensor.data());
        }
        Ok(())
    }
}
