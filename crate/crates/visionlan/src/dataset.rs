//! Dataset container file.
//!
//! Layout: magic "VLDS", u32 version = 1, u32 sample count; per sample:
//! u16 text length, UTF-8 text, u16 H, u16 W, H*W fp32 little-endian pixels,
//! u16 box count, per box 4 x u16 (x0, y0, x1, y1). A plain-text manifest
//! sidecar lists one `index<TAB>text<TAB>seed` line per sample.

use crate::error::{Result, VlanError};
use crate::render::{CharBox, WordSample};
use crate::tensor::Tensor;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 4] = b"VLDS";
const VERSION: u32 = 1;

pub fn manifest_path(dataset: &Path) -> PathBuf {
    let mut os = dataset.as_os_str().to_owned();
    os.push(".manifest");
    PathBuf::from(os)
}

pub fn write_dataset(path: &Path, samples: &[WordSample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(samples.len() as u32).to_le_bytes())?;
    for s in samples {
        let text = s.text.as_bytes();
        if text.len() > u16::MAX as usize {
            return Err(VlanError::Format("sample text too long".into()));
        }
        w.write_all(&(text.len() as u16).to_le_bytes())?;
        w.write_all(text)?;
        let (h, wd) = s.image.dims2()?;
        w.write_all(&(h as u16).to_le_bytes())?;
        w.write_all(&(wd as u16).to_le_bytes())?;
        for &p in s.image.data() {
            w.write_all(&p.to_le_bytes())?;
        }
        w.write_all(&(s.boxes.len() as u16).to_le_bytes())?;
        for b in &s.boxes {
            for v in [b.x0, b.y0, b.x1, b.y1] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;

    let mut m = BufWriter::new(File::create(manifest_path(path))?);
    for (i, s) in samples.iter().enumerate() {
        writeln!(m, "{i}\t{}\t{}", s.text, s.seed)?;
    }
    m.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<WordSample>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(VlanError::Format(format!("bad dataset magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(VlanError::Format(format!("unsupported dataset version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let seeds = read_manifest_seeds(path, count);

    let mut samples = Vec::with_capacity(count);
    for idx in 0..count {
        let text_len = read_u16(&mut r)? as usize;
        let mut text = vec![0u8; text_len];
        r.read_exact(&mut text)?;
        let text = String::from_utf8(text)
            .map_err(|e| VlanError::Format(format!("sample {idx} text not UTF-8: {e}")))?;
        let h = read_u16(&mut r)? as usize;
        let w = read_u16(&mut r)? as usize;
        let mut pixels = vec![0f32; h * w];
        let mut buf = [0u8; 4];
        for p in pixels.iter_mut() {
            r.read_exact(&mut buf)?;
            *p = f32::from_le_bytes(buf);
        }
        let n_boxes = read_u16(&mut r)? as usize;
        let mut boxes = Vec::with_capacity(n_boxes);
        for _ in 0..n_boxes {
            let x0 = read_u16(&mut r)?;
            let y0 = read_u16(&mut r)?;
            let x1 = read_u16(&mut r)?;
            let y1 = read_u16(&mut r)?;
            boxes.push(CharBox { x0, y0, x1, y1 });
        }
        samples.push(WordSample {
            text,
            image: Tensor::new(vec![h, w], pixels)?,
            boxes,
            seed: seeds.as_ref().map_or(0, |s| s[idx]),
        });
    }
    Ok(samples)
}

fn read_manifest_seeds(dataset: &Path, count: usize) -> Option<Vec<u64>> {
    let text = std::fs::read_to_string(manifest_path(dataset)).ok()?;
    let mut seeds = vec![0u64; count];
    for line in text.lines() {
        let mut fields = line.split('\t');
        let idx: usize = fields.next()?.parse().ok()?;
        let _text = fields.next()?;
        let seed: u64 = fields.next()?.parse().ok()?;
        if idx < count {
            seeds[idx] = seed;
        }
    }
    Some(seeds)
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut buf = [0u8; 2];
    r.read_exact(&mut buf)?;
    Ok(u16::from_le_bytes(buf))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{render_word, RenderConfig};

    #[test]
    fn round_trip_is_byte_identical() {
        let cfg = RenderConfig::default();
        let samples: Vec<WordSample> = ["house", "cat", "zebra"]
            .iter()
            .enumerate()
            .map(|(i, w)| render_word(w, &cfg, i as u64 + 10).unwrap())
            .collect();

        let dir = std::env::temp_dir().join(format!("vlds_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p1 = dir.join("a.vlds");
        let p2 = dir.join("b.vlds");
        write_dataset(&p1, &samples).unwrap();
        let loaded = read_dataset(&p1).unwrap();
        assert_eq!(loaded.len(), 3);
        for (a, b) in samples.iter().zip(loaded.iter()) {
            assert_eq!(a.text, b.text);
            assert_eq!(a.boxes, b.boxes);
            assert_eq!(a.seed, b.seed);
            assert_eq!(
                a.image.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.image.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
        write_dataset(&p2, &loaded).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = std::env::temp_dir().join(format!("vlds_bad_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("bad.vlds");
        std::fs::write(&p, b"NOPE....").unwrap();
        assert!(matches!(read_dataset(&p), Err(VlanError::Format(_))));
        std::fs::remove_dir_all(&dir).ok();
    }
}
