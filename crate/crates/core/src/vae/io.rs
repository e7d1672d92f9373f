//! Versioned binary serialization for trained models.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "RVAE" | version u32 | variant u8 | scale_div u8 | layer count u32
//! per layer: name len u32, name utf-8, ndim u32, dims u32…, f32 data
//! ```
//!
//! Normalization statistics ride along as pseudo-layers named `stats.*`
//! with shape `[2]` (mean, std). Loss curves are written separately as a
//! CSV sidecar by the training front end.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::Error;
use crate::Result;

use super::{VaeModel, Variant};

const MAGIC: &[u8; 4] = b"RVAE";
const VERSION: u32 = 1;

struct CountingReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> CountingReader<R> {
    fn read_exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(Error::format(
                self.offset,
                format!("truncated file while reading {what}"),
            )),
            Err(e) => Err(e.into()),
        }
    }

    fn read_u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn read_u8(&mut self, what: &str) -> Result<u8> {
        let mut b = [0u8; 1];
        self.read_exact(&mut b, what)?;
        Ok(b[0])
    }
}

/// Write a model (parameters plus stats) to `path`.
pub fn save_model(model: &VaeModel<f32>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[model.variant.tag()])?;
    w.write_all(&[model.scale_div as u8])?;
    let count = model.arena.entries().len() + model.stats.len();
    w.write_all(&(count as u32).to_le_bytes())?;

    for e in model.arena.entries() {
        write_tensor_header(&mut w, &e.name, &e.shape)?;
        for v in &model.arena.data[e.offset..e.offset + e.len] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    for (name, pair) in &model.stats {
        write_tensor_header(&mut w, &format!("stats.{name}"), &[2])?;
        for v in pair {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_tensor_header<W: Write>(w: &mut W, name: &str, shape: &[usize]) -> Result<()> {
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    Ok(())
}

/// Load a model written by [`save_model`].
pub fn load_model(path: &Path) -> Result<VaeModel<f32>> {
    let file = std::fs::File::open(path)?;
    let mut r = CountingReader {
        inner: BufReader::new(file),
        offset: 0,
    };

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:02x?}")));
    }
    let version = r.read_u32("version")?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let variant = Variant::from_tag(r.read_u8("variant tag")?)?;
    let scale_div = r.read_u8("scale divisor")? as usize;
    if scale_div != 1 && scale_div != 8 {
        return Err(Error::format(9, format!("bad scale divisor {scale_div}")));
    }
    let count = r.read_u32("layer count")? as usize;

    let mut model = VaeModel::<f32>::new(variant, scale_div);
    let lookup: HashMap<String, usize> = model
        .arena
        .entries()
        .iter()
        .enumerate()
        .map(|(i, e)| (e.name.clone(), i))
        .collect();
    let mut filled = vec![false; model.arena.entries().len()];

    for _ in 0..count {
        let name_offset = r.offset;
        let name_len = r.read_u32("name length")? as usize;
        if name_len > 4096 {
            return Err(Error::format(name_offset, "implausible name length".to_string()));
        }
        let mut name_buf = vec![0u8; name_len];
        r.read_exact(&mut name_buf, "layer name")?;
        let name = String::from_utf8(name_buf)
            .map_err(|_| Error::format(name_offset, "layer name is not UTF-8".to_string()))?;
        let ndim = r.read_u32("ndim")? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.read_u32("dim")? as usize);
        }
        let len: usize = shape.iter().product();

        if let Some(stat_name) = name.strip_prefix("stats.") {
            if len != 2 {
                return Err(Error::format(name_offset, format!("stat {name} must have 2 values")));
            }
            let mut pair = [0.0f64; 2];
            for p in pair.iter_mut() {
                let mut b = [0u8; 4];
                r.read_exact(&mut b, "stat value")?;
                *p = f32::from_le_bytes(b) as f64;
            }
            model.stats.push((stat_name.to_string(), pair));
            continue;
        }

        let idx = *lookup.get(&name).ok_or_else(|| {
            Error::format(name_offset, format!("unknown layer {name:?} for variant {}", variant.name()))
        })?;
        let entry = model.arena.entries()[idx].clone();
        if entry.shape != shape {
            return Err(Error::format(
                name_offset,
                format!(
                    "layer {name:?}: shape {shape:?} does not match expected {:?}",
                    entry.shape
                ),
            ));
        }
        let mut bytes = vec![0u8; 4 * len];
        r.read_exact(&mut bytes, "layer data")?;
        for (i, chunk) in bytes.chunks_exact(4).enumerate() {
            model.arena.data[entry.offset + i] =
                f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
        filled[idx] = true;
    }

    if let Some(missing) = filled.iter().position(|&f| !f) {
        return Err(Error::format(
            r.offset,
            format!(
                "missing layer {:?}",
                model.arena.entries()[missing].name
            ),
        ));
    }
    // reject trailing garbage
    let mut extra = [0u8; 1];
    if r.inner.read(&mut extra)? != 0 {
        return Err(Error::format(r.offset, "trailing bytes after last layer".to_string()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("radar-repr-io-{}-{name}", std::process::id()));
        p
    }

    #[test]
    fn round_trip_preserves_everything() {
        let mut model = VaeModel::<f32>::new(Variant::Chirp, 8);
        model.init(5);
        model.stats.push(("squash".into(), [1.25, 0.5]));
        let path = tmp("roundtrip.rvae");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.variant, Variant::Chirp);
        assert_eq!(loaded.scale_div, 8);
        assert_eq!(loaded.arena.data, model.arena.data);
        assert_eq!(loaded.stats, model.stats);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut model = VaeModel::<f32>::new(Variant::Rd, 8);
        model.init(1);
        let path = tmp("corrupt.rvae");
        save_model(&model, &path).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        match load_model(&path) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }

        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format { .. })));

        let mut extra = bytes.clone();
        extra.push(0);
        std::fs::write(&path, &extra).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format { .. })));

        std::fs::remove_file(&path).ok();
    }
}
