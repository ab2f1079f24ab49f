//! `VIMMMDL1` model files: modality count and layer count, then per modality
//! its name, `U`, `I`, `d` and four row-major f32 tables (base users, base
//! items, aggregated users, aggregated items).

use std::fs;
use std::path::Path;

use super::graph::LayerTables;
use super::model::{EmbeddingModel, ModalityModel};
use super::table::Table;
use crate::error::{invalid, Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"VIMMMDL1";

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_table(out: &mut Vec<u8>, t: &Table) {
    for &v in t.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub fn encode_checkpoint(model: &EmbeddingModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, model.modalities.len());
    put_u32(&mut out, model.layers);
    for m in &model.modalities {
        put_u32(&mut out, m.name.len());
        out.extend_from_slice(m.name.as_bytes());
        put_u32(&mut out, model.user_count);
        put_u32(&mut out, model.item_count);
        put_u32(&mut out, model.dim);
        for t in [&m.base.users, &m.base.items, &m.aggregated.users, &m.aggregated.items] {
            put_table(&mut out, t);
        }
    }
    out
}

pub fn save_checkpoint(model: &EmbeddingModel, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<EmbeddingModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format_offset(self.path, self.pos as u64, "truncated checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn table(&mut self, rows: usize, dim: usize) -> Result<Table> {
        let len = rows
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::format_offset(self.path, self.pos as u64, "table size overflows"))?;
        let data = self
            .take(len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok(Table::from_vec(rows, dim, data))
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<EmbeddingModel> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::format_offset(path, 0, "bad magic, expected VIMMMDL1"));
    }
    let count = r.u32()?;
    let layers = r.u32()?;
    if count == 0 {
        return Err(Error::format_offset(path, 8, "checkpoint has no modalities"));
    }
    let mut shape = None;
    let mut modalities = Vec::with_capacity(count);
    for _ in 0..count {
        let at = r.pos;
        let name_len = r.u32()?;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::format_offset(path, at as u64, "modality name is not UTF-8"))?;
        let dims = (r.u32()?, r.u32()?, r.u32()?);
        if shape.is_some_and(|s| s != dims) {
            return Err(Error::format_offset(
                path,
                at as u64,
                format!("modality {name} has inconsistent table shape"),
            ));
        }
        shape = Some(dims);
        let (users, items, dim) = dims;
        let base = LayerTables {
            users: r.table(users, dim)?,
            items: r.table(items, dim)?,
        };
        let aggregated = LayerTables {
            users: r.table(users, dim)?,
            items: r.table(items, dim)?,
        };
        modalities.push(ModalityModel { name, base, aggregated });
    }
    if r.pos != bytes.len() {
        return Err(Error::format_offset(
            path,
            r.pos as u64,
            "trailing bytes after last table",
        ));
    }
    let (user_count, item_count, dim) = shape.unwrap();
    let model = EmbeddingModel {
        user_count,
        item_count,
        dim,
        layers,
        modalities,
    };
    if !model.is_finite() {
        return Err(invalid!("checkpoint {} contains non-finite values", path.display()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recsys::model::ModalitySource;

    #[test]
    fn round_trip_at_f32_precision() {
        let model =
            EmbeddingModel::init(3, 5, &[ModalitySource::Named("t"), ModalitySource::Named("v")], 4, 2, 9).unwrap();
        let bytes = encode_checkpoint(&model);
        let back = decode_checkpoint(&bytes, Path::new("m")).unwrap();
        assert_eq!(back.layers, 2);
        assert_eq!(back.modalities[1].name, "v");
        for (a, b) in model.modalities.iter().zip(&back.modalities) {
            for (x, y) in a.base.users.as_slice().iter().zip(b.base.users.as_slice()) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn corrupt_files() {
        let model = EmbeddingModel::init(2, 2, &[ModalitySource::Named("t")], 2, 1, 0).unwrap();
        let bytes = encode_checkpoint(&model);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1], Path::new("m")).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad, Path::new("m")).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode_checkpoint(&long, Path::new("m")).is_err());
    }
}
