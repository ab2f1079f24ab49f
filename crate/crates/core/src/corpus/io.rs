use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use super::{Dataset, ModalityEmbeddings};
use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"VIMMEMB1";
pub const INTERACTIONS_FILE: &str = "interactions.tsv";
pub const EMBEDDING_EXTENSION: &str = "emb";

const INTERACTION_HEADER: &str = "VIMM-INT";
const INTERACTION_VERSION: &str = "1";

/// `(users, items, pairs)` as read from an interaction file.
pub type InteractionList = (usize, usize, Vec<(u32, u32)>);

/// Parses an interaction file: header `VIMM-INT 1 <U> <I>`, then one
/// `<user>\t<item>` line per interaction. Returns `(U, I, pairs)`.
pub fn read_interactions(path: &Path) -> Result<InteractionList> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.split('\n').enumerate().map(|(n, l)| (n + 1, l));

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format_line(path, 1, "missing header"))?;
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 4 || fields[0] != INTERACTION_HEADER || fields[1] != INTERACTION_VERSION {
        return Err(Error::format_line(
            path,
            1,
            format!(
                "malformed header {header:?}, expected \"{INTERACTION_HEADER} {INTERACTION_VERSION} <users> <items>\""
            ),
        ));
    }
    let parse_count = |s: &str, what: &str| -> Result<usize> {
        match s.parse::<u32>() {
            Ok(n) if n > 0 => Ok(n as usize),
            _ => Err(Error::format_line(path, 1, format!("malformed {what} count {s:?}"))),
        }
    };
    let user_count = parse_count(fields[2], "user")?;
    let item_count = parse_count(fields[3], "item")?;

    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    let mut ended = false;
    for (n, line) in lines {
        if line.is_empty() {
            // Only the terminating newline may produce an empty line.
            ended = true;
            continue;
        }
        if ended {
            return Err(Error::format_line(path, n - 1, "empty line"));
        }
        let (u, i) = line
            .split_once('\t')
            .ok_or_else(|| Error::format_line(path, n, format!("expected <user>\\t<item>, got {line:?}")))?;
        let parse_index = |s: &str, bound: usize, what: &str| -> Result<u32> {
            let v: u32 = s
                .parse()
                .map_err(|_| Error::format_line(path, n, format!("malformed {what} index {s:?}")))?;
            if v as usize >= bound {
                return Err(Error::format_line(
                    path,
                    n,
                    format!("{what} index {v} out of range (count {bound})"),
                ));
            }
            Ok(v)
        };
        let u = parse_index(u, user_count, "user")?;
        let i = parse_index(i, item_count, "item")?;
        if !seen.insert((u, i)) {
            return Err(Error::format_line(path, n, format!("duplicate interaction ({u}, {i})")));
        }
        pairs.push((u, i));
    }
    Ok((user_count, item_count, pairs))
}

pub fn write_interactions(path: &Path, user_count: usize, item_count: usize, pairs: &[(u32, u32)]) -> Result<()> {
    let mut out = String::with_capacity(16 + pairs.len() * 10);
    out.push_str(&format!(
        "{INTERACTION_HEADER} {INTERACTION_VERSION} {user_count} {item_count}\n"
    ));
    for (u, i) in pairs {
        out.push_str(&format!("{u}\t{i}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a `VIMMEMB1` embedding table. `modality` names the result.
pub fn read_embeddings(path: &Path, modality: &str) -> Result<ModalityEmbeddings> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 {
        return Err(Error::format_offset(path, 0, "truncated header"));
    }
    if &bytes[..8] != EMBEDDING_MAGIC {
        return Err(Error::format_offset(path, 0, "bad magic, expected VIMMEMB1"));
    }
    let item_count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::format_offset(path, 12, "dim must be positive"));
    }
    let expected = 16 + item_count * dim * 4;
    if bytes.len() != expected {
        return Err(Error::format_offset(
            path,
            bytes.len().min(expected) as u64,
            format!("file is {} bytes, header implies {expected}", bytes.len()),
        ));
    }
    let data: Vec<f32> = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::format_offset(path, 16 + 4 * pos as u64, "non-finite value"));
    }
    ModalityEmbeddings::new(modality, dim, data)
}

pub fn write_embeddings(path: &Path, embeddings: &ModalityEmbeddings) -> Result<()> {
    let mut out = Vec::with_capacity(16 + embeddings.as_slice().len() * 4);
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&(embeddings.item_count() as u32).to_le_bytes());
    out.extend_from_slice(&(embeddings.dim() as u32).to_le_bytes());
    for v in embeddings.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads an interaction file and one embedding file per modality.
pub fn load_dataset(interactions_path: &Path, embedding_paths: &BTreeMap<String, PathBuf>) -> Result<Dataset> {
    let (user_count, item_count, interactions) = read_interactions(interactions_path)?;
    let mut modalities = BTreeMap::new();
    for (name, path) in embedding_paths {
        let emb = read_embeddings(path, name)?;
        if emb.item_count() != item_count {
            return Err(Error::format_offset(
                path,
                8,
                format!(
                    "row-count mismatch: {} items, interaction file declares {item_count}",
                    emb.item_count()
                ),
            ));
        }
        modalities.insert(name.clone(), emb);
    }
    Dataset::new(user_count, item_count, interactions, modalities)
}

/// Loads a dataset directory: `interactions.tsv` plus one `<modality>.emb`
/// per modality.
pub fn load_dataset_dir(dir: &Path) -> Result<Dataset> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut embedding_paths = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(EMBEDDING_EXTENSION) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                embedding_paths.insert(stem.to_string(), path.clone());
            }
        }
    }
    load_dataset(&dir.join(INTERACTIONS_FILE), &embedding_paths)
}

pub fn save_dataset_dir(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_interactions(
        &dir.join(INTERACTIONS_FILE),
        dataset.user_count,
        dataset.item_count,
        &dataset.interactions,
    )?;
    for (name, emb) in &dataset.modalities {
        write_embeddings(&dir.join(format!("{name}.{EMBEDDING_EXTENSION}")), emb)?;
    }
    Ok(())
}

/// Reads an `<external-id>\t<index>` sidecar mapping.
pub fn read_id_map(path: &Path) -> Result<BTreeMap<String, u32>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, index) = line
            .rsplit_once('\t')
            .ok_or_else(|| Error::format_line(path, n + 1, "expected <external-id>\\t<index>"))?;
        let index: u32 = index
            .parse()
            .map_err(|_| Error::format_line(path, n + 1, format!("malformed index {index:?}")))?;
        if map.insert(id.to_string(), index).is_some() {
            return Err(Error::format_line(path, n + 1, format!("duplicate id {id:?}")));
        }
    }
    Ok(map)
}
