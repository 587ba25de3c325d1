//! Named-tensor files: a UTF-8 manifest plus one flat little-endian `f64` blob.
//!
//! Manifest records are `name [d0,d1,...] byte_offset`, one per line, in the
//! order the tensors appear in the blob.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::tensor::Tensor;
use crate::error::{Error, Result};

const HEADER: &str = "# name shape byte_offset";

pub fn manifest_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.manifest"))
}

pub fn blob_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.f64"))
}

pub fn save_tensors<'a>(
    dir: &Path,
    stem: &str,
    tensors: impl IntoIterator<Item = (&'a str, &'a Tensor)>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::from(HEADER);
    manifest.push('\n');
    let mut blob: Vec<u8> = Vec::new();
    for (name, t) in tensors {
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Config(format!("invalid tensor name {name:?}")));
        }
        let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        manifest.push_str(&format!("{name} [{}] {}\n", dims.join(","), blob.len()));
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mpath = manifest_path(dir, stem);
    fs::write(&mpath, manifest).map_err(|e| Error::io(&mpath, e))?;
    let bpath = blob_path(dir, stem);
    let mut f = fs::File::create(&bpath).map_err(|e| Error::io(&bpath, e))?;
    f.write_all(&blob).map_err(|e| Error::io(&bpath, e))?;
    Ok(())
}

pub fn load_tensors(dir: &Path, stem: &str) -> Result<Vec<(String, Tensor)>> {
    let mpath = manifest_path(dir, stem);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let bpath = blob_path(dir, stem);
    let blob = fs::read(&bpath).map_err(|e| Error::io(&bpath, e))?;

    let mut out = Vec::new();
    let mut expected_offset = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| Error::parse(&mpath, lineno + 1, msg);
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [name, shape, offset] = fields[..] else {
            return Err(bad("expected `name [shape] offset`"));
        };
        let inner = shape
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| bad("shape must be bracketed"))?;
        let shape: Vec<usize> = if inner.is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|d| d.parse::<usize>().map_err(|_| bad("bad dimension")))
                .collect::<Result<_>>()?
        };
        let offset: usize = offset.parse().map_err(|_| bad("bad byte offset"))?;
        if offset != expected_offset {
            return Err(bad(&format!(
                "offset {offset} does not follow previous record ({expected_offset})"
            )));
        }
        let n: usize = shape.iter().product();
        let end = offset + 8 * n;
        if end > blob.len() {
            return Err(Error::parse(
                &bpath,
                0,
                format!(
                    "tensor {name} needs bytes {offset}..{end}, blob has {}",
                    blob.len()
                ),
            ));
        }
        let data = blob[offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((name.to_string(), Tensor::new(shape, data)?));
        expected_offset = end;
    }
    if expected_offset != blob.len() {
        return Err(Error::parse(
            &bpath,
            0,
            format!(
                "{} trailing bytes after last tensor",
                blob.len() - expected_offset
            ),
        ));
    }
    Ok(out)
}
