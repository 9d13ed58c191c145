//! Image directories.

use std::path::{Path, PathBuf};

use eswt_core::Tensor;

use crate::error::{Error, Result};
use crate::ppm;

/// The `.ppm` files in `dir`, sorted by name.
pub fn list_ppm(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::format(dir, "no .ppm images"));
    }
    Ok(files)
}

/// Loads every image of `dir` as `(file name, 1x3xHxW tensor)`.
pub fn load_dir(dir: &Path) -> Result<Vec<(String, Tensor<f32>)>> {
    list_ppm(dir)?
        .into_iter()
        .map(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, ppm::read(&p)?))
        })
        .collect()
}
