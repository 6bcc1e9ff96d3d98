//! Locating subject directories on disk.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use vibspeech::cohort::files;

/// `root` itself when it holds a manifest, otherwise its immediate
/// subdirectories that do, in name order.
pub fn subject_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let dirs = candidate_dirs(root, |dir| dir.join(files::MANIFEST).is_file())?;
    if dirs.is_empty() {
        bail!(
            "{}: no subject directories (none contain {})",
            root.display(),
            files::MANIFEST
        );
    }
    Ok(dirs)
}

/// Like [`subject_dirs`] but also accepts directories that hold speech
/// without a manifest, so incomplete subjects can be reported.
pub fn evaluation_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let looks_like_subject = |dir: &Path| dir.join(files::MANIFEST).is_file() || dir.join(files::SPEECH).is_file();
    let dirs = candidate_dirs(root, looks_like_subject)?;
    if dirs.is_empty() {
        bail!("{}: no subject directories found", root.display());
    }
    Ok(dirs)
}

fn candidate_dirs(root: &Path, accept: impl Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    if !root.is_dir() {
        bail!("{}: not a directory", root.display());
    }
    if accept(root) {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(root).with_context(|| format!("{}: cannot list directory", root.display()))? {
        let path = entry.with_context(|| root.display().to_string())?.path();
        if path.is_dir() && accept(&path) {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Radar-measured displacement when present, else the ground-truth neck signal.
pub fn displacement_path(dir: &Path) -> PathBuf {
    let measured = dir.join(files::RADAR);
    if measured.is_file() {
        measured
    } else {
        dir.join(files::NECK)
    }
}

pub fn subject_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Expands each argument with [`subject_dirs`], keeping argument order.
pub fn expand_all(roots: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for root in roots {
        out.extend(subject_dirs(root)?);
    }
    Ok(out)
}
