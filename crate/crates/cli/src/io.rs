//! Input discovery and buffered output writing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hoikit::format::{sequence_from_chunk, Container, Encoding};
use hoikit::geometry::TriangleMesh;
use hoikit::motion::HoiSequence;

use crate::error::{CliError, Context};

/// Files in `dir` with one of `exts`, sorted by name.
pub fn list_files(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>, CliError> {
    let entries =
        std::fs::read_dir(dir).invalid(format!("cannot read directory {}", dir.display()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| exts.contains(&e))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn read_container(path: &Path) -> Result<Container, CliError> {
    Container::read_file(path).invalid(format!("cannot read {}", path.display()))
}

/// Every motion container in `dir`, keyed by file stem.
pub fn load_corpus(dir: &Path) -> Result<Vec<(String, HoiSequence)>, CliError> {
    let files = list_files(dir, &["hoi", "hoit"])?;
    if files.is_empty() {
        return Err(CliError::validation(format!(
            "no motion files in {}",
            dir.display()
        )));
    }
    files
        .iter()
        .map(|p| {
            let c = read_container(p)?;
            let seq = c
                .chunk("motion")
                .and_then(sequence_from_chunk)
                .invalid(p.display())?;
            Ok((stem(p), seq))
        })
        .collect()
}

/// Every `.obj` mesh in `dir`, keyed by file stem.
pub fn load_meshes(dir: &Path) -> Result<BTreeMap<String, TriangleMesh>, CliError> {
    list_files(dir, &["obj"])?
        .into_iter()
        .map(|p| Ok((stem(&p), TriangleMesh::load_obj(&p).invalid(p.display())?)))
        .collect()
}

pub fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "missing input file {}",
            path.display()
        )))
    }
}

/// Output files collected in memory and written together once a command has
/// finished all of its checks.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn bytes(&mut self, path: PathBuf, data: Vec<u8>) {
        self.files.push((path, data));
    }

    pub fn text(&mut self, path: PathBuf, data: String) {
        self.bytes(path, data.into_bytes());
    }

    pub fn container(&mut self, path: PathBuf, c: Container) {
        let data = c.encode(Encoding::for_path(&path));
        self.bytes(path, data);
    }

    pub fn write(self) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, data) in self.files {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).failed(format!("cannot create {}", dir.display()))?;
            }
            std::fs::write(&path, data).failed(format!("cannot write {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}
