//! Locating and loading input files.

use std::fs;
use std::path::{Path, PathBuf};

use povshift::ingest::{load_conll_documents, load_pov_document, PovDocument, RankingExample};
use povshift::{Document, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Json,
    Conll,
}

pub fn kind_of(path: &Path) -> Option<Kind> {
    let name = path.file_name()?.to_str()?;
    if name.ends_with(".json") {
        Some(Kind::Json)
    } else if name.ends_with("conll") {
        Some(Kind::Conll)
    } else {
        None
    }
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| io_error(dir, e))?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else if kind_of(&p).is_some() {
            out.push(p);
        }
    }
    Ok(())
}

pub fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

/// Files named on the command line plus the `.json` and `*conll` files under named
/// directories, in path order.
pub fn collect(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            walk(p, &mut out)?;
        } else if p.exists() {
            out.push(p.clone());
        } else {
            return Err(io_error(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
        }
    }
    Ok(out)
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
        Error::Schema { path: p, message } => Error::Schema { path: format!("{} ({p})", path.display()), message },
        other => other,
    }
}

pub fn load_benchmark(path: &Path) -> Result<PovDocument> {
    load_pov_document(&read(path)?).map_err(|e| with_path(path, e))
}

pub fn load_conll(path: &Path) -> Result<Vec<Document>> {
    load_conll_documents(&read(path)?).map_err(|e| with_path(path, e))
}

/// Benchmark documents from files and directories.
pub fn benchmark_docs(paths: &[PathBuf]) -> Result<Vec<PovDocument>> {
    collect(paths)?.iter().filter(|p| kind_of(p) == Some(Kind::Json)).map(|p| load_benchmark(p)).collect()
}

/// One ranking example per line.
pub fn read_examples(path: &Path) -> Result<Vec<RankingExample>> {
    let text = read(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse { line: i + 1, message: format!("{}: {e}", path.display()) })
        })
        .collect()
}

pub fn examples_jsonl(examples: &[RankingExample]) -> String {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&serde_json::to_string(ex).expect("examples serialize"));
        out.push('\n');
    }
    out
}
