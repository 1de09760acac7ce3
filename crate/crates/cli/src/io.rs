//! Deterministic file formats: JSON (specs, graphs, reports), JSONL
//! (sequence datasets), model checkpoints, and CSV tables.
//!
//! Every writer produces byte-identical output for identical inputs;
//! nothing here embeds timestamps, hostnames, or iteration order from
//! unordered containers.

use anyhow::{bail, Context, Result};
use causeq::density::LogLinearModel;
use causeq::graph::{InstanceGraph, SummaryGraph};
use causeq::scm::Sequence;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Refuses to clobber existing files unless forced.
pub fn guard_overwrite(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        bail!(
            std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("{} exists; pass --force to overwrite", path.display()),
            )
        );
    }
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T, force: bool) -> Result<()> {
    guard_overwrite(path, force)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(value)
}

/// One JSON object per line: `{"tokens": [...], "vocab_size": V,
/// "seed": s, "scm_id": id}`.
pub fn write_sequences(path: &Path, seqs: &[Sequence], force: bool) -> Result<()> {
    guard_overwrite(path, force)?;
    let mut w = BufWriter::new(File::create(path)?);
    for s in seqs {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sequences(path: &Path) -> Result<Vec<Sequence>> {
    let r = BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    );
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let seq: Sequence = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}", path.display(), n + 1))?;
        out.push(seq);
    }
    if out.is_empty() {
        bail!(causeq::Error::Input(format!("{} holds no sequences", path.display())));
    }
    Ok(out)
}

pub fn write_checkpoint(path: &Path, model: &LogLinearModel, force: bool) -> Result<()> {
    guard_overwrite(path, force)?;
    let mut w = BufWriter::new(File::create(path)?);
    model.write_checkpoint(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<LogLinearModel> {
    let r = BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    );
    let model = LogLinearModel::read_checkpoint(r)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(model)
}

/// Tagged graph container so exported files are self-describing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphFile {
    Instance {
        graph: InstanceGraph,
        /// Token at each position, for summary projection and labels.
        tokens: Vec<u32>,
    },
    Summary { graph: SummaryGraph },
}

impl GraphFile {
    pub fn to_dot(&self) -> String {
        match self {
            GraphFile::Instance { graph, tokens } => graph.to_dot(Some(tokens)),
            GraphFile::Summary { graph } => graph.to_dot(),
        }
    }
}

/// Minimal CSV writer: caller supplies header and rows as strings.
pub struct CsvFile {
    w: BufWriter<File>,
}

impl CsvFile {
    pub fn create(path: &Path, header: &str, force: bool) -> Result<Self> {
        guard_overwrite(path, force)?;
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{header}")?;
        Ok(CsvFile { w })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        writeln!(self.w, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

/// Shortest-roundtrip float rendering shared by all CSV columns.
pub fn fmt_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}
