//! On-disk dataset bundles.
//!
//! The canonical bundle is a directory holding four files:
//!
//! ```text
//! meta.json     {"name": ..., "n": ..., "d": ..., "k": ...}
//! edges.tsv     one undirected edge per line, two 0-based node ids, either orientation
//! features.tsv  one row per node, d tab-separated decimals
//! labels.tsv    one class id per line
//! ```
//!
//! The LINQS plain-text pair (`<name>.content` / `<name>.cites`) is also
//! accepted. String paper ids map to dense ids in first-seen order of the
//! `.content` file and class names map to ids in sorted order.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, SparseGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub k: usize,
}

/// A fully loaded node-classification dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: SparseGraph,
    pub features: FeatureMatrix,
    /// Ground-truth class of every node.
    pub labels: Vec<usize>,
    pub k: usize,
}

impl Dataset {
    pub fn meta(&self) -> BundleMeta {
        BundleMeta {
            name: self.name.clone(),
            n: self.graph.n(),
            d: self.features.d(),
            k: self.k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BundleFormat {
    /// Canonical bundle if `meta.json` exists, LINQS otherwise.
    #[default]
    Auto,
    Canonical,
    Linqs,
}

impl FromStr for BundleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "canonical" => Ok(Self::Canonical),
            "linqs" => Ok(Self::Linqs),
            _ => Err(Error::Config(format!("unknown bundle format {s:?} (auto, canonical, linqs)"))),
        }
    }
}

pub fn load(path: &Path, format: BundleFormat) -> Result<Dataset> {
    match format {
        BundleFormat::Canonical => load_bundle(path),
        BundleFormat::Linqs => load_linqs(path),
        BundleFormat::Auto if path.join("meta.json").exists() => load_bundle(path),
        BundleFormat::Auto => load_linqs(path),
    }
}

fn read(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: file_name(path),
        line,
        msg: msg.into(),
    }
}

/// Loads a canonical bundle directory.
pub fn load_bundle(dir: &Path) -> Result<Dataset> {
    let meta_path = dir.join("meta.json");
    let meta: BundleMeta = serde_json::from_str(&read(&meta_path)?)?;

    let edges_path = dir.join("edges.tsv");
    let mut edges = Vec::new();
    for (lineno, line) in read(&edges_path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let mut next_id = || -> Result<usize> {
            parts
                .next()
                .ok_or_else(|| parse_err(&edges_path, lineno + 1, "expected two node ids"))?
                .trim()
                .parse()
                .map_err(|e| parse_err(&edges_path, lineno + 1, format!("{e}")))
        };
        let u = next_id()?;
        let v = next_id()?;
        edges.push((u, v));
    }
    let graph = SparseGraph::from_edges(meta.n, edges)?;

    let feat_path = dir.join("features.tsv");
    let mut data = Array2::zeros((meta.n, meta.d));
    let mut rows = 0;
    for (row, line) in read(&feat_path)?.lines().enumerate() {
        if row >= meta.n {
            if line.trim().is_empty() {
                continue;
            }
            return Err(parse_err(&feat_path, row + 1, format!("more than n={} rows", meta.n)));
        }
        let cells: Vec<&str> = if meta.d == 0 { Vec::new() } else { line.split('\t').collect() };
        if cells.len() != meta.d {
            return Err(Error::RaggedFeatures {
                row,
                got: cells.len(),
                expected: meta.d,
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            data[[row, j]] = cell
                .trim()
                .parse()
                .map_err(|e| parse_err(&feat_path, row + 1, format!("{e}")))?;
        }
        rows += 1;
    }
    if rows != meta.n {
        return Err(parse_err(&feat_path, rows, format!("expected {} rows, found {rows}", meta.n)));
    }
    let features = FeatureMatrix::new(data)?;

    let labels_path = dir.join("labels.tsv");
    let mut labels = Vec::with_capacity(meta.n);
    for (lineno, line) in read(&labels_path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let class: usize = line
            .parse()
            .map_err(|e| parse_err(&labels_path, lineno + 1, format!("{e}")))?;
        labels.push(class);
    }
    if labels.len() != meta.n {
        return Err(parse_err(
            &labels_path,
            labels.len(),
            format!("expected {} labels, found {}", meta.n, labels.len()),
        ));
    }
    check_classes(&labels, meta.k)?;

    Ok(Dataset {
        name: meta.name,
        graph,
        features,
        labels,
        k: meta.k,
    })
}

fn check_classes(labels: &[usize], k: usize) -> Result<()> {
    if let Some(&max) = labels.iter().max() {
        if max >= k {
            return Err(Error::ClassCountMismatch { meta: k, found: max + 1 });
        }
    }
    Ok(())
}

/// Writes `ds` as a canonical bundle into `dir` (created if needed).
pub fn save_bundle(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = serde_json::to_string_pretty(&ds.meta())?;
    write_file(&dir.join("meta.json"), |w| writeln!(w, "{meta}"))?;
    write_file(&dir.join("edges.tsv"), |w| {
        for (u, v) in ds.graph.edges() {
            writeln!(w, "{u}\t{v}")?;
        }
        Ok(())
    })?;
    write_file(&dir.join("features.tsv"), |w| {
        for row in ds.features.data().rows() {
            let mut first = true;
            for x in row {
                if !first {
                    w.write_all(b"\t")?;
                }
                first = false;
                // shortest representation that round-trips exactly
                write!(w, "{x}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    write_file(&dir.join("labels.tsv"), |w| {
        for y in &ds.labels {
            writeln!(w, "{y}")?;
        }
        Ok(())
    })
}

fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
{
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn find_with_extension(dir: &Path, ext: &str) -> Result<PathBuf> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    found.sort();
    found
        .into_iter()
        .next()
        .ok_or_else(|| Error::MissingFile(dir.join(format!("*.{ext}"))))
}

/// Loads a LINQS `.content` / `.cites` pair from `dir`.
///
/// Citations that mention papers absent from `.content` are skipped.
pub fn load_linqs(dir: &Path) -> Result<Dataset> {
    let content_path = find_with_extension(dir, "content")?;
    let cites_path = find_with_extension(dir, "cites")?;
    let name = content_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "linqs".to_string());

    let content = read(&content_path)?;
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut d = None;
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split_whitespace().collect();
        if cells.len() < 2 {
            return Err(parse_err(&content_path, lineno + 1, "expected id, features and class"));
        }
        let feats = &cells[1..cells.len() - 1];
        let expected = *d.get_or_insert(feats.len());
        if feats.len() != expected {
            return Err(Error::RaggedFeatures {
                row: rows.len(),
                got: feats.len(),
                expected,
            });
        }
        let row = feats
            .iter()
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(&content_path, lineno + 1, format!("{e}")))?;
        let next = ids.len();
        if ids.insert(cells[0].to_string(), next).is_some() {
            return Err(parse_err(&content_path, lineno + 1, format!("duplicate paper id {}", cells[0])));
        }
        rows.push(row);
        class_names.push(cells[cells.len() - 1].to_string());
    }
    let n = rows.len();
    let d = d.unwrap_or(0);

    let classes: BTreeSet<&str> = class_names.iter().map(String::as_str).collect();
    let class_id: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let labels = class_names.iter().map(|c| class_id[c.as_str()]).collect();

    let mut edges = Vec::new();
    let mut skipped = 0usize;
    for (lineno, line) in read(&cites_path)?.lines().enumerate() {
        let cells: Vec<&str> = line.split_whitespace().collect();
        match cells.as_slice() {
            [] => continue,
            [a, b] => match (ids.get(*a), ids.get(*b)) {
                (Some(&u), Some(&v)) => edges.push((u, v)),
                _ => skipped += 1,
            },
            _ => return Err(parse_err(&cites_path, lineno + 1, "expected two paper ids")),
        }
    }
    if skipped > 0 {
        log::warn!("{name}: skipped {skipped} citations to unknown papers");
    }

    let mut data = Array2::zeros((n, d));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, x) in row.into_iter().enumerate() {
            data[[i, j]] = x;
        }
    }
    Ok(Dataset {
        name,
        graph: SparseGraph::from_edges(n, edges)?,
        features: FeatureMatrix::new(data)?,
        labels,
        k: classes.len(),
    })
}
