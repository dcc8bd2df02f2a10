//! Dataset directory format (UTF-8, LF, tab-separated, 0-indexed node ids):
//!
//! - `meta.json`: `{"name": str, "n": int, "F": int, "C": int}`
//! - `edges.tsv`: `u\tv` per undirected edge, `u < v`, lexicographic order
//! - `features.tsv`: `node\tdim\tvalue`, sorted by `(node, dim)`, zeros omitted
//! - `labels.tsv`: `node\tlabel`, one line per node, sorted by node
//! - `splits.tsv`: `node\trole`, role in `{train, val, test}`
//!
//! The writer emits exactly this layout. The reader additionally tolerates
//! unsorted lines and mirrored or repeated edges.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta, FeatureMatrix};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSplit};

/// Feature preprocessing applied at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    None,
    Minmax,
}

impl FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Scale::None),
            "minmax" => Ok(Scale::Minmax),
            other => Err(Error::InvalidArgument(format!(
                "unknown scale '{other}' (expected none or minmax)"
            ))),
        }
    }
}

impl std::fmt::Display for Scale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scale::None => "none",
            Scale::Minmax => "minmax",
        })
    }
}

const FILES: [&str; 5] = ["meta.json", "edges.tsv", "features.tsv", "labels.tsv", "splits.tsv"];

fn read(dir: &Path, name: &str) -> Result<(PathBuf, String)> {
    let path = dir.join(name);
    match fs::read_to_string(&path) {
        Ok(s) => Ok((path, s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingFile(path)),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Non-empty lines with 1-based line numbers, split on tabs.
fn records<'a>(
    path: &'a Path,
    text: &'a str,
    arity: usize,
) -> impl Iterator<Item = Result<(usize, Vec<&'a str>)>> + 'a {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(move |(i, l)| {
            let fields: Vec<&str> = l.split('\t').collect();
            if fields.len() != arity {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("expected {arity} tab-separated fields, found {}", fields.len()),
                });
            }
            Ok((i + 1, fields))
        })
}

fn field<T: FromStr>(path: &Path, line: usize, what: &str, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("cannot parse {what} from '{s}'"),
    })
}

fn node(path: &Path, line: usize, s: &str, n: usize) -> Result<usize> {
    let v: usize = field(path, line, "node id", s)?;
    if v >= n {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("node {v} out of range for n = {n}"),
        });
    }
    Ok(v)
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>, scale: Scale) -> Result<Dataset> {
    let dir = dir.as_ref();
    // Report a missing file before any parse error in another one.
    for name in FILES {
        if !dir.join(name).is_file() {
            return Err(Error::MissingFile(dir.join(name)));
        }
    }

    let (_, meta_text) = read(dir, "meta.json")?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text)?;
    let n = meta.n;

    let (path, text) = read(dir, "edges.tsv")?;
    let mut edges = Vec::new();
    for rec in records(&path, &text, 2) {
        let (line, f) = rec?;
        let u = node(&path, line, f[0], n)?;
        let v = node(&path, line, f[1], n)?;
        if u == v {
            return Err(Error::Parse {
                path: path.clone(),
                line,
                msg: format!("self-loop on node {u}"),
            });
        }
        edges.push((u, v));
    }
    let graph = Graph::from_edges(&edges, n)?;

    let (path, text) = read(dir, "features.tsv")?;
    let mut triplets = Vec::new();
    for rec in records(&path, &text, 3) {
        let (line, f) = rec?;
        let v = node(&path, line, f[0], n)?;
        let d: usize = field(&path, line, "feature dim", f[1])?;
        if d >= meta.num_features {
            return Err(Error::Parse {
                path: path.clone(),
                line,
                msg: format!("dim {d} out of range for F = {}", meta.num_features),
            });
        }
        let x: f64 = field(&path, line, "feature value", f[2])?;
        if !x.is_finite() {
            return Err(Error::Parse {
                path: path.clone(),
                line,
                msg: "non-finite feature value".into(),
            });
        }
        triplets.push((v, d, x));
    }
    let mut features = FeatureMatrix::from_triplets(n, meta.num_features, triplets)?;
    if scale == Scale::Minmax {
        features = features.minmax_scaled();
    }

    let (path, text) = read(dir, "labels.tsv")?;
    let mut labels = vec![None; n];
    for rec in records(&path, &text, 2) {
        let (line, f) = rec?;
        let v = node(&path, line, f[0], n)?;
        let y: usize = field(&path, line, "label", f[1])?;
        if y >= meta.num_classes {
            return Err(Error::Parse {
                path: path.clone(),
                line,
                msg: format!("label {y} not below C = {}", meta.num_classes),
            });
        }
        if labels[v].replace(y).is_some() {
            return Err(Error::Parse {
                path: path.clone(),
                line,
                msg: format!("node {v} labeled twice"),
            });
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(v, y)| y.ok_or_else(|| Error::InvalidDataset(format!("node {v} has no label"))))
        .collect::<Result<Vec<_>>>()?;

    let (path, text) = read(dir, "splits.tsv")?;
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    let mut seen = vec![false; n];
    for rec in records(&path, &text, 2) {
        let (line, f) = rec?;
        let v = node(&path, line, f[0], n)?;
        if std::mem::replace(&mut seen[v], true) {
            return Err(Error::Parse {
                path: path.clone(),
                line,
                msg: format!("node {v} assigned to more than one split"),
            });
        }
        match f[1].trim() {
            "train" => train.push(v),
            "val" => val.push(v),
            "test" => test.push(v),
            other => {
                return Err(Error::Parse {
                    path: path.clone(),
                    line,
                    msg: format!("unknown split role '{other}'"),
                })
            }
        }
    }
    let split = NodeSplit::new(train, val, test, n)?;

    Dataset::new(meta.name, graph, features, labels, meta.num_classes, split)
}

/// Writes `d` in the canonical layout, creating `dir` if needed.
pub fn save_dataset(d: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(path, e))
    };

    let mut meta = serde_json::to_string(&d.meta())?;
    meta.push('\n');
    write("meta.json", meta)?;

    let mut s = String::new();
    for (u, v) in d.graph.undirected_edges() {
        writeln!(s, "{u}\t{v}").unwrap();
    }
    write("edges.tsv", s)?;

    let mut s = String::new();
    for (v, dim, x) in d.features.triplets() {
        writeln!(s, "{v}\t{dim}\t{x}").unwrap();
    }
    write("features.tsv", s)?;

    let mut s = String::new();
    for (v, y) in d.labels.iter().enumerate() {
        writeln!(s, "{v}\t{y}").unwrap();
    }
    write("labels.tsv", s)?;

    let mut roles: Vec<(usize, &str)> = d
        .split
        .train
        .iter()
        .map(|&v| (v, "train"))
        .chain(d.split.val.iter().map(|&v| (v, "val")))
        .chain(d.split.test.iter().map(|&v| (v, "test")))
        .collect();
    roles.sort_unstable();
    let mut s = String::new();
    for (v, role) in roles {
        writeln!(s, "{v}\t{role}").unwrap();
    }
    write("splits.tsv", s)
}
