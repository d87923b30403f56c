//! Plain-text graph files: edge list, feature CSV, label CSV and a JSON split file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{Graph, Splits};
use crate::error::{Error, Result};

/// Locations of the four files that make up a graph on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphPaths {
    pub edges: PathBuf,
    /// `None` means the graph has no attributes; identity features are used.
    pub features: Option<PathBuf>,
    pub labels: PathBuf,
    pub splits: PathBuf,
}

impl GraphPaths {
    /// The conventional layout inside a directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        GraphPaths {
            edges: dir.join("edges.txt"),
            features: Some(dir.join("features.csv")),
            labels: dir.join("labels.csv"),
            splits: dir.join("splits.json"),
        }
    }

    pub fn all(&self) -> Vec<&Path> {
        let mut v = vec![self.edges.as_path()];
        if let Some(f) = &self.features {
            v.push(f.as_path());
        }
        v.push(self.labels.as_path());
        v.push(self.splits.as_path());
        v
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read(path)?;
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let y = t
            .parse::<usize>()
            .map_err(|e| parse_err(path, lineno + 1, format!("bad label {t:?}: {e}")))?;
        labels.push(y);
    }
    Ok(labels)
}

fn parse_features(path: &Path) -> Result<Array2<f64>> {
    let text = read(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(path, lineno + 1, format!("bad feature value: {e}")))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    lineno + 1,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    let d = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| Error::Shape(e.to_string()))
}

fn parse_edges(path: &Path, n: usize) -> Result<Array2<f64>> {
    let text = read(path)?;
    let mut adj = Array2::zeros((n, n));
    for (lineno, line) in text.lines().enumerate() {
        let t = line.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let ids: Vec<&str> = t.split_whitespace().collect();
        if ids.len() != 2 {
            return Err(parse_err(path, lineno + 1, format!("expected two node ids, got {t:?}")));
        }
        let mut pair = [0usize; 2];
        for (slot, tok) in pair.iter_mut().zip(&ids) {
            *slot = tok
                .parse()
                .map_err(|e| parse_err(path, lineno + 1, format!("bad node id {tok:?}: {e}")))?;
            if *slot >= n {
                return Err(Error::Range { id: *slot, n });
            }
        }
        let [i, j] = pair;
        // Self-loops carry no structure here; normalization adds its own.
        if i != j {
            Graph::set_edge(&mut adj, i, j, 1.0);
        }
    }
    Ok(adj)
}

/// Loads a graph. The node count is the number of labels.
pub fn load_graph(paths: &GraphPaths) -> Result<Graph> {
    for p in paths.all() {
        if !p.exists() {
            return Err(Error::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
            ));
        }
    }
    let labels = parse_labels(&paths.labels)?;
    let n = labels.len();
    let features = match &paths.features {
        Some(p) => parse_features(p)?,
        None => Graph::identity_features(n),
    };
    if features.nrows() != n {
        return Err(Error::Validation(format!(
            "{} has {} rows but {} lists {n} nodes",
            paths.features.as_deref().unwrap_or(Path::new("features")).display(),
            features.nrows(),
            paths.labels.display()
        )));
    }
    let adjacency = parse_edges(&paths.edges, n)?;
    let splits: Splits = serde_json::from_str(&read(&paths.splits)?).map_err(|source| Error::Json {
        path: paths.splits.clone(),
        source,
    })?;
    Graph::new(adjacency, features, labels, splits)
}

pub(crate) fn edge_list_text(graph: &Graph) -> String {
    let mut s = String::new();
    for (i, j) in graph.edges() {
        let _ = writeln!(s, "{i} {j}");
    }
    s
}

/// Writes the four graph files. Edges are written once each as `i j` with `i < j`.
pub fn save_graph(graph: &Graph, paths: &GraphPaths) -> Result<()> {
    write(&paths.edges, &edge_list_text(graph))?;
    if let Some(fp) = &paths.features {
        let mut s = String::new();
        for row in graph.features().outer_iter() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        write(fp, &s)?;
    }
    let mut s = String::new();
    for y in graph.labels() {
        let _ = writeln!(s, "{y}");
    }
    write(&paths.labels, &s)?;
    let json = serde_json::to_string(graph.splits()).map_err(|source| Error::Json {
        path: paths.splits.clone(),
        source,
    })?;
    write(&paths.splits, &json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn write_files(dir: &Path, edges: &str, n: usize) -> GraphPaths {
        let paths = GraphPaths::in_dir(dir);
        fs::write(&paths.edges, edges).unwrap();
        let feats: String = (0..n).map(|i| format!("{i}.0,1.5\n")).collect();
        fs::write(paths.features.as_ref().unwrap(), feats).unwrap();
        let labels: String = (0..n).map(|i| format!("{}\n", i % 2)).collect();
        fs::write(&paths.labels, labels).unwrap();
        fs::write(&paths.splits, r#"{"train":[0],"val":[],"test":[1]}"#).unwrap();
        paths
    }

    #[test]
    fn duplicate_orientations_collapse() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_files(dir.path(), "# header\n0 1\n1 0\n", 2);
        let g = load_graph(&paths).unwrap();
        assert_eq!(g.adjacency(), &array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn empty_edge_file() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_files(dir.path(), "", 3);
        let g = load_graph(&paths).unwrap();
        assert_eq!(g.adjacency(), &Array2::<f64>::zeros((3, 3)));
    }

    #[test]
    fn out_of_range_node() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_files(dir.path(), "0 5\n", 3);
        assert!(matches!(load_graph(&paths), Err(Error::Range { id: 5, n: 3 })));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_files(dir.path(), "0 1\n1 x\n", 3);
        match load_graph(&paths) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn feature_row_mismatch_is_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_files(dir.path(), "", 3);
        fs::write(paths.features.as_ref().unwrap(), "1.0\n2.0\n").unwrap();
        assert!(matches!(load_graph(&paths), Err(Error::Validation(_))));
    }

    #[test]
    fn missing_features_means_identity() {
        let dir = tempfile::tempdir().unwrap();
        let mut paths = write_files(dir.path(), "0 2\n", 3);
        paths.features = None;
        let g = load_graph(&paths).unwrap();
        assert_eq!(g.features(), &Array2::<f64>::eye(3));
    }

    #[test]
    fn save_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_files(dir.path(), "2 0\n1 2\n", 3);
        let g = load_graph(&paths).unwrap();
        let out = tempfile::tempdir().unwrap();
        let out_paths = GraphPaths::in_dir(out.path());
        save_graph(&g, &out_paths).unwrap();
        let g2 = load_graph(&out_paths).unwrap();
        assert_eq!(g, g2);
        save_graph(&g2, &out_paths).unwrap();
        assert_eq!(fs::read_to_string(&out_paths.edges).unwrap(), "0 2\n1 2\n");
    }
}
