//! Labelled embedding datasets and their on-disk CSV format.
//!
//! A dataset is `N` embedding rows in `R^d`, each carrying a concept label
//! `z` in `0..K-1` and optionally a task label `y >= 0`. The file format is
//! UTF-8 CSV with header `id,z,y,f0,...,f{d-1}`; absent task labels are
//! stored as `-1`. String concept labels are mapped to dense integers in
//! first-appearance order at ingestion and the mapping is written alongside
//! the dataset.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Immutable embedding table with concept (and optional task) labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    ids: Vec<String>,
    x: Array2<f64>,
    z: Vec<usize>,
    y: Option<Vec<usize>>,
    k: usize,
    label_map: Option<Vec<String>>,
}

impl Dataset {
    /// Validates lengths, label coverage, and finiteness.
    ///
    /// `K` is inferred as `1 + max(z)`; every class in `0..K` must occur.
    pub fn new(
        ids: Vec<String>,
        x: Array2<f64>,
        z: Vec<usize>,
        y: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = x.nrows();
        if ids.len() != n {
            return Err(Error::Invalid(format!(
                "{} ids for {} rows",
                ids.len(),
                n
            )));
        }
        if z.len() != n {
            return Err(Error::Invalid(format!(
                "{} concept labels for {} rows",
                z.len(),
                n
            )));
        }
        if let Some(y) = &y {
            if y.len() != n {
                return Err(Error::Invalid(format!(
                    "{} task labels for {} rows",
                    y.len(),
                    n
                )));
            }
        }
        if n == 0 {
            return Err(Error::Invalid("empty dataset".into()));
        }
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite coordinate {bad}")));
        }
        let k = 1 + *z.iter().max().expect("n > 0");
        let mut counts = vec![0usize; k];
        for &zi in &z {
            counts[zi] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Invalid(format!(
                "concept class {empty} has no samples (classes must cover 0..{})",
                k - 1
            )));
        }
        Ok(Dataset {
            ids,
            x,
            z,
            y,
            k,
            label_map: None,
        })
    }

    fn with_label_map(mut self, map: Vec<String>) -> Self {
        self.label_map = Some(map);
        self
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Number of concept classes.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn z(&self) -> &[usize] {
        &self.z
    }

    pub fn y(&self) -> Option<&[usize]> {
        self.y.as_deref()
    }

    /// Original string concept labels, present when ingestion mapped them.
    pub fn label_map(&self) -> Option<&[String]> {
        self.label_map.as_deref()
    }

    /// Per-class sample counts, indexed by class label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.k];
        for &zi in &self.z {
            counts[zi] += 1;
        }
        counts
    }

    /// Row indices of each class, indexed by class label.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut idx = vec![Vec::new(); self.k];
        for (i, &zi) in self.z.iter().enumerate() {
            idx[zi].push(i);
        }
        idx
    }

    /// Lookup table from sample id to row index.
    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    /// Same labels and ids over a replaced coordinate matrix.
    pub fn with_coordinates(&self, x: Array2<f64>) -> Result<Dataset> {
        if x.nrows() != self.n() {
            return Err(Error::Invalid(format!(
                "replacement has {} rows, dataset has {}",
                x.nrows(),
                self.n()
            )));
        }
        let mut ds = Dataset::new(self.ids.clone(), x, self.z.clone(), self.y.clone())?;
        ds.label_map = self.label_map.clone();
        Ok(ds)
    }
}

fn format_float(v: f64) -> String {
    // Shortest round-trip representation; reloads bit-exactly.
    let mut s = String::new();
    write!(s, "{v}").unwrap();
    s
}

/// Writes the dataset in the CSV format read by [`load_dataset`].
pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str("id,z,y");
    for j in 0..ds.d() {
        write!(out, ",f{j}").unwrap();
    }
    out.push('\n');
    for i in 0..ds.n() {
        let y = ds.y().map_or(-1i64, |y| y[i] as i64);
        write!(out, "{},{},{}", ds.ids[i], ds.z[i], y).unwrap();
        for j in 0..ds.d() {
            out.push(',');
            out.push_str(&format_float(ds.x[[i, j]]));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Path of the label-map file written next to a dataset whose concept
/// labels were strings.
pub fn label_map_path(dataset_path: &Path) -> PathBuf {
    let mut os = dataset_path.as_os_str().to_owned();
    os.push(".labelmap.csv");
    PathBuf::from(os)
}

/// Loads a dataset CSV.
///
/// Concept labels may be integers or arbitrary strings; strings are mapped
/// to `0..K-1` in first-appearance order and the mapping is written to
/// [`label_map_path`]. The task column is `-1` when absent. `K` is inferred
/// as one past the largest concept label.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[0] != "id" || cols[1] != "z" || cols[2] != "y" {
        return Err(Error::parse(
            path,
            1,
            format!("expected header id,z,y,f0,... got {header:?}"),
        ));
    }
    let d = cols.len() - 3;
    for (j, c) in cols[3..].iter().enumerate() {
        if *c != format!("f{j}") {
            return Err(Error::parse(
                path,
                1,
                format!("feature column {} named {c:?}, expected f{j}", j + 3),
            ));
        }
    }

    let mut ids = Vec::new();
    let mut raw_z: Vec<String> = Vec::new();
    let mut raw_y: Vec<i64> = Vec::new();
    let mut coords: Vec<f64> = Vec::new();

    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 3 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {} columns, got {}", d + 3, fields.len()),
            ));
        }
        ids.push(fields[0].to_string());
        raw_z.push(fields[1].trim().to_string());
        let y: i64 = fields[2].trim().parse().map_err(|_| {
            Error::parse(path, lineno, format!("task label {:?} is not an integer", fields[2]))
        })?;
        if y < -1 {
            return Err(Error::parse(
                path,
                lineno,
                format!("task label {y} must be >= 0, or -1 for absent"),
            ));
        }
        raw_y.push(y);
        for (j, f) in fields[3..].iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| {
                Error::parse(path, lineno, format!("coordinate f{j} = {f:?} is not a number"))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("coordinate f{j} = {f:?} is not finite"),
                ));
            }
            coords.push(v);
        }
    }

    let n = ids.len();
    if n == 0 {
        return Err(Error::parse(path, 1, "no data rows"));
    }

    // Concept labels: integers when the whole column parses, otherwise a
    // first-appearance string mapping written alongside the dataset.
    let all_int = raw_z.iter().all(|s| s.parse::<i64>().is_ok());
    let (z, label_map): (Vec<usize>, Option<Vec<String>>) = if all_int {
        let mut z = Vec::with_capacity(n);
        for (i, s) in raw_z.iter().enumerate() {
            let v: i64 = s.parse().unwrap();
            if v < 0 {
                return Err(Error::parse(
                    path,
                    i + 2,
                    format!("concept label {v} is negative"),
                ));
            }
            z.push(v as usize);
        }
        (z, None)
    } else {
        let mut map: Vec<String> = Vec::new();
        let mut lookup: HashMap<&str, usize> = HashMap::new();
        let mut z = Vec::with_capacity(n);
        for s in &raw_z {
            let next = map.len();
            let id = *lookup.entry(s.as_str()).or_insert(next);
            if id == next {
                map.push(s.clone());
            }
            z.push(id);
        }
        (z, Some(map))
    };

    let has_y = raw_y.iter().any(|&v| v != -1);
    let y = if has_y {
        if let Some(pos) = raw_y.iter().position(|&v| v == -1) {
            return Err(Error::parse(
                path,
                pos + 2,
                "task label column mixes -1 (absent) with real labels",
            ));
        }
        Some(raw_y.iter().map(|&v| v as usize).collect())
    } else {
        None
    };

    let x = Array2::from_shape_vec((n, d), coords).expect("row-major coords");
    let ds = Dataset::new(ids, x, z, y).map_err(|e| match e {
        Error::Invalid(msg) => Error::parse(path, 1, msg),
        other => other,
    })?;

    if let Some(map) = label_map {
        let map_path = label_map_path(path);
        let mut out = String::from("label,string\n");
        for (i, s) in map.iter().enumerate() {
            writeln!(out, "{i},{s}").unwrap();
        }
        std::fs::write(&map_path, out).map_err(|e| Error::io(&map_path, e))?;
        Ok(ds.with_label_map(map))
    } else {
        Ok(ds)
    }
}
