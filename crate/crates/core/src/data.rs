//! Categorical datasets and per-situation transition counts.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{EventTree, Staging, VariableSpec};

/// Rows of level indices under a fixed schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    schema: Vec<VariableSpec>,
    rows: Vec<Vec<usize>>,
}

/// Schema sidecar file: `{"variables":[{"name","levels"}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub variables: Vec<VariableSpec>,
}

impl SchemaFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Dataset {
    pub fn new(schema: Vec<VariableSpec>, rows: Vec<Vec<usize>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("dataset has no rows".into()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::Data(format!(
                    "row {r} has {} values, schema has {} variables",
                    row.len(),
                    schema.len()
                )));
            }
            for (v, &x) in schema.iter().zip(row) {
                if x >= v.cardinality() {
                    return Err(Error::OutOfRange(format!(
                        "row {r}: level index {x} for variable {:?}",
                        v.name
                    )));
                }
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &[VariableSpec] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_vars(&self) -> usize {
        self.schema.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|v| v.name == name)
    }

    /// Rows at the given positions, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Dataset> {
        let rows = indices
            .iter()
            .map(|&i| {
                self.rows
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::OutOfRange(format!("row {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.schema.clone(), rows)
    }

    /// Columns rearranged so that new column `j` is old column `order[j]`.
    pub fn reorder_columns(&self, order: &[usize]) -> Result<Dataset> {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..self.n_vars()).collect::<Vec<_>>() {
            return Err(Error::Invalid("column order is not a permutation".into()));
        }
        let schema = order.iter().map(|&j| self.schema[j].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|r| order.iter().map(|&j| r[j]).collect())
            .collect();
        Dataset::new(schema, rows)
    }

    /// Writes a header plus one line of level labels per row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.schema.iter().map(|v| v.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row.iter().zip(&self.schema).map(|(&x, v)| v.levels[x].as_str()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a headed CSV of categorical values.
///
/// Without a schema, each column's levels are its distinct values, sorted
/// numerically when every value parses as a number and lexically otherwise.
pub fn read_csv<R: Read>(source: R, schema: Option<&[VariableSpec]>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let header: Vec<String> = match reader.headers() {
        Ok(h) => h.iter().map(str::to_owned).collect(),
        Err(e) => return Err(map_csv_error(e)),
    };
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Data("empty file".into()));
    }
    let mut raw: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(map_csv_error)?;
        raw.push(record.iter().map(str::to_owned).collect());
    }
    if raw.is_empty() {
        return Err(Error::Data("no data rows after the header".into()));
    }

    let schema: Vec<VariableSpec> = match schema {
        Some(s) => {
            let names: Vec<&str> = s.iter().map(|v| v.name.as_str()).collect();
            if names != header.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(Error::Schema(format!(
                    "CSV header {header:?} does not match schema variables {names:?}"
                )));
            }
            s.to_vec()
        }
        None => header
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let levels = infer_levels(raw.iter().map(|r| r[j].as_str()));
                if levels.len() < 2 {
                    return Err(Error::Schema(format!(
                        "column {name:?} has a single distinct value; supply a schema"
                    )));
                }
                Ok(VariableSpec {
                    name: name.clone(),
                    levels,
                })
            })
            .collect::<Result<_>>()?,
    };
    // Validates level labels and duplicate names.
    EventTree::new(schema.clone())?;

    let rows = raw
        .iter()
        .map(|r| {
            r.iter()
                .zip(&schema)
                .map(|(value, var)| {
                    var.level_index(value).ok_or_else(|| Error::UnknownLevel {
                        variable: var.name.clone(),
                        value: value.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(schema, rows)
}

fn map_csv_error(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => Error::Data(format!(
            "ragged row{}: expected {expected_len} fields, found {len}",
            pos.as_ref()
                .map(|p| format!(" at line {}", p.line()))
                .unwrap_or_default()
        )),
        _ => Error::Csv(e),
    }
}

fn infer_levels<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let distinct: BTreeSet<&str> = values.collect();
    let mut levels: Vec<String> = distinct.into_iter().map(str::to_owned).collect();
    let numeric: Option<Vec<f64>> = levels.iter().map(|l| l.trim().parse::<f64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut paired: Vec<(f64, String)> = nums.into_iter().zip(levels).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        levels = paired.into_iter().map(|(_, l)| l).collect();
    }
    levels
}

/// Transition counts `n(context, value)` for every situation of a tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    depths: Vec<Vec<Vec<u64>>>,
    n: u64,
}

impl CountTable {
    /// Builds a table directly from per-depth count rows. Only the shape is
    /// checked; the total `n` is taken from the root row.
    pub fn from_depths(tree: &EventTree, depths: Vec<Vec<Vec<u64>>>) -> Result<Self> {
        if depths.len() != tree.p() {
            return Err(Error::Invalid("count table must have one entry per depth".into()));
        }
        for (d, rows) in depths.iter().enumerate() {
            if rows.len() != tree.n_situations(d) || rows.iter().any(|r| r.len() != tree.cardinality(d)) {
                return Err(Error::Invalid(format!("count rows at depth {d} have the wrong shape")));
            }
        }
        let n = depths[0][0].iter().sum();
        Ok(Self { depths, n })
    }

    fn zeros(tree: &EventTree) -> Self {
        Self {
            depths: (0..tree.p())
                .map(|d| vec![vec![0; tree.cardinality(d)]; tree.n_situations(d)])
                .collect(),
            n: 0,
        }
    }

    fn add_row(&mut self, tree: &EventTree, row: &[usize]) {
        let mut idx = 0;
        for (d, &x) in row.iter().enumerate() {
            self.depths[d][idx][x] += 1;
            idx = tree.child(d, idx, x);
        }
        self.n += 1;
    }

    #[cfg_attr(not(feature = "parallel"), allow(dead_code))]
    fn merge(mut self, other: &CountTable) -> Self {
        for (a, b) in self.depths.iter_mut().zip(&other.depths) {
            for (ra, rb) in a.iter_mut().zip(b) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    *x += y;
                }
            }
        }
        self.n += other.n;
        self
    }

    /// Count rows of all situations at `depth`.
    pub fn depth(&self, depth: usize) -> &[Vec<u64>] {
        &self.depths[depth]
    }

    pub fn row(&self, depth: usize, situation: usize) -> &[u64] {
        &self.depths[depth][situation]
    }

    pub fn n_depths(&self) -> usize {
        self.depths.len()
    }

    /// Sample size.
    pub fn n(&self) -> u64 {
        self.n
    }
}

/// Tallies, for every situation, how often each value of the next variable
/// follows its context.
pub fn count_transitions(data: &Dataset, tree: &EventTree) -> Result<CountTable> {
    if data.schema() != tree.variables() {
        return Err(Error::Schema(
            "dataset schema does not match the event tree variables".into(),
        ));
    }
    Ok(count_rows(tree, data.rows()))
}

#[cfg(feature = "parallel")]
fn count_rows(tree: &EventTree, rows: &[Vec<usize>]) -> CountTable {
    use rayon::prelude::*;
    const CHUNK: usize = 4096;
    if rows.len() <= CHUNK {
        return count_serial(tree, rows);
    }
    rows.par_chunks(CHUNK)
        .map(|chunk| count_serial(tree, chunk))
        .reduce(|| CountTable::zeros(tree), |a, b| a.merge(&b))
}

#[cfg(not(feature = "parallel"))]
fn count_rows(tree: &EventTree, rows: &[Vec<usize>]) -> CountTable {
    count_serial(tree, rows)
}

fn count_serial(tree: &EventTree, rows: &[Vec<usize>]) -> CountTable {
    let mut table = CountTable::zeros(tree);
    for row in rows {
        table.add_row(tree, row);
    }
    table
}

/// Sums the count rows of the situations in each stage, for one depth.
pub fn pool_depth(counts: &CountTable, staging: &Staging, depth: usize) -> Vec<Vec<u64>> {
    let rows = counts.depth(depth);
    let width = rows.first().map_or(0, Vec::len);
    let mut pooled = vec![vec![0u64; width]; staging.n_stages(depth)];
    for (s, row) in rows.iter().enumerate() {
        let target = &mut pooled[staging.stage_of(depth, s)];
        for (t, &c) in target.iter_mut().zip(row) {
            *t += c;
        }
    }
    pooled
}

/// Per-depth, per-stage pooled count vectors, indexed by canonical stage label.
pub fn pool_counts(counts: &CountTable, staging: &Staging) -> Vec<Vec<Vec<u64>>> {
    (0..counts.n_depths()).map(|d| pool_depth(counts, staging, d)).collect()
}
