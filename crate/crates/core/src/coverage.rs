//! Binary tests × objectives matrices used for white-box coverage and for
//! mutant kills.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::TestSuite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Coverage,
    Kill,
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixKind::Coverage => "coverage",
            MatrixKind::Kill => "kill",
        })
    }
}

const WORD: usize = 64;

fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

/// Set of objective (column) indices of one matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectiveSet {
    words: Vec<u64>,
}

impl ObjectiveSet {
    pub fn empty(columns: usize) -> Self {
        ObjectiveSet {
            words: vec![0; words_for(columns)],
        }
    }

    pub fn insert(&mut self, column: usize) {
        self.words[column / WORD] |= 1 << (column % WORD);
    }

    pub fn contains(&self, column: usize) -> bool {
        self.words[column / WORD] & (1 << (column % WORD)) != 0
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn union_with(&mut self, row: &[u64]) {
        for (w, r) in self.words.iter_mut().zip(row) {
            *w |= r;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    kind: MatrixKind,
    label: String,
    rows: Vec<String>,
    columns: Vec<String>,
    bits: Vec<u64>,
    index: HashMap<String, usize>,
}

impl BinaryMatrix {
    /// Builds a matrix from explicit 0/1 cells, one inner vector per row.
    pub fn new(
        kind: MatrixKind,
        label: impl Into<String>,
        rows: Vec<String>,
        columns: Vec<String>,
        cells: &[Vec<u8>],
    ) -> Result<Self> {
        let label = label.into();
        let fail = |reason: String| Error::Matrix {
            label: label.clone(),
            reason,
        };
        if columns.is_empty() {
            return Err(fail("matrix has no objective columns".into()));
        }
        if cells.len() != rows.len() {
            return Err(fail(format!(
                "{} row ids but {} cell rows",
                rows.len(),
                cells.len()
            )));
        }
        let stride = words_for(columns.len());
        let mut bits = vec![0u64; stride * rows.len()];
        let mut index = HashMap::with_capacity(rows.len());
        for (r, (id, row)) in rows.iter().zip(cells).enumerate() {
            if index.insert(id.clone(), r).is_some() {
                return Err(fail(format!("duplicate test id `{id}`")));
            }
            if row.len() != columns.len() {
                return Err(fail(format!(
                    "row `{id}` has {} cells, expected {}",
                    row.len(),
                    columns.len()
                )));
            }
            for (c, &cell) in row.iter().enumerate() {
                match cell {
                    0 => {}
                    1 => bits[r * stride + c / WORD] |= 1 << (c % WORD),
                    other => {
                        return Err(fail(format!(
                            "cell ({id}, {}) is {other}, expected 0 or 1",
                            columns[c]
                        )))
                    }
                }
            }
        }
        Ok(BinaryMatrix {
            kind,
            label,
            rows,
            columns,
            bits,
            index,
        })
    }

    /// Convenience constructor from sets of covered column indices.
    pub fn from_sets(
        kind: MatrixKind,
        label: impl Into<String>,
        rows: Vec<String>,
        columns: usize,
        sets: &[Vec<usize>],
    ) -> Result<Self> {
        let cells: Vec<Vec<u8>> = sets
            .iter()
            .map(|set| {
                let mut row = vec![0u8; columns];
                for &c in set {
                    row[c] = 1;
                }
                row
            })
            .collect();
        let columns = (0..columns).map(|c| format!("o{c}")).collect();
        BinaryMatrix::new(kind, label, rows, columns, &cells)
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn row_len(&self) -> usize {
        self.rows.len()
    }

    pub fn column_len(&self) -> usize {
        self.columns.len()
    }

    fn stride(&self) -> usize {
        words_for(self.columns.len())
    }

    pub(crate) fn row_bits(&self, row: usize) -> &[u64] {
        let s = self.stride();
        &self.bits[row * s..(row + 1) * s]
    }

    pub fn row_index(&self, test: &str) -> Result<usize> {
        self.index
            .get(test)
            .copied()
            .ok_or_else(|| Error::UnknownTest(test.to_owned()))
    }

    pub fn get(&self, row: usize, column: usize) -> bool {
        self.row_bits(row)[column / WORD] & (1 << (column % WORD)) != 0
    }

    /// Row as 0/1 cells.
    pub fn cells(&self, row: usize) -> Vec<u8> {
        (0..self.columns.len())
            .map(|c| u8::from(self.get(row, c)))
            .collect()
    }

    /// Number of objectives the test covers (or mutants it kills).
    pub fn row_count(&self, test: &str) -> Result<usize> {
        Ok(self.count_at(self.row_index(test)?))
    }

    pub(crate) fn count_at(&self, row: usize) -> usize {
        self.row_bits(row)
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    /// Number of objectives the test covers that are not yet in `covered`.
    pub fn additional_count(&self, test: &str, covered: &ObjectiveSet) -> Result<usize> {
        Ok(self.additional_at(self.row_index(test)?, covered))
    }

    pub(crate) fn additional_at(&self, row: usize, covered: &ObjectiveSet) -> usize {
        self.row_bits(row)
            .iter()
            .zip(&covered.words)
            .map(|(r, c)| (r & !c).count_ones() as usize)
            .sum()
    }

    pub fn empty_set(&self) -> ObjectiveSet {
        ObjectiveSet::empty(self.columns.len())
    }

    pub(crate) fn cover_row(&self, row: usize, covered: &mut ObjectiveSet) {
        covered.union_with(self.row_bits(row));
    }

    /// Objective set from column ids; unknown ids are ignored.
    pub fn objective_set<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> ObjectiveSet {
        let mut set = self.empty_set();
        for id in ids {
            if let Some(c) = self.columns.iter().position(|col| col == id) {
                set.insert(c);
            }
        }
        set
    }

    /// Columns with at least one 1-cell.
    pub fn detected_columns(&self) -> ObjectiveSet {
        let mut set = self.empty_set();
        for r in 0..self.rows.len() {
            self.cover_row(r, &mut set);
        }
        set
    }

    /// Copy with rows reordered to the suite's test order. Fails when the
    /// row ids are not exactly the suite's test ids.
    pub fn aligned_to(&self, suite: &TestSuite) -> Result<BinaryMatrix> {
        let suite_ids: HashSet<&str> = suite.tests().iter().map(|t| t.id.as_str()).collect();
        let missing: Vec<&str> = suite
            .tests()
            .iter()
            .map(|t| t.id.as_str())
            .filter(|id| !self.index.contains_key(*id))
            .collect();
        let extra: Vec<&str> = self
            .rows
            .iter()
            .map(String::as_str)
            .filter(|id| !suite_ids.contains(id))
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            let mut reason = Vec::new();
            if !missing.is_empty() {
                reason.push(format!("tests missing from matrix: {}", missing.join(", ")));
            }
            if !extra.is_empty() {
                reason.push(format!("rows not in suite: {}", extra.join(", ")));
            }
            return Err(Error::MatrixBinding {
                label: self.label.clone(),
                reason: reason.join("; "),
            });
        }

        let stride = self.stride();
        let mut bits = Vec::with_capacity(self.bits.len());
        let mut index = HashMap::with_capacity(self.rows.len());
        for (r, test) in suite.tests().iter().enumerate() {
            bits.extend_from_slice(self.row_bits(self.index[&test.id]));
            index.insert(test.id.clone(), r);
        }
        debug_assert_eq!(bits.len(), stride * self.rows.len());
        Ok(BinaryMatrix {
            kind: self.kind,
            label: self.label.clone(),
            rows: suite.test_ids(),
            columns: self.columns.clone(),
            bits,
            index,
        })
    }

    pub fn with_kind(mut self, kind: MatrixKind, label: impl Into<String>) -> Self {
        self.kind = kind;
        self.label = label.into();
        self
    }
}
