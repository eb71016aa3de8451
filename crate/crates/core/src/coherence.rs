//! Routing matrices and their mutual coherence.
//!
//! Entries are small nonnegative integers (link traversal counts), so
//! parallel columns are detected exactly with the squared Cauchy-Schwarz
//! identity `(c·c')² = (c·c)(c'·c')` instead of comparing floats against 1.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::paths::MeasurementPath;

/// Value returned by [`f_mu`] when the coherence is undefined.
pub const F_MU_SENTINEL: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoherenceError {
    #[error("column {0} is all zero")]
    ZeroColumn(usize),
    #[error("coherence of column {0} with itself is undefined")]
    SameColumn(usize),
    #[error("column index {index} out of range for {cols} columns")]
    OutOfRange { index: usize, cols: usize },
    #[error("mutual coherence needs at least two columns, got {0}")]
    TooFewColumns(usize),
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("malformed matrix CSV at line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Integer routing matrix, one row per measurement path and one column per
/// link.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoutingMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<u8>,
}

impl RoutingMatrix {
    /// Matrix with no rows over `cols` links.
    pub fn empty(cols: usize) -> Self {
        RoutingMatrix {
            rows: 0,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<u8>], cols: usize) -> Result<Self, CoherenceError> {
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(CoherenceError::RaggedRow {
                    row: i,
                    got: r.len(),
                    expected: cols,
                });
            }
            entries.extend_from_slice(r);
        }
        Ok(RoutingMatrix {
            rows: rows.len(),
            cols,
            entries,
        })
    }

    /// Stacks the traversal counts of `paths`; `cols` is the link count.
    pub fn from_paths<'a>(
        paths: impl IntoIterator<Item = &'a MeasurementPath>,
        cols: usize,
    ) -> Self {
        let mut m = Self::empty(cols);
        for p in paths {
            m.push_row(p.counts());
        }
        m
    }

    pub fn push_row(&mut self, row: &[u8]) {
        assert_eq!(row.len(), self.cols, "row width must match link count");
        self.entries.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = u8> + '_ {
        (0..self.rows).map(move |i| self.get(i, j))
    }

    fn dot(&self, j: usize, k: usize) -> u64 {
        (0..self.rows)
            .map(|i| u64::from(self.get(i, j)) * u64::from(self.get(i, k)))
            .sum()
    }

    pub fn is_zero_column(&self, j: usize) -> bool {
        self.column(j).all(|a| a == 0)
    }

    pub fn first_zero_column(&self) -> Option<usize> {
        (0..self.cols).find(|&j| self.is_zero_column(j))
    }

    /// Interval factor: the number of measurement paths.
    pub fn interval_factor(&self) -> usize {
        self.rows
    }

    /// Traffic factor: entrywise sum of the matrix.
    pub fn traffic_factor(&self) -> u64 {
        self.entries.iter().map(|&a| u64::from(a)).sum()
    }

    /// Exact test for `ν = 1` between two nonzero columns.
    pub fn is_parallel(&self, j: usize, k: usize) -> bool {
        let d = self.dot(j, k);
        d * d == self.dot(j, j) * self.dot(k, k)
    }

    /// CSV with an `e1,...,eJ` header and one row per path.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.cols).map(|j| format!("e{j}")).collect();
        writeln!(out, "{}", header.join(",")).unwrap();
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(u8::to_string).collect();
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, CoherenceError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(CoherenceError::Csv {
            line: 1,
            message: "missing header".into(),
        })?;
        let cols = header.split(',').count();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let row = line
                .split(',')
                .map(|f| match f.trim().parse::<u8>() {
                    Ok(v) if v <= 2 => Ok(v),
                    _ => Err(CoherenceError::Csv {
                        line: i + 1,
                        message: format!("entry `{}` is not 0, 1 or 2", f.trim()),
                    }),
                })
                .collect::<Result<Vec<u8>, _>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows, cols)
    }

    fn check_column(&self, j: usize) -> Result<(), CoherenceError> {
        if j >= self.cols {
            return Err(CoherenceError::OutOfRange {
                index: j,
                cols: self.cols,
            });
        }
        if self.is_zero_column(j) {
            return Err(CoherenceError::ZeroColumn(j));
        }
        Ok(())
    }
}

/// Normalized absolute inner product of columns `j` and `k`.
pub fn pair_coherence(a: &RoutingMatrix, j: usize, k: usize) -> Result<f64, CoherenceError> {
    a.check_column(j)?;
    a.check_column(k)?;
    if j == k {
        return Err(CoherenceError::SameColumn(j));
    }
    if a.is_parallel(j, k) {
        return Ok(1.0);
    }
    let dot = a.dot(j, k) as f64;
    Ok(dot / ((a.dot(j, j) as f64).sqrt() * (a.dot(k, k) as f64).sqrt()))
}

/// Maximum [`pair_coherence`] over all column pairs.
pub fn mutual_coherence(a: &RoutingMatrix) -> Result<f64, CoherenceError> {
    if a.cols() < 2 {
        return Err(CoherenceError::TooFewColumns(a.cols()));
    }
    if let Some(j) = a.first_zero_column() {
        return Err(CoherenceError::ZeroColumn(j));
    }
    let mut mu = 0.0f64;
    for j in 0..a.cols() {
        for k in j + 1..a.cols() {
            mu = mu.max(pair_coherence(a, j, k)?);
        }
    }
    Ok(mu)
}

/// Mutual coherence, or [`F_MU_SENTINEL`] when the matrix has no rows or an
/// uncovered (zero) column. A single covered column has no pairs and
/// yields 0.
pub fn f_mu(a: &RoutingMatrix) -> f64 {
    if a.is_empty() || a.first_zero_column().is_some() {
        return F_MU_SENTINEL;
    }
    if a.cols() < 2 {
        return 0.0;
    }
    mutual_coherence(a).expect("columns checked above")
}

/// Whether every column is covered and no two columns are parallel, decided
/// in integer arithmetic.
pub fn coherence_below_one(a: &RoutingMatrix) -> bool {
    !a.is_empty() && a.first_zero_column().is_none() && parallel_pair_count(a) == 0
}

/// Number of unordered column pairs with `ν = 1`. Zero columns are skipped.
pub fn parallel_pair_count(a: &RoutingMatrix) -> usize {
    let live: Vec<usize> = (0..a.cols()).filter(|&j| !a.is_zero_column(j)).collect();
    let mut n = 0;
    for (x, &j) in live.iter().enumerate() {
        for &k in &live[x + 1..] {
            if a.is_parallel(j, k) {
                n += 1;
            }
        }
    }
    n
}

/// Largest `k` with `k < (1 + 1/mu) / 2`. `mu = 0` returns `cap`; `mu >= 1`
/// gives no guarantee and returns 0.
pub fn sparsity_bound(mu: f64, cap: usize) -> usize {
    if mu.is_nan() || mu >= 1.0 {
        return 0;
    }
    if mu <= 0.0 {
        return cap;
    }
    let bound = 0.5 * (1.0 + 1.0 / mu);
    let nearest = bound.round();
    // an integer bound excludes itself
    let k = if (bound - nearest).abs() <= 1e-9 * bound.max(1.0) {
        nearest - 1.0
    } else {
        bound.floor()
    };
    (k.max(0.0) as usize).min(cap)
}

/// Sidecar for the CSV export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixSummary {
    pub interval_factor: usize,
    pub links: usize,
    pub traffic_factor: u64,
    pub mu: f64,
    pub k_max: usize,
}

impl MatrixSummary {
    pub fn of(a: &RoutingMatrix) -> Self {
        let mu = f_mu(a);
        MatrixSummary {
            interval_factor: a.interval_factor(),
            links: a.cols(),
            traffic_factor: a.traffic_factor(),
            mu,
            k_max: sparsity_bound(mu, a.cols()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[u8]]) -> RoutingMatrix {
        let cols = rows.first().map_or(0, |r| r.len());
        let rows: Vec<Vec<u8>> = rows.iter().map(|r| r.to_vec()).collect();
        RoutingMatrix::from_rows(&rows, cols).unwrap()
    }

    #[test]
    fn pair_examples() {
        // columns (1,2,0) and (1,0,2)
        let a = m(&[&[1, 1], &[2, 0], &[0, 2]]);
        assert!((pair_coherence(&a, 0, 1).unwrap() - 0.2).abs() < 1e-15);
        let b = m(&[&[1, 1, 0], &[0, 0, 2]]);
        assert_eq!(pair_coherence(&b, 0, 1).unwrap(), 1.0);
        assert_eq!(pair_coherence(&b, 0, 2).unwrap(), 0.0);
        assert_eq!(pair_coherence(&b, 1, 1), Err(CoherenceError::SameColumn(1)));
        let z = m(&[&[1, 0]]);
        assert_eq!(pair_coherence(&z, 0, 1), Err(CoherenceError::ZeroColumn(1)));
    }

    #[test]
    fn mutual_examples() {
        let identity = m(&[&[1, 0, 0], &[0, 2, 0], &[0, 0, 1]]);
        assert_eq!(mutual_coherence(&identity).unwrap(), 0.0);
        let tri = m(&[&[1, 1, 1], &[2, 0, 0], &[0, 0, 2]]);
        assert!((mutual_coherence(&tri).unwrap() - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        let two = m(&[&[1, 1, 1], &[2, 0, 0]]);
        assert_eq!(mutual_coherence(&two).unwrap(), 1.0);
        assert_eq!(
            mutual_coherence(&m(&[&[1]])),
            Err(CoherenceError::TooFewColumns(1))
        );
    }

    #[test]
    fn f_mu_sentinel() {
        assert_eq!(f_mu(&RoutingMatrix::empty(3)), F_MU_SENTINEL);
        assert_eq!(f_mu(&m(&[&[2, 0, 0]])), F_MU_SENTINEL);
        let partial = m(&[&[1, 1, 1], &[0, 0, 2]]);
        // columns (1,0), (1,0), (1,2): none zero, first two parallel
        assert_eq!(f_mu(&partial), 1.0);
        assert_eq!(f_mu(&m(&[&[2]])), 0.0);
    }

    #[test]
    fn sparsity_bound_examples() {
        assert_eq!(sparsity_bound(1.0 / 5f64.sqrt(), 11), 1);
        assert_eq!(sparsity_bound(1.0 / 3.0, 11), 1);
        assert_eq!(sparsity_bound(1.0 / 5.0, 11), 2);
        assert_eq!(sparsity_bound(0.0, 11), 11);
        assert_eq!(sparsity_bound(1.0, 11), 0);
        assert_eq!(sparsity_bound(2.0, 11), 0);
        assert_eq!(sparsity_bound(0.01, 11), 11);
    }

    #[test]
    fn csv_round_trip() {
        let tri = m(&[&[1, 1, 1], &[2, 0, 0], &[0, 0, 2]]);
        let csv = tri.to_csv();
        assert_eq!(csv, "e1,e2,e3\n1,1,1\n2,0,0\n0,0,2\n");
        assert_eq!(RoutingMatrix::from_csv(&csv).unwrap(), tri);
        assert!(RoutingMatrix::from_csv("e1,e2\n1,3\n").is_err());
        assert!(matches!(
            RoutingMatrix::from_csv("e1,e2\n1\n"),
            Err(CoherenceError::RaggedRow { .. })
        ));
    }

    #[test]
    fn factors() {
        let tri = m(&[&[1, 1, 1], &[2, 0, 0], &[0, 0, 2]]);
        assert_eq!((tri.interval_factor(), tri.traffic_factor()), (3, 7));
        let empty = RoutingMatrix::empty(4);
        assert_eq!((empty.interval_factor(), empty.traffic_factor()), (0, 0));
    }

    fn matrix() -> impl Strategy<Value = RoutingMatrix> {
        (1usize..=6, 2usize..=10).prop_flat_map(|(i, j)| {
            proptest::collection::vec(proptest::collection::vec(0u8..=2, j), i)
                .prop_map(move |rows| RoutingMatrix::from_rows(&rows, j).unwrap())
        })
    }

    proptest! {
        #[test]
        fn coherence_in_unit_interval(a in matrix()) {
            for j in 0..a.cols() {
                for k in j + 1..a.cols() {
                    if let Ok(nu) = pair_coherence(&a, j, k) {
                        prop_assert!((0.0..=1.0).contains(&nu));
                    }
                }
            }
        }

        #[test]
        fn exact_parallel_matches_float(a in matrix()) {
            let mut float_count = 0;
            for j in 0..a.cols() {
                for k in j + 1..a.cols() {
                    let cj: Vec<f64> = a.column(j).map(f64::from).collect();
                    let ck: Vec<f64> = a.column(k).map(f64::from).collect();
                    let nj = cj.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let nk = ck.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if nj == 0.0 || nk == 0.0 {
                        continue;
                    }
                    let dot: f64 = cj.iter().zip(&ck).map(|(x, y)| x * y).sum();
                    if (dot / (nj * nk) - 1.0).abs() < 1e-9 {
                        float_count += 1;
                    }
                }
            }
            prop_assert_eq!(parallel_pair_count(&a), float_count);
        }
    }
}
