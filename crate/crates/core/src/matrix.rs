use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::expr::TimeExpr;

/// Dense matrix of time expressions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<TimeExpr>,
}

impl ExprMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<TimeExpr>) -> Result<ExprMatrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty {rows}x{cols} matrix")));
        }
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(ExprMatrix { rows, cols, entries })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> TimeExpr) -> ExprMatrix {
        assert!(rows > 0 && cols > 0);
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        ExprMatrix { rows, cols, entries }
    }

    /// Parses nested rows of expression strings.
    pub fn parse<S: AsRef<str>>(rows: &[Vec<S>]) -> Result<ExprMatrix> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {n_cols}",
                    row.len()
                )));
            }
            for text in row {
                let text = text.as_ref();
                let e = TimeExpr::parse(text)
                    .map_err(|source| Error::Parse { text: text.to_string(), source })?;
                entries.push(e);
            }
        }
        ExprMatrix::new(n_rows, n_cols, entries)
    }

    pub fn zeros(rows: usize, cols: usize) -> ExprMatrix {
        ExprMatrix::from_fn(rows, cols, |_, _| TimeExpr::zero())
    }

    pub fn identity(n: usize) -> ExprMatrix {
        ExprMatrix::from_fn(n, n, |i, j| TimeExpr::constant(if i == j { 1.0 } else { 0.0 }))
    }

    /// `e` on the diagonal, literal zeros elsewhere.
    pub fn diagonal(n: usize, e: &TimeExpr) -> ExprMatrix {
        ExprMatrix::from_fn(n, n, |i, j| if i == j { e.clone() } else { TimeExpr::zero() })
    }

    pub fn scalar(e: TimeExpr) -> ExprMatrix {
        ExprMatrix { rows: 1, cols: 1, entries: vec![e] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> &TimeExpr {
        &self.entries[i * self.cols + j]
    }

    pub fn eval(&self, t: f64) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, out: &mut DMatrix<f64>) -> Result<()> {
        debug_assert_eq!(out.shape(), self.shape());
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self.get(i, j).eval(t)?;
            }
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(&TimeExpr) -> TimeExpr) -> ExprMatrix {
        ExprMatrix { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(f).collect() }
    }

    pub fn transpose(&self) -> ExprMatrix {
        ExprMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn neg(&self) -> ExprMatrix {
        self.map(|e| -e)
    }

    pub fn reflect_time(&self) -> ExprMatrix {
        self.map(TimeExpr::reflect_time)
    }

    pub fn add(&self, rhs: &ExprMatrix) -> Result<ExprMatrix> {
        self.zip(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &ExprMatrix) -> Result<ExprMatrix> {
        self.zip(rhs, "subtract", |a, b| a - b)
    }

    fn zip(&self, rhs: &ExprMatrix, what: &str, f: impl Fn(&TimeExpr, &TimeExpr) -> TimeExpr) -> Result<ExprMatrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::Dimension(format!(
                "cannot {what} {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let entries = self.entries.iter().zip(&rhs.entries).map(|(a, b)| f(a, b)).collect();
        Ok(ExprMatrix { rows: self.rows, cols: self.cols, entries })
    }

    /// Symbolic product.
    pub fn mul(&self, rhs: &ExprMatrix) -> Result<ExprMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(ExprMatrix::from_fn(self.rows, rhs.cols, |i, j| {
            (1..self.cols).fold(self.get(i, 0) * rhs.get(0, j), |acc, k| acc + self.get(i, k) * rhs.get(k, j))
        }))
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).to_string()).collect())
            .collect()
    }
}

impl Serialize for ExprMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_strings().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ExprMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<String>>::deserialize(deserializer)?;
        ExprMatrix::parse(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[&str]]) -> ExprMatrix {
        let rows: Vec<Vec<&str>> = rows.iter().map(|r| r.to_vec()).collect();
        ExprMatrix::parse(&rows).unwrap()
    }

    #[test]
    fn parse_checks_shape() {
        let rows = vec![vec!["1", "2"], vec!["3"]];
        assert!(matches!(ExprMatrix::parse(&rows), Err(Error::Dimension(_))));
        let rows: Vec<Vec<&str>> = vec![];
        assert!(ExprMatrix::parse(&rows).is_err());
        assert!(matches!(ExprMatrix::parse(&[vec!["q"]]), Err(Error::Parse { .. })));
    }

    #[test]
    fn symbolic_product_matches_numeric() {
        let a = m(&[&["t", "1"], &["sin(t)", "-2"]]);
        let b = m(&[&["exp(-t)"], &["t^2"]]);
        let ab = a.mul(&b).unwrap();
        for &t in &[-1.3, 0.0, 2.2] {
            let lhs = ab.eval(t).unwrap();
            let rhs = a.eval(t).unwrap() * b.eval(t).unwrap();
            assert!((lhs - rhs).abs().max() < 1e-14);
        }
        assert!(b.mul(&b).is_err());
    }

    #[test]
    fn transpose_and_sub() {
        let a = m(&[&["t", "1"], &["2", "3"]]);
        assert_eq!(a.transpose().eval(5.0).unwrap(), a.eval(5.0).unwrap().transpose());
        let d = a.sub(&a).unwrap().eval(1.0).unwrap();
        assert_eq!(d, DMatrix::zeros(2, 2));
    }

    #[test]
    fn serde_nested_rows() {
        let a: ExprMatrix = serde_json::from_str(r#"[["t", "0"], ["1", "-t"]]"#).unwrap();
        assert_eq!(a.shape(), (2, 2));
        let back: ExprMatrix = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back.eval(3.0).unwrap(), a.eval(3.0).unwrap());
    }
}
