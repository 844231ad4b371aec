use crate::error::{contract, Result};

const SIMPLEX_TOL: f64 = 1e-9;

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(contract("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(contract(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(contract("matrix entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(contract("ragged matrix"));
        }
        Self::from_vec(rows.len(), cols, rows.iter().flatten().copied().collect())
    }

    pub fn constant(rows: usize, cols: usize, c: f64) -> Result<Self> {
        Self::from_vec(rows, cols, vec![c; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.cols + b]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for b in 0..self.cols {
            for a in 0..self.rows {
                data.push(self.get(a, b));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// `M y`, the row player's payoff per pure row against `y`.
    pub fn times_col(&self, y: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.cols)
            .map(|r| r.iter().zip(y).map(|(m, p)| m * p).sum())
            .collect()
    }

    /// `x^T M`, per pure column against `x`.
    pub fn times_row(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &p) in self.data.chunks(self.cols).zip(x) {
            for (o, m) in out.iter_mut().zip(r) {
                *o += p * m;
            }
        }
        out
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Distribution over the cells of an `A x B` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl JointDist {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(contract("joint distribution has the wrong size"));
        }
        if data.iter().any(|&p| p < -SIMPLEX_TOL || !p.is_finite()) {
            return Err(contract("joint distribution has a negative entry"));
        }
        let sum: f64 = data.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(contract(format!("joint distribution sums to {sum}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn product(x: &[f64], y: &[f64]) -> Self {
        let data = x
            .iter()
            .flat_map(|&p| y.iter().map(move |&q| p * q))
            .collect();
        Self {
            rows: x.len(),
            cols: y.len(),
            data,
        }
    }

    pub fn point(rows: usize, cols: usize, a: usize, b: usize) -> Self {
        let mut data = vec![0.0; rows * cols];
        data[a * cols + b] = 1.0;
        Self { rows, cols, data }
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.cols + b]
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        self.data.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in self.data.chunks(self.cols) {
            for (o, p) in out.iter_mut().zip(r) {
                *o += p;
            }
        }
        out
    }

    /// `E_{(a,b) ~ pi} M(a, b)`.
    pub fn expect(&self, m: &Matrix) -> f64 {
        self.data.iter().zip(m.as_slice()).map(|(p, x)| p * x).sum()
    }
}

/// Optimistic and pessimistic action values at one state, `lower <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct QPairMatrix {
    upper: Matrix,
    lower: Matrix,
}

impl QPairMatrix {
    pub fn new(upper: Matrix, lower: Matrix) -> Result<Self> {
        if upper.rows() != lower.rows() || upper.cols() != lower.cols() {
            return Err(contract("upper and lower matrices differ in shape"));
        }
        if let Some(i) = upper
            .as_slice()
            .iter()
            .zip(lower.as_slice())
            .position(|(u, l)| l > &(u + SIMPLEX_TOL))
        {
            return Err(contract(format!("lower exceeds upper at flat index {i}")));
        }
        Ok(Self { upper, lower })
    }

    /// Both players facing the same matrix.
    pub fn zero_sum(m: Matrix) -> Self {
        Self {
            upper: m.clone(),
            lower: m,
        }
    }

    pub fn upper(&self) -> &Matrix {
        &self.upper
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn rows(&self) -> usize {
        self.upper.rows()
    }

    pub fn cols(&self) -> usize {
        self.upper.cols()
    }

    pub fn shift(&self, c: f64) -> Self {
        Self {
            upper: self.upper.map(|x| x + c),
            lower: self.lower.map(|x| x + c),
        }
    }
}
