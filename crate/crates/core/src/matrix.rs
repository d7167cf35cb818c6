//! Dense operands, reference BLAS routines and block partitioning.
//!
//! The reference routines fix their reduction order to the canonical loop
//! order (`ijk` for GEMM, row-wise column order for GEMV, left-to-right for
//! the inner product). Simulated kernels that keep that order match them
//! bitwise; kernels that use the DOT4 tree reassociate and are compared with
//! a tolerance.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("matrix must be non-empty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be non-empty");
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Entries drawn uniformly from [-1, 1).
    pub fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Self::from_vec(rows, cols, data).expect("non-empty")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copy of the sub-matrix `rows × cols`.
    pub fn submatrix(&self, rows: Range<usize>, cols: Range<usize>) -> Matrix {
        let (r, c) = (rows.len(), cols.len());
        let mut data = Vec::with_capacity(r * c);
        for i in rows {
            data.extend_from_slice(&self.row(i)[cols.clone()]);
        }
        Matrix::from_vec(r, c, data).expect("non-empty sub-matrix")
    }

    pub fn write_block(&mut self, row0: usize, col0: usize, block: &Matrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self.set(row0 + i, col0 + j, block.get(i, j));
            }
        }
    }

    /// Largest element-wise relative error `|a-b| / max(|b|, 1)`.
    pub fn max_rel_error(&self, reference: &Matrix) -> f64 {
        max_rel_error(&self.data, &reference.data)
    }

    /// Text form: `rows cols` header, then values row by row.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

impl FromStr for Matrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = s.split_whitespace();
        let mut dim = |what: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| Error::Parse { line: 1, msg: format!("missing {what}") })?
                .parse()
                .map_err(|e| Error::Parse { line: 1, msg: format!("bad {what}: {e}") })
        };
        let rows = dim("row count")?;
        let cols = dim("column count")?;
        let data = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse { line: 0, msg: format!("bad value {t:?}: {e}") })
            })
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_vec(rows, cols, data)
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Dense vector of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Self {
        Self { data }
    }

    pub fn zeros(len: usize) -> Self {
        Self { data: vec![0.0; len] }
    }

    /// Unit basis vector `e_k` (0-based `k`).
    pub fn unit(len: usize, k: usize) -> Self {
        let mut v = Self::zeros(len);
        v.data[k] = 1.0;
        v
    }

    pub fn random(len: usize, rng: &mut impl Rng) -> Self {
        Self { data: (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Self::new(data)
    }
}

/// Seeded generator used for every random operand in tests and the CLI.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest element-wise `|g-w| / max(|w|, 1)`. Equal values (including
/// equal infinities) and NaN against NaN count as exact; NaN against a
/// number, or opposite infinities, count as infinite.
pub fn max_rel_error(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    got.iter()
        .zip(want)
        .map(|(&g, &w)| {
            if g == w || (g.is_nan() && w.is_nan()) {
                0.0
            } else {
                let e = (g - w).abs() / w.abs().max(1.0);
                if e.is_nan() { f64::INFINITY } else { e }
            }
        })
        .fold(0.0, f64::max)
}

pub fn oracle_dot(x: &Vector, y: &Vector) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("dot of lengths {} and {}", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::Dimension("dot of empty vectors".into()));
    }
    let mut acc = 0.0;
    for (a, b) in x.data.iter().zip(&y.data) {
        acc += a * b;
    }
    Ok(acc)
}

pub fn oracle_nrm2(x: &Vector) -> Result<f64> {
    Ok(oracle_dot(x, x)?.sqrt())
}

pub fn oracle_axpy(a: f64, x: &Vector, y: &Vector) -> Result<Vector> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("axpy of lengths {} and {}", x.len(), y.len())));
    }
    Ok(Vector::new(x.data.iter().zip(&y.data).map(|(xi, yi)| a * xi + yi).collect()))
}

/// `A·x + y`, each row accumulated into `y_i` in column order.
pub fn oracle_gemv(a: &Matrix, x: &Vector, y: &Vector) -> Result<Vector> {
    if a.cols != x.len() || a.rows != y.len() {
        return Err(Error::Dimension(format!(
            "gemv with A {}x{}, x {}, y {}",
            a.rows,
            a.cols,
            x.len(),
            y.len()
        )));
    }
    let mut out = y.data.clone();
    for (i, yi) in out.iter_mut().enumerate() {
        for (aij, xj) in a.row(i).iter().zip(&x.data) {
            *yi = aij * xj + *yi;
        }
    }
    Ok(Vector::new(out))
}

/// `C + A·B`, each inner product accumulated into `C(i,j)` in `k` order.
pub fn oracle_gemm(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows || c.rows != a.rows || c.cols != b.cols {
        return Err(Error::Dimension(format!(
            "gemm with A {}x{}, B {}x{}, C {}x{}",
            a.rows, a.cols, b.rows, b.cols, c.rows, c.cols
        )));
    }
    let mut out = c.clone();
    for i in 0..a.rows {
        for j in 0..b.cols {
            let mut acc = out.get(i, j);
            for k in 0..a.cols {
                acc = a.get(i, k) * b.get(k, j) + acc;
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// One output block owned by tile `(tile_row, tile_col)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Block {
    pub tile_row: usize,
    pub tile_col: usize,
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockPlan {
    pub n: usize,
    pub b: usize,
    pub blocks: Vec<Block>,
}

impl BlockPlan {
    pub fn edge(&self) -> usize {
        self.n / self.b
    }
}

/// Split an `n × n` output into `b × b` equal square blocks.
pub fn partition_blocks(n: usize, b: usize) -> Result<BlockPlan> {
    if b == 0 {
        return Err(Error::Partition("grid size b must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::Partition("matrix dimension must be at least 1".into()));
    }
    if n % b != 0 {
        return Err(Error::Partition(format!("n={n} is not divisible by b={b}")));
    }
    let edge = n / b;
    let blocks = (0..b)
        .flat_map(|i| {
            (0..b).map(move |j| Block {
                tile_row: i,
                tile_col: j,
                rows: i * edge..(i + 1) * edge,
                cols: j * edge..(j + 1) * edge,
            })
        })
        .collect();
    Ok(BlockPlan { n, b, blocks })
}
