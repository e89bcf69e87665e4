//! Low-frequency 2D DCT basis construction.
//!
//! A block of side `n` is modeled as a linear combination of the first `k`
//! two-dimensional DCT-II basis functions in zig-zag frequency order. Each
//! basis function is vectorized onto an `n*n` column using the project-wide
//! pixel index `i = row * n + col`, so every module that touches block
//! vectors agrees on the layout.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};

/// A single (u, v) spatial-frequency index pair.
///
/// `u` is the frequency along the first (row) axis, `v` along the second
/// (column) axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrequencyPair {
    pub u: usize,
    pub v: usize,
}

/// Enumerates the first `k` frequency pairs of the `n x n` plane in zig-zag
/// order: antidiagonals `d = u + v` in increasing order, traversal direction
/// alternating per antidiagonal (odd `d`: `u` ascending, even `d`: `u`
/// descending), clipped to the square.
///
/// This is the scan order used by JPEG for an 8x8 block, generalized to any
/// side length.
pub fn zigzag_order(n: usize, k: usize) -> Result<Vec<FrequencyPair>> {
    if n == 0 {
        return Err(Error::invalid("block side must be at least 1"));
    }
    if k == 0 || k > n * n {
        return Err(Error::invalid(format!(
            "basis count must satisfy 1 <= k <= n^2, got k={k} for n={n}"
        )));
    }
    let mut order = Vec::with_capacity(k);
    'outer: for d in 0..=(2 * n - 2) {
        let lo = d.saturating_sub(n - 1);
        let hi = d.min(n - 1);
        let range: Box<dyn Iterator<Item = usize>> = if d % 2 == 1 {
            Box::new(lo..=hi)
        } else {
            Box::new((lo..=hi).rev())
        };
        for u in range {
            order.push(FrequencyPair { u, v: d - u });
            if order.len() == k {
                break 'outer;
            }
        }
    }
    Ok(order)
}

/// Column-major storage shared by the plain and scaled basis matrices:
/// `k` contiguous columns of `n*n` entries each.
#[derive(Debug, Clone, PartialEq)]
struct Columns {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl Columns {
    fn column(&self, j: usize) -> &[f64] {
        let n2 = self.n * self.n;
        &self.data[j * n2..(j + 1) * n2]
    }

    /// out = M * coeffs
    fn mat_vec(&self, coeffs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.k);
        let n2 = self.n * self.n;
        let mut out = vec![0.0; n2];
        for (j, &c) in coeffs.iter().enumerate() {
            for (o, &p) in out.iter_mut().zip(self.column(j)) {
                *o += c * p;
            }
        }
        out
    }

    /// out = M^T * v
    fn mat_t_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n * self.n);
        (0..self.k)
            .map(|j| crate::linalg::dot(self.column(j), v))
            .collect()
    }
}

/// The `n^2 x k` matrix of vectorized orthonormal 2D DCT basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    cols: Columns,
    ordering: Vec<FrequencyPair>,
}

impl BasisMatrix {
    /// Builds the basis for `n x n` blocks with the first `k` zig-zag
    /// frequencies, using orthonormal DCT-II scaling: the weight for
    /// frequency 0 is `sqrt(1/n)` and `sqrt(2/n)` otherwise, so the columns
    /// form an orthonormal set.
    pub fn build(n: usize, k: usize) -> Result<Self> {
        let ordering = zigzag_order(n, k)?;
        let n2 = n * n;
        let mut data = vec![0.0; n2 * k];
        for (j, pair) in ordering.iter().enumerate() {
            let bu = beta(pair.u, n);
            let bv = beta(pair.v, n);
            let col = &mut data[j * n2..(j + 1) * n2];
            for row in 0..n {
                let cu = dct_cos(row, pair.u, n);
                for col_ix in 0..n {
                    let cv = dct_cos(col_ix, pair.v, n);
                    col[row * n + col_ix] = bu * bv * cu * cv;
                }
            }
        }
        Ok(BasisMatrix {
            cols: Columns { n, k, data },
            ordering,
        })
    }

    /// A basis with zero columns, leaving only the identity part of the
    /// stacked system. Used for degenerate solver setups.
    pub fn empty(n: usize) -> Self {
        BasisMatrix {
            cols: Columns {
                n,
                k: 0,
                data: Vec::new(),
            },
            ordering: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.cols.n
    }

    pub fn k(&self) -> usize {
        self.cols.k
    }

    pub fn ordering(&self) -> &[FrequencyPair] {
        &self.ordering
    }

    /// The `j`-th vectorized basis function.
    pub fn column(&self, j: usize) -> &[f64] {
        self.cols.column(j)
    }

    /// P^T f: coefficients of the orthogonal projection of `f` onto the
    /// basis span.
    pub fn project_coeffs(&self, f: &[f64]) -> Vec<f64> {
        self.cols.mat_t_vec(f)
    }

    /// P alpha: the block reconstructed from coefficients.
    pub fn reconstruct(&self, alpha: &[f64]) -> Vec<f64> {
        self.cols.mat_vec(alpha)
    }

    /// Writes the matrix as plain text: one line per pixel index, the `k`
    /// column values space-separated, 17 significant digits each.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        dump_columns(&self.cols, &mut w)
    }
}

/// The basis with every entry divided by the trade-off weight `q`
/// (`P' = P / q`), which folds the coefficient penalty weight into the
/// matrix so the solver can penalize all unknowns uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledBasis {
    q: f64,
    cols: Columns,
    ordering: Vec<FrequencyPair>,
}

impl ScaledBasis {
    pub fn new(basis: &BasisMatrix, q: f64) -> Result<Self> {
        if q <= 0.0 || !q.is_finite() {
            return Err(Error::invalid(format!(
                "q must be positive and finite, got {q}"
            )));
        }
        let data = basis.cols.data.iter().map(|&p| p / q).collect();
        Ok(ScaledBasis {
            q,
            cols: Columns {
                n: basis.cols.n,
                k: basis.cols.k,
                data,
            },
            ordering: basis.ordering.clone(),
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn n(&self) -> usize {
        self.cols.n
    }

    pub fn k(&self) -> usize {
        self.cols.k
    }

    pub fn ordering(&self) -> &[FrequencyPair] {
        &self.ordering
    }

    pub fn column(&self, j: usize) -> &[f64] {
        self.cols.column(j)
    }

    /// P' alpha
    pub fn mat_vec(&self, alpha: &[f64]) -> Vec<f64> {
        self.cols.mat_vec(alpha)
    }

    /// P'^T v
    pub fn mat_t_vec(&self, v: &[f64]) -> Vec<f64> {
        self.cols.mat_t_vec(v)
    }

    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        dump_columns(&self.cols, &mut w)
    }
}

fn beta(w: usize, n: usize) -> f64 {
    if w == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

fn dct_cos(x: usize, w: usize, n: usize) -> f64 {
    (((2 * x + 1) * w) as f64 * PI / (2.0 * n as f64)).cos()
}

fn dump_columns<W: Write>(cols: &Columns, w: &mut W) -> std::io::Result<()> {
    let n2 = cols.n * cols.n;
    let mut line = String::new();
    for i in 0..n2 {
        line.clear();
        for j in 0..cols.k {
            if j > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{:.16e}", cols.column(j)[i]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}
