//! Dense and CSR sparse matrices, plus the two nonlinear maps used by the network
//! (LeakyReLU and row-wise L2 normalization) with their exact gradients.
//!
//! All arithmetic is `f64`. Reductions run in a fixed order so repeated calls are
//! bit-identical.

use crate::error::{Error, Result};

/// Floor applied to row norms in [`row_l2_normalize`].
pub const NORM_EPS: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data; rejects wrong lengths and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "from_vec",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("from_rows", "ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub(crate) fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
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

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Selects the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_same_shape(op: &'static str, a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

/// `a · b`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::shape(
            "matmul",
            format!("{}x{} times {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = DenseMatrix::zeros(m, n);
    for i in 0..m {
        let arow = a.row(i);
        let orow = &mut out.data[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate().take(k) {
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(out)
}

/// `aᵀ · b` without materializing the transpose.
pub fn matmul_tn(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows != b.rows {
        return Err(Error::shape(
            "matmul_tn",
            format!("({}x{})ᵀ times {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    let (k, n) = (a.cols, b.cols);
    let mut out = DenseMatrix::zeros(k, n);
    for r in 0..a.rows {
        let arow = a.row(r);
        let brow = b.row(r);
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out.data[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(out)
}

/// `a · bᵀ` without materializing the transpose.
pub fn matmul_nt(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.cols {
        return Err(Error::shape(
            "matmul_nt",
            format!("{}x{} times ({}x{})ᵀ", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    Ok(DenseMatrix::from_fn(a.rows, b.rows, |i, j| dot(a.row(i), b.row(j))))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1 || row_offsets[0] != 0 {
            return Err(Error::invalid("row_offsets must have rows+1 entries starting at 0"));
        }
        if row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("row_offsets must be non-decreasing"));
        }
        let nnz = row_offsets[rows];
        if col_indices.len() != nnz || values.len() != nnz {
            return Err(Error::invalid("col_indices/values length must equal nnz"));
        }
        for r in 0..rows {
            let cols_r = &col_indices[row_offsets[r]..row_offsets[r + 1]];
            if cols_r.iter().any(|&c| c >= cols) {
                return Err(Error::invalid(format!("column index out of range in row {r}")));
            }
            if cols_r.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!("columns not strictly increasing in row {r}")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite sparse value"));
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_offsets = vec![0usize; rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if r >= rows || c >= cols {
                return Err(Error::invalid(format!("triplet ({r}, {c}) outside {rows}x{cols}")));
            }
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_offsets[r + 1] += 1;
            col_indices.push(c);
            values.push(v);
        }
        for r in 0..rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Self::new(rows, cols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of row `r` as `(col, value)`, ascending by column.
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        match self.col_indices[span.clone()].binary_search(&c) {
            Ok(p) => self.values[span.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                out.set(r, c, v);
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                triplets.push((c, r, v));
            }
        }
        Self::from_triplets(self.cols, self.rows, &triplets).expect("transpose of a valid matrix")
    }
}

/// Sparse-times-dense product. Each output row accumulates in ascending column order.
pub fn spmm(s: &SparseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if s.cols != x.rows {
        return Err(Error::shape(
            "spmm",
            format!("sparse {}x{} times {}x{}", s.rows, s.cols, x.rows, x.cols),
        ));
    }
    let k = x.cols;
    let mut out = DenseMatrix::zeros(s.rows, k);
    for r in 0..s.rows {
        let orow = &mut out.data[r * k..(r + 1) * k];
        for (c, v) in s.row_entries(r) {
            for (o, &xv) in orow.iter_mut().zip(x.row(c)) {
                *o += v * xv;
            }
        }
    }
    Ok(out)
}

/// Elementwise `max(x, slope·x)` for `slope` in (0, 1).
pub fn leaky_relu(x: &DenseMatrix, slope: f64) -> DenseMatrix {
    DenseMatrix {
        rows: x.rows,
        cols: x.cols,
        data: x
            .data
            .iter()
            .map(|&v| if v >= 0.0 { v } else { slope * v })
            .collect(),
    }
}

/// Backward of [`leaky_relu`]; the subgradient at exactly 0 is 1.
pub fn leaky_relu_grad(x: &DenseMatrix, upstream: &DenseMatrix, slope: f64) -> Result<DenseMatrix> {
    check_same_shape("leaky_relu_grad", x, upstream)?;
    Ok(DenseMatrix {
        rows: x.rows,
        cols: x.cols,
        data: x
            .data
            .iter()
            .zip(&upstream.data)
            .map(|(&v, &g)| if v >= 0.0 { g } else { slope * g })
            .collect(),
    })
}

/// Divides each row by `max(‖row‖₂, NORM_EPS)`.
pub fn row_l2_normalize(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for i in 0..out.rows {
        let row = out.row_mut(i);
        let n = norm(row).max(NORM_EPS);
        row.iter_mut().for_each(|v| *v /= n);
    }
    out
}

/// Backward of [`row_l2_normalize`]: `(g − y(y·g)) / ‖x‖` per row, `g / ε` on clamped rows.
pub fn row_l2_normalize_grad(x: &DenseMatrix, upstream: &DenseMatrix) -> Result<DenseMatrix> {
    check_same_shape("row_l2_normalize_grad", x, upstream)?;
    let mut out = DenseMatrix::zeros(x.rows, x.cols);
    for i in 0..x.rows {
        let xr = x.row(i);
        let gr = upstream.row(i);
        let n = norm(xr);
        let orow = out.row_mut(i);
        if n <= NORM_EPS {
            for (o, &g) in orow.iter_mut().zip(gr) {
                *o = g / NORM_EPS;
            }
            continue;
        }
        let yg = dot(xr, gr) / n;
        for ((o, &xv), &g) in orow.iter_mut().zip(xr).zip(gr) {
            *o = (g - (xv / n) * yg) / n;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
        DenseMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_sparse(rng: &mut ChaCha8Rng, r: usize, c: usize, density: f64) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..r {
            for j in 0..c {
                if rng.random_bool(density) {
                    t.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        SparseMatrix::from_triplets(r, c, &t).unwrap()
    }

    #[test]
    fn matmul_cases() {
        let b = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]]).unwrap();
        assert_eq!(matmul(&DenseMatrix::identity(3), &b).unwrap(), b);
        assert_eq!(matmul(&DenseMatrix::zeros(3, 3), &b).unwrap(), DenseMatrix::zeros(3, 3));

        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[19.0, 22.0, 43.0, 50.0]);

        assert!(matches!(matmul(&a, &DenseMatrix::zeros(3, 1)), Err(Error::Shape { .. })));
    }

    #[test]
    fn transposed_products_match_explicit_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_dense(&mut rng, 4, 3);
        let b = random_dense(&mut rng, 4, 5);
        let c = random_dense(&mut rng, 2, 3);
        assert!(matmul_tn(&a, &b).unwrap().max_abs_diff(&matmul(&a.transpose(), &b).unwrap()) < 1e-14);
        assert!(matmul_nt(&a, &c).unwrap().max_abs_diff(&matmul(&a, &c.transpose()).unwrap()) < 1e-14);
    }

    #[test]
    fn spmm_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_dense(&mut rng, 5, 3);
        assert_eq!(spmm(&SparseMatrix::identity(5), &x).unwrap(), x);
        assert_eq!(spmm(&SparseMatrix::empty(5, 5), &x).unwrap(), DenseMatrix::zeros(5, 3));

        let s = random_sparse(&mut rng, 5, 5, 0.4);
        let dense = matmul(&s.to_dense(), &x).unwrap();
        assert!(spmm(&s, &x).unwrap().max_abs_diff(&dense) <= 1e-12);

        assert!(spmm(&SparseMatrix::identity(4), &x).is_err());
    }

    #[test]
    fn sparse_validation() {
        assert!(SparseMatrix::new(2, 2, vec![0, 1, 2], vec![0, 0], vec![1.0, 1.0]).is_ok());
        assert!(SparseMatrix::new(2, 2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(2, 2, vec![0, 1, 2], vec![0, 2], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        let s = SparseMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (1, 2, 0.5), (0, 1, 2.0)]).unwrap();
        assert_eq!(s.get(1, 2), 1.5);
        assert_eq!(s.transpose().get(2, 1), 1.5);
    }

    #[test]
    fn leaky_relu_values() {
        let x = DenseMatrix::from_rows(&[vec![3.0, -1.0, 0.0]]).unwrap();
        let y = leaky_relu(&x, 0.2);
        assert_eq!(y.data(), &[3.0, -0.2, 0.0]);
    }

    #[test]
    fn leaky_relu_grad_cases() {
        let up = DenseMatrix::from_rows(&[vec![0.5, -2.0, 1.5]]).unwrap();
        let pos = DenseMatrix::from_rows(&[vec![1.0, 2.0, 0.1]]).unwrap();
        assert_eq!(leaky_relu_grad(&pos, &up, 0.2).unwrap(), up);
        let neg = DenseMatrix::from_rows(&[vec![-1.0, -2.0, -0.1]]).unwrap();
        assert_eq!(leaky_relu_grad(&neg, &up, 0.2).unwrap(), up.scale(0.2));
        let zero = DenseMatrix::zeros(1, 3);
        assert_eq!(leaky_relu_grad(&zero, &up, 0.2).unwrap(), up);
        assert!(leaky_relu_grad(&zero, &DenseMatrix::zeros(3, 1), 0.2).is_err());
    }

    #[test]
    fn normalize_cases() {
        let x = DenseMatrix::from_rows(&[vec![3.0, 4.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let y = row_l2_normalize(&x);
        assert!((y.get(0, 0) - 0.6).abs() < 1e-15 && (y.get(0, 1) - 0.8).abs() < 1e-15);
        assert_eq!(y.row(1), &[0.0, 1.0]);
        assert_eq!(y.row(2), &[0.0, 0.0]);
    }

    #[test]
    fn normalize_grad_cases() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0, -2.0]]).unwrap();
        let g = row_l2_normalize_grad(&x, &x.scale(3.0)).unwrap();
        assert!(g.data().iter().all(|v| v.abs() < 1e-15));

        let e = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let up = DenseMatrix::from_rows(&[vec![0.0, 0.7, -0.3]]).unwrap();
        assert_eq!(row_l2_normalize_grad(&e, &up).unwrap(), up);
    }

    // Central finite differences of sum(upstream ⊙ f(x)).
    fn fd_grad(x: &DenseMatrix, up: &DenseMatrix, f: impl Fn(&DenseMatrix) -> DenseMatrix) -> DenseMatrix {
        let h = 1e-5;
        let mut g = DenseMatrix::zeros(x.rows(), x.cols());
        for idx in 0..x.data().len() {
            let mut xp = x.clone();
            xp.data_mut()[idx] += h;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= h;
            let fp: f64 = f(&xp).data().iter().zip(up.data()).map(|(a, b)| a * b).sum();
            let fm: f64 = f(&xm).data().iter().zip(up.data()).map(|(a, b)| a * b).sum();
            g.data_mut()[idx] = (fp - fm) / (2.0 * h);
        }
        g
    }

    fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        let diff = a.max_abs_diff(b);
        diff / a.data().iter().chain(b.data()).fold(1e-8_f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn gradients_match_finite_differences_over_seeds() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // keep entries away from the LeakyReLU kink
            let x = DenseMatrix::from_fn(4, 4, |_, _| {
                let v: f64 = rng.random_range(0.05..1.0);
                if rng.random_bool(0.5) { v } else { -v }
            });
            let up = random_dense(&mut rng, 4, 4);
            let analytic = leaky_relu_grad(&x, &up, 0.2).unwrap();
            let numeric = fd_grad(&x, &up, |m| leaky_relu(m, 0.2));
            assert!(analytic.max_abs_diff(&numeric) < 1e-6, "seed {seed}");

            let x = random_dense(&mut rng, 3, 5);
            let up = random_dense(&mut rng, 3, 5);
            let analytic = row_l2_normalize_grad(&x, &up).unwrap();
            let numeric = fd_grad(&x, &up, row_l2_normalize);
            assert!(rel_err(&analytic, &numeric) < 1e-5, "seed {seed}");
        }
    }

    proptest! {
        #[test]
        fn spmm_equals_dense_product(n in 1usize..=20, k in 1usize..6, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_sparse(&mut rng, n, n, 0.3);
            let x = random_dense(&mut rng, n, k);
            let dense = matmul(&s.to_dense(), &x).unwrap();
            prop_assert!(spmm(&s, &x).unwrap().max_abs_diff(&dense) <= 1e-9);
        }

        #[test]
        fn normalize_is_idempotent(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 1..6)) {
            let x = DenseMatrix::from_rows(&rows).unwrap();
            let once = row_l2_normalize(&x);
            prop_assert!(row_l2_normalize(&once).max_abs_diff(&once) <= 1e-12);
        }

        #[test]
        fn leaky_relu_is_max_form(v in -100.0f64..100.0, slope in 0.01f64..0.99) {
            let x = DenseMatrix::from_rows(&[vec![v]]).unwrap();
            prop_assert_eq!(leaky_relu(&x, slope).get(0, 0), v.max(slope * v));
        }

        #[test]
        fn leaky_relu_is_monotone(a in -100.0f64..100.0, b in -100.0f64..100.0, slope in 0.01f64..0.99) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let y = leaky_relu(&DenseMatrix::from_rows(&[vec![lo, hi]]).unwrap(), slope);
            prop_assert!(y.get(0, 0) <= y.get(0, 1));
        }
    }
}
