//! Dense Cholesky factor stored as a packed lower triangle that can grow by
//! one row at a time.

/// Pivots must exceed this fraction of the corresponding diagonal entry.
pub(crate) const PIVOT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct NotPositiveDefinite {
    pub row: usize,
    pub pivot: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Cholesky {
    n: usize,
    // row i occupies data[i*(i+1)/2 .. i*(i+1)/2 + i + 1]
    data: Vec<f64>,
}

#[inline]
fn offset(i: usize) -> usize {
    i * (i + 1) / 2
}

/// Dot product with four independent accumulators so the compiler can
/// vectorize it.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl Cholesky {
    pub fn empty() -> Self {
        Cholesky::default()
    }

    /// Factors the symmetric `n x n` row-major matrix `a`.
    pub fn factor(a: &[f64], n: usize) -> Result<Self, NotPositiveDefinite> {
        debug_assert_eq!(a.len(), n * n);
        let mut chol = Cholesky {
            n: 0,
            data: Vec::with_capacity(offset(n)),
        };
        for i in 0..n {
            chol.extend(&a[i * n..i * n + i], a[i * n + i])?;
        }
        Ok(chol)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[offset(i) + j]
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[offset(i)..offset(i) + i + 1]
    }

    pub fn diag(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.data[offset(i) + i])
    }

    /// Appends a row for a new variable with covariances `col` against the
    /// existing ones and variance `diag`. Cost O(n^2).
    pub fn extend(&mut self, col: &[f64], diag: f64) -> Result<(), NotPositiveDefinite> {
        assert_eq!(col.len(), self.n, "extension column length");
        let mut row = self.solve_lower(col);
        let sq = dot(&row, &row);
        let pivot = diag - sq;
        if !(pivot > PIVOT_TOLERANCE * diag.abs()) || !pivot.is_finite() {
            return Err(NotPositiveDefinite { row: self.n, pivot });
        }
        row.push(pivot.sqrt());
        self.data.extend_from_slice(&row);
        self.n += 1;
        Ok(())
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        x
    }

    pub fn solve_lower_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] = (x[i] - s) / row[i];
        }
    }

    /// Solves `L^T x = b`.
    pub fn solve_upper_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in (0..self.n).rev() {
            x[i] /= self.data[offset(i) + i];
            let xi = x[i];
            let row = self.row(i);
            for (xj, l) in x[..i].iter_mut().zip(&row[..i]) {
                *xj -= l * xi;
            }
        }
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.diag().map(f64::ln).sum::<f64>()
    }

    /// Full inverse of `L L^T`, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        // row j of `cols` is column j of L^{-1}, nonzero from entry j on
        let mut cols = vec![0.0; n * n];
        for j in 0..n {
            let c = &mut cols[j * n..(j + 1) * n];
            c[j] = 1.0 / self.get(j, j);
            for i in j + 1..n {
                let row = self.row(i);
                c[i] = -dot(&row[j..i], &c[j..i]) / row[i];
            }
        }
        // (L L^T)^{-1} = L^{-T} L^{-1}
        let mut inv = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let s = dot(&cols[i * n + i..(i + 1) * n], &cols[j * n + i..(j + 1) * n]);
                inv[i * n + j] = s;
                inv[j * n + i] = s;
            }
        }
        inv
    }

    /// Dense `L L^T`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = self.row(i)[..=j]
                    .iter()
                    .zip(self.row(j))
                    .map(|(x, y)| x * y)
                    .sum();
                a[i * n + j] = s;
                a[j * n + i] = s;
            }
        }
        a
    }
}
