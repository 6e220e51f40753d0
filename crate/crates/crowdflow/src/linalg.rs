//! Sparse symmetric matrices and a banded Cholesky factorization.
//!
//! The meshes this crate targets are desk-scale and, with lexicographic node
//! numbering, their stiffness matrices have small bandwidth. A banded
//! Cholesky factorization is therefore the whole story: deterministic,
//! dependency-free, and fast enough that factorizations can be cached and
//! reused across time steps.

/// Symmetric sparse matrix in CSR layout, storing both triangles.
#[derive(Debug, Clone)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Assemble from unordered triplets; duplicate entries are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        // Deduplicate via a per-row map built after sorting by (row, col).
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut dedup: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            if let Some(last) = dedup.last_mut() {
                if last.0 == i && last.1 == j {
                    last.2 += v;
                    continue;
                }
            }
            dedup.push((i, j, v));
        }
        for &(i, _, _) in &dedup {
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts;
        let mut col_idx = Vec::with_capacity(dedup.len());
        let mut values = Vec::with_capacity(dedup.len());
        for (_, j, v) in dedup {
            col_idx.push(j);
            values.push(v);
        }
        SparseSym { n, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// y = A x.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn apply_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply(x, &mut y);
        y
    }

    /// Entry lookup; zero when the position is not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] == j {
                return self.values[k];
            }
        }
        0.0
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    /// Extract the principal submatrix on `keep` (order preserved) as a
    /// banded matrix ready for factorization. `keep` must be sorted.
    pub fn reduce_to_banded(&self, keep: &[usize]) -> Banded {
        let m = keep.len();
        let mut pos = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            pos[old] = new;
        }
        let mut bw = 0usize;
        for (new_i, &old_i) in keep.iter().enumerate() {
            for (j, _) in self.row(old_i) {
                let pj = pos[j];
                if pj != usize::MAX && pj <= new_i {
                    bw = bw.max(new_i - pj);
                }
            }
        }
        let mut banded = Banded::zeros(m, bw);
        for (new_i, &old_i) in keep.iter().enumerate() {
            for (j, v) in self.row(old_i) {
                let pj = pos[j];
                if pj != usize::MAX && pj <= new_i {
                    *banded.at_mut(new_i, pj) += v;
                }
            }
        }
        banded
    }
}

/// Symmetric positive definite banded matrix, lower band storage.
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    bw: usize,
    /// data[i * (bw + 1) + (bw - (i - j))] holds A[i][j] for i-bw <= j <= i.
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Banded { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.idx(i, j);
        &mut self.data[k]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        if j > i || i - j > self.bw {
            return 0.0;
        }
        self.data[self.idx(i, j)]
    }

    /// In-place Cholesky factorization A = L Lᵀ. Fails on non-SPD input.
    pub fn cholesky(mut self) -> Result<CholeskyBanded, &'static str> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut sum = self.at(i, j);
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    sum -= self.at(i, k) * self.at(j, k);
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err("matrix is not positive definite");
                    }
                    *self.at_mut(i, j) = sum.sqrt();
                } else {
                    let d = self.at(j, j);
                    *self.at_mut(i, j) = sum / d;
                }
            }
        }
        Ok(CholeskyBanded { l: self })
    }
}

/// Cached Cholesky factor of a banded SPD matrix.
#[derive(Debug, Clone)]
pub struct CholeskyBanded {
    l: Banded,
}

impl CholeskyBanded {
    pub fn dim(&self) -> usize {
        self.l.n
    }

    /// Solve A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw) = (self.l.n, self.l.bw);
        assert_eq!(b.len(), n);
        // forward: L y = b
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut sum = b[i];
            for j in lo..i {
                sum -= self.l.at(i, j) * b[j];
            }
            b[i] = sum / self.l.at(i, i);
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut sum = b[i];
            for j in (i + 1)..=hi {
                sum -= self.l.at(j, i) * b[j];
            }
            b[i] = sum / self.l.at(i, i);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
