use std::fmt::Write as _;

use crate::geometry::Mesh;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    symmetric: bool,
}

impl CsrMatrix {
    /// Zero matrix with the node-adjacency pattern of `mesh` (nodes sharing an element).
    pub fn node_pattern(mesh: &Mesh) -> Self {
        let n = mesh.n_nodes();
        let mut rows: Vec<Vec<usize>> = vec![Vec::with_capacity(9); n];
        for e in mesh.elements() {
            for &a in &e.nodes {
                for &b in &e.nodes {
                    rows[a].push(b);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Self {
            n,
            row_ptr,
            cols,
            vals,
            symmetric: true,
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed
    /// in input order.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>, symmetric: bool) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside a {n}x{n} matrix");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
            symmetric,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect(), true)
    }

    pub fn diagonal_matrix(d: &[f64]) -> Self {
        Self::from_triplets(
            d.len(),
            d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect(),
            true,
        )
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn is_symmetric_flagged(&self) -> bool {
        self.symmetric
    }

    pub(crate) fn set_symmetric(&mut self, symmetric: bool) {
        self.symmetric = symmetric;
    }

    /// Adds `v` at `(r, c)`, which must be in the sparsity pattern.
    pub(crate) fn add_at(&mut self, r: usize, c: usize, v: f64) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        let k = self.cols[range.clone()]
            .binary_search(&c)
            .unwrap_or_else(|_| panic!("({r}, {c}) not in sparsity pattern"));
        self.vals[range.start + k] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// y = A x
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yr = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// xᵀ A y
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `self + alpha * other`, merging sparsity patterns.
    pub fn add_scaled(&self, other: &CsrMatrix, alpha: f64) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut vals = Vec::with_capacity(self.nnz().max(other.nnz()));
        row_ptr.push(0);
        for r in 0..self.n {
            let (mut a, ae) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let (mut b, be) = (other.row_ptr[r], other.row_ptr[r + 1]);
            while a < ae || b < be {
                let ca = if a < ae { self.cols[a] } else { usize::MAX };
                let cb = if b < be { other.cols[b] } else { usize::MAX };
                if ca < cb {
                    cols.push(ca);
                    vals.push(self.vals[a]);
                    a += 1;
                } else if cb < ca {
                    cols.push(cb);
                    vals.push(alpha * other.vals[b]);
                    b += 1;
                } else {
                    cols.push(ca);
                    vals.push(self.vals[a] + alpha * other.vals[b]);
                    a += 1;
                    b += 1;
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n: self.n,
            row_ptr,
            cols,
            vals,
            symmetric: self.symmetric && other.symmetric,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |A − Aᵀ| over all entries.
    pub fn symmetry_defect(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Debug dump: one `row col value` line per stored entry.
    pub fn to_triplet_text(&self) -> String {
        let mut s = String::new();
        for (r, c, v) in self.triplets() {
            writeln!(s, "{r} {c} {v:.17e}").unwrap();
        }
        s
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (r, c, v) in self.triplets() {
            d[r][c] += v;
        }
        d
    }
}

/// Debug dump of a vector, one `index value` line per entry.
pub fn vector_to_text(v: &[f64]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        writeln!(s, "{i} {x:.17e}").unwrap();
    }
    s
}
