//! Small dense linear algebra over [`Scalar`].
//!
//! Everything here is sized for desk-scale problems (tens of rows), so the
//! routines favour clarity and numerical robustness over blocking.

use std::fmt;

use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.shape(), other.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &x| acc.max_of(x.abs()))
    }

    pub fn to_f64(&self) -> Mat<f64> {
        self.map(|x| x.to_f64())
    }
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = self.data[r * self.cols..(r + 1) * self.cols]
                .iter()
                .map(|x| format!("{x:?}"))
                .collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

pub fn norm2<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Solution of `min ||A x - b||` from a column-pivoted Householder QR.
#[derive(Clone, Debug)]
pub struct LeastSquares<T> {
    pub solution: Vec<T>,
    /// `||A x - b||_2` at the returned solution.
    pub residual: T,
    /// Numerical rank detected during factorisation.
    pub rank: usize,
}

/// Least-squares solve with column pivoting.
///
/// Rank-deficient systems get the basic solution (free variables set to
/// zero); underdetermined systems are handled the same way.
pub fn least_squares<T: Scalar>(a: &Mat<T>, b: &[T]) -> LeastSquares<T> {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m, "right-hand side length mismatch");
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let steps = m.min(n);
    let two = T::one() + T::one();

    for k in 0..steps {
        // pivot on the largest remaining column
        let mut best = k;
        let mut best_norm = T::zero();
        for j in k..n {
            let s = (k..m).fold(T::zero(), |acc, i| acc + r.get(i, j) * r.get(i, j));
            if s > best_norm {
                best_norm = s;
                best = j;
            }
        }
        if best != k {
            for i in 0..m {
                let tmp = r.get(i, k);
                r.set(i, k, r.get(i, best));
                r.set(i, best, tmp);
            }
            perm.swap(k, best);
        }

        let norm = best_norm.sqrt();
        if norm == T::zero() {
            continue;
        }
        let x0 = r.get(k, k);
        let alpha = if x0 > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (k..m).map(|i| r.get(i, k)).collect();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().fold(T::zero(), |acc, &x| acc + x * x);
        if vnorm2 == T::zero() {
            continue;
        }
        for j in k..n {
            let proj = (k..m).fold(T::zero(), |acc, i| acc + v[i - k] * r.get(i, j));
            let f = two * proj / vnorm2;
            for i in k..m {
                let val = r.get(i, j) - f * v[i - k];
                r.set(i, j, val);
            }
        }
        let proj = (k..m).fold(T::zero(), |acc, i| acc + v[i - k] * rhs[i]);
        let f = two * proj / vnorm2;
        for i in k..m {
            rhs[i] = rhs[i] - f * v[i - k];
        }
    }

    let lead = if steps > 0 { r.get(0, 0).abs() } else { T::zero() };
    let tol = T::from_f64(100.0 * m.max(n).max(1) as f64) * T::epsilon() * lead;
    let rank = (0..steps)
        .take_while(|&k| r.get(k, k).abs() > tol && r.get(k, k) != T::zero())
        .count();

    let mut z = vec![T::zero(); n];
    for k in (0..rank).rev() {
        let mut acc = rhs[k];
        for j in k + 1..rank {
            acc = acc - r.get(k, j) * z[j];
        }
        z[k] = acc / r.get(k, k);
    }
    let mut solution = vec![T::zero(); n];
    for (k, &p) in perm.iter().enumerate() {
        solution[p] = z[k];
    }

    // with the basic solution the residual lives in the trailing rows of Q^T b,
    // plus whatever the dropped columns would have absorbed
    let residual = if rank < steps {
        let ax: Vec<T> = (0..m)
            .map(|i| (0..n).fold(T::zero(), |acc, j| acc + a.get(i, j) * solution[j]))
            .collect();
        norm2(&ax.iter().zip(b).map(|(&p, &q)| p - q).collect::<Vec<_>>())
    } else {
        norm2(&rhs[rank..])
    };

    LeastSquares {
        solution,
        residual,
        rank,
    }
}

/// Thin left singular system of a matrix: `A = U diag(s) V^T`.
#[derive(Clone, Debug)]
pub struct LeftSvd<T> {
    /// Left singular vectors (each of length `rows`), ordered with `values`.
    pub vectors: Vec<Vec<T>>,
    /// Singular values in descending order (zero values omitted).
    pub values: Vec<T>,
}

/// One-sided Jacobi (Hestenes) SVD, returning the left singular system.
pub fn left_svd<T: Scalar>(a: &Mat<T>) -> LeftSvd<T> {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
    let eps = T::epsilon();
    let one = T::one();
    let two = one + one;

    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (two * gamma);
                let sign = if zeta >= T::zero() { one } else { -one };
                let t = sign / (zeta.abs() + (one + zeta * zeta).sqrt());
                let c = one / (one + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let xp = cols[p][i];
                    let xq = cols[q][i];
                    cols[p][i] = c * xp - s * xq;
                    cols[q][i] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut pairs: Vec<(T, Vec<T>)> = cols
        .into_iter()
        .filter_map(|c| {
            let s = norm2(&c);
            if s == T::zero() {
                None
            } else {
                Some((s, c.into_iter().map(|x| x / s).collect()))
            }
        })
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
    let (values, vectors) = pairs.into_iter().unzip();
    LeftSvd { vectors, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_system_is_solved_exactly() {
        let a = Mat::from_vec(3, 3, vec![2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let x = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| dot(a.row(i), &x)).collect();
        let ls = least_squares(&a, &b);
        assert_eq!(ls.rank, 3);
        for (got, want) in ls.solution.iter().zip(x) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(ls.residual < 1e-12);
    }

    #[test]
    fn overdetermined_residual_matches_direct() {
        // fit a line through three points that are not collinear
        let a = Mat::from_vec(3, 2, vec![1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let b = [0.0, 1.0, 3.0];
        let ls = least_squares(&a, &b);
        let r: Vec<f64> = (0..3).map(|i| dot(a.row(i), &ls.solution) - b[i]).collect();
        assert!((norm2(&r) - ls.residual).abs() < 1e-12);
        // normal equations solution: slope 1.5, intercept -1/6
        assert!((ls.solution[1] - 1.5).abs() < 1e-12);
        assert!((ls.solution[0] + 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_gets_basic_solution() {
        let a = Mat::from_vec(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let b = [1.0, 2.0, 3.0];
        let ls = least_squares(&a, &b);
        assert_eq!(ls.rank, 1);
        assert!(ls.residual < 1e-12);
    }

    #[test]
    fn svd_values_of_diagonal() {
        let a = Mat::from_vec(2, 3, vec![3.0, 0.0, 0.0, 0.0, -5.0, 0.0]);
        let svd = left_svd(&a);
        assert_eq!(svd.values.len(), 2);
        assert!((svd.values[0] - 5.0).abs() < 1e-14);
        assert!((svd.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn svd_reconstructs_gram() {
        let a: Mat<f64> = Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let svd = left_svd(&a);
        let gram = a.matmul(&a.transpose());
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..svd.values.len())
                    .map(|k| svd.values[k].powi(2) * svd.vectors[k][i] * svd.vectors[k][j])
                    .sum();
                assert!((v - gram.get(i, j)).abs() < 1e-12);
            }
        }
    }
}
