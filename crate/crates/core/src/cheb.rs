//! Chebyshev nodes, Lagrange basis tables, the orthonormal DCT on the
//! Chebyshev grid, and least-squares fitting in the Chebyshev basis.
//!
//! Node `i` (1-based) of an `n`-point grid is `cos((2i - 1)π / 2n)`. The same
//! formula places the encoding points (n = k + t), the evaluation points
//! (n = N), and the decoder's locator evaluation points.
//!
//! The DCT used here is the orthonormal type-II transform on that grid:
//!
//! ```text
//! c_m = κ_m Σ_{i=1}^{N} r_i cos(m (2i - 1) π / 2N),   κ_0 = √(1/N), κ_m = √(2/N)
//! ```
//!
//! Because `cos(m θ_i) = T_m(x_i)`, samples of a polynomial of degree `< K`
//! have `c_m = 0` for every `m ≥ K`.

use crate::error::{Error, Result};
use crate::linalg::{least_squares, Mat};
use crate::scalar::Scalar;

/// Default absolute tolerance for "zero" checks on unit-scale data.
pub const ZERO_TOL: f64 = 1e-9;

/// Angle `(2i - 1)π / 2n` of node `i` (1-based).
pub fn node_angle<T: Scalar>(i: usize, n: usize) -> T {
    T::from_usize(2 * i - 1) * T::pi() / T::from_usize(2 * n)
}

/// Chebyshev nodes of the first kind, 1-based.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevGrid<T> {
    nodes: Vec<T>,
}

impl<T: Scalar> ChebyshevGrid<T> {
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidArgument("node count must be at least 1".into()));
        }
        let nodes = (1..=count).map(|i| node_angle::<T>(i, count).cos()).collect();
        Ok(Self { nodes })
    }

    pub fn count(&self) -> usize {
        self.nodes.len()
    }

    /// Node `i`, 1-based.
    pub fn node(&self, i: usize) -> T {
        self.nodes[i - 1]
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }
}

/// `cheb_nodes(count)`: the grid `cos((2i - 1)π / 2count)`, `i = 1..count`.
pub fn cheb_nodes<T: Scalar>(count: usize) -> Result<ChebyshevGrid<T>> {
    ChebyshevGrid::new(count)
}

/// Values `l_j(z)` of all Lagrange basis polynomials on the given nodes.
pub fn lagrange_basis_at<T: Scalar>(enc: &[T], z: T) -> Vec<T> {
    (0..enc.len())
        .map(|j| {
            enc.iter()
                .enumerate()
                .filter(|&(l, _)| l != j)
                .fold(T::one(), |acc, (_, &xl)| acc * (z - xl) / (enc[j] - xl))
        })
        .collect()
}

/// Matrix of `l_j(α_i)` for encoding nodes `ξ_j` and evaluation nodes `α_i`.
#[derive(Clone, Debug)]
pub struct BasisTable<T> {
    values: Mat<T>,
}

impl<T: Scalar> BasisTable<T> {
    pub fn enc_count(&self) -> usize {
        self.values.cols()
    }

    pub fn eval_count(&self) -> usize {
        self.values.rows()
    }

    /// `l_j(α_i)` with 1-based `i` (evaluation index) and `j` (basis index).
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values.get(i - 1, j - 1)
    }

    /// Row of basis values at evaluation node `i` (1-based).
    pub fn row(&self, i: usize) -> &[T] {
        self.values.row(i - 1)
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.values
    }
}

pub fn lagrange_basis_table<T: Scalar>(
    enc: &ChebyshevGrid<T>,
    eval: &ChebyshevGrid<T>,
) -> Result<BasisTable<T>> {
    let xs = enc.nodes();
    for a in 0..xs.len() {
        for b in a + 1..xs.len() {
            if xs[a] == xs[b] {
                return Err(Error::DegenerateGrid(a + 1, b + 1));
            }
        }
    }
    Ok(basis_table_unchecked(xs, eval.nodes()))
}

pub(crate) fn basis_table_unchecked<T: Scalar>(enc: &[T], eval: &[T]) -> BasisTable<T> {
    let mut values = Mat::zeros(eval.len(), enc.len());
    for (i, &z) in eval.iter().enumerate() {
        for (j, v) in lagrange_basis_at(enc, z).into_iter().enumerate() {
            values.set(i, j, v);
        }
    }
    BasisTable { values }
}

/// Polynomial in the Chebyshev basis, `Σ c_j T_j(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebPoly<T> {
    pub coeffs: Vec<T>,
}

impl<T: Scalar> ChebPoly<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        Self { coeffs }
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: T) -> T {
        let two_x = x + x;
        let mut b1 = T::zero();
        let mut b2 = T::zero();
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + two_x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        match self.coeffs.first() {
            Some(&c0) => c0 + x * b1 - b2,
            None => T::zero(),
        }
    }
}

/// `T_0(x), ..., T_{count-1}(x)` by the three-term recurrence.
pub fn chebyshev_row<T: Scalar>(x: T, count: usize) -> Vec<T> {
    let mut row = Vec::with_capacity(count);
    if count > 0 {
        row.push(T::one());
    }
    if count > 1 {
        row.push(x);
    }
    let two_x = x + x;
    for j in 2..count {
        let next = two_x * row[j - 1] - row[j - 2];
        row.push(next);
    }
    row
}

/// Least-squares fit in the Chebyshev basis.
#[derive(Clone, Debug)]
pub struct PolyFit<T> {
    pub poly: ChebPoly<T>,
    /// Euclidean norm of the fit residual over the input points.
    pub residual: T,
}

/// Fits `degree_bound` Chebyshev coefficients (degree `< degree_bound`) to
/// `(node, value)` points. Exact interpolation when the counts match.
pub fn fit_polynomial<T: Scalar>(points: &[(T, T)], degree_bound: usize) -> Result<PolyFit<T>> {
    if degree_bound == 0 {
        return Err(Error::InvalidArgument("degree bound must be at least 1".into()));
    }
    if points.len() < degree_bound {
        return Err(Error::Underdetermined {
            points: points.len(),
            needed: degree_bound,
        });
    }
    let mut design = Mat::zeros(points.len(), degree_bound);
    for (i, &(x, _)) in points.iter().enumerate() {
        for (j, v) in chebyshev_row(x, degree_bound).into_iter().enumerate() {
            design.set(i, j, v);
        }
    }
    let rhs: Vec<T> = points.iter().map(|&(_, y)| y).collect();
    let ls = least_squares(&design, &rhs);
    if ls.rank < degree_bound {
        return Err(Error::Numerical(format!(
            "Chebyshev design matrix has rank {} < {degree_bound}; nodes must be distinct",
            ls.rank
        )));
    }
    Ok(PolyFit {
        poly: ChebPoly::new(ls.solution),
        residual: ls.residual,
    })
}

/// Direct O(N²) orthonormal DCT-II on an `n`-point Chebyshev grid.
///
/// Holds the `4n` distinct cosines `cos(jπ / 2n)`; `cos(m (2i - 1) π / 2n)`
/// is read from the table at `m (2i - 1) mod 4n`.
#[derive(Clone, Debug)]
pub struct DctPlan<T> {
    n: usize,
    table: Vec<T>,
    kappa0: T,
    kappa: T,
}

impl<T: Scalar> DctPlan<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("DCT length must be at least 1".into()));
        }
        let step = T::pi() / T::from_usize(2 * n);
        let table = (0..4 * n).map(|j| (T::from_usize(j) * step).cos()).collect();
        let nn = T::from_usize(n);
        Ok(Self {
            n,
            table,
            kappa0: (T::one() / nn).sqrt(),
            kappa: (T::from_f64(2.0) / nn).sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    fn cos_at(&self, m: usize, i: usize) -> T {
        self.table[(m * (2 * i - 1)) % (4 * self.n)]
    }

    fn kappa(&self, m: usize) -> T {
        if m == 0 {
            self.kappa0
        } else {
            self.kappa
        }
    }

    /// Coefficients `c_m` for `m` in `range` (indices must be `< n`).
    pub fn forward_range(&self, samples: &[T], range: std::ops::Range<usize>) -> Vec<T> {
        assert_eq!(samples.len(), self.n, "DCT input length mismatch");
        range
            .map(|m| {
                let s = samples
                    .iter()
                    .enumerate()
                    .fold(T::zero(), |acc, (i, &r)| acc + r * self.cos_at(m, i + 1));
                self.kappa(m) * s
            })
            .collect()
    }

    pub fn forward(&self, samples: &[T]) -> Vec<T> {
        self.forward_range(samples, 0..self.n)
    }

    pub fn inverse(&self, coeffs: &[T]) -> Vec<T> {
        assert_eq!(coeffs.len(), self.n, "DCT input length mismatch");
        (1..=self.n)
            .map(|i| {
                coeffs
                    .iter()
                    .enumerate()
                    .fold(T::zero(), |acc, (m, &c)| acc + self.kappa(m) * c * self.cos_at(m, i))
            })
            .collect()
    }
}

pub fn dct_forward<T: Scalar>(samples: &[T]) -> Result<Vec<T>> {
    Ok(DctPlan::new(samples.len())?.forward(samples))
}

pub fn dct_inverse<T: Scalar>(coeffs: &[T]) -> Result<Vec<T>> {
    Ok(DctPlan::new(coeffs.len())?.inverse(coeffs))
}

/// Received scalar codeword: values at a subset of the `block_len`
/// evaluation positions (all of them when there are no stragglers).
#[derive(Clone, Debug, PartialEq)]
pub struct RealVectorCodeword<T> {
    block_len: usize,
    /// 1-based evaluation indices, ascending.
    positions: Vec<usize>,
    samples: Vec<T>,
}

impl<T: Scalar> RealVectorCodeword<T> {
    /// Complete codeword, one sample per evaluation node.
    pub fn full(samples: Vec<T>) -> Self {
        Self {
            block_len: samples.len(),
            positions: (1..=samples.len()).collect(),
            samples,
        }
    }

    /// Codeword observed only at `positions` (1-based, ascending, distinct).
    pub fn partial(block_len: usize, positions: Vec<usize>, samples: Vec<T>) -> Result<Self> {
        if positions.len() != samples.len() {
            return Err(Error::SizeMismatch {
                expected: positions.len(),
                got: samples.len(),
            });
        }
        let ordered = positions.windows(2).all(|w| w[0] < w[1]);
        if !ordered || positions.first() == Some(&0) || positions.last().is_some_and(|&p| p > block_len) {
            return Err(Error::InvalidArgument(format!(
                "codeword positions must be ascending indices in [1, {block_len}]"
            )));
        }
        Ok(Self {
            block_len,
            positions,
            samples,
        })
    }

    /// Samples `poly` at all `n` Chebyshev nodes.
    pub fn from_poly(poly: &ChebPoly<T>, n: usize) -> Result<Self> {
        let grid = ChebyshevGrid::<T>::new(n)?;
        Ok(Self::full(grid.nodes().iter().map(|&x| poly.eval(x)).collect()))
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [T] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    /// Number of observed positions.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.samples.len() == self.block_len
    }

    /// Largest absolute sample.
    pub fn scale(&self) -> T {
        self.samples
            .iter()
            .fold(T::zero(), |acc, &x| acc.max_of(x.abs()))
    }

    /// `(node, value)` pairs, skipping the listed 1-based positions.
    pub fn points_excluding(&self, grid: &ChebyshevGrid<T>, skip: &[usize]) -> Vec<(T, T)> {
        self.positions
            .iter()
            .zip(&self.samples)
            .filter(|(p, _)| !skip.contains(p))
            .map(|(&p, &v)| (grid.node(p), v))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Wide;

    #[test]
    fn small_grids() {
        assert!(cheb_nodes::<f64>(0).is_err());
        let g = cheb_nodes::<f64>(1).unwrap();
        assert!(g.node(1).abs() < 1e-15);
        let g = cheb_nodes::<f64>(2).unwrap();
        assert!((g.node(1) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((g.node(2) + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn grid_matches_extended_precision_cosine() {
        let g = cheb_nodes::<f64>(21).unwrap();
        for i in 1..=21 {
            let angle = Wide::from_f64((2 * i - 1) as f64) * Wide::pi() / Wide::from_f64(42.0);
            let want = Wide::cos(&angle).to_f64();
            assert!((g.node(i) - want).abs() <= 2.0 * f64::EPSILON, "node {i}");
        }
    }

    #[test]
    fn grid_is_symmetric_and_decreasing() {
        for n in 1..30 {
            let g = cheb_nodes::<f64>(n).unwrap();
            for i in 1..=n {
                assert!(g.node(i).abs() < 1.0);
                assert!((g.node(i) + g.node(n + 1 - i)).abs() < 1e-15);
                if i > 1 {
                    assert!(g.node(i) < g.node(i - 1));
                }
            }
            if n % 2 == 1 {
                assert!(g.node(n / 2 + 1).abs() < ZERO_TOL);
            }
        }
    }

    #[test]
    fn basis_on_own_nodes_is_identity() {
        let g = cheb_nodes::<f64>(6).unwrap();
        let b = lagrange_basis_table(&g, &g).unwrap();
        for i in 1..=6 {
            for j in 1..=6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((b.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duplicate_encoding_nodes_are_rejected() {
        let g = ChebyshevGrid { nodes: vec![0.5, 0.1, 0.5] };
        let e = cheb_nodes::<f64>(4).unwrap();
        assert!(matches!(lagrange_basis_table(&g, &e), Err(Error::DegenerateGrid(1, 3))));
    }

    #[test]
    fn clenshaw_matches_recurrence() {
        let p = ChebPoly::new(vec![0.5, -1.0, 0.25, 2.0]);
        for x in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            let want: f64 = chebyshev_row(x, 4).iter().zip(&p.coeffs).map(|(t, c)| t * c).sum();
            assert!((p.eval(x) - want).abs() < 1e-14);
        }
        assert_eq!(ChebPoly::<f64>::new(vec![]).eval(0.3), 0.0);
    }

    #[test]
    fn dct_of_constant_and_t2() {
        let c = dct_forward(&[3.0f64; 8]).unwrap();
        assert!((c[0] - 3.0 * 8f64.sqrt()).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));

        let g = cheb_nodes::<f64>(8).unwrap();
        let samples: Vec<f64> = g.nodes().iter().map(|x| 2.0 * x * x - 1.0).collect();
        let c = dct_forward(&samples).unwrap();
        for (m, v) in c.iter().enumerate() {
            if m == 2 {
                assert!((v - 2.0).abs() < 1e-12, "c_2 = {v}");
            } else {
                assert!(v.abs() < 1e-12, "c_{m} = {v}");
            }
        }
    }

    #[test]
    fn dct_inverse_basics() {
        assert!(dct_inverse::<f64>(&[]).is_err());
        assert!(dct_forward::<f64>(&[]).is_err());
        let z = dct_inverse(&[0.0f64; 5]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        let mut e0 = vec![0.0f64; 5];
        e0[0] = 1.0;
        let v = dct_inverse(&e0).unwrap();
        assert!(v.iter().all(|&x| (x - v[0]).abs() < 1e-15));
    }

    #[test]
    fn fit_needs_enough_points() {
        let pts = [(0.1, 1.0), (0.2, 2.0)];
        assert!(matches!(
            fit_polynomial(&pts, 3),
            Err(Error::Underdetermined { points: 2, needed: 3 })
        ));
        assert!(fit_polynomial(&pts, 0).is_err());
    }

    #[test]
    fn square_fit_interpolates() {
        let g = cheb_nodes::<f64>(5).unwrap();
        let p = ChebPoly::new(vec![1.0, -2.0, 0.5, 0.25, 3.0]);
        let pts: Vec<(f64, f64)> = g.nodes().iter().map(|&x| (x, p.eval(x))).collect();
        let fit = fit_polynomial(&pts, 5).unwrap();
        assert!(fit.residual < 1e-12);
        for (a, b) in fit.poly.coeffs.iter().zip(&p.coeffs) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
