//! Lagrange encoding of a dataset into noisy shares and reconstruction of
//! `f(X_r)` from per-entry codewords.
//!
//! The encoding polynomial interpolates the `k` data matrices at the first
//! `k` encoding nodes and `t` Gaussian noise matrices at the remaining `t`:
//!
//! ```text
//! g(z) = Σ_{r=1}^{k} X_r l_r(z) + Σ_{j=1}^{t} N_j l_{k+j}(z)
//! ```
//!
//! Share `i` is `g(α_i)`. Any polynomial `f` of degree `D_f` applied entrywise
//! in `z` gives `f(g(z))` of degree `(k + t - 1) D_f`, so `K = (k+t-1) D_f + 1`
//! evaluations determine it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cheb::{basis_table_unchecked, fit_polynomial, BasisTable, ChebyshevGrid, RealVectorCodeword};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// RNG stream reserved for the encoder's noise matrices.
pub const ENCODER_STREAM: u64 = 0;

/// `k` real `m × n` matrices bounded entrywise by `y`.
#[derive(Clone, Debug)]
pub struct Dataset {
    matrices: Vec<Mat<f64>>,
    y: f64,
}

impl Dataset {
    pub fn new(matrices: Vec<Mat<f64>>, y: f64) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidArgument("dataset needs at least one matrix".into()))?;
        let shape = first.shape();
        if let Some(bad) = matrices.iter().find(|m| m.shape() != shape) {
            return Err(Error::InvalidArgument(format!(
                "matrix of shape {:?} in a dataset of {:?} matrices",
                bad.shape(),
                shape
            )));
        }
        if !(y > 0.0) {
            return Err(Error::InvalidArgument(format!("bound y must be positive, got {y}")));
        }
        let largest = matrices.iter().map(|m| m.max_abs()).fold(0.0, f64::max);
        if largest > y {
            return Err(Error::InvalidArgument(format!(
                "entry of magnitude {largest:e} exceeds the bound y = {y:e}"
            )));
        }
        Ok(Self { matrices, y })
    }

    /// Entries drawn uniformly from `[-y, y]`.
    pub fn random(k: usize, m: usize, n: usize, y: f64, seed: u64) -> Result<Self> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let matrices = (0..k)
            .map(|_| Mat::from_fn(m, n, |_, _| rng.random_range(-y..=y)))
            .collect();
        Self::new(matrices, y)
    }

    pub fn k(&self) -> usize {
        self.matrices.len()
    }

    /// `(m, n)`.
    pub fn shape(&self) -> (usize, usize) {
        self.matrices[0].shape()
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn matrices(&self) -> &[Mat<f64>] {
        &self.matrices
    }

    /// Parses the text format: a header `k m n y`, then `k` blocks of `m`
    /// rows with `n` whitespace-separated entries each.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("dataset ends before {what}")))
        };
        let int = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("{what} must be a non-negative integer, got `{s}`")))
        };
        let k = int(next("k")?, "k")?;
        let m = int(next("m")?, "m")?;
        let n = int(next("n")?, "n")?;
        let y_tok = next("y")?;
        let y: f64 = y_tok
            .parse()
            .map_err(|_| Error::Parse(format!("y must be a number, got `{y_tok}`")))?;
        let mut matrices = Vec::with_capacity(k);
        for b in 0..k {
            let mut data = Vec::with_capacity(m * n);
            for e in 0..m * n {
                let tok = next(&format!("entry {} of block {}", e + 1, b + 1))?;
                data.push(
                    tok.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("not a number: `{tok}`")))?,
                );
            }
            matrices.push(Mat::from_vec(m, n, data));
        }
        if let Ok(extra) = next("") {
            return Err(Error::Parse(format!("trailing token `{extra}` after {k} blocks")));
        }
        Self::new(matrices, y)
    }

    pub fn to_text(&self) -> String {
        let (m, n) = self.shape();
        let mut out = format!("{} {m} {n} {:e}\n", self.k(), self.y);
        for (b, mat) in self.matrices.iter().enumerate() {
            if b > 0 {
                out.push('\n');
            }
            for r in 0..m {
                let row: Vec<String> = mat.row(r).iter().map(|v| format!("{v:e}")).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Encoder parameters: `k` data matrices, `t` noise matrices of entrywise
/// standard deviation `σ_n / √t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EncodingSpec {
    pub k: usize,
    pub t: usize,
    pub sigma_n: f64,
    pub seed: u64,
}

impl EncodingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("system.k", "k must be at least 1"));
        }
        if !(self.sigma_n >= 0.0) || !self.sigma_n.is_finite() {
            return Err(Error::config("privacy.sigma_n", "must be a finite non-negative number"));
        }
        if self.t == 0 && self.sigma_n > 0.0 {
            return Err(Error::config(
                "system.t",
                "privacy noise requested (sigma_n > 0) but t = 0 noise matrices",
            ));
        }
        Ok(())
    }

    /// Per-entry noise standard deviation.
    pub fn noise_std(&self) -> f64 {
        if self.t == 0 {
            0.0
        } else {
            self.sigma_n / (self.t as f64).sqrt()
        }
    }
}

/// Encoded shares together with the grids and (for oracles) the noise used.
#[derive(Clone, Debug)]
pub struct SharesBundle<T> {
    pub shares: Vec<Mat<T>>,
    pub noise_matrices: Vec<Mat<T>>,
    pub enc_grid: ChebyshevGrid<T>,
    pub eval_grid: ChebyshevGrid<T>,
    pub k: usize,
    pub t: usize,
}

impl<T: Scalar> SharesBundle<T> {
    pub fn n(&self) -> usize {
        self.shares.len()
    }

    /// Share of evaluation index `i` (1-based).
    pub fn share(&self, i: usize) -> &Mat<T> {
        &self.shares[i - 1]
    }
}

pub fn encode<T: Scalar>(dataset: &Dataset, spec: &EncodingSpec, n: usize) -> Result<SharesBundle<T>> {
    Encoder::new(spec.k, spec.t, n)?.encode(dataset, spec)
}

/// Grids and basis table for repeated encodings with fixed `(k, t, N)`.
#[derive(Clone, Debug)]
pub struct Encoder<T> {
    k: usize,
    t: usize,
    enc_grid: ChebyshevGrid<T>,
    eval_grid: ChebyshevGrid<T>,
    basis: BasisTable<T>,
}

impl<T: Scalar> Encoder<T> {
    pub fn new(k: usize, t: usize, n: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("system.k", "k must be at least 1"));
        }
        if n < k + t {
            return Err(Error::InsufficientWorkers { n, needed: k + t });
        }
        let enc_grid = ChebyshevGrid::<T>::new(k + t)?;
        let eval_grid = ChebyshevGrid::<T>::new(n)?;
        let basis = basis_table_unchecked(enc_grid.nodes(), eval_grid.nodes());
        Ok(Self {
            k,
            t,
            enc_grid,
            eval_grid,
            basis,
        })
    }

    pub fn enc_grid(&self) -> &ChebyshevGrid<T> {
        &self.enc_grid
    }

    pub fn eval_grid(&self) -> &ChebyshevGrid<T> {
        &self.eval_grid
    }

    pub fn basis(&self) -> &BasisTable<T> {
        &self.basis
    }

    pub fn encode(&self, dataset: &Dataset, spec: &EncodingSpec) -> Result<SharesBundle<T>> {
        spec.validate()?;
        if spec.k != self.k || spec.t != self.t {
            return Err(Error::InvalidArgument(format!(
                "encoder built for k = {}, t = {} but spec has k = {}, t = {}",
                self.k, self.t, spec.k, spec.t
            )));
        }
        if dataset.k() != spec.k {
            return Err(Error::SizeMismatch {
                expected: spec.k,
                got: dataset.k(),
            });
        }
        let (rows, cols) = dataset.shape();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(ENCODER_STREAM);
        let std = spec.noise_std();
        let noise_matrices: Vec<Mat<T>> = if spec.t == 0 {
            Vec::new()
        } else if std == 0.0 {
            (0..spec.t).map(|_| Mat::zeros(rows, cols)).collect()
        } else {
            let normal = Normal::new(0.0, std).map_err(|e| Error::config("privacy.sigma_n", e.to_string()))?;
            (0..spec.t)
                .map(|_| Mat::from_fn(rows, cols, |_, _| T::from_f64(normal.sample(&mut rng))))
                .collect()
        };

        let sources: Vec<Mat<T>> = dataset
            .matrices()
            .iter()
            .map(|m| m.map(T::from_f64))
            .chain(noise_matrices.iter().cloned())
            .collect();
        let shares = (1..=self.eval_grid.count())
            .map(|i| combine(&sources, self.basis.row(i)))
            .collect();

        Ok(SharesBundle {
            shares,
            noise_matrices,
            enc_grid: self.enc_grid.clone(),
            eval_grid: self.eval_grid.clone(),
            k: spec.k,
            t: spec.t,
        })
    }
}

/// `Σ_j weights[j] · sources[j]`.
fn combine<T: Scalar>(sources: &[Mat<T>], weights: &[T]) -> Mat<T> {
    let (rows, cols) = sources[0].shape();
    let mut acc = Mat::zeros(rows, cols);
    for (src, &w) in sources.iter().zip(weights) {
        acc = acc.add(&src.scale(w));
    }
    acc
}

/// `K = (k + t - 1) D_f + 1`.
pub fn recovery_threshold(k: usize, t: usize, d_f: usize) -> usize {
    (k + t - 1) * d_f + 1
}

/// Recovery parameters derived from the system size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecoverySpec {
    pub d_f: usize,
    /// Recovery threshold `K`.
    pub threshold: usize,
    pub n: usize,
    /// Straggler tolerance `N - K`.
    pub s_max: usize,
}

impl RecoverySpec {
    pub fn new(k: usize, t: usize, d_f: usize, n: usize) -> Result<Self> {
        if k == 0 || d_f == 0 {
            return Err(Error::config("system", "k and D_f must be at least 1"));
        }
        let threshold = recovery_threshold(k, t, d_f);
        if threshold > n {
            return Err(Error::config(
                "system.N",
                format!("recovery threshold K = {threshold} exceeds N = {n}"),
            ));
        }
        Ok(Self {
            d_f,
            threshold,
            n,
            s_max: n - threshold,
        })
    }
}

/// Polynomial map applied by the workers to their shares.
pub trait PolyFunction: Send + Sync {
    /// Total degree `D_f`.
    fn degree(&self) -> usize;
    /// Output shape for an `m × n` input.
    fn output_shape(&self, m: usize, n: usize) -> Result<(usize, usize)>;
    fn apply<T: Scalar>(&self, x: &Mat<T>) -> Mat<T>;
}

/// Polynomial maps shipped with the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuiltinFn {
    Identity,
    /// `X ∘ X ∘ ... ∘ X` (`d` factors).
    EntrywisePower(u32),
    /// `Xᵀ X` for square `X`.
    Gram,
}

impl PolyFunction for BuiltinFn {
    fn degree(&self) -> usize {
        match self {
            BuiltinFn::Identity => 1,
            BuiltinFn::EntrywisePower(d) => *d as usize,
            BuiltinFn::Gram => 2,
        }
    }

    fn output_shape(&self, m: usize, n: usize) -> Result<(usize, usize)> {
        match self {
            BuiltinFn::Gram if m != n => Err(Error::InvalidArgument(format!(
                "Gram map needs square inputs, got {m}x{n}"
            ))),
            BuiltinFn::Gram => Ok((n, n)),
            BuiltinFn::EntrywisePower(0) => {
                Err(Error::InvalidArgument("entrywise power must be at least 1".into()))
            }
            _ => Ok((m, n)),
        }
    }

    fn apply<T: Scalar>(&self, x: &Mat<T>) -> Mat<T> {
        match *self {
            BuiltinFn::Identity => x.clone(),
            BuiltinFn::EntrywisePower(d) => x.map(|v| (1..d).fold(v, |acc, _| acc * v)),
            BuiltinFn::Gram => x.transpose().matmul(x),
        }
    }
}

impl std::str::FromStr for BuiltinFn {
    type Err = Error;

    /// `identity`, `square`, `cube`, `power:<d>` or `gram`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(BuiltinFn::Identity),
            "square" => Ok(BuiltinFn::EntrywisePower(2)),
            "cube" => Ok(BuiltinFn::EntrywisePower(3)),
            "gram" => Ok(BuiltinFn::Gram),
            other => other
                .strip_prefix("power:")
                .and_then(|d| d.parse::<u32>().ok())
                .filter(|&d| d >= 1)
                .map(BuiltinFn::EntrywisePower)
                .ok_or_else(|| Error::Parse(format!("unknown function `{other}`"))),
        }
    }
}

impl std::fmt::Display for BuiltinFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BuiltinFn::Identity => f.write_str("identity"),
            BuiltinFn::EntrywisePower(2) => f.write_str("square"),
            BuiltinFn::EntrywisePower(3) => f.write_str("cube"),
            BuiltinFn::EntrywisePower(d) => write!(f, "power:{d}"),
            BuiltinFn::Gram => f.write_str("gram"),
        }
    }
}

/// Fits each entry's codeword with `K` Chebyshev coefficients and evaluates
/// it at `ξ_1..ξ_k`. Codewords are in row-major entry order of a `u × h`
/// output.
pub fn reconstruct_outputs<T: Scalar>(
    codewords: &[RealVectorCodeword<T>],
    threshold: usize,
    enc_grid: &ChebyshevGrid<T>,
    k: usize,
    out_shape: (usize, usize),
) -> Result<Vec<Mat<T>>> {
    let n = codewords.first().map_or(1, |c| c.block_len());
    reconstruct_on(codewords, threshold, &ChebyshevGrid::new(n)?, enc_grid, k, out_shape)
}

/// [`reconstruct_outputs`] with a precomputed evaluation grid.
pub fn reconstruct_on<T: Scalar>(
    codewords: &[RealVectorCodeword<T>],
    threshold: usize,
    eval_grid: &ChebyshevGrid<T>,
    enc_grid: &ChebyshevGrid<T>,
    k: usize,
    out_shape: (usize, usize),
) -> Result<Vec<Mat<T>>> {
    let (u, h) = out_shape;
    if codewords.len() != u * h {
        return Err(Error::SizeMismatch {
            expected: u * h,
            got: codewords.len(),
        });
    }
    if k > enc_grid.count() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} encoding nodes",
            enc_grid.count()
        )));
    }
    let mut outputs = vec![Mat::zeros(u, h); k];
    for (entry, cw) in codewords.iter().enumerate() {
        if cw.len() < threshold {
            return Err(Error::Unrecoverable(format!(
                "entry {} has {} clean positions but K = {threshold}",
                entry + 1,
                cw.len()
            )));
        }
        if cw.block_len() != eval_grid.count() {
            return Err(Error::SizeMismatch {
                expected: eval_grid.count(),
                got: cw.block_len(),
            });
        }
        let fit = fit_polynomial(&cw.points_excluding(eval_grid, &[]), threshold)?;
        for (r, out) in outputs.iter_mut().enumerate() {
            out.set(entry / h, entry % h, fit.poly.eval(enc_grid.node(r + 1)));
        }
    }
    Ok(outputs)
}

/// `f(X_r)` on the plaintext data, for comparison with reconstructions.
pub fn direct_outputs<T: Scalar>(dataset: &Dataset, f: &impl PolyFunction) -> Vec<Mat<T>> {
    dataset
        .matrices()
        .iter()
        .map(|m| f.apply(&m.map(T::from_f64)))
        .collect()
}

/// `max |a - b| / max |b|` over all matrices (absolute when `b` is zero).
pub fn relative_error<T: Scalar>(got: &[Mat<T>], want: &[Mat<T>]) -> f64 {
    let mut diff = T::zero();
    let mut scale = T::zero();
    for (g, w) in got.iter().zip(want) {
        diff = diff.max_of(g.sub(w).max_abs());
        scale = scale.max_of(w.max_abs());
    }
    if scale == T::zero() {
        diff.to_f64()
    } else {
        (diff / scale).to_f64()
    }
}

/// Basis table for the bundle's grids.
pub fn bundle_basis<T: Scalar>(bundle: &SharesBundle<T>) -> BasisTable<T> {
    basis_table_unchecked(bundle.enc_grid.nodes(), bundle.eval_grid.nodes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb::dct_forward;
    use crate::scalar::Wide;

    fn spec(k: usize, t: usize, sigma_n: f64) -> EncodingSpec {
        EncodingSpec { k, t, sigma_n, seed: 7 }
    }

    #[test]
    fn thresholds() {
        assert_eq!(recovery_threshold(3, 3, 2), 11);
        assert_eq!(recovery_threshold(1, 0, 1), 1);
        assert_eq!(recovery_threshold(2, 1, 3), 7);
        assert!(RecoverySpec::new(3, 3, 2, 10).is_err());
        assert_eq!(RecoverySpec::new(3, 3, 2, 21).unwrap().s_max, 10);
    }

    #[test]
    fn single_matrix_without_noise_is_replicated() {
        let ds = Dataset::random(1, 2, 3, 5.0, 1).unwrap();
        let b = encode::<f64>(&ds, &spec(1, 0, 0.0), 6).unwrap();
        for i in 1..=6 {
            assert!(b.share(i).sub(&ds.matrices()[0]).max_abs() < 1e-12);
        }
    }

    #[test]
    fn equal_matrices_give_equal_shares() {
        let m = Dataset::random(1, 2, 2, 1.0, 3).unwrap().matrices()[0].clone();
        let ds = Dataset::new(vec![m.clone(), m.clone()], 1.0).unwrap();
        let b = encode::<f64>(&ds, &spec(2, 0, 0.0), 5).unwrap();
        for s in &b.shares {
            assert!(s.sub(&m).max_abs() < 1e-12);
        }
    }

    #[test]
    fn encoder_errors() {
        let ds = Dataset::random(3, 1, 1, 1.0, 1).unwrap();
        assert!(matches!(
            encode::<f64>(&ds, &spec(3, 3, 1.0), 5),
            Err(Error::InsufficientWorkers { n: 5, needed: 6 })
        ));
        assert!(matches!(encode::<f64>(&ds, &spec(3, 0, 1.0), 5), Err(Error::Config { .. })));
    }

    #[test]
    fn encoding_is_deterministic() {
        let ds = Dataset::random(2, 2, 2, 1.0, 4).unwrap();
        let a = encode::<f64>(&ds, &spec(2, 2, 3.0), 9).unwrap();
        let b = encode::<f64>(&ds, &spec(2, 2, 3.0), 9).unwrap();
        for (x, y) in a.shares.iter().zip(&b.shares) {
            assert_eq!(x.as_slice(), y.as_slice());
        }
    }

    #[test]
    fn privacy_scale_shares_interpolate_data_and_noise() {
        let ds = Dataset::random(3, 2, 2, 1e10, 11).unwrap();
        let b = encode::<Wide>(&ds, &spec(3, 3, 1e23), 21).unwrap();
        for entry in 0..4 {
            let (r, c) = (entry / 2, entry % 2);
            let samples: Vec<Wide> = b.shares.iter().map(|s| s.get(r, c)).collect();
            let pts: Vec<(Wide, Wide)> = b.eval_grid.nodes().iter().copied().zip(samples.iter().copied()).collect();
            let fit = fit_polynomial(&pts, 6).unwrap();
            for j in 0..3 {
                let got = fit.poly.eval(b.enc_grid.node(j + 1));
                let want = Wide::from_f64(ds.matrices()[j].get(r, c));
                assert!(((got - want).abs() / Wide::from_f64(1e10)).to_f64() < 1e-12);
            }
            for j in 0..3 {
                let got = fit.poly.eval(b.enc_grid.node(4 + j));
                let want = b.noise_matrices[j].get(r, c);
                assert!(((got - want).abs() / want.abs()).to_f64() < 1e-20);
            }
            let tail = dct_forward(&samples).unwrap();
            let scale = samples.iter().fold(Wide::from_f64(0.0), |a, &x| a.max_of(x.abs()));
            for c in &tail[6..] {
                assert!((c.abs() / scale).to_f64() < 1e-30);
            }
        }
    }

    #[test]
    fn dataset_text_round_trip() {
        let ds = Dataset::random(2, 2, 3, 1e10, 5).unwrap();
        let back = Dataset::parse(&ds.to_text()).unwrap();
        assert_eq!(back.k(), 2);
        assert_eq!(back.shape(), (2, 3));
        for (a, b) in ds.matrices().iter().zip(back.matrices()) {
            assert_eq!(a.as_slice(), b.as_slice());
        }
        assert!(Dataset::parse("1 1 2 1.0\n0.5").is_err());
        assert!(Dataset::parse("1 1 1 1.0\n2.0").is_err());
        assert!(Dataset::parse("1 1 1 1.0\n0.5 0.5").is_err());
    }

    #[test]
    fn builtin_functions() {
        let x: Mat<f64> = Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(BuiltinFn::EntrywisePower(2).apply(&x).as_slice(), &[1.0, 4.0, 9.0, 16.0]);
        assert_eq!(BuiltinFn::Gram.apply(&x).as_slice(), &[10.0, 14.0, 14.0, 20.0]);
        assert!(BuiltinFn::Gram.output_shape(2, 3).is_err());
        for s in ["identity", "square", "cube", "power:5", "gram"] {
            assert_eq!(s.parse::<BuiltinFn>().unwrap().to_string(), s);
        }
        assert!("power:0".parse::<BuiltinFn>().is_err());
    }
}
