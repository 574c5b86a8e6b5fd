//! Byzantine error detection, localization and correction for scalar
//! codewords of the Chebyshev/DCT code.
//!
//! A clean codeword samples a polynomial of degree `< K` at the `N` nodes, so
//! its DCT coefficients `c_K..c_{N-1}` vanish; those coefficients of the
//! received word are the syndromes. Writing `u_m = Σ_p e_p cos(m θ_p)` for the
//! error vector `e`, every locator `Λ(x) = Σ_j λ_j T_j(x)` vanishing at the
//! error nodes satisfies
//!
//! ```text
//! Σ_j λ_j (u_{m+j} + u_{m-j}) / 2 = Σ_p e_p Λ(x_p) T_m(x_p) = 0.
//! ```
//!
//! On the Chebyshev grid `cos(N θ_p) = 0` and `cos((2N - m) θ_p) = -cos(m θ_p)`,
//! so the syndromes extend to `u_N = 0` and `u_{2N-m} = -u_m`. That makes the
//! equations for `m = K + A, ..., N - 1` usable: `N - K - A` equations in `A`
//! unknowns, solvable for every `A ≤ ⌊(N - K)/2⌋`. The solution is unique in
//! that range: `e ∘ Λ(x)` would otherwise be a nonzero word of weight `≤ A`
//! in a code of minimum distance `N - K - A + 1`.

use crate::cheb::{fit_polynomial, ChebPoly, ChebyshevGrid, DctPlan, RealVectorCodeword};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, norm2, Mat};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use crate::subsets::{binomial, for_each_combination, IndexSet};

/// Default cap on the number of subsets tried by [`brute_force_localize`].
pub const BRUTE_FORCE_CAP: u128 = 1_000_000;

/// Largest error count the decoder can locate, `⌊(len - K) / 2⌋`.
pub fn decoding_radius(len: usize, threshold: usize) -> usize {
    len.saturating_sub(threshold) / 2
}

/// DCT coefficients `S_K..S_{N-1}` of a received word.
#[derive(Clone, Debug, PartialEq)]
pub struct SyndromeVector<T> {
    n: usize,
    threshold: usize,
    values: Vec<T>,
    /// Largest absolute sample of the word the syndromes came from.
    scale: T,
}

impl<T: Scalar> SyndromeVector<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `S_m` for `K ≤ m < N`.
    pub fn get(&self, m: usize) -> T {
        self.values[m - self.threshold]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn norm(&self) -> T {
        norm2(&self.values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Syndrome sequence extended to `K ≤ m ≤ 2N - K` by `S_N = 0` and
    /// `S_{2N-m} = -S_m`.
    fn extended(&self, m: usize) -> T {
        let n = self.n;
        match m.cmp(&n) {
            std::cmp::Ordering::Less => self.get(m),
            std::cmp::Ordering::Equal => T::zero(),
            std::cmp::Ordering::Greater => -self.get(2 * n - m),
        }
    }
}

/// Syndromes of a complete codeword.
pub fn syndromes<T: Scalar>(codeword: &RealVectorCodeword<T>, threshold: usize) -> Result<SyndromeVector<T>> {
    let plan = DctPlan::new(codeword.block_len().max(1))?;
    syndromes_with(&plan, codeword, threshold)
}

/// [`syndromes`] with a reusable DCT plan.
pub fn syndromes_with<T: Scalar>(
    plan: &DctPlan<T>,
    codeword: &RealVectorCodeword<T>,
    threshold: usize,
) -> Result<SyndromeVector<T>> {
    if codeword.len() < threshold {
        return Err(Error::InsufficientData {
            len: codeword.len(),
            needed: threshold,
        });
    }
    if !codeword.is_complete() {
        return Err(Error::Unsupported(
            "syndrome decoding needs every position (no stragglers)".into(),
        ));
    }
    let n = codeword.block_len();
    if plan.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: plan.len(),
        });
    }
    Ok(SyndromeVector {
        n,
        threshold,
        values: plan.forward_range(codeword.samples(), threshold..n),
        scale: codeword.scale(),
    })
}

/// Locator `Λ̄(x) = Σ_j λ_j T_j(x)` with `λ_A = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorLocator<T> {
    pub coeffs: Vec<T>,
    /// Norm of the key-equation least-squares residual.
    pub residual: T,
}

impl<T: Scalar> ErrorLocator<T> {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: T) -> T {
        ChebPoly::new(self.coeffs.clone()).eval(x)
    }

    pub fn coeff_norm(&self) -> T {
        norm2(&self.coeffs)
    }
}

/// Rows `(design, rhs)` of the folded key equation for `A` errors.
fn key_equation_rows<T: Scalar>(s: &SyndromeVector<T>, a: usize, design: &mut Vec<T>, rhs: &mut Vec<T>) {
    let half = T::from_f64(0.5);
    for m in s.threshold() + a..s.n() {
        for j in 0..a {
            design.push(half * (s.extended(m + j) + s.extended(m - j)));
        }
        rhs.push(-half * (s.extended(m + a) + s.extended(m - a)));
    }
}

fn check_syndromes<T: Scalar>(s: &SyndromeVector<T>, n: usize, threshold: usize) -> Result<()> {
    if s.n() != n || s.threshold() != threshold {
        return Err(Error::SizeMismatch {
            expected: n - threshold,
            got: s.len(),
        });
    }
    Ok(())
}

/// Least-squares solution of the folded key equation for `A` errors.
pub fn solve_locator<T: Scalar>(s: &SyndromeVector<T>, a: usize, n: usize, threshold: usize) -> Result<ErrorLocator<T>> {
    solve_joint_locator(std::slice::from_ref(s), a, n, threshold)
}

/// One locator for several words with the same error positions: the key
/// equations of all words are stacked into a single least-squares problem.
pub fn solve_joint_locator<T: Scalar>(
    words: &[SyndromeVector<T>],
    a: usize,
    n: usize,
    threshold: usize,
) -> Result<ErrorLocator<T>> {
    for s in words {
        check_syndromes(s, n, threshold)?;
    }
    let radius = decoding_radius(n, threshold);
    if a > radius {
        return Err(Error::RadiusExceeded { a, radius });
    }
    if a == 0 {
        return Ok(ErrorLocator {
            coeffs: vec![T::one()],
            residual: norm2(&words.iter().map(SyndromeVector::norm).collect::<Vec<_>>()),
        });
    }
    let mut design = Vec::new();
    let mut rhs = Vec::new();
    for s in words {
        key_equation_rows(s, a, &mut design, &mut rhs);
    }
    let ls = least_squares(&Mat::from_vec(rhs.len(), a, design), &rhs);
    let mut coeffs = ls.solution;
    coeffs.push(T::one());
    Ok(ErrorLocator {
        coeffs,
        residual: ls.residual,
    })
}

/// Thresholds of the error-count test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountThreshold {
    /// Relative part, multiplied by `‖S‖`.
    pub rel_tol: f64,
    /// Precision-noise standard deviation assumed at the workers.
    pub sigma_p: f64,
    /// Number of noise standard deviations tolerated.
    pub noise_factor: f64,
}

impl Default for CountThreshold {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            sigma_p: 0.0,
            noise_factor: 3.0,
        }
    }
}

impl CountThreshold {
    pub fn with_sigma_p(sigma_p: f64) -> Self {
        Self {
            sigma_p,
            ..Self::default()
        }
    }

    /// Acceptance level for a locator of degree `a` fitted to `words`.
    ///
    /// Three parts: a relative share of `‖S‖`, the rounding floor of the
    /// syndrome computation, and a bound on the residual left by white
    /// precision noise. Each key-equation row carries noise of standard
    /// deviation about `σ_p ‖λ‖ / √2`, so the residual norm is roughly
    /// chi-distributed with `equations - A` degrees of freedom; the bound is
    /// its mean plus `noise_factor` spreads.
    fn level<T: Scalar>(&self, words: &[SyndromeVector<T>], loc: &ErrorLocator<T>) -> T {
        let a = loc.degree();
        let mut norm2_sum = T::zero();
        let mut scale = T::zero();
        let mut eqs = 0;
        for s in words {
            let norm = s.norm();
            norm2_sum = norm2_sum + norm * norm;
            scale = scale.max_of(s.scale());
            eqs += s.n() - s.threshold() - a;
        }
        let n = words.first().map_or(0, SyndromeVector::n);
        let rounding = T::from_f64(1e3 * n as f64) * T::epsilon() * scale;
        let dof = (eqs.saturating_sub(a)).max(1) as f64;
        let noise = T::from_f64(self.sigma_p * (dof.sqrt() + self.noise_factor) * std::f64::consts::FRAC_1_SQRT_2)
            * loc.coeff_norm();
        T::from_f64(self.rel_tol) * norm2_sum.sqrt() + rounding + noise
    }
}

/// Smallest `A ≤ A_max` whose key-equation residual passes `threshold`.
pub fn estimate_error_count<T: Scalar>(s: &SyndromeVector<T>, a_max: usize, threshold: &CountThreshold) -> Result<usize> {
    if s.is_empty() {
        return Err(Error::InvalidArgument("empty syndrome vector".into()));
    }
    let radius = decoding_radius(s.n(), s.threshold());
    if a_max > radius {
        return Err(Error::RadiusExceeded { a: a_max, radius });
    }
    estimate_joint_error_count(std::slice::from_ref(s), a_max, threshold)
}

/// [`estimate_error_count`] for the stacked key equations of several words.
pub fn estimate_joint_error_count<T: Scalar>(
    words: &[SyndromeVector<T>],
    a_max: usize,
    threshold: &CountThreshold,
) -> Result<usize> {
    let Some(first) = words.first() else {
        return Err(Error::InvalidArgument("no syndrome vectors".into()));
    };
    let (n, k) = (first.n(), first.threshold());
    let radius = decoding_radius(n, k);
    if a_max > radius {
        return Err(Error::RadiusExceeded { a: a_max, radius });
    }
    for a in 0..=a_max {
        let loc = solve_joint_locator(words, a, n, k)?;
        if loc.residual <= threshold.level(words, &loc) {
            return Ok(a);
        }
    }
    Ok(a_max)
}

/// How a location set was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocateMethod {
    KeyEquation,
    BruteForce,
}

/// Chosen error positions and the scores behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationReport<T> {
    pub estimated_a: usize,
    /// `(candidate, score)` sorted ascending by score, then by index.
    pub scores: Vec<(usize, T)>,
    pub chosen: IndexSet,
    pub method: LocateMethod,
}

fn sort_scores<T: Scalar>(scores: &mut [(usize, T)]) {
    scores.sort_by(|x, y| {
        x.1.partial_cmp(&y.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.0.cmp(&y.0))
    });
}

/// Scores `|Λ̄(X_r)|²` over the candidates and keeps the `A` smallest.
pub fn localize<T: Scalar>(
    locator: &ErrorLocator<T>,
    candidates: &IndexSet,
    a: usize,
    n: usize,
) -> Result<LocalizationReport<T>> {
    if candidates.len() < a {
        return Err(Error::InvalidArgument(format!(
            "{} candidates cannot hold {a} errors",
            candidates.len()
        )));
    }
    localize_on(&ChebyshevGrid::new(n)?, locator, candidates, a)
}

/// [`localize`] with a precomputed grid.
pub fn localize_on<T: Scalar>(
    grid: &ChebyshevGrid<T>,
    locator: &ErrorLocator<T>,
    candidates: &IndexSet,
    a: usize,
) -> Result<LocalizationReport<T>> {
    if candidates.len() < a {
        return Err(Error::InvalidArgument(format!(
            "{} candidates cannot hold {a} errors",
            candidates.len()
        )));
    }
    candidates.check_within(grid.count(), "candidates")?;
    let poly = ChebPoly::new(locator.coeffs.clone());
    let mut scores: Vec<(usize, T)> = candidates
        .iter()
        .map(|r| {
            let v = poly.eval(grid.node(r));
            (r, v * v)
        })
        .collect();
    sort_scores(&mut scores);
    let chosen = IndexSet::new(scores.iter().take(a).map(|&(r, _)| r).collect())?;
    Ok(LocalizationReport {
        estimated_a: a,
        scores,
        chosen,
        method: LocateMethod::KeyEquation,
    })
}

/// Tries every `A`-subset of the candidates as the error set and keeps the
/// one whose erasure leaves the smallest degree-`(K-1)` fit residual.
pub fn brute_force_localize<T: Scalar>(
    codeword: &RealVectorCodeword<T>,
    candidates: &IndexSet,
    a: usize,
    threshold: usize,
    cap: u128,
) -> Result<LocalizationReport<T>> {
    let radius = decoding_radius(codeword.len(), threshold);
    if a > radius {
        return Err(Error::RadiusExceeded { a, radius });
    }
    if candidates.len() < a {
        return Err(Error::InvalidArgument(format!(
            "{} candidates cannot hold {a} errors",
            candidates.len()
        )));
    }
    candidates.check_within(codeword.block_len(), "candidates")?;
    let count = binomial(candidates.len(), a);
    if count > cap {
        return Err(Error::TooLarge {
            what: "brute-force localization".into(),
            count,
            cap,
        });
    }
    let grid = ChebyshevGrid::<T>::new(codeword.block_len())?;
    let cand = candidates.as_slice();
    let mut best: Option<(T, Vec<usize>)> = None;
    let mut scores = Vec::with_capacity(count as usize);
    let mut failure = None;
    for_each_combination(cand.len(), a, |c| {
        if failure.is_some() {
            return;
        }
        let subset: Vec<usize> = c.iter().map(|&i| cand[i]).collect();
        match fit_polynomial(&codeword.points_excluding(&grid, &subset), threshold) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|(r, _)| fit.residual < *r) {
                    best = Some((fit.residual, subset.clone()));
                }
                scores.push((subset, fit.residual));
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let (_, chosen) = best.expect("at least the empty subset is tried");
    // Per-candidate score: best residual of any subset containing it.
    let mut per_candidate: Vec<(usize, T)> = cand
        .iter()
        .map(|&r| {
            let best_with = scores
                .iter()
                .filter(|(s, _)| s.contains(&r))
                .map(|(_, v)| *v)
                .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |m| if v < m { v } else { m })));
            (r, best_with.unwrap_or(T::zero()))
        })
        .collect();
    sort_scores(&mut per_candidate);
    Ok(LocalizationReport {
        estimated_a: a,
        scores: per_candidate,
        chosen: IndexSet::new(chosen)?,
        method: LocateMethod::BruteForce,
    })
}

/// Codeword re-evaluated from a fit that ignores the erased positions.
#[derive(Clone, Debug)]
pub struct Correction<T> {
    pub codeword: RealVectorCodeword<T>,
    pub poly: ChebPoly<T>,
    pub residual: T,
}

/// Erases `locations`, fits `K` coefficients to the rest and evaluates the
/// fit at all `N` nodes.
pub fn correct_and_decode<T: Scalar>(
    codeword: &RealVectorCodeword<T>,
    locations: &IndexSet,
    threshold: usize,
) -> Result<Correction<T>> {
    correct_on(&ChebyshevGrid::new(codeword.block_len())?, codeword, locations, threshold)
}

/// [`correct_and_decode`] with a precomputed grid of the block length.
pub fn correct_on<T: Scalar>(
    grid: &ChebyshevGrid<T>,
    codeword: &RealVectorCodeword<T>,
    locations: &IndexSet,
    threshold: usize,
) -> Result<Correction<T>> {
    if grid.count() != codeword.block_len() {
        return Err(Error::SizeMismatch {
            expected: codeword.block_len(),
            got: grid.count(),
        });
    }
    let points = codeword.points_excluding(grid, locations.as_slice());
    if points.len() < threshold {
        return Err(Error::Unrecoverable(format!(
            "{} positions left after erasing {} but K = {threshold}",
            points.len(),
            locations.len()
        )));
    }
    let fit = fit_polynomial(&points, threshold)?;
    let corrected = grid.nodes().iter().map(|&x| fit.poly.eval(x)).collect();
    Ok(Correction {
        codeword: RealVectorCodeword::full(corrected),
        poly: fit.poly,
        residual: fit.residual,
    })
}

/// Decoder settings shared by all entries of a round.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderConfig {
    /// Upper bound on the error count; `None` uses the decoding radius.
    pub a_max: Option<usize>,
    pub count: CountThreshold,
    /// Estimate the error count from the syndromes (otherwise assume `a_max`).
    pub estimate_count: bool,
    /// Use brute force instead of the key equation.
    pub brute_force: bool,
    pub brute_force_cap: u128,
    pub strategy: LocateStrategy,
}

/// How the entries of one round share their localization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocateStrategy {
    /// Every entry codeword is localized on its own.
    #[default]
    PerEntry,
    /// Per-entry sets replaced by their majority vote.
    Majority,
    /// One locator from the stacked key equations of all entries.
    Joint,
}

impl std::str::FromStr for LocateStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-entry" => Ok(LocateStrategy::PerEntry),
            "majority" => Ok(LocateStrategy::Majority),
            "joint" => Ok(LocateStrategy::Joint),
            other => Err(Error::Parse(format!(
                "unknown locate strategy `{other}` (per-entry, majority, joint)"
            ))),
        }
    }
}

impl std::fmt::Display for LocateStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LocateStrategy::PerEntry => "per-entry",
            LocateStrategy::Majority => "majority",
            LocateStrategy::Joint => "joint",
        })
    }
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            a_max: None,
            count: CountThreshold::default(),
            estimate_count: true,
            brute_force: false,
            brute_force_cap: BRUTE_FORCE_CAP,
            strategy: LocateStrategy::PerEntry,
        }
    }
}

/// DCT plan and grid for one block length, shared across words.
#[derive(Clone, Debug)]
pub struct DecodeContext<T> {
    pub plan: DctPlan<T>,
    pub grid: ChebyshevGrid<T>,
}

impl<T: Scalar> DecodeContext<T> {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self {
            plan: DctPlan::new(n)?,
            grid: ChebyshevGrid::new(n)?,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.count()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.count() == 0
    }
}

/// Localization of one word.
pub fn locate_word<T: Scalar>(
    ctx: &DecodeContext<T>,
    codeword: &RealVectorCodeword<T>,
    threshold: usize,
    candidates: &IndexSet,
    cfg: &DecoderConfig,
) -> Result<LocalizationReport<T>> {
    let radius = decoding_radius(codeword.len(), threshold);
    let a_max = cfg.a_max.unwrap_or(radius).min(candidates.len());
    if !codeword.is_complete() {
        if a_max > 0 {
            return Err(Error::Unsupported(
                "Byzantine decoding with stragglers (s > 0 and A > 0)".into(),
            ));
        }
        return Ok(LocalizationReport {
            estimated_a: 0,
            scores: Vec::new(),
            chosen: IndexSet::empty(),
            method: LocateMethod::KeyEquation,
        });
    }
    if a_max > radius {
        return Err(Error::RadiusExceeded { a: a_max, radius });
    }
    let s = syndromes_with(&ctx.plan, codeword, threshold)?;
    let a = if cfg.estimate_count && !s.is_empty() {
        estimate_error_count(&s, a_max, &cfg.count)?
    } else {
        a_max
    };
    if cfg.brute_force {
        let mut report = brute_force_localize(codeword, candidates, a, threshold, cfg.brute_force_cap)?;
        report.estimated_a = a;
        return Ok(report);
    }
    let loc = solve_locator(&s, a, codeword.block_len(), threshold)?;
    localize_on(&ctx.grid, &loc, candidates, a)
}

/// Majority vote over per-entry location sets: each index gets one vote per
/// entry that chose it; the `A` most voted win (ties to the smaller index),
/// with `A` the most common per-entry count (ties to the smaller count).
pub fn fuse_locations(sets: &[IndexSet], n: usize) -> IndexSet {
    if sets.is_empty() {
        return IndexSet::empty();
    }
    let mut count_votes = vec![0usize; n + 1];
    let mut votes = vec![0usize; n + 1];
    for s in sets {
        count_votes[s.len().min(n)] += 1;
        for i in s.iter() {
            votes[i] += 1;
        }
    }
    let a = (0..=n).max_by(|&x, &y| count_votes[x].cmp(&count_votes[y]).then(y.cmp(&x))).unwrap_or(0);
    let mut order: Vec<usize> = (1..=n).filter(|&i| votes[i] > 0).collect();
    order.sort_by(|&x, &y| votes[y].cmp(&votes[x]).then(x.cmp(&y)));
    order.truncate(a);
    IndexSet::new(order).expect("distinct indices")
}

/// Result of decoding all entries of a round.
#[derive(Clone, Debug)]
pub struct RoundDecode<T> {
    pub reports: Vec<LocalizationReport<T>>,
    pub corrected: Vec<Correction<T>>,
}

/// Localizes and corrects every entry codeword.
pub fn decode_round<T: Scalar>(
    codewords: &[RealVectorCodeword<T>],
    threshold: usize,
    candidates: &IndexSet,
    cfg: &DecoderConfig,
) -> Result<RoundDecode<T>> {
    let Some(first) = codewords.first() else {
        return Ok(RoundDecode {
            reports: Vec::new(),
            corrected: Vec::new(),
        });
    };
    decode_round_with(&DecodeContext::new(first.block_len())?, codewords, threshold, candidates, cfg)
}

/// Localization of every entry under the configured strategy.
pub fn locate_round<T: Scalar>(
    ctx: &DecodeContext<T>,
    codewords: &[RealVectorCodeword<T>],
    threshold: usize,
    candidates: &IndexSet,
    cfg: &DecoderConfig,
) -> Result<Vec<LocalizationReport<T>>> {
    if cfg.strategy == LocateStrategy::Joint && !cfg.brute_force && codewords.iter().all(|c| c.is_complete()) {
        let report = locate_joint(ctx, codewords, threshold, candidates, cfg)?;
        return Ok(vec![report; codewords.len()]);
    }
    let mut reports = codewords
        .iter()
        .map(|cw| locate_word(ctx, cw, threshold, candidates, cfg))
        .collect::<Result<Vec<_>>>()?;
    if cfg.strategy != LocateStrategy::PerEntry {
        let sets: Vec<IndexSet> = reports.iter().map(|r| r.chosen.clone()).collect();
        let fused = fuse_locations(&sets, ctx.len());
        for r in &mut reports {
            r.estimated_a = fused.len();
            r.chosen = fused.clone();
        }
    }
    Ok(reports)
}

/// One localization for all words from the stacked key equations.
pub fn locate_joint<T: Scalar>(
    ctx: &DecodeContext<T>,
    codewords: &[RealVectorCodeword<T>],
    threshold: usize,
    candidates: &IndexSet,
    cfg: &DecoderConfig,
) -> Result<LocalizationReport<T>> {
    let n = ctx.len();
    let radius = decoding_radius(n, threshold);
    let a_max = cfg.a_max.unwrap_or(radius).min(candidates.len());
    if a_max > radius {
        return Err(Error::RadiusExceeded { a: a_max, radius });
    }
    let words = codewords
        .iter()
        .map(|cw| syndromes_with(&ctx.plan, cw, threshold))
        .collect::<Result<Vec<_>>>()?;
    let a = if cfg.estimate_count && words.iter().any(|s| !s.is_empty()) {
        estimate_joint_error_count(&words, a_max, &cfg.count)?
    } else {
        a_max
    };
    let loc = solve_joint_locator(&words, a, n, threshold)?;
    localize_on(&ctx.grid, &loc, candidates, a)
}

/// [`decode_round`] with a shared context.
pub fn decode_round_with<T: Scalar>(
    ctx: &DecodeContext<T>,
    codewords: &[RealVectorCodeword<T>],
    threshold: usize,
    candidates: &IndexSet,
    cfg: &DecoderConfig,
) -> Result<RoundDecode<T>> {
    let reports = locate_round(ctx, codewords, threshold, candidates, cfg)?;
    let corrected = codewords
        .iter()
        .zip(&reports)
        .map(|(cw, r)| correct_on(&ctx.grid, cw, &r.chosen, threshold))
        .collect::<Result<Vec<_>>>()?;
    Ok(RoundDecode { reports, corrected })
}
