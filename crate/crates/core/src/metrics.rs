//! Privacy and robustness metrics.
//!
//! Privacy: colluders holding the shares at evaluation indices `T` see
//! `H_T X + W_T N`; the leading term of their mutual-information leakage is
//! `tr((W_T W_Tᵀ)⁻¹ H_T H_Tᵀ) · y² t / (σ_n² ln 2)`, maximised over the
//! `t`-subsets of the indices held by unreliable workers.
//!
//! Robustness: the pairwise-error surrogate
//! `exp(-ζ f δ_max / (8 σ_p²))` with `f = |∏_a (cos θ_l - cos θ_{i_a})|²`
//! bounds the chance that a clean position `l` outscores an error position,
//! averaged over error sets and maximised over clean positions.

use serde::{Deserialize, Serialize};

use crate::cheb::{cheb_nodes, BasisTable};
use crate::error::{Error, Result};
use crate::linalg::{dot, left_svd, Mat};
use crate::subsets::{binomial, for_each_combination, IndexSet};

/// Condition number of `W_T` above which the trace is flagged.
pub const NEAR_SINGULAR_COND: f64 = 1e12;

/// Default cap on subset enumerations.
pub const ENUMERATION_CAP: u128 = 1_000_000;

/// `H_T` (`t × k`) and `W_T` (`t × t`) for a colluding index set.
#[derive(Clone, Debug)]
pub struct CollusionMatrices {
    pub t_set: IndexSet,
    pub h: Mat<f64>,
    pub w: Mat<f64>,
}

impl CollusionMatrices {
    pub fn new(t_set: &IndexSet, basis: &BasisTable<f64>, k: usize) -> Result<Self> {
        t_set.check_within(basis.eval_count(), "T")?;
        let width = basis.enc_count();
        if k >= width {
            return Err(Error::InvalidArgument(format!(
                "k = {k} leaves no noise columns among {width} basis functions"
            )));
        }
        let t = width - k;
        if t_set.len() != t {
            return Err(Error::SizeMismatch {
                expected: t,
                got: t_set.len(),
            });
        }
        let rows: Vec<usize> = t_set.iter().collect();
        let h = Mat::from_fn(t, k, |a, r| basis.get(rows[a], r + 1));
        let w = Mat::from_fn(t, t, |a, j| basis.get(rows[a], k + j + 1));
        Ok(Self {
            t_set: t_set.clone(),
            h,
            w,
        })
    }
}

/// `tr((W Wᵀ)⁻¹ H Hᵀ)` together with the conditioning of `W`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceTerm {
    pub value: f64,
    /// `s_max / s_min` of `W_T` (infinite when `W_T` is singular).
    pub condition: f64,
    /// Set when the condition number exceeds [`NEAR_SINGULAR_COND`]; the
    /// value then comes from the pseudoinverse.
    pub near_singular: bool,
}

/// Trace term from the singular system of `W`: with `W = U S Vᵀ`,
/// `tr((W Wᵀ)⁺ H Hᵀ) = Σ_i ‖u_iᵀ H‖² / s_i²`.
pub fn trace_of(m: &CollusionMatrices) -> TraceTerm {
    let t = m.w.rows();
    let svd = left_svd(&m.w);
    let s_max = svd.values.first().copied().unwrap_or(0.0);
    let cutoff = s_max * f64::EPSILON * t as f64;
    let kept: Vec<usize> = (0..svd.values.len()).filter(|&i| svd.values[i] > cutoff).collect();
    let condition = if kept.len() < t {
        f64::INFINITY
    } else {
        s_max / svd.values[t - 1]
    };
    let value = kept
        .iter()
        .map(|&i| {
            let u = &svd.vectors[i];
            let proj: f64 = (0..m.h.cols())
                .map(|c| {
                    let col: Vec<f64> = (0..t).map(|r| m.h.get(r, c)).collect();
                    dot(u, &col).powi(2)
                })
                .sum();
            proj / (svd.values[i] * svd.values[i])
        })
        .sum();
    TraceTerm {
        value,
        condition,
        near_singular: condition > NEAR_SINGULAR_COND,
    }
}

pub fn trace_term(t_set: &IndexSet, basis: &BasisTable<f64>, k: usize) -> Result<TraceTerm> {
    let m = CollusionMatrices::new(t_set, basis, k)?;
    let term = trace_of(&m);
    if term.near_singular {
        log::warn!(
            "W_T for T = {{{t_set}}} is near-singular (condition {:e}); trace from the pseudoinverse",
            term.condition
        );
    }
    Ok(term)
}

/// Data bound and privacy-noise level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageParams {
    pub y: f64,
    pub sigma_n: f64,
    pub t: usize,
}

impl LeakageParams {
    /// `y² t / (σ_n² ln 2)`.
    pub fn scale(&self) -> f64 {
        self.y * self.y * self.t as f64 / (self.sigma_n * self.sigma_n * std::f64::consts::LN_2)
    }
}

/// Leading-term leakage bound of an index set and its worst `t`-subset.
#[derive(Clone, Debug, PartialEq)]
pub struct MisBound {
    pub value: f64,
    pub max_trace: f64,
    pub argmax: IndexSet,
}

pub fn mis_bound(q: &IndexSet, params: &LeakageParams, basis: &BasisTable<f64>, k: usize) -> Result<MisBound> {
    let t = params.t;
    if t == 0 || q.len() < t {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= t <= |Q|, got t = {t}, |Q| = {}",
            q.len()
        )));
    }
    let items = q.as_slice();
    let mut best: Option<(f64, IndexSet)> = None;
    let mut failure = None;
    for_each_combination(items.len(), t, |c| {
        if failure.is_some() {
            return;
        }
        let set = IndexSet::new(c.iter().map(|&i| items[i]).collect()).expect("distinct");
        match trace_term(&set, basis, k) {
            Ok(tr) => {
                if best.as_ref().is_none_or(|(v, _)| tr.value > *v) {
                    best = Some((tr.value, set));
                }
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let (max_trace, argmax) = best.expect("at least one t-subset");
    Ok(MisBound {
        value: max_trace * params.scale(),
        max_trace,
        argmax,
    })
}

/// How `δ_max` is bound to the (candidate, error) pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaRule {
    /// Largest `β/(1+β)` over the error positions of the pair's error set.
    #[default]
    PerPairMax,
    /// `δ_max = 1`.
    Unit,
}

impl std::str::FromStr for DeltaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-pair-max" => Ok(DeltaRule::PerPairMax),
            "unit" => Ok(DeltaRule::Unit),
            other => Err(Error::Parse(format!("unknown delta rule `{other}`"))),
        }
    }
}

impl std::fmt::Display for DeltaRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DeltaRule::PerPairMax => "per-pair-max",
            DeltaRule::Unit => "unit",
        })
    }
}

/// Parameters of the localization-error surrogate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateParams {
    pub zeta: f64,
    pub sigma_p2: f64,
    pub a: usize,
    pub delta_rule: DeltaRule,
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0) {
            return Err(Error::config("robustness.zeta", "must be positive"));
        }
        if !(self.sigma_p2 >= 0.0) {
            return Err(Error::config("robustness.sigma_p2", "must be non-negative"));
        }
        Ok(())
    }
}

/// Surrogate term from raw node values (`cos θ`).
pub fn pep_term_nodes(error_nodes: &[f64], candidate: f64, params: &SurrogateParams) -> f64 {
    pep_log_term_nodes(error_nodes, candidate, params).exp()
}

/// Natural log of [`pep_term_nodes`], i.e. the exponent
/// `-ζ f δ_max / (8 σ_p²)`. Stays finite where the term itself underflows.
pub fn pep_log_term_nodes(error_nodes: &[f64], candidate: f64, params: &SurrogateParams) -> f64 {
    let f = error_nodes.iter().map(|&x| candidate - x).product::<f64>().powi(2);
    let delta = match params.delta_rule {
        DeltaRule::Unit => 1.0,
        DeltaRule::PerPairMax => error_nodes
            .iter()
            .map(|&x| {
                let spread: f64 = (1..=error_nodes.len() as i32)
                    .map(|q| (candidate.powi(q) - x.powi(q)).powi(2))
                    .sum();
                if spread == 0.0 {
                    1.0
                } else {
                    let beta = 4.0 / (params.zeta * spread);
                    beta / (1.0 + beta)
                }
            })
            .fold(0.0, f64::max),
    };
    if f == 0.0 {
        return 0.0;
    }
    if params.sigma_p2 == 0.0 {
        return f64::NEG_INFINITY;
    }
    -params.zeta * f * delta / (8.0 * params.sigma_p2)
}

/// `ln Σ exp(x_i)`, `-∞` for an empty or all-`-∞` input.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let top = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + xs.into_iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

pub fn pep_surrogate_term(a_set: &IndexSet, candidate: usize, params: &SurrogateParams, n: usize) -> Result<f64> {
    if a_set.contains(candidate) {
        return Err(Error::InvalidArgument(format!(
            "candidate {candidate} is one of the error positions"
        )));
    }
    a_set.check_within(n, "error set")?;
    if candidate == 0 || candidate > n {
        return Err(Error::InvalidArgument(format!("candidate {candidate} outside [1, {n}]")));
    }
    let grid = cheb_nodes::<f64>(n)?;
    let nodes: Vec<f64> = a_set.iter().map(|i| grid.node(i)).collect();
    Ok(pep_term_nodes(&nodes, grid.node(candidate), params))
}

/// Mean over `A`-subsets of `Q` of the largest surrogate term over the rest
/// of `Q`.
pub fn p_error_surrogate(q: &IndexSet, params: &SurrogateParams, n: usize, cap: u128) -> Result<f64> {
    Ok(log_p_error_surrogate(q, params, n, cap)?.exp())
}

/// Natural log of [`p_error_surrogate`] (`-∞` when `A = 0`), accumulated
/// with log-sum-exp so sets whose terms all underflow still compare.
pub fn log_p_error_surrogate(q: &IndexSet, params: &SurrogateParams, n: usize, cap: u128) -> Result<f64> {
    params.validate()?;
    let a = params.a;
    if a == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    if q.len() <= a {
        return Err(Error::InvalidArgument(format!(
            "|Q| = {} must exceed A = {a}",
            q.len()
        )));
    }
    q.check_within(n, "Q")?;
    let count = binomial(q.len(), a);
    if count > cap {
        return Err(Error::TooLarge {
            what: "error-set enumeration".into(),
            count,
            cap,
        });
    }
    let grid = cheb_nodes::<f64>(n)?;
    let items = q.as_slice();
    let mut worst_logs = Vec::with_capacity(count as usize);
    let mut in_set = vec![false; items.len()];
    for_each_combination(items.len(), a, |c| {
        for &i in c {
            in_set[i] = true;
        }
        let nodes: Vec<f64> = c.iter().map(|&i| grid.node(items[i])).collect();
        let worst = (0..items.len())
            .filter(|&l| !in_set[l])
            .map(|l| pep_log_term_nodes(&nodes, grid.node(items[l]), params))
            .fold(f64::NEG_INFINITY, f64::max);
        worst_logs.push(worst);
        for &i in c {
            in_set[i] = false;
        }
    });
    Ok(log_sum_exp(worst_logs.iter().copied()) - (count as f64).ln())
}

/// Empirical rate with a normal-approximation 95% half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    pub failures: usize,
    pub trials: usize,
}

impl RateEstimate {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.failures as f64 / self.trials as f64
        }
    }

    /// `1.96 √(p (1 - p) / n)`.
    pub fn half_width(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.rate();
        1.96 * (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}
