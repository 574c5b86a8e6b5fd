//! Choosing which evaluation indices the unreliable workers receive.
//!
//! Both objectives decompose over fixed-size subsets of the candidate set:
//! the leakage bound is a maximum of per-`t`-subset traces and the
//! localization surrogate a mean over `A`-subsets of a maximum of per-
//! (error set, candidate) terms. Every search therefore works from two
//! lookup tables indexed by colexicographic subset rank.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cheb::{basis_table_unchecked, cheb_nodes};
use crate::error::{Error, Result};
use crate::metrics::{pep_log_term_nodes, trace_of, CollusionMatrices, LeakageParams, SurrogateParams};
use crate::subsets::{binomial, combinations, for_each_combination, IndexSet, RankTable};

/// Default cap on the number of `ν`-subsets a brute-force search visits.
pub const SEARCH_CAP: u128 = 1_000_000;

const BATCH: usize = 4096;

/// Search method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(alias = "mis")]
    BfMis,
    #[serde(alias = "loc")]
    BfLoc,
    #[serde(alias = "joint-bf")]
    BfJoint,
    #[serde(alias = "joint-greedy")]
    Greedy,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::BfMis => "bf-mis",
            Method::BfLoc => "bf-loc",
            Method::BfJoint => "bf-joint",
            Method::Greedy => "greedy",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bf-mis" | "mis" => Ok(Method::BfMis),
            "bf-loc" | "loc" => Ok(Method::BfLoc),
            "bf-joint" | "joint-bf" => Ok(Method::BfJoint),
            "greedy" | "joint-greedy" => Ok(Method::Greedy),
            other => Err(Error::Parse(format!("unknown method `{other}`"))),
        }
    }
}

/// Number of metric evaluations spent by a search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityCounters {
    pub mis_evals: u128,
    pub pep_evals: u128,
}

impl ComplexityCounters {
    pub fn total(&self) -> u128 {
        self.mis_evals + self.pep_evals
    }
}

impl std::ops::AddAssign for ComplexityCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.mis_evals += rhs.mis_evals;
        self.pep_evals += rhs.pep_evals;
    }
}

/// Closed-form evaluation counts.
///
/// Brute force visits `C(N, ν)` sets, each costing `C(ν, t)` traces and
/// `C(ν, A)(ν - A)` surrogate terms (only the relevant part for the
/// single-objective searches). Greedy costs one evaluation per initial
/// `m`-subset plus `(N - u)(C(u+1, t) + C(u+1, A))` per expansion step.
pub fn predicted_complexity(method: Method, n: usize, nu: usize, t: usize, a: usize) -> ComplexityCounters {
    let sets = binomial(n, nu);
    let mis = sets.saturating_mul(binomial(nu, t));
    let pep = sets.saturating_mul(binomial(nu, a).saturating_mul((nu - a.min(nu)) as u128));
    match method {
        Method::BfMis => ComplexityCounters { mis_evals: mis, pep_evals: 0 },
        Method::BfLoc => ComplexityCounters { mis_evals: 0, pep_evals: pep },
        Method::BfJoint => ComplexityCounters { mis_evals: mis, pep_evals: pep },
        Method::Greedy => {
            let m = a.max(t);
            let mut c = ComplexityCounters {
                mis_evals: binomial(n, m),
                pep_evals: 0,
            };
            for u in m..nu {
                let steps = (n - u) as u128;
                c.mis_evals += steps * binomial(u + 1, t);
                c.pep_evals += steps * binomial(u + 1, a);
            }
            c
        }
    }
}

/// Problem dimensions shared by every search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchProblem {
    pub n: usize,
    pub nu: usize,
    pub k: usize,
    pub leakage: LeakageParams,
    pub surrogate: SurrogateParams,
    pub cap: u128,
}

impl SearchProblem {
    pub fn t(&self) -> usize {
        self.leakage.t
    }

    pub fn a(&self) -> usize {
        self.surrogate.a
    }

    pub fn validate(&self) -> Result<()> {
        let (n, nu, t, a) = (self.n, self.nu, self.t(), self.a());
        if nu > n {
            return Err(Error::config("system.nu", format!("nu = {nu} exceeds N = {n}")));
        }
        if t == 0 || t > nu {
            return Err(Error::config("system.t", format!("need 1 <= t <= nu, got t = {t}")));
        }
        if a >= nu {
            return Err(Error::config("system.A", format!("need A < nu, got A = {a}")));
        }
        if n < self.k + t {
            return Err(Error::InsufficientWorkers { n, needed: self.k + t });
        }
        self.surrogate.validate()
    }

    fn check_cap(&self) -> Result<()> {
        let count = binomial(self.n, self.nu);
        if count > self.cap {
            return Err(Error::TooLarge {
                what: format!(
                    "search over {}-subsets of [{}] (reduce N or nu, or raise search.cap)",
                    self.nu, self.n
                ),
                count,
                cap: self.cap,
            });
        }
        Ok(())
    }
}

/// `trace_term` for every `t`-subset of `[N]`, by colex rank.
#[derive(Clone, Debug)]
pub struct TraceTable {
    t: usize,
    values: Vec<f64>,
}

impl TraceTable {
    pub fn new(n: usize, k: usize, t: usize) -> Result<Self> {
        let ranks = RankTable::new(n);
        let basis = basis_table_unchecked(cheb_nodes::<f64>(k + t)?.nodes(), cheb_nodes::<f64>(n)?.nodes());
        let mut values = vec![0.0; ranks.choose(n, t)];
        let mut failure = None;
        for_each_combination(n, t, |c| {
            if failure.is_some() {
                return;
            }
            match CollusionMatrices::new(&IndexSet::from_zero_based(c), &basis, k) {
                Ok(m) => values[ranks.rank(c)] = trace_of(&m).value,
                Err(e) => failure = Some(e),
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(Self { t, values }),
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Trace for a 0-based sorted `t`-subset.
    pub fn get(&self, ranks: &RankTable, subset: &[usize]) -> f64 {
        self.values[ranks.rank(subset)]
    }
}

/// Logarithms of the surrogate terms for every (error set of size `a`,
/// candidate) pair.
#[derive(Clone, Debug)]
pub struct PepTable {
    a: usize,
    n: usize,
    /// Row `rank(error set)`, column candidate (0-based).
    values: Vec<f64>,
}

impl PepTable {
    pub fn new(n: usize, a: usize, params: &SurrogateParams) -> Result<Self> {
        let ranks = RankTable::new(n);
        let nodes = cheb_nodes::<f64>(n)?;
        let rows = ranks.choose(n, a);
        let mut values = vec![0.0; rows * n];
        let params = SurrogateParams { a, ..*params };
        for_each_combination(n, a, |c| {
            let errs: Vec<f64> = c.iter().map(|&i| nodes.node(i + 1)).collect();
            let base = ranks.rank(c) * n;
            for l in (0..n).filter(|l| !c.contains(l)) {
                values[base + l] = pep_log_term_nodes(&errs, nodes.node(l + 1), &params);
            }
        });
        Ok(Self { a, n, values })
    }

    pub fn a(&self) -> usize {
        self.a
    }

    fn row(&self, rank: usize) -> &[f64] {
        &self.values[rank * self.n..(rank + 1) * self.n]
    }
}

/// Lookup tables plus the subset-position lists used to evaluate sets.
pub struct SearchTables {
    problem: SearchProblem,
    ranks: RankTable,
    traces: TraceTable,
    /// Surrogate tables keyed by error-set size.
    peps: BTreeMap<usize, PepTable>,
    /// Position combinations `C(s, r)` keyed by `(s, r)`.
    positions: BTreeMap<(usize, usize), Vec<Vec<usize>>>,
}

/// Leakage and surrogate of one set, with the evaluations spent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SetMetrics {
    pub eta_c: f64,
    pub p_err: f64,
    /// `ln p_err`, finite even where `p_err` underflows.
    pub log_p_err: f64,
    /// Trace lookups and (error set, candidate) surrogate lookups.
    pub counters: ComplexityCounters,
    /// Error sets enumerated for the surrogate.
    pub error_sets: u128,
}

/// Which parts of the objective to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Parts {
    mis: bool,
    pep: bool,
}

impl SearchTables {
    pub fn new(problem: &SearchProblem) -> Result<Self> {
        problem.validate()?;
        let traces = TraceTable::new(problem.n, problem.k, problem.t())?;
        Self::with_traces(problem, traces)
    }

    /// Reuses a trace table (it does not depend on `σ_p²`).
    pub fn with_traces(problem: &SearchProblem, traces: TraceTable) -> Result<Self> {
        problem.validate()?;
        if traces.t() != problem.t() || traces.values.len() != binomial(problem.n, problem.t()) as usize {
            return Err(Error::InvalidArgument("trace table built for other parameters".into()));
        }
        let mut tables = Self {
            problem: *problem,
            ranks: RankTable::new(problem.n),
            traces,
            peps: BTreeMap::new(),
            positions: BTreeMap::new(),
        };
        tables.ensure_size(problem.nu)?;
        Ok(tables)
    }

    pub fn problem(&self) -> &SearchProblem {
        &self.problem
    }

    pub fn trace_table(&self) -> &TraceTable {
        &self.traces
    }

    fn clamped(&self, size: usize) -> (usize, usize) {
        (self.problem.t().min(size), self.problem.a().min(size.saturating_sub(1)))
    }

    /// Prepares tables for evaluating sets of `size` elements.
    fn ensure_size(&mut self, size: usize) -> Result<()> {
        let (t, a) = self.clamped(size);
        if t != self.traces.t() {
            return Err(Error::Unsupported(format!(
                "sets of size {size} would need a trace table for t = {t}"
            )));
        }
        if a > 0 && !self.peps.contains_key(&a) {
            self.peps.insert(a, PepTable::new(self.problem.n, a, &self.problem.surrogate)?);
        }
        for r in [t, a] {
            self.positions.entry((size, r)).or_insert_with(|| combinations(size, r));
        }
        Ok(())
    }

    fn leakage_scale(&self, t: usize) -> f64 {
        LeakageParams { t, ..self.problem.leakage }.scale()
    }

    /// Metrics of a 0-based sorted set (tables for its size must exist).
    fn eval(&self, q: &[usize], parts: Parts) -> SetMetrics {
        let (t, a) = self.clamped(q.len());
        let mut counters = ComplexityCounters::default();
        let mut eta_c = 0.0;
        let mut log_p_err = f64::NEG_INFINITY;
        let mut error_sets = 0;
        let mut buf = [0usize; 64];
        if parts.mis {
            let mut worst = f64::NEG_INFINITY;
            for pos in &self.positions[&(q.len(), t)] {
                let sub = &mut buf[..t];
                for (d, &p) in sub.iter_mut().zip(pos) {
                    *d = q[p];
                }
                worst = worst.max(self.traces.get(&self.ranks, sub));
            }
            counters.mis_evals = self.positions[&(q.len(), t)].len() as u128;
            eta_c = worst * self.leakage_scale(t);
        }
        if parts.pep && a > 0 {
            let table = &self.peps[&a];
            let combos = &self.positions[&(q.len(), a)];
            // running log-sum-exp of the per-error-set maxima
            let mut top = f64::NEG_INFINITY;
            let mut acc = 0.0;
            for pos in combos {
                let sub = &mut buf[..a];
                for (d, &p) in sub.iter_mut().zip(pos) {
                    *d = q[p];
                }
                let row = table.row(self.ranks.rank(sub));
                let mut worst = f64::NEG_INFINITY;
                let mut next = 0;
                for (l, &idx) in q.iter().enumerate() {
                    if next < a && pos[next] == l {
                        next += 1;
                        continue;
                    }
                    worst = worst.max(row[idx]);
                }
                if worst > top {
                    acc = acc * (top - worst).exp() + 1.0;
                    top = worst;
                } else if worst > f64::NEG_INFINITY {
                    acc += (worst - top).exp();
                }
            }
            counters.pep_evals = (combos.len() * (q.len() - a)) as u128;
            error_sets = combos.len() as u128;
            if top > f64::NEG_INFINITY {
                log_p_err = top + acc.ln() - (combos.len() as f64).ln();
            }
        }
        SetMetrics {
            eta_c,
            p_err: log_p_err.exp(),
            log_p_err,
            counters,
            error_sets,
        }
    }

    /// Leakage bound and surrogate of an arbitrary set of size `ν`.
    pub fn evaluate(&self, set: &IndexSet) -> Result<SetMetrics> {
        set.check_within(self.problem.n, "set")?;
        if set.len() != self.problem.nu {
            return Err(Error::SizeMismatch {
                expected: self.problem.nu,
                got: set.len(),
            });
        }
        Ok(self.eval(&set.to_zero_based(), Parts { mis: true, pep: true }))
    }
}

/// Outcome of a search.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub method: Method,
    pub chosen_set: IndexSet,
    pub objective: f64,
    pub eta_c: f64,
    pub p_err: f64,
    /// Weight of the leakage term (joint methods only).
    pub w: Option<f64>,
    pub counters: ComplexityCounters,
}

fn check_weight(w: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::config("search.w", format!("weight {w} outside [0, 1]")));
    }
    Ok(())
}

/// `ln` of the objective; monotone in the objective, and keeps sets
/// comparable when the surrogate underflows.
fn log_objective(m: &SetMetrics, method: Method, w: f64) -> f64 {
    let ln = |x: f64| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY };
    match method {
        Method::BfMis => ln(m.eta_c),
        Method::BfLoc => m.log_p_err,
        Method::BfJoint | Method::Greedy => {
            let a = ln(w) + ln(m.eta_c);
            let b = ln(1.0 - w) + m.log_p_err;
            let top = a.max(b);
            if top == f64::NEG_INFINITY {
                top
            } else {
                top + ((a - top).exp() + (b - top).exp()).ln()
            }
        }
    }
}

fn objective_of(m: &SetMetrics, method: Method, w: f64) -> f64 {
    match method {
        Method::BfMis => m.eta_c,
        Method::BfLoc => m.p_err,
        Method::BfJoint | Method::Greedy => w * m.eta_c + (1.0 - w) * m.p_err,
    }
}

/// Exhaustive search in lexicographic order; the first minimum wins. One
/// enumeration serves every weight in `ws`; each result carries the counters
/// of a single search.
fn brute_force(tables: &SearchTables, method: Method, ws: &[f64]) -> Result<Vec<SearchResult>> {
    let p = &tables.problem;
    p.check_cap()?;
    let parts = match method {
        Method::BfMis => Parts { mis: true, pep: false },
        Method::BfLoc => Parts { mis: false, pep: true },
        _ => Parts { mis: true, pep: true },
    };
    let mut best: Vec<Option<(f64, Vec<usize>)>> = vec![None; ws.len()];
    let mut counters = ComplexityCounters::default();
    let mut batch: Vec<Vec<usize>> = Vec::with_capacity(BATCH);
    let mut flush = |batch: &mut Vec<Vec<usize>>| {
        let scored: Vec<SetMetrics> = batch.par_iter().map(|q| tables.eval(q, parts)).collect();
        for (q, m) in batch.drain(..).zip(scored) {
            counters += m.counters;
            for (slot, &w) in best.iter_mut().zip(ws) {
                let obj = log_objective(&m, method, w);
                if slot.as_ref().is_none_or(|(b, _)| obj < *b) {
                    *slot = Some((obj, q.clone()));
                }
            }
        }
    };
    for_each_combination(p.n, p.nu, |c| {
        batch.push(c.to_vec());
        if batch.len() == BATCH {
            flush(&mut batch);
        }
    });
    flush(&mut batch);
    Ok(best
        .into_iter()
        .zip(ws)
        .map(|(slot, &w)| {
            let (_, q) = slot.expect("at least one subset");
            let full = tables.eval(&q, Parts { mis: true, pep: true });
            SearchResult {
                method,
                chosen_set: IndexSet::from_zero_based(&q),
                objective: objective_of(&full, method, w),
                eta_c: full.eta_c,
                p_err: full.p_err,
                w: matches!(method, Method::BfJoint).then_some(w),
                counters,
            }
        })
        .collect())
}

fn single(mut results: Vec<SearchResult>) -> SearchResult {
    results.pop().expect("one weight in, one result out")
}

/// Minimises the leakage bound.
pub fn solve_mis_optimal(tables: &SearchTables) -> Result<SearchResult> {
    brute_force(tables, Method::BfMis, &[1.0]).map(single)
}

/// Minimises the localization surrogate.
pub fn solve_loc_optimal(tables: &SearchTables) -> Result<SearchResult> {
    brute_force(tables, Method::BfLoc, &[0.0]).map(single)
}

/// Minimises `w η_c + (1 - w) P̃` exhaustively.
pub fn solve_joint_bruteforce(tables: &SearchTables, w: f64) -> Result<SearchResult> {
    check_weight(w)?;
    brute_force(tables, Method::BfJoint, &[w]).map(single)
}

/// [`solve_joint_bruteforce`] for several weights with one enumeration.
pub fn solve_joint_bruteforce_sweep(tables: &SearchTables, ws: &[f64]) -> Result<Vec<SearchResult>> {
    for &w in ws {
        check_weight(w)?;
    }
    brute_force(tables, Method::BfJoint, ws)
}

/// Greedy search: best `m`-subset with `m = max(A, t)`, then repeatedly add
/// the index that minimises the objective. Sets smaller than `ν` are scored
/// with `t' = min(t, u)` and `A' = min(A, u - 1)`.
pub fn solve_joint_greedy(tables: &mut SearchTables, w: f64) -> Result<SearchResult> {
    check_weight(w)?;
    let p = tables.problem;
    let m = p.a().max(p.t());
    if m > p.nu {
        return Err(Error::config("system", format!("max(A, t) = {m} exceeds nu = {}", p.nu)));
    }
    for size in m..=p.nu {
        tables.ensure_size(size)?;
    }
    let tables = &*tables;
    let both = Parts { mis: true, pep: true };
    let mut counters = ComplexityCounters::default();

    // initial selection: one objective evaluation per m-subset
    let initial = combinations(p.n, m);
    let scores: Vec<f64> = initial
        .par_iter()
        .map(|c| log_objective(&tables.eval(c, both), Method::Greedy, w))
        .collect();
    counters.mis_evals += initial.len() as u128;
    let mut current = argmin_first(&scores).map(|i| initial[i].clone()).expect("m <= N");

    while current.len() < p.nu {
        let options: Vec<Vec<usize>> = (0..p.n)
            .filter(|i| !current.contains(i))
            .map(|i| {
                let mut s = current.clone();
                let pos = s.partition_point(|&x| x < i);
                s.insert(pos, i);
                s
            })
            .collect();
        let evals: Vec<SetMetrics> = options.par_iter().map(|s| tables.eval(s, both)).collect();
        // one surrogate evaluation per error set, as in the closed form
        for e in &evals {
            counters.mis_evals += e.counters.mis_evals;
            counters.pep_evals += e.error_sets;
        }
        let scores: Vec<f64> = evals.iter().map(|e| log_objective(e, Method::Greedy, w)).collect();
        current = options[argmin_first(&scores).expect("an index remains")].clone();
    }

    let fin = tables.eval(&current, both);
    Ok(SearchResult {
        method: Method::Greedy,
        chosen_set: IndexSet::from_zero_based(&current),
        objective: objective_of(&fin, Method::Greedy, w),
        eta_c: fin.eta_c,
        p_err: fin.p_err,
        w: Some(w),
        counters,
    })
}

/// Index of the first minimum.
fn argmin_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v < values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Runs `method` (with weight `w` for the joint ones).
pub fn solve(tables: &mut SearchTables, method: Method, w: f64) -> Result<SearchResult> {
    match method {
        Method::BfMis => solve_mis_optimal(tables),
        Method::BfLoc => solve_loc_optimal(tables),
        Method::BfJoint => solve_joint_bruteforce(tables, w),
        Method::Greedy => solve_joint_greedy(tables, w),
    }
}
