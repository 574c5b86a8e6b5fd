//! Batch drivers behind the command-line subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::assign::{
    predicted_complexity, solve, solve_joint_bruteforce_sweep, solve_joint_greedy, ComplexityCounters, Method,
    SearchResult, SearchTables, TraceTable,
};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::report::{fmt_f64, fmt_opt, fmt_set, CsvTable};
use crate::sim::{derive_seed, run_trials, summarize, Scenario, SimulationSummary, TrialMode, TrialOutcome};
use crate::subsets::IndexSet;

/// One cell of an optimization run.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeRow {
    pub method: Method,
    pub w: Option<f64>,
    pub sigma_p2: f64,
    /// `None` when the search was skipped.
    pub result: Option<SearchResult>,
    pub note: String,
}

fn is_joint(m: Method) -> bool {
    matches!(m, Method::BfJoint | Method::Greedy)
}

/// Search tables for every `σ_p²` of the configuration, sharing one trace table.
pub struct SearchBank {
    tables: Vec<(f64, SearchTables)>,
}

impl SearchBank {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let first = cfg.search_problem(cfg.robustness.sigma_p2[0]);
        first.validate()?;
        let traces = TraceTable::new(first.n, first.k, first.t())?;
        let tables = cfg
            .robustness
            .sigma_p2
            .iter()
            .map(|&s2| Ok((s2, SearchTables::with_traces(&cfg.search_problem(s2), traces.clone())?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tables })
    }

    pub fn sigma_p2(&self) -> impl Iterator<Item = f64> + '_ {
        self.tables.iter().map(|(s, _)| *s)
    }

    pub fn tables(&self, i: usize) -> &SearchTables {
        &self.tables[i].1
    }

    pub fn tables_mut(&mut self, i: usize) -> &mut SearchTables {
        &mut self.tables[i].1
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

fn skipped(method: Method, w: Option<f64>, sigma_p2: f64, e: &Error) -> OptimizeRow {
    OptimizeRow {
        method,
        w,
        sigma_p2,
        result: None,
        note: format!("skipped: {e}"),
    }
}

/// Runs every `(method, w, σ_p²)` combination. Brute-force cells that
/// exceed the search cap are returned as skipped rows when `skip_too_large`
/// is set and as errors otherwise.
pub fn run_optimize(
    bank: &mut SearchBank,
    methods: &[Method],
    ws: &[f64],
    skip_too_large: bool,
) -> Result<Vec<OptimizeRow>> {
    if methods.iter().any(|&m| is_joint(m)) && ws.is_empty() {
        return Err(Error::config("search.w", "joint methods need at least one weight"));
    }
    if let Some(&w) = ws.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(Error::config("search.w", format!("weights must lie in [0, 1], got {w}")));
    }
    let mut rows = Vec::new();
    for i in 0..bank.len() {
        let s2 = bank.tables[i].0;
        for &method in methods {
            let outcome: Result<Vec<(Option<f64>, SearchResult)>> = match method {
                Method::BfMis | Method::BfLoc => {
                    solve(bank.tables_mut(i), method, 0.0).map(|r| vec![(None, r)])
                }
                Method::BfJoint => solve_joint_bruteforce_sweep(bank.tables(i), ws)
                    .map(|rs| ws.iter().map(|&w| Some(w)).zip(rs).collect()),
                Method::Greedy => ws
                    .iter()
                    .map(|&w| solve_joint_greedy(bank.tables_mut(i), w).map(|r| (Some(w), r)))
                    .collect(),
            };
            match outcome {
                Ok(results) => rows.extend(results.into_iter().map(|(w, r)| OptimizeRow {
                    method,
                    w,
                    sigma_p2: s2,
                    result: Some(r),
                    note: String::new(),
                })),
                Err(e @ Error::TooLarge { .. }) if skip_too_large => {
                    let weights: Vec<Option<f64>> = if is_joint(method) {
                        ws.iter().map(|&w| Some(w)).collect()
                    } else {
                        vec![None]
                    };
                    rows.extend(weights.into_iter().map(|w| skipped(method, w, s2, &e)));
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(rows)
}

/// Optimization over the configured `σ_p²` list.
pub fn cmd_optimize(cfg: &ExperimentConfig, methods: &[Method], ws: &[f64]) -> Result<Vec<OptimizeRow>> {
    let mut bank = SearchBank::new(cfg)?;
    run_optimize(&mut bank, methods, ws, false)
}

pub fn optimize_csv(rows: &[OptimizeRow]) -> CsvTable {
    let mut t = CsvTable::new([
        "method", "w", "sigma_p2", "set", "objective", "eta_c", "p_error", "mis_evals", "pep_evals", "note",
    ]);
    for r in rows {
        let (set, obj, eta, p, mis, pep) = match &r.result {
            Some(x) => (
                fmt_set(&x.chosen_set),
                fmt_f64(x.objective),
                fmt_f64(x.eta_c),
                fmt_f64(x.p_err),
                x.counters.mis_evals.to_string(),
                x.counters.pep_evals.to_string(),
            ),
            None => ("skipped".into(), String::new(), String::new(), String::new(), String::new(), String::new()),
        };
        t.push([
            r.method.to_string(),
            fmt_opt(r.w),
            fmt_f64(r.sigma_p2),
            set,
            obj,
            eta,
            p,
            mis,
            pep,
            r.note.clone(),
        ]);
    }
    t
}

/// Trials of one `σ_p²`.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub sigma_p2: f64,
    pub scenario: Scenario,
    pub outcomes: Vec<TrialOutcome>,
    pub summary: SimulationSummary,
}

/// End-to-end rounds for `q` at every configured `σ_p²`.
pub fn cmd_simulate(cfg: &ExperimentConfig, q: &IndexSet, trials: usize, mode: TrialMode) -> Result<Vec<Simulation>> {
    if q.len() != cfg.system.nu {
        return Err(Error::SizeMismatch {
            expected: cfg.system.nu,
            got: q.len(),
        });
    }
    if trials == 0 {
        return Err(Error::config("run.trials", "must be at least 1"));
    }
    cfg.robustness
        .sigma_p2
        .iter()
        .enumerate()
        .map(|(i, &s2)| {
            let scenario = cfg.scenario(s2, q, derive_seed(cfg.run.seed, "simulate", i as u64))?;
            let outcomes = run_trials(&scenario, trials, mode)?;
            let summary = summarize(&scenario, &outcomes);
            Ok(Simulation {
                sigma_p2: s2,
                scenario,
                outcomes,
                summary,
            })
        })
        .collect()
}

/// Per-trial rows followed by one summary row per `σ_p²`.
pub fn simulate_csv(sims: &[Simulation]) -> CsvTable {
    let mut t = CsvTable::new([
        "row",
        "sigma_p2",
        "trial_seed",
        "true_set",
        "chosen_set",
        "wrong_entries",
        "mislocalized",
        "rel_error",
        "rate",
        "half_width",
        "error",
    ]);
    for sim in sims {
        let s2 = fmt_f64(sim.sigma_p2);
        for o in &sim.outcomes {
            t.push([
                o.trial.to_string(),
                s2.clone(),
                o.seed.to_string(),
                fmt_set(&o.true_set),
                fmt_set(&o.chosen),
                o.wrong_entries().to_string(),
                o.mislocalized.to_string(),
                fmt_opt(o.rel_error),
                String::new(),
                String::new(),
                o.error.clone().unwrap_or_default(),
            ]);
        }
        let s = &sim.summary;
        t.push([
            "summary".to_string(),
            s2,
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            s.localization.failures.to_string(),
            fmt_opt(s.max_rel_error),
            fmt_f64(s.localization.rate()),
            fmt_f64(s.localization.half_width()),
            if s.failed_trials > 0 {
                format!("{} trials could not be decoded", s.failed_trials)
            } else {
                String::new()
            },
        ]);
    }
    t
}

/// Per-entry decoder reports.
pub fn entries_csv(sims: &[Simulation]) -> CsvTable {
    let mut t = CsvTable::new([
        "sigma_p2", "trial", "entry_id", "estimated_a", "chosen_set", "true_set", "success", "residual",
    ]);
    for sim in sims {
        for o in &sim.outcomes {
            for (e, entry) in o.entries.iter().enumerate() {
                t.push([
                    fmt_f64(sim.sigma_p2),
                    o.trial.to_string(),
                    (e + 1).to_string(),
                    entry.estimated_a.to_string(),
                    fmt_set(&entry.chosen),
                    fmt_set(&o.true_set),
                    (entry.chosen == o.true_set).to_string(),
                    fmt_opt(entry.residual),
                ]);
            }
        }
    }
    t
}

/// The five reproduction tables.
#[derive(Clone, Debug, Default)]
pub struct TableSet {
    pub table1: CsvTable,
    pub table2: CsvTable,
    pub table3: CsvTable,
    pub table4: CsvTable,
    pub fig2: CsvTable,
}

impl TableSet {
    pub fn named(&self) -> [(&'static str, &CsvTable); 5] {
        [
            ("table1.csv", &self.table1),
            ("table2.csv", &self.table2),
            ("table3.csv", &self.table3),
            ("table4.csv", &self.table4),
            ("fig2.csv", &self.fig2),
        ]
    }

    pub fn write_all(&self, dir: &Path, hash: &str) -> Result<Vec<PathBuf>> {
        self.named()
            .iter()
            .map(|(name, table)| {
                let path = dir.join(name);
                table.write(&path, hash)?;
                Ok(path)
            })
            .collect()
    }
}

/// Header `row, set@s, eta_c@s, p_error@s, ...` over the `σ_p²` list.
fn wide_header(first: &str, sigmas: &[f64]) -> Vec<String> {
    let mut h = vec![first.to_string()];
    for s in sigmas {
        let s = fmt_f64(*s);
        h.push(format!("set@{s}"));
        h.push(format!("eta_c@{s}"));
        h.push(format!("p_error@{s}"));
    }
    h
}

fn wide_cells(r: Option<&SearchResult>) -> [String; 3] {
    match r {
        Some(r) => [fmt_set(&r.chosen_set), fmt_f64(r.eta_c), fmt_f64(r.p_err)],
        None => ["skipped".into(), String::new(), String::new()],
    }
}

fn find(rows: &[OptimizeRow], method: Method, w: Option<f64>, s2: f64) -> Option<&OptimizeRow> {
    rows.iter().find(|r| r.method == method && r.w == w && r.sigma_p2 == s2)
}

/// Reduced-scale configurations for the brute-force vs greedy comparison.
pub fn table3_configs(cfg: &ExperimentConfig) -> Vec<ExperimentConfig> {
    [13usize, 15]
        .into_iter()
        .map(|n| {
            let mut c = cfg.clone();
            c.system.n = n;
            c.system.nu = 8;
            c.system.t = 2;
            c.system.a = 2;
            c.system.unreliable = None;
            c.adversary = Default::default();
            c
        })
        .collect()
}

/// Computes every table. `progress` receives one line per finished stage.
pub fn cmd_tables(cfg: &ExperimentConfig, mut progress: impl FnMut(&str)) -> Result<TableSet> {
    let sigmas = cfg.robustness.sigma_p2.clone();
    let ws = cfg.search.w.clone();
    let mut bank = SearchBank::new(cfg)?;

    let main = run_optimize(&mut bank, &[Method::BfMis, Method::BfLoc], &[], true)?;
    progress("brute-force Q* and Z* done");
    let greedy = run_optimize(&mut bank, &[Method::Greedy], &ws, true)?;
    progress("greedy sweep done");

    let mut table1 = CsvTable::new(wide_header("assignment", &sigmas));
    for (label, method) in [("Q*", Method::BfMis), ("Z*", Method::BfLoc)] {
        let mut row = vec![label.to_string()];
        for &s2 in &sigmas {
            row.extend(wide_cells(find(&main, method, None, s2).and_then(|r| r.result.as_ref())));
        }
        table1.push(row);
    }

    let mut table2 = CsvTable::new(wide_header("w", &sigmas));
    for &w in &ws {
        let mut row = vec![fmt_f64(w)];
        for &s2 in &sigmas {
            row.extend(wide_cells(find(&greedy, Method::Greedy, Some(w), s2).and_then(|r| r.result.as_ref())));
        }
        table2.push(row);
    }

    // brute force vs greedy at reduced scale
    let mut table3 = CsvTable::new([
        "N", "nu", "w", "sigma_p2", "bf_set", "bf_objective", "greedy_set", "greedy_objective", "ratio", "same_set",
    ]);
    let mut small_counters = Vec::new();
    for small in table3_configs(cfg) {
        let mut small_bank = SearchBank::new(&small)?;
        let bf = run_optimize(&mut small_bank, &[Method::BfJoint], &ws, true)?;
        let gr = run_optimize(&mut small_bank, &[Method::Greedy], &ws, true)?;
        for &s2 in &sigmas {
            for &w in &ws {
                let b = find(&bf, Method::BfJoint, Some(w), s2).and_then(|r| r.result.as_ref());
                let g = find(&gr, Method::Greedy, Some(w), s2).and_then(|r| r.result.as_ref());
                let ratio = match (b, g) {
                    (Some(b), Some(g)) if b.objective > 0.0 => fmt_f64(g.objective / b.objective),
                    _ => String::new(),
                };
                table3.push([
                    small.system.n.to_string(),
                    small.system.nu.to_string(),
                    fmt_f64(w),
                    fmt_f64(s2),
                    b.map_or("skipped".into(), |r| fmt_set(&r.chosen_set)),
                    b.map_or(String::new(), |r| fmt_f64(r.objective)),
                    g.map_or("skipped".into(), |r| fmt_set(&r.chosen_set)),
                    g.map_or(String::new(), |r| fmt_f64(r.objective)),
                    ratio,
                    match (b, g) {
                        (Some(b), Some(g)) => (b.chosen_set == g.chosen_set).to_string(),
                        _ => String::new(),
                    },
                ]);
            }
        }
        let pick = |rows: &[OptimizeRow], m: Method| {
            rows.iter().find_map(|r| r.result.as_ref().filter(|_| r.method == m).map(|x| x.counters))
        };
        small_counters.push((small.clone(), pick(&bf, Method::BfJoint), pick(&gr, Method::Greedy)));
    }
    progress("reduced-scale comparison done");

    // complexity: counted vs closed form
    let mut table4 = CsvTable::new([
        "method",
        "N",
        "nu",
        "t",
        "A",
        "mis_formula",
        "mis_counted",
        "pep_formula",
        "pep_counted",
        "match",
    ]);
    let bf_main = {
        // one joint brute-force run at the main scale supplies the counted column
        match solve_joint_bruteforce_sweep(bank.tables(0), &[ws[0]]) {
            Ok(mut r) => Some(r.remove(0).counters),
            Err(Error::TooLarge { .. }) => None,
            Err(e) => return Err(e),
        }
    };
    let greedy_main = greedy
        .iter()
        .find_map(|r| r.result.as_ref().map(|x| x.counters));
    let mut counted: Vec<(ExperimentConfig, Option<ComplexityCounters>, Option<ComplexityCounters>)> =
        vec![(cfg.clone(), bf_main, greedy_main)];
    counted.extend(small_counters);
    for (c, bf, gr) in &counted {
        for (method, got) in [(Method::BfJoint, bf), (Method::Greedy, gr)] {
            let s = &c.system;
            let want = predicted_complexity(method, s.n, s.nu, s.t, s.a);
            let name = if method == Method::BfJoint { "brute-force" } else { "greedy" };
            table4.push([
                name.to_string(),
                s.n.to_string(),
                s.nu.to_string(),
                s.t.to_string(),
                s.a.to_string(),
                want.mis_evals.to_string(),
                got.map_or("skipped".into(), |g| g.mis_evals.to_string()),
                want.pep_evals.to_string(),
                got.map_or("skipped".into(), |g| g.pep_evals.to_string()),
                got.map_or(String::new(), |g| (g == want).to_string()),
            ]);
        }
    }
    progress("complexity table done");

    // greedy sweep with empirical localization rates
    let mut fig2 = CsvTable::new(["w", "sigma_p2", "set", "eta_c", "p_error", "empirical_rate", "half_width"]);
    let mut cache: BTreeMap<(usize, IndexSet), (f64, f64)> = BTreeMap::new();
    for (si, &s2) in sigmas.iter().enumerate() {
        for &w in &ws {
            let Some(r) = find(&greedy, Method::Greedy, Some(w), s2).and_then(|r| r.result.as_ref()) else {
                continue;
            };
            let key = (si, r.chosen_set.clone());
            let (rate, hw) = match cache.get(&key) {
                Some(v) => *v,
                None => {
                    let sc = cfg.scenario(s2, &r.chosen_set, derive_seed(cfg.run.seed, "fig2", si as u64))?;
                    let est = summarize(&sc, &run_trials(&sc, cfg.run.trials, TrialMode::LocalizeOnly)?).localization;
                    let v = (est.rate(), est.half_width());
                    cache.insert(key, v);
                    v
                }
            };
            fig2.push([
                fmt_f64(w),
                fmt_f64(s2),
                fmt_set(&r.chosen_set),
                fmt_f64(r.eta_c),
                fmt_f64(r.p_err),
                fmt_f64(rate),
                fmt_f64(hw),
            ]);
        }
    }
    progress("sweep simulation done");

    Ok(TableSet {
        table1,
        table2,
        table3,
        table4,
        fig2,
    })
}

/// Short end-to-end walk-through at the configured scale; returns a report.
pub fn cmd_demo(cfg: &ExperimentConfig, trials: usize) -> Result<String> {
    let mut out = String::new();
    let s2 = cfg.robustness.sigma_p2[0];
    let mut bank = SearchBank::new(cfg)?;
    let _ = writeln!(
        out,
        "system: N={} k={} t={} A={} nu={} D_f={} K={}",
        cfg.system.n,
        cfg.system.k,
        cfg.system.t,
        cfg.system.a,
        cfg.system.nu,
        cfg.system.d_f,
        cfg.threshold()
    );
    let mis = solve(bank.tables_mut(0), Method::BfMis, 0.0)?;
    let loc = solve(bank.tables_mut(0), Method::BfLoc, 0.0)?;
    let greedy = solve_joint_greedy(bank.tables_mut(0), 0.5)?;
    for r in [&mis, &loc, &greedy] {
        let _ = writeln!(
            out,
            "{:<8} w={:<4} set {{{}}} eta_c={:.3e} p_error={:.3e}",
            r.method.to_string(),
            r.w.map_or("-".into(), |w| w.to_string()),
            r.chosen_set,
            r.eta_c,
            r.p_err
        );
    }
    let sc = cfg.scenario(s2, &greedy.chosen_set, derive_seed(cfg.run.seed, "demo", 0))?;
    let outcomes = run_trials(&sc, trials, TrialMode::Full)?;
    let s = summarize(&sc, &outcomes);
    let _ = writeln!(
        out,
        "simulated {trials} rounds at sigma_p^2={s2:e} ({} arithmetic): mislocalized {}/{} (rate {:.3} +- {:.3}), max relative error {}",
        s.precision,
        s.localization.failures,
        s.localization.trials,
        s.localization.rate(),
        s.localization.half_width(),
        s.max_rel_error.map_or("n/a".into(), |e| format!("{e:.2e}"))
    );
    Ok(out)
}
