//! Seeded end-to-end rounds: encode, assign, execute, decode, reconstruct.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{direct_outputs, relative_error, BuiltinFn, Dataset, Encoder, EncodingSpec, PolyFunction, RecoverySpec};
use crate::decoder::{decode_round_with, fuse_locations, locate_round, DecodeContext, DecoderConfig};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::metrics::RateEstimate;
use crate::scalar::{Scalar, Wide};
use crate::subsets::IndexSet;
use crate::worker::{build_assignment, execute_round, scalar_codewords, AdversaryConfig, AssignmentMap, ByzantineSelection, ProfileSet};

/// Child seed for task `(label, index)`: the first eight bytes of
/// `SHA-256(seed ‖ label ‖ index)`, little endian.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Arithmetic used by the simulation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// `f64` when the scenario's dynamic range allows it, else 256-bit.
    #[default]
    Auto,
    F64,
    Wide,
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Precision::Auto),
            "f64" => Ok(Precision::F64),
            "wide" | "f256" => Ok(Precision::Wide),
            other => Err(Error::Parse(format!("unknown precision `{other}` (auto, f64, wide)"))),
        }
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::Auto => "auto",
            Precision::F64 => "f64",
            Precision::Wide => "wide",
        })
    }
}

/// Decimal digits of `f64` we are willing to spend.
const F64_DIGITS: f64 = 13.0;

/// Everything one simulated round depends on, apart from the trial seed.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub function: BuiltinFn,
    pub y: f64,
    pub sigma_n: f64,
    pub sigma_p: f64,
    pub sigma_e: f64,
    pub a: usize,
    /// Shape of each data matrix.
    pub dims: (usize, usize),
    /// Fixed data; `None` draws fresh data from `[-y, y]` every trial.
    pub dataset: Option<Dataset>,
    pub profile: ProfileSet,
    pub q_set: IndexSet,
    pub stragglers: IndexSet,
    pub byzantine: ByzantineSelection,
    pub decoder: DecoderConfig,
    pub precision: Precision,
    pub seed: u64,
}

impl Scenario {
    /// Recovery threshold `K` of this scenario.
    pub fn threshold(&self) -> usize {
        crate::codec::recovery_threshold(self.k, self.t, self.function.degree())
    }

    pub fn validate(&self) -> Result<()> {
        let rec = RecoverySpec::new(self.k, self.t, self.function.degree(), self.n)?;
        if self.profile.n() != self.n {
            return Err(Error::config(
                "system.N",
                format!("profile has {} workers but N = {}", self.profile.n(), self.n),
            ));
        }
        self.profile.check_regime(rec.threshold)?;
        if self.q_set.len() != self.profile.nu() {
            return Err(Error::SizeMismatch {
                expected: self.profile.nu(),
                got: self.q_set.len(),
            });
        }
        self.q_set.check_within(self.n, "q_set")?;
        self.stragglers.check_within(self.n, "stragglers")?;
        if self.stragglers.len() > rec.s_max {
            return Err(Error::config(
                "adversary.stragglers",
                format!("{} stragglers but at most N - K = {} are tolerated", self.stragglers.len(), rec.s_max),
            ));
        }
        if self.a > self.profile.nu() || self.t > self.profile.nu() {
            return Err(Error::config("system", "A and t must not exceed nu"));
        }
        if self.dims.0 == 0 || self.dims.1 == 0 {
            return Err(Error::config("run.dims", "matrix dimensions must be positive"));
        }
        if let Some(d) = &self.dataset {
            if d.k() != self.k {
                return Err(Error::SizeMismatch {
                    expected: self.k,
                    got: d.k(),
                });
            }
        }
        for (field, v) in [
            ("privacy.y", self.y),
            ("privacy.sigma_n", self.sigma_n),
            ("robustness.sigma_p2", self.sigma_p),
            ("robustness.sigma_e", self.sigma_e),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be a finite non-negative number"));
            }
        }
        Ok(())
    }

    /// Decimal digits needed to resolve the smallest meaningful quantity
    /// (the precision noise, or the outputs themselves) against the largest
    /// worker result, with six digits of margin for conditioning.
    pub fn required_digits(&self) -> f64 {
        let d = self.function.degree() as i32;
        let y = self.dataset.as_ref().map_or(self.y, Dataset::y).max(f64::MIN_POSITIVE);
        let share = y + 4.0 * self.sigma_n;
        let largest = share.powi(d) * (self.dims.0.max(self.dims.1) as f64);
        let output = y.powi(d);
        let smallest = if self.sigma_p > 0.0 { self.sigma_p.min(output) } else { output };
        (largest / smallest).log10().max(0.0) + 6.0
    }

    /// Concrete arithmetic after resolving [`Precision::Auto`].
    pub fn resolved_precision(&self) -> Precision {
        match self.precision {
            Precision::Auto if self.required_digits() <= F64_DIGITS => Precision::F64,
            Precision::Auto => Precision::Wide,
            p => p,
        }
    }
}

/// What a trial computes after localization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrialMode {
    /// Localization, correction and reconstruction of `f(X_r)`.
    Full,
    /// Localization only.
    LocalizeOnly,
}

/// Localization of one output entry.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryOutcome {
    pub estimated_a: usize,
    pub chosen: IndexSet,
    /// Fit residual after erasing `chosen` (full mode).
    pub residual: Option<f64>,
}

/// Outcome of one simulated round.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    /// Evaluation indices held by the Byzantine workers.
    pub true_set: IndexSet,
    /// Majority vote of the per-entry location sets.
    pub chosen: IndexSet,
    pub entries: Vec<EntryOutcome>,
    /// Some entry's location set differs from `true_set`.
    pub mislocalized: bool,
    /// Relative reconstruction error (full mode).
    pub rel_error: Option<f64>,
    /// Decoder failure, if the round could not be decoded.
    pub error: Option<String>,
}

impl TrialOutcome {
    /// Entries whose location set differs from `true_set`.
    pub fn wrong_entries(&self) -> usize {
        self.entries.iter().filter(|e| e.chosen != self.true_set).count()
    }
}

/// Aggregate of a batch of trials.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationSummary {
    pub precision: Precision,
    /// Mislocalization count over the trials that decoded.
    pub localization: RateEstimate,
    pub failed_trials: usize,
    pub max_rel_error: Option<f64>,
    pub mean_rel_error: Option<f64>,
}

/// Cached grids, basis and assignment for one scenario in one arithmetic.
pub struct Pipeline<'a, T> {
    scenario: &'a Scenario,
    encoder: Encoder<T>,
    decode: DecodeContext<T>,
    map: AssignmentMap,
    threshold: usize,
}

impl<'a, T: Scalar> Pipeline<'a, T> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate()?;
        Ok(Self {
            encoder: Encoder::new(scenario.k, scenario.t, scenario.n)?,
            decode: DecodeContext::new(scenario.n)?,
            map: build_assignment(&scenario.q_set, &scenario.profile)?,
            threshold: scenario.threshold(),
            scenario,
        })
    }

    pub fn map(&self) -> &AssignmentMap {
        &self.map
    }

    fn decoder_config(&self) -> DecoderConfig {
        let mut cfg = self.scenario.decoder.clone();
        if cfg.a_max.is_none() {
            cfg.a_max = Some(self.scenario.a);
        }
        if cfg.count.sigma_p == 0.0 {
            cfg.count.sigma_p = self.scenario.sigma_p;
        }
        cfg
    }

    /// Runs trial `index`; decoder failures are reported in the outcome.
    pub fn run_trial(&self, index: usize, mode: TrialMode) -> Result<TrialOutcome> {
        let sc = self.scenario;
        let seed = derive_seed(sc.seed, "trial", index as u64);
        let drawn;
        let dataset = match &sc.dataset {
            Some(d) => d,
            None => {
                drawn = Dataset::random(sc.k, sc.dims.0, sc.dims.1, sc.y, derive_seed(seed, "data", 0))?;
                &drawn
            }
        };
        let spec = EncodingSpec {
            k: sc.k,
            t: sc.t,
            sigma_n: sc.sigma_n,
            seed: derive_seed(seed, "encode", 0),
        };
        let shares = self.encoder.encode(dataset, &spec)?;
        let adv = AdversaryConfig {
            a: sc.a,
            t: sc.t,
            sigma_p: sc.sigma_p,
            sigma_e: sc.sigma_e,
            stragglers: sc.stragglers.clone(),
            byzantine: sc.byzantine.clone(),
            seed: derive_seed(seed, "adversary", 0),
        };
        let round = execute_round(&shares, &sc.function, &self.map, &adv)?;
        let true_set = round.byzantine_eval_indices(&self.map);
        let codewords = scalar_codewords(&round, &self.map);
        let cfg = self.decoder_config();
        let candidates = &sc.q_set;

        let mut outcome = TrialOutcome {
            trial: index,
            seed,
            true_set: true_set.clone(),
            chosen: IndexSet::empty(),
            entries: Vec::new(),
            mislocalized: false,
            rel_error: None,
            error: None,
        };
        let decoded = match mode {
            TrialMode::LocalizeOnly => locate_round(&self.decode, &codewords, self.threshold, candidates, &cfg)
                .map(|reports| (reports, None)),
            TrialMode::Full => decode_round_with(&self.decode, &codewords, self.threshold, candidates, &cfg)
                .map(|d| (d.reports, Some(d.corrected))),
        };
        let (reports, corrected) = match decoded {
            Ok(v) => v,
            Err(e) if e.exit_code() == 4 || matches!(e, Error::Unsupported(_)) => {
                outcome.error = Some(e.to_string());
                outcome.mislocalized = true;
                return Ok(outcome);
            }
            Err(e) => return Err(e),
        };
        outcome.entries = reports
            .iter()
            .enumerate()
            .map(|(e, r)| EntryOutcome {
                estimated_a: r.estimated_a,
                chosen: r.chosen.clone(),
                residual: corrected.as_ref().map(|c| c[e].residual.to_f64()),
            })
            .collect();
        outcome.mislocalized = outcome.wrong_entries() > 0;
        let sets: Vec<IndexSet> = reports.iter().map(|r| r.chosen.clone()).collect();
        outcome.chosen = fuse_locations(&sets, sc.n);
        if let Some(corrected) = corrected {
            let (u, h) = round.out_shape;
            let enc = self.encoder.enc_grid();
            let mut got = vec![Mat::<T>::zeros(u, h); sc.k];
            for (entry, c) in corrected.iter().enumerate() {
                for (r, out) in got.iter_mut().enumerate() {
                    out.set(entry / h, entry % h, c.poly.eval(enc.node(r + 1)));
                }
            }
            let want = direct_outputs::<T>(dataset, &sc.function);
            outcome.rel_error = Some(relative_error(&got, &want));
        }
        Ok(outcome)
    }

    /// Trials `0..trials` in parallel, returned in trial order.
    pub fn run_trials(&self, trials: usize, mode: TrialMode) -> Result<Vec<TrialOutcome>> {
        (0..trials).into_par_iter().map(|i| self.run_trial(i, mode)).collect()
    }
}

/// Runs `trials` rounds of `scenario` in its resolved precision.
pub fn run_trials(scenario: &Scenario, trials: usize, mode: TrialMode) -> Result<Vec<TrialOutcome>> {
    match scenario.resolved_precision() {
        Precision::Wide => Pipeline::<Wide>::new(scenario)?.run_trials(trials, mode),
        _ => Pipeline::<f64>::new(scenario)?.run_trials(trials, mode),
    }
}

pub fn summarize(scenario: &Scenario, outcomes: &[TrialOutcome]) -> SimulationSummary {
    let decoded: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.error.is_none()).collect();
    let errs: Vec<f64> = decoded.iter().filter_map(|o| o.rel_error).collect();
    SimulationSummary {
        precision: scenario.resolved_precision(),
        localization: RateEstimate {
            failures: decoded.iter().filter(|o| o.mislocalized).count(),
            trials: decoded.len(),
        },
        failed_trials: outcomes.len() - decoded.len(),
        max_rel_error: errs.iter().copied().reduce(f64::max),
        mean_rel_error: (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64),
    }
}

/// Fraction of rounds whose localization misses the true Byzantine set.
pub fn empirical_localization_error(scenario: &Scenario, trials: usize) -> Result<RateEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is needed".into()));
    }
    let outcomes = run_trials(scenario, trials, TrialMode::LocalizeOnly)?;
    Ok(RateEstimate {
        failures: outcomes.iter().filter(|o| o.mislocalized).count(),
        trials: outcomes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn table1(q: &[usize], sigma_p2: f64) -> Scenario {
        let sigma_p = sigma_p2.sqrt();
        Scenario {
            n: 21,
            k: 3,
            t: 3,
            function: BuiltinFn::EntrywisePower(2),
            y: 1e10,
            sigma_n: 1e23,
            sigma_p,
            sigma_e: AdversaryConfig::default_sigma_e(sigma_p),
            a: 3,
            dims: (2, 2),
            dataset: None,
            profile: ProfileSet::last(21, 12).unwrap(),
            q_set: IndexSet::new(q.to_vec()).unwrap(),
            stragglers: IndexSet::empty(),
            byzantine: ByzantineSelection::Random,
            decoder: DecoderConfig::default(),
            precision: Precision::Auto,
            seed: 7,
        }
    }

    const Q_STAR: [usize; 12] = [4, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21];

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(1, "trial", 0), derive_seed(1, "trial", 0));
        assert_ne!(derive_seed(1, "trial", 0), derive_seed(1, "trial", 1));
        assert_ne!(derive_seed(1, "trial", 0), derive_seed(1, "data", 0));
        assert_ne!(derive_seed(1, "trial", 0), derive_seed(2, "trial", 0));
    }

    #[test]
    fn auto_precision() {
        assert_eq!(table1(&Q_STAR, 0.0).resolved_precision(), Precision::Wide);
        let mut small = table1(&Q_STAR, 1e-4);
        small.y = 1.0;
        small.sigma_n = 1.0;
        assert_eq!(small.resolved_precision(), Precision::F64);
    }

    #[test]
    fn exact_regime_recovers_outputs() {
        let sc = table1(&Q_STAR, 0.0);
        let out = run_trials(&sc, 3, TrialMode::Full).unwrap();
        for o in &out {
            assert!(o.error.is_none(), "{o:?}");
            assert!(!o.mislocalized, "{o:?}");
            assert_eq!(o.chosen, o.true_set);
            assert!(o.rel_error.unwrap() < 1e-6, "{o:?}");
        }
    }

    #[test]
    fn stragglers_without_byzantine_workers() {
        let mut sc = table1(&Q_STAR, 0.0);
        sc.a = 0;
        sc.stragglers = IndexSet::new((1..=10).collect()).unwrap();
        let out = run_trials(&sc, 2, TrialMode::Full).unwrap();
        assert!(out.iter().all(|o| o.rel_error.unwrap() < 1e-6), "{out:?}");
        sc.a = 3;
        let out = run_trials(&sc, 1, TrialMode::Full).unwrap();
        assert!(out[0].error.as_deref().unwrap().contains("stragglers"));
    }

    #[test]
    fn deterministic_across_runs() {
        let sc = table1(&Q_STAR, 1e-2);
        let a = run_trials(&sc, 4, TrialMode::LocalizeOnly).unwrap();
        let b = run_trials(&sc, 4, TrialMode::LocalizeOnly).unwrap();
        assert_eq!(a, b);
    }
}
