//! Simulated master/worker round.
//!
//! Workers are split into a reliable set and an unreliable set `V`; curious
//! and Byzantine workers may only sit in `V`. The master chooses which
//! evaluation indices `Q` go to `V` through a bijection `φ`, ships each share
//! to its worker over a channel, and collects `f(Y_i)` plus precision noise
//! (and a Byzantine error for corrupted workers).

use std::collections::BTreeMap;
use std::sync::mpsc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cheb::RealVectorCodeword;
use crate::codec::{PolyFunction, SharesBundle};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;
use crate::subsets::IndexSet;

/// RNG stream used to draw a random Byzantine set. Worker streams are the
/// (1-based) worker ids, the encoder uses stream 0.
pub const BYZANTINE_PICK_STREAM: u64 = u64::MAX;

/// Reliable/unreliable partition of the `N` workers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProfileSet {
    n: usize,
    unreliable: IndexSet,
}

impl ProfileSet {
    pub fn new(n: usize, unreliable: IndexSet) -> Result<Self> {
        unreliable.check_within(n, "unreliable set V")?;
        Ok(Self { n, unreliable })
    }

    /// `V = {N - ν + 1, ..., N}`.
    pub fn last(n: usize, nu: usize) -> Result<Self> {
        if nu > n {
            return Err(Error::config("system.nu", format!("nu = {nu} exceeds N = {n}")));
        }
        Self::new(n, IndexSet::from_zero_based(&(n - nu..n).collect::<Vec<_>>()))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nu(&self) -> usize {
        self.unreliable.len()
    }

    /// `ρ = N - ν`.
    pub fn rho(&self) -> usize {
        self.n - self.nu()
    }

    pub fn unreliable(&self) -> &IndexSet {
        &self.unreliable
    }

    pub fn reliable(&self) -> IndexSet {
        self.unreliable.complement(self.n)
    }

    /// Enforces the working regime `0 < ρ < K`.
    pub fn check_regime(&self, threshold: usize) -> Result<()> {
        let rho = self.rho();
        if rho == 0 || rho >= threshold {
            return Err(Error::config(
                "system.nu",
                format!("need 0 < rho < K, got rho = {rho}, K = {threshold}"),
            ));
        }
        Ok(())
    }
}

/// Bijection `φ` from evaluation indices to workers with `φ(Q) = V`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignmentMap {
    /// `phi[i - 1]` is the worker holding evaluation index `i`.
    phi: Vec<usize>,
    inverse: Vec<usize>,
    q_set: IndexSet,
}

impl AssignmentMap {
    /// Worker that receives evaluation index `i`.
    pub fn worker_of(&self, i: usize) -> usize {
        self.phi[i - 1]
    }

    /// Evaluation index held by worker `j`.
    pub fn eval_index_of(&self, j: usize) -> usize {
        self.inverse[j - 1]
    }

    pub fn q_set(&self) -> &IndexSet {
        &self.q_set
    }

    /// `V = φ(Q)`.
    pub fn unreliable(&self) -> IndexSet {
        IndexSet::new(self.q_set.iter().map(|i| self.worker_of(i)).collect())
            .expect("a bijection maps distinct indices to distinct workers")
    }

    pub fn n(&self) -> usize {
        self.phi.len()
    }

    /// Evaluation indices held by the given workers.
    pub fn eval_indices_of(&self, workers: &IndexSet) -> IndexSet {
        IndexSet::new(workers.iter().map(|j| self.eval_index_of(j)).collect())
            .expect("a bijection maps distinct workers to distinct indices")
    }
}

/// Pairs sorted `Q` with sorted `V` and the remaining indices with the
/// reliable workers, both in ascending order.
pub fn build_assignment(q_set: &IndexSet, profile: &ProfileSet) -> Result<AssignmentMap> {
    if q_set.len() != profile.nu() {
        return Err(Error::SizeMismatch {
            expected: profile.nu(),
            got: q_set.len(),
        });
    }
    let n = profile.n();
    q_set.check_within(n, "Q")?;
    let mut phi = vec![0; n];
    for (i, j) in q_set.iter().zip(profile.unreliable().iter()) {
        phi[i - 1] = j;
    }
    for (i, j) in q_set.complement(n).iter().zip(profile.reliable().iter()) {
        phi[i - 1] = j;
    }
    let mut inverse = vec![0; n];
    for (i, &j) in phi.iter().enumerate() {
        inverse[j - 1] = i + 1;
    }
    Ok(AssignmentMap {
        phi,
        inverse,
        q_set: q_set.clone(),
    })
}

/// How the Byzantine workers are chosen.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ByzantineSelection {
    /// Uniformly random `A`-subset of `V`, drawn from the round seed.
    Random,
    /// Fixed worker ids.
    Explicit(IndexSet),
}

/// Adversary and channel parameters of one round.
#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryConfig {
    pub a: usize,
    pub t: usize,
    pub sigma_p: f64,
    pub sigma_e: f64,
    pub stragglers: IndexSet,
    pub byzantine: ByzantineSelection,
    pub seed: u64,
}

impl AdversaryConfig {
    /// Default Byzantine error magnitude, `max(10³ σ_p, 1)`.
    pub fn default_sigma_e(sigma_p: f64) -> f64 {
        (1e3 * sigma_p).max(1.0)
    }

    /// `A` random Byzantine workers, no stragglers.
    pub fn random(a: usize, sigma_p: f64, seed: u64) -> Self {
        Self {
            a,
            t: 0,
            sigma_p,
            sigma_e: Self::default_sigma_e(sigma_p),
            stragglers: IndexSet::empty(),
            byzantine: ByzantineSelection::Random,
            seed,
        }
    }

    /// Resolves the Byzantine worker set inside `V`.
    pub fn byzantine_workers(&self, v: &IndexSet) -> Result<IndexSet> {
        if self.a > v.len() || self.t > v.len() {
            return Err(Error::config(
                "adversary",
                format!("A = {} and t = {} must not exceed nu = {}", self.a, self.t, v.len()),
            ));
        }
        match &self.byzantine {
            ByzantineSelection::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(BYZANTINE_PICK_STREAM);
                let mut picks = sample(&mut rng, v.len(), self.a).into_vec();
                picks.sort_unstable();
                let slice = v.as_slice();
                IndexSet::new(picks.into_iter().map(|p| slice[p]).collect())
            }
            ByzantineSelection::Explicit(set) => {
                if set.len() != self.a {
                    return Err(Error::config(
                        "adversary.byzantine_set",
                        format!("has {} workers but A = {}", set.len(), self.a),
                    ));
                }
                if !set.is_subset_of(v) {
                    return Err(Error::config(
                        "adversary.byzantine_set",
                        format!("Byzantine workers {{{set}}} must lie inside V = {{{v}}}"),
                    ));
                }
                Ok(set.clone())
            }
        }
    }
}

/// Outcome of one round, keyed by worker id (1-based).
#[derive(Clone, Debug)]
pub struct RoundResult<T> {
    /// Results of the workers that answered.
    pub returns: BTreeMap<usize, Mat<T>>,
    /// Ground truth `f(Y_{φ⁻¹(j)})` for every worker, stragglers included.
    pub clean: BTreeMap<usize, Mat<T>>,
    /// True Byzantine worker ids.
    pub byzantine: IndexSet,
    /// Injected Byzantine errors `E_j`.
    pub errors: BTreeMap<usize, Mat<T>>,
    pub out_shape: (usize, usize),
}

struct Job<T> {
    worker: usize,
    share: Mat<T>,
}

struct Reply<T> {
    worker: usize,
    clean: Mat<T>,
    error: Option<Mat<T>>,
    result: Option<Mat<T>>,
}

fn gaussian_like<T: Scalar>(shape: (usize, usize), std: f64, rng: &mut ChaCha8Rng) -> Result<Mat<T>> {
    if std == 0.0 {
        return Ok(Mat::zeros(shape.0, shape.1));
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(Mat::from_fn(shape.0, shape.1, |_, _| T::from_f64(normal.sample(rng))))
}

/// Body of a worker task: receive one share, compute, reply once.
fn run_worker<T: Scalar, F: PolyFunction>(
    inbox: mpsc::Receiver<Job<T>>,
    outbox: mpsc::Sender<Result<Reply<T>>>,
    f: &F,
    adv: &AdversaryConfig,
    is_byzantine: bool,
    is_straggler: bool,
) {
    let Ok(job) = inbox.recv() else { return };
    let reply = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(adv.seed);
        rng.set_stream(job.worker as u64);
        let clean = f.apply(&job.share);
        let shape = clean.shape();
        let precision = gaussian_like::<T>(shape, adv.sigma_p, &mut rng)?;
        let error = if is_byzantine {
            Some(gaussian_like::<T>(shape, adv.sigma_e, &mut rng)?)
        } else {
            None
        };
        let result = (!is_straggler).then(|| {
            let noisy = clean.add(&precision);
            match &error {
                Some(e) => noisy.add(e),
                None => noisy,
            }
        });
        Ok(Reply {
            worker: job.worker,
            clean,
            error,
            result,
        })
    })();
    let _ = outbox.send(reply);
}

/// Runs one round with every worker as its own task.
pub fn execute_round<T: Scalar, F: PolyFunction>(
    shares: &SharesBundle<T>,
    f: &F,
    map: &AssignmentMap,
    adv: &AdversaryConfig,
) -> Result<RoundResult<T>> {
    let n = shares.n();
    if map.n() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: map.n(),
        });
    }
    adv.stragglers.check_within(n, "stragglers")?;
    if !(adv.sigma_p >= 0.0 && adv.sigma_e >= 0.0) {
        return Err(Error::config("robustness", "noise levels must be non-negative"));
    }
    let byzantine = adv.byzantine_workers(&map.unreliable())?;
    let (rows, cols) = shares.shares[0].shape();
    let out_shape = f.output_shape(rows, cols)?;

    let (out_tx, out_rx) = mpsc::channel();
    rayon::scope(|scope| {
        for worker in 1..=n {
            let (in_tx, in_rx) = mpsc::channel();
            let out_tx = out_tx.clone();
            let is_byz = byzantine.contains(worker);
            let is_straggler = adv.stragglers.contains(worker);
            scope.spawn(move |_| run_worker(in_rx, out_tx, f, adv, is_byz, is_straggler));
            let share = shares.share(map.eval_index_of(worker)).clone();
            // The worker owns the receiver until it replies, so this cannot fail.
            let _ = in_tx.send(Job { worker, share });
        }
    });
    drop(out_tx);

    let mut round = RoundResult {
        returns: BTreeMap::new(),
        clean: BTreeMap::new(),
        byzantine,
        errors: BTreeMap::new(),
        out_shape,
    };
    for reply in out_rx {
        let reply = reply?;
        if let Some(r) = reply.result {
            round.returns.insert(reply.worker, r);
        }
        if let Some(e) = reply.error {
            round.errors.insert(reply.worker, e);
        }
        round.clean.insert(reply.worker, reply.clean);
    }
    Ok(round)
}

impl<T: Scalar> RoundResult<T> {
    /// Evaluation indices of the Byzantine workers.
    pub fn byzantine_eval_indices(&self, map: &AssignmentMap) -> IndexSet {
        map.eval_indices_of(&self.byzantine)
    }

    /// Clean per-entry codewords (all `N` positions), for oracles.
    pub fn clean_codewords(&self, map: &AssignmentMap) -> Vec<RealVectorCodeword<T>> {
        let (u, h) = self.out_shape;
        (0..u * h)
            .map(|e| {
                RealVectorCodeword::full(
                    (1..=map.n())
                        .map(|i| self.clean[&map.worker_of(i)].as_slice()[e])
                        .collect(),
                )
            })
            .collect()
    }
}

/// Re-indexes the returned matrices by evaluation index and slices them into
/// one codeword per output entry (row-major).
pub fn scalar_codewords<T: Scalar>(round: &RoundResult<T>, map: &AssignmentMap) -> Vec<RealVectorCodeword<T>> {
    let n = map.n();
    let received: Vec<(usize, &Mat<T>)> = (1..=n)
        .filter_map(|i| round.returns.get(&map.worker_of(i)).map(|m| (i, m)))
        .collect();
    let positions: Vec<usize> = received.iter().map(|&(i, _)| i).collect();
    let (u, h) = round.out_shape;
    (0..u * h)
        .map(|e| {
            let samples = received.iter().map(|(_, m)| m.as_slice()[e]).collect();
            RealVectorCodeword::partial(n, positions.clone(), samples)
                .expect("positions are ascending evaluation indices")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode, BuiltinFn, Dataset, EncodingSpec};

    fn set(v: &[usize]) -> IndexSet {
        IndexSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sorted_pairing() {
        let p = ProfileSet::new(4, set(&[2, 4])).unwrap();
        let m = build_assignment(&set(&[1, 3]), &p).unwrap();
        assert_eq!((1..=4).map(|i| m.worker_of(i)).collect::<Vec<_>>(), vec![2, 1, 4, 3]);
        assert_eq!(m.eval_index_of(2), 1);
        let id = build_assignment(&set(&[2, 4]), &p).unwrap();
        assert_eq!((1..=4).map(|i| id.worker_of(i)).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert!(matches!(build_assignment(&set(&[1]), &p), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn regime_check() {
        let p = ProfileSet::last(21, 12).unwrap();
        assert!(p.check_regime(11).is_ok());
        assert!(ProfileSet::last(21, 21).unwrap().check_regime(11).is_err());
        assert!(ProfileSet::last(21, 5).unwrap().check_regime(11).is_err());
    }

    fn small_round(adv: &AdversaryConfig) -> Result<(RoundResult<f64>, AssignmentMap)> {
        let ds = Dataset::random(2, 2, 2, 1.0, 1).unwrap();
        let spec = EncodingSpec { k: 2, t: 1, sigma_n: 1.0, seed: 2 };
        let shares = encode::<f64>(&ds, &spec, 9).unwrap();
        let profile = ProfileSet::last(9, 5).unwrap();
        let map = build_assignment(&set(&[1, 3, 5, 7, 9]), &profile).unwrap();
        let r = execute_round(&shares, &BuiltinFn::EntrywisePower(2), &map, adv)?;
        Ok((r, map))
    }

    #[test]
    fn clean_round_returns_clean_values() {
        let (r, map) = small_round(&AdversaryConfig::random(0, 0.0, 3)).unwrap();
        assert_eq!(r.returns.len(), 9);
        for (j, m) in &r.returns {
            assert_eq!(m.as_slice(), r.clean[j].as_slice());
        }
        let cws = scalar_codewords(&r, &map);
        assert_eq!(cws.len(), 4);
        assert!(cws.iter().all(|c| c.is_complete() && c.len() == 9));
    }

    #[test]
    fn byzantine_workers_differ_and_sit_in_v() {
        let (r, _) = small_round(&AdversaryConfig::random(3, 0.0, 5)).unwrap();
        assert_eq!(r.byzantine.len(), 3);
        assert!(r.byzantine.iter().all(|j| j >= 5));
        let differing: Vec<usize> = r
            .returns
            .iter()
            .filter(|(j, m)| m.as_slice() != r.clean[*j].as_slice())
            .map(|(j, _)| *j)
            .collect();
        assert_eq!(differing, r.byzantine.as_slice());
    }

    #[test]
    fn explicit_byzantine_outside_v_is_rejected() {
        let mut adv = AdversaryConfig::random(1, 0.0, 1);
        adv.byzantine = ByzantineSelection::Explicit(set(&[1]));
        assert!(matches!(small_round(&adv), Err(Error::Config { .. })));
    }

    #[test]
    fn stragglers_are_absent() {
        let mut adv = AdversaryConfig::random(0, 0.0, 1);
        adv.stragglers = set(&[2, 6]);
        let (r, map) = small_round(&adv).unwrap();
        assert_eq!(r.returns.len(), 7);
        let cw = &scalar_codewords(&r, &map)[0];
        assert_eq!(cw.len(), 7);
        assert!(!cw.positions().contains(&map.eval_index_of(2)));
    }

    #[test]
    fn rounds_are_deterministic() {
        let adv = AdversaryConfig::random(2, 0.1, 9);
        let (a, _) = small_round(&adv).unwrap();
        let (b, _) = small_round(&adv).unwrap();
        assert_eq!(a.byzantine, b.byzantine);
        for (j, m) in &a.returns {
            assert_eq!(m.as_slice(), b.returns[j].as_slice());
        }
    }
}
