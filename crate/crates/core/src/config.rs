//! Experiment configuration: a TOML file with sections `system`, `privacy`,
//! `robustness`, `search`, `run`, `adversary` and `decoder`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assign::{Method, SearchProblem, SEARCH_CAP};
use crate::codec::{recovery_threshold, BuiltinFn, PolyFunction};
use crate::decoder::{decoding_radius, CountThreshold, DecoderConfig, LocateStrategy, BRUTE_FORCE_CAP};
use crate::error::{Error, Result};
use crate::metrics::{DeltaRule, LeakageParams, SurrogateParams, ENUMERATION_CAP};
use crate::sim::{Precision, Scenario};
use crate::subsets::IndexSet;
use crate::worker::{AdversaryConfig, ByzantineSelection, ProfileSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub t: usize,
    #[serde(rename = "A")]
    pub a: usize,
    pub nu: usize,
    #[serde(rename = "D_f")]
    pub d_f: usize,
    /// Worker map; defaults to the entrywise power `D_f`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    /// Unreliable workers `V`; defaults to the last `nu` workers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unreliable: Option<IndexSet>,
    /// Shape `[m, n]` of each data matrix.
    #[serde(default = "default_dims")]
    pub dims: [usize; 2],
}

fn default_dims() -> [usize; 2] {
    [2, 2]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySection {
    pub y: f64,
    pub sigma_n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessSection {
    pub sigma_p2: Vec<f64>,
    /// Byzantine error standard deviation; defaults to `max(1e3 σ_p, 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_e: Option<f64>,
    pub zeta: f64,
    #[serde(default)]
    pub delta_rule: DeltaRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub w: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Largest number of `nu`-subsets a brute-force search may visit.
    #[serde(default = "default_search_cap")]
    pub cap: u64,
    /// Largest number of error sets enumerated by a single surrogate.
    #[serde(default = "default_enumeration_cap")]
    pub enumeration_cap: u64,
}

fn default_methods() -> Vec<Method> {
    vec![Method::BfMis, Method::BfLoc, Method::BfJoint, Method::Greedy]
}

fn default_search_cap() -> u64 {
    SEARCH_CAP as u64
}

fn default_enumeration_cap() -> u64 {
    ENUMERATION_CAP as u64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub trials: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub precision: Precision,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ByzantineMode {
    #[default]
    Random,
    Explicit,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySection {
    #[serde(default)]
    pub byzantine_mode: ByzantineMode,
    /// Worker ids, required when `byzantine_mode = "explicit"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub byzantine_set: Option<IndexSet>,
    #[serde(default)]
    pub stragglers: IndexSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSection {
    #[serde(default)]
    pub strategy: LocateStrategy,
    #[serde(default = "yes")]
    pub estimate_count: bool,
    #[serde(default)]
    pub brute_force: bool,
    #[serde(default = "default_bf_cap")]
    pub brute_force_cap: u64,
    #[serde(default = "default_noise_factor")]
    pub noise_factor: f64,
}

fn yes() -> bool {
    true
}

fn default_bf_cap() -> u64 {
    BRUTE_FORCE_CAP as u64
}

fn default_noise_factor() -> f64 {
    CountThreshold::default().noise_factor
}

impl Default for DecoderSection {
    fn default() -> Self {
        Self {
            strategy: LocateStrategy::default(),
            estimate_count: true,
            brute_force: false,
            brute_force_cap: default_bf_cap(),
            noise_factor: default_noise_factor(),
        }
    }
}

/// Parsed and validated experiment configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    pub privacy: PrivacySection,
    pub robustness: RobustnessSection,
    pub search: SearchSection,
    pub run: RunSection,
    #[serde(default)]
    pub adversary: AdversarySection,
    #[serde(default)]
    pub decoder: DecoderSection,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be a finite positive number, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config {
            field: "config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    /// Reference parameter set: N=21, D_f=2, nu=12, k=3, t=A=3,
    /// y=1e10, sigma_n=1e23, zeta=100.
    pub fn table1() -> Self {
        Self {
            system: SystemSection {
                n: 21,
                k: 3,
                t: 3,
                a: 3,
                nu: 12,
                d_f: 2,
                function: None,
                unreliable: None,
                dims: default_dims(),
            },
            privacy: PrivacySection { y: 1e10, sigma_n: 1e23 },
            robustness: RobustnessSection {
                sigma_p2: vec![1e-2, 1e-3, 1e-4],
                sigma_e: None,
                zeta: 100.0,
                delta_rule: DeltaRule::PerPairMax,
            },
            search: SearchSection {
                w: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
                methods: default_methods(),
                cap: default_search_cap(),
                enumeration_cap: default_enumeration_cap(),
            },
            run: RunSection {
                seed: 1,
                trials: 2000,
                output_dir: PathBuf::from("out"),
                precision: Precision::Auto,
            },
            adversary: AdversarySection::default(),
            decoder: DecoderSection::default(),
        }
    }

    /// The reference set scaled down to N=13, nu=8, t=A=2.
    pub fn table3() -> Self {
        let mut cfg = Self::table1();
        cfg.system.n = 13;
        cfg.system.nu = 8;
        cfg.system.t = 2;
        cfg.system.a = 2;
        cfg.search.w = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        cfg
    }

    pub fn function(&self) -> Result<BuiltinFn> {
        match &self.system.function {
            Some(name) => name.parse().map_err(|_| Error::config("system.function", format!("unknown function `{name}`"))),
            None => u32::try_from(self.system.d_f)
                .map(BuiltinFn::EntrywisePower)
                .map_err(|_| Error::config("system.D_f", "too large")),
        }
    }

    /// Recovery threshold `K = (k + t - 1) D_f + 1`.
    pub fn threshold(&self) -> usize {
        recovery_threshold(self.system.k, self.system.t, self.system.d_f)
    }

    pub fn profile(&self) -> Result<ProfileSet> {
        match &self.system.unreliable {
            Some(v) => {
                if v.len() != self.system.nu {
                    return Err(Error::config(
                        "system.unreliable",
                        format!("has {} workers but nu = {}", v.len(), self.system.nu),
                    ));
                }
                ProfileSet::new(self.system.n, v.clone())
            }
            None => ProfileSet::last(self.system.n, self.system.nu),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        if s.k == 0 {
            return Err(Error::config("system.k", "must be at least 1"));
        }
        if s.t == 0 {
            return Err(Error::config("system.t", "must be at least 1"));
        }
        if s.d_f == 0 {
            return Err(Error::config("system.D_f", "must be at least 1"));
        }
        let f = self.function()?;
        if f.degree() != s.d_f {
            return Err(Error::config(
                "system.function",
                format!("`{f}` has degree {} but D_f = {}", f.degree(), s.d_f),
            ));
        }
        f.output_shape(s.dims[0], s.dims[1])
            .map_err(|e| Error::config("system.dims", e.to_string()))?;
        if s.dims.contains(&0) {
            return Err(Error::config("system.dims", "dimensions must be positive"));
        }
        let k_rec = self.threshold();
        if k_rec > s.n {
            return Err(Error::config("system.N", format!("K = {k_rec} exceeds N = {}", s.n)));
        }
        if s.nu > s.n {
            return Err(Error::config("system.nu", format!("nu = {} exceeds N = {}", s.nu, s.n)));
        }
        if s.t > s.nu {
            return Err(Error::config("system.t", format!("t = {} exceeds nu = {}", s.t, s.nu)));
        }
        if s.a >= s.nu {
            return Err(Error::config("system.A", format!("need A < nu, got A = {} and nu = {}", s.a, s.nu)));
        }
        let radius = decoding_radius(s.n, k_rec);
        if s.a > radius {
            return Err(Error::config(
                "system.A",
                format!("A = {} exceeds the decoding radius floor((N - K)/2) = {radius}", s.a),
            ));
        }
        self.profile()?.check_regime(k_rec)?;

        positive("privacy.y", self.privacy.y)?;
        positive("privacy.sigma_n", self.privacy.sigma_n)?;

        let r = &self.robustness;
        if r.sigma_p2.is_empty() {
            return Err(Error::config("robustness.sigma_p2", "list must not be empty"));
        }
        for &v in &r.sigma_p2 {
            positive("robustness.sigma_p2", v)?;
        }
        if let Some(e) = r.sigma_e {
            positive("robustness.sigma_e", e)?;
        }
        positive("robustness.zeta", r.zeta)?;

        if self.search.w.is_empty() {
            return Err(Error::config("search.w", "list must not be empty"));
        }
        if let Some(&w) = self.search.w.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::config("search.w", format!("weights must lie in [0, 1], got {w}")));
        }
        if self.search.methods.is_empty() {
            return Err(Error::config("search.methods", "list must not be empty"));
        }
        if self.search.cap == 0 || self.search.enumeration_cap == 0 {
            return Err(Error::config("search", "caps must be positive"));
        }

        if self.run.trials == 0 {
            return Err(Error::config("run.trials", "must be at least 1"));
        }

        let adv = &self.adversary;
        adv.stragglers.check_within(s.n, "adversary.stragglers")?;
        match (adv.byzantine_mode, &adv.byzantine_set) {
            (ByzantineMode::Explicit, None) => {
                return Err(Error::config("adversary.byzantine_set", "required when byzantine_mode = \"explicit\""));
            }
            (ByzantineMode::Explicit, Some(set)) => {
                if set.len() != s.a {
                    return Err(Error::config(
                        "adversary.byzantine_set",
                        format!("has {} workers but A = {}", set.len(), s.a),
                    ));
                }
                if !set.is_subset_of(self.profile()?.unreliable()) {
                    return Err(Error::config("adversary.byzantine_set", "Byzantine workers must lie inside V"));
                }
            }
            (ByzantineMode::Random, _) => {}
        }
        if self.decoder.brute_force_cap == 0 {
            return Err(Error::config("decoder.brute_force_cap", "must be positive"));
        }
        if !(self.decoder.noise_factor >= 0.0) {
            return Err(Error::config("decoder.noise_factor", "must be non-negative"));
        }
        Ok(())
    }

    pub fn leakage(&self) -> LeakageParams {
        LeakageParams {
            y: self.privacy.y,
            sigma_n: self.privacy.sigma_n,
            t: self.system.t,
        }
    }

    pub fn surrogate(&self, sigma_p2: f64) -> SurrogateParams {
        SurrogateParams {
            zeta: self.robustness.zeta,
            sigma_p2,
            a: self.system.a,
            delta_rule: self.robustness.delta_rule,
        }
    }

    pub fn search_problem(&self, sigma_p2: f64) -> SearchProblem {
        SearchProblem {
            n: self.system.n,
            nu: self.system.nu,
            k: self.system.k,
            leakage: self.leakage(),
            surrogate: self.surrogate(sigma_p2),
            cap: self.search.cap as u128,
        }
    }

    pub fn decoder_config(&self, sigma_p: f64) -> DecoderConfig {
        DecoderConfig {
            a_max: Some(self.system.a),
            count: CountThreshold {
                sigma_p,
                noise_factor: self.decoder.noise_factor,
                ..CountThreshold::default()
            },
            estimate_count: self.decoder.estimate_count,
            brute_force: self.decoder.brute_force,
            brute_force_cap: self.decoder.brute_force_cap as u128,
            strategy: self.decoder.strategy,
        }
    }

    /// Simulation scenario at precision-noise variance `sigma_p2` with the
    /// evaluation indices `q_set` on `V`.
    pub fn scenario(&self, sigma_p2: f64, q_set: &IndexSet, seed: u64) -> Result<Scenario> {
        let sigma_p = sigma_p2.sqrt();
        let byzantine = match (&self.adversary.byzantine_mode, &self.adversary.byzantine_set) {
            (ByzantineMode::Explicit, Some(set)) => ByzantineSelection::Explicit(set.clone()),
            _ => ByzantineSelection::Random,
        };
        let sc = Scenario {
            n: self.system.n,
            k: self.system.k,
            t: self.system.t,
            function: self.function()?,
            y: self.privacy.y,
            sigma_n: self.privacy.sigma_n,
            sigma_p,
            sigma_e: self
                .robustness
                .sigma_e
                .unwrap_or_else(|| AdversaryConfig::default_sigma_e(sigma_p)),
            a: self.system.a,
            dims: (self.system.dims[0], self.system.dims[1]),
            dataset: None,
            profile: self.profile()?,
            q_set: q_set.clone(),
            stragglers: self.adversary.stragglers.clone(),
            byzantine,
            decoder: self.decoder_config(sigma_p),
            precision: self.run.precision,
            seed,
        };
        sc.validate()?;
        Ok(sc)
    }
}
