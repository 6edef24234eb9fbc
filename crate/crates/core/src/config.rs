//! Run configuration: a versioned TOML document with strict key checking.
//!
//! Relative paths are resolved against the directory of the configuration
//! file. [`RunConfig::echo`] writes every setting, defaults included, with
//! absolute paths; parsing the echo yields the same configuration.

use std::collections::BTreeSet;
use std::path::{Component, Path, PathBuf};

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::forecast::RefitConfig;
use crate::grid::TransectAxis;
use crate::mcmc::{BlockSwitches, ChainConfig, ProposalScales};
use crate::model::{DetectionTrials, Priors, TruncatedNormal};
use crate::propagator::{Boundary, GrowthKind};
use crate::synth::ScenarioConfig;

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PathSettings {
    pub grid: Option<PathBuf>,
    pub covariates: Vec<PathBuf>,
    pub surveys: Option<PathBuf>,
    pub output: PathBuf,
}

/// Prior hyperparameters as written in the document: truncated normals are
/// given as `[mean, variance]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSettings {
    pub phi: [f64; 2],
    pub beta_sd: f64,
    pub alpha_sd: f64,
    pub tau: [f64; 2],
    pub kappa: [f64; 2],
}

impl Default for PriorSettings {
    fn default() -> Self {
        PriorSettings {
            phi: [1.0, 1.0],
            beta_sd: 1.5,
            alpha_sd: 1.5,
            tau: [500.0, 10.0],
            kappa: [5.0, 0.001],
        }
    }
}

impl PriorSettings {
    pub fn priors(&self) -> Priors {
        Priors {
            phi_a: self.phi[0],
            phi_b: self.phi[1],
            beta_sd: self.beta_sd,
            alpha_sd: self.alpha_sd,
            kappa: TruncatedNormal::from_variance(self.kappa[0], self.kappa[1]),
            tau: TruncatedNormal::from_variance(self.tau[0], self.tau[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub epicenter: Option<(f64, f64)>,
    pub boundary: Boundary,
    pub growth: GrowthKind,
    pub carrying: f64,
    pub substeps: usize,
    pub interval: f64,
    pub detection_trials: Option<DetectionTrials>,
    pub transect_axis: TransectAxis,
    pub priors: PriorSettings,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            epicenter: None,
            boundary: Boundary::Absorbing,
            growth: GrowthKind::Malthusian,
            carrying: 1.0,
            substeps: 20,
            interval: 1.0,
            detection_trials: None,
            transect_axis: TransectAxis::Rows,
            priors: PriorSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSettings {
    pub random_designs: usize,
    pub design_size: usize,
    pub parallelism: usize,
    /// Design scored by the `evaluate` verb.
    pub design: Option<Vec<usize>>,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            random_designs: 64,
            design_size: 20,
            parallelism: 1,
            design: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub version: i64,
    pub seed: u64,
    pub paths: PathSettings,
    pub model: ModelSettings,
    pub chain: ChainConfig,
    pub refit: RefitConfig,
    pub horizon: usize,
    pub p_value_draws: usize,
    pub search: SearchSettings,
    pub synth: ScenarioConfig,
}

/// Walks a TOML table, recording unknown and missing keys so that all
/// problems are reported together.
struct Reader {
    missing: Vec<String>,
    unknown: Vec<String>,
    invalid: Vec<String>,
}

impl Reader {
    fn table<'a>(&mut self, root: &'a Table, key: &str) -> Option<&'a Table> {
        match root.get(key) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.invalid.push(format!("`{key}` must be a table"));
                None
            }
        }
    }

    fn check_keys(&mut self, t: &Table, prefix: &str, allowed: &[&str]) {
        let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
        for k in t.keys() {
            if !allowed.contains(k.as_str()) {
                self.unknown.push(qualified(prefix, k));
            }
        }
    }

    fn get<T>(&mut self, t: Option<&Table>, prefix: &str, key: &str, conv: impl Fn(&Value) -> Option<T>, what: &str) -> Option<T> {
        let v = t?.get(key)?;
        let out = conv(v);
        if out.is_none() {
            self.invalid.push(format!("`{}` must be {what}", qualified(prefix, key)));
        }
        out
    }

    fn require<T>(&mut self, t: Option<&Table>, prefix: &str, key: &str, conv: impl Fn(&Value) -> Option<T>, what: &str) -> Option<T> {
        if t.and_then(|t| t.get(key)).is_none() {
            self.missing.push(qualified(prefix, key));
            return None;
        }
        self.get(t, prefix, key, conv, what)
    }
}

fn qualified(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_usize(v: &Value) -> Option<usize> {
    v.as_integer().and_then(|i| usize::try_from(i).ok())
}

fn as_u64(v: &Value) -> Option<u64> {
    v.as_integer().and_then(|i| u64::try_from(i).ok())
}

fn as_f64_array<const N: usize>(v: &Value) -> Option<[f64; N]> {
    let a = v.as_array()?;
    let vals: Vec<f64> = a.iter().map(as_f64).collect::<Option<_>>()?;
    vals.try_into().ok()
}

fn as_f64_vec(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(as_f64).collect()
}

fn as_usize_vec(v: &Value) -> Option<Vec<usize>> {
    v.as_array()?.iter().map(as_usize).collect()
}

fn as_path_vec(v: &Value) -> Option<Vec<PathBuf>> {
    v.as_array()?.iter().map(|x| x.as_str().map(PathBuf::from)).collect()
}

fn as_boundary(v: &Value) -> Option<Boundary> {
    match v.as_str()? {
        "absorbing" => Some(Boundary::Absorbing),
        "reflecting" => Some(Boundary::Reflecting),
        _ => None,
    }
}

fn boundary_name(b: Boundary) -> &'static str {
    match b {
        Boundary::Absorbing => "absorbing",
        Boundary::Reflecting => "reflecting",
    }
}

fn as_growth(v: &Value) -> Option<GrowthKind> {
    match v.as_str()? {
        "none" => Some(GrowthKind::None),
        "malthusian" => Some(GrowthKind::Malthusian),
        "logistic" => Some(GrowthKind::Logistic),
        _ => None,
    }
}

fn growth_name(g: GrowthKind) -> &'static str {
    match g {
        GrowthKind::None => "none",
        GrowthKind::Malthusian => "malthusian",
        GrowthKind::Logistic => "logistic",
    }
}

fn as_axis(v: &Value) -> Option<TransectAxis> {
    match v.as_str()? {
        "rows" => Some(TransectAxis::Rows),
        "columns" => Some(TransectAxis::Columns),
        _ => None,
    }
}

/// Joins `p` onto `base` unless absolute, folding `..` components lexically.
fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    let joined = if p.is_absolute() { p } else { base.join(p) };
    let mut out = PathBuf::new();
    for c in joined.components() {
        match c {
            Component::ParentDir if matches!(out.components().next_back(), Some(Component::Normal(_))) => {
                out.pop();
            }
            Component::CurDir => {}
            c => out.push(c),
        }
    }
    out
}

/// Parses and validates a configuration document. Relative paths are taken
/// relative to `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("malformed configuration: {}", e.message())))?;
    let mut r = Reader {
        missing: Vec::new(),
        unknown: Vec::new(),
        invalid: Vec::new(),
    };
    r.check_keys(
        &root,
        "",
        &["version", "seed", "paths", "model", "priors", "mcmc", "proposal", "refit", "forecast", "diagnose", "search", "synth"],
    );
    let top = Some(&root);
    let version = r.require(top, "", "version", |v| v.as_integer(), "an integer");
    let seed = r.require(top, "", "seed", as_u64, "a non-negative integer");

    let paths_t = r.table(&root, "paths");
    if let Some(t) = paths_t {
        r.check_keys(t, "paths", &["grid", "covariates", "surveys", "output"]);
    }
    let str_path = |v: &Value| v.as_str().map(PathBuf::from);
    let paths = PathSettings {
        grid: r.get(paths_t, "paths", "grid", str_path, "a string").map(|p| resolve(base_dir, p)),
        covariates: r
            .get(paths_t, "paths", "covariates", as_path_vec, "an array of strings")
            .unwrap_or_default()
            .into_iter()
            .map(|p| resolve(base_dir, p))
            .collect(),
        surveys: r.get(paths_t, "paths", "surveys", str_path, "a string").map(|p| resolve(base_dir, p)),
        output: resolve(
            base_dir,
            r.get(paths_t, "paths", "output", str_path, "a string").unwrap_or_else(|| PathBuf::from("output")),
        ),
    };

    let model_t = r.table(&root, "model");
    if let Some(t) = model_t {
        r.check_keys(
            t,
            "model",
            &["epicenter", "boundary", "growth", "carrying", "substeps", "interval", "detection_trials", "transect_axis"],
        );
    }
    let md = ModelSettings::default();
    let mut model = ModelSettings {
        epicenter: r.get(model_t, "model", "epicenter", as_f64_array::<2>, "a pair of numbers").map(|a| (a[0], a[1])),
        boundary: r.get(model_t, "model", "boundary", as_boundary, "\"absorbing\" or \"reflecting\"").unwrap_or(md.boundary),
        growth: r
            .get(model_t, "model", "growth", as_growth, "\"none\", \"malthusian\" or \"logistic\"")
            .unwrap_or(md.growth),
        carrying: r.get(model_t, "model", "carrying", as_f64, "a number").unwrap_or(md.carrying),
        substeps: r.get(model_t, "model", "substeps", as_usize, "a positive integer").unwrap_or(md.substeps),
        interval: r.get(model_t, "model", "interval", as_f64, "a number").unwrap_or(md.interval),
        detection_trials: r
            .get(
                model_t,
                "model",
                "detection_trials",
                |v| {
                    let a = v.as_array()?;
                    match a.as_slice() {
                        [s, m] => Some(DetectionTrials {
                            successes: as_u64(s)?,
                            attempts: as_u64(m)?,
                        }),
                        _ => None,
                    }
                },
                "a pair [successes, attempts]",
            ),
        transect_axis: r
            .get(model_t, "model", "transect_axis", as_axis, "\"rows\" or \"columns\"")
            .unwrap_or(md.transect_axis),
        priors: PriorSettings::default(),
    };

    let priors_t = r.table(&root, "priors");
    if let Some(t) = priors_t {
        r.check_keys(t, "priors", &["phi", "beta_sd", "alpha_sd", "tau", "kappa"]);
    }
    let pd = PriorSettings::default();
    model.priors = PriorSettings {
        phi: r.get(priors_t, "priors", "phi", as_f64_array::<2>, "a pair [a, b]").unwrap_or(pd.phi),
        beta_sd: r.get(priors_t, "priors", "beta_sd", as_f64, "a number").unwrap_or(pd.beta_sd),
        alpha_sd: r.get(priors_t, "priors", "alpha_sd", as_f64, "a number").unwrap_or(pd.alpha_sd),
        tau: r.get(priors_t, "priors", "tau", as_f64_array::<2>, "a pair [mean, variance]").unwrap_or(pd.tau),
        kappa: r.get(priors_t, "priors", "kappa", as_f64_array::<2>, "a pair [mean, variance]").unwrap_or(pd.kappa),
    };

    let mcmc_t = r.table(&root, "mcmc");
    if let Some(t) = mcmc_t {
        r.check_keys(t, "mcmc", &["iterations", "burn_in", "chains", "thin", "field_thin", "adapt"]);
    }
    let cd = ChainConfig::default();
    let prop_t = r.table(&root, "proposal");
    if let Some(t) = prop_t {
        r.check_keys(t, "proposal", &["beta", "alpha", "initial"]);
    }
    let pd = ProposalScales::default();
    let chain = ChainConfig {
        n_iter: r.get(mcmc_t, "mcmc", "iterations", as_usize, "a positive integer").unwrap_or(cd.n_iter),
        n_burn: r.get(mcmc_t, "mcmc", "burn_in", as_usize, "a non-negative integer").unwrap_or(cd.n_burn),
        n_chains: r.get(mcmc_t, "mcmc", "chains", as_usize, "a positive integer").unwrap_or(cd.n_chains),
        thin: r.get(mcmc_t, "mcmc", "thin", as_usize, "a positive integer").unwrap_or(cd.thin),
        seed: seed.unwrap_or(0),
        proposal: ProposalScales {
            beta: r.get(prop_t, "proposal", "beta", as_f64, "a number").unwrap_or(pd.beta),
            alpha: r.get(prop_t, "proposal", "alpha", as_f64, "a number").unwrap_or(pd.alpha),
            initial: r.get(prop_t, "proposal", "initial", as_f64, "a number").unwrap_or(pd.initial),
        },
        adapt: r.get(mcmc_t, "mcmc", "adapt", Value::as_bool, "a boolean").unwrap_or(cd.adapt),
        field_thin: r.get(mcmc_t, "mcmc", "field_thin", as_usize, "a non-negative integer").unwrap_or(cd.field_thin),
        blocks: BlockSwitches::default(),
    };

    let refit_t = r.table(&root, "refit");
    if let Some(t) = refit_t {
        r.check_keys(t, "refit", &["iterations", "burn_in", "adapt"]);
    }
    let rd = RefitConfig::from_baseline(&chain);
    let refit = RefitConfig {
        n_iter: r.get(refit_t, "refit", "iterations", as_usize, "a positive integer").unwrap_or(rd.n_iter),
        n_burn: r.get(refit_t, "refit", "burn_in", as_usize, "a non-negative integer").unwrap_or(rd.n_burn),
        adapt: r.get(refit_t, "refit", "adapt", Value::as_bool, "a boolean").unwrap_or(rd.adapt),
        ..rd
    };

    let fc_t = r.table(&root, "forecast");
    if let Some(t) = fc_t {
        r.check_keys(t, "forecast", &["horizon"]);
    }
    let horizon = r.get(fc_t, "forecast", "horizon", as_usize, "a positive integer").unwrap_or(5);

    let dg_t = r.table(&root, "diagnose");
    if let Some(t) = dg_t {
        r.check_keys(t, "diagnose", &["p_value_draws"]);
    }
    let p_value_draws = r.get(dg_t, "diagnose", "p_value_draws", as_usize, "a positive integer").unwrap_or(1000);

    let search_t = r.table(&root, "search");
    if let Some(t) = search_t {
        r.check_keys(t, "search", &["random_designs", "design_size", "parallelism", "design"]);
    }
    let sd = SearchSettings::default();
    let search = SearchSettings {
        random_designs: r
            .get(search_t, "search", "random_designs", as_usize, "a positive integer")
            .unwrap_or(sd.random_designs),
        design_size: r.get(search_t, "search", "design_size", as_usize, "a positive integer").unwrap_or(sd.design_size),
        parallelism: r.get(search_t, "search", "parallelism", as_usize, "a positive integer").unwrap_or(sd.parallelism),
        design: r.get(search_t, "search", "design", as_usize_vec, "an array of transect indices"),
    };

    let synth_t = r.table(&root, "synth");
    if let Some(t) = synth_t {
        r.check_keys(
            t,
            "synth",
            &[
                "start_year",
                "years",
                "phi",
                "annual_growth",
                "tau",
                "kappa",
                "beta",
                "detection_attempts",
                "boundary",
                "epicenter",
            ],
        );
    }
    let sc = ScenarioConfig::default();
    let synth = ScenarioConfig {
        seed: seed.unwrap_or(0),
        start_year: r
            .get(synth_t, "synth", "start_year", |v| v.as_integer().and_then(|i| i32::try_from(i).ok()), "an integer")
            .unwrap_or(sc.start_year),
        years: r.get(synth_t, "synth", "years", as_usize, "a positive integer").unwrap_or(sc.years),
        phi: r.get(synth_t, "synth", "phi", as_f64, "a number").unwrap_or(sc.phi),
        annual_growth: r.get(synth_t, "synth", "annual_growth", as_f64, "a number").unwrap_or(sc.annual_growth),
        tau: r.get(synth_t, "synth", "tau", as_f64, "a number").unwrap_or(sc.tau),
        kappa: r.get(synth_t, "synth", "kappa", as_f64, "a number").unwrap_or(sc.kappa),
        beta: r.get(synth_t, "synth", "beta", as_f64_vec, "an array of numbers").unwrap_or(sc.beta),
        detection_attempts: r
            .get(synth_t, "synth", "detection_attempts", as_u64, "a non-negative integer")
            .unwrap_or(sc.detection_attempts),
        substeps: model.substeps,
        boundary: r
            .get(synth_t, "synth", "boundary", as_boundary, "\"absorbing\" or \"reflecting\"")
            .unwrap_or(sc.boundary),
        epicenter: r
            .get(synth_t, "synth", "epicenter", as_f64_array::<2>, "a pair of numbers")
            .map_or(sc.epicenter, |a| (a[0], a[1])),
    };

    let mut problems = Vec::new();
    if !r.unknown.is_empty() {
        problems.push(format!("unknown keys: {}", r.unknown.join(", ")));
    }
    if !r.missing.is_empty() {
        problems.push(format!("missing required keys: {}", r.missing.join(", ")));
    }
    problems.extend(r.invalid);
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    let config = RunConfig {
        version: version.expect("checked"),
        seed: seed.expect("checked"),
        paths,
        model,
        chain,
        refit: RefitConfig {
            seed: seed.expect("checked"),
            ..refit
        },
        horizon,
        p_value_draws,
        search,
        synth,
    };
    config.validate()?;
    Ok(config)
}

/// Keys a verb needs beyond the always-required ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    Nothing,
    Data,
    Design,
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        self.chain.validate()?;
        if self.refit.n_burn >= self.refit.n_iter {
            return Err(Error::Config("refit.burn_in must be smaller than refit.iterations".into()));
        }
        self.model.priors.priors().validate()?;
        if self.model.substeps == 0 || !(self.model.interval > 0.0) {
            return Err(Error::Config("model.substeps and model.interval must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("forecast.horizon must be at least 1".into()));
        }
        if self.search.random_designs == 0 || self.search.parallelism == 0 || self.p_value_draws == 0 {
            return Err(Error::Config(
                "search.random_designs, search.parallelism and diagnose.p_value_draws must be positive".into(),
            ));
        }
        if let Some(t) = self.model.detection_trials {
            if t.successes > t.attempts {
                return Err(Error::Config("model.detection_trials successes exceed attempts".into()));
            }
        }
        Ok(())
    }

    /// Checks the keys a verb depends on, reporting every absent one.
    pub fn require(&self, needs: Needs) -> Result<()> {
        let mut missing = Vec::new();
        if matches!(needs, Needs::Data | Needs::Design) {
            if self.paths.grid.is_none() {
                missing.push("paths.grid");
            }
            if self.paths.surveys.is_none() {
                missing.push("paths.surveys");
            }
            if self.model.epicenter.is_none() {
                missing.push("model.epicenter");
            }
        }
        if needs == Needs::Design && self.search.design.is_none() {
            missing.push("search.design");
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("missing required keys: {}", missing.join(", "))))
        }
    }

    pub fn with_output(mut self, output: PathBuf) -> Self {
        self.paths.output = output;
        self
    }

    /// Complete configuration document with every default written out.
    pub fn echo(&self) -> String {
        fn table(pairs: Vec<(&str, Value)>) -> Value {
            Value::Table(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
        }
        fn path(p: &Path) -> Value {
            Value::String(p.display().to_string())
        }
        fn floats(v: &[f64]) -> Value {
            Value::Array(v.iter().map(|x| Value::Float(*x)).collect())
        }
        fn int(v: usize) -> Value {
            Value::Integer(v as i64)
        }
        let mut root = Table::new();
        root.insert("version".into(), Value::Integer(self.version));
        root.insert("seed".into(), Value::Integer(self.seed as i64));
        let mut paths = vec![
            ("covariates", Value::Array(self.paths.covariates.iter().map(|p| path(p)).collect())),
            ("output", path(&self.paths.output)),
        ];
        if let Some(g) = &self.paths.grid {
            paths.push(("grid", path(g)));
        }
        if let Some(s) = &self.paths.surveys {
            paths.push(("surveys", path(s)));
        }
        root.insert("paths".into(), table(paths));
        let m = &self.model;
        let mut model = vec![
            ("boundary", Value::String(boundary_name(m.boundary).into())),
            ("growth", Value::String(growth_name(m.growth).into())),
            ("carrying", Value::Float(m.carrying)),
            ("substeps", int(m.substeps)),
            ("interval", Value::Float(m.interval)),
            (
                "transect_axis",
                Value::String(
                    match m.transect_axis {
                        TransectAxis::Rows => "rows",
                        TransectAxis::Columns => "columns",
                    }
                    .into(),
                ),
            ),
        ];
        if let Some((x, y)) = m.epicenter {
            model.push(("epicenter", floats(&[x, y])));
        }
        if let Some(t) = m.detection_trials {
            model.push((
                "detection_trials",
                Value::Array(vec![Value::Integer(t.successes as i64), Value::Integer(t.attempts as i64)]),
            ));
        }
        root.insert("model".into(), table(model));
        let p = &m.priors;
        root.insert(
            "priors".into(),
            table(vec![
                ("phi", floats(&p.phi)),
                ("beta_sd", Value::Float(p.beta_sd)),
                ("alpha_sd", Value::Float(p.alpha_sd)),
                ("tau", floats(&p.tau)),
                ("kappa", floats(&p.kappa)),
            ]),
        );
        let c = &self.chain;
        root.insert(
            "mcmc".into(),
            table(vec![
                ("iterations", int(c.n_iter)),
                ("burn_in", int(c.n_burn)),
                ("chains", int(c.n_chains)),
                ("thin", int(c.thin)),
                ("field_thin", int(c.field_thin)),
                ("adapt", Value::Boolean(c.adapt)),
            ]),
        );
        root.insert(
            "proposal".into(),
            table(vec![
                ("beta", Value::Float(c.proposal.beta)),
                ("alpha", Value::Float(c.proposal.alpha)),
                ("initial", Value::Float(c.proposal.initial)),
            ]),
        );
        root.insert(
            "refit".into(),
            table(vec![
                ("iterations", int(self.refit.n_iter)),
                ("burn_in", int(self.refit.n_burn)),
                ("adapt", Value::Boolean(self.refit.adapt)),
            ]),
        );
        root.insert("forecast".into(), table(vec![("horizon", int(self.horizon))]));
        root.insert("diagnose".into(), table(vec![("p_value_draws", int(self.p_value_draws))]));
        let s = &self.search;
        let mut search = vec![
            ("random_designs", int(s.random_designs)),
            ("design_size", int(s.design_size)),
            ("parallelism", int(s.parallelism)),
        ];
        if let Some(d) = &s.design {
            search.push(("design", Value::Array(d.iter().map(|&t| int(t)).collect())));
        }
        root.insert("search".into(), table(search));
        let sy = &self.synth;
        root.insert(
            "synth".into(),
            table(vec![
                ("start_year", Value::Integer(sy.start_year as i64)),
                ("years", int(sy.years)),
                ("phi", Value::Float(sy.phi)),
                ("annual_growth", Value::Float(sy.annual_growth)),
                ("tau", Value::Float(sy.tau)),
                ("kappa", Value::Float(sy.kappa)),
                ("beta", floats(&sy.beta)),
                ("detection_attempts", Value::Integer(sy.detection_attempts as i64)),
                ("boundary", Value::String(boundary_name(sy.boundary).into())),
                ("epicenter", floats(&[sy.epicenter.0, sy.epicenter.1])),
            ]),
        );
        toml::to_string(&root).expect("configuration tables serialize")
    }
}
