//! Command verbs: each reads validated inputs, computes, and writes one
//! artifact directory `<output>/<verb>/` together with a `manifest.toml`
//! from which the run can be repeated exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use toml::{Table, Value};

use crate::config::{parse_config, Needs, RunConfig};
use crate::design::{optimize, EvalContext};
use crate::error::{Error, Result};
use crate::forecast::{forecast, refit_with_imputation};
use crate::grid::{design_cells, enumerate_transects, CovariateRaster, Design, Grid, TransectSet};
use crate::io::{self, Staging};
use crate::mcmc::{
    bayesian_p_value, gelman_rubin, run_chain, BlockCounts, ChainDiagnostics, PosteriorSamples, BLOCK_NAMES,
};
use crate::model::{ModelSpec, SurveyData};
use crate::rng::{substream, Stream};
use crate::synth::{design_matrix, reference_scenario};

pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Synth,
    Fit,
    Diagnose,
    Forecast,
    Evaluate,
    Optimize,
    Report,
}

impl Verb {
    pub const ALL: [Verb; 7] = [
        Verb::Synth,
        Verb::Fit,
        Verb::Diagnose,
        Verb::Forecast,
        Verb::Evaluate,
        Verb::Optimize,
        Verb::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verb::Synth => "synth",
            Verb::Fit => "fit",
            Verb::Diagnose => "diagnose",
            Verb::Forecast => "forecast",
            Verb::Evaluate => "evaluate",
            Verb::Optimize => "optimize",
            Verb::Report => "report",
        }
    }

    pub fn parse(name: &str) -> Result<Verb> {
        Verb::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown verb `{name}`")))
    }

    fn needs(self) -> Needs {
        match self {
            Verb::Synth => Needs::Nothing,
            Verb::Evaluate => Needs::Design,
            _ => Needs::Data,
        }
    }
}

/// Model inputs assembled from the files named in the configuration.
pub struct Inputs {
    pub grid: Grid,
    pub covariates: Vec<CovariateRaster>,
    pub spec: ModelSpec,
    pub data: SurveyData,
    pub transects: TransectSet,
}

pub fn load_inputs(config: &RunConfig) -> Result<Inputs> {
    config.require(Needs::Data)?;
    let grid = io::read_grid(config.paths.grid.as_ref().expect("required"))?;
    let covariates = config
        .paths
        .covariates
        .iter()
        .map(|p| io::read_covariate(p, &grid))
        .collect::<Result<Vec<_>>>()?;
    let data = io::read_surveys(config.paths.surveys.as_ref().expect("required"), &grid)?;
    let m = &config.model;
    let mut spec = ModelSpec::new(design_matrix(&grid, &covariates)?, m.epicenter.expect("required"));
    spec.priors = m.priors.priors();
    spec.boundary = m.boundary;
    spec.growth = m.growth;
    spec.carrying = m.carrying;
    spec.substeps = m.substeps;
    spec.interval = m.interval;
    spec.detection_trials = m.detection_trials;
    spec.validate(&grid)?;
    let transects = enumerate_transects(&grid, m.transect_axis);
    Ok(Inputs {
        grid,
        covariates,
        spec,
        data,
        transects,
    })
}

/// Runs one verb and returns its artifact directory. Nothing is left behind
/// when it fails.
pub fn run_verb(verb: Verb, config: &RunConfig) -> Result<PathBuf> {
    config.require(verb.needs())?;
    let target = config.paths.output.join(verb.name());
    let staging = Staging::new(&target)?;
    let mut manifest = Manifest::new(verb, config);
    match verb {
        Verb::Synth => synth(config, &staging, &mut manifest)?,
        Verb::Fit => fit(config, &staging, &mut manifest)?,
        Verb::Diagnose => diagnose(config, &staging, &mut manifest)?,
        Verb::Forecast => forecast_verb(config, &staging, &mut manifest)?,
        Verb::Evaluate => evaluate(config, &staging, &mut manifest)?,
        Verb::Optimize => optimize_verb(config, &staging, &mut manifest)?,
        Verb::Report => report(config, &staging, &mut manifest)?,
    }
    staging.write(MANIFEST, &manifest.render())?;
    let dir = staging.commit()?;
    info!("{} finished: {}", verb.name(), dir.display());
    Ok(dir)
}

/// Repeats the run recorded in a manifest, after checking that every input
/// file still has its recorded digest.
pub fn rerun(manifest_path: &Path, output: Option<PathBuf>) -> Result<PathBuf> {
    let text = io::read_text(manifest_path)?;
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("{}: {}", manifest_path.display(), e.message())))?;
    let bad = |msg: &str| Error::Config(format!("{}: {msg}", manifest_path.display()));
    let verb = Verb::parse(root.get("verb").and_then(Value::as_str).ok_or_else(|| bad("missing `verb`"))?)?;
    let inputs = root.get("inputs").and_then(Value::as_table).ok_or_else(|| bad("missing [inputs]"))?;
    for (name, entry) in inputs {
        let path = entry.get("path").and_then(Value::as_str).ok_or_else(|| bad("input without path"))?;
        let want = entry.get("sha256").and_then(Value::as_str).ok_or_else(|| bad("input without digest"))?;
        let got = io::sha256_file(Path::new(path))?;
        if got != want {
            return Err(Error::Config(format!("input `{name}` ({path}) changed since the recorded run")));
        }
    }
    let config = root.get("config").and_then(Value::as_table).ok_or_else(|| bad("missing [config]"))?;
    let text = toml::to_string(config).map_err(|e| Error::Config(e.to_string()))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut config = parse_config(&text, base)?;
    if let Some(out) = output {
        config = config.with_output(out);
    }
    run_verb(verb, &config)
}

struct Manifest {
    root: Table,
    inputs: BTreeMap<String, PathBuf>,
    streams: Vec<String>,
    summary: Table,
}

impl Manifest {
    fn new(verb: Verb, config: &RunConfig) -> Self {
        let mut root = Table::new();
        root.insert("verb".into(), Value::String(verb.name().into()));
        root.insert("seed".into(), Value::Integer(config.seed as i64));
        root.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
        let echo: Table = config.echo().parse().expect("echo is valid configuration");
        root.insert("config".into(), Value::Table(echo));
        Manifest {
            root,
            inputs: BTreeMap::new(),
            streams: Vec::new(),
            summary: Table::new(),
        }
    }

    fn input(&mut self, name: impl Into<String>, path: &Path) {
        self.inputs.insert(name.into(), path.to_path_buf());
    }

    fn config_inputs(&mut self, config: &RunConfig) {
        if let Some(g) = &config.paths.grid {
            self.input("grid", g);
        }
        if let Some(s) = &config.paths.surveys {
            self.input("surveys", s);
        }
        for (i, c) in config.paths.covariates.iter().enumerate() {
            self.input(format!("covariate_{i}"), c);
        }
    }

    fn stream(&mut self, s: impl Into<String>) {
        self.streams.push(s.into());
    }

    fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.into(), value.into());
    }

    fn render(mut self) -> String {
        let mut inputs = Table::new();
        for (name, path) in &self.inputs {
            let mut entry = Table::new();
            entry.insert("path".into(), Value::String(path.display().to_string()));
            let digest = io::sha256_file(path).unwrap_or_else(|_| "unreadable".into());
            entry.insert("sha256".into(), Value::String(digest));
            inputs.insert(name.clone(), Value::Table(entry));
        }
        self.root.insert("inputs".into(), Value::Table(inputs));
        self.root.insert(
            "streams".into(),
            Value::Array(self.streams.into_iter().map(Value::String).collect()),
        );
        self.root.insert("summary".into(), Value::Table(self.summary));
        toml::to_string(&self.root).expect("manifest tables serialize")
    }
}

fn synth(config: &RunConfig, out: &Staging, manifest: &mut Manifest) -> Result<()> {
    let s = reference_scenario(&config.synth)?;
    manifest.stream("truth");
    manifest.stream("survey");
    out.write("grid.txt", &io::format_grid(&s.grid))?;
    let mut cov_paths = Vec::new();
    for c in &s.covariates {
        let name = format!("covariates/{}.txt", c.name);
        out.write(&name, &io::format_field(&s.grid, &c.values, Some(c.kind)))?;
        cov_paths.push(PathBuf::from(name));
    }
    out.write("surveys.txt", &io::format_surveys(&s.data, &s.grid))?;

    let mut truth = String::from("year\trow\tcol\tu\tn\n");
    for (t, (u, n)) in s.truth.u.iter().zip(&s.truth.n).enumerate() {
        for (i, (uv, nv)) in u.iter().zip(n).enumerate() {
            let (r, c) = s.grid.position(i);
            let _ = writeln!(truth, "{}\t{r}\t{c}\t{uv}\t{nv}", s.truth.start_year + t as i32);
        }
    }
    out.write("truth.tsv", &truth)?;
    let mut params = String::from("parameter\tvalue\n");
    for (name, v) in s.spec.param_names().iter().zip(s.truth_theta.to_vec()) {
        let _ = writeln!(params, "{name}\t{v}");
    }
    out.write("truth_parameters.tsv", &params)?;

    let mut scenario = config.clone();
    scenario.paths.grid = Some("grid.txt".into());
    scenario.paths.surveys = Some("surveys.txt".into());
    scenario.paths.covariates = cov_paths;
    scenario.paths.output = "..".into();
    scenario.model.epicenter = Some(s.spec.epicenter);
    scenario.model.boundary = s.spec.boundary;
    scenario.model.growth = s.spec.growth;
    scenario.model.substeps = s.spec.substeps;
    scenario.model.interval = s.spec.interval;
    scenario.model.detection_trials = s.spec.detection_trials;
    out.write("config.toml", &scenario.echo())?;

    manifest.set("cells", s.grid.cell_count() as i64);
    manifest.set("transects", s.transects.count() as i64);
    manifest.set("years", s.truth.years() as i64);
    manifest.set("observations", s.data.observation_count() as i64);
    manifest.set("total_count", s.data.total_count() as i64);
    Ok(())
}

fn fit(config: &RunConfig, out: &Staging, manifest: &mut Manifest) -> Result<()> {
    let inputs = load_inputs(config)?;
    manifest.config_inputs(config);
    let samples = run_chain(&inputs.spec, &inputs.data, &inputs.grid, &config.chain)?;
    for c in 0..samples.n_chains {
        manifest.stream(format!("chain:{c}"));
        out.write(&format!("chain_{c}.tsv"), &io::format_chain(&samples, c))?;
    }
    io::write_field_archive(&out.path("fields.bin"), &samples.fields)?;
    out.write("proposals.tsv", &io::format_proposals(&samples))?;
    out.write("acceptance.tsv", &format_acceptance(&samples.chains))?;
    let mut trace = String::from("chain\titeration\tbeta_scale\talpha_scale\tinitial_scale\n");
    for c in &samples.chains {
        for (i, s) in c.scale_trace.iter().enumerate().take(config.chain.n_burn + 1) {
            let _ = writeln!(trace, "{}\t{i}\t{}\t{}\t{}", c.chain, s[0], s[1], s[2]);
        }
    }
    out.write("adaptation.tsv", &trace)?;

    manifest.set("draws", samples.len() as i64);
    manifest.set("field_draws", samples.fields.len() as i64);
    manifest.set("start_year", samples.start_year as i64);
    manifest.set("last_offset", samples.last_offset as i64);
    for c in &samples.chains {
        for (b, name) in BLOCK_NAMES.iter().enumerate() {
            manifest.set(&format!("acceptance_chain{}_{name}", c.chain), c.sampling[b].rate());
            manifest.set(
                &format!("unstable_chain{}_{name}", c.chain),
                (c.burn_in[b].unstable + c.sampling[b].unstable) as i64,
            );
        }
    }
    Ok(())
}

fn format_acceptance(chains: &[ChainDiagnostics]) -> String {
    let mut out = String::from("chain\tstage\tblock\tproposed\taccepted\tunstable\trate\n");
    for c in chains {
        for (stage, counts) in [("burn_in", &c.burn_in), ("sampling", &c.sampling)] {
            for (b, k) in counts.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{}\t{stage}\t{}\t{}\t{}\t{}\t{}",
                    c.chain, BLOCK_NAMES[b], k.proposed, k.accepted, k.unstable, k.rate()
                );
            }
        }
    }
    out
}

const FIT_FILES: [&str; 3] = [MANIFEST, "proposals.tsv", "acceptance.tsv"];

/// Reads the posterior written by `fit` under the same configuration.
pub fn load_posterior(config: &RunConfig, inputs: &Inputs) -> Result<PosteriorSamples> {
    read_fit(config, inputs, None)
}

fn read_fit(config: &RunConfig, inputs: &Inputs, manifest: Option<&mut Manifest>) -> Result<PosteriorSamples> {
    let dir = config.paths.output.join(Verb::Fit.name());
    let fit_manifest = dir.join(MANIFEST);
    if !fit_manifest.exists() {
        return Err(Error::Config(format!("no fit found at {}; run `fit` first", dir.display())));
    }
    let recorded: Table = io::read_text(&fit_manifest)?
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("{}: {}", fit_manifest.display(), e.message())))?;
    let fit_config = recorded.get("config").and_then(Value::as_table).cloned().unwrap_or_default();
    let ours: Table = config.echo().parse().expect("echo is valid configuration");
    for key in ["paths", "model", "priors", "mcmc", "proposal", "seed"] {
        if fit_config.get(key) != ours.get(key) {
            return Err(Error::Config(format!(
                "fit at {} was made with different `{key}` settings; rerun `fit`",
                dir.display()
            )));
        }
    }
    let proposals = io::parse_proposals(&io::read_text(&dir.join("proposals.tsv"))?, &dir.join("proposals.tsv"))?;
    let counts = parse_acceptance(&dir.join("acceptance.tsv"))?;
    let n_chains = config.chain.n_chains;
    let mut draws = Vec::new();
    let mut names = Vec::new();
    let mut files: Vec<String> = FIT_FILES.iter().map(|s| s.to_string()).collect();
    for c in 0..n_chains {
        let file = format!("chain_{c}.tsv");
        let path = dir.join(&file);
        let (n, d) = io::parse_chain(&io::read_text(&path)?, &path, c, inputs.spec.n_beta(), inputs.spec.n_alpha())?;
        names = n;
        draws.extend(d);
        files.push(file);
    }
    if let Some(m) = manifest {
        for f in &files {
            m.input(format!("fit/{f}"), &dir.join(f));
        }
    }
    let chains = (0..n_chains)
        .map(|c| {
            let (burn_in, sampling) = counts.get(&c).copied().unwrap_or_default();
            ChainDiagnostics {
                chain: c,
                burn_in,
                sampling,
                scale_trace: Vec::new(),
                final_proposals: proposals.get(c).cloned().unwrap_or_default(),
                seconds: 0.0,
            }
        })
        .collect();
    Ok(PosteriorSamples {
        param_names: names,
        n_chains,
        start_year: inputs.data.start_year,
        last_offset: inputs.data.offsets().last().copied().unwrap_or(0),
        draws,
        fields: Vec::new(),
        chains,
    })
}

type StageCounts = ([BlockCounts; 3], [BlockCounts; 3]);

fn parse_acceptance(path: &Path) -> Result<BTreeMap<usize, StageCounts>> {
    let text = io::read_text(path)?;
    let mut out: BTreeMap<usize, StageCounts> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let t: Vec<&str> = line.split('\t').collect();
        let err = || Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: "malformed acceptance row".into(),
        };
        if t.len() != 7 {
            return Err(err());
        }
        let chain: usize = t[0].parse().map_err(|_| err())?;
        let block = BLOCK_NAMES.iter().position(|b| *b == t[2]).ok_or_else(err)?;
        let k = BlockCounts {
            proposed: t[3].parse().map_err(|_| err())?,
            accepted: t[4].parse().map_err(|_| err())?,
            unstable: t[5].parse().map_err(|_| err())?,
        };
        let entry = out.entry(chain).or_default();
        match t[1] {
            "burn_in" => entry.0[block] = k,
            "sampling" => entry.1[block] = k,
            _ => return Err(err()),
        }
    }
    Ok(out)
}

fn diagnose(config: &RunConfig, out: &Staging, manifest: &mut Manifest) -> Result<()> {
    let inputs = load_inputs(config)?;
    manifest.config_inputs(config);
    let samples = read_fit(config, &inputs, Some(manifest))?;
    let rhat = gelman_rubin(&samples)?;
    let mut table = String::from("parameter\trhat\n");
    let mut worst = 1.0f64;
    for (name, r) in &rhat {
        let _ = writeln!(table, "{name}\t{r}");
        worst = worst.max(*r);
    }
    out.write("rhat.tsv", &table)?;
    out.write("acceptance.tsv", &format_acceptance(&samples.chains))?;
    manifest.stream("pvalue");
    let p = bayesian_p_value(
        &samples,
        &inputs.data,
        &inputs.spec,
        &inputs.grid,
        config.p_value_draws,
        &mut substream(config.seed, Stream::PValue),
    )?;
    out.write("p_value.tsv", &format!("statistic\tvalue\np_value\t{p}\nmax_rhat\t{worst}\n"))?;
    manifest.set("p_value", p);
    manifest.set("max_rhat", worst);
    manifest.set("converged", worst < 1.1);
    Ok(())
}

fn forecast_verb(config: &RunConfig, out: &Staging, manifest: &mut Manifest) -> Result<()> {
    let inputs = load_inputs(config)?;
    manifest.config_inputs(config);
    let samples = read_fit(config, &inputs, Some(manifest))?;
    let fore = forecast(&samples, config.horizon, &inputs.grid, &inputs.spec)?;
    let mut totals = String::from("draw\tsource\tphi\ttotal\n");
    for (k, ((s, phi), t)) in fore.source.iter().zip(&fore.phi).zip(&fore.totals).enumerate() {
        let _ = writeln!(totals, "{k}\t{s}\t{phi}\t{t}");
    }
    out.write("totals.tsv", &totals)?;
    out.write("mean_field.txt", &io::format_field(&inputs.grid, &fore.mean_field(), None))?;
    let stats = summarize(&fore.totals);
    out.write("summary.tsv", &stats.tsv())?;
    manifest.set("year", fore.year as i64);
    manifest.set("draws", fore.len() as i64);
    manifest.set("excluded", fore.excluded as i64);
    manifest.set("excluded_fraction", fore.excluded as f64 / (fore.len() + fore.excluded) as f64);
    manifest.set("mean_total", stats.mean);
    Ok(())
}

fn eval_context<'a>(
    config: &RunConfig,
    inputs: &'a Inputs,
    manifest: &mut Manifest,
) -> Result<EvalContext<'a>> {
    let samples = read_fit(config, inputs, Some(manifest))?;
    manifest.stream("imputation");
    manifest.stream("refit_chain:0");
    EvalContext::new(
        &inputs.spec,
        &inputs.grid,
        &inputs.data,
        &inputs.transects,
        &samples,
        config.horizon,
        config.refit.clone(),
    )
}

fn evaluate(config: &RunConfig, out: &Staging, manifest: &mut Manifest) -> Result<()> {
    let inputs = load_inputs(config)?;
    manifest.config_inputs(config);
    let design = Design::new(config.search.design.clone().expect("required"))?;
    design.validate(&inputs.transects)?;
    let ctx = eval_context(config, &inputs, manifest)?;
    let cells = design_cells(&inputs.transects, &design)?;
    let imputed = ctx.bank.restrict(&cells)?;
    let refit = refit_with_imputation(&inputs.data, &imputed, &inputs.spec, &inputs.grid, &ctx.refit, &ctx.start)?;
    let q_d = crate::design::criterion_qd(&refit.totals)?;
    let mean = refit.totals.iter().sum::<f64>() / refit.totals.len() as f64;
    out.write(
        "result.tsv",
        &format!(
            "design\tq_d\tk\texcluded\tmean_total\n{design}\t{q_d}\t{}\t{}\t{mean}\n",
            refit.totals.len(),
            ctx.forecast.excluded
        ),
    )?;
    let mut pairing = String::from("iteration\timputed\n");
    for (it, k) in &refit.pairing {
        let _ = writeln!(pairing, "{it}\t{k}");
    }
    out.write("pairing.tsv", &pairing)?;
    let mut totals = String::from("draw\titeration\ttotal\n");
    for (k, (d, t)) in refit.draws.iter().zip(&refit.totals).enumerate() {
        let _ = writeln!(totals, "{k}\t{}\t{t}", d.iteration);
    }
    out.write("totals.tsv", &totals)?;
    manifest.set("q_d", q_d);
    manifest.set("k", refit.totals.len() as i64);
    manifest.set("excluded", ctx.forecast.excluded as i64);
    manifest.set("imputed_sets", ctx.bank.len() as i64);
    for (b, name) in BLOCK_NAMES.iter().enumerate() {
        manifest.set(&format!("acceptance_{name}"), refit.diagnostics.sampling[b].rate());
    }
    Ok(())
}

fn optimize_verb(config: &RunConfig, out: &Staging, manifest: &mut Manifest) -> Result<()> {
    let inputs = load_inputs(config)?;
    let n = config.search.design_size;
    if n > inputs.transects.count() {
        return Err(Error::Config(format!(
            "search.design_size = {n} exceeds the {} available transects",
            inputs.transects.count()
        )));
    }
    manifest.config_inputs(config);
    let ctx = eval_context(config, &inputs, manifest)?;
    manifest.stream("design_sampling");
    let report = optimize(&ctx, config.search.random_designs, n, config.search.parallelism)?;
    out.write("designs.tsv", &io::format_search_table(&report))?;
    out.write("exchange.tsv", &io::format_exchange(&report.exchange))?;
    let (final_design, final_q) = report
        .final_design
        .clone()
        .ok_or_else(|| Error::Numeric("no design could be evaluated".into()))?;
    out.write("final_design.txt", &format_final_design(&final_design, final_q, &inputs.transects))?;
    let random = report.random_q_d();
    manifest.set("final_q_d", final_q);
    manifest.set("mean_random_q_d", mean(&random));
    if let Some(imp) = report.improvement() {
        manifest.set("improvement", imp);
    }
    manifest.set("passes", report.passes as i64);
    manifest.set("swaps", report.exchange.len() as i64);
    manifest.set("evaluations", report.evaluations.len() as i64);
    manifest.set(
        "failed_evaluations",
        report.evaluations.iter().filter(|e| e.result.is_err()).count() as i64,
    );
    manifest.set("excluded", ctx.forecast.excluded as i64);
    Ok(())
}

fn format_final_design(design: &Design, q_d: f64, transects: &TransectSet) -> String {
    let mut out = format!("q_d\t{q_d}\ntransect\tline\tcells\n");
    for &t in design.indices() {
        let tr = &transects.transects[t];
        let _ = writeln!(out, "{t}\t{}\t{}", tr.line, tr.cells.len());
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

struct Summary {
    mean: f64,
    sd: f64,
    lo: f64,
    median: f64,
    hi: f64,
}

impl Summary {
    fn tsv(&self) -> String {
        format!(
            "statistic\tvalue\nmean\t{}\nsd\t{}\nq025\t{}\nmedian\t{}\nq975\t{}\n",
            self.mean, self.sd, self.lo, self.median, self.hi
        )
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let (i, f) = (h.floor() as usize, h - h.floor());
    if i + 1 < sorted.len() {
        sorted[i] + f * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

fn summarize(v: &[f64]) -> Summary {
    let m = mean(v);
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len().max(2) - 1) as f64).sqrt();
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Summary {
        mean: m,
        sd,
        lo: quantile(&s, 0.025),
        median: quantile(&s, 0.5),
        hi: quantile(&s, 0.975),
    }
}

/// Equal-width histogram with `bins` bins over the data range.
pub fn histogram(v: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if v.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for x in v {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, c))
        .collect()
}

fn read_table(path: &Path) -> Result<Vec<BTreeMap<String, String>>> {
    let text = io::read_text(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split('\t').collect();
    Ok(lines
        .map(|l| header.iter().map(|h| h.to_string()).zip(l.split('\t').map(String::from)).collect())
        .collect())
}

fn report(config: &RunConfig, out: &Staging, manifest: &mut Manifest) -> Result<()> {
    let inputs = load_inputs(config)?;
    manifest.config_inputs(config);
    let samples = read_fit(config, &inputs, Some(manifest))?;
    let mut text = String::new();
    let _ = writeln!(text, "Spread forecast and survey design report");
    let _ = writeln!(text, "seed {}", config.seed);
    let _ = writeln!(
        text,
        "\nDomain: {} x {} grid, {} active cells, {} transects",
        inputs.grid.nrows(),
        inputs.grid.ncols(),
        inputs.grid.cell_count(),
        inputs.transects.count()
    );
    let _ = writeln!(
        text,
        "Surveys: {} years from {}, {} observations, total count {}",
        inputs.data.surveys.len(),
        inputs.data.start_year,
        inputs.data.observation_count(),
        inputs.data.total_count()
    );

    let _ = writeln!(text, "\nPosterior ({} draws over {} chains)", samples.len(), samples.n_chains);
    let _ = writeln!(text, "{:<16} {:>12} {:>12} {:>12} {:>12}", "parameter", "mean", "sd", "q025", "q975");
    let mut post = String::from("parameter\tmean\tsd\tq025\tmedian\tq975\n");
    for (p, name) in samples.param_names.iter().enumerate() {
        let s = summarize(&samples.values(p));
        let _ = writeln!(text, "{name:<16} {:>12.5} {:>12.5} {:>12.5} {:>12.5}", s.mean, s.sd, s.lo, s.hi);
        let _ = writeln!(post, "{name}\t{}\t{}\t{}\t{}\t{}", s.mean, s.sd, s.lo, s.median, s.hi);
    }
    out.write("posterior.tsv", &post)?;
    let _ = writeln!(text, "Sampling acceptance by chain (beta, alpha, initial):");
    for (c, rates) in samples.sampling_acceptance().iter().enumerate() {
        let _ = writeln!(text, "  chain {c}: {:.3} {:.3} {:.3}", rates[0], rates[1], rates[2]);
    }

    let root = &config.paths.output;
    let diag = root.join(Verb::Diagnose.name()).join("p_value.tsv");
    if diag.exists() {
        manifest.input("diagnose/p_value.tsv", &diag);
        let _ = writeln!(text, "\nDiagnostics");
        for row in read_table(&diag)? {
            let _ = writeln!(text, "  {}: {}", row["statistic"], row["value"]);
        }
    }
    let fsum = root.join(Verb::Forecast.name()).join("summary.tsv");
    if fsum.exists() {
        manifest.input("forecast/summary.tsv", &fsum);
        let _ = writeln!(text, "\nForecast of total abundance, {} years ahead", config.horizon);
        for row in read_table(&fsum)? {
            let _ = writeln!(text, "  {}: {}", row["statistic"], row["value"]);
        }
    }

    let odir = root.join(Verb::Optimize.name());
    let designs = odir.join("designs.tsv");
    let mut map_design = None;
    if designs.exists() {
        manifest.input("optimize/designs.tsv", &designs);
        manifest.input("optimize/final_design.txt", &odir.join("final_design.txt"));
        let rows = read_table(&designs)?;
        let random: Vec<f64> = rows
            .iter()
            .filter(|r| r["stage"] == "random")
            .filter_map(|r| r["q_d"].parse().ok())
            .collect();
        let mut hist = String::from("bin_lower\tbin_upper\tcount\n");
        for (lo, hi, c) in histogram(&random, 10) {
            let _ = writeln!(hist, "{lo}\t{hi}\t{c}");
        }
        out.write("qd_histogram.tsv", &hist)?;
        let final_text = io::read_text(&odir.join("final_design.txt"))?;
        let final_q: f64 = final_text
            .lines()
            .next()
            .and_then(|l| l.split('\t').nth(1))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse {
                path: odir.join("final_design.txt"),
                line: 1,
                msg: "missing q_d".into(),
            })?;
        let members: Vec<usize> = final_text
            .lines()
            .skip(2)
            .filter_map(|l| l.split('\t').next()?.parse().ok())
            .collect();
        let design = Design::new(members)?;
        design.validate(&inputs.transects)?;
        let m = mean(&random);
        let _ = writeln!(text, "\nDesign search");
        let _ = writeln!(text, "  random designs: {}", random.len());
        let _ = writeln!(
            text,
            "  random q_d: mean {m:.4}, best {:.4}, worst {:.4}",
            random.iter().copied().fold(f64::INFINITY, f64::min),
            random.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        );
        let _ = writeln!(text, "  final design: [{design}] q_d {final_q:.4}");
        let _ = writeln!(text, "  improvement over mean random: {:.2}%", 100.0 * (m - final_q) / m);
        manifest.set("final_q_d", final_q);
        map_design = Some(design);
    }

    let design = map_design.unwrap_or_else(Design::empty);
    let cells = design_cells(&inputs.transects, &design)?;
    let mut map = String::new();
    for r in 0..inputs.grid.nrows() {
        for c in 0..inputs.grid.ncols() {
            map.push(match inputs.grid.index_of(r, c) {
                None => '#',
                Some(i) if cells.binary_search(&i).is_ok() => 'T',
                Some(_) => '.',
            });
        }
        map.push('\n');
    }
    let _ = writeln!(text, "\nDesign map (T surveyed, . water, # land)\n{map}");
    let mut raster = vec![None; inputs.grid.nrows() * inputs.grid.ncols()];
    for i in 0..inputs.grid.cell_count() {
        let (r, c) = inputs.grid.position(i);
        raster[r * inputs.grid.ncols() + c] = Some(if cells.binary_search(&i).is_ok() { 1.0 } else { 0.0 });
    }
    out.write(
        "design_map.txt",
        &io::format_raster(inputs.grid.nrows(), inputs.grid.ncols(), inputs.grid.cell_size(), None, &raster),
    )?;
    out.write("report.txt", &text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verb_names_round_trip() {
        for v in Verb::ALL {
            assert_eq!(Verb::parse(v.name()).unwrap(), v);
        }
        assert!(Verb::parse("fitt").is_err());
    }

    #[test]
    fn histogram_counts_everything() {
        let v = [0.0, 0.5, 1.0, 1.0, 2.0];
        let h = histogram(&v, 4);
        assert_eq!(h.len(), 4);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 5);
        assert_eq!(h[3].2, 1);
        assert_eq!(histogram(&[3.0, 3.0], 2)[0].2, 2);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&s, 0.5), 2.5);
        assert_eq!(quantile(&s, 0.0), 1.0);
        assert_eq!(quantile(&s, 1.0), 4.0);
    }
}
