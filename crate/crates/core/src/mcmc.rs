//! Metropolis-within-Gibbs sampler for the diffusion model.
//!
//! Each iteration draws the latent abundance and detection probability from
//! their exact conditionals, then updates three random-walk blocks: `β`,
//! `α`, and `(log τ, log κ)`. Every block proposal re-propagates the full
//! intensity trajectory. Proposal scales (and, for multi-dimensional blocks,
//! the proposal covariance) adapt during burn-in only.

use std::time::Instant;

use log::info;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{
    complete_data_loglik, log_prior, sample_latent_n, sample_phi, sample_poisson, LatentState,
    ModelSpec, SurveyData, Theta,
};
use crate::rng::{substream, SimRng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalScales {
    pub beta: f64,
    pub alpha: f64,
    /// Random-walk sd for `log τ` and `log κ`, relative to each prior's
    /// coefficient of variation.
    pub initial: f64,
}

impl Default for ProposalScales {
    fn default() -> Self {
        ProposalScales {
            beta: 0.02,
            alpha: 0.005,
            initial: 1.0,
        }
    }
}

/// Which random-walk blocks are updated; all on for normal use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSwitches {
    pub beta: bool,
    pub alpha: bool,
    pub initial: bool,
}

impl Default for BlockSwitches {
    fn default() -> Self {
        BlockSwitches {
            beta: true,
            alpha: true,
            initial: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    pub n_chains: usize,
    pub thin: usize,
    pub seed: u64,
    pub proposal: ProposalScales,
    pub adapt: bool,
    /// Keep intensity fields for every `field_thin`-th retained draw; 0 keeps none.
    pub field_thin: usize,
    pub blocks: BlockSwitches,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_iter: 20_000,
            n_burn: 5_000,
            n_chains: 2,
            thin: 1,
            seed: 1,
            proposal: ProposalScales::default(),
            adapt: true,
            field_thin: 10,
            blocks: BlockSwitches::default(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_burn >= self.n_iter {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.n_burn, self.n_iter
            )));
        }
        if self.n_chains == 0 || self.thin == 0 {
            return Err(Error::Config("chains and thin must be at least 1".into()));
        }
        let p = &self.proposal;
        if !(p.beta > 0.0 && p.alpha > 0.0 && p.initial > 0.0) {
            return Err(Error::Config("proposal scales must be positive".into()));
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.n_iter - self.n_burn).div_ceil(self.thin)
    }
}

/// Frozen random-walk proposal for one block: `x' = x + exp(log_scale) L z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub chol: Vec<f64>,
    pub log_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlockCounts {
    pub proposed: u64,
    pub accepted: u64,
    pub unstable: u64,
}

impl BlockCounts {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

pub const BLOCK_NAMES: [&str; 3] = ["beta", "alpha", "initial"];

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub burn_in: [BlockCounts; 3],
    pub sampling: [BlockCounts; 3],
    /// Proposal scale of each block after every iteration.
    pub scale_trace: Vec<[f64; 3]>,
    pub final_proposals: Vec<Proposal>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub chain: usize,
    pub iteration: usize,
    pub theta: Theta,
    pub log_post: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDraw {
    pub chain: usize,
    pub iteration: usize,
    /// Intensity at each survey time.
    pub fields: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub param_names: Vec<String>,
    pub n_chains: usize,
    /// Year of the initial condition.
    pub start_year: i32,
    /// Interval offset of the last survey.
    pub last_offset: usize,
    /// Retained draws, chain-major then by iteration.
    pub draws: Vec<Draw>,
    pub fields: Vec<FieldDraw>,
    pub chains: Vec<ChainDiagnostics>,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Values of scalar parameter `p` split by chain.
    pub fn chain_values(&self, p: usize) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.n_chains];
        for d in &self.draws {
            out[d.chain].push(d.theta.to_vec()[p]);
        }
        out
    }

    pub fn values(&self, p: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.theta.to_vec()[p]).collect()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    pub fn sampling_acceptance(&self) -> Vec<[f64; 3]> {
        self.chains
            .iter()
            .map(|c| std::array::from_fn(|b| c.sampling[b].rate()))
            .collect()
    }
}

/// Extra inputs for the imputation refit.
#[derive(Debug, Clone, Default)]
pub(crate) struct ChainExtras<'a> {
    /// Interval offsets whose intensity totals are recorded per retained draw.
    pub total_offsets: Vec<usize>,
    /// Counts for the last survey, cycled by iteration.
    pub imputed: Option<&'a [Vec<u64>]>,
    pub start: Option<Theta>,
    pub proposals: Option<Vec<Proposal>>,
    pub stream: Option<Stream>,
}

pub(crate) struct ChainOutput {
    pub draws: Vec<Draw>,
    pub fields: Vec<FieldDraw>,
    pub totals: Vec<Vec<f64>>,
    /// (iteration, imputed dataset index) for each retained draw.
    pub pairing: Vec<(usize, usize)>,
    pub diagnostics: ChainDiagnostics,
}

fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

struct RwBlock {
    dim: usize,
    proposal: Proposal,
    target: f64,
    history: Vec<Vec<f64>>,
}

impl RwBlock {
    fn new(sds: &[f64]) -> Self {
        let dim = sds.len();
        let mut chol = vec![0.0; dim * dim];
        for (i, s) in sds.iter().enumerate() {
            chol[i * dim + i] = *s;
        }
        RwBlock {
            dim,
            proposal: Proposal { chol, log_scale: 0.0 },
            target: if dim == 1 { 0.44 } else { 0.234 },
            history: Vec::new(),
        }
    }

    fn propose(&self, x: &[f64], rng: &mut SimRng) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        let s = self.proposal.log_scale.exp();
        (0..self.dim)
            .map(|i| {
                let step: f64 = (0..=i).map(|k| self.proposal.chol[i * self.dim + k] * z[k]).sum();
                x[i] + s * step
            })
            .collect()
    }

    /// Robbins-Monro step on the log scale toward the target acceptance.
    fn adapt_scale(&mut self, accepted: bool, iter: usize) {
        let gain = ((iter + 1) as f64).powf(-0.6);
        let a = if accepted { 1.0 } else { 0.0 };
        self.proposal.log_scale += gain * (a - self.target);
    }

    /// Replaces the proposal shape by the empirical covariance of the
    /// recorded history (multi-dimensional blocks only).
    fn adapt_covariance(&mut self) {
        let n = self.history.len();
        if self.dim < 2 || n < 10 * self.dim {
            self.history.clear();
            return;
        }
        let d = self.dim;
        let mean: Vec<f64> = (0..d)
            .map(|i| self.history.iter().map(|h| h[i]).sum::<f64>() / n as f64)
            .collect();
        let mut cov = vec![0.0; d * d];
        for h in &self.history {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += (h[i] - mean[i]) * (h[j] - mean[j]);
                }
            }
        }
        let max_diag = (0..d).map(|i| cov[i * d + i]).fold(0.0, f64::max) / (n - 1) as f64;
        for v in cov.iter_mut() {
            *v /= (n - 1) as f64;
        }
        for i in 0..d {
            cov[i * d + i] += 1e-8 * max_diag + 1e-300;
        }
        if let Some(chol) = cholesky(&cov, d) {
            self.proposal.chol = chol;
            self.proposal.log_scale = (2.38 / (d as f64).sqrt()).ln();
        }
        self.history.clear();
    }
}

struct ChainState {
    theta: Theta,
    /// Intensity at every recorded offset.
    fields: Vec<Vec<f64>>,
    n: LatentState,
    poisson: f64,
}

/// Poisson log-likelihood of latent counts up to terms free of `u`.
fn poisson_kernel(data: &SurveyData, n: &LatentState, fields: &[Vec<f64>], survey_slot: &[usize]) -> f64 {
    let mut total = 0.0;
    for (t, s) in data.surveys.iter().enumerate() {
        let u = &fields[survey_slot[t]];
        for (k, &cell) in s.cells.iter().enumerate() {
            let (ni, ui) = (n.n[t][k], u[cell]);
            if ni > 0 {
                if ui <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                total += ni as f64 * ui.ln();
            }
            total -= ui;
        }
    }
    total
}

struct Context<'a> {
    spec: &'a ModelSpec,
    grid: &'a Grid,
    offsets: Vec<usize>,
    survey_slot: Vec<usize>,
    total_slot: Vec<usize>,
}

impl Context<'_> {
    fn fields(&self, theta: &Theta) -> Result<Vec<Vec<f64>>> {
        self.spec.trajectory(self.grid, theta, &self.offsets)
    }

    fn survey_fields(&self, fields: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.survey_slot.iter().map(|&s| fields[s].clone()).collect()
    }
}

fn build_offsets(data: &SurveyData, extra: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut offsets: Vec<usize> = data.offsets();
    offsets.extend(extra);
    offsets.sort_unstable();
    offsets.dedup();
    let slot = |o: usize| offsets.binary_search(&o).expect("offset present");
    let survey_slot = data.offsets().into_iter().map(slot).collect();
    let total_slot = extra.iter().map(|&o| slot(o)).collect();
    (offsets, survey_slot, total_slot)
}

pub(crate) fn run_single_chain(
    spec: &ModelSpec,
    grid: &Grid,
    data: &SurveyData,
    config: &ChainConfig,
    chain: usize,
    extras: &ChainExtras<'_>,
) -> Result<ChainOutput> {
    let started = Instant::now();
    let (offsets, survey_slot, total_slot) = build_offsets(data, &extras.total_offsets);
    let ctx = Context {
        spec,
        grid,
        offsets,
        survey_slot,
        total_slot,
    };
    let stream = extras.stream.unwrap_or(Stream::Chain(chain as u32));
    let mut rng = substream(config.seed, stream);
    let mut data = data.clone();
    let imputed_slot = data.surveys.len().checked_sub(1);
    let set_imputed = |data: &mut SurveyData, iter: usize| -> Option<usize> {
        let sets = extras.imputed?;
        let k = iter % sets.len();
        let slot = imputed_slot?;
        data.surveys[slot].counts.clone_from(&sets[k]);
        Some(k)
    };
    set_imputed(&mut data, 0);

    let theta = extras.start.clone().unwrap_or_else(|| Theta::initial(spec));
    let fields = ctx.fields(&theta).map_err(|e| {
        Error::Numeric(format!("chain {chain}: initial state cannot be propagated: {e}"))
    })?;
    let n = LatentState::from_counts(&data);
    let poisson = poisson_kernel(&data, &n, &fields, &ctx.survey_slot);
    let lp = log_prior(&theta, spec);
    if !(poisson + lp).is_finite() {
        return Err(Error::Numeric(format!(
            "chain {chain}: non-finite log-posterior at initialization"
        )));
    }
    let mut state = ChainState {
        theta,
        fields,
        n,
        poisson,
    };

    let prior_cv = |tn: &crate::model::TruncatedNormal| tn.sd / tn.mean.abs().max(tn.sd);
    let mut blocks = [
        RwBlock::new(&vec![config.proposal.beta; spec.n_beta()]),
        RwBlock::new(&vec![config.proposal.alpha; spec.n_alpha()]),
        RwBlock::new(&[
            config.proposal.initial * prior_cv(&spec.priors.tau),
            config.proposal.initial * prior_cv(&spec.priors.kappa),
        ]),
    ];
    if let Some(props) = &extras.proposals {
        for (b, p) in blocks.iter_mut().zip(props) {
            if p.chol.len() == b.dim * b.dim {
                b.proposal = p.clone();
            }
        }
    }
    let enabled = [config.blocks.beta, config.blocks.alpha, config.blocks.initial];
    let cov_checkpoints = [config.n_burn / 2, 3 * config.n_burn / 4];
    let history_start = config.n_burn / 4;

    let mut burn_counts = [BlockCounts::default(); 3];
    let mut samp_counts = [BlockCounts::default(); 3];
    let mut scale_trace = Vec::with_capacity(config.n_iter);
    let mut out = ChainOutput {
        draws: Vec::with_capacity(config.retained_per_chain()),
        fields: Vec::new(),
        totals: Vec::new(),
        pairing: Vec::new(),
        diagnostics: ChainDiagnostics {
            chain,
            burn_in: burn_counts,
            sampling: samp_counts,
            scale_trace: Vec::new(),
            final_proposals: Vec::new(),
            seconds: 0.0,
        },
    };
    let mut retained = 0usize;

    for iter in 0..config.n_iter {
        let burning = iter < config.n_burn;
        let imputed_k = set_imputed(&mut data, iter);

        let survey_u = ctx.survey_fields(&state.fields);
        state.n = sample_latent_n(&data, &survey_u, state.theta.phi, &mut rng);
        state.theta.phi = sample_phi(&data, &state.n, &spec.priors, spec.detection_trials, &mut rng);
        state.poisson = poisson_kernel(&data, &state.n, &state.fields, &ctx.survey_slot);

        for b in 0..3 {
            if !enabled[b] {
                continue;
            }
            let current = block_values(&state.theta, b);
            let proposed = blocks[b].propose(&current, &mut rng);
            let mut candidate = state.theta.clone();
            set_block_values(&mut candidate, b, &proposed);
            let counts = if burning { &mut burn_counts[b] } else { &mut samp_counts[b] };
            counts.proposed += 1;
            let mut accepted = false;
            let lp_new = log_prior(&candidate, spec);
            if lp_new.is_finite() {
                match ctx.fields(&candidate) {
                    Ok(fields) => {
                        let poisson = poisson_kernel(&data, &state.n, &fields, &ctx.survey_slot);
                        // Log-scale random walk for (τ, κ): include the Jacobian.
                        let jac = |t: &Theta| if b == 2 { t.tau.ln() + t.kappa.ln() } else { 0.0 };
                        let log_ratio = (lp_new + poisson + jac(&candidate))
                            - (log_prior(&state.theta, spec) + state.poisson + jac(&state.theta));
                        if log_ratio.is_finite() && rng.random::<f64>().ln() < log_ratio {
                            state.theta = candidate;
                            state.fields = fields;
                            state.poisson = poisson;
                            accepted = true;
                        }
                    }
                    Err(Error::Unstable { .. }) | Err(Error::Numeric(_)) => counts.unstable += 1,
                    Err(e) => return Err(e),
                }
            }
            if accepted {
                counts.accepted += 1;
            }
            if burning && config.adapt {
                blocks[b].adapt_scale(accepted, iter);
                if iter >= history_start {
                    blocks[b].history.push(block_values(&state.theta, b));
                }
                if cov_checkpoints.contains(&(iter + 1)) {
                    blocks[b].adapt_covariance();
                }
            }
        }
        scale_trace.push(std::array::from_fn(|b| blocks[b].proposal.log_scale.exp()));

        if !burning && (iter - config.n_burn) % config.thin == 0 {
            let survey_u = ctx.survey_fields(&state.fields);
            let log_post = log_prior(&state.theta, spec)
                + complete_data_loglik(&data, &state.n, &survey_u, state.theta.phi);
            out.draws.push(Draw {
                chain,
                iteration: iter,
                theta: state.theta.clone(),
                log_post,
            });
            out.totals.push(ctx.total_slot.iter().map(|&s| state.fields[s].iter().sum()).collect());
            if let Some(k) = imputed_k {
                out.pairing.push((iter, k));
            }
            if config.field_thin > 0 && retained % config.field_thin == 0 {
                out.fields.push(FieldDraw {
                    chain,
                    iteration: iter,
                    fields: survey_u,
                });
            }
            retained += 1;
        }
        if (iter + 1) % 5000 == 0 {
            let secs = started.elapsed().as_secs_f64();
            info!("chain {chain}: {} / {} iterations ({:.0} it/s)", iter + 1, config.n_iter, (iter + 1) as f64 / secs);
        }
    }
    for b in blocks.iter_mut() {
        b.history.clear();
    }
    out.diagnostics.burn_in = burn_counts;
    out.diagnostics.sampling = samp_counts;
    out.diagnostics.scale_trace = scale_trace;
    out.diagnostics.final_proposals = blocks.iter().map(|b| b.proposal.clone()).collect();
    out.diagnostics.seconds = started.elapsed().as_secs_f64();
    Ok(out)
}

fn block_values(theta: &Theta, b: usize) -> Vec<f64> {
    match b {
        0 => theta.beta.clone(),
        1 => theta.alpha.clone(),
        _ => vec![theta.tau.ln(), theta.kappa.ln()],
    }
}

fn set_block_values(theta: &mut Theta, b: usize, v: &[f64]) {
    match b {
        0 => theta.beta = v.to_vec(),
        1 => theta.alpha = v.to_vec(),
        _ => {
            theta.tau = v[0].exp();
            theta.kappa = v[1].exp();
        }
    }
}

/// Fits the model with `config.n_chains` independent chains, run concurrently.
pub fn run_chain(spec: &ModelSpec, data: &SurveyData, grid: &Grid, config: &ChainConfig) -> Result<PosteriorSamples> {
    run_chains(spec, data, grid, config, None)
}

/// As [`run_chain`], with every chain started at `start` instead of the
/// default initial values.
pub fn run_chain_from(
    spec: &ModelSpec,
    data: &SurveyData,
    grid: &Grid,
    config: &ChainConfig,
    start: &Theta,
) -> Result<PosteriorSamples> {
    if start.beta.len() != spec.n_beta() || start.alpha.len() != spec.n_alpha() || !start.in_support() {
        return Err(Error::Domain("starting values do not fit the model".into()));
    }
    run_chains(spec, data, grid, config, Some(start))
}

fn run_chains(
    spec: &ModelSpec,
    data: &SurveyData,
    grid: &Grid,
    config: &ChainConfig,
    start: Option<&Theta>,
) -> Result<PosteriorSamples> {
    config.validate()?;
    spec.validate(grid)?;
    data.validate_cells(grid)?;
    let extras = ChainExtras {
        start: start.cloned(),
        ..ChainExtras::default()
    };
    let outputs: Vec<ChainOutput> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_single_chain(spec, grid, data, config, c, &extras))
        .collect::<Result<_>>()?;
    let mut samples = PosteriorSamples {
        param_names: spec.param_names(),
        n_chains: config.n_chains,
        start_year: data.start_year,
        last_offset: data.offsets().last().copied().unwrap_or(0),
        draws: Vec::new(),
        fields: Vec::new(),
        chains: Vec::new(),
    };
    for o in outputs {
        samples.draws.extend(o.draws);
        samples.fields.extend(o.fields);
        samples.chains.push(o.diagnostics);
    }
    Ok(samples)
}

/// Split-chain potential scale reduction factor for one scalar quantity.
/// Identical constant chains give 1.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::Domain(
            "R-hat needs at least two chains; rerun with chains >= 2".into(),
        ));
    }
    let len = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = len / 2;
    if half < 2 {
        return Err(Error::Domain("chains are too short for split R-hat".into()));
    }
    let splits: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[len - half..len]])
        .collect();
    let m = splits.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = splits.iter().map(|s| s.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let between = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let within = splits
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if within == 0.0 {
        return Ok(if between == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (n - 1.0) / n * within + between / n;
    Ok((var_plus / within).sqrt())
}

/// R-hat for every scalar parameter, in `param_names` order.
pub fn gelman_rubin(samples: &PosteriorSamples) -> Result<Vec<(String, f64)>> {
    samples
        .param_names
        .iter()
        .enumerate()
        .map(|(p, name)| Ok((name.clone(), split_rhat(&samples.chain_values(p))?)))
        .collect()
}

/// Offset added to the expected count in the chi-square discrepancy.
pub const DISCREPANCY_EPS: f64 = 0.5;

fn discrepancy(observed: impl Iterator<Item = (f64, f64)>) -> f64 {
    observed.map(|(y, e)| (y - e).powi(2) / (e + DISCREPANCY_EPS)).sum()
}

/// Posterior predictive p-value under a chi-square discrepancy, using at most
/// `max_draws` evenly spaced posterior draws.
pub fn bayesian_p_value(
    samples: &PosteriorSamples,
    data: &SurveyData,
    spec: &ModelSpec,
    grid: &Grid,
    max_draws: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    if data.observation_count() == 0 {
        return Err(Error::Domain("Bayesian p-value needs at least one observed cell".into()));
    }
    if samples.is_empty() {
        return Err(Error::Domain("no posterior draws".into()));
    }
    let offsets = data.offsets();
    let stride = samples.len().div_ceil(max_draws.max(1));
    let mut exceed = 0usize;
    let mut used = 0usize;
    for d in samples.draws.iter().step_by(stride) {
        let fields = spec.trajectory(grid, &d.theta, &offsets)?;
        let phi = d.theta.phi;
        let mut d_obs = 0.0;
        let mut d_rep = 0.0;
        for (t, s) in data.surveys.iter().enumerate() {
            let expected: Vec<f64> = s.cells.iter().map(|&c| phi * fields[t][c]).collect();
            d_obs += discrepancy(s.counts.iter().zip(&expected).map(|(&y, &e)| (y as f64, e)));
            d_rep += discrepancy(s.cells.iter().zip(&expected).map(|(&c, &e)| {
                let n = sample_poisson(rng, fields[t][c]);
                let y = Binomial::new(n, phi).map_or(0, |b| b.sample(rng));
                (y as f64, e)
            }));
        }
        if d_rep >= d_obs {
            exceed += 1;
        }
        used += 1;
    }
    Ok(exceed as f64 / used as f64)
}
