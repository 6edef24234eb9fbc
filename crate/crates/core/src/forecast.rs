//! Forecast distribution, posterior predictive future surveys and the
//! multiple-imputation refit.

use rand::seq::SliceRandom;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mcmc::{run_single_chain, ChainConfig, ChainDiagnostics, ChainExtras, Draw, PosteriorSamples, Proposal};
use crate::model::{sample_poisson, ModelSpec, Survey, SurveyData, Theta};
use crate::rng::{SimRng, Stream};

/// Forecast intensity `u_{T+Δ}` for each usable posterior draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDraws {
    pub horizon: usize,
    pub year: i32,
    /// Interval offset of the forecast time from the initial condition.
    pub offset: usize,
    pub fields: Vec<Vec<f64>>,
    pub totals: Vec<f64>,
    pub phi: Vec<f64>,
    /// Index into the source draws of each retained forecast.
    pub source: Vec<usize>,
    /// Draws dropped because their operator was unstable.
    pub excluded: usize,
}

impl ForecastDraws {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Per-cell posterior mean of the forecast intensity.
    pub fn mean_field(&self) -> Vec<f64> {
        let q = self.fields.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; q];
        for f in &self.fields {
            for (m, v) in mean.iter_mut().zip(f) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.fields.len() as f64);
        mean
    }
}

/// Largest tolerated fraction of unstable forecast draws.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.001;

/// Sum of each field over the active cells.
pub fn total_abundance_intensity(fields: &[Vec<f64>]) -> Vec<f64> {
    fields.iter().map(|f| f.iter().sum()).collect()
}

/// Re-propagates every posterior draw `horizon` intervals past the last survey.
pub fn forecast(samples: &PosteriorSamples, horizon: usize, grid: &Grid, spec: &ModelSpec) -> Result<ForecastDraws> {
    if horizon == 0 {
        return Err(Error::Domain("forecast horizon must be at least one interval".into()));
    }
    if samples.is_empty() {
        return Err(Error::Domain("no posterior draws to forecast from".into()));
    }
    let offset = samples.last_offset + horizon;
    let results: Vec<Option<Vec<f64>>> = samples
        .draws
        .par_iter()
        .map(|d| match spec.trajectory(grid, &d.theta, &[offset]) {
            Ok(mut f) => Ok(f.pop()),
            Err(Error::Unstable { .. } | Error::Numeric(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let mut out = ForecastDraws {
        horizon,
        year: samples.start_year + offset as i32,
        offset,
        fields: Vec::with_capacity(results.len()),
        totals: Vec::new(),
        phi: Vec::new(),
        source: Vec::new(),
        excluded: 0,
    };
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Some(f) => {
                out.fields.push(f);
                out.phi.push(samples.draws[k].theta.phi);
                out.source.push(k);
            }
            None => out.excluded += 1,
        }
    }
    if out.excluded as f64 >= MAX_EXCLUDED_FRACTION * samples.len() as f64 && out.excluded > 0 {
        return Err(Error::Numeric(format!(
            "{} of {} forecast draws are unstable (limit {:.1}%)",
            out.excluded,
            samples.len(),
            100.0 * MAX_EXCLUDED_FRACTION
        )));
    }
    out.totals = total_abundance_intensity(&out.fields);
    Ok(out)
}

/// Simulated future counts at a fixed set of cells, one dataset per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedDataset {
    pub year: i32,
    pub cells: Vec<usize>,
    pub n: Vec<Vec<u64>>,
    pub y: Vec<Vec<u64>>,
}

impl ImputedDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Draws `n ~ Poisson(u)` then `y ~ Binomial(n, φ)` at `cells` for each
/// forecast draw.
pub fn posterior_predictive(fore: &ForecastDraws, cells: &[usize], rng: &mut SimRng) -> Result<ImputedDataset> {
    let q = fore.fields.first().map_or(0, Vec::len);
    if let Some(&c) = cells.iter().find(|&&c| c >= q) {
        return Err(Error::Domain(format!("design cell {c} is not an active cell")));
    }
    let mut out = ImputedDataset {
        year: fore.year,
        cells: cells.to_vec(),
        n: Vec::with_capacity(fore.len()),
        y: Vec::with_capacity(fore.len()),
    };
    for (field, &phi) in fore.fields.iter().zip(&fore.phi) {
        let n: Vec<u64> = cells.iter().map(|&c| sample_poisson(rng, field[c])).collect();
        let y = n.iter().map(|&ni| thin(ni, phi, rng)).collect();
        out.n.push(n);
        out.y.push(y);
    }
    Ok(out)
}

fn thin(n: u64, phi: f64, rng: &mut SimRng) -> u64 {
    if n == 0 || phi <= 0.0 {
        0
    } else {
        Binomial::new(n, phi.min(1.0)).expect("valid binomial").sample(rng)
    }
}

/// Predictive draws for every active cell, shared by all designs of one
/// search so their criteria differ only through the cells they observe.
///
/// Dataset `k` is simulated from forecast draw `order[k]`, a seeded
/// permutation, so consecutive datasets come from distant posterior draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveBank {
    pub year: i32,
    pub order: Vec<usize>,
    full: ImputedDataset,
}

impl PredictiveBank {
    pub fn draw(fore: &ForecastDraws, rng: &mut SimRng) -> Result<Self> {
        let q = fore.fields.first().map_or(0, Vec::len);
        let all: Vec<usize> = (0..q).collect();
        let mut order: Vec<usize> = (0..fore.len()).collect();
        order.shuffle(rng);
        let permuted = ForecastDraws {
            fields: order.iter().map(|&i| fore.fields[i].clone()).collect(),
            phi: order.iter().map(|&i| fore.phi[i]).collect(),
            totals: order.iter().map(|&i| fore.totals[i]).collect(),
            source: order.iter().map(|&i| fore.source[i]).collect(),
            ..fore.clone()
        };
        Ok(PredictiveBank {
            year: fore.year,
            full: posterior_predictive(&permuted, &all, rng)?,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.full.len()
    }

    pub fn is_empty(&self) -> bool {
        self.full.is_empty()
    }

    /// The bank's draws at `cells` (sorted active indices).
    pub fn restrict(&self, cells: &[usize]) -> Result<ImputedDataset> {
        let q = self.full.cells.len();
        if let Some(&c) = cells.iter().find(|&&c| c >= q) {
            return Err(Error::Domain(format!("design cell {c} is not an active cell")));
        }
        let pick = |rows: &[Vec<u64>]| rows.iter().map(|r| cells.iter().map(|&c| r[c]).collect()).collect();
        Ok(ImputedDataset {
            year: self.year,
            cells: cells.to_vec(),
            n: pick(&self.full.n),
            y: pick(&self.full.y),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefitConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub seed: u64,
    pub adapt: bool,
}

impl RefitConfig {
    /// Half the baseline chain length. The refit starts from tuned baseline
    /// proposals and re-adapts them to its own target during burn-in.
    pub fn from_baseline(config: &ChainConfig) -> Self {
        RefitConfig {
            n_iter: (config.n_iter / 2).max(2),
            n_burn: config.n_burn / 2,
            thin: config.thin,
            seed: config.seed,
            adapt: true,
        }
    }

    fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            n_iter: self.n_iter,
            n_burn: self.n_burn,
            n_chains: 1,
            thin: self.thin,
            seed: self.seed,
            adapt: self.adapt,
            field_thin: 0,
            ..ChainConfig::default()
        }
    }
}

/// Refit chain output together with the forecast totals it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct RefitSamples {
    pub draws: Vec<Draw>,
    /// `u_total` at the imputed survey time for each retained draw.
    pub totals: Vec<f64>,
    /// `(iteration, imputed dataset index)` for each retained draw.
    pub pairing: Vec<(usize, usize)>,
    pub diagnostics: ChainDiagnostics,
}

/// Starting point for a refit: a baseline draw and tuned proposals.
#[derive(Debug, Clone, PartialEq)]
pub struct RefitStart {
    pub theta: Theta,
    pub proposals: Vec<Proposal>,
}

impl RefitStart {
    /// The last retained draw of the first baseline chain with that chain's
    /// final proposals.
    pub fn from_baseline(samples: &PosteriorSamples) -> Result<Self> {
        let draw = samples
            .draws
            .iter()
            .rfind(|d| d.chain == 0)
            .ok_or_else(|| Error::Domain("baseline has no draws".into()))?;
        Ok(RefitStart {
            theta: draw.theta.clone(),
            proposals: samples.chains.first().map(|c| c.final_proposals.clone()).unwrap_or_default(),
        })
    }
}

/// Refits the model where iteration `j` also conditions on imputed future
/// dataset `j mod K`.
pub fn refit_with_imputation(
    data: &SurveyData,
    imputed: &ImputedDataset,
    spec: &ModelSpec,
    grid: &Grid,
    config: &RefitConfig,
    start: &RefitStart,
) -> Result<RefitSamples> {
    if imputed.is_empty() {
        return Err(Error::Config("imputed dataset has no draws".into()));
    }
    if imputed.year <= data.last_year() {
        return Err(Error::Config(format!(
            "imputed year {} does not follow the last survey year {}",
            imputed.year,
            data.last_year()
        )));
    }
    if let Some(&c) = imputed.cells.iter().find(|&&c| c >= grid.cell_count()) {
        return Err(Error::Config(format!("imputed cell {c} is outside the refit grid")));
    }
    if imputed.y.iter().any(|y| y.len() != imputed.cells.len()) {
        return Err(Error::Config("imputed draws do not match their cell list".into()));
    }
    if start.theta.beta.len() != spec.n_beta() || start.theta.alpha.len() != spec.n_alpha() {
        return Err(Error::Config("baseline draw does not match the refit model".into()));
    }
    let chain = config.chain_config();
    chain.validate()?;
    let mut surveys = data.surveys.clone();
    surveys.push(Survey {
        year: imputed.year,
        cells: imputed.cells.clone(),
        counts: imputed.y[0].clone(),
    });
    let augmented = SurveyData::new(data.start_year, surveys)?;
    let offset = (imputed.year - data.start_year) as usize;
    let extras = ChainExtras {
        total_offsets: vec![offset],
        imputed: Some(&imputed.y),
        start: Some(start.theta.clone()),
        proposals: Some(start.proposals.clone()),
        stream: Some(Stream::RefitChain(0)),
    };
    let out = run_single_chain(spec, grid, &augmented, &chain, 0, &extras)?;
    Ok(RefitSamples {
        totals: out.totals.iter().map(|t| t[0]).collect(),
        draws: out.draws,
        pairing: out.pairing,
        diagnostics: out.diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn fore_with(fields: Vec<Vec<f64>>, phi: Vec<f64>) -> ForecastDraws {
        let k = fields.len();
        ForecastDraws {
            horizon: 1,
            year: 2001,
            offset: 1,
            totals: total_abundance_intensity(&fields),
            fields,
            phi,
            source: (0..k).collect(),
            excluded: 0,
        }
    }

    #[test]
    fn totals_examples() {
        assert_eq!(total_abundance_intensity(&[vec![0.0; 5]]), vec![0.0]);
        assert_eq!(total_abundance_intensity(&[vec![1.0; 100]]), vec![100.0]);
    }

    #[test]
    fn zero_detection_gives_zero_counts() {
        let fore = fore_with(vec![vec![5.0, 8.0]; 50], vec![0.0; 50]);
        let imp = posterior_predictive(&fore, &[0, 1], &mut substream(1, Stream::Imputation)).unwrap();
        assert!(imp.y.iter().flatten().all(|&y| y == 0));
        let empty = posterior_predictive(&fore, &[], &mut substream(1, Stream::Imputation)).unwrap();
        assert!(empty.y.iter().all(Vec::is_empty));
    }

    #[test]
    fn counts_bounded_by_abundance() {
        let fore = fore_with(vec![vec![3.0, 12.0, 0.5]; 500], vec![0.6; 500]);
        let bank = PredictiveBank::draw(&fore, &mut substream(2, Stream::Imputation)).unwrap();
        let imp = bank.restrict(&[0, 2]).unwrap();
        for (n, y) in imp.n.iter().zip(&imp.y) {
            assert!(n.iter().zip(y).all(|(n, y)| y <= n));
        }
        assert!(bank.restrict(&[3]).is_err());
    }
}
