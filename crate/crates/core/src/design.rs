//! Design criterion and the search over transect subsets.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Instant;

use log::{info, warn};
use rand::seq::index::sample;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::forecast::{forecast, refit_with_imputation, ForecastDraws, PredictiveBank, RefitConfig, RefitStart};
use crate::grid::{design_cells, Design, Grid, TransectSet};
use crate::mcmc::PosteriorSamples;
use crate::model::{ModelSpec, SurveyData};
use crate::rng::{substream, SimRng, Stream};

/// Monte Carlo variance of the forecast totals with divisor `K`.
pub fn criterion_qd(totals: &[f64]) -> Result<f64> {
    if totals.len() < 2 {
        return Err(Error::Domain(format!(
            "design criterion needs at least two draws, got {}",
            totals.len()
        )));
    }
    let k = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / k;
    Ok(totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / k)
}

/// `ln C(n, k)` through the log-gamma function.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Number of distinct size-`n` designs over `count` transects.
pub fn design_space_size(count: usize, n: usize) -> f64 {
    ln_binomial(count as u64, n as u64).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub design: Design,
    pub q_d: f64,
    /// Number of refit draws the criterion was computed from.
    pub k: usize,
    /// Unstable forecast draws dropped before imputation.
    pub excluded: usize,
    pub mean_total: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    design: Design,
    seed: u64,
    digest: String,
}

/// Immutable inputs shared by all design evaluations of one search.
pub struct EvalContext<'a> {
    pub spec: &'a ModelSpec,
    pub grid: &'a Grid,
    pub data: &'a SurveyData,
    pub transects: &'a TransectSet,
    pub forecast: ForecastDraws,
    pub bank: PredictiveBank,
    pub start: RefitStart,
    pub refit: RefitConfig,
    pub seed: u64,
    digest: String,
    cache: Mutex<HashMap<CacheKey, CriterionResult>>,
}

impl<'a> EvalContext<'a> {
    /// Forecasts the baseline `horizon` intervals ahead and draws the shared
    /// predictive bank.
    pub fn new(
        spec: &'a ModelSpec,
        grid: &'a Grid,
        data: &'a SurveyData,
        transects: &'a TransectSet,
        baseline: &PosteriorSamples,
        horizon: usize,
        refit: RefitConfig,
    ) -> Result<Self> {
        let fore = forecast(baseline, horizon, grid, spec)?;
        let bank = PredictiveBank::draw(&fore, &mut substream(refit.seed, Stream::Imputation))?;
        let start = RefitStart::from_baseline(baseline)?;
        let mut hasher = Sha256::new();
        hasher.update(format!("{refit:?}|{horizon}|{}|{:?}", baseline.len(), start).as_bytes());
        for t in &fore.totals {
            hasher.update(t.to_le_bytes());
        }
        Ok(EvalContext {
            spec,
            grid,
            data,
            transects,
            forecast: fore,
            bank,
            start,
            seed: refit.seed,
            refit,
            digest: hex::encode(hasher.finalize()),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config_digest(&self) -> &str {
        &self.digest
    }

    pub fn cached(&self, design: &Design) -> Option<CriterionResult> {
        self.cache.lock().expect("cache lock").get(&self.key(design)).cloned()
    }

    fn key(&self, design: &Design) -> CacheKey {
        CacheKey {
            design: design.clone(),
            seed: self.seed,
            digest: self.digest.clone(),
        }
    }
}

/// Forecast, impute at the design's cells, refit, and take the variance of
/// the refit forecast totals. Results are cached per design.
pub fn evaluate_design(ctx: &EvalContext<'_>, design: &Design) -> Result<CriterionResult> {
    if let Some(hit) = ctx.cached(design) {
        return Ok(hit);
    }
    let started = Instant::now();
    let cells = design_cells(ctx.transects, design)?;
    let imputed = ctx.bank.restrict(&cells)?;
    let refit = refit_with_imputation(ctx.data, &imputed, ctx.spec, ctx.grid, &ctx.refit, &ctx.start)?;
    let q_d = criterion_qd(&refit.totals)?;
    let result = CriterionResult {
        design: design.clone(),
        q_d,
        k: refit.totals.len(),
        excluded: ctx.forecast.excluded,
        mean_total: refit.totals.iter().sum::<f64>() / refit.totals.len() as f64,
        seconds: started.elapsed().as_secs_f64(),
    };
    ctx.cache
        .lock()
        .expect("cache lock")
        .insert(ctx.key(design), result.clone());
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub design: Design,
    pub result: std::result::Result<CriterionResult, String>,
}

impl Evaluation {
    pub fn q_d(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|r| r.q_d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Swap {
    pub pass: usize,
    pub removed: usize,
    pub added: usize,
    pub design: Design,
    pub q_d: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchReport {
    /// Every evaluation in the order it was requested.
    pub evaluations: Vec<Evaluation>,
    /// Number of leading evaluations that came from the random search.
    pub random_count: usize,
    pub best_random: Option<(Design, f64)>,
    pub start: Option<(Design, f64)>,
    pub exchange: Vec<Swap>,
    pub passes: usize,
    pub final_design: Option<(Design, f64)>,
}

impl SearchReport {
    pub fn random_q_d(&self) -> Vec<f64> {
        self.evaluations[..self.random_count].iter().filter_map(Evaluation::q_d).collect()
    }

    /// Relative reduction of the final criterion against the mean random one.
    pub fn improvement(&self) -> Option<f64> {
        let random = self.random_q_d();
        let (_, fin) = self.final_design.as_ref()?;
        if random.is_empty() {
            return None;
        }
        let mean = random.iter().sum::<f64>() / random.len() as f64;
        Some((mean - fin) / mean)
    }

    /// Recorded criterion of a design, if it was evaluated successfully.
    pub fn q_d_of(&self, design: &Design) -> Option<f64> {
        self.evaluations.iter().find(|e| &e.design == design).and_then(Evaluation::q_d)
    }
}

fn run_pool<T: Send>(parallelism: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn evaluate_many(ctx: &EvalContext<'_>, designs: &[Design]) -> Vec<Evaluation> {
    designs
        .par_iter()
        .map(|d| {
            let result = evaluate_design(ctx, d).map_err(|e| {
                warn!("design [{d}] failed: {e}");
                e.to_string()
            });
            Evaluation {
                design: d.clone(),
                result,
            }
        })
        .collect()
}

/// `m` distinct designs of size `n`, each uniform over all size-`n` subsets.
pub fn random_designs(count: usize, n: usize, m: usize, rng: &mut SimRng) -> Result<Vec<Design>> {
    if n > count {
        return Err(Error::Domain(format!(
            "design size {n} exceeds the {count} available transects"
        )));
    }
    if m == 0 {
        return Err(Error::Domain("number of random designs must be at least 1".into()));
    }
    if (m as f64) > design_space_size(count, n) + 0.5 {
        return Err(Error::Domain(format!(
            "only {:.0} distinct designs exist, {m} requested",
            design_space_size(count, n)
        )));
    }
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let d = Design::new(sample(rng, count, n).into_vec())?;
        if seen.insert(d.clone()) {
            out.push(d);
        }
    }
    Ok(out)
}

/// Evaluates `m` random size-`n` designs with at most `parallelism` workers.
pub fn random_search(ctx: &EvalContext<'_>, m: usize, n: usize, parallelism: usize) -> Result<SearchReport> {
    let mut rng = substream(ctx.seed, Stream::DesignSampling);
    let designs = random_designs(ctx.transects.count(), n, m, &mut rng)?;
    let started = Instant::now();
    let evaluations = run_pool(parallelism, || evaluate_many(ctx, &designs))?;
    info!("{m} random designs evaluated in {:.1}s", started.elapsed().as_secs_f64());
    let best_random = evaluations
        .iter()
        .filter_map(|e| e.q_d().map(|q| (e.design.clone(), q)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    Ok(SearchReport {
        random_count: evaluations.len(),
        evaluations,
        best_random,
        ..SearchReport::default()
    })
}

/// Exchange algorithm: swap each member with its adjacent transects while
/// that strictly lowers the criterion, until a pass accepts nothing.
pub fn exchange_improve(ctx: &EvalContext<'_>, start: &Design, parallelism: usize) -> Result<SearchReport> {
    start.validate(ctx.transects)?;
    let mut report = SearchReport::default();
    let first = run_pool(parallelism, || evaluate_many(ctx, std::slice::from_ref(start)))?;
    let q0 = first[0]
        .q_d()
        .ok_or_else(|| Error::Numeric(format!("start design [{start}] cannot be evaluated")))?;
    report.evaluations.extend(first);
    report.start = Some((start.clone(), q0));
    let (mut current, mut q_cur) = (start.clone(), q0);
    let count = ctx.transects.count();
    loop {
        report.passes += 1;
        let mut accepted = false;
        for t in current.indices().to_vec() {
            let candidates: Vec<Design> = [t.checked_sub(1), Some(t + 1)]
                .into_iter()
                .flatten()
                .filter(|&nb| nb < count && !current.contains(nb))
                .map(|nb| current.swapped(t, nb))
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let evals = run_pool(parallelism, || evaluate_many(ctx, &candidates))?;
            let best = evals
                .iter()
                .filter_map(|e| e.q_d().map(|q| (e.design.clone(), q)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            report.evaluations.extend(evals);
            if let Some((d, q)) = best {
                if q < q_cur {
                    let added = d.indices().iter().copied().find(|x| !current.contains(*x)).expect("swap adds one");
                    info!("pass {}: swap {t} -> {added}, q_d {q_cur:.6} -> {q:.6}", report.passes);
                    report.exchange.push(Swap {
                        pass: report.passes,
                        removed: t,
                        added,
                        design: d.clone(),
                        q_d: q,
                    });
                    current = d;
                    q_cur = q;
                    accepted = true;
                }
            }
        }
        if !accepted {
            break;
        }
    }
    report.final_design = Some((current, q_cur));
    Ok(report)
}

/// Random search followed by exchange refinement of its best design.
pub fn optimize(ctx: &EvalContext<'_>, m: usize, n: usize, parallelism: usize) -> Result<SearchReport> {
    let mut report = random_search(ctx, m, n, parallelism)?;
    let (best, _) = report
        .best_random
        .clone()
        .ok_or_else(|| Error::Numeric("every random design failed to evaluate".into()))?;
    let refined = exchange_improve(ctx, &best, parallelism)?;
    report.evaluations.extend(refined.evaluations);
    report.start = refined.start;
    report.exchange = refined.exchange;
    report.passes = refined.passes;
    report.final_design = refined.final_design;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn qd_examples() {
        assert_eq!(criterion_qd(&[3.0; 10]).unwrap(), 0.0);
        assert_eq!(criterion_qd(&[0.0, 2.0]).unwrap(), 1.0);
        assert!(criterion_qd(&[1.0]).is_err());
    }

    #[test]
    fn qd_normal_variance() {
        let mut rng = substream(4, Stream::Replicate(0));
        let d = Normal::new(0.0, 3.0).unwrap();
        let x: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        assert!((criterion_qd(&x).unwrap() / 9.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn binomial_small_cases() {
        assert!((design_space_size(12, 3) - 220.0).abs() < 1e-9);
        assert!((design_space_size(5, 2) - 10.0).abs() < 1e-12);
        assert!(design_space_size(170, 20) > 1e12);
    }

    #[test]
    fn random_designs_distinct() {
        let mut rng = substream(1, Stream::DesignSampling);
        let ds = random_designs(170, 20, 64, &mut rng).unwrap();
        let set: std::collections::HashSet<_> = ds.iter().collect();
        assert_eq!(set.len(), 64);
        assert!(ds.iter().all(|d| d.len() == 20));
        let full = random_designs(12, 12, 1, &mut rng).unwrap();
        assert_eq!(full[0].indices(), (0..12).collect::<Vec<_>>().as_slice());
        assert!(random_designs(12, 13, 1, &mut rng).is_err());
        assert!(random_designs(5, 2, 11, &mut rng).is_err());
    }

    #[test]
    fn random_designs_uniform() {
        let mut rng = substream(2, Stream::DesignSampling);
        let mut freq: HashMap<Design, usize> = HashMap::new();
        let reps = 100_000;
        for _ in 0..reps {
            let d = random_designs(5, 2, 1, &mut rng).unwrap().pop().unwrap();
            *freq.entry(d).or_default() += 1;
        }
        assert_eq!(freq.len(), 10);
        for c in freq.values() {
            assert!((*c as f64 / reps as f64 - 0.1).abs() < 0.01);
        }
    }
}
