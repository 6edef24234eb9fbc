//! Binomial detection over Poisson abundance driven by ecological diffusion.
//!
//! ```text
//! y_t(s_i) ~ Binomial(n_t(s_i), φ)
//! n_t(s_i) ~ Poisson(u_t(s_i))
//! u_t      = H(α, β) u_{t-1},  u_1 = τ-scaled Gaussian kernel of spread κ
//! log μ    = X β,  γ = W α
//! ```

use rand::Rng;
use rand_distr::{Beta, Distribution, Poisson};
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::propagator::{
    initial_condition, motility_field, propagate_intervals, Boundary, CovariateMatrix,
    GrowthKind, GrowthModel, Propagator,
};

/// Normal distribution truncated to `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
}

impl TruncatedNormal {
    pub fn from_variance(mean: f64, var: f64) -> Self {
        TruncatedNormal { mean, sd: var.sqrt() }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        let z = (x - self.mean) / self.sd;
        // Mass of the untruncated normal above zero, Φ(mean / sd).
        let mass = 0.5 * erfc(-self.mean / (self.sd * std::f64::consts::SQRT_2));
        -0.5 * z * z - self.sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - mass.ln()
    }

    /// Mean of the truncated distribution.
    pub fn truncated_mean(&self) -> f64 {
        let a = -self.mean / self.sd;
        let pdf = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let tail = 0.5 * erfc(a / std::f64::consts::SQRT_2);
        self.mean + self.sd * pdf / tail
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub phi_a: f64,
    pub phi_b: f64,
    pub beta_sd: f64,
    pub alpha_sd: f64,
    pub kappa: TruncatedNormal,
    pub tau: TruncatedNormal,
}

impl Default for Priors {
    fn default() -> Self {
        Priors {
            phi_a: 1.0,
            phi_b: 1.0,
            beta_sd: 1.5,
            alpha_sd: 1.5,
            kappa: TruncatedNormal::from_variance(5.0, 0.001),
            tau: TruncatedNormal::from_variance(500.0, 10.0),
        }
    }
}

impl Priors {
    pub fn validate(&self) -> Result<()> {
        let scales = [
            ("phi_a", self.phi_a),
            ("phi_b", self.phi_b),
            ("beta_sd", self.beta_sd),
            ("alpha_sd", self.alpha_sd),
            ("kappa sd", self.kappa.sd),
            ("tau sd", self.tau.sd),
        ];
        for (name, v) in scales {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("prior parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Independent detection trials collected alongside the surveys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DetectionTrials {
    pub successes: u64,
    pub attempts: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub priors: Priors,
    /// Kernel epicenter `(x, y)` in cell units.
    pub epicenter: (f64, f64),
    pub growth: GrowthKind,
    /// Equilibrium density for logistic growth.
    pub carrying: f64,
    pub boundary: Boundary,
    /// Motility design matrix `X` (first column intercept).
    pub motility: CovariateMatrix,
    /// Growth design matrix `W`.
    pub growth_covariates: CovariateMatrix,
    /// Euler steps per observation interval.
    pub substeps: usize,
    /// Length of one observation interval in model time units.
    pub interval: f64,
    pub detection_trials: Option<DetectionTrials>,
}

impl ModelSpec {
    pub fn new(motility: CovariateMatrix, epicenter: (f64, f64)) -> Self {
        let q = motility.rows();
        ModelSpec {
            priors: Priors::default(),
            epicenter,
            growth: GrowthKind::Malthusian,
            carrying: 1.0,
            boundary: Boundary::Absorbing,
            motility,
            growth_covariates: CovariateMatrix::intercept_only(q),
            substeps: 20,
            interval: 1.0,
            detection_trials: None,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.priors.validate()?;
        let q = grid.cell_count();
        if self.motility.rows() != q || self.growth_covariates.rows() != q {
            return Err(Error::Config(format!(
                "design matrices have {} and {} rows, grid has {q} active cells",
                self.motility.rows(),
                self.growth_covariates.rows()
            )));
        }
        if self.substeps == 0 || !(self.interval > 0.0) {
            return Err(Error::Config("substeps and interval must be positive".into()));
        }
        if self.growth == GrowthKind::Logistic && !(self.carrying > 0.0) {
            return Err(Error::Config("logistic growth needs a positive carrying capacity".into()));
        }
        if let Some(t) = self.detection_trials {
            if t.successes > t.attempts {
                return Err(Error::Config("detection successes exceed attempts".into()));
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.interval / self.substeps as f64
    }

    pub fn n_beta(&self) -> usize {
        self.motility.cols()
    }

    pub fn n_alpha(&self) -> usize {
        self.growth_covariates.cols()
    }

    /// Scalar parameter names in the order of [`Theta::to_vec`].
    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec!["phi".to_string()];
        names.extend((0..self.n_beta()).map(|j| format!("beta{j}")));
        names.extend((0..self.n_alpha()).map(|j| format!("alpha{j}")));
        names.push("tau".into());
        names.push("kappa".into());
        names
    }

    pub fn growth_model(&self, alpha: &[f64]) -> Result<GrowthModel> {
        let q = self.growth_covariates.rows();
        match self.growth {
            GrowthKind::None => Ok(GrowthModel::none(q)),
            GrowthKind::Malthusian => Ok(GrowthModel::malthusian(self.growth_covariates.mul_vec(alpha)?)),
            GrowthKind::Logistic => GrowthModel::logistic(
                self.growth_covariates.mul_vec(alpha)?,
                vec![self.carrying; q],
            ),
        }
    }

    /// Operator for one Euler substep under `theta`. Model distances are in
    /// cell units, so the spacing is 1.
    pub fn propagator(&self, grid: &Grid, theta: &Theta) -> Result<Propagator> {
        let mu = motility_field(&self.motility, &theta.beta)?;
        let growth = self.growth_model(&theta.alpha)?;
        Propagator::build(grid, &mu, &growth, self.dt(), 1.0, self.boundary)
    }

    /// Intensity fields at the given interval offsets from the initial time.
    pub fn trajectory(&self, grid: &Grid, theta: &Theta, offsets: &[usize]) -> Result<Vec<Vec<f64>>> {
        let prop = self.propagator(grid, theta)?;
        let u1 = initial_condition(theta.tau, theta.kappa, self.epicenter, grid)?;
        propagate_intervals(&prop, &u1.u, self.substeps, offsets)
    }
}

/// Parameter vector `θ = (φ, β, α, τ, κ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub phi: f64,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub tau: f64,
    pub kappa: f64,
}

impl Theta {
    /// Sampler starting point: β, α at zero, φ = 0.5, τ and κ at their
    /// truncated prior means.
    pub fn initial(spec: &ModelSpec) -> Self {
        Theta {
            phi: 0.5,
            beta: vec![0.0; spec.n_beta()],
            alpha: vec![0.0; spec.n_alpha()],
            tau: spec.priors.tau.truncated_mean(),
            kappa: spec.priors.kappa.truncated_mean(),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.phi];
        v.extend(&self.beta);
        v.extend(&self.alpha);
        v.push(self.tau);
        v.push(self.kappa);
        v
    }

    pub fn from_slice(v: &[f64], n_beta: usize, n_alpha: usize) -> Result<Self> {
        if v.len() != 3 + n_beta + n_alpha {
            return Err(Error::Domain(format!(
                "parameter vector has {} entries, expected {}",
                v.len(),
                3 + n_beta + n_alpha
            )));
        }
        Ok(Theta {
            phi: v[0],
            beta: v[1..1 + n_beta].to_vec(),
            alpha: v[1 + n_beta..1 + n_beta + n_alpha].to_vec(),
            tau: v[1 + n_beta + n_alpha],
            kappa: v[2 + n_beta + n_alpha],
        })
    }

    pub fn in_support(&self) -> bool {
        self.phi > 0.0
            && self.phi < 1.0
            && self.tau > 0.0
            && self.kappa > 0.0
            && self.beta.iter().chain(&self.alpha).all(|v| v.is_finite())
    }
}

fn ln_normal(x: f64, sd: f64) -> f64 {
    -0.5 * (x / sd).powi(2) - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

fn ln_beta_fn(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Sum of prior log densities; `-inf` outside the support.
pub fn log_prior(theta: &Theta, spec: &ModelSpec) -> f64 {
    if !theta.in_support() {
        return f64::NEG_INFINITY;
    }
    let p = &spec.priors;
    let phi = (p.phi_a - 1.0) * theta.phi.ln() + (p.phi_b - 1.0) * (1.0 - theta.phi).ln()
        - ln_beta_fn(p.phi_a, p.phi_b);
    let beta: f64 = theta.beta.iter().map(|&b| ln_normal(b, p.beta_sd)).sum();
    let alpha: f64 = theta.alpha.iter().map(|&a| ln_normal(a, p.alpha_sd)).sum();
    phi + beta + alpha + p.tau.ln_pdf(theta.tau) + p.kappa.ln_pdf(theta.kappa)
}

/// Counts observed at one survey time.
#[derive(Debug, Clone, PartialEq)]
pub struct Survey {
    pub year: i32,
    pub cells: Vec<usize>,
    pub counts: Vec<u64>,
}

impl Survey {
    pub fn empty(year: i32) -> Self {
        Survey {
            year,
            cells: Vec::new(),
            counts: Vec::new(),
        }
    }
}

/// Survey records ordered by strictly increasing year. `start_year` is the
/// year of the initial condition `u_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyData {
    pub start_year: i32,
    pub surveys: Vec<Survey>,
}

impl SurveyData {
    pub fn new(start_year: i32, surveys: Vec<Survey>) -> Result<Self> {
        let data = SurveyData { start_year, surveys };
        for s in &data.surveys {
            if s.year < start_year {
                return Err(Error::Domain(format!(
                    "survey year {} precedes start year {start_year}",
                    s.year
                )));
            }
            if s.cells.len() != s.counts.len() {
                return Err(Error::Domain(format!("survey {} has mismatched cells/counts", s.year)));
            }
            let mut sorted = s.cells.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Domain(format!("survey {} repeats a cell", s.year)));
            }
        }
        if data.surveys.windows(2).any(|w| w[0].year >= w[1].year) {
            return Err(Error::Domain("survey years must be strictly increasing".into()));
        }
        Ok(data)
    }

    pub fn validate_cells(&self, grid: &Grid) -> Result<()> {
        for s in &self.surveys {
            if let Some(c) = s.cells.iter().find(|&&c| c >= grid.cell_count()) {
                return Err(Error::Domain(format!("survey {} references cell {c} outside the grid", s.year)));
            }
        }
        Ok(())
    }

    /// Interval offsets of each survey from the start year.
    pub fn offsets(&self) -> Vec<usize> {
        self.surveys.iter().map(|s| (s.year - self.start_year) as usize).collect()
    }

    pub fn last_year(&self) -> i32 {
        self.surveys.last().map_or(self.start_year, |s| s.year)
    }

    pub fn observation_count(&self) -> usize {
        self.surveys.iter().map(|s| s.cells.len()).sum()
    }

    pub fn total_count(&self) -> u64 {
        self.surveys.iter().flat_map(|s| &s.counts).sum()
    }
}

/// Latent abundance at the observed cells of each survey, aligned with
/// `SurveyData::surveys[t].cells`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub n: Vec<Vec<u64>>,
}

impl LatentState {
    /// `n = y` everywhere, the sampler's starting point.
    pub fn from_counts(y: &SurveyData) -> Self {
        LatentState {
            n: y.surveys.iter().map(|s| s.counts.clone()).collect(),
        }
    }
}

/// `ln Binomial(y | n, φ)`, `-inf` when `y > n`.
pub fn ln_binomial_pmf(y: u64, n: u64, phi: f64) -> f64 {
    if y > n {
        return f64::NEG_INFINITY;
    }
    let succ = if y == 0 { 0.0 } else { y as f64 * phi.ln() };
    let fail = if n == y { 0.0 } else { (n - y) as f64 * (1.0 - phi).ln() };
    ln_factorial(n) - ln_factorial(y) - ln_factorial(n - y) + succ + fail
}

/// `ln Poisson(n | u)`.
pub fn ln_poisson_pmf(n: u64, u: f64) -> f64 {
    if n == 0 {
        return -u;
    }
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    n as f64 * u.ln() - u - ln_factorial(n)
}

/// Binomial data term plus Poisson process term over every cell carried in
/// `n`. `u[t]` is the full intensity field at survey `t`.
pub fn complete_data_loglik(y: &SurveyData, n: &LatentState, u: &[Vec<f64>], phi: f64) -> f64 {
    let mut total = 0.0;
    for (t, s) in y.surveys.iter().enumerate() {
        for (k, (&cell, &count)) in s.cells.iter().zip(&s.counts).enumerate() {
            let latent = n.n[t][k];
            total += ln_binomial_pmf(count, latent, phi) + ln_poisson_pmf(latent, u[t][cell]);
            if total == f64::NEG_INFINITY {
                return total;
            }
        }
    }
    total
}

/// Poisson variate with mean `lambda` (zero when `lambda` is zero).
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).map_or(0, |d| d.sample(rng) as u64)
}

/// Exact conditional draw `n = y + Poisson(u (1 - φ))` at each observed cell.
pub fn sample_latent_n<R: Rng + ?Sized>(y: &SurveyData, u: &[Vec<f64>], phi: f64, rng: &mut R) -> LatentState {
    let n = y
        .surveys
        .iter()
        .enumerate()
        .map(|(t, s)| {
            s.cells
                .iter()
                .zip(&s.counts)
                .map(|(&cell, &count)| count + sample_poisson(rng, u[t][cell] * (1.0 - phi)))
                .collect()
        })
        .collect();
    LatentState { n }
}

/// Conjugate draw `φ ~ Beta(a + Σy + s, b + Σ(n - y) + (m - s))`.
pub fn sample_phi<R: Rng + ?Sized>(
    y: &SurveyData,
    n: &LatentState,
    priors: &Priors,
    trials: Option<DetectionTrials>,
    rng: &mut R,
) -> f64 {
    let (mut hits, mut misses) = (0u64, 0u64);
    for (t, s) in y.surveys.iter().enumerate() {
        for (k, &count) in s.counts.iter().enumerate() {
            hits += count;
            misses += n.n[t][k] - count;
        }
    }
    if let Some(tr) = trials {
        hits += tr.successes;
        misses += tr.attempts - tr.successes;
    }
    let dist = Beta::new(priors.phi_a + hits as f64, priors.phi_b + misses as f64)
        .expect("beta parameters are positive");
    // Guard the open interval for extreme posteriors.
    dist.sample(rng).clamp(1e-12, 1.0 - 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn spec_for(q: usize) -> ModelSpec {
        let cols: Vec<Vec<f64>> = (0..4).map(|j| (0..q).map(|i| ((i + j) % 3) as f64 - 1.0).collect()).collect();
        let x = CovariateMatrix::from_columns(
            q,
            true,
            &[("a", &cols[0]), ("b", &cols[1]), ("c", &cols[2]), ("d", &cols[3])],
        )
        .unwrap();
        ModelSpec::new(x, (1.0, 1.0))
    }

    /// Textbook densities written out independently of the implementation.
    fn normal_ln(x: f64, m: f64, s: f64) -> f64 {
        (1.0 / (s * (2.0 * std::f64::consts::PI).sqrt()) * (-(x - m) * (x - m) / (2.0 * s * s)).exp()).ln()
    }

    #[test]
    fn log_prior_matches_component_densities() {
        let spec = spec_for(9);
        let theta = Theta {
            phi: 0.5,
            beta: vec![0.0; 5],
            alpha: vec![0.0],
            tau: 500.0,
            kappa: 5.0,
        };
        // Beta(1,1) density is 1; truncation masses are 1 to double precision
        // since both means sit > 150 sd above zero.
        let want = 0.0
            + 5.0 * normal_ln(0.0, 0.0, 1.5)
            + normal_ln(0.0, 0.0, 1.5)
            + normal_ln(500.0, 500.0, 10f64.sqrt())
            + normal_ln(5.0, 5.0, 0.001f64.sqrt());
        assert!((log_prior(&theta, &spec) - want).abs() < 1e-10);
    }

    #[test]
    fn truncation_renormalises() {
        // Half-normal: mass above zero is 1/2, so density doubles.
        let tn = TruncatedNormal { mean: 0.0, sd: 2.0 };
        assert!((tn.ln_pdf(1.0) - (normal_ln(1.0, 0.0, 2.0) + 2f64.ln())).abs() < 1e-12);
        let hn_mean = 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((tn.truncated_mean() - hn_mean).abs() < 1e-12);
    }

    #[test]
    fn log_prior_out_of_support() {
        let spec = spec_for(4);
        let mut theta = Theta::initial(&spec);
        assert!(log_prior(&theta, &spec).is_finite());
        theta.tau = -1.0;
        assert_eq!(log_prior(&theta, &spec), f64::NEG_INFINITY);
        let mut theta = Theta::initial(&spec);
        theta.phi = 1.0;
        assert_eq!(log_prior(&theta, &spec), f64::NEG_INFINITY);
    }

    fn one_cell(y: u64) -> SurveyData {
        SurveyData::new(2000, vec![Survey { year: 2000, cells: vec![0], counts: vec![y] }]).unwrap()
    }

    #[test]
    fn single_cell_loglik() {
        let y = one_cell(2);
        let n = LatentState { n: vec![vec![3]] };
        let ll = complete_data_loglik(&y, &n, &[vec![3.0]], 0.7);
        let want = (3.0 * 0.7 * 0.7 * 0.3f64).ln() + ((-3.0f64).exp() * 27.0 / 6.0).ln();
        assert!((ll - want).abs() < 1e-12);
    }

    #[test]
    fn detection_one_forces_n_equal_y() {
        let y = one_cell(2);
        assert!(complete_data_loglik(&y, &LatentState { n: vec![vec![2]] }, &[vec![3.0]], 1.0).is_finite());
        assert_eq!(
            complete_data_loglik(&y, &LatentState { n: vec![vec![3]] }, &[vec![3.0]], 1.0),
            f64::NEG_INFINITY
        );
        assert_eq!(
            complete_data_loglik(&y, &LatentState { n: vec![vec![1]] }, &[vec![3.0]], 0.5),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn empty_survey_is_pure_poisson() {
        let y = SurveyData::new(2000, vec![Survey::empty(2001)]).unwrap();
        let n = LatentState { n: vec![vec![]] };
        assert_eq!(complete_data_loglik(&y, &n, &[vec![1.0]], 0.3), 0.0);
    }

    #[test]
    fn binomial_term_changes_by_pmf_ratio() {
        let (n, phi) = (9u64, 0.35);
        for y in 0..n {
            let ratio = ln_binomial_pmf(y + 1, n, phi) - ln_binomial_pmf(y, n, phi);
            let want = ((n - y) as f64 / (y + 1) as f64 * phi / (1.0 - phi)).ln();
            assert!((ratio - want).abs() < 1e-12);
        }
    }

    #[test]
    fn loglik_is_invariant_to_cell_relabelling() {
        let u: Vec<f64> = (0..6).map(|i| 1.0 + i as f64).collect();
        let y = SurveyData::new(0, vec![Survey { year: 0, cells: vec![0, 2, 5], counts: vec![1, 0, 4] }]).unwrap();
        let n = LatentState { n: vec![vec![2, 1, 6]] };
        let base = complete_data_loglik(&y, &n, &[u.clone()], 0.6);
        let perm = [3usize, 5, 0, 1, 4, 2];
        let mut u2 = vec![0.0; 6];
        for (i, &p) in perm.iter().enumerate() {
            u2[p] = u[i];
        }
        let y2 = SurveyData::new(0, vec![Survey { year: 0, cells: vec![perm[5], perm[0], perm[2]], counts: vec![4, 1, 0] }]).unwrap();
        let n2 = LatentState { n: vec![vec![6, 2, 1]] };
        assert!((complete_data_loglik(&y2, &n2, &[u2], 0.6) - base).abs() < 1e-12);
    }

    #[test]
    fn latent_draw_with_full_detection_is_exact() {
        let y = one_cell(5);
        let mut rng = substream(1, Stream::Chain(0));
        for _ in 0..100 {
            assert_eq!(sample_latent_n(&y, &[vec![4.0]], 1.0, &mut rng).n[0][0], 5);
        }
    }

    #[test]
    fn phi_conditional_moments() {
        let y = SurveyData::new(0, vec![Survey { year: 0, cells: vec![0, 1], counts: vec![10, 20] }]).unwrap();
        let n = LatentState { n: vec![vec![14, 26]] };
        let mut rng = substream(2, Stream::Chain(0));
        let draws: Vec<f64> = (0..100_000).map(|_| sample_phi(&y, &n, &Priors::default(), None, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let (a, b) = (31.0_f64, 11.0_f64);
        let var = a * b / ((a + b).powi(2) * (a + b + 1.0));
        let se = (var / draws.len() as f64).sqrt();
        assert!((mean - a / (a + b)).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn phi_without_data_is_uniform() {
        let y = SurveyData::new(0, vec![]).unwrap();
        let n = LatentState { n: vec![] };
        let mut rng = substream(3, Stream::Chain(0));
        let draws: Vec<f64> = (0..50_000).map(|_| sample_phi(&y, &n, &Priors::default(), None, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let below = draws.iter().filter(|&&d| d < 0.25).count() as f64 / draws.len() as f64;
        assert!((mean - 0.5).abs() < 0.01);
        assert!((below - 0.25).abs() < 0.01);
    }

    #[test]
    fn detection_trials_shift_phi() {
        let y = SurveyData::new(0, vec![]).unwrap();
        let n = LatentState { n: vec![] };
        let trials = DetectionTrials { successes: 90, attempts: 100 };
        let mut rng = substream(4, Stream::Chain(0));
        let mean = (0..20_000).map(|_| sample_phi(&y, &n, &Priors::default(), Some(trials), &mut rng)).sum::<f64>() / 20_000.0;
        assert!((mean - 91.0 / 102.0).abs() < 0.005);
    }

    #[test]
    fn survey_data_validation() {
        assert!(SurveyData::new(2000, vec![Survey::empty(2001), Survey::empty(2001)]).is_err());
        assert!(SurveyData::new(2000, vec![Survey::empty(1999)]).is_err());
        assert!(SurveyData::new(2000, vec![Survey { year: 2000, cells: vec![1, 1], counts: vec![0, 0] }]).is_err());
        let d = SurveyData::new(2000, vec![Survey::empty(2002), Survey::empty(2005)]).unwrap();
        assert_eq!(d.offsets(), vec![2, 5]);
    }

    #[test]
    fn theta_round_trip() {
        let spec = spec_for(4);
        let theta = Theta { phi: 0.3, beta: vec![1.0, 2.0, 3.0, 4.0, 5.0], alpha: vec![0.2], tau: 9.0, kappa: 2.0 };
        let v = theta.to_vec();
        assert_eq!(v.len(), spec.param_names().len());
        assert_eq!(Theta::from_slice(&v, 5, 1).unwrap(), theta);
    }
}
