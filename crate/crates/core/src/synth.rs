//! Synthetic ground truth and surveys with known parameters.

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{
    design_cells, enumerate_transects, shoreline_complexity, CovariateKind, CovariateRaster, Design, Grid,
    TransectAxis, TransectSet,
};
use crate::model::{sample_poisson, DetectionTrials, ModelSpec, Survey, SurveyData, Theta};
use crate::propagator::{Boundary, CovariateMatrix};
use crate::rng::{substream, SimRng, Stream};

/// Seed of the fixed covariate fields of the reference scenario.
pub const REFERENCE_COVARIATE_SEED: u64 = 20_130_601;

/// Latent trajectory: intensity and abundance for each year.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub start_year: i32,
    pub u: Vec<Vec<f64>>,
    pub n: Vec<Vec<u64>>,
}

impl Truth {
    pub fn years(&self) -> usize {
        self.u.len()
    }
}

/// Malthusian rate per unit time that yields `annual` growth per interval
/// after `substeps` explicit Euler steps.
pub fn growth_rate_for(annual: f64, substeps: usize, interval: f64) -> f64 {
    let dt = interval / substeps as f64;
    (annual.powf(1.0 / substeps as f64) - 1.0) / dt
}

/// Propagates the kernel initial condition for `years` years (the first year
/// is the initial field) and draws `n_t ~ Poisson(u_t)` cell by cell.
pub fn simulate_truth(
    spec: &ModelSpec,
    theta: &Theta,
    grid: &Grid,
    start_year: i32,
    years: usize,
    rng: &mut SimRng,
) -> Result<Truth> {
    if !theta.in_support() {
        return Err(Error::Domain("true parameters lie outside their support".into()));
    }
    if years == 0 {
        return Err(Error::Domain("need at least one year".into()));
    }
    let offsets: Vec<usize> = (0..years).collect();
    let u = spec.trajectory(grid, theta, &offsets)?;
    let n = u
        .iter()
        .map(|field| field.iter().map(|&ui| sample_poisson(rng, ui)).collect())
        .collect();
    Ok(Truth { start_year, u, n })
}

/// Binomial thinning of the true abundance at `cells` in every listed year.
pub fn simulate_counts(truth: &Truth, schedule: &[(i32, Vec<usize>)], phi: f64, rng: &mut SimRng) -> Result<SurveyData> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::Domain(format!("detection probability {phi} outside [0, 1]")));
    }
    let mut surveys = Vec::with_capacity(schedule.len());
    for (year, cells) in schedule {
        let t = year - truth.start_year;
        if t < 0 || t as usize >= truth.years() {
            return Err(Error::Domain(format!("survey year {year} outside the simulated range")));
        }
        let n = &truth.n[t as usize];
        let counts = cells
            .iter()
            .map(|&c| Binomial::new(n[c], phi).map(|b| b.sample(rng)))
            .collect::<std::result::Result<Vec<u64>, _>>()
            .map_err(|e| Error::Domain(e.to_string()))?;
        surveys.push(Survey {
            year: *year,
            cells: cells.clone(),
            counts,
        });
    }
    SurveyData::new(truth.start_year, surveys)
}

/// Surveys the cells of `design` in every simulated year.
pub fn simulate_survey(
    truth: &Truth,
    transects: &TransectSet,
    design: &Design,
    phi: f64,
    rng: &mut SimRng,
) -> Result<SurveyData> {
    let cells = design_cells(transects, design)?;
    let schedule: Vec<(i32, Vec<usize>)> = (0..truth.years())
        .map(|t| (truth.start_year + t as i32, cells.clone()))
        .collect();
    simulate_counts(truth, &schedule, phi, rng)
}

/// Water mask of the reference scenario: an east-west inlet occupying rows
/// 9 to 20 of a 30x30 raster, with wavy shores and one island.
pub fn reference_grid() -> Grid {
    let (nrows, ncols) = (30usize, 30usize);
    let mut mask = vec![false; nrows * ncols];
    for c in 0..ncols {
        let x = c as f64;
        let north = 9 + (1.5 + 1.5 * (0.5 * x).sin()).floor() as usize;
        let south = 20 - (1.5 + 1.5 * (0.4 * x + 1.0).cos()).floor() as usize;
        for r in north..=south {
            let island = (13..=15).contains(&r) && (17..=20).contains(&c);
            mask[r * ncols + c] = !island;
        }
    }
    Grid::new(nrows, ncols, 400.0, mask).expect("reference mask is valid")
}

/// Separable Gaussian blur of white noise over the full raster, rescaled to
/// unit standard deviation.
fn smooth_field(nrows: usize, ncols: usize, sd: f64, rng: &mut SimRng) -> Vec<f64> {
    let noise: Vec<f64> = (0..nrows * ncols).map(|_| rng.sample(StandardNormal)).collect();
    let reach = (3.0 * sd).ceil() as isize;
    let kernel: Vec<f64> = (-reach..=reach).map(|d| (-0.5 * (d as f64 / sd).powi(2)).exp()).collect();
    let blur = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for r in 0..nrows as isize {
            for c in 0..ncols as isize {
                let mut acc = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    let d = k as isize - reach;
                    let (rr, cc) = if horizontal { (r, c + d) } else { (r + d, c) };
                    let rr = rr.clamp(0, nrows as isize - 1) as usize;
                    let cc = cc.clamp(0, ncols as isize - 1) as usize;
                    acc += w * src[rr * ncols + cc];
                }
                out[r as usize * ncols + c as usize] = acc;
            }
        }
        out
    };
    let f = blur(&blur(&noise, true), false);
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    let sd = (f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / f.len() as f64).sqrt();
    f.iter().map(|v| (v - mean) / sd).collect()
}

/// Euclidean distance (meters) from each active cell to the nearest inactive
/// raster cell.
pub fn distance_to_shore(grid: &Grid) -> Result<Vec<f64>> {
    let land: Vec<(f64, f64)> = (0..grid.nrows() * grid.ncols())
        .filter(|&k| !grid.mask()[k])
        .map(|k| ((k / grid.ncols()) as f64, (k % grid.ncols()) as f64))
        .collect();
    if land.is_empty() {
        return Err(Error::Domain("grid has no land cells".into()));
    }
    Ok((0..grid.cell_count())
        .map(|i| {
            let (r, c) = grid.position(i);
            let d2 = land
                .iter()
                .map(|&(lr, lc)| (lr - r as f64).powi(2) + (lc - c as f64).powi(2))
                .fold(f64::INFINITY, f64::min);
            d2.sqrt() * grid.cell_size()
        })
        .collect())
}

/// Raw (unstandardized) covariates: shallow-water indicator, distance to
/// shore, depth times slope, and shoreline complexity.
pub fn reference_covariates(grid: &Grid, rng: &mut SimRng) -> Result<Vec<CovariateRaster>> {
    let (nr, nc) = (grid.nrows(), grid.ncols());
    let dist = distance_to_shore(grid)?;
    let noise = grid.from_raster(&smooth_field(nr, nc, 3.0, rng))?;
    let depth: Vec<f64> = dist.iter().zip(&noise).map(|(d, z)| (15.0 + 0.05 * d + 12.0 * z).max(1.0)).collect();
    let depth_raster = grid.to_raster(&depth, 0.0);
    let slope: Vec<f64> = (0..grid.cell_count())
        .map(|i| {
            let (r, c) = grid.position(i);
            let at = |rr: usize, cc: usize| depth_raster[rr * nc + cc];
            let gx = (at(r, (c + 1).min(nc - 1)) - at(r, c.saturating_sub(1))) / 2.0;
            let gy = (at((r + 1).min(nr - 1), c) - at(r.saturating_sub(1), c)) / 2.0;
            (gx * gx + gy * gy).sqrt() / grid.cell_size()
        })
        .collect();
    let shallow: Vec<f64> = depth.iter().map(|&d| if d < 40.0 { 1.0 } else { 0.0 }).collect();
    let depth_slope: Vec<f64> = depth.iter().zip(&slope).map(|(d, s)| d * s).collect();
    let shore_mask = grid.raster_mask_of(&grid.shoreline_cells());
    Ok(vec![
        CovariateRaster::new(grid, "shallow", shallow, CovariateKind::Indicator)?,
        CovariateRaster::new(grid, "shore_distance", dist, CovariateKind::Continuous)?,
        CovariateRaster::new(grid, "depth_slope", depth_slope, CovariateKind::Continuous)?,
        shoreline_complexity(grid, &shore_mask, 1000.0)?,
    ])
}

/// Motility design matrix with an intercept and standardized continuous
/// covariates.
pub fn design_matrix(grid: &Grid, covariates: &[CovariateRaster]) -> Result<CovariateMatrix> {
    let prepared = covariates
        .iter()
        .map(|c| match c.kind {
            CovariateKind::Continuous => c.standardized(),
            CovariateKind::Indicator => Ok(c.clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    let cols: Vec<(&str, &[f64])> = prepared.iter().map(|c| (c.name.as_str(), c.values.as_slice())).collect();
    CovariateMatrix::from_columns(grid.cell_count(), true, &cols)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub start_year: i32,
    pub years: usize,
    pub phi: f64,
    pub annual_growth: f64,
    pub tau: f64,
    pub kappa: f64,
    /// Intercept followed by one coefficient per covariate.
    pub beta: Vec<f64>,
    pub substeps: usize,
    pub boundary: Boundary,
    /// Epicenter in cell units.
    pub epicenter: (f64, f64),
    /// Size of the auxiliary detection experiment; 0 disables it.
    pub detection_attempts: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            start_year: 2000,
            years: 8,
            phi: 0.7,
            annual_growth: 1.215,
            tau: 500.0,
            kappa: 5.0,
            beta: vec![0.2, 0.3, -0.25, 0.2, -0.3],
            substeps: 20,
            boundary: Boundary::Reflecting,
            epicenter: (3.5, 14.5),
            detection_attempts: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: Grid,
    pub covariates: Vec<CovariateRaster>,
    pub spec: ModelSpec,
    pub truth_theta: Theta,
    pub transects: TransectSet,
    pub truth: Truth,
    /// Every transect surveyed in every year.
    pub data: SurveyData,
}

/// Reference scenario: fixed landscape, with truth and surveys drawn from
/// `config.seed`.
pub fn reference_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    let grid = reference_grid();
    let covariates = reference_covariates(&grid, &mut substream(REFERENCE_COVARIATE_SEED, Stream::Covariates))?;
    let x = design_matrix(&grid, &covariates)?;
    if config.beta.len() != x.cols() {
        return Err(Error::Config(format!(
            "scenario needs {} motility coefficients, got {}",
            x.cols(),
            config.beta.len()
        )));
    }
    let mut spec = ModelSpec::new(x, config.epicenter);
    spec.boundary = config.boundary;
    spec.substeps = config.substeps;
    let truth_theta = Theta {
        phi: config.phi,
        beta: config.beta.clone(),
        alpha: vec![growth_rate_for(config.annual_growth, config.substeps, spec.interval)],
        tau: config.tau,
        kappa: config.kappa,
    };
    let mut rng = substream(config.seed, Stream::Truth);
    let truth = simulate_truth(&spec, &truth_theta, &grid, config.start_year, config.years, &mut rng)?;
    let transects = enumerate_transects(&grid, TransectAxis::Rows);
    let mut rng = substream(config.seed, Stream::Survey);
    let data = simulate_survey(&truth, &transects, &Design::all(&transects), config.phi, &mut rng)?;
    if config.detection_attempts > 0 {
        let successes = Binomial::new(config.detection_attempts, config.phi)
            .map_err(|e| Error::Domain(e.to_string()))?
            .sample(&mut rng);
        spec.detection_trials = Some(DetectionTrials {
            successes,
            attempts: config.detection_attempts,
        });
    }
    Ok(Scenario {
        config: config.clone(),
        grid,
        covariates,
        spec,
        truth_theta,
        transects,
        truth,
        data,
    })
}
