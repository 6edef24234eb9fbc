//! Finite-difference ecological diffusion with optional growth.
//!
//! The operator discretizes `du/dt = Δ[μ u] + f(u)` on the active cells of a
//! [`Grid`] with forward Euler in time. Because motility sits inside both
//! derivatives, the flux from cell `j` into a neighbor `i` is proportional to
//! `μ_j u_j`, so the off-diagonal weight from `j` to `i` is `dt μ_j / h²` and
//! the matrix has five non-zero bands.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Treatment of links to inactive cells and to the outside of the raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Every cell has four links; mass sent to an inactive neighbor is lost.
    #[default]
    Absorbing,
    /// Only links between active cells exist; mass is conserved.
    Reflecting,
}

/// Dense `q × p` design matrix, row-major, one row per active cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    names: Vec<String>,
    rows: usize,
    data: Vec<f64>,
}

impl CovariateMatrix {
    /// Builds the matrix from columns; an intercept column of ones is
    /// prepended when `intercept` is true.
    pub fn from_columns(rows: usize, intercept: bool, columns: &[(&str, &[f64])]) -> Result<Self> {
        let mut names = Vec::new();
        let mut cols: Vec<&[f64]> = Vec::new();
        let ones = vec![1.0; rows];
        if intercept {
            names.push("intercept".to_string());
            cols.push(&ones);
        }
        for (name, col) in columns {
            if col.len() != rows {
                return Err(Error::Domain(format!(
                    "column '{name}' has {} rows, expected {rows}",
                    col.len()
                )));
            }
            names.push(name.to_string());
            cols.push(col);
        }
        let p = cols.len();
        let mut data = vec![0.0; rows * p];
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[i * p + j] = v;
            }
        }
        Ok(CovariateMatrix { names, rows, data })
    }

    pub fn intercept_only(rows: usize) -> Self {
        CovariateMatrix {
            names: vec!["intercept".into()],
            rows,
            data: vec![1.0; rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.cols();
        &self.data[i * p..(i + 1) * p]
    }

    /// `X b`, one value per row.
    pub fn mul_vec(&self, coef: &[f64]) -> Result<Vec<f64>> {
        if coef.len() != self.cols() {
            return Err(Error::Domain(format!(
                "expected {} coefficients, got {}",
                self.cols(),
                coef.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(coef).map(|(x, b)| x * b).sum())
            .collect())
    }
}

/// Motility `μ` per active cell, in (length unit)² per time.
#[derive(Debug, Clone, PartialEq)]
pub struct MotilityField(pub Vec<f64>);

impl MotilityField {
    pub fn constant(q: usize, mu: f64) -> Self {
        MotilityField(vec![mu; q])
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

/// Log-linear motility, `μ_i = exp(x_i' β)`.
pub fn motility_field(x: &CovariateMatrix, beta: &[f64]) -> Result<MotilityField> {
    let eta = x.mul_vec(beta)?;
    let mu: Vec<f64> = eta.into_iter().map(f64::exp).collect();
    if let Some(i) = mu.iter().position(|m| !m.is_finite() || *m <= 0.0) {
        return Err(Error::Numeric(format!(
            "motility at cell {i} is {} (linear predictor overflow)",
            mu[i]
        )));
    }
    Ok(MotilityField(mu))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GrowthKind {
    None,
    #[default]
    Malthusian,
    Logistic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthModel {
    pub kind: GrowthKind,
    /// Instantaneous growth rate per cell (1/time).
    pub gamma: Vec<f64>,
    /// Equilibrium density per cell; used only by logistic growth.
    pub carrying: Vec<f64>,
}

impl GrowthModel {
    pub fn none(q: usize) -> Self {
        GrowthModel {
            kind: GrowthKind::None,
            gamma: vec![0.0; q],
            carrying: Vec::new(),
        }
    }

    pub fn malthusian(gamma: Vec<f64>) -> Self {
        GrowthModel {
            kind: GrowthKind::Malthusian,
            gamma,
            carrying: Vec::new(),
        }
    }

    pub fn logistic(gamma: Vec<f64>, carrying: Vec<f64>) -> Result<Self> {
        if carrying.len() != gamma.len() {
            return Err(Error::Domain("carrying capacity length mismatch".into()));
        }
        if let Some(i) = carrying.iter().position(|k| !(*k > 0.0)) {
            return Err(Error::Domain(format!(
                "logistic growth needs positive carrying capacity; cell {i} has {}",
                carrying[i]
            )));
        }
        Ok(GrowthModel {
            kind: GrowthKind::Logistic,
            gamma,
            carrying,
        })
    }

    fn min_gamma(&self) -> f64 {
        match self.kind {
            GrowthKind::None => 0.0,
            _ => self.gamma.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    pub max_dt: f64,
}

/// Safety margin on the explicit-scheme bound.
pub const STABILITY_MARGIN: f64 = 0.05;

/// Explicit-Euler stability: `dt (4 max μ / h² + max(0, -min γ)) < 1 - margin`.
/// A step exactly at the bound is reported unstable.
pub fn stability_check(mu: &MotilityField, dt: f64, h: f64, growth: &GrowthModel) -> StabilityReport {
    let rate = 4.0 * mu.max() / (h * h) + (-growth.min_gamma()).max(0.0);
    let limit = 1.0 - STABILITY_MARGIN;
    let max_dt = if rate > 0.0 { limit / rate } else { f64::INFINITY };
    StabilityReport {
        stable: dt.is_finite() && dt > 0.0 && dt * rate < limit,
        max_dt,
    }
}

const NO_NEIGHBOR: u32 = u32::MAX;

/// One-step operator `u_t = H u_{t-1}` stored as five bands in
/// (center, east, west, north, south) order.
#[derive(Debug, Clone)]
pub struct Propagator {
    bands: [Vec<f64>; 5],
    neighbors: [Vec<u32>; 4],
    dt: f64,
    h: f64,
    boundary: Boundary,
    logistic: Option<(Vec<f64>, Vec<f64>)>,
}

impl Propagator {
    pub fn build(
        grid: &Grid,
        mu: &MotilityField,
        growth: &GrowthModel,
        dt: f64,
        h: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        let q = grid.cell_count();
        if mu.0.len() != q || growth.gamma.len() != q {
            return Err(Error::Domain(format!(
                "field lengths ({}, {}) do not match {q} active cells",
                mu.0.len(),
                growth.gamma.len()
            )));
        }
        let report = stability_check(mu, dt, h, growth);
        if !report.stable {
            return Err(Error::Unstable {
                dt,
                max_dt: report.max_dt,
            });
        }
        let w = dt / (h * h);
        let mut bands: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; q]);
        let mut neighbors: [Vec<u32>; 4] = std::array::from_fn(|_| vec![NO_NEIGHBOR; q]);
        for i in 0..q {
            let nbrs = grid.neighbors(i);
            let mut links = 0usize;
            for (b, nb) in nbrs.iter().enumerate() {
                if let Some(j) = *nb {
                    neighbors[b][i] = j as u32;
                    bands[b + 1][i] = w * mu.0[j];
                    links += 1;
                }
            }
            let c = match boundary {
                Boundary::Absorbing => 4,
                Boundary::Reflecting => links,
            };
            let gamma = match growth.kind {
                GrowthKind::Malthusian => growth.gamma[i],
                GrowthKind::None | GrowthKind::Logistic => 0.0,
            };
            bands[0][i] = 1.0 + dt * gamma - c as f64 * w * mu.0[i];
        }
        let logistic = (growth.kind == GrowthKind::Logistic)
            .then(|| (growth.gamma.clone(), growth.carrying.clone()));
        Ok(Propagator {
            bands,
            neighbors,
            dt,
            h,
            boundary,
            logistic,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.bands[0].len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Number of bands holding at least one non-zero entry.
    pub fn band_count(&self) -> usize {
        self.bands
            .iter()
            .filter(|b| b.iter().any(|&v| v != 0.0))
            .count()
    }

    /// One explicit step, writing into `out`.
    pub fn step(&self, u: &[f64], out: &mut [f64]) {
        let [c, e, w, n, s] = &self.bands;
        let [ne, nw, nn, ns] = &self.neighbors;
        let get = |idx: u32| if idx == NO_NEIGHBOR { 0.0 } else { u[idx as usize] };
        for i in 0..u.len() {
            out[i] = c[i] * u[i]
                + e[i] * get(ne[i])
                + w[i] * get(nw[i])
                + n[i] * get(nn[i])
                + s[i] * get(ns[i]);
        }
        if let Some((gamma, carrying)) = &self.logistic {
            for i in 0..u.len() {
                out[i] += self.dt * gamma[i] * u[i] * (1.0 - u[i] / carrying[i]);
            }
        }
    }

    /// Dense copy of the linear part of `H`; intended for small grids.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let q = self.cell_count();
        let mut m = vec![vec![0.0; q]; q];
        for i in 0..q {
            m[i][i] = self.bands[0][i];
            for b in 0..4 {
                let j = self.neighbors[b][i];
                if j != NO_NEIGHBOR {
                    m[i][j as usize] += self.bands[b + 1][i];
                }
            }
        }
        m
    }
}

/// Abundance intensity (expected animals per cell) at time index `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityField {
    pub u: Vec<f64>,
    pub t: usize,
}

impl IntensityField {
    pub fn total(&self) -> f64 {
        self.u.iter().sum()
    }
}

/// Applies `H` `steps` times, returning `u_1, ..., u_{steps+1}`.
pub fn propagate(prop: &Propagator, u1: &IntensityField, steps: usize) -> Result<Vec<IntensityField>> {
    check_initial(&u1.u, prop.cell_count())?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(u1.clone());
    let mut cur = u1.u.clone();
    let mut next = vec![0.0; cur.len()];
    for k in 1..=steps {
        prop.step(&cur, &mut next);
        check_finite(&next, k)?;
        std::mem::swap(&mut cur, &mut next);
        out.push(IntensityField {
            u: cur.clone(),
            t: u1.t + k,
        });
    }
    Ok(out)
}

/// Propagates `u1` with `substeps` Euler steps per observation interval and
/// returns the fields at the requested interval offsets (ascending, offset 0
/// is `u1` itself).
pub fn propagate_intervals(
    prop: &Propagator,
    u1: &[f64],
    substeps: usize,
    offsets: &[usize],
) -> Result<Vec<Vec<f64>>> {
    check_initial(u1, prop.cell_count())?;
    if offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("observation offsets must be ascending".into()));
    }
    let mut out = Vec::with_capacity(offsets.len());
    let mut cur = u1.to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut at = 0usize;
    for &target in offsets {
        while at < target {
            for s in 0..substeps {
                prop.step(&cur, &mut next);
                std::mem::swap(&mut cur, &mut next);
                if s + 1 == substeps {
                    check_finite(&cur, at * substeps + s + 1)?;
                }
            }
            at += 1;
        }
        out.push(cur.clone());
    }
    Ok(out)
}

fn check_initial(u: &[f64], q: usize) -> Result<()> {
    if u.len() != q {
        return Err(Error::Domain(format!(
            "initial field has {} cells, operator has {q}",
            u.len()
        )));
    }
    if let Some(i) = u.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "initial field must be finite and nonnegative; cell {i} is {}",
            u[i]
        )));
    }
    Ok(())
}

fn check_finite(u: &[f64], step: usize) -> Result<()> {
    if u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite intensity at step {step}")))
    }
}

/// Scaled Gaussian-kernel initial condition in cell units.
///
/// `epicenter` is `(x, y) = (column, row)` in cell units, with cell centers at
/// half-integers; `kappa` is the kernel spread in cells. Each cell has unit
/// area, so the field sums to `tau` over active cells.
pub fn initial_condition(tau: f64, kappa: f64, epicenter: (f64, f64), grid: &Grid) -> Result<IntensityField> {
    if !(tau > 0.0) || !(kappa > 0.0) {
        return Err(Error::Domain(format!(
            "kernel mass and spread must be positive (tau = {tau}, kappa = {kappa})"
        )));
    }
    let (dx, dy) = epicenter;
    if !(0.0..=grid.ncols() as f64).contains(&dx) || !(0.0..=grid.nrows() as f64).contains(&dy) {
        return Err(Error::Domain(format!(
            "epicenter ({dx}, {dy}) lies outside the {}x{} grid",
            grid.ncols(),
            grid.nrows()
        )));
    }
    let k2 = kappa * kappa;
    let weights: Vec<f64> = (0..grid.cell_count())
        .map(|i| {
            let (x, y) = grid.center_cells(i);
            (-((x - dx).powi(2) + (y - dy).powi(2)) / k2).exp()
        })
        .collect();
    let mass: f64 = weights.iter().sum();
    if !(mass >= f64::MIN_POSITIVE) {
        return Err(Error::Numeric(format!(
            "initial kernel mass underflows (kappa = {kappa} cells); use a finer grid or a wider kernel"
        )));
    }
    Ok(IntensityField {
        u: weights.into_iter().map(|w| tau * w / mass).collect(),
        t: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mu(q: usize, seed: u64, lo: f64, hi: f64) -> MotilityField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MotilityField((0..q).map(|_| rng.random_range(lo..hi)).collect())
    }

    #[test]
    fn motility_examples() {
        let g = Grid::full(3, 4, 1.0).unwrap();
        let q = g.cell_count();
        let z = vec![0.5; q];
        let x = CovariateMatrix::from_columns(q, true, &[("a", &z), ("b", &z), ("c", &z), ("d", &z)]).unwrap();
        assert!(motility_field(&x, &[0.0; 5]).unwrap().0.iter().all(|&m| m == 1.0));
        let mu = motility_field(&x, &[2f64.ln(), 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(mu.0.iter().all(|&m| (m - 2.0).abs() < 1e-15));
        assert!(motility_field(&x, &[800.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(motility_field(&x, &[0.0; 3]).is_err());
    }

    #[test]
    fn motility_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = 37;
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..q).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let beta: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = CovariateMatrix::from_columns(q, true, &[("a", &cols[0]), ("b", &cols[1]), ("c", &cols[2])]).unwrap();
        let mu = motility_field(&x, &beta).unwrap();
        for i in 0..q {
            let mut eta = beta[0];
            for j in 0..3 {
                eta += cols[j][i] * beta[j + 1];
            }
            assert!((mu.0[i] - eta.exp()).abs() <= 1e-14 * eta.exp());
        }
    }

    #[test]
    fn stability_examples() {
        let g = GrowthModel::none(1);
        let mu = MotilityField(vec![100.0]);
        let r = stability_check(&mu, 100.0, 400.0, &g);
        assert!((r.max_dt - 380.0).abs() < 1e-9);
        assert!(r.stable);
        assert!(!stability_check(&mu, 400.0, 400.0, &g).stable);
        assert!(!stability_check(&mu, r.max_dt, 400.0, &g).stable);
        let shrink = GrowthModel::malthusian(vec![-2.0]);
        let r = stability_check(&MotilityField(vec![0.0]), 0.1, 1.0, &shrink);
        assert!((r.max_dt - 0.475).abs() < 1e-12);
    }

    #[test]
    fn unstable_build_reports_bound() {
        let g = Grid::full(3, 3, 1.0).unwrap();
        let err = Propagator::build(&g, &MotilityField::constant(9, 1.0), &GrowthModel::none(9), 0.5, 1.0, Boundary::Absorbing)
            .unwrap_err();
        match err {
            Error::Unstable { max_dt, .. } => assert!((max_dt - 0.2375).abs() < 1e-12),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn constant_mu_interior_structure() {
        let g = Grid::full(3, 3, 1.0).unwrap();
        let (dt, mu) = (0.1, 2.0);
        let p = Propagator::build(&g, &MotilityField::constant(9, mu), &GrowthModel::none(9), dt, 1.0, Boundary::Reflecting).unwrap();
        let h = p.to_dense();
        let centre = g.index_of(1, 1).unwrap();
        assert!((h[centre][centre] - (1.0 - 4.0 * dt * mu)).abs() < 1e-15);
        for nb in g.neighbors(centre).into_iter().flatten() {
            assert!((h[centre][nb] - dt * mu).abs() < 1e-15);
        }
        for j in 0..9 {
            let col: f64 = (0..9).map(|i| h[i][j]).sum();
            assert!((col - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_motility_is_scaled_identity() {
        let g = Grid::full(4, 4, 1.0).unwrap();
        let a0 = 0.3;
        let p = Propagator::build(&g, &MotilityField::constant(16, 0.0), &GrowthModel::malthusian(vec![a0; 16]), 0.05, 1.0, Boundary::Absorbing).unwrap();
        let h = p.to_dense();
        for i in 0..16 {
            for j in 0..16 {
                let want = if i == j { 1.0 + 0.05 * a0 } else { 0.0 };
                assert_eq!(h[i][j], want);
            }
        }
    }

    /// Direct evaluation of u + dt Δ[μ u] with a five-point stencil on the
    /// raster, treating outside/inactive values per boundary mode.
    fn stencil_step(g: &Grid, mu: &[f64], u: &[f64], dt: f64, h: f64, reflecting: bool) -> Vec<f64> {
        let (nr, nc) = (g.nrows() as isize, g.ncols() as isize);
        let flux = |r: isize, c: isize| -> Option<f64> {
            if r < 0 || c < 0 || r >= nr || c >= nc {
                return None;
            }
            g.index_of(r as usize, c as usize).map(|j| mu[j] * u[j])
        };
        (0..g.cell_count())
            .map(|i| {
                let (r, c) = g.position(i);
                let (r, c) = (r as isize, c as isize);
                let me = mu[i] * u[i];
                let mut lap = 0.0;
                for (dr, dc) in [(0, 1), (0, -1), (-1, 0), (1, 0)] {
                    match flux(r + dr, c + dc) {
                        Some(v) => lap += v - me,
                        None if reflecting => {}
                        None => lap += 0.0 - me,
                    }
                }
                u[i] + dt * lap / (h * h)
            })
            .collect()
    }

    #[test]
    fn heterogeneous_step_matches_stencil() {
        let mut mask = vec![true; 16];
        mask[5] = false;
        let g = Grid::new(4, 4, 1.0, mask).unwrap();
        let q = g.cell_count();
        let mu = random_mu(q, 5, 0.1, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u: Vec<f64> = (0..q).map(|_| rng.random_range(0.0..10.0)).collect();
        let h = 2.0;
        let dt = 0.9 * stability_check(&mu, 1.0, h, &GrowthModel::none(q)).max_dt;
        for (boundary, reflecting) in [(Boundary::Absorbing, false), (Boundary::Reflecting, true)] {
            let p = Propagator::build(&g, &mu, &GrowthModel::none(q), dt, h, boundary).unwrap();
            let mut out = vec![0.0; q];
            p.step(&u, &mut out);
            let want = stencil_step(&g, &mu.0, &u, dt, h, reflecting);
            for i in 0..q {
                assert!((out[i] - want[i]).abs() < 1e-12, "cell {i}: {} vs {}", out[i], want[i]);
            }
        }
    }

    #[test]
    fn zero_steps_returns_input() {
        let g = Grid::full(2, 2, 1.0).unwrap();
        let p = Propagator::build(&g, &MotilityField::constant(4, 0.1), &GrowthModel::none(4), 0.1, 1.0, Boundary::Absorbing).unwrap();
        let u1 = IntensityField { u: vec![1.0, 2.0, 3.0, 4.0], t: 1 };
        let out = propagate(&p, &u1, 0).unwrap();
        assert_eq!(out, vec![u1]);
    }

    #[test]
    fn malthusian_scalar_recursion() {
        let g = Grid::full(3, 3, 1.0).unwrap();
        let (dt, gamma) = (0.1, 0.25);
        let p = Propagator::build(&g, &MotilityField::constant(9, 0.0), &GrowthModel::malthusian(vec![gamma; 9]), dt, 1.0, Boundary::Absorbing).unwrap();
        let u1 = IntensityField { u: (1..=9).map(f64::from).collect(), t: 1 };
        let out = propagate(&p, &u1, 12).unwrap();
        for (t, field) in out.iter().enumerate() {
            let f = (1.0 + dt * gamma).powi(t as i32);
            for i in 0..9 {
                assert!((field.u[i] - f * u1.u[i]).abs() <= 1e-13 * f * u1.u[i]);
            }
        }
    }

    #[test]
    fn logistic_approaches_carrying_capacity() {
        let g = Grid::full(1, 1, 1.0).unwrap();
        let growth = GrowthModel::logistic(vec![1.0], vec![50.0]).unwrap();
        let p = Propagator::build(&g, &MotilityField::constant(1, 0.0), &growth, 0.05, 1.0, Boundary::Reflecting).unwrap();
        let out = propagate(&p, &IntensityField { u: vec![1.0], t: 1 }, 2000).unwrap();
        assert!((out.last().unwrap().u[0] - 50.0).abs() < 1e-6);
        assert!(GrowthModel::logistic(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn mass_is_conserved_with_reflection() {
        let g = Grid::full(50, 50, 1.0).unwrap();
        let q = g.cell_count();
        let mu = random_mu(q, 1, 0.2, 2.0);
        let dt = 0.9 * stability_check(&mu, 1.0, 1.0, &GrowthModel::none(q)).max_dt;
        let p = Propagator::build(&g, &mu, &GrowthModel::none(q), dt, 1.0, Boundary::Reflecting).unwrap();
        let u1 = initial_condition(500.0, 5.0, (10.0, 30.0), &g).unwrap();
        let out = propagate(&p, &u1, 1000).unwrap();
        let m0 = u1.total();
        for f in &out {
            assert!(((f.total() - m0) / m0).abs() < 1e-10);
        }
    }

    #[test]
    fn absorbing_mass_is_non_increasing_and_positive() {
        let mut mask = vec![true; 400];
        for k in [45, 46, 47, 210, 211, 230, 231] {
            mask[k] = false;
        }
        let g = Grid::new(20, 20, 1.0, mask).unwrap();
        let q = g.cell_count();
        let mu = random_mu(q, 2, 0.1, 1.0);
        let dt = 0.99 * stability_check(&mu, 1.0, 1.0, &GrowthModel::none(q)).max_dt;
        let p = Propagator::build(&g, &mu, &GrowthModel::none(q), dt, 1.0, Boundary::Absorbing).unwrap();
        let out = propagate(&p, &initial_condition(100.0, 3.0, (5.0, 5.0), &g).unwrap(), 500).unwrap();
        for w in out.windows(2) {
            assert!(w[1].total() <= w[0].total());
            assert!(w[1].u.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn bands_are_at_most_five() {
        let g = Grid::full(5, 6, 1.0).unwrap();
        let p = Propagator::build(&g, &random_mu(30, 3, 0.1, 0.2), &GrowthModel::none(30), 0.1, 1.0, Boundary::Absorbing).unwrap();
        assert_eq!(p.band_count(), 5);
        let dense = p.to_dense();
        for (i, row) in dense.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    let d = i.abs_diff(j);
                    assert!(d == 0 || d == 1 || d == 6, "entry ({i},{j}) off the bands");
                    if i != j {
                        assert!(v >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn dt_refinement_is_first_order() {
        let g = Grid::full(30, 30, 1.0).unwrap();
        let q = g.cell_count();
        let mu = MotilityField(
            (0..q)
                .map(|i| {
                    let (x, y) = g.center_cells(i);
                    0.5 + 0.3 * (x / 6.0).sin() * (y / 7.0).cos()
                })
                .collect(),
        );
        let u1 = initial_condition(100.0, 4.0, (15.0, 15.0), &g).unwrap();
        let run = |substeps: usize| {
            let p = Propagator::build(&g, &mu, &GrowthModel::none(q), 1.0 / substeps as f64, 1.0, Boundary::Reflecting).unwrap();
            propagate_intervals(&p, &u1.u, substeps, &[5]).unwrap().pop().unwrap()
        };
        let (a, b, c) = (run(4), run(8), run(16));
        let d1: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let d2: f64 = b.iter().zip(&c).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let order = (d1 / d2).log2();
        assert!(order >= 0.8, "observed order {order}");
    }

    #[test]
    fn initial_condition_examples() {
        let g = Grid::full(1, 1, 400.0).unwrap();
        let u = initial_condition(7.0, 2.0, (0.5, 0.5), &g).unwrap();
        assert_eq!(u.u, vec![7.0]);

        let g = Grid::full(9, 9, 1.0).unwrap();
        let u = initial_condition(10.0, 2.5, (4.5, 4.5), &g).unwrap();
        for i in 0..81 {
            let (r, c) = g.position(i);
            let rot = g.index_of(c, 8 - r).unwrap();
            assert!((u.u[i] - u.u[rot]).abs() < 1e-15);
        }
        assert!(initial_condition(10.0, 2.5, (-1.0, 4.0), &g).is_err());
        assert!(initial_condition(-1.0, 2.5, (1.0, 4.0), &g).is_err());
        assert!(matches!(
            initial_condition(10.0, 0.01, (0.0, 0.0), &g),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn kernel_normalisation_matches_fine_quadrature() {
        // Continuous integral of exp(-|s-d|²/κ²) over the 50x50 square by a
        // midpoint rule on a 10x refined lattice.
        let (tau, kappa, d) = (500.0, 5.0, (25.0, 25.0));
        let g = Grid::full(50, 50, 1.0).unwrap();
        let u = initial_condition(tau, kappa, d, &g).unwrap();
        let n = 500;
        let hf = 50.0 / n as f64;
        let mut integral = 0.0;
        for a in 0..n {
            for b in 0..n {
                let x = (a as f64 + 0.5) * hf;
                let y = (b as f64 + 0.5) * hf;
                integral += (-((x - d.0).powi(2) + (y - d.1).powi(2)) / (kappa * kappa)).exp() * hf * hf;
            }
        }
        // Density from the continuous normalisation, integrated cell by cell.
        let continuous_total: f64 = (0..g.cell_count())
            .map(|i| {
                let (x, y) = g.center_cells(i);
                tau * (-((x - d.0).powi(2) + (y - d.1).powi(2)) / (kappa * kappa)).exp() / integral
            })
            .sum();
        assert!((u.total() - tau).abs() < 1e-9);
        assert!((continuous_total - tau).abs() / tau < 0.01);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn propagation_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0, malthus in any::<bool>()) {
            let g = Grid::full(7, 6, 1.0).unwrap();
            let q = g.cell_count();
            let mu = random_mu(q, seed, 0.05, 0.5);
            let growth = if malthus { GrowthModel::malthusian(vec![0.2; q]) } else { GrowthModel::none(q) };
            let p = Propagator::build(&g, &mu, &growth, 0.3, 1.0, Boundary::Absorbing).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let u: Vec<f64> = (0..q).map(|_| rng.random_range(0.0..5.0)).collect();
            let v: Vec<f64> = (0..q).map(|_| rng.random_range(0.0..5.0)).collect();
            let run = |x: Vec<f64>| {
                let mut cur = x;
                let mut next = vec![0.0; q];
                for _ in 0..40 {
                    p.step(&cur, &mut next);
                    std::mem::swap(&mut cur, &mut next);
                }
                cur
            };
            let combo = run(u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect());
            let (pu, pv) = (run(u), run(v));
            for i in 0..q {
                let want = a * pu[i] + b * pv[i];
                let scale = (a.abs() * pu[i]).max(b.abs() * pv[i]).max(1e-300);
                prop_assert!((combo[i] - want).abs() <= 1e-12 * scale.max(1.0));
            }
        }
    }
}
