//! Gridded study domain: active-cell indexing, covariate rasters and the
//! transect geometry that designs are drawn from.

use crate::error::{Error, Result};

/// Rectangular cell lattice with an active (water) mask.
///
/// Active cells are indexed `0..q` in row-major order. Row `r`, column `c`
/// has its center at `origin + ((c + 0.5) * cell_size, (r + 0.5) * cell_size)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nrows: usize,
    ncols: usize,
    cell_size: f64,
    origin: (f64, f64),
    active: Vec<bool>,
    raster_to_active: Vec<Option<usize>>,
    cells: Vec<(usize, usize)>,
}

impl Grid {
    /// Builds a grid from a row-major mask of length `nrows * ncols`.
    pub fn new(nrows: usize, ncols: usize, cell_size: f64, mask: Vec<bool>) -> Result<Self> {
        if nrows == 0 || ncols == 0 {
            return Err(Error::Domain(format!(
                "grid dimensions must be positive, got {nrows}x{ncols}"
            )));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::Domain(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        if mask.len() != nrows * ncols {
            return Err(Error::Domain(format!(
                "mask has {} entries, expected {}",
                mask.len(),
                nrows * ncols
            )));
        }
        let mut raster_to_active = vec![None; mask.len()];
        let mut cells = Vec::new();
        for (k, &is_active) in mask.iter().enumerate() {
            if is_active {
                raster_to_active[k] = Some(cells.len());
                cells.push((k / ncols, k % ncols));
            }
        }
        if cells.is_empty() {
            return Err(Error::Domain("mask has no active cells".into()));
        }
        Ok(Grid {
            nrows,
            ncols,
            cell_size,
            origin: (0.0, 0.0),
            active: mask,
            raster_to_active,
            cells,
        })
    }

    /// Fully active grid.
    pub fn full(nrows: usize, ncols: usize, cell_size: f64) -> Result<Self> {
        Self::new(nrows, ncols, cell_size, vec![true; nrows * ncols])
    }

    pub fn with_origin(mut self, origin: (f64, f64)) -> Self {
        self.origin = origin;
        self
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    /// Number of active cells, `q`.
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.active
    }

    pub fn is_active(&self, row: usize, col: usize) -> bool {
        row < self.nrows && col < self.ncols && self.active[row * self.ncols + col]
    }

    /// Active index of the cell at `(row, col)`, if that cell is active.
    pub fn index_of(&self, row: usize, col: usize) -> Option<usize> {
        if row < self.nrows && col < self.ncols {
            self.raster_to_active[row * self.ncols + col]
        } else {
            None
        }
    }

    /// `(row, col)` of active cell `i`.
    pub fn position(&self, i: usize) -> (usize, usize) {
        self.cells[i]
    }

    /// Center of active cell `i` in grid length units (meters).
    pub fn center(&self, i: usize) -> (f64, f64) {
        let (r, c) = self.cells[i];
        (
            self.origin.0 + (c as f64 + 0.5) * self.cell_size,
            self.origin.1 + (r as f64 + 0.5) * self.cell_size,
        )
    }

    /// Center of active cell `i` in cell units, `(col + 0.5, row + 0.5)`.
    pub fn center_cells(&self, i: usize) -> (f64, f64) {
        let (r, c) = self.cells[i];
        (c as f64 + 0.5, r as f64 + 0.5)
    }

    /// Active neighbors in (east, west, north, south) order. North is row - 1.
    pub fn neighbors(&self, i: usize) -> [Option<usize>; 4] {
        let (r, c) = self.cells[i];
        [
            self.index_of(r, c + 1),
            c.checked_sub(1).and_then(|c| self.index_of(r, c)),
            r.checked_sub(1).and_then(|r| self.index_of(r, c)),
            self.index_of(r + 1, c),
        ]
    }

    /// Active cells that share an edge with an inactive raster cell.
    pub fn shoreline_cells(&self) -> Vec<usize> {
        (0..self.cell_count())
            .filter(|&i| {
                let (r, c) = self.cells[i];
                let touches = |rr: Option<usize>, cc: Option<usize>| match (rr, cc) {
                    (Some(rr), Some(cc)) if rr < self.nrows && cc < self.ncols => {
                        !self.active[rr * self.ncols + cc]
                    }
                    _ => false,
                };
                touches(Some(r), Some(c + 1))
                    || touches(Some(r), c.checked_sub(1))
                    || touches(r.checked_sub(1), Some(c))
                    || touches(Some(r + 1), Some(c))
            })
            .collect()
    }

    /// Raster-shaped mask marking the given active cells.
    pub fn raster_mask_of(&self, cells: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.nrows * self.ncols];
        for &i in cells {
            let (r, c) = self.cells[i];
            mask[r * self.ncols + c] = true;
        }
        mask
    }

    /// Scatters per-active-cell values into a raster, filling inactive cells.
    pub fn to_raster(&self, values: &[f64], fill: f64) -> Vec<f64> {
        let mut out = vec![fill; self.nrows * self.ncols];
        for (i, &(r, c)) in self.cells.iter().enumerate() {
            out[r * self.ncols + c] = values[i];
        }
        out
    }

    /// Gathers per-active-cell values from a raster.
    pub fn from_raster(&self, raster: &[f64]) -> Result<Vec<f64>> {
        if raster.len() != self.nrows * self.ncols {
            return Err(Error::Domain(format!(
                "raster has {} entries, expected {}",
                raster.len(),
                self.nrows * self.ncols
            )));
        }
        Ok(self
            .cells
            .iter()
            .map(|&(r, c)| raster[r * self.ncols + c])
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariateKind {
    Continuous,
    Indicator,
}

/// One covariate value per active cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateRaster {
    pub name: String,
    pub values: Vec<f64>,
    pub kind: CovariateKind,
}

impl CovariateRaster {
    pub fn new(
        grid: &Grid,
        name: impl Into<String>,
        values: Vec<f64>,
        kind: CovariateKind,
    ) -> Result<Self> {
        let name = name.into();
        if values.len() != grid.cell_count() {
            return Err(Error::Domain(format!(
                "covariate '{name}' has {} values, grid has {} active cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "covariate '{name}' is missing or non-finite at active cell {i}"
            )));
        }
        if kind == CovariateKind::Indicator {
            if let Some(i) = values.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::Domain(format!(
                    "indicator covariate '{name}' has value {} at active cell {i}",
                    values[i]
                )));
            }
        }
        Ok(CovariateRaster { name, values, kind })
    }

    /// Centers and scales continuous covariates to mean 0, sd 1 (population
    /// sd over active cells). Indicators are returned unchanged.
    pub fn standardized(&self) -> Result<Self> {
        if self.kind == CovariateKind::Indicator {
            return Ok(self.clone());
        }
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        let var = self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > 0.0) {
            return Err(Error::Domain(format!(
                "covariate '{}' is constant and cannot be standardized",
                self.name
            )));
        }
        let values = self.values.iter().map(|v| (v - mean) / sd).collect();
        Ok(CovariateRaster {
            name: self.name.clone(),
            values,
            kind: self.kind,
        })
    }
}

/// Counts, for each active cell, the shoreline cells whose centers lie within
/// `radius` (inclusive) of its center. `shoreline` is raster-shaped.
pub fn shoreline_complexity(grid: &Grid, shoreline: &[bool], radius: f64) -> Result<CovariateRaster> {
    if shoreline.len() != grid.nrows * grid.ncols {
        return Err(Error::Domain(format!(
            "shoreline mask has {} entries, expected {}",
            shoreline.len(),
            grid.nrows * grid.ncols
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {radius}")));
    }
    // Offsets are integers in cell units; compare squared distances with a
    // relative slack so centers at exactly `radius` are counted.
    let reach = (radius / grid.cell_size).floor() as isize;
    let limit = (radius / grid.cell_size).powi(2) * (1.0 + 1e-12);
    let mut values = Vec::with_capacity(grid.cell_count());
    for i in 0..grid.cell_count() {
        let (r, c) = grid.position(i);
        let mut count = 0usize;
        for dr in -reach..=reach {
            let rr = r as isize + dr;
            if rr < 0 || rr >= grid.nrows as isize {
                continue;
            }
            for dc in -reach..=reach {
                let cc = c as isize + dc;
                if cc < 0 || cc >= grid.ncols as isize {
                    continue;
                }
                if ((dr * dr + dc * dc) as f64) <= limit
                    && shoreline[rr as usize * grid.ncols + cc as usize]
                {
                    count += 1;
                }
            }
        }
        values.push(count as f64);
    }
    CovariateRaster::new(grid, "complexity", values, CovariateKind::Continuous)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransectAxis {
    /// West-to-East transects, one per grid row.
    #[default]
    Rows,
    Columns,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transect {
    /// Grid row (or column) this transect runs along.
    pub line: usize,
    /// Active cell indices, West to East (or North to South).
    pub cells: Vec<usize>,
}

/// Selectable transects. Transect `t` is the `t`-th grid line that contains
/// at least one active cell; lines without water are not selectable.
#[derive(Debug, Clone, PartialEq)]
pub struct TransectSet {
    pub transects: Vec<Transect>,
    pub axis: TransectAxis,
}

impl TransectSet {
    pub fn count(&self) -> usize {
        self.transects.len()
    }

    pub fn len_of(&self, t: usize) -> usize {
        self.transects[t].cells.len()
    }
}

pub fn enumerate_transects(grid: &Grid, axis: TransectAxis) -> TransectSet {
    let (lines, span) = match axis {
        TransectAxis::Rows => (grid.nrows, grid.ncols),
        TransectAxis::Columns => (grid.ncols, grid.nrows),
    };
    let transects = (0..lines)
        .filter_map(|line| {
            let cells: Vec<usize> = (0..span)
                .filter_map(|k| match axis {
                    TransectAxis::Rows => grid.index_of(line, k),
                    TransectAxis::Columns => grid.index_of(k, line),
                })
                .collect();
            (!cells.is_empty()).then_some(Transect { line, cells })
        })
        .collect();
    TransectSet { transects, axis }
}

/// A survey design: a sorted set of distinct transect indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Design(Vec<usize>);

impl Design {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain(format!(
                "design has duplicate transects: {indices:?}"
            )));
        }
        Ok(Design(indices))
    }

    pub fn empty() -> Self {
        Design(Vec::new())
    }

    pub fn all(transects: &TransectSet) -> Self {
        Design((0..transects.count()).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, t: usize) -> bool {
        self.0.binary_search(&t).is_ok()
    }

    /// Replaces `out` with `inn`; `out` must be a member and `inn` must not.
    pub fn swapped(&self, out: usize, inn: usize) -> Design {
        let mut v: Vec<usize> = self.0.iter().copied().filter(|&t| t != out).collect();
        v.push(inn);
        v.sort_unstable();
        Design(v)
    }

    pub fn validate(&self, transects: &TransectSet) -> Result<()> {
        match self.0.iter().find(|&&t| t >= transects.count()) {
            Some(t) => Err(Error::Domain(format!(
                "transect index {t} out of range (have {})",
                transects.count()
            ))),
            None => Ok(()),
        }
    }
}

impl std::fmt::Display for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|t| t.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Active cells covered by a design, sorted ascending.
pub fn design_cells(transects: &TransectSet, design: &Design) -> Result<Vec<usize>> {
    design.validate(transects)?;
    let mut cells: Vec<usize> = design
        .indices()
        .iter()
        .flat_map(|&t| transects.transects[t].cells.iter().copied())
        .collect();
    cells.sort_unstable();
    Ok(cells)
}
