//! Plain-text and binary file formats.
//!
//! Raster text: a header line `nrows ncols cell_size [kind]` followed by
//! `nrows` lines of `ncols` whitespace-separated values, `NA` marking cells
//! outside the domain. Survey text: `start_year Y`, `years Y1 Y2 ...`, a
//! column header `year row col count`, then one record per observed cell.
//! Floats are written with Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::design::{SearchReport, Swap};
use crate::error::{Error, Result};
use crate::grid::{CovariateKind, CovariateRaster, Grid};
use crate::mcmc::{Draw, FieldDraw, PosteriorSamples, Proposal};
use crate::model::{Survey, SurveyData, Theta};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Raster values with `None` for `NA`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterText {
    pub nrows: usize,
    pub ncols: usize,
    pub cell_size: f64,
    pub kind: Option<CovariateKind>,
    pub values: Vec<Option<f64>>,
}

pub fn parse_raster(text: &str, path: &Path) -> Result<RasterText> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty raster file"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 && parts.len() != 4 {
        return Err(parse_err(path, hline + 1, "header must be `nrows ncols cell_size [kind]`"));
    }
    let nrows: usize = parts[0].parse().map_err(|_| parse_err(path, hline + 1, "bad row count"))?;
    let ncols: usize = parts[1].parse().map_err(|_| parse_err(path, hline + 1, "bad column count"))?;
    let cell_size: f64 = parts[2].parse().map_err(|_| parse_err(path, hline + 1, "bad cell size"))?;
    let kind = match parts.get(3) {
        None => None,
        Some(&"continuous") => Some(CovariateKind::Continuous),
        Some(&"indicator") => Some(CovariateKind::Indicator),
        Some(k) => return Err(parse_err(path, hline + 1, format!("unknown covariate kind `{k}`"))),
    };
    let mut values = Vec::with_capacity(nrows * ncols);
    let mut rows = 0;
    for (i, line) in lines {
        rows += 1;
        if rows > nrows {
            return Err(parse_err(path, i + 1, format!("more than {nrows} rows")));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            if tok == "NA" {
                values.push(None);
            } else {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| parse_err(path, i + 1, format!("not a number: `{tok}`")))?;
                if !v.is_finite() {
                    return Err(parse_err(path, i + 1, format!("non-finite value `{tok}`")));
                }
                values.push(Some(v));
            }
        }
        if values.len() - before != ncols {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected {ncols} values, found {}", values.len() - before),
            ));
        }
    }
    if rows != nrows {
        return Err(parse_err(path, text.lines().count(), format!("expected {nrows} rows, found {rows}")));
    }
    Ok(RasterText {
        nrows,
        ncols,
        cell_size,
        kind,
        values,
    })
}

pub fn format_raster(nrows: usize, ncols: usize, cell_size: f64, kind: Option<CovariateKind>, values: &[Option<f64>]) -> String {
    let mut out = format!("{nrows} {ncols} {cell_size}");
    match kind {
        Some(CovariateKind::Continuous) => out.push_str(" continuous"),
        Some(CovariateKind::Indicator) => out.push_str(" indicator"),
        None => {}
    }
    out.push('\n');
    for r in 0..nrows {
        let row: Vec<String> = values[r * ncols..(r + 1) * ncols]
            .iter()
            .map(|v| v.map_or_else(|| "NA".to_string(), |x| format!("{x}")))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Reads a mask raster: nonzero cells are active.
pub fn read_grid(path: &Path) -> Result<Grid> {
    let r = parse_raster(&read_text(path)?, path)?;
    let mask = r.values.iter().map(|v| v.is_some_and(|x| x != 0.0)).collect();
    Grid::new(r.nrows, r.ncols, r.cell_size, mask)
}

pub fn format_grid(grid: &Grid) -> String {
    let values: Vec<Option<f64>> = grid.mask().iter().map(|&a| Some(if a { 1.0 } else { 0.0 })).collect();
    format_raster(grid.nrows(), grid.ncols(), grid.cell_size(), None, &values)
}

/// Per-active-cell values as a raster with `NA` outside the domain.
pub fn format_field(grid: &Grid, values: &[f64], kind: Option<CovariateKind>) -> String {
    let mut raster = vec![None; grid.nrows() * grid.ncols()];
    for (i, v) in values.iter().enumerate() {
        let (r, c) = grid.position(i);
        raster[r * grid.ncols() + c] = Some(*v);
    }
    format_raster(grid.nrows(), grid.ncols(), grid.cell_size(), kind, &raster)
}

/// Reads a covariate raster; the covariate is named after the file stem.
pub fn read_covariate(path: &Path, grid: &Grid) -> Result<CovariateRaster> {
    let r = parse_raster(&read_text(path)?, path)?;
    if r.nrows != grid.nrows() || r.ncols != grid.ncols() {
        return Err(parse_err(
            path,
            1,
            format!("raster is {}x{}, grid is {}x{}", r.nrows, r.ncols, grid.nrows(), grid.ncols()),
        ));
    }
    let mut values = Vec::with_capacity(grid.cell_count());
    for i in 0..grid.cell_count() {
        let (row, col) = grid.position(i);
        match r.values[row * grid.ncols() + col] {
            Some(v) => values.push(v),
            None => return Err(parse_err(path, row + 2, format!("missing value at active cell ({row}, {col})"))),
        }
    }
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("covariate");
    CovariateRaster::new(grid, name, values, r.kind.unwrap_or(CovariateKind::Continuous))
}

pub fn read_surveys(path: &Path, grid: &Grid) -> Result<SurveyData> {
    let text = read_text(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut keyed = |key: &str| -> Result<(usize, Vec<i32>)> {
        let (no, line) = lines
            .next()
            .ok_or_else(|| parse_err(path, 0, format!("missing `{key}` line")))?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(key) {
            return Err(parse_err(path, no, format!("expected `{key}` line")));
        }
        let vals = toks
            .map(|t| t.parse::<i32>().map_err(|_| parse_err(path, no, format!("bad year `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        Ok((no, vals))
    };
    let (no, start) = keyed("start_year")?;
    let start_year = match start.as_slice() {
        [y] => *y,
        _ => return Err(parse_err(path, no, "start_year takes one value")),
    };
    let (_, years) = keyed("years")?;
    let (no, header) = lines.next().ok_or_else(|| parse_err(path, 0, "missing column header"))?;
    if header.split_whitespace().collect::<Vec<_>>() != ["year", "row", "col", "count"] {
        return Err(parse_err(path, no, "column header must be `year row col count`"));
    }
    let mut surveys: Vec<Survey> = years.iter().map(|&y| Survey::empty(y)).collect();
    for (no, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(parse_err(path, no, format!("expected 4 fields, found {}", toks.len())));
        }
        let year: i32 = toks[0].parse().map_err(|_| parse_err(path, no, "bad year"))?;
        let row: usize = toks[1].parse().map_err(|_| parse_err(path, no, "bad row"))?;
        let col: usize = toks[2].parse().map_err(|_| parse_err(path, no, "bad column"))?;
        let count: u64 = toks[3].parse().map_err(|_| parse_err(path, no, "bad count"))?;
        let cell = grid
            .index_of(row, col)
            .ok_or_else(|| parse_err(path, no, format!("cell ({row}, {col}) is not in the domain")))?;
        let s = surveys
            .iter_mut()
            .find(|s| s.year == year)
            .ok_or_else(|| parse_err(path, no, format!("year {year} is not declared")))?;
        s.cells.push(cell);
        s.counts.push(count);
    }
    SurveyData::new(start_year, surveys).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn format_surveys(data: &SurveyData, grid: &Grid) -> String {
    let mut out = format!("start_year {}\nyears", data.start_year);
    for s in &data.surveys {
        let _ = write!(out, " {}", s.year);
    }
    out.push_str("\nyear row col count\n");
    for s in &data.surveys {
        for (&c, &y) in s.cells.iter().zip(&s.counts) {
            let (r, col) = grid.position(c);
            let _ = writeln!(out, "{} {r} {col} {y}", s.year);
        }
    }
    out
}

/// Tab-separated draws of one chain: iteration, log-posterior, parameters.
pub fn format_chain(samples: &PosteriorSamples, chain: usize) -> String {
    let mut out = format!("iteration\tlogpost\t{}\n", samples.param_names.join("\t"));
    for d in samples.draws.iter().filter(|d| d.chain == chain) {
        let _ = write!(out, "{}\t{}", d.iteration, d.log_post);
        for v in d.theta.to_vec() {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_chain(text: &str, path: &Path, chain: usize, n_beta: usize, n_alpha: usize) -> Result<(Vec<String>, Vec<Draw>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty chain file"))?;
    let names: Vec<String> = header.split('\t').skip(2).map(String::from).collect();
    if names.len() != 3 + n_beta + n_alpha {
        return Err(parse_err(path, 1, format!("expected {} parameters, found {}", 3 + n_beta + n_alpha, names.len())));
    }
    let mut draws = Vec::new();
    for (i, line) in lines {
        let toks: Vec<&str> = line.split('\t').collect();
        if toks.len() != names.len() + 2 {
            return Err(parse_err(path, i + 1, "wrong number of columns"));
        }
        let iteration: usize = toks[0].parse().map_err(|_| parse_err(path, i + 1, "bad iteration"))?;
        let nums = toks[1..]
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(path, i + 1, format!("bad number `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        draws.push(Draw {
            chain,
            iteration,
            log_post: nums[0],
            theta: Theta::from_slice(&nums[1..], n_beta, n_alpha)?,
        });
    }
    Ok((names, draws))
}

/// Final tuned proposals, one line per chain and block: `chain block log_scale chol...`.
pub fn format_proposals(samples: &PosteriorSamples) -> String {
    let mut out = String::from("chain\tblock\tlog_scale\tcholesky\n");
    for c in &samples.chains {
        for (b, p) in c.final_proposals.iter().enumerate() {
            let chol: Vec<String> = p.chol.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}\t{b}\t{}\t{}", c.chain, p.log_scale, chol.join(" "));
        }
    }
    out
}

pub fn parse_proposals(text: &str, path: &Path) -> Result<Vec<Vec<Proposal>>> {
    let mut out: Vec<Vec<Proposal>> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let toks: Vec<&str> = line.split('\t').collect();
        if toks.len() != 4 {
            return Err(parse_err(path, i + 1, "expected 4 columns"));
        }
        let chain: usize = toks[0].parse().map_err(|_| parse_err(path, i + 1, "bad chain"))?;
        let log_scale: f64 = toks[2].parse().map_err(|_| parse_err(path, i + 1, "bad scale"))?;
        let chol = toks[3]
            .split(' ')
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(path, i + 1, "bad factor")))
            .collect::<Result<Vec<_>>>()?;
        if out.len() <= chain {
            out.resize(chain + 1, Vec::new());
        }
        out[chain].push(Proposal { chol, log_scale });
    }
    Ok(out)
}

const FIELD_MAGIC: &[u8; 8] = b"SSFIELD1";

/// Binary field archive: magic, then little-endian `u32` draw count, time
/// count and cell count, then per draw `u32` chain, `u32` iteration and
/// `times * cells` `f64` values.
pub fn write_field_archive(path: &Path, fields: &[FieldDraw]) -> Result<()> {
    let times = fields.first().map_or(0, |f| f.fields.len());
    let cells = fields.first().and_then(|f| f.fields.first()).map_or(0, Vec::len);
    let mut buf = Vec::with_capacity(20 + fields.len() * (8 + times * cells * 8));
    buf.extend_from_slice(FIELD_MAGIC);
    for n in [fields.len(), times, cells] {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for f in fields {
        buf.extend_from_slice(&(f.chain as u32).to_le_bytes());
        buf.extend_from_slice(&(f.iteration as u32).to_le_bytes());
        for field in &f.fields {
            for v in field {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_field_archive(path: &Path) -> Result<Vec<FieldDraw>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| parse_err(path, 0, msg);
    if bytes.len() < 20 || &bytes[..8] != FIELD_MAGIC {
        return Err(bad("not a field archive"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let (n, times, cells) = (u32_at(8), u32_at(12), u32_at(16));
    if bytes.len() != 20 + n * (8 + times * cells * 8) {
        return Err(bad("truncated field archive"));
    }
    let mut at = 20;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let chain = u32_at(at);
        let iteration = u32_at(at + 4);
        at += 8;
        let mut fields = Vec::with_capacity(times);
        for _ in 0..times {
            let field = (0..cells)
                .map(|j| f64::from_le_bytes(bytes[at + 8 * j..at + 8 * j + 8].try_into().expect("8 bytes")))
                .collect();
            at += 8 * cells;
            fields.push(field);
        }
        out.push(FieldDraw { chain, iteration, fields });
    }
    Ok(out)
}

pub fn format_search_table(report: &SearchReport) -> String {
    let mut out = String::from("index\tstage\tdesign\tq_d\tmean_total\tstatus\n");
    for (i, e) in report.evaluations.iter().enumerate() {
        let stage = if i < report.random_count { "random" } else { "exchange" };
        match &e.result {
            Ok(r) => {
                let _ = writeln!(out, "{i}\t{stage}\t{}\t{}\t{}\tok", e.design, r.q_d, r.mean_total);
            }
            Err(msg) => {
                let _ = writeln!(out, "{i}\t{stage}\t{}\tNA\tNA\tfailed: {}", e.design, msg.replace('\t', " "));
            }
        }
    }
    out
}

pub fn format_exchange(swaps: &[Swap]) -> String {
    let mut out = String::from("pass\tremoved\tadded\tdesign\tq_d\n");
    for s in swaps {
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", s.pass, s.removed, s.added, s.design, s.q_d);
    }
    out
}

/// Staging directory that replaces `target` only when committed; dropped
/// uncommitted, it is deleted together with everything written into it.
pub struct Staging {
    dir: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self> {
        let parent = target.parent().unwrap_or(Path::new("."));
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let name = target.file_name().and_then(|s| s.to_str()).unwrap_or("out");
        let dir = parent.join(format!(".{name}.partial"));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Staging {
            dir,
            target: target.to_path_buf(),
            committed: false,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, text: &str) -> Result<()> {
        write_text(&self.path(name), text)
    }

    pub fn commit(mut self) -> Result<PathBuf> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(|e| Error::io(&self.target, e))?;
        }
        fs::rename(&self.dir, &self.target).map_err(|e| Error::io(&self.target, e))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raster_round_trip() {
        let values = vec![Some(1.5), None, Some(-2.0), Some(0.1 + 0.2)];
        let text = format_raster(2, 2, 400.0, Some(CovariateKind::Continuous), &values);
        assert_eq!(text, "2 2 400 continuous\n1.5 NA\n-2 0.30000000000000004\n");
        let back = parse_raster(&text, Path::new("x")).unwrap();
        assert_eq!(back.values, values);
        assert_eq!(back.kind, Some(CovariateKind::Continuous));
    }

    #[test]
    fn raster_errors_name_line() {
        let err = parse_raster("2 2 1\n1 2\n3 x\n", Path::new("r.txt")).unwrap_err();
        assert!(err.to_string().starts_with("r.txt:3:"), "{err}");
        assert!(parse_raster("2 2 1\n1 2\n", Path::new("r")).is_err());
        assert!(parse_raster("2 2 1\n1 2 3\n1 2\n", Path::new("r")).is_err());
    }

    #[test]
    fn survey_round_trip() {
        let grid = Grid::new(2, 3, 1.0, vec![true, true, false, true, true, true]).unwrap();
        let data = SurveyData::new(
            2000,
            vec![
                Survey { year: 2000, cells: vec![0, 4], counts: vec![3, 0] },
                Survey::empty(2002),
            ],
        )
        .unwrap();
        let text = format_surveys(&data, &grid);
        assert_eq!(text, "start_year 2000\nyears 2000 2002\nyear row col count\n2000 0 0 3\n2000 1 2 0\n");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.txt");
        write_text(&p, &text).unwrap();
        assert_eq!(read_surveys(&p, &grid).unwrap(), data);
        write_text(&p, "start_year 2000\nyears 2000\nyear row col count\n2000 0 2 1\n").unwrap();
        assert!(matches!(read_surveys(&p, &grid), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn field_archive_round_trip() {
        let fields = vec![
            FieldDraw { chain: 0, iteration: 5, fields: vec![vec![1.0, 2.5], vec![0.1, 1e-300]] },
            FieldDraw { chain: 1, iteration: 9, fields: vec![vec![3.0, 4.0], vec![5.0, 6.0]] },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        write_field_archive(&p, &fields).unwrap();
        assert_eq!(read_field_archive(&p).unwrap(), fields);
        fs::write(&p, b"SSFIELD1\x01\x00").unwrap();
        assert!(read_field_archive(&p).is_err());
    }

    #[test]
    fn staging_removed_unless_committed() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("fit");
        {
            let s = Staging::new(&target).unwrap();
            s.write("a.txt", "x").unwrap();
        }
        assert!(!target.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
        let s = Staging::new(&target).unwrap();
        s.write("a.txt", "y").unwrap();
        s.commit().unwrap();
        assert_eq!(fs::read_to_string(target.join("a.txt")).unwrap(), "y");
    }
}
