//! Covers of the domain and the Majoring Points they induce.
//!
//! Two constructions are provided: a uniform grid and the adaptive dyadic
//! refinement ("dichotomy"), which splits a cell into its `2^d` halves until
//! an accuracy test passes. Either cover yields one Majoring Point
//! `(a, b) = (y, f(y'))` per cell `[y, y')`.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{lex_cmp, Domain, HyperRectangle, Point};
use crate::oracle::{check_header, header_names, Dataset, FunctionOracle};

/// Largest cover a construction may produce unless told otherwise.
pub const DEFAULT_CELL_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverMode {
    Grid,
    FunctionAdapted,
    DataAdapted,
}

impl fmt::Display for CoverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoverMode::Grid => "grid",
            CoverMode::FunctionAdapted => "function-adapted",
            CoverMode::DataAdapted => "data-adapted",
        })
    }
}

/// Stopping parameters of the adaptive construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveParams {
    /// Cells with an l-inf diameter at or below this are never split.
    pub eps: f64,
    /// Cells whose upper-minus-lower value is at or below this are kept.
    pub eps_f: f64,
    /// Data mode only: cells holding at most this many samples are kept.
    #[serde(default)]
    pub n_p: usize,
}

impl AdaptiveParams {
    pub fn new(eps: f64, eps_f: f64, n_p: usize) -> Result<Self> {
        let p = AdaptiveParams { eps, eps_f, n_p };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.eps_f >= 0.0) {
            return Err(Error::InvalidParameter(format!("eps_f must be non-negative, got {}", self.eps_f)));
        }
        Ok(())
    }
}

/// Parameters a cover was built with, as recorded in the cover file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverParams {
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_p: Option<usize>,
}

/// A finite family of half-open cells whose union contains the domain.
///
/// Cells are kept sorted lexicographically by lower corner. Once annotated,
/// each cell carries `b`, the reference value at its upper corner (or
/// `None` in data mode when no sample dominates that corner).
#[derive(Debug, Clone, PartialEq)]
pub struct Cover {
    domain: Domain,
    mode: CoverMode,
    params: CoverParams,
    cells: Vec<HyperRectangle>,
    upper_values: Option<Vec<Option<f64>>>,
    grid_shape: Option<Vec<usize>>,
    rounds: usize,
}

impl Cover {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn mode(&self) -> CoverMode {
        self.mode
    }

    pub fn params(&self) -> CoverParams {
        self.params
    }

    pub fn cells(&self) -> &[HyperRectangle] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Cells per axis for grid covers.
    pub fn grid_shape(&self) -> Option<&[usize]> {
        self.grid_shape.as_deref()
    }

    /// Number of refinement rounds in which at least one cell was split.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn upper_values(&self) -> Option<&[Option<f64>]> {
        self.upper_values.as_deref()
    }

    /// Records `f(y')` for every cell.
    pub fn annotate_fn(&mut self, oracle: &FunctionOracle) -> Result<()> {
        check_dim(self.dim(), oracle.dim())?;
        let mut memo = CornerMemo::default();
        let vals = self
            .cells
            .iter()
            .map(|c| Some(memo.get(c.upper(), |x| oracle.eval(x))))
            .collect();
        self.upper_values = Some(vals);
        Ok(())
    }

    /// Records `tilde_f(y')` for every cell; `None` where it is infinite.
    pub fn annotate_data(&mut self, data: &Dataset) -> Result<()> {
        check_dim(self.dim(), data.dim())?;
        let vals = self
            .cells
            .iter()
            .map(|c| Some(data.tilde_f(c.upper())).filter(|v| v.is_finite()))
            .collect();
        self.upper_values = Some(vals);
        Ok(())
    }

    /// Every cell containing `x`, under the closed-top convention.
    pub fn cells_containing<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = usize> + 'a {
        self.cells
            .iter()
            .enumerate()
            .filter(move |(_, c)| self.domain.cell_contains(c, x))
            .map(|(i, _)| i)
    }

    /// Share of the domain's volume lying in cells without a finite `b`.
    pub fn uncovered_volume_fraction(&self) -> f64 {
        let Some(vals) = &self.upper_values else {
            return 1.0;
        };
        let lost: f64 = self
            .cells
            .iter()
            .zip(vals)
            .filter(|(_, b)| b.is_none())
            .map(|(c, _)| c.volume())
            .sum();
        lost / self.domain.volume()
    }

    pub fn to_file(&self) -> CoverFile {
        let vals = self.upper_values.as_ref();
        CoverFile {
            d: self.dim(),
            mode: self.mode,
            params: self.params,
            domain: self.domain.clone(),
            rounds: self.rounds,
            grid_shape: self.grid_shape.clone(),
            cells: self
                .cells
                .iter()
                .enumerate()
                .map(|(i, c)| CellRecord {
                    lower: c.lower().to_vec(),
                    upper: c.upper().to_vec(),
                    b: vals.and_then(|v| v[i]),
                })
                .collect(),
        }
    }

    pub fn from_file(file: CoverFile) -> Result<Self> {
        check_dim(file.d, file.domain.dim())?;
        let annotated = file.cells.iter().any(|c| c.b.is_some());
        let mut cells = Vec::with_capacity(file.cells.len());
        let mut vals = Vec::with_capacity(file.cells.len());
        for rec in file.cells {
            let cell = HyperRectangle::from_bounds(rec.lower, rec.upper)?;
            check_dim(file.d, cell.dim())?;
            let inside = file.domain.contains(cell.lower())? && file.domain.contains(cell.upper())?;
            if !inside {
                return Err(Error::OutOfDomain {
                    x: cell.upper().to_vec(),
                });
            }
            cells.push(cell);
            vals.push(rec.b);
        }
        Ok(Cover {
            domain: file.domain,
            mode: file.mode,
            params: file.params,
            cells,
            upper_values: annotated.then_some(vals),
            grid_shape: file.grid_shape,
            rounds: file.rounds,
        })
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, &self.to_file())?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        Cover::from_file(serde_json::from_reader(reader)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_json(w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Cover::read_json(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// On-disk form of a cover.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverFile {
    pub d: usize,
    pub mode: CoverMode,
    pub params: CoverParams,
    pub domain: Domain,
    #[serde(default)]
    pub rounds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_shape: Option<Vec<usize>>,
    pub cells: Vec<CellRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub b: Option<f64>,
}

/// `ceil(q)`, except that a quotient within a few ulps of an integer is
/// taken as that integer (`20 / 0.1` must give 200 cells, not 201).
fn ceil_ratio(num: f64, den: f64) -> f64 {
    let q = num / den;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        q.ceil()
    }
}

/// Per-axis grid resolution `n_max = ceil(||y_max - y_min||_inf / eps)`.
pub fn grid_resolution(domain: &Domain, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    Ok(ceil_ratio(domain.linf_diameter(), eps).max(1.0) as usize)
}

/// Coordinate of grid line `i` of `n` on axis `k`.
#[inline]
pub(crate) fn grid_line(domain: &Domain, k: usize, i: usize, n: usize) -> f64 {
    if i == n {
        domain.y_max()[k]
    } else {
        let (lo, hi) = (domain.y_min()[k], domain.y_max()[k]);
        lo + (hi - lo) * i as f64 / n as f64
    }
}

/// Uniform grid of `n_max^d` cells tiling `[y_min, y_max)`.
pub fn build_grid_cover(domain: &Domain, eps: f64) -> Result<Cover> {
    build_grid_cover_with_budget(domain, eps, DEFAULT_CELL_BUDGET)
}

pub fn build_grid_cover_with_budget(domain: &Domain, eps: f64, budget: usize) -> Result<Cover> {
    let n = grid_resolution(domain, eps)?;
    let d = domain.dim();
    let total = (n as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if total > budget as u128 {
        return Err(Error::CellBudget {
            requested: total,
            budget,
        });
    }
    let lines: Vec<Vec<f64>> = (0..d)
        .map(|k| (0..=n).map(|i| grid_line(domain, k, i, n)).collect())
        .collect();
    let mut cells = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let lower = (0..d).map(|k| lines[k][idx[k]]).collect();
        let upper = (0..d).map(|k| lines[k][idx[k] + 1]).collect();
        cells.push(HyperRectangle::from_bounds(lower, upper)?);
        // odometer with axis 0 most significant gives lexicographic order
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(Cover {
        domain: domain.clone(),
        mode: CoverMode::Grid,
        params: CoverParams {
            eps,
            eps_f: None,
            n_p: None,
        },
        cells,
        upper_values: None,
        grid_shape: Some(vec![n; d]),
        rounds: 0,
    })
}

/// Upper bound on refinement rounds: `ceil(log2(||y_max - y_min||_inf / eps))`.
pub fn max_rounds(domain: &Domain, eps: f64) -> usize {
    let ratio = domain.linf_diameter() / eps;
    if ratio <= 1.0 {
        0
    } else {
        ratio.log2().ceil() as usize
    }
}

#[derive(Default)]
struct CornerMemo(HashMap<Vec<u64>, f64>);

impl CornerMemo {
    fn get(&mut self, x: &[f64], f: impl FnOnce(&[f64]) -> f64) -> f64 {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        *self.0.entry(key).or_insert_with(|| f(x))
    }
}

/// Round-by-round dyadic refinement. Every cell still undecided is tested;
/// failing cells are replaced by their children, which are tested in the
/// next round.
fn refine(
    domain: &Domain,
    budget: usize,
    mut accurate: impl FnMut(&HyperRectangle) -> bool,
) -> Result<(Vec<HyperRectangle>, usize)> {
    let mut done = Vec::new();
    let mut pending = vec![domain.as_rect()];
    let mut rounds = 0;
    while !pending.is_empty() {
        let mut next = Vec::new();
        for cell in pending {
            if accurate(&cell) {
                done.push(cell);
                continue;
            }
            match cell.decompose() {
                Ok(kids) => next.extend(kids),
                Err(Error::Degenerate(_)) => done.push(cell),
                Err(e) => return Err(e),
            }
            if done.len() + next.len() > budget {
                return Err(Error::CellBudget {
                    requested: (done.len() + next.len()) as u128,
                    budget,
                });
            }
        }
        if !next.is_empty() {
            rounds += 1;
        }
        pending = next;
    }
    done.sort_by(|a, b| lex_cmp(a.lower(), b.lower()));
    Ok((done, rounds))
}

/// Adaptive cover driven by oracle values at cell corners.
///
/// A cell is kept when `f(y') - f(y) <= eps_f` or its l-inf diameter is at
/// most `eps`. The returned cover is annotated with `f(y')`.
pub fn build_adaptive_cover_fn(
    domain: &Domain,
    oracle: &FunctionOracle,
    params: AdaptiveParams,
) -> Result<Cover> {
    build_adaptive_cover_fn_with_budget(domain, oracle, params, DEFAULT_CELL_BUDGET)
}

pub fn build_adaptive_cover_fn_with_budget(
    domain: &Domain,
    oracle: &FunctionOracle,
    params: AdaptiveParams,
    budget: usize,
) -> Result<Cover> {
    params.validate()?;
    check_dim(domain.dim(), oracle.dim())?;
    let mut memo = CornerMemo::default();
    let (cells, rounds) = refine(domain, budget, |cell| {
        if cell.linf_diameter() <= params.eps {
            return true;
        }
        let hi = memo.get(cell.upper(), |x| oracle.eval(x));
        let lo = memo.get(cell.lower(), |x| oracle.eval(x));
        hi - lo <= params.eps_f
    })?;
    let upper_values = cells
        .iter()
        .map(|c| Some(memo.get(c.upper(), |x| oracle.eval(x))))
        .collect();
    Ok(Cover {
        domain: domain.clone(),
        mode: CoverMode::FunctionAdapted,
        params: CoverParams {
            eps: params.eps,
            eps_f: Some(params.eps_f),
            n_p: None,
        },
        cells,
        upper_values: Some(upper_values),
        grid_shape: None,
        rounds,
    })
}

/// Adaptive cover driven by a dataset.
///
/// A cell is kept when `tilde_f(y') - tilde_f(y) <= eps_f`, its diameter is
/// at most `eps`, or it holds at most `n_p` samples. A variation of the
/// form `inf - inf` counts as zero.
pub fn build_adaptive_cover_data(domain: &Domain, data: &Dataset, params: AdaptiveParams) -> Result<Cover> {
    build_adaptive_cover_data_with_budget(domain, data, params, DEFAULT_CELL_BUDGET)
}

pub fn build_adaptive_cover_data_with_budget(
    domain: &Domain,
    data: &Dataset,
    params: AdaptiveParams,
    budget: usize,
) -> Result<Cover> {
    params.validate()?;
    check_dim(domain.dim(), data.dim())?;
    let mut memo = CornerMemo::default();
    let (cells, rounds) = refine(domain, budget, |cell| {
        if cell.linf_diameter() <= params.eps {
            return true;
        }
        let hi = memo.get(cell.upper(), |x| data.tilde_f(x));
        let lo = memo.get(cell.lower(), |x| data.tilde_f(x));
        let variation = if hi == f64::INFINITY && lo == f64::INFINITY { 0.0 } else { hi - lo };
        if variation <= params.eps_f {
            return true;
        }
        let inside = data.points().iter().filter(|x| domain.cell_contains(cell, x)).count();
        inside <= params.n_p
    })?;
    let upper_values = cells
        .iter()
        .map(|c| Some(memo.get(c.upper(), |x| data.tilde_f(x))).filter(|v| v.is_finite()))
        .collect();
    Ok(Cover {
        domain: domain.clone(),
        mode: CoverMode::DataAdapted,
        params: CoverParams {
            eps: params.eps,
            eps_f: Some(params.eps_f),
            n_p: Some(params.n_p),
        },
        cells,
        upper_values: Some(upper_values),
        grid_shape: None,
        rounds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajoringPoint {
    pub a: Point,
    pub b: f64,
}

/// Pairs `(a_i, b_i)` such that any non-decreasing `g` with `g(a_i) >= b_i`
/// for all `i` over-estimates the reference function on the covered region.
#[derive(Debug, Clone, PartialEq)]
pub struct MajoringPointSet {
    dim: usize,
    points: Vec<MajoringPoint>,
    source: CoverMode,
    dropped: usize,
    uncovered_fraction: f64,
}

impl MajoringPointSet {
    /// Builds a set directly; `b` values must be finite.
    pub fn new(dim: usize, points: Vec<MajoringPoint>, source: CoverMode) -> Result<Self> {
        for p in &points {
            check_dim(dim, p.a.dim())?;
            if !p.b.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite b at {:?}", p.a)));
            }
        }
        Ok(MajoringPointSet {
            dim,
            points,
            source,
            dropped: 0,
            uncovered_fraction: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[MajoringPoint] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &MajoringPoint> {
        self.points.iter()
    }

    pub fn source(&self) -> CoverMode {
        self.source
    }

    /// Cells skipped because no sample dominated their upper corner.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Volume share of the domain the guarantee does not reach.
    pub fn uncovered_fraction(&self) -> f64 {
        self.uncovered_fraction
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(header_names(self.dim, "a", "b"))?;
        for p in &self.points {
            w.write_record(p.a.iter().chain(std::iter::once(&p.b)).map(|c| c.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, source: CoverMode) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 {
            return Err(Error::InvalidParameter("majoring point file needs a1..ad,b columns".into()));
        }
        let d = headers.len() - 1;
        check_header(&headers, d, "b")?;
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let nums = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            check_dim(d + 1, nums.len())?;
            points.push(MajoringPoint {
                a: Point::new(nums[..d].to_vec())?,
                b: nums[d],
            });
        }
        MajoringPointSet::new(d, points, source)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>, source: CoverMode) -> Result<Self> {
        MajoringPointSet::read_csv(std::fs::File::open(path)?, source)
    }
}

/// One point per cell: `(a, b) = (y, f(y'))`.
pub fn majoring_points_from_cover_fn(cover: &Cover, oracle: &FunctionOracle) -> Result<MajoringPointSet> {
    check_dim(cover.dim(), oracle.dim())?;
    let mut memo = CornerMemo::default();
    let points = cover
        .cells()
        .iter()
        .map(|c| MajoringPoint {
            a: c.lower().clone(),
            b: memo.get(c.upper(), |x| oracle.eval(x)),
        })
        .collect();
    MajoringPointSet::new(cover.dim(), points, cover.mode())
}

/// One point per cell: `(a, b) = (y, tilde_f(y'))`. Cells whose upper
/// corner is dominated by no sample are dropped and counted.
pub fn majoring_points_from_cover_data(cover: &Cover, data: &Dataset) -> Result<MajoringPointSet> {
    check_dim(cover.dim(), data.dim())?;
    let mut points = Vec::with_capacity(cover.len());
    let mut dropped = 0;
    let mut lost_volume = 0.0;
    for c in cover.cells() {
        let b = data.tilde_f(c.upper());
        if b.is_finite() {
            points.push(MajoringPoint { a: c.lower().clone(), b });
        } else {
            dropped += 1;
            lost_volume += c.volume();
        }
    }
    if points.is_empty() {
        return Err(Error::NoFiniteCells);
    }
    let mut set = MajoringPointSet::new(cover.dim(), points, cover.mode())?;
    set.dropped = dropped;
    set.uncovered_fraction = lost_volume / cover.domain().volume();
    Ok(set)
}
