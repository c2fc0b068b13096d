//! Access to the reference function: either a callable oracle or a dataset
//! from which the empirical majorant `tilde_f` is derived.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{le_unchecked, Domain, Point};

/// The piecewise 1D test function on `[-10, 10]`:
///
/// ```text
/// 3x + 3 sin(x) - 4        on [-10, -1]
/// sign(x) x^2 + sin(x)     on (-1, 1]
/// x + cos(x) + 10          on (1, 10]
/// ```
///
/// Non-decreasing, with upward jumps at `-1` and `1`; both jumps are
/// left-continuous. `sign(0)` is taken as 0, which is immaterial since it
/// multiplies `0^2`.
pub fn f1_eval(x: f64) -> Result<f64> {
    if !(-10.0..=10.0).contains(&x) {
        return Err(Error::ArgumentOutOfRange(x));
    }
    Ok(f1_unchecked(x))
}

#[inline]
fn f1_unchecked(x: f64) -> f64 {
    if x <= -1.0 {
        3.0 * x + 3.0 * x.sin() - 4.0
    } else if x <= 1.0 {
        let sign = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        sign * x * x + x.sin()
    } else {
        x + x.cos() + 10.0
    }
}

/// `f1(sqrt(x^2 + y^2) - 10)` on `[0, 15]^2`.
///
/// The radial argument reaches `15*sqrt(2) - 10 > 10` near the corner and is
/// clamped to `[-10, 10]`; clamping keeps the function non-decreasing.
pub fn g2d_eval(x: f64, y: f64) -> Result<f64> {
    for v in [x, y] {
        if !(0.0..=15.0).contains(&v) {
            return Err(Error::ArgumentOutOfRange(v));
        }
    }
    let t = ((x * x + y * y).sqrt() - 10.0).clamp(-10.0, 10.0);
    Ok(f1_unchecked(t))
}

/// Smooth-plus-step monotone function on `[0, 1]^6`, a synthetic stand-in
/// for a six-input industrial code.
pub fn mono6_eval(x: &[f64]) -> Result<f64> {
    check_dim(6, x.len())?;
    if let Some(&v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::ArgumentOutOfRange(v));
    }
    let smooth: f64 = x
        .iter()
        .enumerate()
        .map(|(k, &v)| (k + 1) as f64 / 6.0 * (v + 0.3 * (3.0 * v).sin()))
        .sum();
    let step = if x[0] + x[1] >= 1.0 { 2.0 } else { 0.0 };
    Ok(smooth + x[2] * x[3] + step)
}

/// The built-in synthetic reference functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Synthetic {
    F1,
    G2d,
    Mono6,
}

impl Synthetic {
    pub fn name(self) -> &'static str {
        match self {
            Synthetic::F1 => "f1",
            Synthetic::G2d => "g2d",
            Synthetic::Mono6 => "mono6",
        }
    }

    /// The box the function is defined on.
    pub fn domain(self) -> Domain {
        match self {
            Synthetic::F1 => Domain::cube(1, -10.0, 10.0),
            Synthetic::G2d => Domain::cube(2, 0.0, 15.0),
            Synthetic::Mono6 => Domain::cube(6, 0.0, 1.0),
        }
        .expect("static domains are valid")
    }

    pub fn eval(self, x: &[f64]) -> Result<f64> {
        match self {
            Synthetic::F1 => {
                check_dim(1, x.len())?;
                f1_eval(x[0])
            }
            Synthetic::G2d => {
                check_dim(2, x.len())?;
                g2d_eval(x[0], x[1])
            }
            Synthetic::Mono6 => mono6_eval(x),
        }
    }

    pub fn oracle(self) -> FunctionOracle {
        FunctionOracle::new(self.name(), self.domain(), move |x| {
            self.eval(x).expect("oracle is only queried inside its domain")
        })
    }
}

impl FromStr for Synthetic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(Synthetic::F1),
            "g2d" => Ok(Synthetic::G2d),
            "mono6" => Ok(Synthetic::Mono6),
            other => Err(Error::UnknownFunction(other.to_string())),
        }
    }
}

impl fmt::Display for Synthetic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A non-decreasing function that can be evaluated anywhere on its domain.
///
/// Monotonicity is the caller's promise; `eval::monotonicity_probe` can
/// spot-check it. The call counter is informational only.
#[derive(Clone)]
pub struct FunctionOracle {
    name: String,
    domain: Domain,
    f: Arc<EvalFn>,
    calls: Arc<AtomicU64>,
}

impl FunctionOracle {
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FunctionOracle {
            name: name.into(),
            domain,
            f: Arc::new(f),
            calls: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Evaluates `f(x)`. `x` must lie in the closed domain box.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        (self.f)(x)
    }

    /// Checked evaluation.
    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        self.domain.ensure_contains(x)?;
        Ok(self.eval(x))
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl fmt::Debug for FunctionOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionOracle")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("calls", &self.calls())
            .finish()
    }
}

/// Exact observations `(x_i, f(x_i))` of a non-decreasing function.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    xs: Vec<Point>,
    values: Vec<f64>,
}

impl Dataset {
    /// Validates domain membership and monotonic consistency of the records.
    ///
    /// An empty record list is allowed here (it is meaningful to the
    /// adaptive cover); file loading rejects it.
    pub fn new(domain: &Domain, records: Vec<(Point, f64)>) -> Result<Self> {
        let dim = domain.dim();
        let mut xs = Vec::with_capacity(records.len());
        let mut values = Vec::with_capacity(records.len());
        for (x, v) in records {
            check_dim(dim, x.dim())?;
            domain.ensure_contains(&x)?;
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite value {v} in dataset")));
            }
            xs.push(x);
            values.push(v);
        }
        let data = Dataset { dim, xs, values };
        data.check_monotone()?;
        Ok(data)
    }

    /// Samples `n` uniform points of `domain` and records `f` there.
    pub fn sample(oracle: &FunctionOracle, n: usize, seed: u64) -> Result<Self> {
        let pts = sample_uniform(oracle.domain(), n, seed)?;
        let records = pts
            .into_iter()
            .map(|x| {
                let v = oracle.eval(&x);
                (x, v)
            })
            .collect();
        Dataset::new(oracle.domain(), records)
    }

    fn check_monotone(&self) -> Result<()> {
        for i in 0..self.len() {
            for j in 0..self.len() {
                if i != j && self.values[i] > self.values[j] && le_unchecked(&self.xs[i], &self.xs[j]) {
                    return Err(Error::MonotonicityViolation { i, j });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.xs.iter().zip(self.values.iter().copied())
    }

    pub fn points(&self) -> &[Point] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Empirical majorant: the smallest observed value among records that
    /// dominate `x`, or `+inf` if none does.
    pub fn tilde_f(&self, x: &[f64]) -> f64 {
        self.iter()
            .filter(|(xi, _)| le_unchecked(x, xi))
            .map(|(_, v)| v)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn read_csv<R: Read>(reader: R, domain: &Domain) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        check_header(&headers, domain.dim(), "f")?;
        let mut records = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let nums = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidParameter(format!("record {line}: {e}")))?;
            check_dim(domain.dim() + 1, nums.len())?;
            let v = nums[domain.dim()];
            records.push((Point::new(nums[..domain.dim()].to_vec())?, v));
        }
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Dataset::new(domain, records)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(header_names(self.dim, "x", "f"))?;
        for (x, v) in self.iter() {
            w.write_record(x.iter().chain(std::iter::once(&v)).map(|c| c.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Loads and validates a dataset CSV (`x1,...,xd,f`; `#` lines ignored).
pub fn dataset_load(path: impl AsRef<Path>, domain: &Domain) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    Dataset::read_csv(file, domain).map_err(|e| match e {
        Error::Csv(err) => Error::Parse {
            path: path.to_path_buf(),
            msg: err.to_string(),
        },
        other => other,
    })
}

pub(crate) fn header_names(d: usize, prefix: &str, last: &str) -> Vec<String> {
    (1..=d)
        .map(|k| format!("{prefix}{k}"))
        .chain(std::iter::once(last.to_string()))
        .collect()
}

pub(crate) fn check_header(headers: &csv::StringRecord, d: usize, last: &str) -> Result<()> {
    check_dim(d + 1, headers.len())?;
    if headers.get(d) != Some(last) {
        return Err(Error::InvalidParameter(format!(
            "expected last column `{last}`, header is {headers:?}"
        )));
    }
    Ok(())
}

/// `n` i.i.d. uniform points of the closed box, reproducible from `seed`.
pub fn sample_uniform(domain: &Domain, n: usize, seed: u64) -> Result<Vec<Point>> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (domain.y_min(), domain.y_max());
    Ok((0..n)
        .map(|_| {
            let coords = (0..domain.dim()).map(|k| rng.gen_range(lo[k]..=hi[k])).collect();
            Point::new(coords).expect("samples of a finite box are finite")
        })
        .collect())
}
