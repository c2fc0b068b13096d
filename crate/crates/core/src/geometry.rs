//! Partial order on R^d, half-open boxes and their dyadic refinement.
//!
//! A [`HyperRectangle`] is the half-open box `{x | lower <= x < upper}`.
//! Inside a [`Domain`], cells whose upper face lies on the domain's upper
//! face treat that face as closed, so a family of cells tiling
//! `[y_min, y_max)` also covers the closed box `[y_min, y_max]`.

use std::cmp::Ordering;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A point of R^d with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("a point needs at least one coordinate".into()));
        }
        if let Some(k) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

/// `x <= x'` for the componentwise partial order.
pub fn partial_le(x: &[f64], y: &[f64]) -> Result<bool> {
    check_dim(x.len(), y.len())?;
    Ok(le_unchecked(x, y))
}

#[inline]
pub(crate) fn le_unchecked(x: &[f64], y: &[f64]) -> bool {
    x.iter().zip(y).all(|(a, b)| a <= b)
}

/// Lexicographic order on coordinates, used to sort cells deterministically.
pub(crate) fn lex_cmp(x: &[f64], y: &[f64]) -> Ordering {
    for (a, b) in x.iter().zip(y) {
        match a.total_cmp(b) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    x.len().cmp(&y.len())
}

/// Half-open box `[lower, upper)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperRectangle {
    lower: Point,
    upper: Point,
}

impl HyperRectangle {
    pub fn new(lower: Point, upper: Point) -> Result<Self> {
        check_dim(lower.dim(), upper.dim())?;
        if let Some(k) = lower.iter().zip(upper.iter()).position(|(a, b)| a > b) {
            return Err(Error::InvertedRectangle(k));
        }
        Ok(HyperRectangle { lower, upper })
    }

    pub fn from_bounds(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(Point::new(lower)?, Point::new(upper)?)
    }

    pub fn lower(&self) -> &Point {
        &self.lower
    }

    pub fn upper(&self) -> &Point {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    /// Half-open membership: `lower <= x` and `x < upper` on every axis.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(self.contains_unchecked(x))
    }

    #[inline]
    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        self.lower
            .iter()
            .zip(self.upper.iter())
            .zip(x)
            .all(|((lo, hi), v)| lo <= v && v < hi)
    }

    /// The `2^d` dyadic children. Child `s` (bit `k` of `s` selects the
    /// upper half on axis `k`) spans `[y + s*r, y + (s+1)*r)` with
    /// `r = (y' - y) / 2`. The upper half ends at `y'` itself so the
    /// children tile the parent exactly in floating point.
    pub fn decompose(&self) -> Result<Vec<HyperRectangle>> {
        let d = self.dim();
        if d >= usize::BITS as usize - 1 {
            return Err(Error::InvalidParameter(format!("cannot split a {d}-dimensional box")));
        }
        let mut mid = Vec::with_capacity(d);
        for k in 0..d {
            let (lo, hi) = (self.lower[k], self.upper[k]);
            let m = lo + (hi - lo) / 2.0;
            if !(lo < m && m < hi) {
                return Err(Error::Degenerate(k));
            }
            mid.push(m);
        }
        let children = (0..1usize << d)
            .map(|s| {
                let mut lo = Vec::with_capacity(d);
                let mut hi = Vec::with_capacity(d);
                for k in 0..d {
                    if s >> k & 1 == 0 {
                        lo.push(self.lower[k]);
                        hi.push(mid[k]);
                    } else {
                        lo.push(mid[k]);
                        hi.push(self.upper[k]);
                    }
                }
                HyperRectangle {
                    lower: Point(lo),
                    upper: Point(hi),
                }
            })
            .collect();
        Ok(children)
    }

    /// `max_k (upper_k - lower_k)`.
    pub fn linf_diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(self.upper.iter())
            .map(|(a, b)| b - a)
            .fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(self.upper.iter())
            .map(|(a, b)| b - a)
            .product()
    }
}

/// The closed box `[y_min, y_max]` on which guarantees are stated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainRepr", into = "DomainRepr")]
pub struct Domain {
    y_min: Point,
    y_max: Point,
}

#[derive(Serialize, Deserialize)]
struct DomainRepr {
    y_min: Vec<f64>,
    y_max: Vec<f64>,
}

impl TryFrom<DomainRepr> for Domain {
    type Error = Error;

    fn try_from(r: DomainRepr) -> Result<Self> {
        Domain::new(r.y_min, r.y_max)
    }
}

impl From<Domain> for DomainRepr {
    fn from(d: Domain) -> Self {
        DomainRepr {
            y_min: d.y_min.into_vec(),
            y_max: d.y_max.into_vec(),
        }
    }
}

impl Domain {
    pub fn new(y_min: Vec<f64>, y_max: Vec<f64>) -> Result<Self> {
        let (y_min, y_max) = (Point::new(y_min)?, Point::new(y_max)?);
        check_dim(y_min.dim(), y_max.dim())?;
        if let Some(k) = y_min.iter().zip(y_max.iter()).position(|(a, b)| a >= b) {
            return Err(Error::InvalidDomain(k));
        }
        Ok(Domain { y_min, y_max })
    }

    /// The same interval `[lo, hi]` on each of `d` axes.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Domain::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.y_min.dim()
    }

    pub fn y_min(&self) -> &Point {
        &self.y_min
    }

    pub fn y_max(&self) -> &Point {
        &self.y_max
    }

    /// The root box `R_{y_min, y_max}`.
    pub fn as_rect(&self) -> HyperRectangle {
        HyperRectangle {
            lower: self.y_min.clone(),
            upper: self.y_max.clone(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(le_unchecked(&self.y_min, x) && le_unchecked(x, &self.y_max))
    }

    pub fn ensure_contains(&self, x: &[f64]) -> Result<()> {
        if self.contains(x)? {
            Ok(())
        } else {
            Err(Error::OutOfDomain { x: x.to_vec() })
        }
    }

    /// Membership of `x` in `cell` where the cell's upper face is closed on
    /// every axis where it touches `y_max`.
    #[inline]
    pub fn cell_contains(&self, cell: &HyperRectangle, x: &[f64]) -> bool {
        (0..x.len()).all(|k| {
            let (lo, hi, v) = (cell.lower[k], cell.upper[k], x[k]);
            lo <= v && (v < hi || (v == hi && hi == self.y_max[k]))
        })
    }

    pub fn span(&self) -> Vec<f64> {
        self.y_min
            .iter()
            .zip(self.y_max.iter())
            .map(|(a, b)| b - a)
            .collect()
    }

    pub fn linf_diameter(&self) -> f64 {
        self.as_rect().linf_diameter()
    }

    pub fn volume(&self) -> f64 {
        self.as_rect().volume()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rect(lo: &[f64], hi: &[f64]) -> HyperRectangle {
        HyperRectangle::from_bounds(lo.to_vec(), hi.to_vec()).unwrap()
    }

    #[test]
    fn partial_order_examples() {
        assert!(partial_le(&[1.0, 2.0], &[1.0, 2.0]).unwrap());
        assert!(!partial_le(&[0.0, 5.0], &[1.0, 4.0]).unwrap());
        assert!(!partial_le(&[1.0, 4.0], &[0.0, 5.0]).unwrap());
        assert!(partial_le(&[-10.0], &[3.0]).unwrap());
        assert!(matches!(
            partial_le(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn half_open_membership() {
        let r = rect(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(r.contains(&[0.0, 0.0]).unwrap());
        assert!(!r.contains(&[1.0, 0.5]).unwrap());
        assert!(r.contains(&[0.5, 0.5]).unwrap());
        assert!(r.contains(&[0.5]).is_err());
    }

    #[test]
    fn decompose_1d_and_2d() {
        let kids = rect(&[0.0], &[1.0]).decompose().unwrap();
        assert_eq!(kids, vec![rect(&[0.0], &[0.5]), rect(&[0.5], &[1.0])]);

        let kids = rect(&[0.0, 0.0], &[2.0, 2.0]).decompose().unwrap();
        assert_eq!(
            kids,
            vec![
                rect(&[0.0, 0.0], &[1.0, 1.0]),
                rect(&[1.0, 0.0], &[2.0, 1.0]),
                rect(&[0.0, 1.0], &[1.0, 2.0]),
                rect(&[1.0, 1.0], &[2.0, 2.0]),
            ]
        );
    }

    #[test]
    fn decompose_rejects_degenerate() {
        assert!(matches!(
            rect(&[0.0, 1.0], &[1.0, 1.0]).decompose(),
            Err(Error::Degenerate(1))
        ));
        let tiny = rect(&[1.0], &[1.0 + f64::EPSILON]);
        assert!(matches!(tiny.decompose(), Err(Error::Degenerate(0))));
    }

    #[test]
    fn decompose_3d_membership_is_exclusive() {
        let r = rect(&[-1.0, 0.0, 2.0], &[1.0, 0.3, 7.0]);
        let kids = r.decompose().unwrap();
        assert_eq!(kids.len(), 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..3).map(|k| rng.gen_range(r.lower()[k]..r.upper()[k])).collect();
            assert_eq!(kids.iter().filter(|c| c.contains(&x).unwrap()).count(), 1);
        }
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(rect(&[0.0, 0.0], &[1.0, 3.0]).linf_diameter(), 3.0);
        for d in 1..5 {
            assert_eq!(rect(&vec![0.0; d], &vec![0.1; d]).linf_diameter(), 0.1);
        }
        assert_eq!(rect(&[-10.0], &[10.0]).linf_diameter(), 20.0);
    }

    #[test]
    fn domain_validation_and_closed_top() {
        assert!(matches!(Domain::new(vec![0.0, 1.0], vec![1.0, 1.0]), Err(Error::InvalidDomain(1))));
        let dom = Domain::cube(2, 0.0, 1.0).unwrap();
        let top = rect(&[0.5, 0.5], &[1.0, 1.0]);
        assert!(dom.cell_contains(&top, &[1.0, 1.0]));
        assert!(!top.contains(&[1.0, 1.0]).unwrap());
        let inner = rect(&[0.0, 0.0], &[0.5, 0.5]);
        assert!(!dom.cell_contains(&inner, &[0.5, 0.2]));
        assert!(dom.contains(&[1.0, 0.0]).unwrap());
        assert!(!dom.contains(&[1.0 + 1e-12, 0.0]).unwrap());
    }

    #[test]
    fn point_rejects_non_finite() {
        assert!(matches!(Point::new(vec![0.0, f64::NAN]), Err(Error::NonFinite(1))));
        assert!(Point::new(vec![]).is_err());
        let p: Result<Point, _> = serde_json::from_str("[1.0, 2.0]");
        assert_eq!(p.unwrap().as_slice(), &[1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn partial_order_laws(
            a in prop::collection::vec(-5i32..5, 3),
            b in prop::collection::vec(-5i32..5, 3),
            c in prop::collection::vec(-5i32..5, 3),
        ) {
            let f = |v: &Vec<i32>| v.iter().map(|&z| z as f64).collect::<Vec<_>>();
            let (a, b, c) = (f(&a), f(&b), f(&c));
            prop_assert!(partial_le(&a, &a).unwrap());
            if partial_le(&a, &b).unwrap() && partial_le(&b, &c).unwrap() {
                prop_assert!(partial_le(&a, &c).unwrap());
            }
            if partial_le(&a, &b).unwrap() && partial_le(&b, &a).unwrap() {
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn decompose_preserves_dyadic_volume(
            lo in prop::collection::vec(-64i32..64, 1..4),
            ext in prop::collection::vec(1u32..64, 4),
        ) {
            let lower: Vec<f64> = lo.iter().map(|&v| v as f64 / 8.0).collect();
            let upper: Vec<f64> = lower.iter().zip(&ext).map(|(l, &e)| l + e as f64 / 4.0).collect();
            let r = HyperRectangle::from_bounds(lower, upper).unwrap();
            let kids = r.decompose().unwrap();
            prop_assert_eq!(kids.len(), 1 << r.dim());
            let total: f64 = kids.iter().map(|c| c.volume()).sum();
            prop_assert_eq!(total, r.volume());
        }
    }
}
