//! Lookup-table over-estimator `f_C(x) = min { b_i : x in cell_i }`.
//!
//! For a cover annotated with `b_i = f(y'_i)` and a non-decreasing `f`,
//! `f_C >= f` on the whole domain. Note `f_C` need not be non-decreasing.

use crate::cover::{grid_line, Cover};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{Domain, HyperRectangle};

#[derive(Debug, Clone)]
enum Index {
    Grid { n: usize },
    Tree(DyadicTree),
    Scan,
}

/// Exact guaranteed over-estimator backed by the annotated cover.
#[derive(Debug, Clone)]
pub struct LookupSurrogate {
    domain: Domain,
    cells: Vec<HyperRectangle>,
    values: Vec<f64>,
    index: Index,
}

impl LookupSurrogate {
    /// Requires every cell of the cover to carry a finite `b`.
    pub fn from_cover(cover: &Cover) -> Result<Self> {
        let vals = cover
            .upper_values()
            .ok_or_else(|| Error::InvalidParameter("cover has no upper values".into()))?;
        let values = vals
            .iter()
            .map(|b| b.filter(|v| v.is_finite()).ok_or(Error::NoFiniteCells))
            .collect::<Result<Vec<_>>>()?;
        let mut s = Self::from_cells(cover.domain().clone(), cover.cells().to_vec(), values)?;
        if let Some(shape) = cover.grid_shape() {
            let n = shape[0];
            if shape.iter().all(|&k| k == n) && n.checked_pow(cover.dim() as u32) == Some(s.cells.len()) {
                s.index = Index::Grid { n };
            }
        }
        Ok(s)
    }

    /// Arbitrary cells (possibly overlapping). Dyadic families get a tree
    /// index; anything else falls back to a linear scan.
    pub fn from_cells(domain: Domain, cells: Vec<HyperRectangle>, values: Vec<f64>) -> Result<Self> {
        check_dim(cells.len(), values.len())?;
        for c in &cells {
            check_dim(domain.dim(), c.dim())?;
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite stored value {v}")));
        }
        let index = match DyadicTree::build(&domain, &cells) {
            Some(t) => Index::Tree(t),
            None => Index::Scan,
        };
        Ok(LookupSurrogate {
            domain,
            cells,
            values,
            index,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// `f_C(x)` through the accelerated index.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.domain.dim(), x.len())?;
        self.domain.ensure_contains(x)?;
        let hit = match &self.index {
            Index::Grid { n } => Some(self.grid_cell(x, *n)),
            Index::Tree(t) => t.locate(x),
            Index::Scan => return self.eval_scan(x),
        };
        match hit {
            Some(i) if self.domain.cell_contains(&self.cells[i], x) => Ok(self.values[i]),
            _ => Err(Error::Uncovered { x: x.to_vec() }),
        }
    }

    /// `f_C(x)` by scanning every cell; the reference for the indices.
    pub fn eval_scan(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.domain.dim(), x.len())?;
        self.cells
            .iter()
            .zip(&self.values)
            .filter(|(c, _)| self.domain.cell_contains(c, x))
            .map(|(_, &b)| b)
            .reduce(f64::min)
            .ok_or_else(|| Error::Uncovered { x: x.to_vec() })
    }

    fn grid_cell(&self, x: &[f64], n: usize) -> usize {
        let d = self.domain.dim();
        let mut flat = 0;
        for k in 0..d {
            let (lo, hi) = (self.domain.y_min()[k], self.domain.y_max()[k]);
            let guess = ((x[k] - lo) / (hi - lo) * n as f64).floor();
            let mut i = guess.clamp(0.0, (n - 1) as f64) as usize;
            while i > 0 && x[k] < grid_line(&self.domain, k, i, n) {
                i -= 1;
            }
            while i + 1 < n && x[k] >= grid_line(&self.domain, k, i + 1, n) {
                i += 1;
            }
            flat = flat * n + i;
        }
        flat
    }

    /// Stored floats: `m * (d + 1)` for the table plus `2d` for the box.
    pub fn memory_footprint(&self) -> usize {
        lookup_memory_footprint(self.cells.len(), self.domain.dim())
    }
}

/// `m * (d + 1) + 2d` floats for a table of `m` points in dimension `d`.
pub fn lookup_memory_footprint(m: usize, d: usize) -> usize {
    m * (d + 1) + 2 * d
}

#[derive(Debug, Clone)]
enum Node {
    Empty,
    Leaf(usize),
    Split { mid: Vec<f64>, first: usize },
}

/// Split tree over a family of cells obtained by recursive halving of the
/// domain.
#[derive(Debug, Clone)]
struct DyadicTree {
    nodes: Vec<Node>,
}

impl DyadicTree {
    const MAX_DEPTH: usize = 60;

    fn build(domain: &Domain, cells: &[HyperRectangle]) -> Option<Self> {
        let d = domain.dim();
        if d > 16 {
            return None;
        }
        let mut tree = DyadicTree { nodes: vec![Node::Empty] };
        for (ci, cell) in cells.iter().enumerate() {
            let mut node = 0;
            let mut lo = domain.y_min().to_vec();
            let mut hi = domain.y_max().to_vec();
            let mut depth = 0;
            loop {
                if lo == cell.lower().as_slice() && hi == cell.upper().as_slice() {
                    match tree.nodes[node] {
                        Node::Empty => tree.nodes[node] = Node::Leaf(ci),
                        _ => return None,
                    }
                    break;
                }
                depth += 1;
                if depth > Self::MAX_DEPTH {
                    return None;
                }
                let (mid, first) = match &tree.nodes[node] {
                    Node::Leaf(_) => return None,
                    Node::Split { mid, first } => (mid.clone(), *first),
                    Node::Empty => {
                        let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + (b - a) / 2.0).collect();
                        if mid.iter().zip(&lo).zip(&hi).any(|((m, a), b)| !(a < m && m < b)) {
                            return None;
                        }
                        let first = tree.nodes.len();
                        tree.nodes.extend(std::iter::repeat_n(Node::Empty, 1 << d));
                        tree.nodes[node] = Node::Split {
                            mid: mid.clone(),
                            first,
                        };
                        (mid, first)
                    }
                };
                let mut s = 0;
                for k in 0..d {
                    if cell.lower()[k] >= mid[k] {
                        s |= 1 << k;
                        lo[k] = mid[k];
                    } else {
                        hi[k] = mid[k];
                    }
                }
                node = first + s;
            }
        }
        Some(tree)
    }

    fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Empty => return None,
                Node::Leaf(i) => return Some(*i),
                Node::Split { mid, first } => {
                    let s = x
                        .iter()
                        .zip(mid)
                        .enumerate()
                        .fold(0, |s, (k, (v, m))| if v >= m { s | 1 << k } else { s });
                    node = first + s;
                }
            }
        }
    }
}
