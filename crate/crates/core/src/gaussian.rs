//! Correlated Gaussian processes `N_d(zeta)`, their densities, the box
//! partitions `P_q` of `[-1,1]^d`, and odd cell-constant functions on them.
//!
//! Cells: at level `q` each coordinate axis splits into `2m` half-open cells,
//! `m = 2^q`. For `y >= 0` the index is `m + min(floor(y m), m-1)`, for `y < 0`
//! it is `m - 1 - min(floor(-y m), m-1)`; zero goes to the positive side. A
//! cell id is the mixed-radix number `sum_l idx_l (2m)^l`, so coordinate 0 is
//! least significant. The canonical half is `idx_0 >= m`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::moments::{covariance_of, MomentMatrix};
use crate::rng::{stream, Rng};
use crate::{Error, Result};

pub const CHOLESKY_TOL: f64 = 1e-12;

/// Lower-triangular `L` with `L L^T = sigma`.
pub fn cholesky(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = sigma[(j, j)];
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if d.is_nan() || d <= CHOLESKY_TOL {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = sigma[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Mean, covariance and Cholesky factor of `t` coordinates, replicated
/// independently over `d` dimensions.
#[derive(Clone, Debug)]
pub struct GaussianProcessSpec {
    pub sigma: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub d: usize,
    pub chol: DMatrix<f64>,
    pub min_eigenvalue: f64,
    log_det: f64,
}

impl GaussianProcessSpec {
    pub fn new(sigma: DMatrix<f64>, mu: DVector<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Invalid("dimension d must be at least 1".into()));
        }
        if mu.len() != sigma.nrows() {
            return Err(Error::Dimension("mean and covariance sizes differ".into()));
        }
        let min_eigenvalue = crate::moments::min_eigenvalue(&sigma);
        let chol = cholesky(&sigma).map_err(|e| match e {
            Error::NotPositiveDefinite { .. } if min_eigenvalue <= CHOLESKY_TOL => Error::Singular(min_eigenvalue),
            e => e,
        })?;
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self { sigma, mu, d, chol, min_eigenvalue, log_det })
    }

    pub fn from_moments(zeta: &MomentMatrix, d: usize) -> Result<Self> {
        let c = covariance_of(zeta);
        Self::new(c.sigma, c.mu, d)
    }

    pub fn t(&self) -> usize {
        self.mu.len()
    }

    /// `t` points in `R^d` from standard normals `z` (length `t*d`, grouped by
    /// dimension). Sharing `z` across specs gives common random numbers.
    pub fn transform(&self, z: &[f64]) -> Vec<Vec<f64>> {
        let t = self.t();
        let mut pts = vec![vec![0.0; self.d]; t];
        for l in 0..self.d {
            let zl = &z[l * t..(l + 1) * t];
            for i in 0..t {
                let mut v = self.mu[i];
                for p in 0..=i {
                    v += self.chol[(i, p)] * zl[p];
                }
                pts[i][l] = v;
            }
        }
        pts
    }

    pub fn sample_with(&self, rng: &mut Rng) -> Vec<Vec<f64>> {
        let z: Vec<f64> = (0..self.t() * self.d).map(|_| rng.sample(StandardNormal)).collect();
        self.transform(&z)
    }

    /// Product over dimensions of the `t`-variate normal density.
    pub fn density(&self, points: &[Vec<f64>]) -> Result<f64> {
        let t = self.t();
        if points.len() != t || points.iter().any(|p| p.len() != self.d) {
            return Err(Error::Dimension(format!("expected {t} points in R^{}", self.d)));
        }
        let mut log = 0.0;
        let norm = -0.5 * (t as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * self.log_det;
        for l in 0..self.d {
            // Forward substitution L w = y - mu.
            let mut w = vec![0.0; t];
            for i in 0..t {
                let mut s = points[i][l] - self.mu[i];
                for p in 0..i {
                    s -= self.chol[(i, p)] * w[p];
                }
                w[i] = s / self.chol[(i, i)];
            }
            log += norm - 0.5 * w.iter().map(|v| v * v).sum::<f64>();
        }
        Ok(log.exp())
    }
}

/// Deterministic sample of `N_d(spec)` for `seed`.
pub fn sample_gaussians(spec: &GaussianProcessSpec, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, 0);
    spec.sample_with(&mut rng)
}

/// `gamma_{t,d}(points; zeta)`.
pub fn gaussian_density(points: &[Vec<f64>], zeta: &MomentMatrix) -> Result<f64> {
    let d = points.first().map_or(1, |p| p.len());
    GaussianProcessSpec::from_moments(zeta, d)?.density(points)
}

pub type CellId = u64;

/// Partition geometry for `(q, d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub q: u32,
    pub d: usize,
}

impl Grid {
    pub fn new(q: u32, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Invalid("d must be at least 1".into()));
        }
        let bits = (q as u64 + 1) * d as u64;
        if bits > 62 {
            return Err(Error::Budget { required: 1u128 << bits.min(127), budget: 1 << 62 });
        }
        Ok(Self { q, d })
    }

    /// Cells per half-axis.
    pub fn m(&self) -> u64 {
        1 << self.q
    }

    pub fn radix(&self) -> u64 {
        2 * self.m()
    }

    pub fn num_cells(&self) -> u64 {
        self.radix().pow(self.d as u32)
    }

    pub fn coord_index(&self, y: f64) -> Option<u64> {
        if !(-1.0..=1.0).contains(&y) {
            return None;
        }
        let m = self.m();
        let mf = m as f64;
        Some(if y >= 0.0 {
            m + ((y * mf).floor() as u64).min(m - 1)
        } else {
            m - 1 - ((-y * mf).floor() as u64).min(m - 1)
        })
    }

    pub fn cell_index(&self, y: &[f64]) -> Option<CellId> {
        if y.len() != self.d {
            return None;
        }
        let r = self.radix();
        let mut id = 0u64;
        for l in (0..self.d).rev() {
            id = id * r + self.coord_index(y[l])?;
        }
        Some(id)
    }

    pub fn coords(&self, id: CellId) -> Vec<u64> {
        let r = self.radix();
        let mut rest = id;
        (0..self.d)
            .map(|_| {
                let c = rest % r;
                rest /= r;
                c
            })
            .collect()
    }

    pub fn from_coords(&self, coords: &[u64]) -> CellId {
        let r = self.radix();
        coords.iter().rev().fold(0, |acc, &c| acc * r + c)
    }

    pub fn mirror(&self, id: CellId) -> CellId {
        let r = self.radix();
        let c: Vec<u64> = self.coords(id).into_iter().map(|c| r - 1 - c).collect();
        self.from_coords(&c)
    }

    pub fn is_canonical(&self, id: CellId) -> bool {
        id % self.radix() >= self.m()
    }

    /// Center point of a cell.
    pub fn center(&self, id: CellId) -> Vec<f64> {
        let m = self.m() as f64;
        self.coords(id).into_iter().map(|c| (c as f64 + 0.5) / m - 1.0).collect()
    }

    /// Containing cell one level coarser.
    pub fn parent(&self, id: CellId) -> Result<CellId> {
        if self.q == 0 {
            return Err(Error::Invalid("level 0 has no parent".into()));
        }
        let coarse = Grid { q: self.q - 1, d: self.d };
        let c: Vec<u64> = self.coords(id).into_iter().map(|c| c / 2).collect();
        Ok(coarse.from_coords(&c))
    }

    pub fn canonical_cells(&self) -> Vec<CellId> {
        (0..self.num_cells()).filter(|&c| self.is_canonical(c)).collect()
    }
}

pub fn cell_index(y: &[f64], q: u32) -> Option<CellId> {
    Grid::new(q, y.len()).ok()?.cell_index(y)
}

/// Odd function, constant on cells of `P_q`, with values in `{-1, 0, 1}`.
/// Only nonzero canonical-half values are stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionedFunction {
    grid: Grid,
    values: BTreeMap<CellId, i8>,
}

#[derive(Serialize, Deserialize)]
struct PsiFile {
    q: u32,
    d: usize,
    cells: BTreeMap<String, i8>,
}

impl PartitionedFunction {
    pub fn zero(q: u32, d: usize) -> Result<Self> {
        Ok(Self { grid: Grid::new(q, d)?, values: BTreeMap::new() })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    /// Sets `psi` on `cell` and, by oddness, `-v` on its mirror.
    pub fn set(&mut self, cell: CellId, v: i8) -> Result<()> {
        if !(-1..=1).contains(&v) {
            return Err(Error::Invalid(format!("psi value {v} not in {{-1,0,1}}")));
        }
        if cell >= self.grid.num_cells() {
            return Err(Error::OutOfRange(format!("cell {cell}")));
        }
        let (c, v) = if self.grid.is_canonical(cell) { (cell, v) } else { (self.grid.mirror(cell), -v) };
        if v == 0 {
            self.values.remove(&c);
        } else {
            self.values.insert(c, v);
        }
        Ok(())
    }

    pub fn value_on_cell(&self, cell: CellId) -> i8 {
        if self.grid.is_canonical(cell) {
            self.values.get(&cell).copied().unwrap_or(0)
        } else {
            -self.values.get(&self.grid.mirror(cell)).copied().unwrap_or(0)
        }
    }

    pub fn eval(&self, y: &[f64]) -> i8 {
        match self.grid.cell_index(y) {
            Some(c) => self.value_on_cell(c),
            None => 0,
        }
    }

    /// Pure strategy number `code` in base 3 over canonical cells (digit 0,1,2
    /// meaning -1,0,1). `code = 0` is all `-1`.
    pub fn from_code(grid: Grid, cells: &[CellId], mut code: u128) -> Self {
        let mut psi = Self { grid, values: BTreeMap::new() };
        for &c in cells {
            let v = (code % 3) as i8 - 1;
            code /= 3;
            if v != 0 {
                psi.values.insert(c, v);
            }
        }
        psi
    }

    /// Same function expressed on the next finer partition.
    pub fn refine(&self) -> Result<Self> {
        let fine = Grid::new(self.grid.q + 1, self.grid.d)?;
        let mut out = Self { grid: fine, values: BTreeMap::new() };
        for c in fine.canonical_cells() {
            let v = self.value_on_cell(fine.parent(c)?);
            if v != 0 {
                out.values.insert(c, v);
            }
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: PsiFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut psi = Self::zero(file.q, file.d)?;
        for (key, v) in file.cells {
            let c: CellId = key.trim().parse().map_err(|_| Error::Parse(format!("bad cell id {key:?}")))?;
            if c >= psi.grid.num_cells() {
                return Err(Error::OutOfRange(format!("cell {c}")));
            }
            if !psi.grid.is_canonical(c) {
                return Err(Error::Parse(format!("cell {c} is not in the canonical half")));
            }
            psi.set(c, v)?;
        }
        Ok(psi)
    }

    pub fn to_json(&self) -> String {
        let file = PsiFile {
            q: self.grid.q,
            d: self.grid.d,
            cells: self.values.iter().map(|(c, v)| (c.to_string(), *v)).collect(),
        };
        serde_json::to_string(&file).expect("psi serializes")
    }
}
