//! Distributions on the cube, their moment matrices, and the restriction /
//! permutation / sign operators on moment matrices.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_traits::{One, Signed, Zero};

use crate::lp::{self, LinearProgram, LpStatus, Relation};
use crate::predicate::{assignment_string, parse_assignment, sign, Predicate};
use crate::rational::{fmt_q, parse_q, qi, to_f64, Q};
use crate::{Error, Result};

/// Rational probability weights on `{-1,1}^k`, zero weights omitted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CubeDistribution {
    k: usize,
    probs: BTreeMap<usize, Q>,
}

impl CubeDistribution {
    pub fn new(k: usize, probs: BTreeMap<usize, Q>) -> Result<Self> {
        if k == 0 || k > crate::predicate::MAX_ARITY {
            return Err(Error::Invalid(format!("arity {k} out of range")));
        }
        let mut total = Q::zero();
        let mut clean = BTreeMap::new();
        for (x, p) in probs {
            if x >= 1 << k {
                return Err(Error::OutOfRange(format!("assignment {x} for k={k}")));
            }
            if p.is_negative() {
                return Err(Error::Invalid(format!("negative weight {p}")));
            }
            total += &p;
            if !p.is_zero() {
                clean.insert(x, p);
            }
        }
        if !total.is_one() {
            return Err(Error::Invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { k, probs: clean })
    }

    pub fn point_mass(k: usize, x: usize) -> Self {
        Self::new(k, BTreeMap::from([(x, Q::one())])).expect("valid point mass")
    }

    pub fn uniform_on(k: usize, support: &[usize]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Invalid("empty support".into()));
        }
        let w = Q::new(1.into(), (support.len() as i64).into());
        let mut probs = BTreeMap::new();
        for &x in support {
            *probs.entry(x).or_insert_with(Q::zero) += &w;
        }
        Self::new(k, probs)
    }

    pub fn uniform(k: usize) -> Self {
        Self::uniform_on(k, &(0..1 << k).collect::<Vec<_>>()).expect("nonempty")
    }

    /// `sum_i w_i * nu_i` for weights summing to one.
    pub fn mixture(parts: &[(Q, &CubeDistribution)]) -> Result<Self> {
        let k = parts.first().ok_or_else(|| Error::Invalid("empty mixture".into()))?.1.k;
        let mut probs: BTreeMap<usize, Q> = BTreeMap::new();
        for (w, nu) in parts {
            if nu.k != k {
                return Err(Error::Dimension("mixture arity mismatch".into()));
            }
            for (x, p) in &nu.probs {
                *probs.entry(*x).or_insert_with(Q::zero) += w * p;
            }
        }
        Self::new(k, probs)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn probs(&self) -> &BTreeMap<usize, Q> {
        &self.probs
    }

    pub fn prob(&self, x: usize) -> Q {
        self.probs.get(&x).cloned().unwrap_or_else(Q::zero)
    }

    pub fn support(&self) -> Vec<usize> {
        self.probs.keys().copied().collect()
    }

    /// First assignment outside `f^{-1}(1)` carrying weight, if any.
    pub fn unsupported_point(&self, f: &Predicate) -> Option<usize> {
        self.probs.keys().copied().find(|&x| !f.eval(x))
    }

    /// `E[x_i]` for 0-based coordinate `i`.
    pub fn bias(&self, i: usize) -> Q {
        self.probs.iter().fold(Q::zero(), |acc, (x, p)| {
            if sign(*x, i) == 1 {
                acc + p
            } else {
                acc - p
            }
        })
    }

    pub fn biases(&self) -> Vec<Q> {
        (0..self.k).map(|i| self.bias(i)).collect()
    }

    /// Marginal on the coordinates listed in `coords`, re-indexed so that
    /// `coords[p]` becomes bit `p`.
    pub fn marginal(&self, coords: &[usize]) -> BTreeMap<usize, Q> {
        let mut out: BTreeMap<usize, Q> = BTreeMap::new();
        for (x, p) in &self.probs {
            let y = coords.iter().enumerate().fold(0, |acc, (pos, &c)| acc | (((x >> c) & 1) << pos));
            *out.entry(y).or_insert_with(Q::zero) += p;
        }
        out
    }

    /// Image under `x -> x * b` coordinate-wise, `b` given as an assignment index.
    pub fn twisted(&self, b: usize) -> Self {
        Self { k: self.k, probs: self.probs.iter().map(|(x, p)| (x ^ b, p.clone())).collect() }
    }

    /// Image under a coordinate permutation: output coordinate `i` is input
    /// coordinate `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let probs = self
            .probs
            .iter()
            .map(|(x, p)| {
                let y = perm.iter().enumerate().fold(0, |acc, (i, &src)| acc | (((x >> src) & 1) << i));
                (y, p.clone())
            })
            .collect();
        Self { k: self.k, probs }
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.probs.iter().map(|(x, p)| (assignment_string(*x, self.k), fmt_q(p))).collect()
    }

    pub fn from_map(k: usize, map: &BTreeMap<String, String>) -> Result<Self> {
        let mut probs = BTreeMap::new();
        for (s, p) in map {
            let x = parse_assignment(s, k)?;
            probs.insert(x, parse_q(p)?);
        }
        Self::new(k, probs)
    }
}

/// Symmetric `(k+1) x (k+1)` rational matrix, row/column 0 carrying biases.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MomentMatrix {
    dim: usize,
    entries: Vec<Q>,
}

impl MomentMatrix {
    pub fn from_rows(rows: Vec<Vec<Q>>) -> Result<Self> {
        let dim = rows.len();
        if dim < 2 {
            return Err(Error::Dimension("moment matrix needs at least 2 rows".into()));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("moment matrix must be square".into()));
        }
        let m = Self { dim, entries: rows.into_iter().flatten().collect() };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.dim {
            if !self.get(i, i).is_one() {
                return Err(Error::Invalid(format!("diagonal entry {i} is {}", self.get(i, i))));
            }
            for j in 0..self.dim {
                if self.get(i, j) != self.get(j, i) {
                    return Err(Error::Invalid(format!("asymmetric at ({i},{j})")));
                }
                if self.get(i, j).abs() > Q::one() {
                    return Err(Error::Invalid(format!("entry ({i},{j}) exceeds 1 in magnitude")));
                }
            }
        }
        Ok(())
    }

    pub fn identity(k: usize) -> Self {
        let dim = k + 1;
        let entries = (0..dim * dim).map(|e| if e / dim == e % dim { Q::one() } else { Q::zero() }).collect();
        Self { dim, entries }
    }

    pub fn all_ones(k: usize) -> Self {
        Self { dim: k + 1, entries: vec![Q::one(); (k + 1) * (k + 1)] }
    }

    pub fn k(&self) -> usize {
        self.dim - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &Q {
        &self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<Q>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn biases(&self) -> Vec<Q> {
        (1..self.dim).map(|i| self.get(0, i).clone()).collect()
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| to_f64(self.get(i, j)))
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.entries.chunks(self.dim).map(|r| r.iter().map(fmt_q).collect()).collect()
    }

    pub fn from_strings(rows: &[Vec<String>]) -> Result<Self> {
        let parsed = rows
            .iter()
            .map(|r| r.iter().map(|s| parse_q(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(parsed)
    }

    /// JSON array-of-arrays of `"p/q"` strings.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<Vec<String>> = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_strings(&rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_strings()).expect("strings serialize")
    }

    /// Exact positive semidefiniteness by symmetric elimination: a negative
    /// pivot, or a zero pivot with a nonzero remainder of its row, refutes it.
    pub fn is_psd_exact(&self) -> bool {
        let n = self.dim;
        let mut a: Vec<Vec<Q>> = self.rows();
        for p in 0..n {
            let piv = a[p][p].clone();
            if piv.is_negative() {
                return false;
            }
            if piv.is_zero() {
                if (p + 1..n).any(|j| !a[p][j].is_zero()) {
                    return false;
                }
                continue;
            }
            for i in p + 1..n {
                if a[i][p].is_zero() {
                    continue;
                }
                let f = &a[i][p] / &piv;
                for j in p..n {
                    let d = &f * &a[p][j];
                    a[i][j] -= d;
                }
            }
        }
        true
    }
}

/// First moments only; a point of the projected body.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BiasVector(pub Vec<Q>);

impl BiasVector {
    pub fn of(nu: &CubeDistribution) -> Self {
        Self(nu.biases())
    }

    /// Moment matrix with the product ("dummy") second moments `z_i z_j`.
    pub fn dummy_moments(&self) -> MomentMatrix {
        let k = self.0.len();
        let mut rows = vec![vec![Q::one(); k + 1]; k + 1];
        for i in 1..=k {
            rows[0][i] = self.0[i - 1].clone();
            rows[i][0] = self.0[i - 1].clone();
            for j in 1..=k {
                if i != j {
                    rows[i][j] = &self.0[i - 1] * &self.0[j - 1];
                }
            }
        }
        MomentMatrix { dim: k + 1, entries: rows.into_iter().flatten().collect() }
    }
}

/// Exact moments `zeta(0,i) = E[x_i]`, `zeta(i,j) = E[x_i x_j]`.
pub fn moments_of(nu: &CubeDistribution) -> MomentMatrix {
    let k = nu.k;
    let dim = k + 1;
    let mut entries = vec![Q::zero(); dim * dim];
    for (x, p) in &nu.probs {
        let s: Vec<i8> = std::iter::once(1).chain((0..k).map(|i| sign(*x, i))).collect();
        for i in 0..dim {
            for j in 0..dim {
                if s[i] * s[j] == 1 {
                    entries[i * dim + j] += p;
                } else {
                    entries[i * dim + j] -= p;
                }
            }
        }
    }
    MomentMatrix { dim, entries }
}

/// `zeta_{S,pi,b}`: select `S` (0-based coordinates, in the given order), then
/// output row `i` is row `pi[i]` of `zeta_S`, then multiply entrywise by
/// `(1 b)(1 b)^T`. Positions in `pi` are 0-based.
pub fn restrict_permute_sign(zeta: &MomentMatrix, s: &[usize], pi: &[usize], b: &[i8]) -> Result<MomentMatrix> {
    let t = s.len();
    if t == 0 {
        return Err(Error::Invalid("empty subset".into()));
    }
    if pi.len() != t || b.len() != t {
        return Err(Error::Dimension(format!("|S|={t}, |pi|={}, |b|={}", pi.len(), b.len())));
    }
    if let Some(&c) = s.iter().find(|&&c| c >= zeta.k()) {
        return Err(Error::OutOfRange(format!("coordinate {c} for k={}", zeta.k())));
    }
    let mut seen = vec![false; t];
    for &p in pi {
        if p >= t || seen[p] {
            return Err(Error::Invalid(format!("{pi:?} is not a permutation")));
        }
        seen[p] = true;
    }
    if b.iter().any(|&v| v != 1 && v != -1) {
        return Err(Error::Invalid("signs must be +1/-1".into()));
    }
    // src[i] = row of zeta feeding output row i; sg[i] = sign applied.
    let src: Vec<usize> = std::iter::once(0).chain(pi.iter().map(|&p| s[p] + 1)).collect();
    let sg: Vec<i8> = std::iter::once(1).chain(b.iter().copied()).collect();
    let dim = t + 1;
    let mut entries = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let v = zeta.get(src[i], src[j]);
            entries.push(if i == j || sg[i] * sg[j] == 1 { v.clone() } else { -v });
        }
    }
    Ok(MomentMatrix { dim, entries })
}

fn check_delta(delta: &Q) -> Result<()> {
    if !delta.is_positive() || *delta >= Q::one() {
        return Err(Error::Invalid(format!("delta {delta} outside (0,1)")));
    }
    Ok(())
}

/// `(1 - delta) zeta + delta I`.
pub fn noise_shift(zeta: &MomentMatrix, delta: &Q) -> Result<MomentMatrix> {
    check_delta(delta)?;
    let keep = Q::one() - delta;
    let dim = zeta.dim;
    let entries =
        (0..dim * dim).map(|e| if e / dim == e % dim { Q::one() } else { &keep * &zeta.entries[e] }).collect();
    Ok(MomentMatrix { dim, entries })
}

/// Inverse of [`noise_shift`]: `(zeta - delta I) / (1 - delta)`.
pub fn noise_unshift(zeta: &MomentMatrix, delta: &Q) -> Result<MomentMatrix> {
    check_delta(delta)?;
    let keep = Q::one() - delta;
    let dim = zeta.dim;
    let entries =
        (0..dim * dim).map(|e| if e / dim == e % dim { Q::one() } else { &zeta.entries[e] / &keep }).collect();
    let m = MomentMatrix { dim, entries };
    m.validate()?;
    Ok(m)
}

#[derive(Clone, Debug)]
pub struct Covariance {
    pub sigma: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub min_eigenvalue: f64,
}

/// `Sigma_ij = zeta(i,j) - zeta(0,i) zeta(0,j)`, `mu_i = zeta(0,i)`.
pub fn covariance_exact(zeta: &MomentMatrix) -> Vec<Vec<Q>> {
    let k = zeta.k();
    (1..=k)
        .map(|i| (1..=k).map(|j| zeta.get(i, j) - zeta.get(0, i) * zeta.get(0, j)).collect())
        .collect()
}

pub fn covariance_of(zeta: &MomentMatrix) -> Covariance {
    let k = zeta.k();
    let exact = covariance_exact(zeta);
    let sigma = DMatrix::from_fn(k, k, |i, j| to_f64(&exact[i][j]));
    let mu = DVector::from_fn(k, |i, _| to_f64(zeta.get(0, i + 1)));
    let min_eigenvalue = min_eigenvalue(&sigma);
    Covariance { sigma, mu, min_eigenvalue }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// LP over weights on `f^{-1}(1)` reproducing the requested first moments
/// (`bias[i]`) and, where given, second moments (`corr[(i,j)]`, `i < j`).
fn moment_feasibility(
    f: &Predicate,
    bias: &[Option<Q>],
    corr: &BTreeMap<(usize, usize), Q>,
) -> Result<Option<CubeDistribution>> {
    let sat = f.satisfying();
    if sat.is_empty() {
        return Err(Error::Predicate("no satisfying assignment".into()));
    }
    let mut lp = LinearProgram::<Q>::new(sat.len());
    lp.add((0..sat.len()).map(|a| (a, Q::one())).collect(), Relation::Eq, Q::one());
    for (i, target) in bias.iter().enumerate() {
        if let Some(target) = target {
            let row = sat.iter().enumerate().map(|(a, &x)| (a, qi(sign(x, i) as i64))).collect();
            lp.add(row, Relation::Eq, target.clone());
        }
    }
    for (&(i, j), target) in corr {
        let row = sat.iter().enumerate().map(|(a, &x)| (a, qi((sign(x, i) * sign(x, j)) as i64))).collect();
        lp.add(row, Relation::Eq, target.clone());
    }
    let sol = lp::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let probs = sat.iter().zip(sol.x).map(|(&x, p)| (x, p)).collect();
    Ok(Some(CubeDistribution::new(f.k(), probs)?))
}

/// A distribution on `f^{-1}(1)` with all biases and pairwise correlations
/// zero, if one exists.
pub fn pairwise_independent_point(f: &Predicate) -> Result<Option<CubeDistribution>> {
    let k = f.k();
    let bias = vec![Some(Q::zero()); k];
    let mut corr = BTreeMap::new();
    for i in 0..k {
        for j in i + 1..k {
            corr.insert((i, j), Q::zero());
        }
    }
    moment_feasibility(f, &bias, &corr)
}

/// Some preimage distribution on `f^{-1}(1)` of `zeta`, i.e. a membership
/// witness for the moment body. Which preimage is returned is unspecified.
pub fn preimage(f: &Predicate, zeta: &MomentMatrix) -> Result<Option<CubeDistribution>> {
    if zeta.k() != f.k() {
        return Err(Error::Dimension("moment matrix arity differs from predicate".into()));
    }
    let k = f.k();
    let bias: Vec<Option<Q>> = (1..=k).map(|i| Some(zeta.get(0, i).clone())).collect();
    let mut corr = BTreeMap::new();
    for i in 0..k {
        for j in i + 1..k {
            corr.insert((i, j), zeta.get(i + 1, j + 1).clone());
        }
    }
    moment_feasibility(f, &bias, &corr)
}

/// Preimage on `f^{-1}(1)` of a bias vector (first moments only).
pub fn bias_preimage(f: &Predicate, z: &BiasVector) -> Result<Option<CubeDistribution>> {
    let bias: Vec<Option<Q>> = z.0.iter().cloned().map(Some).collect();
    moment_feasibility(f, &bias, &BTreeMap::new())
}
