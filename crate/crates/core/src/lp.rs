//! Two-phase tableau simplex with Bland's rule over an exact (`BigRational`)
//! or a float (`f64`, tolerance `1e-9`) backend, plus zero-sum game values.
//!
//! Problems are stated as `maximize c.x` subject to rows `a.x {<=,=,>=} b` and
//! optional per-variable bounds. Certificates are expressed on the user's rows:
//! - optimal: multipliers `y` (`y >= 0` on `<=` rows, `y <= 0` on `>=` rows,
//!   free on `=` rows) with reduced costs `r = c - A^T y` and
//!   `b.y + sum_j (r_j > 0 ? u_j r_j : r_j < 0 ? l_j r_j : 0) = c.x`;
//! - infeasible: multipliers `y` with the same sign pattern such that
//!   `min_{l <= x <= u} (A^T y).x > b.y`.

use std::fmt::{self, Debug, Write as _};

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::rational::{to_f64, Q};
use crate::{Error, Result};

pub const FLOAT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Exact,
    Float,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Exact => write!(f, "exact"),
            Backend::Float => write!(f, "float(tol=1e-9)"),
        }
    }
}

pub trait Scalar: Clone + Debug + PartialEq + Send + Sync + 'static {
    const BACKEND: Backend;
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    /// Strictly less, beyond the backend tolerance.
    fn lt(&self, o: &Self) -> bool {
        o.sub(self).is_pos()
    }
    fn from_q(q: &Q) -> Self;
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for Q {
    const BACKEND: Backend = Backend::Exact;
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_pos(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_neg(&self) -> bool {
        Signed::is_negative(self)
    }
    fn from_q(q: &Q) -> Self {
        q.clone()
    }
    fn from_i64(v: i64) -> Self {
        Q::from_integer(v.into())
    }
    fn to_f64(&self) -> f64 {
        to_f64(self)
    }
}

impl Scalar for f64 {
    const BACKEND: Backend = Backend::Float;
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_zero(&self) -> bool {
        self.abs() <= FLOAT_TOL
    }
    fn is_pos(&self) -> bool {
        *self > FLOAT_TOL
    }
    fn is_neg(&self) -> bool {
        *self < -FLOAT_TOL
    }
    fn from_q(q: &Q) -> Self {
        to_f64(q)
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Constraint<T> {
    /// Sparse `(variable, coefficient)` pairs; repeated variables add up.
    pub coeffs: Vec<(usize, T)>,
    pub relation: Relation,
    pub rhs: T,
}

#[derive(Clone, Debug)]
pub struct LinearProgram<T> {
    pub num_vars: usize,
    /// Maximized.
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
    pub lower: Vec<Option<T>>,
    pub upper: Vec<Option<T>>,
}

impl<T: Scalar> LinearProgram<T> {
    /// `n` variables with bounds `x >= 0` and a zero objective.
    pub fn new(n: usize) -> Self {
        Self {
            num_vars: n,
            objective: vec![T::zero(); n],
            constraints: Vec::new(),
            lower: vec![Some(T::zero()); n],
            upper: vec![None; n],
        }
    }

    pub fn add(&mut self, coeffs: Vec<(usize, T)>, relation: Relation, rhs: T) -> usize {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn add_dense(&mut self, row: &[T], relation: Relation, rhs: T) -> usize {
        let coeffs = row
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(j, v)| (j, v.clone()))
            .collect();
        self.add(coeffs, relation, rhs)
    }

    pub fn set_bounds(&mut self, j: usize, lower: Option<T>, upper: Option<T>) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn set_free(&mut self, j: usize) {
        self.set_bounds(j, None, None);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars;
        if self.objective.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Dimension(format!(
                "objective/bounds lengths {}/{}/{} for {n} variables",
                self.objective.len(),
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if let Some((j, _)) = c.coeffs.iter().find(|(j, _)| *j >= n) {
                return Err(Error::Dimension(format!("row {i} references variable {j} >= {n}")));
            }
        }
        Ok(())
    }

    /// Dense coefficient of variable `j` in row `i`.
    fn row_dense(&self, i: usize) -> Vec<T> {
        let mut row = vec![T::zero(); self.num_vars];
        for (j, v) in &self.constraints[i].coeffs {
            row[*j] = row[*j].add(v);
        }
        row
    }

    /// Plain-text debug dump, one constraint per line.
    pub fn dump(&self) -> String {
        let term = |j: usize, v: &T| format!("{:+} x{j}", v.to_f64());
        let mut out = String::new();
        let obj: Vec<String> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(j, v)| term(j, v))
            .collect();
        let _ = writeln!(out, "max: {}", obj.join(" "));
        for (i, c) in self.constraints.iter().enumerate() {
            let lhs: Vec<String> = c.coeffs.iter().map(|(j, v)| term(*j, v)).collect();
            let _ = writeln!(out, "c{i}: {} {} {}", lhs.join(" "), c.relation, c.rhs.to_f64());
        }
        for j in 0..self.num_vars {
            let lo = self.lower[j].as_ref().map_or("-inf".into(), |v| v.to_f64().to_string());
            let hi = self.upper[j].as_ref().map_or("+inf".into(), |v| v.to_f64().to_string());
            if !(self.lower[j].as_ref().is_some_and(|v| v.is_zero()) && self.upper[j].is_none()) {
                let _ = writeln!(out, "bound: {lo} <= x{j} <= {hi}");
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub backend: Backend,
    /// Primal point (optimal only).
    pub x: Vec<T>,
    pub objective: T,
    /// Row multipliers (optimal only).
    pub duals: Vec<T>,
    /// `c - A^T y` (optimal only).
    pub reduced_costs: Vec<T>,
    /// Row multipliers proving infeasibility.
    pub farkas: Option<Vec<T>>,
    pub pivots: usize,
}

impl<T: Scalar> LpSolution<T> {
    fn empty(status: LpStatus, pivots: usize) -> Self {
        Self {
            status,
            backend: T::BACKEND,
            x: Vec::new(),
            objective: T::zero(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            farkas: None,
            pivots,
        }
    }
}

enum VarMap<T> {
    /// `x = l + x'`.
    Shift(usize, T),
    /// `x = u - x'`.
    Negate(usize, T),
    /// `x = x' - x''`.
    Split(usize, usize),
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    obj: Vec<T>,
    basis: Vec<usize>,
    ncols: usize,
    pivots: usize,
}

impl<T: Scalar> Tableau<T> {
    fn rhs(&self) -> usize {
        self.ncols
    }

    fn pivot(&mut self, r: usize, c: usize) {
        self.pivots += 1;
        let p = self.rows[r][c].clone();
        let inv = T::one().div(&p);
        let nz: Vec<usize> = (0..=self.ncols).filter(|&j| !self.rows[r][j].is_zero()).collect();
        for &j in &nz {
            self.rows[r][j] = self.rows[r][j].mul(&inv);
        }
        if T::BACKEND == Backend::Float {
            self.rows[r][c] = T::one();
        }
        let prow: Vec<(usize, T)> = nz.iter().map(|&j| (j, self.rows[r][j].clone())).collect();
        let eliminate = |row: &mut Vec<T>| {
            let f = row[c].clone();
            if f.is_zero() {
                if T::BACKEND == Backend::Float {
                    row[c] = T::zero();
                }
                return;
            }
            for (j, v) in &prow {
                row[*j] = row[*j].sub(&f.mul(v));
            }
            row[c] = T::zero();
        };
        for i in 0..self.rows.len() {
            if i != r {
                eliminate(&mut self.rows[i]);
            }
        }
        eliminate(&mut self.obj);
        self.basis[r] = c;
    }

    /// Bland's rule iterations for the current objective row. Columns at or
    /// beyond `enter_limit` never enter. Returns false on unboundedness.
    fn run(&mut self, enter_limit: usize) -> bool {
        loop {
            let Some(c) = (0..enter_limit).find(|&j| self.obj[j].is_neg()) else {
                return true;
            };
            let rhs = self.rhs();
            let mut best: Option<(usize, T)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_pos() {
                    continue;
                }
                let ratio = self.rows[i][rhs].div(a);
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio.lt(&br) || (!br.lt(&ratio) && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            match best {
                None => return false,
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }
}

pub fn solve<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>> {
    lp.validate()?;
    let n = lp.num_vars;

    let mut maps = Vec::with_capacity(n);
    let mut ns = 0usize;
    let mut upper_rows: Vec<(usize, T)> = Vec::new();
    for j in 0..n {
        match (&lp.lower[j], &lp.upper[j]) {
            (Some(l), u) => {
                if let Some(u) = u {
                    upper_rows.push((ns, u.sub(l)));
                }
                maps.push(VarMap::Shift(ns, l.clone()));
                ns += 1;
            }
            (None, Some(u)) => {
                maps.push(VarMap::Negate(ns, u.clone()));
                ns += 1;
            }
            (None, None) => {
                maps.push(VarMap::Split(ns, ns + 1));
                ns += 2;
            }
        }
    }

    // Standard-form rows over structural columns.
    let mu = lp.constraints.len();
    let m = mu + upper_rows.len();
    let mut srows: Vec<(Vec<(usize, T)>, Relation, T)> = Vec::with_capacity(m);
    for c in &lp.constraints {
        let mut coeffs: Vec<(usize, T)> = Vec::new();
        let mut rhs = c.rhs.clone();
        for (j, a) in &c.coeffs {
            match &maps[*j] {
                VarMap::Shift(s, l) => {
                    coeffs.push((*s, a.clone()));
                    rhs = rhs.sub(&a.mul(l));
                }
                VarMap::Negate(s, u) => {
                    coeffs.push((*s, a.neg()));
                    rhs = rhs.sub(&a.mul(u));
                }
                VarMap::Split(p, q) => {
                    coeffs.push((*p, a.clone()));
                    coeffs.push((*q, a.neg()));
                }
            }
        }
        srows.push((coeffs, c.relation, rhs));
    }
    for (s, width) in &upper_rows {
        srows.push((vec![(*s, T::one())], Relation::Le, width.clone()));
    }

    let nslack = srows.iter().filter(|r| r.1 != Relation::Eq).count();
    let art0 = ns + nslack;
    let ncols = art0 + m;
    let mut rows = Vec::with_capacity(m);
    let mut flips = Vec::with_capacity(m);
    let mut slack = ns;
    for (i, (coeffs, rel, rhs)) in srows.into_iter().enumerate() {
        let mut row = vec![T::zero(); ncols + 1];
        for (j, a) in coeffs {
            row[j] = row[j].add(&a);
        }
        match rel {
            Relation::Le => {
                row[slack] = T::one();
                slack += 1;
            }
            Relation::Ge => {
                row[slack] = T::one().neg();
                slack += 1;
            }
            Relation::Eq => {}
        }
        row[ncols] = rhs;
        let flip = row[ncols].is_neg();
        if flip {
            for v in row.iter_mut() {
                *v = v.neg();
            }
        }
        row[art0 + i] = T::one();
        flips.push(flip);
        rows.push(row);
    }

    // Phase 1: maximize -sum(artificials).
    let mut obj = vec![T::zero(); ncols + 1];
    for row in &rows {
        for j in 0..=ncols {
            if j < art0 || j == ncols {
                obj[j] = obj[j].sub(&row[j]);
            }
        }
    }
    let mut tab = Tableau { rows, obj, basis: (art0..art0 + m).collect(), ncols, pivots: 0 };
    tab.run(ncols);

    let phase1_value = tab.obj[ncols].clone();
    if phase1_value.is_neg() {
        // y_i = (z - c)_art_i + c_art_i with c_art = -1.
        let y: Vec<T> = (0..mu)
            .map(|i| {
                let yi = tab.obj[art0 + i].sub(&T::one());
                if flips[i] {
                    yi.neg()
                } else {
                    yi
                }
            })
            .collect();
        let mut sol = LpSolution::empty(LpStatus::Infeasible, tab.pivots);
        sol.farkas = Some(y);
        return Ok(sol);
    }

    // Drive artificials out of the basis where possible.
    for r in 0..m {
        if tab.basis[r] >= art0 {
            if let Some(c) = (0..art0).find(|&j| !tab.rows[r][j].is_zero()) {
                tab.pivot(r, c);
            }
        }
    }

    // Phase 2 objective row z_j - c_j.
    let mut cstd = vec![T::zero(); ncols];
    for (j, map) in maps.iter().enumerate() {
        let c = &lp.objective[j];
        match map {
            VarMap::Shift(s, _) => cstd[*s] = c.clone(),
            VarMap::Negate(s, _) => cstd[*s] = c.neg(),
            VarMap::Split(p, q) => {
                cstd[*p] = c.clone();
                cstd[*q] = c.neg();
            }
        }
    }
    let mut obj = vec![T::zero(); ncols + 1];
    for j in 0..ncols {
        obj[j] = cstd[j].neg();
    }
    for r in 0..m {
        let cb = &cstd[tab.basis[r]];
        if cb.is_zero() {
            continue;
        }
        for j in 0..=ncols {
            if !tab.rows[r][j].is_zero() {
                obj[j] = obj[j].add(&cb.mul(&tab.rows[r][j]));
            }
        }
    }
    tab.obj = obj;
    if !tab.run(art0) {
        return Ok(LpSolution::empty(LpStatus::Unbounded, tab.pivots));
    }

    let mut xs = vec![T::zero(); ncols];
    for r in 0..m {
        xs[tab.basis[r]] = tab.rows[r][ncols].clone();
    }
    let x: Vec<T> = maps
        .iter()
        .map(|map| match map {
            VarMap::Shift(s, l) => l.add(&xs[*s]),
            VarMap::Negate(s, u) => u.sub(&xs[*s]),
            VarMap::Split(p, q) => xs[*p].sub(&xs[*q]),
        })
        .collect();
    let duals: Vec<T> = (0..mu)
        .map(|i| {
            let yi = tab.obj[art0 + i].clone();
            if flips[i] {
                yi.neg()
            } else {
                yi
            }
        })
        .collect();
    let reduced_costs = reduced_costs(lp, &duals);
    let objective = dot(&lp.objective, &x);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        backend: T::BACKEND,
        x,
        objective,
        duals,
        reduced_costs,
        farkas: None,
        pivots: tab.pivots,
    })
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (u, v)| acc.add(&u.mul(v)))
}

/// `A^T y` over user rows.
pub fn transpose_mul<T: Scalar>(lp: &LinearProgram<T>, y: &[T]) -> Vec<T> {
    let mut g = vec![T::zero(); lp.num_vars];
    for (c, yi) in lp.constraints.iter().zip(y) {
        if yi.is_zero() {
            continue;
        }
        for (j, a) in &c.coeffs {
            g[*j] = g[*j].add(&a.mul(yi));
        }
    }
    g
}

pub fn reduced_costs<T: Scalar>(lp: &LinearProgram<T>, y: &[T]) -> Vec<T> {
    let g = transpose_mul(lp, y);
    lp.objective.iter().zip(g).map(|(c, a)| c.sub(&a)).collect()
}

fn multiplier_signs_ok<T: Scalar>(lp: &LinearProgram<T>, y: &[T]) -> std::result::Result<(), String> {
    if y.len() != lp.constraints.len() {
        return Err(format!("{} multipliers for {} rows", y.len(), lp.constraints.len()));
    }
    for (i, (c, yi)) in lp.constraints.iter().zip(y).enumerate() {
        let bad = match c.relation {
            Relation::Le => yi.is_neg(),
            Relation::Ge => yi.is_pos(),
            Relation::Eq => false,
        };
        if bad {
            return Err(format!("row {i} multiplier {:?} has the wrong sign", yi));
        }
    }
    Ok(())
}

/// Dual objective `b.y + sum_j bound terms`; `None` when a reduced cost pushes
/// against a missing bound (dual infeasible).
pub fn dual_objective<T: Scalar>(lp: &LinearProgram<T>, y: &[T]) -> Option<T> {
    let r = reduced_costs(lp, y);
    let mut v = lp.constraints.iter().zip(y).fold(T::zero(), |acc, (c, yi)| acc.add(&c.rhs.mul(yi)));
    for j in 0..lp.num_vars {
        if r[j].is_pos() {
            v = v.add(&lp.upper[j].as_ref()?.mul(&r[j]));
        } else if r[j].is_neg() {
            v = v.add(&lp.lower[j].as_ref()?.mul(&r[j]));
        }
    }
    Some(v)
}

pub fn primal_feasible<T: Scalar>(lp: &LinearProgram<T>, x: &[T]) -> std::result::Result<(), String> {
    if x.len() != lp.num_vars {
        return Err("primal length mismatch".into());
    }
    for j in 0..lp.num_vars {
        if let Some(l) = &lp.lower[j] {
            if x[j].lt(l) {
                return Err(format!("x{j} below lower bound"));
            }
        }
        if let Some(u) = &lp.upper[j] {
            if u.lt(&x[j]) {
                return Err(format!("x{j} above upper bound"));
            }
        }
    }
    for i in 0..lp.constraints.len() {
        let lhs = dot(&lp.row_dense(i), x);
        let c = &lp.constraints[i];
        let ok = match c.relation {
            Relation::Le => !c.rhs.lt(&lhs),
            Relation::Ge => !lhs.lt(&c.rhs),
            Relation::Eq => lhs.sub(&c.rhs).is_zero(),
        };
        if !ok {
            return Err(format!("row {i} violated"));
        }
    }
    Ok(())
}

/// Checks primal feasibility, dual feasibility and equal objectives.
pub fn verify_optimal<T: Scalar>(lp: &LinearProgram<T>, sol: &LpSolution<T>) -> std::result::Result<(), String> {
    if sol.status != LpStatus::Optimal {
        return Err("not optimal".into());
    }
    primal_feasible(lp, &sol.x)?;
    multiplier_signs_ok(lp, &sol.duals)?;
    let d = dual_objective(lp, &sol.duals).ok_or("dual infeasible: reduced cost against missing bound")?;
    let p = dot(&lp.objective, &sol.x);
    if !d.sub(&p).is_zero() {
        return Err(format!("duality gap: primal {:?} dual {:?}", p, d));
    }
    Ok(())
}

/// Checks that `y` proves the row system infeasible within the bounds.
pub fn verify_farkas<T: Scalar>(lp: &LinearProgram<T>, y: &[T]) -> std::result::Result<(), String> {
    multiplier_signs_ok(lp, y)?;
    let g = transpose_mul(lp, y);
    let mut min = T::zero();
    for j in 0..lp.num_vars {
        if g[j].is_pos() {
            min = min.add(&g[j].mul(lp.lower[j].as_ref().ok_or(format!("x{j} unbounded below"))?));
        } else if g[j].is_neg() {
            min = min.add(&g[j].mul(lp.upper[j].as_ref().ok_or(format!("x{j} unbounded above"))?));
        }
    }
    let by = lp.constraints.iter().zip(y).fold(T::zero(), |acc, (c, yi)| acc.add(&c.rhs.mul(yi)));
    if by.lt(&min) {
        Ok(())
    } else {
        Err(format!("aggregate row is satisfiable: min {:?} <= {:?}", min, by))
    }
}

/// Payoff matrix; the row player minimizes, the column player maximizes.
#[derive(Clone, Debug, PartialEq)]
pub struct GameMatrix<T> {
    pub entries: Vec<Vec<T>>,
}

#[derive(Clone, Debug)]
pub struct GameSolution<T> {
    pub value: T,
    pub row_strategy: Vec<T>,
    pub col_strategy: Vec<T>,
    pub backend: Backend,
}

impl<T: Scalar> GameMatrix<T> {
    pub fn new(entries: Vec<Vec<T>>) -> Result<Self> {
        let g = Self { entries };
        g.shape()?;
        Ok(g)
    }

    pub fn shape(&self) -> Result<(usize, usize)> {
        let m = self.entries.len();
        let n = self.entries.first().map_or(0, |r| r.len());
        if m == 0 || n == 0 {
            return Err(Error::Invalid("empty game matrix".into()));
        }
        if self.entries.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged game matrix".into()));
        }
        Ok((m, n))
    }

    pub fn negated_transpose(&self) -> Self {
        let (m, n) = self.shape().expect("validated");
        Self { entries: (0..n).map(|j| (0..m).map(|i| self.entries[i][j].neg()).collect()).collect() }
    }

    /// Worst row response to `q`: `min_i (A q)_i`.
    pub fn col_guarantee(&self, q: &[T]) -> T {
        self.entries
            .iter()
            .map(|row| dot(row, q))
            .reduce(|a, b| if b.lt(&a) { b } else { a })
            .expect("nonempty")
    }

    /// Best column response to `p`: `max_j (p^T A)_j`.
    pub fn row_guarantee(&self, p: &[T]) -> T {
        let n = self.entries[0].len();
        (0..n)
            .map(|j| self.entries.iter().zip(p).fold(T::zero(), |acc, (row, pi)| acc.add(&row[j].mul(pi))))
            .reduce(|a, b| if a.lt(&b) { b } else { a })
            .expect("nonempty")
    }
}

/// Minimax value via `max v s.t. v <= (A q)_i, sum q = 1, q >= 0`; the row
/// player's strategy is read from the row multipliers.
pub fn game_value<T: Scalar>(g: &GameMatrix<T>) -> Result<GameSolution<T>> {
    let (m, n) = g.shape()?;
    let mut lp = LinearProgram::<T>::new(n + 1);
    lp.set_free(n);
    lp.objective[n] = T::one();
    for row in &g.entries {
        let mut coeffs: Vec<(usize, T)> =
            row.iter().enumerate().filter(|(_, a)| !a.is_zero()).map(|(j, a)| (j, a.neg())).collect();
        coeffs.push((n, T::one()));
        lp.add(coeffs, Relation::Le, T::zero());
    }
    lp.add((0..n).map(|j| (j, T::one())).collect(), Relation::Eq, T::one());
    let sol = solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(format!("game LP ended {:?}", sol.status)));
    }
    Ok(GameSolution {
        value: sol.x[n].clone(),
        row_strategy: sol.duals[..m].to_vec(),
        col_strategy: sol.x[..n].to_vec(),
        backend: T::BACKEND,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    #[test]
    fn bounded_maximum() {
        let mut lp = LinearProgram::<Q>::new(1);
        lp.objective[0] = qi(1);
        lp.add(vec![(0, qi(1))], Relation::Le, qi(3));
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.x, vec![qi(3)]);
        assert_eq!(s.duals, vec![qi(1)]);
        verify_optimal(&lp, &s).unwrap();
    }

    #[test]
    fn contradictory_bounds_give_certificate() {
        let mut lp = LinearProgram::<Q>::new(1);
        lp.add(vec![(0, qi(1))], Relation::Ge, qi(1));
        lp.add(vec![(0, qi(1))], Relation::Le, qi(0));
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        verify_farkas(&lp, s.farkas.as_ref().unwrap()).unwrap();
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::<Q>::new(2);
        lp.objective[0] = qi(1);
        lp.add(vec![(0, qi(1)), (1, qi(-1))], Relation::Le, qi(1));
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_upper_only_variables() {
        // max -|x - 1/3| style: max y s.t. y <= x - 1/3, y <= 1/3 - x, x free, y <= 5.
        let mut lp = LinearProgram::<Q>::new(2);
        lp.set_free(0);
        lp.set_bounds(1, None, Some(qi(5)));
        lp.objective[1] = qi(1);
        lp.add(vec![(1, qi(1)), (0, qi(-1))], Relation::Le, q(-1, 3));
        lp.add(vec![(1, qi(1)), (0, qi(1))], Relation::Le, q(1, 3));
        let s = solve(&lp).unwrap();
        assert_eq!(s.objective, qi(0));
        assert_eq!(s.x[0], q(1, 3));
        verify_optimal(&lp, &s).unwrap();
    }

    #[test]
    fn boxed_variables_use_bound_duals() {
        let mut lp = LinearProgram::<Q>::new(2);
        lp.objective = vec![qi(2), qi(1)];
        lp.set_bounds(0, Some(qi(-1)), Some(qi(1)));
        lp.set_bounds(1, Some(q(1, 2)), Some(qi(4)));
        lp.add(vec![(0, qi(1)), (1, qi(1))], Relation::Le, qi(3));
        let s = solve(&lp).unwrap();
        assert_eq!(s.objective, qi(4));
        verify_optimal(&lp, &s).unwrap();
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::<Q>::new(2);
        lp.objective = vec![qi(1), qi(0)];
        lp.add(vec![(0, qi(1)), (1, qi(1))], Relation::Eq, qi(1));
        lp.add(vec![(0, qi(2)), (1, qi(2))], Relation::Eq, qi(2));
        let s = solve(&lp).unwrap();
        assert_eq!(s.objective, qi(1));
        verify_optimal(&lp, &s).unwrap();
    }

    #[test]
    fn matching_pennies_and_rps() {
        let mp = GameMatrix::new(vec![vec![qi(1), qi(-1)], vec![qi(-1), qi(1)]]).unwrap();
        let s = game_value(&mp).unwrap();
        assert_eq!(s.value, qi(0));
        assert_eq!(s.col_strategy, vec![q(1, 2), q(1, 2)]);
        assert_eq!(s.row_strategy, vec![q(1, 2), q(1, 2)]);

        let rps = GameMatrix::new(vec![
            vec![qi(0), qi(-1), qi(1)],
            vec![qi(1), qi(0), qi(-1)],
            vec![qi(-1), qi(1), qi(0)],
        ])
        .unwrap();
        let s = game_value(&rps).unwrap();
        assert_eq!(s.value, qi(0));
        assert_eq!(s.col_strategy, vec![q(1, 3); 3]);
        assert_eq!(s.row_strategy, vec![q(1, 3); 3]);

        let z = GameMatrix::new(vec![vec![qi(0)]]).unwrap();
        assert_eq!(game_value(&z).unwrap().value, qi(0));
        assert!(GameMatrix::<Q>::new(vec![]).is_err());
    }

    #[test]
    fn float_backend_is_recorded() {
        let g = GameMatrix::new(vec![vec![3.0, -1.0], vec![-2.0, 4.0]]).unwrap();
        let s = game_value(&g).unwrap();
        assert_eq!(s.backend, Backend::Float);
        assert!((s.value - 1.0).abs() < 1e-9);
        assert!((g.col_guarantee(&s.col_strategy) - s.value).abs() < 1e-9);
        assert!((g.row_guarantee(&s.row_strategy) - s.value).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut lp = LinearProgram::<Q>::new(1);
        lp.add(vec![(3, qi(1))], Relation::Le, qi(1));
        assert!(matches!(solve(&lp), Err(Error::Dimension(_))));
    }

    #[test]
    fn dump_lists_rows() {
        let mut lp = LinearProgram::<Q>::new(2);
        lp.objective[0] = qi(1);
        lp.add(vec![(0, qi(1)), (1, qi(2))], Relation::Le, qi(3));
        let d = lp.dump();
        assert!(d.contains("max: +1 x0"));
        assert!(d.contains("c0: +1 x0 +2 x1 <= 3"));
    }
}
