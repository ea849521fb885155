//! The discretized game `G_{p,q}`: Dev picks a moment matrix in `C_delta(f)`,
//! Ang picks an odd cell-constant `psi`, and the payoff is the rounding
//! advantage `E[sum_{S != 0} fhat(S) prod_{i in S} psi(y_i)]` over
//! `y ~ N_d(zeta)`.
//!
//! All entries of a payoff matrix share one stream of standard normals
//! (common random numbers): sample `s` uses the same `z` for every dev point
//! and every `psi`, so nested families give nested matrices.

use std::collections::BTreeSet;

use num_traits::ToPrimitive;
use rand::Rng as _;
use rand::seq::SliceRandom;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::combin::coords;
use crate::gaussian::{CellId, GaussianProcessSpec, Grid, PartitionedFunction};
use crate::lp::{game_value, Backend, GameMatrix};
use crate::moments::{covariance_of, moments_of, noise_shift, noise_unshift, preimage, CubeDistribution, MomentMatrix};
use crate::predicate::Predicate;
use crate::rational::{q, to_f64, Q};
use crate::rng::stream;
use crate::{Error, Result};

pub const DEFAULT_SAMPLES: usize = 100_000;
const CHUNK: usize = 4096;
const OUTSIDE: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct GameConfig {
    pub f: Predicate,
    pub delta: Q,
    pub d: usize,
    pub q: u32,
    /// Points of `R_p`, already noise-shifted into `C_delta(f)`.
    pub dev_points: Vec<MomentMatrix>,
    pub samples: usize,
    pub seed: u64,
    /// Zero terms whose points share a cell up to negation (`pay`); off gives `opay`.
    pub guard: bool,
}

impl GameConfig {
    pub fn new(f: Predicate, dev_points: Vec<MomentMatrix>, q: u32, seed: u64) -> Self {
        let d = f.k() + 1;
        Self { f, delta: crate::rational::q(1, 4), d, q, dev_points, samples: DEFAULT_SAMPLES, seed, guard: true }
    }

    /// Each dev point must have covariance eigenvalues at least `delta` and
    /// un-shift to the moments of a distribution on `f^{-1}(1)`.
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Invalid("samples must be positive".into()));
        }
        if self.dev_points.is_empty() {
            return Err(Error::Invalid("no dev points".into()));
        }
        Grid::new(self.q, self.d)?;
        let floor = to_f64(&self.delta) - 1e-9;
        for (i, z) in self.dev_points.iter().enumerate() {
            if z.k() != self.f.k() {
                return Err(Error::Dimension(format!("dev point {i} has arity {}", z.k())));
            }
            let ev = covariance_of(z).min_eigenvalue;
            if ev < floor {
                return Err(Error::Invalid(format!("dev point {i}: covariance eigenvalue {ev} below delta")));
            }
            if preimage(&self.f, &noise_unshift(z, &self.delta)?)?.is_none() {
                return Err(Error::Invalid(format!("dev point {i} is not in the shifted moment body")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PayoffEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// The shared normals: sample `s` lives in chunk `s / CHUNK`, drawn from its
/// own stream so the values do not depend on the worker count.
fn common_normals(seed: u64, samples: usize, width: usize) -> Vec<f64> {
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK.min(samples - c * CHUNK);
            let mut rng = stream(seed, c as u64);
            (0..n * width).map(|_| rng.sample(StandardNormal)).collect()
        })
        .collect();
    parts.concat()
}

/// Per-sample cells of the `k` points and their pairwise cell conflicts.
struct DevSamples {
    k: usize,
    cells: Vec<u32>,
    conflict: Vec<u8>,
}

impl DevSamples {
    fn build(zeta: &MomentMatrix, grid: Grid, z: &[f64], samples: usize) -> Result<Self> {
        Ok(Self::from_spec(&GaussianProcessSpec::from_moments(zeta, grid.d)?, grid, z, samples))
    }

    fn from_spec(spec: &GaussianProcessSpec, grid: Grid, z: &[f64], samples: usize) -> Self {
        let k = spec.t();
        let width = k * grid.d;
        let mut cells = Vec::with_capacity(samples * k);
        let mut conflict = Vec::with_capacity(samples * k);
        for s in 0..samples {
            let pts = spec.transform(&z[s * width..(s + 1) * width]);
            let row: Vec<Option<CellId>> = pts.iter().map(|p| grid.cell_index(p)).collect();
            for i in 0..k {
                let mut m = 0u8;
                if let Some(ci) = row[i] {
                    for (j, cj) in row.iter().enumerate() {
                        if j != i && matches!(cj, Some(cj) if *cj == ci || *cj == grid.mirror(ci)) {
                            m |= 1 << j;
                        }
                    }
                }
                cells.push(row[i].map_or(OUTSIDE, |c| c as u32));
                conflict.push(m);
            }
        }
        Self { k, cells, conflict }
    }

    fn samples(&self) -> usize {
        self.cells.len() / self.k.max(1)
    }
}

/// `psi` as a dense table over all cells.
fn dense_psi(psi: &PartitionedFunction) -> Vec<i8> {
    let g = psi.grid();
    (0..g.num_cells()).map(|c| psi.value_on_cell(c)).collect()
}

struct Terms {
    subsets: Vec<(u8, f64)>,
}

impl Terms {
    fn of(f: &Predicate) -> Self {
        let spec = f.fourier();
        Self { subsets: spec.nonconstant_support().into_iter().map(|s| (s as u8, to_f64(spec.get(s)))).collect() }
    }
}

fn evaluate(ds: &DevSamples, psi: &[i8], terms: &Terms, guard: bool) -> PayoffEstimate {
    let n = ds.samples();
    let k = ds.k;
    let (mut sum, mut sq) = (0.0, 0.0);
    let mut v = [0i8; 8];
    for s in 0..n {
        let base = s * k;
        for i in 0..k {
            let c = ds.cells[base + i];
            v[i] = if c == OUTSIDE { 0 } else { psi[c as usize] };
        }
        let mut x = 0.0;
        'terms: for &(mask, coef) in &terms.subsets {
            let mut prod = 1i8;
            for i in coords(mask as u32) {
                prod *= v[i];
                if prod == 0 || (guard && ds.conflict[base + i] & mask != 0) {
                    continue 'terms;
                }
            }
            x += coef * prod as f64;
        }
        sum += x;
        sq += x * x;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    PayoffEstimate { mean, std_error: (var / nf).sqrt(), samples: n }
}

/// Monte-Carlo `pay(zeta, psi)` (guard on) or `opay(zeta, psi)` (guard off).
pub fn payoff_estimate(zeta: &MomentMatrix, psi: &PartitionedFunction, cfg: &GameConfig, guard: bool) -> Result<PayoffEstimate> {
    let grid = psi.grid();
    if grid.d != cfg.d {
        return Err(Error::Dimension(format!("psi has d={} but config has d={}", grid.d, cfg.d)));
    }
    if psi.is_zero() {
        return Ok(PayoffEstimate { mean: 0.0, std_error: 0.0, samples: cfg.samples });
    }
    let z = common_normals(cfg.seed, cfg.samples, zeta.k() * cfg.d);
    let ds = DevSamples::build(zeta, grid, &z, cfg.samples)?;
    Ok(evaluate(&ds, &dense_psi(psi), &Terms::of(&cfg.f), guard))
}

/// Guard-off payoff `E[sum_{S != 0} f^(S) prod_{i in S} psi(y_i)]` for `y`
/// drawn from an arbitrary Gaussian process (mean and covariance need not
/// come from a moment matrix).
pub fn opay_with_spec(f: &Predicate, spec: &GaussianProcessSpec, psi: &PartitionedFunction, samples: usize, seed: u64) -> Result<PayoffEstimate> {
    let grid = psi.grid();
    if grid.d != spec.d || spec.t() != f.k() {
        return Err(Error::Dimension("process shape differs from predicate arity or psi dimension".into()));
    }
    if psi.is_zero() {
        return Ok(PayoffEstimate { mean: 0.0, std_error: 0.0, samples });
    }
    let z = common_normals(seed, samples, spec.t() * spec.d);
    let ds = DevSamples::from_spec(spec, grid, &z, samples);
    Ok(evaluate(&ds, &dense_psi(psi), &Terms::of(f), false))
}

/// Estimated payoff matrix: rows are dev points, columns are `psis`.
#[derive(Clone, Debug)]
pub struct PayoffMatrix {
    pub entries: Vec<Vec<PayoffEstimate>>,
}

impl PayoffMatrix {
    pub fn means(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|r| r.iter().map(|e| e.mean).collect()).collect()
    }

    pub fn max_std_error(&self) -> f64 {
        self.entries.iter().flatten().map(|e| e.std_error).fold(0.0, f64::max)
    }
}

struct Sampler {
    devs: Vec<DevSamples>,
    terms: Terms,
    guard: bool,
}

impl Sampler {
    fn new(cfg: &GameConfig) -> Result<Self> {
        let grid = Grid::new(cfg.q, cfg.d)?;
        let z = common_normals(cfg.seed, cfg.samples, cfg.f.k() * cfg.d);
        let devs = cfg
            .dev_points
            .par_iter()
            .map(|zeta| DevSamples::build(zeta, grid, &z, cfg.samples))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { devs, terms: Terms::of(&cfg.f), guard: cfg.guard })
    }

    fn column(&self, psi: &[i8]) -> Vec<PayoffEstimate> {
        self.devs.par_iter().map(|ds| evaluate(ds, psi, &self.terms, self.guard)).collect()
    }

    fn matrix(&self, psis: &[Vec<i8>]) -> PayoffMatrix {
        let cols: Vec<Vec<PayoffEstimate>> = psis.par_iter().map(|p| self.column(p)).collect();
        let entries = (0..self.devs.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        PayoffMatrix { entries }
    }
}

pub fn payoff_matrix(cfg: &GameConfig, psis: &[PartitionedFunction]) -> Result<PayoffMatrix> {
    for p in psis {
        if p.grid() != Grid::new(cfg.q, cfg.d)? {
            return Err(Error::Dimension("psi grid differs from config".into()));
        }
    }
    let dense: Vec<Vec<i8>> = psis.iter().map(dense_psi).collect();
    Ok(Sampler::new(cfg)?.matrix(&dense))
}

#[derive(Clone, Debug, Serialize)]
pub struct GameReport {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub max_std_error: f64,
    /// Dev mixed strategy over dev points.
    pub dev_strategy: Vec<f64>,
    /// Ang mixed strategy, as `(weight, psi json)` for the support.
    pub psi_strategy: Vec<(f64, String)>,
    pub columns: usize,
    pub exact: bool,
    pub backend: Backend,
    pub samples: usize,
    pub seed: u64,
}

impl GameReport {
    pub fn psi_distribution(&self) -> Result<Vec<(f64, PartitionedFunction)>> {
        self.psi_strategy.iter().map(|(w, s)| Ok((*w, PartitionedFunction::parse(s)?))).collect()
    }
}

fn report(cfg: &GameConfig, grid: Grid, psis: &[Vec<i8>], m: &PayoffMatrix, exact: bool) -> Result<GameReport> {
    let sol = game_value(&GameMatrix::new(m.means())?)?;
    let se = m.max_std_error();
    let cells = grid.canonical_cells();
    let psi_strategy = sol
        .col_strategy
        .iter()
        .zip(psis)
        .filter(|(w, _)| **w > 1e-12)
        .map(|(w, p)| {
            let mut psi = PartitionedFunction::zero(grid.q, grid.d)?;
            for &c in &cells {
                psi.set(c, p[c as usize])?;
            }
            Ok((*w, psi.to_json()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GameReport {
        value: sol.value,
        ci_low: sol.value - 3.0 * se,
        ci_high: sol.value + 3.0 * se,
        max_std_error: se,
        dev_strategy: sol.row_strategy,
        psi_strategy,
        columns: psis.len(),
        exact,
        backend: sol.backend,
        samples: cfg.samples,
        seed: cfg.seed,
    })
}

/// Number of pure Ang strategies, `3^(canonical cells)`, if it fits in `u128`.
pub fn strategy_count(grid: Grid) -> Option<u128> {
    let c = u32::try_from(grid.num_cells() / 2).ok()?;
    3u128.checked_pow(c)
}

fn all_psis(grid: Grid, budget: u128) -> Result<Vec<Vec<i8>>> {
    let count = strategy_count(grid).unwrap_or(u128::MAX);
    if count > budget {
        return Err(Error::Budget { required: count, budget });
    }
    let cells = grid.canonical_cells();
    Ok((0..count).map(|code| dense_psi(&PartitionedFunction::from_code(grid, &cells, code))).collect())
}

/// Exact enumeration of Ang's pure strategies followed by the minimax LP.
pub fn game_value_pq(cfg: &GameConfig, budget: u128) -> Result<GameReport> {
    cfg.validate()?;
    let grid = Grid::new(cfg.q, cfg.d)?;
    let psis = all_psis(grid, budget)?;
    let m = Sampler::new(cfg)?.matrix(&psis);
    report(cfg, grid, &psis, &m, true)
}

/// Random `psi` population refined by best responses to Dev's current mixed
/// strategy. The result is a lower bound on the value of the full matrix game
/// (up to sampling error).
pub fn game_value_heuristic(cfg: &GameConfig, population: usize, rounds: usize) -> Result<GameReport> {
    cfg.validate()?;
    let grid = Grid::new(cfg.q, cfg.d)?;
    let cells = grid.canonical_cells();
    let sampler = Sampler::new(cfg)?;
    let mut rng = stream(cfg.seed, u64::MAX);
    let to_dense = |vals: &[i8]| {
        let mut psi = vec![0i8; grid.num_cells() as usize];
        for (&c, &v) in cells.iter().zip(vals) {
            psi[c as usize] = v;
            psi[grid.mirror(c) as usize] = -v;
        }
        psi
    };
    let mut seen: BTreeSet<Vec<i8>> = BTreeSet::new();
    let mut psis = vec![vec![0i8; grid.num_cells() as usize]];
    seen.insert(psis[0].clone());
    for _ in 0..population {
        let vals: Vec<i8> = (0..cells.len()).map(|_| rng.random_range(-1..=1)).collect();
        let p = to_dense(&vals);
        if seen.insert(p.clone()) {
            psis.push(p);
        }
    }
    let mut m = sampler.matrix(&psis);
    for _ in 0..rounds {
        let sol = game_value(&GameMatrix::new(m.means())?)?;
        let score = |vals: &[i8]| -> f64 {
            let col = sampler.column(&to_dense(vals));
            col.iter().zip(&sol.row_strategy).map(|(e, w)| e.mean * w).sum()
        };
        let mut vals: Vec<i8> = cells.iter().map(|_| 0).collect();
        let mut best = score(&vals);
        let mut order: Vec<usize> = (0..cells.len()).collect();
        let mut improved = true;
        while improved {
            improved = false;
            order.shuffle(&mut rng);
            for &i in &order {
                let old = vals[i];
                for v in [-1, 0, 1] {
                    if v == old {
                        continue;
                    }
                    vals[i] = v;
                    let s = score(&vals);
                    if s > best + 1e-12 {
                        best = s;
                        improved = true;
                    } else {
                        vals[i] = old;
                    }
                    if vals[i] != old {
                        break;
                    }
                }
            }
        }
        let p = to_dense(&vals);
        if best <= sol.value + 1e-12 || !seen.insert(p.clone()) {
            break;
        }
        let col = sampler.column(&p);
        for (row, e) in m.entries.iter_mut().zip(col) {
            row.push(e);
        }
        psis.push(p);
    }
    report(cfg, grid, &psis, &m, false)
}

/// Distributions on `f^{-1}(1)` whose weights are multiples of `2^-p`.
pub fn dyadic_distributions(f: &Predicate, p: u32) -> Vec<CubeDistribution> {
    let sat = f.satisfying();
    let total = 1u64 << p;
    let mut out = Vec::new();
    let mut parts = vec![0u64; sat.len()];
    fn rec(i: usize, left: u64, parts: &mut Vec<u64>, sat: &[usize], k: usize, total: u64, out: &mut Vec<CubeDistribution>) {
        if i + 1 == parts.len() {
            parts[i] = left;
            let probs = sat
                .iter()
                .zip(parts.iter())
                .filter(|(_, &c)| c > 0)
                .map(|(&x, &c)| (x, q(c as i64, total as i64)))
                .collect();
            out.push(CubeDistribution::new(k, probs).expect("dyadic weights sum to one"));
            return;
        }
        for c in (0..=left).rev() {
            parts[i] = c;
            rec(i + 1, left - c, parts, sat, k, total, out);
        }
    }
    if !sat.is_empty() {
        rec(0, total, &mut parts, &sat, f.k(), total, &mut out);
    }
    out
}

/// Nested dev sets `R_0 ⊆ R_1 ⊆ ... ⊆ R_p`: noise-shifted moments of dyadic
/// distributions, deduplicated, with earlier levels first.
pub fn default_dev_sequence(f: &Predicate, delta: &Q, p: u32) -> Result<Vec<Vec<MomentMatrix>>> {
    let mut seen = BTreeSet::new();
    let mut acc = Vec::new();
    let mut levels = Vec::new();
    for level in 0..=p {
        for nu in dyadic_distributions(f, level) {
            let z = noise_shift(&moments_of(&nu), delta)?;
            if seen.insert(z.clone()) {
                acc.push(z);
            }
        }
        levels.push(acc.clone());
    }
    Ok(levels)
}

#[derive(Clone, Debug, Serialize)]
pub struct GridCell {
    pub p: usize,
    pub q: u32,
    pub report: GameReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub cells: Vec<GridCell>,
    /// `(p, q)` pairs where adding dev points raised the value beyond the CI.
    pub p_violations: Vec<(usize, u32)>,
    /// `(p, q)` pairs where refining the partition lowered the value beyond the CI.
    pub q_violations: Vec<(usize, u32)>,
}

impl ScanReport {
    pub fn value(&self, p: usize, q: u32) -> Option<&GameReport> {
        self.cells.iter().find(|c| c.p == p && c.q == q).map(|c| &c.report)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("p\tq\tvalue\tci_low\tci_high\texact_flag\n");
        for c in &self.cells {
            let r = &c.report;
            s.push_str(&format!("{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\n", c.p, c.q, r.value, r.ci_low, r.ci_high, r.exact));
        }
        s
    }
}

/// `V(p, q)` over nested dev sets (`dev_sets[p]`) and increasing `qs`, using
/// `base` for everything else. Enumeration is exact where the budget allows.
pub fn scan_limits(base: &GameConfig, dev_sets: &[Vec<MomentMatrix>], qs: &[u32], budget: u128) -> Result<ScanReport> {
    if dev_sets.is_empty() || qs.is_empty() {
        return Err(Error::Invalid("empty scan grid".into()));
    }
    for w in dev_sets.windows(2) {
        if w[0].len() > w[1].len() || w[0].iter().zip(&w[1]).any(|(a, b)| a != b) {
            return Err(Error::Invalid("dev sets are not nested prefixes".into()));
        }
    }
    if qs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("partition levels must increase".into()));
    }
    let mut cells = Vec::new();
    for (p, devs) in dev_sets.iter().enumerate() {
        for &q in qs {
            let cfg = GameConfig { dev_points: devs.clone(), q, ..base.clone() };
            let grid = Grid::new(q, cfg.d)?;
            let exact = strategy_count(grid).is_some_and(|c| c <= budget);
            let report = if exact { game_value_pq(&cfg, budget)? } else { game_value_heuristic(&cfg, 64, 32)? };
            cells.push(GridCell { p, q, report });
        }
    }
    let find = |p: usize, q: u32| cells.iter().find(|c| c.p == p && c.q == q).map(|c| &c.report).unwrap();
    let slack = |a: &GameReport, b: &GameReport| 3.0 * (a.max_std_error + b.max_std_error);
    let mut p_violations = Vec::new();
    let mut q_violations = Vec::new();
    for p in 0..dev_sets.len() {
        for (qi, &q) in qs.iter().enumerate() {
            let here = find(p, q);
            if p + 1 < dev_sets.len() {
                let next = find(p + 1, q);
                if next.value > here.value + slack(here, next) {
                    p_violations.push((p, q));
                }
            }
            if qi + 1 < qs.len() {
                let next = find(p, qs[qi + 1]);
                if next.value < here.value - slack(here, next) {
                    q_violations.push((p, q));
                }
            }
        }
    }
    Ok(ScanReport { cells, p_violations, q_violations })
}

/// Noise-shifted uniform distribution on `support`, a convenient dev point.
pub fn shifted_uniform(f: &Predicate, support: &[usize], delta: &Q) -> Result<MomentMatrix> {
    noise_shift(&moments_of(&CubeDistribution::uniform_on(f.k(), support)?), delta)
}

/// Largest integer `<= x` as `u128`, saturating; used for budget parsing.
pub fn budget_from_f64(x: f64) -> u128 {
    x.max(0.0).floor().to_u128().unwrap_or(u128::MAX)
}
