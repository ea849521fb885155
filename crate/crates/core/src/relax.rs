//! CSP instances, the Sherali-Adams LP, local distribution families and
//! candidate basic-relaxation solutions.
//!
//! Constraint `C = (vars, signs)` is satisfied by `x` iff
//! `f(x[vars[0]] * signs[0], ..., x[vars[k-1]] * signs[k-1]) = 1`. Variables may
//! repeat inside a constraint. Assignments over a variable set `S` (sorted)
//! use the global index convention with bit `p` for `S[p]`.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lp::{self, LinearProgram, LpStatus, Relation};
use crate::moments::CubeDistribution;
use crate::predicate::{assignment_string, parse_assignment, Predicate};
use crate::rational::{binom, fmt_q, parse_q, q, to_f64, Q};
use crate::rng::stream;
use crate::{Error, Result};

pub const MAX_BRUTE_FORCE_VARS: usize = 26;
/// Largest subset handled by a local distribution (dense `2^|S|` storage).
pub const MAX_LOCAL_SIZE: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub vars: Vec<usize>,
    pub signs: Vec<i8>,
}

impl Constraint {
    /// Sorted distinct variables `S_C`.
    pub fn support(&self) -> Vec<usize> {
        let s: BTreeSet<usize> = self.vars.iter().copied().collect();
        s.into_iter().collect()
    }

    /// Sign mask in assignment-index form.
    pub fn sign_mask(&self) -> usize {
        self.signs.iter().enumerate().fold(0, |m, (j, &b)| if b < 0 { m | 1 << j } else { m })
    }

    /// Position-space index of the literals when `S_C` takes value `alpha`.
    pub fn literal_index(&self, support: &[usize], alpha: usize) -> usize {
        self.vars.iter().enumerate().fold(0, |acc, (j, v)| {
            let p = support.binary_search(v).expect("variable in support");
            let bit = ((alpha >> p) & 1) ^ usize::from(self.signs[j] < 0);
            acc | bit << j
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CspInstance {
    pub f: Predicate,
    pub n: usize,
    pub constraints: Vec<Constraint>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    predicate: serde_json::Value,
    n: usize,
    constraints: Vec<Constraint>,
}

impl CspInstance {
    pub fn new(f: Predicate, n: usize, constraints: Vec<Constraint>) -> Result<Self> {
        let k = f.k();
        for (i, c) in constraints.iter().enumerate() {
            if c.vars.len() != k || c.signs.len() != k {
                return Err(Error::Dimension(format!("constraint {i} does not have arity {k}")));
            }
            if let Some(v) = c.vars.iter().find(|&&v| v >= n) {
                return Err(Error::OutOfRange(format!("constraint {i} uses variable {v} >= n = {n}")));
            }
            if c.signs.iter().any(|&b| b != 1 && b != -1) {
                return Err(Error::Invalid(format!("constraint {i} has a sign outside {{-1,1}}")));
            }
        }
        Ok(Self { f, n, constraints })
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(Predicate::from_value(&file.predicate)?, file.n, file.constraints)
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile { predicate: self.f.to_value(), n: self.n, constraints: self.constraints.clone() };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }

    pub fn satisfied(&self, c: &Constraint, x: &[i8]) -> bool {
        let idx = c.vars.iter().zip(&c.signs).enumerate().fold(0, |acc, (j, (&v, &b))| {
            if x[v] * b < 0 {
                acc | 1 << j
            } else {
                acc
            }
        });
        self.f.eval(idx)
    }

    /// Same instance with variable `v` negated in every occurrence's sign.
    pub fn flip_variable(&self, v: usize) -> Self {
        let mut out = self.clone();
        for c in &mut out.constraints {
            for (u, b) in c.vars.iter().zip(c.signs.iter_mut()) {
                if *u == v {
                    *b = -*b;
                }
            }
        }
        out
    }
}

/// Exact fraction of constraints satisfied by `x` (`+1`/`-1` per variable).
pub fn estimate_sat(phi: &CspInstance, x: &[i8]) -> Result<Q> {
    if x.len() != phi.n {
        return Err(Error::Dimension(format!("assignment has {} values for {} variables", x.len(), phi.n)));
    }
    if phi.m() == 0 {
        return Err(Error::Invalid("instance has no constraints".into()));
    }
    let sat = phi.constraints.iter().filter(|c| phi.satisfied(c, x)).count();
    Ok(q(sat as i64, phi.m() as i64))
}

/// Mean and standard error of `sat` over `draws` uniform random assignments.
pub fn sample_sat(phi: &CspInstance, draws: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = stream(seed, 0);
    let mut vals = Vec::with_capacity(draws);
    for _ in 0..draws {
        let x: Vec<i8> = (0..phi.n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        vals.push(to_f64(&estimate_sat(phi, &x)?));
    }
    Ok(mean_se(&vals))
}

pub fn mean_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    if vals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct BruteForce {
    pub n: usize,
    pub m: usize,
    #[serde(with = "crate::rational::as_string")]
    pub opt: Q,
    pub argmax: Vec<i8>,
    #[serde(with = "crate::rational::as_string")]
    pub min: Q,
    /// `histogram[c]` = number of assignments satisfying exactly `c` constraints.
    pub histogram: Vec<u64>,
}

impl BruteForce {
    pub fn mean(&self) -> Q {
        let total: u128 = self.histogram.iter().enumerate().map(|(c, &h)| c as u128 * h as u128).sum();
        let count: u128 = self.histogram.iter().map(|&h| h as u128).sum();
        Q::new((total as i128).into(), ((count * self.m as u128) as i128).into())
    }
}

fn bits_to_assignment(bits: u64, n: usize) -> Vec<i8> {
    (0..n).map(|i| if (bits >> i) & 1 == 1 { -1 } else { 1 }).collect()
}

/// Exhaustive search over all `2^n` assignments by Gray code, split across
/// workers on the top variables.
pub fn brute_force_opt(phi: &CspInstance) -> Result<BruteForce> {
    let n = phi.n;
    if n > MAX_BRUTE_FORCE_VARS {
        return Err(Error::Budget { required: 1u128 << n, budget: 1u128 << MAX_BRUTE_FORCE_VARS });
    }
    let m = phi.m();
    if m == 0 {
        return Err(Error::Invalid("instance has no constraints".into()));
    }
    let mut occ: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
    for (ci, c) in phi.constraints.iter().enumerate() {
        for (j, &v) in c.vars.iter().enumerate() {
            occ[v].push((ci, 1 << j));
        }
    }
    let table = phi.f.table();
    let high = n.min(6);
    let low = n - high;
    let results: Vec<(Vec<u64>, usize, u64)> = (0..1u64 << high)
        .into_par_iter()
        .map(|top| {
            let start = top << low;
            let x = bits_to_assignment(start, n);
            let mut idx: Vec<u32> = phi
                .constraints
                .iter()
                .map(|c| {
                    c.vars.iter().zip(&c.signs).enumerate().fold(0u32, |a, (j, (&v, &b))| {
                        if x[v] * b < 0 {
                            a | 1 << j
                        } else {
                            a
                        }
                    })
                })
                .collect();
            let mut sat = idx.iter().filter(|&&i| table[i as usize]).count();
            let mut hist = vec![0u64; m + 1];
            let (mut best, mut best_bits) = (sat, start);
            let mut bits = start;
            hist[sat] += 1;
            for g in 1..(1u64 << low) {
                let v = g.trailing_zeros() as usize;
                bits ^= 1 << v;
                for &(ci, mask) in &occ[v] {
                    let before = table[idx[ci] as usize];
                    idx[ci] ^= mask;
                    let after = table[idx[ci] as usize];
                    if before != after {
                        if after {
                            sat += 1;
                        } else {
                            sat -= 1;
                        }
                    }
                }
                hist[sat] += 1;
                if sat > best {
                    best = sat;
                    best_bits = bits;
                }
            }
            (hist, best, best_bits)
        })
        .collect();
    let mut histogram = vec![0u64; m + 1];
    let (mut best, mut best_bits) = (0, 0);
    for (h, b, bits) in results {
        for (acc, v) in histogram.iter_mut().zip(h) {
            *acc += v;
        }
        if b > best || (b == best && bits < best_bits) {
            best = b;
            best_bits = bits;
        }
    }
    let min = histogram.iter().position(|&h| h > 0).expect("some assignment");
    Ok(BruteForce {
        n,
        m,
        opt: q(best as i64, m as i64),
        argmax: bits_to_assignment(best_bits, n),
        min: q(min as i64, m as i64),
        histogram,
    })
}

/// Marginal of a dense distribution on `s` (sorted) to `t` (sorted, `t ⊆ s`).
pub fn marginalize(dist: &[Q], s: &[usize], t: &[usize]) -> Result<Vec<Q>> {
    let pos: Vec<usize> = t
        .iter()
        .map(|v| s.binary_search(v).map_err(|_| Error::Invalid(format!("variable {v} not in subset"))))
        .collect::<Result<_>>()?;
    let mut out = vec![Q::zero(); 1 << t.len()];
    for (alpha, p) in dist.iter().enumerate() {
        let beta = pos.iter().enumerate().fold(0, |acc, (i, &ps)| acc | ((alpha >> ps) & 1) << i);
        out[beta] += p;
    }
    Ok(out)
}

/// Local distributions on variable subsets, stored densely.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LocalDistributionFamily {
    pub r: usize,
    pub dists: BTreeMap<Vec<usize>, Vec<Q>>,
}

#[derive(Serialize, Deserialize)]
struct FamilyEntry {
    vars: Vec<usize>,
    dist: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct FamilyFile {
    r: usize,
    subsets: Vec<FamilyEntry>,
}

fn sorted_unique(s: &[usize]) -> bool {
    s.windows(2).all(|w| w[0] < w[1])
}

impl LocalDistributionFamily {
    pub fn new(r: usize) -> Self {
        Self { r, dists: BTreeMap::new() }
    }

    pub fn insert(&mut self, s: Vec<usize>, dist: Vec<Q>) -> Result<()> {
        if !sorted_unique(&s) {
            return Err(Error::Invalid(format!("subset {s:?} is not sorted and distinct")));
        }
        if s.len() > MAX_LOCAL_SIZE || dist.len() != 1 << s.len() {
            return Err(Error::Dimension(format!("distribution on {s:?} has {} entries", dist.len())));
        }
        if dist.iter().any(|p| p.is_negative()) {
            return Err(Error::Invalid(format!("negative mass on {s:?}")));
        }
        let total: Q = dist.iter().sum();
        if !total.is_one() {
            return Err(Error::Invalid(format!("distribution on {s:?} sums to {total}")));
        }
        self.dists.insert(s, dist);
        Ok(())
    }

    pub fn get(&self, s: &[usize]) -> Result<&Vec<Q>> {
        self.dists.get(s).ok_or_else(|| Error::MissingSubset(s.to_vec()))
    }

    /// Point-mass family of an integral assignment on the given subsets.
    pub fn integral(x: &[i8], subsets: &[Vec<usize>], r: usize) -> Result<Self> {
        let mut fam = Self::new(r);
        for s in subsets {
            let alpha = s.iter().enumerate().fold(0, |a, (p, &v)| if x[v] < 0 { a | 1 << p } else { a });
            let mut d = vec![Q::zero(); 1 << s.len()];
            d[alpha] = Q::one();
            fam.insert(s.clone(), d)?;
        }
        Ok(fam)
    }

    /// Uniform distributions on the given subsets.
    pub fn uniform(subsets: &[Vec<usize>], r: usize) -> Result<Self> {
        let mut fam = Self::new(r);
        for s in subsets {
            let n = 1usize << s.len();
            fam.insert(s.clone(), vec![q(1, n as i64); n])?;
        }
        Ok(fam)
    }

    /// Bias `E[x_v]` of the singleton marginal.
    pub fn bias(&self, v: usize) -> Result<Q> {
        let d = self.get(&[v])?;
        Ok(&d[0] - &d[1])
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: FamilyFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut fam = Self::new(file.r);
        for e in file.subsets {
            let t = e.vars.len();
            if t > MAX_LOCAL_SIZE {
                return Err(Error::Dimension(format!("subset of size {t}")));
            }
            let mut d = vec![Q::zero(); 1 << t];
            for (s, p) in &e.dist {
                let alpha = if t == 0 && s.is_empty() { 0 } else { parse_assignment(s, t)? };
                d[alpha] = parse_q(p)?;
            }
            if fam.dists.contains_key(&e.vars) {
                return Err(Error::Parse(format!("duplicate subset {:?}", e.vars)));
            }
            fam.insert(e.vars, d)?;
        }
        Ok(fam)
    }

    pub fn to_json(&self) -> String {
        let subsets = self
            .dists
            .iter()
            .map(|(s, d)| FamilyEntry {
                vars: s.clone(),
                dist: d
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| !p.is_zero())
                    .map(|(a, p)| (if s.is_empty() { String::new() } else { assignment_string(a, s.len()) }, fmt_q(p)))
                    .collect(),
            })
            .collect();
        serde_json::to_string_pretty(&FamilyFile { r: self.r, subsets }).expect("family serializes")
    }
}

/// Every subset of every constraint support (including the empty set).
pub fn constraint_subsets(phi: &CspInstance) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    for c in &phi.constraints {
        let s = c.support();
        for mask in 0..1usize << s.len() {
            out.insert((0..s.len()).filter(|p| (mask >> p) & 1 == 1).map(|p| s[p]).collect());
        }
    }
    out
}

/// Average over constraints of the mass `m_{S_C}` puts on satisfying assignments.
pub fn sa_objective(phi: &CspInstance, fam: &LocalDistributionFamily) -> Result<Q> {
    if phi.m() == 0 {
        return Err(Error::Invalid("instance has no constraints".into()));
    }
    let mut total = Q::zero();
    for c in &phi.constraints {
        let s = c.support();
        let d = fam.get(&s)?;
        for (alpha, p) in d.iter().enumerate() {
            if !p.is_zero() && phi.f.eval(c.literal_index(&s, alpha)) {
                total += p;
            }
        }
    }
    Ok(total / Q::from_integer((phi.m() as i64).into()))
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub max_violation: f64,
    pub exact: bool,
    pub worst: Option<(Vec<usize>, Vec<usize>)>,
    pub pairs_checked: usize,
}

/// Largest `|marginal_T(m_S) - m_T|` over stored pairs `T ⊂ S`.
pub fn verify_consistency(fam: &LocalDistributionFamily) -> ConsistencyReport {
    let keys: Vec<&Vec<usize>> = fam.dists.keys().collect();
    let results: Vec<(Q, usize, Option<(Vec<usize>, Vec<usize>)>)> = keys
        .par_iter()
        .map(|s| {
            let ds = &fam.dists[*s];
            let mut worst = Q::zero();
            let mut at = None;
            let mut checked = 0;
            for mask in 0..(1usize << s.len()) - 1 {
                let t: Vec<usize> = (0..s.len()).filter(|p| (mask >> p) & 1 == 1).map(|p| s[p]).collect();
                let Some(dt) = fam.dists.get(&t) else { continue };
                checked += 1;
                let mt = marginalize(ds, s, &t).expect("t is a subset");
                for (a, b) in mt.iter().zip(dt) {
                    let v = (a - b).abs();
                    if v > worst {
                        worst = v;
                        at = Some(((*s).clone(), t.clone()));
                    }
                }
            }
            (worst, checked, at)
        })
        .collect();
    let mut max = Q::zero();
    let mut worst = None;
    let mut pairs = 0;
    for (v, c, at) in results {
        pairs += c;
        if v > max {
            max = v;
            worst = at;
        }
    }
    ConsistencyReport { max_violation: to_f64(&max), exact: max.is_zero(), worst, pairs_checked: pairs }
}

/// Index of the LP variables `x_{(S, alpha)}`.
#[derive(Clone, Debug)]
pub struct SaProgram {
    pub lp: LinearProgram<Q>,
    pub r: usize,
    pub offsets: BTreeMap<Vec<usize>, usize>,
}

impl SaProgram {
    pub fn family(&self, x: &[Q]) -> Result<LocalDistributionFamily> {
        let mut fam = LocalDistributionFamily::new(self.r);
        for (s, &o) in &self.offsets {
            fam.insert(s.clone(), x[o..o + (1 << s.len())].to_vec())?;
        }
        Ok(fam)
    }
}

/// Number of LP variables of the `r`-round program on `n` variables.
pub fn sa_size(n: usize, r: usize) -> u128 {
    (0..=r.min(n)).map(|j| binom(n, j) as u128 * (1u128 << j)).sum()
}

fn subsets_upto(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..r.min(n) {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&v| v + 1);
            for v in start..n {
                let mut t = s.clone();
                t.push(v);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// The `r`-round Sherali-Adams LP: variables `x_{(S,alpha)}` for `|S| <= r`,
/// `x_empty = 1`, and one-step marginalization equalities (which imply them
/// for every `T ⊆ S`).
pub fn build_sherali_adams(phi: &CspInstance, r: usize, budget: u128) -> Result<SaProgram> {
    let k = phi.f.k();
    if r < k {
        return Err(Error::Invalid(format!("rounds r={r} below arity {k}")));
    }
    if r > MAX_LOCAL_SIZE {
        return Err(Error::OutOfRange(format!("rounds r={r}")));
    }
    if phi.m() == 0 {
        return Err(Error::Invalid("instance has no constraints".into()));
    }
    let size = sa_size(phi.n, r);
    if size > budget {
        return Err(Error::Budget { required: size, budget });
    }
    let subsets = subsets_upto(phi.n, r);
    let mut offsets = BTreeMap::new();
    let mut total = 0;
    for s in &subsets {
        offsets.insert(s.clone(), total);
        total += 1 << s.len();
    }
    let mut lp = LinearProgram::<Q>::new(total);
    lp.add(vec![(offsets[&vec![]], Q::one())], Relation::Eq, Q::one());
    for s in &subsets {
        let os = offsets[s];
        for drop in 0..s.len() {
            let t: Vec<usize> = s.iter().enumerate().filter(|&(p, _)| p != drop).map(|(_, &v)| v).collect();
            let ot = offsets[&t];
            for beta in 0..1usize << t.len() {
                let mut coeffs = vec![(ot + beta, -Q::one())];
                for bit in 0..2 {
                    let lowmask = (1 << drop) - 1;
                    let alpha = (beta & lowmask) | bit << drop | (beta & !lowmask) << 1;
                    coeffs.push((os + alpha, Q::one()));
                }
                lp.add(coeffs, Relation::Eq, Q::zero());
            }
        }
    }
    let w = q(1, phi.m() as i64);
    for c in &phi.constraints {
        let s = c.support();
        let os = offsets[&s];
        for alpha in 0..1usize << s.len() {
            if phi.f.eval(c.literal_index(&s, alpha)) {
                lp.objective[os + alpha] += &w;
            }
        }
    }
    Ok(SaProgram { lp, r, offsets })
}

/// Solves the program and returns the optimum with the optimal family.
pub fn solve_sherali_adams(prog: &SaProgram) -> Result<(Q, LocalDistributionFamily)> {
    let sol = lp::solve(&prog.lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(format!("Sherali-Adams LP reported {:?}", sol.status)));
    }
    Ok((sol.objective.clone(), prog.family(&sol.x)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrectionReport {
    pub l1_total: f64,
    /// `max_S ||m_S - m'_S||_1`.
    pub max_l1: f64,
    pub already_consistent: bool,
}

/// Exactly consistent family at minimal total L1 distance from `fam`, over
/// the same subsets. Requires the stored subsets to be closed under taking
/// subsets (so that one-step marginal equalities imply all others).
pub fn correct_local_distributions(fam: &LocalDistributionFamily) -> Result<(LocalDistributionFamily, CorrectionReport)> {
    for s in fam.dists.keys() {
        for drop in 0..s.len() {
            let t: Vec<usize> = s.iter().enumerate().filter(|&(p, _)| p != drop).map(|(_, &v)| v).collect();
            if !fam.dists.contains_key(&t) {
                return Err(Error::MissingSubset(t));
            }
        }
    }
    if verify_consistency(fam).exact {
        return Ok((fam.clone(), CorrectionReport { l1_total: 0.0, max_l1: 0.0, already_consistent: true }));
    }
    let mut offsets = BTreeMap::new();
    let mut total = 0;
    for s in fam.dists.keys() {
        offsets.insert(s.clone(), total);
        total += 1 << s.len();
    }
    let old: Vec<Q> = fam.dists.values().flat_map(|d| d.iter().cloned()).collect();
    // x = old + p - n with p, n >= 0; variable 2i is p_i and 2i+1 is n_i.
    let mut lp = LinearProgram::<Q>::new(2 * total);
    for i in 0..total {
        lp.objective[2 * i] = -Q::one();
        lp.objective[2 * i + 1] = -Q::one();
        if !old[i].is_zero() {
            lp.add(vec![(2 * i, Q::one()), (2 * i + 1, -Q::one())], Relation::Ge, -old[i].clone());
        } else {
            lp.add(vec![(2 * i, Q::one()), (2 * i + 1, -Q::one())], Relation::Ge, Q::zero());
        }
    }
    for (s, &os) in &offsets {
        let mut coeffs = Vec::new();
        for a in 0..1usize << s.len() {
            coeffs.push((2 * (os + a), Q::one()));
            coeffs.push((2 * (os + a) + 1, -Q::one()));
        }
        lp.add(coeffs, Relation::Eq, Q::zero());
        for drop in 0..s.len() {
            let t: Vec<usize> = s.iter().enumerate().filter(|&(p, _)| p != drop).map(|(_, &v)| v).collect();
            let ot = offsets[&t];
            for beta in 0..1usize << t.len() {
                let mut coeffs = vec![(2 * (ot + beta), -Q::one()), (2 * (ot + beta) + 1, Q::one())];
                let mut rhs = old[ot + beta].clone();
                for bit in 0..2 {
                    let lowmask = (1 << drop) - 1;
                    let alpha = os + ((beta & lowmask) | bit << drop | (beta & !lowmask) << 1);
                    coeffs.push((2 * alpha, Q::one()));
                    coeffs.push((2 * alpha + 1, -Q::one()));
                    rhs -= &old[alpha];
                }
                lp.add(coeffs, Relation::Eq, rhs);
            }
        }
    }
    let sol = lp::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(format!("correction LP reported {:?}", sol.status)));
    }
    let mut out = LocalDistributionFamily::new(fam.r);
    let mut max_l1 = Q::zero();
    for (s, &os) in &offsets {
        let len = 1 << s.len();
        let d: Vec<Q> = (0..len).map(|a| &old[os + a] + &sol.x[2 * (os + a)] - &sol.x[2 * (os + a) + 1]).collect();
        let l1: Q = (0..len).map(|a| (&d[a] - &old[os + a]).abs()).sum();
        if l1 > max_l1 {
            max_l1 = l1;
        }
        out.insert(s.clone(), d)?;
    }
    let report = CorrectionReport { l1_total: -to_f64(&sol.objective), max_l1: to_f64(&max_l1), already_consistent: false };
    Ok((out, report))
}

/// Candidate solution of the basic relaxation: the unit vector `u` for
/// `(empty, empty)`, vectors `v_(i,+1)` and `v_(i,-1)` per variable, and a
/// distribution over position assignments (variable values) per constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct BasicSolution {
    pub u: Vec<f64>,
    pub plus: Vec<Vec<f64>>,
    pub minus: Vec<Vec<f64>>,
    pub dists: Vec<CubeDistribution>,
}

#[derive(Serialize, Deserialize)]
struct BasicFile {
    u: Vec<f64>,
    plus: Vec<Vec<f64>>,
    minus: Vec<Vec<f64>>,
    dists: Vec<BTreeMap<String, String>>,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl BasicSolution {
    /// Builds `v_(i,b) = (u + b v_i) / 2` from one vector per variable.
    pub fn from_vectors(u: Vec<f64>, v: &[Vec<f64>], dists: Vec<CubeDistribution>) -> Self {
        let plus = v.iter().map(|vi| u.iter().zip(vi).map(|(a, b)| (a + b) / 2.0).collect()).collect();
        let minus = v.iter().map(|vi| u.iter().zip(vi).map(|(a, b)| (a - b) / 2.0).collect()).collect();
        Self { u, plus, minus, dists }
    }

    /// Embedding of an integral assignment: `v_i = x_i u`, point-mass distributions.
    pub fn integral(phi: &CspInstance, x: &[i8]) -> Self {
        let u = vec![1.0];
        let v: Vec<Vec<f64>> = x.iter().map(|&xi| vec![xi as f64]).collect();
        let dists = phi
            .constraints
            .iter()
            .map(|c| {
                let idx = c.vars.iter().enumerate().fold(0, |a, (j, &v)| if x[v] < 0 { a | 1 << j } else { a });
                CubeDistribution::point_mass(phi.f.k(), idx)
            })
            .collect();
        Self::from_vectors(u, &v, dists)
    }

    /// `v_(i,+1) - v_(i,-1)`.
    pub fn difference(&self, i: usize) -> Vec<f64> {
        self.plus[i].iter().zip(&self.minus[i]).map(|(a, b)| a - b).collect()
    }

    fn vec(&self, i: usize, b: i8) -> &[f64] {
        if b > 0 {
            &self.plus[i]
        } else {
            &self.minus[i]
        }
    }

    pub fn parse(text: &str, k: usize) -> Result<Self> {
        let file: BasicFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let dim = file.u.len();
        if dim == 0 || file.plus.len() != file.minus.len() {
            return Err(Error::Dimension("vector lists are inconsistent".into()));
        }
        if file.plus.iter().chain(&file.minus).any(|v| v.len() != dim) {
            return Err(Error::Dimension("vectors must share the dimension of u".into()));
        }
        if file.u.iter().chain(file.plus.iter().flatten()).chain(file.minus.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::Parse("non-finite vector entry".into()));
        }
        let dists = file.dists.iter().map(|m| CubeDistribution::from_map(k, m)).collect::<Result<Vec<_>>>()?;
        Ok(Self { u: file.u, plus: file.plus, minus: file.minus, dists })
    }

    pub fn to_json(&self) -> String {
        let file = BasicFile {
            u: self.u.clone(),
            plus: self.plus.clone(),
            minus: self.minus.clone(),
            dists: self.dists.iter().map(|d| d.to_map()).collect(),
        };
        serde_json::to_string(&file).expect("solution serializes")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BasicReport {
    pub frac: f64,
    /// `max_i |<v_(i,+1), v_(i,-1)>|`.
    pub orthogonality: f64,
    /// `max_i ||v_(i,+1) + v_(i,-1) - u||`.
    pub vector_sum: f64,
    /// `max |<v_(i,b), u> - P(x_i = b)|` over constraint positions.
    pub singles: f64,
    /// `max |<v_(i,b), v_(j,b')> - P(x_i = b, x_j = b')|` over position pairs.
    pub pairs: f64,
    pub unit_u: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Checks every constraint of the basic relaxation and reports `FRAC`.
pub fn verify_basic_solution(phi: &CspInstance, sol: &BasicSolution, tol: f64) -> Result<BasicReport> {
    let k = phi.f.k();
    if sol.plus.len() != phi.n || sol.minus.len() != phi.n {
        return Err(Error::Dimension(format!("solution has vectors for {} variables, instance has {}", sol.plus.len(), phi.n)));
    }
    if sol.dists.len() != phi.m() {
        return Err(Error::Dimension(format!("{} distributions for {} constraints", sol.dists.len(), phi.m())));
    }
    if sol.dists.iter().any(|d| d.k() != k) {
        return Err(Error::Dimension("constraint distribution arity differs from predicate".into()));
    }
    let unit_u = (dot(&sol.u, &sol.u) - 1.0).abs();
    let mut orth: f64 = 0.0;
    let mut vsum: f64 = 0.0;
    for i in 0..phi.n {
        orth = orth.max(dot(&sol.plus[i], &sol.minus[i]).abs());
        let e: f64 = (0..sol.u.len()).map(|l| (sol.plus[i][l] + sol.minus[i][l] - sol.u[l]).powi(2)).sum();
        vsum = vsum.max(e.sqrt());
    }
    let per: Vec<(f64, f64, f64)> = phi
        .constraints
        .par_iter()
        .zip(&sol.dists)
        .map(|(c, d)| {
            let mut singles: f64 = 0.0;
            let mut pairs: f64 = 0.0;
            let probs: Vec<(usize, f64)> = d.probs().iter().map(|(x, p)| (*x, to_f64(p))).collect();
            for i in 0..k {
                for b in [1i8, -1] {
                    let p: f64 = probs.iter().filter(|(x, _)| crate::predicate::sign(*x, i) == b).map(|(_, p)| p).sum();
                    singles = singles.max((dot(sol.vec(c.vars[i], b), &sol.u) - p).abs());
                    for j in i + 1..k {
                        for b2 in [1i8, -1] {
                            let p: f64 = probs
                                .iter()
                                .filter(|(x, _)| crate::predicate::sign(*x, i) == b && crate::predicate::sign(*x, j) == b2)
                                .map(|(_, p)| p)
                                .sum();
                            pairs = pairs.max((dot(sol.vec(c.vars[i], b), sol.vec(c.vars[j], b2)) - p).abs());
                        }
                    }
                }
            }
            let sat: f64 = probs.iter().filter(|(x, _)| phi.f.eval(x ^ c.sign_mask())).map(|(_, p)| p).sum();
            (singles, pairs, sat)
        })
        .collect();
    let singles = per.iter().map(|t| t.0).fold(0.0, f64::max);
    let pairs = per.iter().map(|t| t.1).fold(0.0, f64::max);
    let frac = if per.is_empty() { 0.0 } else { per.iter().map(|t| t.2).sum::<f64>() / per.len() as f64 };
    let passed = [unit_u, orth, vsum, singles, pairs].iter().all(|&v| v <= tol);
    Ok(BasicReport { frac, orthogonality: orth, vector_sum: vsum, singles, pairs, unit_u, tol, passed })
}
