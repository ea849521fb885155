//! Rounding schemes: `(k+1)`-dimensional Gaussian rounding of a basic
//! relaxation solution and independent per-variable LP bias rounding.
//!
//! Both schemes round each variable independently given shared randomness,
//! so the conditional expected value of a constraint is its Fourier
//! expansion with `E[x_v^c] = 1` for even `c` and `E[x_v]` for odd `c`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_traits::{One, Signed, Zero};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::game::opay_with_spec;
use crate::gaussian::{GaussianProcessSpec, PartitionedFunction};
use crate::moments::{covariance_of, MomentMatrix};
use crate::predicate::Predicate;
use crate::rational::{fmt_q, parse_q, qi, to_f64, Q};
use crate::relax::{dot, mean_se, BasicSolution, CspInstance, LocalDistributionFamily};
use crate::rng::stream;
use crate::{Error, Result};

/// Samples of the shared randomness handled by one worker stream.
const CHUNK: usize = 256;

/// Odd map from a variable's LP bias to its rounding bias.
#[derive(Clone, Debug, PartialEq)]
pub enum OddBiasMap {
    /// `psi(p) = clamp(c p, -1, 1)`.
    Linear(Q),
    /// `psi(p) = sgn(p) * value_i` for the first knot with `|p| <= upper_i`.
    Piecewise(Vec<(Q, Q)>),
}

impl OddBiasMap {
    pub fn validate(&self) -> Result<()> {
        if let Self::Piecewise(knots) = self {
            if knots.is_empty() || knots.last().is_some_and(|k| k.0 < Q::one()) {
                return Err(Error::Invalid("piecewise map must cover [0, 1]".into()));
            }
            if knots.windows(2).any(|w| w[0].0 >= w[1].0) || knots.iter().any(|k| !k.0.is_positive()) {
                return Err(Error::Invalid("knot bounds must be positive and increasing".into()));
            }
            if knots.iter().any(|k| k.1.abs() > Q::one()) {
                return Err(Error::Invalid("map values must lie in [-1, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn apply(&self, p: &Q) -> Q {
        if p.is_zero() {
            return Q::zero();
        }
        match self {
            Self::Linear(c) => {
                let v = c * p;
                if v > Q::one() {
                    Q::one()
                } else if v < -Q::one() {
                    -Q::one()
                } else {
                    v
                }
            }
            Self::Piecewise(knots) => {
                let a = p.abs();
                let v = knots.iter().find(|k| a <= k.0).map_or_else(Q::zero, |k| k.1.clone());
                if p.is_negative() {
                    -v
                } else {
                    v
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Linear(c) => c.is_zero(),
            Self::Piecewise(knots) => knots.iter().all(|k| k.1.is_zero()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SchemeKind {
    Gaussian { delta: Q, psis: Vec<(Q, PartitionedFunction)> },
    LpBias { maps: Vec<(Q, OddBiasMap)> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundingScheme {
    pub kind: SchemeKind,
    /// Draws of the shared randomness (Gaussian) or of assignments (LP).
    pub samples: usize,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MapFile {
    Linear(String),
    Piecewise(Vec<(String, String)>),
}

#[derive(Serialize, Deserialize)]
struct WeightedPsi {
    weight: String,
    psi: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct WeightedMap {
    weight: String,
    map: MapFile,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SchemeFile {
    Gaussian { delta: String, psis: Vec<WeightedPsi>, samples: usize, seed: u64 },
    LpBias { maps: Vec<WeightedMap>, samples: usize, seed: u64 },
}

fn check_weights<'a>(w: impl Iterator<Item = &'a Q>) -> Result<()> {
    let mut total = Q::zero();
    for x in w {
        if x.is_negative() {
            return Err(Error::Invalid(format!("negative weight {x}")));
        }
        total += x;
    }
    if !total.is_one() {
        return Err(Error::Invalid(format!("weights sum to {total}")));
    }
    Ok(())
}

impl RoundingScheme {
    pub fn gaussian(delta: Q, psi: PartitionedFunction, samples: usize, seed: u64) -> Self {
        Self { kind: SchemeKind::Gaussian { delta, psis: vec![(Q::one(), psi)] }, samples, seed }
    }

    pub fn lp_bias(map: OddBiasMap, samples: usize, seed: u64) -> Self {
        Self { kind: SchemeKind::LpBias { maps: vec![(Q::one(), map)] }, samples, seed }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SchemeKind::Gaussian { .. } => "gaussian_d_dim",
            SchemeKind::LpBias { .. } => "lp_bias",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            SchemeKind::Gaussian { delta, psis } => {
                if delta.is_negative() || *delta > Q::one() {
                    return Err(Error::Invalid(format!("delta {delta} outside [0,1]")));
                }
                check_weights(psis.iter().map(|p| &p.0))?;
                let d = psis[0].1.grid().d;
                if psis.iter().any(|p| p.1.grid().d != d) {
                    return Err(Error::Dimension("psi functions use different dimensions".into()));
                }
            }
            SchemeKind::LpBias { maps } => {
                check_weights(maps.iter().map(|m| &m.0))?;
                for (_, m) in maps {
                    m.validate()?;
                }
            }
        }
        if self.samples == 0 {
            return Err(Error::Invalid("sample count must be positive".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: SchemeFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let scheme = match file {
            SchemeFile::Gaussian { delta, psis, samples, seed } => {
                let psis = psis
                    .iter()
                    .map(|p| Ok((parse_q(&p.weight)?, PartitionedFunction::parse(&p.psi.to_string())?)))
                    .collect::<Result<Vec<_>>>()?;
                if psis.is_empty() {
                    return Err(Error::Parse("no psi functions".into()));
                }
                Self { kind: SchemeKind::Gaussian { delta: parse_q(&delta)?, psis }, samples, seed }
            }
            SchemeFile::LpBias { maps, samples, seed } => {
                let maps = maps
                    .iter()
                    .map(|m| {
                        let map = match &m.map {
                            MapFile::Linear(c) => OddBiasMap::Linear(parse_q(c)?),
                            MapFile::Piecewise(k) => OddBiasMap::Piecewise(
                                k.iter().map(|(a, b)| Ok((parse_q(a)?, parse_q(b)?))).collect::<Result<_>>()?,
                            ),
                        };
                        Ok((parse_q(&m.weight)?, map))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if maps.is_empty() {
                    return Err(Error::Parse("no bias maps".into()));
                }
                Self { kind: SchemeKind::LpBias { maps }, samples, seed }
            }
        };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn to_json(&self) -> String {
        let file = match &self.kind {
            SchemeKind::Gaussian { delta, psis } => SchemeFile::Gaussian {
                delta: fmt_q(delta),
                psis: psis
                    .iter()
                    .map(|(w, p)| WeightedPsi {
                        weight: fmt_q(w),
                        psi: serde_json::from_str(&p.to_json()).expect("psi json is valid"),
                    })
                    .collect(),
                samples: self.samples,
                seed: self.seed,
            },
            SchemeKind::LpBias { maps } => SchemeFile::LpBias {
                maps: maps
                    .iter()
                    .map(|(w, m)| WeightedMap {
                        weight: fmt_q(w),
                        map: match m {
                            OddBiasMap::Linear(c) => MapFile::Linear(fmt_q(c)),
                            OddBiasMap::Piecewise(k) => MapFile::Piecewise(k.iter().map(|(a, b)| (fmt_q(a), fmt_q(b))).collect()),
                        },
                    })
                    .collect(),
                samples: self.samples,
                seed: self.seed,
            },
        };
        serde_json::to_string_pretty(&file).expect("scheme serializes")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundingReport {
    pub scheme: String,
    pub seed: u64,
    pub samples: usize,
    pub rho: f64,
    /// Exact expected value when available (analytic path or LP closed form).
    pub expected_exact: Option<String>,
    /// Exact value if known, else the Monte-Carlo mean.
    pub expected_value: f64,
    pub mc_mean: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Per constraint, estimated (or exact) expected value minus `rho`.
    pub advantage: Vec<f64>,
    pub assignment: Vec<i8>,
}

/// Fourier expansion of one constraint in variable space: terms
/// `(coefficient, variables of odd multiplicity)`, constant included.
type Expansion = Vec<(Q, Vec<usize>)>;

fn expansion(phi: &CspInstance) -> Vec<Expansion> {
    let spec = phi.f.fourier();
    let k = phi.f.k();
    phi.constraints
        .iter()
        .map(|c| {
            let mut merged: BTreeMap<Vec<usize>, Q> = BTreeMap::new();
            for s in 0..1u32 << k {
                let coef = spec.get(s);
                if coef.is_zero() {
                    continue;
                }
                let mut odd: BTreeMap<usize, bool> = BTreeMap::new();
                let mut sign = 1i64;
                for j in 0..k {
                    if (s >> j) & 1 == 1 {
                        sign *= c.signs[j] as i64;
                        *odd.entry(c.vars[j]).or_insert(false) ^= true;
                    }
                }
                let key: Vec<usize> = odd.into_iter().filter(|e| e.1).map(|e| e.0).collect();
                *merged.entry(key).or_insert_with(Q::zero) += coef * qi(sign);
            }
            merged.into_iter().filter(|e| !e.1.is_zero()).map(|(v, c)| (c, v)).collect()
        })
        .collect()
}

fn eval_exact(exp: &Expansion, e: &[Q]) -> Q {
    exp.iter().map(|(c, vars)| vars.iter().fold(c.clone(), |acc, &v| acc * &e[v])).sum()
}

fn eval_f64(exp: &[(f64, Vec<usize>)], e: &[f64]) -> f64 {
    exp.iter().map(|(c, vars)| vars.iter().fold(*c, |acc, &v| acc * e[v])).sum()
}

fn to_f64_expansion(exps: &[Expansion]) -> Vec<Vec<(f64, Vec<usize>)>> {
    exps.iter().map(|e| e.iter().map(|(c, v)| (to_f64(c), v.clone())).collect()).collect()
}

/// Exact expected value when every variable has rounding mean `e[v]`.
pub fn expected_value_exact(phi: &CspInstance, e: &[Q]) -> Result<Q> {
    if phi.m() == 0 {
        return Err(Error::Invalid("instance has no constraints".into()));
    }
    let total: Q = expansion(phi).iter().map(|x| eval_exact(x, e)).sum();
    Ok(total / qi(phi.m() as i64))
}

fn sample_assignment(e: &[f64], rng: &mut crate::rng::Rng) -> Vec<i8> {
    e.iter().map(|&m| if rng.random::<f64>() < (1.0 + m) / 2.0 { 1 } else { -1 }).collect()
}

fn zero_path(phi: &CspInstance, scheme: &RoundingScheme) -> Result<RoundingReport> {
    let zeros = vec![Q::zero(); phi.n];
    let exps = expansion(phi);
    let per: Vec<Q> = exps.iter().map(|x| eval_exact(x, &zeros)).collect();
    let value = expected_value_exact(phi, &zeros)?;
    let rho = phi.f.density();
    let mut rng = stream(scheme.seed, 0xa5);
    let v = to_f64(&value);
    Ok(RoundingReport {
        scheme: scheme.name().into(),
        seed: scheme.seed,
        samples: 0,
        rho: to_f64(&rho),
        expected_exact: Some(fmt_q(&value)),
        expected_value: v,
        mc_mean: v,
        std_error: 0.0,
        ci_low: v,
        ci_high: v,
        advantage: per.iter().map(|p| to_f64(&(p - &rho))).collect(),
        assignment: sample_assignment(&vec![0.0; phi.n], &mut rng),
    })
}

/// Rounds a basic-relaxation solution: with shared `g_1..g_d` and per-variable
/// noise, `y'_(i,l) = sqrt(1-delta) (<w_i, g_l> - <w_i,u><u, g_l>) + sqrt(delta) N_(i,l)
/// + sqrt(1-delta) <w_i, u>` for `w_i = v_(i,+1) - v_(i,-1)`, and variable `i`
/// has mean `psi(y'_i)`.
pub fn round_sdp(phi: &CspInstance, sol: &BasicSolution, scheme: &RoundingScheme) -> Result<RoundingReport> {
    scheme.validate()?;
    let SchemeKind::Gaussian { delta, psis } = &scheme.kind else {
        return Err(Error::Invalid("round_sdp needs a gaussian scheme".into()));
    };
    if sol.plus.len() != phi.n || sol.minus.len() != phi.n {
        return Err(Error::Dimension("solution is missing variable vectors".into()));
    }
    if psis.iter().all(|p| p.0.is_zero() || p.1.is_zero()) {
        return zero_path(phi, scheme);
    }
    if phi.m() == 0 {
        return Err(Error::Invalid("instance has no constraints".into()));
    }
    let d = psis[0].1.grid().d;
    let dim = sol.u.len();
    let keep = (1.0 - to_f64(delta)).sqrt();
    let noise = to_f64(delta).sqrt();
    let w: Vec<Vec<f64>> = (0..phi.n).map(|i| sol.difference(i)).collect();
    let wu: Vec<f64> = w.iter().map(|wi| dot(wi, &sol.u)).collect();
    let exps = to_f64_expansion(&expansion(phi));
    let weights: Vec<f64> = psis.iter().map(|p| to_f64(&p.0)).collect();
    let chunks = scheme.samples.div_ceil(CHUNK);
    // Per chunk: per-sample instance values and per-constraint sums.
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|ch| {
            let mut rng = stream(scheme.seed, ch as u64);
            let count = CHUNK.min(scheme.samples - ch * CHUNK);
            let mut values = Vec::with_capacity(count);
            let mut per = vec![0.0; phi.m()];
            let mut y = vec![vec![0.0; d]; phi.n];
            for _ in 0..count {
                for l in 0..d {
                    let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    let ug = dot(&sol.u, &g);
                    for i in 0..phi.n {
                        let nz: f64 = rng.sample(StandardNormal);
                        y[i][l] = keep * (dot(&w[i], &g) - wu[i] * ug) + noise * nz + keep * wu[i];
                    }
                }
                let mut total = 0.0;
                for (wt, (_, psi)) in weights.iter().zip(psis) {
                    if *wt == 0.0 {
                        continue;
                    }
                    let e: Vec<f64> = y.iter().map(|yi| psi.eval(yi) as f64).collect();
                    let mut sum = 0.0;
                    for (c, x) in exps.iter().enumerate() {
                        let v = eval_f64(x, &e);
                        per[c] += wt * v;
                        sum += v;
                    }
                    total += wt * sum / phi.m() as f64;
                }
                values.push(total);
            }
            (values, per)
        })
        .collect();
    let values: Vec<f64> = parts.iter().flat_map(|p| p.0.iter().copied()).collect();
    let mut per = vec![0.0; phi.m()];
    for (_, p) in &parts {
        for (a, b) in per.iter_mut().zip(p) {
            *a += b;
        }
    }
    let (mean, se) = mean_se(&values);
    let rho = to_f64(&phi.f.density());
    let mut rng = stream(scheme.seed, 0xa5);
    let mut y0 = vec![vec![0.0; d]; phi.n];
    for l in 0..d {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let ug = dot(&sol.u, &g);
        for i in 0..phi.n {
            let nz: f64 = rng.sample(StandardNormal);
            y0[i][l] = keep * (dot(&w[i], &g) - wu[i] * ug) + noise * nz + keep * wu[i];
        }
    }
    let pick = {
        let mut r = rng.random::<f64>();
        let mut idx = weights.len() - 1;
        for (i, wt) in weights.iter().enumerate() {
            if r < *wt {
                idx = i;
                break;
            }
            r -= wt;
        }
        idx
    };
    let e0: Vec<f64> = y0.iter().map(|yi| psis[pick].1.eval(yi) as f64).collect();
    Ok(RoundingReport {
        scheme: scheme.name().into(),
        seed: scheme.seed,
        samples: scheme.samples,
        rho,
        expected_exact: None,
        expected_value: mean,
        mc_mean: mean,
        std_error: se,
        ci_low: mean - 3.0 * se,
        ci_high: mean + 3.0 * se,
        advantage: per.iter().map(|s| s / scheme.samples as f64 - rho).collect(),
        assignment: sample_assignment(&e0, &mut rng),
    })
}

/// Rounding means `sum_w w * map(bias_v)` for every variable.
/// Bias of every variable; a variable outside all constraints may lack a
/// singleton marginal and is then rounded unbiased.
fn family_biases(phi: &CspInstance, fam: &LocalDistributionFamily) -> Result<Vec<Q>> {
    let mut used = vec![false; phi.n];
    for c in &phi.constraints {
        for &v in &c.vars {
            used[v] = true;
        }
    }
    (0..phi.n)
        .map(|v| match fam.bias(v) {
            Err(Error::MissingSubset(_)) if !used[v] => Ok(Q::zero()),
            other => other,
        })
        .collect()
}

fn lp_means(phi: &CspInstance, fam: &LocalDistributionFamily, maps: &[(Q, OddBiasMap)]) -> Result<Vec<Q>> {
    let biases = family_biases(phi, fam)?;
    (0..phi.n)
        .map(|v| {
            let b = biases[v].clone();
            Ok(maps.iter().map(|(w, m)| w * m.apply(&b)).sum())
        })
        .collect()
}

/// Independent rounding of each variable with mean `psi(bias)`. The exact
/// value comes from the product formula; a Monte-Carlo estimate is reported
/// next to it. A mixture of maps is a mixture of product distributions, so
/// its exact value is the weighted sum of the per-map values.
pub fn round_lp(phi: &CspInstance, fam: &LocalDistributionFamily, scheme: &RoundingScheme) -> Result<RoundingReport> {
    scheme.validate()?;
    let SchemeKind::LpBias { maps } = &scheme.kind else {
        return Err(Error::Invalid("round_lp needs an lp_bias scheme".into()));
    };
    family_biases(phi, fam)?;
    if maps.iter().all(|m| m.0.is_zero() || m.1.is_zero()) {
        return zero_path(phi, scheme);
    }
    if phi.m() == 0 {
        return Err(Error::Invalid("instance has no constraints".into()));
    }
    let exps = expansion(phi);
    let rho = phi.f.density();
    let per_map: Vec<Vec<Q>> =
        maps.iter().map(|(_, m)| lp_means(phi, fam, &[(Q::one(), m.clone())])).collect::<Result<_>>()?;
    let mut per = vec![Q::zero(); phi.m()];
    for ((w, _), e) in maps.iter().zip(&per_map) {
        for (slot, x) in per.iter_mut().zip(&exps) {
            *slot += w * eval_exact(x, e);
        }
    }
    let exact: Q = per.iter().sum::<Q>() / qi(phi.m() as i64);
    let weights: Vec<f64> = maps.iter().map(|m| to_f64(&m.0)).collect();
    let means_f: Vec<Vec<f64>> = per_map.iter().map(|e| e.iter().map(to_f64).collect()).collect();
    let chunks = scheme.samples.div_ceil(CHUNK);
    let values: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|ch| {
            let mut rng = stream(scheme.seed, ch as u64);
            let count = CHUNK.min(scheme.samples - ch * CHUNK);
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let mut r = rng.random::<f64>();
                let mut idx = weights.len() - 1;
                for (i, wt) in weights.iter().enumerate() {
                    if r < *wt {
                        idx = i;
                        break;
                    }
                    r -= wt;
                }
                let x = sample_assignment(&means_f[idx], &mut rng);
                let sat = phi.constraints.iter().filter(|c| phi.satisfied(c, &x)).count();
                out.push(sat as f64 / phi.m() as f64);
            }
            out
        })
        .collect();
    let (mean, se) = mean_se(&values);
    let mut rng = stream(scheme.seed, 0xa5);
    let v = to_f64(&exact);
    Ok(RoundingReport {
        scheme: scheme.name().into(),
        seed: scheme.seed,
        samples: scheme.samples,
        rho: to_f64(&rho),
        expected_exact: Some(fmt_q(&exact)),
        expected_value: v,
        mc_mean: mean,
        std_error: se,
        ci_low: mean - 3.0 * se,
        ci_high: mean + 3.0 * se,
        advantage: per.iter().map(|p| to_f64(&(p - &rho))).collect(),
        assignment: sample_assignment(&means_f[0], &mut rng),
    })
}

/// Value of the scheme on one constraint with (literal-space) moments `zeta`.
#[derive(Clone, Debug, Serialize)]
pub struct ClosedForm {
    pub value: f64,
    pub exact: Option<String>,
    pub std_error: f64,
}

/// `rho + opay(zeta, psi)`: the product formula for LP bias rounding, the
/// guard-off Monte-Carlo payoff for Gaussian rounding.
pub fn expected_round_value_closed_form(f: &Predicate, zeta: &MomentMatrix, scheme: &RoundingScheme) -> Result<ClosedForm> {
    scheme.validate()?;
    if zeta.k() != f.k() {
        return Err(Error::Dimension("moment matrix arity differs from predicate".into()));
    }
    let rho = f.density();
    match &scheme.kind {
        SchemeKind::LpBias { maps } => {
            let spec = f.fourier();
            let mut total = rho.clone();
            for (w, m) in maps {
                let e: Vec<Q> = (1..=f.k()).map(|i| m.apply(zeta.get(0, i))).collect();
                for s in spec.nonconstant_support() {
                    let mut t = spec.get(s) * w;
                    for (j, ej) in e.iter().enumerate() {
                        if (s >> j) & 1 == 1 {
                            t *= ej;
                        }
                    }
                    total += t;
                }
            }
            Ok(ClosedForm { value: to_f64(&total), exact: Some(fmt_q(&total)), std_error: 0.0 })
        }
        SchemeKind::Gaussian { psis, .. } => {
            if psis.iter().all(|p| p.0.is_zero() || p.1.is_zero()) {
                return Ok(ClosedForm { value: to_f64(&rho), exact: Some(fmt_q(&rho)), std_error: 0.0 });
            }
            let d = psis[0].1.grid().d;
            let c = covariance_of(zeta);
            let spec = GaussianProcessSpec::new(c.sigma, c.mu, d)?;
            gaussian_closed_form(f, &spec, psis, scheme.samples, scheme.seed)
        }
    }
}

fn gaussian_closed_form(
    f: &Predicate,
    spec: &GaussianProcessSpec,
    psis: &[(Q, PartitionedFunction)],
    samples: usize,
    seed: u64,
) -> Result<ClosedForm> {
    let mut value = to_f64(&f.density());
    let mut var = 0.0;
    for (w, psi) in psis {
        let wf = to_f64(w);
        if wf == 0.0 {
            continue;
        }
        let est = opay_with_spec(f, spec, psi, samples, seed)?;
        value += wf * est.mean;
        var += wf * wf * est.std_error * est.std_error;
    }
    Ok(ClosedForm { value, exact: None, std_error: var.sqrt() })
}

/// The Gaussian process of one constraint's literals under [`round_sdp`]:
/// mean `sqrt(1-delta) b_j <w,u>` and covariance from the shifted vectors.
/// Requires distinct variables.
pub fn constraint_process(phi: &CspInstance, sol: &BasicSolution, c: usize, delta: &Q, d: usize) -> Result<GaussianProcessSpec> {
    let con = &phi.constraints[c];
    if con.support().len() != con.vars.len() {
        return Err(Error::Invalid(format!("constraint {c} repeats a variable")));
    }
    let k = con.vars.len();
    let keep = 1.0 - to_f64(delta);
    let w: Vec<Vec<f64>> = con.vars.iter().map(|&v| sol.difference(v)).collect();
    let b: Vec<f64> = con.signs.iter().map(|&s| s as f64).collect();
    let wu: Vec<f64> = w.iter().map(|wi| dot(wi, &sol.u)).collect();
    let mu = DVector::from_iterator(k, (0..k).map(|i| b[i] * keep.sqrt() * wu[i]));
    let sigma = DMatrix::from_fn(k, k, |i, j| {
        let base = keep * (dot(&w[i], &w[j]) - wu[i] * wu[j]);
        b[i] * b[j] * base + if i == j { 1.0 - keep } else { 0.0 }
    });
    GaussianProcessSpec::new(sigma, mu, d)
}

/// `rho + opay` for constraint `c` of a rounded basic solution.
pub fn constraint_closed_form(phi: &CspInstance, sol: &BasicSolution, c: usize, scheme: &RoundingScheme) -> Result<ClosedForm> {
    scheme.validate()?;
    let SchemeKind::Gaussian { delta, psis } = &scheme.kind else {
        return Err(Error::Invalid("needs a gaussian scheme".into()));
    };
    let d = psis[0].1.grid().d;
    let spec = constraint_process(phi, sol, c, delta, d)?;
    gaussian_closed_form(&phi.f, &spec, psis, scheme.samples, scheme.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Grid;
    use crate::moments::{moments_of, noise_shift, CubeDistribution};
    use crate::rational::q;
    use crate::relax::Constraint;

    fn first_coordinate_sign(d: usize) -> PartitionedFunction {
        let grid = Grid::new(0, d).unwrap();
        let mut psi = PartitionedFunction::zero(0, d).unwrap();
        for c in grid.canonical_cells() {
            psi.set(c, 1).unwrap();
        }
        psi
    }

    fn single(f: Predicate, vars: &[usize], signs: &[i8], n: usize) -> CspInstance {
        CspInstance::new(f, n, vec![Constraint { vars: vars.to_vec(), signs: signs.to_vec() }]).unwrap()
    }

    #[test]
    fn zero_psi_is_density_exactly() {
        let phi = single(Predicate::majority(3), &[0, 1, 2], &[1, -1, 1], 3);
        let sol = BasicSolution::integral(&phi, &[1, 1, -1]);
        let zero = PartitionedFunction::zero(1, 2).unwrap();
        let rep = round_sdp(&phi, &sol, &RoundingScheme::gaussian(q(1, 10), zero, 10, 0)).unwrap();
        assert_eq!(rep.expected_exact.as_deref(), Some("1/2"));
        assert_eq!(rep.std_error, 0.0);
        let fam = LocalDistributionFamily::uniform(&[vec![0], vec![1], vec![2]], 1).unwrap();
        let rep = round_lp(&phi, &fam, &RoundingScheme::lp_bias(OddBiasMap::Linear(Q::zero()), 10, 0)).unwrap();
        assert_eq!(rep.expected_exact.as_deref(), Some("1/2"));
    }

    #[test]
    fn point_mass_rounds_deterministically() {
        let f = Predicate::or(3);
        let phi = single(f, &[0, 1, 2], &[1, 1, 1], 3);
        let x = [1i8, -1, -1];
        let subsets: Vec<Vec<usize>> = vec![vec![], vec![0], vec![1], vec![2]];
        let fam = LocalDistributionFamily::integral(&x, &subsets, 1).unwrap();
        let rep = round_lp(&phi, &fam, &RoundingScheme::lp_bias(OddBiasMap::Linear(Q::one()), 200, 1)).unwrap();
        assert_eq!(rep.expected_exact.as_deref(), Some("1/1"));
        assert_eq!(rep.mc_mean, 1.0);
        assert_eq!(rep.assignment, x.to_vec());
    }

    #[test]
    fn repeated_variable_uses_multiplicity() {
        // x0 * x0 * x1 parity: satisfied iff x1 = +1 (product of literals = +1).
        let f = Predicate::parity(3);
        let phi = single(f.clone(), &[0, 0, 1], &[1, 1, 1], 2);
        let e = [q(1, 3), q(1, 2)];
        let direct = {
            let mut t = Q::zero();
            for x in 0..4usize {
                let p: Q = (0..2).map(|v| if (x >> v) & 1 == 0 { (Q::one() + &e[v]) / qi(2) } else { (Q::one() - &e[v]) / qi(2) }).product();
                let xs = [if x & 1 == 0 { 1 } else { -1 }, if x & 2 == 0 { 1 } else { -1 }];
                if phi.satisfied(&phi.constraints[0], &xs) {
                    t += p;
                }
            }
            t
        };
        assert_eq!(expected_value_exact(&phi, &e).unwrap(), direct);
    }

    #[test]
    fn lp_closed_form_agrees_with_sampling() {
        let f = Predicate::majority(3);
        let cons = vec![
            Constraint { vars: vec![0, 1, 2], signs: vec![1, 1, -1] },
            Constraint { vars: vec![1, 2, 3], signs: vec![-1, 1, 1] },
        ];
        let phi = CspInstance::new(f, 4, cons).unwrap();
        let mut fam = LocalDistributionFamily::new(1);
        fam.insert(vec![], vec![Q::one()]).unwrap();
        for (v, p) in [q(3, 4), q(1, 3), q(1, 2), q(1, 5)].into_iter().enumerate() {
            fam.insert(vec![v], vec![p.clone(), Q::one() - p]).unwrap();
        }
        let map = OddBiasMap::Piecewise(vec![(q(1, 4), q(1, 2)), (Q::one(), Q::one())]);
        let rep = round_lp(&phi, &fam, &RoundingScheme::lp_bias(map, 40_000, 7)).unwrap();
        assert!((rep.mc_mean - rep.expected_value).abs() <= 3.0 * rep.std_error);
    }

    #[test]
    fn unconstrained_variable_may_lack_a_marginal() {
        let phi = single(Predicate::majority(3), &[0, 1, 2], &[1, 1, 1], 4);
        let fam = LocalDistributionFamily::uniform(&[vec![0], vec![1], vec![2]], 1).unwrap();
        let scheme = RoundingScheme::lp_bias(OddBiasMap::Linear(Q::one()), 10, 0);
        assert_eq!(round_lp(&phi, &fam, &scheme).unwrap().expected_exact.as_deref(), Some("1/2"));
        let fam = LocalDistributionFamily::uniform(&[vec![0], vec![1], vec![3]], 1).unwrap();
        assert!(matches!(round_lp(&phi, &fam, &scheme), Err(Error::MissingSubset(_))));
    }

    #[test]
    fn odd_maps() {
        let m = OddBiasMap::Piecewise(vec![(q(1, 4), q(1, 2)), (Q::one(), Q::one())]);
        assert!(m.validate().is_ok());
        for p in [q(1, 8), q(1, 2), q(-3, 4)] {
            assert_eq!(m.apply(&-p.clone()), -m.apply(&p));
        }
        assert_eq!(OddBiasMap::Linear(qi(3)).apply(&q(1, 2)), Q::one());
        assert!(OddBiasMap::Piecewise(vec![(q(1, 2), Q::one())]).validate().is_err());
        assert!(OddBiasMap::Piecewise(vec![(Q::one(), qi(2))]).validate().is_err());
    }

    #[test]
    fn closed_form_zero_bias_is_density() {
        let f = Predicate::majority(3);
        let zeta = MomentMatrix::identity(3);
        let map = OddBiasMap::Linear(qi(2));
        let cf = expected_round_value_closed_form(&f, &zeta, &RoundingScheme::lp_bias(map, 1, 0)).unwrap();
        assert_eq!(cf.exact.as_deref(), Some("1/2"));
    }

    #[test]
    fn gaussian_closed_form_matches_round_sdp() {
        let f = Predicate::majority(3);
        let phi = single(f.clone(), &[0, 1, 2], &[1, -1, 1], 3);
        let nu = CubeDistribution::uniform_on(3, &[0, 1, 2, 4]).unwrap();
        let zeta = noise_shift(&moments_of(&nu), &q(1, 10)).unwrap();
        let chol = crate::gaussian::cholesky(&zeta.to_f64()).unwrap();
        let rows: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| chol[(i, j)]).collect()).collect();
        // Vectors in variable space: literal j = sign_j * x_v.
        let v: Vec<Vec<f64>> = (1..4).map(|i| rows[i].iter().map(|x| x * phi.constraints[0].signs[i - 1] as f64).collect()).collect();
        let dists = vec![nu.twisted(phi.constraints[0].sign_mask())];
        let sol = BasicSolution::from_vectors(rows[0].clone(), &v, dists);
        let scheme = RoundingScheme::gaussian(q(1, 5), first_coordinate_sign(2), 20_000, 3);
        let rep = round_sdp(&phi, &sol, &scheme).unwrap();
        let cf = constraint_closed_form(&phi, &sol, 0, &RoundingScheme { seed: 99, ..scheme }).unwrap();
        let se = (rep.std_error.powi(2) + cf.std_error.powi(2)).sqrt();
        assert!((rep.mc_mean - cf.value).abs() <= 3.0 * se, "{} vs {}", rep.mc_mean, cf.value);
        assert!(cf.value > 0.5);
    }

    #[test]
    fn integral_embedding_matches_closed_form() {
        // Near delta = 0 each y'_i is x_i plus tiny noise; the partition only
        // covers [-1, 1], so psi is the sign of x_i about half the time.
        let f = Predicate::majority(3);
        let cons = vec![
            Constraint { vars: vec![0, 1, 2], signs: vec![1, 1, 1] },
            Constraint { vars: vec![1, 2, 3], signs: vec![-1, 1, 1] },
            Constraint { vars: vec![0, 2, 3], signs: vec![1, -1, -1] },
        ];
        let phi = CspInstance::new(f, 4, cons).unwrap();
        let sol = BasicSolution::integral(&phi, &[1, -1, 1, 1]);
        let scheme = RoundingScheme::gaussian(q(1, 1_000_000), first_coordinate_sign(1), 20_000, 5);
        let rep = round_sdp(&phi, &sol, &scheme).unwrap();
        let (mut cf, mut var) = (0.0, 0.0);
        for c in 0..phi.m() {
            let v = constraint_closed_form(&phi, &sol, c, &RoundingScheme { seed: 77, ..scheme.clone() }).unwrap();
            cf += v.value / 3.0;
            var += (v.std_error / 3.0).powi(2);
        }
        let se = (rep.std_error.powi(2) + var).sqrt();
        assert!((rep.mc_mean - cf).abs() <= 3.0 * se, "{} vs {cf}", rep.mc_mean);
        for (e, x) in rep.assignment.iter().zip([1i8, -1, 1, 1]) {
            assert!(*e == x || *e == -x);
        }
    }

    #[test]
    fn negation_equivariance() {
        let f = Predicate::majority(3);
        let cons = vec![Constraint { vars: vec![0, 1, 2], signs: vec![1, -1, 1] }];
        let phi = CspInstance::new(f, 3, cons).unwrap();
        let sol = BasicSolution::from_vectors(
            vec![1.0, 0.0, 0.0],
            &[vec![0.3, 0.9, 0.0], vec![-0.2, 0.1, 0.9], vec![0.5, -0.4, 0.3]],
            vec![CubeDistribution::uniform(3)],
        );
        let scheme = RoundingScheme::gaussian(q(1, 4), first_coordinate_sign(2), 3000, 11);
        let a = round_sdp(&phi, &sol, &scheme).unwrap();
        let flipped = phi.flip_variable(1);
        let mut sol2 = sol.clone();
        std::mem::swap(&mut sol2.plus[1], &mut sol2.minus[1]);
        let b = round_sdp(&flipped, &sol2, &scheme).unwrap();
        assert!((a.mc_mean - b.mc_mean).abs() <= 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt() + 1e-12);
    }

    #[test]
    fn mixing_in_zero_scales_advantage() {
        let f = Predicate::majority(3);
        let phi = single(f, &[0, 1, 2], &[1, 1, 1], 3);
        let sol = BasicSolution::from_vectors(
            vec![1.0, 0.0],
            &[vec![0.5, 0.8], vec![0.4, -0.7], vec![0.6, 0.1]],
            vec![CubeDistribution::uniform(3)],
        );
        let psi = first_coordinate_sign(1);
        let full = round_sdp(&phi, &sol, &RoundingScheme::gaussian(q(1, 10), psi.clone(), 4000, 2)).unwrap();
        let zero = PartitionedFunction::zero(0, 1).unwrap();
        let half = RoundingScheme {
            kind: SchemeKind::Gaussian { delta: q(1, 10), psis: vec![(q(1, 2), psi), (q(1, 2), zero)] },
            samples: 4000,
            seed: 2,
        };
        let mixed = round_sdp(&phi, &sol, &half).unwrap();
        // Shared randomness makes the mixture exactly affine in the weight.
        assert!((mixed.advantage[0] - full.advantage[0] / 2.0).abs() < 1e-9);
    }

    #[test]
    fn scheme_round_trips() {
        let s = RoundingScheme::lp_bias(OddBiasMap::Piecewise(vec![(q(1, 3), q(1, 2)), (Q::one(), Q::one())]), 10, 4);
        assert_eq!(RoundingScheme::parse(&s.to_json()).unwrap(), s);
        let g = RoundingScheme::gaussian(q(1, 10), first_coordinate_sign(2), 10, 4);
        assert_eq!(RoundingScheme::parse(&g.to_json()).unwrap(), g);
        assert!(RoundingScheme::parse("{\"kind\":\"lp_bias\",\"maps\":[],\"samples\":1,\"seed\":0}").is_err());
    }
}
