//! Layered random instances for the Sherali-Adams gap.
//!
//! Variables live in layers `X_0..X_s` of `n` variables each; variable `v`
//! is in layer `v / n`. Layer `i > 0` collects coordinates with
//! `|z| in ((i-1)/s, i/s]` and has representative bias `t_i = (2i-1)/(2s)`;
//! layer 0 holds exact zeros with `t_0 = 0`.

use std::collections::BTreeMap;

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tree::TreeContext;
use crate::moments::{bias_preimage, BiasVector, CubeDistribution};
use crate::predicate::{sign, Predicate};
use crate::rational::{fmt_q, parse_q, q, qi, to_f64, Q};
use crate::relax::{Constraint, CspInstance};
use crate::rng::stream;
use crate::vanishing::BiasMeasure;
use crate::{Error, Result};

/// Union-bound failure probability used for the reported Chernoff slack.
pub const CHERNOFF_BETA: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct SaGapConfig {
    pub f: Predicate,
    /// Atoms `(weight, z, nu)` with `nu` a distribution of bias `z`.
    pub lambda: BiasMeasure,
    pub epsilon: Q,
    /// Variables per layer.
    pub n: usize,
    /// Constraint density: `m = ceil(density * n)`.
    pub density: f64,
    pub eta: Q,
    pub d_ball: usize,
    pub r: usize,
    pub delta: Q,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct AtomFile {
    weight: String,
    nu: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    predicate: serde_json::Value,
    lambda: Vec<AtomFile>,
    epsilon: String,
    n: usize,
    density: f64,
    eta: String,
    d_ball: usize,
    r: usize,
    delta: String,
    seed: u64,
}

impl SaGapConfig {
    /// Number of intervals `s = ceil(1/epsilon)`.
    pub fn s(&self) -> usize {
        let inv = Q::one() / &self.epsilon;
        inv.ceil().to_integer().to_usize().unwrap_or(usize::MAX)
    }

    pub fn num_vars(&self) -> usize {
        (self.s() + 1) * self.n
    }

    pub fn m(&self) -> usize {
        (self.density * self.n as f64).ceil() as usize
    }

    /// Representative `t_i` of interval `i`.
    pub fn representative(&self, i: usize) -> Q {
        if i == 0 {
            Q::zero()
        } else {
            q(2 * i as i64 - 1, 2 * self.s() as i64)
        }
    }

    /// Interval containing `|z|`.
    pub fn layer_of(&self, z: &Q) -> usize {
        if z.is_zero() {
            return 0;
        }
        let scaled = z.abs() * qi(self.s() as i64);
        scaled.ceil().to_integer().to_usize().unwrap_or(0).clamp(1, self.s())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_positive() || self.epsilon > Q::one() {
            return Err(Error::Invalid(format!("epsilon {} outside (0,1]", self.epsilon)));
        }
        if self.d_ball % 2 != 0 {
            return Err(Error::Invalid(format!("ball radius {} must be even", self.d_ball)));
        }
        if !self.eta.is_positive() || self.eta >= Q::one() {
            return Err(Error::Invalid(format!("eta {} outside (0,1)", self.eta)));
        }
        if &self.delta * &self.delta < self.epsilon || self.delta >= Q::one() {
            return Err(Error::Invalid(format!("delta {} must satisfy delta^2 >= epsilon and delta < 1", self.delta)));
        }
        if self.n == 0 || !(self.density > 0.0) {
            return Err(Error::Invalid("layer size and density must be positive".into()));
        }
        if self.lambda.atoms.is_empty() {
            return Err(Error::Invalid("empty measure".into()));
        }
        if self.lambda.k != self.f.k() {
            return Err(Error::Dimension("measure arity differs from predicate".into()));
        }
        let total: Q = self.lambda.atoms.iter().map(|a| &a.0).sum();
        if !total.is_one() || self.lambda.atoms.iter().any(|a| a.0.is_negative()) {
            return Err(Error::Invalid(format!("measure weights sum to {total}")));
        }
        let cap = Q::one() - &self.delta;
        for (i, (_, z, nu)) in self.lambda.atoms.iter().enumerate() {
            if BiasVector::of(nu) != *z {
                return Err(Error::Invalid(format!("atom {i}: distribution does not have the stated bias")));
            }
            if z.0.iter().any(|b| b.abs() > cap) {
                return Err(Error::Invalid(format!("atom {i}: bias exceeds 1 - delta")));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let f = Predicate::from_value(&file.predicate)?;
        let mut atoms = Vec::new();
        for a in &file.lambda {
            let nu = CubeDistribution::from_map(f.k(), &a.nu)?;
            atoms.push((parse_q(&a.weight)?, BiasVector::of(&nu), nu));
        }
        Ok(Self {
            lambda: BiasMeasure { k: f.k(), atoms },
            f,
            epsilon: parse_q(&file.epsilon)?,
            n: file.n,
            density: file.density,
            eta: parse_q(&file.eta)?,
            d_ball: file.d_ball,
            r: file.r,
            delta: parse_q(&file.delta)?,
            seed: file.seed,
        })
    }

    pub fn to_json(&self) -> String {
        let file = ConfigFile {
            predicate: self.f.to_value(),
            lambda: self.lambda.atoms.iter().map(|(w, _, nu)| AtomFile { weight: fmt_q(w), nu: nu.to_map() }).collect(),
            epsilon: fmt_q(&self.epsilon),
            n: self.n,
            density: self.density,
            eta: fmt_q(&self.eta),
            d_ball: self.d_ball,
            r: self.r,
            delta: fmt_q(&self.delta),
            seed: self.seed,
        };
        serde_json::to_string_pretty(&file).expect("config serializes")
    }
}

/// Scales every atom's bias by `1 - delta`. The new `nu` is a preimage on
/// `f^{-1}(1)` when one exists, else the mixture `(1-delta) nu + delta U`.
pub fn shift_bias_measure(f: &Predicate, m: &BiasMeasure, delta: &Q) -> Result<BiasMeasure> {
    let keep = Q::one() - delta;
    let uniform = CubeDistribution::uniform(m.k);
    let mut atoms = Vec::with_capacity(m.atoms.len());
    for (w, z, nu) in &m.atoms {
        let target = BiasVector(z.0.iter().map(|b| b * &keep).collect());
        let shifted = if BiasVector::of(nu) == target {
            nu.clone()
        } else if let Some(p) = bias_preimage(f, &target)? {
            p
        } else {
            CubeDistribution::mixture(&[(keep.clone(), nu), (delta.clone(), &uniform)])?
        };
        atoms.push((w.clone(), target, shifted));
    }
    Ok(BiasMeasure { k: m.k, atoms })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintProvenance {
    pub atom: usize,
    pub zeta: Vec<Q>,
    pub layers: Vec<usize>,
    pub nu: CubeDistribution,
    pub nu_corrected: CubeDistribution,
    pub l1: Q,
}

#[derive(Clone, Debug)]
pub struct SaGapInstance {
    pub phi: CspInstance,
    pub provenance: Vec<ConstraintProvenance>,
    pub layer_size: usize,
    /// Representatives `t_0..t_s`.
    pub representatives: Vec<Q>,
    pub eta: Q,
    pub d_ball: usize,
    pub r: usize,
}

/// Moves the biases of `nu` to `targets` one coordinate at a time: step `j`
/// mixes in, with weight `tau_j`, the product of the current marginals with
/// bit `j` fixed to the side of the target. Returns the result and the total
/// L1 movement.
pub fn bias_correct_nu(nu: &CubeDistribution, targets: &[Q]) -> Result<(CubeDistribution, Q)> {
    let k = nu.k();
    if targets.len() != k {
        return Err(Error::Dimension(format!("{} targets for arity {k}", targets.len())));
    }
    let mut cur = nu.clone();
    let mut l1 = Q::zero();
    for (j, r) in targets.iter().enumerate() {
        if r.abs() >= Q::one() {
            return Err(Error::Unreachable(fmt_q(r)));
        }
        let b = cur.bias(j);
        if b == *r {
            continue;
        }
        let side = if r > &b { Q::one() } else { -Q::one() };
        let tau = (r - &b) / (&side - &b);
        let biases = cur.biases();
        let fixed_bit = usize::from(side.is_negative());
        let mut product = BTreeMap::new();
        for x in 0..1usize << k {
            if (x >> j) & 1 != fixed_bit {
                continue;
            }
            let mut p = Q::one();
            for (i, bi) in biases.iter().enumerate() {
                if i != j {
                    p *= (Q::one() + qi(sign(x, i) as i64) * bi) / qi(2);
                }
            }
            if !p.is_zero() {
                product.insert(x, p);
            }
        }
        let d = CubeDistribution::new(k, product)?;
        let next = CubeDistribution::mixture(&[(Q::one() - &tau, &cur), (tau.clone(), &d)])?;
        for x in 0..1usize << k {
            l1 += (next.prob(x) - cur.prob(x)).abs();
        }
        cur = next;
    }
    Ok((cur, l1))
}

/// Draws the instance: per constraint, an atom `z`, then for each position a
/// uniform variable of the layer of `|z_j|` with sign `sgn(z_j)` (uniform
/// when `z_j = 0`).
pub fn generate_sa_instance(cfg: &SaGapConfig) -> Result<SaGapInstance> {
    cfg.validate()?;
    let shifted = shift_bias_measure(&cfg.f, &cfg.lambda, &cfg.delta)?;
    let k = cfg.f.k();
    let s = cfg.s();
    let reps: Vec<Q> = (0..=s).map(|i| cfg.representative(i)).collect();
    let weights: Vec<f64> = shifted.atoms.iter().map(|a| to_f64(&a.0)).collect();
    let mut rng = stream(cfg.seed, 0x5a);
    let mut constraints = Vec::with_capacity(cfg.m());
    let mut provenance = Vec::with_capacity(cfg.m());
    let mut corrected: BTreeMap<usize, (CubeDistribution, Q)> = BTreeMap::new();
    for _ in 0..cfg.m() {
        let mut u = rng.random::<f64>();
        let mut atom = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                atom = i;
                break;
            }
            u -= w;
        }
        let (_, z, nu) = &shifted.atoms[atom];
        let layers: Vec<usize> = z.0.iter().map(|b| cfg.layer_of(b)).collect();
        let mut vars = Vec::with_capacity(k);
        let mut signs = Vec::with_capacity(k);
        for (b, &layer) in z.0.iter().zip(&layers) {
            vars.push(layer * cfg.n + rng.random_range(0..cfg.n));
            signs.push(if b.is_negative() || (b.is_zero() && rng.random::<bool>()) { -1 } else { 1 });
        }
        constraints.push(Constraint { vars, signs });
        let (nu_c, l1) = match corrected.get(&atom) {
            Some(hit) => hit.clone(),
            None => {
                let targets: Vec<Q> = z.0.iter().zip(&layers).map(|(b, &i)| qi(b.signum().to_integer().to_i64().unwrap_or(0)) * &reps[i]).collect();
                let out = bias_correct_nu(nu, &targets)?;
                corrected.insert(atom, out.clone());
                out
            }
        };
        provenance.push(ConstraintProvenance { atom, zeta: z.0.clone(), layers, nu: nu.clone(), nu_corrected: nu_c, l1 });
    }
    let phi = CspInstance::new(cfg.f.clone(), cfg.num_vars(), constraints)?;
    Ok(SaGapInstance { phi, provenance, layer_size: cfg.n, representatives: reps, eta: cfg.eta.clone(), d_ball: cfg.d_ball, r: cfg.r })
}

#[derive(Serialize)]
struct ProvenanceRow {
    constraint: usize,
    atom: usize,
    zeta: Vec<String>,
    layers: Vec<usize>,
    nu: BTreeMap<String, String>,
    nu_corrected: BTreeMap<String, String>,
    l1: String,
}

impl SaGapInstance {
    pub fn layer(&self, v: usize) -> usize {
        v / self.layer_size
    }

    /// Keeps the constraints whose index is not in `removed`.
    pub fn without(&self, removed: &[usize]) -> Result<Self> {
        let removed: std::collections::BTreeSet<usize> = removed.iter().copied().collect();
        let keep: Vec<usize> = (0..self.phi.m()).filter(|i| !removed.contains(i)).collect();
        let mut out = self.clone();
        out.phi = CspInstance::new(
            self.phi.f.clone(),
            self.phi.n,
            keep.iter().map(|&i| self.phi.constraints[i].clone()).collect(),
        )?;
        out.provenance = keep.iter().map(|&i| self.provenance[i].clone()).collect();
        Ok(out)
    }

    /// `U_C = (1-eta) nu'(C) + eta U_k` moved into variable space over `S_C`.
    pub fn smoothed(&self, c: usize) -> Result<Vec<Q>> {
        let con = &self.phi.constraints[c];
        let support = con.support();
        if support.len() != con.vars.len() {
            return Err(Error::Invalid(format!("constraint {c} repeats a variable")));
        }
        let k = con.vars.len();
        let nu = &self.provenance[c].nu_corrected;
        let unif = Q::one() / qi(1 << k);
        let keep = Q::one() - &self.eta;
        Ok((0..1usize << k)
            .map(|alpha| {
                let lit = con.literal_index(&support, alpha);
                &keep * nu.prob(lit) + &self.eta * &unif
            })
            .collect())
    }

    /// Probability `x_v = +1` under the tree process: bias `(1-eta) t_layer`.
    pub fn p_plus(&self, v: usize) -> Q {
        (Q::one() + (Q::one() - &self.eta) * &self.representatives[self.layer(v)]) / qi(2)
    }

    pub fn tree_context(&self) -> Result<TreeContext> {
        let u = (0..self.phi.m()).map(|c| self.smoothed(c)).collect::<Result<Vec<_>>>()?;
        let p = (0..self.phi.n).map(|v| self.p_plus(v)).collect();
        TreeContext::new(self.phi.clone(), u, p, self.d_ball)
    }

    pub fn provenance_json(&self) -> String {
        let rows: Vec<ProvenanceRow> = self
            .provenance
            .iter()
            .enumerate()
            .map(|(i, p)| ProvenanceRow {
                constraint: i,
                atom: p.atom,
                zeta: p.zeta.iter().map(fmt_q).collect(),
                layers: p.layers.clone(),
                nu: p.nu.to_map(),
                nu_corrected: p.nu_corrected.to_map(),
                l1: fmt_q(&p.l1),
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("provenance serializes")
    }

    /// Variables that occur in some constraint, sorted.
    pub fn active_variables(&self) -> Vec<usize> {
        let mut used = vec![false; self.phi.n];
        for c in &self.phi.constraints {
            for &v in &c.vars {
                used[v] = true;
            }
        }
        (0..self.phi.n).filter(|&v| used[v]).collect()
    }

    /// The instance on active variables only, renumbered in order.
    pub fn compact(&self) -> Result<(CspInstance, Vec<usize>)> {
        let active = self.active_variables();
        let cons = self
            .phi
            .constraints
            .iter()
            .map(|c| Constraint {
                vars: c.vars.iter().map(|v| active.binary_search(v).unwrap()).collect(),
                signs: c.signs.clone(),
            })
            .collect();
        Ok((CspInstance::new(self.phi.f.clone(), active.len(), cons)?, active))
    }
}

/// Slack `t` with `P(some assignment of N variables deviates by > t) <= beta`
/// for `m` independent constraints: `sqrt((N ln 2 + ln(2/beta)) / (2m))`.
pub fn chernoff_slack(num_vars: usize, m: usize, beta: f64) -> f64 {
    ((num_vars as f64 * std::f64::consts::LN_2 + (2.0 / beta).ln()) / (2.0 * m as f64)).sqrt()
}

/// Averages of a fixed assignment over each layer.
fn layer_averages(cfg: &SaGapConfig, psi: &[i8]) -> Result<Vec<Q>> {
    if psi.len() != cfg.num_vars() {
        return Err(Error::Dimension(format!("assignment has {} values for {} variables", psi.len(), cfg.num_vars())));
    }
    Ok(psi.chunks(cfg.n).map(|c| q(c.iter().map(|&x| x as i64).sum(), cfg.n as i64)).collect())
}

/// Expected satisfied fraction of one sampled constraint under the fixed
/// assignment `psi`, from the Fourier expansion: given the atom, position
/// `j` contributes `sgn(z_j) * avg_{layer}(psi)` independently.
pub fn expected_sat_tildepsi(cfg: &SaGapConfig, psi: &[i8]) -> Result<Q> {
    let avg = layer_averages(cfg, psi)?;
    let shifted = shift_bias_measure(&cfg.f, &cfg.lambda, &cfg.delta)?;
    let spec = cfg.f.fourier();
    let mut total = spec.get(0).clone();
    for (w, z, _) in &shifted.atoms {
        let lit: Vec<Q> = z.0.iter().map(|b| qi(b.signum().to_integer().to_i64().unwrap_or(0)) * &avg[cfg.layer_of(b)]).collect();
        for s in spec.nonconstant_support() {
            let mut term = spec.get(s) * w;
            for (j, l) in lit.iter().enumerate() {
                if (s >> j) & 1 == 1 {
                    term *= l;
                }
            }
            total += term;
        }
    }
    Ok(total)
}

/// Same quantity by enumerating literal outcomes with their independent
/// probabilities `(1 + mean)/2`.
pub fn expected_sat_direct(cfg: &SaGapConfig, psi: &[i8]) -> Result<Q> {
    let avg = layer_averages(cfg, psi)?;
    let shifted = shift_bias_measure(&cfg.f, &cfg.lambda, &cfg.delta)?;
    let mut total = Q::zero();
    for (w, z, _) in &shifted.atoms {
        let plus: Vec<Q> = z
            .0
            .iter()
            .map(|b| {
                let mean = if b.is_zero() {
                    Q::zero()
                } else if b.is_negative() {
                    -avg[cfg.layer_of(b)].clone()
                } else {
                    avg[cfg.layer_of(b)].clone()
                };
                (Q::one() + mean) / qi(2)
            })
            .collect();
        for x in cfg.f.satisfying() {
            let mut p = w.clone();
            for (j, pj) in plus.iter().enumerate() {
                p *= if (x >> j) & 1 == 0 { pj.clone() } else { Q::one() - pj };
            }
            total += p;
        }
    }
    Ok(total)
}

/// Closed-open endpoints `(lo, hi]` of interval `i`; `I_0` is the point 0.
pub fn interval_bounds(cfg: &SaGapConfig, i: usize) -> (Q, Q) {
    let s = cfg.s() as i64;
    if i == 0 {
        (Q::zero(), Q::zero())
    } else {
        (q(i as i64 - 1, s), q(i as i64, s))
    }
}

/// Layers touched by the instance, ascending.
pub fn layers_used(inst: &SaGapInstance) -> Vec<usize> {
    let mut out: Vec<usize> = inst.active_variables().iter().map(|&v| inst.layer(v)).collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relax::{brute_force_opt, correct_local_distributions, sa_objective, verify_consistency};
    use proptest::prelude::*;

    fn parity_cfg(n: usize, density: f64, seed: u64) -> SaGapConfig {
        let f = Predicate::parity(3);
        let nu = CubeDistribution::uniform_on(3, &f.satisfying()).unwrap();
        SaGapConfig {
            lambda: BiasMeasure { k: 3, atoms: vec![(Q::one(), BiasVector::of(&nu), nu)] },
            f,
            epsilon: q(1, 5),
            n,
            density,
            eta: q(3, 20),
            d_ball: 2,
            r: 3,
            delta: q(1, 2),
            seed,
        }
    }

    fn biased_cfg() -> SaGapConfig {
        let f = Predicate::or(3);
        let nu = CubeDistribution::uniform_on(3, &[1, 2, 4]).unwrap();
        let mut cfg = parity_cfg(5, 2.0, 3);
        cfg.lambda = BiasMeasure { k: 3, atoms: vec![(Q::one(), BiasVector::of(&nu), nu)] };
        cfg.f = f;
        cfg
    }

    #[test]
    fn validation() {
        let mut cfg = parity_cfg(4, 1.0, 0);
        assert!(cfg.validate().is_ok());
        cfg.d_ball = 3;
        assert!(cfg.validate().is_err());
        let mut cfg = parity_cfg(4, 1.0, 0);
        cfg.delta = q(1, 5);
        assert!(cfg.validate().is_err());
        let mut cfg = parity_cfg(4, 1.0, 0);
        cfg.lambda.atoms.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn layers_and_representatives() {
        let cfg = parity_cfg(4, 1.0, 0);
        assert_eq!(cfg.s(), 5);
        assert_eq!(cfg.layer_of(&Q::zero()), 0);
        assert_eq!(cfg.layer_of(&q(1, 5)), 1);
        assert_eq!(cfg.layer_of(&q(-21, 100)), 2);
        assert_eq!(cfg.layer_of(&Q::one()), 5);
        for i in 1..=5 {
            let (lo, hi) = interval_bounds(&cfg, i);
            let t = cfg.representative(i);
            assert!(lo < t && t <= hi);
        }
    }

    #[test]
    fn zero_bias_lands_in_layer_zero() {
        let inst = generate_sa_instance(&parity_cfg(6, 3.0, 11)).unwrap();
        assert_eq!(inst.phi.m(), 18);
        assert!(inst.phi.constraints.iter().flat_map(|c| &c.vars).all(|&v| v < 6));
        assert_eq!(layers_used(&inst), vec![0]);
        assert!(inst.provenance.iter().all(|p| p.l1.is_zero()));
    }

    #[test]
    fn biased_atoms_follow_their_layers() {
        let cfg = biased_cfg();
        let inst = generate_sa_instance(&cfg).unwrap();
        for (c, p) in inst.phi.constraints.iter().zip(&inst.provenance) {
            for (j, &v) in c.vars.iter().enumerate() {
                assert_eq!(inst.layer(v), p.layers[j]);
                assert_eq!(c.signs[j] < 0, p.zeta[j].is_negative());
            }
            let want: Vec<Q> =
                p.zeta.iter().zip(&p.layers).map(|(z, &i)| if z.is_negative() { -inst.representatives[i].clone() } else { inst.representatives[i].clone() }).collect();
            assert_eq!(p.nu_corrected.biases(), want);
        }
    }

    #[test]
    fn bias_correction_hits_targets() {
        let nu = CubeDistribution::uniform_on(3, &[0, 3, 5, 6]).unwrap();
        let (same, l1) = bias_correct_nu(&nu, &[Q::zero(), Q::zero(), Q::zero()]).unwrap();
        assert_eq!(same, nu);
        assert!(l1.is_zero());
        let targets = [q(1, 10), q(-1, 5), Q::zero()];
        let (out, l1) = bias_correct_nu(&nu, &targets).unwrap();
        assert_eq!(out.biases(), targets.to_vec());
        let direct: Q = (0..8).map(|x| (out.prob(x) - nu.prob(x)).abs()).sum();
        assert!(direct <= l1);
        assert!(bias_correct_nu(&nu, &[Q::one(), Q::zero(), Q::zero()]).is_err());
    }

    #[test]
    fn single_coordinate_shift_moves_at_most_twice_tau() {
        let nu = CubeDistribution::uniform(2);
        let (out, l1) = bias_correct_nu(&nu, &[q(1, 5), Q::zero()]).unwrap();
        assert_eq!(out.bias(0), q(1, 5));
        // tau = 1/5 and the fixed-bit product is at L1 distance 1 from uniform.
        assert_eq!(l1, q(1, 5));
        assert!(l1 <= q(2, 5));
    }

    #[test]
    fn tildepsi_matches_direct_enumeration() {
        let cfg = biased_cfg();
        let mut rng = stream(5, 5);
        for _ in 0..20 {
            let psi: Vec<i8> = (0..cfg.num_vars()).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
            assert_eq!(expected_sat_tildepsi(&cfg, &psi).unwrap(), expected_sat_direct(&cfg, &psi).unwrap());
        }
        let cfg = parity_cfg(4, 1.0, 0);
        let psi = vec![1i8; cfg.num_vars()];
        assert_eq!(expected_sat_tildepsi(&cfg, &psi).unwrap(), q(1, 2));
    }

    #[test]
    fn layer_marginal_is_shrunk_representative() {
        let cfg = biased_cfg();
        let inst = generate_sa_instance(&cfg).unwrap();
        let (_, report) = super::super::prune_girth(&inst.phi, 6);
        let inst = inst.without(&report.removed).unwrap();
        let ctx = inst.tree_context().unwrap();
        for v in inst.active_variables() {
            let d = ctx.local_distribution(&[v]).unwrap();
            let bias = &d[0] - &d[1];
            assert_eq!(bias, (Q::one() - &inst.eta) * &inst.representatives[inst.layer(v)]);
        }
        for c in 0..inst.phi.m() {
            let s = inst.phi.constraints[c].support();
            assert_eq!(ctx.local_distribution(&s).unwrap(), inst.smoothed(c).unwrap());
        }
    }

    #[test]
    fn sparse_parity_pipeline_is_consistent() {
        let inst = generate_sa_instance(&parity_cfg(40, 0.5, 9)).unwrap();
        let (_, report) = super::super::prune_girth(&inst.phi, 6);
        let inst = inst.without(&report.removed).unwrap();
        let ctx = inst.tree_context().unwrap();
        let subsets: Vec<Vec<usize>> = crate::relax::constraint_subsets(&inst.phi).into_iter().collect();
        let fam = super::super::assemble_family(&ctx, &subsets, 3).unwrap();
        assert!(verify_consistency(&fam).exact);
        let (fixed, rep) = correct_local_distributions(&fam).unwrap();
        assert!(rep.already_consistent);
        assert_eq!(sa_objective(&inst.phi, &fixed).unwrap(), q(1, 1) - &inst.eta + &inst.eta / qi(2));
    }

    #[test]
    fn dense_parity_soundness() {
        let inst = generate_sa_instance(&parity_cfg(12, 8.0, 2)).unwrap();
        let (phi, active) = inst.compact().unwrap();
        let bf = brute_force_opt(&phi).unwrap();
        let slack = chernoff_slack(active.len(), phi.m(), CHERNOFF_BETA);
        assert!(to_f64(&bf.opt) <= 0.5 + 0.2 + slack);
    }

    #[test]
    fn config_round_trips() {
        let cfg = biased_cfg();
        let back = SaGapConfig::parse(&cfg.to_json()).unwrap();
        assert_eq!(back.to_json(), cfg.to_json());
    }

    proptest! {
        #[test]
        fn correction_is_exact(a in -9i64..=9, b in -9i64..=9, w in 1i64..=4) {
            let nu = CubeDistribution::new(2, [(0usize, q(w, 8)), (1, q(4 - w, 8)), (2, q(2, 8)), (3, q(2, 8))].into_iter().collect()).unwrap();
            let targets = [q(a, 10), q(b, 10)];
            let (out, _) = bias_correct_nu(&nu, &targets).unwrap();
            prop_assert_eq!(out.biases(), targets.to_vec());
        }
    }
}
