//! Finite-support vanishing measures on the moment body and on its bias
//! projection.
//!
//! For an atomic measure, the level-`t` signed measure is a finite sum of
//! point masses at image matrices `zeta_{S,pi,b}`; it vanishes iff the signed
//! coefficients cancel within every class of exactly equal images. Each
//! `(atom, S, pi, b)` term carries
//! `weight * fhat(S) * prod(b) / (C(k,t) * t! * 2^t)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::combin::{coords, permutations, sign_vectors};
use crate::gaussian::GaussianProcessSpec;
use crate::lp::{self, LinearProgram, LpStatus, Relation};
use crate::moments::{
    moments_of, noise_shift, pairwise_independent_point, restrict_permute_sign, BiasVector, CubeDistribution,
    MomentMatrix,
};
use crate::predicate::{assignment_string, FourierSpectrum, Predicate};
use crate::rational::{binom, factorial, fmt_q, parse_q, q, to_f64, Q};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub weight: Q,
    pub nu: CubeDistribution,
    pub zeta: MomentMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMeasure {
    pub k: usize,
    pub atoms: Vec<Atom>,
}

impl FiniteMeasure {
    pub fn new(k: usize, parts: Vec<(Q, CubeDistribution)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Invalid("measure has no atoms".into()));
        }
        let mut total = Q::zero();
        let mut atoms = Vec::with_capacity(parts.len());
        for (weight, nu) in parts {
            if weight.is_negative() {
                return Err(Error::Invalid(format!("negative atom weight {weight}")));
            }
            if nu.k() != k {
                return Err(Error::Dimension("atom arity differs from measure".into()));
            }
            total += &weight;
            let zeta = moments_of(&nu);
            atoms.push(Atom { weight, nu, zeta });
        }
        if !total.is_one() {
            return Err(Error::Invalid(format!("atom weights sum to {total}")));
        }
        Ok(Self { k, atoms })
    }

    pub fn point(nu: CubeDistribution) -> Self {
        let k = nu.k();
        Self::new(k, vec![(Q::one(), nu)]).expect("single atom")
    }

    pub fn check_support(&self, f: &Predicate) -> Result<()> {
        for a in &self.atoms {
            if let Some(x) = a.nu.unsupported_point(f) {
                return Err(Error::Unsupported(assignment_string(x, f.k())));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct AtomFile {
    weight: String,
    distribution: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct MeasureFile {
    predicate: serde_json::Value,
    atoms: Vec<AtomFile>,
}

/// Parses a measure file; atoms must be supported on the predicate's
/// satisfying set.
pub fn parse_measure(text: &str) -> Result<(Predicate, FiniteMeasure)> {
    let file: MeasureFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let f = Predicate::from_value(&file.predicate)?;
    let parts = file
        .atoms
        .iter()
        .map(|a| Ok((parse_q(&a.weight)?, CubeDistribution::from_map(f.k(), &a.distribution)?)))
        .collect::<Result<Vec<_>>>()?;
    let m = FiniteMeasure::new(f.k(), parts)?;
    m.check_support(&f)?;
    Ok((f, m))
}

pub fn measure_to_json(f: &Predicate, m: &FiniteMeasure) -> String {
    let file = MeasureFile {
        predicate: f.to_value(),
        atoms: m.atoms.iter().map(|a| AtomFile { weight: fmt_q(&a.weight), distribution: a.nu.to_map() }).collect(),
    };
    serde_json::to_string_pretty(&file).expect("measure serializes")
}

/// Accumulated coefficients of the level-`t` signed measure, keyed by image.
#[derive(Clone, Debug)]
pub struct SignedAtomGroup<K> {
    pub t: usize,
    pub groups: HashMap<K, Q>,
}

impl<K> SignedAtomGroup<K> {
    pub fn is_zero(&self) -> bool {
        self.groups.values().all(|c| c.is_zero())
    }

    pub fn nonzero(&self) -> usize {
        self.groups.values().filter(|c| !c.is_zero()).count()
    }
}

fn normalizer(k: usize, t: usize) -> Q {
    q(1, (binom(k, t) * factorial(t) * (1u64 << t)) as i64)
}

fn check_level(k: usize, t: usize) -> Result<()> {
    if t == 0 || t > k {
        return Err(Error::OutOfRange(format!("level t={t} outside 1..={k}")));
    }
    Ok(())
}

/// Unit-weight level-`t` coefficients for one atom, with images produced by `image`.
fn level_terms<K: Eq + Hash>(
    k: usize,
    t: usize,
    spectrum: &FourierSpectrum,
    mut image: impl FnMut(&[usize], &[usize], &[i8]) -> K,
) -> HashMap<K, Q> {
    let norm = normalizer(k, t);
    let perms = permutations(t);
    let signs = sign_vectors(t);
    let mut out: HashMap<K, Q> = HashMap::new();
    for s in spectrum.level(t) {
        let sc = coords(s);
        let base = spectrum.get(s) * &norm;
        for pi in &perms {
            for b in &signs {
                let c = if b.iter().filter(|&&v| v < 0).count() % 2 == 0 { base.clone() } else { -&base };
                *out.entry(image(&sc, pi, b)).or_insert_with(Q::zero) += c;
            }
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn matrix_terms(zeta: &MomentMatrix, t: usize, spectrum: &FourierSpectrum) -> HashMap<MomentMatrix, Q> {
    level_terms(zeta.k(), t, spectrum, |s, pi, b| {
        restrict_permute_sign(zeta, s, pi, b).expect("indices in range")
    })
}

fn bias_terms(z: &BiasVector, t: usize, spectrum: &FourierSpectrum) -> HashMap<Vec<Q>, Q> {
    level_terms(z.0.len(), t, spectrum, |s, pi, b| {
        pi.iter().zip(b).map(|(&p, &bi)| if bi > 0 { z.0[s[p]].clone() } else { -&z.0[s[p]] }).collect()
    })
}

pub fn signed_projection_groups(
    measure: &FiniteMeasure,
    t: usize,
    spectrum: &FourierSpectrum,
) -> Result<SignedAtomGroup<MomentMatrix>> {
    check_level(measure.k, t)?;
    let mut groups: HashMap<MomentMatrix, Q> = HashMap::new();
    for a in &measure.atoms {
        for (img, c) in matrix_terms(&a.zeta, t, spectrum) {
            *groups.entry(img).or_insert_with(Q::zero) += &a.weight * c;
        }
    }
    Ok(SignedAtomGroup { t, groups })
}

/// True iff every level's signed measure is identically zero.
pub fn is_vanishing(measure: &FiniteMeasure, spectrum: &FourierSpectrum) -> Result<bool> {
    for t in 1..=measure.k {
        if !signed_projection_groups(measure, t, spectrum)?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The weight LP for a support, together with the level of each row.
#[derive(Clone, Debug)]
pub struct VanishingSystem {
    pub lp: LinearProgram<Q>,
    pub row_levels: Vec<usize>,
}

fn build_system<K: Eq + Hash + Clone + Ord>(
    k: usize,
    terms: impl Fn(usize, usize) -> HashMap<K, Q>,
    n: usize,
) -> VanishingSystem {
    let mut lp = LinearProgram::<Q>::new(n);
    let mut row_levels = vec![0];
    lp.add((0..n).map(|a| (a, Q::one())).collect(), Relation::Eq, Q::one());
    for t in 1..=k {
        let mut rows: BTreeMap<K, Vec<(usize, Q)>> = BTreeMap::new();
        for a in 0..n {
            for (img, c) in terms(a, t) {
                rows.entry(img).or_default().push((a, c));
            }
        }
        for (_, coeffs) in rows {
            lp.add(coeffs, Relation::Eq, Q::zero());
            row_levels.push(t);
        }
    }
    VanishingSystem { lp, row_levels }
}

/// Outcome of a vanishing-weight LP.
#[derive(Clone, Debug)]
pub struct VanishingOutcome<M> {
    pub measure: Option<M>,
    /// Row multipliers proving that no weights on this support vanish.
    pub farkas: Option<Vec<Q>>,
    pub system: VanishingSystem,
    /// Levels contributing at least one nontrivial row.
    pub active_levels: Vec<usize>,
}

impl<M> VanishingOutcome<M> {
    pub fn certificate_verified(&self) -> Option<bool> {
        self.farkas.as_ref().map(|y| lp::verify_farkas(&self.system.lp, y).is_ok())
    }

    /// Levels whose constraints alone (with normalization) are infeasible.
    pub fn infeasible_levels(&self) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for &t in &self.active_levels {
            let mut sub = LinearProgram::<Q>::new(self.system.lp.num_vars);
            for (row, &lvl) in self.system.lp.constraints.iter().zip(&self.system.row_levels) {
                if lvl == 0 || lvl == t {
                    sub.constraints.push(row.clone());
                }
            }
            if lp::solve(&sub)?.status == LpStatus::Infeasible {
                out.push(t);
            }
        }
        Ok(out)
    }
}

fn active_levels(system: &VanishingSystem) -> Vec<usize> {
    let set: BTreeSet<usize> = system.row_levels.iter().copied().filter(|&t| t > 0).collect();
    set.into_iter().collect()
}

fn check_support(f: &Predicate, support: &[CubeDistribution]) -> Result<()> {
    if support.is_empty() {
        return Err(Error::Invalid("empty support".into()));
    }
    for nu in support {
        if nu.k() != f.k() {
            return Err(Error::Dimension("support arity differs from predicate".into()));
        }
        if let Some(x) = nu.unsupported_point(f) {
            return Err(Error::Unsupported(assignment_string(x, f.k())));
        }
    }
    Ok(())
}

/// Exact LP over atom weights on `support` for a vanishing measure.
pub fn vanishing_feasible(f: &Predicate, support: &[CubeDistribution]) -> Result<VanishingOutcome<FiniteMeasure>> {
    check_support(f, support)?;
    let spectrum = f.fourier();
    let zetas: Vec<MomentMatrix> = support.iter().map(moments_of).collect();
    let system = build_system(f.k(), |a, t| matrix_terms(&zetas[a], t, &spectrum), support.len());
    let sol = lp::solve(&system.lp)?;
    let active = active_levels(&system);
    let measure = match sol.status {
        LpStatus::Optimal => {
            let parts = sol.x.iter().cloned().zip(support.iter().cloned()).filter(|(w, _)| !w.is_zero()).collect();
            Some(FiniteMeasure::new(f.k(), parts)?)
        }
        _ => None,
    };
    Ok(VanishingOutcome { measure, farkas: sol.farkas, system, active_levels: active })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    PairwisePoint,
    SatisfyingPointMasses,
    SymmetrizedOrbits(Vec<CubeDistribution>),
    Custom(Vec<CubeDistribution>),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::PairwisePoint => "pairwise_point",
            Strategy::SatisfyingPointMasses => "satisfying_point_masses",
            Strategy::SymmetrizedOrbits(_) => "symmetrized_orbits",
            Strategy::Custom(_) => "custom",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchReport {
    pub strategy: String,
    pub support_size: usize,
    pub found: bool,
    pub active_levels: Vec<usize>,
    pub infeasible_levels: Vec<usize>,
    pub certificate_verified: Option<bool>,
    /// Orbit images dropped because they leave the satisfying set.
    pub dropped: usize,
    pub note: String,
}

/// Closure of `seeds` under coordinate permutations and global negation,
/// keeping only images supported on `f^{-1}(1)`.
pub fn symmetrize(f: &Predicate, seeds: &[CubeDistribution]) -> (Vec<CubeDistribution>, usize) {
    let k = f.k();
    let full = (1usize << k) - 1;
    let mut seen = BTreeSet::new();
    let mut dropped = 0;
    for nu in seeds {
        for perm in permutations(k) {
            let p = nu.permuted(&perm);
            for img in [p.clone(), p.twisted(full)] {
                if img.unsupported_point(f).is_some() {
                    dropped += 1;
                } else {
                    seen.insert(img);
                }
            }
        }
    }
    (seen.into_iter().collect(), dropped)
}

/// Builds a support per `strategy` and solves the weight LP. An empty result
/// only means "not found under this strategy".
pub fn find_vanishing_measure(f: &Predicate, strategy: &Strategy) -> Result<(Option<FiniteMeasure>, SearchReport)> {
    let mut dropped = 0;
    let support = match strategy {
        Strategy::PairwisePoint => match pairwise_independent_point(f)? {
            Some(nu) => vec![nu],
            None => {
                let report = SearchReport {
                    strategy: strategy.name().into(),
                    support_size: 0,
                    found: false,
                    active_levels: vec![],
                    infeasible_levels: vec![],
                    certificate_verified: None,
                    dropped: 0,
                    note: "no pairwise independent distribution on the satisfying set".into(),
                };
                return Ok((None, report));
            }
        },
        Strategy::SatisfyingPointMasses => {
            f.satisfying().into_iter().map(|x| CubeDistribution::point_mass(f.k(), x)).collect()
        }
        Strategy::SymmetrizedOrbits(seeds) => {
            let (s, d) = symmetrize(f, seeds);
            dropped = d;
            s
        }
        Strategy::Custom(s) => s.clone(),
    };
    let out = vanishing_feasible(f, &support)?;
    let found = out.measure.is_some();
    let report = SearchReport {
        strategy: strategy.name().into(),
        support_size: support.len(),
        found,
        active_levels: out.active_levels.clone(),
        infeasible_levels: if found { vec![] } else { out.infeasible_levels()? },
        certificate_verified: out.certificate_verified(),
        dropped,
        note: if found { "vanishing measure found".into() } else { "not found under this strategy".into() },
    };
    Ok((out.measure, report))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharlpSymmetric {
    pub member: bool,
    /// Satisfying assignment with the largest coordinate sum.
    pub x: usize,
    /// Satisfying assignment with the smallest coordinate sum.
    pub y: usize,
    pub max_sum: i64,
    pub min_sum: i64,
}

fn coord_sum(x: usize, k: usize) -> i64 {
    k as i64 - 2 * x.count_ones() as i64
}

/// For symmetric `f`: member iff some satisfying `x` has `sum x >= 0` and some
/// satisfying `y` has `sum y <= 0`. Witnesses are the lexicographically first
/// (`+` before `-`) extreme-sum assignments.
pub fn charlp_symmetric_check(f: &Predicate) -> Result<CharlpSymmetric> {
    if !f.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let k = f.k();
    let mut sat = f.satisfying();
    if sat.is_empty() {
        return Err(Error::Predicate("no satisfying assignment".into()));
    }
    sat.sort_by_key(|&x| assignment_string(x, k));
    let x = *sat.iter().max_by_key(|&&x| (coord_sum(x, k), std::cmp::Reverse(assignment_string(x, k)))).unwrap();
    let y = *sat.iter().min_by_key(|&&x| (coord_sum(x, k), assignment_string(x, k))).unwrap();
    let (max_sum, min_sum) = (coord_sum(x, k), coord_sum(y, k));
    Ok(CharlpSymmetric { member: max_sum >= 0 && min_sum <= 0, x, y, max_sum, min_sum })
}

/// A vanishing measure over bias vectors, each atom with a preimage distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasMeasure {
    pub k: usize,
    pub atoms: Vec<(Q, BiasVector, CubeDistribution)>,
}

impl BiasMeasure {
    pub fn is_vanishing(&self, spectrum: &FourierSpectrum) -> bool {
        (1..=self.k).all(|t| {
            let mut groups: HashMap<Vec<Q>, Q> = HashMap::new();
            for (w, z, _) in &self.atoms {
                for (img, c) in bias_terms(z, t, spectrum) {
                    *groups.entry(img).or_insert_with(Q::zero) += w * c;
                }
            }
            groups.values().all(|c| c.is_zero())
        })
    }

    pub fn to_json(&self, f: &Predicate) -> String {
        let m = FiniteMeasure::new(self.k, self.atoms.iter().map(|(w, _, nu)| (w.clone(), nu.clone())).collect())
            .expect("weights form a probability vector");
        measure_to_json(f, &m)
    }
}

/// Same LP as [`vanishing_feasible`] with atoms projected to bias vectors.
pub fn charlp_general_search(f: &Predicate, support: &[CubeDistribution]) -> Result<VanishingOutcome<BiasMeasure>> {
    check_support(f, support)?;
    let spectrum = f.fourier();
    let biases: Vec<BiasVector> = support.iter().map(BiasVector::of).collect();
    let system = build_system(f.k(), |a, t| bias_terms(&biases[a], t, &spectrum), support.len());
    let sol = lp::solve(&system.lp)?;
    let active = active_levels(&system);
    let measure = match sol.status {
        LpStatus::Optimal => Some(BiasMeasure {
            k: f.k(),
            atoms: sol
                .x
                .iter()
                .zip(biases.iter().zip(support))
                .filter(|(w, _)| !w.is_zero())
                .map(|(w, (z, nu))| (w.clone(), z.clone(), nu.clone()))
                .collect(),
        }),
        _ => None,
    };
    Ok(VanishingOutcome { measure, farkas: sol.farkas, system, active_levels: active })
}

/// Support for bias-measure searches on symmetric predicates: all point
/// masses, the uniform distribution on each satisfying Hamming-weight class
/// (constant bias), and for each pair of classes with biases of opposite sign
/// the mixture whose bias is exactly zero.
pub fn charlp_symmetric_support(f: &Predicate) -> Vec<CubeDistribution> {
    let k = f.k();
    let mut out: Vec<CubeDistribution> =
        f.satisfying().into_iter().map(|x| CubeDistribution::point_mass(k, x)).collect();
    let mut classes: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for x in f.satisfying() {
        classes.entry(x.count_ones()).or_default().push(x);
    }
    let orbit: Vec<(Q, CubeDistribution)> = classes
        .values()
        .map(|xs| (q(coord_sum(xs[0], k), k as i64), CubeDistribution::uniform_on(k, xs).expect("nonempty")))
        .collect();
    for (c, nu) in &orbit {
        if !out.contains(nu) {
            out.push(nu.clone());
        }
        let _ = c;
    }
    for (cx, nx) in &orbit {
        for (cy, ny) in &orbit {
            if cx.is_positive() && cy.is_negative() {
                let lam = -cy / (cx - cy);
                let mix = CubeDistribution::mixture(&[(lam.clone(), nx), (Q::one() - &lam, ny)]).expect("convex");
                out.push(mix);
            }
        }
    }
    out
}

/// `theta^{(t)}(points) = sum_{|S|=t} E_pi E_b E_atoms[fhat(S) prod(b) gamma_{t,d}(points; zeta_{S,pi,b})]`
/// with every atom noise-shifted by `delta` first.
pub fn theta_eval(measure: &FiniteMeasure, spectrum: &FourierSpectrum, delta: &Q, t: usize, points: &[Vec<f64>]) -> Result<f64> {
    check_level(measure.k, t)?;
    if points.len() != t {
        return Err(Error::Dimension(format!("{} points for level {t}", points.len())));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::Dimension("points must share a positive dimension".into()));
    }
    let level = spectrum.level(t);
    if level.is_empty() {
        return Ok(0.0);
    }
    let perms = permutations(t);
    let signs = sign_vectors(t);
    let scale = 1.0 / (perms.len() * signs.len()) as f64;
    let mut total = 0.0;
    for a in &measure.atoms {
        let shifted = noise_shift(&a.zeta, delta)?;
        let w = to_f64(&a.weight);
        for &s in &level {
            let sc = coords(s);
            let fs = to_f64(spectrum.get(s));
            let mut acc = 0.0;
            for pi in &perms {
                for b in &signs {
                    let img = restrict_permute_sign(&shifted, &sc, pi, b)?;
                    let dens = GaussianProcessSpec::from_moments(&img, d)?.density(points)?;
                    let sb = if b.iter().filter(|&&v| v < 0).count() % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sb * dens;
                }
            }
            total += w * fs * acc * scale;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng as _;

    fn parity_point() -> FiniteMeasure {
        let f = Predicate::parity(3);
        FiniteMeasure::point(CubeDistribution::uniform_on(3, &f.satisfying()).unwrap())
    }

    #[test]
    fn identity_point_cancels() {
        let spec = Predicate::parity(3).fourier();
        let m = parity_point();
        for t in 1..=3 {
            assert!(signed_projection_groups(&m, t, &spec).unwrap().is_zero());
        }
        assert!(signed_projection_groups(&m, 0, &spec).is_err());
        assert!(signed_projection_groups(&m, 4, &spec).is_err());
    }

    #[test]
    fn constant_predicate_cancels() {
        let f = Predicate::constant_one(2);
        let m = FiniteMeasure::point(CubeDistribution::point_mass(2, 0));
        assert!(is_vanishing(&m, &f.fourier()).unwrap());
    }

    #[test]
    fn all_plus_point_for_parity() {
        let spec = Predicate::parity(3).fourier();
        let m = FiniteMeasure::point(CubeDistribution::point_mass(3, 0));
        assert!(signed_projection_groups(&m, 1, &spec).unwrap().is_zero());
        let g3 = signed_projection_groups(&m, 3, &spec).unwrap();
        assert!(!g3.is_zero());
        // Hand expansion: image under b has all entries b_i b_j and coefficient
        // prod(b)/(1*6*8) * 6 perms * 1/2 = prod(b)/16 for each of 8 images.
        assert_eq!(g3.nonzero(), 8);
        assert!(g3.groups.values().all(|c| c.abs() == q(1, 16)));
    }

    #[test]
    fn feasibility_examples() {
        let f = Predicate::parity(3);
        let nu = CubeDistribution::uniform_on(3, &f.satisfying()).unwrap();
        let out = vanishing_feasible(&f, &[nu]).unwrap();
        let m = out.measure.unwrap();
        assert!(is_vanishing(&m, &f.fourier()).unwrap());

        let maj = Predicate::majority(3);
        let pm: Vec<_> = maj.satisfying().into_iter().map(|x| CubeDistribution::point_mass(3, x)).collect();
        let out = vanishing_feasible(&maj, &pm).unwrap();
        assert!(out.measure.is_none());
        assert_eq!(out.certificate_verified(), Some(true));
        assert_eq!(out.infeasible_levels().unwrap(), vec![1]);

        assert!(vanishing_feasible(&f, &[]).is_err());
        let off = CubeDistribution::point_mass(3, 1);
        assert!(matches!(vanishing_feasible(&f, &[off]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn two_lin_has_no_vanishing_measure_on_the_moment_body() {
        // Every distribution on {++,--} has zeta(1,2) = 1, so level-2 images
        // with correlation +1 only ever receive positive coefficients.
        let f = Predicate::two_lin();
        let (m, report) = find_vanishing_measure(&f, &Strategy::SatisfyingPointMasses).unwrap();
        assert!(m.is_none());
        assert_eq!(report.certificate_verified, Some(true));
        let uni = CubeDistribution::uniform_on(2, &[0, 3]).unwrap();
        assert!(vanishing_feasible(&f, &[uni]).unwrap().measure.is_none());
    }

    #[test]
    fn strategies() {
        let (m, r) = find_vanishing_measure(&Predicate::parity(3), &Strategy::PairwisePoint).unwrap();
        assert!(m.is_some() && r.found && r.support_size == 1);
        let maj = Predicate::majority(3);
        for s in [
            Strategy::PairwisePoint,
            Strategy::SatisfyingPointMasses,
            Strategy::SymmetrizedOrbits(vec![CubeDistribution::point_mass(3, 0b100)]),
        ] {
            let (m, r) = find_vanishing_measure(&maj, &s).unwrap();
            assert!(m.is_none(), "{}", r.strategy);
        }
        let (sym, dropped) = symmetrize(&maj, &[CubeDistribution::point_mass(3, 0b100)]);
        assert_eq!(sym.len(), 3);
        assert!(dropped > 0);
    }

    #[test]
    fn symmetric_check_examples() {
        let p = charlp_symmetric_check(&Predicate::parity(3)).unwrap();
        assert!(p.member);
        assert_eq!(assignment_string(p.x, 3), "+++");
        assert_eq!(assignment_string(p.y, 3), "+--");
        let m = charlp_symmetric_check(&Predicate::majority(3)).unwrap();
        assert!(!m.member);
        assert_eq!(m.min_sum, 1);
        let l = charlp_symmetric_check(&Predicate::two_lin()).unwrap();
        assert!(l.member);
        assert_eq!((assignment_string(l.x, 2).as_str(), assignment_string(l.y, 2).as_str()), ("++", "--"));
        let dictator = Predicate::from_fn(2, |x| x & 1 == 0).unwrap();
        assert!(matches!(charlp_symmetric_check(&dictator), Err(Error::NotSymmetric)));
    }

    #[test]
    fn bias_search_examples() {
        let lin = Predicate::two_lin();
        let out = charlp_general_search(&lin, &charlp_symmetric_support(&lin)).unwrap();
        let m = out.measure.unwrap();
        assert!(m.is_vanishing(&lin.fourier()));

        // Point masses alone never cancel for 2LIN: biases (1,1) and (-1,-1)
        // send every level-2 image v to coefficient proportional to v1*v2.
        let pm: Vec<_> = lin.satisfying().into_iter().map(|x| CubeDistribution::point_mass(2, x)).collect();
        assert!(charlp_general_search(&lin, &pm).unwrap().measure.is_none());

        let maj = Predicate::majority(3);
        let out = charlp_general_search(&maj, &charlp_symmetric_support(&maj)).unwrap();
        assert!(out.measure.is_none());
        assert_eq!(out.certificate_verified(), Some(true));

        let one = Predicate::constant_one(2);
        let pm: Vec<_> = one.satisfying().into_iter().map(|x| CubeDistribution::point_mass(2, x)).collect();
        assert!(charlp_general_search(&one, &pm).unwrap().measure.is_some());
    }

    #[test]
    fn theta_examples() {
        let f = Predicate::parity(3);
        let spec = f.fourier();
        let m = parity_point();
        let mut rng = stream(1, 0);
        for t in 1..=3 {
            let pts: Vec<Vec<f64>> = (0..t).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            assert!(theta_eval(&m, &spec, &q(1, 4), t, &pts).unwrap().abs() < 1e-12);
        }
        let pts = vec![vec![0.0; 2]; 1];
        assert_eq!(theta_eval(&m, &spec, &q(1, 4), 1, &pts).unwrap(), 0.0);
        let bad = FiniteMeasure::point(CubeDistribution::point_mass(3, 0));
        // At the origin every sign image has the same density, so probe off it.
        let pts = vec![vec![0.5, -0.3]; 3];
        assert!(theta_eval(&bad, &spec, &q(1, 4), 3, &pts).unwrap().abs() > 1e-6);
    }

    #[test]
    fn measure_file_round_trip() {
        let f = Predicate::parity(3);
        let m = parity_point();
        let (g, back) = parse_measure(&measure_to_json(&f, &m)).unwrap();
        assert_eq!(g, f);
        assert_eq!(back, m);
        let bad = r#"{"predicate":{"k":1,"satisfying":["+"]},"atoms":[{"weight":"1","distribution":{"-":"1"}}]}"#;
        assert!(matches!(parse_measure(bad), Err(Error::Unsupported(_))));
    }
}
