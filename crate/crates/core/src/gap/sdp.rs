//! Instances for the basic-relaxation gap, built from Gaussian tuples.
//!
//! Each constraint is a tuple `y_1..y_k` in `R^d` drawn from `N_d(zeta')`
//! with `zeta'` the noise-shifted moments of an atom. Tuples whose empirical
//! moments are more than `epsilon` off are rejected. Points are snapped to a
//! random net on the shell `|y|^2 in [(1-eps) d, (1+eps) d]`; a net point and
//! its negation are one variable with opposite literal signs.

use num_traits::{One, Zero};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::moments::{moments_of, noise_shift, CubeDistribution, MomentMatrix};
use crate::predicate::Predicate;
use crate::rational::{fmt_q, parse_q, to_f64, Q};
use crate::relax::{dot, BasicSolution, Constraint, CspInstance};
use crate::rng::{stream, Rng};
use crate::vanishing::{is_vanishing, measure_to_json, parse_measure, FiniteMeasure};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct SdpGapConfig {
    pub f: Predicate,
    pub lambda: FiniteMeasure,
    pub delta: Q,
    pub d: usize,
    pub epsilon: f64,
    /// Number of canonical net points (variables).
    pub net_size: usize,
    /// Constraints to emit.
    pub m: usize,
    /// Attempts allowed per emitted constraint before giving up.
    pub max_attempts_per_constraint: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SdpGapStats {
    pub attempts: usize,
    pub rejected: usize,
    /// Accepted tuples dropped because two points snapped to one variable.
    pub collisions: usize,
    /// Largest `|<v_a, v_b> - <y_i, y_j>/d|` over emitted position pairs,
    /// including `a = b` (norm drift) and inner products with `u`.
    pub drift: f64,
}

#[derive(Clone, Debug)]
pub struct SdpGapInstance {
    pub phi: CspInstance,
    pub solution: BasicSolution,
    pub net: Vec<Vec<f64>>,
    /// Accepted tuples of every emitted constraint, before snapping.
    pub raw: Vec<Vec<Vec<f64>>>,
    /// `nu-bar` of each emitted constraint in literal space.
    pub literal_dists: Vec<CubeDistribution>,
    pub stats: SdpGapStats,
}

/// `|mean(y_i) - zeta(0,i)| <= eps` and `|<y_i,y_j>/d - zeta(i,j)| <= eps`
/// for all `i, j` including `i = j`.
pub fn is_epsilon_good(y: &[Vec<f64>], zeta: &MomentMatrix, eps: f64) -> bool {
    let d = y.first().map_or(1, Vec::len) as f64;
    for (i, yi) in y.iter().enumerate() {
        let mean = yi.iter().sum::<f64>() / d;
        if (mean - to_f64(zeta.get(0, i + 1))).abs() > eps {
            return false;
        }
        for (j, yj) in y.iter().enumerate().skip(i) {
            if (dot(yi, yj) / d - to_f64(zeta.get(i + 1, j + 1))).abs() > eps {
                return false;
            }
        }
    }
    true
}

/// `count` random points on the shell, each with first coordinate `>= 0`.
pub fn shell_net(count: usize, d: usize, eps: f64, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dot(&g, &g).sqrt();
            let r2 = d as f64 * (1.0 - eps + 2.0 * eps * rng.random::<f64>());
            let flip = if g[0] < 0.0 { -1.0 } else { 1.0 };
            g.iter().map(|x| flip * x * r2.sqrt() / norm).collect()
        })
        .collect()
}

/// Nearest of `±net` to `y`: the net index and the sign.
pub fn snap(net: &[Vec<f64>], y: &[f64]) -> (usize, i8) {
    let yy = dot(y, y);
    let mut best = (0, 1i8, f64::INFINITY);
    for (i, p) in net.iter().enumerate() {
        let pp = dot(p, p);
        let yp = dot(y, p);
        for s in [1i8, -1] {
            let dist = yy + pp - 2.0 * s as f64 * yp;
            if dist < best.2 {
                best = (i, s, dist);
            }
        }
    }
    (best.0, best.1)
}

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    /// A measure file: predicate plus weighted atoms.
    measure: serde_json::Value,
    delta: String,
    d: usize,
    epsilon: f64,
    net_size: usize,
    m: usize,
    #[serde(default = "default_attempts")]
    max_attempts_per_constraint: usize,
    seed: u64,
}

fn default_attempts() -> usize {
    1000
}

impl SdpGapConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let (f, lambda) = parse_measure(&file.measure.to_string())?;
        Ok(Self {
            f,
            lambda,
            delta: parse_q(&file.delta)?,
            d: file.d,
            epsilon: file.epsilon,
            net_size: file.net_size,
            m: file.m,
            max_attempts_per_constraint: file.max_attempts_per_constraint,
            seed: file.seed,
        })
    }

    pub fn to_json(&self) -> String {
        let file = ConfigFile {
            measure: serde_json::from_str(&measure_to_json(&self.f, &self.lambda)).expect("measure json is valid"),
            delta: fmt_q(&self.delta),
            d: self.d,
            epsilon: self.epsilon,
            net_size: self.net_size,
            m: self.m,
            max_attempts_per_constraint: self.max_attempts_per_constraint,
            seed: self.seed,
        };
        serde_json::to_string_pretty(&file).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.net_size == 0 || self.m == 0 {
            return Err(Error::Invalid("d, net size and m must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Invalid(format!("epsilon {} outside (0,1)", self.epsilon)));
        }
        self.lambda.check_support(&self.f)?;
        if !is_vanishing(&self.lambda, &self.f.fourier())? {
            return Err(Error::Invalid("measure does not vanish".into()));
        }
        Ok(())
    }
}

/// Samples tuples until `m` constraints are emitted (or the attempt cap is hit)
/// and builds the vector solution `u = 1/sqrt(d)`, `v_p = p / sqrt(d)`.
pub fn generate_sdp_gap_instance(cfg: &SdpGapConfig) -> Result<SdpGapInstance> {
    cfg.validate()?;
    let k = cfg.f.k();
    let atoms: Vec<(f64, MomentMatrix, CubeDistribution)> = cfg
        .lambda
        .atoms
        .iter()
        .map(|a| {
            let zeta = noise_shift(&moments_of(&a.nu), &cfg.delta)?;
            let unif = CubeDistribution::uniform(k);
            let bar = CubeDistribution::mixture(&[(Q::one() - &cfg.delta, &a.nu), (cfg.delta.clone(), &unif)])?;
            Ok((to_f64(&a.weight), zeta, bar))
        })
        .collect::<Result<_>>()?;
    let specs = atoms
        .iter()
        .map(|a| crate::gaussian::GaussianProcessSpec::from_moments(&a.1, cfg.d))
        .collect::<Result<Vec<_>>>()?;
    let mut net_rng = stream(cfg.seed, 0x4e);
    let net = shell_net(cfg.net_size, cfg.d, cfg.epsilon, &mut net_rng);
    let mut rng = stream(cfg.seed, 0x5d);
    let cap = cfg.m.saturating_mul(cfg.max_attempts_per_constraint.max(1));
    let sqrt_d = (cfg.d as f64).sqrt();
    let mut stats = SdpGapStats::default();
    let mut constraints = Vec::new();
    let mut raw = Vec::new();
    let mut literal_dists = Vec::new();
    let mut dists = Vec::new();
    while constraints.len() < cfg.m {
        if stats.attempts >= cap {
            return Err(Error::RejectionCap { accepted: constraints.len(), attempts: stats.attempts });
        }
        stats.attempts += 1;
        let mut u = rng.random::<f64>();
        let mut a = atoms.len() - 1;
        for (i, w) in atoms.iter().enumerate() {
            if u < w.0 {
                a = i;
                break;
            }
            u -= w.0;
        }
        let y = specs[a].sample_with(&mut rng);
        if !is_epsilon_good(&y, &atoms[a].1, cfg.epsilon) {
            stats.rejected += 1;
            continue;
        }
        let snapped: Vec<(usize, i8)> = y.iter().map(|yi| snap(&net, yi)).collect();
        let mut vars: Vec<usize> = snapped.iter().map(|s| s.0).collect();
        vars.sort_unstable();
        vars.dedup();
        if vars.len() < k {
            stats.collisions += 1;
            continue;
        }
        for (i, yi) in y.iter().enumerate() {
            let (pi, si) = snapped[i];
            let vi: Vec<f64> = net[pi].iter().map(|x| si as f64 * x / sqrt_d).collect();
            stats.drift = stats.drift.max((vi.iter().sum::<f64>() / sqrt_d - yi.iter().sum::<f64>() / cfg.d as f64).abs());
            for (j, yj) in y.iter().enumerate().skip(i) {
                let (pj, sj) = snapped[j];
                let vj: Vec<f64> = net[pj].iter().map(|x| sj as f64 * x / sqrt_d).collect();
                stats.drift = stats.drift.max((dot(&vi, &vj) - dot(yi, yj) / cfg.d as f64).abs());
            }
        }
        let con = Constraint { vars: snapped.iter().map(|s| s.0).collect(), signs: snapped.iter().map(|s| s.1).collect() };
        dists.push(atoms[a].2.twisted(con.sign_mask()));
        literal_dists.push(atoms[a].2.clone());
        constraints.push(con);
        raw.push(y);
    }
    let phi = CspInstance::new(cfg.f.clone(), cfg.net_size, constraints)?;
    let u = vec![1.0 / sqrt_d; cfg.d];
    let v: Vec<Vec<f64>> = net.iter().map(|p| p.iter().map(|x| x / sqrt_d).collect()).collect();
    let solution = BasicSolution::from_vectors(u, &v, dists);
    Ok(SdpGapInstance { phi, solution, net, raw, literal_dists, stats })
}

impl SdpGapInstance {
    /// The same constraints with raw points snapped to a coarser net of
    /// `size` points; constraints that collapse onto a repeated variable are
    /// dropped. Returns the instance and the number dropped.
    pub fn collapse_to_net(&self, size: usize, eps: f64, seed: u64) -> Result<(CspInstance, usize)> {
        let d = self.net.first().map_or(0, Vec::len);
        let mut rng = stream(seed, 0xc0);
        let coarse = shell_net(size, d, eps, &mut rng);
        let mut dropped = 0;
        let mut cons = Vec::new();
        for y in &self.raw {
            let snapped: Vec<(usize, i8)> = y.iter().map(|yi| snap(&coarse, yi)).collect();
            let mut vars: Vec<usize> = snapped.iter().map(|s| s.0).collect();
            vars.sort_unstable();
            vars.dedup();
            if vars.len() < y.len() {
                dropped += 1;
                continue;
            }
            cons.push(Constraint { vars: snapped.iter().map(|s| s.0).collect(), signs: snapped.iter().map(|s| s.1).collect() });
        }
        Ok((CspInstance::new(self.phi.f.clone(), size, cons)?, dropped))
    }

    /// Exact `FRAC` of the emitted distributions.
    pub fn frac_exact(&self) -> Q {
        if self.literal_dists.is_empty() {
            return Q::zero();
        }
        let total: Q = self
            .literal_dists
            .iter()
            .map(|d| d.probs().iter().filter(|(x, _)| self.phi.f.eval(**x)).map(|(_, p)| p.clone()).sum::<Q>())
            .sum();
        total / Q::from_integer((self.literal_dists.len() as i64).into())
    }
}
