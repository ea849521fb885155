//! Predicates `f: {-1,1}^k -> {0,1}` and their exact Fourier spectra.
//!
//! Assignment index convention (shared by every module): bit `i` of the index
//! is coordinate `x_{i+1}`, bit value 0 is `+1` and 1 is `-1`. Subsets of `[k]`
//! are bitmasks over the same bit positions.

use std::collections::BTreeSet;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::rational::{qi, Q};
use crate::{Error, Result};

pub const MAX_ARITY: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Predicate {
    k: usize,
    table: Vec<bool>,
}

/// Coordinate `i` (0-based) of assignment `x` as `+1`/`-1`.
#[inline]
pub fn sign(x: usize, i: usize) -> i8 {
    if (x >> i) & 1 == 0 {
        1
    } else {
        -1
    }
}

/// Character `chi_S(x) = prod_{i in S} x_i`.
#[inline]
pub fn chi(s: u32, x: usize) -> i8 {
    if (s as usize & x).count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn assignment_string(x: usize, k: usize) -> String {
    (0..k).map(|i| if sign(x, i) == 1 { '+' } else { '-' }).collect()
}

pub fn parse_assignment(s: &str, k: usize) -> Result<usize> {
    if s.chars().count() != k {
        return Err(Error::Predicate(format!("assignment {s:?} has length != {k}")));
    }
    let mut x = 0usize;
    for (i, c) in s.chars().enumerate() {
        match c {
            '+' => {}
            '-' => x |= 1 << i,
            _ => return Err(Error::Predicate(format!("invalid character {c:?} in {s:?}"))),
        }
    }
    Ok(x)
}

/// Index of the assignment with coordinates `signs`.
pub fn index_of(signs: &[i8]) -> usize {
    signs
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &s)| if s < 0 { acc | (1 << i) } else { acc })
}

/// Coordinate-wise product `x * b` as an assignment index.
#[inline]
pub fn twist(x: usize, b: usize) -> usize {
    x ^ b
}

#[derive(Serialize, Deserialize)]
struct PredicateFile {
    k: usize,
    satisfying: Vec<String>,
}

impl Predicate {
    pub fn new(k: usize, table: Vec<bool>) -> Result<Self> {
        if k == 0 || k > MAX_ARITY {
            return Err(Error::Predicate(format!("arity {k} outside 1..={MAX_ARITY}")));
        }
        if table.len() != 1 << k {
            return Err(Error::Predicate(format!(
                "table length {} != 2^{k}",
                table.len()
            )));
        }
        Ok(Self { k, table })
    }

    pub fn from_fn(k: usize, f: impl Fn(usize) -> bool) -> Result<Self> {
        if k == 0 || k > MAX_ARITY {
            return Err(Error::Predicate(format!("arity {k} outside 1..={MAX_ARITY}")));
        }
        Self::new(k, (0..1 << k).map(f).collect())
    }

    pub fn from_satisfying(k: usize, satisfying: &[&str]) -> Result<Self> {
        let strings: Vec<String> = satisfying.iter().map(|s| s.to_string()).collect();
        Self::from_strings(k, &strings)
    }

    fn from_strings(k: usize, satisfying: &[String]) -> Result<Self> {
        if k == 0 || k > MAX_ARITY {
            return Err(Error::Predicate(format!("arity {k} outside 1..={MAX_ARITY}")));
        }
        let mut table = vec![false; 1 << k];
        for s in satisfying {
            let x = parse_assignment(s, k)?;
            if table[x] {
                return Err(Error::Predicate(format!("duplicate satisfying string {s:?}")));
            }
            table[x] = true;
        }
        Self::new(k, table)
    }

    /// Parses the predicate file format `{"k": .., "satisfying": [..]}`.
    pub fn parse(text: &str) -> Result<Self> {
        let file: PredicateFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json_value(&file)
    }

    fn from_json_value(file: &PredicateFile) -> Result<Self> {
        Self::from_strings(file.k, &file.satisfying)
    }

    pub fn from_value(v: &serde_json::Value) -> Result<Self> {
        let file: PredicateFile =
            serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json_value(&file)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(PredicateFile {
            k: self.k,
            satisfying: self
                .satisfying()
                .into_iter()
                .map(|x| assignment_string(x, self.k))
                .collect(),
        })
        .expect("predicate serializes")
    }

    pub fn to_json(&self) -> String {
        self.to_value().to_string()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    #[inline]
    pub fn eval(&self, x: usize) -> bool {
        self.table[x]
    }

    pub fn eval_signs(&self, signs: &[i8]) -> bool {
        self.table[index_of(signs)]
    }

    pub fn satisfying(&self) -> Vec<usize> {
        (0..self.table.len()).filter(|&x| self.table[x]).collect()
    }

    pub fn count(&self) -> usize {
        self.table.iter().filter(|&&b| b).count()
    }

    /// `|f^{-1}(1)| / 2^k`.
    pub fn density(&self) -> Q {
        crate::rational::q(self.count() as i64, 1 << self.k)
    }

    /// Unnormalized Walsh sums `2^k * fhat(S)` by fast Walsh-Hadamard transform.
    pub fn walsh_sums(&self) -> Vec<i64> {
        let mut a: Vec<i64> = self.table.iter().map(|&b| b as i64).collect();
        let n = a.len();
        let mut h = 1;
        while h < n {
            for i in (0..n).step_by(2 * h) {
                for j in i..i + h {
                    let (u, v) = (a[j], a[j + h]);
                    a[j] = u + v;
                    a[j + h] = u - v;
                }
            }
            h *= 2;
        }
        a
    }

    pub fn fourier(&self) -> FourierSpectrum {
        let denom = qi(1 << self.k);
        let coeffs = self
            .walsh_sums()
            .into_iter()
            .map(|c| qi(c) / &denom)
            .collect();
        FourierSpectrum { k: self.k, coeffs }
    }

    /// Invariance under every coordinate permutation, i.e. the value depends
    /// only on the number of `-1` coordinates.
    pub fn is_symmetric(&self) -> bool {
        let mut by_weight: Vec<Option<bool>> = vec![None; self.k + 1];
        for x in 0..self.table.len() {
            let w = x.count_ones() as usize;
            match by_weight[w] {
                None => by_weight[w] = Some(self.table[x]),
                Some(v) if v != self.table[x] => return false,
                _ => {}
            }
        }
        true
    }

    /// `f(-x) = f(x)` for all `x`.
    pub fn is_even(&self) -> bool {
        let full = self.table.len() - 1;
        (0..self.table.len()).all(|x| self.table[x] == self.table[x ^ full])
    }

    /// Number of `-1` coordinates that make the predicate true, for symmetric `f`.
    pub fn satisfying_weights(&self) -> BTreeSet<usize> {
        self.satisfying().into_iter().map(|x| x.count_ones() as usize).collect()
    }

    // Named predicates used across tests, examples and the CLI.

    /// Product of the literals equals `+1`.
    pub fn parity(k: usize) -> Self {
        Self::from_fn(k, |x| x.count_ones() % 2 == 0).expect("valid arity")
    }

    /// At least half plus one coordinates equal `+1` (odd `k`).
    pub fn majority(k: usize) -> Self {
        Self::from_fn(k, |x| 2 * (k - x.count_ones() as usize) > k).expect("valid arity")
    }

    /// `x_1 = x_2`.
    pub fn two_lin() -> Self {
        Self::from_fn(2, |x| x == 0 || x == 3).expect("valid arity")
    }

    pub fn constant_one(k: usize) -> Self {
        Self::from_fn(k, |_| true).expect("valid arity")
    }

    /// Satisfied unless every coordinate is `+1` (logical TRUE is `-1`).
    pub fn or(k: usize) -> Self {
        Self::from_fn(k, |x| x != 0).expect("valid arity")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FourierSpectrum {
    k: usize,
    coeffs: Vec<Q>,
}

impl FourierSpectrum {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, s: u32) -> &Q {
        &self.coeffs[s as usize]
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    /// Subsets of size `t` with nonzero coefficient.
    pub fn level(&self, t: usize) -> Vec<u32> {
        (0..self.coeffs.len() as u32)
            .filter(|s| s.count_ones() as usize == t && !self.coeffs[*s as usize].is_zero())
            .collect()
    }

    /// Nonzero coefficients on nonempty subsets.
    pub fn nonconstant_support(&self) -> Vec<u32> {
        (1..self.coeffs.len() as u32)
            .filter(|s| !self.coeffs[*s as usize].is_zero())
            .collect()
    }

    pub fn parseval_sum(&self) -> Q {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// `sum_S fhat(S) chi_S(x)`.
    pub fn eval(&self, x: usize) -> Q {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(s, c)| if chi(s as u32, x) == 1 { c.clone() } else { -c })
            .sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(crate::rational::to_f64).collect()
    }
}

pub fn subset_string(s: u32) -> String {
    let items: Vec<String> = (0..32)
        .filter(|i| (s >> i) & 1 == 1)
        .map(|i| (i + 1).to_string())
        .collect();
    format!("{{{}}}", items.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use num_traits::One;

    /// Direct definition `2^-k sum_x f(x) chi_S(x)`, independent of the transform.
    fn naive_coeff(f: &Predicate, s: u32) -> Q {
        let mut acc = 0i64;
        for x in 0..1usize << f.k() {
            if f.eval(x) {
                acc += chi(s, x) as i64;
            }
        }
        Q::new(acc.into(), (1i64 << f.k()).into())
    }

    #[test]
    fn parse_named_examples() {
        let p = Predicate::parse(r#"{"k":3,"satisfying":["+++","+--","-+-","--+"]}"#).unwrap();
        assert_eq!(p, Predicate::parity(3));
        let id = Predicate::parse(r#"{"k":1,"satisfying":["+"]}"#).unwrap();
        assert!(id.eval(0) && !id.eval(1));
        let lin = Predicate::parse(r#"{"k":2,"satisfying":["++","--"]}"#).unwrap();
        assert_eq!(lin, Predicate::two_lin());
    }

    #[test]
    fn parse_errors() {
        assert!(Predicate::parse(r#"{"k":2,"satisfying":["++","++"]}"#).is_err());
        assert!(Predicate::parse(r#"{"k":2,"satisfying":["+++"]}"#).is_err());
        assert!(Predicate::parse(r#"{"k":2,"satisfying":["+x"]}"#).is_err());
        assert!(Predicate::parse(r#"{"k":9,"satisfying":[]}"#).is_err());
        assert!(Predicate::parse(r#"{"k":0,"satisfying":[]}"#).is_err());
        assert!(Predicate::parse("not json").is_err());
    }

    #[test]
    fn serialization_round_trips() {
        for p in [Predicate::parity(3), Predicate::majority(3), Predicate::or(4)] {
            assert_eq!(Predicate::parse(&p.to_json()).unwrap(), p);
        }
    }

    #[test]
    fn densities() {
        assert_eq!(Predicate::parity(3).density(), q(1, 2));
        assert_eq!(Predicate::or(3).density(), q(7, 8));
        assert_eq!(Predicate::constant_one(2).density(), Q::one());
    }

    #[test]
    fn fourier_of_named_predicates() {
        let f = Predicate::parity(3).fourier();
        assert_eq!(*f.get(0), q(1, 2));
        assert_eq!(*f.get(0b111), q(1, 2));
        assert_eq!(f.nonconstant_support(), vec![0b111]);

        let c = Predicate::constant_one(2).fourier();
        assert_eq!(*c.get(0), Q::one());
        assert!(c.nonconstant_support().is_empty());

        let l = Predicate::two_lin().fourier();
        assert_eq!(*l.get(0), q(1, 2));
        assert_eq!(*l.get(0b11), q(1, 2));
        assert_eq!(l.nonconstant_support(), vec![0b11]);

        let m = Predicate::majority(3).fourier();
        for i in 0..3 {
            assert_eq!(*m.get(1 << i), q(1, 4));
        }
        assert_eq!(*m.get(0b111), q(-1, 4));
    }

    #[test]
    fn transform_matches_definition() {
        for f in [Predicate::majority(5), Predicate::or(4), Predicate::parity(6)] {
            let spec = f.fourier();
            for s in 0..1u32 << f.k() {
                assert_eq!(*spec.get(s), naive_coeff(&f, s));
            }
        }
    }

    #[test]
    fn symmetry_and_evenness() {
        assert!(Predicate::parity(3).is_symmetric());
        assert!(Predicate::majority(3).is_symmetric());
        let dictator = Predicate::from_fn(2, |x| sign(x, 0) == 1).unwrap();
        assert!(!dictator.is_symmetric());
        assert!(Predicate::two_lin().is_even());
        assert!(!Predicate::parity(3).is_even());
    }

    #[test]
    fn assignment_strings() {
        assert_eq!(assignment_string(0b010, 3), "+-+");
        assert_eq!(parse_assignment("+-+", 3).unwrap(), 0b010);
        assert_eq!(index_of(&[1, -1, 1]), 0b010);
        assert_eq!(subset_string(0b101), "{1,3}");
    }
}
