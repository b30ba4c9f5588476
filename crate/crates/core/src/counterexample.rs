//! Weight products, sum inequalities and digit statistics for the binary counterexample measure.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{counterexample_w, CascadeMeasure};
use crate::dyadic::CubeIndex;
use crate::error::{invalid, Error, Result};
use crate::sets::{DyadicSet, SetRule};

/// `eta` weights for a reference set `E` and block length `l + m`.
#[derive(Clone, Debug)]
pub struct EtaWeights {
    pub l: u32,
    pub m: u32,
    pub log_base: f64,
    set: DyadicSet,
}

impl EtaWeights {
    pub fn new(l: u32, m: u32, set: DyadicSet, log_base: f64) -> Result<Self> {
        if l + m == 0 || l + m > 20 {
            return invalid("l + m must lie in 1..=20");
        }
        if set.arity_log() != 1 {
            return invalid("reference set must be binary");
        }
        if !(log_base > 1.0 && log_base.is_finite()) {
            return invalid("log_base must exceed 1");
        }
        Ok(EtaWeights { l, m, log_base, set })
    }

    pub fn block(&self) -> usize {
        (self.l + self.m) as usize
    }

    pub fn set(&self) -> &DyadicSet {
        &self.set
    }

    /// `w(i b + 1) ... w((i+1) b)` for block `i`.
    pub fn block_product(&self, i: usize) -> f64 {
        let b = self.block();
        (i * b + 1..=(i + 1) * b).map(|t| counterexample_w(self.log_base, t)).product()
    }

    /// Does some depth-`(i+1)(l+m)` descendant of the cube with these digits miss `E`?
    pub fn is_porous(&self, digits: &[u8]) -> Result<bool> {
        let b = self.block();
        if !digits.len().is_multiple_of(b) {
            return invalid("cube depth must be a multiple of l + m");
        }
        if digits.len() + b > self.set.build_bits() {
            return invalid("reference set is not built deep enough");
        }
        let mut path = digits.to_vec();
        path.resize(digits.len() + b, 0);
        for c in 0..1u32 << b {
            for t in 0..b {
                path[digits.len() + t] = ((c >> (b - 1 - t)) & 1) as u8;
            }
            if !self.set.prefix_survives(&path) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// `eta(Q)` from the digits of `Q`.
    pub fn eta_digits(&self, digits: &[u8]) -> Result<f64> {
        Ok(if self.is_porous(digits)? { 1.0 - self.block_product(digits.len() / self.block()) } else { 1.0 })
    }
}

fn binary_digits(q: &CubeIndex) -> Result<Vec<u8>> {
    if q.arity_log() != 1 || q.dim() != 1 {
        return invalid("expected a binary cube in one dimension");
    }
    Ok(q.digits().iter().map(|&d| d as u8).collect())
}

/// `eta(Q)` for `Q` at a depth divisible by `l + m`.
pub fn eta(q: &CubeIndex, ew: &EtaWeights) -> Result<f64> {
    ew.eta_digits(&binary_digits(q)?)
}

/// `exp(-sum_{q=1}^{floor(i p')} (log_b(q (l+m)/p' + 2))^{-(l+m)})`, with `1/p'` an integer.
pub fn c_bound(i: usize, block: usize, p_prime: f64, log_base: f64) -> Result<f64> {
    let inv = 1.0 / p_prime;
    if !(p_prime > 0.0 && p_prime <= 1.0) || (inv - inv.round()).abs() > 1e-9 {
        return invalid("1/p' must be a positive integer");
    }
    let inv = inv.round() as usize;
    let terms = i / inv;
    let s: f64 = (1..=terms)
        .map(|q| counterexample_w(log_base, q * block * inv).powi(block as i32))
        .sum();
    Ok((-s).exp())
}

/// Running `eta` products along an ancestor chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaChain {
    /// `prod_{j=0}^{t} eta(Q_j)` for `t = 0..=i`.
    pub products: Vec<f64>,
    /// Porous flag of each `Q_j`.
    pub porous: Vec<bool>,
    /// Largest `1/N` such that the `q`-th porous block sits in the first `q N` blocks.
    pub p_prime: Option<f64>,
    pub c_bound: Option<f64>,
}

impl EtaChain {
    pub fn product(&self) -> f64 {
        *self.products.last().unwrap_or(&1.0)
    }

    pub fn within_bound(&self) -> bool {
        self.c_bound.is_none_or(|c| self.product() <= c * (1.0 + 1e-12))
    }
}

/// Largest `1/N` with the `q`-th porous block among the first `q N`, for every `q <= floor(i/N)`.
pub fn chain_density(porous: &[bool]) -> Option<f64> {
    let i = porous.len();
    let positions: Vec<usize> = porous.iter().enumerate().filter(|(_, &p)| p).map(|(j, _)| j + 1).collect();
    (1..=i).find_map(|n| {
        let needed = i / n;
        let ok = needed >= 1 && (1..=needed).all(|q| positions.get(q - 1).is_some_and(|&pos| pos <= q * n));
        ok.then(|| 1.0 / n as f64)
    })
}

/// Products of `eta` over the blocks `Q_0, ..., Q_i` of a binary digit path.
pub fn eta_product(path: &[u8], ew: &EtaWeights, i: usize) -> Result<EtaChain> {
    let b = ew.block();
    if path.len() < i * b {
        return invalid("path shorter than i (l + m) digits");
    }
    let mut products = Vec::with_capacity(i + 1);
    let mut porous = Vec::with_capacity(i + 1);
    let mut acc = 1.0;
    for j in 0..=i {
        let p = ew.is_porous(&path[..j * b])?;
        acc *= if p { 1.0 - ew.block_product(j) } else { 1.0 };
        products.push(acc);
        porous.push(p);
    }
    let p_prime = if i == 0 { None } else { chain_density(&porous[..i]) };
    let c_bound = match p_prime {
        Some(pp) => Some(c_bound(i, b, pp, ew.log_base)?),
        None => None,
    };
    Ok(EtaChain { products, porous, p_prime, c_bound })
}

/// The weighted sum over depth-`i(l+m)` cubes meeting `E`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSum {
    pub i: usize,
    pub sum: f64,
    pub cubes: usize,
    pub holds: bool,
}

/// Largest cube count summed by [`weighted_sum_check`].
pub const MAX_WEIGHTED_CUBES: u128 = 1 << 24;

/// `sum_{Q meets E} mu(Q) / prod_{j<i} eta(Q_j)` at depth `i(l+m)`.
pub fn weighted_sum_check(ew: &EtaWeights, mu: &CascadeMeasure, i: usize) -> Result<WeightedSum> {
    if mu.arity_log() != 1 {
        return invalid("measure must be binary");
    }
    let depth = i * ew.block();
    if depth > mu.max_depth() {
        return invalid("depth beyond the measure's max_depth");
    }
    match ew.set.survivor_count_bits(depth) {
        Some(n) if n <= MAX_WEIGHTED_CUBES => {}
        _ => return Err(Error::InstanceTooLarge(format!("too many cubes at depth {depth}"))),
    }
    let cubes = ew.set.survivors(depth)?;
    let b = ew.block();
    let mut cache: HashMap<Vec<u8>, f64> = HashMap::new();
    let mut terms = Vec::with_capacity(cubes.len());
    for q in &cubes {
        let d = binary_digits(q)?;
        let mut den = 1.0;
        for j in 0..i {
            let key = &d[..j * b];
            den *= match cache.get(key) {
                Some(&e) => e,
                None => {
                    let e = ew.eta_digits(key)?;
                    cache.insert(key.to_vec(), e);
                    e
                }
            };
        }
        terms.push(mu.mass_of_digits(q.digits()) / den);
    }
    let sum: f64 = terms.iter().sum();
    Ok(WeightedSum { i, sum, cubes: cubes.len(), holds: sum <= 1.0 + 1e-10 })
}

/// Empirical and expected frequency of `x_j = x_{j+1}` for `1 <= j <= i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DigitEqualFraction {
    pub i: usize,
    pub empirical: f64,
    pub analytic: f64,
}

/// Largest `i` accepted by [`digit_equal_fraction`].
pub const MAX_DIGIT_RUN: usize = 10_000_000;

/// Counts equal consecutive digits of sample `index`, with the expectation under digit independence.
pub fn digit_equal_fraction(m: &CascadeMeasure, seed: u64, index: u64, i: usize) -> Result<DigitEqualFraction> {
    if m.arity_log() != 1 {
        return invalid("measure must be binary");
    }
    if i == 0 || i > MAX_DIGIT_RUN {
        return invalid("i must lie in 1..=10^7");
    }
    let mut stream = m.digit_stream(seed, index);
    let mut prev = stream.next().unwrap_or(0);
    let mut equal = 0usize;
    for d in stream.take(i) {
        equal += (d == prev) as usize;
        prev = d;
    }
    let analytic = analytic_equal_fraction(m, i);
    Ok(DigitEqualFraction { i, empirical: equal as f64 / i as f64, analytic })
}

/// `(1/i) sum_{j=1}^{i} P(x_j = x_{j+1})` for independent digits.
pub fn analytic_equal_fraction(m: &CascadeMeasure, i: usize) -> f64 {
    let mut s = 0.0;
    let mut a = m.zero_probability(1);
    for j in 1..=i {
        let b = m.zero_probability(j + 1);
        s += a * b + (1.0 - a) * (1.0 - b);
        a = b;
    }
    s / i as f64
}

/// Mass of the depth-`depth` survivors of `E`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetMass {
    pub depth: usize,
    pub mass: f64,
    /// Evaluated by the per-level product rather than enumeration.
    pub closed_form: bool,
}

/// Upper bound `mu(E_depth)` for `mu(E)`.
pub fn measure_of_set_approx(mu: &CascadeMeasure, e: &DyadicSet, depth: usize) -> Result<SetMass> {
    if mu.arity_log() != 1 || e.arity_log() != 1 {
        return invalid("measure and set must be binary");
    }
    if depth > mu.max_depth() || depth > e.build_bits() {
        return invalid("depth beyond the build depth of the measure or set");
    }
    match e.rule() {
        SetRule::DigitConstraint { period, residues, digit } => {
            let mut log2 = 0.0;
            for j in 1..=depth {
                if residues.contains(&(j % period)) {
                    log2 += mu.weight(j, *digit as u64).log2();
                }
            }
            Ok(SetMass { depth, mass: log2.exp2(), closed_form: true })
        }
        SetRule::Full => Ok(SetMass { depth, mass: 1.0, closed_form: true }),
        _ => {
            let cubes = e.survivors(depth)?;
            let masses: Vec<f64> = cubes.par_iter().map(|q| mu.mass_of_digits(q.digits())).collect();
            Ok(SetMass { depth, mass: masses.iter().sum(), closed_form: false })
        }
    }
}

/// Survivor-sum evaluation regardless of the set rule.
pub fn measure_of_set_by_enumeration(mu: &CascadeMeasure, e: &DyadicSet, depth: usize) -> Result<f64> {
    let cubes = e.survivors(depth)?;
    let masses: Vec<f64> = cubes.par_iter().map(|q| mu.mass_of_digits(q.digits())).collect();
    Ok(masses.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{counterexample_measure, lebesgue};
    use crate::sets::{even_digits_zero, full_set};
    use std::f64::consts::E;

    #[test]
    fn eta_examples() {
        let ew = EtaWeights::new(1, 2, even_digits_zero(30).unwrap(), E).unwrap();
        let root = CubeIndex::root(1, 1).unwrap();
        assert!((eta(&root, &ew).unwrap() - 0.5921).abs() < 1e-4);
        let full = EtaWeights::new(1, 2, full_set(30).unwrap(), E).unwrap();
        assert_eq!(eta(&root, &full).unwrap(), 1.0);
        let far = vec![0u8; 24];
        let v = ew.eta_digits(&far).unwrap();
        assert!(v < 1.0 && v > ew.eta_digits(&far[..3]).unwrap());
    }

    #[test]
    fn weighted_sums_hold() {
        let ew = EtaWeights::new(1, 2, even_digits_zero(30).unwrap(), E).unwrap();
        let mu = counterexample_measure(E, 64).unwrap();
        let mut last = f64::INFINITY;
        for i in 1..=8 {
            let s = weighted_sum_check(&ew, &mu, i).unwrap();
            assert!(s.holds, "i={i} sum={}", s.sum);
            assert!(s.sum <= last + 1e-12);
            last = s.sum;
        }
    }

    #[test]
    fn digit_fraction_first_term() {
        let mu = counterexample_measure(E, 64).unwrap();
        let (w1, w2) = (1.0 / 3f64.ln(), 1.0 / 4f64.ln());
        let first = (1.0 - w1) * w2 + w1 * (1.0 - w2);
        assert!((analytic_equal_fraction(&mu, 1) - first).abs() < 1e-15);
        assert!((first - 0.3185).abs() < 2e-4);
        let leb = lebesgue(64).unwrap();
        assert!((analytic_equal_fraction(&leb, 50) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn set_mass_closed_form() {
        let mu = counterexample_measure(E, 64).unwrap();
        let e = even_digits_zero(40).unwrap();
        let a = measure_of_set_approx(&mu, &e, 20).unwrap();
        let b = measure_of_set_by_enumeration(&mu, &e, 20).unwrap();
        assert!(a.closed_form && (a.mass - b).abs() < 1e-10);
        let m40 = measure_of_set_approx(&mu, &e, 40).unwrap().mass;
        let direct: f64 = (2..=40).step_by(2).map(|j| 1.0 - 1.0 / ((j + 2) as f64).ln()).product();
        assert!((m40 - direct).abs() < 1e-10 && m40 < 0.01);
    }

    #[test]
    fn chain_density_cases() {
        assert_eq!(chain_density(&[true, true, true]), Some(1.0));
        assert_eq!(chain_density(&[false, true, false, true]), Some(0.5));
        assert_eq!(chain_density(&[false, false]), None);
    }
}
