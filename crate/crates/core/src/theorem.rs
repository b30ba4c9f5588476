//! Explicit constants of the packing-dimension bound and checks of its inequalities.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::CascadeMeasure;
use crate::dyadic::CubeIndex;
use crate::error::{invalid, Error, Result};
use crate::porosity::{porous_cube_flags, CubePorosityParams, WitnessRule};

/// Default boundary-cover constant `c(d)`.
pub const DEFAULT_C: f64 = 4.0;

/// Constants determined by `d`, `alpha` and `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub d: u32,
    pub alpha: f64,
    /// Smallest integer with `4 sqrt(d) <= 2^l`.
    pub l: u32,
    pub k: u32,
    pub c: f64,
    /// `max(c, 2 d 2^l)`.
    pub cap_c: f64,
    /// `2^{kd}`.
    pub n_cubes: f64,
    /// `k >= log2 C`.
    pub theorem_valid: bool,
}

fn rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::InvalidArgument(format!("{x} is not finite")))
}

fn pow4(e: i64) -> BigRational {
    let four = BigRational::from_integer(BigInt::from(4));
    if e >= 0 {
        num_traits::pow(four, e as usize)
    } else {
        num_traits::pow(four, (-e) as usize).recip()
    }
}

/// `q = (1 - 2 alpha)^2 4^l / d`, so that the defining inequality reads
/// `4^{-k-1} <= q < 4^{-k}`.
fn k_condition_quantity(d: u32, alpha: f64, l: u32) -> Result<BigRational> {
    let a = rational(alpha)?;
    let one = BigRational::one();
    let gap = &one - (&a + &a);
    if !gap.is_positive() {
        return invalid("alpha must be below 1/2");
    }
    Ok(&gap * &gap * pow4(l as i64) / BigRational::from_integer(BigInt::from(d)))
}

/// Smallest `l` with `4 sqrt(d) <= 2^l`, i.e. `16 d <= 4^l`.
pub fn smallest_l(d: u32) -> u32 {
    let mut l = 0u32;
    while 4u128.pow(l) < 16 * d as u128 {
        l += 1;
    }
    l
}

/// Exact test of `sqrt(d) 2^{-k-1} <= (1 - 2 alpha) 2^l < sqrt(d) 2^{-k}`.
pub fn k_condition_holds(d: u32, alpha: f64, l: u32, k: i64) -> Result<bool> {
    let q = k_condition_quantity(d, alpha, l)?;
    Ok(pow4(-k - 1) <= q && q < pow4(-k))
}

/// Evaluates `l`, `k`, `C`, `N` for `15/32 < alpha < 1/2`.
pub fn constants(d: u32, alpha: f64, c_override: Option<f64>) -> Result<TheoremConstants> {
    if d == 0 {
        return invalid("d must be positive");
    }
    if !(alpha > 15.0 / 32.0 && alpha < 0.5) {
        return invalid("alpha must lie in (15/32, 1/2)");
    }
    let c = c_override.unwrap_or(DEFAULT_C);
    if !(c > 0.0 && c.is_finite()) {
        return invalid("c must be positive");
    }
    let l = smallest_l(d);
    let q = k_condition_quantity(d, alpha, l)?;
    let mut k: i64 = 1;
    while pow4(-k) > q {
        k += 1;
        if k > 2000 {
            return Err(Error::InstanceTooLarge("k beyond 2000".into()));
        }
    }
    let k = k - 1;
    if k < 1 || !(pow4(-k - 1) <= q && q < pow4(-k)) {
        return invalid("no positive k satisfies the defining inequality");
    }
    let cap_c = c.max(2.0 * d as f64 * 2f64.powi(l as i32));
    let k = k as u32;
    Ok(TheoremConstants {
        d,
        alpha,
        l,
        k,
        c,
        cap_c,
        n_cubes: 2f64.powi((k * d) as i32),
        theorem_valid: k as f64 >= cap_c.log2(),
    })
}

/// The alpha for which `k(alpha) = k` in `d = 1`: `(1 - 2^{-k-3}) / 2`.
pub fn alpha_for_k(k: u32) -> f64 {
    (1.0 - 2f64.powi(-(k as i32) - 3)) / 2.0
}

impl TheoremConstants {
    fn check_d(&self, big_d: f64) -> Result<()> {
        if !(big_d > 0.0 && big_d.is_finite()) {
            return invalid("D must be positive");
        }
        Ok(())
    }

    /// Porous-cube weight `(1/3) C^{-1/2} 2^{-(k/2)(d-1-D)}`.
    pub fn beta_porous(&self, big_d: f64) -> f64 {
        let (k, d) = (self.k as f64, self.d as f64);
        self.cap_c.powf(-0.5) * (-(k / 2.0) * (d - 1.0 - big_d)).exp2() / 3.0
    }

    /// Non-porous weight `(1/3) 2^{-(k/2)(d-D)}`.
    pub fn beta_plain(&self, big_d: f64) -> f64 {
        let (k, d) = (self.k as f64, self.d as f64);
        (-(k / 2.0) * (d - big_d)).exp2() / 3.0
    }

    /// `C^{-1/2} 2^{k/2}`.
    pub fn claim_factor(&self) -> f64 {
        self.cap_c.powf(-0.5) * (self.k as f64 / 2.0).exp2()
    }
}

/// `beta(Q)` for a porous or non-porous cube.
pub fn beta(porous: bool, tc: &TheoremConstants, big_d: f64) -> Result<f64> {
    tc.check_d(big_d)?;
    if !tc.theorem_valid {
        return invalid("beta needs k >= log2 C");
    }
    Ok(if porous { tc.beta_porous(big_d) } else { tc.beta_plain(big_d) })
}

/// `R(eps, n) = (n-1)/3 (eps N)^{1/2} C^{-1/2} 2^{k/2} 2^{k(n-1)(d-D/2)} M^{n-1}`.
pub fn r_coefficient(tc: &TheoremConstants, big_d: f64, n: u32, eps: f64) -> f64 {
    let (k, d) = (tc.k as f64, tc.d as f64);
    let m = tc.beta_porous(big_d).max(1.0);
    let nm1 = (n - 1) as f64;
    nm1 / 3.0
        * (eps * tc.n_cubes).sqrt()
        * tc.claim_factor()
        * (k * nm1 * (d - big_d / 2.0)).exp2()
        * m.powf(nm1)
}

/// `eps_0` with its substitution residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Epsilon0 {
    pub eps0: f64,
    pub target: f64,
    pub residual: f64,
    pub m_factor: f64,
}

/// Closed-form `eps_0` solving `R(eps_0) = (5/18) C^{-1/2} 2^{k/2}`.
pub fn epsilon0(tc: &TheoremConstants, big_d: f64, n: u32) -> Result<Epsilon0> {
    tc.check_d(big_d)?;
    if n < 2 {
        return invalid("n must be at least 2");
    }
    if !tc.theorem_valid {
        return invalid("epsilon0 needs k >= log2 C");
    }
    let (k, d) = (tc.k as f64, tc.d as f64);
    let m = tc.beta_porous(big_d).max(1.0);
    let nm1 = (n - 1) as f64;
    let lead = 5.0 / (6.0 * nm1);
    let log2_eps = 2.0 * lead.log2() - tc.n_cubes.log2() - 2.0 * k * nm1 * (d - big_d / 2.0) - 2.0 * nm1 * m.log2();
    let eps0 = log2_eps.exp2();
    let target = 5.0 / 18.0 * tc.claim_factor();
    let residual = (r_coefficient(tc, big_d, n, eps0) - target).abs();
    if residual > 1e-12 * target {
        return Err(Error::InvalidArgument(format!("eps0 substitution residual {residual:e}")));
    }
    Ok(Epsilon0 { eps0, target, residual, m_factor: m })
}

/// `(n, K)` with supporting quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PorosityGain {
    pub d0: f64,
    pub delta: f64,
    pub n: u32,
    pub gain: f64,
    /// `k delta D`.
    pub rate: f64,
}

/// Relative margin below which `k delta D n` and `k - log2 C` count as equal.
pub const GAIN_TIE: f64 = 1e-12;

/// Least `n` with `2^{k delta D n} > C^{-1} 2^k`, and `K = (C 2^{-k} 2^{k delta D n})^{1/2}`.
pub fn porosity_gain(tc: &TheoremConstants, big_d: f64, p: f64) -> Result<PorosityGain> {
    tc.check_d(big_d)?;
    if !(p > 0.0 && p < 1.0) {
        return invalid("p must lie in (0, 1)");
    }
    let (k, d) = (tc.k as f64, tc.d as f64);
    let d0 = d - p + (9.0 * tc.cap_c).ln() / (k * 2f64.ln());
    if big_d <= d0 {
        return invalid(format!("D = {big_d} must exceed D0 = {d0}"));
    }
    let delta = (1.0 / d0 - 1.0 / big_d) * (d - p);
    let rate = k * delta * big_d;
    let need = k - tc.cap_c.log2();
    let exceeds = |n: u64| rate * n as f64 > need + GAIN_TIE * need.abs().max(1.0);
    let mut n = if need < 0.0 { 1 } else { (need / rate).floor() as u64 + 1 };
    while n > 1 && exceeds(n - 1) {
        n -= 1;
    }
    while !exceeds(n) {
        n += 1;
    }
    let n = u32::try_from(n).map_err(|_| Error::InstanceTooLarge("n overflows".into()))?;
    let gain = ((rate * n as f64 - need) / 2.0).exp2();
    Ok(PorosityGain { d0, delta, n, gain, rate })
}

/// `C^{1/2} 2^{-k/2}` times the `beta` of each scale, per block of `n`.
///
/// Returns `log2` of the product for flags `Q_x^1 .. Q_x^{nL}`.
pub fn gain_product_log2(tc: &TheoremConstants, big_d: f64, n: u32, flags: &[bool]) -> Result<f64> {
    if n == 0 || flags.is_empty() || !flags.len().is_multiple_of(n as usize) {
        return invalid("flags must cover a positive whole number of blocks");
    }
    let blocks = (flags.len() / n as usize) as f64;
    let (bp, bn) = (tc.beta_porous(big_d).log2(), tc.beta_plain(big_d).log2());
    let betas: f64 = flags.iter().map(|&f| if f { bp } else { bn }).sum();
    Ok(blocks * (-tc.claim_factor().log2()) + betas)
}

/// The bound with its coarse form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimBound {
    pub constants: TheoremConstants,
    pub p: f64,
    /// `d - p + ln(9C) / (k ln 2)`.
    pub bound: f64,
    /// `D0` of the porosity gain (equal to `bound`).
    pub d0: f64,
    /// `d - p + C' / ln(1/(1-2 alpha))` with `C' = (l+2) ln(9C)`.
    pub coarse: f64,
    /// Bound at least `d`.
    pub vacuous: bool,
}

pub fn dim_bound(d: u32, p: f64, alpha: f64, c_override: Option<f64>) -> Result<DimBound> {
    if !(0.0..=1.0).contains(&p) {
        return invalid("p must lie in [0, 1]");
    }
    let tc = constants(d, alpha, c_override)?;
    let log9c = (9.0 * tc.cap_c).ln();
    let bound = d as f64 - p + log9c / (tc.k as f64 * 2f64.ln());
    let c_prime = (tc.l as f64 + 2.0) * log9c;
    let coarse = d as f64 - p + c_prime / (1.0 / (1.0 - 2.0 * alpha)).ln();
    Ok(DimBound { vacuous: bound >= d as f64, constants: tc, p, bound, d0: bound, coarse })
}

/// `(level, porous, total)` subcube counts.
pub type LevelCounts = Vec<(usize, u64, u64)>;

/// Per-level classification counts and the two sides of the claim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim1Report {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub subcubes: u64,
    /// `(depth, porous count, cube count)` per refinement level.
    pub porous_by_level: LevelCounts,
    pub eps: f64,
    pub eps0: f64,
}

/// Options for the claim checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimParams {
    pub big_d: f64,
    pub n: u32,
    pub eps: f64,
    /// Guard bits below each porosity radius.
    pub guard: u32,
    pub witness: WitnessRule,
}

/// Largest refinement summed explicitly.
pub const MAX_CLAIM_BITS: u32 = 24;

fn deterministic_sum(values: &[f64]) -> f64 {
    const CHUNK: usize = 4096;
    let partial: Vec<f64> = values.par_chunks(CHUNK).map(|c| c.iter().sum::<f64>()).collect();
    partial.iter().sum()
}

/// `log2` of the `beta` products down `levels` 2^k-adic levels below a cube,
/// and the per-level porous counts.
fn beta_products(
    m: &CascadeMeasure,
    tc: &TheoremConstants,
    top_depth: usize,
    top_index: u64,
    levels: u32,
    cp: &ClaimParams,
) -> Result<(Vec<f64>, LevelCounts)> {
    let k = tc.k;
    let params = CubePorosityParams {
        k,
        l: tc.l,
        alpha: tc.alpha,
        eps: cp.eps,
        guard: cp.guard,
        witness: cp.witness,
    };
    let (bp, bn) = (tc.beta_porous(cp.big_d).log2(), tc.beta_plain(cp.big_d).log2());
    let mut prod = vec![0.0f64];
    let mut counts = Vec::new();
    for j in 1..=levels {
        let depth = top_depth + j as usize;
        let width = 1u64 << (k * j);
        let first = top_index << (k * j);
        let flags = porous_cube_flags(m, depth, first, width, &params)?;
        counts.push((depth, flags.iter().filter(|&&f| f).count() as u64, width));
        let fan = 1usize << k;
        prod = flags
            .par_iter()
            .enumerate()
            .map(|(q, &f)| prod[q / fan] + if f { bp } else { bn })
            .collect();
    }
    Ok((prod, counts))
}

fn claim_preconditions(m: &CascadeMeasure, tc: &TheoremConstants, bits: u32) -> Result<()> {
    if !tc.theorem_valid {
        return invalid("claim checks need k >= log2 C");
    }
    if tc.d != 1 {
        return invalid("claim checks run in d = 1");
    }
    if bits > MAX_CLAIM_BITS {
        return Err(Error::InstanceTooLarge(format!("2^{bits} subcubes")));
    }
    if bits as usize > m.arity_log() as usize * m.max_depth() {
        return Err(Error::InstanceTooLarge("refinement beyond the measure's max_depth".into()));
    }
    Ok(())
}

/// Checks the `n`-level sum inequality below the 2^k-adic cube `q`.
pub fn verify_claim1(m: &CascadeMeasure, q: &CubeIndex, tc: &TheoremConstants, cp: &ClaimParams) -> Result<Claim1Report> {
    if q.arity_log() != tc.k || q.dim() != 1 {
        return invalid("Q must be a one-dimensional 2^k-adic cube");
    }
    if cp.n < 2 {
        return invalid("n must be at least 2");
    }
    let e0 = epsilon0(tc, cp.big_d, cp.n)?;
    if !(cp.eps > 0.0 && cp.eps <= e0.eps0) {
        return invalid(format!("eps must lie in (0, eps0 = {:e}]", e0.eps0));
    }
    let k = tc.k;
    let i = q.depth();
    let leaf_bits = k * (i as u32 + cp.n);
    claim_preconditions(m, tc, k * cp.n)?;
    if leaf_bits > 62 {
        return Err(Error::InstanceTooLarge("cube index beyond 62 bits".into()));
    }
    let top = q.axis_index(0)?;
    let mu_q = m.mass_of_cube(q)?;
    let half_d = cp.big_d / 2.0;
    let rhs = tc.claim_factor() * (q.side_log2() as f64 * half_d).exp2() * mu_q.sqrt();
    let (prod, counts) = beta_products(m, tc, i, top, cp.n, cp)?;
    let first = top << (k * cp.n);
    let r_log2 = -(leaf_bits as f64);
    let terms: Vec<f64> = prod
        .par_iter()
        .enumerate()
        .map(|(j, &lp)| {
            let mu = m.cell_mass((first + j as u64) as i128, leaf_bits)?;
            Ok(if mu > 0.0 { (lp + r_log2 * half_d).exp2() * mu.sqrt() } else { 0.0 })
        })
        .collect::<Result<Vec<_>>>()?;
    let lhs = deterministic_sum(&terms);
    Ok(Claim1Report {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-12),
        subcubes: prod.len() as u64,
        porous_by_level: counts,
        eps: cp.eps,
        eps0: e0.eps0,
    })
}

/// Iterated sum over the full cover by cubes of depth `nL`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim2Report {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub blocks: u32,
}

/// Sums the weighted masses of all depth-`nL` cubes against `mu(R)^{1/2}`.
pub fn verify_claim2(m: &CascadeMeasure, tc: &TheoremConstants, cp: &ClaimParams, blocks: u32) -> Result<Claim2Report> {
    if blocks == 0 || cp.n < 2 {
        return invalid("need blocks >= 1 and n >= 2");
    }
    let levels = cp.n * blocks;
    let bits = tc.k * levels;
    claim_preconditions(m, tc, bits)?;
    let (prod, _) = beta_products(m, tc, 0, 0, levels, cp)?;
    let block_factor = -(blocks as f64) * tc.claim_factor().log2();
    let half_d = cp.big_d / 2.0;
    let terms: Vec<f64> = prod
        .par_iter()
        .enumerate()
        .map(|(j, &lp)| {
            let mu = m.cell_mass(j as i128, bits)?;
            Ok(if mu > 0.0 { (lp + block_factor - bits as f64 * half_d).exp2() * mu.sqrt() } else { 0.0 })
        })
        .collect::<Result<Vec<_>>>()?;
    let lhs = deterministic_sum(&terms);
    Ok(Claim2Report { lhs, rhs: 1.0, holds: lhs <= 1.0 + 1e-12, blocks })
}

/// Checks that `n` is least with `2^{k delta D n} > C^{-1} 2^k`.
pub fn gain_is_tight(g: &PorosityGain, tc: &TheoremConstants) -> bool {
    let need = tc.k as f64 - tc.cap_c.log2();
    let exceeds = |n: u32| g.rate * n as f64 > need + GAIN_TIE * need.abs().max(1.0);
    exceeds(g.n) && (g.n == 1 || !exceeds(g.n - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_examples() {
        let tc = constants(1, (1.0 - 2f64.powi(-9)) / 2.0, None).unwrap();
        assert_eq!((tc.l, tc.k), (2, 6));
        assert_eq!(tc.cap_c, 8.0);
        assert!(tc.theorem_valid);
        let tc = constants(1, 31.0 / 64.0, None).unwrap();
        assert_eq!(tc.k, 2);
        assert!(!tc.theorem_valid);
        let tc = constants(2, 0.49, None).unwrap();
        assert_eq!((tc.l, tc.k), (3, 3));
        assert!(constants(1, 0.4, None).is_err());
        for k in 2..40 {
            assert_eq!(constants(1, alpha_for_k(k), None).unwrap().k, k);
        }
    }

    #[test]
    fn beta_values() {
        let mut tc = constants(1, alpha_for_k(6), None).unwrap();
        tc.cap_c = 8.0;
        assert!((beta(true, &tc, 0.8).unwrap() - 0.6221).abs() < 1e-4);
        assert!((beta(false, &tc, 0.8).unwrap() - 0.2199).abs() < 1e-4);
        assert!((beta(false, &tc, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn eps0_example() {
        let tc = constants(1, alpha_for_k(6), None).unwrap();
        let e = epsilon0(&tc, 0.8, 2).unwrap();
        assert!((e.eps0 - 7.38e-5).abs() < 0.01e-5, "{}", e.eps0);
        assert_eq!(e.m_factor, 1.0);
        let mut last = e.eps0;
        for n in 3..=10 {
            let v = epsilon0(&tc, 0.8, n).unwrap().eps0;
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn gain_example() {
        let tc = constants(1, alpha_for_k(10), None).unwrap();
        let g = porosity_gain(&tc, 1.2, 0.5).unwrap();
        assert!((g.d0 - 1.11699).abs() < 1e-4);
        assert!((g.delta - 0.03097).abs() < 1e-4);
        assert_eq!(g.n, 19);
        assert!((g.gain - 1.02).abs() < 0.01 && g.gain > 1.0);
        assert!(gain_is_tight(&g, &tc));
        assert!(porosity_gain(&tc, 1.0, 0.5).is_err());
    }

    #[test]
    fn bound_example() {
        let b = dim_bound(1, 1.0, alpha_for_k(10), None).unwrap();
        assert!((b.bound - 72f64.ln() / (10.0 * 2f64.ln())).abs() < 1e-12);
        assert!((b.bound - 0.617).abs() < 1e-3);
        assert!(b.coarse >= b.bound);
        assert!(dim_bound(1, 0.0, 0.49, None).unwrap().vacuous);
    }
}
