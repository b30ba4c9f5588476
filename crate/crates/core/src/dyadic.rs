//! Half-open 2^k-adic cubes of [0,1)^d with exact dyadic coordinates.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Exact dyadic rational `num / 2^exp`, kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dyadic {
    num: i128,
    exp: u32,
}

fn shl_checked(n: i128, s: u32) -> Option<i128> {
    if n == 0 {
        return Some(0);
    }
    if s >= 127 || n.unsigned_abs() > (i128::MAX as u128) >> s {
        return None;
    }
    Some(n << s)
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };

    pub fn new(num: i128, exp: u32) -> Self {
        let mut d = Dyadic { num, exp };
        d.normalize();
        d
    }

    fn normalize(&mut self) {
        if self.num == 0 {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().min(self.exp);
        self.num >>= tz;
        self.exp -= tz;
    }

    pub fn numerator(&self) -> i128 {
        self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    /// Exact conversion; every finite `f64` is a dyadic rational.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Self::ZERO);
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i128 } else { 1 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if raw_exp == 0 {
            (frac as i128, -1074)
        } else {
            ((frac | (1u64 << 52)) as i128, raw_exp - 1075)
        };
        if e >= 0 {
            shl_checked(mant, e as u32).map(|n| Dyadic::new(sign * n, 0))
        } else {
            let exp = (-e) as u32;
            let mut d = Dyadic { num: sign * mant, exp: 0 };
            let tz = mant.trailing_zeros().min(exp);
            d.num >>= tz;
            let rest = exp - tz;
            if rest > 126 {
                return None;
            }
            d.exp = rest;
            Some(d)
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 * (-(self.exp as f64)).exp2()
    }

    fn align(a: Dyadic, b: Dyadic) -> Option<(i128, i128, u32)> {
        let e = a.exp.max(b.exp);
        Some((shl_checked(a.num, e - a.exp)?, shl_checked(b.num, e - b.exp)?, e))
    }

    pub fn checked_add(self, other: Dyadic) -> Option<Dyadic> {
        let (x, y, e) = Self::align(self, other)?;
        Some(Dyadic::new(x.checked_add(y)?, e))
    }

    pub fn checked_sub(self, other: Dyadic) -> Option<Dyadic> {
        let (x, y, e) = Self::align(self, other)?;
        Some(Dyadic::new(x.checked_sub(y)?, e))
    }

    pub fn checked_mul(self, other: Dyadic) -> Option<Dyadic> {
        let e = self.exp.checked_add(other.exp)?;
        if e > 126 {
            return None;
        }
        Some(Dyadic::new(self.num.checked_mul(other.num)?, e))
    }

    /// Multiply by `2^-s`.
    pub fn halve(self, s: u32) -> Option<Dyadic> {
        let e = self.exp.checked_add(s)?;
        if e > 126 {
            return None;
        }
        Some(Dyadic::new(self.num, e))
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match Self::align(*self, *other) {
            Some((x, y, _)) => x.cmp(&y),
            None => self.to_f64().total_cmp(&other.to_f64()),
        }
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

/// Axis-aligned half-open box `[lo, hi)` in R^d.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Box {
    pub lo: Vec<Dyadic>,
    pub hi: Vec<Dyadic>,
}

impl Box {
    pub fn new(lo: Vec<Dyadic>, hi: Vec<Dyadic>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return invalid("box endpoints must have equal, positive length");
        }
        if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return invalid("box requires lower < upper on every axis");
        }
        Ok(Box { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[Dyadic]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (a, b))| a <= x && x < b)
    }

    pub fn bounds_f64(&self) -> Vec<(f64, f64)> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (a.to_f64(), b.to_f64()))
            .collect()
    }

    /// Scale every side by `factor` about the centre.
    pub fn magnify(&self, factor: f64) -> Result<Box> {
        if !(factor > 0.0) {
            return invalid("magnify factor must be positive");
        }
        let f = Dyadic::from_f64(factor)
            .ok_or_else(|| Error::InvalidArgument("factor not representable".into()))?;
        let overflow = || Error::InstanceTooLarge("dyadic overflow in magnify".into());
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for (a, b) in self.lo.iter().zip(&self.hi) {
            let half = b.checked_sub(*a).and_then(|w| w.halve(1)).ok_or_else(overflow)?;
            let centre = a.checked_add(half).ok_or_else(overflow)?;
            let h = half.checked_mul(f).ok_or_else(overflow)?;
            lo.push(centre.checked_sub(h).ok_or_else(overflow)?);
            hi.push(centre.checked_add(h).ok_or_else(overflow)?);
        }
        Ok(Box { lo, hi })
    }
}

/// A half-open 2^k-adic cube of side `2^{-k i}` in [0,1)^d.
///
/// Each digit packs the `d` per-axis k-bit coordinates of one level,
/// axis `a` occupying bits `a*k .. (a+1)*k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeIndex {
    arity_log: u32,
    dim: u32,
    digits: Vec<u64>,
}

impl CubeIndex {
    /// The root cube [0,1)^d.
    pub fn root(arity_log: u32, dim: u32) -> Result<Self> {
        if arity_log == 0 || dim == 0 || arity_log * dim > 63 {
            return invalid("need arity_log >= 1, dim >= 1 and arity_log*dim <= 63");
        }
        Ok(CubeIndex { arity_log, dim, digits: Vec::new() })
    }

    pub fn from_digits(arity_log: u32, dim: u32, digits: Vec<u64>) -> Result<Self> {
        let root = Self::root(arity_log, dim)?;
        let base = root.branching();
        if let Some(d) = digits.iter().find(|&&d| d >= base) {
            return invalid(format!("digit {d} out of range [0, {base})"));
        }
        Ok(CubeIndex { digits, ..root })
    }

    /// One-dimensional cube `[j 2^{-k i}, (j+1) 2^{-k i})`.
    pub fn from_index(arity_log: u32, depth: usize, j: u64) -> Result<Self> {
        let bits = arity_log as usize * depth;
        if bits > 63 {
            return Err(Error::InstanceTooLarge(format!("{bits} bits exceed 63")));
        }
        if bits < 64 && j >> bits != 0 {
            return invalid(format!("index {j} out of range at depth {depth}"));
        }
        let mask = (1u64 << arity_log) - 1;
        let digits = (0..depth)
            .map(|t| (j >> (arity_log as usize * (depth - 1 - t))) & mask)
            .collect();
        Self::from_digits(arity_log, 1, digits)
    }

    /// The depth-`depth` cube containing the point `x` of [0,1).
    pub fn containing(arity_log: u32, depth: usize, x: Dyadic) -> Result<Self> {
        if x < Dyadic::ZERO || x >= Dyadic::ONE {
            return invalid("point must lie in [0,1)");
        }
        let bits = arity_log * depth as u32;
        if bits > 63 {
            return Err(Error::InstanceTooLarge(format!("{bits} bits exceed 63")));
        }
        let j = if x.exp >= bits {
            (x.num >> (x.exp - bits)) as u64
        } else {
            (x.num << (bits - x.exp)) as u64
        };
        Self::from_index(arity_log, depth, j)
    }

    pub fn arity_log(&self) -> u32 {
        self.arity_log
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    pub fn digits(&self) -> &[u64] {
        &self.digits
    }

    /// Number of children, `2^{k d}`.
    pub fn branching(&self) -> u64 {
        1u64 << (self.arity_log * self.dim)
    }

    /// `log2` of the side length, `-k i`.
    pub fn side_log2(&self) -> i64 {
        -(self.arity_log as i64 * self.depth() as i64)
    }

    pub fn side(&self) -> f64 {
        (self.side_log2() as f64).exp2()
    }

    pub fn child(&self, digit: u64) -> Result<Self> {
        if digit >= self.branching() {
            return invalid(format!("digit {digit} out of range"));
        }
        let mut digits = self.digits.clone();
        digits.push(digit);
        Ok(CubeIndex { digits, ..*self })
    }

    pub fn child_cubes(&self) -> Vec<CubeIndex> {
        (0..self.branching())
            .map(|d| {
                let mut digits = Vec::with_capacity(self.depth() + 1);
                digits.extend_from_slice(&self.digits);
                digits.push(d);
                CubeIndex { digits, ..*self }
            })
            .collect()
    }

    /// All descendants `n` levels down, in lexicographic order.
    pub fn descendants(&self, n: usize) -> Vec<CubeIndex> {
        let mut level = vec![self.clone()];
        for _ in 0..n {
            level = level.iter().flat_map(|q| q.child_cubes()).collect();
        }
        level
    }

    pub fn parent(&self) -> Option<CubeIndex> {
        (self.depth() > 0).then(|| CubeIndex {
            digits: self.digits[..self.depth() - 1].to_vec(),
            ..*self
        })
    }

    /// The unique depth-`j` cube containing `self`.
    pub fn ancestor(&self, j: usize) -> Result<CubeIndex> {
        if j > self.depth() {
            return invalid(format!("ancestor depth {j} exceeds cube depth {}", self.depth()));
        }
        Ok(CubeIndex { digits: self.digits[..j].to_vec(), ..*self })
    }

    pub fn is_ancestor_of(&self, other: &CubeIndex) -> bool {
        self.arity_log == other.arity_log
            && self.dim == other.dim
            && self.depth() <= other.depth()
            && other.digits[..self.depth()] == self.digits[..]
    }

    /// Coordinate of the digit along one axis.
    pub fn axis_digit(&self, level: usize, axis: u32) -> u64 {
        (self.digits[level] >> (axis * self.arity_log)) & ((1u64 << self.arity_log) - 1)
    }

    /// Integer position along `axis`: the lower corner is `index / 2^{k i}`.
    pub fn axis_index(&self, axis: u32) -> Result<u64> {
        let bits = self.arity_log as usize * self.depth();
        if bits > 63 {
            return Err(Error::InstanceTooLarge(format!("{bits} bits exceed 63")));
        }
        if axis >= self.dim {
            return invalid("axis out of range");
        }
        Ok((0..self.depth()).fold(0u64, |acc, t| {
            (acc << self.arity_log) | self.axis_digit(t, axis)
        }))
    }

    pub fn lower_corner(&self) -> Result<Vec<Dyadic>> {
        let e = self.arity_log * self.depth() as u32;
        (0..self.dim)
            .map(|a| Ok(Dyadic::new(self.axis_index(a)? as i128, e)))
            .collect()
    }

    pub fn to_box(&self) -> Result<Box> {
        let e = self.arity_log * self.depth() as u32;
        let idx = (0..self.dim).map(|a| self.axis_index(a)).collect::<Result<Vec<_>>>()?;
        let lo = idx.iter().map(|&j| Dyadic::new(j as i128, e)).collect();
        let hi = idx.iter().map(|&j| Dyadic::new(j as i128 + 1, e)).collect();
        Box::new(lo, hi)
    }

    pub fn contains_point(&self, p: &[Dyadic]) -> Result<bool> {
        Ok(self.to_box()?.contains(p))
    }

    /// The cube `cQ` obtained by magnifying about the centre.
    pub fn magnify(&self, factor: f64) -> Result<Box> {
        self.to_box()?.magnify(factor)
    }

    /// Parse `k:i:d1.d2...di` for a cube of dimension `dim`.
    pub fn parse_with_dim(s: &str, dim: u32) -> Result<Self> {
        let perr = |m: &str| Error::Parse { field: "cube_id".into(), message: m.into() };
        let mut parts = s.splitn(3, ':');
        let k: u32 = parts
            .next()
            .and_then(|p| p.trim().parse().ok())
            .ok_or_else(|| perr("missing arity"))?;
        let i: usize = parts
            .next()
            .and_then(|p| p.trim().parse().ok())
            .ok_or_else(|| perr("missing depth"))?;
        let rest = parts.next().unwrap_or("").trim();
        let digits: Vec<u64> = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split('.')
                .map(|d| d.parse().map_err(|_| perr("bad digit")))
                .collect::<Result<_>>()?
        };
        if digits.len() != i {
            return Err(perr("digit count does not match depth"));
        }
        Self::from_digits(k, dim, digits)
    }
}

impl fmt::Display for CubeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:", self.arity_log, self.depth())?;
        for (t, d) in self.digits.iter().enumerate() {
            if t > 0 {
                f.write_str(".")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for CubeIndex {
    type Err = Error;

    /// Parses a one-dimensional cube id.
    fn from_str(s: &str) -> Result<Self> {
        Self::parse_with_dim(s, 1)
    }
}
