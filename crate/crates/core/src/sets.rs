//! Finite-depth dyadic sets built from per-stage digit patterns.
//!
//! A set is a product of stages: stage `t` reads the next `bits` binary
//! digits and keeps the patterns its rule allows. Survivors at any depth
//! are enumerated on demand in sorted order.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{key_values, parse_list, parse_num, SampledPoint};
use crate::dyadic::CubeIndex;
use crate::error::{invalid, Error, Result};

/// Deepest construction accepted, in binary levels.
pub const MAX_BUILD_BITS: usize = 4096;

const MAX_ENUMERATION: u128 = 1 << 24;

/// Allowed digit patterns of one stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    /// Explicit sorted list.
    Set(Vec<u64>),
    /// Patterns with `x & mask == value`.
    Mask { mask: u64, value: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub bits: u32,
    pub pattern: Pattern,
}

impl Stage {
    fn new(bits: u32, pattern: Pattern) -> Result<Self> {
        if bits == 0 || bits > 63 {
            return Err(Error::InstanceTooLarge(format!("stage of {bits} bits")));
        }
        let pattern = match pattern {
            Pattern::Set(mut v) => {
                v.sort_unstable();
                v.dedup();
                if v.is_empty() || v.iter().any(|&x| x >> bits != 0) {
                    return invalid("stage patterns must be nonempty and fit the stage width");
                }
                if v.len() as u64 == 1u64 << bits {
                    Pattern::Mask { mask: 0, value: 0 }
                } else {
                    Pattern::Set(v)
                }
            }
            Pattern::Mask { mask, value } => {
                if mask >> bits != 0 || value & !mask != 0 {
                    return invalid("mask pattern out of range");
                }
                Pattern::Mask { mask, value }
            }
        };
        Ok(Stage { bits, pattern })
    }

    fn any(bits: u32) -> Self {
        Stage { bits, pattern: Pattern::Mask { mask: 0, value: 0 } }
    }

    fn is_full(&self) -> bool {
        matches!(self.pattern, Pattern::Mask { mask: 0, .. })
    }

    /// Is there an allowed pattern whose top `t` bits equal `p`?
    fn allows_prefix(&self, p: u64, t: u32) -> bool {
        let shift = self.bits - t;
        match &self.pattern {
            Pattern::Set(v) => {
                let lo = p << shift;
                let hi = lo + ((1u64 << shift) - 1);
                let i = v.partition_point(|&x| x < lo);
                i < v.len() && v[i] <= hi
            }
            Pattern::Mask { mask, value } => ((p << shift) ^ value) & mask & !((1u64 << shift) - 1) == 0,
        }
    }

    /// Number of distinct allowed prefixes of length `t`.
    fn prefix_count(&self, t: u32) -> u128 {
        let shift = self.bits - t;
        match &self.pattern {
            Pattern::Set(v) => {
                let mut n = 0u128;
                let mut last = None;
                for &x in v {
                    let p = x >> shift;
                    if last != Some(p) {
                        n += 1;
                        last = Some(p);
                    }
                }
                n
            }
            Pattern::Mask { mask, .. } => {
                let fixed = (mask >> shift).count_ones();
                1u128 << (t - fixed)
            }
        }
    }

    fn log2_prefix_count(&self, t: u32) -> f64 {
        match &self.pattern {
            Pattern::Set(_) => (self.prefix_count(t) as f64).log2(),
            Pattern::Mask { mask, .. } => (t - (mask >> (self.bits - t)).count_ones()) as f64,
        }
    }

    /// Allowed values of the top `t` bits, ascending.
    fn prefixes(&self, t: u32) -> Vec<u64> {
        let shift = self.bits - t;
        match &self.pattern {
            Pattern::Set(v) => {
                let mut out: Vec<u64> = v.iter().map(|x| x >> shift).collect();
                out.dedup();
                out
            }
            Pattern::Mask { .. } => (0..1u64 << t).filter(|&p| self.allows_prefix(p, t)).collect(),
        }
    }
}

/// How a set was built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SetRule {
    Comb { k: u32, keep: Vec<u64> },
    Example { m: u32, k: u32, n: u32, l_max: u32 },
    DigitConstraint { period: usize, residues: Vec<usize>, digit: u8 },
    Full,
}

/// A set given by its surviving cubes at each binary depth up to `build_bits`.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicSet {
    rule: SetRule,
    arity_log: u32,
    stages: Vec<Stage>,
    starts: Vec<usize>,
    build_bits: usize,
}

impl DyadicSet {
    fn from_stages(rule: SetRule, arity_log: u32, stages: Vec<Stage>) -> Result<Self> {
        let mut starts = Vec::with_capacity(stages.len());
        let mut acc = 0usize;
        for s in &stages {
            starts.push(acc);
            acc += s.bits as usize;
        }
        if acc > MAX_BUILD_BITS {
            return Err(Error::InstanceTooLarge(format!("build depth {acc} bits")));
        }
        Ok(DyadicSet { rule, arity_log, stages, starts, build_bits: acc })
    }

    pub fn rule(&self) -> &SetRule {
        &self.rule
    }

    pub fn arity_log(&self) -> u32 {
        self.arity_log
    }

    /// Build depth in binary levels.
    pub fn build_bits(&self) -> usize {
        self.build_bits
    }

    /// Build depth in levels of the set's own arity.
    pub fn build_depth(&self) -> usize {
        self.build_bits / self.arity_log as usize
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Does the binary cell with these leading digits meet the set?
    pub fn prefix_survives(&self, bits: &[u8]) -> bool {
        let mut pos = 0usize;
        for (s, st) in self.stages.iter().enumerate() {
            if pos >= bits.len() {
                return true;
            }
            let t = (st.bits as usize).min(bits.len() - pos) as u32;
            let p = bits[pos..pos + t as usize].iter().fold(0u64, |a, &b| (a << 1) | b as u64);
            if !st.allows_prefix(p, t) {
                return false;
            }
            pos = self.starts[s] + st.bits as usize;
        }
        true
    }

    /// Does the cube meet the set (equivalently, is it a survivor)?
    pub fn contains_cube(&self, q: &CubeIndex) -> Result<bool> {
        Ok(self.prefix_survives(&cube_bits(q)?))
    }

    /// Does the set contain the binary expansion `x` (up to the build depth)?
    pub fn contains_digits(&self, digits: &[u64]) -> bool {
        let bits: Vec<u8> = digits.iter().take(self.build_bits).map(|&d| d as u8).collect();
        self.prefix_survives(&bits)
    }

    /// Number of survivors at binary depth `b`; `None` if it overflows.
    pub fn survivor_count_bits(&self, b: usize) -> Option<u128> {
        let mut n: u128 = 1;
        for (s, st) in self.stages.iter().enumerate() {
            let start = self.starts[s];
            if start >= b {
                break;
            }
            let t = (st.bits as usize).min(b - start) as u32;
            n = n.checked_mul(st.prefix_count(t))?;
        }
        if b > self.build_bits {
            n = n.checked_mul(1u128.checked_shl((b - self.build_bits) as u32)?)?;
        }
        Some(n)
    }

    pub fn log2_survivor_count_bits(&self, b: usize) -> f64 {
        let mut n = 0.0;
        for (s, st) in self.stages.iter().enumerate() {
            let start = self.starts[s];
            if start >= b {
                break;
            }
            let t = (st.bits as usize).min(b - start) as u32;
            n += st.log2_prefix_count(t);
        }
        n + b.saturating_sub(self.build_bits) as f64
    }

    /// Survivor count at depth `i` in the set's arity.
    pub fn survivor_count(&self, i: usize) -> Option<u128> {
        self.survivor_count_bits(i * self.arity_log as usize)
    }

    pub fn log2_survivor_count(&self, i: usize) -> f64 {
        self.log2_survivor_count_bits(i * self.arity_log as usize)
    }

    /// Sorted surviving cubes at depth `i` in the set's arity.
    pub fn survivors(&self, i: usize) -> Result<Vec<CubeIndex>> {
        let b = i * self.arity_log as usize;
        if i > self.build_depth() {
            return invalid("depth beyond build depth");
        }
        if b > 62 {
            return Err(Error::InstanceTooLarge("survivor lists are limited to 62 bits".into()));
        }
        match self.survivor_count_bits(b) {
            Some(n) if n <= MAX_ENUMERATION => {}
            _ => return Err(Error::InstanceTooLarge(format!("too many survivors at depth {i}"))),
        }
        let cells = self.cells_in_window(b as u32, 0, 1u64 << b)?;
        cells.into_iter().map(|c| CubeIndex::from_index(self.arity_log, i, c)).collect()
    }

    /// Surviving binary cells at depth `bits` with index in `[lo, hi)`, sorted.
    pub fn cells_in_window(&self, bits: u32, lo: u64, hi: u64) -> Result<Vec<u64>> {
        let mut out = Vec::new();
        self.runs_in_window(bits, lo, hi, &mut |a, b| out.extend(a..b))?;
        Ok(out)
    }

    /// Maximal runs `[a, b)` of surviving cells at depth `bits` inside `[lo, hi)`.
    pub fn occupied_runs(&self, bits: u32, lo: u64, hi: u64) -> Result<Vec<(u64, u64)>> {
        let mut out: Vec<(u64, u64)> = Vec::new();
        self.runs_in_window(bits, lo, hi, &mut |a, b| match out.last_mut() {
            Some(last) if last.1 == a => last.1 = b,
            _ => out.push((a, b)),
        })?;
        Ok(out)
    }

    fn runs_in_window(&self, bits: u32, lo: u64, hi: u64, emit: &mut dyn FnMut(u64, u64)) -> Result<()> {
        if bits > 62 {
            return Err(Error::InstanceTooLarge("window scans are limited to 62 bits".into()));
        }
        let end = 1u64 << bits;
        let (lo, hi) = (lo.min(end), hi.min(end));
        if lo >= hi {
            return Ok(());
        }
        // Stages clipped to `bits`, padded with free bits past the build depth.
        let mut plan: Vec<(Stage, u32)> = Vec::new();
        let mut used = 0u32;
        for st in &self.stages {
            if used >= bits {
                break;
            }
            let t = st.bits.min(bits - used);
            plan.push((st.clone(), t));
            used += t;
        }
        if used < bits {
            plan.push((Stage::any(bits - used), bits - used));
        }
        let mut full_from = vec![false; plan.len() + 1];
        full_from[plan.len()] = true;
        for s in (0..plan.len()).rev() {
            full_from[s] = full_from[s + 1] && plan[s].0.is_full();
        }
        self.walk(&plan, &full_from, 0, 0, bits, lo, hi, emit);
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        &self,
        plan: &[(Stage, u32)],
        full_from: &[bool],
        s: usize,
        prefix: u64,
        rem: u32,
        lo: u64,
        hi: u64,
        emit: &mut dyn FnMut(u64, u64),
    ) {
        let a = prefix << rem;
        let b = (prefix + 1) << rem;
        if b <= lo || a >= hi {
            return;
        }
        if full_from[s] {
            emit(a.max(lo), b.min(hi));
            return;
        }
        let (st, t) = &plan[s];
        let rest = rem - t;
        let (wlo, whi) = ((lo.max(a) - a) >> rest, ((hi.min(b) - a - 1) >> rest) + 1);
        match &st.pattern {
            Pattern::Mask { .. } => {
                for p in wlo..whi {
                    if st.allows_prefix(p, *t) {
                        self.walk(plan, full_from, s + 1, (prefix << t) | p, rest, lo, hi, emit);
                    }
                }
            }
            Pattern::Set(_) => {
                for p in st.prefixes(*t) {
                    if p >= wlo && p < whi {
                        self.walk(plan, full_from, s + 1, (prefix << t) | p, rest, lo, hi, emit);
                    }
                }
            }
        }
    }

    /// Survivor drawn with one uniform pattern per stage, as binary digits.
    ///
    /// Stream `index` of `seed`, as for cascade sampling.
    pub fn sample_survivor(&self, seed: u64, index: u64) -> SampledPoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let mut digits = Vec::with_capacity(self.build_bits);
        for st in &self.stages {
            let v = match &st.pattern {
                Pattern::Set(v) => v[rng.random_range(0..v.len())],
                Pattern::Mask { mask, value } => (rng.random::<u64>() & !mask) | value,
            };
            digits.extend((0..st.bits).rev().map(|b| v >> b & 1));
        }
        SampledPoint::from_digits(1, digits)
    }

    /// Writes the survivors at each depth `1..=depth` as CSV (`depth,cube_id`).
    pub fn write_survivors_csv<W: Write>(&self, depth: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(["depth", "cube_id"]).map_err(io)?;
        for i in 0..=depth {
            for q in self.survivors(i)? {
                w.write_record([i.to_string(), q.to_string()]).map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::InvalidArgument(format!("io: {e}")))?;
        Ok(())
    }
}

/// Binary digits of a one-dimensional cube of any arity.
pub fn cube_bits(q: &CubeIndex) -> Result<Vec<u8>> {
    if q.dim() != 1 {
        return invalid("sets live on [0,1]");
    }
    let k = q.arity_log();
    Ok(q.digits()
        .iter()
        .flat_map(|&d| (0..k).rev().map(move |b| ((d >> b) & 1) as u8))
        .collect())
}

/// The whole interval, built to `bits` binary levels.
pub fn full_set(bits: usize) -> Result<DyadicSet> {
    let stages = (0..bits).map(|_| Stage::any(1)).collect();
    DyadicSet::from_stages(SetRule::Full, 1, stages)
}

/// Keeps, at each 2^k-adic level, the cubes whose digit is in `keep`.
pub fn comb_set(k: u32, keep: &[u64], depth: usize) -> Result<DyadicSet> {
    if k == 0 || k > 16 {
        return invalid("arity_log must be in 1..=16");
    }
    if keep.is_empty() || keep.iter().any(|&d| d >> k != 0) {
        return invalid("keep must be nonempty with digits below 2^k");
    }
    let stage = Stage::new(k, Pattern::Set(keep.to_vec()))?;
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    DyadicSet::from_stages(SetRule::Comb { k, keep: sorted }, k, vec![stage; depth])
}

/// Binary levels used by blocks `1..=l_max` of the Cantor-type construction.
pub fn example_bits(k: u32, n: u32, l_max: u32) -> u64 {
    let nk = (n * k) as u64;
    let l = l_max as u64;
    (l * l + l) / 2 * nk * nk
}

/// Cantor-type mean porous set: block `l` is `mnl` two-ends steps of
/// ratio `2^{-nk}` followed by one step keeping every other interval of
/// length `2^{-(nk-mn)nkl}`.
pub fn example_set(m: u32, k: u32, n: u32, l_max: u32) -> Result<DyadicSet> {
    if m == 0 || n == 0 || l_max == 0 || m >= k {
        return invalid("need positive m, n, l_max and m < k");
    }
    let total = example_bits(k, n, l_max);
    if total > MAX_BUILD_BITS as u64 {
        return Err(Error::InstanceTooLarge(format!("{total} binary levels")));
    }
    let nk = n * k;
    let mut stages = Vec::new();
    for l in 1..=l_max {
        let cantor = Stage::new(nk, Pattern::Set(vec![0, (1u64 << nk) - 1]))?;
        for _ in 0..m * n * l {
            stages.push(cantor.clone());
        }
        let fbits = (nk - m * n) * nk * l;
        stages.push(Stage::new(fbits, Pattern::Mask { mask: 1, value: 0 })?);
    }
    DyadicSet::from_stages(SetRule::Example { m, k, n, l_max }, 1, stages)
}

/// Binary digits at levels `j` with `j % period` in `residues` are forced to `digit`.
pub fn digit_constraint(period: usize, residues: &[usize], digit: u8, bits: usize) -> Result<DyadicSet> {
    if period == 0 || residues.iter().any(|&r| r >= period) || digit > 1 {
        return invalid("need period > 0, residues below the period and a binary digit");
    }
    let stages = (1..=bits)
        .map(|j| {
            if residues.contains(&(j % period)) {
                Stage { bits: 1, pattern: Pattern::Set(vec![digit as u64]) }
            } else {
                Stage::any(1)
            }
        })
        .collect();
    let mut r = residues.to_vec();
    r.sort_unstable();
    r.dedup();
    DyadicSet::from_stages(SetRule::DigitConstraint { period, residues: r, digit }, 1, stages)
}

/// The set of points whose even-indexed binary digits vanish.
pub fn even_digits_zero(bits: usize) -> Result<DyadicSet> {
    digit_constraint(2, &[0], 0, bits)
}

/// True iff some depth-`(j+m)` descendant of `d` misses the set.
pub fn has_m_hole(e: &DyadicSet, d: &CubeIndex, m: usize) -> Result<bool> {
    let mut bits = cube_bits(d)?;
    if m == 0 {
        return invalid("m must be positive");
    }
    if bits.len() + m > e.build_bits() {
        return invalid("depth(D) + m exceeds the build depth");
    }
    if !e.prefix_survives(&bits) {
        return Ok(true);
    }
    fn go(e: &DyadicSet, bits: &mut Vec<u8>, left: usize) -> bool {
        if left == 0 {
            return false;
        }
        for b in 0..2u8 {
            bits.push(b);
            let hole = !e.prefix_survives(bits) || go(e, bits, left - 1);
            bits.pop();
            if hole {
                return true;
            }
        }
        false
    }
    Ok(go(e, &mut bits, m))
}

/// Scales of the Cantor-type construction at which every point is porous.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PorousScaleSet {
    pub m: u64,
    pub k: u64,
    pub n: u64,
    pub l_max: u64,
}

impl PorousScaleSet {
    pub fn new(m: u64, k: u64, n: u64, l_max: u64) -> Result<Self> {
        if m == 0 || n == 0 || m >= k {
            return invalid("need positive m, n and m < k");
        }
        Ok(PorousScaleSet { m, k, n, l_max })
    }

    /// `s - (l^2+l)/2 (nk)^2` lies in `{0, .., (mnl-1)nk - 1}` for some `l <= l_max`.
    pub fn contains(&self, s: u64) -> bool {
        let nk2 = (self.n * self.k).pow(2);
        let mut l = 1u64;
        while l <= self.l_max {
            let start = (l * l + l) / 2 * nk2;
            if start > s {
                return false;
            }
            let len = (self.m * self.n * l - 1) * self.n * self.k;
            if s - start < len {
                return true;
            }
            l += 1;
        }
        false
    }
}

/// Scale list with its density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleDensity {
    pub scales: Vec<u64>,
    pub count: u64,
    pub max_scale: u64,
    pub density: f64,
}

/// Porous scales `s` with `1 <= s < max_scale`, and their count over `max_scale`.
pub fn porous_scales(ps: &PorousScaleSet, max_scale: u64) -> Result<ScaleDensity> {
    if max_scale == 0 {
        return invalid("max_scale must be at least 1");
    }
    let scales: Vec<u64> = (1..max_scale).filter(|&s| ps.contains(s)).collect();
    let count = scales.len() as u64;
    Ok(ScaleDensity { scales, count, max_scale, density: count as f64 / max_scale as f64 })
}

/// Closed-form count of porous scales below `max_scale`.
pub fn porous_scale_count(ps: &PorousScaleSet, max_scale: u64) -> u64 {
    let nk = ps.n * ps.k;
    let mut total = 0;
    let mut l = 1u64;
    while l <= ps.l_max {
        let start = (l * l + l) / 2 * nk * nk;
        if start >= max_scale {
            break;
        }
        let len = (ps.m * ps.n * l - 1) * nk;
        total += len.min(max_scale - start);
        l += 1;
    }
    total
}

/// Parsed key-value set description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSpec {
    pub kind: String,
    pub k: u32,
    pub keep: Vec<u64>,
    pub m: u32,
    pub n: u32,
    pub l_max: u32,
    pub period: usize,
    pub residues: Vec<usize>,
    pub digit: u8,
    pub build_depth: usize,
}

impl Default for SetSpec {
    fn default() -> Self {
        SetSpec {
            kind: "comb".into(),
            k: 1,
            keep: vec![0, 1],
            m: 1,
            n: 1,
            l_max: 3,
            period: 2,
            residues: vec![0],
            digit: 0,
            build_depth: 20,
        }
    }
}

impl SetSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = SetSpec::default();
        for (key, v) in key_values(text)? {
            match key.as_str() {
                "kind" => s.kind = v.to_lowercase(),
                "k" => s.k = parse_num("k", &v)?,
                "keep" => s.keep = parse_list("keep", &v)?,
                "m" => s.m = parse_num("m", &v)?,
                "n" => s.n = parse_num("n", &v)?,
                "l_max" => s.l_max = parse_num("l_max", &v)?,
                "period" => s.period = parse_num("period", &v)?,
                "residues" => s.residues = parse_list("residues", &v)?,
                "digit" => s.digit = parse_num("digit", &v)?,
                "build_depth" => s.build_depth = parse_num("build_depth", &v)?,
                other => {
                    return Err(Error::Parse { field: other.into(), message: "unknown key".into() })
                }
            }
        }
        Ok(s)
    }

    /// `build_depth` counts levels of the set's arity (binary except for combs).
    pub fn build(&self) -> Result<DyadicSet> {
        let r = match self.kind.as_str() {
            "comb" => comb_set(self.k, &self.keep, self.build_depth),
            "example" => example_set(self.m, self.k, self.n, self.l_max),
            "digit-constraint" => digit_constraint(self.period, &self.residues, self.digit, self.build_depth),
            "full" => full_set(self.build_depth),
            other => return Err(Error::Parse { field: "kind".into(), message: format!("unknown set kind `{other}`") }),
        };
        r.map_err(|e| match e {
            Error::InstanceTooLarge(_) => e,
            e => Error::Parse { field: self.kind.clone(), message: e.to_string() },
        })
    }
}
