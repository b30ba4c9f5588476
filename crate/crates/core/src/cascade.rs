//! Multiplicative cascade measures on [0,1].
//!
//! A cascade assigns to each 2^k-adic level `i >= 1` and digit `j` a weight;
//! the mass of a cube is the product of the weights along its digit path.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{CubeIndex, Dyadic};
use crate::error::{invalid, Error, Result};

/// Levels beyond this depth are evaluated in the log domain.
pub const LINEAR_DEPTH_LIMIT: usize = 64;

const TABLE_ENTRIES: usize = 1 << 20;

/// Per-level digit weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightRule {
    /// `s(i)` on digit 0 and `1 - s(i)` on digit 1, with `w(i) = 1/log_b(i+2)`.
    Counterexample { log_base: f64 },
    /// Weight `q` on digit 0 at every level.
    Bernoulli { q: f64 },
    /// Uniform on the digits in `keep` at every level.
    Comb { keep: Vec<u64> },
    /// Row `i-1` gives the weights at level `i`; the last row repeats.
    Custom { levels: Vec<Vec<f64>> },
}

/// `w(i) = 1 / log_b(i + 2)`.
pub fn counterexample_w(log_base: f64, i: usize) -> f64 {
    log_base.ln() / ((i + 2) as f64).ln()
}

/// `s(i)`: `w(i)` for odd `i`, `1 - w(i)` for even `i`.
pub fn counterexample_s(log_base: f64, i: usize) -> f64 {
    let w = counterexample_w(log_base, i);
    if i % 2 == 1 {
        w
    } else {
        1.0 - w
    }
}

/// Lower and upper bounds on the mass of a set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassBracket {
    pub lower: f64,
    pub upper: f64,
}

impl MassBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        self.lower - tol <= v && v <= self.upper + tol
    }
}

/// How to align a cell range to a coarser measure grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round {
    /// Grow the range: an upper bound on its mass.
    Outer,
    /// Shrink the range: a lower bound on its mass.
    Inner,
}

/// A Radon probability measure on [0,1] given by a cascade.
#[derive(Clone, Debug)]
pub struct CascadeMeasure {
    k: u32,
    rule: WeightRule,
    max_depth: usize,
    log_domain: bool,
    table_levels: usize,
    table: Vec<f64>,
}

impl CascadeMeasure {
    pub fn new(k: u32, rule: WeightRule, max_depth: usize, log_domain: bool) -> Result<Self> {
        if k == 0 || k > 16 {
            return invalid("arity_log must be in 1..=16");
        }
        if max_depth == 0 {
            return invalid("max_depth must be positive");
        }
        let base = 1u64 << k;
        match &rule {
            WeightRule::Counterexample { log_base } => {
                if k != 1 {
                    return invalid("the alternating measure is binary (k = 1)");
                }
                if !(*log_base > 1.0 && *log_base < 3.0) {
                    return invalid("log_base must lie in (1, 3) so that w(1) < 1");
                }
            }
            WeightRule::Bernoulli { q } => {
                if k != 1 {
                    return invalid("bernoulli cascades are binary (k = 1)");
                }
                if !(*q > 0.0 && *q < 1.0) {
                    return invalid("q must lie in (0, 1)");
                }
            }
            WeightRule::Comb { keep } => {
                if keep.is_empty() || keep.iter().any(|&d| d >= base) {
                    return invalid("comb digits must be nonempty and below 2^k");
                }
                let mut s = keep.clone();
                s.sort_unstable();
                s.dedup();
                if s.len() != keep.len() {
                    return invalid("comb digits must be distinct");
                }
            }
            WeightRule::Custom { levels } => {
                if levels.is_empty() {
                    return invalid("custom weight table is empty");
                }
                for (i, row) in levels.iter().enumerate() {
                    if row.len() as u64 != base {
                        return invalid(format!("level {} has {} weights, need {base}", i + 1, row.len()));
                    }
                    if row.iter().any(|w| !(*w >= 0.0 && *w <= 1.0)) {
                        return invalid(format!("level {} has a weight outside [0,1]", i + 1));
                    }
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > 1e-12 {
                        return invalid(format!("level {} weights sum to {s}", i + 1));
                    }
                }
            }
        }
        let mut m = CascadeMeasure { k, rule, max_depth, log_domain, table_levels: 0, table: Vec::new() };
        let levels = max_depth.min(TABLE_ENTRIES / base as usize);
        let mut table = Vec::with_capacity(levels * base as usize);
        for level in 1..=levels {
            for d in 0..base {
                table.push(m.weight_uncached(level, d));
            }
        }
        m.table = table;
        m.table_levels = levels;
        Ok(m)
    }

    pub fn arity_log(&self) -> u32 {
        self.k
    }

    pub fn rule(&self) -> &WeightRule {
        &self.rule
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn log_domain(&self) -> bool {
        self.log_domain
    }

    pub fn branching(&self) -> u64 {
        1u64 << self.k
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match &self.rule {
            WeightRule::Counterexample { log_base } => format!("counterexample(base={log_base})"),
            WeightRule::Bernoulli { q } if *q == 0.5 => "lebesgue".into(),
            WeightRule::Bernoulli { q } => format!("bernoulli({q})"),
            WeightRule::Comb { keep } => format!("comb(k={},keep={:?})", self.k, keep),
            WeightRule::Custom { levels } => format!("custom(k={},rows={})", self.k, levels.len()),
        }
    }

    fn weight_uncached(&self, level: usize, digit: u64) -> f64 {
        match &self.rule {
            WeightRule::Counterexample { log_base } => {
                let s = counterexample_s(*log_base, level);
                if digit == 0 {
                    s
                } else {
                    1.0 - s
                }
            }
            WeightRule::Bernoulli { q } => {
                if digit == 0 {
                    *q
                } else {
                    1.0 - q
                }
            }
            WeightRule::Comb { keep } => {
                if keep.contains(&digit) {
                    1.0 / keep.len() as f64
                } else {
                    0.0
                }
            }
            WeightRule::Custom { levels } => {
                let row = &levels[(level - 1).min(levels.len() - 1)];
                row[digit as usize]
            }
        }
    }

    /// Weight of `digit` at `level` (levels start at 1).
    #[inline]
    pub fn weight(&self, level: usize, digit: u64) -> f64 {
        if level >= 1 && level <= self.table_levels {
            self.table[(level - 1) * self.branching() as usize + digit as usize]
        } else {
            self.weight_uncached(level, digit)
        }
    }

    /// Probability of digit 0 at `level` (binary measures).
    pub fn zero_probability(&self, level: usize) -> f64 {
        self.weight(level, 0)
    }

    fn prefix_weight(&self, level: usize, digit: u64) -> f64 {
        (0..digit).map(|d| self.weight(level, d)).sum()
    }

    fn suffix_weight(&self, level: usize, digit: u64) -> f64 {
        (digit + 1..self.branching()).map(|d| self.weight(level, d)).sum()
    }

    /// Mass of the cube with the given measure digits (one per level).
    pub fn mass_of_digits(&self, digits: &[u64]) -> f64 {
        if self.log_domain || digits.len() > LINEAR_DEPTH_LIMIT {
            self.log2_mass_of_digits(digits).exp2()
        } else {
            digits
                .iter()
                .enumerate()
                .map(|(t, &d)| self.weight(t + 1, d))
                .product()
        }
    }

    /// `log2` of the cube mass; `-inf` for null cubes.
    pub fn log2_mass_of_digits(&self, digits: &[u64]) -> f64 {
        digits
            .iter()
            .enumerate()
            .map(|(t, &d)| self.weight(t + 1, d).log2())
            .sum()
    }

    /// Re-expresses a 1-d cube of any arity in this measure's digits.
    pub fn measure_digits(&self, q: &CubeIndex) -> Result<Vec<u64>> {
        if q.dim() != 1 {
            return invalid("cascade measures live on [0,1]");
        }
        let bits = q.arity_log() as usize * q.depth();
        if !bits.is_multiple_of(self.k as usize) {
            return invalid(format!(
                "cube of {bits} bits is not aligned to the {}-bit measure grid",
                self.k
            ));
        }
        let levels = bits / self.k as usize;
        if levels > self.max_depth {
            return invalid(format!("cube depth {levels} exceeds max_depth {}", self.max_depth));
        }
        if q.arity_log() == self.k {
            return Ok(q.digits().to_vec());
        }
        let qa = q.arity_log();
        let mut out = Vec::with_capacity(levels);
        let (mut acc, mut nacc) = (0u64, 0u32);
        for &d in q.digits() {
            for b in (0..qa).rev() {
                acc = (acc << 1) | ((d >> b) & 1);
                nacc += 1;
                if nacc == self.k {
                    out.push(acc);
                    acc = 0;
                    nacc = 0;
                }
            }
        }
        Ok(out)
    }

    /// `mu(Q)` for a one-dimensional cube.
    pub fn mass_of_cube(&self, q: &CubeIndex) -> Result<f64> {
        Ok(self.mass_of_digits(&self.measure_digits(q)?))
    }

    pub fn log2_mass_of_cube(&self, q: &CubeIndex) -> Result<f64> {
        Ok(self.log2_mass_of_digits(&self.measure_digits(q)?))
    }

    fn digits_of(&self, j: u128, levels: usize) -> Vec<u64> {
        let mask = (1u128 << self.k) - 1;
        (0..levels)
            .map(|t| ((j >> (self.k as usize * (levels - 1 - t))) & mask) as u64)
            .collect()
    }

    fn tail_from(&self, digits: &[u64], start: usize) -> f64 {
        let (mut acc, mut pm) = (0.0, 1.0);
        for level in start..=digits.len() {
            let d = digits[level - 1];
            acc += pm * self.suffix_weight(level, d);
            pm *= self.weight(level, d);
        }
        acc + pm
    }

    fn head_to(&self, digits: &[u64], start: usize) -> f64 {
        let (mut acc, mut pm) = (0.0, 1.0);
        for level in start..=digits.len() {
            let d = digits[level - 1];
            acc += pm * self.prefix_weight(level, d);
            pm *= self.weight(level, d);
        }
        acc
    }

    /// Mass of `[u 2^{-kL}, v 2^{-kL})` for measure-grid cells at `levels` levels.
    ///
    /// Sums positive terms only, so tiny masses keep full relative precision.
    fn grid_mass(&self, u: u128, v: u128, levels: usize) -> f64 {
        let end = 1u128 << (self.k as usize * levels);
        let (u, v) = (u.min(end), v.min(end));
        if u >= v {
            return 0.0;
        }
        if levels == 0 {
            return 1.0;
        }
        let du = self.digits_of(u, levels);
        if v == end {
            return if u == 0 { 1.0 } else { self.tail_from(&du, 1) };
        }
        let dv = self.digits_of(v, levels);
        let t = (0..levels).find(|&t| du[t] != dv[t]).expect("u < v") + 1;
        let p: f64 = (1..t).map(|lv| self.weight(lv, du[lv - 1])).product();
        let middle: f64 = (du[t - 1] + 1..dv[t - 1]).map(|d| self.weight(t, d)).sum();
        let lower = self.weight(t, du[t - 1]) * self.tail_from(&du, t + 1);
        let upper = self.weight(t, dv[t - 1]) * self.head_to(&dv, t + 1);
        p * (lower + middle + upper)
    }

    /// Mass of the cells `[lo, hi)` of the binary grid `2^{-bits}`, clamped to [0,1].
    ///
    /// If the grid is finer than the measure's resolution, the range is
    /// aligned outward or inward to the coarser grid.
    pub fn interval_mass(&self, lo: i128, hi: i128, bits: u32, round: Round) -> f64 {
        let k = self.k;
        let fine = bits as usize;
        let levels = (fine / k as usize).min(self.max_depth);
        let coarse = levels as u32 * k;
        let end = 1i128 << bits.min(120);
        let (lo, hi) = (lo.clamp(0, end), hi.clamp(0, end));
        if lo >= hi {
            return 0.0;
        }
        let shift = bits - coarse;
        let (a, b) = if shift == 0 {
            (lo, hi)
        } else {
            let m = (1i128 << shift) - 1;
            match round {
                Round::Outer => (lo >> shift, (hi + m) >> shift),
                Round::Inner => ((lo + m) >> shift, hi >> shift),
            }
        };
        self.grid_mass(a as u128, b as u128, levels)
    }

    /// Mass of binary cell `c` at depth `bits`; zero outside [0,1).
    ///
    /// `bits` need not be a multiple of `k`; a partial level sums the
    /// digits sharing the cell's leading bits.
    pub fn cell_mass(&self, c: i128, bits: u32) -> Result<f64> {
        let k = self.k;
        let levels = (bits / k) as usize;
        let rb = bits % k;
        if levels + (rb > 0) as usize > self.max_depth {
            return invalid(format!("{bits} bits is finer than the measure's max_depth"));
        }
        if bits > 126 {
            return Err(Error::InstanceTooLarge("cell depth beyond 126 bits".into()));
        }
        if c < 0 || c >= 1i128 << bits {
            return Ok(0.0);
        }
        let c = c as u128;
        let full = c >> rb;
        let mask = (1u128 << k) - 1;
        let mut m = 1.0;
        for t in 0..levels {
            let d = ((full >> (k as usize * (levels - 1 - t))) & mask) as u64;
            m *= self.weight(t + 1, d);
        }
        if rb > 0 {
            let part = (c & ((1u128 << rb) - 1)) as u64;
            let span = 1u64 << (k - rb);
            m *= (part * span..(part + 1) * span).map(|d| self.weight(levels + 1, d)).sum::<f64>();
        }
        Ok(m)
    }

    /// Bracket for the mass of the closed ball `B(x, r)`.
    ///
    /// `resolution_depth` counts levels of this measure; cells of side
    /// `2^{-k * resolution_depth}` fully inside the ball give the lower
    /// bound and cells meeting it the upper bound.
    pub fn mass_of_ball(&self, x: f64, r: f64, resolution_depth: usize) -> Result<MassBracket> {
        if !(r > 0.0) {
            return invalid("radius must be positive");
        }
        if resolution_depth > self.max_depth {
            return invalid("resolution_depth exceeds max_depth");
        }
        let bits = self.k * resolution_depth as u32;
        if bits > 62 {
            return Err(Error::InstanceTooLarge("resolution beyond 62 bits".into()));
        }
        if (-(bits as f64)).exp2() > r {
            return invalid("resolution coarser than the radius");
        }
        let xd = Dyadic::from_f64(x).ok_or_else(|| Error::InvalidArgument("bad point".into()))?;
        let rd = Dyadic::from_f64(r).ok_or_else(|| Error::InvalidArgument("bad radius".into()))?;
        let (a, b) = (
            xd.checked_sub(rd).ok_or_else(|| Error::InvalidArgument("overflow".into()))?,
            xd.checked_add(rd).ok_or_else(|| Error::InvalidArgument("overflow".into()))?,
        );
        let lo_in = ceil_scaled(a, bits);
        let hi_in = floor_scaled(b, bits);
        let lo_out = floor_scaled(a, bits);
        let hi_out = floor_scaled(b, bits) + 1;
        Ok(MassBracket {
            lower: self.interval_mass(lo_in, hi_in, bits, Round::Inner),
            upper: self.interval_mass(lo_out, hi_out, bits, Round::Outer),
        })
    }

    fn draw_digit<R: Rng>(&self, rng: &mut R, level: usize) -> u64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let last = self.branching() - 1;
        for d in 0..last {
            acc += self.weight(level, d);
            if u < acc {
                return d;
            }
        }
        // Guard against rounding: never return a null digit.
        (0..=last).rev().find(|&d| self.weight(level, d) > 0.0).unwrap_or(last)
    }

    /// Infinite stream of digits drawn with the conditional weights.
    ///
    /// Sample `index` of a run with `seed` uses its own ChaCha stream, so
    /// results do not depend on how samples are scheduled.
    pub fn digit_stream(&self, seed: u64, index: u64) -> DigitStream<'_> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        DigitStream { measure: self, rng, level: 0 }
    }

    /// Draws sample `index` to `depth` levels.
    pub fn sample_indexed(&self, seed: u64, index: u64, depth: usize) -> SampledPoint {
        let digits: Vec<u64> = self.digit_stream(seed, index).take(depth).collect();
        SampledPoint::from_digits(self.k, digits)
    }

    /// Draws one point; equal seeds give equal digit strings.
    pub fn sample_point(&self, seed: u64, depth: usize) -> SampledPoint {
        self.sample_indexed(seed, 0, depth)
    }

    /// Draws `n` points with per-index streams.
    pub fn sample_points(&self, seed: u64, n: usize, depth: usize) -> Vec<SampledPoint> {
        use rayon::prelude::*;
        (0..n as u64)
            .into_par_iter()
            .map(|i| self.sample_indexed(seed, i, depth))
            .collect()
    }

    /// Writes all depth-`depth` cube masses as CSV (`cube_id,mass,log2_mass`).
    pub fn write_masses_csv<W: Write>(&self, depth: usize, out: W) -> Result<()> {
        let bits = self.k as usize * depth;
        if bits > 24 {
            return Err(Error::InstanceTooLarge(format!("{bits} bits is too many rows")));
        }
        if depth > self.max_depth {
            return invalid("depth exceeds max_depth");
        }
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(["cube_id", "mass", "log2_mass"]).map_err(io)?;
        for j in 0..(1u64 << bits) {
            let q = CubeIndex::from_index(self.k, depth, j)?;
            let digits = q.digits();
            w.write_record([
                q.to_string(),
                format!("{:e}", self.mass_of_digits(digits)),
                format!("{}", self.log2_mass_of_digits(digits)),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(format!("io: {e}")))?;
        Ok(())
    }
}

/// `floor(x * 2^bits)`.
pub fn floor_scaled(x: Dyadic, bits: u32) -> i128 {
    if x.exponent() >= bits {
        let s = x.exponent() - bits;
        if s >= 127 {
            return if x.numerator() < 0 { -1 } else { 0 };
        }
        x.numerator() >> s
    } else {
        x.numerator() << (bits - x.exponent())
    }
}

/// `ceil(x * 2^bits)`.
pub fn ceil_scaled(x: Dyadic, bits: u32) -> i128 {
    if x.exponent() >= bits {
        let s = x.exponent() - bits;
        if s >= 127 {
            return if x.numerator() > 0 { 1 } else { 0 };
        }
        -((-x.numerator()) >> s)
    } else {
        x.numerator() << (bits - x.exponent())
    }
}

/// Iterator over sampled digits.
pub struct DigitStream<'a> {
    measure: &'a CascadeMeasure,
    rng: ChaCha8Rng,
    level: usize,
}

impl Iterator for DigitStream<'_> {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        self.level += 1;
        Some(self.measure.draw_digit(&mut self.rng, self.level))
    }
}

/// A sampled point: its digits and the centre of the deepest sampled cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledPoint {
    pub arity_log: u32,
    pub digits: Vec<u64>,
    pub x: f64,
}

impl SampledPoint {
    pub fn from_digits(arity_log: u32, digits: Vec<u64>) -> Self {
        let mut x = 0.0;
        let mut scale = 1.0;
        let base = (arity_log as f64).exp2();
        for &d in &digits {
            scale /= base;
            x += d as f64 * scale;
        }
        x += scale / 2.0;
        SampledPoint { arity_log, digits, x }
    }

    pub fn cube(&self, depth: usize) -> Result<CubeIndex> {
        if depth > self.digits.len() {
            return invalid("requested depth beyond sampled digits");
        }
        CubeIndex::from_digits(self.arity_log, 1, self.digits[..depth].to_vec())
    }
}

pub fn counterexample_measure(log_base: f64, max_depth: usize) -> Result<CascadeMeasure> {
    CascadeMeasure::new(1, WeightRule::Counterexample { log_base }, max_depth, false)
}

pub fn bernoulli_cascade(q: f64, max_depth: usize) -> Result<CascadeMeasure> {
    CascadeMeasure::new(1, WeightRule::Bernoulli { q }, max_depth, false)
}

pub fn lebesgue(max_depth: usize) -> Result<CascadeMeasure> {
    bernoulli_cascade(0.5, max_depth)
}

/// Uniform measure on the 2^k-adic comb keeping `keep` at every level.
pub fn comb_measure(k: u32, keep: Vec<u64>, max_depth: usize) -> Result<CascadeMeasure> {
    CascadeMeasure::new(k, WeightRule::Comb { keep }, max_depth, false)
}

/// Parsed key-value measure description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub kind: String,
    pub k: u32,
    pub log_base: f64,
    pub q: f64,
    pub keep: Vec<u64>,
    pub levels: Vec<Vec<f64>>,
    pub max_depth: usize,
    pub log_domain: bool,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        MeasureSpec {
            kind: "counterexample".into(),
            k: 1,
            log_base: std::f64::consts::E,
            q: 0.5,
            keep: Vec::new(),
            levels: Vec::new(),
            max_depth: 64,
            log_domain: false,
        }
    }
}

fn perr(field: &str, message: impl Into<String>) -> Error {
    Error::Parse { field: field.into(), message: message.into() }
}

/// Splits `key = value` lines, skipping blanks and `#` comments.
pub fn key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| perr(&format!("line {}", n + 1), "expected `key = value`"))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn parse_num<T: std::str::FromStr>(field: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| perr(field, format!("cannot parse `{v}`")))
}

pub(crate) fn parse_list<T: std::str::FromStr>(field: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(field, s))
        .collect()
}

impl MeasureSpec {
    /// Parses `kind`, `k`, `log_base`, `q`, `keep`, `max_depth`,
    /// `log_domain` and repeated `level = w0, w1, ...` rows.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = MeasureSpec::default();
        for (key, v) in key_values(text)? {
            match key.as_str() {
                "kind" => s.kind = v.to_lowercase(),
                "k" => s.k = parse_num("k", &v)?,
                "log_base" => {
                    s.log_base = match v.as_str() {
                        "e" => std::f64::consts::E,
                        _ => parse_num("log_base", &v)?,
                    }
                }
                "q" => s.q = parse_num("q", &v)?,
                "keep" => s.keep = parse_list("keep", &v)?,
                "max_depth" => s.max_depth = parse_num("max_depth", &v)?,
                "log_domain" => s.log_domain = parse_num("log_domain", &v)?,
                "level" | "weights" => s.levels.push(parse_list("level", &v)?),
                other => return Err(perr(other, "unknown key")),
            }
        }
        Ok(s)
    }

    pub fn build(&self) -> Result<CascadeMeasure> {
        let rule = match self.kind.as_str() {
            "counterexample" => WeightRule::Counterexample { log_base: self.log_base },
            "bernoulli" => WeightRule::Bernoulli { q: self.q },
            "lebesgue" => WeightRule::Bernoulli { q: 0.5 },
            "comb" => WeightRule::Comb { keep: self.keep.clone() },
            "custom" => WeightRule::Custom { levels: self.levels.clone() },
            other => return Err(perr("kind", format!("unknown measure kind `{other}`"))),
        };
        let k = if matches!(rule, WeightRule::Comb { .. } | WeightRule::Custom { .. }) { self.k } else { 1 };
        CascadeMeasure::new(k, rule, self.max_depth, self.log_domain)
            .map_err(|e| perr(&self.kind, e.to_string()))
    }
}
