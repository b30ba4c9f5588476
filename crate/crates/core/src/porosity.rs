//! Set and measure porosity at finite dyadic resolution.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::CascadeMeasure;
use crate::dyadic::{CubeIndex, Dyadic};
use crate::error::{invalid, Error, Result};
use crate::sets::{has_m_hole, DyadicSet};

/// Largest binary exponent used for exact ball arithmetic.
const MAX_UNIT_BITS: u32 = 120;

/// Relative margin absorbing rounding in prefix-sum mass comparisons.
const MASS_MARGIN: f64 = 1e-9;

fn dy(x: f64, what: &str) -> Result<Dyadic> {
    Dyadic::from_f64(x).ok_or_else(|| Error::InvalidArgument(format!("{what} is not finite")))
}

#[inline]
fn floor_shift(a: i128, s: u32) -> i128 {
    a >> s
}

#[inline]
fn ceil_shift(a: i128, s: u32) -> i128 {
    -((-a) >> s)
}

/// Integer coordinates of `x ± r` in units of `2^-w`.
struct BallUnits {
    w: u32,
    a: i128,
    b: i128,
}

impl BallUnits {
    fn new(x: Dyadic, r: Dyadic, bits: u32) -> Result<Self> {
        let w = bits.max(x.exponent()).max(r.exponent());
        if w > MAX_UNIT_BITS {
            return invalid("point or radius needs more than 120 binary digits");
        }
        let units = |d: Dyadic| -> Result<i128> {
            d.numerator()
                .checked_mul(1i128 << (w - d.exponent()))
                .ok_or_else(|| Error::InstanceTooLarge("ball coordinates overflow".into()))
        };
        let (xu, ru) = (units(x)?, units(r)?);
        Ok(BallUnits { w, a: xu - ru, b: xu + ru })
    }

    /// Cells at depth `bits` meeting the closed ball: `[lo, hi)`.
    fn cells_meeting(&self, bits: u32) -> (i128, i128) {
        let s = self.w - bits;
        (floor_shift(self.a, s), floor_shift(self.b, s) + 1)
    }

    /// Cells at depth `bits` inside the closed ball: `[lo, hi)`.
    fn cells_inside(&self, bits: u32) -> (i128, i128) {
        let s = self.w - bits;
        (ceil_shift(self.a, s), floor_shift(self.b, s))
    }
}

fn check_resolution(r: f64, bits: u32, factor: f64) -> Result<()> {
    if !(r > 0.0) {
        return invalid("radius must be positive");
    }
    if (-(bits as f64)).exp2() > r / factor {
        return invalid(format!("resolution 2^-{bits} is coarser than r/{factor}"));
    }
    Ok(())
}

/// Porosity of a finite-depth set: half the largest gap of `A` in `B(x, r)`, over `r`.
///
/// Exact for the survivor union when `resolution_depth >= build depth`;
/// otherwise within `2^-resolution_depth / r`.
pub fn por_set(a: &DyadicSet, x: f64, r: f64, resolution_depth: u32) -> Result<f64> {
    check_resolution(r, resolution_depth, 8.0)?;
    if resolution_depth > 62 {
        return Err(Error::InstanceTooLarge("set resolution beyond 62 bits".into()));
    }
    let ball = BallUnits::new(dy(x, "x")?, dy(r, "r")?, resolution_depth)?;
    let (lo, hi) = ball.cells_meeting(resolution_depth);
    let end = 1i128 << resolution_depth;
    let runs = a.occupied_runs(resolution_depth, lo.clamp(0, end) as u64, hi.clamp(0, end) as u64)?;
    let s = ball.w - resolution_depth;
    let mut cursor = ball.a;
    let mut gap = 0i128;
    for (c0, c1) in runs {
        let start = (c0 as i128) << s;
        gap = gap.max(start.min(ball.b) - cursor);
        cursor = cursor.max((c1 as i128) << s);
    }
    gap = gap.max(ball.b - cursor);
    let gap = gap.max(0) as f64 * (-(ball.w as f64)).exp2();
    Ok((gap / 2.0 / r).min(1.0))
}

/// Prefix sums of cell masses over a window of cells.
struct CellGrid {
    first: i128,
    prefix: Vec<f64>,
}

impl CellGrid {
    fn build(m: &CascadeMeasure, bits: u32, lo: i128, hi: i128) -> Result<Self> {
        let end = 1i128 << bits;
        let n = (hi - lo).max(0);
        if n > 1 << 28 {
            return Err(Error::InstanceTooLarge("mass grid beyond 2^28 cells".into()));
        }
        let mut prefix = Vec::with_capacity(n as usize + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        let (a, b) = (lo.max(0), hi.min(end));
        for c in lo..hi {
            if c >= a && c < b {
                acc += m.cell_mass(c, bits)?;
            }
            prefix.push(acc);
        }
        Ok(CellGrid { first: lo, prefix })
    }

    #[inline]
    fn mass(&self, c0: i128, c1: i128) -> f64 {
        let n = self.prefix.len() as i128 - 1;
        let i = (c0 - self.first).clamp(0, n) as usize;
        let j = (c1 - self.first).clamp(0, n) as usize;
        if j <= i {
            0.0
        } else {
            self.prefix[j] - self.prefix[i]
        }
    }

    fn total(&self) -> f64 {
        *self.prefix.last().unwrap_or(&0.0)
    }

    /// Error allowance for differences of prefix sums.
    fn rounding(&self) -> f64 {
        self.total() * 4.0 * f64::EPSILON
    }
}

/// Certified measure porosity together with its bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurePorosity {
    /// Certified lower estimate of `por(mu, x, r, eps)`.
    pub value: f64,
    /// Estimate with the bracket roles swapped.
    pub optimistic: f64,
    /// Grid slack: the continuum supremum exceeds `optimistic` by at most this.
    pub slack: f64,
    pub ball_lower: f64,
    pub ball_upper: f64,
}

/// Measure porosity at one point and scale.
///
/// Holes are closed balls with centre and radius on the grid `2^-resolution_depth`;
/// the hole's upper bracket must not exceed `eps` times the ball's lower bracket.
pub fn por_measure(
    m: &CascadeMeasure,
    x: f64,
    r: f64,
    eps: f64,
    resolution_depth: u32,
) -> Result<MeasurePorosity> {
    if !(eps > 0.0 && eps < 1.0) {
        return invalid("epsilon must lie in (0, 1)");
    }
    check_resolution(r, resolution_depth, 8.0)?;
    let ball = BallUnits::new(dy(x, "x")?, dy(r, "r")?, resolution_depth)?;
    let bits = resolution_depth;
    let (lo, hi) = ball.cells_meeting(bits);
    let grid = CellGrid::build(m, bits, lo, hi)?;
    let upper = grid.total();
    if upper <= 0.0 {
        return Err(Error::DegenerateBall(format!("B({x}, {r}) carries no mass")));
    }
    let (ilo, ihi) = ball.cells_inside(bits);
    let lower = grid.mass(ilo, ihi);
    let cell_over_r = (-(bits as f64)).exp2() / r;
    let slack = 2.0 * cell_over_r;
    let tol = grid.rounding();

    // Hole of radius t cells centred at grid point z covers cells z-t ..= z+t
    // (upper) and z-t .. z+t (lower); it fits when z-t >= ilo and z+t <= ihi.
    let largest = |thr: f64, upper_hole: bool| -> i128 {
        if thr < 0.0 {
            return -1;
        }
        let fits = |t: i128| -> bool {
            let (zl, zr) = (ilo + t, ihi - t);
            (zl..=zr).any(|z| {
                let h = if upper_hole { grid.mass(z - t, z + t + 1) } else { grid.mass(z - t, z + t) };
                h <= thr
            })
        };
        let tmax = (ihi - ilo).div_euclid(2);
        if tmax < 0 || !fits(0) {
            return -1;
        }
        let (mut good, mut bad) = (0i128, tmax + 1);
        while bad - good > 1 {
            let mid = (good + bad) / 2;
            if fits(mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    };
    let certified = largest(eps * lower * (1.0 - MASS_MARGIN) - tol, true);
    let optimistic = largest(eps * upper * (1.0 + MASS_MARGIN) + tol, false);
    let to_alpha = |t: i128| if t <= 0 { 0.0 } else { (t as f64 * cell_over_r).min(1.0) };
    Ok(MeasurePorosity {
        value: to_alpha(certified),
        optimistic: to_alpha(optimistic).max(to_alpha(certified)),
        slack,
        ball_lower: lower,
        ball_upper: upper,
    })
}

/// How the resolution of each scale is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resolution {
    /// `guard` bits below each radius.
    Relative { guard: u32 },
    /// One absolute depth for all scales.
    Fixed { bits: u32 },
}

impl Resolution {
    fn bits_for(&self, radius_log2: i64) -> Result<u32> {
        let b = match *self {
            Resolution::Relative { guard } => -radius_log2 + guard as i64,
            Resolution::Fixed { bits } => bits as i64,
        };
        if b < 0 || b + radius_log2 < 3 {
            return invalid(format!("resolution too coarse for radius 2^{radius_log2}"));
        }
        Ok(b as u32)
    }
}

/// Set or measure whose porosity is profiled.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    Set(&'a DyadicSet),
    Measure { measure: &'a CascadeMeasure, eps: f64 },
}

/// Porosity at one scale of a profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleValue {
    pub j: usize,
    pub radius_log2: i64,
    pub value: f64,
    pub slack: f64,
    pub resolution_bits: u32,
}

/// Porosity at scales `r_j = 2^{-kj+t}`, `j = 1..=i_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PorosityProfile {
    pub x: f64,
    pub k: u32,
    pub offset: i64,
    pub epsilon: Option<f64>,
    pub values: Vec<ScaleValue>,
}

impl PorosityProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `value >= alpha - slack` at each scale.
    pub fn flags(&self, alpha: f64) -> Vec<bool> {
        self.values.iter().map(|v| v.value >= alpha - v.slack).collect()
    }
}

/// Computes a porosity profile.
pub fn porosity_profile(
    target: Target<'_>,
    x: f64,
    i_max: usize,
    offset: i64,
    k: u32,
    resolution: Resolution,
) -> Result<PorosityProfile> {
    if k == 0 {
        return invalid("arity_log must be positive");
    }
    let values = (1..=i_max)
        .map(|j| {
            let radius_log2 = -(k as i64) * j as i64 + offset;
            let bits = resolution.bits_for(radius_log2)?;
            let r = (radius_log2 as f64).exp2();
            let (value, slack) = match target {
                Target::Set(a) => (por_set(a, x, r, bits)?, (-(bits as f64)).exp2() / r),
                Target::Measure { measure, eps } => {
                    let p = por_measure(measure, x, r, eps, bits)?;
                    (p.value, p.slack)
                }
            };
            Ok(ScaleValue { j, radius_log2, value, slack, resolution_bits: bits })
        })
        .collect::<Result<Vec<_>>>()?;
    let epsilon = match target {
        Target::Measure { eps, .. } => Some(eps),
        Target::Set(_) => None,
    };
    Ok(PorosityProfile { x, k, offset, epsilon, values })
}

/// Porous-scale fraction and its liminf proxy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanPorosity {
    pub fraction: f64,
    /// Minimum of the running fraction over `i' in [ceil(i/2), i]`.
    pub running_min: f64,
}

/// `#{j <= i : flag_j} / i` over the first `i` scales.
pub fn mean_porosity_fraction(p: &PorosityProfile, alpha: f64, i: usize) -> Result<MeanPorosity> {
    if i == 0 || i > p.len() {
        return invalid("i must lie in 1..=profile length");
    }
    let flags = p.flags(alpha);
    let mut count = 0usize;
    let mut fractions = Vec::with_capacity(i);
    for (idx, f) in flags.iter().take(i).enumerate() {
        count += *f as usize;
        fractions.push(count as f64 / (idx + 1) as f64);
    }
    let start = i.div_ceil(2).max(1);
    let running_min = fractions[start - 1..].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MeanPorosity { fraction: fractions[i - 1], running_min })
}

/// Offset `t in 0..k` with the largest porous fraction (first on ties).
pub fn best_offset(
    target: Target<'_>,
    x: f64,
    i_max: usize,
    k: u32,
    alpha: f64,
    resolution: Resolution,
) -> Result<(i64, PorosityProfile)> {
    let mut best: Option<(i64, f64, PorosityProfile)> = None;
    for t in 0..k as i64 {
        let p = porosity_profile(target, x, i_max, t, k, resolution)?;
        let f = mean_porosity_fraction(&p, alpha, i_max)?.fraction;
        if best.as_ref().is_none_or(|b| f > b.1) {
            best = Some((t, f, p));
        }
    }
    let (t, _, p) = best.ok_or_else(|| Error::InvalidArgument("k must be positive".into()))?;
    Ok((t, p))
}

/// For each sampled digit string, the fraction of `j in 1..=i` whose
/// depth-`j` cube contains an `m`-hole of `e`.
pub fn m_hole_frequency(e: &DyadicSet, m: usize, samples: &[Vec<u64>], i: usize) -> Result<Vec<f64>> {
    if i == 0 {
        return invalid("i must be positive");
    }
    samples
        .par_iter()
        .map(|digits| {
            if digits.len() < i {
                return invalid("sample shorter than i");
            }
            let mut count = 0usize;
            for j in 1..=i {
                let d = CubeIndex::from_digits(1, 1, digits[..j].to_vec())?;
                count += has_m_hole(e, &d, m)? as usize;
            }
            Ok(count as f64 / i as f64)
        })
        .collect()
}

/// Which points of a cube are tried as porosity witnesses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessRule {
    /// Left corner and the centres of the `2^k` children.
    #[default]
    CornerAndChildCentres,
    /// The centre only.
    Centre,
}

/// Parameters of cube porosity classification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubePorosityParams {
    pub k: u32,
    pub l: u32,
    pub alpha: f64,
    pub eps: f64,
    pub guard: u32,
    pub witness: WitnessRule,
}

/// Classifies the depth-`depth` 2^k-adic cubes with indices in `[first, first + count)`.
///
/// A cube `Q` at depth `i+1` is porous when some witness `x in Q` has a grid
/// hole of radius at least `alpha 2^{-ki+l}` whose upper mass bracket is at
/// most `eps` times the lower bracket of `B(x, 2^{-ki+l})`.
pub fn porous_cube_flags(
    m: &CascadeMeasure,
    depth: usize,
    first: u64,
    count: u64,
    p: &CubePorosityParams,
) -> Result<Vec<bool>> {
    if depth == 0 {
        return invalid("porous cubes start at depth 1");
    }
    if !(p.alpha > 0.0 && p.alpha < 1.0 && p.eps > 0.0 && p.eps < 1.0) {
        return invalid("alpha and eps must lie in (0, 1)");
    }
    let k = p.k as i64;
    let s = k * (depth as i64 - 1) - p.l as i64;
    let bits = s + p.guard as i64;
    if bits < 1 || p.guard < 3 {
        return invalid("guard bits too small for the scale");
    }
    let bits = bits as u32;
    let wit_bits = match p.witness {
        WitnessRule::CornerAndChildCentres => p.k * (depth as u32 + 1) + 1,
        WitnessRule::Centre => p.k * depth as u32 + 1,
    };
    let w = bits.max(wit_bits);
    if w > MAX_UNIT_BITS || w as i64 - s > 126 {
        return Err(Error::InstanceTooLarge("classification depth beyond 120 bits".into()));
    }
    let r_units = 1i128 << (w as i64 - s);
    let cell_shift = w - bits;
    let cube_shift = w - p.k * depth as u32;
    let q_lo = (first as i128) << cube_shift;
    let q_hi = ((first + count) as i128) << cube_shift;
    let grid = CellGrid::build(
        m,
        bits,
        floor_shift(q_lo - r_units, cell_shift),
        floor_shift(q_hi + r_units, cell_shift) + 1,
    )?;
    let tol = grid.rounding();
    let t = (p.alpha * (p.guard as f64).exp2()).ceil() as i128;

    // Witnesses in increasing order, tagged with their cube.
    let per_cube: Vec<i128> = match p.witness {
        WitnessRule::CornerAndChildCentres => {
            let child = 1i128 << (cube_shift - p.k);
            std::iter::once(0).chain((0..1i128 << p.k).map(|c| c * child + child / 2)).collect()
        }
        WitnessRule::Centre => vec![1i128 << (cube_shift - 1)],
    };
    let mut flags = vec![false; count as usize];
    let mut deque: VecDeque<(i128, f64)> = VecDeque::new();
    let mut next_z = i128::MIN;
    for (qi, flag) in flags.iter_mut().enumerate() {
        let base = (first as i128 + qi as i128) << cube_shift;
        for &off in &per_cube {
            let x = base + off;
            let (a, b) = (x - r_units, x + r_units);
            let (ilo, ihi) = (ceil_shift(a, cell_shift), floor_shift(b, cell_shift));
            let lower = grid.mass(ilo, ihi);
            let thr = p.eps * lower * (1.0 - MASS_MARGIN) - tol;
            let (zl, zr) = (ilo + t, ihi - t);
            if next_z == i128::MIN {
                next_z = zl;
            }
            while next_z <= zr {
                let h = grid.mass(next_z - t, next_z + t + 1);
                while deque.back().is_some_and(|&(_, v)| v >= h) {
                    deque.pop_back();
                }
                deque.push_back((next_z, h));
                next_z += 1;
            }
            while deque.front().is_some_and(|&(z, _)| z < zl) {
                deque.pop_front();
            }
            if let Some(&(_, h)) = deque.front() {
                if zl <= zr && thr >= 0.0 && h <= thr {
                    *flag = true;
                }
            }
        }
    }
    Ok(flags)
}

/// Writes profiles as CSV rows
/// `point_id,offset_t,scale_j,radius_log2,porosity_value,flag_at_alpha,slack`.
pub fn write_profiles_csv<W: Write>(profiles: &[PorosityProfile], alpha: f64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record([
        "point_id",
        "offset_t",
        "scale_j",
        "radius_log2",
        "porosity_value",
        "flag_at_alpha",
        "slack",
    ])
    .map_err(io)?;
    for (id, p) in profiles.iter().enumerate() {
        for (v, f) in p.values.iter().zip(p.flags(alpha)) {
            w.write_record([
                id.to_string(),
                p.offset.to_string(),
                v.j.to_string(),
                v.radius_log2.to_string(),
                format!("{}", v.value),
                f.to_string(),
                format!("{:e}", v.slack),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("io: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{counterexample_measure, lebesgue};
    use crate::sets::{comb_set, full_set};

    #[test]
    fn set_examples() {
        let full = full_set(30).unwrap();
        assert_eq!(por_set(&full, 0.5, 0.25, 20).unwrap(), 0.0);
        let zero = comb_set(1, &[0], 30).unwrap();
        let v = por_set(&zero, 0.0, 1.0, 20).unwrap();
        assert!((v - 0.5).abs() <= 2f64.powi(-20));
        let comb = comb_set(2, &[0, 3], 15).unwrap();
        for j in 1..6 {
            let r = 4f64.powi(-j);
            assert!(por_set(&comb, 0.0, r, 20).unwrap() >= 0.25 - 2f64.powi(-20) / r);
        }
        assert!(por_set(&full, 0.5, 0.25, 2).is_err());
    }

    #[test]
    fn lebesgue_measure_porosity() {
        let leb = lebesgue(64).unwrap();
        let p = por_measure(&leb, 0.5, 0.125, 0.25, 13).unwrap();
        assert!((p.value - 0.25).abs() < 0.01, "{p:?}");
        assert!(p.value <= p.optimistic);
    }

    #[test]
    fn epsilon_monotone() {
        let m = counterexample_measure(std::f64::consts::E, 64).unwrap();
        let mut last = 0.0;
        for eps in [0.01, 0.05, 0.1, 0.3, 0.6, 0.9] {
            let v = por_measure(&m, 0.3, 0.0625, eps, 14).unwrap().value;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn degenerate_ball() {
        let m = crate::cascade::comb_measure(2, vec![0], 30).unwrap();
        let e = por_measure(&m, 0.8, 0.05, 0.1, 12).unwrap_err();
        assert!(matches!(e, Error::DegenerateBall(_)));
    }

    #[test]
    fn mean_fraction_basics() {
        let full = full_set(40).unwrap();
        let p = porosity_profile(Target::Set(&full), 0.5, 20, 0, 1, Resolution::Relative { guard: 8 }).unwrap();
        assert!(p.values.iter().all(|v| v.value == 0.0));
        let f = mean_porosity_fraction(&p, 0.1, 20).unwrap();
        assert_eq!(f.fraction, 0.0);
        let zero = comb_set(1, &[0], 40).unwrap();
        let p = porosity_profile(Target::Set(&zero), 0.0, 20, 0, 1, Resolution::Relative { guard: 8 }).unwrap();
        assert_eq!(mean_porosity_fraction(&p, 0.45, 20).unwrap().fraction, 1.0);
    }

    #[test]
    fn cube_flags_agree_with_point_porosity() {
        let m = counterexample_measure(std::f64::consts::E, 64).unwrap();
        let params = CubePorosityParams {
            k: 2,
            l: 2,
            alpha: 0.3,
            eps: 0.2,
            guard: 8,
            witness: WitnessRule::Centre,
        };
        let depth = 4;
        let flags = porous_cube_flags(&m, depth, 0, 256, &params).unwrap();
        let r = 2f64.powi(-(2 * (depth as i32 - 1) - 2));
        let bits = (2 * (depth as i32 - 1) - 2 + 8) as u32;
        for (c, f) in flags.iter().enumerate() {
            let x = (c as f64 + 0.5) * 4f64.powi(-(depth as i32));
            let v = por_measure(&m, x, r, 0.2, bits).unwrap().value;
            let t = (0.3f64 * 256.0).ceil() / 256.0;
            assert_eq!(*f, v >= t, "cube {c}: value {v}");
        }
    }
}
