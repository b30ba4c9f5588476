//! Finite-depth dimension estimators and the max-collection certificate.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::CascadeMeasure;
use crate::dyadic::CubeIndex;
use crate::error::{invalid, Error, Result};
use crate::sets::DyadicSet;

/// Default sliding-window width for envelopes.
pub const DEFAULT_WINDOW: usize = 5;

/// Slopes per depth with window envelopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub depth_lo: usize,
    pub depth_hi: usize,
    pub window: usize,
    /// `(depth, slope)` pairs.
    pub slopes: Vec<(usize, f64)>,
    /// Mean slope over each window of `window` consecutive depths.
    pub window_means: Vec<f64>,
    pub limsup: f64,
    pub liminf: f64,
    /// Sample quantile used as an essential-infimum proxy, when pooled.
    pub quantile: Option<f64>,
    pub value: f64,
}

impl DimensionEstimate {
    fn from_slopes(depth_lo: usize, depth_hi: usize, window: usize, slopes: Vec<(usize, f64)>) -> Result<Self> {
        if window == 0 {
            return invalid("window must be positive");
        }
        if slopes.is_empty() {
            return invalid("empty depth range");
        }
        let w = window.min(slopes.len());
        let window_means: Vec<f64> = slopes
            .windows(w)
            .map(|s| s.iter().map(|p| p.1).sum::<f64>() / w as f64)
            .collect();
        let limsup = window_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let liminf = window_means.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(DimensionEstimate {
            depth_lo,
            depth_hi,
            window: w,
            slopes,
            window_means,
            limsup,
            liminf,
            quantile: None,
            value: limsup,
        })
    }
}

/// Local dimension along a digit path: slopes `log2 mu(Q_x^i) / (-k i)`.
pub fn local_dimension(
    m: &CascadeMeasure,
    digits: &[u64],
    depth_lo: usize,
    depth_hi: usize,
    window: usize,
) -> Result<DimensionEstimate> {
    if depth_lo == 0 || depth_lo > depth_hi {
        return invalid("need 1 <= depth_lo <= depth_hi");
    }
    if depth_hi > m.max_depth() || depth_hi > digits.len() {
        return invalid("depth_hi exceeds max_depth or the digit string");
    }
    let k = m.arity_log() as f64;
    let mut log_mass = 0.0;
    let mut slopes = Vec::with_capacity(depth_hi - depth_lo + 1);
    for (i, &d) in digits.iter().enumerate().take(depth_hi) {
        let w = m.weight(i + 1, d);
        if w <= 0.0 {
            return Err(Error::UndefinedAtPoint(format!("zero-mass cube at depth {}", i + 1)));
        }
        log_mass += w.log2();
        let depth = i + 1;
        if depth >= depth_lo {
            slopes.push((depth, -log_mass / (k * depth as f64)));
        }
    }
    DimensionEstimate::from_slopes(depth_lo, depth_hi, window, slopes)
}

/// Local dimension at a point of [0,1) given as a float.
pub fn local_dimension_at(
    m: &CascadeMeasure,
    x: f64,
    depth_lo: usize,
    depth_hi: usize,
    window: usize,
) -> Result<DimensionEstimate> {
    let xd = crate::dyadic::Dyadic::from_f64(x).ok_or_else(|| Error::InvalidArgument("bad point".into()))?;
    let bits = m.arity_log() as usize * depth_hi;
    if bits > 63 {
        return Err(Error::InstanceTooLarge("float points resolve at most 63 bits".into()));
    }
    let q = CubeIndex::containing(m.arity_log(), depth_hi, xd)?;
    local_dimension(m, q.digits(), depth_lo, depth_hi, window)
}

/// `q`-quantile (linear interpolation) of a sample.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return invalid("quantile needs a nonempty sample and q in [0,1]");
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    Ok(if i + 1 < v.len() { v[i] * (1.0 - f) + v[i + 1] * f } else { v[i] })
}

/// Packing dimension proxy: the `q`-quantile of limsup envelopes over samples.
///
/// Envelopes use depths `depth/2 ..= depth`.
pub fn packing_dimension_estimate(
    m: &CascadeMeasure,
    n_samples: usize,
    depth: usize,
    q: f64,
    seed: u64,
    window: usize,
) -> Result<DimensionEstimate> {
    if n_samples < 100 {
        return invalid("n_samples must be at least 100");
    }
    if depth < 2 || depth > m.max_depth() {
        return invalid("depth must lie in 2..=max_depth");
    }
    let lo = (depth / 2).max(1);
    let envelopes: Vec<DimensionEstimate> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let digits: Vec<u64> = m.digit_stream(seed, i).take(depth).collect();
            local_dimension(m, &digits, lo, depth, window)
        })
        .collect::<Result<Vec<_>>>()?;
    let limsups: Vec<f64> = envelopes.iter().map(|e| e.limsup).collect();
    let value = quantile(&limsups, q)?;
    let first = envelopes.into_iter().next().expect("n_samples >= 100");
    Ok(DimensionEstimate {
        limsup: limsups.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        liminf: limsups.iter().copied().fold(f64::INFINITY, f64::min),
        quantile: Some(q),
        value,
        ..first
    })
}

/// Box-counting slopes `log2 N(i) / (k i)` from survivor counts.
pub fn box_dimension(a: &DyadicSet, depth_lo: usize, depth_hi: usize, window: usize) -> Result<DimensionEstimate> {
    if depth_lo == 0 || depth_lo > depth_hi || depth_hi > a.build_depth() {
        return invalid("need 1 <= depth_lo <= depth_hi <= build depth");
    }
    let counts: Vec<(usize, f64)> = (depth_lo..=depth_hi).map(|i| (i, a.log2_survivor_count(i))).collect();
    box_dimension_from_log_counts(&counts, a.arity_log(), window)
}

/// Box-counting slopes from `(depth, log2 N)` pairs.
pub fn box_dimension_from_log_counts(counts: &[(usize, f64)], k: u32, window: usize) -> Result<DimensionEstimate> {
    if counts.iter().any(|&(i, _)| i == 0) {
        return invalid("depths must be positive");
    }
    let slopes: Vec<(usize, f64)> = counts.iter().map(|&(i, l)| (i, l / (k as f64 * i as f64))).collect();
    let lo = counts.first().map_or(0, |c| c.0);
    let hi = counts.last().map_or(0, |c| c.0);
    DimensionEstimate::from_slopes(lo, hi, window, slopes)
}

/// One Hölder comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderStep {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `sum r^tau mu_j^{1-tau/D} <= N^{tau/D} r^tau (sum mu_j)^{1-tau/D}`.
pub fn holder_step(masses: &[f64], r: f64, tau: f64, d: f64) -> Result<HolderStep> {
    if !(tau > 0.0 && tau < d) {
        return invalid("tau must lie in (0, D)");
    }
    if masses.iter().any(|m| !m.is_finite() || *m < 0.0) || !(r > 0.0) {
        return invalid("masses must be finite and nonnegative, r positive");
    }
    let g = 1.0 - tau / d;
    let rt = r.powf(tau);
    let lhs: f64 = masses.iter().map(|m| rt * m.powf(g)).sum();
    let total: f64 = masses.iter().sum();
    let rhs = (masses.len() as f64).powf(tau / d) * rt * total.powf(g);
    Ok(HolderStep { lhs, rhs, holds: lhs <= rhs + 1e-12 })
}

/// Exponent assignment for the certificate sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TauRule {
    Constant { tau: f64 },
    /// `taus[i-1]` at depth `i`; the last entry repeats.
    ByDepth { taus: Vec<f64> },
}

impl TauRule {
    pub fn at(&self, depth: usize) -> f64 {
        match self {
            TauRule::Constant { tau } => *tau,
            TauRule::ByDepth { taus } => taus[(depth.max(1) - 1).min(taus.len() - 1)],
        }
    }

    pub fn describe(&self) -> String {
        match self {
            TauRule::Constant { tau } => format!("constant {tau}"),
            TauRule::ByDepth { taus } => format!("by depth {taus:?}"),
        }
    }

    fn validate(&self, d: f64) -> Result<()> {
        let ok = |t: f64| t > 0.0 && t < d;
        let valid = match self {
            TauRule::Constant { tau } => ok(*tau),
            TauRule::ByDepth { taus } => !taus.is_empty() && taus.iter().all(|&t| ok(t)),
        };
        if valid {
            Ok(())
        } else {
            invalid("tau must lie in (0, D) everywhere")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Certified,
    RefutedAtDepth,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Certified => "certified",
            Verdict::RefutedAtDepth => "refuted-at-depth",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// A maximizing collection of disjoint cubes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// Listed cubes of positive mass.
    Explicit { cubes: Vec<CubeIndex> },
    /// Every positive-mass cube of one depth.
    FullDepth { depth: usize },
}

/// Outcome of the max-collection test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateVerdict {
    pub d: f64,
    pub tau: TauRule,
    pub i_min: usize,
    pub depth_limit: usize,
    /// Largest collection sum `S*`.
    pub max_sum: f64,
    /// Full-cover sum at `depth_limit`.
    pub full_cover_sum: f64,
    pub total_mass: f64,
    pub witness: Witness,
    pub witness_size: u128,
    pub verdict: Verdict,
}

fn term(r_log2: f64, tau: f64, d: f64, mass: f64) -> f64 {
    if mass <= 0.0 {
        0.0
    } else {
        (r_log2 * tau + (1.0 - tau / d) * mass.log2()).exp2()
    }
}

fn classify(max_sum: f64, full_cover: f64, total: f64) -> Verdict {
    if max_sum < total {
        Verdict::Certified
    } else if full_cover >= total {
        Verdict::RefutedAtDepth
    } else {
        Verdict::Inconclusive
    }
}

fn check_certificate_args(m: &CascadeMeasure, d: f64, tau: &TauRule, i_min: usize, depth_limit: usize) -> Result<()> {
    if !(d > 0.0) {
        return invalid("D must be positive");
    }
    tau.validate(d)?;
    if i_min == 0 || i_min > depth_limit {
        return invalid("need 1 <= i_min <= depth_limit");
    }
    if depth_limit > m.max_depth() {
        return invalid("depth_limit exceeds max_depth");
    }
    Ok(())
}

/// Max-collection certificate for cubes of depth `i_min..=depth_limit`.
///
/// Cascade weights depend only on level and digit, and the summand is
/// `mu(Q)^{1 - tau/D}` times a depth factor, so `S*(Q) = c_i mu(Q)^{1 - tau/D}`
/// with a scalar recursion over depth. Depth-varying `tau` breaks this
/// homogeneity and uses the explicit tree DP.
pub fn dimension_certificate(
    m: &CascadeMeasure,
    d: f64,
    tau: &TauRule,
    i_min: usize,
    depth_limit: usize,
) -> Result<CertificateVerdict> {
    check_certificate_args(m, d, tau, i_min, depth_limit)?;
    let TauRule::Constant { tau: t } = *tau else {
        return dimension_certificate_tree(m, d, tau, i_min, depth_limit);
    };
    let g = 1.0 - t / d;
    let k = m.arity_log() as f64;
    let b = m.branching();
    let level_factor = |level: usize| -> f64 {
        (0..b).map(|j| m.weight(level, j)).filter(|&w| w > 0.0).map(|w| w.powf(g)).sum()
    };
    let r_tau = |depth: usize| (-(k * depth as f64) * t).exp2();
    // Products of level factors in log2 to keep deep sums finite.
    let mut log_prod = vec![0.0f64; depth_limit + 1];
    for i in 1..=depth_limit {
        log_prod[i] = log_prod[i - 1] + level_factor(i).log2();
    }
    // c[i] for a cube of depth i with unit mass.
    let mut c = vec![0.0f64; depth_limit + 1];
    let mut stop = vec![false; depth_limit + 1];
    c[depth_limit] = r_tau(depth_limit);
    stop[depth_limit] = true;
    for i in (0..depth_limit).rev() {
        let children = c[i + 1] * level_factor(i + 1);
        let own = if i >= i_min { r_tau(i) } else { 0.0 };
        if own >= children && i >= i_min {
            c[i] = own;
            stop[i] = true;
        } else {
            c[i] = children;
        }
    }
    let max_sum = c[0];
    let stop_depth = (i_min..=depth_limit).find(|&i| stop[i]).expect("depth_limit stops");
    let full_cover = (log_prod[depth_limit] - k * depth_limit as f64 * t).exp2();
    let witness_size = positive_cube_count(m, stop_depth);
    Ok(CertificateVerdict {
        d,
        tau: tau.clone(),
        i_min,
        depth_limit,
        max_sum,
        full_cover_sum: full_cover,
        total_mass: 1.0,
        witness: Witness::FullDepth { depth: stop_depth },
        witness_size,
        verdict: classify(max_sum, full_cover, 1.0),
    })
}

fn positive_cube_count(m: &CascadeMeasure, depth: usize) -> u128 {
    let mut n: u128 = 1;
    for level in 1..=depth {
        let c = (0..m.branching()).filter(|&j| m.weight(level, j) > 0.0).count() as u128;
        n = n.saturating_mul(c);
    }
    n
}

/// Per-node max-collection DP over a complete `b`-ary tree.
///
/// `terms[i][q]` is the summand of node `q` at depth `i`; nodes above
/// `i_min` may not be chosen. Returns `S*` at the root and the chosen
/// antichain as `(depth, index)` pairs in left-to-right order.
pub fn max_collection(terms: &[Vec<f64>], branching: usize, i_min: usize) -> Result<(f64, Vec<(usize, usize)>)> {
    let depth = terms.len().checked_sub(1).ok_or_else(|| Error::InvalidArgument("empty tree".into()))?;
    for (i, row) in terms.iter().enumerate() {
        if row.len() != branching.pow(i as u32) {
            return invalid(format!("depth {i} needs {} nodes", branching.pow(i as u32)));
        }
    }
    if i_min > depth {
        return invalid("i_min beyond the tree");
    }
    let mut best: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
    let mut take: Vec<Vec<bool>> = vec![Vec::new(); depth + 1];
    best[depth] = terms[depth].clone();
    take[depth] = vec![true; terms[depth].len()];
    for i in (0..depth).rev() {
        let below = &best[i + 1];
        let (b, t): (Vec<f64>, Vec<bool>) = (0..terms[i].len())
            .into_par_iter()
            .map(|q| {
                let children: f64 = below[q * branching..(q + 1) * branching].iter().sum();
                if i >= i_min && terms[i][q] >= children {
                    (terms[i][q], true)
                } else {
                    (children, false)
                }
            })
            .unzip();
        best[i] = b;
        take[i] = t;
    }
    let mut chosen = Vec::new();
    let mut stack = vec![(0usize, 0usize)];
    while let Some((i, q)) = stack.pop() {
        if take[i][q] {
            chosen.push((i, q));
        } else {
            for c in (q * branching..(q + 1) * branching).rev() {
                stack.push((i + 1, c));
            }
        }
    }
    Ok((best[0][0], chosen))
}

/// Explicit-tree certificate for arbitrary `tau` rules (up to 2^22 leaves).
pub fn dimension_certificate_tree(
    m: &CascadeMeasure,
    d: f64,
    tau: &TauRule,
    i_min: usize,
    depth_limit: usize,
) -> Result<CertificateVerdict> {
    check_certificate_args(m, d, tau, i_min, depth_limit)?;
    let k = m.arity_log();
    if k as usize * depth_limit > 22 {
        return Err(Error::InstanceTooLarge("explicit tree DP is limited to 2^22 leaves".into()));
    }
    let b = m.branching() as usize;
    let mut masses: Vec<Vec<f64>> = vec![vec![1.0]];
    for level in 1..=depth_limit {
        let prev = &masses[level - 1];
        let next: Vec<f64> = prev
            .iter()
            .flat_map(|&p| (0..b as u64).map(move |j| p * m.weight(level, j)))
            .collect();
        masses.push(next);
    }
    let terms: Vec<Vec<f64>> = masses
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let t = tau.at(i);
            let rl = -(k as f64) * i as f64;
            row.iter().map(|&mu| term(rl, t, d, mu)).collect()
        })
        .collect();
    let (_, chosen) = max_collection(&terms, b, i_min)?;
    let cubes: Vec<CubeIndex> = chosen
        .iter()
        .filter(|&&(i, q)| masses[i][q] > 0.0)
        .map(|&(i, q)| CubeIndex::from_index(k, i, q as u64))
        .collect::<Result<Vec<_>>>()?;
    let max_sum = collection_sum(m, d, tau, &cubes)?;
    let full_cover: f64 = terms[depth_limit].iter().sum();
    Ok(CertificateVerdict {
        d,
        tau: tau.clone(),
        i_min,
        depth_limit,
        max_sum,
        full_cover_sum: full_cover,
        total_mass: 1.0,
        witness_size: cubes.len() as u128,
        witness: Witness::Explicit { cubes },
        verdict: classify(max_sum, full_cover, 1.0),
    })
}

/// `sum r_Q^{tau(Q)} mu(Q)^{1 - tau(Q)/D}`, summed in the given order.
pub fn collection_sum(m: &CascadeMeasure, d: f64, tau: &TauRule, cubes: &[CubeIndex]) -> Result<f64> {
    let mut s = 0.0;
    for q in cubes {
        let t = tau.at(q.depth());
        let mu = m.mass_of_cube(q)?;
        s += term(q.side_log2() as f64, t, d, mu);
    }
    Ok(s)
}

/// True when no cube in the list contains another.
pub fn pairwise_disjoint(cubes: &[CubeIndex]) -> bool {
    let mut sorted: Vec<&CubeIndex> = cubes.iter().collect();
    sorted.sort_by(|a, b| a.digits().cmp(b.digits()));
    sorted.windows(2).all(|w| !w[0].is_ancestor_of(w[1]) && w[0] != w[1])
}

impl CertificateVerdict {
    /// Recomputes the witness sum, enumerating full-depth witnesses up to 2^22 cubes.
    pub fn recompute_sum(&self, m: &CascadeMeasure) -> Result<f64> {
        match &self.witness {
            Witness::Explicit { cubes } => collection_sum(m, self.d, &self.tau, cubes),
            Witness::FullDepth { depth } => {
                let t = self.tau.at(*depth);
                let g = 1.0 - t / self.d;
                let k = m.arity_log() as f64;
                let mut log_sum = 0.0;
                for level in 1..=*depth {
                    let f: f64 = (0..m.branching())
                        .map(|j| m.weight(level, j))
                        .filter(|&w| w > 0.0)
                        .map(|w| w.powf(g))
                        .sum();
                    log_sum += f.log2();
                }
                Ok((log_sum - k * *depth as f64 * t).exp2())
            }
        }
    }

    /// Explicit witness cubes (full-depth witnesses up to 2^22 cubes).
    pub fn witness_cubes(&self, m: &CascadeMeasure) -> Result<Vec<CubeIndex>> {
        match &self.witness {
            Witness::Explicit { cubes } => Ok(cubes.clone()),
            Witness::FullDepth { depth } => {
                let bits = m.arity_log() as usize * depth;
                if bits > 22 {
                    return Err(Error::InstanceTooLarge(format!("witness has 2^{bits} cubes")));
                }
                (0..1u64 << bits)
                    .map(|j| CubeIndex::from_index(m.arity_log(), *depth, j))
                    .filter(|q| q.as_ref().map_or(true, |q| m.mass_of_cube(q).is_ok_and(|v| v > 0.0)))
                    .collect()
            }
        }
    }

    pub fn write_witness_csv<W: Write>(&self, m: &CascadeMeasure, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(["cube_id"]).map_err(io)?;
        for q in self.witness_cubes(m)? {
            w.write_record([q.to_string()]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(format!("io: {e}")))?;
        Ok(())
    }
}
