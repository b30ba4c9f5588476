use std::fs;
use std::io::Write;

use anyhow::{bail, Context, Result};
use porous_core::cascade::counterexample_s;
use porous_core::counterexample::digit_equal_fraction;
use porous_core::dimension::quantile;
use porous_core::porosity::{write_profiles_csv, WitnessRule};
use porous_core::sets::{porous_scale_count, SetRule};
use porous_core::theorem::{alpha_for_k, verify_claim2};
use porous_core::*;
use rayon::prelude::*;
use serde_json::json;

use crate::args::*;
use crate::objects::Object;
use crate::report::{report_schema_version, Report};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_CHECK: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    CheckFailed,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Pass => EXIT_OK,
            Outcome::CheckFailed => EXIT_CHECK,
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Construct(a) => construct(&a),
        Command::Porosity(a) => porosity(&a),
        Command::MeanPorosity(a) => mean_porosity(&a),
        Command::Dimension(a) => dimension(&a),
        Command::Certify(a) => certify(&a),
        Command::Bound(a) => bound(&a),
        Command::Claim1(a) => claim1(&a),
        Command::Counterexample(CounterexampleCommand::Verify(a)) => verify(&a),
        Command::SchemaVersion => {
            println!("{}", report_schema_version());
            Ok(Outcome::Pass)
        }
    }
}

fn emit(out: &OutputArgs, bytes: &[u8]) -> Result<()> {
    match &out.output {
        Some(p) => fs::write(p, bytes).with_context(|| format!("output: cannot write `{}`", p.display())),
        None => std::io::stdout().lock().write_all(bytes).context("output: cannot write to stdout"),
    }
}

/// Writes the report, or the CSV with check lines on stderr.
fn finish(out: &OutputArgs, format: Format, csv: Vec<u8>, report: &Report) -> Result<Outcome> {
    match format {
        Format::Json => emit(out, report.to_json().as_bytes())?,
        Format::Csv => {
            emit(out, &csv)?;
            for r in report.results.iter().filter(|r| r.pass.is_some()) {
                let verdict = if r.pass == Some(true) { "pass" } else { "FAIL" };
                eprintln!("{}: {} value={} bound={}", r.name, verdict, r.value, r.bound);
            }
        }
    }
    Ok(if report.passed() { Outcome::Pass } else { Outcome::CheckFailed })
}

fn construct(a: &ConstructArgs) -> Result<Outcome> {
    let obj = a.object.build()?;
    let mut r = Report::new("construct", a);
    let mut csv = Vec::new();
    match &obj {
        Object::Set(s) => {
            if a.depth > s.build_depth() {
                bail!("depth: exceeds the build depth {}", s.build_depth());
            }
            if a.format == Format::Csv {
                s.write_survivors_csv(a.depth, &mut csv)?;
            }
            let counts: Vec<f64> = (0..=a.depth).map(|i| s.log2_survivor_count(i)).collect();
            if a.depth > 0 {
                let slope = counts[a.depth] / (s.arity_log() as f64 * a.depth as f64);
                r.info("box_slope", "log2 N(i) / (k i) at the deepest level", slope);
            }
            r.info("log2_survivor_counts", "log2 of the survivor count at each depth", counts);
            if let (Some(max_scale), SetRule::Example { m, k, n, l_max }) = (a.max_scale, s.rule()) {
                let ps = PorousScaleSet::new(*m as u64, *k as u64, *n as u64, *l_max as u64)?;
                let dens = porous_scales(&ps, max_scale)?;
                let closed = porous_scale_count(&ps, max_scale);
                r.check(
                    "porous_scale_count",
                    "enumerated porous scales below S against the closed-form count",
                    dens.count,
                    closed,
                    dens.count == closed,
                );
                r.info("porous_scale_density", "porous scale count over S", dens.density);
            }
        }
        Object::Measure(m) => {
            if a.format == Format::Csv {
                m.write_masses_csv(a.depth, &mut csv)?;
            }
            let bits = m.arity_log() as usize * a.depth;
            if bits > 24 || a.depth > m.max_depth() {
                bail!("depth: at most 24 bits and max_depth levels");
            }
            let masses: Vec<f64> = (0..1u64 << bits)
                .map(|j| CubeIndex::from_index(m.arity_log(), a.depth, j).map(|q| m.mass_of_digits(q.digits())))
                .collect::<porous_core::Result<_>>()?;
            let total: f64 = masses.iter().sum();
            r.check("total_mass", "masses of the depth-i cubes sum to one", total, 1.0, (total - 1.0).abs() <= 1e-12);
            r.info("label", "measure description", m.label());
        }
    }
    finish(&a.out, a.format, csv, &r)
}

fn sample_points(obj: &Object, p: &PointArgs) -> Result<Vec<f64>> {
    if !p.x.is_empty() {
        if let Some(x) = p.x.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            bail!("x: {x} is outside [0, 1]");
        }
        return Ok(p.x.clone());
    }
    if p.samples == 0 {
        bail!("samples: must be positive");
    }
    Ok(match obj {
        Object::Measure(m) => {
            let depth = p.sample_depth.min(m.max_depth());
            m.sample_points(p.seed, p.samples, depth).into_iter().map(|s| s.x).collect()
        }
        Object::Set(a) => (0..p.samples as u64).map(|i| a.sample_survivor(p.seed, i).x).collect(),
    })
}

fn profiles(obj: &Object, xs: &[f64], p: &ProfileArgs) -> Result<Vec<PorosityProfile>> {
    let resolution = match p.resolution {
        Some(bits) => Resolution::Fixed { bits },
        None => Resolution::Relative { guard: p.guard },
    };
    let k = p.k.unwrap_or(obj.arity_log());
    let target = match obj {
        Object::Set(a) => Target::Set(a),
        Object::Measure(m) => Target::Measure { measure: m, eps: p.epsilon },
    };
    Ok(xs
        .par_iter()
        .map(|&x| porosity_profile(target, x, p.scales, p.offset, k, resolution))
        .collect::<porous_core::Result<Vec<_>>>()?)
}

fn porosity(a: &PorosityArgs) -> Result<Outcome> {
    let obj = a.object.build()?;
    let xs = sample_points(&obj, &a.points)?;
    let profs = profiles(&obj, &xs, &a.profile)?;
    let mut r = Report::new("porosity", a);
    if a.analytic_scales {
        let Object::Set(s) = &obj else { bail!("analytic-scales: needs an example set") };
        let SetRule::Example { m, k, n, l_max } = s.rule() else { bail!("analytic-scales: needs an example set") };
        let ps = PorousScaleSet::new(*m as u64, *k as u64, *n as u64, *l_max as u64)?;
        let (mut agree, mut pairs, mut analytic, mut confirmed) = (0u64, 0u64, 0u64, 0u64);
        for prof in &profs {
            for (v, flag) in prof.values.iter().zip(prof.flags(a.alpha)) {
                let s = -v.radius_log2;
                let expected = s >= 1 && ps.contains(s as u64);
                pairs += 1;
                agree += (flag == expected) as u64;
                analytic += expected as u64;
                confirmed += (expected && flag) as u64;
            }
        }
        let agreement = agree as f64 / pairs as f64;
        r.check(
            "flag_agreement",
            "porosity flags agree with the analytic porous scales",
            agreement,
            a.min_agreement,
            agreement >= a.min_agreement,
        );
        r.info(
            "analytic_scales_confirmed",
            "fraction of analytic porous scales that are flagged",
            if analytic > 0 { confirmed as f64 / analytic as f64 } else { 1.0 },
        );
    }
    let mut csv = Vec::new();
    match a.format {
        Format::Csv => write_profiles_csv(&profs, a.alpha, &mut csv)?,
        Format::Json => r.info("profiles", "porosity at each scale", &profs),
    }
    finish(&a.out, a.format, csv, &r)
}

fn mean_porosity(a: &MeanPorosityArgs) -> Result<Outcome> {
    if a.depths.is_empty() {
        bail!("depths: give at least one depth");
    }
    if let Some(&i) = a.depths.iter().find(|&&i| i == 0 || i > a.profile.scales) {
        bail!("depths: {i} is outside 1..={}", a.profile.scales);
    }
    let obj = a.object.build()?;
    let xs = sample_points(&obj, &a.points)?;
    let profs = profiles(&obj, &xs, &a.profile)?;
    let rows: Vec<Vec<MeanPorosityRow>> = profs
        .iter()
        .map(|p| {
            a.depths
                .iter()
                .map(|&i| mean_porosity_fraction(p, a.alpha, i).map(|f| MeanPorosityRow { i, fraction: f.fraction, running_min: f.running_min }))
                .collect::<porous_core::Result<Vec<_>>>()
        })
        .collect::<porous_core::Result<_>>()?;
    let mut r = Report::new("mean-porosity", a);
    let mut medians = Vec::new();
    for (c, &i) in a.depths.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|row| row[c].fraction).collect();
        let med = quantile(&col, 0.5)?;
        medians.push(med);
        r.info(&format!("median_fraction_i{i}"), "median fraction of porous scales among the first i", med);
    }
    if let Some(p) = a.p {
        let last = *medians.last().expect("depths is nonempty");
        r.check("median_fraction", "median porous-scale fraction at the last depth", last, p, last >= p);
        let nondecreasing = medians.windows(2).all(|w| w[0] <= w[1]);
        r.check("median_nondecreasing", "medians nondecreasing in depth", &medians, serde_json::Value::Null, nondecreasing);
    }
    let mut csv = Vec::new();
    if a.format == Format::Csv {
        writeln!(csv, "point_id,x,i,fraction,running_min")?;
        for (id, (x, row)) in xs.iter().zip(&rows).enumerate() {
            for v in row {
                writeln!(csv, "{id},{x},{},{},{}", v.i, v.fraction, v.running_min)?;
            }
        }
    }
    finish(&a.out, a.format, csv, &r)
}

struct MeanPorosityRow {
    i: usize,
    fraction: f64,
    running_min: f64,
}

fn dimension(a: &DimensionArgs) -> Result<Outcome> {
    let obj = a.object.build()?;
    let mut r = Report::new("dimension", a);
    let (est, what) = match &obj {
        Object::Measure(m) => (
            packing_dimension_estimate(m, a.samples, a.depth, a.quantile, a.seed, a.window)?,
            "quantile of local-dimension limsup envelopes over samples",
        ),
        Object::Set(s) => {
            let lo = a.depth_lo.unwrap_or((a.depth / 2).max(1));
            (box_dimension(s, lo, a.depth, a.window)?, "largest windowed box-counting slope")
        }
    };
    r.info("estimate", what, est.value);
    r.info("envelope_range", "smallest and largest windowed slope", [est.liminf, est.limsup]);
    if let Some(alpha) = a.alpha {
        let b = dim_bound(1, a.p, alpha, a.c)?;
        r.check("below_bound", "estimate at most the porosity dimension bound", est.value, b.bound, est.value <= b.bound);
        r.info("bound_ratio", "bound over estimate", b.bound / est.value);
        r.info("bound_k", "scale step of the bound", b.constants.k);
    }
    emit(&a.out, r.to_json().as_bytes())?;
    Ok(if r.passed() { Outcome::Pass } else { Outcome::CheckFailed })
}

fn certify(a: &CertifyArgs) -> Result<Outcome> {
    let m = a.object.build_measure()?;
    let tau = TauRule::Constant { tau: a.tau.unwrap_or(a.big_d / 2.0) };
    let v = dimension_certificate(&m, a.big_d, &tau, a.i_min, a.depth)?;
    let mut r = Report::new("certify", a);
    r.info("verdict", "largest disjoint-collection sum against the total mass", v.verdict.as_str());
    r.compare("max_sum", "largest disjoint-collection sum", v.max_sum, v.total_mass);
    r.compare("full_cover_sum", "sum over all cubes of the deepest level", v.full_cover_sum, v.total_mass);
    r.info("witness_size", "cubes in the maximizing collection", v.witness_size.to_string());
    if let Some(path) = &a.witness_csv {
        let mut buf = Vec::new();
        v.write_witness_csv(&m, &mut buf)?;
        fs::write(path, buf).with_context(|| format!("witness-csv: cannot write `{}`", path.display()))?;
    }
    if let Some(expect) = &a.expect {
        let got = v.verdict.as_str();
        r.check("expected_verdict", "verdict matches the expectation", got, expect, got == expect);
    }
    emit(&a.out, r.to_json().as_bytes())?;
    Ok(if r.passed() { Outcome::Pass } else { Outcome::CheckFailed })
}

fn alpha_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts[..] else { bail!("alpha-grid: expected lo:hi:count, got `{spec}`") };
    let lo: f64 = lo.parse().with_context(|| format!("alpha-grid: bad lower end `{lo}`"))?;
    let hi: f64 = hi.parse().with_context(|| format!("alpha-grid: bad upper end `{hi}`"))?;
    let n: usize = n.parse().with_context(|| format!("alpha-grid: bad count `{n}`"))?;
    match n {
        0 => bail!("alpha-grid: count must be positive"),
        1 => Ok(vec![lo]),
        _ => Ok((0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect()),
    }
}

fn bound(a: &BoundArgs) -> Result<Outcome> {
    let mut alphas = a.alpha.clone();
    if let Some(g) = &a.alpha_grid {
        alphas.extend(alpha_grid(g)?);
    }
    if alphas.is_empty() {
        bail!("alpha: give --alpha or --alpha-grid");
    }
    let bounds = alphas
        .iter()
        .map(|&alpha| dim_bound(a.d, a.p, alpha, a.c).with_context(|| format!("alpha: {alpha}")))
        .collect::<Result<Vec<_>>>()?;
    let mut r = Report::new("bound", a);
    let mut csv = Vec::new();
    writeln!(csv, "alpha,l,k,C,N,D0,bound")?;
    for b in &bounds {
        let c = &b.constants;
        writeln!(csv, "{},{},{},{},{},{},{}", c.alpha, c.l, c.k, c.cap_c, c.n_cubes, b.d0, b.bound)?;
        r.info(
            "bound",
            "dimension bound for porous fraction p",
            json!({
                "alpha": c.alpha, "l": c.l, "k": c.k, "C": c.cap_c, "N": c.n_cubes,
                "D0": b.d0, "bound": b.bound, "coarse": b.coarse, "vacuous": b.vacuous,
                "valid": c.theorem_valid,
            }),
        );
    }
    finish(&a.out, a.format, csv, &r)
}

fn claim1(a: &Claim1Args) -> Result<Outcome> {
    let m = a.object.build_measure()?;
    let alpha = match (a.alpha, a.k) {
        (Some(alpha), _) => alpha,
        (None, Some(k)) => alpha_for_k(k),
        (None, None) => bail!("alpha: give --alpha or --k"),
    };
    let tc = constants(1, alpha, a.c)?;
    let big_d = match a.big_d {
        Some(d) => d,
        None => dim_bound(1, a.p, alpha, a.c)?.d0 + 0.01,
    };
    let e0 = epsilon0(&tc, big_d, a.n)?;
    let eps = a.eps.unwrap_or(e0.eps0 / 2.0);
    let q = match &a.cube {
        Some(s) => CubeIndex::parse_with_dim(s, 1)?,
        None => CubeIndex::root(tc.k, 1)?,
    };
    let witness = match a.witness {
        WitnessArg::CornerAndChildCentres => WitnessRule::CornerAndChildCentres,
        WitnessArg::Centre => WitnessRule::Centre,
    };
    let cp = ClaimParams { big_d, n: a.n, eps, guard: a.guard, witness };
    let rep = verify_claim1(&m, &q, &tc, &cp)?;
    let mut r = Report::new("claim1", a);
    r.info(
        "constants",
        "constants of the instance",
        json!({ "alpha": alpha, "l": tc.l, "k": tc.k, "C": tc.cap_c, "D": big_d, "eps": eps, "eps0": e0.eps0 }),
    );
    r.check("claim1", "weighted subcube sum at most the cube's own weighted term", rep.lhs, rep.rhs, rep.holds);
    r.info("porous_by_level", "(level, porous, total) subcube counts", &rep.porous_by_level);
    if let Some(blocks) = a.blocks {
        let c2 = verify_claim2(&m, &tc, &cp, blocks)?;
        r.check("claim2", "iterated weighted sum over the full cover at most one", c2.lhs, c2.rhs, c2.holds);
    }
    emit(&a.out, r.to_json().as_bytes())?;
    Ok(if r.passed() { Outcome::Pass } else { Outcome::CheckFailed })
}

fn verify(a: &VerifyArgs) -> Result<Outcome> {
    if a.l == 0 || a.m == 0 {
        bail!("l, m: must be positive");
    }
    let block = (a.l + a.m) as usize;
    let path_len = (a.chain_blocks + 1) * block;
    let depth = a.depth.max(a.set_depth).max(path_len);
    let mu = counterexample_measure(a.log_base, depth)?;
    let e = even_digits_zero(depth)?;
    let ew = EtaWeights::new(a.l, a.m, e.clone(), a.log_base)?;
    let mut r = Report::new("counterexample verify", a);

    let sm = measure_of_set_approx(&mu, &e, a.set_depth)?;
    let direct: f64 = (2..=a.set_depth).step_by(2).map(|j| counterexample_s(a.log_base, j)).product();
    r.check("set_mass", "mass of the depth-i approximation of the set", sm.mass, a.mass_bound, sm.mass < a.mass_bound);
    let gap = (sm.mass - direct).abs();
    r.check("set_mass_product", "set mass against the product of digit-zero weights", gap, 1e-10, gap <= 1e-10);

    for i in 1..=a.depth / block {
        let s = weighted_sum_check(&ew, &mu, i)?;
        r.check(
            &format!("weighted_sum_i{i}"),
            "eta-weighted mass of the depth-i(l+m) cubes meeting the set is at most one",
            s.sum,
            1.0,
            s.holds,
        );
    }

    let mut levels: Vec<usize> = [1, 5, 10, 20, a.chain_blocks].into_iter().filter(|&i| i <= a.chain_blocks).collect();
    levels.dedup();
    let chains: Vec<(bool, f64)> = (0..a.chains)
        .into_par_iter()
        .map(|c| {
            let path: Vec<u8> = if c % 2 == 0 {
                e.sample_survivor(a.seed, c).digits[..path_len].iter().map(|&d| d as u8).collect()
            } else {
                mu.sample_indexed(a.seed, c, path_len).digits.iter().map(|&d| d as u8).collect()
            };
            levels
                .iter()
                .map(|&i| {
                    let ch = eta_product(&path, &ew, i)?;
                    Ok((ch.within_bound(), ch.c_bound.map_or(0.0, |b| ch.product() / b)))
                })
                .collect::<porous_core::Result<Vec<_>>>()
        })
        .collect::<porous_core::Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let within = chains.iter().filter(|c| c.0).count();
    r.check("eta_chains", "eta products along ancestor chains at most the density bound", within, chains.len(), within == chains.len());
    r.info("eta_chain_max_ratio", "largest product over bound", chains.iter().map(|c| c.1).fold(0.0, f64::max));

    if a.digit_run > 0 && a.digit_seeds > 0 {
        let dm = counterexample_measure(a.log_base, a.digit_run + 1)?;
        let short = 1000.min(a.digit_run);
        let rows: Vec<(f64, f64, f64)> = (0..a.digit_seeds)
            .into_par_iter()
            .map(|seed| {
                let long = digit_equal_fraction(&dm, seed, 0, a.digit_run)?;
                let brief = digit_equal_fraction(&dm, seed, 0, short)?;
                Ok((long.empirical, long.analytic, brief.empirical))
            })
            .collect::<porous_core::Result<_>>()?;
        let worst = rows.iter().map(|x| (x.0 - x.1).abs()).fold(0.0, f64::max);
        r.check("digit_equal_fraction", "equal consecutive digits against the independent-digit expectation", worst, 0.01, worst <= 0.01);
        if a.digit_run > short {
            let smaller = rows.iter().filter(|x| x.0 < x.2).count() as f64 / rows.len() as f64;
            r.check("digit_fraction_decreases", "share of seeds whose fraction drops from 1000 digits", smaller, 0.95, smaller >= 0.95);
        }
    }
    emit(&a.out, r.to_json().as_bytes())?;
    Ok(if r.passed() { Outcome::Pass } else { Outcome::CheckFailed })
}
