//! The invariant suite behind `zorich verify`.
//!
//! Hard checks are exact identities or inequalities whose constants are
//! certified by calibration. Checks involving sampled constants are
//! collected separately and never fail the run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::address::ExternalAddress;
use crate::dynamics::{self, OrbitStatus};
use crate::error::Result;
use crate::hair::{self, CurveOptions, HairPoint, HairSample};
use crate::io::{Ledger, RunConfig};
use crate::lattice::{self, LatticeIndex};
use crate::linalg::{self, Vector};
use crate::map::Calibration;
use crate::sampling::{self, SampledConstants};
use crate::tower::OVERFLOW_THRESHOLD;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub metrics: Value,
}

fn check(name: &str, passed: bool, metrics: Value) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        metrics,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub ledger: Ledger,
    pub hard: Vec<CheckResult>,
    pub report_only: Vec<CheckResult>,
    pub all_hard_passed: bool,
}

impl VerifyReport {
    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// The zero address, the period-one address over `(2, 0, ...)`, and the
/// growth address with `tau = 1/2` along `e_1`.
pub fn standard_suite(len: usize) -> Vec<(&'static str, ExternalAddress)> {
    let mut two = vec![0i64; len];
    two[0] = 2;
    vec![
        ("zero", ExternalAddress::zero(len)),
        (
            "periodic",
            ExternalAddress::periodic(len, vec![LatticeIndex::new(two)]).expect("(2,0,..) lies in S"),
        ),
        ("growth", ExternalAddress::growth(len, 0.5, 0, false).expect("valid growth tail")),
    ]
}

/// `g_k(t)` by composing inverse branches on plain doubles, starting from
/// `(0, ..., 0, E^{k+1}(t) + M)`. The tangent is `None` once
/// `(E^{k+1})'(t)` overflows; the whole result is `None` once `E^{k+1}(t)` does.
pub fn naive_hair_point(cal: &Calibration, addr: &ExternalAddress, k: usize, t: f64) -> Result<Option<(Vector, Option<Vector>)>> {
    let d = cal.dimension();
    let mut e = t;
    let mut de = 1.0;
    for _ in 0..=k {
        de *= e.exp();
        e = e.exp_m1();
    }
    if !e.is_finite() {
        return Ok(None);
    }
    let mut x = Vector::zeros(d);
    x[d - 1] = e + cal.m_upper;
    let mut w = de.is_finite().then(|| {
        let mut w = Vector::zeros(d);
        w[d - 1] = de;
        w
    });
    for l in (0..=k).rev() {
        let Some(r) = addr.entry(l).exact().cloned() else {
            return Ok(None);
        };
        if let Some(v) = w.as_mut() {
            *v = cal.dlambda(&r, x.as_slice())? * &*v;
        }
        x = cal.lambda(&r, x.as_slice())?.value;
    }
    Ok(Some((x, w)))
}

fn rel_err(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

struct Suite {
    addrs: Vec<(&'static str, ExternalAddress)>,
    t_s: Vec<f64>,
    samples: Vec<Vec<HairSample>>,
}

const SAMPLE_OFFSETS: [f64; 4] = [0.25, 0.5, 1.0, 1.5];

fn build_suite(cal: &Calibration) -> Result<Suite> {
    let addrs = standard_suite(cal.dimension() - 1);
    let mut t_s = Vec::new();
    let mut samples = Vec::new();
    for (_, a) in &addrs {
        let ts = a.bounds(32)?.t_s;
        let grid: Vec<f64> = SAMPLE_OFFSETS.iter().map(|o| ts + o).collect();
        samples.push(hair::hair_curve(cal, a, &grid, CurveOptions::default())?);
        t_s.push(ts);
    }
    Ok(Suite { addrs, t_s, samples })
}

pub fn run_verify(config: &RunConfig) -> Result<VerifyReport> {
    let cal = config.calibrate()?;
    run_verify_with(&cal, config.seed)
}

pub fn run_verify_with(cal: &Calibration, seed: u64) -> Result<VerifyReport> {
    let consts = sampling::sample_constants(cal, seed, sampling::DEFAULT_SAMPLES)?;
    let suite = build_suite(cal)?;
    let hard = vec![
        calibration_check(cal),
        kernel_round_trip(cal, seed),
        norm_law(cal, seed),
        inverse_identity(cal, seed)?,
        axis_formula(cal, seed)?,
        branch_contraction(cal, seed)?,
        fixed_point_check(cal)?,
        oracle_equivalence(cal)?,
        offsets_nonnegative(cal, &suite)?,
        rate_check(cal, &suite, false)?,
        rate_check(cal, &suite, true)?,
        tangent_fd(&suite),
        address_law(cal, &suite),
        t_s_recovery()?,
        hair_injective(&suite),
    ];
    let report_only = vec![
        json_check("sampled_constants", true, serde_json::to_value(&consts)?),
        lemma_spot_checks(cal, &consts)?,
        path_estimate(cal, &consts, seed)?,
        dlambda_difference(cal, &consts, seed)?,
        omega_fraction(cal, seed)?,
        height_monotonicity(cal, &suite)?,
        tie_report(&suite),
    ];
    let all_hard_passed = hard.iter().all(|c| c.passed);
    Ok(VerifyReport {
        seed,
        ledger: Ledger::from_calibration(cal, Some(consts)),
        hard,
        report_only,
        all_hard_passed,
    })
}

fn json_check(name: &str, passed: bool, metrics: Value) -> CheckResult {
    check(name, passed, metrics)
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn random_s(rng: &mut ChaCha8Rng, len: usize, span: i64) -> LatticeIndex {
    LatticeIndex::new((0..len).map(|_| rng.random_range(-span..=span)).collect()).project_to_s()
}

fn calibration_check(cal: &Calibration) -> CheckResult {
    let res = cal.validate();
    check(
        "calibration_invariants",
        res.is_ok(),
        json!({ "error": res.err().map(|e| e.to_string()) }),
    )
}

fn kernel_round_trip(cal: &Calibration, seed: u64) -> CheckResult {
    let mut r = rng(seed, 1);
    let n = cal.dimension() - 1;
    let (mut worst_trip, mut worst_unit) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..=1.0)).collect();
        let y = cal.kernel.eval_raw(&x);
        worst_unit = worst_unit.max((y.norm() - 1.0).abs());
        let back = cal.kernel.invert_raw(y.as_slice());
        worst_trip = worst_trip.max((back - Vector::from_column_slice(&x)).norm());
    }
    check(
        "kernel_round_trip",
        worst_trip <= 1e-12 && worst_unit <= 1e-12,
        json!({ "max_round_trip": worst_trip, "max_unit_defect": worst_unit }),
    )
}

fn norm_law(cal: &Calibration, seed: u64) -> CheckResult {
    let mut r = rng(seed, 2);
    let d = cal.dimension();
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let mut x: Vec<f64> = (0..d - 1).map(|_| r.random_range(-50.0..50.0)).collect();
        x.push(r.random_range(-300.0..300.0));
        let y = cal.zorich(&x).expect("height below limit");
        worst = worst.max((y.norm() / x[d - 1].exp() - 1.0).abs());
    }
    check("norm_law", worst <= 1e-12, json!({ "max_rel_err": worst }))
}

fn inverse_identity(cal: &Calibration, seed: u64) -> Result<CheckResult> {
    let mut r = rng(seed, 3);
    let n = cal.dimension() - 1;
    let mut pts = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        pts.push((sampling::sample_point(cal, &mut r), random_s(&mut r, n, 20)));
    }
    let res = pts
        .par_iter()
        .map(|(x, s)| -> Result<(f64, bool)> {
            let bp = cal.lambda(s, x.as_slice())?;
            let inside = lattice::in_tract(bp.value.as_slice(), s, cal.m_upper)?;
            Ok((rel_err(&cal.f(bp.value.as_slice())?, x), inside))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = res.iter().map(|v| v.0).fold(0.0, f64::max);
    let outside = res.iter().filter(|v| !v.1).count();
    Ok(check(
        "inverse_identity",
        worst <= 1e-9 && outside == 0,
        json!({ "samples": pts.len(), "max_rel_err": worst, "outside_tract": outside }),
    ))
}

fn axis_formula(cal: &Calibration, seed: u64) -> Result<CheckResult> {
    let mut r = rng(seed, 4);
    let d = cal.dimension();
    let v = cal.v();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = random_s(&mut r, d - 1, 50);
        let t = (cal.m_upper.ln() + r.random::<f64>() * (1e6f64.ln() - cal.m_upper.ln())).exp().max(cal.m_upper);
        let mut x = Vector::zeros(d);
        x[d - 1] = t;
        let got = cal.lambda(&s, x.as_slice())?.value;
        let mut want = s.center() + &v;
        want = want.insert_row(d - 1, (t + cal.a).ln());
        worst = worst.max(rel_err(&got, &want));
    }
    Ok(check("axis_formula", worst <= 1e-12, json!({ "max_rel_err": worst })))
}

fn branch_contraction(cal: &Calibration, seed: u64) -> Result<CheckResult> {
    let mut r = rng(seed, 5);
    let zero = LatticeIndex::zero(cal.dimension() - 1);
    let pts: Vec<Vector> = (0..10_000).map(|_| sampling::sample_point(cal, &mut r)).collect();
    let norms = pts
        .par_iter()
        .map(|x| cal.dlambda(&zero, x.as_slice()).map(|m| linalg::op_norm(&m)))
        .collect::<Result<Vec<_>>>()?;
    let worst = norms.iter().copied().fold(0.0, f64::max);
    Ok(check(
        "dlambda_norm",
        worst <= cal.alpha * (1.0 + 1e-6),
        json!({ "max_norm": worst, "alpha": cal.alpha }),
    ))
}

/// Largest ratio of consecutive fixed-point steps while both are well
/// above rounding level.
pub fn max_step_ratio(steps: &[f64]) -> f64 {
    steps
        .windows(2)
        .filter(|w| w[1] > 1e-9)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max)
}

fn fixed_point_check(cal: &Calibration) -> Result<CheckResult> {
    let run = cal.fixed_point()?;
    let d = cal.dimension();
    let residual = (cal.f(run.point.as_slice())? - &run.point).norm();
    let ratio = max_step_ratio(&run.steps);
    Ok(check(
        "fixed_point",
        residual <= 1e-12 && run.point[d - 1] <= cal.m && ratio <= cal.alpha * (1.0 + 1e-6),
        json!({
            "residual": residual,
            "xi_d": run.point[d - 1],
            "iterations": run.iterations,
            "max_step_ratio": ratio,
        }),
    ))
}

fn oracle_equivalence(cal: &Calibration) -> Result<CheckResult> {
    let suite = standard_suite(cal.dimension() - 1);
    let mut worst = 0.0f64;
    let mut worst_tangent = 0.0f64;
    let mut compared = 0usize;
    for (_, a) in &suite {
        for k in 0..=3 {
            for i in 0..=30 {
                let t = 1.5 * i as f64 / 30.0;
                let Some((x, w)) = naive_hair_point(cal, a, k, t)? else {
                    continue;
                };
                let hp = hair::hair_point(cal, a, k, t)?;
                worst = worst.max(rel_err(&hp.point, &x));
                if let Some(w) = w {
                    worst_tangent = worst_tangent.max(rel_err(&hp.tangent, &w));
                }
                compared += 1;
            }
        }
    }
    Ok(check(
        "oracle_equivalence",
        worst <= 1e-9 && compared > 0,
        json!({ "compared": compared, "max_rel_err": worst, "max_tangent_rel_err": worst_tangent }),
    ))
}

fn offsets_nonnegative(cal: &Calibration, suite: &Suite) -> Result<CheckResult> {
    let mut evaluations = 0usize;
    let mut violations = 0usize;
    let mut min_delta = f64::INFINITY;
    for (i, (_, a)) in suite.addrs.iter().enumerate() {
        for off in SAMPLE_OFFSETS {
            let t = suite.t_s[i] + off;
            for k in 0..=40 {
                let hp: HairPoint = hair::hair_point(cal, a, k, t)?;
                evaluations += 1;
                violations += hp.deltas.iter().filter(|&&d| d < 0.0).count();
                min_delta = min_delta.min(hp.min_delta());
            }
        }
    }
    Ok(check(
        "offsets_nonnegative",
        violations == 0,
        json!({ "evaluations": evaluations, "violations": violations, "min_delta": min_delta }),
    ))
}

fn rate_check(cal: &Calibration, suite: &Suite, tangent: bool) -> Result<CheckResult> {
    let bound = cal.alpha.ln() + 0.1;
    let mut rows = Vec::new();
    let mut ok = true;
    for (i, (name, a)) in suite.addrs.iter().enumerate() {
        for off in [0.25, 1.0] {
            let t = suite.t_s[i] + off;
            let rep = hair::convergence_report(cal, a, t, 5, 40)?;
            let fit = if tangent { &rep.c1_fit } else { &rep.c0_fit };
            ok &= fit.within(bound);
            rows.push(json!({ "address": name, "t": t, "fit": fit }));
        }
    }
    let name = if tangent { "c1_rate" } else { "c0_rate" };
    Ok(check(name, ok, json!({ "bound": bound, "fits": rows })))
}

fn tangent_fd(suite: &Suite) -> CheckResult {
    let mut worst = 0.0f64;
    let mut missing = 0;
    let mut nonconv = 0;
    for s in suite.samples.iter().flatten() {
        match s.fd_err {
            Some(e) => worst = worst.max(e),
            None => missing += 1,
        }
        nonconv += usize::from(!s.converged);
    }
    check(
        "tangent_fd",
        worst <= 1e-5 && missing == 0 && nonconv == 0,
        json!({ "max_fd_err": worst, "missing": missing, "nonconverged": nonconv }),
    )
}

/// Steps of the forward orbit of `x` with height at most the overflow
/// threshold, and how many of those lie in the tract of the address entry.
pub fn address_agreement(cal: &Calibration, addr: &ExternalAddress, x: &[f64]) -> (usize, usize, OrbitStatus) {
    let (res, steps) = dynamics::trace_orbit(cal, x, dynamics::DEFAULT_BUDGET);
    let d = cal.dimension();
    let mut trackable = 0;
    let mut matched = 0;
    for st in &steps {
        if !(st.point[d - 1] <= OVERFLOW_THRESHOLD) {
            break;
        }
        trackable += 1;
        if let (Some(r), Some(want)) = (&st.tract, addr.entry(st.step).exact()) {
            matched += usize::from(r == want);
        }
    }
    (trackable, matched, res.status)
}

fn address_law(cal: &Calibration, suite: &Suite) -> CheckResult {
    let mut trackable = 0;
    let mut matched = 0;
    let mut converged_orbits = 0;
    for (i, (_, a)) in suite.addrs.iter().enumerate() {
        for s in &suite.samples[i] {
            let (tr, m, status) = address_agreement(cal, a, s.point.as_slice());
            trackable += tr;
            matched += m;
            converged_orbits += usize::from(status == OrbitStatus::ConvergesToXi);
        }
    }
    check(
        "address_law",
        trackable > 0 && matched == trackable && converged_orbits == 0,
        json!({ "trackable_steps": trackable, "matched": matched, "orbits_falling_to_xi": converged_orbits }),
    )
}

fn t_s_recovery() -> Result<CheckResult> {
    let growth = ExternalAddress::growth(2, 1.0, 0, false)?.bounds(32)?;
    let mut periodic_ok = true;
    for cycle in [vec![vec![0, 0]], vec![vec![2, 0]], vec![vec![2, 0], vec![-4, 6], vec![1, 1]]] {
        let cyc = cycle.into_iter().map(LatticeIndex::new).collect();
        periodic_ok &= ExternalAddress::periodic(2, cyc)?.bounds(32)?.t_s == 0.0;
    }
    Ok(check(
        "t_s_recovery",
        (growth.t_s - 1.0).abs() <= 1e-6 && periodic_ok,
        json!({ "growth_t_s": growth.t_s, "periodic_zero": periodic_ok }),
    ))
}

/// Distinct parameters give distinct points, each at height at least `t`.
fn hair_injective(suite: &Suite) -> CheckResult {
    let mut ok = true;
    let mut min_gap = f64::INFINITY;
    for samples in &suite.samples {
        for w in samples.windows(2) {
            let gap = (&w[1].point - &w[0].point).norm();
            min_gap = min_gap.min(gap);
            ok &= gap > 0.0;
        }
        for s in samples {
            ok &= s.point[s.point.len() - 1] >= s.t;
        }
    }
    check("hair_injective", ok, json!({ "min_gap": min_gap }))
}

/// Heights along a fine grid. Near the base of a periodic hair they can dip
/// slightly, so this is reported rather than enforced.
fn height_monotonicity(cal: &Calibration, suite: &Suite) -> Result<CheckResult> {
    let mut rows = Vec::new();
    let mut all = true;
    for (i, (name, a)) in suite.addrs.iter().enumerate() {
        let ts: Vec<f64> = (0..=60).map(|j| suite.t_s[i] + 0.05 * j as f64).collect();
        let samples = hair::hair_curve(cal, a, &ts, CurveOptions::default())?;
        let d = cal.dimension();
        let drops: Vec<f64> = samples
            .windows(2)
            .filter(|w| w[1].point[d - 1] <= w[0].point[d - 1])
            .map(|w| w[0].t)
            .collect();
        all &= drops.is_empty();
        rows.push(json!({ "address": name, "non_rising_at": drops }));
    }
    Ok(check("height_monotone", all, Value::Array(rows)))
}

fn lemma_spot_checks(cal: &Calibration, consts: &SampledConstants) -> Result<CheckResult> {
    let zero = ExternalAddress::zero(cal.dimension() - 1);
    let mut reports = Vec::new();
    let mut ok = true;
    for (k, t) in [(2, 0.5), (3, 0.75)] {
        let rep = hair::lemma_check(cal, &zero, k, t, consts)?;
        ok &= rep.holds && rep.telescope.holds && rep.min_delta >= 0.0;
        reports.push(serde_json::to_value(&rep)?);
    }
    Ok(check("lemma_estimate", ok, Value::Array(reports)))
}

fn random_pairs(cal: &Calibration, seed: u64, stream: u64, count: usize) -> Vec<(Vector, Vector)> {
    let mut r = rng(seed, stream);
    (0..count)
        .map(|_| (sampling::sample_point(cal, &mut r), sampling::sample_point(cal, &mut r)))
        .collect()
}

fn path_estimate(cal: &Calibration, consts: &SampledConstants, seed: u64) -> Result<CheckResult> {
    let zero = LatticeIndex::zero(cal.dimension() - 1);
    let pairs = random_pairs(cal, seed, 6, 1000);
    let mut held = 0;
    let mut worst = 0.0f64;
    for (x, y) in &pairs {
        let lx = cal.lambda(&zero, x.as_slice())?.value;
        let ly = cal.lambda(&zero, y.as_slice())?.value;
        let bound = consts.c4 * std::f64::consts::PI * (x - y).norm() / x.norm().min(y.norm());
        let ratio = (lx - ly).norm() / bound;
        worst = worst.max(ratio);
        held += usize::from(ratio <= 1.05);
    }
    Ok(check(
        "path_estimate",
        held == pairs.len(),
        json!({ "pairs": pairs.len(), "held": held, "max_ratio": worst }),
    ))
}

fn dlambda_difference(cal: &Calibration, consts: &SampledConstants, seed: u64) -> Result<CheckResult> {
    let zero = LatticeIndex::zero(cal.dimension() - 1);
    let beta = cal.props.holder_exponent;
    let pairs = random_pairs(cal, seed, 7, 1000);
    let mut held = 0;
    let mut worst = 0.0f64;
    for (x, y) in &pairs {
        let diff = linalg::op_norm(&(cal.dlambda(&zero, x.as_slice())? - cal.dlambda(&zero, y.as_slice())?));
        let dist = (x - y).norm();
        let bound = consts.c_hat * dist.max(dist.powf(beta)) / (x.norm().powf(beta) * y.norm());
        let ratio = diff / bound;
        worst = worst.max(ratio);
        held += usize::from(ratio <= 1.0);
    }
    Ok(check(
        "dlambda_difference",
        held == pairs.len(),
        json!({ "pairs": pairs.len(), "held": held, "max_ratio": worst }),
    ))
}

fn omega_fraction(cal: &Calibration, seed: u64) -> Result<CheckResult> {
    let mut r = rng(seed, 8);
    let n = cal.dimension() - 1;
    let mut jobs = Vec::new();
    for _ in 0..1000 {
        let cycle = (0..r.random_range(1..=3)).map(|_| random_s(&mut r, n, 3)).collect();
        jobs.push((ExternalAddress::periodic(n, cycle)?, r.random_range(0.1..2.0)));
    }
    let counts = jobs
        .par_iter()
        .map(|(a, t)| -> Result<(usize, usize)> {
            let hp = hair::hair_sample(cal, a, *t, CurveOptions::default())?;
            let (_, steps) = dynamics::trace_orbit(cal, hp.point.as_slice(), dynamics::DEFAULT_BUDGET);
            let d = cal.dimension();
            let late: Vec<_> = steps
                .iter()
                .filter(|s| s.step > 5 && s.point[d - 1] <= OVERFLOW_THRESHOLD)
                .collect();
            Ok((late.len(), late.iter().filter(|s| s.omega).count()))
        })
        .collect::<Result<Vec<_>>>()?;
    let total: usize = counts.iter().map(|c| c.0).sum();
    let inside: usize = counts.iter().map(|c| c.1).sum();
    Ok(check(
        "omega_fraction",
        true,
        json!({
            "orbits": jobs.len(),
            "late_steps": total,
            "inside": inside,
            "fraction": if total > 0 { inside as f64 / total as f64 } else { 0.0 },
        }),
    ))
}

fn tie_report(suite: &Suite) -> CheckResult {
    let flagged = suite.samples.iter().flatten().filter(|s| s.tie).count();
    check("tie_flags", true, json!({ "flagged_samples": flagged }))
}
