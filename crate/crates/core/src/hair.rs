//! Hair approximants `g_k(t)` and their tangents, evaluated by descending
//! from level `k` to level 0 with heights written as `E^j(t) + delta_j`.
//!
//! Nothing of size `E^{j+1}(t)` is ever formed. The shift
//! `log(E^{j+1} + c) = E^j + log1p((c - 1) e^{-E^j})` keeps every offset
//! `delta_j` of order one, and the tangent is carried as
//! `w_j = H_j'(t) / (E^j)'(t)`, which obeys `w_j = e^{-delta_j} B^{-1} w_{j+1}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::address::{Entry, ExternalAddress};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::map::Calibration;
use crate::sampling::SampledConstants;
use crate::tower::{Level, TowerLadder};

/// Offsets more negative than this abort a descent.
pub const NEGATIVE_OFFSET_TOL: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_K_MAX: usize = 80;
/// Differences below `FLOOR_REL * max(1, |value|)` count as rounding noise.
pub const FLOOR_REL: f64 = 1e-14;
pub const MIN_REPORT_ROWS: usize = 6;

/// First `d - 1` coordinates of a descent point.
#[derive(Clone, Debug, PartialEq)]
pub enum Spatial {
    Exact(Vector),
    /// `sign * e^{log_norm} * e_axis` up to a bounded offset.
    Far {
        log_norm: f64,
        axis: usize,
        negative: bool,
    },
}

impl Spatial {
    fn log_norm(&self) -> f64 {
        match self {
            Spatial::Exact(u) => u.norm().ln(),
            Spatial::Far { log_norm, .. } => *log_norm,
        }
    }

    fn direction(&self, n: usize) -> Vector {
        match self {
            Spatial::Exact(u) => {
                let nrm = u.norm();
                if nrm == 0.0 {
                    Vector::zeros(n)
                } else {
                    u / nrm
                }
            }
            Spatial::Far { axis, negative, .. } => {
                let mut e = Vector::zeros(n);
                e[*axis] = if *negative { -1.0 } else { 1.0 };
                e
            }
        }
    }
}

/// Point at level `j`: height `E^j(t) + delta`, scaled tangent `w_hat`.
#[derive(Clone, Debug)]
pub struct DescentState {
    pub level: usize,
    pub spatial: Spatial,
    pub delta: f64,
    pub w_hat: Vector,
    /// Whether the folded point sits on the kernel's singular set.
    pub tie: bool,
}

/// `g_k(t)` and `g_k'(t)`.
#[derive(Clone, Debug)]
pub struct HairPoint {
    pub t: f64,
    pub depth: usize,
    pub point: Vector,
    pub tangent: Vector,
    /// `delta_j` for `j = 0..=k`.
    pub deltas: Vec<f64>,
    pub tie: bool,
}

impl HairPoint {
    pub fn min_delta(&self) -> f64 {
        self.deltas.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug)]
pub struct HairSample {
    pub t: f64,
    pub point: Vector,
    pub tangent: Vector,
    pub k: usize,
    pub c0_err: f64,
    pub c1_err: f64,
    pub converged: bool,
    pub tie: bool,
    pub endpoint: bool,
    /// `|tangent - central difference|` of `g_k` at the reported depth.
    pub fd_err: Option<f64>,
    pub min_delta: f64,
}

impl HairSample {
    pub fn flags(&self) -> Vec<&'static str> {
        let mut f = Vec::new();
        if !self.converged {
            f.push("nonconv");
        }
        if self.tie {
            f.push("tie");
        }
        if self.endpoint {
            f.push("endpoint");
        }
        f
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CurveOptions {
    pub tol: f64,
    pub k_max: usize,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions {
            tol: DEFAULT_TOL,
            k_max: DEFAULT_K_MAX,
        }
    }
}

fn reflections(entry: &Entry, n: usize) -> Vec<f64> {
    match entry {
        Entry::Exact(r) => r.reflections(),
        Entry::Far { .. } => vec![1.0; n],
    }
}

/// Spatial part `2 s + D_s zeta` of a point over the square of `entry`.
fn place(entry: &Entry, zeta: &Vector) -> Spatial {
    match entry {
        Entry::Exact(r) => {
            let refl = r.reflections();
            let mut x = r.center();
            for j in 0..x.len() {
                x[j] += refl[j] * zeta[j];
            }
            Spatial::Exact(x)
        }
        Entry::Far {
            log_norm,
            axis,
            negative,
        } => Spatial::Far {
            log_norm: std::f64::consts::LN_2 + log_norm,
            axis: *axis,
            negative: *negative,
        },
    }
}

/// `phi_k(t) = Lambda^{s_k}(0, ..., 0, E^{k+1}(t) + M)` as a descent state.
pub fn phi_eval(cal: &Calibration, addr: &ExternalAddress, k: usize, ladder: &TowerLadder) -> Result<DescentState> {
    let d = cal.dimension();
    let delta = ladder.log_shift(k, cal.m_upper + cal.a)?;
    let mut w_hat = Vector::zeros(d);
    w_hat[d - 1] = (-delta).exp();
    let v = cal.v();
    Ok(DescentState {
        level: k,
        spatial: place(&addr.entry(k), &v),
        delta,
        w_hat,
        tie: cal.kernel.is_singular(v.as_slice()),
    })
}

/// Applies `L_j = Lambda^{s_j}` to a state at level `j + 1`.
pub fn descend_step(
    cal: &Calibration,
    addr: &ExternalAddress,
    state: &DescentState,
    ladder: &TowerLadder,
) -> Result<DescentState> {
    if state.level == 0 {
        return Err(Error::LadderCap { level: 0, cap: 0 });
    }
    let j = state.level - 1;
    let n = cal.dimension() - 1;
    let shift = ((state.delta + cal.a - 1.0) * ladder.eps(j)?).ln_1p();

    // cosines of the new point's direction against the spatial axis of u and e_d
    let (delta, lateral, vertical) = match ladder.height(j)? {
        Level::Finite(e) => {
            let log_u = state.spatial.log_norm();
            if log_u == f64::INFINITY {
                return Err(Error::Unrepresentable(j));
            }
            // log rho = log|u| - log(E^{j+1} + delta' + a)
            let r = log_u - (e + shift);
            let delta = shift + linalg::half_log1p_exp2(r);
            let (lat, vert) = if r <= 0.0 {
                let rho = r.exp();
                let s = rho.hypot(1.0);
                (rho / s, 1.0 / s)
            } else {
                let inv = (-r).exp();
                let s = inv.hypot(1.0);
                (1.0 / s, inv / s)
            };
            (delta, lat, vert)
        }
        Level::Overflow => (shift, 0.0, 1.0),
    };
    if delta < -NEGATIVE_OFFSET_TOL {
        return Err(Error::NegativeOffset { level: j, delta });
    }

    let mut unit = Vector::zeros(n + 1);
    unit.rows_mut(0, n).copy_from(&(state.spatial.direction(n) * lateral));
    unit[n] = vertical;
    let zeta = cal.kernel.invert_raw(unit.as_slice());

    let entry = addr.entry(j);
    let (b, _) = crate::map::height_zero_block(&cal.kernel, zeta.as_slice(), &reflections(&entry, n), 1.0);
    let w = b.lu().solve(&state.w_hat).ok_or(Error::Singular)? * (-delta).exp();

    Ok(DescentState {
        level: j,
        spatial: place(&entry, &zeta),
        delta,
        w_hat: w,
        tie: cal.kernel.is_singular(zeta.as_slice()),
    })
}

/// `g_k(t)` and `g_k'(t)`.
pub fn hair_point(cal: &Calibration, addr: &ExternalAddress, k: usize, t: f64) -> Result<HairPoint> {
    let ladder = TowerLadder::new(t, k)?;
    let mut state = phi_eval(cal, addr, k, &ladder)?;
    let mut deltas = vec![0.0; k + 1];
    deltas[k] = state.delta;
    let mut tie = state.tie;
    while state.level > 0 {
        state = descend_step(cal, addr, &state, &ladder)?;
        deltas[state.level] = state.delta;
        tie |= state.tie;
    }
    let x = match state.spatial {
        Spatial::Exact(x) => x,
        Spatial::Far { .. } => return Err(Error::Unrepresentable(0)),
    };
    let n = x.len();
    let mut point = Vector::zeros(n + 1);
    point.rows_mut(0, n).copy_from(&x);
    point[n] = t + state.delta;
    Ok(HairPoint {
        t,
        depth: k,
        point,
        tangent: state.w_hat,
        deltas,
        tie,
    })
}

fn fd_error(cal: &Calibration, addr: &ExternalAddress, hp: &HairPoint) -> Option<f64> {
    let t = hp.t;
    let h = 1e-6 * t.abs().max(1.0);
    let plus = hair_point(cal, addr, hp.depth, t + h).ok()?;
    let fd = if t - h >= 0.0 {
        let minus = hair_point(cal, addr, hp.depth, t - h).ok()?;
        (plus.point - minus.point) / (2.0 * h)
    } else {
        (plus.point - &hp.point) / h
    };
    Some((&hp.tangent - fd).norm())
}

/// Raises the depth at `t` until both Cauchy increments drop below `tol`.
pub fn hair_sample(cal: &Calibration, addr: &ExternalAddress, t: f64, opts: CurveOptions) -> Result<HairSample> {
    let mut prev = hair_point(cal, addr, 0, t)?;
    let mut min_delta = prev.min_delta();
    let mut tie = prev.tie;
    let (mut c0, mut c1) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    for k in 1..=opts.k_max {
        let cur = hair_point(cal, addr, k, t)?;
        c0 = (&cur.point - &prev.point).norm();
        c1 = (&cur.tangent - &prev.tangent).norm();
        min_delta = min_delta.min(cur.min_delta());
        tie |= cur.tie;
        prev = cur;
        if c0 < opts.tol && c1 < opts.tol {
            converged = true;
            break;
        }
    }
    let fd_err = fd_error(cal, addr, &prev);
    Ok(HairSample {
        t,
        k: prev.depth,
        point: prev.point,
        tangent: prev.tangent,
        c0_err: c0,
        c1_err: c1,
        converged,
        tie,
        endpoint: false,
        fd_err,
        min_delta,
    })
}

/// Samples along `ts`; each parameter is processed independently.
pub fn hair_curve(cal: &Calibration, addr: &ExternalAddress, ts: &[f64], opts: CurveOptions) -> Result<Vec<HairSample>> {
    ts.par_iter()
        .map(|&t| hair_sample(cal, addr, t, opts))
        .collect()
}

/// Least-squares rate fit of `log c_k` against `k`.
#[derive(Clone, Debug, Serialize)]
pub struct RateFit {
    /// `None` when fewer than two rows lie above the rounding floor.
    pub slope: Option<f64>,
    pub usable_rows: usize,
    /// First depth whose difference fell to the rounding floor.
    pub stabilized_at: Option<usize>,
}

impl RateFit {
    /// Rows are used up to the first one at or below its floor.
    pub fn fit(ks: &[usize], values: &[f64], floors: &[f64]) -> RateFit {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut stabilized_at = None;
        for i in 0..ks.len() {
            if !(values[i] > floors[i]) {
                stabilized_at = Some(ks[i]);
                break;
            }
            xs.push(ks[i] as f64);
            ys.push(values[i].ln());
        }
        let slope = (xs.len() >= 2).then(|| {
            let nx = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / nx;
            let my = ys.iter().sum::<f64>() / nx;
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            sxy / sxx
        });
        RateFit {
            slope,
            usable_rows: xs.len(),
            stabilized_at,
        }
    }

    /// Slope at most `bound`, or fully stabilized inside the window.
    pub fn within(&self, bound: f64) -> bool {
        match self.slope {
            Some(s) => s <= bound,
            None => self.stabilized_at.is_some(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub k: usize,
    pub c0: f64,
    pub c1: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub t: f64,
    pub rows: Vec<ConvergenceRow>,
    pub c0_fit: RateFit,
    pub c1_fit: RateFit,
    pub log_alpha: f64,
    pub min_delta: f64,
}

/// Cauchy differences `|g_k - g_{k-1}|` and `|g_k' - g_{k-1}'|` for
/// `k in k_lo..=k_hi`.
pub fn convergence_report(
    cal: &Calibration,
    addr: &ExternalAddress,
    t: f64,
    k_lo: usize,
    k_hi: usize,
) -> Result<ConvergenceReport> {
    let k_lo = k_lo.max(1);
    let count = (k_hi + 1).saturating_sub(k_lo);
    if count < MIN_REPORT_ROWS {
        return Err(Error::TooFewRows(count));
    }
    let points = (k_lo - 1..=k_hi)
        .into_par_iter()
        .map(|k| hair_point(cal, addr, k, t))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(count);
    let (mut f0, mut f1) = (Vec::new(), Vec::new());
    for w in points.windows(2) {
        rows.push(ConvergenceRow {
            k: w[1].depth,
            c0: (&w[1].point - &w[0].point).norm(),
            c1: (&w[1].tangent - &w[0].tangent).norm(),
        });
        f0.push(FLOOR_REL * w[1].point.norm().max(1.0));
        f1.push(FLOOR_REL * w[1].tangent.norm().max(1.0));
    }
    let ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
    let c0: Vec<f64> = rows.iter().map(|r| r.c0).collect();
    let c1: Vec<f64> = rows.iter().map(|r| r.c1).collect();
    Ok(ConvergenceReport {
        t,
        c0_fit: RateFit::fit(&ks, &c0, &f0),
        c1_fit: RateFit::fit(&ks, &c1, &f1),
        rows,
        log_alpha: cal.alpha.ln(),
        min_delta: points.iter().map(HairPoint::min_delta).fold(f64::INFINITY, f64::min),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TelescopeCheck {
    pub diff_norm: f64,
    pub bound: f64,
    pub identity_residual: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    pub k: usize,
    pub t: f64,
    pub left: f64,
    pub right: f64,
    pub i1: f64,
    pub i2: f64,
    pub c8: f64,
    pub holds: bool,
    pub margin: f64,
    pub min_delta: f64,
    pub telescope: TelescopeCheck,
}

fn axis_point(d: usize, height: f64) -> Vector {
    let mut x = Vector::zeros(d);
    x[d - 1] = height;
    x
}

/// Chain of `D Lambda^{s_l}` along the naive descent from `top` at level `k`.
fn naive_chain(cal: &Calibration, addr: &ExternalAddress, k: usize, top: Vector) -> Result<Vec<Matrix>> {
    let mut x = top;
    let mut mats = vec![Matrix::zeros(0, 0); k];
    for l in (0..k).rev() {
        let r = addr
            .entry(l)
            .exact()
            .cloned()
            .ok_or(Error::Unrepresentable(l))?;
        mats[l] = cal.dlambda(&r, x.as_slice())?;
        x = cal.lambda(&r, x.as_slice())?.value;
    }
    Ok(mats)
}

/// Direct double-precision evaluation of the one-step derivative estimate
/// and of the telescoping bound for `A_k - B_k`.
pub fn lemma_check(
    cal: &Calibration,
    addr: &ExternalAddress,
    k: usize,
    t: f64,
    consts: &SampledConstants,
) -> Result<LemmaReport> {
    if k == 0 {
        return Err(Error::LadderCap { level: 0, cap: 0 });
    }
    let d = cal.dimension();
    let ladder = TowerLadder::new(t, k + 1)?;
    let e_k = ladder.height(k)?.finite().ok_or(Error::Overflow(f64::INFINITY))?;
    let e_k1 = ladder.height(k + 1)?.finite().ok_or(Error::Overflow(e_k))?;
    let de_k = ladder.derivative(k)?.ok_or(Error::Overflow(e_k))?;
    let de_k1 = ladder.derivative(k + 1)?.ok_or(Error::Overflow(e_k1))?;
    let s_k = addr.entry(k).exact().cloned().ok_or(Error::Unrepresentable(k))?;
    let s_km1 = addr
        .entry(k - 1)
        .exact()
        .cloned()
        .ok_or(Error::Unrepresentable(k - 1))?;

    let mut phi = Vector::zeros(d);
    let v = cal.v();
    let refl = s_k.reflections();
    for j in 0..d - 1 {
        phi[j] = 2.0 * s_k.as_slice()[j] as f64 + refl[j] * v[j];
    }
    let denom = e_k1 + cal.m_upper + cal.a;
    phi[d - 1] = denom.ln();
    let dphi = axis_point(d, de_k1 / denom);
    let z = axis_point(d, e_k + cal.m_upper);
    let dz = axis_point(d, de_k);

    let lhs_a = cal.dlambda(&s_km1, phi.as_slice())? * &dphi;
    let lhs_b = cal.dlambda(&s_km1, z.as_slice())? * &dz;
    let left = (lhs_a - lhs_b).norm();

    let beta = cal.props.holder_exponent;
    let c8 = consts.c4 * consts.c4 * consts.c7 * (d as f64 + (cal.m_upper + cal.a).ln() + cal.m_upper);
    let i1 = cal.a * consts.c4 / (e_k1 * e_k);
    let i2 = c8 * (2.0 * s_k.norm() + 1.0) / e_k.powf(1.0 + beta);
    let right = (i1 + i2) * de_k;

    let xs = naive_chain(cal, addr, k, phi)?;
    let ys = naive_chain(cal, addr, k, z)?;
    let telescope = telescope(&xs, &ys);

    let min_delta = hair_point(cal, addr, k, t)?.min_delta();
    Ok(LemmaReport {
        k,
        t,
        left,
        right,
        i1,
        i2,
        c8,
        holds: left <= right,
        margin: right - left,
        min_delta,
        telescope,
    })
}

/// Checks `|prod X - prod Y| <= sum_r prod_{l<r}|X_l| |X_r - Y_r| prod_{s>r}|Y_s|`
/// and the matrix identity behind it.
pub fn telescope(xs: &[Matrix], ys: &[Matrix]) -> TelescopeCheck {
    let n = xs[0].nrows();
    let prod = |ms: &[Matrix]| ms.iter().fold(Matrix::identity(n, n), |acc, m| acc * m);
    let a = prod(xs);
    let b = prod(ys);
    let diff = &a - &b;
    let mut sum = Matrix::zeros(n, n);
    let mut bound = 0.0;
    for r in 0..xs.len() {
        let left = prod(&xs[..r]);
        let right = prod(&ys[r + 1..]);
        let mid = &xs[r] - &ys[r];
        sum += &left * &mid * &right;
        let lnorm: f64 = xs[..r].iter().map(linalg::op_norm).product();
        let rnorm: f64 = ys[r + 1..].iter().map(linalg::op_norm).product();
        bound += lnorm * linalg::op_norm(&mid) * rnorm;
    }
    let diff_norm = linalg::op_norm(&diff);
    let scale = a.norm().max(b.norm()).max(f64::MIN_POSITIVE);
    TelescopeCheck {
        diff_norm,
        bound,
        identity_residual: (diff - sum).norm() / scale,
        holds: diff_norm <= bound * (1.0 + 1e-12) + 1e-15 * scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::lattice::LatticeIndex;
    use approx::assert_relative_eq;
    use std::sync::OnceLock;

    fn cal() -> &'static Calibration {
        static CAL: OnceLock<Calibration> = OnceLock::new();
        CAL.get_or_init(|| Calibration::calibrate(KernelSpec::linf(3).unwrap(), 0.5, 64).unwrap())
    }

    #[test]
    fn phi_reference_values() {
        let c = cal();
        let z = ExternalAddress::zero(2);
        let lad = TowerLadder::new(1.0, 2).unwrap();
        let s = phi_eval(c, &z, 0, &lad).unwrap();
        let direct = ((1.0f64).exp_m1() + c.m_upper + c.a).ln();
        assert_relative_eq!(1.0 + s.delta, direct, max_relative = 1e-15);
        assert_eq!(s.spatial, Spatial::Exact(Vector::zeros(2)));

        let lad0 = TowerLadder::new(0.0, 5).unwrap();
        let s = phi_eval(c, &z, 5, &lad0).unwrap();
        assert_relative_eq!(s.delta, (c.m_upper + c.a).ln(), max_relative = 1e-15);

        let deep = TowerLadder::new(2.0, 9).unwrap();
        let s = phi_eval(c, &z, 9, &deep).unwrap();
        assert_eq!(s.delta, 0.0);
        assert_eq!(s.w_hat.as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn deep_levels_sit_on_the_axis() {
        let c = cal();
        let addr = ExternalAddress::periodic(2, vec![LatticeIndex::new(vec![2, 0])]).unwrap();
        let lad = TowerLadder::new(2.0, 9).unwrap();
        let top = phi_eval(c, &addr, 9, &lad).unwrap();
        let s = descend_step(c, &addr, &top, &lad).unwrap();
        assert_eq!(s.delta, 0.0);
        assert_eq!(s.spatial, Spatial::Exact(Vector::from_vec(vec![4.0, 0.0])));
    }

    #[test]
    fn depth_zero_closed_form() {
        let c = cal();
        let z = ExternalAddress::zero(2);
        for t in [0.0, 0.3, 1.0, 2.5] {
            let hp = hair_point(c, &z, 0, t).unwrap();
            let e = t.exp_m1();
            assert_relative_eq!(hp.point[2], (e + c.m_upper + c.a).ln(), max_relative = 1e-14);
            assert_relative_eq!(hp.tangent[2], t.exp() / (e + c.m_upper + c.a), max_relative = 1e-14);
            assert_eq!(hp.tangent[0], 0.0);
        }
    }

    #[test]
    fn one_step_matches_lambda() {
        let c = cal();
        let addr = ExternalAddress::periodic(2, vec![LatticeIndex::new(vec![2, 0])]).unwrap();
        for t in [0.2, 0.7, 1.3] {
            let hp = hair_point(c, &addr, 1, t).unwrap();
            let e2 = t.exp_m1().exp_m1();
            let phi = [4.0, 0.0, (e2 + c.m_upper + c.a).ln()];
            let r = LatticeIndex::new(vec![2, 0]);
            let direct = c.lambda(&r, &phi).unwrap().value;
            assert!((hp.point.clone() - direct).norm() <= 1e-12 * hp.point.norm());
        }
    }

    #[test]
    fn rate_fit_rules() {
        let ks = [5, 6, 7, 8, 9, 10];
        let vals = [1e-3, 1e-4, 1e-5, 1e-6, 0.0, 0.0];
        let fl = [1e-14; 6];
        let f = RateFit::fit(&ks, &vals, &fl);
        assert_eq!(f.usable_rows, 4);
        assert_eq!(f.stabilized_at, Some(9));
        assert_relative_eq!(f.slope.unwrap(), -(10f64).ln(), max_relative = 1e-12);
        let g = RateFit::fit(&ks, &[0.0; 6], &fl);
        assert!(g.slope.is_none() && g.within(-100.0));
    }

    #[test]
    fn too_few_rows() {
        let c = cal();
        let z = ExternalAddress::zero(2);
        assert!(matches!(convergence_report(c, &z, 1.0, 5, 8), Err(Error::TooFewRows(4))));
    }

    #[test]
    fn telescope_identity_exact_for_random_chains() {
        let xs: Vec<Matrix> = (0..4).map(|i| Matrix::from_fn(3, 3, |r, c| ((r + 2 * c + i) as f64).sin())).collect();
        let ys: Vec<Matrix> = (0..4).map(|i| Matrix::from_fn(3, 3, |r, c| ((2 * r + c + i) as f64).cos())).collect();
        let tc = telescope(&xs, &ys);
        assert!(tc.identity_residual < 1e-13);
        assert!(tc.holds);
    }
}
