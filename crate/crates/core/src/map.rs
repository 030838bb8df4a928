//! The Zorich map `F(x) = e^{x_d} h(x~)` extended by reflection, the shifted
//! map `f = F - a e_d`, and calibration of the constants `alpha, m, M, a`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{self, KernelProps, KernelSpec};
use crate::lattice::{self, LatticeIndex};
use crate::linalg::{Matrix, Vector};

/// Largest height accepted by [`Calibration::zorich`]; `e^709` is the last
/// finite power of e in double precision.
pub const MAX_EVAL_HEIGHT: f64 = 709.0;
pub const MIN_CALIBRATION_GRID: usize = 16;
pub const FIXED_POINT_TOL: f64 = 1e-13;
pub const FIXED_POINT_MAX_ITER: usize = 10_000;

/// Height-zero Jacobian block `B(q, r)`: columns `S_sigma Dh(q) D_r` followed
/// by `(h~(q), sigma h_d(q))`.
///
/// `DF(x) = e^{x_d} B(q, r)` wherever the fold of `x` is `(r, q, sigma)`.
pub fn height_zero_block(kernel: &KernelSpec, q: &[f64], reflections: &[f64], sign: f64) -> (Matrix, bool) {
    let d = kernel.dimension;
    let jac = kernel.jacobian_raw(q);
    let h = kernel.eval_raw(q);
    let mut b = Matrix::zeros(d, d);
    for j in 0..d - 1 {
        for i in 0..d {
            b[(i, j)] = jac.matrix[(i, j)] * reflections[j];
        }
        b[(d - 1, j)] *= sign;
    }
    for i in 0..d - 1 {
        b[(i, d - 1)] = h[i];
    }
    b[(d - 1, d - 1)] = sign * h[d - 1];
    (b, jac.one_sided)
}

/// `DF` at a point together with the one-sided flag of the kernel Jacobian.
#[derive(Clone, Debug)]
pub struct MapJacobian {
    pub matrix: Matrix,
    pub one_sided: bool,
}

/// Result of a fixed-point iteration of `f`.
#[derive(Clone, Debug)]
pub struct FixedPointRun {
    pub point: Vector,
    pub iterations: usize,
    /// `|x_{n+1} - x_n|` for every iteration.
    pub steps: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Calibration {
    pub kernel: KernelSpec,
    pub props: KernelProps,
    pub alpha: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub m: f64,
    /// The upper height threshold `M`.
    pub m_upper: f64,
    pub a: f64,
    pub grid_n: usize,
    pub xi: Vector,
}

impl Calibration {
    /// Grid calibration of the constants for `alpha_target`, followed by the
    /// fixed point `xi`.
    pub fn calibrate(kernel: KernelSpec, alpha: f64, grid_n: usize) -> Result<Self> {
        Self::calibrate_with(kernel, alpha, grid_n, None)
    }

    pub fn calibrate_with(
        kernel: KernelSpec,
        alpha: f64,
        grid_n: usize,
        a_override: Option<f64>,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Infeasible(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if grid_n < MIN_CALIBRATION_GRID {
            return Err(Error::GridTooCoarse {
                got: grid_n,
                min: MIN_CALIBRATION_GRID,
            });
        }
        let n = kernel.square_dim();
        let total = grid_n
            .checked_pow(n as u32)
            .ok_or_else(|| Error::Infeasible("calibration grid too large".into()))?;
        let ones = vec![1.0; n];
        let (hi, lo, used) = (0..total)
            .into_par_iter()
            .map(|flat| {
                let q = kernel::cell_center(&kernel::unflatten(flat, grid_n, n), grid_n);
                if kernel.is_singular(&q) {
                    return (0.0, f64::INFINITY, 0usize);
                }
                let (b, _) = height_zero_block(&kernel, &q, &ones, 1.0);
                let sv = b.singular_values();
                (sv.max(), sv.min(), 1)
            })
            .reduce(
                || (0.0, f64::INFINITY, 0),
                |x, y| (x.0.max(y.0), x.1.min(y.1), x.2 + y.2),
            );
        if used == 0 || !(lo > 0.0) {
            return Err(Error::Infeasible("degenerate kernel grid".into()));
        }
        let k_max = kernel::ESTIMATE_MARGIN * hi;
        let k_min = lo / kernel::ESTIMATE_MARGIN;
        let m = (alpha / k_max).ln();
        let m_upper = (1.0 / (alpha * k_min)).ln().max(1.0);
        if m >= m_upper {
            return Err(Error::Infeasible(format!("m = {m} is not below M = {m_upper}")));
        }
        let a_min = m_upper.exp() - m;
        let a = match a_override {
            Some(a) if a < a_min => {
                return Err(Error::Infeasible(format!(
                    "a = {a} is below e^M - m = {a_min}"
                )))
            }
            Some(a) => a,
            None => a_min,
        };
        let props = kernel.estimate_props(grid_n)?;
        let mut cal = Calibration {
            kernel,
            props,
            alpha,
            k_min,
            k_max,
            m,
            m_upper,
            a,
            grid_n,
            xi: Vector::zeros(kernel.dimension),
        };
        cal.xi = cal.fixed_point()?.point;
        Ok(cal)
    }

    pub fn dimension(&self) -> usize {
        self.kernel.dimension
    }

    /// North-pole preimage `v` as a vector.
    pub fn v(&self) -> Vector {
        Vector::from_column_slice(&self.props.north_preimage)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::Length {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        let h = x[x.len() - 1];
        if h > MAX_EVAL_HEIGHT || h.is_nan() {
            return Err(Error::Overflow(h));
        }
        Ok(())
    }

    /// `F(x)`.
    pub fn zorich(&self, x: &[f64]) -> Result<Vector> {
        self.check_point(x)?;
        let d = self.dimension();
        let fr = lattice::fold(&x[..d - 1]);
        let mut y = self.kernel.eval_raw(fr.q.as_slice());
        y[d - 1] *= fr.sign;
        Ok(y * x[d - 1].exp())
    }

    /// `f_a(x) = F(x) - a e_d`.
    pub fn f(&self, x: &[f64]) -> Result<Vector> {
        let mut y = self.zorich(x)?;
        let d = self.dimension();
        y[d - 1] -= self.a;
        Ok(y)
    }

    /// `DF(x)`, which equals `Df_a(x)`.
    pub fn jacobian(&self, x: &[f64]) -> Result<MapJacobian> {
        self.check_point(x)?;
        let d = self.dimension();
        let fr = lattice::fold(&x[..d - 1]);
        let (b, one_sided) =
            height_zero_block(&self.kernel, fr.q.as_slice(), &fr.r.reflections(), fr.sign);
        Ok(MapJacobian {
            matrix: b * x[d - 1].exp(),
            one_sided,
        })
    }

    /// `B(zeta, r)` for `r` in `S`.
    pub fn block(&self, zeta: &[f64], r: &LatticeIndex) -> (Matrix, bool) {
        height_zero_block(&self.kernel, zeta, &r.reflections(), 1.0)
    }

    /// Iterates `f` from `(0, ..., 0, m)`.
    pub fn fixed_point(&self) -> Result<FixedPointRun> {
        let mut start = Vector::zeros(self.dimension());
        start[self.dimension() - 1] = self.m;
        self.fixed_point_from(start.as_slice())
    }

    pub fn fixed_point_from(&self, start: &[f64]) -> Result<FixedPointRun> {
        let mut x = Vector::from_column_slice(start);
        let mut steps = Vec::new();
        for it in 1..=FIXED_POINT_MAX_ITER {
            let y = self.f(x.as_slice())?;
            let step = (&y - &x).norm();
            steps.push(step);
            x = y;
            if step < FIXED_POINT_TOL {
                return Ok(FixedPointRun {
                    point: x,
                    iterations: it,
                    steps,
                });
            }
        }
        Err(Error::NoConvergence(FIXED_POINT_MAX_ITER))
    }

    /// Checks the stored constants against their defining inequalities.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Ledger(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} outside (0,1)", self.alpha));
        }
        if !(self.k_min > 0.0 && self.k_max >= self.k_min) {
            return bad(format!("K_min = {}, K_max = {}", self.k_min, self.k_max));
        }
        if !(self.m < self.m_upper) {
            return bad(format!("m = {} is not below M = {}", self.m, self.m_upper));
        }
        if !(self.m_upper >= 1.0) {
            return bad(format!("M = {} is below 1", self.m_upper));
        }
        if !(self.a >= self.m_upper.exp() - self.m) {
            return bad(format!("a = {} is below e^M - m", self.a));
        }
        if !(self.m.exp() * self.k_max <= self.alpha * (1.0 + 1e-9)) {
            return bad("e^m K_max exceeds alpha".into());
        }
        if !(self.m_upper.exp() * self.k_min >= (1.0 - 1e-9) / self.alpha) {
            return bad("e^M K_min is below 1/alpha".into());
        }
        if self.xi.len() != self.dimension() || !(self.xi[self.dimension() - 1] <= self.m) {
            return bad("fixed point is missing or above m".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn cal() -> &'static Calibration {
        static CAL: OnceLock<Calibration> = OnceLock::new();
        CAL.get_or_init(|| Calibration::calibrate(KernelSpec::linf(3).unwrap(), 0.5, 64).unwrap())
    }

    #[test]
    fn constants_satisfy_their_inequalities() {
        let c = cal();
        c.validate().unwrap();
        assert!(c.a >= 1.0 + c.m_upper - c.m);
        assert!(c.a > 1.0);
    }

    #[test]
    fn smaller_alpha_widens_the_gap() {
        let k = KernelSpec::linf(3).unwrap();
        let half = Calibration::calibrate(k, 0.5, 32).unwrap();
        let quarter = Calibration::calibrate(k, 0.25, 32).unwrap();
        assert!(quarter.m_upper >= half.m_upper);
        assert!(quarter.m <= half.m);
    }

    #[test]
    fn rejects_bad_parameters() {
        let k = KernelSpec::linf(3).unwrap();
        assert!(Calibration::calibrate(k, 1.5, 32).is_err());
        assert!(Calibration::calibrate(k, 0.5, 8).is_err());
        assert!(Calibration::calibrate_with(k, 0.5, 32, Some(1.0)).is_err());
    }

    #[test]
    fn zorich_reference_values() {
        let c = cal();
        let y = c.zorich(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(y.as_slice(), &[0.0, 0.0, 1.0]);
        let y = c.zorich(&[0.0, 0.0, 2.5]).unwrap();
        assert_relative_eq!(y[2], 2.5f64.exp(), max_relative = 1e-15);
        assert_eq!(y[0], 0.0);
        let y = c.f(&[0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(y[2], 1.0 - c.a, max_relative = 1e-15);
        assert!(matches!(c.zorich(&[0.0, 0.0, 710.0]), Err(Error::Overflow(_))));
    }

    #[test]
    fn axis_formula_read_backwards() {
        let c = cal();
        for t in [c.m_upper, 3.0, 1e4] {
            let y = c.f(&[0.0, 0.0, (t + c.a).ln()]).unwrap();
            assert_relative_eq!(y[2], t, max_relative = 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let c = cal();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut done = 0;
        while done < 300 {
            let x: Vec<f64> = vec![
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
                rng.random_range(-3.0..3.0),
            ];
            let fr = lattice::fold(&x[..2]);
            let (a, b) = (fr.q[0].abs(), fr.q[1].abs());
            if (a - b).abs() < 1e-4 || a > 0.999 || b > 0.999 {
                continue;
            }
            let jac = c.jacobian(&x).unwrap().matrix;
            let h = 1e-6;
            let mut fd = Matrix::zeros(3, 3);
            for j in 0..3 {
                let mut p = x.clone();
                let mut m = x.clone();
                p[j] += h;
                m[j] -= h;
                fd.set_column(j, &((c.zorich(&p).unwrap() - c.zorich(&m).unwrap()) / (2.0 * h)));
            }
            let err = (&jac - &fd).norm() / jac.norm();
            assert!(err < 1e-5, "x = {x:?}: {err}");
            // last column is F itself
            let col = jac.column(2).into_owned();
            assert_relative_eq!((col - c.zorich(&x).unwrap()).norm(), 0.0, epsilon = 1e-12 * jac.norm());
            done += 1;
        }
    }

    #[test]
    fn jacobian_scales_with_height() {
        let c = cal();
        let base = linalg::op_norm(&c.jacobian(&[0.0, 0.0, 0.0]).unwrap().matrix);
        for h in [-3.0, 1.0, 7.5] {
            let s = linalg::op_norm(&c.jacobian(&[0.0, 0.0, h]).unwrap().matrix);
            assert_relative_eq!(s, base * f64::exp(h), max_relative = 1e-13);
        }
    }

    #[test]
    fn fixed_point_properties() {
        let c = cal();
        let run = c.fixed_point().unwrap();
        let xi = &run.point;
        assert!((c.f(xi.as_slice()).unwrap() - xi).norm() <= 1e-12);
        assert!(xi[2] <= c.m);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let s = vec![
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(c.m - 10.0..c.m),
            ];
            let other = c.fixed_point_from(&s).unwrap();
            assert!((&other.point - xi).norm() <= 1e-9);
        }
    }

    #[test]
    fn norm_law_and_half_space_law() {
        let c = cal();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let x = [
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(-300.0..300.0),
            ];
            let y = c.zorich(&x).unwrap();
            assert_relative_eq!(y.norm(), x[2].exp(), max_relative = 1e-12);
            let fr = lattice::fold(&x[..2]);
            if fr.q[0].abs() < 1.0 && fr.q[1].abs() < 1.0 {
                assert_eq!(y[2] > 0.0, fr.r.even_sum());
            }
        }
    }

    #[test]
    fn reflection_continuity_across_faces() {
        let c = cal();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let face = 2.0 * rng.random_range(-5i32..5) as f64 + 1.0;
            let other = rng.random_range(-9.0..9.0);
            let h = rng.random_range(-2.0..3.0);
            let axis = rng.random_range(0..2usize);
            let mut p = [0.0, 0.0, h];
            let mut q = [0.0, 0.0, h];
            p[axis] = face - 5e-10;
            q[axis] = face + 5e-10;
            p[1 - axis] = other;
            q[1 - axis] = other;
            let d = (c.zorich(&p).unwrap() - c.zorich(&q).unwrap()).norm();
            assert!(d <= 1e-6, "{p:?}: {d}");
        }
    }

    #[test]
    fn contraction_below_m_and_mapping_into_lower_half() {
        let c = cal();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let x = [
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
                rng.random_range(c.m - 6.0..c.m),
            ];
            let mut y = x;
            for v in y.iter_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
            if y[2] > c.m {
                continue;
            }
            let lhs = (c.f(&x).unwrap() - c.f(&y).unwrap()).norm();
            let dist = linalg::euclid(&[x[0] - y[0], x[1] - y[1], x[2] - y[2]]);
            assert!(lhs <= c.alpha * dist * (1.0 + 1e-9));
        }
        for _ in 0..10_000 {
            let x = [
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-30.0..c.m_upper),
            ];
            assert!(c.f(&x).unwrap()[2] <= c.m + 1e-12);
        }
    }
}
