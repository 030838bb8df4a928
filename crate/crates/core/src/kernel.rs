//! Bi-Lipschitz parametrizations of the upper hemisphere by the square
//! `Q = [-1, 1]^{d-1}`.
//!
//! Two kernels are provided. [`KernelKind::LinfRadial`] works in every
//! dimension: the sup-norm of `x` sets the polar angle and `x / |x|_2` the
//! azimuth. Its Jacobian jumps across the hyperplanes where two coordinates
//! tie for the maximum modulus. [`KernelKind::SquircleRadial`] exists only for
//! `d = 3`; it first squeezes the square onto the unit disc with the
//! elliptical grid map and is smooth on the open square.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Tolerance for membership in `Q` and for the hemisphere constraint.
pub const SQUARE_TOL: f64 = 1e-12;
/// Relative tolerance on `|y|_2 = 1` accepted by [`KernelSpec::invert`].
pub const UNIT_TOL: f64 = 1e-9;
/// Multiplicative margin applied to sampled kernel estimates.
pub const ESTIMATE_MARGIN: f64 = 1.05;
pub const MIN_PROPS_GRID: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    LinfRadial,
    SquircleRadial,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::LinfRadial => "linf_radial",
            KernelKind::SquircleRadial => "squircle_radial",
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "linf_radial" | "linf" => Ok(KernelKind::LinfRadial),
            "squircle_radial" | "squircle" => Ok(KernelKind::SquircleRadial),
            other => Err(Error::Parse(format!("unknown kernel '{other}'"))),
        }
    }
}

/// A point of the closed square `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct SquarePoint(Vector);

impl SquarePoint {
    pub fn new(coords: Vector) -> Result<Self> {
        let t = linalg::max_abs(coords.as_slice());
        if !(t <= 1.0 + SQUARE_TOL) {
            return Err(Error::OutsideSquare(t));
        }
        Ok(SquarePoint(coords))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(Vector::from_column_slice(coords))
    }

    pub fn coords(&self) -> &Vector {
        &self.0
    }

    pub fn into_inner(self) -> Vector {
        self.0
    }
}

/// A unit vector with nonnegative last coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct SpherePoint(Vector);

impl SpherePoint {
    pub fn new(coords: Vector) -> Result<Self> {
        let n = coords.norm();
        if !((n - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::NotUnit(n));
        }
        let last = coords[coords.len() - 1];
        if last < -SQUARE_TOL {
            return Err(Error::BelowEquator(last));
        }
        Ok(SpherePoint(coords))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(Vector::from_column_slice(coords))
    }

    pub fn coords(&self) -> &Vector {
        &self.0
    }

    pub fn into_inner(self) -> Vector {
        self.0
    }
}

/// Jacobian `Dh` (a `d x (d-1)` matrix). `one_sided` is set when the point
/// lies where `Dh` is discontinuous and the value is a one-sided limit.
#[derive(Clone, Debug)]
pub struct KernelJacobian {
    pub matrix: Matrix,
    pub one_sided: bool,
}

/// Sampled regularity constants of a kernel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelProps {
    pub lipschitz: f64,
    pub holder_exponent: f64,
    pub holder_constant: f64,
    pub north_preimage: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub dimension: usize,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, dimension: usize) -> Result<Self> {
        if dimension < 3 {
            return Err(Error::Dimension(dimension));
        }
        if kind == KernelKind::SquircleRadial && dimension != 3 {
            return Err(Error::KernelDimension(dimension));
        }
        Ok(KernelSpec { kind, dimension })
    }

    pub fn linf(dimension: usize) -> Result<Self> {
        Self::new(KernelKind::LinfRadial, dimension)
    }

    pub fn squircle() -> Self {
        KernelSpec {
            kind: KernelKind::SquircleRadial,
            dimension: 3,
        }
    }

    /// Dimension of the square, `d - 1`.
    pub fn square_dim(&self) -> usize {
        self.dimension - 1
    }

    fn check_len(&self, len: usize, expected: usize) -> Result<()> {
        if len != expected {
            return Err(Error::Length { expected, got: len });
        }
        Ok(())
    }

    /// Evaluates `h(x)`.
    pub fn eval(&self, x: &SquarePoint) -> Result<SpherePoint> {
        self.check_len(x.0.len(), self.square_dim())?;
        Ok(SpherePoint(self.eval_raw(x.0.as_slice())))
    }

    /// `h` without validation; `x` must lie in `Q`.
    pub(crate) fn eval_raw(&self, x: &[f64]) -> Vector {
        match self.kind {
            KernelKind::LinfRadial => {
                let t = linalg::max_abs(x).min(1.0);
                polar_to_sphere(x, t)
            }
            KernelKind::SquircleRadial => {
                let p = squircle_forward(x[0], x[1]);
                let rho = (p[0] * p[0] + p[1] * p[1]).sqrt().min(1.0);
                polar_to_sphere(&p, rho)
            }
        }
    }

    /// Closed-form inverse `h^{-1}(y)`.
    pub fn invert(&self, y: &SpherePoint) -> Result<SquarePoint> {
        self.check_len(y.0.len(), self.dimension)?;
        Ok(SquarePoint(self.invert_raw(y.0.as_slice())))
    }

    pub(crate) fn invert_raw(&self, y: &[f64]) -> Vector {
        let n = y.len() - 1;
        let lateral = &y[..n];
        let lat_norm = linalg::euclid(lateral);
        if lat_norm == 0.0 {
            return Vector::zeros(n);
        }
        // atan2 keeps full relative accuracy near the pole, unlike acos.
        let radius = (lat_norm.atan2(y[n].max(0.0)) / FRAC_PI_2).min(1.0);
        match self.kind {
            KernelKind::LinfRadial => {
                let w_inf = linalg::max_abs(lateral) / lat_norm;
                Vector::from_iterator(n, lateral.iter().map(|c| radius * (c / lat_norm) / w_inf))
            }
            KernelKind::SquircleRadial => {
                let p1 = radius * lateral[0] / lat_norm;
                let p2 = radius * lateral[1] / lat_norm;
                let (x1, x2) = squircle_inverse(p1, p2);
                Vector::from_vec(vec![x1, x2])
            }
        }
    }

    /// Jacobian of `h`. At `x = 0` the limit along the coordinate axes is used.
    pub fn jacobian(&self, x: &SquarePoint) -> Result<KernelJacobian> {
        self.check_len(x.0.len(), self.square_dim())?;
        Ok(self.jacobian_raw(x.0.as_slice()))
    }

    pub(crate) fn jacobian_raw(&self, x: &[f64]) -> KernelJacobian {
        match self.kind {
            KernelKind::LinfRadial => linf_jacobian(x),
            KernelKind::SquircleRadial => squircle_jacobian(x[0], x[1]),
        }
    }

    /// Whether `Dh` is discontinuous (or degenerate) at `x`.
    pub fn is_singular(&self, x: &[f64]) -> bool {
        match self.kind {
            KernelKind::LinfRadial => linf_tie(x),
            KernelKind::SquircleRadial => x[0].abs() >= 1.0 && x[1].abs() >= 1.0,
        }
    }

    /// Samples `Dh` on a `grid_n^{d-1}` cell-centred grid with the default
    /// Hölder exponent 1.
    pub fn estimate_props(&self, grid_n: usize) -> Result<KernelProps> {
        self.estimate_props_holder(grid_n, 1.0)
    }

    pub fn estimate_props_holder(&self, grid_n: usize, beta: f64) -> Result<KernelProps> {
        if grid_n < MIN_PROPS_GRID {
            return Err(Error::GridTooCoarse {
                got: grid_n,
                min: MIN_PROPS_GRID,
            });
        }
        let n = self.square_dim();
        let total = grid_n.pow(n as u32);
        let step = 2.0 / grid_n as f64;

        let (lip, holder) = (0..total)
            .into_par_iter()
            .map(|flat| {
                let idx = unflatten(flat, grid_n, n);
                let x = cell_center(&idx, grid_n);
                if self.is_singular(&x) {
                    return (0.0, 0.0);
                }
                let jx = self.jacobian_raw(&x);
                let lip = linalg::op_norm(&jx.matrix);
                let mut holder = 0.0_f64;
                for axis in 0..n {
                    if idx[axis] + 1 >= grid_n {
                        continue;
                    }
                    let mut y = x.clone();
                    y[axis] += step;
                    if self.is_singular(&y) || !self.same_smooth_piece(&x, &y) {
                        continue;
                    }
                    let jy = self.jacobian_raw(&y);
                    let diff = linalg::op_norm(&(&jx.matrix - &jy.matrix));
                    holder = holder.max(diff / step.powf(beta));
                }
                (lip, holder)
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));

        let north = {
            let mut pole = vec![0.0; self.dimension];
            pole[self.dimension - 1] = 1.0;
            self.invert_raw(&pole)
        };
        Ok(KernelProps {
            lipschitz: lip * ESTIMATE_MARGIN,
            holder_exponent: beta,
            holder_constant: holder * ESTIMATE_MARGIN,
            north_preimage: north.as_slice().to_vec(),
        })
    }

    /// Two points share a smooth piece of `h` (same active face for the
    /// sup-norm kernel).
    pub(crate) fn same_smooth_piece(&self, x: &[f64], y: &[f64]) -> bool {
        match self.kind {
            KernelKind::LinfRadial => active_face(x) == active_face(y),
            KernelKind::SquircleRadial => true,
        }
    }
}

/// Maps `x` (direction) and a radius `t in [0,1]` to the hemisphere.
fn polar_to_sphere(x: &[f64], t: f64) -> Vector {
    let n = x.len();
    let nrm = linalg::euclid(x);
    let mut out = Vector::zeros(n + 1);
    if nrm == 0.0 {
        out[n] = 1.0;
        return out;
    }
    let (s, c) = (FRAC_PI_2 * t).sin_cos();
    for (o, xi) in out.iter_mut().zip(x) {
        *o = s * xi / nrm;
    }
    out[n] = c;
    out
}

fn squircle_forward(x1: f64, x2: f64) -> [f64; 2] {
    [
        x1 * (1.0 - 0.5 * x2 * x2).sqrt(),
        x2 * (1.0 - 0.5 * x1 * x1).sqrt(),
    ]
}

/// Closed-form inverse of the elliptical grid map, written as
/// `2 sqrt2 u / (sqrt A + sqrt B)` with factored radicands to avoid
/// cancellation.
fn squircle_inverse(p1: f64, p2: f64) -> (f64, f64) {
    fn one(u: f64, v: f64) -> f64 {
        let (au, av) = (u.abs(), v.abs());
        let a = (SQRT_2 + au - av) * (SQRT_2 + au + av);
        let b = ((SQRT_2 - au - av) * (SQRT_2 - au + av)).max(0.0);
        let denom = a.max(0.0).sqrt() + b.sqrt();
        if denom == 0.0 {
            return 0.0;
        }
        (2.0 * SQRT_2 * au / denom).min(1.0).copysign(u)
    }
    (one(p1, p2), one(p2, p1))
}

/// Index and sign of the coordinate attaining the sup-norm (first on ties).
fn active_face(x: &[f64]) -> (usize, bool) {
    let mut best = 0;
    for (i, xi) in x.iter().enumerate() {
        if xi.abs() > x[best].abs() {
            best = i;
        }
    }
    (best, x[best] >= 0.0)
}

fn linf_tie(x: &[f64]) -> bool {
    let t = linalg::max_abs(x);
    if t == 0.0 {
        return false;
    }
    x.iter().filter(|xi| xi.abs() == t).count() > 1
}

fn linf_jacobian(x: &[f64]) -> KernelJacobian {
    let n = x.len();
    let mut jac = Matrix::zeros(n + 1, n);
    let nrm = linalg::euclid(x);
    if nrm == 0.0 {
        for i in 0..n {
            jac[(i, i)] = FRAC_PI_2;
        }
        return KernelJacobian {
            matrix: jac,
            one_sided: false,
        };
    }
    let (star, positive) = active_face(x);
    let sgn = if positive { 1.0 } else { -1.0 };
    let t = x[star].abs();
    let (s, c) = (FRAC_PI_2 * t).sin_cos();
    for i in 0..n {
        let ui = x[i] / nrm;
        for j in 0..n {
            let uj = x[j] / nrm;
            let kron = if i == j { 1.0 } else { 0.0 };
            let mut v = s * (kron - ui * uj) / nrm;
            if j == star {
                v += FRAC_PI_2 * c * sgn * ui;
            }
            jac[(i, j)] = v;
        }
    }
    jac[(n, star)] = -FRAC_PI_2 * s * sgn;
    KernelJacobian {
        matrix: jac,
        one_sided: linf_tie(x),
    }
}

fn squircle_jacobian(x1: f64, x2: f64) -> KernelJacobian {
    let p = squircle_forward(x1, x2);
    let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();

    // Jacobian of the polar map g(p) = (sin(pi rho/2) p/rho, cos(pi rho/2)).
    let mut dg = Matrix::zeros(3, 2);
    if rho == 0.0 {
        dg[(0, 0)] = FRAC_PI_2;
        dg[(1, 1)] = FRAC_PI_2;
    } else {
        let (s, c) = (FRAC_PI_2 * rho).sin_cos();
        let ph = [p[0] / rho, p[1] / rho];
        for i in 0..2 {
            for j in 0..2 {
                let kron = if i == j { 1.0 } else { 0.0 };
                dg[(i, j)] = FRAC_PI_2 * c * ph[i] * ph[j] + s / rho * (kron - ph[i] * ph[j]);
            }
            dg[(2, i)] = -FRAC_PI_2 * s * ph[i];
        }
    }

    let r1 = (1.0 - 0.5 * x2 * x2).sqrt();
    let r2 = (1.0 - 0.5 * x1 * x1).sqrt();
    let mut jp = Matrix::zeros(2, 2);
    jp[(0, 0)] = r1;
    jp[(0, 1)] = -x1 * x2 / (2.0 * r1);
    jp[(1, 0)] = -x1 * x2 / (2.0 * r2);
    jp[(1, 1)] = r2;

    KernelJacobian {
        matrix: dg * jp,
        one_sided: x1.abs() >= 1.0 && x2.abs() >= 1.0,
    }
}

pub(crate) fn unflatten(mut flat: usize, base: usize, len: usize) -> Vec<usize> {
    let mut idx = vec![0; len];
    for slot in idx.iter_mut() {
        *slot = flat % base;
        flat /= base;
    }
    idx
}

pub(crate) fn cell_center(idx: &[usize], grid_n: usize) -> Vec<f64> {
    idx.iter()
        .map(|&i| -1.0 + (2 * i + 1) as f64 / grid_n as f64)
        .collect()
}
