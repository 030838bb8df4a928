//! Forward orbits of `f`, escape-time slices, and the parabolic domain.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{self, LatticeIndex, EXACT_FOLD_LIMIT};
use crate::linalg::{self, Vector};
use crate::map::Calibration;
use crate::tower::OVERFLOW_THRESHOLD;

pub const DEFAULT_BUDGET: usize = 64;
pub const MAX_RESOLUTION: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OrbitStatus {
    ConvergesToXi,
    StaysInTracts,
    HeightOverflow,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitResult {
    pub status: OrbitStatus,
    /// Applications of `f` performed.
    pub steps: usize,
    /// Tract indices visited while above `M`.
    pub address_prefix: Vec<LatticeIndex>,
    pub omega_hits: usize,
}

#[derive(Clone, Debug)]
pub struct OrbitStep {
    pub step: usize,
    pub point: Vector,
    pub tract: Option<LatticeIndex>,
    pub omega: bool,
}

/// Membership in `Omega = {x_d > M, |x~| < exp(2 sqrt(log x_d))}`.
pub fn omega_member(cal: &Calibration, x: &[f64]) -> bool {
    let d = x.len();
    let h = x[d - 1];
    if !(h > cal.m_upper && h >= 1.0) {
        return false;
    }
    linalg::euclid(&x[..d - 1]) < (2.0 * h.ln().sqrt()).exp()
}

/// The tract `T(r)`, `r` in `S`, containing `x`, if any.
pub fn tract_of(cal: &Calibration, x: &[f64]) -> Option<LatticeIndex> {
    let d = x.len();
    if linalg::max_abs(&x[..d - 1]) > EXACT_FOLD_LIMIT {
        return None;
    }
    let r = lattice::fold(&x[..d - 1]).r;
    if !r.even_sum() {
        return None;
    }
    lattice::in_tract(x, &r, cal.m_upper).ok()?.then_some(r)
}

fn run_orbit(cal: &Calibration, x: &[f64], budget: usize, mut trace: Option<&mut Vec<OrbitStep>>) -> OrbitResult {
    let d = cal.dimension();
    let mut cur = Vector::from_column_slice(x);
    let mut prefix = Vec::new();
    let mut omega_hits = 0;
    let mut step = 0;
    let status = loop {
        let h = cur[d - 1];
        let tract = if h > cal.m_upper { tract_of(cal, cur.as_slice()) } else { None };
        let omega = omega_member(cal, cur.as_slice());
        if let Some(t) = trace.as_deref_mut() {
            t.push(OrbitStep {
                step,
                point: cur.clone(),
                tract: tract.clone(),
                omega,
            });
        }
        if h <= cal.m_upper {
            break OrbitStatus::ConvergesToXi;
        }
        if !(h <= OVERFLOW_THRESHOLD) {
            break OrbitStatus::HeightOverflow;
        }
        if let Some(r) = tract {
            prefix.push(r);
        }
        if omega {
            omega_hits += 1;
        }
        if step == budget {
            break OrbitStatus::StaysInTracts;
        }
        cur = match cal.f(cur.as_slice()) {
            Ok(y) => y,
            Err(_) => break OrbitStatus::HeightOverflow,
        };
        step += 1;
    };
    OrbitResult {
        status,
        steps: step,
        address_prefix: prefix,
        omega_hits,
    }
}

/// Iterates `f` until the orbit drops to height `<= M`, exceeds the
/// overflow threshold, or the budget runs out.
pub fn classify_orbit(cal: &Calibration, x: &[f64], budget: usize) -> OrbitResult {
    run_orbit(cal, x, budget, None)
}

/// Like [`classify_orbit`], also returning every visited point.
pub fn trace_orbit(cal: &Calibration, x: &[f64], budget: usize) -> (OrbitResult, Vec<OrbitStep>) {
    let mut steps = Vec::new();
    let res = run_orbit(cal, x, budget, Some(&mut steps));
    (res, steps)
}

/// Affine plane spanned by one spatial axis and `e_d`.
#[derive(Clone, Debug)]
pub struct SlicePlane {
    pub axis: usize,
    /// Base point; its `axis` and last coordinates are overwritten per pixel.
    pub base: Vector,
    pub x_range: (f64, f64),
    pub h_range: (f64, f64),
}

impl SlicePlane {
    /// `(x_1, x_d)` plane through the origin over `[-4,4] x [m-1, M+3]`.
    pub fn standard(cal: &Calibration) -> Self {
        SlicePlane {
            axis: 0,
            base: Vector::zeros(cal.dimension()),
            x_range: (-4.0, 4.0),
            h_range: (cal.m - 1.0, cal.m_upper + 3.0),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.base.len() != d {
            return Err(Error::Plane(format!("base point has length {}, expected {d}", self.base.len())));
        }
        if self.axis >= d - 1 {
            return Err(Error::Plane(format!("axis {} is not spatial", self.axis)));
        }
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 < r.1;
        if !ok(self.x_range) || !ok(self.h_range) {
            return Err(Error::Plane("empty or non-finite window".into()));
        }
        Ok(())
    }

    /// Point at pixel `(col, row)`; row 0 is the top of the window.
    pub fn pixel_point(&self, col: usize, row: usize, width: usize, height: usize) -> Vector {
        let d = self.base.len();
        let fx = (col as f64 + 0.5) / width as f64;
        let fy = (row as f64 + 0.5) / height as f64;
        let mut p = self.base.clone();
        p[self.axis] = self.x_range.0 + fx * (self.x_range.1 - self.x_range.0);
        p[d - 1] = self.h_range.1 - fy * (self.h_range.1 - self.h_range.0);
        p
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

pub fn pixel_value(res: &OrbitResult) -> u8 {
    match res.status {
        OrbitStatus::ConvergesToXi => res.steps.min(254) as u8,
        _ => 255,
    }
}

/// Escape-time image: steps to reach height `<= M`, or 255 for orbits that
/// never do within the budget.
pub fn escape_slice(
    cal: &Calibration,
    plane: &SlicePlane,
    width: usize,
    height: usize,
    budget: usize,
) -> Result<GrayImage> {
    plane.validate(cal.dimension())?;
    if width == 0 || height == 0 || width > MAX_RESOLUTION || height > MAX_RESOLUTION {
        return Err(Error::Plane(format!(
            "resolution {width}x{height} outside 1..={MAX_RESOLUTION}"
        )));
    }
    let pixels = (0..width * height)
        .into_par_iter()
        .map(|i| {
            let p = plane.pixel_point(i % width, i / width, width, height);
            pixel_value(&classify_orbit(cal, p.as_slice(), budget))
        })
        .collect();
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn cal() -> &'static Calibration {
        static CAL: OnceLock<Calibration> = OnceLock::new();
        CAL.get_or_init(|| Calibration::calibrate(KernelSpec::linf(3).unwrap(), 0.5, 64).unwrap())
    }

    #[test]
    fn orbit_examples() {
        let c = cal();
        let r = classify_orbit(c, c.xi.as_slice(), 10);
        assert_eq!(r.status, OrbitStatus::ConvergesToXi);
        assert_eq!(r.steps, 0);
        for h in [c.m - 3.0, c.m, c.m_upper] {
            let r = classify_orbit(c, &[0.0, 0.0, h], 10);
            assert_eq!(r.status, OrbitStatus::ConvergesToXi);
            assert_eq!(r.steps, 0);
        }
        let r = classify_orbit(c, &[0.0, 0.0, 800.0], 10);
        assert_eq!(r.status, OrbitStatus::HeightOverflow);
    }

    #[test]
    fn omega_examples() {
        let c = cal();
        assert!(omega_member(c, &[0.0, 0.0, c.m_upper + 1.0]));
        assert!(!omega_member(c, &[0.0, 0.0, c.m_upper]));
        let h: f64 = 5.0;
        let psi2 = (2.0 * h.ln().sqrt()).exp();
        assert!(!omega_member(c, &[psi2, 0.0, h]));
        assert!(omega_member(c, &[psi2 * (1.0 - 1e-12), 0.0, h]));
    }

    #[test]
    fn converging_orbits_contract_toward_xi() {
        let c = cal();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let x = [
                rng.random_range(-8.0..8.0),
                rng.random_range(-8.0..8.0),
                rng.random_range(c.m - 5.0..c.m_upper + 4.0),
            ];
            let (res, tr) = trace_orbit(c, &x, 64);
            if res.status != OrbitStatus::ConvergesToXi {
                continue;
            }
            let mut p = tr.last().unwrap().point.clone();
            // first step out of H_{<=M} lands in H_{<=m}; from there f contracts
            p = c.f(p.as_slice()).unwrap();
            let mut dist = (&p - &c.xi).norm();
            for _ in 0..50 {
                p = c.f(p.as_slice()).unwrap();
                let next = (&p - &c.xi).norm();
                if dist > 1e-12 {
                    assert!(next <= c.alpha * dist * (1.0 + 1e-6) + 1e-15);
                }
                dist = next;
            }
        }
    }

    #[test]
    fn slice_shape_and_errors() {
        let c = cal();
        let plane = SlicePlane::standard(c);
        let img = escape_slice(c, &plane, 32, 16, 16).unwrap();
        assert_eq!(img.pixels.len(), 512);
        // bottom row lies below m and converges at once
        assert!(img.pixels[15 * 32..].iter().all(|&p| p == 0));
        let mut bad = plane.clone();
        bad.axis = 2;
        assert!(escape_slice(c, &bad, 8, 8, 4).is_err());
        assert!(escape_slice(c, &plane, 0, 8, 4).is_err());
        assert!(escape_slice(c, &plane, 9000, 8, 4).is_err());
    }
}
