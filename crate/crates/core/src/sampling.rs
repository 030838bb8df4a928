//! Empirical constants for the derivative estimates of the inverse branch.
//!
//! Points are drawn with heights log-uniform in `[M, 10^6]` and spatial
//! coordinates uniform in `+-4 (x_d + a)`. Pair partners are small relative
//! perturbations so that the Hölder-type quotients see short distances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::LatticeIndex;
use crate::linalg::{self, Vector};
use crate::map::Calibration;

pub const DEFAULT_SAMPLES: usize = 10_000;
pub const MAX_SAMPLE_HEIGHT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledConstants {
    /// `max |x| |D Lambda(x)|`.
    pub c4: f64,
    /// `max |DF(Lambda x) - DF(Lambda y)| / (min(|x|,|y|)^{1-beta} max(|x-y|, |x-y|^beta))`.
    pub c7: f64,
    /// `max |D Lambda(x) - D Lambda(y)| |x|^beta |y| / max(|x-y|, |x-y|^beta)`.
    pub c_hat: f64,
    pub seed: u64,
    pub samples: usize,
}

/// A point of the half-space above `M` drawn by the sampling protocol.
pub fn sample_point(cal: &Calibration, rng: &mut ChaCha8Rng) -> Vector {
    let d = cal.dimension();
    let lo = cal.m_upper.ln();
    let hi = MAX_SAMPLE_HEIGHT.ln();
    let h = (lo + rng.random::<f64>() * (hi - lo)).exp().max(cal.m_upper);
    let s = 4.0 * (h + cal.a);
    let mut x = Vector::zeros(d);
    for j in 0..d - 1 {
        x[j] = rng.random_range(-s..s);
    }
    x[d - 1] = h;
    x
}

/// Pairs `(x, y)` with `y` a relative perturbation of `x` of size `10^{-4}..10^{-1}`.
pub fn sample_pairs(cal: &Calibration, seed: u64, count: usize) -> Vec<(Vector, Vector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = cal.dimension();
    (0..count)
        .map(|_| {
            let x = sample_point(cal, &mut rng);
            let scale = x.norm() * 10f64.powf(rng.random_range(-4.0..-1.0));
            let mut y = x.clone();
            for j in 0..d {
                y[j] += scale * rng.random_range(-1.0..1.0);
            }
            y[d - 1] = y[d - 1].max(cal.m_upper);
            (x, y)
        })
        .collect()
}

pub fn sample_constants(cal: &Calibration, seed: u64, samples: usize) -> Result<SampledConstants> {
    let beta = cal.props.holder_exponent;
    let r = LatticeIndex::zero(cal.dimension() - 1);
    let pairs = sample_pairs(cal, seed, samples);
    let per_pair = pairs
        .par_iter()
        .map(|(x, y)| -> Result<(f64, f64, f64)> {
            let bx = cal.lambda(&r, x.as_slice())?;
            let by = cal.lambda(&r, y.as_slice())?;
            let dlx = cal.dlambda(&r, x.as_slice())?;
            let c4 = x.norm() * linalg::op_norm(&dlx);
            let (zx, zy) = (bx.zeta.as_slice(), by.zeta.as_slice());
            if cal.kernel.is_singular(zx)
                || cal.kernel.is_singular(zy)
                || !cal.kernel.same_smooth_piece(zx, zy)
            {
                return Ok((c4, 0.0, 0.0));
            }
            let dist = (x - y).norm();
            if dist == 0.0 {
                return Ok((c4, 0.0, 0.0));
            }
            let spread = dist.max(dist.powf(beta));
            let dfx = cal.jacobian(bx.value.as_slice())?.matrix;
            let dfy = cal.jacobian(by.value.as_slice())?.matrix;
            let min_norm = x.norm().min(y.norm());
            let c7 = linalg::op_norm(&(dfx - dfy)) / (min_norm.powf(1.0 - beta) * spread);
            let dly = cal.dlambda(&r, y.as_slice())?;
            let c_hat = linalg::op_norm(&(dlx - dly)) * x.norm().powf(beta) * y.norm() / spread;
            Ok((c4, c7, c_hat))
        })
        .collect::<Result<Vec<_>>>()?;
    let (c4, c7, c_hat) = per_pair
        .iter()
        .fold((0.0f64, 0.0f64, 0.0f64), |acc, v| (acc.0.max(v.0), acc.1.max(v.1), acc.2.max(v.2)));
    Ok(SampledConstants {
        c4,
        c7,
        c_hat,
        seed,
        samples,
    })
}
