//! Inverse branches `Lambda^r` of `f` from the half-space above `M` into the
//! tract `T(r)`.
//!
//! On a square `P(r)` with some odd `r_j`, the reflected kernel is applied
//! to `D_r (x~ - 2r)`, so the spatial part of the branch is `2r + D_r zeta`
//! rather than `2r + zeta`. For `r` with all coordinates even the two agree.

use crate::error::{Error, Result};
use crate::lattice::LatticeIndex;
use crate::linalg::{self, Matrix, Vector};
use crate::map::Calibration;

#[derive(Clone, Debug)]
pub struct BranchPoint {
    /// `Lambda^r(x)`, a point of `T(r)`.
    pub value: Vector,
    /// Point of `Q` with `h(zeta) = (x + a e_d) / |x + a e_d|`.
    pub zeta: Vector,
    /// `log |x + a e_d|`.
    pub height: f64,
}

impl Calibration {
    fn check_branch(&self, r: &LatticeIndex, x: &[f64]) -> Result<()> {
        let d = self.dimension();
        if x.len() != d {
            return Err(Error::Length { expected: d, got: x.len() });
        }
        if r.len() != d - 1 {
            return Err(Error::Length {
                expected: d - 1,
                got: r.len(),
            });
        }
        if !r.even_sum() {
            return Err(Error::NotInS(r.as_slice().to_vec()));
        }
        if !(x[d - 1] >= self.m_upper) {
            return Err(Error::BelowM {
                height: x[d - 1],
                m_upper: self.m_upper,
            });
        }
        Ok(())
    }

    /// `Lambda^r(x)` for `x_d >= M` and `r` in `S`.
    pub fn lambda(&self, r: &LatticeIndex, x: &[f64]) -> Result<BranchPoint> {
        self.check_branch(r, x)?;
        let d = self.dimension();
        let mut y = Vector::from_column_slice(x);
        y[d - 1] += self.a;
        // scaled so that heights near f64::MAX keep a finite norm
        let scale = linalg::max_abs(y.as_slice());
        let u = y / scale;
        let un = u.norm();
        let log_norm = scale.ln() + un.ln();
        let zeta = self.kernel.invert_raw((u / un).as_slice());
        let refl = r.reflections();
        let mut value = Vector::zeros(d);
        for j in 0..d - 1 {
            value[j] = 2.0 * r.as_slice()[j] as f64 + refl[j] * zeta[j];
        }
        value[d - 1] = log_norm;
        Ok(BranchPoint {
            value,
            zeta,
            height: log_norm,
        })
    }

    /// `D Lambda^r(x)`, the inverse of `DF` at the preimage.
    pub fn dlambda(&self, r: &LatticeIndex, x: &[f64]) -> Result<Matrix> {
        let bp = self.lambda(r, x)?;
        let (b, _) = self.block(bp.zeta.as_slice(), r);
        let inv = linalg::inverse(&b).ok_or(Error::Singular)?;
        Ok(inv * (-bp.height).exp())
    }

    /// `B(zeta, r)^{-1}`, so that `D Lambda^r = e^{-height} B^{-1}`.
    pub fn scaled_inverse_block(&self, zeta: &[f64], r: &LatticeIndex) -> Result<Matrix> {
        let (b, _) = self.block(zeta, r);
        linalg::inverse(&b).ok_or(Error::Singular)
    }
}
