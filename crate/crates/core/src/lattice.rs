//! Reflection tiling of `R^{d-1}` by the squares `P(r) = 2r + Q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Beyond this magnitude a coordinate no longer resolves the square it
/// sits in (`2r` and `x` agree to the last bit).
pub const EXACT_FOLD_LIMIT: f64 = 4_503_599_627_370_496.0; // 2^52

/// Integer index `r` of the square `P(r)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeIndex(Vec<i64>);

impl LatticeIndex {
    pub fn new(r: Vec<i64>) -> Self {
        LatticeIndex(r)
    }

    pub fn zero(len: usize) -> Self {
        LatticeIndex(vec![0; len])
    }

    /// Index in `S`, or `Error::NotInS`.
    pub fn in_s(r: Vec<i64>) -> Result<Self> {
        let idx = LatticeIndex(r);
        if !idx.even_sum() {
            return Err(Error::NotInS(idx.0));
        }
        Ok(idx)
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn even_sum(&self) -> bool {
        self.0.iter().fold(0i64, |acc, r| acc ^ (r & 1)) == 0
    }

    /// Moves `r_1` one step toward zero when the sum is odd.
    pub fn project_to_s(&self) -> LatticeIndex {
        let mut r = self.0.clone();
        if !self.even_sum() {
            if r[0] > 0 {
                r[0] -= 1;
            } else {
                r[0] += 1;
            }
        }
        LatticeIndex(r)
    }

    /// Diagonal of `D_r = diag((-1)^{r_j})`.
    pub fn reflections(&self) -> Vec<f64> {
        self.0
            .iter()
            .map(|r| if r & 1 == 0 { 1.0 } else { -1.0 })
            .collect()
    }

    /// The centre `2r` of `P(r)`.
    pub fn center(&self) -> Vector {
        Vector::from_iterator(self.0.len(), self.0.iter().map(|&r| 2.0 * r as f64))
    }

    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|&r| (r as f64) * (r as f64))
            .sum::<f64>()
            .sqrt()
    }
}

impl std::fmt::Display for LatticeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|r| r.to_string()).collect();
        write!(f, "{}", parts.join(";"))
    }
}

#[derive(Clone, Debug)]
pub struct FoldResult {
    pub r: LatticeIndex,
    /// Folded point; each coordinate lies in `[-1, 1]`.
    pub q: Vector,
    /// `(-1)^{sum r_j}`.
    pub sign: f64,
}

/// Folds a spatial point into `Q`.
///
/// Integer indices saturate at `i64` range; for `|x_j| > 2^52` the index is
/// only as good as the input, but `q` and `sign` stay well defined.
pub fn fold(x: &[f64]) -> FoldResult {
    let n = x.len();
    let mut r = Vec::with_capacity(n);
    let mut q = Vector::zeros(n);
    let mut odd = false;
    for (j, &xj) in x.iter().enumerate() {
        let mut rf = ((xj + 1.0) * 0.5).floor();
        // (x+1)/2 can round across an integer for very large x
        let mut off = xj - 2.0 * rf;
        if off < -1.0 {
            rf -= 1.0;
            off = xj - 2.0 * rf;
        } else if off >= 1.0 {
            rf += 1.0;
            off = xj - 2.0 * rf;
        }
        let parity_odd = rf.rem_euclid(2.0) == 1.0;
        q[j] = if parity_odd { -off } else { off };
        odd ^= parity_odd;
        r.push(rf as i64);
    }
    FoldResult {
        r: LatticeIndex(r),
        q,
        sign: if odd { -1.0 } else { 1.0 },
    }
}

/// Membership of a full point `x` in the tract `T(r) = P(r) x (M, inf)`.
pub fn in_tract(x: &[f64], r: &LatticeIndex, m_upper: f64) -> Result<bool> {
    if !r.even_sum() {
        return Err(Error::NotInS(r.0.clone()));
    }
    let n = r.len();
    if x.len() != n + 1 {
        return Err(Error::Length {
            expected: n + 1,
            got: x.len(),
        });
    }
    let inside = x[..n]
        .iter()
        .zip(r.as_slice())
        .all(|(xj, &rj)| (xj - 2.0 * rj as f64).abs() < 1.0);
    Ok(inside && x[n] > m_upper)
}
