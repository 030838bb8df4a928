//! The reference function `E(t) = e^t - 1` and overflow-aware towers of its
//! iterates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Levels are computed as `expm1` of the previous one only while that stays
/// below this threshold; above it the next level is marked as overflowed.
pub const OVERFLOW_THRESHOLD: f64 = 700.0;

/// `E(t) = expm1(t)` for `t >= 0`.
pub fn reference(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    Ok(t.exp_m1())
}

/// `L^k(y)` with `L = log1p`, the inverse of `E^k`.
pub fn log_iter(y: f64, k: usize) -> f64 {
    (0..k).fold(y, |acc, _| acc.ln_1p())
}

/// `L^k(e^l)`, used when only `log y` is available.
pub fn log_iter_from_log(l: f64, k: usize) -> f64 {
    if k == 0 {
        return l.exp();
    }
    if l == f64::INFINITY {
        return f64::INFINITY;
    }
    // log1p(e^l) = l + log1p(e^{-l}) for l > 0
    let first = if l > 0.0 { l + (-l).exp().ln_1p() } else { l.exp().ln_1p() };
    log_iter(first, k - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Level {
    Finite(f64),
    Overflow,
}

impl Level {
    pub fn finite(self) -> Option<f64> {
        match self {
            Level::Finite(v) => Some(v),
            Level::Overflow => None,
        }
    }
}

/// `E^0(t), ..., E^K(t)` with `eps_j = e^{-E^j(t)}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TowerLadder {
    pub t: f64,
    pub heights: Vec<Level>,
    pub eps: Vec<f64>,
}

impl TowerLadder {
    pub fn new(t: f64, cap: usize) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        let mut heights = Vec::with_capacity(cap + 1);
        let mut eps = Vec::with_capacity(cap + 1);
        let mut cur = Level::Finite(t);
        for _ in 0..=cap {
            heights.push(cur);
            eps.push(match cur {
                Level::Finite(h) => (-h).exp(),
                Level::Overflow => 0.0,
            });
            cur = match cur {
                Level::Finite(h) if h <= OVERFLOW_THRESHOLD => Level::Finite(h.exp_m1()),
                _ => Level::Overflow,
            };
        }
        Ok(TowerLadder { t, heights, eps })
    }

    pub fn cap(&self) -> usize {
        self.heights.len() - 1
    }

    fn check(&self, j: usize) -> Result<()> {
        if j > self.cap() {
            return Err(Error::LadderCap {
                level: j,
                cap: self.cap(),
            });
        }
        Ok(())
    }

    pub fn height(&self, j: usize) -> Result<Level> {
        self.check(j)?;
        Ok(self.heights[j])
    }

    pub fn eps(&self, j: usize) -> Result<f64> {
        self.check(j)?;
        Ok(self.eps[j])
    }

    /// `log(E^{j+1}(t) + b) - E^j(t) = log1p((b - 1) eps_j)`.
    pub fn log_shift(&self, j: usize, b: f64) -> Result<f64> {
        if !(b > 1.0) {
            return Err(Error::ShiftBase(b));
        }
        Ok(((b - 1.0) * self.eps(j)?).ln_1p())
    }

    /// `(E^j)'(t) = prod_{i<j} e^{E^i(t)}` when it is finite.
    pub fn derivative(&self, j: usize) -> Result<Option<f64>> {
        self.check(j)?;
        let mut log_sum = 0.0;
        for i in 0..j {
            match self.heights[i] {
                Level::Finite(h) => log_sum += h,
                Level::Overflow => return Ok(None),
            }
        }
        let v = log_sum.exp();
        Ok(v.is_finite().then_some(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        assert_eq!(reference(0.0).unwrap(), 0.0);
        assert_relative_eq!(reference(1.0).unwrap(), std::f64::consts::E - 1.0, max_relative = 1e-15);
        let lad = TowerLadder::new(1.0, 3).unwrap();
        // e^{e-1} - 1
        assert_relative_eq!(lad.heights[2].finite().unwrap(), 4.574_941_524_760_88, max_relative = 1e-12);
        assert!(matches!(reference(-1.0), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn log_shift_values() {
        let lad = TowerLadder::new(1.0, 4).unwrap();
        let d = lad.log_shift(0, 2.0).unwrap();
        assert_relative_eq!(d, (1.0 + (-1.0f64).exp()).ln(), max_relative = 1e-15);
        assert_relative_eq!(d, 0.313_261_687_518_222_8, max_relative = 1e-14);
        assert_relative_eq!(d, (lad.heights[1].finite().unwrap() + 2.0).ln() - 1.0, max_relative = 1e-14);
        assert!(matches!(lad.log_shift(0, 1.0), Err(Error::ShiftBase(_))));
        assert!(matches!(lad.log_shift(5, 2.0), Err(Error::LadderCap { .. })));

        let deep = TowerLadder::new(2.0, 8).unwrap();
        assert_eq!(deep.heights[5], Level::Overflow);
        assert_eq!(deep.eps[4], 0.0);
        assert_eq!(deep.log_shift(6, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn eps_inverts_next_level() {
        let lad = TowerLadder::new(1.2, 6).unwrap();
        for j in 0..lad.cap() {
            if let Level::Finite(next) = lad.heights[j + 1] {
                if next.is_finite() && lad.eps[j] > 0.0 {
                    assert_relative_eq!(lad.eps[j] * (next + 1.0), 1.0, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let t = 0.7;
        let lad = TowerLadder::new(t, 4).unwrap();
        let h = 1e-7;
        let up = TowerLadder::new(t + h, 4).unwrap();
        let dn = TowerLadder::new(t - h, 4).unwrap();
        for j in 0..=3 {
            let fd = (up.heights[j].finite().unwrap() - dn.heights[j].finite().unwrap()) / (2.0 * h);
            assert_relative_eq!(lad.derivative(j).unwrap().unwrap(), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn log_form_inverse() {
        let y: f64 = 123.456;
        assert_relative_eq!(log_iter_from_log(y.ln(), 3), log_iter(y, 3), max_relative = 1e-14);
        assert_relative_eq!(log_iter_from_log(-2.0, 2), log_iter((-2.0f64).exp(), 2), max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn tower_round_trip(t in 0.0f64..3.0, k in 0usize..=40) {
            let lad = TowerLadder::new(t, k).unwrap();
            if let Level::Finite(y) = lad.heights[k] {
                if y.is_finite() {
                    let back = log_iter(y, k);
                    prop_assert!((back - t).abs() <= 1e-10 * t.max(1e-300) || (back - t).abs() <= 1e-15);
                }
            }
        }

        #[test]
        fn shift_is_bracketed(t in 0.0f64..3.0, j in 0usize..10, b in 1.0001f64..50.0) {
            let lad = TowerLadder::new(t, 10).unwrap();
            let d = lad.log_shift(j, b).unwrap();
            prop_assert!(d >= 0.0 && d <= b.ln() * (1.0 + 1e-15));
            if lad.eps[j] > 0.0 {
                prop_assert!(d > 0.0);
            }
        }

        #[test]
        fn separation_grows(t1 in 0.01f64..2.9, gap in 0.01f64..0.1) {
            let t2 = (t1 + gap).min(3.0);
            let a = TowerLadder::new(t1, 12).unwrap();
            let b = TowerLadder::new(t2, 12).unwrap();
            let mut last = t2 - t1;
            for j in 1..=12 {
                match (a.heights[j], b.heights[j]) {
                    (Level::Finite(x), Level::Finite(y)) if y.is_finite() => {
                        prop_assert!(y - x >= last);
                        last = y - x;
                    }
                    _ => break,
                }
            }
        }
    }
}
