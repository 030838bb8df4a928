//! External addresses: a finite prefix followed by a periodic or growth tail.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lattice::LatticeIndex;
use crate::tower::{self, Level, TowerLadder};

/// Magnitude above which a growth entry is kept in logarithmic form.
pub const EXACT_ENTRY_LIMIT: f64 = 4_503_599_627_370_496.0; // 2^52
pub const MIN_HORIZON: usize = 8;
const MAX_TAU: f64 = tower::OVERFLOW_THRESHOLD;

/// One entry `s_k` of an address.
///
/// `Far` stands for `sign * n * e_axis` with an even integer `n` too large
/// for exact double arithmetic; only `log n` is kept. All coordinates of a
/// far entry are even, so the square it names is not reflected.
#[derive(Clone, Debug, PartialEq)]
pub enum Entry {
    Exact(LatticeIndex),
    Far {
        log_norm: f64,
        axis: usize,
        negative: bool,
    },
}

impl Entry {
    /// `log(2 |s_k|)`.
    pub fn log_twice_norm(&self) -> f64 {
        match self {
            Entry::Exact(r) => (2.0 * r.norm()).ln(),
            Entry::Far { log_norm, .. } => std::f64::consts::LN_2 + log_norm,
        }
    }

    pub fn exact(&self) -> Option<&LatticeIndex> {
        match self {
            Entry::Exact(r) => Some(r),
            Entry::Far { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Tail {
    Periodic(Vec<LatticeIndex>),
    /// Entries `project_to_S(round(E^k(tau)/2) * dir)` with `dir = +-e_axis`.
    Growth { tau: f64, axis: usize, negative: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExternalAddress {
    /// Length of each entry, `d - 1`.
    pub len: usize,
    pub prefix: Vec<LatticeIndex>,
    pub tail: Tail,
}

#[derive(Clone, Debug)]
pub struct AddressBounds {
    /// `t_k` with `E^k(t_k) = 2|s_k|`, for `k = 0..=K`.
    pub t: Vec<f64>,
    /// Suffix maxima of `t_k`, including the analytic tail.
    pub tau: Vec<f64>,
    pub t_s: f64,
    pub admissible: bool,
}

fn check_entry(r: &LatticeIndex, len: usize) -> Result<()> {
    if r.len() != len {
        return Err(Error::Address(format!(
            "entry {r} has length {}, expected {len}",
            r.len()
        )));
    }
    if !r.even_sum() {
        return Err(Error::NotInS(r.as_slice().to_vec()));
    }
    Ok(())
}

impl ExternalAddress {
    pub fn new(len: usize, prefix: Vec<LatticeIndex>, tail: Tail) -> Result<Self> {
        if len == 0 {
            return Err(Error::Address("entries must be non-empty".into()));
        }
        for r in &prefix {
            check_entry(r, len)?;
        }
        match &tail {
            Tail::Periodic(cycle) => {
                if cycle.is_empty() {
                    return Err(Error::Address("periodic tail is empty".into()));
                }
                for r in cycle {
                    check_entry(r, len)?;
                }
            }
            Tail::Growth { tau, axis, .. } => {
                if !(*tau > 0.0 && *tau <= MAX_TAU) {
                    return Err(Error::Address(format!("tau must lie in (0, {MAX_TAU}], got {tau}")));
                }
                if *axis >= len {
                    return Err(Error::Address(format!("growth axis {axis} out of range")));
                }
            }
        }
        Ok(ExternalAddress { len, prefix, tail })
    }

    /// The constant address `s_k = 0`.
    pub fn zero(len: usize) -> Self {
        ExternalAddress {
            len,
            prefix: Vec::new(),
            tail: Tail::Periodic(vec![LatticeIndex::zero(len)]),
        }
    }

    pub fn periodic(len: usize, cycle: Vec<LatticeIndex>) -> Result<Self> {
        Self::new(len, Vec::new(), Tail::Periodic(cycle))
    }

    pub fn growth(len: usize, tau: f64, axis: usize, negative: bool) -> Result<Self> {
        Self::new(len, Vec::new(), Tail::Growth { tau, axis, negative })
    }

    /// `s_k`.
    pub fn entry(&self, k: usize) -> Entry {
        if k < self.prefix.len() {
            return Entry::Exact(self.prefix[k].clone());
        }
        let j = k - self.prefix.len();
        match &self.tail {
            Tail::Periodic(cycle) => Entry::Exact(cycle[j % cycle.len()].clone()),
            Tail::Growth { tau, axis, negative } => growth_entry(self.len, *tau, k, *axis, *negative),
        }
    }

    /// `t_k`, its suffix maxima up to horizon `K`, and `t_s`.
    pub fn bounds(&self, horizon: usize) -> Result<AddressBounds> {
        if horizon < MIN_HORIZON {
            return Err(Error::Horizon(horizon));
        }
        let tail_limit = match self.tail {
            Tail::Periodic(_) => 0.0,
            Tail::Growth { tau, .. } => tau,
        };
        let t: Vec<f64> = (0..=horizon)
            .map(|k| match self.entry(k) {
                Entry::Exact(r) => tower::log_iter(2.0 * r.norm(), k),
                Entry::Far { log_norm, .. } if log_norm.is_finite() => {
                    tower::log_iter_from_log(std::f64::consts::LN_2 + log_norm, k)
                }
                // beyond double range the growth rule gives t_k = tau exactly
                Entry::Far { .. } => tail_limit,
            })
            .collect();
        let mut tau = vec![0.0; horizon + 1];
        let mut running = tail_limit;
        for k in (0..=horizon).rev() {
            running = running.max(t[k]);
            tau[k] = running;
        }
        Ok(AddressBounds {
            admissible: t.iter().all(|v| v.is_finite()) && tail_limit.is_finite(),
            t,
            tau,
            t_s: tail_limit,
        })
    }

    pub fn to_json(&self) -> Value {
        let prefix: Vec<&[i64]> = self.prefix.iter().map(|r| r.as_slice()).collect();
        let tail = match &self.tail {
            Tail::Periodic(cycle) => {
                let c: Vec<&[i64]> = cycle.iter().map(|r| r.as_slice()).collect();
                json!({ "periodic": c })
            }
            Tail::Growth { tau, axis, negative } => {
                let mut dir = vec![0i64; self.len];
                dir[*axis] = if *negative { -1 } else { 1 };
                json!({ "growth": { "tau": tau, "dir": dir } })
            }
        };
        json!({ "prefix": prefix, "tail": tail })
    }

    /// Parses a descriptor; `len` is the entry length `d - 1`.
    pub fn from_json(value: &Value, len: usize) -> Result<Self> {
        let bad = |m: &str| Error::Address(m.to_string());
        let obj = value.as_object().ok_or_else(|| bad("descriptor must be an object"))?;
        let prefix = match obj.get("prefix") {
            None => Vec::new(),
            Some(p) => parse_list(p)?,
        };
        let tail = obj.get("tail").ok_or_else(|| bad("missing 'tail'"))?;
        let tail_obj = tail.as_object().ok_or_else(|| bad("'tail' must be an object"))?;
        let tail = if let Some(p) = tail_obj.get("periodic") {
            Tail::Periodic(parse_list(p)?)
        } else if let Some(g) = tail_obj.get("growth") {
            let tau = g
                .get("tau")
                .and_then(Value::as_f64)
                .ok_or_else(|| bad("growth needs numeric 'tau'"))?;
            let dir = g
                .get("dir")
                .map(parse_index)
                .transpose()?
                .ok_or_else(|| bad("growth needs 'dir'"))?;
            if dir.len() != len {
                return Err(bad("growth direction has the wrong length"));
            }
            let nonzero: Vec<usize> = (0..len).filter(|&i| dir.as_slice()[i] != 0).collect();
            if nonzero.len() != 1 || dir.as_slice()[nonzero[0]].abs() != 1 {
                return Err(bad("growth direction must be a signed unit vector"));
            }
            Tail::Growth {
                tau,
                axis: nonzero[0],
                negative: dir.as_slice()[nonzero[0]] < 0,
            }
        } else {
            return Err(bad("tail must be 'periodic' or 'growth'"));
        };
        Self::new(len, prefix, tail)
    }

    pub fn parse(text: &str, len: usize) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        Self::from_json(&v, len)
    }
}

fn parse_index(v: &Value) -> Result<LatticeIndex> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Address("lattice index must be an array".into()))?;
    let r = arr
        .iter()
        .map(|x| {
            x.as_i64()
                .ok_or_else(|| Error::Address(format!("non-integer coordinate {x}")))
        })
        .collect::<Result<Vec<i64>>>()?;
    Ok(LatticeIndex::new(r))
}

fn parse_list(v: &Value) -> Result<Vec<LatticeIndex>> {
    v.as_array()
        .ok_or_else(|| Error::Address("expected a list of lattice indices".into()))?
        .iter()
        .map(parse_index)
        .collect()
}

fn growth_entry(len: usize, tau: f64, k: usize, axis: usize, negative: bool) -> Entry {
    let ladder = TowerLadder::new(tau, k).expect("tau validated positive");
    let half = match ladder.heights[k] {
        Level::Finite(e) => e / 2.0,
        Level::Overflow => f64::INFINITY,
    };
    if half <= EXACT_ENTRY_LIMIT {
        let n = half.round() as i64;
        let mut r = vec![0i64; len];
        r[axis] = if negative { -n } else { n };
        return Entry::Exact(LatticeIndex::new(r).project_to_s());
    }
    // log(E^k/2) = E^{k-1} + log1p(-eps_{k-1}) - log 2
    let log_norm = match ladder.heights[k - 1] {
        Level::Finite(prev) => prev + (-ladder.eps[k - 1]).ln_1p() - std::f64::consts::LN_2,
        Level::Overflow => f64::INFINITY,
    };
    Entry::Far {
        log_norm,
        axis,
        negative,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn li(v: &[i64]) -> LatticeIndex {
        LatticeIndex::new(v.to_vec())
    }

    #[test]
    fn entries_from_tails() {
        let a = ExternalAddress::new(2, vec![li(&[0, 0])], Tail::Periodic(vec![li(&[2, 0])])).unwrap();
        assert_eq!(a.entry(0), Entry::Exact(li(&[0, 0])));
        assert_eq!(a.entry(3), Entry::Exact(li(&[2, 0])));

        let g = ExternalAddress::growth(2, 1.0, 0, false).unwrap();
        assert_eq!(g.entry(2), Entry::Exact(li(&[2, 0])));
        for k in 0..12 {
            if let Entry::Exact(r) = g.entry(k) {
                assert!(r.even_sum());
            }
        }
        assert!(matches!(g.entry(5), Entry::Far { .. }));
    }

    #[test]
    fn far_entries_keep_the_log_norm() {
        let g = ExternalAddress::growth(2, 1.0, 1, true).unwrap();
        let lad = TowerLadder::new(1.0, 4).unwrap();
        match g.entry(4) {
            Entry::Far { log_norm, axis, negative } => {
                let direct = (lad.heights[4].finite().unwrap() / 2.0).ln();
                assert_abs_diff_eq!(log_norm, direct, epsilon = 1e-12 * direct);
                assert_eq!(axis, 1);
                assert!(negative);
            }
            other => panic!("expected a far entry, got {other:?}"),
        }
    }

    #[test]
    fn bounds_for_standard_addresses() {
        let z = ExternalAddress::zero(2).bounds(32).unwrap();
        assert!(z.admissible);
        assert_eq!(z.t_s, 0.0);
        assert!(z.t.iter().all(|&v| v == 0.0));

        let g = ExternalAddress::growth(2, 1.0, 0, false).unwrap().bounds(32).unwrap();
        assert!(g.admissible);
        assert_abs_diff_eq!(g.t_s, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(g.tau[32], 1.0, epsilon = 1e-6);

        let p = ExternalAddress::periodic(2, vec![li(&[2, 0])]).unwrap().bounds(32).unwrap();
        assert!(p.admissible);
        assert_eq!(p.t_s, 0.0);
        for w in p.tau.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(matches!(ExternalAddress::zero(2).bounds(4), Err(Error::Horizon(4))));
    }

    #[test]
    fn descriptor_round_trip_and_errors() {
        let text = r#"{"prefix":[[0,0],[2,2]],"tail":{"growth":{"tau":0.5,"dir":[0,-1]}}}"#;
        let a = ExternalAddress::parse(text, 2).unwrap();
        assert_eq!(ExternalAddress::from_json(&a.to_json(), 2).unwrap(), a);

        let odd = r#"{"prefix":[],"tail":{"periodic":[[1,0]]}}"#;
        assert!(matches!(ExternalAddress::parse(odd, 2), Err(Error::NotInS(_))));
        let empty = r#"{"prefix":[],"tail":{"periodic":[]}}"#;
        assert!(ExternalAddress::parse(empty, 2).is_err());
        let diag = r#"{"prefix":[],"tail":{"growth":{"tau":1,"dir":[1,1]}}}"#;
        assert!(ExternalAddress::parse(diag, 2).is_err());
        let short = r#"{"prefix":[[0,0,0]],"tail":{"periodic":[[0,0]]}}"#;
        assert!(ExternalAddress::parse(short, 2).is_err());
    }
}
