//! Globally adaptive Gauss–Kronrod (10/21 point) quadrature on the extended real line.
//!
//! Semi-infinite ranges are folded onto `(0, 1]` with `z = a + (1 - s) / s`; the 21 Kronrod
//! nodes are all interior, so neither the folded endpoint nor a user supplied break point is
//! ever evaluated. That property is relied upon for densities that are singular at the origin.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// An endpoint of an integration range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    NegInf,
    Finite(f64),
    PosInf,
}

impl Bound {
    /// Position on the extended real line, for ordering only.
    pub fn value(self) -> f64 {
        match self {
            Bound::NegInf => f64::NEG_INFINITY,
            Bound::Finite(v) => v,
            Bound::PosInf => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Bound::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Bound::Finite(v) => Some(v),
            _ => None,
        }
    }
}

impl From<f64> for Bound {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            Bound::PosInf
        } else if v == f64::NEG_INFINITY {
            Bound::NegInf
        } else {
            Bound::Finite(v)
        }
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Tolerances and work limit for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-10,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Tolerance {
            abs,
            ..Self::default()
        }
    }
}

/// Value and estimated absolute error of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    // z = origin + (1 - s) / s
    Upper(f64),
    // z = origin - (1 - s) / s
    Lower(f64),
}

impl Map {
    #[inline]
    fn apply<F: Fn(f64) -> f64>(self, f: &F, s: f64) -> f64 {
        match self {
            Map::Identity => f(s),
            Map::Upper(a) => {
                let v = f(a + (1.0 - s) / s);
                if v == 0.0 {
                    0.0
                } else {
                    v / (s * s)
                }
            }
            Map::Lower(b) => {
                let v = f(b - (1.0 - s) / s);
                if v == 0.0 {
                    0.0
                } else {
                    v / (s * s)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    map: Map,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, map: Map, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = map.apply(f, center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = map.apply(f, center - dx);
        let f2 = map.apply(f, center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment {
        a,
        b,
        map,
        value,
        error,
    }
}

fn pieces(lo: Bound, hi: Bound) -> Vec<(Map, f64, f64)> {
    match (lo, hi) {
        (Bound::Finite(a), Bound::Finite(b)) => vec![(Map::Identity, a, b)],
        (Bound::Finite(a), Bound::PosInf) => vec![(Map::Upper(a), 0.0, 1.0)],
        (Bound::NegInf, Bound::Finite(b)) => vec![(Map::Lower(b), 0.0, 1.0)],
        (Bound::NegInf, Bound::PosInf) => {
            vec![(Map::Lower(0.0), 0.0, 1.0), (Map::Upper(0.0), 0.0, 1.0)]
        }
        _ => Vec::new(),
    }
}

/// Integrates `f` over `(lo, hi)`; an empty or reversed range integrates to zero.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: Bound,
    hi: Bound,
    tol: Tolerance,
) -> Result<Estimate> {
    integrate_with_breaks(f, lo, hi, &[], tol)
}

/// Like [`integrate`] but the range is first split at every break point inside it.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    lo: Bound,
    hi: Bound,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    if lo.value() >= hi.value() {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&c| c.is_finite() && c > lo.value() && c < hi.value())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut ends = Vec::with_capacity(cuts.len() + 2);
    ends.push(lo);
    ends.extend(cuts.into_iter().map(Bound::Finite));
    ends.push(hi);

    let mut heap = BinaryHeap::new();
    for w in ends.windows(2) {
        for (map, a, b) in pieces(w[0], w[1]) {
            heap.push(kronrod21(&f, map, a, b));
        }
    }

    let mut intervals = heap.len();
    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        if !value.is_finite() || error.is_nan() {
            return Err(Error::Quadrature {
                value,
                error,
                intervals,
            });
        }
        if error <= tol.abs.max(tol.rel * value.abs()) {
            return Ok(Estimate { value, error });
        }
        if intervals >= tol.max_intervals {
            return Err(Error::Quadrature {
                value,
                error,
                intervals,
            });
        }
        let worst = heap.pop().expect("at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine precision; accept its contribution as is.
            return if error <= 1e3 * tol.abs.max(tol.rel * value.abs()) {
                Ok(Estimate { value, error })
            } else {
                Err(Error::Quadrature {
                    value,
                    error,
                    intervals,
                })
            };
        }
        heap.push(kronrod21(&f, worst.map, worst.a, mid));
        heap.push(kronrod21(&f, worst.map, mid, worst.b));
        intervals += 1;
    }
}
