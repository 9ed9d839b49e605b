//! Scalar kernels used by every sample-size formula: the standard normal
//! quantile, the Bennett rate function and a bracketed bisection solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A probability in the closed unit interval.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || !(0.0..=1.0).contains(&value) {
            return Err(Error::Domain(format!("probability {value} outside [0, 1]")));
        }
        Ok(Probability(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail `1 - Φ(z)`, accurate far into the tail.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

// Wichura (1988), algorithm AS241 PPND16.
#[allow(clippy::excessive_precision)]
const A: [f64; 8] = [
    3.387_132_872_796_366_608,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
#[allow(clippy::excessive_precision)]
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
#[allow(clippy::excessive_precision)]
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
#[allow(clippy::excessive_precision)]
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
#[allow(clippy::excessive_precision)]
const E: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
#[allow(clippy::excessive_precision)]
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

fn poly(coef: &[f64; 8], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// AS241 estimate of the lower-tail quantile, `p` in (0, 1).
fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Positive `z` with upper tail probability `tail`, `tail` in (0, 1/2].
fn upper_quantile(tail: f64) -> f64 {
    let z0 = -ppnd16(tail);
    let density = normal_pdf(z0);
    if density > 0.0 && density.is_finite() {
        let z1 = z0 + (normal_sf(z0) - tail) / density;
        if z1.is_finite() {
            return z1;
        }
    }
    z0
}

/// Inverse of the standard normal CDF.
///
/// AS241 rational approximation followed by one Newton step against an
/// erfc-based CDF. Both halves of the unit interval are evaluated through
/// the same upper-tail routine, so `q(1 - p) == -q(p)` whenever `1 - p` is
/// exact.
pub fn normal_quantile(p: Probability) -> Result<f64> {
    let p = p.value();
    if p <= 0.0 || p >= 1.0 {
        return Err(Error::Domain(format!("normal quantile needs p in (0, 1), got {p}")));
    }
    if p == 0.5 {
        Ok(0.0)
    } else if p < 0.5 {
        Ok(-upper_quantile(p))
    } else {
        Ok(upper_quantile(1.0 - p))
    }
}

/// Upper-tail quantile `z` with `1 - Φ(z) = tail`, for callers that hold the
/// tail mass directly (avoids forming `1 - tail` when `tail` is tiny).
pub fn normal_upper_quantile(tail: f64) -> Result<f64> {
    if !(tail > 0.0 && tail < 1.0) {
        return Err(Error::Domain(format!("upper tail must be in (0, 1), got {tail}")));
    }
    if tail <= 0.5 {
        Ok(upper_quantile(tail))
    } else {
        Ok(-upper_quantile(1.0 - tail))
    }
}

/// Bennett rate function `h(s) = (1 + s) ln(1 + s) - s` for `s >= 0`.
pub fn bennett_h(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("bennett_h needs s >= 0, got {s}")));
    }
    // ln_1p keeps h ~ s^2/2 accurate for small s
    Ok((1.0 + s) * s.ln_1p() - s)
}

pub const DEFAULT_BISECT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_BISECT_MAX_ITERATIONS: usize = 200;

/// Search interval and stopping rule for [`bisect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketedRoot {
    pub lo: f64,
    pub hi: f64,
    /// Absolute tolerance on the root location.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl BracketedRoot {
    pub fn new(lo: f64, hi: f64) -> Self {
        BracketedRoot {
            lo,
            hi,
            tolerance: DEFAULT_BISECT_TOLERANCE,
            max_iterations: DEFAULT_BISECT_MAX_ITERATIONS,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::Domain(format!(
                "bracket needs finite lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Domain(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Final bracket of a bisection run. `lo` keeps the sign of `f(bracket.lo)`
/// and `hi` the sign of `f(bracket.hi)`, so callers can pick whichever side
/// of the root is conservative for them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn midpoint(&self) -> f64 {
        self.lo + 0.5 * (self.hi - self.lo)
    }
}

/// Bisection that returns the shrunken bracket instead of a point.
pub fn bisect_bracket<F>(mut f: F, bracket: BracketedRoot) -> Result<Bracket>
where
    F: FnMut(f64) -> f64,
{
    bracket.validate()?;
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(Bracket { lo, hi: lo });
    }
    if f_hi == 0.0 {
        return Ok(Bracket { lo: hi, hi });
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    let lo_negative = f_lo < 0.0;
    for _ in 0..bracket.max_iterations {
        if 0.5 * (hi - lo) <= bracket.tolerance {
            return Ok(Bracket { lo, hi });
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            // bracket already at adjacent floats
            return Ok(Bracket { lo, hi });
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(Bracket { lo: mid, hi: mid });
        }
        if (f_mid < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if 0.5 * (hi - lo) <= bracket.tolerance {
        return Ok(Bracket { lo, hi });
    }
    Err(Error::Convergence {
        iterations: bracket.max_iterations,
        width: hi - lo,
    })
}

/// Root of a sign-changing function on `[bracket.lo, bracket.hi]`, to within
/// `bracket.tolerance`.
pub fn bisect<F>(f: F, bracket: BracketedRoot) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    bisect_bracket(f, bracket).map(|b| b.midpoint())
}
