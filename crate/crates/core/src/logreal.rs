//! Nonnegative reals and exact counts that outgrow `f64`.

use std::fmt;
use std::ops::{Add, Mul};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Serialize, Serializer};

/// A nonnegative real stored as its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogReal {
    log_magnitude: f64,
    is_zero: bool,
}

impl LogReal {
    pub const ZERO: LogReal = LogReal {
        log_magnitude: f64::NEG_INFINITY,
        is_zero: true,
    };
    pub const ONE: LogReal = LogReal {
        log_magnitude: 0.0,
        is_zero: false,
    };

    pub fn from_ln(ln: f64) -> Self {
        if ln == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                log_magnitude: ln,
                is_zero: false,
            }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        assert!(x >= 0.0, "LogReal holds nonnegative values, got {x}");
        if x == 0.0 {
            Self::ZERO
        } else {
            Self::from_ln(x.ln())
        }
    }

    pub fn is_zero(&self) -> bool {
        self.is_zero
    }

    /// Natural log; `-∞` for zero.
    pub fn ln(&self) -> f64 {
        if self.is_zero {
            f64::NEG_INFINITY
        } else {
            self.log_magnitude
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero {
            0.0
        } else {
            self.log_magnitude.exp()
        }
    }

    pub fn powf(&self, e: f64) -> Self {
        if self.is_zero {
            if e == 0.0 {
                Self::ONE
            } else {
                Self::ZERO
            }
        } else {
            Self::from_ln(self.log_magnitude * e)
        }
    }

    /// `self / other`; panics on division by zero.
    pub fn div(&self, other: &LogReal) -> Self {
        assert!(!other.is_zero, "LogReal division by zero");
        if self.is_zero {
            Self::ZERO
        } else {
            Self::from_ln(self.log_magnitude - other.log_magnitude)
        }
    }

    /// Decimal-scientific rendering, e.g. `3.2500000000e-7` or `1.2e+4021`.
    pub fn to_scientific(&self) -> String {
        if self.is_zero {
            return "0".to_string();
        }
        let log10 = self.log_magnitude / std::f64::consts::LN_10;
        let exponent = log10.floor();
        let mut mantissa = 10f64.powf(log10 - exponent);
        let mut exponent = exponent as i64;
        if mantissa >= 9.999_999_999_5 {
            mantissa /= 10.0;
            exponent += 1;
        }
        format!("{mantissa:.10}e{exponent:+}")
    }
}

impl Add for LogReal {
    type Output = LogReal;

    fn add(self, rhs: LogReal) -> LogReal {
        if self.is_zero {
            return rhs;
        }
        if rhs.is_zero {
            return self;
        }
        let (hi, lo) = if self.log_magnitude >= rhs.log_magnitude {
            (self.log_magnitude, rhs.log_magnitude)
        } else {
            (rhs.log_magnitude, self.log_magnitude)
        };
        LogReal::from_ln(hi + (lo - hi).exp().ln_1p())
    }
}

impl Mul for LogReal {
    type Output = LogReal;

    fn mul(self, rhs: LogReal) -> LogReal {
        if self.is_zero || rhs.is_zero {
            LogReal::ZERO
        } else {
            LogReal::from_ln(self.log_magnitude + rhs.log_magnitude)
        }
    }
}

impl std::iter::Sum for LogReal {
    fn sum<I: Iterator<Item = LogReal>>(iter: I) -> LogReal {
        iter.fold(LogReal::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for LogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_scientific())
    }
}

/// Serialized as `{"sign": 0|1, "log": <ln magnitude or null>}`.
impl Serialize for LogReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("LogReal", 2)?;
        st.serialize_field("sign", &(if self.is_zero { 0 } else { 1 }))?;
        st.serialize_field("log", &(if self.is_zero { None } else { Some(self.log_magnitude) }))?;
        st.end()
    }
}

/// Exact nonnegative integer count.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BigCount(pub BigUint);

impl BigCount {
    pub fn zero() -> Self {
        BigCount(BigUint::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Natural log, accurate to double precision for any size.
    pub fn ln(&self) -> f64 {
        if self.0.is_zero() {
            return f64::NEG_INFINITY;
        }
        let bits = self.0.bits();
        if bits <= 1000 {
            return self.0.to_f64().expect("fits in f64").ln();
        }
        let shift = bits - 64;
        let top = (&self.0 >> shift).to_f64().expect("64-bit prefix");
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }

    pub fn to_log_real(&self) -> LogReal {
        LogReal::from_ln(self.ln())
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }
}

impl From<u64> for BigCount {
    fn from(v: u64) -> Self {
        BigCount(BigUint::from(v))
    }
}

impl From<BigUint> for BigCount {
    fn from(v: BigUint) -> Self {
        BigCount(v)
    }
}

impl fmt::Display for BigCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Serialized as a decimal string.
impl Serialize for BigCount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}
