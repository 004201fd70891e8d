use std::fmt::{Debug, Display, LowerExp};

use num_traits::Float;
use serde::{Deserialize, Serialize};

mod sealed {
    pub trait Sealed {}
    impl Sealed for f32 {}
    impl Sealed for f64 {}
}

/// Element precision of the kernels: binary32 or binary64, nothing else.
pub trait Real: Float + Default + Debug + Display + LowerExp + Send + Sync + 'static + sealed::Sealed {
    const PRECISION: Precision;
    /// Significand bits including the implicit one.
    const MANTISSA_DIGITS: u32;
    /// Exponent of the smallest positive subnormal.
    const MIN_SUBNORMAL_EXP: i32;
    /// Smallest exponent `e` of a normal value `1.m × 2^e`.
    const MIN_NORMAL_EXP: i32;
    const MAX_EXP: i32;

    fn widen(self) -> f64;
    /// Rounds to nearest.
    fn narrow(x: f64) -> Self;
}

impl Real for f32 {
    const PRECISION: Precision = Precision::F32;
    const MANTISSA_DIGITS: u32 = f32::MANTISSA_DIGITS;
    const MIN_SUBNORMAL_EXP: i32 = -149;
    const MIN_NORMAL_EXP: i32 = -126;
    const MAX_EXP: i32 = 127;

    fn widen(self) -> f64 {
        f64::from(self)
    }

    fn narrow(x: f64) -> Self {
        x as f32
    }
}

impl Real for f64 {
    const PRECISION: Precision = Precision::F64;
    const MANTISSA_DIGITS: u32 = f64::MANTISSA_DIGITS;
    const MIN_SUBNORMAL_EXP: i32 = -1074;
    const MIN_NORMAL_EXP: i32 = -1022;
    const MAX_EXP: i32 = 1023;

    fn widen(self) -> f64 {
        self
    }

    fn narrow(x: f64) -> Self {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }

    pub fn bytes(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }
}

impl Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(format!("unknown precision `{other}` (expected f32 or f64)")),
        }
    }
}
