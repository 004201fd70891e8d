//! Exact dot products over big integers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{Real, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct ExactDot<T: Real> {
    pub exact: BigRational,
    /// `exact` rounded to nearest, ties to even, in the element precision.
    pub rounded: T,
    /// `sum |a_i b_i|`, exact.
    pub abs_sum: BigRational,
}

impl<T: Real> ExactDot<T> {
    /// `sum |a_i b_i| / |sum a_i b_i|`; infinite for an exactly zero dot.
    pub fn condition(&self) -> f64 {
        if self.exact.is_zero() {
            return if self.abs_sum.is_zero() { 1.0 } else { f64::INFINITY };
        }
        ratio_to_f64(&(&self.abs_sum / self.exact.abs()))
    }

    /// `|x - exact| / |exact|`, computed exactly and rounded once. An exact
    /// zero dot gives 0 for `x == 0` and infinity otherwise.
    pub fn relative_error(&self, x: T) -> f64 {
        let diff = (to_rational(x) - &self.exact).abs();
        if self.exact.is_zero() {
            return if diff.is_zero() { 0.0 } else { f64::INFINITY };
        }
        ratio_to_f64(&(diff / self.exact.abs()))
    }
}

/// `(mantissa, exponent)` with `x = mantissa * 2^exponent` exactly.
fn decompose<T: Real>(x: T) -> (i64, i32) {
    let (m, e, s) = x.integer_decode();
    (i64::from(s) * m as i64, i32::from(e))
}

fn pow2(k: i32) -> BigRational {
    let p = BigInt::one() << k.unsigned_abs();
    if k >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}

/// The exact rational value of a finite float.
pub fn to_rational<T: Real>(x: T) -> BigRational {
    let (m, e) = decompose(x);
    BigRational::from_integer(BigInt::from(m)) * pow2(e)
}

/// Exact `sum a_i b_i`, its correctly rounded value and `sum |a_i b_i|`.
pub fn dot_exact<T: Real>(a: &Vector<T>, b: &Vector<T>) -> ExactDot<T> {
    let terms: Vec<(BigInt, i32)> = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| {
            let (mx, ex) = decompose(*x);
            let (my, ey) = decompose(*y);
            (BigInt::from(mx) * BigInt::from(my), ex + ey)
        })
        .filter(|(m, _)| !m.is_zero())
        .collect();
    let Some(base) = terms.iter().map(|(_, e)| *e).min() else {
        return ExactDot {
            exact: BigRational::zero(),
            rounded: T::zero(),
            abs_sum: BigRational::zero(),
        };
    };
    let mut sum = BigInt::zero();
    let mut abs_sum = BigInt::zero();
    for (m, e) in &terms {
        let shifted = m << ((e - base) as u32);
        abs_sum += shifted.abs();
        sum += shifted;
    }
    let scale = pow2(base);
    let exact = BigRational::from_integer(sum) * &scale;
    ExactDot {
        rounded: round_rational(&exact),
        abs_sum: BigRational::from_integer(abs_sum) * scale,
        exact,
    }
}

fn bits(x: &BigInt) -> i64 {
    x.bits() as i64
}

/// Round to nearest, ties to even, into `T`, including subnormals; values
/// beyond the largest finite magnitude become infinite.
pub fn round_rational<T: Real>(q: &BigRational) -> T {
    if q.is_zero() {
        return T::zero();
    }
    let negative = q.is_negative();
    let num = q.numer().abs();
    let den = q.denom().clone();

    // e = floor(log2 |q|)
    let mut e = bits(&num) - bits(&den);
    let ge = |e: i64| {
        if e >= 0 {
            num >= (&den << e as u32)
        } else {
            (&num << (-e) as u32) >= den
        }
    };
    if !ge(e) {
        e -= 1;
    }

    let p = i64::from(T::MANTISSA_DIGITS);
    let k = e.max(i64::from(T::MIN_NORMAL_EXP)) - (p - 1);
    // m = |q| / 2^k, rounded half to even
    let (n, d) = if k >= 0 {
        (num, den << k as u32)
    } else {
        (num << (-k) as u32, den)
    };
    let (mut m, r) = n.div_rem(&d);
    let twice = r << 1u32;
    if twice > d || (twice == d && m.is_odd()) {
        m += 1;
    }
    // m <= 2^p, so the cast and every scaling below are exact.
    let mut k = k as i32;
    let mut mantissa = u64::try_from(&m).expect("mantissa fits") as f64;
    if k > T::MAX_EXP {
        return signed(T::infinity(), negative);
    }
    // Split huge shifts so no intermediate power of two leaves the range.
    while k < -1000 {
        mantissa *= 2f64.powi(-1000);
        k += 1000;
    }
    let value = mantissa * 2f64.powi(k);
    let value = T::narrow(value);
    signed(value, negative)
}

fn signed<T: Real>(x: T, negative: bool) -> T {
    if negative {
        -x
    } else {
        x
    }
}

fn ratio_to_f64(q: &BigRational) -> f64 {
    round_rational::<f64>(q)
}
