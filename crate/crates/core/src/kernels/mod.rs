//! Reference dot-product kernels: naive and Kahan-compensated, each with a
//! lane-split variant that emulates SIMD or unrolled partial sums, plus an
//! exact oracle and a generator for ill-conditioned inputs.
//!
//! All arithmetic happens in the element precision. Rust never reassociates
//! or contracts floating-point expressions, so the compensation steps below
//! execute exactly as written.

mod exact;
mod float;
mod generate;

use thiserror::Error;

pub use exact::{dot_exact, round_rational, to_rational, ExactDot};
pub use float::{Precision, Real};
pub use generate::{gen_ill_conditioned, IllConditioned};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("element {index} is not finite")]
    NonFinite { index: usize },
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("lanes must be >= 1")]
    InvalidLanes,
    #[error("unroll must be >= 1")]
    InvalidUnroll,
    #[error("generator needs n >= 6, got {0}")]
    TooShort(usize),
    #[error("target condition must be a finite number >= 1, got {0}")]
    InvalidCondition(f64),
    #[error("condition {target:e} unattainable with n = {n} in this precision (reached {achieved:e})")]
    UnattainableCondition { target: f64, achieved: f64, n: usize },
}

/// A vector of finite values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector<T: Real> {
    data: Vec<T>,
}

impl<T: Real> Vector<T> {
    pub fn new(data: Vec<T>) -> Result<Self, KernelError> {
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(KernelError::NonFinite { index });
        }
        Ok(Self { data })
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.data
    }
}

impl<T: Real> TryFrom<Vec<T>> for Vector<T> {
    type Error = KernelError;

    fn try_from(data: Vec<T>) -> Result<Self, KernelError> {
        Self::new(data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DotResult<T: Real> {
    pub value: T,
    /// Final `c` of every lane, lane 0 first.
    pub compensations: Vec<T>,
    pub lanes: usize,
    pub unroll: usize,
}

fn check_pair<T: Real>(a: &Vector<T>, b: &Vector<T>) -> Result<(), KernelError> {
    if a.len() != b.len() {
        return Err(KernelError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Plain dot product with `lanes` strided partial sums.
///
/// Lane `l` accumulates indices `i ≡ l (mod lanes)` in ascending order,
/// starting from zero; the partials are then added in lane order.
pub fn dot_naive<T: Real>(a: &Vector<T>, b: &Vector<T>, lanes: usize) -> Result<T, KernelError> {
    check_pair(a, b)?;
    if lanes == 0 {
        return Err(KernelError::InvalidLanes);
    }
    Ok(naive_slices(a.as_slice(), b.as_slice(), lanes))
}

pub(crate) fn naive_slices<T: Real>(a: &[T], b: &[T], lanes: usize) -> T {
    naive_into(a, b, &mut vec![T::zero(); lanes])
}

/// Naive lane-split dot using `partial` (one slot per lane) as scratch.
pub(crate) fn naive_into<T: Real>(a: &[T], b: &[T], partial: &mut [T]) -> T {
    match partial.len() {
        1 => naive_fixed::<T, 1>(a, b, partial),
        2 => naive_fixed::<T, 2>(a, b, partial),
        4 => naive_fixed::<T, 4>(a, b, partial),
        8 => naive_fixed::<T, 8>(a, b, partial),
        16 => naive_fixed::<T, 16>(a, b, partial),
        _ => naive_any(a, b, partial),
    }
}

fn naive_any<T: Real>(a: &[T], b: &[T], partial: &mut [T]) -> T {
    let lanes = partial.len();
    partial.fill(T::zero());
    for (xa, xb) in a.chunks(lanes).zip(b.chunks(lanes)) {
        for (p, (x, y)) in partial.iter_mut().zip(xa.iter().zip(xb)) {
            *p = *p + *x * *y;
        }
    }
    lane_total(partial)
}

/// Same lane order as [`naive_any`], with the partials in registers.
fn naive_fixed<T: Real, const L: usize>(a: &[T], b: &[T], partial: &mut [T]) -> T {
    let mut p = [T::zero(); L];
    let (ca, cb) = (a.chunks_exact(L), b.chunks_exact(L));
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for l in 0..L {
            p[l] = p[l] + xa[l] * xb[l];
        }
    }
    for (l, (x, y)) in ta.iter().zip(tb).enumerate() {
        p[l] = p[l] + *x * *y;
    }
    partial.copy_from_slice(&p);
    lane_total(partial)
}

fn lane_total<T: Real>(partial: &[T]) -> T {
    let mut sum = partial[0];
    for p in &partial[1..] {
        sum = sum + *p;
    }
    sum
}

/// One step of compensated accumulation, in this order:
/// `y = x - c; t = sum + y; c = (t - sum) - y; sum = t`.
#[inline(always)]
fn kahan_step<T: Real>(sum: &mut T, c: &mut T, x: T) {
    let y = x - *c;
    let t = *sum + y;
    *c = (t - *sum) - y;
    *sum = t;
}

/// Scalar compensated sum of a stream, returning `(sum, c)`.
pub fn kahan_sum<T: Real>(values: impl IntoIterator<Item = T>) -> (T, T) {
    let mut sum = T::zero();
    let mut c = T::zero();
    for x in values {
        kahan_step(&mut sum, &mut c, x);
    }
    (sum, c)
}

/// Kahan-compensated dot product.
///
/// Element `i` goes to lane `(i / unroll) % lanes`; each lane runs
/// `prod = a*b; y = prod - c; t = sum + y; c = (t - sum) - y; sum = t` over
/// its elements in ascending order. With one lane the value is that lane's
/// `sum`. With several, the lane sums and then the negated lane
/// compensations are fed through one more scalar Kahan accumulation whose
/// `sum` is the value. Compensations are reported, never folded into a
/// single-lane value.
pub fn dot_kahan<T: Real>(
    a: &Vector<T>,
    b: &Vector<T>,
    lanes: usize,
    unroll: usize,
) -> Result<DotResult<T>, KernelError> {
    check_pair(a, b)?;
    if lanes == 0 {
        return Err(KernelError::InvalidLanes);
    }
    if unroll == 0 {
        return Err(KernelError::InvalidUnroll);
    }
    let (value, compensations) = kahan_slices(a.as_slice(), b.as_slice(), lanes, unroll);
    Ok(DotResult {
        value,
        compensations,
        lanes,
        unroll,
    })
}

pub(crate) fn kahan_slices<T: Real>(a: &[T], b: &[T], lanes: usize, unroll: usize) -> (T, Vec<T>) {
    let mut sums = vec![T::zero(); lanes];
    let mut cs = vec![T::zero(); lanes];
    let value = kahan_into(a, b, unroll, &mut sums, &mut cs);
    (value, cs)
}

/// Kahan lane-split dot using `sums` and `cs` (one slot per lane) as
/// scratch; `cs` holds the lane compensations afterwards.
pub(crate) fn kahan_into<T: Real>(a: &[T], b: &[T], unroll: usize, sums: &mut [T], cs: &mut [T]) -> T {
    match sums.len() {
        1 => {
            let (mut sum, mut c) = (T::zero(), T::zero());
            for (x, y) in a.iter().zip(b) {
                kahan_step(&mut sum, &mut c, *x * *y);
            }
            cs[0] = c;
            return sum;
        }
        2 => kahan_fixed::<T, 2>(a, b, unroll, sums, cs),
        4 => kahan_fixed::<T, 4>(a, b, unroll, sums, cs),
        8 => kahan_fixed::<T, 8>(a, b, unroll, sums, cs),
        16 => kahan_fixed::<T, 16>(a, b, unroll, sums, cs),
        _ => {
            sums.fill(T::zero());
            cs.fill(T::zero());
            kahan_tail(a, b, unroll, sums, cs);
        }
    }
    let (value, _) = kahan_sum(sums.iter().copied().chain(cs.iter().map(|c| -*c)));
    value
}

/// Lane assignment by index arithmetic, continuing from the current lane
/// state; `a` must start at a block boundary.
fn kahan_tail<T: Real>(a: &[T], b: &[T], unroll: usize, sums: &mut [T], cs: &mut [T]) {
    let lanes = sums.len();
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let l = (i / unroll) % lanes;
        kahan_step(&mut sums[l], &mut cs[l], *x * *y);
    }
}

/// Whole blocks of `L * unroll` elements with the lane state in registers;
/// every lane still sees its elements in ascending order.
fn kahan_fixed<T: Real, const L: usize>(a: &[T], b: &[T], unroll: usize, sums: &mut [T], cs: &mut [T]) {
    let mut s = [T::zero(); L];
    let mut c = [T::zero(); L];
    let block = L * unroll;
    let (ca, cb) = (a.chunks_exact(block), b.chunks_exact(block));
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for u in 0..unroll {
            for l in 0..L {
                let i = l * unroll + u;
                kahan_step(&mut s[l], &mut c[l], xa[i] * xb[i]);
            }
        }
    }
    sums.copy_from_slice(&s);
    cs.copy_from_slice(&c);
    kahan_tail(ta, tb, unroll, sums, cs);
}
