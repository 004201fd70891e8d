//! Ill-conditioned dot-product instances with exactly representable
//! products.
//!
//! Every `a_i` and `b_i` is an integer of at most half the significand width
//! times a power of two shared by the whole vector, so each product `a_i b_i`
//! is exact in the element precision. Half of the products are positive
//! random values summing to `T`; the rest are negative and chosen to sum to
//! exactly `-N`, where `N` leaves the residual `T - N` that gives the target
//! condition `(T + N) / (T - N)`. The entries are then shuffled.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot_exact, ExactDot, KernelError, Real, Vector};

#[derive(Debug, Clone)]
pub struct IllConditioned<T: Real> {
    pub a: Vector<T>,
    pub b: Vector<T>,
    pub exact: ExactDot<T>,
    /// Achieved condition `sum |a_i b_i| / |sum a_i b_i|`.
    pub condition: f64,
}

/// Accepted distance between target and achieved condition.
const CONDITION_FACTOR: f64 = 100.0;

pub fn gen_ill_conditioned<T: Real>(
    n: usize,
    target_condition: f64,
    seed: u64,
) -> Result<IllConditioned<T>, KernelError> {
    if n < 6 {
        return Err(KernelError::TooShort(n));
    }
    if !(target_condition.is_finite() && target_condition >= 1.0) {
        return Err(KernelError::InvalidCondition(target_condition));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = T::MANTISSA_DIGITS / 2;
    let factor_lo = 1u64 << (h - 1);
    let factor_hi = 1u64 << h;
    let max_product = (1u128 << (2 * h)) - 1;

    // (signed a factor, b factor) pairs as integers.
    let mut pairs: Vec<(i64, u64)> = Vec::with_capacity(n);
    let n_pos = n / 2;
    let n_neg = n - n_pos;
    let mut total: u128 = 0;
    for _ in 0..n_pos {
        let x = rng.gen_range(factor_lo..factor_hi);
        let y = rng.gen_range(factor_lo..factor_hi);
        total += u128::from(x * y);
        pairs.push((x as i64, y));
    }

    // residual S = T - N = 2T / (c + 1), at least 1
    let residual = ((2.0 * total as f64 / (target_condition + 1.0)).round() as u128).clamp(1, total);
    let negative_sum = total - residual;
    if negative_sum >= n_neg as u128 {
        let mut remaining = negative_sum;
        for k in (1..=n_neg as u128).rev() {
            let lo = remaining.saturating_sub((k - 1) * max_product).max(1);
            let hi = (remaining - (k - 1)).min(max_product);
            let product = if k == 1 {
                remaining
            } else {
                let mean = remaining as f64 / k as f64;
                let target = (mean * rng.gen_range(0.5..1.5)).round() as u128;
                target.clamp(lo, hi)
            };
            pairs.push(factor_product(product, lo, hi, factor_lo, factor_hi, &mut rng));
            remaining -= pairs.last().map(|&(x, y)| (-x) as u128 * u128::from(y)).unwrap();
        }
        debug_assert_eq!(remaining, 0);
    } else {
        // No room for cancellation: benign all-positive data.
        for _ in 0..n_neg {
            let x = rng.gen_range(factor_lo..factor_hi);
            let y = rng.gen_range(factor_lo..factor_hi);
            pairs.push((x as i64, y));
        }
    }
    pairs.shuffle(&mut rng);

    // Shared scaling keeps the products exact and away from integer values.
    let scale_a = rng.gen_range(-8..=8) - h as i32;
    let scale_b = rng.gen_range(-8..=8) - h as i32;
    let sa = T::narrow(2f64.powi(scale_a));
    let sb = T::narrow(2f64.powi(scale_b));
    let (a, b): (Vec<T>, Vec<T>) = pairs
        .iter()
        .map(|&(x, y)| (T::narrow(x as f64) * sa, T::narrow(y as f64) * sb))
        .unzip();
    let a = Vector::new(a).expect("finite by construction");
    let b = Vector::new(b).expect("finite by construction");
    let exact = dot_exact(&a, &b);
    let condition = exact.condition();
    if !(condition >= target_condition / CONDITION_FACTOR && condition <= target_condition * CONDITION_FACTOR) {
        return Err(KernelError::UnattainableCondition {
            target: target_condition,
            achieved: condition,
            n,
        });
    }
    Ok(IllConditioned { a, b, exact, condition })
}

/// A negative pair whose product lies in `[lo, hi]`, close to `target`. Uses
/// two random-looking factors when they fit, else `(target, 1)`, which is
/// exact because `target` has at most twice the factor width.
fn factor_product(
    target: u128,
    lo: u128,
    hi: u128,
    factor_lo: u64,
    factor_hi: u64,
    rng: &mut impl Rng,
) -> (i64, u64) {
    let x = rng.gen_range(factor_lo..factor_hi);
    let y = (target as f64 / x as f64).round() as u64;
    let product = u128::from(x) * u128::from(y);
    if (1..factor_hi).contains(&y) && (lo..=hi).contains(&product) {
        (-(x as i64), y)
    } else {
        (-(target as i64), 1)
    }
}
