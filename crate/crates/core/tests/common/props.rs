//! Strategies and checks shared by the property suites and the acceptance
//! run.

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use ecm_core::kernels::{dot_exact, dot_kahan, dot_naive, Real, Vector};
use ecm_core::model::{
    compose_prediction, default_level_names, predicted_performance, saturated_performance, saturation_point,
    scale_curve, transfer_label, EcmInputs, EcmPrediction, LevelTransfer, OverlapPolicy, WorkUnit,
};
use ecm_core::shorthand::{format_shorthand, parse_shorthand, Shorthand};

use super::trace::{kahan_lanes_trace, kahan_trace, naive_lanes_trace};

/// Decimal cycle counts with one fractional digit, as written in tables.
pub fn tenths(max: u32) -> impl Strategy<Value = f64> {
    (0..=max * 10).prop_map(|k| f64::from(k) / 10.0)
}

/// Multiples of 1/8, so sums of them stay exact.
pub fn eighths(max: u32) -> impl Strategy<Value = f64> {
    (0..=max * 8).prop_map(|k| f64::from(k) / 8.0)
}

fn named(spec: Vec<(f64, f64)>) -> Vec<LevelTransfer> {
    let names = default_level_names(spec.len());
    spec.into_iter()
        .enumerate()
        .map(|(i, (c, p))| LevelTransfer::new(transfer_label(&names[i], &names[i + 1]), c, p).unwrap())
        .collect()
}

/// Input tuples with 0..=4 transfer levels, optional penalties and, for some,
/// a level-dependent T_nOL.
pub fn inputs() -> impl Strategy<Value = EcmInputs> {
    let transfers = || prop::collection::vec((tenths(40), prop_oneof![Just(0.0), tenths(30)]), 0..=4);
    let plain = (tenths(40), tenths(40), transfers())
        .prop_map(|(t_ol, t_nol, t)| EcmInputs::new(t_ol, t_nol, named(t)).unwrap());
    let per_level = (eighths(20), transfers().prop_filter("per-level T_nOL needs a transfer", |t| !t.is_empty())).prop_flat_map(|(t_ol, t)| {
        let levels = t.len() + 1;
        (Just(t_ol), Just(t), prop::collection::vec(eighths(10), levels)).prop_filter_map(
            "needs at least one T_nOL step",
            |(t_ol, t, steps)| {
                if steps[1..].iter().all(|s| *s == 0.0) {
                    return None;
                }
                let per_level: Vec<f64> = steps
                    .iter()
                    .scan(0.0, |acc, s| {
                        *acc += s;
                        Some(*acc)
                    })
                    .collect();
                EcmInputs::new(t_ol, per_level[0], named(t))
                    .unwrap()
                    .with_level_t_nol(per_level)
                    .ok()
            },
        )
    });
    prop_oneof![3 => plain, 1 => per_level]
}

pub fn predictions() -> impl Strategy<Value = EcmPrediction> {
    prop::collection::vec(tenths(100), 1..=5).prop_map(|values| {
        let names = default_level_names(values.len() - 1);
        EcmPrediction::new(names.into_iter().zip(values).collect()).unwrap()
    })
}

pub fn shorthand() -> impl Strategy<Value = Shorthand> {
    prop_oneof![inputs().prop_map(Shorthand::Inputs), predictions().prop_map(Shorthand::Prediction)]
}

pub fn check_round_trip(x: &Shorthand) -> Result<(), TestCaseError> {
    let text = format_shorthand(x);
    let back = parse_shorthand(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
    prop_assert_eq!(&back, x, "{}", text);
    Ok(())
}

/// Rounding noise from summing decimal cycle counts in a different order.
const SLACK: f64 = 1e-9;

/// Adding a transfer level anywhere, or lengthening one, never lowers any
/// prediction further out.
pub fn check_monotone(inputs: &EcmInputs, extra: f64, penalty: f64, at: usize) -> Result<(), TestCaseError> {
    let before = compose_prediction(inputs, OverlapPolicy::SerialTransfers).cycles();
    for w in before.windows(2) {
        prop_assert!(w[0] <= w[1] + SLACK, "not non-decreasing outward: {:?}", before);
    }
    prop_assert_eq!(before[0], inputs.t_ol().max(inputs.t_nol_at(0)));

    let mut spec: Vec<(f64, f64)> = inputs.transfers().iter().map(|t| (t.cycles(), t.penalty())).collect();
    let at = at % (spec.len() + 1);
    spec.insert(at, (extra, penalty));
    let grown = EcmInputs::new(inputs.t_ol(), inputs.t_nol(), named(spec)).unwrap();
    let after = compose_prediction(&grown, OverlapPolicy::SerialTransfers).cycles();
    let plain = compose_prediction(
        &EcmInputs::new(inputs.t_ol(), inputs.t_nol(), inputs.transfers().to_vec()).unwrap(),
        OverlapPolicy::SerialTransfers,
    )
    .cycles();
    for (k, b) in plain.iter().enumerate() {
        let k_after = if k > at { k + 1 } else { k };
        prop_assert!(after[k_after] >= *b - SLACK, "level {}: {:?} -> {:?}", k, plain, after);
    }

    if !inputs.transfers().is_empty() {
        let i = at % inputs.transfers().len();
        let mut spec: Vec<(f64, f64)> = inputs.transfers().iter().map(|t| (t.cycles(), t.penalty())).collect();
        spec[i].0 += extra;
        let longer = EcmInputs::new(inputs.t_ol(), inputs.t_nol(), named(spec)).unwrap();
        for policy in [OverlapPolicy::SerialTransfers, OverlapPolicy::FullOverlapOutermost] {
            let base = compose_prediction(
                &EcmInputs::new(inputs.t_ol(), inputs.t_nol(), inputs.transfers().to_vec()).unwrap(),
                policy,
            )
            .cycles();
            let more = compose_prediction(&longer, policy).cycles();
            for (b, m) in base.iter().zip(&more) {
                prop_assert!(*m >= b - SLACK, "{:?}: {:?} -> {:?}", policy, base, more);
            }
        }
    }
    Ok(())
}

fn decimal(x: f64) -> BigRational {
    let text = format!("{x}");
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let digits: BigInt = format!("{int}{frac}").parse().unwrap();
    BigRational::new(digits, num_traits::pow(BigInt::from(10), frac.len()))
}

/// `n_S * T_bottleneck >= T_Mem > (n_S - 1) * T_bottleneck` over the
/// decimal values, plus the shape of the scaling curve.
pub fn check_saturation(inputs: &EcmInputs, domains: u32) -> Result<(), TestCaseError> {
    let pred = compose_prediction(inputs, OverlapPolicy::SerialTransfers);
    let Some(bottleneck) = pred.bottleneck_cycles().filter(|b| *b > 0.0) else {
        return Ok(());
    };
    if pred.outermost() == 0.0 {
        return Ok(());
    }
    let n_s = saturation_point(&pred).unwrap();
    let outer = decimal(pred.outermost());
    let b = decimal(bottleneck);
    let n = BigRational::from_integer(BigInt::from(n_s));
    let one = BigRational::from_integer(BigInt::from(1));
    prop_assert!(&n * &b >= outer, "n_S {} too small", n_s);
    prop_assert!(n_s == 1 || (&n - &one) * &b < outer, "n_S {} too large", n_s);

    let work = WorkUnit::updates(8);
    let f = 2.0;
    let single = predicted_performance(&pred, &work, f).unwrap().last().unwrap().1;
    let p_sat = saturated_performance(bottleneck, &work, f).unwrap();
    let max_cores = (n_s + 3) * domains;
    let curve = scale_curve(&pred, &work, f, max_cores, domains).unwrap();
    for pt in &curve.points {
        let full = pt.cores / domains;
        let extra = pt.cores % domains;
        let per = |n: u32| if n >= n_s { p_sat } else { f64::from(n) * single };
        let want = f64::from(domains - extra) * per(full) + f64::from(extra) * per(full + 1);
        prop_assert!((pt.performance - want).abs() <= 1e-9 * want.max(1.0), "{:?} vs {}", pt, want);
    }
    for w in curve.points.windows(2) {
        prop_assert!(w[1].performance >= w[0].performance - 1e-12);
    }
    let last = curve.points.last().unwrap();
    prop_assert!((last.performance - p_sat * f64::from(domains)).abs() <= 1e-9 * last.performance);
    Ok(())
}

/// Finite values spread over many binades, including zeros.
pub fn values() -> impl Strategy<Value = f64> {
    prop_oneof![
        1 => Just(0.0),
        8 => (-1.0f64..1.0, -20i32..20).prop_map(|(m, e)| m * 2f64.powi(e)),
    ]
}

pub fn pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (0..=max_len).prop_flat_map(|n| (prop::collection::vec(values(), n), prop::collection::vec(values(), n)))
}

fn vectors<T: Real>(a: &[f64], b: &[f64]) -> (Vector<T>, Vector<T>) {
    let conv = |x: &[f64]| Vector::new(x.iter().map(|v| T::narrow(*v)).collect()).unwrap();
    (conv(a), conv(b))
}

fn bits_eq<T: Real>(x: T, y: T) -> bool {
    x == y && x.is_sign_negative() == y.is_sign_negative()
}

/// Lane and unroll contracts, bit for bit, in precision `T`.
pub fn check_lanes<T: Real>(a: &[f64], b: &[f64], lanes: usize, unroll: usize) -> Result<(), TestCaseError> {
    let (va, vb) = vectors::<T>(a, b);
    let (xa, xb) = (va.as_slice(), vb.as_slice());

    let naive = dot_naive(&va, &vb, lanes).unwrap();
    let naive_ref = naive_lanes_trace(xa, xb, lanes);
    prop_assert!(bits_eq(naive, naive_ref), "naive lanes={}: {:e} vs {:e}", lanes, naive, naive_ref);

    let kahan = dot_kahan(&va, &vb, lanes, unroll).unwrap();
    let (value, cs) = kahan_lanes_trace(xa, xb, lanes, unroll);
    prop_assert!(bits_eq(kahan.value, value), "kahan {}x{}: {:e} vs {:e}", lanes, unroll, kahan.value, value);
    prop_assert_eq!(kahan.compensations.len(), lanes);
    for (c, r) in kahan.compensations.iter().zip(&cs) {
        prop_assert!(bits_eq(*c, *r));
    }

    let single = dot_kahan(&va, &vb, 1, unroll).unwrap();
    let (sum, c) = kahan_trace(xa, xb);
    prop_assert!(bits_eq(single.value, sum) && bits_eq(single.compensations[0], c));
    let plain = dot_kahan(&va, &vb, 1, 1).unwrap();
    prop_assert!(bits_eq(single.value, plain.value));
    Ok(())
}

/// The exact value does not depend on summation order.
pub fn check_permutation(a: &[f64], b: &[f64], seed: u64) -> Result<(), TestCaseError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let (va, vb) = vectors::<f64>(a, b);
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let pa: Vec<f64> = order.iter().map(|&i| a[i]).collect();
    let pb: Vec<f64> = order.iter().map(|&i| b[i]).collect();
    let (qa, qb) = vectors::<f64>(&pa, &pb);
    let x = dot_exact(&va, &vb);
    let y = dot_exact(&qa, &qb);
    prop_assert_eq!(&x.exact, &y.exact);
    prop_assert!(bits_eq(x.rounded, y.rounded));
    if a.len() == 1 {
        // an exact zero has no sign, the product may be -0
        prop_assert_eq!(x.rounded, a[0] * b[0]);
    }
    Ok(())
}
