//! Working-set sweeps and thread scaling for the reference kernels, with
//! cycle-per-cache-line conversion and comparison against predictions.

mod compare;
mod csvio;
pub mod host;

use std::hint::black_box;
use std::sync::Barrier;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{kahan_sum, Precision, Real};
use crate::kernels::{kahan_into, naive_into};

pub use compare::{compare_to_model, level_windows, window_sizes, LevelWindow, RowStatus, ValidationRow, FLAG_TOLERANCE};
pub use csvio::{read_csv, write_csv, CsvHeader, CSV_COLUMNS};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("working set of {0} bytes holds no element pair")]
    EmptyVector(u64),
    #[error("sizes must be non-empty and strictly ascending")]
    SizesNotAscending,
    #[error("repetitions must be >= 3, got {0}")]
    TooFewRepetitions(usize),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("requested {requested} threads, host has {available}")]
    TooManyThreads { requested: usize, available: usize },
    #[error("cannot allocate {0} bytes")]
    Allocation(u64),
    #[error("unknown variant `{0}` (expected naive-l<L> or kahan-l<L>u<U>)")]
    UnknownVariant(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Naive,
    Kahan,
}

/// A reference kernel with its lane structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub kind: KernelKind,
    pub lanes: usize,
    pub unroll: usize,
}

impl Variant {
    pub fn naive(lanes: usize) -> Self {
        Self {
            kind: KernelKind::Naive,
            lanes,
            unroll: 1,
        }
    }

    pub fn kahan(lanes: usize, unroll: usize) -> Self {
        Self {
            kind: KernelKind::Kahan,
            lanes,
            unroll,
        }
    }

    /// `naive-l8`, `kahan-l8u2`.
    pub fn id(&self) -> String {
        match self.kind {
            KernelKind::Naive => format!("naive-l{}", self.lanes),
            KernelKind::Kahan => format!("kahan-l{}u{}", self.lanes, self.unroll),
        }
    }

    /// Id as reported for a run on `threads` workers; every worker adds its
    /// own set of lanes, so multi-threaded runs are distinct variants.
    pub fn run_id(&self, threads: usize) -> String {
        if threads == 1 {
            self.id()
        } else {
            format!("{}-t{threads}", self.id())
        }
    }

    pub fn parse(s: &str) -> Result<Self, BenchError> {
        let bad = || BenchError::UnknownVariant(s.to_string());
        let num = |t: &str| t.parse::<usize>().ok().filter(|v| *v >= 1).ok_or_else(bad);
        if let Some(rest) = s.strip_prefix("naive-l") {
            return Ok(Self::naive(num(rest)?));
        }
        if let Some(rest) = s.strip_prefix("kahan-l") {
            let (lanes, unroll) = rest.split_once('u').ok_or_else(bad)?;
            return Ok(Self::kahan(num(lanes)?, num(unroll)?));
        }
        Err(bad())
    }

    fn validate(&self) -> Result<(), BenchError> {
        if self.lanes == 0 {
            return Err(BenchError::NonPositive("lanes"));
        }
        if self.unroll == 0 {
            return Err(BenchError::NonPositive("unroll"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPlan {
    pub variant: Variant,
    pub precision: Precision,
    /// Working-set sizes in bytes, both vectors together.
    pub sizes: Vec<u64>,
    pub repetitions: usize,
    pub threads: usize,
    pub frequency_ghz: f64,
    pub cacheline_bytes: u32,
    /// Logical CPU per worker, used round-robin.
    pub pinning: Option<Vec<usize>>,
    pub seed: u64,
    /// Shortest timed interval per repetition; the inner loop count grows
    /// until one repetition takes at least this long.
    pub min_rep_seconds: f64,
}

pub const DEFAULT_REPETITIONS: usize = 11;
pub const DEFAULT_SEED: u64 = 42;

impl SweepPlan {
    pub fn new(variant: Variant, precision: Precision, sizes: Vec<u64>, frequency_ghz: f64) -> Self {
        Self {
            variant,
            precision,
            sizes,
            repetitions: DEFAULT_REPETITIONS,
            threads: 1,
            frequency_ghz,
            cacheline_bytes: 64,
            pinning: None,
            seed: DEFAULT_SEED,
            min_rep_seconds: 2e-3,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        self.variant.validate()?;
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BenchError::SizesNotAscending);
        }
        if self.repetitions < 3 {
            return Err(BenchError::TooFewRepetitions(self.repetitions));
        }
        if self.threads == 0 {
            return Err(BenchError::NonPositive("threads"));
        }
        if !(self.frequency_ghz > 0.0) {
            return Err(BenchError::NonPositive("frequency"));
        }
        if self.cacheline_bytes == 0 {
            return Err(BenchError::NonPositive("cacheline_bytes"));
        }
        if !(self.min_rep_seconds > 0.0) {
            return Err(BenchError::NonPositive("min_rep_seconds"));
        }
        let elem = self.precision.bytes() as u64;
        if let Some(&s) = self.sizes.iter().find(|&&s| s < 2 * elem * self.threads as u64) {
            return Err(BenchError::EmptyVector(s));
        }
        Ok(())
    }

    /// Element count per vector for a working set.
    pub fn elements(&self, bytes: u64) -> usize {
        (bytes / (2 * self.precision.bytes() as u64)) as usize
    }

    /// Short hash of everything that determines the CSV content apart from
    /// timings.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = serde_json::to_string(self).expect("plan serializes");
        let hash = Sha256::digest(text.as_bytes());
        hash[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSample {
    pub variant: String,
    pub precision: Precision,
    pub bytes: u64,
    pub threads: usize,
    pub reps: usize,
    pub median_seconds: f64,
    pub cycles_per_cl: f64,
    pub gup_per_s: f64,
    /// Kernel result, kept so the work cannot be optimized away and so
    /// repeated runs can be checked for bit-identical output.
    #[serde(skip)]
    pub result: f64,
}

/// `median_seconds * f / (n / (CL bytes / element bytes))`.
pub fn cycles_per_cl(median_seconds: f64, frequency_ghz: f64, elements: usize, cacheline_bytes: u32, precision: Precision) -> f64 {
    let per_cl = f64::from(cacheline_bytes) / precision.bytes() as f64;
    median_seconds * frequency_ghz * 1e9 / (elements as f64 / per_cl)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Log-spaced working-set sizes from `min` to `max` bytes, `per_octave`
/// points per doubling, rounded to whole cache lines of both vectors.
pub fn log_sizes(min: u64, max: u64, per_octave: u32, granule: u64) -> Vec<u64> {
    let mut sizes = Vec::new();
    let step = 2f64.powf(1.0 / f64::from(per_octave.max(1)));
    let mut s = min.max(granule) as f64;
    while s <= max as f64 * (1.0 + 1e-9) {
        let rounded = ((s / granule as f64).round() as u64).max(1) * granule;
        if sizes.last() != Some(&rounded) {
            sizes.push(rounded);
        }
        s *= step;
    }
    sizes
}

fn fill<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<T>, BenchError> {
    let mut v = Vec::new();
    v.try_reserve_exact(n)
        .map_err(|_| BenchError::Allocation((n * std::mem::size_of::<T>()) as u64))?;
    v.extend((0..n).map(|_| T::narrow(rng.gen_range(-1.0..1.0))));
    Ok(v)
}

/// Per-worker scratch for lane partials.
struct Scratch<T> {
    sums: Vec<T>,
    cs: Vec<T>,
}

impl<T: Real> Scratch<T> {
    fn new(lanes: usize) -> Self {
        Self {
            sums: vec![T::zero(); lanes],
            cs: vec![T::zero(); lanes],
        }
    }

    fn run(&mut self, variant: Variant, a: &[T], b: &[T]) -> T {
        match variant.kind {
            KernelKind::Naive => naive_into(a, b, &mut self.sums),
            KernelKind::Kahan => kahan_into(a, b, variant.unroll, &mut self.sums, &mut self.cs),
        }
    }
}

fn time_calls<T: Real>(variant: Variant, a: &[T], b: &[T], scratch: &mut Scratch<T>, calls: u64) -> Duration {
    let start = Instant::now();
    for _ in 0..calls {
        black_box(scratch.run(variant, black_box(a), black_box(b)));
    }
    start.elapsed()
}

/// Inner-loop count so that one repetition lasts at least `min_seconds`.
fn calibrate<T: Real>(variant: Variant, a: &[T], b: &[T], min_seconds: f64) -> u64 {
    let mut scratch = Scratch::new(variant.lanes);
    let mut calls = 1u64;
    loop {
        let t = time_calls(variant, a, b, &mut scratch, calls).as_secs_f64();
        if t >= min_seconds || calls >= 1 << 30 {
            return calls;
        }
        let grow = if t > 0.0 { (min_seconds / t * 1.2).ceil() as u64 } else { 16 };
        calls = calls.saturating_mul(grow.clamp(2, 1024));
    }
}

fn blocks(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Measures one working set: per-call median seconds over `reps` and the
/// combined kernel result.
fn measure<T: Real>(
    variant: Variant,
    a: &[T],
    b: &[T],
    threads: usize,
    reps: usize,
    min_rep_seconds: f64,
    pinning: Option<&[usize]>,
) -> (f64, T) {
    let parts = blocks(a.len(), threads);
    let first = parts[0].clone();
    let calls = calibrate(variant, &a[first.clone()], &b[first], min_rep_seconds);

    if threads == 1 {
        let mut scratch = Scratch::new(variant.lanes);
        if let Some(cpus) = pinning {
            host::pin_current_thread(cpus[0]);
        }
        let result = scratch.run(variant, a, b);
        let mut per_call: Vec<f64> = (0..reps)
            .map(|_| time_calls(variant, a, b, &mut scratch, calls).as_secs_f64() / calls as f64)
            .collect();
        return (median(&mut per_call), result);
    }

    let barrier = Barrier::new(threads + 1);
    let mut per_call = Vec::with_capacity(reps);
    let partials: Vec<T> = std::thread::scope(|s| {
        let handles: Vec<_> = parts
            .iter()
            .enumerate()
            .map(|(w, range)| {
                let (xa, xb) = (&a[range.clone()], &b[range.clone()]);
                let barrier = &barrier;
                s.spawn(move || {
                    if let Some(cpus) = pinning {
                        host::pin_current_thread(cpus[w % cpus.len()]);
                    }
                    let mut scratch = Scratch::new(variant.lanes);
                    let result = scratch.run(variant, xa, xb);
                    for _ in 0..reps {
                        barrier.wait();
                        time_calls(variant, xa, xb, &mut scratch, calls);
                        barrier.wait();
                    }
                    result
                })
            })
            .collect();
        for _ in 0..reps {
            barrier.wait();
            let start = Instant::now();
            barrier.wait();
            per_call.push(start.elapsed().as_secs_f64() / calls as f64);
        }
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let (result, _) = kahan_sum(partials);
    (median(&mut per_call), result)
}

fn sweep<T: Real>(plan: &SweepPlan) -> Result<Vec<BenchSample>, BenchError> {
    let largest = plan.elements(*plan.sizes.last().expect("validated"));
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let a: Vec<T> = fill(largest, &mut rng)?;
    let b: Vec<T> = fill(largest, &mut rng)?;
    let pinning = plan.pinning.as_deref().filter(|p| !p.is_empty());

    plan.sizes
        .iter()
        .map(|&bytes| {
            let n = plan.elements(bytes);
            if n < plan.threads {
                return Err(BenchError::EmptyVector(bytes));
            }
            let (xa, xb) = (&a[..n], &b[..n]);
            // warm-up
            black_box(Scratch::new(plan.variant.lanes).run(plan.variant, xa, xb));
            let (median_seconds, result) =
                measure(plan.variant, xa, xb, plan.threads, plan.repetitions, plan.min_rep_seconds, pinning);
            Ok(BenchSample {
                variant: plan.variant.run_id(plan.threads),
                precision: plan.precision,
                bytes: 2 * n as u64 * plan.precision.bytes() as u64,
                threads: plan.threads,
                reps: plan.repetitions,
                median_seconds,
                cycles_per_cl: cycles_per_cl(median_seconds, plan.frequency_ghz, n, plan.cacheline_bytes, plan.precision),
                gup_per_s: n as f64 / median_seconds / 1e9,
                result: black_box(result).widen(),
            })
        })
        .collect()
}

/// Runs every working-set size of the plan.
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<BenchSample>, BenchError> {
    plan.validate()?;
    let available = host::available_cpus();
    if plan.threads > available {
        return Err(BenchError::TooManyThreads {
            requested: plan.threads,
            available,
        });
    }
    match plan.precision {
        Precision::F32 => sweep::<f32>(plan),
        Precision::F64 => sweep::<f64>(plan),
    }
}

/// One memory-sized measurement per core count, workers pinned round-robin
/// over the host's memory domains.
pub fn thread_scaling(plan: &SweepPlan, cores: &[usize], bytes: u64) -> Result<Vec<BenchSample>, BenchError> {
    let available = host::available_cpus();
    if let Some(&too_many) = cores.iter().find(|&&c| c > available) {
        return Err(BenchError::TooManyThreads {
            requested: too_many,
            available,
        });
    }
    let order = host::round_robin_cpus();
    cores
        .iter()
        .map(|&threads| {
            let mut p = plan.clone();
            p.threads = threads;
            p.sizes = vec![bytes];
            if p.pinning.is_some() {
                p.pinning = Some(order.clone());
            }
            run_sweep(&p).map(|mut s| s.remove(0))
        })
        .collect()
}

/// Core count where measured performance stops growing.
///
/// Fits `p(n) = s * min(n, k)` for every candidate `k` by least squares and
/// keeps the best; `None` for fewer than three points.
pub fn estimate_saturation(samples: &[BenchSample]) -> Option<usize> {
    if samples.len() < 3 {
        return None;
    }
    let mut best: Option<(f64, usize)> = None;
    for k in samples.iter().map(|s| s.threads) {
        let x: Vec<f64> = samples.iter().map(|s| s.threads.min(k) as f64).collect();
        let y: Vec<f64> = samples.iter().map(|s| s.gup_per_s).collect();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let slope = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / sxx;
        let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - slope * a).powi(2)).sum();
        if best.map_or(true, |(e, _)| sse < e) {
            best = Some((sse, k));
        }
    }
    best.map(|(_, k)| k)
}

/// Performance gained per added core between consecutive samples.
pub fn scaling_slopes(samples: &[BenchSample]) -> Vec<f64> {
    samples
        .windows(2)
        .map(|w| (w[1].gup_per_s - w[0].gup_per_s) / (w[1].threads as f64 - w[0].threads as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadCheck {
    /// Timing cost attributed to one kernel call of an empty kernel.
    pub empty_seconds: f64,
    pub smallest_sample_seconds: f64,
}

impl OverheadCheck {
    pub const LIMIT: f64 = 0.01;

    pub fn ratio(&self) -> f64 {
        self.empty_seconds / self.smallest_sample_seconds
    }

    pub fn passed(&self) -> bool {
        self.ratio() <= Self::LIMIT
    }
}

/// Times the harness loop around a kernel that does nothing and relates it
/// to the fastest sample.
pub fn overhead_check(samples: &[BenchSample]) -> Option<OverheadCheck> {
    let smallest = samples.iter().map(|s| s.median_seconds).min_by(f64::total_cmp)?;
    let calls = 1u64 << 20;
    let mut per_call: Vec<f64> = (0..5)
        .map(|_| {
            let start = Instant::now();
            for i in 0..calls {
                black_box(i);
            }
            start.elapsed().as_secs_f64() / calls as f64
        })
        .collect();
    Some(OverheadCheck {
        empty_seconds: median(&mut per_call),
        smallest_sample_seconds: smallest,
    })
}
