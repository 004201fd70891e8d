//! In-core execution time per cache line of work.
//!
//! Two lower bounds are combined: a resource bound (instruction counts over
//! unit throughputs, split into overlapping and non-overlapping cycles) and a
//! recurrence bound from the loop-carried dependency chain of an unrolled
//! loop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InCoreError {
    #[error("unsupported instruction class `{0}`: zero throughput on this machine")]
    UnsupportedClass(InstrClass),
    #[error("{field} must be finite and non-negative, got {value}")]
    InvalidCount { field: String, value: f64 },
    #[error("{0} must be positive")]
    NonPositive(String),
    #[error("instruction class `{0}` is listed in more than one shared pipe")]
    DuplicatePipeMember(InstrClass),
    #[error("shared pipe mixes overlapping and non-overlapping classes")]
    MixedPipe,
    #[error("dependency chain has no links")]
    EmptyChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstrClass {
    Load,
    Store,
    Add,
    Mul,
    Fma,
    Prefetch,
    Other,
}

impl InstrClass {
    pub const ALL: [InstrClass; 7] = [
        InstrClass::Load,
        InstrClass::Store,
        InstrClass::Add,
        InstrClass::Mul,
        InstrClass::Fma,
        InstrClass::Prefetch,
        InstrClass::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InstrClass::Load => "load",
            InstrClass::Store => "store",
            InstrClass::Add => "add",
            InstrClass::Mul => "mul",
            InstrClass::Fma => "fma",
            InstrClass::Prefetch => "prefetch",
            InstrClass::Other => "other",
        }
    }
}

impl std::fmt::Display for InstrClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Instructions per cache line of work. Counts may be fractional when the
/// unrolled body covers a non-integer number of cache lines.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstructionMix {
    pub loads: f64,
    pub stores: f64,
    pub adds: f64,
    pub muls: f64,
    pub fmas: f64,
    pub prefetches: f64,
    pub other: f64,
}

impl InstructionMix {
    pub fn count(&self, class: InstrClass) -> f64 {
        match class {
            InstrClass::Load => self.loads,
            InstrClass::Store => self.stores,
            InstrClass::Add => self.adds,
            InstrClass::Mul => self.muls,
            InstrClass::Fma => self.fmas,
            InstrClass::Prefetch => self.prefetches,
            InstrClass::Other => self.other,
        }
    }

    pub fn total(&self) -> f64 {
        InstrClass::ALL.iter().map(|c| self.count(*c)).sum()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            loads: self.loads * k,
            stores: self.stores * k,
            adds: self.adds * k,
            muls: self.muls * k,
            fmas: self.fmas * k,
            prefetches: self.prefetches * k,
            other: self.other * k,
        }
    }

    pub fn validate(&self) -> Result<(), InCoreError> {
        for class in InstrClass::ALL {
            let v = self.count(class);
            if !(v.is_finite() && v >= 0.0) {
                return Err(InCoreError::InvalidCount {
                    field: format!("mix.{class}"),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetirementCounts {
    #[default]
    Instructions,
    Uops,
}

/// Several instruction classes issuing to the same execution pipe, e.g. all
/// vector arithmetic on a single U-pipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharedPipe {
    pub classes: Vec<InstrClass>,
    pub throughput: f64,
}

/// Instruction throughputs per cycle and the overlap classification of each
/// class. A zero throughput means the class cannot execute on this machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitThroughputs {
    pub load: f64,
    pub store: f64,
    pub add: f64,
    pub mul: f64,
    pub fma: f64,
    #[serde(default)]
    pub prefetch: f64,
    pub retirement_width: f64,
    #[serde(default)]
    pub retirement_counts: RetirementCounts,
    /// Classes whose cycles cannot overlap with cache line transfers.
    #[serde(default)]
    pub non_overlapping: Vec<InstrClass>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shared: Vec<SharedPipe>,
}

/// Where a class executes for throughput purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pipe {
    Class(InstrClass),
    Shared(usize),
}

impl UnitThroughputs {
    pub fn throughput(&self, class: InstrClass) -> f64 {
        match class {
            InstrClass::Load => self.load,
            InstrClass::Store => self.store,
            InstrClass::Add => self.add,
            InstrClass::Mul => self.mul,
            InstrClass::Fma => self.fma,
            InstrClass::Prefetch => self.prefetch,
            // untracked classes only count against retirement
            InstrClass::Other => f64::INFINITY,
        }
    }

    pub fn is_overlapping(&self, class: InstrClass) -> bool {
        !self.non_overlapping.contains(&class)
    }

    pub fn pipe(&self, class: InstrClass) -> Pipe {
        self.shared
            .iter()
            .position(|p| p.classes.contains(&class))
            .map_or(Pipe::Class(class), Pipe::Shared)
    }

    /// Instructions of this pipe's kind that can issue per cycle.
    pub fn pipe_throughput(&self, pipe: Pipe) -> f64 {
        match pipe {
            Pipe::Class(c) => self.throughput(c),
            Pipe::Shared(i) => self.shared[i].throughput,
        }
    }

    pub fn validate(&self) -> Result<(), InCoreError> {
        let named = [
            ("load", self.load),
            ("store", self.store),
            ("add", self.add),
            ("mul", self.mul),
            ("fma", self.fma),
            ("prefetch", self.prefetch),
        ];
        for (field, v) in named {
            if !(v.is_finite() && v >= 0.0) {
                return Err(InCoreError::InvalidCount {
                    field: format!("throughputs.{field}"),
                    value: v,
                });
            }
        }
        if !(self.retirement_width > 0.0 && self.retirement_width.is_finite()) {
            return Err(InCoreError::NonPositive("throughputs.retirement_width".into()));
        }
        let mut seen = Vec::new();
        for pipe in &self.shared {
            if !(pipe.throughput > 0.0 && pipe.throughput.is_finite()) {
                return Err(InCoreError::NonPositive("shared pipe throughput".into()));
            }
            for class in &pipe.classes {
                if seen.contains(class) {
                    return Err(InCoreError::DuplicatePipeMember(*class));
                }
                seen.push(*class);
            }
            let overlapping = pipe.classes.iter().filter(|c| self.is_overlapping(**c)).count();
            if overlapping != 0 && overlapping != pipe.classes.len() {
                return Err(InCoreError::MixedPipe);
            }
        }
        Ok(())
    }
}

/// Overlapping and non-overlapping in-core cycles per cache line of work.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InCoreTimes {
    pub t_ol: f64,
    pub t_nol: f64,
}

/// Throughput bound from the instruction mix.
///
/// Each class (or shared pipe) needs `count / throughput` cycles; the
/// slowest overlapping one gives T_OL and the slowest non-overlapping one
/// gives T_nOL. Retirement bandwidth caps the whole loop body, so it only
/// raises T_OL when it exceeds `max(T_OL, T_nOL)`.
pub fn resource_bound(mix: &InstructionMix, units: &UnitThroughputs) -> Result<InCoreTimes, InCoreError> {
    mix.validate()?;
    let mut t_ol: f64 = 0.0;
    let mut t_nol: f64 = 0.0;
    let mut shared_counts = vec![0.0; units.shared.len()];

    for class in InstrClass::ALL {
        let count = mix.count(class);
        if count == 0.0 || class == InstrClass::Other {
            continue;
        }
        match units.pipe(class) {
            Pipe::Shared(i) => shared_counts[i] += count,
            Pipe::Class(c) => {
                let tp = units.throughput(c);
                if tp == 0.0 {
                    return Err(InCoreError::UnsupportedClass(class));
                }
                let cycles = count / tp;
                if units.is_overlapping(class) {
                    t_ol = t_ol.max(cycles);
                } else {
                    t_nol = t_nol.max(cycles);
                }
            }
        }
    }
    for (pipe, count) in units.shared.iter().zip(shared_counts) {
        if count == 0.0 {
            continue;
        }
        let cycles = count / pipe.throughput;
        if pipe.classes.iter().all(|c| units.is_overlapping(*c)) {
            t_ol = t_ol.max(cycles);
        } else {
            t_nol = t_nol.max(cycles);
        }
    }

    // uop weights are 1 for every class, so both counting modes agree here
    let retire = mix.total() / units.retirement_width;
    if retire > t_ol.max(t_nol) {
        t_ol = retire;
    }
    Ok(InCoreTimes { t_ol, t_nol })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainLink {
    pub class: InstrClass,
    pub latency: u32,
}

/// Loop-carried dependency chain of one partial sum, replicated over
/// `unroll` independent partial sums per loop iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependencyChain {
    pub links: Vec<ChainLink>,
    pub unroll: u32,
    pub cls_per_iteration: f64,
}

impl DependencyChain {
    pub fn validate(&self) -> Result<(), InCoreError> {
        if self.links.is_empty() {
            return Err(InCoreError::EmptyChain);
        }
        if self.links.iter().any(|l| l.latency == 0) {
            return Err(InCoreError::NonPositive("chain link latency".into()));
        }
        if self.unroll == 0 {
            return Err(InCoreError::NonPositive("chain.unroll".into()));
        }
        if !(self.cls_per_iteration > 0.0 && self.cls_per_iteration.is_finite()) {
            return Err(InCoreError::NonPositive("chain.cls_per_iteration".into()));
        }
        Ok(())
    }
}

/// Cycles per loop iteration imposed by the chain.
///
/// Walking the chain once around the loop, consecutive links on different
/// pipes are separated by the producer's latency. Consecutive links on the
/// same pipe must additionally wait for the other `unroll - 1` partial sums
/// to issue the same step, i.e. `ceil(unroll / pipe throughput)` cycles.
/// The closing link feeds the first link of the next iteration. No pipe can
/// issue its `unroll * links on pipe` operations faster than its throughput
/// allows, which bounds the result from below.
pub fn recurrence_cycles_per_iteration(chain: &DependencyChain, units: &UnitThroughputs) -> Result<u32, InCoreError> {
    chain.validate()?;
    let n = chain.links.len();
    let mut cycles = 0u32;
    let mut per_pipe: Vec<(Pipe, u32)> = Vec::new();
    for i in 0..n {
        let producer = chain.links[i];
        let consumer = chain.links[(i + 1) % n];
        let pipe = units.pipe(producer.class);
        let tp = units.pipe_throughput(pipe);
        if tp == 0.0 {
            return Err(InCoreError::UnsupportedClass(producer.class));
        }
        let gap = if pipe == units.pipe(consumer.class) {
            let issue_spacing = (f64::from(chain.unroll) / tp).ceil() as u32;
            producer.latency.max(issue_spacing)
        } else {
            producer.latency
        };
        cycles += gap;
        match per_pipe.iter_mut().find(|(p, _)| *p == pipe) {
            Some((_, count)) => *count += 1,
            None => per_pipe.push((pipe, 1)),
        }
    }
    let occupancy = per_pipe
        .iter()
        .map(|&(pipe, count)| (f64::from(count * chain.unroll) / units.pipe_throughput(pipe)).ceil() as u32)
        .max()
        .unwrap_or(0);
    Ok(cycles.max(occupancy))
}

/// Recurrence bound in cycles per cache line of work.
pub fn recurrence_bound(chain: &DependencyChain, units: &UnitThroughputs) -> Result<f64, InCoreError> {
    let per_iteration = recurrence_cycles_per_iteration(chain, units)?;
    Ok(f64::from(per_iteration) / chain.cls_per_iteration)
}

/// Explicit replacements for derived in-core times.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InCoreOverrides {
    pub t_ol: Option<f64>,
    pub t_nol: Option<f64>,
}

/// `max(resource bound, recurrence bound)` for T_OL, resource bound for
/// T_nOL, each replaced by an explicit override when one is given.
pub fn in_core_times(
    mix: &InstructionMix,
    chain: Option<&DependencyChain>,
    overrides: InCoreOverrides,
    units: &UnitThroughputs,
) -> Result<InCoreTimes, InCoreError> {
    let resource = resource_bound(mix, units)?;
    let recurrence = match chain {
        Some(c) => recurrence_bound(c, units)?,
        None => 0.0,
    };
    Ok(InCoreTimes {
        t_ol: overrides.t_ol.unwrap_or(resource.t_ol.max(recurrence)),
        t_nol: overrides.t_nol.unwrap_or(resource.t_nol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn haswell() -> UnitThroughputs {
        UnitThroughputs {
            load: 2.0,
            store: 1.0,
            add: 1.0,
            mul: 2.0,
            fma: 2.0,
            prefetch: 2.0,
            retirement_width: 4.0,
            retirement_counts: RetirementCounts::Uops,
            non_overlapping: vec![InstrClass::Load, InstrClass::Store],
            shared: vec![],
        }
    }

    fn power8() -> UnitThroughputs {
        UnitThroughputs {
            load: 2.0,
            store: 2.0,
            add: 2.0,
            mul: 2.0,
            fma: 2.0,
            prefetch: 2.0,
            retirement_width: 8.0,
            retirement_counts: RetirementCounts::Instructions,
            non_overlapping: vec![],
            shared: vec![
                SharedPipe {
                    classes: vec![InstrClass::Load, InstrClass::Store],
                    throughput: 2.0,
                },
                SharedPipe {
                    classes: vec![InstrClass::Add, InstrClass::Mul, InstrClass::Fma],
                    throughput: 2.0,
                },
            ],
        }
    }

    fn chain(links: &[(InstrClass, u32)], unroll: u32, cls: f64) -> DependencyChain {
        DependencyChain {
            links: links.iter().map(|&(class, latency)| ChainLink { class, latency }).collect(),
            unroll,
            cls_per_iteration: cls,
        }
    }

    use InstrClass::{Add, Fma};

    #[test]
    fn haswell_naive_dot() {
        let mix = InstructionMix {
            loads: 4.0,
            fmas: 2.0,
            ..Default::default()
        };
        let t = resource_bound(&mix, &haswell()).unwrap();
        assert_eq!(t, InCoreTimes { t_ol: 1.0, t_nol: 2.0 });
    }

    #[test]
    fn power8_kahan_is_arithmetic_bound() {
        let mix = InstructionMix {
            loads: 16.0,
            fmas: 8.0,
            adds: 24.0,
            ..Default::default()
        };
        let t = resource_bound(&mix, &power8()).unwrap();
        assert_eq!(t, InCoreTimes { t_ol: 16.0, t_nol: 0.0 });
    }

    #[test]
    fn empty_mix() {
        let t = resource_bound(&InstructionMix::default(), &haswell()).unwrap();
        assert_eq!(t, InCoreTimes { t_ol: 0.0, t_nol: 0.0 });
    }

    #[test]
    fn unsupported_class() {
        let mut units = haswell();
        units.fma = 0.0;
        let mix = InstructionMix {
            fmas: 1.0,
            ..Default::default()
        };
        assert_eq!(
            resource_bound(&mix, &units),
            Err(InCoreError::UnsupportedClass(InstrClass::Fma))
        );
    }

    #[test]
    fn retirement_raises_t_ol_only_past_core_time() {
        let mix = InstructionMix {
            loads: 2.0,
            adds: 1.0,
            other: 9.0,
            ..Default::default()
        };
        let t = resource_bound(&mix, &haswell()).unwrap();
        assert_eq!(t, InCoreTimes { t_ol: 3.0, t_nol: 1.0 });
    }

    #[test]
    fn invalid_counts() {
        let mix = InstructionMix {
            adds: -1.0,
            ..Default::default()
        };
        assert!(matches!(resource_bound(&mix, &haswell()), Err(InCoreError::InvalidCount { .. })));
    }

    #[test]
    fn kahan_fma_chains() {
        let units = haswell();
        let pure_add = chain(&[(Fma, 5), (Add, 3), (Add, 3), (Add, 3)], 5, 2.5);
        assert_eq!(recurrence_cycles_per_iteration(&pure_add, &units), Ok(18));
        assert!((recurrence_bound(&pure_add, &units).unwrap() - 7.2).abs() < 1e-12);

        let fma_trick = chain(&[(Fma, 5), (Add, 3), (Fma, 5), (Add, 3)], 5, 2.5);
        assert_eq!(recurrence_cycles_per_iteration(&fma_trick, &units), Ok(16));
        assert!((recurrence_bound(&fma_trick, &units).unwrap() - 6.4).abs() < 1e-12);

        let four_way = chain(&[(Fma, 5), (Add, 3), (Add, 3), (Add, 3)], 4, 2.0);
        assert_eq!(recurrence_bound(&four_way, &units), Ok(8.0));
    }

    #[test]
    fn single_link_chain_is_its_latency() {
        let c = chain(&[(Add, 3)], 1, 1.0);
        assert_eq!(recurrence_bound(&c, &haswell()), Ok(3.0));
    }

    #[test]
    fn chain_validation() {
        assert_eq!(
            recurrence_bound(&chain(&[], 1, 1.0), &haswell()),
            Err(InCoreError::EmptyChain)
        );
        assert!(recurrence_bound(&chain(&[(Add, 3)], 0, 1.0), &haswell()).is_err());
        assert!(recurrence_bound(&chain(&[(Add, 3)], 1, 0.0), &haswell()).is_err());
    }

    #[test]
    fn in_core_combines_bounds() {
        let units = haswell();
        let avx = InstructionMix {
            loads: 4.0,
            muls: 2.0,
            adds: 8.0,
            ..Default::default()
        };
        let avx_chain = chain(&[(Add, 3), (Add, 3), (Add, 3), (Add, 3)], 4, 2.0);
        let t = in_core_times(&avx, Some(&avx_chain), InCoreOverrides::default(), &units).unwrap();
        assert_eq!(t, InCoreTimes { t_ol: 8.0, t_nol: 2.0 });

        let fma5 = InstructionMix {
            loads: 4.0,
            fmas: 4.0,
            adds: 4.0,
            ..Default::default()
        };
        let fma5_chain = chain(&[(Fma, 5), (Add, 3), (Fma, 5), (Add, 3)], 5, 2.5);
        let t = in_core_times(&fma5, Some(&fma5_chain), InCoreOverrides::default(), &units).unwrap();
        assert!((t.t_ol - 6.4).abs() < 1e-12);
        assert_eq!(t.t_nol, 2.0);

        let o = InCoreOverrides {
            t_ol: None,
            t_nol: Some(6.0),
        };
        let t = in_core_times(&fma5, None, o, &units).unwrap();
        assert_eq!(t, InCoreTimes { t_ol: 4.0, t_nol: 6.0 });
    }

    #[test]
    fn mixed_shared_pipe_is_rejected() {
        let mut units = haswell();
        units.shared.push(SharedPipe {
            classes: vec![InstrClass::Load, InstrClass::Add],
            throughput: 1.0,
        });
        assert_eq!(units.validate(), Err(InCoreError::MixedPipe));
    }
}
