//! ECM composition: in-core and transfer contributions folded into per-level
//! runtime predictions, performance figures, saturation points and multicore
//! scaling curves.
//!
//! All cycle quantities are per cache line of work ("CL-work"). Performance
//! figures come out in 10^9 work units per second when frequencies are given
//! in GHz.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{field} must be finite and non-negative, got {value}")]
    NegativeOrNonFinite { field: String, value: f64 },
    #[error("per-level T_nOL needs {expected} entries (one per data source level), got {got}")]
    LevelCount { expected: usize, got: usize },
    #[error("per-level T_nOL must be non-decreasing outward (level {level})")]
    DecreasingNonOverlap { level: usize },
    #[error("degenerate prediction: level {level} has zero cycles")]
    DegeneratePrediction { level: String },
    #[error("not memory-bound model: prediction has no outermost transfer")]
    NotMemoryBound,
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

fn check_cycles(field: &str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(ModelError::NegativeOrNonFinite {
            field: field.to_string(),
            value,
        })
    }
}

/// How transfer contributions combine on the way out of the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapPolicy {
    /// Any transfer blocks every other transfer in the same cycle, so all
    /// contributions add up.
    #[default]
    SerialTransfers,
    /// The outermost reload overlaps with the transfer on the boundary just
    /// inside it (e.g. L2 evicts to a victim L3 while memory refills L2).
    FullOverlapOutermost,
}

/// Transfer time across one boundary of the memory hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTransfer {
    name: String,
    cycles: f64,
    penalty: f64,
}

impl LevelTransfer {
    pub fn new(name: impl Into<String>, cycles: f64, penalty: f64) -> Result<Self, ModelError> {
        let name = name.into();
        check_cycles(&format!("{name} cycles"), cycles)?;
        check_cycles(&format!("{name} penalty"), penalty)?;
        Ok(Self {
            name,
            cycles,
            penalty,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn cycles(&self) -> f64 {
        self.cycles
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    /// Bandwidth cycles plus latency penalty.
    pub fn total(&self) -> f64 {
        self.cycles + self.penalty
    }
}

/// Default data-source level names for a hierarchy with `transfers`
/// boundaries: `L1`, `L2`, ... and `MEM` for the outermost one.
pub fn default_level_names(transfers: usize) -> Vec<String> {
    (0..=transfers)
        .map(|i| {
            if i > 0 && i == transfers {
                "MEM".to_string()
            } else {
                format!("L{}", i + 1)
            }
        })
        .collect()
}

/// Boundary label between two data-source levels, e.g. `L1L2`, `L3MEM`.
pub fn transfer_label(inner: &str, outer: &str) -> String {
    format!("{inner}{outer}")
}

/// The ECM input tuple `{T_OL || T_nOL | T_L1L2 | ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcmInputs {
    t_ol: f64,
    t_nol: f64,
    /// Optional T_nOL per data-source level (L1 first); used when the code
    /// variant changes with the level the data comes from.
    t_nol_by_level: Option<Vec<f64>>,
    transfers: Vec<LevelTransfer>,
    level_names: Vec<String>,
}

impl EcmInputs {
    pub fn new(t_ol: f64, t_nol: f64, transfers: Vec<LevelTransfer>) -> Result<Self, ModelError> {
        check_cycles("T_OL", t_ol)?;
        check_cycles("T_nOL", t_nol)?;
        let level_names = default_level_names(transfers.len());
        Ok(Self {
            t_ol,
            t_nol,
            t_nol_by_level: None,
            transfers,
            level_names,
        })
    }

    /// Replace the data-source level names (L1 first). The transfer labels
    /// are rebuilt from them.
    pub fn with_level_names(mut self, names: Vec<String>) -> Result<Self, ModelError> {
        if names.len() != self.transfers.len() + 1 {
            return Err(ModelError::LevelCount {
                expected: self.transfers.len() + 1,
                got: names.len(),
            });
        }
        for (i, t) in self.transfers.iter_mut().enumerate() {
            t.name = transfer_label(&names[i], &names[i + 1]);
        }
        self.level_names = names;
        Ok(self)
    }

    pub fn with_level_t_nol(mut self, per_level: Vec<f64>) -> Result<Self, ModelError> {
        if per_level.len() != self.transfers.len() + 1 {
            return Err(ModelError::LevelCount {
                expected: self.transfers.len() + 1,
                got: per_level.len(),
            });
        }
        for (i, v) in per_level.iter().enumerate() {
            check_cycles("T_nOL", *v)?;
            if i > 0 && *v < per_level[i - 1] {
                return Err(ModelError::DecreasingNonOverlap { level: i });
            }
        }
        self.t_nol = per_level[0];
        self.t_nol_by_level = Some(per_level);
        Ok(self)
    }

    pub fn t_ol(&self) -> f64 {
        self.t_ol
    }

    /// T_nOL of the L1 variant.
    pub fn t_nol(&self) -> f64 {
        self.t_nol
    }

    pub fn t_nol_by_level(&self) -> Option<&[f64]> {
        self.t_nol_by_level.as_deref()
    }

    /// T_nOL in effect when data comes from level `level` (0 = L1).
    pub fn t_nol_at(&self, level: usize) -> f64 {
        match &self.t_nol_by_level {
            Some(v) => v[level],
            None => self.t_nol,
        }
    }

    pub fn transfers(&self) -> &[LevelTransfer] {
        &self.transfers
    }

    pub fn level_names(&self) -> &[String] {
        &self.level_names
    }

    pub fn level_count(&self) -> usize {
        self.transfers.len() + 1
    }
}

/// Composed prediction `{T_core | T_L2 | ... | T_Mem}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcmPrediction {
    levels: Vec<(String, f64)>,
    /// Bandwidth part (no penalty) of the outermost transfer, the shared
    /// bottleneck for multicore scaling.
    bottleneck_cycles: Option<f64>,
}

impl EcmPrediction {
    pub fn new(levels: Vec<(String, f64)>) -> Result<Self, ModelError> {
        if levels.is_empty() {
            return Err(ModelError::LevelCount {
                expected: 1,
                got: 0,
            });
        }
        for (name, c) in &levels {
            check_cycles(name, *c)?;
        }
        Ok(Self {
            levels,
            bottleneck_cycles: None,
        })
    }

    pub fn with_bottleneck(mut self, cycles: f64) -> Result<Self, ModelError> {
        check_cycles("bottleneck", cycles)?;
        self.bottleneck_cycles = Some(cycles);
        Ok(self)
    }

    pub fn levels(&self) -> &[(String, f64)] {
        &self.levels
    }

    pub fn cycles(&self) -> Vec<f64> {
        self.levels.iter().map(|(_, c)| *c).collect()
    }

    pub fn core(&self) -> f64 {
        self.levels[0].1
    }

    pub fn outermost(&self) -> f64 {
        self.levels[self.levels.len() - 1].1
    }

    pub fn bottleneck_cycles(&self) -> Option<f64> {
        self.bottleneck_cycles
    }
}

/// `T_ECM = max(T_OL, T_nOL + T_data)` for every data-source level.
pub fn compose_prediction(inputs: &EcmInputs, policy: OverlapPolicy) -> EcmPrediction {
    let transfers = inputs.transfers();
    let outermost = transfers.len();
    let mut levels = Vec::with_capacity(outermost + 1);
    levels.push((
        inputs.level_names()[0].clone(),
        inputs.t_ol().max(inputs.t_nol_at(0)),
    ));

    let mut data = 0.0;
    for k in 1..=outermost {
        let contribution = transfers[k - 1].total();
        let t_data = if policy == OverlapPolicy::FullOverlapOutermost && k == outermost && k >= 2 {
            let inner = transfers[k - 2].total();
            data - inner + inner.max(contribution)
        } else {
            data + contribution
        };
        data += contribution;
        levels.push((
            inputs.level_names()[k].clone(),
            inputs.t_ol().max(inputs.t_nol_at(k) + t_data),
        ));
    }

    EcmPrediction {
        levels,
        bottleneck_cycles: transfers.last().map(LevelTransfer::cycles),
    }
}

/// Unit of work the performance figures are expressed in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkUnit {
    pub name: String,
    pub per_cl: u32,
    pub flops_per_unit: u32,
}

impl WorkUnit {
    pub fn new(name: impl Into<String>, per_cl: u32, flops_per_unit: u32) -> Result<Self, ModelError> {
        if per_cl == 0 {
            return Err(ModelError::NonPositive("work.per_cl"));
        }
        if flops_per_unit == 0 {
            return Err(ModelError::NonPositive("work.flops_per_unit"));
        }
        Ok(Self {
            name: name.into(),
            per_cl,
            flops_per_unit,
        })
    }

    pub fn updates(per_cl: u32) -> Self {
        Self {
            name: "update".into(),
            per_cl,
            flops_per_unit: 2,
        }
    }
}

/// `P = W / T_ECM` per level, in 10^9 work units per second for a GHz clock.
pub fn predicted_performance(
    pred: &EcmPrediction,
    work: &WorkUnit,
    frequency_ghz: f64,
) -> Result<Vec<(String, f64)>, ModelError> {
    if !(frequency_ghz > 0.0) {
        return Err(ModelError::NonPositive("frequency"));
    }
    pred.levels()
        .iter()
        .map(|(name, cycles)| {
            if *cycles == 0.0 {
                Err(ModelError::DegeneratePrediction { level: name.clone() })
            } else {
                Ok((name.clone(), f64::from(work.per_cl) * frequency_ghz / cycles))
            }
        })
        .collect()
}

/// Exact rational value of the shortest decimal that round-trips to `x`.
///
/// Cycle counts are entered as decimals (9.2, 26.8); this recovers the
/// decimal the user meant rather than the binary neighbour.
pub(crate) fn decimal_rational(x: f64) -> BigRational {
    let text = format!("{x:e}");
    let (mantissa, exponent) = text.split_once('e').expect("exponent notation");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: BigInt = format!("{int_part}{frac_part}").parse().expect("decimal digits");
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    }
}

/// `ceil(numerator / denominator)` over the decimal values of both operands.
pub(crate) fn decimal_ceil_ratio(numerator: f64, denominator: f64) -> BigInt {
    let ratio = decimal_rational(numerator) / decimal_rational(denominator);
    let (q, r) = ratio.numer().div_rem(ratio.denom());
    if r.is_positive() {
        q + 1
    } else {
        q
    }
}

/// Cores per memory domain needed to saturate the shared bottleneck,
/// `ceil(T_ECM^Mem / T_bottleneck)`.
///
/// The latency penalty is not part of the bottleneck: it is paid per core.
pub fn saturation_point(pred: &EcmPrediction) -> Result<u32, ModelError> {
    let bottleneck = pred.bottleneck_cycles().ok_or(ModelError::NotMemoryBound)?;
    saturation_cores(pred.outermost(), bottleneck)
}

pub fn saturation_cores(outermost_cycles: f64, bottleneck_cycles: f64) -> Result<u32, ModelError> {
    if !(bottleneck_cycles > 0.0) {
        return Err(ModelError::NotMemoryBound);
    }
    check_cycles("outermost prediction", outermost_cycles)?;
    let n = decimal_ceil_ratio(outermost_cycles, bottleneck_cycles);
    Ok(n.to_u32().unwrap_or(u32::MAX).max(1))
}

/// Performance once the bottleneck is saturated, `f * W_CL / T_bottleneck`.
pub fn saturated_performance(
    bottleneck_cycles: f64,
    work: &WorkUnit,
    frequency_ghz: f64,
) -> Result<f64, ModelError> {
    if !(bottleneck_cycles > 0.0) {
        return Err(ModelError::NonPositive("bottleneck cycles"));
    }
    if !(frequency_ghz > 0.0) {
        return Err(ModelError::NonPositive("frequency"));
    }
    Ok(frequency_ghz * f64::from(work.per_cl) / bottleneck_cycles)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub cores: u32,
    pub performance: f64,
}

/// Chip-level performance as a function of active cores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCurve {
    pub points: Vec<ScalingPoint>,
    /// Chip-wide core count at which every domain is saturated.
    pub saturation_cores: u32,
    /// Chip-wide saturated performance.
    pub saturation_performance: f64,
}

/// Linear scaling per memory domain until the domain bottleneck saturates.
///
/// Cores are handed out round-robin over `domains`, so with two domains the
/// second core lands in the second domain.
pub fn scale_curve(
    pred: &EcmPrediction,
    work: &WorkUnit,
    frequency_ghz: f64,
    max_cores: u32,
    domains: u32,
) -> Result<ScalingCurve, ModelError> {
    if max_cores == 0 {
        return Err(ModelError::NonPositive("max_cores"));
    }
    if domains == 0 {
        return Err(ModelError::NonPositive("domains"));
    }
    let bottleneck = pred.bottleneck_cycles().ok_or(ModelError::NotMemoryBound)?;
    let n_s = saturation_point(pred)?;
    let single = predicted_performance(pred, work, frequency_ghz)?
        .last()
        .map(|(_, p)| *p)
        .expect("prediction has levels");
    let saturated = saturated_performance(bottleneck, work, frequency_ghz)?;

    let per_domain = |n: u32| {
        if n >= n_s {
            saturated
        } else {
            f64::from(n) * single
        }
    };
    let points = (1..=max_cores)
        .map(|cores| {
            let performance = (0..domains)
                .map(|d| {
                    let n = cores / domains + u32::from(d < cores % domains);
                    per_domain(n)
                })
                .sum();
            ScalingPoint { cores, performance }
        })
        .collect();

    Ok(ScalingCurve {
        points,
        saturation_cores: n_s.saturating_mul(domains),
        saturation_performance: saturated * f64::from(domains),
    })
}

impl ScalingCurve {
    /// Index of the first point at chip saturation, if the curve reaches it.
    pub fn saturation_index(&self) -> Option<usize> {
        self.points
            .iter()
            .position(|p| p.cores >= self.saturation_cores)
    }
}
