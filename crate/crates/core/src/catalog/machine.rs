use serde::{Deserialize, Serialize};

use super::{schema_error, CatalogError, SCHEMA_VERSION};
use crate::incore::UnitThroughputs;
use crate::model::OverlapPolicy;

/// One data-source level beyond L1 and the boundary that feeds it inward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineLevel {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_bpc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sustained_gbs: Option<f64>,
    #[serde(default)]
    pub penalty_cy: f64,
    /// Capacity of this level (per core for private caches); used to place
    /// benchmark working sets. Absent for main memory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_bytes: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelBandwidth {
    BytesPerCycle(f64),
    SustainedGbs(f64),
}

impl MachineLevel {
    /// Validated descriptions carry exactly one of the two bandwidth keys.
    pub fn bandwidth(&self) -> LevelBandwidth {
        match (self.bandwidth_bpc, self.sustained_gbs) {
            (Some(b), _) => LevelBandwidth::BytesPerCycle(b),
            (None, Some(g)) => LevelBandwidth::SustainedGbs(g),
            (None, None) => unreachable!("level `{}` without bandwidth", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineDescription {
    pub schema: u32,
    pub name: String,
    pub frequency_ghz: f64,
    pub cores: u32,
    pub memory_domains: u32,
    pub cacheline_bytes: u32,
    pub simd_bytes: u32,
    #[serde(default)]
    pub overlap_policy: OverlapPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1_bytes: Option<u64>,
    pub levels: Vec<MachineLevel>,
    pub throughputs: UnitThroughputs,
}

impl MachineDescription {
    pub fn from_toml(text: &str) -> Result<Self, CatalogError> {
        let machine: Self = toml::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
        machine.validate()?;
        Ok(machine)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("machine description serializes")
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.schema != SCHEMA_VERSION {
            return Err(schema_error("schema", format!("must be {SCHEMA_VERSION}")));
        }
        if self.name.is_empty() {
            return Err(schema_error("name", "must not be empty"));
        }
        if !(self.frequency_ghz > 0.0 && self.frequency_ghz.is_finite()) {
            return Err(schema_error("frequency_ghz", "must be > 0"));
        }
        if self.cores == 0 {
            return Err(schema_error("cores", "must be >= 1"));
        }
        if self.memory_domains == 0 || self.memory_domains > self.cores {
            return Err(schema_error("memory_domains", "must be in 1..=cores"));
        }
        if !matches!(self.cacheline_bytes, 64 | 128) {
            return Err(schema_error("cacheline_bytes", "must be 64 or 128"));
        }
        if self.simd_bytes == 0 {
            return Err(schema_error("simd_bytes", "must be >= 1"));
        }
        if self.levels.is_empty() {
            return Err(schema_error("levels", "needs at least one level"));
        }
        for (i, level) in self.levels.iter().enumerate() {
            let field = |key: &str| format!("levels[{i}].{key}");
            if level.name.is_empty() || !level.name.chars().all(|c| c.is_ascii_alphanumeric()) {
                return Err(schema_error(field("name"), "must be a non-empty alphanumeric label"));
            }
            if level.name == "L1" || self.levels[..i].iter().any(|l| l.name == level.name) {
                return Err(schema_error(field("name"), "must be unique and not `L1`"));
            }
            match (level.bandwidth_bpc, level.sustained_gbs) {
                (Some(_), Some(_)) | (None, None) => {
                    return Err(schema_error(
                        field("bandwidth_bpc"),
                        "exactly one of bandwidth_bpc and sustained_gbs is required",
                    ))
                }
                (Some(b), None) if !(b > 0.0 && b.is_finite()) => {
                    return Err(schema_error(field("bandwidth_bpc"), "must be > 0"))
                }
                (None, Some(g)) if !(g > 0.0 && g.is_finite()) => {
                    return Err(schema_error(field("sustained_gbs"), "must be > 0"))
                }
                _ => {}
            }
            if !(level.penalty_cy >= 0.0 && level.penalty_cy.is_finite()) {
                return Err(schema_error(field("penalty_cy"), "must be >= 0"));
            }
        }
        self.throughputs
            .validate()
            .map_err(|e| schema_error("throughputs", e.to_string()))?;
        Ok(())
    }

    /// Capacity per level in data-source order, L1 first. Memory and
    /// undescribed levels are `None`.
    pub fn capacities(&self) -> Vec<Option<u64>> {
        std::iter::once(self.l1_bytes)
            .chain(self.levels.iter().map(|l| l.capacity_bytes))
            .collect()
    }
}
