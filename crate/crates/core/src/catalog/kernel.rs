use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{schema_error, CatalogError, SCHEMA_VERSION};
use crate::incore::{DependencyChain, InstructionMix};
use crate::model::WorkUnit;

/// Replacements for derived model inputs, keyed by data-source level name
/// where per-level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_ol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_nol: Option<f64>,
    /// T_nOL of the code variant used when data comes from the named level.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub t_nol_by_level: BTreeMap<String, f64>,
    /// Transfer cycles into the named level's boundary, used verbatim.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub transfer_cy: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub penalty_cy: BTreeMap<String, f64>,
}

impl KernelOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDescription {
    pub schema: u32,
    pub name: String,
    pub max_unroll: u32,
    /// Cache lines moved across each boundary per cache line of work,
    /// innermost boundary first.
    pub traffic: Vec<f64>,
    pub work: WorkUnit,
    pub mix: InstructionMix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<DependencyChain>,
    #[serde(default, skip_serializing_if = "KernelOverrides::is_empty")]
    pub overrides: KernelOverrides,
}

fn check_non_negative(field: String, v: f64) -> Result<(), CatalogError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(schema_error(field, "must be finite and >= 0"))
    }
}

impl KernelDescription {
    pub fn from_toml(text: &str) -> Result<Self, CatalogError> {
        let kernel: Self = toml::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("kernel description serializes")
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.schema != SCHEMA_VERSION {
            return Err(schema_error("schema", format!("must be {SCHEMA_VERSION}")));
        }
        if self.name.is_empty() {
            return Err(schema_error("name", "must not be empty"));
        }
        if self.max_unroll == 0 {
            return Err(schema_error("max_unroll", "must be >= 1"));
        }
        if self.work.per_cl == 0 {
            return Err(schema_error("work.per_cl", "must be >= 1"));
        }
        if self.work.flops_per_unit == 0 {
            return Err(schema_error("work.flops_per_unit", "must be >= 1"));
        }
        for (i, t) in self.traffic.iter().enumerate() {
            check_non_negative(format!("traffic[{i}]"), *t)?;
        }
        self.mix.validate().map_err(|e| schema_error("mix", e.to_string()))?;
        if let Some(chain) = &self.chain {
            chain.validate().map_err(|e| schema_error("chain", e.to_string()))?;
            if chain.unroll > self.max_unroll {
                return Err(schema_error("chain.unroll", "must not exceed max_unroll"));
            }
        }
        let o = &self.overrides;
        if let Some(v) = o.t_ol {
            check_non_negative("overrides.t_ol".into(), v)?;
        }
        if let Some(v) = o.t_nol {
            check_non_negative("overrides.t_nol".into(), v)?;
        }
        for (table, map) in [
            ("t_nol_by_level", &o.t_nol_by_level),
            ("transfer_cy", &o.transfer_cy),
            ("penalty_cy", &o.penalty_cy),
        ] {
            for (level, v) in map {
                check_non_negative(format!("overrides.{table}.{level}"), *v)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{builtin_kernel, load_kernel};
    use crate::incore::InstrClass;

    #[test]
    fn chain_and_overrides_parse() {
        let k = builtin_kernel("hsw", "kahan-fma5").unwrap();
        let chain = k.chain.as_ref().unwrap();
        assert_eq!(chain.unroll, 5);
        assert_eq!(chain.cls_per_iteration, 2.5);
        assert_eq!(chain.links[2].class, InstrClass::Fma);
        assert!(k.overrides.is_empty());

        let k = builtin_kernel("bdw", "kahan-fma5").unwrap();
        assert_eq!(k.overrides.transfer_cy.get("MEM"), Some(&8.8));
        let k = builtin_kernel("bdw", "naive-dot").unwrap();
        assert_eq!(k.overrides.transfer_cy.get("MEM"), Some(&8.4));
    }

    #[test]
    fn canonical_form_round_trips() {
        for (machine, kernel) in [("hsw", "kahan-fma5"), ("knc", "kahan-knc"), ("pwr8", "naive-dot")] {
            let k = builtin_kernel(machine, kernel).unwrap();
            let text = k.to_toml();
            let again = KernelDescription::from_toml(&text).unwrap();
            assert_eq!(again, k);
            assert_eq!(again.to_toml(), text);
        }
    }

    #[test]
    fn unknown_override_key() {
        let text = builtin_kernel("hsw", "naive-dot")
            .unwrap()
            .to_toml()
            .replace("[mix]", "[overrides]\nt_core = 3.0\n\n[mix]");
        let err = KernelDescription::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("t_core"), "{err}");
    }

    #[test]
    fn unroll_beyond_register_budget() {
        let mut k = builtin_kernel("hsw", "kahan-fma5").unwrap();
        k.max_unroll = 4;
        let err = KernelDescription::from_toml(&k.to_toml()).unwrap_err();
        assert!(err.to_string().contains("chain.unroll"), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_kernel("/nonexistent/kernel.toml").unwrap_err();
        assert!(matches!(err, CatalogError::Io { .. }));
    }
}
