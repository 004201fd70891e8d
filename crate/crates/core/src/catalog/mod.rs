//! Machine and kernel descriptions: file loading, validation, binding a
//! kernel to a machine, and the built-in testbed catalog.

mod builtin;
mod kernel;
mod machine;

use std::path::Path;

use thiserror::Error;

use crate::incore::{in_core_times, InCoreError, InCoreOverrides};
use crate::model::{compose_prediction, transfer_label, EcmInputs, EcmPrediction, LevelTransfer, ModelError};

pub use builtin::{builtin_catalog, builtin_kernel, builtin_kernel_names, builtin_machine, builtin_machines, MACHINE_NAMES};
pub use kernel::{KernelDescription, KernelOverrides};
pub use machine::{LevelBandwidth, MachineDescription, MachineLevel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("schema violation: `{field}` {constraint}")]
    Schema { field: String, constraint: String },
    #[error("cannot bind kernel `{kernel}` to machine `{machine}`: {reason}")]
    Bind {
        kernel: String,
        machine: String,
        reason: String,
    },
    #[error("unknown machine `{0}`")]
    UnknownMachine(String),
    #[error("machine `{machine}` has no built-in kernel `{kernel}`")]
    UnknownKernel { machine: String, kernel: String },
    #[error(transparent)]
    InCore(#[from] InCoreError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub(crate) fn schema_error(field: impl Into<String>, constraint: impl Into<String>) -> CatalogError {
    CatalogError::Schema {
        field: field.into(),
        constraint: constraint.into(),
    }
}

fn read(path: &Path) -> Result<String, CatalogError> {
    std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_machine(path: impl AsRef<Path>) -> Result<MachineDescription, CatalogError> {
    MachineDescription::from_toml(&read(path.as_ref())?)
}

pub fn load_kernel(path: impl AsRef<Path>) -> Result<KernelDescription, CatalogError> {
    KernelDescription::from_toml(&read(path.as_ref())?)
}

fn bind_error(machine: &MachineDescription, kernel: &KernelDescription, reason: impl Into<String>) -> CatalogError {
    CatalogError::Bind {
        kernel: kernel.name.clone(),
        machine: machine.name.clone(),
        reason: reason.into(),
    }
}

/// Data-source level names for a kernel on a machine: `L1` followed by the
/// machine levels the kernel has traffic for.
pub fn bound_level_names(machine: &MachineDescription, kernel: &KernelDescription) -> Vec<String> {
    std::iter::once("L1".to_string())
        .chain(machine.levels.iter().take(kernel.traffic.len()).map(|l| l.name.clone()))
        .collect()
}

/// Per-boundary transfer times from bandwidths alone.
///
/// Cache bandwidths in B/cy give `CLs * CL bytes / bandwidth`; sustained
/// memory bandwidth in GB/s gives `CLs * CL bytes * f / b_s`. Penalties are
/// the machine's.
pub fn transfer_cycles(
    machine: &MachineDescription,
    kernel: &KernelDescription,
) -> Result<Vec<LevelTransfer>, CatalogError> {
    if kernel.traffic.len() > machine.levels.len() {
        return Err(bind_error(
            machine,
            kernel,
            format!(
                "kernel has traffic for {} levels, machine has {}",
                kernel.traffic.len(),
                machine.levels.len()
            ),
        ));
    }
    let names = bound_level_names(machine, kernel);
    let cl_bytes = f64::from(machine.cacheline_bytes);
    kernel
        .traffic
        .iter()
        .zip(&machine.levels)
        .enumerate()
        .map(|(i, (cls, level))| {
            let bytes = cls * cl_bytes;
            let cycles = match level.bandwidth() {
                LevelBandwidth::BytesPerCycle(b) => bytes / b,
                LevelBandwidth::SustainedGbs(gbs) => bytes * machine.frequency_ghz / gbs,
            };
            Ok(LevelTransfer::new(
                transfer_label(&names[i], &names[i + 1]),
                cycles,
                level.penalty_cy,
            )?)
        })
        .collect()
}

/// Full ECM input tuple for `kernel` running on `machine`.
pub fn bind(machine: &MachineDescription, kernel: &KernelDescription) -> Result<EcmInputs, CatalogError> {
    let names = bound_level_names(machine, kernel);
    let o = &kernel.overrides;
    for key in o.transfer_cy.keys().chain(o.penalty_cy.keys()) {
        if !names[1..].contains(key) {
            return Err(bind_error(machine, kernel, format!("override for unknown level `{key}`")));
        }
    }
    for key in o.t_nol_by_level.keys() {
        if !names.contains(key) {
            return Err(bind_error(machine, kernel, format!("T_nOL override for unknown level `{key}`")));
        }
    }

    let core = in_core_times(
        &kernel.mix,
        kernel.chain.as_ref(),
        InCoreOverrides {
            t_ol: o.t_ol,
            t_nol: o.t_nol,
        },
        &machine.throughputs,
    )?;

    let transfers = transfer_cycles(machine, kernel)?
        .into_iter()
        .zip(&names[1..])
        .map(|(t, level)| {
            let cycles = o.transfer_cy.get(level).copied().unwrap_or(t.cycles());
            let penalty = o.penalty_cy.get(level).copied().unwrap_or(t.penalty());
            LevelTransfer::new(t.name(), cycles, penalty)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut inputs = EcmInputs::new(core.t_ol, core.t_nol, transfers)?.with_level_names(names.clone())?;
    if !o.t_nol_by_level.is_empty() {
        let per_level = names
            .iter()
            .map(|n| o.t_nol_by_level.get(n).copied().unwrap_or(core.t_nol))
            .collect();
        inputs = inputs.with_level_t_nol(per_level)?;
    }
    Ok(inputs)
}

/// Bind and compose with the machine's overlap policy.
pub fn predict(machine: &MachineDescription, kernel: &KernelDescription) -> Result<EcmPrediction, CatalogError> {
    Ok(compose_prediction(&bind(machine, kernel)?, machine.overlap_policy))
}
