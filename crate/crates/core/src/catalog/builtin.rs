use super::{CatalogError, KernelDescription, MachineDescription};

pub const MACHINE_NAMES: [&str; 4] = ["hsw", "bdw", "knc", "pwr8"];

macro_rules! kernels {
    ($machine:literal: $($kernel:literal),+ $(,)?) => {
        &[$(($kernel, include_str!(concat!("../../catalog/kernels/", $machine, "/", $kernel, ".toml")))),+]
    };
}

type Files = &'static [(&'static str, &'static str)];

fn machine_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "hsw" => include_str!("../../catalog/machines/hsw.toml"),
        "bdw" => include_str!("../../catalog/machines/bdw.toml"),
        "knc" => include_str!("../../catalog/machines/knc.toml"),
        "pwr8" => include_str!("../../catalog/machines/pwr8.toml"),
        _ => return None,
    })
}

fn kernel_sources(machine: &str) -> Option<Files> {
    Some(match machine {
        "hsw" => kernels!("hsw": "naive-dot", "kahan-avx", "kahan-fma4", "kahan-fma5"),
        "bdw" => kernels!("bdw": "naive-dot", "kahan-avx", "kahan-fma4", "kahan-fma5"),
        "knc" => kernels!("knc": "naive-dot", "kahan-knc", "kahan-knc-l1", "kahan-knc-l2", "kahan-knc-mem"),
        "pwr8" => kernels!("pwr8": "naive-dot", "kahan-vsx"),
        _ => return None,
    })
}

pub fn builtin_machine(name: &str) -> Result<MachineDescription, CatalogError> {
    let text = machine_source(name).ok_or_else(|| CatalogError::UnknownMachine(name.to_string()))?;
    MachineDescription::from_toml(text)
}

pub fn builtin_machines() -> Vec<MachineDescription> {
    MACHINE_NAMES
        .iter()
        .map(|n| builtin_machine(n).expect("built-in machine is valid"))
        .collect()
}

pub fn builtin_kernel_names(machine: &str) -> Result<Vec<&'static str>, CatalogError> {
    let files = kernel_sources(machine).ok_or_else(|| CatalogError::UnknownMachine(machine.to_string()))?;
    Ok(files.iter().map(|(n, _)| *n).collect())
}

pub fn builtin_kernel(machine: &str, kernel: &str) -> Result<KernelDescription, CatalogError> {
    let files = kernel_sources(machine).ok_or_else(|| CatalogError::UnknownMachine(machine.to_string()))?;
    let (_, text) = files
        .iter()
        .find(|(n, _)| *n == kernel)
        .ok_or_else(|| CatalogError::UnknownKernel {
            machine: machine.to_string(),
            kernel: kernel.to_string(),
        })?;
    KernelDescription::from_toml(text)
}

/// Every built-in (machine, kernel) pair.
pub fn builtin_catalog() -> Vec<(MachineDescription, KernelDescription)> {
    MACHINE_NAMES
        .iter()
        .flat_map(|m| {
            let machine = builtin_machine(m).expect("built-in machine is valid");
            builtin_kernel_names(m)
                .expect("known machine")
                .into_iter()
                .map(move |k| (machine.clone(), builtin_kernel(m, k).expect("built-in kernel is valid")))
        })
        .collect()
}
