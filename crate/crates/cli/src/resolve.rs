//! Machine and kernel references: built-in names or file paths.

use std::path::Path;

use ecm_core::bench::host::parse_size;
use ecm_core::bench::log_sizes;
use ecm_core::catalog::{builtin_kernel, builtin_machine, load_kernel, load_machine, KernelDescription, MachineDescription};

use crate::Failure;

fn is_path(reference: &str) -> bool {
    reference.ends_with(".toml") || reference.contains(std::path::MAIN_SEPARATOR) || Path::new(reference).is_file()
}

pub fn machine(reference: &str) -> Result<MachineDescription, Failure> {
    if is_path(reference) {
        Ok(load_machine(reference)?)
    } else {
        Ok(builtin_machine(reference)?)
    }
}

/// A kernel file, or the built-in kernel of that name for `machine`.
pub fn kernel(machine: &MachineDescription, reference: &str) -> Result<KernelDescription, Failure> {
    if is_path(reference) {
        Ok(load_kernel(reference)?)
    } else {
        Ok(builtin_kernel(&machine.name, reference)?)
    }
}

/// `16K,1M,64M` or `4K..64M`; sizes in a range are whole multiples of
/// `granule`.
pub fn sizes(text: &str, granule: u64) -> Result<Vec<u64>, Failure> {
    let size = |s: &str| parse_size(s).ok_or_else(|| Failure::Usage(format!("bad size `{s}` in --sizes")));
    let mut sizes = match text.split_once("..") {
        Some((lo, hi)) => log_sizes(size(lo)?, size(hi)?, 4, granule),
        None => text.split(',').map(size).collect::<Result<Vec<_>, _>>()?,
    };
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.is_empty() {
        return Err(Failure::Usage(format!("--sizes `{text}` selects nothing")));
    }
    Ok(sizes)
}
