//! Host topology from sysfs, and best-effort thread pinning.

use std::fs;
use std::path::Path;

use crate::catalog::MachineDescription;

pub fn available_cpus() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Parses kernel cpu lists such as `0-3,8,10-11`.
pub fn parse_cpu_list(text: &str) -> Vec<usize> {
    let mut cpus = Vec::new();
    for part in text.trim().split(',').filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                if let (Ok(lo), Ok(hi)) = (lo.parse::<usize>(), hi.parse::<usize>()) {
                    cpus.extend(lo..=hi);
                }
            }
            None => cpus.extend(part.parse::<usize>().ok()),
        }
    }
    cpus
}

/// Parses cache sizes such as `48K`, `2048K`, `32M`.
pub fn parse_size(text: &str) -> Option<u64> {
    let t = text.trim();
    let (digits, mult) = match t.chars().last()? {
        'K' => (&t[..t.len() - 1], 1 << 10),
        'M' => (&t[..t.len() - 1], 1 << 20),
        'G' => (&t[..t.len() - 1], 1 << 30),
        _ => (t, 1),
    };
    digits.parse::<u64>().ok().map(|v| v * mult)
}

/// CPUs of each NUMA node; a single node with every CPU when sysfs has no
/// node information.
pub fn memory_domains() -> Vec<Vec<usize>> {
    let mut nodes: Vec<(usize, Vec<usize>)> = fs::read_dir("/sys/devices/system/node")
        .into_iter()
        .flatten()
        .flatten()
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let id = name.strip_prefix("node")?.parse::<usize>().ok()?;
            let cpus = parse_cpu_list(&fs::read_to_string(e.path().join("cpulist")).ok()?);
            (!cpus.is_empty()).then_some((id, cpus))
        })
        .collect();
    nodes.sort();
    if nodes.is_empty() {
        return vec![(0..available_cpus()).collect()];
    }
    nodes.into_iter().map(|(_, c)| c).collect()
}

/// CPUs interleaved across memory domains: first CPU of each domain, then
/// the second of each, and so on.
pub fn round_robin_cpus() -> Vec<usize> {
    interleave(&memory_domains())
}

pub fn interleave(domains: &[Vec<usize>]) -> Vec<usize> {
    let longest = domains.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest)
        .flat_map(|i| domains.iter().filter_map(move |d| d.get(i).copied()))
        .collect()
}

/// Data and unified cache capacities of CPU 0 by level, L1 first.
pub fn cache_capacities() -> Vec<u64> {
    let base = Path::new("/sys/devices/system/cpu/cpu0/cache");
    let mut levels: Vec<(u32, u64)> = fs::read_dir(base)
        .into_iter()
        .flatten()
        .flatten()
        .filter_map(|e| {
            let dir = e.path();
            let read = |f: &str| fs::read_to_string(dir.join(f)).ok();
            if read("type")?.trim() == "Instruction" {
                return None;
            }
            let level = read("level")?.trim().parse().ok()?;
            Some((level, parse_size(&read("size")?)?))
        })
        .collect();
    levels.sort();
    levels.dedup_by_key(|(l, _)| *l);
    levels.into_iter().map(|(_, s)| s).collect()
}

/// `machine` with cache capacities replaced by the host's, level by level
/// where both know the level. Capacities place the comparison windows, so
/// this lets a host measurement be compared against any machine model.
pub fn with_host_capacities(machine: &MachineDescription) -> MachineDescription {
    with_capacities(machine, &cache_capacities())
}

pub fn with_capacities(machine: &MachineDescription, capacities: &[u64]) -> MachineDescription {
    let mut m = machine.clone();
    if let Some(&l1) = capacities.first() {
        m.l1_bytes = Some(l1);
    }
    let caches = m.levels.len().saturating_sub(1);
    for (level, cap) in m.levels.iter_mut().take(caches).zip(capacities.iter().skip(1)) {
        level.capacity_bytes = Some(*cap);
    }
    m
}

/// Pins the calling thread to `cpu`; returns false (and warns once) where
/// affinity cannot be set.
pub fn pin_current_thread(cpu: usize) -> bool {
    let ok = set_affinity(cpu);
    if !ok {
        static WARNED: std::sync::Once = std::sync::Once::new();
        WARNED.call_once(|| eprintln!("warning: could not pin thread to cpu {cpu}; running unpinned"));
    }
    ok
}

#[cfg(target_os = "linux")]
fn set_affinity(cpu: usize) -> bool {
    // SAFETY: cpu_set_t is plain data; CPU_SET bounds-checks against the set
    // size and sched_setaffinity only reads it.
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        if cpu >= 8 * std::mem::size_of::<libc::cpu_set_t>() {
            return false;
        }
        libc::CPU_SET(cpu, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
    }
}

#[cfg(not(target_os = "linux"))]
fn set_affinity(_cpu: usize) -> bool {
    false
}
