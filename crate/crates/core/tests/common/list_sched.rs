//! Cycle-by-cycle list scheduler for an unrolled reduction loop.
//!
//! Every iteration runs the chain once per partial sum (lane). An operation
//! may issue once its producer's result is ready, its pipe has a free unit in
//! that cycle and the issue width is not used up. Among ready operations the
//! oldest in program order (iteration, link, lane) goes first. The
//! steady-state distance between consecutive iterations is read off late in
//! the run.

use std::collections::HashMap;

use ecm_core::incore::{DependencyChain, Pipe, UnitThroughputs};

const ITERATIONS: usize = 48;

/// Steady-state cycles per loop iteration.
pub fn cycles_per_iteration(chain: &DependencyChain, units: &UnitThroughputs) -> u32 {
    let lanes = chain.unroll as usize;
    let links: Vec<(Pipe, u32)> = chain
        .links
        .iter()
        .map(|l| (units.pipe(l.class), l.latency))
        .collect();
    let width = units.retirement_width.floor() as usize;
    let capacity = |p: Pipe| units.pipe_throughput(p).floor() as usize;

    // Each lane is a strict sequence of operations, so only its next
    // operation can be ready.
    let total = ITERATIONS * links.len();
    let mut next = vec![0usize; lanes];
    let mut ready = vec![0u32; lanes];
    // issue cycle of the first link of every iteration, lane 0
    let mut starts = Vec::with_capacity(ITERATIONS);

    let mut cycle = 0u32;
    while next.iter().any(|&k| k < total) {
        let mut candidates: Vec<(usize, usize, usize)> = (0..lanes)
            .filter(|&l| next[l] < total && ready[l] <= cycle)
            .map(|l| (next[l] / links.len(), next[l] % links.len(), l))
            .collect();
        candidates.sort_unstable();
        let mut used: HashMap<Pipe, usize> = HashMap::new();
        let mut slots = width;
        for (_, i, l) in candidates {
            let (pipe, latency) = links[i];
            let busy = used.entry(pipe).or_default();
            if slots == 0 || *busy >= capacity(pipe) {
                continue;
            }
            *busy += 1;
            slots -= 1;
            if l == 0 && i == 0 {
                starts.push(cycle);
            }
            next[l] += 1;
            ready[l] = cycle + latency;
        }
        cycle += 1;
    }

    let (early, late) = (ITERATIONS / 2, ITERATIONS - 4);
    let span = starts[late] - starts[early];
    let steps = (late - early) as u32;
    assert_eq!(span % steps, 0, "no steady state: {span} cycles over {steps} iterations");
    span / steps
}
