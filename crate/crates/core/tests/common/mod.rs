#![allow(dead_code)]

pub mod list_sched;
pub mod props;
pub mod trace;

use ecm_core::incore::{ChainLink, DependencyChain, InstrClass};

pub fn chain(links: &[(InstrClass, u32)], unroll: u32, cls_per_iteration: f64) -> DependencyChain {
    DependencyChain {
        links: links.iter().map(|&(class, latency)| ChainLink { class, latency }).collect(),
        unroll,
        cls_per_iteration,
    }
}

/// Kahan with the product folded into an FMA and three dependent adds.
pub fn pure_add_chain(unroll: u32, cls_per_iteration: f64) -> DependencyChain {
    use InstrClass::{Add, Fma};
    chain(&[(Fma, 5), (Add, 3), (Add, 3), (Add, 3)], unroll, cls_per_iteration)
}

/// Kahan with one of the adds moved to the FMA pipe.
pub fn fma_trick_chain(unroll: u32, cls_per_iteration: f64) -> DependencyChain {
    use InstrClass::{Add, Fma};
    chain(&[(Fma, 5), (Add, 3), (Fma, 5), (Add, 3)], unroll, cls_per_iteration)
}

/// Tolerance check that reports both values.
pub fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}
