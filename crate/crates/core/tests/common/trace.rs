//! Straight-line interpreter for the compensated accumulation step.

use ecm_core::kernels::Real;

#[derive(Clone, Copy)]
enum Reg {
    A,
    B,
    Prod,
    Y,
    T,
    C,
    Sum,
}

enum Instr {
    Mul(Reg, Reg, Reg),
    Sub(Reg, Reg, Reg),
    Add(Reg, Reg, Reg),
    Mov(Reg, Reg),
}

/// prod = a*b; y = prod - c; t = sum + y; c = (t - sum) - y; sum = t
const STEP: [Instr; 6] = [
    Instr::Mul(Reg::Prod, Reg::A, Reg::B),
    Instr::Sub(Reg::Y, Reg::Prod, Reg::C),
    Instr::Add(Reg::T, Reg::Sum, Reg::Y),
    Instr::Sub(Reg::C, Reg::T, Reg::Sum),
    Instr::Sub(Reg::C, Reg::C, Reg::Y),
    Instr::Mov(Reg::Sum, Reg::T),
];

pub struct Machine<T> {
    regs: [T; 7],
}

impl<T: Real> Machine<T> {
    pub fn new() -> Self {
        Self { regs: [T::zero(); 7] }
    }

    fn get(&self, r: Reg) -> T {
        self.regs[r as usize]
    }

    fn set(&mut self, r: Reg, v: T) {
        self.regs[r as usize] = v;
    }

    /// Feeds one `(a, b)` pair through the step program.
    pub fn step(&mut self, a: T, b: T) {
        self.set(Reg::A, a);
        self.set(Reg::B, b);
        for instr in &STEP {
            match *instr {
                Instr::Mul(d, x, y) => self.set(d, self.get(x) * self.get(y)),
                Instr::Sub(d, x, y) => self.set(d, self.get(x) - self.get(y)),
                Instr::Add(d, x, y) => self.set(d, self.get(x) + self.get(y)),
                Instr::Mov(d, x) => self.set(d, self.get(x)),
            }
        }
    }

    pub fn sum(&self) -> T {
        self.get(Reg::Sum)
    }

    pub fn c(&self) -> T {
        self.get(Reg::C)
    }
}

/// `(sum, c)` after running every pair in order.
pub fn kahan_trace<T: Real>(a: &[T], b: &[T]) -> (T, T) {
    let mut m = Machine::new();
    for (x, y) in a.iter().zip(b) {
        m.step(*x, *y);
    }
    (m.sum(), m.c())
}

/// Lane-split value rebuilt from per-lane traces: element `i` belongs to
/// lane `(i / unroll) % lanes`; lane sums, then negated lane compensations,
/// go through one more trace with unit factors.
pub fn kahan_lanes_trace<T: Real>(a: &[T], b: &[T], lanes: usize, unroll: usize) -> (T, Vec<T>) {
    let mut per_lane: Vec<(Vec<T>, Vec<T>)> = vec![(Vec::new(), Vec::new()); lanes];
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let lane = &mut per_lane[(i / unroll) % lanes];
        lane.0.push(*x);
        lane.1.push(*y);
    }
    let results: Vec<(T, T)> = per_lane.iter().map(|(x, y)| kahan_trace(x, y)).collect();
    let cs: Vec<T> = results.iter().map(|r| r.1).collect();
    if lanes == 1 {
        return (results[0].0, cs);
    }
    let stream: Vec<T> = results.iter().map(|r| r.0).chain(cs.iter().map(|c| -*c)).collect();
    let ones = vec![T::one(); stream.len()];
    (kahan_trace(&stream, &ones).0, cs)
}

/// Naive value rebuilt from independent per-lane sub-dots added in lane
/// order.
pub fn naive_lanes_trace<T: Real>(a: &[T], b: &[T], lanes: usize) -> T {
    let partial: Vec<T> = (0..lanes)
        .map(|l| {
            let mut s = T::zero();
            for i in (l..a.len()).step_by(lanes) {
                s = s + a[i] * b[i];
            }
            s
        })
        .collect();
    partial[1..].iter().fold(partial[0], |acc, p| acc + *p)
}
