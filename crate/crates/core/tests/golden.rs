//! Published model tuples reproduced from the built-in catalog alone.

mod common;

use common::close;
use ecm_core::catalog::{bind, builtin_kernel, builtin_machine, predict};
use ecm_core::model::{predicted_performance, saturated_performance, saturation_point, scale_curve};
use ecm_core::shorthand::{format_inputs, format_prediction, format_values, parse_inputs, Digits};

const TOL: f64 = 0.05;

fn cycles(machine: &str, kernel: &str) -> Vec<f64> {
    let m = builtin_machine(machine).unwrap();
    predict(&m, &builtin_kernel(machine, kernel).unwrap()).unwrap().cycles()
}

fn assert_tuple(machine: &str, kernel: &str, want: &[f64]) {
    let got = cycles(machine, kernel);
    assert_eq!(got.len(), want.len(), "{machine} {kernel}: {got:?}");
    for (g, w) in got.iter().zip(want) {
        assert!(close(*g, *w, TOL), "{machine} {kernel}: {got:?} vs {want:?}");
    }
}

fn performance(machine: &str, kernel: &str) -> String {
    let m = builtin_machine(machine).unwrap();
    let k = builtin_kernel(machine, kernel).unwrap();
    let p = predicted_performance(&predict(&m, &k).unwrap(), &k.work, m.frequency_ghz).unwrap();
    let values: Vec<f64> = p.iter().map(|(_, v)| *v).collect();
    format_values(&values, Digits::Fixed(2), "")
}

fn n_s(machine: &str, kernel: &str) -> u32 {
    let m = builtin_machine(machine).unwrap();
    saturation_point(&predict(&m, &builtin_kernel(machine, kernel).unwrap()).unwrap()).unwrap()
}

#[test]
fn hsw_naive() {
    let m = builtin_machine("hsw").unwrap();
    let k = builtin_kernel("hsw", "naive-dot").unwrap();
    let inputs = bind(&m, &k).unwrap();
    assert_eq!(format_inputs(&inputs, Digits::Decimals(2)), "{1 || 2 | 2 | 4+1 | 9.2+1} cy");
    let pred = predict(&m, &k).unwrap();
    assert_eq!(format_prediction(&pred, Digits::Decimals(2)), "{2 | 4 | 9 | 19.2} cy");
    assert_tuple("hsw", "naive-dot", &[2.0, 4.0, 9.0, 19.2]);
    assert_eq!(performance("hsw", "naive-dot"), "{18.40 | 9.20 | 4.09 | 1.92}");
    assert_eq!(n_s("hsw", "naive-dot"), 3);
    let p_sat = saturated_performance(pred.bottleneck_cycles().unwrap(), &k.work, m.frequency_ghz).unwrap();
    assert!(close(p_sat, 4.0, 1e-9), "{p_sat}");
}

#[test]
fn hsw_naive_inputs_match_the_published_shorthand() {
    let published = parse_inputs("{1 ‖ 2 | 2 | 4+1 | 9.2+1} cy").unwrap();
    let m = builtin_machine("hsw").unwrap();
    let derived = bind(&m, &builtin_kernel("hsw", "naive-dot").unwrap()).unwrap();
    assert_eq!(derived.t_ol(), published.t_ol());
    assert_eq!(derived.t_nol(), published.t_nol());
    for (d, p) in derived.transfers().iter().zip(published.transfers()) {
        assert!(close(d.cycles(), p.cycles(), 1e-12) && d.penalty() == p.penalty(), "{d:?} {p:?}");
    }
}

#[test]
fn bdw_naive() {
    assert_tuple("bdw", "naive-dot", &[2.0, 4.0, 13.0, 26.4]);
    assert_eq!(performance("bdw", "naive-dot"), "{16.80 | 8.40 | 2.58 | 1.27}");
    assert_eq!(n_s("bdw", "naive-dot"), 4);
}

#[test]
fn knc_naive() {
    assert_tuple("knc", "naive-dot", &[2.0, 6.0, 26.8]);
    assert_eq!(performance("knc", "naive-dot"), "{8.40 | 2.80 | 0.63}");
    assert_eq!(n_s("knc", "naive-dot"), 34);
}

#[test]
fn knc_saturated_performance() {
    let m = builtin_machine("knc").unwrap();
    let k = builtin_kernel("knc", "naive-dot").unwrap();
    let pred = predict(&m, &k).unwrap();
    // Bandwidth-limited figure: 16 updates per CL at 1.05 GHz every 0.8 cy.
    let p_sat = saturated_performance(pred.bottleneck_cycles().unwrap(), &k.work, m.frequency_ghz).unwrap();
    assert!(close(p_sat, 21.0, 1e-9), "{p_sat}");
    // The published 21.3 GUP/s is n_S times the single-core memory figure.
    let single = predicted_performance(&pred, &k.work, m.frequency_ghz).unwrap()[2].1;
    assert!(close(f64::from(n_s("knc", "naive-dot")) * single, 21.3, 0.05));
}

#[test]
fn pwr8_naive() {
    assert_tuple("pwr8", "naive-dot", &[8.0, 8.0, 12.0, 22.0]);
    assert_eq!(n_s("pwr8", "naive-dot"), 3);
}

#[test]
fn kahan_variants() {
    assert_tuple("hsw", "kahan-avx", &[8.0, 8.0, 9.0, 19.2]);
    assert_tuple("hsw", "kahan-fma5", &[6.4, 6.4, 9.0, 19.2]);
    assert_tuple("bdw", "kahan-avx", &[8.0, 8.0, 13.0, 26.8]);
    assert_tuple("bdw", "kahan-fma5", &[6.4, 6.4, 13.0, 26.8]);
    assert_tuple("knc", "kahan-knc", &[4.0, 8.0, 27.8]);
    assert_tuple("pwr8", "kahan-vsx", &[16.0, 16.0, 16.0, 22.0]);
}

#[test]
fn knc_kahan_shorthand() {
    let m = builtin_machine("knc").unwrap();
    let pred = predict(&m, &builtin_kernel("knc", "kahan-knc").unwrap()).unwrap();
    assert_eq!(format_prediction(&pred, Digits::Decimals(2)), "{4 | 8 | 27.8} cy");
}

#[test]
fn scaling_saturation() {
    let chip = |machine: &str, kernel: &str| {
        let m = builtin_machine(machine).unwrap();
        let k = builtin_kernel(machine, kernel).unwrap();
        let pred = predict(&m, &k).unwrap();
        scale_curve(&pred, &k.work, m.frequency_ghz, m.cores, m.memory_domains).unwrap()
    };
    assert_eq!(chip("pwr8", "naive-dot").saturation_cores, 3);
    let hsw_kahan = chip("hsw", "kahan-avx");
    let hsw_naive = chip("hsw", "naive-dot");
    assert_eq!(hsw_kahan.saturation_cores, 6);
    // no in-memory difference between naive and compensated code
    assert_eq!(hsw_kahan.saturation_performance, hsw_naive.saturation_performance);
}
