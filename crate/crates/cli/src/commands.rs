use std::fs::File;
use std::io::Write;
use std::path::Path;

use ecm_core::bench::host::{available_cpus, round_robin_cpus, with_host_capacities};
use ecm_core::bench::{
    compare_to_model, estimate_saturation, level_windows, overhead_check, read_csv, run_sweep, scaling_slopes, window_sizes,
    write_csv, BenchSample, CsvHeader, OverheadCheck, RowStatus, SweepPlan, Variant,
};
use ecm_core::catalog::{self, bind, builtin_kernel_names, builtin_machines, KernelDescription, MachineDescription};
use ecm_core::model::EcmPrediction;
use ecm_core::kernels::{dot_kahan, dot_naive, gen_ill_conditioned, Precision, Real};
use ecm_core::model::{predicted_performance, saturated_performance, saturation_point, scale_curve, WorkUnit};
use ecm_core::shorthand::{format_inputs, format_prediction, format_values, Digits};
use serde_json::{json, Value};

use crate::render::{num, preamble, sci, Table};
use crate::{resolve, Failure, Format, SweepArgs, Target};

const SHOW: Digits = Digits::Decimals(2);

fn perf_unit(work: &WorkUnit) -> String {
    match work.name.as_str() {
        "update" => "GUP/s".into(),
        other => format!("G{other}/s"),
    }
}

fn target(t: &Target) -> Result<(MachineDescription, KernelDescription), Failure> {
    let machine = resolve::machine(&t.machine)?;
    let kernel = resolve::kernel(&machine, &t.kernel)?;
    Ok((machine, kernel))
}

pub fn predict(t: &Target, format: Format) -> Result<(), Failure> {
    let (machine, kernel) = target(t)?;
    let inputs = bind(&machine, &kernel)?;
    let pred = prediction(&machine, &kernel)?;
    let perf = predicted_performance(&pred, &kernel.work, machine.frequency_ghz)?;
    let unit = perf_unit(&kernel.work);
    // n_S and P_sat only exist for memory-bound predictions
    let saturation = pred.bottleneck_cycles().and_then(|b| {
        let n_s = saturation_point(&pred).ok()?;
        let p_sat = saturated_performance(b, &kernel.work, machine.frequency_ghz).ok()?;
        Some((n_s, p_sat))
    });
    let domains = machine.memory_domains;

    if format == Format::Shorthand {
        println!("machine: {}  kernel: {}", machine.name, kernel.name);
        println!("inputs: {}", format_inputs(&inputs, SHOW));
        println!("prediction: {}", format_prediction(&pred, SHOW));
        let values: Vec<f64> = perf.iter().map(|(_, p)| *p).collect();
        println!("performance: {}", format_values(&values, Digits::Fixed(2), &format!(" {unit}")));
        match saturation {
            Some((n_s, p_sat)) => {
                println!("n_S: {n_s} per domain, {} per chip", n_s * domains);
                println!("P_sat: {p_sat:.2} {unit} per domain, {:.2} per chip", p_sat * f64::from(domains));
            }
            None => println!("n_S: n/a (no memory level)"),
        }
        return Ok(());
    }

    preamble(
        format,
        &[
            ("machine", json!(machine.name)),
            ("kernel", json!(kernel.name)),
            ("inputs", json!(format_inputs(&inputs, SHOW))),
            ("prediction", json!(format_prediction(&pred, SHOW))),
            ("n_s_per_domain", saturation.map_or(Value::Null, |(n, _)| json!(n))),
            ("n_s_per_chip", saturation.map_or(Value::Null, |(n, _)| json!(n * domains))),
            ("p_sat_per_domain", saturation.map_or(Value::Null, |(_, p)| num(p, 4))),
            ("p_sat_per_chip", saturation.map_or(Value::Null, |(_, p)| num(p * f64::from(domains), 4))),
        ],
    );
    let mut table = Table::new(&["level", "cycles", "performance", "unit"]);
    for ((level, cycles), (_, p)) in pred.levels().iter().zip(&perf) {
        table.row(vec![json!(level), num(*cycles, 4), num(*p, 4), json!(unit)]);
    }
    table.print(format);
    Ok(())
}

fn prediction(machine: &MachineDescription, kernel: &KernelDescription) -> Result<EcmPrediction, Failure> {
    Ok(catalog::predict(machine, kernel)?)
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?),
        None => Box::new(std::io::stdout().lock()),
    })
}

pub fn scale(t: &Target, max_cores: Option<u32>, out: Option<&Path>) -> Result<(), Failure> {
    let (machine, kernel) = target(t)?;
    let pred = prediction(&machine, &kernel)?;
    let cores = max_cores.unwrap_or(machine.cores);
    let curve = scale_curve(&pred, &kernel.work, machine.frequency_ghz, cores, machine.memory_domains)?;
    let first_saturated = curve.saturation_index();
    let mut text = String::new();
    let mut line = |l: String| {
        text.push_str(&l);
        text.push('\n');
    };
    line(format!("# machine: {}", machine.name));
    line(format!("# kernel: {}", kernel.name));
    line(format!("# memory_domains: {}", machine.memory_domains));
    line(format!("# saturation_cores: {}", curve.saturation_cores));
    line(format!("# saturation_performance: {}", curve.saturation_performance));
    line("cores,performance,saturated".into());
    for (i, p) in curve.points.iter().enumerate() {
        let flag = u8::from(first_saturated.is_some_and(|s| i >= s));
        line(format!("{},{},{flag}", p.cores, p.performance));
    }
    match output(out)?.write_all(text.as_bytes()) {
        // a reader such as `head` that stops early is not an error
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn default_variant(kernel: Option<&KernelDescription>) -> Variant {
    match kernel {
        Some(k) if k.chain.is_some() => Variant::kahan(8, 1),
        _ => Variant::naive(8),
    }
}

fn plan(
    machine: &MachineDescription,
    args: &SweepArgs,
    kernel: Option<&KernelDescription>,
) -> Result<SweepPlan, Failure> {
    let variant = match &args.variant {
        Some(v) => Variant::parse(v)?,
        None => default_variant(kernel),
    };
    let granule = 2 * u64::from(machine.cacheline_bytes);
    let sizes = match &args.sizes {
        Some(text) => resolve::sizes(text, granule)?,
        None => {
            let host = with_host_capacities(machine);
            let levels = host.levels.len() + 1;
            window_sizes(&level_windows(&host, levels), granule.max(1024))
        }
    };
    let frequency = args.frequency.unwrap_or(machine.frequency_ghz);
    let mut plan = SweepPlan::new(variant, args.precision.into(), sizes, frequency);
    plan.repetitions = args.reps;
    plan.seed = args.seed;
    plan.cacheline_bytes = machine.cacheline_bytes;
    if args.pin {
        plan.pinning = Some(round_robin_cpus());
    }
    plan.validate()?;
    Ok(plan)
}

/// Warns when the timing loop itself is a visible part of the samples.
fn check_overhead(samples: &[BenchSample]) {
    if let Some(check) = overhead_check(samples) {
        if !check.passed() {
            eprintln!(
                "ecm: warning: empty-kernel time is {:.2}% of the fastest sample (limit {}%)",
                100.0 * check.ratio(),
                100.0 * OverheadCheck::LIMIT
            );
        }
    }
}

fn header(machine: &MachineDescription, plan: &SweepPlan) -> CsvHeader {
    CsvHeader {
        machine: machine.name.clone(),
        frequency_ghz: plan.frequency_ghz,
        plan_digest: plan.digest(),
        seed: plan.seed,
    }
}

pub fn bench(machine: &str, args: &SweepArgs, threads: &[usize], out: Option<&Path>) -> Result<(), Failure> {
    let machine = resolve::machine(machine)?;
    let base = plan(&machine, args, None)?;
    if let Some(&t) = threads.iter().find(|&&t| t == 0 || t > available_cpus()) {
        return Err(Failure::Usage(format!("--threads {t}: host has {} CPUs", available_cpus())));
    }
    let mut samples: Vec<BenchSample> = Vec::new();
    for &t in threads {
        let mut p = base.clone();
        p.threads = t;
        samples.extend(run_sweep(&p)?);
    }
    check_overhead(&samples);
    write_csv(output(out)?, &header(&machine, &base), &samples)?;

    if threads.len() > 1 {
        // scaling summary per working set
        for &bytes in &base.sizes {
            let mut at: Vec<BenchSample> = samples.iter().filter(|s| s.bytes == bytes).cloned().collect();
            at.sort_by_key(|s| s.threads);
            let slopes: Vec<String> = scaling_slopes(&at).iter().map(|s| format!("{s:.3}")).collect();
            let knee = estimate_saturation(&at).map_or("n/a".into(), |k| k.to_string());
            eprintln!("# {bytes} B: slopes [{}] GUP/s per core, saturation near {knee} cores", slopes.join(", "));
        }
    }
    Ok(())
}

pub fn validate(
    t: &Target,
    args: &SweepArgs,
    samples_path: Option<&Path>,
    strict: bool,
    format: Format,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let (machine, kernel) = target(t)?;
    let (machine, samples, seed) = match samples_path {
        Some(path) => {
            let file = File::open(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let all = read_csv(file)?;
            (machine, pick_samples(all, args.variant.as_deref())?, args.seed)
        }
        None => {
            // Capacities place the level windows, so a host run uses the
            // host's caches with the model machine's timings.
            let host = with_host_capacities(&machine);
            let plan = plan(&host, args, Some(&kernel))?;
            let samples = run_sweep(&plan)?;
            check_overhead(&samples);
            if let Some(path) = out {
                write_csv(output(Some(path))?, &header(&host, &plan), &samples)?;
            }
            (host, samples, plan.seed)
        }
    };
    let pred = prediction(&machine, &kernel)?;
    let rows = compare_to_model(&samples, &pred, &machine);
    let variant = samples.first().map_or("-".to_string(), |s| s.variant.clone());

    preamble(
        format,
        &[
            ("machine", json!(machine.name)),
            ("kernel", json!(kernel.name)),
            ("variant", json!(variant)),
            ("seed", json!(seed)),
        ],
    );
    let mut table = Table::new(&[
        "level",
        "predicted_cycles",
        "measured_cycles",
        "ratio",
        "samples",
        "window_lower",
        "window_upper",
        "status",
    ]);
    for r in &rows {
        table.row(vec![
            json!(r.level),
            num(r.predicted_cycles, 3),
            r.measured_cycles.map_or(Value::Null, |m| num(m, 3)),
            r.ratio.map_or(Value::Null, |x| num(x, 3)),
            json!(r.samples),
            json!(r.window.lower),
            r.window.upper.map_or(Value::Null, |u| json!(u)),
            serde_json::to_value(r.status).unwrap_or(Value::Null),
        ]);
    }
    table.print(format);

    let failed: Vec<String> = rows
        .iter()
        .filter(|r| r.status != RowStatus::Ok)
        .map(|r| format!("{} {}", r.level, serde_json::to_value(r.status).unwrap_or(Value::Null).as_str().unwrap_or("?")))
        .collect();
    if strict && !failed.is_empty() {
        return Err(Failure::Validation(format!("levels flagged or missing: {}", failed.join(", "))));
    }
    Ok(())
}

/// Single-thread samples of one variant.
fn pick_samples(all: Vec<BenchSample>, variant: Option<&str>) -> Result<Vec<BenchSample>, Failure> {
    let single: Vec<BenchSample> = all.into_iter().filter(|s| s.threads == 1).collect();
    let chosen = match variant {
        Some(v) => v.to_string(),
        None => {
            let mut ids: Vec<&str> = single.iter().map(|s| s.variant.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            match ids.as_slice() {
                [one] => one.to_string(),
                [] => return Err(Failure::Usage("no single-thread samples".into())),
                many => return Err(Failure::Usage(format!("samples hold {}; pick one with --variant", many.join(", ")))),
            }
        }
    };
    let picked: Vec<BenchSample> = single.into_iter().filter(|s| s.variant == chosen).collect();
    if picked.is_empty() {
        return Err(Failure::Usage(format!("no single-thread samples for `{chosen}`")));
    }
    Ok(picked)
}

pub fn accuracy(
    conds: &[f64],
    ns: &[usize],
    precision: Precision,
    lanes: usize,
    unroll: usize,
    seed: u64,
    format: Format,
) -> Result<(), Failure> {
    preamble(
        format,
        &[
            ("precision", json!(precision.as_str())),
            ("lanes", json!(lanes)),
            ("unroll", json!(unroll)),
            ("seed", json!(seed)),
        ],
    );
    let mut table = Table::new(&["n", "condition", "achieved", "naive_error", "kahan_error"]);
    for &n in ns {
        for &cond in conds {
            let row = match precision {
                Precision::F32 => errors::<f32>(n, cond, lanes, unroll, seed)?,
                Precision::F64 => errors::<f64>(n, cond, lanes, unroll, seed)?,
            };
            table.row(vec![json!(n), sci(cond), sci(row.0), sci(row.1), sci(row.2)]);
        }
    }
    table.print(format);
    Ok(())
}

/// (achieved condition, naive error, Kahan error)
fn errors<T: Real>(n: usize, cond: f64, lanes: usize, unroll: usize, seed: u64) -> Result<(f64, f64, f64), Failure> {
    let inst = gen_ill_conditioned::<T>(n, cond, seed)?;
    let naive = inst.exact.relative_error(dot_naive(&inst.a, &inst.b, lanes)?);
    let kahan = inst.exact.relative_error(dot_kahan(&inst.a, &inst.b, lanes, unroll)?.value);
    Ok((inst.condition, naive, kahan))
}

pub fn list(format: Format) -> Result<(), Failure> {
    let mut table = Table::new(&["machine", "kernel", "prediction"]);
    for machine in builtin_machines() {
        for name in builtin_kernel_names(&machine.name)? {
            let kernel = resolve::kernel(&machine, name)?;
            let pred = prediction(&machine, &kernel)?;
            table.row(vec![json!(machine.name), json!(name), json!(format_prediction(&pred, SHOW))]);
        }
    }
    table.print(format);
    Ok(())
}
