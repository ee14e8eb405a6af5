// Scratch exploration binary used while pinning acceptance configs.
use shuffle_sgd::analysis::*;
use shuffle_sgd::data::*;
use shuffle_sgd::engine::*;
use shuffle_sgd::objectives::*;
use shuffle_sgd::rng::RandomnessSource;
use shuffle_sgd::schedule::*;
use shuffle_sgd::shuffling::ShufflerSpec;
use std::collections::BTreeMap;
use std::time::Instant;

fn stream(regime: Regime, n: usize, m: usize, b: usize, s: usize, shuffler: ShufflerSpec, seed: u64) -> BatchStream {
    build_stream(&StreamSpec { regime, n, workers: m, batch: b, epochs: s, shuffler, seed }).unwrap()
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "quad".into());
    match which.as_str() {
        "quad" => quad_slope(),
        "quad-shape" => quad_shape(),
        "mlp" => mlp_slope(),
        "mlp-speedup" => mlp_speedup(),
        "logistic-speedup" => logistic_speedup(),
        "logistic-regimes" => logistic_regimes(),
        "mlp-local" => mlp_local(),
        "insufficient" => insufficient(),
        "mixing6" => mixing6(),
        _ => eprintln!("unknown"),
    }
}

fn quad_slope() {
    let t0 = Instant::now();
    let n = 2000;
    for offset in [0.0, 0.1, 0.25, 0.5, 1.0, 2.0] {
        for seed in [101u64, 102, 103] {
            let data = quadratic_centers(n, 20, offset, false, seed).unwrap();
            let spec = ObjectiveSpec::quadratic_with_condition(20, 10.0).unwrap();
            let reference = solve_reference_optimum(&spec, &data, 1e-12, 10).unwrap();
            let st = stream(Regime::GlobalShuffle, n, 2, 5, 20, ShufflerSpec::fisher_yates(), 7);
            let trace = run(&st, &spec, &data, &LrSchedule::StronglyConvexDecay { mu: 1.0 },
                ParamVector::zeros(20), Some(&reference)).unwrap();
            let len = trace.records.len();
            let slope = rate_exponent(&trace, Metric::DistSq, len / 2..len).unwrap();
            // epoch-end-only slope over second half
            let t_per = st.iters_per_epoch();
            let ends: Vec<(f64, f64)> = (10..20)
                .map(|s| {
                    let r = &trace.records[(s + 1) * t_per - 1];
                    (r.effective_passes, r.dist_sq.unwrap())
                })
                .collect();
            let end_slope = slope_of_series(&ends).map(|r| r.slope);
            println!(
                "offset {offset} seed {seed}: slope {:.3}, epoch-end slope {:?}, dist[0]={:.3e} dist[end]={:.3e}",
                slope.slope, end_slope.map(|s| (s * 1000.0).round() / 1000.0),
                trace.records[0].dist_sq.unwrap(), trace.last().dist_sq.unwrap()
            );
        }
    }
    println!("time {:?}", t0.elapsed());
}

fn quad_shape() {
    let n = 2000;
    let data = quadratic_centers(n, 20, 2.0, false, 101).unwrap();
    let spec = ObjectiveSpec::quadratic_with_condition(20, 10.0).unwrap();
    let reference = solve_reference_optimum(&spec, &data, 1e-12, 10).unwrap();
    for (label, s_count) in [("S=20", 20usize), ("S=60", 60)] {
        let st = stream(Regime::GlobalShuffle, n, 2, 5, s_count, ShufflerSpec::fisher_yates(), 7);
        let trace = run(&st, &spec, &data, &LrSchedule::StronglyConvexDecay { mu: 1.0 },
            ParamVector::zeros(20), Some(&reference)).unwrap();
        let t_per = st.iters_per_epoch();
        print!("{label} epoch-end dist: ");
        for s in 0..s_count {
            if s % (s_count / 20).max(1) == 0 || s == s_count - 1 {
                print!("s{}={:.2e} ", s + 1, trace.records[(s + 1) * t_per - 1].dist_sq.unwrap());
            }
        }
        println!();
        // mid-epoch vs end-epoch in the second half
        let s = 3 * s_count / 4;
        print!("  epoch {} profile: ", s + 1);
        for frac in [0, 25, 50, 75, 99] {
            let idx = s * t_per + t_per * frac / 100;
            print!("t{}={:.2e} ", frac, trace.records[idx].dist_sq.unwrap());
        }
        println!();
        let len = trace.records.len();
        let slope = rate_exponent(&trace, Metric::DistSq, len / 2..len).unwrap();
        println!("  second-half slope: {:.3}", slope.slope);
    }

    // iid comparison: same parameters, sampling regime
    let st = stream(Regime::IidSampling, n, 2, 5, 20, ShufflerSpec::fisher_yates(), 7);
    let trace = run(&st, &spec, &data, &LrSchedule::StronglyConvexDecay { mu: 1.0 },
        ParamVector::zeros(20), Some(&reference)).unwrap();
    let len = trace.records.len();
    let slope = rate_exponent(&trace, Metric::DistSq, len / 2..len).unwrap();
    println!("iid second-half slope: {:.3}, dist[end]={:.2e}", slope.slope, trace.last().dist_sq.unwrap());

    // without-replacement for reference
    let st = stream(Regime::WithoutReplacement, n, 2, 5, 20, ShufflerSpec::fisher_yates(), 7);
    let trace = run(&st, &spec, &data, &LrSchedule::StronglyConvexDecay { mu: 1.0 },
        ParamVector::zeros(20), Some(&reference)).unwrap();
    let slope = rate_exponent(&trace, Metric::DistSq, len / 2..len).unwrap();
    println!("wor second-half slope: {:.3}, dist[end]={:.2e}", slope.slope, trace.last().dist_sq.unwrap());
}

fn mlp_setup(n: usize, seed: u64) -> (ObjectiveSpec, Dataset) {
    let data = gaussian_blobs(n, 10, 3, 2.0, seed).unwrap();
    let spec = ObjectiveSpec::mlp(10, vec![16, 8], 3, Activation::Tanh).unwrap();
    let mut rng = RandomnessSource::from_seed(999);
    let spec = estimate_constants(&spec, &data, 20, 1.0, &mut rng).unwrap();
    (spec, data)
}

fn nonconvex_schedule(spec: &ObjectiveSpec, data: &Dataset, m: usize, b: usize, s: usize, w0: &ParamVector) -> LrSchedule {
    let f0 = full_objective(spec, data, w0).unwrap().value;
    LrSchedule::NonConvexConstant {
        rho: spec.constants.smoothness.unwrap(),
        per_sample_grad_sq: spec.constants.per_sample_grad_sq.unwrap(),
        batch: b,
        workers: m,
        epochs: s,
        initial_gap: f0, // F* lower bound 0
    }
}

fn mlp_slope() {
    let t0 = Instant::now();
    let n = 1920;
    let (spec, data) = mlp_setup(n, 202);
    println!("constants: rho={:?} B2={:?} G2={:?}", spec.constants.smoothness, spec.constants.per_sample_grad_sq, spec.constants.full_grad_sq);
    let w0 = spec.initial_point(&data, 11).unwrap();
    let sched = nonconvex_schedule(&spec, &data, 1, 20, 20, &w0);
    println!("eta = {:?}", lr_at(&sched, 1, 1, n / 20).unwrap());
    let st = stream(Regime::GlobalShuffle, n, 1, 20, 20, ShufflerSpec::fisher_yates(), 7);
    let trace = run(&st, &spec, &data, &sched, w0, None).unwrap();
    let series = trace.series(Metric::GradNormSqRunningMean);
    let len = series.len();
    println!("run time {:?}; {} records", t0.elapsed(), len);
    for frac in [0, 10, 25, 50, 75, 99] {
        let idx = len * frac / 100;
        println!("  pass {:.2}: running mean {:.5e} raw {:.5e}", series[idx].0, series[idx].1, trace.records[idx].grad_norm_sq);
    }
    // plateau detection: argmin of running mean
    let argmin = series.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).map(|(i, _)| i).unwrap();
    println!("argmin at idx {argmin} / {len}");
    for (a, b) in [(len/10, argmin), (len/20, argmin), (0, len), (len/10, len)] {
        if b > a + 10 {
            let s = slope_of_series(&series[a..b]).unwrap();
            println!("window {a}..{b}: slope {:.4}", s.slope);
        }
    }
}

fn mlp_speedup() {
    let t0 = Instant::now();
    let n = 1920;
    let (spec, data) = mlp_setup(n, 202);
    let mut traces = BTreeMap::new();
    for m in [1usize, 2, 4] {
        let w0 = spec.initial_point(&data, 11).unwrap();
        let sched = nonconvex_schedule(&spec, &data, m, 20, 20, &w0);
        println!("M={m}: eta={:.5}", lr_at(&sched, 1, 1, n / (20 * m)).unwrap());
        let st = stream(Regime::GlobalShuffle, n, m, 20, 20, ShufflerSpec::fisher_yates(), 7);
        let trace = run(&st, &spec, &data, &sched, w0, None).unwrap();
        let series = trace.series(Metric::GradNormSqRunningMean);
        println!("M={m}: final running mean {:.5e}", series.last().unwrap().1);
        traces.insert(m, trace);
    }
    for target in [3e-2, 2e-2, 1.5e-2, 1e-2, 7e-3] {
        let rows = speedup(&traces, target, Metric::GradNormSqRunningMean).unwrap();
        print!("target {target:.1e}: ");
        for r in &rows {
            print!("M={} e={:?} sp={:?}  ", r.workers, r.epochs_to_target, r.speedup);
        }
        println!();
    }
    println!("time {:?}", t0.elapsed());
}

fn logistic_setup(n: usize, d: usize, seed: u64) -> (ObjectiveSpec, Dataset, ReferenceOptimum) {
    let data = synthetic_logistic(n, d, seed).unwrap();
    let lambda = 1.0 / (n as f64).sqrt();
    let spec = ObjectiveSpec::logistic_l2(lambda).unwrap();
    let mut rng = RandomnessSource::from_seed(1000);
    let spec = estimate_constants(&spec, &data, 20, 2.0, &mut rng).unwrap();
    let reference = solve_reference_optimum(&spec, &data, 1e-11, 500_000).unwrap();
    (spec, data, reference)
}

fn logistic_speedup() {
    let t0 = Instant::now();
    let n = 2000;
    let (spec, data, reference) = logistic_setup(n, 20, 303);
    println!("constants: rho={:?} L={:?} f*={}", spec.constants.smoothness, spec.constants.lipschitz, reference.f_star);
    let w0 = ParamVector::zeros(20);
    let f0 = full_objective(&spec, &data, &w0).unwrap().value;
    println!("f_gap at w0: {:.4e}", f0 - reference.f_star);
    let sched = LrSchedule::ConvexSqrtDecay { lipschitz: spec.constants.lipschitz.unwrap() };
    // average epochs-to-target across stream seeds per worker count
    let seeds = [7u64, 8, 9, 10, 11];
    let mut all: BTreeMap<usize, Vec<MetricsTrace>> = BTreeMap::new();
    for m in [1usize, 4, 16] {
        for &sd in &seeds {
            let st = stream(Regime::GlobalShuffle, n, m, 5, 8, ShufflerSpec::fisher_yates(), sd);
            let trace = run(&st, &spec, &data, &sched, ParamVector::zeros(20), Some(&reference)).unwrap();
            all.entry(m).or_default().push(trace);
        }
    }
    for target in [3e-2, 1e-2, 5e-3, 2e-3, 1e-3] {
        print!("target {target:.1e}: ");
        let mut base = f64::NAN;
        for (m, traces) in &all {
            let mean: Option<f64> = traces
                .iter()
                .map(|t| epochs_to_target(t, Metric::FGap, target))
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64);
            if let Some(mean) = mean {
                if *m == 1 {
                    base = mean;
                }
                let sp = *m as f64 / (mean / base);
                print!("M={m} e={mean:.3} sp={sp:.2} eff={:.2}  ", sp / *m as f64);
            } else {
                print!("M={m} unreached  ");
            }
        }
        println!();
    }
    println!("time {:?}", t0.elapsed());
}

fn logistic_regimes() {
    let t0 = Instant::now();
    let n = 2000;
    let spread: f64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let data = synthetic_logistic_clusters(n, 20, 3.0, spread, 303).unwrap();
    let lambda = 1.0 / (n as f64).sqrt();
    let spec = ObjectiveSpec::logistic_l2(lambda).unwrap();
    let mut crng = RandomnessSource::from_seed(1000);
    let spec = estimate_constants(&spec, &data, 20, 2.0, &mut crng).unwrap();
    let reference = solve_reference_optimum(&spec, &data, 1e-11, 500_000).unwrap();
    // per-sample gradient spread at the optimum
    let noise: f64 = (0..n).map(|i| loss_and_grad_single(&spec, &data, &reference.w_star, i).unwrap().grad_norm_sq()).sum::<f64>() / n as f64;
    println!("mean per-sample grad^2 at w*: {noise:.3e}; f* = {:.6}", reference.f_star);
    let sched = LrSchedule::ConvexSqrtDecay { lipschitz: spec.constants.lipschitz.unwrap() };
    let s_max = 40;
    for sd in [7u64, 8, 9, 10] {
        let mut es = Vec::new();
        for regime in [Regime::GlobalShuffle, Regime::IidSampling] {
            let st = stream(regime, n, 2, 5, s_max, ShufflerSpec::fisher_yates(), sd);
            let trace = run(&st, &spec, &data, &sched, ParamVector::zeros(20), Some(&reference)).unwrap();
            es.push(epochs_to_target(&trace, Metric::FGap, 1e-6));
        }
        let ratio = match (es[0], es[1]) { (Some(a), Some(b)) => a.max(b) / a.min(b), _ => f64::NAN };
        println!("seed {sd}: global {:?} iid {:?} ratio {ratio:.3}", es[0], es[1]);
    }
    println!("time {:?}", t0.elapsed());
}

fn mlp_local() {
    let t0 = Instant::now();
    let n = 1920;
    for seed in [1u64, 2, 3] {
        let (spec, data) = mlp_setup(n, 202);
        let w0 = spec.initial_point(&data, seed * 17).unwrap();
        let m = 4;
        let sched = nonconvex_schedule(&spec, &data, m, 20, 20, &w0);
        let mut results = Vec::new();
        for regime in [Regime::GlobalShuffle, Regime::LocalShuffle] {
            let st = stream(regime, n, m, 20, 20, ShufflerSpec::fisher_yates(), seed);
            let trace = run(&st, &spec, &data, &sched, w0.clone(), None).unwrap();
            let series = trace.series(Metric::GradNormSqRunningMean);
            results.push((regime, series.last().unwrap().1, trace));
        }
        for target in [2e-2, 1.5e-2, 1e-2] {
            let eg = epochs_to_target(&results[0].2, Metric::GradNormSqRunningMean, target);
            let el = epochs_to_target(&results[1].2, Metric::GradNormSqRunningMean, target);
            println!("seed {seed} target {target:.1e}: global {eg:?} local {el:?}");
        }
    }
    println!("time {:?}", t0.elapsed());
}

fn insufficient() {
    let t0 = Instant::now();
    let n = 2000;
    let data = quadratic_centers(n, 20, 2.0, true, 101).unwrap();
    let spec = ObjectiveSpec::quadratic_with_condition(20, 10.0).unwrap();
    let reference = solve_reference_optimum(&spec, &data, 1e-12, 10).unwrap();
    let seeds = [7u64, 8, 9];
    for (label, shuffler) in [
        ("fisher-yates", ShufflerSpec::fisher_yates()),
        ("riffle-30", ShufflerSpec::riffle(30)),
        ("riffle-20", ShufflerSpec::riffle(20)),
        ("identity", ShufflerSpec::identity()),
    ] {
        for target in [3e-3f64, 1e-3, 3e-4, 1e-4] {
            let mut es = Vec::new();
            for &sd in &seeds {
                let st = stream(Regime::GlobalShuffle, n, 2, 5, 30, shuffler, sd);
                let trace = run(&st, &spec, &data, &LrSchedule::StronglyConvexDecay { mu: 1.0 }, ParamVector::zeros(20), Some(&reference)).unwrap();
                es.push(epochs_to_target(&trace, Metric::DistSq, target));
            }
            let mean = es.iter().copied().collect::<Option<Vec<f64>>>().map(|v| v.iter().sum::<f64>() / v.len() as f64);
            print!(" {target:.0e}: {:?};", mean.map(|m| (m * 1000.0).round() / 1000.0));
        }
        println!(" <- {label}");
    }
    println!("time {:?}", t0.elapsed());
}

fn mixing6() {
    for n in [4usize, 6] {
        for h in 1..=10 {
            let e = tv_exact(&ShufflerSpec::riffle(h), n).unwrap().epsilon;
            println!("riffle n={n} h={h}: eps={e:.6}  thresholds: bM/n={:.4} sqrt(bM)/n={:.4}", 1.0 / n as f64, 1.0 / n as f64);
        }
    }
}
