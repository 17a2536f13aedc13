//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use iso_edf::rmt::DEFAULT_ETA;
use iso_edf::{
    classify, compare, default_grid, density_curve, ensemble_spectrum, mp_density,
    population_measure, predict_edf, predict_from_measure, reduce, run_mc, stieltjes_at,
    ArrayNoiseConfig, AtomicMeasure, Complex64, FmcProblem, GridOptions, McConfig, ModelMode,
    MpParams,
};
use iso_edf_validation::{cdf_distance, density_l1, random_problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 51;
const ZETA: f64 = 0.5;
/// Aspect ratios with their snapshot counts.
const CASES: [(f64, usize); 4] = [(0.25, 204), (0.5, 102), (1.0, 51), (1.5, 34)];

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn array() -> ArrayNoiseConfig {
    ArrayNoiseConfig::new(N, ZETA).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let s = ensemble_spectrum(&array()).unwrap();
    let elapsed = start.elapsed();
    let v = s.values();
    let mut ok = (s.smallest() - 2.0 / PI).abs() <= 1e-3;
    for (got, want) in v.iter().zip([6.11, 2.74, 2.12]) {
        ok &= (got - want).abs() <= 0.01;
    }
    ok &= elapsed < Duration::from_secs(1);
    outcome(
        ok,
        format!(
            "gamma_N = {:.6} (2/pi = {:.6}), gamma_1..3 = {:.4}, {:.4}, {:.4}, {:.1} ms",
            s.smallest(),
            2.0 / PI,
            v[0],
            v[1],
            v[2],
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let s = ensemble_spectrum(&array()).unwrap();
    let cls = classify(&s, 0.25).unwrap();
    let m = reduce(&cls, N).unwrap();
    let elapsed = start.elapsed();
    let weight_err = (m.total_weight() - 1.0).abs();
    let ok = m.len() == 5 && weight_err <= 1e-12;
    outcome(
        ok,
        format!(
            "{} atoms (distinct {}, mid {}, low {}), |sum w - 1| = {:.1e}, {:.1} ms",
            m.len(),
            cls.gamma_dist.len(),
            cls.n_mid,
            cls.n_low,
            weight_err,
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut worst = 0.0f64;
    for c in [0.25, 0.5, 1.5] {
        let pred = predict_from_measure(
            AtomicMeasure::point(1.0).unwrap(),
            c,
            GridOptions::default(),
        )
        .unwrap();
        let params = MpParams::unit(c).unwrap();
        let (a, b) = params.support();
        for (&x, &f) in pred.density.grid.iter().zip(&pred.density.values) {
            if (x - a).abs() < 0.05 || (x - b).abs() < 0.05 {
                continue;
            }
            let err = (f - mp_density(x, params)).abs();
            worst = worst.max(err);
            ok &= err <= 2e-3;
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(5);
    outcome(
        ok,
        format!(
            "max |f - f_MP| = {worst:.2e} away from edges, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (c, l) in CASES {
        let pred = predict_edf(&array(), c, ModelMode::Reduced, GridOptions::default()).unwrap();
        let mc = McConfig::new(array(), l, 2000, 2024).unwrap();
        let emp = run_mc(&mc).unwrap();
        let a = compare(&pred.density, &emp);
        ok &= a.ks <= 0.02;
        if c > 1.0 {
            ok &= (a.zero_frac_empirical - 1.0 / 3.0).abs() <= 0.02;
            parts.push(format!(
                "c={c}: ks {:.4}, zero frac {:.4}",
                a.ks, a.zero_frac_empirical
            ));
        } else {
            parts.push(format!("c={c}: ks {:.4}", a.ks));
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(600);
    outcome(
        ok,
        format!("{}; {:.1} s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (c, _) in CASES {
        let reduced = predict_edf(&array(), c, ModelMode::Reduced, GridOptions::default()).unwrap();
        let full = predict_edf(&array(), c, ModelMode::Full, GridOptions::default()).unwrap();
        let sup = cdf_distance(&reduced.density, &full.density);
        let l1 = density_l1(&reduced.density, &full.density);
        ok &= sup <= 0.01 && l1 <= 0.05;
        parts.push(format!("c={c}: sup {sup:.4}, l1 {l1:.4}"));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(120);
    outcome(
        ok,
        format!("{}; {:.1} s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

fn criterion_6() -> Outcome {
    let c = 0.25;
    let reduced = FmcProblem::new(
        population_measure(&array(), c, ModelMode::Reduced).unwrap(),
        c,
    )
    .unwrap();
    let full =
        FmcProblem::new(population_measure(&array(), c, ModelMode::Full).unwrap(), c).unwrap();
    let grid = default_grid(&full, 2000).unwrap();
    let time = |p: &FmcProblem| {
        (0..3)
            .map(|_| {
                let t = Instant::now();
                density_curve(p, &grid, DEFAULT_ETA).unwrap();
                t.elapsed()
            })
            .min()
            .unwrap()
    };
    let (tr, tf) = (time(&reduced), time(&full));
    outcome(
        tr < tf,
        format!(
            "reduced {:.1} ms ({} atoms), full {:.1} ms ({} atoms), speedup {:.1}x",
            tr.as_secs_f64() * 1e3,
            reduced.atom_count(),
            tf.as_secs_f64() * 1e3,
            full.atom_count(),
            tf.as_secs_f64() / tr.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();

    // Herglotz positivity and the far-field asymptote.
    let mut worst_far = 0.0f64;
    for _ in 0..200 {
        let p = random_problem(&mut rng);
        for _ in 0..10 {
            let z = Complex64::new(
                rng.random_range(-5.0..20.0),
                10f64.powf(rng.random_range(-6.0..1.0)),
            );
            match stieltjes_at(&p, z, None) {
                Ok(m) if m.im > 0.0 => {}
                other => failures.push(format!("herglotz at {z}: {other:?}")),
            }
        }
        for far in [
            Complex64::new(2e4, 1.0),
            Complex64::new(-3e4, 2e4),
            Complex64::new(0.0, 1e5),
        ] {
            let m = stieltjes_at(&p, far, None).unwrap();
            worst_far = worst_far.max((far * m + 1.0).norm());
        }
    }
    if worst_far > 1e-4 {
        failures.push(format!("far field {worst_far:.2e}"));
    }

    // Mass and first moment on random problems and the array models.
    let mut worst_mass = 0.0f64;
    let mut worst_moment = 0.0f64;
    let mut problems: Vec<FmcProblem> = (0..40).map(|_| random_problem(&mut rng)).collect();
    for (c, _) in CASES {
        for mode in [ModelMode::Reduced, ModelMode::Full] {
            problems
                .push(FmcProblem::new(population_measure(&array(), c, mode).unwrap(), c).unwrap());
        }
    }
    for p in &problems {
        let d = density_curve(p, &default_grid(p, 2000).unwrap(), DEFAULT_ETA).unwrap();
        let mean = p.measure().mean();
        worst_mass = worst_mass.max((d.total_mass() - 1.0).abs());
        worst_moment = worst_moment.max((d.first_moment() - mean).abs() / mean);
    }
    if worst_mass > 5e-3 {
        failures.push(format!("mass error {worst_mass:.2e}"));
    }
    if worst_moment > 0.01 {
        failures.push(format!("first moment error {worst_moment:.2e}"));
    }

    // Bit-identical output for any worker count.
    let mc = McConfig::new(array(), 34, 40, 99).unwrap();
    let p = FmcProblem::new(
        population_measure(&array(), 0.5, ModelMode::Full).unwrap(),
        0.5,
    )
    .unwrap();
    let grid = default_grid(&p, 2000).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            (
                run_mc(&mc).unwrap().pooled,
                density_curve(&p, &grid, DEFAULT_ETA).unwrap().values,
            )
        })
    };
    let one = run(1);
    for threads in [2, 3, 8] {
        if run(threads) != one {
            failures.push(format!("output differs with {threads} workers"));
        }
    }

    let detail = format!(
        "far field max {worst_far:.2e}, mass max err {worst_mass:.2e}, moment max rel err {worst_moment:.2e}, \
         determinism over 1/2/3/8 workers"
    );
    if failures.is_empty() {
        outcome(true, detail)
    } else {
        outcome(false, format!("{detail}; {}", failures.join("; ")))
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 7] = [
        ("ensemble spectrum", criterion_1),
        ("reduced model order", criterion_2),
        ("MP oracle equivalence", criterion_3),
        ("simulation agreement", criterion_4),
        ("reduced vs full", criterion_5),
        ("reduced is faster", criterion_6),
        ("invariant sweeps", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {} ({name}): {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
