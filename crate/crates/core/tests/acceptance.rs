//! End-to-end acceptance suite. Run with `cargo test --test acceptance`;
//! prints one PASS/FAIL line per criterion and fails if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use approxsel_core::confidence::{binary_lb, binary_ub, BoundMethod};
use approxsel_core::harness::{run_arms, run_drift, summarize, Arm, ArmSummary};
use approxsel_core::sampling::{defensive_mix, second_moment, WeightDistribution};
use approxsel_core::seed;
use approxsel_core::synth::{drift_pair, gen_beta, BetaSpec};
use approxsel_core::{Dataset, EstimatorConfig, EstimatorKind, QuerySpec, Target};
use rand::Rng as _;
use rand_distr::{Binomial, Distribution};

const TRIALS: usize = 100;
const BUDGET: usize = 10_000;
/// Size stated for the calibration criterion.
const CALIBRATION_SIZE: usize = 100_000;
/// Standard synthetic size, used where a criterion states none.
const SIZE: usize = 1_000_000;
const DELTA: f64 = 0.05;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn beta_dataset(alpha: f64, beta: f64, size: usize, seed: u64) -> Dataset {
    gen_beta(&BetaSpec::new(alpha, beta, size, seed)).expect("valid spec")
}

fn rt(gamma: f64, estimator: EstimatorKind) -> QuerySpec {
    QuerySpec::recall(gamma, BUDGET, DELTA, estimator).unwrap()
}

fn pt(gamma: f64, estimator: EstimatorKind) -> QuerySpec {
    QuerySpec::precision(gamma, BUDGET, DELTA, estimator).unwrap()
}

fn default_arm(name: &str, spec: QuerySpec) -> Arm {
    Arm::new(name, spec, EstimatorConfig::default())
}

fn run(dataset: &Dataset, arms: &[Arm], base_seed: u64) -> Vec<ArmSummary> {
    summarize(&run_arms(dataset, arms, TRIALS, base_seed).unwrap()).unwrap()
}

fn mean_se(s: &ArmSummary, recall: bool) -> (f64, f64) {
    let q = if recall { s.recall } else { s.precision }.expect("completed trials");
    (q.mean, q.std_error)
}

/// `a >= b` up to one standard error of the difference.
fn at_least(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 - (a.1 * a.1 + b.1 * b.1).sqrt()
}

fn calibration(d: &Dataset) -> Outcome {
    let arms = [
        default_arm("U-CI-RT", rt(0.9, EstimatorKind::UniformCi)),
        default_arm("IS-CI-RT", rt(0.9, EstimatorKind::ImportanceCi)),
        default_arm("U-CI-PT", pt(0.9, EstimatorKind::UniformCi)),
        default_arm("IS-CI-PT", pt(0.9, EstimatorKind::ImportanceCi)),
    ];
    let summaries = run(d, &arms, 101);
    let pass = summaries
        .iter()
        .all(|s| s.failure_rate <= 0.10 && s.errors == 0);
    let detail = summaries
        .iter()
        .map(|s| format!("{} {:.2}", s.arm, s.failure_rate))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome { pass, detail }
}

fn baseline_failure(d2: &Dataset, d1: &Dataset) -> Outcome {
    let arms = [
        default_arm("U-NoCI-RT", rt(0.9, EstimatorKind::UniformNoCi)),
        default_arm("U-NoCI-PT", pt(0.9, EstimatorKind::UniformNoCi)),
    ];
    let mut rates = Vec::new();
    for (name, d) in [("Beta(0.01,2)", d2), ("Beta(0.01,1)", d1)] {
        for s in run(d, &arms, 202) {
            rates.push((format!("{name} {}", s.arm), s.failure_rate));
        }
    }
    let pass = rates.iter().any(|(_, r)| *r >= 0.20);
    let detail = rates
        .iter()
        .map(|(n, r)| format!("{n} {r:.2}"))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome { pass, detail }
}

fn rt_ordering(d: &Dataset) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for g in [0.5, 0.75, 0.9] {
        let arms = [
            default_arm("IS", rt(g, EstimatorKind::ImportanceCi)),
            default_arm("U", rt(g, EstimatorKind::UniformCi)),
        ];
        let s = run(d, &arms, 303);
        let (is, u) = (mean_se(&s[0], false), mean_se(&s[1], false));
        pass &= at_least(is, u);
        parts.push(format!("γ={g}: IS {:.3} U {:.3}", is.0, u.0));
    }
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn pt_ordering(d: &Dataset) -> Outcome {
    let one_stage = EstimatorConfig {
        two_stage: false,
        ..Default::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for g in [0.75, 0.9, 0.95] {
        let arms = [
            default_arm("IS-2", pt(g, EstimatorKind::ImportanceCi)),
            Arm::new("IS-1", pt(g, EstimatorKind::ImportanceCi), one_stage),
            default_arm("U", pt(g, EstimatorKind::UniformCi)),
        ];
        let s = run(d, &arms, 404);
        let (two, one, u) = (
            mean_se(&s[0], true),
            mean_se(&s[1], true),
            mean_se(&s[2], true),
        );
        pass &= at_least(two, one) && at_least(one, u);
        parts.push(format!(
            "γ={g}: 2-stage {:.3} 1-stage {:.3} U {:.3}",
            two.0, one.0, u.0
        ));
    }
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn exponent_sweep(d: &Dataset) -> Outcome {
    let arms: Vec<Arm> = [0.0, 0.5, 1.0]
        .iter()
        .map(|&e| {
            let config = EstimatorConfig {
                weight_exponent: e,
                ..Default::default()
            };
            Arm::new(
                format!("exp={e}"),
                rt(0.9, EstimatorKind::ImportanceCi),
                config,
            )
        })
        .collect();
    let s = run(d, &arms, 505);
    let m: Vec<f64> = s.iter().map(|x| mean_se(x, false).0).collect();
    Outcome {
        pass: m[1] > m[0] && m[1] > m[2],
        detail: format!(
            "precision exp0 {:.3}, exp0.5 {:.3}, exp1 {:.3}",
            m[0], m[1], m[2]
        ),
    }
}

fn drift() -> Outcome {
    let (train, test) = drift_pair(
        &BetaSpec::new(0.01, 1.0, SIZE, 61),
        &BetaSpec::new(0.01, 2.0, SIZE, 62),
    )
    .unwrap();
    let arms = [default_arm(
        "IS-CI-RT",
        rt(0.95, EstimatorKind::ImportanceCi),
    )];
    let (rows, _) = run_drift(&train, &test, &arms, TRIALS, 606).unwrap();
    let row = &rows[0];
    let (recall, _) = mean_se(&row.budgeted, true);
    Outcome {
        pass: row.naive_recall < 0.95 && recall >= 0.95 && row.budgeted.failure_rate <= 0.10,
        detail: format!(
            "naive recall {:.3}, IS-CI-RT mean recall {:.3}, failure {:.2}",
            row.naive_recall, recall, row.budgeted.failure_rate
        ),
    }
}

fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn variance_ordering() -> Outcome {
    let worked = [1.0, 0.25, 0.25, 0.25];
    let sqrt_w = normalized(&worked.map(f64::sqrt));
    let vals = (
        second_moment(&worked, &sqrt_w),
        second_moment(&worked, &normalized(&worked)),
        second_moment(&worked, &uniform_weights(4)),
    );
    let mut pass = (vals.0 - 0.390625).abs() < 1e-12
        && (vals.1 - 0.4375).abs() < 1e-12
        && (vals.2 - 0.4375).abs() < 1e-12;

    let mut rng = seed::rng_from_seed(707);
    let mut worst_gap = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.001..1.0)).collect();
        let v_sqrt = second_moment(
            &a,
            &normalized(&a.iter().map(|x| x.sqrt()).collect::<Vec<_>>()),
        );
        let v_prop = second_moment(&a, &normalized(&a));
        let v_unif = second_moment(&a, &uniform_weights(n));
        let tol = 1e-12;
        pass &= v_sqrt <= v_prop + tol && v_prop <= v_unif + tol;
        let mean_root = a.iter().map(|x| x.sqrt()).sum::<f64>() / n as f64;
        let var_root = a
            .iter()
            .map(|x| (x.sqrt() - mean_root).powi(2))
            .sum::<f64>()
            / n as f64;
        let gap = ((v_unif - v_sqrt) - var_root).abs();
        worst_gap = worst_gap.max(gap);
    }
    pass &= worst_gap <= 1e-12;
    Outcome {
        pass,
        detail: format!(
            "worked {:.6}/{:.6}/{:.6}, max |gap - Var[√a]| {worst_gap:.1e}",
            vals.0, vals.1, vals.2
        ),
    }
}

/// Euclidean projection onto `{w : Σw = 1, w >= floor}`.
fn project_simplex(v: &[f64], floor: f64) -> Vec<f64> {
    let n = v.len();
    let mass = 1.0 - floor * n as f64;
    let shifted: Vec<f64> = v.iter().map(|x| x - floor).collect();
    let mut sorted = shifted.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - mass) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    shifted
        .iter()
        .map(|x| (x - theta).max(0.0) + floor)
        .collect()
}

/// Minimizes `Σ a u² / w` over the simplex by projected gradient descent
/// with backtracking.
fn minimize_v1(a: &[f64], u: &[f64]) -> Vec<f64> {
    let objective = |w: &[f64]| {
        a.iter()
            .zip(u)
            .zip(w)
            .map(|((a, u), w)| a * u * u / w)
            .sum::<f64>()
    };
    let floor = 1e-9;
    let mut w = uniform_weights(a.len());
    let mut f = objective(&w);
    let mut step = 1.0;
    for _ in 0..200_000 {
        let grad: Vec<f64> = a
            .iter()
            .zip(u)
            .zip(&w)
            .map(|((a, u), w)| -a * u * u / (w * w))
            .collect();
        let mut moved = false;
        while step > 1e-20 {
            let trial: Vec<f64> = w.iter().zip(&grad).map(|(w, g)| w - step * g).collect();
            let next = project_simplex(&trial, floor);
            let fn_ = objective(&next);
            let decrease: f64 = grad
                .iter()
                .zip(w.iter().zip(&next))
                .map(|(g, (a, b))| g * (a - b))
                .sum();
            if fn_ <= f - 0.5 * decrease {
                let change = w
                    .iter()
                    .zip(&next)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                w = next;
                f = fn_;
                step *= 2.0;
                moved = change > 1e-15;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    w
}

fn theorem_weights() -> Outcome {
    let mut rng = seed::rng_from_seed(808);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let u = normalized(
            &(0..n)
                .map(|_| rng.random_range(0.2..1.0))
                .collect::<Vec<_>>(),
        );
        let numeric = minimize_v1(&a, &u);
        let closed = normalized(
            &a.iter()
                .zip(&u)
                .map(|(a, u)| a.sqrt() * u)
                .collect::<Vec<_>>(),
        );
        let err = numeric
            .iter()
            .zip(&closed)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    Outcome {
        pass: worst <= 1e-4,
        detail: format!("max L∞ error {worst:.2e}"),
    }
}

fn horvitz_identity() -> Outcome {
    let mut rng = seed::rng_from_seed(909);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=20);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mix = rng.random_range(0.0..0.5);
        let dist: WeightDistribution = defensive_mix(&raw, mix);
        let weighted: f64 = (0..n)
            .map(|i| dist.probs()[i] * dist.reweight(i) * f[i])
            .sum();
        let plain: f64 = f.iter().sum::<f64>() / n as f64;
        worst = worst.max((weighted - plain).abs());
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("max |E_w[m f] - E_u[f]| {worst:.1e}"),
    }
}

fn ci_calibration() -> Outcome {
    let methods = [
        BoundMethod::NormalApprox,
        BoundMethod::Hoeffding,
        BoundMethod::ClopperPearson,
        BoundMethod::bootstrap(),
    ];
    let n = 500;
    let sims = 10_000;
    let mut pass = true;
    let mut parts = Vec::new();
    for &p in &[0.02, 0.05, 0.1, 0.3] {
        let binom = Binomial::new(n as u64, p).unwrap();
        let mut rng = seed::rng_from_seed(1010 + (p * 1000.0) as u64);
        let counts: Vec<usize> = (0..sims).map(|_| binom.sample(&mut rng) as usize).collect();
        let mut mean_lbs = Vec::new();
        for m in methods {
            let (mut lo_miss, mut hi_miss, mut lb_sum) = (0, 0, 0.0);
            for &k in &counts {
                let lb = binary_lb(k, n, DELTA, m).unwrap();
                let ub = binary_ub(k, n, DELTA, m).unwrap();
                lo_miss += usize::from(lb > p);
                hi_miss += usize::from(ub < p);
                lb_sum += lb;
            }
            let (lo, hi) = (lo_miss as f64 / sims as f64, hi_miss as f64 / sims as f64);
            pass &= lo <= DELTA + 0.02 && hi <= DELTA + 0.02;
            mean_lbs.push(lb_sum / sims as f64);
            if p == 0.05 {
                parts.push(format!("{} miss {lo:.3}/{hi:.3}", m.name()));
            }
        }
        if p <= 0.1 {
            let hoeffding = mean_lbs[1];
            pass &= mean_lbs
                .iter()
                .enumerate()
                .all(|(i, &v)| i == 1 || hoeffding < v);
        }
    }
    Outcome {
        pass,
        detail: format!("p=0.05: {}", parts.join(", ")),
    }
}

fn joint_validity(d: &Dataset) -> Outcome {
    let spec = QuerySpec::new(
        Target::Joint {
            recall: 0.8,
            precision: 0.8,
        },
        BUDGET,
        DELTA,
        EstimatorKind::ImportanceCi,
        0,
    )
    .unwrap();
    let reports = run_arms(d, &[default_arm("JT", spec)], TRIALS, 1111).unwrap();
    let valid = reports.iter().filter(|r| r.valid).count();
    let reported = reports.iter().all(|r| r.filter_calls.is_some());
    let s = &summarize(&reports).unwrap()[0];
    Outcome {
        pass: valid >= 90 && reported,
        detail: format!(
            "{valid}/100 valid, mean stage-3 calls {:.0}",
            s.mean_filter_calls.unwrap_or(f64::NAN)
        ),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let small = beta_dataset(0.01, 2.0, CALIBRATION_SIZE, 3);
    let d2 = beta_dataset(0.01, 2.0, SIZE, 2);
    let d1 = beta_dataset(0.01, 1.0, SIZE, 1);

    let criteria: Vec<Criterion> = vec![
        ("1 guarantee calibration", Box::new(|| calibration(&small))),
        (
            "2 baseline failure",
            Box::new(|| baseline_failure(&d2, &d1)),
        ),
        ("3 RT quality ordering", Box::new(|| rt_ordering(&d2))),
        ("4 PT quality ordering", Box::new(|| pt_ordering(&d2))),
        ("5 exponent sweep", Box::new(|| exponent_sweep(&d2))),
        ("6 drift", Box::new(drift)),
        ("7 variance ordering", Box::new(variance_ordering)),
        ("8 optimal weights", Box::new(theorem_weights)),
        ("9 reweighting identity", Box::new(horvitz_identity)),
        ("10 bound calibration", Box::new(ci_calibration)),
        ("11 joint validity", Box::new(|| joint_validity(&d2))),
    ];

    let mut failed = 0;
    for (name, check) in &criteria {
        let t = Instant::now();
        let outcome = check();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!outcome.pass);
        println!(
            "{verdict} criterion {name}: {} ({:.1}s)",
            outcome.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
