//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::dp_oracle;
use common::instances::{random_program, random_state, SMALL};
use common::lp_oracle::{check_solution, random_lp, vertex_enumeration};
use cutplane::cutpool::{Cut, CutPool, EvalMode, SelectionRule, DEFAULT_EPSILON0};
use cutplane::engine::{
    check_stop, mean_proportions, run, run_observed, Aggregation, CutEvent, LogRow, Method, MethodConfig,
    Observer, RunResult, RunStatus, Sampling,
};
use cutplane::lp::{solve, LpStatus};
use cutplane::models::{
    build_portfolio, generate_instance, generate_portfolio, portfolio_cut_closedform, Family, InstanceParams,
};
use cutplane::program::{extensive_form_value, StochasticProgram, DEFAULT_TREE_CAP};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Every log produced by the suite, for the monotonicity check.
#[derive(Default)]
struct Runs {
    logs: Vec<(String, Vec<LogRow>)>,
}

impl Runs {
    fn keep(&mut self, name: String, r: &RunResult) {
        self.logs.push((name, r.log.clone()));
    }
}

fn exhaustive(method: Method) -> MethodConfig {
    MethodConfig {
        sampling: Sampling::Exhaustive,
        epsilon: 1e-6,
        max_iterations: 500,
        no_timing: true,
        ..MethodConfig::for_method(method)
    }
}

fn corpus() -> Vec<StochasticProgram> {
    (0..20).map(|seed| random_program(1000 + seed, SMALL)).collect()
}

fn oracle_equivalence(runs: &mut Runs, results: &mut Vec<(StochasticProgram, Method, RunResult)>) -> Verdict {
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (k, p) in corpus().into_iter().enumerate() {
        let value = extensive_form_value(&p, DEFAULT_TREE_CAP).unwrap().objective_value;
        let dp = dp_oracle::program_value(&p);
        if (value - dp).abs() > 1e-8 * value.abs().max(1.0) {
            failures.push(format!("instance {k}: oracles disagree {value} vs {dp}"));
        }
        for m in Method::ALL {
            let r = run(&p, &exhaustive(m)).unwrap();
            let gap = (r.final_row().z_inf - value).abs();
            worst = worst.max(gap);
            if r.status != RunStatus::Converged || gap > 1e-5 {
                failures.push(format!("instance {k} {}: {:?}, gap {gap:e}", m.label(), r.status));
            }
            runs.keep(format!("oracle {k} {}", m.label()), &r);
            results.push((p.clone(), m, r));
        }
    }
    verdict(
        failures.is_empty(),
        format!("20 instances x 6 methods, max |z_inf - value| = {worst:.2e} {}", failures.join("; ")),
    )
}

fn monotone(runs: &mut Runs) -> Verdict {
    // extra sampled runs on top of every run made by the other criteria
    for seed in 0..15u64 {
        let p = random_program(2000 + seed, SMALL);
        for m in [Method::Sddp, Method::SddpCs2, Method::CusmudaCs1, Method::CusmudaCs2] {
            let cfg = MethodConfig {
                sampling: Sampling::Sampled {
                    forward: 2,
                    evaluation: 20,
                },
                epsilon: 1e-9,
                max_iterations: 20,
                seed,
                no_timing: true,
                ..MethodConfig::for_method(m)
            };
            let r = run(&p, &cfg).unwrap();
            runs.keep(format!("sampled {seed} {}", m.label()), &r);
        }
    }
    let mut bad = Vec::new();
    for (name, log) in &runs.logs {
        for w in log.windows(2) {
            if w[1].z_inf < w[0].z_inf - 1e-9 {
                bad.push(format!("{name} at iteration {}: {} -> {}", w[1].iteration, w[0].z_inf, w[1].z_inf));
            }
        }
    }
    verdict(
        bad.is_empty(),
        format!("{} runs checked {}", runs.logs.len(), bad.into_iter().take(5).collect::<Vec<_>>().join("; ")),
    )
}

fn cut_validity(results: &[(StochasticProgram, Method, RunResult)], runs: &mut Runs) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::INFINITY;
    let mut cuts = 0usize;
    let mut check = |p: &StochasticProgram, r: &RunResult, rng: &mut ChaCha8Rng| {
        for s in 1..p.num_stages() {
            let blocks = r.approximation.blocks(s);
            for _ in 0..200 {
                let x = random_state(rng, p, s);
                let truth: Vec<f64> = match r.approximation.aggregation() {
                    Aggregation::MultiCut => (0..p.num_realizations(s))
                        .map(|j| dp_oracle::realization_value(p, s, j, &x))
                        .collect(),
                    Aggregation::SingleCut => vec![dp_oracle::expected_value(p, s, &x)],
                };
                for (b, v) in blocks.iter().zip(&truth) {
                    worst = worst.min(v - b.floor.value(&x));
                    for c in b.pool.cuts() {
                        worst = worst.min(v - c.value(&x));
                    }
                }
            }
            cuts += blocks.iter().map(|b| b.pool.cuts().len()).sum::<usize>();
        }
    };
    for (p, _, r) in results.iter().step_by(3).take(24) {
        check(p, r, &mut rng);
    }
    for seed in 0..6u64 {
        let p = random_program(3000 + seed, SMALL);
        for m in [Method::Sddp, Method::Muda] {
            let cfg = MethodConfig {
                sampling: Sampling::Sampled {
                    forward: 3,
                    evaluation: 10,
                },
                max_iterations: 8,
                epsilon: 1e-9,
                seed,
                no_timing: true,
                ..MethodConfig::for_method(m)
            };
            let r = run(&p, &cfg).unwrap();
            check(&p, &r, &mut rng);
            runs.keep(format!("validity {seed} {}", m.label()), &r);
        }
    }
    verdict(
        worst >= -1e-6,
        format!("{cuts} cuts at 200 states per stage, min slack {worst:.3e}"),
    )
}

fn level1_last_stage(results: &[(StochasticProgram, Method, RunResult)], runs: &mut Runs) -> Verdict {
    let last_stage_min = |r: &RunResult| {
        r.log
            .iter()
            .filter(|row| row.iteration > 0)
            .map(|row| *row.proportions.last().unwrap_or(&1.0))
            .fold(1.0f64, f64::min)
    };
    let mut worst = 1.0f64;
    let mut checked = 0;
    for (_, m, r) in results {
        if *m == Method::CusmudaCs1 {
            worst = worst.min(last_stage_min(r));
            checked += 1;
        }
    }
    let inventory = generate_instance(
        Family::Inventory,
        InstanceParams {
            stages: 5,
            realizations: 4,
            assets: 0,
        },
        7,
    )
    .unwrap();
    let sampled = |eps0: f64, seed: u64| MethodConfig {
        sampling: Sampling::Sampled {
            forward: 10,
            evaluation: 20,
        },
        epsilon0: eps0,
        epsilon: 1e-12,
        upper_bound_every: 1000,
        max_iterations: 25,
        seed,
        no_timing: true,
        ..MethodConfig::for_method(Method::CusmudaCs1)
    };
    let mut naive_worst = 1.0f64;
    for seed in 0..3 {
        let hardened = run(&inventory, &sampled(DEFAULT_EPSILON0, seed)).unwrap();
        worst = worst.min(last_stage_min(&hardened));
        checked += 1;
        runs.keep(format!("level1 inventory {seed}"), &hardened);
        let naive = run(&inventory, &sampled(0.0, seed)).unwrap();
        naive_worst = naive_worst.min(last_stage_min(&naive));
    }
    // pool-level reproduction: an exact last-stage cut one ulp below an
    // older cut at its own trial point
    let pool_case = |eps0: f64| {
        let mut p = CutPool::new(1, SelectionRule::Level1, eps0);
        let cut = |theta: f64, k| Cut {
            theta,
            beta: vec![0.0],
            birth_iteration: k,
        };
        p.add_cut(cut(0.1 + 0.2, 1)).unwrap();
        p.add_trial(&[1.0]).unwrap();
        p.add_cut(cut(0.3, 2)).unwrap();
        p.selection_stats().2
    };
    let naive_pool = pool_case(0.0);
    let hardened_pool = pool_case(DEFAULT_EPSILON0);
    let pass = worst == 1.0 && hardened_pool == 1.0 && naive_pool < 1.0;
    verdict(
        pass,
        format!(
            "{checked} runs, min stage-T proportion {worst}; with eps0 = 0: engine min {naive_worst:.3}, pool {naive_pool}; hardened pool {hardened_pool}"
        ),
    )
}

fn lml1_harmless() -> Verdict {
    let strategy = (
        prop::collection::vec((-5.0f64..5.0, prop::collection::vec(-2.0f64..2.0, 2)), 1..=50),
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..=50),
        prop::collection::vec(any::<bool>(), 100),
        any::<bool>(),
    );
    let mut runner = TestRunner::new(Config {
        cases: 300,
        failure_persistence: None,
        ..Config::default()
    });
    let result = runner.run(&strategy, |(cuts, trials, order, dup)| {
        for rule in [SelectionRule::Lml1, SelectionRule::Level1] {
            let mut pool = CutPool::new(2, rule, DEFAULT_EPSILON0);
            let (mut ci, mut ti) = (0, 0);
            let mut k = 0;
            while ci < cuts.len() || ti < trials.len() {
                let take_cut = ti >= trials.len() || (ci < cuts.len() && order[(ci + ti) % order.len()]);
                if take_cut {
                    k += 1;
                    let (theta, beta) = &cuts[ci];
                    pool.add_cut(Cut {
                        theta: *theta,
                        beta: beta.clone(),
                        birth_iteration: k,
                    })
                    .unwrap();
                    if dup && ci % 3 == 0 {
                        pool.add_cut(Cut {
                            theta: *theta,
                            beta: beta.clone(),
                            birth_iteration: k,
                        })
                        .unwrap();
                    }
                    ci += 1;
                } else {
                    pool.add_trial(&trials[ti]).unwrap();
                    ti += 1;
                }
            }
            let (_, selected, _) = pool.selection_stats();
            if rule == SelectionRule::Lml1 {
                prop_assert!(selected <= pool.trials().len());
            }
            for t in pool.trials() {
                let a = pool.evaluate(&t.point, EvalMode::SelectedOnly).unwrap();
                let b = pool.evaluate(&t.point, EvalMode::All).unwrap();
                prop_assert!((a - b).abs() <= DEFAULT_EPSILON0 * b.abs().max(1.0), "{rule:?}: {a} vs {b}");
            }
            prop_assert_eq!(pool.selected_mask(), pool.recompute_mask());
        }
        Ok(())
    });
    match result {
        Ok(()) => verdict(true, "300 random pools of up to 50 cuts and 50 trials, Level 1 and LML1".into()),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn portfolio_closed_form(runs: &mut Runs) -> Verdict {
    struct Compare<'a> {
        spec: &'a cutplane::models::PortfolioSpec,
        worst: f64,
        events: usize,
    }
    impl Observer for Compare<'_> {
        fn on_cut(&mut self, e: &CutEvent) {
            let (theta, beta) = portfolio_cut_closedform(self.spec, e.stage, e.realization, e.coupling_duals);
            let diff = beta
                .iter()
                .zip(&e.cut.beta)
                .map(|(a, b)| (a - b).abs())
                .fold((theta - e.cut.theta).abs(), f64::max);
            self.worst = self.worst.max(diff);
            self.events += 1;
        }
    }
    let spec = generate_portfolio(4, 2, 3, 5).unwrap();
    let program = build_portfolio(&spec).unwrap();
    let mut worst_theta = 0.0f64;
    let mut worst_beta = 0.0f64;
    let mut events = 0;
    for m in [Method::Muda, Method::Sddp, Method::CusmudaCs2] {
        let cfg = MethodConfig {
            sampling: Sampling::Sampled {
                forward: 2,
                evaluation: 20,
            },
            epsilon: 1e-9,
            max_iterations: 15,
            seed: 1,
            no_timing: true,
            ..MethodConfig::for_method(m)
        };
        let mut cmp = Compare {
            spec: &spec,
            worst: 0.0,
            events: 0,
        };
        let r = run_observed(&program, &cfg, &mut cmp).unwrap();
        worst_beta = worst_beta.max(cmp.worst);
        events += cmp.events;
        for s in 1..program.num_stages() {
            for p in r.approximation.pools(s) {
                for c in p.cuts() {
                    worst_theta = worst_theta.max(c.theta.abs());
                }
            }
        }
        runs.keep(format!("portfolio {}", m.label()), &r);
    }
    verdict(
        worst_beta <= 1e-8 && worst_theta <= 1e-10 && events > 0,
        format!("{events} cuts, max |beta_closed - beta| = {worst_beta:.2e}, max |theta| = {worst_theta:.2e}"),
    )
}

fn stopping_table() -> Verdict {
    // (z_inf, z_sup, epsilon, expected)
    let table: [(f64, f64, f64, bool); 50] = [
        (0.96, 1.0, 0.05, true),
        (0.0, 0.0, 0.1, true),
        (90.0, 100.0, 0.05, false),
        (95.0, 100.0, 0.05, true),
        (94.0, 100.0, 0.05, false),
        (0.0, 0.05, 0.1, true),
        (0.0, 0.1, 0.1, true),
        (0.0, 0.2, 0.1, false),
        (0.0, 0.09, 0.1, true),
        (-0.05, 0.04, 0.1, true),
        (-0.5, 0.0, 0.1, false),
        (-0.5, 0.0, 0.5, true),
        (0.0, 1.0, 0.5, false),
        (0.0, 0.5, 0.5, true),
        (-100.0, -90.0, 0.1, false),
        (-100.0, -90.0, 0.12, true),
        (-110.0, -100.0, 0.1, true),
        (-111.0, -100.0, 0.1, false),
        (10.0, 10.0, 1e-9, true),
        (10.0, 10.5, 0.01, false),
        (10.0, 10.1, 0.01, true),
        (1e6, 1.0001e6, 1e-4, true),
        (1e6, 1.001e6, 1e-4, false),
        (0.5, 0.75, 0.25, true),
        (0.5, 0.75, 0.125, false),
        (0.25, 0.5, 0.25, true),
        (0.25, 0.5, 0.125, false),
        (2.0, 3.0, 0.25, false),
        (2.0, 3.0, 0.5, true),
        (3.0, 2.0, 0.5, true),
        (3.0, 2.0, 0.25, false),
        (0.0, -0.05, 0.1, true),
        (0.0, 0.15, 0.1, false),
        (0.0, 0.15, 0.2, true),
        (1.0, 1.0625, 0.0625, true),
        (1.0, 1.125, 0.0625, false),
        (-1.0, 1.0, 1.0, false),
        (-1.0, 1.0, 2.0, true),
        (7.0, 8.0, 0.125, true),
        (7.0, 8.0, 0.0625, false),
        (64.0, 66.0, 0.03125, true),
        (64.0, 66.5, 0.03125, false),
        (-4.0, -2.0, 0.5, false),
        (-4.0, -2.0, 1.0, true),
        (0.0, 2.0, 0.5, false),
        (0.0, 2.0, 1.0, true),
        (0.875, 1.0, 0.125, true),
        (0.75, 1.0, 0.125, false),
        (100.0, 100.0, 0.5, true),
        (0.0, 1e-12, 1e-9, true),
    ];
    let wrong: Vec<String> = table
        .iter()
        .filter(|&&(zi, zs, e, want)| check_stop(zi, zs, e) != want)
        .map(|(zi, zs, e, want)| format!("({zi}, {zs}, {e}) expected {want}"))
        .collect();
    let first_clause = table.iter().filter(|c| c.0 == 0.0 && c.1 <= c.2).count();
    let second_clause = table.iter().filter(|c| (c.1 - c.0).abs() <= c.2 * c.1.abs().max(1.0)).count();
    verdict(
        wrong.is_empty() && first_clause > 0 && second_clause > 0,
        format!(
            "50 cases ({first_clause} via the zero clause, {second_clause} via the gap clause) {}",
            wrong.join("; ")
        ),
    )
}

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn proportion_trend(runs: &mut Runs) -> Verdict {
    let program = generate_instance(
        Family::Inventory,
        InstanceParams {
            stages: 10,
            realizations: 5,
            assets: 0,
        },
        1,
    )
    .unwrap();
    let cfg = |m: Method| MethodConfig {
        sampling: Sampling::Sampled {
            forward: 10,
            evaluation: 100,
        },
        epsilon: 0.05,
        upper_bound_every: 1000,
        max_iterations: 60,
        seed: 3,
        no_timing: true,
        ..MethodConfig::for_method(m)
    };
    let level1 = run(&program, &cfg(Method::CusmudaCs1)).unwrap();
    let lml1 = run(&program, &cfg(Method::CusmudaCs2)).unwrap();
    runs.keep("trend level1".into(), &level1);
    runs.keep("trend lml1".into(), &lml1);
    let p1 = mean_proportions(&level1.log);
    let p2 = mean_proportions(&lml1.log);
    let stages: Vec<f64> = (2..=10).map(|t| t as f64).collect();
    let below = p1.iter().zip(&p2).take(p1.len() - 1).all(|(a, b)| b < a);
    let (r1, r2) = (spearman(&stages, &p1), spearman(&stages, &p2));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    verdict(
        below && r1 > 0.0 && r2 > 0.0,
        format!(
            "stages 2..10 Level 1 [{}], LML1 [{}], Spearman {r1:.3} / {r2:.3}",
            fmt(&p1),
            fmt(&p2)
        ),
    )
}

fn multicut_dominance(runs: &mut Runs) -> Verdict {
    let mut worst = f64::INFINITY;
    let mut bad = Vec::new();
    for seed in 0..10u64 {
        let p = random_program(4000 + seed, SMALL);
        let cfg = |m: Method| MethodConfig {
            sampling: Sampling::Sampled {
                forward: 2,
                evaluation: 10,
            },
            epsilon: 1e-9,
            max_iterations: 20,
            seed,
            no_timing: true,
            ..MethodConfig::for_method(m)
        };
        let multi = run(&p, &cfg(Method::Muda)).unwrap();
        let single = run(&p, &cfg(Method::Sddp)).unwrap();
        for (a, b) in multi.log.iter().zip(&single.log) {
            let d = a.z_inf - b.z_inf;
            worst = worst.min(d);
            if d < -1e-9 {
                bad.push(format!("instance {seed} iteration {}: {d:.3e}", a.iteration));
            }
        }
        runs.keep(format!("dominance {seed} multi"), &multi);
        runs.keep(format!("dominance {seed} single"), &single);
    }
    verdict(
        bad.is_empty(),
        format!(
            "10 instances, min (multicut - single-cut) z_inf = {worst:.3e} {}",
            bad.into_iter().take(5).collect::<Vec<_>>().join("; ")
        ),
    )
}

fn simplex_kernel() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut failures = Vec::new();
    let mut optimal = 0;
    for k in 0..500 {
        let lp = random_lp(&mut rng, 14, 10);
        let s = solve(&lp).unwrap();
        if s.status == LpStatus::Optimal {
            optimal += 1;
        }
        if let Err(e) = check_solution(&lp, &s) {
            failures.push(format!("invariants lp {k}: {e}"));
        }
    }
    let mut agree = 0;
    for k in 0..100 {
        let lp = random_lp(&mut rng, 10, 7);
        let s = solve(&lp).unwrap();
        match (s.status, vertex_enumeration(&lp)) {
            (LpStatus::Optimal, Some(v)) if (s.objective_value - v).abs() <= 1e-8 * v.abs().max(1.0) => agree += 1,
            (LpStatus::Infeasible, None) => agree += 1,
            (st, o) => failures.push(format!("enumeration lp {k}: {st:?} {} vs {o:?}", s.objective_value)),
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "500 LPs ({optimal} optimal) pass gap/vertex checks, {agree}/100 match enumeration {}",
            failures.into_iter().take(5).collect::<Vec<_>>().join("; ")
        ),
    )
}

fn main() -> ExitCode {
    let names = [
        "oracle equivalence",
        "lower-bound monotonicity",
        "cut validity",
        "Level 1 last-stage completeness",
        "LML1 cardinality and harmlessness",
        "portfolio closed-form cuts",
        "stopping rule truth table",
        "selected-proportion trend",
        "multicut dominance",
        "simplex kernel",
    ];
    let mut runs = Runs::default();
    let mut results = Vec::new();
    let mut verdicts: Vec<Option<(Verdict, f64)>> = (0..10).map(|_| None).collect();
    let mut timed = |i: usize, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        verdicts[i] = Some((v, t.elapsed().as_secs_f64()));
    };
    timed(0, &mut || oracle_equivalence(&mut runs, &mut results));
    timed(2, &mut || cut_validity(&results, &mut runs));
    timed(3, &mut || level1_last_stage(&results, &mut runs));
    timed(4, &mut lml1_harmless);
    timed(5, &mut || portfolio_closed_form(&mut runs));
    timed(6, &mut stopping_table);
    timed(7, &mut || proportion_trend(&mut runs));
    timed(8, &mut || multicut_dominance(&mut runs));
    timed(9, &mut simplex_kernel);
    timed(1, &mut || monotone(&mut runs));
    let mut all = true;
    for (i, v) in verdicts.into_iter().enumerate() {
        let (v, secs) = v.expect("every criterion ran");
        all &= v.pass;
        println!(
            "criterion {:>2} [{}] {}: {} ({secs:.1} s)",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            names[i],
            v.detail.trim_end()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
