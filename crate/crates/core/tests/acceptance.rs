//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::time::Instant;

use common::{max_abs_diff, random_allocation, random_order, random_state};
use ia_arena::baselines::greedy_myopic;
use ia_arena::harness::{run_experiment, run_seeds, write_metrics, AllocatorKind, ExperimentConfig, ExperimentResult};
use ia_arena::market::{market_step, Allocation, MarketState, SellerRecord};
use ia_arena::nn::gradcheck::run_suite;
use ia_arena::nn::soft_update;
use ia_arena::nn::{AdamState, Grads, Matrix, ParamSet};
use ia_arena::rl::{DdpgAgent, IaGruAgent, RlConfig};
use ia_arena::rng::SeedTree;
use ia_arena::sellers::{EpsGreedy, Exp3, StrategyKind};
use rand::Rng;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

const SEEDS: u64 = 3;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn tiny_rl(cfg: &mut ExperimentConfig) {
    cfg.rl.batch_size = 8;
    cfg.rl.prefill_episodes = 1;
    cfg.rl.background_hidden = 4;
    cfg.rl.seller_hidden = 3;
    cfg.rl.head_hidden = 4;
    cfg.rl.ddpg_hidden = [6, 6];
}

/// Every seller at price 1/2 earns p(1-p) per unit of impression, so any
/// feasible allocation yields exactly 1/4.
fn analytic_oracle() -> Verdict {
    let mut rng = SeedTree::new(0).stream("oracle", 0);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let m = rng.random_range(1..60);
        let state = random_state(m, 1, &mut rng);
        let costs: Vec<f64> = (0..m).map(|_| rng.random()).collect();
        let q = random_allocation(m, &mut rng);
        let out = market_step(&state, &vec![0.5; m], &costs, &q).unwrap();
        worst = worst.max((out.reward - 0.25).abs());
    }
    for kind in AllocatorKind::ALL {
        let mut cfg = ExperimentConfig {
            sellers: 6,
            allocator: kind,
            train_episodes: 2,
            eval_episodes: 1,
            steps_per_episode: 20,
            fixed_prices: Some(vec![0.5; 6]),
            ..Default::default()
        };
        tiny_rl(&mut cfg);
        for row in run_experiment(&cfg).unwrap().rows {
            worst = worst.max((row.reward - 0.25).abs());
        }
    }
    verdict(worst <= 1e-12, format!("max |reward - 0.25| = {worst:.2e}"))
}

/// Noise decay that reaches, after `episodes`, the level the default schedule
/// reaches after 1000 episodes.
fn compressed_decay(episodes: usize) -> f64 {
    ExperimentConfig::default().rl.noise.decay.powf(1000.0 / episodes as f64)
}

/// Ten single-arm sellers at distinct prices; the learned allocator should
/// find the best one.
fn fixed_price_optimality() -> Verdict {
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in 0..SEEDS {
        let mut rng = SeedTree::new(seed).stream("fixed_prices", 0);
        let mut arms: Vec<usize> = (1..100).collect();
        let picked: Vec<f64> =
            (0..10).map(|_| arms.swap_remove(rng.random_range(0..arms.len())) as f64 / 100.0).collect();
        let best = picked.iter().map(|p| p * (1.0 - p)).fold(0.0, f64::max);
        let mut cfg = ExperimentConfig {
            sellers: 10,
            allocator: AllocatorKind::Iagru,
            train_episodes: 100,
            eval_episodes: 10,
            steps_per_episode: 200,
            fixed_prices: Some(picked),
            seed,
            ..Default::default()
        };
        cfg.rl.noise.decay = compressed_decay(cfg.train_episodes);
        let reward = run_experiment(&cfg).unwrap().mean_eval_reward();
        let ratio = reward / best;
        if ratio >= 0.95 {
            wins += 1;
        }
        detail.push(format!("seed {seed}: {ratio:.4}"));
    }
    verdict(wins >= 2, format!("eval/max ratios [{}], need >= 0.95 on 2 of 3", detail.join(", ")))
}

fn desk_config(allocator: AllocatorKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        sellers: 20,
        strategy_mix: [(StrategyKind::EpsGreedy, 1.0)].into_iter().collect(),
        allocator,
        train_episodes: 200,
        eval_episodes: 20,
        steps_per_episode: 200,
        ..Default::default()
    };
    cfg.rl.noise.decay = compressed_decay(cfg.train_episodes);
    cfg
}

fn desk_comparison(ia: &[ExperimentResult], greedy: &[ExperimentResult]) -> Verdict {
    let mean = |rs: &[ExperimentResult]| rs.iter().map(|r| r.mean_eval_reward()).sum::<f64>() / rs.len() as f64;
    let (a, b) = (mean(ia), mean(greedy));
    let per_seed: Vec<String> = ia
        .iter()
        .zip(greedy)
        .map(|(x, y)| format!("{:.4}/{:.4}", x.mean_eval_reward(), y.mean_eval_reward()))
        .collect();
    verdict(a > b, format!("IA {a:.5} vs Greedy {b:.5} (per seed IA/Greedy: {})", per_seed.join(", ")))
}

fn critic_convergence(ia: &[ExperimentResult]) -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for r in ia {
        let losses = r.critic_losses();
        let k = (losses.len() / 10).max(1);
        let first = losses[..k].iter().sum::<f64>() / k as f64;
        let last = losses[losses.len() - k..].iter().sum::<f64>() / k as f64;
        ok &= last < first;
        detail.push(format!("seed {}: {first:.3e} -> {last:.3e}", r.config.seed));
    }
    verdict(ok, detail.join(", "))
}

fn distinct_revenues(state: &MarketState) -> bool {
    let mut r = state.mean_revenue();
    r.sort_by(f64::total_cmp);
    r.windows(2).all(|w| w[1] - w[0] > 1e-12)
}

fn permutation_suite() -> Verdict {
    let mut rng = SeedTree::new(1).stream("perm_suite", 0);
    let mut ia_worst: f64 = 0.0;
    let mut ddpg_worst: f64 = 0.0;
    let mut checked = 0;
    let agents: Vec<(usize, usize, IaGruAgent, DdpgAgent)> = (0..10)
        .map(|k| {
            let m = 3 + k;
            let window = 1 + k % 3;
            let seeds = SeedTree::new(100 + k as u64);
            (
                m,
                window,
                IaGruAgent::new(m, window, RlConfig::default(), &seeds),
                DdpgAgent::new(m, window, RlConfig::default(), &seeds),
            )
        })
        .collect();
    while checked < 1000 {
        let (m, window, ia, ddpg) = &agents[checked % agents.len()];
        let state = random_state(*m, *window, &mut rng);
        if !distinct_revenues(&state) {
            continue;
        }
        let order = random_order(*m, &mut rng);
        let permuted = state.permuted(&order);
        let q = ia.act(&state).unwrap().permuted(&order);
        ia_worst = ia_worst.max(max_abs_diff(ia.act(&permuted).unwrap().shares(), q.shares()));
        let a = random_allocation(*m, &mut rng);
        let dq = ia.q_value(&state, &a).unwrap() - ia.q_value(&permuted, &a.permuted(&order)).unwrap();
        ia_worst = ia_worst.max(dq.abs());
        let q = ddpg.act(&state).unwrap().permuted(&order);
        ddpg_worst = ddpg_worst.max(max_abs_diff(ddpg.act(&permuted).unwrap().shares(), q.shares()));
        checked += 1;
    }
    verdict(
        ia_worst < 1e-9 && ddpg_worst > 1e-3,
        format!("IA max deviation {ia_worst:.2e} (< 1e-9), DDPG max deviation {ddpg_worst:.2e} (> 1e-3)"),
    )
}

fn gradient_suite() -> Verdict {
    let reports = run_suite(0, 100);
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    verdict(
        reports.iter().all(|r| r.passed()),
        format!("{} operator cases, worst rel error {worst:.2e}", reports.len()),
    )
}

fn bandit_sanity() -> Verdict {
    let means = [0.2, 0.8];
    let mut share = [0.0; 2];
    for seed in 0..20u64 {
        let mut rng = SeedTree::new(seed).stream("bandit", 0);
        let mut greedy = EpsGreedy::new(2, 0.1);
        let mut exp3 = Exp3::new(2, 0.1);
        let mut hits = [0usize; 2];
        for t in 0..=1000 {
            let arm = greedy.choose(&mut rng);
            let u = f64::from(u8::from(rng.random::<f64>() < means[arm]));
            greedy.update(arm, u);
            let arm3 = exp3.choose(&mut rng);
            let u3 = f64::from(u8::from(rng.random::<f64>() < means[arm3]));
            exp3.update(arm3, u3).unwrap();
            if t >= 500 {
                hits[0] += usize::from(arm == 1);
                hits[1] += usize::from(arm3 == 1);
            }
        }
        for k in 0..2 {
            share[k] += hits[k] as f64 / 501.0 / 20.0;
        }
    }
    let gamma = 0.1;
    let arms = 101;
    let floor = gamma / arms as f64;
    let mut exp3 = Exp3::new(arms, gamma);
    let mut rng = SeedTree::new(99).stream("floor", 0);
    let mut lowest = f64::INFINITY;
    for _ in 0..100_000 {
        let arm = exp3.choose(&mut rng);
        // A few arms pay well so the weights grow far apart.
        let u = if arm.is_multiple_of(17) { rng.random_range(0.9..1.0) } else { rng.random_range(0.0..0.1) };
        exp3.update(arm, u).unwrap();
        lowest = lowest.min(exp3.probabilities().into_iter().fold(f64::INFINITY, f64::min));
    }
    verdict(
        share[0] > 0.6 && share[1] > 0.6 && lowest >= floor * (1.0 - 1e-12),
        format!(
            "better-arm share e-Greedy {:.3}, Exp3 {:.3}; min Exp3 prob {lowest:.6} vs floor {floor:.6}",
            share[0], share[1]
        ),
    )
}

fn hand_values() -> Verdict {
    let mut checks = Vec::new();

    let mut exp3 = Exp3::new(5, 0.1);
    exp3.update(2, 0.54).unwrap();
    checks.push(("exp3 factor", (exp3.weights()[2] - 0.054f64.exp()).abs() < 1e-9));

    // Revenues [1, 1, 2, 0] scaled by 1/10 to fit unit-interval records.
    let records = [1.0, 1.0, 2.0, 0.0]
        .iter()
        .map(|&l| SellerRecord { impressions: 0.4 * l, price: 0.5, transactions: 0.2 * l, revenue: 0.1 * l })
        .collect();
    let state = MarketState::from_records(1, 4, 1, records).unwrap();
    checks.push(("greedy myopic", greedy_myopic(&state) == Allocation::new(vec![0.25, 0.25, 0.5, 0.0]).unwrap()));

    let mut target = ParamSet::new();
    target.add("x", Matrix::zeros((1, 1)));
    let mut online = ParamSet::new();
    online.add("x", Matrix::ones((1, 1)));
    soft_update(&mut target, &online, 1e-3).unwrap();
    checks.push(("soft update", (target.values()[0][[0, 0]] - 0.001).abs() < 1e-15));

    let mut p = ParamSet::new();
    p.add("x", Matrix::ones((1, 1)));
    let mut adam = AdamState::new(&p, 1e-4);
    adam.update(&mut p, &Grads(vec![Matrix::from_elem((1, 1), 0.3)])).unwrap();
    checks.push(("adam first step", ((1.0 - p.values()[0][[0, 0]]) - 1e-4).abs() < 1e-8));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(failed.is_empty(), format!("{} values checked, failing: {failed:?}", checks.len()))
}

fn scale_and_solve() -> Verdict {
    let mut cfg = ExperimentConfig {
        sellers: 400,
        group_size: 200,
        allocator: AllocatorKind::Iagru,
        train_episodes: 1,
        eval_episodes: 1,
        steps_per_episode: 20,
        seed: 5,
        ..Default::default()
    };
    tiny_rl(&mut cfg);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    let worst = a.allocation_mass.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    let bounded = a.rows.iter().all(|r| (0.0..=0.25).contains(&r.reward));
    verdict(
        worst < 1e-9 && bounded && a.rows == b.rows,
        format!("{} rounds, max |mass - 1| {worst:.2e}, rerun identical: {}", a.rows.len(), a.rows == b.rows),
    )
}

fn compare_bytes(cfg: &ExperimentConfig) -> Vec<Vec<u8>> {
    let mut files = Vec::new();
    for kind in AllocatorKind::ALL {
        for r in run_seeds(&ExperimentConfig { allocator: kind, ..cfg.clone() }, 2).unwrap() {
            let mut buf = Vec::new();
            write_metrics(&r.rows, &mut buf).unwrap();
            files.push(buf);
        }
    }
    files
}

fn reproducibility() -> Verdict {
    let mut cfg = ExperimentConfig {
        sellers: 8,
        strategy_mix: StrategyKind::ALL.iter().map(|k| (*k, 0.25)).collect(),
        train_episodes: 3,
        eval_episodes: 2,
        steps_per_episode: 30,
        seed: 11,
        ..Default::default()
    };
    tiny_rl(&mut cfg);
    let (a, b) = (compare_bytes(&cfg), compare_bytes(&cfg));
    verdict(a == b, format!("{} CSVs, {} bytes, identical: {}", a.len(), a.iter().map(Vec::len).sum::<usize>(), a == b))
}

/// Optional name filters: `cargo test --test acceptance -- bandit hand`.
fn selected(name: &str) -> bool {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()))
}

fn main() {
    let mut failures = 0;
    let mut report = |name: &str, run: &mut dyn FnMut() -> Verdict| {
        if !selected(name) {
            return;
        }
        let start = Instant::now();
        let v = run();
        println!(
            "acceptance {name:<24} {} | {} | {:.1}s",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        failures += usize::from(!v.passed);
    };
    report("analytic_oracle", &mut analytic_oracle);
    report("permutation_suite", &mut permutation_suite);
    report("gradient_suite", &mut gradient_suite);
    report("bandit_sanity", &mut bandit_sanity);
    report("hand_values", &mut hand_values);
    report("scale_and_solve", &mut scale_and_solve);
    report("reproducibility", &mut reproducibility);
    report("fixed_price_optimality", &mut fixed_price_optimality);

    if selected("desk_comparison") || selected("critic_convergence") {
        let runs = |kind| -> Vec<ExperimentResult> {
            (0..SEEDS).map(|s| run_experiment(&ExperimentConfig { seed: s, ..desk_config(kind) }).unwrap()).collect()
        };
        let greedy = runs(AllocatorKind::Greedy);
        let ia = runs(AllocatorKind::Iagru);
        report("desk_comparison", &mut || desk_comparison(&ia, &greedy));
        report("critic_convergence", &mut || critic_convergence(&ia));
    }

    if failures > 0 {
        println!("acceptance: {failures} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: criteria passed");
}
