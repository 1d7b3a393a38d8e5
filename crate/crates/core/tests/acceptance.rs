//! End-to-end acceptance run: one pass/fail line per criterion.
//!
//! Run with `cargo test --test acceptance`. Set `ACCEPTANCE_STRICT=1` to turn
//! any failing line into a non-zero exit status.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sewdiff::denoiser::{gradcheck, DenoiserConfig};
use sewdiff::engine::{complete, sample, train, LrSchedule, Model, RunConfig, TrainOutcome};
use sewdiff::metrics::{
    canonicalize, evaluate, evaluate_pair, evaluate_with_matching, match_canonical, matching_from_pairs, pair_cost,
    EvalReport,
};
use sewdiff::pattern::{to_canonical_json, Pattern};
use sewdiff::scheduler::{DdpmScheduler, SchedulerConfig};
use sewdiff::synthgen::{generate_corpus, CorpusEntry};
use sewdiff::tokenizer::{compute_stats, encode, TokenLayout};

const OVERFIT_SEED: u64 = 1;
const OVERFIT_CORPUS_SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn report(n: usize, name: &str, budget: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let o = run();
    let dt = t0.elapsed();
    let in_time = dt <= budget;
    let pass = o.pass && in_time;
    let time_note = if in_time { String::new() } else { format!(" over budget {budget:?}") };
    println!(
        "criterion {n:>2} {name:<28} {}  ({}; {:.1}s{time_note})",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        dt.as_secs_f64()
    );
    pass
}

fn token_rows() -> Outcome {
    let rows: Vec<(&str, usize)> = ["garmentcode", "dresscode", "sewfactory"]
        .iter()
        .map(|n| (*n, TokenLayout::preset(n).unwrap().seq_len()))
        .collect();
    let want = [1443, 100, 168];
    let pass = rows.iter().zip(want).all(|((_, r), w)| *r == w);
    outcome(pass, format!("{rows:?}"))
}

fn round_trip() -> Outcome {
    let layout = TokenLayout::DRESSCODE;
    let pats: Vec<Pattern> = generate_corpus(200, 2024).into_iter().map(|e| e.pattern).collect();
    let stats = compute_stats(&pats, &layout).unwrap();
    let mut worst = [0.0f64; 2];
    for (i, p) in pats.iter().enumerate() {
        for (k, shuffle) in [None, Some(i as u64 + 1)].into_iter().enumerate() {
            match common::round_trip_error(p, &layout, &stats, shuffle) {
                Ok(e) => worst[k] = worst[k].max(e),
                Err(m) => return outcome(false, format!("pattern {i}: {m}")),
            }
        }
    }
    outcome(
        worst.iter().all(|&e| e <= 1e-5),
        format!("max vertex error {:.2e} cm plain, {:.2e} cm shuffled", worst[0], worst[1]),
    )
}

fn scheduler_checks() -> Outcome {
    let s = DdpmScheduler::new(SchedulerConfig::default()).unwrap();
    let mut prod = 1.0;
    let mut table_err = 0.0f64;
    for (t, b) in s.betas.iter().enumerate() {
        prod *= 1.0 - b;
        table_err = table_err.max((s.alpha_bars[t] - prod).abs());
    }
    let snr: Vec<f64> = s.alpha_bars.iter().map(|a| a / (1.0 - a)).collect();
    let decreasing = snr.windows(2).all(|w| w[1] < w[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x0: Vec<f64> = (0..1300).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut inv_err = 0.0f64;
    for t in 0..s.num_train_timesteps() {
        let eps: Vec<f64> = (0..x0.len()).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let xt = s.add_noise(&x0, &eps, t).unwrap();
        let back = s.predict_x0(&eps, t, &xt).unwrap();
        inv_err = back.iter().zip(&x0).fold(inv_err, |m, (a, b)| m.max((a - b).abs()));
    }
    outcome(
        table_err <= 1e-12 && decreasing && inv_err <= 1e-6,
        format!("table err {table_err:.1e}, SNR decreasing {decreasing}, inversion err {inv_err:.1e}"),
    )
}

fn gradient_fidelity() -> Outcome {
    let cfg = DenoiserConfig::desk(&TokenLayout::DRESSCODE);
    let r = gradcheck(cfg, 17, 240).unwrap();
    outcome(
        r.max_rel_error() < 1e-4 && r.checks.len() >= 200,
        format!("{} coordinates, max relative error {:.2e}", r.checks.len(), r.max_rel_error()),
    )
}

/// Desk denoiser with a larger batch and learning rate than the defaults so
/// that 5,000 steps fit the time budget and still make progress.
fn overfit_config() -> RunConfig {
    let mut c = RunConfig {
        seed: OVERFIT_SEED,
        epochs: 1_000_000,
        max_steps: Some(5000),
        target_loss: Some(0.02),
        batch_size: 32,
        lr_schedule: LrSchedule::Cosine { warmup_steps: 200, final_ratio: 0.01 },
        ..RunConfig::default()
    };
    c.optimizer.lr = 2e-3;
    c
}

fn train_overfit(corpus: &[CorpusEntry]) -> TrainOutcome {
    let config = overfit_config();
    let pats: Vec<Pattern> = corpus.iter().map(|e| e.pattern.clone()).collect();
    let stats = compute_stats(&pats, &config.layout().unwrap()).unwrap();
    train(corpus, stats, config, None, None).unwrap()
}

fn passes_reconstruction(r: &EvalReport) -> bool {
    r.num_panel_acc == 1.0 && r.num_edge_acc >= 0.95 && r.panel_l2 < 1.0 && r.stitch_f1 >= 0.95
}

fn summary(r: &EvalReport) -> String {
    format!(
        "Panel L2 {:.3} cm, #Panel {:.3}, #Edge {:.3}, stitch F1 {:.3}",
        r.panel_l2, r.num_panel_acc, r.num_edge_acc, r.stitch_f1
    )
}

fn overfit_reconstruction(corpus: &[CorpusEntry], trained: &TrainOutcome) -> Outcome {
    let model = &trained.model;
    let pairs: Vec<(Pattern, Pattern)> = corpus
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let cond = model.conditions(Some(&e.detailed), None).unwrap();
            let s = sample(model, &cond, 50, 100 + i as u64).unwrap();
            (s.decoded.pattern, e.pattern.clone())
        })
        .collect();
    let r = evaluate(&pairs);
    outcome(
        passes_reconstruction(&r),
        format!(
            "stopped {:?} at best loss {:.4} (step {}); {}",
            trained.stop,
            trained.best_loss,
            trained.best_step,
            summary(&r)
        ),
    )
}

fn completion(corpus: &[CorpusEntry], model: &Model) -> Outcome {
    let layout = model.layout;
    let block = layout.max_edges * layout.token_width();
    let mut pairs = Vec::new();
    let mut preserved = true;
    for (i, e) in corpus.iter().enumerate() {
        let frag = e.pattern.prefix(1);
        let cond = model.conditions(Some(&e.detailed), None).unwrap();
        let out = complete(model, &frag, &cond, 50, 200 + i as u64).unwrap();
        let known = encode(&frag, &layout, &model.stats, None).unwrap();
        preserved &= out.grid.values[..block] == known.values[..block];
        pairs.push((out.decoded.pattern, e.pattern.clone()));
    }
    let r = evaluate(&pairs);
    outcome(
        preserved && r.panel_l2 < 1.0,
        format!("known rows bit-exact {preserved}; {}", summary(&r)),
    )
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mismatches = 0;
    for _ in 0..50 {
        let n = rng.random_range(1..=5);
        let gt = common::random_pattern(&mut rng, n);
        let pred = if rng.random_bool(0.6) {
            common::perturb(&mut rng, &gt)
        } else {
            let n = rng.random_range(1..=5);
            common::random_pattern(&mut rng, n)
        };
        let (pc, gc) = (canonicalize(&pred), canonicalize(&gt));
        let best = common::assignments(pc.len(), gc.len())
            .into_iter()
            .map(|a| (a.iter().map(|&(p, g)| pair_cost(&pc[p], &gc[g])).sum::<f64>(), a))
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .unwrap()
            .1;
        let brute = matching_from_pairs(&pc, &gc, best);
        let same_pairs = match_canonical(&pc, &gc).pairs == brute.pairs;
        let same_metrics = evaluate_pair(&pred, &gt) == evaluate_with_matching(&pred, &gt, &pc, &gc, &brute);
        if !(same_pairs && same_metrics) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 50 pairs differ"))
}

fn self_identity() -> Outcome {
    let pairs: Vec<_> = generate_corpus(200, 2024).into_iter().map(|e| (e.pattern.clone(), e.pattern)).collect();
    let r = evaluate(&pairs);
    let pass = r.panel_l2 == 0.0
        && r.num_panel_acc == 1.0
        && r.num_edge_acc == 1.0
        && r.rot_l2 == 0.0
        && r.trans_l2 == 0.0
        && r.stitch_f1 == 1.0;
    outcome(pass, format!("{} samples; {}, rot {}, trans {}", r.n_samples, summary(&r), r.rot_l2, r.trans_l2))
}

/// Per-step time may not grow with the number of steps; 50% slack absorbs
/// timer noise on a shared machine.
fn multi_step(corpus: &[CorpusEntry], model: &Model) -> Outcome {
    let cond = model.conditions(Some(&corpus[0].detailed), None).unwrap();
    let mut per_step = Vec::new();
    let mut notes = Vec::new();
    for n in [50, 200, 500, 1000] {
        let t0 = Instant::now();
        let s = match sample(model, &cond, n, 5) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("{n} steps: {e}")),
        };
        let dt = t0.elapsed().as_secs_f64();
        if !s.decoded.pattern.panels.is_empty() {
            if let Err(e) = s.decoded.pattern.validate() {
                return outcome(false, format!("{n} steps decoded an invalid pattern: {e}"));
            }
        }
        per_step.push(dt / n as f64);
        notes.push(format!("{n}: {dt:.2}s/{} panels", s.decoded.pattern.panels.len()));
    }
    let t50 = per_step[0] * 50.0;
    let linear = per_step.iter().all(|&p| p <= per_step[0] * 1.5);
    outcome(t50 < 5.0 && linear, format!("{}; linear {linear}", notes.join(", ")))
}

fn determinism(corpus: &[CorpusEntry], model: &Model) -> Outcome {
    let a = generate_corpus(12, 31);
    let b = generate_corpus(12, 31);
    let corpora = a.iter().zip(&b).all(|(x, y)| {
        to_canonical_json(&x.pattern) == to_canonical_json(&y.pattern)
            && x.brief == y.brief
            && x.detailed == y.detailed
            && x.sketch == y.sketch
    });

    let config = RunConfig { seed: 5, max_steps: Some(101), epochs: 1_000_000, batch_size: 4, ..RunConfig::default() };
    let pats: Vec<Pattern> = corpus.iter().map(|e| e.pattern.clone()).collect();
    let stats = compute_stats(&pats, &config.layout().unwrap()).unwrap();
    let run = || train(corpus, stats.clone(), config.clone(), None, None).unwrap().trace;
    let (ta, tb) = (run(), run());
    let traces = ta.len() > 100 && tb.len() > 100 && (ta[100].loss - tb[100].loss).abs() <= 1e-6;

    let cond = model.conditions(Some(&corpus[1].detailed), None).unwrap();
    let grids = sample(model, &cond, 50, 77).unwrap().grid.values == sample(model, &cond, 50, 77).unwrap().grid.values;
    outcome(
        corpora && traces && grids,
        format!("corpora {corpora}, loss trace at step 100 {traces}, sampled grids {grids}"),
    )
}

fn main() {
    let mut results = Vec::new();
    results.push(report(1, "token rows", Duration::from_secs(1), token_rows));
    results.push(report(2, "tokenizer round trip", Duration::from_secs(30), round_trip));
    results.push(report(3, "scheduler", Duration::from_secs(10), scheduler_checks));
    results.push(report(4, "gradient fidelity", Duration::from_secs(300), gradient_fidelity));

    let corpus = generate_corpus(8, OVERFIT_CORPUS_SEED);
    let mut trained = None;
    results.push(report(5, "overfit reconstruction", Duration::from_secs(1200), || {
        let t = train_overfit(&corpus);
        let o = overfit_reconstruction(&corpus, &t);
        trained = Some(t);
        o
    }));
    let model = trained.expect("criterion 5 trains the model").model;
    results.push(report(6, "completion", Duration::from_secs(120), || completion(&corpus, &model)));
    results.push(report(7, "metric oracle", Duration::from_secs(60), metric_oracle));
    results.push(report(8, "self evaluation", Duration::from_secs(30), self_identity));
    results.push(report(9, "multi-step sampling", Duration::from_secs(600), || multi_step(&corpus, &model)));
    results.push(report(10, "determinism", Duration::from_secs(600), || determinism(&corpus, &model)));

    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed < results.len() && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
