//! End-to-end acceptance suite: one PASS/FAIL line per criterion, non-zero
//! exit status if any criterion fails.

use std::collections::{HashSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use inmt_core::corpus::{BOS, EOS, PAD};
use inmt_core::decoding::{beam_search, normalized_score, BeamConfig};
use inmt_core::engine::Engine;
use inmt_core::eval::{bleu, edit_distance, ksmr, ter, ter_edits, SentenceEffort};
use inmt_core::inmt::{apply_feedback, baseline_effort, simulate_corpus, simulate_user, start_session, EffortReport, Feedback};
use inmt_core::model::{
    decoder_step, encode_source, forward_logprob, init_decoder_state, is_bias, log_softmax, AttentionKind, CacheMode,
    ModelConfig, ModelParams,
};
use inmt_core::toy::*;
use inmt_core::training::{corpus_bleu, online_update, sample_loss, sample_loss_and_grad, OptimizerState, TrainConfig};
use inmt_service::api::{AcceptResponse, CorrectionResponse, CreateSessionResponse};
use inmt_service::server::{router, AppState};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Check = Result<String, String>;

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn run(number: usize, name: &str, check: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
        let message = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {message}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS {number}. {name}: {detail} [{secs:.1}s]");
            true
        }
        Err(detail) => {
            println!("FAIL {number}. {name}: {detail} [{secs:.1}s]");
            false
        }
    }
}

// ---------------------------------------------------------------- 1

fn gradient_oracle() -> Check {
    const H: f64 = 1e-5;
    const FLOOR: f64 = 1e-6;
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for (seed, attention) in [(1u64, AttentionKind::Additive), (2, AttentionKind::Dot)] {
        let config = ModelConfig {
            src_vocab: 8,
            trg_vocab: 8,
            emb_dim: 6,
            state_dim: 8,
            att_dim: 7,
            attention,
        };
        let mut params = ModelParams::init(config, seed).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 10);
        for (name, mut t) in params.tensors_mut() {
            if is_bias(name) {
                t.iter_mut().for_each(|v| *v = rng.gen_range(-0.3..0.3));
            }
        }
        let source = [BOS, 4, 6, 5, 7, EOS];
        let target = [BOS, 5, 7, 4, 6, EOS];
        let train = TrainConfig {
            label_smoothing: 0.1,
            coverage_lambda: 0.2,
            ..TrainConfig::default()
        };
        let loss = |p: &ModelParams| sample_loss_and_grad(p, &source, &target, &train, 0.2, 1.0).unwrap().0;
        let (_, grads) = sample_loss_and_grad(&params, &source, &target, &train, 0.2, 1.0).map_err(|e| e.to_string())?;
        let analytic: Vec<(&str, Vec<f64>)> = grads.tensors().into_iter().map(|(n, g)| (n, g.iter().copied().collect())).collect();
        let mut probe = params.clone();
        for (ti, (name, grad)) in analytic.iter().enumerate() {
            for (idx, &an) in grad.iter().enumerate() {
                let nudge = |p: &mut ModelParams, v: f64| {
                    *p.tensors_mut()[ti].1.iter_mut().nth(idx).unwrap() = v;
                };
                let orig = *params.tensors()[ti].1.iter().nth(idx).unwrap();
                nudge(&mut probe, orig + H);
                let up = loss(&probe);
                nudge(&mut probe, orig - H);
                let down = loss(&probe);
                nudge(&mut probe, orig);
                let fd = (up - down) / (2.0 * H);
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(FLOOR);
                if rel > worst {
                    worst = rel;
                }
                ensure(rel < 1e-4, || format!("{attention:?} {name}[{idx}]: analytic {an:e} vs numeric {fd:e}"))?;
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{checked} parameters, both attention kinds, max relative error {worst:.2e} (< 1e-4)"))
}

// ---------------------------------------------------------------- 2

fn tiny_model(seed: u64, trg_vocab: usize, attention: AttentionKind) -> ModelParams {
    let config = ModelConfig {
        src_vocab: 8,
        trg_vocab,
        emb_dim: 4,
        state_dim: 5,
        att_dim: 3,
        attention,
    };
    let mut p = ModelParams::init(config, seed).unwrap();
    p.output_w.mapv_inplace(|v| v * 4.0);
    p
}

fn random_source(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = rng.gen_range(1..=4);
    let mut ids = vec![BOS];
    ids.extend((0..n).map(|_| rng.gen_range(4..8)));
    ids.push(EOS);
    ids
}

/// Every admissible output of at most `max_len` tokens.
fn enumerate_outputs(trg_vocab: usize, max_len: usize, min_len: usize) -> Vec<Vec<usize>> {
    let regular: Vec<usize> = (0..trg_vocab).filter(|&t| t != PAD && t != BOS && t != EOS).collect();
    let mut out = Vec::new();
    let mut frontier = vec![Vec::new()];
    for len in 1..=max_len {
        let mut next = Vec::new();
        for prefix in &frontier {
            if prefix.len() >= min_len {
                out.push([prefix.as_slice(), &[EOS]].concat());
            }
            for &t in &regular {
                let y = [prefix.as_slice(), &[t]].concat();
                if len == max_len {
                    out.push(y);
                } else {
                    next.push(y);
                }
            }
        }
        frontier = next;
    }
    out
}

fn exhaustive_best(p: &ModelParams, source: &[usize], config: &BeamConfig) -> (Vec<usize>, f64) {
    enumerate_outputs(p.config.trg_vocab, config.max_len(0), config.min_len)
        .into_iter()
        .map(|y| {
            let target = [&[BOS], y.as_slice()].concat();
            let fwd = forward_logprob(p, source, &target, CacheMode::Discard).unwrap();
            let log_prob: f64 = fwd.log_probs.iter().sum();
            let coverage = fwd.attention.iter().fold(Array1::zeros(source.len()), |acc, a| acc + a);
            let s = normalized_score(log_prob, y.len(), &coverage, config);
            (y, s)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
        .unwrap()
}

fn greedy(p: &ModelParams, source: &[usize], max_len: usize) -> Vec<usize> {
    let ann = encode_source(p, source).unwrap();
    let mut state = init_decoder_state(p, &ann);
    let mut prev = BOS;
    let mut out = Vec::new();
    while out.len() < max_len {
        let (next, logits) = decoder_step(p, prev, &state, &ann).unwrap();
        let lp = log_softmax(logits.view());
        let t = (0..lp.len())
            .filter(|&t| t != PAD && t != BOS)
            .fold(None, |best: Option<usize>, t| match best {
                Some(b) if lp[b] >= lp[t] => Some(b),
                _ => Some(t),
            })
            .unwrap();
        out.push(t);
        if t == EOS {
            break;
        }
        state = next;
        prev = t;
    }
    out
}

fn beam_exactness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for m in 0..10u64 {
        let attention = if m % 2 == 0 { AttentionKind::Additive } else { AttentionKind::Dot };
        let p = tiny_model(500 + m, 6, attention);
        let source = random_source(&mut rng);
        let config = BeamConfig {
            beam_size: 6usize.pow(5),
            max_len_a: 0.0,
            max_len_b: 5.0,
            min_len: rng.gen_range(0..=2),
            length_alpha: rng.gen_range(0.0..1.5),
            coverage_beta: rng.gen_range(0.0..0.5),
        };
        let best = beam_search(&[&p], &source, &config).map_err(|e| e.to_string())?.remove(0);
        let (y, s) = exhaustive_best(&p, &source, &config);
        ensure(best.tokens == y && (best.score - s).abs() < 1e-12, || {
            format!("model {m}: beam {:?} ({}) vs exhaustive {y:?} ({s})", best.tokens, best.score)
        })?;
    }
    let p = tiny_model(42, 12, AttentionKind::Additive);
    let config = BeamConfig {
        beam_size: 1,
        ..BeamConfig::default()
    };
    for i in 0..100 {
        let source = random_source(&mut rng);
        let hyp = beam_search(&[&p], &source, &config).map_err(|e| e.to_string())?.remove(0);
        let g = greedy(&p, &source, config.max_len(source.len() - 2));
        ensure(hyp.tokens == g, || format!("input {i}: beam-1 {:?} vs greedy {g:?}", hyp.tokens))?;
    }
    Ok("10/10 models match exhaustive argmax at width 7776; beam 1 == greedy on 100/100 inputs".into())
}

// ---------------------------------------------------------------- 3, 8

struct DigitRun {
    task: DigitTask,
    engine: Engine,
    log: inmt_core::training::TrainLog,
    elapsed: Duration,
}

fn train_digits() -> Result<DigitRun, String> {
    let task = digit_task(100, 20, 100, 1);
    let start = Instant::now();
    let (engine, log) = train_digit_engine(&task, 1).map_err(|e| e.to_string())?;
    Ok(DigitRun {
        task,
        engine,
        log,
        elapsed: start.elapsed(),
    })
}

fn toy_convergence(run: &DigitRun) -> Check {
    let e = &run.engine;
    let vocab = e.source.vocab.len() + e.target.vocab.len();
    ensure(vocab < 50, || format!("vocabulary of {vocab} entries"))?;
    let train_bleu = corpus_bleu(&e.params, &e.source, &e.target, &run.task.train, &e.beam).map_err(|x| x.to_string())?;
    let batches = run.task.train.len().div_ceil(10);
    let epochs = run.log.losses().len().div_ceil(batches);
    ensure(train_bleu >= 99.0, || format!("train BLEU {train_bleu:.2} < 99"))?;
    ensure(epochs <= 500, || format!("{epochs} epochs"))?;
    ensure(run.elapsed < Duration::from_secs(600), || format!("took {:?}", run.elapsed))?;
    let evals = run.log.evaluations();
    let max = evals.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let returned = corpus_bleu(&e.params, &e.source, &e.target, &run.task.dev, &e.beam).map_err(|x| x.to_string())?;
    ensure(returned == max && run.log.best_bleu == Some(max), || {
        format!("returned checkpoint scores {returned} on dev, best evaluation {max}")
    })?;
    Ok(format!(
        "train BLEU {train_bleu:.2} after {epochs} epochs in {:.1}s; returned checkpoint dev BLEU {returned:.2} == max of {} evaluations",
        run.elapsed.as_secs_f64(),
        evals.len()
    ))
}

fn determinism(first: &DigitRun) -> Check {
    let second = train_digits()?;
    ensure(first.log == second.log, || "training logs differ".into())?;
    ensure(first.engine.params == second.engine.params, || "parameters differ".into())?;
    for source in first.task.test.sources() {
        let a = first.engine.translate(source, 6).map_err(|e| e.to_string())?;
        let b = second.engine.translate(source, 6).map_err(|e| e.to_string())?;
        let same = a.len() == b.len()
            && a.iter().zip(&b).all(|(x, y)| {
                x.text == y.text && x.hypothesis.score.to_bits() == y.hypothesis.score.to_bits()
                    && x.hypothesis.log_prob.to_bits() == y.hypothesis.log_prob.to_bits()
            });
        ensure(same, || format!("decoding of `{source}` differs"))?;
    }
    Ok(format!(
        "two seeded runs: identical {}-record logs, parameters and 6-best lists on 100 sentences",
        first.log.records.len()
    ))
}

// ---------------------------------------------------------------- 4, 5

/// A deliberately under-trained engine on the same task, so that sessions need corrections.
fn weak_engine(run: &DigitRun) -> Result<Engine, String> {
    let config = TrainConfig {
        learning_rate: 0.01,
        batch_size: 10,
        eval_every: usize::MAX,
        max_epochs: 4,
        seed: 1,
        ..TrainConfig::default()
    };
    Ok(train_toy_engine(&run.task.train, &run.task.dev, &config).map_err(|e| e.to_string())?.0)
}

fn simulate_sound(engine: &Engine, task: &DigitTask) -> Result<(String, EffortReport), String> {
    let mut engine = engine.clone();
    let mut sentences = Vec::new();
    let mut max_ratio = 0.0f64;
    for (source, reference) in &task.test.pairs {
        let sim = simulate_user(&mut engine, source, reference, false).map_err(|e| e.to_string())?;
        let n = reference.chars().count();
        ensure(sim.effort.iterations <= n, || format!("`{source}`: {} iterations > {n}", sim.effort.iterations))?;
        ensure(sim.final_text == *reference, || format!("`{source}`: ended with `{}`", sim.final_text))?;
        for (hyp, prefix) in sim.hypotheses[1..].iter().zip(&sim.prefixes) {
            ensure(hyp.starts_with(prefix.as_str()), || format!("`{hyp}` does not extend `{prefix}`"))?;
        }
        max_ratio = max_ratio.max(sim.effort.iterations as f64 / n as f64);
        sentences.push(sim.effort);
    }
    let report = EffortReport::new(sentences).map_err(|e| e.to_string())?;
    let corrections: usize = report.sentences.iter().map(|s| s.iterations).sum();
    Ok((
        format!("{} sessions, {corrections} corrections, max iterations/|ref| {max_ratio:.2}", task.test.len()),
        report,
    ))
}

fn effort_direction(engine: &Engine, task: &DigitTask, report: &EffortReport) -> Check {
    let baseline: Vec<SentenceEffort> = task.test.targets().map(baseline_effort).collect();
    let base = ksmr(&baseline).map_err(|x| x.to_string())?;
    let test_bleu = corpus_bleu(&engine.params, &engine.source, &engine.target, &task.test, &engine.beam)
        .map_err(|x| x.to_string())?;
    ensure(report.ksmr <= base, || format!("INMT KSMR {:.2} > baseline {base:.2}", report.ksmr))?;
    let reduction = 100.0 * (base - report.ksmr) / base;
    let target = if test_bleu >= 50.0 {
        if reduction >= 20.0 { "meets the 20% target" } else { "misses the 20% target (reported only)" }
    } else {
        "20% target not applicable below BLEU 50"
    };
    Ok(format!(
        "KSMR {:.2} vs typing baseline {base:.2}, {reduction:.1}% reduction at test BLEU {test_bleu:.2} ({target})",
        report.ksmr
    ))
}

// ---------------------------------------------------------------- 6

fn online_learning() -> Check {
    let task = digit_task(100, 20, 20, 3);
    let config = TrainConfig {
        learning_rate: 0.01,
        batch_size: 10,
        eval_every: usize::MAX,
        max_epochs: 6,
        seed: 1,
        ..TrainConfig::default()
    };
    let (engine, _) = train_toy_engine(&task.train, &task.dev, &config).map_err(|e| e.to_string())?;

    // strict per-step descent is a small-step property; the sessions below use the engine's own online settings
    let sgd = TrainConfig {
        learning_rate: 0.01,
        ..TrainConfig::online_default()
    };
    let (src, trg) = &task.test.pairs[0];
    let mut params = engine.params.clone();
    let mut losses = online_update(&mut params, &mut OptimizerState::new(), &engine.source, &engine.target, src, trg, 5, &sgd)
        .map_err(|e| e.to_string())?;
    losses.push(sample_loss(&params, &engine.source, &engine.target, src, trg, &sgd).map_err(|e| e.to_string())?);
    ensure(losses.windows(2).all(|w| w[1] < w[0]), || format!("losses {losses:?}"))?;

    let mut learner = engine.clone();
    let pairs: Vec<(&str, &str)> = task.test.sources().zip(task.test.targets()).collect();
    let mean = |r: &EffortReport| r.sentences.iter().map(|s| s.keystrokes).sum::<usize>() as f64 / r.sentences.len() as f64;
    let first = simulate_corpus(&mut learner, &pairs, true).map_err(|e| e.to_string())?;
    let second = simulate_corpus(&mut learner, &pairs, true).map_err(|e| e.to_string())?;
    ensure(mean(&second) <= mean(&first), || format!("pass 2 mean {} > pass 1 mean {}", mean(&second), mean(&first)))?;
    Ok(format!(
        "5 SGD steps (lr 0.01) lower the loss {:.4} -> {:.4} monotonically; mean keystrokes over 20 sentences {:.2} (pass 1) -> {:.2} (pass 2)",
        losses[0],
        losses[5],
        mean(&first),
        mean(&second)
    ))
}

// ---------------------------------------------------------------- 7

fn brute_force_ter_edits(hyp: &[u8], reference: &[u8]) -> usize {
    let mut best = edit_distance(hyp, reference);
    let mut seen = HashSet::from([hyp.to_vec()]);
    let mut queue = VecDeque::from([(hyp.to_vec(), 0usize)]);
    while let Some((words, shifts)) = queue.pop_front() {
        best = best.min(shifts + edit_distance(&words, reference));
        if shifts + 1 >= best {
            continue;
        }
        let n = words.len();
        for start in 0..n {
            for len in 1..=n - start {
                let block = &words[start..start + len];
                let rest = [&words[..start], &words[start + len..]].concat();
                for to in 0..=rest.len() {
                    let next = [&rest[..to], block, &rest[to..]].concat();
                    if seen.insert(next.clone()) {
                        queue.push_back((next, shifts + 1));
                    }
                }
            }
        }
    }
    best
}

fn all_sequences(alphabet: u8, max_len: usize) -> Vec<Vec<u8>> {
    let mut all = vec![vec![]];
    let mut frontier: Vec<Vec<u8>> = vec![vec![]];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|s| (0..alphabet).map(move |w| [s.as_slice(), &[w]].concat()))
            .collect();
        all.extend(frontier.iter().cloned());
    }
    all
}

fn metrics_oracles() -> Check {
    let refs = ["the cat sat on the mat", "a b c d e"];
    let identity = bleu(&refs, &refs).map_err(|e| e.to_string())?;
    ensure(format!("{identity:.2}") == "100.00", || format!("identity BLEU {identity}"))?;
    let zero = bleu(&["x y z w", "q r s t"], &refs).map_err(|e| e.to_string())?;
    ensure(format!("{zero:.2}") == "0.00", || format!("zero-overlap BLEU {zero}"))?;
    // clipped precisions 5/6, 3/5, 2/4, 1/3 and no brevity penalty
    let hand = bleu(&["the cat sat on the mat"], &["the cat sat on a mat"]).map_err(|e| e.to_string())?;
    let expected = 100.0 * (5.0 / 6.0 * 3.0 / 5.0 * 2.0 / 4.0 * 1.0 / 3.0f64).powf(0.25);
    ensure((hand - expected).abs() < 0.01 && (hand - 53.73).abs() < 0.01, || format!("hand case {hand} vs {expected}"))?;

    let t = ter(&["a b c d"], &["a b c d"]).map_err(|e| e.to_string())?;
    ensure(t == 0.0, || format!("identity TER {t}"))?;
    let mut pairs = 0usize;
    let short = all_sequences(3, 4);
    for h in &short {
        for r in short.iter().filter(|r| !r.is_empty()) {
            let (fast, exact) = (ter_edits(h, r), brute_force_ter_edits(h, r));
            ensure(fast == exact, || format!("{h:?} vs {r:?}: {fast} != {exact}"))?;
            pairs += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..400 {
        let h: Vec<u8> = (0..rng.gen_range(0..=6)).map(|_| rng.gen_range(0..4)).collect();
        let r: Vec<u8> = (0..rng.gen_range(1..=6)).map(|_| rng.gen_range(0..4)).collect();
        let (fast, exact) = (ter_edits(&h, &r), brute_force_ter_edits(&h, &r));
        ensure(fast == exact, || format!("{h:?} vs {r:?}: {fast} != {exact}"))?;
        pairs += 1;
    }

    let efforts = [
        SentenceEffort {
            keystrokes: 1,
            mouse_actions: 2,
            ref_chars: 26,
            iterations: 1,
        },
        SentenceEffort {
            keystrokes: 0,
            mouse_actions: 1,
            ref_chars: 10,
            iterations: 0,
        },
    ];
    let k = ksmr(&efforts).map_err(|e| e.to_string())?;
    ensure(k == 100.0 * 4.0 / 36.0, || format!("KSMR {k}"))?;
    let accept_only = ksmr(&[efforts[1]; 3]).map_err(|e| e.to_string())?;
    ensure(accept_only == 10.0, || format!("KSMR {accept_only}"))?;
    Ok(format!(
        "BLEU identity {identity:.2}, zero-overlap {zero:.2}, hand case {hand:.2}; TER identity 0.00 and exact on {pairs} pairs; KSMR exact"
    ))
}

// ---------------------------------------------------------------- 9

fn service_contract() -> Check {
    let engine = train_fig1_engine(1).map_err(|e| e.to_string())?;
    let mut direct = start_session(&engine, String::new(), FIG1_SOURCE).map_err(|e| e.to_string())?;
    let initial = direct.hypothesis.clone();
    apply_feedback(&mut direct, Feedback::character(FIG1_CORRECTION_POSITION, FIG1_CORRECTION), &engine)
        .map_err(|e| e.to_string())?;

    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async move {
        let state = AppState::with_engine(engine.clone(), 8, Duration::from_secs(600));
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
        let base = format!("http://{}", listener.local_addr().map_err(|e| e.to_string())?);
        tokio::spawn(async move { axum::serve(listener, router(state, None)).await });
        let client = reqwest::Client::new();
        let post = |path: String, body: serde_json::Value| {
            let request = client.post(format!("{base}{path}")).json(&body);
            async move {
                let response = request.send().await.map_err(|e| e.to_string())?;
                ensure(response.status().is_success(), || format!("{path}: HTTP {}", response.status()))?;
                response.json::<serde_json::Value>().await.map_err(|e| e.to_string())
            }
        };

        let created: CreateSessionResponse = parse(post("/session".into(), json!({ "source": FIG1_SOURCE })).await?)?;
        ensure(created.hypothesis == initial, || format!("created `{}` vs direct `{initial}`", created.hypothesis))?;
        let start = Instant::now();
        let corrected: CorrectionResponse = parse(
            post(
                format!("/session/{}/correction", created.session_id),
                json!({ "position": FIG1_CORRECTION_POSITION, "character": FIG1_CORRECTION.to_string() }),
            )
            .await?,
        )?;
        let latency = start.elapsed();
        ensure(corrected.hypothesis == direct.hypothesis, || {
            format!("corrected `{}` vs direct `{}`", corrected.hypothesis, direct.hypothesis)
        })?;
        ensure(corrected.hypothesis.starts_with(FIG1_PREFIX), || corrected.hypothesis.clone())?;
        ensure(latency < Duration::from_millis(200), || format!("correction round-trip {latency:?}"))?;
        let accepted: AcceptResponse =
            parse(post(format!("/session/{}/accept", created.session_id), json!({ "learn": false })).await?)?;
        ensure(accepted.final_text == direct.hypothesis, || accepted.final_text.clone())?;
        Ok(format!(
            "`{}` -> `{}` byte-identical to direct calls; correction round-trip {:.1} ms; KSMR {:.2}",
            created.hypothesis,
            corrected.hypothesis,
            latency.as_secs_f64() * 1000.0,
            accepted.ksmr_counters.ksmr
        ))
    })
}

fn parse<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T, String> {
    serde_json::from_value(value).map_err(|e| e.to_string())
}

fn main() {
    let mut ok = true;
    ok &= run(1, "gradient oracle", gradient_oracle);
    ok &= run(2, "beam exactness", beam_exactness);
    let digits = train_digits();
    ok &= run(3, "toy convergence", || toy_convergence(digits.as_ref()?));
    let mut reports = Vec::new();
    ok &= run(4, "interactive soundness", || {
        let run = digits.as_ref()?;
        let weak = weak_engine(run)?;
        let mut details = Vec::new();
        for (label, engine) in [("converged", run.engine.clone()), ("under-trained", weak)] {
            let (detail, report) = simulate_sound(&engine, &run.task)?;
            details.push(format!("{label}: {detail}"));
            reports.push((label, engine, report));
        }
        Ok(format!("all terminate, reach the reference and keep every prefix; {}", details.join("; ")))
    });
    ok &= run(5, "effort direction", || {
        let run = digits.as_ref()?;
        ensure(reports.len() == 2, || "no simulation reports".into())?;
        let details = reports
            .iter()
            .map(|(label, engine, report)| Ok(format!("{label}: {}", effort_direction(engine, &run.task, report)?)))
            .collect::<Result<Vec<String>, String>>()?;
        Ok(details.join("; "))
    });
    ok &= run(6, "online learning", online_learning);
    ok &= run(7, "metric oracles", metrics_oracles);
    ok &= run(8, "determinism", || determinism(digits.as_ref()?));
    ok &= run(9, "service contract", service_contract);
    if !ok {
        std::process::exit(1);
    }
}
