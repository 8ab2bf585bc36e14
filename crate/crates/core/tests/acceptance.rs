// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance gate. Runs every criterion at its pinned tolerance, prints one
//! PASS/FAIL line each and exits non-zero if any fails.
//!
//! Run alone with `cargo test -p steerlab --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

use steerlab::concepts::{self, ConceptCard, LabelScore};
use steerlab::engine::{self, ClassSet, ScoreMode, Scoring, SteeringConfig};
use steerlab::ingest::{EmbeddingCorpus, Vocabulary};
use steerlab::sae::{self, synthetic, SaeModel, TrainConfig};

const IDENTITY_TOL: f64 = 1e-6;
const IDENTITY_BUDGET: Duration = Duration::from_secs(5);
const SUPPRESSION_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-4;
const GRAD_REL_TOL: f64 = 1e-3;
const GRAD_ABS_FLOOR: f64 = 1e-7;
const GRADIENT_BUDGET: Duration = Duration::from_secs(10);
const COMPLETENESS_TOL: f64 = 1e-5;
const RECOVERY_MIN: f64 = 0.9;
const RECOVERY_BUDGET: Duration = Duration::from_secs(60);
const NAMING_TOL: f64 = 1e-6;
const FIXTURE_BUDGET: Duration = Duration::from_secs(1);
const GOLDEN_TOL: f64 = 1e-6;
const TRIALS: usize = 100;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect::<Vec<f64>>()
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

fn random_model(rng: &mut ChaCha8Rng, dim: usize, width: usize) -> SaeModel {
    let enc = to_f32(&gaussian(rng, dim * width, 0.5));
    let enc_bias = to_f32(&gaussian(rng, width, 0.1));
    let mut dec = Vec::with_capacity(dim * width);
    for _ in 0..width {
        let row = gaussian(rng, dim, 1.0);
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let row32 = to_f32(&row.iter().map(|v| v / n).collect::<Vec<_>>());
        let n32 = row32
            .iter()
            .map(|&v| f64::from(v).powi(2))
            .sum::<f64>()
            .sqrt();
        dec.extend(row32.iter().map(|&v| (f64::from(v) / n32) as f32));
    }
    let dec_bias = to_f32(&gaussian(rng, dim, 0.2));
    SaeModel::new(dim, width, enc, enc_bias, dec, dec_bias).unwrap()
}

fn random_classes(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> ClassSet {
    ClassSet::new(
        "random",
        (0..n)
            .map(|i| (format!("class-{i}"), to_f32(&gaussian(rng, dim, 1.0))))
            .collect(),
    )
    .unwrap()
}

struct Case {
    model: SaeModel,
    x: Vec<f32>,
    classes: ClassSet,
    scoring: Scoring,
}

fn random_case(rng: &mut ChaCha8Rng, mode: ScoreMode) -> Case {
    let dim = rng.random_range(2..=12);
    let width = rng.random_range(1..=24);
    let n_classes = rng.random_range(2..=6);
    let tau = match mode {
        ScoreMode::Cosine => rng.random_range(1.0..100.0),
        ScoreMode::Dot => rng.random_range(0.1..10.0),
    };
    Case {
        model: random_model(rng, dim, width),
        x: to_f32(&gaussian(rng, dim, 1.0)),
        classes: random_classes(rng, dim, n_classes),
        scoring: Scoring::new(mode, tau).unwrap(),
    }
}

fn random_steering(rng: &mut ChaCha8Rng, width: usize) -> SteeringConfig {
    let n = rng.random_range(0..=width.min(4));
    let picks = rand::seq::index::sample(rng, width, n);
    SteeringConfig::new(picks.into_iter().map(|j| (j, rng.random_range(-1.0..=1.0)))).unwrap()
}

/// Logit recomputed from scratch.
fn logit_oracle(x: &[f64], t: &[f64], scoring: Scoring) -> f64 {
    let xt: f64 = x.iter().zip(t).map(|(a, b)| a * b).sum();
    match scoring.mode {
        ScoreMode::Dot => scoring.logit_scale * xt,
        ScoreMode::Cosine => {
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            scoring.logit_scale * xt / (xn * tn)
        }
    }
}

fn identity_steering() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for mode in [ScoreMode::Cosine, ScoreMode::Dot] {
        for _ in 0..TRIALS {
            let c = random_case(&mut rng, mode);
            let p = engine::predict(
                &c.model,
                &c.x,
                &c.classes,
                &SteeringConfig::empty(),
                c.scoring,
            )
            .map_err(|e| e.to_string())?;
            let x: Vec<f64> = c.x.iter().map(|&v| f64::from(v)).collect();
            for (i, &logit) in p.logits.iter().enumerate() {
                let direct = logit_oracle(&x, c.classes.embedding(i), c.scoring);
                worst = worst.max((logit - direct).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= IDENTITY_TOL, || format!("max logit gap {worst:e}"))?;
    ensure(elapsed < IDENTITY_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} fixtures, max logit gap {worst:.1e}, {elapsed:.2?}",
        2 * TRIALS
    ))
}

fn suppression_semantics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..TRIALS {
        let c = random_case(&mut rng, ScoreMode::Cosine);
        let code = c.model.encode(&c.x).map_err(|e| e.to_string())?;
        for j in 0..c.model.dim_sae() {
            let a = code.activations[j];
            let off = engine::steer(&c.model, &c.x, &SteeringConfig::single(j, -1.0).unwrap())
                .map_err(|e| e.to_string())?;
            ensure(off.activations[j] == 0.0, || {
                format!("a'_{j} = {} under m = -1", off.activations[j])
            })?;
            for (i, &e) in off.embedding.iter().enumerate() {
                let want = f64::from(c.x[i]) - a * f64::from(c.model.direction(j)[i]);
                worst = worst.max((e - want).abs());
            }
            let up = engine::steer(&c.model, &c.x, &SteeringConfig::single(j, 1.0).unwrap())
                .map_err(|e| e.to_string())?;
            ensure(up.activations[j] == 2.0 * a, || {
                format!("a'_{j} = {} vs 2a = {}", up.activations[j], 2.0 * a)
            })?;
            checked += 1;
        }
    }
    ensure(worst <= SUPPRESSION_TOL, || {
        format!("x' deviates by {worst:e}")
    })?;
    Ok(format!(
        "{checked} components, max |x' - (x - a v)| {worst:.1e}"
    ))
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut summary = Vec::new();
    for mode in [ScoreMode::Cosine, ScoreMode::Dot] {
        let (mut instances, mut comparisons, mut worst) = (0, 0, 0.0f64);
        while instances < TRIALS {
            let c = random_case(&mut rng, mode);
            let steering = random_steering(&mut rng, c.model.dim_sae());
            let target = rng.random_range(0..c.classes.len());
            let label = c.classes.labels()[target].clone();
            let Ok(res) = engine::attribute(
                &c.model,
                &c.x,
                &c.classes,
                &steering,
                Some(&label),
                c.scoring,
            ) else {
                continue;
            };
            let state = engine::steer(&c.model, &c.x, &steering).map_err(|e| e.to_string())?;
            let t = c.classes.embedding(target);
            for j in 0..c.model.dim_sae() {
                // y as a function of a'_j: shift x' along v_j.
                let shifted = |h: f64| -> Vec<f64> {
                    state
                        .embedding
                        .iter()
                        .zip(c.model.direction(j))
                        .map(|(&e, &v)| e + h * f64::from(v))
                        .collect()
                };
                let fd = (logit_oracle(&shifted(FD_STEP), t, c.scoring)
                    - logit_oracle(&shifted(-FD_STEP), t, c.scoring))
                    / (2.0 * FD_STEP);
                let an = res.components[j].gradient;
                let err = (an - fd).abs();
                let scale = an.abs().max(fd.abs());
                ensure(err <= GRAD_ABS_FLOOR || err <= GRAD_REL_TOL * scale, || {
                    format!("{mode:?}: component {j}: analytic {an} vs fd {fd}")
                })?;
                if scale > 0.0 {
                    worst = worst.max(err / scale);
                }
                comparisons += 1;
            }
            instances += 1;
        }
        summary.push(format!(
            "{mode:?}: {instances} instances/{comparisons} grads, worst rel {worst:.1e}"
        ));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < GRADIENT_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{}; {elapsed:.2?}", summary.join("; ")))
}

fn dot_completeness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for _ in 0..TRIALS {
        let c = random_case(&mut rng, ScoreMode::Dot);
        let steering = random_steering(&mut rng, c.model.dim_sae());
        let res = engine::attribute(&c.model, &c.x, &c.classes, &steering, None, c.scoring)
            .map_err(|e| e.to_string())?;
        let code = c.model.encode(&c.x).map_err(|e| e.to_string())?;
        let t = c.classes.embedding(res.target_index);
        let offset: f64 = (0..c.x.len())
            .map(|i| (f64::from(c.model.dec_bias()[i]) + code.residual[i]) * t[i])
            .sum();
        let gap = (res.total() - (res.logit - c.scoring.logit_scale * offset)).abs();
        worst = worst.max(gap);
    }
    ensure(worst <= COMPLETENESS_TOL, || format!("max gap {worst:e}"))?;
    Ok(format!("{TRIALS} instances, max gap {worst:.1e}"))
}

/// Greedy matching written independently of the library's scorer.
fn matching_oracle(model: &SaeModel, truth: &[Vec<f64>]) -> f64 {
    let mut cos = vec![vec![0.0; model.dim_sae()]; truth.len()];
    for (t, row) in truth.iter().enumerate() {
        for (j, c) in cos[t].iter_mut().enumerate() {
            let d = model.direction(j);
            let dot: f64 = row.iter().zip(d).map(|(a, &b)| a * f64::from(b)).sum();
            let n: f64 = row.iter().map(|a| a * a).sum::<f64>().sqrt();
            *c = (dot / n).abs();
        }
    }
    let mut used_t = vec![false; truth.len()];
    let mut used_j = vec![false; model.dim_sae()];
    let mut total = 0.0;
    for _ in 0..truth.len().min(model.dim_sae()) {
        let mut best = (-1.0, 0, 0);
        for t in 0..truth.len() {
            for j in 0..model.dim_sae() {
                if !used_t[t] && !used_j[j] && cos[t][j] > best.0 {
                    best = (cos[t][j], t, j);
                }
            }
        }
        used_t[best.1] = true;
        used_j[best.2] = true;
        total += best.0;
    }
    total / truth.len() as f64
}

fn dictionary_recovery() -> Outcome {
    let start = Instant::now();
    let spec = synthetic::SyntheticSpec {
        dim: 64,
        atoms: 32,
        samples: 10_000,
        seed: 7,
        ..synthetic::SyntheticSpec::default()
    };
    let data = synthetic::generate(&spec).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        sparsity_weight: 0.05,
        epochs: 20,
        batch_size: 32,
        learning_rate: 0.05,
        seed: 7,
        dead_resample_interval: None,
    };
    let model = sae::train(&data.corpus, 32, &cfg).map_err(|e| e.to_string())?;
    let score = matching_oracle(&model, &data.directions);
    let elapsed = start.elapsed();
    ensure(score >= RECOVERY_MIN, || format!("score {score:.4}"))?;
    ensure(elapsed < RECOVERY_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("mean matched |cos| {score:.4}, {elapsed:.2?}"))
}

fn concept_naming() -> Outcome {
    // Part 1: self-aligned label with an orthogonal empty prompt.
    let dim = 4;
    let mut enc = vec![0.0f32; dim];
    enc[0] = 1.0;
    let model = SaeModel::new(dim, 1, enc.clone(), vec![0.0], enc, vec![0.0; dim]).unwrap();
    let rows = vec![
        vec![2.0, 1.0, 0.0, 0.0],
        vec![1.0, 0.5, 0.5, 0.0],
        vec![0.5, 0.0, 1.0, 0.0],
        vec![-1.0, 3.0, 0.0, 0.0],
    ];
    let reference =
        EmbeddingCorpus::from_rows((0..4).map(|i| format!("r{i}")).collect(), &rows, None, None)
            .unwrap();
    // Top-2 exemplars are r0 and r1: x̄ = (1.5, 0.75, 0.25, 0).
    let mean = vec![1.5f32, 0.75, 0.25, 0.0];
    let vocab = Vocabulary::new(vec![
        ("".into(), vec![0.0, 0.0, 0.0, 1.0]),
        ("decoy".into(), vec![1.0, 0.0, 0.0, 0.0]),
        ("match".into(), mean),
        ("other".into(), vec![0.0, 1.0, 1.0, 0.0]),
    ])
    .unwrap();
    let card = concepts::build_concept_card(&model, &reference, &vocab, 0, 2)
        .map_err(|e| e.to_string())?;
    let LabelScore { label, score } = card.top_label().cloned().ok_or("no labels")?;
    ensure(label == "match", || format!("top label {label:?}"))?;
    ensure((score - 1.0).abs() <= NAMING_TOL, || {
        format!("score {score}")
    })?;

    // Part 2: exemplar selection against a full sort on random fixtures.
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for trial in 0..TRIALS {
        let dim = rng.random_range(2..=6);
        let width = rng.random_range(1..=6);
        let n = rng.random_range(1..=40);
        let k = rng.random_range(1..=8);
        let model = random_model(&mut rng, dim, width);
        // Quantized values so activation ties actually occur.
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| rng.random_range(-4i32..=4) as f32 * 0.25)
                    .collect()
            })
            .collect();
        let reference = EmbeddingCorpus::from_rows(
            (0..n).map(|i| format!("s{i}")).collect(),
            &rows,
            None,
            None,
        )
        .unwrap();
        let mut entries = vec![("".to_owned(), to_f32(&gaussian(&mut rng, dim, 1.0)))];
        entries.extend((0..3).map(|i| (format!("w{i}"), to_f32(&gaussian(&mut rng, dim, 1.0)))));
        let vocab = Vocabulary::new(entries).unwrap();
        let cards = match concepts::build_all_cards(&model, &reference, &vocab, k) {
            Ok(cards) => cards,
            Err(steerlab::Error::ZeroNormMean(_)) => continue,
            Err(e) => return Err(e.to_string()),
        };
        for (j, card) in cards.iter().enumerate() {
            let acts: Vec<f64> = rows
                .iter()
                .map(|r| model.activations(r).unwrap()[j])
                .collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| acts[b].partial_cmp(&acts[a]).unwrap().then(a.cmp(&b)));
            let expected: Vec<String> = order
                .into_iter()
                .filter(|&i| acts[i] > 0.0)
                .take(k)
                .map(|i| format!("s{i}"))
                .collect();
            ensure(card.exemplar_ids == expected, || {
                format!(
                    "trial {trial} component {j}: {:?} vs {expected:?}",
                    card.exemplar_ids
                )
            })?;
            ensure(card.dead == expected.is_empty(), || {
                format!("trial {trial}: dead flag")
            })?;
        }
    }
    Ok(format!(
        "self-aligned label s = {score:.9}; {TRIALS} exemplar fixtures match full sort"
    ))
}

fn end_to_end_fixture() -> Outcome {
    let start = Instant::now();
    let model = common::model();
    let classes = common::classes();
    let inspection = common::inspection();
    let x = inspection.vector(0);
    let truth = &inspection.labels().unwrap()[0];
    let scoring = Scoring::default();

    let before = engine::predict(&model, x, &classes, &SteeringConfig::empty(), scoring)
        .map_err(|e| e.to_string())?;
    ensure(&before.predicted != truth, || {
        "fixture is not misclassified".into()
    })?;
    let attr = engine::attribute(&model, x, &classes, &SteeringConfig::empty(), None, scoring)
        .map_err(|e| e.to_string())?;
    ensure(
        attr.ranking.first() == Some(&common::TEXT_COMPONENT),
        || format!("top component {:?}", attr.ranking.first()),
    )?;
    let fix = SteeringConfig::single(common::TEXT_COMPONENT, -1.0).unwrap();
    let after = engine::predict(&model, x, &classes, &fix, scoring).map_err(|e| e.to_string())?;
    ensure(&after.predicted == truth, || {
        format!("still predicts {}", after.predicted)
    })?;
    let elapsed = start.elapsed();
    ensure(elapsed < FIXTURE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} -> {} after m_{} = -1 (top |R| = {:.3}), {elapsed:.2?}",
        before.predicted,
        after.predicted,
        common::TEXT_COMPONENT,
        attr.components[common::TEXT_COMPONENT].attribution
    ))
}

fn format_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for trial in 0..TRIALS {
        let dim = rng.random_range(1..=8);
        let n = rng.random_range(0..=12);
        let labelled = rng.random_bool(0.5);
        let corpus = EmbeddingCorpus::new(
            dim,
            (0..n).map(|i| format!("id-{trial}-{i}")).collect(),
            to_f32(&gaussian(&mut rng, n * dim, 3.0)),
            labelled.then(|| (0..n).map(|i| format!("label {}", i % 3)).collect()),
            (!labelled).then(|| (0..n).map(|i| format!("img/{i}.png")).collect()),
        )
        .unwrap();
        let bytes = corpus.to_bytes().map_err(|e| e.to_string())?;
        let back = EmbeddingCorpus::from_bytes(&bytes).map_err(|e| e.to_string())?;
        ensure(back == corpus && back.to_bytes().unwrap() == bytes, || {
            format!("EMB1 trial {trial}")
        })?;

        let width = rng.random_range(1..=6);
        let model = random_model(&mut rng, dim, width);
        let bytes = model.to_bytes().map_err(|e| e.to_string())?;
        let back = SaeModel::from_bytes(&bytes).map_err(|e| e.to_string())?;
        ensure(back == model && back.to_bytes().unwrap() == bytes, || {
            format!("SAE1 trial {trial}")
        })?;

        let cards: Vec<ConceptCard> = (0..rng.random_range(0..4))
            .map(|j| ConceptCard {
                component: j,
                top_labels: (0..3)
                    .map(|i| LabelScore {
                        label: format!("term {i}"),
                        score: StandardNormal.sample(&mut rng),
                    })
                    .collect(),
                exemplar_ids: vec![format!("e{j}")],
                exemplar_activations: vec![rng.random::<f64>()],
                mean_embedding: gaussian(&mut rng, dim, 1.0),
                dead: false,
            })
            .collect();
        let bytes = concepts::cards_to_bytes(&cards).map_err(|e| e.to_string())?;
        let back = concepts::cards_from_bytes(&bytes).map_err(|e| e.to_string())?;
        ensure(
            back == cards && concepts::cards_to_bytes(&back).unwrap() == bytes,
            || format!("CRD1 trial {trial}"),
        )?;
    }
    Ok(format!("{TRIALS} randomized instances per format"))
}

fn compare_json(path: &str, got: &Value, want: &Value) -> Result<(), String> {
    match (got, want) {
        (Value::Object(g), Value::Object(w)) => {
            let gk: Vec<_> = g.keys().filter(|k| *k != "timestamp_ms").collect();
            let wk: Vec<_> = w.keys().collect();
            ensure(gk == wk, || format!("{path}: keys {gk:?} vs {wk:?}"))?;
            for k in wk {
                compare_json(&format!("{path}.{k}"), &g[k], &w[k])?;
            }
            Ok(())
        }
        (Value::Array(g), Value::Array(w)) => {
            ensure(g.len() == w.len(), || {
                format!("{path}: length {} vs {}", g.len(), w.len())
            })?;
            g.iter()
                .zip(w)
                .enumerate()
                .try_for_each(|(i, (a, b))| compare_json(&format!("{path}[{i}]"), a, b))
        }
        (Value::Number(g), Value::Number(w)) => {
            let (g, w) = (g.as_f64().unwrap(), w.as_f64().unwrap());
            ensure((g - w).abs() <= GOLDEN_TOL, || {
                format!("{path}: {g} vs {w}")
            })
        }
        _ => ensure(got == want, || format!("{path}: {got} vs {want}")),
    }
}

fn api_contract() -> Outcome {
    use axum::body::Body;
    use axum::http::Request;
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    let golden: Value = serde_json::from_str(include_str!("golden/walkthrough.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let router = steerlab::service::http::router(common::service(dir.path()));
    let runtime = tokio::runtime::Builder::new_current_thread()
        .build()
        .unwrap();
    let steps = golden["steps"].as_array().unwrap();
    for step in steps {
        let method = step["method"].as_str().unwrap();
        let path = step["path"].as_str().unwrap();
        let body = step
            .get("request")
            .map_or_else(Body::empty, |r| Body::from(r.to_string()));
        let req = Request::builder()
            .method(method)
            .uri(path)
            .header("content-type", "application/json")
            .body(body)
            .unwrap();
        let resp = runtime.block_on(router.clone().oneshot(req)).unwrap();
        let status = resp.status().as_u16();
        let bytes = runtime
            .block_on(resp.into_body().collect())
            .unwrap()
            .to_bytes();
        let got: Value =
            serde_json::from_slice(&bytes).map_err(|e| format!("{method} {path}: {e}"))?;
        ensure(
            u64::from(status) == step["status"].as_u64().unwrap(),
            || format!("{method} {path}: status {status}: {got}"),
        )?;
        compare_json(&format!("{method} {path}"), &got, &step["body"])?;
    }
    Ok(format!(
        "{} endpoints match golden JSON within {GOLDEN_TOL:e}",
        steps.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("identity steering", identity_steering),
        ("suppression semantics", suppression_semantics),
        ("gradient oracle", gradient_oracle),
        ("dot-mode completeness", dot_completeness),
        ("dictionary recovery", dictionary_recovery),
        ("concept naming", concept_naming),
        ("end-to-end debugging fixture", end_to_end_fixture),
        ("format round-trips", format_round_trips),
        ("API contract", api_contract),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS  {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL  {name}: panicked");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
