//! Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and a
//! summary; with `ACCEPTANCE_STRICT` set, any failure exits non-zero.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use pwi_core::autodiff::{grad_check, Graph, Optimizer, OptimizerConfig};
use pwi_core::data::{
    bag_size, char_ngrams, cosine, load_pairs, multiset_overlap, oov_stats, overlap_stats, synthetic_corpus,
    synthetic_vectors, word_ngrams, DataFormat, LoadOptions, OverlapUnit, PairFilter, SentencePairRecord,
};
use pwi_core::lm::joint_loss;
use pwi_core::model::{
    encode, focus_from_scores, interact, similarity_focus, write_checkpoint, Aggregation, Composition, InputMode,
    ModelConfig, PwiModel, WordCache, BACKGROUND_WEIGHT, BIAS_SLICE, FOCUS_WEIGHT, INTERACTION_SLICES,
    RANKING_SLICE,
};
use pwi_core::subword::{load_pretrained, parse_pretrained, write_vectors, Pretrained, INIT_RANGE};
use pwi_core::train::{accuracy, max_f1, train, write_metrics_jsonl, Dataset, TrainConfig, Trainer};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn tiny(input: InputMode, n: usize, aggregation: Aggregation, gamma: f64) -> ModelConfig {
    ModelConfig {
        input,
        composition: Composition::Cnn,
        subword_n: n,
        aggregation,
        hidden: 4,
        word_dim: 6,
        subword_dim: 3,
        char_hidden: 3,
        cnn_channels: 2,
        mlp_hidden: 5,
        lm_gamma: gamma,
        lm_hidden: 3,
        lm_proj: 3,
        lm_min_freq: 1,
        ..ModelConfig::default()
    }
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn pretrained_from(rows: &[(String, Vec<f64>)]) -> Pretrained {
    let mut buf = Vec::new();
    write_vectors(&mut buf, rows.iter().map(|(w, v)| (w.as_str(), v.as_slice()))).unwrap();
    parse_pretrained(buf.as_slice(), Path::new("fixture.txt"), &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
}

// 1
/// Per-coordinate central differences written out here, independent of
/// `grad_check`: `(coordinates, over 1e-4, max abs diff, max rel err where
/// max(|a|, |n|) >= 1e-6)`.
fn fd_profile(m: &mut PwiModel, s1: &[String], s2: &[String], eps: f64) -> (usize, usize, f64, f64) {
    let PwiModel { net, store } = m;
    let loss = |store: &pwi_core::autodiff::ParamStore| {
        let mut g = Graph::with_params(store);
        let lp = net.loss(&mut g, s1, s2, 1).unwrap();
        g.scalar(lp.total)
    };
    let grads = {
        let mut g = Graph::with_params(store);
        let lp = net.loss(&mut g, s1, s2, 1).unwrap();
        g.backward(lp.total).unwrap()
    };
    let ids: Vec<_> = store.iter().filter(|(_, p)| !p.frozen).map(|(id, _)| id).collect();
    let (mut coords, mut over, mut max_abs, mut max_rel_large) = (0, 0, 0.0f64, 0.0f64);
    for id in ids {
        let analytic = grads.get(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; store.value(id).numel()]);
        for (k, &a) in analytic.iter().enumerate() {
            let x = store.value(id).data()[k];
            store.value_mut(id).data_mut()[k] = x + eps;
            let up = loss(store);
            store.value_mut(id).data_mut()[k] = x - eps;
            let down = loss(store);
            store.value_mut(id).data_mut()[k] = x;
            let n = (up - down) / (2.0 * eps);
            let scale = a.abs().max(n.abs());
            coords += 1;
            if (a - n).abs() / scale.max(1e-8) >= 1e-4 {
                over += 1;
            }
            max_abs = max_abs.max((a - n).abs());
            if scale >= 1e-6 {
                max_rel_large = max_rel_large.max((a - n).abs() / scale);
            }
        }
    }
    (coords, over, max_abs, max_rel_large)
}

fn gradient_integrity() -> Outcome {
    let s1 = toks("the cat sat");
    let s2 = toks("a cat was sitting");
    let inputs: Vec<(InputMode, usize)> = std::iter::once((InputMode::WordRandomUpdated, 1))
        .chain((1..=3).map(|n| (InputMode::SubwordC2w, n)))
        .chain((1..=3).map(|n| (InputMode::SubwordCnn, n)))
        .collect();
    let mut worst = (0.0f64, String::new());
    let (mut runs, mut coords, mut over, mut max_abs, mut max_rel_large) = (0, 0, 0, 0.0f64, 0.0f64);
    let start = Instant::now();
    for &(input, n) in &inputs {
        for agg in [Aggregation::DeepCnn { depth: 2 }, Aggregation::Mlp] {
            for gamma in [0.0, 0.1] {
                let cfg = tiny(input, n, agg, gamma);
                let mut m = match PwiModel::build(cfg, s1.iter().chain(&s2).map(String::as_str), [], None) {
                    Ok(m) => m,
                    Err(e) => return Outcome::Fail(format!("{input}-{n}: {e}")),
                };
                m.store.randomize(0.5, &mut ChaCha8Rng::seed_from_u64(7));
                let r = {
                    let PwiModel { net, store } = &mut m;
                    match grad_check(store, 1e-4, None, |g| Ok(net.loss(g, &s1, &s2, 1)?.total)) {
                        Ok(r) => r,
                        Err(e) => return Outcome::Fail(format!("{input}-{n}: {e}")),
                    }
                };
                runs += 1;
                if r.max_rel_error >= worst.0 {
                    worst = (
                        r.max_rel_error,
                        format!(
                            "{input}-{n} {} γ={gamma} {} a={:.4e} n={:.4e}",
                            agg.name(),
                            r.worst_param.unwrap_or_default(),
                            r.analytic,
                            r.numeric
                        ),
                    );
                }
                let (c, o, a, l) = fd_profile(&mut m, &s1, &s2, 1e-4);
                coords += c;
                over += o;
                max_abs = max_abs.max(a);
                max_rel_large = max_rel_large.max(l);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst.0 < 1e-4 && secs < 600.0,
        format!(
            "{runs} configs, max rel err {:.2e} ({}); {over}/{coords} coordinates ≥ 1e-4, max |a−n| {max_abs:.1e}, \
             max rel err where |g| ≥ 1e-6: {max_rel_large:.1e}; {secs:.1}s",
            worst.0, worst.1
        ),
    )
}

// 2
fn learning_sanity() -> Outcome {
    let corpus = synthetic_corpus(20, 11);
    let words = corpus.base_words();
    let vectors = synthetic_vectors(&words, 16, 5);
    let pretrained = pretrained_from(&vectors);
    let dataset = Dataset {
        name: "synthetic".into(),
        train: corpus.records.clone(),
        dev: Some(Vec::new()),
        test: None,
    };
    let mut lines = Vec::new();
    let mut ok = true;
    for input in InputMode::ALL {
        let config = TrainConfig {
            epochs: 200,
            optimizer: OptimizerConfig::default().with_lr(0.01),
            seed: 3,
            dev_fraction: 0.0,
            model: ModelConfig {
                input,
                composition: Composition::Cnn,
                subword_n: 3,
                aggregation: Aggregation::Mlp,
                hidden: 16,
                word_dim: 16,
                subword_dim: 8,
                char_hidden: 12,
                mlp_hidden: 32,
                lm_gamma: 0.0,
                ..ModelConfig::default()
            },
            ..TrainConfig::default()
        };
        let start = Instant::now();
        let mut t = match Trainer::new(&dataset, config, Some(&pretrained)) {
            Ok(t) => t,
            Err(e) => return Outcome::Fail(format!("{input}: {e}")),
        };
        let mut reached = None;
        while t.epochs_done() < 200 {
            if let Err(e) = t.run_epoch() {
                return Outcome::Fail(format!("{input}: {e}"));
            }
            let acc = accuracy(&t.model, &t.train).unwrap();
            if acc >= 0.95 {
                reached = Some(t.epochs_done());
                break;
            }
        }
        let secs = start.elapsed().as_secs_f64();
        ok &= reached.is_some() && secs < 300.0;
        lines.push(match reached {
            Some(e) => format!("{input}@{e} ({secs:.1}s)"),
            None => format!("{input} not reached ({secs:.1}s)"),
        });
    }
    check(ok, lines.join(", "))
}

// 3
fn interaction_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let vocab: Vec<String> = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut cells = 0usize;
    for model_seed in 0..100u64 {
        let cfg = ModelConfig {
            seed: model_seed,
            ..tiny(InputMode::WordRandomUpdated, 1, Aggregation::Mlp, 0.0)
        };
        let m = PwiModel::build(cfg, vocab.iter().map(String::as_str), [], None).unwrap();
        let mut store = m.store.clone();
        store.randomize(1.0, &mut rng);
        let (la, lb) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let a: Vec<&str> = (0..la).map(|_| vocab[rng.gen_range(0..vocab.len())].as_str()).collect();
        let b: Vec<&str> = (0..lb).map(|_| vocab[rng.gen_range(0..vocab.len())].as_str()).collect();

        let mut g = Graph::with_params(&store);
        let mut cache = WordCache::new();
        let va = m.net.sentence_vectors(&mut g, &a, &mut cache).unwrap();
        let vb = m.net.sentence_vectors(&mut g, &b, &mut cache).unwrap();
        let ea = encode(&mut g, &va, &m.net.encoder).unwrap();
        let eb = encode(&mut g, &vb, &m.net.encoder).unwrap();
        let self_d = interact(&mut g, &ea, &ea).unwrap();
        let ab = interact(&mut g, &ea, &eb).unwrap();
        let ba = interact(&mut g, &eb, &ea).unwrap();

        for kind in 0..4 {
            let cos = self_d.slice(&g, 3 * kind);
            let l2 = self_d.slice(&g, 3 * kind + 1);
            for i in 0..la {
                if (cos[i * la + i] - 1.0).abs() > 1e-12 {
                    return Outcome::Fail(format!("model {model_seed}: cos diagonal {}", cos[i * la + i]));
                }
                if l2[i * la + i] != 0.0 {
                    return Outcome::Fail(format!("model {model_seed}: L2 diagonal {}", l2[i * la + i]));
                }
            }
        }
        for k in 0..INTERACTION_SLICES {
            let x = ab.slice(&g, k);
            let y = ba.slice(&g, k);
            for i in 0..la {
                for j in 0..lb {
                    cells += 1;
                    if k == BIAS_SLICE {
                        if x[i * lb + j] != 1.0 || y[j * la + i] != 1.0 {
                            return Outcome::Fail(format!("model {model_seed}: bias slice not 1"));
                        }
                    } else if x[i * lb + j] != y[j * la + i] {
                        return Outcome::Fail(format!("model {model_seed}: slice {k} not transpose-symmetric"));
                    }
                }
            }
        }
        let mask = similarity_focus(&g, &ab).unwrap();
        let mut rows = BTreeSet::new();
        let mut cols = BTreeSet::new();
        for (i, j) in mask.selected() {
            if !rows.insert(i) || !cols.insert(j) {
                return Outcome::Fail(format!("model {model_seed}: mask reuses a row or column"));
            }
        }
        if rows.len() != la.min(lb) || mask.values.iter().any(|&v| v != FOCUS_WEIGHT && v != BACKGROUND_WEIGHT) {
            return Outcome::Fail(format!("model {model_seed}: mask is not a maximal 1.0/0.1 matching"));
        }
        let again = focus_from_scores(ab.slice(&g, RANKING_SLICE), la, lb).unwrap();
        if again != mask {
            return Outcome::Fail(format!("model {model_seed}: mask differs from ranking-slice selection"));
        }
    }
    Outcome::Pass(format!("100 models, {cells} cross cells checked"))
}

// 4
fn brute_max_f1(scores: &[f64], labels: &[u8]) -> (usize, usize) {
    // best F1 as the fraction 2tp / (2tp + fp + fn), compared exactly
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let mut best = (0usize, 1usize);
    for &t in scores {
        let tp = scores.iter().zip(labels).filter(|(&s, &l)| s >= t && l == 1).count();
        let fp = scores.iter().zip(labels).filter(|(&s, &l)| s >= t && l == 0).count();
        let (num, den) = (2 * tp, 2 * tp + fp + (pos - tp));
        if num * best.1 > best.0 * den {
            best = (num, den);
        }
    }
    best
}

fn max_f1_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..1000 {
        let n = rng.gen_range(1..=40);
        let coarse = rng.gen_bool(0.5);
        let scores: Vec<f64> = (0..n)
            .map(|_| if coarse { rng.gen_range(0..5) as f64 / 4.0 } else { rng.gen::<f64>() })
            .collect();
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.4))).collect();
        if !labels.contains(&1) {
            labels[rng.gen_range(0..n)] = 1;
        }
        let (num, den) = brute_max_f1(&scores, &labels);
        let expected = num as f64 / den as f64;
        let (got, _) = match max_f1(&scores, &labels) {
            Ok(r) => r,
            Err(e) => return Outcome::Fail(format!("case {case}: {e}")),
        };
        if got.to_bits() != expected.to_bits() {
            return Outcome::Fail(format!("case {case}: {got} vs brute force {expected}"));
        }
    }
    Outcome::Pass("1000 random instances, bit-exact".into())
}

// 5
fn joint_objective() -> Outcome {
    let s1 = toks("the cat sat");
    let s2 = toks("a cat was sitting");
    let all = || s1.iter().chain(&s2).map(String::as_str);

    let m = PwiModel::build(tiny(InputMode::SubwordCnn, 3, Aggregation::Mlp, 0.0), all(), [], None).unwrap();
    let mut g = Graph::with_params(&m.store);
    let parts = m.net.loss(&mut g, &s1, &s2, 1).unwrap();
    if g.scalar(parts.total).to_bits() != g.scalar(parts.cls).to_bits() || parts.lm_fwd.is_some() {
        return Outcome::Fail("γ=0 model total differs from classification loss".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let cls: f64 = rng.gen_range(0.0..10.0);
        let j = joint_loss(cls, rng.gen_range(0.0..1e6), rng.gen_range(0.0..1e6), 0.0).unwrap();
        if j.to_bits() != cls.to_bits() {
            return Outcome::Fail(format!("joint_loss γ=0 gave {j} for {cls}"));
        }
    }

    // With a zeroed classifier output layer, subword rows only receive
    // signal through the LM losses.
    let mut moved = Vec::new();
    for gamma in [0.0, 0.1] {
        let mut m = PwiModel::build(tiny(InputMode::SubwordCnn, 3, Aggregation::Mlp, gamma), all(), [], None).unwrap();
        let (w, b) = m.net.aggregator.output_layer();
        for id in [w, b] {
            m.store.value_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let sub = m.net.subwords.as_ref().unwrap().table.param;
        let before = m.store.value(sub).clone();
        m.store.fill_zero_grad();
        let grads = {
            let mut g = Graph::with_params(&m.store);
            let lp = m.net.loss(&mut g, &s1, &s2, 1).unwrap();
            g.backward(lp.total).unwrap()
        };
        m.store.accumulate(&grads, 1.0);
        Optimizer::new(OptimizerConfig::Sgd { lr: 0.5 }).step(&mut m.store).unwrap();
        let after = m.store.value(sub);
        let dim = before.shape()[1];
        let changed = (0..before.shape()[0])
            .filter(|&r| before.data()[r * dim..(r + 1) * dim] != after.data()[r * dim..(r + 1) * dim])
            .count();
        moved.push(changed);
    }
    check(
        moved[0] == 0 && moved[1] > 0,
        format!("γ=0 bit-equal; subword rows changed: γ=0 → {}, γ=0.1 → {}", moved[0], moved[1]),
    )
}

// 6
fn overlap_fixture() -> Outcome {
    let rec = |a: &str, b: &str, l: u8| SentencePairRecord::from_text(a, b, l, "fixture").unwrap();
    let fixture = [rec("a b", "a c", 1), rec("x y z", "x y z", 1), rec("the cat", "a dog", 0)];
    // word unigrams: (1,3), (3,3), (0,4); shorter/longer sizes 2/2, 3/3, 2/2
    let w1 = overlap_stats(&fixture, OverlapUnit::Word1, PairFilter::All).unwrap();
    let want = (7.0 / 3.0, 7.0 / 3.0, 10.0 / 3.0, 4.0 / 3.0, 4.0 / 10.0);
    let got = (w1.mean_shorter, w1.mean_longer, w1.mean_union, w1.mean_intersection, w1.ratio);
    if got != want {
        return Outcome::Fail(format!("word-1 stats {got:?}, expected {want:?}"));
    }
    // char unigrams over "a b"/"a c": {a,' ',b} vs {a,' ',c} → 2 / 4
    let c1 = overlap_stats(&fixture[..1], OverlapUnit::Char1, PairFilter::All).unwrap();
    if (c1.mean_intersection, c1.mean_union, c1.ratio) != (2.0, 4.0, 0.5) {
        return Outcome::Fail(format!("char-1 stats {c1:?}"));
    }
    // paraphrase-only: (1,3) and (3,3) → 4/6
    let p = overlap_stats(&fixture, OverlapUnit::Word1, PairFilter::ParaphraseOnly).unwrap();
    if p.pairs != 2 || p.ratio != 4.0 / 6.0 {
        return Outcome::Fail(format!("paraphrase-only stats {p:?}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let alphabet = ['a', 'b', 'c', 'd', ' '];
    for case in 0..10_000 {
        let mut sentence = || -> Vec<String> {
            let len = rng.gen_range(0..12);
            let s: String = (0..len).map(|_| *alphabet.choose(&mut rng).unwrap()).collect();
            s.split_whitespace().map(str::to_string).collect()
        };
        let (a, b) = (sentence(), sentence());
        for (name, x, y) in [
            ("char-1", char_ngrams(&a, 1), char_ngrams(&b, 1)),
            ("char-2", char_ngrams(&a, 2), char_ngrams(&b, 2)),
            ("word-1", word_ngrams(&a, 1), word_ngrams(&b, 1)),
            ("word-2", word_ngrams(&a, 2), word_ngrams(&b, 2)),
        ] {
            let (i, u) = multiset_overlap(&x, &y);
            if i + u != bag_size(&x) + bag_size(&y) {
                return Outcome::Fail(format!("case {case} {name}: {i} + {u} != |A| + |B|"));
            }
        }
    }
    Outcome::Pass("3-pair fixture exact; multiset identity on 10000 random pairs".into())
}

// 7
fn oov_behavior() -> Outcome {
    let corpus = synthetic_corpus(40, 17);
    let base = corpus.base_words();
    let covered: Vec<String> = base.iter().step_by(2).cloned().collect();
    let pretrained = pretrained_from(&synthetic_vectors(&covered, 16, 8));

    let tokens: Vec<&str> = corpus.records.iter().flat_map(|r| r.tokens()).collect();
    let cfg = ModelConfig {
        input: InputMode::WordPretrainedUpdated,
        word_dim: 16,
        hidden: 8,
        aggregation: Aggregation::Mlp,
        lm_gamma: 0.0,
        ..ModelConfig::default()
    };
    let m = PwiModel::build(cfg, tokens.iter().copied(), [], Some(&pretrained)).unwrap();
    let words = m.net.words.as_ref().unwrap();
    let mut oov_rows = 0;
    for w in words.vocab.words() {
        if pretrained.vector(w).is_none() {
            oov_rows += 1;
            let row = words.table.row(&m.store, words.vocab.id(w));
            if row.iter().any(|v| v.abs() > INIT_RANGE) {
                return Outcome::Fail(format!("OOV `{w}` initialized outside ±{INIT_RANGE}"));
            }
        }
    }

    let dataset = Dataset {
        name: "synthetic".into(),
        train: corpus.records.clone(),
        dev: Some(Vec::new()),
        test: None,
    };
    let config = TrainConfig {
        epochs: 30,
        optimizer: OptimizerConfig::default().with_lr(0.01),
        dev_fraction: 0.0,
        model: ModelConfig {
            input: InputMode::SubwordCnn,
            subword_n: 3,
            word_dim: 16,
            subword_dim: 8,
            hidden: 16,
            mlp_hidden: 32,
            aggregation: Aggregation::Mlp,
            lm_gamma: 0.0,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    let out = match train(&dataset, &config, None, |_| {}) {
        Ok(o) => o,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let model = out.last;
    let vec_of = |w: &str| model.embed_word(w).unwrap();
    let variant_cos: Vec<f64> = corpus
        .variant_of
        .iter()
        .map(|(v, b)| cosine(&vec_of(v), &vec_of(b)))
        .collect();
    let mut unrelated = Vec::new();
    for (i, a) in base.iter().enumerate() {
        for b in &base[i + 1..] {
            unrelated.push(cosine(&vec_of(a), &vec_of(b)));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let sista = cosine(&vec_of("sista"), &vec_of("sister"));
    let (mv, mu) = (mean(&variant_cos), mean(&unrelated));
    let oov = oov_stats(&corpus.records, &pretrained.vocab, false);
    check(
        sista > mu && mv > mu,
        format!(
            "{oov_rows} OOV rows within ±{INIT_RANGE} (oov ratio {:.2}); cos(sista, sister) {sista:.3}, variants {mv:.3} vs unrelated {mu:.3}",
            oov.ratio
        ),
    )
}

// 8
fn real_corpora() -> Outcome {
    let Some(root) = std::env::var_os("PWI_DATA_ROOT").map(PathBuf::from) else {
        return Outcome::Skip("PWI_DATA_ROOT not set".into());
    };
    let url = root.join("twitter-url/test.tsv");
    let pit = root.join("pit2015/test.tsv");
    let vectors = root.join("vectors.txt");
    if !url.exists() && !pit.exists() {
        return Outcome::Skip(format!("no corpora under {}", root.display()));
    }
    let mut parts = Vec::new();
    let mut ok = true;
    if url.exists() {
        let records = match load_pairs(&url, LoadOptions::new(DataFormat::TwitterUrl)) {
            Ok(r) => r.records,
            Err(e) => return Outcome::Fail(e.to_string()),
        };
        let s = overlap_stats(&records, OverlapUnit::Char1, PairFilter::All).unwrap();
        ok &= (s.ratio - 0.634).abs() <= 0.005;
        parts.push(format!("Twitter-URL char-1 overlap {:.1}% (target 63.4 ± 0.5)", 100.0 * s.ratio));
    }
    if pit.exists() && vectors.exists() {
        let records = match load_pairs(&pit, LoadOptions::new(DataFormat::Pit)) {
            Ok(r) => r.records,
            Err(e) => return Outcome::Fail(e.to_string()),
        };
        let p = load_pretrained(&vectors, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let s = oov_stats(&records, &p.vocab, true);
        ok &= (s.ratio - 0.137).abs() <= 0.01;
        parts.push(format!("PIT-2015 OOV {:.1}% (target 13.7 ± 1)", 100.0 * s.ratio));
    }
    check(ok, parts.join("; "))
}

// 9
fn determinism() -> Outcome {
    let corpus = synthetic_corpus(12, 9);
    let dataset = Dataset {
        name: "synthetic".into(),
        train: corpus.records,
        dev: None,
        test: None,
    };
    let config = TrainConfig {
        epochs: 3,
        batch_size: 2,
        seed: 42,
        model: ModelConfig {
            input: InputMode::SubwordC2w,
            subword_n: 2,
            word_dim: 8,
            subword_dim: 4,
            char_hidden: 6,
            hidden: 6,
            cnn_channels: 3,
            aggregation: Aggregation::DeepCnn { depth: 2 },
            lm_gamma: 0.1,
            lm_hidden: 5,
            lm_proj: 5,
            lm_min_freq: 1,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    let run = || -> (Vec<u8>, Vec<u8>) {
        let out = train(&dataset, &config, None, |_| {}).unwrap();
        let mut metrics = Vec::new();
        write_metrics_jsonl(&mut metrics, &out.metrics).unwrap();
        let mut ckpt = Vec::new();
        write_checkpoint(&out.last, &mut ckpt).unwrap();
        (metrics, ckpt)
    };
    let (m1, c1) = run();
    let (m2, c2) = run();
    check(
        m1 == m2 && c1 == c2,
        format!("metrics {} bytes, checkpoint {} bytes, identical: {}", m1.len(), c1.len(), m1 == m2 && c1 == c2),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient integrity", gradient_integrity),
        ("learning sanity", learning_sanity),
        ("interaction identities", interaction_identities),
        ("max_f1 oracle", max_f1_oracle),
        ("joint objective", joint_objective),
        ("overlap analyzer", overlap_fixture),
        ("oov behavior", oov_behavior),
        ("real-corpus statistics", real_corpora),
        ("determinism", determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let (mut passed, mut failed, mut skipped) = (0, 0, 0);
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let took = fmt_secs(start.elapsed());
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => {
                passed += 1;
                ("PASS", d)
            }
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => {
                skipped += 1;
                ("SKIP", d)
            }
        };
        println!("[{tag}] {}. {name}: {detail} [{took}]", i + 1);
    }
    println!("acceptance: {passed} passed, {failed} failed, {skipped} skipped");
    // failures are reported, not fatal, unless asked for
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}

fn fmt_secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

