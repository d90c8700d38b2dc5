mod common;

use augbench::classifier::{self, predict_log_posteriors};
use augbench::corpus::{self, Corpus, Label, LabeledReview, Provenance};
use augbench::evaluation::{self, ConfusionMatrix};
use augbench::generator::{self, GenerationParams};
use augbench::promptaid::{self, BandSpec, Prompt};
use augbench::text::{self, tokenize, vectorize};
use proptest::prelude::*;

const WORDS: &[&str] = &["pizza", "was", "cold", "great", "crust", "not", "very", "happy"];

fn doc_strategy(max_len: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(WORDS).prop_map(str::to_owned), 0..=max_len)
}

fn labeled_docs(max_docs: usize, max_len: usize) -> impl Strategy<Value = Vec<(Vec<String>, Label)>> {
    prop::collection::vec(
        (
            prop::collection::vec(prop::sample::select(WORDS).prop_map(str::to_owned), 1..=max_len),
            prop::sample::select(vec![Label::Negative, Label::Positive])),
        1..=max_docs,
    )
}

fn to_corpus(docs: &[(Vec<String>, Label)], provenance: Provenance) -> Corpus {
    Corpus::new(
        docs.iter()
            .map(|(d, l)| {
                let text = if d.is_empty() { "!".to_owned() } else { d.join(" ") };
                LabeledReview::new(text, *l, provenance).unwrap()
            })
            .collect(),
    )
}

fn cm_strategy() -> impl Strategy<Value = ConfusionMatrix> {
    [[0u64..60, 0u64..60], [0u64..60, 0u64..60]]
        .prop_filter("non-empty", |c| c.iter().flatten().sum::<u64>() > 0)
        .prop_map(ConfusionMatrix::from_counts)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binarize_partitions_star_range(stars in 1i64..=5) {
        let raw = corpus::RawReview::new(stars, "text").unwrap();
        let got = corpus::binarize(&raw);
        let expected = match stars {
            1 | 2 => Some(Label::Negative),
            4 | 5 => Some(Label::Positive),
            _ => None,
        };
        match got {
            corpus::Binarized::Labeled(r) => prop_assert_eq!(Some(r.label()), expected),
            corpus::Binarized::Excluded => prop_assert_eq!(None, expected),
        }
    }

    #[test]
    fn holdout_is_a_disjoint_stratified_split(
        docs in labeled_docs(40, 4),
        frac in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let c = to_corpus(&docs, Provenance::Genuine);
        let h = (c.len() as f64 * frac) as usize;
        match corpus::partition_holdout(&c, h, seed) {
            Ok((train, test)) => {
                prop_assert_eq!(test.len(), h);
                prop_assert_eq!(train.len() + test.len(), c.len());
                let diff = test.count(Label::Positive) as i64 - test.count(Label::Negative) as i64;
                prop_assert!(diff.abs() <= 1);
                // multiset union equals the input
                let mut all: Vec<String> = train.to_jsonl_string().lines().chain(test.to_jsonl_string().lines()).map(str::to_owned).collect();
                let mut orig: Vec<String> = c.to_jsonl_string().lines().map(str::to_owned).collect();
                all.sort();
                orig.sort();
                prop_assert_eq!(all, orig);
                let again = corpus::partition_holdout(&c, h, seed).unwrap();
                prop_assert_eq!(again.1, test);
            }
            Err(e) => {
                let need_neg = h / 2;
                let need_pos = h - need_neg;
                let (n, p) = (c.count(Label::Negative), c.count(Label::Positive));
                prop_assert!(need_neg > n.min(p) || need_pos > n.max(p), "unexpected error: {}", e);
            }
        }
    }

    #[test]
    fn concat_is_associative_and_additive(
        a in labeled_docs(6, 3), b in labeled_docs(6, 3), c in labeled_docs(6, 3),
    ) {
        let g = to_corpus(&a, Provenance::Genuine);
        let s1 = to_corpus(&b, Provenance::Synthetic);
        let s2 = to_corpus(&c, Provenance::Synthetic);
        let left = corpus::concat(&corpus::concat(&g, &s1).unwrap(), &s2).unwrap();
        let right = corpus::concat(&g, &corpus::concat(&s1, &s2).unwrap()).unwrap();
        prop_assert_eq!(&left, &right);
        for l in Label::ALL {
            prop_assert_eq!(left.count(l), g.count(l) + s1.count(l) + s2.count(l));
        }
    }

    #[test]
    fn ngram_counts_ignore_document_order(docs in labeled_docs(20, 10), seed in any::<u64>(), order in 1usize..=3) {
        use rand::seq::SliceRandom;
        let c = to_corpus(&docs, Provenance::Genuine);
        let mut shuffled = c.reviews().to_vec();
        shuffled.shuffle(&mut augbench::seed::rng(seed));
        let a = promptaid::count_ngrams(&c, order).unwrap();
        let b = promptaid::count_ngrams(&Corpus::new(shuffled), order).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn banding_assigns_each_ngram_once(docs in labeled_docs(20, 10)) {
        let c = to_corpus(&docs, Provenance::Genuine);
        let table = promptaid::count_ngrams(&c, 1).unwrap();
        prop_assume!(!table.is_empty());
        let banded = promptaid::band_table(&table, &BandSpec::defaults()).unwrap();
        let mut seen = std::collections::HashSet::new();
        for band in &banded.bands {
            for row in &band.ngrams {
                prop_assert!(seen.insert(row.ngram.clone()), "ngram in two bands");
                prop_assert!(table.rows.contains(row));
            }
        }
    }

    #[test]
    fn prompts_use_corpus_tokens_only(docs in labeled_docs(20, 10), k in 1usize..12, seed in any::<u64>()) {
        let c = to_corpus(&docs, Provenance::Genuine);
        let tables = promptaid::analyze_class(&c, &BandSpec::defaults(), augbench::Execution::default()).unwrap();
        let prompts = match promptaid::suggest_prompts(&tables, Label::Positive, k, seed) {
            Ok(p) => p,
            Err(_) => { prop_assert!(tables.iter().all(|t| t.top_band().unwrap().ngrams.is_empty())); return Ok(()); }
        };
        prop_assert_eq!(prompts.len(), k);
        let vocab = text::Vocabulary::fit(c.texts());
        for p in &prompts {
            prop_assert!(tokenize(p.text()).iter().all(|t| vocab.id(t).is_some()));
        }
        prop_assert_eq!(prompts, promptaid::suggest_prompts(&tables, Label::Positive, k, seed).unwrap());
    }

    #[test]
    fn generator_contracts(
        docs in prop::collection::vec(doc_strategy(12), 1..15),
        prompt in doc_strategy(4).prop_filter("non-empty", |d| !d.is_empty()),
        extra in prop::option::of(Just("zebra".to_owned())),
        target in 1usize..20,
        temperature in 0.05f64..3.0,
        seed in any::<u64>(),
    ) {
        let corpus = to_corpus(&docs.iter().map(|d| (d.clone(), Label::Positive)).collect::<Vec<_>>(), Provenance::Genuine);
        let model = generator::fit_generator(&corpus, 3).unwrap();
        let mut prompt_tokens = prompt.clone();
        prompt_tokens.extend(extra);
        let prompt = Prompt::new(prompt_tokens.join(" "), Label::Positive).unwrap();
        let params = GenerationParams { temperature, ..GenerationParams::with_target(target) };
        prop_assume!(prompt_tokens.len() <= params.max_length);
        let out = generator::generate(&model, &prompt, &params, seed).unwrap();
        let toks = tokenize(&out);
        prop_assert!(toks.starts_with(&prompt_tokens));
        prop_assert!(toks.len() <= params.max_length);
        for t in &toks[prompt_tokens.len()..] {
            prop_assert!(model.vocabulary().id(t).is_some());
        }
        prop_assert_eq!(out, generator::generate(&model, &prompt, &params, seed).unwrap());
    }

    #[test]
    fn nb_scale_invariance(docs in labeled_docs(10, 6), alpha in 0.1f64..3.0) {
        // smoothing mass must scale with the data for the fitted model to be unchanged
        let c = to_corpus(&docs, Provenance::Genuine);
        prop_assume!(c.labels().len() == 2);
        let doubled = Corpus::new(c.reviews().iter().chain(c.reviews()).cloned().collect());
        let vocab = text::build_vocabulary(&c).unwrap();
        let m1 = classifier::fit_mnb(&c, &vocab, alpha).unwrap();
        let m2 = classifier::fit_mnb(&doubled, &vocab, 2.0 * alpha).unwrap();
        for l in Label::ALL {
            prop_assert!((m1.class_log_prior(l) - m2.class_log_prior(l)).abs() < 1e-12);
            for (x, y) in m1.token_log_likelihood(l).iter().zip(m2.token_log_likelihood(l)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
        for (d, _) in &docs {
            let v = vectorize(d, &vocab);
            prop_assert_eq!(classifier::predict(&m1, &v).unwrap(), classifier::predict(&m2, &v).unwrap());
        }
    }

    #[test]
    fn nb_monotonic_in_positive_evidence(docs in labeled_docs(10, 6), doc in doc_strategy(6)) {
        let c = to_corpus(&docs, Provenance::Genuine);
        prop_assume!(c.labels().len() == 2);
        let vocab = text::build_vocabulary(&c).unwrap();
        let m = classifier::fit_mnb(&c, &vocab, 1.0).unwrap();
        let before = classifier::predict(&m, &vectorize(&doc, &vocab)).unwrap();
        prop_assume!(before == Label::Positive);
        let (p, n) = (m.token_log_likelihood(Label::Positive), m.token_log_likelihood(Label::Negative));
        for (id, tok) in vocab.tokens().iter().enumerate() {
            if p[id] > n[id] {
                let mut longer = doc.clone();
                longer.push(tok.clone());
                prop_assert_eq!(classifier::predict(&m, &vectorize(&longer, &vocab)).unwrap(), Label::Positive);
            }
        }
    }

    #[test]
    fn nb_argmax_ignores_shared_offsets(docs in labeled_docs(10, 6), doc in doc_strategy(6), k in -50.0f64..50.0) {
        let c = to_corpus(&docs, Provenance::Genuine);
        prop_assume!(c.labels().len() == 2);
        let vocab = text::build_vocabulary(&c).unwrap();
        let m = classifier::fit_mnb(&c, &vocab, 1.0).unwrap();
        let s = predict_log_posteriors(&m, &vectorize(&doc, &vocab)).unwrap();
        let shifted = [s[0] + k, s[1] + k];
        // exact-tie behaviour of the shifted pair can differ only by rounding
        prop_assume!((s[0] - s[1]).abs() > 1e-9);
        prop_assert_eq!(classifier::decide(s), classifier::decide(shifted));
    }

    #[test]
    fn metrics_match_recount(cm in cm_strategy()) {
        let [[tn, fp], [fn_, tp]] = cm.counts();
        // expand to per-example label lists and recount
        let mut actual = Vec::new();
        let mut predicted = Vec::new();
        for (a, p, n) in [(Label::Negative, Label::Negative, tn), (Label::Negative, Label::Positive, fp),
                          (Label::Positive, Label::Negative, fn_), (Label::Positive, Label::Positive, tp)] {
            for _ in 0..n { actual.push(a); predicted.push(p); }
        }
        prop_assert_eq!(evaluation::confusion(&actual, &predicted).unwrap(), cm);
        let r = evaluation::metrics(&cm).unwrap();
        let total = actual.len() as f64;
        let correct = actual.iter().zip(&predicted).filter(|(a, p)| a == p).count() as f64;
        prop_assert!((r.accuracy - correct / total).abs() < 1e-15);
        for l in Label::ALL {
            let tp_l = actual.iter().zip(&predicted).filter(|(a, p)| **a == l && **p == l).count() as f64;
            let pred_l = predicted.iter().filter(|p| **p == l).count() as f64;
            let act_l = actual.iter().filter(|a| **a == l).count() as f64;
            let prec = if pred_l > 0.0 { tp_l / pred_l } else { 0.0 };
            let rec = if act_l > 0.0 { tp_l / act_l } else { 0.0 };
            let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
            let c = r.class(l);
            prop_assert!((c.precision - prec).abs() < 1e-15);
            prop_assert!((c.recall - rec).abs() < 1e-15);
            prop_assert!((c.f1 - f1).abs() < 1e-15);
        }
        // support-weighted recall is accuracy
        let weighted: f64 = Label::ALL.iter().map(|&l| r.class(l).recall * r.class(l).support as f64).sum();
        prop_assert!((weighted / total - r.accuracy).abs() < 1e-12);
        for name in evaluation::METRIC_NAMES {
            let v = r.get(name).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn metrics_ignore_class_order(cm in cm_strategy()) {
        let a = evaluation::metrics(&cm).unwrap();
        let b = evaluation::metrics(&cm.swapped()).unwrap();
        prop_assert!((a.accuracy - b.accuracy).abs() < 1e-15);
        prop_assert!((a.macro_precision - b.macro_precision).abs() < 1e-15);
        prop_assert!((a.macro_recall - b.macro_recall).abs() < 1e-15);
        prop_assert!((a.macro_f1 - b.macro_f1).abs() < 1e-15);
    }

    #[test]
    fn balanced_support_macro_recall_is_accuracy(tn in 0u64..80, tp in 0u64..80, n in 1u64..80) {
        let (tn, tp) = (tn.min(n), tp.min(n));
        let cm = ConfusionMatrix::from_counts([[tn, n - tn], [n - tp, tp]]);
        let r = evaluation::metrics(&cm).unwrap();
        prop_assert!((r.macro_recall - r.accuracy).abs() < 1e-12);
    }

    #[test]
    fn compare_is_zero_on_self_and_antisymmetric(a in cm_strategy(), cuts in prop::array::uniform3(0.0f64..=1.0)) {
        // b redistributes a's total over the four cells
        let t = a.total();
        let mut c: Vec<u64> = cuts.iter().map(|x| (x * t as f64) as u64).collect();
        c.sort_unstable();
        let b = ConfusionMatrix::from_counts([[c[0], c[1] - c[0]], [c[2] - c[1], t - c[2]]]);
        let (ra, rb) = (evaluation::metrics(&a).unwrap(), evaluation::metrics(&b).unwrap());
        prop_assert!(evaluation::compare(&ra, &ra).unwrap().changes.iter().all(|c| c.absolute == 0.0 && c.relative_percent.is_none_or(|x| x == 0.0)));
        let ab = evaluation::compare(&ra, &rb).unwrap();
        let ba = evaluation::compare(&rb, &ra).unwrap();
        for (x, y) in ab.changes.iter().zip(&ba.changes) {
            prop_assert_eq!(x.absolute, -y.absolute);
        }
    }
}
