use drsl_core::data::{
    normalize, normalize_dataset, parse_libsvm_str, read_dataset, serialize_libsvm, split, synth_generate,
    synth_generate_with_beta, write_dataset, RawExample, SynthSpec,
};
use drsl_core::Error;
use proptest::prelude::*;

fn token() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => (1usize..50, -1e3..1e3f64).prop_map(|(i, v)| format!("{i}:{v}")),
        1 => (1usize..50, -1e-6..1e-6f64).prop_map(|(i, v)| format!("{i}:{v:e}")),
        1 => Just("0:1".to_string()),
        1 => Just("3:nan".to_string()),
        1 => Just("x:1".to_string()),
        1 => Just("4".to_string()),
        1 => Just("5:".to_string()),
        1 => Just("#c".to_string()),
        1 => "[a-z:0-9.+-]{0,6}",
    ]
}

fn line() -> impl Strategy<Value = String> {
    let label = prop_oneof![
        Just("+1"),
        Just("1"),
        Just("-1"),
        Just("0"),
        Just("2"),
        Just("abc"),
        Just(""),
        Just("1.0"),
    ];
    (label, prop::collection::vec(token(), 0..6)).prop_map(|(l, toks)| {
        let mut s = l.to_string();
        for t in toks {
            s.push(' ');
            s.push_str(&t);
        }
        s
    })
}

fn valid_example() -> impl Strategy<Value = RawExample> {
    (
        any::<bool>(),
        prop::collection::btree_map(0usize..30, -100.0..100.0f64, 0..8),
    )
        .prop_map(|(pos, m)| RawExample {
            label: if pos { 1.0 } else { -1.0 },
            features: m.into_iter().collect(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parser_never_panics(lines in prop::collection::vec(line(), 0..20)) {
        let text = lines.join("\n");
        match parse_libsvm_str(&text) {
            Ok(parsed) => {
                for ex in &parsed.examples {
                    prop_assert!(ex.label == 1.0 || ex.label == -1.0);
                    prop_assert!(ex.features.windows(2).all(|w| w[0].0 < w[1].0));
                }
                let canon = serialize_libsvm(&parsed.examples);
                let again = parse_libsvm_str(&canon).unwrap();
                prop_assert_eq!(serialize_libsvm(&again.examples), canon);
            }
            Err(e) => {
                let ok = matches!(e, Error::Parse { line, .. } if line >= 1 && line <= lines.len().max(1));
                prop_assert!(ok, "unexpected error {:?}", e);
            }
        }
    }

    #[test]
    fn round_trip_is_exact(examples in prop::collection::vec(valid_example(), 1..30)) {
        let text = serialize_libsvm(&examples);
        let parsed = parse_libsvm_str(&text).unwrap();
        prop_assert_eq!(&parsed.examples, &examples);
        prop_assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn normalization_bounds_and_idempotence(examples in prop::collection::vec(valid_example(), 1..30)) {
        let ds = normalize(&examples).unwrap();
        prop_assert!(ds.max_row_norm() <= 1.0 + 1e-12);
        let max_raw = examples.iter().map(|e| e.features.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
        prop_assert!((ds.scale() - 1.0 / max_raw.max(1.0)).abs() <= 1e-12 * ds.scale());
        let again = normalize_dataset(ds.clone());
        prop_assert_eq!(again, ds);
    }

    #[test]
    fn split_partitions_rows(n in 1usize..60, frac in 0.0..=1.0f64, seed in any::<u64>()) {
        let (ds, _) = synth_generate(&SynthSpec::new(n, 3, 1)).unwrap();
        let (train, test) = split(&ds, frac, seed).unwrap();
        prop_assert_eq!(train.n() + test.n(), n);
        prop_assert_eq!(test.n(), (frac * n as f64).round() as usize);
        prop_assert_eq!(train.scale(), ds.scale());
        // every original row appears exactly once across the two parts
        let key = |d: &drsl_core::Dataset, i: usize| format!("{:?}{}", d.row_pairs(i), d.label(i));
        let mut all: Vec<String> = (0..ds.n()).map(|i| key(&ds, i)).collect();
        let mut parts: Vec<String> = (0..train.n()).map(|i| key(&train, i)).chain((0..test.n()).map(|i| key(&test, i))).collect();
        all.sort();
        parts.sort();
        prop_assert_eq!(all, parts);
    }
}

#[test]
fn documented_examples() {
    let p = parse_libsvm_str("+1 1:0.5 3:-0.2").unwrap();
    assert_eq!(p.examples[0].features, vec![(0, 0.5), (2, -0.2)]);
    let p = parse_libsvm_str("0 2:1").unwrap();
    assert_eq!(p.examples[0].label, -1.0);
    assert_eq!(p.warnings.len(), 1);
    let ds = normalize(&[
        RawExample {
            label: 1.0,
            features: vec![(0, 4.0)],
        },
        RawExample {
            label: -1.0,
            features: vec![(1, 2.0)],
        },
    ])
    .unwrap();
    assert_eq!(ds.scale(), 0.25);
    assert_eq!(ds.row_pairs(1), vec![(1, 0.5)]);
    assert!(matches!(
        parse_libsvm_str("1 2:1 2:3"),
        Err(Error::Parse { line: 1, .. })
    ));
    assert!(matches!(
        parse_libsvm_str("\n\n1 0:1"),
        Err(Error::Parse { line: 3, .. })
    ));
    assert!(normalize(&[]).is_err());
}

#[test]
fn synthetic_generation_is_deterministic() {
    let spec = SynthSpec::new(200, 10, 7);
    let (a, ba) = synth_generate(&spec).unwrap();
    let (b, bb) = synth_generate(&spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(ba, bb);
    let (c, _) = synth_generate(&SynthSpec::new(200, 10, 8)).unwrap();
    assert_ne!(a, c);
    assert!(a.max_row_norm() <= 1.0 + 1e-12);
    assert_eq!(a.d(), 10);
}

#[test]
fn noiseless_labels_follow_the_first_coordinate() {
    let mut spec = SynthSpec::new(500, 4, 3);
    spec.noise_var = 0.0;
    let ds = synth_generate_with_beta(&spec, &[1.0, 0.0, 0.0, 0.0]).unwrap();
    for i in 0..ds.n() {
        let x0 = ds.row_pairs(i).iter().find(|(j, _)| *j == 0).map_or(0.0, |p| p.1);
        assert_eq!(ds.label(i), if x0 >= 0.0 { 1.0 } else { -1.0 });
    }
}

#[test]
fn label_balance_within_five_sigma() {
    // labels are symmetric under x → −x, so the count of +1 is Binomial(n, 1/2)
    let n = 100_000;
    let (ds, _) = synth_generate(&SynthSpec::new(n, 10, 11)).unwrap();
    let pos = ds.labels().iter().filter(|&&y| y > 0.0).count() as f64;
    let sigma = (n as f64 * 0.25).sqrt();
    assert!((pos - n as f64 / 2.0).abs() <= 5.0 * sigma, "pos = {pos}");
}

#[test]
fn dataset_cache_round_trip() {
    let (ds, _) = synth_generate(&SynthSpec::new(50, 6, 2)).unwrap();
    let mut buf = Vec::new();
    write_dataset(&ds, &mut buf).unwrap();
    let back = read_dataset(buf.as_slice()).unwrap();
    assert_eq!(back, ds);
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("50 6 "));
    assert!(read_dataset("3 2 1.0\n+1 1:0.5\n".as_bytes()).is_err());
}
