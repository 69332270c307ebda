//! Property suites for the structural invariants: sessionization is a
//! deterministic partition, featurizers respect scaling and permutation
//! symmetries, context vectors stay binary and namespaced, trained models
//! ignore vocabulary ordering, and metrics obey their algebraic identities.

use std::net::{IpAddr, Ipv4Addr};

use proptest::prelude::*;
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use locflow::capture::{
    detect_coordinates, sessionize, CapturedPacket, Direction, FourTuple, HttpFlow, PacketMeta,
};
use locflow::context::{assign_topic, context_vector, AppContext, TopicConfig};
use locflow::eval::{cdf_export, metrics_from_counts};
use locflow::features::{stat_features, SparseFeatureVector, StatVector};
use locflow::learn::{
    train_logistic, train_naive_bayes, train_random_forest, Bootstrap, ForestConfig,
    LabeledDataset, LogisticConfig,
};
use locflow::pipeline::{
    auto_label_flows, FlowClass, HostnameList, InstanceLabel, InstanceVerdict,
};

fn key_pool(i: usize) -> FourTuple {
    FourTuple::new(
        IpAddr::V4(Ipv4Addr::new(10, 0, 0, 2)),
        51000 + (i as u16 % 3),
        IpAddr::V4(Ipv4Addr::new(203, 0, 113, 9)),
        80,
    )
}

fn build_packets(steps: &[(usize, bool, u32, u32)]) -> Vec<CapturedPacket> {
    // Gaps arrive in milliseconds so timestamps stay nondecreasing and exact.
    let mut ts = 0.0;
    steps
        .iter()
        .map(|(key_idx, uplink, gap_ms, size)| {
            ts += *gap_ms as f64 / 1000.0;
            let key = key_pool(*key_idx);
            let direction = if *uplink {
                Direction::Uplink
            } else {
                Direction::Downlink
            };
            CapturedPacket {
                meta: PacketMeta {
                    timestamp: ts,
                    direction,
                    tcp_payload_len: size.saturating_sub(54),
                    total_len: *size,
                    has_http_layer: false,
                    four_tuple: if *uplink { key } else { key.reversed() },
                },
                payload: Vec::new(),
            }
        })
        .collect()
}

fn meta_fingerprints(metas: impl Iterator<Item = PacketMeta>) -> Vec<String> {
    let mut prints: Vec<String> = metas.map(|m| format!("{m:?}")).collect();
    prints.sort();
    prints
}

proptest! {
    #[test]
    fn sessionize_partitions_the_input_packets(
        steps in proptest::collection::vec((0usize..3, any::<bool>(), 0u32..90_000, 40u32..1514), 0..60)
    ) {
        let packets = build_packets(&steps);
        let input = meta_fingerprints(packets.iter().map(|p| p.meta.clone()));
        let flows = sessionize(packets, 60.0);
        let output = meta_fingerprints(flows.iter().flat_map(|f| f.packets.iter().cloned()));
        prop_assert_eq!(input, output);
    }

    #[test]
    fn sessionize_is_deterministic(
        steps in proptest::collection::vec((0usize..3, any::<bool>(), 0u32..90_000, 40u32..1514), 0..60)
    ) {
        let a = sessionize(build_packets(&steps), 60.0);
        let b = sessionize(build_packets(&steps), 60.0);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn in_flow_gaps_never_exceed_the_idle_timeout(
        steps in proptest::collection::vec((0usize..3, any::<bool>(), 0u32..90_000, 40u32..1514), 0..60)
    ) {
        let flows = sessionize(build_packets(&steps), 60.0);
        for flow in &flows {
            for pair in flow.packets.windows(2) {
                prop_assert!(pair[1].timestamp - pair[0].timestamp <= 60.0 + 1e-9);
            }
        }
    }

    #[test]
    fn detected_coordinates_stay_in_range(
        a in -200.0f64..200.0,
        b in -200.0f64..200.0,
        sep in prop::sample::select(vec!["&lon=", "&lng=", ",", "%2C"]),
        noise in "[a-z0-9/?=&.]{0,30}"
    ) {
        let url = format!("track.example/p?{noise}&lat={a:.6}{sep}{b:.6}");
        if let Some(coords) = detect_coordinates(&url) {
            prop_assert!((-90.0..=90.0).contains(&coords.lat));
            prop_assert!((-180.0..=180.0).contains(&coords.lon));
        }
    }
}

fn flow_from_packets(metas: Vec<PacketMeta>) -> HttpFlow {
    HttpFlow {
        id: "flow-000000".into(),
        key: key_pool(0),
        packets: metas,
        ..HttpFlow::default()
    }
}

fn sized_flow(sizes_gaps: &[(bool, u32, u32)]) -> HttpFlow {
    let mut ts = 0.0;
    let metas = sizes_gaps
        .iter()
        .map(|(uplink, size, gap_ms)| {
            ts += *gap_ms as f64 / 1000.0;
            let key = key_pool(0);
            let direction = if *uplink {
                Direction::Uplink
            } else {
                Direction::Downlink
            };
            PacketMeta {
                timestamp: ts,
                direction,
                tcp_payload_len: size.saturating_sub(54),
                total_len: *size,
                has_http_layer: false,
                four_tuple: if *uplink { key } else { key.reversed() },
            }
        })
        .collect();
    flow_from_packets(metas)
}

proptest! {
    #[test]
    fn stat_blocks_keep_min_median_max_ordered(
        steps in proptest::collection::vec((any::<bool>(), 40u32..1514, 0u32..500), 1..40)
    ) {
        let stats = stat_features(&sized_flow(&steps));
        for block in [stats.size_all, stats.size_uplink, stats.size_downlink, stats.interval_ms] {
            prop_assert!(block.min <= block.median + 1e-12);
            prop_assert!(block.median <= block.max + 1e-12);
            prop_assert!(block.std_dev >= 0.0);
        }
    }

    #[test]
    fn permuting_sizes_within_direction_changes_nothing(
        steps in proptest::collection::vec((any::<bool>(), 40u32..1514, 0u32..500), 1..40),
        seed in any::<u64>()
    ) {
        let original = sized_flow(&steps);
        // Shuffle sizes among packets of the same direction, holding
        // timestamps, so every distribution keeps its multiset.
        let mut shuffled = steps.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for want_uplink in [true, false] {
            let idx: Vec<usize> = (0..steps.len()).filter(|i| steps[*i].0 == want_uplink).collect();
            let mut sizes: Vec<u32> = idx.iter().map(|i| steps[*i].1).collect();
            sizes.shuffle(&mut rng);
            for (slot, size) in idx.iter().zip(sizes) {
                shuffled[*slot].1 = size;
            }
        }
        let permuted = sized_flow(&shuffled);
        let a = stat_features(&original).to_array();
        let b = stat_features(&permuted).to_array();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn doubling_sizes_scales_size_stats_and_keeps_shape(
        steps in proptest::collection::vec((any::<bool>(), 40u32..1514, 0u32..500), 2..40)
    ) {
        let base = stat_features(&sized_flow(&steps));
        let doubled_steps: Vec<(bool, u32, u32)> =
            steps.iter().map(|(u, s, g)| (*u, s * 2, *g)).collect();
        let doubled = stat_features(&sized_flow(&doubled_steps));

        for (a, b) in [
            (base.size_all, doubled.size_all),
            (base.size_uplink, doubled.size_uplink),
            (base.size_downlink, doubled.size_downlink),
        ] {
            // Scaling by a power of two is exact for everything that scales
            // linearly, and kurtosis is a ratio of exactly scaled moments.
            prop_assert_eq!((a.min * 2.0).to_bits(), b.min.to_bits());
            prop_assert_eq!((a.max * 2.0).to_bits(), b.max.to_bits());
            prop_assert_eq!((a.median * 2.0).to_bits(), b.median.to_bits());
            prop_assert_eq!((a.mean * 2.0).to_bits(), b.mean.to_bits());
            prop_assert_eq!((a.std_dev * 2.0).to_bits(), b.std_dev.to_bits());
            prop_assert_eq!(a.kurtosis.to_bits(), b.kurtosis.to_bits());
            // Skewness goes through powf, which may round differently.
            prop_assert!((a.skewness - b.skewness).abs() <= 1e-12 * (1.0 + a.skewness.abs()));
        }
        // Counts and timing are untouched by a size change.
        prop_assert_eq!(base.tcp_count, doubled.tcp_count);
        prop_assert_eq!(base.interval_ms, doubled.interval_ms);
    }
}

fn sample_config() -> TopicConfig {
    TopicConfig::from_toml_str(locflow_testkit::sample_topics_toml()).unwrap()
}

fn keyword_pool(config: &TopicConfig) -> Vec<String> {
    let mut pool: Vec<String> = config
        .topics
        .values()
        .flat_map(|words| words.iter().cloned())
        .collect();
    pool.extend(["zebra", "quartz", "umbrella"].map(String::from));
    pool.sort();
    pool
}

proptest! {
    #[test]
    fn context_vectors_are_binary_namespaced_single_topic(
        name in "[A-Za-z][A-Za-z0-9 _-]{0,20}",
        desc_picks in proptest::collection::vec(any::<prop::sample::Index>(), 0..15),
        category in prop::sample::select(vec!["weather", "games", "travel", "tools"]),
        clickables in proptest::collection::vec(
            prop::sample::select(vec!["Davis", "Play", "OK", "Refresh", "berkeley"]), 0..4),
    ) {
        let config = sample_config();
        let pool = keyword_pool(&config);
        let description = desc_picks
            .iter()
            .map(|i| i.get(&pool).as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let context = AppContext {
            instance_id: "inst-0".into(),
            app_name: name,
            description,
            market_category: category.to_string(),
            ui_texts: vec![],
            clickable_labels: clickables.iter().map(|s| s.to_string()).collect(),
        };
        let vector = context_vector(&context, &config);

        let topics = vector.names().filter(|n| n.starts_with("topic:")).count();
        prop_assert_eq!(topics, 1, "topic features: {:?}", vector.names().collect::<Vec<_>>());
        for (feature, value) in vector.iter() {
            prop_assert_eq!(value, 1.0);
            prop_assert!(
                feature.starts_with("topic:")
                    || feature.starts_with("name:")
                    || feature.starts_with("ui:")
                    || feature == "city-clickable",
                "feature {} escapes the namespace",
                feature
            );
        }
    }

    #[test]
    fn assign_topic_ignores_token_order(
        picks in proptest::collection::vec(any::<prop::sample::Index>(), 0..20),
        seed in any::<u64>()
    ) {
        let config = sample_config();
        let pool = keyword_pool(&config);
        let tokens: Vec<String> = picks.iter().map(|i| i.get(&pool).clone()).collect();
        let mut shuffled = tokens.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(
            assign_topic(&tokens, &config, "market:misc"),
            assign_topic(&shuffled, &config, "market:misc")
        );
    }
}

#[test]
fn trained_models_ignore_vocabulary_ordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let features = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot"];
    let rows: Vec<(SparseFeatureVector, String)> = (0..24)
        .map(|i| {
            let mut v = SparseFeatureVector::new();
            for name in features {
                if rng.gen_bool(0.4) {
                    v.set(name, 1.0);
                }
            }
            // A weak but real signal keeps training nontrivial.
            let label = if v.contains("alpha") || (i % 5 == 0) {
                "yes"
            } else {
                "no"
            };
            v.set(if label == "yes" { "bravo" } else { "charlie" }, 1.0);
            (v, label.to_string())
        })
        .collect();

    let sorted = LabeledDataset::from_rows(rows.clone());
    let mut reversed = sorted.clone();
    reversed.vocabulary.reverse();
    let mut shuffled = sorted.clone();
    shuffled.vocabulary.shuffle(&mut rng);

    for variant in [&reversed, &shuffled] {
        assert_eq!(
            train_naive_bayes(&sorted, 1.0).unwrap(),
            train_naive_bayes(variant, 1.0).unwrap()
        );
        assert_eq!(
            train_logistic(&sorted, LogisticConfig::default()).unwrap(),
            train_logistic(variant, LogisticConfig::default()).unwrap()
        );
        let config = ForestConfig {
            n_trees: 15,
            ..ForestConfig::default()
        };
        assert_eq!(
            train_random_forest(&sorted, config).unwrap(),
            train_random_forest(variant, config).unwrap()
        );
    }
}

#[test]
fn forests_are_stable_under_row_order_with_rowhash_bootstrap() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<(SparseFeatureVector, String)> = (0..30)
        .map(|i| {
            let mut v = SparseFeatureVector::new();
            v.set("x", rng.gen_range(0.0..10.0_f64).round());
            v.set("y", rng.gen_range(0.0..10.0_f64).round());
            let label = if v.get("x") > 5.0 { "hi" } else { "lo" };
            let _ = i;
            (v, label.to_string())
        })
        .collect();
    let forward = LabeledDataset::from_rows(rows.clone());
    let mut backward_rows = rows;
    backward_rows.reverse();
    let backward = LabeledDataset::from_rows(backward_rows);

    let config = ForestConfig {
        n_trees: 10,
        bootstrap: Bootstrap::RowHash,
        ..ForestConfig::default()
    };
    let a = train_random_forest(&forward, config).unwrap();
    let b = train_random_forest(&backward, config).unwrap();
    assert_eq!(a.trees, b.trees);
}

fn taint_flow(id: &str, instance: &str, host: &str) -> HttpFlow {
    HttpFlow {
        id: id.to_string(),
        source_instance_id: Some(instance.to_string()),
        taint_location: Some(true),
        requests: vec![locflow::capture::HttpRequest {
            method: "GET".into(),
            host: host.to_string(),
            path: "/q".into(),
            full_url: format!("{host}/q"),
        }],
        ..HttpFlow::default()
    }
}

proptest! {
    #[test]
    fn auto_labeling_partitions_flows(
        assignments in proptest::collection::vec((0usize..4, 0usize..3), 0..30)
    ) {
        let verdicts = [InstanceVerdict::Expected, InstanceVerdict::Unexpected, InstanceVerdict::Filtered];
        let instances: Vec<InstanceLabel> = verdicts
            .iter()
            .enumerate()
            .map(|(i, v)| InstanceLabel { instance_id: format!("inst-{i}"), verdict: *v })
            .collect();
        // Instance index 3 is deliberately unknown to the labeler.
        let flows: Vec<HttpFlow> = assignments
            .iter()
            .enumerate()
            .map(|(i, (inst, host))| {
                let host = ["a.example", "ads.tracker.example", "b.example"][*host];
                taint_flow(&format!("flow-{i:06}"), &format!("inst-{inst}"), host)
            })
            .collect();
        let hostlist = HostnameList::from_text("tracker.example\n", "t").unwrap();
        let (labels, diag) = auto_label_flows(&flows, &instances, &hostlist);

        let mut seen = std::collections::BTreeSet::new();
        for label in &labels {
            prop_assert!(seen.insert(label.flow_id.clone()), "flow labeled twice");
        }
        prop_assert_eq!(
            diag.labeled + diag.dropped_filtered + diag.dropped_unresolved,
            flows.len()
        );
        prop_assert_eq!(labels.len(), diag.labeled);
    }

    #[test]
    fn growing_the_hostlist_is_monotone_toward_illegal(
        hosts in proptest::collection::vec(0usize..4, 1..20),
        base_entries in proptest::collection::vec(0usize..3, 0..3),
        extra_entries in proptest::collection::vec(0usize..3, 0..3)
    ) {
        let host_pool = ["ads.one.example", "cdn.two.example", "geo.three.example", "plain.example"];
        let entry_pool = ["one.example", "two.example", "three.example"];
        let flows: Vec<HttpFlow> = hosts
            .iter()
            .enumerate()
            .map(|(i, h)| taint_flow(&format!("flow-{i:06}"), "inst-0", host_pool[*h]))
            .collect();
        let instances = vec![InstanceLabel {
            instance_id: "inst-0".into(),
            verdict: InstanceVerdict::Expected,
        }];
        let small_text: String = base_entries.iter().map(|e| format!("{}\n", entry_pool[*e])).collect();
        let large_text: String = base_entries
            .iter()
            .chain(extra_entries.iter())
            .map(|e| format!("{}\n", entry_pool[*e]))
            .collect();
        let small = HostnameList::from_text(&small_text, "t").unwrap();
        let large = HostnameList::from_text(&large_text, "t").unwrap();

        let (before, _) = auto_label_flows(&flows, &instances, &small);
        let (after, _) = auto_label_flows(&flows, &instances, &large);
        for (a, b) in before.iter().zip(&after) {
            prop_assert_eq!(&a.flow_id, &b.flow_id);
            if a.class == FlowClass::IllegalLoc {
                prop_assert_eq!(b.class, FlowClass::IllegalLoc);
            }
        }
    }

    #[test]
    fn cdfs_are_nondecreasing_and_end_at_one(
        values in proptest::collection::vec((0u32..50, 0usize..3), 1..60)
    ) {
        let labels = ["a".to_string(), "b".to_string(), "c".to_string()];
        let rows: Vec<(StatVector, String)> = values
            .iter()
            .map(|(v, l)| {
                let s = StatVector {
                    tcp_count: *v as f64,
                    ..StatVector::default()
                };
                (s, labels[*l].clone())
            })
            .collect();
        for table in cdf_export(&rows, &labels, "tcp_count").unwrap() {
            if table.empty {
                prop_assert!(table.points.is_empty());
                continue;
            }
            let mut previous = (f64::NEG_INFINITY, 0.0);
            for (value, fraction) in &table.points {
                prop_assert!(*value > previous.0);
                prop_assert!(*fraction > previous.1);
                previous = (*value, *fraction);
            }
            prop_assert_eq!(table.points.last().unwrap().1, 1.0);
        }
    }

    #[test]
    fn metrics_ignore_uniform_count_scaling(
        tp in 0u64..400, fn_ in 0u64..400, fp in 0u64..400, tn in 0u64..400,
        k in 2u64..5
    ) {
        let base = metrics_from_counts(tp, fn_, fp, tn);
        let scaled = metrics_from_counts(tp * k, fn_ * k, fp * k, tn * k);
        prop_assert_eq!(base, scaled);
    }

    #[test]
    fn f_measure_is_the_harmonic_mean(
        tp in 1u64..400, fn_ in 0u64..400, fp in 0u64..400, tn in 0u64..400
    ) {
        let m = metrics_from_counts(tp, fn_, fp, tn);
        // tp ≥ 1 keeps precision and TPR nonzero.
        let harmonic = 2.0 * m.precision * m.tp_rate / (m.precision + m.tp_rate);
        prop_assert!((m.f_measure - harmonic).abs() <= 1e-12);
    }
}
