use std::collections::BTreeSet;

use proptest::prelude::*;
use rk_core::analyses::{analyze_cell, select, EntitySpec, SelectorKind, SubsetSelector};
use rk_core::corpus::{
    load, parse_records_in, window_citations, write_csv, write_jsonl, Aggregates, DocType,
    PublicationRecord, RecordFormat, WindowConfig,
};
use rk_core::metrics::{rk_index, top_fraction_count};
use rk_core::ranking::{build_ranked_list, percentile_cutoff};
use rk_core::simgen::{self, CitationModel, ExtraCountries, SimParams, TopicWeight};
use rk_core::CountryCode;

const CODES: [&str; 8] = ["US", "CN", "DE", "ES", "FR", "JP", "KR", "GB"];

fn record_strategy() -> impl Strategy<Value = PublicationRecord> {
    (
        prop::sample::select(vec!["graphene", "cancer", "stem cells"]),
        2012i32..2019,
        prop::collection::btree_set(prop::sample::select(CODES.to_vec()), 1..4),
        prop::collection::btree_map(2017i32..2024, 0u64..500, 0..4),
        prop::bool::weighted(0.9),
    )
        .prop_map(
            |(topic, year, countries, cites, article)| PublicationRecord {
                id: String::new(),
                topic: topic.to_string(),
                year,
                countries: countries.into_iter().map(|c| c.parse().unwrap()).collect(),
                citations_by_year: cites,
                doc_type: if article {
                    DocType::Article
                } else {
                    DocType::Other
                },
            },
        )
}

fn records_strategy(max: usize) -> impl Strategy<Value = Vec<PublicationRecord>> {
    prop::collection::vec(record_strategy(), 1..max).prop_map(|mut recs| {
        for (i, r) in recs.iter_mut().enumerate() {
            r.id = format!("p{i:04}");
        }
        recs
    })
}

fn as_set(recs: &[PublicationRecord]) -> BTreeSet<String> {
    recs.iter()
        .map(|r| serde_json::to_string(r).unwrap())
        .collect()
}

fn entity(name: &str) -> EntitySpec {
    EntitySpec::resolve(name, &Aggregates::builtin()).unwrap()
}

proptest! {
    #[test]
    fn jsonl_and_csv_round_trip(recs in records_strategy(40)) {
        let w = WindowConfig::default();
        let mut jsonl = Vec::new();
        write_jsonl(&recs, &mut jsonl).unwrap();
        let back = parse_records_in(&jsonl[..], RecordFormat::Jsonl, &w).unwrap();
        prop_assert_eq!(as_set(&back), as_set(&recs));

        let mut csv = Vec::new();
        write_csv(&recs, &mut csv).unwrap();
        let back = parse_records_in(&csv[..], RecordFormat::Csv, &w).unwrap();
        prop_assert_eq!(as_set(&back), as_set(&recs));
    }

    #[test]
    fn load_accounts_for_every_record_and_is_idempotent(recs in records_strategy(60), drop_every in 2usize..7) {
        let excluded: BTreeSet<String> = recs.iter().step_by(drop_every).map(|r| r.id.clone()).collect();
        let w = WindowConfig::default();
        let n = recs.len();
        let c = load(recs, w.clone(), Aggregates::builtin(), excluded.clone()).unwrap();
        prop_assert_eq!(c.records().len() + c.diagnostics().dropped(), n);
        prop_assert!(c.records().iter().all(|r| r.doc_type == DocType::Article && !excluded.contains(&r.id)));

        let again = load(c.records().to_vec(), w, Aggregates::builtin(), excluded).unwrap();
        prop_assert_eq!(again.records(), c.records());
        prop_assert_eq!(again.diagnostics().dropped(), 0);
    }

    #[test]
    fn ranked_list_is_permutation_invariant_and_consistent(recs in records_strategy(80), seed in any::<u64>()) {
        let w = WindowConfig::default();
        let mut shuffled = recs.clone();
        // Deterministic Fisher-Yates driven by the seed.
        let mut s = seed | 1;
        for i in (1..shuffled.len()).rev() {
            s ^= s << 13; s ^= s >> 7; s ^= s << 17;
            shuffled.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let a = load(recs, w.clone(), Aggregates::builtin(), BTreeSet::new()).unwrap();
        let b = load(shuffled, w, Aggregates::builtin(), BTreeSet::new()).unwrap();
        for topic in a.topics() {
            let la = build_ranked_list(&a, topic).unwrap();
            let lb = build_ranked_list(&b, topic).unwrap();
            let mut ca = Vec::new();
            let mut cb = Vec::new();
            la.write_csv(&mut ca).unwrap();
            lb.write_csv(&mut cb).unwrap();
            prop_assert_eq!(ca, cb);

            let ranks: Vec<u64> = la.entries().iter().map(|e| e.rank).collect();
            prop_assert_eq!(ranks, (1..=la.n_world()).collect::<Vec<_>>());
            for pair in la.entries().windows(2) {
                prop_assert!(pair[0].citations > pair[1].citations
                    || (pair[0].citations == pair[1].citations && pair[0].id < pair[1].id));
            }
        }
    }

    #[test]
    fn more_citations_never_worsen_rank(recs in records_strategy(60), pick in any::<prop::sample::Index>(), extra in 1u64..300) {
        let w = WindowConfig::default();
        let c = load(recs.clone(), w.clone(), Aggregates::builtin(), BTreeSet::new()).unwrap();
        prop_assume!(!c.records().is_empty());
        let target = pick.get(c.records()).clone();
        let before = build_ranked_list(&c, &target.topic).unwrap().rank_of(&target.id).unwrap();
        let boosted: Vec<_> = recs.into_iter().map(|mut r| {
            if r.id == target.id {
                *r.citations_by_year.entry(w.citation_years.start()).or_default() += extra;
            }
            r
        }).collect();
        let c2 = load(boosted, w, Aggregates::builtin(), BTreeSet::new()).unwrap();
        let after = build_ranked_list(&c2, &target.topic).unwrap().rank_of(&target.id).unwrap();
        prop_assert!(after <= before);
    }

    #[test]
    fn window_folding_matches_manual_sum(rec in record_strategy()) {
        let w = WindowConfig::default();
        let manual: u64 = rec.citations_by_year.iter().filter(|(y, _)| (2019..=2022).contains(*y)).map(|(_, c)| c).sum();
        prop_assert_eq!(window_citations(&rec, &w), manual);
    }

    #[test]
    fn rk_log_identity(ranks in prop::collection::btree_set(1u64..5000, 10)) {
        let ranks: Vec<u64> = ranks.into_iter().collect();
        let rk = rk_index(&ranks, 5000).unwrap();
        let product: f64 = ranks.iter().map(|&r| r as f64 + 20.0).product();
        let direct = 1000.0 / product.powf(0.1);
        prop_assert!(((rk.value - direct) / direct).abs() < 1e-12);
        let mean_ln = ranks.iter().map(|&r| (r as f64 + 20.0).ln()).sum::<f64>() / 10.0;
        prop_assert!((rk.value.ln() - (1000f64.ln() - mean_ln)).abs() < 1e-12);
        prop_assert!(rk.value <= 39.4682 );
    }

    #[test]
    fn rk_dominance(base in prop::collection::btree_set(1u64..2000, 10), bumps in prop::collection::vec(0u64..50, 10)) {
        let a: Vec<u64> = base.iter().copied().collect();
        // b is pointwise >= a and still strictly increasing.
        let mut b = Vec::with_capacity(10);
        let mut acc = 0;
        for (r, bump) in a.iter().zip(&bumps) {
            acc += bump;
            b.push(r + acc);
        }
        let ra = rk_index(&a, 3000).unwrap().value;
        let rb = rk_index(&b, 3000).unwrap().value;
        if a == b {
            prop_assert_eq!(ra, rb);
        } else {
            prop_assert!(ra > rb);
        }
    }

    #[test]
    fn padding_never_beats_real_ranks(ranks in prop::collection::btree_set(1u64..900, 1..10), n in 900u64..2000) {
        let real: Vec<u64> = ranks.iter().copied().collect();
        let padded = rk_index(&real, n).unwrap();
        prop_assert_eq!(padded.padded_slots, 10 - real.len());
        // Any completion with real ranks <= n scores at least as high.
        let mut completed = real.clone();
        let mut next = n;
        while completed.len() < 10 {
            if !completed.contains(&next) { completed.push(next); }
            next -= 1;
        }
        prop_assert!(rk_index(&completed, n).unwrap().value >= padded.value - 1e-12);
    }

    #[test]
    fn top_counts_nest(ranks in prop::collection::btree_set(1u64..1000, 0..40), a in 1u64..1000, b in 1u64..1000) {
        let ranks: Vec<u64> = ranks.into_iter().collect();
        let (lo, hi) = (a.min(b), a.max(b));
        let cl = percentile_cutoff(1000, lo as f64 / 1000.0).unwrap();
        let ch = percentile_cutoff(1000, hi as f64 / 1000.0).unwrap();
        prop_assert!(top_fraction_count(&ranks, cl) <= top_fraction_count(&ranks, ch));
    }
}

fn sim_params(seed: u64) -> SimParams {
    SimParams {
        n_papers: 400,
        topics: vec![TopicWeight {
            name: "t".into(),
            weight: 1.0,
        }],
        country_weights: [
            ("US", 4.0),
            ("CN", 3.0),
            ("DE", 1.0),
            ("ES", 1.0),
            ("FR", 1.0),
            ("JP", 1.0),
        ]
        .into_iter()
        .map(|(c, w)| (c.to_string(), w))
        .collect(),
        p_international: 0.4,
        collab_extra_countries: ExtraCountries { q: 0.4, cap: 3 },
        citation_model: CitationModel {
            mu: 1.0,
            sigma: 1.5,
        },
        seed,
        publication_years: "2014-2017".into(),
        citation_years: "2019-2022".into(),
    }
}

#[test]
fn selections_partition_and_nest() {
    for seed in 0..20 {
        let c = simgen::generate(&sim_params(seed)).unwrap();
        let n_world = c.topic_records("t").count();
        for name in ["USA", "China", "Spain", "EU"] {
            let e = entity(name);
            let sel = |kind| select(&c, "t", &e, &SubsetSelector::simple(kind)).unwrap();
            let d = sel(SelectorKind::Domestic);
            let col = sel(SelectorKind::Collaborative);
            let all = sel(SelectorKind::EntityAll);
            let rest = sel(SelectorKind::WorldExcluding);
            assert!(d.is_disjoint(&col));
            assert_eq!(d.len() + col.len(), all.len());
            assert_eq!(all.len() + rest.len(), n_world);
            for partner in ["USA", "Japan"] {
                let p = entity(partner);
                if !p.members.is_disjoint(&e.members) {
                    continue;
                }
                let ex = select(&c, "t", &e, &SubsetSelector::excluding(p)).unwrap();
                assert!(ex.is_subset(&col));
            }
        }
        // A paper domestic to Spain is domestic to the EU.
        let es = select(&c, "t", &entity("Spain"), &SubsetSelector::domestic()).unwrap();
        let eu = select(&c, "t", &entity("EU"), &SubsetSelector::domestic()).unwrap();
        assert!(es.is_subset(&eu));
    }
}

#[test]
fn heavy_tail_sanity() {
    let mut p = sim_params(11);
    p.n_papers = 10_000;
    p.citation_model = CitationModel {
        mu: 2.0,
        sigma: 1.2,
    };
    let c = simgen::generate(&p).unwrap();
    let mut cites: Vec<u64> = c
        .records()
        .iter()
        .map(|r| window_citations(r, c.window()))
        .collect();
    cites.sort_unstable_by(|a, b| b.cmp(a));
    let total: u64 = cites.iter().sum();
    let top: u64 = cites[..cites.len() / 100].iter().sum();
    assert!(
        top as f64 >= 0.05 * total as f64,
        "top 1% share {}",
        top as f64 / total as f64
    );
}

#[test]
fn distinct_seeds_differ() {
    let a = simgen::generate_records(&sim_params(1)).unwrap();
    let b = simgen::generate_records(&sim_params(2)).unwrap();
    assert_ne!(a, b);
}

#[test]
fn worked_example_ranks_embedded_in_full_world() {
    let us: BTreeSet<CountryCode> = ["US".parse().unwrap()].into();
    let recs = simgen::embed_ranks(
        "solar",
        61_699,
        &[(us, vec![4, 8, 9, 15, 24, 27, 29, 31, 32, 36])],
        &["JP".parse().unwrap()].into(),
    );
    let c = load(
        recs,
        WindowConfig::default(),
        Aggregates::builtin(),
        BTreeSet::new(),
    )
    .unwrap();
    let (n, v) =
        simgen::oracle_rk(&c, "solar", &entity("USA"), &SubsetSelector::domestic()).unwrap();
    assert_eq!(n, 10);
    assert!((v - 25.05).abs() <= 0.005);
    let cell = analyze_cell(&c, "solar", &entity("USA"), &SubsetSelector::domestic()).unwrap();
    assert!((cell.value().unwrap() - v).abs() / v < 1e-9);
}
