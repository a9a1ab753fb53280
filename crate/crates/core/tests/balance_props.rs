use aumask_core::balance::{self, greedy_balance, imbalance_ratio, BalanceTarget, SelectionConfig};
use aumask_core::labelstore::{DatasetDescriptor, MergedDatabase, SampleRecord, TernaryLabel};
use proptest::prelude::*;

fn db_from(codes: &[Vec<i64>]) -> MergedDatabase {
    let k = codes.first().map_or(1, Vec::len);
    let names: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
    let records = codes
        .iter()
        .enumerate()
        .map(|(i, row)| SampleRecord {
            sample_id: format!("d/{i:03}"),
            dataset: "d".into(),
            media_ref: String::new(),
            labels: row.iter().map(|&v| TernaryLabel::from_code(v).unwrap()).collect(),
        })
        .collect();
    MergedDatabase::from_parts(names.clone(), vec![DatasetDescriptor::new("d", names)], records).unwrap()
}

/// Lowest max/min over every weight vector with entries in 1..=max_weight.
fn brute_force_ratio(codes: &[Vec<i64>], max_weight: u64) -> f64 {
    let n = codes.len();
    let k = codes[0].len();
    let mut weights = vec![1u64; n];
    let mut best = f64::INFINITY;
    loop {
        let counts: Vec<u64> = (0..k)
            .map(|c| codes.iter().zip(&weights).filter(|(r, _)| r[c] == 1).map(|(_, w)| w).sum())
            .collect();
        if let Ok(r) = imbalance_ratio(&counts) {
            best = best.min(r);
        }
        let mut i = 0;
        while i < n && weights[i] == max_weight {
            weights[i] = 1;
            i += 1;
        }
        if i == n {
            return best;
        }
        weights[i] += 1;
    }
}

fn recount(db: &MergedDatabase, plan: &balance::BalancePlan) -> Vec<u64> {
    plan.selected_classes
        .iter()
        .map(|name| {
            let c = db.class_index(name).unwrap();
            db.records()
                .iter()
                .map(|r| {
                    let w = plan.weight_of(&r.sample_id).unwrap();
                    if r.labels[c] == TernaryLabel::Displayed { w } else { 0 }
                })
                .sum()
        })
        .collect()
}

#[test]
fn disjoint_positives_reach_perfect_balance() {
    let mut codes = vec![vec![1, 0]; 2];
    codes.extend(vec![vec![0, 1]; 4]);
    let db = db_from(&codes);
    let classes = db.class_names().to_vec();
    let plan = greedy_balance(&db, &classes, BalanceTarget::MinMax, None).unwrap();
    assert_eq!(plan.ratio, 1.0);
    assert_eq!(plan.ratio, brute_force_ratio(&codes, 3));
    assert_eq!(plan.achieved_counts, recount(&db, &plan));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn greedy_never_worsens_and_counts_add_up(
        codes in proptest::collection::vec(proptest::collection::vec(-1i64..=1, 3), 1..10)
    ) {
        let db = db_from(&codes);
        let classes = db.class_names().to_vec();
        match greedy_balance(&db, &classes, BalanceTarget::MinMax, None) {
            Ok(plan) => {
                prop_assert!(plan.ratio <= plan.initial_ratio);
                prop_assert_eq!(&plan.achieved_counts, &recount(&db, &plan));
                prop_assert_eq!(plan.ratio, imbalance_ratio(&plan.achieved_counts).unwrap());
                prop_assert!(plan.weights.iter().all(|(_, w)| *w >= 1));
                let copies: u64 = plan.weights.iter().map(|(_, w)| w - 1).sum();
                prop_assert_eq!(copies, plan.copies_added);
            }
            Err(_) => {
                let counts = balance::displayed_counts(&db, &classes).unwrap();
                prop_assert!(counts.contains(&0));
            }
        }
    }

    #[test]
    fn greedy_matches_brute_force_on_tiny_disjoint_sets(a in 1usize..4, b in 1usize..4) {
        let mut codes = vec![vec![1, 0]; a];
        codes.extend(vec![vec![0, 1]; b]);
        let db = db_from(&codes);
        let classes = db.class_names().to_vec();
        let plan = greedy_balance(&db, &classes, BalanceTarget::MinMax, None).unwrap();
        prop_assert_eq!(plan.ratio, brute_force_ratio(&codes, 4));
    }

    #[test]
    fn dropping_all_unknown_rows_is_idempotent(
        codes in proptest::collection::vec(proptest::collection::vec(-1i64..=1, 3), 0..12),
        threshold in 0u64..5,
    ) {
        let db = if codes.is_empty() { db_from(&[vec![-1, -1, -1]]).retain_records(|_| false) } else { db_from(&codes) };
        let selected = balance::occurrence_filter(&db, &SelectionConfig { min_occurrences: threshold });
        let once = balance::drop_all_unknown(&db, &selected).unwrap();
        let twice = balance::drop_all_unknown(&once, &selected).unwrap();
        prop_assert_eq!(&once, &twice);
        for r in once.records() {
            prop_assert!(selected.iter().any(|s| r.labels[db.class_index(s).unwrap()].is_known()));
        }
        let stricter = balance::occurrence_filter(&db, &SelectionConfig { min_occurrences: threshold + 1 });
        prop_assert!(stricter.iter().all(|c| selected.contains(c)));
    }
}
