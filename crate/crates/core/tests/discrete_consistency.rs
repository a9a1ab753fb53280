use aumask_core::labelstore::{LabelMatrix, PredictionMatrix, TernaryLabel};
use aumask_core::loss::{soft_f1_loss, SoftF1Config};
use aumask_core::metrics::{confusion_counts, macro_f1};
use aumask_core::Error;

fn column(n: usize, mut code: usize) -> Vec<i64> {
    (0..n)
        .map(|_| {
            let v = [-1, 0, 1][code % 3];
            code /= 3;
            v
        })
        .collect()
}

#[test]
fn exhaustive_binary_predictions_agree_with_hard_f1() {
    let config = SoftF1Config {
        epsilon: 0.0,
        skip_empty_classes: false,
    };
    let names = vec!["c".to_string()];
    let mut cases = 0;
    for n in 1..=6usize {
        for t in 0..3usize.pow(n as u32) {
            let codes = column(n, t);
            let truth_rows: Vec<Vec<i64>> = codes.iter().map(|&c| vec![c]).collect();
            let truth = LabelMatrix::from_codes(names.clone(), &truth_rows).unwrap();
            for mask in 0..1u32 << n {
                let bits: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                let binary: Vec<Vec<bool>> = bits.iter().map(|&b| vec![b]).collect();
                let pred = PredictionMatrix::new(
                    names.clone(),
                    bits.iter().map(|&b| vec![f64::from(u8::from(b))]).collect(),
                )
                .unwrap();

                let counts = confusion_counts(&truth, &binary).unwrap()[0];
                let (mut tp, mut fp, mut fneg, mut tn) = (0, 0, 0, 0);
                for (&c, &b) in codes.iter().zip(&bits) {
                    match (c, b) {
                        (1, true) => tp += 1,
                        (0, true) => fp += 1,
                        (1, false) => fneg += 1,
                        (0, false) => tn += 1,
                        _ => {}
                    }
                }
                assert_eq!(
                    (counts.true_pos, counts.false_pos, counts.false_neg, counts.true_neg),
                    (tp, fp, fneg, tn)
                );

                match (macro_f1(&truth, &binary), soft_f1_loss(&pred, &truth, &config)) {
                    (Ok(hard), Ok(soft)) => {
                        assert_eq!(soft.soft_f1_macro.to_bits(), hard.to_bits(), "{codes:?} {bits:?}");
                        assert_eq!(soft.loss.to_bits(), (1.0 - hard).to_bits());
                    }
                    (Err(Error::AllClassesSkipped), Err(Error::AllClassesSkipped)) => {
                        assert!(codes.iter().all(|&c| c == -1));
                    }
                    (a, b) => panic!("{codes:?} {bits:?}: {a:?} vs {:?}", b.map(|r| r.loss)),
                }
                cases += 1;
            }
        }
    }
    let expected: usize = (1..=6).map(|n| 3usize.pow(n) * 2usize.pow(n)).sum();
    assert_eq!(cases, expected);
}

#[test]
fn all_unknown_column_is_skipped_in_both() {
    let truth = LabelMatrix::new(vec!["a".into(), "b".into()], vec![vec![TernaryLabel::Unknown, TernaryLabel::Displayed]]).unwrap();
    let pred = PredictionMatrix::new(vec!["a".into(), "b".into()], vec![vec![1.0, 1.0]]).unwrap();
    let config = SoftF1Config {
        epsilon: 0.0,
        skip_empty_classes: false,
    };
    let soft = soft_f1_loss(&pred, &truth, &config).unwrap();
    assert_eq!(soft.per_class_soft_f1[0].1, None);
    assert_eq!(soft.soft_f1_macro, macro_f1(&truth, &[vec![true, true]]).unwrap());
}
