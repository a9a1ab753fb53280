//! Class selection, unknown-row removal and multi-label oversampling.
//!
//! Balancing assigns integer repetition weights to samples. The greedy rule
//! repeatedly adds one copy of a sample that carries a displayed label for
//! one of the currently scarcest classes, choosing the copy that gives the
//! lowest resulting max/min ratio of displayed counts. Ties go to the sample
//! with the fewest copies so far, then to the smallest sample id.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::labelstore::{MergedDatabase, TernaryLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub min_occurrences: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { min_occurrences: 20_000 }
    }
}

fn class_indices(db: &MergedDatabase, classes: &[String]) -> Result<Vec<usize>> {
    classes
        .iter()
        .map(|c| db.class_index(c).ok_or_else(|| Error::UnknownClass(c.clone())))
        .collect()
}

/// Displayed counts of `classes`, in the given order.
pub fn displayed_counts(db: &MergedDatabase, classes: &[String]) -> Result<Vec<u64>> {
    let idx = class_indices(db, classes)?;
    let mut counts = vec![0u64; idx.len()];
    for r in db.records() {
        for (n, &c) in counts.iter_mut().zip(&idx) {
            if r.labels[c] == TernaryLabel::Displayed {
                *n += 1;
            }
        }
    }
    Ok(counts)
}

/// Classes with at least `min_occurrences` displayed labels, in class-axis order.
pub fn occurrence_filter(db: &MergedDatabase, config: &SelectionConfig) -> Vec<String> {
    let h = db.class_histogram();
    h.class_names
        .iter()
        .zip(&h.counts)
        .filter(|(_, c)| c.displayed >= config.min_occurrences)
        .map(|(name, _)| name.clone())
        .collect()
}

/// Removes records whose labels on `selected` are all unknown.
pub fn drop_all_unknown(db: &MergedDatabase, selected: &[String]) -> Result<MergedDatabase> {
    let idx = class_indices(db, selected)?;
    Ok(db.retain_records(|r| idx.iter().any(|&c| r.labels[c].is_known())))
}

/// max / min of the counts. Every count must be positive.
pub fn imbalance_ratio(counts: &[u64]) -> Result<f64> {
    let (max, min) = max_min(counts)?;
    Ok(max as f64 / min as f64)
}

fn max_min(counts: &[u64]) -> Result<(u64, u64)> {
    let max = *counts.iter().max().ok_or_else(|| Error::Empty("no classes".into()))?;
    let min = *counts.iter().min().expect("non-empty");
    if min == 0 {
        return Err(Error::InvalidArgument("a class has no displayed labels".into()));
    }
    Ok((max, min))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BalanceTarget {
    /// Drive max/min of the displayed counts as low as possible.
    MinMax,
    /// Raise every class to at least this many displayed labels.
    AtLeast(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancePlan {
    pub selected_classes: Vec<String>,
    /// (sample_id, repetition weight) in database order.
    pub weights: Vec<(String, u64)>,
    pub achieved_counts: Vec<u64>,
    pub initial_ratio: f64,
    pub ratio: f64,
    pub copies_added: u64,
}

impl BalancePlan {
    pub fn weight_of(&self, sample_id: &str) -> Option<u64> {
        self.weights.iter().find(|(id, _)| id == sample_id).map(|(_, w)| *w)
    }
}

/// Ratio max/min kept as integers for exact comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Spread {
    max: u64,
    min: u64,
    at_min: usize,
}

impl Spread {
    fn of(counts: &[u64]) -> Self {
        let max = *counts.iter().max().unwrap();
        let min = *counts.iter().min().unwrap();
        Spread {
            max,
            min,
            at_min: counts.iter().filter(|&&c| c == min).count(),
        }
    }

    fn after_adding(counts: &[u64], pattern: &[usize]) -> Self {
        let mut next = counts.to_vec();
        for &c in pattern {
            next[c] += 1;
        }
        Self::of(&next)
    }
}

impl Ord for Spread {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = self.max as u128 * other.min as u128;
        let rhs = other.max as u128 * self.min as u128;
        lhs.cmp(&rhs).then(self.at_min.cmp(&other.at_min))
    }
}

impl PartialOrd for Spread {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Records sharing one displayed-label pattern, ordered by (weight, sample id).
struct PatternGroup<'a> {
    pattern: Vec<usize>,
    queue: BinaryHeap<Reverse<(u64, &'a str, usize)>>,
}

/// (deficit classes covered, spread after, queue head, pattern key).
type Candidate<'a> = (usize, Spread, (u64, &'a str, usize), &'a Vec<usize>);

/// Computes repetition weights that even out displayed counts of `selected`.
///
/// Stops when no added copy improves the objective, when the target is met,
/// or after `max_iterations` copies (default: 10 × number of records).
pub fn greedy_balance(
    db: &MergedDatabase,
    selected: &[String],
    target: BalanceTarget,
    max_iterations: Option<u64>,
) -> Result<BalancePlan> {
    let idx = class_indices(db, selected)?;
    let mut counts = displayed_counts(db, selected)?;
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Unbalanceable(selected[i].clone()));
    }
    let initial = Spread::of(&counts);
    let cap = max_iterations.unwrap_or(10 * db.len() as u64);

    let mut weights = vec![1u64; db.len()];
    let mut groups: BTreeMap<Vec<usize>, PatternGroup> = BTreeMap::new();
    for (i, r) in db.records().iter().enumerate() {
        let pattern: Vec<usize> = idx
            .iter()
            .enumerate()
            .filter(|(_, &c)| r.labels[c] == TernaryLabel::Displayed)
            .map(|(k, _)| k)
            .collect();
        if pattern.is_empty() {
            continue;
        }
        groups
            .entry(pattern.clone())
            .or_insert_with(|| PatternGroup {
                pattern,
                queue: BinaryHeap::new(),
            })
            .queue
            .push(Reverse((1, r.sample_id.as_str(), i)));
    }

    let mut added = 0u64;
    while added < cap {
        let current = Spread::of(&counts);
        let deficit_classes: Vec<bool> = match target {
            BalanceTarget::MinMax => counts.iter().map(|&c| c == current.min).collect(),
            BalanceTarget::AtLeast(t) => {
                if current.min >= t {
                    break;
                }
                counts.iter().map(|&c| c < t).collect()
            }
        };

        let mut best: Option<Candidate> = None;
        for (key, group) in &groups {
            let covered = group.pattern.iter().filter(|&&c| deficit_classes[c]).count();
            if covered == 0 {
                continue;
            }
            let spread = Spread::after_adding(&counts, &group.pattern);
            let Reverse(head) = *group.queue.peek().expect("groups are never empty");
            let better = match &best {
                None => true,
                Some((b_cov, b_spread, b_head, _)) => {
                    let primary = match target {
                        BalanceTarget::MinMax => spread.cmp(b_spread),
                        BalanceTarget::AtLeast(_) => b_cov.cmp(&covered).then(spread.cmp(b_spread)),
                    };
                    primary.then((head.0, head.1).cmp(&(b_head.0, b_head.1))) == Ordering::Less
                }
            };
            if better {
                best = Some((covered, spread, head, key));
            }
        }

        let Some((_, spread, _, key)) = best else { break };
        if target == BalanceTarget::MinMax && spread >= current {
            break;
        }
        let key = key.clone();
        let group = groups.get_mut(&key).expect("key from map");
        let Reverse((w, id, i)) = group.queue.pop().expect("non-empty");
        weights[i] = w + 1;
        group.queue.push(Reverse((w + 1, id, i)));
        for &c in &group.pattern {
            counts[c] += 1;
        }
        added += 1;
    }

    // Recount from the weights rather than trusting the running totals.
    let mut achieved = vec![0u64; idx.len()];
    for (r, &w) in db.records().iter().zip(&weights) {
        for (n, &c) in achieved.iter_mut().zip(&idx) {
            if r.labels[c] == TernaryLabel::Displayed {
                *n += w;
            }
        }
    }
    debug_assert_eq!(achieved, counts);

    Ok(BalancePlan {
        selected_classes: selected.to_vec(),
        weights: db
            .records()
            .iter()
            .zip(&weights)
            .map(|(r, &w)| (r.sample_id.clone(), w))
            .collect(),
        initial_ratio: initial.max as f64 / initial.min as f64,
        ratio: imbalance_ratio(&achieved)?,
        achieved_counts: achieved,
        copies_added: added,
    })
}

#[derive(Serialize, Deserialize)]
struct PlanHeader {
    format: String,
    version: u32,
    selected_classes: Vec<String>,
    achieved_counts: BTreeMap<String, u64>,
    initial_ratio: f64,
    ratio: f64,
    copies_added: u64,
}

#[derive(Serialize, Deserialize)]
struct PlanLine {
    sample_id: String,
    weight: u64,
}

const PLAN_FORMAT: &str = "aumask.balance-plan";

/// Header line followed by one `{sample_id, weight}` line per sample.
pub fn plan_to_bytes(plan: &BalancePlan) -> Vec<u8> {
    let header = PlanHeader {
        format: PLAN_FORMAT.into(),
        version: 1,
        selected_classes: plan.selected_classes.clone(),
        achieved_counts: plan
            .selected_classes
            .iter()
            .cloned()
            .zip(plan.achieved_counts.iter().copied())
            .collect(),
        initial_ratio: plan.initial_ratio,
        ratio: plan.ratio,
        copies_added: plan.copies_added,
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    for (id, w) in &plan.weights {
        serde_json::to_writer(
            &mut out,
            &PlanLine {
                sample_id: id.clone(),
                weight: *w,
            },
        )
        .expect("line serializes");
        out.push(b'\n');
    }
    out
}

pub fn save_plan(plan: &BalancePlan, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &plan_to_bytes(plan))
}

pub fn load_plan(path: impl AsRef<Path>) -> Result<BalancePlan> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| Error::parse(path, 1, "missing header"))?;
    let header: PlanHeader = serde_json::from_str(first).map_err(|e| Error::parse(path, 1, e.to_string()))?;
    if header.format != PLAN_FORMAT {
        return Err(Error::parse(path, 1, format!("unexpected format `{}`", header.format)));
    }
    let mut weights = Vec::new();
    for (n, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let l: PlanLine = serde_json::from_str(line).map_err(|e| Error::parse(path, n, e.to_string()))?;
        weights.push((l.sample_id, l.weight));
    }
    let achieved_counts = header
        .selected_classes
        .iter()
        .map(|c| {
            header
                .achieved_counts
                .get(c)
                .copied()
                .ok_or_else(|| Error::Validation(format!("no achieved count for `{c}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BalancePlan {
        selected_classes: header.selected_classes,
        weights,
        achieved_counts,
        initial_ratio: header.initial_ratio,
        ratio: header.ratio,
        copies_added: header.copies_added,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelstore::{merge, DatasetDescriptor, DatasetTable};

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    /// One dataset annotating `classes`; each row lists its displayed classes,
    /// all other annotated classes are explicit negatives.
    fn db_from_patterns(classes: &[&str], rows: &[&[&str]]) -> MergedDatabase {
        let d = vec![DatasetDescriptor::new("D", classes.iter().copied())];
        let mut t = DatasetTable::new("D");
        for (i, row) in rows.iter().enumerate() {
            t.push(
                format!("{i:03}"),
                "",
                classes.iter().map(|c| (*c, row.contains(c) as i64)),
            );
        }
        merge(&d, &[t]).unwrap()
    }

    fn recount(db: &MergedDatabase, plan: &BalancePlan) -> Vec<u64> {
        plan.selected_classes
            .iter()
            .map(|class| {
                let c = db.class_index(class).unwrap();
                db.records()
                    .iter()
                    .map(|r| {
                        let w = plan.weight_of(&r.sample_id).unwrap();
                        if r.labels[c] == TernaryLabel::Displayed {
                            w
                        } else {
                            0
                        }
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn occurrence_threshold_is_inclusive() {
        let mut rows: Vec<&[&str]> = Vec::new();
        rows.extend(std::iter::repeat_n(&["A", "C"][..], 5));
        rows.extend(std::iter::repeat_n(&["A", "B"][..], 3));
        let db = db_from_patterns(&["A", "B", "C"], &rows);
        // A: 8, B: 3, C: 5
        let sel = occurrence_filter(&db, &SelectionConfig { min_occurrences: 5 });
        assert_eq!(sel, names(&["A", "C"]));
        let sel = occurrence_filter(&db, &SelectionConfig { min_occurrences: 0 });
        assert_eq!(sel, names(&["A", "B", "C"]));
        assert!(occurrence_filter(&db, &SelectionConfig { min_occurrences: 9 }).is_empty());
    }

    #[test]
    fn drop_all_unknown_keeps_explicit_negatives() {
        let d = vec![
            DatasetDescriptor::new("A", ["AU01"]),
            DatasetDescriptor::new("B", ["AU02"]),
        ];
        let mut a = DatasetTable::new("A");
        a.push("0", "", [("AU01", 0)]);
        a.push("1", "", [("AU01", 1)]);
        let mut b = DatasetTable::new("B");
        b.push("0", "", [("AU02", 1)]);
        let db = merge(&d, &[a, b]).unwrap();
        let kept = drop_all_unknown(&db, &names(&["AU01"])).unwrap();
        let ids: Vec<&str> = kept.records().iter().map(|r| r.sample_id.as_str()).collect();
        assert_eq!(ids, ["A/0", "A/1"]);
        assert_eq!(drop_all_unknown(&kept, &names(&["AU01"])).unwrap(), kept);
        assert!(drop_all_unknown(&db, &names(&["AU99"])).is_err());
    }

    #[test]
    fn imbalance_ratio_examples() {
        assert_eq!(imbalance_ratio(&[10, 10]).unwrap(), 1.0);
        assert_eq!(imbalance_ratio(&[30, 10]).unwrap(), 3.0);
        assert!(imbalance_ratio(&[3, 0]).is_err());
        assert!(imbalance_ratio(&[]).is_err());
    }

    #[test]
    fn uniform_counts_give_identity_plan() {
        let db = db_from_patterns(&["A", "B"], &[&["A"], &["B"], &["A"], &["B"]]);
        let plan = greedy_balance(&db, &names(&["A", "B"]), BalanceTarget::MinMax, None).unwrap();
        assert!(plan.weights.iter().all(|(_, w)| *w == 1));
        assert_eq!(plan.ratio, 1.0);
        assert_eq!(plan.copies_added, 0);
    }

    #[test]
    fn disjoint_positives_reach_ratio_one() {
        let mut rows: Vec<&[&str]> = vec![&["A"]; 10];
        rows.extend(std::iter::repeat_n(&["B"][..], 20));
        let db = db_from_patterns(&["A", "B"], &rows);
        let plan = greedy_balance(&db, &names(&["A", "B"]), BalanceTarget::MinMax, None).unwrap();
        assert_eq!(plan.ratio, 1.0);
        assert_eq!(plan.achieved_counts, vec![20, 20]);
        assert_eq!(recount(&db, &plan), plan.achieved_counts);
        // Copies are spread: every A sample is duplicated exactly once.
        for (id, w) in &plan.weights {
            let r = db.records().iter().find(|r| &r.sample_id == id).unwrap();
            let expect = if r.labels[0] == TernaryLabel::Displayed { 2 } else { 1 };
            assert_eq!(*w, expect, "{id}");
        }
    }

    #[test]
    fn plateau_does_not_stop_early() {
        // A=1, B=1, C=2: adding one A keeps the ratio at 2 but frees one class from the minimum.
        let db = db_from_patterns(&["A", "B", "C"], &[&["A"], &["B"], &["C"], &["C"]]);
        let plan = greedy_balance(&db, &names(&["A", "B", "C"]), BalanceTarget::MinMax, None).unwrap();
        assert_eq!(plan.ratio, 1.0);
    }

    #[test]
    fn fully_correlated_labels_cannot_improve() {
        // Every A positive is also a B positive.
        let db = db_from_patterns(&["A", "B"], &[&["A", "B"], &["A", "B"], &["B"], &["B"], &["B"]]);
        let plan = greedy_balance(&db, &names(&["A", "B"]), BalanceTarget::MinMax, None).unwrap();
        assert!(plan.ratio <= plan.initial_ratio);
        assert_eq!(recount(&db, &plan), plan.achieved_counts);
    }

    #[test]
    fn target_mode_raises_all_classes() {
        let db = db_from_patterns(&["A", "B"], &[&["A"], &["B"], &["B"]]);
        let plan = greedy_balance(&db, &names(&["A", "B"]), BalanceTarget::AtLeast(5), None).unwrap();
        assert!(plan.achieved_counts.iter().all(|&c| c >= 5));
        assert_eq!(recount(&db, &plan), plan.achieved_counts);
    }

    #[test]
    fn iteration_cap_is_respected() {
        let mut rows: Vec<&[&str]> = vec![&["A"]; 2];
        rows.extend(std::iter::repeat_n(&["B"][..], 20));
        let db = db_from_patterns(&["A", "B"], &rows);
        let plan = greedy_balance(&db, &names(&["A", "B"]), BalanceTarget::MinMax, Some(3)).unwrap();
        assert_eq!(plan.copies_added, 3);
        assert_eq!(plan.achieved_counts, vec![5, 20]);
    }

    #[test]
    fn class_without_positives_is_unbalanceable() {
        let db = db_from_patterns(&["A", "B"], &[&["A"], &[]]);
        assert!(matches!(
            greedy_balance(&db, &names(&["A", "B"]), BalanceTarget::MinMax, None),
            Err(Error::Unbalanceable(c)) if c == "B"
        ));
    }

    #[test]
    fn plan_file_round_trip() {
        let db = db_from_patterns(&["A", "B"], &[&["A"], &["B"], &["B"]]);
        let plan = greedy_balance(&db, &names(&["A", "B"]), BalanceTarget::MinMax, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plan.jsonl");
        save_plan(&plan, &path).unwrap();
        assert_eq!(load_plan(&path).unwrap(), plan);
    }
}
