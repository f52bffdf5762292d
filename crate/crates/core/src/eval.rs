//! Confusion-matrix metrics, ROC/AUC and stratified k-fold splitting.
//! `Suspicious` is the positive class.

use std::fmt::Write as _;

use thiserror::Error;

use crate::features::FeatureTable;
use crate::label::Label;
use crate::rng::Lcg64;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction and truth lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no cases to evaluate")]
    EmptyInput,
    #[error("sensitivity is undefined without positive cases")]
    NoPositives,
    #[error("specificity is undefined without negative cases")]
    NoNegatives,
    #[error("ROC needs both classes in the ground truth")]
    DegenerateLabels,
    #[error("score {0} at position {1} is not finite")]
    InvalidScore(f64, usize),
    #[error("k-fold needs k >= 2 and at least k rows per class (k = {k}, {label} has {found})")]
    TooFewRows { k: usize, label: Label, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn sensitivity(&self) -> Result<f64, EvalError> {
        sensitivity(self)
    }

    pub fn specificity(&self) -> Result<f64, EvalError> {
        specificity(self)
    }
}

pub fn confusion(pred: &[Label], truth: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for (p, t) in pred.iter().zip(truth) {
        match (p.is_positive(), t.is_positive()) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// `tp / (tp + fn)`
pub fn sensitivity(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let positives = cm.tp + cm.fn_;
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }
    Ok(cm.tp as f64 / positives as f64)
}

/// `tn / (tn + fp)`
pub fn specificity(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let negatives = cm.tn + cm.fp;
    if negatives == 0 {
        return Err(EvalError::NoNegatives);
    }
    Ok(cm.tn as f64 / negatives as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// A case is called suspicious when its score is `>= threshold`.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Sweeps the threshold over `+inf`, every distinct score (descending) and
/// `-inf`, so the curve runs from `(0, 0)` to `(1, 1)`.
pub fn roc(scores: &[f64], truth: &[Label]) -> Result<RocCurve, EvalError> {
    if scores.len() != truth.len() {
        return Err(EvalError::LengthMismatch(scores.len(), truth.len()));
    }
    if let Some((i, &s)) = scores.iter().enumerate().find(|(_, s)| !s.is_finite()) {
        return Err(EvalError::InvalidScore(s, i));
    }
    let positives = truth.iter().filter(|l| l.is_positive()).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::DegenerateLabels);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if truth[order[i]].is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint { fpr: fp as f64 / n, tpr: tp as f64 / p, threshold });
    }
    points.push(RocPoint { fpr: 1.0, tpr: 1.0, threshold: f64::NEG_INFINITY });

    let mut curve = RocCurve { points, auc: 0.0 };
    curve.auc = auc(&curve);
    Ok(curve)
}

/// Trapezoidal area under the (fpr-sorted) curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) * 0.5)
        .sum()
}

/// CSV `threshold,fpr,tpr`, one line per curve point (sentinels print as
/// `inf` / `-inf`).
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut s = String::from("threshold,fpr,tpr\n");
    for p in &curve.points {
        let _ = writeln!(s, "{:?},{:?},{:?}", p.threshold, p.fpr, p.tpr);
    }
    s
}

/// Standalone SVG of the curve inside a unit-square axis box, with the
/// chance diagonal for reference.
pub fn roc_svg(curve: &RocCurve) -> String {
    const SIZE: f64 = 400.0;
    const MARGIN: f64 = 50.0;
    let x = |fpr: f64| MARGIN + fpr * SIZE;
    let y = |tpr: f64| MARGIN + (1.0 - tpr) * SIZE;
    let total = SIZE + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{total}" height="{total}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 4"/>"#,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    let pts: Vec<String> = curve.points.iter().map(|p| format!("{:.3},{:.3}", x(p.fpr), y(p.tpr))).collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, pts.join(" "));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14">false positive rate</text>"#,
        MARGIN + SIZE / 2.0,
        total - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 15 {})">true positive rate</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="14">AUC = {:.4}</text>"#,
        MARGIN + SIZE - 10.0,
        MARGIN + SIZE - 10.0,
        curve.auc
    );
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    /// Row indices, ascending.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified assignment of rows to `k` folds.
///
/// Each class's row indices (in table order) are shuffled with one
/// [`Lcg64`] seeded with `seed`, normal class first, then dealt round-robin
/// into folds. The deal continues across classes, so the suspicious class
/// starts at the fold after the last normal row.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    for label in Label::ALL {
        let found = labels.iter().filter(|&&l| l == label).count();
        if k < 2 || found < k {
            return Err(EvalError::TooFewRows { k, label, found });
        }
    }
    let mut rng = Lcg64::new(seed);
    let mut assignment = vec![0usize; labels.len()];
    let mut next = 0usize;
    for label in Label::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        rng.shuffle(&mut idx);
        for i in idx {
            assignment[i] = next % k;
            next += 1;
        }
    }
    Ok(assignment)
}

pub fn kfold(table: &FeatureTable, k: usize, seed: u64) -> Result<Vec<Fold>, EvalError> {
    let labels: Vec<Label> = table.rows().iter().map(|r| r.label).collect();
    let assignment = stratified_folds(&labels, k, seed)?;
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assignment[i] == f);
            Fold { train, test }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use proptest::prelude::*;
    use Label::{Normal as N, Suspicious as S};

    /// Fraction of (positive, negative) pairs ranked correctly, ties = 1/2.
    fn mann_whitney(scores: &[f64], truth: &[Label]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, ti) in truth.iter().enumerate() {
            if !ti.is_positive() {
                continue;
            }
            for (j, tj) in truth.iter().enumerate() {
                if tj.is_positive() {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn confusion_cases() {
        assert_eq!(confusion(&[S; 5], &[S; 5]).unwrap(), ConfusionMatrix { tp: 5, ..Default::default() });
        let truth = [S, N, S, N];
        let flipped = [N, S, N, S];
        assert_eq!(confusion(&flipped, &truth).unwrap(), ConfusionMatrix { fp: 2, fn_: 2, ..Default::default() });
        // hand tally: tp at 0,3,7; fp at 2,8; tn at 1,5,9; fn at 4,6
        let pred = [S, N, S, S, N, N, N, S, S, N];
        let truth = [S, N, N, S, S, N, S, S, N, N];
        let cm = confusion(&pred, &truth).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 3, fp: 2, tn: 3, fn_: 2 });
        assert_eq!(cm.total(), 10);
        assert_eq!(confusion(&[S], &[S, N]), Err(EvalError::LengthMismatch(1, 2)));
        assert_eq!(confusion(&[], &[]), Err(EvalError::EmptyInput));
    }

    #[test]
    fn worked_rates() {
        let cm = ConfusionMatrix { tp: 90, fn_: 10, tn: 720, fp: 180 };
        assert_eq!(sensitivity(&cm).unwrap(), 0.9);
        assert_eq!(specificity(&cm).unwrap(), 0.8);
        assert_eq!(sensitivity(&ConfusionMatrix { tp: 4, ..Default::default() }).unwrap(), 1.0);
        assert_eq!(sensitivity(&ConfusionMatrix { fn_: 4, ..Default::default() }).unwrap(), 0.0);
        assert_eq!(specificity(&ConfusionMatrix { tn: 4, ..Default::default() }).unwrap(), 1.0);
        assert_eq!(specificity(&ConfusionMatrix { fp: 4, ..Default::default() }).unwrap(), 0.0);
        assert_eq!(sensitivity(&ConfusionMatrix { tn: 3, ..Default::default() }), Err(EvalError::NoPositives));
        assert_eq!(specificity(&ConfusionMatrix { tp: 3, ..Default::default() }), Err(EvalError::NoNegatives));
    }

    #[test]
    fn separated_scores() {
        let c = roc(&[0.9, 0.8, 0.3, 0.1], &[S, S, N, N]).unwrap();
        assert!(c.points.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(c.auc, 1.0);
        assert_eq!(c.points.first().unwrap().threshold, f64::INFINITY);
    }

    #[test]
    fn tied_scores() {
        let c = roc(&[0.5; 6], &[S, N, S, N, N, S]).unwrap();
        let distinct: Vec<(f64, f64)> = c.points.iter().map(|p| (p.fpr, p.tpr)).collect();
        assert_eq!(distinct, vec![(0.0, 0.0), (1.0, 1.0), (1.0, 1.0)]);
        assert_eq!(c.auc, 0.5);
    }

    #[test]
    fn roc_errors() {
        assert_eq!(roc(&[0.1, 0.2], &[S, S]), Err(EvalError::DegenerateLabels));
        assert_eq!(roc(&[0.1], &[S, N]), Err(EvalError::LengthMismatch(1, 2)));
        assert!(matches!(roc(&[f64::NAN, 0.2], &[S, N]), Err(EvalError::InvalidScore(_, 0))));
    }

    #[test]
    fn csv_and_svg_render() {
        let c = roc(&[0.9, 0.2, 0.4], &[S, N, S]).unwrap();
        let csv = roc_csv(&c);
        assert!(csv.starts_with("threshold,fpr,tpr\ninf,0.0,0.0\n0.9,0.0,0.5\n"));
        assert!(csv.ends_with("-inf,1.0,1.0\n"));
        let svg = roc_svg(&c);
        assert!(svg.starts_with("<svg") && svg.contains("<polyline") && svg.trim_end().ends_with("</svg>"));
    }

    fn table(labels: &[Label]) -> FeatureTable {
        let mut t = FeatureTable::new(vec!["x".into()]).unwrap();
        for (i, &l) in labels.iter().enumerate() {
            t.push(format!("r{i}"), l, FeatureVector::new(vec!["x".into()], vec![i as f64]).unwrap()).unwrap();
        }
        t
    }

    #[test]
    fn kfold_ten_plus_ten() {
        let labels: Vec<Label> = (0..20).map(|i| if i < 10 { N } else { S }).collect();
        let t = table(&labels);
        let folds = kfold(&t, 5, 42).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = [0; 20];
        for f in &folds {
            let pos = f.test.iter().filter(|&&i| labels[i] == S).count();
            assert_eq!((pos, f.test.len() - pos), (2, 2));
            assert_eq!(f.train.len() + f.test.len(), 20);
            assert!(f.train.iter().all(|i| !f.test.contains(i)));
            for &i in &f.test {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(kfold(&t, 5, 42).unwrap(), folds);
        assert_ne!(kfold(&t, 5, 43).unwrap(), folds);
    }

    #[test]
    fn kfold_errors() {
        let t = table(&[N, N, N, S, S]);
        assert!(matches!(kfold(&t, 3, 0), Err(EvalError::TooFewRows { label: S, found: 2, .. })));
        assert!(matches!(kfold(&t, 1, 0), Err(EvalError::TooFewRows { .. })));
        assert!(matches!(kfold(&table(&[N; 6]), 2, 0), Err(EvalError::TooFewRows { label: S, found: 0, .. })));
    }

    fn scored_cases() -> impl Strategy<Value = (Vec<f64>, Vec<Label>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec(0u8..12, n).prop_map(|v| v.into_iter().map(|s| s as f64 / 11.0).collect()),
                proptest::collection::vec(any::<bool>(), n)
                    .prop_map(|v| v.into_iter().map(|b| if b { S } else { N }).collect::<Vec<_>>()),
            )
        })
    }

    proptest! {
        #[test]
        fn auc_matches_mann_whitney((scores, truth) in scored_cases()) {
            prop_assume!(truth.contains(&S) && truth.contains(&N));
            let c = roc(&scores, &truth).unwrap();
            prop_assert!((c.auc - mann_whitney(&scores, &truth)).abs() < 1e-12);
        }

        #[test]
        fn curve_is_anchored_and_monotone((scores, truth) in scored_cases()) {
            prop_assume!(truth.contains(&S) && truth.contains(&N));
            let c = roc(&scores, &truth).unwrap();
            let (first, last) = (c.points[0], *c.points.last().unwrap());
            prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
            prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
            for w in c.points.windows(2) {
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
                prop_assert!(w[1].threshold < w[0].threshold);
            }
        }

        #[test]
        fn reversed_scores_flip_auc((scores, truth) in scored_cases()) {
            prop_assume!(truth.contains(&S) && truth.contains(&N));
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let (a, b) = (roc(&scores, &truth).unwrap().auc, roc(&neg, &truth).unwrap().auc);
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn raising_threshold_never_raises_rates((scores, truth) in scored_cases(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            prop_assume!(truth.contains(&S) && truth.contains(&N));
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let call = |t: f64| -> Vec<Label> { scores.iter().map(|&s| if s >= t { S } else { N }).collect() };
            let a = confusion(&call(lo), &truth).unwrap();
            let b = confusion(&call(hi), &truth).unwrap();
            prop_assert!(b.tp <= a.tp && b.fp <= a.fp);
            for cm in [a, b] {
                let (se, sp) = (sensitivity(&cm).unwrap(), specificity(&cm).unwrap());
                prop_assert!((0.0..=1.0).contains(&se) && (0.0..=1.0).contains(&sp));
            }
        }

        #[test]
        fn folds_are_stratified_partitions(n_neg in 2usize..30, n_pos in 2usize..30, k in 2usize..6, seed in any::<u64>()) {
            prop_assume!(n_neg >= k && n_pos >= k);
            let mut labels = vec![N; n_neg];
            labels.extend(vec![S; n_pos]);
            Lcg64::new(seed ^ 1).shuffle(&mut labels);
            let folds = kfold(&table(&labels), k, seed).unwrap();
            let mut seen = vec![0; labels.len()];
            for f in &folds {
                for &i in &f.test { seen[i] += 1; }
                for label in Label::ALL {
                    let total = labels.iter().filter(|&&l| l == label).count() as f64;
                    let got = f.test.iter().filter(|&&i| labels[i] == label).count() as f64;
                    prop_assert!((got - total / k as f64).abs() < 1.0);
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }
}
