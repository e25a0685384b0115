/// Area under the ROC curve as the Mann–Whitney statistic:
/// `(#{s⁺ > s⁻} + ½ #{s⁺ = s⁻}) / (n⁺ n⁻)` over all positive–negative pairs.
///
/// `None` when either class is absent or a score is NaN. The pair counts are
/// accumulated exactly (they are multiples of ½), so the result equals brute
/// force pair counting bit for bit.
pub fn auc_roc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    if scores.len() != positive.len() || scores.iter().any(|s| s.is_nan()) {
        return None;
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the numerator, as an integer
    let mut twice: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut p, mut q) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if positive[order[j]] {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        twice += 2 * p * negatives_below + p * q;
        negatives_below += q;
        i = j;
    }
    Some(twice as f64 / 2.0 / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        assert_eq!(auc_roc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]), Some(1.0));
        assert_eq!(auc_roc(&[0.3; 4], &[true, false, true, false]), Some(0.5));
        assert_eq!(auc_roc(&[0.8, 0.3, 0.5, 0.1], &[true, true, false, false]), Some(0.75));
        assert_eq!(auc_roc(&[0.8, 0.3], &[true, true]), None);
    }
}
