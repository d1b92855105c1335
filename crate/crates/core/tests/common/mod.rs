//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use care2vec::numerics::{Matrix, Rng};

/// (concordant + tied / 2) / (P * N) over every positive-negative pair.
pub fn pair_counting_auc(scores: &[f64], labels: &[usize]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}

fn gini_of(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let max = labels.iter().copied().max().unwrap_or(0);
    1.0 - (0..=max).map(|c| (labels.iter().filter(|&&l| l == c).count() as f64 / n).powi(2)).sum::<f64>()
}

/// `(feature, threshold, decrease)` by enumerating every feature and every
/// midpoint, taking the maximal decrease and the first cell (lowest feature,
/// then lowest threshold) within 1e-12 of it. `None` if nothing beats 1e-12.
pub fn brute_force_split(x: &Matrix, y: &[usize]) -> Option<(usize, f64, f64)> {
    let parent = gini_of(y);
    let mut all = Vec::new();
    for f in 0..x.cols() {
        let mut values: Vec<f64> = (0..x.rows()).map(|r| x.get(r, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let left: Vec<usize> = (0..x.rows()).filter(|&r| x.get(r, f) <= t).map(|r| y[r]).collect();
            let right: Vec<usize> = (0..x.rows()).filter(|&r| x.get(r, f) > t).map(|r| y[r]).collect();
            let n = y.len() as f64;
            let dec = parent - left.len() as f64 / n * gini_of(&left) - right.len() as f64 / n * gini_of(&right);
            all.push((f, t, dec));
        }
    }
    let best = all.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    if best <= 1e-12 {
        return None;
    }
    all.into_iter().find(|c| c.2 >= best - 1e-12)
}

/// `n` distinct rows of `f` features with values in `0..levels`, random labels.
pub fn distinct_rows(rng: &mut Rng, n: usize, f: usize, levels: u64, classes: u64) -> (Matrix, Vec<usize>) {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    while rows.len() < n {
        let r: Vec<f64> = (0..f).map(|_| rng.below(levels) as f64).collect();
        if !rows.contains(&r) {
            rows.push(r);
        }
    }
    let y = (0..n).map(|_| rng.below(classes) as usize).collect();
    (Matrix::from_rows(&rows).expect("rectangular"), y)
}

/// Small random instance for the split oracle: 2..=8 rows, 1..=3 features,
/// values on a coarse grid so ties and repeated values are common.
pub fn small_instance(rng: &mut Rng) -> (Matrix, Vec<usize>) {
    let n = 2 + rng.below(7) as usize;
    let f = 1 + rng.below(3) as usize;
    let x = Matrix::from_vec(n, f, (0..n * f).map(|_| rng.below(4) as f64 * 0.5).collect()).expect("shape");
    let classes = 1 + rng.below(3);
    let y = (0..n).map(|_| rng.below(classes) as usize).collect();
    (x, y)
}
