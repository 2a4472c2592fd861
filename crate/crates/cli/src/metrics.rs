//! Evaluation metrics and cross-validation splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-image `(ℓ1, ℓ2)`: summed absolute and summed squared pixel errors.
pub fn image_errors(pred: &[f64], truth: &[f64]) -> (f64, f64) {
    assert_eq!(pred.len(), truth.len(), "image sizes differ");
    pred.iter().zip(truth).fold((0.0, 0.0), |(l1, l2), (p, t)| {
        let e = p - t;
        (l1 + e.abs(), l2 + e * e)
    })
}

/// Mean `(ℓ1, ℓ2)` over images.
pub fn mean_image_errors<'a>(pairs: impl IntoIterator<Item = (&'a [f64], &'a [f64])>) -> (f64, f64) {
    let (mut s1, mut s2, mut n) = (0.0, 0.0, 0usize);
    for (p, t) in pairs {
        let (a, b) = image_errors(p, t);
        s1 += a;
        s2 += b;
        n += 1;
    }
    if n == 0 {
        return (0.0, 0.0);
    }
    (s1 / n as f64, s2 / n as f64)
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

/// One-vs-rest F1 per class. A class never predicted and never present scores 1.
pub fn f1_per_class(pred: &[usize], truth: &[usize], classes: usize) -> Vec<f64> {
    (0..classes)
        .map(|c| {
            let tp = pred.iter().zip(truth).filter(|&(&p, &t)| p == c && t == c).count() as f64;
            let fp = pred.iter().zip(truth).filter(|&(&p, &t)| p == c && t != c).count() as f64;
            let fn_ = pred.iter().zip(truth).filter(|&(&p, &t)| p != c && t == c).count() as f64;
            if tp + fp + fn_ == 0.0 {
                1.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fn_)
            }
        })
        .collect()
}

pub fn mse(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / truth.len() as f64
}

/// Fold index of every item; each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut next = 0;
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}
