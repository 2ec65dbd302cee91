//! Mask scoring: weighted per-class binary cross-entropy, mean IoU, and
//! mean pixel accuracy.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::perception::raster::Raster;
use crate::perception::{check_same_shape, Masks};

const CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
pub struct MaskScores {
    pub loss: f64,
    pub miou: f64,
    pub mpa: f64,
}

/// Weighted binary cross-entropy for one class:
/// -(1/N) * sum_i w_i * (t_i log o_i + (1 - t_i) log(1 - o_i)),
/// with predictions clamped away from 0 and 1 before the logs.
pub fn bce_class(pred: &[f64], truth: &[bool], weights: &[f64]) -> f64 {
    let n = pred.len() as f64;
    let mut sum = 0.0;
    for ((&o, &t), &w) in pred.iter().zip(truth).zip(weights) {
        let o = o.clamp(CLAMP, 1.0 - CLAMP);
        let t = if t { 1.0 } else { 0.0 };
        sum += w * (t * o.ln() + (1.0 - t) * (1.0 - o).ln());
    }
    -sum / n
}

fn iou_class(pred: &[f64], truth: &[bool]) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&o, &t) in pred.iter().zip(truth) {
        let p = o >= 0.5;
        if p && t {
            inter += 1;
        }
        if p || t {
            union += 1;
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn pixel_accuracy_class(pred: &[f64], truth: &[bool]) -> f64 {
    let correct = pred
        .iter()
        .zip(truth)
        .filter(|(&o, &t)| (o >= 0.5) == t)
        .count();
    correct as f64 / pred.len() as f64
}

/// Score predicted probability masks against boolean truth with per-pixel
/// weights shared across the two classes ([handle, rim]).
pub fn score_masks(pred: &Masks, truth: &Masks, weights: &Raster<f64>) -> Result<MaskScores> {
    let handle_prob = pred
        .handle_prob
        .as_ref()
        .map(|r| r.clone())
        .unwrap_or_else(|| pred.handle.map(|&b| if b { 1.0 } else { 0.0 }));
    let rim_prob = pred
        .rim_prob
        .as_ref()
        .map(|r| r.clone())
        .unwrap_or_else(|| pred.rim.map(|&b| if b { 1.0 } else { 0.0 }));
    check_same_shape(&handle_prob, &truth.handle)?;
    check_same_shape(&rim_prob, &truth.rim)?;
    check_same_shape(&handle_prob, weights)?;

    let classes = [
        (&handle_prob, &truth.handle),
        (&rim_prob, &truth.rim),
    ];
    let k = classes.len() as f64;
    let mut loss = 0.0;
    let mut miou = 0.0;
    let mut mpa = 0.0;
    for (prob, t) in classes {
        loss += bce_class(&prob.data, &t.data, &weights.data);
        miou += iou_class(&prob.data, &t.data);
        mpa += pixel_accuracy_class(&prob.data, &t.data);
    }
    Ok(MaskScores {
        loss: loss / k,
        miou: miou / k,
        mpa: mpa / k,
    })
}

/// Inverse-frequency weights for one class: N/(2*N_pos) on positives,
/// N/(2*N_neg) on negatives.
pub fn balanced_weights(truth: &Raster<bool>) -> Raster<f64> {
    let n = truth.data.len() as f64;
    let pos = truth.data.iter().filter(|&&b| b).count() as f64;
    let neg = n - pos;
    let wp = if pos > 0.0 { n / (2.0 * pos) } else { 0.0 };
    let wn = if neg > 0.0 { n / (2.0 * neg) } else { 0.0 };
    truth.map(|&b| if b { wp } else { wn })
}

/// Emulate an imperfect segmentation net: blur the oracle truth into soft
/// probabilities and add seeded Gaussian noise.
pub fn noisy_probs(truth: &Masks, noise_sigma: f64, seed: u64) -> Masks {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut soften = |mask: &Raster<bool>| {
        let base = mask.map(|&b| if b { 0.95 } else { 0.05 });
        let blurred = crate::perception::raster::gaussian_blur(&base, 1.0);
        let mut out = blurred;
        for v in &mut out.data {
            let noise: f64 = rng.gen_range(-1.0..1.0) * noise_sigma;
            *v = (*v + noise).clamp(0.0, 1.0);
        }
        out
    };
    Masks {
        handle: truth.handle.clone(),
        rim: truth.rim.clone(),
        handle_prob: Some(soften(&truth.handle)),
        rim_prob: Some(soften(&truth.rim)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_weights(w: usize, h: usize) -> Raster<f64> {
        Raster::new(w, h, 1.0)
    }

    #[test]
    fn perfect_prediction_scores_zero_loss() {
        let mut truth = Masks::empty(16, 16);
        for x in 2..8 {
            truth.handle.set(x, 3, true);
            truth.rim.set(x, 9, true);
        }
        let mut pred = truth.clone();
        pred.handle_prob = Some(truth.handle.map(|&b| if b { 1.0 } else { 0.0 }));
        pred.rim_prob = Some(truth.rim.map(|&b| if b { 1.0 } else { 0.0 }));
        let s = score_masks(&pred, &truth, &uniform_weights(16, 16)).unwrap();
        assert!(s.loss <= 1e-5, "loss {}", s.loss);
        assert_eq!(s.miou, 1.0);
        assert_eq!(s.mpa, 1.0);
    }

    #[test]
    fn uniform_half_probability_gives_ln2() {
        // K=1, N=2, t=[1,0], o=[0.5,0.5], w=[1,1] -> ln 2.
        let loss = bce_class(&[0.5, 0.5], &[true, false], &[1.0, 1.0]);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn weighted_two_class_case() {
        // K=2, N=2, t=[1,0] per class, o=[0.5,0.5], w=[2,1] -> 1.5*ln 2.
        let per_class = bce_class(&[0.5, 0.5], &[true, false], &[2.0, 1.0]);
        let loss = (per_class + per_class) / 2.0;
        assert!((loss - 1.5 * std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let truth = Masks::empty(16, 16);
        let pred = Masks::empty(8, 8);
        assert!(score_masks(&pred, &truth, &uniform_weights(16, 16)).is_err());
    }

    #[test]
    fn loss_minimized_at_truth() {
        let truth = vec![true, false, true, true, false];
        let perfect: Vec<f64> = truth.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
        let w = vec![1.0, 2.0, 0.5, 1.0, 3.0];
        let base = bce_class(&perfect, &truth, &w);
        for i in 0..truth.len() {
            for delta in [-0.1, 0.1] {
                let mut perturbed = perfect.clone();
                perturbed[i] = (perturbed[i] + delta).clamp(0.0, 1.0);
                if perturbed[i] == perfect[i] {
                    continue;
                }
                assert!(bce_class(&perturbed, &truth, &w) > base);
            }
        }
    }

    #[test]
    fn weight_scaling_scales_loss() {
        let truth = vec![true, false, true];
        let pred = vec![0.8, 0.3, 0.6];
        let w = vec![1.0, 2.0, 0.5];
        let w3: Vec<f64> = w.iter().map(|x| x * 3.0).collect();
        let a = bce_class(&pred, &truth, &w);
        let b = bce_class(&pred, &truth, &w3);
        assert!((b - 3.0 * a).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.gen_range(2..12);
            let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..3.0)).collect();
            let i = rng.gen_range(0..n);

            // Analytic: dL/do_i = -(w_i/N) * (t_i/o_i - (1-t_i)/(1-o_i)).
            let t = if truth[i] { 1.0 } else { 0.0 };
            let o = pred[i];
            let analytic = -(w[i] / n as f64) * (t / o - (1.0 - t) / (1.0 - o));

            let h = 1e-5;
            let mut up = pred.clone();
            up[i] += h;
            let mut down = pred.clone();
            down[i] -= h;
            let numeric = (bce_class(&up, &truth, &w) - bce_class(&down, &truth, &w)) / (2.0 * h);
            let rel = (numeric - analytic).abs() / analytic.abs().max(1e-12);
            assert!(rel < 1e-4, "gradient mismatch: {numeric} vs {analytic}");
        }
    }

    #[test]
    fn balanced_weights_inverse_frequency() {
        let mut truth = Raster::new(4, 4, false);
        truth.set(0, 0, true);
        truth.set(1, 0, true); // 2 positives of 16
        let w = balanced_weights(&truth);
        assert!((w.get(0, 0) - 16.0 / 4.0).abs() < 1e-12);
        assert!((w.get(3, 3) - 16.0 / 28.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_probs_stay_in_unit_interval() {
        let mut truth = Masks::empty(16, 16);
        for x in 4..10 {
            truth.handle.set(x, 5, true);
        }
        let pred = noisy_probs(&truth, 0.1, 3);
        for v in &pred.handle_prob.unwrap().data {
            assert!((0.0..=1.0).contains(v));
        }
    }
}
