use ndarray::Array1;

use crate::corpus::PAD;
use crate::error::{Error, Result};
use crate::model::{log_softmax, softmax};

/// Loss of one token and its unscaled gradient with respect to the logits.
///
/// The target distribution mixes the one-hot target with a uniform
/// distribution over every non-pad entry: `q = (1 − ε)·onehot + ε·uniform`.
pub fn token_loss(logits: &Array1<f64>, target: usize, smoothing: f64) -> (f64, Array1<f64>) {
    let logp = log_softmax(logits.view());
    let mut grad = softmax(logits.view());
    if smoothing == 0.0 {
        grad[target] -= 1.0;
        return (-logp[target], grad);
    }
    let v = logits.len();
    let spread = smoothing / (v - 1) as f64;
    let mut loss = 0.0;
    for (k, (&lp, g)) in logp.iter().zip(grad.iter_mut()).enumerate() {
        let q = if k == PAD { 0.0 } else { spread } + if k == target { 1.0 - smoothing } else { 0.0 };
        loss -= q * lp;
        *g -= q;
    }
    (loss, grad)
}

/// Mean smoothed cross-entropy over the unmasked steps of a sequence, with
/// gradients already divided by the number of counted tokens.
pub fn cross_entropy(
    logits: &[Array1<f64>],
    targets: &[usize],
    mask: &[bool],
    smoothing: f64,
) -> Result<(f64, Vec<Array1<f64>>)> {
    if !(0.0..1.0).contains(&smoothing) {
        return Err(Error::Config("label smoothing must be in [0, 1)".into()));
    }
    if logits.len() != targets.len() || targets.len() != mask.len() {
        return Err(Error::Usage("logits, targets and mask must have equal length"));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::EmptyInput("every token is masked"));
    }
    let scale = 1.0 / count as f64;
    let mut total = 0.0;
    let grads = logits
        .iter()
        .zip(targets)
        .zip(mask)
        .map(|((l, &t), &m)| {
            if !m {
                return Array1::zeros(l.len());
            }
            let (loss, g) = token_loss(l, t, smoothing);
            total += loss;
            g * scale
        })
        .collect();
    Ok((total * scale, grads))
}

/// `λ·Σ_j (1 − Σ_t α_{t,j})²` and its gradient with respect to every α_{t,j}.
pub fn coverage_regularizer(attention: &[Array1<f64>], lambda: f64) -> (f64, Vec<Array1<f64>>) {
    let Some(first) = attention.first() else {
        return (0.0, Vec::new());
    };
    let mut mass = Array1::<f64>::zeros(first.len());
    for a in attention {
        mass += a;
    }
    let deficit = mass.mapv(|m| 1.0 - m);
    let penalty = lambda * deficit.iter().map(|d| d * d).sum::<f64>();
    let grad = deficit.mapv(|d| -2.0 * lambda * d);
    (penalty, vec![grad; attention.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_logits_cost_log_v() {
        let logits = vec![Array1::zeros(8); 3];
        let (loss, _) = cross_entropy(&logits, &[4, 5, 3], &[true; 3], 0.0).unwrap();
        assert_abs_diff_eq!(loss, 8f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn zero_smoothing_is_plain_cross_entropy_bitwise() {
        let l = Array1::from(vec![0.3, -1.2, 2.0, 0.7, -0.4]);
        let (loss, _) = token_loss(&l, 2, 0.0);
        assert_eq!(loss, -log_softmax(l.view())[2]);
    }

    #[test]
    fn smoothing_is_mixture_of_two_losses() {
        let l = Array1::from(vec![0.3, -1.2, 2.0, 0.7, -0.4, 1.1]);
        let (smoothed, _) = token_loss(&l, 2, 0.1);
        // two-pass recomputation: hard target and uniform-over-non-pad target
        let lp = log_softmax(l.view());
        let ce = -lp[2];
        let uniform = -(1..6).map(|k| lp[k]).sum::<f64>() / 5.0;
        assert_abs_diff_eq!(smoothed, 0.9 * ce + 0.1 * uniform, epsilon = 1e-12);
    }

    #[test]
    fn smoothed_gradient_matches_finite_differences() {
        let l = Array1::from(vec![0.3, -1.2, 2.0, 0.7, -0.4, 1.1]);
        let (_, g) = token_loss(&l, 4, 0.2);
        for k in 0..l.len() {
            let (mut a, mut b) = (l.clone(), l.clone());
            a[k] += 1e-6;
            b[k] -= 1e-6;
            let fd = (token_loss(&a, 4, 0.2).0 - token_loss(&b, 4, 0.2).0) / 2e-6;
            assert_abs_diff_eq!(fd, g[k], epsilon = 1e-8);
        }
    }

    #[test]
    fn masking() {
        let logits = vec![Array1::zeros(4); 2];
        assert!(matches!(
            cross_entropy(&logits, &[1, 2], &[false, false], 0.0),
            Err(Error::EmptyInput(_))
        ));
        let (_, g) = cross_entropy(&logits, &[1, 2], &[true, false], 0.0).unwrap();
        assert!(g[1].iter().all(|&v| v == 0.0));
        assert!(cross_entropy(&logits, &[1, 2], &[true, true], 1.0).is_err());
    }

    #[test]
    fn coverage_examples() {
        let a = vec![Array1::from(vec![1.0, 0.0])];
        assert_eq!(coverage_regularizer(&a, 0.0).0, 0.0);
        assert_eq!(coverage_regularizer(&a, 0.7).0, 0.7);
        let full = vec![Array1::from(vec![0.5, 0.5]), Array1::from(vec![0.5, 0.5])];
        assert_eq!(coverage_regularizer(&full, 3.0).0, 0.0);
    }
}
