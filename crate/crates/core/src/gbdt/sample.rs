//! Gradient-proportional row sampling.

use rand::Rng as _;

use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    /// Selected rows in ascending order.
    pub rows: Vec<usize>,
    /// Multiplier for the selected rows' gradients and hessians.
    pub scale: f64,
}

/// Draws `ceil(rate * n)` rows without replacement with probability
/// proportional to `|g| + eps` (Efraimidis-Spirakis keys `ln(u) / weight`).
///
/// `scale` is `sum_all(|g| + eps) / sum_selected(|g| + eps)`, exactly 1 when
/// every row is kept. With all weights zero the draw is uniform.
pub fn gradient_sample(g: &[f64], rate: f64, eps: f64, rng: &mut Rng) -> GradientSample {
    let n = g.len();
    let k = ((rate.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(n.min(1), n);
    if k == n {
        return GradientSample {
            rows: (0..n).collect(),
            scale: 1.0,
        };
    }
    let weights: Vec<f64> = g.iter().map(|v| v.abs() + eps.max(0.0)).collect();
    let uniform = weights.iter().all(|&w| w <= 0.0);
    // zero-weight rows rank after every positive-weight row, in random order
    let mut keyed: Vec<(bool, f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            if uniform {
                (true, u, i)
            } else if w > 0.0 {
                (true, u.ln() / w, i)
            } else {
                (false, u, i)
            }
        })
        .collect();
    keyed.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(b.1.total_cmp(&a.1))
            .then(a.2.cmp(&b.2))
    });
    let mut rows: Vec<usize> = keyed[..k].iter().map(|t| t.2).collect();
    rows.sort_unstable();
    let scale = if uniform {
        n as f64 / k as f64
    } else {
        let total: f64 = weights.iter().sum();
        let chosen: f64 = rows.iter().map(|&r| weights[r]).sum();
        if chosen > 0.0 {
            total / chosen
        } else {
            1.0
        }
    };
    GradientSample { rows, scale }
}
