use crate::error::{Error, Result};
use crate::numkit::{Module, Real, Tensor};

/// Gradients smaller than this in magnitude are compared absolutely rather
/// than relatively: below it, f32 round-off in the analytic pass dominates.
pub const ABS_FLOOR: f64 = 1e-5;

/// Upper bound on parameters the checker accepts.
pub const MAX_PARAMS: usize = 10_000;

/// One evaluation of the numeric side: the loss and a fingerprint of the
/// piecewise-linear region (e.g. the ReLU sign pattern) it was evaluated in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub loss: f64,
    pub pattern: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub checked: usize,
    /// Coordinates whose ±step probes crossed a non-differentiable point.
    pub skipped_kinks: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

/// Compares the analytic gradient of `network` against central finite
/// differences evaluated on an `f64` shadow copy.
///
/// `analytic` must run forward and backward on `network` (gradients are
/// zeroed beforehand). `numeric` evaluates the same loss on a perturbed
/// shadow. Both must use the same visiting order of parameters.
pub fn grad_check<N32, N64>(
    network: &mut N32,
    shadow: &N64,
    mut analytic: impl FnMut(&mut N32) -> Result<f64>,
    mut numeric: impl FnMut(&N64) -> Result<Probe>,
    step: f64,
) -> Result<GradCheckReport>
where
    N32: Module<f32>,
    N64: Module<f64> + Clone,
{
    let total = network.num_params();
    if total > MAX_PARAMS {
        return Err(Error::InvalidArgument(format!(
            "grad_check supports at most {MAX_PARAMS} parameters, got {total}"
        )));
    }
    if shadow.num_params() != total {
        return Err(Error::shape("grad_check", total, shadow.num_params()));
    }

    network.zero_grad();
    analytic(network)?;
    let mut grads: Vec<(String, Vec<f64>)> = Vec::new();
    network.visit(&mut |name, _, g| {
        grads.push((name.to_string(), g.data().iter().map(|v| v.to_f64()).collect()))
    });

    let mut probe_net = shadow.clone();
    let base = numeric(&probe_net)?;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        checked: 0,
        skipped_kinks: 0,
    };

    for (t, (name, grad)) in grads.iter().enumerate() {
        for (i, &a) in grad.iter().enumerate() {
            let original = nudge(&mut probe_net, t, i, None);
            nudge(&mut probe_net, t, i, Some(original + step));
            let plus = numeric(&probe_net)?;
            nudge(&mut probe_net, t, i, Some(original - step));
            let minus = numeric(&probe_net)?;
            nudge(&mut probe_net, t, i, Some(original));

            if plus.pattern != base.pattern || minus.pattern != base.pattern {
                report.skipped_kinks += 1;
                continue;
            }
            let n = (plus.loss - minus.loss) / (2.0 * step);
            let err = relative_error(a, n);
            report.checked += 1;
            if err > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst_param = format!("{name}[{i}]");
            }
        }
    }
    Ok(report)
}

/// Reads element `i` of the `t`-th visited tensor, optionally overwriting it.
fn nudge<N: Module<f64>>(net: &mut N, t: usize, i: usize, set: Option<f64>) -> f64 {
    let mut k = 0;
    let mut old = 0.0;
    net.visit_mut(&mut |_, p: &mut Tensor<f64>, _| {
        if k == t {
            old = p.data()[i];
            if let Some(v) = set {
                p.data_mut()[i] = v;
            }
        }
        k += 1;
    });
    old
}

/// Folds the sign pattern of `pre`-activations into `acc`.
pub(crate) fn fold_pattern<T: Real>(acc: u64, pre: &Tensor<T>) -> u64 {
    pre.data().iter().fold(acc, |h, &v| {
        let bit = u64::from(v > T::zero());
        (h ^ bit).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{cross_entropy_loss, relu, relu_backward, Linear};
    use crate::rng::SplitMix64;

    #[test]
    fn linear_cross_entropy_passes() {
        let mut rng = SplitMix64::new(11);
        let mut net: Linear = Linear::init(6, 4, &mut rng);
        let x = Tensor::from_vec(&[3, 6], (0..18).map(|i| ((i * 7) % 5) as f32 * 0.3 - 0.6).collect())
            .unwrap();
        let labels = [0usize, 3, 1];
        let shadow = net.cast::<f64>();
        let x64 = x.cast::<f64>();
        let report = grad_check(
            &mut net,
            &shadow,
            |n| {
                let y = n.forward(&x)?;
                let (loss, g) = cross_entropy_loss(&y, &labels)?;
                n.backward(&x, &g)?;
                Ok(loss)
            },
            |n| {
                let (loss, _) = cross_entropy_loss(&n.forward(&x64)?, &labels)?;
                Ok(Probe { loss, pattern: 0 })
            },
            1e-3,
        )
        .unwrap();
        assert_eq!(report.checked, 28);
        assert!(report.max_rel_error <= 1e-3, "{report:?}");
    }

    #[test]
    fn relu_layer_passes_away_from_kinks() {
        let mut rng = SplitMix64::new(12);
        let mut net: Linear = Linear::init(5, 7, &mut rng);
        let x = Tensor::from_vec(&[2, 5], (0..10).map(|i| (i as f32 * 0.77).sin()).collect()).unwrap();
        let shadow = net.cast::<f64>();
        let x64 = x.cast::<f64>();
        let report = grad_check(
            &mut net,
            &shadow,
            |n| {
                let pre = n.forward(&x)?;
                let h = relu(&pre);
                let loss: f64 = h.data().iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / 2.0;
                let g = relu_backward(&pre, &h)?;
                n.backward(&x, &g)?;
                Ok(loss)
            },
            |n| {
                let pre = n.forward(&x64)?;
                let h = relu(&pre);
                Ok(Probe {
                    loss: h.data().iter().map(|v| v * v).sum::<f64>() / 2.0,
                    pattern: fold_pattern(0, &pre),
                })
            },
            1e-3,
        )
        .unwrap();
        assert!(report.max_rel_error <= 1e-3, "{report:?}");
    }

    #[test]
    fn zero_network_zero_gradients() {
        let mut net: Linear = Linear::zeros(3, 2);
        let x = Tensor::<f32>::zeros(&[1, 3]);
        let shadow = net.cast::<f64>();
        let x64 = x.cast::<f64>();
        let report = grad_check(
            &mut net,
            &shadow,
            |n| {
                let y = n.forward(&x)?;
                let loss = y.data().iter().map(|&v| v as f64).sum::<f64>().powi(2);
                n.backward(&x, &Tensor::zeros(&[1, 2]))?;
                Ok(loss)
            },
            |n| {
                let y = n.forward(&x64)?;
                Ok(Probe {
                    loss: y.data().iter().sum::<f64>().powi(2),
                    pattern: 0,
                })
            },
            1e-3,
        )
        .unwrap();
        assert!(net.grad_weight.data().iter().all(|&g| g == 0.0));
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }
}
