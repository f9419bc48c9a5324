//! Ordinal and multi-task losses.

use std::collections::BTreeMap;

use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::model::{BatchOutput, HeadKind, TaskKind};
use crate::ordinal::{encode_ordinal, DifficultyLevel, OrdinalVector};

/// Mean squared error between an activation vector and the ordinal encoding.
pub fn ordinal_mse_loss(pred: &[f32], target: &OrdinalVector) -> Result<f64> {
    let t = target.as_f32();
    if pred.len() != t.len() {
        return Err(Error::Domain(format!(
            "prediction has {} values, target {}",
            pred.len(),
            t.len()
        )));
    }
    let sum: f64 = pred
        .iter()
        .zip(&t)
        .map(|(&p, &l)| {
            let d = p as f64 - l as f64;
            d * d
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Tensor form of the ordinal loss, differentiable through `pred`. Both
/// tensors are (batch, classes) or (classes,).
pub fn ordinal_mse_loss_t(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    if pred.dims() != target.dims() {
        return Err(Error::Domain(format!(
            "prediction shape {:?} vs target shape {:?}",
            pred.dims(),
            target.dims()
        )));
    }
    Ok((pred - target)?.sqr()?.mean_all()?)
}

/// Per-piece labels, keyed by task. Ordinal tasks carry 1-based levels, the
/// categorical composer task a 0-based class index. Absent keys are treated
/// as missing labels and masked out of the loss.
pub type TaskLabels = BTreeMap<TaskKind, u32>;

/// Weighted sum of per-head losses over a batch. Heads without a weight
/// default to 1.0; a weight naming a task the model has no head for is a
/// configuration error. Samples missing a task's label contribute nothing to
/// that head's loss.
pub fn multitask_loss(
    output: &BatchOutput,
    targets: &[TaskLabels],
    weights: &BTreeMap<TaskKind, f64>,
) -> Result<Tensor> {
    for task in weights.keys() {
        if !output.heads.iter().any(|(spec, _)| &spec.task == task) {
            return Err(Error::Config(format!(
                "loss weight given for task {} but the model has no such head",
                task.name()
            )));
        }
    }
    let device = output.summary.device();
    let mut total = Tensor::zeros((), candle_core::DType::F32, device)?;
    for (spec, act) in &output.heads {
        let weight = weights.get(&spec.task).copied().unwrap_or(1.0);
        if weight == 0.0 {
            continue;
        }
        let (batch, classes) = act.dims2()?;
        if targets.len() != batch {
            return Err(Error::Domain(format!(
                "{} targets for a batch of {batch}",
                targets.len()
            )));
        }
        let mut rows: Vec<u32> = Vec::new();
        let mut labels: Vec<u32> = Vec::new();
        for (i, t) in targets.iter().enumerate() {
            if let Some(&label) = t.get(&spec.task) {
                rows.push(i as u32);
                labels.push(label);
            }
        }
        if rows.is_empty() {
            continue;
        }
        let idx = Tensor::from_vec(rows, labels.len(), device)?;
        let present = act.index_select(&idx, 0)?;
        let head_loss = match spec.kind {
            HeadKind::Ordinal => {
                let mut enc = Vec::with_capacity(labels.len() * classes);
                for &label in &labels {
                    let level = DifficultyLevel::new(label, classes)?;
                    enc.extend(encode_ordinal(level, classes)?.as_f32());
                }
                let target = Tensor::from_vec(enc, (labels.len(), classes), device)?;
                ordinal_mse_loss_t(&present, &target)?
            }
            HeadKind::Categorical => {
                // `present` holds log-probabilities; NLL of the true class.
                let mut onehot = vec![0f32; labels.len() * classes];
                for (i, &label) in labels.iter().enumerate() {
                    if label as usize >= classes {
                        return Err(Error::Domain(format!(
                            "class index {label} out of range for {} classes",
                            classes
                        )));
                    }
                    onehot[i * classes + label as usize] = 1.0;
                }
                let oh = Tensor::from_vec(onehot, (labels.len(), classes), device)?;
                (present * oh)?.sum_all()?.affine(-1.0 / labels.len() as f64, 0.0)?
            }
        };
        total = (total + head_loss.affine(weight, 0.0)?)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureTensor, Modality, NUM_BINS};
    use crate::model::{DifficultyModel, HeadSpec, ModelConfig};
    use crate::ordinal::encode_ordinal;
    use candle_core::Var;
    use ndarray::Array3;

    #[test]
    fn exact_prediction_is_zero() {
        let target = encode_ordinal(DifficultyLevel::new(4, 11).unwrap(), 11).unwrap();
        assert_eq!(ordinal_mse_loss(&target.as_f32(), &target).unwrap(), 0.0);
    }

    #[test]
    fn uniform_half_prediction_is_quarter() {
        let target = encode_ordinal(DifficultyLevel::new(3, 11).unwrap(), 11).unwrap();
        let pred = vec![0.5f32; 11];
        assert!((ordinal_mse_loss(&pred, &target).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn small_errors_average() {
        let target = encode_ordinal(DifficultyLevel::new(1, 2).unwrap(), 2).unwrap();
        let loss = ordinal_mse_loss(&[0.9, 0.1], &target).unwrap();
        assert!((loss - 0.01).abs() < 1e-7);
    }

    #[test]
    fn length_mismatch_rejected() {
        let target = encode_ordinal(DifficultyLevel::new(1, 5).unwrap(), 5).unwrap();
        assert!(ordinal_mse_loss(&[0.5; 4], &target).is_err());
    }

    #[test]
    fn tensor_loss_matches_scalar_loss() {
        let target = encode_ordinal(DifficultyLevel::new(6, 11).unwrap(), 11).unwrap();
        let pred: Vec<f32> = (0..11).map(|i| i as f32 / 11.0).collect();
        let scalar = ordinal_mse_loss(&pred, &target).unwrap();
        let dev = candle_core::Device::Cpu;
        let p = Tensor::from_vec(pred, 11, &dev).unwrap();
        let t = Tensor::from_vec(target.as_f32(), 11, &dev).unwrap();
        let tensor = ordinal_mse_loss_t(&p, &t).unwrap().to_scalar::<f32>().unwrap();
        assert!((tensor as f64 - scalar).abs() < 1e-6);
    }

    /// Gradient of the tensor loss vs central finite differences of the
    /// scalar form.
    #[test]
    fn loss_gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let dev = candle_core::Device::Cpu;
        for _ in 0..10 {
            let c = rng.gen_range(2usize..12);
            let level = DifficultyLevel::new(rng.gen_range(1..=c as u32), c).unwrap();
            let target = encode_ordinal(level, c).unwrap();
            let pred: Vec<f32> = (0..c).map(|_| rng.gen_range(0.0..1.0)).collect();
            let var = Var::from_vec(pred.clone(), c, &dev).unwrap();
            let t = Tensor::from_vec(target.as_f32(), c, &dev).unwrap();
            let loss = ordinal_mse_loss_t(var.as_tensor(), &t).unwrap();
            let grads = loss.backward().unwrap();
            let grad = grads.get(var.as_tensor()).unwrap().to_vec1::<f32>().unwrap();
            let h = 1e-3f32;
            for j in 0..c {
                let mut plus = pred.clone();
                let mut minus = pred.clone();
                plus[j] += h;
                minus[j] -= h;
                let fd = (ordinal_mse_loss(&plus, &target).unwrap()
                    - ordinal_mse_loss(&minus, &target).unwrap())
                    / (2.0 * h as f64);
                let rel = (grad[j] as f64 - fd).abs() / fd.abs().max(1e-8);
                assert!(rel < 1e-3, "component {j}: {} vs {fd}", grad[j]);
            }
        }
    }

    fn tiny_model(heads: Vec<HeadSpec>) -> DifficultyModel {
        let mut config = ModelConfig::difficulty(Modality::PianoRoll);
        config.heads = heads;
        DifficultyModel::new(config, 5).unwrap()
    }

    fn tiny_input() -> FeatureTensor {
        let data = Array3::from_shape_fn((NUM_BINS, 16, 2), |(b, t, c)| {
            ((b + 2 * t + c) % 2) as f32
        });
        FeatureTensor::new(data, 5.0, Modality::PianoRoll).unwrap()
    }

    #[test]
    fn single_task_equals_ordinal_loss() {
        let model = tiny_model(vec![HeadSpec::difficulty()]);
        let x = tiny_input();
        let out = model.forward_batch(&[&x], None).unwrap();
        let targets = vec![BTreeMap::from([(TaskKind::Difficulty, 4u32)])];
        let multi = multitask_loss(&out, &targets, &BTreeMap::new())
            .unwrap()
            .to_scalar::<f32>()
            .unwrap();
        let pred = out.heads[0].1.narrow(0, 0, 1).unwrap().reshape(11).unwrap();
        let target = encode_ordinal(DifficultyLevel::new(4, 11).unwrap(), 11).unwrap();
        let single = ordinal_mse_loss(&pred.to_vec1::<f32>().unwrap(), &target).unwrap();
        assert!((multi as f64 - single).abs() < 1e-6);
    }

    #[test]
    fn missing_labels_are_masked() {
        let model = tiny_model(vec![HeadSpec::difficulty(), HeadSpec::era()]);
        let x = tiny_input();
        let out = model.forward_batch(&[&x], None).unwrap();
        let with_era = vec![BTreeMap::from([
            (TaskKind::Difficulty, 4u32),
            (TaskKind::Era, 2u32),
        ])];
        let without = vec![BTreeMap::from([(TaskKind::Difficulty, 4u32)])];
        let only_difficulty =
            vec![BTreeMap::from([(TaskKind::Difficulty, 4u32)])];
        let masked = multitask_loss(&out, &without, &BTreeMap::new()).unwrap();
        let era_zero = multitask_loss(
            &out,
            &only_difficulty,
            &BTreeMap::from([(TaskKind::Era, 0.0)]),
        )
        .unwrap();
        // Masked era equals era weighted to zero, and differs from full loss.
        assert_eq!(
            masked.to_scalar::<f32>().unwrap(),
            era_zero.to_scalar::<f32>().unwrap()
        );
        let full = multitask_loss(&out, &with_era, &BTreeMap::new()).unwrap();
        assert!(full.to_scalar::<f32>().unwrap() > masked.to_scalar::<f32>().unwrap());
    }

    #[test]
    fn weights_scale_linearly() {
        let model = tiny_model(vec![HeadSpec::difficulty(), HeadSpec::era()]);
        let x = tiny_input();
        let out = model.forward_batch(&[&x], None).unwrap();
        let targets = vec![BTreeMap::from([
            (TaskKind::Difficulty, 4u32),
            (TaskKind::Era, 2u32),
        ])];
        let l = |wd: f64, we: f64| {
            multitask_loss(
                &out,
                &targets,
                &BTreeMap::from([(TaskKind::Difficulty, wd), (TaskKind::Era, we)]),
            )
            .unwrap()
            .to_scalar::<f32>()
            .unwrap() as f64
        };
        let d = l(1.0, 0.0);
        let e = l(0.0, 1.0);
        assert!((l(1.0, 0.5) - (d + 0.5 * e)).abs() < 1e-6);
    }

    #[test]
    fn unknown_task_weight_is_config_error() {
        let model = tiny_model(vec![HeadSpec::difficulty()]);
        let x = tiny_input();
        let out = model.forward_batch(&[&x], None).unwrap();
        let targets = vec![BTreeMap::from([(TaskKind::Difficulty, 4u32)])];
        let weights = BTreeMap::from([(TaskKind::Era, 1.0)]);
        assert!(multitask_loss(&out, &targets, &weights).is_err());
    }
}
