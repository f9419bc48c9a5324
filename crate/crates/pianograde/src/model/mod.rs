//! The difficulty estimator: residual convolutions over the time-frequency
//! input, a bidirectional recurrence, a multi-head context-attention summary,
//! and one output head per task.

mod checkpoint;
mod layers;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use candle_core::{Tensor, Var};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureTensor, Modality, NUM_BINS};
use crate::manifest::ERA_CLASSES;
use crate::ordinal::PSYLLABUS_LEVELS;
use layers::{dropout, BatchNorm, BiGru, ContextAttention, Conv2d, Linear, ParamBuilder, ParamEntry};

/// What a head predicts. Auxiliary rank heads are keyed by board name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Difficulty,
    Era,
    Composer,
    AuxRank(String),
}

impl TaskKind {
    pub fn name(&self) -> String {
        match self {
            TaskKind::Difficulty => "difficulty".into(),
            TaskKind::Era => "era".into(),
            TaskKind::Composer => "composer".into(),
            TaskKind::AuxRank(board) => format!("aux_rank:{board}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Ordinal,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub task: TaskKind,
    pub kind: HeadKind,
    pub num_classes: usize,
}

impl HeadSpec {
    pub fn difficulty() -> Self {
        HeadSpec {
            task: TaskKind::Difficulty,
            kind: HeadKind::Ordinal,
            num_classes: PSYLLABUS_LEVELS,
        }
    }

    pub fn era() -> Self {
        HeadSpec {
            task: TaskKind::Era,
            kind: HeadKind::Ordinal,
            num_classes: ERA_CLASSES,
        }
    }

    pub fn composer(num_composers: usize) -> Self {
        HeadSpec {
            task: TaskKind::Composer,
            kind: HeadKind::Categorical,
            num_classes: num_composers,
        }
    }

    pub fn aux_rank(board: &str, num_grades: usize) -> Self {
        HeadSpec {
            task: TaskKind::AuxRank(board.to_string()),
            kind: HeadKind::Ordinal,
            num_classes: num_grades,
        }
    }

    fn validate(&self) -> Result<()> {
        let expected = match self.task {
            TaskKind::Composer => HeadKind::Categorical,
            _ => HeadKind::Ordinal,
        };
        if self.kind != expected {
            return Err(Error::Config(format!(
                "task {} must use the {:?} head kind",
                self.task.name(),
                expected
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "head {} needs at least 2 classes",
                self.task.name()
            )));
        }
        Ok(())
    }
}

/// How the multimodal variant is wired: one trunk over the 3-channel stack,
/// or one conv branch per modality with features concatenated (width 512)
/// before the recurrence. Branch is the default; it is the only wiring that
/// yields the documented 512-wide recurrent input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MultimodalWiring {
    Trunk,
    #[default]
    Branch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub modality: Modality,
    #[serde(default)]
    pub mm_wiring: MultimodalWiring,
    pub conv_channels: Vec<usize>,
    pub recurrent_hidden: usize,
    pub recurrent_layers: usize,
    pub attention_heads: usize,
    /// Similarity used by the attention scores; recorded for provenance.
    #[serde(default = "default_kernel")]
    pub attention_kernel: String,
    pub classifier_hidden: usize,
    pub heads: Vec<HeadSpec>,
    pub dropout_rate: f64,
}

fn default_kernel() -> String {
    "dot-product".to_string()
}

impl ModelConfig {
    /// The standard single-task difficulty configuration for a modality.
    pub fn difficulty(modality: Modality) -> Self {
        ModelConfig {
            modality,
            mm_wiring: MultimodalWiring::Branch,
            conv_channels: vec![64, 128, 256],
            recurrent_hidden: 128,
            recurrent_layers: 2,
            attention_heads: 4,
            attention_kernel: default_kernel(),
            classifier_hidden: 256,
            heads: vec![HeadSpec::difficulty()],
            dropout_rate: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads.is_empty() {
            return Err(Error::Config("at least one head is required".into()));
        }
        if !self.conv_channels.windows(2).all(|w| w[0] < w[1]) || self.conv_channels.is_empty() {
            return Err(Error::Config(format!(
                "conv channels must be strictly increasing, got {:?}",
                self.conv_channels
            )));
        }
        for h in &self.heads {
            h.validate()?;
        }
        let m = 2 * self.recurrent_hidden;
        if self.attention_heads == 0 || m % self.attention_heads != 0 {
            return Err(Error::Config(format!(
                "attention heads ({}) must divide the sequence width ({m})",
                self.attention_heads
            )));
        }
        if self.recurrent_layers == 0 || self.recurrent_hidden == 0 {
            return Err(Error::Config("recurrence needs layers and width".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    fn head_index(&self, task: &TaskKind) -> Result<usize> {
        self.heads
            .iter()
            .position(|h| &h.task == task)
            .ok_or_else(|| Error::Config(format!("model has no {} head", task.name())))
    }
}

/// The minimum input length in frames: one frame must survive all temporal
/// poolings of the conv stage.
pub fn min_input_frames(num_blocks: usize) -> usize {
    1 << num_blocks
}

struct ResBlock {
    conv1: Conv2d,
    bn1: BatchNorm,
    conv2: Conv2d,
    bn2: BatchNorm,
    shortcut: Option<Conv2d>,
}

impl ResBlock {
    fn new(pb: &mut ParamBuilder, name: &str, in_ch: usize, out_ch: usize) -> Result<Self> {
        Ok(ResBlock {
            conv1: Conv2d::new(pb, &format!("{name}.conv1"), in_ch, out_ch, 3, 1)?,
            bn1: BatchNorm::new(pb, &format!("{name}.bn1"), out_ch)?,
            conv2: Conv2d::new(pb, &format!("{name}.conv2"), out_ch, out_ch, 3, 1)?,
            bn2: BatchNorm::new(pb, &format!("{name}.bn2"), out_ch)?,
            shortcut: if in_ch == out_ch {
                None
            } else {
                Some(Conv2d::new(pb, &format!("{name}.shortcut"), in_ch, out_ch, 1, 0)?)
            },
        })
    }

    /// `mask` is (batch, 1, 1, t) over valid frames, or `None` when every
    /// sample fills the tensor. Intermediate activations are re-zeroed on
    /// padding so the convolutions see the same implicit zero boundary a
    /// lone unpadded piece would.
    fn forward(&self, x: &Tensor, mask: Option<&Tensor>, train: bool) -> Result<Tensor> {
        let y = self.bn1.forward(&self.conv1.forward(x)?, train)?.relu()?;
        let y = match mask {
            Some(m) => y.broadcast_mul(m)?,
            None => y,
        };
        let y = self.bn2.forward(&self.conv2.forward(&y)?, train)?;
        let skip = match &self.shortcut {
            Some(proj) => proj.forward(x)?,
            None => x.clone(),
        };
        let y = ((y + skip)?).relu()?;
        Ok(match mask {
            Some(m) => y.broadcast_mul(m)?,
            None => y,
        })
    }
}

/// One conv stack: residual blocks, each followed by 2×2 max-pooling and
/// dropout, then a per-frame projection to the recurrent input width.
struct ConvBranch {
    blocks: Vec<ResBlock>,
    proj: Linear,
    out_width: usize,
}

impl ConvBranch {
    fn new(
        pb: &mut ParamBuilder,
        name: &str,
        in_ch: usize,
        channels: &[usize],
        proj_out: usize,
    ) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut prev = in_ch;
        for (i, &ch) in channels.iter().enumerate() {
            blocks.push(ResBlock::new(pb, &format!("{name}.block{i}"), prev, ch)?);
            prev = ch;
        }
        let freq_out = NUM_BINS >> channels.len();
        let flat = freq_out * prev;
        Ok(ConvBranch {
            blocks,
            proj: Linear::new(pb, &format!("{name}.proj"), flat, proj_out)?,
            out_width: proj_out,
        })
    }

    /// (batch, ch, bins, t) → (batch, t′, out_width), t′ = t / 2^blocks.
    /// `lens` gives each sample's valid frame count at the input rate.
    fn forward(
        &self,
        x: &Tensor,
        lens: &[usize],
        mut rng: Option<&mut ChaCha8Rng>,
        rate: f64,
    ) -> Result<Tensor> {
        let time_mask = |lens: &[usize], t: usize, dev: &candle_core::Device| -> Result<Tensor> {
            let mut m = vec![0f32; lens.len() * t];
            for (i, &l) in lens.iter().enumerate() {
                m[i * t..i * t + l.min(t)].fill(1.0);
            }
            Ok(Tensor::from_vec(m, (lens.len(), 1, 1, t), dev)?)
        };
        let mut y = x.clone();
        let mut lens = lens.to_vec();
        for block in &self.blocks {
            let t = y.dims4()?.3;
            // An all-ones mask is the identity; skip it for uniform batches.
            let mask = if lens.iter().all(|&l| l >= t) {
                None
            } else {
                Some(time_mask(&lens, t, y.device())?)
            };
            y = block.forward(&y, mask.as_ref(), rng.is_some())?;
            y = y.max_pool2d(2)?;
            lens.iter_mut().for_each(|l| *l /= 2);
            let t = y.dims4()?.3;
            if !lens.iter().all(|&l| l >= t) {
                y = y.broadcast_mul(&time_mask(&lens, t, y.device())?)?;
            }
            if let Some(r) = rng.as_deref_mut() {
                y = dropout(&y, rate, r)?;
            }
        }
        let (b, c, f, t) = y.dims4()?;
        let seq = y.permute((0, 3, 1, 2))?.reshape((b, t, c * f))?;
        self.proj.forward(&seq)
    }
}

/// Per-head activations and the attention summary for one piece.
#[derive(Debug, Clone)]
pub struct ModelOutput {
    pub activations: Vec<(TaskKind, Vec<f32>)>,
    /// The fixed-size sequence summary the classifier consumes.
    pub summary: Vec<f32>,
    /// Per attention head, the weights over time (each sums to 1).
    pub attention_weights: Vec<Vec<f32>>,
}

impl ModelOutput {
    pub fn head_activations(&self, task: &TaskKind) -> Result<Vec<f32>> {
        self.activations
            .iter()
            .find(|(t, _)| t == task)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::Config(format!("model has no {} head", task.name())))
    }
}

/// Batched forward results kept as tensors so the training loss can
/// backpropagate through them.
pub struct BatchOutput {
    /// Per head: activations of shape (batch, num_classes). Ordinal heads are
    /// logistic-squashed; the categorical head holds log-probabilities.
    pub heads: Vec<(HeadSpec, Tensor)>,
    pub summary: Tensor,
    pub attention: Tensor, // (batch, heads, t′)
    /// Valid sequence length per batch element after pooling.
    pub seq_lens: Vec<usize>,
}

pub struct DifficultyModel {
    config: ModelConfig,
    branches: Vec<ConvBranch>,
    gru: BiGru,
    attention: ContextAttention,
    hidden: Linear,
    head_layers: Vec<Linear>,
    params: Vec<ParamEntry>,
}

impl DifficultyModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut pb = ParamBuilder::new(seed);
        // MM-branch runs one conv stack per modality and concatenates; every
        // other variant is a single stack over all input channels.
        let branch_inputs: Vec<usize> = match (config.modality, config.mm_wiring) {
            (Modality::Multimodal, MultimodalWiring::Branch) => vec![1, 2],
            (m, _) => vec![m.channels()],
        };
        let mut branches = Vec::new();
        for (i, &in_ch) in branch_inputs.iter().enumerate() {
            branches.push(ConvBranch::new(
                &mut pb,
                &format!("branch{i}"),
                in_ch,
                &config.conv_channels,
                256,
            )?);
        }
        let rec_in: usize = branches.iter().map(|b| b.out_width).sum();
        let m = 2 * config.recurrent_hidden;
        let gru = BiGru::new(&mut pb, "gru", rec_in, config.recurrent_hidden, config.recurrent_layers)?;
        let attention = ContextAttention::new(&mut pb, "attention", m, config.attention_heads)?;
        let hidden = Linear::new(&mut pb, "classifier.hidden", m, config.classifier_hidden)?;
        let mut head_layers = Vec::new();
        for spec in &config.heads {
            head_layers.push(Linear::new(
                &mut pb,
                &format!("head.{}", spec.task.name()),
                config.classifier_hidden,
                spec.num_classes,
            )?);
        }
        Ok(DifficultyModel {
            config,
            branches,
            gru,
            attention,
            hidden,
            head_layers,
            params: pb.into_entries(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Trainable parameters, in creation order.
    pub fn trainable_vars(&self) -> Vec<&Var> {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| &p.var)
            .collect()
    }

    pub(crate) fn named_params(&self) -> &[ParamEntry] {
        &self.params
    }

    fn check_input(&self, x: &FeatureTensor) -> Result<()> {
        let (_, t, c) = x.data.dim();
        let want = self.config.modality.channels();
        if c != want {
            return Err(Error::Domain(format!(
                "model expects {want} channel(s) for {}, input has {c}",
                self.config.modality.name()
            )));
        }
        let min_t = min_input_frames(self.config.conv_channels.len());
        if t < min_t {
            return Err(Error::Shape(format!(
                "input of {t} frames is too short: no frame survives the conv \
                 stage poolings; the minimum admissible length is {min_t} frames"
            )));
        }
        Ok(())
    }

    /// Forward over a zero-padded batch. `rng` enables training mode
    /// (dropout + batch statistics); pass `None` for inference.
    pub fn forward_batch(
        &self,
        xs: &[&FeatureTensor],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<BatchOutput> {
        if xs.is_empty() {
            return Err(Error::Domain("empty batch".into()));
        }
        for x in xs {
            self.check_input(x)?;
        }
        let pool = 1 << self.config.conv_channels.len();
        let t_max = xs.iter().map(|x| x.data.dim().1).max().unwrap();
        let channels = self.config.modality.channels();
        let device = candle_core::Device::Cpu;

        // Pad every piece to the batch max; layout (batch, ch, bins, time).
        let mut data = vec![0f32; xs.len() * channels * NUM_BINS * t_max];
        for (i, x) in xs.iter().enumerate() {
            let (bins, t, _) = x.data.dim();
            for c in 0..channels {
                for bin in 0..bins {
                    for frame in 0..t {
                        data[((i * channels + c) * NUM_BINS + bin) * t_max + frame] =
                            x.data[[bin, frame, c]];
                    }
                }
            }
        }
        let input = Tensor::from_vec(data, (xs.len(), channels, NUM_BINS, t_max), &device)?;

        let input_lens: Vec<usize> = xs.iter().map(|x| x.data.dim().1).collect();
        let seq_lens: Vec<usize> = input_lens.iter().map(|&t| t / pool).collect();
        let t_out = t_max / pool;
        let mut mask_data = vec![0f32; xs.len() * t_out];
        for (i, &len) in seq_lens.iter().enumerate() {
            mask_data[i * t_out..i * t_out + len].fill(1.0);
        }
        let mask = Tensor::from_vec(mask_data, (xs.len(), t_out, 1), &device)?;

        let mut seqs = Vec::new();
        for (i, branch) in self.branches.iter().enumerate() {
            let x = if self.branches.len() == 1 {
                input.clone()
            } else {
                // MM-branch: channel 0 is the spectral input, 1..3 the roll.
                let (start, len) = if i == 0 { (0, 1) } else { (1, 2) };
                input.narrow(1, start, len)?
            };
            seqs.push(branch.forward(&x, &input_lens, rng.as_deref_mut(), self.config.dropout_rate)?);
        }
        let seq = if seqs.len() == 1 {
            seqs.pop().unwrap()
        } else {
            Tensor::cat(&seqs, 2)?
        };

        let z = self.gru.forward(&seq, &mask)?;
        let (summary, attention) = self.attention.forward(&z, &mask)?;
        let mut hidden = self.hidden.forward(&summary)?.relu()?;
        if let Some(r) = rng.as_deref_mut() {
            hidden = dropout(&hidden, self.config.dropout_rate, r)?;
        }

        let mut heads = Vec::new();
        for (spec, layer) in self.config.heads.iter().zip(&self.head_layers) {
            let logits = layer.forward(&hidden)?;
            let act = match spec.kind {
                HeadKind::Ordinal => candle_nn::ops::sigmoid(&logits)?,
                HeadKind::Categorical => candle_nn::ops::log_softmax(&logits, 1)?,
            };
            heads.push((spec.clone(), act));
        }
        Ok(BatchOutput {
            heads,
            summary,
            attention,
            seq_lens,
        })
    }

    /// Inference on a single piece.
    pub fn forward(&self, x: &FeatureTensor) -> Result<ModelOutput> {
        let batch = self.forward_batch(&[x], None)?;
        let mut activations = Vec::new();
        for (spec, act) in &batch.heads {
            let row = act.narrow(0, 0, 1)?.reshape(spec.num_classes)?;
            let v = match spec.kind {
                HeadKind::Ordinal => row.to_vec1::<f32>()?,
                // Expose probabilities, not log-probabilities.
                HeadKind::Categorical => row.exp()?.to_vec1::<f32>()?,
            };
            activations.push((spec.task.clone(), v));
        }
        let summary = batch.summary.reshape(batch.summary.elem_count())?.to_vec1::<f32>()?;
        let t = batch.seq_lens[0];
        let attn = batch.attention.to_vec3::<f32>()?;
        let attention_weights = attn[0].iter().map(|row| row[..t].to_vec()).collect();
        Ok(ModelOutput {
            activations,
            summary,
            attention_weights,
        })
    }

    pub fn head_index(&self, task: &TaskKind) -> Result<usize> {
        self.config.head_index(task)
    }
}

/// Decision-level fusion: the elementwise mean of two activation vectors.
pub fn ensemble_average(y_cqt: &[f32], y_pr: &[f32]) -> Result<Vec<f32>> {
    if y_cqt.len() != y_pr.len() || y_cqt.is_empty() {
        return Err(Error::Domain(format!(
            "activation lengths differ: {} vs {}",
            y_cqt.len(),
            y_pr.len()
        )));
    }
    Ok(y_cqt
        .iter()
        .zip(y_pr)
        .map(|(a, b)| (a + b) / 2.0)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::SeedableRng;

    fn input(t: usize, modality: Modality) -> FeatureTensor {
        let c = modality.channels();
        let data = Array3::from_shape_fn((NUM_BINS, t, c), |(b, f, ch)| {
            ((b * 31 + f * 7 + ch) % 13) as f32 / 13.0
        });
        FeatureTensor::new(data, 5.0, modality).unwrap()
    }

    #[test]
    fn forward_shapes_and_ranges() {
        let mut config = ModelConfig::difficulty(Modality::Cqt);
        config.heads.push(HeadSpec::era());
        let model = DifficultyModel::new(config, 1).unwrap();
        for t in [20usize, 50] {
            let out = model.forward(&input(t, Modality::Cqt)).unwrap();
            let diff = out.head_activations(&TaskKind::Difficulty).unwrap();
            let era = out.head_activations(&TaskKind::Era).unwrap();
            assert_eq!(diff.len(), 11);
            assert_eq!(era.len(), 5);
            assert!(diff.iter().chain(&era).all(|&v| (0.0..=1.0).contains(&v)));
            assert_eq!(out.summary.len(), 256);
            assert_eq!(out.attention_weights.len(), 4);
            for w in &out.attention_weights {
                assert_eq!(w.len(), t / 8);
                let s: f32 = w.iter().sum();
                assert!((s - 1.0).abs() < 1e-6);
                assert!(w.iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn zero_context_summary_is_time_mean() {
        let model = DifficultyModel::new(ModelConfig::difficulty(Modality::PianoRoll), 2).unwrap();
        let out = model.forward(&input(24, Modality::PianoRoll)).unwrap();
        let t = out.attention_weights[0].len();
        for w in &out.attention_weights {
            for &x in w {
                assert!((x - 1.0 / t as f32).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn too_short_input_reports_minimum() {
        let model = DifficultyModel::new(ModelConfig::difficulty(Modality::Cqt), 3).unwrap();
        let err = model.forward(&input(7, Modality::Cqt)).unwrap_err();
        assert!(err.to_string().contains("8 frames"), "{err}");
    }

    #[test]
    fn channel_mismatch_is_domain_error() {
        let model = DifficultyModel::new(ModelConfig::difficulty(Modality::Cqt), 3).unwrap();
        assert!(model.forward(&input(16, Modality::PianoRoll)).is_err());
    }

    #[test]
    fn mm_branch_accepts_three_channels() {
        let model = DifficultyModel::new(ModelConfig::difficulty(Modality::Multimodal), 4).unwrap();
        let out = model.forward(&input(16, Modality::Multimodal)).unwrap();
        assert_eq!(out.head_activations(&TaskKind::Difficulty).unwrap().len(), 11);
        let mut trunk_cfg = ModelConfig::difficulty(Modality::Multimodal);
        trunk_cfg.mm_wiring = MultimodalWiring::Trunk;
        let trunk = DifficultyModel::new(trunk_cfg, 4).unwrap();
        assert_eq!(
            trunk.forward(&input(16, Modality::Multimodal)).unwrap().summary.len(),
            256
        );
    }

    #[test]
    fn forward_is_deterministic() {
        let model = DifficultyModel::new(ModelConfig::difficulty(Modality::PianoRoll), 5).unwrap();
        let x = input(40, Modality::PianoRoll);
        let a = model.forward(&x).unwrap();
        let b = model.forward(&x).unwrap();
        assert_eq!(
            a.head_activations(&TaskKind::Difficulty).unwrap(),
            b.head_activations(&TaskKind::Difficulty).unwrap()
        );
    }

    #[test]
    fn padding_does_not_change_outputs() {
        let model = DifficultyModel::new(ModelConfig::difficulty(Modality::PianoRoll), 6).unwrap();
        let short = input(16, Modality::PianoRoll);
        let long = input(48, Modality::PianoRoll);
        let alone = model.forward(&short).unwrap();
        let batched = model.forward_batch(&[&short, &long], None).unwrap();
        let row = batched.heads[0].1.narrow(0, 0, 1).unwrap().reshape(11).unwrap();
        let padded: Vec<f32> = row.to_vec1().unwrap();
        let solo = alone.head_activations(&TaskKind::Difficulty).unwrap();
        for (a, b) in solo.iter().zip(&padded) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn training_mode_uses_dropout() {
        let model = DifficultyModel::new(ModelConfig::difficulty(Modality::PianoRoll), 7).unwrap();
        let x = input(16, Modality::PianoRoll);
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(1);
        let a = model.forward_batch(&[&x], Some(&mut r1)).unwrap();
        let b = model.forward_batch(&[&x], Some(&mut r2)).unwrap();
        // Same dropout stream: identical. (Batch-norm running stats shift,
        // but training statistics come from the batch itself.)
        assert_eq!(
            a.heads[0].1.to_vec2::<f32>().unwrap(),
            b.heads[0].1.to_vec2::<f32>().unwrap()
        );
    }

    #[test]
    fn ensemble_average_contract() {
        assert_eq!(
            ensemble_average(&[1.0, 1.0, 0.0], &[1.0, 0.0, 0.0]).unwrap(),
            vec![1.0, 0.5, 0.0]
        );
        let y = vec![0.3f32, 0.7];
        assert_eq!(ensemble_average(&y, &y).unwrap(), y);
        assert_eq!(
            ensemble_average(&[0.8, 0.4], &[0.2, 0.6]).unwrap(),
            vec![0.5, 0.5]
        );
        assert!(ensemble_average(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut bad = ModelConfig::difficulty(Modality::Cqt);
        bad.conv_channels = vec![64, 64, 128];
        assert!(bad.validate().is_err());
        let mut bad = ModelConfig::difficulty(Modality::Cqt);
        bad.heads.clear();
        assert!(bad.validate().is_err());
        let mut bad = ModelConfig::difficulty(Modality::Cqt);
        bad.heads[0].kind = HeadKind::Categorical;
        assert!(bad.validate().is_err());
        let mut bad = ModelConfig::difficulty(Modality::Cqt);
        bad.attention_heads = 3;
        assert!(bad.validate().is_err());
    }
}
