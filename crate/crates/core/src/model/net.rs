use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, shape_err, Result};
use crate::model::encoder::{Encoder, StandInEncoder};
use crate::model::layers::{AttentionModule, ConvBnRelu, ConvBnReluCache, HeadCache, SegmentationHead};
use crate::model::{ModelConfig, TaskId, TaskSelection, TaskSpec};
use crate::nn::{count_parameters, FeatureMap, Param, Parameterized, Real};

/// Per-task class probabilities, `batch x N_i x H x W`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionScores<T> {
    pub element: Option<FeatureMap<T>>,
    pub defect: Option<FeatureMap<T>>,
}

impl<T> Default for PredictionScores<T> {
    fn default() -> Self {
        PredictionScores {
            element: None,
            defect: None,
        }
    }
}

impl<T> PredictionScores<T> {
    pub fn get(&self, task: TaskId) -> Option<&FeatureMap<T>> {
        match task {
            TaskId::Element => self.element.as_ref(),
            TaskId::Defect => self.defect.as_ref(),
        }
    }

    pub fn set(&mut self, task: TaskId, scores: FeatureMap<T>) {
        match task {
            TaskId::Element => self.element = Some(scores),
            TaskId::Defect => self.defect = Some(scores),
        }
    }
}

/// Feature maps produced on the way to the predictions, in branch order.
#[derive(Clone, Debug)]
pub struct Intermediates<T> {
    /// Shared embedding `f`.
    pub embedding: FeatureMap<T>,
    /// Task features `f_i`.
    pub task_features: Vec<FeatureMap<T>>,
    /// Attention masks `S_i`; empty when fusion is disabled.
    pub masks: Vec<FeatureMap<T>>,
    /// Fused features `f_i*` entering the decoders.
    pub fused: Vec<FeatureMap<T>>,
    pub tasks: Vec<TaskId>,
}

#[derive(Clone, Debug)]
pub struct ForwardOutput<T> {
    pub scores: PredictionScores<T>,
    pub intermediates: Intermediates<T>,
}

/// Everything the backward pass needs from a train-mode forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T, C> {
    encoder: C,
    relearn: Vec<Option<ConvBnReluCache<T>>>,
    intermediates: Intermediates<T>,
    heads: Vec<HeadCache<T>>,
}

impl<T, C> ForwardCache<T, C> {
    pub fn intermediates(&self) -> &Intermediates<T> {
        &self.intermediates
    }
}

/// One task's path from the shared embedding to its predictions.
#[derive(Clone, Debug)]
pub struct Branch<T> {
    pub task: TaskSpec,
    pub relearn: Option<ConvBnRelu<T>>,
    pub attention: Option<AttentionModule<T>>,
    pub head: SegmentationHead<T>,
}

impl<T: Real> Branch<T> {
    fn new(config: &ModelConfig, task: TaskSpec) -> Self {
        let name = task.id.name();
        let feat = config.task_feature_channels();
        Branch {
            relearn: config.use_relearning.then(|| {
                ConvBnRelu::new(
                    &format!("relearn.{name}"),
                    config.encoder_out_channels,
                    config.relearn_channels,
                    3,
                    1,
                )
            }),
            attention: config
                .use_fusion
                .then(|| AttentionModule::new(&format!("attention.{name}"), feat)),
            head: SegmentationHead::new(&format!("head.{name}"), feat, config.head_channels, task.class_count()),
            task,
        }
    }
}

impl<T> Parameterized<T> for Branch<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut p = Vec::new();
        if let Some(r) = &self.relearn {
            p.extend(r.params());
        }
        if let Some(a) = &self.attention {
            p.extend(a.params());
        }
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut p = Vec::new();
        if let Some(r) = &mut self.relearn {
            p.extend(r.params_mut());
        }
        if let Some(a) = &mut self.attention {
            p.extend(a.params_mut());
        }
        p.extend(self.head.params_mut());
        p
    }
}

/// Shared encoder, task relearning subnets, co-interactive attention fusion
/// and per-task segmentation heads.
#[derive(Clone, Debug)]
pub struct AecifNet<T, E = StandInEncoder<T>> {
    config: ModelConfig,
    pub encoder: E,
    pub branches: Vec<Branch<T>>,
}

impl<T: Real> AecifNet<T> {
    /// Builds the model with the stand-in encoder and seeded initialisation.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut net = Self::uninitialized(config)?;
        net.initialize(seed);
        Ok(net)
    }

    /// Builds the model with zero conv weights; useful for parameter accounting.
    pub fn uninitialized(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let encoder = StandInEncoder::new(&config);
        Self::with_encoder(config, encoder)
    }

    pub fn initialize(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.encoder.init(&mut rng);
        self.init_branches(&mut rng);
    }

    /// Converts the element type, preserving every parameter value.
    pub fn cast<U: Real>(&self) -> AecifNet<U> {
        let mut out = AecifNet::<U>::uninitialized(self.config.clone()).expect("config already validated");
        for (dst, src) in out.params_mut().into_iter().zip(self.params()) {
            *dst = src.cast();
        }
        out
    }
}

impl<T: Real, E: Encoder<T>> AecifNet<T, E> {
    /// Builds the model around a caller-supplied encoder. Task branches are
    /// zero-initialised until [`AecifNet::init_branches`] is called.
    pub fn with_encoder(config: ModelConfig, encoder: E) -> Result<Self> {
        config.validate()?;
        if encoder.out_channels() != config.encoder_out_channels {
            return Err(config_err!(
                "encoder emits {} channels, config expects {}",
                encoder.out_channels(),
                config.encoder_out_channels
            ));
        }
        if encoder.embedding_size() != config.embedding_size {
            return Err(config_err!(
                "encoder embedding {:?} does not match config {:?}",
                encoder.embedding_size(),
                config.embedding_size
            ));
        }
        let branches = config
            .tasks
            .tasks()
            .into_iter()
            .map(|t| Branch::new(&config, t.spec()))
            .collect();
        Ok(AecifNet {
            config,
            encoder,
            branches,
        })
    }

    pub fn init_branches(&mut self, rng: &mut ChaCha8Rng) {
        for b in &mut self.branches {
            if let Some(r) = &mut b.relearn {
                r.init(rng);
            }
            if let Some(a) = &mut b.attention {
                a.init(rng);
            }
            b.head.init(rng);
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tasks(&self) -> Vec<TaskId> {
        self.branches.iter().map(|b| b.task.id).collect()
    }

    pub fn branch(&self, task: TaskId) -> Option<&Branch<T>> {
        self.branches.iter().find(|b| b.task.id == task)
    }

    fn check_input(&self, image: &FeatureMap<T>) -> Result<()> {
        let s = image.shape();
        let c = &self.config;
        if s.channels != c.input_channels || (s.height, s.width) != c.input_size {
            return Err(config_err!(
                "model configured for {}x{}x{} input, got {}x{}x{}",
                c.input_channels,
                c.input_size.0,
                c.input_size.1,
                s.channels,
                s.height,
                s.width
            ));
        }
        Ok(())
    }

    fn fusion_active(&self) -> bool {
        self.config.use_fusion && self.branches.len() == 2
    }

    /// Eval-mode forward pass (batch norm uses running moments).
    pub fn forward_eval(&self, image: &FeatureMap<T>) -> Result<ForwardOutput<T>> {
        self.forward_eval_impl(image, false)
    }

    /// Eval-mode forward pass with every attention mask replaced by zeros.
    pub fn forward_eval_zero_masks(&self, image: &FeatureMap<T>) -> Result<ForwardOutput<T>> {
        self.forward_eval_impl(image, true)
    }

    fn forward_eval_impl(&self, image: &FeatureMap<T>, zero_masks: bool) -> Result<ForwardOutput<T>> {
        self.check_input(image)?;
        let embedding = self.encoder.forward_eval(image)?;
        let task_features = self
            .branches
            .iter()
            .map(|b| match &b.relearn {
                Some(r) => relearn(&embedding, r),
                None => Ok(embedding.clone()),
            })
            .collect::<Result<Vec<_>>>()?;
        let (masks, fused) = if self.fusion_active() {
            let mut masks = self
                .branches
                .iter()
                .zip(&task_features)
                .map(|(b, f)| attention_mask(f, b.attention.as_ref().expect("fusion enabled")))
                .collect::<Result<Vec<_>>>()?;
            if zero_masks {
                for m in &mut masks {
                    *m = FeatureMap::zeros(m.shape());
                }
            }
            let (fe, fd) = co_interactive_fuse(&task_features[0], &task_features[1], &masks[0], &masks[1])?;
            (masks, vec![fe, fd])
        } else {
            (Vec::new(), task_features.clone())
        };
        let mut scores = PredictionScores::default();
        for (b, f) in self.branches.iter().zip(&fused) {
            scores.set(b.task.id, decode(f, &b.task, &b.head, self.config.input_size)?);
        }
        Ok(ForwardOutput {
            scores,
            intermediates: Intermediates {
                embedding,
                task_features,
                masks,
                fused,
                tasks: self.tasks(),
            },
        })
    }

    /// Train-mode forward pass; batch norm uses batch statistics and updates
    /// its running moments.
    pub fn forward_train(&mut self, image: &FeatureMap<T>) -> Result<(PredictionScores<T>, ForwardCache<T, E::Cache>)> {
        self.check_input(image)?;
        let (embedding, enc_cache) = self.encoder.forward_train(image)?;
        let mut task_features = Vec::with_capacity(self.branches.len());
        let mut relearn_caches = Vec::with_capacity(self.branches.len());
        for b in &mut self.branches {
            match &mut b.relearn {
                Some(r) => {
                    let (f, c) = r.forward_train(&embedding)?;
                    task_features.push(f);
                    relearn_caches.push(Some(c));
                }
                None => {
                    task_features.push(embedding.clone());
                    relearn_caches.push(None);
                }
            }
        }
        let (masks, fused) = if self.fusion_active() {
            let masks = self
                .branches
                .iter()
                .zip(&task_features)
                .map(|(b, f)| attention_mask(f, b.attention.as_ref().expect("fusion enabled")))
                .collect::<Result<Vec<_>>>()?;
            let (fe, fd) = co_interactive_fuse(&task_features[0], &task_features[1], &masks[0], &masks[1])?;
            (masks, vec![fe, fd])
        } else {
            (Vec::new(), task_features.clone())
        };
        let out_size = self.config.input_size;
        let mut scores = PredictionScores::default();
        let mut heads = Vec::with_capacity(self.branches.len());
        for (b, f) in self.branches.iter_mut().zip(&fused) {
            let (p, c) = b.head.forward_train(f, b.task.class_count(), out_size)?;
            scores.set(b.task.id, p);
            heads.push(c);
        }
        let tasks = self.tasks();
        Ok((
            scores,
            ForwardCache {
                encoder: enc_cache,
                relearn: relearn_caches,
                intermediates: Intermediates {
                    embedding,
                    task_features,
                    masks,
                    fused,
                    tasks,
                },
                heads,
            },
        ))
    }

    /// Backpropagates `d loss / d scores` for every active task, accumulating
    /// parameter gradients.
    pub fn backward(&mut self, cache: &ForwardCache<T, E::Cache>, grad_scores: &PredictionScores<T>) -> Result<()> {
        let inter = &cache.intermediates;
        let mut grad_fused = Vec::with_capacity(self.branches.len());
        for (b, hc) in self.branches.iter_mut().zip(&cache.heads) {
            let g = grad_scores
                .get(b.task.id)
                .ok_or_else(|| shape_err!("missing score gradient for the {} task", b.task.id))?;
            grad_fused.push(b.head.backward(hc, g)?);
        }
        let grad_task: Vec<FeatureMap<T>> = if self.fusion_active() {
            // f_e* = f_e + S_e * f_d,  f_d* = f_d + S_d * f_e
            let (fe, fd) = (&inter.task_features[0], &inter.task_features[1]);
            let (se, sd) = (&inter.masks[0], &inter.masks[1]);
            let (ge_star, gd_star) = (&grad_fused[0], &grad_fused[1]);
            let mut ge = ge_star.clone();
            let mut gd = gd_star.clone();
            let mut gse = FeatureMap::zeros(se.shape());
            let mut gsd = FeatureMap::zeros(sd.shape());
            for i in 0..ge.data().len() {
                ge.data_mut()[i] += sd.data()[i] * gd_star.data()[i];
                gd.data_mut()[i] += se.data()[i] * ge_star.data()[i];
                gse.data_mut()[i] = ge_star.data()[i] * fd.data()[i];
                gsd.data_mut()[i] = gd_star.data()[i] * fe.data()[i];
            }
            let grad_masks = [gse, gsd];
            let mut out = vec![ge, gd];
            for (k, b) in self.branches.iter_mut().enumerate() {
                let att = b.attention.as_mut().expect("fusion enabled");
                let g = att.backward(&inter.task_features[k], &inter.masks[k], &grad_masks[k])?;
                out[k].add_assign(&g)?;
            }
            out
        } else {
            grad_fused
        };
        let mut grad_embedding = FeatureMap::zeros(inter.embedding.shape());
        for ((b, rc), g) in self.branches.iter_mut().zip(&cache.relearn).zip(&grad_task) {
            match (&mut b.relearn, rc) {
                (Some(r), Some(c)) => grad_embedding.add_assign(&r.backward(c, g)?)?,
                _ => grad_embedding.add_assign(g)?,
            }
        }
        self.encoder.backward(&cache.encoder, &grad_embedding)
    }

    /// On/off state of every ReLU unit recorded in a train-mode forward pass.
    pub fn relu_pattern(&self, cache: &ForwardCache<T, E::Cache>) -> Vec<bool> {
        let mut out = Vec::new();
        self.encoder.relu_pattern(&cache.encoder, &mut out);
        for c in cache.relearn.iter().flatten() {
            c.relu_pattern(&mut out);
        }
        for c in &cache.heads {
            c.relu_pattern(&mut out);
        }
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Trainable-parameter counts per module, in a fixed order.
    pub fn parameter_table(&self) -> Vec<(String, usize)> {
        let mut rows = vec![("encoder".to_string(), count_parameters(self.encoder.params()))];
        for b in &self.branches {
            let name = b.task.id.name();
            if let Some(r) = &b.relearn {
                rows.push((format!("relearn.{name}"), count_parameters(r.params())));
            }
        }
        for b in &self.branches {
            if let Some(a) = &b.attention {
                rows.push((format!("attention.{}", b.task.id.name()), count_parameters(a.params())));
            }
        }
        for b in &self.branches {
            rows.push((format!("head.{}", b.task.id.name()), count_parameters(b.head.params())));
        }
        rows
    }
}

impl<T, E: Parameterized<T>> Parameterized<T> for AecifNet<T, E> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut p = self.encoder.params();
        for b in &self.branches {
            p.extend(b.params());
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut p = self.encoder.params_mut();
        for b in &mut self.branches {
            p.extend(b.params_mut());
        }
        p
    }
}

/// Parameter group of a parameter name: `encoder`, `relearn.<task>`,
/// `attention.<task>` or `head.<task>`.
pub fn param_group(name: &str) -> &str {
    if name.starts_with("encoder.") {
        return "encoder";
    }
    match name.match_indices('.').nth(1) {
        Some((i, _)) => &name[..i],
        None => name,
    }
}

/// Shared embedding of `image`.
pub fn encode<T: Real, E: Encoder<T>>(image: &FeatureMap<T>, encoder: &E) -> Result<FeatureMap<T>> {
    encoder.forward_eval(image)
}

/// Task-specific features `ReLU(BN(conv(f)))`, eval mode.
pub fn relearn<T: Real>(embedding: &FeatureMap<T>, subnet: &ConvBnRelu<T>) -> Result<FeatureMap<T>> {
    subnet.forward_eval(embedding)
}

/// Spatial attention mask `sigmoid(conv(f_i))`, same shape as `f_i`.
pub fn attention_mask<T: Real>(task_features: &FeatureMap<T>, module: &AttentionModule<T>) -> Result<FeatureMap<T>> {
    let mask = module.forward(task_features)?;
    if mask.shape() != task_features.shape() {
        return Err(shape_err!(
            "attention mask {} does not match task features {}",
            mask.shape(),
            task_features.shape()
        ));
    }
    Ok(mask)
}

/// Additive cross-task fusion: `f_e* = f_e + S_e * f_d`, `f_d* = f_d + S_d * f_e`.
pub fn co_interactive_fuse<T: Real>(
    f_e: &FeatureMap<T>,
    f_d: &FeatureMap<T>,
    s_e: &FeatureMap<T>,
    s_d: &FeatureMap<T>,
) -> Result<(FeatureMap<T>, FeatureMap<T>)> {
    f_e.ensure_same_shape(f_d, "fusion features")?;
    f_e.ensure_same_shape(s_e, "element mask")?;
    f_e.ensure_same_shape(s_d, "defect mask")?;
    let mut fe_star = f_e.clone();
    let mut fd_star = f_d.clone();
    for ((o, &s), &other) in fe_star.data_mut().iter_mut().zip(s_e.data()).zip(f_d.data()) {
        *o += s * other;
    }
    for ((o, &s), &other) in fd_star.data_mut().iter_mut().zip(s_d.data()).zip(f_e.data()) {
        *o += s * other;
    }
    Ok((fe_star, fd_star))
}

/// Segmentation head then bilinear upsampling and per-pixel softmax, eval mode.
pub fn decode<T: Real>(
    fused: &FeatureMap<T>,
    task: &TaskSpec,
    head: &SegmentationHead<T>,
    out_size: (usize, usize),
) -> Result<FeatureMap<T>> {
    head.forward_eval(fused, task.class_count(), out_size)
}

impl TaskSelection {
    pub fn includes(self, task: TaskId) -> bool {
        match self {
            TaskSelection::Both => true,
            TaskSelection::Only(t) => t == task,
        }
    }
}
