use std::fmt;

use crate::error::{config_err, Result};
use crate::kv::{parse_pair, KvDoc};
use crate::model::TaskId;

/// Which task decoders a model carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskSelection {
    Both,
    Only(TaskId),
}

impl TaskSelection {
    pub fn tasks(self) -> Vec<TaskId> {
        match self {
            TaskSelection::Both => TaskId::ALL.to_vec(),
            TaskSelection::Only(t) => vec![t],
        }
    }
}

impl fmt::Display for TaskSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskSelection::Both => f.write_str("both"),
            TaskSelection::Only(t) => f.write_str(t.name()),
        }
    }
}

impl std::str::FromStr for TaskSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(TaskSelection::Both),
            other => other.parse().map(TaskSelection::Only),
        }
    }
}

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub input_channels: usize,
    pub input_size: (usize, usize),
    /// Widths of the three inner stand-in encoder stages.
    pub encoder_stage_channels: [usize; 3],
    pub encoder_out_channels: usize,
    pub embedding_size: (usize, usize),
    pub relearn_channels: usize,
    /// Width of the first 1x1 convolution in each segmentation head.
    pub head_channels: usize,
    pub use_relearning: bool,
    pub use_fusion: bool,
    pub tasks: TaskSelection,
}

impl ModelConfig {
    /// 3x520x520 input, 720x120x120 embedding, 512-channel task features.
    pub fn full_scale() -> Self {
        ModelConfig {
            input_channels: 3,
            input_size: (520, 520),
            encoder_stage_channels: [16, 32, 48],
            encoder_out_channels: 720,
            embedding_size: (120, 120),
            relearn_channels: 512,
            head_channels: 512,
            use_relearning: true,
            use_fusion: true,
            tasks: TaskSelection::Both,
        }
    }

    /// 3x64x64 input, 64x16x16 embedding, 32-channel task features.
    pub fn desk_scale() -> Self {
        Self::desk_scale_with_input(64, 64)
    }

    pub fn desk_scale_with_input(height: usize, width: usize) -> Self {
        ModelConfig {
            input_channels: 3,
            input_size: (height, width),
            encoder_stage_channels: [16, 32, 48],
            encoder_out_channels: 64,
            embedding_size: (height / 4, width / 4),
            relearn_channels: 32,
            head_channels: 32,
            use_relearning: true,
            use_fusion: true,
            tasks: TaskSelection::Both,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        let (relearn, fusion, tasks) = variant.flags();
        self.use_relearning = relearn;
        self.use_fusion = fusion;
        self.tasks = tasks;
        self
    }

    /// Channel count of the per-task features entering fusion and the decoders.
    pub fn task_feature_channels(&self) -> usize {
        if self.use_relearning {
            self.relearn_channels
        } else {
            self.encoder_out_channels
        }
    }

    pub fn variant(&self) -> Option<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.flags() == (self.use_relearning, self.use_fusion, self.tasks))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_channels", self.input_channels),
            ("input height", self.input_size.0),
            ("input width", self.input_size.1),
            ("encoder_out_channels", self.encoder_out_channels),
            ("embedding height", self.embedding_size.0),
            ("embedding width", self.embedding_size.1),
            ("relearn_channels", self.relearn_channels),
            ("head_channels", self.head_channels),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(config_err!("{name} must be positive"));
            }
        }
        if self.encoder_stage_channels.contains(&0) {
            return Err(config_err!("encoder stage widths must be positive"));
        }
        if self.embedding_size.0 > self.input_size.0 || self.embedding_size.1 > self.input_size.1 {
            return Err(config_err!(
                "embedding {:?} larger than input {:?}",
                self.embedding_size,
                self.input_size
            ));
        }
        if self.input_size.0 < 4 || self.input_size.1 < 4 {
            return Err(config_err!("input must be at least 4x4"));
        }
        if let TaskSelection::Only(_) = self.tasks {
            if self.use_fusion || self.use_relearning {
                return Err(config_err!(
                    "single-task models carry neither relearning subnets nor fusion"
                ));
            }
        }
        Ok(())
    }

    pub const KEYS: [&'static str; 10] = [
        "input_channels",
        "input_size",
        "encoder_stage_channels",
        "encoder_out_channels",
        "embedding_size",
        "relearn_channels",
        "head_channels",
        "use_relearning",
        "use_fusion",
        "tasks",
    ];

    /// Writes every field under `prefix` (for example `model.`).
    pub fn write_kv(&self, doc: &mut KvDoc, prefix: &str) {
        let [a, b, c] = self.encoder_stage_channels;
        doc.insert(format!("{prefix}input_channels"), self.input_channels);
        doc.insert(
            format!("{prefix}input_size"),
            format!("{}x{}", self.input_size.0, self.input_size.1),
        );
        doc.insert(format!("{prefix}encoder_stage_channels"), format!("{a},{b},{c}"));
        doc.insert(format!("{prefix}encoder_out_channels"), self.encoder_out_channels);
        doc.insert(
            format!("{prefix}embedding_size"),
            format!("{}x{}", self.embedding_size.0, self.embedding_size.1),
        );
        doc.insert(format!("{prefix}relearn_channels"), self.relearn_channels);
        doc.insert(format!("{prefix}head_channels"), self.head_channels);
        doc.insert(format!("{prefix}use_relearning"), self.use_relearning);
        doc.insert(format!("{prefix}use_fusion"), self.use_fusion);
        doc.insert(format!("{prefix}tasks"), self.tasks);
    }

    /// Reads fields under `prefix`, starting from `base` for absent keys.
    pub fn read_kv(doc: &KvDoc, prefix: &str, base: &ModelConfig) -> Result<ModelConfig> {
        let key = |k: &str| format!("{prefix}{k}");
        let mut cfg = base.clone();
        if let Some(v) = doc.parse_opt(&key("input_channels"))? {
            cfg.input_channels = v;
        }
        if let Some(raw) = doc.get(&key("input_size")) {
            cfg.input_size = parse_pair(raw)?;
        }
        if let Some(raw) = doc.get(&key("encoder_stage_channels")) {
            let parts = raw
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| config_err!("encoder_stage_channels `{raw}`: {e}"))?;
            cfg.encoder_stage_channels = parts
                .try_into()
                .map_err(|_| config_err!("encoder_stage_channels needs three widths, got `{raw}`"))?;
        }
        if let Some(v) = doc.parse_opt(&key("encoder_out_channels"))? {
            cfg.encoder_out_channels = v;
        }
        if let Some(raw) = doc.get(&key("embedding_size")) {
            cfg.embedding_size = parse_pair(raw)?;
        } else if doc.contains(&key("input_size")) {
            cfg.embedding_size = (cfg.input_size.0 / 4, cfg.input_size.1 / 4);
        }
        if let Some(v) = doc.parse_opt(&key("relearn_channels"))? {
            cfg.relearn_channels = v;
        }
        if let Some(v) = doc.parse_opt(&key("head_channels"))? {
            cfg.head_channels = v;
        }
        if let Some(v) = doc.parse_opt(&key("use_relearning"))? {
            cfg.use_relearning = v;
        }
        if let Some(v) = doc.parse_opt(&key("use_fusion"))? {
            cfg.use_fusion = v;
        }
        if let Some(v) = doc.parse_opt(&key("tasks"))? {
            cfg.tasks = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The model variants compared in the ablation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    SingleTask(TaskId),
    NaiveMtl,
    WithoutFusion,
    WithoutRelearning,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::SingleTask(TaskId::Element),
        Variant::SingleTask(TaskId::Defect),
        Variant::NaiveMtl,
        Variant::WithoutFusion,
        Variant::WithoutRelearning,
        Variant::Full,
    ];

    pub const MULTI_TASK: [Variant; 4] = [
        Variant::NaiveMtl,
        Variant::WithoutFusion,
        Variant::WithoutRelearning,
        Variant::Full,
    ];

    /// `(use_relearning, use_fusion, tasks)`.
    pub fn flags(self) -> (bool, bool, TaskSelection) {
        match self {
            Variant::SingleTask(t) => (false, false, TaskSelection::Only(t)),
            Variant::NaiveMtl => (false, false, TaskSelection::Both),
            Variant::WithoutFusion => (true, false, TaskSelection::Both),
            Variant::WithoutRelearning => (false, true, TaskSelection::Both),
            Variant::Full => (true, true, TaskSelection::Both),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::SingleTask(TaskId::Element) => "Single-task (element)",
            Variant::SingleTask(TaskId::Defect) => "Single-task (defect)",
            Variant::NaiveMtl => "Naive MTL",
            Variant::WithoutFusion => "AECIF-Net without CF",
            Variant::WithoutRelearning => "AECIF-Net without TF",
            Variant::Full => "AECIF-Net",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Variant::SingleTask(TaskId::Element) => "single-element",
            Variant::SingleTask(TaskId::Defect) => "single-defect",
            Variant::NaiveMtl => "naive-mtl",
            Variant::WithoutFusion => "without-cf",
            Variant::WithoutRelearning => "without-tf",
            Variant::Full => "full",
        }
    }
}
