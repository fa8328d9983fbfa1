//! The three network shapes: a tabular ANN, an image CNN and the late-fusion
//! model that concatenates their feature vectors (CNN first) before a dense
//! head and a softmax over the three classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{freeze_tail, ops, Branch, LayerSpec, ModelSpec, Network, Tensor};
use crate::preprocess::{N_CLASSES, N_FEATURES};

pub const IMAGE_BRANCH: &str = "image";
pub const TABULAR_BRANCH: &str = "tabular";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchKind {
    TabularAnn,
    ImageCnn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub kind: BranchKind,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    /// Width of the flat feature vector the branch emits.
    pub feature_width: usize,
}

impl BranchSpec {
    fn name(&self) -> &'static str {
        match self.kind {
            BranchKind::TabularAnn => TABULAR_BRANCH,
            BranchKind::ImageCnn => IMAGE_BRANCH,
        }
    }

    fn to_branch(&self) -> Branch {
        Branch {
            name: self.name().to_string(),
            input_shape: self.input_shape.clone(),
            layers: self.layers.clone(),
        }
    }

    /// Only the last `trainable` parameterized layers keep training.
    pub fn freeze_tail(&mut self, trainable: usize) -> Result<()> {
        freeze_tail(&mut self.layers, trainable)
    }

    pub fn parameterized_layers(&self) -> usize {
        self.layers.iter().filter(|l| l.has_params()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnConfig {
    pub input_width: usize,
    /// Exactly two hidden widths, giving three dense layers in total.
    pub hidden: Vec<usize>,
    pub feature_width: usize,
}

impl Default for AnnConfig {
    fn default() -> Self {
        AnnConfig {
            input_width: N_FEATURES,
            hidden: vec![64, 32],
            feature_width: 16,
        }
    }
}

/// `dense(in→h1)·relu·dense(h1→h2)·relu·dense(h2→F)`
pub fn build_ann(cfg: &AnnConfig) -> Result<BranchSpec> {
    if cfg.hidden.len() != 2 {
        return Err(Error::Config(format!(
            "the ANN has exactly three dense layers; got {} hidden widths",
            cfg.hidden.len()
        )));
    }
    if cfg.input_width == 0 || cfg.feature_width == 0 || cfg.hidden.contains(&0) {
        return Err(Error::Config("ANN widths must be at least 1".into()));
    }
    let (h1, h2) = (cfg.hidden[0], cfg.hidden[1]);
    Ok(BranchSpec {
        kind: BranchKind::TabularAnn,
        input_shape: vec![cfg.input_width],
        layers: vec![
            LayerSpec::dense(cfg.input_width, h1),
            LayerSpec::relu(),
            LayerSpec::dense(h1, h2),
            LayerSpec::relu(),
            LayerSpec::dense(h2, cfg.feature_width),
        ],
        feature_width: cfg.feature_width,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStage {
    pub channels: usize,
    /// Follow this stage with a 2×2, stride-2 max pool.
    pub pool: bool,
}

/// Convolution plan of the surrogate backbone. Every stage is
/// `conv(k×k, stride 1)·relu`, optionally pooled; the plan ends with global
/// average pooling and flatten, so the feature width is the last stage's
/// channel count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnPlan {
    pub stages: Vec<ConvStage>,
    pub kernel: usize,
    pub padding: usize,
}

impl Default for CnnPlan {
    fn default() -> Self {
        CnnPlan {
            stages: vec![
                ConvStage { channels: 8, pool: true },
                ConvStage { channels: 16, pool: true },
                ConvStage { channels: 32, pool: false },
            ],
            kernel: 3,
            padding: 1,
        }
    }
}

pub fn build_cnn(side: usize, plan: &CnnPlan) -> Result<BranchSpec> {
    if plan.stages.is_empty() {
        return Err(Error::Config("CNN plan has no stages".into()));
    }
    let mut layers = Vec::new();
    let mut channels = 3;
    for stage in &plan.stages {
        if stage.channels == 0 {
            return Err(Error::Config("conv stage with zero channels".into()));
        }
        layers.push(LayerSpec::conv2d(channels, stage.channels, plan.kernel, 1, plan.padding));
        layers.push(LayerSpec::relu());
        if stage.pool {
            layers.push(LayerSpec::maxpool2d(2, 2));
        }
        channels = stage.channels;
    }
    layers.push(LayerSpec::global_avg_pool());
    layers.push(LayerSpec::flatten());
    let branch = BranchSpec {
        kind: BranchKind::ImageCnn,
        input_shape: vec![3, side, side],
        layers,
        feature_width: channels,
    };
    let out = ModelSpec {
        branches: vec![branch.to_branch()],
        head: Vec::new(),
    }
    .validate()?;
    if out != [channels] {
        return Err(Error::Config(format!("CNN plan ends in shape {out:?}")));
    }
    Ok(branch)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionSpec {
    pub cnn: BranchSpec,
    pub ann: BranchSpec,
    /// Hidden widths of the head; each is `dense·relu`. Empty means the
    /// concatenated features go straight to `dense(→3)·softmax`.
    pub head: Vec<usize>,
    /// Trainable tail of the CNN branch; `None` trains all of it.
    pub cnn_trainable: Option<usize>,
}

fn classifier_head(input: usize, hidden: &[usize]) -> Result<Vec<LayerSpec>> {
    let mut layers = Vec::new();
    let mut width = input;
    for &h in hidden {
        if h == 0 {
            return Err(Error::Config("head width must be at least 1".into()));
        }
        layers.push(LayerSpec::dense(width, h));
        layers.push(LayerSpec::relu());
        width = h;
    }
    layers.push(LayerSpec::dense(width, N_CLASSES));
    layers.push(LayerSpec::softmax());
    Ok(layers)
}

pub fn build_fusion(fspec: &FusionSpec) -> Result<ModelSpec> {
    if fspec.cnn.kind != BranchKind::ImageCnn || fspec.ann.kind != BranchKind::TabularAnn {
        return Err(Error::Config("fusion needs one image CNN and one tabular ANN".into()));
    }
    let mut cnn = fspec.cnn.clone();
    if let Some(n) = fspec.cnn_trainable {
        if n > cnn.parameterized_layers() {
            return Err(Error::Config(format!(
                "{n} trainable layers requested from a CNN with {}",
                cnn.parameterized_layers()
            )));
        }
        cnn.freeze_tail(n)?;
    }
    let spec = ModelSpec {
        branches: vec![cnn.to_branch(), fspec.ann.to_branch()],
        head: classifier_head(cnn.feature_width + fspec.ann.feature_width, &fspec.head)?,
    };
    let out = spec.validate()?;
    if out != [N_CLASSES] {
        return Err(Error::Config(format!("fusion output shape {out:?}")));
    }
    Ok(spec)
}

/// A single-branch classifier. An ANN whose feature width is already 3 gets
/// only a softmax; anything else gets `dense(F→3)·softmax`.
pub fn build_unimodal(branch: &BranchSpec) -> Result<ModelSpec> {
    let head = if branch.kind == BranchKind::TabularAnn && branch.feature_width == N_CLASSES {
        vec![LayerSpec::softmax()]
    } else {
        classifier_head(branch.feature_width, &[])?
    };
    let mut b = branch.to_branch();
    b.layers.extend(head);
    let spec = ModelSpec {
        branches: vec![b],
        head: Vec::new(),
    };
    spec.validate()?;
    Ok(spec)
}

/// Row-wise concatenation of CNN features then ANN features.
pub fn fuse_features(cnn_features: &Tensor, ann_features: &Tensor) -> Result<Tensor> {
    ops::concat(cnn_features, ann_features)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Tensor,
    pub labels: Vec<usize>,
}

pub fn predict(model: &Network, inputs: &[Tensor]) -> Result<Prediction> {
    let probabilities = model.predict(inputs)?;
    let labels = (0..probabilities.rows())
        .map(|i| argmax(probabilities.row(i)))
        .collect();
    Ok(Prediction {
        probabilities,
        labels,
    })
}

/// Which of the three experiment families a model belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    TabularOnly,
    ImageOnly,
    Fusion,
}

impl Mode {
    pub fn uses_images(self) -> bool {
        matches!(self, Mode::ImageOnly | Mode::Fusion)
    }

    pub fn uses_features(self) -> bool {
        matches!(self, Mode::TabularOnly | Mode::Fusion)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub mode: Mode,
    pub ann: AnnConfig,
    pub cnn: CnnPlan,
    pub head: Vec<usize>,
    pub cnn_trainable: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            mode: Mode::Fusion,
            ann: AnnConfig::default(),
            cnn: CnnPlan::default(),
            head: vec![32],
            cnn_trainable: None,
        }
    }
}

impl ModelConfig {
    pub fn build(&self, image_side: usize) -> Result<ModelSpec> {
        match self.mode {
            Mode::TabularOnly => build_unimodal(&build_ann(&self.ann)?),
            Mode::ImageOnly => {
                let mut cnn = build_cnn(image_side, &self.cnn)?;
                if let Some(n) = self.cnn_trainable {
                    cnn.freeze_tail(n)?;
                }
                build_unimodal(&cnn)
            }
            Mode::Fusion => build_fusion(&FusionSpec {
                cnn: build_cnn(image_side, &self.cnn)?,
                ann: build_ann(&self.ann)?,
                head: self.head.clone(),
                cnn_trainable: self.cnn_trainable,
            }),
        }
    }
}
