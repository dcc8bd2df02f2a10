//! Full-batch training: plain single-space runs and the alternating
//! original/flipped schedule with best-validation model selection.

mod budget;
mod grid;
mod gradstats;
mod shift;
mod variance;

pub use budget::{label_budget_sweep, resample_train_split, BudgetRow};
pub use grid::{grid_search, GridCell, GridReport, DEFAULT_GRID};
pub use gradstats::{grad_stats, GradStatRecord, GradStats};
pub use shift::{shift_study, ShiftRow};
pub use variance::{mean_covariance_trace, variance_report, MethodVariance, VarianceReport};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::flip::{shared_grads, space_params, FlipContext, GradMode, Space, DEFAULT_REFLECTION};
use crate::graph::NormalizedGraph;
use crate::models::{self, ModelKind, ModelParams, ModelSpec, Propagation};
use crate::rng::{stream, Rng, Stream};
use crate::tensor::{argmax_rows, logsoftmax_nll, AdamConfig, AdamState, Matrix};

/// Which parameters α and β multiply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleScope {
    #[default]
    All,
    FirstLayer,
}

impl FromStr for ScaleScope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(ScaleScope::All),
            "first_layer" => Ok(ScaleScope::FirstLayer),
            other => Err(Error::InvalidArgument(format!(
                "unknown scale scope '{other}' (expected all or first_layer)"
            ))),
        }
    }
}

impl fmt::Display for ScaleScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleScope::All => "all",
            ScaleScope::FirstLayer => "first_layer",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelSpec,
    pub flip: bool,
    /// Gradient scale of the original-space half-epoch.
    pub alpha: f64,
    /// Gradient scale of the flipped-space half-epoch.
    pub beta: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub grad_mode: GradMode,
    /// Space used for evaluation after a flipped half-epoch.
    pub eval_space: Space,
    pub scale_scope: ScaleScope,
    /// Reflection point, the same value on every dimension.
    pub reflection: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::default(),
            flip: false,
            alpha: 1.0,
            beta: 1.0,
            lr: 1e-3,
            weight_decay: 5e-4,
            epochs: 1000,
            seed: 0,
            grad_mode: GradMode::Direct,
            eval_space: Space::Original,
            scale_scope: ScaleScope::All,
            reflection: DEFAULT_REFLECTION,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha ({}) and beta ({}) must be positive",
                self.alpha, self.beta
            )));
        }
        if !(self.lr > 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(
                "lr must be positive and weight_decay non-negative".into(),
            ));
        }
        if !(self.reflection > 0.0 && self.reflection < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "reflection point {} outside (0, 1)",
                self.reflection
            )));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..Default::default()
        }
    }
}

/// Which half of an epoch a metric row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Half {
    Plain,
    Original,
    Flipped,
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Half::Plain => "plain",
            Half::Original => "original",
            Half::Flipped => "flipped",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 1-based epoch.
    pub epoch: usize,
    pub half: Half,
    /// Training loss of this half, before its optimizer step.
    pub loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ModelParams,
    pub adam: AdamState,
    pub epoch: usize,
    /// Best validation accuracy so far.
    pub best_val: f64,
    /// Test accuracy recorded when `best_val` was reached.
    pub test_at_best_val: f64,
    /// Index into `log` of the half-epoch that set `best_val`.
    pub best_index: Option<usize>,
    pub best_params: ModelParams,
    pub log: Vec<EpochMetrics>,
}

impl TrainState {
    /// Sum of the training losses logged for `epoch` (both halves when flipping).
    pub fn epoch_loss(&self, epoch: usize) -> f64 {
        self.log
            .iter()
            .filter(|m| m.epoch == epoch)
            .map(|m| m.loss)
            .sum()
    }
}

/// Gradient of the first weight block recorded after each half-epoch, before
/// α/β scaling, with the L2 term included.
pub(crate) type GradObserver<'o> = dyn FnMut(usize, Space, &Matrix) + 'o;

/// Validated, pre-processed inputs shared by every half-epoch of a run.
struct Run<'d> {
    cfg: &'d TrainConfig,
    data: &'d Dataset,
    prop: NormalizedGraph,
    state: TrainState,
    dropout_rng: Rng,
}

impl<'d> Run<'d> {
    fn new(cfg: &'d TrainConfig, data: &'d Dataset, in_dim: usize) -> Result<Self> {
        let prop = match cfg.model.kind {
            ModelKind::Mlp => NormalizedGraph::identity(data.n()),
            ModelKind::Gcn | ModelKind::Appnp => data.graph.renormalize(),
        };
        let mut init_rng = stream(cfg.seed, Stream::Init);
        let params = ModelParams::init(&cfg.model, in_dim, data.num_classes, &mut init_rng);
        let adam = AdamState::new(cfg.adam(), &params.sizes());
        Ok(Self {
            cfg,
            data,
            prop,
            state: TrainState {
                best_params: params.clone(),
                params,
                adam,
                epoch: 0,
                best_val: 0.0,
                test_at_best_val: 0.0,
                best_index: None,
                log: Vec::new(),
            },
            dropout_rng: stream(cfg.seed, Stream::Dropout),
        })
    }

    fn propagation(&self) -> Propagation<'_> {
        match self.cfg.model.kind {
            ModelKind::Mlp => Propagation::Identity,
            _ => Propagation::Graph(&self.prop),
        }
    }

    /// One forward/backward pass on `input` with the space-local parameters
    /// `local`; returns the loss and the gradients mapped by `to_shared`.
    fn gradients(
        &mut self,
        local: &ModelParams,
        input: &Matrix,
        to_shared: impl FnOnce(ModelParams) -> Result<ModelParams>,
    ) -> Result<(f64, ModelParams)> {
        let epoch = self.state.epoch;
        let prop = match self.cfg.model.kind {
            ModelKind::Mlp => Propagation::Identity,
            _ => Propagation::Graph(&self.prop),
        };
        let (logits, tape) = models::forward(
            &self.cfg.model,
            local,
            prop,
            input,
            true,
            &mut self.dropout_rng,
        )?;
        let (loss, d_logits) = logsoftmax_nll(&logits, &self.data.labels, &self.data.split.train)?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                reason: format!("training loss is {loss}"),
            });
        }
        let grads = models::backward(&self.cfg.model, &tape, &d_logits)?;
        Ok((loss, to_shared(grads)?))
    }

    fn step(&mut self, mut grads: ModelParams, scale: f64) -> Result<()> {
        match self.cfg.scale_scope {
            ScaleScope::All => grads.scale(scale),
            ScaleScope::FirstLayer => grads.w1.scale(scale),
        }
        let grad_refs = grads.tensors();
        self.state
            .adam
            .step(&mut self.state.params.tensors_mut(), &grad_refs)
            .map_err(|e| match e {
                Error::NonFiniteGradient => Error::Divergence {
                    epoch: self.state.epoch,
                    reason: "non-finite gradient".into(),
                },
                other => other,
            })?;
        if !self.state.params.is_finite() {
            return Err(Error::Divergence {
                epoch: self.state.epoch,
                reason: "non-finite parameters".into(),
            });
        }
        Ok(())
    }

    fn record(&mut self, half: Half, loss: f64, logits: &Matrix) {
        let pred = argmax_rows(logits);
        let val = models::accuracy(&pred, &self.data.labels, &self.data.split.val);
        let test = models::accuracy(&pred, &self.data.labels, &self.data.split.test);
        let s = &mut self.state;
        s.log.push(EpochMetrics {
            epoch: s.epoch,
            half,
            loss,
            val_acc: val,
            test_acc: test,
        });
        if s.best_index.is_none() || val > s.best_val {
            s.best_val = val;
            s.test_at_best_val = test;
            s.best_index = Some(s.log.len() - 1);
            s.best_params = s.params.clone();
        }
    }
}

fn observe(
    observer: &mut Option<&mut GradObserver<'_>>,
    epoch: usize,
    space: Space,
    grads: &ModelParams,
    params: &ModelParams,
    weight_decay: f64,
) -> Result<()> {
    if let Some(obs) = observer.as_mut() {
        let mut g = grads.w1.clone();
        g.axpy(weight_decay, &params.w1)?;
        obs(epoch, space, &g);
    }
    Ok(())
}

/// Single-space training on the dense features.
pub fn train_plain(cfg: &TrainConfig, data: &Dataset) -> Result<TrainState> {
    if cfg.flip {
        return Err(Error::InvalidArgument(
            "train_plain called with flip enabled".into(),
        ));
    }
    train_plain_on(cfg, data, &data.features.to_dense())
}

/// Single-space training on an arbitrary dense input (e.g. shifted features).
pub fn train_plain_on(cfg: &TrainConfig, data: &Dataset, input: &Matrix) -> Result<TrainState> {
    cfg.validate()?;
    if input.rows() != data.n() {
        return Err(Error::shape(
            "train_plain_on",
            format!("input has {} rows for {} nodes", input.rows(), data.n()),
        ));
    }
    let mut run = Run::new(cfg, data, input.cols())?;
    for epoch in 1..=cfg.epochs {
        run.state.epoch = epoch;
        let local = run.state.params.clone();
        let (loss, grads) = run.gradients(&local, input, Ok)?;
        run.step(grads, 1.0)?;
        let logits = models::logits(&cfg.model, &run.state.params, run.propagation(), input)?;
        run.record(Half::Plain, loss, &logits);
    }
    Ok(run.state)
}

/// Alternating original/flipped training.
pub fn train_flip(cfg: &TrainConfig, data: &Dataset) -> Result<TrainState> {
    run_flip(cfg, data, &flip_context(cfg, data)?, None)
}

fn flip_context(cfg: &TrainConfig, data: &Dataset) -> Result<FlipContext> {
    cfg.validate()?;
    if !cfg.flip {
        return Err(Error::InvalidArgument(
            "flip training called with flip disabled".into(),
        ));
    }
    FlipContext::new(&data.features, &vec![cfg.reflection; data.num_features()])
}

/// `train_flip` that hands `observer` the first-layer gradient of the shared
/// weights after every half-epoch (loss gradient plus L2 term, before α/β
/// scaling).
pub fn train_flip_observed(
    cfg: &TrainConfig,
    data: &Dataset,
    observer: &mut dyn FnMut(usize, Space, &Matrix),
) -> Result<TrainState> {
    run_flip(cfg, data, &flip_context(cfg, data)?, Some(observer))
}

/// `train_flip` or `train_plain` depending on `cfg.flip`.
pub fn train(cfg: &TrainConfig, data: &Dataset) -> Result<TrainState> {
    if cfg.flip {
        train_flip(cfg, data)
    } else {
        train_plain(cfg, data)
    }
}

/// The alternating schedule without config validation, so tests can pass
/// β = 0 (an optimizer step that only sees weight decay).
pub(crate) fn run_flip(
    cfg: &TrainConfig,
    data: &Dataset,
    ctx: &FlipContext,
    mut observer: Option<&mut GradObserver<'_>>,
) -> Result<TrainState> {
    let p1 = ctx.p1().to_vec();
    let mut run = Run::new(cfg, data, data.num_features())?;
    for epoch in 1..=cfg.epochs {
        run.state.epoch = epoch;

        let local = space_params(&run.state.params, &p1, Space::Original)?;
        let (loss_o, grads) = run.gradients(&local, ctx.x_o(), |g| {
            shared_grads(g, &p1, Space::Original, cfg.grad_mode)
        })?;
        observe(&mut observer, epoch, Space::Original, &grads, &run.state.params, cfg.weight_decay)?;
        run.step(grads, cfg.alpha)?;
        let eval = space_params(&run.state.params, &p1, Space::Original)?;
        let logits = models::logits(&cfg.model, &eval, run.propagation(), ctx.x_o())?;
        run.record(Half::Original, loss_o, &logits);

        // W_f is rebuilt from the just-updated shared block.
        let local = space_params(&run.state.params, &p1, Space::Flipped)?;
        let (loss_f, grads) = run.gradients(&local, ctx.x_f(), |g| {
            shared_grads(g, &p1, Space::Flipped, cfg.grad_mode)
        })?;
        observe(&mut observer, epoch, Space::Flipped, &grads, &run.state.params, cfg.weight_decay)?;
        run.step(grads, cfg.beta)?;
        let eval = space_params(&run.state.params, &p1, cfg.eval_space)?;
        let logits = models::logits(&cfg.model, &eval, run.propagation(), ctx.input(cfg.eval_space))?;
        run.record(Half::Flipped, loss_f, &logits);
    }
    Ok(run.state)
}

/// Evaluation-mode softmax of the selected model in the original space.
pub fn predict_proba(cfg: &TrainConfig, data: &Dataset, params: &ModelParams) -> Result<Matrix> {
    let prop_graph;
    let prop = match cfg.model.kind {
        ModelKind::Mlp => Propagation::Identity,
        _ => {
            prop_graph = data.graph.renormalize();
            Propagation::Graph(&prop_graph)
        }
    };
    let dense = data.features.to_dense();
    let logits = if cfg.flip {
        let input = dense.hcat(&Matrix::zeros(data.n(), 1))?;
        let local = space_params(params, &vec![cfg.reflection; data.num_features()], Space::Original)?;
        models::logits(&cfg.model, &local, prop, &input)?
    } else {
        models::logits(&cfg.model, params, prop, &dense)?
    };
    Ok(crate::tensor::softmax(&logits))
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
