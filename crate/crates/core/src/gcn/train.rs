use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::model::{
    argmax_row, backward_from, forward, forward_with_masks, loss, DropoutMasks, GcnModel,
    DEFAULT_DROPOUT, DEFAULT_HIDDEN,
};
use crate::corpus::ClassId;
use crate::error::{Error, Result};
use crate::eval::{accuracy, make_split, weighted_f1, SplitSpec};
use crate::graph::{normalize, AttributedGraph, GraphKind, NodeRole, NormalizedAdjacency};

pub const DEFAULT_EPOCHS: usize = 500;

/// Which weights a finished run reports and exports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Weights from the epoch with the highest validation accuracy (ties go to
    /// lower validation loss, then to the earlier epoch).
    #[default]
    BestVal,
    FinalEpoch,
}

impl std::str::FromStr for Selection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best-val" | "best_val" | "best" => Ok(Selection::BestVal),
            "final" | "final-epoch" | "last" => Ok(Selection::FinalEpoch),
            _ => Err(Error::Config(format!("unknown selection {s:?} (best-val or final)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: usize,
    pub dropout_rate: f64,
    pub adam: AdamConfig,
    pub selection: Selection,
}

impl TrainConfig {
    /// Defaults with the learning rate for `kind`.
    pub fn for_graph(kind: GraphKind) -> Self {
        Self { learning_rate: kind.default_learning_rate(), ..Self::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate {} not in [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            epochs: DEFAULT_EPOCHS,
            seed: 0,
            hidden: DEFAULT_HIDDEN,
            dropout_rate: DEFAULT_DROPOUT,
            adam: AdamConfig::default(),
            selection: Selection::BestVal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Val,
    Test,
    Excluded,
}

/// Per-node split assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMasks {
    pub roles: Vec<SplitRole>,
}

impl NodeMasks {
    /// Splits the paper nodes of `graph` with `spec`; word nodes are excluded.
    pub fn for_graph(graph: &AttributedGraph, spec: &SplitSpec) -> Result<Self> {
        let papers = graph.paper_nodes();
        let split = make_split(papers.len(), spec)?;
        let mut roles = vec![SplitRole::Excluded; graph.n()];
        for (part, role) in [(&split.train, SplitRole::Train), (&split.val, SplitRole::Val), (&split.test, SplitRole::Test)] {
            for &pos in part {
                roles[papers[pos]] = role;
            }
        }
        Ok(Self { roles })
    }

    pub fn nodes(&self, role: SplitRole) -> Vec<usize> {
        (0..self.roles.len()).filter(|&i| self.roles[i] == role).collect()
    }

    pub fn train(&self) -> Vec<usize> {
        self.nodes(SplitRole::Train)
    }

    pub fn val(&self) -> Vec<usize> {
        self.nodes(SplitRole::Val)
    }

    pub fn test(&self) -> Vec<usize> {
        self.nodes(SplitRole::Test)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub test_weighted_f1: f64,
}

/// A finished training run.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub config: TrainConfig,
    pub masks: NodeMasks,
    /// Training loss of each epoch, computed before that epoch's update.
    pub loss_trace: Vec<f64>,
    /// Validation accuracy after each epoch's update.
    pub val_accuracy_trace: Vec<f64>,
    /// 1-based epoch whose weights are in `model`.
    pub selected_epoch: usize,
    /// Weights chosen by `config.selection`.
    pub model: GcnModel,
    pub final_model: GcnModel,
    /// Metrics of `model`.
    pub metrics: RunMetrics,
}

fn eval_pass(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    graph: &AttributedGraph,
    nodes: &[usize],
) -> Result<(f64, f64)> {
    let pass = forward_with_masks(model, adj, &graph.features.values, &DropoutMasks::none())?;
    let pred: Vec<ClassId> = nodes.iter().map(|&i| argmax_row(pass.probs.row(i)).0).collect();
    let truth: Vec<ClassId> = nodes.iter().map(|&i| graph.labels[i]).collect();
    Ok((accuracy(&pred, &truth)?, loss(&pass.probs, &graph.labels, nodes)?))
}

pub(crate) fn split_metrics(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    graph: &AttributedGraph,
    masks: &NodeMasks,
) -> Result<RunMetrics> {
    let preds = super::predict(model, adj, &graph.features.values)?;
    let score = |nodes: Vec<usize>| -> Result<(f64, f64)> {
        let pred: Vec<ClassId> = nodes.iter().map(|&i| preds.classes[i]).collect();
        let truth: Vec<ClassId> = nodes.iter().map(|&i| graph.labels[i]).collect();
        Ok((accuracy(&pred, &truth)?, weighted_f1(&pred, &truth)?))
    };
    let (train_accuracy, _) = score(masks.train())?;
    let (val_accuracy, _) = score(masks.val())?;
    let (test_accuracy, test_weighted_f1) = score(masks.test())?;
    Ok(RunMetrics { train_accuracy, val_accuracy, test_accuracy, test_weighted_f1 })
}

/// Full-batch Adam training on `graph` with a split drawn from `config.seed`.
pub fn train(graph: &AttributedGraph, config: &TrainConfig) -> Result<TrainRun> {
    let adj = normalize(graph);
    let masks = NodeMasks::for_graph(graph, &SplitSpec::with_seed(config.seed))?;
    train_with(graph, &adj, config, masks)
}

/// Training with an explicit normalized adjacency and split.
pub fn train_with(
    graph: &AttributedGraph,
    adj: &NormalizedAdjacency,
    config: &TrainConfig,
    masks: NodeMasks,
) -> Result<TrainRun> {
    config.validate()?;
    if masks.roles.len() != graph.n() {
        return Err(Error::Shape(format!("{} mask entries for {} nodes", masks.roles.len(), graph.n())));
    }
    if let Some(i) = (0..graph.n()).find(|&i| graph.roles[i] == NodeRole::Word && masks.roles[i] != SplitRole::Excluded) {
        return Err(Error::validation(format!("word node {i} must be excluded from every split")));
    }
    let train_nodes = masks.train();
    let val_nodes = masks.val();
    if train_nodes.is_empty() {
        return Err(Error::EmptyInput("no labeled training nodes".into()));
    }
    let classes = graph.paper_class_count();
    if classes < 2 {
        return Err(Error::validation(format!("need at least 2 paper classes, graph has {classes}")));
    }

    let x = &graph.features.values;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = GcnModel::glorot(x.ncols(), config.hidden, classes, config.dropout_rate, &mut rng)?;
    let mut adam = Adam::new(
        config.learning_rate,
        config.adam,
        &[model.w0.dim(), model.w1.dim()],
    );

    let mut loss_trace = Vec::with_capacity(config.epochs);
    let mut val_accuracy_trace = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, f64, usize, GcnModel)> = None;
    for epoch in 1..=config.epochs {
        let (pass, dropout) = forward(&model, adj, x, true, &mut rng)?;
        loss_trace.push(loss(&pass.probs, &graph.labels, &train_nodes)?);
        let grads = backward_from(&model, adj, x, &graph.labels, &train_nodes, &dropout, &pass)?;
        adam.update(&mut [&mut model.w0, &mut model.w1], &[&grads.w0, &grads.w1]);

        let (val_acc, val_loss) = if val_nodes.is_empty() {
            (0.0, 0.0)
        } else {
            eval_pass(&model, adj, graph, &val_nodes)?
        };
        val_accuracy_trace.push(val_acc);
        let improves = match &best {
            None => true,
            Some((acc, l, _, _)) => val_acc > *acc || (val_acc == *acc && val_loss < *l),
        };
        if improves && config.selection == Selection::BestVal {
            best = Some((val_acc, val_loss, epoch, model.clone()));
        }
        log::trace!("epoch {epoch}: loss {:.6} val_acc {val_acc:.4}", loss_trace[epoch - 1]);
    }

    let (selected_epoch, selected) = match best {
        Some((_, _, epoch, m)) => (epoch, m),
        None => (config.epochs, model.clone()),
    };
    let metrics = split_metrics(&selected, adj, graph, &masks)?;
    Ok(TrainRun {
        config: config.clone(),
        masks,
        loss_trace,
        val_accuracy_trace,
        selected_epoch,
        model: selected,
        final_model: model,
        metrics,
    })
}
