use ndarray::{Array2, Axis, Zip};
use rand::Rng;

use crate::corpus::ClassId;
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;

pub const DEFAULT_HIDDEN: usize = 200;
pub const DEFAULT_DROPOUT: f64 = 0.5;
/// Probabilities are floored at this value before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Two-layer GCN weights: `w0` is `d x h`, `w1` is `h x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
    pub dropout_rate: f64,
}

impl GcnModel {
    pub fn new(w0: Array2<f64>, w1: Array2<f64>, dropout_rate: f64) -> Result<Self> {
        if w0.ncols() != w1.nrows() {
            return Err(Error::Shape(format!(
                "w0 is {}x{} but w1 is {}x{}",
                w0.nrows(),
                w0.ncols(),
                w1.nrows(),
                w1.ncols()
            )));
        }
        if w0.ncols() < 1 {
            return Err(Error::Config("hidden width must be >= 1".into()));
        }
        if w1.ncols() < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::Config(format!("dropout rate {dropout_rate} not in [0, 1)")));
        }
        if !w0.iter().chain(w1.iter()).all(|v| v.is_finite()) {
            return Err(Error::validation("non-finite weight"));
        }
        Ok(Self { w0, w1, dropout_rate })
    }

    /// Glorot-uniform initialization.
    pub fn glorot<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: usize,
        classes: usize,
        dropout_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut init = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-limit..=limit))
        };
        let w0 = init(input_dim, hidden);
        let w1 = init(hidden, classes);
        Self::new(w0, w1, dropout_rate)
    }

    pub fn zeros(input_dim: usize, hidden: usize, classes: usize) -> Result<Self> {
        Self::new(
            Array2::zeros((input_dim, hidden)),
            Array2::zeros((hidden, classes)),
            0.0,
        )
    }

    pub fn input_dim(&self) -> usize {
        self.w0.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w0.ncols()
    }

    pub fn classes(&self) -> usize {
        self.w1.ncols()
    }
}

/// Inverted-dropout scale masks: entries are `0` or `1 / (1 - p)`.
/// `None` means the layer input is used as is.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DropoutMasks {
    pub input: Option<Array2<f64>>,
    pub hidden: Option<Array2<f64>>,
}

impl DropoutMasks {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn sample<R: Rng + ?Sized>(
        rate: f64,
        nodes: usize,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        if rate == 0.0 {
            return Self::none();
        }
        let scale = 1.0 / (1.0 - rate);
        let mut draw = |cols: usize| {
            Array2::from_shape_simple_fn((nodes, cols), || {
                if rng.gen::<f64>() < rate {
                    0.0
                } else {
                    scale
                }
            })
        };
        let input = draw(input_dim);
        let hidden = draw(hidden);
        Self { input: Some(input), hidden: Some(hidden) }
    }
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `Â (X ⊙ M0) W0`.
    pub pre_hidden: Array2<f64>,
    /// `ReLU(pre_hidden)`.
    pub hidden: Array2<f64>,
    /// `hidden ⊙ M1`.
    pub hidden_dropped: Array2<f64>,
    /// Row softmax of `Â (hidden ⊙ M1) W1`.
    pub probs: Array2<f64>,
}

fn check_shapes(model: &GcnModel, adj: &NormalizedAdjacency, x: &Array2<f64>) -> Result<()> {
    let n = adj.matrix.rows();
    if x.nrows() != n {
        return Err(Error::Shape(format!("features have {} rows, graph has {n} nodes", x.nrows())));
    }
    if x.ncols() != model.input_dim() {
        return Err(Error::Shape(format!(
            "features have {} columns, model expects {}",
            x.ncols(),
            model.input_dim()
        )));
    }
    Ok(())
}

fn check_mask(masks: &DropoutMasks, model: &GcnModel, n: usize) -> Result<()> {
    let ok = |m: &Option<Array2<f64>>, cols: usize| m.as_ref().is_none_or(|m| m.dim() == (n, cols));
    if !ok(&masks.input, model.input_dim()) || !ok(&masks.hidden, model.hidden()) {
        return Err(Error::Shape("dropout mask shape does not match layer input".into()));
    }
    Ok(())
}

/// In-place numerically stable row softmax.
pub fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Forward pass. When `training` is set and the model has a non-zero dropout
/// rate, fresh masks are drawn from `rng`; the masks used are returned so the
/// matching backward pass can reuse them.
pub fn forward<R: Rng + ?Sized>(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &Array2<f64>,
    training: bool,
    rng: &mut R,
) -> Result<(ForwardPass, DropoutMasks)> {
    let masks = if training {
        DropoutMasks::sample(model.dropout_rate, x.nrows(), model.input_dim(), model.hidden(), rng)
    } else {
        DropoutMasks::none()
    };
    let pass = forward_with_masks(model, adj, x, &masks)?;
    Ok((pass, masks))
}

/// Deterministic forward pass with the given dropout masks.
pub fn forward_with_masks(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &Array2<f64>,
    masks: &DropoutMasks,
) -> Result<ForwardPass> {
    check_shapes(model, adj, x)?;
    check_mask(masks, model, x.nrows())?;
    let xw = input_times(x, masks.input.as_ref(), &model.w0);
    let pre_hidden = adj.matrix.mul_dense(xw.view())?;
    let hidden = pre_hidden.mapv(|v| v.max(0.0));
    let hidden_dropped = match &masks.hidden {
        Some(m) => &hidden * m,
        None => hidden.clone(),
    };
    let mut probs = adj.matrix.mul_dense(hidden_dropped.dot(&model.w1).view())?;
    softmax_rows(&mut probs);
    Ok(ForwardPass { pre_hidden, hidden, hidden_dropped, probs })
}

/// Inputs with at most this fraction of non-zeros take the sparse path.
const SPARSE_INPUT_DENSITY: f64 = 0.25;

fn is_sparse(x: &Array2<f64>) -> bool {
    let nnz = x.iter().filter(|&&v| v != 0.0).count();
    (nnz as f64) <= SPARSE_INPUT_DENSITY * x.len() as f64
}

/// `(X ⊙ M) W` without materializing `X ⊙ M`; skips zero inputs when `X` is
/// mostly zeros (TF-IDF and one-hot blocks).
fn input_times(x: &Array2<f64>, mask: Option<&Array2<f64>>, w: &Array2<f64>) -> Array2<f64> {
    if !is_sparse(x) {
        return match mask {
            Some(m) => (x * m).dot(w),
            None => x.dot(w),
        };
    }
    let mut out = Array2::zeros((x.nrows(), w.ncols()));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        for (j, &v) in x.row(i).iter().enumerate() {
            let v = match mask {
                Some(m) => v * m[[i, j]],
                None => v,
            };
            if v != 0.0 {
                row.scaled_add(v, &w.row(j));
            }
        }
    }
    out
}

/// `(X ⊙ M)ᵀ G`, sparse-aware like [`input_times`].
fn input_t_times(x: &Array2<f64>, mask: Option<&Array2<f64>>, g: &Array2<f64>) -> Array2<f64> {
    if !is_sparse(x) {
        return match mask {
            Some(m) => (x * m).t().dot(g),
            None => x.t().dot(g),
        };
    }
    let mut out = Array2::zeros((x.ncols(), g.ncols()));
    for i in 0..x.nrows() {
        for (j, &v) in x.row(i).iter().enumerate() {
            let v = match mask {
                Some(m) => v * m[[i, j]],
                None => v,
            };
            if v != 0.0 {
                out.row_mut(j).scaled_add(v, &g.row(i));
            }
        }
    }
    out
}

fn check_mask_nodes(probs: &Array2<f64>, labels: &[ClassId], mask: &[usize]) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::EmptyInput("loss mask selects no nodes".into()));
    }
    if labels.len() != probs.nrows() {
        return Err(Error::Shape(format!("{} labels for {} nodes", labels.len(), probs.nrows())));
    }
    for &i in mask {
        if i >= probs.nrows() || labels[i] >= probs.ncols() {
            return Err(Error::Shape(format!("masked node {i} or its label is out of range")));
        }
    }
    Ok(())
}

/// Mean cross-entropy over `mask` nodes.
pub fn loss(probs: &Array2<f64>, labels: &[ClassId], mask: &[usize]) -> Result<f64> {
    check_mask_nodes(probs, labels, mask)?;
    let total: f64 = mask
        .iter()
        .map(|&i| -probs[[i, labels[i]]].max(PROB_FLOOR).ln())
        .sum();
    Ok(total / mask.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.w0.iter().chain(self.w1.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Exact gradients of [`loss`] with respect to both weight matrices for the
/// realized dropout pattern `masks`. `Â` is assumed symmetric.
pub fn backward(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &Array2<f64>,
    labels: &[ClassId],
    mask: &[usize],
    masks: &DropoutMasks,
) -> Result<Gradients> {
    let pass = forward_with_masks(model, adj, x, masks)?;
    backward_from(model, adj, x, labels, mask, masks, &pass)
}

pub(crate) fn backward_from(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &Array2<f64>,
    labels: &[ClassId],
    mask: &[usize],
    masks: &DropoutMasks,
    pass: &ForwardPass,
) -> Result<Gradients> {
    check_mask_nodes(&pass.probs, labels, mask)?;
    let inv_m = 1.0 / mask.len() as f64;
    let mut d_logits = Array2::<f64>::zeros(pass.probs.raw_dim());
    for &i in mask {
        let y = labels[i];
        if pass.probs[[i, y]] < PROB_FLOOR {
            // The floored term is constant in the weights.
            continue;
        }
        let mut row = d_logits.row_mut(i);
        row.scaled_add(inv_m, &pass.probs.row(i));
        row[y] -= inv_m;
    }

    let g2 = adj.matrix.mul_dense(d_logits.view())?;
    let w1 = pass.hidden_dropped.t().dot(&g2);

    let mut d_hidden = g2.dot(&model.w1.t());
    if let Some(m) = &masks.hidden {
        d_hidden *= m;
    }
    Zip::from(&mut d_hidden)
        .and(&pass.pre_hidden)
        .for_each(|d, &z| if z <= 0.0 { *d = 0.0 });
    let g1 = adj.matrix.mul_dense(d_hidden.view())?;
    let w0 = input_t_times(x, masks.input.as_ref(), &g1);
    Ok(Gradients { w0, w1 })
}

/// Per-node argmax class (ties go to the lowest id), its probability, and the
/// full probability and hidden matrices.
#[derive(Debug, Clone)]
pub struct Predictions {
    pub classes: Vec<ClassId>,
    pub confidence: Vec<f64>,
    pub probs: Array2<f64>,
    pub hidden: Array2<f64>,
}

pub fn argmax_row(row: ndarray::ArrayView1<'_, f64>) -> (ClassId, f64) {
    let mut best = (0, row[0]);
    for (k, &p) in row.iter().enumerate().skip(1) {
        if p > best.1 {
            best = (k, p);
        }
    }
    best
}

pub fn predict(model: &GcnModel, adj: &NormalizedAdjacency, x: &Array2<f64>) -> Result<Predictions> {
    let pass = forward_with_masks(model, adj, x, &DropoutMasks::none())?;
    let (classes, confidence) = pass
        .probs
        .axis_iter(Axis(0))
        .map(argmax_row)
        .unzip();
    Ok(Predictions { classes, confidence, probs: pass.probs, hidden: pass.hidden })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, CsrMatrix};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn isolated(n: usize) -> NormalizedAdjacency {
        normalize_adjacency(&CsrMatrix::from_triplets(n, n, []).unwrap())
    }

    #[test]
    fn sparse_input_path_matches_dense_products() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Array2::from_shape_fn((9, 12), |_| if rng.gen_bool(0.15) { rng.gen_range(-2.0..2.0) } else { 0.0 });
        assert!(is_sparse(&x));
        let m = Array2::from_shape_fn((9, 12), |_| if rng.gen_bool(0.5) { 2.0 } else { 0.0 });
        let w = Array2::from_shape_fn((12, 4), |_| rng.gen_range(-1.0..1.0));
        let g = Array2::from_shape_fn((9, 4), |_| rng.gen_range(-1.0..1.0));
        let close = |a: &Array2<f64>, b: &Array2<f64>| a.iter().zip(b).all(|(p, q)| (p - q).abs() < 1e-12);
        assert!(close(&input_times(&x, None, &w), &x.dot(&w)));
        assert!(close(&input_times(&x, Some(&m), &w), &(&x * &m).dot(&w)));
        assert!(close(&input_t_times(&x, None, &g), &x.t().dot(&g)));
        assert!(close(&input_t_times(&x, Some(&m), &g), &(&x * &m).t().dot(&g)));
    }

    #[test]
    fn zero_weights_give_uniform_probs() {
        let model = GcnModel::zeros(3, 4, 5).unwrap();
        let x = Array2::ones((2, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (pass, _) = forward(&model, &isolated(2), &x, false, &mut rng).unwrap();
        for &p in pass.probs.iter() {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn single_node_hand_computation() {
        // x = [1, 2]; W0 = [[0.5], [-0.25]] -> z = 0 -> ReLU 0 is degenerate,
        // so use W0 = [[0.5], [0.25]] -> z = 1.0, h = 1.0.
        // W1 = [[0.3, -0.2]] -> logits (0.3, -0.2).
        let model = GcnModel::new(array![[0.5], [0.25]], array![[0.3, -0.2]], 0.0).unwrap();
        let x = array![[1.0, 2.0]];
        let pass = forward_with_masks(&model, &isolated(1), &x, &DropoutMasks::none()).unwrap();
        let e0 = 0.3f64.exp();
        let e1 = (-0.2f64).exp();
        assert!((pass.hidden[[0, 0]] - 1.0).abs() < 1e-15);
        assert!((pass.probs[[0, 0]] - e0 / (e0 + e1)).abs() < 1e-15);
        assert!((pass.probs[[0, 1]] - e1 / (e0 + e1)).abs() < 1e-15);
    }

    #[test]
    fn dropout_zero_training_matches_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = GcnModel::glorot(4, 3, 2, 0.0, &mut rng).unwrap();
        let adj = normalize_adjacency(&CsrMatrix::symmetric(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap());
        let x = Array2::from_shape_fn((3, 4), |(i, j)| (i * 4 + j) as f64 / 10.0);
        let (train, _) = forward(&model, &adj, &x, true, &mut rng).unwrap();
        let (eval, _) = forward(&model, &adj, &x, false, &mut rng).unwrap();
        assert_eq!(train.probs, eval.probs);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let model = GcnModel::zeros(3, 2, 2).unwrap();
        let x = Array2::ones((2, 4));
        assert!(forward_with_masks(&model, &isolated(2), &x, &DropoutMasks::none()).is_err());
        let x = Array2::ones((3, 3));
        assert!(forward_with_masks(&model, &isolated(2), &x, &DropoutMasks::none()).is_err());
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(GcnModel::new(Array2::zeros((2, 2)), Array2::zeros((3, 2)), 0.0).is_err());
        assert!(GcnModel::new(Array2::zeros((2, 2)), Array2::zeros((2, 1)), 0.0).is_err());
        assert!(GcnModel::new(Array2::zeros((2, 2)), Array2::zeros((2, 2)), 1.0).is_err());
    }

    #[test]
    fn loss_examples() {
        let uniform = Array2::from_elem((3, 4), 0.25);
        let l = loss(&uniform, &[0, 1, 3], &[0, 1, 2]).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-15);

        let perfect = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(loss(&perfect, &[0, 1], &[0, 1]).unwrap() <= 1e-9);

        let probs = array![[0.8, 0.2], [0.5, 0.5]];
        let l = loss(&probs, &[0, 1], &[0, 1]).unwrap();
        assert!((l - -(0.8f64.ln() + 0.5f64.ln()) / 2.0).abs() < 1e-15);
        assert!((l - 0.4581).abs() < 1e-4);

        let zero = array![[0.0, 1.0]];
        assert!(loss(&zero, &[0], &[0]).unwrap().is_finite());
        assert!(loss(&probs, &[0, 1], &[]).is_err());
    }

    #[test]
    fn correct_one_hot_has_no_gradient() {
        // Huge logit gap so softmax saturates to exactly one-hot.
        let model = GcnModel::new(array![[1.0]], array![[800.0, 0.0]], 0.0).unwrap();
        let x = array![[1.0]];
        let g = backward(&model, &isolated(1), &x, &[0], &[0], &DropoutMasks::none()).unwrap();
        assert!(g.norm() <= 1e-8);
    }

    #[test]
    fn predict_tie_and_argmax() {
        assert_eq!(argmax_row(array![0.25, 0.25, 0.25, 0.25].view()), (0, 0.25));
        assert_eq!(argmax_row(array![0.1, 0.7, 0.2].view()), (1, 0.7));
        let model = GcnModel::zeros(2, 2, 3).unwrap();
        let p = predict(&model, &isolated(2), &Array2::ones((2, 2))).unwrap();
        assert_eq!(p.classes, [0, 0]);
        assert!(p.confidence.iter().all(|&c| (c - 1.0 / 3.0).abs() < 1e-15));
    }
}
