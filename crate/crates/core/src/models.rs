//! MLP, two-layer GCN and APPNP with explicit forward tapes and hand-written
//! backward passes.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NormalizedGraph;
use crate::rng::Rng;
use crate::tensor::{
    argmax_rows, dropout_backward, dropout_forward, relu_backward, relu_forward, Matrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Gcn,
    Appnp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Mlp, ModelKind::Gcn, ModelKind::Appnp];
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(ModelKind::Mlp),
            "gcn" => Ok(ModelKind::Gcn),
            "appnp" => Ok(ModelKind::Appnp),
            other => Err(Error::InvalidArgument(format!(
                "unknown model '{other}' (expected mlp, gcn or appnp)"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Gcn => "gcn",
            ModelKind::Appnp => "appnp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hidden: usize,
    /// Dropout on the hidden activations, training only.
    pub dropout: f64,
    /// APPNP power iterations.
    pub appnp_k: usize,
    /// APPNP teleport probability.
    pub appnp_teleport: f64,
    pub bias: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Gcn,
            hidden: 64,
            dropout: 0.5,
            appnp_k: 10,
            appnp_teleport: 0.1,
            bias: false,
        }
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::InvalidArgument("hidden dimension must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.kind == ModelKind::Appnp {
            if self.appnp_k == 0 {
                return Err(Error::InvalidArgument("APPNP needs K >= 1".into()));
            }
            // τ = 1 is allowed: it reduces APPNP to the MLP head.
            if !(self.appnp_teleport > 0.0 && self.appnp_teleport <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "APPNP teleport {} outside (0, 1]",
                    self.appnp_teleport
                )));
            }
        }
        Ok(())
    }
}

/// Trainable weights. `w1` is `in_dim x hidden`, `w2` is `hidden x classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub w1: Matrix,
    pub w2: Matrix,
    pub b1: Option<Vec<f64>>,
    pub b2: Option<Vec<f64>>,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(spec: &ModelSpec, in_dim: usize, classes: usize, rng: &mut Rng) -> Self {
        let mut glorot = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            Matrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
        };
        let w1 = glorot(in_dim, spec.hidden);
        let w2 = glorot(spec.hidden, classes);
        Self {
            w1,
            w2,
            b1: spec.bias.then(|| vec![0.0; spec.hidden]),
            b2: spec.bias.then(|| vec![0.0; classes]),
        }
    }

    /// All-zero parameters of the same shapes.
    pub fn zeros_like(&self) -> Self {
        Self {
            w1: Matrix::zeros(self.w1.rows(), self.w1.cols()),
            w2: Matrix::zeros(self.w2.rows(), self.w2.cols()),
            b1: self.b1.as_ref().map(|b| vec![0.0; b.len()]),
            b2: self.b2.as_ref().map(|b| vec![0.0; b.len()]),
        }
    }

    /// Tensors in a fixed order: w1, w2, then present biases.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t = vec![self.w1.as_slice(), self.w2.as_slice()];
        t.extend(self.b1.as_deref());
        t.extend(self.b2.as_deref());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = vec![self.w1.as_mut_slice(), self.w2.as_mut_slice()];
        t.extend(self.b1.as_deref_mut());
        t.extend(self.b2.as_deref_mut());
        t
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }

    /// Flat copy of all parameters, in `tensors` order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    /// Inverse of `flatten` for a template with the same shapes.
    pub fn unflatten(&self, flat: &[f64]) -> Self {
        let mut out = self.clone();
        let mut offset = 0;
        for t in out.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Message-passing operator used by GCN and APPNP.
#[derive(Debug, Clone, Copy)]
pub enum Propagation<'a> {
    Identity,
    Graph(&'a NormalizedGraph),
}

impl Propagation<'_> {
    pub fn apply(&self, h: &Matrix) -> Result<Matrix> {
        match self {
            Propagation::Identity => Ok(h.clone()),
            Propagation::Graph(g) => g.spmm(h),
        }
    }
}

/// Intermediates recorded by `forward` for `backward`.
pub struct Tape<'a> {
    kind: ModelKind,
    params: &'a ModelParams,
    x_in: &'a Matrix,
    prop: Propagation<'a>,
    teleport: f64,
    k: usize,
    /// First-layer pre-activation.
    z1: Matrix,
    dropout_mask: Option<Matrix>,
    /// Hidden activations after dropout.
    hidden: Matrix,
}

impl Tape<'_> {
    /// Pre-activation of the first layer (after propagation for GCN).
    pub fn first_layer_preactivation(&self) -> &Matrix {
        &self.z1
    }

    /// Hidden representation fed to the second projection.
    pub fn hidden(&self) -> &Matrix {
        &self.hidden
    }
}

fn add_bias(m: &mut Matrix, b: Option<&Vec<f64>>) -> Result<()> {
    match b {
        Some(b) => m.add_row_vector(b),
        None => Ok(()),
    }
}

/// Logits of `spec` on `x_in`; log-softmax is left to the loss.
pub fn forward<'a>(
    spec: &ModelSpec,
    params: &'a ModelParams,
    prop: Propagation<'a>,
    x_in: &'a Matrix,
    training: bool,
    rng: &mut Rng,
) -> Result<(Matrix, Tape<'a>)> {
    if x_in.cols() != params.w1.rows() {
        return Err(Error::shape(
            "forward",
            format!(
                "input has {} columns, first weight has {} rows",
                x_in.cols(),
                params.w1.rows()
            ),
        ));
    }
    if params.w2.rows() != params.w1.cols() {
        return Err(Error::shape(
            "forward",
            format!("w1 {:?} and w2 {:?}", params.w1.shape(), params.w2.shape()),
        ));
    }
    let projected = x_in.matmul(&params.w1)?;
    let mut z1 = match spec.kind {
        ModelKind::Gcn => prop.apply(&projected)?,
        ModelKind::Mlp | ModelKind::Appnp => projected,
    };
    add_bias(&mut z1, params.b1.as_ref())?;
    let h = relu_forward(&z1);
    let (hidden, dropout_mask) = dropout_forward(&h, spec.dropout, rng, training)?;
    let p2 = hidden.matmul(&params.w2)?;
    let logits = match spec.kind {
        ModelKind::Mlp => {
            let mut out = p2;
            add_bias(&mut out, params.b2.as_ref())?;
            out
        }
        ModelKind::Gcn => {
            let mut out = prop.apply(&p2)?;
            add_bias(&mut out, params.b2.as_ref())?;
            out
        }
        ModelKind::Appnp => {
            let mut z0 = p2;
            add_bias(&mut z0, params.b2.as_ref())?;
            let tau = spec.appnp_teleport;
            let mut z = z0.clone();
            for _ in 0..spec.appnp_k {
                let mut next = prop.apply(&z)?;
                next.scale(1.0 - tau);
                next.axpy(tau, &z0)?;
                z = next;
            }
            z
        }
    };
    let tape = Tape {
        kind: spec.kind,
        params,
        x_in,
        prop,
        teleport: spec.appnp_teleport,
        k: spec.appnp_k,
        z1,
        dropout_mask,
        hidden,
    };
    Ok((logits, tape))
}

/// Exact parameter gradients given `dL/dlogits`. The propagation operator is
/// symmetric, so its transpose is applied with the same product.
pub fn backward(spec: &ModelSpec, tape: &Tape<'_>, d_logits: &Matrix) -> Result<ModelParams> {
    if spec.kind != tape.kind
        || (spec.kind == ModelKind::Appnp
            && (spec.appnp_k != tape.k || spec.appnp_teleport != tape.teleport))
    {
        return Err(Error::StaleTape(format!(
            "tape recorded for {} but backward requested for {}",
            tape.kind, spec.kind
        )));
    }
    let params = tape.params;
    if d_logits.shape() != (tape.x_in.rows(), params.w2.cols()) {
        return Err(Error::StaleTape(format!(
            "upstream gradient {:?} does not match logits {:?}",
            d_logits.shape(),
            (tape.x_in.rows(), params.w2.cols())
        )));
    }

    let (d_p2, db2) = match spec.kind {
        ModelKind::Mlp => (d_logits.clone(), d_logits.column_sums()),
        ModelKind::Gcn => (tape.prop.apply(d_logits)?, d_logits.column_sums()),
        ModelKind::Appnp => {
            let tau = tape.teleport;
            let mut acc = Matrix::zeros(d_logits.rows(), d_logits.cols());
            let mut g = d_logits.clone();
            for _ in 0..tape.k {
                acc.axpy(tau, &g)?;
                let mut next = tape.prop.apply(&g)?;
                next.scale(1.0 - tau);
                g = next;
            }
            acc.add_assign(&g)?;
            let db2 = acc.column_sums();
            (acc, db2)
        }
    };
    let dw2 = tape.hidden.t_matmul(&d_p2)?;
    let d_hidden = d_p2.matmul_t(&params.w2)?;
    let d_h = dropout_backward(&d_hidden, tape.dropout_mask.as_ref())?;
    let d_z1 = relu_backward(&tape.z1, &d_h)?;
    let db1 = d_z1.column_sums();
    let d_proj = match spec.kind {
        ModelKind::Gcn => tape.prop.apply(&d_z1)?,
        ModelKind::Mlp | ModelKind::Appnp => d_z1,
    };
    let dw1 = tape.x_in.t_matmul(&d_proj)?;
    Ok(ModelParams {
        w1: dw1,
        w2: dw2,
        b1: params.b1.as_ref().map(|_| db1),
        b2: params.b2.as_ref().map(|_| db2),
    })
}

/// Eval-mode logits.
pub fn logits(
    spec: &ModelSpec,
    params: &ModelParams,
    prop: Propagation<'_>,
    x_in: &Matrix,
) -> Result<Matrix> {
    // The RNG is never consumed with training = false.
    let mut rng = crate::rng::stream(0, crate::rng::Stream::Dropout);
    Ok(forward(spec, params, prop, x_in, false, &mut rng)?.0)
}

/// Eval-mode class predictions, ties to the lowest class id.
pub fn predict(
    spec: &ModelSpec,
    params: &ModelParams,
    prop: Propagation<'_>,
    x_in: &Matrix,
) -> Result<Vec<usize>> {
    Ok(argmax_rows(&logits(spec, params, prop, x_in)?))
}

/// Share of `nodes` whose prediction equals the label; 0 for an empty set.
pub fn accuracy(pred: &[usize], labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes.iter().filter(|&&v| pred[v] == labels[v]).count();
    hits as f64 / nodes.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::rng::{stream, Stream};
    use crate::tensor::{fd_gradcheck, logsoftmax_nll};

    fn random_graph(n: usize, seed: u64) -> NormalizedGraph {
        let mut rng = stream(seed, Stream::Edges);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < 0.4 {
                    edges.push((u, v));
                }
            }
        }
        Graph::from_edges(&edges, n).unwrap().renormalize()
    }

    fn setup(kind: ModelKind, bias: bool, seed: u64) -> (ModelSpec, ModelParams, Matrix) {
        let spec = ModelSpec {
            kind,
            hidden: 5,
            dropout: 0.0,
            appnp_k: 3,
            bias,
            ..Default::default()
        };
        let mut rng = stream(seed, Stream::Init);
        let mut params = ModelParams::init(&spec, 4, 3, &mut rng);
        if let Some(b) = params.b1.as_mut() {
            b.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
        if let Some(b) = params.b2.as_mut() {
            b.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
        let x = Matrix::from_fn(6, 4, |_, _| rng.random_range(0.0..1.0));
        (spec, params, x)
    }

    fn dense_gcn(a: &Matrix, x: &Matrix, p: &ModelParams) -> Matrix {
        let h = relu_forward(&a.matmul(&x.matmul(&p.w1).unwrap()).unwrap());
        a.matmul(&h.matmul(&p.w2).unwrap()).unwrap()
    }

    #[test]
    fn gcn_identity_equals_mlp() {
        let (spec, params, x) = setup(ModelKind::Gcn, true, 1);
        let mlp = ModelSpec {
            kind: ModelKind::Mlp,
            ..spec.clone()
        };
        let eye = NormalizedGraph::identity(6);
        let a = logits(&spec, &params, Propagation::Graph(&eye), &x).unwrap();
        let b = logits(&mlp, &params, Propagation::Identity, &x).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn appnp_teleport_one_equals_mlp() {
        let (mut spec, params, x) = setup(ModelKind::Appnp, false, 2);
        spec.appnp_k = 1;
        spec.appnp_teleport = 1.0;
        let g = random_graph(6, 3);
        let mlp = ModelSpec {
            kind: ModelKind::Mlp,
            ..spec.clone()
        };
        let a = logits(&spec, &params, Propagation::Graph(&g), &x).unwrap();
        let b = logits(&mlp, &params, Propagation::Identity, &x).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn gcn_matches_dense_oracle() {
        let (spec, params, x) = setup(ModelKind::Gcn, false, 4);
        let g = random_graph(6, 5);
        let out = logits(&spec, &params, Propagation::Graph(&g), &x).unwrap();
        assert!(out.max_abs_diff(&dense_gcn(&g.to_dense(), &x, &params)) < 1e-10);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let g = random_graph(6, 6);
        let labels = [0, 1, 2, 0, 1, 2];
        let mask = [0, 1, 3, 5];
        for kind in ModelKind::ALL {
            for bias in [false, true] {
                let (spec, params, x) = setup(kind, bias, 7);
                let prop = Propagation::Graph(&g);
                let mut rng = stream(0, Stream::Dropout);
                let (out, tape) = forward(&spec, &params, prop, &x, true, &mut rng).unwrap();
                let (_, dl) = logsoftmax_nll(&out, &labels, &mask).unwrap();
                let grads = backward(&spec, &tape, &dl).unwrap();
                let loss = |flat: &[f64]| {
                    let p = params.unflatten(flat);
                    let out = logits(&spec, &p, prop, &x).unwrap();
                    logsoftmax_nll(&out, &labels, &mask).unwrap().0
                };
                let err = fd_gradcheck(loss, &params.flatten(), &grads.flatten(), 1e-5);
                assert!(err < 1e-4, "{kind} bias={bias}: {err}");
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let (spec, params, x) = setup(ModelKind::Appnp, true, 8);
        let g = random_graph(6, 9);
        let mut rng = stream(0, Stream::Dropout);
        let (_, tape) = forward(&spec, &params, Propagation::Graph(&g), &x, true, &mut rng).unwrap();
        let grads = backward(&spec, &tape, &Matrix::zeros(6, 3)).unwrap();
        assert!(grads.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_tape_rejected() {
        let (spec, params, x) = setup(ModelKind::Mlp, false, 10);
        let mut rng = stream(0, Stream::Dropout);
        let (_, tape) = forward(&spec, &params, Propagation::Identity, &x, true, &mut rng).unwrap();
        let gcn = ModelSpec::new(ModelKind::Gcn);
        assert!(matches!(
            backward(&gcn, &tape, &Matrix::zeros(6, 3)),
            Err(Error::StaleTape(_))
        ));
        assert!(matches!(
            backward(&spec, &tape, &Matrix::zeros(5, 3)),
            Err(Error::StaleTape(_))
        ));
    }

    #[test]
    fn forward_shape_mismatch() {
        let (spec, params, _) = setup(ModelKind::Mlp, false, 11);
        let mut rng = stream(0, Stream::Dropout);
        let bad = Matrix::zeros(6, 5);
        assert!(forward(&spec, &params, Propagation::Identity, &bad, false, &mut rng).is_err());
    }

    #[test]
    fn predict_and_accuracy() {
        let spec = ModelSpec {
            kind: ModelKind::Mlp,
            hidden: 1,
            dropout: 0.0,
            ..Default::default()
        };
        // Identity-like single hidden unit: logits = relu(x0) * w2.
        let params = ModelParams {
            w1: Matrix::from_rows(&[[1.0]]).unwrap(),
            w2: Matrix::from_rows(&[[1.0, 2.0, 0.0]]).unwrap(),
            b1: None,
            b2: None,
        };
        let x = Matrix::from_rows(&[[1.0], [0.0], [2.0]]).unwrap();
        let pred = predict(&spec, &params, Propagation::Identity, &x).unwrap();
        // row 1 has all-zero logits: tie -> class 0
        assert_eq!(pred, vec![1, 0, 1]);
        assert_eq!(accuracy(&pred, &[1, 0, 2], &[0, 1, 2]), 2.0 / 3.0);
    }

    #[test]
    fn eval_forward_is_bitwise_deterministic() {
        let (spec, params, x) = setup(ModelKind::Appnp, true, 12);
        let g = random_graph(6, 13);
        let a = logits(&spec, &params, Propagation::Graph(&g), &x).unwrap();
        let b = logits(&spec, &params, Propagation::Graph(&g), &x).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }
}
