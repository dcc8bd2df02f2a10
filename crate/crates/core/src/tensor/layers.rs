use rand::Rng as _;

use super::Matrix;
use crate::error::{Error, Result};
use crate::rng::Rng;

pub fn linear_forward(x: &Matrix, w: &Matrix) -> Result<Matrix> {
    x.matmul(w)
}

/// Returns `(dX, dW)` for `out = X·W`.
pub fn linear_backward(x: &Matrix, w: &Matrix, d_out: &Matrix) -> Result<(Matrix, Matrix)> {
    if x.rows() != d_out.rows() || w.cols() != d_out.cols() || x.cols() != w.rows() {
        return Err(Error::shape(
            "linear_backward",
            format!(
                "X {:?}, W {:?}, dOut {:?}",
                x.shape(),
                w.shape(),
                d_out.shape()
            ),
        ));
    }
    let dw = x.t_matmul(d_out)?;
    let dx = d_out.matmul_t(w)?;
    Ok((dx, dw))
}

pub fn relu_forward(x: &Matrix) -> Matrix {
    let data = x.as_slice().iter().map(|&v| v.max(0.0)).collect();
    Matrix::new(x.rows(), x.cols(), data).expect("same shape")
}

/// Gradient through ReLU given the pre-activation input.
pub fn relu_backward(pre: &Matrix, d_out: &Matrix) -> Result<Matrix> {
    if pre.shape() != d_out.shape() {
        return Err(Error::shape(
            "relu_backward",
            format!("{:?} vs {:?}", pre.shape(), d_out.shape()),
        ));
    }
    let data = pre
        .as_slice()
        .iter()
        .zip(d_out.as_slice())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Matrix::new(pre.rows(), pre.cols(), data)
}

/// Inverted dropout. In training mode returns the output and the per-element
/// multiplier mask (0 or `1/(1-p)`); at eval, or with `p == 0`, the input is
/// returned unchanged with no mask.
pub fn dropout_forward(
    x: &Matrix,
    p: f64,
    rng: &mut Rng,
    training: bool,
) -> Result<(Matrix, Option<Matrix>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "dropout probability {p} outside [0, 1)"
        )));
    }
    if !training || p == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 / (1.0 - p);
    let mask = Matrix::from_fn(x.rows(), x.cols(), |_, _| {
        if rng.random::<f64>() < p {
            0.0
        } else {
            keep
        }
    });
    let out = x
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .map(|(a, m)| a * m)
        .collect();
    Ok((Matrix::new(x.rows(), x.cols(), out)?, Some(mask)))
}

pub fn dropout_backward(d_out: &Matrix, mask: Option<&Matrix>) -> Result<Matrix> {
    match mask {
        None => Ok(d_out.clone()),
        Some(mask) => {
            if mask.shape() != d_out.shape() {
                return Err(Error::shape(
                    "dropout_backward",
                    format!("{:?} vs {:?}", mask.shape(), d_out.shape()),
                ));
            }
            let data = d_out
                .as_slice()
                .iter()
                .zip(mask.as_slice())
                .map(|(g, m)| g * m)
                .collect();
            Matrix::new(d_out.rows(), d_out.cols(), data)
        }
    }
}

/// Row-wise log-softmax, stabilized by subtracting the row maximum.
pub fn log_softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        row.iter_mut().for_each(|v| *v -= lse);
    }
    out
}

pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = log_softmax(logits);
    out.as_mut_slice().iter_mut().for_each(|v| *v = v.exp());
    out
}

/// Mean negative log-likelihood over the rows in `mask` and its gradient
/// with respect to the logits (zero outside the mask).
pub fn logsoftmax_nll(logits: &Matrix, labels: &[usize], mask: &[usize]) -> Result<(f64, Matrix)> {
    if mask.is_empty() {
        return Err(Error::EmptySet("loss mask"));
    }
    if labels.len() != logits.rows() {
        return Err(Error::shape(
            "logsoftmax_nll",
            format!("{} labels for {} rows", labels.len(), logits.rows()),
        ));
    }
    let c = logits.cols();
    let inv = 1.0 / mask.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), c);
    let mut loss = 0.0;
    for &v in mask {
        let y = labels[v];
        if y >= c {
            return Err(Error::InvalidArgument(format!(
                "label {y} of node {v} not below class count {c}"
            )));
        }
        let row = logits.row(v);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|x| (x - max).exp()).sum();
        let lse = sum.ln() + max;
        loss += sum.ln() - (row[y] - max);
        let g = grad.row_mut(v);
        for (j, (gj, x)) in g.iter_mut().zip(row).enumerate() {
            let p = (x - lse).exp();
            *gj = (p - if j == y { 1.0 } else { 0.0 }) * inv;
        }
    }
    Ok((loss * inv, grad))
}

/// Per-row argmax; ties resolve to the lowest class id.
pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    (0..m.rows())
        .map(|r| {
            let mut best = 0;
            for (j, &v) in m.row(r).iter().enumerate().skip(1) {
                if v > m.row(r)[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
