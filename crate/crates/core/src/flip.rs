//! Two-space view of the first projection.
//!
//! The original space pads features and the first hyperplane with a zero
//! column/row: `X_o = [X | 0]`, `W_o = [W; 0]`. The flipped space reflects the
//! features through `p1` and pads with ones, `X_f = [2p1 - X | 1]`, and pads
//! the hyperplane with `-2d` where `d_j = Σ_i p1_i W_ij`, so that
//! `X_f W_f = -X_o W_o` row by row. Negating the flipped first-layer output
//! therefore reproduces the original hidden state exactly, and all later
//! layers are shared unchanged.
//!
//! Only the `F x F'` block `W` is a trainable parameter; both padded planes are
//! derived from it on demand.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::models::{ModelParams, Propagation};
use crate::tensor::{relu_forward, Matrix};

/// Centre of the unit feature hypercube.
pub const DEFAULT_REFLECTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Original,
    Flipped,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::Original => "original",
            Space::Flipped => "flipped",
        })
    }
}

impl FromStr for Space {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" | "o" => Ok(Space::Original),
            "flipped" | "f" => Ok(Space::Flipped),
            other => Err(Error::InvalidArgument(format!(
                "unknown space '{other}' (expected original or flipped)"
            ))),
        }
    }
}

/// How the flipped-space gradient of the padded plane maps back onto `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradMode {
    /// Keep the first `F` rows of `∇W_f`; the pad-row gradient is dropped.
    #[default]
    Direct,
    /// Exact derivative of the shared parameterization: the pad-row gradient
    /// flows back through `d = p1ᵀW`.
    ChainThroughD,
}

impl fmt::Display for GradMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradMode::Direct => "direct",
            GradMode::ChainThroughD => "chain_through_d",
        })
    }
}

impl FromStr for GradMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(GradMode::Direct),
            "chain_through_d" | "chain" => Ok(GradMode::ChainThroughD),
            other => Err(Error::InvalidArgument(format!(
                "unknown gradient mode '{other}' (expected direct or chain_through_d)"
            ))),
        }
    }
}

/// Padded feature views for both spaces. `X_f` is dense by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipContext {
    p1: Vec<f64>,
    x_o: Matrix,
    x_f: Matrix,
}

impl FlipContext {
    /// Requires every feature in `[0, 1]` and `p1` of length `F` inside `(0, 1)`.
    pub fn new(x: &FeatureMatrix, p1: &[f64]) -> Result<Self> {
        let f = x.num_features();
        if p1.len() != f {
            return Err(Error::shape(
                "make_flip_context",
                format!("reflection point has {} entries for F = {f}", p1.len()),
            ));
        }
        if let Some(bad) = p1.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "reflection point entry {bad} outside (0, 1)"
            )));
        }
        if let Some((node, dim, value)) = x.first_out_of_unit_range() {
            return Err(Error::FeatureRange { node, dim, value });
        }
        let dense = x.to_dense();
        let n = dense.rows();
        let x_o = dense.hcat(&Matrix::zeros(n, 1))?;
        let mut x_f = Matrix::zeros(n, f + 1);
        for r in 0..n {
            let src = dense.row(r);
            let dst = x_f.row_mut(r);
            for i in 0..f {
                dst[i] = 2.0 * p1[i] - src[i];
            }
            dst[f] = 1.0;
        }
        Ok(Self {
            p1: p1.to_vec(),
            x_o,
            x_f,
        })
    }

    /// Context reflecting through the hypercube centre.
    pub fn centered(x: &FeatureMatrix) -> Result<Self> {
        Self::new(x, &vec![DEFAULT_REFLECTION; x.num_features()])
    }

    pub fn p1(&self) -> &[f64] {
        &self.p1
    }

    pub fn num_features(&self) -> usize {
        self.p1.len()
    }

    pub fn x_o(&self) -> &Matrix {
        &self.x_o
    }

    pub fn x_f(&self) -> &Matrix {
        &self.x_f
    }

    pub fn input(&self, space: Space) -> &Matrix {
        match space {
            Space::Original => &self.x_o,
            Space::Flipped => &self.x_f,
        }
    }
}

/// `W_f = [W; -2d]` together with the distance vector `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlippedPlaneView {
    pub d: Vec<f64>,
    pub w_f: Matrix,
}

impl FlippedPlaneView {
    pub fn pad_row(&self) -> &[f64] {
        self.w_f.row(self.w_f.rows() - 1)
    }
}

/// `W_o = [W; 0]`.
pub fn original_plane(w1: &Matrix) -> Matrix {
    w1.vcat(&Matrix::zeros(1, w1.cols())).expect("same width")
}

/// Distance vector `d_j = Σ_i p1_i W_ij` and the flipped plane `[W; -2d]`.
pub fn flip_hyperplane(w1: &Matrix, p1: &[f64]) -> Result<FlippedPlaneView> {
    if p1.len() != w1.rows() {
        return Err(Error::shape(
            "flip_hyperplane",
            format!("reflection point of {} for W with {} rows", p1.len(), w1.rows()),
        ));
    }
    let mut d = vec![0.0; w1.cols()];
    for (i, &p) in p1.iter().enumerate() {
        for (dj, &w) in d.iter_mut().zip(w1.row(i)) {
            *dj += p * w;
        }
    }
    let pad: Vec<f64> = d.iter().map(|v| -2.0 * v).collect();
    let w_f = w1.vcat(&Matrix::new(1, w1.cols(), pad)?)?;
    Ok(FlippedPlaneView { d, w_f })
}

/// `σ(prop · X_o · W_o)`.
pub fn first_layer_original(prop: Propagation<'_>, ctx: &FlipContext, w1: &Matrix) -> Result<Matrix> {
    let pre = prop.apply(&ctx.x_o.matmul(&original_plane(w1))?)?;
    Ok(relu_forward(&pre))
}

/// `σ(-prop · X_f · W_f)`: the sign-corrected flipped first layer.
pub fn first_layer_flipped(
    prop: Propagation<'_>,
    ctx: &FlipContext,
    view: &FlippedPlaneView,
) -> Result<Matrix> {
    let mut pre = prop.apply(&ctx.x_f.matmul(&view.w_f)?)?;
    pre.scale(-1.0);
    Ok(relu_forward(&pre))
}

/// Maps `∇W_f` (`(F+1) x F'`) onto the shared `F x F'` block.
pub fn assemble_flipped_grads(dw_f: &Matrix, p1: &[f64], mode: GradMode) -> Result<Matrix> {
    let f = p1.len();
    if dw_f.rows() != f + 1 {
        return Err(Error::shape(
            "assemble_flipped_grads",
            format!("gradient has {} rows, expected F + 1 = {}", dw_f.rows(), f + 1),
        ));
    }
    let mut dw = dw_f.slice_rows(0, f);
    if mode == GradMode::ChainThroughD {
        let pad = dw_f.row(f);
        for (i, &p) in p1.iter().enumerate() {
            for (g, &gp) in dw.row_mut(i).iter_mut().zip(pad) {
                *g -= 2.0 * p * gp;
            }
        }
    }
    Ok(dw)
}

/// Parameters as seen by the shared model in `space`. In the flipped space the
/// sign correction is folded into the first weight, `-W_f`, so the model code
/// is reused as is.
pub fn space_params(params: &ModelParams, p1: &[f64], space: Space) -> Result<ModelParams> {
    let w1 = match space {
        Space::Original => original_plane(&params.w1),
        Space::Flipped => flip_hyperplane(&params.w1, p1)?.w_f.scaled(-1.0),
    };
    Ok(ModelParams {
        w1,
        w2: params.w2.clone(),
        b1: params.b1.clone(),
        b2: params.b2.clone(),
    })
}

/// Gradient of the space-local parameters (as returned by `space_params`)
/// mapped onto the shared parameters.
pub fn shared_grads(
    space_grads: ModelParams,
    p1: &[f64],
    space: Space,
    mode: GradMode,
) -> Result<ModelParams> {
    let f = p1.len();
    let w1 = match space {
        // Pad column of X_o is zero, so the pad-row gradient is zero too.
        Space::Original => space_grads.w1.slice_rows(0, f),
        Space::Flipped => {
            // d(-W_f) -> dW_f
            let dw_f = space_grads.w1.scaled(-1.0);
            assemble_flipped_grads(&dw_f, p1, mode)?
        }
    };
    Ok(ModelParams { w1, ..space_grads })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_dense(&Matrix::from_rows(rows).unwrap())
    }

    #[test]
    fn reflection_examples() {
        let ctx = FlipContext::centered(&fm(&[&[1.0, 0.0, 0.0], &[0.5, 0.5, 0.5], &[0.0, 0.0, 0.0]]))
            .unwrap();
        assert_eq!(ctx.x_f().row(0), &[0.0, 1.0, 1.0, 1.0]);
        assert_eq!(ctx.x_f().row(1), &[0.5, 0.5, 0.5, 1.0]);
        assert_eq!(ctx.x_f().row(2), &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(ctx.x_o().row(0), &[1.0, 0.0, 0.0, 0.0]);
        assert!((0..3).all(|r| ctx.x_o().get(r, 3) == 0.0));
    }

    #[test]
    fn context_errors() {
        let x = fm(&[&[1.5, 0.0]]);
        assert!(matches!(
            FlipContext::centered(&x),
            Err(Error::FeatureRange { node: 0, dim: 0, .. })
        ));
        let x = fm(&[&[1.0, 0.0]]);
        assert!(FlipContext::new(&x, &[0.5]).is_err());
        assert!(FlipContext::new(&x, &[0.5, 1.0]).is_err());
    }

    #[test]
    fn hyperplane_two_dims() {
        let w = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let view = flip_hyperplane(&w, &[0.5, 0.5]).unwrap();
        assert_eq!(view.d, vec![1.0]);
        assert_eq!(view.pad_row(), &[-2.0]);

        let ctx = FlipContext::centered(&fm(&[&[0.3, 0.7]])).unwrap();
        let orig = ctx.x_o().matmul(&original_plane(&w)).unwrap().get(0, 0);
        let flipped = ctx.x_f().matmul(&view.w_f).unwrap().get(0, 0);
        assert!((orig - 1.0).abs() < 1e-15);
        assert!((flipped + 1.0).abs() < 1e-15);
    }

    #[test]
    fn hyperplane_zero_and_column_sums() {
        let view = flip_hyperplane(&Matrix::zeros(3, 2), &[0.5; 3]).unwrap();
        assert_eq!(view.pad_row(), &[0.0, 0.0]);

        let w = Matrix::from_fn(4, 3, |i, j| (i as f64 - 1.5) * (j as f64 + 0.25));
        let view = flip_hyperplane(&w, &[0.5; 4]).unwrap();
        for j in 0..3 {
            let col: f64 = (0..4).map(|i| w.get(i, j)).sum();
            assert!((view.pad_row()[j] + col).abs() < 1e-14);
        }
    }

    #[test]
    fn first_layers_agree() {
        let x = fm(&[&[0.3, 0.7], &[1.0, 0.0]]);
        let ctx = FlipContext::centered(&x).unwrap();
        let w = Matrix::from_rows(&[[1.0, -0.5], [1.0, 2.0]]).unwrap();
        let view = flip_hyperplane(&w, ctx.p1()).unwrap();
        let o = first_layer_original(Propagation::Identity, &ctx, &w).unwrap();
        let f = first_layer_flipped(Propagation::Identity, &ctx, &view).unwrap();
        assert!(o.max_abs_diff(&f) < 1e-12);

        let zero = Matrix::zeros(2, 2);
        let view = flip_hyperplane(&zero, ctx.p1()).unwrap();
        assert_eq!(first_layer_flipped(Propagation::Identity, &ctx, &view).unwrap().max_abs(), 0.0);
        assert_eq!(first_layer_original(Propagation::Identity, &ctx, &zero).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn assembly_modes() {
        let p1 = [0.5, 0.5];
        let no_pad = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [0.0, 0.0]]).unwrap();
        assert_eq!(
            assemble_flipped_grads(&no_pad, &p1, GradMode::Direct).unwrap(),
            assemble_flipped_grads(&no_pad, &p1, GradMode::ChainThroughD).unwrap()
        );
        let pad = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [2.0, 4.0]]).unwrap();
        let direct = assemble_flipped_grads(&pad, &p1, GradMode::Direct).unwrap();
        let chain = assemble_flipped_grads(&pad, &p1, GradMode::ChainThroughD).unwrap();
        assert_eq!(direct.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(chain.as_slice(), &[-1.0, -2.0, 1.0, 0.0]);
        assert!(assemble_flipped_grads(&direct, &p1, GradMode::Direct).is_err());
    }

    #[test]
    fn parse_modes() {
        assert_eq!("direct".parse::<GradMode>().unwrap(), GradMode::Direct);
        assert_eq!("chain_through_d".parse::<GradMode>().unwrap(), GradMode::ChainThroughD);
        assert!("x".parse::<GradMode>().is_err());
        assert_eq!("flipped".parse::<Space>().unwrap(), Space::Flipped);
    }
}
