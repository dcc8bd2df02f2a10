use flipgnn::dataset::FeatureMatrix;
use flipgnn::flip::{
    first_layer_flipped, first_layer_original, flip_hyperplane, shared_grads, space_params,
    FlipContext, GradMode, Space,
};
use flipgnn::graph::Graph;
use flipgnn::models::{backward, forward, logits, ModelKind, ModelParams, ModelSpec, Propagation};
use flipgnn::rng::{stream, Stream};
use flipgnn::tensor::{logsoftmax_nll, softmax, Matrix};
use proptest::prelude::*;
use rand::Rng as _;

#[derive(Debug)]
struct Case {
    x: FeatureMatrix,
    graph: Graph,
    w1: Matrix,
    p1: Vec<f64>,
    seed: u64,
}

fn case_strategy() -> impl Strategy<Value = Case> {
    (3usize..10, 2usize..7, 1usize..5, any::<u64>()).prop_map(|(n, f, hidden, seed)| {
        let mut rng = stream(seed, Stream::Features);
        let x = Matrix::from_fn(n, f, |_, _| {
            if rng.random_bool(0.4) {
                rng.random_range(0.0..=1.0)
            } else {
                0.0
            }
        });
        let edges: Vec<_> = (0..2 * n)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .filter(|(u, v)| u != v)
            .collect();
        Case {
            x: FeatureMatrix::from_dense(&x),
            graph: Graph::from_edges(&edges, n).unwrap(),
            w1: Matrix::from_fn(f, hidden, |_, _| rng.random_range(-1.0..1.0)),
            p1: (0..f).map(|_| rng.random_range(0.05..0.95)).collect(),
            seed,
        }
    })
}

fn spec(kind: ModelKind, hidden: usize) -> ModelSpec {
    ModelSpec {
        hidden,
        dropout: 0.0,
        bias: true,
        ..ModelSpec::new(kind)
    }
}

proptest! {
    #[test]
    fn flipped_first_layer_matches_original(c in case_strategy()) {
        let a = c.graph.renormalize();
        for ctx in [FlipContext::centered(&c.x).unwrap(), FlipContext::new(&c.x, &c.p1).unwrap()] {
            for prop in [Propagation::Identity, Propagation::Graph(&a)] {
                let view = flip_hyperplane(&c.w1, ctx.p1()).unwrap();
                let h_o = first_layer_original(prop, &ctx, &c.w1).unwrap();
                let h_f = first_layer_flipped(prop, &ctx, &view).unwrap();
                prop_assert!(h_o.max_abs_diff(&h_f) <= 1e-12);
            }
        }
    }

    #[test]
    fn reflection_is_symmetric_about_p1(c in case_strategy()) {
        let ctx = FlipContext::new(&c.x, &c.p1).unwrap();
        let f = c.p1.len();
        for r in 0..c.x.n() {
            let (xo, xf) = (ctx.x_o().row(r), ctx.x_f().row(r));
            prop_assert_eq!(xo[f], 0.0);
            prop_assert_eq!(xf[f], 1.0);
            for i in 0..f {
                prop_assert!(((xo[i] + xf[i]) / 2.0 - c.p1[i]).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn logits_agree_across_spaces(c in case_strategy(), k in 0usize..3) {
        let kind = ModelKind::ALL[k];
        let a = c.graph.renormalize();
        let s = spec(kind, c.w1.cols());
        let mut rng = stream(c.seed, Stream::Init);
        let mut params = ModelParams::init(&s, c.x.num_features(), 3, &mut rng);
        params.w1 = c.w1.clone();
        let ctx = FlipContext::new(&c.x, &c.p1).unwrap();
        let prop = Propagation::Graph(&a);
        let out = |space| {
            let p = space_params(&params, ctx.p1(), space).unwrap();
            logits(&s, &p, prop, ctx.input(space)).unwrap()
        };
        let (lo, lf) = (out(Space::Original), out(Space::Flipped));
        prop_assert!(lo.max_abs_diff(&lf) <= 1e-10);
        let direct = logits(&s, &params, prop, &c.x.to_dense()).unwrap();
        prop_assert!(lo.max_abs_diff(&direct) <= 1e-12);
    }

    #[test]
    fn softmax_rows_sum_to_one(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>(), scale in 0.1f64..500.0) {
        let mut rng = stream(seed, Stream::Init);
        let m = Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale));
        let p = softmax(&m);
        for r in 0..rows {
            let s: f64 = p.row(r).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(p.row(r).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn gcn_with_identity_is_mlp(c in case_strategy()) {
        let mlp = spec(ModelKind::Mlp, c.w1.cols());
        let gcn = spec(ModelKind::Gcn, c.w1.cols());
        let mut rng = stream(c.seed, Stream::Init);
        let params = ModelParams::init(&mlp, c.x.num_features(), 3, &mut rng);
        let x = c.x.to_dense();
        let a = logits(&mlp, &params, Propagation::Identity, &x).unwrap();
        let b = logits(&gcn, &params, Propagation::Identity, &x).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn appnp_converges_geometrically(c in case_strategy(), tau in 0.05f64..1.0) {
        let a = c.graph.renormalize();
        let prop = Propagation::Graph(&a);
        let x = c.x.to_dense();
        let mut rng = stream(c.seed, Stream::Init);
        let base = ModelSpec { appnp_teleport: tau, ..spec(ModelKind::Appnp, c.w1.cols()) };
        let params = ModelParams::init(&base, c.x.num_features(), 3, &mut rng);
        let at = |k| logits(&ModelSpec { appnp_k: k, ..base.clone() }, &params, prop, &x).unwrap();
        let fixed = at(3000);
        let frob = |m: &Matrix| m.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = |m: &Matrix| {
            let mut d = m.clone();
            d.axpy(-1.0, &fixed).unwrap();
            frob(&d)
        };
        let e0 = diff(&at(0));
        for k in [1, 2, 5, 10] {
            prop_assert!(diff(&at(k)) <= (1.0 - tau).powi(k as i32) * e0 + 1e-10);
        }
    }
}

/// Dims with no mass on the training nodes get no original-space gradient in
/// the MLP but do in the flipped space.
#[test]
fn zero_columns_are_starved_only_in_original_space() {
    let x = FeatureMatrix::from_dense(
        &Matrix::from_rows(&[
            [1.0, 0.0, 0.0, 0.5],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 1.0],
            [1.0, 1.0, 0.0, 0.0],
        ])
        .unwrap(),
    );
    let train = [0usize, 1, 3];
    let labels = [0usize, 1, 0, 1];
    let s = spec(ModelKind::Mlp, 5);
    let mut rng = stream(11, Stream::Init);
    let params = ModelParams::init(&s, 4, 2, &mut rng);
    let ctx = FlipContext::centered(&x).unwrap();
    let mut grad = |space| {
        let p = space_params(&params, ctx.p1(), space).unwrap();
        let (out, tape) = forward(&s, &p, Propagation::Identity, ctx.input(space), true, &mut rng).unwrap();
        let (_, d) = logsoftmax_nll(&out, &labels, &train).unwrap();
        let g = backward(&s, &tape, &d).unwrap();
        shared_grads(g, ctx.p1(), space, GradMode::Direct).unwrap().w1
    };
    let (go, gf) = (grad(Space::Original), grad(Space::Flipped));
    assert!(go.row(2).iter().all(|&v| v == 0.0));
    assert!(go.row(0).iter().any(|&v| v != 0.0));
    assert!(gf.row(2).iter().any(|&v| v != 0.0));
}
