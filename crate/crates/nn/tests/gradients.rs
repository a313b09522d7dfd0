use ecgstress_nn::graph::{Graph, Var};
use ecgstress_nn::net::forward;
use ecgstress_nn::{Arch, NetConfig, Network, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Compares `backward` against central differences for every parameter entry.
fn check<F>(label: &str, params: &[Tensor], build: F)
where
    F: Fn(&mut Graph<'_>) -> Var,
{
    let eval = |p: &[Tensor]| {
        let mut g = Graph::new(p);
        let out = build(&mut g);
        g.value(out).data[0]
    };
    let mut g = Graph::new(params);
    let out = build(&mut g);
    assert_eq!(g.value(out).len(), 1, "{label}: loss must be scalar");
    let analytic = g.backward(out);

    let mut probe = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        assert_eq!(analytic[pi].shape, p.shape);
        for j in 0..p.len() {
            let orig = p.data[j];
            probe[pi].data[j] = orig + STEP;
            let up = eval(&probe);
            probe[pi].data[j] = orig - STEP;
            let down = eval(&probe);
            probe[pi].data[j] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic[pi].data[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            assert!(
                rel <= TOL,
                "{label}: param {pi}[{j}] analytic {a} numeric {numeric} rel {rel}"
            );
        }
    }
}

/// Reduces any tensor to a scalar with fixed random weights, so every output
/// entry carries a distinct upstream gradient.
fn weighted_sum(g: &mut Graph<'_>, v: Var, weights: &Tensor) -> Var {
    let w = g.input(weights.clone());
    let flat = g.flatten(v);
    let prod = g.mul(flat, w).unwrap();
    g.sum(prod)
}

fn seeds() -> impl Iterator<Item = ChaCha8Rng> {
    (0..10u64).map(|s| ChaCha8Rng::seed_from_u64(1000 + s))
}

#[test]
fn affine_gradients() {
    for mut rng in seeds() {
        let (o, i) = (rng.random_range(1..6), rng.random_range(1..7));
        let params = vec![random(&mut rng, &[o, i]), random(&mut rng, &[i]), random(&mut rng, &[o])];
        let r = random(&mut rng, &[o]);
        check("affine+bias", &params, |g| {
            let (w, x, b) = (g.param(0), g.param(1), g.param(2));
            let y = g.affine(w, x, Some(b)).unwrap();
            weighted_sum(g, y, &r)
        });
        check("affine", &params[..2], |g| {
            let (w, x) = (g.param(0), g.param(1));
            let y = g.affine(w, x, None).unwrap();
            weighted_sum(g, y, &r)
        });
    }
}

#[test]
fn conv1d_gradients() {
    for mut rng in seeds() {
        let (cin, cout) = (rng.random_range(1..4), rng.random_range(1..4));
        let k = rng.random_range(1..5);
        let len = k + rng.random_range(0..8);
        let params = vec![
            random(&mut rng, &[cin, len]),
            random(&mut rng, &[cout, cin, k]),
            random(&mut rng, &[cout]),
        ];
        let r = random(&mut rng, &[cout * (len - k + 1)]);
        check("conv1d", &params, |g| {
            let (x, w, b) = (g.param(0), g.param(1), g.param(2));
            let y = g.conv1d(x, w, b).unwrap();
            weighted_sum(g, y, &r)
        });
    }
}

#[test]
fn maxpool_gradients() {
    for mut rng in seeds() {
        let (c, k) = (rng.random_range(1..4), rng.random_range(1..5));
        let len = k * rng.random_range(1..5) + rng.random_range(0..k);
        let params = vec![random(&mut rng, &[c, len])];
        let r = random(&mut rng, &[c * (len / k)]);
        check("maxpool", &params, |g| {
            let x = g.param(0);
            let y = g.maxpool(x, k).unwrap();
            weighted_sum(g, y, &r)
        });
    }
}

#[test]
fn activation_gradients() {
    for mut rng in seeds() {
        let n = rng.random_range(1..12);
        let params = vec![random(&mut rng, &[n])];
        let r = random(&mut rng, &[n]);
        check("relu", &params, |g| {
            let x = g.param(0);
            let y = g.relu(x);
            weighted_sum(g, y, &r)
        });
        check("sigmoid", &params, |g| {
            let x = g.param(0);
            let y = g.sigmoid(x);
            weighted_sum(g, y, &r)
        });
        check("tanh", &params, |g| {
            let x = g.param(0);
            let y = g.tanh(x);
            weighted_sum(g, y, &r)
        });
    }
}

#[test]
fn elementwise_and_slice_gradients() {
    for mut rng in seeds() {
        let n = rng.random_range(2..12);
        let params = vec![random(&mut rng, &[n]), random(&mut rng, &[n])];
        let r = random(&mut rng, &[n]);
        check("add", &params, |g| {
            let (a, b) = (g.param(0), g.param(1));
            let y = g.add(a, b).unwrap();
            weighted_sum(g, y, &r)
        });
        check("mul", &params, |g| {
            let (a, b) = (g.param(0), g.param(1));
            let y = g.mul(a, b).unwrap();
            weighted_sum(g, y, &r)
        });
        check("square", &params[..1], |g| {
            let a = g.param(0);
            let y = g.mul(a, a).unwrap();
            weighted_sum(g, y, &r)
        });
        let start = rng.random_range(0..n);
        let len = rng.random_range(1..=n - start);
        let rs = random(&mut rng, &[len]);
        check("slice", &params[..1], |g| {
            let a = g.param(0);
            let y = g.slice(a, start, len).unwrap();
            weighted_sum(g, y, &rs)
        });
    }
}

#[test]
fn softmax_ce_gradients() {
    for mut rng in seeds() {
        let n = rng.random_range(2..6);
        let label = rng.random_range(0..n);
        let params = vec![random(&mut rng, &[n])];
        check("softmax_ce", &params, |g| {
            let z = g.param(0);
            g.softmax_ce(z, label).unwrap()
        });
    }
}

fn whole_net(config: NetConfig, seeds: std::ops::Range<u64>) {
    for seed in seeds {
        let net = Network::new(NetConfig { seed, ..config }).unwrap();
        // Random biases too, so no gradient is trivially zero at init.
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 77);
        let params: Vec<Tensor> = net
            .params
            .iter()
            .map(|p| {
                let mut p = p.clone();
                p.data.iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
                p
            })
            .collect();
        let x = random(&mut rng, &config.input_shape());
        let label = rng.random_range(0..2);
        check(&format!("{:?} seed {seed}", config.arch), &params, |g| {
            let z = forward(g, &config, &x).unwrap();
            g.softmax_ce(z, label).unwrap()
        });
    }
}

#[test]
fn cnn_parameter_gradients() {
    let config = NetConfig {
        input_len: 64,
        hidden: 5,
        ..NetConfig::new(Arch::Cnn)
    };
    whole_net(config, 0..3);
}

#[test]
fn lstm_parameter_gradients() {
    let config = NetConfig {
        input_len: 15,
        frame: 3,
        hidden: 4,
        ..NetConfig::new(Arch::Lstm)
    };
    assert_eq!(config.input_shape(), vec![5, 3]);
    whole_net(config, 0..10);
}
