use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use textsr::conv::conv2d_backward;
use textsr::conv::conv2d_valid;
use textsr::training::{backprop, mse_loss};
use textsr::{init_network, parse_spec, FilterBank, Network, Tensor};

const STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

fn loss_of(net: &Network, x: &Tensor, target: &Tensor) -> f64 {
    mse_loss(&net.forward(x).unwrap(), target).unwrap().0
}

fn random_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor {
    let n = Normal::new(0.0, 1.0).unwrap();
    Tensor::from_fn(c, h, w, |_, _, _| n.sample(rng))
}

fn check_network(spec: &str, seed: u64, size: usize) {
    let spec = parse_spec(spec).unwrap();
    let mut net = init_network(&spec, 0.5, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 0.3).unwrap();
    for bank in net.banks_mut() {
        bank.biases_mut().iter_mut().for_each(|b| *b = n.sample(&mut rng));
    }
    let x = random_tensor(&mut rng, 1, size, size);
    let out_size = size - spec.shrink();
    let target = random_tensor(&mut rng, 1, out_size, out_size);

    let trace = net.forward_trace(&x).unwrap();
    let (_, g) = mse_loss(trace.output(), &target).unwrap();
    let grads = backprop(&net, &trace, &g).unwrap();

    let mut checked = 0;
    for (layer, analytic_bank) in grads.iter().enumerate() {
        let nw = net.banks()[layer].weights().len();
        let nb = net.banks()[layer].biases().len();
        for idx in 0..nw + nb {
            let read = |b: &FilterBank| if idx < nw { b.weights()[idx] } else { b.biases()[idx - nw] };
            let set = |net: &mut Network, v: f64| {
                let b = &mut net.banks_mut()[layer];
                if idx < nw {
                    b.weights_mut()[idx] = v;
                } else {
                    b.biases_mut()[idx - nw] = v;
                }
            };
            let original = read(&net.banks()[layer]);
            set(&mut net, original + STEP);
            let plus = loss_of(&net, &x, &target);
            set(&mut net, original - STEP);
            let minus = loss_of(&net, &x, &target);
            set(&mut net, original);
            let numeric = (plus - minus) / (2.0 * STEP);
            let analytic = read(analytic_bank);
            let err = relative_error(analytic, numeric);
            assert!(
                err <= REL_TOL,
                "layer {layer} param {idx}: analytic {analytic:e}, numeric {numeric:e}, rel err {err:e}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, net.param_count());
}

#[test]
fn micro_network_matches_central_differences() {
    check_network("2(3)-2(1)-1(3)", 5, 9);
}

#[test]
fn three_hidden_layer_network_matches_central_differences() {
    check_network("3(3)-2(3)-2(1)-1(3)", 17, 10);
}

#[test]
fn conv_input_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_tensor(&mut rng, 2, 6, 7);
    let bank = FilterBank::new(
        3,
        2,
        3,
        random_tensor(&mut rng, 1, 1, 54).data().to_vec(),
        vec![0.1, -0.2, 0.3],
    )
    .unwrap();
    let g = random_tensor(&mut rng, 3, 4, 5);
    let objective = |x: &Tensor| -> f64 {
        let y = conv2d_valid(x, &bank).unwrap();
        y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
    };
    let grads = conv2d_backward(&x, &bank, &g).unwrap();
    for idx in 0..x.len() {
        let mut p = x.clone();
        p.data_mut()[idx] += STEP;
        let mut m = x.clone();
        m.data_mut()[idx] -= STEP;
        let numeric = (objective(&p) - objective(&m)) / (2.0 * STEP);
        let err = relative_error(grads.input.data()[idx], numeric);
        assert!(err <= REL_TOL, "input {idx}: rel err {err:e}");
    }
}
