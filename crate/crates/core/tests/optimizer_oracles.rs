use rand::Rng;
use supermult::channels::{
    random_kraus_channel, random_unitary_channel, tensor, AnyChannel, Channel,
};
use supermult::linalg::{ComplexVector, PureState};
use supermult::optimize::{
    brute_force_pnorms_d2, directional_derivative, maximize_output_pnorm,
    maximize_output_pnorm_with_hints, output_pnorm_objective, project_tangent, OptimizerConfig,
};
use supermult::SeededRng;

const PS: [f64; 4] = [1.5, 2.0, 3.0, 5.0];

fn qubit_channel(i: u64) -> AnyChannel {
    let n = 2 + (i % 3) as usize;
    if i.is_multiple_of(2) {
        AnyChannel::RandomUnitary(random_unitary_channel(2, n, 100 + i).unwrap())
    } else {
        AnyChannel::Kraus(random_kraus_channel(2, 2, n, 100 + i).unwrap())
    }
}

fn random_tangent(psi: &PureState, rng: &mut SeededRng) -> ComplexVector {
    let raw = ComplexVector::from_fn(psi.dim(), |_, _| rng.complex_normal());
    let t = project_tangent(psi, &raw);
    t.unscale(t.norm())
}

#[test]
fn gradient_matches_central_differences() {
    let h = 1e-6;
    let mut rng = SeededRng::new(7, 0);
    let mut worst: f64 = 0.0;
    for trial in 0..50u64 {
        let d = rng.gen_range(2..=6);
        let k = rng.gen_range(2..=2 * d);
        let channel = if trial % 2 == 0 {
            AnyChannel::RandomUnitary(random_unitary_channel(d, k, trial).unwrap())
        } else {
            AnyChannel::Kraus(random_kraus_channel(d, d, k, trial).unwrap())
        };
        let p = PS[(trial % 4) as usize];
        let psi = PureState::random(d, &mut rng).unwrap();
        let eta = random_tangent(&psi, &mut rng);
        let at = |t: f64| {
            let moved = PureState::normalized(psi.amplitudes() + eta.scale(t)).unwrap();
            // output norm is 2-homogeneous in psi; undo the normalization
            output_pnorm_objective(&channel, p, &moved).unwrap() * (1.0 + t * t)
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let analytic = directional_derivative(&channel, p, &psi, &eta).unwrap();
        let rel = (analytic - fd).abs() / fd.abs().max(analytic.abs()).max(1e-4);
        worst = worst.max(rel);
        assert!(
            rel <= 1e-5,
            "trial {trial}: d={d} k={k} p={p} analytic={analytic} fd={fd}"
        );
    }
    println!("worst relative gradient error {worst:e}");
}

#[test]
fn optimizer_matches_bloch_grid() {
    let cfg = OptimizerConfig::with_seed(3).with_starts(8);
    for i in 0..20 {
        let channel = qubit_channel(i);
        let grid = brute_force_pnorms_d2(&channel, &PS, 400).unwrap();
        for (&p, &g) in PS.iter().zip(&grid) {
            let nu = maximize_output_pnorm(&channel, p, &cfg).unwrap().best_value;
            assert!(
                (nu - g).abs() <= 2e-4,
                "channel {i} p={p}: optimizer {nu} grid {g}"
            );
            // the grid is a set of feasible points
            assert!(
                nu >= g - 1e-12,
                "channel {i} p={p}: optimizer {nu} below grid {g}"
            );
        }
    }
}

#[test]
fn conjugate_channel_has_same_norm() {
    let cfg = OptimizerConfig::with_seed(11).with_starts(8);
    for (d, n, seed) in [(2, 3, 1), (3, 4, 2), (4, 5, 3)] {
        let ch = random_unitary_channel(d, n, seed).unwrap();
        let conj = ch.conjugate();
        for p in [2.0, 5.0, f64::INFINITY] {
            let a = maximize_output_pnorm(&ch, p, &cfg).unwrap().best_value;
            let b = maximize_output_pnorm(&conj, p, &cfg).unwrap().best_value;
            assert!((a - b).abs() <= 1e-6, "d={d} p={p}: {a} vs {b}");
        }
    }
}

#[test]
fn tensor_norm_dominates_product() {
    let cfg = OptimizerConfig::with_seed(5).with_starts(4);
    for (i, (d1, d2)) in [(2, 2), (2, 3), (3, 2), (2, 4), (3, 3)]
        .into_iter()
        .enumerate()
    {
        let c1 = random_kraus_channel(d1, d1, 2, 40 + i as u64).unwrap();
        let c2 = random_unitary_channel(d2, 3, 50 + i as u64).unwrap();
        let t = tensor(&c1, &c2).unwrap();
        for p in [1.5, 3.0, f64::INFINITY] {
            let r1 = maximize_output_pnorm(&c1, p, &cfg).unwrap();
            let r2 = maximize_output_pnorm(&c2, p, &cfg).unwrap();
            let product_state = r1.best_state.tensor(&r2.best_state);
            let rt = maximize_output_pnorm_with_hints(&t, p, &cfg, &[product_state]).unwrap();
            let product = r1.best_value * r2.best_value;
            assert!(
                rt.best_value >= product - 1e-6,
                "pair {i} p={p}: {} < {product}",
                rt.best_value
            );
        }
    }
}

#[test]
fn optimizer_is_deterministic_across_calls() {
    let ch = random_kraus_channel(3, 3, 4, 8).unwrap();
    let cfg = OptimizerConfig::with_seed(99).with_starts(6);
    let a = maximize_output_pnorm(&ch, 2.5, &cfg).unwrap();
    let b = maximize_output_pnorm(&ch, 2.5, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ch.dim_in(), 3);
}
