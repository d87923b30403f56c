//! Independent oracles for the proximal operators and every analytic gradient.

use graphclean::attacks::random_attack;
use graphclean::gcn::{gcn_grad_s, gcn_grad_theta, gcn_loss, GcnParams};
use graphclean::prox::{
    objective, objective_terms, prox_descent_step, prox_l1, prox_nuclear, smooth_grad, ProxConfig, Supervision,
};
use graphclean::Graph;
use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Minimizes a convex scalar function on `[lo, hi]`.
fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    (lo + hi) / 2.0
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(lo..hi);
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    m
}

fn to_na(m: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

#[test]
fn prox_l1_matches_scalar_minimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let z: f64 = rng.gen_range(-3.0..3.0);
        let t: f64 = rng.gen_range(0.0..1.0);
        let got = prox_l1(Array2::from_elem((1, 1), z).view(), t).unwrap()[[0, 0]];
        let want = golden_section(|s| 0.5 * (s - z).powi(2) + t * s.abs(), -5.0, 5.0);
        assert!((got - want).abs() < 1e-6, "z={z} t={t}: {got} vs {want}");
    }
}

#[test]
fn prox_nuclear_matches_gram_eigen_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..20 {
        let n = 4 + case % 5;
        let z = random_symmetric(&mut rng, n, -1.0, 1.0);
        let t = if case == 0 { 0.5 } else { rng.gen_range(0.05..1.0) };
        let got = prox_nuclear(z.view(), t).unwrap();

        // Z V diag((σ−t)_+/σ) Vᵀ from the eigenvectors V of ZᵀZ.
        let zn = to_na(z.view());
        let eig = (zn.transpose() * &zn).symmetric_eigen();
        let mut want = DMatrix::zeros(n, n);
        for k in 0..n {
            let sigma = eig.eigenvalues[k].max(0.0).sqrt();
            if sigma > t {
                let v = eig.eigenvectors.column(k);
                want += (&zn * v) * v.transpose() * ((sigma - t) / sigma);
            }
        }
        let err = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (got[[i, j]] - want[(i, j)]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-6, "case {case}: frobenius error {err}");

        let mut s_in: Vec<f64> = zn.singular_values().iter().copied().collect();
        let mut s_out: Vec<f64> = to_na(got.view()).singular_values().iter().copied().collect();
        s_in.sort_by(|a, b| b.total_cmp(a));
        s_out.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in s_in.iter().zip(&s_out) {
            assert!(((a - t).max(0.0) - b).abs() < 1e-6);
        }
    }
}

struct Instance {
    s: Array2<f64>,
    a: Array2<f64>,
    x: Array2<f64>,
    labels: Vec<usize>,
    idx: Vec<usize>,
    params: GcnParams,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=6);
    let d = rng.gen_range(2..=4);
    let s = random_symmetric(&mut rng, n, 0.1, 0.9);
    let mut a = random_symmetric(&mut rng, n, 0.0, 1.0).mapv(|v| if v > 0.5 { 1.0 } else { 0.0 });
    a.diag_mut().fill(0.0);
    let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
    let labels = (0..n).map(|i| i % 2).collect();
    let idx = (0..n).filter(|i| i % 3 != 2).collect();
    let params = GcnParams::init(d, 4, 2, &mut rng);
    Instance {
        s,
        a,
        x,
        labels,
        idx,
        params,
    }
}

impl Instance {
    fn sup(&self) -> Supervision<'_> {
        Supervision {
            x: self.x.view(),
            labels: &self.labels,
            idx: &self.idx,
        }
    }
}

/// Central difference along the symmetric direction E_kl + E_lk (or E_kk).
fn fd_symmetric(f: impl Fn(&Array2<f64>) -> f64, s: &Array2<f64>, k: usize, l: usize) -> f64 {
    let bump = |h: f64| {
        let mut t = s.clone();
        t[[k, l]] += h;
        if k != l {
            t[[l, k]] += h;
        }
        f(&t)
    };
    let d = (bump(FD_STEP) - bump(-FD_STEP)) / (2.0 * FD_STEP);
    if k == l {
        d
    } else {
        d / 2.0
    }
}

fn check_smooth_grad(gamma: f64, lambda: f64) {
    for seed in 0..20 {
        let inst = instance(seed);
        let cfg = ProxConfig {
            alpha: 0.0,
            beta: 0.0,
            gamma,
            lambda,
            ..ProxConfig::default()
        };
        let g = smooth_grad(inst.s.view(), inst.a.view(), &inst.params, inst.sup(), &cfg).unwrap();
        assert_eq!(g, g.t());
        let f = |s: &Array2<f64>| {
            objective_terms(s.view(), inst.a.view(), &inst.params, inst.sup(), &cfg)
                .unwrap()
                .total(&cfg)
        };
        let n = inst.s.nrows();
        for k in 0..n {
            for l in k..n {
                let fd = fd_symmetric(&f, &inst.s, k, l);
                let e = rel_err(g[[k, l]], fd);
                assert!(e < FD_TOL, "γ={gamma} λ={lambda} seed {seed} ({k},{l}): {} vs {fd}", g[[k, l]]);
            }
        }
    }
}

#[test]
fn smooth_grad_fidelity_term() {
    check_smooth_grad(0.0, 0.0);
}

#[test]
fn smooth_grad_gnn_term() {
    check_smooth_grad(1.0, 0.0);
}

#[test]
fn smooth_grad_smoothness_term() {
    check_smooth_grad(0.0, 1.0);
}

#[test]
fn smooth_grad_all_terms() {
    check_smooth_grad(0.7, 1.3);
}

#[test]
fn gcn_gradients_match_finite_differences() {
    for seed in 100..120 {
        let inst = instance(seed);
        let loss = |p: &GcnParams, s: &Array2<f64>| gcn_loss(p, s.view(), inst.x.view(), &inst.labels, &inst.idx).unwrap();
        let (g1, g2) = gcn_grad_theta(&inst.params, inst.s.view(), inst.x.view(), &inst.labels, &inst.idx).unwrap();
        for (which, g) in [(0, &g1), (1, &g2)] {
            for ((i, j), &analytic) in g.indexed_iter() {
                let at = |h: f64| {
                    let mut p = inst.params.clone();
                    let w = if which == 0 { &mut p.w1 } else { &mut p.w2 };
                    w[[i, j]] += h;
                    loss(&p, &inst.s)
                };
                let fd = (at(FD_STEP) - at(-FD_STEP)) / (2.0 * FD_STEP);
                assert!(rel_err(analytic, fd) < FD_TOL, "seed {seed} W{} ({i},{j})", which + 1);
            }
        }
        let gs = gcn_grad_s(&inst.params, inst.s.view(), inst.x.view(), &inst.labels, &inst.idx).unwrap();
        let n = inst.s.nrows();
        for k in 0..n {
            for l in k..n {
                let fd = fd_symmetric(|s| loss(&inst.params, s), &inst.s, k, l);
                assert!(rel_err(gs[[k, l]], fd) < FD_TOL, "seed {seed} S ({k},{l})");
            }
        }
    }
}

#[test]
fn one_step_from_adjacency_decreases_objective() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 5;
        // A ring poisoned by random injection. Every node keeps a neighbor:
        // at an isolated node the eps degree floor makes the smoothness
        // gradient of order 1/sqrt(eps), far outside the small-step regime.
        let ring = Array2::from_shape_fn((n, n), |(i, j)| if (i + 1) % n == j || (j + 1) % n == i { 1.0 } else { 0.0 });
        let clean = Graph::new(ring, Graph::identity_features(n), vec![0; n], Default::default()).unwrap();
        let (poisoned, _) = random_attack(&clean, 0.4, seed).unwrap();
        let a = poisoned.adjacency().clone();
        let inst = Instance {
            s: a.clone(),
            a,
            x: Array2::from_shape_fn((n, 3), |_| rng.gen_range(-1.0..1.0)),
            labels: vec![0, 1, 0, 1, 1],
            idx: vec![0, 1, 2],
            params: GcnParams::init(3, 4, 2, &mut rng),
        };
        let cfg = ProxConfig {
            eta: 1e-3,
            ..ProxConfig::default()
        };
        let before = objective(inst.s.view(), inst.a.view(), &inst.params, inst.sup(), &cfg).unwrap();
        let next = prox_descent_step(inst.s.view(), inst.a.view(), &inst.params, inst.sup(), &cfg).unwrap();
        let after = objective(next.view(), inst.a.view(), &inst.params, inst.sup(), &cfg).unwrap();
        assert!(after < before, "seed {seed}: {after} >= {before}");
    }
}
