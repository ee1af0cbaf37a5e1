//! Analytic gradients against central finite differences.

mod common;

use common::{numeric_grad, rel_err};
use mindreader_core::models::{bpr_triple_grad, bpr_triple_loss, margin_loss, margin_loss_grad};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POINTS: usize = 50;
const TOL: f64 = 1e-4;

fn vector(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v = vector(rng, d, 1.0);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

#[test]
fn bpr_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..POINTS {
        let d = rng.random_range(1..=16);
        let (p, qi, qj) = (vector(&mut rng, d, 1.0), vector(&mut rng, d, 1.0), vector(&mut rng, d, 1.0));
        let reg = rng.random_range(0.0..0.1);
        let (gp, gi, gj) = bpr_triple_grad(&p, &qi, &qj, reg);
        assert!(rel_err(&gp, &numeric_grad(&p, |x| bpr_triple_loss(x, &qi, &qj, reg))) <= TOL);
        assert!(rel_err(&gi, &numeric_grad(&qi, |x| bpr_triple_loss(&p, x, &qj, reg))) <= TOL);
        assert!(rel_err(&gj, &numeric_grad(&qj, |x| bpr_triple_loss(&p, &qi, x, reg))) <= TOL);
    }
}

fn check_margin(hyperplane: bool, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // A large margin keeps the hinge active so the loss is smooth.
    let margin = 10.0;
    for _ in 0..POINTS {
        let d = rng.random_range(2..=16);
        let h = vector(&mut rng, d, 1.0);
        let r = vector(&mut rng, d, 1.0);
        let t = vector(&mut rng, d, 1.0);
        let hn = vector(&mut rng, d, 1.0);
        let tn = vector(&mut rng, d, 1.0);
        let w = hyperplane.then(|| unit(&mut rng, d));
        let w = w.as_deref();
        let g = margin_loss_grad(margin, &h, &r, &t, &hn, &tn, w);
        let f = |h: &[f64], r: &[f64], t: &[f64], hn: &[f64], tn: &[f64], w: Option<&[f64]>| {
            margin_loss(margin, h, r, t, hn, tn, w)
        };
        assert!(rel_err(&g.h, &numeric_grad(&h, |x| f(x, &r, &t, &hn, &tn, w))) <= TOL);
        assert!(rel_err(&g.r, &numeric_grad(&r, |x| f(&h, x, &t, &hn, &tn, w))) <= TOL);
        assert!(rel_err(&g.t, &numeric_grad(&t, |x| f(&h, &r, x, &hn, &tn, w))) <= TOL);
        assert!(rel_err(&g.h_neg, &numeric_grad(&hn, |x| f(&h, &r, &t, x, &tn, w))) <= TOL);
        assert!(rel_err(&g.t_neg, &numeric_grad(&tn, |x| f(&h, &r, &t, &hn, x, w))) <= TOL);
        if let Some(w) = w {
            let gw = g.w.as_ref().unwrap();
            assert!(rel_err(gw, &numeric_grad(w, |x| f(&h, &r, &t, &hn, &tn, Some(x)))) <= TOL);
        }
    }
}

#[test]
fn trans_e_gradient() {
    check_margin(false, 12);
}

#[test]
fn trans_h_gradient() {
    check_margin(true, 13);
}

#[test]
fn inactive_hinge_has_zero_gradient() {
    let h = [0.0, 0.0];
    let g = margin_loss_grad(0.5, &h, &[0.0, 0.0], &h, &[5.0, 0.0], &[0.0, 0.0], None);
    assert!(g.h.iter().chain(&g.r).chain(&g.t).chain(&g.h_neg).chain(&g.t_neg).all(|&x| x == 0.0));
}
