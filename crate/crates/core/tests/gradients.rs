//! Tape gradients against central finite differences for every adapter kind.

use adapts_core::adapters::{Adapter, AdapterConfig, AdapterKind, ElboSettings, Noise, Objective, Sigma2};
use adapts_core::forecaster::{random_linear_fm, random_mlp_fm, FrozenForecaster};
use adapts_core::optim::Tape;
use adapts_core::{Matrix, Rng};

const H_STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;

struct Case {
    ad: Adapter,
    x: Matrix,
    y: Matrix,
    n: usize,
    noise: Noise,
    objective: Objective,
    elbo: ElboSettings,
}

impl Case {
    /// Loss and kink signature with parameter `p` (or the input when
    /// `p == n_params`) replaced by `value`.
    fn eval(&self, fm: &dyn FrozenForecaster, p: usize, value: &Matrix) -> (f64, u64) {
        let mut ad = self.ad.clone();
        let n_params = ad.params().len();
        let x = if p == n_params { value.clone() } else { self.x.clone() };
        if p < n_params {
            ad.params_mut().get_mut(p).set_value(value.clone()).unwrap();
        }
        let mut tape = Tape::new();
        let nodes = ad.place_params(&mut tape);
        let xn = tape.param(n_params, x);
        let ln = ad.loss_graph(&mut tape, &nodes, fm, xn, &self.y, self.n, &self.noise, self.objective, self.elbo).unwrap();
        (tape.value(ln.loss)[(0, 0)], tape.kink_signature())
    }

    fn analytic(&self, fm: &dyn FrozenForecaster) -> Vec<Matrix> {
        let n_params = self.ad.params().len();
        let mut tape = Tape::new();
        let nodes = self.ad.place_params(&mut tape);
        let xn = tape.param(n_params, self.x.clone());
        let ln = self.ad.loss_graph(&mut tape, &nodes, fm, xn, &self.y, self.n, &self.noise, self.objective, self.elbo).unwrap();
        let g = tape.backward(ln.loss).unwrap();
        (0..=n_params).map(|i| g.param(i).cloned().unwrap()).collect()
    }

    fn value_of(&self, p: usize) -> Matrix {
        if p == self.ad.params().len() {
            self.x.clone()
        } else {
            self.ad.params().value(p).clone()
        }
    }
}

fn build(kind: AdapterKind, sigma2: Sigma2, fm: &dyn FrozenForecaster, d: usize, n: usize, seed: u64) -> Case {
    let mut rng = Rng::new(seed);
    let mut cfg = AdapterConfig::of_kind(kind);
    cfg.sigma2 = sigma2;
    cfg.hidden = 8;
    cfg.dropout_p = 0.3;
    if !matches!(kind, AdapterKind::Identity | AdapterKind::ClosedFormLinear | AdapterKind::LinearEncOnly | AdapterKind::LinearDecOnly) {
        cfg.d_latent = Some(d - 1);
    }
    let mut ad = Adapter::new(cfg, d, &mut rng).unwrap();
    // Move fitted kinds away from the identity so every entry matters.
    for i in 0..ad.params().len() {
        let v = ad.params().value(i);
        let bumped = v.add(&rng.normal_matrix(v.rows(), v.cols()).scale(0.3)).unwrap();
        ad.params_mut().get_mut(i).set_value(bumped).unwrap();
    }
    let (l, h) = (fm.context_len(), fm.horizon());
    let x = rng.normal_matrix(n * l, d);
    let y = rng.normal_matrix(n * h, d);
    let noise = ad.sample_noise(n, l, h, &mut rng);
    let objective = ad.default_objective();
    let elbo = ad.elbo_settings();
    Case { ad, x, y, n, noise, objective, elbo }
}

/// Worst per-tensor relative error `‖g_fd − g‖ / max(‖g_fd‖, ‖g‖)`, and the
/// number of entries skipped because a ReLU or clamp changed state.
fn check(case: &Case, fm: &dyn FrozenForecaster) -> (f64, usize) {
    let analytic = case.analytic(fm);
    let (_, sig0) = case.eval(fm, usize::MAX, &Matrix::zeros(0, 0));
    let mut worst = 0.0f64;
    let mut skipped = 0;
    for (p, g) in analytic.iter().enumerate() {
        let base = case.value_of(p);
        let mut fd = Matrix::zeros(base.rows(), base.cols());
        let mut g_kept = g.clone();
        for k in 0..base.len() {
            let mut plus = base.clone();
            plus.as_mut_slice()[k] += H_STEP;
            let mut minus = base.clone();
            minus.as_mut_slice()[k] -= H_STEP;
            let (lp, sp) = case.eval(fm, p, &plus);
            let (lm, sm) = case.eval(fm, p, &minus);
            if sp != sig0 || sm != sig0 {
                skipped += 1;
                g_kept.as_mut_slice()[k] = 0.0;
                continue;
            }
            fd.as_mut_slice()[k] = (lp - lm) / (2.0 * H_STEP);
        }
        let denom = fd.frobenius_norm().max(g_kept.frobenius_norm());
        if denom > 1e-10 {
            worst = worst.max(fd.sub(&g_kept).unwrap().frobenius_norm() / denom);
        }
    }
    (worst, skipped)
}

fn run(kind: AdapterKind, sigma2: Sigma2) {
    let mut rng = Rng::new(99);
    let linear = random_linear_fm(&mut rng, 12, 6).unwrap();
    let mlp = random_mlp_fm(&mut rng, 8, 4, 6).unwrap();
    let fms: [&dyn FrozenForecaster; 2] = [&linear, &mlp];
    for (i, fm) in fms.into_iter().enumerate() {
        for seed in 0..2u64 {
            let case = build(kind, sigma2, fm, 4 + seed as usize, 3, 1000 * i as u64 + seed);
            let (worst, skipped) = check(&case, fm);
            assert!(worst < REL_TOL, "{kind} ({sigma2}) on {}: relative error {worst:.3e}", fm.name());
            assert!(skipped < 5, "{kind}: {skipped} entries crossed a kink");
        }
    }
}

#[test]
fn identity_input_gradient() {
    run(AdapterKind::Identity, Sigma2::Fixed(1.0));
}

#[test]
fn pca_gradient() {
    run(AdapterKind::Pca, Sigma2::Fixed(1.0));
}

#[test]
fn closed_form_gradient() {
    run(AdapterKind::ClosedFormLinear, Sigma2::Fixed(1.0));
}

#[test]
fn linear_ae_gradient() {
    run(AdapterKind::LinearAe, Sigma2::Fixed(1.0));
}

#[test]
fn dropout_linear_ae_gradient() {
    run(AdapterKind::DropoutLinearAe, Sigma2::Fixed(1.0));
}

#[test]
fn enc_only_gradient() {
    run(AdapterKind::LinearEncOnly, Sigma2::Fixed(1.0));
}

#[test]
fn dec_only_gradient() {
    run(AdapterKind::LinearDecOnly, Sigma2::Fixed(1.0));
}

#[test]
fn linear_vae_gradient() {
    run(AdapterKind::LinearVae, Sigma2::Fixed(0.7));
}

#[test]
fn linear_vae_auto_sigma_gradient() {
    run(AdapterKind::LinearVae, Sigma2::Auto);
}

#[test]
fn deep_vae_gradient() {
    run(AdapterKind::DeepVae, Sigma2::Fixed(1.0));
}

#[test]
fn deep_vae_auto_sigma_gradient() {
    run(AdapterKind::DeepVae, Sigma2::Auto);
}
