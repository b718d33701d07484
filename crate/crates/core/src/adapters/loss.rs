//! Training objectives built on the tape.

use std::f64::consts::PI;

use super::config::Sigma2;
use super::model::{Adapter, AdapterGraph, Noise};
use crate::error::{Error, Result};
use crate::forecaster::FrozenForecaster;
use crate::numkit::Matrix;
use crate::optim::{Gradients, NodeId, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Squared Frobenius error per window, averaged over windows.
    Mse,
    /// Negative ELBO per window (Gaussian likelihood plus `β·KL`), averaged
    /// over windows.
    Elbo,
}

/// Likelihood settings for [`Objective::Elbo`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboSettings {
    pub beta: f64,
    pub sigma2: Sigma2,
}

#[derive(Debug, Clone, Copy)]
pub struct LossNodes {
    pub loss: NodeId,
    pub nll: NodeId,
    pub kl: Option<NodeId>,
    pub graph: AdapterGraph,
}

/// Scalar parts of one loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub nll: f64,
    pub kl: f64,
}

impl Adapter {
    /// The objective this adapter trains with by default.
    pub fn default_objective(&self) -> Objective {
        if self.kind().is_vae() {
            Objective::Elbo
        } else {
            Objective::Mse
        }
    }

    pub fn elbo_settings(&self) -> ElboSettings {
        ElboSettings { beta: self.config.beta, sigma2: self.config.sigma2 }
    }

    /// Builds the loss for `n_windows` stacked windows.
    #[allow(clippy::too_many_arguments)]
    pub fn loss_graph(
        &self,
        tape: &mut Tape,
        nodes: &[NodeId],
        fm: &dyn FrozenForecaster,
        x: NodeId,
        y: &Matrix,
        n_windows: usize,
        noise: &Noise,
        objective: Objective,
        elbo: ElboSettings,
    ) -> Result<LossNodes> {
        let g = self.graph(tape, nodes, fm, x, noise)?;
        if tape.value(g.pred).shape() != y.shape() {
            return Err(Error::mismatch("loss target", tape.value(g.pred).shape(), y.shape()));
        }
        let inv_b = 1.0 / n_windows as f64;
        let y_node = tape.constant(y.clone());
        let r = tape.sub(y_node, g.pred)?;
        let r2 = tape.mul(r, r)?;
        match objective {
            Objective::Mse => {
                let s = tape.sum(r2);
                let loss = tape.scale(s, inv_b);
                Ok(LossNodes { loss, nll: loss, kl: None, graph: g })
            }
            Objective::Elbo => {
                if !(elbo.beta >= 0.0) {
                    return Err(Error::InvalidArgument(format!("beta must be >= 0, got {}", elbo.beta)));
                }
                let cells_per_window = (y.len() / n_windows) as f64;
                let nll = match (elbo.sigma2, g.log_sigma2) {
                    (Sigma2::Fixed(s2), None) => {
                        if !(s2 > 0.0) {
                            return Err(Error::InvalidArgument(format!("sigma2 must be > 0, got {s2}")));
                        }
                        let s = tape.sum(r2);
                        let scaled = tape.scale(s, inv_b / (2.0 * s2));
                        let c = tape.constant(Matrix::filled(1, 1, 0.5 * cells_per_window * (2.0 * PI * s2).ln()));
                        tape.add(scaled, c)?
                    }
                    (Sigma2::Auto, Some(ls)) => {
                        let neg = tape.scale(ls, -1.0);
                        let prec = tape.exp(neg);
                        let weighted = tape.mul(prec, r2)?;
                        let cell = tape.add(weighted, ls)?;
                        let s = tape.sum(cell);
                        let scaled = tape.scale(s, 0.5 * inv_b);
                        let c = tape.constant(Matrix::filled(1, 1, 0.5 * cells_per_window * (2.0 * PI).ln()));
                        tape.add(scaled, c)?
                    }
                    (Sigma2::Auto, None) => {
                        return Err(Error::InvalidArgument("sigma2 = auto needs an adapter built with learned variance".into()))
                    }
                    (Sigma2::Fixed(_), Some(_)) => {
                        return Err(Error::InvalidArgument("adapter predicts its variance; use sigma2 = auto".into()))
                    }
                };
                let kl = match (g.mu, g.log_var) {
                    (Some(mu), Some(lv)) => {
                        let mu2 = tape.mul(mu, mu)?;
                        let var = tape.exp(lv);
                        let a = tape.add(mu2, var)?;
                        let cell = tape.sub(a, lv)?;
                        let s = tape.sum(cell);
                        let n_cells = tape.value(mu).len() as f64;
                        let c = tape.constant(Matrix::filled(1, 1, -n_cells));
                        let centered = tape.add(s, c)?;
                        Some(tape.scale(centered, 0.5 * inv_b))
                    }
                    _ => None,
                };
                let loss = match kl {
                    Some(k) if elbo.beta > 0.0 => {
                        let bk = tape.scale(k, elbo.beta);
                        tape.add(nll, bk)?
                    }
                    _ => nll,
                };
                Ok(LossNodes { loss, nll, kl, graph: g })
            }
        }
    }

    /// Evaluates the loss on a batch and, if `with_grad`, its gradients with
    /// respect to every parameter.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate_loss(
        &self,
        fm: &dyn FrozenForecaster,
        contexts: &[Matrix],
        targets: &[Matrix],
        noise: &Noise,
        objective: Objective,
        elbo: ElboSettings,
        with_grad: bool,
    ) -> Result<(LossValue, Option<Gradients>)> {
        if contexts.is_empty() || contexts.len() != targets.len() {
            return Err(Error::InvalidArgument(format!("{} contexts for {} targets", contexts.len(), targets.len())));
        }
        let mut tape = Tape::new();
        let nodes = self.place_params(&mut tape);
        let x = tape.constant(Matrix::vstack(contexts)?);
        let y = Matrix::vstack(targets)?;
        let ln = self.loss_graph(&mut tape, &nodes, fm, x, &y, contexts.len(), noise, objective, elbo)?;
        let value = LossValue {
            loss: tape.value(ln.loss)[(0, 0)],
            nll: tape.value(ln.nll)[(0, 0)],
            kl: ln.kl.map_or(0.0, |k| tape.value(k)[(0, 0)]),
        };
        let grads = if with_grad { Some(tape.backward(ln.loss)?) } else { None };
        Ok((value, grads))
    }
}
