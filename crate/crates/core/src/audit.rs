//! Central finite-difference checks of analytic derivatives.

use nalgebra::DVector;

use crate::error::Result;
use crate::hamiltonian::{grad_p_hamiltonian, grad_q_hamiltonian, hamiltonian, PhasePoint, TargetModel};

pub const AUDIT_STEP: f64 = 1e-6;
pub const AUDIT_RELATIVE: f64 = 1e-5;
pub const AUDIT_ABSOLUTE: f64 = 1e-7;

/// The worst disagreement found for one derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub quantity: &'static str,
    pub analytic: f64,
    pub numeric: f64,
    /// `|analytic - numeric| / max(rel·|numeric|, abs)`; at most 1 passes.
    pub ratio: f64,
}

impl Discrepancy {
    pub fn passed(&self) -> bool {
        self.ratio <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub gradient: Discrepancy,
    pub metric_grad: Discrepancy,
    pub grad_p_hamiltonian: Discrepancy,
    pub grad_q_hamiltonian: Discrepancy,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.all().iter().all(|d| d.passed())
    }

    pub fn all(&self) -> [&Discrepancy; 4] {
        [&self.gradient, &self.metric_grad, &self.grad_p_hamiltonian, &self.grad_q_hamiltonian]
    }

    pub fn worst(&self) -> &Discrepancy {
        self.all()
            .into_iter()
            .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
            .expect("four entries")
    }
}

struct Tracker {
    quantity: &'static str,
    worst: Option<Discrepancy>,
}

impl Tracker {
    fn new(quantity: &'static str) -> Self {
        Self { quantity, worst: None }
    }

    fn check(&mut self, analytic: f64, numeric: f64) {
        let scale = (AUDIT_RELATIVE * numeric.abs()).max(AUDIT_ABSOLUTE);
        let ratio = if analytic.is_finite() && numeric.is_finite() {
            (analytic - numeric).abs() / scale
        } else {
            f64::INFINITY
        };
        if self.worst.as_ref().is_none_or(|w| ratio > w.ratio) {
            self.worst = Some(Discrepancy {
                quantity: self.quantity,
                analytic,
                numeric,
                ratio,
            });
        }
    }

    fn finish(self) -> Discrepancy {
        self.worst.unwrap_or(Discrepancy {
            quantity: self.quantity,
            analytic: 0.0,
            numeric: 0.0,
            ratio: 0.0,
        })
    }
}

fn shifted(v: &DVector<f64>, i: usize, delta: f64) -> DVector<f64> {
    let mut out = v.clone();
    out[i] += delta;
    out
}

/// Compares every analytic derivative of `model` at `point` against a
/// central difference with step `h`.
pub fn audit_derivatives<M: TargetModel + ?Sized>(model: &M, point: &PhasePoint, h: f64) -> Result<AuditReport> {
    let q = &point.q;
    let p = &point.p;
    let m = q.len();

    let mut gradient = Tracker::new("grad_log_posterior");
    let analytic = model.grad_log_posterior(q);
    for i in 0..m {
        let fd = (model.log_posterior(&shifted(q, i, h)) - model.log_posterior(&shifted(q, i, -h))) / (2.0 * h);
        gradient.check(analytic[i], fd);
    }

    let mut metric_grad = Tracker::new("metric_grad");
    let analytic = model.metric_grad(q);
    for (i, d) in analytic.iter().enumerate() {
        let fd = (model.metric(&shifted(q, i, h)) - model.metric(&shifted(q, i, -h))) / (2.0 * h);
        for (a, n) in d.iter().zip(fd.iter()) {
            metric_grad.check(*a, *n);
        }
    }

    let energy = |q: &DVector<f64>, p: &DVector<f64>| hamiltonian(model, &PhasePoint::new(q.clone(), p.clone()));

    let mut grad_p = Tracker::new("grad_p_hamiltonian");
    let analytic = grad_p_hamiltonian(model, point)?;
    for i in 0..m {
        let fd = (energy(q, &shifted(p, i, h))? - energy(q, &shifted(p, i, -h))?) / (2.0 * h);
        grad_p.check(analytic[i], fd);
    }

    let mut grad_q = Tracker::new("grad_q_hamiltonian");
    let analytic = grad_q_hamiltonian(model, point)?;
    for i in 0..m {
        let fd = (energy(&shifted(q, i, h), p)? - energy(&shifted(q, i, -h), p)?) / (2.0 * h);
        grad_q.check(analytic[i], fd);
    }

    Ok(AuditReport {
        gradient: gradient.finish(),
        metric_grad: metric_grad.finish(),
        grad_p_hamiltonian: grad_p.finish(),
        grad_q_hamiltonian: grad_q.finish(),
    })
}
