//! A model wrapper that counts evaluations.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::hamiltonian::TargetModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CallCounts {
    pub log_posterior: usize,
    pub gradient: usize,
    pub metric: usize,
    pub metric_grad: usize,
}

#[derive(Debug, Default)]
pub struct CountingModel<M> {
    inner: M,
    log_posterior: AtomicUsize,
    gradient: AtomicUsize,
    metric: AtomicUsize,
    metric_grad: AtomicUsize,
}

impl<M: TargetModel> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        Self {
            inner,
            log_posterior: AtomicUsize::new(0),
            gradient: AtomicUsize::new(0),
            metric: AtomicUsize::new(0),
            metric_grad: AtomicUsize::new(0),
        }
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn counts(&self) -> CallCounts {
        CallCounts {
            log_posterior: self.log_posterior.load(Ordering::Relaxed),
            gradient: self.gradient.load(Ordering::Relaxed),
            metric: self.metric.load(Ordering::Relaxed),
            metric_grad: self.metric_grad.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        for c in [&self.log_posterior, &self.gradient, &self.metric, &self.metric_grad] {
            c.store(0, Ordering::Relaxed);
        }
    }
}

impl<M: TargetModel> TargetModel for CountingModel<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_posterior(&self, q: &DVector<f64>) -> f64 {
        self.log_posterior.fetch_add(1, Ordering::Relaxed);
        self.inner.log_posterior(q)
    }

    fn grad_log_posterior(&self, q: &DVector<f64>) -> DVector<f64> {
        self.gradient.fetch_add(1, Ordering::Relaxed);
        self.inner.grad_log_posterior(q)
    }

    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64> {
        self.metric.fetch_add(1, Ordering::Relaxed);
        self.inner.metric(q)
    }

    fn metric_grad(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.metric_grad.fetch_add(1, Ordering::Relaxed);
        self.inner.metric_grad(q)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}
