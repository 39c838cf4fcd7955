//! Learning-rate plateau scheduling and early-stopping, driven by the
//! per-epoch training loss.
//!
//! An epoch counts as an improvement only when its loss is strictly below
//! `best - threshold`; the best value updates only on improvement.

/// Multiplies the learning rate by `factor` (down to `min_lr`) after
/// `patience` consecutive non-improving epochs, then resets its wait
/// counter.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    lr: f64,
    factor: f64,
    patience: usize,
    threshold: f64,
    min_lr: f64,
    best: Option<f64>,
    wait: usize,
}

impl PlateauScheduler {
    pub fn new(initial_lr: f64, factor: f64, patience: usize, threshold: f64, min_lr: f64) -> Self {
        PlateauScheduler {
            lr: initial_lr,
            factor,
            patience,
            threshold,
            min_lr,
            best: None,
            wait: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Feed one epoch's loss; returns the learning rate for the next epoch.
    pub fn observe(&mut self, loss: f64) -> f64 {
        match self.best {
            Some(best) if loss < best - self.threshold => {
                self.best = Some(loss);
                self.wait = 0;
            }
            Some(_) => {
                self.wait += 1;
                if self.wait >= self.patience {
                    self.lr = (self.lr * self.factor).max(self.min_lr);
                    self.wait = 0;
                }
            }
            None => {
                self.best = Some(loss);
                self.wait = 0;
            }
        }
        self.lr
    }
}

/// Signals a stop after `patience` consecutive epochs that fail to improve
/// the best loss by more than `min_delta`.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    min_delta: f64,
    patience: usize,
    best: Option<f64>,
    wait: usize,
}

impl EarlyStopper {
    pub fn new(min_delta: f64, patience: usize) -> Self {
        EarlyStopper {
            min_delta,
            patience,
            best: None,
            wait: 0,
        }
    }

    /// Feed one epoch's loss; returns true when training should stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        match self.best {
            Some(best) if loss < best - self.min_delta => {
                self.best = Some(loss);
                self.wait = 0;
            }
            Some(_) => {
                self.wait += 1;
            }
            None => {
                self.best = Some(loss);
                self.wait = 0;
            }
        }
        self.wait >= self.patience
    }
}
