use super::{BackendError, Snapshot, TrainConfig, TrainExample, TrainerBackend};

/// Replays fixed per-epoch losses. Useful for exercising the loop, metric
/// recording and export with known numbers, and for failure injection.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    train_losses: Vec<f64>,
    val_losses: Vec<f64>,
    full_val_loss: Option<f64>,
    fail_at_epoch: Option<u32>,
    epoch: u32,
}

impl ScriptedBackend {
    pub fn new(train_losses: Vec<f64>, val_losses: Vec<f64>) -> Self {
        ScriptedBackend { train_losses, val_losses, full_val_loss: None, fail_at_epoch: None, epoch: 0 }
    }

    /// Report `loss` as the full-validation loss instead of the last epoch's.
    pub fn with_full_validation(mut self, loss: f64) -> Self {
        self.full_val_loss = Some(loss);
        self
    }

    /// Make `fit_epoch` fail when epoch `epoch` (1-based) starts.
    pub fn failing_at(mut self, epoch: u32) -> Self {
        self.fail_at_epoch = Some(epoch);
        self
    }

    fn script_index(&self) -> Result<usize, BackendError> {
        let i = self.epoch.checked_sub(1).map(|e| e as usize).unwrap_or(0);
        if i >= self.train_losses.len() || i >= self.val_losses.len() {
            return Err(BackendError::new(format!("no scripted loss for epoch {}", self.epoch)));
        }
        Ok(i)
    }
}

impl TrainerBackend for ScriptedBackend {
    fn id(&self) -> &str {
        "scripted"
    }

    fn fit_epoch(&mut self, _batches: &[&[TrainExample]], _cfg: &TrainConfig) -> Result<f64, BackendError> {
        self.epoch += 1;
        if self.fail_at_epoch == Some(self.epoch) {
            return Err(BackendError::new(format!("scripted failure in epoch {}", self.epoch)));
        }
        Ok(self.train_losses[self.script_index()?])
    }

    fn evaluate(&self, _val: &[TrainExample]) -> Result<f64, BackendError> {
        Ok(self.val_losses[self.script_index()?])
    }

    fn full_validation(&self, val: &[TrainExample]) -> Result<f64, BackendError> {
        match self.full_val_loss {
            Some(v) => Ok(v),
            None => self.evaluate(val),
        }
    }

    fn snapshot(&self) -> Result<Snapshot, BackendError> {
        Ok(Snapshot { backend_id: "scripted".into(), payload: serde_json::json!({ "epoch": self.epoch }) })
    }
}
