//! Shared training-loop plumbing: per-epoch logs and worker-count default.

#[derive(Debug, Clone)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainLog {
    pub fn to_text(&self) -> String {
        let mut s = String::from("epoch\ttrain_loss\tval_loss\tlr\n");
        for e in &self.epochs {
            s.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6e}\n",
                e.epoch, e.train_loss, e.val_loss, e.lr
            ));
        }
        s.push_str(&format!(
            "best_epoch\t{}\tbest_val_loss\t{:.6}\n",
            self.best_epoch, self.best_val_loss
        ));
        s
    }

    pub fn final_val_loss(&self) -> f64 {
        self.epochs.last().map(|e| e.val_loss).unwrap_or(f64::NAN)
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get().min(8))
        .unwrap_or(1)
}
