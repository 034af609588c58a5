use std::fmt::Write;

/// Orthogonality statistics of one weight layer at the end of an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStats {
    /// Index into the layer list.
    pub layer: usize,
    /// σ(WᵀW − I) from the exact eigensolver.
    pub sigma: f64,
    /// Power-iteration estimate of the same quantity on the same weights.
    pub sigma_power: f64,
    pub coherence: f64,
    pub col_norm_mean: f64,
    pub col_norm_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lambda: f64,
    pub weight_decay: f64,
    pub learning_rate: f64,
    /// Mean full objective over the epoch's mini-batches.
    pub train_loss: f64,
    /// Accuracy on the mini-batches as they were seen during the epoch.
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub layers: Vec<LayerStats>,
    pub wall_clock_secs: f64,
}

impl EpochRecord {
    /// Mean σ(WᵀW − I) across weight layers.
    pub fn mean_sigma(&self) -> f64 {
        self.layers.iter().map(|l| l.sigma).sum::<f64>() / self.layers.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    /// Layer indices of the weight layers, in order.
    pub weight_layers: Vec<usize>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainRecord {
    pub fn new(weight_layers: Vec<usize>) -> Self {
        Self {
            weight_layers,
            epochs: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// Column names of [`to_csv`](Self::to_csv).
    pub fn header(&self) -> Vec<String> {
        let mut cols: Vec<String> = [
            "epoch",
            "lambda",
            "weight_decay",
            "learning_rate",
            "train_loss",
            "train_accuracy",
            "val_accuracy",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for l in &self.weight_layers {
            for stat in ["sigma", "sigma_power", "coherence", "col_norm_mean", "col_norm_std"] {
                cols.push(format!("layer{l}_{stat}"));
            }
        }
        cols
    }

    /// One row per epoch. Wall-clock time is left out so that identical runs
    /// produce identical bytes; see [`timing_csv`](Self::timing_csv).
    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for e in &self.epochs {
            let mut fields = vec![
                e.epoch.to_string(),
                e.lambda.to_string(),
                e.weight_decay.to_string(),
                e.learning_rate.to_string(),
                e.train_loss.to_string(),
                e.train_accuracy.to_string(),
                e.val_accuracy.to_string(),
            ];
            for l in &e.layers {
                fields.extend([
                    l.sigma.to_string(),
                    l.sigma_power.to_string(),
                    l.coherence.to_string(),
                    l.col_norm_mean.to_string(),
                    l.col_norm_std.to_string(),
                ]);
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("epoch,wall_clock_secs\n");
        for e in &self.epochs {
            writeln!(out, "{},{}", e.epoch, e.wall_clock_secs).unwrap();
        }
        out
    }
}
