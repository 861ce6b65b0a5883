use std::fmt::Write as _;

use crate::error::{config_err, Result};
use crate::loss::LossRecord;

/// Metrics logged at the end of one epoch. Losses of a task the model does
/// not predict are recorded as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    pub loss_element: f64,
    pub loss_defect: f64,
    pub lambda_element: f64,
    pub lambda_defect: f64,
    /// `lambda_element * loss_element + lambda_defect * loss_defect`.
    pub loss_total: f64,
    /// Unit-weighted validation loss.
    pub val_loss: f64,
    pub checkpoint: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

pub const HISTORY_HEADER: &str =
    "epoch,lr,loss_element,loss_defect,lambda_element,lambda_defect,loss_total,val_loss,checkpoint";

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// The flagged epoch, if any.
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|r| r.checkpoint)
    }

    /// Flags the epoch with the lowest validation loss; the earliest wins ties.
    pub fn mark_best(&mut self) {
        let mut best: Option<usize> = None;
        for (i, r) in self.epochs.iter().enumerate() {
            if best.is_none_or(|b| r.val_loss < self.epochs[b].val_loss) {
                best = Some(i);
            }
        }
        for (i, r) in self.epochs.iter_mut().enumerate() {
            r.checkpoint = Some(i) == best;
        }
    }

    pub fn loss_records(&self) -> Vec<LossRecord> {
        self.epochs
            .iter()
            .map(|r| LossRecord {
                epoch: r.epoch,
                loss_element: r.loss_element,
                loss_defect: r.loss_defect,
                lambda_element: r.lambda_element,
                lambda_defect: r.lambda_defect,
                loss_total: r.loss_total,
            })
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = format!("{HISTORY_HEADER}\n");
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                r.epoch,
                r.lr,
                r.loss_element,
                r.loss_defect,
                r.lambda_element,
                r.lambda_defect,
                r.loss_total,
                r.val_loss,
                u8::from(r.checkpoint)
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<TrainHistory> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(HISTORY_HEADER) {
            return Err(config_err!("history must start with `{HISTORY_HEADER}`"));
        }
        let epochs = lines
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, line)| {
                let f: Vec<&str> = line.split(',').map(str::trim).collect();
                if f.len() != 9 {
                    return Err(config_err!("history row {}: expected 9 fields", i + 1));
                }
                let num = |k: usize| {
                    f[k].parse::<f64>()
                        .map_err(|e| config_err!("history row {} field {}: {e}", i + 1, k + 1))
                };
                Ok(EpochRecord {
                    epoch: f[0]
                        .parse()
                        .map_err(|e| config_err!("history row {}: epoch: {e}", i + 1))?,
                    lr: num(1)?,
                    loss_element: num(2)?,
                    loss_defect: num(3)?,
                    lambda_element: num(4)?,
                    lambda_defect: num(5)?,
                    loss_total: num(6)?,
                    val_loss: num(7)?,
                    checkpoint: match f[8] {
                        "0" => false,
                        "1" => true,
                        other => return Err(config_err!("history row {}: checkpoint flag `{other}`", i + 1)),
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainHistory { epochs })
    }
}
