use std::path::Path;

use super::MetricsError;
use crate::trainer::EpochRecord;

/// Change in validation metrics from the first epoch to the last.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HistoryDeltas {
    pub val_acc: f64,
    pub val_loss: f64,
}

pub fn history_deltas(history: &[EpochRecord]) -> Result<HistoryDeltas, MetricsError> {
    let (first, last) = match (history.first(), history.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(MetricsError::EmptyHistory),
    };
    Ok(HistoryDeltas {
        val_acc: last.val_acc - first.val_acc,
        val_loss: last.val_loss - first.val_loss,
    })
}

/// CSV with one row per epoch followed by a `delta` row.
///
/// The delta row fills only the `val_loss` and `val_acc` columns.
pub fn history_csv(history: &[EpochRecord]) -> Result<String, MetricsError> {
    let deltas = history_deltas(history)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| MetricsError::Io(e.into());
    w.write_record([
        "epoch",
        "train_loss",
        "train_acc",
        "val_loss",
        "val_acc",
        "seconds",
    ])
    .map_err(io)?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.train_acc.to_string(),
            r.val_loss.to_string(),
            r.val_acc.to_string(),
            r.seconds.to_string(),
        ])
        .map_err(io)?;
    }
    w.write_record([
        "delta".to_string(),
        String::new(),
        String::new(),
        deltas.val_loss.to_string(),
        deltas.val_acc.to_string(),
        String::new(),
    ])
    .map_err(io)?;
    let bytes = w
        .into_inner()
        .map_err(|e| MetricsError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is built from UTF-8 fields"))
}

pub fn history_report(
    history: &[EpochRecord],
    path: impl AsRef<Path>,
) -> Result<HistoryDeltas, MetricsError> {
    let text = history_csv(history)?;
    std::fs::write(path, text)?;
    history_deltas(history)
}
