//! Confusion matrices and per-epoch summaries as CSV.
//!
//!     cargo run --example metrics

use senet::metrics::{argmax, epochs_csv, ConfusionMatrix, EpochReport};

fn main() {
    let names = ["bream", "perch", "pike"].map(String::from).to_vec();
    let mut cm = ConfusionMatrix::new(names);
    let probs = [
        ([0.7, 0.2, 0.1], 0),
        ([0.1, 0.8, 0.1], 1),
        ([0.4, 0.5, 0.1], 0),
        ([0.2, 0.2, 0.6], 2),
        ([0.3, 0.3, 0.4], 1),
        ([0.1, 0.1, 0.8], 2),
    ];
    for (row, truth) in probs {
        cm.record(truth, argmax(&row));
    }
    println!("accuracy {:.3} ({} of {})", cm.accuracy(), cm.trace(), cm.total());
    print!("{}", cm.to_csv());
    print!("{}", cm.to_normalized_csv());

    let reports: Vec<EpochReport> = (1..=3)
        .map(|e| EpochReport {
            epoch: e,
            train_loss: 1.2 / e as f64,
            train_accuracy: 0.5 + 0.1 * e as f64,
            validation_accuracy: 0.45 + 0.1 * e as f64,
            seconds: 0.25,
        })
        .collect();
    print!("{}", epochs_csv(&reports));
}
