//! Builds a confusion matrix from predictions and prints the per-class
//! report, its JSON form and the CSV matrix.
//!
//! cargo run --example classification_report

use vibediag::hybrid::Metrics;

fn main() {
    let truth = [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4, 4];
    let predicted = [0, 0, 3, 1, 1, 2, 2, 2, 2, 3, 1, 3, 4, 4, 4, 2];
    let m = Metrics::from_predictions(&truth, &predicted);
    println!("{} errors in {}\n", m.errors(), m.total());
    print!("{}", m.report().to_text());
    println!("\n{}", m.report().to_json());
    m.write_confusion_csv(std::io::stdout()).unwrap();
}
