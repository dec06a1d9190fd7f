//! Metrics for a fixed confusion matrix and for a small prediction list.

use tumorscan::eval::{confusion, ConfusionMatrix, Report};

fn main() -> tumorscan::Result<()> {
    let cm = ConfusionMatrix::new(306, 2, 5, 287);
    let report = Report::new(&cm)?;
    println!("{report}");
    println!("{}", report.to_json());

    let truth = [1, 1, 1, 0, 0, 0, 0, 1];
    let preds = [1, 0, 1, 0, 0, 1, 0, 1];
    println!("{}", Report::new(&confusion(&preds, &truth)?)?);

    // nothing predicted positive: precision and F1 are undefined
    let none = Report::new(&ConfusionMatrix::new(0, 0, 3, 5))?;
    println!("{}", none.to_json());
    Ok(())
}
