//! Confusion counts, per-class scores, micro vs macro aggregation and the
//! comparison table.
//!
//! `cargo run --example metrics_table`

use protochange::metrics::{aggregate_with, class_metrics, confusion, render_table, Aggregation, ConfusionMatrix, MethodRow};
use protochange::ChangeMask;

fn main() -> anyhow::Result<()> {
    let gt = ChangeMask::from_fn(64, 64, |x, y| (16..40).contains(&x) && (16..40).contains(&y));
    let good = ChangeMask::from_fn(64, 64, |x, y| (18..40).contains(&x) && (16..42).contains(&y));
    let bad = ChangeMask::from_fn(64, 64, |x, _| x < 8);

    let a = confusion(&good, &gt)?;
    let b = confusion(&bad, &gt)?;
    println!("{a:?}");
    println!("{}", serde_json::to_string(&class_metrics(&a)?)?);

    let rows: Vec<MethodRow> = [("good", vec![a]), ("bad", vec![b]), ("both", vec![a, b])]
        .into_iter()
        .map(|(name, cms)| -> anyhow::Result<MethodRow> {
            Ok(MethodRow {
                method: name.to_string(),
                metrics: aggregate_with(&cms, Aggregation::Micro)?,
                confusion: cms.iter().fold(ConfusionMatrix::default(), |s, c| s.merge(c)),
                samples: cms.len(),
                failed: 0,
            })
        })
        .collect::<anyhow::Result<_>>()?;
    print!("{}", render_table(&rows));

    let macro_f1 = aggregate_with(&[a, b], Aggregation::Macro)?.f1_1;
    let micro_f1 = aggregate_with(&[a, b], Aggregation::Micro)?.f1_1;
    println!("F1(change) over both samples: micro {micro_f1:.3}, macro {macro_f1:.3}");
    Ok(())
}
