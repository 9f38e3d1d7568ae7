//! Score predictions, compute point improvements, and render a results table
//! in Markdown and CSV.
//!
//! cargo run --example metrics_table

use ilc::eval::{compute_metrics, improvement, render_table, MetricsReport, ReportGrid};
use ilc::Label;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    use Label::{Deceptive as D, NonDeceptive as H};
    let labels = [D, D, D, H, H, H, H, H, H, H];
    let preds = [D, D, H, D, H, H, H, H, H, H];
    let r = compute_metrics(&preds, &labels)?;
    println!(
        "tp {} fp {} fn {} tn {}: P {:.3} R {:.3} F1 {:.3} ACC {:.2}",
        r.tp, r.fp, r.fn_, r.tn, r.precision, r.recall, r.f1_positive, r.accuracy
    );

    let cell = |tp, fp, fn_, tn| Some(MetricsReport::from_counts(tp, fp, fn_, tn));
    let grid = ReportGrid::new(
        vec!["Email".into(), "News".into()],
        vec!["Baseline".into(), "ILC-EN".into(), "ILC-ETN".into()],
        vec![
            vec![cell(40, 10, 12, 438), cell(44, 9, 8, 439), cell(46, 7, 6, 441)],
            vec![cell(300, 90, 80, 530), cell(310, 85, 70, 535), None],
        ],
    )?;
    let baseline = grid.cells[0][0].clone().unwrap();
    let best = grid.cells[0][2].clone().unwrap();
    println!("Email ILC-ETN vs baseline: {:+.2} F1 points\n", improvement(&baseline, &best));
    let table = render_table(&grid);
    println!("{}\n{}", table.markdown, table.csv);
    Ok(())
}
