//! Match predicted points to truth and compute the detection report.
//!
//! cargo run --example match_points

use msl::{detection_loss, match_points, report, PointSet};

fn main() -> msl::Result<()> {
    let truth = PointSet::from(vec![(5.0, 5.0), (20.0, 8.0), (30.0, 30.0)]);
    let pred = PointSet::from(vec![(6.0, 5.5), (21.5, 9.0), (12.0, 12.0)]);
    let tau = 3.0;
    let m = match_points(&pred, &truth, tau);
    println!("pairs {:?}  tp {} fp {} fn {}", m.pairs, m.tp, m.fp, m.fn_);
    println!("loss {:.4}", detection_loss(&pred, &truth, tau));

    let r = report(&[pred, PointSet::empty()], &[truth, PointSet::empty()], tau)?;
    println!("precision {:.3} recall {:.3} f1 {:.3}", r.precision, r.recall, r.f1);
    Ok(())
}
