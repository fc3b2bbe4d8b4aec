use efmix::learners::TraceRow;

use crate::csv::fmt_f64;

pub const HEADER: &str = "iteration,phase,complete_ll,incomplete_ll,kmeans_loss";

pub fn render(rows: &[TraceRow]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iteration,
            r.phase.as_str(),
            fmt_f64(r.complete_ll),
            fmt_f64(r.incomplete_ll),
            fmt_f64(r.kmeans_loss)
        ));
    }
    out
}
