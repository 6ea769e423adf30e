//! Plain-text rendering of study summaries.

use crate::study::SummaryRow;

pub fn render_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>6} {:>6} {:>14} {:>14} {:>14} {:>14} {:>10} {:>9}\n",
        "model", "n", "reps", "scaled|MLE-CM|", "scaled|dSE|", "scaled|dL|", "scaled|dU|", "coverage", "failures"
    ));
    out.push_str(&"-".repeat(108));
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:<12} {:>6} {:>6} {:>14.4} {:>14.4} {:>14.4} {:>14.4} {:>10.3} {:>9}\n",
            r.model, r.n, r.reps, r.scaled[0], r.scaled[1], r.scaled[2], r.scaled[3], r.coverage, r.failures
        ));
    }
    out
}
