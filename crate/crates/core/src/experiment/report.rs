use std::fmt::Write as _;

use super::analysis::StudyReport;
use super::session::SessionReport;
use super::stats::PairedEffect;
use crate::error::{Error, Result};

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.digits$}"))
}

fn p_value(p: f64) -> String {
    if p < 0.001 {
        "< 0.001".into()
    } else {
        format!("{p:.3}")
    }
}

fn effect_row(name: &str, unit: &str, e: &PairedEffect) -> String {
    let t = if e.t.is_infinite() {
        if e.t > 0.0 { "+inf" } else { "-inf" }.to_string()
    } else {
        format!("{:.2}", e.t)
    };
    format!(
        "| {name} ({unit}) | {:.4} | {:.4} | {t} | {} | {} |{}\n",
        e.estimate,
        e.se,
        e.df,
        p_value(e.p),
        if e.degenerate { " degenerate" } else { "" }
    )
}

/// Human-readable study summary: accuracy tallies per trial position,
/// per-class reach means, and the paired effects.
pub fn study_markdown(report: &StudyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Study report\n");
    let _ = writeln!(
        s,
        "{} participants, {} trials: {} correct, {} wrong, {} unknown. Accuracy {}.\n",
        report.n_participants, report.total_trials, report.correct, report.wrong, report.unknown, report.accuracy_percent
    );

    let _ = writeln!(s, "## Accuracy by class\n");
    let _ = writeln!(s, "| class | trials | correct | wrong | unknown | accuracy |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    for c in &report.per_class {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {:.2}% |",
            c.class,
            c.total,
            c.correct,
            c.wrong,
            c.unknown,
            c.accuracy * 100.0
        );
    }

    let _ = writeln!(s, "\n## Decisions by trial\n");
    let _ = writeln!(s, "| trial | correct | wrong | unknown |");
    let _ = writeln!(s, "|---|---|---|---|");
    for t in &report.per_trial_index {
        let _ = writeln!(s, "| {} | {} | {} | {} |", t.trial_idx + 1, t.correct, t.wrong, t.unknown);
    }

    let _ = writeln!(s, "\n## Reach kinematics\n");
    let _ = writeln!(s, "| class | duration (s) | median speed (m/s) |");
    let _ = writeln!(s, "|---|---|---|");
    for m in &report.class_means {
        let _ = writeln!(s, "| {} | {} | {} |", m.class, opt(m.reach_duration, 3), opt(m.reach_median_speed, 4));
    }

    let _ = writeln!(s, "\n## Paired effects (C - NC)\n");
    let _ = writeln!(s, "| measure | estimate | SE | t | df | p |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    s.push_str(&effect_row("reach duration", "s", &report.effects.reach_duration));
    s.push_str(&effect_row("median speed", "m/s", &report.effects.reach_median_speed));

    if !report.notes.is_empty() {
        let _ = writeln!(s, "\n## Notes\n");
        for n in &report.notes {
            let _ = writeln!(s, "- {n}");
        }
    }
    s
}

/// Per-trial rows of every session, one CSV line each.
pub fn trial_rows_csv(reports: &[SessionReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record([
        "participant",
        "trial_idx",
        "block",
        "class",
        "profile_id",
        "decision",
        "correct",
        "posterior",
        "reach_duration",
        "reach_median_speed",
        "release_time",
        "aborted",
    ])
    .map_err(err)?;
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in reports {
        for t in &r.trials {
            let decision = serde_json::to_value(t.decision)?;
            w.write_record([
                r.participant.to_string(),
                t.trial_idx.to_string(),
                t.block.to_string(),
                t.class.to_string(),
                t.profile_id.clone(),
                decision.as_str().unwrap_or_default().to_string(),
                t.correct.map(|c| c.to_string()).unwrap_or_default(),
                num(t.posterior),
                num(t.reach_duration),
                num(t.reach_median_speed),
                num(t.release_time),
                t.aborted.clone().unwrap_or_default(),
            ])
            .map_err(err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
