//! Plain-text operating-characteristic table, one block per scenario.

use std::fmt::Write;

use basket_core::model::TrialSpec;
use basket_core::simulator::{OperatingCharacteristics, ScenarioTruth};

/// Rows: scenarios, each with a truth line (sensitive arms marked `*`) and one
/// line per design. Columns: percent probability of claiming efficacy per arm.
pub fn render(
    trial: &TrialSpec,
    scenarios: &[(String, ScenarioTruth)],
    designs: &[String],
    results: &[(String, String, OperatingCharacteristics)],
) -> String {
    let j = trial.n_arms();
    let name_w = designs.iter().map(String::len).max().unwrap_or(0).max(11);
    let mut out = String::new();
    let _ = write!(out, "{:<10} {:<name_w$}", "Scenario", "Design");
    for k in 1..=j {
        let _ = write!(out, " {:>8}", format!("Arm {k}"));
    }
    out.push('\n');
    let rule = "-".repeat(11 + name_w + 9 * j);
    out.push_str(&rule);
    out.push('\n');
    for (si, (scenario, truth)) in scenarios.iter().enumerate() {
        if si > 0 {
            out.push('\n');
        }
        let _ = write!(out, "{:<10} {:<name_w$}", scenario, "truth");
        for (arm, &p) in trial.arms.iter().zip(&truth.true_p) {
            let mark = if p > arm.p0 { "*" } else { " " };
            let _ = write!(out, " {:>7}{mark}", format!("{p:.2}"));
        }
        out.push('\n');
        for design in designs {
            let Some((_, _, oc)) = results.iter().find(|(s, d, _)| s == scenario && d == design) else {
                continue;
            };
            let _ = write!(out, "{:<10} {:<name_w$}", "", design);
            for a in &oc.arms {
                let _ = write!(out, " {:>8.2}", 100.0 * a.claim_prob);
            }
            out.push('\n');
        }
    }
    out.push_str(&rule);
    out.push('\n');
    out.push_str("* sensitive arm (true rate above the null rate)\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use basket_core::simulator::ArmOc;

    #[test]
    fn layout() {
        let trial = TrialSpec::uniform(2, 0.05, 0.2, 20, vec![10, 20]).unwrap();
        let truth = ScenarioTruth::new(vec![0.2, 0.05]).unwrap();
        let oc = OperatingCharacteristics {
            arms: vec![
                ArmOc {
                    claim_prob: 0.6244,
                    mean_n: 18.0,
                    early_stop_prob: 0.1,
                    mc_se: 0.01,
                },
                ArmOc {
                    claim_prob: 0.0902,
                    mean_n: 12.0,
                    early_stop_prob: 0.8,
                    mc_se: 0.004,
                },
            ],
            n_reps: 5000,
            seed: 1,
        };
        let text = render(
            &trial,
            &[("1".into(), truth)],
            &["Independent".into()],
            &[("1".into(), "Independent".into(), oc)],
        );
        assert!(text.contains("0.20*"));
        assert!(text.contains("62.44"));
        assert!(text.contains(" 9.02"));
        assert_eq!(text.lines().filter(|l| l.contains("Independent")).count(), 1);
    }
}
