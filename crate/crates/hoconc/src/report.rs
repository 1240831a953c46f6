//! Human-readable report rendering shared by the CLI and the corpus
//! harness.

use hoconc_core::evolve::trail_to_string;
use hoconc_core::lang::Program;

use crate::search::Report;

pub fn render(p: &Program, report: &Report) -> String {
    match report {
        Report::BugFound { reified, iterations, replay_confirmed, trail, .. } => {
            let mut out = format!(
                "bug found after {iterations} iteration(s); replay {}\n",
                if *replay_confirmed { "confirmed" } else { "FAILED" }
            );
            if p.inputs.is_empty() {
                out.push_str("counterexample: (no inputs)\n");
            } else {
                out.push_str("counterexample:\n");
                for (name, _) in &p.inputs {
                    match reified.get(name) {
                        Some(v) => out.push_str(&format!("  {name} = {}\n", v.print())),
                        None => out.push_str(&format!("  {name} = <missing>\n")),
                    }
                }
            }
            if !trail.is_empty() {
                out.push_str(&format!("trail: {}\n", trail_to_string(trail)));
            }
            out
        }
        Report::Exhausted { iterations } => {
            format!("no bug found: search exhausted after {iterations} iteration(s)\n")
        }
        Report::BudgetExceeded { iterations } => {
            format!("no bug found: budget exceeded after {iterations} iteration(s)\n")
        }
    }
}
