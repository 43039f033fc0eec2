//! Runs the two six-agent presets and prints verdicts and check margins.

use platoon_core::{explore::estimate_accumulation, preset, run};

fn main() -> platoon_core::Result<()> {
    for name in ["fig1", "fig2"] {
        let s = preset(name)?;
        let r = run(&s)?;
        println!(
            "{name}: {} (tail variation {:.3e})",
            r.verdict.status, r.verdict.tail_variation
        );
        for e in &r.certification.entries {
            println!("  {e}");
        }
        let errors = r.trajectory.edge_errors(&s.graph, &s.offsets);
        let clusters = estimate_accumulation(&errors, 0.25, 10.0 * s.detection.tol)?;
        println!("  error-space clusters: {}", clusters.len());
        let last = errors.states.last().expect("nonempty");
        println!("  final errors: {:?}", last.as_slice());
    }
    Ok(())
}
