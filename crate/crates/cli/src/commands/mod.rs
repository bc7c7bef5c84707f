mod evaluate;
mod prepare;
mod register;
mod simulate;
mod trace;

pub use evaluate::evaluate;
pub use prepare::prepare_model;
pub use register::register;
pub use simulate::simulate;
pub use trace::trace_eval;

use std::time::Instant;

use surfreg::registration::IcpDiagnostics;

#[derive(Debug, Clone, Copy)]
pub struct Flags {
    pub verbose: bool,
    pub timings: bool,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Prints the kept ICP trajectory, one line per iteration.
fn log_icp(label: &str, d: &IcpDiagnostics) {
    eprintln!("{label}: initial objective {:.6} mm", d.initial_objective_mm);
    for it in &d.history {
        eprintln!(
            "{label}: iteration {} objective {:.6} mm tau {:.3} mm pairs {} step {}",
            it.iteration, it.objective_mm, it.tau_mm, it.correspondences, it.step_scale
        );
    }
    eprintln!("{label}: stopped ({:?}) after {} iterations", d.stop, d.iterations);
}
