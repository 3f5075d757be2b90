//! Follows the continuity path for the conic `(1, √2 u, u²)` with four
//! sampled points from t = 50 down to 0 and prints the trace.

use balanced_embed::cli::sample_aux;
use balanced_embed::solver::RunOutcome;
use balanced_embed::{continuity_run, CurveScheme, QuadratureGrid, Schedule, Scheme, SolverConfig};

fn main() -> balanced_embed::Result<()> {
    let conic = CurveScheme::rational_normal(2);
    let d = sample_aux(&conic, 7)?;
    let x = Scheme::Curve(conic);
    let grid = QuadratureGrid::new(32, 64)?;
    let schedule = Schedule { t_start: Some(50.0), gamma: 0.7, ..Schedule::default() };

    let trace = continuity_run(&x, &d, &SolverConfig::default(), &schedule, &grid)?;
    trace.write_csv(std::io::stdout())?;
    match trace.outcome {
        RunOutcome::Success => println!("reached t = {}", schedule.t_end),
        RunOutcome::Breakdown => println!("breakdown at t = {}", trace.records.last().unwrap().t),
    }
    Ok(())
}
