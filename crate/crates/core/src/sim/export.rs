use std::io::{self, Write};

use super::Trajectory;
use crate::observer::ObserverState;

pub const CSV_HEADER: &str = "tau,x1,x2,xc,u,H,dH,outcome";

/// Observer columns appended after [`CSV_HEADER`] by [`write_extended_csv`].
pub const EXTENDED_COLUMNS: [&str; 16] = [
    "xi1",
    "xi2",
    "phi11",
    "phi12",
    "phi21",
    "phi22",
    "Y1",
    "Y2",
    "Omega11",
    "Omega12",
    "Omega21",
    "Omega22",
    "omega",
    "theta1",
    "theta2",
    "delta_sq_integral",
];

fn base_row(traj: &Trajectory, i: usize, outcome: &str) -> String {
    let s = &traj.states[i];
    let xc = traj
        .layout
        .xc
        .map(|k| format!("{}", s[k]))
        .unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{}",
        traj.times[i],
        s[0],
        s[1],
        xc,
        traj.controls[i],
        traj.energy[i],
        traj.energy_rate[i],
        outcome
    )
}

/// One row per sample; the outcome column repeats the final classification.
pub fn write_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    let outcome = traj.outcome.label();
    writeln!(w, "{CSV_HEADER}")?;
    for i in 0..traj.times.len() {
        writeln!(w, "{}", base_row(traj, i, &outcome))?;
    }
    Ok(())
}

/// Base columns followed by the observer block in state order. Falls back to
/// [`write_csv`] when the trajectory has no observer.
pub fn write_extended_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    let Some(start) = traj.layout.observer else {
        return write_csv(traj, w);
    };
    let outcome = traj.outcome.label();
    writeln!(w, "{CSV_HEADER},{}", EXTENDED_COLUMNS.join(","))?;
    for i in 0..traj.times.len() {
        let extra: Vec<String> = traj.states[i][start..start + ObserverState::LEN + 1]
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        writeln!(w, "{},{}", base_row(traj, i, &outcome), extra.join(","))?;
    }
    Ok(())
}
