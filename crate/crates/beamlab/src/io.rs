//! Run artifacts: trajectory CSV, energy CSV, and a JSON summary.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), enough for
//! bit-for-bit round trips, so replotting or diffing two runs never loses
//! information. The summary embeds the originating config, making every
//! artifact self-describing.

use crate::config::SimConfig;
use crate::dynamics::{DissipationReport, SimOutcome, Trajectory};
use crate::operator::Grid;
use serde::Serialize;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

/// `t,x_0..x_{n-1},u_0..u_{n-1}`, one row per recorded time.
pub fn write_trajectory_csv(path: &Path, grid: &Grid, trajectory: &Trajectory) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let n = grid.n_points();
    write!(out, "t")?;
    for i in 0..n {
        write!(out, ",x_{i}")?;
    }
    for i in 0..n {
        write!(out, ",u_{i}")?;
    }
    writeln!(out)?;
    for state in &trajectory.states {
        write!(out, "{:.16e}", state.time)?;
        for i in 0..n {
            write!(out, ",{:.16e}", grid.node(i))?;
        }
        for u in &state.displacement {
            write!(out, ",{u:.16e}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}

/// `t,kinetic,bending,adhesion,total,contact_fraction`, one row per record.
pub fn write_energy_csv(path: &Path, trajectory: &Trajectory) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "t,kinetic,bending,adhesion,total,contact_fraction")?;
    for ((state, e), cf) in trajectory
        .states
        .iter()
        .zip(&trajectory.energies)
        .zip(&trajectory.contact_fraction)
    {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            state.time, e.kinetic, e.bending, e.adhesion, e.total, cf
        )?;
    }
    out.flush()
}

/// Everything needed to audit a run without reopening the CSVs.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub config: SimConfig,
    pub dt: f64,
    pub n_records: usize,
    pub final_time: f64,
    pub dissipation: DissipationReport,
    pub sup_abs_displacement: f64,
    /// Every recorded state stayed strictly inside the bonded zone.
    pub no_detachment: bool,
    pub contact_fraction_min: f64,
    pub contact_fraction_max: f64,
}

impl RunSummary {
    pub fn from_outcome(config: &SimConfig, outcome: &SimOutcome) -> Self {
        let t = &outcome.trajectory;
        let cf_min = t
            .contact_fraction
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let cf_max = t.contact_fraction.iter().cloned().fold(0.0, f64::max);
        RunSummary {
            config: config.clone(),
            dt: t.dt,
            n_records: t.states.len(),
            final_time: t.final_state().time,
            dissipation: outcome.dissipation,
            sup_abs_displacement: outcome.sup_abs_displacement,
            no_detachment: crate::analysis::verify_no_detachment(t),
            contact_fraction_min: cf_min,
            contact_fraction_max: cf_max,
        }
    }
}

/// Pretty-printed JSON for any serializable report.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    writeln!(out)?;
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{auto_dt, simulate, SimSetup};
    use crate::operator::{BeamParams, BeamState};
    use crate::potential::PotentialSpec;

    fn small_outcome() -> (Grid, SimOutcome) {
        let params = BeamParams::new(1.0, 1.0, 1.0).unwrap();
        let grid = Grid::new(1.0, 5).unwrap();
        let setup = SimSetup {
            params,
            grid,
            potential: PotentialSpec::exact_capped(),
            initial: BeamState::uniform(&grid, 0.5, 0.0),
            horizon: 0.1,
            dt: auto_dt(&params, &grid),
            record_stride: 10,
        };
        (grid, simulate(&setup).unwrap())
    }

    #[test]
    fn trajectory_csv_header_and_round_trip() {
        let (grid, outcome) = small_outcome();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trajectory.csv");
        write_trajectory_csv(&path, &grid, &outcome.trajectory).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,x_0,x_1,x_2,x_3,x_4,u_0,u_1,u_2,u_3,u_4"
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), outcome.trajectory.states.len());

        // 17 significant digits round-trip exactly.
        let first: Vec<f64> = rows[0]
            .split(',')
            .map(|s| s.parse::<f64>().unwrap())
            .collect();
        assert_eq!(first[0], outcome.trajectory.states[0].time);
        assert_eq!(first[3], grid.node(2));
        assert_eq!(first[6], outcome.trajectory.states[0].displacement[1]);
    }

    #[test]
    fn energy_csv_header_and_columns() {
        let (_, outcome) = small_outcome();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("energies.csv");
        write_energy_csv(&path, &outcome.trajectory).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,kinetic,bending,adhesion,total,contact_fraction"
        );
        let row: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(row.len(), 6);
        let e = &outcome.trajectory.energies[0];
        assert_eq!(row[1], e.kinetic);
        assert_eq!(row[4], e.total);
        assert_eq!(row[5], outcome.trajectory.contact_fraction[0]);
    }

    #[test]
    fn summary_embeds_config_and_survives_reparse() {
        let (_, outcome) = small_outcome();
        let cfg: SimConfig = serde_json::from_str(
            r#"{
                "params": { "rho": 1.0, "mu": 1.0, "length": 1.0 },
                "grid": { "n_points": 5 },
                "potential": { "kind": "exact" },
                "initial": { "type": "uniform", "u0": 0.5 },
                "horizon": 0.1
            }"#,
        )
        .unwrap();
        let summary = RunSummary::from_outcome(&cfg, &outcome);
        assert!(summary.no_detachment);
        assert_eq!(summary.contact_fraction_min, 1.0);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.json");
        write_json(&path, &summary).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["config"]["grid"]["n_points"], 5);
        assert_eq!(value["n_records"], summary.n_records as u64);
        assert!(value["dissipation"]["max_abs_drift"].is_number());
    }
}
