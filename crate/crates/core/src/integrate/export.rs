//! Trajectory CSV and JSON sidecar output.

use std::io::Write;

use serde::Serialize;

use super::{Tolerances, Trajectory};
use crate::error::Result;
use crate::systems::FamilySpec;

/// Full double precision, locale independent.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `t,c0,c1,...` followed by any `extra` columns computed per row.
/// Rows are the accepted integration nodes.
pub fn write_csv<W: Write>(
    w: &mut W,
    traj: &Trajectory,
    extra: &[(&str, &dyn Fn(&[f64]) -> Option<f64>)],
) -> Result<()> {
    write_rows(w, &traj.times, &traj.states, extra)
}

/// Same layout as [`write_csv`] for arbitrary `(t, state)` rows.
pub fn write_rows<W: Write>(
    w: &mut W,
    times: &[f64],
    states: &[Vec<f64>],
    extra: &[(&str, &dyn Fn(&[f64]) -> Option<f64>)],
) -> Result<()> {
    let dim = states.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|i| format!("c{i}")));
    header.extend(extra.iter().map(|(n, _)| n.to_string()));
    writeln!(w, "{}", header.join(","))?;
    for (t, s) in times.iter().zip(states) {
        let mut row = vec![fmt_num(*t)];
        row.extend(s.iter().map(|v| fmt_num(*v)));
        for (_, f) in extra {
            row.push(f(s).map_or_else(|| "nan".to_string(), fmt_num));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryMeta<'a> {
    pub family: &'a str,
    pub params: &'a crate::systems::Params,
    pub tolerances: Tolerances,
    pub t_start: f64,
    pub t_end: f64,
    pub points: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub function_evaluations: usize,
}

impl<'a> TrajectoryMeta<'a> {
    pub fn new(spec: &'a FamilySpec, traj: &Trajectory) -> Self {
        TrajectoryMeta {
            family: spec.id().as_str(),
            params: spec.params(),
            tolerances: traj.tolerances,
            t_start: traj.t_start(),
            t_end: traj.t_end(),
            points: traj.len(),
            accepted_steps: traj.accepted,
            rejected_steps: traj.rejected,
            function_evaluations: traj.nfev,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::integrate;
    use crate::systems::{make_family, FamilyId, Params};

    #[test]
    fn csv_round_trips_bit_exactly() {
        let spec = make_family(FamilyId::Reflect22, &Params::from_pairs(&[("sign", -1.0)])).unwrap();
        let tr = integrate(&spec, &[1.0, 0.0], (0.0, 2.0), &Tolerances::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &tr, &[("sq", &|s: &[f64]| Some(s[0] * s[0] + s[1] * s[1]))]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,c0,c1,sq");
        for (line, (t, s)) in lines.zip(tr.times.iter().zip(&tr.states)) {
            let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(v[0], *t);
            assert_eq!(&v[1..3], s.as_slice());
        }
        let meta = serde_json::to_value(TrajectoryMeta::new(&spec, &tr)).unwrap();
        assert_eq!(meta["family"], "reflect-2.2");
        assert_eq!(meta["params"]["sign"], -1.0);
    }
}
