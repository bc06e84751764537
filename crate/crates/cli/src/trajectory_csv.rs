//! `trajectory.csv`: one knot per row, header mandatory.
//!
//! Columns are `t`, then `r_*`, `rd_*`, `roll, pitch, yaw`, `omega_*`, then
//! per leg `<leg>_p_*` followed by per leg `<leg>_f_*`, with `*` in x, y, z.
//! Numbers are written with 17 significant digits so that reading a file
//! back reproduces every finite value exactly.

use nalgebra::Vector3;
use srbd_core::model::{ContactSchedule, KnotState, Trajectory};
use srbd_core::Error;

use crate::error::CliResult;

const XYZ: [&str; 3] = ["x", "y", "z"];

pub fn header(legs: &[String]) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for v in ["r", "rd"] {
        h.extend(XYZ.iter().map(|a| format!("{v}_{a}")));
    }
    h.extend(["roll", "pitch", "yaw"].map(String::from));
    h.extend(XYZ.iter().map(|a| format!("omega_{a}")));
    for v in ["p", "f"] {
        for leg in legs {
            h.extend(XYZ.iter().map(|a| format!("{leg}_{v}_{a}")));
        }
    }
    h
}

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write(trajectory: &Trajectory, legs: &[String]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(legs)).expect("in-memory write");
    for (k, s) in trajectory.knots.iter().enumerate() {
        let mut row = vec![trajectory.time(k)];
        for v in [&s.r, &s.rd, &s.theta, &s.omega] {
            row.extend(v.iter());
        }
        for v in s.feet.iter().chain(s.forces.iter()) {
            row.extend(v.iter());
        }
        w.write_record(row.into_iter().map(format_value)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

fn schema(row: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Schema { row, column, message: message.into() }
}

/// Parses a trajectory for `schedule` sampled every `dt`. Rows and columns
/// in errors are 1-based file positions, the header being row 1.
pub fn read(text: &str, legs: &[String], schedule: &ContactSchedule, dt: f64) -> CliResult<Trajectory> {
    let expected = header(legs);
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut records = r.records();
    let head = match records.next() {
        Some(rec) => rec.map_err(|e| schema(1, 1, e.to_string()))?,
        None => return Err(schema(1, 1, "missing header row").into()),
    };
    for (c, name) in expected.iter().enumerate() {
        match head.get(c) {
            Some(h) if h.trim() == name => {}
            Some(h) => return Err(schema(1, c + 1, format!("expected column `{name}`, found `{h}`")).into()),
            None => return Err(schema(1, c + 1, format!("missing column `{name}`")).into()),
        }
    }
    if head.len() > expected.len() {
        return Err(schema(1, expected.len() + 1, "unexpected extra column").into());
    }
    let nl = legs.len();
    let mut knots = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| schema(row, 1, e.to_string()))?;
        if rec.len() != expected.len() {
            return Err(schema(row, rec.len().min(expected.len()) + 1, format!("expected {} fields, found {}", expected.len(), rec.len())).into());
        }
        let mut vals = Vec::with_capacity(rec.len());
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| schema(row, c + 1, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(schema(row, c + 1, format!("`{field}` is not finite")).into());
            }
            vals.push(v);
        }
        let k = knots.len();
        if (vals[0] - k as f64 * dt).abs() > 1e-9 * (1.0 + vals[0].abs()) {
            return Err(schema(row, 1, format!("time {} does not match knot {k} at dt {dt}", vals[0])).into());
        }
        let v3 = |c: usize| Vector3::new(vals[c], vals[c + 1], vals[c + 2]);
        knots.push(KnotState {
            r: v3(1),
            rd: v3(4),
            theta: v3(7),
            omega: v3(10),
            feet: (0..nl).map(|l| v3(13 + 3 * l)).collect(),
            forces: (0..nl).map(|l| v3(13 + 3 * (nl + l))).collect(),
        });
    }
    Ok(Trajectory::new(dt, knots, schedule.clone())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use srbd_core::model::CRAWL_ORDER;

    fn legs() -> Vec<String> {
        ["LF", "RF", "LH", "RH"].map(String::from).to_vec()
    }

    fn schedule() -> ContactSchedule {
        ContactSchedule::crawl(4, &CRAWL_ORDER, 1, 0.8, 0.1, 0.1).unwrap()
    }

    fn sample(values: &[f64]) -> Trajectory {
        let mut it = values.iter().copied().cycle();
        let mut v = || Vector3::new(it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
        let knots = (0..9)
            .map(|_| KnotState {
                r: v(),
                rd: v(),
                theta: v(),
                omega: v(),
                feet: (0..4).map(|_| v()).collect(),
                forces: (0..4).map(|_| v()).collect(),
            })
            .collect();
        Trajectory::new(0.1, knots, schedule()).unwrap()
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 1..64)) {
            let t = sample(&values);
            let back = read(&write(&t, &legs()), &legs(), &schedule(), 0.1).unwrap();
            for (a, b) in t.knots.iter().zip(&back.knots) {
                let bits = |s: &KnotState| -> Vec<u64> {
                    [s.r, s.rd, s.theta, s.omega].iter().chain(&s.feet).chain(&s.forces).flat_map(|v| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>()).collect()
                };
                prop_assert_eq!(bits(a), bits(b));
            }
        }
    }

    fn text() -> String {
        write(&sample(&[0.25, -1.5, 3.0]), &legs())
    }

    fn expect_schema(text: &str, row: usize, column: usize) {
        match read(text, &legs(), &schedule(), 0.1) {
            Err(crate::error::CliError::Core(Error::Schema { row: r, column: c, .. })) => assert_eq!((r, c), (row, column)),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn header_and_format() {
        let t = text();
        let first = t.lines().next().unwrap();
        assert!(first.starts_with("t,r_x,r_y,r_z,rd_x"));
        assert!(first.ends_with("RH_f_x,RH_f_y,RH_f_z"));
        assert_eq!(first.split(',').count(), 37);
        assert!(t.lines().nth(1).unwrap().starts_with("0.0000000000000000e0,2.5000000000000000e-1,"));
    }

    #[test]
    fn nan_force_is_a_schema_error() {
        let mut lines: Vec<String> = text().lines().map(String::from).collect();
        let mut fields: Vec<&str> = lines[3].split(',').collect();
        fields[30] = "NaN";
        lines[3] = fields.join(",");
        expect_schema(&lines.join("\n"), 4, 31);
    }

    #[test]
    fn malformed_fields_are_located() {
        let t = text();
        expect_schema(&t.replacen("r_y", "ry", 1), 1, 3);
        let mut lines: Vec<String> = t.lines().map(String::from).collect();
        let mut f: Vec<&str> = lines[2].split(',').collect();
        f[5] = "1.0.0";
        lines[2] = f.join(",");
        expect_schema(&lines.join("\n"), 3, 6);
        let short: Vec<String> = t.lines().take(4).map(|l| l.to_string()).collect();
        assert!(read(&short.join("\n"), &legs(), &schedule(), 0.1).is_err());
        expect_schema("", 1, 1);
    }
}
