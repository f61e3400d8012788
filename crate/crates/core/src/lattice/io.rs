//! JSON-lines trajectory files and CSV scalar diagnostics.
//!
//! One record per line: `{"t": float, "kind": "al"|"spin"|"frame", "lo": int,
//! "values": [...]}`. Complex numbers are `[re, im]`, vectors `[x, y, z]`,
//! rotations nine row-major floats. Floats are written with 17 significant
//! digits so that reading a file back reproduces every value bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde_json::Value;

use super::{ALField, FrameSequence, Mat3, Rotation, SpinField, Trajectory, Vec3, Window, Windowed};
use crate::error::{LatticeError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    Al,
    Spin,
    Frame,
}

impl StateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StateKind::Al => "al",
            StateKind::Spin => "spin",
            StateKind::Frame => "frame",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "al" => Ok(StateKind::Al),
            "spin" => Ok(StateKind::Spin),
            "frame" => Ok(StateKind::Frame),
            other => Err(LatticeError::Parse(format!("unknown record kind `{other}`"))),
        }
    }
}

pub(crate) fn fmt_f64(out: &mut String, x: f64) {
    // 17 significant digits: one before the point, sixteen after.
    write!(out, "{x:.16e}").expect("writing to a String");
}

struct Pretty17(serde_json::ser::PrettyFormatter<'static>);

macro_rules! delegate {
    ($($f:ident),*) => {$(
        fn $f<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
            self.0.$f(w)
        }
    )*};
}

impl serde_json::ser::Formatter for Pretty17 {
    delegate!(begin_array, end_array, begin_object, end_object, end_array_value, begin_object_value, end_object_value);

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, x: f64) -> std::io::Result<()> {
        let mut s = String::new();
        fmt_f64(&mut s, x);
        w.write_all(s.as_bytes())
    }
}

/// Pretty JSON with every float written to 17 significant digits; non-finite
/// floats become `null`.
pub fn to_json_string<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Pretty17(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| LatticeError::Parse(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

/// A state type that can be stored in a trajectory file.
pub trait TrajectoryState: Sized + Windowed {
    const KIND: StateKind;

    fn write_values(&self, out: &mut String);

    fn parse_values(lo: i64, values: &[Value]) -> Result<Self>;
}

fn number(v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| LatticeError::Parse(format!("expected a number, found {v}")))
}

fn tuple<const N: usize>(v: &Value) -> Result<[f64; N]> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == N)
        .ok_or_else(|| LatticeError::Parse(format!("expected an array of {N} numbers, found {v}")))?;
    let mut out = [0.0; N];
    for (o, x) in out.iter_mut().zip(arr) {
        *o = number(x)?;
    }
    Ok(out)
}

fn window_for(lo: i64, n: usize) -> Result<Window> {
    if n == 0 {
        return Err(LatticeError::Parse("record has no values".into()));
    }
    Window::new(lo, lo + n as i64 - 1)
}

fn write_list<T>(out: &mut String, items: &[T], mut each: impl FnMut(&mut String, &T)) {
    out.push('[');
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        each(out, item);
    }
    out.push(']');
}

fn write_floats(out: &mut String, xs: &[f64]) {
    write_list(out, xs, |o, &x| fmt_f64(o, x));
}

impl TrajectoryState for ALField {
    const KIND: StateKind = StateKind::Al;

    fn write_values(&self, out: &mut String) {
        write_list(out, self.values(), |o, z| write_floats(o, &[z.re, z.im]));
    }

    fn parse_values(lo: i64, values: &[Value]) -> Result<Self> {
        let w = window_for(lo, values.len())?;
        let vals = values
            .iter()
            .map(|v| tuple::<2>(v).map(|[re, im]| Complex64::new(re, im)))
            .collect::<Result<Vec<_>>>()?;
        ALField::new(w, vals)
    }
}

impl TrajectoryState for SpinField {
    const KIND: StateKind = StateKind::Spin;

    fn write_values(&self, out: &mut String) {
        write_list(out, self.values(), |o, s| write_floats(o, &[s.x, s.y, s.z]));
    }

    fn parse_values(lo: i64, values: &[Value]) -> Result<Self> {
        let w = window_for(lo, values.len())?;
        let vals = values
            .iter()
            .map(|v| tuple::<3>(v).map(|[x, y, z]| Vec3::new(x, y, z)))
            .collect::<Result<Vec<_>>>()?;
        SpinField::new(w, vals)
    }
}

impl TrajectoryState for FrameSequence {
    const KIND: StateKind = StateKind::Frame;

    fn write_values(&self, out: &mut String) {
        write_list(out, self.frames(), |o, r| {
            let m = r.matrix();
            let row_major: Vec<f64> = (0..3).flat_map(|i| (0..3).map(move |j| m[(i, j)])).collect();
            write_floats(o, &row_major);
        });
    }

    fn parse_values(lo: i64, values: &[Value]) -> Result<Self> {
        let w = window_for(lo, values.len())?;
        let frames = values
            .iter()
            .map(|v| {
                let e = tuple::<9>(v)?;
                Rotation::new(Mat3::from_row_slice(&e))
            })
            .collect::<Result<Vec<_>>>()?;
        FrameSequence::new(w, frames)
    }
}

/// One parsed line of a trajectory file, of any kind.
#[derive(Clone, Debug, PartialEq)]
pub enum TrajectoryRecord {
    Al(f64, ALField),
    Spin(f64, SpinField),
    Frame(f64, FrameSequence),
}

impl TrajectoryRecord {
    pub fn time(&self) -> f64 {
        match self {
            TrajectoryRecord::Al(t, _) | TrajectoryRecord::Spin(t, _) | TrajectoryRecord::Frame(t, _) => *t,
        }
    }

    pub fn kind(&self) -> StateKind {
        match self {
            TrajectoryRecord::Al(..) => StateKind::Al,
            TrajectoryRecord::Spin(..) => StateKind::Spin,
            TrajectoryRecord::Frame(..) => StateKind::Frame,
        }
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(line).map_err(|e| LatticeError::Parse(e.to_string()))?;
        let t = v
            .get("t")
            .ok_or_else(|| LatticeError::Parse("record is missing `t`".into()))
            .and_then(number)?;
        let kind = v
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| LatticeError::Parse("record is missing `kind`".into()))
            .and_then(StateKind::parse)?;
        let lo = v
            .get("lo")
            .and_then(Value::as_i64)
            .ok_or_else(|| LatticeError::Parse("record is missing integer `lo`".into()))?;
        let values = v
            .get("values")
            .and_then(Value::as_array)
            .ok_or_else(|| LatticeError::Parse("record is missing `values`".into()))?;
        Ok(match kind {
            StateKind::Al => TrajectoryRecord::Al(t, ALField::parse_values(lo, values)?),
            StateKind::Spin => TrajectoryRecord::Spin(t, SpinField::parse_values(lo, values)?),
            StateKind::Frame => TrajectoryRecord::Frame(t, FrameSequence::parse_values(lo, values)?),
        })
    }

    pub fn to_line(&self) -> String {
        match self {
            TrajectoryRecord::Al(t, s) => record_line(*t, s),
            TrajectoryRecord::Spin(t, s) => record_line(*t, s),
            TrajectoryRecord::Frame(t, s) => record_line(*t, s),
        }
    }

    /// Reads every record of a JSON-lines stream, skipping blank lines.
    pub fn read_all<R: Read>(reader: R) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(Self::parse_line(&line).map_err(|e| LatticeError::Parse(format!("line {}: {e}", i + 1)))?);
        }
        Ok(out)
    }
}

/// Serializes one state as a single JSON line (no trailing newline).
pub fn record_line<T: TrajectoryState>(t: f64, state: &T) -> String {
    let mut out = String::with_capacity(64 + 48 * state.window().len());
    out.push_str("{\"t\":");
    fmt_f64(&mut out, t);
    write!(out, ",\"kind\":\"{}\",\"lo\":{},\"values\":", T::KIND.as_str(), state.window().lo())
        .expect("writing to a String");
    state.write_values(&mut out);
    out.push('}');
    out
}

pub fn write_trajectory<T: TrajectoryState, W: Write>(mut w: W, traj: &Trajectory<T>) -> Result<()> {
    for (t, s) in traj.iter() {
        writeln!(w, "{}", record_line(t, s))?;
    }
    Ok(())
}

pub fn read_trajectory<T: TrajectoryState, R: Read>(reader: R) -> Result<Trajectory<T>> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line)
            .map_err(|e| LatticeError::Parse(format!("line {}: {e}", i + 1)))?;
        let kind = v.get("kind").and_then(Value::as_str).unwrap_or("");
        if kind != T::KIND.as_str() {
            return Err(LatticeError::Parse(format!(
                "line {}: expected kind `{}`, found `{kind}`",
                i + 1,
                T::KIND.as_str()
            )));
        }
        let t = v.get("t").ok_or_else(|| LatticeError::Parse("missing `t`".into())).and_then(number)?;
        let lo = v
            .get("lo")
            .and_then(Value::as_i64)
            .ok_or_else(|| LatticeError::Parse("missing integer `lo`".into()))?;
        let values = v
            .get("values")
            .and_then(Value::as_array)
            .ok_or_else(|| LatticeError::Parse("missing `values`".into()))?;
        times.push(t);
        states.push(T::parse_values(lo, values)?);
    }
    Trajectory::new(times, states)
}

pub fn write_trajectory_file<T: TrajectoryState>(path: impl AsRef<Path>, traj: &Trajectory<T>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_trajectory(&mut w, traj)?;
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_file<T: TrajectoryState>(path: impl AsRef<Path>) -> Result<Trajectory<T>> {
    read_trajectory(std::fs::File::open(path)?)
}

/// One row of a scalar diagnostics CSV (`t,name,value`).
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticRow {
    pub t: f64,
    pub name: String,
    pub value: f64,
}

pub fn write_csv_diagnostics<W: Write>(mut w: W, rows: &[DiagnosticRow]) -> Result<()> {
    writeln!(w, "t,name,value")?;
    let mut line = String::new();
    for r in rows {
        line.clear();
        fmt_f64(&mut line, r.t);
        write!(line, ",{},", r.name).expect("writing to a String");
        fmt_f64(&mut line, r.value);
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn al_strategy() -> impl Strategy<Value = (i64, Vec<(f64, f64)>)> {
        (-50i64..50, prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..20))
    }

    proptest! {
        #[test]
        fn al_records_round_trip_bit_exact((lo, vals) in al_strategy(), t in -1e3f64..1e3) {
            let w = Window::new(lo, lo + vals.len() as i64 - 1).unwrap();
            let f = ALField::new(w, vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let line = record_line(t, &f);
            let back = TrajectoryRecord::parse_line(&line).unwrap();
            prop_assert_eq!(back.time().to_bits(), t.to_bits());
            match back {
                TrajectoryRecord::Al(_, g) => {
                    for (x, y) in f.values().iter().zip(g.values()) {
                        prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
                        prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
                    }
                }
                other => prop_assert!(false, "wrong kind {:?}", other.kind()),
            }
        }

        #[test]
        fn spin_and_frame_records_round_trip(theta in 0.0f64..3.14, phi in -3.14f64..3.14, psi in -3.0f64..3.0) {
            let s = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            let w = Window::new(3, 4).unwrap();
            let spins = SpinField::normalized(w, vec![s, -s]).unwrap();
            let back = TrajectoryRecord::parse_line(&record_line(0.25, &spins)).unwrap();
            prop_assert_eq!(back, TrajectoryRecord::Spin(0.25, spins));

            let r = nalgebra::Rotation3::from_euler_angles(theta, phi, psi).into_inner();
            let frames = FrameSequence::new(Window::new(0, 0).unwrap(), vec![Rotation::new(r).unwrap()]).unwrap();
            let back = TrajectoryRecord::parse_line(&record_line(1.0, &frames)).unwrap();
            prop_assert_eq!(back, TrajectoryRecord::Frame(1.0, frames));
        }
    }

    #[test]
    fn trajectory_round_trip_through_writer() {
        let w = Window::symmetric(2);
        let states: Vec<_> = (0..3)
            .map(|k| ALField::new(w, w.sites().map(|n| Complex64::new(n as f64 / 3.0, k as f64 / 7.0)).collect()).unwrap())
            .collect();
        let traj = Trajectory::new(vec![0.0, 0.1, 0.3], states).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj).unwrap();
        let back: Trajectory<ALField> = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(back, traj);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().next().unwrap().starts_with("{\"t\":0.0000000000000000e0,\"kind\":\"al\",\"lo\":-2"));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let spins = SpinField::new(Window::new(0, 0).unwrap(), vec![Vec3::z()]).unwrap();
        let line = record_line(0.0, &spins);
        assert!(read_trajectory::<ALField, _>(line.as_bytes()).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![DiagnosticRow { t: 0.5, name: "H_AL".into(), value: -1.25 }];
        let mut buf = Vec::new();
        write_csv_diagnostics(&mut buf, &rows).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "t,name,value\n5.0000000000000000e-1,H_AL,-1.2500000000000000e0\n");
    }

    #[test]
    fn json_floats_have_seventeen_digits() {
        let v = serde_json::json!({"a": [0.1, 1.0], "b": f64::NAN, "n": 3});
        let s = to_json_string(&v).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("1.0000000000000000e0"));
        assert!(s.contains("\"b\": null"));
        assert!(s.contains("\"n\": 3"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"][0].as_f64(), Some(0.1));
    }
}
