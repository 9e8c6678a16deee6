//! Text field files, trajectory dumps and conserved-quantity tables.
//!
//! A field file is a `key = value` header, a `---` line, then one line per
//! grid point. Matrix values are JSON rows of `[re, im]` pairs; scalar values
//! are bare numbers. Floats are written with 17 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::development::GrassmannPath;
use crate::error::{Error, Result};
use crate::field::{Grid, MatrixField, ScalarField};
use crate::flows::{State, Trajectory};
use crate::hierarchy::HierarchyTable;
use crate::lie::{self, CMat, OrbitParams, C64};
use crate::presets::FieldData;

const SEPARATOR: &str = "---";

/// Provenance recorded in the header.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FieldMeta {
    pub preset: Option<String>,
    pub seed: Option<u64>,
}

/// A loaded field with its orbit parameters (absent for scalar fields).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub data: FieldData,
    pub params: Option<OrbitParams>,
    pub meta: FieldMeta,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn matrix_line(m: &CMat) -> String {
    let mut s = String::from("[");
    for i in 0..m.nrows() {
        if i > 0 {
            s.push(',');
        }
        s.push('[');
        for j in 0..m.ncols() {
            if j > 0 {
                s.push(',');
            }
            let z = m[(i, j)];
            let _ = write!(s, "[{},{}]", fmt_f64(z.re), fmt_f64(z.im));
        }
        s.push(']');
    }
    s.push(']');
    s
}

fn header_block(entries: &[(&str, String)]) -> String {
    let mut s = String::from("# grassflow field file\n");
    for (k, v) in entries {
        let _ = writeln!(s, "{k} = {v}");
    }
    s.push_str(SEPARATOR);
    s.push('\n');
    s
}

fn grid_entries(grid: &Grid) -> Vec<(&'static str, String)> {
    vec![("L", fmt_f64(grid.half_width())), ("N", grid.len().to_string())]
}

/// Serializes a field to the text format.
pub fn field_to_string(file: &FieldFile) -> Result<String> {
    let mut entries = vec![("kind", file.data.kind().to_string())];
    entries.extend(grid_entries(file.data.grid()));
    match (&file.data, &file.params) {
        (FieldData::Scalar(_), _) => {}
        (_, Some(p)) => {
            entries.push(("n", p.n().to_string()));
            entries.push(("k", p.k().to_string()));
        }
        (_, None) => return Err(Error::Parameter("matrix fields need orbit parameters".into())),
    }
    if let Some(preset) = &file.meta.preset {
        entries.push(("preset", preset.clone()));
    }
    if let Some(seed) = file.meta.seed {
        entries.push(("seed", seed.to_string()));
    }
    let mut out = header_block(&entries);
    match &file.data {
        FieldData::Skew(f) | FieldData::Path(f) => {
            for m in f.values() {
                out.push_str(&matrix_line(m));
                out.push('\n');
            }
        }
        FieldData::Scalar(f) => {
            for v in f.values() {
                out.push_str(&fmt_f64(*v));
                out.push('\n');
            }
        }
    }
    Ok(out)
}

pub fn save_field(file: &FieldFile, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, field_to_string(file)?)?;
    Ok(())
}

struct Parsed<'a> {
    header: BTreeMap<String, (usize, String)>,
    body: Vec<(usize, &'a str)>,
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

fn split(text: &str) -> Result<Parsed<'_>> {
    let mut header = BTreeMap::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut closed = false;
    for (no, line) in lines.by_ref() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if t == SEPARATOR {
            closed = true;
            break;
        }
        let Some((k, v)) = t.split_once('=') else {
            return Err(parse_error(no, 1, format!("expected `key = value`, found `{t}`")));
        };
        let key = k.trim().to_string();
        if header.insert(key.clone(), (no, v.trim().to_string())).is_some() {
            return Err(parse_error(no, 1, format!("duplicate header key `{key}`")));
        }
    }
    if !closed {
        return Err(parse_error(text.lines().count().max(1), 1, "missing `---` separator"));
    }
    let body = lines.filter(|(_, l)| !l.trim().is_empty()).collect();
    Ok(Parsed { header, body })
}

impl Parsed<'_> {
    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.header.get(key) {
            None => Ok(None),
            Some((no, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| parse_error(*no, key.len() + 4, format!("bad value `{v}` for `{key}`"))),
        }
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| parse_error(1, 1, format!("missing header key `{key}`")))
    }

    fn grid(&self) -> Result<Grid> {
        Grid::new(self.require("L")?, self.require("N")?)
    }

    fn params(&self) -> Result<OrbitParams> {
        OrbitParams::new(self.require("n")?, self.require("k")?)
    }

    fn check_len(&self, expected: usize) -> Result<()> {
        if self.body.len() != expected {
            return Err(Error::Validation {
                invariant: format!("value count: header says {expected}, file has {}", self.body.len()),
            });
        }
        Ok(())
    }
}

fn json_error(no: usize, e: serde_json::Error) -> Error {
    parse_error(no, e.column(), e.to_string())
}

fn parse_matrix(no: usize, line: &str, n: usize) -> Result<CMat> {
    let rows: Vec<Vec<[f64; 2]>> = serde_json::from_str(line).map_err(|e| json_error(no, e))?;
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Validation { invariant: format!("matrix shape at line {no}: expected {n}x{n}") });
    }
    let mut m = CMat::zeros(n, n);
    for (i, r) in rows.iter().enumerate() {
        for (j, z) in r.iter().enumerate() {
            m[(i, j)] = C64::new(z[0], z[1]);
        }
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Validation { invariant: format!("finite values at line {no}") });
    }
    Ok(m)
}

fn matrix_values(parsed: &Parsed<'_>, n: usize) -> Result<Vec<CMat>> {
    parsed.body.iter().map(|&(no, l)| parse_matrix(no, l, n)).collect()
}

/// Parses and validates a field file.
pub fn field_from_str(text: &str) -> Result<FieldFile> {
    let parsed = split(text)?;
    let kind: String = parsed.require("kind")?;
    let grid = parsed.grid()?;
    parsed.check_len(grid.len())?;
    let meta = FieldMeta { preset: parsed.get("preset")?, seed: parsed.get("seed")? };
    match kind.as_str() {
        "skew_field" | "grassmann_path" => {
            let params = parsed.params()?;
            let values = matrix_values(&parsed, params.n())?;
            let field = MatrixField::new(grid, values)?;
            let data = if kind == "skew_field" {
                let tol = lie::SKEW_TOL * field.max_norm().max(1.0);
                if field.skew_defect() > tol {
                    return Err(Error::Validation { invariant: "skew-Hermitian values".into() });
                }
                FieldData::Skew(field)
            } else {
                FieldData::Path(GrassmannPath::new(field, &params)?.into_field())
            };
            Ok(FieldFile { data, params: Some(params), meta })
        }
        "scalar_field" => {
            let values = parsed
                .body
                .iter()
                .map(|&(no, l)| {
                    let v: f64 = serde_json::from_str(l).map_err(|e| json_error(no, e))?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::Validation { invariant: format!("finite values at line {no}") })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(FieldFile { data: FieldData::Scalar(ScalarField::new(grid, values)?), params: None, meta })
        }
        other => {
            let no = parsed.header.get("kind").map_or(1, |(no, _)| *no);
            Err(parse_error(no, 8, format!("unknown kind `{other}`")))
        }
    }
}

pub fn load_field(path: impl AsRef<Path>) -> Result<FieldFile> {
    field_from_str(&fs::read_to_string(path)?)
}

/// Writes `Q_1 .. Q_jmax`, one line per grid point holding `jmax` matrices.
pub fn hierarchy_to_string(table: &HierarchyTable, jmax: usize) -> Result<String> {
    let u = table.u()?;
    let p = table.params();
    let mut entries = vec![("kind", "hierarchy".to_string())];
    entries.extend(grid_entries(u.grid()));
    entries.push(("n", p.n().to_string()));
    entries.push(("k", p.k().to_string()));
    entries.push(("levels", jmax.to_string()));
    let levels: Vec<&MatrixField> = (1..=jmax).map(|j| table.q(j)).collect::<Result<_>>()?;
    let mut out = header_block(&entries);
    for m in 0..u.grid().len() {
        let row: Vec<String> = levels.iter().map(|f| matrix_line(f.at(m))).collect();
        let _ = writeln!(out, "[{}]", row.join(","));
    }
    Ok(out)
}

/// Reads a hierarchy file back into `Q_1 .. Q_levels`.
pub fn hierarchy_from_str(text: &str) -> Result<Vec<MatrixField>> {
    let parsed = split(text)?;
    let kind: String = parsed.require("kind")?;
    if kind != "hierarchy" {
        return Err(Error::Validation { invariant: format!("kind: expected hierarchy, found {kind}") });
    }
    let grid = parsed.grid()?;
    let params = parsed.params()?;
    let levels: usize = parsed.require("levels")?;
    parsed.check_len(grid.len())?;
    let n = params.n();
    let mut cols: Vec<Vec<CMat>> = vec![Vec::with_capacity(grid.len()); levels];
    for &(no, line) in &parsed.body {
        let row: Vec<Vec<Vec<[f64; 2]>>> = serde_json::from_str(line).map_err(|e| json_error(no, e))?;
        if row.len() != levels {
            return Err(Error::Validation { invariant: format!("level count at line {no}") });
        }
        for (j, m) in row.iter().enumerate() {
            cols[j].push(parse_matrix(no, &serde_json::to_string(m).expect("serializable"), n)?);
        }
    }
    cols.into_iter().map(|v| MatrixField::new(grid.clone(), v)).collect()
}

/// Text dump of a trajectory: header, then `t = ...` followed by the state
/// lines for each logged time.
pub fn trajectory_to_string(traj: &Trajectory, params: Option<&OrbitParams>) -> Result<String> {
    let first = traj.states.first().ok_or_else(|| Error::Parameter("empty trajectory".into()))?;
    let kind = match first {
        State::Field(_) => "skew_field",
        State::Path(_) => "grassmann_path",
        State::Scalar(_) => "scalar_field",
    };
    let mut entries = vec![("kind", "trajectory".to_string()), ("state", kind.to_string()), ("model", traj.model.to_string())];
    entries.extend(grid_entries(first.grid()));
    if let Some(p) = params {
        entries.push(("n", p.n().to_string()));
        entries.push(("k", p.k().to_string()));
    }
    entries.push(("snapshots", traj.states.len().to_string()));
    let mut out = header_block(&entries);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let _ = writeln!(out, "t = {}", fmt_f64(*t));
        match s {
            State::Field(f) | State::Path(f) => {
                for m in f.values() {
                    out.push_str(&matrix_line(m));
                    out.push('\n');
                }
            }
            State::Scalar(f) => {
                for v in f.values() {
                    out.push_str(&fmt_f64(*v));
                    out.push('\n');
                }
            }
        }
    }
    Ok(out)
}

/// CSV of logged conserved quantities, plus orbit diagnostics for path models.
pub fn conserved_to_csv(traj: &Trajectory) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let paths = !traj.orbit_residuals.is_empty();
    let mut header = vec!["t".to_string()];
    header.extend(traj.conserved_labels.iter().map(|s| s.to_string()));
    if paths {
        header.push("orbit_residual".into());
        header.push("orbit_correction".into());
    }
    w.write_record(&header).map_err(csv_error)?;
    for (i, t) in traj.times.iter().enumerate() {
        let mut row = vec![fmt_f64(*t)];
        row.extend(traj.conserved[i].iter().map(|v| fmt_f64(*v)));
        if paths {
            row.push(fmt_f64(traj.orbit_residuals[i]));
            row.push(fmt_f64(traj.orbit_corrections[i]));
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{make_field, Preset, PresetParams};

    fn file_for(preset: Preset, p: &PresetParams) -> FieldFile {
        let data = make_field(preset, p).unwrap();
        let params = match data {
            FieldData::Scalar(_) => None,
            _ => Some(OrbitParams::new(p.n, p.k).unwrap()),
        };
        FieldFile { data, params, meta: FieldMeta { preset: Some(preset.name().into()), seed: Some(p.seed) } }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = PresetParams { n: 3, k: 1, len: 64, ..Default::default() };
        for preset in Preset::ALL {
            let f = file_for(preset, &p);
            let back = field_from_str(&field_to_string(&f).unwrap()).unwrap();
            assert_eq!(back, f, "{preset}");
        }
    }

    #[test]
    fn off_base_path_is_rejected() {
        let p = PresetParams { len: 32, ..Default::default() };
        let f = file_for(Preset::DevelopedSoliton, &p);
        let text = field_to_string(&f).unwrap();
        // swap the diagonal of the first point: the path then starts at -a
        let first = text.lines().position(|l| l == SEPARATOR).unwrap() + 1;
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let m = parse_matrix(first, &lines[first], 2).unwrap();
        lines[first] = matrix_line(&(-m));
        let err = field_from_str(&lines.join("\n")).unwrap_err();
        match err {
            Error::Validation { invariant } => assert!(invariant.contains("left boundary base point"), "{invariant}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_value_reports_line() {
        let p = PresetParams { len: 16, ..Default::default() };
        let text = field_to_string(&file_for(Preset::Vacuum, &p)).unwrap();
        let broken = text.replacen("[[[0", "[[[x", 1);
        match field_from_str(&broken).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, text.lines().position(|l| l == SEPARATOR).unwrap() + 2),
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(field_from_str("kind = skew_field\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn hierarchy_file_round_trip() {
        let p = OrbitParams::new(2, 1).unwrap();
        let g = Grid::new(20.0, 32).unwrap();
        let u = crate::presets::soliton(&g, &p);
        let t = crate::hierarchy::compute_hierarchy(&u, &p, 3).unwrap();
        let back = hierarchy_from_str(&hierarchy_to_string(&t, 3).unwrap()).unwrap();
        for j in 1..=3 {
            assert_eq!(&back[j - 1], t.q(j).unwrap());
        }
    }
}
