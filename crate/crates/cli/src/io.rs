//! Textual point encodings, CSV input/output and number formatting.

use std::fmt::Write as _;
use std::path::Path;

use rmgp_core::{ManifoldKind, ManifoldPoint};

use crate::CliError;

/// `%.17g`: 17 significant digits, trailing zeros dropped, exponent form
/// outside `[1e-5, 1e17)`.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..17).contains(&exp) {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let fixed = format!("{x:.*}", (16 - exp) as usize);
    if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        fixed
    }
}

fn reals(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::input(format!("cannot parse {t:?} as a number")))
        })
        .collect()
}

/// Parses a point for `kind`: circle `x`; torus `x1,…,xd`; sphere `d+1`
/// reals (renormalized); mesh `face:b0,b1,b2` with a numeric face index, or
/// `vertex:i` resolved through `vertex`.
pub fn parse_point(
    s: &str,
    kind: &ManifoldKind,
    vertex: &dyn Fn(usize) -> Result<ManifoldPoint, CliError>,
) -> Result<ManifoldPoint, CliError> {
    let s = s.trim().trim_matches('"');
    let p = match kind {
        ManifoldKind::Circle => {
            let v = reals(s)?;
            if v.len() != 1 {
                return Err(CliError::input(format!("circle point needs 1 coordinate, got {s:?}")));
            }
            ManifoldPoint::circle(v[0])?
        }
        ManifoldKind::Torus { dim } => {
            let v = reals(s)?;
            if v.len() != *dim {
                return Err(CliError::input(format!("torus point needs {dim} coordinates, got {s:?}")));
            }
            ManifoldPoint::torus(&v)?
        }
        ManifoldKind::Sphere { dim } => {
            let v = reals(s)?;
            if v.len() != dim + 1 {
                return Err(CliError::input(format!("sphere point needs {} coordinates, got {s:?}", dim + 1)));
            }
            ManifoldPoint::sphere(&v)?
        }
        ManifoldKind::Mesh { .. } => {
            let (head, tail) = s
                .split_once(':')
                .ok_or_else(|| CliError::input(format!("mesh point must be face:b0,b1,b2 or vertex:i, got {s:?}")))?;
            if head == "vertex" {
                let i = tail
                    .trim()
                    .parse()
                    .map_err(|_| CliError::input(format!("bad vertex index in {s:?}")))?;
                vertex(i)?
            } else {
                let face = head
                    .trim()
                    .parse()
                    .map_err(|_| CliError::input(format!("bad face index in {s:?}")))?;
                let b = reals(tail)?;
                if b.len() != 3 {
                    return Err(CliError::input(format!("mesh point needs 3 barycentric weights, got {s:?}")));
                }
                ManifoldPoint::mesh(face, [b[0], b[1], b[2]])?
            }
        }
    };
    kind.check_point(&p)?;
    Ok(p)
}

fn data_lines(path: &Path) -> Result<Vec<(usize, String)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, h)) if h.starts_with("point") => Ok(lines.collect()),
        Some((n, _)) => Err(CliError::input(format!("{}:{n}: expected a header starting with \"point\"", path.display()))),
        None => Err(CliError::input(format!("{} is empty", path.display()))),
    }
}

/// Labels, points and values of a training file.
pub type DataRows = (Vec<String>, Vec<ManifoldPoint>, Vec<f64>);

/// Reads `point,y` rows; the value is the text after the last comma, so
/// multi-coordinate points may be written bare or quoted.
pub fn read_data(
    path: &Path,
    kind: &ManifoldKind,
    vertex: &dyn Fn(usize) -> Result<ManifoldPoint, CliError>,
) -> Result<DataRows, CliError> {
    let rows = data_lines(path)?;
    if rows.is_empty() {
        return Err(CliError::input(format!("{} has no data rows", path.display())));
    }
    let mut labels = Vec::with_capacity(rows.len());
    let mut points = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    for (n, line) in rows {
        let (p, v) = line
            .rsplit_once(',')
            .ok_or_else(|| CliError::input(format!("{}:{n}: expected point,y", path.display())))?;
        if matches!(kind, ManifoldKind::Mesh { .. }) && !p.trim().trim_matches('"').starts_with("vertex:") {
            return Err(CliError::input(format!(
                "{}:{n}: mesh training points must be vertex:i",
                path.display()
            )));
        }
        let point = parse_point(p, kind, vertex).map_err(|e| e.context(format!("{}:{n}", path.display())))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("{}:{n}: cannot parse value {v:?}", path.display())))?;
        labels.push(p.trim().trim_matches('"').to_string());
        points.push(point);
        y.push(value);
    }
    Ok((labels, points, y))
}

/// Reads a single-column `point` list.
pub fn read_points(
    path: &Path,
    kind: &ManifoldKind,
    vertex: &dyn Fn(usize) -> Result<ManifoldPoint, CliError>,
) -> Result<(Vec<String>, Vec<ManifoldPoint>), CliError> {
    let mut labels = Vec::new();
    let mut points = Vec::new();
    for (n, line) in data_lines(path)? {
        let p = parse_point(&line, kind, vertex).map_err(|e| e.context(format!("{}:{n}", path.display())))?;
        labels.push(line.trim_matches('"').to_string());
        points.push(p);
    }
    if points.is_empty() {
        return Err(CliError::input(format!("{} lists no points", path.display())));
    }
    Ok((labels, points))
}

pub fn csv_field(label: &str) -> String {
    if label.contains(',') {
        format!("\"{label}\"")
    } else {
        label.to_string()
    }
}

/// CSV with a `point` column followed by one column per entry of `columns`.
pub fn render_csv(labels: &[String], names: &[String], columns: &[Vec<f64>]) -> String {
    let mut s = String::from("point");
    for n in names {
        s.push(',');
        s.push_str(&csv_field(n));
    }
    s.push('\n');
    for (i, l) in labels.iter().enumerate() {
        s.push_str(&csv_field(l));
        for c in columns {
            let _ = write!(s, ",{}", fmt_g17(c[i]));
        }
        s.push('\n');
    }
    s
}

pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_vertex(_: usize) -> Result<ManifoldPoint, CliError> {
        Err(CliError::input("no mesh"))
    }

    #[test]
    fn g17_matches_printf() {
        assert_eq!(fmt_g17(1.0), "1");
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(-2.5), "-2.5");
        assert_eq!(fmt_g17(1e-7), "9.9999999999999995e-08");
        assert_eq!(fmt_g17(123456.0), "123456");
        assert_eq!(fmt_g17(1e20), "1e+20");
        assert_eq!(fmt_g17(0.0), "0");
        for x in [0.730762, 1.0 / 3.0, 6.02e23, -4.4e-9] {
            assert_eq!(fmt_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn point_encodings() {
        let p = parse_point("0.25", &ManifoldKind::Circle, &no_vertex).unwrap();
        assert_eq!(p, ManifoldPoint::Circle(0.25));
        assert!(parse_point("0.1,0.2", &ManifoldKind::Circle, &no_vertex).is_err());
        let p = parse_point("\"0.1, 0.7\"", &ManifoldKind::Torus { dim: 2 }, &no_vertex).unwrap();
        assert_eq!(p, ManifoldPoint::Torus(vec![0.1, 0.7]));
        let p = parse_point("0,0,2", &ManifoldKind::Sphere { dim: 2 }, &no_vertex).unwrap();
        assert_eq!(p, ManifoldPoint::Sphere(vec![0.0, 0.0, 1.0]));
        let mesh = ManifoldKind::Mesh {
            num_faces: 4,
            num_vertices: 4,
        };
        let p = parse_point("2:0.2,0.3,0.5", &mesh, &no_vertex).unwrap();
        assert_eq!(
            p,
            ManifoldPoint::Mesh {
                face: 2,
                bary: [0.2, 0.3, 0.5]
            }
        );
        assert!(parse_point("9:0.2,0.3,0.5", &mesh, &no_vertex).is_err());
        assert!(parse_point("abc", &ManifoldKind::Circle, &no_vertex).is_err());
    }
}
