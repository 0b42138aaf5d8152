//! Text formats: ASCII `x y z` clouds, `x y` point sets and the TOML camera
//! file.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraRecord, Point3, PointCloud3, PointSet2, View};
use crate::real::Real;

const MIN_SIGNIFICANT: usize = 6;

/// Shortest round-trip decimal (never exponent notation), zero-padded to at
/// least six significant digits.
pub fn format_decimal(v: f64) -> String {
    let mut s = format!("{v}");
    if !v.is_finite() {
        return s;
    }
    let digits: String = s.chars().filter(|c| c.is_ascii_digit()).collect();
    let significant = digits.trim_start_matches('0').len();
    let missing = if v == 0.0 {
        MIN_SIGNIFICANT
    } else {
        MIN_SIGNIFICANT.saturating_sub(significant)
    };
    if missing > 0 {
        if !s.contains('.') {
            s.push('.');
        }
        s.extend(std::iter::repeat('0').take(missing));
    }
    s
}

fn parse_rows(text: &str, arity: usize, origin: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != arity {
            return Err(Error::format(
                origin,
                format!("line {}: expected {arity} values, found {}", lineno + 1, fields.len()),
            ));
        }
        let row = fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::format(origin, format!("line {}: bad number {f:?}", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn parse_cloud<T: Real>(text: &str, origin: &Path) -> Result<PointCloud3<T>> {
    let points: Vec<Point3<T>> = parse_rows(text, 3, origin)?
        .into_iter()
        .map(|r| [T::lit(r[0]), T::lit(r[1]), T::lit(r[2])])
        .collect();
    if points.is_empty() {
        return Err(Error::format(origin, "cloud file holds no points"));
    }
    PointCloud3::new(points)
}

pub fn format_cloud<T: Real>(cloud: &PointCloud3<T>) -> String {
    let mut out = String::with_capacity(cloud.len() * 40);
    for p in cloud.points() {
        let _ = writeln!(
            out,
            "{} {} {}",
            format_decimal(p[0].as_f64()),
            format_decimal(p[1].as_f64()),
            format_decimal(p[2].as_f64())
        );
    }
    out
}

pub fn read_cloud<T: Real>(path: &Path) -> Result<PointCloud3<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cloud(&text, path)
}

pub fn write_cloud<T: Real>(path: &Path, cloud: &PointCloud3<T>) -> Result<()> {
    fs::write(path, format_cloud(cloud)).map_err(|e| Error::io(path, e))
}

pub fn format_points2<T: Real>(set: &PointSet2<T>) -> String {
    let mut out = String::with_capacity(set.len() * 26);
    for p in set.points() {
        let _ = writeln!(out, "{} {}", format_decimal(p[0].as_f64()), format_decimal(p[1].as_f64()));
    }
    out
}

pub fn parse_points2<T: Real>(text: &str, origin: &Path) -> Result<PointSet2<T>> {
    Ok(PointSet2::new(
        parse_rows(text, 2, origin)?
            .into_iter()
            .map(|r| [T::lit(r[0]), T::lit(r[1])])
            .collect(),
    ))
}

/// On-disk camera file: one `[[view]]` table per camera.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct CameraFile {
    /// Splat radius the silhouettes were synthesized with, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splat_radius: Option<f64>,
    #[serde(default, rename = "view")]
    pub views: Vec<CameraRecord>,
}

impl CameraFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let file: CameraFile = toml::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
        if file.views.is_empty() {
            return Err(Error::format(origin, "camera file lists no views"));
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("camera file serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn to_views<T: Real>(&self) -> Result<Vec<View<T>>> {
        self.views.iter().map(View::from_record).collect()
    }
}
