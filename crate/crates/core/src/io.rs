//! File formats: sample CSV, tables, contours, fitted-model JSON.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assignment::SolverKind;
use crate::error::{invalid, Error, Result};
use crate::experiments::GcRow;
use crate::grid::GridSpec;
use crate::moreau::{Direction, SmoothMap};
use crate::pipeline::{Fit, FitConfig};
use crate::points::PointSet;
use crate::ranks::{ContourSet, RankSignTable, SignCurve};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Reads an `n x d` numeric table. A first line that does not parse as
/// numbers is taken as a header.
pub fn read_sample_csv<R: Read>(reader: R) -> Result<PointSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut coords = vec![];
    let mut dim = None;
    let mut line = 0;
    for rec in rdr.records() {
        let rec = rec?;
        line += 1;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if line == 1 => continue,
            Err(e) => return invalid(format!("line {line}: {e}")),
        };
        if row.iter().any(|v| !v.is_finite()) {
            return invalid(format!("line {line}: non-finite value"));
        }
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return invalid(format!("line {line}: {} fields, expected {d}", row.len()));
            }
            _ => {}
        }
        coords.extend(row);
    }
    match dim {
        Some(d) if d > 0 => PointSet::new(d, coords),
        _ => invalid("no data rows"),
    }
}

pub fn parse_sample_csv(text: &str) -> Result<PointSet> {
    read_sample_csv(text.as_bytes())
}

/// Hex SHA-256 of the dimension and the coordinates (little-endian).
pub fn sample_hash(points: &PointSet) -> String {
    let mut h = Sha256::new();
    h.update((points.dim() as u64).to_le_bytes());
    for v in points.as_slice() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn coord_headers(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|k| format!("{prefix}{k}")).collect()
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn write_points_csv<W: Write>(writer: W, points: &PointSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(coord_headers("x", points.dim()))?;
    for row in points.rows() {
        w.write_record(row.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// `index, f1..fd, rank, ring, direction, s1..sd`.
pub fn write_table_csv<W: Write>(writer: W, table: &RankSignTable) -> Result<()> {
    let d = table.dim();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["index".to_string()];
    header.extend(coord_headers("f", d));
    header.extend(["rank", "ring", "direction"].map(String::from));
    header.extend(coord_headers("s", d));
    w.write_record(&header)?;
    for (i, r) in table.rows.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(r.f_value.iter().map(|v| fmt(*v)));
        rec.push(fmt(r.rank));
        rec.push(r.ring.to_string());
        rec.push(r.direction.map_or(String::new(), |s| s.to_string()));
        rec.extend(r.sign.iter().map(|v| fmt(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `level, ring, interpolated, vertex, x1..xd`.
pub fn write_contours_csv<W: Write>(writer: W, contours: &[ContourSet]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = contours.first().map_or(2, |c| c.polyline.dim());
    let mut header: Vec<String> = ["level", "ring", "interpolated", "vertex"].map(String::from).to_vec();
    header.extend(coord_headers("x", d));
    w.write_record(&header)?;
    for c in contours {
        for (k, p) in c.polyline.rows().enumerate() {
            let mut rec = vec![fmt(c.level), c.ring.to_string(), c.interpolated.to_string(), k.to_string()];
            rec.extend(p.iter().map(|v| fmt(*v)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `curve, u1..ud, step, r, x1..xd`.
pub fn write_sign_curves_csv<W: Write>(writer: W, curves: &[SignCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = curves.first().map_or(2, |c| c.direction.len());
    let mut header = vec!["curve".to_string()];
    header.extend(coord_headers("u", d));
    header.extend(["step", "r"].map(String::from));
    header.extend(coord_headers("x", d));
    w.write_record(&header)?;
    for (c, curve) in curves.iter().enumerate() {
        for (k, (r, p)) in curve.radii.iter().zip(curve.polyline.rows()).enumerate() {
            let mut rec = vec![c.to_string()];
            rec.extend(curve.direction.iter().map(|v| fmt(*v)));
            rec.push(k.to_string());
            rec.push(fmt(*r));
            rec.extend(p.iter().map(|v| fmt(*v)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long format, one row per (size, replicate); `sup_error` empty when skipped.
pub fn write_gc_csv<W: Write>(writer: W, rows: &[GcRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "replicate", "seed", "n_r", "n_s", "n_0", "max_error", "outer_error", "sup_error"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
            r.n_r.to_string(),
            r.n_s.to_string(),
            r.n_0.to_string(),
            fmt(r.max_error),
            fmt(r.outer_error),
            r.sup_error.map_or(String::new(), fmt),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A persisted fit: the run configuration, the assignment and both maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub version: String,
    pub config: serde_json::Value,
    pub grid_spec: GridSpec,
    pub sample_hash: String,
    pub n: usize,
    pub d: usize,
    pub n_r: usize,
    pub n_s: usize,
    pub n_0: usize,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub epsilon_star: f64,
    pub solver: SolverKind,
    pub retries: usize,
    /// Grid index of each observation.
    pub assignment: Vec<usize>,
    /// Ring of each observation.
    pub rings: Vec<usize>,
    pub forward: SmoothMap,
    #[serde(default)]
    pub quantile: Option<SmoothMap>,
}

impl FitFile {
    /// Persistable form of a smoothed fit; `config` is recorded verbatim.
    pub fn from_fit(fit: &Fit, config: &FitConfig) -> Result<Self> {
        let (Some(forward), Some(certificate)) = (&fit.forward, &fit.certificate) else {
            return invalid("only smoothed fits can be saved");
        };
        let g = &fit.grid.spec;
        let mut forward = forward.clone();
        let mut quantile = fit.quantile.clone();
        let hash = sample_hash(&fit.sample);
        for m in std::iter::once(&mut forward).chain(quantile.as_mut()) {
            m.grid_spec = Some(g.clone());
            m.sample_hash = Some(hash.clone());
        }
        let file = Self {
            version: VERSION.to_string(),
            config: serde_json::to_value(config)?,
            grid_spec: g.clone(),
            sample_hash: hash,
            n: g.n,
            d: g.dim,
            n_r: g.n_r,
            n_s: g.n_s,
            n_0: g.n_0,
            epsilon_star: certificate.epsilon_star,
            solver: fit.assignment.solver,
            retries: fit.retries,
            assignment: fit.assignment.perm.clone(),
            rings: fit.table.rows.iter().map(|r| r.ring).collect(),
            forward,
            quantile,
        };
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_spec.validate()?;
        let g = &self.grid_spec;
        if (self.n, self.d, self.n_r, self.n_s, self.n_0) != (g.n, g.dim, g.n_r, g.n_s, g.n_0) {
            return invalid("fit header disagrees with its grid spec");
        }
        if self.assignment.len() != self.n || self.rings.len() != self.n {
            return invalid("assignment or rings have the wrong length");
        }
        let mut seen = vec![false; self.n];
        for &j in &self.assignment {
            if j >= self.n || std::mem::replace(&mut seen[j], true) {
                return invalid("assignment is not a permutation");
            }
        }
        if self.rings.iter().any(|&r| r > self.n_r) {
            return invalid("ring index out of range");
        }
        self.forward.validate()?;
        if self.forward.direction != Direction::SampleToBall || self.forward.dim() != self.d {
            return invalid("forward map has the wrong direction or dimension");
        }
        if let Some(q) = &self.quantile {
            q.validate()?;
            if q.direction != Direction::BallToSample || q.dim() != self.d {
                return invalid("quantile map has the wrong direction or dimension");
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text)?;
        f.validate()?;
        Ok(f)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(Error::from)
    }
}
