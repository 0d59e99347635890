//! Uniform rectangular grids, scalar fields on them, and field persistence.
//!
//! Nodes are stored row-major with the first axis varying slowest.

use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid dimension must be 2 or 3, got {0}")]
    Dimension(usize),
    #[error("axis {axis} needs at least 5 points, got {points}")]
    TooFewPoints { axis: usize, points: usize },
    #[error("axis {axis} has an empty or non-finite extent [{lo}, {hi}]")]
    Extent { axis: usize, lo: f64, hi: f64 },
    #[error("node {0} is not interior")]
    NotInterior(usize),
    #[error("fields live on different grids")]
    Mismatch,
    #[error("field data has {got} values, grid has {expected} nodes")]
    Length { expected: usize, got: usize },
    #[error("field contains a non-finite value at node {0}")]
    NonFinite(usize),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    extent: Vec<(f64, f64)>,
    points: Vec<usize>,
    h: Vec<f64>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(extent: Vec<(f64, f64)>, points: Vec<usize>) -> Result<Self, GridError> {
        let n = extent.len();
        if !(2..=3).contains(&n) || points.len() != n {
            return Err(GridError::Dimension(n.max(points.len())));
        }
        for (axis, (&(lo, hi), &p)) in extent.iter().zip(&points).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(GridError::Extent { axis, lo, hi });
            }
            if p < 5 {
                return Err(GridError::TooFewPoints { axis, points: p });
            }
        }
        let h = extent
            .iter()
            .zip(&points)
            .map(|(&(lo, hi), &p)| (hi - lo) / (p - 1) as f64)
            .collect();
        let mut strides = vec![1; n];
        for d in (0..n - 1).rev() {
            strides[d] = strides[d + 1] * points[d + 1];
        }
        Ok(Self {
            extent,
            points,
            h,
            strides,
        })
    }

    /// `[lo, hi]ⁿ` with `points` nodes per axis.
    pub fn cube(n: usize, lo: f64, hi: f64, points: usize) -> Result<Self, GridError> {
        Self::new(vec![(lo, hi); n], vec![points; n])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn extent(&self) -> &[(f64, f64)] {
        &self.extent
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multi-index of a flat node index.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for d in 0..self.dim() {
            out[d] = idx / self.strides[d];
            idx %= self.strides[d];
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Coordinate of node `idx`. The last node of each axis is placed at `hi` exactly.
    pub fn coord(&self, idx: usize) -> Vec<f64> {
        let m = self.multi_index(idx);
        (0..self.dim()).map(|d| self.axis_coord(d, m[d])).collect()
    }

    #[inline]
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        let (lo, hi) = self.extent[axis];
        if i + 1 == self.points[axis] {
            hi
        } else {
            lo + i as f64 * self.h[axis]
        }
    }

    /// Number of grid layers between `idx` and the nearest boundary face.
    pub fn depth(&self, idx: usize) -> usize {
        let m = self.multi_index(idx);
        m.iter()
            .zip(&self.points)
            .map(|(&i, &p)| i.min(p - 1 - i))
            .min()
            .unwrap_or(0)
    }

    #[inline]
    pub fn is_interior(&self, idx: usize) -> bool {
        self.depth(idx) >= 1
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_interior(i)).collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_interior(i)).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.extent.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Node nearest to the box center (lowest index on ties).
    pub fn center_node(&self) -> usize {
        let c = self.center();
        let m: Vec<usize> = (0..self.dim())
            .map(|d| {
                let t = (c[d] - self.extent[d].0) / self.h[d];
                (t.round() as usize).min(self.points[d] - 1)
            })
            .collect();
        self.flat_index(&m)
    }

    /// Radius of the largest ball centered at the box center inside the box.
    pub fn inscribed_radius(&self) -> f64 {
        self.extent
            .iter()
            .map(|(lo, hi)| 0.5 * (hi - lo))
            .fold(f64::INFINITY, f64::min)
    }

    /// Radius of the smallest ball centered at the box center containing the box.
    pub fn circumradius(&self) -> f64 {
        self.extent
            .iter()
            .map(|(lo, hi)| (0.5 * (hi - lo)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Nodes whose coordinates lie in the centered sub-box scaled by `fraction`.
    pub fn inner_nodes(&self, fraction: f64) -> Vec<usize> {
        let c = self.center();
        let half: Vec<f64> = self.extent.iter().map(|(lo, hi)| 0.5 * (hi - lo) * fraction).collect();
        (0..self.len())
            .filter(|&i| {
                let x = self.coord(i);
                (0..self.dim()).all(|d| (x[d] - c[d]).abs() <= half[d] * (1.0 + 1e-12))
            })
            .collect()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self, GridError> {
        if data.len() != grid.len() {
            return Err(GridError::Length {
                expected: grid.len(),
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            data: vec![0.0; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let data = (0..grid.len()).map(|i| f(&grid.coord(i))).collect();
        Self {
            grid: grid.clone(),
            data,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `max − min`.
    pub fn osc(&self) -> f64 {
        let (lo, hi) = self
            .data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        hi - lo
    }

    /// `‖self − other‖∞` over the given nodes (all nodes when `None`).
    pub fn max_diff(&self, other: &GridField, nodes: Option<&[usize]>) -> Result<f64, GridError> {
        if !self.grid.same_as(&other.grid) {
            return Err(GridError::Mismatch);
        }
        let d = |i: usize| (self.data[i] - other.data[i]).abs();
        Ok(match nodes {
            Some(ns) => ns.iter().map(|&i| d(i)).fold(0.0, f64::max),
            None => (0..self.data.len()).map(d).fold(0.0, f64::max),
        })
    }

    fn header(&self) -> String {
        let g = &self.grid;
        let points: Vec<String> = g.points.iter().map(|p| p.to_string()).collect();
        let extent: Vec<String> = g
            .extent
            .iter()
            .map(|(lo, hi)| format!("{},{}", fmt_exact(*lo), fmt_exact(*hi)))
            .collect();
        format!(
            "LAGMC-FIELD v1; n={}; points={}; extent={}",
            g.dim(),
            points.join(","),
            extent.join(";")
        )
    }

    /// Text format: header line, then one value per line with 17 significant digits.
    pub fn write_text(&self, mut w: impl Write) -> Result<(), GridError> {
        writeln!(w, "{}", self.header())?;
        for v in &self.data {
            writeln!(w, "{v:.16e}")?;
        }
        Ok(())
    }

    pub fn read_text(r: impl BufRead) -> Result<Self, GridError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| GridError::Format("empty file".into()))??;
        let grid = parse_header(&header)?;
        let mut data = Vec::with_capacity(grid.len());
        for (k, line) in lines.enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            data.push(
                t.parse::<f64>()
                    .map_err(|e| GridError::Format(format!("value line {}: {e}", k + 2)))?,
            );
        }
        GridField::new(grid, data)
    }

    /// Binary twin: `LMC1`, `n`, points, extent pairs, values; all little-endian 64-bit.
    pub fn write_binary(&self, mut w: impl Write) -> Result<(), GridError> {
        let g = &self.grid;
        w.write_all(b"LMC1")?;
        w.write_all(&(g.dim() as u64).to_le_bytes())?;
        for &p in &g.points {
            w.write_all(&(p as u64).to_le_bytes())?;
        }
        for &(lo, hi) in &g.extent {
            w.write_all(&lo.to_le_bytes())?;
            w.write_all(&hi.to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self, GridError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"LMC1" {
            return Err(GridError::Format("bad magic".into()));
        }
        let mut word = [0u8; 8];
        let mut next_u64 = |r: &mut dyn Read| -> Result<u64, GridError> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let n = next_u64(&mut r)? as usize;
        if !(2..=3).contains(&n) {
            return Err(GridError::Dimension(n));
        }
        let points = (0..n)
            .map(|_| next_u64(&mut r).map(|p| p as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let mut extent = Vec::with_capacity(n);
        for _ in 0..n {
            let lo = f64::from_bits(next_u64(&mut r)?);
            let hi = f64::from_bits(next_u64(&mut r)?);
            extent.push((lo, hi));
        }
        let grid = Grid::new(extent, points)?;
        let data = (0..grid.len())
            .map(|_| next_u64(&mut r).map(f64::from_bits))
            .collect::<Result<Vec<_>, _>>()?;
        GridField::new(grid, data)
    }
}

/// Shortest decimal that parses back to the same `f64`.
fn fmt_exact(v: f64) -> String {
    format!("{v:?}")
}

fn parse_header(line: &str) -> Result<Grid, GridError> {
    let bad = |m: &str| GridError::Format(format!("header: {m}"));
    let rest = line
        .strip_prefix("LAGMC-FIELD v1;")
        .ok_or_else(|| bad("missing `LAGMC-FIELD v1` tag"))?;
    // extent values contain ';', so split on the key markers instead
    let n_pos = rest.find("n=").ok_or_else(|| bad("missing n"))?;
    let p_pos = rest.find("points=").ok_or_else(|| bad("missing points"))?;
    let e_pos = rest.find("extent=").ok_or_else(|| bad("missing extent"))?;
    if !(n_pos < p_pos && p_pos < e_pos) {
        return Err(bad("fields out of order"));
    }
    let field = |a: usize, b: usize| rest[a..b].trim().trim_end_matches(';').trim();
    let n = field(n_pos + 2, p_pos).parse::<usize>().map_err(|_| bad("n"))?;
    let points = field(p_pos + 7, e_pos)
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| bad("points"))?;
    let extent = rest[e_pos + 7..]
        .trim()
        .split(';')
        .map(|pair| {
            let mut it = pair.split(',');
            let lo = it.next().and_then(|s| s.trim().parse::<f64>().ok());
            let hi = it.next().and_then(|s| s.trim().parse::<f64>().ok());
            match (lo, hi, it.next()) {
                (Some(lo), Some(hi), None) => Ok((lo, hi)),
                _ => Err(bad("extent")),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    if points.len() != n || extent.len() != n {
        return Err(bad("n disagrees with points/extent"));
    }
    Grid::new(extent, points)
}
