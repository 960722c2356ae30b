//! Slice-by-slice comparison of two grids after center normalization.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::config::Polygon;
use super::grid::Grid;
use crate::{Error, Result};

/// Half-width of the center block, in polygon units.
pub const CENTER_BLOCK: f64 = 0.05;
/// Bins closer than this many lattice spacings to the boundary are skipped.
pub const BOUNDARY_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub y_slice: f64,
    /// Grid row actually used: the one nearest the requested slice.
    pub y_row: f64,
    /// Mean over `x` of first minus second.
    pub avg_error: f64,
    pub std_dev: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub slices: Vec<f64>,
    /// Simulation bins below this count are skipped.
    pub min_count: u64,
}

pub fn center(polygon: Polygon) -> (f64, f64) {
    match polygon {
        Polygon::Rect { aspect } => (0.5 * aspect, 0.5),
        Polygon::HexRegular => (0.0, 0.0),
    }
}

pub fn in_center_block(polygon: Polygon, spacing: f64, x: f64, y: f64) -> bool {
    let (cx, cy) = center(polygon);
    let h = CENTER_BLOCK.max(1.5 * spacing);
    (x - cx).abs() <= h && (y - cy).abs() <= h
}

/// Distance from `(x, y)` to the polygon boundary (negative outside).
pub fn boundary_distance(polygon: Polygon, x: f64, y: f64) -> f64 {
    match polygon {
        Polygon::Rect { aspect } => x.min(aspect - x).min(y).min(1.0 - y),
        Polygon::HexRegular => {
            let apothem = 3f64.sqrt() / 2.0;
            (0..6)
                .map(|k| {
                    let t = std::f64::consts::PI * (k as f64 / 3.0 - 0.5);
                    apothem - (x * t.cos() + y * t.sin())
                })
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// For each slice, the value in `ys` closest to it.
pub fn nearest_rows(ys: &[f64], slices: &[f64]) -> Vec<f64> {
    slices
        .iter()
        .map(|&s| {
            ys.iter()
                .copied()
                .fold(f64::NAN, |best, y| if best.is_nan() || (y - s).abs() < (best - s).abs() { y } else { best })
        })
        .collect()
}

fn polygon_of(g: &Grid) -> Result<Polygon> {
    match g.meta("polygon") {
        Some("rect") => Ok(Polygon::Rect { aspect: g.meta_f64("aspect")? }),
        Some("hex") => Ok(Polygon::HexRegular),
        other => Err(Error::Config(format!("grid names no known polygon ({other:?})"))),
    }
}

fn key(x: f64, y: f64) -> (i64, i64) {
    ((x * 1e9).round() as i64, (y * 1e9).round() as i64)
}

/// Compare `a` against `b` (errors are `a - b`) on the rows nearest each
/// slice. Both grids are divided by their mean over the center block,
/// taken over points usable in both.
pub fn compare(a: &Grid, b: &Grid, opts: &CompareOptions) -> Result<Vec<ComparisonRow>> {
    let (pa, pb) = (polygon_of(a)?, polygon_of(b)?);
    let (sa, sb) = (a.meta_f64("spacing")?, b.meta_f64("spacing")?);
    if pa != pb || sa != sb {
        return Err(Error::Geometry(format!(
            "incompatible extents: {pa:?} at spacing {sa} against {pb:?} at spacing {sb}"
        )));
    }
    let usable =
        |g: &Grid, v: f64| v.is_finite() && (g.meta("kind") != Some("simulation") || v >= opts.min_count as f64);
    let index: HashMap<(i64, i64), f64> = b.points.iter().map(|p| (key(p.x, p.y), p.value)).collect();
    let common: Vec<(f64, f64, f64, f64)> = a
        .points
        .iter()
        .filter_map(|p| index.get(&key(p.x, p.y)).map(|&vb| (p.x, p.y, p.value, vb)))
        .filter(|&(_, _, va, vb)| usable(a, va) && usable(b, vb))
        .collect();
    let block: Vec<&(f64, f64, f64, f64)> =
        common.iter().filter(|&&(x, y, _, _)| in_center_block(pa, sa, x, y)).collect();
    if block.is_empty() {
        return Err(Error::Geometry("no usable points in the center block".into()));
    }
    let na = block.iter().map(|p| p.2).sum::<f64>() / block.len() as f64;
    let nb = block.iter().map(|p| p.3).sum::<f64>() / block.len() as f64;
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::Numeric("center block mean is not positive".into()));
    }
    let ys: Vec<f64> = common.iter().map(|p| p.1).collect();
    let rows = nearest_rows(&ys, &opts.slices);
    let mut out = Vec::new();
    for (&slice, &row) in opts.slices.iter().zip(&rows) {
        let d: Vec<f64> = common
            .iter()
            .filter(|&&(x, y, _, _)| y == row && boundary_distance(pa, x, y) >= BOUNDARY_MARGIN * sa - 1e-9)
            .map(|&(_, _, va, vb)| va / na - vb / nb)
            .collect();
        if d.is_empty() {
            return Err(Error::Geometry(format!("slice y = {slice} has no usable bins")));
        }
        let n = d.len() as f64;
        let avg = d.iter().sum::<f64>() / n;
        let std = (d.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / n).sqrt();
        out.push(ComparisonRow { y_slice: slice, y_row: row, avg_error: avg, std_dev: std, bins: d.len() });
    }
    Ok(out)
}

/// Table file: metadata lines, then `y_slice,y_row,avg_error,std_dev,bins`.
pub fn table_csv(rows: &[ComparisonRow], meta: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        writeln!(out, "# {k}={v}").unwrap();
    }
    out.push_str("y_slice,y_row,avg_error,std_dev,bins\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.y_slice, r.y_row, r.avg_error, r.std_dev, r.bins).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::grid::GridPoint;
    use super::*;
    use proptest::prelude::*;

    fn rect_grid(kind: &str, f: impl Fn(f64, f64) -> f64) -> Grid {
        let mut g = Grid::default();
        g.set("kind", kind);
        g.set("polygon", "rect");
        g.set("aspect", 2.0);
        g.set("spacing", 0.05);
        for j in 1..20 {
            for i in 1..40 {
                let (x, y) = (i as f64 * 0.05, j as f64 * 0.05);
                g.points.push(GridPoint { x, y, value: f(x, y) });
            }
        }
        g
    }

    fn opts() -> CompareOptions {
        CompareOptions { slices: vec![0.1, 0.3, 0.52], min_count: 0 }
    }

    #[test]
    fn identical_inputs_agree_exactly() {
        let g = rect_grid("theory", |x, y| 1.0 + x * y);
        for r in compare(&g, &g, &opts()).unwrap() {
            assert_eq!((r.avg_error, r.std_dev), (0.0, 0.0));
            // x from 2 spacings to R - 2 spacings
            assert_eq!(r.bins, 37);
        }
    }

    #[test]
    fn normalization_removes_constant_factors() {
        let a = rect_grid("theory", |x, y| 1.0 + x * y);
        let b = rect_grid("simulation", |x, y| 7.0 * (1.0 + x * y));
        for r in compare(&a, &b, &opts()).unwrap() {
            assert!(r.avg_error.abs() < 1e-12 && r.std_dev < 1e-12);
        }
        let rows = compare(&a, &b, &opts()).unwrap();
        assert_eq!(rows[2].y_row, 0.5);
    }

    proptest! {
        #[test]
        fn antisymmetric(c in 0.1f64..3.0, s in -1.0f64..1.0) {
            let a = rect_grid("theory", |x, y| 1.0 + x * y);
            let b = rect_grid("theory", |x, y| c * (1.5 + s * (x - y).sin()));
            let ab = compare(&a, &b, &opts()).unwrap();
            let ba = compare(&b, &a, &opts()).unwrap();
            for (p, q) in ab.iter().zip(&ba) {
                prop_assert!((p.avg_error + q.avg_error).abs() < 1e-12);
                prop_assert!((p.std_dev - q.std_dev).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn low_counts_and_mismatches() {
        let a = rect_grid("theory", |_, _| 1.0);
        let b = rect_grid("simulation", |x, _| if x < 0.5 { 3.0 } else { 50.0 });
        let o = CompareOptions { slices: vec![0.5], min_count: 10 };
        let r = compare(&a, &b, &o).unwrap();
        assert_eq!(r[0].bins, 37 - 8);
        let mut c = a.clone();
        c.set("spacing", 0.1);
        assert!(matches!(compare(&a, &c, &o), Err(Error::Geometry(_))));
        c.set("spacing", 0.05);
        c.set("polygon", "hex");
        assert!(compare(&a, &c, &o).is_err());
    }

    #[test]
    fn hexagon_boundary_distance() {
        let h = Polygon::HexRegular;
        assert!((boundary_distance(h, 0.0, 0.0) - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(boundary_distance(h, 0.0, -3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(boundary_distance(h, 1.0, 0.0).abs() < 1e-15);
        assert!(boundary_distance(h, 0.0, 0.9) < 0.0);
    }
}
