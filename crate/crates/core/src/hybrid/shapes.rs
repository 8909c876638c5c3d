use rand::Rng;

use crate::error::{Error, Result};
use crate::mesh::Contour;
use crate::rng::{stream, Stream};

pub const POLYGON_CENTER: [f64; 2] = [0.5, 0.5];
pub const POLYGON_RADII: (f64, f64) = (0.15, 0.4);

/// Star-shaped polygon around the domain center with `pivots` vertices at
/// evenly spaced angles and seeded radii in [`POLYGON_RADII`]. Counter-clockwise.
pub fn make_polygon_target(pivots: usize, seed: u64) -> Result<Contour> {
    if pivots < 3 {
        return Err(Error::invalid(format!("a polygon needs at least 3 pivots, got {pivots}")));
    }
    let mut rng = stream(seed, Stream::Fixture);
    let (lo, hi) = POLYGON_RADII;
    let verts = (0..pivots)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / pivots as f64;
            let r = rng.gen_range(lo..=hi);
            [POLYGON_CENTER[0] + r * a.cos(), POLYGON_CENTER[1] + r * a.sin()]
        })
        .collect();
    Contour::new(vec![verts])
}

/// Counter-clockwise regular `n`-gon inscribed in a circle.
pub fn make_circle(n: usize, radius: f64, center: [f64; 2]) -> Result<Contour> {
    if n < 3 {
        return Err(Error::invalid(format!("a circle needs at least 3 vertices, got {n}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    let verts = (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect();
    Contour::new(vec![verts])
}
