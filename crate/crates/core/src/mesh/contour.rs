use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

const MERGE_TOL: f64 = 1e-12;

/// One or more closed polylines in the plane.
///
/// Loops around regions where the source field is above the iso level run
/// counter-clockwise, so the outward normal of an edge `a → b` is the edge
/// direction rotated clockwise.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Contour {
    loops: Vec<Vec<Vec2>>,
}

impl Contour {
    /// Builds a contour, merging consecutive duplicate vertices (including the
    /// wrap-around pair). Every loop must keep at least 3 vertices.
    pub fn new(loops: Vec<Vec<Vec2>>) -> Result<Self> {
        let mut out = Vec::with_capacity(loops.len());
        for (i, lp) in loops.into_iter().enumerate() {
            if lp.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("contour vertices"));
            }
            let mut merged: Vec<Vec2> = Vec::with_capacity(lp.len());
            for v in lp {
                if merged.last().is_none_or(|l| dist(*l, v) > MERGE_TOL) {
                    merged.push(v);
                }
            }
            while merged.len() > 1 && dist(merged[0], *merged.last().unwrap()) <= MERGE_TOL {
                merged.pop();
            }
            if merged.len() < 3 {
                return Err(Error::invalid(format!("loop {i} has fewer than 3 vertices")));
            }
            out.push(merged);
        }
        Ok(Self { loops: out })
    }

    pub fn loops(&self) -> &[Vec<Vec2>] {
        &self.loops
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.loops.iter().map(Vec::len).sum()
    }

    /// All vertices, loop by loop.
    pub fn vertices(&self) -> Vec<Vec2> {
        self.loops.iter().flatten().copied().collect()
    }

    /// Same loop structure with replaced vertex positions (in `vertices()` order).
    pub fn with_vertices(&self, vertices: &[Vec2]) -> Result<Self> {
        if vertices.len() != self.vertex_count() {
            return Err(Error::invalid("vertex count must not change"));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("contour vertices"));
        }
        let mut loops = Vec::with_capacity(self.loops.len());
        let mut start = 0;
        for lp in &self.loops {
            loops.push(vertices[start..start + lp.len()].to_vec());
            start += lp.len();
        }
        Ok(Self { loops })
    }

    /// Edges as pairs of indices into `vertices()`, in loop order.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges = Vec::with_capacity(self.vertex_count());
        let mut start = 0;
        for lp in &self.loops {
            let n = lp.len();
            edges.extend((0..n).map(|i| [start + i, start + (i + 1) % n]));
            start += n;
        }
        edges
    }

    pub fn perimeter(&self) -> f64 {
        self.loops
            .iter()
            .map(|lp| (0..lp.len()).map(|i| dist(lp[i], lp[(i + 1) % lp.len()])).sum::<f64>())
            .sum()
    }

    /// Sum of signed loop areas (counter-clockwise positive).
    pub fn signed_area(&self) -> f64 {
        self.loops.iter().map(|lp| loop_area(lp)).sum()
    }

    pub fn reversed(&self) -> Self {
        Self {
            loops: self
                .loops
                .iter()
                .map(|lp| lp.iter().rev().copied().collect())
                .collect(),
        }
    }
}

pub(crate) fn loop_area(lp: &[Vec2]) -> f64 {
    let n = lp.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (lp[i], lp[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

pub(crate) fn dist(a: Vec2, b: Vec2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
