use std::collections::HashMap;

use super::marching_squares::SNAP_TOL;
use super::surface::{cross, length, sub, SurfaceMesh, Vec3};
use crate::error::Result;
use crate::field::ScalarGrid;

/// Triangles below this area are collapsed during cleanup.
pub const MIN_TRIANGLE_AREA: f64 = 1e-14;

// Corner c has offsets (c & 1, c >> 1 & 1, c >> 2 & 1) along axes (0, 1, 2).
// Each face lists its corners counter-clockwise as seen from outside the cube.
const FACES: [[usize; 4]; 6] = [
    [0b000, 0b100, 0b110, 0b010], // axis 0 low
    [0b001, 0b011, 0b111, 0b101], // axis 0 high
    [0b000, 0b001, 0b101, 0b100], // axis 1 low
    [0b010, 0b110, 0b111, 0b011], // axis 1 high
    [0b000, 0b010, 0b011, 0b001], // axis 2 low
    [0b100, 0b101, 0b111, 0b110], // axis 2 high
];

fn offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// Bitmask of the cube faces containing every corner in `corners`.
fn face_mask(corners: &[usize]) -> u8 {
    let mut mask = 0u8;
    for axis in 0..3 {
        let sides: Vec<usize> = corners.iter().map(|&c| offset(c)[axis]).collect();
        if sides.iter().all(|&s| s == sides[0]) {
            mask |= 1 << (2 * axis + sides[0]);
        }
    }
    mask
}

/// Local edge id: lower corner * 3 + axis.
fn local_edge(a: usize, b: usize) -> usize {
    let axis = (a ^ b).trailing_zeros() as usize;
    a.min(b) * 3 + axis
}

/// Iso-surface of a 3D grid through the cell centers.
///
/// Triangles are wound so their normals point toward decreasing values (out
/// of the region above `iso`). Each cube is triangulated by walking its faces:
/// ambiguous faces are resolved with the asymptotic decider, which both
/// neighbouring cubes evaluate identically, so the result has no cracks. A
/// level outside the grid range yields an empty mesh.
pub fn marching_cubes(grid: &ScalarGrid, iso: f64) -> Result<SurfaceMesh> {
    grid.expect_dim(3)?;
    let res = grid.res();
    let values = grid.values();
    let point = |p: [usize; 3]| (p[0] * res + p[1]) * res + p[2];
    let h = 1.0 / res as f64;

    let mut builder = Builder { keys: HashMap::new(), vertices: Vec::new() };
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    for i in 0..res.saturating_sub(1) {
        for j in 0..res - 1 {
            for k in 0..res - 1 {
                let corner_point = |c: usize| {
                    let o = offset(c);
                    [i + o[0], j + o[1], k + o[2]]
                };
                let v: [f64; 8] = std::array::from_fn(|c| values[point(corner_point(c))] - iso);
                let pos = v.map(|x| x > 0.0);
                if pos.iter().all(|&p| p) || pos.iter().all(|&p| !p) {
                    continue;
                }

                // segments exit -> entry on each face, keyed by local edge id
                let mut next = [usize::MAX; 24];
                for face in &FACES {
                    let fv = face.map(|c| v[c]);
                    let fp = face.map(|c| pos[c]);
                    let mut exits = [0usize; 2];
                    let mut entries = [0usize; 2];
                    let (mut ne, mut nn) = (0, 0);
                    for m in 0..4 {
                        match (fp[m], fp[(m + 1) % 4]) {
                            (true, false) => {
                                exits[ne] = m;
                                ne += 1;
                            }
                            (false, true) => {
                                entries[nn] = m;
                                nn += 1;
                            }
                            _ => {}
                        }
                    }
                    let connected = ne == 2 && {
                        let (a, b) = if fp[0] { (0, 1) } else { (1, 0) };
                        // saddle value of the bilinear face interpolant
                        let num = fv[a] * fv[a + 2] - fv[b] * fv[b + 2];
                        let den = fv[a] + fv[a + 2] - fv[b] - fv[b + 2];
                        num / den > 0.0
                    };
                    let edge = |m: usize| local_edge(face[m], face[(m + 1) % 4]);
                    for &e in &exits[..ne] {
                        let entry = pick_entry(e, &entries[..nn], connected);
                        next[edge(e)] = edge(entry);
                    }
                }

                let mut seen = [false; 24];
                for start in 0..24 {
                    if next[start] == usize::MAX || seen[start] {
                        continue;
                    }
                    let mut lp: Vec<(usize, u8)> = Vec::new();
                    let mut cur = start;
                    while cur != usize::MAX && !seen[cur] {
                        seen[cur] = true;
                        let (lo, axis) = (cur / 3, cur % 3);
                        let hi = lo | (1 << axis);
                        let (pa, pb) = (corner_point(lo), corner_point(hi));
                        let (va, vb) = (v[lo], v[hi]);
                        let (id, mask) = if vb.abs() <= SNAP_TOL {
                            (builder.at_point(point(pb), pb, h), face_mask(&[hi]))
                        } else if va.abs() <= SNAP_TOL {
                            (builder.at_point(point(pa), pa, h), face_mask(&[lo]))
                        } else {
                            let t = va / (va - vb);
                            (builder.on_edge(point(pa), axis, pa, t, h), face_mask(&[lo, hi]))
                        };
                        if lp.last().is_none_or(|l| l.0 != id) {
                            lp.push((id, mask));
                        }
                        cur = next[cur];
                    }
                    while lp.len() > 1 && lp[0].0 == lp[lp.len() - 1].0 {
                        lp.pop();
                    }
                    if lp.len() >= 3 {
                        fan(&lp, &mut triangles);
                    }
                }
            }
        }
    }

    let mesh = cleanup(builder.vertices, triangles)?;
    Ok(mesh)
}

fn pick_entry(exit: usize, entries: &[usize], connected: bool) -> usize {
    let dist = |from: usize, to: usize| (to + 4 - from) % 4;
    if connected {
        *entries.iter().min_by_key(|&&e| dist(exit, e)).unwrap()
    } else {
        *entries.iter().min_by_key(|&&e| dist(e, exit)).unwrap()
    }
}

/// Fan-triangulates a loop from the first vertex whose diagonals leave every
/// cube face, so no triangle lies flat in a face shared with a neighbour.
/// The loop runs counter-clockwise around the positive side, so the winding
/// is reversed to face the negative side.
fn fan(lp: &[(usize, u8)], out: &mut Vec<[usize; 3]>) {
    let n = lp.len();
    let start = (0..n)
        .find(|&s| (2..n - 1).all(|d| lp[s].1 & lp[(s + d) % n].1 == 0))
        .unwrap_or(0);
    for d in 1..n - 1 {
        let (a, b, c) = (lp[start].0, lp[(start + d) % n].0, lp[(start + d + 1) % n].0);
        out.push([a, c, b]);
    }
}

struct Builder {
    keys: HashMap<usize, usize>,
    vertices: Vec<Vec3>,
}

impl Builder {
    fn insert(&mut self, key: usize, pos: impl FnOnce() -> Vec3) -> usize {
        let next = self.vertices.len();
        let id = *self.keys.entry(key).or_insert(next);
        if id == next {
            self.vertices.push(pos());
        }
        id
    }

    fn at_point(&mut self, flat: usize, p: [usize; 3], h: f64) -> usize {
        self.insert(flat * 4 + 3, || p.map(|x| (x as f64 + 0.5) * h))
    }

    fn on_edge(&mut self, flat: usize, axis: usize, p: [usize; 3], t: f64, h: f64) -> usize {
        self.insert(flat * 4 + axis, || {
            let mut q = p.map(|x| (x as f64 + 0.5) * h);
            q[axis] += t * h;
            q
        })
    }
}

/// Collapses slivers below [`MIN_TRIANGLE_AREA`] along their shortest edge,
/// drops triangles that lost a vertex and unreferenced vertices.
fn cleanup(vertices: Vec<Vec3>, mut triangles: Vec<[usize; 3]>) -> Result<SurfaceMesh> {
    let mut parent: Vec<usize> = (0..vertices.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for _ in 0..8 {
        let mut changed = false;
        for t in &triangles {
            let t = t.map(|i| find(&mut parent, i));
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                continue;
            }
            let [a, b, c] = t.map(|i| vertices[i]);
            if 0.5 * length(cross(sub(b, a), sub(c, a))) >= MIN_TRIANGLE_AREA {
                continue;
            }
            let edges = [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])];
            let (u, w) = *edges
                .iter()
                .min_by(|x, y| {
                    let lx = length(sub(vertices[x.0], vertices[x.1]));
                    let ly = length(sub(vertices[y.0], vertices[y.1]));
                    lx.total_cmp(&ly)
                })
                .unwrap();
            parent[u.max(w)] = u.min(w);
            changed = true;
        }
        if !changed {
            break;
        }
    }
    triangles = triangles
        .into_iter()
        .map(|t| t.map(|i| find(&mut parent, i)))
        .filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
        .collect();
    Ok(SurfaceMesh::new(vertices, triangles)?.compacted())
}
