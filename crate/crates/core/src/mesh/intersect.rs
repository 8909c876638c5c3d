//! Exact triangle–triangle intersection over a bounding-volume hierarchy.

use rayon::prelude::*;
use robust::{orient2d, orient3d, Coord, Coord3D};

use super::surface::{cross, sub, SurfaceMesh, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn of(points: &[Vec3]) -> Self {
        let mut b = Aabb { min: [f64::INFINITY; 3], max: [f64::NEG_INFINITY; 3] };
        for p in points {
            b.grow(p);
        }
        b
    }

    fn grow(&mut self, p: &Vec3) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    fn union(&self, o: &Aabb) -> Aabb {
        let mut b = *self;
        b.grow(&o.min);
        b.grow(&o.max);
        b
    }

    fn overlaps(&self, o: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= o.max[k] && o.min[k] <= self.max[k])
    }
}

enum Node {
    Leaf { bounds: Aabb, faces: Vec<usize> },
    Inner { bounds: Aabb, children: Box<[Node; 2]> },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Median-split hierarchy over triangle bounding boxes.
pub struct Bvh {
    root: Option<Node>,
    boxes: Vec<Aabb>,
}

impl Bvh {
    pub fn new(mesh: &SurfaceMesh) -> Self {
        let boxes: Vec<Aabb> = (0..mesh.face_count()).map(|f| Aabb::of(&mesh.corners(f))).collect();
        let faces: Vec<usize> = (0..boxes.len()).collect();
        let root = (!faces.is_empty()).then(|| build(&boxes, faces));
        Self { root, boxes }
    }

    /// Faces whose boxes overlap the box of `face`, excluding `face` itself.
    fn candidates(&self, face: usize, out: &mut Vec<usize>) {
        out.clear();
        let q = self.boxes[face];
        let mut stack: Vec<&Node> = self.root.iter().collect();
        while let Some(n) = stack.pop() {
            if !n.bounds().overlaps(&q) {
                continue;
            }
            match n {
                Node::Leaf { faces, .. } => out.extend(
                    faces.iter().copied().filter(|&f| f != face && self.boxes[f].overlaps(&q)),
                ),
                Node::Inner { children, .. } => stack.extend(children.iter()),
            }
        }
    }
}

fn build(boxes: &[Aabb], mut faces: Vec<usize>) -> Node {
    let bounds = faces.iter().map(|&f| boxes[f]).reduce(|a, b| a.union(&b)).unwrap();
    if faces.len() <= LEAF_SIZE {
        return Node::Leaf { bounds, faces };
    }
    let extent = sub(bounds.max, bounds.min);
    let axis = (0..3).max_by(|&a, &b| extent[a].total_cmp(&extent[b])).unwrap();
    let centre = |f: usize| boxes[f].min[axis] + boxes[f].max[axis];
    let mid = faces.len() / 2;
    faces.select_nth_unstable_by(mid, |&a, &b| centre(a).total_cmp(&centre(b)).then(a.cmp(&b)));
    let right = faces.split_off(mid);
    Node::Inner { bounds, children: Box::new([build(boxes, faces), build(boxes, right)]) }
}

/// Per-face flag: does the face intersect some other face it shares no vertex with.
pub fn intersecting_faces(mesh: &SurfaceMesh) -> Vec<bool> {
    let bvh = Bvh::new(mesh);
    let tris = mesh.triangles();
    (0..mesh.face_count())
        .into_par_iter()
        .map_init(Vec::new, |buf, f| {
            bvh.candidates(f, buf);
            buf.iter().any(|&g| {
                !tris[f].iter().any(|i| tris[g].contains(i))
                    && triangles_intersect(mesh.corners(f), mesh.corners(g))
            })
        })
        .collect()
}

/// Fraction of faces taking part in at least one intersection between faces
/// that share no vertex.
pub fn self_intersection_ratio(mesh: &SurfaceMesh) -> f64 {
    if mesh.is_empty() {
        return 0.0;
    }
    let flags = intersecting_faces(mesh);
    flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
}

fn c3(p: Vec3) -> Coord3D<f64> {
    Coord3D { x: p[0], y: p[1], z: p[2] }
}

fn o3(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> f64 {
    orient3d(c3(a), c3(b), c3(c), c3(d))
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Exact test for two closed triangles.
pub fn triangles_intersect(t: [Vec3; 3], u: [Vec3; 3]) -> bool {
    let su = u.map(|p| sign(o3(t[0], t[1], t[2], p)));
    if su.iter().all(|&s| s == 1) || su.iter().all(|&s| s == -1) {
        return false;
    }
    let st = t.map(|p| sign(o3(u[0], u[1], u[2], p)));
    if st.iter().all(|&s| s == 1) || st.iter().all(|&s| s == -1) {
        return false;
    }
    if su.iter().all(|&s| s == 0) {
        return coplanar_intersect(t, u);
    }
    // The intersection is a segment on the planes' common line; each of its
    // endpoints lies on an edge of one triangle.
    (0..3).any(|k| segment_hits_triangle(t[k], t[(k + 1) % 3], u))
        || (0..3).any(|k| segment_hits_triangle(u[k], u[(k + 1) % 3], t))
}

fn segment_hits_triangle(a: Vec3, b: Vec3, t: [Vec3; 3]) -> bool {
    let (sa, sb) = (sign(o3(t[0], t[1], t[2], a)), sign(o3(t[0], t[1], t[2], b)));
    if sa == sb && sa != 0 {
        return false;
    }
    if sa == 0 && sb == 0 {
        return coplanar_segment_triangle(a, b, t);
    }
    let s = [0, 1, 2].map(|k| sign(o3(a, b, t[k], t[(k + 1) % 3])));
    !(s.contains(&1) && s.contains(&-1))
}

/// Drops the coordinate along which the plane normal is largest.
fn projector(t: &[Vec3; 3]) -> impl Fn(Vec3) -> Coord<f64> {
    let n = cross(sub(t[1], t[0]), sub(t[2], t[0]));
    let drop = (0..3).max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs())).unwrap();
    let (i, j) = ((drop + 1) % 3, (drop + 2) % 3);
    move |p: Vec3| Coord { x: p[i], y: p[j] }
}

fn coplanar_intersect(t: [Vec3; 3], u: [Vec3; 3]) -> bool {
    let proj = projector(&t);
    let (t2, u2) = (t.map(&proj), u.map(&proj));
    (0..3).any(|i| (0..3).any(|j| segments_2d(t2[i], t2[(i + 1) % 3], u2[j], u2[(j + 1) % 3])))
        || point_in_triangle_2d(t2[0], u2)
        || point_in_triangle_2d(u2[0], t2)
}

fn coplanar_segment_triangle(a: Vec3, b: Vec3, t: [Vec3; 3]) -> bool {
    let proj = projector(&t);
    let (a2, b2, t2) = (proj(a), proj(b), t.map(&proj));
    (0..3).any(|k| segments_2d(a2, b2, t2[k], t2[(k + 1) % 3])) || point_in_triangle_2d(a2, t2)
}

fn point_in_triangle_2d(p: Coord<f64>, t: [Coord<f64>; 3]) -> bool {
    let s = [0, 1, 2].map(|k| sign(orient2d(t[k], t[(k + 1) % 3], p)));
    !(s.contains(&1) && s.contains(&-1))
}

fn segments_2d(a: Coord<f64>, b: Coord<f64>, c: Coord<f64>, d: Coord<f64>) -> bool {
    let (d1, d2) = (sign(orient2d(a, b, c)), sign(orient2d(a, b, d)));
    let (d3, d4) = (sign(orient2d(c, d, a)), sign(orient2d(c, d, b)));
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    let on = |p: Coord<f64>, q: Coord<f64>, r: Coord<f64>| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    (d1 == 0 && on(a, b, c))
        || (d2 == 0 && on(a, b, d))
        || (d3 == 0 && on(c, d, a))
        || (d4 == 0 && on(c, d, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mesh::marching_cubes;
    use crate::ScalarGrid;

    fn stella(lo: f64, hi: f64) -> SurfaceMesh {
        let p = |b: [u8; 3]| b.map(|x| if x == 1 { hi } else { lo });
        let tet = |v: [Vec3; 4]| {
            SurfaceMesh::new(v.to_vec(), vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]).unwrap()
        };
        let a = tet([p([0, 0, 0]), p([1, 1, 0]), p([1, 0, 1]), p([0, 1, 1])]);
        let b = tet([p([1, 1, 1]), p([0, 0, 1]), p([0, 1, 0]), p([1, 0, 0])]);
        a.merged(&b)
    }

    // Plain floating-point Möller–Trumbore edge/triangle oracle.
    fn edge_hits(a: Vec3, b: Vec3, t: [Vec3; 3]) -> bool {
        let d = sub(b, a);
        let (e1, e2) = (sub(t[1], t[0]), sub(t[2], t[0]));
        let p = cross(d, e2);
        let det = e1[0] * p[0] + e1[1] * p[1] + e1[2] * p[2];
        if det.abs() < 1e-15 {
            return false;
        }
        let s = sub(a, t[0]);
        let u = (s[0] * p[0] + s[1] * p[1] + s[2] * p[2]) / det;
        let q = cross(s, e1);
        let v = (d[0] * q[0] + d[1] * q[1] + d[2] * q[2]) / det;
        let w = (e2[0] * q[0] + e2[1] * q[1] + e2[2] * q[2]) / det;
        u >= 0.0 && v >= 0.0 && u + v <= 1.0 && (0.0..=1.0).contains(&w)
    }

    fn brute_force(mesh: &SurfaceMesh) -> f64 {
        let n = mesh.face_count();
        let tris = mesh.triangles();
        let mut hit = vec![false; n];
        for f in 0..n {
            for g in 0..n {
                if f == g || tris[f].iter().any(|i| tris[g].contains(i)) {
                    continue;
                }
                let (t, u) = (mesh.corners(f), mesh.corners(g));
                let x = (0..3).any(|k| edge_hits(t[k], t[(k + 1) % 3], u))
                    || (0..3).any(|k| edge_hits(u[k], u[(k + 1) % 3], t));
                if x {
                    hit[f] = true;
                    hit[g] = true;
                }
            }
        }
        hit.iter().filter(|&&h| h).count() as f64 / n as f64
    }

    #[test]
    fn interpenetrating_tetrahedra() {
        assert_eq!(self_intersection_ratio(&stella(0.2, 0.8)), 1.0);
    }

    #[test]
    fn clean_meshes_have_none() {
        assert_eq!(self_intersection_ratio(&fixtures::icosphere(3, [0.5; 3], 0.3)), 0.0);
        let g = ScalarGrid::from_fn(3, 32, |p| fixtures::torus_sdf(p, [0.5; 3], 0.25, 0.1)).unwrap();
        let m = marching_cubes(&g, 0.0).unwrap();
        assert_eq!(self_intersection_ratio(&m), 0.0);
    }

    #[test]
    fn reflected_vertex_matches_brute_force() {
        let s = fixtures::icosphere(2, [0.5; 3], 0.3);
        let mut v = s.vertices().to_vec();
        v[7] = v[7].map(|x| 1.0 - x);
        let m = s.with_vertices(v).unwrap();
        let r = self_intersection_ratio(&m);
        assert!(r > 0.0);
        assert!((r - brute_force(&m)).abs() < 1e-12, "{r} vs {}", brute_force(&m));
    }

    #[test]
    fn touching_and_coplanar_cases() {
        let t = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        // coplanar overlap
        let u = [[0.2, 0.2, 0.0], [2.0, 0.2, 0.0], [0.2, 2.0, 0.0]];
        assert!(triangles_intersect(t, u));
        // coplanar disjoint
        let w = [[2.0, 2.0, 0.0], [3.0, 2.0, 0.0], [2.0, 3.0, 0.0]];
        assert!(!triangles_intersect(t, w));
        // vertex touching the interior
        let x = [[0.2, 0.2, 0.0], [0.2, 0.2, 1.0], [0.5, 0.6, 1.0]];
        assert!(triangles_intersect(t, x));
        // parallel planes
        let y = t.map(|p| [p[0], p[1], 0.1]);
        assert!(!triangles_intersect(t, y));
    }
}
