//! Analytic shapes used by tests, examples and the `gridgen` command.
//!
//! Implicit functions follow the indicator convention: positive inside,
//! negative outside, zero on the surface, with unit gradient magnitude away
//! from creases.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::Result;
use crate::field::{OrientedPointCloud, ScalarGrid};
use crate::mesh::{Contour, SurfaceMesh, Vec3};

fn dist(p: &[f64], c: &[f64]) -> f64 {
    p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn sphere_sdf(p: &[f64], center: [f64; 3], radius: f64) -> f64 {
    radius - dist(p, &center)
}

pub fn circle_sdf(p: &[f64], center: [f64; 2], radius: f64) -> f64 {
    radius - dist(p, &center)
}

/// Torus around the axis-2 line through `center`.
pub fn torus_sdf(p: &[f64], center: [f64; 3], major: f64, minor: f64) -> f64 {
    let (x, y, z) = (p[0] - center[0], p[1] - center[1], p[2] - center[2]);
    minor - ((x * x + y * y).sqrt() - major).hypot(z)
}

/// Sphere of radius 0.3 with a spherical bite of radius 0.12 taken out on
/// the +axis-0 side.
pub fn dented_sphere_sdf(p: &[f64]) -> f64 {
    let c = [0.5; 3];
    let bite = [0.5 + 0.33, 0.5, 0.5];
    sphere_sdf(p, c, 0.3).min(-sphere_sdf(p, bite, 0.12))
}

/// Sphere with a thin external handle: a torus of tube radius 0.035 standing
/// on the top of the sphere, half buried. Genus 1, with the handle's
/// cross-section under three cells at resolution 32.
pub fn handle_sdf(p: &[f64]) -> f64 {
    let c = [0.5, 0.5, 0.45];
    let r = 0.22;
    let top = [0.5, 0.5, 0.45 + r];
    // torus in the plane spanned by axes 0 and 2
    let (x, y, z) = (p[0] - top[0], p[1] - top[1], p[2] - top[2]);
    let ring = ((x * x + z * z).sqrt() - 0.12).hypot(y);
    sphere_sdf(p, c, r).max(0.035 - ring)
}

/// Sphere of radius 0.3 pierced along axis 2 by a thin tunnel of radius 0.03.
/// Genus 1; the tunnel is about two cells across at resolution 32.
pub fn tunnel_sdf(p: &[f64]) -> f64 {
    let axis = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt();
    sphere_sdf(p, [0.5; 3], 0.3).min(axis - 0.03)
}

/// Samples an implicit function at the cell centers of a `res^dim` grid.
pub fn sdf_grid(dim: usize, res: usize, f: impl Fn(&[f64]) -> f64) -> Result<ScalarGrid> {
    ScalarGrid::from_fn(dim, res, f)
}

/// Named 3D fixtures for the command line.
pub fn named_sdf(name: &str) -> Option<fn(&[f64]) -> f64> {
    Some(match name {
        "sphere" => |p| sphere_sdf(p, [0.5; 3], 0.3),
        "torus" => |p| torus_sdf(p, [0.5; 3], 0.25, 0.1),
        "dented" => dented_sphere_sdf,
        "handle" => handle_sdf,
        "tunnel" => tunnel_sdf,
        _ => return None,
    })
}

pub const FIXTURE_NAMES: [&str; 5] = ["sphere", "torus", "dented", "handle", "tunnel"];

/// Points on a sphere along a Fibonacci spiral, with outward normals.
pub fn fibonacci_sphere(count: usize, center: [f64; 3], radius: f64) -> Result<OrientedPointCloud<3>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let (positions, normals) = (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let n = [rho * phi.cos(), rho * phi.sin(), z];
            (std::array::from_fn(|k| center[k] + radius * n[k]), n)
        })
        .unzip();
    OrientedPointCloud::new(positions, normals)
}

/// Evenly spaced points on a circle with outward normals.
pub fn circle_points(count: usize, center: [f64; 2], radius: f64) -> Result<OrientedPointCloud<2>> {
    let (positions, normals) = (0..count)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / count as f64;
            let n = [a.cos(), a.sin()];
            ([center[0] + radius * n[0], center[1] + radius * n[1]], n)
        })
        .unzip();
    OrientedPointCloud::new(positions, normals)
}

/// Counter-clockwise regular polygon inscribed in a circle.
pub fn circle_contour(count: usize, center: [f64; 2], radius: f64) -> Contour {
    let lp = (0..count)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / count as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect();
    Contour::new(vec![lp]).expect("at least three distinct vertices")
}

/// Subdivided icosahedron projected onto a sphere, outward winding.
pub fn icosphere(subdivisions: usize, center: Vec3, radius: f64) -> SurfaceMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let unit = |v: Vec3| {
        let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        v.map(|x| x / l)
    };
    verts = verts.into_iter().map(unit).collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(unit([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts
        .into_iter()
        .map(|v| std::array::from_fn(|k| center[k] + radius * v[k]))
        .collect();
    SurfaceMesh::new(verts, faces).expect("valid icosphere")
}

/// Parametric torus around the axis-2 line through `center`, outward winding.
pub fn torus_mesh(nu: usize, nv: usize, center: Vec3, major: f64, minor: f64) -> SurfaceMesh {
    let mut verts = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            let rho = major + minor * v.cos();
            verts.push([
                center[0] + rho * u.cos(),
                center[1] + rho * u.sin(),
                center[2] + minor * v.sin(),
            ]);
        }
    }
    let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    SurfaceMesh::new(verts, faces).expect("valid torus")
}

/// Axis-aligned cube surface with outward winding.
pub fn cube_mesh(center: Vec3, half: f64) -> SurfaceMesh {
    let verts = (0..8)
        .map(|c: usize| {
            std::array::from_fn(|k| center[k] + if (c >> k) & 1 == 1 { half } else { -half })
        })
        .collect();
    let faces = vec![
        [0, 4, 6],
        [0, 6, 2],
        [1, 3, 7],
        [1, 7, 5],
        [0, 1, 5],
        [0, 5, 4],
        [2, 6, 7],
        [2, 7, 3],
        [0, 2, 3],
        [0, 3, 1],
        [4, 5, 7],
        [4, 7, 6],
    ];
    SurfaceMesh::new(verts, faces).expect("valid cube")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{euler_characteristic, genus, marching_cubes};

    #[test]
    fn meshes_are_outward() {
        assert!(icosphere(2, [0.5; 3], 0.3).signed_volume() > 0.0);
        assert!(torus_mesh(16, 8, [0.5; 3], 0.25, 0.1).signed_volume() > 0.0);
        let c = cube_mesh([0.5; 3], 0.2);
        assert!((c.signed_volume() - 0.064).abs() < 1e-12);
        assert_eq!(genus(&c).unwrap(), 0);
    }

    #[test]
    fn fibonacci_normals_are_radial() {
        let pc = fibonacci_sphere(100, [0.5; 3], 0.3).unwrap();
        for (p, n) in pc.positions().iter().zip(pc.normals()) {
            for k in 0..3 {
                assert!((p[k] - 0.5 - 0.3 * n[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn defect_fixtures_have_genus_one() {
        for f in [handle_sdf as fn(&[f64]) -> f64, tunnel_sdf] {
            let g = sdf_grid(3, 32, f).unwrap();
            let m = marching_cubes(&g, 0.0).unwrap();
            assert_eq!(euler_characteristic(&m), 0);
            assert_eq!(genus(&m).unwrap(), 1);
        }
        let d = sdf_grid(3, 32, dented_sphere_sdf).unwrap();
        assert_eq!(genus(&marching_cubes(&d, 0.0).unwrap()).unwrap(), 0);
    }
}
