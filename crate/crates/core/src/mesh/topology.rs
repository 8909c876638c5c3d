use std::collections::{HashMap, HashSet};

use super::surface::SurfaceMesh;
use crate::error::{Error, Result};
use crate::field::ScalarGrid;

/// `V − E + F` over the vertices referenced by at least one triangle.
pub fn euler_characteristic(mesh: &SurfaceMesh) -> i64 {
    let mut used = HashSet::new();
    let mut edges = HashSet::new();
    for t in mesh.triangles() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            used.insert(a);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    used.len() as i64 - edges.len() as i64 + mesh.face_count() as i64
}

/// Every edge is shared by exactly two triangles that traverse it in opposite
/// directions.
pub fn is_watertight(mesh: &SurfaceMesh) -> bool {
    let mut directed: HashMap<(usize, usize), u32> = HashMap::new();
    for t in mesh.triangles() {
        for k in 0..3 {
            *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
        }
    }
    !mesh.is_empty()
        && directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
}

/// Component label per triangle (triangles sharing a vertex are connected),
/// numbered in order of first appearance, plus the component count.
pub fn face_components(mesh: &SurfaceMesh) -> (Vec<usize>, usize) {
    let mut uf = UnionFind::new(mesh.vertex_count());
    for t in mesh.triangles() {
        uf.union(t[0], t[1]);
        uf.union(t[1], t[2]);
    }
    let mut ids = HashMap::new();
    let labels = mesh
        .triangles()
        .iter()
        .map(|t| {
            let root = uf.find(t[0]);
            let n = ids.len();
            *ids.entry(root).or_insert(n)
        })
        .collect();
    (labels, ids.len())
}

/// `(2 − χ) / 2` for a closed, connected, consistently oriented mesh.
pub fn genus(mesh: &SurfaceMesh) -> Result<i64> {
    if !is_watertight(mesh) {
        return Err(Error::OpenSurface);
    }
    let (_, n) = face_components(mesh);
    if n != 1 {
        return Err(Error::Disconnected(n));
    }
    Ok((2 - euler_characteristic(mesh)) / 2)
}

/// Keeps the connected component with the most elements.
pub trait LargestComponent: Sized {
    fn largest_component(&self) -> Self;
}

impl LargestComponent for SurfaceMesh {
    /// Component with the most faces; ties go to the one appearing first.
    fn largest_component(&self) -> Self {
        let (labels, n) = face_components(self);
        if n <= 1 {
            return self.clone();
        }
        let mut counts = vec![0usize; n];
        for &l in &labels {
            counts[l] += 1;
        }
        let best = (0..n).max_by_key(|&l| (counts[l], std::cmp::Reverse(l))).unwrap();
        let triangles = self
            .triangles()
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == best)
            .map(|(t, _)| *t)
            .collect();
        let mut mesh = SurfaceMesh::new(self.vertices().to_vec(), triangles)
            .expect("subset of a valid mesh");
        if let Some(n) = self.normals() {
            mesh = mesh.with_normals(n.to_vec()).expect("same vertex count");
        }
        mesh.compacted()
    }
}

impl LargestComponent for ScalarGrid {
    /// Largest 6-connected (4-connected in 2D) set of cells with value > 0,
    /// returned as a 0/1 mask.
    fn largest_component(&self) -> Self {
        let (labels, sizes) = mask_components(self);
        let mut out = vec![0.0; self.len()];
        if let Some(best) = (0..sizes.len()).max_by_key(|&l| (sizes[l], std::cmp::Reverse(l))) {
            for (o, &l) in out.iter_mut().zip(&labels) {
                if l == best + 1 {
                    *o = 1.0;
                }
            }
        }
        ScalarGrid::from_raw(self.dim(), self.res(), out)
    }
}

pub fn largest_component<T: LargestComponent>(x: &T) -> T {
    x.largest_component()
}

/// Face-connected labels of the cells with value > 0 (0 = background,
/// components numbered from 1 in scan order) and the size of each component.
pub fn mask_components(mask: &ScalarGrid) -> (Vec<usize>, Vec<usize>) {
    let (dim, res) = (mask.dim(), mask.res());
    let occupied: Vec<bool> = mask.values().iter().map(|&v| v > 0.0).collect();
    let mut labels = vec![0usize; occupied.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..occupied.len() {
        if !occupied[seed] || labels[seed] != 0 {
            continue;
        }
        let label = sizes.len() + 1;
        let mut size = 0;
        labels[seed] = label;
        stack.push(seed);
        while let Some(c) = stack.pop() {
            size += 1;
            for axis in 0..dim {
                let stride = res.pow((dim - 1 - axis) as u32);
                let i = (c / stride) % res;
                let mut visit = |n: usize| {
                    if occupied[n] && labels[n] == 0 {
                        labels[n] = label;
                        stack.push(n);
                    }
                };
                if i > 0 {
                    visit(c - stride);
                }
                if i + 1 < res {
                    visit(c + stride);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn tetra(offset: f64, scale: f64) -> SurfaceMesh {
        let v = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
            .map(|p| p.map(|x| offset + scale * x));
        SurfaceMesh::new(v.to_vec(), vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]).unwrap()
    }

    #[test]
    fn sphere_and_torus_counts() {
        let s = fixtures::icosphere(2, [0.5; 3], 0.3);
        assert_eq!(euler_characteristic(&s), 2);
        assert_eq!(genus(&s).unwrap(), 0);
        let t = fixtures::torus_mesh(24, 12, [0.5; 3], 0.25, 0.1);
        assert_eq!(euler_characteristic(&t), 0);
        assert_eq!(genus(&t).unwrap(), 1);
    }

    #[test]
    fn disjoint_union_is_additive() {
        let a = fixtures::icosphere(1, [0.3; 3], 0.1);
        let b = fixtures::icosphere(1, [0.7; 3], 0.1);
        let m = a.merged(&b);
        assert_eq!(euler_characteristic(&m), 4);
        assert!(matches!(genus(&m), Err(Error::Disconnected(2))));
    }

    #[test]
    fn open_surface_has_no_genus() {
        let t = tetra(0.1, 0.5);
        let open = SurfaceMesh::new(t.vertices().to_vec(), t.triangles()[..3].to_vec()).unwrap();
        assert!(matches!(genus(&open), Err(Error::OpenSurface)));
    }

    #[test]
    fn largest_mesh_component() {
        let s = fixtures::icosphere(2, [0.5; 3], 0.3);
        assert_eq!(largest_component(&s), s);
        let with_tet = s.merged(&tetra(0.9, 0.05));
        let l = largest_component(&with_tet);
        assert_eq!(l.face_count(), s.face_count());
        assert_eq!(l.vertex_count(), s.vertex_count());
    }

    #[test]
    fn largest_mask_component() {
        let mask = ScalarGrid::from_fn(3, 12, |p| {
            let i = p.iter().map(|x| (x * 12.0).floor() as usize).collect::<Vec<_>>();
            let big = i.iter().all(|&c| (1..6).contains(&c));
            let small = i.iter().all(|&c| (8..10).contains(&c));
            if big || small {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let (_, sizes) = mask_components(&mask);
        assert_eq!(sizes, vec![125, 8]);
        let l = largest_component(&mask);
        assert_eq!(l.values().iter().sum::<f64>(), 125.0);
        assert_eq!(l.get(&[3, 3, 3]), 1.0);
        assert_eq!(l.get(&[8, 8, 8]), 0.0);
    }

    #[test]
    fn diagonal_voxels_are_separate() {
        let mut v = vec![0.0; 27];
        v[0] = 1.0;
        v[13] = 1.0;
        let g = ScalarGrid::from_values(3, 3, v).unwrap();
        assert_eq!(mask_components(&g).1, vec![1, 1]);
    }
}
