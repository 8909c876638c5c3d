/// Balanced k-d tree over oriented points.
///
/// Queries return the exact nearest stored point; among equidistant points the
/// one with the smallest index wins, so results match a linear scan.
#[derive(Clone, Debug)]
pub struct NearestIndex<const D: usize> {
    positions: Vec<[f64; D]>,
    normals: Vec<[f64; D]>,
    // permutation of point indices forming an implicit tree over ranges
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl<const D: usize> NearestIndex<D> {
    pub fn new(positions: &[[f64; D]], normals: &[[f64; D]]) -> Self {
        assert_eq!(positions.len(), normals.len());
        let mut order: Vec<usize> = (0..positions.len()).collect();
        let mut axes = vec![0u8; positions.len()];
        build(positions, &mut order, &mut axes, 0);
        Self { positions: positions.to_vec(), normals: normals.to_vec(), order, axes }
    }

    pub fn from_cloud(cloud: &crate::OrientedPointCloud<D>) -> Self {
        Self::new(cloud.positions(), cloud.normals())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64; D] {
        &self.positions[i]
    }

    pub fn normal(&self, i: usize) -> &[f64; D] {
        &self.normals[i]
    }

    /// Index of and squared distance to the nearest stored point.
    pub fn nearest(&self, q: &[f64; D]) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(q, 0, self.order.len(), &mut best);
        Some(best)
    }

    fn search(&self, q: &[f64; D], lo: usize, hi: usize, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let i = self.order[mid];
        let d2 = dist2(q, &self.positions[i]);
        if d2 < best.1 || (d2 == best.1 && i < best.0) {
            *best = (i, d2);
        }
        if hi - lo == 1 {
            return;
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - self.positions[i][axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(q, near.0, near.1, best);
        if diff * diff <= best.1 {
            self.search(q, far.0, far.1, best);
        }
    }
}

fn build<const D: usize>(positions: &[[f64; D]], order: &mut [usize], axes: &mut [u8], _depth: usize) {
    if order.len() <= 1 {
        return;
    }
    // split on the axis of largest spread
    let mut lo = [f64::INFINITY; D];
    let mut hi = [f64::NEG_INFINITY; D];
    for &i in order.iter() {
        for k in 0..D {
            lo[k] = lo[k].min(positions[i][k]);
            hi[k] = hi[k].max(positions[i][k]);
        }
    }
    let axis = (0..D).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(0);
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        positions[a][axis].total_cmp(&positions[b][axis]).then(a.cmp(&b))
    });
    axes[mid] = axis as u8;
    let (left, rest) = order.split_at_mut(mid);
    let (left_axes, rest_axes) = axes.split_at_mut(mid);
    build(positions, left, left_axes, _depth + 1);
    build(positions, &mut rest[1..], &mut rest_axes[1..], _depth + 1);
}

pub(crate) fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    (0..D).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum()
}
