use std::collections::HashMap;

use super::contour::{Contour, Vec2};
use crate::error::Result;
use crate::field::ScalarGrid;

/// Grid values this close to the iso level put the vertex on the grid point.
pub(crate) const SNAP_TOL: f64 = 1e-10;

// Square corners counter-clockwise: (0,0), (1,0), (1,1), (0,1) in (axis 0, axis 1).
const CORNERS: [[usize; 2]; 4] = [[0, 0], [1, 0], [1, 1], [0, 1]];

/// Iso-line of a 2D grid as closed loops through the cell centers.
///
/// Loops run counter-clockwise around the region where the grid exceeds
/// `iso`. Saddle cells connect the positive corners when the mean of the four
/// corner values is above `iso`. A level outside the grid range yields an
/// empty contour.
pub fn marching_squares(grid: &ScalarGrid, iso: f64) -> Result<Contour> {
    grid.expect_dim(2)?;
    let res = grid.res();
    let values = grid.values();
    let at = |i: usize, j: usize| values[i * res + j];

    // segment start edge -> end edge; edges keyed by lower point * 2 + axis
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut order: Vec<usize> = Vec::new();
    for i in 0..res.saturating_sub(1) {
        for j in 0..res - 1 {
            let v: [f64; 4] = CORNERS.map(|c| at(i + c[0], j + c[1]) - iso);
            let pos = v.map(|x| x > 0.0);
            if pos.iter().all(|&p| p) || pos.iter().all(|&p| !p) {
                continue;
            }
            let edge_key = |k: usize| {
                let (a, b) = (CORNERS[k], CORNERS[(k + 1) % 4]);
                let axis = if a[0] != b[0] { 0 } else { 1 };
                let lo = [a[0].min(b[0]), a[1].min(b[1])];
                ((i + lo[0]) * res + (j + lo[1])) * 2 + axis
            };
            let mut exits = Vec::with_capacity(2);
            let mut entries = Vec::with_capacity(2);
            for k in 0..4 {
                match (pos[k], pos[(k + 1) % 4]) {
                    (true, false) => exits.push(k),
                    (false, true) => entries.push(k),
                    _ => {}
                }
            }
            let connected = exits.len() == 2 && v.iter().sum::<f64>() > 0.0;
            for &e in &exits {
                let entry = pick_entry(e, &entries, connected);
                let (s, t) = (edge_key(e), edge_key(entry));
                if next.insert(s, t).is_none() {
                    order.push(s);
                }
            }
        }
    }

    let position = |key: usize| -> Vec2 {
        let (p, axis) = (key / 2, key % 2);
        let (i, j) = (p / res, p % res);
        let (ai, aj) = (i, j);
        let (bi, bj) = if axis == 0 { (i + 1, j) } else { (i, j + 1) };
        let (va, vb) = (at(ai, aj) - iso, at(bi, bj) - iso);
        let t = if vb.abs() <= SNAP_TOL {
            1.0
        } else if va.abs() <= SNAP_TOL {
            0.0
        } else {
            va / (va - vb)
        };
        let h = 1.0 / res as f64;
        let ca = [(ai as f64 + 0.5) * h, (aj as f64 + 0.5) * h];
        let cb = [(bi as f64 + 0.5) * h, (bj as f64 + 0.5) * h];
        [ca[0] + t * (cb[0] - ca[0]), ca[1] + t * (cb[1] - ca[1])]
    };

    let loops = chain(&next, &order)
        .into_iter()
        .map(|keys| keys.into_iter().map(position).collect::<Vec<_>>())
        .filter_map(|lp| dedup_loop(lp))
        .collect();
    Contour::new(loops)
}

/// Separated positive corners pair an exit with the previous entry in cyclic
/// order, connected ones with the next entry.
fn pick_entry(exit: usize, entries: &[usize], connected: bool) -> usize {
    let dist = |from: usize, to: usize| (to + 4 - from) % 4;
    if connected {
        *entries.iter().min_by_key(|&&e| dist(exit, e)).unwrap()
    } else {
        *entries.iter().min_by_key(|&&e| dist(e, exit)).unwrap()
    }
}

/// Follows `next` links into loops, visiting starts in insertion order.
/// Chains that run off the grid are closed as they are.
pub(crate) fn chain(next: &HashMap<usize, usize>, order: &[usize]) -> Vec<Vec<usize>> {
    let mut has_pred: HashMap<usize, bool> = HashMap::with_capacity(next.len());
    for &t in next.values() {
        has_pred.insert(t, true);
    }
    let mut visited: HashMap<usize, bool> = HashMap::with_capacity(next.len());
    let mut loops = Vec::new();
    // open chains first so they start at their free end
    let starts = order
        .iter()
        .filter(|s| !has_pred.contains_key(s))
        .chain(order.iter());
    for &s in starts {
        if visited.contains_key(&s) {
            continue;
        }
        let mut lp = vec![s];
        visited.insert(s, true);
        let mut cur = s;
        while let Some(&n) = next.get(&cur) {
            if visited.contains_key(&n) {
                break;
            }
            visited.insert(n, true);
            lp.push(n);
            cur = n;
        }
        loops.push(lp);
    }
    loops
}

fn dedup_loop(lp: Vec<Vec2>) -> Option<Vec<Vec2>> {
    let mut out: Vec<Vec2> = Vec::with_capacity(lp.len());
    for v in lp {
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    (out.len() >= 3).then_some(out)
}
