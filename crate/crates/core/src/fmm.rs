//! Fast marching: signed-distance rebuilds and velocity extension.
//!
//! Both solvers share the first-order upwind Godunov update on the
//! regular grid. Heap ordering breaks ties by node index, so results are
//! deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geom::GridDims;

/// Width (in cells) of the frozen seed band around the interface.
pub const SEED_BAND_CELLS: f64 = 3.0;

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    idx: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, idx) through reversed comparison
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn neighbors(dims: &GridDims, idx: usize, two_d: bool) -> [[Option<usize>; 2]; 3] {
    let (i, j, k) = dims.coords(idx);
    let mut out = [[None; 2]; 3];
    if i > 0 {
        out[0][0] = Some(idx - 1);
    }
    if i + 1 < dims.nx {
        out[0][1] = Some(idx + 1);
    }
    if j > 0 {
        out[1][0] = Some(idx - dims.nx);
    }
    if j + 1 < dims.ny {
        out[1][1] = Some(idx + dims.nx);
    }
    if !two_d {
        if k > 0 {
            out[2][0] = Some(idx - dims.nx * dims.ny);
        }
        if k + 1 < dims.nz {
            out[2][1] = Some(idx + dims.nx * dims.ny);
        }
    }
    out
}

/// Godunov update: solve `sum_a max(d - a_min, 0)^2 = h^2` for `d` given
/// the per-axis minimum accepted neighbor values.
fn eikonal_update(axis_vals: &[f64], h: f64) -> f64 {
    let mut a: Vec<f64> = axis_vals.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut d = a[0] + h;
    for m in 2..=a.len() {
        if d <= a[m - 1] {
            break;
        }
        let s: f64 = a[..m].iter().sum();
        let s2: f64 = a[..m].iter().map(|v| v * v).sum();
        let mf = m as f64;
        let disc = s * s - mf * (s2 - h * h);
        if disc >= 0.0 {
            let cand = (s + disc.sqrt()) / mf;
            if cand >= a[m - 1] {
                d = cand;
            }
        }
    }
    d
}

/// Central-difference gradient magnitude, one-sided at the boundary.
fn grad_norm(phi: &[f64], dims: &GridDims, h: f64, idx: usize, two_d: bool) -> f64 {
    let nb = neighbors(dims, idx, two_d);
    let mut acc = 0.0;
    let axes = if two_d { 2 } else { 3 };
    for comp in nb.iter().take(axes) {
        let g = match (comp[0], comp[1]) {
            (Some(a), Some(b)) => (phi[b] - phi[a]) / (2.0 * h),
            (Some(a), None) => (phi[idx] - phi[a]) / h,
            (None, Some(b)) => (phi[b] - phi[idx]) / h,
            (None, None) => 0.0,
        };
        acc += g * g;
    }
    acc.sqrt()
}

/// Rebuild the signed distance from the zero contour of `phi`.
///
/// Nodes within [`SEED_BAND_CELLS`] of the contour (by the local estimate
/// `phi / |grad phi|`) are frozen at that estimate; the rest is rebuilt by
/// marching outward. Returns `None` when `phi` has no interior (nothing
/// negative) — callers treat that as a flag, not an error.
pub fn reinitialize(phi: &[f64], dims: &GridDims, h: f64, two_d: bool) -> Option<Vec<f64>> {
    let n = dims.len();
    if !phi.iter().any(|&v| v < 0.0) {
        return None;
    }
    if !phi.iter().any(|&v| v >= 0.0) {
        // no exterior: nothing to rebuild against, keep the field
        return Some(phi.to_vec());
    }

    const FAR: f64 = f64::MAX;
    let mut dist = vec![FAR; n]; // unsigned
    let mut accepted = vec![false; n];
    let mut heap = BinaryHeap::new();

    // Freeze only the ring of nodes with a sign-change neighbor; every
    // other value is rebuilt from it. That makes the result a function of
    // the contour alone, so a second rebuild reproduces the first.
    for idx in 0..n {
        let near_sign_change = neighbors(dims, idx, two_d)
            .iter()
            .flatten()
            .flatten()
            .any(|&nb| phi[nb].signum() != phi[idx].signum());
        if !near_sign_change {
            continue;
        }
        let g = grad_norm(phi, dims, h, idx, two_d);
        // A field that is already unit-gradient is kept verbatim at the
        // ring (exact inputs are fixed points); otherwise normalize by
        // the local slope.
        let est = if (g - 1.0).abs() <= 0.05 {
            phi[idx].abs()
        } else if g > 1e-9 {
            phi[idx].abs() / g
        } else {
            phi[idx].abs()
        };
        dist[idx] = est.min(SEED_BAND_CELLS * h);
        accepted[idx] = true;
    }
    if !accepted.iter().any(|&a| a) {
        return None;
    }

    // narrow-band fronts
    for idx in 0..n {
        if accepted[idx] {
            for nb in neighbors(dims, idx, two_d).iter().flatten().flatten() {
                if !accepted[*nb] {
                    heap.push(HeapEntry { dist: dist[idx], idx: *nb });
                }
            }
        }
    }

    while let Some(HeapEntry { idx, .. }) = heap.pop() {
        if accepted[idx] {
            continue;
        }
        let nb = neighbors(dims, idx, two_d);
        let axes = if two_d { 2 } else { 3 };
        let mut axis_vals = Vec::with_capacity(3);
        for comp in nb.iter().take(axes) {
            let mut best = FAR;
            for cand in comp.iter().flatten() {
                if accepted[*cand] {
                    best = best.min(dist[*cand]);
                }
            }
            if best < FAR {
                axis_vals.push(best);
            }
        }
        if axis_vals.is_empty() {
            continue;
        }
        let d = eikonal_update(&axis_vals, h);
        if d < dist[idx] {
            dist[idx] = d;
        }
        accepted[idx] = true;
        for cand in nb.iter().flatten().flatten() {
            if !accepted[*cand] {
                heap.push(HeapEntry { dist: dist[idx], idx: *cand });
            }
        }
    }

    // any unreached nodes (disconnected pockets) keep a large magnitude
    let out = (0..n)
        .map(|idx| {
            let m =
                if dist[idx] == FAR { (dims.nx + dims.ny + dims.nz) as f64 * h } else { dist[idx] };
            if phi[idx] < 0.0 {
                -m
            } else {
                m
            }
        })
        .collect();
    Some(out)
}

/// Extend band values along interface normals: `grad v . grad phi = 0`
/// solved in ascending `|phi|` order with the upwind weights of the
/// Eikonal update. `phi` must already be a signed distance. Seed cells
/// keep their values exactly.
pub fn extend_velocity(
    phi: &[f64],
    dims: &GridDims,
    h: f64,
    two_d: bool,
    seeds: &[(usize, f64)],
) -> Vec<f64> {
    let n = dims.len();
    let mut v = vec![0.0; n];
    let mut assigned = vec![false; n];
    for &(idx, val) in seeds {
        v[idx] = val;
        assigned[idx] = true;
    }

    let mut order: Vec<usize> = (0..n).filter(|&i| !assigned[i]).collect();
    order.sort_by(|&a, &b| {
        phi[a]
            .abs()
            .partial_cmp(&phi[b].abs())
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.cmp(&b))
    });

    // Two passes: the sorted sweep resolves almost everything; a cleanup
    // pass averages any stragglers from exact-|phi| plateaus.
    for pass in 0..2 {
        for &idx in &order {
            if assigned[idx] {
                continue;
            }
            let u = phi[idx].abs();
            let nb = neighbors(dims, idx, two_d);
            let axes = if two_d { 2 } else { 3 };
            let mut wsum = 0.0;
            let mut acc = 0.0;
            for comp in nb.iter().take(axes) {
                let mut best: Option<usize> = None;
                for cand in comp.iter().flatten() {
                    if assigned[*cand] && phi[*cand].abs() < u {
                        match best {
                            Some(b) if phi[*cand].abs() >= phi[b].abs() => {}
                            _ => best = Some(*cand),
                        }
                    }
                }
                if let Some(b) = best {
                    let w = (u - phi[b].abs()) / h;
                    wsum += w;
                    acc += w * v[b];
                }
            }
            if wsum > 0.0 {
                v[idx] = acc / wsum;
                assigned[idx] = true;
            } else if pass == 1 {
                // plateau cleanup: plain average of assigned neighbors
                let mut cnt = 0.0;
                let mut s = 0.0;
                for cand in nb.iter().flatten().flatten() {
                    if assigned[*cand] {
                        s += v[*cand];
                        cnt += 1.0;
                    }
                }
                if cnt > 0.0 {
                    v[idx] = s / cnt;
                    assigned[idx] = true;
                }
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eikonal_update_single_axis() {
        assert!((eikonal_update(&[1.0], 0.5) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn eikonal_update_two_axes_diagonal() {
        // equal neighbors a on both axes: d = a + h/sqrt(2)
        let d = eikonal_update(&[2.0, 2.0], 1.0);
        assert!((d - (2.0 + 1.0 / 2.0f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn rebuild_is_exact_for_axis_aligned_plane() {
        let dims = GridDims::new(40, 40, 1);
        let h = 0.1;
        let wall = 2.05;
        let phi: Vec<f64> = (0..dims.len())
            .map(|idx| {
                let (i, _, _) = dims.coords(idx);
                (i as f64 + 0.5) * h - wall
            })
            .collect();
        let out = reinitialize(&phi, &dims, h, true).unwrap();
        for idx in 0..dims.len() {
            assert!((out[idx] - phi[idx]).abs() < 1e-9, "node {idx}");
        }
    }

    fn circle_sdf(dims: &GridDims, h: f64, cx: f64, cy: f64, r: f64) -> Vec<f64> {
        (0..dims.len())
            .map(|idx| {
                let (i, j, _) = dims.coords(idx);
                let x = (i as f64 + 0.5) * h - cx;
                let y = (j as f64 + 0.5) * h - cy;
                (x * x + y * y).sqrt() - r
            })
            .collect()
    }

    #[test]
    fn rebuild_keeps_exact_field_near_the_contour() {
        let dims = GridDims::new(50, 50, 1);
        let h = 0.1;
        let sdf = circle_sdf(&dims, h, 2.5, 2.5, 1.0);
        let out = reinitialize(&sdf, &dims, h, true).unwrap();
        for idx in 0..dims.len() {
            let ring = neighbors(&dims, idx, true)
                .iter()
                .flatten()
                .flatten()
                .any(|&nb| sdf[nb].signum() != sdf[idx].signum());
            if ring {
                assert!(
                    (out[idx] - sdf[idx]).abs() < 1e-3 * h,
                    "ring node {idx}: {} vs {}", out[idx], sdf[idx]
                );
            } else if sdf[idx].abs() <= 3.0 * h {
                // band rebuilt by first-order marching from the ring
                assert!(
                    (out[idx] - sdf[idx]).abs() < 0.05 * h * 10.0,
                    "band node {idx}: {} vs {}", out[idx], sdf[idx]
                );
            } else {
                assert!((out[idx] - sdf[idx]).abs() < 2.0 * h, "far node {idx}");
            }
        }
    }

    #[test]
    fn rebuild_is_idempotent_for_smooth_distortions() {
        // the optimizer feeds advected signed-distance fields back in, so
        // idempotence matters for smoothly distorted inputs
        let dims = GridDims::new(50, 50, 1);
        let h = 0.1;
        let mut junk = circle_sdf(&dims, h, 2.5, 2.5, 1.0);
        for idx in 0..dims.len() {
            let (i, j, _) = dims.coords(idx);
            let x = (i as f64 + 0.5) * h;
            let y = (j as f64 + 0.5) * h;
            junk[idx] *= 1.5 + 0.3 * (1.3 * x + 0.7 * y).sin();
        }
        let once = reinitialize(&junk, &dims, h, true).unwrap();
        let twice = reinitialize(&once, &dims, h, true).unwrap();
        let mut worst = 0.0f64;
        for idx in 0..dims.len() {
            worst = worst.max((once[idx] - twice[idx]).abs());
        }
        assert!(worst <= 1e-3 * h, "second rebuild moved values by {worst}");
    }

    #[test]
    fn rebuild_restores_scaled_field() {
        let dims = GridDims::new(50, 50, 1);
        let h = 0.1;
        let sdf = circle_sdf(&dims, h, 2.5, 2.5, 1.0);
        let doubled: Vec<f64> = sdf.iter().map(|v| 2.0 * v).collect();
        let out = reinitialize(&doubled, &dims, h, true).unwrap();
        // the rebuild must recover the unit-gradient field of the same contour
        for idx in 0..dims.len() {
            if sdf[idx].abs() < 3.0 * h {
                assert!(
                    (out[idx] - sdf[idx]).abs() < 0.05 * h * 10.0,
                    "near-contour {idx}: {} vs {}", out[idx], sdf[idx]
                );
            } else {
                assert!((out[idx] - sdf[idx]).abs() < 2.0 * h, "far node {idx}");
            }
        }
    }

    #[test]
    fn rebuild_erases_far_perturbations() {
        let dims = GridDims::new(50, 50, 1);
        let h = 0.1;
        let sdf = circle_sdf(&dims, h, 2.5, 2.5, 1.0);
        let mut bumped = sdf.clone();
        for idx in 0..dims.len() {
            // smooth non-sign-flipping bump far outside the band
            if sdf[idx] > 8.0 * h {
                bumped[idx] += 0.3 * (sdf[idx] - 0.8).sin().abs();
            }
        }
        let out = reinitialize(&bumped, &dims, h, true).unwrap();
        let reference = reinitialize(&sdf, &dims, h, true).unwrap();
        for idx in 0..dims.len() {
            assert!(
                (out[idx] - reference[idx]).abs() < 1e-9,
                "perturbation survived at {idx}"
            );
        }
    }

    #[test]
    fn no_interior_returns_flag() {
        let dims = GridDims::new(10, 10, 1);
        let phi = vec![1.0; dims.len()];
        assert!(reinitialize(&phi, &dims, 0.1, true).is_none());
    }

    #[test]
    fn extension_of_constant_is_constant() {
        let dims = GridDims::new(30, 30, 1);
        let h = 0.1;
        let sdf: Vec<f64> = (0..dims.len())
            .map(|idx| {
                let (i, j, _) = dims.coords(idx);
                let x = (i as f64 + 0.5) * h - 1.5;
                let y = (j as f64 + 0.5) * h - 1.5;
                (x * x + y * y).sqrt() - 0.7
            })
            .collect();
        let seeds: Vec<(usize, f64)> =
            (0..dims.len()).filter(|&i| sdf[i].abs() <= 3.0 * h).map(|i| (i, 4.25)).collect();
        let v = extend_velocity(&sdf, &dims, h, true, &seeds);
        for &val in &v {
            assert!((val - 4.25).abs() < 1e-9, "value {val}");
        }
    }

    #[test]
    fn extension_preserves_antisymmetry_across_flat_interface() {
        // interface along x at y = 1.5; band values odd about the domain
        // midline x = 1.5
        let dims = GridDims::new(30, 30, 1);
        let h = 0.1;
        let sdf: Vec<f64> = (0..dims.len())
            .map(|idx| {
                let (_, j, _) = dims.coords(idx);
                (j as f64 + 0.5) * h - 1.5
            })
            .collect();
        let band_val = |i: usize| ((i as f64 + 0.5) * h - 1.5).sin();
        let seeds: Vec<(usize, f64)> = (0..dims.len())
            .filter(|&idx| sdf[idx].abs() <= 3.0 * h)
            .map(|idx| {
                let (i, _, _) = dims.coords(idx);
                (idx, band_val(i))
            })
            .collect();
        let v = extend_velocity(&sdf, &dims, h, true, &seeds);
        for j in 0..30 {
            for i in 0..15 {
                let a = v[dims.idx(i, j, 0)];
                let b = v[dims.idx(29 - i, j, 0)];
                assert!((a + b).abs() < 1e-9, "antisymmetry at i={i} j={j}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn extension_keeps_seed_values() {
        let dims = GridDims::new(20, 20, 1);
        let h = 0.1;
        let sdf: Vec<f64> = (0..dims.len())
            .map(|idx| {
                let (i, j, _) = dims.coords(idx);
                let x = (i as f64 + 0.5) * h - 1.0;
                let y = (j as f64 + 0.5) * h - 1.0;
                (x * x + y * y).sqrt() - 0.5
            })
            .collect();
        let seeds: Vec<(usize, f64)> = (0..dims.len())
            .filter(|&i| sdf[i].abs() <= 3.0 * h)
            .map(|i| (i, sdf[i].cos()))
            .collect();
        let v = extend_velocity(&sdf, &dims, h, true, &seeds);
        for &(idx, val) in &seeds {
            assert_eq!(v[idx], val);
        }
    }
}
