//! Reference contour length from real-valued samples.
//!
//! Marching squares with linear interpolation along cell edges. Saddle cells
//! (two diagonally opposite corners above the level) are split according to
//! the sign of the cell-centre average. Corners that equal the level exactly
//! are nudged upward by `1e-12 · (1 + |u|)`.

use rayon::prelude::*;

use crate::grid::ScalarField;

/// Length of the level-`u` contour of the bilinear-edge interpolant.
pub fn marching_squares_length(field: &ScalarField, u: f64) -> f64 {
    let spec = field.spec();
    let m = spec.size();
    if m < 2 {
        return 0.0;
    }
    let nudge = 1e-12 * (1.0 + u.abs());
    let shifted = |i: usize, j: usize| {
        let v = field.get(i, j) - u;
        if v == 0.0 {
            nudge
        } else {
            v
        }
    };
    let rows: Vec<f64> = (0..m - 1)
        .into_par_iter()
        .map(|j| {
            (0..m - 1)
                .map(|i| cell_length([shifted(i, j), shifted(i + 1, j), shifted(i + 1, j + 1), shifted(i, j + 1)]))
                .sum()
        })
        .collect();
    rows.iter().sum::<f64>() * spec.epsilon()
}

/// Corner positions in the unit cell, counter-clockwise from the lower left.
const CORNERS: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];

/// Contour length inside one unit cell; `f` holds the shifted corner values
/// counter-clockwise from the lower left. Edge `k` joins corners `k` and `k+1`.
fn cell_length(f: [f64; 4]) -> f64 {
    let above = f.map(|v| v > 0.0);
    let count = above.iter().filter(|&&a| a).count();
    if count == 0 || count == 4 {
        return 0.0;
    }
    let crossing = |k: usize| {
        let (a, b) = (k, (k + 1) % 4);
        let t = f[a] / (f[a] - f[b]);
        let (xa, ya) = CORNERS[a];
        let (xb, yb) = CORNERS[b];
        (xa + t * (xb - xa), ya + t * (yb - ya))
    };
    let dist = |p: (f64, f64), q: (f64, f64)| (p.0 - q.0).hypot(p.1 - q.1);

    let saddle = count == 2 && above[0] == above[2];
    if saddle {
        let centre = f.iter().sum::<f64>() / 4.0;
        // isolate the corners whose side does not hold the centre
        let isolate = centre <= 0.0;
        return (0..4).filter(|&k| above[k] == isolate).map(|k| dist(crossing((k + 3) % 4), crossing(k))).sum();
    }
    let mut points = (0..4).filter(|&k| above[k] != above[(k + 1) % 4]).map(crossing);
    let p = points.next().expect("two crossed edges");
    let q = points.next().expect("two crossed edges");
    dist(p, q)
}
