use std::f64::consts::PI;

use excursion_core::estimator::{block_counts, perimeter_hat};
use excursion_core::grid::{BinaryField, GridSpec};
use proptest::prelude::*;

fn disk(spec: GridSpec, cx: f64, cy: f64, r: f64) -> BinaryField {
    BinaryField::from_fn(spec, |i, j| {
        let (x, y) = spec.point(i, j);
        (x - cx).hypot(y - cy) <= r
    })
}

/// Length of `{x cos a + y sin a = c}` inside `[-t, t]²`.
fn chord_in_square(t: f64, a: f64, c: f64) -> f64 {
    let (p, d) = ([c * a.cos(), c * a.sin()], [-a.sin(), a.cos()]);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..2 {
        if d[k].abs() < 1e-15 {
            if p[k].abs() > t {
                return 0.0;
            }
            continue;
        }
        let (s1, s2) = ((-t - p[k]) / d[k], (t - p[k]) / d[k]);
        lo = lo.max(s1.min(s2));
        hi = hi.min(s1.max(s2));
    }
    (hi - lo).max(0.0)
}

fn active_blocks(bin: &BinaryField, m: usize) -> usize {
    block_counts(bin, m).unwrap().iter().filter(|c| c.n_h + c.n_v > 0).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn active_blocks_bounded_for_disks(
        size in 64usize..400,
        r in 0.3f64..1.5,
        cx in -0.8f64..0.8,
        cy in -0.8f64..0.8,
        frac in 0.05f64..0.95,
    ) {
        let spec = GridSpec::new(2.5, size).unwrap();
        let eps = spec.epsilon();
        let m_max = ((r / eps).floor() as usize).clamp(1, size - 1);
        let m = 1 + ((m_max - 1) as f64 * frac) as usize;
        let bin = disk(spec, cx, cy, r);
        let bound = 4.0 * (2.0 * PI * r / (m as f64 * eps) + 1.0);
        let active = active_blocks(&bin, m);
        prop_assert!(active as f64 <= bound, "{active} > {bound} (M={size}, m={m})");
    }

    #[test]
    fn active_blocks_bounded_for_half_planes(
        size in 32usize..400,
        a in 0.0f64..(2.0 * PI),
        c in -2.0f64..2.0,
        m_frac in 0.0f64..1.0,
    ) {
        let spec = GridSpec::new(2.5, size).unwrap();
        let eps = spec.epsilon();
        let m = 1 + ((size - 2) as f64 * m_frac) as usize;
        let bin = BinaryField::from_fn(spec, |i, j| {
            let (x, y) = spec.point(i, j);
            x * a.cos() + y * a.sin() >= c
        });
        let length = chord_in_square(spec.half_width(), a, c);
        let bound = 4.0 * (length / (m as f64 * eps) + 1.0);
        let active = active_blocks(&bin, m);
        prop_assert!(active as f64 <= bound, "{active} > {bound} (M={size}, m={m}, P={length})");
    }
}

#[test]
fn chord_lengths() {
    assert!((chord_in_square(2.5, 0.0, 1.0) - 5.0).abs() < 1e-12);
    assert!((chord_in_square(2.5, PI / 4.0, 0.0) - 5.0 * 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(chord_in_square(2.5, 0.0, 3.0), 0.0);
}

#[test]
fn disk_multigrid_convergence() {
    let mut scaled = Vec::new();
    let mut errors = Vec::new();
    for size in [64usize, 128, 256, 512, 1024, 2048] {
        let spec = GridSpec::new(2.5, size).unwrap();
        let m = spec.epsilon().powf(-2.0 / 3.0).floor() as usize;
        let p2 = perimeter_hat(&disk(spec, 0.0, 0.0, 1.0), m, 2).unwrap().value;
        let err = (p2 - 2.0 * PI).abs();
        errors.push(err);
        scaled.push(err * m as f64);
    }
    // Error times m stays bounded while m grows about fivefold.
    assert!(scaled.iter().all(|&s| s < 1.0), "{scaled:?}");
    assert!(errors[5] < errors[0] / 4.0, "{errors:?}");
    assert!(errors[5] / (2.0 * PI) < 2e-3, "{errors:?}");
}
