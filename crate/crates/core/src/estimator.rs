//! The p-norm block perimeter estimator.
//!
//! The raster is cut into `m × m` blocks anchored at multiples of `m`. In
//! each block the estimator counts sign changes between vertically
//! adjacent pixels (`n_h`, i.e. horizontal pixel edges) and between
//! horizontally adjacent pixels (`n_v`, vertical pixel edges), and adds
//! `ε · ‖(n_h, n_v)‖_p`. A neighbour pair belongs to the block holding its
//! lower-left pixel, which reproduces the `(a + m - 1) ∧ (M - 1)` and
//! `(a + m - 1) ∧ (M - 2)` summation caps exactly.
//!
//! With `p = 1` the estimate is the plain edge count times `ε` and does not
//! depend on `m`. With `p = 2` each block contributes the length of one
//! straight segment, which removes the orientation bias of the edge count.
//! Orders `p > 2` are accepted but are biased for some orientations.

use crate::error::{Error, Result};
use crate::grid::BinaryField;
use crate::topology::{self, Topology};

/// Sign-change counts inside one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockCounts {
    /// Column index of the block origin.
    pub a: usize,
    /// Row index of the block origin.
    pub b: usize,
    /// Changes between `(i, j)` and `(i, j + 1)`.
    pub n_h: u64,
    /// Changes between `(i, j)` and `(i + 1, j)`.
    pub n_v: u64,
}

impl BlockCounts {
    pub fn is_empty(&self) -> bool {
        self.n_h == 0 && self.n_v == 0
    }

    /// `‖(n_h, n_v)‖_p`, with the integer powers formed exactly before the
    /// single floating-point root whenever they fit in `u128`.
    pub fn norm(&self, p: u32) -> f64 {
        block_norm(self.n_h, self.n_v, p)
    }
}

fn block_norm(n_h: u64, n_v: u64, p: u32) -> f64 {
    match p {
        1 => (n_h + n_v) as f64,
        2 => ((n_h * n_h + n_v * n_v) as f64).sqrt(),
        _ => {
            let exact =
                (n_h as u128).checked_pow(p).zip((n_v as u128).checked_pow(p)).and_then(|(x, y)| x.checked_add(y));
            match exact {
                Some(sum) => (sum as f64).powf(1.0 / p as f64),
                None => {
                    let (hi, lo) = if n_h >= n_v { (n_h, n_v) } else { (n_v, n_h) };
                    let ratio = lo as f64 / hi as f64;
                    hi as f64 * (1.0 + ratio.powi(p as i32)).powf(1.0 / p as f64)
                }
            }
        }
    }
}

/// One perimeter estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerimeterEstimate {
    pub value: f64,
    pub p: u32,
    pub m: usize,
    /// Level of the excursion set, when the raster records it.
    pub level: Option<f64>,
}

/// Per-block sign-change counts, blocks in row-major order (`b` outer).
pub fn block_counts(bin: &BinaryField, m: usize) -> Result<Vec<BlockCounts>> {
    if m < 1 {
        return Err(Error::invalid("block size m must be at least 1"));
    }
    let size = bin.spec().size();
    let per_side = size.div_ceil(m);
    let mut n_h = vec![0u64; per_side * per_side];
    let mut n_v = vec![0u64; per_side * per_side];
    let values = bin.values();

    for j in 0..size {
        let row = &values[j * size..(j + 1) * size];
        let block_row = (j / m) * per_side;
        for i in 0..size {
            let here = row[i];
            let block = block_row + i / m;
            if j + 1 < size && here != values[(j + 1) * size + i] {
                n_h[block] += 1;
            }
            if i + 1 < size && here != row[i + 1] {
                n_v[block] += 1;
            }
        }
    }

    Ok((0..per_side * per_side)
        .map(|k| BlockCounts { a: (k % per_side) * m, b: (k / per_side) * m, n_h: n_h[k], n_v: n_v[k] })
        .collect())
}

/// `ε · Σ_blocks ‖(n_h, n_v)‖_p`.
pub fn perimeter_hat(bin: &BinaryField, m: usize, p: u32) -> Result<PerimeterEstimate> {
    if p < 1 {
        return Err(Error::invalid("norm order p must be at least 1"));
    }
    let counts = block_counts(bin, m)?;
    let total: f64 = if p == 1 {
        counts.iter().map(|c| c.n_h + c.n_v).sum::<u64>() as f64
    } else {
        counts.iter().map(|c| c.norm(p)).sum()
    };
    Ok(PerimeterEstimate { value: bin.spec().epsilon() * total, p, m, level: bin.level() })
}

/// `(π/4)·P̂⁽¹⁾`, the edge count corrected for its isotropic bias.
pub fn perimeter_p1_corrected(bin: &BinaryField) -> f64 {
    std::f64::consts::FRAC_PI_4 * edge_count(bin) as f64 * bin.spec().epsilon()
}

/// Total number of 4-neighbour sign changes.
pub fn edge_count(bin: &BinaryField) -> u64 {
    let size = bin.spec().size();
    let values = bin.values();
    let mut count = 0u64;
    for j in 0..size {
        let row = &values[j * size..(j + 1) * size];
        count += row.windows(2).filter(|w| w[0] != w[1]).count() as u64;
        if j + 1 < size {
            let up = &values[(j + 1) * size..(j + 2) * size];
            count += row.iter().zip(up).filter(|(a, b)| a != b).count() as u64;
        }
    }
    count
}

/// `⌊C ε^(-2/3)⌋` with `C = (1/3)·(area / features)^(1/3)`, clamped to
/// `[1, size - 1]`.
pub fn block_size_rule(area: f64, epsilon: f64, features: usize, size: usize) -> usize {
    let features = features.max(1) as f64;
    let c = (area / features).cbrt() / 3.0;
    let raw = (c * epsilon.powf(-2.0 / 3.0)).floor();
    let upper = size.saturating_sub(1).max(1);
    if raw.is_nan() || raw < 1.0 {
        1
    } else {
        (raw as usize).min(upper)
    }
}

/// Adaptive block size with its topological ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSizeChoice {
    pub m: usize,
    pub topology: Topology,
    pub constant: f64,
}

/// Chooses `m` from the raster's component and hole counts.
pub fn select_m_detailed(bin: &BinaryField) -> Result<BlockSizeChoice> {
    if !bin.has_boundary() {
        return Err(Error::NoExcursionBoundary);
    }
    let spec = bin.spec();
    let topo = topology::topology(bin);
    let features = topo.components + topo.holes;
    let m = block_size_rule(spec.area(), spec.epsilon(), features, spec.size());
    let constant = (spec.area() / features.max(1) as f64).cbrt() / 3.0;
    Ok(BlockSizeChoice { m, topology: topo, constant })
}

pub fn select_m(bin: &BinaryField) -> Result<usize> {
    select_m_detailed(bin).map(|c| c.m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use proptest::prelude::*;

    /// A 6x6 raster whose m = 2 block counts are
    /// (a,b) -> (n_h, n_v): (0,0)->(2,0) (0,2)->(1,0) (0,4)->(1,2)
    /// (2,0)->(2,1) (2,2)->(0,2) (2,4)->(0,0) (4,0)->(0,0) (4,2)->(1,0) (4,4)->(1,1).
    pub(crate) fn reference_six() -> BinaryField {
        let spec = GridSpec::new(2.5, 6).unwrap();
        BinaryField::from_rows(spec, &["..####", ".####.", "####..", "####..", "###...", "......"]).unwrap()
    }

    /// Literal transcription of the double sums, used as an oracle.
    fn literal_counts(bin: &BinaryField, a: usize, b: usize, m: usize) -> (u64, u64) {
        let size = bin.spec().size();
        let z = |i: usize, j: usize| bin.get(i, j) as i64;
        let mut n_h = 0;
        for i in a..=(a + m - 1).min(size - 1) {
            for j in b..=(b + m - 1).min(size - 2) {
                n_h += (z(i, j) - z(i, j + 1)).unsigned_abs();
            }
        }
        let mut n_v = 0;
        for i in a..=(a + m - 1).min(size - 2) {
            for j in b..=(b + m - 1).min(size - 1) {
                n_v += (z(i, j) - z(i + 1, j)).unsigned_abs();
            }
        }
        (n_h, n_v)
    }

    fn random_raster(size: usize, seed: u64, density: u64) -> BinaryField {
        let spec = GridSpec::new(1.0, size).unwrap();
        let mut state = seed | 1;
        BinaryField::from_fn(spec, |_, _| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state % 100 < density
        })
    }

    #[test]
    fn reference_raster_block_counts() {
        let bin = reference_six();
        let expected = [
            ((0, 0), (2, 0)),
            ((0, 2), (1, 0)),
            ((0, 4), (1, 2)),
            ((2, 0), (2, 1)),
            ((2, 2), (0, 2)),
            ((2, 4), (0, 0)),
            ((4, 0), (0, 0)),
            ((4, 2), (1, 0)),
            ((4, 4), (1, 1)),
        ];
        let counts = block_counts(&bin, 2).unwrap();
        assert_eq!(counts.len(), 9);
        for ((a, b), (n_h, n_v)) in expected {
            let c = counts.iter().find(|c| c.a == a && c.b == b).unwrap();
            assert_eq!((c.n_h, c.n_v), (n_h, n_v), "block ({a},{b})");
        }
    }

    #[test]
    fn reference_raster_estimates() {
        let bin = reference_six();
        let eps = bin.spec().epsilon();
        let p1 = perimeter_hat(&bin, 2, 1).unwrap().value;
        let p2 = perimeter_hat(&bin, 2, 2).unwrap().value;
        assert!((p1 / eps - 14.0).abs() < 1e-12);
        let exact = 6.0 + 2.0 * 5f64.sqrt() + 2f64.sqrt();
        assert!((p2 / eps - exact).abs() / exact < 1e-12);
        assert!((p2 / eps - 11.89).abs() < 0.005);
    }

    #[test]
    fn uniform_rasters_have_no_boundary() {
        let spec = GridSpec::new(1.0, 9).unwrap();
        let ones = BinaryField::from_fn(spec, |_, _| true);
        let zeros = BinaryField::from_fn(spec, |_, _| false);
        for m in 1..=9 {
            assert!(block_counts(&ones, m).unwrap().iter().all(BlockCounts::is_empty));
            for p in 1..=4 {
                assert_eq!(perimeter_hat(&zeros, m, p).unwrap().value, 0.0);
            }
        }
        assert!(matches!(select_m(&ones), Err(Error::NoExcursionBoundary)));
    }

    #[test]
    fn vertical_half_plane_single_block() {
        let spec = GridSpec::new(1.0, 8).unwrap();
        for k in 1..8 {
            let bin = BinaryField::from_fn(spec, |i, _| i >= k);
            let counts = block_counts(&bin, 8).unwrap();
            assert_eq!(counts.len(), 1);
            assert_eq!((counts[0].n_h, counts[0].n_v), (0, 8));
        }
    }

    #[test]
    fn invalid_parameters() {
        let bin = reference_six();
        assert!(block_counts(&bin, 0).is_err());
        assert!(perimeter_hat(&bin, 2, 0).is_err());
    }

    #[test]
    fn block_size_rule_examples() {
        // C = (1/3)·(400/50)^(1/3) = 2/3 and (511/20)^(2/3) ≈ 8.68.
        assert_eq!(block_size_rule(400.0, 20.0 / 511.0, 50, 512), 5);
        assert_eq!(block_size_rule(400.0, 20.0 / 511.0, 1, 512), 21);
        assert_eq!(block_size_rule(400.0, 20.0 / 511.0, 1, 10), 9);
        assert_eq!(block_size_rule(1e-9, 0.5, 1000, 10), 1);
    }

    #[test]
    fn select_m_uses_topology() {
        let spec = GridSpec::new(10.0, 512).unwrap();
        // a single disk: one component, no holes
        let disk = BinaryField::from_fn(spec, |i, j| {
            let (x, y) = spec.point(i, j);
            x * x + y * y <= 9.0
        });
        let choice = select_m_detailed(&disk).unwrap();
        assert_eq!(choice.topology, Topology { components: 1, holes: 0 });
        assert_eq!(choice.m, block_size_rule(400.0, spec.epsilon(), 1, 512));
    }

    #[test]
    fn axis_aligned_half_planes_are_exact_up_to_one_pixel() {
        let spec = GridSpec::new(1.0, 200).unwrap();
        let eps = spec.epsilon();
        for (bin, name) in [
            (BinaryField::from_fn(spec, |i, _| i >= 77), "vertical"),
            (BinaryField::from_fn(spec, |_, j| j >= 123), "horizontal"),
        ] {
            for m in [1, 3, 7, 16, 64, 199] {
                for p in [1, 2] {
                    let v = perimeter_hat(&bin, m, p).unwrap().value;
                    assert!((v - 2.0).abs() <= eps + 1e-12, "{name} m={m} p={p}: {v}");
                }
            }
        }
    }

    /// Exact pixel enumeration for the half-plane `x + y ≥ 0` on `[-1,1]²`.
    #[test]
    fn diagonal_half_plane() {
        let spec = GridSpec::new(1.0, 512).unwrap();
        let bin = BinaryField::from_fn(spec, |i, j| i + j >= 511);
        // Each step of the staircase contributes one horizontal and one
        // vertical edge: 511 of each.
        assert_eq!(edge_count(&bin), 2 * 511);
        let truth = 2.0 * 2f64.sqrt();
        let p1 = perimeter_hat(&bin, 1, 1).unwrap().value;
        assert!((p1 - 4.0).abs() < 1e-9);
        assert!((p1 / truth - 2f64.sqrt()).abs() < 1e-9);
        let p2 = perimeter_hat(&bin, 64, 2).unwrap().value;
        assert!((p2 - truth).abs() / truth < 0.02, "p2 = {p2}");
    }

    #[test]
    fn block_counts_match_literal_sums() {
        for (size, m) in [(6, 2), (7, 3), (10, 4), (11, 11), (9, 1), (13, 5)] {
            let bin = random_raster(size, size as u64 * 31 + m as u64, 45);
            for c in block_counts(&bin, m).unwrap() {
                assert_eq!((c.n_h, c.n_v), literal_counts(&bin, c.a, c.b, m), "size={size} m={m}");
            }
        }
    }

    #[test]
    fn high_order_norms_fall_back_without_overflow() {
        let exact = block_norm(3, 4, 2);
        assert!((exact - 5.0).abs() < 1e-12);
        let big = block_norm(1_000_000, 1_000_000, 9);
        assert!((big - 1e6 * 2f64.powf(1.0 / 9.0)).abs() / 1e6 < 1e-12);
    }

    proptest! {
        #[test]
        fn two_norm_never_exceeds_one_norm(seed in any::<u64>(), size in 2usize..40,
                                          m in 1usize..20, density in 5u64..95) {
            let bin = random_raster(size, seed, density);
            let p1 = perimeter_hat(&bin, m, 1).unwrap().value;
            let p2 = perimeter_hat(&bin, m, 2).unwrap().value;
            prop_assert!(p2 <= p1 + 1e-12);
        }

        #[test]
        fn one_norm_does_not_depend_on_m(seed in any::<u64>(), size in 2usize..30, density in 5u64..95) {
            let bin = random_raster(size, seed, density);
            let reference = perimeter_hat(&bin, 1, 1).unwrap().value;
            for m in 1..=size {
                prop_assert_eq!(perimeter_hat(&bin, m, 1).unwrap().value, reference);
            }
        }

        #[test]
        fn transpose_swaps_counts(seed in any::<u64>(), size in 2usize..30,
                                  m in 1usize..12, density in 5u64..95) {
            let bin = random_raster(size, seed, density);
            let t = bin.transpose();
            let a = block_counts(&bin, m).unwrap();
            let b = block_counts(&t, m).unwrap();
            for c in &a {
                let d = b.iter().find(|d| d.a == c.b && d.b == c.a).unwrap();
                prop_assert_eq!((c.n_h, c.n_v), (d.n_v, d.n_h));
            }
            for p in [1, 2, 3] {
                let x = perimeter_hat(&bin, m, p).unwrap().value;
                let y = perimeter_hat(&t, m, p).unwrap().value;
                prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
            }
        }
    }
}
