//! Raster domain model.
//!
//! A [`GridSpec`] ties the continuous window `T = [-t, t]²` to an `M × M`
//! lattice of sampling points `s(i, j) = (-t + i·ε, -t + j·ε)`. Index `i` is
//! the column (increasing rightward) and `j` the row (increasing upward).
//! Rasters store their values row-major: the entry for `(i, j)` lives at
//! `j * M + i`.

use crate::error::{Error, Result};

/// Relative slack used when validating `(M - 1)·ε ≤ 2t`.
const GRID_FIT_TOLERANCE: f64 = 1e-9;

/// Square sampling grid over `[-t, t]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    half_width: f64,
    size: usize,
    pixel_width: f64,
}

impl GridSpec {
    /// Grid with `size` points per side whose four corner points are the
    /// vertices of `[-t, t]²`, i.e. `ε = 2t / (M - 1)`.
    pub fn new(half_width: f64, size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::invalid(format!("grid size must be at least 2, got {size}")));
        }
        Self::with_pixel_width(half_width, size, 2.0 * half_width / (size - 1) as f64)
    }

    /// Grid with an explicit pixel width. Checks `|M·ε - 2t| ≤ ε` and that
    /// every grid point lies in `T`.
    pub fn with_pixel_width(half_width: f64, size: usize, pixel_width: f64) -> Result<Self> {
        if size < 2 {
            return Err(Error::invalid(format!("grid size must be at least 2, got {size}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid(format!("half width must be positive, got {half_width}")));
        }
        if !(pixel_width.is_finite() && pixel_width > 0.0) {
            return Err(Error::invalid(format!("pixel width must be positive, got {pixel_width}")));
        }
        let side = 2.0 * half_width;
        let slack = GRID_FIT_TOLERANCE * side.max(pixel_width);
        if (size as f64 * pixel_width - side).abs() > pixel_width + slack {
            return Err(Error::invalid(format!(
                "|M·ε - 2t| exceeds ε (M = {size}, ε = {pixel_width}, t = {half_width})"
            )));
        }
        if (size - 1) as f64 * pixel_width > side + slack {
            return Err(Error::invalid(format!(
                "grid points overflow the domain (M = {size}, ε = {pixel_width}, t = {half_width})"
            )));
        }
        Ok(Self { half_width, size, pixel_width })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Number of grid points per side, `M`.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Pixel width `ε`.
    pub fn epsilon(&self) -> f64 {
        self.pixel_width
    }

    /// Lebesgue measure of the window, `(2t)²`.
    pub fn area(&self) -> f64 {
        let side = 2.0 * self.half_width;
        side * side
    }

    /// Coordinates of `s(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.coordinate(i), self.coordinate(j))
    }

    /// One coordinate of a grid point, `-t + k·ε`.
    pub fn coordinate(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.pixel_width
    }

    pub fn len(&self) -> usize {
        self.size * self.size
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub(crate) fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.size && j < self.size);
        j * self.size + i
    }
}

/// The 0/1 excursion indicator matrix sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryField {
    spec: GridSpec,
    values: Vec<u8>,
    level: Option<f64>,
}

impl BinaryField {
    /// Builds a raster from row-major storage (`values[j * M + i]`).
    pub fn from_vec(spec: GridSpec, values: Vec<u8>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::invalid(format!(
                "expected {} values for a {}x{} raster, got {}",
                spec.len(),
                spec.size(),
                spec.size(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|&&v| v > 1) {
            return Err(Error::invalid(format!("binary raster entry {bad} is not 0 or 1")));
        }
        Ok(Self { spec, values, level: None })
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let m = spec.size();
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..m {
            for i in 0..m {
                values.push(u8::from(f(i, j)));
            }
        }
        Self { spec, values, level: None }
    }

    /// Builds a raster from text rows listed top row first (`j = M - 1`),
    /// `'1'`/`'#'` for foreground and `'0'`/`'.'` for background.
    pub fn from_rows(spec: GridSpec, rows: &[&str]) -> Result<Self> {
        let m = spec.size();
        if rows.len() != m {
            return Err(Error::invalid(format!("expected {m} rows, got {}", rows.len())));
        }
        let mut values = vec![0u8; spec.len()];
        for (r, row) in rows.iter().enumerate() {
            let j = m - 1 - r;
            let cells: Vec<char> = row.chars().filter(|c| !c.is_whitespace()).collect();
            if cells.len() != m {
                return Err(Error::invalid(format!("row {r} has {} cells, expected {m}", cells.len())));
            }
            for (i, c) in cells.into_iter().enumerate() {
                values[spec.offset(i, j)] = match c {
                    '1' | '#' => 1,
                    '0' | '.' => 0,
                    other => return Err(Error::invalid(format!("unexpected raster character {other:?}"))),
                };
            }
        }
        Ok(Self { spec, values, level: None })
    }

    pub fn with_level(mut self, level: f64) -> Self {
        self.level = Some(level);
        self
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Threshold that produced this raster, if known.
    pub fn level(&self) -> Option<f64> {
        self.level
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.values[self.spec.offset(i, j)]
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().map(|&v| v as usize).sum()
    }

    /// Swaps the roles of `i` and `j`.
    pub fn transpose(&self) -> Self {
        let m = self.spec.size();
        let mut values = vec![0u8; self.values.len()];
        for j in 0..m {
            for i in 0..m {
                values[i * m + j] = self.values[j * m + i];
            }
        }
        Self { spec: self.spec, values, level: self.level }
    }

    /// Quarter turn counter-clockwise: `(i, j) -> (M - 1 - j, i)`.
    pub fn rotate90(&self) -> Self {
        let m = self.spec.size();
        Self::from_fn(self.spec, |i, j| self.get(j, m - 1 - i) == 1)
    }

    /// Whether any pair of 4-neighbours differ.
    pub fn has_boundary(&self) -> bool {
        let m = self.spec.size();
        (0..m).any(|j| {
            let row = &self.values[j * m..(j + 1) * m];
            row.windows(2).any(|w| w[0] != w[1]) || (j + 1 < m && row != &self.values[(j + 1) * m..(j + 2) * m])
        })
    }
}

/// Real-valued field samples `X(s(i, j))` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    /// Builds a field from row-major storage; every entry must be finite.
    pub fn from_vec(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::invalid(format!(
                "expected {} values for a {}x{} field, got {}",
                spec.len(),
                spec.size(),
                spec.size(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("field value at offset {k} is not finite")));
        }
        Ok(Self { spec, values })
    }

    /// Samples `f` at every grid point coordinate.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let m = spec.size();
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..m {
            let y = spec.coordinate(j);
            for i in 0..m {
                values.push(f(spec.coordinate(i), y));
            }
        }
        Self::from_vec(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.offset(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Excursion indicator: `1` where `field ≥ u`.
pub fn threshold(field: &ScalarField, u: f64) -> BinaryField {
    let values = field.values.iter().map(|&x| u8::from(x >= u)).collect();
    BinaryField { spec: field.spec, values, level: Some(u) }
}

/// Block origins `(a, b)` with `a, b ∈ {0, m, 2m, …} ∩ [0, M - 1]`, ordered
/// row-major (`b` outer, `a` inner).
pub fn block_origins(spec: &GridSpec, m: usize) -> Result<Vec<(usize, usize)>> {
    if m < 1 {
        return Err(Error::invalid("block size m must be at least 1"));
    }
    let starts: Vec<usize> = (0..spec.size()).step_by(m).collect();
    Ok(starts.iter().flat_map(|&b| starts.iter().map(move |&a| (a, b))).collect())
}
