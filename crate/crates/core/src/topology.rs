//! Connected components and holes of binary rasters.
//!
//! The foreground is 8-connected and the background 4-connected, so the
//! two adjacency relations are dual and the Euler characteristic
//! `components - holes` matches the cubical complex of the foreground
//! pixels.

use crate::grid::{BinaryField, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Component labels of one phase of a binary raster. Label `0` marks
/// pixels outside the labelled phase; components are numbered `1..=count`
/// in order of first encounter in storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelField {
    spec: GridSpec,
    labels: Vec<u32>,
    count: usize,
}

impl LabelField {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.labels[self.spec.offset(i, j)]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }
}

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new() -> Self {
        Self { parent: Vec::new(), rank: Vec::new() }
    }

    fn make_set(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.rank.push(0);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (hi, lo) = if self.rank[ra as usize] >= self.rank[rb as usize] { (ra, rb) } else { (rb, ra) };
        self.parent[lo as usize] = hi;
        if self.rank[hi as usize] == self.rank[lo as usize] {
            self.rank[hi as usize] += 1;
        }
        hi
    }
}

/// Labels the pixels equal to `phase` with a two-pass union-find scan.
fn label_phase(bin: &BinaryField, phase: u8, connectivity: Connectivity) -> LabelField {
    let spec = *bin.spec();
    let m = spec.size();
    let values = bin.values();
    // provisional labels are union-find ids + 1
    let mut provisional = vec![0u32; values.len()];
    let mut uf = UnionFind::new();

    for j in 0..m {
        for i in 0..m {
            let k = j * m + i;
            if values[k] != phase {
                continue;
            }
            let mut neighbours = [0u32; 4];
            let mut n = 0;
            let mut push = |label: u32| {
                if label != 0 {
                    neighbours[n] = label;
                    n += 1;
                }
            };
            if i > 0 {
                push(provisional[k - 1]);
            }
            if j > 0 {
                push(provisional[k - m]);
                if connectivity == Connectivity::Eight {
                    if i > 0 {
                        push(provisional[k - m - 1]);
                    }
                    if i + 1 < m {
                        push(provisional[k - m + 1]);
                    }
                }
            }
            provisional[k] = if n == 0 {
                uf.make_set() + 1
            } else {
                let first = neighbours[0] - 1;
                for &other in &neighbours[1..n] {
                    uf.union(first, other - 1);
                }
                first + 1
            };
        }
    }

    let mut relabel = vec![0u32; uf.parent.len()];
    let mut count = 0u32;
    let labels = provisional
        .iter()
        .map(|&p| {
            if p == 0 {
                return 0;
            }
            let root = uf.find(p - 1) as usize;
            if relabel[root] == 0 {
                count += 1;
                relabel[root] = count;
            }
            relabel[root]
        })
        .collect();
    LabelField { spec, labels, count: count as usize }
}

/// Connected components of the foreground (`1` pixels).
pub fn label_components(bin: &BinaryField, connectivity: Connectivity) -> LabelField {
    label_phase(bin, 1, connectivity)
}

/// Number of 4-connected background components that do not touch the
/// raster border.
pub fn count_holes(bin: &BinaryField) -> usize {
    let background = label_phase(bin, 0, Connectivity::Four);
    let m = bin.spec().size();
    let mut touches = vec![false; background.count + 1];
    for k in 0..m {
        for (i, j) in [(k, 0), (k, m - 1), (0, k), (m - 1, k)] {
            touches[background.get(i, j) as usize] = true;
        }
    }
    touches[1..].iter().filter(|&&t| !t).count()
}

/// Component and hole counts under the (8, 4) convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Topology {
    pub components: usize,
    pub holes: usize,
}

impl Topology {
    pub fn euler(&self) -> i64 {
        self.components as i64 - self.holes as i64
    }
}

pub fn topology(bin: &BinaryField) -> Topology {
    Topology { components: label_components(bin, Connectivity::Eight).count(), holes: count_holes(bin) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::collections::{BTreeSet, HashMap, VecDeque};

    fn spec(m: usize) -> GridSpec {
        GridSpec::new(1.0, m).unwrap()
    }

    /// Breadth-first flood fill; independent of the union-find path.
    fn flood_count(bin: &BinaryField, phase: u8, conn: Connectivity) -> (usize, usize) {
        let m = bin.spec().size();
        let mut seen = vec![false; m * m];
        let (mut comps, mut interior) = (0, 0);
        let steps: &[(i64, i64)] = match conn {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
        };
        for j in 0..m {
            for i in 0..m {
                if bin.get(i, j) != phase || seen[j * m + i] {
                    continue;
                }
                comps += 1;
                let mut border = false;
                let mut queue = VecDeque::from([(i, j)]);
                seen[j * m + i] = true;
                while let Some((x, y)) = queue.pop_front() {
                    border |= x == 0 || y == 0 || x == m - 1 || y == m - 1;
                    for &(dx, dy) in steps {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= m as i64 || ny >= m as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if bin.get(nx, ny) == phase && !seen[ny * m + nx] {
                            seen[ny * m + nx] = true;
                            queue.push_back((nx, ny));
                        }
                    }
                }
                if !border {
                    interior += 1;
                }
            }
        }
        (comps, interior)
    }

    fn annulus() -> BinaryField {
        let s = GridSpec::new(2.5, 256).unwrap();
        BinaryField::from_fn(s, |i, j| {
            let (x, y) = s.point(i, j);
            let r = (x * x + y * y).sqrt();
            (1.0..=2.0).contains(&r)
        })
    }

    #[test]
    fn empty_raster_has_no_components() {
        let bin = BinaryField::from_fn(spec(5), |_, _| false);
        assert_eq!(label_components(&bin, Connectivity::Eight).count(), 0);
        assert_eq!(count_holes(&bin), 0);
    }

    #[test]
    fn diagonal_pixels_depend_on_connectivity() {
        let bin = BinaryField::from_rows(spec(3), &["...", ".#.", "#.."]).unwrap();
        assert_eq!(label_components(&bin, Connectivity::Eight).count(), 1);
        assert_eq!(label_components(&bin, Connectivity::Four).count(), 2);
    }

    #[test]
    fn full_raster_has_no_holes() {
        let bin = BinaryField::from_fn(spec(6), |_, _| true);
        assert_eq!(count_holes(&bin), 0);
        assert_eq!(topology(&bin), Topology { components: 1, holes: 0 });
    }

    #[test]
    fn annulus_is_one_component_with_one_hole() {
        let bin = annulus();
        assert_eq!(flood_count(&bin, 1, Connectivity::Eight).0, 1);
        assert_eq!(flood_count(&bin, 0, Connectivity::Four).1, 1);
        assert_eq!(label_components(&bin, Connectivity::Eight).count(), 1);
        assert_eq!(count_holes(&bin), 1);
    }

    #[test]
    fn checkerboard_holes() {
        // The two interior background cells of a 4x4 checkerboard are each
        // cut off from the border under 4-connectivity.
        let board = BinaryField::from_fn(spec(4), |i, j| (i + j) % 2 == 0);
        let (_, oracle) = flood_count(&board, 0, Connectivity::Four);
        assert_eq!(count_holes(&board), oracle);
        assert_eq!(count_holes(&board), 2);
        assert_eq!(label_components(&board, Connectivity::Eight).count(), 1);

        // A single background pixel enclosed by a 2x2-free ring.
        let ring = BinaryField::from_rows(spec(4), &["....", ".##.", "#.#.", ".#.."]).unwrap();
        assert_eq!(count_holes(&ring), 1);
    }

    #[test]
    fn labels_follow_first_encounter_order() {
        let bin = BinaryField::from_rows(spec(4), &["#..#", "....", "...#", "#..."]).unwrap();
        let labels = label_components(&bin, Connectivity::Eight);
        assert_eq!(labels.count(), 4);
        assert_eq!(labels.get(0, 0), 1);
        assert_eq!(labels.get(3, 1), 2);
        assert_eq!(labels.get(0, 3), 3);
        assert_eq!(labels.get(3, 3), 4);
    }

    /// Euler characteristic of the union of closed unit squares, V - E + F.
    fn cubical_euler(bin: &BinaryField) -> i64 {
        let m = bin.spec().size();
        let mut vertices = BTreeSet::new();
        let mut edges = BTreeSet::new();
        let mut faces = 0i64;
        for j in 0..m {
            for i in 0..m {
                if bin.get(i, j) == 0 {
                    continue;
                }
                faces += 1;
                for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    vertices.insert((i + dx, j + dy));
                }
                edges.insert((i, j, 'h'));
                edges.insert((i, j + 1, 'h'));
                edges.insert((i, j, 'v'));
                edges.insert((i + 1, j, 'v'));
            }
        }
        vertices.len() as i64 - edges.len() as i64 + faces
    }

    #[test]
    fn euler_duality_on_every_3x3_raster() {
        for mask in 0u32..512 {
            let bin = BinaryField::from_fn(spec(3), |i, j| mask >> (3 * j + i) & 1 == 1);
            let topo = topology(&bin);
            assert_eq!(topo.euler(), cubical_euler(&bin), "mask {mask:09b}");
            let (cc, _) = flood_count(&bin, 1, Connectivity::Eight);
            let (_, holes) = flood_count(&bin, 0, Connectivity::Four);
            assert_eq!((topo.components, topo.holes), (cc, holes), "mask {mask:09b}");
        }
    }

    #[test]
    fn labelling_is_rotation_invariant_up_to_relabeling() {
        let mut state = 0x2545_f491_4f6c_dd1du64;
        for _ in 0..50 {
            let bin = BinaryField::from_fn(spec(12), |_, _| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state % 5 < 2
            });
            let rotated = bin.rotate90();
            for conn in [Connectivity::Four, Connectivity::Eight] {
                let a = label_components(&bin, conn);
                let b = label_components(&rotated, conn);
                assert_eq!(a.count(), b.count());
                // the label correspondence must be a bijection
                let mut map = HashMap::new();
                let m = 12;
                for j in 0..m {
                    for i in 0..m {
                        let la = a.get(i, j);
                        let lb = b.get(m - 1 - j, i);
                        assert_eq!(la == 0, lb == 0);
                        if la != 0 {
                            assert_eq!(*map.entry(la).or_insert(lb), lb);
                        }
                    }
                }
                let images: BTreeSet<_> = map.values().collect();
                assert_eq!(images.len(), map.len());
            }
            assert_eq!(count_holes(&bin), count_holes(&rotated));
        }
    }
}
