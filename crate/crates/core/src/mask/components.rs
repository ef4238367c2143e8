//! Connected-component labeling and small-region removal.

use crate::config::Connectivity;
use crate::image_io::ArtifactMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    /// Inclusive.
    pub x1: usize,
    /// Inclusive.
    pub y1: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    /// Dense id, starting at 1.
    pub id: u32,
    pub area: usize,
    pub bbox: BoundingBox,
}

/// Component-id raster (0 = background) plus per-region summaries.
///
/// Ids are dense, `1..=N`, assigned in raster order of each component's
/// first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionSet {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    regions: Vec<Region>,
}

impl RegionSet {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Union of all regions as a mask.
    pub fn support(&self) -> ArtifactMask {
        ArtifactMask::new(self.width, self.height, self.labels.iter().map(|&l| l != 0).collect())
            .expect("label raster matches dimensions")
    }

    /// For every region, the number of its pixels that are set in `other`
    /// (index `id − 1`).
    pub fn overlap_counts(&self, other: &ArtifactMask) -> Vec<usize> {
        let mut counts = vec![0; self.regions.len()];
        for (&l, &b) in self.labels.iter().zip(other.bits()) {
            if l != 0 && b {
                counts[l as usize - 1] += 1;
            }
        }
        counts
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let ra = find(parent, a);
    let rb = find(parent, b);
    if ra != rb {
        // Smaller provisional label wins so roots follow raster order.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Two-pass labeling with union-find.
pub fn connected_components(mask: &ArtifactMask, connectivity: Connectivity) -> RegionSet {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];
    let back: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (0, -1)],
        Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
    };
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut current = 0u32;
            for &(dx, dy) in back {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= w as isize {
                    continue;
                }
                let l = labels[ny as usize * w + nx as usize];
                if l == 0 {
                    continue;
                }
                if current == 0 {
                    current = l;
                } else if current != l {
                    union(&mut parent, current, l);
                }
            }
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            labels[y * w + x] = current;
        }
    }

    let mut dense = vec![0u32; parent.len()];
    let mut regions: Vec<Region> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if labels[i] == 0 {
                continue;
            }
            let root = find(&mut parent, labels[i]) as usize;
            if dense[root] == 0 {
                regions.push(Region {
                    id: regions.len() as u32 + 1,
                    area: 0,
                    bbox: BoundingBox { x0: x, y0: y, x1: x, y1: y },
                });
                dense[root] = regions.len() as u32;
            }
            let id = dense[root];
            labels[i] = id;
            let r = &mut regions[id as usize - 1];
            r.area += 1;
            r.bbox.x0 = r.bbox.x0.min(x);
            r.bbox.x1 = r.bbox.x1.max(x);
            r.bbox.y1 = y;
        }
    }
    RegionSet {
        width: w,
        height: h,
        labels,
        regions,
    }
}

/// Clears every component with `area < min_area`.
pub fn remove_small(mask: &ArtifactMask, min_area: usize, connectivity: Connectivity) -> ArtifactMask {
    if min_area == 0 {
        return mask.clone();
    }
    let regions = connected_components(mask, connectivity);
    let keep: Vec<bool> = std::iter::once(false)
        .chain(regions.regions.iter().map(|r| r.area >= min_area))
        .collect();
    let bits = regions.labels.iter().map(|&l| keep[l as usize]).collect();
    ArtifactMask::new(mask.width(), mask.height(), bits).expect("same dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_neighbors() {
        let m = ArtifactMask::from_fn(2, 2, |x, y| x == y);
        assert_eq!(connected_components(&m, Connectivity::Eight).len(), 1);
        assert_eq!(connected_components(&m, Connectivity::Four).len(), 2);
        assert!(connected_components(&ArtifactMask::empty(4, 4), Connectivity::Eight).is_empty());
    }

    #[test]
    fn u_shape_merges_two_provisional_labels() {
        let m = ArtifactMask::from_fn(5, 3, |x, y| x == 0 || x == 4 || y == 2);
        let rs = connected_components(&m, Connectivity::Four);
        assert_eq!(rs.len(), 1);
        assert_eq!(rs.regions()[0].area, 9);
        assert_eq!(rs.regions()[0].bbox, BoundingBox { x0: 0, y0: 0, x1: 4, y1: 2 });
    }

    #[test]
    fn ids_are_dense_in_raster_order() {
        let m = ArtifactMask::from_fn(6, 3, |x, y| (x == 5 && y == 0) || (x == 0 && y == 2) || (x == 2 && y == 1));
        let rs = connected_components(&m, Connectivity::Four);
        assert_eq!(rs.label(5, 0), 1);
        assert_eq!(rs.label(2, 1), 2);
        assert_eq!(rs.label(0, 2), 3);
        assert_eq!(rs.support(), m);
    }

    #[test]
    fn remove_small_tie_and_identity() {
        let m = ArtifactMask::from_fn(10, 10, |x, y| (x < 2 && y < 2) || (x >= 5 && y >= 5));
        let r = remove_small(&m, 300, Connectivity::Eight);
        assert!(r.is_empty());
        let r = remove_small(&m, 4, Connectivity::Eight);
        assert_eq!(r, m);
        let r = remove_small(&m, 5, Connectivity::Eight);
        assert_eq!(r.popcount(), 25);
        assert_eq!(remove_small(&m, 0, Connectivity::Eight), m);
    }
}
