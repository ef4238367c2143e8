//! Binary morphology with square structuring elements.
//!
//! Pixels outside the image count as 0 for both erosion and dilation. A
//! square element is separable, so each operator runs as a horizontal pass
//! followed by a vertical pass over running counts.

use std::collections::VecDeque;

use crate::config::Connectivity;
use crate::image_io::ArtifactMask;

/// Generic 1-D window pass over `len` samples read through `get`.
/// `all == true` keeps a sample iff the full window lies inside and is all
/// ones; otherwise iff any sample in the clipped window is one.
fn pass_1d(len: usize, r: usize, all: bool, get: impl Fn(usize) -> bool, mut put: impl FnMut(usize, bool)) {
    let mut prefix = Vec::with_capacity(len + 1);
    prefix.push(0usize);
    for i in 0..len {
        prefix.push(prefix[i] + get(i) as usize);
    }
    for i in 0..len {
        let v = if all {
            i >= r && i + r < len && prefix[i + r + 1] - prefix[i - r] == 2 * r + 1
        } else {
            let lo = i.saturating_sub(r);
            let hi = (i + r + 1).min(len);
            prefix[hi] > prefix[lo]
        };
        put(i, v);
    }
}

fn separable(mask: &ArtifactMask, se: usize, all: bool) -> ArtifactMask {
    assert!(se % 2 == 1, "structuring element must be odd, got {se}");
    let (w, h) = mask.dims();
    let r = se / 2;
    if r == 0 {
        return mask.clone();
    }
    let mut horiz = ArtifactMask::empty(w, h);
    for y in 0..h {
        pass_1d(w, r, all, |x| mask.get(x, y), |x, v| horiz.set(x, y, v));
    }
    let mut out = ArtifactMask::empty(w, h);
    for x in 0..w {
        pass_1d(h, r, all, |y| horiz.get(x, y), |y, v| out.set(x, y, v));
    }
    out
}

/// Output is 1 iff every pixel under the `se × se` element is 1.
pub fn erode(mask: &ArtifactMask, se: usize) -> ArtifactMask {
    separable(mask, se, true)
}

/// Output is 1 iff any pixel under the `se × se` element is 1.
pub fn dilate(mask: &ArtifactMask, se: usize) -> ArtifactMask {
    separable(mask, se, false)
}

pub(crate) fn neighbors(c: Connectivity) -> &'static [(isize, isize)] {
    const FOUR: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    const EIGHT: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
    match c {
        Connectivity::Four => &FOUR,
        Connectivity::Eight => &EIGHT,
    }
}

/// Sets every background pixel that cannot be reached from the image border
/// through background pixels. Only 0 → 1 changes occur.
pub fn fill_holes(mask: &ArtifactMask, connectivity: Connectivity) -> ArtifactMask {
    let (w, h) = mask.dims();
    let mut reached = vec![false; w * h];
    let mut queue = VecDeque::new();
    let seed = |x: usize, y: usize, reached: &mut Vec<bool>, queue: &mut VecDeque<(usize, usize)>| {
        let i = y * w + x;
        if !mask.bits()[i] && !reached[i] {
            reached[i] = true;
            queue.push_back((x, y));
        }
    };
    for x in 0..w {
        seed(x, 0, &mut reached, &mut queue);
        seed(x, h.saturating_sub(1), &mut reached, &mut queue);
    }
    for y in 0..h {
        seed(0, y, &mut reached, &mut queue);
        seed(w.saturating_sub(1), y, &mut reached, &mut queue);
    }
    let offsets = neighbors(connectivity);
    while let Some((x, y)) = queue.pop_front() {
        for &(dx, dy) in offsets {
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            seed(nx as usize, ny as usize, &mut reached, &mut queue);
        }
    }
    let mut out = mask.clone();
    for (b, r) in out.bits_mut().iter_mut().zip(&reached) {
        *b = *b || !*r;
    }
    out
}

/// Closing (dilate then erode) united with the input, so pixels eroded at
/// the zero-padded border are kept.
pub fn close(mask: &ArtifactMask, se: usize) -> ArtifactMask {
    let mut out = erode(&dilate(mask, se), se);
    for (o, &m) in out.bits_mut().iter_mut().zip(mask.bits()) {
        *o = *o || m;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_pixel_erodes_away() {
        let mut m = ArtifactMask::empty(9, 9);
        m.set(4, 4, true);
        assert!(erode(&m, 5).is_empty());
        assert_eq!(erode(&m, 1), m);
    }

    #[test]
    fn full_square_erodes_to_interior() {
        let m = ArtifactMask::full(10, 10);
        let e = erode(&m, 5);
        let expected = ArtifactMask::from_fn(10, 10, |x, y| (2..8).contains(&x) && (2..8).contains(&y));
        assert_eq!(e, expected);
        assert_eq!(e.popcount(), 36);
    }

    #[test]
    fn dilation_of_a_point_is_a_block() {
        let mut m = ArtifactMask::empty(21, 21);
        m.set(10, 10, true);
        let d = dilate(&m, 5);
        let expected = ArtifactMask::from_fn(21, 21, |x, y| (8..=12).contains(&x) && (8..=12).contains(&y));
        assert_eq!(d, expected);
        assert!(dilate(&ArtifactMask::empty(7, 7), 5).is_empty());
    }

    #[test]
    fn ring_hole_is_filled() {
        let m = ArtifactMask::from_fn(5, 5, |x, y| !(x == 2 && y == 2));
        assert_eq!(fill_holes(&m, Connectivity::Four), ArtifactMask::full(5, 5));
        let ring = ArtifactMask::from_fn(7, 7, |x, y| {
            let on_x = x == 1 || x == 5;
            let on_y = y == 1 || y == 5;
            (on_x && (1..=5).contains(&y)) || (on_y && (1..=5).contains(&x))
        });
        let filled = fill_holes(&ring, Connectivity::Four);
        assert_eq!(filled.popcount(), 25);
    }

    #[test]
    fn open_c_shape_unchanged() {
        // C opening to the right: border-connected interior.
        let c = ArtifactMask::from_fn(7, 7, |x, y| {
            (1..=5).contains(&y) && (x == 1 || ((y == 1 || y == 5) && (1..=6).contains(&x)))
        });
        assert_eq!(fill_holes(&c, Connectivity::Four), c);
        assert!(fill_holes(&ArtifactMask::empty(6, 4), Connectivity::Four).is_empty());
    }

    #[test]
    fn diagonal_gap_depends_on_fill_connectivity() {
        // Hole whose only exit is a diagonal step.
        let m = ArtifactMask::from_fn(5, 5, |x, y| !((x == 2 && y == 2) || (x == 3 && y == 3) || (x == 4 && y == 4)));
        // 8-connected background escapes via the diagonal; 4-connected does not.
        assert_eq!(fill_holes(&m, Connectivity::Eight), m);
        assert_eq!(fill_holes(&m, Connectivity::Four).popcount(), 24);
    }

    #[test]
    fn closing_bridges_small_gaps() {
        let m = ArtifactMask::from_fn(12, 5, |x, _| x != 6);
        let c = close(&m, 3);
        assert!(m.is_subset_of(&c));
        assert!(c.get(6, 2));
    }
}
