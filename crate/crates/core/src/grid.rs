//! Uniform 2-D node lattice.
//!
//! Node coordinates are integer multiples of the spacing, so a grid built
//! around a domain centred at the origin is symmetric under `x -> -x`,
//! `y -> -y` and 90° rotations. Reflections about coordinate lines therefore
//! map nodes to nodes exactly.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    /// Integer offsets of node (0, 0): its coordinates are `offset * h`.
    pub offset: [i64; 2],
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2 {
    /// Smallest lattice of spacing `h` covering the box, padded by `margin` nodes.
    pub fn covering(min: [f64; 2], max: [f64; 2], h: f64, margin: usize) -> Self {
        let m = margin as i64;
        let lo = [
            (min[0] / h).floor() as i64 - m,
            (min[1] / h).floor() as i64 - m,
        ];
        let hi = [(max[0] / h).ceil() as i64 + m, (max[1] / h).ceil() as i64 + m];
        Grid2 {
            offset: lo,
            h,
            nx: (hi[0] - lo[0] + 1) as usize,
            ny: (hi[1] - lo[1] + 1) as usize,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn coords_ij(&self, i: usize, j: usize) -> [f64; 2] {
        [
            (self.offset[0] + i as i64) as f64 * self.h,
            (self.offset[1] + j as i64) as f64 * self.h,
        ]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.ij(idx);
        self.coords_ij(i, j)
    }

    /// Node index displaced by an integer step, if it stays on the lattice.
    #[inline]
    pub fn shifted(&self, idx: usize, di: i64, dj: i64) -> Option<usize> {
        let (i, j) = self.ij(idx);
        let (ii, jj) = (i as i64 + di, j as i64 + dj);
        if ii < 0 || jj < 0 || ii >= self.nx as i64 || jj >= self.ny as i64 {
            None
        } else {
            Some(self.index(ii as usize, jj as usize))
        }
    }

    /// Cell containing `p` and the fractional position inside it.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, usize, f64, f64)> {
        let gx = p[0] / self.h - self.offset[0] as f64;
        let gy = p[1] / self.h - self.offset[1] as f64;
        if gx < 0.0 || gy < 0.0 {
            return None;
        }
        let (mut i, mut j) = (gx.floor() as usize, gy.floor() as usize);
        if i + 1 >= self.nx {
            if i + 1 == self.nx && gx - i as f64 == 0.0 && i > 0 {
                i -= 1;
            } else {
                return None;
            }
        }
        if j + 1 >= self.ny {
            if j + 1 == self.ny && gy - j as f64 == 0.0 && j > 0 {
                j -= 1;
            } else {
                return None;
            }
        }
        Some((i, j, gx - i as f64, gy - j as f64))
    }

    /// Node nearest to `p`, if `p` lies within half a cell of it.
    pub fn nearest_node(&self, p: [f64; 2], tol: f64) -> Option<usize> {
        let gx = p[0] / self.h - self.offset[0] as f64;
        let gy = p[1] / self.h - self.offset[1] as f64;
        let (ri, rj) = (gx.round(), gy.round());
        if (gx - ri).abs() > tol || (gy - rj).abs() > tol || ri < 0.0 || rj < 0.0 {
            return None;
        }
        let (i, j) = (ri as usize, rj as usize);
        (i < self.nx && j < self.ny).then(|| self.index(i, j))
    }

    /// Index of node rotated by +90° about the origin, when on the lattice.
    pub fn rotate90(&self, idx: usize) -> Option<usize> {
        let (i, j) = self.ij(idx);
        let (a, b) = (self.offset[0] + i as i64, self.offset[1] + j as i64);
        let (ra, rb) = (-b, a);
        let (ii, jj) = (ra - self.offset[0], rb - self.offset[1]);
        if ii < 0 || jj < 0 || ii >= self.nx as i64 || jj >= self.ny as i64 {
            None
        } else {
            Some(self.index(ii as usize, jj as usize))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_grid_is_symmetric_about_origin() {
        let g = Grid2::covering([-1.0, -1.0], [1.0, 1.0], 1.0 / 8.0, 2);
        assert_eq!(g.offset, [-10, -10]);
        assert_eq!(g.nx, 21);
        let c = g.coords_ij(10, 10);
        assert_eq!(c, [0.0, 0.0]);
        let idx = g.index(3, 17);
        let p = g.coords(idx);
        let m = g.nearest_node([-p[0], p[1]], 1e-9).unwrap();
        assert_eq!(g.coords(m), [-p[0], p[1]]);
    }

    #[test]
    fn locate_and_rotate() {
        let g = Grid2::covering([-1.0, -1.0], [1.0, 1.0], 0.25, 0);
        let (i, j, fx, fy) = g.locate([0.1, -0.3]).unwrap();
        let base = g.coords_ij(i, j);
        assert!((base[0] + fx * 0.25 - 0.1).abs() < 1e-14);
        assert!((base[1] + fy * 0.25 + 0.3).abs() < 1e-14);
        assert!(g.locate([5.0, 0.0]).is_none());
        let idx = g.nearest_node([0.5, 0.25], 1e-9).unwrap();
        let r = g.rotate90(idx).unwrap();
        assert_eq!(g.coords(r), [-0.25, 0.5]);
    }
}
