//! Finite cubes of `Z^d`, the ℓ¹ metric, and the extended (Fourier mode, site)
//! index space used by the quasi-energy operator.
//!
//! Sites are enumerated lexicographically on their coordinates, first
//! coordinate slowest. The cube and its boundary are defined with the ℓ∞
//! distance to the center; every decay distance in the crate is ℓ¹.

use crate::error::{Error, Result};

/// Default cap on the number of sites of a single box.
pub const DEFAULT_MAX_SITES: u128 = 1 << 24;

/// An integer lattice point.
pub type Site = Vec<i64>;

/// The cube `([-L, L]^d + center) ∩ Z^d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeBox {
    dim: usize,
    half_side: u32,
    center: Vec<i64>,
    side: usize,
    len: usize,
}

impl LatticeBox {
    pub fn new(dim: usize, half_side: u32, center: Vec<i64>) -> Result<Self> {
        Self::with_limit(dim, half_side, center, DEFAULT_MAX_SITES)
    }

    /// A box centered at the origin.
    pub fn centered(dim: usize, half_side: u32) -> Result<Self> {
        Self::new(dim, half_side, vec![0; dim])
    }

    pub fn with_limit(dim: usize, half_side: u32, center: Vec<i64>, max_sites: u128) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("lattice dimension must be positive"));
        }
        if center.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: center.len(),
            });
        }
        let side = 2 * half_side as u128 + 1;
        let size = u32::try_from(dim)
            .ok()
            .and_then(|d| side.checked_pow(d))
            .unwrap_or(u128::MAX);
        if size > max_sites {
            return Err(Error::SizeOverflow {
                size,
                max: max_sites,
            });
        }
        Ok(Self {
            dim,
            half_side,
            center,
            side: side as usize,
            len: size as usize,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_side(&self) -> u32 {
        self.half_side
    }

    pub fn center(&self) -> &[i64] {
        &self.center
    }

    /// Number of sites along one axis, `2L + 1`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of sites, `(2L + 1)^d`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Stride of axis `k` in the lexicographic enumeration.
    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.dim - 1 - axis) as u32)
    }

    /// Coordinates of the site with enumeration index `idx`.
    pub fn site(&self, idx: usize) -> Site {
        let mut out = vec![0; self.dim];
        self.coords_into(idx, &mut out);
        out
    }

    pub fn coords_into(&self, mut idx: usize, out: &mut [i64]) {
        debug_assert!(idx < self.len);
        let l = self.half_side as i64;
        for k in (0..self.dim).rev() {
            let r = idx % self.side;
            idx /= self.side;
            out[k] = r as i64 - l + self.center[k];
        }
    }

    /// Enumeration index of `site`, or `None` if it lies outside the box.
    pub fn index_of(&self, site: &[i64]) -> Option<usize> {
        if site.len() != self.dim {
            return None;
        }
        let l = self.half_side as i64;
        let mut idx = 0usize;
        for (x, c) in site.iter().zip(&self.center) {
            let shifted = x - c + l;
            if shifted < 0 || shifted > 2 * l {
                return None;
            }
            idx = idx * self.side + shifted as usize;
        }
        Some(idx)
    }

    pub fn center_index(&self) -> usize {
        (self.len - 1) / 2
    }

    /// All sites in enumeration order.
    pub fn enumerate_sites(&self) -> Vec<Site> {
        (0..self.len).map(|i| self.site(i)).collect()
    }

    /// ℓ∞ distance of site `idx` from the center.
    pub fn linf_from_center(&self, idx: usize) -> u64 {
        let mut idx = idx;
        let l = self.half_side as i64;
        let mut m = 0;
        for _ in 0..self.dim {
            let r = (idx % self.side) as i64 - l;
            idx /= self.side;
            m = m.max(r.unsigned_abs());
        }
        m
    }

    /// ℓ¹ distance of site `idx` from the center.
    pub fn l1_from_center(&self, idx: usize) -> u64 {
        let mut idx = idx;
        let l = self.half_side as i64;
        let mut s = 0;
        for _ in 0..self.dim {
            let r = (idx % self.side) as i64 - l;
            idx /= self.side;
            s += r.unsigned_abs();
        }
        s
    }

    /// ℓ¹ distance between two sites given by index.
    pub fn l1_between(&self, a: usize, b: usize) -> u64 {
        let (mut a, mut b) = (a, b);
        let mut s = 0;
        for _ in 0..self.dim {
            let ra = (a % self.side) as i64;
            let rb = (b % self.side) as i64;
            a /= self.side;
            b /= self.side;
            s += (ra - rb).unsigned_abs();
        }
        s
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.linf_from_center(idx) == self.half_side as u64
    }

    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.is_boundary(i)).collect()
    }

    /// Sites with `|s - center|_∞ = L`, in enumeration order.
    pub fn boundary_sites(&self) -> Vec<Site> {
        self.boundary_indices().into_iter().map(|i| self.site(i)).collect()
    }

    /// Indices of the ℓ¹ nearest neighbours of `idx` that lie inside the box.
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let side = self.side;
        (0..self.dim).flat_map(move |axis| {
            let stride = self.stride(axis);
            let r = (idx / stride) % side;
            let down = (r > 0).then(|| idx - stride);
            let up = (r + 1 < side).then(|| idx + stride);
            down.into_iter().chain(up)
        })
    }
}

/// `Σ_k |a_k − b_k|`.
pub fn l1_distance(a: &[i64], b: &[i64]) -> Result<u64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).unsigned_abs()).sum())
}

/// A point of the extended index space: Fourier mode `n ∈ [-N, N]` and a box site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeSiteIndex {
    pub mode: i64,
    pub site: usize,
}

/// Flattening of `(mode, site)` pairs, mode-major: row `(n + N)·|Λ| + site`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeSiteLayout {
    pub modes: usize,
    pub sites: usize,
}

impl ModeSiteLayout {
    pub fn new(modes: usize, sites: usize) -> Self {
        Self { modes, sites }
    }

    /// Number of Fourier modes, `2N + 1`.
    pub fn mode_count(&self) -> usize {
        2 * self.modes + 1
    }

    pub fn dim(&self) -> usize {
        self.mode_count() * self.sites
    }

    pub fn flatten(&self, idx: ModeSiteIndex) -> Option<usize> {
        let n = self.modes as i64;
        if idx.mode < -n || idx.mode > n || idx.site >= self.sites {
            return None;
        }
        Some((idx.mode + n) as usize * self.sites + idx.site)
    }

    pub fn unflatten(&self, row: usize) -> ModeSiteIndex {
        ModeSiteIndex {
            mode: (row / self.sites) as i64 - self.modes as i64,
            site: row % self.sites,
        }
    }

    /// Row of `(mode, site)` in the site-major ordering used by the banded
    /// solvers: `site·(2N + 1) + (n + N)`.
    pub fn site_major(&self, row: usize) -> usize {
        let m = row / self.sites;
        let s = row % self.sites;
        s * self.mode_count() + m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smallest_box() {
        let b = LatticeBox::centered(1, 1).unwrap();
        assert_eq!(b.enumerate_sites(), vec![vec![-1], vec![0], vec![1]]);
        assert_eq!(b.boundary_sites(), vec![vec![-1], vec![1]]);
    }

    #[test]
    fn square_is_lexicographic() {
        let b = LatticeBox::centered(2, 1).unwrap();
        let sites = b.enumerate_sites();
        assert_eq!(sites.len(), 9);
        let mut sorted = sites.clone();
        sorted.sort();
        assert_eq!(sites, sorted);
        let bd = b.boundary_sites();
        assert_eq!(bd.len(), 8);
        assert!(!bd.contains(&vec![0, 0]));
    }

    #[test]
    fn long_chain() {
        let b = LatticeBox::centered(1, 50).unwrap();
        assert_eq!(b.len(), 101);
        assert_eq!(b.boundary_sites(), vec![vec![-50], vec![50]]);
    }

    #[test]
    fn shifted_center() {
        let b = LatticeBox::new(2, 2, vec![10, -3]).unwrap();
        for (i, s) in b.enumerate_sites().iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
            assert!(s.iter().zip(b.center()).all(|(x, c)| (x - c).abs() <= 2));
        }
        assert_eq!(b.site(b.center_index()), vec![10, -3]);
        assert_eq!(b.index_of(&[13, -3]), None);
    }

    #[test]
    fn overflow_is_reported() {
        let err = LatticeBox::with_limit(3, 50, vec![0; 3], 1000).unwrap_err();
        assert!(matches!(err, Error::SizeOverflow { size: 1_030_301, .. }));
        assert!(LatticeBox::centered(64, 1000).is_err());
    }

    #[test]
    fn l1_examples() {
        assert_eq!(l1_distance(&[0, 0], &[1, 0]).unwrap(), 1);
        assert_eq!(l1_distance(&[0, 0], &[0, 0]).unwrap(), 0);
        assert_eq!(l1_distance(&[-2, 3], &[1, -1]).unwrap(), 7);
        assert!(l1_distance(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn neighbours_match_l1() {
        let b = LatticeBox::centered(3, 2).unwrap();
        for i in 0..b.len() {
            let si = b.site(i);
            let mut got: Vec<usize> = b.neighbors(i).collect();
            got.sort();
            let want: Vec<usize> = (0..b.len())
                .filter(|&j| l1_distance(&si, &b.site(j)).unwrap() == 1)
                .collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn mode_site_flattening() {
        let lay = ModeSiteLayout::new(2, 3);
        assert_eq!(lay.dim(), 15);
        let mut seen = vec![false; lay.dim()];
        let mut seen_sm = vec![false; lay.dim()];
        for mode in -2..=2 {
            for site in 0..3 {
                let idx = ModeSiteIndex { mode, site };
                let row = lay.flatten(idx).unwrap();
                assert_eq!(lay.unflatten(row), idx);
                seen[row] = true;
                seen_sm[lay.site_major(row)] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert!(seen_sm.iter().all(|&s| s));
        assert_eq!(lay.flatten(ModeSiteIndex { mode: 3, site: 0 }), None);
    }

    fn site3() -> impl Strategy<Value = Vec<i64>> {
        prop::collection::vec(-20i64..20, 3)
    }

    proptest! {
        #[test]
        fn l1_is_a_metric(a in site3(), b in site3(), c in site3()) {
            let ab = l1_distance(&a, &b).unwrap();
            prop_assert_eq!(ab, l1_distance(&b, &a).unwrap());
            prop_assert!(ab <= l1_distance(&a, &c).unwrap() + l1_distance(&c, &b).unwrap());
            prop_assert_eq!(ab == 0, a == b);
        }

        #[test]
        fn boundary_and_interior_partition(d in 1usize..4, l in 0u32..4) {
            let b = LatticeBox::centered(d, l).unwrap();
            let sites = b.enumerate_sites();
            prop_assert_eq!(sites.len(), (2 * l as usize + 1).pow(d as u32));
            let bd = b.boundary_indices();
            let interior: Vec<usize> = (0..b.len()).filter(|i| !bd.contains(i)).collect();
            prop_assert_eq!(bd.len() + interior.len(), b.len());
            for &i in &bd {
                let m = sites[i].iter().map(|x| x.abs()).max().unwrap();
                prop_assert_eq!(m, l as i64);
            }
            for &i in &interior {
                prop_assert!(sites[i].iter().all(|x| x.abs() < l as i64));
            }
        }
    }
}
