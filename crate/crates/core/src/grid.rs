use crate::error::{Error, Result};

/// Mode index on the lattice. Unused trailing coordinates are zero.
pub type Mode = [i64; 3];

/// Discretization of the torus `T^d`: dimension, physical points per axis, and the
/// dispersion exponent `s` of the operator `(-Δ)^{s/2}`.
///
/// Coefficients live on the cube `{-K, ..., K}^d` with `K = ⌊(M - 1) / 2⌋`, stored in
/// lexicographic order. In that order the index of `-n` is `len - 1 - index(n)`, the zero
/// mode sits at the center, and the indices above the center form the half-lattice of
/// lexicographically positive modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    points: usize,
    dispersion: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points: usize, dispersion: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if points < 3 {
            return Err(Error::InvalidGrid(format!("M = {points} < 3")));
        }
        if !(dispersion > dim as f64) || !dispersion.is_finite() {
            return Err(Error::InvalidGrid(format!("need s > d, got s = {dispersion}, d = {dim}")));
        }
        Ok(Self { dim, points, dispersion })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Physical grid points per axis (`M`).
    pub fn points(&self) -> usize {
        self.points
    }

    /// Dispersion exponent `s`.
    pub fn dispersion(&self) -> f64 {
        self.dispersion
    }

    /// Largest representable mode coordinate `K`.
    pub fn band(&self) -> i64 {
        ((self.points - 1) / 2) as i64
    }

    pub fn side(&self) -> usize {
        2 * self.band() as usize + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center(&self) -> usize {
        (self.len() - 1) / 2
    }

    #[inline]
    pub fn conj_index(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    /// Indices of the zero mode followed by the lexicographically positive modes.
    pub fn half_lattice(&self) -> std::ops::Range<usize> {
        self.center()..self.len()
    }

    pub fn half_len(&self) -> usize {
        self.len() - self.center()
    }

    pub fn mode(&self, idx: usize) -> Mode {
        cube_mode(self.dim, self.band(), idx)
    }

    pub fn index(&self, n: Mode) -> Option<usize> {
        cube_index(self.dim, self.band(), n)
    }

    pub fn modes(&self) -> impl Iterator<Item = (usize, Mode)> + '_ {
        (0..self.len()).map(move |i| (i, self.mode(i)))
    }

    /// `|n|^s` for the dispersion exponent of this grid.
    pub fn dispersion_symbol(&self, n: Mode) -> f64 {
        (norm_sq(n) as f64).powf(0.5 * self.dispersion)
    }

    /// Returns a copy with a different number of physical points.
    pub fn with_points(&self, points: usize) -> Result<Self> {
        Self::new(self.dim, points, self.dispersion)
    }
}

/// Mode of a cube of half-width `band` in lexicographic order.
pub fn cube_mode(dim: usize, band: i64, mut idx: usize) -> Mode {
    let side = (2 * band + 1) as usize;
    let mut n = [0i64; 3];
    for j in (0..dim).rev() {
        n[j] = (idx % side) as i64 - band;
        idx /= side;
    }
    n
}

pub fn cube_index(dim: usize, band: i64, n: Mode) -> Option<usize> {
    let side = (2 * band + 1) as usize;
    let mut idx = 0usize;
    for (j, &c) in n.iter().enumerate() {
        if j >= dim {
            if c != 0 {
                return None;
            }
            continue;
        }
        if c.abs() > band {
            return None;
        }
        idx = idx * side + (c + band) as usize;
    }
    Some(idx)
}

pub fn norm_sq(n: Mode) -> i64 {
    n.iter().map(|c| c * c).sum()
}

pub fn max_abs(n: Mode) -> i64 {
    n.iter().map(|c| c.abs()).max().unwrap_or(0)
}

/// Japanese bracket `⟨n⟩ = (1 + |n|²)^{1/2}`, the symbol of `(1 - Δ)^{1/2}`.
pub fn japanese(n: Mode) -> f64 {
    (1.0 + norm_sq(n) as f64).sqrt()
}

/// Smallest 5-smooth integer `>= n`; FFT-friendly transform length.
pub fn smooth_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}
