//! Periodic spin-1/2 lattices and their computational bases.
//!
//! A configuration is a bitmask: bit `i` set means site `i` is spin up.
//! Ladders number their sites so that sites `2k` and `2k + 1` form rung `k`;
//! the even sites make up one leg and the odd sites the other.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest supported lattice. Sector bases are stored explicitly, so the
/// practical limit is set by memory long before this.
pub const MAX_SITES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Chain,
    Ladder,
}

/// Lattice geometry with periodic boundaries (`s_{N+1} = s_1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    geometry: Geometry,
    n_sites: usize,
}

impl Lattice {
    pub fn new(geometry: Geometry, n_sites: usize) -> Result<Self> {
        if n_sites < 2 {
            return invalid(format!("a lattice needs at least 2 sites, got {n_sites}"));
        }
        if n_sites > MAX_SITES {
            return invalid(format!("at most {MAX_SITES} sites are supported, got {n_sites}"));
        }
        if geometry == Geometry::Ladder && (!n_sites.is_multiple_of(2) || n_sites < 4) {
            return invalid(format!(
                "a ladder needs an even number of sites and at least two rungs, got {n_sites}"
            ));
        }
        Ok(Self { geometry, n_sites })
    }

    pub fn chain(n_sites: usize) -> Result<Self> {
        Self::new(Geometry::Chain, n_sites)
    }

    /// Two-leg ladder with `rungs` rungs (`2 * rungs` sites).
    pub fn ladder(rungs: usize) -> Result<Self> {
        Self::new(Geometry::Ladder, 2 * rungs)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn full_dimension(&self) -> usize {
        1usize << self.n_sites
    }

    pub fn mask(&self) -> u64 {
        if self.n_sites == 64 {
            u64::MAX
        } else {
            (1u64 << self.n_sites) - 1
        }
    }

    /// Sites advanced by one unit cell: one site on a chain, one rung on a ladder.
    pub fn translation_step(&self) -> usize {
        match self.geometry {
            Geometry::Chain => 1,
            Geometry::Ladder => 2,
        }
    }

    /// Number of unit cells along the periodic direction.
    pub fn cells(&self) -> usize {
        self.n_sites / self.translation_step()
    }

    /// Image of `config` under a translation by one unit cell (site `i` moves to `i + step`).
    pub fn translate(&self, config: u64) -> u64 {
        let step = self.translation_step() as u32;
        let n = self.n_sites as u32;
        ((config << step) | (config >> (n - step))) & self.mask()
    }

    /// Image of `config` under the exchange of the two legs of a ladder.
    pub fn swap_legs(&self, config: u64) -> Option<u64> {
        if self.geometry != Geometry::Ladder {
            return None;
        }
        const EVEN: u64 = 0x5555_5555_5555_5555;
        Some((((config & EVEN) << 1) | ((config >> 1) & EVEN)) & self.mask())
    }
}

/// A computational-basis state of the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpinConfig(pub u64);

impl SpinConfig {
    pub fn is_up(self, site: usize) -> bool {
        self.0 >> site & 1 == 1
    }

    pub fn n_up(self) -> u32 {
        self.0.count_ones()
    }

    /// Twice the total `S^z` of the configuration.
    pub fn sz_twice(self, n_sites: usize) -> i32 {
        2 * self.n_up() as i32 - n_sites as i32
    }

    /// Builds a configuration from a string of `u`/`d` (or `↑`/`↓`), site 0 first.
    pub fn from_arrows(s: &str) -> Result<Self> {
        let mut bits = 0u64;
        for (i, ch) in s.chars().filter(|c| !c.is_whitespace()).enumerate() {
            match ch {
                'u' | 'U' | '↑' | '1' => bits |= 1 << i,
                'd' | 'D' | '↓' | '0' => {}
                other => return invalid(format!("unexpected spin symbol {other:?}")),
            }
        }
        Ok(Self(bits))
    }
}

/// Ordered configurations of a sector, either a fixed total `S^z` or the full space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    lattice: Lattice,
    sz_twice: Option<i32>,
    configs: Vec<u64>,
}

impl SectorBasis {
    /// Enumerates the configurations with `2 S^z = sz_twice`, or all `2^N`
    /// configurations for `None`. Configurations are in ascending bitmask order.
    pub fn enumerate(lattice: Lattice, sz_twice: Option<i32>) -> Result<Self> {
        let n = lattice.n_sites();
        let configs = match sz_twice {
            None => {
                if n > 30 {
                    return Err(Error::Resource(format!("full space of {n} sites is too large")));
                }
                (0..1u64 << n).collect()
            }
            Some(m) => {
                if m.unsigned_abs() as usize > n || (n as i32 + m) % 2 != 0 {
                    return invalid(format!(
                        "2Sz = {m} is not reachable with {n} spins (need |2Sz| <= N and matching parity)"
                    ));
                }
                let n_up = ((n as i32 + m) / 2) as u32;
                combinations(n as u32, n_up)
            }
        };
        Ok(Self {
            lattice,
            sz_twice,
            configs,
        })
    }

    pub fn full(lattice: Lattice) -> Result<Self> {
        Self::enumerate(lattice, None)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn sz_twice(&self) -> Option<i32> {
        self.sz_twice
    }

    pub fn is_full(&self) -> bool {
        self.sz_twice.is_none()
    }

    pub fn dimension(&self) -> usize {
        self.configs.len()
    }

    pub fn configs(&self) -> &[u64] {
        &self.configs
    }

    pub fn config(&self, rank: usize) -> SpinConfig {
        SpinConfig(self.configs[rank])
    }

    /// Rank of `config`, or `None` when it lies outside the sector.
    #[inline]
    pub fn find(&self, config: u64) -> Option<usize> {
        if self.sz_twice.is_none() {
            return ((config as usize) < self.configs.len()).then_some(config as usize);
        }
        self.configs.binary_search(&config).ok()
    }

    pub fn index_of(&self, config: SpinConfig) -> Result<usize> {
        self.find(config.0).ok_or_else(|| {
            Error::NotFound(format!(
                "configuration {:#b} is not in sector 2Sz = {:?}",
                config.0, self.sz_twice
            ))
        })
    }

    /// Embeds amplitudes over this basis into the full `2^N` space.
    pub fn lift(&self, amplitudes: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.lattice.full_dimension()];
        for (&c, &a) in self.configs.iter().zip(amplitudes) {
            out[c as usize] = a;
        }
        out
    }
}

/// All `n`-bit masks with `k` bits set, ascending (Gosper's hack).
fn combinations(n: u32, k: u32) -> Vec<u64> {
    if k == 0 {
        return vec![0];
    }
    let limit = 1u64 << n;
    let mut out = Vec::with_capacity(binomial(n as u64, k as u64) as usize);
    let mut x = (1u64 << k) - 1;
    while x < limit {
        out.push(x);
        let c = x & x.wrapping_neg();
        let r = x + c;
        x = (((r ^ x) >> 2) / c) | r;
    }
    out
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}
