//! Subsystems of a periodic lattice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::increment;

/// A set of lattice sites on an `N_1 × … × N_D` periodic lattice.
///
/// Sites keep their insertion order; membership is a dense bitmap over the
/// parent lattice. `rect_hint` is set when the region is a full axis-aligned
/// box anchored at the origin, which lets the form factor use a closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    lattice: Vec<usize>,
    sites: Vec<Vec<usize>>,
    member: Vec<bool>,
    rect_hint: Option<Vec<usize>>,
}

impl Region {
    /// An `l_1 × … × l_D` box with its corner at the origin.
    pub fn rect(lattice: &[usize], lengths: &[usize]) -> Result<Self> {
        if lattice.len() != lengths.len() {
            return Err(Error::InvalidRegion(format!(
                "box has {} lengths for a {}-dimensional lattice",
                lengths.len(),
                lattice.len()
            )));
        }
        if let Some(a) = (0..lattice.len()).find(|&a| lengths[a] > lattice[a]) {
            return Err(Error::InvalidRegion(format!(
                "box length {} exceeds lattice extent {} along axis {a}",
                lengths[a], lattice[a]
            )));
        }
        let mut sites = Vec::new();
        if lengths.iter().all(|&l| l > 0) {
            let mut idx = vec![0usize; lengths.len()];
            for _ in 0..lengths.iter().product::<usize>() {
                sites.push(idx.clone());
                increment(&mut idx, lengths);
            }
        }
        let mut region = Self::from_sites(lattice, sites)?;
        region.rect_hint = Some(lengths.to_vec());
        Ok(region)
    }

    /// Box with half the lattice extent along every axis.
    pub fn half_box(lattice: &[usize]) -> Result<Self> {
        if let Some(a) = lattice.iter().position(|n| n % 2 != 0) {
            return Err(Error::InvalidRegion(format!(
                "half box needs even extents, axis {a} has {}",
                lattice[a]
            )));
        }
        let lengths: Vec<usize> = lattice.iter().map(|n| n / 2).collect();
        Self::rect(lattice, &lengths)
    }

    /// One full row: `l_x = N_x`, `l_y = 1`.
    pub fn strip(lattice: &[usize]) -> Result<Self> {
        if lattice.len() != 2 {
            return Err(Error::InvalidRegion(
                "strips are defined on two-dimensional lattices".into(),
            ));
        }
        Self::rect(lattice, &[lattice[0], 1])
    }

    pub fn from_sites(lattice: &[usize], sites: Vec<Vec<usize>>) -> Result<Self> {
        if lattice.is_empty() || lattice.iter().any(|&n| n == 0) {
            return Err(Error::InvalidRegion(format!("bad lattice extents {lattice:?}")));
        }
        let volume: usize = lattice.iter().product();
        let mut member = vec![false; volume];
        for site in &sites {
            if site.len() != lattice.len() {
                return Err(Error::InvalidRegion(format!(
                    "site {site:?} has wrong dimension for lattice {lattice:?}"
                )));
            }
            if site.iter().zip(lattice).any(|(&x, &n)| x >= n) {
                return Err(Error::InvalidRegion(format!(
                    "site {site:?} lies outside lattice {lattice:?}"
                )));
            }
            let i = flat(lattice, site);
            if member[i] {
                return Err(Error::InvalidRegion(format!("duplicate site {site:?}")));
            }
            member[i] = true;
        }
        Ok(Self {
            lattice: lattice.to_vec(),
            sites,
            member,
            rect_hint: None,
        })
    }

    /// All lattice sites not in `self`, in row-major order.
    pub fn complement(&self) -> Self {
        let mut sites = Vec::new();
        let mut idx = vec![0usize; self.lattice.len()];
        for i in 0..self.member.len() {
            if !self.member[i] {
                sites.push(idx.clone());
            }
            increment(&mut idx, &self.lattice);
        }
        Self::from_sites(&self.lattice, sites).expect("complement of a valid region")
    }

    pub fn lattice(&self) -> &[usize] {
        &self.lattice
    }

    pub fn dimension(&self) -> usize {
        self.lattice.len()
    }

    pub fn sites(&self) -> &[Vec<usize>] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: &[usize]) -> bool {
        site.len() == self.lattice.len()
            && site.iter().zip(&self.lattice).all(|(&x, &n)| x < n)
            && self.member[flat(&self.lattice, site)]
    }

    pub fn rect_hint(&self) -> Option<&[usize]> {
        self.rect_hint.as_deref()
    }

    /// Extent of the bounding box along `axis`.
    pub fn extent(&self, axis: usize) -> usize {
        let (lo, hi) = self
            .sites
            .iter()
            .map(|s| s[axis])
            .fold((usize::MAX, 0), |(lo, hi), x| (lo.min(x), hi.max(x)));
        if self.sites.is_empty() {
            0
        } else {
            hi - lo + 1
        }
    }

    pub fn describe(&self) -> RegionSummary {
        RegionSummary {
            lattice: self.lattice.clone(),
            sites: self.sites.len(),
            rect: self.rect_hint.clone(),
        }
    }
}

fn flat(dims: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (&i, &n)| acc * n + i)
}

/// Compact description of a region for output metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub lattice: Vec<usize>,
    pub sites: usize,
    pub rect: Option<Vec<usize>>,
}
