//! Request sequences and eviction schedules.

use std::fmt;

use thiserror::Error;

/// A page id in `1..=n`.
pub type Page = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("page {page} at index {index} is outside 1..={n}")]
    PageOutOfRange { index: usize, page: Page, n: u32 },
    #[error("schedule has length {schedule} but the request sequence has length {requests}")]
    LengthMismatch { requests: usize, schedule: usize },
}

/// An instance `r = (r_1, ..., r_T)` over the universe `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RequestSequence {
    n: u32,
    requests: Vec<Page>,
}

impl RequestSequence {
    pub fn new(n: u32, requests: Vec<Page>) -> Result<Self, InstanceError> {
        for (index, &page) in requests.iter().enumerate() {
            if page == 0 || page > n {
                return Err(InstanceError::PageOutOfRange { index, page, n });
            }
        }
        Ok(Self { n, requests })
    }

    /// Builds a sequence whose universe is the largest requested page (at least `floor`).
    pub fn from_pages(requests: Vec<Page>, floor: u32) -> Result<Self, InstanceError> {
        let n = requests.iter().copied().max().unwrap_or(0).max(floor);
        Self::new(n, requests)
    }

    pub fn universe(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn as_slice(&self) -> &[Page] {
        &self.requests
    }

    /// Request at model time `t` (1-based).
    pub fn at(&self, t: usize) -> Page {
        self.requests[t - 1]
    }

    /// The first `len` requests, same universe.
    pub fn prefix(&self, len: usize) -> Self {
        Self {
            n: self.n,
            requests: self.requests[..len.min(self.requests.len())].to_vec(),
        }
    }

    pub fn into_vec(self) -> Vec<Page> {
        self.requests
    }
}

/// An eviction schedule `e = (e_1, ..., e_T)`; `None` is the no-eviction symbol.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct EvictionSchedule(pub Vec<Option<Page>>);

impl EvictionSchedule {
    pub fn none(len: usize) -> Self {
        Self(vec![None; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Option<Page>] {
        &self.0
    }

    pub fn evictions(&self) -> usize {
        self.0.iter().filter(|e| e.is_some()).count()
    }
}

impl From<Vec<Option<Page>>> for EvictionSchedule {
    fn from(v: Vec<Option<Page>>) -> Self {
        Self(v)
    }
}

impl fmt::Display for EvictionSchedule {
    /// One token per line: the page id, or `-` for no eviction.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.0 {
            match e {
                Some(p) => writeln!(f, "{p}")?,
                None => writeln!(f, "-")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_pages() {
        assert_eq!(
            RequestSequence::new(3, vec![1, 4]),
            Err(InstanceError::PageOutOfRange { index: 1, page: 4, n: 3 })
        );
        assert!(RequestSequence::new(3, vec![0]).is_err());
        assert!(RequestSequence::new(3, vec![]).unwrap().is_empty());
    }

    #[test]
    fn schedule_display_uses_dash_for_none() {
        let e = EvictionSchedule(vec![None, Some(2), None]);
        assert_eq!(e.to_string(), "-\n2\n-\n");
        assert_eq!(e.evictions(), 1);
    }
}
