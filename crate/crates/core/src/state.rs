use std::fmt;

use crate::formula::{PropId, PropositionTable};

/// Truth assignment to the propositions of a [`PropositionTable`].
///
/// Stored as a fixed-width bitset; two states are equal iff they have the
/// same width and the same bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WorldState {
    width: u32,
    words: Box<[u64]>,
}

impl WorldState {
    /// The state with every proposition false.
    pub fn empty(width: usize) -> Self {
        WorldState {
            width: width as u32,
            words: vec![0; width.div_ceil(64)].into_boxed_slice(),
        }
    }

    pub fn from_props<I: IntoIterator<Item = PropId>>(width: usize, props: I) -> Self {
        let mut s = Self::empty(width);
        for p in props {
            s.insert(p);
        }
        s
    }

    /// Builds a state from the low `width` bits of `bits` (bit i = proposition i).
    pub fn from_bits(width: usize, bits: u64) -> Self {
        assert!(width <= 64, "from_bits supports at most 64 propositions");
        let mut s = Self::empty(width);
        if width > 0 {
            let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
            s.words[0] = bits & mask;
        }
        s
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn contains(&self, p: PropId) -> bool {
        let i = p as usize;
        i < self.width as usize && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn insert(&mut self, p: PropId) {
        let i = p as usize;
        assert!(i < self.width as usize, "proposition {i} out of range");
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, p: PropId) {
        let i = p as usize;
        if i < self.width as usize {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    /// Ids of the true propositions, ascending.
    pub fn props(&self) -> impl Iterator<Item = PropId> + '_ {
        (0..self.width).filter(move |&p| self.contains(p))
    }

    pub fn display<'a>(&'a self, table: &'a PropositionTable) -> DisplayState<'a> {
        DisplayState { state: self, table }
    }
}

/// Renders a state as `{p,q}`.
pub struct DisplayState<'a> {
    state: &'a WorldState,
    table: &'a PropositionTable,
}

impl fmt::Display for DisplayState<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, p) in self.state.props().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match self.table.name(p) {
                Some(name) => f.write_str(name)?,
                None => write!(f, "#{p}")?,
            }
        }
        f.write_str("}")
    }
}
