//! Analysis mode (early/late) and signal edge (rise/fall) indices shared by
//! delay calculation, propagation, and reporting. Both enums double as array
//! indices so per-mode/per-edge data lives in plain `[T; 2]` pairs.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(usize)]
pub enum Mode {
    Early = 0,
    Late = 1,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::Early, Mode::Late];

    #[inline]
    pub fn idx(self) -> usize {
        self as usize
    }

    /// The merge that keeps the worse value for this mode: max for late
    /// (pessimistic arrivals), min for early.
    #[inline]
    pub fn worse(self, a: f64, b: f64) -> f64 {
        match self {
            Mode::Early => a.min(b),
            Mode::Late => a.max(b),
        }
    }

    /// True when `a` is strictly worse than `b` for this mode.
    #[inline]
    pub fn is_worse(self, a: f64, b: f64) -> bool {
        match self {
            Mode::Early => a < b,
            Mode::Late => a > b,
        }
    }

    /// The identity element of `worse`.
    #[inline]
    pub fn neutral(self) -> f64 {
        match self {
            Mode::Early => f64::INFINITY,
            Mode::Late => f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(usize)]
pub enum Edge {
    Rise = 0,
    Fall = 1,
}

impl Edge {
    pub const BOTH: [Edge; 2] = [Edge::Rise, Edge::Fall];

    #[inline]
    pub fn idx(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn flip(self) -> Edge {
        match self {
            Edge::Rise => Edge::Fall,
            Edge::Fall => Edge::Rise,
        }
    }
}
