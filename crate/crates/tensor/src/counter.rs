//! Thread-local multiply-accumulate counters.
//!
//! Every kernel that multiplies reports how many scalar multiplications it
//! performed. Counts are attributed to the category that was active when the
//! operation was recorded on the tape, so backward passes are charged to the
//! same category as their forward operation even though they run later.

use std::cell::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum MacCategory {
    /// Sequence-contextualization layers.
    Mixer,
    /// Relation scoring: per-head projections, score matrices, distance bias.
    Relation,
    #[default]
    Other,
}

impl MacCategory {
    const ALL: [MacCategory; 3] = [MacCategory::Mixer, MacCategory::Relation, MacCategory::Other];

    fn slot(self) -> usize {
        match self {
            MacCategory::Mixer => 0,
            MacCategory::Relation => 1,
            MacCategory::Other => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MacCounts {
    pub mixer: u64,
    pub relation: u64,
    pub other: u64,
}

impl MacCounts {
    pub fn total(&self) -> u64 {
        self.mixer + self.relation + self.other
    }

    pub fn get(&self, category: MacCategory) -> u64 {
        match category {
            MacCategory::Mixer => self.mixer,
            MacCategory::Relation => self.relation,
            MacCategory::Other => self.other,
        }
    }
}

thread_local! {
    static COUNTS: [Cell<u64>; 3] = const { [Cell::new(0), Cell::new(0), Cell::new(0)] };
    static ACTIVE: Cell<MacCategory> = const { Cell::new(MacCategory::Other) };
}

/// Category new operations are currently attributed to.
pub fn active() -> MacCategory {
    ACTIVE.with(|c| c.get())
}

/// Runs `f` with `category` active, restoring the previous category after.
pub fn scoped<R>(category: MacCategory, f: impl FnOnce() -> R) -> R {
    let previous = ACTIVE.with(|c| c.replace(category));
    let out = f();
    ACTIVE.with(|c| c.set(previous));
    out
}

pub fn record(category: MacCategory, macs: u64) {
    COUNTS.with(|c| {
        let cell = &c[category.slot()];
        cell.set(cell.get() + macs);
    });
}

pub fn snapshot() -> MacCounts {
    COUNTS.with(|c| {
        let [mixer, relation, other] = MacCategory::ALL.map(|k| c[k.slot()].get());
        MacCounts {
            mixer,
            relation,
            other,
        }
    })
}

pub fn reset() {
    COUNTS.with(|c| c.iter().for_each(|cell| cell.set(0)));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scoped_category_is_restored() {
        reset();
        scoped(MacCategory::Mixer, || {
            assert_eq!(active(), MacCategory::Mixer);
            scoped(MacCategory::Relation, || record(active(), 3));
            record(active(), 5);
        });
        assert_eq!(active(), MacCategory::Other);
        let counts = snapshot();
        assert_eq!((counts.mixer, counts.relation, counts.other), (5, 3, 0));
        assert_eq!(counts.total(), 8);
    }
}
