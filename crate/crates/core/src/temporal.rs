//! Time instants, half-open validity intervals, coalesced interval sets and
//! the lifespan stabbing index.
//!
//! All intervals are `[start, end)` over integer ticks. A point in time `t`
//! is the interval `[t, t + 1)`. An entity that is still alive carries
//! [`ALIVE_END`] as the end of its last interval.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Abstract tick. Loaders map years, snapshot indices or epoch milliseconds
/// onto ticks.
pub type TimeInstant = u64;

/// Vertex identifier.
pub type Vid = u64;

/// End marker of an interval that is still open ("alive").
pub const ALIVE_END: TimeInstant = u64::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemporalError {
    #[error("invalid interval [{start}, {end}): start must be before end")]
    InvalidInterval { start: TimeInstant, end: TimeInstant },
    #[error("interval {inserted} overlaps existing interval {existing}")]
    Overlap { existing: Interval, inserted: Interval },
    #[error("no interval contains instant {0}")]
    NotAliveAt(TimeInstant),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    start: TimeInstant,
    end: TimeInstant,
}

impl Interval {
    pub fn new(start: TimeInstant, end: TimeInstant) -> Result<Self, TemporalError> {
        if start < end {
            Ok(Self { start, end })
        } else {
            Err(TemporalError::InvalidInterval { start, end })
        }
    }

    /// `[start, ALIVE_END)`.
    pub fn alive_from(start: TimeInstant) -> Result<Self, TemporalError> {
        Self::new(start, ALIVE_END)
    }

    /// The single instant `t` as `[t, t + 1)`.
    pub fn point(t: TimeInstant) -> Result<Self, TemporalError> {
        Self::new(t, t.saturating_add(1))
    }

    pub fn start(&self) -> TimeInstant {
        self.start
    }

    pub fn end(&self) -> TimeInstant {
        self.end
    }

    pub fn is_alive(&self) -> bool {
        self.end == ALIVE_END
    }

    pub fn contains(&self, t: TimeInstant) -> bool {
        self.start <= t && t < self.end
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// True when `other` lies entirely inside `self`.
    pub fn covers(&self, other: &Interval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start < end).then_some(Interval { start, end })
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_alive() {
            write!(f, "[{}, inf)", self.start)
        } else {
            write!(f, "[{}, {})", self.start, self.end)
        }
    }
}

pub fn interval_overlaps(a: &Interval, b: &Interval) -> bool {
    a.overlaps(b)
}

/// Sorted, pairwise disjoint and non-adjacent intervals.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from intervals that must not overlap each other.
    pub fn from_intervals<I>(intervals: I) -> Result<Self, TemporalError>
    where
        I: IntoIterator<Item = Interval>,
    {
        let mut set = Self::new();
        for iv in intervals {
            set.insert(iv)?;
        }
        Ok(set)
    }

    pub fn single(iv: Interval) -> Self {
        Self { intervals: vec![iv] }
    }

    pub fn as_slice(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.intervals.iter()
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn first(&self) -> Option<&Interval> {
        self.intervals.first()
    }

    pub fn last(&self) -> Option<&Interval> {
        self.intervals.last()
    }

    pub fn is_alive(&self) -> bool {
        self.last().is_some_and(Interval::is_alive)
    }

    /// Index of the first member whose end is after `t`.
    fn lower(&self, t: TimeInstant) -> usize {
        self.intervals.partition_point(|iv| iv.end <= t)
    }

    pub fn find(&self, t: TimeInstant) -> Option<&Interval> {
        self.intervals.get(self.lower(t)).filter(|iv| iv.contains(t))
    }

    pub fn contains(&self, t: TimeInstant) -> bool {
        self.find(t).is_some()
    }

    pub fn overlaps(&self, q: &Interval) -> bool {
        self.intervals
            .get(self.lower(q.start))
            .is_some_and(|iv| iv.overlaps(q))
    }

    /// True when `iv` lies inside the coverage of the set.
    pub fn covers(&self, iv: &Interval) -> bool {
        self.find(iv.start).is_some_and(|m| m.covers(iv))
    }

    /// Inserts `iv`, coalescing with adjacent members. Fails when `iv`
    /// intersects a member.
    pub fn insert(&mut self, iv: Interval) -> Result<(), TemporalError> {
        let pos = self.intervals.partition_point(|m| m.start < iv.start);
        if let Some(prev) = pos.checked_sub(1).map(|p| self.intervals[p]) {
            if prev.end > iv.start {
                return Err(TemporalError::Overlap { existing: prev, inserted: iv });
            }
        }
        if let Some(next) = self.intervals.get(pos).copied() {
            if next.start < iv.end {
                return Err(TemporalError::Overlap { existing: next, inserted: iv });
            }
        }
        let mut merged = iv;
        let mut lo = pos;
        let mut hi = pos;
        if pos > 0 && self.intervals[pos - 1].end == iv.start {
            merged.start = self.intervals[pos - 1].start;
            lo = pos - 1;
        }
        if pos < self.intervals.len() && self.intervals[pos].start == iv.end {
            merged.end = self.intervals[pos].end;
            hi = pos + 1;
        }
        self.intervals.splice(lo..hi, std::iter::once(merged));
        Ok(())
    }

    /// Inserts `iv`, merging it with every member it overlaps or touches.
    pub fn union_insert(&mut self, iv: Interval) {
        let lo = self.intervals.partition_point(|m| m.end < iv.start);
        let hi = self.intervals.partition_point(|m| m.start <= iv.end);
        let mut merged = iv;
        if lo < hi {
            merged.start = merged.start.min(self.intervals[lo].start);
            merged.end = merged.end.max(self.intervals[hi - 1].end);
        }
        self.intervals.splice(lo..hi, std::iter::once(merged));
    }

    /// Removes all coverage at or after `end`. The member containing `end`
    /// becomes `[start, end)` (and vanishes when `start == end`).
    pub fn truncate(&mut self, end: TimeInstant) -> Result<(), TemporalError> {
        let idx = self.lower(end);
        match self.intervals.get(idx) {
            Some(iv) if iv.contains(end) => {
                let start = iv.start;
                self.intervals.truncate(idx);
                if start < end {
                    self.intervals.push(Interval { start, end });
                }
                Ok(())
            }
            _ => Err(TemporalError::NotAliveAt(end)),
        }
    }

    pub fn truncated(&self, end: TimeInstant) -> Result<Self, TemporalError> {
        let mut out = self.clone();
        out.truncate(end)?;
        Ok(out)
    }

    /// Members clipped to `q`.
    pub fn intersect(&self, q: &Interval) -> IntervalSet {
        IntervalSet {
            intervals: self.intervals.iter().filter_map(|iv| iv.intersect(q)).collect(),
        }
    }

    /// Total number of covered ticks.
    pub fn covered_len(&self) -> u128 {
        self.intervals.iter().map(|iv| iv.len() as u128).sum()
    }
}

impl fmt::Debug for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.intervals.iter()).finish()
    }
}

impl<'a> IntoIterator for &'a IntervalSet {
    type Item = &'a Interval;
    type IntoIter = std::slice::Iter<'a, Interval>;

    fn into_iter(self) -> Self::IntoIter {
        self.intervals.iter()
    }
}

/// Static interval tree over a start-sorted array. Each implicit subtree
/// rooted at `mid` of `[lo, hi)` records the maximum end of the range.
#[derive(Debug, Clone)]
struct IntervalTree<K> {
    entries: Vec<(Interval, K)>,
    max_end: Vec<TimeInstant>,
}

impl<K: Copy> IntervalTree<K> {
    fn build(mut entries: Vec<(Interval, K)>) -> Self {
        entries.sort_by_key(|(iv, _)| (iv.start, iv.end));
        let mut max_end = vec![0; entries.len()];
        Self::augment(&entries, &mut max_end, 0, entries.len());
        Self { entries, max_end }
    }

    fn augment(entries: &[(Interval, K)], max_end: &mut [TimeInstant], lo: usize, hi: usize) -> TimeInstant {
        if lo >= hi {
            return 0;
        }
        let mid = lo + (hi - lo) / 2;
        let left = Self::augment(entries, max_end, lo, mid);
        let right = Self::augment(entries, max_end, mid + 1, hi);
        let m = entries[mid].0.end.max(left).max(right);
        max_end[mid] = m;
        m
    }

    fn overlapping(&self, q: &Interval, out: &mut impl FnMut(K)) {
        self.visit(q, 0, self.entries.len(), out);
    }

    fn visit(&self, q: &Interval, lo: usize, hi: usize, out: &mut impl FnMut(K)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        if self.max_end[mid] <= q.start {
            return;
        }
        self.visit(q, lo, mid, out);
        let (iv, key) = &self.entries[mid];
        if iv.start < q.end {
            if iv.overlaps(q) {
                out(*key);
            }
            self.visit(q, mid + 1, hi, out);
        }
    }
}

impl<K> Default for IntervalTree<K> {
    fn default() -> Self {
        Self { entries: Vec::new(), max_end: Vec::new() }
    }
}

const MIN_REBUILD: usize = 64;

/// Lifespans of a set of entities plus a stabbing structure over all of
/// their intervals.
///
/// The tree is rebuilt once the set of entities modified since the last
/// build grows past a fraction of the index; until then those entities are
/// answered from their current interval sets directly.
#[derive(Debug, Clone)]
pub struct LifespanIndex<K = Vid> {
    entries: BTreeMap<K, IntervalSet>,
    tree: IntervalTree<K>,
    dirty: BTreeSet<K>,
}

impl<K: Copy + Ord> Default for LifespanIndex<K> {
    fn default() -> Self {
        Self { entries: BTreeMap::new(), tree: IntervalTree::default(), dirty: BTreeSet::new() }
    }
}

impl<K: Copy + Ord> LifespanIndex<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &K) -> Option<&IntervalSet> {
        self.entries.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &IntervalSet)> {
        self.entries.iter()
    }

    pub fn is_alive_at(&self, id: &K, t: TimeInstant) -> bool {
        self.entries.get(id).is_some_and(|s| s.contains(t))
    }

    /// Replaces the lifespan of `id`; an empty set removes it.
    pub fn set(&mut self, id: K, lifespan: IntervalSet) {
        if lifespan.is_empty() {
            self.entries.remove(&id);
        } else {
            self.entries.insert(id, lifespan);
        }
        self.touch(id);
    }

    pub fn insert(&mut self, id: K, iv: Interval) -> Result<(), TemporalError> {
        self.entries.entry(id).or_default().insert(iv)?;
        self.touch(id);
        Ok(())
    }

    pub fn truncate(&mut self, id: K, end: TimeInstant) -> Result<(), TemporalError> {
        let set = self.entries.get_mut(&id).ok_or(TemporalError::NotAliveAt(end))?;
        set.truncate(end)?;
        if set.is_empty() {
            self.entries.remove(&id);
        }
        self.touch(id);
        Ok(())
    }

    pub fn remove(&mut self, id: &K) -> Option<IntervalSet> {
        let out = self.entries.remove(id);
        if out.is_some() {
            self.touch(*id);
        }
        out
    }

    fn touch(&mut self, id: K) {
        self.dirty.insert(id);
        if self.dirty.len() > MIN_REBUILD.max(self.entries.len() / 8) {
            self.rebuild();
        }
    }

    pub fn rebuild(&mut self) {
        let all = self
            .entries
            .iter()
            .flat_map(|(id, set)| set.iter().map(move |iv| (*iv, *id)))
            .collect();
        self.tree = IntervalTree::build(all);
        self.dirty.clear();
    }

    /// Ids whose lifespan overlaps `q`.
    pub fn range(&self, q: &Interval) -> BTreeSet<K> {
        let mut out = BTreeSet::new();
        self.tree.overlapping(q, &mut |id| {
            if !self.dirty.contains(&id) {
                out.insert(id);
            }
        });
        for id in &self.dirty {
            if self.entries.get(id).is_some_and(|s| s.overlaps(q)) {
                out.insert(*id);
            }
        }
        out
    }

    /// Ids alive at `t`.
    pub fn stab(&self, t: TimeInstant) -> BTreeSet<K> {
        match Interval::point(t) {
            Ok(q) => self.range(&q),
            Err(_) => BTreeSet::new(),
        }
    }
}
