//! Test oracles: a naive simulator that keeps the full graph state for
//! every instant, and generators of random event streams.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chronostore::docstore::Value;
use chronostore::layout::{AttrEntry, DiachronicNode, EdgeHistory};
use chronostore::mutation::{MutationEvent, PropTarget};
use chronostore::query::{DegreeHistogram, StaticGraph};
use chronostore::temporal::{Interval, IntervalSet, TimeInstant, Vid, ALIVE_END};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub type Attrs = BTreeMap<String, Value>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct State {
    pub vertices: BTreeMap<Vid, Attrs>,
    pub edges: BTreeMap<(Vid, Vid), Attrs>,
}

impl State {
    pub fn degree(&self, v: Vid) -> u64 {
        self.edges.keys().filter(|(a, b)| *a == v || *b == v).count() as u64
    }

    pub fn to_static(&self) -> StaticGraph {
        let mut g = StaticGraph { vertices: self.vertices.clone(), ..Default::default() };
        for ((a, b), attrs) in &self.edges {
            g.edges.entry(*a).or_default().insert(*b, attrs.clone());
        }
        g
    }
}

/// Keeps one full graph per instant in `0..horizon`; the last one stands
/// for every later instant.
pub struct Oracle {
    pub states: Vec<State>,
}

impl Oracle {
    pub fn new(horizon: TimeInstant) -> Self {
        Self { states: vec![State::default(); horizon as usize + 1] }
    }

    pub fn horizon(&self) -> TimeInstant {
        self.states.len() as TimeInstant - 1
    }

    pub fn at(&self, t: TimeInstant) -> &State {
        &self.states[(t.min(self.horizon())) as usize]
    }

    /// Applies `ev` to every instant from its time on. Returns false (and
    /// changes nothing) when the event's precondition fails.
    pub fn apply(&mut self, ev: &MutationEvent) -> bool {
        let t = ev.time();
        assert!(t < self.horizon(), "event beyond oracle horizon");
        let now = &self.states[t as usize];
        let ok = match ev {
            MutationEvent::InsertNode { vid, .. } => !now.vertices.contains_key(vid),
            MutationEvent::InsertEdge { src, dst, .. } => {
                now.vertices.contains_key(src) && now.vertices.contains_key(dst) && !now.edges.contains_key(&(*src, *dst))
            }
            MutationEvent::InsertProperty { target, name, .. } => {
                owner(now, target).is_some_and(|a| !a.contains_key(name))
            }
            MutationEvent::DeleteNode { vid, .. } => now.vertices.contains_key(vid),
            MutationEvent::DeleteEdge { src, dst, .. } => now.edges.contains_key(&(*src, *dst)),
            MutationEvent::DeleteProperty { target, name, .. } => owner(now, target).is_some_and(|a| a.contains_key(name)),
        };
        if !ok {
            return false;
        }
        for s in &mut self.states[t as usize..] {
            match ev {
                MutationEvent::InsertNode { vid, .. } => {
                    s.vertices.insert(*vid, Attrs::new());
                }
                MutationEvent::InsertEdge { src, dst, .. } => {
                    s.edges.insert((*src, *dst), Attrs::new());
                }
                MutationEvent::InsertProperty { target, name, value, .. } => {
                    owner_mut(s, target).unwrap().insert(name.clone(), value.clone());
                }
                MutationEvent::DeleteNode { vid, .. } => {
                    s.vertices.remove(vid);
                    s.edges.retain(|(a, b), _| a != vid && b != vid);
                }
                MutationEvent::DeleteEdge { src, dst, .. } => {
                    s.edges.remove(&(*src, *dst));
                }
                MutationEvent::DeleteProperty { target, name, .. } => {
                    owner_mut(s, target).unwrap().remove(name);
                }
            }
        }
        true
    }

    pub fn all_vids(&self) -> BTreeSet<Vid> {
        self.states.iter().flat_map(|s| s.vertices.keys().copied()).collect()
    }

    /// Neighbors joined by an edge alive at some instant of `q`.
    pub fn one_hop(&self, vid: Vid, q: &Interval) -> BTreeSet<Vid> {
        let mut out = BTreeSet::new();
        // Instants from the horizon on all share the last state.
        let lo = q.start().min(self.horizon());
        let hi = q.end().min(self.horizon() + 1).max(lo + 1);
        for t in lo..hi {
            for (a, b) in self.at(t).edges.keys() {
                if *a == vid {
                    out.insert(*b);
                }
                if *b == vid {
                    out.insert(*a);
                }
            }
        }
        out
    }

    pub fn degree_distribution(&self, q: &Interval, g: u64) -> Vec<DegreeHistogram> {
        let mut out = Vec::new();
        let mut b = q.start();
        while b < q.end() {
            let s = self.at(b);
            let mut counts = BTreeMap::new();
            for v in s.vertices.keys() {
                *counts.entry(s.degree(*v)).or_default() += 1;
            }
            out.push(DegreeHistogram { bucket: b, counts });
            b += g;
        }
        out
    }

    /// Full history of `vid` derived from the per-instant states, in the
    /// canonical (coalesced) form.
    pub fn history(&self, vid: Vid) -> Option<DiachronicNode> {
        self.history_in(vid, &Interval::new(0, ALIVE_END).unwrap())
    }

    /// History of `vid` built only from the instants inside `q`.
    pub fn history_in(&self, vid: Vid, q: &Interval) -> Option<DiachronicNode> {
        let mut node = DiachronicNode::new(vid);
        let h = self.horizon();
        let span = |t: TimeInstant| {
            let end = if t + 1 > h { ALIVE_END } else { t + 1 };
            Interval::new(t.max(q.start()), end.min(q.end())).unwrap()
        };
        let lo = q.start().min(h);
        let hi = q.end().min(h + 1);
        for t in lo..hi {
            let s = &self.states[t as usize];
            let Some(attrs) = s.vertices.get(&vid) else { continue };
            node.lifespan.union_insert(span(t));
            for (k, v) in attrs {
                extend(node.attributes.entry(k.clone()).or_default(), v, span(t));
            }
            for ((a, b), attrs) in &s.edges {
                if *a == vid {
                    let e = node.out_edges.entry(*b).or_default();
                    e.intervals.union_insert(span(t));
                    for (k, v) in attrs {
                        extend(e.attributes.entry(k.clone()).or_default(), v, span(t));
                    }
                }
                if *b == vid {
                    node.in_edges.entry(*a).or_default().intervals.union_insert(span(t));
                }
            }
        }
        (!node.lifespan.is_empty()).then_some(node)
    }
}

fn extend(h: &mut Vec<AttrEntry>, v: &Value, iv: Interval) {
    if let Some(last) = h.last_mut() {
        if last.interval.end() == iv.start() && &last.value == v {
            last.interval = Interval::new(last.interval.start(), iv.end()).unwrap();
            return;
        }
    }
    h.push(AttrEntry { value: v.clone(), interval: iv });
}

fn owner<'a>(s: &'a State, target: &PropTarget) -> Option<&'a Attrs> {
    match target {
        PropTarget::Node(v) => s.vertices.get(v),
        PropTarget::Edge(a, b) => s.edges.get(&(*a, *b)),
    }
}

fn owner_mut<'a>(s: &'a mut State, target: &PropTarget) -> Option<&'a mut Attrs> {
    match target {
        PropTarget::Node(v) => s.vertices.get_mut(v),
        PropTarget::Edge(a, b) => s.edges.get_mut(&(*a, *b)),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StreamParams {
    pub vertices: u64,
    pub events: usize,
    pub horizon: TimeInstant,
    /// Share of events drawn without regard to validity.
    pub noise: f64,
    /// Relative weight of delete events.
    pub delete_weight: u32,
}

impl Default for StreamParams {
    fn default() -> Self {
        Self { vertices: 40, events: 400, horizon: 60, noise: 0.1, delete_weight: 2 }
    }
}

const NODE_ATTRS: [&str; 2] = ["color", "rank"];
const EDGE_ATTRS: [&str; 1] = ["w"];

fn random_value(rng: &mut ChaCha8Rng) -> Value {
    match rng.gen_range(0..4) {
        0 => Value::from("red"),
        1 => Value::from("blue"),
        2 => Value::UInt(rng.gen_range(0..3)),
        _ => Value::Int(-1),
    }
}

/// A time-ordered stream, mostly valid, with some noise events that may
/// fail. The returned oracle has applied every event that succeeds.
pub fn random_stream(seed: u64, p: StreamParams) -> (Vec<MutationEvent>, Oracle) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut oracle = Oracle::new(p.horizon);
    let mut events = Vec::with_capacity(p.events);
    let mut t = 0;
    for _ in 0..p.events {
        if rng.gen_bool(0.15) {
            t = (t + rng.gen_range(1..=3)).min(p.horizon - 1);
        }
        let ev = if rng.gen_bool(p.noise) {
            noise_event(&mut rng, p.vertices, t)
        } else {
            valid_event(&mut rng, oracle.at(t), p, t).unwrap_or_else(|| noise_event(&mut rng, p.vertices, t))
        };
        oracle.apply(&ev);
        events.push(ev);
    }
    (events, oracle)
}

fn noise_event(rng: &mut ChaCha8Rng, nv: u64, t: TimeInstant) -> MutationEvent {
    let (a, b) = (rng.gen_range(0..nv), rng.gen_range(0..nv));
    let target = if rng.gen_bool(0.5) { PropTarget::Node(a) } else { PropTarget::Edge(a, b) };
    let name = NODE_ATTRS[rng.gen_range(0..2)].to_owned();
    match rng.gen_range(0..6) {
        0 => MutationEvent::InsertNode { vid: a, t },
        1 => MutationEvent::InsertEdge { src: a, dst: b, t },
        2 => MutationEvent::InsertProperty { target, name, value: random_value(rng), t },
        3 => MutationEvent::DeleteNode { vid: a, t },
        4 => MutationEvent::DeleteEdge { src: a, dst: b, t },
        _ => MutationEvent::DeleteProperty { target, name, t },
    }
}

fn valid_event(rng: &mut ChaCha8Rng, s: &State, p: StreamParams, t: TimeInstant) -> Option<MutationEvent> {
    let alive: Vec<Vid> = s.vertices.keys().copied().collect();
    let dw = p.delete_weight;
    let weights = [6, 10, 5, dw, 2 * dw, dw];
    let kind = rand::distributions::WeightedIndex::new(weights).unwrap().sample(rng);
    match kind {
        0 => {
            let vid = rng.gen_range(0..p.vertices);
            (!s.vertices.contains_key(&vid)).then_some(MutationEvent::InsertNode { vid, t })
        }
        1 => {
            let src = *alive.choose(rng)?;
            let dst = *alive.choose(rng)?;
            (!s.edges.contains_key(&(src, dst))).then_some(MutationEvent::InsertEdge { src, dst, t })
        }
        2 => {
            let (target, names): (PropTarget, &[&str]) = if rng.gen_bool(0.6) || s.edges.is_empty() {
                (PropTarget::Node(*alive.choose(rng)?), &NODE_ATTRS)
            } else {
                let (a, b) = *s.edges.keys().nth(rng.gen_range(0..s.edges.len()))?;
                (PropTarget::Edge(a, b), &EDGE_ATTRS)
            };
            let name = names.choose(rng)?.to_string();
            let attrs = owner(s, &target)?;
            if attrs.contains_key(&name) {
                // Change of value: end the current one at this instant.
                return Some(MutationEvent::DeleteProperty { target, name, t });
            }
            Some(MutationEvent::InsertProperty { target, name, value: random_value(rng), t })
        }
        3 => Some(MutationEvent::DeleteNode { vid: *alive.choose(rng)?, t }),
        4 => {
            let (src, dst) = *s.edges.keys().nth(rng.gen_range(0..s.edges.len().max(1)))?;
            Some(MutationEvent::DeleteEdge { src, dst, t })
        }
        _ => {
            let props: Vec<(PropTarget, String)> = s
                .vertices
                .iter()
                .flat_map(|(v, a)| a.keys().map(move |k| (PropTarget::Node(*v), k.clone())))
                .chain(s.edges.iter().flat_map(|((x, y), a)| a.keys().map(move |k| (PropTarget::Edge(*x, *y), k.clone()))))
                .collect();
            let (target, name) = props.choose(rng)?.clone();
            Some(MutationEvent::DeleteProperty { target, name, t })
        }
    }
}

/// Builds a node directly from random intervals, valid by construction.
pub fn random_node(rng: &mut ChaCha8Rng, vid: Vid, max_nbrs: usize) -> DiachronicNode {
    let lifespan = random_set(rng, &Interval::new(0, 100).unwrap(), 3, true);
    let mut node = DiachronicNode::with_lifespan(vid, lifespan.clone());
    for name in NODE_ATTRS {
        if rng.gen_bool(0.6) {
            let h = random_history(rng, &lifespan);
            if !h.is_empty() {
                node.attributes.insert(name.to_owned(), h);
            }
        }
    }
    for dir in 0..2 {
        for _ in 0..rng.gen_range(0..=max_nbrs) {
            let nbr = rng.gen_range(0..1000);
            let mut intervals = IntervalSet::new();
            for iv in lifespan.iter() {
                for sub in random_set(rng, iv, 2, false).iter() {
                    intervals.insert(*sub).unwrap();
                }
            }
            if intervals.is_empty() {
                continue;
            }
            let mut e = EdgeHistory { intervals: intervals.clone(), ..Default::default() };
            if dir == 0 && rng.gen_bool(0.5) {
                let h = random_history(rng, &intervals);
                if !h.is_empty() {
                    e.attributes.insert("w".into(), h);
                }
            }
            if dir == 0 {
                node.out_edges.insert(nbr, e);
            } else {
                node.in_edges.insert(nbr, e);
            }
        }
    }
    node.validate().unwrap();
    node
}

/// Up to `max` disjoint, non-adjacent sub-intervals of `within`; the last
/// one may be left open when `within` is.
fn random_set(rng: &mut ChaCha8Rng, within: &Interval, max: usize, nonempty: bool) -> IntervalSet {
    let hi = if within.is_alive() { within.start() + 100 } else { within.end() };
    let mut points: BTreeSet<u64> = (0..2 * rng.gen_range(usize::from(nonempty)..=max))
        .map(|_| rng.gen_range(within.start()..=hi))
        .collect();
    if nonempty && points.len() < 2 {
        points = [within.start(), hi.max(within.start() + 1)].into();
    }
    let pts: Vec<u64> = points.into_iter().collect();
    let mut set = IntervalSet::new();
    for pair in pts.chunks(2).filter(|c| c.len() == 2) {
        let end = if within.is_alive() && pair[1] == hi && rng.gen_bool(0.5) { ALIVE_END } else { pair[1] };
        let end = end.min(within.end());
        if let Ok(iv) = Interval::new(pair[0], end) {
            let _ = set.insert(iv);
        }
    }
    set
}

fn random_history(rng: &mut ChaCha8Rng, within: &IntervalSet) -> Vec<AttrEntry> {
    let mut h: Vec<AttrEntry> = Vec::new();
    for iv in within.iter() {
        for sub in random_set(rng, iv, 2, false).iter() {
            h.push(AttrEntry { value: random_value(rng), interval: *sub });
        }
    }
    chronostore::layout::coalesce(&mut h);
    h
}

pub fn iv(s: u64, e: u64) -> Interval {
    Interval::new(s, e).unwrap()
}
