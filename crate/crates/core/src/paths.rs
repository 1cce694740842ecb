//! Top-k worst-slack path enumeration and fixed-format text reports.
//!
//! Deviation search over the enabled graph: a reverse sweep per launch
//! context bounds the best completion from every (pin, transition); a
//! priority queue then peels concrete paths in projected-slack order. Every
//! popped path is re-evaluated exactly against the compiled exceptions before
//! it may be emitted, so projections only need to be admissible lower bounds.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;

use crate::delay::DelayOutputs;
use crate::graph::{EdgeKind, TimingGraph};
use crate::liberty::LibertyLibrary;
use crate::mode::{Edge, Mode};
use crate::netlist::FlatNetlist;
use crate::propagate::{
    capture_contexts, edge_relationship, in_transitions, resolve_overrides, CaptureCtx,
    TimingState, EDGE_CLOCK_SEED, EDGE_PORT_SEED,
};
use crate::sdc::{Constraints, ExceptionKind, NodeSet};
use crate::tags::{CompiledExceptions, VIRTUAL_CLOCK};

/// Selection for one path report.
#[derive(Debug, Clone)]
pub struct PathQuery {
    /// Total path budget.
    pub k: usize,
    /// Per-endpoint budget.
    pub nworst: usize,
    /// Keep only paths with slack strictly below this bound.
    pub slack_lt: Option<f64>,
    /// `Late` reports setup paths, `Early` hold paths.
    pub mode: Mode,
    /// Restrict startpoints: pin membership or launch clock membership.
    pub from: Option<NodeSet>,
    /// Restrict endpoints: pin membership or capture clock membership.
    pub to: Option<NodeSet>,
}

impl Default for PathQuery {
    fn default() -> PathQuery {
        PathQuery {
            k: 1,
            nworst: 1,
            slack_lt: None,
            mode: Mode::Late,
            from: None,
            to: None,
        }
    }
}

/// Flattened path collection, ascending slack. Two paths with the same pin
/// sequence never both appear; the worse transition/launch variant wins.
#[derive(Debug, Default, Clone)]
pub struct PathSet {
    /// CSR offsets into the per-pin arrays; length = path count + 1.
    pub path_off: Vec<u32>,
    pub pin: Vec<u32>,
    /// Arrival at each pin in the query mode, ps.
    pub arrival: Vec<f64>,
    /// Delay added by the hop into each pin; 0 at the startpoint, whose
    /// arrival is the launch edge time plus any io delay.
    pub incr: Vec<f64>,
    pub tr: Vec<Edge>,
    pub slack: Vec<f64>,
    pub endpoint: Vec<u32>,
    /// Launch clock id; VIRTUAL_CLOCK for unclocked startpoints.
    pub launch_clock: Vec<u32>,
    /// Capture clock id; VIRTUAL_CLOCK when the bound came from a path-delay
    /// override rather than a capture clock.
    pub capture_clock: Vec<u32>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.path_off.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index range of path `i` in the per-pin arrays.
    pub fn pins_of(&self, i: usize) -> Range<usize> {
        self.path_off[i] as usize..self.path_off[i + 1] as usize
    }
}

/// One launch context: every path launched by the same clock edge shares a
/// required-time formula, so suffix bounds are built per context.
#[derive(Debug, Clone, Copy)]
struct Launch {
    clock: u32,
    launch_tr: Edge,
    launch_t: f64,
    period: f64,
}

#[derive(Debug, Clone, Copy)]
struct Seed {
    node: u32,
    tr: Edge,
    a0: f64,
    /// Register launch: the first hop may take a clk-to-q arc.
    clock_seed: bool,
}

/// Best continuation from an expanded (pin, transition) node.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Cont {
    Dead,
    Stop,
    Via(u32, Edge),
}

struct Suffix {
    /// Best completion value: setup `min(req − suffix delay)`, hold
    /// `min(suffix delay − req)`; +inf where no constrained endpoint is
    /// reachable.
    r: Vec<[f64; 2]>,
    best: Vec<[Cont; 2]>,
}

/// A concrete candidate path from a startpoint to an endpoint.
struct Cand {
    /// Admissible slack bound; replaced by the exact slack on re-insertion.
    proj: f64,
    ep: u32,
    li: u32,
    /// First position allowed to deviate when generating children.
    dev: u32,
    exact: Option<(f64, u32)>,
    expanded: bool,
    nodes: Vec<(u32, Edge)>,
    /// Arc taken at each position; one shorter than `nodes`.
    steps: Vec<(u32, Edge)>,
    arr: Vec<f64>,
}

fn cand_cmp(a: &Cand, b: &Cand) -> Ordering {
    a.proj
        .total_cmp(&b.proj)
        .then_with(|| a.ep.cmp(&b.ep))
        .then_with(|| a.nodes.iter().map(|n| n.0).cmp(b.nodes.iter().map(|n| n.0)))
        .then_with(|| a.nodes.iter().map(|n| n.1).cmp(b.nodes.iter().map(|n| n.1)))
        .then_with(|| a.li.cmp(&b.li))
        .then_with(|| a.exact.is_some().cmp(&b.exact.is_some()))
}

/// Heap wrapper: BinaryHeap pops the maximum, we want the minimum.
struct MinCand(Cand);

impl PartialEq for MinCand {
    fn eq(&self, other: &MinCand) -> bool {
        cand_cmp(&self.0, &other.0) == Ordering::Equal
    }
}
impl Eq for MinCand {}
impl PartialOrd for MinCand {
    fn partial_cmp(&self, other: &MinCand) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for MinCand {
    fn cmp(&self, other: &MinCand) -> Ordering {
        cand_cmp(&other.0, &self.0)
    }
}

struct Emitted {
    slack: f64,
    cap_clock: u32,
    ep: u32,
    li: u32,
    nodes: Vec<(u32, Edge)>,
    arr: Vec<f64>,
}

fn emit_cmp(a: &Emitted, b: &Emitted) -> Ordering {
    a.slack
        .total_cmp(&b.slack)
        .then_with(|| a.ep.cmp(&b.ep))
        .then_with(|| a.nodes.iter().map(|n| n.0).cmp(b.nodes.iter().map(|n| n.0)))
        .then_with(|| a.nodes.iter().map(|n| n.1).cmp(b.nodes.iter().map(|n| n.1)))
        .then_with(|| a.li.cmp(&b.li))
}

/// Setup/hold relationship for a launch context against one capture edge.
fn rel(
    cache: &mut HashMap<(u32, Edge, u32, Edge), (f64, f64)>,
    cns: &Constraints,
    l: &Launch,
    cap_clock: u32,
    cap_tr: Edge,
) -> (f64, f64) {
    *cache.entry((l.clock, l.launch_tr, cap_clock, cap_tr)).or_insert_with(|| {
        let cc = &cns.clocks[cap_clock as usize];
        let (s, h, _) = edge_relationship(l.launch_t, l.period, cc.edge_time(cap_tr), cc.period);
        (s, h)
    })
}

/// Endpoint eligibility under a `to` filter: pin membership keeps every
/// capture context, clock membership keeps the matching ones.
fn filter_ctxs(to: Option<&NodeSet>, ep: u32, ctxs: &[CaptureCtx]) -> Option<Vec<CaptureCtx>> {
    match to {
        None => Some(ctxs.to_vec()),
        Some(ns) if ns.pins.contains(&ep) => Some(ctxs.to_vec()),
        Some(ns) => {
            let v: Vec<CaptureCtx> =
                ctxs.iter().filter(|c| ns.clocks.contains(&c.clock)).cloned().collect();
            if v.is_empty() {
                None
            } else {
                Some(v)
            }
        }
    }
}

struct Search<'a> {
    nl: &'a FlatNetlist,
    g: &'a TimingGraph,
    lib: &'a LibertyLibrary,
    cns: &'a Constraints,
    del: &'a DelayOutputs,
    exc: &'a CompiledExceptions,
    mode: Mode,
    q: &'a PathQuery,
    is_ctq: Vec<bool>,
    ep_ctxs: HashMap<u32, Vec<CaptureCtx>>,
    launches: Vec<Launch>,
    seeds: Vec<Vec<Seed>>,
    /// Clean-tag completion bound per endpoint and final transition, per
    /// launch context; the base of each suffix sweep.
    terminals: Vec<HashMap<u32, [f64; 2]>>,
    suffix: Vec<Suffix>,
}

impl<'a> Search<'a> {
    /// Enabled forward arcs leaving (v, tr), in (edge id, transition) order.
    /// Clk-to-q arcs appear only when asked for (first hop of a register
    /// launch); a path reaching a clock pin as data must not relaunch.
    fn arcs_from(&self, v: u32, tr: Edge, include_ctq: bool, out: &mut Vec<(u32, Edge, f64)>) {
        out.clear();
        for &e in self.g.fanout(v) {
            if self.g.disabled[e as usize]
                || self.g.edge_kind[e as usize] == EdgeKind::CellCheckArc
                || (self.is_ctq[e as usize] && !include_ctq)
            {
                continue;
            }
            let y = self.g.edge_to[e as usize];
            if self.g.pin_const[y as usize].is_some() {
                continue;
            }
            for out_tr in Edge::BOTH {
                if !self.del.arcs.has(e, out_tr)
                    || !in_transitions(self.g, self.nl, self.lib, e, out_tr).contains(&tr)
                {
                    continue;
                }
                out.push((e, out_tr, self.del.arcs.delay[e as usize][out_tr.idx()][self.mode.idx()]));
            }
        }
        out.sort_unstable_by_key(|&(e, t, _)| (e, t));
    }

    /// Candidate that takes arc (e, out_tr) from the prefix end, then follows
    /// best continuations to a concrete endpoint.
    fn make_arc_cand(
        &self,
        li: usize,
        mut nodes: Vec<(u32, Edge)>,
        mut steps: Vec<(u32, Edge)>,
        mut arr: Vec<f64>,
        e: u32,
        out_tr: Edge,
        dev: u32,
    ) -> Option<Cand> {
        let sx = &self.suffix[li];
        let y = self.g.edge_to[e as usize];
        let r = sx.r[y as usize][out_tr.idx()];
        if !r.is_finite() {
            return None;
        }
        let a = arr.last().unwrap() + self.del.arcs.delay[e as usize][out_tr.idx()][self.mode.idx()];
        let proj = match self.mode {
            Mode::Late => r - a,
            Mode::Early => a + r,
        };
        steps.push((e, out_tr));
        nodes.push((y, out_tr));
        arr.push(a);
        let (mut v, mut tr) = (y, out_tr);
        loop {
            match sx.best[v as usize][tr.idx()] {
                Cont::Dead => return None,
                Cont::Stop => break,
                Cont::Via(e2, t2) => {
                    let a2 = arr.last().unwrap()
                        + self.del.arcs.delay[e2 as usize][t2.idx()][self.mode.idx()];
                    steps.push((e2, t2));
                    v = self.g.edge_to[e2 as usize];
                    tr = t2;
                    nodes.push((v, tr));
                    arr.push(a2);
                }
            }
        }
        Some(Cand { proj, ep: v, li: li as u32, dev, exact: None, expanded: false, nodes, steps, arr })
    }

    /// Candidate that ends at the prefix's last pin, when it is a constrained
    /// endpoint for this launch context.
    fn make_stop_cand(
        &self,
        li: usize,
        nodes: Vec<(u32, Edge)>,
        steps: Vec<(u32, Edge)>,
        arr: Vec<f64>,
    ) -> Option<Cand> {
        let (v, tr) = *nodes.last().unwrap();
        let tv = self.terminals[li].get(&v)?[tr.idx()];
        if !tv.is_finite() {
            return None;
        }
        let a = *arr.last().unwrap();
        let proj = match self.mode {
            Mode::Late => tv - a,
            Mode::Early => a + tv,
        };
        let dev = nodes.len() as u32;
        Some(Cand { proj, ep: v, li: li as u32, dev, exact: None, expanded: false, nodes, steps, arr })
    }

    /// Push every single-deviation child of a popped candidate. Children of a
    /// child deviate strictly later, so each concrete path is generated once.
    fn expand(&self, c: &Cand, heap: &mut BinaryHeap<MinCand>, opts: &mut Vec<(u32, Edge, f64)>) {
        for j in c.dev as usize..c.nodes.len() {
            let (v, tr) = c.nodes[j];
            let taken = c.steps.get(j).copied();
            if taken.is_some() {
                if let Some(cand) = self.make_stop_cand(
                    c.li as usize,
                    c.nodes[..=j].to_vec(),
                    c.steps[..j].to_vec(),
                    c.arr[..=j].to_vec(),
                ) {
                    heap.push(MinCand(cand));
                }
            }
            self.arcs_from(v, tr, false, opts);
            let arcs = std::mem::take(opts);
            for &(e, out_tr, _) in &arcs {
                if taken == Some((e, out_tr)) {
                    continue;
                }
                if let Some(cand) = self.make_arc_cand(
                    c.li as usize,
                    c.nodes[..=j].to_vec(),
                    c.steps[..j].to_vec(),
                    c.arr[..=j].to_vec(),
                    e,
                    out_tr,
                    (j + 1) as u32,
                ) {
                    heap.push(MinCand(cand));
                }
            }
            *opts = arcs;
        }
    }

    /// Exact slack of a concrete path: exceptions resolved on its pin
    /// sequence, then the worst applicable check, mirroring the graph-level
    /// required-time computation for a single tag.
    fn evaluate(
        &self,
        c: &Cand,
        rel_cache: &mut HashMap<(u32, Edge, u32, Edge), (f64, f64)>,
    ) -> Option<(f64, u32)> {
        let l = &self.launches[c.li as usize];
        let mut bits = 0u64;
        for &(p, _) in &c.nodes {
            bits = self.exc.advance(bits, p);
        }
        let o = resolve_overrides(self.exc, bits);
        if o.false_path {
            return None;
        }
        let arr_end = *c.arr.last().unwrap();
        let ftr = c.nodes.last().unwrap().1;
        let ctxs = &self.ep_ctxs[&c.ep];
        let mut best: Option<(f64, u32)> = None;
        match self.mode {
            Mode::Late => {
                if let Some((_, v)) = o.max_delay {
                    return Some((l.launch_t + v - arr_end, VIRTUAL_CLOCK));
                }
                for ctx in ctxs {
                    let Some(sub) = ctx.setup_sub[ftr.idx()] else { continue };
                    let (rel_s, _) = rel(rel_cache, self.cns, l, ctx.clock, ctx.cap_tr);
                    let shift = o.mcp_setup.map_or(0.0, |(_, n, end)| {
                        let p = if end { self.cns.clocks[ctx.clock as usize].period } else { l.period };
                        (n as f64 - 1.0) * p
                    });
                    let s = l.launch_t + rel_s + shift - sub - arr_end;
                    if best.map_or(true, |(b, _)| s < b) {
                        best = Some((s, ctx.clock));
                    }
                }
            }
            Mode::Early => {
                if let Some((_, v)) = o.min_delay {
                    return Some((arr_end - (l.launch_t + v), VIRTUAL_CLOCK));
                }
                for ctx in ctxs {
                    let Some(add) = ctx.hold_add[ftr.idx()] else { continue };
                    let (_, rel_h) = rel(rel_cache, self.cns, l, ctx.clock, ctx.cap_tr);
                    let cp = self.cns.clocks[ctx.clock as usize].period;
                    let follow = o.mcp_setup.map_or(0.0, |(_, n, end)| {
                        (n as f64 - 1.0) * if end { cp } else { l.period }
                    });
                    let back = o.mcp_hold.map_or(0.0, |(_, n, end)| {
                        n as f64 * if end { cp } else { l.period }
                    });
                    let s = arr_end - (l.launch_t + rel_h + follow - back + add);
                    if best.map_or(true, |(b, _)| s < b) {
                        best = Some((s, ctx.clock));
                    }
                }
            }
        }
        best
    }

    /// Peel paths for the given launch contexts with one shared queue.
    fn run(&self, lis: &[usize]) -> Vec<Emitted> {
        let mut heap: BinaryHeap<MinCand> = BinaryHeap::new();
        let mut opts = Vec::new();
        for &li in lis {
            for s in &self.seeds[li] {
                self.arcs_from(s.node, s.tr, s.clock_seed, &mut opts);
                let arcs = std::mem::take(&mut opts);
                for &(e, out_tr, _) in &arcs {
                    if let Some(c) = self.make_arc_cand(
                        li,
                        vec![(s.node, s.tr)],
                        Vec::new(),
                        vec![s.a0],
                        e,
                        out_tr,
                        1,
                    ) {
                        heap.push(MinCand(c));
                    }
                }
                opts = arcs;
            }
        }

        let mut out: Vec<Emitted> = Vec::new();
        let mut per_ep: HashMap<u32, usize> = HashMap::new();
        let mut seen: HashSet<Vec<u32>> = HashSet::new();
        let mut rel_cache: HashMap<(u32, Edge, u32, Edge), (f64, f64)> = HashMap::new();
        while let Some(MinCand(mut c)) = heap.pop() {
            if out.len() >= self.q.k || self.q.slack_lt.is_some_and(|t| c.proj >= t) {
                break;
            }
            if !c.expanded {
                c.expanded = true;
                self.expand(&c, &mut heap, &mut opts);
            }
            match c.exact {
                None => {
                    if per_ep.get(&c.ep).is_some_and(|&n| n >= self.q.nworst) {
                        continue;
                    }
                    if let Some((s, cap)) = self.evaluate(&c, &mut rel_cache) {
                        c.proj = s;
                        c.exact = Some((s, cap));
                        heap.push(MinCand(c));
                    }
                }
                Some((s, cap)) => {
                    let n = per_ep.entry(c.ep).or_insert(0);
                    if *n >= self.q.nworst {
                        continue;
                    }
                    let pins: Vec<u32> = c.nodes.iter().map(|&(p, _)| p).collect();
                    if !seen.insert(pins) {
                        continue;
                    }
                    *n += 1;
                    out.push(Emitted {
                        slack: s,
                        cap_clock: cap,
                        ep: c.ep,
                        li: c.li,
                        nodes: c.nodes,
                        arr: c.arr,
                    });
                }
            }
        }
        out
    }

    /// Combine per-launch runs into the order the shared queue would emit,
    /// re-applying the budgets across contexts.
    fn merge_runs(&self, runs: Vec<Vec<Emitted>>) -> Vec<Emitted> {
        let mut all: Vec<Emitted> = runs.into_iter().flatten().collect();
        all.sort_by(emit_cmp);
        let mut out: Vec<Emitted> = Vec::new();
        let mut per_ep: HashMap<u32, usize> = HashMap::new();
        let mut seen: HashSet<Vec<u32>> = HashSet::new();
        for e in all {
            if out.len() >= self.q.k || self.q.slack_lt.is_some_and(|t| e.slack >= t) {
                break;
            }
            let n = per_ep.entry(e.ep).or_insert(0);
            if *n >= self.q.nworst {
                continue;
            }
            let pins: Vec<u32> = e.nodes.iter().map(|&(p, _)| p).collect();
            if !seen.insert(pins) {
                continue;
            }
            *n += 1;
            out.push(e);
        }
        out
    }
}

/// Suffix sweep for one launch context: reverse level order over the enabled
/// graph, excluding clk-to-q hops (they are only valid as a first hop).
fn build_suffix(
    nl: &FlatNetlist,
    g: &TimingGraph,
    lib: &LibertyLibrary,
    del: &DelayOutputs,
    mode: Mode,
    is_ctq: &[bool],
    term: &HashMap<u32, [f64; 2]>,
) -> Suffix {
    let n = g.num_nodes();
    let mut r = vec![[f64::INFINITY; 2]; n];
    let mut best = vec![[Cont::Dead; 2]; n];
    for (&ep, tv) in term {
        for tr in Edge::BOTH {
            if tv[tr.idx()].is_finite() {
                r[ep as usize][tr.idx()] = tv[tr.idx()];
                best[ep as usize][tr.idx()] = Cont::Stop;
            }
        }
    }
    for lvl in (0..g.num_levels).rev() {
        let range = g.level_off[lvl as usize] as usize..g.level_off[lvl as usize + 1] as usize;
        for &v in &g.level_nodes[range] {
            if g.pin_const[v as usize].is_some() {
                continue;
            }
            for &e in g.fanout(v) {
                if g.disabled[e as usize]
                    || g.edge_kind[e as usize] == EdgeKind::CellCheckArc
                    || is_ctq[e as usize]
                {
                    continue;
                }
                let y = g.edge_to[e as usize];
                if g.pin_const[y as usize].is_some() {
                    continue;
                }
                for out_tr in Edge::BOTH {
                    if !del.arcs.has(e, out_tr) {
                        continue;
                    }
                    let d = del.arcs.delay[e as usize][out_tr.idx()][mode.idx()];
                    let w = match mode {
                        Mode::Late => r[y as usize][out_tr.idx()] - d,
                        Mode::Early => r[y as usize][out_tr.idx()] + d,
                    };
                    for &in_tr in in_transitions(g, nl, lib, e, out_tr) {
                        if w < r[v as usize][in_tr.idx()] {
                            r[v as usize][in_tr.idx()] = w;
                            best[v as usize][in_tr.idx()] = Cont::Via(e, out_tr);
                        }
                    }
                }
            }
        }
    }
    Suffix { r, best }
}

fn assemble(list: Vec<Emitted>, launches: &[Launch]) -> PathSet {
    let mut set = PathSet { path_off: vec![0], ..PathSet::default() };
    for e in list {
        set.slack.push(e.slack);
        set.endpoint.push(e.ep);
        set.launch_clock.push(launches[e.li as usize].clock);
        set.capture_clock.push(e.cap_clock);
        for (i, &(p, tr)) in e.nodes.iter().enumerate() {
            set.pin.push(p);
            set.tr.push(tr);
            set.arrival.push(e.arr[i]);
            set.incr.push(if i == 0 { 0.0 } else { e.arr[i] - e.arr[i - 1] });
        }
        set.path_off.push(set.pin.len() as u32);
    }
    set
}

pub fn report_paths(
    state: &TimingState,
    nl: &FlatNetlist,
    g: &TimingGraph,
    lib: &LibertyLibrary,
    cns: &Constraints,
    del: &DelayOutputs,
    q: &PathQuery,
) -> PathSet {
    report_paths_opts(state, nl, g, lib, cns, del, q, false)
}

/// `parallel` runs one queue per launch context and merges; same result as
/// the serial queue.
#[allow(clippy::too_many_arguments)]
pub fn report_paths_opts(
    state: &TimingState,
    nl: &FlatNetlist,
    g: &TimingGraph,
    lib: &LibertyLibrary,
    cns: &Constraints,
    del: &DelayOutputs,
    q: &PathQuery,
    parallel: bool,
) -> PathSet {
    let mode = q.mode;
    let (ep_order, all_ctxs, _) = capture_contexts(nl, g, lib, cns, del, &state.reach);
    let mut ep_ctxs: HashMap<u32, Vec<CaptureCtx>> = HashMap::new();
    let mut eps: Vec<u32> = Vec::new();
    for &ep in &ep_order {
        if let Some(ctxs) = filter_ctxs(q.to.as_ref(), ep, &all_ctxs[&ep]) {
            ep_ctxs.insert(ep, ctxs);
            eps.push(ep);
        }
    }

    // Launch contexts and their startpoints, from the seed markers the
    // forward pass left behind.
    let mut raw: Vec<(u32, Edge, Seed)> = Vec::new();
    for v in 0..g.num_nodes() as u32 {
        for ent in &state.entries[v as usize] {
            for tr in Edge::BOTH {
                let pe = ent.parent_edge[mode.idx()][tr.idx()];
                if pe != EDGE_CLOCK_SEED && pe != EDGE_PORT_SEED {
                    continue;
                }
                let a = ent.arr[mode.idx()][tr.idx()];
                if !a.is_finite() {
                    continue;
                }
                if let Some(ns) = q.from.as_ref() {
                    if !ns.pins.contains(&v) && !ns.clocks.contains(&ent.tag.clock) {
                        continue;
                    }
                }
                let seed =
                    Seed { node: v, tr, a0: a, clock_seed: pe == EDGE_CLOCK_SEED };
                raw.push((ent.tag.clock, ent.tag.launch_tr, seed));
            }
        }
    }
    raw.sort_by_key(|&(c, ltr, s)| (c, ltr, s.node, s.tr));
    let mut launches: Vec<Launch> = Vec::new();
    let mut seeds: Vec<Vec<Seed>> = Vec::new();
    for (c, ltr, s) in raw {
        if launches.last().map_or(true, |l| (l.clock, l.launch_tr) != (c, ltr)) {
            let (launch_t, period) = if c == VIRTUAL_CLOCK {
                (0.0, state.virtual_period)
            } else {
                let cc = &cns.clocks[c as usize];
                (cc.edge_time(ltr), cc.period)
            };
            launches.push(Launch { clock: c, launch_tr: ltr, launch_t, period });
            seeds.push(Vec::new());
        }
        seeds.last_mut().unwrap().push(s);
    }

    // Exception-wide bounds that keep projections admissible: overrides can
    // tighten any endpoint, and a setup multicycle raises hold requireds.
    let pmax = cns.clocks.iter().map(|c| c.period).fold(0.0, f64::max);
    let mut min_max_delay: Option<f64> = None;
    let mut max_min_delay: Option<f64> = None;
    let mut mcp_relax = 0.0f64;
    for a in &state.exceptions.autos {
        match a.kind {
            ExceptionKind::MaxDelay(v) => {
                let m = min_max_delay.get_or_insert(v);
                *m = m.min(v);
            }
            ExceptionKind::MinDelay(v) => {
                let m = max_min_delay.get_or_insert(v);
                *m = m.max(v);
            }
            ExceptionKind::Multicycle { n, setup: true, .. } => {
                mcp_relax = mcp_relax.max((n.max(1) - 1) as f64 * pmax);
            }
            _ => {}
        }
    }

    // Clean-tag completion bounds per endpoint and final transition.
    let mut rel_cache: HashMap<(u32, Edge, u32, Edge), (f64, f64)> = HashMap::new();
    let mut terminals: Vec<HashMap<u32, [f64; 2]>> = Vec::with_capacity(launches.len());
    for l in &launches {
        let mut t: HashMap<u32, [f64; 2]> = HashMap::new();
        for &ep in &eps {
            let ctxs = &ep_ctxs[&ep];
            let mut tv = [f64::INFINITY; 2];
            for tr in Edge::BOTH {
                match mode {
                    Mode::Late => {
                        let mut req = f64::INFINITY;
                        for ctx in ctxs {
                            let Some(sub) = ctx.setup_sub[tr.idx()] else { continue };
                            let (rel_s, _) = rel(&mut rel_cache, cns, l, ctx.clock, ctx.cap_tr);
                            req = req.min(l.launch_t + rel_s - sub);
                        }
                        if let Some(v) = min_max_delay {
                            req = req.min(l.launch_t + v);
                        }
                        tv[tr.idx()] = req;
                    }
                    Mode::Early => {
                        let mut req = f64::NEG_INFINITY;
                        for ctx in ctxs {
                            let Some(add) = ctx.hold_add[tr.idx()] else { continue };
                            let (_, rel_h) = rel(&mut rel_cache, cns, l, ctx.clock, ctx.cap_tr);
                            req = req.max(l.launch_t + rel_h + add);
                        }
                        if req.is_finite() {
                            req += mcp_relax;
                        }
                        if let Some(v) = max_min_delay {
                            req = req.max(l.launch_t + v);
                        }
                        tv[tr.idx()] = if req.is_finite() { -req } else { f64::INFINITY };
                    }
                }
            }
            if tv[0].is_finite() || tv[1].is_finite() {
                t.insert(ep, tv);
            }
        }
        terminals.push(t);
    }

    let is_ctq: Vec<bool> = (0..g.num_edges())
        .map(|e| {
            g.edge_kind[e] == EdgeKind::CellDelayArc
                && g.lib_arc(nl, lib, e as u32).kind.is_clk_to_q()
        })
        .collect();
    let suffix: Vec<Suffix> = terminals
        .par_iter()
        .map(|t| build_suffix(nl, g, lib, del, mode, &is_ctq, t))
        .collect();

    let search = Search {
        nl,
        g,
        lib,
        cns,
        del,
        exc: &state.exceptions,
        mode,
        q,
        is_ctq,
        ep_ctxs,
        launches,
        seeds,
        terminals,
        suffix,
    };
    let emitted = if parallel && search.launches.len() > 1 {
        let lis: Vec<usize> = (0..search.launches.len()).collect();
        let runs: Vec<Vec<Emitted>> = lis.par_iter().map(|&li| search.run(&[li])).collect();
        search.merge_runs(runs)
    } else {
        let lis: Vec<usize> = (0..search.launches.len()).collect();
        search.run(&lis)
    };
    assemble(emitted, &search.launches)
}

/// Fixed-format text block for one path of a set: header, one line per pin
/// (`name edge incr arrival`), slack last.
pub fn format_path_text(set: &PathSet, i: usize, nl: &FlatNetlist, cns: &Constraints) -> String {
    let range = set.pins_of(i);
    let group = match set.capture_clock[i] {
        VIRTUAL_CLOCK => "(none)",
        c => cns.clocks[c as usize].name.as_str(),
    };
    let w = range
        .clone()
        .map(|j| nl.pin_full_name(set.pin[j]).len())
        .max()
        .unwrap_or(0)
        .max(10);
    let mut s = String::new();
    let _ = writeln!(s, "Startpoint: {}", nl.pin_full_name(set.pin[range.start]));
    let _ = writeln!(s, "Endpoint: {}", nl.pin_full_name(set.pin[range.end - 1]));
    let _ = writeln!(s, "Path Group: {group}");
    let _ = writeln!(s);
    for j in range {
        let _ = writeln!(
            s,
            "{:<w$} {} {:>10.3} {:>10.3}",
            nl.pin_full_name(set.pin[j]),
            match set.tr[j] {
                Edge::Rise => 'r',
                Edge::Fall => 'f',
            },
            set.incr[j],
            set.arrival[j],
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<w$}   {:>10} {:>10.3}", "slack", "", set.slack[i]);
    s
}
