//! Levelized timing propagation: clock distribution, tagged arrival
//! propagation, setup/hold required times with exception resolution, WNS/TNS,
//! and back-propagated per-pin slacks.
//!
//! Conventions: slacks, required times, and WNS/TNS are indexed by `Mode`,
//! with the late side holding the setup check and the early side hold.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::delay::{lut_eval, DelayOutputs};
use crate::graph::{EdgeKind, TimingGraph};
use crate::liberty::{ArcKind, LibertyLibrary, Sense};
use crate::mode::{Edge, Mode};
use crate::netlist::{Dir, FlatNetlist};
use crate::sdc::{Constraints, ExceptionKind};
use crate::tags::{compile_exceptions, ClockPinSets, CompiledExceptions, Tag, VIRTUAL_CLOCK};

/// Parent-edge sentinel: combination never reached.
pub const EDGE_NONE: u32 = u32::MAX;
/// Parent-edge sentinel: launch seed at a register clock pin.
pub const EDGE_CLOCK_SEED: u32 = u32::MAX - 1;
/// Parent-edge sentinel: startpoint seed at a port.
pub const EDGE_PORT_SEED: u32 = u32::MAX - 2;

/// Per-node tag budget before pessimistic merging kicks in.
const MAX_TAGS: usize = 32;

/// Relative tolerance for coincident clock edges and cycle detection.
const EDGE_TOL: f64 = 1e-9;

/// One tagged arrival at a node. Unreached components hold the mode's
/// neutral element (+inf early, -inf late).
#[derive(Debug, Clone, Copy)]
pub struct ArrEntry {
    pub tag: Tag,
    /// [mode][transition] ps.
    pub arr: [[f64; 2]; 2],
    /// [mode][transition]: graph edge that set the value, or a seed marker.
    pub parent_edge: [[u32; 2]; 2],
    /// Transition at the parent node behind each component.
    pub parent_tr: [[Edge; 2]; 2],
    /// Entry index at the parent node behind each component.
    pub parent_ent: [[u32; 2]; 2],
}

impl ArrEntry {
    fn new(tag: Tag) -> ArrEntry {
        ArrEntry {
            tag,
            arr: [[f64::INFINITY; 2], [f64::NEG_INFINITY; 2]],
            parent_edge: [[EDGE_NONE; 2]; 2],
            parent_tr: [[Edge::Rise; 2]; 2],
            parent_ent: [[0; 2]; 2],
        }
    }

    pub fn reached(&self, m: Mode, tr: Edge) -> bool {
        self.arr[m.idx()][tr.idx()].is_finite()
    }

    fn is_clock_seed(&self) -> bool {
        self.parent_edge.iter().flatten().any(|&e| e == EDGE_CLOCK_SEED)
    }

    /// Fold one candidate in, keeping the worse value for the mode. Ties
    /// keep the incumbent, so results follow processing order.
    fn offer(&mut self, m: Mode, tr: Edge, v: f64, edge: u32, ptr: Edge, pent: u32) {
        if m.is_worse(v, self.arr[m.idx()][tr.idx()]) {
            self.arr[m.idx()][tr.idx()] = v;
            self.parent_edge[m.idx()][tr.idx()] = edge;
            self.parent_tr[m.idx()][tr.idx()] = ptr;
            self.parent_ent[m.idx()][tr.idx()] = pent;
        }
    }
}

/// Slack bookkeeping for one endpoint. `slack[Mode::Late]` is the setup
/// slack, `slack[Mode::Early]` the hold slack.
#[derive(Debug, Clone)]
pub struct EndpointSlack {
    pub pin: u32,
    pub slack: [f64; 2],
    pub constrained: [bool; 2],
    /// Every launch tag was removed by a fully matched false path.
    pub excluded: bool,
    /// Worst slack restricted to one capture clock, per side.
    pub per_clock: Vec<(u32, [f64; 2])>,
    /// Worst slack per data transition, per side (backprop seeds).
    pub tr_slack: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy)]
pub struct PropOptions {
    /// Merge same-tag arrivals (dominance pruning) and enforce the tag cap.
    pub prune: bool,
}

impl Default for PropOptions {
    fn default() -> PropOptions {
        PropOptions { prune: true }
    }
}

#[derive(Debug, Default)]
pub struct TimingState {
    /// Tagged arrivals per node.
    pub entries: Vec<Vec<ArrEntry>>,
    /// Per pin: clocks reaching it through the clock network, with inversion
    /// parity (false = non-inverted).
    pub reach: Vec<Vec<(u32, bool)>>,
    pub exceptions: CompiledExceptions,
    /// Period assumed for unclocked startpoints (max defined period).
    pub virtual_period: f64,
    pub unclocked_inputs: u64,
    /// Nodes where the tag cap forced a pessimistic merge.
    pub capped_nodes: u64,

    pub endpoints: Vec<EndpointSlack>,
    /// Endpoints warned as unconstrained (no capture context, no override).
    pub unconstrained: Vec<u32>,
    pub wns: [f64; 2],
    pub tns: [f64; 2],
    /// True if some clock pair hit the hyperperiod cap.
    pub hyperperiod_capped: bool,
    /// Check arcs with no constraint table (margin 0 used).
    pub missing_margins: u64,

    /// Back-propagated required time per pin, [mode][transition].
    pub pin_required: Vec<[[f64; 2]; 2]>,
    /// Tag-blind arrival extremes per pin, [mode][transition].
    pub pin_arrival: Vec<[[f64; 2]; 2]>,
    /// Worst slack per pin per mode; +inf where nothing applies.
    pub pin_slack: Vec<[f64; 2]>,
}

impl TimingState {
    /// Worst arrival at a node for one mode/transition over all tags.
    pub fn node_arrival(&self, node: u32, m: Mode, tr: Edge) -> f64 {
        let mut v = m.neutral();
        for e in &self.entries[node as usize] {
            v = m.worse(v, e.arr[m.idx()][tr.idx()]);
        }
        v
    }
}

/// Transition sets feeding each output transition of an edge.
static RISE1: [Edge; 1] = [Edge::Rise];
static FALL1: [Edge; 1] = [Edge::Fall];

pub(crate) fn in_transitions(
    g: &TimingGraph,
    nl: &FlatNetlist,
    lib: &LibertyLibrary,
    e: u32,
    out_tr: Edge,
) -> &'static [Edge] {
    let same: &'static [Edge] = match out_tr {
        Edge::Rise => &RISE1,
        Edge::Fall => &FALL1,
    };
    match g.edge_kind[e as usize] {
        EdgeKind::NetArc => same,
        EdgeKind::CellCheckArc => &[],
        EdgeKind::CellDelayArc => {
            let arc = g.lib_arc(nl, lib, e);
            match arc.kind {
                ArcKind::RisingEdgeClkToQ => &RISE1,
                ArcKind::FallingEdgeClkToQ => &FALL1,
                _ => match arc.sense {
                    Sense::PositiveUnate => same,
                    Sense::NegativeUnate => match out_tr {
                        Edge::Rise => &FALL1,
                        Edge::Fall => &RISE1,
                    },
                    Sense::NonUnate => &Edge::BOTH,
                },
            }
        }
    }
}

/// BFS clock distribution from clock source pins through net arcs and
/// combinational cell arcs, tracking inversion parity. Stops at constants and
/// at sequential arcs.
fn clock_reach(
    nl: &FlatNetlist,
    g: &TimingGraph,
    lib: &LibertyLibrary,
    cns: &Constraints,
) -> Vec<Vec<(u32, bool)>> {
    let mut reach: Vec<Vec<(u32, bool)>> = vec![Vec::new(); g.num_nodes()];
    let mut queue: Vec<(u32, u32, bool)> = Vec::new();
    for (ci, clock) in cns.clocks.iter().enumerate() {
        for &src in &clock.sources {
            if g.pin_const[src as usize].is_none() && !reach[src as usize].contains(&(ci as u32, false)) {
                reach[src as usize].push((ci as u32, false));
                queue.push((src, ci as u32, false));
            }
        }
    }
    while let Some((pin, c, par)) = queue.pop() {
        for &e in g.fanout(pin) {
            if g.disabled[e as usize] {
                continue;
            }
            let to = g.edge_to[e as usize];
            if g.pin_const[to as usize].is_some() {
                continue;
            }
            let flips: &[bool] = match g.edge_kind[e as usize] {
                EdgeKind::NetArc => &[false],
                EdgeKind::CellCheckArc => &[],
                EdgeKind::CellDelayArc => {
                    let arc = g.lib_arc(nl, lib, e);
                    if arc.kind != ArcKind::Combinational {
                        &[]
                    } else {
                        match arc.sense {
                            Sense::PositiveUnate => &[false],
                            Sense::NegativeUnate => &[true],
                            Sense::NonUnate => &[false, true],
                        }
                    }
                }
            };
            for &flip in flips {
                let np = par ^ flip;
                if !reach[to as usize].contains(&(c, np)) {
                    reach[to as usize].push((c, np));
                    queue.push((to, c, np));
                }
            }
        }
    }
    // Stack-order discovery; normalize for deterministic downstream walks.
    for r in &mut reach {
        r.sort_unstable();
    }
    reach
}

fn merge_entry(
    out: &mut Vec<ArrEntry>,
    tag: Tag,
    prune: bool,
) -> usize {
    if prune {
        if let Some(i) = out.iter().position(|e| e.tag == tag) {
            return i;
        }
    }
    out.push(ArrEntry::new(tag));
    out.len() - 1
}

/// Pessimistic same-launch merge once a node exceeds the tag budget: the two
/// closest late arrivals fuse, keeping worse values per component and the
/// intersection of exception bits.
fn enforce_cap(out: &mut Vec<ArrEntry>, capped: &mut bool) {
    while out.len() > MAX_TAGS {
        let key = |e: &ArrEntry| {
            e.arr[Mode::Late.idx()][0].max(e.arr[Mode::Late.idx()][1])
        };
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                if out[i].tag.clock != out[j].tag.clock
                    || out[i].tag.launch_tr != out[j].tag.launch_tr
                    || out[i].is_clock_seed()
                    || out[j].is_clock_seed()
                {
                    continue;
                }
                let d = (key(&out[i]) - key(&out[j])).abs();
                if best.map_or(true, |(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        let Some((i, j, _)) = best else { break };
        let b = out.remove(j);
        let a = &mut out[i];
        a.tag.bits &= b.tag.bits;
        for m in Mode::BOTH {
            for tr in Edge::BOTH {
                let (mi, ti) = (m.idx(), tr.idx());
                if m.is_worse(b.arr[mi][ti], a.arr[mi][ti]) {
                    a.arr[mi][ti] = b.arr[mi][ti];
                    a.parent_edge[mi][ti] = b.parent_edge[mi][ti];
                    a.parent_tr[mi][ti] = b.parent_tr[mi][ti];
                    a.parent_ent[mi][ti] = b.parent_ent[mi][ti];
                }
            }
        }
        *capped = true;
    }
}

/// Build launch seeds: clock waveforms at register clock pins, io-delay and
/// virtual-clock arrivals at input ports.
fn build_seeds(
    nl: &FlatNetlist,
    g: &TimingGraph,
    lib: &LibertyLibrary,
    cns: &Constraints,
    reach: &[Vec<(u32, bool)>],
    exc: &CompiledExceptions,
    virtual_period: f64,
    unclocked: &mut u64,
) -> HashMap<u32, Vec<ArrEntry>> {
    let mut seeds: HashMap<u32, Vec<ArrEntry>> = HashMap::new();

    // Register clock pins: one entry per (clock, waveform edge), carrying the
    // edge time at the transition the parity maps it to.
    for pin in 0..g.num_nodes() as u32 {
        if reach[pin as usize].is_empty() || g.pin_const[pin as usize].is_some() {
            continue;
        }
        let launches = g.fanout(pin).iter().any(|&e| {
            !g.disabled[e as usize]
                && g.edge_kind[e as usize] == EdgeKind::CellDelayArc
                && g.lib_arc(nl, lib, e).kind.is_clk_to_q()
        });
        if !launches {
            continue;
        }
        let bits = exc.advance(0, pin);
        let list = seeds.entry(pin).or_default();
        for &(c, par) in &reach[pin as usize] {
            let clock = &cns.clocks[c as usize];
            for src_tr in Edge::BOTH {
                let local = if par { src_tr.flip() } else { src_tr };
                let t = clock.edge_time(src_tr);
                let tag = Tag { clock: c, launch_tr: src_tr, bits };
                let i = merge_entry(list, tag, true);
                for m in Mode::BOTH {
                    list[i].offer(m, local, t, EDGE_CLOCK_SEED, local, 0);
                }
            }
        }
    }

    // Input ports. Clock sources stay out unless they carry an input delay.
    let clock_sources: HashSet<u32> =
        cns.clocks.iter().flat_map(|c| c.sources.iter().copied()).collect();
    for pin in 0..nl.num_pins() as u32 {
        if !nl.pin_is_port(pin)
            || nl.pin_dir[pin as usize] == Dir::Out
            || g.pin_const[pin as usize].is_some()
        {
            continue;
        }
        let delays: Vec<_> =
            cns.io_delays.iter().filter(|d| d.is_input && d.pin == pin).collect();
        if delays.is_empty() && clock_sources.contains(&pin) {
            continue;
        }
        let bits = exc.advance(0, pin);
        let list = seeds.entry(pin).or_default();
        if delays.is_empty() {
            let mut e = ArrEntry::new(Tag::virtual_tag(bits));
            for m in Mode::BOTH {
                for tr in Edge::BOTH {
                    e.arr[m.idx()][tr.idx()] = 0.0;
                    e.parent_edge[m.idx()][tr.idx()] = EDGE_PORT_SEED;
                }
            }
            list.push(e);
            if virtual_period.is_finite() {
                *unclocked += 1;
            }
        } else {
            for d in delays {
                let launch_tr = if d.clock_fall { Edge::Fall } else { Edge::Rise };
                let base = cns.clocks[d.clock as usize].edge_time(launch_tr);
                let tag = Tag { clock: d.clock, launch_tr, bits };
                let i = match list.iter().position(|e| e.tag == tag) {
                    Some(i) => i,
                    None => {
                        list.push(ArrEntry::new(tag));
                        list.len() - 1
                    }
                };
                for m in Mode::BOTH {
                    if !d.mode.covers(m) {
                        continue;
                    }
                    for tr in Edge::BOTH {
                        if !d.edge.covers(tr) {
                            continue;
                        }
                        list[i].offer(m, tr, base + d.value, EDGE_PORT_SEED, tr, 0);
                    }
                }
            }
        }
    }
    seeds
}

/// Launch/capture pin sets per clock, for clock-valued exception segments.
fn clock_pin_sets(
    nl: &FlatNetlist,
    g: &TimingGraph,
    lib: &LibertyLibrary,
    cns: &Constraints,
    reach: &[Vec<(u32, bool)>],
) -> ClockPinSets {
    let n = cns.clocks.len();
    let mut sets = ClockPinSets { launch: vec![Vec::new(); n], capture: vec![Vec::new(); n] };
    for e in 0..g.num_edges() {
        if g.disabled[e] || g.edge_kind[e] == EdgeKind::NetArc {
            continue;
        }
        let arc = g.lib_arc(nl, lib, e as u32);
        let ck = g.edge_from[e];
        if arc.kind.is_clk_to_q() {
            for &(c, _) in &reach[ck as usize] {
                sets.launch[c as usize].push(ck);
            }
        } else if arc.kind.is_check() {
            for &(c, _) in &reach[ck as usize] {
                sets.capture[c as usize].push(g.edge_to[e]);
            }
        }
    }
    for d in &cns.io_delays {
        let table = if d.is_input { &mut sets.launch } else { &mut sets.capture };
        table[d.clock as usize].push(d.pin);
    }
    for list in sets.launch.iter_mut().chain(sets.capture.iter_mut()) {
        list.sort_unstable();
        list.dedup();
    }
    sets
}

/// Forward half: clock distribution, exception compilation, seeding, and
/// levelized tagged arrival propagation.
pub fn propagate_arrivals(
    nl: &FlatNetlist,
    g: &TimingGraph,
    lib: &LibertyLibrary,
    cns: &Constraints,
    del: &DelayOutputs,
    opts: PropOptions,
) -> crate::error::Result<TimingState> {
    let mut state = TimingState {
        entries: vec![Vec::new(); g.num_nodes()],
        pin_required: Vec::new(),
        pin_arrival: Vec::new(),
        pin_slack: Vec::new(),
        wns: [f64::INFINITY; 2],
        tns: [0.0; 2],
        ..Default::default()
    };
    state.reach = clock_reach(nl, g, lib, cns);
    // Max over defined periods; +inf when the design has no clocks.
    state.virtual_period = cns
        .clocks
        .iter()
        .map(|c| c.period)
        .fold(f64::INFINITY, |a, p| if a.is_finite() { a.max(p) } else { p });

    let sets = clock_pin_sets(nl, g, lib, cns, &state.reach);
    state.exceptions = compile_exceptions(cns, nl, &sets)?;

    let seeds = build_seeds(
        nl,
        g,
        lib,
        cns,
        &state.reach,
        &state.exceptions,
        state.virtual_period,
        &mut state.unclocked_inputs,
    );
    if state.unclocked_inputs > 0 {
        crate::log_warn!(
            "{} input port(s) without set_input_delay assume a virtual clock (period {} ps)",
            state.unclocked_inputs,
            state.virtual_period
        );
    }

    let exc = &state.exceptions;
    let mut any_capped = false;
    for lvl in 0..g.num_levels as usize {
        let nodes =
            &g.level_nodes[g.level_off[lvl] as usize..g.level_off[lvl + 1] as usize];
        let results: Vec<(u32, Vec<ArrEntry>, bool)> = nodes
            .par_iter()
            .map(|&v| {
                let (ent, capped) =
                    process_node(v, nl, g, lib, del, exc, &state.entries, &seeds, opts);
                (v, ent, capped)
            })
            .collect();
        for (v, ent, capped) in results {
            state.entries[v as usize] = ent;
            if capped {
                state.capped_nodes += 1;
                if !any_capped {
                    any_capped = true;
                    crate::log_warn!(
                        "tag budget ({MAX_TAGS}) exceeded at pin `{}`; merging pessimistically",
                        nl.pin_full_name(v)
                    );
                }
            }
        }
    }
    Ok(state)
}

#[allow(clippy::too_many_arguments)]
fn process_node(
    v: u32,
    nl: &FlatNetlist,
    g: &TimingGraph,
    lib: &LibertyLibrary,
    del: &DelayOutputs,
    exc: &CompiledExceptions,
    entries: &[Vec<ArrEntry>],
    seeds: &HashMap<u32, Vec<ArrEntry>>,
    opts: PropOptions,
) -> (Vec<ArrEntry>, bool) {
    if g.pin_const[v as usize].is_some() {
        return (Vec::new(), false);
    }
    let mut out: Vec<ArrEntry> = Vec::new();
    let advances = exc.touches(v);
    for &e in g.fanin(v) {
        if g.disabled[e as usize] || g.edge_kind[e as usize] == EdgeKind::CellCheckArc {
            continue;
        }
        let u = g.edge_from[e as usize];
        if g.pin_const[u as usize].is_some() {
            continue;
        }
        let is_ctq = g.edge_kind[e as usize] == EdgeKind::CellDelayArc
            && g.lib_arc(nl, lib, e).kind.is_clk_to_q();
        for (ui, ue) in entries[u as usize].iter().enumerate() {
            // Launch arcs fire from the clock waveform itself, never from
            // data that happens to reach the clock pin; everything else
            // carries both (a clock pin may fan out combinationally).
            if is_ctq && !ue.is_clock_seed() {
                continue;
            }
            let tag = if advances {
                Tag { bits: exc.advance(ue.tag.bits, v), ..ue.tag }
            } else {
                ue.tag
            };
            let mut oi = None;
            for out_tr in Edge::BOTH {
                if !del.arcs.has(e, out_tr) {
                    continue;
                }
                let ins = in_transitions(g, nl, lib, e, out_tr);
                for m in Mode::BOTH {
                    let d = del.arcs.delay[e as usize][out_tr.idx()][m.idx()];
                    let mut best = m.neutral();
                    let mut best_tr = Edge::Rise;
                    for &in_tr in ins {
                        let a = ue.arr[m.idx()][in_tr.idx()];
                        if a.is_finite() && (!best.is_finite() || m.is_worse(a, best)) {
                            best = a;
                            best_tr = in_tr;
                        }
                    }
                    if !best.is_finite() {
                        continue;
                    }
                    let i = *oi.get_or_insert_with(|| merge_entry(&mut out, tag, opts.prune));
                    out[i].offer(m, out_tr, best + d, e, best_tr, ui as u32);
                }
            }
        }
    }
    // Seeds stay distinct from same-tag data entries: the launch edge time
    // and a data arrival through the same net are different roles.
    if let Some(s) = seeds.get(&v) {
        out.extend_from_slice(s);
    }
    let mut capped = false;
    if opts.prune {
        enforce_cap(&mut out, &mut capped);
    }
    (out, capped)
}

// ---------------------------------------------------------------------------
// Required times and slacks
// ---------------------------------------------------------------------------

/// One capture context at an endpoint: a clock edge series plus per-side,
/// per-data-transition deductions.
///
/// required_late = launch_edge + setup_relationship − setup_sub\[tr\]
/// required_early = launch_edge + hold_relationship + hold_add\[tr\]
#[derive(Debug, Clone)]
pub(crate) struct CaptureCtx {
    pub(crate) clock: u32,
    /// Capture edge in source-waveform terms.
    pub(crate) cap_tr: Edge,
    pub(crate) setup_sub: [Option<f64>; 2],
    pub(crate) hold_add: [Option<f64>; 2],
}

/// Setup and hold relationships between one launch and one capture edge
/// series, relative to the launch series' first edge.
pub(crate) fn edge_relationship(
    t_l: f64,
    p_l: f64,
    t_c: f64,
    p_c: f64,
) -> (f64, f64, bool) {
    let tol = EDGE_TOL * p_c.max(p_l).max(1.0);
    let max_span = 64.0 * p_l.max(p_c);
    let delta = t_c - t_l;
    let mut setup = f64::INFINITY;
    let mut hold = f64::NEG_INFINITY;
    let mut capped = true;
    let mut i = 0u64;
    loop {
        let l = i as f64 * p_l;
        let k = ((l - delta) / p_c).floor();
        let mut c = delta + k * p_c;
        while c <= l + tol {
            c += p_c;
        }
        setup = setup.min(c - l);
        hold = hold.max((c - p_c) - l);
        i += 1;
        let span = i as f64 * p_l;
        let cycles = span / p_c;
        if (cycles - cycles.round()).abs() * p_c <= tol {
            capped = false;
            break;
        }
        if span + tol >= max_span {
            break;
        }
    }
    (setup, hold, capped)
}

/// Matched-exception summary for one tag at one endpoint.
#[derive(Default, Clone, Copy)]
pub(crate) struct Overrides {
    pub(crate) false_path: bool,
    pub(crate) max_delay: Option<(u32, f64)>,
    pub(crate) min_delay: Option<(u32, f64)>,
    pub(crate) mcp_setup: Option<(u32, u32, bool)>,
    pub(crate) mcp_hold: Option<(u32, u32, bool)>,
}

pub(crate) fn resolve_overrides(exc: &CompiledExceptions, bits: u64) -> Overrides {
    let mut o = Overrides::default();
    for (i, a) in exc.autos.iter().enumerate() {
        if !exc.fully_matched(bits, i) {
            continue;
        }
        let newer = |cur: Option<u32>| cur.map_or(true, |p| a.priority > p);
        match a.kind {
            ExceptionKind::FalsePath => o.false_path = true,
            ExceptionKind::MaxDelay(v) => {
                if newer(o.max_delay.map(|(p, _)| p)) {
                    o.max_delay = Some((a.priority, v));
                }
            }
            ExceptionKind::MinDelay(v) => {
                if newer(o.min_delay.map(|(p, _)| p)) {
                    o.min_delay = Some((a.priority, v));
                }
            }
            ExceptionKind::Multicycle { n, setup, anchor_end } => {
                let slot = if setup { &mut o.mcp_setup } else { &mut o.mcp_hold };
                if slot.map_or(true, |(p, _, _)| a.priority > p) {
                    *slot = Some((a.priority, n, anchor_end));
                }
            }
        }
    }
    o
}

/// Endpoints in discovery order with their capture contexts: data pins of
/// enabled check arcs, then output ports with output delays. Returns the count
/// of check transitions lacking a constraint table (margin 0 assumed).
pub(crate) fn capture_contexts(
    nl: &FlatNetlist,
    g: &TimingGraph,
    lib: &LibertyLibrary,
    cns: &Constraints,
    del: &DelayOutputs,
    reach: &[Vec<(u32, bool)>],
) -> (Vec<u32>, HashMap<u32, Vec<CaptureCtx>>, u64) {
    let mut ep_ctxs: HashMap<u32, Vec<CaptureCtx>> = HashMap::new();
    let mut ep_order: Vec<u32> = Vec::new();
    let mut missing = 0u64;
    let add_ep = |pin: u32, order: &mut Vec<u32>, map: &mut HashMap<u32, Vec<CaptureCtx>>| {
        if !map.contains_key(&pin) {
            map.insert(pin, Vec::new());
            order.push(pin);
        }
    };

    for e in 0..g.num_edges() {
        if g.disabled[e] || g.edge_kind[e] != EdgeKind::CellCheckArc {
            continue;
        }
        let ck = g.edge_from[e];
        let dpin = g.edge_to[e];
        if g.pin_const[dpin as usize].is_some() {
            continue;
        }
        add_ep(dpin, &mut ep_order, &mut ep_ctxs);
        let arc = g.lib_arc(nl, lib, e as u32);
        let local_cap = match arc.kind {
            ArcKind::SetupRising | ArcKind::HoldRising => Edge::Rise,
            _ => Edge::Fall,
        };
        let clock_slew = del.node_slew[ck as usize][local_cap.idx()];
        let mut margin = [0.0f64; 2];
        for tr in Edge::BOTH {
            let table = match tr {
                Edge::Rise => arc.rise_constraint.as_ref(),
                Edge::Fall => arc.fall_constraint.as_ref(),
            };
            match table {
                Some(t) => {
                    margin[tr.idx()] =
                        lut_eval(t, del.node_slew[dpin as usize][tr.idx()], clock_slew)
                }
                None => missing += 1,
            }
        }
        for &(c, par) in &reach[ck as usize] {
            let cap_tr = if par { local_cap.flip() } else { local_cap };
            let ctx = CaptureCtx {
                clock: c,
                cap_tr,
                setup_sub: if arc.kind.is_setup() {
                    [Some(margin[0]), Some(margin[1])]
                } else {
                    [None, None]
                },
                hold_add: if arc.kind.is_setup() {
                    [None, None]
                } else {
                    [Some(margin[0]), Some(margin[1])]
                },
            };
            ep_ctxs.get_mut(&dpin).unwrap().push(ctx);
        }
    }

    for pin in 0..nl.num_pins() as u32 {
        if !nl.pin_is_port(pin) || nl.pin_dir[pin as usize] == Dir::In {
            continue;
        }
        let delays: Vec<_> =
            cns.io_delays.iter().filter(|d| !d.is_input && d.pin == pin).collect();
        if delays.is_empty() {
            continue;
        }
        add_ep(pin, &mut ep_order, &mut ep_ctxs);
        // One context per (clock, capture edge); worst value over entries.
        let mut groups: Vec<(u32, Edge)> = delays
            .iter()
            .map(|d| (d.clock, if d.clock_fall { Edge::Fall } else { Edge::Rise }))
            .collect();
        groups.sort_unstable();
        groups.dedup();
        for (c, cap_tr) in groups {
            let mut setup_sub = [None; 2];
            let mut hold_add = [None; 2];
            for d in &delays {
                if d.clock != c || (d.clock_fall != (cap_tr == Edge::Fall)) {
                    continue;
                }
                for tr in Edge::BOTH {
                    if !d.edge.covers(tr) {
                        continue;
                    }
                    if d.mode.covers(Mode::Late) {
                        let s = setup_sub[tr.idx()].get_or_insert(f64::NEG_INFINITY);
                        *s = s.max(d.value);
                    }
                    if d.mode.covers(Mode::Early) {
                        let h = hold_add[tr.idx()].get_or_insert(f64::NEG_INFINITY);
                        *h = h.max(-d.value);
                    }
                }
            }
            ep_ctxs
                .get_mut(&pin)
                .unwrap()
                .push(CaptureCtx { clock: c, cap_tr, setup_sub, hold_add });
        }
    }
    (ep_order, ep_ctxs, missing)
}

/// Backward half: capture contexts, per-tag required times with exception
/// resolution, endpoint slacks, and WNS/TNS.
pub fn compute_required_and_slack(
    state: &mut TimingState,
    nl: &FlatNetlist,
    g: &TimingGraph,
    lib: &LibertyLibrary,
    cns: &Constraints,
    del: &DelayOutputs,
) {
    let (ep_order, ep_ctxs, missing) = capture_contexts(nl, g, lib, cns, del, &state.reach);
    state.missing_margins += missing;
    if state.missing_margins > 0 {
        crate::log_warn!(
            "{} check transition(s) without a constraint table; margin 0 assumed",
            state.missing_margins
        );
    }

    // Relationship cache over (launch clock, launch tr, capture clock, cap tr).
    let mut rel_cache: HashMap<(u32, Edge, u32, Edge), (f64, f64, bool)> = HashMap::new();
    let exc = std::mem::take(&mut state.exceptions);

    for &ep in &ep_order {
        let ctxs = &ep_ctxs[&ep];
        let mut slack = [f64::INFINITY; 2];
        let mut tr_slack = [[f64::INFINITY; 2]; 2];
        let mut constrained = [false; 2];
        let mut per_clock: HashMap<u32, [f64; 2]> = HashMap::new();
        let mut had_tags = false;
        let mut all_false = true;

        for entry in &state.entries[ep as usize] {
            had_tags = true;
            let o = resolve_overrides(&exc, entry.tag.bits);
            if o.false_path {
                continue;
            }
            all_false = false;
            let (launch_t, launch_p) = if entry.tag.clock == VIRTUAL_CLOCK {
                (0.0, state.virtual_period)
            } else {
                let c = &cns.clocks[entry.tag.clock as usize];
                (c.edge_time(entry.tag.launch_tr), c.period)
            };

            for tr in Edge::BOTH {
                // Setup side.
                let late = entry.arr[Mode::Late.idx()][tr.idx()];
                if late.is_finite() {
                    if let Some((_, v)) = o.max_delay {
                        let s = launch_t + v - late;
                        constrained[Mode::Late.idx()] = true;
                        slack[Mode::Late.idx()] = slack[Mode::Late.idx()].min(s);
                        tr_slack[Mode::Late.idx()][tr.idx()] =
                            tr_slack[Mode::Late.idx()][tr.idx()].min(s);
                    } else {
                        for ctx in ctxs {
                            let Some(sub) = ctx.setup_sub[tr.idx()] else { continue };
                            let cc = &cns.clocks[ctx.clock as usize];
                            let (rel_s, _, capped) = *rel_cache
                                .entry((entry.tag.clock, entry.tag.launch_tr, ctx.clock, ctx.cap_tr))
                                .or_insert_with(|| {
                                    edge_relationship(
                                        launch_t,
                                        launch_p,
                                        cc.edge_time(ctx.cap_tr),
                                        cc.period,
                                    )
                                });
                            if capped {
                                state.hyperperiod_capped = true;
                            }
                            let shift = o.mcp_setup.map_or(0.0, |(_, n, end)| {
                                (n as f64 - 1.0) * if end { cc.period } else { launch_p }
                            });
                            let req = launch_t + rel_s + shift - sub;
                            let s = req - late;
                            constrained[Mode::Late.idx()] = true;
                            slack[Mode::Late.idx()] = slack[Mode::Late.idx()].min(s);
                            tr_slack[Mode::Late.idx()][tr.idx()] =
                                tr_slack[Mode::Late.idx()][tr.idx()].min(s);
                            let pc = per_clock
                                .entry(ctx.clock)
                                .or_insert([f64::INFINITY; 2]);
                            pc[Mode::Late.idx()] = pc[Mode::Late.idx()].min(s);
                        }
                    }
                }
                // Hold side.
                let early = entry.arr[Mode::Early.idx()][tr.idx()];
                if early.is_finite() {
                    if let Some((_, v)) = o.min_delay {
                        let s = early - (launch_t + v);
                        constrained[Mode::Early.idx()] = true;
                        slack[Mode::Early.idx()] = slack[Mode::Early.idx()].min(s);
                        tr_slack[Mode::Early.idx()][tr.idx()] =
                            tr_slack[Mode::Early.idx()][tr.idx()].min(s);
                    } else {
                        for ctx in ctxs {
                            let Some(add) = ctx.hold_add[tr.idx()] else { continue };
                            let cc = &cns.clocks[ctx.clock as usize];
                            let (_, rel_h, capped) = *rel_cache
                                .entry((entry.tag.clock, entry.tag.launch_tr, ctx.clock, ctx.cap_tr))
                                .or_insert_with(|| {
                                    edge_relationship(
                                        launch_t,
                                        launch_p,
                                        cc.edge_time(ctx.cap_tr),
                                        cc.period,
                                    )
                                });
                            if capped {
                                state.hyperperiod_capped = true;
                            }
                            let follow = o.mcp_setup.map_or(0.0, |(_, n, end)| {
                                (n as f64 - 1.0) * if end { cc.period } else { launch_p }
                            });
                            let back = o.mcp_hold.map_or(0.0, |(_, n, end)| {
                                n as f64 * if end { cc.period } else { launch_p }
                            });
                            let req = launch_t + rel_h + follow - back + add;
                            let s = early - req;
                            constrained[Mode::Early.idx()] = true;
                            slack[Mode::Early.idx()] = slack[Mode::Early.idx()].min(s);
                            tr_slack[Mode::Early.idx()][tr.idx()] =
                                tr_slack[Mode::Early.idx()][tr.idx()].min(s);
                            let pc = per_clock
                                .entry(ctx.clock)
                                .or_insert([f64::INFINITY; 2]);
                            pc[Mode::Early.idx()] = pc[Mode::Early.idx()].min(s);
                        }
                    }
                }
            }
        }

        let excluded = had_tags && all_false;
        if !excluded && !constrained[0] && !constrained[1] {
            crate::log_warn!(
                "endpoint `{}` has no capture clock and no delay bound; unconstrained",
                nl.pin_full_name(ep)
            );
            state.unconstrained.push(ep);
        }
        let mut per_clock: Vec<(u32, [f64; 2])> = per_clock.into_iter().collect();
        per_clock.sort_unstable_by_key(|&(c, _)| c);
        state.endpoints.push(EndpointSlack {
            pin: ep,
            slack,
            constrained,
            excluded,
            per_clock,
            tr_slack,
        });
    }
    state.exceptions = exc;
    if state.hyperperiod_capped {
        crate::log_warn!(
            "clock pair never realigned within 64x the larger period; relationships capped"
        );
    }

    let (wns, tns) = wns_tns(state, None);
    state.wns = wns;
    state.tns = tns;
}

/// WNS/TNS per side, optionally restricted to one capture clock. One
/// contribution per endpoint (its worst retained tag).
pub fn wns_tns(state: &TimingState, clock: Option<u32>) -> ([f64; 2], [f64; 2]) {
    let mut wns = [f64::INFINITY; 2];
    let mut tns = [0.0; 2];
    for ep in &state.endpoints {
        for m in Mode::BOTH {
            let s = match clock {
                None => {
                    if !ep.constrained[m.idx()] {
                        continue;
                    }
                    ep.slack[m.idx()]
                }
                Some(c) => match ep.per_clock.iter().find(|&&(pc, _)| pc == c) {
                    Some(&(_, sl)) if sl[m.idx()].is_finite() => sl[m.idx()],
                    _ => continue,
                },
            };
            wns[m.idx()] = wns[m.idx()].min(s);
            tns[m.idx()] += s.min(0.0);
        }
    }
    (wns, tns)
}

/// Reverse min-plus required-time propagation and per-pin slacks.
pub fn backpropagate_pin_slacks(
    state: &mut TimingState,
    nl: &FlatNetlist,
    g: &TimingGraph,
    lib: &LibertyLibrary,
    del: &DelayOutputs,
) {
    let n = g.num_nodes();
    let neutral = [[f64::INFINITY; 2], [f64::NEG_INFINITY; 2]];
    let mut req: Vec<[[f64; 2]; 2]> =
        vec![[[f64::INFINITY; 2], [f64::NEG_INFINITY; 2]]; n];
    // Blind arrival extremes per node.
    let mut arr: Vec<[[f64; 2]; 2]> = vec![neutral; n];
    for v in 0..n {
        for m in Mode::BOTH {
            for tr in Edge::BOTH {
                arr[v][m.idx()][tr.idx()] = state.node_arrival(v as u32, m, tr);
            }
        }
    }
    // Flip the init convention: required late minimizes from +inf, required
    // early maximizes from -inf.
    for r in req.iter_mut() {
        r[Mode::Late.idx()] = [f64::INFINITY; 2];
        r[Mode::Early.idx()] = [f64::NEG_INFINITY; 2];
    }

    // Seeds from endpoint transition slacks: required reproduces the
    // endpoint's slack against the blind arrival.
    for ep in &state.endpoints {
        let v = ep.pin as usize;
        for tr in Edge::BOTH {
            let sl = ep.tr_slack[Mode::Late.idx()][tr.idx()];
            let a = arr[v][Mode::Late.idx()][tr.idx()];
            if sl.is_finite() && a.is_finite() {
                req[v][Mode::Late.idx()][tr.idx()] =
                    req[v][Mode::Late.idx()][tr.idx()].min(a + sl);
            }
            let sl = ep.tr_slack[Mode::Early.idx()][tr.idx()];
            let a = arr[v][Mode::Early.idx()][tr.idx()];
            if sl.is_finite() && a.is_finite() {
                req[v][Mode::Early.idx()][tr.idx()] =
                    req[v][Mode::Early.idx()][tr.idx()].max(a - sl);
            }
        }
    }

    for lvl in (0..g.num_levels as usize).rev() {
        let nodes =
            &g.level_nodes[g.level_off[lvl] as usize..g.level_off[lvl + 1] as usize];
        let results: Vec<(u32, [[f64; 2]; 2])> = nodes
            .par_iter()
            .map(|&v| {
                let mut r = req[v as usize];
                for &e in g.fanout(v) {
                    if g.disabled[e as usize]
                        || g.edge_kind[e as usize] == EdgeKind::CellCheckArc
                    {
                        continue;
                    }
                    let w = g.edge_to[e as usize] as usize;
                    for out_tr in Edge::BOTH {
                        if !del.arcs.has(e, out_tr) {
                            continue;
                        }
                        for &in_tr in in_transitions(g, nl, lib, e, out_tr) {
                            let d_late =
                                del.arcs.delay[e as usize][out_tr.idx()][Mode::Late.idx()];
                            let rl = req[w][Mode::Late.idx()][out_tr.idx()];
                            if rl.is_finite() {
                                r[Mode::Late.idx()][in_tr.idx()] =
                                    r[Mode::Late.idx()][in_tr.idx()].min(rl - d_late);
                            }
                            let d_early =
                                del.arcs.delay[e as usize][out_tr.idx()][Mode::Early.idx()];
                            let re = req[w][Mode::Early.idx()][out_tr.idx()];
                            if re.is_finite() {
                                r[Mode::Early.idx()][in_tr.idx()] =
                                    r[Mode::Early.idx()][in_tr.idx()].max(re - d_early);
                            }
                        }
                    }
                }
                (v, r)
            })
            .collect();
        for (v, r) in results {
            req[v as usize] = r;
        }
    }

    let mut pin_slack = vec![[f64::INFINITY; 2]; n];
    for v in 0..n {
        for tr in Edge::BOTH {
            let (rl, al) = (req[v][Mode::Late.idx()][tr.idx()], arr[v][Mode::Late.idx()][tr.idx()]);
            if rl.is_finite() && al.is_finite() {
                pin_slack[v][Mode::Late.idx()] = pin_slack[v][Mode::Late.idx()].min(rl - al);
            }
            let (re, ae) =
                (req[v][Mode::Early.idx()][tr.idx()], arr[v][Mode::Early.idx()][tr.idx()]);
            if re.is_finite() && ae.is_finite() {
                pin_slack[v][Mode::Early.idx()] = pin_slack[v][Mode::Early.idx()].min(ae - re);
            }
        }
    }
    state.pin_required = req;
    state.pin_arrival = arr;
    state.pin_slack = pin_slack;
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::delay::ArcTiming;
    use crate::graph::{build_graph, levelize};
    use crate::liberty::parse_liberty;
    use crate::netlist::{elaborate, NameIndex};
    use crate::sdc::eval_sdc;
    use crate::verilog::parse_verilog;

    pub(crate) const LIB: &str = r#"
library (proplib) {
  time_unit : "1ps";
  capacitive_load_unit (1, ff);
  cell (BUF) {
    pin (A) { direction : input; capacitance : 1.0; }
    pin (Y) {
      direction : output;
      function : "A";
      timing () {
        related_pin : "A";
        timing_sense : positive_unate;
        cell_rise (scalar) { values ("1"); }
        cell_fall (scalar) { values ("1"); }
        rise_transition (scalar) { values ("10"); }
        fall_transition (scalar) { values ("10"); }
      }
    }
  }
  cell (INV) {
    pin (A) { direction : input; capacitance : 1.0; }
    pin (Y) {
      direction : output;
      function : "!A";
      timing () {
        related_pin : "A";
        timing_sense : negative_unate;
        cell_rise (scalar) { values ("1"); }
        cell_fall (scalar) { values ("1"); }
        rise_transition (scalar) { values ("10"); }
        fall_transition (scalar) { values ("10"); }
      }
    }
  }
  cell (AND2) {
    pin (A) { direction : input; capacitance : 1.0; }
    pin (B) { direction : input; capacitance : 1.0; }
    pin (Y) {
      direction : output;
      function : "A * B";
      timing () {
        related_pin : "A";
        timing_sense : positive_unate;
        cell_rise (scalar) { values ("1"); }
        cell_fall (scalar) { values ("1"); }
        rise_transition (scalar) { values ("10"); }
        fall_transition (scalar) { values ("10"); }
      }
      timing () {
        related_pin : "B";
        timing_sense : positive_unate;
        cell_rise (scalar) { values ("1"); }
        cell_fall (scalar) { values ("1"); }
        rise_transition (scalar) { values ("10"); }
        fall_transition (scalar) { values ("10"); }
      }
    }
  }
  cell (DFF) {
    pin (CK) { direction : input; capacitance : 1.0; clock : true; }
    pin (D) {
      direction : input;
      capacitance : 1.0;
      timing () {
        related_pin : "CK";
        timing_type : setup_rising;
        rise_constraint (scalar) { values ("0.5"); }
        fall_constraint (scalar) { values ("0.5"); }
      }
      timing () {
        related_pin : "CK";
        timing_type : hold_rising;
        rise_constraint (scalar) { values ("0.25"); }
        fall_constraint (scalar) { values ("0.25"); }
      }
    }
    pin (Q) {
      direction : output;
      timing () {
        related_pin : "CK";
        timing_type : rising_edge;
        cell_rise (scalar) { values ("1"); }
        cell_fall (scalar) { values ("1"); }
        rise_transition (scalar) { values ("10"); }
        fall_transition (scalar) { values ("10"); }
      }
    }
  }
  cell (DFF0) {
    pin (CK) { direction : input; capacitance : 1.0; clock : true; }
    pin (D) {
      direction : input;
      capacitance : 1.0;
      timing () {
        related_pin : "CK";
        timing_type : setup_rising;
        rise_constraint (scalar) { values ("0"); }
        fall_constraint (scalar) { values ("0"); }
      }
      timing () {
        related_pin : "CK";
        timing_type : hold_rising;
        rise_constraint (scalar) { values ("0"); }
        fall_constraint (scalar) { values ("0"); }
      }
    }
    pin (Q) {
      direction : output;
      timing () {
        related_pin : "CK";
        timing_type : rising_edge;
        cell_rise (scalar) { values ("1"); }
        cell_fall (scalar) { values ("1"); }
        rise_transition (scalar) { values ("10"); }
        fall_transition (scalar) { values ("10"); }
      }
    }
  }
}
"#;

    pub(crate) struct Design {
        pub(crate) nl: FlatNetlist,
        pub(crate) lib: LibertyLibrary,
        pub(crate) g: TimingGraph,
        pub(crate) cns: Constraints,
        pub(crate) idx: NameIndex,
    }

    pub(crate) fn design(verilog: &str, sdc: &str) -> Design {
        let lib = parse_liberty(&[("p.lib", LIB.as_bytes())]).unwrap();
        let d = parse_verilog("t.v", verilog.as_bytes()).unwrap();
        let nl = elaborate(&d, "top", &lib).unwrap();
        let cns = eval_sdc(sdc, &nl, &lib).unwrap();
        let mut g = build_graph(&nl, &lib, &cns).unwrap();
        levelize(&mut g);
        let idx = NameIndex::build(&nl);
        Design { nl, lib, g, cns, idx }
    }

    impl Design {
        pub(crate) fn pin(&self, name: &str) -> u32 {
            self.idx.pin(&self.nl, name).unwrap()
        }

        /// Scalar delays per named cell arc (from pin, to pin, ps); net arcs
        /// and unlisted cell arcs get 0.
        pub(crate) fn delays(&self, table: &[(&str, &str, f64)]) -> DelayOutputs {
            let ne = self.g.num_edges();
            let mut arcs = ArcTiming {
                delay: vec![[[f64::NAN; 2]; 2]; ne],
                out_slew: vec![[10.0; 2]; ne],
            };
            for e in 0..ne {
                if self.g.edge_kind[e] == EdgeKind::CellCheckArc {
                    continue;
                }
                let mut d = 0.0;
                for &(f, t, v) in table {
                    if self.g.edge_from[e] == self.pin(f) && self.g.edge_to[e] == self.pin(t) {
                        d = v;
                    }
                }
                arcs.delay[e] = [[d, d], [d, d]];
            }
            DelayOutputs {
                arcs,
                node_slew: vec![[10.0; 2]; self.g.num_nodes()],
                net_load: vec![0.0; self.nl.num_nets()],
                sdf_unmatched: 0,
            }
        }

        pub(crate) fn run_with(&self, del: &DelayOutputs, opts: PropOptions) -> TimingState {
            let mut st =
                propagate_arrivals(&self.nl, &self.g, &self.lib, &self.cns, del, opts).unwrap();
            compute_required_and_slack(&mut st, &self.nl, &self.g, &self.lib, &self.cns, del);
            backpropagate_pin_slacks(&mut st, &self.nl, &self.g, &self.lib, del);
            st
        }

        pub(crate) fn run(&self, del: &DelayOutputs) -> TimingState {
            self.run_with(del, PropOptions::default())
        }

        fn ep<'a>(&self, st: &'a TimingState, name: &str) -> &'a EndpointSlack {
            let p = self.pin(name);
            st.endpoints.iter().find(|e| e.pin == p).unwrap()
        }
    }

    pub(crate) fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn relationship_same_period() {
        let (s, h, capped) = edge_relationship(0.0, 5.0, 0.0, 5.0);
        assert!(close(s, 5.0) && close(h, 0.0) && !capped);
        // Launch shifted into the period: capture pulls in.
        let (s, h, _) = edge_relationship(2.5, 5.0, 0.0, 5.0);
        assert!(close(s, 2.5) && close(h, -2.5));
    }

    #[test]
    fn relationship_cross_period() {
        // Launch every 4, capture every 6: tightest pair is 4 -> 6.
        let (s, h, capped) = edge_relationship(0.0, 4.0, 0.0, 6.0);
        assert!(close(s, 2.0), "{s}");
        assert!(close(h, 0.0), "{h}");
        assert!(!capped);
    }

    #[test]
    fn relationship_caps_on_incommensurate_periods() {
        let (s, _, capped) = edge_relationship(0.0, 3.0, 0.0, 2.0 * std::f64::consts::PI);
        assert!(capped);
        assert!(s > 0.0 && s.is_finite());
    }

    #[test]
    fn chain_arrival_is_path_sum() {
        let d = design(
            "module top(input a, output y);\n wire m;\n BUF u1(.A(a), .Y(m));\n BUF u2(.A(m), .Y(y));\nendmodule",
            "",
        );
        let del = d.delays(&[("u1/A", "u1/Y", 1.0), ("u2/A", "u2/Y", 2.0)]);
        let st = d.run(&del);
        for m in Mode::BOTH {
            for tr in Edge::BOTH {
                assert!(close(st.node_arrival(d.pin("y"), m, tr), 3.0));
            }
        }
    }

    #[test]
    fn diamond_keeps_late_max_and_early_min() {
        let d = design(
            "module top(input a, output y);\n wire p, q;\n BUF u1(.A(a), .Y(p));\n BUF u2(.A(a), .Y(q));\n AND2 g1(.A(p), .B(q), .Y(y));\nendmodule",
            "",
        );
        let del = d.delays(&[("u1/A", "u1/Y", 1.0), ("u2/A", "u2/Y", 5.0)]);
        let st = d.run(&del);
        assert!(close(st.node_arrival(d.pin("y"), Mode::Late, Edge::Rise), 5.0));
        assert!(close(st.node_arrival(d.pin("y"), Mode::Early, Edge::Rise), 1.0));
        // One virtual tag at the join: same clock, same bits, merged.
        assert_eq!(st.entries[d.pin("g1/Y") as usize].len(), 1);
    }

    #[test]
    fn false_path_through_splits_tags_at_join() {
        let d = design(
            "module top(input a, output y);\n wire p, q;\n BUF u1(.A(a), .Y(p));\n BUF u2(.A(a), .Y(q));\n AND2 g1(.A(p), .B(q), .Y(y));\nendmodule",
            "create_clock -period 10 -name vclk\n\
             set_output_delay 2 -clock vclk [get_ports y]\n\
             set_false_path -through [get_pins u2/Y]",
        );
        let del = d.delays(&[("u1/A", "u1/Y", 1.0), ("u2/A", "u2/Y", 5.0)]);
        let st = d.run(&del);
        // Both tags retained at the join: clean 1 ps and matched 5 ps.
        let ents = &st.entries[d.pin("g1/Y") as usize];
        assert_eq!(ents.len(), 2);
        let mut lates: Vec<f64> = ents
            .iter()
            .map(|e| e.arr[Mode::Late.idx()][Edge::Rise.idx()])
            .collect();
        lates.sort_by(f64::total_cmp);
        assert!(close(lates[0], 1.0) && close(lates[1], 5.0));
        let clean = ents.iter().find(|e| e.tag.bits == 0).unwrap();
        assert!(close(clean.arr[Mode::Late.idx()][Edge::Rise.idx()], 1.0));
        // Slack uses only the clean tag: 10 - 2 - 1.
        assert!(close(d.ep(&st, "y").slack[Mode::Late.idx()], 7.0));
    }

    #[test]
    fn reg_to_reg_applies_check_margins() {
        let d = design(
            "module top(input clk, input d, output q);\n wire n1, n2, qq;\n DFF r1(.CK(clk), .D(d), .Q(n1));\n BUF u1(.A(n1), .Y(n2));\n DFF r2(.CK(clk), .D(n2), .Q(qq));\n BUF u2(.A(qq), .Y(q));\nendmodule",
            "create_clock -period 5 [get_ports clk]",
        );
        let del = d.delays(&[("r1/CK", "r1/Q", 1.0), ("u1/A", "u1/Y", 2.0)]);
        let st = d.run(&del);
        let ep = d.ep(&st, "r2/D");
        // Setup: 0 + 5 - 0.5 - 3; hold: 3 - (0 + 0.25).
        assert!(close(ep.slack[Mode::Late.idx()], 1.5), "{}", ep.slack[1]);
        assert!(close(ep.slack[Mode::Early.idx()], 2.75), "{}", ep.slack[0]);
    }

    #[test]
    fn reg_to_reg_period_minus_delay() {
        let d = design(
            "module top(input clk, input d, output q);\n wire n1, n2, qq;\n DFF0 r1(.CK(clk), .D(d), .Q(n1));\n BUF u1(.A(n1), .Y(n2));\n DFF0 r2(.CK(clk), .D(n2), .Q(qq));\n BUF u2(.A(qq), .Y(q));\nendmodule",
            "create_clock -period 5 [get_ports clk]",
        );
        let del = d.delays(&[("r1/CK", "r1/Q", 1.0), ("u1/A", "u1/Y", 2.0)]);
        let st = d.run(&del);
        let ep = d.ep(&st, "r2/D");
        assert!(close(ep.slack[Mode::Late.idx()], 2.0));
        assert!(close(ep.slack[Mode::Early.idx()], 3.0));
        assert!(close(st.wns[Mode::Late.idx()], 2.0));
        assert!(close(st.tns[Mode::Late.idx()], 0.0));
    }

    const MCP_NETLIST: &str = "module top(input clk, input d, output q);\n wire n1, n2, qq;\n DFF0 r1(.CK(clk), .D(d), .Q(n1));\n BUF u1(.A(n1), .Y(n2));\n DFF0 r2(.CK(clk), .D(n2), .Q(qq));\n BUF u2(.A(qq), .Y(q));\nendmodule";

    #[test]
    fn multicycle_setup_opens_window_and_moves_hold_edge() {
        let d = design(
            MCP_NETLIST,
            "create_clock -period 5 [get_ports clk]\n\
             set_multicycle_path 2 -setup -from [get_clocks clk] -to [get_clocks clk]",
        );
        let del = d.delays(&[("r1/CK", "r1/Q", 1.0), ("u1/A", "u1/Y", 2.0)]);
        let st = d.run(&del);
        let ep = d.ep(&st, "r2/D");
        // Setup capture at 10; hold follows to the edge at 5.
        assert!(close(ep.slack[Mode::Late.idx()], 7.0), "{}", ep.slack[1]);
        assert!(close(ep.slack[Mode::Early.idx()], 3.0 - 5.0), "{}", ep.slack[0]);
        // The virtual-clock launch into r1/D is not touched by the exception.
        assert!(close(d.ep(&st, "r1/D").slack[Mode::Late.idx()], 5.0));
    }

    #[test]
    fn multicycle_hold_pulls_edge_back() {
        let d = design(
            MCP_NETLIST,
            "create_clock -period 5 [get_ports clk]\n\
             set_multicycle_path 2 -setup -from [get_clocks clk] -to [get_clocks clk]\n\
             set_multicycle_path 1 -hold -from [get_clocks clk] -to [get_clocks clk]",
        );
        let del = d.delays(&[("r1/CK", "r1/Q", 1.0), ("u1/A", "u1/Y", 2.0)]);
        let st = d.run(&del);
        let ep = d.ep(&st, "r2/D");
        assert!(close(ep.slack[Mode::Late.idx()], 7.0));
        // Hold edge returns to 0: slack = arrival.
        assert!(close(ep.slack[Mode::Early.idx()], 3.0), "{}", ep.slack[0]);
    }

    #[test]
    fn false_path_excludes_endpoint_from_metrics() {
        let d = design(
            MCP_NETLIST,
            "create_clock -period 5 [get_ports clk]\n\
             set_false_path -from [get_clocks clk] -to [get_clocks clk]",
        );
        let del = d.delays(&[("r1/CK", "r1/Q", 1.0), ("u1/A", "u1/Y", 2.0)]);
        let st = d.run(&del);
        assert!(d.ep(&st, "r2/D").excluded);
        // Only the unclocked-input launch into r1/D still counts.
        assert!(close(st.wns[Mode::Late.idx()], 5.0), "{}", st.wns[1]);
        assert!(close(st.tns[Mode::Late.idx()], 0.0));
    }

    #[test]
    fn max_min_delay_override_capture_relationship() {
        let d = design(
            "module top(input a, output y);\n wire p, q;\n BUF u1(.A(a), .Y(p));\n BUF u2(.A(a), .Y(q));\n AND2 g1(.A(p), .B(q), .Y(y));\nendmodule",
            "create_clock -period 10 -name vclk\n\
             set_output_delay 2 -clock vclk [get_ports y]\n\
             set_max_delay 4 -from [get_ports a] -to [get_ports y]\n\
             set_min_delay 2 -from [get_ports a] -to [get_ports y]",
        );
        let del = d.delays(&[("u1/A", "u1/Y", 1.0), ("u2/A", "u2/Y", 5.0)]);
        let st = d.run(&del);
        let ep = d.ep(&st, "y");
        assert!(close(ep.slack[Mode::Late.idx()], -1.0), "{}", ep.slack[1]);
        assert!(close(ep.slack[Mode::Early.idx()], -1.0), "{}", ep.slack[0]);
    }

    #[test]
    fn endpoints_without_capture_context_warn_unconstrained() {
        let d = design(MCP_NETLIST, "");
        let del = d.delays(&[("r1/CK", "r1/Q", 1.0)]);
        let st = d.run(&del);
        assert_eq!(st.unconstrained.len(), 2);
        assert!(st.wns[Mode::Late.idx()].is_infinite());
        assert!(st.wns[Mode::Early.idx()].is_infinite());
        assert_eq!(st.tns, [0.0, 0.0]);
    }

    #[test]
    fn wns_tns_count_one_worst_per_endpoint() {
        let mut v = String::from("module top(input clk, input d, output q0, output q1, output q2);\n");
        v.push_str(" wire a0, a1, a2, b0, b1, b2, c0, c1, c2;\n");
        for i in 0..3 {
            v.push_str(&format!(
                " DFF0 ra{i}(.CK(clk), .D(d), .Q(a{i}));\n BUF ub{i}(.A(a{i}), .Y(b{i}));\n DFF0 rc{i}(.CK(clk), .D(b{i}), .Q(c{i}));\n BUF uy{i}(.A(c{i}), .Y(q{i}));\n"
            ));
        }
        v.push_str("endmodule");
        let d = design(&v, "create_clock -period 10 [get_ports clk]");
        let del = d.delays(&[
            ("ra0/CK", "ra0/Q", 1.0),
            ("ra1/CK", "ra1/Q", 1.0),
            ("ra2/CK", "ra2/Q", 1.0),
            ("ub0/A", "ub0/Y", 10.0),
            ("ub1/A", "ub1/Y", 11.0),
            ("ub2/A", "ub2/Y", 6.0),
        ]);
        let st = d.run(&del);
        assert!(close(d.ep(&st, "rc0/D").slack[Mode::Late.idx()], -1.0));
        assert!(close(d.ep(&st, "rc1/D").slack[Mode::Late.idx()], -2.0));
        assert!(close(d.ep(&st, "rc2/D").slack[Mode::Late.idx()], 3.0));
        assert!(close(st.wns[Mode::Late.idx()], -2.0));
        assert!(close(st.tns[Mode::Late.idx()], -3.0));
    }

    #[test]
    fn input_delay_seeds_min_max_separately() {
        let d = design(
            "module top(input clk, input d, output q);\n wire qq;\n DFF0 r1(.CK(clk), .D(d), .Q(qq));\n BUF u2(.A(qq), .Y(q));\nendmodule",
            "create_clock -period 10 [get_ports clk]\n\
             set_input_delay -max 3 -clock clk [get_ports d]\n\
             set_input_delay -min 1 -clock clk [get_ports d]",
        );
        let del = d.delays(&[]);
        let st = d.run(&del);
        assert!(close(st.node_arrival(d.pin("d"), Mode::Late, Edge::Rise), 3.0));
        assert!(close(st.node_arrival(d.pin("d"), Mode::Early, Edge::Rise), 1.0));
        let ep = d.ep(&st, "r1/D");
        assert!(close(ep.slack[Mode::Late.idx()], 7.0));
        assert!(close(ep.slack[Mode::Early.idx()], 1.0));
        assert_eq!(st.unclocked_inputs, 0);
    }

    #[test]
    fn clock_fall_input_delay_launches_from_falling_edge() {
        let d = design(
            "module top(input clk, input d, output q);\n wire qq;\n DFF0 r1(.CK(clk), .D(d), .Q(qq));\n BUF u2(.A(qq), .Y(q));\nendmodule",
            "create_clock -period 10 [get_ports clk]\n\
             set_input_delay 2 -clock clk -clock_fall [get_ports d]",
        );
        let del = d.delays(&[]);
        let st = d.run(&del);
        // Launch edge 5, value 2.
        assert!(close(st.node_arrival(d.pin("d"), Mode::Late, Edge::Rise), 7.0));
        let ep = d.ep(&st, "r1/D");
        // Capture at 10 relative to the falling launch at 5.
        assert!(close(ep.slack[Mode::Late.idx()], 3.0), "{}", ep.slack[1]);
        assert!(close(ep.slack[Mode::Early.idx()], 7.0), "{}", ep.slack[0]);
    }

    #[test]
    fn output_delay_sets_required_both_sides() {
        let d = design(
            "module top(input a, output y);\n BUF u1(.A(a), .Y(y));\nendmodule",
            "create_clock -period 10 -name vclk\n\
             set_output_delay 2 -clock vclk [get_ports y]",
        );
        let del = d.delays(&[("u1/A", "u1/Y", 3.0)]);
        let st = d.run(&del);
        let ep = d.ep(&st, "y");
        // Setup: 10 - 2 - 3; hold: 3 - (0 - 2).
        assert!(close(ep.slack[Mode::Late.idx()], 5.0));
        assert!(close(ep.slack[Mode::Early.idx()], 5.0));
    }

    #[test]
    fn inverted_clock_launches_from_opposite_edge() {
        let d = design(
            "module top(input clk, input d, output q);\n wire ckb, q1, n2, qq;\n INV u0(.A(clk), .Y(ckb));\n DFF0 r1(.CK(ckb), .D(d), .Q(q1));\n BUF u1(.A(q1), .Y(n2));\n DFF0 r2(.CK(clk), .D(n2), .Q(qq));\n BUF u2(.A(qq), .Y(q));\nendmodule",
            "create_clock -period 10 [get_ports clk]",
        );
        let del = d.delays(&[("r1/CK", "r1/Q", 1.0), ("u1/A", "u1/Y", 2.0)]);
        let st = d.run(&del);
        // r1 clocks on the inverted net: its rising edge is the source fall
        // at 5 ps, so data reaches r2/D at 8 against capture at 10.
        let ep = d.ep(&st, "r2/D");
        assert!(close(ep.slack[Mode::Late.idx()], 2.0), "{}", ep.slack[1]);
        assert!(close(ep.slack[Mode::Early.idx()], 8.0), "{}", ep.slack[0]);
        let launch: Vec<Edge> = st.entries[d.pin("r2/D") as usize]
            .iter()
            .map(|e| e.tag.launch_tr)
            .collect();
        assert_eq!(launch, vec![Edge::Fall]);
    }

    #[test]
    fn cross_clock_relationship_and_per_clock_metrics() {
        let d = design(
            "module top(input c1, input c2, input d, output q);\n wire q1, qq;\n DFF0 r1(.CK(c1), .D(d), .Q(q1));\n DFF0 r2(.CK(c2), .D(q1), .Q(qq));\n BUF u2(.A(qq), .Y(q));\nendmodule",
            "create_clock -period 4 [get_ports c1]\n\
             create_clock -period 6 [get_ports c2]",
        );
        let del = d.delays(&[("r1/CK", "r1/Q", 1.0)]);
        let st = d.run(&del);
        let ep = d.ep(&st, "r2/D");
        assert!(close(ep.slack[Mode::Late.idx()], 1.0), "{}", ep.slack[1]);
        assert!(close(ep.slack[Mode::Early.idx()], 1.0), "{}", ep.slack[0]);
        assert!(!st.hyperperiod_capped);
        // Per-capture-clock filter: c2 sees the cross-domain path, c1 the
        // virtual-input launch into r1/D.
        let (w2, _) = wns_tns(&st, Some(1));
        assert!(close(w2[Mode::Late.idx()], 1.0));
        let (w1, _) = wns_tns(&st, Some(0));
        assert!(close(w1[Mode::Late.idx()], 2.0), "{}", w1[1]);
    }

    #[test]
    fn incommensurate_clocks_cap_and_flag() {
        let d = design(
            "module top(input c1, input c2, input d, output q);\n wire q1, qq;\n DFF0 r1(.CK(c1), .D(d), .Q(q1));\n DFF0 r2(.CK(c2), .D(q1), .Q(qq));\n BUF u2(.A(qq), .Y(q));\nendmodule",
            "create_clock -period 3 [get_ports c1]\n\
             create_clock -period 6.2831853 [get_ports c2]",
        );
        let del = d.delays(&[("r1/CK", "r1/Q", 1.0)]);
        let st = d.run(&del);
        assert!(st.hyperperiod_capped);
        let ep = d.ep(&st, "r2/D");
        assert!(ep.slack[Mode::Late.idx()].is_finite());
    }

    #[test]
    fn case_analysis_removes_constant_side() {
        let d = design(
            "module top(input a, input b, output y);\n wire p, q;\n BUF u1(.A(a), .Y(p));\n BUF u2(.A(b), .Y(q));\n AND2 g1(.A(p), .B(q), .Y(y));\nendmodule",
            "set_case_analysis 1 [get_ports b]",
        );
        let del = d.delays(&[("u1/A", "u1/Y", 1.0), ("u2/A", "u2/Y", 5.0)]);
        let st = d.run(&del);
        assert!(close(st.node_arrival(d.pin("y"), Mode::Late, Edge::Rise), 1.0));
        assert_eq!(st.entries[d.pin("g1/Y") as usize].len(), 1);
    }

    #[test]
    fn pruning_toggle_preserves_endpoint_slacks() {
        let d = design(
            "module top(input a, output y);\n wire p, q;\n BUF u1(.A(a), .Y(p));\n BUF u2(.A(a), .Y(q));\n AND2 g1(.A(p), .B(q), .Y(y));\nendmodule",
            "create_clock -period 10 -name vclk\n\
             set_output_delay 2 -clock vclk [get_ports y]",
        );
        let del = d.delays(&[("u1/A", "u1/Y", 1.0), ("u2/A", "u2/Y", 5.0)]);
        let merged = d.run_with(&del, PropOptions { prune: true });
        let raw = d.run_with(&del, PropOptions { prune: false });
        assert_eq!(merged.entries[d.pin("g1/Y") as usize].len(), 1);
        assert!(raw.entries[d.pin("g1/Y") as usize].len() > 1);
        for (a, b) in merged.endpoints.iter().zip(raw.endpoints.iter()) {
            assert_eq!(a.pin, b.pin);
            assert!(close(a.slack[0], b.slack[0]) && close(a.slack[1], b.slack[1]));
        }
    }

    #[test]
    fn tag_budget_overflow_merges_conservatively() {
        // Six chained diamonds, each with a false path through its slow arm:
        // 64 distinct exception states converge on the last join.
        let mut v = String::from("module top(input a, output y);\n");
        let mut sdc = String::from(
            "create_clock -period 100 -name vclk\n set_output_delay 1 -clock vclk [get_ports y]\n",
        );
        let mut wires = Vec::new();
        for i in 0..6 {
            wires.push(format!("p{i}"));
            wires.push(format!("q{i}"));
            wires.push(format!("j{i}"));
        }
        v.push_str(&format!(" wire {};\n", wires.join(", ")));
        let mut src = "a".to_string();
        let mut table = Vec::new();
        for i in 0..6 {
            v.push_str(&format!(
                " BUF bf{i}(.A({src}), .Y(p{i}));\n BUF bs{i}(.A({src}), .Y(q{i}));\n AND2 gj{i}(.A(p{i}), .B(q{i}), .Y(j{i}));\n"
            ));
            sdc.push_str(&format!("set_false_path -through [get_pins bs{i}/Y]\n"));
            table.push((format!("bf{i}/A"), format!("bf{i}/Y"), 1.0));
            table.push((format!("bs{i}/A"), format!("bs{i}/Y"), 5.0));
            src = format!("j{i}");
        }
        v.push_str(&format!(" BUF uo(.A({src}), .Y(y));\nendmodule"));
        let d = design(&v, &sdc);
        let refs: Vec<(&str, &str, f64)> =
            table.iter().map(|(a, b, v)| (a.as_str(), b.as_str(), *v)).collect();
        let del = d.delays(&refs);

        let exact = d.run_with(&del, PropOptions { prune: false });
        let capped = d.run_with(&del, PropOptions { prune: true });
        // Exact: only the all-clean path is retained, 6 ps of buffers.
        assert!(close(d.ep(&exact, "y").slack[Mode::Late.idx()], 93.0));
        assert!(capped.capped_nodes > 0);
        // Pessimistic merging may only tighten the reported slack.
        assert!(
            d.ep(&capped, "y").slack[Mode::Late.idx()]
                <= d.ep(&exact, "y").slack[Mode::Late.idx()] + 1e-9
        );
    }

    #[test]
    fn backprop_single_chain_carries_endpoint_slack() {
        let d = design(
            "module top(input a, input z, output y);\n wire m;\n BUF u1(.A(a), .Y(m));\n BUF u2(.A(m), .Y(y));\nendmodule",
            "create_clock -period 10 -name vclk\n\
             set_output_delay 2 -clock vclk [get_ports y]",
        );
        let del = d.delays(&[("u1/A", "u1/Y", 1.0), ("u2/A", "u2/Y", 2.0)]);
        let st = d.run(&del);
        for p in ["a", "u1/A", "u1/Y", "u2/A", "u2/Y", "y"] {
            let s = st.pin_slack[d.pin(p) as usize];
            assert!(close(s[Mode::Late.idx()], 5.0), "{p}: {}", s[1]);
            assert!(close(s[Mode::Early.idx()], 5.0), "{p}: {}", s[0]);
        }
        // A pin on no path to any endpoint keeps the sentinel.
        assert!(st.pin_slack[d.pin("z") as usize][Mode::Late.idx()].is_infinite());
    }

    #[test]
    fn backprop_fork_takes_worst_endpoint() {
        let d = design(
            "module top(input a, output y1, output y2);\n wire m;\n BUF u0(.A(a), .Y(m));\n BUF u1(.A(m), .Y(y1));\n BUF u2(.A(m), .Y(y2));\nendmodule",
            "create_clock -period 10 -name vclk\n\
             set_output_delay 6 -clock vclk [get_ports y1]\n\
             set_output_delay 6 -clock vclk [get_ports y2]",
        );
        let del = d.delays(&[
            ("u0/A", "u0/Y", 1.0),
            ("u1/A", "u1/Y", 2.0),
            ("u2/A", "u2/Y", 7.0),
        ]);
        let st = d.run(&del);
        assert!(close(d.ep(&st, "y1").slack[Mode::Late.idx()], 1.0));
        assert!(close(d.ep(&st, "y2").slack[Mode::Late.idx()], -4.0));
        let late = |p: &str| st.pin_slack[d.pin(p) as usize][Mode::Late.idx()];
        assert!(close(late("a"), -4.0));
        assert!(close(late("u0/Y"), -4.0));
        assert!(close(late("u1/A"), 1.0));
        assert!(close(late("u2/A"), -4.0));
        assert!(close(late("y1"), 1.0));
        assert!(close(late("y2"), -4.0));
    }

    #[test]
    fn results_identical_across_thread_counts() {
        let d = design(
            MCP_NETLIST,
            "create_clock -period 5 [get_ports clk]\n\
             set_multicycle_path 2 -setup -from [get_clocks clk] -to [get_clocks clk]",
        );
        let del = d.delays(&[("r1/CK", "r1/Q", 1.0), ("u1/A", "u1/Y", 2.0)]);
        let snap = |st: &TimingState| {
            let mut out: Vec<u64> = Vec::new();
            for ents in &st.entries {
                out.push(ents.len() as u64);
                for e in ents {
                    out.push(e.tag.clock as u64);
                    out.push(e.tag.bits);
                    for m in Mode::BOTH {
                        for tr in Edge::BOTH {
                            out.push(e.arr[m.idx()][tr.idx()].to_bits());
                        }
                    }
                }
            }
            for ep in &st.endpoints {
                out.push(ep.pin as u64);
                out.push(ep.slack[0].to_bits());
                out.push(ep.slack[1].to_bits());
            }
            for s in &st.pin_slack {
                out.push(s[0].to_bits());
                out.push(s[1].to_bits());
            }
            out
        };
        let mut snaps = Vec::new();
        for n in [1usize, 2, 4] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            let st = pool.install(|| d.run(&del));
            snaps.push(snap(&st));
        }
        assert_eq!(snaps[0], snaps[1]);
        assert_eq!(snaps[0], snaps[2]);
    }
}
