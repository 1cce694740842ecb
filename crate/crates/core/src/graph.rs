//! Timing graph over netlist pins: net arcs (driver to sink), cell delay
//! arcs, and cell check arcs, with CSR fanin/fanout, case-analysis constant
//! propagation, disable handling, and Kahn levelization with deterministic
//! combinational-loop breaking.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::liberty::{LibertyLibrary, PinDir, TimingArc};
use crate::netlist::{FlatNetlist, NO_DRIVER};
use crate::sdc::{Constraints, Disable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    NetArc,
    CellDelayArc,
    CellCheckArc,
}

#[derive(Debug, Clone, Default)]
pub struct TimingGraph {
    pub edge_from: Vec<u32>,
    pub edge_to: Vec<u32>,
    pub edge_kind: Vec<EdgeKind>,
    /// NetArc: the net id. Cell arcs: arc index within the owning lib cell.
    pub edge_arc: Vec<u32>,
    pub disabled: Vec<bool>,

    pub csr_fanout_off: Vec<u32>,
    pub csr_fanout: Vec<u32>,
    pub csr_fanin_off: Vec<u32>,
    pub csr_fanin: Vec<u32>,

    /// Filled by `levelize`.
    pub level: Vec<u32>,
    pub num_levels: u32,
    pub level_off: Vec<u32>,
    pub level_nodes: Vec<u32>,

    /// Case-analysis constant per pin (ties, SDC case values, propagation).
    pub pin_const: Vec<Option<bool>>,
}

impl TimingGraph {
    pub fn num_nodes(&self) -> usize {
        self.pin_const.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_from.len()
    }

    /// Outgoing edge ids of a node, ascending.
    pub fn fanout(&self, node: u32) -> &[u32] {
        let a = self.csr_fanout_off[node as usize] as usize;
        let b = self.csr_fanout_off[node as usize + 1] as usize;
        &self.csr_fanout[a..b]
    }

    /// Incoming edge ids of a node, ascending.
    pub fn fanin(&self, node: u32) -> &[u32] {
        let a = self.csr_fanin_off[node as usize] as usize;
        let b = self.csr_fanin_off[node as usize + 1] as usize;
        &self.csr_fanin[a..b]
    }

    /// The Liberty arc behind a cell delay/check edge.
    pub fn lib_arc<'l>(
        &self,
        nl: &FlatNetlist,
        lib: &'l LibertyLibrary,
        edge: u32,
    ) -> &'l TimingArc {
        debug_assert_ne!(self.edge_kind[edge as usize], EdgeKind::NetArc);
        let owner = nl.pin_owner[self.edge_to[edge as usize] as usize];
        let cell = &lib.cells[nl.cell_lib[owner as usize] as usize];
        &cell.arcs[self.edge_arc[edge as usize] as usize]
    }

    fn counts_for_levelize(&self, e: usize) -> bool {
        !self.disabled[e] && self.edge_kind[e] != EdgeKind::CellCheckArc
    }
}

/// Forward constant propagation from netlist ties and SDC case values:
/// a net takes its driver's constant, a cell output becomes constant when
/// its pin function collapses under the known inputs. Runs to fixpoint.
pub fn apply_case_analysis(
    nl: &FlatNetlist,
    lib: &LibertyLibrary,
    constraints: &Constraints,
) -> Result<Vec<Option<bool>>> {
    let mut val: Vec<Option<bool>> = vec![None; nl.num_pins()];
    let set = |val: &mut Vec<Option<bool>>, pin: u32, v: bool| -> Result<bool> {
        match val[pin as usize] {
            Some(prev) if prev != v => Err(Error::semantic(format!(
                "contradictory constants on pin `{}`",
                nl.pin_full_name(pin)
            ))),
            Some(_) => Ok(false),
            None => {
                val[pin as usize] = Some(v);
                Ok(true)
            }
        }
    };

    for &(pin, v) in &nl.constants {
        set(&mut val, pin, v)?;
    }
    for cv in &constraints.case_values {
        set(&mut val, cv.pin, cv.value)?;
    }

    loop {
        let mut changed = false;
        // Nets: driver value reaches every sink.
        for net in 0..nl.num_nets() as u32 {
            let d = nl.net_driver[net as usize];
            if d == NO_DRIVER {
                continue;
            }
            if let Some(v) = val[d as usize] {
                for &p in nl.net_pins(net) {
                    if p != d {
                        changed |= set(&mut val, p, v)?;
                    }
                }
            }
        }
        // Cells: output functions collapse under known inputs.
        for cell in 0..nl.num_cells() as u32 {
            let lc = &lib.cells[nl.cell_lib[cell as usize] as usize];
            let pins = nl.cell_pins(cell);
            for &p in pins {
                let lp = &lc.pins[nl.pin_lib[p as usize] as usize];
                if lp.direction != PinDir::Output {
                    continue;
                }
                let Some(func) = &lp.function else { continue };
                if val[p as usize].is_some() {
                    continue;
                }
                let lookup = |name: &str| -> Option<bool> {
                    pins.iter()
                        .find(|&&q| lc.pins[nl.pin_lib[q as usize] as usize].name == name)
                        .and_then(|&q| val[q as usize])
                };
                if let Some(v) = func.eval(&lookup) {
                    changed |= set(&mut val, p, v)?;
                }
            }
        }
        if !changed {
            return Ok(val);
        }
    }
}

/// Build the arc graph: one net arc per (driver, sink), one edge per Liberty
/// delay/check arc instance. Edges are disabled by `set_disable_timing`, by
/// constant pins, and by `when` guards falsified under case analysis.
pub fn build_graph(
    nl: &FlatNetlist,
    lib: &LibertyLibrary,
    constraints: &Constraints,
) -> Result<TimingGraph> {
    let pin_const = apply_case_analysis(nl, lib, constraints)?;

    let mut g = TimingGraph { pin_const, ..TimingGraph::default() };

    // Net arcs in net id order, sinks in pin id order.
    for net in 0..nl.num_nets() as u32 {
        let d = nl.net_driver[net as usize];
        if d == NO_DRIVER {
            continue;
        }
        for &p in nl.net_pins(net) {
            if p == d {
                continue;
            }
            g.edge_from.push(d);
            g.edge_to.push(p);
            g.edge_kind.push(EdgeKind::NetArc);
            g.edge_arc.push(net);
        }
    }

    // Cell arcs in (cell id, arc index) order.
    let mut missing_arc_pins = 0u64;
    for cell in 0..nl.num_cells() as u32 {
        let lc = &lib.cells[nl.cell_lib[cell as usize] as usize];
        let mut to_netlist = vec![u32::MAX; lc.pins.len()];
        for &p in nl.cell_pins(cell) {
            to_netlist[nl.pin_lib[p as usize] as usize] = p;
        }
        for (ai, arc) in lc.arcs.iter().enumerate() {
            let from = to_netlist[arc.from_pin as usize];
            let to = to_netlist[arc.to_pin as usize];
            if from == u32::MAX || to == u32::MAX {
                missing_arc_pins += 1;
                continue;
            }
            g.edge_from.push(from);
            g.edge_to.push(to);
            g.edge_kind.push(if arc.kind.is_check() {
                EdgeKind::CellCheckArc
            } else {
                EdgeKind::CellDelayArc
            });
            g.edge_arc.push(ai as u32);
        }
    }
    if missing_arc_pins > 0 {
        crate::log_warn!("{missing_arc_pins} timing arcs reference pins absent from the netlist");
    }

    // Disable rules.
    let n_edges = g.num_edges();
    g.disabled = vec![false; n_edges];

    let mut disabled_pins: HashSet<u32> = HashSet::new();
    for d in &constraints.disables {
        if let Disable::Pin(p) = d {
            disabled_pins.insert(*p);
        }
    }
    for e in 0..n_edges {
        let (from, to) = (g.edge_from[e], g.edge_to[e]);
        if g.pin_const[from as usize].is_some() || g.pin_const[to as usize].is_some() {
            g.disabled[e] = true;
            continue;
        }
        if disabled_pins.contains(&from) || disabled_pins.contains(&to) {
            g.disabled[e] = true;
            continue;
        }
        if g.edge_kind[e] != EdgeKind::NetArc {
            let owner = nl.pin_owner[to as usize];
            let lc = &lib.cells[nl.cell_lib[owner as usize] as usize];
            let arc = &lc.arcs[g.edge_arc[e] as usize];
            for d in &constraints.disables {
                if let Disable::Cell { cell, from: df, to: dt } = d {
                    if *cell == owner
                        && df.as_deref().map_or(true, |n| lc.pins[arc.from_pin as usize].name == n)
                        && dt.as_deref().map_or(true, |n| lc.pins[arc.to_pin as usize].name == n)
                    {
                        g.disabled[e] = true;
                    }
                }
            }
            if g.disabled[e] {
                continue;
            }
            // `when` guard falsified by case constants on this instance.
            if let Some(when) = &arc.when {
                let pins = nl.cell_pins(owner);
                let lookup = |name: &str| -> Option<bool> {
                    pins.iter()
                        .find(|&&q| lc.pins[nl.pin_lib[q as usize] as usize].name == name)
                        .and_then(|&q| g.pin_const[q as usize])
                };
                if when.eval(&lookup) == Some(false) {
                    g.disabled[e] = true;
                }
            }
        }
    }

    // Unconnected pins: floating non-driver pins and childless drivers.
    let mut unconnected = 0u64;
    for p in 0..nl.num_pins() as u32 {
        let net = nl.pin_net[p as usize];
        if nl.pin_is_driver(p) {
            if nl.net_pins(net).len() == 1 {
                unconnected += 1;
            }
        } else if nl.net_driver[net as usize] == NO_DRIVER
            && g.pin_const[p as usize].is_none()
        {
            unconnected += 1;
        }
    }
    if unconnected > 0 {
        crate::log_warn!("{unconnected} unconnected pins");
    }

    // CSR adjacency (edge ids ascending within each node).
    let n_nodes = nl.num_pins();
    let mut fo_cnt = vec![0u32; n_nodes + 1];
    let mut fi_cnt = vec![0u32; n_nodes + 1];
    for e in 0..n_edges {
        fo_cnt[g.edge_from[e] as usize + 1] += 1;
        fi_cnt[g.edge_to[e] as usize + 1] += 1;
    }
    for i in 1..=n_nodes {
        fo_cnt[i] += fo_cnt[i - 1];
        fi_cnt[i] += fi_cnt[i - 1];
    }
    g.csr_fanout_off = fo_cnt.clone();
    g.csr_fanin_off = fi_cnt.clone();
    g.csr_fanout = vec![0; n_edges];
    g.csr_fanin = vec![0; n_edges];
    let (mut fo_cur, mut fi_cur) = (fo_cnt, fi_cnt);
    for e in 0..n_edges as u32 {
        let f = g.edge_from[e as usize] as usize;
        let t = g.edge_to[e as usize] as usize;
        g.csr_fanout[fo_cur[f] as usize] = e;
        fo_cur[f] += 1;
        g.csr_fanin[fi_cur[t] as usize] = e;
        fi_cur[t] += 1;
    }

    g.level = vec![0; n_nodes];
    Ok(g)
}

/// Kahn levelization over enabled non-check edges. Combinational cycles are
/// broken by disabling, per strongly-connected component, the enabled edge
/// with the smallest id, with one warning per broken edge; then re-run.
pub fn levelize(g: &mut TimingGraph) {
    let n = g.num_nodes();
    loop {
        let mut indeg = vec![0u32; n];
        for e in 0..g.num_edges() {
            if g.counts_for_levelize(e) {
                indeg[g.edge_to[e] as usize] += 1;
            }
        }
        let mut level = vec![0u32; n];
        let mut done = vec![false; n];
        let mut frontier: Vec<u32> =
            (0..n as u32).filter(|&v| indeg[v as usize] == 0).collect();
        let mut processed = 0usize;
        while !frontier.is_empty() {
            processed += frontier.len();
            let mut next = Vec::new();
            for &u in &frontier {
                done[u as usize] = true;
                for &e in g.fanout(u) {
                    if !g.counts_for_levelize(e as usize) {
                        continue;
                    }
                    let v = g.edge_to[e as usize];
                    let cand = level[u as usize] + 1;
                    if cand > level[v as usize] {
                        level[v as usize] = cand;
                    }
                    indeg[v as usize] -= 1;
                    if indeg[v as usize] == 0 {
                        next.push(v);
                    }
                }
            }
            next.sort_unstable();
            next.dedup();
            frontier = next;
        }
        if processed == n {
            g.level = level;
            break;
        }
        // Cycle: break one edge per SCC among the unfinished nodes.
        let broken = break_cycles(g, &done);
        debug_assert!(broken > 0, "levelize stuck without progress");
    }

    g.num_levels = g.level.iter().copied().max().map_or(0, |m| m + 1);
    let mut off = vec![0u32; g.num_levels as usize + 1];
    for &l in &g.level {
        off[l as usize + 1] += 1;
    }
    for i in 1..off.len() {
        off[i] += off[i - 1];
    }
    g.level_off = off.clone();
    let mut cur = off;
    g.level_nodes = vec![0; n];
    for v in 0..n as u32 {
        let l = g.level[v as usize] as usize;
        g.level_nodes[cur[l] as usize] = v;
        cur[l] += 1;
    }
}

/// Tarjan SCCs over the unfinished subgraph; disable the smallest enabled
/// edge id inside each non-trivial component. Returns edges disabled.
fn break_cycles(g: &mut TimingGraph, done: &[bool]) -> usize {
    let n = g.num_nodes();
    let mut index = vec![u32::MAX; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut next_index = 0u32;
    let mut comp = vec![u32::MAX; n];
    let mut n_comp = 0u32;

    // Iterative Tarjan: (node, fanout position) call frames.
    let mut frames: Vec<(u32, usize)> = Vec::new();
    for start in 0..n as u32 {
        if done[start as usize] || index[start as usize] != u32::MAX {
            continue;
        }
        frames.push((start, 0));
        while let Some(&(v, mut pos)) = frames.last() {
            if pos == 0 {
                index[v as usize] = next_index;
                low[v as usize] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v as usize] = true;
            }
            let fan = g.fanout(v);
            let mut descend: Option<u32> = None;
            while pos < fan.len() {
                let e = fan[pos] as usize;
                pos += 1;
                if !g.counts_for_levelize(e) {
                    continue;
                }
                let w = g.edge_to[e];
                if done[w as usize] {
                    continue;
                }
                if index[w as usize] == u32::MAX {
                    descend = Some(w);
                    break;
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
            }
            frames.last_mut().unwrap().1 = pos;
            if let Some(w) = descend {
                frames.push((w, 0));
                continue;
            }
            // v finished: pop frame, propagate low, maybe emit component.
            frames.pop();
            if let Some(&(parent, _)) = frames.last() {
                low[parent as usize] = low[parent as usize].min(low[v as usize]);
            }
            if low[v as usize] == index[v as usize] {
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w as usize] = false;
                    comp[w as usize] = n_comp;
                    if w == v {
                        break;
                    }
                }
                n_comp += 1;
            }
        }
    }

    // Smallest enabled internal edge per component with ≥ 2 nodes.
    let mut comp_size = vec![0u32; n_comp as usize];
    for v in 0..n {
        if comp[v] != u32::MAX {
            comp_size[comp[v] as usize] += 1;
        }
    }
    let mut pick = vec![u32::MAX; n_comp as usize];
    for e in 0..g.num_edges() {
        if !g.counts_for_levelize(e) {
            continue;
        }
        let (f, t) = (g.edge_from[e] as usize, g.edge_to[e] as usize);
        if done[f] || done[t] || comp[f] != comp[t] {
            continue;
        }
        let c = comp[f] as usize;
        if comp_size[c] >= 2 && pick[c] == u32::MAX {
            pick[c] = e as u32; // edge ids scanned ascending
        }
    }
    let mut broken = 0;
    for e in pick {
        if e != u32::MAX {
            g.disabled[e as usize] = true;
            broken += 1;
            crate::log_warn!(
                "combinational loop: disabling edge {e} ({} -> {})",
                g.edge_from[e as usize],
                g.edge_to[e as usize]
            );
        }
    }
    broken
}
