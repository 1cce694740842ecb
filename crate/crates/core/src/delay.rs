//! Arc delay and slew computation: NLDM table lookups for cell arcs,
//! Elmore or reduced-order models for net arcs, evaluated level by level so
//! each arc sees its input slew. SDF annotations, when given, replace the
//! computed delays (never the slews).

use std::collections::HashMap;

use rayon::prelude::*;

use crate::arnoldi::{arnoldi_delay, arnoldi_reduce, ReducedModel};
use crate::error::Result;
use crate::graph::{EdgeKind, TimingGraph};
use crate::liberty::{ArcKind, LibertyLibrary, Lut2D, Sense, TimingArc};
use crate::mode::{Edge, Mode};
use crate::netlist::{FlatNetlist, NameIndex, NO_DRIVER};
use crate::rc::{RcStore, RcTree};
use crate::sdc::Constraints;
use crate::sdf::{SdfData, SdfEntry, SdfTriple};

/// ln 9: converts a first-moment delay into a 20–80 impulse width.
pub const LN9: f64 = 2.197_224_577_336_219_6;

/// Slews never collapse below this (ps); keeps downstream lookups sane.
pub const MIN_SLEW: f64 = 1e-3;

/// Interpolate / extrapolate one axis: bracketing segment index and the
/// (unclamped) barycentric coordinate. A one-point axis is constant.
fn axis_pos(xs: &[f64], x: f64) -> (usize, f64) {
    if xs.len() < 2 {
        return (0, 0.0);
    }
    // Highest segment whose left knot is ≤ x, clamped to a real segment;
    // evaluating its linear form outside the knots is exactly the
    // boundary-cell gradient extension.
    let mut i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(k) => k,
        Err(k) => k.saturating_sub(1),
    };
    i = i.min(xs.len() - 2);
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    (i, t)
}

/// NLDM lookup at (input slew ps, load fF). Bilinear inside the grid,
/// boundary-cell gradient extension outside, degenerate axes constant.
pub fn lut_eval(t: &Lut2D, slew: f64, cap: f64) -> f64 {
    let (i, u) = axis_pos(&t.index_1, slew);
    let (j, v) = axis_pos(&t.index_2, cap);
    let cols = t.cols();
    let rows = t.rows();
    let at = |r: usize, c: usize| t.values[r.min(rows - 1) * cols + c.min(cols - 1)];
    let v00 = at(i, j);
    let v10 = at(i + 1, j);
    let v01 = at(i, j + 1);
    let v11 = at(i + 1, j + 1);
    (1.0 - u) * (1.0 - v) * v00 + u * (1.0 - v) * v10 + (1.0 - u) * v * v01 + u * v * v11
}

/// Per-node Elmore results over one tree.
#[derive(Debug, Clone)]
pub struct ElmoreDelays {
    pub delay: Vec<f64>,
    /// 20–80 impulse width, ln 9 × delay.
    pub impulse: Vec<f64>,
}

/// Classic Elmore: downstream capacitance per branch (upward pass), then
/// delay accumulation from the root (downward pass). O(n).
pub fn elmore(tree: &RcTree) -> ElmoreDelays {
    let n = tree.order.len();
    let mut cdown = tree.cap.clone();
    for &v in tree.order.iter().rev() {
        let p = tree.parent[v as usize];
        if p != v {
            cdown[p as usize] += cdown[v as usize];
        }
    }
    let mut delay = vec![0.0; n];
    for &v in tree.order.iter() {
        let p = tree.parent[v as usize];
        if p != v {
            delay[v as usize] =
                delay[p as usize] + tree.parent_res[v as usize] * cdown[v as usize];
        }
    }
    let impulse = delay.iter().map(|d| LN9 * d).collect();
    ElmoreDelays { delay, impulse }
}

/// Root-sum-square slew degradation through a net.
pub fn net_slew(drv_slew: f64, impulse: f64) -> f64 {
    (drv_slew * drv_slew + impulse * impulse).sqrt()
}

/// One output transition of a cell arc: delay per mode plus the slew it
/// launches downstream.
#[derive(Debug, Clone, Copy)]
pub struct EdgeOut {
    pub delay: [f64; 2],
    pub slew: f64,
}

/// Evaluate a delay arc at (input slew per transition, load). Unateness
/// picks which input transition feeds each output transition; non-unate
/// arcs fold both (max for late, min for early, slew pessimistic).
pub fn cell_arc(arc: &TimingArc, in_slew: [f64; 2], load: f64) -> [Option<EdgeOut>; 2] {
    let feeds = |out: Edge| -> &'static [Edge] {
        match arc.kind {
            ArcKind::RisingEdgeClkToQ => &[Edge::Rise],
            ArcKind::FallingEdgeClkToQ => &[Edge::Fall],
            _ => match arc.sense {
                Sense::PositiveUnate => {
                    if out == Edge::Rise {
                        &[Edge::Rise]
                    } else {
                        &[Edge::Fall]
                    }
                }
                Sense::NegativeUnate => {
                    if out == Edge::Rise {
                        &[Edge::Fall]
                    } else {
                        &[Edge::Rise]
                    }
                }
                Sense::NonUnate => &Edge::BOTH,
            },
        }
    };
    let mut out = [None, None];
    if arc.kind.is_check() {
        return out;
    }
    for oe in Edge::BOTH {
        let (cell_tbl, tran_tbl) = match oe {
            Edge::Rise => (&arc.cell_rise, &arc.rise_transition),
            Edge::Fall => (&arc.cell_fall, &arc.fall_transition),
        };
        let Some(cell_tbl) = cell_tbl else { continue };
        let mut late = f64::NEG_INFINITY;
        let mut early = f64::INFINITY;
        let mut slew = f64::NEG_INFINITY;
        for &ie in feeds(oe) {
            let d = lut_eval(cell_tbl, in_slew[ie.idx()], load).max(0.0);
            late = late.max(d);
            early = early.min(d);
            let s = match tran_tbl {
                Some(t) => lut_eval(t, in_slew[ie.idx()], load),
                None => in_slew[ie.idx()],
            };
            slew = slew.max(s);
        }
        out[oe.idx()] = Some(EdgeOut {
            delay: [early, late],
            slew: slew.max(MIN_SLEW),
        });
    }
    out
}

/// Per-graph-edge timing. `delay[edge][transition][mode]`; a NaN pair marks
/// a transition the arc cannot produce.
#[derive(Debug, Clone, Default)]
pub struct ArcTiming {
    pub delay: Vec<[[f64; 2]; 2]>,
    pub out_slew: Vec<[f64; 2]>,
}

impl ArcTiming {
    pub fn has(&self, edge: u32, tr: Edge) -> bool {
        !self.delay[edge as usize][tr.idx()][Mode::Late.idx()].is_nan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayModel {
    Elmore,
    Arnoldi { q: usize },
}

/// Everything the propagation stage needs from delay calculation.
#[derive(Debug, Clone, Default)]
pub struct DelayOutputs {
    pub arcs: ArcTiming,
    /// Merged worst slew per pin per transition.
    pub node_slew: Vec<[f64; 2]>,
    /// Total downstream capacitance per net (wire + pins), fF.
    pub net_load: Vec<f64>,
    /// SDF entries that matched no enabled arc.
    pub sdf_unmatched: u64,
}

/// One net's precomputed interconnect model.
enum NetModel {
    /// No parasitics: zero delay, slew passes through.
    Direct,
    Elmore {
        node_of_pin: HashMap<u32, u32>,
        elm: ElmoreDelays,
    },
    Reduced {
        node_of_pin: HashMap<u32, u32>,
        model: ReducedModel,
    },
}

/// Capacitance a sink pin presents to its net: library pin cap for cell
/// pins, `set_load` for output ports.
fn sink_pin_cap(nl: &FlatNetlist, lib: &LibertyLibrary, cns: &Constraints, pin: u32) -> f64 {
    if nl.pin_is_port(pin) {
        return cns.port_load.get(&pin).copied().unwrap_or(0.0);
    }
    let cell = nl.pin_owner[pin as usize] as usize;
    let lp = nl.pin_lib[pin as usize] as usize;
    lib.cells[nl.cell_lib[cell] as usize].pins[lp].capacitance
}

/// Effective tree for a net: annotated parasitics with sink pin loads
/// folded onto their nodes.
fn effective_tree(
    nl: &FlatNetlist,
    lib: &LibertyLibrary,
    cns: &Constraints,
    rc: &crate::rc::RcNet,
    driver: u32,
) -> Result<RcTree> {
    let mut rc = rc.clone();
    for node in rc.nodes.iter_mut() {
        if let Some(p) = node.pin {
            if p != driver {
                node.cap += sink_pin_cap(nl, lib, cns, p);
            }
        }
    }
    rc.tree()
}

/// Compute delays and slews for every enabled arc, level by level, then
/// apply SDF overrides. Deterministic for any thread count: per-level work
/// is order-preserving and writes are disjoint.
pub fn compute_all_arcs(
    nl: &FlatNetlist,
    g: &TimingGraph,
    rcs: &RcStore,
    lib: &LibertyLibrary,
    cns: &Constraints,
    model: DelayModel,
    sdf: Option<&SdfData>,
) -> Result<DelayOutputs> {
    let num_edges = g.num_edges();
    let mut arcs = ArcTiming {
        delay: vec![[[f64::NAN; 2]; 2]; num_edges],
        out_slew: vec![[MIN_SLEW; 2]; num_edges],
    };

    // Net models and loads are slew-independent: build them up front, in
    // parallel over nets.
    let per_net: Vec<(NetModel, f64)> = (0..nl.num_nets() as u32)
        .into_par_iter()
        .map(|net| -> Result<(NetModel, f64)> {
            let driver = nl.net_driver[net as usize];
            match &rcs.nets[net as usize] {
                Some(rc) if driver != NO_DRIVER => {
                    let tree = effective_tree(nl, lib, cns, rc, driver)?;
                    let load = tree.cap.iter().sum();
                    let node_of_pin: HashMap<u32, u32> = tree
                        .pin
                        .iter()
                        .enumerate()
                        .filter_map(|(i, p)| p.map(|p| (p, i as u32)))
                        .collect();
                    let nm = match model {
                        DelayModel::Elmore => NetModel::Elmore { node_of_pin, elm: elmore(&tree) },
                        DelayModel::Arnoldi { q } => NetModel::Reduced {
                            node_of_pin,
                            model: arnoldi_reduce(&tree, q),
                        },
                    };
                    Ok((nm, load))
                }
                _ => {
                    let load = nl
                        .net_pins(net)
                        .iter()
                        .filter(|&&p| p != driver)
                        .map(|&p| sink_pin_cap(nl, lib, cns, p))
                        .sum();
                    Ok((NetModel::Direct, load))
                }
            }
        })
        .collect::<Result<_>>()?;
    let net_load: Vec<f64> = per_net.iter().map(|(_, l)| *l).collect();

    // Slews start unknown; a node that never receives one resolves to its
    // port constraint or the smallest library slew index.
    let default_slew = lib.min_slew_index().max(MIN_SLEW);
    let mut node_slew = vec![[f64::NEG_INFINITY; 2]; g.num_nodes()];
    let resolve = |pin: u32, s: [f64; 2]| -> [f64; 2] {
        if s[0].is_finite() {
            return s;
        }
        let v = cns
            .port_slew
            .get(&pin)
            .map(|sl| sl[Mode::Late.idx()])
            .unwrap_or(default_slew)
            .max(MIN_SLEW);
        [v, v]
    };

    enum EdgeResult {
        Skip,
        Out([Option<EdgeOut>; 2]),
    }

    for level in 0..g.num_levels as usize {
        let lo = g.level_off[level] as usize;
        let hi = g.level_off[level + 1] as usize;
        // Resolve slews for this level's nodes first (their fanin is done).
        for &u in &g.level_nodes[lo..hi] {
            let s = resolve(u, node_slew[u as usize]);
            node_slew[u as usize] = s;
        }
        // Evaluate every fanout edge of the level; disjoint results.
        let work: Vec<u32> = g.level_nodes[lo..hi]
            .iter()
            .flat_map(|&u| g.fanout(u).iter().copied())
            .collect();
        let results: Vec<EdgeResult> = work
            .par_iter()
            .map(|&e| {
                let ei = e as usize;
                if g.disabled[ei] || g.edge_kind[ei] == EdgeKind::CellCheckArc {
                    return EdgeResult::Skip;
                }
                let u = g.edge_from[ei];
                let slews = node_slew[u as usize];
                match g.edge_kind[ei] {
                    EdgeKind::NetArc => {
                        let net = g.edge_arc[ei] as usize;
                        let sink = g.edge_to[ei];
                        let mut both = [None, None];
                        for tr in Edge::BOTH {
                            let drv = slews[tr.idx()];
                            let (d, s) = match &per_net[net].0 {
                                NetModel::Direct => (0.0, drv),
                                NetModel::Elmore { node_of_pin, elm } => {
                                    let node = node_of_pin[&sink] as usize;
                                    (elm.delay[node], net_slew(drv, elm.impulse[node]))
                                }
                                NetModel::Reduced { node_of_pin, model } => {
                                    let sm = model
                                        .sink(node_of_pin[&sink])
                                        .expect("sink has a model");
                                    let (d, s, _) = arnoldi_delay(sm, drv);
                                    (d, s)
                                }
                            };
                            both[tr.idx()] =
                                Some(EdgeOut { delay: [d, d], slew: s.max(MIN_SLEW) });
                        }
                        EdgeResult::Out(both)
                    }
                    EdgeKind::CellDelayArc => {
                        let arc = g.lib_arc(nl, lib, e);
                        let v = g.edge_to[ei];
                        let load = net_load[nl.pin_net[v as usize] as usize];
                        EdgeResult::Out(cell_arc(arc, slews, load))
                    }
                    EdgeKind::CellCheckArc => EdgeResult::Skip,
                }
            })
            .collect();
        // Serial writeback: edge annotations, then slew merges.
        for (&e, res) in work.iter().zip(results) {
            let EdgeResult::Out(both) = res else { continue };
            let v = g.edge_to[e as usize] as usize;
            for tr in Edge::BOTH {
                if let Some(eo) = both[tr.idx()] {
                    arcs.delay[e as usize][tr.idx()] = eo.delay;
                    arcs.out_slew[e as usize][tr.idx()] = eo.slew;
                    if eo.slew > node_slew[v][tr.idx()] {
                        node_slew[v][tr.idx()] = eo.slew;
                    }
                }
            }
        }
    }
    // Nodes outside every level (isolated) still need defined slews.
    for (pin, s) in node_slew.iter_mut().enumerate() {
        *s = resolve(pin as u32, *s);
    }

    let sdf_unmatched = match sdf {
        Some(data) => apply_sdf(nl, g, &mut arcs, data),
        None => 0,
    };

    Ok(DelayOutputs { arcs, node_slew, net_load, sdf_unmatched })
}

fn override_edge(arcs: &mut ArcTiming, e: u32, rise: &SdfTriple, fall: &SdfTriple) {
    for (tr, tri) in [(Edge::Rise, rise), (Edge::Fall, fall)] {
        if !arcs.has(e, tr) {
            continue;
        }
        if tri.min.is_none() && tri.typ.is_none() && tri.max.is_none() {
            continue;
        }
        arcs.delay[e as usize][tr.idx()][Mode::Early.idx()] = tri.early().max(0.0);
        arcs.delay[e as usize][tr.idx()][Mode::Late.idx()] = tri.late().max(0.0);
    }
}

/// Replace computed delays with SDF annotations. Returns the number of
/// entries that matched no enabled arc.
fn apply_sdf(nl: &FlatNetlist, g: &TimingGraph, arcs: &mut ArcTiming, data: &SdfData) -> u64 {
    let idx = NameIndex::build(nl);
    // (from pin, to pin) → enabled edges, covering both arc kinds.
    let mut by_pins: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
    for e in 0..g.num_edges() as u32 {
        let ei = e as usize;
        if g.disabled[ei] || g.edge_kind[ei] == EdgeKind::CellCheckArc {
            continue;
        }
        by_pins
            .entry((g.edge_from[ei], g.edge_to[ei]))
            .or_default()
            .push(e);
    }
    let pin_of = |path: &str| idx.pin(nl, path);
    let mut unmatched = 0u64;
    for entry in &data.entries {
        let (from, to, rise, fall, what) = match entry {
            SdfEntry::IoPath(p) => {
                let prefix = if p.instance.is_empty() {
                    String::new()
                } else {
                    format!("{}/", p.instance)
                };
                (
                    pin_of(&format!("{prefix}{}", p.from)),
                    pin_of(&format!("{prefix}{}", p.to)),
                    &p.rise,
                    &p.fall,
                    "IOPATH",
                )
            }
            SdfEntry::Interconnect(ic) => {
                (pin_of(&ic.from), pin_of(&ic.to), &ic.rise, &ic.fall, "INTERCONNECT")
            }
        };
        let edges = match (from, to) {
            (Some(f), Some(t)) => by_pins.get(&(f, t)),
            _ => None,
        };
        match edges {
            Some(list) if !list.is_empty() => {
                for &e in list {
                    override_edge(arcs, e, rise, fall);
                }
            }
            _ => {
                unmatched += 1;
                crate::log_warn!("SDF {what} entry matched no enabled arc");
            }
        }
    }
    unmatched
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liberty::parse_liberty;
    use crate::netlist::elaborate;
    use crate::rc::{RcNet, RcNode, RcRes};
    use crate::verilog::parse_verilog;

    fn lut2(idx1: &[f64], idx2: &[f64], vals: &[f64]) -> Lut2D {
        Lut2D {
            index_1: idx1.to_vec(),
            index_2: idx2.to_vec(),
            values: vals.to_vec(),
        }
    }

    #[test]
    fn lut_grid_identity_and_midpoint() {
        let t = lut2(&[1.0, 2.0], &[10.0, 20.0], &[0.0, 2.0, 4.0, 6.0]);
        // Exactly at (index_1[1], index_2[0]).
        assert_eq!(lut_eval(&t, 2.0, 10.0), 4.0);
        // Cell midpoint of {{0,2},{4,6}}.
        assert!((lut_eval(&t, 1.5, 15.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lut_extrapolates_boundary_gradient() {
        // Linear plane v = slew + 0.1·cap: extension must stay on the plane.
        let plane = |s: f64, c: f64| s + 0.1 * c;
        let mut vals = Vec::new();
        for s in [1.0, 2.0, 3.0] {
            for c in [10.0, 20.0] {
                vals.push(plane(s, c));
            }
        }
        let t = lut2(&[1.0, 2.0, 3.0], &[10.0, 20.0], &vals);
        for (s, c) in [(0.2, 5.0), (4.0, 25.0), (0.5, 30.0), (3.5, 8.0)] {
            assert!((lut_eval(&t, s, c) - plane(s, c)).abs() < 1e-9, "({s},{c})");
        }
    }

    #[test]
    fn lut_scalar_and_one_dimensional() {
        assert_eq!(lut_eval(&Lut2D::scalar(7.5), 3.0, 100.0), 7.5);
        let t = lut2(&[1.0, 3.0], &[], &[10.0, 30.0]);
        assert!((lut_eval(&t, 2.0, 55.0) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn lut_continuous_at_cell_boundaries() {
        let t = lut2(
            &[1.0, 2.0, 4.0],
            &[5.0, 9.0, 11.0],
            &[1.0, 2.0, 7.0, 3.0, 5.0, 8.0, 4.0, 9.0, 2.0],
        );
        for &x in &[1.0, 2.0, 4.0] {
            for &y in &[5.0, 9.0, 11.0] {
                let eps = 1e-7;
                let a = lut_eval(&t, x - eps, y);
                let b = lut_eval(&t, x + eps, y);
                assert!((a - b).abs() < 1e-4, "slew boundary {x}");
                let c = lut_eval(&t, x, y - eps);
                let d = lut_eval(&t, x, y + eps);
                assert!((c - d).abs() < 1e-4, "cap boundary {y}");
            }
        }
    }

    fn tree_of(nodes: Vec<RcNode>, ress: Vec<RcRes>) -> RcTree {
        RcNet { nodes, resistors: ress, root: 0 }.tree().unwrap()
    }

    #[test]
    fn elmore_unit_rc() {
        let t = tree_of(
            vec![RcNode { cap: 0.0, pin: None }, RcNode { cap: 1.0, pin: None }],
            vec![RcRes { a: 0, b: 1, r: 1.0 }],
        );
        let e = elmore(&t);
        assert!((e.delay[1] - 1.0).abs() < 1e-12);
        assert!((e.impulse[1] - LN9).abs() < 1e-12);
    }

    #[test]
    fn elmore_chain_and_star() {
        // root—1kΩ—n1(1fF)—1kΩ—n2(1fF): delay(n2) = 1×2 + 1×1 = 3.
        let t = tree_of(
            vec![
                RcNode { cap: 0.0, pin: None },
                RcNode { cap: 1.0, pin: None },
                RcNode { cap: 1.0, pin: None },
            ],
            vec![RcRes { a: 0, b: 1, r: 1.0 }, RcRes { a: 1, b: 2, r: 1.0 }],
        );
        let e = elmore(&t);
        assert!((e.delay[1] - 2.0).abs() < 1e-12);
        assert!((e.delay[2] - 3.0).abs() < 1e-12);

        // Shared 1kΩ into two 1fF sinks: each sees 1×2 through the shared R.
        let t = tree_of(
            vec![
                RcNode { cap: 0.0, pin: None },
                RcNode { cap: 0.0, pin: None },
                RcNode { cap: 1.0, pin: None },
                RcNode { cap: 1.0, pin: None },
            ],
            vec![
                RcRes { a: 0, b: 1, r: 1.0 },
                RcRes { a: 1, b: 2, r: crate::rc::MIN_RES },
                RcRes { a: 1, b: 3, r: crate::rc::MIN_RES },
            ],
        );
        let e = elmore(&t);
        assert!((e.delay[2] - 2.0).abs() < 1e-5);
        assert!((e.delay[3] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn elmore_matches_brute_force_on_random_trees() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..25 {
            let n = rng.gen_range(2..20);
            let mut nodes = vec![RcNode { cap: 0.0, pin: None }];
            let mut ress = Vec::new();
            for i in 1..n {
                nodes.push(RcNode { cap: rng.gen_range(0.0..4.0), pin: None });
                ress.push(RcRes {
                    a: rng.gen_range(0..i) as u32,
                    b: i as u32,
                    r: rng.gen_range(0.1..2.0),
                });
            }
            let rc = RcNet { nodes, resistors: ress, root: 0 };
            let tree = rc.tree().unwrap();
            let got = elmore(&tree);
            // Brute force: Σ_k C_k × R(shared path to root).
            let path = |mut v: usize| -> Vec<(usize, f64)> {
                let mut out = Vec::new();
                while tree.parent[v] as usize != v {
                    out.push((v, tree.parent_res[v]));
                    v = tree.parent[v] as usize;
                }
                out
            };
            for sink in 1..n {
                let ps: Vec<(usize, f64)> = path(sink);
                let mut want = 0.0;
                for k in 0..n {
                    let pk: Vec<(usize, f64)> = path(k);
                    let shared: f64 = ps
                        .iter()
                        .filter(|(e, _)| pk.iter().any(|(e2, _)| e2 == e))
                        .map(|(_, r)| r)
                        .sum();
                    want += tree.cap[k] * shared;
                }
                let scale = want.abs().max(1e-9);
                assert!(
                    ((got.delay[sink] - want) / scale).abs() < 1e-9,
                    "sink {sink}: {} vs {want}",
                    got.delay[sink]
                );
            }
        }
    }

    #[test]
    fn elmore_monotone_in_grounded_cap() {
        let base = vec![
            RcNode { cap: 1.0, pin: None },
            RcNode { cap: 2.0, pin: None },
            RcNode { cap: 1.0, pin: None },
        ];
        let ress = vec![RcRes { a: 0, b: 1, r: 1.0 }, RcRes { a: 1, b: 2, r: 0.5 }];
        let before = elmore(&RcNet { nodes: base.clone(), resistors: ress.clone(), root: 0 }.tree().unwrap());
        for bump in 0..3 {
            let mut nodes = base.clone();
            nodes[bump].cap += 1.5;
            let after = elmore(&RcNet { nodes, resistors: ress.clone(), root: 0 }.tree().unwrap());
            for s in 0..3 {
                assert!(after.delay[s] >= before.delay[s] - 1e-12);
            }
        }
    }

    #[test]
    fn net_slew_rss() {
        assert_eq!(net_slew(12.0, 0.0), 12.0);
        assert!((net_slew(30.0, 40.0) - 50.0).abs() < 1e-12);
    }

    fn const_arc(sense: Sense, delay: f64, slew: f64) -> TimingArc {
        TimingArc {
            from_pin: 0,
            to_pin: 1,
            sense,
            kind: ArcKind::Combinational,
            when: None,
            cell_rise: Some(Lut2D::scalar(delay)),
            cell_fall: Some(Lut2D::scalar(delay)),
            rise_transition: Some(Lut2D::scalar(slew)),
            fall_transition: Some(Lut2D::scalar(slew)),
            rise_constraint: None,
            fall_constraint: None,
        }
    }

    #[test]
    fn cell_arc_unate_mapping() {
        let arc = const_arc(Sense::PositiveUnate, 100.0, 50.0);
        let out = cell_arc(&arc, [5.0, 9.0], 3.0);
        let rise = out[Edge::Rise.idx()].unwrap();
        assert_eq!(rise.delay, [100.0, 100.0]);
        assert_eq!(rise.slew, 50.0);

        // Negative unate: rising output driven by the falling input slew.
        let mut arc = const_arc(Sense::NegativeUnate, 0.0, 0.0);
        arc.cell_rise = Some(lut2(&[0.0, 10.0], &[], &[0.0, 10.0])); // delay = in slew
        arc.rise_transition = Some(Lut2D::scalar(1.0));
        let out = cell_arc(&arc, [5.0, 9.0], 0.0);
        assert_eq!(out[Edge::Rise.idx()].unwrap().delay[1], 9.0);
    }

    #[test]
    fn cell_arc_non_unate_folds_late_max_early_min() {
        let mut arc = const_arc(Sense::NonUnate, 0.0, 0.0);
        arc.cell_rise = Some(lut2(&[0.0, 10.0], &[], &[0.0, 10.0]));
        arc.rise_transition = Some(lut2(&[0.0, 10.0], &[], &[1.0, 2.0]));
        let out = cell_arc(&arc, [4.0, 8.0], 0.0);
        let rise = out[Edge::Rise.idx()].unwrap();
        assert_eq!(rise.delay[Mode::Late.idx()], 8.0);
        assert_eq!(rise.delay[Mode::Early.idx()], 4.0);
        assert_eq!(rise.slew, 1.8); // pessimistic transition pick
    }

    const LIB: &str = r#"
library (tiny) {
  time_unit : "1ps";
  capacitive_load_unit (1, ff);
  lu_table_template (lt) {
    variable_1 : input_net_transition;
    variable_2 : total_output_net_capacitance;
    index_1 ("1, 100");
    index_2 ("1, 10");
  }
  cell (BUF) {
    pin (A) { direction : input; capacitance : 2.0; }
    pin (Y) {
      direction : output;
      function : "A";
      timing () {
        related_pin : "A";
        timing_sense : positive_unate;
        cell_rise (lt) { values ("10, 20", "30, 40"); }
        cell_fall (lt) { values ("10, 20", "30, 40"); }
        rise_transition (lt) { values ("5, 8", "11, 14"); }
        fall_transition (lt) { values ("5, 8", "11, 14"); }
      }
    }
  }
}
"#;

    fn build() -> (crate::liberty::LibertyLibrary, FlatNetlist, TimingGraph) {
        let lib = parse_liberty(&[("t.lib", LIB.as_bytes())]).unwrap();
        let d = parse_verilog(
            "t.v",
            "module top(input in, output out);\n wire mid;\n BUF u1(.A(in), .Y(mid));\n BUF u2(.A(mid), .Y(out));\nendmodule"
                .as_bytes(),
        )
        .unwrap();
        let nl = elaborate(&d, "top", &lib).unwrap();
        let cns = Constraints::default();
        let mut g = crate::graph::build_graph(&nl, &lib, &cns).unwrap();
        crate::graph::levelize(&mut g);
        (lib, nl, g)
    }

    #[test]
    fn full_design_every_enabled_edge_annotated() {
        let (lib, nl, g) = build();
        let rcs = RcStore::empty(nl.num_nets());
        let out = compute_all_arcs(
            &nl,
            &g,
            &rcs,
            &lib,
            &Constraints::default(),
            DelayModel::Elmore,
            None,
        )
        .unwrap();
        for e in 0..g.num_edges() as u32 {
            if g.disabled[e as usize] || g.edge_kind[e as usize] == EdgeKind::CellCheckArc {
                continue;
            }
            for tr in Edge::BOTH {
                assert!(out.arcs.has(e, tr));
                let d = out.arcs.delay[e as usize][tr.idx()];
                assert!(d[0].is_finite() && d[0] >= 0.0 && d[1] >= d[0]);
                assert!(out.arcs.out_slew[e as usize][tr.idx()] > 0.0);
            }
        }
        // u2 load: lumped = cap(A of u2)? No wire RC; u1 drives net `mid`
        // whose single sink is u2/A with 2 fF.
        let idx = NameIndex::build(&nl);
        let mid = idx.net(&nl, "mid").unwrap();
        assert_eq!(out.net_load[mid as usize], 2.0);
    }

    #[test]
    fn elmore_and_arnoldi_agree_without_resistance() {
        let (lib, nl, g) = build();
        let rcs = RcStore::empty(nl.num_nets());
        let cns = Constraints::default();
        let a = compute_all_arcs(&nl, &g, &rcs, &lib, &cns, DelayModel::Elmore, None).unwrap();
        let b =
            compute_all_arcs(&nl, &g, &rcs, &lib, &cns, DelayModel::Arnoldi { q: 4 }, None)
                .unwrap();
        for e in 0..g.num_edges() {
            if g.edge_kind[e] != EdgeKind::NetArc || g.disabled[e] {
                continue;
            }
            for tr in Edge::BOTH {
                assert_eq!(a.arcs.delay[e][tr.idx()], b.arcs.delay[e][tr.idx()]);
                assert_eq!(a.arcs.delay[e][tr.idx()][0], 0.0);
            }
        }
    }

    #[test]
    fn slews_chain_through_levels() {
        let (lib, nl, g) = build();
        let rcs = RcStore::empty(nl.num_nets());
        let out = compute_all_arcs(
            &nl,
            &g,
            &rcs,
            &lib,
            &Constraints::default(),
            DelayModel::Elmore,
            None,
        )
        .unwrap();
        let idx = NameIndex::build(&nl);
        // Port slew defaults to the smallest index (1 ps) → u1 evaluated at
        // slew 1, load 2 → transition ≈ interpolated between 5..8 at cap 2:
        // 5 + (8−5)×(2−1)/(10−1) = 5.333…
        let u1y = idx.pin(&nl, "u1/Y").unwrap();
        let s1 = out.node_slew[u1y as usize][Edge::Rise.idx()];
        assert!((s1 - (5.0 + 3.0 / 9.0)).abs() < 1e-9, "{s1}");
        // u2 sees that slew (net arc passes through, no RC), load 0.
        let u2y = idx.pin(&nl, "u2/Y").unwrap();
        let expect = {
            let t = lut2(&[1.0, 100.0], &[1.0, 10.0], &[5.0, 8.0, 11.0, 14.0]);
            lut_eval(&t, s1, 0.0)
        };
        let s2 = out.node_slew[u2y as usize][Edge::Rise.idx()];
        assert!((s2 - expect).abs() < 1e-9, "{s2} vs {expect}");
    }

    #[test]
    fn sdf_overrides_delays_but_not_slews() {
        let (lib, nl, g) = build();
        let rcs = RcStore::empty(nl.num_nets());
        let cns = Constraints::default();
        let base =
            compute_all_arcs(&nl, &g, &rcs, &lib, &cns, DelayModel::Elmore, None).unwrap();
        let sdf_text = "(DELAYFILE (SDFVERSION \"3.0\") (DESIGN \"top\") (DIVIDER /) (TIMESCALE 1ps)\n (CELL (CELLTYPE \"BUF\") (INSTANCE u1)\n  (DELAY (ABSOLUTE (IOPATH A Y (7.5::9.5) (7.5::9.5))))\n )\n)\n";
        let sdf = crate::sdf::parse_sdf("t.sdf", sdf_text.as_bytes()).unwrap();
        let out =
            compute_all_arcs(&nl, &g, &rcs, &lib, &cns, DelayModel::Elmore, Some(&sdf))
                .unwrap();
        assert_eq!(out.sdf_unmatched, 0);
        let idx = NameIndex::build(&nl);
        let (a, y) = (idx.pin(&nl, "u1/A").unwrap(), idx.pin(&nl, "u1/Y").unwrap());
        let mut hit = false;
        for e in 0..g.num_edges() {
            if g.edge_from[e] == a && g.edge_to[e] == y {
                hit = true;
                assert_eq!(out.arcs.delay[e][0], [7.5, 9.5]);
                assert_eq!(out.arcs.out_slew[e], base.arcs.out_slew[e]);
            } else if !g.disabled[e] && g.edge_kind[e] != EdgeKind::CellCheckArc {
                assert_eq!(out.arcs.delay[e], base.arcs.delay[e], "edge {e} changed");
            }
        }
        assert!(hit);
    }

    #[test]
    fn sdf_unmatched_entries_counted() {
        let (lib, nl, g) = build();
        let rcs = RcStore::empty(nl.num_nets());
        let sdf_text = "(DELAYFILE (SDFVERSION \"3.0\") (TIMESCALE 1ps)\n (CELL (CELLTYPE \"BUF\") (INSTANCE u9)\n  (DELAY (ABSOLUTE (IOPATH A Y (1::1) (1::1))))\n )\n)\n";
        let sdf = crate::sdf::parse_sdf("t.sdf", sdf_text.as_bytes()).unwrap();
        let out = compute_all_arcs(
            &nl,
            &g,
            &rcs,
            &lib,
            &Constraints::default(),
            DelayModel::Elmore,
            Some(&sdf),
        )
        .unwrap();
        assert_eq!(out.sdf_unmatched, 1);
    }

    #[test]
    fn rc_annotated_net_uses_elmore() {
        let (lib, nl, g) = build();
        let idx = NameIndex::build(&nl);
        let mid = idx.net(&nl, "mid").unwrap();
        let (u1y, u2a) = (idx.pin(&nl, "u1/Y").unwrap(), idx.pin(&nl, "u2/A").unwrap());
        let mut rcs = RcStore::empty(nl.num_nets());
        rcs.nets[mid as usize] = Some(RcNet {
            nodes: vec![
                RcNode { cap: 0.0, pin: Some(u1y) },
                RcNode { cap: 3.0, pin: Some(u2a) },
            ],
            resistors: vec![RcRes { a: 0, b: 1, r: 2.0 }],
            root: 0,
        });
        let out = compute_all_arcs(
            &nl,
            &g,
            &rcs,
            &lib,
            &Constraints::default(),
            DelayModel::Elmore,
            None,
        )
        .unwrap();
        // Sink node cap = 3 wire + 2 pin → Elmore = 2kΩ × 5fF = 10 ps.
        let e = (0..g.num_edges())
            .find(|&e| g.edge_from[e] == u1y && g.edge_to[e] == u2a)
            .unwrap();
        assert!((out.arcs.delay[e][0][1] - 10.0).abs() < 1e-9);
        assert_eq!(out.net_load[mid as usize], 5.0);
        // Output slew is RSS of the driver slew and ln9×delay.
        let drv = out.node_slew[u1y as usize][0];
        let want = net_slew(drv, LN9 * 10.0);
        assert!((out.arcs.out_slew[e][0] - want).abs() < 1e-9);
    }
}
