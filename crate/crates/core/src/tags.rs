//! Path tags and compiled timing exceptions. A tag identifies the launch
//! context of an arrival (clock and waveform edge) plus a bitset recording
//! which exception segments the path prefix has already touched, in order.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mode::Edge;
use crate::netlist::FlatNetlist;
use crate::sdc::{Constraints, ExceptionKind, NodeSet};

/// Clock id for startpoints with no clock of their own.
pub const VIRTUAL_CLOCK: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tag {
    /// Launch clock id, or [`VIRTUAL_CLOCK`].
    pub clock: u32,
    /// Which source waveform edge launched the path.
    pub launch_tr: Edge,
    /// One bit per exception match point; see [`CompiledExceptions`].
    pub bits: u64,
}

impl Tag {
    pub fn virtual_tag(bits: u64) -> Tag {
        Tag { clock: VIRTUAL_CLOCK, launch_tr: Edge::Rise, bits }
    }
}

/// One exception lowered to an ordered segment sequence. A path matches when
/// it touches at least one pin of every segment, in order; the bits in a tag
/// track the longest prefix matched so far (bit `bit_base + s` = segments
/// `0..=s` all matched in order).
#[derive(Debug, Clone)]
pub struct ExceptionAutomaton {
    pub kind: ExceptionKind,
    pub priority: u32,
    /// Sorted pin ids per segment: [from?, through..., to?].
    pub segments: Vec<Vec<u32>>,
    pub bit_base: u32,
}

impl ExceptionAutomaton {
    pub fn last_bit(&self) -> u32 {
        self.bit_base + self.segments.len() as u32 - 1
    }
}

/// Pins that launch from / capture on each clock, used to expand clock-valued
/// `-from`/`-to` segments into pin sets.
#[derive(Debug, Clone, Default)]
pub struct ClockPinSets {
    /// Per clock: register clock pins it reaches plus input ports whose
    /// input delay references it.
    pub launch: Vec<Vec<u32>>,
    /// Per clock: check-constrained data pins it captures plus output ports
    /// whose output delay references it.
    pub capture: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Default)]
pub struct CompiledExceptions {
    pub autos: Vec<ExceptionAutomaton>,
    /// Pin -> (exception index, segment index), ascending, for tag advancement.
    node_segs: HashMap<u32, Vec<(u32, u32)>>,
    pub total_bits: u32,
    /// Exceptions dropped because a segment expanded to zero objects.
    pub dropped: u32,
}

impl CompiledExceptions {
    /// Advance a tag's bits across `node`. Segments are visited in ascending
    /// order per exception, so one node can satisfy consecutive segments.
    pub fn advance(&self, bits: u64, node: u32) -> u64 {
        let Some(list) = self.node_segs.get(&node) else { return bits };
        let mut b = bits;
        for &(e, s) in list {
            let base = self.autos[e as usize].bit_base;
            if s == 0 || b & (1u64 << (base + s - 1)) != 0 {
                b |= 1u64 << (base + s);
            }
        }
        b
    }

    /// True when exception `e` has matched all its segments under `bits`.
    pub fn fully_matched(&self, bits: u64, e: usize) -> bool {
        bits & (1u64 << self.autos[e].last_bit()) != 0
    }

    pub fn touches(&self, node: u32) -> bool {
        self.node_segs.contains_key(&node)
    }
}

/// Lower path exceptions to automata, expanding clock-valued from/to sets to
/// their launch/capture pins. Exceptions with a segment that expands to zero
/// objects are dropped with a warning.
pub fn compile_exceptions(
    cns: &Constraints,
    nl: &FlatNetlist,
    sets: &ClockPinSets,
) -> Result<CompiledExceptions> {
    let mut out = CompiledExceptions::default();
    let expand = |set: &NodeSet, launch_side: bool| -> Vec<u32> {
        let mut pins = set.pins.clone();
        for &c in &set.clocks {
            let table = if launch_side { &sets.launch } else { &sets.capture };
            if let Some(extra) = table.get(c as usize) {
                pins.extend_from_slice(extra);
            }
        }
        pins.sort_unstable();
        pins.dedup();
        pins
    };

    'next: for exc in &cns.exceptions {
        let mut segments = Vec::new();
        let mut describe = Vec::new();
        if !exc.from.is_empty() {
            segments.push(expand(&exc.from, true));
            describe.push("-from");
        }
        for t in &exc.through {
            segments.push(expand(t, false));
            describe.push("-through");
        }
        if !exc.to.is_empty() {
            segments.push(expand(&exc.to, false));
            describe.push("-to");
        }
        for (seg, which) in segments.iter().zip(&describe) {
            if seg.is_empty() {
                crate::log_warn!(
                    "exception {} dropped: {which} matched no objects after clock expansion",
                    exc.priority
                );
                out.dropped += 1;
                continue 'next;
            }
        }
        let bit_base = out.total_bits;
        out.total_bits += segments.len() as u32;
        if out.total_bits > 64 {
            return Err(Error::semantic(format!(
                "exceptions need {} match points; at most 64 are supported",
                out.total_bits
            )));
        }
        out.autos.push(ExceptionAutomaton {
            kind: exc.kind.clone(),
            priority: exc.priority,
            segments,
            bit_base,
        });
    }

    for (e, a) in out.autos.iter().enumerate() {
        for (s, seg) in a.segments.iter().enumerate() {
            for &pin in seg {
                if pin as usize >= nl.num_pins() {
                    return Err(Error::semantic(format!(
                        "exception {} references pin id {pin} beyond the netlist",
                        a.priority
                    )));
                }
                out.node_segs.entry(pin).or_default().push((e as u32, s as u32));
            }
        }
    }
    for list in out.node_segs.values_mut() {
        list.sort_unstable();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdc::PathException;

    fn nl_with_pins(n: u32) -> FlatNetlist {
        // A bare netlist is enough: compilation only checks pin id bounds.
        let mut nl = FlatNetlist::default();
        for i in 0..n {
            nl.pin_owner.push(crate::netlist::PORT_SENTINEL);
            nl.pin_lib.push(crate::netlist::PORT_SENTINEL);
            nl.pin_net.push(0);
            nl.pin_dir.push(crate::netlist::Dir::In);
            let name = nl.name_table.intern(&format!("p{i}"));
            nl.pin_name.push(name);
        }
        nl
    }

    fn pins(ids: &[u32]) -> NodeSet {
        NodeSet { pins: ids.to_vec(), clocks: vec![] }
    }

    fn exc(kind: ExceptionKind, from: NodeSet, through: Vec<NodeSet>, to: NodeSet, pr: u32) -> PathException {
        PathException { kind, from, through, to, priority: pr }
    }

    fn walk(c: &CompiledExceptions, path: &[u32]) -> u64 {
        let mut bits = 0;
        for &p in path {
            bits = c.advance(bits, p);
        }
        bits
    }

    #[test]
    fn two_segment_false_path_matches_in_order() {
        let nl = nl_with_pins(6);
        let cns = Constraints {
            exceptions: vec![exc(ExceptionKind::FalsePath, pins(&[0]), vec![], pins(&[5]), 0)],
            ..Default::default()
        };
        let c = compile_exceptions(&cns, &nl, &ClockPinSets::default()).unwrap();
        assert_eq!(c.autos.len(), 1);
        assert_eq!(c.autos[0].segments.len(), 2);
        assert!(c.fully_matched(walk(&c, &[0, 3, 5]), 0));
        assert!(!c.fully_matched(walk(&c, &[3, 5]), 0));
        // Touching -to before -from never completes the match.
        assert!(!c.fully_matched(walk(&c, &[5, 3, 0]), 0));
    }

    #[test]
    fn through_order_is_significant() {
        let nl = nl_with_pins(8);
        let cns = Constraints {
            exceptions: vec![exc(
                ExceptionKind::FalsePath,
                NodeSet::default(),
                vec![pins(&[2]), pins(&[3])],
                NodeSet::default(),
                0,
            )],
            ..Default::default()
        };
        let c = compile_exceptions(&cns, &nl, &ClockPinSets::default()).unwrap();
        assert!(c.fully_matched(walk(&c, &[0, 2, 3, 7]), 0));
        assert!(!c.fully_matched(walk(&c, &[0, 3, 2, 7]), 0));
    }

    #[test]
    fn one_node_can_satisfy_consecutive_segments() {
        let nl = nl_with_pins(4);
        let cns = Constraints {
            exceptions: vec![exc(
                ExceptionKind::FalsePath,
                NodeSet::default(),
                vec![pins(&[1, 2]), pins(&[2])],
                NodeSet::default(),
                0,
            )],
            ..Default::default()
        };
        let c = compile_exceptions(&cns, &nl, &ClockPinSets::default()).unwrap();
        // 2 is in both segments: one touch advances both, in order.
        assert!(c.fully_matched(walk(&c, &[2]), 0));
        assert!(!c.fully_matched(walk(&c, &[1]), 0));
        assert!(c.fully_matched(walk(&c, &[1, 2]), 0));
    }

    #[test]
    fn clock_sets_expand_from_and_to() {
        let nl = nl_with_pins(10);
        let cns = Constraints {
            exceptions: vec![exc(
                ExceptionKind::FalsePath,
                NodeSet { pins: vec![], clocks: vec![0] },
                vec![],
                NodeSet { pins: vec![9], clocks: vec![1] },
                0,
            )],
            ..Default::default()
        };
        let sets = ClockPinSets {
            launch: vec![vec![1, 2, 3], vec![4]],
            capture: vec![vec![5], vec![6, 7]],
        };
        let c = compile_exceptions(&cns, &nl, &sets).unwrap();
        assert_eq!(c.autos[0].segments[0], vec![1, 2, 3]);
        assert_eq!(c.autos[0].segments[1], vec![6, 7, 9]);
    }

    #[test]
    fn empty_expansion_drops_with_warning() {
        let nl = nl_with_pins(4);
        let cns = Constraints {
            exceptions: vec![
                exc(
                    ExceptionKind::FalsePath,
                    NodeSet { pins: vec![], clocks: vec![0] },
                    vec![],
                    pins(&[2]),
                    0,
                ),
                exc(ExceptionKind::MaxDelay(100.0), pins(&[1]), vec![], pins(&[2]), 1),
            ],
            ..Default::default()
        };
        let sets = ClockPinSets { launch: vec![vec![]], capture: vec![vec![]] };
        let c = compile_exceptions(&cns, &nl, &sets).unwrap();
        assert_eq!(c.dropped, 1);
        assert_eq!(c.autos.len(), 1);
        assert_eq!(c.autos[0].priority, 1);
        assert_eq!(c.autos[0].bit_base, 0);
    }

    #[test]
    fn bits_are_monotone_along_any_walk() {
        let nl = nl_with_pins(6);
        let cns = Constraints {
            exceptions: vec![
                exc(ExceptionKind::FalsePath, pins(&[0, 1]), vec![pins(&[2])], pins(&[4]), 0),
                exc(ExceptionKind::MinDelay(5.0), pins(&[1]), vec![], pins(&[5]), 1),
            ],
            ..Default::default()
        };
        let c = compile_exceptions(&cns, &nl, &ClockPinSets::default()).unwrap();
        let path = [1, 2, 0, 4, 5];
        let mut bits = 0u64;
        for &p in &path {
            let next = c.advance(bits, p);
            assert_eq!(next & bits, bits, "bits lost at {p}");
            bits = next;
        }
        assert!(c.fully_matched(bits, 0));
        assert!(c.fully_matched(bits, 1));
    }
}
