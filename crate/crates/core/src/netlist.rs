//! Flattened netlist database: dense 0-based ids for cells, pins, and nets,
//! CSR adjacency in both directions, and one interned name table.
//!
//! Two producers build it: `elaborate` flattens a hierarchical Verilog design
//! against a Liberty library, and `ingest_flat` adopts externally produced
//! CSR arrays without re-indexing (external ids are the internal ids). Both
//! run the same validation pass.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::intern::StringTable;
use crate::liberty::{LibertyLibrary, PinDir};
use crate::log::bump_warn;
use crate::verilog::{BusRange, NetRef, PortDir, VerilogDesign, VerilogModule};

/// Owner id of a top-level port pin, and the "no driver" net marker.
pub const PORT_SENTINEL: u32 = 0xFFFF_FFFF;
pub const NO_DRIVER: u32 = 0xFFFF_FFFF;

/// Pin direction as stored in the flat arrays (u32 in the export bundle).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Dir {
    In = 0,
    Out = 1,
    Inout = 2,
}

impl Dir {
    pub fn from_u32(v: u32) -> Option<Dir> {
        match v {
            0 => Some(Dir::In),
            1 => Some(Dir::Out),
            2 => Some(Dir::Inout),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatNetlist {
    pub name_table: StringTable,
    pub top_name: u32,

    // Per cell.
    pub cell_lib: Vec<u32>,
    pub cell_name: Vec<u32>,

    // Per pin. `pin_owner` is a cell id or PORT_SENTINEL; `pin_lib` indexes
    // the owning Liberty cell's pin list (PORT_SENTINEL for port pins).
    pub pin_owner: Vec<u32>,
    pub pin_lib: Vec<u32>,
    pub pin_net: Vec<u32>,
    pub pin_dir: Vec<Dir>,
    pub pin_name: Vec<u32>,

    // Per net.
    pub net_name: Vec<u32>,
    pub net_driver: Vec<u32>,

    // CSR net -> pins (offsets length = nets + 1).
    pub csr_net_pins_off: Vec<u32>,
    pub csr_net_pins: Vec<u32>,
    // CSR cell -> pins (offsets length = cells + 1).
    pub csr_cell_pins_off: Vec<u32>,
    pub csr_cell_pins: Vec<u32>,

    /// Pins tied to a constant, sorted by pin id.
    pub constants: Vec<(u32, bool)>,
}

impl FlatNetlist {
    pub fn num_cells(&self) -> usize {
        self.cell_lib.len()
    }

    pub fn num_pins(&self) -> usize {
        self.pin_owner.len()
    }

    pub fn num_nets(&self) -> usize {
        self.net_name.len()
    }

    pub fn pin_is_port(&self, pin: u32) -> bool {
        self.pin_owner[pin as usize] == PORT_SENTINEL
    }

    /// A pin that drives its net: a cell output or a top-level input port.
    pub fn pin_is_driver(&self, pin: u32) -> bool {
        let dir = self.pin_dir[pin as usize];
        if self.pin_is_port(pin) {
            dir == Dir::In
        } else {
            dir == Dir::Out
        }
    }

    pub fn pin_full_name(&self, pin: u32) -> &str {
        self.name_table.get(self.pin_name[pin as usize])
    }

    pub fn net_full_name(&self, net: u32) -> &str {
        self.name_table.get(self.net_name[net as usize])
    }

    pub fn cell_full_name(&self, cell: u32) -> &str {
        self.name_table.get(self.cell_name[cell as usize])
    }

    pub fn net_pins(&self, net: u32) -> &[u32] {
        let a = self.csr_net_pins_off[net as usize] as usize;
        let b = self.csr_net_pins_off[net as usize + 1] as usize;
        &self.csr_net_pins[a..b]
    }

    pub fn cell_pins(&self, cell: u32) -> &[u32] {
        let a = self.csr_cell_pins_off[cell as usize] as usize;
        let b = self.csr_cell_pins_off[cell as usize + 1] as usize;
        &self.csr_cell_pins[a..b]
    }

    pub fn constant_value(&self, pin: u32) -> Option<bool> {
        self.constants
            .binary_search_by_key(&pin, |&(p, _)| p)
            .ok()
            .map(|i| self.constants[i].1)
    }

    /// Consistency pass shared by `elaborate` and `ingest_flat`.
    pub fn validate(&self) -> Result<()> {
        let (nc, np, nn) = (self.num_cells() as u32, self.num_pins() as u32, self.num_nets() as u32);
        if self.cell_name.len() != nc as usize {
            return Err(Error::semantic("cell array length mismatch"));
        }
        for (arr, what) in [
            (&self.pin_lib, "pin_lib"),
            (&self.pin_net, "pin_net"),
            (&self.pin_name, "pin_name"),
        ] {
            if arr.len() != np as usize {
                return Err(Error::semantic(format!("{what} array length mismatch")));
            }
        }
        check_csr(&self.csr_net_pins_off, &self.csr_net_pins, nn, np, "net->pins")?;
        check_csr(&self.csr_cell_pins_off, &self.csr_cell_pins, nc, np, "cell->pins")?;

        for (i, &owner) in self.pin_owner.iter().enumerate() {
            if owner != PORT_SENTINEL && owner >= nc {
                return Err(Error::semantic(format!("pin {i}: owner cell id {owner} out of range")));
            }
            let net = self.pin_net[i];
            if net >= nn {
                return Err(Error::semantic(format!("pin {i}: net id {net} out of range")));
            }
        }
        // Each pin appears exactly once in its net's CSR row.
        let mut seen = vec![false; np as usize];
        for net in 0..nn {
            for &p in self.net_pins(net) {
                if self.pin_net[p as usize] != net {
                    return Err(Error::semantic(format!(
                        "pin {p}: back-reference disagrees with net {net} CSR row"
                    )));
                }
                if seen[p as usize] {
                    return Err(Error::semantic(format!("pin {p}: listed under two nets")));
                }
                seen[p as usize] = true;
            }
        }
        if let Some(p) = seen.iter().position(|s| !s) {
            return Err(Error::semantic(format!("pin {p}: missing from net CSR")));
        }
        // Driver invariant: at most one driving pin, and the recorded driver
        // must be exactly that pin (or the sentinel when none exists).
        if self.net_driver.len() != nn as usize {
            return Err(Error::semantic("net_driver array length mismatch"));
        }
        for net in 0..nn {
            let mut found = NO_DRIVER;
            for &p in self.net_pins(net) {
                if self.pin_is_driver(p) {
                    if found != NO_DRIVER {
                        return Err(Error::semantic(format!(
                            "net `{}` is multiply driven (`{}` and `{}`)",
                            self.net_full_name(net),
                            self.pin_full_name(found),
                            self.pin_full_name(p)
                        )));
                    }
                    found = p;
                }
            }
            if self.net_driver[net as usize] != found {
                return Err(Error::semantic(format!(
                    "net `{}`: recorded driver disagrees with pin directions",
                    self.net_full_name(net)
                )));
            }
        }
        for w in self.constants.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::semantic("constant pin list not sorted"));
            }
        }
        if let Some(&(p, _)) = self.constants.iter().find(|&&(p, _)| p >= np) {
            return Err(Error::semantic(format!("constant pin id {p} out of range")));
        }
        Ok(())
    }
}

fn check_csr(off: &[u32], idx: &[u32], rows: u32, max_id: u32, what: &str) -> Result<()> {
    if off.len() != rows as usize + 1 {
        return Err(Error::semantic(format!("{what}: offsets length must be rows+1")));
    }
    if off[0] != 0 || *off.last().unwrap() as usize != idx.len() {
        return Err(Error::semantic(format!("{what}: offsets must span the index array")));
    }
    for w in off.windows(2) {
        if w[0] > w[1] {
            return Err(Error::semantic(format!("{what}: offsets not monotone")));
        }
    }
    if let Some(&i) = idx.iter().find(|&&i| i >= max_id) {
        return Err(Error::semantic(format!("{what}: index {i} out of range")));
    }
    Ok(())
}

/// Name-keyed lookup maps, built on demand after the netlist is frozen.
pub struct NameIndex {
    pub pin_by_name: HashMap<u32, u32>,
    pub net_by_name: HashMap<u32, u32>,
    pub cell_by_name: HashMap<u32, u32>,
}

impl NameIndex {
    pub fn build(nl: &FlatNetlist) -> NameIndex {
        let mut pin_by_name = HashMap::with_capacity(nl.num_pins());
        for (i, &n) in nl.pin_name.iter().enumerate() {
            pin_by_name.insert(n, i as u32);
        }
        let mut net_by_name = HashMap::with_capacity(nl.num_nets());
        for (i, &n) in nl.net_name.iter().enumerate() {
            net_by_name.insert(n, i as u32);
        }
        let mut cell_by_name = HashMap::with_capacity(nl.num_cells());
        for (i, &n) in nl.cell_name.iter().enumerate() {
            cell_by_name.insert(n, i as u32);
        }
        NameIndex { pin_by_name, net_by_name, cell_by_name }
    }

    pub fn pin(&self, nl: &FlatNetlist, name: &str) -> Option<u32> {
        nl.name_table.lookup(name).and_then(|id| self.pin_by_name.get(&id).copied())
    }

    pub fn net(&self, nl: &FlatNetlist, name: &str) -> Option<u32> {
        nl.name_table.lookup(name).and_then(|id| self.net_by_name.get(&id).copied())
    }

    pub fn cell(&self, nl: &FlatNetlist, name: &str) -> Option<u32> {
        nl.name_table.lookup(name).and_then(|id| self.cell_by_name.get(&id).copied())
    }
}

// ---------------------------------------------------------------------------
// Elaboration
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq)]
enum Binding {
    Net(u32),
    Const(bool),
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new() -> UnionFind {
        UnionFind { parent: Vec::new() }
    }

    fn push(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    /// Directed union: the class keeps `into`'s root (the driver side).
    fn union_into(&mut self, from: u32, into: u32) {
        let rf = self.find(from);
        let ri = self.find(into);
        if rf != ri {
            self.parent[rf as usize] = ri;
        }
    }
}

struct Elaborator<'a> {
    design: &'a VerilogDesign,
    lib: &'a LibertyLibrary,

    names: StringTable,
    uf: UnionFind,
    net_name: Vec<u32>,
    /// Constant value attached to a net class by `assign`, keyed by raw id.
    net_const: HashMap<u32, bool>,
    const_nets: [Option<u32>; 2],

    cell_lib: Vec<u32>,
    cell_name: Vec<u32>,
    pin_owner: Vec<u32>,
    pin_lib: Vec<u32>,
    pin_net: Vec<u32>,
    pin_dir: Vec<Dir>,
    pin_name: Vec<u32>,
    constants: Vec<(u32, bool)>,
    cell_pins_off: Vec<u32>,
}

/// Per-module-instance name environment: bit-blasted local name -> binding.
struct Scope<'m> {
    module: &'m VerilogModule,
    prefix: String,
    env: HashMap<String, Binding>,
    ranges: HashMap<&'m str, Option<BusRange>>,
}

fn bit_name(base: &str, bit: Option<i32>) -> String {
    match bit {
        Some(i) => format!("{base}[{i}]"),
        None => base.to_string(),
    }
}

impl<'a> Elaborator<'a> {
    fn new_net(&mut self, full_name: &str) -> u32 {
        let id = self.uf.push();
        debug_assert_eq!(id as usize, self.net_name.len());
        self.net_name.push(self.names.intern(full_name));
        id
    }

    fn const_net(&mut self, value: bool) -> u32 {
        let slot = value as usize;
        if let Some(n) = self.const_nets[slot] {
            return n;
        }
        let n = self.new_net(if value { "1'b1" } else { "1'b0" });
        self.const_nets[slot] = Some(n);
        n
    }

    fn scope_for<'m>(module: &'m VerilogModule, prefix: String) -> Scope<'m> {
        let mut ranges: HashMap<&str, Option<BusRange>> = HashMap::new();
        for p in &module.ports {
            ranges.insert(p.name.as_str(), p.range);
        }
        for w in &module.wires {
            ranges.entry(w.name.as_str()).or_insert(w.range);
        }
        Scope { module, prefix, env: HashMap::new(), ranges }
    }

    /// Bits (msb-first) a declared name expands to.
    fn decl_bits(scope: &Scope, name: &str) -> Vec<Option<i32>> {
        match scope.ranges.get(name) {
            Some(Some(r)) => r.bits().into_iter().map(Some).collect(),
            _ => vec![None],
        }
    }

    /// Net (or constant) bound to one local bit, creating an implicit net on
    /// first reference of an undeclared scalar.
    fn bind_bit(&mut self, scope: &mut Scope, key: String) -> Binding {
        if let Some(&b) = scope.env.get(&key) {
            return b;
        }
        let full = format!("{}{}", scope.prefix, key);
        let net = self.new_net(&full);
        let b = Binding::Net(net);
        scope.env.insert(key, b);
        b
    }

    /// Expand a connection expression to msb-first bit bindings.
    fn expand(&mut self, scope: &mut Scope, r: &NetRef, out: &mut Vec<Binding>) -> Result<()> {
        match r {
            NetRef::Scalar(name) => {
                for bit in Self::decl_bits(scope, name) {
                    let b = self.bind_bit(scope, bit_name(name, bit));
                    out.push(b);
                }
            }
            NetRef::Bit(name, i) => {
                let b = self.bind_bit(scope, bit_name(name, Some(*i)));
                out.push(b);
            }
            NetRef::Part(name, msb, lsb) => {
                let step: i32 = if msb >= lsb { -1 } else { 1 };
                let mut i = *msb;
                loop {
                    let b = self.bind_bit(scope, bit_name(name, Some(i)));
                    out.push(b);
                    if i == *lsb {
                        break;
                    }
                    i += step;
                }
            }
            NetRef::Const(bits) => {
                out.extend(bits.iter().map(|&v| Binding::Const(v)));
            }
            NetRef::Concat(parts) => {
                for p in parts {
                    self.expand(scope, p, out)?;
                }
            }
            NetRef::Unconnected => {
                return Err(Error::semantic(format!(
                    "unconnected expression used as a value in `{}`",
                    scope.module.name
                )));
            }
        }
        Ok(())
    }

    fn walk(&mut self, scope: &mut Scope, depth: u32) -> Result<()> {
        if depth > 256 {
            return Err(Error::semantic(format!(
                "module `{}` instantiates itself (hierarchy deeper than 256)",
                scope.module.name
            )));
        }
        // Declare wires up front so net ids follow declaration order.
        let wires: Vec<(String, Option<BusRange>)> = scope
            .module
            .wires
            .iter()
            .map(|w| (w.name.clone(), w.range))
            .collect();
        for (name, range) in wires {
            match range {
                Some(r) => {
                    for bit in r.bits() {
                        self.bind_bit(scope, bit_name(&name, Some(bit)));
                    }
                }
                None => {
                    self.bind_bit(scope, bit_name(&name, None));
                }
            }
        }

        // assign lhs = rhs: bitwise merge, rhs side keeps the driver.
        let assigns = scope.module.assigns.clone();
        for (lhs, rhs) in &assigns {
            let mut l = Vec::new();
            let mut r = Vec::new();
            self.expand(scope, lhs, &mut l)?;
            self.expand(scope, rhs, &mut r)?;
            if l.len() != r.len() {
                return Err(Error::semantic(format!(
                    "width mismatch in assign inside `{}`: {} vs {} bits",
                    scope.module.name,
                    l.len(),
                    r.len()
                )));
            }
            for (lb, rb) in l.iter().zip(r.iter()) {
                match (lb, rb) {
                    (Binding::Net(ln), Binding::Net(rn)) => self.uf.union_into(*ln, *rn),
                    (Binding::Net(ln), Binding::Const(v)) => {
                        let root = self.uf.find(*ln);
                        if let Some(prev) = self.net_const.insert(root, *v) {
                            if prev != *v {
                                return Err(Error::semantic(format!(
                                    "net `{}` tied to both constants",
                                    self.names.get(self.net_name[root as usize])
                                )));
                            }
                        }
                    }
                    (Binding::Const(_), _) => {
                        return Err(Error::semantic(format!(
                            "constant on assign left-hand side in `{}`",
                            scope.module.name
                        )));
                    }
                }
            }
        }

        let instances = scope.module.instances.clone();
        for inst in &instances {
            let inst_full = format!("{}{}", scope.prefix, inst.name);
            if let Some(child) = self.design.module(&inst.module) {
                // Hierarchical instance: bind child port bits to outer nets.
                let mut child_scope = Self::scope_for(child, format!("{inst_full}/"));
                let conns: HashMap<&str, &NetRef> =
                    inst.conns.iter().map(|(p, r)| (p.as_str(), r)).collect();
                for port in &child.ports {
                    let bits: Vec<Option<i32>> = match port.range {
                        Some(r) => r.bits().into_iter().map(Some).collect(),
                        None => vec![None],
                    };
                    match conns.get(port.name.as_str()) {
                        None | Some(NetRef::Unconnected) => {
                            // Dangling: fresh nets named through the child path.
                            for bit in bits {
                                let key = bit_name(&port.name, bit);
                                let full = format!("{}/{}", inst_full, key);
                                let net = self.new_net(&full);
                                child_scope.env.insert(key, Binding::Net(net));
                            }
                        }
                        Some(expr) => {
                            let mut outer = Vec::new();
                            self.expand(scope, expr, &mut outer)?;
                            if outer.len() != bits.len() {
                                return Err(Error::semantic(format!(
                                    "width mismatch on `{inst_full}` port `{}`: {} vs {} bits",
                                    port.name,
                                    bits.len(),
                                    outer.len()
                                )));
                            }
                            for (bit, b) in bits.into_iter().zip(outer) {
                                child_scope.env.insert(bit_name(&port.name, bit), b);
                            }
                        }
                    }
                }
                for (pname, _) in &inst.conns {
                    if !child.ports.iter().any(|p| &p.name == pname) {
                        return Err(Error::semantic(format!(
                            "module `{}` has no port `{pname}` (instance `{inst_full}`)",
                        child.name
                        )));
                    }
                }
                self.walk(&mut child_scope, depth + 1)?;
            } else if let Some(lib_id) = self.lib.cell_id(&inst.module) {
                self.emit_leaf(scope, inst, &inst_full, lib_id)?;
            } else {
                return Err(Error::semantic(format!(
                    "unresolved module or library cell `{}` (instance `{inst_full}`)",
                    inst.module
                )));
            }
        }
        Ok(())
    }

    fn emit_leaf(
        &mut self,
        scope: &mut Scope,
        inst: &crate::verilog::Instance,
        inst_full: &str,
        lib_id: u32,
    ) -> Result<()> {
        let cell = &self.lib.cells[lib_id as usize];
        let cell_id = self.cell_lib.len() as u32;
        self.cell_lib.push(lib_id);
        self.cell_name.push(self.names.intern(inst_full));

        let conns: HashMap<&str, &NetRef> =
            inst.conns.iter().map(|(p, r)| (p.as_str(), r)).collect();
        for (pname, _) in &inst.conns {
            let known = cell.pins.iter().any(|p| &p.name == pname);
            if !known {
                return Err(Error::semantic(format!(
                    "cell `{}` has no pin `{pname}` (instance `{inst_full}`)",
                    cell.name
                )));
            }
        }

        for (lib_pin, pin) in cell.pins.iter().enumerate() {
            let dir = match pin.direction {
                PinDir::Input => Dir::In,
                PinDir::Output => Dir::Out,
                PinDir::Inout => Dir::Inout,
                PinDir::Internal => continue,
            };
            let full = format!("{}/{}", inst_full, pin.name);
            let binding = match conns.get(pin.name.as_str()) {
                None | Some(NetRef::Unconnected) => {
                    let net = self.new_net(&full);
                    Binding::Net(net)
                }
                Some(expr) => {
                    let mut bits = Vec::new();
                    self.expand(scope, expr, &mut bits)?;
                    if bits.len() != 1 {
                        return Err(Error::semantic(format!(
                            "width mismatch on `{full}`: expected 1 bit, got {}",
                            bits.len()
                        )));
                    }
                    bits[0]
                }
            };
            let pid = self.pin_owner.len() as u32;
            let net = match binding {
                Binding::Net(n) => n,
                Binding::Const(v) => {
                    self.constants.push((pid, v));
                    self.const_net(v)
                }
            };
            self.pin_owner.push(cell_id);
            self.pin_lib.push(lib_pin as u32);
            self.pin_net.push(net);
            self.pin_dir.push(dir);
            self.pin_name.push(self.names.intern(&full));
        }
        self.cell_pins_off.push(self.pin_owner.len() as u32);
        Ok(())
    }
}

/// Flatten `top` of `design` against `lib`.
pub fn elaborate(design: &VerilogDesign, top: &str, lib: &LibertyLibrary) -> Result<FlatNetlist> {
    let top_mod = design
        .module(top)
        .ok_or_else(|| Error::semantic(format!("top module `{top}` not found")))?;

    let mut el = Elaborator {
        design,
        lib,
        names: StringTable::default(),
        uf: UnionFind::new(),
        net_name: Vec::new(),
        net_const: HashMap::new(),
        const_nets: [None, None],
        cell_lib: Vec::new(),
        cell_name: Vec::new(),
        pin_owner: Vec::new(),
        pin_lib: Vec::new(),
        pin_net: Vec::new(),
        pin_dir: Vec::new(),
        pin_name: Vec::new(),
        constants: Vec::new(),
        cell_pins_off: vec![0],
    };

    // Top ports: one net and one PORT pin per bit, in declaration order.
    let mut scope = Elaborator::scope_for(top_mod, String::new());
    let mut ports: Vec<(String, PortDir, Option<BusRange>)> = Vec::new();
    for p in &top_mod.ports {
        let dir = p.dir.ok_or_else(|| {
            Error::semantic(format!("top port `{}` has no direction declaration", p.name))
        })?;
        ports.push((p.name.clone(), dir, p.range));
    }
    for (name, dir, range) in &ports {
        let bits: Vec<Option<i32>> = match range {
            Some(r) => r.bits().into_iter().map(Some).collect(),
            None => vec![None],
        };
        for bit in bits {
            let key = bit_name(name, bit);
            let net = el.new_net(&key);
            scope.env.insert(key.clone(), Binding::Net(net));
            el.pin_owner.push(PORT_SENTINEL);
            el.pin_lib.push(PORT_SENTINEL);
            el.pin_net.push(net);
            el.pin_dir.push(match dir {
                PortDir::Input => Dir::In,
                PortDir::Output => Dir::Out,
                PortDir::Inout => Dir::Inout,
            });
            el.pin_name.push(el.names.intern(&key));
        }
    }

    el.walk(&mut scope, 0)?;

    // Resolve the union-find classes into dense net ids (roots keep their
    // creation order) and rewrite pin -> net references.
    let raw_nets = el.net_name.len() as u32;
    let mut remap = vec![NO_DRIVER; raw_nets as usize];
    let mut kept: Vec<u32> = Vec::new();
    for raw in 0..raw_nets {
        if el.uf.find(raw) == raw {
            remap[raw as usize] = kept.len() as u32;
            kept.push(raw);
        }
    }
    let net_count = kept.len() as u32;
    let net_name: Vec<u32> = kept.iter().map(|&r| el.net_name[r as usize]).collect();

    let mut pin_net = Vec::with_capacity(el.pin_net.len());
    for &raw in &el.pin_net {
        pin_net.push(remap[el.uf.find(raw) as usize]);
    }

    // Constant classes mark every pin of the class.
    let mut net_const: HashMap<u32, bool> = HashMap::new();
    let const_pairs: Vec<(u32, bool)> = el.net_const.iter().map(|(&k, &v)| (k, v)).collect();
    for (raw, v) in const_pairs {
        let dense = remap[el.uf.find(raw) as usize];
        if let Some(prev) = net_const.insert(dense, v) {
            if prev != v {
                return Err(Error::semantic(format!(
                    "net `{}` tied to both constants",
                    el.names.get(net_name[dense as usize])
                )));
            }
        }
    }
    let mut constants = el.constants.clone();
    for (pid, &net) in pin_net.iter().enumerate() {
        if let Some(&v) = net_const.get(&net) {
            constants.push((pid as u32, v));
        }
    }
    constants.sort_unstable();
    constants.dedup();
    // A pin tied to both polarities (per-pin tie vs class tie) is a conflict.
    for w in constants.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::semantic(format!(
                "pin `{}` tied to both constants",
                el.names.get(el.pin_name[w[0].0 as usize])
            )));
        }
    }

    // net -> pins CSR by counting sort (pin order within a net ascending).
    let mut counts = vec![0u32; net_count as usize + 1];
    for &n in &pin_net {
        counts[n as usize + 1] += 1;
    }
    for i in 1..counts.len() {
        counts[i] += counts[i - 1];
    }
    let csr_net_pins_off = counts.clone();
    let mut cursor = counts;
    let mut csr_net_pins = vec![0u32; pin_net.len()];
    for (pid, &n) in pin_net.iter().enumerate() {
        csr_net_pins[cursor[n as usize] as usize] = pid as u32;
        cursor[n as usize] += 1;
    }

    // Driver per net; a constant tie counts as a driver for the check.
    let mut net_driver = vec![NO_DRIVER; net_count as usize];
    for pid in 0..pin_net.len() as u32 {
        let is_driver = {
            let dir = el.pin_dir[pid as usize];
            if el.pin_owner[pid as usize] == PORT_SENTINEL {
                dir == Dir::In
            } else {
                dir == Dir::Out
            }
        };
        if is_driver {
            let net = pin_net[pid as usize];
            if net_const.contains_key(&net) {
                return Err(Error::semantic(format!(
                    "net `{}` is tied to a constant and driven by `{}`",
                    el.names.get(net_name[net as usize]),
                    el.names.get(el.pin_name[pid as usize])
                )));
            }
            if net_driver[net as usize] != NO_DRIVER {
                return Err(Error::semantic(format!(
                    "net `{}` is multiply driven (`{}` and `{}`)",
                    el.names.get(net_name[net as usize]),
                    el.names.get(el.pin_name[net_driver[net as usize] as usize]),
                    el.names.get(el.pin_name[pid as usize])
                )));
            }
            net_driver[net as usize] = pid;
        }
    }

    let csr_cell_pins: Vec<u32> = (0..el.pin_owner.len() as u32)
        .filter(|&p| el.pin_owner[p as usize] != PORT_SENTINEL)
        .collect();
    // Pins of a cell are contiguous by construction; offsets follow owners.
    let mut csr_cell_pins_off = vec![0u32; el.cell_lib.len() + 1];
    for &p in &csr_cell_pins {
        csr_cell_pins_off[el.pin_owner[p as usize] as usize + 1] += 1;
    }
    for i in 1..csr_cell_pins_off.len() {
        csr_cell_pins_off[i] += csr_cell_pins_off[i - 1];
    }

    let top_name = el.names.intern(top);
    let nl = FlatNetlist {
        name_table: el.names,
        top_name,
        cell_lib: el.cell_lib,
        cell_name: el.cell_name,
        pin_owner: el.pin_owner,
        pin_lib: el.pin_lib,
        pin_net,
        pin_dir: el.pin_dir,
        pin_name: el.pin_name,
        net_name,
        net_driver,
        csr_net_pins_off,
        csr_net_pins,
        csr_cell_pins_off,
        csr_cell_pins,
        constants,
    };
    nl.validate()?;
    Ok(nl)
}

// ---------------------------------------------------------------------------
// Flat-array ingest / export
// ---------------------------------------------------------------------------

/// External CSR bundle, already decoded from its on-disk form. Ids are used
/// as-is; `names` may be empty, in which case placeholder names are created.
#[derive(Debug, Default, Clone)]
pub struct FlatArrays {
    pub names: Vec<String>,
    pub top_name: u32,
    pub cell_lib: Vec<u32>,
    pub cell_name: Vec<u32>,
    pub pin_owner: Vec<u32>,
    pub pin_lib: Vec<u32>,
    pub pin_net: Vec<u32>,
    pub pin_dir: Vec<u32>,
    pub pin_name: Vec<u32>,
    pub net_name: Vec<u32>,
    pub net_driver: Vec<u32>,
    pub csr_net_pins_off: Vec<u32>,
    pub csr_net_pins: Vec<u32>,
    pub csr_cell_pins_off: Vec<u32>,
    pub csr_cell_pins: Vec<u32>,
    pub const_pins: Vec<u32>,
    pub const_vals: Vec<u32>,
}

/// Adopt external arrays without re-indexing, then validate.
pub fn ingest_flat(arrays: FlatArrays) -> Result<FlatNetlist> {
    let mut name_table = StringTable::default();
    if arrays.names.is_empty() {
        // Synthesized names: stable, collision-free placeholders.
        let need = arrays
            .cell_name
            .iter()
            .chain(&arrays.pin_name)
            .chain(&arrays.net_name)
            .chain(std::iter::once(&arrays.top_name))
            .copied()
            .max()
            .map_or(0, |m| m as usize + 1);
        for i in 0..need {
            name_table.intern(&format!("id{i}"));
        }
    } else {
        for n in &arrays.names {
            name_table.intern(n);
        }
        if name_table.len() != arrays.names.len() {
            return Err(Error::semantic("name table contains duplicate entries"));
        }
    }
    let n_names = name_table.len() as u32;
    for (&id, what) in arrays
        .cell_name
        .iter()
        .map(|i| (i, "cell name"))
        .chain(arrays.pin_name.iter().map(|i| (i, "pin name")))
        .chain(arrays.net_name.iter().map(|i| (i, "net name")))
    {
        if id >= n_names {
            return Err(Error::semantic(format!("{what} id {id} out of range")));
        }
    }

    let mut pin_dir = Vec::with_capacity(arrays.pin_dir.len());
    for (i, &d) in arrays.pin_dir.iter().enumerate() {
        pin_dir.push(
            Dir::from_u32(d)
                .ok_or_else(|| Error::semantic(format!("pin {i}: bad direction code {d}")))?,
        );
    }
    if arrays.const_pins.len() != arrays.const_vals.len() {
        return Err(Error::semantic("constant pin/value arrays differ in length"));
    }
    let constants: Vec<(u32, bool)> = arrays
        .const_pins
        .iter()
        .zip(&arrays.const_vals)
        .map(|(&p, &v)| (p, v != 0))
        .collect();

    let nl = FlatNetlist {
        name_table,
        top_name: arrays.top_name,
        cell_lib: arrays.cell_lib,
        cell_name: arrays.cell_name,
        pin_owner: arrays.pin_owner,
        pin_lib: arrays.pin_lib,
        pin_net: arrays.pin_net,
        pin_dir,
        pin_name: arrays.pin_name,
        net_name: arrays.net_name,
        net_driver: arrays.net_driver,
        csr_net_pins_off: arrays.csr_net_pins_off,
        csr_net_pins: arrays.csr_net_pins,
        csr_cell_pins_off: arrays.csr_cell_pins_off,
        csr_cell_pins: arrays.csr_cell_pins,
        constants,
    };
    nl.validate()?;
    // Lib-cell references are validated against the library at graph build;
    // here only self-consistency is checked. Unreferenced names are fine.
    if nl.num_cells() > 0 && nl.csr_cell_pins.len() != nl.pin_owner.iter().filter(|&&o| o != PORT_SENTINEL).count()
    {
        bump_warn();
        crate::log_warn!("cell CSR does not cover every cell-owned pin");
    }
    Ok(nl)
}

/// Inverse of `ingest_flat`: copy the netlist into a plain array bundle.
pub fn export_arrays(nl: &FlatNetlist) -> FlatArrays {
    FlatArrays {
        names: nl.name_table.iter().map(|(_, s)| s.to_string()).collect(),
        top_name: nl.top_name,
        cell_lib: nl.cell_lib.clone(),
        cell_name: nl.cell_name.clone(),
        pin_owner: nl.pin_owner.clone(),
        pin_lib: nl.pin_lib.clone(),
        pin_net: nl.pin_net.clone(),
        pin_dir: nl.pin_dir.iter().map(|&d| d as u32).collect(),
        pin_name: nl.pin_name.clone(),
        net_name: nl.net_name.clone(),
        net_driver: nl.net_driver.clone(),
        csr_net_pins_off: nl.csr_net_pins_off.clone(),
        csr_net_pins: nl.csr_net_pins.clone(),
        csr_cell_pins_off: nl.csr_cell_pins_off.clone(),
        csr_cell_pins: nl.csr_cell_pins.clone(),
        const_pins: nl.constants.iter().map(|&(p, _)| p).collect(),
        const_vals: nl.constants.iter().map(|&(_, v)| v as u32).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liberty::parse_liberty;
    use crate::verilog::parse_verilog;

    const LIB: &str = r#"
library (tiny) {
  time_unit : "1ns";
  capacitive_load_unit (1, pf);
  cell (INV) {
    pin (A) { direction : input; capacitance : 0.001; }
    pin (Y) {
      direction : output;
      timing () {
        related_pin : "A";
        timing_sense : negative_unate;
        cell_rise (scalar) { values ("0.1"); }
        cell_fall (scalar) { values ("0.1"); }
        rise_transition (scalar) { values ("0.05"); }
        fall_transition (scalar) { values ("0.05"); }
      }
    }
  }
  cell (BUF2) {
    pin (A) { direction : input; capacitance : 0.001; }
    pin (B) { direction : input; capacitance : 0.001; }
    pin (Y) {
      direction : output;
      function : "A";
      timing () {
        related_pin : "A B";
        cell_rise (scalar) { values ("0.2"); }
        cell_fall (scalar) { values ("0.2"); }
        rise_transition (scalar) { values ("0.05"); }
        fall_transition (scalar) { values ("0.05"); }
      }
    }
  }
}
"#;

    fn lib() -> crate::liberty::LibertyLibrary {
        parse_liberty(&[("tiny.lib", LIB.as_bytes())]).unwrap()
    }

    fn flat(v: &str, top: &str) -> FlatNetlist {
        let d = parse_verilog("t.v", v.as_bytes()).unwrap();
        elaborate(&d, top, &lib()).unwrap()
    }

    #[test]
    fn two_inverter_chain_counts() {
        let nl = flat(
            "module top(input in, output out);\n wire mid;\n INV u1(.A(in), .Y(mid));\n INV u2(.A(mid), .Y(out));\nendmodule",
            "top",
        );
        assert_eq!(nl.num_cells(), 2);
        assert_eq!(nl.num_pins(), 6); // 4 cell pins + 2 port pins
        assert_eq!(nl.num_nets(), 3);
        // in and out nets each have a port pin + a cell pin; mid has two.
        for net in 0..3u32 {
            assert_eq!(nl.net_pins(net).len(), 2);
        }
        let in_net = nl.pin_net[0]; // first port pin
        assert_eq!(nl.net_driver[in_net as usize], 0);
        assert!(nl.validate().is_ok());
    }

    /// Net partition of pins, with nets renumbered by first appearance.
    fn canonical_partition(nl: &FlatNetlist) -> Vec<u32> {
        let mut remap: HashMap<u32, u32> = HashMap::new();
        nl.pin_net
            .iter()
            .map(|&n| {
                let next = remap.len() as u32;
                *remap.entry(n).or_insert(next)
            })
            .collect()
    }

    #[test]
    fn hierarchy_flattens_to_isomorphic_netlist() {
        let one = flat(
            "module top(input in, output out);\n wire mid;\n INV u1(.A(in), .Y(mid));\n INV u2(.A(mid), .Y(out));\nendmodule",
            "top",
        );
        let two = flat(
            "module pair(input i, output o);\n wire m;\n INV g1(.A(i), .Y(m));\n INV g2(.A(m), .Y(o));\nendmodule\nmodule top(input in, output out);\n pair p(.i(in), .o(out));\nendmodule",
            "top",
        );
        assert_eq!(one.cell_lib, two.cell_lib);
        assert_eq!(one.pin_owner, two.pin_owner);
        assert_eq!(one.pin_dir, two.pin_dir);
        assert_eq!(canonical_partition(&one), canonical_partition(&two));
        assert_eq!(two.cell_full_name(0), "p/g1");
    }

    #[test]
    fn assign_aliases_collapse_to_one_net() {
        let nl = flat(
            "module top(input x, output y);\n assign y = x;\nendmodule",
            "top",
        );
        assert_eq!(nl.num_nets(), 1);
        assert_eq!(nl.pin_net[0], nl.pin_net[1]);
        assert_eq!(nl.net_driver[0], 0); // the input port pin drives
        assert_eq!(nl.net_full_name(0), "x"); // rhs keeps the net
    }

    #[test]
    fn multiply_driven_net_is_an_error() {
        let d = parse_verilog(
            "t.v",
            "module top(input a, output y);\n INV u1(.A(a), .Y(y));\n INV u2(.A(a), .Y(y));\nendmodule"
                .as_bytes(),
        )
        .unwrap();
        let err = elaborate(&d, "top", &lib()).unwrap_err().to_string();
        assert!(err.contains("multiply driven"), "{err}");
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let d = parse_verilog(
            "t.v",
            "module top(input [1:0] a, output y);\n wire w;\n assign w = a;\nendmodule".as_bytes(),
        )
        .unwrap();
        let err = elaborate(&d, "top", &lib()).unwrap_err().to_string();
        assert!(err.contains("width mismatch"), "{err}");
    }

    #[test]
    fn constant_ties_are_recorded() {
        let nl = flat(
            "module top(input a, output y);\n wire m;\n BUF2 u1(.A(a), .B(1'b0), .Y(m));\n INV u2(.A(m), .Y(y));\nendmodule",
            "top",
        );
        let tied: Vec<&str> =
            nl.constants.iter().map(|&(p, _)| nl.pin_full_name(p)).collect();
        assert_eq!(tied, ["u1/B"]);
        assert_eq!(nl.constant_value(nl.constants[0].0), Some(false));
        assert_eq!(nl.net_full_name(nl.pin_net[nl.constants[0].0 as usize]), "1'b0");
    }

    #[test]
    fn bus_and_concat_connections() {
        let nl = flat(
            "module top(input [1:0] a, output [1:0] y);\n BUF2 u1(.A(a[1]), .B(a[0]), .Y(y[1]));\n INV u2(.A(a[0]), .Y(y[0]));\nendmodule",
            "top",
        );
        assert_eq!(nl.num_nets(), 4);
        assert_eq!(nl.pin_full_name(0), "a[1]");
        assert_eq!(nl.net_full_name(nl.pin_net[0]), "a[1]");
        assert!(nl.validate().is_ok());
    }

    #[test]
    fn export_ingest_round_trip() {
        let nl = flat(
            "module top(input in, output out);\n wire mid;\n INV u1(.A(in), .Y(mid));\n INV u2(.A(mid), .Y(out));\nendmodule",
            "top",
        );
        let back = ingest_flat(export_arrays(&nl)).unwrap();
        assert_eq!(nl, back);
    }

    #[test]
    fn ingest_rejects_out_of_range_net() {
        let nl = flat(
            "module top(input x, output y);\n INV u1(.A(x), .Y(y));\nendmodule",
            "top",
        );
        let mut arrays = export_arrays(&nl);
        arrays.pin_net[1] = 99;
        let err = ingest_flat(arrays).unwrap_err().to_string();
        assert!(err.contains("pin 1"), "{err}");
        assert!(err.contains("out of range"), "{err}");
    }

    #[test]
    fn unresolved_instance_is_an_error() {
        let d = parse_verilog(
            "t.v",
            "module top(input a, output y);\n NAND2 u1(.A(a), .Y(y));\nendmodule".as_bytes(),
        )
        .unwrap();
        let err = elaborate(&d, "top", &lib()).unwrap_err().to_string();
        assert!(err.contains("unresolved"), "{err}");
        assert!(err.contains("NAND2"), "{err}");
    }
}
