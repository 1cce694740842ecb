//! Gate-level structural Verilog parser: modules, ports (ANSI and
//! non-ANSI), bus declarations, wires, continuous assigns, constant
//! literals, and instances with named port connections. Buses are recorded
//! unexpanded; bit blasting happens at elaboration.
//!
//! Behavioral constructs (`always`, `initial`, `reg`, ...) are hard errors
//! naming the construct.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::chunk::{self, ChunkFormat};
use crate::error::{Error, Result};

/// `[msb:lsb]` bus range; `msb` may be smaller than `lsb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusRange {
    pub msb: i32,
    pub lsb: i32,
}

impl BusRange {
    pub fn width(&self) -> u32 {
        (self.msb - self.lsb).unsigned_abs() + 1
    }

    /// Bit indices from msb to lsb.
    pub fn bits(&self) -> Vec<i32> {
        if self.msb >= self.lsb {
            (self.lsb..=self.msb).rev().collect()
        } else {
            (self.msb..=self.lsb).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortDir {
    Input,
    Output,
    Inout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortDecl {
    pub name: String,
    pub dir: Option<PortDir>,
    pub range: Option<BusRange>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireDecl {
    pub name: String,
    pub range: Option<BusRange>,
}

/// A net expression as written in the source: resolved to individual bits
/// during elaboration.
#[derive(Debug, Clone, PartialEq)]
pub enum NetRef {
    Scalar(String),
    Bit(String, i32),
    Part(String, i32, i32),
    /// Constant bits, msb first.
    Const(Vec<bool>),
    Concat(Vec<NetRef>),
    Unconnected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub module: String,
    pub name: String,
    pub conns: Vec<(String, NetRef)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerilogModule {
    pub name: String,
    pub ports: Vec<PortDecl>,
    pub wires: Vec<WireDecl>,
    pub assigns: Vec<(NetRef, NetRef)>,
    pub instances: Vec<Instance>,
}

#[derive(Debug, Clone, Default)]
pub struct VerilogDesign {
    pub modules: Vec<VerilogModule>,
    index: HashMap<String, usize>,
}

impl VerilogDesign {
    pub fn module(&self, name: &str) -> Option<&VerilogModule> {
        self.index.get(name).map(|&i| &self.modules[i])
    }

    fn push(&mut self, m: VerilogModule) -> Result<()> {
        if self.index.contains_key(&m.name) {
            return Err(Error::semantic(format!("module `{}` defined twice", m.name)));
        }
        self.index.insert(m.name.clone(), self.modules.len());
        self.modules.push(m);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    /// Sized literal like 4'b0101: bits msb first.
    SizedConst(Vec<bool>),
    Number(i32),
    Punct(u8),
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    file: &'a str,
}

impl<'a> Lexer<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.file, self.line, self.pos, msg)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.src.get(self.pos) {
                Some(b'\n') => {
                    self.line += 1;
                    self.pos += 1;
                }
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(b'/') if self.src.get(self.pos + 1) == Some(&b'/') => {
                    while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                Some(b'/') if self.src.get(self.pos + 1) == Some(&b'*') => {
                    self.pos += 2;
                    while self.pos + 1 < self.src.len()
                        && !(self.src[self.pos] == b'*' && self.src[self.pos + 1] == b'/')
                    {
                        if self.src[self.pos] == b'\n' {
                            self.line += 1;
                        }
                        self.pos += 1;
                    }
                    self.pos = (self.pos + 2).min(self.src.len());
                }
                // Compiler directives (`timescale etc.) run to end of line.
                Some(b'`') => {
                    while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn next(&mut self) -> Result<Option<Tok>> {
        self.skip_trivia();
        let Some(&c) = self.src.get(self.pos) else { return Ok(None) };
        match c {
            b'\\' => {
                // Escaped identifier: up to the next whitespace.
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.src.len() && !self.src[self.pos].is_ascii_whitespace() {
                    self.pos += 1;
                }
                Ok(Some(Tok::Ident(
                    String::from_utf8_lossy(&self.src[start..self.pos]).into_owned(),
                )))
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len() && is_ident(self.src[self.pos]) {
                    self.pos += 1;
                }
                Ok(Some(Tok::Ident(
                    String::from_utf8_lossy(&self.src[start..self.pos]).into_owned(),
                )))
            }
            c if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                self.skip_trivia();
                if self.src.get(self.pos) == Some(&b'\'') {
                    let width: u32 = std::str::from_utf8(&self.src[start..])
                        .unwrap()
                        .split('\'')
                        .next()
                        .unwrap()
                        .trim()
                        .parse()
                        .map_err(|_| self.err("bad literal width"))?;
                    self.pos += 1;
                    let base = self.src.get(self.pos).copied().unwrap_or(b'?');
                    self.pos += 1;
                    let dstart = self.pos;
                    while self.pos < self.src.len()
                        && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                    {
                        self.pos += 1;
                    }
                    let digits: String = std::str::from_utf8(&self.src[dstart..self.pos])
                        .unwrap()
                        .chars()
                        .filter(|&c| c != '_')
                        .collect();
                    let value = u64::from_str_radix(
                        &digits,
                        match base.to_ascii_lowercase() {
                            b'b' => 2,
                            b'o' => 8,
                            b'd' => 10,
                            b'h' => 16,
                            _ => return Err(self.err(format!("bad literal base '{}'", base as char))),
                        },
                    )
                    .map_err(|_| self.err("bad literal digits"))?;
                    let bits = (0..width).rev().map(|i| (value >> i) & 1 == 1).collect();
                    Ok(Some(Tok::SizedConst(bits)))
                } else {
                    let n: i32 = std::str::from_utf8(&self.src[start..])
                        .unwrap()
                        .split(|c: char| !c.is_ascii_digit())
                        .next()
                        .unwrap()
                        .parse()
                        .map_err(|_| self.err("bad number"))?;
                    Ok(Some(Tok::Number(n)))
                }
            }
            b'(' | b')' | b'[' | b']' | b'{' | b'}' | b',' | b';' | b':' | b'.' | b'=' | b'#' => {
                self.pos += 1;
                Ok(Some(Tok::Punct(c)))
            }
            _ => Err(self.err(format!("unexpected byte {:?}", c as char))),
        }
    }
}

fn is_ident(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'$'
}

// ---------------------------------------------------------------------------
// Event-stream parser (shared by serial and chunked modes)
// ---------------------------------------------------------------------------

/// One top-level parse event. A chunk that starts mid-module produces
/// `Item`s before any `ModuleHead`; the merger attaches them to the module
/// left open by the previous chunk.
#[derive(Debug, PartialEq)]
enum Event {
    ModuleHead(String, Vec<PortDecl>),
    PortDirDecl(PortDir, Option<BusRange>, Vec<String>),
    Wire(Option<BusRange>, Vec<String>),
    Assign(Vec<(NetRef, NetRef)>),
    Inst(Vec<Instance>),
    EndModule,
}

struct Parser<'a> {
    lx: Lexer<'a>,
    peeked: Option<Tok>,
}

impl<'a> Parser<'a> {
    fn next(&mut self) -> Result<Option<Tok>> {
        if let Some(t) = self.peeked.take() {
            return Ok(Some(t));
        }
        self.lx.next()
    }

    fn peek(&mut self) -> Result<Option<&Tok>> {
        if self.peeked.is_none() {
            self.peeked = self.lx.next()?;
        }
        Ok(self.peeked.as_ref())
    }

    fn expect_punct(&mut self, p: u8) -> Result<()> {
        match self.next()? {
            Some(Tok::Punct(c)) if c == p => Ok(()),
            other => Err(self.lx.err(format!("expected `{}`, found {other:?}", p as char))),
        }
    }

    fn expect_ident(&mut self) -> Result<String> {
        match self.next()? {
            Some(Tok::Ident(s)) => Ok(s),
            other => Err(self.lx.err(format!("expected identifier, found {other:?}"))),
        }
    }

    fn parse_events(&mut self) -> Result<Vec<Event>> {
        let mut events = Vec::new();
        while let Some(tok) = self.next()? {
            match tok {
                Tok::Ident(kw) => match kw.as_str() {
                    "module" | "macromodule" => events.push(self.parse_module_head()?),
                    "endmodule" => events.push(Event::EndModule),
                    "input" => events.push(self.parse_dir_decl(PortDir::Input)?),
                    "output" => events.push(self.parse_dir_decl(PortDir::Output)?),
                    "inout" => events.push(self.parse_dir_decl(PortDir::Inout)?),
                    "wire" | "tri" => {
                        let (range, names) = self.parse_net_decl()?;
                        events.push(Event::Wire(range, names));
                    }
                    "supply0" | "supply1" => {
                        let bit = kw == "supply1";
                        let (range, names) = self.parse_net_decl()?;
                        let width = range.map(|r| r.width()).unwrap_or(1) as usize;
                        let mut assigns = Vec::new();
                        for n in &names {
                            let lhs = match range {
                                None => NetRef::Scalar(n.clone()),
                                Some(r) => NetRef::Part(n.clone(), r.msb, r.lsb),
                            };
                            assigns.push((lhs, NetRef::Const(vec![bit; width])));
                        }
                        events.push(Event::Wire(range, names));
                        events.push(Event::Assign(assigns));
                    }
                    "assign" => events.push(self.parse_assign()?),
                    "always" | "initial" | "reg" | "function" | "task" | "specify" => {
                        return Err(self
                            .lx
                            .err(format!("behavioral construct `{kw}` is not supported")));
                    }
                    _ => events.push(self.parse_instances(kw)?),
                },
                Tok::Punct(b';') => {} // stray separator
                other => return Err(self.lx.err(format!("unexpected {other:?} at top level"))),
            }
        }
        Ok(events)
    }

    fn parse_module_head(&mut self) -> Result<Event> {
        let name = self.expect_ident()?;
        let mut ports: Vec<PortDecl> = Vec::new();
        match self.next()? {
            Some(Tok::Punct(b'(')) => loop {
                match self.next()? {
                    Some(Tok::Punct(b')')) => {
                        self.expect_punct(b';')?;
                        break;
                    }
                    Some(Tok::Punct(b',')) => {}
                    Some(Tok::Ident(mut w)) => {
                        // ANSI style: input/output/inout [range] name.
                        let dir = match w.as_str() {
                            "input" => Some(PortDir::Input),
                            "output" => Some(PortDir::Output),
                            "inout" => Some(PortDir::Inout),
                            _ => None,
                        };
                        let mut range = None;
                        if dir.is_some() {
                            if matches!(self.peek()?, Some(Tok::Ident(k)) if k == "wire") {
                                self.next()?;
                            }
                            if matches!(self.peek()?, Some(Tok::Punct(b'['))) {
                                range = Some(self.parse_range()?);
                            }
                            w = self.expect_ident()?;
                        }
                        ports.push(PortDecl { name: w, dir, range });
                    }
                    other => return Err(self.lx.err(format!("bad port list near {other:?}"))),
                }
            },
            Some(Tok::Punct(b';')) => {}
            other => return Err(self.lx.err(format!("bad module header near {other:?}"))),
        }
        Ok(Event::ModuleHead(name, ports))
    }

    fn parse_range(&mut self) -> Result<BusRange> {
        self.expect_punct(b'[')?;
        let msb = self.expect_number()?;
        self.expect_punct(b':')?;
        let lsb = self.expect_number()?;
        self.expect_punct(b']')?;
        Ok(BusRange { msb, lsb })
    }

    fn expect_number(&mut self) -> Result<i32> {
        match self.next()? {
            Some(Tok::Number(n)) => Ok(n),
            other => Err(self.lx.err(format!("expected number, found {other:?}"))),
        }
    }

    fn parse_dir_decl(&mut self, dir: PortDir) -> Result<Event> {
        let (range, names) = self.parse_net_decl()?;
        Ok(Event::PortDirDecl(dir, range, names))
    }

    /// `[range] name, name, ... ;`
    fn parse_net_decl(&mut self) -> Result<(Option<BusRange>, Vec<String>)> {
        if matches!(self.peek()?, Some(Tok::Ident(k)) if k == "wire") {
            self.next()?;
        }
        let range = if matches!(self.peek()?, Some(Tok::Punct(b'['))) {
            Some(self.parse_range()?)
        } else {
            None
        };
        let mut names = vec![self.expect_ident()?];
        loop {
            match self.next()? {
                Some(Tok::Punct(b';')) => break,
                Some(Tok::Punct(b',')) => names.push(self.expect_ident()?),
                other => return Err(self.lx.err(format!("bad declaration near {other:?}"))),
            }
        }
        Ok((range, names))
    }

    fn parse_assign(&mut self) -> Result<Event> {
        let mut pairs = Vec::new();
        loop {
            let lhs = self.parse_net_ref()?;
            self.expect_punct(b'=')?;
            let rhs = self.parse_net_ref()?;
            pairs.push((lhs, rhs));
            match self.next()? {
                Some(Tok::Punct(b';')) => break,
                Some(Tok::Punct(b',')) => {}
                other => return Err(self.lx.err(format!("bad assign near {other:?}"))),
            }
        }
        Ok(Event::Assign(pairs))
    }

    fn parse_net_ref(&mut self) -> Result<NetRef> {
        match self.next()? {
            Some(Tok::Ident(name)) => {
                if matches!(self.peek()?, Some(Tok::Punct(b'['))) {
                    self.next()?;
                    let a = self.expect_number()?;
                    match self.next()? {
                        Some(Tok::Punct(b']')) => Ok(NetRef::Bit(name, a)),
                        Some(Tok::Punct(b':')) => {
                            let b = self.expect_number()?;
                            self.expect_punct(b']')?;
                            Ok(NetRef::Part(name, a, b))
                        }
                        other => Err(self.lx.err(format!("bad bit select near {other:?}"))),
                    }
                } else {
                    Ok(NetRef::Scalar(name))
                }
            }
            Some(Tok::SizedConst(bits)) => Ok(NetRef::Const(bits)),
            Some(Tok::Punct(b'{')) => {
                let mut parts = Vec::new();
                loop {
                    parts.push(self.parse_net_ref()?);
                    match self.next()? {
                        Some(Tok::Punct(b'}')) => break,
                        Some(Tok::Punct(b',')) => {}
                        other => return Err(self.lx.err(format!("bad concatenation near {other:?}"))),
                    }
                }
                Ok(NetRef::Concat(parts))
            }
            other => Err(self.lx.err(format!("expected net expression, found {other:?}"))),
        }
    }

    /// `MOD inst ( .a(x), .b(y) ) [, inst2 (...)] ;`
    fn parse_instances(&mut self, module: String) -> Result<Event> {
        // Ignore a parameter override `#( ... )`.
        if matches!(self.peek()?, Some(Tok::Punct(b'#'))) {
            self.next()?;
            self.expect_punct(b'(')?;
            let mut depth = 1;
            while depth > 0 {
                match self.next()? {
                    Some(Tok::Punct(b'(')) => depth += 1,
                    Some(Tok::Punct(b')')) => depth -= 1,
                    Some(_) => {}
                    None => return Err(self.lx.err("unterminated parameter list")),
                }
            }
        }
        let mut insts = Vec::new();
        loop {
            let name = self.expect_ident()?;
            self.expect_punct(b'(')?;
            let mut conns = Vec::new();
            loop {
                match self.next()? {
                    Some(Tok::Punct(b')')) => break,
                    Some(Tok::Punct(b',')) => {}
                    Some(Tok::Punct(b'.')) => {
                        let port = self.expect_ident()?;
                        self.expect_punct(b'(')?;
                        let nref = if matches!(self.peek()?, Some(Tok::Punct(b')'))) {
                            NetRef::Unconnected
                        } else {
                            self.parse_net_ref()?
                        };
                        self.expect_punct(b')')?;
                        conns.push((port, nref));
                    }
                    other => {
                        return Err(self.lx.err(format!(
                            "expected named port connection (`.port(net)`), found {other:?}"
                        )))
                    }
                }
            }
            insts.push(Instance { module: module.clone(), name, conns });
            match self.next()? {
                Some(Tok::Punct(b';')) => break,
                Some(Tok::Punct(b',')) => {}
                other => return Err(self.lx.err(format!("bad instance list near {other:?}"))),
            }
        }
        Ok(Event::Inst(insts))
    }
}

// ---------------------------------------------------------------------------
// Event folding
// ---------------------------------------------------------------------------

fn fold_events(events: Vec<Event>, file: &str) -> Result<VerilogDesign> {
    let mut design = VerilogDesign::default();
    let mut open: Option<VerilogModule> = None;
    for ev in events {
        match ev {
            Event::ModuleHead(name, ports) => {
                if open.is_some() {
                    return Err(Error::semantic(format!(
                        "{file}: nested `module {name}` before endmodule"
                    )));
                }
                open = Some(VerilogModule { name, ports, ..Default::default() });
            }
            Event::EndModule => match open.take() {
                Some(m) => design.push(m)?,
                None => return Err(Error::semantic(format!("{file}: stray endmodule"))),
            },
            other => {
                let m = open
                    .as_mut()
                    .ok_or_else(|| Error::semantic(format!("{file}: item outside module")))?;
                match other {
                    Event::PortDirDecl(dir, range, names) => {
                        for n in names {
                            match m.ports.iter_mut().find(|p| p.name == n) {
                                Some(p) => {
                                    p.dir = Some(dir);
                                    if range.is_some() {
                                        p.range = range;
                                    }
                                }
                                None => m.ports.push(PortDecl { name: n, dir: Some(dir), range }),
                            }
                        }
                    }
                    Event::Wire(range, names) => {
                        for n in names {
                            m.wires.push(WireDecl { name: n, range });
                        }
                    }
                    Event::Assign(pairs) => m.assigns.extend(pairs),
                    Event::Inst(insts) => m.instances.extend(insts),
                    Event::ModuleHead(..) | Event::EndModule => unreachable!(),
                }
            }
        }
    }
    if let Some(m) = open {
        return Err(Error::semantic(format!("{file}: module `{}` missing endmodule", m.name)));
    }
    Ok(design)
}

/// Parse a (possibly gzipped) structural Verilog source.
pub fn parse_verilog(file: &str, bytes: &[u8]) -> Result<VerilogDesign> {
    let data = chunk::decompress(bytes.to_vec())?;
    let mut p = Parser { lx: Lexer { src: &data, pos: 0, line: 1, file }, peeked: None };
    let events = p.parse_events()?;
    fold_events(events, file)
}

/// Chunk-parallel variant: split at statement boundaries, parse chunks
/// concurrently, and fold the concatenated event streams. Produces exactly
/// the serial result.
pub fn parse_verilog_chunked(file: &str, bytes: &[u8], chunks: usize) -> Result<VerilogDesign> {
    let data = chunk::decompress(bytes.to_vec())?;
    let ranges = chunk::split_chunks(&data, chunks.max(1), ChunkFormat::Verilog);
    let streams: Vec<Vec<Event>> = ranges
        .into_par_iter()
        .map(|r| {
            let mut p =
                Parser { lx: Lexer { src: &data[r.clone()], pos: 0, line: 1, file }, peeked: None };
            p.parse_events()
        })
        .collect::<Result<Vec<_>>>()?;
    fold_events(streams.into_iter().flatten().collect(), file)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = r#"
    module top (in, out);
      input in;
      output out;
      wire mid;
      INVX1 u1 ( .a(in), .y(mid) );
      INVX1 u2 ( .a(mid), .y(out) );
    endmodule
    "#;

    #[test]
    fn chain_parses() {
        let d = parse_verilog("chain.v", CHAIN.as_bytes()).unwrap();
        assert_eq!(d.modules.len(), 1);
        let m = d.module("top").unwrap();
        assert_eq!(m.instances.len(), 2);
        assert_eq!(m.ports.len(), 2);
        assert_eq!(m.ports[0].dir, Some(PortDir::Input));
        assert_eq!(m.instances[0].conns[0], ("a".into(), NetRef::Scalar("in".into())));
    }

    #[test]
    fn bus_and_constant_assign() {
        let src = "module m (y); output y; wire [3:0] b; assign b[0] = 1'b0; endmodule";
        let d = parse_verilog("m.v", src.as_bytes()).unwrap();
        let m = d.module("m").unwrap();
        assert_eq!(m.wires[0].range, Some(BusRange { msb: 3, lsb: 0 }));
        assert_eq!(m.wires[0].range.unwrap().width(), 4);
        assert_eq!(m.assigns.len(), 1);
        assert_eq!(m.assigns[0].0, NetRef::Bit("b".into(), 0));
        assert_eq!(m.assigns[0].1, NetRef::Const(vec![false]));
    }

    #[test]
    fn two_level_hierarchy() {
        let src = r#"
        module sub (a, y); input a; output y;
          INVX1 u0 ( .a(a), .y(y) );
        endmodule
        module top (in, out); input in; output out;
          sub s0 ( .a(in), .y(out) );
        endmodule
        "#;
        let d = parse_verilog("h.v", src.as_bytes()).unwrap();
        assert_eq!(d.modules.len(), 2);
        assert!(d.module("sub").is_some());
        assert_eq!(d.module("top").unwrap().instances[0].module, "sub");
    }

    #[test]
    fn behavioral_construct_is_named_in_error() {
        let src = "module m (a); input a; always @(posedge a) x <= 1; endmodule";
        let err = parse_verilog("m.v", src.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("always"), "{err}");
    }

    #[test]
    fn ansi_ports_and_concat() {
        let src = r#"
        module m (input clk, input [1:0] d, output [1:0] q);
          DFF r0 ( .CK(clk), .D(d[0]), .Q(q[0]) );
          DFF r1 ( .CK(clk), .D(d[1]), .Q(q[1]) );
          BUF2 b ( .a({d[1], d[0]}), .y(q) );
        endmodule
        "#;
        let d = parse_verilog("m.v", src.as_bytes()).unwrap();
        let m = d.module("m").unwrap();
        assert_eq!(m.ports[1].range, Some(BusRange { msb: 1, lsb: 0 }));
        match &m.instances[2].conns[0].1 {
            NetRef::Concat(parts) => assert_eq!(parts.len(), 2),
            other => panic!("expected concat, got {other:?}"),
        }
    }

    #[test]
    fn sized_literal_values() {
        let src = "module m (y); output [3:0] y; assign y = 4'b0101; endmodule";
        let d = parse_verilog("m.v", src.as_bytes()).unwrap();
        let m = d.module("m").unwrap();
        assert_eq!(m.assigns[0].1, NetRef::Const(vec![false, true, false, true]));
        let src = "module m (y); output [3:0] y; assign y = 4'hA; endmodule";
        let d = parse_verilog("m.v", src.as_bytes()).unwrap();
        assert_eq!(
            d.module("m").unwrap().assigns[0].1,
            NetRef::Const(vec![true, false, true, false])
        );
    }

    #[test]
    fn positional_connections_rejected() {
        let src = "module m (a, y); input a; output y; INVX1 u1 (a, y); endmodule";
        assert!(parse_verilog("m.v", src.as_bytes()).is_err());
    }

    #[test]
    fn chunked_equals_serial() {
        let mut src = String::new();
        for i in 0..20 {
            src.push_str(&format!(
                "module m{i} (a, y); input a; output y; INVX1 u ( .a(a), .y(y) ); endmodule\n"
            ));
        }
        let serial = parse_verilog("x.v", src.as_bytes()).unwrap();
        for n in [2, 3, 7, 64] {
            let chunked = parse_verilog_chunked("x.v", src.as_bytes(), n).unwrap();
            assert_eq!(chunked.modules, serial.modules, "chunks={n}");
        }
    }

    #[test]
    fn escaped_identifiers() {
        let src = "module m (a, y); input a; output y; INVX1 \\u$1 ( .a(a), .y(y) ); endmodule";
        let d = parse_verilog("m.v", src.as_bytes()).unwrap();
        assert_eq!(d.module("m").unwrap().instances[0].name, "u$1");
    }
}
