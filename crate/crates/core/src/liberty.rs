//! Liberty (.lib) parser covering the NLDM delay subset: table templates,
//! cells, pins (direction, capacitance, function, max_capacitance), and
//! timing groups for combinational, clock-to-output, setup, and hold arcs.
//! Everything else — power, noise, CCS — is skipped by brace matching and
//! counted.
//!
//! All values are normalized at parse time to the engine's internal units:
//! picoseconds, femtofarads, kiloohms. `slew_derate_from_library` is applied
//! as a multiplier on transition-table values.
//!
//! Multiple files merge into one library; templates may live in a different
//! file than the cells that reference them, so table resolution happens
//! after the merge.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::boolexpr::BoolExpr;
use crate::chunk;
use crate::error::{Error, Result};

/// 2-D NLDM lookup table. `index_1` is input slew (ps) for delay/slew
/// tables and data-pin slew for constraint tables; `index_2` is load
/// capacitance (fF) or clock-pin slew (ps). Either index may be empty:
/// one empty index makes the table 1-D over the other, both empty makes it
/// a scalar (single value).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lut2D {
    pub index_1: Vec<f64>,
    pub index_2: Vec<f64>,
    /// Row-major: `values[i * max(len2,1) + j]`.
    pub values: Vec<f64>,
}

impl Lut2D {
    pub fn scalar(v: f64) -> Lut2D {
        Lut2D { index_1: Vec::new(), index_2: Vec::new(), values: vec![v] }
    }

    pub fn rows(&self) -> usize {
        self.index_1.len().max(1)
    }

    pub fn cols(&self) -> usize {
        self.index_2.len().max(1)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols() + j]
    }

    fn validate(&self, ctx: &str) -> Result<()> {
        if self.values.len() != self.rows() * self.cols() {
            return Err(Error::semantic(format!(
                "{ctx}: table has {} values, expected {}x{}",
                self.values.len(),
                self.rows(),
                self.cols()
            )));
        }
        for idx in [&self.index_1, &self.index_2] {
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::semantic(format!("{ctx}: table index not strictly ascending")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinDir {
    Input,
    Output,
    Inout,
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArcKind {
    Combinational,
    RisingEdgeClkToQ,
    FallingEdgeClkToQ,
    SetupRising,
    SetupFalling,
    HoldRising,
    HoldFalling,
}

impl ArcKind {
    pub fn is_check(self) -> bool {
        matches!(
            self,
            ArcKind::SetupRising | ArcKind::SetupFalling | ArcKind::HoldRising | ArcKind::HoldFalling
        )
    }

    pub fn is_clk_to_q(self) -> bool {
        matches!(self, ArcKind::RisingEdgeClkToQ | ArcKind::FallingEdgeClkToQ)
    }

    pub fn is_setup(self) -> bool {
        matches!(self, ArcKind::SetupRising | ArcKind::SetupFalling)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    PositiveUnate,
    NegativeUnate,
    NonUnate,
}

/// One timing arc between two pins of a cell. Delay arcs carry
/// delay+transition tables; check arcs carry constraint tables.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingArc {
    /// Index of the related (source) pin within the cell.
    pub from_pin: u32,
    /// Index of the pin whose timing group declared the arc.
    pub to_pin: u32,
    pub sense: Sense,
    pub kind: ArcKind,
    pub when: Option<BoolExpr>,
    pub cell_rise: Option<Lut2D>,
    pub cell_fall: Option<Lut2D>,
    pub rise_transition: Option<Lut2D>,
    pub fall_transition: Option<Lut2D>,
    pub rise_constraint: Option<Lut2D>,
    pub fall_constraint: Option<Lut2D>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibertyPin {
    pub name: String,
    pub direction: PinDir,
    /// Input pin capacitance, fF.
    pub capacitance: f64,
    pub max_capacitance: Option<f64>,
    pub function: Option<BoolExpr>,
    pub is_clock: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibertyCell {
    pub name: String,
    pub pins: Vec<LibertyPin>,
    pub arcs: Vec<TimingArc>,
    /// Derived: the cell has clock-to-output or setup/hold arcs.
    pub is_sequential: bool,
}

impl LibertyCell {
    pub fn pin_index(&self, name: &str) -> Option<u32> {
        self.pins.iter().position(|p| p.name == name).map(|i| i as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateVar {
    InputSlew,
    LoadCap,
    RelatedSlew,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LutTemplate {
    pub name: String,
    pub var_1: Option<TemplateVar>,
    pub var_2: Option<TemplateVar>,
    /// Already scaled to ps/fF according to the declaring file's units.
    pub index_1: Vec<f64>,
    pub index_2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LibertyLibrary {
    pub name: String,
    /// ps per Liberty time unit of the first file (inherited by SDC).
    pub time_scale: f64,
    /// fF per Liberty capacitance unit of the first file.
    pub cap_scale: f64,
    /// kΩ per Liberty resistance unit of the first file.
    pub res_scale: f64,
    pub templates: Vec<LutTemplate>,
    pub cells: Vec<LibertyCell>,
    /// Count of groups/attributes outside the supported subset.
    pub skipped: u64,
    cell_index: HashMap<String, u32>,
}

impl LibertyLibrary {
    pub fn cell(&self, name: &str) -> Option<&LibertyCell> {
        self.cell_index.get(name).map(|&i| &self.cells[i as usize])
    }

    pub fn cell_id(&self, name: &str) -> Option<u32> {
        self.cell_index.get(name).copied()
    }

    /// Smallest slew value appearing on any slew axis; used as the default
    /// input transition when the SDC provides none.
    pub fn min_slew_index(&self) -> f64 {
        let mut m = f64::INFINITY;
        for t in &self.templates {
            for (var, idx) in [(t.var_1, &t.index_1), (t.var_2, &t.index_2)] {
                if var == Some(TemplateVar::InputSlew) {
                    if let Some(&v) = idx.first() {
                        m = m.min(v);
                    }
                }
            }
        }
        if m.is_finite() {
            m
        } else {
            1.0
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Semi,
    Comma,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    file: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(file: &'a str, src: &'a [u8]) -> Self {
        Lexer { src, pos: 0, line: 1, file }
    }

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
                Some(b'\\') if self.src.get(self.pos + 1) == Some(&b'\n') => {
                    self.line += 1;
                    self.pos += 2;
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
                Some(b'/') if self.src.get(self.pos + 1) == Some(&b'/') => {
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
        let tok = match c {
            b'{' => {
                self.pos += 1;
                Tok::LBrace
            }
            b'}' => {
                self.pos += 1;
                Tok::RBrace
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b':' => {
                self.pos += 1;
                Tok::Colon
            }
            b';' => {
                self.pos += 1;
                Tok::Semi
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            b'"' => {
                self.pos += 1;
                let mut s = String::new();
                loop {
                    match self.src.get(self.pos) {
                        None => return Err(self.err("unterminated string")),
                        Some(b'"') => {
                            self.pos += 1;
                            break;
                        }
                        Some(b'\\') if self.src.get(self.pos + 1) == Some(&b'\n') => {
                            // Continuation inside a quoted value list.
                            self.line += 1;
                            self.pos += 2;
                        }
                        Some(&b) => {
                            if b == b'\n' {
                                self.line += 1;
                            }
                            s.push(b as char);
                            self.pos += 1;
                        }
                    }
                }
                Tok::Str(s)
            }
            _ => {
                let start = self.pos;
                while self.pos < self.src.len() && !is_delim(self.src[self.pos]) {
                    self.pos += 1;
                }
                if self.pos == start {
                    return Err(self.err(format!("unexpected byte {:?}", c as char)));
                }
                Tok::Word(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
            }
        };
        Ok(Some(tok))
    }
}

fn is_delim(c: u8) -> bool {
    c.is_ascii_whitespace() || matches!(c, b'{' | b'}' | b'(' | b')' | b':' | b';' | b',' | b'"')
}

// ---------------------------------------------------------------------------
// Raw per-file parse
// ---------------------------------------------------------------------------

/// Table reference parsed inside a timing group; resolved against templates
/// after all files are merged.
#[derive(Debug, Clone)]
struct PendingTable {
    template: String,
    index_1: Option<Vec<f64>>,
    index_2: Option<Vec<f64>>,
    values: Vec<f64>,
}

#[derive(Debug, Clone)]
struct RawTiming {
    related_pins: Vec<String>,
    sense: Option<Sense>,
    kind: Option<ArcKind>,
    when: Option<BoolExpr>,
    tables: Vec<(&'static str, PendingTable)>,
    line: u32,
}

#[derive(Debug, Clone)]
struct RawPin {
    name: String,
    direction: PinDir,
    capacitance: f64,
    max_capacitance: Option<f64>,
    function: Option<BoolExpr>,
    is_clock: bool,
    timings: Vec<RawTiming>,
}

#[derive(Debug, Clone)]
struct RawCell {
    name: String,
    pins: Vec<RawPin>,
}

#[derive(Debug)]
struct RawFile {
    library_name: String,
    time_scale: f64,
    cap_scale: f64,
    res_scale: f64,
    slew_derate: f64,
    templates: Vec<LutTemplate>,
    cells: Vec<RawCell>,
    skipped: u64,
}

struct FileParser<'a> {
    lx: Lexer<'a>,
    peeked: Option<Tok>,
    out: RawFile,
}

impl<'a> FileParser<'a> {
    fn next(&mut self) -> Result<Option<Tok>> {
        if let Some(t) = self.peeked.take() {
            return Ok(Some(t));
        }
        self.lx.next()
    }

    fn expect(&mut self, want: &Tok) -> Result<()> {
        match self.next()? {
            Some(ref t) if t == want => Ok(()),
            other => Err(self.lx.err(format!("expected {want:?}, found {other:?}"))),
        }
    }

    fn peek(&mut self) -> Result<Option<&Tok>> {
        if self.peeked.is_none() {
            self.peeked = self.lx.next()?;
        }
        Ok(self.peeked.as_ref())
    }

    /// Consume a parenthesized argument list: words/strings separated by
    /// commas. The opening paren has already been consumed.
    fn args(&mut self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        loop {
            match self.next()? {
                Some(Tok::RParen) => break,
                Some(Tok::Comma) => {}
                Some(Tok::Word(w)) => out.push(w),
                Some(Tok::Str(s)) => out.push(s),
                other => return Err(self.lx.err(format!("unexpected {other:?} in argument list"))),
            }
        }
        Ok(out)
    }

    /// Simple attribute value after `name :` — one word or string, up to `;`.
    fn attr_value(&mut self) -> Result<String> {
        let v = match self.next()? {
            Some(Tok::Word(w)) => w,
            Some(Tok::Str(s)) => s,
            other => return Err(self.lx.err(format!("expected attribute value, found {other:?}"))),
        };
        // Tolerate a missing semicolon before `}` (seen in the wild).
        if matches!(self.peek()?, Some(Tok::Semi)) {
            self.next()?;
        }
        Ok(v)
    }

    /// Skip a group body (after `{`) by brace matching.
    fn skip_group_body(&mut self) -> Result<()> {
        let mut depth = 1u32;
        loop {
            match self.next()? {
                Some(Tok::LBrace) => depth += 1,
                Some(Tok::RBrace) => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(());
                    }
                }
                Some(_) => {}
                None => return Err(self.lx.err("unterminated group")),
            }
        }
    }

    /// After a `name ( args )`, a statement is either a complex attribute
    /// terminated by `;` (or nothing), or a group opened by `{`.
    fn finish_unknown_statement(&mut self) -> Result<()> {
        match self.peek()? {
            Some(Tok::LBrace) => {
                self.next()?;
                self.out.skipped += 1;
                self.skip_group_body()
            }
            Some(Tok::Semi) => {
                self.next()?;
                self.out.skipped += 1;
                Ok(())
            }
            _ => {
                self.out.skipped += 1;
                Ok(())
            }
        }
    }

    fn parse_file(&mut self) -> Result<()> {
        match self.next()? {
            Some(Tok::Word(w)) if w == "library" => {}
            other => return Err(self.lx.err(format!("expected `library`, found {other:?}"))),
        }
        self.expect(&Tok::LParen)?;
        let args = self.args()?;
        self.out.library_name = args.first().cloned().unwrap_or_default();
        self.expect(&Tok::LBrace)?;
        self.parse_library_body()
    }

    fn parse_library_body(&mut self) -> Result<()> {
        loop {
            match self.next()? {
                Some(Tok::RBrace) => return Ok(()),
                None => return Err(self.lx.err("unterminated library group")),
                Some(Tok::Word(w)) => match self.peek()? {
                    Some(Tok::Colon) => {
                        self.next()?;
                        let v = self.attr_value()?;
                        match w.as_str() {
                            "time_unit" => self.out.time_scale = parse_time_unit(&v)?,
                            "pulling_resistance_unit" => self.out.res_scale = parse_res_unit(&v)?,
                            "slew_derate_from_library" => {
                                self.out.slew_derate = parse_num(&v)
                                    .ok_or_else(|| self.lx.err("bad slew_derate_from_library"))?
                            }
                            _ => self.out.skipped += 1,
                        }
                    }
                    Some(Tok::LParen) => {
                        self.next()?;
                        let args = self.args()?;
                        match w.as_str() {
                            "capacitive_load_unit" => {
                                self.out.cap_scale = parse_cap_unit(&args)?;
                                if matches!(self.peek()?, Some(Tok::Semi)) {
                                    self.next()?;
                                }
                            }
                            "lu_table_template" => {
                                self.expect(&Tok::LBrace)?;
                                self.parse_template(args)?;
                            }
                            "cell" => {
                                self.expect(&Tok::LBrace)?;
                                self.parse_cell(args)?;
                            }
                            _ => self.finish_unknown_statement()?,
                        }
                    }
                    _ => {
                        // Bare word statement; ignore.
                        self.out.skipped += 1;
                    }
                },
                Some(Tok::Semi) => {}
                Some(other) => {
                    return Err(self.lx.err(format!("unexpected {other:?} in library body")))
                }
            }
        }
    }

    fn parse_template(&mut self, args: Vec<String>) -> Result<()> {
        let name = args
            .first()
            .cloned()
            .ok_or_else(|| self.lx.err("lu_table_template needs a name"))?;
        let mut t = LutTemplate {
            name,
            var_1: None,
            var_2: None,
            index_1: Vec::new(),
            index_2: Vec::new(),
        };
        loop {
            match self.next()? {
                Some(Tok::RBrace) => break,
                Some(Tok::Word(w)) => match self.peek()? {
                    Some(Tok::Colon) => {
                        self.next()?;
                        let v = self.attr_value()?;
                        match w.as_str() {
                            "variable_1" => t.var_1 = template_var(&v),
                            "variable_2" => t.var_2 = template_var(&v),
                            _ => self.out.skipped += 1,
                        }
                    }
                    Some(Tok::LParen) => {
                        self.next()?;
                        let args = self.args()?;
                        match w.as_str() {
                            "index_1" => t.index_1 = parse_num_list(&args),
                            "index_2" => t.index_2 = parse_num_list(&args),
                            _ => self.finish_unknown_statement()?,
                        }
                        if matches!(self.peek()?, Some(Tok::Semi)) {
                            self.next()?;
                        }
                    }
                    _ => self.out.skipped += 1,
                },
                Some(Tok::Semi) => {}
                other => return Err(self.lx.err(format!("unexpected {other:?} in template"))),
            }
        }
        // Scale indices to internal units right away, using this file's units.
        let scale = |var: Option<TemplateVar>, idx: &mut Vec<f64>, ts: f64, cs: f64| {
            let s = match var {
                Some(TemplateVar::LoadCap) => cs,
                _ => ts,
            };
            for v in idx.iter_mut() {
                *v *= s;
            }
        };
        scale(t.var_1, &mut t.index_1, self.out.time_scale, self.out.cap_scale);
        scale(t.var_2, &mut t.index_2, self.out.time_scale, self.out.cap_scale);
        self.out.templates.push(t);
        Ok(())
    }

    fn parse_cell(&mut self, args: Vec<String>) -> Result<()> {
        let name = args.first().cloned().ok_or_else(|| self.lx.err("cell needs a name"))?;
        let mut cell = RawCell { name, pins: Vec::new() };
        loop {
            match self.next()? {
                Some(Tok::RBrace) => break,
                Some(Tok::Word(w)) => match self.peek()? {
                    Some(Tok::Colon) => {
                        self.next()?;
                        self.attr_value()?;
                        self.out.skipped += 1;
                    }
                    Some(Tok::LParen) => {
                        self.next()?;
                        let args = self.args()?;
                        if w == "pin" {
                            self.expect(&Tok::LBrace)?;
                            let pin = self.parse_pin(args)?;
                            cell.pins.push(pin);
                        } else {
                            self.finish_unknown_statement()?;
                        }
                    }
                    _ => self.out.skipped += 1,
                },
                Some(Tok::Semi) => {}
                other => return Err(self.lx.err(format!("unexpected {other:?} in cell"))),
            }
        }
        self.out.cells.push(cell);
        Ok(())
    }

    fn parse_pin(&mut self, args: Vec<String>) -> Result<RawPin> {
        let name = args.first().cloned().ok_or_else(|| self.lx.err("pin needs a name"))?;
        let mut pin = RawPin {
            name,
            direction: PinDir::Input,
            capacitance: 0.0,
            max_capacitance: None,
            function: None,
            is_clock: false,
            timings: Vec::new(),
        };
        loop {
            match self.next()? {
                Some(Tok::RBrace) => break,
                Some(Tok::Word(w)) => match self.peek()? {
                    Some(Tok::Colon) => {
                        self.next()?;
                        let v = self.attr_value()?;
                        match w.as_str() {
                            "direction" => {
                                pin.direction = match v.as_str() {
                                    "input" => PinDir::Input,
                                    "output" => PinDir::Output,
                                    "inout" => PinDir::Inout,
                                    "internal" => PinDir::Internal,
                                    _ => {
                                        return Err(self.lx.err(format!("bad pin direction `{v}`")))
                                    }
                                }
                            }
                            "capacitance" => {
                                pin.capacitance = parse_num(&v)
                                    .ok_or_else(|| self.lx.err("bad capacitance"))?
                                    * self.out.cap_scale;
                            }
                            "max_capacitance" => {
                                pin.max_capacitance = Some(
                                    parse_num(&v).ok_or_else(|| self.lx.err("bad max_capacitance"))?
                                        * self.out.cap_scale,
                                );
                            }
                            "function" => pin.function = Some(BoolExpr::parse(&v)?),
                            "clock" => pin.is_clock = v == "true",
                            _ => self.out.skipped += 1,
                        }
                    }
                    Some(Tok::LParen) => {
                        self.next()?;
                        let args = self.args()?;
                        if w == "timing" {
                            self.expect(&Tok::LBrace)?;
                            let t = self.parse_timing()?;
                            pin.timings.push(t);
                        } else {
                            let _ = args;
                            self.finish_unknown_statement()?;
                        }
                    }
                    _ => self.out.skipped += 1,
                },
                Some(Tok::Semi) => {}
                other => return Err(self.lx.err(format!("unexpected {other:?} in pin"))),
            }
        }
        Ok(pin)
    }

    fn parse_timing(&mut self) -> Result<RawTiming> {
        let mut t = RawTiming {
            related_pins: Vec::new(),
            sense: None,
            kind: None,
            when: None,
            tables: Vec::new(),
            line: self.lx.line,
        };
        loop {
            match self.next()? {
                Some(Tok::RBrace) => break,
                Some(Tok::Word(w)) => match self.peek()? {
                    Some(Tok::Colon) => {
                        self.next()?;
                        let v = self.attr_value()?;
                        match w.as_str() {
                            "related_pin" => {
                                t.related_pins =
                                    v.split_whitespace().map(|s| s.to_string()).collect()
                            }
                            "timing_sense" => {
                                t.sense = Some(match v.as_str() {
                                    "positive_unate" => Sense::PositiveUnate,
                                    "negative_unate" => Sense::NegativeUnate,
                                    "non_unate" => Sense::NonUnate,
                                    _ => return Err(self.lx.err(format!("bad timing_sense `{v}`"))),
                                })
                            }
                            "timing_type" => t.kind = arc_kind(&v),
                            "when" => t.when = Some(BoolExpr::parse(&v)?),
                            _ => self.out.skipped += 1,
                        }
                    }
                    Some(Tok::LParen) => {
                        self.next()?;
                        let args = self.args()?;
                        const TABLES: [&str; 6] = [
                            "cell_rise",
                            "cell_fall",
                            "rise_transition",
                            "fall_transition",
                            "rise_constraint",
                            "fall_constraint",
                        ];
                        if let Some(&tname) = TABLES.iter().find(|&&n| n == w) {
                            self.expect(&Tok::LBrace)?;
                            let table = self.parse_table_body(args)?;
                            t.tables.push((tname, table));
                        } else {
                            self.finish_unknown_statement()?;
                        }
                    }
                    _ => self.out.skipped += 1,
                },
                Some(Tok::Semi) => {}
                other => return Err(self.lx.err(format!("unexpected {other:?} in timing group"))),
            }
        }
        if t.related_pins.is_empty() {
            return Err(self.lx.err("timing group without related_pin"));
        }
        Ok(t)
    }

    fn parse_table_body(&mut self, args: Vec<String>) -> Result<PendingTable> {
        let template = args.first().cloned().unwrap_or_else(|| "scalar".to_string());
        let mut tbl = PendingTable { template, index_1: None, index_2: None, values: Vec::new() };
        loop {
            match self.next()? {
                Some(Tok::RBrace) => break,
                Some(Tok::Word(w)) => match self.peek()? {
                    Some(Tok::LParen) => {
                        self.next()?;
                        let args = self.args()?;
                        match w.as_str() {
                            "index_1" => tbl.index_1 = Some(parse_num_list(&args)),
                            "index_2" => tbl.index_2 = Some(parse_num_list(&args)),
                            "values" => tbl.values = parse_num_list(&args),
                            _ => self.finish_unknown_statement()?,
                        }
                        if matches!(self.peek()?, Some(Tok::Semi)) {
                            self.next()?;
                        }
                    }
                    Some(Tok::Colon) => {
                        self.next()?;
                        self.attr_value()?;
                        self.out.skipped += 1;
                    }
                    _ => self.out.skipped += 1,
                },
                Some(Tok::Semi) => {}
                other => return Err(self.lx.err(format!("unexpected {other:?} in table"))),
            }
        }
        Ok(tbl)
    }
}

fn template_var(v: &str) -> Option<TemplateVar> {
    match v {
        "input_net_transition" | "input_transition_time" | "constrained_pin_transition" => {
            Some(TemplateVar::InputSlew)
        }
        "total_output_net_capacitance" => Some(TemplateVar::LoadCap),
        "related_pin_transition" => Some(TemplateVar::RelatedSlew),
        _ => None,
    }
}

fn arc_kind(v: &str) -> Option<ArcKind> {
    match v {
        "combinational" | "combinational_rise" | "combinational_fall" => Some(ArcKind::Combinational),
        "rising_edge" => Some(ArcKind::RisingEdgeClkToQ),
        "falling_edge" => Some(ArcKind::FallingEdgeClkToQ),
        "setup_rising" => Some(ArcKind::SetupRising),
        "setup_falling" => Some(ArcKind::SetupFalling),
        "hold_rising" => Some(ArcKind::HoldRising),
        "hold_falling" => Some(ArcKind::HoldFalling),
        _ => None,
    }
}

fn parse_num(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}

fn parse_num_list(args: &[String]) -> Vec<f64> {
    let mut out = Vec::new();
    for a in args {
        for piece in a.split(|c: char| c == ',' || c.is_whitespace()) {
            if piece.is_empty() {
                continue;
            }
            if let Some(v) = parse_num(piece) {
                out.push(v);
            }
        }
    }
    out
}

/// `"1ns"` → ps per unit.
fn parse_time_unit(v: &str) -> Result<f64> {
    let (num, unit) = split_unit(v);
    let mult = match unit {
        "s" => 1e12,
        "ms" => 1e9,
        "us" => 1e6,
        "ns" => 1e3,
        "ps" => 1.0,
        "fs" => 1e-3,
        _ => return Err(Error::semantic(format!("unknown time unit `{v}`"))),
    };
    Ok(num * mult)
}

/// `(1, pf)` → fF per unit.
fn parse_cap_unit(args: &[String]) -> Result<f64> {
    if args.len() != 2 {
        return Err(Error::semantic("capacitive_load_unit expects (value, unit)"));
    }
    let num = parse_num(&args[0])
        .ok_or_else(|| Error::semantic("bad capacitive_load_unit value"))?;
    let mult = match args[1].to_ascii_lowercase().as_str() {
        "f" => 1e15,
        "uf" => 1e9,
        "nf" => 1e6,
        "pf" => 1e3,
        "ff" => 1.0,
        u => return Err(Error::semantic(format!("unknown capacitance unit `{u}`"))),
    };
    Ok(num * mult)
}

/// `"1kohm"` → kΩ per unit.
fn parse_res_unit(v: &str) -> Result<f64> {
    let (num, unit) = split_unit(v);
    let mult = match unit.to_ascii_lowercase().as_str() {
        "kohm" => 1.0,
        "ohm" => 1e-3,
        "mohm" => 1e3,
        _ => return Err(Error::semantic(format!("unknown resistance unit `{v}`"))),
    };
    Ok(num * mult)
}

fn split_unit(v: &str) -> (f64, &str) {
    let v = v.trim();
    let split = v
        .char_indices()
        .find(|(_, c)| c.is_ascii_alphabetic())
        .map(|(i, _)| i)
        .unwrap_or(v.len());
    let num = if split == 0 { 1.0 } else { v[..split].trim().parse::<f64>().unwrap_or(1.0) };
    (num, v[split..].trim())
}

// ---------------------------------------------------------------------------
// Merge + link
// ---------------------------------------------------------------------------

/// Parse one or more Liberty sources (each optionally gzipped) and merge
/// them into a single library. Files parse in parallel; the merged result is
/// independent of file order apart from which file's units become the
/// library defaults (the first file wins).
pub fn parse_liberty(sources: &[(&str, &[u8])]) -> Result<LibertyLibrary> {
    if sources.is_empty() {
        return Err(Error::usage("at least one liberty file is required"));
    }
    let raws: Vec<RawFile> = sources
        .par_iter()
        .map(|(name, bytes)| parse_one(name, bytes))
        .collect::<Result<Vec<_>>>()?;
    link(raws)
}

fn parse_one(file: &str, bytes: &[u8]) -> Result<RawFile> {
    let data = chunk::decompress(bytes.to_vec())?;
    let mut p = FileParser {
        lx: Lexer::new(file, &data),
        peeked: None,
        out: RawFile {
            library_name: String::new(),
            // Defaults per the Liberty reference when units are undeclared.
            time_scale: 1e3,  // 1ns
            cap_scale: 1e3,   // 1pf
            res_scale: 1.0,   // 1kohm
            slew_derate: 1.0,
            templates: Vec::new(),
            cells: Vec::new(),
            skipped: 0,
        },
    };
    p.parse_file()?;
    Ok(p.out)
}

fn link(raws: Vec<RawFile>) -> Result<LibertyLibrary> {
    let mut templates: Vec<LutTemplate> = Vec::new();
    let mut tmpl_index: HashMap<String, usize> = HashMap::new();
    for raw in &raws {
        for t in &raw.templates {
            match tmpl_index.get(&t.name) {
                Some(&i) => {
                    if templates[i] != *t {
                        return Err(Error::semantic(format!(
                            "template `{}` redefined with different content",
                            t.name
                        )));
                    }
                }
                None => {
                    tmpl_index.insert(t.name.clone(), templates.len());
                    templates.push(t.clone());
                }
            }
        }
    }

    let mut lib = LibertyLibrary {
        name: raws[0].library_name.clone(),
        time_scale: raws[0].time_scale,
        cap_scale: raws[0].cap_scale,
        res_scale: raws[0].res_scale,
        templates,
        cells: Vec::new(),
        skipped: raws.iter().map(|r| r.skipped).sum(),
        cell_index: HashMap::new(),
    };

    for raw in &raws {
        for rcell in &raw.cells {
            let cell = link_cell(rcell, raw, &lib, &tmpl_index)?;
            match lib.cell_index.get(&cell.name) {
                Some(&i) => {
                    if lib.cells[i as usize] != cell {
                        return Err(Error::semantic(format!(
                            "cell `{}` redefined with conflicting content",
                            cell.name
                        )));
                    }
                }
                None => {
                    lib.cell_index.insert(cell.name.clone(), lib.cells.len() as u32);
                    lib.cells.push(cell);
                }
            }
        }
    }
    log_debug!(
        "liberty: {} cells, {} templates, {} skipped constructs",
        lib.cells.len(),
        lib.templates.len(),
        lib.skipped
    );
    Ok(lib)
}

fn link_cell(
    raw: &RawCell,
    file: &RawFile,
    lib: &LibertyLibrary,
    tmpl_index: &HashMap<String, usize>,
) -> Result<LibertyCell> {
    let pins: Vec<LibertyPin> = raw
        .pins
        .iter()
        .map(|p| LibertyPin {
            name: p.name.clone(),
            direction: p.direction,
            capacitance: p.capacitance,
            max_capacitance: p.max_capacitance,
            function: p.function.clone(),
            is_clock: p.is_clock,
        })
        .collect();

    // Validate function references.
    for p in &pins {
        if let Some(f) = &p.function {
            let mut vars = Vec::new();
            f.vars(&mut vars);
            for v in &vars {
                if !pins.iter().any(|q| q.name == *v) {
                    return Err(Error::semantic(format!(
                        "cell `{}` pin `{}`: function references unknown pin `{v}`",
                        raw.name, p.name
                    )));
                }
            }
        }
    }

    let mut arcs = Vec::new();
    for (pi, rpin) in raw.pins.iter().enumerate() {
        for t in &rpin.timings {
            let kind = match t.kind {
                Some(k) => k,
                None if t.tables.iter().any(|(n, _)| n.ends_with("constraint")) => {
                    // A constraint table without a recognized timing_type is
                    // outside the subset; skip the whole arc.
                    continue;
                }
                None => ArcKind::Combinational,
            };
            for related in &t.related_pins {
                let Some(from) = pins.iter().position(|p| p.name == *related) else {
                    return Err(Error::semantic(format!(
                        "cell `{}`: related_pin `{related}` not found (line {})",
                        raw.name, t.line
                    )));
                };
                let mut arc = TimingArc {
                    from_pin: from as u32,
                    to_pin: pi as u32,
                    sense: t.sense.unwrap_or(if kind.is_clk_to_q() {
                        Sense::NonUnate
                    } else {
                        Sense::PositiveUnate
                    }),
                    kind,
                    when: t.when.clone(),
                    cell_rise: None,
                    cell_fall: None,
                    rise_transition: None,
                    fall_transition: None,
                    rise_constraint: None,
                    fall_constraint: None,
                };
                for (tname, ptab) in &t.tables {
                    let is_transition = tname.ends_with("transition");
                    let lut = resolve_table(ptab, file, lib, tmpl_index, is_transition)
                        .map_err(|e| {
                            Error::semantic(format!(
                                "cell `{}` pin `{}` {tname}: {e}",
                                raw.name, rpin.name
                            ))
                        })?;
                    match *tname {
                        "cell_rise" => arc.cell_rise = Some(lut),
                        "cell_fall" => arc.cell_fall = Some(lut),
                        "rise_transition" => arc.rise_transition = Some(lut),
                        "fall_transition" => arc.fall_transition = Some(lut),
                        "rise_constraint" => arc.rise_constraint = Some(lut),
                        "fall_constraint" => arc.fall_constraint = Some(lut),
                        _ => unreachable!(),
                    }
                }
                let has_delay = arc.cell_rise.is_some()
                    || arc.cell_fall.is_some()
                    || arc.rise_transition.is_some()
                    || arc.fall_transition.is_some();
                let has_check = arc.rise_constraint.is_some() || arc.fall_constraint.is_some();
                if has_delay && has_check {
                    return Err(Error::semantic(format!(
                        "cell `{}` pin `{}`: arc mixes delay and constraint tables",
                        raw.name, rpin.name
                    )));
                }
                if kind.is_check() && has_delay {
                    return Err(Error::semantic(format!(
                        "cell `{}` pin `{}`: check arc carries delay tables",
                        raw.name, rpin.name
                    )));
                }
                if !kind.is_check() && has_check {
                    return Err(Error::semantic(format!(
                        "cell `{}` pin `{}`: delay arc carries constraint tables",
                        raw.name, rpin.name
                    )));
                }
                arcs.push(arc);
            }
        }
    }

    let is_sequential = arcs.iter().any(|a| a.kind.is_clk_to_q() || a.kind.is_check())
        || pins.iter().any(|p| p.is_clock);

    Ok(LibertyCell { name: raw.name.clone(), pins, arcs, is_sequential })
}

/// Resolve a pending table against its template, normalize the axis order to
/// (slew, cap) / (constrained slew, related slew), scale values to ps, and
/// apply the slew derate on transition tables.
fn resolve_table(
    ptab: &PendingTable,
    file: &RawFile,
    lib: &LibertyLibrary,
    tmpl_index: &HashMap<String, usize>,
    is_transition: bool,
) -> Result<Lut2D> {
    let value_scale = file.time_scale * if is_transition { file.slew_derate } else { 1.0 };
    if ptab.template == "scalar" && !tmpl_index.contains_key("scalar") {
        if ptab.values.len() != 1 {
            return Err(Error::semantic("scalar table must have exactly one value"));
        }
        return Ok(Lut2D::scalar(ptab.values[0] * value_scale));
    }
    let Some(&ti) = tmpl_index.get(&ptab.template) else {
        return Err(Error::semantic(format!("unknown table template `{}`", ptab.template)));
    };
    let tmpl = &lib.templates[ti];

    // Index overrides in the instance are in the cell file's units.
    let scale_for = |var: Option<TemplateVar>| match var {
        Some(TemplateVar::LoadCap) => file.cap_scale,
        _ => file.time_scale,
    };
    let idx1: Vec<f64> = match &ptab.index_1 {
        Some(v) => v.iter().map(|x| x * scale_for(tmpl.var_1)).collect(),
        None => tmpl.index_1.clone(),
    };
    let idx2: Vec<f64> = match &ptab.index_2 {
        Some(v) => v.iter().map(|x| x * scale_for(tmpl.var_2)).collect(),
        None => tmpl.index_2.clone(),
    };
    let values: Vec<f64> = ptab.values.iter().map(|v| v * value_scale).collect();

    // Normalize axis order: index_1 must be the (input/constrained) slew
    // axis, index_2 the load-cap (or related-slew) axis.
    let needs_swap = matches!(tmpl.var_1, Some(TemplateVar::LoadCap) | Some(TemplateVar::RelatedSlew))
        && matches!(tmpl.var_2, Some(TemplateVar::InputSlew));
    let lut = if needs_swap {
        let (r, c) = (idx1.len().max(1), idx2.len().max(1));
        if values.len() != r * c {
            return Err(Error::semantic(format!(
                "table has {} values, expected {}x{}",
                values.len(),
                r,
                c
            )));
        }
        let mut tv = vec![0.0; values.len()];
        for i in 0..r {
            for j in 0..c {
                tv[j * r + i] = values[i * c + j];
            }
        }
        Lut2D { index_1: idx2, index_2: idx1, values: tv }
    } else {
        Lut2D { index_1: idx1, index_2: idx2, values }
    };
    lut.validate("liberty table")?;
    Ok(lut)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
    library (demo) {
      time_unit : "1ns";
      capacitive_load_unit (1, pf);
      lu_table_template (t22) {
        variable_1 : input_net_transition;
        variable_2 : total_output_net_capacitance;
        index_1 ("0.1, 0.2");
        index_2 ("0.001, 0.002");
      }
      cell (INVX1) {
        pin (a) { direction : input; capacitance : 0.001; }
        pin (y) {
          direction : output;
          function : "!a";
          timing () {
            related_pin : "a";
            timing_sense : negative_unate;
            cell_rise (t22) { values ("0.5, 0.6", "0.7, 0.8"); }
            cell_fall (t22) { values ("0.4, 0.5", "0.6, 0.7"); }
            rise_transition (t22) { values ("0.1, 0.2", "0.3, 0.4"); }
            fall_transition (t22) { values ("0.1, 0.2", "0.3, 0.4"); }
          }
        }
      }
    }
    "#;

    #[test]
    fn minimal_inverter_parses() {
        let lib = parse_liberty(&[("demo.lib", MINIMAL.as_bytes())]).unwrap();
        assert_eq!(lib.cells.len(), 1);
        let cell = lib.cell("INVX1").unwrap();
        assert_eq!(cell.arcs.len(), 1);
        let arc = &cell.arcs[0];
        assert_eq!(arc.sense, Sense::NegativeUnate);
        assert_eq!(arc.kind, ArcKind::Combinational);
        let cr = arc.cell_rise.as_ref().unwrap();
        // time_unit 1ns: 0.5 → 500 ps; index_2 0.001 pf → 1 fF.
        assert_eq!(cr.at(0, 0), 500.0);
        assert_eq!(cr.index_1, vec![100.0, 200.0]);
        assert_eq!(cr.index_2, vec![1.0, 2.0]);
        // pin cap 0.001 pf → 1 fF.
        assert_eq!(cell.pins[0].capacitance, 1.0);
        assert!(!cell.is_sequential);
    }

    #[test]
    fn split_files_merge_to_same_library() {
        // The template in one file, the cell in another.
        let split_at = MINIMAL.find("cell (INVX1)").unwrap();
        let head = format!("{}}}", &MINIMAL[..split_at]);
        let tail = format!(
            "library (demo) {{ time_unit : \"1ns\"; capacitive_load_unit (1, pf); {}",
            &MINIMAL[split_at..]
        );
        let merged =
            parse_liberty(&[("a.lib", head.as_bytes()), ("b.lib", tail.as_bytes())]).unwrap();
        let single = parse_liberty(&[("demo.lib", MINIMAL.as_bytes())]).unwrap();
        assert_eq!(merged.cells, single.cells);
        assert_eq!(merged.templates, single.templates);
        // Merge order must not matter.
        let swapped =
            parse_liberty(&[("b.lib", tail.as_bytes()), ("a.lib", head.as_bytes())]).unwrap();
        assert_eq!(swapped.cells, single.cells);
    }

    #[test]
    fn unit_scaling_follows_declarations() {
        for (unit, scale) in [("1ps", 1.0), ("1ns", 1e3), ("10ps", 10.0)] {
            let src = format!(
                r#"library (u) {{ time_unit : "{unit}";
                   cell (B) {{ pin (a) {{ direction : input; }}
                     pin (y) {{ direction : output;
                       timing () {{ related_pin : "a";
                         cell_rise (scalar) {{ values ("0.5"); }}
                         cell_fall (scalar) {{ values ("0.5"); }}
                         rise_transition (scalar) {{ values ("0.5"); }}
                         fall_transition (scalar) {{ values ("0.5"); }}
                       }} }} }} }}"#
            );
            let lib = parse_liberty(&[("u.lib", src.as_bytes())]).unwrap();
            let arc = &lib.cells[0].arcs[0];
            assert_eq!(arc.cell_rise.as_ref().unwrap().values[0], 0.5 * scale);
        }
    }

    #[test]
    fn slew_derate_applies_to_transition_tables_only() {
        let src = r#"library (d) { time_unit : "1ps"; slew_derate_from_library : 0.5;
          cell (B) { pin (a) { direction : input; }
            pin (y) { direction : output;
              timing () { related_pin : "a";
                cell_rise (scalar) { values ("100"); }
                cell_fall (scalar) { values ("100"); }
                rise_transition (scalar) { values ("40"); }
                fall_transition (scalar) { values ("40"); }
              } } } }"#;
        let lib = parse_liberty(&[("d.lib", src.as_bytes())]).unwrap();
        let arc = &lib.cells[0].arcs[0];
        assert_eq!(arc.cell_rise.as_ref().unwrap().values[0], 100.0);
        assert_eq!(arc.rise_transition.as_ref().unwrap().values[0], 20.0);
    }

    #[test]
    fn unknown_groups_are_skipped_by_brace_matching() {
        let src = r#"library (d) { time_unit : "1ps";
          operating_conditions (typ) { process : 1; temperature : 25; }
          cell (B) {
            leakage_power () { value : 1.0; when : "a"; }
            pin (a) { direction : input; internal_power () { rise_power (x) { values("1"); } } }
            pin (y) { direction : output;
              timing () { related_pin : "a";
                cell_rise (scalar) { values ("1"); }
                cell_fall (scalar) { values ("1"); }
                rise_transition (scalar) { values ("1"); }
                fall_transition (scalar) { values ("1"); }
              } } } }"#;
        let lib = parse_liberty(&[("d.lib", src.as_bytes())]).unwrap();
        assert_eq!(lib.cells.len(), 1);
        assert!(lib.skipped >= 3);
    }

    #[test]
    fn sequential_cell_detection_and_checks() {
        let src = r#"library (d) { time_unit : "1ps";
          cell (DFF) {
            pin (CK) { direction : input; clock : true; }
            pin (D) { direction : input;
              timing () { related_pin : "CK"; timing_type : setup_rising;
                rise_constraint (scalar) { values ("10"); }
                fall_constraint (scalar) { values ("10"); }
              }
              timing () { related_pin : "CK"; timing_type : hold_rising;
                rise_constraint (scalar) { values ("2"); }
                fall_constraint (scalar) { values ("2"); }
              } }
            pin (Q) { direction : output;
              timing () { related_pin : "CK"; timing_type : rising_edge;
                cell_rise (scalar) { values ("50"); }
                cell_fall (scalar) { values ("50"); }
                rise_transition (scalar) { values ("5"); }
                fall_transition (scalar) { values ("5"); }
              } } } }"#;
        let lib = parse_liberty(&[("d.lib", src.as_bytes())]).unwrap();
        let dff = lib.cell("DFF").unwrap();
        assert!(dff.is_sequential);
        assert_eq!(dff.arcs.len(), 3);
        assert_eq!(dff.arcs.iter().filter(|a| a.kind.is_check()).count(), 2);
        assert_eq!(dff.arcs.iter().filter(|a| a.kind.is_clk_to_q()).count(), 1);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let src = r#"library (d) { time_unit : "1ps";
          lu_table_template (t) {
            variable_1 : input_net_transition;
            variable_2 : total_output_net_capacitance;
            index_1 ("1, 2"); index_2 ("1, 2");
          }
          cell (B) { pin (a) { direction : input; }
            pin (y) { direction : output;
              timing () { related_pin : "a";
                cell_rise (t) { values ("1, 2, 3"); }
              } } } }"#;
        assert!(parse_liberty(&[("d.lib", src.as_bytes())]).is_err());
    }

    #[test]
    fn swapped_template_axes_are_normalized() {
        let src = r#"library (d) { time_unit : "1ps"; capacitive_load_unit(1, ff);
          lu_table_template (t) {
            variable_1 : total_output_net_capacitance;
            variable_2 : input_net_transition;
            index_1 ("1, 2, 3"); index_2 ("10, 20");
          }
          cell (B) { pin (a) { direction : input; }
            pin (y) { direction : output;
              timing () { related_pin : "a";
                cell_rise (t) { values ("1, 2", "3, 4", "5, 6"); }
                cell_fall (t) { values ("1, 2", "3, 4", "5, 6"); }
                rise_transition (t) { values ("1, 2", "3, 4", "5, 6"); }
                fall_transition (t) { values ("1, 2", "3, 4", "5, 6"); }
              } } } }"#;
        let lib = parse_liberty(&[("d.lib", src.as_bytes())]).unwrap();
        let cr = lib.cells[0].arcs[0].cell_rise.as_ref().unwrap();
        // After normalization index_1 is the slew axis.
        assert_eq!(cr.index_1, vec![10.0, 20.0]);
        assert_eq!(cr.index_2, vec![1.0, 2.0, 3.0]);
        // Original values[cap][slew]: value at (slew=20, cap=3) was 6.
        assert_eq!(cr.at(1, 2), 6.0);
    }

    #[test]
    fn duplicate_cell_conflict_detected() {
        let a = r#"library (d) { time_unit : "1ps";
          cell (B) { pin (a) { direction : input; capacitance : 1; } } }"#;
        let b = r#"library (d) { time_unit : "1ps";
          cell (B) { pin (a) { direction : input; capacitance : 2; } } }"#;
        assert!(parse_liberty(&[("a.lib", a.as_bytes()), ("b.lib", b.as_bytes())]).is_err());
        // Identical duplicates merge fine.
        assert!(parse_liberty(&[("a.lib", a.as_bytes()), ("a2.lib", a.as_bytes())]).is_ok());
    }

    #[test]
    fn gzipped_library_parses() {
        use std::io::Write;
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(MINIMAL.as_bytes()).unwrap();
        let gz = enc.finish().unwrap();
        let lib = parse_liberty(&[("demo.lib.gz", &gz)]).unwrap();
        assert_eq!(lib.cells.len(), 1);
    }
}
