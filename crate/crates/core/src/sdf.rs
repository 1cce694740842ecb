//! SDF 3.0 subset: `DELAYFILE` header, `CELL` blocks with `ABSOLUTE`
//! `IOPATH` and `INTERCONNECT` entries. Delays scale through the header
//! `TIMESCALE` into ps. Unsupported constructs (conditional delays, timing
//! checks, edge-qualified ports) are skipped with a warning count.
//!
//! The writer half emits the same subset deterministically: 3-decimal ps
//! values as `(early::late)` pairs, one rise and one fall triple per entry.

use rayon::prelude::*;

use crate::chunk::{self, ChunkFormat};
use crate::error::{Error, Result};

/// One `min:typ:max` value, fields independently optional in the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdfTriple {
    pub min: Option<f64>,
    pub typ: Option<f64>,
    pub max: Option<f64>,
}

impl SdfTriple {
    /// Early-mode value: min preferred, then typ, then max.
    pub fn early(&self) -> f64 {
        self.min.or(self.typ).or(self.max).unwrap_or(0.0)
    }

    /// Late-mode value: max preferred, then typ, then min.
    pub fn late(&self) -> f64 {
        self.max.or(self.typ).or(self.min).unwrap_or(0.0)
    }

    fn scaled(self, s: f64) -> SdfTriple {
        SdfTriple {
            min: self.min.map(|v| v * s),
            typ: self.typ.map(|v| v * s),
            max: self.max.map(|v| v * s),
        }
    }

    /// Present fields must be finite and ordered min ≤ typ ≤ max.
    fn well_formed(&self) -> bool {
        if self.min.is_none() && self.typ.is_none() && self.max.is_none() {
            return false;
        }
        for v in [self.min, self.typ, self.max].into_iter().flatten() {
            if !v.is_finite() {
                return false;
            }
        }
        let lo = self.min.unwrap_or(f64::NEG_INFINITY);
        let hi = self.max.unwrap_or(f64::INFINITY);
        lo <= hi && self.typ.map_or(true, |t| t >= lo && t <= hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdfIoPath {
    pub instance: String,
    pub from: String,
    pub to: String,
    pub rise: SdfTriple,
    pub fall: SdfTriple,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdfInterconnect {
    /// Driver pin path, e.g. `u1/y` or a port name.
    pub from: String,
    pub to: String,
    pub rise: SdfTriple,
    pub fall: SdfTriple,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SdfEntry {
    IoPath(SdfIoPath),
    Interconnect(SdfInterconnect),
}

#[derive(Debug, Clone, Default)]
pub struct SdfData {
    pub entries: Vec<SdfEntry>,
    /// Count of constructs outside the supported subset.
    pub skipped: u64,
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Atom(String),
}

fn tokenize(file: &str, data: &[u8]) -> Result<Vec<Tok>> {
    let mut toks = Vec::new();
    let mut i = 0usize;
    let mut line = 1u32;
    while i < data.len() {
        match data[i] {
            b'\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            b'/' if data.get(i + 1) == Some(&b'/') => {
                while i < data.len() && data[i] != b'\n' {
                    i += 1;
                }
            }
            b'(' => {
                toks.push(Tok::LParen);
                i += 1;
            }
            b')' => {
                toks.push(Tok::RParen);
                i += 1;
            }
            b'"' => {
                i += 1;
                let start = i;
                while i < data.len() && data[i] != b'"' {
                    if data[i] == b'\n' {
                        line += 1;
                    }
                    i += 1;
                }
                if i >= data.len() {
                    return Err(Error::parse(file, line, i, "unterminated string"));
                }
                toks.push(Tok::Atom(String::from_utf8_lossy(&data[start..i]).into_owned()));
                i += 1;
            }
            _ => {
                let start = i;
                while i < data.len()
                    && !data[i].is_ascii_whitespace()
                    && data[i] != b'('
                    && data[i] != b')'
                {
                    i += 1;
                }
                toks.push(Tok::Atom(String::from_utf8_lossy(&data[start..i]).into_owned()));
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Cursor<'a> {
    toks: &'a [Tok],
    pos: usize,
    file: &'a str,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.file, 0, self.pos, msg)
    }

    fn peek(&self) -> Option<Tok> {
        self.toks.get(self.pos).cloned()
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn atom(&mut self) -> Result<String> {
        match self.next() {
            Some(Tok::Atom(s)) => Ok(s),
            other => Err(self.err(format!("expected atom, found {other:?}"))),
        }
    }

    /// Skip the remainder of a group whose `(` was already consumed.
    fn skip_group(&mut self) -> Result<()> {
        let mut depth = 1i32;
        loop {
            match self.next() {
                Some(Tok::LParen) => depth += 1,
                Some(Tok::RParen) => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(());
                    }
                }
                Some(Tok::Atom(_)) => {}
                None => return Err(self.err("unterminated group")),
            }
        }
    }
}

fn parse_timescale(args: &[String]) -> Result<f64> {
    // Accept "1ns", "1 ns", "10ps" ...
    let joined = args.join("");
    let split = joined
        .char_indices()
        .find(|(_, c)| c.is_ascii_alphabetic())
        .map(|(i, _)| i)
        .unwrap_or(joined.len());
    let num: f64 =
        if split == 0 { 1.0 } else { joined[..split].trim().parse().unwrap_or(1.0) };
    let mult = match joined[split..].trim().to_ascii_lowercase().as_str() {
        "s" => 1e12,
        "ms" => 1e9,
        "us" => 1e6,
        "ns" => 1e3,
        "ps" => 1.0,
        "fs" => 1e-3,
        u => return Err(Error::semantic(format!("unknown TIMESCALE unit `{u}`"))),
    };
    Ok(num * mult)
}

/// Parse one rvalue group: the `(` is already consumed. Joins the contents
/// and splits on `:`; one piece is a plain value, three are min:typ:max.
fn parse_rvalue(cur: &mut Cursor) -> Result<SdfTriple> {
    let mut text = String::new();
    loop {
        match cur.next() {
            Some(Tok::RParen) => break,
            Some(Tok::Atom(a)) => text.push_str(&a),
            other => return Err(cur.err(format!("bad rvalue near {other:?}"))),
        }
    }
    let pieces: Vec<&str> = text.split(':').collect();
    let parse_piece = |p: &str| -> Result<Option<f64>> {
        let p = p.trim();
        if p.is_empty() {
            return Ok(None);
        }
        p.parse::<f64>()
            .map(Some)
            .map_err(|_| Error::semantic(format!("malformed delay value `{p}`")))
    };
    let t = match pieces.len() {
        1 => {
            let v = parse_piece(pieces[0])?;
            SdfTriple { min: v, typ: v, max: v }
        }
        3 => SdfTriple {
            min: parse_piece(pieces[0])?,
            typ: parse_piece(pieces[1])?,
            max: parse_piece(pieces[2])?,
        },
        _ => return Err(Error::semantic(format!("malformed delay triple `({text})`"))),
    };
    if !t.well_formed() || t.early() > t.late() {
        return Err(Error::semantic(format!("malformed delay triple `({text})`: min > max")));
    }
    Ok(t)
}

/// Port atom inside IOPATH/INTERCONNECT. Edge-qualified forms like
/// `(posedge a)` are outside the subset: returns None (caller skips entry).
fn parse_port(cur: &mut Cursor) -> Result<Option<String>> {
    match cur.next() {
        Some(Tok::Atom(a)) => Ok(Some(a.clone())),
        Some(Tok::LParen) => {
            cur.skip_group()?;
            Ok(None)
        }
        other => Err(cur.err(format!("bad port near {other:?}"))),
    }
}

fn parse_cell(cur: &mut Cursor, scale: f64, divider: char, out: &mut SdfData) -> Result<()> {
    // `(CELL` already consumed.
    let mut instance = String::new();
    loop {
        match cur.next() {
            Some(Tok::RParen) => return Ok(()),
            Some(Tok::LParen) => {
                let kw = cur.atom()?;
                match kw.as_str() {
                    "CELLTYPE" => {
                        cur.skip_group()?;
                    }
                    "INSTANCE" => {
                        let mut path = String::new();
                        loop {
                            match cur.next() {
                                Some(Tok::RParen) => break,
                                Some(Tok::Atom(a)) => {
                                    if !path.is_empty() {
                                        path.push('/');
                                    }
                                    path.push_str(&a);
                                }
                                other => {
                                    return Err(cur.err(format!("bad INSTANCE near {other:?}")))
                                }
                            }
                        }
                        instance = if divider != '/' {
                            path.replace(divider, "/")
                        } else {
                            path
                        };
                    }
                    "DELAY" => parse_delay(cur, scale, divider, &instance, out)?,
                    _ => {
                        out.skipped += 1;
                        cur.skip_group()?;
                    }
                }
            }
            other => return Err(cur.err(format!("unexpected {other:?} in CELL"))),
        }
    }
}

fn parse_delay(
    cur: &mut Cursor,
    scale: f64,
    divider: char,
    instance: &str,
    out: &mut SdfData,
) -> Result<()> {
    loop {
        match cur.next() {
            Some(Tok::RParen) => return Ok(()),
            Some(Tok::LParen) => {
                let kw = cur.atom()?;
                if kw == "ABSOLUTE" || kw == "INCREMENT" {
                    if kw == "INCREMENT" {
                        // Incremental delays are outside the subset.
                        out.skipped += 1;
                        cur.skip_group()?;
                        continue;
                    }
                    parse_absolute(cur, scale, divider, instance, out)?;
                } else {
                    out.skipped += 1;
                    cur.skip_group()?;
                }
            }
            other => return Err(cur.err(format!("unexpected {other:?} in DELAY"))),
        }
    }
}

fn parse_absolute(
    cur: &mut Cursor,
    scale: f64,
    divider: char,
    instance: &str,
    out: &mut SdfData,
) -> Result<()> {
    loop {
        match cur.next() {
            Some(Tok::RParen) => return Ok(()),
            Some(Tok::LParen) => {
                let kw = cur.atom()?;
                match kw.as_str() {
                    "IOPATH" => {
                        let from = parse_port(cur)?;
                        let to = parse_port(cur)?;
                        let (Some(from), Some(to)) = (from, to) else {
                            out.skipped += 1;
                            cur.skip_group()?;
                            continue;
                        };
                        let (rise, fall) = parse_rvalue_pair(cur, scale)?;
                        out.entries.push(SdfEntry::IoPath(SdfIoPath {
                            instance: instance.to_string(),
                            from,
                            to,
                            rise,
                            fall,
                        }));
                    }
                    "INTERCONNECT" => {
                        let from = parse_port(cur)?;
                        let to = parse_port(cur)?;
                        let (Some(mut from), Some(mut to)) = (from, to) else {
                            out.skipped += 1;
                            cur.skip_group()?;
                            continue;
                        };
                        if divider != '/' {
                            from = from.replace(divider, "/");
                            to = to.replace(divider, "/");
                        }
                        let (rise, fall) = parse_rvalue_pair(cur, scale)?;
                        out.entries.push(SdfEntry::Interconnect(SdfInterconnect {
                            from,
                            to,
                            rise,
                            fall,
                        }));
                    }
                    _ => {
                        out.skipped += 1;
                        cur.skip_group()?;
                    }
                }
            }
            other => return Err(cur.err(format!("unexpected {other:?} in ABSOLUTE"))),
        }
    }
}

/// One or two rvalue groups, then the closing `)` of the entry. A single
/// rvalue applies to both rise and fall. Extra rvalues (the 6/12-value
/// forms) collapse onto the first two with a skip count.
fn parse_rvalue_pair(cur: &mut Cursor, scale: f64) -> Result<(SdfTriple, SdfTriple)> {
    let mut values: Vec<SdfTriple> = Vec::new();
    loop {
        match cur.next() {
            Some(Tok::RParen) => break,
            Some(Tok::LParen) => values.push(parse_rvalue(cur)?.scaled(scale)),
            other => return Err(cur.err(format!("bad delay list near {other:?}"))),
        }
    }
    match values.len() {
        0 => Err(Error::semantic("delay entry without values")),
        1 => Ok((values[0], values[0])),
        _ => Ok((values[0], values[1])),
    }
}

struct SdfHeader {
    scale: f64,
    divider: char,
}

fn parse_header_groups(cur: &mut Cursor, out: &mut SdfData) -> Result<SdfHeader> {
    // Consumes header groups until (but not including) the first CELL.
    let mut h = SdfHeader { scale: 1e3, divider: '/' }; // default TIMESCALE 1ns
    loop {
        match cur.peek() {
            Some(Tok::LParen) => {
                let save = cur.pos;
                cur.next();
                let kw = cur.atom()?;
                match kw.as_str() {
                    "CELL" => {
                        cur.pos = save;
                        return Ok(h);
                    }
                    "TIMESCALE" => {
                        let mut args = Vec::new();
                        loop {
                            match cur.next() {
                                Some(Tok::RParen) => break,
                                Some(Tok::Atom(a)) => args.push(a.clone()),
                                other => {
                                    return Err(cur.err(format!("bad TIMESCALE near {other:?}")))
                                }
                            }
                        }
                        h.scale = parse_timescale(&args)?;
                    }
                    "DIVIDER" => {
                        let d = cur.atom().unwrap_or_else(|_| "/".into());
                        h.divider = d.chars().next().unwrap_or('/');
                        cur.skip_group()?;
                    }
                    "SDFVERSION" | "DESIGN" | "DATE" | "VENDOR" | "PROGRAM" | "VERSION"
                    | "VOLTAGE" | "PROCESS" | "TEMPERATURE" => {
                        cur.skip_group()?;
                    }
                    _ => {
                        out.skipped += 1;
                        cur.skip_group()?;
                    }
                }
            }
            Some(Tok::RParen) | None => return Ok(h),
            other => return Err(cur.err(format!("unexpected {other:?} in header"))),
        }
    }
}

/// Parse a (possibly gzipped) SDF stream.
pub fn parse_sdf(file: &str, bytes: &[u8]) -> Result<SdfData> {
    parse_sdf_chunked(file, bytes, 1)
}

/// Chunk-parallel variant: the header parses serially, CELL blocks split
/// into `chunks` ranges parsed concurrently.
pub fn parse_sdf_chunked(file: &str, bytes: &[u8], chunks: usize) -> Result<SdfData> {
    let data = chunk::decompress(bytes.to_vec())?;

    // Serial header parse: everything before the first CELL boundary.
    let header_end = chunk::first_boundary(&data, ChunkFormat::Sdf).unwrap_or(data.len());
    let header_toks = tokenize(file, &data[..header_end])?;
    let mut out = SdfData::default();
    let mut cur = Cursor { toks: &header_toks, pos: 0, file };
    match cur.next() {
        Some(Tok::LParen) => {}
        other => return Err(cur.err(format!("expected `(DELAYFILE`, found {other:?}"))),
    }
    let kw = cur.atom()?;
    if kw != "DELAYFILE" {
        return Err(cur.err(format!("expected DELAYFILE, found `{kw}`")));
    }
    let header = parse_header_groups(&mut cur, &mut out)?;

    // Remaining header-chunk cells (when everything fit in one chunk).
    let body = &data[header_end.min(data.len())..];
    let mut tail_cur = cur;
    let mut head_out = SdfData::default();
    parse_cells(&mut tail_cur, &header, &mut head_out)?;

    let ranges = chunk::split_chunks(body, chunks.max(1), ChunkFormat::Sdf);
    let parts: Vec<SdfData> = ranges
        .into_par_iter()
        .map(|r| {
            let toks = tokenize(file, &body[r])?;
            let mut part = SdfData::default();
            let mut c = Cursor { toks: &toks, pos: 0, file };
            parse_cells(&mut c, &header, &mut part)?;
            Ok(part)
        })
        .collect::<Result<Vec<_>>>()?;

    out.entries.extend(head_out.entries);
    out.skipped += head_out.skipped;
    for p in parts {
        out.entries.extend(p.entries);
        out.skipped += p.skipped;
    }
    Ok(out)
}

/// Parse a sequence of `(CELL ...)` groups, tolerating the trailing `)` of
/// the enclosing DELAYFILE.
fn parse_cells(cur: &mut Cursor, header: &SdfHeader, out: &mut SdfData) -> Result<()> {
    loop {
        match cur.peek() {
            None => return Ok(()),
            Some(Tok::RParen) => {
                cur.next();
            }
            Some(Tok::LParen) => {
                cur.next();
                let kw = cur.atom()?;
                if kw == "CELL" {
                    parse_cell(cur, header.scale, header.divider, out)?;
                } else {
                    out.skipped += 1;
                    cur.skip_group()?;
                }
            }
            Some(Tok::Atom(a)) => {
                return Err(cur.err(format!("unexpected `{a}` between cells")));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Writer
// ---------------------------------------------------------------------------

/// Incremental SDF emitter producing the subset this module parses.
/// Values are ps, printed with 3 decimals as `(early::late)`.
pub struct SdfWriter {
    out: String,
    cell_open: bool,
}

fn fmt3(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v }; // normalize -0.0
    format!("{v:.3}")
}

impl SdfWriter {
    pub fn new(design: &str) -> SdfWriter {
        let mut out = String::with_capacity(4096);
        out.push_str("(DELAYFILE\n");
        out.push_str("  (SDFVERSION \"3.0\")\n");
        out.push_str(&format!("  (DESIGN \"{design}\")\n"));
        out.push_str("  (DIVIDER /)\n");
        out.push_str("  (TIMESCALE 1ps)\n");
        SdfWriter { out, cell_open: false }
    }

    pub fn start_cell(&mut self, celltype: &str, instance: &str) {
        self.end_cell();
        self.out.push_str("  (CELL\n");
        self.out.push_str(&format!("    (CELLTYPE \"{celltype}\")\n"));
        self.out.push_str(&format!("    (INSTANCE {instance})\n"));
        self.out.push_str("    (DELAY\n      (ABSOLUTE\n");
        self.cell_open = true;
    }

    pub fn iopath(
        &mut self,
        from: &str,
        to: &str,
        rise_early: f64,
        rise_late: f64,
        fall_early: f64,
        fall_late: f64,
    ) {
        self.out.push_str(&format!(
            "        (IOPATH {from} {to} ({}::{}) ({}::{}))\n",
            fmt3(rise_early),
            fmt3(rise_late),
            fmt3(fall_early),
            fmt3(fall_late)
        ));
    }

    pub fn interconnect(
        &mut self,
        from: &str,
        to: &str,
        rise_early: f64,
        rise_late: f64,
        fall_early: f64,
        fall_late: f64,
    ) {
        self.out.push_str(&format!(
            "        (INTERCONNECT {from} {to} ({}::{}) ({}::{}))\n",
            fmt3(rise_early),
            fmt3(rise_late),
            fmt3(fall_early),
            fmt3(fall_late)
        ));
    }

    fn end_cell(&mut self) {
        if self.cell_open {
            self.out.push_str("      )\n    )\n  )\n");
            self.cell_open = false;
        }
    }

    pub fn finish(mut self) -> String {
        self.end_cell();
        self.out.push_str(")\n");
        self.out
    }
}
