//! SDC constraint model and script evaluation. The data types here are the
//! interface consumed by graph construction and timing propagation; script
//! evaluation (further down) dispatches the registered SDC commands through
//! the mini-Tcl interpreter onto a `Constraints` under construction.

use std::collections::BTreeMap;

/// Which analysis modes a value applies to (`-min`/`-max` flags).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSel {
    Early,
    Late,
    Both,
}

impl ModeSel {
    pub fn covers(self, mode: crate::mode::Mode) -> bool {
        match self {
            ModeSel::Both => true,
            ModeSel::Early => mode == crate::mode::Mode::Early,
            ModeSel::Late => mode == crate::mode::Mode::Late,
        }
    }
}

/// Which data edges a value applies to (`-rise`/`-fall` flags).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSel {
    Rise,
    Fall,
    Both,
}

impl EdgeSel {
    pub fn covers(self, edge: crate::mode::Edge) -> bool {
        match self {
            EdgeSel::Both => true,
            EdgeSel::Rise => edge == crate::mode::Edge::Rise,
            EdgeSel::Fall => edge == crate::mode::Edge::Fall,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdcClock {
    pub name: String,
    /// ps
    pub period: f64,
    /// Rise and fall edge times within one period, ps.
    pub rise_edge: f64,
    pub fall_edge: f64,
    /// Source pins (ports or internal pins) this clock is defined on.
    pub sources: Vec<u32>,
}

impl SdcClock {
    pub fn edge_time(&self, e: crate::mode::Edge) -> f64 {
        match e {
            crate::mode::Edge::Rise => self.rise_edge,
            crate::mode::Edge::Fall => self.fall_edge,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IoDelay {
    /// Port pin the delay is set on.
    pub pin: u32,
    /// Referenced clock id.
    pub clock: u32,
    pub mode: ModeSel,
    pub edge: EdgeSel,
    /// Delay is relative to the falling clock edge (`-clock_fall`).
    pub clock_fall: bool,
    /// ps
    pub value: f64,
    pub is_input: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExceptionKind {
    FalsePath,
    Multicycle {
        n: u32,
        /// Applies to setup (`-setup`, the default) or hold (`-hold`).
        setup: bool,
        /// Capture-anchored (`-end`) vs launch-anchored (`-start`).
        anchor_end: bool,
    },
    /// ps
    MaxDelay(f64),
    /// ps
    MinDelay(f64),
}

/// Resolved object set referenced by an exception segment: explicit pins
/// plus clock ids (which expand to clocked register pins at compile time).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeSet {
    pub pins: Vec<u32>,
    pub clocks: Vec<u32>,
}

impl NodeSet {
    pub fn is_empty(&self) -> bool {
        self.pins.is_empty() && self.clocks.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathException {
    pub kind: ExceptionKind,
    pub from: NodeSet,
    pub through: Vec<NodeSet>,
    pub to: NodeSet,
    /// Declaration index; later wins within equal kind precedence.
    pub priority: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseValue {
    pub pin: u32,
    pub value: bool,
}

/// One `set_disable_timing` target.
#[derive(Debug, Clone, PartialEq)]
pub enum Disable {
    /// All graph edges touching this pin.
    Pin(u32),
    /// Arcs of one cell instance, optionally narrowed to lib pin names.
    Cell { cell: u32, from: Option<String>, to: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Constraints {
    pub clocks: Vec<SdcClock>,
    pub io_delays: Vec<IoDelay>,
    pub exceptions: Vec<PathException>,
    pub case_values: Vec<CaseValue>,
    /// Port pin -> driving input slew ps, per [early, late].
    pub port_slew: BTreeMap<u32, [f64; 2]>,
    /// Port pin -> extra load, fF.
    pub port_load: BTreeMap<u32, f64>,
    pub disables: Vec<Disable>,
}

impl Constraints {
    pub fn clock_id(&self, name: &str) -> Option<u32> {
        self.clocks.iter().position(|c| c.name == name).map(|i| i as u32)
    }
}

// ---------------------------------------------------------------------------
// Script evaluation
// ---------------------------------------------------------------------------

use crate::error::{Error, Result};
use crate::liberty::LibertyLibrary;
use crate::netlist::{Dir, FlatNetlist, NameIndex};
use crate::tcl::{split_list, Host, Interp};

/// Run an SDC script against a netlist, producing constraints. Time and
/// capacitance units default to the library's units; `set_units` overrides.
pub fn eval_sdc(script: &str, nl: &FlatNetlist, lib: &LibertyLibrary) -> Result<Constraints> {
    eval_sdc_full(script, nl, lib).map(|(cns, _)| cns)
}

/// Like [`eval_sdc`], but also returns the warning lines
/// (`SDC-WARN <line>: <msg>`) the run produced.
pub fn eval_sdc_full(
    script: &str,
    nl: &FlatNetlist,
    lib: &LibertyLibrary,
) -> Result<(Constraints, Vec<String>)> {
    let mut host = SdcHost {
        nl,
        idx: NameIndex::build(nl),
        unit_time: lib.time_scale,
        unit_cap: lib.cap_scale,
        cns: Constraints::default(),
        warnings: Vec::new(),
        empty_patterns: Vec::new(),
    };
    let mut interp = Interp::new();
    interp.eval(script, &mut host)?;
    Ok((host.cns, host.warnings))
}

/// Simple `*`/`?` matcher.
fn glob_match(pat: &str, s: &str) -> bool {
    let (pat, s) = (pat.as_bytes(), s.as_bytes());
    let (mut p, mut i) = (0usize, 0usize);
    let (mut star, mut mark) = (usize::MAX, 0usize);
    while i < s.len() {
        if p < pat.len() && (pat[p] == b'?' || pat[p] == s[i]) {
            p += 1;
            i += 1;
        } else if p < pat.len() && pat[p] == b'*' {
            star = p;
            mark = i;
            p += 1;
        } else if star != usize::MAX {
            p = star + 1;
            mark += 1;
            i = mark;
        } else {
            return false;
        }
    }
    while p < pat.len() && pat[p] == b'*' {
        p += 1;
    }
    p == pat.len()
}

/// One argument to a registered command: `-flag`, `-flag value`, or a
/// positional word. A leading `-` followed by a digit or `.` is a number.
fn is_flag(tok: &str) -> bool {
    tok.len() > 1
        && tok.starts_with('-')
        && !tok.as_bytes()[1].is_ascii_digit()
        && tok.as_bytes()[1] != b'.'
}

struct Parsed {
    /// Valued flags in argument order (flag name without `-`, value).
    valued: Vec<(String, String)>,
    bools: Vec<String>,
    positional: Vec<String>,
}

impl Parsed {
    fn value(&self, flag: &str) -> Option<&str> {
        self.valued.iter().find(|(f, _)| f == flag).map(|(_, v)| v.as_str())
    }

    fn values(&self, flags: &[&str]) -> Vec<&str> {
        self.valued
            .iter()
            .filter(|(f, _)| flags.contains(&f.as_str()))
            .map(|(_, v)| v.as_str())
            .collect()
    }

    fn has(&self, flag: &str) -> bool {
        self.bools.iter().any(|f| f == flag)
    }

    fn mode_sel(&self) -> ModeSel {
        match (self.has("min"), self.has("max")) {
            (true, false) => ModeSel::Early,
            (false, true) => ModeSel::Late,
            _ => ModeSel::Both,
        }
    }

    fn edge_sel(&self) -> EdgeSel {
        match (self.has("rise"), self.has("fall")) {
            (true, false) => EdgeSel::Rise,
            (false, true) => EdgeSel::Fall,
            _ => EdgeSel::Both,
        }
    }
}

/// Object-list contexts: what a token may resolve to.
#[derive(Clone, Copy, PartialEq)]
enum SetCtx {
    /// `-from`/`-to`: clocks, pins, cells (as their pins).
    FromTo,
    /// `-through`: pins, cells, nets (both as their pins); clocks dropped.
    Through,
    /// Port-only commands (io delays, transitions, loads).
    Ports,
    /// Any pin, port or instance (case analysis).
    Pins,
}

struct SdcHost<'a> {
    nl: &'a FlatNetlist,
    idx: NameIndex,
    /// ps per SDC time unit.
    unit_time: f64,
    /// fF per SDC capacitance unit.
    unit_cap: f64,
    cns: Constraints,
    warnings: Vec<String>,
    /// Query patterns that matched nothing, pending a consuming command's
    /// empty-set error message.
    empty_patterns: Vec<String>,
}

impl Host for SdcHost<'_> {
    fn call(&mut self, name: &str, args: &[String], line: u32) -> Result<Option<String>> {
        let r = self.dispatch(name, args, line);
        if !matches!(name, "get_ports" | "get_pins" | "get_cells" | "get_nets" | "get_clocks") {
            self.empty_patterns.clear();
        }
        r.map(Some)
    }
}

impl SdcHost<'_> {
    fn warn(&mut self, line: u32, msg: impl std::fmt::Display) {
        let w = format!("SDC-WARN {line}: {msg}");
        crate::log_warn!("{w}");
        self.warnings.push(w);
    }

    fn err(&self, line: u32, msg: impl std::fmt::Display) -> Error {
        Error::semantic(format!("line {line}: {msg}"))
    }

    fn dispatch(&mut self, name: &str, args: &[String], line: u32) -> Result<String> {
        match name {
            "get_ports" => self.query(args, line, "port"),
            "get_pins" => self.query(args, line, "pin"),
            "get_cells" => self.query(args, line, "cell"),
            "get_nets" => self.query(args, line, "net"),
            "get_clocks" => self.query(args, line, "clock"),
            "all_inputs" => Ok(self.all_ports(true)),
            "all_outputs" => Ok(self.all_ports(false)),
            "all_clocks" => Ok(self
                .cns
                .clocks
                .iter()
                .map(|c| format!("clock:{}", c.name))
                .collect::<Vec<_>>()
                .join(" ")),
            "create_clock" => self.create_clock(args, line),
            "set_input_delay" => self.io_delay(args, line, true),
            "set_output_delay" => self.io_delay(args, line, false),
            "set_false_path" => self.exception(args, line, name),
            "set_multicycle_path" => self.exception(args, line, name),
            "set_max_delay" => self.exception(args, line, name),
            "set_min_delay" => self.exception(args, line, name),
            "set_case_analysis" => self.case_analysis(args, line),
            "set_input_transition" => self.input_transition(args, line),
            "set_load" => self.load(args, line),
            "set_disable_timing" => self.disable_timing(args, line),
            "set_units" => self.set_units(args, line),
            "create_generated_clock" | "set_clock_groups" => {
                self.warn(line, format!("`{name}` is not supported; ignored"));
                Ok(String::new())
            }
            _ => {
                self.warn(line, format!("unknown command `{name}` skipped"));
                Ok(String::new())
            }
        }
    }

    /// Split flags from positionals. `valued` flags consume the next token.
    fn parse_args(&mut self, args: &[String], valued: &[&str], line: u32) -> Parsed {
        let mut out = Parsed { valued: Vec::new(), bools: Vec::new(), positional: Vec::new() };
        let mut i = 0;
        while i < args.len() {
            let tok = &args[i];
            if is_flag(tok) {
                let flag = tok[1..].to_string();
                if valued.contains(&flag.as_str()) {
                    if i + 1 >= args.len() {
                        self.warn(line, format!("option `-{flag}` is missing its value"));
                    } else {
                        out.valued.push((flag, args[i + 1].clone()));
                        i += 1;
                    }
                } else {
                    out.bools.push(flag);
                }
            } else {
                out.positional.push(tok.clone());
            }
            i += 1;
        }
        out
    }

    fn known_bools(&mut self, p: &Parsed, known: &[&str], line: u32) {
        for b in p.bools.clone() {
            if !known.contains(&b.as_str()) {
                self.warn(line, format!("unknown option `-{b}` ignored"));
            }
        }
    }

    fn parse_num(&self, text: &str, what: &str, line: u32) -> Result<f64> {
        text.trim()
            .parse::<f64>()
            .map_err(|_| self.err(line, format!("bad {what} `{text}`")))
    }

    // -- object queries ----------------------------------------------------

    fn query(&mut self, args: &[String], line: u32, kind: &str) -> Result<String> {
        let parsed = self.parse_args(args, &[], line);
        self.known_bools(&parsed, &["quiet"], line);
        let mut patterns = Vec::new();
        for pos in &parsed.positional {
            patterns.extend(split_list(pos));
        }
        if patterns.is_empty() {
            patterns.push("*".to_string());
        }
        let matches = |name: &str| patterns.iter().any(|p| glob_match(p, name));
        let mut out = Vec::new();
        match kind {
            "port" => {
                for pin in 0..self.nl.num_pins() as u32 {
                    if self.nl.pin_is_port(pin) && matches(self.nl.pin_full_name(pin)) {
                        out.push(format!("port:{}", self.nl.pin_full_name(pin)));
                    }
                }
            }
            "pin" => {
                for pin in 0..self.nl.num_pins() as u32 {
                    if !self.nl.pin_is_port(pin) && matches(self.nl.pin_full_name(pin)) {
                        out.push(format!("pin:{}", self.nl.pin_full_name(pin)));
                    }
                }
            }
            "cell" => {
                for cell in 0..self.nl.num_cells() as u32 {
                    if matches(self.nl.cell_full_name(cell)) {
                        out.push(format!("cell:{}", self.nl.cell_full_name(cell)));
                    }
                }
            }
            "net" => {
                for net in 0..self.nl.num_nets() as u32 {
                    if matches(self.nl.net_full_name(net)) {
                        out.push(format!("net:{}", self.nl.net_full_name(net)));
                    }
                }
            }
            "clock" => {
                for c in &self.cns.clocks {
                    if matches(&c.name) {
                        out.push(format!("clock:{}", c.name));
                    }
                }
            }
            _ => unreachable!(),
        }
        if out.is_empty() {
            self.empty_patterns.push(patterns.join(" "));
        }
        Ok(out.join(" "))
    }

    fn all_ports(&self, inputs: bool) -> String {
        let want = if inputs { Dir::In } else { Dir::Out };
        let mut out = Vec::new();
        for pin in 0..self.nl.num_pins() as u32 {
            if self.nl.pin_is_port(pin) {
                let dir = self.nl.pin_dir[pin as usize];
                if dir == want || dir == Dir::Inout {
                    out.push(format!("port:{}", self.nl.pin_full_name(pin)));
                }
            }
        }
        out.join(" ")
    }

    /// Error text for a required-but-empty object set, naming the query
    /// pattern when one was recorded.
    fn empty_err(&self, line: u32, what: &str, raw: &[&str]) -> Error {
        if let Some(pat) = self.empty_patterns.first() {
            self.err(line, format!("{what}: `{pat}` matched no objects"))
        } else {
            self.err(line, format!("{what}: `{}` matched no objects", raw.join(" ")))
        }
    }

    /// Resolve object tokens (tagged query results, or bare names) into a
    /// `NodeSet` according to context.
    fn resolve_set(&mut self, texts: &[&str], ctx: SetCtx, line: u32) -> NodeSet {
        let mut set = NodeSet::default();
        let mut seen_pins = std::collections::BTreeSet::new();
        let mut push_pin = |set: &mut NodeSet, pin: u32| {
            if seen_pins.insert(pin) {
                set.pins.push(pin);
            }
        };
        for text in texts {
            for tok in split_list(text) {
                let (tag, name) = match tok.split_once(':') {
                    Some((t, n)) if ["port", "pin", "cell", "net", "clock"].contains(&t) => {
                        (Some(t.to_string()), n.to_string())
                    }
                    _ => (None, tok.clone()),
                };
                match tag.as_deref() {
                    Some("port") | Some("pin") => {
                        if let Some(pin) = self.idx.pin(self.nl, &name) {
                            if ctx == SetCtx::Ports && !self.nl.pin_is_port(pin) {
                                self.warn(line, format!("`{name}` is not a port; skipped"));
                            } else {
                                push_pin(&mut set, pin);
                            }
                        }
                    }
                    Some("cell") => match ctx {
                        SetCtx::Ports => {
                            self.warn(line, format!("cell `{name}` is not a port; skipped"))
                        }
                        _ => {
                            if let Some(cell) = self.idx.cell(self.nl, &name) {
                                for &pin in self.nl.cell_pins(cell) {
                                    push_pin(&mut set, pin);
                                }
                            }
                        }
                    },
                    Some("net") => match ctx {
                        SetCtx::Through => {
                            if let Some(net) = self.idx.net(self.nl, &name) {
                                for &pin in self.nl.net_pins(net) {
                                    push_pin(&mut set, pin);
                                }
                            }
                        }
                        _ => self.warn(line, format!("net `{name}` not valid here; skipped")),
                    },
                    Some("clock") => match ctx {
                        SetCtx::FromTo => {
                            if let Some(id) = self.cns.clock_id(&name) {
                                if !set.clocks.contains(&id) {
                                    set.clocks.push(id);
                                }
                            }
                        }
                        _ => self.warn(line, format!("clock `{name}` not valid here; skipped")),
                    },
                    _ => {
                        // Bare name: try the kinds this context accepts.
                        if ctx == SetCtx::FromTo {
                            if let Some(id) = self.cns.clock_id(&name) {
                                if !set.clocks.contains(&id) {
                                    set.clocks.push(id);
                                }
                                continue;
                            }
                        }
                        if let Some(pin) = self.idx.pin(self.nl, &name) {
                            if ctx == SetCtx::Ports && !self.nl.pin_is_port(pin) {
                                self.warn(line, format!("`{name}` is not a port; skipped"));
                            } else {
                                push_pin(&mut set, pin);
                            }
                            continue;
                        }
                        if ctx != SetCtx::Ports {
                            if let Some(cell) = self.idx.cell(self.nl, &name) {
                                for &pin in self.nl.cell_pins(cell) {
                                    push_pin(&mut set, pin);
                                }
                                continue;
                            }
                        }
                        if ctx == SetCtx::Through {
                            if let Some(net) = self.idx.net(self.nl, &name) {
                                for &pin in self.nl.net_pins(net) {
                                    push_pin(&mut set, pin);
                                }
                                continue;
                            }
                        }
                        self.empty_patterns.push(name.clone());
                    }
                }
            }
        }
        set
    }

    // -- commands ----------------------------------------------------------

    fn create_clock(&mut self, args: &[String], line: u32) -> Result<String> {
        let p = self.parse_args(args, &["period", "name", "waveform"], line);
        self.known_bools(&p, &["add"], line);
        let period_text = p
            .value("period")
            .ok_or_else(|| self.err(line, "create_clock requires -period"))?
            .to_string();
        let period = self.parse_num(&period_text, "period", line)? * self.unit_time;
        if period <= 0.0 {
            return Err(self.err(line, format!("period must be positive, got {period_text}")));
        }
        let (rise_edge, fall_edge) = match p.value("waveform").map(str::to_string) {
            Some(w) => {
                let items = split_list(&w);
                if items.len() != 2 {
                    return Err(self.err(line, "-waveform takes exactly two edge times"));
                }
                let r = self.parse_num(&items[0], "waveform edge", line)? * self.unit_time;
                let f = self.parse_num(&items[1], "waveform edge", line)? * self.unit_time;
                if !(0.0 <= r && r < f && f < period) {
                    return Err(self
                        .err(line, format!("waveform must satisfy 0 <= rise < fall < period, got {w}")));
                }
                (r, f)
            }
            None => (0.0, period / 2.0),
        };
        let raw: Vec<&str> = p.positional.iter().map(|s| s.as_str()).collect();
        let sources = self.resolve_set(&raw, SetCtx::Pins, line);
        if !p.positional.is_empty() && sources.pins.is_empty() {
            return Err(self.empty_err(line, "create_clock source", &raw));
        }
        let name = match p.value("name") {
            Some(n) => n.to_string(),
            None => match sources.pins.first() {
                Some(&pin) => self.nl.pin_full_name(pin).to_string(),
                None => return Err(self.err(line, "create_clock needs -name or a source port")),
            },
        };
        let clock =
            SdcClock { name: name.clone(), period, rise_edge, fall_edge, sources: sources.pins };
        match self.cns.clock_id(&name) {
            Some(id) => {
                self.warn(line, format!("clock `{name}` redefined"));
                self.cns.clocks[id as usize] = clock;
            }
            None => self.cns.clocks.push(clock),
        }
        Ok(String::new())
    }

    fn io_delay(&mut self, args: &[String], line: u32, is_input: bool) -> Result<String> {
        let cmd = if is_input { "set_input_delay" } else { "set_output_delay" };
        let p = self.parse_args(args, &["clock"], line);
        self.known_bools(&p, &["min", "max", "rise", "fall", "clock_fall", "add_delay"], line);
        if p.positional.is_empty() {
            return Err(self.err(line, format!("{cmd} requires a delay value")));
        }
        let value = self.parse_num(&p.positional[0], "delay", line)? * self.unit_time;
        let clock_text = p
            .value("clock")
            .ok_or_else(|| self.err(line, format!("{cmd} requires -clock")))?
            .to_string();
        let clock = self.resolve_clock(&clock_text, line)?;
        let raw: Vec<&str> = p.positional[1..].iter().map(|s| s.as_str()).collect();
        let ports = self.resolve_set(&raw, SetCtx::Ports, line);
        if ports.pins.is_empty() {
            return Err(self.empty_err(line, cmd, &raw));
        }
        let mode = p.mode_sel();
        let edge = p.edge_sel();
        let clock_fall = p.has("clock_fall");
        for &pin in &ports.pins {
            let dir = self.nl.pin_dir[pin as usize];
            let ok = match dir {
                Dir::Inout => true,
                Dir::In => is_input,
                Dir::Out => !is_input,
            };
            if !ok {
                return Err(self.err(
                    line,
                    format!("{cmd}: port `{}` has the wrong direction", self.nl.pin_full_name(pin)),
                ));
            }
            if !p.has("add_delay") {
                self.cns.io_delays.retain(|d| {
                    !(d.pin == pin
                        && d.is_input == is_input
                        && d.clock == clock
                        && d.clock_fall == clock_fall
                        && d.mode == mode
                        && d.edge == edge)
                });
            }
            self.cns.io_delays.push(IoDelay { pin, clock, mode, edge, clock_fall, value, is_input });
        }
        Ok(String::new())
    }

    fn resolve_clock(&mut self, text: &str, line: u32) -> Result<u32> {
        let items = split_list(text);
        if items.len() != 1 {
            return Err(self.err(line, format!("expected one clock, got `{text}`")));
        }
        let name = items[0].strip_prefix("clock:").unwrap_or(&items[0]);
        self.cns
            .clock_id(name)
            .ok_or_else(|| self.err(line, format!("clock `{name}` is not defined")))
    }

    /// Shared for the four path-exception commands.
    fn exception(&mut self, args: &[String], line: u32, cmd: &str) -> Result<String> {
        let p = self.parse_args(
            args,
            &[
                "from", "to", "through", "rise_from", "fall_from", "rise_to", "fall_to",
                "rise_through", "fall_through",
            ],
            line,
        );
        self.known_bools(&p, &["setup", "hold", "start", "end"], line);
        for (flag, _) in p.valued.clone() {
            if flag.starts_with("rise_") || flag.starts_with("fall_") {
                self.warn(line, format!("edge-qualified `-{flag}` treated as `-{}`", &flag[5..]));
            }
        }

        let resolve_group = |host: &mut Self, flags: &[&str], ctx: SetCtx| -> Result<Option<NodeSet>> {
            let texts = p.values(flags);
            if texts.is_empty() {
                return Ok(None);
            }
            let set = host.resolve_set(&texts, ctx, line);
            if set.is_empty() {
                return Err(host.empty_err(line, &format!("{cmd} -{}", flags[0]), &texts));
            }
            Ok(Some(set))
        };
        let from = resolve_group(self, &["from", "rise_from", "fall_from"], SetCtx::FromTo)?
            .unwrap_or_default();
        let to =
            resolve_group(self, &["to", "rise_to", "fall_to"], SetCtx::FromTo)?.unwrap_or_default();
        let mut through = Vec::new();
        for (flag, text) in p.valued.clone() {
            if flag == "through" || flag == "rise_through" || flag == "fall_through" {
                let set = self.resolve_set(&[text.as_str()], SetCtx::Through, line);
                if set.is_empty() {
                    return Err(self.empty_err(line, &format!("{cmd} -through"), &[text.as_str()]));
                }
                through.push(set);
            }
        }
        if from.is_empty() && to.is_empty() && through.is_empty() {
            return Err(self.err(line, format!("{cmd} needs at least one of -from/-through/-to")));
        }

        let push = |host: &mut Self, kind: ExceptionKind| {
            let priority = host.cns.exceptions.len() as u32;
            host.cns.exceptions.push(PathException {
                kind,
                from: from.clone(),
                through: through.clone(),
                to: to.clone(),
                priority,
            });
        };
        match cmd {
            "set_false_path" => {
                if p.has("setup") || p.has("hold") {
                    self.warn(line, "set_false_path applies to both setup and hold here; -setup/-hold ignored");
                }
                push(self, ExceptionKind::FalsePath);
            }
            "set_multicycle_path" => {
                if p.positional.len() != 1 {
                    return Err(self.err(line, "set_multicycle_path takes one multiplier"));
                }
                let n: u32 = p.positional[0]
                    .parse()
                    .ok()
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| {
                        self.err(line, format!("bad multiplier `{}`; need an integer >= 1", p.positional[0]))
                    })?;
                let explicit_anchor = match (p.has("start"), p.has("end")) {
                    (true, false) => Some(false),
                    (false, true) => Some(true),
                    _ => None,
                };
                // Default applies to setup; -hold selects hold; both emit two.
                let setup = p.has("setup") || !p.has("hold");
                let hold = p.has("hold");
                if setup {
                    let anchor_end = explicit_anchor.unwrap_or(true);
                    push(self, ExceptionKind::Multicycle { n, setup: true, anchor_end });
                }
                if hold {
                    let anchor_end = explicit_anchor.unwrap_or(false);
                    push(self, ExceptionKind::Multicycle { n, setup: false, anchor_end });
                }
            }
            _ => {
                if p.positional.len() != 1 {
                    return Err(self.err(line, format!("{cmd} takes one delay value")));
                }
                let v = self.parse_num(&p.positional[0], "delay", line)? * self.unit_time;
                push(
                    self,
                    if cmd == "set_max_delay" {
                        ExceptionKind::MaxDelay(v)
                    } else {
                        ExceptionKind::MinDelay(v)
                    },
                );
            }
        }
        Ok(String::new())
    }

    fn case_analysis(&mut self, args: &[String], line: u32) -> Result<String> {
        let p = self.parse_args(args, &[], line);
        self.known_bools(&p, &[], line);
        if p.positional.len() < 2 {
            return Err(self.err(line, "set_case_analysis takes a value and pins"));
        }
        let value = match p.positional[0].as_str() {
            "0" | "zero" => false,
            "1" | "one" => true,
            other => return Err(self.err(line, format!("unsupported case value `{other}`"))),
        };
        let raw: Vec<&str> = p.positional[1..].iter().map(|s| s.as_str()).collect();
        let pins = self.resolve_set(&raw, SetCtx::Pins, line);
        if pins.pins.is_empty() {
            return Err(self.empty_err(line, "set_case_analysis", &raw));
        }
        for &pin in &pins.pins {
            self.cns.case_values.retain(|c| c.pin != pin);
            self.cns.case_values.push(CaseValue { pin, value });
        }
        Ok(String::new())
    }

    fn input_transition(&mut self, args: &[String], line: u32) -> Result<String> {
        let p = self.parse_args(args, &[], line);
        self.known_bools(&p, &["min", "max", "rise", "fall"], line);
        if p.has("rise") || p.has("fall") {
            self.warn(line, "per-edge input transitions are not modeled; applied to both edges");
        }
        if p.positional.is_empty() {
            return Err(self.err(line, "set_input_transition takes a slew and ports"));
        }
        let slew = self.parse_num(&p.positional[0], "slew", line)? * self.unit_time;
        if slew < 0.0 {
            return Err(self.err(line, "slew must be non-negative"));
        }
        let raw: Vec<&str> = p.positional[1..].iter().map(|s| s.as_str()).collect();
        let ports = self.resolve_set(&raw, SetCtx::Ports, line);
        if ports.pins.is_empty() {
            return Err(self.empty_err(line, "set_input_transition", &raw));
        }
        let mode = p.mode_sel();
        for &pin in &ports.pins {
            if self.nl.pin_dir[pin as usize] == Dir::Out {
                return Err(self.err(
                    line,
                    format!("set_input_transition: `{}` is an output port", self.nl.pin_full_name(pin)),
                ));
            }
            let entry = self.cns.port_slew.entry(pin).or_insert([slew, slew]);
            if mode.covers(crate::mode::Mode::Early) {
                entry[0] = slew;
            }
            if mode.covers(crate::mode::Mode::Late) {
                entry[1] = slew;
            }
        }
        Ok(String::new())
    }

    fn load(&mut self, args: &[String], line: u32) -> Result<String> {
        let p = self.parse_args(args, &[], line);
        self.known_bools(&p, &["pin_load", "wire_load", "min", "max"], line);
        if p.positional.is_empty() {
            return Err(self.err(line, "set_load takes a capacitance and ports"));
        }
        let cap = self.parse_num(&p.positional[0], "capacitance", line)? * self.unit_cap;
        if cap < 0.0 {
            return Err(self.err(line, "load must be non-negative"));
        }
        let raw: Vec<&str> = p.positional[1..].iter().map(|s| s.as_str()).collect();
        let ports = self.resolve_set(&raw, SetCtx::Ports, line);
        if ports.pins.is_empty() {
            return Err(self.empty_err(line, "set_load", &raw));
        }
        for &pin in &ports.pins {
            self.cns.port_load.insert(pin, cap);
        }
        Ok(String::new())
    }

    fn disable_timing(&mut self, args: &[String], line: u32) -> Result<String> {
        let p = self.parse_args(args, &["from", "to"], line);
        self.known_bools(&p, &[], line);
        let from = p.value("from").map(str::to_string);
        let to = p.value("to").map(str::to_string);
        let mut resolved = 0u32;
        for pos in p.positional.clone() {
            for tok in split_list(&pos) {
                let (tag, name) = match tok.split_once(':') {
                    Some((t, n)) if ["port", "pin", "cell", "net", "clock"].contains(&t) => {
                        (Some(t), n.to_string())
                    }
                    _ => (None, tok.clone()),
                };
                // Cells take -from/-to (library pin names); pins do not.
                let as_cell = |host: &mut Self, cell: u32| {
                    host.cns.disables.push(Disable::Cell {
                        cell,
                        from: from.clone(),
                        to: to.clone(),
                    });
                };
                match tag {
                    Some("cell") => {
                        if let Some(cell) = self.idx.cell(self.nl, &name) {
                            as_cell(self, cell);
                            resolved += 1;
                        }
                    }
                    Some("pin") | Some("port") => {
                        if let Some(pin) = self.idx.pin(self.nl, &name) {
                            if from.is_some() || to.is_some() {
                                self.warn(line, "-from/-to apply to cells; ignored for pins");
                            }
                            self.cns.disables.push(Disable::Pin(pin));
                            resolved += 1;
                        }
                    }
                    Some(other) => {
                        self.warn(line, format!("{other} `{name}` not valid here; skipped"));
                    }
                    None => {
                        if let Some(cell) = self.idx.cell(self.nl, &name) {
                            as_cell(self, cell);
                            resolved += 1;
                        } else if let Some(pin) = self.idx.pin(self.nl, &name) {
                            self.cns.disables.push(Disable::Pin(pin));
                            resolved += 1;
                        } else {
                            self.empty_patterns.push(name);
                        }
                    }
                }
            }
        }
        if resolved == 0 {
            let raw: Vec<&str> = p.positional.iter().map(|s| s.as_str()).collect();
            return Err(self.empty_err(line, "set_disable_timing", &raw));
        }
        Ok(String::new())
    }

    fn set_units(&mut self, args: &[String], line: u32) -> Result<String> {
        let p = self.parse_args(
            args,
            &["time", "capacitance", "resistance", "voltage", "current", "power"],
            line,
        );
        self.known_bools(&p, &[], line);
        for (flag, value) in p.valued.clone() {
            match flag.as_str() {
                "time" => match parse_time_unit_text(&value) {
                    Some(ps) => self.unit_time = ps,
                    None => return Err(self.err(line, format!("bad time unit `{value}`"))),
                },
                "capacitance" => match parse_cap_unit_text(&value) {
                    Some(ff) => self.unit_cap = ff,
                    None => return Err(self.err(line, format!("bad capacitance unit `{value}`"))),
                },
                _ => self.warn(line, format!("unit `-{flag}` has no effect here")),
            }
        }
        Ok(String::new())
    }
}

/// "ns", "100ps", "1.0us" -> ps multiplier.
fn parse_time_unit_text(text: &str) -> Option<f64> {
    let (num, suffix) = split_unit(text)?;
    let scale = match suffix.to_ascii_lowercase().as_str() {
        "fs" => 1e-3,
        "ps" => 1.0,
        "ns" => 1e3,
        "us" => 1e6,
        "ms" => 1e9,
        "s" => 1e12,
        _ => return None,
    };
    Some(num * scale)
}

/// "pF", "1fF" -> fF multiplier.
fn parse_cap_unit_text(text: &str) -> Option<f64> {
    let (num, suffix) = split_unit(text)?;
    let scale = match suffix.to_ascii_lowercase().as_str() {
        "ff" => 1.0,
        "pf" => 1e3,
        "nf" => 1e6,
        "uf" => 1e9,
        _ => return None,
    };
    Some(num * scale)
}

fn split_unit(text: &str) -> Option<(f64, &str)> {
    let t = text.trim();
    let pos = t.find(|c: char| c.is_ascii_alphabetic())?;
    let num = if pos == 0 { 1.0 } else { t[..pos].parse().ok()? };
    Some((num, &t[pos..]))
}
