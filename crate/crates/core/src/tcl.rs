//! Minimal Tcl interpreter: enough of the language to run constraint
//! scripts — word splitting with `{}`/`""`/`[]`, `$var` and `[cmd]`
//! substitution, and a small builtin set (set, expr, if, foreach, while,
//! list ops, puts). Domain commands are supplied by a `Host`.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Receiver for non-builtin commands. Returning `Ok(None)` means the host
/// does not know the command either.
pub trait Host {
    fn call(&mut self, name: &str, args: &[String], line: u32) -> Result<Option<String>>;
}

/// Host with no commands of its own.
pub struct NoHost;

impl Host for NoHost {
    fn call(&mut self, _: &str, _: &[String], _: u32) -> Result<Option<String>> {
        Ok(None)
    }
}

#[derive(Default)]
pub struct Interp {
    vars: HashMap<String, String>,
    /// Unknown commands: error when false, warn-and-skip when true.
    pub lenient: bool,
}

/// One parsed word: either substitution-exempt (braced) or raw text whose
/// `$`/`[]` forms expand at evaluation time.
#[derive(Debug, Clone)]
struct Word {
    text: String,
    braced: bool,
    line: u32,
}

fn is_var_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b':'
}

/// Split a script into commands (newline/semicolon separated), each a list
/// of unsubstituted words.
struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Parser<'a> {
        Parser { src: src.as_bytes(), pos: 0, line: 1 }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse("<tcl>", self.line, self.pos, msg)
    }

    /// Consume whitespace within a command; `\<newline>` continues it.
    fn skip_blank(&mut self) {
        while let Some(c) = self.peek() {
            if c == b' ' || c == b'\t' || c == b'\r' {
                self.pos += 1;
            } else if c == b'\\' && self.src.get(self.pos + 1) == Some(&b'\n') {
                self.pos += 1;
                self.bump();
            } else {
                break;
            }
        }
    }

    /// Next command's words; None at end of input.
    fn next_command(&mut self) -> Result<Option<Vec<Word>>> {
        loop {
            self.skip_blank();
            match self.peek() {
                None => return Ok(None),
                Some(b'\n') | Some(b';') => {
                    self.bump();
                }
                Some(b'#') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.pos += 1;
                    }
                }
                Some(_) => break,
            }
        }
        let mut words = Vec::new();
        loop {
            self.skip_blank();
            match self.peek() {
                None => break,
                Some(b'\n') | Some(b';') => {
                    self.bump();
                    break;
                }
                Some(b'{') => words.push(self.braced_word()?),
                Some(b'"') => words.push(self.quoted_word()?),
                Some(_) => words.push(self.bare_word()?),
            }
        }
        Ok(Some(words))
    }

    fn braced_word(&mut self) -> Result<Word> {
        let line = self.line;
        self.bump(); // {
        let start = self.pos;
        let mut depth = 1;
        while let Some(c) = self.peek() {
            if c == b'\\' && self.pos + 1 < self.src.len() {
                self.bump();
                self.bump();
                continue;
            }
            if c == b'{' {
                depth += 1;
            } else if c == b'}' {
                depth -= 1;
                if depth == 0 {
                    let text = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                    self.bump();
                    return Ok(Word { text, braced: true, line });
                }
            }
            self.bump();
        }
        Err(self.err("unbalanced braces"))
    }

    fn quoted_word(&mut self) -> Result<Word> {
        let line = self.line;
        self.bump(); // "
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == b'\\' && self.pos + 1 < self.src.len() {
                self.bump();
                self.bump();
                continue;
            }
            if c == b'"' {
                let text = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                self.bump();
                return Ok(Word { text, braced: false, line });
            }
            if c == b'[' {
                self.skip_bracket()?;
                continue;
            }
            self.bump();
        }
        Err(self.err("unterminated quote"))
    }

    fn bare_word(&mut self) -> Result<Word> {
        let line = self.line;
        let start = self.pos;
        while let Some(c) = self.peek() {
            match c {
                b' ' | b'\t' | b'\r' | b'\n' | b';' => break,
                b'[' => {
                    self.skip_bracket()?;
                }
                b'\\' if self.pos + 1 < self.src.len() => {
                    self.bump();
                    self.bump();
                }
                _ => {
                    self.bump();
                }
            }
        }
        Ok(Word {
            text: String::from_utf8_lossy(&self.src[start..self.pos]).into_owned(),
            braced: false,
            line,
        })
    }

    /// Skip a bracketed script (nesting, strings, braces inside).
    fn skip_bracket(&mut self) -> Result<()> {
        self.bump(); // [
        let mut depth = 1;
        while let Some(c) = self.peek() {
            match c {
                b'\\' if self.pos + 1 < self.src.len() => {
                    self.bump();
                    self.bump();
                }
                b'[' => {
                    depth += 1;
                    self.bump();
                }
                b']' => {
                    depth -= 1;
                    self.bump();
                    if depth == 0 {
                        return Ok(());
                    }
                }
                _ => {
                    self.bump();
                }
            }
        }
        Err(self.err("unbalanced brackets"))
    }
}

impl Interp {
    pub fn new() -> Interp {
        Interp::default()
    }

    pub fn set_var(&mut self, name: &str, value: &str) {
        self.vars.insert(name.to_string(), value.to_string());
    }

    pub fn get_var(&self, name: &str) -> Option<&str> {
        self.vars.get(name).map(|s| s.as_str())
    }

    /// Evaluate a script; the result is the last command's result.
    pub fn eval(&mut self, script: &str, host: &mut dyn Host) -> Result<String> {
        let mut parser = Parser::new(script);
        let mut result = String::new();
        while let Some(words) = parser.next_command()? {
            if words.is_empty() {
                continue;
            }
            result = self.run_command(&words, host)?;
        }
        Ok(result)
    }

    /// Expand `$var`, `${var}`, `[cmd]`, and backslash escapes.
    fn substitute(&mut self, raw: &str, line: u32, host: &mut dyn Host) -> Result<String> {
        let b = raw.as_bytes();
        let mut out = String::new();
        let mut i = 0;
        while i < b.len() {
            match b[i] {
                b'\\' if i + 1 < b.len() => {
                    let c = b[i + 1];
                    out.push(match c {
                        b'n' => '\n',
                        b't' => '\t',
                        b'\n' => ' ',
                        other => other as char,
                    });
                    i += 2;
                }
                b'$' => {
                    i += 1;
                    if i < b.len() && b[i] == b'{' {
                        let end = raw[i + 1..]
                            .find('}')
                            .ok_or_else(|| Error::parse("<tcl>", line, i, "unterminated ${"))?;
                        let name = &raw[i + 1..i + 1 + end];
                        out.push_str(self.vars.get(name).map(|s| s.as_str()).unwrap_or(""));
                        i += end + 2;
                    } else {
                        let start = i;
                        while i < b.len() && is_var_char(b[i]) {
                            i += 1;
                        }
                        if i == start {
                            out.push('$');
                        } else {
                            let name = &raw[start..i];
                            match self.vars.get(name) {
                                Some(v) => out.push_str(v),
                                None => {
                                    return Err(Error::semantic(format!(
                                        "line {line}: no such variable `{name}`"
                                    )))
                                }
                            }
                        }
                    }
                }
                b'[' => {
                    // Find the matching bracket, then evaluate the inner
                    // script and splice its result.
                    let mut depth = 1;
                    let mut j = i + 1;
                    while j < b.len() && depth > 0 {
                        match b[j] {
                            b'\\' if j + 1 < b.len() => j += 1,
                            b'[' => depth += 1,
                            b']' => depth -= 1,
                            _ => {}
                        }
                        j += 1;
                    }
                    if depth != 0 {
                        return Err(Error::parse("<tcl>", line, i, "unbalanced brackets"));
                    }
                    let inner = &raw[i + 1..j - 1];
                    out.push_str(&self.eval(inner, host)?);
                    i = j;
                }
                c => {
                    out.push(c as char);
                    i += 1;
                }
            }
        }
        Ok(out)
    }

    fn word_value(&mut self, w: &Word, host: &mut dyn Host) -> Result<String> {
        if w.braced {
            Ok(w.text.clone())
        } else {
            self.substitute(&w.text, w.line, host)
        }
    }

    fn run_command(&mut self, words: &[Word], host: &mut dyn Host) -> Result<String> {
        let line = words[0].line;
        let name = self.word_value(&words[0], host)?;
        match name.as_str() {
            "set" => {
                let args = self.values(&words[1..], host)?;
                match args.len() {
                    1 => self
                        .vars
                        .get(&args[0])
                        .cloned()
                        .ok_or_else(|| Error::semantic(format!("line {line}: no such variable `{}`", args[0]))),
                    2 => {
                        self.vars.insert(args[0].clone(), args[1].clone());
                        Ok(args[1].clone())
                    }
                    _ => Err(Error::semantic(format!("line {line}: set takes 1 or 2 arguments"))),
                }
            }
            "expr" => {
                let joined = self.expr_text(&words[1..], host)?;
                let v = eval_expr(&joined, line)?;
                Ok(v.to_string())
            }
            "if" => self.run_if(&words[1..], host, line),
            "foreach" => self.run_foreach(&words[1..], host, line),
            "while" => self.run_while(&words[1..], host, line),
            "list" => {
                let args = self.values(&words[1..], host)?;
                Ok(make_list(&args))
            }
            "llength" => {
                let args = self.values(&words[1..], host)?;
                if args.len() != 1 {
                    return Err(Error::semantic(format!("line {line}: llength takes 1 argument")));
                }
                Ok(split_list(&args[0]).len().to_string())
            }
            "lindex" => {
                let args = self.values(&words[1..], host)?;
                if args.len() != 2 {
                    return Err(Error::semantic(format!("line {line}: lindex takes 2 arguments")));
                }
                let items = split_list(&args[0]);
                let idx: usize = args[1]
                    .parse()
                    .map_err(|_| Error::semantic(format!("line {line}: bad list index `{}`", args[1])))?;
                Ok(items.get(idx).cloned().unwrap_or_default())
            }
            "puts" => {
                let args = self.values(&words[1..], host)?;
                crate::log_info!("{}", args.last().map(|s| s.as_str()).unwrap_or(""));
                Ok(String::new())
            }
            _ => {
                let args = self.values(&words[1..], host)?;
                match host.call(&name, &args, line)? {
                    Some(v) => Ok(v),
                    None if self.lenient => {
                        crate::log_warn!("SDC-WARN {line}: unknown command `{name}` skipped");
                        Ok(String::new())
                    }
                    None => Err(Error::semantic(format!("line {line}: unknown command `{name}`"))),
                }
            }
        }
    }

    fn values(&mut self, words: &[Word], host: &mut dyn Host) -> Result<Vec<String>> {
        words.iter().map(|w| self.word_value(w, host)).collect()
    }

    /// expr's argument: substitution applies even inside a braced word.
    fn expr_text(&mut self, words: &[Word], host: &mut dyn Host) -> Result<String> {
        let line = words.first().map(|w| w.line).unwrap_or(1);
        let parts: Vec<String> = words
            .iter()
            .map(|w| self.substitute(&w.text, w.line, host))
            .collect::<Result<_>>()?;
        if parts.is_empty() {
            return Err(Error::semantic(format!("line {line}: expr needs an expression")));
        }
        Ok(parts.join(" "))
    }

    fn truthy(&mut self, cond: &Word, host: &mut dyn Host) -> Result<bool> {
        let text = self.substitute(&cond.text, cond.line, host)?;
        Ok(eval_expr(&text, cond.line)?.truthy())
    }

    fn run_if(&mut self, rest: &[Word], host: &mut dyn Host, line: u32) -> Result<String> {
        let mut i = 0;
        loop {
            if i + 1 >= rest.len() {
                return Err(Error::semantic(format!("line {line}: malformed if")));
            }
            let cond = &rest[i];
            let body = &rest[i + 1];
            if self.truthy(cond, host)? {
                return self.eval(&body.text, host);
            }
            i += 2;
            match rest.get(i).map(|w| w.text.as_str()) {
                Some("elseif") => {
                    i += 1;
                    continue;
                }
                Some("else") => {
                    let body = rest
                        .get(i + 1)
                        .ok_or_else(|| Error::semantic(format!("line {line}: else needs a body")))?;
                    return self.eval(&body.text, host);
                }
                Some(other) => {
                    return Err(Error::semantic(format!(
                        "line {line}: expected elseif/else, got `{other}`"
                    )))
                }
                None => return Ok(String::new()),
            }
        }
    }

    fn run_foreach(&mut self, rest: &[Word], host: &mut dyn Host, line: u32) -> Result<String> {
        if rest.len() != 3 {
            return Err(Error::semantic(format!(
                "line {line}: foreach takes a variable, a list, and a body"
            )));
        }
        let var = self.word_value(&rest[0], host)?;
        let items = split_list(&self.word_value(&rest[1], host)?);
        let mut result = String::new();
        for item in items {
            self.vars.insert(var.clone(), item);
            result = self.eval(&rest[2].text, host)?;
        }
        Ok(result)
    }

    fn run_while(&mut self, rest: &[Word], host: &mut dyn Host, line: u32) -> Result<String> {
        if rest.len() != 2 {
            return Err(Error::semantic(format!(
                "line {line}: while takes a condition and a body"
            )));
        }
        let mut result = String::new();
        let mut guard = 0u64;
        while self.truthy(&rest[0], host)? {
            result = self.eval(&rest[1].text, host)?;
            guard += 1;
            if guard > 10_000_000 {
                return Err(Error::semantic(format!("line {line}: while loop ran away")));
            }
        }
        Ok(result)
    }
}

/// Evaluate a plain script with no domain commands (strict mode).
pub fn tcl_eval(script: &str) -> Result<String> {
    Interp::new().eval(script, &mut NoHost)
}

// ---------------------------------------------------------------------------
// Lists
// ---------------------------------------------------------------------------

/// Split a Tcl list into elements (brace- and quote-aware).
pub fn split_list(s: &str) -> Vec<String> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        while i < b.len() && (b[i] as char).is_whitespace() {
            i += 1;
        }
        if i >= b.len() {
            break;
        }
        if b[i] == b'{' {
            let mut depth = 1;
            let start = i + 1;
            i += 1;
            while i < b.len() && depth > 0 {
                match b[i] {
                    b'{' => depth += 1,
                    b'}' => depth -= 1,
                    _ => {}
                }
                i += 1;
            }
            out.push(s[start..i.saturating_sub(1)].to_string());
        } else if b[i] == b'"' {
            let start = i + 1;
            i += 1;
            while i < b.len() && b[i] != b'"' {
                i += 1;
            }
            out.push(s[start..i].to_string());
            i += 1;
        } else {
            let start = i;
            while i < b.len() && !(b[i] as char).is_whitespace() {
                i += 1;
            }
            out.push(s[start..i].to_string());
        }
    }
    out
}

/// Join elements into a Tcl list, brace-quoting where needed.
pub fn make_list(items: &[String]) -> String {
    items
        .iter()
        .map(|s| {
            if s.is_empty() || s.chars().any(|c| c.is_whitespace()) {
                format!("{{{s}}}")
            } else {
                s.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

// ---------------------------------------------------------------------------
// expr
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Num {
    Int(i64),
    Real(f64),
}

impl Num {
    fn as_f64(self) -> f64 {
        match self {
            Num::Int(i) => i as f64,
            Num::Real(r) => r,
        }
    }

    fn truthy(self) -> bool {
        match self {
            Num::Int(i) => i != 0,
            Num::Real(r) => r != 0.0,
        }
    }
}

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Num::Int(i) => write!(f, "{i}"),
            Num::Real(r) => write!(f, "{r}"),
        }
    }
}

struct ExprParser<'a> {
    b: &'a [u8],
    pos: usize,
    line: u32,
}

impl<'a> ExprParser<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::semantic(format!("line {}: expr: {}", self.line, msg.into()))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.b.len() && (self.b[self.pos] as char).is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.b.get(self.pos).copied()
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.b[self.pos..].starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    // or → and ( || and )*
    fn parse_or(&mut self) -> Result<Num> {
        let mut lhs = self.parse_and()?;
        loop {
            self.skip_ws();
            if self.eat("||") {
                let rhs = self.parse_and()?;
                lhs = Num::Int((lhs.truthy() || rhs.truthy()) as i64);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn parse_and(&mut self) -> Result<Num> {
        let mut lhs = self.parse_cmp()?;
        loop {
            self.skip_ws();
            if self.eat("&&") {
                let rhs = self.parse_cmp()?;
                lhs = Num::Int((lhs.truthy() && rhs.truthy()) as i64);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn parse_cmp(&mut self) -> Result<Num> {
        let lhs = self.parse_add()?;
        self.skip_ws();
        for (tok, f) in [
            ("<=", cmp_le as fn(f64, f64) -> bool),
            (">=", cmp_ge),
            ("==", cmp_eq),
            ("!=", cmp_ne),
            ("<", cmp_lt),
            (">", cmp_gt),
        ] {
            if self.eat(tok) {
                let rhs = self.parse_add()?;
                return Ok(Num::Int(f(lhs.as_f64(), rhs.as_f64()) as i64));
            }
        }
        Ok(lhs)
    }

    fn parse_add(&mut self) -> Result<Num> {
        let mut lhs = self.parse_mul()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = arith(lhs, self.parse_mul()?, |a, b| a + b, |a, b| a.wrapping_add(b));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = arith(lhs, self.parse_mul()?, |a, b| a - b, |a, b| a.wrapping_sub(b));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_mul(&mut self) -> Result<Num> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = arith(lhs, self.parse_unary()?, |a, b| a * b, |a, b| a.wrapping_mul(b));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    if rhs.as_f64() == 0.0 {
                        return Err(self.err("division by zero"));
                    }
                    lhs = match (lhs, rhs) {
                        (Num::Int(a), Num::Int(b)) => Num::Int(a.div_euclid(b)),
                        (a, b) => Num::Real(a.as_f64() / b.as_f64()),
                    };
                }
                Some(b'%') => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    match (lhs, rhs) {
                        (Num::Int(a), Num::Int(b)) if b != 0 => lhs = Num::Int(a.rem_euclid(b)),
                        _ => return Err(self.err("% needs non-zero integers")),
                    }
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Num> {
        match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                let v = self.parse_unary()?;
                Ok(Num::Int(!v.truthy() as i64))
            }
            Some(b'-') => {
                self.pos += 1;
                let v = self.parse_unary()?;
                Ok(match v {
                    Num::Int(i) => Num::Int(-i),
                    Num::Real(r) => Num::Real(-r),
                })
            }
            Some(b'+') => {
                self.pos += 1;
                self.parse_unary()
            }
            Some(b'(') => {
                self.pos += 1;
                let v = self.parse_or()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected )"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) => Err(self.err(format!("unexpected `{}`", c as char))),
            None => Err(self.err("unexpected end of expression")),
        }
    }

    fn parse_number(&mut self) -> Result<Num> {
        self.skip_ws();
        let start = self.pos;
        let mut real = false;
        while let Some(&c) = self.b.get(self.pos) {
            match c {
                b'0'..=b'9' => self.pos += 1,
                b'.' => {
                    real = true;
                    self.pos += 1;
                }
                b'e' | b'E'
                    if self
                        .b
                        .get(self.pos + 1)
                        .is_some_and(|&n| n.is_ascii_digit() || n == b'+' || n == b'-') =>
                {
                    real = true;
                    self.pos += 2;
                }
                _ => break,
            }
        }
        let text = std::str::from_utf8(&self.b[start..self.pos]).unwrap();
        if real {
            text.parse().map(Num::Real).map_err(|_| self.err(format!("bad number `{text}`")))
        } else {
            text.parse().map(Num::Int).map_err(|_| self.err(format!("bad number `{text}`")))
        }
    }
}

fn arith(a: Num, b: Num, fr: fn(f64, f64) -> f64, fi: fn(i64, i64) -> i64) -> Num {
    match (a, b) {
        (Num::Int(x), Num::Int(y)) => Num::Int(fi(x, y)),
        (x, y) => Num::Real(fr(x.as_f64(), y.as_f64())),
    }
}

fn cmp_lt(a: f64, b: f64) -> bool { a < b }
fn cmp_gt(a: f64, b: f64) -> bool { a > b }
fn cmp_le(a: f64, b: f64) -> bool { a <= b }
fn cmp_ge(a: f64, b: f64) -> bool { a >= b }
fn cmp_eq(a: f64, b: f64) -> bool { a == b }
fn cmp_ne(a: f64, b: f64) -> bool { a != b }

/// Evaluate an arithmetic/logical expression (post-substitution text).
pub fn eval_expr(text: &str, line: u32) -> Result<Num> {
    let mut p = ExprParser { b: text.as_bytes(), pos: 0, line };
    let v = p.parse_or()?;
    p.skip_ws();
    if p.pos != p.b.len() {
        return Err(p.err(format!("trailing input at `{}`", &text[p.pos..])));
    }
    Ok(v)
}
