//! SPEF parasitics parser: header units, `*NAME_MAP`, `*PORTS`, and
//! `*D_NET` blocks with CONN/CAP/RES sections. Values are normalized to
//! fF/kΩ at parse time; mapped names are resolved to strings and hierarchy
//! dividers rewritten to the netlist convention.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::chunk::{self, ChunkFormat};
use crate::error::{Error, Result};

/// A node reference inside a SPEF net.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SpefNodeRef {
    /// Top-level port, e.g. `in`.
    Port(String),
    /// `base:suffix` — instance pin (`u1:Z`) or internal net node (`n3:1`).
    Sub(String, String),
}

impl SpefNodeRef {
    pub fn to_key(&self) -> String {
        match self {
            SpefNodeRef::Port(p) => p.clone(),
            SpefNodeRef::Sub(a, b) => format!("{a}:{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnDir {
    Input,
    Output,
    Bidirect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpefConn {
    /// True for `*P` (port) entries, false for `*I` (internal pin).
    pub is_port: bool,
    pub node: SpefNodeRef,
    pub dir: ConnDir,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpefCap {
    pub node: SpefNodeRef,
    /// Coupling partner; grounded cap when absent.
    pub other: Option<SpefNodeRef>,
    /// fF.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpefRes {
    pub a: SpefNodeRef,
    pub b: SpefNodeRef,
    /// kΩ.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpefNet {
    pub name: String,
    /// Declared lumped total, fF.
    pub total_cap: f64,
    pub conns: Vec<SpefConn>,
    pub caps: Vec<SpefCap>,
    pub ress: Vec<SpefRes>,
}

#[derive(Debug, Clone, Default)]
pub struct SpefData {
    pub name_map: HashMap<u64, String>,
    pub nets: Vec<SpefNet>,
}

struct Header {
    cap_scale: f64,
    res_scale: f64,
    divider: char,
    delimiter: char,
    name_map: HashMap<u64, String>,
    /// Byte offset where the first `*D_NET` begins.
    nets_start: usize,
}

/// Parse a (possibly gzipped) SPEF stream. `hierarchy_divider` is the
/// netlist's divider; SPEF dividers in instance paths are rewritten to it.
pub fn parse_spef(file: &str, bytes: &[u8], hierarchy_divider: char) -> Result<SpefData> {
    parse_spef_chunked(file, bytes, hierarchy_divider, 1)
}

/// Chunk-parallel variant: the header and name map parse serially, then
/// `*D_NET` blocks split into `chunks` ranges parsed concurrently.
pub fn parse_spef_chunked(
    file: &str,
    bytes: &[u8],
    hierarchy_divider: char,
    chunks: usize,
) -> Result<SpefData> {
    let data = chunk::decompress(bytes.to_vec())?;
    let header = parse_header(file, &data)?;
    let body = &data[header.nets_start..];
    let ranges = chunk::split_chunks(body, chunks.max(1), ChunkFormat::Spef);
    let netlists: Vec<Vec<SpefNet>> = ranges
        .into_par_iter()
        .map(|r| parse_nets(file, &body[r], &header, hierarchy_divider))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpefData {
        name_map: header.name_map,
        nets: netlists.into_iter().flatten().collect(),
    })
}

fn parse_header(file: &str, data: &[u8]) -> Result<Header> {
    let mut h = Header {
        cap_scale: 1.0,
        res_scale: 1.0,
        divider: '/',
        delimiter: ':',
        name_map: HashMap::new(),
        nets_start: data.len(),
    };
    let mut offset = 0usize;
    let mut in_name_map = false;
    for (lineno, line) in data.split(|&b| b == b'\n').enumerate() {
        let line_start = offset;
        offset += line.len() + 1;
        let text = String::from_utf8_lossy(line);
        let text = text.split("//").next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let toks: Vec<&str> = tokenize(text);
        let head = toks[0];
        if head == "*D_NET" {
            h.nets_start = line_start;
            break;
        }
        let err = |msg: &str| Error::parse(file, lineno as u32 + 1, line_start, msg);
        match head {
            "*NAME_MAP" => in_name_map = true,
            "*PORTS" | "*POWER_NETS" | "*GROUND_NETS" => in_name_map = false,
            "*DIVIDER" => {
                in_name_map = false;
                h.divider = toks.get(1).and_then(|s| s.chars().next()).unwrap_or('/');
            }
            "*DELIMITER" => {
                in_name_map = false;
                h.delimiter = toks.get(1).and_then(|s| s.chars().next()).unwrap_or(':');
            }
            "*C_UNIT" => {
                in_name_map = false;
                h.cap_scale = unit_scale(&toks, &[("FF", 1.0), ("PF", 1e3), ("NF", 1e6), ("UF", 1e9), ("F", 1e15)])
                    .ok_or_else(|| err("bad *C_UNIT"))?;
            }
            "*R_UNIT" => {
                in_name_map = false;
                h.res_scale = unit_scale(&toks, &[("KOHM", 1.0), ("OHM", 1e-3), ("MOHM", 1e3)])
                    .ok_or_else(|| err("bad *R_UNIT"))?;
            }
            "*T_UNIT" | "*L_UNIT" | "*SPEF" | "*DESIGN" | "*DATE" | "*VENDOR" | "*PROGRAM"
            | "*VERSION" | "*DESIGN_FLOW" | "*BUS_DELIMITER" => in_name_map = false,
            _ if in_name_map && head.starts_with('*') => {
                let idx: u64 = head[1..]
                    .parse()
                    .map_err(|_| err(&format!("bad name map index `{head}`")))?;
                let name =
                    toks.get(1).ok_or_else(|| err("name map entry without a name"))?.to_string();
                h.name_map.insert(idx, name);
            }
            _ => {
                // Port attribute lines and unknown directives are skipped.
            }
        }
    }
    Ok(h)
}

fn unit_scale(toks: &[&str], table: &[(&str, f64)]) -> Option<f64> {
    let mult: f64 = toks.get(1)?.parse().ok()?;
    let unit = toks.get(2)?.to_ascii_uppercase();
    let scale = table.iter().find(|(u, _)| *u == unit)?.1;
    Some(mult * scale)
}

fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    Conn,
    Cap,
    Res,
}

fn parse_nets(
    file: &str,
    data: &[u8],
    h: &Header,
    hierarchy_divider: char,
) -> Result<Vec<SpefNet>> {
    let mut nets = Vec::new();
    let mut cur: Option<SpefNet> = None;
    let mut section = Section::None;
    let mut offset = 0usize;

    let resolve = |word: &str, lineno: u32, line_start: usize| -> Result<String> {
        let resolved = if let Some(rest) = word.strip_prefix('*') {
            let idx: u64 = rest.parse().map_err(|_| {
                Error::parse(file, lineno, line_start, format!("bad mapped name `{word}`"))
            })?;
            h.name_map
                .get(&idx)
                .ok_or_else(|| {
                    Error::parse(file, lineno, line_start, format!("unresolved name map index {idx}"))
                })?
                .clone()
        } else {
            word.to_string()
        };
        Ok(if h.divider != hierarchy_divider {
            resolved.replace(h.divider, &hierarchy_divider.to_string())
        } else {
            resolved
        })
    };

    let node_ref = |word: &str, lineno: u32, line_start: usize| -> Result<SpefNodeRef> {
        match word.rsplit_once(h.delimiter) {
            Some((base, suffix)) => {
                Ok(SpefNodeRef::Sub(resolve(base, lineno, line_start)?, suffix.to_string()))
            }
            None => Ok(SpefNodeRef::Port(resolve(word, lineno, line_start)?)),
        }
    };

    for (li, line) in data.split(|&b| b == b'\n').enumerate() {
        let line_start = offset;
        offset += line.len() + 1;
        let lineno = li as u32 + 1;
        let text = String::from_utf8_lossy(line);
        let text = text.split("//").next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let toks = tokenize(text);
        let err =
            |msg: String| -> Error { Error::parse(file, lineno, line_start, msg) };
        match toks[0] {
            "*D_NET" => {
                if cur.is_some() {
                    return Err(err("*D_NET without *END for previous net".into()));
                }
                if toks.len() < 3 {
                    return Err(err("*D_NET needs a name and a total cap".into()));
                }
                let name = resolve(toks[1], lineno, line_start)?;
                let total: f64 =
                    toks[2].parse().map_err(|_| err("bad total capacitance".into()))?;
                cur = Some(SpefNet {
                    name,
                    total_cap: total * h.cap_scale,
                    conns: Vec::new(),
                    caps: Vec::new(),
                    ress: Vec::new(),
                });
                section = Section::None;
            }
            "*CONN" => section = Section::Conn,
            "*CAP" => section = Section::Cap,
            "*RES" => section = Section::Res,
            "*END" => {
                let net = cur.take().ok_or_else(|| err("*END without *D_NET".into()))?;
                nets.push(net);
                section = Section::None;
            }
            "*P" | "*I" if section == Section::Conn => {
                let net = cur.as_mut().ok_or_else(|| err("conn outside *D_NET".into()))?;
                if toks.len() < 3 {
                    return Err(err("connection entry needs a node and a direction".into()));
                }
                let dir = match toks[2] {
                    "I" => ConnDir::Input,
                    "O" => ConnDir::Output,
                    "B" => ConnDir::Bidirect,
                    d => return Err(err(format!("bad connection direction `{d}`"))),
                };
                net.conns.push(SpefConn {
                    is_port: toks[0] == "*P",
                    node: node_ref(toks[1], lineno, line_start)?,
                    dir,
                });
            }
            _ if section == Section::Cap => {
                let net = cur.as_mut().ok_or_else(|| err("cap outside *D_NET".into()))?;
                match toks.len() {
                    3 => net.caps.push(SpefCap {
                        node: node_ref(toks[1], lineno, line_start)?,
                        other: None,
                        value: toks[2].parse::<f64>().map_err(|_| err("bad cap value".into()))?
                            * h.cap_scale,
                    }),
                    4 => net.caps.push(SpefCap {
                        node: node_ref(toks[1], lineno, line_start)?,
                        other: Some(node_ref(toks[2], lineno, line_start)?),
                        value: toks[3].parse::<f64>().map_err(|_| err("bad cap value".into()))?
                            * h.cap_scale,
                    }),
                    _ => return Err(err(format!("bad capacitor entry `{text}`"))),
                }
            }
            _ if section == Section::Res => {
                let net = cur.as_mut().ok_or_else(|| err("res outside *D_NET".into()))?;
                if toks.len() != 4 {
                    return Err(err(format!("bad resistor entry `{text}`")));
                }
                let value =
                    toks[3].parse::<f64>().map_err(|_| err("bad res value".into()))? * h.res_scale;
                if value <= 0.0 {
                    return Err(err(format!("non-positive resistance {value} kΩ")));
                }
                net.ress.push(SpefRes {
                    a: node_ref(toks[1], lineno, line_start)?,
                    b: node_ref(toks[2], lineno, line_start)?,
                    value,
                });
            }
            _ => {
                // Connection attribute continuation lines and unknown
                // directives inside a net are ignored.
            }
        }
    }
    if let Some(net) = cur {
        return Err(Error::parse(
            file,
            0,
            data.len(),
            format!("net `{}` missing *END", net.name),
        ));
    }
    Ok(nets)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
*SPEF "IEEE 1481-1998"
*DESIGN "demo"
*T_UNIT 1 NS
*C_UNIT 1 PF
*R_UNIT 1 OHM
*DIVIDER /
*DELIMITER :

*D_NET n1 0.003
*CONN
*I u1:y O
*I u2:a I
*CAP
1 n1:1 0.001
2 u2:a 0.002
*RES
1 u1:y n1:1 10.0
*END
"#;

    #[test]
    fn one_dnet_counts() {
        let s = parse_spef("t.spef", BASIC.as_bytes(), '/').unwrap();
        assert_eq!(s.nets.len(), 1);
        let n = &s.nets[0];
        assert_eq!(n.caps.len(), 2);
        assert_eq!(n.ress.len(), 1);
        assert_eq!(n.conns.len(), 2);
        // 0.003 PF → 3 fF; 10 OHM → 0.01 kΩ.
        assert!((n.total_cap - 3.0).abs() < 1e-12);
        assert!((n.caps[0].value - 1.0).abs() < 1e-12);
        assert!((n.ress[0].value - 0.01).abs() < 1e-12);
        assert_eq!(n.ress[0].a, SpefNodeRef::Sub("u1".into(), "y".into()));
    }

    #[test]
    fn name_map_resolution() {
        let src = r#"
*SPEF "x"
*C_UNIT 1 FF
*R_UNIT 1 KOHM
*NAME_MAP
*1 n1
*2 u7
*D_NET *1 1.0
*CAP
1 *2:a 1.0
*END
"#;
        let s = parse_spef("t.spef", src.as_bytes(), '/').unwrap();
        assert_eq!(s.nets[0].name, "n1");
        assert_eq!(s.nets[0].caps[0].node, SpefNodeRef::Sub("u7".into(), "a".into()));
        assert_eq!(s.name_map.get(&1).map(String::as_str), Some("n1"));
    }

    #[test]
    fn cap_unit_scaling() {
        let src = "*SPEF \"x\"\n*C_UNIT 1 PF\n*D_NET n 0.001\n*CAP\n1 n:1 0.001\n*END\n";
        let s = parse_spef("t.spef", src.as_bytes(), '/').unwrap();
        assert!((s.nets[0].caps[0].value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coupling_cap_records_partner() {
        let src = "*SPEF \"x\"\n*C_UNIT 1 FF\n*D_NET a 2.0\n*CAP\n1 a:1 b:2 2.0\n*END\n";
        let s = parse_spef("t.spef", src.as_bytes(), '/').unwrap();
        let c = &s.nets[0].caps[0];
        assert_eq!(c.other, Some(SpefNodeRef::Sub("b".into(), "2".into())));
    }

    #[test]
    fn missing_end_is_an_error() {
        let src = "*SPEF \"x\"\n*D_NET n 1.0\n*CAP\n1 n:1 1.0\n";
        assert!(parse_spef("t.spef", src.as_bytes(), '/').is_err());
    }

    #[test]
    fn unresolved_map_index_is_an_error() {
        let src = "*SPEF \"x\"\n*NAME_MAP\n*1 n1\n*D_NET *9 1.0\n*END\n";
        assert!(parse_spef("t.spef", src.as_bytes(), '/').is_err());
    }

    #[test]
    fn divider_rewrite() {
        let src = "*SPEF \"x\"\n*DIVIDER .\n*C_UNIT 1 FF\n*D_NET top.n 1.0\n*CAP\n1 top.u1:a 1.0\n*END\n";
        let s = parse_spef("t.spef", src.as_bytes(), '/').unwrap();
        assert_eq!(s.nets[0].name, "top/n");
        assert_eq!(s.nets[0].caps[0].node, SpefNodeRef::Sub("top/u1".into(), "a".into()));
    }

    #[test]
    fn chunked_equals_serial() {
        let mut src = String::from("*SPEF \"x\"\n*C_UNIT 1 FF\n*R_UNIT 1 KOHM\n");
        for i in 0..12 {
            src.push_str(&format!(
                "*D_NET n{i} 2.0\n*CONN\n*I u{i}:y O\n*CAP\n1 n{i}:1 2.0\n*RES\n1 u{i}:y n{i}:1 0.5\n*END\n"
            ));
        }
        let serial = parse_spef("t.spef", src.as_bytes(), '/').unwrap();
        for n in [2, 5, 64] {
            let chunked = parse_spef_chunked("t.spef", src.as_bytes(), '/', n).unwrap();
            assert_eq!(chunked.nets, serial.nets, "chunks={n}");
        }
    }
}
