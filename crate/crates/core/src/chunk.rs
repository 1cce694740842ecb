//! Input byte handling shared by all parsers: transparent gzip decompression
//! and heuristic chunking of large files at safe statement boundaries so
//! chunks can be parsed in parallel.

use std::io::Read;
use std::ops::Range;

use crate::error::{Error, Result};

/// Formats that support chunked parsing. The boundary rule differs per
/// format: Verilog splits between module items, SPEF between `*D_NET`
/// blocks, SDF between `(CELL ...)` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChunkFormat {
    Verilog,
    Spef,
    Sdf,
}

/// True if the byte stream starts with the gzip magic number.
pub fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b
}

/// Decompress if gzipped (detected by magic bytes, not extension);
/// otherwise return the input unchanged.
pub fn decompress(bytes: Vec<u8>) -> Result<Vec<u8>> {
    if !is_gzip(&bytes) {
        return Ok(bytes);
    }
    let mut out = Vec::with_capacity(bytes.len() * 4);
    flate2::read::MultiGzDecoder::new(&bytes[..])
        .read_to_end(&mut out)
        .map_err(|e| Error::semantic(format!("gzip decompression failed: {e}")))?;
    Ok(out)
}

/// Read a file and transparently decompress it.
pub fn read_input(path: &str) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decompress(bytes)
}

/// Split `src` into at most `n` ranges that partition the input, with every
/// internal boundary at a top-level statement break for the format. Falls
/// back to fewer (down to one) chunks when no safe boundary exists near the
/// desired split points.
pub fn split_chunks(src: &[u8], n: usize, format: ChunkFormat) -> Vec<Range<usize>> {
    assert!(n >= 1, "chunk count must be at least 1");
    if n == 1 || src.is_empty() {
        return vec![0..src.len()];
    }
    let boundaries = match format {
        ChunkFormat::Verilog => verilog_boundaries(src),
        ChunkFormat::Spef => spef_boundaries(src),
        ChunkFormat::Sdf => sdf_boundaries(src),
    };
    let mut cuts: Vec<usize> = Vec::with_capacity(n - 1);
    let mut bi = 0usize;
    for k in 1..n {
        let target = src.len() * k / n;
        // First boundary at or past the target that is also past the
        // previous cut; this keeps ranges non-empty and ordered.
        while bi < boundaries.len() && boundaries[bi] < target {
            bi += 1;
        }
        if bi < boundaries.len() {
            let b = boundaries[bi];
            if cuts.last().map_or(true, |&c| b > c) && b < src.len() {
                cuts.push(b);
            }
            bi += 1;
        }
    }
    let mut ranges = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0usize;
    for c in cuts {
        ranges.push(start..c);
        start = c;
    }
    ranges.push(start..src.len());
    ranges
}

/// Offset of the first safe split point, if any. Separates a header prefix
/// (parsed serially) from the chunkable body.
pub fn first_boundary(src: &[u8], format: ChunkFormat) -> Option<usize> {
    let boundaries = match format {
        ChunkFormat::Verilog => verilog_boundaries(src),
        ChunkFormat::Spef => spef_boundaries(src),
        ChunkFormat::Sdf => sdf_boundaries(src),
    };
    boundaries.first().copied()
}

/// Verilog: safe positions are immediately after a top-level `;` or after
/// the `endmodule` keyword, outside comments and escaped identifiers.
fn verilog_boundaries(src: &[u8]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < src.len() {
        match src[i] {
            b'/' if i + 1 < src.len() && src[i + 1] == b'/' => {
                while i < src.len() && src[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if i + 1 < src.len() && src[i + 1] == b'*' => {
                i += 2;
                while i + 1 < src.len() && !(src[i] == b'*' && src[i + 1] == b'/') {
                    i += 1;
                }
                i = (i + 2).min(src.len());
            }
            b'"' => {
                i += 1;
                while i < src.len() && src[i] != b'"' {
                    i += if src[i] == b'\\' { 2 } else { 1 };
                }
                i += 1;
            }
            b'\\' => {
                // Escaped identifier: runs to the next whitespace.
                while i < src.len() && !src[i].is_ascii_whitespace() {
                    i += 1;
                }
            }
            b';' => {
                i += 1;
                out.push(i);
            }
            b'e' if src[i..].starts_with(b"endmodule")
                && (i == 0 || !is_vl_ident(src[i - 1]))
                && (i + 9 >= src.len() || !is_vl_ident(src[i + 9])) =>
            {
                i += 9;
                out.push(i);
            }
            _ => i += 1,
        }
    }
    out
}

fn is_vl_ident(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'$'
}

/// SPEF: safe positions are the start of a line whose first token is
/// `*D_NET`.
fn spef_boundaries(src: &[u8]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut line_start = 0usize;
    let mut i = 0usize;
    while i <= src.len() {
        if i == src.len() || src[i] == b'\n' {
            let mut j = line_start;
            while j < i && (src[j] == b' ' || src[j] == b'\t' || src[j] == b'\r') {
                j += 1;
            }
            if src[j..i.min(src.len())].starts_with(b"*D_NET") {
                out.push(line_start);
            }
            line_start = i + 1;
        }
        i += 1;
    }
    out
}

/// SDF: safe positions are the `(` of a `(CELL` group at nesting depth 1
/// (directly inside the DELAYFILE group), outside quoted strings.
fn sdf_boundaries(src: &[u8]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut i = 0usize;
    while i < src.len() {
        match src[i] {
            b'"' => {
                i += 1;
                while i < src.len() && src[i] != b'"' {
                    i += if src[i] == b'\\' { 2 } else { 1 };
                }
                i += 1;
            }
            b'(' => {
                if depth == 1 {
                    let mut j = i + 1;
                    while j < src.len() && src[j].is_ascii_whitespace() {
                        j += 1;
                    }
                    if src[j..].starts_with(b"CELL")
                        && src.get(j + 4).map_or(true, |c| !c.is_ascii_alphanumeric())
                    {
                        out.push(i);
                    }
                }
                depth += 1;
                i += 1;
            }
            b')' => {
                depth -= 1;
                i += 1;
            }
            _ => i += 1,
        }
    }
    out
}
