//! Line-oriented architecture files.
//!
//! ```text
//! # comment
//! name toy3
//! input 32 32 3
//! conv 3x3 16 1
//! conv 3x3 16 2 pad=1
//! pool 2x2 - 2
//! add - - - skip=1
//! pool global - -
//! flatten - - -
//! fc - 10 -
//! ```
//!
//! Every layer line is `kind kernel channels stride` followed by optional
//! `pad=N` / `skip=N` options. Fields may be separated by commas or
//! whitespace; `-` marks a field the kind does not use. Conv padding
//! defaults to `kernel / 2`, pool padding to 0.

use std::fmt::Write;

use super::{GraphBuilder, LayerGraph, LayerKind};
use crate::error::{Error, Result};

fn tokens(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect()
}

fn num(tok: &str, line: usize, field: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::parse(line, format!("expected integer {field}, got '{tok}'")))
}

fn kernel(tok: &str, line: usize) -> Result<usize> {
    let mut parts = tok.split('x');
    let h = num(parts.next().unwrap_or(""), line, "kernel")?;
    if let Some(w) = parts.next() {
        if num(w, line, "kernel")? != h {
            return Err(Error::parse(line, "only square kernels are supported"));
        }
    }
    Ok(h)
}

pub(super) fn parse(text: &str) -> Result<LayerGraph> {
    let mut name = String::from("custom");
    let mut builder: Option<GraphBuilder> = None;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks = tokens(content);
        let head = toks[0].to_ascii_lowercase();
        match head.as_str() {
            "name" => {
                if builder.is_some() {
                    return Err(Error::parse(line, "'name' must precede 'input'"));
                }
                name = toks
                    .get(1)
                    .ok_or_else(|| Error::parse(line, "missing name"))?
                    .to_string();
            }
            "input" => {
                if builder.is_some() {
                    return Err(Error::parse(line, "duplicate 'input' line"));
                }
                if toks.len() != 4 {
                    return Err(Error::parse(line, "expected 'input H W C'"));
                }
                let shape = (
                    num(toks[1], line, "height")?,
                    num(toks[2], line, "width")?,
                    num(toks[3], line, "channels")?,
                );
                builder = Some(GraphBuilder::new(name.clone(), shape));
            }
            kind => {
                let b = builder
                    .take()
                    .ok_or_else(|| Error::parse(line, "layer before 'input' line"))?;
                builder = Some(layer(b, kind, &toks, line)?);
            }
        }
    }

    builder
        .ok_or_else(|| Error::parse(last_line.max(1), "missing 'input' line"))?
        .build()
        .map_err(|e| Error::parse(last_line.max(1), e.to_string()))
}

fn layer(b: GraphBuilder, kind: &str, toks: &[&str], line: usize) -> Result<GraphBuilder> {
    if toks.len() < 4 {
        return Err(Error::parse(line, "expected 'kind kernel channels stride'"));
    }
    let mut pad = None;
    let mut skip = None;
    for opt in &toks[4..] {
        match opt.split_once('=') {
            Some(("pad", v)) => pad = Some(num(v, line, "pad")?),
            Some(("skip", v)) => skip = Some(num(v, line, "skip")?),
            _ => return Err(Error::parse(line, format!("unknown option '{opt}'"))),
        }
    }
    let wrap = |r: Result<GraphBuilder>| r.map_err(|e| Error::parse(line, e.to_string()));
    match kind {
        "conv" => {
            let k = kernel(toks[1], line)?;
            let c = num(toks[2], line, "channels")?;
            let s = num(toks[3], line, "stride")?;
            wrap(b.conv_padded(k, c, s, pad.unwrap_or(k / 2)))
        }
        "pool" if toks[1] == "global" => Ok(b.global_pool()),
        "pool" => {
            let k = kernel(toks[1], line)?;
            let s = num(toks[3], line, "stride")?;
            wrap(b.pool_padded(k, s, pad.unwrap_or(0)))
        }
        "fc" => wrap(b.fc(num(toks[2], line, "channels")?)),
        "flatten" => Ok(b.flatten()),
        "add" => {
            let from = skip.ok_or_else(|| Error::parse(line, "add needs skip=N"))?;
            wrap(b.residual(from))
        }
        other => Err(Error::parse(line, format!("unknown layer kind '{other}'"))),
    }
}

pub(super) fn render(g: &LayerGraph) -> String {
    let mut out = String::new();
    let (h, w, c) = g.input_shape;
    let _ = writeln!(out, "name {}", g.name);
    let _ = writeln!(out, "input {h} {w} {c}");
    for l in &g.layers {
        let kind = l.kind.as_str();
        let _ = match l.kind {
            LayerKind::Conv => writeln!(
                out,
                "{kind} {}x{} {} {} pad={}",
                l.kernel.0, l.kernel.1, l.out_channels, l.stride, l.padding
            ),
            LayerKind::Pool
                if l.kernel == l.in_spatial
                    && l.out_spatial == (1, 1)
                    && l.padding == 0
                    && l.stride == l.in_spatial.0.max(l.in_spatial.1) =>
            {
                writeln!(out, "{kind} global - -")
            }
            LayerKind::Pool => writeln!(
                out,
                "{kind} {}x{} - {} pad={}",
                l.kernel.0, l.kernel.1, l.stride, l.padding
            ),
            LayerKind::FullyConnected => writeln!(out, "{kind} - {} -", l.out_channels),
            LayerKind::Flatten => writeln!(out, "{kind} - - -"),
            LayerKind::ResidualAdd => {
                writeln!(out, "{kind} - - - skip={}", l.skip_from.unwrap_or(0))
            }
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{preset, preset_names};

    #[test]
    fn presets_round_trip_through_text() {
        for name in preset_names() {
            let g = preset(&name).unwrap();
            let back = parse(&render(&g)).unwrap();
            assert_eq!(back, g, "{name}");
        }
    }

    #[test]
    fn parses_commented_file_with_commas() {
        let src = "# tiny\nname t\ninput 8, 8, 3\nconv, 3x3, 4, 1  # first\npool 2 - 2\nfc - 2 -\n";
        let g = parse(src).unwrap();
        assert_eq!(g.name, "t");
        assert_eq!(g.conv_count(), 1);
        assert_eq!(g.layers[1].out_spatial, (4, 4));
        assert_eq!(g.layers[2].in_channels, 64);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse("input 8 8 3\nconv 3x3 4 1\nwarp 1 1 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse("conv 3x3 4 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse("input 8 8 3\nconv 3x3 four 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse("input 8 8 3\nadd - - -\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
