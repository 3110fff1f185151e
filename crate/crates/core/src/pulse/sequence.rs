//! Textual pulse-sequence language.
//!
//! Statements are separated by `;`:
//!   laser <dur>
//!   mw <dur|t|pi|pi/2> [phase <deg>]
//!   wait <dur|t>
//!   read <dur>
//! Durations take an `ns`, `us` or `ms` suffix. `t` marks the swept duration;
//! it may appear several times (an echo sweeps both free-evolution arms
//! together) but always binds to the same value, and may not be mixed across
//! `wait` and `mw` in one sequence. `pi` and `pi/2` resolve to durations from
//! the active Rabi frequency at run time.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SequenceError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown unit '{unit}' at line {line}, column {col}")]
    UnknownUnit { line: usize, col: usize, unit: String },
    #[error("sweep placeholder 't' used on more than one operation kind")]
    MultipleSweepPlaceholders,
    #[error("malformed sequence: {0}")]
    Malformed(String),
}

/// Duration of a laser/wait/read segment, in ns, or the sweep placeholder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DurationSpec {
    FixedNs(f64),
    Sweep,
}

/// Microwave pulse length: explicit, swept, or resolved from the active Rabi
/// frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MwLength {
    FixedNs(f64),
    Sweep,
    Pi,
    PiOverTwo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseOp {
    Laser { dur_ns: f64 },
    Mw { len: MwLength, phase_deg: f64 },
    Wait { dur: DurationSpec },
    Read { window_ns: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    ops: Vec<PulseOp>,
}

impl PulseSequence {
    pub fn new(ops: Vec<PulseOp>) -> Result<Self, SequenceError> {
        if !ops.iter().any(|op| matches!(op, PulseOp::Read { .. })) {
            return Err(SequenceError::Malformed(
                "sequence contains no read window".into(),
            ));
        }
        if Self::ambiguous_sweep(&ops) {
            return Err(SequenceError::MultipleSweepPlaceholders);
        }
        Ok(Self { ops })
    }

    fn ambiguous_sweep(ops: &[PulseOp]) -> bool {
        let wait_sweep = ops
            .iter()
            .any(|op| matches!(op, PulseOp::Wait { dur: DurationSpec::Sweep }));
        let mw_sweep = ops
            .iter()
            .any(|op| matches!(op, PulseOp::Mw { len: MwLength::Sweep, .. }));
        wait_sweep && mw_sweep
    }

    pub fn ops(&self) -> &[PulseOp] {
        &self.ops
    }

    pub fn has_sweep(&self) -> bool {
        self.ops.iter().any(|op| {
            matches!(
                op,
                PulseOp::Wait { dur: DurationSpec::Sweep }
                    | PulseOp::Mw { len: MwLength::Sweep, .. }
            )
        })
    }

    /// Canonical textual form; reparses to an identical sequence.
    pub fn format(&self) -> String {
        let mut out = String::new();
        let dur = |d: &DurationSpec| match d {
            DurationSpec::FixedNs(ns) => format!("{ns}ns"),
            DurationSpec::Sweep => "t".to_string(),
        };
        for (i, op) in self.ops.iter().enumerate() {
            if i > 0 {
                out.push_str("; ");
            }
            match op {
                PulseOp::Laser { dur_ns } => {
                    let _ = write!(out, "laser {dur_ns}ns");
                }
                PulseOp::Wait { dur: d } => {
                    let _ = write!(out, "wait {}", dur(d));
                }
                PulseOp::Read { window_ns } => {
                    let _ = write!(out, "read {window_ns}ns");
                }
                PulseOp::Mw { len, phase_deg } => {
                    let l = match len {
                        MwLength::FixedNs(ns) => format!("{ns}ns"),
                        MwLength::Sweep => "t".to_string(),
                        MwLength::Pi => "pi".to_string(),
                        MwLength::PiOverTwo => "pi/2".to_string(),
                    };
                    let _ = write!(out, "mw {l}");
                    if *phase_deg != 0.0 {
                        let _ = write!(out, " phase {phase_deg}");
                    }
                }
            }
        }
        out
    }
}

struct Token {
    text: String,
    line: usize,
    col: usize,
}

fn tokenize_statement(stmt: &str, line0: usize, col0: usize) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut line = line0;
    let mut col = col0;
    let mut current: Option<Token> = None;
    for ch in stmt.chars() {
        if ch == '\n' {
            if let Some(t) = current.take() {
                tokens.push(t);
            }
            line += 1;
            col = 1;
            continue;
        }
        if ch.is_whitespace() {
            if let Some(t) = current.take() {
                tokens.push(t);
            }
        } else {
            match &mut current {
                Some(t) => t.text.push(ch),
                None => {
                    current = Some(Token {
                        text: ch.to_string(),
                        line,
                        col,
                    })
                }
            }
        }
        col += 1;
    }
    if let Some(t) = current {
        tokens.push(t);
    }
    tokens
}

fn parse_duration_ns(tok: &Token) -> Result<f64, SequenceError> {
    let split = tok
        .text
        .find(|c: char| c.is_ascii_alphabetic())
        .ok_or_else(|| SequenceError::Syntax {
            line: tok.line,
            col: tok.col,
            msg: format!("duration '{}' is missing a unit (ns|us|ms)", tok.text),
        })?;
    let (num, unit) = tok.text.split_at(split);
    let value: f64 = num.parse().map_err(|_| SequenceError::Syntax {
        line: tok.line,
        col: tok.col,
        msg: format!("cannot parse number in '{}'", tok.text),
    })?;
    let scale = match unit {
        "ns" => 1.0,
        "us" => 1e3,
        "ms" => 1e6,
        _ => {
            return Err(SequenceError::UnknownUnit {
                line: tok.line,
                col: tok.col,
                unit: unit.to_string(),
            })
        }
    };
    let ns = value * scale;
    if !(ns > 0.0) {
        return Err(SequenceError::Syntax {
            line: tok.line,
            col: tok.col,
            msg: format!("duration '{}' must be > 0", tok.text),
        });
    }
    Ok(ns)
}

/// Parse the textual pulse-sequence language.
pub fn parse_sequence(text: &str) -> Result<PulseSequence, SequenceError> {
    let mut ops = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut marks = vec![(1usize, 1usize)]; // (line, col) at each statement start
    for ch in text.chars() {
        if ch == '\n' {
            line += 1;
            col = 1;
            continue;
        }
        col += 1;
        if ch == ';' {
            marks.push((line, col));
        }
    }

    let statements: Vec<(&str, usize, usize)> = text
        .split(';')
        .zip(&marks)
        .map(|(piece, &(l, c))| (piece, l, c))
        .collect();

    for (stmt, l0, c0) in statements {
        let tokens = tokenize_statement(stmt, l0, c0);
        if tokens.is_empty() {
            continue;
        }
        let head = &tokens[0];
        let need_arg = |n: usize| -> Result<&Token, SequenceError> {
            tokens.get(n).ok_or_else(|| SequenceError::Syntax {
                line: head.line,
                col: head.col,
                msg: format!("'{}' requires an argument", head.text),
            })
        };
        let no_extra = |n: usize| -> Result<(), SequenceError> {
            if let Some(extra) = tokens.get(n) {
                return Err(SequenceError::Syntax {
                    line: extra.line,
                    col: extra.col,
                    msg: format!("unexpected token '{}'", extra.text),
                });
            }
            Ok(())
        };
        match head.text.as_str() {
            "laser" => {
                let arg = need_arg(1)?;
                no_extra(2)?;
                if arg.text == "t" {
                    return Err(SequenceError::Syntax {
                        line: arg.line,
                        col: arg.col,
                        msg: "laser duration cannot be swept".into(),
                    });
                }
                ops.push(PulseOp::Laser {
                    dur_ns: parse_duration_ns(arg)?,
                });
            }
            "wait" => {
                let arg = need_arg(1)?;
                no_extra(2)?;
                let dur = if arg.text == "t" {
                    DurationSpec::Sweep
                } else {
                    DurationSpec::FixedNs(parse_duration_ns(arg)?)
                };
                ops.push(PulseOp::Wait { dur });
            }
            "read" => {
                let arg = need_arg(1)?;
                no_extra(2)?;
                ops.push(PulseOp::Read {
                    window_ns: parse_duration_ns(arg)?,
                });
            }
            "mw" => {
                let arg = need_arg(1)?;
                let len = match arg.text.as_str() {
                    "t" => MwLength::Sweep,
                    "pi" => MwLength::Pi,
                    "pi/2" => MwLength::PiOverTwo,
                    _ => MwLength::FixedNs(parse_duration_ns(arg)?),
                };
                let phase_deg = if let Some(kw) = tokens.get(2) {
                    if kw.text != "phase" {
                        return Err(SequenceError::Syntax {
                            line: kw.line,
                            col: kw.col,
                            msg: format!("expected 'phase', found '{}'", kw.text),
                        });
                    }
                    let deg = need_arg(3)?;
                    no_extra(4)?;
                    deg.text.parse().map_err(|_| SequenceError::Syntax {
                        line: deg.line,
                        col: deg.col,
                        msg: format!("cannot parse phase '{}'", deg.text),
                    })?
                } else {
                    0.0
                };
                ops.push(PulseOp::Mw { len, phase_deg });
            }
            other => {
                return Err(SequenceError::Syntax {
                    line: head.line,
                    col: head.col,
                    msg: format!("unknown statement '{other}'"),
                });
            }
        }
    }

    PulseSequence::new(ops)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_t1_template() {
        let seq = parse_sequence("laser 5us; wait t; read 300ns").unwrap();
        assert_eq!(seq.ops().len(), 3);
        assert!(matches!(
            seq.ops()[1],
            PulseOp::Wait { dur: DurationSpec::Sweep }
        ));
        assert!(matches!(seq.ops()[2], PulseOp::Read { window_ns } if window_ns == 300.0));
    }

    #[test]
    fn echo_template_valid() {
        // both free-evolution arms share the placeholder
        let seq =
            parse_sequence("mw pi/2; wait t; mw pi; wait t; mw pi/2; read 300ns").unwrap();
        assert_eq!(seq.ops().len(), 6);
    }

    #[test]
    fn mixed_sweep_kinds_rejected() {
        let err = parse_sequence("mw t; wait t; read 300ns").unwrap_err();
        assert_eq!(err, SequenceError::MultipleSweepPlaceholders);
    }

    #[test]
    fn unknown_unit() {
        let err = parse_sequence("wait 5parsecs; read 1ns").unwrap_err();
        assert!(matches!(err, SequenceError::UnknownUnit { unit, .. } if unit == "parsecs"));
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_sequence("laser 5us;\nfrobnicate 3ns; read 1ns").unwrap_err();
        match err {
            SequenceError::Syntax { line, msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("frobnicate"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_read_rejected() {
        let err = parse_sequence("laser 5us; wait t").unwrap_err();
        assert!(matches!(err, SequenceError::Malformed(_)));
    }

    #[test]
    fn zero_duration_rejected() {
        assert!(parse_sequence("laser 0ns; read 1ns").is_err());
    }

    #[test]
    fn unit_scaling() {
        let seq = parse_sequence("laser 2us; wait 1ms; read 300ns").unwrap();
        assert!(matches!(
            seq.ops()[0],
            PulseOp::Laser { dur_ns } if dur_ns == 2000.0
        ));
        assert!(matches!(
            seq.ops()[1],
            PulseOp::Wait { dur: DurationSpec::FixedNs(ns) } if ns == 1e6
        ));
    }

    #[test]
    fn format_round_trip() {
        let texts = [
            "laser 5us; wait t; read 300ns",
            "laser 5us; mw t; read 300ns",
            "laser 5us; mw pi/2; wait t; mw pi phase 90; read 200ns",
            "laser 1us; mw 35ns phase 45; wait 100ns; read 300ns",
        ];
        for t in texts {
            let seq = parse_sequence(t).unwrap();
            let reparsed = parse_sequence(&seq.format()).unwrap();
            assert_eq!(seq, reparsed, "round trip failed for '{t}'");
        }
    }
}
