//! Text form of ECM tuples.
//!
//! Inputs: `{T_OL || T_nOL | T_L1L2 | T_L2L3+T_p | T_L3Mem+T_p} cy`
//! Predictions: `{T_core | T_L2 | T_L3 | T_Mem} cy`
//!
//! A level-dependent T_nOL is written as increments tagged with the level
//! they start at, e.g. `{4 || 2+2_L2+2_MEM | 4 | 0.8+17} cy`. On input the
//! unicode separators `‖` and `┆` are accepted, and the trailing ` cy` is
//! optional. Output always uses ASCII and ends in ` cy`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{default_level_names, transfer_label, EcmInputs, EcmPrediction, LevelTransfer, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Either tuple kind; inputs are recognised by the `||` separator.
#[derive(Debug, Clone, PartialEq)]
pub enum Shorthand {
    Inputs(EcmInputs),
    Prediction(EcmPrediction),
}

/// Number rendering: `Exact` is the shortest decimal that reads back to the
/// same binary value; `Decimals(n)` rounds to at most `n` fractional digits
/// and drops trailing zeros; `Fixed(n)` always prints `n` digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Digits {
    #[default]
    Exact,
    Decimals(usize),
    Fixed(usize),
}

pub fn format_number(x: f64, digits: Digits) -> String {
    match digits {
        Digits::Exact => format!("{x}"),
        Digits::Fixed(n) => format!("{x:.n$}"),
        Digits::Decimals(n) => {
            let s = format!("{x:.n$}");
            let s = if s.contains('.') {
                s.trim_end_matches('0').trim_end_matches('.').to_string()
            } else {
                s
            };
            if s == "-0" {
                "0".to_string()
            } else {
                s
            }
        }
    }
}

pub fn format_inputs(inputs: &EcmInputs, digits: Digits) -> String {
    let mut out = String::from("{");
    out.push_str(&format_number(inputs.t_ol(), digits));
    out.push_str(" || ");
    out.push_str(&format_number(inputs.t_nol(), digits));
    if let Some(per_level) = inputs.t_nol_by_level() {
        for k in 1..per_level.len() {
            let step = per_level[k] - per_level[k - 1];
            if step != 0.0 {
                let _ = write!(out, "+{}_{}", format_number(step, digits), inputs.level_names()[k]);
            }
        }
    }
    for t in inputs.transfers() {
        out.push_str(" | ");
        out.push_str(&format_number(t.cycles(), digits));
        if t.penalty() != 0.0 {
            out.push('+');
            out.push_str(&format_number(t.penalty(), digits));
        }
    }
    out.push_str("} cy");
    out
}

pub fn format_prediction(pred: &EcmPrediction, digits: Digits) -> String {
    format_values(&pred.cycles(), digits, " cy")
}

/// `{a | b | c}` followed by `unit`.
pub fn format_values(values: &[f64], digits: Digits, unit: &str) -> String {
    let body: Vec<String> = values.iter().map(|v| format_number(*v, digits)).collect();
    format!("{{{}}}{unit}", body.join(" | "))
}

pub fn format_shorthand(x: &Shorthand) -> String {
    match x {
        Shorthand::Inputs(i) => format_inputs(i, Digits::Exact),
        Shorthand::Prediction(p) => format_prediction(p, Digits::Exact),
    }
}

pub fn parse_shorthand(text: &str) -> Result<Shorthand, ParseError> {
    Parser::new(text).parse()
}

pub fn parse_inputs(text: &str) -> Result<EcmInputs, ParseError> {
    match parse_shorthand(text)? {
        Shorthand::Inputs(i) => Ok(i),
        Shorthand::Prediction(_) => Err(ParseError::Syntax {
            pos: 0,
            msg: "expected an input tuple with `||`".into(),
        }),
    }
}

pub fn parse_prediction(text: &str) -> Result<EcmPrediction, ParseError> {
    match parse_shorthand(text)? {
        Shorthand::Prediction(p) => Ok(p),
        Shorthand::Inputs(_) => Err(ParseError::Syntax {
            pos: 0,
            msg: "expected a prediction tuple without `||`".into(),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Sep {
    Double,
    Single,
    Close,
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn eat(&mut self, token: &str) -> bool {
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let bytes = self.rest().as_bytes();
        let mut end = 0;
        while end < bytes.len() {
            let b = bytes[end];
            let exponent_sign = (b == b'-' || b == b'+') && end > 0 && matches!(bytes[end - 1], b'e' | b'E');
            if b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E' || exponent_sign {
                end += 1;
            } else {
                break;
            }
        }
        if end == 0 {
            return self.error("expected a number");
        }
        let token = &self.rest()[..end];
        match token.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos += end;
                Ok(v)
            }
            _ => self.error(format!("invalid number `{token}`")),
        }
    }

    fn label(&mut self) -> Result<&'a str, ParseError> {
        let rest = self.rest();
        let end = rest
            .find(|c: char| !c.is_ascii_alphanumeric())
            .unwrap_or(rest.len());
        if end == 0 {
            return self.error("expected a level label");
        }
        self.pos += end;
        Ok(&rest[..end])
    }

    fn separator(&mut self) -> Result<Sep, ParseError> {
        self.skip_ws();
        if self.eat("||") || self.eat("‖") {
            Ok(Sep::Double)
        } else if self.eat("|") || self.eat("┆") {
            Ok(Sep::Single)
        } else if self.eat("}") {
            Ok(Sep::Close)
        } else {
            self.error("expected `|`, `||` or `}`")
        }
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        self.skip_ws();
        if self.eat("cy") {
            self.skip_ws();
        }
        if self.pos != self.text.len() {
            return self.error("trailing characters after tuple");
        }
        Ok(())
    }

    fn parse(mut self) -> Result<Shorthand, ParseError> {
        self.skip_ws();
        if !self.eat("{") {
            return self.error("expected `{`");
        }
        let first = self.number()?;
        match self.separator()? {
            Sep::Double => self.inputs_after(first),
            Sep::Single => self.prediction_after(first, false),
            Sep::Close => self.prediction_after(first, true),
        }
    }

    fn prediction_after(mut self, first: f64, closed: bool) -> Result<Shorthand, ParseError> {
        let mut values = vec![first];
        if !closed {
            loop {
                values.push(self.number()?);
                match self.separator()? {
                    Sep::Single => continue,
                    Sep::Close => break,
                    Sep::Double => return self.error("`||` is only allowed after T_OL"),
                }
            }
        }
        self.finish()?;
        let names = default_level_names(values.len() - 1);
        let pred = EcmPrediction::new(names.into_iter().zip(values).collect())?;
        Ok(Shorthand::Prediction(pred))
    }

    fn inputs_after(mut self, t_ol: f64) -> Result<Shorthand, ParseError> {
        let t_nol = self.number()?;
        let mut steps = Vec::new();
        loop {
            self.skip_ws();
            if !self.eat("+") {
                break;
            }
            let step = self.number()?;
            if !self.eat("_") {
                return self.error("expected `_<level>` after a T_nOL increment");
            }
            let label_pos = self.pos;
            let label = self.label()?;
            steps.push((step, label, label_pos));
        }

        let mut transfers = Vec::new();
        loop {
            match self.separator()? {
                Sep::Close => break,
                Sep::Double => return self.error("`||` is only allowed after T_OL"),
                Sep::Single => {
                    let cycles = self.number()?;
                    self.skip_ws();
                    let penalty = if self.eat("+") { self.number()? } else { 0.0 };
                    transfers.push((cycles, penalty));
                }
            }
        }
        self.finish()?;

        let names = default_level_names(transfers.len());
        let transfers = transfers
            .iter()
            .enumerate()
            .map(|(i, (c, p))| LevelTransfer::new(transfer_label(&names[i], &names[i + 1]), *c, *p))
            .collect::<Result<Vec<_>, _>>()?;
        let mut inputs = EcmInputs::new(t_ol, t_nol, transfers)?;

        if !steps.is_empty() {
            let mut per_level = vec![t_nol; names.len()];
            for (step, label, pos) in steps {
                let Some(start) = names.iter().skip(1).position(|n| n == label) else {
                    return Err(ParseError::Syntax {
                        pos,
                        msg: format!("unknown level `{label}` (expected one of {})", names[1..].join(", ")),
                    });
                };
                for v in per_level.iter_mut().skip(start + 1) {
                    *v += step;
                }
            }
            inputs = inputs.with_level_t_nol(per_level)?;
        }
        Ok(Shorthand::Inputs(inputs))
    }
}
