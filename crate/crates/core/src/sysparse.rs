//! Parser and emitter for the `.lag` system-specification format.
//!
//! ```text
//! system <identifier>
//! #! key value            (metadata directive; plain # starts a comment)
//! param <identifier> [positive]
//! coord <identifier> <even|odd>
//! L = <expression>
//! ```
//!
//! Expression grammar: `^` binds tightest (integer exponents only), then
//! unary minus, then `*` and `/`, then binary `+`/`-`; parentheses; the
//! function call `exp(...)`; rational literals `p/q`; the imaginary unit `im`.
//! Division is restricted to (sub)expressions that fold to a nonzero rational.

use crate::error::{Error, Result};
use crate::symexpr::{Expr, Parity, ParityClass, Rat, Sym};
use num_bigint::BigInt;
use num_traits::Zero;
use std::collections::BTreeSet;
use std::fmt::Write as _;

/// A parsed and validated singular Lagrangian system.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub name: String,
    pub params: Vec<(Sym, bool)>,
    pub coords: Vec<Sym>,
    pub lagrangian: Expr,
    pub metadata: Vec<(String, String)>,
}

impl SystemSpec {
    pub fn velocity(coord: &Sym) -> Sym {
        Sym::new(&format!("d{}", coord.name()), coord.parity())
    }
    pub fn accel(coord: &Sym) -> Sym {
        Sym::new(&format!("dd{}", coord.name()), coord.parity())
    }
    pub fn momentum(coord: &Sym) -> Sym {
        Sym::new(&format!("p_{}", coord.name()), coord.parity())
    }
    pub fn coord_ic(coord: &Sym) -> Sym {
        Sym::new(&format!("{}0", coord.name()), coord.parity())
    }
    pub fn momentum_ic(coord: &Sym) -> Sym {
        Sym::new(&format!("p{}0", coord.name()), coord.parity())
    }

    /// All phase-variable symbols: coordinates then momenta, declaration order.
    pub fn phase_vars(&self) -> Vec<Sym> {
        let mut out: Vec<Sym> = self.coords.clone();
        out.extend(self.coords.iter().map(SystemSpec::momentum));
        out
    }

    /// Initial-condition symbol of a phase variable, in the same order as
    /// [`SystemSpec::phase_vars`].
    pub fn phase_ics(&self) -> Vec<Sym> {
        let mut out: Vec<Sym> = self.coords.iter().map(SystemSpec::coord_ic).collect();
        out.extend(self.coords.iter().map(SystemSpec::momentum_ic));
        out
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex_expr(s: &str, line: usize, col0: usize) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        match c {
            ' ' | '\t' => {
                i += 1;
            }
            '#' => break,
            '(' => {
                out.push(Spanned { tok: Tok::LParen, line, col });
                i += 1;
            }
            ')' => {
                out.push(Spanned { tok: Tok::RParen, line, col });
                i += 1;
            }
            '+' => {
                out.push(Spanned { tok: Tok::Plus, line, col });
                i += 1;
            }
            '-' => {
                out.push(Spanned { tok: Tok::Minus, line, col });
                i += 1;
            }
            '*' => {
                out.push(Spanned { tok: Tok::Star, line, col });
                i += 1;
            }
            '/' => {
                out.push(Spanned { tok: Tok::Slash, line, col });
                i += 1;
            }
            '^' => {
                out.push(Spanned { tok: Tok::Caret, line, col });
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let lit: String = chars[start..i].iter().collect();
                let n = lit.parse::<BigInt>().map_err(|_| Error::SyntaxError {
                    line,
                    col,
                    msg: format!("bad integer literal `{lit}`"),
                })?;
                out.push(Spanned { tok: Tok::Int(n), line, col });
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let name: String = chars[start..i].iter().collect();
                out.push(Spanned { tok: Tok::Ident(name), line, col });
            }
            other => {
                return Err(Error::SyntaxError {
                    line,
                    col,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pratt parser over the token stream; folds directly into canonical Exprs.
// ---------------------------------------------------------------------------

struct ExprParser<'a> {
    toks: &'a [Spanned],
    pos: usize,
    scope: &'a Scope,
    line: usize,
}

struct Scope {
    coords: Vec<Sym>,
    params: Vec<Sym>,
}

impl Scope {
    fn resolve(&self, name: &str, line: usize, col: usize) -> Result<Expr> {
        if name == "im" {
            return Ok(Expr::imaginary());
        }
        if name == "t" {
            return Err(Error::NonAutonomous { line, col });
        }
        for c in &self.coords {
            if c.name() == name {
                return Ok(Expr::sym(c));
            }
            if format!("d{}", c.name()) == name {
                return Ok(Expr::sym(&SystemSpec::velocity(c)));
            }
            if format!("dd{}", c.name()) == name {
                return Err(Error::SyntaxError {
                    line,
                    col,
                    msg: format!("second derivative `{name}` is not allowed in a Lagrangian"),
                });
            }
        }
        for p in &self.params {
            if p.name() == name {
                return Ok(Expr::sym(p));
            }
        }
        Err(Error::UnknownSymbol { name: name.to_string(), line, col })
    }
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: &str) -> Error {
        let (line, col) = match self.peek() {
            Some(s) => (s.line, s.col),
            None => (self.line, 0),
        };
        Error::SyntaxError { line, col, msg: msg.to_string() }
    }

    fn checked_add(&self, a: Expr, b: Expr, line: usize, col: usize) -> Result<Expr> {
        let ok = matches!(
            (a.parity_class(), b.parity_class()),
            (ParityClass::Zero, _)
                | (_, ParityClass::Zero)
                | (ParityClass::Even, ParityClass::Even)
                | (ParityClass::Odd, ParityClass::Odd)
        );
        if !ok {
            return Err(Error::SyntaxError {
                line,
                col,
                msg: format!("mixed-parity sum: `{a}` and `{b}`"),
            });
        }
        Ok(a.add(&b))
    }

    fn parse(&mut self, min_bp: u8) -> Result<Expr> {
        let first = self.next().ok_or_else(|| self.err_here("unexpected end of expression"))?;
        let mut lhs = match &first.tok {
            Tok::Int(n) => Expr::rational(Rat::from_integer(n.clone())),
            Tok::Ident(name) if name == "exp" => {
                match self.next() {
                    Some(Spanned { tok: Tok::LParen, .. }) => {}
                    _ => {
                        return Err(Error::SyntaxError {
                            line: first.line,
                            col: first.col,
                            msg: "expected `(` after exp".into(),
                        })
                    }
                }
                let arg = self.parse(0)?;
                match self.next() {
                    Some(Spanned { tok: Tok::RParen, .. }) => {}
                    _ => return Err(self.err_here("expected `)` to close exp(")),
                }
                Expr::exp(&arg).map_err(|e| Error::SyntaxError {
                    line: first.line,
                    col: first.col,
                    msg: e.to_string(),
                })?
            }
            Tok::Ident(name) => {
                if matches!(self.peek(), Some(Spanned { tok: Tok::LParen, .. })) {
                    return Err(Error::SyntaxError {
                        line: first.line,
                        col: first.col,
                        msg: format!("unknown function `{name}` (only exp is available)"),
                    });
                }
                self.scope.resolve(name, first.line, first.col)?
            }
            Tok::LParen => {
                let inner = self.parse(0)?;
                match self.next() {
                    Some(Spanned { tok: Tok::RParen, .. }) => {}
                    _ => return Err(self.err_here("expected `)`")),
                }
                inner
            }
            Tok::Minus => {
                // unary minus binds tighter than * but looser than ^
                let inner = self.parse(7)?;
                inner.neg()
            }
            _ => {
                return Err(Error::SyntaxError {
                    line: first.line,
                    col: first.col,
                    msg: "expected a term".into(),
                })
            }
        };

        loop {
            let (op, l_bp) = match self.peek() {
                Some(Spanned { tok: Tok::Plus, .. }) => (Tok::Plus, 1),
                Some(Spanned { tok: Tok::Minus, .. }) => (Tok::Minus, 1),
                Some(Spanned { tok: Tok::Star, .. }) => (Tok::Star, 5),
                Some(Spanned { tok: Tok::Slash, .. }) => (Tok::Slash, 5),
                Some(Spanned { tok: Tok::Caret, .. }) => (Tok::Caret, 9),
                _ => break,
            };
            if l_bp < min_bp {
                break;
            }
            let at = self.next().unwrap();
            match op {
                Tok::Plus => {
                    let rhs = self.parse(2)?;
                    lhs = self.checked_add(lhs, rhs, at.line, at.col)?;
                }
                Tok::Minus => {
                    let rhs = self.parse(2)?;
                    lhs = self.checked_add(lhs, rhs.neg(), at.line, at.col)?;
                }
                Tok::Star => {
                    let rhs = self.parse(6)?;
                    lhs = lhs.mul(&rhs);
                }
                Tok::Slash => {
                    let rhs = self.parse(6)?;
                    let c = rhs.as_rational().filter(|c| !c.is_zero()).ok_or_else(|| {
                        Error::SyntaxError {
                            line: at.line,
                            col: at.col,
                            msg: format!("division is restricted to nonzero rational literals, got `{rhs}`"),
                        }
                    })?;
                    lhs = lhs.scale(&c.recip());
                }
                Tok::Caret => {
                    let e = self.next().ok_or_else(|| self.err_here("expected an exponent"))?;
                    let n = match &e.tok {
                        Tok::Int(n) => u32::try_from(n.clone()).ok().filter(|n| *n <= 4096),
                        _ => None,
                    };
                    let n = n.ok_or(Error::SyntaxError {
                        line: e.line,
                        col: e.col,
                        msg: "exponent must be an integer literal between 0 and 4096".into(),
                    })?;
                    lhs = lhs.pow(n);
                }
                _ => unreachable!(),
            }
        }
        Ok(lhs)
    }
}

// ---------------------------------------------------------------------------
// Document parser
// ---------------------------------------------------------------------------

fn valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parse a `.lag` document into a validated [`SystemSpec`].
pub fn parse_system(text: &str) -> Result<SystemSpec> {
    let mut name: Option<String> = None;
    let mut params: Vec<(Sym, bool)> = Vec::new();
    let mut coords: Vec<Sym> = Vec::new();
    let mut metadata: Vec<(String, String)> = Vec::new();
    let mut lagrangian: Option<Expr> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim_end();
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(directive) = trimmed.strip_prefix("#!") {
            let mut it = directive.trim().splitn(2, char::is_whitespace);
            if let Some(key) = it.next().filter(|k| !k.is_empty()) {
                let value = it.next().unwrap_or("").trim().to_string();
                metadata.push((key.to_string(), value));
            }
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        if lagrangian.is_some() {
            return Err(Error::SyntaxError {
                line: line_no,
                col: 1,
                msg: "nothing may follow the `L = ...` line".into(),
            });
        }
        let col_of = |word: &str| line.find(word).map(|c| c + 1).unwrap_or(1);
        let mut words = trimmed.split_whitespace();
        let head = words.next().unwrap();
        match head {
            "system" => {
                let id = words.next().ok_or(Error::SyntaxError {
                    line: line_no,
                    col: col_of("system"),
                    msg: "expected `system <identifier>`".into(),
                })?;
                if name.is_some() {
                    return Err(Error::DuplicateCoord("system".into()));
                }
                if !valid_ident(id) || words.next().is_some() {
                    return Err(Error::SyntaxError {
                        line: line_no,
                        col: col_of(id),
                        msg: format!("bad system name `{id}`"),
                    });
                }
                name = Some(id.to_string());
            }
            "param" => {
                let id = words.next().ok_or(Error::SyntaxError {
                    line: line_no,
                    col: 1,
                    msg: "expected `param <identifier> [positive]`".into(),
                })?;
                let positive = match words.next() {
                    None => false,
                    Some("positive") => true,
                    Some(other) => {
                        return Err(Error::SyntaxError {
                            line: line_no,
                            col: col_of(other),
                            msg: format!("expected `positive`, got `{other}`"),
                        })
                    }
                };
                validate_name(id, line_no, col_of(id))?;
                params.push((Sym::even(id), positive));
            }
            "coord" => {
                let id = words.next().ok_or(Error::SyntaxError {
                    line: line_no,
                    col: 1,
                    msg: "expected `coord <identifier> <even|odd>`".into(),
                })?;
                let parity = match words.next() {
                    Some("even") => Parity::Even,
                    Some("odd") => Parity::Odd,
                    other => {
                        return Err(Error::SyntaxError {
                            line: line_no,
                            col: col_of(id),
                            msg: format!("expected parity `even` or `odd`, got `{other:?}`"),
                        })
                    }
                };
                validate_name(id, line_no, col_of(id))?;
                coords.push(Sym::new(id, parity));
            }
            "L" => {
                match words.next() {
                    Some("=") => {}
                    _ => {
                        return Err(Error::SyntaxError {
                            line: line_no,
                            col: 1,
                            msg: "expected `L = <expression>`".into(),
                        })
                    }
                }
                let eq_pos = line.find('=').unwrap();
                let expr_src = &line[eq_pos + 1..];
                let toks = lex_expr(expr_src, line_no, eq_pos + 2)?;
                if toks.is_empty() {
                    return Err(Error::SyntaxError {
                        line: line_no,
                        col: eq_pos + 2,
                        msg: "empty Lagrangian".into(),
                    });
                }
                let scope = Scope {
                    coords: coords.clone(),
                    params: params.iter().map(|(p, _)| p.clone()).collect(),
                };
                let mut parser = ExprParser { toks: &toks, pos: 0, scope: &scope, line: line_no };
                let expr = parser.parse(0)?;
                if let Some(stray) = parser.peek() {
                    return Err(Error::SyntaxError {
                        line: stray.line,
                        col: stray.col,
                        msg: "trailing tokens after expression".into(),
                    });
                }
                lagrangian = Some(expr);
            }
            other => {
                return Err(Error::SyntaxError {
                    line: line_no,
                    col: 1,
                    msg: format!("unknown declaration `{other}`"),
                })
            }
        }
    }

    let name = name.ok_or(Error::SyntaxError {
        line: 1,
        col: 1,
        msg: "missing `system <identifier>` line".into(),
    })?;
    if coords.is_empty() {
        return Err(Error::SyntaxError {
            line: 1,
            col: 1,
            msg: "at least one coordinate is required".into(),
        })
    }
    let lagrangian = lagrangian.ok_or(Error::SyntaxError {
        line: 1,
        col: 1,
        msg: "missing `L = <expression>` line".into(),
    })?;

    let spec = SystemSpec { name, params, coords, lagrangian, metadata };
    validate_spec(&spec)?;
    Ok(spec)
}

fn validate_name(id: &str, line: usize, col: usize) -> Result<()> {
    if !valid_ident(id) {
        return Err(Error::SyntaxError { line, col, msg: format!("bad identifier `{id}`") });
    }
    if id == "t" || id == "im" || id == "exp" {
        return Err(Error::SyntaxError { line, col, msg: format!("`{id}` is reserved") });
    }
    if id.starts_with('d') {
        return Err(Error::SyntaxError {
            line,
            col,
            msg: format!("`{id}` starts with `d`, which is reserved for velocity symbols"),
        });
    }
    Ok(())
}

fn validate_spec(spec: &SystemSpec) -> Result<()> {
    // declared and generated names must all be distinct
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut claim = |n: String| -> Result<()> {
        if !seen.insert(n.clone()) {
            return Err(Error::DuplicateCoord(n));
        }
        Ok(())
    };
    for (p, _) in &spec.params {
        claim(p.name().to_string())?;
    }
    for c in &spec.coords {
        claim(c.name().to_string())?;
        claim(SystemSpec::velocity(c).name().to_string())?;
        claim(SystemSpec::accel(c).name().to_string())?;
        claim(SystemSpec::momentum(c).name().to_string())?;
        claim(SystemSpec::coord_ic(c).name().to_string())?;
        claim(SystemSpec::momentum_ic(c).name().to_string())?;
    }
    Ok(())
}

/// Emit a `.lag` document that re-parses to a structurally equal spec.
pub fn emit_system(spec: &SystemSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "system {}", spec.name);
    for (k, v) in &spec.metadata {
        if v.is_empty() {
            let _ = writeln!(out, "#! {k}");
        } else {
            let _ = writeln!(out, "#! {k} {v}");
        }
    }
    for (p, positive) in &spec.params {
        if *positive {
            let _ = writeln!(out, "param {} positive", p.name());
        } else {
            let _ = writeln!(out, "param {}", p.name());
        }
    }
    for c in &spec.coords {
        let parity = match c.parity() {
            Parity::Even => "even",
            Parity::Odd => "odd",
        };
        let _ = writeln!(out, "coord {} {parity}", c.name());
    }
    let _ = writeln!(out, "L = {}", spec.lagrangian);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::rat;

    pub(crate) const TOY: &str = "\
system toy
coord x even
coord y even
coord z even
L = (1/2)*dx^2 + (z + exp(-x))*dy - (1/2)*z*x^2
";

    #[test]
    fn parses_the_toy_system() {
        let spec = parse_system(TOY).unwrap();
        assert_eq!(spec.name, "toy");
        assert_eq!(spec.coords.len(), 3);
        assert!(spec.coords.iter().all(|c| c.parity() == Parity::Even));
        let x = Sym::even("x");
        let z = Sym::even("z");
        let expected = Expr::sym(&Sym::even("dx"))
            .pow(2)
            .scale(&rat(1, 2))
            .add(
                &Expr::sym(&z)
                    .add(&Expr::exp(&Expr::sym(&x).neg()).unwrap())
                    .mul(&Expr::sym(&Sym::even("dy"))),
            )
            .sub(&Expr::sym(&z).mul(&Expr::sym(&x).pow(2)).scale(&rat(1, 2)));
        assert_eq!(spec.lagrangian, expected);
    }

    #[test]
    fn explicit_time_is_rejected() {
        let text = "system bad\ncoord x even\nL = dx*t\n";
        assert!(matches!(parse_system(text), Err(Error::NonAutonomous { .. })));
    }

    #[test]
    fn harmonic_oscillator_parses() {
        let text = "system osc\ncoord q even\nL = (1/2)*dq^2 - (1/2)*q^2\n";
        let spec = parse_system(text).unwrap();
        assert_eq!(spec.coords.len(), 1);
        assert_eq!(spec.name, "osc");
    }

    #[test]
    fn unknown_symbols_are_positioned() {
        let text = "system bad\ncoord x even\nL = dx*w\n";
        match parse_system(text) {
            Err(Error::UnknownSymbol { name, line, col }) => {
                assert_eq!(name, "w");
                assert_eq!(line, 3);
                assert!(col > 1);
            }
            other => panic!("expected UnknownSymbol, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_coord_is_rejected() {
        let text = "system bad\ncoord x even\ncoord x odd\nL = dx\n";
        assert!(matches!(parse_system(text), Err(Error::DuplicateCoord(_))));
    }

    #[test]
    fn velocity_prefix_names_are_rejected() {
        let text = "system bad\ncoord dx even\nL = 1\n";
        assert!(matches!(parse_system(text), Err(Error::SyntaxError { .. })));
    }

    #[test]
    fn division_by_expressions_is_rejected() {
        let text = "system bad\ncoord x even\nL = dx/x\n";
        assert!(matches!(parse_system(text), Err(Error::SyntaxError { .. })));
    }

    #[test]
    fn second_derivatives_are_rejected() {
        let text = "system bad\ncoord x even\nL = ddx\n";
        assert!(matches!(parse_system(text), Err(Error::SyntaxError { .. })));
    }

    #[test]
    fn mixed_parity_sum_is_rejected() {
        let text = "system bad\ncoord x even\ncoord u odd\nL = x + u\n";
        assert!(matches!(parse_system(text), Err(Error::SyntaxError { .. })));
    }

    #[test]
    fn round_trips_through_emit() {
        let spec = parse_system(TOY).unwrap();
        let emitted = emit_system(&spec);
        assert_eq!(parse_system(&emitted).unwrap(), spec);

        let odd = "system fermi\nparam m positive\ncoord u odd\ncoord v odd\nL = im*v*du - m*v*u\n";
        let spec = parse_system(odd).unwrap();
        let emitted = emit_system(&spec);
        assert!(emitted.contains("coord u odd"));
        assert_eq!(parse_system(&emitted).unwrap(), spec);
    }

    #[test]
    fn metadata_directives_round_trip() {
        let text = "system latt\n#! model sd\n#! n 2\ncoord x even\nL = dx^2\n";
        let spec = parse_system(text).unwrap();
        assert_eq!(spec.metadata_value("model"), Some("sd"));
        assert_eq!(spec.metadata_value("n"), Some("2"));
        assert_eq!(parse_system(&emit_system(&spec)).unwrap(), spec);
    }

    #[test]
    fn unary_minus_and_power_precedence() {
        let text = "system p\ncoord x even\nL = -x^2\n";
        let spec = parse_system(text).unwrap();
        assert_eq!(spec.lagrangian, Expr::sym(&Sym::even("x")).pow(2).neg());
        // -x*x is (-x)*x = -x^2 as well
        let text = "system p\ncoord x even\nL = -x*x\n";
        let spec2 = parse_system(text).unwrap();
        assert_eq!(spec2.lagrangian, spec.lagrangian);
    }
}
