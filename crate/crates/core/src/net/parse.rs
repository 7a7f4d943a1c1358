//! Recursive-descent parser for the HUGIN `.net` subset.

use super::{NodeSpec, RawNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64, String),
    Punct(char),
    Eof,
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Ident(s) => s.clone(),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Num(_, raw) => raw.clone(),
            Tok::Punct(c) => c.to_string(),
            Tok::Eof => "<end of input>".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' | ')' | '{' | '}' | '=' | ';' | '|' => {
                out.push(Token {
                    tok: Tok::Punct(c),
                    line,
                });
                i += 1;
            }
            '"' => {
                let start_line = line;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => {
                            return Err(Error::Parse {
                                line: start_line,
                                token: format!("\"{s}"),
                                message: "unterminated string".into(),
                            })
                        }
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') if i + 1 < chars.len() => {
                            s.push(chars[i + 1]);
                            i += 2;
                        }
                        Some(&ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push(Token {
                    tok: Tok::Str(s),
                    line: start_line,
                });
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || "+-.".contains(chars[i])) {
                    i += 1;
                }
                let raw: String = chars[start..i].iter().collect();
                let value = raw.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    token: raw.clone(),
                    message: "malformed number".into(),
                })?;
                out.push(Token {
                    tok: Tok::Num(value, raw),
                    line,
                });
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    line,
                });
            }
            other => {
                return Err(Error::Parse {
                    line,
                    token: other.to_string(),
                    message: "unexpected character".into(),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line });
    Ok(out)
}

#[derive(Debug, Clone)]
enum Value {
    Str(String),
    Num(f64),
    Ident(String),
    List(Vec<Value>),
}

struct Attr {
    name: String,
    value: Value,
    line: usize,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "continuous",
    "decision",
    "utility",
    "function",
    "class",
    "instance",
    "temporal",
];

const UNSUPPORTED_ATTRS: &[&str] = &["model_nodes", "model_data", "subtype"];

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, token: &Token, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: token.line,
            token: token.tok.text(),
            message: message.into(),
        })
    }

    fn expect_punct(&mut self, c: char) -> Result<Token> {
        let t = self.next();
        if t.tok == Tok::Punct(c) {
            Ok(t)
        } else {
            self.error(&t, format!("expected `{c}`"))
        }
    }

    fn expect_ident(&mut self) -> Result<(String, usize)> {
        let t = self.next();
        match t.tok {
            Tok::Ident(s) => Ok((s, t.line)),
            _ => self.error(&t, "expected a name"),
        }
    }

    fn value(&mut self) -> Result<Value> {
        let t = self.next();
        match t.tok {
            Tok::Str(s) => Ok(Value::Str(s)),
            Tok::Num(v, _) => Ok(Value::Num(v)),
            Tok::Ident(s) => Ok(Value::Ident(s)),
            Tok::Punct('(') => {
                let mut items = Vec::new();
                loop {
                    if self.peek().tok == Tok::Punct(')') {
                        self.next();
                        return Ok(Value::List(items));
                    }
                    if self.peek().tok == Tok::Eof {
                        let eof = self.peek().clone();
                        return self.error(&eof, "unterminated list");
                    }
                    items.push(self.value()?);
                }
            }
            _ => self.error(&t, "expected a value"),
        }
    }

    /// `{ name = value; ... }`
    fn attr_block(&mut self) -> Result<Vec<Attr>> {
        self.expect_punct('{')?;
        let mut attrs = Vec::new();
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Punct('}') => {
                    self.next();
                    return Ok(attrs);
                }
                Tok::Ident(name) => {
                    let name = name.clone();
                    self.next();
                    if UNSUPPORTED_ATTRS.contains(&name.as_str()) {
                        return Err(Error::Unsupported {
                            line: t.line,
                            feature: format!("attribute `{name}`"),
                        });
                    }
                    self.expect_punct('=')?;
                    let value = self.value()?;
                    self.expect_punct(';')?;
                    attrs.push(Attr {
                        name,
                        value,
                        line: t.line,
                    });
                }
                _ => return self.error(&t, "expected an attribute or `}`"),
            }
        }
    }
}

struct RawPotential {
    child: String,
    parents: Vec<String>,
    data: Option<(Value, usize)>,
    line: usize,
}

fn labels(value: &Value, line: usize, node: &str) -> Result<Vec<String>> {
    let items = match value {
        Value::List(items) => items,
        _ => {
            return Err(Error::Parse {
                line,
                token: "states".into(),
                message: format!("node `{node}`: states must be a list"),
            })
        }
    };
    items
        .iter()
        .map(|v| match v {
            Value::Str(s) | Value::Ident(s) => Ok(s.clone()),
            Value::Num(x) => Ok(x.to_string()),
            Value::List(_) => Err(Error::Parse {
                line,
                token: "states".into(),
                message: format!("node `{node}`: nested list in states"),
            }),
        })
        .collect()
}

/// Flatten `data`, checking that nesting either is a single flat list or has
/// exactly one level per parent plus one for the child states.
fn flatten_data(value: &Value, shape: &[usize], line: usize, node: &str) -> Result<Vec<f64>> {
    let err = |message: String| Error::Parse {
        line,
        token: "data".into(),
        message: format!("node `{node}`: {message}"),
    };
    let Value::List(top) = value else {
        return Err(err("data must be a parenthesized list".into()));
    };
    let flat = top.iter().all(|v| matches!(v, Value::Num(_)));
    if flat {
        return Ok(top
            .iter()
            .map(|v| match v {
                Value::Num(x) => *x,
                _ => unreachable!(),
            })
            .collect());
    }

    fn walk(v: &Value, shape: &[usize], out: &mut Vec<f64>) -> std::result::Result<(), String> {
        match (v, shape) {
            (Value::Num(x), []) => {
                out.push(*x);
                Ok(())
            }
            (Value::List(items), [n, rest @ ..]) => {
                if items.len() != *n {
                    return Err(format!("expected {n} entries at this nesting level, found {}", items.len()));
                }
                items.iter().try_for_each(|item| walk(item, rest, out))
            }
            (Value::List(_), []) => Err("data nested deeper than the parent count allows".into()),
            (_, _) => Err("data nesting depth does not match the parent count".into()),
        }
    }

    let mut out = Vec::new();
    walk(value, shape, &mut out).map_err(err)?;
    Ok(out)
}

pub(super) fn parse(text: &str) -> Result<RawNetwork> {
    let mut p = Parser {
        tokens: lex(text)?,
        pos: 0,
    };
    let mut name = String::new();
    let mut nodes: Vec<(String, Vec<String>, usize)> = Vec::new();
    let mut potentials: Vec<RawPotential> = Vec::new();

    loop {
        let t = p.next();
        let keyword = match &t.tok {
            Tok::Eof => break,
            Tok::Ident(s) => s.clone(),
            _ => return p.error(&t, "expected `net`, `node` or `potential`"),
        };
        match keyword.as_str() {
            "net" => {
                for attr in p.attr_block()? {
                    if attr.name == "name" {
                        if let Value::Str(s) | Value::Ident(s) = attr.value {
                            name = s;
                        }
                    }
                }
            }
            "node" | "discrete" => {
                if keyword == "discrete" {
                    let (kw, line) = p.expect_ident()?;
                    if kw != "node" {
                        return Err(Error::Unsupported {
                            line,
                            feature: format!("discrete {kw}"),
                        });
                    }
                }
                let (node_name, line) = p.expect_ident()?;
                let attrs = p.attr_block()?;
                let states = attrs
                    .iter()
                    .find(|a| a.name == "states")
                    .ok_or_else(|| Error::Parse {
                        line,
                        token: node_name.clone(),
                        message: "node has no `states` attribute".into(),
                    })
                    .and_then(|a| labels(&a.value, a.line, &node_name))?;
                if states.is_empty() {
                    return Err(Error::Parse {
                        line,
                        token: node_name,
                        message: "node has no states".into(),
                    });
                }
                nodes.push((node_name, states, line));
            }
            "potential" => {
                p.expect_punct('(')?;
                let (child, line) = p.expect_ident()?;
                let mut parents = Vec::new();
                let mut tok = p.next();
                if tok.tok == Tok::Punct('|') {
                    loop {
                        tok = p.next();
                        match tok.tok {
                            Tok::Ident(s) => parents.push(s),
                            _ => break,
                        }
                    }
                }
                if tok.tok != Tok::Punct(')') {
                    return p.error(&tok, "expected `)` closing the potential header");
                }
                let mut data = None;
                if p.peek().tok == Tok::Punct('{') {
                    for attr in p.attr_block()? {
                        if attr.name == "data" {
                            data = Some((attr.value, attr.line));
                        }
                    }
                } else if p.peek().tok == Tok::Punct(';') {
                    p.next();
                }
                potentials.push(RawPotential {
                    child,
                    parents,
                    data,
                    line,
                });
            }
            kw if UNSUPPORTED_KEYWORDS.contains(&kw) => {
                return Err(Error::Unsupported {
                    line: t.line,
                    feature: format!("`{kw}` declarations"),
                })
            }
            _ => return p.error(&t, "expected `net`, `node` or `potential`"),
        }
    }

    // assemble nodes, pairing each with exactly one potential
    let mut specs: Vec<NodeSpec> = Vec::with_capacity(nodes.len());
    let mut lines = Vec::with_capacity(nodes.len());
    for (node_name, states, line) in nodes {
        if specs.iter().any(|n| n.name == node_name) {
            return Err(Error::Parse {
                line,
                token: node_name,
                message: "duplicate node".into(),
            });
        }
        specs.push(NodeSpec {
            name: node_name,
            states,
            parents: Vec::new(),
            cpt_data: Vec::new(),
        });
        lines.push(line);
    }
    let mut seen = vec![false; specs.len()];
    for pot in potentials {
        let Some(ci) = specs.iter().position(|n| n.name == pot.child) else {
            return Err(Error::Parse {
                line: pot.line,
                token: pot.child,
                message: "potential for an undeclared node".into(),
            });
        };
        if seen[ci] {
            return Err(Error::Parse {
                line: pot.line,
                token: pot.child,
                message: "second potential for the same node".into(),
            });
        }
        seen[ci] = true;
        let mut shape = Vec::with_capacity(pot.parents.len() + 1);
        for parent in &pot.parents {
            match specs.iter().find(|n| &n.name == parent) {
                Some(n) => shape.push(n.states.len()),
                None => {
                    return Err(Error::Parse {
                        line: pot.line,
                        token: parent.clone(),
                        message: format!("unknown parent of `{}`", pot.child),
                    })
                }
            }
        }
        shape.push(specs[ci].states.len());
        let (value, data_line) = pot.data.ok_or_else(|| Error::Parse {
            line: pot.line,
            token: pot.child.clone(),
            message: "potential has no `data`".into(),
        })?;
        let data = flatten_data(&value, &shape, data_line, &pot.child)?;
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Parse {
                line: data_line,
                token: "data".into(),
                message: format!(
                    "node `{}`: expected {expected} probabilities, found {}",
                    pot.child,
                    data.len()
                ),
            });
        }
        specs[ci].parents = pot.parents;
        specs[ci].cpt_data = data;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Parse {
            line: lines[missing],
            token: specs[missing].name.clone(),
            message: "node has no potential".into(),
        });
    }
    Ok(RawNetwork { name, nodes: specs })
}
