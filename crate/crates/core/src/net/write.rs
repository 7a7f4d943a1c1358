use std::fmt::Write as _;

use super::Network;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn nested(data: &[f64], shape: &[usize], out: &mut String) {
    out.push('(');
    match shape {
        [] | [_] => {
            for (i, x) in data.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                // `{}` prints the shortest string that parses back to `x`
                let _ = write!(out, "{x}");
            }
        }
        [n, rest @ ..] => {
            let step = data.len() / n;
            for (i, chunk) in data.chunks(step).enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                nested(chunk, rest, out);
            }
        }
    }
    out.push(')');
}

/// Render a network as `.net` text that [`super::parse_net`] reads back to an
/// identical [`Network`].
pub fn to_net_string(net: &Network) -> String {
    let mut out = String::new();
    out.push_str("net\n{\n");
    if !net.name().is_empty() {
        let _ = writeln!(out, "    name = {};", quote(net.name()));
    }
    out.push_str("}\n");
    for n in net.nodes() {
        let states: Vec<String> = n.states.iter().map(|s| quote(s)).collect();
        let _ = write!(out, "\nnode {}\n{{\n    states = ({});\n}}\n", n.name, states.join(" "));
    }
    for n in net.nodes() {
        let header = if n.parents.is_empty() {
            n.name.clone()
        } else {
            format!("{} | {}", n.name, n.parents.join(" "))
        };
        let dims = net.cpt_dims(n);
        let mut data = String::new();
        nested(&n.cpt_data, &dims, &mut data);
        let _ = write!(out, "\npotential ( {header} )\n{{\n    data = {data};\n}}\n");
    }
    out
}
