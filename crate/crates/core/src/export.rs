//! Netlist interchange: a lossless JSON form and a structural HDL dump.
//!
//! The JSON form is the canonical serialization — importing an exported
//! netlist reproduces it exactly, including net numbering, so exports diff
//! cleanly across tool versions. The HDL form is a write-only convenience
//! for feeding external simulators: it instantiates only primitive gates
//! (muxes are decomposed) and is self-contained.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{
    CellRef, Gate, GateId, GateKind, NetDriver, NetId, Netlist, NetlistError, Port, PortDir, Role,
};

// ---------------------------------------------------------------------------
// JSON form
// ---------------------------------------------------------------------------

// Field order in these structs is the wire order; keep it fixed.

#[derive(Serialize, Deserialize)]
struct JsonNetlist {
    name: String,
    ports: Vec<JsonPort>,
    gates: Vec<JsonGate>,
    nets: u32,
}

#[derive(Serialize, Deserialize)]
struct JsonPort {
    name: String,
    dir: String,
    width: usize,
    /// Net ids of the port bits, least significant first. Carrying the
    /// actual nets (not just the width) is what makes the round trip
    /// lossless.
    bits: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct JsonGate {
    id: u32,
    kind: String,
    inputs: Vec<u32>,
    output: u32,
    cell: Option<(u16, u16, String)>,
}

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown gate kind `{0}`")]
    BadKind(String),
    #[error("unknown cell role `{0}`")]
    BadRole(String),
    #[error("unknown port direction `{0}` (expected `in` or `out`)")]
    BadDir(String),
    #[error("port `{0}`: width field says {1} but {2} bits are listed")]
    WidthMismatch(String, usize, usize),
    #[error("gate ids must be dense and in order (gate at position {0} has id {1})")]
    NonDenseGateIds(usize, u32),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

/// Serialize to the JSON interchange form (pretty-printed, stable order).
pub fn export_netlist_json(m: &Netlist) -> String {
    let doc = JsonNetlist {
        name: m.name().to_string(),
        ports: m
            .ports()
            .iter()
            .map(|p| JsonPort {
                name: p.name.clone(),
                dir: match p.dir {
                    PortDir::Input => "in".to_string(),
                    PortDir::Output => "out".to_string(),
                },
                width: p.width(),
                bits: p.bits.iter().map(|n| n.0).collect(),
            })
            .collect(),
        gates: m
            .gates()
            .iter()
            .enumerate()
            .map(|(gi, g)| JsonGate {
                id: gi as u32,
                kind: g.kind.as_str().to_string(),
                inputs: g.inputs.iter().map(|n| n.0).collect(),
                output: g.output.0,
                cell: g.cell.map(|c| (c.row, c.col, c.role.as_str().to_string())),
            })
            .collect(),
        nets: m.num_nets(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("netlist serialization cannot fail");
    s.push('\n');
    s
}

/// Parse and fully validate the JSON interchange form.
pub fn import_netlist_json(text: &str) -> Result<Netlist, ImportError> {
    let doc: JsonNetlist = serde_json::from_str(text)?;
    let ports = doc
        .ports
        .into_iter()
        .map(|p| {
            let dir = match p.dir.as_str() {
                "in" => PortDir::Input,
                "out" => PortDir::Output,
                other => return Err(ImportError::BadDir(other.to_string())),
            };
            if p.width != p.bits.len() {
                return Err(ImportError::WidthMismatch(p.name, p.width, p.bits.len()));
            }
            Ok(Port { name: p.name, dir, bits: p.bits.into_iter().map(NetId).collect() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let gates = doc
        .gates
        .into_iter()
        .enumerate()
        .map(|(pos, g)| {
            if g.id as usize != pos {
                return Err(ImportError::NonDenseGateIds(pos, g.id));
            }
            let kind = GateKind::parse(&g.kind).ok_or_else(|| ImportError::BadKind(g.kind.clone()))?;
            let cell = g
                .cell
                .map(|(row, col, role)| {
                    Role::parse(&role)
                        .map(|role| CellRef { row, col, role })
                        .ok_or(ImportError::BadRole(role))
                })
                .transpose()?;
            Ok(Gate { kind, inputs: g.inputs.into_iter().map(NetId).collect(), output: NetId(g.output), cell })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Netlist::assemble(doc.name, ports, gates, doc.nets)?)
}

// ---------------------------------------------------------------------------
// Structural HDL form
// ---------------------------------------------------------------------------

fn hdl_primitive(kind: GateKind) -> &'static str {
    match kind {
        GateKind::And2 => "and",
        GateKind::Or2 => "or",
        GateKind::Nand2 => "nand",
        GateKind::Nor2 => "nor",
        GateKind::Xor2 => "xor",
        GateKind::Not => "not",
        GateKind::Buf => "buf",
        GateKind::Mux2 | GateKind::Const0 | GateKind::Const1 => unreachable!("emitted specially"),
    }
}

/// Emit self-contained structural HDL: one module, primitive gate instances
/// only. Each mux becomes a not/and/and/or cluster; constants become
/// buffered literals.
pub fn export_netlist_hdl(m: &Netlist) -> String {
    use std::fmt::Write as _;

    // Canonical text for each net: a port bit expression where one exists,
    // an internal wire name otherwise.
    let mut expr: Vec<Option<String>> = vec![None; m.num_nets() as usize];
    let mut aliases: Vec<(String, NetId)> = Vec::new(); // extra output bindings
    for p in m.ports() {
        for (bi, &net) in p.bits.iter().enumerate() {
            let bit_expr =
                if p.width() == 1 { p.name.clone() } else { format!("{}[{}]", p.name, bi) };
            match &expr[net.0 as usize] {
                None => expr[net.0 as usize] = Some(bit_expr),
                // The net already has a canonical name (it feeds several
                // output ports); bind the extra port bit with an assign.
                Some(_) => aliases.push((bit_expr, net)),
            }
        }
    }
    let expr_of = |expr: &[Option<String>], n: NetId| -> String {
        expr[n.0 as usize].clone().unwrap_or_else(|| format!("n{}", n.0))
    };

    let mut s = String::new();
    let port_names: Vec<&str> = m.ports().iter().map(|p| p.name.as_str()).collect();
    let _ = writeln!(s, "// Structural netlist of {}. Generated; do not edit.", m.name());
    let _ = writeln!(s, "module {} ({});", m.name(), port_names.join(", "));
    for p in m.ports() {
        let dir = match p.dir {
            PortDir::Input => "input",
            PortDir::Output => "output",
        };
        if p.width() == 1 {
            let _ = writeln!(s, "  {} {};", dir, p.name);
        } else {
            let _ = writeln!(s, "  {} [{}:0] {};", dir, p.width() - 1, p.name);
        }
    }

    let mut wires: Vec<String> = Vec::new();
    for g in m.gates() {
        if expr[g.output.0 as usize].is_none() {
            wires.push(format!("n{}", g.output.0));
        }
    }
    for (gi, g) in m.gates().iter().enumerate() {
        if g.kind == GateKind::Mux2 {
            wires.push(format!("g{gi}_ns"));
            wires.push(format!("g{gi}_a"));
            wires.push(format!("g{gi}_b"));
        }
    }
    for w in &wires {
        let _ = writeln!(s, "  wire {w};");
    }

    for (gi, g) in m.gates().iter().enumerate() {
        let out = expr_of(&expr, g.output);
        match g.kind {
            GateKind::Const0 => {
                let _ = writeln!(s, "  buf g{gi} ({out}, 1'b0);");
            }
            GateKind::Const1 => {
                let _ = writeln!(s, "  buf g{gi} ({out}, 1'b1);");
            }
            GateKind::Mux2 => {
                let sel = expr_of(&expr, g.inputs[0]);
                let in0 = expr_of(&expr, g.inputs[1]);
                let in1 = expr_of(&expr, g.inputs[2]);
                let _ = writeln!(s, "  not g{gi}_n (g{gi}_ns, {sel});");
                let _ = writeln!(s, "  and g{gi}_f0 (g{gi}_a, g{gi}_ns, {in0});");
                let _ = writeln!(s, "  and g{gi}_f1 (g{gi}_b, {sel}, {in1});");
                let _ = writeln!(s, "  or g{gi} ({out}, g{gi}_a, g{gi}_b);");
            }
            _ => {
                let ins: Vec<String> = g.inputs.iter().map(|&n| expr_of(&expr, n)).collect();
                let _ = writeln!(s, "  {} g{gi} ({out}, {});", hdl_primitive(g.kind), ins.join(", "));
            }
        }
    }
    for (bit_expr, net) in &aliases {
        let _ = writeln!(s, "  assign {bit_expr} = {};", expr_of(&expr, *net));
    }
    s.push_str("endmodule\n");
    s
}

/// Count gate instantiations in an HDL dump (one per primitive instance).
pub fn hdl_instance_count(hdl: &str) -> usize {
    hdl.lines()
        .filter(|l| {
            let t = l.trim_start();
            ["and ", "or ", "nand ", "nor ", "xor ", "not ", "buf "]
                .iter()
                .any(|p| t.starts_with(p))
        })
        .count()
}

/// Resolve which gate drives each output-port bit — a consistency helper
/// used by tests and the command-line summary.
pub fn output_driver_gates(m: &Netlist) -> Vec<GateId> {
    m.output_bits()
        .iter()
        .filter_map(|&(_, _, net)| match m.driver(net) {
            NetDriver::Gate(g) => Some(g),
            NetDriver::PortBit { .. } => None,
        })
        .collect()
}
