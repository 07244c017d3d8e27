//! Gate-level netlist representation and circuit builders.
//!
//! A [`Netlist`] is a flat, immutable DAG of primitive gates over densely
//! numbered nets. Builders construct the two circuit families this crate is
//! about — ripple-carry adders and array multipliers — plus the mux-based
//! test-mode rewiring that makes the multiplier constant-testable. Every gate
//! that belongs to a regular array cell carries a `(row, col, role)` tag so
//! that test generation and per-cell probing can navigate the structure
//! without guessing at net names.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Practical upper bound on ripple-carry adder width.
pub const MAX_RCA_WIDTH: usize = 4096;
/// Practical upper bound on multiplier operand width (cells grow as n²).
pub const MAX_MULT_WIDTH: usize = 512;

// ---------------------------------------------------------------------------
// Identifiers and primitive kinds
// ---------------------------------------------------------------------------

/// Index of a net (a single-driver wire) within a netlist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetId(pub u32);

/// Index of a gate within a netlist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GateId(pub u32);

impl fmt::Display for NetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

/// Primitive gate kinds. `Mux2` reads inputs as `[select, in0, in1]` and
/// outputs `in1` when `select` is 1, `in0` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    And2,
    Or2,
    Nand2,
    Nor2,
    Xor2,
    Not,
    Buf,
    Mux2,
    Const0,
    Const1,
}

impl GateKind {
    /// Number of input pins.
    pub fn arity(self) -> usize {
        match self {
            GateKind::And2 | GateKind::Or2 | GateKind::Nand2 | GateKind::Nor2 | GateKind::Xor2 => 2,
            GateKind::Not | GateKind::Buf => 1,
            GateKind::Mux2 => 3,
            GateKind::Const0 | GateKind::Const1 => 0,
        }
    }

    /// Evaluate the gate bitwise across all 64 lanes of a machine word.
    #[inline]
    pub fn eval_word(self, v: &[u64]) -> u64 {
        match self {
            GateKind::And2 => v[0] & v[1],
            GateKind::Or2 => v[0] | v[1],
            GateKind::Nand2 => !(v[0] & v[1]),
            GateKind::Nor2 => !(v[0] | v[1]),
            GateKind::Xor2 => v[0] ^ v[1],
            GateKind::Not => !v[0],
            GateKind::Buf => v[0],
            GateKind::Mux2 => (!v[0] & v[1]) | (v[0] & v[2]),
            GateKind::Const0 => 0,
            GateKind::Const1 => !0,
        }
    }

    /// Canonical upper-case name used by the JSON interchange format.
    pub fn as_str(self) -> &'static str {
        match self {
            GateKind::And2 => "AND2",
            GateKind::Or2 => "OR2",
            GateKind::Nand2 => "NAND2",
            GateKind::Nor2 => "NOR2",
            GateKind::Xor2 => "XOR2",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUF",
            GateKind::Mux2 => "MUX2",
            GateKind::Const0 => "CONST0",
            GateKind::Const1 => "CONST1",
        }
    }

    /// Inverse of [`GateKind::as_str`].
    pub fn parse(s: &str) -> Option<GateKind> {
        Some(match s {
            "AND2" => GateKind::And2,
            "OR2" => GateKind::Or2,
            "NAND2" => GateKind::Nand2,
            "NOR2" => GateKind::Nor2,
            "XOR2" => GateKind::Xor2,
            "NOT" => GateKind::Not,
            "BUF" => GateKind::Buf,
            "MUX2" => GateKind::Mux2,
            "CONST0" => GateKind::Const0,
            "CONST1" => GateKind::Const1,
            _ => return None,
        })
    }
}

// ---------------------------------------------------------------------------
// Cell tags
// ---------------------------------------------------------------------------

/// Function a gate performs inside its array cell.
///
/// A multiplier cell is an AND gate (`And`, computing the partial product
/// X·Y) feeding a full adder; the adder itself is two cascaded XORs for the
/// sum and an AND/AND/OR majority network for the carry. `BorderMux` marks
/// the test-mode multiplexers inserted on the left border.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    And,
    Xor1,
    Xor2,
    CarryAndA,
    CarryAndB,
    CarryOr,
    BorderMux,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::And => "and",
            Role::Xor1 => "xor1",
            Role::Xor2 => "xor2",
            Role::CarryAndA => "carry-and-a",
            Role::CarryAndB => "carry-and-b",
            Role::CarryOr => "carry-or",
            Role::BorderMux => "border-mux",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Some(match s {
            "and" => Role::And,
            "xor1" => Role::Xor1,
            "xor2" => Role::Xor2,
            "carry-and-a" => Role::CarryAndA,
            "carry-and-b" => Role::CarryAndB,
            "carry-or" => Role::CarryOr,
            "border-mux" => Role::BorderMux,
            _ => return None,
        })
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grid position and role of a gate inside a regular array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellRef {
    pub row: u16,
    pub col: u16,
    pub role: Role,
}

impl CellRef {
    pub fn new(row: usize, col: usize, role: Role) -> CellRef {
        CellRef { row: row as u16, col: col as u16, role }
    }
}

// ---------------------------------------------------------------------------
// Ports, gates, netlist
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortDir {
    Input,
    Output,
}

/// Named bundle of net bits. Bit 0 is the least significant.
#[derive(Debug, Clone)]
pub struct Port {
    pub name: String,
    pub dir: PortDir,
    pub bits: Vec<NetId>,
}

impl Port {
    pub fn width(&self) -> usize {
        self.bits.len()
    }
}

#[derive(Debug, Clone)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<NetId>,
    pub output: NetId,
    pub cell: Option<CellRef>,
}

/// What drives a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetDriver {
    /// Bit `bit` of input port `port` (indices into the ports vector).
    PortBit { port: u32, bit: u32 },
    Gate(GateId),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetlistError {
    #[error("port width must be at least 1")]
    ZeroWidth,
    #[error("pair-tiling requires even width (got n = {0})")]
    OddWidth(usize),
    #[error("width {0} exceeds the supported maximum {1}")]
    WidthTooLarge(usize, usize),
    #[error("width {0} is below the minimum {1} for this circuit")]
    WidthTooSmall(usize, usize),
    #[error("duplicate port name `{0}`")]
    DuplicatePort(String),
    #[error("net {0} referenced but only {1} nets declared")]
    UnknownNet(u32, u32),
    #[error("net {0} has more than one driver")]
    MultipleDrivers(u32),
    #[error("net {0} has no driver")]
    UndrivenNet(u32),
    #[error("gate {0} ({1}) expects {2} inputs, got {3}")]
    BadArity(u32, &'static str, usize, usize),
    #[error("combinational cycle through gate {0}")]
    Cycle(u32),
    #[error("not an array multiplier: {0}")]
    NotArrayMult(String),
    #[error("netlist already has a test_mode port")]
    AlreadyTransformed,
}

/// Headline structural counts, as printed by the generator front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetlistStats {
    pub gates: usize,
    pub nets: usize,
    pub cells: usize,
    pub muxes: usize,
}

/// An immutable combinational netlist.
///
/// Construction always goes through [`NetlistBuilder`] or
/// [`Netlist::assemble`], which validate the single-driver property and
/// acyclicity and precompute the topological order plus net fan-out maps.
#[derive(Debug, Clone)]
pub struct Netlist {
    name: String,
    ports: Vec<Port>,
    gates: Vec<Gate>,
    num_nets: u32,
    topo: Vec<GateId>,
    topo_pos: Vec<u32>,
    drivers: Vec<NetDriver>,
    readers: Vec<Vec<(GateId, u8)>>,
}

impl Netlist {
    /// Validate raw parts and build the netlist with derived indices.
    pub fn assemble(
        name: String,
        ports: Vec<Port>,
        gates: Vec<Gate>,
        num_nets: u32,
    ) -> Result<Netlist, NetlistError> {
        // Port sanity.
        let mut seen = HashMap::new();
        for (pi, p) in ports.iter().enumerate() {
            if p.bits.is_empty() {
                return Err(NetlistError::ZeroWidth);
            }
            if seen.insert(p.name.clone(), pi).is_some() {
                return Err(NetlistError::DuplicatePort(p.name.clone()));
            }
        }

        let check_net = |n: NetId| {
            if n.0 >= num_nets {
                Err(NetlistError::UnknownNet(n.0, num_nets))
            } else {
                Ok(())
            }
        };

        // Single-driver property.
        let mut drivers: Vec<Option<NetDriver>> = vec![None; num_nets as usize];
        let mut claim = |net: NetId, d: NetDriver| -> Result<(), NetlistError> {
            let slot = &mut drivers[net.0 as usize];
            if slot.is_some() {
                return Err(NetlistError::MultipleDrivers(net.0));
            }
            *slot = Some(d);
            Ok(())
        };
        for (pi, p) in ports.iter().enumerate() {
            for (bi, &net) in p.bits.iter().enumerate() {
                check_net(net)?;
                if p.dir == PortDir::Input {
                    claim(net, NetDriver::PortBit { port: pi as u32, bit: bi as u32 })?;
                }
            }
        }
        for (gi, g) in gates.iter().enumerate() {
            if g.inputs.len() != g.kind.arity() {
                return Err(NetlistError::BadArity(
                    gi as u32,
                    g.kind.as_str(),
                    g.kind.arity(),
                    g.inputs.len(),
                ));
            }
            for &n in &g.inputs {
                check_net(n)?;
            }
            check_net(g.output)?;
            claim(g.output, NetDriver::Gate(GateId(gi as u32)))?;
        }
        let drivers: Vec<NetDriver> = drivers
            .into_iter()
            .enumerate()
            .map(|(n, d)| d.ok_or(NetlistError::UndrivenNet(n as u32)))
            .collect::<Result<_, _>>()?;

        // Fan-out map: which gate pins read each net.
        let mut readers: Vec<Vec<(GateId, u8)>> = vec![Vec::new(); num_nets as usize];
        for (gi, g) in gates.iter().enumerate() {
            for (pin, &n) in g.inputs.iter().enumerate() {
                readers[n.0 as usize].push((GateId(gi as u32), pin as u8));
            }
        }

        // Kahn's algorithm over the gate graph: an edge runs from the driver
        // gate of an input net to the reading gate.
        let mut indeg = vec![0u32; gates.len()];
        for (gi, g) in gates.iter().enumerate() {
            indeg[gi] = g
                .inputs
                .iter()
                .filter(|n| matches!(drivers[n.0 as usize], NetDriver::Gate(_)))
                .count() as u32;
        }
        let mut queue: Vec<GateId> = (0..gates.len())
            .filter(|&i| indeg[i] == 0)
            .map(|i| GateId(i as u32))
            .collect();
        let mut topo = Vec::with_capacity(gates.len());
        let mut head = 0;
        while head < queue.len() {
            let g = queue[head];
            head += 1;
            topo.push(g);
            for &(reader, _) in &readers[gates[g.0 as usize].output.0 as usize] {
                indeg[reader.0 as usize] -= 1;
                if indeg[reader.0 as usize] == 0 {
                    queue.push(reader);
                }
            }
        }
        if topo.len() != gates.len() {
            let stuck = indeg.iter().position(|&d| d > 0).unwrap_or(0);
            return Err(NetlistError::Cycle(stuck as u32));
        }
        let mut topo_pos = vec![0u32; gates.len()];
        for (pos, &g) in topo.iter().enumerate() {
            topo_pos[g.0 as usize] = pos as u32;
        }

        Ok(Netlist { name, ports, gates, num_nets, topo, topo_pos, drivers, readers })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ports(&self) -> &[Port] {
        &self.ports
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate(&self, id: GateId) -> &Gate {
        &self.gates[id.0 as usize]
    }

    pub fn num_nets(&self) -> u32 {
        self.num_nets
    }

    /// Gates in dependency order (inputs before readers).
    pub fn topo(&self) -> &[GateId] {
        &self.topo
    }

    /// Position of each gate in [`Netlist::topo`].
    pub fn topo_pos(&self, g: GateId) -> u32 {
        self.topo_pos[g.0 as usize]
    }

    pub fn driver(&self, n: NetId) -> NetDriver {
        self.drivers[n.0 as usize]
    }

    /// Gate pins reading a net.
    pub fn readers(&self, n: NetId) -> &[(GateId, u8)] {
        &self.readers[n.0 as usize]
    }

    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn port_index(&self, name: &str) -> Option<usize> {
        self.ports.iter().position(|p| p.name == name)
    }

    pub fn input_ports(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.dir == PortDir::Input)
    }

    pub fn output_ports(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.dir == PortDir::Output)
    }

    /// Flattened list of observable output bits: (port index, bit index, net).
    pub fn output_bits(&self) -> Vec<(u32, u32, NetId)> {
        let mut out = Vec::new();
        for (pi, p) in self.ports.iter().enumerate() {
            if p.dir == PortDir::Output {
                for (bi, &n) in p.bits.iter().enumerate() {
                    out.push((pi as u32, bi as u32, n));
                }
            }
        }
        out
    }

    pub fn stats(&self) -> NetlistStats {
        let mut cells = std::collections::HashSet::new();
        let mut muxes = 0;
        for g in &self.gates {
            if let Some(c) = g.cell {
                if c.role == Role::BorderMux {
                    muxes += 1;
                } else {
                    cells.insert((c.row, c.col));
                }
            }
        }
        NetlistStats {
            gates: self.gates.len(),
            nets: self.num_nets as usize,
            cells: cells.len(),
            muxes,
        }
    }

    /// Grid extent `(rows, cols)` over non-mux cell tags, if any gate is tagged.
    pub fn grid_dims(&self) -> Option<(usize, usize)> {
        let mut dims = None;
        for g in &self.gates {
            if let Some(c) = g.cell {
                if c.role != Role::BorderMux {
                    let (r, cl) = dims.unwrap_or((0, 0));
                    dims = Some((r.max(c.row as usize + 1), cl.max(c.col as usize + 1)));
                }
            }
        }
        dims
    }

    /// Gates tagged with a given grid position, keyed by role.
    pub fn cell_roles(&self, row: usize, col: usize) -> HashMap<Role, GateId> {
        let mut map = HashMap::new();
        for (gi, g) in self.gates.iter().enumerate() {
            if let Some(c) = g.cell {
                if c.row as usize == row && c.col as usize == col {
                    map.insert(c.role, GateId(gi as u32));
                }
            }
        }
        map
    }

    /// Key internal nets of the multiplier cell at `(row, col)`.
    pub fn mult_cell_nets(&self, row: usize, col: usize) -> Option<MultCellNets> {
        let roles = self.cell_roles(row, col);
        let and = self.gate(*roles.get(&Role::And)?);
        let xor1 = self.gate(*roles.get(&Role::Xor1)?);
        let xor2 = self.gate(*roles.get(&Role::Xor2)?);
        let or = self.gate(*roles.get(&Role::CarryOr)?);
        Some(MultCellNets {
            x: and.inputs[0],
            y: and.inputs[1],
            xy: and.output,
            pin: xor1.inputs[1],
            cin: xor2.inputs[1],
            pout: xor2.output,
            cout: or.output,
        })
    }

    /// Key internal nets of the adder cell at `(row, col)`.
    pub fn fa_cell_nets(&self, row: usize, col: usize) -> Option<FaCellNets> {
        let roles = self.cell_roles(row, col);
        let xor1 = self.gate(*roles.get(&Role::Xor1)?);
        let xor2 = self.gate(*roles.get(&Role::Xor2)?);
        let or = self.gate(*roles.get(&Role::CarryOr)?);
        Some(FaCellNets {
            a: xor1.inputs[0],
            b: xor1.inputs[1],
            cin: xor2.inputs[1],
            s: xor2.output,
            cout: or.output,
        })
    }
}

/// Internal nets of one multiplier cell, for probing under good simulation.
#[derive(Debug, Clone, Copy)]
pub struct MultCellNets {
    pub x: NetId,
    pub y: NetId,
    pub xy: NetId,
    pub cin: NetId,
    pub pin: NetId,
    pub pout: NetId,
    pub cout: NetId,
}

/// Internal nets of one adder cell.
#[derive(Debug, Clone, Copy)]
pub struct FaCellNets {
    pub a: NetId,
    pub b: NetId,
    pub cin: NetId,
    pub s: NetId,
    pub cout: NetId,
}

// ---------------------------------------------------------------------------
// Builder
// ---------------------------------------------------------------------------

/// Incremental netlist constructor. Net ids are handed out densely in
/// construction order, which keeps exports deterministic and diffs stable.
pub struct NetlistBuilder {
    name: String,
    ports: Vec<Port>,
    gates: Vec<Gate>,
    num_nets: u32,
}

impl NetlistBuilder {
    pub fn new(name: &str) -> NetlistBuilder {
        NetlistBuilder { name: name.to_string(), ports: Vec::new(), gates: Vec::new(), num_nets: 0 }
    }

    fn fresh_net(&mut self) -> NetId {
        let n = NetId(self.num_nets);
        self.num_nets += 1;
        n
    }

    /// Declare an input port and return its freshly allocated bit nets.
    pub fn input(&mut self, name: &str, width: usize) -> Vec<NetId> {
        let bits: Vec<NetId> = (0..width).map(|_| self.fresh_net()).collect();
        self.ports.push(Port { name: name.to_string(), dir: PortDir::Input, bits: bits.clone() });
        bits
    }

    /// Declare an output port over already-driven nets.
    pub fn output(&mut self, name: &str, bits: &[NetId]) {
        self.ports.push(Port { name: name.to_string(), dir: PortDir::Output, bits: bits.to_vec() });
    }

    /// Add a gate and return its output net.
    pub fn gate(&mut self, kind: GateKind, inputs: &[NetId], cell: Option<CellRef>) -> NetId {
        let output = self.fresh_net();
        self.gates.push(Gate { kind, inputs: inputs.to_vec(), output, cell });
        output
    }

    pub fn finish(self) -> Result<Netlist, NetlistError> {
        Netlist::assemble(self.name, self.ports, self.gates, self.num_nets)
    }
}

// ---------------------------------------------------------------------------
// Circuit builders
// ---------------------------------------------------------------------------

/// Emit one full-adder cell: sum = A⊕B⊕Cin via two cascaded XORs, carry =
/// AB ∨ (A⊕B)Cin via two ANDs and an OR (the majority function, sharing the
/// first XOR). Returns `(sum, cout)`.
fn emit_fa(
    b: &mut NetlistBuilder,
    a: NetId,
    bb: NetId,
    cin: NetId,
    row: usize,
    col: usize,
) -> (NetId, NetId) {
    let x1 = b.gate(GateKind::Xor2, &[a, bb], Some(CellRef::new(row, col, Role::Xor1)));
    let s = b.gate(GateKind::Xor2, &[x1, cin], Some(CellRef::new(row, col, Role::Xor2)));
    let ca = b.gate(GateKind::And2, &[a, bb], Some(CellRef::new(row, col, Role::CarryAndA)));
    let cb = b.gate(GateKind::And2, &[x1, cin], Some(CellRef::new(row, col, Role::CarryAndB)));
    let co = b.gate(GateKind::Or2, &[ca, cb], Some(CellRef::new(row, col, Role::CarryOr)));
    (s, co)
}

/// Emit one multiplier cell: partial product XY = X∧Y feeding the adder's
/// first operand; the column value Pin is the second operand. Returns
/// `(pout, cout)`.
fn emit_mult_cell(
    b: &mut NetlistBuilder,
    x: NetId,
    y: NetId,
    cin: NetId,
    pin: NetId,
    row: usize,
    col: usize,
) -> (NetId, NetId) {
    let xy = b.gate(GateKind::And2, &[x, y], Some(CellRef::new(row, col, Role::And)));
    emit_fa(b, xy, pin, cin, row, col)
}

/// Build an n-bit ripple-carry adder: `S + 2^n·Cout = A + B + Cin`.
///
/// Cell `(0, j)` is the adder for bit j; the carry ripples from cell 0 to
/// cell n−1.
pub fn build_rca(n: usize) -> Result<Netlist, NetlistError> {
    if n == 0 {
        return Err(NetlistError::WidthTooSmall(n, 1));
    }
    if n > MAX_RCA_WIDTH {
        return Err(NetlistError::WidthTooLarge(n, MAX_RCA_WIDTH));
    }
    let mut b = NetlistBuilder::new(&format!("rca{n}"));
    let a = b.input("A", n);
    let bb = b.input("B", n);
    let cin = b.input("Cin", 1);
    let mut carry = cin[0];
    let mut sum = Vec::with_capacity(n);
    for j in 0..n {
        let (s, co) = emit_fa(&mut b, a[j], bb[j], carry, 0, j);
        sum.push(s);
        carry = co;
    }
    b.output("S", &sum);
    b.output("Cout", &[carry]);
    b.finish()
}

/// Build an isolated multiplier cell (one AND plus one full adder) with all
/// four cell inputs and both cell outputs exposed as ports. Used for
/// cell-scale fault analysis.
pub fn build_mult_cell() -> Netlist {
    let mut b = NetlistBuilder::new("mult_cell");
    let x = b.input("X", 1);
    let y = b.input("Y", 1);
    let cin = b.input("Cin", 1);
    let pin = b.input("Pin", 1);
    let (pout, cout) = emit_mult_cell(&mut b, x[0], y[0], cin[0], pin[0], 0, 0);
    b.output("Pout", &[pout]);
    b.output("Cout", &[cout]);
    b.finish().expect("cell netlist is valid by construction")
}

/// Build an n×n array multiplier computing `OUT = X·Y + P_top + Cb` over
/// 2n output bits.
///
/// Cell `(i, j)` forms the partial product X[j]·Y[i] and adds it into the
/// running column value. Row carries ripple left to right within a row
/// (`Cin(i,0) = Cb[i]`); column values move diagonally, each cell passing its
/// Pout to the cell one row down and one column up (`Pin(i, j) =
/// Pout(i−1, j+1)`), with the left border fed by the previous row's final
/// carry (`Pin(i, n−1) = Cout(i−1, n−1)`) and the top row by `P_top`. The
/// product bits are the Pouts of column 0 (low half), the Pouts of the last
/// row (high half), and the final carry as the most significant bit.
///
/// `P_top` is an n-bit additive input (0 in plain multiplication); `Cb`
/// exposes each row's border carry-in as a test point (0 functionally). Both
/// are required so that test patterns can be justified to the array border.
/// Width must be even: the pair-tiled test patterns assume it.
pub fn build_array_mult(n: usize) -> Result<Netlist, NetlistError> {
    if n < 2 {
        return Err(NetlistError::WidthTooSmall(n, 2));
    }
    if n > MAX_MULT_WIDTH {
        return Err(NetlistError::WidthTooLarge(n, MAX_MULT_WIDTH));
    }
    if !n.is_multiple_of(2) {
        return Err(NetlistError::OddWidth(n));
    }
    let mut b = NetlistBuilder::new(&format!("mult{n}"));
    let x = b.input("X", n);
    let y = b.input("Y", n);
    let p_top = b.input("P_top", n);
    let cb = b.input("Cb", n);

    let mut pout_above: Vec<NetId> = p_top.clone();
    let mut final_carry_above = cb[0]; // placeholder; row 0 never reads it
    let mut out_low = Vec::with_capacity(n);
    for i in 0..n {
        let mut pout_row = Vec::with_capacity(n);
        let mut carry = cb[i];
        for j in 0..n {
            let pin = if i == 0 {
                pout_above[j]
            } else if j < n - 1 {
                pout_above[j + 1]
            } else {
                final_carry_above
            };
            let (po, co) = emit_mult_cell(&mut b, x[j], y[i], carry, pin, i, j);
            pout_row.push(po);
            carry = co;
        }
        final_carry_above = carry;
        out_low.push(pout_row[0]);
        pout_above = pout_row;
    }
    let mut out_bits = out_low;
    out_bits.extend_from_slice(&pout_above[1..]);
    out_bits.push(final_carry_above);
    b.output("OUT", &out_bits);
    b.finish()
}

/// Rewire an array multiplier for constant testability.
///
/// Adds a 1-bit `test_mode` input and, for every row i ≥ 1, interposes a mux
/// on the left-border column input: functionally (`test_mode=0`) the cell
/// still receives the previous row's final carry, while in test mode it
/// receives the previous row's column-0 Pout instead. That loopback threads
/// the n column chains into closed paths touching every row, which is what
/// lets a constant-size vector set drive every cell through every required
/// pattern. Exactly n−1 muxes are inserted; nothing else changes.
pub fn apply_dft_transform(m: &Netlist) -> Result<Netlist, NetlistError> {
    if m.port("test_mode").is_some() {
        return Err(NetlistError::AlreadyTransformed);
    }
    let (rows, cols) = m
        .grid_dims()
        .ok_or_else(|| NetlistError::NotArrayMult("no cell-tagged gates".into()))?;
    if rows != cols || rows < 2 {
        return Err(NetlistError::NotArrayMult(format!("grid is {rows}×{cols}, want square n×n")));
    }
    let n = rows;

    // Collect per-row border nets before touching anything.
    let mut rewires = Vec::with_capacity(n - 1);
    for i in 1..n {
        let prev = m.mult_cell_nets(i - 1, n - 1).ok_or_else(|| {
            NetlistError::NotArrayMult(format!("cell ({},{}) lacks multiplier roles", i - 1, n - 1))
        })?;
        let prev_left = m.mult_cell_nets(i - 1, 0).ok_or_else(|| {
            NetlistError::NotArrayMult(format!("cell ({},{}) lacks multiplier roles", i - 1, 0))
        })?;
        let here = m.mult_cell_nets(i, n - 1).ok_or_else(|| {
            NetlistError::NotArrayMult(format!("cell ({},{}) lacks multiplier roles", i, n - 1))
        })?;
        if here.pin != prev.cout {
            return Err(NetlistError::NotArrayMult(format!(
                "row {i} left-border column input is not the previous row's final carry"
            )));
        }
        // The functional source's readers inside row i (the cell's first-XOR
        // and first carry-AND) are the pins to redirect.
        let victims: Vec<(GateId, u8)> = m
            .readers(prev.cout)
            .iter()
            .copied()
            .filter(|&(g, _)| {
                m.gate(g).cell.is_some_and(|c| c.row as usize == i && c.role != Role::BorderMux)
            })
            .collect();
        rewires.push((i, prev.cout, prev_left.pout, victims));
    }

    let mut ports = m.ports.clone();
    let mut gates = m.gates.clone();
    let mut num_nets = m.num_nets;
    let tm_net = NetId(num_nets);
    num_nets += 1;
    ports.push(Port { name: "test_mode".to_string(), dir: PortDir::Input, bits: vec![tm_net] });

    for (i, functional, loopback, victims) in rewires {
        let mux_out = NetId(num_nets);
        num_nets += 1;
        gates.push(Gate {
            kind: GateKind::Mux2,
            inputs: vec![tm_net, functional, loopback],
            output: mux_out,
            cell: Some(CellRef::new(i, n - 1, Role::BorderMux)),
        });
        for (g, pin) in victims {
            gates[g.0 as usize].inputs[pin as usize] = mux_out;
        }
    }

    Netlist::assemble(format!("{}_dft", m.name), ports, gates, num_nets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_assigns_dense_net_ids() {
        let mut b = NetlistBuilder::new("t");
        let a = b.input("a", 2);
        let o = b.gate(GateKind::And2, &[a[0], a[1]], None);
        assert_eq!(a, vec![NetId(0), NetId(1)]);
        assert_eq!(o, NetId(2));
        b.output("o", &[o]);
        let n = b.finish().unwrap();
        assert_eq!(n.num_nets(), 3);
        assert_eq!(n.driver(o), NetDriver::Gate(GateId(0)));
        assert_eq!(n.readers(a[0]), &[(GateId(0), 0)]);
    }

    #[test]
    fn assemble_rejects_multiple_drivers() {
        let ports = vec![Port { name: "a".into(), dir: PortDir::Input, bits: vec![NetId(0)] }];
        let gates = vec![
            Gate { kind: GateKind::Buf, inputs: vec![NetId(0)], output: NetId(1), cell: None },
            Gate { kind: GateKind::Not, inputs: vec![NetId(0)], output: NetId(1), cell: None },
        ];
        let err = Netlist::assemble("t".into(), ports, gates, 2).unwrap_err();
        assert_eq!(err, NetlistError::MultipleDrivers(1));
    }

    #[test]
    fn assemble_rejects_cycles() {
        let ports = vec![
            Port { name: "a".into(), dir: PortDir::Input, bits: vec![NetId(0)] },
            Port { name: "o".into(), dir: PortDir::Output, bits: vec![NetId(1)] },
        ];
        let gates = vec![
            Gate { kind: GateKind::And2, inputs: vec![NetId(0), NetId(2)], output: NetId(1), cell: None },
            Gate { kind: GateKind::Buf, inputs: vec![NetId(1)], output: NetId(2), cell: None },
        ];
        assert!(matches!(
            Netlist::assemble("t".into(), ports, gates, 3),
            Err(NetlistError::Cycle(_))
        ));
    }

    #[test]
    fn assemble_rejects_undriven_and_unknown_nets() {
        let ports = vec![Port { name: "o".into(), dir: PortDir::Output, bits: vec![NetId(0)] }];
        assert_eq!(
            Netlist::assemble("t".into(), ports.clone(), vec![], 1).unwrap_err(),
            NetlistError::UndrivenNet(0)
        );
        let gates =
            vec![Gate { kind: GateKind::Buf, inputs: vec![NetId(5)], output: NetId(0), cell: None }];
        assert_eq!(
            Netlist::assemble("t".into(), ports, gates, 1).unwrap_err(),
            NetlistError::UnknownNet(5, 1)
        );
    }

    #[test]
    fn assemble_rejects_bad_arity() {
        let ports = vec![Port { name: "a".into(), dir: PortDir::Input, bits: vec![NetId(0)] }];
        let gates =
            vec![Gate { kind: GateKind::And2, inputs: vec![NetId(0)], output: NetId(1), cell: None }];
        assert!(matches!(
            Netlist::assemble("t".into(), ports, gates, 2),
            Err(NetlistError::BadArity(0, "AND2", 2, 1))
        ));
    }

    #[test]
    fn mux_semantics_select_low_passes_in0() {
        let v = [0u64, 0b10, 0b01];
        assert_eq!(GateKind::Mux2.eval_word(&v), 0b10);
        let v = [!0u64, 0b10, 0b01];
        assert_eq!(GateKind::Mux2.eval_word(&v), 0b01);
    }

    #[test]
    fn gate_kind_names_round_trip() {
        for k in [
            GateKind::And2,
            GateKind::Or2,
            GateKind::Nand2,
            GateKind::Nor2,
            GateKind::Xor2,
            GateKind::Not,
            GateKind::Buf,
            GateKind::Mux2,
            GateKind::Const0,
            GateKind::Const1,
        ] {
            assert_eq!(GateKind::parse(k.as_str()), Some(k));
        }
        assert_eq!(GateKind::parse("AND3"), None);
    }

    #[test]
    fn rca_structure() {
        let n = build_rca(4).unwrap();
        assert_eq!(n.gates().len(), 20);
        assert_eq!(n.stats().cells, 4);
        assert_eq!(n.grid_dims(), Some((1, 4)));
        let fa = n.fa_cell_nets(0, 0).unwrap();
        assert_eq!(fa.a, n.port("A").unwrap().bits[0]);
        assert_eq!(fa.cin, n.port("Cin").unwrap().bits[0]);
    }

    #[test]
    fn mult_width_validation() {
        assert_eq!(build_array_mult(3).unwrap_err(), NetlistError::OddWidth(3));
        assert_eq!(build_array_mult(1).unwrap_err(), NetlistError::WidthTooSmall(1, 2));
        assert!(build_array_mult(2).is_ok());
    }

    #[test]
    fn dft_rejects_non_multiplier_and_double_application() {
        let rca = build_rca(4).unwrap();
        assert!(matches!(apply_dft_transform(&rca), Err(NetlistError::NotArrayMult(_))));
        let m = build_array_mult(4).unwrap();
        let d = apply_dft_transform(&m).unwrap();
        assert_eq!(apply_dft_transform(&d).unwrap_err(), NetlistError::AlreadyTransformed);
    }

    #[test]
    fn dft_adds_one_mux_per_lower_row() {
        for n in [2usize, 4, 6] {
            let m = build_array_mult(n).unwrap();
            let d = apply_dft_transform(&m).unwrap();
            assert_eq!(d.stats().muxes, n - 1);
            assert_eq!(d.gates().len(), m.gates().len() + (n - 1));
            assert_eq!(d.port("test_mode").unwrap().width(), 1);
        }
    }
}
