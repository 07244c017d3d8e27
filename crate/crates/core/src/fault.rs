//! Single stuck-at fault enumeration, equivalence collapsing, and structural
//! redundancy analysis.
//!
//! The fault universe is pin-accurate: two faults (stuck-at-0/1) per gate
//! input pin, two per gate output, and two per primary port bit. A fault on a
//! gate input affects only that pin (a branch fault); a fault on a gate
//! output or an input-port bit affects everything the net feeds (a stem
//! fault); a fault on an output-port bit corrupts only what is observed at
//! that port. Collapsing merges only provably equivalent faults — classes
//! whose members produce identical faulty functions — never dominators, so
//! coverage percentages stay exact.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::netlist::{GateId, GateKind, NetDriver, Netlist, PortDir, Role};

/// Which part of the design the fault universe covers.
///
/// `Core` is the multiplier (or adder) proper: it excludes the border-mux
/// gates and the `test_mode` port that the test-mode rewiring adds, because
/// coverage claims are stated over the functional array, not the test
/// hardware. On circuits without test hardware the scopes coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultScope {
    Core,
    All,
}

impl FaultScope {
    pub fn as_str(self) -> &'static str {
        match self {
            FaultScope::Core => "core",
            FaultScope::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<FaultScope> {
        match s {
            "core" => Some(FaultScope::Core),
            "all" => Some(FaultScope::All),
            _ => None,
        }
    }
}

/// Location of a stuck-at fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaultSite {
    /// One input pin of a gate (branch fault).
    GateIn { gate: GateId, pin: u8 },
    /// A gate's output net (stem fault).
    GateOut { gate: GateId },
    /// A primary port bit: stem fault on input ports, observation-only
    /// override on output ports. Indices refer to the netlist's port list.
    PortBit { port: u32, bit: u32 },
}

/// A single stuck-at fault: `stuck` is the value the site is pinned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fault {
    pub site: FaultSite,
    pub stuck: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot parse fault `{0}`: {1}")]
pub struct FaultParseError(String, String);

impl Fault {
    /// Render as the textual form used in reports and on the command line:
    /// `gate:<id>:in<pin>:sa<b>`, `gate:<id>:out:sa<b>`, or
    /// `port:<name>:<bit>:sa<b>`.
    pub fn display(&self, m: &Netlist) -> String {
        let mut s = self.site_display(m);
        let _ = write!(s, ":sa{}", self.stuck as u8);
        s
    }

    /// The site part of [`Fault::display`] (no polarity).
    pub fn site_display(&self, m: &Netlist) -> String {
        match self.site {
            FaultSite::GateIn { gate, pin } => format!("gate:{}:in{}", gate.0, pin),
            FaultSite::GateOut { gate } => format!("gate:{}:out", gate.0),
            FaultSite::PortBit { port, bit } => {
                format!("port:{}:{}", m.ports()[port as usize].name, bit)
            }
        }
    }

    /// Parse the textual form, validating every index against the netlist.
    pub fn parse(s: &str, m: &Netlist) -> Result<Fault, FaultParseError> {
        let err = |why: &str| FaultParseError(s.to_string(), why.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(err("expected 4 colon-separated fields"));
        }
        let stuck = match parts[3] {
            "sa0" => false,
            "sa1" => true,
            _ => return Err(err("polarity must be sa0 or sa1")),
        };
        let site = match parts[0] {
            "gate" => {
                let id: u32 = parts[1].parse().map_err(|_| err("bad gate id"))?;
                if id as usize >= m.gates().len() {
                    return Err(err("gate id out of range"));
                }
                if parts[2] == "out" {
                    FaultSite::GateOut { gate: GateId(id) }
                } else {
                    let pin: u8 = parts[2]
                        .strip_prefix("in")
                        .and_then(|p| p.parse().ok())
                        .ok_or_else(|| err("pin must be `out` or `in<k>`"))?;
                    if pin as usize >= m.gate(GateId(id)).kind.arity() {
                        return Err(err("pin index exceeds gate arity"));
                    }
                    FaultSite::GateIn { gate: GateId(id), pin }
                }
            }
            "port" => {
                let pi = m.port_index(parts[1]).ok_or_else(|| err("unknown port"))?;
                let bit: u32 = parts[2].parse().map_err(|_| err("bad bit index"))?;
                if bit as usize >= m.ports()[pi].width() {
                    return Err(err("bit index exceeds port width"));
                }
                FaultSite::PortBit { port: pi as u32, bit }
            }
            _ => return Err(err("site must start with `gate` or `port`")),
        };
        Ok(Fault { site, stuck })
    }

    /// Whether the site belongs to the test hardware (border muxes or the
    /// `test_mode` port) rather than the functional array.
    pub fn is_dft_site(&self, m: &Netlist) -> bool {
        match self.site {
            FaultSite::GateIn { gate, .. } | FaultSite::GateOut { gate } => {
                m.gate(gate).cell.is_some_and(|c| c.role == Role::BorderMux)
            }
            FaultSite::PortBit { port, .. } => m.ports()[port as usize].name == "test_mode",
        }
    }
}

/// One equivalence class of faults. `members` index into the owning list's
/// uncollapsed universe; the representative is the class's smallest fault
/// under site ordering.
#[derive(Debug, Clone)]
pub struct FaultClass {
    pub representative: Fault,
    pub members: Vec<u32>,
}

/// A fault universe, optionally collapsed into equivalence classes.
///
/// Enumeration produces one singleton class per fault; collapsing regroups
/// the same universe. Class order is deterministic (sorted by
/// representative), as is the universe itself (enumeration order).
#[derive(Debug, Clone)]
pub struct FaultList {
    scope: FaultScope,
    faults: Vec<Fault>,
    index: HashMap<Fault, u32>,
    classes: Vec<FaultClass>,
    class_of: Vec<u32>,
    redundant: Vec<bool>,
    collapsed: bool,
}

impl FaultList {
    fn from_universe(scope: FaultScope, faults: Vec<Fault>, collapsed: bool, groups: Vec<Vec<u32>>) -> FaultList {
        let index: HashMap<Fault, u32> =
            faults.iter().enumerate().map(|(i, &f)| (f, i as u32)).collect();
        let mut classes: Vec<FaultClass> = groups
            .into_iter()
            .map(|members| {
                let representative =
                    members.iter().map(|&i| faults[i as usize]).min().expect("non-empty class");
                FaultClass { representative, members }
            })
            .collect();
        classes.sort_by_key(|c| c.representative);
        let mut class_of = vec![0u32; faults.len()];
        for (ci, c) in classes.iter().enumerate() {
            for &m in &c.members {
                class_of[m as usize] = ci as u32;
            }
        }
        let redundant = vec![false; classes.len()];
        FaultList { scope, faults, index, classes, class_of, redundant, collapsed }
    }

    pub fn scope(&self) -> FaultScope {
        self.scope
    }

    /// The uncollapsed universe, in enumeration order. Positions in this
    /// slice are the `fault_id`s used by the CSV export.
    pub fn faults(&self) -> &[Fault] {
        &self.faults
    }

    pub fn classes(&self) -> &[FaultClass] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn is_collapsed(&self) -> bool {
        self.collapsed
    }

    /// Universe index of a fault, if it belongs to this list.
    pub fn fault_id(&self, f: &Fault) -> Option<u32> {
        self.index.get(f).copied()
    }

    /// Class index a fault belongs to.
    pub fn class_of(&self, f: &Fault) -> Option<usize> {
        self.fault_id(f).map(|i| self.class_of[i as usize] as usize)
    }

    pub fn is_redundant(&self, class: usize) -> bool {
        self.redundant[class]
    }

    pub fn redundant_count(&self) -> usize {
        self.redundant.iter().filter(|&&r| r).count()
    }

    /// Representatives of classes flagged redundant, in class order.
    pub fn redundant_representatives(&self) -> Vec<Fault> {
        self.classes
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.redundant[i])
            .map(|(_, c)| c.representative)
            .collect()
    }
}

/// Enumerate the stuck-at universe of a netlist.
///
/// Order: per gate (ascending id) each input pin then the output, stuck-at-0
/// before stuck-at-1; then every port bit in port order. With
/// [`FaultScope::Core`], border-mux gates and the `test_mode` port are
/// skipped entirely.
pub fn enumerate_faults(m: &Netlist, scope: FaultScope) -> FaultList {
    let mut faults = Vec::new();
    for (gi, g) in m.gates().iter().enumerate() {
        if scope == FaultScope::Core && g.cell.is_some_and(|c| c.role == Role::BorderMux) {
            continue;
        }
        let gate = GateId(gi as u32);
        for pin in 0..g.kind.arity() as u8 {
            for stuck in [false, true] {
                faults.push(Fault { site: FaultSite::GateIn { gate, pin }, stuck });
            }
        }
        for stuck in [false, true] {
            faults.push(Fault { site: FaultSite::GateOut { gate }, stuck });
        }
    }
    for (pi, p) in m.ports().iter().enumerate() {
        if scope == FaultScope::Core && p.name == "test_mode" {
            continue;
        }
        for bit in 0..p.width() as u32 {
            for stuck in [false, true] {
                faults.push(Fault { site: FaultSite::PortBit { port: pi as u32, bit }, stuck });
            }
        }
    }
    let groups = (0..faults.len() as u32).map(|i| vec![i]).collect();
    FaultList::from_universe(scope, faults, false, groups)
}

/// Observer of a net: a reading gate pin, or an output-port bit.
enum Observer {
    Pin(GateId, u8),
    OutBit(u32, u32),
}

/// Collapse a fault universe into structural equivalence classes.
///
/// Two rules, both exact equivalences:
///
/// * Controlling-value merges at a gate: an AND input stuck at 0 is
///   indistinguishable from the output stuck at 0 (dually OR/SA1; inverted
///   for NAND/NOR; both polarities for NOT/BUF). XOR and MUX have no
///   controlling value and contribute nothing.
/// * Fanout-free stem/branch merges: when a net has exactly one observer
///   (one reading pin, or one output-port bit), a fault on the driver side
///   and the same-polarity fault on the observer side see identical logic.
///
/// Merges only apply when both endpoints are inside the list's scope.
pub fn collapse_equivalent(m: &Netlist, fl: &FaultList) -> FaultList {
    let n = fl.faults().len();
    let mut parent: Vec<u32> = (0..n as u32).collect();

    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            let gp = parent[parent[x as usize] as usize];
            parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    let union = |parent: &mut Vec<u32>, a: Fault, b: Fault| {
        if let (Some(ia), Some(ib)) = (fl.fault_id(&a), fl.fault_id(&b)) {
            let (ra, rb) = (find(parent, ia), find(parent, ib));
            if ra != rb {
                // Attach so the root is the smaller fault; keeps the
                // eventual representative the class minimum.
                if fl.faults()[ra as usize] <= fl.faults()[rb as usize] {
                    parent[rb as usize] = ra;
                } else {
                    parent[ra as usize] = rb;
                }
            }
        }
    };

    let f_in = |gate: GateId, pin: u8, stuck: bool| Fault {
        site: FaultSite::GateIn { gate, pin },
        stuck,
    };
    let f_out = |gate: GateId, stuck: bool| Fault { site: FaultSite::GateOut { gate }, stuck };

    for (gi, g) in m.gates().iter().enumerate() {
        let gate = GateId(gi as u32);
        for pin in 0..g.kind.arity() as u8 {
            match g.kind {
                GateKind::And2 => union(&mut parent, f_in(gate, pin, false), f_out(gate, false)),
                GateKind::Or2 => union(&mut parent, f_in(gate, pin, true), f_out(gate, true)),
                GateKind::Nand2 => union(&mut parent, f_in(gate, pin, false), f_out(gate, true)),
                GateKind::Nor2 => union(&mut parent, f_in(gate, pin, true), f_out(gate, false)),
                GateKind::Not => {
                    union(&mut parent, f_in(gate, pin, false), f_out(gate, true));
                    union(&mut parent, f_in(gate, pin, true), f_out(gate, false));
                }
                GateKind::Buf => {
                    union(&mut parent, f_in(gate, pin, false), f_out(gate, false));
                    union(&mut parent, f_in(gate, pin, true), f_out(gate, true));
                }
                GateKind::Xor2 | GateKind::Mux2 | GateKind::Const0 | GateKind::Const1 => {}
            }
        }
    }

    // Stem/branch merging on fanout-free nets.
    let mut observers: Vec<Vec<Observer>> = (0..m.num_nets()).map(|_| Vec::new()).collect();
    for (gi, g) in m.gates().iter().enumerate() {
        for (pin, net) in g.inputs.iter().enumerate() {
            observers[net.0 as usize].push(Observer::Pin(GateId(gi as u32), pin as u8));
        }
    }
    for (pi, p) in m.ports().iter().enumerate() {
        if p.dir == PortDir::Output {
            for (bi, net) in p.bits.iter().enumerate() {
                observers[net.0 as usize].push(Observer::OutBit(pi as u32, bi as u32));
            }
        }
    }
    for net in 0..m.num_nets() {
        if let [obs] = observers[net as usize].as_slice() {
            let stem_site = match m.driver(crate::netlist::NetId(net)) {
                NetDriver::Gate(g) => FaultSite::GateOut { gate: g },
                NetDriver::PortBit { port, bit } => FaultSite::PortBit { port, bit },
            };
            let branch_site = match *obs {
                Observer::Pin(g, pin) => FaultSite::GateIn { gate: g, pin },
                Observer::OutBit(port, bit) => FaultSite::PortBit { port, bit },
            };
            for stuck in [false, true] {
                union(
                    &mut parent,
                    Fault { site: stem_site, stuck },
                    Fault { site: branch_site, stuck },
                );
            }
        }
    }

    let mut groups_by_root: HashMap<u32, Vec<u32>> = HashMap::new();
    for i in 0..n as u32 {
        let r = find(&mut parent, i);
        groups_by_root.entry(r).or_default().push(i);
    }
    let groups: Vec<Vec<u32>> = groups_by_root.into_values().collect();
    FaultList::from_universe(fl.scope(), fl.faults().to_vec(), true, groups)
}

/// Per-net reachability of a primary output under test mode.
///
/// In test mode the border muxes select their loopback input, so their
/// functional input (pin 1) is a cut edge: nothing propagates through it.
/// Returns `alive[net] = true` iff some path from the net, avoiding cut
/// edges, reaches an output port. On netlists without muxes this is plain
/// output reachability.
fn test_mode_alive(m: &Netlist) -> Vec<bool> {
    let mut alive = vec![false; m.num_nets() as usize];
    let mut stack: Vec<u32> = Vec::new();
    for (_, _, net) in m.output_bits() {
        if !alive[net.0 as usize] {
            alive[net.0 as usize] = true;
            stack.push(net.0);
        }
    }
    while let Some(net) = stack.pop() {
        if let NetDriver::Gate(g) = m.driver(crate::netlist::NetId(net)) {
            let gate = m.gate(g);
            for (pin, inp) in gate.inputs.iter().enumerate() {
                if gate.kind == GateKind::Mux2 && pin == 1 {
                    continue; // functional input: deselected in test mode
                }
                if !alive[inp.0 as usize] {
                    alive[inp.0 as usize] = true;
                    stack.push(inp.0);
                }
            }
        }
    }
    alive
}

fn fault_is_dead(m: &Netlist, alive: &[bool], f: &Fault) -> bool {
    match f.site {
        FaultSite::GateOut { gate } => !alive[m.gate(gate).output.0 as usize],
        FaultSite::GateIn { gate, pin } => {
            let g = m.gate(gate);
            if g.kind == GateKind::Mux2 && pin == 1 {
                return true;
            }
            !alive[g.output.0 as usize]
        }
        FaultSite::PortBit { port, bit } => {
            let p = &m.ports()[port as usize];
            match p.dir {
                PortDir::Output => false,
                PortDir::Input => !alive[p.bits[bit as usize].0 as usize],
            }
        }
    }
}

/// Flag classes that test mode structurally disconnects from every output.
///
/// A class is redundant when all of its members sit on logic whose only path
/// to an output runs through a deselected mux input — chiefly the carry
/// network of the left-border cells, whose final carries feed nothing but
/// the muxed-away functional path. No test-mode vector can detect these, so
/// they are excluded from coverage denominators (and must be reported).
pub fn mark_test_mode_redundant(m: &Netlist, fl: &mut FaultList) {
    let alive = test_mode_alive(m);
    for ci in 0..fl.classes.len() {
        let dead = fl.classes[ci]
            .members
            .iter()
            .all(|&i| fault_is_dead(m, &alive, &fl.faults[i as usize]));
        fl.redundant[ci] = dead;
    }
}

/// Render the list as CSV: one row per uncollapsed fault with its class
/// representative, plus a `scope` column separating functional-array sites
/// from test-hardware sites.
pub fn export_fault_csv(m: &Netlist, fl: &FaultList) -> String {
    let mut out = String::from("fault_id,site,polarity,class_representative,scope\n");
    for (i, f) in fl.faults().iter().enumerate() {
        let class = &fl.classes[fl.class_of[i] as usize];
        let _ = writeln!(
            out,
            "{},{},sa{},{},{}",
            i,
            f.site_display(m),
            f.stuck as u8,
            class.representative.display(m),
            if f.is_dft_site(m) { "dft" } else { "core" },
        );
    }
    out
}
