//! RLCk netlist parsing and modified nodal analysis (MNA) assembly.
//!
//! Grammar, one element per line, first token case-insensitive:
//!
//! ```text
//! * comment
//! R<id> nodeA nodeB ohms
//! C<id> nodeA nodeB farads
//! L<id> nodeA nodeB henries      (current flows nodeA -> nodeB)
//! K<id> L<idA> L<idB> k          (|k| < 1)
//! P<id> port node [in|out|inout]
//! ```
//!
//! Node `0` is ground. Values accept SPICE scale suffixes (`f p n u m k meg g t`).

use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::linalg::Cholesky;
use nalgebra::DMatrix;

use crate::error::{MorError, Result};
use crate::linalg::{Factorization, Operator};
use crate::system::DescriptorSystem;

pub const GROUND: &str = "0";

/// Default shunt capacitance used by [`regularize`].
pub const DEFAULT_C_MIN: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortDirection {
    In,
    Out,
    InOut,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Resistor {
        name: String,
        node_a: String,
        node_b: String,
        ohms: f64,
    },
    Capacitor {
        name: String,
        node_a: String,
        node_b: String,
        farads: f64,
    },
    Inductor {
        branch_id: String,
        node_a: String,
        node_b: String,
        henries: f64,
    },
    MutualCoupling {
        name: String,
        branch_i: String,
        branch_j: String,
        k: f64,
    },
    Port {
        name: String,
        node: String,
        direction: PortDirection,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub elements: Vec<Element>,
    /// Non-ground nodes in first-appearance order.
    pub node_names: Vec<String>,
}

impl Netlist {
    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn inductors(&self) -> impl Iterator<Item = (&str, &str, &str, f64)> {
        self.elements.iter().filter_map(|e| match e {
            Element::Inductor {
                branch_id,
                node_a,
                node_b,
                henries,
            } => Some((branch_id.as_str(), node_a.as_str(), node_b.as_str(), *henries)),
            _ => None,
        })
    }

    pub fn ports(&self) -> impl Iterator<Item = (&str, &str)> {
        self.elements.iter().filter_map(|e| match e {
            Element::Port { name, node, .. } => Some((name.as_str(), node.as_str())),
            _ => None,
        })
    }

    pub fn count(&self, pred: impl Fn(&Element) -> bool) -> usize {
        self.elements.iter().filter(|e| pred(e)).count()
    }
}

fn syntax(line: usize, message: impl Into<String>) -> MorError {
    MorError::Syntax {
        line,
        message: message.into(),
    }
}

/// Parses a number with an optional SPICE scale suffix.
pub fn parse_value(tok: &str) -> Option<f64> {
    if let Ok(v) = tok.parse::<f64>() {
        return Some(v);
    }
    let lower = tok.to_ascii_lowercase();
    let split = lower.find(|c: char| c.is_ascii_alphabetic())?;
    let (num, suffix) = lower.split_at(split);
    let scale = if suffix.starts_with("meg") {
        1e6
    } else {
        match suffix.chars().next()? {
            'f' => 1e-15,
            'p' => 1e-12,
            'n' => 1e-9,
            'u' => 1e-6,
            'm' => 1e-3,
            'k' => 1e3,
            'g' => 1e9,
            't' => 1e12,
            _ => return None,
        }
    };
    num.parse::<f64>().ok().map(|v| v * scale)
}

/// Parses netlist text.
pub fn parse_netlist(text: &str) -> Result<Netlist> {
    let mut elements = Vec::new();
    let mut node_names: Vec<String> = Vec::new();
    let mut node_set: HashSet<String> = HashSet::new();
    let mut inductor_ids: HashSet<String> = HashSet::new();
    let mut port_names: HashSet<String> = HashSet::new();
    let mut pending_ports: Vec<(usize, String)> = Vec::new();
    let mut pending_couplings: Vec<(usize, String, String)> = Vec::new();

    let mut note_node = |name: &str, names: &mut Vec<String>| {
        if name != GROUND && node_set.insert(name.to_string()) {
            names.push(name.to_string());
        }
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        if line.eq_ignore_ascii_case(".end") {
            break;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let name = tokens[0];
        let kind = name
            .chars()
            .next()
            .map(|c| c.to_ascii_uppercase())
            .unwrap_or(' ');
        let value_at = |i: usize| -> Result<f64> {
            let tok = tokens[i];
            let v = parse_value(tok)
                .ok_or_else(|| syntax(line_no, format!("cannot parse value '{tok}'")))?;
            if !v.is_finite() {
                return Err(syntax(line_no, format!("non-finite value '{tok}'")));
            }
            Ok(v)
        };
        match kind {
            'R' | 'C' | 'L' => {
                if tokens.len() != 4 {
                    return Err(syntax(
                        line_no,
                        format!("{name}: expected '{name} nodeA nodeB value'"),
                    ));
                }
                let (a, b) = (tokens[1], tokens[2]);
                if a == b {
                    return Err(syntax(line_no, format!("{name}: both terminals on node '{a}'")));
                }
                let value = value_at(3)?;
                if value <= 0.0 {
                    return Err(syntax(
                        line_no,
                        format!("{name}: nonpositive value {value:e}"),
                    ));
                }
                note_node(a, &mut node_names);
                note_node(b, &mut node_names);
                let (node_a, node_b) = (a.to_string(), b.to_string());
                elements.push(match kind {
                    'R' => Element::Resistor {
                        name: name.to_string(),
                        node_a,
                        node_b,
                        ohms: value,
                    },
                    'C' => Element::Capacitor {
                        name: name.to_string(),
                        node_a,
                        node_b,
                        farads: value,
                    },
                    _ => {
                        if !inductor_ids.insert(name.to_ascii_uppercase()) {
                            return Err(syntax(line_no, format!("duplicate branch id '{name}'")));
                        }
                        Element::Inductor {
                            branch_id: name.to_string(),
                            node_a,
                            node_b,
                            henries: value,
                        }
                    }
                });
            }
            'K' => {
                if tokens.len() != 4 {
                    return Err(syntax(line_no, format!("{name}: expected '{name} Li Lj k'")));
                }
                let k = value_at(3)?;
                if k.abs() >= 1.0 {
                    return Err(syntax(line_no, format!("{name}: |k| = {} must be < 1", k.abs())));
                }
                if tokens[1].eq_ignore_ascii_case(tokens[2]) {
                    return Err(syntax(line_no, format!("{name}: couples {} to itself", tokens[1])));
                }
                pending_couplings.push((line_no, tokens[1].to_string(), tokens[2].to_string()));
                elements.push(Element::MutualCoupling {
                    name: name.to_string(),
                    branch_i: tokens[1].to_string(),
                    branch_j: tokens[2].to_string(),
                    k,
                });
            }
            'P' => {
                if !(3..=4).contains(&tokens.len()) || !tokens[1].eq_ignore_ascii_case("port") {
                    return Err(syntax(
                        line_no,
                        format!("{name}: expected '{name} port node [in|out|inout]'"),
                    ));
                }
                let direction = match tokens.get(3).map(|t| t.to_ascii_lowercase()) {
                    None => PortDirection::InOut,
                    Some(d) if d == "in" => PortDirection::In,
                    Some(d) if d == "out" => PortDirection::Out,
                    Some(d) if d == "inout" => PortDirection::InOut,
                    Some(d) => return Err(syntax(line_no, format!("unknown port direction '{d}'"))),
                };
                if !port_names.insert(name.to_ascii_uppercase()) {
                    return Err(syntax(line_no, format!("duplicate port '{name}'")));
                }
                pending_ports.push((line_no, tokens[2].to_string()));
                elements.push(Element::Port {
                    name: name.to_string(),
                    node: tokens[2].to_string(),
                    direction,
                });
            }
            _ => return Err(syntax(line_no, format!("unknown element '{name}'"))),
        }
    }

    for (line_no, li, lj) in pending_couplings {
        for id in [&li, &lj] {
            if !inductor_ids.contains(&id.to_ascii_uppercase()) {
                return Err(syntax(line_no, format!("reference to undeclared inductor '{id}'")));
            }
        }
    }
    for (line_no, node) in pending_ports {
        if node == GROUND {
            return Err(syntax(line_no, "port on ground node"));
        }
        if !node_names.iter().any(|n| *n == node) {
            return Err(syntax(line_no, format!("port on unknown node '{node}'")));
        }
    }

    Ok(Netlist {
        elements,
        node_names,
    })
}

/// Accumulates stamps so that the final sums are independent of stamp order.
#[derive(Default)]
struct Stamps(BTreeMap<(usize, usize), Vec<f64>>);

impl Stamps {
    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.0.entry((i, j)).or_default().push(v);
    }

    fn conductance(&mut self, a: Option<usize>, b: Option<usize>, v: f64) {
        if let Some(a) = a {
            self.add(a, a, v);
        }
        if let Some(b) = b {
            self.add(b, b, v);
        }
        if let (Some(a), Some(b)) = (a, b) {
            self.add(a, b, -v);
            self.add(b, a, -v);
        }
    }

    fn into_dense(self, rows: usize, cols: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(rows, cols);
        for ((i, j), mut vals) in self.0 {
            vals.sort_by(f64::total_cmp);
            m[(i, j)] = vals.iter().sum();
        }
        m
    }
}

/// Result of MNA assembly.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub system: DescriptorSystem,
    /// Branch ids in state order (state `n + k` is the current of branch k).
    pub branch_ids: Vec<String>,
    /// Nodes with no element path to ground.
    pub floating_nodes: Vec<String>,
}

/// Stamps the MNA matrices `G = -[[Gn, E], [-Eᵀ, 0]]`, `C = diag(Cn, M)`,
/// `B = [B1; 0]`, `L = B1ᵀ`.
pub fn assemble_mna(nl: &Netlist) -> Result<Assembly> {
    let n = nl.node_count();
    let index: HashMap<&str, usize> = nl
        .node_names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let node = |name: &str| -> Option<usize> { index.get(name).copied() };

    let branch_ids: Vec<String> = nl.inductors().map(|(id, ..)| id.to_string()).collect();
    let branch_index: HashMap<String, usize> = branch_ids
        .iter()
        .enumerate()
        .map(|(k, id)| (id.to_ascii_uppercase(), k))
        .collect();
    let m = branch_ids.len();
    let ports: Vec<(&str, &str)> = nl.ports().collect();
    let p = ports.len();
    if p == 0 {
        return Err(MorError::validation("netlist declares no ports"));
    }
    if n == 0 {
        return Err(MorError::validation("netlist has no non-ground nodes"));
    }
    let order = n + m;

    let mut gn = Stamps::default();
    let mut cn = Stamps::default();
    let mut incidence = Stamps::default();
    let mut inductance = Stamps::default();
    let mut self_l = vec![0.0; m];

    for e in &nl.elements {
        match e {
            Element::Resistor {
                node_a,
                node_b,
                ohms,
                ..
            } => gn.conductance(node(node_a), node(node_b), 1.0 / ohms),
            Element::Capacitor {
                node_a,
                node_b,
                farads,
                ..
            } => cn.conductance(node(node_a), node(node_b), *farads),
            Element::Inductor {
                branch_id,
                node_a,
                node_b,
                henries,
            } => {
                let k = branch_index[&branch_id.to_ascii_uppercase()];
                if let Some(a) = node(node_a) {
                    incidence.add(a, k, 1.0);
                }
                if let Some(b) = node(node_b) {
                    incidence.add(b, k, -1.0);
                }
                inductance.add(k, k, *henries);
                self_l[k] = *henries;
            }
            _ => {}
        }
    }
    for e in &nl.elements {
        if let Element::MutualCoupling {
            branch_i,
            branch_j,
            k,
            ..
        } = e
        {
            let i = branch_index[&branch_i.to_ascii_uppercase()];
            let j = branch_index[&branch_j.to_ascii_uppercase()];
            let mij = k * (self_l[i] * self_l[j]).sqrt();
            inductance.add(i, j, mij);
            inductance.add(j, i, mij);
        }
    }

    let gn = gn.into_dense(n, n);
    let cn = cn.into_dense(n, n);
    let e = incidence.into_dense(n, m);
    let mm = inductance.into_dense(m, m);

    if m > 0 && Cholesky::new(mm.clone()).is_none() {
        return Err(MorError::InductanceNotPositiveDefinite);
    }

    let mut g = DMatrix::zeros(order, order);
    g.view_mut((0, 0), (n, n)).copy_from(&(-&gn));
    g.view_mut((0, n), (n, m)).copy_from(&(-&e));
    g.view_mut((n, 0), (m, n)).copy_from(&e.transpose());
    let mut c = DMatrix::zeros(order, order);
    c.view_mut((0, 0), (n, n)).copy_from(&cn);
    c.view_mut((n, n), (m, m)).copy_from(&mm);

    let mut b = DMatrix::zeros(order, p);
    for (j, (_, pnode)) in ports.iter().enumerate() {
        b[(index[pnode], j)] = 1.0;
    }
    let l = b.transpose();
    let port_names = ports.iter().map(|(name, _)| name.to_string()).collect();

    let system = DescriptorSystem::from_matrices(g, c, b, l, n, m, port_names)?;
    Ok(Assembly {
        system,
        branch_ids,
        floating_nodes: floating_nodes(nl),
    })
}

/// Nodes with no path of any element to ground.
pub fn floating_nodes(nl: &Netlist) -> Vec<String> {
    let n = nl.node_count();
    let index: HashMap<&str, usize> = nl
        .node_names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    // Union-find with ground as element n.
    let mut parent: Vec<usize> = (0..=n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let id = |name: &str| index.get(name).copied().unwrap_or(n);
    for e in &nl.elements {
        let (a, b) = match e {
            Element::Resistor { node_a, node_b, .. }
            | Element::Capacitor { node_a, node_b, .. }
            | Element::Inductor { node_a, node_b, .. } => (id(node_a), id(node_b)),
            _ => continue,
        };
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let ground = find(&mut parent, n);
    (0..n)
        .filter(|&i| find(&mut parent, i) != ground)
        .map(|i| nl.node_names[i].clone())
        .collect()
}

/// Adds `c_min` to each diagonal entry of `Cn` whose row is entirely zero,
/// then checks that `C` is nonsingular.
pub fn regularize(sys: &DescriptorSystem, c_min: f64) -> Result<DescriptorSystem> {
    if !(c_min >= 0.0) || !c_min.is_finite() {
        return Err(MorError::validation(format!("c_min must be >= 0, got {c_min}")));
    }
    let mut out = sys.clone();
    for i in 0..sys.n {
        if sys.c.row(i).iter().all(|v| *v == 0.0) {
            out.c[(i, i)] += c_min;
        }
    }
    match Factorization::new(Operator::C, &out.c) {
        Ok(_) => Ok(out),
        Err(MorError::Singular { pivot, .. }) => Err(MorError::SingularCapacitance(format!(
            "smallest pivot {pivot:e} after adding c_min = {c_min:e}"
        ))),
        Err(e) => Err(e),
    }
}
