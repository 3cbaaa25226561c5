//! Boolean circuits over Z2: gate lenses, a small text format, compilation
//! of circuits to parametric lenses, and formal polynomial partials used as
//! an independent oracle for the compiled backward pass.
//!
//! Circuit text format, one statement per line, `#` starts a comment:
//!
//! ```text
//! param p0 p1
//! input x
//! t = AND(p0, x)
//! y = XOR(t, p1)
//! a, b = COPY(y)
//! output a b
//! ```
//!
//! Gates are `XOR`, `AND`, `NOT`, `COPY` (two outputs), `CONST0` and
//! `CONST1` (no arguments). Statements may appear in any order; wires may
//! feed several gates.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lens::{Interface, Lens};
use crate::para::{Init, ParamBlock, ParametricLens};
use crate::tensor::{Shape, Tensor, Z2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    Xor,
    And,
    Not,
    Copy,
    Const0,
    Const1,
}

impl Gate {
    pub const ALL: [Gate; 6] = [
        Gate::Xor,
        Gate::And,
        Gate::Not,
        Gate::Copy,
        Gate::Const0,
        Gate::Const1,
    ];

    pub fn arity(self) -> usize {
        match self {
            Gate::Xor | Gate::And => 2,
            Gate::Not | Gate::Copy => 1,
            Gate::Const0 | Gate::Const1 => 0,
        }
    }

    pub fn outputs(self) -> usize {
        if self == Gate::Copy {
            2
        } else {
            1
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Gate::Xor => "XOR",
            Gate::And => "AND",
            Gate::Not => "NOT",
            Gate::Copy => "COPY",
            Gate::Const0 => "CONST0",
            Gate::Const1 => "CONST1",
        }
    }
}

impl FromStr for Gate {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Gate::ALL
            .into_iter()
            .find(|g| g.keyword().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown gate `{s}`"))
    }
}

/// The lens `⟨g, R[g]⟩` of a single gate.
pub fn gate_lens(gate: Gate) -> Lens<Z2> {
    let b = |v: Vec<Z2>| Tensor::from_vec(v);
    match gate {
        Gate::Xor => Lens::add([1]).renamed("XOR"),
        Gate::And => Lens::new(
            "AND",
            Interface::symmetric([2]),
            Interface::symmetric([1]),
            move |xy| Ok(b(vec![xy.data()[0] * xy.data()[1]])),
            move |xy, d| {
                let (x, y, d) = (xy.data()[0], xy.data()[1], d.data()[0]);
                Ok(b(vec![y * d, x * d]))
            },
        ),
        Gate::Not => Lens::new(
            "NOT",
            Interface::symmetric([1]),
            Interface::symmetric([1]),
            move |x| Ok(b(vec![x.data()[0] + Z2::ONE])),
            |_, d| Ok(d.clone()),
        ),
        Gate::Copy => Lens::copy([1]).renamed("COPY"),
        Gate::Const0 | Gate::Const1 => {
            let v = if gate == Gate::Const1 {
                Z2::ONE
            } else {
                Z2::ZERO
            };
            Lens::new(
                gate.keyword(),
                Interface::unit(),
                Interface::symmetric([1]),
                move |_| Ok(b(vec![v])),
                |_, _| Ok(Tensor::unit()),
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateNode {
    pub outs: Vec<String>,
    pub gate: Gate,
    pub args: Vec<String>,
}

/// A parsed circuit. Variables are numbered parameters first, then inputs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub params: Vec<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub gates: Vec<GateNode>,
}

/// A circuit whose gates are in dependency order, with every wire numbered.
#[derive(Debug, Clone)]
struct Resolved {
    vars: usize,
    /// `(gate, argument wires)`; gate `i`'s outputs are numbered after all
    /// earlier wires.
    steps: Vec<(Gate, Vec<usize>)>,
    outputs: Vec<usize>,
}

fn syntax(line: usize, message: impl Into<String>) -> Error {
    Error::CircuitSyntax {
        line,
        message: message.into(),
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn names(line: usize, s: &str) -> Result<Vec<String>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(|w| {
            if is_ident(w) {
                Ok(w.to_string())
            } else {
                Err(syntax(line, format!("`{w}` is not a wire name")))
            }
        })
        .collect()
}

impl Circuit {
    pub fn parse(text: &str) -> Result<Circuit> {
        let mut c = Circuit::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stmt = raw.split('#').next().unwrap_or("").trim();
            if stmt.is_empty() {
                continue;
            }
            if let Some((lhs, rhs)) = stmt.split_once('=') {
                let outs = names(line, lhs)?;
                let rhs = rhs.trim();
                let (kw, rest) = rhs
                    .split_once('(')
                    .ok_or_else(|| syntax(line, "expected `KIND(args)`"))?;
                let args = rest
                    .trim()
                    .strip_suffix(')')
                    .ok_or_else(|| syntax(line, "missing `)`"))?;
                let gate: Gate = kw.trim().parse().map_err(|m| syntax(line, m))?;
                let args = names(line, args)?;
                if args.len() != gate.arity() {
                    return Err(syntax(
                        line,
                        format!(
                            "{} takes {} argument(s), got {}",
                            gate.keyword(),
                            gate.arity(),
                            args.len()
                        ),
                    ));
                }
                if outs.len() != gate.outputs() {
                    return Err(syntax(
                        line,
                        format!(
                            "{} has {} output(s), got {}",
                            gate.keyword(),
                            gate.outputs(),
                            outs.len()
                        ),
                    ));
                }
                c.gates.push(GateNode { outs, gate, args });
                continue;
            }
            let (kw, rest) = stmt.split_once(char::is_whitespace).unwrap_or((stmt, ""));
            let list = names(line, rest)?;
            match kw {
                "param" => c.params.extend(list),
                "input" => c.inputs.extend(list),
                "output" => c.outputs.extend(list),
                other => return Err(syntax(line, format!("unknown statement `{other}`"))),
            }
        }
        c.resolve()?;
        Ok(c)
    }

    pub fn num_vars(&self) -> usize {
        self.params.len() + self.inputs.len()
    }

    fn resolve(&self) -> Result<Resolved> {
        let mut wire: HashMap<&str, usize> = HashMap::new();
        let mut defined: HashMap<&str, usize> = HashMap::new();
        for (i, n) in self.params.iter().chain(&self.inputs).enumerate() {
            if wire.insert(n, i).is_some() {
                return Err(syntax(0, format!("wire `{n}` declared twice")));
            }
        }
        for (g, node) in self.gates.iter().enumerate() {
            for o in &node.outs {
                if wire.contains_key(o.as_str()) || defined.insert(o, g).is_some() {
                    return Err(syntax(0, format!("wire `{o}` defined twice")));
                }
            }
        }
        for node in &self.gates {
            for a in &node.args {
                if !wire.contains_key(a.as_str()) && !defined.contains_key(a.as_str()) {
                    return Err(Error::DanglingWire(a.clone()));
                }
            }
        }
        for o in &self.outputs {
            if !wire.contains_key(o.as_str()) && !defined.contains_key(o.as_str()) {
                return Err(Error::DanglingWire(o.clone()));
            }
        }

        let mut next = self.num_vars();
        let mut done = vec![false; self.gates.len()];
        let mut steps = Vec::with_capacity(self.gates.len());
        while steps.len() < self.gates.len() {
            let ready = (0..self.gates.len()).find(|&g| {
                !done[g]
                    && self.gates[g]
                        .args
                        .iter()
                        .all(|a| wire.contains_key(a.as_str()))
            });
            let Some(g) = ready else {
                let stuck = (0..self.gates.len())
                    .find(|&g| !done[g])
                    .expect("some gate remains");
                return Err(Error::CyclicCircuit(self.gates[stuck].outs[0].clone()));
            };
            let node = &self.gates[g];
            let args = node.args.iter().map(|a| wire[a.as_str()]).collect();
            for o in &node.outs {
                wire.insert(o, next);
                next += 1;
            }
            steps.push((node.gate, args));
            done[g] = true;
        }
        Ok(Resolved {
            vars: self.num_vars(),
            steps,
            outputs: self.outputs.iter().map(|o| wire[o.as_str()]).collect(),
        })
    }

    /// Compiles the circuit to a parametric lens `params ⊗ inputs → outputs`
    /// by composing gate lenses over a growing bundle of wires.
    pub fn build(&self) -> Result<ParametricLens<Z2>> {
        let r = self.resolve()?;
        let mut width = r.vars;
        let mut lens = Lens::identity(Interface::symmetric(Shape::vector(width)));
        for (gate, args) in &r.steps {
            let tap = Lens::select(width, args.clone())?.compose(&gate_lens(*gate))?;
            let step = Lens::copy([width])
                .compose(&Lens::identity(Interface::symmetric([width])).tensor(&tap))?;
            lens = lens.compose(&step)?;
            width += gate.outputs();
        }
        let lens = lens
            .compose(&Lens::select(width, r.outputs.clone())?)?
            .renamed("circuit");
        let np = self.params.len();
        let lens = ParametricLens::new(
            Interface::symmetric(Shape::vector(np)),
            Interface::symmetric(Shape::vector(self.inputs.len())),
            Interface::symmetric(Shape::vector(self.outputs.len())),
            lens,
        )?;
        if np == 0 {
            return Ok(lens);
        }
        lens.with_blocks(vec![ParamBlock::new("bits", [np], Init::RandomBits)])
    }

    /// Direct evaluation on a full assignment of variables.
    pub fn eval(&self, vars: &[Z2]) -> Result<Vec<Z2>> {
        let r = self.resolve()?;
        let mut w = vars.to_vec();
        if w.len() != r.vars {
            return Err(Error::shape(
                "circuit variables",
                &Shape::vector(r.vars),
                &Shape::vector(w.len()),
            ));
        }
        for (gate, args) in &r.steps {
            let a = |i: usize| w[args[i]];
            match gate {
                Gate::Xor => w.push(a(0) + a(1)),
                Gate::And => w.push(a(0) * a(1)),
                Gate::Not => w.push(a(0) + Z2::ONE),
                Gate::Copy => {
                    let v = a(0);
                    w.push(v);
                    w.push(v);
                }
                Gate::Const0 => w.push(Z2::ZERO),
                Gate::Const1 => w.push(Z2::ONE),
            }
        }
        Ok(r.outputs.iter().map(|&o| w[o]).collect())
    }

    /// Output polynomials in the variables (parameters first, then inputs).
    pub fn polynomials(&self) -> Result<Vec<PolyZ2>> {
        let r = self.resolve()?;
        let mut w: Vec<PolyZ2> = (0..r.vars).map(PolyZ2::var).collect();
        for (gate, args) in &r.steps {
            let a = |i: usize| w[args[i]].clone();
            match gate {
                Gate::Xor => w.push(&a(0) + &a(1)),
                Gate::And => w.push(&a(0) * &a(1)),
                Gate::Not => w.push(&a(0) + &PolyZ2::one()),
                Gate::Copy => {
                    let v = a(0);
                    w.push(v.clone());
                    w.push(v);
                }
                Gate::Const0 => w.push(PolyZ2::zero()),
                Gate::Const1 => w.push(PolyZ2::one()),
            }
        }
        Ok(r.outputs.iter().map(|&o| w[o].clone()).collect())
    }
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Circuit> {
        Circuit::parse(s)
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.params.is_empty() {
            writeln!(f, "param {}", self.params.join(" "))?;
        }
        if !self.inputs.is_empty() {
            writeln!(f, "input {}", self.inputs.join(" "))?;
        }
        for g in &self.gates {
            writeln!(
                f,
                "{} = {}({})",
                g.outs.join(", "),
                g.gate.keyword(),
                g.args.join(", ")
            )?;
        }
        write!(f, "output {}", self.outputs.join(" "))
    }
}

/// `∂f_j/∂x_i` for every output `j` and variable `i`, as formal polynomials.
pub fn symbolic_partials(circuit: &Circuit) -> Result<Vec<Vec<PolyZ2>>> {
    let n = circuit.num_vars();
    Ok(circuit
        .polynomials()?
        .iter()
        .map(|f| (0..n).map(|i| f.derivative(i)).collect())
        .collect())
}

/// Random well-formed circuit with `params + inputs` variables and `gates`
/// gates. Every output wire is a gate output or a variable.
pub fn random_circuit<R: Rng + ?Sized>(
    rng: &mut R,
    params: usize,
    inputs: usize,
    gates: usize,
    outputs: usize,
) -> Circuit {
    let mut c = Circuit {
        params: (0..params).map(|i| format!("p{i}")).collect(),
        inputs: (0..inputs).map(|i| format!("x{i}")).collect(),
        ..Circuit::default()
    };
    let mut wires: Vec<String> = c.params.iter().chain(&c.inputs).cloned().collect();
    for g in 0..gates {
        let gate = if wires.is_empty() {
            if rng.gen() {
                Gate::Const1
            } else {
                Gate::Const0
            }
        } else {
            // constants are rare so circuits stay interesting
            match rng.gen_range(0..10) {
                0..=2 => Gate::Xor,
                3..=5 => Gate::And,
                6 => Gate::Not,
                7 | 8 => Gate::Copy,
                _ => Gate::Const1,
            }
        };
        let args = (0..gate.arity())
            .map(|_| wires[rng.gen_range(0..wires.len())].clone())
            .collect();
        let outs: Vec<String> = (0..gate.outputs()).map(|k| format!("g{g}_{k}")).collect();
        wires.extend(outs.iter().cloned());
        c.gates.push(GateNode { outs, gate, args });
    }
    if !wires.is_empty() {
        // favour late wires so most gates influence an output
        for _ in 0..outputs {
            let lo = wires.len().saturating_sub(4);
            let i = if rng.gen_bool(0.75) {
                rng.gen_range(lo..wires.len())
            } else {
                rng.gen_range(0..wires.len())
            };
            c.outputs.push(wires[i].clone());
        }
    }
    c
}

/// Monomial: variable index to exponent. The empty map is the constant 1.
pub type Monomial = BTreeMap<usize, u32>;

/// Polynomial with Z2 coefficients, kept formally: `x·x` is `x²`, not `x`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PolyZ2 {
    terms: BTreeSet<Monomial>,
}

impl PolyZ2 {
    pub fn zero() -> Self {
        PolyZ2::default()
    }

    pub fn one() -> Self {
        PolyZ2 {
            terms: BTreeSet::from([Monomial::new()]),
        }
    }

    pub fn var(i: usize) -> Self {
        PolyZ2 {
            terms: BTreeSet::from([Monomial::from([(i, 1)])]),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &Monomial> {
        self.terms.iter()
    }

    fn toggle(&mut self, m: Monomial) {
        if !self.terms.remove(&m) {
            self.terms.insert(m);
        }
    }

    /// Formal partial derivative: `∂(x^e)/∂x = e·x^(e-1)`, reduced mod 2.
    pub fn derivative(&self, var: usize) -> PolyZ2 {
        let mut out = PolyZ2::zero();
        for m in &self.terms {
            match m.get(&var) {
                Some(&e) if e % 2 == 1 => {
                    let mut d = m.clone();
                    if e == 1 {
                        d.remove(&var);
                    } else {
                        d.insert(var, e - 1);
                    }
                    out.toggle(d);
                }
                _ => {}
            }
        }
        out
    }

    /// Replaces variable `i` by `polys[i]` in every monomial.
    pub fn substitute(&self, polys: &[PolyZ2]) -> PolyZ2 {
        let mut out = PolyZ2::zero();
        for m in &self.terms {
            let mut term = PolyZ2::one();
            for (&i, &e) in m {
                for _ in 0..e {
                    term = &term * &polys[i];
                }
            }
            out = &out + &term;
        }
        out
    }

    pub fn eval(&self, vars: &[Z2]) -> Z2 {
        self.terms
            .iter()
            .map(|m| {
                m.iter().fold(
                    Z2::ONE,
                    |acc, (&i, &e)| if e > 0 { acc * vars[i] } else { acc },
                )
            })
            .fold(Z2::ZERO, |a, b| a + b)
    }
}

impl Add for &PolyZ2 {
    type Output = PolyZ2;

    fn add(self, rhs: &PolyZ2) -> PolyZ2 {
        PolyZ2 {
            terms: self
                .terms
                .symmetric_difference(&rhs.terms)
                .cloned()
                .collect(),
        }
    }
}

impl Mul for &PolyZ2 {
    type Output = PolyZ2;

    fn mul(self, rhs: &PolyZ2) -> PolyZ2 {
        let mut out = PolyZ2::zero();
        for a in &self.terms {
            for b in &rhs.terms {
                let mut m = a.clone();
                for (&i, &e) in b {
                    *m.entry(i).or_insert(0) += e;
                }
                out.toggle(m);
            }
        }
        out
    }
}

impl fmt::Display for PolyZ2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|m| {
                if m.is_empty() {
                    return "1".to_string();
                }
                m.iter()
                    .map(|(i, e)| {
                        if *e == 1 {
                            format!("x{i}")
                        } else {
                            format!("x{i}^{e}")
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("·")
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// All `2^n` points of the boolean cube, in binary counting order with
/// variable 0 as the most significant bit.
pub fn cube(n: usize) -> impl Iterator<Item = Vec<Z2>> {
    (0u64..1 << n).map(move |k| {
        (0..n)
            .map(|i| Z2::new((k >> (n - 1 - i)) & 1 == 1))
            .collect()
    })
}

/// Checks the compiled backward pass of `circuit` against its symbolic
/// partials on every point of the cube and every one-hot output tangent.
/// Returns the number of disagreeing entries.
pub fn oracle_mismatches(circuit: &Circuit) -> Result<usize> {
    let lens = circuit.build()?;
    let partials = symbolic_partials(circuit)?;
    let (np, nv, no) = (
        circuit.params.len(),
        circuit.num_vars(),
        circuit.outputs.len(),
    );
    let mut bad = 0;
    for x in cube(nv) {
        let p = Tensor::from_vec(x[..np].to_vec());
        let a = Tensor::from_vec(x[np..].to_vec());
        for j in 0..no {
            let mut d = vec![Z2::ZERO; no];
            d[j] = Z2::ONE;
            let (dp, da) = lens.put(&p, &a, &Tensor::from_vec(d))?;
            let got = dp.data().iter().chain(da.data());
            for (i, g) in got.enumerate() {
                if *g != partials[j][i].eval(&x) {
                    bad += 1;
                }
            }
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::SplitMix64;

    fn z(v: &[u8]) -> Tensor<Z2> {
        Tensor::from_vec(v.iter().map(|&b| Z2::from(b)).collect())
    }

    #[test]
    fn gate_examples() {
        let xor = gate_lens(Gate::Xor);
        assert_eq!(xor.put(&z(&[1, 0]), &z(&[1])).unwrap(), z(&[1, 1]));
        let and = gate_lens(Gate::And);
        assert_eq!(and.put(&z(&[1, 1]), &z(&[1])).unwrap(), z(&[1, 1]));
        assert_eq!(and.put(&z(&[1, 0]), &z(&[1])).unwrap(), z(&[0, 1]));
        let copy = gate_lens(Gate::Copy);
        assert_eq!(copy.put(&z(&[1]), &z(&[1, 1])).unwrap(), z(&[0]));
        assert_eq!(gate_lens(Gate::Not).get(&z(&[1])).unwrap(), z(&[0]));
        assert_eq!(
            gate_lens(Gate::Const1).get(&Tensor::unit()).unwrap(),
            z(&[1])
        );
    }

    #[test]
    fn and_circuit_backward() {
        let c = Circuit::parse("param p\ninput x\ny = AND(p, x)\noutput y").unwrap();
        let l = c.build().unwrap();
        let (dp, dx) = l.put(&z(&[1]), &z(&[1]), &z(&[1])).unwrap();
        assert_eq!((dp, dx), (z(&[1]), z(&[1])));
    }

    #[test]
    fn wire_only_circuit_is_identity() {
        let c = Circuit::parse("input x y\noutput x y").unwrap();
        let l = c.build().unwrap();
        for x in cube(2) {
            let a = Tensor::from_vec(x.clone());
            assert_eq!(l.get(&Tensor::unit(), &a).unwrap(), a);
            assert_eq!(l.put(&Tensor::unit(), &a, &a).unwrap().1, a);
        }
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            Circuit::parse("input x\ny = XOR(x, w)\noutput y"),
            Err(Error::DanglingWire(w)) if w == "w"
        ));
        assert!(matches!(
            Circuit::parse("input x\ny = XOR(x, z)\nz = NOT(y)\noutput y"),
            Err(Error::CyclicCircuit(_))
        ));
        assert!(matches!(
            Circuit::parse("input x\ny = FOO(x)\noutput y"),
            Err(Error::CircuitSyntax { line: 2, .. })
        ));
        assert!(matches!(
            Circuit::parse("input x\ny = AND(x)\noutput y"),
            Err(Error::CircuitSyntax { .. })
        ));
        assert!(matches!(
            Circuit::parse("input x\noutput q"),
            Err(Error::DanglingWire(_))
        ));
    }

    #[test]
    fn out_of_order_statements_and_round_trip() {
        let text = "output y\ny = XOR(t, x)  # late\nt = NOT(x)\ninput x";
        let c = Circuit::parse(text).unwrap();
        let l = c.build().unwrap();
        assert_eq!(l.get(&Tensor::unit(), &z(&[0])).unwrap(), z(&[1]));
        let again = Circuit::parse(&c.to_string()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn polynomial_partials() {
        let (x, y) = (PolyZ2::var(0), PolyZ2::var(1));
        let xy = &x * &y;
        assert_eq!(xy.derivative(0), y);
        assert_eq!(xy.derivative(1), x);
        assert_eq!((&x + &y).derivative(0), PolyZ2::one());
        // formal: x·x = x², whose derivative 2x vanishes
        assert!((&x * &x).derivative(0).is_zero());
        assert!((&x + &x).is_zero());
        let x3 = &(&x * &x) * &x;
        assert_eq!(x3.derivative(0), &x * &x);
    }

    #[test]
    fn identity_via_copy_and_xor_with_zero() {
        let c = Circuit::parse("input x\na, b = COPY(x)\nz = CONST0()\ny = XOR(a, z)\noutput y")
            .unwrap();
        assert_eq!(oracle_mismatches(&c).unwrap(), 0);
        let p = symbolic_partials(&c).unwrap();
        assert_eq!(p[0][0], PolyZ2::one());
    }

    #[test]
    fn random_circuits_match_oracle() {
        let mut rng = SplitMix64::seed_from_u64(2024);
        for _ in 0..50 {
            let np = rng.gen_range(0..=3);
            let ni = rng.gen_range(1..=3);
            let g = rng.gen_range(1..=12);
            let c = random_circuit(&mut rng, np, ni, g, 2);
            assert_eq!(oracle_mismatches(&c).unwrap(), 0, "{c}");
            for x in cube(c.num_vars()) {
                let l = c.build().unwrap();
                let out = l
                    .get(
                        &Tensor::from_vec(x[..np].to_vec()),
                        &Tensor::from_vec(x[np..].to_vec()),
                    )
                    .unwrap();
                assert_eq!(out.data(), c.eval(&x).unwrap().as_slice());
                let polys = c.polynomials().unwrap();
                let pv: Vec<Z2> = polys.iter().map(|q| q.eval(&x)).collect();
                assert_eq!(pv, c.eval(&x).unwrap());
            }
        }
    }

    #[test]
    fn params_draw_random_bits() {
        let c =
            Circuit::parse("param p q\ninput x\ny = XOR(p, x)\nz = AND(q, y)\noutput z").unwrap();
        let l = c.build().unwrap();
        let mut rng = SplitMix64::seed_from_u64(1);
        let p = l.init_params(&mut rng);
        assert_eq!(p.numel(), 2);
    }
}
