//! Reverse accumulation over second-order jets.
//!
//! Every node on the tape holds a full [`Jet`], so an expression such as a
//! PDE residual can read input derivatives of the network output and still
//! be differentiated with respect to every parameter in one backward sweep.
//! The backward sweep propagates adjoints for all jet components.

use std::cell::RefCell;
use std::ops::{Add, Deref, Div, Mul, Neg, Sub};

use super::elementary::Derivs;
use super::jet::{Jet, MAX_INPUT_DIM};
use super::scalar::{JetScalar, Scalar};
use super::AutodiffError;

#[derive(Clone, Copy, Debug)]
enum Part {
    Value,
    D1(usize),
    D2(usize),
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf,
    Param(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// `scale * a + offset`
    Affine(usize, f64),
    Unary(usize, Derivs),
    Part(usize, Part),
}

#[derive(Clone, Copy, Debug)]
struct Node {
    jet: Jet,
    op: Op,
}

/// Records jet-valued operations for a later backward sweep.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// A jet recorded on a [`Tape`]. This is the differentiable scalar the
/// loss assembly is expressed in.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("index", &self.index).field("jet", &self.jet()).finish()
    }
}

/// `∂loss/∂θ`, ordered like the parameter store it was computed against.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl Deref for GradientVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, jet: Jet, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { jet, op });
        Var { tape: self, index: nodes.len() - 1 }
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(Jet::constant(value), Op::Leaf)
    }

    /// Records an arbitrary jet as a leaf with no parameter dependence.
    pub fn leaf(&self, jet: Jet) -> Var<'_> {
        self.push(jet, Op::Leaf)
    }

    pub fn input(&self, point: &[f64], index: usize) -> Result<Var<'_>, AutodiffError> {
        Ok(self.leaf(Jet::lift(point, index)?))
    }

    pub fn inputs(&self, point: &[f64]) -> Result<Vec<Var<'_>>, AutodiffError> {
        (0..point.len()).map(|i| self.input(point, i)).collect()
    }

    /// Trainable parameter with position `id` in its store.
    pub fn param(&self, id: usize, value: f64) -> Var<'_> {
        self.push(Jet::constant(value), Op::Param(id))
    }

    pub fn params(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().enumerate().map(|(i, &v)| self.param(i, v)).collect()
    }

    fn jet(&self, index: usize) -> Jet {
        self.nodes.borrow()[index].jet
    }

    fn binary(&self, a: usize, b: usize, jet: Jet, op: fn(usize, usize) -> Op) -> Var<'_> {
        self.push(jet, op(a, b))
    }
}

impl<'t> Var<'t> {
    pub fn jet(&self) -> Jet {
        self.tape.jet(self.index)
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn same_tape(&self, other: &Var<'t>) {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "variables from different tapes");
    }

    fn part(&self, part: Part) -> Var<'t> {
        let jet = self.jet();
        let value = match part {
            Part::Value => jet.value,
            Part::D1(i) => jet.d1[i],
            Part::D2(i) => jet.d2[i],
        };
        self.tape.push(Jet::constant(value), Op::Part(self.index, part))
    }

    fn affine(self, scale: f64, offset: f64) -> Var<'t> {
        let jet = self.jet() * scale + offset;
        self.tape.push(jet, Op::Affine(self.index, scale))
    }
}

/// Reverse sweep from `loss` (treated as a plain scalar: only its value
/// is seeded) into a gradient over `n_params` parameters.
pub fn param_gradient(loss: Var<'_>, n_params: usize) -> Result<GradientVector, AutodiffError> {
    let nodes = loss.tape.nodes.borrow();
    let mut adjoint = vec![Jet::default(); loss.index + 1];
    let mut grad = vec![0.0; n_params];
    adjoint[loss.index].value = 1.0;

    for index in (0..=loss.index).rev() {
        let bar = adjoint[index];
        if bar == Jet::default() {
            continue;
        }
        match nodes[index].op {
            Op::Leaf => {}
            Op::Param(id) => {
                let slot = grad.get_mut(id).ok_or(AutodiffError::MissingParameter { index: id, len: n_params })?;
                *slot += bar.value;
            }
            Op::Add(a, b) => {
                adjoint[a] = adjoint[a] + bar;
                adjoint[b] = adjoint[b] + bar;
            }
            Op::Sub(a, b) => {
                adjoint[a] = adjoint[a] + bar;
                adjoint[b] = adjoint[b] - bar;
            }
            Op::Affine(a, scale) => {
                adjoint[a] = adjoint[a] + bar * scale;
            }
            Op::Mul(a, b) => {
                let (ja, jb) = (nodes[a].jet, nodes[b].jet);
                let da = mul_adjoint(&bar, &jb);
                let db = mul_adjoint(&bar, &ja);
                adjoint[a] = adjoint[a] + da;
                adjoint[b] = adjoint[b] + db;
            }
            Op::Unary(a, [_, f1, f2, f3]) => {
                let x = nodes[a].jet;
                let mut d = Jet::constant(bar.value * f1);
                for c in 0..MAX_INPUT_DIM {
                    d.value += bar.d1[c] * f2 * x.d1[c] + bar.d2[c] * (f3 * x.d1[c] * x.d1[c] + f2 * x.d2[c]);
                    d.d1[c] = bar.d1[c] * f1 + 2.0 * bar.d2[c] * f2 * x.d1[c];
                    d.d2[c] = bar.d2[c] * f1;
                }
                adjoint[a] = adjoint[a] + d;
            }
            Op::Part(a, part) => match part {
                Part::Value => adjoint[a].value += bar.value,
                Part::D1(i) => adjoint[a].d1[i] += bar.value,
                Part::D2(i) => adjoint[a].d2[i] += bar.value,
            },
        }
    }
    Ok(GradientVector(grad))
}

/// Adjoint contribution to one factor of a product, given the other factor.
fn mul_adjoint(bar: &Jet, other: &Jet) -> Jet {
    let mut d = Jet::constant(bar.value * other.value);
    for c in 0..MAX_INPUT_DIM {
        d.value += bar.d1[c] * other.d1[c] + bar.d2[c] * other.d2[c];
        d.d1[c] = bar.d1[c] * other.value + 2.0 * bar.d2[c] * other.d1[c];
        d.d2[c] = bar.d2[c] * other.value;
    }
    d
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(&rhs);
        self.tape.binary(self.index, rhs.index, self.jet() + rhs.jet(), Op::Add)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(&rhs);
        self.tape.binary(self.index, rhs.index, self.jet() - rhs.jet(), Op::Sub)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(&rhs);
        self.tape.binary(self.index, rhs.index, self.jet() * rhs.jet(), Op::Mul)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        self * rhs.recip()
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.affine(-1.0, 0.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.affine(1.0, rhs)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.affine(1.0, -rhs)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.affine(rhs, 0.0)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        self.affine(1.0 / rhs, 0.0)
    }
}

impl Scalar for Var<'_> {
    fn constant_like(&self, c: f64) -> Self {
        self.tape.constant(c)
    }

    fn value(&self) -> f64 {
        self.jet().value
    }

    fn chain(self, derivs: Derivs) -> Self {
        let jet = self.jet().chain(derivs);
        self.tape.push(jet, Op::Unary(self.index, derivs))
    }
}

impl JetScalar for Var<'_> {
    fn d1(&self, i: usize) -> Self {
        self.part(Part::D1(i))
    }
    fn d2(&self, i: usize) -> Self {
        self.part(Part::D2(i))
    }
    fn value_part(&self) -> Self {
        self.part(Part::Value)
    }
    fn input_like(&self, point: &[f64], index: usize) -> Self {
        self.tape.input(point, index).expect("input coordinate in range")
    }
}
