//! Descriptor-form state-space systems `C x' = G x + B u, y = L x`.

use nalgebra::DMatrix;

use crate::error::{MorError, Result};
use crate::linalg::ensure_finite;

/// Anything with a descriptor realization `(G, C, B, L)`.
pub trait LinearModel {
    fn g(&self) -> &DMatrix<f64>;
    fn c(&self) -> &DMatrix<f64>;
    fn b(&self) -> &DMatrix<f64>;
    fn l(&self) -> &DMatrix<f64>;

    fn order(&self) -> usize {
        self.g().nrows()
    }
    fn inputs(&self) -> usize {
        self.b().ncols()
    }
    fn outputs(&self) -> usize {
        self.l().nrows()
    }
}

/// MNA descriptor system. States are `n` node voltages followed by `m`
/// inductive branch currents.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSystem {
    pub g: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub n: usize,
    pub m: usize,
    pub port_names: Vec<String>,
}

impl DescriptorSystem {
    /// Builds a system from raw matrices, checking shapes and finiteness.
    pub fn from_matrices(
        g: DMatrix<f64>,
        c: DMatrix<f64>,
        b: DMatrix<f64>,
        l: DMatrix<f64>,
        n: usize,
        m: usize,
        port_names: Vec<String>,
    ) -> Result<Self> {
        let order = g.nrows();
        if order == 0 {
            return Err(MorError::validation("system has no states"));
        }
        if g.ncols() != order || c.shape() != (order, order) {
            return Err(MorError::validation(format!(
                "G {:?} and C {:?} must be square of equal size",
                g.shape(),
                c.shape()
            )));
        }
        if b.nrows() != order || l.ncols() != order {
            return Err(MorError::validation(format!(
                "B {:?} / L {:?} incompatible with order {order}",
                b.shape(),
                l.shape()
            )));
        }
        if n + m != order {
            return Err(MorError::validation(format!(
                "n + m = {} does not match order {order}",
                n + m
            )));
        }
        if b.ncols() == 0 || l.nrows() == 0 {
            return Err(MorError::validation("system needs at least one input and output"));
        }
        if port_names.len() != b.ncols() {
            return Err(MorError::validation(format!(
                "{} port names for {} inputs",
                port_names.len(),
                b.ncols()
            )));
        }
        for (mat, name) in [(&g, "G"), (&c, "C"), (&b, "B"), (&l, "L")] {
            ensure_finite(mat, name)?;
        }
        Ok(Self {
            g,
            c,
            b,
            l,
            n,
            m,
            port_names,
        })
    }
}

impl LinearModel for DescriptorSystem {
    fn g(&self) -> &DMatrix<f64> {
        &self.g
    }
    fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    fn l(&self) -> &DMatrix<f64> {
        &self.l
    }
}
