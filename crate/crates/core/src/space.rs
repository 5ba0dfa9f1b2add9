//! Broken polynomial spaces (scalar, vector, symmetric tensor) and the
//! coefficient vectors living in them.
//!
//! Degrees of freedom are laid out cell by cell; inside a cell they are
//! component-major: `offset(cell) + component * scalar_dim + basis_index`.
//! Symmetric tensor components are ordered `(t11, t12, t22)`.

use alloc::vec::Vec;

use crate::basis::{BasisTable, ScalarBasis};
use crate::error::{Error, Result};
use crate::mesh::{AffineMap, Mesh};
use crate::quadrature::triangle_rule;
use crate::tensor::SymTensorValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKind {
    Scalar,
    Vector,
    SymTensor,
}

impl ComponentKind {
    pub const fn components(self) -> usize {
        match self {
            ComponentKind::Scalar => 1,
            ComponentKind::Vector => 2,
            ComponentKind::SymTensor => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgSpace {
    kind: ComponentKind,
    num_cells: usize,
    basis: ScalarBasis,
}

impl DgSpace {
    pub fn new(kind: ComponentKind, degree: usize, num_cells: usize) -> Result<Self> {
        Ok(DgSpace { kind, num_cells, basis: ScalarBasis::new(degree)? })
    }

    /// Symmetric tensors of degree `k + 1` (stress space).
    pub fn stress(mesh: &Mesh, k: usize) -> Result<Self> {
        Self::new(ComponentKind::SymTensor, k + 1, mesh.num_cells())
    }

    /// Vectors of degree `k` (velocity space).
    pub fn velocity(mesh: &Mesh, k: usize) -> Result<Self> {
        Self::new(ComponentKind::Vector, k, mesh.num_cells())
    }

    pub fn kind(&self) -> ComponentKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &ScalarBasis {
        &self.basis
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn scalar_dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.kind.components() * self.basis.dim()
    }

    pub fn total_dofs(&self) -> usize {
        self.num_cells * self.dofs_per_cell()
    }

    #[inline]
    pub fn cell_offset(&self, cell: usize) -> usize {
        cell * self.dofs_per_cell()
    }

    #[inline]
    pub fn dof(&self, cell: usize, component: usize, basis_index: usize) -> usize {
        self.cell_offset(cell) + component * self.scalar_dim() + basis_index
    }

    /// Coefficients of the `L^2` projection of `f` (one entry per component),
    /// computed cell by cell with a rule exact to `quad_degree`.
    pub fn project<F>(&self, mesh: &Mesh, quad_degree: usize, f: F) -> Result<FieldCoefficients>
    where
        F: Fn([f64; 2], &mut [f64]),
    {
        if mesh.num_cells() != self.num_cells {
            return Err(Error::SpaceMismatch(alloc::format!(
                "space has {} cells, mesh has {}",
                self.num_cells,
                mesh.num_cells()
            )));
        }
        let rule = triangle_rule(quad_degree.max(2 * self.degree()))?;
        let table = self.basis.tabulate(&rule.points);
        let nc = self.kind.components();
        let dim = self.scalar_dim();
        let mut values = alloc::vec![0.0; self.total_dofs()];
        let mut sample = alloc::vec![0.0; nc];
        for (cell, map) in mesh.affine_maps().iter().enumerate() {
            let off = self.cell_offset(cell);
            for (q, (xi, w)) in rule.iter().enumerate() {
                f(map.map(*xi), &mut sample);
                // Orthonormal on the reference cell, so the physical mass
                // matrix is det * I and the det cancels.
                for (c, s) in sample.iter().enumerate() {
                    for (i, phi) in table.values_at(q).iter().enumerate() {
                        values[off + c * dim + i] += w * s * phi;
                    }
                }
            }
        }
        Ok(FieldCoefficients { space: self.clone(), values })
    }
}

/// Value and physical gradient of a scalar field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalarSample {
    pub value: f64,
    pub gradient: [f64; 2],
}

/// Value and physical gradient `g[i][j] = d u_i / d x_j` of a vector field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VectorSample {
    pub value: [f64; 2],
    pub gradient: [[f64; 2]; 2],
}

impl VectorSample {
    pub fn strain(&self) -> SymTensorValue {
        SymTensorValue::strain(self.gradient)
    }
}

/// Value and row-wise divergence of a symmetric tensor field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TensorSample {
    pub value: SymTensorValue,
    pub divergence: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSamples {
    Scalar(Vec<ScalarSample>),
    Vector(Vec<VectorSample>),
    SymTensor(Vec<TensorSample>),
}

/// A discrete field: one coefficient per global dof of `space`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldCoefficients {
    pub space: DgSpace,
    pub values: Vec<f64>,
}

impl FieldCoefficients {
    pub fn zeros(space: &DgSpace) -> Self {
        FieldCoefficients { space: space.clone(), values: alloc::vec![0.0; space.total_dofs()] }
    }

    pub fn new(space: &DgSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.total_dofs() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} coefficients for a space with {} dofs",
                values.len(),
                space.total_dofs()
            )));
        }
        Ok(FieldCoefficients { space: space.clone(), values })
    }

    fn cell_component(&self, cell: usize, component: usize) -> &[f64] {
        let dim = self.space.scalar_dim();
        let start = self.space.dof(cell, component, 0);
        &self.values[start..start + dim]
    }

    /// Samples of component `c` at the points `table` was built on.
    fn scalar_component(&self, cell: usize, c: usize, map: &AffineMap, table: &BasisTable, out: &mut Vec<ScalarSample>) {
        let coeffs = self.cell_component(cell, c);
        out.clear();
        for q in 0..table.num_points {
            let mut s = ScalarSample::default();
            let mut gref = [0.0; 2];
            for (i, &a) in coeffs.iter().enumerate() {
                s.value += a * table.value(q, i);
                let g = table.gradient(q, i);
                gref[0] += a * g[0];
                gref[1] += a * g[1];
            }
            s.gradient = map.push_gradient(gref);
            out.push(s);
        }
    }

    pub fn scalar_samples(&self, cell: usize, map: &AffineMap, table: &BasisTable) -> Vec<ScalarSample> {
        let mut out = Vec::with_capacity(table.num_points);
        self.scalar_component(cell, 0, map, table, &mut out);
        out
    }

    pub fn vector_samples(&self, cell: usize, map: &AffineMap, table: &BasisTable) -> Vec<VectorSample> {
        let mut c0 = Vec::new();
        let mut c1 = Vec::new();
        self.scalar_component(cell, 0, map, table, &mut c0);
        self.scalar_component(cell, 1, map, table, &mut c1);
        c0.iter()
            .zip(&c1)
            .map(|(a, b)| VectorSample { value: [a.value, b.value], gradient: [a.gradient, b.gradient] })
            .collect()
    }

    pub fn tensor_samples(&self, cell: usize, map: &AffineMap, table: &BasisTable) -> Vec<TensorSample> {
        let mut s11 = Vec::new();
        let mut s12 = Vec::new();
        let mut s22 = Vec::new();
        self.scalar_component(cell, 0, map, table, &mut s11);
        self.scalar_component(cell, 1, map, table, &mut s12);
        self.scalar_component(cell, 2, map, table, &mut s22);
        (0..table.num_points)
            .map(|q| TensorSample {
                value: SymTensorValue::new(s11[q].value, s12[q].value, s22[q].value),
                divergence: [
                    s11[q].gradient[0] + s12[q].gradient[1],
                    s12[q].gradient[0] + s22[q].gradient[1],
                ],
            })
            .collect()
    }
}

/// Evaluate a field on `cell` at reference points. Tensor samples carry the
/// row-wise divergence, vector samples the full gradient (and hence strain).
pub fn eval_field(field: &FieldCoefficients, mesh: &Mesh, cell: usize, points: &[[f64; 2]]) -> Result<FieldSamples> {
    let map = mesh.affine_map(cell)?;
    if cell >= field.space.num_cells() {
        return Err(Error::IndexOutOfRange { what: "cell", index: cell, len: field.space.num_cells() });
    }
    let table = field.space.basis().tabulate(points);
    Ok(match field.space.kind() {
        ComponentKind::Scalar => FieldSamples::Scalar(field.scalar_samples(cell, &map, &table)),
        ComponentKind::Vector => FieldSamples::Vector(field.vector_samples(cell, &map, &table)),
        ComponentKind::SymTensor => FieldSamples::SymTensor(field.tensor_samples(cell, &map, &table)),
    })
}
