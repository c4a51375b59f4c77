//! Assemble and solve one discrete Cauchy problem.

use crate::error::Result;
use crate::forms::{self, Formulation, ProblemData};
use crate::linsys::{self, BlockSystem, Ordering, SolveReport, SolverConfig};
use crate::mesh::Mesh;
use crate::space::{FeFunction, Space};
use crate::sparse::dot;

/// All blocks of the coupled system for the given spaces and data.
pub fn assemble_system(v: &Space<'_>, w: &Space<'_>, data: &ProblemData, form: &Formulation) -> Result<BlockSystem> {
    Ok(BlockSystem {
        a: forms::assemble_a(v, w, form.bc)?,
        s_w: forms::assemble_sw(w, &form.params, form.kind, form.bc),
        s_v: forms::assemble_sv(v, &form.params),
        rhs_w: forms::assemble_load(w, data, form, data.is_perturbed())?,
        rhs_v: forms::assemble_dirichlet_rhs(v, data, form)?,
    })
}

/// Discrete primal/dual pair together with the system it solves.
pub struct Solution<'m> {
    pub primal: Space<'m>,
    pub dual: Space<'m>,
    pub system: BlockSystem,
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    pub report: SolveReport,
}

impl<'m> Solution<'m> {
    pub fn u_h(&self) -> FeFunction<'_> {
        FeFunction::new(&self.primal, self.u.clone()).expect("solution matches its space")
    }

    pub fn z_h(&self) -> FeFunction<'_> {
        FeFunction::new(&self.dual, self.z.clone()).expect("solution matches its space")
    }

    pub fn n_dofs(&self) -> usize {
        self.u.len() + self.z.len()
    }

    /// `(|u_h|²_{s_V} + ‖z_h‖²_{s_W}, rhs_w·z − rhs_v·u)`; the two agree for any exact solve.
    pub fn energy_balance(&self) -> (f64, f64) {
        let lhs = self.system.s_v.quadratic_form(&self.u) + self.system.s_w.quadratic_form(&self.z);
        let rhs = dot(&self.system.rhs_v, &self.u) - dot(&self.system.rhs_w, &self.z);
        (lhs, rhs)
    }
}

/// Face-by-face pairing of unknowns and equations.
///
/// On each face the primal unknown is paired with the dual test function and the dual
/// unknown with the primal test function, so the factorization pivots on the diagonal of
/// `a_h` wherever both exist and on the stabilization otherwise.
pub fn face_ordering(v: &Space<'_>, w: &Space<'_>) -> Ordering {
    let (n_u, n_z) = (v.n_dofs(), w.n_dofs());
    let mut rows = Vec::with_capacity(n_u + n_z);
    let mut cols = Vec::with_capacity(n_u + n_z);
    for f in 0..v.mesh().n_faces() {
        // rows: W tests first, then V tests; columns: u then z
        match (v.dof_of_face(f), w.dof_of_face(f)) {
            (Some(u), Some(z)) => {
                rows.extend([z, n_z + u]);
                cols.extend([u, n_u + z]);
            }
            (Some(u), None) => {
                rows.push(n_z + u);
                cols.push(u);
            }
            (None, Some(z)) => {
                rows.push(z);
                cols.push(n_u + z);
            }
            (None, None) => {}
        }
    }
    Ordering::new(rows, cols).expect("every dof belongs to exactly one face")
}

pub fn solve_problem<'m>(
    mesh: &'m Mesh,
    data: &ProblemData,
    form: &Formulation,
    config: &SolverConfig,
) -> Result<Solution<'m>> {
    let primal = form.primal_space(mesh);
    let dual = form.dual_space(mesh);
    let system = assemble_system(&primal, &dual, data, form)?;
    let (m, b) = system.assemble()?;
    let (x, report) = linsys::solve_ordered(&m, &b, config, Some(&face_ordering(&primal, &dual)))?;
    let n_u = system.n_u();
    let z = x[n_u..].to_vec();
    let mut u = x;
    u.truncate(n_u);
    Ok(Solution { primal, dual, system, u, z, report })
}
