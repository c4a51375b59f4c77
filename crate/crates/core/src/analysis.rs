//! Norms, errors and a posteriori indicators.

use crate::error::{Error, Result};
use crate::forms::{BcPath, Formulation, ProblemData, StabKind, StabParams};
use crate::mesh::{BoundaryPart, Mesh, PartSet};
use crate::quadrature;
use crate::space::FeFunction;
use crate::Point;

/// Ω_ζ = (0, x_max) × (0, ζ y_max).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubdomainSpec {
    zeta: f64,
}

impl SubdomainSpec {
    pub fn new(zeta: f64) -> Result<Self> {
        if zeta > 0.0 && zeta <= 1.0 {
            Ok(Self { zeta })
        } else {
            Err(Error::InvalidParameter(format!("zeta must lie in (0, 1], got {zeta}")))
        }
    }

    pub fn whole() -> Self {
        Self { zeta: 1.0 }
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }
}

pub const DEFAULT_ERROR_DEGREE: usize = 6;

/// Sub-triangles of `p` lying below `y = y_cut`.
fn clip_below(p: [Point; 3], y_cut: f64) -> Vec<[Point; 3]> {
    let below = p.iter().filter(|q| q[1] <= y_cut).count();
    if below == 3 {
        return vec![p];
    }
    if below == 0 {
        return Vec::new();
    }
    let mut poly: Vec<Point> = Vec::with_capacity(4);
    for i in 0..3 {
        let a = p[i];
        let b = p[(i + 1) % 3];
        let a_in = a[1] <= y_cut;
        let b_in = b[1] <= y_cut;
        if a_in {
            poly.push(a);
        }
        if a_in != b_in {
            let s = (y_cut - a[1]) / (b[1] - a[1]);
            poly.push([a[0] + s * (b[0] - a[0]), y_cut]);
        }
    }
    (1..poly.len() - 1).map(|k| [poly[0], poly[k], poly[k + 1]]).collect()
}

/// `∫_{Ω ∩ {y ≤ y_cut}} integrand(t, x) dx` with exact clipping of cut elements.
pub fn integrate_below(
    mesh: &Mesh,
    y_cut: f64,
    degree: usize,
    integrand: impl Fn(usize, Point) -> f64,
) -> Result<f64> {
    let unit = quadrature::reference_triangle_rule(degree)?;
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        for tri in clip_below(mesh.triangle_points(t), y_cut) {
            let area = 0.5
                * ((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1])).abs();
            if area == 0.0 {
                continue;
            }
            for &(l, w) in &unit {
                let x = [
                    l[0] * tri[0][0] + l[1] * tri[1][0] + l[2] * tri[2][0],
                    l[0] * tri[0][1] + l[1] * tri[1][1] + l[2] * tri[2][1],
                ];
                total += w * area * integrand(t, x);
            }
        }
    }
    Ok(total)
}

/// `‖u − u_h‖_{Ω_ζ} / ‖u‖_{Ω_ζ}`.
pub fn error_l2_relative(u_h: &FeFunction<'_>, u_exact: &dyn Fn(Point) -> f64, sub: SubdomainSpec) -> Result<f64> {
    let mesh = u_h.mesh();
    let y_cut = sub.zeta * mesh.rect().y_max();
    let num = integrate_below(mesh, y_cut, DEFAULT_ERROR_DEGREE, |t, x| (u_exact(x) - u_h.eval(t, x)).powi(2))?;
    let den = integrate_below(mesh, y_cut, DEFAULT_ERROR_DEGREE, |_, x| u_exact(x).powi(2))?;
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok((num / den).sqrt())
}

/// `‖v‖_h` for a field given element by element.
pub fn broken_l2_norm(mesh: &Mesh, degree: usize, v: impl Fn(usize, Point) -> f64) -> Result<f64> {
    Ok(integrate_below(mesh, f64::INFINITY, degree, |t, x| v(t, x).powi(2))?.sqrt())
}

/// `‖∇v‖_h` for element-wise constant gradients.
pub fn broken_grad_norm(mesh: &Mesh, grad: impl Fn(usize) -> [f64; 2]) -> f64 {
    (0..mesh.n_triangles())
        .map(|t| {
            let g = grad(t);
            mesh.area(t) * (g[0] * g[0] + g[1] * g[1])
        })
        .sum::<f64>()
        .sqrt()
}

pub fn l2_norm(v: &FeFunction<'_>) -> f64 {
    // degree 2 is exact for squares of affine functions
    broken_l2_norm(v.mesh(), 2, |t, x| v.eval(t, x)).expect("degree 2 supported")
}

pub fn grad_norm(v: &FeFunction<'_>) -> f64 {
    broken_grad_norm(v.mesh(), |t| v.grad(t))
}

/// `‖v‖_{1,h} = (‖v‖²_h + ‖∇v‖²_h)^{1/2}`.
pub fn h1_broken_norm(v: &FeFunction<'_>) -> f64 {
    l2_norm(v).hypot(grad_norm(v))
}

/// `‖∇(u − u_h)‖_h`.
pub fn h1_semi_error(u_h: &FeFunction<'_>, grad_exact: &dyn Fn(Point) -> [f64; 2]) -> Result<f64> {
    let mesh = u_h.mesh();
    let e2 = integrate_below(mesh, f64::INFINITY, DEFAULT_ERROR_DEGREE, |t, x| {
        let g = u_h.grad(t);
        let d = grad_exact(x);
        (d[0] - g[0]).powi(2) + (d[1] - g[1]).powi(2)
    })?;
    Ok(e2.sqrt())
}

/// `‖u − u_h‖_{1,h}`.
pub fn broken_h1_error(
    u_h: &FeFunction<'_>,
    u_exact: &dyn Fn(Point) -> f64,
    grad_exact: &dyn Fn(Point) -> [f64; 2],
) -> Result<f64> {
    let mesh = u_h.mesh();
    let l2 = integrate_below(mesh, f64::INFINITY, DEFAULT_ERROR_DEGREE, |t, x| (u_exact(x) - u_h.eval(t, x)).powi(2))?;
    let semi = h1_semi_error(u_h, grad_exact)?;
    Ok((l2 + semi * semi).sqrt())
}

/// `|u_n|_{H¹(Ω)}` for `u_n = A_n n⁻¹ sin(nx) sinh(ny)` on (0, π) × (0, 1).
pub fn exact_energy(n: u32, a_n: f64) -> f64 {
    assert!(n >= 1, "frequency must be positive");
    let n = f64::from(n);
    (a_n * a_n * std::f64::consts::FRAC_PI_2 * (2.0 * n).sinh() / (2.0 * n)).sqrt()
}

/// `Σ_F weight h_F⁻¹ ∫_F [v]²` over faces selected by `select`, evaluated directly.
fn face_penalty(v: &FeFunction<'_>, select: impl Fn(&crate::mesh::Face) -> Option<f64>) -> f64 {
    let mesh = v.mesh();
    let mut total = 0.0;
    for (f, face) in mesh.faces().iter().enumerate() {
        let Some(w) = select(face) else { continue };
        let rule = mesh.face_quadrature(f, 3).expect("degree 3 supported");
        let integral: f64 = rule.iter().map(|&(p, q)| q * v.jump_at(f, p).powi(2)).sum();
        total += w / face.length * integral;
    }
    total
}

/// `|u_h|_{s_V}`.
pub fn sv_seminorm(u_h: &FeFunction<'_>, params: &StabParams) -> f64 {
    face_penalty(u_h, |face| (face.is_interior() || PartSet::GAMMA_D.contains_face(face)).then_some(params.gamma_v())).sqrt()
}

/// `‖z_h‖_{s_W}` for the given stabilization and boundary path.
pub fn sw_norm(z_h: &FeFunction<'_>, params: &StabParams, kind: StabKind, bc: BcPath) -> f64 {
    let volume = match kind {
        StabKind::GradLS => params.gamma_w() * grad_norm(z_h).powi(2),
        StabKind::JumpPenalty => 0.0,
    };
    let faces = face_penalty(z_h, |face| {
        let on_c_prime = PartSet::GAMMA_C_PRIME.contains_face(face);
        match (kind, bc) {
            (StabKind::JumpPenalty, BcPath::Strong) => (face.is_interior() || on_c_prime).then_some(params.gamma_w()),
            (StabKind::JumpPenalty, BcPath::Weak) => {
                if face.is_interior() {
                    Some(params.gamma_w())
                } else if on_c_prime {
                    Some(params.gamma_bc())
                } else {
                    None
                }
            }
            (StabKind::GradLS, BcPath::Weak) => on_c_prime.then_some(params.gamma_bc()),
            (StabKind::GradLS, BcPath::Strong) => None,
        }
    });
    (volume + faces).sqrt()
}

/// Mesh-dependent norm of the primal part plus `‖z_h‖_{s_W}`.
///
/// The normal-gradient jump term is `(Σ_{F ∈ F_i ∪ F_{Γ_C}} h_F ‖[n_F·∇v]‖²_F)^{1/2}`.
pub fn triple_norm(u: &FeFunction<'_>, z: &FeFunction<'_>, form: &Formulation) -> f64 {
    let mesh = u.mesh();
    let gv = form.params.gamma_v().sqrt();
    let scaled_grad = (0..mesh.n_triangles())
        .map(|t| {
            let g = u.grad(t);
            mesh.diameter(t).powi(2) * mesh.area(t) * (g[0] * g[0] + g[1] * g[1])
        })
        .sum::<f64>()
        .sqrt();
    let mut jump2 = 0.0;
    for face in mesh.faces() {
        let n = face.normal;
        let g0 = u.grad(face.triangles[0]);
        let jump = match face.second() {
            Some(t1) => {
                let g1 = u.grad(t1);
                n[0] * (g0[0] - g1[0]) + n[1] * (g0[1] - g1[1])
            }
            None if face.part == Some(BoundaryPart::GammaC) => n[0] * g0[0] + n[1] * g0[1],
            None => continue,
        };
        jump2 += face.length * face.length * jump * jump;
    }
    gv * scaled_grad + gv * jump2.sqrt() + sv_seminorm(u, &form.params) + sw_norm(z, &form.params, form.kind, form.bc)
}

/// `inf_α ‖ψ − α‖²_F`, attained at the face mean of ψ.
pub fn face_oscillation_squared(mesh: &Mesh, f: usize, psi: &dyn Fn(Point) -> f64, degree: usize) -> Result<f64> {
    let rule = mesh.face_quadrature(f, degree)?;
    let len = mesh.face(f).length;
    let mean = rule.iter().map(|&(p, w)| w * psi(p)).sum::<f64>() / len;
    Ok(rule.iter().map(|&(p, w)| w * (psi(p) - mean).powi(2)).sum())
}

/// `(Σ_{F ∈ F_{Γ_C}} h inf_α ‖ψ − α‖²_F)^{1/2}` with `h` the largest element diameter.
pub fn flux_oscillation(mesh: &Mesh, psi: &dyn Fn(Point) -> f64, degree: usize) -> Result<f64> {
    let h = mesh.h_max();
    let mut total = 0.0;
    for (f, face) in mesh.faces().iter().enumerate() {
        if face.part == Some(BoundaryPart::GammaC) {
            total += h * face_oscillation_squared(mesh, f, psi, degree)?;
        }
    }
    Ok(total.sqrt())
}

fn source_norm(mesh: &Mesh, f: &dyn Fn(Point) -> f64, degree: usize) -> Result<f64> {
    Ok(integrate_below(mesh, f64::INFINITY, degree, |_, x| f(x).powi(2))?.sqrt())
}

fn cauchy_boundary_norm(mesh: &Mesh, g: &dyn Fn(Point) -> f64, degree: usize) -> Result<f64> {
    let mut total = 0.0;
    for (f, face) in mesh.faces().iter().enumerate() {
        if face.part == Some(BoundaryPart::GammaC) {
            total += mesh.face_quadrature(f, degree)?.iter().map(|&(p, w)| w * g(p).powi(2)).sum::<f64>();
        }
    }
    Ok(total.sqrt())
}

/// Indicator η with unit constants:
/// `h‖f‖ + γ_V^{-1/2}|u_h|_{s_V} + γ_W^{1/2}‖z_h‖_{s_W} + flux oscillation`.
pub fn eta(u_h: &FeFunction<'_>, z_h: &FeFunction<'_>, data: &ProblemData, form: &Formulation) -> Result<f64> {
    let mesh = u_h.mesh();
    let p = &form.params;
    Ok(mesh.h_max() * source_norm(mesh, &*data.f, form.quad.triangle)?
        + sv_seminorm(u_h, p) / p.gamma_v().sqrt()
        + p.gamma_w().sqrt() * sw_norm(z_h, p, form.kind, form.bc)
        + flux_oscillation(mesh, &*data.psi, form.quad.face)?)
}

/// Indicator η_δ with unit constants:
/// `h‖f‖ + |u_h|_{s_V} + ‖z_h‖_{s_W} + flux oscillation + perturbation norm`.
pub fn eta_delta(
    u_h: &FeFunction<'_>,
    z_h: &FeFunction<'_>,
    data: &ProblemData,
    form: &Formulation,
    delta_norm: f64,
) -> Result<f64> {
    let mesh = u_h.mesh();
    let p = &form.params;
    Ok(mesh.h_max() * source_norm(mesh, &*data.f, form.quad.triangle)?
        + sv_seminorm(u_h, p)
        + sw_norm(z_h, p, form.kind, form.bc)
        + flux_oscillation(mesh, &*data.psi, form.quad.face)?
        + delta_norm)
}

/// `h‖δf‖_Ω + ‖δf‖_{W'} + h^{1/2}‖δψ‖_{Γ_C} + ‖δψ‖_{H^{-1/2}(Γ_C)}`, with the two dual
/// norms replaced by the L² norms that bound them from above.
pub fn perturbation_norm(
    delta_f: &dyn Fn(Point) -> f64,
    delta_psi: &dyn Fn(Point) -> f64,
    mesh: &Mesh,
    degree_triangle: usize,
    degree_face: usize,
) -> Result<f64> {
    let h = mesh.h_max();
    let df = source_norm(mesh, delta_f, degree_triangle)?;
    let dpsi = cauchy_boundary_norm(mesh, delta_psi, degree_face)?;
    Ok((h + 1.0) * df + (h.sqrt() + 1.0) * dpsi)
}
