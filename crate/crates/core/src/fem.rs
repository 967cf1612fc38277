//! Synthetic-data generator: a plane-strain finite-element solver on the
//! pixel grid, phantom construction, strain-noise injection, and the
//! network-input normalization.
//!
//! Mesh: bilinear 4-node quadrilaterals, one element per pixel cell
//! (`(nx-1) x (ny-1)` elements on an `nx x ny` node grid), 2x2 Gauss
//! quadrature. Element Lamé values are the mean of the four corner pixels.
//! Nodal strains are recovered by extrapolating Gauss-point strains to the
//! element corners and averaging over adjoining elements.
//!
//! Traction sign convention (shared with the boundary loss): an edge's
//! `normal_traction` is the targeted normal stress component on that edge
//! (`sigma_yy` on top/bottom, `sigma_xx` on left/right) and `shear_traction`
//! is the targeted `sigma_xy`. Applied force vectors follow from
//! `t = sigma * n` with the outward normal.

use crate::autodiff::Tensor;
use crate::grid::{
    lame_from_engineering, BoundarySpec, Edge, EdgeConstraint, GridGeom, MaterialField,
    ScalarField, StrainField, StressField,
};
use crate::scalar::Scalar;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One region's engineering constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    /// Elastic modulus (Pa).
    pub e: f64,
    /// Poisson ratio, in (0, 0.5).
    pub nu: f64,
}

/// A circular inclusion in physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub material: MaterialSpec,
    pub center: [f64; 2],
    pub radius: f64,
}

/// Parametric phantom description. Region membership is decided at the
/// pixel center; later entries win where regions overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhantomSpec {
    Inclusion {
        background: MaterialSpec,
        inclusion: MaterialSpec,
        center: [f64; 2],
        radius: f64,
    },
    MultiInclusion {
        background: MaterialSpec,
        inclusions: Vec<Disk>,
    },
    /// Horizontal layers, bottom to top; `boundaries` holds the y-coordinates
    /// separating consecutive layers (`materials.len() - 1` entries).
    Layered {
        materials: Vec<MaterialSpec>,
        boundaries: Vec<f64>,
    },
    /// Explicit per-pixel label grid (row-major, row 0 = bottom) indexing
    /// into `materials`.
    LabelMap {
        materials: Vec<MaterialSpec>,
        labels: Vec<u32>,
    },
}

/// Rasterizes a phantom onto the grid as Lamé parameter maps.
pub fn build_phantom<T: Scalar>(spec: &PhantomSpec, geom: GridGeom) -> Result<MaterialField<T>> {
    let lame = |m: &MaterialSpec| -> Result<(f64, f64)> { lame_from_engineering(m.e, m.nu) };
    let (mut la, mut mu) = (Vec::with_capacity(geom.len()), Vec::with_capacity(geom.len()));
    match spec {
        PhantomSpec::Inclusion { background, inclusion, center, radius } => {
            if *radius < 0.0 {
                return Err(Error::invalid("inclusion radius must be nonnegative"));
            }
            let bg = lame(background)?;
            let inc = lame(inclusion)?;
            for j in 0..geom.ny {
                for i in 0..geom.nx {
                    let (x, y) = geom.coords(i, j);
                    let d2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                    let (l, m) = if d2 <= radius * radius && *radius > 0.0 { inc } else { bg };
                    la.push(T::from_f64(l));
                    mu.push(T::from_f64(m));
                }
            }
        }
        PhantomSpec::MultiInclusion { background, inclusions } => {
            let bg = lame(background)?;
            let disks: Vec<((f64, f64), Disk)> = inclusions
                .iter()
                .map(|d| lame(&d.material).map(|lm| (lm, *d)))
                .collect::<Result<_>>()?;
            for j in 0..geom.ny {
                for i in 0..geom.nx {
                    let (x, y) = geom.coords(i, j);
                    let mut cur = bg;
                    for (lm, d) in &disks {
                        let d2 = (x - d.center[0]).powi(2) + (y - d.center[1]).powi(2);
                        if d2 <= d.radius * d.radius && d.radius > 0.0 {
                            cur = *lm;
                        }
                    }
                    la.push(T::from_f64(cur.0));
                    mu.push(T::from_f64(cur.1));
                }
            }
        }
        PhantomSpec::Layered { materials, boundaries } => {
            if materials.is_empty() {
                return Err(Error::invalid("layered phantom needs at least one material"));
            }
            if boundaries.len() + 1 != materials.len() {
                return Err(Error::invalid("layered phantom needs materials.len()-1 boundaries"));
            }
            let lames: Vec<(f64, f64)> = materials.iter().map(lame).collect::<Result<_>>()?;
            for j in 0..geom.ny {
                let y = geom.coords(0, j).1;
                let mut region = 0;
                for (r, &b) in boundaries.iter().enumerate() {
                    if y > b {
                        region = r + 1;
                    }
                }
                for _ in 0..geom.nx {
                    la.push(T::from_f64(lames[region].0));
                    mu.push(T::from_f64(lames[region].1));
                }
            }
        }
        PhantomSpec::LabelMap { materials, labels } => {
            if materials.is_empty() {
                return Err(Error::invalid("label map needs a nonempty material table"));
            }
            if labels.len() != geom.len() {
                return Err(Error::invalid(format!(
                    "label grid has {} entries, geometry wants {}",
                    labels.len(),
                    geom.len()
                )));
            }
            let lames: Vec<(f64, f64)> = materials.iter().map(lame).collect::<Result<_>>()?;
            for &lab in labels {
                let lm = lames.get(lab as usize).ok_or_else(|| {
                    Error::invalid(format!("label {lab} outside the material table"))
                })?;
                la.push(T::from_f64(lm.0));
                mu.push(T::from_f64(lm.1));
            }
        }
    }
    MaterialField::new(ScalarField::new(geom, la)?, ScalarField::new(geom, mu)?)
}

/// Largest uniform axial traction keeping the nominal axial strain
/// (plane-strain uniaxial stress, `eps = t (1 - nu^2) / E`) at or below
/// `limit` for every pixel.
pub fn traction_for_axial_strain_limit<T: Scalar>(material: &MaterialField<T>, limit: f64) -> f64 {
    let mut t_max = f64::INFINITY;
    for k in 0..material.geom().len() {
        let la = material.lambda.values()[k].to_f64();
        let mu = material.mu.values()[k].to_f64();
        let (e, nu) = crate::grid::engineering_from_lame(la, mu).expect("admissible material");
        t_max = t_max.min(limit * e / (1.0 - nu * nu));
    }
    t_max
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub cg_iterations: usize,
    /// Final relative residual of the conjugate-gradient solve.
    pub cg_residual: f64,
    /// `|reactions + applied| / |applied|` per the dominant load component.
    pub force_balance_rel: f64,
}

#[derive(Debug, Clone)]
pub struct FemSolution<T: Scalar> {
    pub displacement_x: ScalarField<T>,
    pub displacement_y: ScalarField<T>,
    pub strain: StrainField<T>,
    pub stress: StressField<T>,
    pub stats: SolveStats,
}

const GP: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// Bilinear shape-function derivatives at (xi, eta), local node order
/// (-1,-1), (1,-1), (1,1), (-1,1).
fn shape_derivs(xi: f64, eta: f64) -> ([f64; 4], [f64; 4]) {
    let dxi = [
        -0.25 * (1.0 - eta),
        0.25 * (1.0 - eta),
        0.25 * (1.0 + eta),
        -0.25 * (1.0 + eta),
    ];
    let deta = [
        -0.25 * (1.0 - xi),
        -0.25 * (1.0 + xi),
        0.25 * (1.0 + xi),
        0.25 * (1.0 - xi),
    ];
    (dxi, deta)
}

/// 8x8 element stiffness for a rectangle `hx x hy` with Lamé values (la, mu).
fn element_stiffness(hx: f64, hy: f64, la: f64, mu: f64) -> [[f64; 8]; 8] {
    let mut ke = [[0.0; 8]; 8];
    let det_j = hx * hy / 4.0;
    let d = [
        [2.0 * mu + la, la, 0.0],
        [la, 2.0 * mu + la, 0.0],
        [0.0, 0.0, mu],
    ];
    for &xi in &[-GP, GP] {
        for &eta in &[-GP, GP] {
            let (dxi, deta) = shape_derivs(xi, eta);
            let mut b = [[0.0; 8]; 3];
            for a in 0..4 {
                let dx = dxi[a] * 2.0 / hx;
                let dy = deta[a] * 2.0 / hy;
                b[0][2 * a] = dx;
                b[1][2 * a + 1] = dy;
                b[2][2 * a] = dy;
                b[2][2 * a + 1] = dx;
            }
            for r in 0..8 {
                for c in 0..8 {
                    let mut acc = 0.0;
                    for p in 0..3 {
                        for q in 0..3 {
                            acc += b[p][r] * d[p][q] * b[q][c];
                        }
                    }
                    ke[r][c] += acc * det_j;
                }
            }
        }
    }
    ke
}

struct Assembled {
    rows: Vec<BTreeMap<usize, f64>>,
    force: Vec<f64>,
    constrained: Vec<bool>,
}

fn assemble<T: Scalar>(material: &MaterialField<T>, bc: &BoundarySpec) -> Result<Assembled> {
    let geom = material.geom();
    let (nx, ny) = (geom.nx, geom.ny);
    let hx = geom.length_x / (nx - 1) as f64;
    let hy = geom.length_y / (ny - 1) as f64;
    let ndof = 2 * nx * ny;
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); ndof];
    let node = |i: usize, j: usize| j * nx + i;

    for ej in 0..ny - 1 {
        for ei in 0..nx - 1 {
            let nodes = [node(ei, ej), node(ei + 1, ej), node(ei + 1, ej + 1), node(ei, ej + 1)];
            let la = nodes
                .iter()
                .map(|&n| material.lambda.values()[n].to_f64())
                .sum::<f64>()
                / 4.0;
            let mu =
                nodes.iter().map(|&n| material.mu.values()[n].to_f64()).sum::<f64>() / 4.0;
            let ke = element_stiffness(hx, hy, la, mu);
            for (a, &na) in nodes.iter().enumerate() {
                for (b, &nb) in nodes.iter().enumerate() {
                    for da in 0..2 {
                        for db in 0..2 {
                            let v = ke[2 * a + da][2 * b + db];
                            if v != 0.0 {
                                *rows[2 * na + da].entry(2 * nb + db).or_insert(0.0) += v;
                            }
                        }
                    }
                }
            }
        }
    }

    // Consistent nodal forces for edge tractions: each edge segment of
    // length h contributes t*h/2 to its two end nodes.
    let mut force = vec![0.0; ndof];
    let mut edge_force =
        |nodes: &dyn Fn(usize) -> usize, count: usize, h: f64, fx: f64, fy: f64| {
            for s in 0..count - 1 {
                for &n in &[nodes(s), nodes(s + 1)] {
                    force[2 * n] += fx * h / 2.0;
                    force[2 * n + 1] += fy * h / 2.0;
                }
            }
        };
    for e in Edge::ALL {
        let s = bc.edge(e);
        let tn = s.normal_traction.unwrap_or(0.0);
        let ts = s.shear_traction.unwrap_or(0.0);
        if tn == 0.0 && ts == 0.0 {
            continue;
        }
        match e {
            Edge::Top => edge_force(&|i| node(i, ny - 1), nx, hx, ts, tn),
            Edge::Bottom => edge_force(&|i| node(i, 0), nx, hx, -ts, -tn),
            Edge::Right => edge_force(&|j| node(nx - 1, j), ny, hy, tn, ts),
            Edge::Left => edge_force(&|j| node(0, j), ny, hy, -tn, -ts),
        }
    }

    // Kinematic constraints (all homogeneous).
    let mut constrained = vec![false; ndof];
    let mut constrain_edge = |e: Edge, both: bool| {
        let normal_dof = match e {
            Edge::Top | Edge::Bottom => 1,
            Edge::Left | Edge::Right => 0,
        };
        let nodes: Vec<usize> = match e {
            Edge::Top => (0..nx).map(|i| node(i, ny - 1)).collect(),
            Edge::Bottom => (0..nx).map(|i| node(i, 0)).collect(),
            Edge::Left => (0..ny).map(|j| node(0, j)).collect(),
            Edge::Right => (0..ny).map(|j| node(nx - 1, j)).collect(),
        };
        for n in nodes {
            if both {
                constrained[2 * n] = true;
                constrained[2 * n + 1] = true;
            } else {
                constrained[2 * n + normal_dof] = true;
            }
        }
    };
    let mut rigid_x = true;
    let mut rigid_y = true;
    let mut rigid_rot = true;
    for e in Edge::ALL {
        match bc.edge(e).constraint {
            EdgeConstraint::Free => {}
            EdgeConstraint::Roller => {
                constrain_edge(e, false);
                rigid_rot = false;
                match e {
                    Edge::Top | Edge::Bottom => rigid_y = false,
                    Edge::Left | Edge::Right => rigid_x = false,
                }
            }
            EdgeConstraint::Fixed => {
                constrain_edge(e, true);
                rigid_x = false;
                rigid_y = false;
                rigid_rot = false;
            }
        }
    }
    // Pin remaining rigid-body modes at corner nodes. A self-equilibrated
    // load leaves these pins reaction-free, so the stress field is
    // unaffected by their placement.
    let bl = node(0, 0);
    let br = node(nx - 1, 0);
    if rigid_x {
        constrained[2 * bl] = true;
    }
    if rigid_y {
        constrained[2 * bl + 1] = true;
        if rigid_rot {
            constrained[2 * br + 1] = true;
        }
    } else if rigid_rot && rigid_x {
        constrained[2 * br] = true;
    }

    if !constrained.iter().any(|&c| c) {
        return Err(Error::numerical(
            "system is under-constrained: no displacement constraint eliminates rigid-body modes",
        ));
    }
    Ok(Assembled { rows, force, constrained })
}

/// Jacobi-preconditioned conjugate gradients on the free-DOF system.
fn solve_cg(asm: &Assembled, tol: f64) -> Result<(Vec<f64>, usize, f64)> {
    let ndof = asm.force.len();
    let free: Vec<usize> = (0..ndof).filter(|&d| !asm.constrained[d]).collect();
    let mut full_to_red = vec![usize::MAX; ndof];
    for (r, &d) in free.iter().enumerate() {
        full_to_red[d] = r;
    }
    let n = free.len();

    // CSR restricted to free DOFs.
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    let mut data = Vec::new();
    let mut diag = vec![0.0; n];
    indptr.push(0);
    for (r, &d) in free.iter().enumerate() {
        for (&c, &v) in &asm.rows[d] {
            if full_to_red[c] != usize::MAX {
                indices.push(full_to_red[c]);
                data.push(v);
                if full_to_red[c] == r {
                    diag[r] = v;
                }
            }
        }
        indptr.push(indices.len());
    }
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::numerical("stiffness matrix has a nonpositive diagonal entry"));
    }

    let b: Vec<f64> = free.iter().map(|&d| asm.force[d]).collect();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok((vec![0.0; ndof], 0, 0.0));
    }
    let spmv = |x: &[f64], y: &mut [f64]| {
        for r in 0..n {
            let mut acc = 0.0;
            for idx in indptr[r]..indptr[r + 1] {
                acc += data[idx] * x[indices[idx]];
            }
            y[r] = acc;
        }
    };

    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let max_iter = 40 * n + 100;
    let mut iterations = 0;
    let mut rel = 1.0;
    for it in 0..max_iter {
        spmv(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::numerical(
                "stiffness matrix is not positive definite (missing constraint?)",
            ));
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        iterations = it + 1;
        if rel <= tol {
            break;
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    if rel > tol {
        return Err(Error::numerical(format!(
            "conjugate gradients did not converge: relative residual {rel:.3e} after {iterations} iterations"
        )));
    }
    let mut u = vec![0.0; ndof];
    for (rr, &d) in free.iter().enumerate() {
        u[d] = x[rr];
    }
    Ok((u, iterations, rel))
}

/// Solves the plane-strain boundary-value problem on the pixel grid.
pub fn solve_plane_strain<T: Scalar>(
    material: &MaterialField<T>,
    bc: &BoundarySpec,
) -> Result<FemSolution<T>> {
    bc.validate()?;
    let geom = material.geom();
    let (nx, ny) = (geom.nx, geom.ny);
    let hx = geom.length_x / (nx - 1) as f64;
    let hy = geom.length_y / (ny - 1) as f64;
    let asm = assemble(material, bc)?;
    let (u, cg_iterations, cg_residual) = solve_cg(&asm, 1e-12)?;

    // Force balance: reactions on constrained DOFs against applied loads.
    let ndof = 2 * nx * ny;
    let mut ku = vec![0.0; ndof];
    for (d, row) in asm.rows.iter().enumerate() {
        let mut acc = 0.0;
        for (&c, &v) in row {
            acc += v * u[c];
        }
        ku[d] = acc;
    }
    let mut reaction = [0.0f64; 2];
    let mut applied = [0.0f64; 2];
    let mut applied_abs = [0.0f64; 2];
    for d in 0..ndof {
        let comp = d % 2;
        applied[comp] += asm.force[d];
        applied_abs[comp] += asm.force[d].abs();
        if asm.constrained[d] {
            reaction[comp] += ku[d] - asm.force[d];
        }
    }
    let mut force_balance_rel = 0.0f64;
    for comp in 0..2 {
        let denom = applied_abs[comp].max(applied_abs[0]).max(applied_abs[1]);
        if denom > 0.0 {
            force_balance_rel =
                force_balance_rel.max((reaction[comp] + applied[comp]).abs() / denom);
        }
    }

    // Gauss-point strains extrapolated to corners, averaged over elements.
    let node = |i: usize, j: usize| j * nx + i;
    let n_nodes = nx * ny;
    let mut acc = vec![[0.0f64; 3]; n_nodes];
    let mut count = vec![0u32; n_nodes];
    // Lagrange factors for extrapolating from +-1/sqrt(3) to +-1.
    let hi = (1.0 + 3.0f64.sqrt()) / 2.0;
    let lo = (1.0 - 3.0f64.sqrt()) / 2.0;
    let corners: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    for ej in 0..ny - 1 {
        for ei in 0..nx - 1 {
            let nodes = [node(ei, ej), node(ei + 1, ej), node(ei + 1, ej + 1), node(ei, ej + 1)];
            // Strain at the 4 Gauss points, ordered like the corners.
            let gauss = [(-GP, -GP), (GP, -GP), (GP, GP), (-GP, GP)];
            let mut eg = [[0.0f64; 3]; 4];
            for (gidx, &(xi, eta)) in gauss.iter().enumerate() {
                let (dxi, deta) = shape_derivs(xi, eta);
                for (a, &na) in nodes.iter().enumerate() {
                    let dx = dxi[a] * 2.0 / hx;
                    let dy = deta[a] * 2.0 / hy;
                    let (ux, uy) = (u[2 * na], u[2 * na + 1]);
                    eg[gidx][0] += dx * ux;
                    eg[gidx][1] += dy * uy;
                    eg[gidx][2] += 0.5 * (dy * ux + dx * uy); // tensorial shear
                }
            }
            for (cidx, &(cx, cy)) in corners.iter().enumerate() {
                // Extrapolation weight of Gauss point g at corner c.
                let mut val = [0.0f64; 3];
                for (gidx, &(gx, gy)) in gauss.iter().enumerate() {
                    let wx = if gx.signum() == cx.signum() { hi } else { lo };
                    let wy = if gy.signum() == cy.signum() { hi } else { lo };
                    for comp in 0..3 {
                        val[comp] += wx * wy * eg[gidx][comp];
                    }
                }
                let nn = nodes[cidx];
                for comp in 0..3 {
                    acc[nn][comp] += val[comp];
                }
                count[nn] += 1;
            }
        }
    }

    let mut exx = Vec::with_capacity(n_nodes);
    let mut eyy = Vec::with_capacity(n_nodes);
    let mut exy = Vec::with_capacity(n_nodes);
    let mut sxx = Vec::with_capacity(n_nodes);
    let mut syy = Vec::with_capacity(n_nodes);
    let mut sxy = Vec::with_capacity(n_nodes);
    for n in 0..n_nodes {
        let c = count[n] as f64;
        let e = [acc[n][0] / c, acc[n][1] / c, acc[n][2] / c];
        let la = material.lambda.values()[n].to_f64();
        let mu = material.mu.values()[n].to_f64();
        exx.push(T::from_f64(e[0]));
        eyy.push(T::from_f64(e[1]));
        exy.push(T::from_f64(e[2]));
        sxx.push(T::from_f64((2.0 * mu + la) * e[0] + la * e[1]));
        syy.push(T::from_f64((2.0 * mu + la) * e[1] + la * e[0]));
        sxy.push(T::from_f64(2.0 * mu * e[2]));
    }
    let ux: Vec<T> = (0..n_nodes).map(|n| T::from_f64(u[2 * n])).collect();
    let uy: Vec<T> = (0..n_nodes).map(|n| T::from_f64(u[2 * n + 1])).collect();

    Ok(FemSolution {
        displacement_x: ScalarField::new(geom, ux)?,
        displacement_y: ScalarField::new(geom, uy)?,
        strain: StrainField::new(
            ScalarField::new(geom, exx)?,
            ScalarField::new(geom, eyy)?,
            ScalarField::new(geom, exy)?,
        )?,
        stress: StressField::new(
            ScalarField::new(geom, sxx)?,
            ScalarField::new(geom, syy)?,
            ScalarField::new(geom, sxy)?,
        )?,
        stats: SolveStats { cg_iterations, cg_residual, force_balance_rel },
    })
}

/// Adds i.i.d. zero-mean Gaussian noise with standard deviation
/// `level * max|component|` to each strain channel. Channels draw from
/// disjoint substreams of the seeded generator.
pub fn add_noise<T: Scalar>(strain: &StrainField<T>, level: f64, seed: u64) -> Result<StrainField<T>> {
    if level < 0.0 {
        return Err(Error::invalid("noise level must be nonnegative"));
    }
    if level == 0.0 {
        return Ok(strain.clone());
    }
    let geom = strain.geom();
    let noisy = |field: &ScalarField<T>, stream: u64| -> ScalarField<T> {
        let sigma = level * field.max_abs().to_f64();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let values: Vec<T> = field
            .values()
            .iter()
            .map(|&v| {
                let n: f64 = rng.sample(StandardNormal);
                v + T::from_f64(sigma * n)
            })
            .collect();
        ScalarField::new(geom, values).expect("noise preserves shape")
    };
    StrainField::new(noisy(&strain.xx, 0), noisy(&strain.yy, 1), noisy(&strain.xy, 2))
}

/// Normalizes strains into the 3-channel network input. Channels share one
/// divisor (`eps_ref`, the overall max absolute strain) so inter-channel
/// ratios survive; the physics losses keep consuming the original strains.
pub fn normalize_for_network<T: Scalar>(strain: &StrainField<T>) -> Result<(Tensor<T>, T)> {
    let eps_ref = strain.xx.max_abs().max(strain.yy.max_abs()).max(strain.xy.max_abs());
    if eps_ref == T::zero() {
        return Err(Error::invalid("all-zero strain carries no deformation information"));
    }
    let geom = strain.geom();
    let mut data = Vec::with_capacity(3 * geom.len());
    for field in [&strain.xx, &strain.yy, &strain.xy] {
        data.extend(field.values().iter().map(|&v| v / eps_ref));
    }
    Ok((Tensor::new(vec![3, geom.ny, geom.nx], data), eps_ref))
}
