//! Physics losses over the computation graph, with optional self-adaptive
//! spatial weights.
//!
//! All quantities entering a loss are dimensionless: stresses and Lamé maps
//! are divided by the traction scale, coordinates by the length scale;
//! strains are dimensionless as measured. Boundary residuals live on the
//! outermost pixel rows and columns. Corner pixels belong to the top and
//! bottom rows; the side columns exclude them, so every boundary pixel is
//! owned by exactly one weight entry.
//!
//! A spatial weight `psi` multiplies its residual before squaring,
//! `mean((psi * r)^2)`, so the effective pointwise weight is `psi^2` and
//! scaling `psi` by a constant `c` scales the weighted term by `c^2`.
//! Weights start at 1 and are trained by gradient ascent on the same total
//! loss (a min-max scheme); the losses reported to logs are always the
//! unweighted values.

use crate::autodiff::{Graph, ParamId, ParamStore, UpdateDirection, Var};
use crate::fd;
use crate::grid::{BoundarySpec, Edge, GridGeom, Scales, StrainField};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Model variants. `P` predicts only the material maps and derives stress
/// from the constitutive law; the `Ps` family predicts stress as extra
/// output channels tied back by a constitutive loss. `W1` weights every
/// term, `W2` leaves the equilibrium term unweighted. `DensePinn` is the
/// coordinate-MLP baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    P,
    Ps,
    PsW1,
    PsW2,
    DensePinn,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::P => "P",
            Variant::Ps => "PS",
            Variant::PsW1 => "PS-W1",
            Variant::PsW2 => "PS-W2",
            Variant::DensePinn => "dense-PINN",
        }
    }

    /// Whether the variant predicts stress channels.
    pub fn predicts_stress(self) -> bool {
        !matches!(self, Variant::P)
    }

    pub fn out_channels(self) -> usize {
        if self.predicts_stress() {
            5
        } else {
            2
        }
    }

    fn weight_equilibrium(self) -> bool {
        matches!(self, Variant::PsW1)
    }

    fn weighted(self) -> bool {
        matches!(self, Variant::PsW1 | Variant::PsW2)
    }
}

/// Everything constant the losses need: dimensionless strain channels, grid
/// spacing, and dimensionless boundary stress targets.
pub struct PhysicsContext<T: Scalar> {
    pub geom: GridGeom,
    pub dx: T,
    pub dy: T,
    pub eps_xx: Vec<T>,
    pub eps_yy: Vec<T>,
    pub eps_xy: Vec<T>,
    /// Per edge: dimensionless `(normal, shear)` targets, `None` where the
    /// component is unspecified and constrains nothing.
    pub targets: [(Option<T>, Option<T>); 4],
    /// Largest absolute strain over the three channels. Raw material
    /// outputs are multiplied by its inverse, so a network emitting O(1)
    /// values covers the O(1/eps) dimensionless Lamé range the constitutive
    /// law demands.
    pub eps_ref: T,
}

impl<T: Scalar> PhysicsContext<T> {
    pub fn new(strain: &StrainField<T>, bc: &BoundarySpec, scales: Scales) -> Result<Self> {
        bc.validate()?;
        let geom = strain.geom();
        let sp = fd::grid_spacing(&geom, scales);
        let s0 = scales.sigma0;
        if s0 <= 0.0 {
            return Err(Error::invalid("traction scale must be positive"));
        }
        let mut targets = [(None, None); 4];
        for (k, e) in Edge::ALL.iter().enumerate() {
            let spec = bc.edge(*e);
            targets[k] = (
                spec.normal_traction.map(|v| T::from_f64(v / s0)),
                spec.shear_traction.map(|v| T::from_f64(v / s0)),
            );
        }
        let eps_ref = strain.xx.max_abs().max(strain.yy.max_abs()).max(strain.xy.max_abs());
        if eps_ref == T::zero() {
            return Err(Error::invalid("all-zero strain carries no deformation information"));
        }
        Ok(PhysicsContext {
            geom,
            dx: T::from_f64(sp.dx),
            dy: T::from_f64(sp.dy),
            eps_xx: strain.xx.values().to_vec(),
            eps_yy: strain.yy.values().to_vec(),
            eps_xy: strain.xy.values().to_vec(),
            targets,
            eps_ref,
        })
    }
}

/// The five physical maps as `[H, W]` graph nodes.
#[derive(Debug, Clone, Copy)]
pub struct FieldVars {
    pub lambda: Var,
    pub mu: Var,
    pub sxx: Var,
    pub syy: Var,
    pub sxy: Var,
}

/// Where the equilibrium residuals come from: finite differences of the
/// stress maps, or explicit residual nodes (the dense baseline uses exact
/// derivatives of its stress network).
#[derive(Debug, Clone, Copy)]
pub enum EquilibriumSource {
    FiniteDifference,
    Explicit { r1: Var, r2: Var },
}

/// Self-adaptive weight fields for the min-max scheme, all initialized to 1
/// and updated by ascent.
pub struct WeightFields<T: Scalar> {
    pub store: ParamStore<T>,
    pub psi_c: ParamId,
    /// Present only when the variant weights the equilibrium term.
    pub psi_e: Option<ParamId>,
    /// Rows: bottom, top; full width including corners.
    pub psi_tb: ParamId,
    /// Rows: left, right; height minus the two corner pixels.
    pub psi_sides: ParamId,
}

impl<T: Scalar> WeightFields<T> {
    pub fn new(geom: GridGeom, variant: Variant) -> Result<Self> {
        if !variant.weighted() {
            return Err(Error::invalid("variant has no self-adaptive weights"));
        }
        let (h, w) = (geom.ny, geom.nx);
        if h < 3 {
            return Err(Error::invalid("weighted variants need at least 3 rows"));
        }
        let mut store = ParamStore::new();
        let ones = |n: usize| vec![T::one(); n];
        let psi_c = store.add(vec![h, w], ones(h * w), UpdateDirection::Ascent);
        let psi_e = variant
            .weight_equilibrium()
            .then(|| store.add(vec![h, w], ones(h * w), UpdateDirection::Ascent));
        let psi_tb = store.add(vec![2, w], ones(2 * w), UpdateDirection::Ascent);
        let psi_sides = store.add(vec![2, h - 2], ones(2 * (h - 2)), UpdateDirection::Ascent);
        Ok(WeightFields { store, psi_c, psi_e, psi_tb, psi_sides })
    }
}

/// Unweighted loss values (and the weighted total fed to the optimizer).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    pub equilibrium: f64,
    pub constitutive: f64,
    pub boundary: f64,
    /// Sum of the three unweighted terms.
    pub total: f64,
}

/// Builds the five field nodes from a network output (`[2,H,W]` or
/// `[5,H,W]`). The first two channels are the raw material outputs, scaled
/// here by `1 / eps_ref` into the dimensionless Lamé maps. With two channels
/// the stress maps are the constitutive images of the material maps and the
/// measured strains.
pub fn fields_from_output<T: Scalar>(
    g: &mut Graph<T>,
    out: Var,
    ctx: &PhysicsContext<T>,
) -> Result<FieldVars> {
    let c = g.shape(out)[0];
    let inv_eps = T::one() / ctx.eps_ref;
    let raw_lambda = g.slice_channel(out, 0);
    let raw_mu = g.slice_channel(out, 1);
    let lambda = g.scale(raw_lambda, inv_eps);
    let mu = g.scale(raw_mu, inv_eps);
    match c {
        2 => {
            let (sxx, syy, sxy) = constitutive_vars(g, lambda, mu, ctx);
            Ok(FieldVars { lambda, mu, sxx, syy, sxy })
        }
        5 => Ok(FieldVars {
            lambda,
            mu,
            sxx: g.slice_channel(out, 2),
            syy: g.slice_channel(out, 3),
            sxy: g.slice_channel(out, 4),
        }),
        n => Err(Error::invalid(format!("expected 2 or 5 output channels, got {n}"))),
    }
}

/// Constitutive stress of material nodes against the measured strains:
/// `S_xx = (2M + L) e_xx + L e_yy`, `S_yy = (2M + L) e_yy + L e_xx`,
/// `S_xy = 2 M e_xy`.
fn constitutive_vars<T: Scalar>(
    g: &mut Graph<T>,
    lambda: Var,
    mu: Var,
    ctx: &PhysicsContext<T>,
) -> (Var, Var, Var) {
    let two = T::from_f64(2.0);
    let two_mu = g.scale(mu, two);
    let diag = g.add(two_mu, lambda);
    let axx = g.mul_field(diag, &ctx.eps_xx);
    let bxx = g.mul_field(lambda, &ctx.eps_yy);
    let sxx = g.add(axx, bxx);
    let ayy = g.mul_field(diag, &ctx.eps_yy);
    let byy = g.mul_field(lambda, &ctx.eps_xx);
    let syy = g.add(ayy, byy);
    let sxy = g.mul_field(two_mu, &ctx.eps_xy);
    (sxx, syy, sxy)
}

/// One residual term: optionally weighted for the optimizer, always also
/// measured unweighted.
struct Term {
    weighted: Var,
    unweighted: f64,
}

fn term<T: Scalar>(g: &mut Graph<T>, r: Var, psi: Option<Var>) -> Term {
    let plain = g.mse(r);
    let weighted = match psi {
        Some(p) => {
            let wr = g.mul(p, r);
            g.mse(wr)
        }
        None => plain,
    };
    Term { weighted, unweighted: g.scalar(plain).to_f64() }
}

/// Assembles the total physics loss for grid-shaped fields.
///
/// Returns the scalar node to optimize (weighted when `weights` is given)
/// and the unweighted breakdown. `include_constitutive` is false for the
/// material-only variant whose stress is constitutive by construction.
pub fn physics_loss<T: Scalar>(
    g: &mut Graph<T>,
    fields: &FieldVars,
    equil: EquilibriumSource,
    ctx: &PhysicsContext<T>,
    weights: Option<(&WeightFields<T>, &[Var])>,
    include_constitutive: bool,
) -> Result<(Var, LossBreakdown)> {
    let (h, w) = (ctx.geom.ny, ctx.geom.nx);
    let mut opt_terms: Vec<Var> = Vec::new();

    // Equilibrium.
    let (r1, r2) = match equil {
        EquilibriumSource::FiniteDifference => {
            let a = g.partial_x(fields.sxx, ctx.dx);
            let b = g.partial_y(fields.sxy, ctx.dy);
            let r1 = g.add(a, b);
            let a = g.partial_x(fields.sxy, ctx.dx);
            let b = g.partial_y(fields.syy, ctx.dy);
            (r1, g.add(a, b))
        }
        EquilibriumSource::Explicit { r1, r2 } => (r1, r2),
    };
    let psi_e = weights
        .and_then(|(wf, bind)| wf.psi_e.map(|id| bind[id.0]));
    let te1 = term(g, r1, psi_e);
    let te2 = term(g, r2, psi_e);
    opt_terms.push(te1.weighted);
    opt_terms.push(te2.weighted);
    let equilibrium = 0.5 * (te1.unweighted + te2.unweighted);

    // Constitutive.
    let mut constitutive = 0.0;
    if include_constitutive {
        let (cxx, cyy, cxy) = constitutive_vars(g, fields.lambda, fields.mu, ctx);
        let psi_c = weights.map(|(wf, bind)| bind[wf.psi_c.0]);
        let mut acc = 0.0;
        for (s, c) in [(fields.sxx, cxx), (fields.syy, cyy), (fields.sxy, cxy)] {
            let r = g.sub(s, c);
            let t = term(g, r, psi_c);
            opt_terms.push(t.weighted);
            acc += t.unweighted;
        }
        constitutive = acc / 3.0;
    }

    // Boundary. Component per edge: sigma_yy on top/bottom, sigma_xx on the
    // sides, sigma_xy everywhere; side columns exclude the corner pixels.
    let mut bterms: Vec<Term> = Vec::new();
    for (k, e) in Edge::ALL.iter().enumerate() {
        let (tn, ts) = ctx.targets[k];
        if tn.is_none() && ts.is_none() {
            continue;
        }
        let psi = weights.map(|(wf, bind)| -> Var {
            match e {
                Edge::Bottom => g.slice_row(bind[wf.psi_tb.0], 0, 0, w),
                Edge::Top => g.slice_row(bind[wf.psi_tb.0], 1, 0, w),
                Edge::Left => g.slice_row(bind[wf.psi_sides.0], 0, 0, h - 2),
                Edge::Right => g.slice_row(bind[wf.psi_sides.0], 1, 0, h - 2),
            }
        });
        let slice = |g: &mut Graph<T>, f: Var| -> Var {
            match e {
                Edge::Bottom => g.slice_row(f, 0, 0, w),
                Edge::Top => g.slice_row(f, h - 1, 0, w),
                Edge::Left => g.slice_col(f, 0, 1, h - 1),
                Edge::Right => g.slice_col(f, w - 1, 1, h - 1),
            }
        };
        let normal_field = match e {
            Edge::Bottom | Edge::Top => fields.syy,
            Edge::Left | Edge::Right => fields.sxx,
        };
        for (target, f) in [(tn, normal_field), (ts, fields.sxy)] {
            if let Some(tv) = target {
                let s = slice(g, f);
                let r = g.add_scalar(s, -tv);
                bterms.push(term(g, r, psi));
            }
        }
    }
    let boundary = if bterms.is_empty() {
        0.0
    } else {
        bterms.iter().map(|t| t.unweighted).sum::<f64>() / bterms.len() as f64
    };
    if !bterms.is_empty() {
        // Average the boundary terms so edge count does not change the
        // balance against the area terms.
        let inv = T::from_f64(1.0 / bterms.len() as f64);
        let vars: Vec<Var> = bterms.iter().map(|t| t.weighted).collect();
        let s = g.sum_vars(&vars);
        opt_terms.push(g.scale(s, inv));
    }

    // Equilibrium enters as the mean of its two residual maps; constitutive
    // as the mean of its three.
    let half = T::from_f64(0.5);
    let e_sum = g.sum_vars(&[opt_terms[0], opt_terms[1]]);
    let mut finals = vec![g.scale(e_sum, half)];
    if include_constitutive {
        let third = T::from_f64(1.0 / 3.0);
        let c_sum = g.sum_vars(&[opt_terms[2], opt_terms[3], opt_terms[4]]);
        finals.push(g.scale(c_sum, third));
    }
    if !bterms.is_empty() {
        finals.push(*opt_terms.last().expect("boundary term present"));
    }
    let total_var = g.sum_vars(&finals);

    let breakdown = LossBreakdown {
        equilibrium,
        constitutive,
        boundary,
        total: equilibrium + constitutive + boundary,
    };
    Ok((total_var, breakdown))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{EdgeSpec, ScalarField};

    fn geom(nx: usize, ny: usize) -> GridGeom {
        GridGeom::new(nx, ny, 1.0, 1.0).unwrap()
    }

    fn ctx(nx: usize, ny: usize) -> PhysicsContext<f64> {
        let g = geom(nx, ny);
        let strain = StrainField::new(
            ScalarField::from_fn(g, |i, j| 0.01 + 0.001 * (i as f64) - 0.0005 * (j as f64)),
            ScalarField::from_fn(g, |i, j| -0.004 + 0.0002 * ((i * j) as f64)),
            ScalarField::from_fn(g, |i, _| 0.002 * (i as f64).sin()),
        )
        .unwrap();
        let bc = BoundarySpec {
            bottom: EdgeSpec::traction(60.0, 0.0),
            top: EdgeSpec::traction(60.0, 0.0),
            left: EdgeSpec::traction(0.0, 0.0),
            right: EdgeSpec::traction(0.0, 0.0),
        };
        PhysicsContext::new(&strain, &bc, Scales { l0: 1.0, sigma0: 60.0 }).unwrap()
    }

    fn rand_fields(g: &mut Graph<f64>, ctx: &PhysicsContext<f64>, seed: u64) -> FieldVars {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = ctx.geom.len();
        let (h, w) = (ctx.geom.ny, ctx.geom.nx);
        let mut mk = |g: &mut Graph<f64>| {
            let data: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 0.5).collect();
            g.param_leaf(vec![h, w], data)
        };
        FieldVars { lambda: mk(g), mu: mk(g), sxx: mk(g), syy: mk(g), sxy: mk(g) }
    }

    #[test]
    fn unit_weights_match_unweighted() {
        let ctx = ctx(9, 7);
        let wf: WeightFields<f64> = WeightFields::new(ctx.geom, Variant::PsW1).unwrap();

        let mut g = Graph::new();
        let fields = rand_fields(&mut g, &ctx, 3);
        let (plain, bd_plain) =
            physics_loss(&mut g, &fields, EquilibriumSource::FiniteDifference, &ctx, None, true)
                .unwrap();
        let bind = wf.store.bind(&mut g);
        let (weighted, bd_w) = physics_loss(
            &mut g,
            &fields,
            EquilibriumSource::FiniteDifference,
            &ctx,
            Some((&wf, &bind)),
            true,
        )
        .unwrap();
        let (a, b) = (g.scalar(plain), g.scalar(weighted));
        assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} vs {b}");
        assert_eq!(bd_plain, bd_w);
    }

    #[test]
    fn weight_scaling_is_quadratic() {
        let ctx = ctx(8, 6);
        let c = 3.5f64;
        let eval = |scale: f64| -> f64 {
            let mut wf: WeightFields<f64> = WeightFields::new(ctx.geom, Variant::PsW1).unwrap();
            for id in [Some(wf.psi_c), wf.psi_e, Some(wf.psi_tb), Some(wf.psi_sides)].into_iter().flatten() {
                for v in wf.store.data_mut(id) {
                    *v *= scale;
                }
            }
            let mut g = Graph::new();
            let fields = rand_fields(&mut g, &ctx, 5);
            let bind = wf.store.bind(&mut g);
            let (loss, _) = physics_loss(
                &mut g,
                &fields,
                EquilibriumSource::FiniteDifference,
                &ctx,
                Some((&wf, &bind)),
                true,
            )
            .unwrap();
            g.scalar(loss)
        };
        let base = eval(1.0);
        let scaled = eval(c);
        assert!((scaled - c * c * base).abs() <= 1e-10 * scaled.abs(), "{scaled} vs {}", c * c * base);
    }

    #[test]
    fn weight_gradient_is_nonnegative_ascent_signal() {
        // dL/dpsi at psi = 1 equals 2 psi r^2 / N per entry (for the terms
        // the weight touches), which is nonnegative.
        let ctx = ctx(7, 5);
        let wf: WeightFields<f64> = WeightFields::new(ctx.geom, Variant::PsW1).unwrap();
        let mut g = Graph::new();
        let fields = rand_fields(&mut g, &ctx, 11);
        let bind = wf.store.bind(&mut g);
        let (loss, _) = physics_loss(
            &mut g,
            &fields,
            EquilibriumSource::FiniteDifference,
            &ctx,
            Some((&wf, &bind)),
            true,
        )
        .unwrap();
        g.backward(loss);
        for id in [wf.psi_c, wf.psi_e.unwrap(), wf.psi_tb, wf.psi_sides] {
            let grad = g.grad(bind[id.0]).unwrap();
            assert!(grad.iter().all(|&v| v >= 0.0));
            assert!(grad.iter().any(|&v| v > 0.0));
        }
    }

    #[test]
    fn ground_truth_constitutive_fields_have_zero_loss_terms() {
        // Feed exact constitutive stress: the constitutive term vanishes,
        // and for constant strain the equilibrium term vanishes too.
        let g0 = geom(6, 5);
        let strain = StrainField::new(
            ScalarField::constant(g0, 0.02),
            ScalarField::constant(g0, -0.01),
            ScalarField::constant(g0, 0.005),
        )
        .unwrap();
        let (la, mu) = (1.2f64, 0.7f64);
        let sxx = (2.0 * mu + la) * 0.02 + la * -0.01;
        let syy = (2.0 * mu + la) * -0.01 + la * 0.02;
        let sxy = 2.0 * mu * 0.005;
        let bc = BoundarySpec {
            bottom: EdgeSpec::traction(syy, sxy),
            top: EdgeSpec::traction(syy, sxy),
            left: EdgeSpec::traction(sxx, sxy),
            right: EdgeSpec::traction(sxx, sxy),
        };
        let ctx = PhysicsContext::new(&strain, &bc, Scales { l0: 1.0, sigma0: 1.0 }).unwrap();
        let mut g = Graph::new();
        let n = g0.len();
        let cf = |g: &mut Graph<f64>, v: f64| g.constant(vec![5, 6], vec![v; n]);
        let fields = FieldVars {
            lambda: cf(&mut g, la),
            mu: cf(&mut g, mu),
            sxx: cf(&mut g, sxx),
            syy: cf(&mut g, syy),
            sxy: cf(&mut g, sxy),
        };
        let (loss, bd) =
            physics_loss(&mut g, &fields, EquilibriumSource::FiniteDifference, &ctx, None, true)
                .unwrap();
        assert!(g.scalar(loss).abs() < 1e-28);
        assert!(bd.total < 1e-28);
    }

    #[test]
    fn material_only_output_builds_constitutive_stress() {
        let ctx = ctx(6, 4);
        let n = ctx.geom.len();
        let mut g = Graph::new();
        let mut data = vec![1.5f64; n];
        data.extend(vec![0.8f64; n]);
        let out = g.param_leaf(vec![2, 4, 6], data);
        let fields = fields_from_output(&mut g, out, &ctx).unwrap();
        let v = g.value(fields.sxx).to_vec();
        let (la, mu) = (1.5 / ctx.eps_ref, 0.8 / ctx.eps_ref);
        for k in 0..n {
            let expect = (2.0 * mu + la) * ctx.eps_xx[k] + la * ctx.eps_yy[k];
            assert!((v[k] - expect).abs() < 1e-12);
        }
        // Gradients flow back to the material parameters.
        let (loss, _) =
            physics_loss(&mut g, &fields, EquilibriumSource::FiniteDifference, &ctx, None, false)
                .unwrap();
        g.backward(loss);
        assert!(g.grad(out).unwrap().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn breakdown_scales_quadratically_in_residuals() {
        // Doubling every field and target scales each unweighted term by 4.
        let ctx0 = ctx(8, 6);
        let eval = |c: f64| -> LossBreakdown {
            let mut ctx = ctx(8, 6);
            for t in &mut ctx.targets {
                t.0 = t.0.map(|v| v * c);
                t.1 = t.1.map(|v| v * c);
            }
            let mut g = Graph::new();
            let base = rand_fields(&mut g, &ctx0, 7);
            let fields = FieldVars {
                lambda: g.scale(base.lambda, c),
                mu: g.scale(base.mu, c),
                sxx: g.scale(base.sxx, c),
                syy: g.scale(base.syy, c),
                sxy: g.scale(base.sxy, c),
            };
            let (_, bd) =
                physics_loss(&mut g, &fields, EquilibriumSource::FiniteDifference, &ctx, None, true)
                    .unwrap();
            bd
        };
        let a = eval(1.0);
        let b = eval(2.0);
        for (x, y) in [
            (a.equilibrium, b.equilibrium),
            (a.constitutive, b.constitutive),
            (a.boundary, b.boundary),
            (a.total, b.total),
        ] {
            assert!((y - 4.0 * x).abs() <= 1e-10 * y.abs(), "{y} vs {}", 4.0 * x);
        }
    }
}
