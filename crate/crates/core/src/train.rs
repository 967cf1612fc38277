//! Training loop, error metrics, and multi-seed aggregation.
//!
//! One run is fully determined by its configuration and seed: parameter
//! initialization, the epoch loop, and every reduction are sequential, so
//! repeated runs produce bitwise-identical loss curves and fields.

use crate::autodiff::{AdamParams, Graph, Tensor, Var};
use crate::fem::normalize_for_network;
use crate::grid::{redimensionalize, BoundarySpec, GridGeom, Scales, ScalarField, StrainField, StressField};
use crate::loss::{
    fields_from_output, physics_loss, EquilibriumSource, FieldVars, LossBreakdown, PhysicsContext,
    Variant, WeightFields,
};
use crate::network::{Pinn, PinnConfig, UNet, UNetConfig};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Everything a run needs besides its data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    /// UNet channel widths per level (unused by the dense baseline).
    pub features: Vec<usize>,
    /// Hidden widths of the dense baseline's two networks.
    pub hidden: Vec<usize>,
    pub adam: AdamParams,
    pub epochs: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(variant: Variant, epochs: usize, seed: u64) -> Self {
        TrainConfig {
            variant,
            features: vec![64, 128, 256, 512, 1024],
            hidden: vec![64; 4],
            adam: AdamParams::default(),
            epochs,
            seed,
        }
    }
}

/// The measured data and problem description for one inversion.
pub struct TrainInputs<'a, T: Scalar> {
    pub strain: &'a StrainField<T>,
    pub bc: &'a BoundarySpec,
    pub scales: Scales,
    /// Ground truth for error tracking, in physical units.
    pub truth_e: Option<&'a ScalarField<f64>>,
    pub truth_nu: Option<&'a ScalarField<f64>>,
}

/// Unweighted losses and material errors at one epoch (epoch 0 is the
/// initial state before any update).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub err_e: Option<f64>,
    pub err_nu: Option<f64>,
}

/// Snapshot of the self-adaptive weights after training.
#[derive(Debug, Clone)]
pub struct WeightSnapshot {
    pub psi_c: Vec<f64>,
    pub psi_e: Option<Vec<f64>>,
    pub psi_tb: Vec<f64>,
    pub psi_sides: Vec<f64>,
}

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub variant: Variant,
    pub seed: u64,
    pub log: Vec<EpochLog>,
    /// Recovered maps in physical units; masked-out pixels hold zero.
    pub est_e: ScalarField<f64>,
    pub est_nu: ScalarField<f64>,
    pub mask: Vec<bool>,
    /// Predicted stress in physical units (stress-predicting variants only).
    pub est_stress: Option<StressField<f64>>,
    pub weights: Option<WeightSnapshot>,
}

/// Mean absolute relative error over masked-in pixels; `None` when the
/// mask is empty or the reference contains zeros there.
pub fn mean_abs_rel_error(est: &[f64], truth: &[f64], mask: &[bool]) -> Option<f64> {
    assert_eq!(est.len(), truth.len());
    assert_eq!(est.len(), mask.len());
    let mut acc = 0.0;
    let mut n = 0usize;
    for k in 0..est.len() {
        if mask[k] {
            if truth[k] == 0.0 {
                return None;
            }
            acc += ((est[k] - truth[k]) / truth[k]).abs();
            n += 1;
        }
    }
    if n == 0 {
        None
    } else {
        Some(acc / n as f64)
    }
}

struct FieldValues<T: Scalar> {
    lambda: Vec<T>,
    mu: Vec<T>,
    stress: Option<[Vec<T>; 3]>,
}

fn snapshot_fields<T: Scalar>(g: &Graph<T>, f: &FieldVars, with_stress: bool) -> FieldValues<T> {
    FieldValues {
        lambda: g.value(f.lambda).to_vec(),
        mu: g.value(f.mu).to_vec(),
        stress: with_stress.then(|| {
            [g.value(f.sxx).to_vec(), g.value(f.syy).to_vec(), g.value(f.sxy).to_vec()]
        }),
    }
}

fn material_errors<T: Scalar>(
    geom: GridGeom,
    vals: &FieldValues<T>,
    scales: Scales,
    inputs: &TrainInputs<'_, T>,
) -> Result<(ScalarField<f64>, ScalarField<f64>, Vec<bool>, Option<f64>, Option<f64>)> {
    let la: Vec<f64> = vals.lambda.iter().map(|&v| v.to_f64()).collect();
    let mu: Vec<f64> = vals.mu.iter().map(|&v| v.to_f64()).collect();
    let red = redimensionalize(
        &ScalarField::new(geom, mu)?,
        &ScalarField::new(geom, la)?,
        scales,
    )?;
    let err_e = inputs
        .truth_e
        .and_then(|t| mean_abs_rel_error(red.e.values(), t.values(), &red.mask));
    let err_nu = inputs
        .truth_nu
        .and_then(|t| mean_abs_rel_error(red.nu.values(), t.values(), &red.mask));
    Ok((red.e, red.nu, red.mask, err_e, err_nu))
}

/// Runs one training run to completion. With `epochs = 0` the record holds
/// the untrained network's fields and a single epoch-0 log entry.
pub fn train<T: Scalar>(config: &TrainConfig, inputs: &TrainInputs<'_, T>) -> Result<RunRecord> {
    match config.variant {
        Variant::DensePinn => train_pinn(config, inputs),
        _ => train_unet(config, inputs),
    }
}

fn train_unet<T: Scalar>(config: &TrainConfig, inputs: &TrainInputs<'_, T>) -> Result<RunRecord> {
    let variant = config.variant;
    let geom = inputs.strain.geom();
    let ctx = PhysicsContext::new(inputs.strain, inputs.bc, inputs.scales)?;
    let (input, _eps_ref) = normalize_for_network(inputs.strain)?;
    let mut net: UNet<T> = UNet::new(UNetConfig {
        in_channels: 3,
        out_channels: variant.out_channels(),
        features: config.features.clone(),
        seed: config.seed,
    })?;
    let mut weights: Option<WeightFields<T>> = match variant {
        Variant::PsW1 | Variant::PsW2 => Some(WeightFields::new(geom, variant)?),
        _ => None,
    };
    let include_constitutive = variant.predicts_stress();

    let mut log = Vec::with_capacity(config.epochs + 1);
    let mut last: Option<(FieldValues<T>, LossBreakdown)> = None;
    for t in 0..=config.epochs {
        let mut g = Graph::new();
        let net_bind = net.store.bind(&mut g);
        let w_bind: Option<Vec<Var>> = weights.as_ref().map(|w| w.store.bind(&mut g));
        let x = g.constant(input.shape.clone(), input.data.clone());
        let out = net.forward(&mut g, &net_bind, x)?;
        let fields = fields_from_output(&mut g, out, &ctx)?;
        let wref = match (&weights, &w_bind) {
            (Some(w), Some(b)) => Some((w, b.as_slice())),
            _ => None,
        };
        let (total, breakdown) =
            physics_loss(&mut g, &fields, EquilibriumSource::FiniteDifference, &ctx, wref, include_constitutive)?;

        let vals = snapshot_fields(&g, &fields, variant.predicts_stress());
        let (_, _, _, err_e, err_nu) = material_errors(geom, &vals, inputs.scales, inputs)?;
        log.push(EpochLog { epoch: t, loss: breakdown, err_e, err_nu });
        last = Some((vals, breakdown));

        if t == config.epochs {
            break;
        }
        g.backward(total);
        net.store.adam_step(&g, &net_bind, config.adam, t + 1)?;
        if let (Some(w), Some(b)) = (&mut weights, &w_bind) {
            w.store.adam_step(&g, b, config.adam, t + 1)?;
        }
    }

    finish_record(config, inputs, geom, last.expect("at least one epoch evaluation"), log, weights)
}

fn train_pinn<T: Scalar>(config: &TrainConfig, inputs: &TrainInputs<'_, T>) -> Result<RunRecord> {
    let geom = inputs.strain.geom();
    let (h, w) = (geom.ny, geom.nx);
    let n = geom.len();
    let ctx = PhysicsContext::new(inputs.strain, inputs.bc, inputs.scales)?;
    let l0 = inputs.scales.l0;
    let mut coords = Vec::with_capacity(2 * n);
    for j in 0..h {
        for i in 0..w {
            let (x, y) = geom.coords(i, j);
            coords.push(T::from_f64(x / l0));
            coords.push(T::from_f64(y / l0));
        }
    }
    let mut ex = vec![T::zero(); 2 * n];
    let mut ey = vec![T::zero(); 2 * n];
    for k in 0..n {
        ex[2 * k] = T::one();
        ey[2 * k + 1] = T::one();
    }
    let dirs = [Tensor::new(vec![n, 2], ex), Tensor::new(vec![n, 2], ey)];

    let mut pinn: Pinn<T> = Pinn::new(&PinnConfig { hidden: config.hidden.clone(), seed: config.seed });

    let mut log = Vec::with_capacity(config.epochs + 1);
    let mut last: Option<(FieldValues<T>, LossBreakdown)> = None;
    for t in 0..=config.epochs {
        let mut g = Graph::new();
        let bind = pinn.store.bind(&mut g);
        let xin = g.constant(vec![n, 2], coords.clone());
        let m = pinn.material_net.forward(&mut g, &bind, xin);
        let (s, tangents) = pinn.stress_net.forward_with_tangents(&mut g, &bind, xin, &dirs);
        let (dsdx, dsdy) = (tangents[0], tangents[1]);

        let grid2d = |g: &mut Graph<T>, v: Var| {
            let shaped = g.reshape(v, vec![h, w]);
            shaped
        };
        // Same material-output scaling as the grid models.
        let inv_eps = T::one() / ctx.eps_ref;
        let lam_raw = g.slice_column(m, 0);
        let mu_raw = g.slice_column(m, 1);
        let lam_col = g.scale(lam_raw, inv_eps);
        let mu_col = g.scale(mu_raw, inv_eps);
        let sxx_col = g.slice_column(s, 0);
        let syy_col = g.slice_column(s, 1);
        let sxy_col = g.slice_column(s, 2);
        let fields = FieldVars {
            lambda: grid2d(&mut g, lam_col),
            mu: grid2d(&mut g, mu_col),
            sxx: grid2d(&mut g, sxx_col),
            syy: grid2d(&mut g, syy_col),
            sxy: grid2d(&mut g, sxy_col),
        };
        // Exact equilibrium residuals from the stress network's tangents:
        // R1 = dSxx/dX + dSxy/dY, R2 = dSxy/dX + dSyy/dY.
        let dsxx_dx = g.slice_column(dsdx, 0);
        let dsxy_dx = g.slice_column(dsdx, 2);
        let dsyy_dy = g.slice_column(dsdy, 1);
        let dsxy_dy = g.slice_column(dsdy, 2);
        let r1f = g.add(dsxx_dx, dsxy_dy);
        let r2f = g.add(dsxy_dx, dsyy_dy);
        let r1 = grid2d(&mut g, r1f);
        let r2 = grid2d(&mut g, r2f);

        let (total, breakdown) = physics_loss(
            &mut g,
            &fields,
            EquilibriumSource::Explicit { r1, r2 },
            &ctx,
            None,
            true,
        )?;

        let vals = snapshot_fields(&g, &fields, true);
        let (_, _, _, err_e, err_nu) = material_errors(geom, &vals, inputs.scales, inputs)?;
        log.push(EpochLog { epoch: t, loss: breakdown, err_e, err_nu });
        last = Some((vals, breakdown));

        if t == config.epochs {
            break;
        }
        g.backward(total);
        pinn.store.adam_step(&g, &bind, config.adam, t + 1)?;
    }

    finish_record(config, inputs, geom, last.expect("at least one epoch evaluation"), log, None)
}

fn finish_record<T: Scalar>(
    config: &TrainConfig,
    inputs: &TrainInputs<'_, T>,
    geom: GridGeom,
    last: (FieldValues<T>, LossBreakdown),
    log: Vec<EpochLog>,
    weights: Option<WeightFields<T>>,
) -> Result<RunRecord> {
    let (vals, _) = last;
    let (est_e, est_nu, mask, _, _) = material_errors(geom, &vals, inputs.scales, inputs)?;
    let est_stress = match &vals.stress {
        Some([sxx, syy, sxy]) => {
            let s0 = inputs.scales.sigma0;
            let dim = |v: &Vec<T>| -> Result<ScalarField<f64>> {
                ScalarField::new(geom, v.iter().map(|&x| x.to_f64() * s0).collect())
            };
            Some(StressField::new(dim(sxx)?, dim(syy)?, dim(sxy)?)?)
        }
        None => None,
    };
    let weights = weights.map(|w| WeightSnapshot {
        psi_c: w.store.data(w.psi_c).iter().map(|&v| v.to_f64()).collect(),
        psi_e: w.psi_e.map(|id| w.store.data(id).iter().map(|&v| v.to_f64()).collect()),
        psi_tb: w.store.data(w.psi_tb).iter().map(|&v| v.to_f64()).collect(),
        psi_sides: w.store.data(w.psi_sides).iter().map(|&v| v.to_f64()).collect(),
    });
    Ok(RunRecord {
        variant: config.variant,
        seed: config.seed,
        log,
        est_e,
        est_nu,
        mask,
        est_stress,
        weights,
    })
}

/// Per-epoch mean and population standard deviation of the unweighted total
/// loss across runs, plus pixelwise mean material maps. Runs are truncated
/// to the shortest log.
#[derive(Debug, Clone)]
pub struct Aggregate {
    pub epochs: Vec<usize>,
    pub loss_mean: Vec<f64>,
    pub loss_std: Vec<f64>,
    pub mean_e: ScalarField<f64>,
    pub mean_nu: ScalarField<f64>,
    /// Final per-run errors, in run order.
    pub final_err_e: Vec<Option<f64>>,
    pub final_err_nu: Vec<Option<f64>>,
}

pub fn aggregate_runs(runs: &[RunRecord]) -> Result<Aggregate> {
    if runs.is_empty() {
        return Err(Error::invalid("no runs to aggregate"));
    }
    let geom = runs[0].est_e.geom();
    let n_epochs = runs.iter().map(|r| r.log.len()).min().expect("nonempty");
    let k = runs.len() as f64;
    let mut loss_mean = Vec::with_capacity(n_epochs);
    let mut loss_std = Vec::with_capacity(n_epochs);
    let mut epochs = Vec::with_capacity(n_epochs);
    for t in 0..n_epochs {
        let vals: Vec<f64> = runs.iter().map(|r| r.log[t].loss.total).collect();
        let mean = vals.iter().sum::<f64>() / k;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
        epochs.push(runs[0].log[t].epoch);
        loss_mean.push(mean);
        loss_std.push(var.sqrt());
    }
    let mut mean_e = vec![0.0; geom.len()];
    let mut mean_nu = vec![0.0; geom.len()];
    for r in runs {
        if r.est_e.geom() != geom {
            return Err(Error::invalid("runs disagree on geometry"));
        }
        for (d, &v) in mean_e.iter_mut().zip(r.est_e.values()) {
            *d += v / k;
        }
        for (d, &v) in mean_nu.iter_mut().zip(r.est_nu.values()) {
            *d += v / k;
        }
    }
    Ok(Aggregate {
        epochs,
        loss_mean,
        loss_std,
        mean_e: ScalarField::new(geom, mean_e)?,
        mean_nu: ScalarField::new(geom, mean_nu)?,
        final_err_e: runs.iter().map(|r| r.log.last().and_then(|l| l.err_e)).collect(),
        final_err_nu: runs.iter().map(|r| r.log.last().and_then(|l| l.err_nu)).collect(),
    })
}

/// Median of a nonempty sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_phantom, solve_plane_strain, MaterialSpec, PhantomSpec};
    use crate::grid::{engineering_from_lame, EdgeSpec, MaterialField};

    fn small_problem() -> (StrainField<f64>, BoundarySpec, Scales, ScalarField<f64>, ScalarField<f64>) {
        let geom = GridGeom::new(16, 16, 1.0, 1.0).unwrap();
        let spec = PhantomSpec::Inclusion {
            background: MaterialSpec { e: 1000.0, nu: 0.3 },
            inclusion: MaterialSpec { e: 2000.0, nu: 0.35 },
            center: [0.5, 0.5],
            radius: 0.25,
        };
        let material: MaterialField<f64> = build_phantom(&spec, geom).unwrap();
        let bc = BoundarySpec {
            bottom: EdgeSpec::traction(50.0, 0.0),
            top: EdgeSpec::traction(50.0, 0.0),
            left: EdgeSpec::traction(0.0, 0.0),
            right: EdgeSpec::traction(0.0, 0.0),
        };
        let sol = solve_plane_strain(&material, &bc).unwrap();
        let scales = Scales { l0: 1.0, sigma0: 50.0 };
        let mut e = Vec::new();
        let mut nu = Vec::new();
        for k in 0..geom.len() {
            let (ek, nk) =
                engineering_from_lame(material.lambda.values()[k], material.mu.values()[k]).unwrap();
            e.push(ek);
            nu.push(nk);
        }
        (
            sol.strain,
            bc,
            scales,
            ScalarField::new(geom, e).unwrap(),
            ScalarField::new(geom, nu).unwrap(),
        )
    }

    fn tiny_config(variant: Variant, epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            variant,
            features: vec![4, 8],
            hidden: vec![16, 16],
            adam: AdamParams::default(),
            epochs,
            seed,
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let (strain, bc, scales, te, tn) = small_problem();
        let strain32 = strain.cast::<f32>();
        let inputs = TrainInputs {
            strain: &strain32,
            bc: &bc,
            scales,
            truth_e: Some(&te),
            truth_nu: Some(&tn),
        };
        let a = train(&tiny_config(Variant::Ps, 3, 7), &inputs).unwrap();
        let b = train(&tiny_config(Variant::Ps, 3, 7), &inputs).unwrap();
        assert_eq!(a.log.len(), b.log.len());
        for (x, y) in a.log.iter().zip(&b.log) {
            assert_eq!(x.loss, y.loss, "bitwise-equal loss curves");
        }
        assert_eq!(a.est_e.values(), b.est_e.values());

        let c = train(&tiny_config(Variant::Ps, 3, 8), &inputs).unwrap();
        assert_ne!(a.log.last().unwrap().loss, c.log.last().unwrap().loss);
    }

    #[test]
    fn zero_epochs_gives_initial_state() {
        let (strain, bc, scales, _, _) = small_problem();
        let inputs = TrainInputs::<f64> {
            strain: &strain,
            bc: &bc,
            scales,
            truth_e: None,
            truth_nu: None,
        };
        let rec = train(&tiny_config(Variant::P, 0, 1), &inputs).unwrap();
        assert_eq!(rec.log.len(), 1);
        assert_eq!(rec.log[0].epoch, 0);
        assert!(rec.est_stress.is_none());
        assert!(rec.weights.is_none());
    }

    #[test]
    fn weighted_variant_trains_and_moves_weights() {
        let (strain, bc, scales, te, tn) = small_problem();
        let strain32 = strain.cast::<f32>();
        let inputs = TrainInputs {
            strain: &strain32,
            bc: &bc,
            scales,
            truth_e: Some(&te),
            truth_nu: Some(&tn),
        };
        let rec = train(&tiny_config(Variant::PsW1, 4, 3), &inputs).unwrap();
        let w = rec.weights.as_ref().unwrap();
        assert!(w.psi_e.is_some());
        assert!(w.psi_c.iter().any(|&v| v != 1.0), "ascent moved the weights");
        assert!(rec.est_stress.is_some());

        let rec2 = train(&tiny_config(Variant::PsW2, 4, 3), &inputs).unwrap();
        assert!(rec2.weights.as_ref().unwrap().psi_e.is_none());
    }

    #[test]
    fn pinn_variant_runs() {
        let (strain, bc, scales, te, tn) = small_problem();
        let inputs = TrainInputs {
            strain: &strain,
            bc: &bc,
            scales,
            truth_e: Some(&te),
            truth_nu: Some(&tn),
        };
        let mut cfg = tiny_config(Variant::DensePinn, 3, 5);
        cfg.hidden = vec![8, 8];
        let rec = train(&cfg, &inputs).unwrap();
        assert_eq!(rec.log.len(), 4);
        assert!(rec.est_stress.is_some());
        let first = rec.log[0].loss.total;
        let last = rec.log[3].loss.total;
        assert!(first.is_finite() && last.is_finite());
    }

    #[test]
    fn mean_abs_rel_error_oracle() {
        let est = [1.1, 2.0, 0.0, 3.3];
        let truth = [1.0, 2.0, 5.0, 3.0];
        let mask = [true, true, false, true];
        let got = mean_abs_rel_error(&est, &truth, &mask).unwrap();
        let expect = (0.1 / 1.0 + 0.0 + 0.3 / 3.0) / 3.0;
        assert!((got - expect).abs() < 1e-12);
        assert_eq!(mean_abs_rel_error(&est, &truth, &[false; 4]), None);
        assert_eq!(mean_abs_rel_error(&est, &[0.0, 1.0, 1.0, 1.0], &mask), None);
    }

    #[test]
    fn aggregate_contracts() {
        let (strain, bc, scales, te, tn) = small_problem();
        let strain32 = strain.cast::<f32>();
        let inputs = TrainInputs {
            strain: &strain32,
            bc: &bc,
            scales,
            truth_e: Some(&te),
            truth_nu: Some(&tn),
        };
        let a = train(&tiny_config(Variant::P, 2, 1), &inputs).unwrap();
        let b = train(&tiny_config(Variant::P, 2, 2), &inputs).unwrap();
        let agg = aggregate_runs(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(agg.epochs, vec![0, 1, 2]);
        for t in 0..3 {
            let (x, y) = (a.log[t].loss.total, b.log[t].loss.total);
            let mean = 0.5 * (x + y);
            let std = (0.5 * ((x - mean).powi(2) + (y - mean).powi(2))).sqrt();
            assert!((agg.loss_mean[t] - mean).abs() < 1e-15);
            assert!((agg.loss_std[t] - std).abs() < 1e-15);
        }
        let k = 10;
        let want = 0.5 * (a.est_e.values()[k] + b.est_e.values()[k]);
        assert!((agg.mean_e.values()[k] - want).abs() < 1e-12);
        assert_eq!(agg.final_err_e.len(), 2);
    }

    #[test]
    fn median_oracle() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[5.0]), 5.0);
    }
}
