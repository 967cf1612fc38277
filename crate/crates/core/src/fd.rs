//! Dimensionless finite-difference stencils and the static-equilibrium
//! residual fields.
//!
//! Central differences in the interior, first-order one-sided differences on
//! the boundary rows/columns. Both are exact for fields affine in the
//! coordinate, which the residual tests lean on.

use crate::grid::{GridGeom, ScalarField, StressField};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Dimensionless grid spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FDSpacing {
    pub dx: f64,
    pub dy: f64,
}

/// Spacing rule: `dX = length_x / (l0 (nx - 1))`, likewise for `dY`.
pub fn grid_spacing(geom: &GridGeom, scales: crate::grid::Scales) -> FDSpacing {
    FDSpacing {
        dx: geom.length_x / (scales.l0 * (geom.nx - 1) as f64),
        dy: geom.length_y / (scales.l0 * (geom.ny - 1) as f64),
    }
}

/// Raw stencil along the fast (x) axis of a row-major `ny x nx` array.
pub(crate) fn partial_x_raw<T: Scalar>(f: &[T], nx: usize, ny: usize, dx: T, out: &mut [T]) {
    let half = T::from_f64(0.5) / dx;
    let inv = T::one() / dx;
    for j in 0..ny {
        let row = &f[j * nx..(j + 1) * nx];
        let orow = &mut out[j * nx..(j + 1) * nx];
        if nx == 2 {
            let d = (row[1] - row[0]) * inv;
            orow[0] = d;
            orow[1] = d;
            continue;
        }
        orow[0] = (row[1] - row[0]) * inv;
        for i in 1..nx - 1 {
            orow[i] = (row[i + 1] - row[i - 1]) * half;
        }
        orow[nx - 1] = (row[nx - 1] - row[nx - 2]) * inv;
    }
}

/// Raw stencil along the slow (y) axis of a row-major `ny x nx` array.
pub(crate) fn partial_y_raw<T: Scalar>(f: &[T], nx: usize, ny: usize, dy: T, out: &mut [T]) {
    let half = T::from_f64(0.5) / dy;
    let inv = T::one() / dy;
    for i in 0..nx {
        if ny == 2 {
            let d = (f[nx + i] - f[i]) * inv;
            out[i] = d;
            out[nx + i] = d;
            continue;
        }
        out[i] = (f[nx + i] - f[i]) * inv;
        for j in 1..ny - 1 {
            out[j * nx + i] = (f[(j + 1) * nx + i] - f[(j - 1) * nx + i]) * half;
        }
        out[(ny - 1) * nx + i] = (f[(ny - 1) * nx + i] - f[(ny - 2) * nx + i]) * inv;
    }
}

/// Adjoint of [`partial_x_raw`]: accumulates the transposed stencil into `acc`.
pub(crate) fn partial_x_adjoint<T: Scalar>(g: &[T], nx: usize, ny: usize, dx: T, acc: &mut [T]) {
    let half = T::from_f64(0.5) / dx;
    let inv = T::one() / dx;
    for j in 0..ny {
        let grow = &g[j * nx..(j + 1) * nx];
        let arow = &mut acc[j * nx..(j + 1) * nx];
        if nx == 2 {
            let s = (grow[0] + grow[1]) * inv;
            arow[0] -= s;
            arow[1] += s;
            continue;
        }
        arow[0] -= grow[0] * inv;
        arow[1] += grow[0] * inv;
        for i in 1..nx - 1 {
            let v = grow[i] * half;
            arow[i + 1] += v;
            arow[i - 1] -= v;
        }
        arow[nx - 1] += grow[nx - 1] * inv;
        arow[nx - 2] -= grow[nx - 1] * inv;
    }
}

/// Adjoint of [`partial_y_raw`].
pub(crate) fn partial_y_adjoint<T: Scalar>(g: &[T], nx: usize, ny: usize, dy: T, acc: &mut [T]) {
    let half = T::from_f64(0.5) / dy;
    let inv = T::one() / dy;
    for i in 0..nx {
        if ny == 2 {
            let s = (g[i] + g[nx + i]) * inv;
            acc[i] -= s;
            acc[nx + i] += s;
            continue;
        }
        acc[i] -= g[i] * inv;
        acc[nx + i] += g[i] * inv;
        for j in 1..ny - 1 {
            let v = g[j * nx + i] * half;
            acc[(j + 1) * nx + i] += v;
            acc[(j - 1) * nx + i] -= v;
        }
        acc[(ny - 1) * nx + i] += g[(ny - 1) * nx + i] * inv;
        acc[(ny - 2) * nx + i] -= g[(ny - 1) * nx + i] * inv;
    }
}

/// dX-partial of a field: central inside, one-sided on the left/right edges.
pub fn partial_x<T: Scalar>(f: &ScalarField<T>, sp: FDSpacing) -> ScalarField<T> {
    let geom = f.geom();
    let mut out = vec![T::zero(); geom.len()];
    partial_x_raw(f.values(), geom.nx, geom.ny, T::from_f64(sp.dx), &mut out);
    ScalarField::new(geom, out).expect("stencil output shape")
}

/// dY-partial of a field: central inside, one-sided on the bottom/top edges.
pub fn partial_y<T: Scalar>(f: &ScalarField<T>, sp: FDSpacing) -> ScalarField<T> {
    let geom = f.geom();
    let mut out = vec![T::zero(); geom.len()];
    partial_y_raw(f.values(), geom.nx, geom.ny, T::from_f64(sp.dy), &mut out);
    ScalarField::new(geom, out).expect("stencil output shape")
}

/// Static-equilibrium residuals:
/// `R1 = dS_xx/dX + dS_xy/dY`, `R2 = dS_xy/dX + dS_yy/dY`.
pub fn equilibrium_residual<T: Scalar>(
    s: &StressField<T>,
    sp: FDSpacing,
) -> Result<(ScalarField<T>, ScalarField<T>)> {
    let geom = s.geom();
    if geom != s.yy.geom() || geom != s.xy.geom() {
        return Err(Error::invalid("stress components must share one geometry"));
    }
    let dxx = partial_x(&s.xx, sp);
    let dxy_y = partial_y(&s.xy, sp);
    let dxy_x = partial_x(&s.xy, sp);
    let dyy = partial_y(&s.yy, sp);
    let n = geom.len();
    let mut r1 = Vec::with_capacity(n);
    let mut r2 = Vec::with_capacity(n);
    for k in 0..n {
        r1.push(dxx.values()[k] + dxy_y.values()[k]);
        r2.push(dxy_x.values()[k] + dyy.values()[k]);
    }
    Ok((ScalarField::new(geom, r1)?, ScalarField::new(geom, r2)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Scales, StressField};
    use proptest::prelude::*;

    fn geom(nx: usize, ny: usize) -> GridGeom {
        GridGeom::new(nx, ny, 1.0, 1.0).unwrap()
    }

    #[test]
    fn grid_spacing_examples() {
        let g = GridGeom::new(5, 3, 2.0, 1.0).unwrap();
        let sp = grid_spacing(&g, Scales { l0: 1.5, sigma0: 1.0 });
        assert!((sp.dx - 1.0 / 3.0).abs() < 1e-15);
        assert!((sp.dy - 1.0 / 3.0).abs() < 1e-15);

        let g = GridGeom::new(2, 2, 1.0, 1.0).unwrap();
        let sp = grid_spacing(&g, Scales { l0: 1.0, sigma0: 1.0 });
        assert_eq!(sp.dx, 1.0);

        // Proportional lengths give isotropic spacing.
        let g = GridGeom::new(142, 100, 1.42, 1.42 * 99.0 / 141.0).unwrap();
        let sp = grid_spacing(&g, Scales { l0: 1.205, sigma0: 1.0 });
        assert!((sp.dx - sp.dy).abs() < 1e-15);
    }

    fn coord_x(g: GridGeom, l0: f64) -> ScalarField<f64> {
        ScalarField::from_fn(g, |i, _| g.coords(i, 0).0 / l0)
    }

    #[test]
    fn partial_x_exact_on_affine() {
        let g = geom(7, 5);
        let sp = grid_spacing(&g, Scales { l0: 1.0, sigma0: 1.0 });
        let f = coord_x(g, 1.0);
        let d = partial_x(&f, sp);
        assert!(d.values().iter().all(|&v| (v - 1.0).abs() < 1e-13));

        let c: ScalarField<f64> = ScalarField::constant(g, 3.25);
        assert!(partial_x(&c, sp).values().iter().all(|&v| v.abs() < 1e-13));
        assert!(partial_y(&c, sp).values().iter().all(|&v| v.abs() < 1e-13));
    }

    #[test]
    fn partial_x_square_example() {
        // f(X) = X^2 on X in {0, 0.5, 1}: interior exact, edges O(dX).
        let g = GridGeom::new(3, 2, 1.0, 1.0).unwrap();
        let sp = grid_spacing(&g, Scales { l0: 1.0, sigma0: 1.0 });
        let f = ScalarField::from_fn(g, |i, _| {
            let x = i as f64 * 0.5;
            x * x
        });
        let d = partial_x(&f, sp);
        assert!((d.at(0, 0) - 0.5).abs() < 1e-15);
        assert!((d.at(1, 0) - 1.0).abs() < 1e-15);
        assert!((d.at(2, 0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_residual_examples() {
        let g = geom(9, 6);
        let sp = grid_spacing(&g, Scales { l0: 1.0, sigma0: 1.0 });
        let x = coord_x(g, 1.0);
        let y = ScalarField::from_fn(g, |_, j| g.coords(0, j).1);
        let zero = ScalarField::constant(g, 0.0);

        // Constant stress.
        let s: StressField<f64> = StressField::new(
            ScalarField::constant(g, 2.0),
            ScalarField::constant(g, -1.0),
            ScalarField::constant(g, 0.5),
        )
        .unwrap();
        let (r1, r2) = equilibrium_residual(&s, sp).unwrap();
        assert!(r1.values().iter().all(|&v| v.abs() < 1e-13));
        assert!(r2.values().iter().all(|&v| v.abs() < 1e-13));

        // S_xx = X, S_xy = -Y: divergence-free.
        let s = StressField::new(x.clone(), zero.clone(), y.map(|v| -v)).unwrap();
        let (r1, r2) = equilibrium_residual(&s, sp).unwrap();
        assert!(r1.values().iter().all(|&v| v.abs() < 1e-12));
        assert!(r2.values().iter().all(|&v| v.abs() < 1e-12));

        // S_xx = X alone: R1 = 1, R2 = 0.
        let s = StressField::new(x, zero.clone(), zero).unwrap();
        let (r1, r2) = equilibrium_residual(&s, sp).unwrap();
        assert!(r1.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(r2.values().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn adjoint_matches_transpose() {
        // <D f, g> == <f, D^T g> for random-ish vectors.
        let (nx, ny) = (6, 5);
        let f: Vec<f64> = (0..nx * ny).map(|k| ((k * 37 + 11) % 17) as f64 - 8.0).collect();
        let gvec: Vec<f64> = (0..nx * ny).map(|k| ((k * 53 + 5) % 13) as f64 - 6.0).collect();
        let dx = 0.37;

        let mut df = vec![0.0; nx * ny];
        partial_x_raw(&f, nx, ny, dx, &mut df);
        let lhs: f64 = df.iter().zip(&gvec).map(|(a, b)| a * b).sum();
        let mut dtg = vec![0.0; nx * ny];
        partial_x_adjoint(&gvec, nx, ny, dx, &mut dtg);
        let rhs: f64 = f.iter().zip(&dtg).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));

        let mut df = vec![0.0; nx * ny];
        partial_y_raw(&f, nx, ny, dx, &mut df);
        let lhs: f64 = df.iter().zip(&gvec).map(|(a, b)| a * b).sum();
        let mut dtg = vec![0.0; nx * ny];
        partial_y_adjoint(&gvec, nx, ny, dx, &mut dtg);
        let rhs: f64 = f.iter().zip(&dtg).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    proptest! {
        #[test]
        fn linearity(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
            let g = geom(8, 6);
            let sp = FDSpacing { dx: 0.25, dy: 0.5 };
            let f = ScalarField::from_fn(g, |i, j| (((i * 7 + j * 13) as u64 * (seed + 1)) % 23) as f64);
            let h = ScalarField::from_fn(g, |i, j| (((i * 5 + j * 11) as u64 * (seed + 3)) % 19) as f64);
            let combo = ScalarField::from_fn(g, |i, j| a * f.at(i, j) + b * h.at(i, j));
            let d_combo = partial_x(&combo, sp);
            let df = partial_x(&f, sp);
            let dh = partial_x(&h, sp);
            for k in 0..g.len() {
                let want = a * df.values()[k] + b * dh.values()[k];
                prop_assert!((d_combo.values()[k] - want).abs() < 1e-9);
            }
        }

        #[test]
        fn mirror_antisymmetry(seed in 0u64..1000) {
            let g = geom(9, 4);
            let sp = FDSpacing { dx: 0.2, dy: 0.2 };
            let f = ScalarField::from_fn(g, |i, j| (((i * 3 + j * 17) as u64 * (seed + 7)) % 29) as f64);
            let mirrored = ScalarField::from_fn(g, |i, j| f.at(g.nx - 1 - i, j));
            let df = partial_x(&f, sp);
            let dm = partial_x(&mirrored, sp);
            for j in 0..g.ny {
                for i in 0..g.nx {
                    prop_assert!((dm.at(i, j) + df.at(g.nx - 1 - i, j)).abs() < 1e-12);
                }
            }
            let dy_f = partial_y(&f, sp);
            let dy_m = partial_y(&mirrored, sp);
            for j in 0..g.ny {
                for i in 0..g.nx {
                    prop_assert!((dy_m.at(i, j) - dy_f.at(g.nx - 1 - i, j)).abs() < 1e-12);
                }
            }
        }
    }
}
