//! Grid geometry, field containers, isotropic elasticity algebra and
//! nondimensionalization.
//!
//! Conventions pinned here and relied on everywhere else:
//!
//! * fields are stored row-major with row index `j` counting from the
//!   **bottom** edge, so pixel `(i, j)` lives at `values[j * nx + i]`;
//! * shear fields hold the tensorial component `eps_xy`, never the
//!   engineering shear `2 eps_xy`; the factor 2 appears only inside the
//!   constitutive law.

use crate::scalar::Scalar;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Regular 2D pixel grid over a rectangular physical domain.
///
/// Pixel `(i, j)` maps to physical coordinates
/// `(i * length_x / (nx - 1), j * length_y / (ny - 1))`; `j = 0` is the
/// bottom edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeom {
    pub nx: usize,
    pub ny: usize,
    pub length_x: f64,
    pub length_y: f64,
}

impl GridGeom {
    pub fn new(nx: usize, ny: usize, length_x: f64, length_y: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::invalid(format!("grid must be at least 2x2, got {nx}x{ny}")));
        }
        if length_x <= 0.0 || length_y <= 0.0 {
            return Err(Error::invalid("domain lengths must be positive"));
        }
        Ok(GridGeom { nx, ny, length_x, length_y })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical coordinates of pixel `(i, j)`.
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (
            i as f64 * self.length_x / (self.nx - 1) as f64,
            j as f64 * self.length_y / (self.ny - 1) as f64,
        )
    }
}

/// A single real-valued quantity sampled on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T: Scalar> {
    geom: GridGeom,
    values: Vec<T>,
}

impl<T: Scalar> ScalarField<T> {
    pub fn new(geom: GridGeom, values: Vec<T>) -> Result<Self> {
        if values.len() != geom.len() {
            return Err(Error::invalid(format!(
                "field has {} values, geometry wants {}",
                values.len(),
                geom.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field contains non-finite values"));
        }
        Ok(ScalarField { geom, values })
    }

    pub fn constant(geom: GridGeom, value: T) -> Self {
        ScalarField { geom, values: vec![value; geom.len()] }
    }

    /// Builds a field by evaluating `f(i, j)` at every pixel.
    pub fn from_fn(geom: GridGeom, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(geom.len());
        for j in 0..geom.ny {
            for i in 0..geom.nx {
                values.push(f(i, j));
            }
        }
        ScalarField { geom, values }
    }

    pub fn geom(&self) -> GridGeom {
        self.geom
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[j * self.geom.nx + i]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        ScalarField {
            geom: self.geom,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a.max(v.abs()))
    }

    /// Converts the stored values into another scalar precision.
    pub fn cast<U: Scalar>(&self) -> ScalarField<U> {
        ScalarField {
            geom: self.geom,
            values: self.values.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }
}

/// Lamé parameter maps (Pa).
#[derive(Debug, Clone)]
pub struct MaterialField<T: Scalar> {
    pub lambda: ScalarField<T>,
    pub mu: ScalarField<T>,
}

impl<T: Scalar> MaterialField<T> {
    pub fn new(lambda: ScalarField<T>, mu: ScalarField<T>) -> Result<Self> {
        if lambda.geom() != mu.geom() {
            return Err(Error::invalid("lambda and mu geometries differ"));
        }
        if mu.values().iter().any(|&v| v <= T::zero())
            || lambda.values().iter().any(|&v| v <= T::zero())
        {
            return Err(Error::invalid("material requires lambda > 0 and mu > 0 everywhere"));
        }
        Ok(MaterialField { lambda, mu })
    }

    pub fn geom(&self) -> GridGeom {
        self.lambda.geom()
    }
}

/// Three components of a symmetric 2D tensor field.
///
/// `xy` stores the tensorial shear component.
#[derive(Debug, Clone)]
pub struct TensorField<T: Scalar> {
    pub xx: ScalarField<T>,
    pub yy: ScalarField<T>,
    pub xy: ScalarField<T>,
}

pub type StrainField<T> = TensorField<T>;
pub type StressField<T> = TensorField<T>;

impl<T: Scalar> TensorField<T> {
    pub fn new(xx: ScalarField<T>, yy: ScalarField<T>, xy: ScalarField<T>) -> Result<Self> {
        if xx.geom() != yy.geom() || xx.geom() != xy.geom() {
            return Err(Error::invalid("tensor components must share one geometry"));
        }
        Ok(TensorField { xx, yy, xy })
    }

    pub fn geom(&self) -> GridGeom {
        self.xx.geom()
    }

    pub fn cast<U: Scalar>(&self) -> TensorField<U> {
        TensorField {
            xx: self.xx.cast(),
            yy: self.yy.cast(),
            xy: self.xy.cast(),
        }
    }
}

/// Nondimensionalization scales: reference length and stress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    pub l0: f64,
    pub sigma0: f64,
}

/// Kinematic constraint applied to a whole edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeConstraint {
    Free,
    /// Zero normal displacement, zero shear traction (frictionless support).
    Roller,
    /// Zero displacement in both components.
    Fixed,
}

/// Loading and constraint of one edge. Traction targets are physical (Pa);
/// `None` means the component is unspecified (carries no boundary-loss term).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub normal_traction: Option<f64>,
    pub shear_traction: Option<f64>,
    pub constraint: EdgeConstraint,
}

impl EdgeSpec {
    pub fn free() -> Self {
        EdgeSpec { normal_traction: None, shear_traction: None, constraint: EdgeConstraint::Free }
    }

    pub fn traction(normal: f64, shear: f64) -> Self {
        EdgeSpec {
            normal_traction: Some(normal),
            shear_traction: Some(shear),
            constraint: EdgeConstraint::Free,
        }
    }

    pub fn roller() -> Self {
        EdgeSpec {
            normal_traction: None,
            shear_traction: Some(0.0),
            constraint: EdgeConstraint::Roller,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    Bottom,
    Top,
    Left,
    Right,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Bottom, Edge::Top, Edge::Left, Edge::Right];

    pub fn name(self) -> &'static str {
        match self {
            Edge::Bottom => "bottom",
            Edge::Top => "top",
            Edge::Left => "left",
            Edge::Right => "right",
        }
    }
}

/// Edge loading/constraint specification for the whole rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub bottom: EdgeSpec,
    pub top: EdgeSpec,
    pub left: EdgeSpec,
    pub right: EdgeSpec,
}

impl BoundarySpec {
    pub fn edge(&self, e: Edge) -> &EdgeSpec {
        match e {
            Edge::Bottom => &self.bottom,
            Edge::Top => &self.top,
            Edge::Left => &self.left,
            Edge::Right => &self.right,
        }
    }

    /// Checks the per-component exclusivity invariant: a constrained
    /// component must not also carry a traction target.
    pub fn validate(&self) -> Result<()> {
        for e in Edge::ALL {
            let s = self.edge(e);
            match s.constraint {
                EdgeConstraint::Fixed => {
                    if s.normal_traction.is_some() || s.shear_traction.is_some() {
                        return Err(Error::invalid(format!(
                            "{} edge is fixed but also specifies a traction",
                            e.name()
                        )));
                    }
                }
                EdgeConstraint::Roller => {
                    if s.normal_traction.is_some() {
                        return Err(Error::invalid(format!(
                            "{} edge roller constrains the normal component, \
                             normal traction must be unspecified",
                            e.name()
                        )));
                    }
                }
                EdgeConstraint::Free => {}
            }
        }
        Ok(())
    }
}

/// Lamé parameters from engineering constants:
/// `lambda = E nu / ((1 + nu)(1 - 2 nu))`, `mu = E / (2 (1 + nu))`.
pub fn lame_from_engineering<T: Scalar>(e: T, nu: T) -> Result<(T, T)> {
    if e <= T::zero() {
        return Err(Error::invalid("elastic modulus must be positive"));
    }
    let half = T::from_f64(0.5);
    if nu <= T::zero() || nu >= half {
        return Err(Error::invalid("Poisson ratio must lie in (0, 0.5)"));
    }
    let one = T::one();
    let two = T::from_f64(2.0);
    let lambda = e * nu / ((one + nu) * (one - two * nu));
    let mu = e / (two * (one + nu));
    Ok((lambda, mu))
}

/// Engineering constants from Lamé parameters:
/// `E = mu (3 lambda + 2 mu) / (lambda + mu)`, `nu = lambda / (2 (lambda + mu))`.
pub fn engineering_from_lame<T: Scalar>(lambda: T, mu: T) -> Result<(T, T)> {
    if mu <= T::zero() {
        return Err(Error::invalid("mu must be positive"));
    }
    if lambda + mu <= T::zero() {
        return Err(Error::invalid("lambda + mu must be positive"));
    }
    let two = T::from_f64(2.0);
    let three = T::from_f64(3.0);
    let e = mu * (three * lambda + two * mu) / (lambda + mu);
    let nu = lambda / (two * (lambda + mu));
    Ok((e, nu))
}

/// Plane-stress conversion applied to plane-strain constants: both `E` and
/// `nu` are divided by `1 - nu^2`.
///
/// Pure post-processing; never invoked in the default plane-strain pipeline.
pub fn plane_stress_convert<T: Scalar>(e_ps: T, nu_ps: T) -> Result<(T, T)> {
    if nu_ps.abs() >= T::one() {
        return Err(Error::invalid("|nu| must be < 1 for the plane-stress conversion"));
    }
    let d = T::one() - nu_ps * nu_ps;
    Ok((e_ps / d, nu_ps / d))
}

/// Dimensionless isotropic constitutive law:
/// `S_xx = (2M + L) e_xx + L e_yy`, `S_yy = (2M + L) e_yy + L e_xx`,
/// `S_xy = 2 M e_xy`.
pub fn constitutive_stress<T: Scalar>(
    m: &ScalarField<T>,
    lambda: &ScalarField<T>,
    strain: &StrainField<T>,
) -> Result<StressField<T>> {
    let geom = strain.geom();
    if m.geom() != geom || lambda.geom() != geom {
        return Err(Error::invalid("constitutive inputs must share one geometry"));
    }
    let two = T::from_f64(2.0);
    let n = geom.len();
    let mut sxx = Vec::with_capacity(n);
    let mut syy = Vec::with_capacity(n);
    let mut sxy = Vec::with_capacity(n);
    for k in 0..n {
        let mk = m.values()[k];
        let lk = lambda.values()[k];
        let exx = strain.xx.values()[k];
        let eyy = strain.yy.values()[k];
        let exy = strain.xy.values()[k];
        sxx.push((two * mk + lk) * exx + lk * eyy);
        syy.push((two * mk + lk) * eyy + lk * exx);
        sxy.push(two * mk * exy);
    }
    Ok(StressField {
        xx: ScalarField { geom, values: sxx },
        yy: ScalarField { geom, values: syy },
        xy: ScalarField { geom, values: sxy },
    })
}

/// Reference scales from the geometry and traction boundary:
/// `l0` is the mean of the two side lengths, `sigma0` the maximum absolute
/// specified normal traction over all edges.
pub fn compute_scales(geom: &GridGeom, bc: &BoundarySpec) -> Result<Scales> {
    let mut sigma0 = 0.0f64;
    for e in Edge::ALL {
        if let Some(t) = bc.edge(e).normal_traction {
            sigma0 = sigma0.max(t.abs());
        }
    }
    if sigma0 == 0.0 {
        return Err(Error::invalid(
            "all normal tractions are zero or unspecified; the problem has no stress scale",
        ));
    }
    Ok(Scales { l0: 0.5 * (geom.length_x + geom.length_y), sigma0 })
}

/// Result of mapping dimensionless Lamé maps back to engineering constants.
///
/// Pixels with `M <= 0` or `L + M <= 0` have no admissible conversion; they
/// are masked out (and filled with zero), never clamped.
#[derive(Debug, Clone)]
pub struct Redimensionalized<T: Scalar> {
    pub e: ScalarField<T>,
    pub nu: ScalarField<T>,
    /// `true` where the conversion is valid.
    pub mask: Vec<bool>,
}

/// Per-pixel `engineering_from_lame(L * sigma0, M * sigma0)`.
pub fn redimensionalize<T: Scalar>(
    m: &ScalarField<T>,
    lambda: &ScalarField<T>,
    scales: Scales,
) -> Result<Redimensionalized<T>> {
    let geom = m.geom();
    if lambda.geom() != geom {
        return Err(Error::invalid("M and Lambda geometries differ"));
    }
    let s0 = T::from_f64(scales.sigma0);
    let n = geom.len();
    let mut e = Vec::with_capacity(n);
    let mut nu = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    for k in 0..n {
        let mu = m.values()[k] * s0;
        let la = lambda.values()[k] * s0;
        if mu > T::zero() && la + mu > T::zero() {
            let (ek, nk) = engineering_from_lame(la, mu)?;
            e.push(ek);
            nu.push(nk);
            mask.push(true);
        } else {
            e.push(T::zero());
            nu.push(T::zero());
            mask.push(false);
        }
    }
    Ok(Redimensionalized {
        e: ScalarField { geom, values: e },
        nu: ScalarField { geom, values: nu },
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn lame_from_engineering_examples() {
        let (la, mu) = lame_from_engineering(2.5, 0.25).unwrap();
        assert!(close(la, 1.0, 1e-14) && close(mu, 1.0, 1e-14));

        let (la, mu) = lame_from_engineering(2000.0, 0.35).unwrap();
        assert!(close(la, 1728.395061728395, 1e-12));
        assert!(close(mu, 740.7407407407408, 1e-12));

        // nu -> 0 limit: lambda vanishes.
        let (la, mu): (f64, f64) = lame_from_engineering(1.0, 1e-9).unwrap();
        assert!(la.abs() < 1e-8);
        assert!(close(mu, 0.5, 1e-8));
    }

    #[test]
    fn lame_from_engineering_rejects_bad_inputs() {
        assert!(lame_from_engineering(-1.0, 0.3).is_err());
        assert!(lame_from_engineering(1.0, 0.0).is_err());
        assert!(lame_from_engineering(1.0, 0.5).is_err());
        assert!(lame_from_engineering(1.0, 0.7).is_err());
    }

    #[test]
    fn engineering_from_lame_examples() {
        let (e, nu) = engineering_from_lame(1.0, 1.0).unwrap();
        assert!(close(e, 2.5, 1e-14) && close(nu, 0.25, 1e-14));

        let (e, nu) = engineering_from_lame(0.0f64, 0.5).unwrap();
        assert!(close(e, 1.0, 1e-14) && nu == 0.0);

        let (e, nu) = engineering_from_lame(1728.395061728395, 740.7407407407408).unwrap();
        assert!(close(e, 2000.0, 1e-12) && close(nu, 0.35, 1e-12));

        assert!(engineering_from_lame(-2.0, 1.0).is_err());
        assert!(engineering_from_lame(1.0, 0.0).is_err());
    }

    #[test]
    fn round_trip_engineering_lame() {
        for &e in &[0.1e3, 1.0e3, 7.3e3, 100.0e3] {
            for &nu in &[0.01, 0.25, 0.49] {
                let (la, mu) = lame_from_engineering(e, nu).unwrap();
                let (e2, nu2) = engineering_from_lame(la, mu).unwrap();
                assert!(close(e2, e, 1e-12), "E {e} -> {e2}");
                assert!(close(nu2, nu, 1e-12), "nu {nu} -> {nu2}");
            }
        }
    }

    #[test]
    fn plane_stress_convert_examples() {
        // Conversion divides both quantities by 1 - nu^2.
        let (e, nu) = plane_stress_convert(1.0, 0.0).unwrap();
        assert!(e == 1.0 && nu == 0.0);

        let (e, nu) = plane_stress_convert(2.0, 0.5).unwrap();
        assert!(close(e, 2.0 / 0.75, 1e-14) && close(nu, 0.5 / 0.75, 1e-14));

        let (e, nu) = plane_stress_convert(1.0, 0.3).unwrap();
        assert!(close(e, 1.0989010989010988, 1e-12));
        assert!(close(nu, 0.32967032967032966, 1e-12));

        assert!(plane_stress_convert(1.0, 1.0).is_err());
        assert!(plane_stress_convert(1.0, -1.2).is_err());
    }

    fn uniform_strain(geom: GridGeom, exx: f64, eyy: f64, exy: f64) -> StrainField<f64> {
        StrainField::new(
            ScalarField::constant(geom, exx),
            ScalarField::constant(geom, eyy),
            ScalarField::constant(geom, exy),
        )
        .unwrap()
    }

    #[test]
    fn constitutive_stress_examples() {
        let geom = GridGeom::new(4, 3, 1.0, 1.0).unwrap();
        let m = ScalarField::constant(geom, 1.0);
        let l = ScalarField::constant(geom, 1.0);

        let s = constitutive_stress(&m, &l, &uniform_strain(geom, 1.0, 1.0, 0.0)).unwrap();
        assert!(s.xx.values().iter().all(|&v| v == 4.0));
        assert!(s.yy.values().iter().all(|&v| v == 4.0));
        assert!(s.xy.values().iter().all(|&v| v == 0.0));

        let s = constitutive_stress(&m, &l, &uniform_strain(geom, 0.0, 0.0, 0.0)).unwrap();
        assert!(s.xx.values().iter().all(|&v| v == 0.0));

        let l0 = ScalarField::constant(geom, 0.0);
        let s = constitutive_stress(&m, &l0, &uniform_strain(geom, 0.0, 0.0, 0.5)).unwrap();
        assert!(s.xy.values().iter().all(|&v| v == 1.0));
        assert!(s.xx.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constitutive_swap_symmetry_and_linearity() {
        let geom = GridGeom::new(3, 3, 1.0, 1.0).unwrap();
        let m = ScalarField::from_fn(geom, |i, j| 1.0 + 0.1 * (i + 2 * j) as f64);
        let l = ScalarField::from_fn(geom, |i, j| 0.5 + 0.2 * (2 * i + j) as f64);
        let e1 = uniform_strain(geom, 0.3, -0.7, 0.2);
        let swapped = uniform_strain(geom, -0.7, 0.3, 0.2);

        let s = constitutive_stress(&m, &l, &e1).unwrap();
        let ss = constitutive_stress(&m, &l, &swapped).unwrap();
        assert_eq!(s.xx.values(), ss.yy.values());
        assert_eq!(s.yy.values(), ss.xx.values());
        assert_eq!(s.xy.values(), ss.xy.values());

        // Linearity in strain.
        let e2 = uniform_strain(geom, 0.6, -1.4, 0.4);
        let s2 = constitutive_stress(&m, &l, &e2).unwrap();
        for k in 0..geom.len() {
            assert!((s2.xx.values()[k] - 2.0 * s.xx.values()[k]).abs() < 1e-12);
            assert!((s2.xy.values()[k] - 2.0 * s.xy.values()[k]).abs() < 1e-12);
        }
    }

    fn bc_top_traction(t: f64) -> BoundarySpec {
        BoundarySpec {
            bottom: EdgeSpec::roller(),
            top: EdgeSpec::traction(t, 0.0),
            left: EdgeSpec::free(),
            right: EdgeSpec::free(),
        }
    }

    #[test]
    fn compute_scales_examples() {
        let geom = GridGeom::new(5, 5, 2.0, 1.0).unwrap();
        let s = compute_scales(&geom, &bc_top_traction(100.0)).unwrap();
        assert_eq!(s.l0, 1.5);
        assert_eq!(s.sigma0, 100.0);

        let geom = GridGeom::new(5, 5, 1.0, 1.0).unwrap();
        let mut bc = bc_top_traction(50.0);
        bc.bottom = EdgeSpec::traction(-80.0, 0.0);
        let s = compute_scales(&geom, &bc).unwrap();
        assert_eq!(s.sigma0, 80.0);

        let geom = GridGeom::new(4, 4, 3.0, 3.0).unwrap();
        let s = compute_scales(&geom, &bc_top_traction(-7.0)).unwrap();
        assert_eq!(s.l0, 3.0);
        assert_eq!(s.sigma0, 7.0);

        let mut bc = bc_top_traction(0.0);
        bc.top.normal_traction = Some(0.0);
        assert!(compute_scales(&geom, &bc).is_err());
    }

    #[test]
    fn redimensionalize_examples() {
        let geom = GridGeom::new(3, 3, 1.0, 1.0).unwrap();
        let scales = Scales { l0: 1.0, sigma0: 1000.0 };
        let r = redimensionalize(
            &ScalarField::constant(geom, 0.5),
            &ScalarField::constant(geom, 0.0),
            scales,
        )
        .unwrap();
        assert!(r.mask.iter().all(|&m| m));
        assert!(r.e.values().iter().all(|&v| close(v, 1000.0, 1e-12)));
        assert!(r.nu.values().iter().all(|&v| v == 0.0));

        let r = redimensionalize(
            &ScalarField::constant(geom, 1.0),
            &ScalarField::constant(geom, 1.0),
            Scales { l0: 1.0, sigma0: 2.0 },
        )
        .unwrap();
        assert!(r.e.values().iter().all(|&v| close(v, 5.0, 1e-12)));
        assert!(r.nu.values().iter().all(|&v| close(v, 0.25, 1e-12)));
    }

    #[test]
    fn redimensionalize_nu_scale_invariance_and_mask() {
        let geom = GridGeom::new(3, 2, 1.0, 1.0).unwrap();
        let m = ScalarField::from_fn(geom, |i, j| 0.5 + (i + j) as f64);
        let l = ScalarField::from_fn(geom, |i, j| 0.2 + (2 * i + j) as f64);
        let c = 10.0;
        let a = redimensionalize(&m, &l, Scales { l0: 1.0, sigma0: 30.0 }).unwrap();
        let b = redimensionalize(&m.map(|v| c * v), &l.map(|v| c * v), Scales {
            l0: 1.0,
            sigma0: 3.0,
        })
        .unwrap();
        for k in 0..geom.len() {
            assert!(close(a.e.values()[k], b.e.values()[k], 1e-12));
            assert!(close(a.nu.values()[k], b.nu.values()[k], 1e-12));
        }

        // Invalid pixels are masked, not clamped.
        let mut mvals = vec![1.0; geom.len()];
        mvals[2] = -0.5;
        let m = ScalarField::new(geom, mvals).unwrap();
        let r = redimensionalize(&m, &ScalarField::constant(geom, 0.3), Scales {
            l0: 1.0,
            sigma0: 1.0,
        })
        .unwrap();
        assert!(!r.mask[2]);
        assert_eq!(r.mask.iter().filter(|&&x| x).count(), geom.len() - 1);
    }

    #[test]
    fn boundary_spec_validation() {
        let mut bc = bc_top_traction(10.0);
        assert!(bc.validate().is_ok());
        bc.bottom.normal_traction = Some(1.0); // roller + normal traction
        assert!(bc.validate().is_err());
    }
}
