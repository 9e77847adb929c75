use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::image::RgbMap;
use crate::io::ClicksRecord;
use crate::math::Rgb;
use crate::num::Real;
use crate::scene::MultiViewScene;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClickPoint {
    /// Camera id.
    pub view: u32,
    pub x: usize,
    pub y: usize,
}

/// Groups of clicked pixels, each group sharing one unknown albedo.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlbedoClickSet {
    pub groups: Vec<Vec<ClickPoint>>,
}

impl AlbedoClickSet {
    pub fn from_record(r: &ClicksRecord) -> Self {
        AlbedoClickSet {
            groups: r.groups.iter().map(|g| g.points.iter().map(|p| ClickPoint { view: p.view, x: p.x, y: p.y }).collect()).collect(),
        }
    }

    pub fn validate<T: Real>(&self, scene: &MultiViewScene<T>) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::InvalidArgument("no click groups".into()));
        }
        for (g, group) in self.groups.iter().enumerate() {
            if group.len() < 2 {
                return Err(Error::InvalidArgument(format!("click group {g} has fewer than 2 points")));
            }
            for p in group {
                let i = scene
                    .camera_index(p.view)
                    .ok_or_else(|| Error::InvalidArgument(format!("click group {g}: unknown camera {}", p.view)))?;
                let c = &scene.cameras[i];
                if p.x >= c.width || p.y >= c.height {
                    return Err(Error::InvalidArgument(format!("click group {g}: pixel ({}, {}) outside camera {}", p.x, p.y, p.view)));
                }
            }
        }
        Ok(())
    }
}

/// Measurements at one clicked pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct ClickSample<T> {
    pub group: usize,
    pub e_nc: Rgb<T>,
    /// Unit-emittance irradiance from each cluster.
    pub e_cluster: Vec<Rgb<T>>,
    pub image: Rgb<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LightSolve<T> {
    /// Per-cluster intensity `α_l`.
    pub alpha: Vec<Rgb<T>>,
    /// Per-group inverse albedo `β = 1 / a`.
    pub beta: Vec<Rgb<T>>,
    /// Residual norm per channel.
    pub residual: Rgb<T>,
    /// Condition number per channel.
    pub condition: [f64; 3],
}

/// Non-negative least squares, `argmin ‖A x − b‖` subject to `x ≥ 0`
/// (Lawson–Hanson active set).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm().max(1.0) * b.norm().max(1.0);
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let mut z = DVector::zeros(n);
        if cols.is_empty() {
            return z;
        }
        let sub = a.select_columns(&cols);
        let sol = sub.svd(true, true).solve(b, 1e-14).expect("svd computed with u and v");
        for (k, &j) in cols.iter().enumerate() {
            z[j] = sol[k];
        }
        z
    };
    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let z = solve_passive(&passive);
            if (0..n).filter(|&k| passive[k]).all(|k| z[k] > 0.0) {
                x = z;
                break;
            }
            let mut step = f64::INFINITY;
            for k in 0..n {
                if passive[k] && z[k] <= 0.0 {
                    step = step.min(x[k] / (x[k] - z[k]));
                }
            }
            x = &x + (z - &x) * step;
            for k in 0..n {
                if passive[k] && x[k] <= 1e-15 {
                    passive[k] = false;
                    x[k] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Solves `E_nc(p) + Σ_l α_l E_l(p) − β_g I(p) = 0` over all clicked points,
/// per channel, with `α, β ≥ 0`.
pub fn solve_light_system<T: Real>(samples: &[ClickSample<T>], clusters: usize, groups: usize) -> Result<LightSolve<T>> {
    let n = clusters + groups;
    let m = samples.len();
    let mut alpha = vec![Rgb::zero(); clusters];
    let mut beta = vec![Rgb::zero(); groups];
    let mut residual = Rgb::zero();
    let mut condition = [0.0; 3];
    for ch in 0..3 {
        let mut a = DMatrix::zeros(m, n);
        let mut b = DVector::zeros(m);
        for (r, s) in samples.iter().enumerate() {
            if s.group >= groups || s.e_cluster.len() != clusters {
                return Err(Error::InvalidArgument(format!("click sample {r} does not match {clusters} clusters / {groups} groups")));
            }
            for l in 0..clusters {
                a[(r, l)] = s.e_cluster[l][ch].as_f64();
            }
            a[(r, clusters + s.group)] = -s.image[ch].as_f64();
            b[r] = -s.e_nc[ch].as_f64();
        }
        let sv = a.clone().svd(false, false).singular_values;
        let mut values: Vec<f64> = sv.iter().copied().collect();
        values.sort_by(|x, y| y.total_cmp(x));
        let largest = values.first().copied().unwrap_or(0.0);
        let smallest = if m >= n { values.get(n - 1).copied().unwrap_or(0.0) } else { 0.0 };
        let cond = if smallest > 0.0 { largest / smallest } else { f64::INFINITY };
        if !(smallest > 1e-12 * largest.max(f64::MIN_POSITIVE)) || !cond.is_finite() {
            return Err(Error::IllConditioned { condition: cond, singular_values: values });
        }
        condition[ch] = cond;
        let x = nnls(&a, &b);
        for l in 0..clusters {
            let mut c = alpha[l].to_array();
            c[ch] = T::lit(x[l]);
            alpha[l] = Rgb::from_array(c);
        }
        for g in 0..groups {
            let mut c = beta[g].to_array();
            c[ch] = T::lit(x[clusters + g]);
            beta[g] = Rgb::from_array(c);
        }
        let mut c = residual.to_array();
        c[ch] = T::lit((&a * &x - &b).norm());
        residual = Rgb::from_array(c);
    }
    Ok(LightSolve { alpha, beta, residual, condition })
}

/// Reads the per-click measurements. `e_cluster` is indexed
/// `[cluster][view]`; views follow `scene.cameras`.
pub fn gather_click_samples<T: Real>(
    scene: &MultiViewScene<T>,
    e_nc: &[RgbMap<T>],
    e_cluster: &[Vec<RgbMap<T>>],
    clicks: &AlbedoClickSet,
) -> Result<Vec<ClickSample<T>>> {
    clicks.validate(scene)?;
    let mut out = Vec::new();
    for (g, group) in clicks.groups.iter().enumerate() {
        for p in group {
            let i = scene.camera_index(p.view).expect("validated");
            out.push(ClickSample {
                group: g,
                e_nc: *e_nc[i].get(p.x, p.y),
                e_cluster: e_cluster.iter().map(|per_view| *per_view[i].get(p.x, p.y)).collect(),
                image: *scene.images[i].pixels.get(p.x, p.y),
            });
        }
    }
    Ok(out)
}

/// Recovers cluster intensities from user clicks.
pub fn solve_clipped_lights<T: Real>(
    scene: &MultiViewScene<T>,
    e_nc: &[RgbMap<T>],
    e_cluster: &[Vec<RgbMap<T>>],
    clicks: &AlbedoClickSet,
) -> Result<LightSolve<T>> {
    let samples = gather_click_samples(scene, e_nc, e_cluster, clicks)?;
    solve_light_system(&samples, e_cluster.len(), clicks.groups.len())
}

/// `E_src = E_nc + Σ_l α_l ⊙ E_l`.
pub fn combine_source_irradiance<T: Real>(e_nc: &RgbMap<T>, e_cluster: &[&RgbMap<T>], alpha: &[Rgb<T>]) -> RgbMap<T> {
    let mut out = e_nc.clone();
    for (e, a) in e_cluster.iter().zip(alpha) {
        for (o, v) in out.pixels_mut().iter_mut().zip(e.pixels()) {
            *o += v.mul_elem(*a);
        }
    }
    out
}
