//! Star-shaped unsafe sets on S^n: membership, separation functions,
//! closest boundary points, outward normals and kernel-visibility checks.
//!
//! An obstacle is a radial graph about its kernel point: a point at angle
//! `theta` from the kernel in tangent direction `psi` belongs to the set iff
//! `theta <= rho(psi)`, where `rho` is the angular-extent profile. Keeping the
//! profile smooth and bounded inside (0, pi/2) makes the sets star-shaped with
//! a C² boundary by construction.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    self, sphere_angle_raw, tangent_basis, unit_tangent_toward, UnitPoint,
};

/// Boundary grid used for coarse closest-point scans.
pub const BOUNDARY_GRID: usize = 720;
/// Grid used to validate profile bounds at construction.
pub const PROFILE_VALIDATION_GRID: usize = 1024;
/// Profiles must keep `rho` above this floor...
pub const RHO_MIN: f64 = 1e-3;
/// ...and below `pi/2` minus this margin, so the kernel is interior and the
/// kernel antipode stays outside.
pub const RHO_MARGIN: f64 = 1e-3;
/// Golden-section refinement tolerance on the boundary parameter.
pub const PARAM_TOL: f64 = 1e-10;
/// Two boundary minima closer than this in value...
pub const AMBIGUITY_VALUE_TOL: f64 = 1e-6;
/// ...but farther apart than this on the boundary flag an ambiguous
/// closest-point query.
pub const AMBIGUITY_SEPARATION: f64 = 0.1;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Angular-extent profile of a star obstacle.
///
/// `Cap` is a constant-extent spherical cap and works in any dimension.
/// `Fourier` is a truncated Fourier series over the boundary parameter
/// `psi in [0, 2*pi)` and is only available on S² (ambient dimension 3).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RadialProfile {
    Cap { extent: f64 },
    Fourier { a0: f64, terms: Vec<(f64, f64)> },
}

impl RadialProfile {
    pub fn eval(&self, psi: f64) -> f64 {
        match self {
            RadialProfile::Cap { extent } => *extent,
            RadialProfile::Fourier { a0, terms } => {
                let mut rho = *a0;
                for (k, (a, b)) in terms.iter().enumerate() {
                    let kw = (k + 1) as f64 * psi;
                    rho += a * kw.cos() + b * kw.sin();
                }
                rho
            }
        }
    }

    fn is_cap(&self) -> bool {
        matches!(self, RadialProfile::Cap { .. })
    }
}

/// Result of a closest-point query against one obstacle.
#[derive(Debug, Clone)]
pub struct BoundaryHit {
    /// Spherical distance arccos(xᵀΠ).
    pub distance: f64,
    /// Closest boundary point Π.
    pub point: DVector<f64>,
    /// True when a second minimizer of equal value exists elsewhere on the
    /// boundary; the lowest-parameter one is returned.
    pub ambiguous: bool,
}

/// A star-shaped unsafe set: kernel point plus radial profile.
#[derive(Debug, Clone)]
pub struct StarObstacle {
    kernel: UnitPoint,
    profile: RadialProfile,
    // orthonormal tangent frame at the kernel fixing psi = atan2(u·e2, u·e1)
    frame_e1: DVector<f64>,
    frame_e2: Option<DVector<f64>>,
    // cached boundary grid, flat row-major (BOUNDARY_GRID x dim); empty for
    // caps in dimension != 3
    grid: Vec<f64>,
    rho_max: f64,
    rho_min: f64,
}

impl StarObstacle {
    pub fn new(kernel: UnitPoint, profile: RadialProfile) -> Result<Self> {
        let dim = kernel.dim();
        if !profile.is_cap() && dim != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: dim });
        }
        // profile bounds on a dense grid keep the kernel interior and the
        // antipode outside
        let mut rho_max = f64::MIN;
        let mut rho_min = f64::MAX;
        for j in 0..PROFILE_VALIDATION_GRID {
            let psi = 2.0 * std::f64::consts::PI * j as f64 / PROFILE_VALIDATION_GRID as f64;
            let rho = profile.eval(psi);
            rho_max = rho_max.max(rho);
            rho_min = rho_min.min(rho);
        }
        if rho_min <= RHO_MIN || rho_max >= std::f64::consts::FRAC_PI_2 - RHO_MARGIN {
            return Err(Error::InvalidScenario(vec![format!(
                "obstacle profile range [{rho_min:.6}, {rho_max:.6}] outside ({RHO_MIN}, pi/2 - {RHO_MARGIN})"
            )]));
        }

        let basis = tangent_basis(&kernel);
        let frame_e1 = basis.column(0).into_owned();
        let frame_e2 = if dim == 3 {
            Some(basis.column(1).into_owned())
        } else {
            None
        };

        let mut obstacle = Self {
            kernel,
            profile,
            frame_e1,
            frame_e2,
            grid: Vec::new(),
            rho_max,
            rho_min,
        };
        if dim == 3 {
            let mut grid = Vec::with_capacity(BOUNDARY_GRID * dim);
            for j in 0..BOUNDARY_GRID {
                let psi = 2.0 * std::f64::consts::PI * j as f64 / BOUNDARY_GRID as f64;
                let b = obstacle.boundary_point(psi);
                grid.extend_from_slice(b.as_slice());
            }
            obstacle.grid = grid;
        }
        Ok(obstacle)
    }

    pub fn kernel(&self) -> &UnitPoint {
        &self.kernel
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }

    /// Boundary point at parameter `psi` (ambient dimension 3 only).
    pub fn boundary_point(&self, psi: f64) -> DVector<f64> {
        let e2 = self
            .frame_e2
            .as_ref()
            .expect("boundary parameterization requires ambient dimension 3");
        let rho = self.profile.eval(psi);
        let u = &self.frame_e1 * psi.cos() + e2 * psi.sin();
        self.kernel.coords() * rho.cos() + u * rho.sin()
    }

    /// Direction parameter of `x` seen from the kernel; `None` when `x` is
    /// aligned with ±kernel.
    pub fn direction_angle(&self, x: &DVector<f64>) -> Option<f64> {
        let e2 = self.frame_e2.as_ref()?;
        let a = x.dot(&self.frame_e1);
        let b = x.dot(e2);
        if a.hypot(b) < 1e-14 {
            return None;
        }
        Some(b.atan2(a).rem_euclid(2.0 * std::f64::consts::PI))
    }

    /// Closed membership test: angle from the kernel at most the profile
    /// extent in that direction. The kernel antipode is never contained.
    pub fn contains(&self, x: &UnitPoint) -> bool {
        self.contains_raw(x.coords(), false)
    }

    fn contains_raw(&self, x: &DVector<f64>, strict: bool) -> bool {
        let theta = sphere_angle_raw(self.kernel.coords(), x);
        if theta > std::f64::consts::FRAC_PI_2 {
            // profile extents stay below pi/2
            return false;
        }
        let rho = match &self.profile {
            RadialProfile::Cap { extent } => *extent,
            RadialProfile::Fourier { .. } => match self.direction_angle(x) {
                Some(psi) => self.profile.eval(psi),
                // at the kernel itself every direction is interior
                None => return theta < 1e-12,
            },
        };
        if strict {
            theta < rho
        } else {
            theta <= rho
        }
    }

    /// True when `x` is in the open interior (boundary points excluded).
    pub fn strictly_inside_raw(&self, x: &DVector<f64>) -> bool {
        self.contains_raw(x, true)
    }

    /// Coarse spherical distance from `x` to the set: analytic for caps,
    /// best-of-grid for Fourier profiles. Only valid outside the set.
    pub fn distance_coarse(&self, x: &DVector<f64>) -> f64 {
        match &self.profile {
            RadialProfile::Cap { extent } => {
                (sphere_angle_raw(self.kernel.coords(), x) - extent).max(0.0)
            }
            RadialProfile::Fourier { .. } => {
                let (best, _) = self.grid_best_dot(x);
                best.clamp(-1.0, 1.0).acos()
            }
        }
    }

    fn grid_best_dot(&self, x: &DVector<f64>) -> (f64, usize) {
        let dim = self.dim();
        let xs = x.as_slice();
        let mut best = f64::MIN;
        let mut best_idx = 0;
        for j in 0..BOUNDARY_GRID {
            let row = &self.grid[j * dim..(j + 1) * dim];
            let mut dot = 0.0;
            for (a, b) in row.iter().zip(xs) {
                dot += a * b;
            }
            if dot > best {
                best = dot;
                best_idx = j;
            }
        }
        (best, best_idx)
    }

    fn grid_dot(&self, x: &DVector<f64>, j: usize) -> f64 {
        let dim = self.dim();
        let row = &self.grid[j * dim..(j + 1) * dim];
        row.iter().zip(x.as_slice()).map(|(a, b)| a * b).sum()
    }

    fn golden_max_dot(&self, x: &DVector<f64>, mut lo: f64, mut hi: f64) -> (f64, f64) {
        let f = |psi: f64| x.dot(&self.boundary_point(psi));
        let mut c = hi - GOLDEN * (hi - lo);
        let mut d = lo + GOLDEN * (hi - lo);
        let mut fc = f(c);
        let mut fd = f(d);
        while hi - lo > PARAM_TOL {
            if fc > fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - GOLDEN * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + GOLDEN * (hi - lo);
                fd = f(d);
            }
        }
        let psi = 0.5 * (lo + hi);
        (psi, f(psi))
    }

    /// Refined closest-point query. Precondition: `x` not strictly inside.
    pub fn closest_point_raw(&self, x: &DVector<f64>) -> Result<BoundaryHit> {
        if self.strictly_inside_raw(x) {
            return Err(Error::InfeasibleState { obstacle: 0 });
        }
        match &self.profile {
            RadialProfile::Cap { extent } => self.cap_closest(x, *extent),
            RadialProfile::Fourier { .. } => Ok(self.fourier_closest(x)),
        }
    }

    fn cap_closest(&self, x: &DVector<f64>, extent: f64) -> Result<BoundaryHit> {
        let theta = sphere_angle_raw(self.kernel.coords(), x);
        let ambiguous = theta > std::f64::consts::PI - geometry::ANTIPODAL_EPS;
        let u = if ambiguous || theta < geometry::COINCIDENT_EPS {
            // every rim point is equidistant; pick the frame direction
            self.frame_e1.clone()
        } else {
            (x - self.kernel.coords() * theta.cos()) / theta.sin()
        };
        let point = self.kernel.coords() * extent.cos() + u * extent.sin();
        let distance = sphere_angle_raw(x, &point);
        if ambiguous {
            log::warn!("closest-point query ambiguous: point antipodal to cap kernel");
        }
        Ok(BoundaryHit {
            distance,
            point,
            ambiguous,
        })
    }

    fn fourier_closest(&self, x: &DVector<f64>) -> BoundaryHit {
        let step = 2.0 * std::f64::consts::PI / BOUNDARY_GRID as f64;
        let (_, best_idx) = self.grid_best_dot(x);
        let lo = (best_idx as f64 - 1.0) * step;
        let hi = (best_idx as f64 + 1.0) * step;
        let (mut psi_star, mut dot_star) = self.golden_max_dot(x, lo, hi);
        psi_star = psi_star.rem_euclid(2.0 * std::f64::consts::PI);
        let mut point = self.boundary_point(psi_star);
        let mut ambiguous = false;

        // other grid-scale local maxima competing within the value tolerance
        let d_star = dot_star.clamp(-1.0, 1.0).acos();
        for j in 0..BOUNDARY_GRID {
            if j == best_idx {
                continue;
            }
            let prev = self.grid_dot(x, (j + BOUNDARY_GRID - 1) % BOUNDARY_GRID);
            let next = self.grid_dot(x, (j + 1) % BOUNDARY_GRID);
            let here = self.grid_dot(x, j);
            if here < prev || here <= next {
                continue;
            }
            // coarse pre-filter before paying for a refinement
            if here.clamp(-1.0, 1.0).acos() > d_star + 1e-3 {
                continue;
            }
            let ljo = (j as f64 - 1.0) * step;
            let lhi = (j as f64 + 1.0) * step;
            let (psi_k, dot_k) = self.golden_max_dot(x, ljo, lhi);
            let psi_k = psi_k.rem_euclid(2.0 * std::f64::consts::PI);
            let d_k = dot_k.clamp(-1.0, 1.0).acos();
            if (d_k - d_star).abs() < AMBIGUITY_VALUE_TOL {
                let candidate = self.boundary_point(psi_k);
                if sphere_angle_raw(&candidate, &point) > AMBIGUITY_SEPARATION {
                    ambiguous = true;
                    log::warn!(
                        "closest-point query ambiguous: minima at psi = {psi_star:.6} and {psi_k:.6}"
                    );
                    if psi_k < psi_star {
                        psi_star = psi_k;
                        dot_star = dot_k;
                        point = candidate;
                    }
                }
            }
        }
        BoundaryHit {
            distance: dot_star.clamp(-1.0, 1.0).acos(),
            point,
            ambiguous,
        }
    }

    /// Unit outward normal at `x`: P(x)(x − Π)/‖·‖.
    pub fn outward_normal(&self, x: &UnitPoint) -> Result<DVector<f64>> {
        let hit = self.closest_point_raw(x.coords())?;
        let v = geometry::project_raw(x.coords(), &(x.coords() - &hit.point));
        let norm = v.norm();
        if norm <= 1e-9 {
            return Err(Error::DegenerateProjection);
        }
        Ok(v / norm)
    }

    /// Deterministic boundary sample points, used for separation validation
    /// and property checks.
    pub fn boundary_samples(&self, count: usize) -> Vec<DVector<f64>> {
        let dim = self.dim();
        if dim == 3 {
            (0..count)
                .map(|j| {
                    let psi = 2.0 * std::f64::consts::PI * j as f64 / count as f64;
                    self.boundary_point(psi)
                })
                .collect()
        } else {
            // rim of a cap in general dimension: kernel-orthogonal directions
            // from a deterministic RNG
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
            let extent = match &self.profile {
                RadialProfile::Cap { extent } => *extent,
                RadialProfile::Fourier { .. } => unreachable!(),
            };
            (0..count)
                .map(|_| {
                    let u = loop {
                        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0f64));
                        let t = geometry::project_raw(self.kernel.coords(), &v);
                        let n = t.norm();
                        if n > 1e-6 {
                            break t / n;
                        }
                    };
                    self.kernel.coords() * extent.cos() + u * extent.sin()
                })
                .collect()
        }
    }

    /// Samples the tube `d in (0, delta1]` and checks that the outward normal
    /// never makes an obtuse angle with the direction away from the kernel.
    ///
    /// Radial offsets are swept past `delta1`: for non-convex profiles the
    /// separation at a sample can be far smaller than its radial offset, so
    /// the tube membership is decided from the recomputed distance.
    pub fn validate_assumption2(&self, delta1: f64, samples: usize) -> Assumption2Report {
        let levels = 24usize.min(samples.max(1));
        let n_dir = (samples / levels).max(1);
        let s_max =
            (self.rho_max - self.rho_min + delta1).min(std::f64::consts::FRAC_PI_2 - self.rho_max);
        // log-spaced offsets: violations concentrate in a thin layer at the
        // boundary where the wall normal tilts back toward the kernel
        let s_min = (1e-4 * delta1).min(s_max / 2.0);
        let ratio = (s_max / s_min).powf(1.0 / (levels.max(2) - 1) as f64);
        let mut min_inner = f64::MAX;
        let mut worst = None;
        let mut used = 0usize;

        for i in 0..n_dir {
            let (u, rho) = match &self.profile {
                RadialProfile::Fourier { .. } => {
                    let psi = 2.0 * std::f64::consts::PI * i as f64 / n_dir as f64;
                    let e2 = self.frame_e2.as_ref().unwrap();
                    let u = &self.frame_e1 * psi.cos() + e2 * psi.sin();
                    (u, self.profile.eval(psi))
                }
                RadialProfile::Cap { extent } => {
                    let dirs = self.boundary_samples(n_dir);
                    let b = &dirs[i];
                    let u = (b - self.kernel.coords() * extent.cos()) / extent.sin();
                    (u, *extent)
                }
            };
            for j in 0..levels {
                let s = s_min * ratio.powi(j as i32);
                let angle = rho + s;
                let x = self.kernel.coords() * angle.cos() + &u * angle.sin();
                let hit = match self.closest_point_raw(&x) {
                    Ok(h) => h,
                    Err(_) => continue,
                };
                if hit.distance <= 0.0 || hit.distance > delta1 {
                    continue;
                }
                used += 1;
                let pn = geometry::project_raw(&x, &(&x - &hit.point));
                let n_norm = pn.norm();
                if n_norm <= 1e-12 {
                    continue;
                }
                let n = pn / n_norm;
                let away = geometry::project_raw(&x, &(&x - self.kernel.coords()));
                let inner = n.dot(&away);
                if inner < min_inner {
                    min_inner = inner;
                    if inner <= 0.0 {
                        worst = Some(x.as_slice().to_vec());
                    }
                }
            }
        }
        Assumption2Report {
            holds: min_inner > 0.0,
            samples: used,
            min_inner,
            worst_point: worst,
        }
    }
}

/// Outcome of [`StarObstacle::validate_assumption2`].
#[derive(Debug, Clone)]
pub struct Assumption2Report {
    pub holds: bool,
    pub samples: usize,
    pub min_inner: f64,
    pub worst_point: Option<Vec<f64>>,
}

/// Which separation function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SeparationVariant {
    #[default]
    Spherical,
    Chordal,
    Product,
}

/// Per-obstacle distances from one survey of the field.
#[derive(Debug, Clone)]
pub struct Survey {
    /// Spherical distance to each obstacle; entries below the refine cutoff
    /// are refined, the rest are grid-accurate.
    pub distances: Vec<f64>,
    pub nearest: usize,
}

impl Survey {
    pub fn nearest_distance(&self) -> f64 {
        self.distances[self.nearest]
    }

    /// Union separation in the requested variant, derived from the
    /// per-obstacle spherical distances.
    pub fn separation(&self, variant: SeparationVariant) -> f64 {
        match variant {
            SeparationVariant::Spherical => self.nearest_distance(),
            SeparationVariant::Chordal => 1.0 - self.nearest_distance().cos(),
            SeparationVariant::Product => self.distances.iter().product(),
        }
    }
}

/// An ordered collection of pairwise-separated star obstacles.
#[derive(Debug, Clone, Default)]
pub struct ObstacleField {
    obstacles: Vec<StarObstacle>,
}

impl ObstacleField {
    pub fn new(obstacles: Vec<StarObstacle>) -> Self {
        Self { obstacles }
    }

    pub fn obstacles(&self) -> &[StarObstacle] {
        &self.obstacles
    }

    pub fn len(&self) -> usize {
        self.obstacles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    /// Index of the obstacle whose interior contains `x`, if any.
    pub fn feasibility_raw(&self, x: &DVector<f64>) -> Option<usize> {
        self.obstacles
            .iter()
            .position(|o| o.strictly_inside_raw(x))
    }

    /// Per-obstacle distance survey. Distances below `refine_cutoff` are
    /// golden-section refined; farther ones keep grid accuracy (≈4e-4 rad).
    ///
    /// Errors when `x` lies strictly inside some obstacle.
    pub fn survey_raw(&self, x: &DVector<f64>, refine_cutoff: f64) -> Result<Survey> {
        let mut distances = Vec::with_capacity(self.obstacles.len());
        let mut nearest = 0usize;
        let mut best = f64::MAX;
        for (i, obs) in self.obstacles.iter().enumerate() {
            // cheap bounding-cap test before the interior check
            let theta = sphere_angle_raw(obs.kernel.coords(), x);
            if theta <= obs.rho_max && obs.strictly_inside_raw(x) {
                return Err(Error::InfeasibleState { obstacle: i });
            }
            let coarse = obs.distance_coarse(x);
            let d = if coarse < refine_cutoff && !obs.profile.is_cap() {
                obs.closest_point_raw(x)?.distance
            } else {
                coarse
            };
            if d < best {
                best = d;
                nearest = i;
            }
            distances.push(d);
        }
        if self.obstacles.is_empty() {
            return Ok(Survey {
                distances,
                nearest: usize::MAX,
            });
        }
        Ok(Survey { distances, nearest })
    }

    /// Union separation in the requested variant; returns 0 when `x` lies
    /// inside an obstacle (infeasible).
    pub fn separation(&self, variant: SeparationVariant, x: &UnitPoint) -> f64 {
        if self.obstacles.is_empty() {
            return f64::INFINITY;
        }
        match self.survey_raw(x.coords(), f64::MAX) {
            Ok(s) => s.separation(variant),
            Err(_) => 0.0,
        }
    }

    /// Closest point on the unsafe set (over all obstacles).
    pub fn closest_point(&self, x: &UnitPoint) -> Result<(usize, BoundaryHit)> {
        let survey = self.survey_raw(x.coords(), f64::MAX)?;
        let i = survey.nearest;
        let hit = self.obstacles[i].closest_point_raw(x.coords())?;
        Ok((i, hit))
    }

    /// Projected gradient of the union spherical distance: the unit outward
    /// normal of the active obstacle, −P(x)Π/‖P(x)Π‖.
    ///
    /// Appendix-formula sign note: differentiating arccos(xᵀΠ) gives the
    /// direction *away* from the obstacle, which is what this returns; it is
    /// validated against finite differences.
    pub fn separation_gradient(&self, x: &UnitPoint) -> Result<DVector<f64>> {
        let (_, hit) = self.closest_point(x)?;
        let v = geometry::project_raw(x.coords(), &(x.coords() - &hit.point));
        let norm = v.norm();
        if norm <= 1e-9 {
            return Err(Error::DegenerateProjection);
        }
        Ok(v / norm)
    }

    /// Projected gradient of the selected separation variant (not
    /// normalized; the spherical case coincides with
    /// [`Self::separation_gradient`]).
    pub fn separation_gradient_variant(
        &self,
        variant: SeparationVariant,
        x: &UnitPoint,
    ) -> Result<DVector<f64>> {
        match variant {
            SeparationVariant::Spherical => self.separation_gradient(x),
            SeparationVariant::Chordal => {
                let (_, hit) = self.closest_point(x)?;
                Ok(geometry::project_raw(
                    x.coords(),
                    &(-&hit.point),
                ))
            }
            SeparationVariant::Product => {
                let mut hits = Vec::with_capacity(self.obstacles.len());
                for obs in &self.obstacles {
                    hits.push(obs.closest_point_raw(x.coords())?);
                }
                let dim = x.dim();
                let mut grad = DVector::zeros(dim);
                for (j, hit) in hits.iter().enumerate() {
                    let others: f64 = hits
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != j)
                        .map(|(_, h)| h.distance)
                        .product();
                    let sin_d = hit.distance.sin();
                    if sin_d <= 1e-12 {
                        return Err(Error::DegenerateProjection);
                    }
                    grad += geometry::project_raw(x.coords(), &(-&hit.point)) * (others / sin_d);
                }
                Ok(grad)
            }
        }
    }

    /// Minimum boundary-to-boundary angle over all obstacle pairs, estimated
    /// from `samples` boundary points per obstacle.
    pub fn pairwise_separation(&self, samples: usize) -> f64 {
        let mut min = f64::INFINITY;
        let boundaries: Vec<Vec<DVector<f64>>> = self
            .obstacles
            .iter()
            .map(|o| o.boundary_samples(samples))
            .collect();
        for i in 0..self.obstacles.len() {
            for j in (i + 1)..self.obstacles.len() {
                for a in &boundaries[i] {
                    for b in &boundaries[j] {
                        let ang = sphere_angle_raw(a, b);
                        if ang < min {
                            min = ang;
                        }
                    }
                }
            }
        }
        min
    }
}

/// Unit tangent at `x` pointing toward the closest unsafe point, the
/// velocity convention used for reference trajectories.
pub fn initial_velocity_toward_unsafe(field: &ObstacleField, x: &UnitPoint) -> Result<DVector<f64>> {
    let (_, hit) = field.closest_point(x)?;
    let target = UnitPoint::new(hit.point)?;
    unit_tangent_toward(x, &target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn cap(kernel: &[f64], extent: f64) -> StarObstacle {
        StarObstacle::new(UnitPoint::from_slice(kernel).unwrap(), RadialProfile::Cap { extent })
            .unwrap()
    }

    fn star(kernel: &[f64], a0: f64, terms: &[(f64, f64)]) -> StarObstacle {
        StarObstacle::new(
            UnitPoint::from_slice(kernel).unwrap(),
            RadialProfile::Fourier {
                a0,
                terms: terms.to_vec(),
            },
        )
        .unwrap()
    }

    fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> UnitPoint {
        loop {
            let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
            if let Ok(p) = UnitPoint::new(v) {
                return p;
            }
        }
    }

    #[test]
    fn profile_bounds_rejected() {
        let kernel = UnitPoint::from_slice(&[0.0, 0.0, 1.0]).unwrap();
        assert!(StarObstacle::new(kernel.clone(), RadialProfile::Cap { extent: 1.6 }).is_err());
        assert!(StarObstacle::new(
            kernel.clone(),
            RadialProfile::Fourier {
                a0: 0.3,
                terms: vec![(0.35, 0.0)],
            }
        )
        .is_err());
        assert!(StarObstacle::new(kernel, RadialProfile::Cap { extent: 0.3 }).is_ok());
    }

    #[test]
    fn containment_kernel_antipode_and_rim() {
        let obs = cap(&[0.0, 0.0, 1.0], 0.3);
        assert!(obs.contains(obs.kernel()));
        assert!(!obs.contains(&obs.kernel().antipode()));
        // angle 0.31 from the kernel: just outside a rho = 0.3 cap
        let x = UnitPoint::from_slice(&[0.31f64.sin(), 0.0, 0.31f64.cos()]).unwrap();
        assert!(!obs.contains(&x));
        let y = UnitPoint::from_slice(&[0.29f64.sin(), 0.0, 0.29f64.cos()]).unwrap();
        assert!(obs.contains(&y));
        // brute-force oracle: strictly closer to the kernel than every
        // boundary sample in the same direction
        let d = obs.distance_coarse(x.coords());
        assert_relative_eq!(d, 0.01, epsilon = 1e-12);
    }

    #[test]
    fn cap_distance_matches_brute_force() {
        let obs = cap(&[0.0, 0.0, 1.0], 0.35);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = random_unit(&mut rng, 3);
            if obs.contains(&x) {
                continue;
            }
            let analytic = obs.closest_point_raw(x.coords()).unwrap().distance;
            // dense boundary sweep
            let brute = obs
                .boundary_samples(10_000)
                .iter()
                .map(|b| sphere_angle_raw(x.coords(), b))
                .fold(f64::MAX, f64::min);
            assert!(
                (analytic - brute).abs() < 1e-4,
                "analytic {analytic} vs brute {brute}"
            );
        }
    }

    #[test]
    fn cap_closest_point_on_rim_along_great_circle() {
        let obs = cap(&[0.0, 0.0, 1.0], 0.3);
        let x = UnitPoint::from_slice(&[0.8f64.sin(), 0.0, 0.8f64.cos()]).unwrap();
        let hit = obs.closest_point_raw(x.coords()).unwrap();
        // rim point on the meridian through x
        assert_relative_eq!(hit.point[0], 0.3f64.sin(), epsilon = 1e-12);
        assert_relative_eq!(hit.point[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(hit.point[2], 0.3f64.cos(), epsilon = 1e-12);
        assert_relative_eq!(hit.distance, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn closest_point_on_boundary_is_itself() {
        let obs = cap(&[0.0, 0.0, 1.0], 0.3);
        let x = UnitPoint::from_slice(&[0.3f64.sin(), 0.0, 0.3f64.cos()]).unwrap();
        let hit = obs.closest_point_raw(x.coords()).unwrap();
        // arccos resolves zero angles only to ~sqrt(eps)
        assert!(hit.distance < 1e-7);
        assert!(sphere_angle_raw(&hit.point, x.coords()) < 1e-7);
    }

    #[test]
    fn fourier_closest_matches_dense_brute_force() {
        let obs = star(&[0.3, -0.2, 0.9], 0.28, &[(0.0, 0.0), (0.0, 0.05), (0.06, 0.02)]);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let dense = 100_000usize;
        for _ in 0..20 {
            let x = random_unit(&mut rng, 3);
            if obs.contains(&x) {
                continue;
            }
            let hit = obs.closest_point_raw(x.coords()).unwrap();
            let mut best = f64::MAX;
            let mut best_psi = 0.0;
            for j in 0..dense {
                let psi = 2.0 * PI * j as f64 / dense as f64;
                let d = sphere_angle_raw(x.coords(), &obs.boundary_point(psi));
                if d < best {
                    best = d;
                    best_psi = psi;
                }
            }
            assert!(
                (hit.distance - best).abs() < 1e-5,
                "refined {} vs brute {}",
                hit.distance,
                best
            );
            // the dense oracle itself is quantized to ~3e-5 in parameter
            let brute_point = obs.boundary_point(best_psi);
            assert!(sphere_angle_raw(&hit.point, &brute_point) < 1e-4);
        }
    }

    #[test]
    fn star_shapedness_by_construction() {
        let obs = star(&[0.0, 1.0, 0.2], 0.3, &[(0.05, 0.02), (0.0, 0.0), (0.0, 0.08)]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for b in obs.boundary_samples(100) {
            let bp = UnitPoint::new(b).unwrap();
            for _ in 0..5 {
                let lambda: f64 = rng.gen_range(0.0..1.0);
                let g = geometry::geodesic_point(obs.kernel(), &bp, lambda).unwrap();
                assert!(obs.contains(&g), "kernel geodesic left the set");
            }
        }
    }

    #[test]
    fn closest_point_lies_on_boundary() {
        let obs = star(&[0.1, 0.2, 1.0], 0.3, &[(0.04, 0.0), (0.0, 0.06)]);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let x = random_unit(&mut rng, 3);
            if obs.contains(&x) {
                continue;
            }
            let hit = obs.closest_point_raw(x.coords()).unwrap();
            let theta = sphere_angle_raw(obs.kernel().coords(), &hit.point);
            let psi = obs.direction_angle(&hit.point).unwrap();
            assert!(
                (theta - obs.profile().eval(psi)).abs() < 1e-6,
                "closest point off the boundary"
            );
        }
    }

    #[test]
    fn outward_normal_unit_tangent_and_fd_consistent() {
        let obs = star(&[0.0, 0.0, 1.0], 0.3, &[(0.05, 0.0)]);
        let field = ObstacleField::new(vec![obs]);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = 1e-6;
        let mut checked = 0;
        while checked < 20 {
            let x = random_unit(&mut rng, 3);
            let d = field.separation(SeparationVariant::Spherical, &x);
            if !(0.01..0.6).contains(&d) {
                continue;
            }
            checked += 1;
            let g = field.separation_gradient(&x).unwrap();
            assert_relative_eq!(g.norm(), 1.0, epsilon = 1e-9);
            assert!(g.dot(x.coords()).abs() < 1e-9);
            // central differences along the sphere (renormalized steps); an
            // unconstrained radial step hits the arccos square-root
            // singularity and ruins the truncation error near the boundary
            let mut fd = DVector::zeros(3);
            for k in 0..3 {
                let mut xp = x.coords().clone();
                let mut xm = x.coords().clone();
                xp[k] += h;
                xm[k] -= h;
                xp /= xp.norm();
                xm /= xm.norm();
                let dp = field.survey_raw(&xp, f64::MAX).unwrap().nearest_distance();
                let dm = field.survey_raw(&xm, f64::MAX).unwrap().nearest_distance();
                fd[k] = (dp - dm) / (2.0 * h);
            }
            let fd_t = geometry::project_raw(x.coords(), &fd);
            assert!(
                (&g - &fd_t).norm() / fd_t.norm() < 1e-5,
                "gradient {g:?} vs fd {fd_t:?}"
            );
        }
    }

    #[test]
    fn chordal_orthogonal_boundary_point_gives_one() {
        // nearest rim point orthogonal to x: theta = extent + pi/2
        let extent = 0.4;
        let obs = cap(&[0.0, 0.0, 1.0], extent);
        let field = ObstacleField::new(vec![obs]);
        let theta = extent + FRAC_PI_2;
        let x = UnitPoint::from_slice(&[theta.sin(), 0.0, theta.cos()]).unwrap();
        let c = field.separation(SeparationVariant::Chordal, &x);
        assert_relative_eq!(c, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn chordal_equals_one_minus_cos_spherical() {
        let obs = star(&[0.0, 1.0, 0.0], 0.3, &[(0.0, 0.05), (0.03, 0.0)]);
        let field = ObstacleField::new(vec![obs]);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..30 {
            let x = random_unit(&mut rng, 3);
            let s = field.separation(SeparationVariant::Spherical, &x);
            if s <= 0.0 {
                continue;
            }
            let c = field.separation(SeparationVariant::Chordal, &x);
            assert_relative_eq!(c, 1.0 - s.cos(), epsilon = 1e-9);
            // brute-force chordal over boundary samples
            let brute = field.obstacles()[0]
                .boundary_samples(5_000)
                .iter()
                .map(|b| 1.0 - x.coords().dot(b))
                .fold(f64::MAX, f64::min);
            assert!((c - brute).abs() < 1e-4);
        }
    }

    #[test]
    fn product_with_single_obstacle_equals_spherical() {
        let obs = cap(&[1.0, 0.0, 0.0], 0.25);
        let field = ObstacleField::new(vec![obs]);
        let x = UnitPoint::from_slice(&[0.0, 1.0, 0.3]).unwrap();
        assert_relative_eq!(
            field.separation(SeparationVariant::Product, &x),
            field.separation(SeparationVariant::Spherical, &x),
            epsilon = 1e-14
        );
    }

    #[test]
    fn two_equidistant_caps_share_the_min() {
        let a = cap(&[1.0, 0.0, 0.0], 0.3);
        let b = cap(&[-1.0, 0.0, 0.0], 0.3);
        let field = ObstacleField::new(vec![a, b]);
        let x = UnitPoint::from_slice(&[0.0, 1.0, 0.0]).unwrap();
        let d = field.separation(SeparationVariant::Spherical, &x);
        assert_relative_eq!(d, FRAC_PI_2 - 0.3, epsilon = 1e-12);
    }

    #[test]
    fn separation_variants_vanish_on_the_same_set() {
        let obs = star(&[0.2, 0.1, 1.0], 0.3, &[(0.05, 0.01)]);
        let field = ObstacleField::new(vec![obs]);
        for b in field.obstacles()[0].boundary_samples(100) {
            let x = UnitPoint::new(b).unwrap();
            for v in [
                SeparationVariant::Spherical,
                SeparationVariant::Chordal,
                SeparationVariant::Product,
            ] {
                assert!(field.separation(v, &x).abs() < 1e-6);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut free = 0;
        while free < 1000 {
            let x = random_unit(&mut rng, 3);
            if field.feasibility_raw(x.coords()).is_some() {
                continue;
            }
            let d = field.separation(SeparationVariant::Spherical, &x);
            if d < 1e-6 {
                continue;
            }
            free += 1;
            assert!(field.separation(SeparationVariant::Chordal, &x) > 0.0);
            assert!(field.separation(SeparationVariant::Product, &x) > 0.0);
        }
    }

    #[test]
    fn assumption2_holds_for_centered_cap() {
        let obs = cap(&[0.0, 0.0, 1.0], 0.3);
        let report = obs.validate_assumption2(0.1, 1000);
        assert!(report.holds, "min inner {}", report.min_inner);
    }

    #[test]
    fn assumption2_margin_shrinks_with_lobe_steepness() {
        // Radial graphs about the kernel with rho < pi/2 satisfy the
        // kernel-visibility condition by construction: at the boundary the
        // inner product tends to sin(rho)/sqrt(rho'^2 + sin^2 rho) > 0.
        // The validator must stay positive while its margin tracks the wall
        // steepness.
        let eight = |amp: f64| {
            star(
                &[0.0, 0.0, 1.0],
                0.55,
                &[
                    (0.0, 0.0),
                    (0.0, 0.0),
                    (0.0, 0.0),
                    (0.0, 0.0),
                    (0.0, 0.0),
                    (0.0, 0.0),
                    (0.0, 0.0),
                    (amp, 0.0),
                ],
            )
        };
        let gentle = eight(0.05).validate_assumption2(0.2, 10_000);
        let steep = eight(0.35).validate_assumption2(0.2, 10_000);
        assert!(gentle.holds && steep.holds);
        assert!(
            steep.min_inner < gentle.min_inner,
            "steep margin {} should undercut gentle margin {}",
            steep.min_inner,
            gentle.min_inner
        );
        assert!(steep.min_inner > 0.0 && steep.min_inner < 0.2);
    }

    #[test]
    fn pairwise_separation_of_octahedral_caps() {
        let field = ObstacleField::new(vec![
            cap(&[1.0, 0.0, 0.0], 0.3),
            cap(&[0.0, 1.0, 0.0], 0.3),
        ]);
        let sep = field.pairwise_separation(512);
        assert!((sep - (FRAC_PI_2 - 0.6)).abs() < 1e-3, "sep {sep}");
    }

    #[test]
    fn initial_velocity_points_toward_unsafe_set() {
        let obs = cap(&[0.0, 0.0, 1.0], 0.3);
        let field = ObstacleField::new(vec![obs]);
        let x = UnitPoint::from_slice(&[0.7f64.sin(), 0.0, 0.7f64.cos()]).unwrap();
        let v = initial_velocity_toward_unsafe(&field, &x).unwrap();
        assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-12);
        assert!(v.dot(x.coords()).abs() < 1e-10);
        // moving along v must decrease the separation
        let h = 1e-5;
        let xp = UnitPoint::new(x.coords() + &v * h).unwrap();
        assert!(
            field.separation(SeparationVariant::Spherical, &xp)
                < field.separation(SeparationVariant::Spherical, &x)
        );
    }
}
