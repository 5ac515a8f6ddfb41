//! Model definition: trait space, demographic rates, mutation kernel, and
//! the invasion-fitness functions derived from them.
//!
//! A [`ModelSpec`] bundles the birth rate `lambda(x)`, death rate `mu(x)`,
//! competition kernel `alpha(x,y)`, mutation probability profile `p(x)`,
//! the mutation kernel `m(x, dh)`, and the three scaling parameters:
//! carrying scale `K`, mutation rate scale `u_K`, and jump scale `epsilon`.
//!
//! Fitness conventions, with `r(x) = lambda(x) - mu(x)`:
//!
//! * monomorphic equilibrium  `nbar(x) = r(x) / alpha(x,x)`
//! * invasion fitness         `f(y;x) = r(y) - alpha(y,x) nbar(x)`
//! * dimorphic equilibrium    solves the 2x2 linear system; closed form
//! * `f(z;x,y) = r(z) - alpha(z,x) nbar1 - alpha(z,y) nbar2`
//!
//! The dimorphic equilibrium is extended to any pair with
//! `f(x;y) f(y;x) > 0`; with both fitnesses negative it is the interior
//! saddle of the bistable pair.

pub mod audit;
pub mod derivs;
pub mod gaussian;
pub mod tabulated;

use crate::rng::SimRng;
use std::fmt;
use std::sync::Arc;

/// Relative tolerance below which the 2x2 competition determinant is
/// treated as degenerate.
pub const DEGENERATE_DET_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("trait {value} outside the trait space")]
    OutOfSpace { value: f64 },
    #[error("resident {x} is not viable: r = {r} <= 0")]
    NonviableResident { x: f64, r: f64 },
    #[error("pair has no two-species equilibrium: f(x;y) = {fxy}, f(y;x) = {fyx}")]
    NoPairEquilibrium { fxy: f64, fyx: f64 },
    #[error("competition matrix is degenerate: det = {det}")]
    DegenerateDenominator { det: f64 },
    #[error("pair equilibrium not strictly positive: ({n1}, {n2})")]
    NonpositiveEquilibrium { n1: f64, n2: f64 },
    #[error("residents ({traits}) and equilibrium ({equilibrium}) lengths differ")]
    LengthMismatch { traits: usize, equilibrium: usize },
    #[error("mutation kernel rejection sampler hit the attempt cap at x = {x}")]
    KernelSampleCap { x: f64, attempts: u32 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Closed interval of admissible trait values.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TraitSpace {
    lower: f64,
    upper: f64,
}

impl TraitSpace {
    pub fn new(lower: f64, upper: f64) -> Result<Self, ModelError> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(ModelError::InvalidParameter(format!(
                "trait space bounds must satisfy lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(TraitSpace { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn check(&self, x: f64) -> Result<(), ModelError> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(ModelError::OutOfSpace { value: x })
        }
    }

    /// Midpoint-centered uniform grid with `n` points, endpoints included.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        assert!(n >= 2);
        (0..n)
            .map(|i| self.lower + self.width() * i as f64 / (n - 1) as f64)
            .collect()
    }
}

type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type SamplerFn = Arc<dyn Fn(f64, &mut SimRng) -> Result<f64, ModelError> + Send + Sync>;
type DomSamplerFn = Arc<dyn Fn(&mut SimRng) -> f64 + Send + Sync>;

/// Mutation kernel `m(x, dh)` together with a dominating density used by
/// thinning constructions: `m(x, h) <= mbar(h)` for every `x`.
#[derive(Clone)]
pub struct MutationKernel {
    sampler: SamplerFn,
    density: Fn2,
    dominating_density: Fn1,
    dominating_mass: f64,
    dominating_sampler: DomSamplerFn,
    scale: f64,
}

impl MutationKernel {
    pub fn new(
        sampler: SamplerFn,
        density: Fn2,
        dominating_density: Fn1,
        dominating_mass: f64,
        dominating_sampler: DomSamplerFn,
        scale: f64,
    ) -> Self {
        assert!(
            scale.is_finite() && scale > 0.0,
            "kernel scale must be positive, got {scale}"
        );
        MutationKernel {
            sampler,
            density,
            dominating_density,
            dominating_mass,
            dominating_sampler,
            scale,
        }
    }

    /// Draw `h` from `m(x, .)`.
    pub fn sample(&self, x: f64, rng: &mut SimRng) -> Result<f64, ModelError> {
        (self.sampler)(x, rng)
    }

    /// Density `m(x, h)` with respect to Lebesgue measure in `h`.
    pub fn density(&self, x: f64, h: f64) -> f64 {
        (self.density)(x, h)
    }

    /// Dominating density `mbar(h)`.
    pub fn dominating_density(&self, h: f64) -> f64 {
        (self.dominating_density)(h)
    }

    /// Total mass of the dominating density.
    pub fn dominating_mass(&self) -> f64 {
        self.dominating_mass
    }

    /// Draw `h` with density `mbar(h) / dominating_mass`.
    pub fn sample_dominating(&self, rng: &mut SimRng) -> f64 {
        (self.dominating_sampler)(rng)
    }

    /// Standard-deviation scale of the unconditioned step distribution.
    /// Kernel quadratures truncate their integration range at a fixed
    /// multiple of this.
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl fmt::Debug for MutationKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MutationKernel")
            .field("dominating_mass", &self.dominating_mass)
            .field("scale", &self.scale)
            .finish_non_exhaustive()
    }
}

/// Full model: rate functions plus scaling parameters.
#[derive(Clone)]
pub struct ModelSpec {
    space: TraitSpace,
    birth: Fn1,
    death: Fn1,
    competition: Fn2,
    mut_prob: Fn1,
    kernel: MutationKernel,
    carrying_scale: u64,
    mut_rate_scale: f64,
    jump_scale: f64,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("space", &self.space)
            .field("carrying_scale", &self.carrying_scale)
            .field("mut_rate_scale", &self.mut_rate_scale)
            .field("jump_scale", &self.jump_scale)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        space: TraitSpace,
        birth: Fn1,
        death: Fn1,
        competition: Fn2,
        mut_prob: Fn1,
        kernel: MutationKernel,
        carrying_scale: u64,
        mut_rate_scale: f64,
        jump_scale: f64,
    ) -> Result<Self, ModelError> {
        if carrying_scale == 0 {
            return Err(ModelError::InvalidParameter(
                "carrying scale K must be >= 1".into(),
            ));
        }
        // u_K = 0 is allowed: it switches mutation off, which the
        // law-of-large-numbers checks rely on.
        if !(0.0..=1.0).contains(&mut_rate_scale) {
            return Err(ModelError::InvalidParameter(format!(
                "mutation rate scale u_K must lie in [0, 1], got {mut_rate_scale}"
            )));
        }
        if !(jump_scale > 0.0 && jump_scale <= 1.0) {
            return Err(ModelError::InvalidParameter(format!(
                "jump scale epsilon must lie in (0, 1], got {jump_scale}"
            )));
        }
        Ok(ModelSpec {
            space,
            birth,
            death,
            competition,
            mut_prob,
            kernel,
            carrying_scale,
            mut_rate_scale,
            jump_scale,
        })
    }

    pub fn space(&self) -> &TraitSpace {
        &self.space
    }

    pub fn kernel(&self) -> &MutationKernel {
        &self.kernel
    }

    pub fn carrying_scale(&self) -> u64 {
        self.carrying_scale
    }

    pub fn mut_rate_scale(&self) -> f64 {
        self.mut_rate_scale
    }

    pub fn jump_scale(&self) -> f64 {
        self.jump_scale
    }

    /// Clone with a different jump scale.
    pub fn with_jump_scale(&self, epsilon: f64) -> Result<Self, ModelError> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(ModelError::InvalidParameter(format!(
                "jump scale epsilon must lie in (0, 1], got {epsilon}"
            )));
        }
        let mut m = self.clone();
        m.jump_scale = epsilon;
        Ok(m)
    }

    pub fn birth(&self, x: f64) -> f64 {
        (self.birth)(x)
    }

    pub fn death(&self, x: f64) -> f64 {
        (self.death)(x)
    }

    pub fn competition(&self, x: f64, y: f64) -> f64 {
        (self.competition)(x, y)
    }

    pub fn mut_prob(&self, x: f64) -> f64 {
        (self.mut_prob)(x)
    }

    /// Net growth rate `r(x) = lambda(x) - mu(x)`.
    pub fn growth(&self, x: f64) -> f64 {
        self.birth(x) - self.death(x)
    }

    /// Monomorphic equilibrium density `nbar(x) = r(x) / alpha(x,x)`.
    pub fn monomorphic_equilibrium(&self, x: f64) -> Result<f64, ModelError> {
        self.space.check(x)?;
        let r = self.growth(x);
        if r <= 0.0 {
            return Err(ModelError::NonviableResident { x, r });
        }
        let a = self.competition(x, x);
        if a <= 0.0 {
            return Err(ModelError::InvalidParameter(format!(
                "alpha({x},{x}) = {a} must be positive"
            )));
        }
        Ok(r / a)
    }

    /// Invasion fitness of a mutant `y` in the monomorphic resident `x`:
    /// `f(y;x) = r(y) - alpha(y,x) nbar(x)`.
    pub fn fitness1(&self, y: f64, x: f64) -> Result<f64, ModelError> {
        self.space.check(y)?;
        let nbar = self.monomorphic_equilibrium(x)?;
        Ok(self.growth(y) - self.competition(y, x) * nbar)
    }

    /// Equilibrium of the two-species system, in closed form:
    ///
    /// `nbar1 = (r(x) a(y,y) - r(y) a(x,y)) / D`,
    /// `nbar2 = (r(y) a(x,x) - r(x) a(y,x)) / D`,
    /// `D = a(x,x) a(y,y) - a(x,y) a(y,x)`.
    ///
    /// Defined whenever `f(x;y) f(y;x) > 0`; both coordinates are strictly
    /// positive in that case.
    pub fn dimorphic_equilibrium(&self, x: f64, y: f64) -> Result<(f64, f64), ModelError> {
        let fyx = self.fitness1(y, x)?;
        let fxy = self.fitness1(x, y)?;
        if fxy * fyx <= 0.0 {
            return Err(ModelError::NoPairEquilibrium { fxy, fyx });
        }
        let (axx, ayy) = (self.competition(x, x), self.competition(y, y));
        let (axy, ayx) = (self.competition(x, y), self.competition(y, x));
        let (rx, ry) = (self.growth(x), self.growth(y));
        let det = axx * ayy - axy * ayx;
        if det.abs() < DEGENERATE_DET_REL_TOL * (axx * ayy).abs() {
            return Err(ModelError::DegenerateDenominator { det });
        }
        let n1 = (rx * ayy - ry * axy) / det;
        let n2 = (ry * axx - rx * ayx) / det;
        if n1 <= 0.0 || n2 <= 0.0 {
            return Err(ModelError::NonpositiveEquilibrium { n1, n2 });
        }
        Ok((n1, n2))
    }

    /// Invasion fitness of `z` against the coexisting (or formally
    /// extended) pair `(x, y)`.
    pub fn fitness2(&self, z: f64, x: f64, y: f64) -> Result<f64, ModelError> {
        self.space.check(z)?;
        let (n1, n2) = self.dimorphic_equilibrium(x, y)?;
        Ok(self.growth(z) - self.competition(z, x) * n1 - self.competition(z, y) * n2)
    }

    /// Invasion fitness of `y` against `d` residents at the supplied
    /// equilibrium densities.
    pub fn fitness_d(&self, y: f64, traits: &[f64], equilibrium: &[f64]) -> Result<f64, ModelError> {
        if traits.len() != equilibrium.len() {
            return Err(ModelError::LengthMismatch {
                traits: traits.len(),
                equilibrium: equilibrium.len(),
            });
        }
        self.space.check(y)?;
        let mut f = self.growth(y);
        for (xj, nj) in traits.iter().zip(equilibrium.iter()) {
            f -= self.competition(y, *xj) * nj;
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::gaussian::GaussianExampleParams;
    use super::*;

    fn model() -> ModelSpec {
        GaussianExampleParams {
            sigma_b: 0.9,
            sigma_alpha: 0.7,
            sigma: 0.01,
            p: 0.1,
        }
        .model(1000, 1.0, 1.0)
        .unwrap()
    }

    #[test]
    fn trait_space_validation() {
        assert!(TraitSpace::new(1.0, 1.0).is_err());
        assert!(TraitSpace::new(f64::NAN, 1.0).is_err());
        let s = TraitSpace::new(-2.0, 2.0).unwrap();
        assert!(s.contains(2.0) && s.contains(-2.0) && !s.contains(2.0001));
    }

    #[test]
    fn resident_fitness_vanishes() {
        let m = model();
        for x in [-1.9, -1.0, -0.2, 0.0, 0.7, 1.6] {
            let f = m.fitness1(x, x).unwrap();
            assert!(f.abs() < 1e-12, "f({x};{x}) = {f}");
        }
    }

    #[test]
    fn out_of_space_is_rejected() {
        let m = model();
        assert!(matches!(
            m.fitness1(2.5, 0.0),
            Err(ModelError::OutOfSpace { .. })
        ));
        assert!(matches!(
            m.fitness1(0.0, -2.5),
            Err(ModelError::OutOfSpace { .. })
        ));
        assert!(matches!(
            m.monomorphic_equilibrium(3.0),
            Err(ModelError::OutOfSpace { .. })
        ));
    }

    #[test]
    fn nonviable_resident_is_rejected() {
        // birth rate below the death rate everywhere
        let space = TraitSpace::new(-1.0, 1.0).unwrap();
        let kernel = GaussianExampleParams {
            sigma_b: 0.9,
            sigma_alpha: 0.7,
            sigma: 0.01,
            p: 0.1,
        }
        .kernel(space)
        .unwrap();
        let m = ModelSpec::new(
            space,
            Arc::new(|_| 0.5),
            Arc::new(|_| 1.0),
            Arc::new(|_, _| 1.0),
            Arc::new(|_| 0.1),
            kernel,
            100,
            1.0,
            1.0,
        )
        .unwrap();
        assert!(matches!(
            m.monomorphic_equilibrium(0.0),
            Err(ModelError::NonviableResident { .. })
        ));
    }

    #[test]
    fn monomorphic_equilibrium_value() {
        // nbar(-1) = exp(-1 / (2 * 0.81)); oracle value from quadrature notes
        let m = model();
        let n = m.monomorphic_equilibrium(-1.0).unwrap();
        assert!((n - 0.5394075072376266).abs() < 1e-12);
    }

    #[test]
    fn dimorphic_equilibrium_zeroes_growth() {
        let m = model();
        let (x, y) = (-0.03, 0.05);
        let (n1, n2) = m.dimorphic_equilibrium(x, y).unwrap();
        // oracle values for this pair
        assert!((n1 - 0.576891480090664).abs() < 1e-10);
        assert!((n2 - 0.4253216795762429).abs() < 1e-10);
        let g1 = m.growth(x) - m.competition(x, x) * n1 - m.competition(x, y) * n2;
        let g2 = m.growth(y) - m.competition(y, x) * n1 - m.competition(y, y) * n2;
        assert!(g1.abs() < 1e-10 && g2.abs() < 1e-10, "g1={g1} g2={g2}");
    }

    #[test]
    fn dimorphic_equilibrium_is_symmetric() {
        let m = model();
        let (n1, n2) = m.dimorphic_equilibrium(-0.03, 0.05).unwrap();
        let (m2, m1) = m.dimorphic_equilibrium(0.05, -0.03).unwrap();
        assert!((n1 - m1).abs() < 1e-14 && (n2 - m2).abs() < 1e-14);
    }

    #[test]
    fn non_coexisting_pair_is_rejected() {
        let m = model();
        // close neighbors away from the singularity: the one nearer the
        // birth-rate peak simply replaces the other (mixed fitness signs)
        let err = m.dimorphic_equilibrium(-1.0, -0.9).unwrap_err();
        assert!(matches!(err, ModelError::NoPairEquilibrium { .. }));
    }

    #[test]
    fn duplicate_traits_are_degenerate_or_rejected() {
        let m = model();
        let err = m.dimorphic_equilibrium(0.3, 0.3).unwrap_err();
        // f(x;x) = 0 so the pair precondition fails before the determinant
        assert!(matches!(
            err,
            ModelError::NoPairEquilibrium { .. } | ModelError::DegenerateDenominator { .. }
        ));
    }

    #[test]
    fn fitness_d_checks_lengths() {
        let m = model();
        let err = m.fitness_d(0.0, &[-0.1, 0.1], &[0.5]).unwrap_err();
        assert!(matches!(err, ModelError::LengthMismatch { .. }));
    }

    #[test]
    fn fitness_d_matches_fitness1_for_single_resident() {
        let m = model();
        let nbar = m.monomorphic_equilibrium(-1.0).unwrap();
        let via_d = m.fitness_d(0.0, &[-1.0], &[nbar]).unwrap();
        let direct = m.fitness1(0.0, -1.0).unwrap();
        assert!((via_d - direct).abs() < 1e-15);
    }

    #[test]
    fn fitness2_matches_fitness_d_at_pair_equilibrium() {
        let m = model();
        let (x, y) = (-0.04, 0.05);
        let (n1, n2) = m.dimorphic_equilibrium(x, y).unwrap();
        let via2 = m.fitness2(0.2, x, y).unwrap();
        let via_d = m.fitness_d(0.2, &[x, y], &[n1, n2]).unwrap();
        assert!((via2 - via_d).abs() < 1e-14);
        // oracle values for this configuration: an interior mutant cannot
        // invade the pair, an exterior one can
        assert!((via2 - 0.013910848969429623).abs() < 1e-10);
        let mid = m.fitness2(0.005, x, y).unwrap();
        assert!((mid - (-0.0008081396321958922)).abs() < 1e-10);
    }
}
