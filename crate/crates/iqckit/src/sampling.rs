//! Seeded random system generation for property sweeps.
//!
//! The samplers produce stable systems with controlled stability margins and,
//! where asked, verified membership in a passivity class. Everything is
//! driven by a counter-based ChaCha stream so runs are reproducible from a
//! single seed.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{input_passivity_index, output_passivity_index};
use crate::error::Result;
use crate::grid::{grid_minimum, FrequencyGrid};
use crate::lti::{hermitian_part, lambda_min, sigma_max, Domain, StateSpaceSystem};

/// Seeded sampler over stable LTI systems.
pub struct SystemSampler {
    rng: ChaCha8Rng,
}

impl SystemSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn matrix(&mut self, rows: usize, cols: usize, span: f64) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| self.rng.random_range(-span..span))
    }

    /// Random stable system with entries in `[-2, 2]` and the requested
    /// eigenvalue margin.
    pub fn stable(
        &mut self,
        domain: Domain,
        nx: usize,
        ny: usize,
        nu: usize,
        margin: f64,
    ) -> StateSpaceSystem {
        let mut a = self.matrix(nx, nx, 2.0);
        if nx > 0 {
            match domain {
                Domain::Ct => {
                    let shift = a
                        .complex_eigenvalues()
                        .iter()
                        .map(|l| l.re)
                        .fold(f64::NEG_INFINITY, f64::max);
                    for i in 0..nx {
                        a[(i, i)] -= shift + margin;
                    }
                }
                Domain::Dt => {
                    let radius = a
                        .complex_eigenvalues()
                        .iter()
                        .map(|l| l.norm())
                        .fold(0.0, f64::max);
                    if radius > 0.0 {
                        a *= (1.0 - margin) / radius;
                    }
                }
            }
        }
        let b = self.matrix(nx, nu, 2.0);
        let c = self.matrix(ny, nx, 2.0);
        let d = self.matrix(ny, nu, 2.0);
        StateSpaceSystem::new(domain, a, b, c, d).expect("sampled dimensions are consistent")
    }

    /// Stable system rescaled to a prescribed H-infinity norm.
    pub fn stable_with_norm(
        &mut self,
        domain: Domain,
        nx: usize,
        k: usize,
        margin: f64,
        target_norm: f64,
        grid: &FrequencyGrid,
    ) -> Result<StateSpaceSystem> {
        loop {
            let sys = self.stable(domain, nx, k, k, margin);
            let gamma = crate::analysis::hinf_norm(&sys, grid, 1e-6)?.gamma;
            if gamma > 1e-6 {
                return Ok(sys.scale(target_norm / gamma));
            }
        }
    }

    /// Random passive system: a stable square draw shifted by a multiple of
    /// the identity until its Hermitian part clears the requested floor.
    pub fn passive(
        &mut self,
        domain: Domain,
        nx: usize,
        k: usize,
        floor: f64,
        grid: &FrequencyGrid,
    ) -> Result<StateSpaceSystem> {
        let sys = self.stable(domain, nx, k, k, 0.5);
        let worst = grid_minimum(grid, |w| {
            sys.evaluate_boundary(w)
                .map(|g| lambda_min(&hermitian_part(&g)))
                .unwrap_or(f64::INFINITY)
        });
        let shift = (2.0 * floor - worst.value).max(0.0) / 2.0;
        let shifted = sys.add(&StateSpaceSystem::gain(
            domain,
            DMatrix::identity(k, k) * shift,
        ))?;
        Ok(shifted)
    }

    /// Random input strictly passive system with index at least `nu_floor`.
    pub fn input_strict(
        &mut self,
        domain: Domain,
        nx: usize,
        k: usize,
        nu_floor: f64,
        grid: &FrequencyGrid,
    ) -> Result<StateSpaceSystem> {
        loop {
            let sys = self.passive(domain, nx, k, 2.0 * nu_floor, grid)?;
            if input_passivity_index(&sys, grid)?.value >= nu_floor {
                return Ok(sys);
            }
        }
    }

    /// Random output strictly passive system via the Cayley image of a
    /// contraction: `T = (I + S)/2` with `||S|| <= r < 1` has output index
    /// at least one.
    pub fn output_strict(
        &mut self,
        domain: Domain,
        nx: usize,
        k: usize,
        grid: &FrequencyGrid,
    ) -> Result<StateSpaceSystem> {
        loop {
            let s = self.stable_with_norm(domain, nx, k, 0.6, 0.9, grid)?;
            let half_identity =
                StateSpaceSystem::gain(domain, DMatrix::identity(k, k) * 0.5);
            let t = s.scale(0.5).add(&half_identity)?;
            let rho = output_passivity_index(&t, grid)?.value;
            if rho > 0.05 {
                return Ok(t);
            }
        }
    }

    /// Random stable square system that is not passive, rejected with at
    /// least the requested violation depth.
    pub fn not_passive(
        &mut self,
        domain: Domain,
        nx: usize,
        k: usize,
        depth: f64,
        grid: &FrequencyGrid,
    ) -> Result<StateSpaceSystem> {
        loop {
            let sys = self.stable(domain, nx, k, k, 0.5);
            let worst = grid_minimum(grid, |w| {
                sys.evaluate_boundary(w)
                    .map(|g| lambda_min(&hermitian_part(&g)))
                    .unwrap_or(f64::INFINITY)
            });
            if worst.value < -depth {
                return Ok(sys);
            }
            // Push it out of the passive cone and retry the check.
            let scale = sigma_max(&crate::lti::complexify(sys.d())) + 1.0;
            let pushed = sys.sub(&StateSpaceSystem::gain(
                domain,
                DMatrix::identity(k, k) * (depth + 0.5 * scale),
            ))?;
            let worst = grid_minimum(grid, |w| {
                pushed
                    .evaluate_boundary(w)
                    .map(|g| lambda_min(&hermitian_part(&g)))
                    .unwrap_or(f64::INFINITY)
            });
            if worst.value < -depth {
                return Ok(pushed);
            }
        }
    }

    pub fn random_range(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    pub fn random_order(&mut self, max: usize) -> usize {
        self.rng.random_range(1..=max)
    }
}
