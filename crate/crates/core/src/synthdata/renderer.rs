use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{euler_to_matrix, PoseLabel};
use crate::rng;

/// Scale of the class-specific nuisance directions relative to the pose signal.
const NUISANCE_SCALE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RendererConfig {
    pub master_seed: u64,
    pub num_classes: usize,
    /// Classes `c` and `c'` share a geometry when `c % groups == c' % groups`.
    pub num_geometry_groups: usize,
    pub input_dim: usize,
    /// Number of random Fourier projections of the rotation entries.
    pub fourier_dim: usize,
    pub nuisance_dim: usize,
    /// Size of the per-class deviation from the group geometry (ε).
    pub class_perturbation_scale: f64,
    /// Standard deviation of the additive render noise (σ).
    pub noise_sigma: f64,
}

impl Default for RendererConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            num_classes: 10,
            num_geometry_groups: 4,
            input_dim: 64,
            fourier_dim: 32,
            nuisance_dim: 8,
            class_perturbation_scale: 0.1,
            noise_sigma: 0.05,
        }
    }
}

impl RendererConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.num_geometry_groups == 0 || self.num_geometry_groups > self.num_classes {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= num_geometry_groups ({}) <= num_classes ({})",
                self.num_geometry_groups, self.num_classes
            )));
        }
        if self.input_dim == 0 || self.fourier_dim == 0 || self.nuisance_dim == 0 {
            return Err(Error::InvalidConfig("renderer dimensions must be >= 1".into()));
        }
        if !(self.class_perturbation_scale >= 0.0 && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig("class_perturbation_scale and noise_sigma must be >= 0".into()));
        }
        Ok(())
    }

    pub fn geometry_group(&self, class_id: usize) -> usize {
        class_id % self.num_geometry_groups
    }

    /// Length of the pose feature vector: 9 rotation entries plus cos/sin pairs.
    pub fn pose_feature_dim(&self) -> usize {
        9 + 2 * self.fourier_dim
    }
}

/// Deterministic stand-in for image formation.
///
/// A sample of class `c` at pose `R` with nuisance seed `s` renders to
/// `B_c·φ(R) + C_c·z(s) + σ·η(s)`, where `φ(R)` holds the rotation entries
/// followed by cos/sin of random projections of them, `B_c` is the
/// geometry-group basis plus an `ε`-scaled class perturbation and `C_c`
/// spans a class-specific nuisance subspace.
#[derive(Debug, Clone)]
pub struct Renderer {
    cfg: RendererConfig,
    projections: Vec<[f64; 9]>,
    /// Per class, `input_dim × pose_feature_dim` row-major.
    pose_bases: Vec<Vec<f64>>,
    /// Per class, `input_dim × nuisance_dim` row-major.
    nuisance_bases: Vec<Vec<f64>>,
}

impl Renderer {
    pub fn new(cfg: &RendererConfig) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.master_seed;
        let feat = cfg.pose_feature_dim();

        let mut proj_rng = rng::stream(seed, "renderer/projections", 0);
        let projections =
            (0..cfg.fourier_dim).map(|_| std::array::from_fn(|_| proj_rng.sample::<f64, _>(StandardNormal))).collect();

        let basis_scale = 1.0 / (feat as f64).sqrt();
        let group_bases: Vec<Vec<f64>> = (0..cfg.num_geometry_groups)
            .map(|g| gaussian(&mut rng::stream(seed, "renderer/group-basis", g as u64), cfg.input_dim * feat, basis_scale))
            .collect();

        let nuisance_scale = NUISANCE_SCALE / (cfg.nuisance_dim as f64).sqrt();
        let mut pose_bases = Vec::with_capacity(cfg.num_classes);
        let mut nuisance_bases = Vec::with_capacity(cfg.num_classes);
        for c in 0..cfg.num_classes {
            let perturb =
                gaussian(&mut rng::stream(seed, "renderer/class-perturbation", c as u64), cfg.input_dim * feat, basis_scale);
            let group = &group_bases[cfg.geometry_group(c)];
            pose_bases.push(group.iter().zip(&perturb).map(|(g, p)| g + cfg.class_perturbation_scale * p).collect());
            nuisance_bases.push(gaussian(
                &mut rng::stream(seed, "renderer/class-nuisance", c as u64),
                cfg.input_dim * cfg.nuisance_dim,
                nuisance_scale,
            ));
        }
        Ok(Self { cfg: cfg.clone(), projections, pose_bases, nuisance_bases })
    }

    pub fn config(&self) -> &RendererConfig {
        &self.cfg
    }

    pub fn input_dim(&self) -> usize {
        self.cfg.input_dim
    }

    /// `φ(R)`: the nine rotation entries, then `cos(ω_j·r)` and `sin(ω_j·r)`.
    pub fn pose_features(&self, pose: &PoseLabel) -> Vec<f64> {
        let r = *euler_to_matrix(pose).as_array();
        let mut phi = Vec::with_capacity(self.cfg.pose_feature_dim());
        phi.extend_from_slice(&r);
        for w in &self.projections {
            let t: f64 = w.iter().zip(&r).map(|(a, b)| a * b).sum();
            phi.push(t.cos());
        }
        for w in &self.projections {
            let t: f64 = w.iter().zip(&r).map(|(a, b)| a * b).sum();
            phi.push(t.sin());
        }
        phi
    }

    /// Latent nuisance vector `z` of a sample.
    pub fn nuisance(&self, nuisance_seed: u64) -> Vec<f64> {
        gaussian(&mut rng::stream(self.cfg.master_seed, "renderer/nuisance", nuisance_seed), self.cfg.nuisance_dim, 1.0)
    }

    /// `C_c · dz`, the feature-space image of a nuisance vector.
    pub fn nuisance_features(&self, class_id: usize, dz: &[f64]) -> Result<Vec<f64>> {
        self.check_class(class_id)?;
        Ok(matvec(&self.nuisance_bases[class_id], dz, self.cfg.input_dim))
    }

    pub fn render(&self, class_id: usize, pose: &PoseLabel, nuisance_seed: u64) -> Result<Vec<f64>> {
        self.check_class(class_id)?;
        let phi = self.pose_features(pose);
        let mut x = matvec(&self.pose_bases[class_id], &phi, self.cfg.input_dim);
        let z = self.nuisance(nuisance_seed);
        let cz = matvec(&self.nuisance_bases[class_id], &z, self.cfg.input_dim);
        x.iter_mut().zip(&cz).for_each(|(a, b)| *a += b);
        if self.cfg.noise_sigma > 0.0 {
            let eta = gaussian(
                &mut rng::stream(self.cfg.master_seed, "renderer/noise", nuisance_seed),
                self.cfg.input_dim,
                self.cfg.noise_sigma,
            );
            x.iter_mut().zip(&eta).for_each(|(a, b)| *a += b);
        }
        Ok(x)
    }

    fn check_class(&self, class_id: usize) -> Result<()> {
        if class_id >= self.cfg.num_classes {
            return Err(Error::BadClassId { class_id, num_classes: self.cfg.num_classes });
        }
        Ok(())
    }
}

/// Renders one sample without keeping the renderer around.
pub fn render(cfg: &RendererConfig, class_id: usize, pose: &PoseLabel, nuisance_seed: u64) -> Result<Vec<f64>> {
    Renderer::new(cfg)?.render(class_id, pose, nuisance_seed)
}

pub(crate) fn gaussian(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn matvec(m: &[f64], v: &[f64], rows: usize) -> Vec<f64> {
    let cols = v.len();
    (0..rows).map(|r| m[r * cols..(r + 1) * cols].iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose() -> PoseLabel {
        PoseLabel::new(0.7, -0.2, 0.1).unwrap()
    }

    #[test]
    fn render_is_deterministic() {
        let r = Renderer::new(&RendererConfig::default()).unwrap();
        let a = r.render(3, &pose(), 99).unwrap();
        let b = r.render(3, &pose(), 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        assert_eq!(a, render(&RendererConfig::default(), 3, &pose(), 99).unwrap());
    }

    #[test]
    fn bad_class_id() {
        let r = Renderer::new(&RendererConfig::default()).unwrap();
        assert!(matches!(r.render(10, &pose(), 0), Err(Error::BadClassId { class_id: 10, .. })));
    }

    #[test]
    fn master_seed_changes_output() {
        let a = render(&RendererConfig::default(), 1, &pose(), 5).unwrap();
        let cfg = RendererConfig { master_seed: 1, ..Default::default() };
        assert_ne!(a, render(&cfg, 1, &pose(), 5).unwrap());
    }

    #[test]
    fn group_mates_differ_only_by_nuisance_when_unperturbed() {
        let cfg = RendererConfig { class_perturbation_scale: 0.0, noise_sigma: 0.0, ..Default::default() };
        let r = Renderer::new(&cfg).unwrap();
        // classes 1 and 5 share group 1
        let z = r.nuisance(17);
        let mut a = r.render(1, &pose(), 17).unwrap();
        let mut b = r.render(5, &pose(), 17).unwrap();
        let ca = r.nuisance_features(1, &z).unwrap();
        let cb = r.nuisance_features(5, &z).unwrap();
        a.iter_mut().zip(&ca).for_each(|(x, c)| *x -= c);
        b.iter_mut().zip(&cb).for_each(|(x, c)| *x -= c);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        let bad = RendererConfig { num_geometry_groups: 11, ..Default::default() };
        assert!(Renderer::new(&bad).is_err());
        let bad = RendererConfig { noise_sigma: -1.0, ..Default::default() };
        assert!(Renderer::new(&bad).is_err());
    }
}
