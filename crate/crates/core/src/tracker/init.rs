//! Offline size estimation from reference views.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::body::{dof, size, BodyModel, PostureParams, SizeParams, NUM_SIZES};
use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::mask::SilhouetteMask;
use crate::matching::{cost_of_posture_with, Cost};
use crate::resampling::Perturbation;
use crate::rng::stream;

/// A known posture of the subject and the silhouette observed in it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceView {
    pub posture: PostureParams,
    pub mask: SilhouetteMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    /// Hypotheses per generation (M).
    pub m: usize,
    /// σα (cm).
    pub sigma_alpha: f64,
    /// One view per size subset, in subset order.
    pub references: Vec<ReferenceView>,
    pub max_iterations: usize,
    /// A subset stops once the best cost has improved by less than this
    /// fraction over the last `patience` generations.
    pub min_relative_improvement: f64,
    pub patience: usize,
    /// Lower clamp for every size (cm).
    pub min_size: f64,
    pub seed: u64,
}

impl InitConfig {
    pub fn new(references: Vec<ReferenceView>) -> Self {
        InitConfig {
            m: 50,
            sigma_alpha: 5.0,
            references,
            max_iterations: 50,
            min_relative_improvement: 0.005,
            patience: 3,
            min_size: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidParameter {
                name: "M",
                value: self.m as f64,
            });
        }
        if !(self.sigma_alpha > 0.0 && self.sigma_alpha.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma_alpha",
                value: self.sigma_alpha,
            });
        }
        if !(self.min_size > 0.0 && self.min_size.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "min_size",
                value: self.min_size,
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iterations",
                value: 0.0,
            });
        }
        if self.references.len() < size::SUBSETS.len() {
            return Err(Error::MissingReference(self.references.len() + 1));
        }
        Ok(())
    }
}

/// T-pose, side view with the arms down, T-pose again. The arms are clear of
/// the torso in the front views, which keeps the shoulder line visible.
pub fn default_reference_postures() -> [PostureParams; 3] {
    let mut t_pose = PostureParams::ZERO;
    t_pose[dof::L_SHOULDER_ABD] = FRAC_PI_2;
    t_pose[dof::R_SHOULDER_ABD] = FRAC_PI_2;
    let mut side = PostureParams::ZERO;
    side[dof::TORSO_YAW] = FRAC_PI_2;
    [t_pose, side, t_pose]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetReport {
    /// 0-based subset index.
    pub subset: usize,
    /// Best cost after every generation, generation 0 first.
    pub history: Vec<Cost>,
}

impl SubsetReport {
    pub fn final_cost(&self) -> Cost {
        *self.history.last().expect("at least one generation")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitReport {
    pub sizes: SizeParams,
    pub subsets: Vec<SubsetReport>,
}

fn stalled(history: &[Cost], patience: usize, min_gain: f64) -> bool {
    if patience == 0 || history.len() <= patience {
        return false;
    }
    let then = history[history.len() - 1 - patience].0;
    let now = history[history.len() - 1].0;
    ((then - now) as f64) < min_gain * then as f64
}

/// Fits the size parameters of `body` (whose current sizes are A_ini) one
/// subset at a time, each against its own reference view. Earlier subsets
/// stay fixed while later ones are estimated.
pub fn estimate_sizes(cfg: &InitConfig, body: &BodyModel, cam: &CameraModel) -> Result<InitReport> {
    cfg.validate()?;
    cam.validate()?;
    for (j, r) in cfg.references.iter().enumerate() {
        if r.mask.dims() != (cam.width, cam.height) {
            return Err(Error::DimensionMismatch {
                expected: (cam.width, cam.height),
                actual: r.mask.dims(),
            });
        }
        body.limits().check(&r.posture).map_err(|_| Error::MissingReference(j + 1))?;
    }

    let mut current = *body.sizes().values();
    let mut reports = Vec::with_capacity(size::SUBSETS.len());
    for (j, range) in size::SUBSETS.iter().enumerate() {
        let reference = &cfg.references[j];
        let noise = Perturbation {
            sigma: vec![cfg.sigma_alpha; range.len()],
            lo: vec![cfg.min_size; range.len()],
            hi: vec![f64::INFINITY; range.len()],
        };
        let mut best = current[range.clone()].to_vec();
        let mut history: Vec<Cost> = Vec::new();
        for generation in 0..cfg.max_iterations {
            let hypotheses: Vec<Vec<f64>> = (0..cfg.m)
                .map(|slot| {
                    if slot == 0 {
                        best.clone()
                    } else {
                        let mut rng = stream(cfg.seed, &[j as u64, generation as u64, slot as u64]);
                        noise.apply(&best, &mut rng)
                    }
                })
                .collect();
            let costs: Vec<Cost> = hypotheses
                .par_iter()
                .map_init(
                    || SilhouetteMask::new(cam.width, cam.height),
                    |scratch, h| {
                        let mut values = current;
                        values[range.clone()].copy_from_slice(h);
                        let model = body.with_sizes(SizeParams::new(values)?)?;
                        cost_of_posture_with(&model, &reference.posture, cam, &reference.mask, scratch)
                    },
                )
                .collect::<Result<_>>()?;
            let winner = (0..cfg.m).min_by_key(|&i| (costs[i], i)).unwrap();
            best.clone_from(&hypotheses[winner]);
            let cost = costs[winner];
            history.push(cost);
            if cost.0 == 0 || stalled(&history, cfg.patience, cfg.min_relative_improvement) {
                break;
            }
        }
        current[range.clone()].copy_from_slice(&best);
        reports.push(SubsetReport { subset: j, history });
    }
    debug_assert_eq!(current.len(), NUM_SIZES);
    Ok(InitReport {
        sizes: SizeParams::new(current)?,
        subsets: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::render_posture;

    fn references(body: &BodyModel, cam: &CameraModel) -> Vec<ReferenceView> {
        default_reference_postures()
            .into_iter()
            .map(|posture| ReferenceView {
                posture,
                mask: render_posture(body, &posture, cam).unwrap(),
            })
            .collect()
    }

    #[test]
    fn true_sizes_are_kept() {
        let cam = CameraModel::default();
        let body = BodyModel::build(SizeParams::default(), -250.0, -45.0).unwrap();
        let mut cfg = InitConfig::new(references(&body, &cam));
        cfg.m = 8;
        let report = estimate_sizes(&cfg, &body, &cam).unwrap();
        assert_eq!(report.sizes, SizeParams::default());
        for s in &report.subsets {
            assert_eq!(s.history, vec![Cost(0)]);
        }
    }

    #[test]
    fn stopping_rule() {
        let h = |v: &[u64]| v.iter().map(|&c| Cost(c)).collect::<Vec<_>>();
        assert!(!stalled(&h(&[1000, 1000, 1000]), 3, 0.005));
        assert!(stalled(&h(&[1000, 1000, 999, 996]), 3, 0.005));
        assert!(!stalled(&h(&[1000, 1000, 1000, 995]), 3, 0.005));
        assert!(!stalled(&h(&[2000, 1000, 1000, 1000, 1000]), 5, 0.005));
    }

    #[test]
    fn missing_reference() {
        let cam = CameraModel::default();
        let body = BodyModel::build(SizeParams::default(), -250.0, -45.0).unwrap();
        let mut refs = references(&body, &cam);
        refs.pop();
        let cfg = InitConfig::new(refs);
        assert!(matches!(estimate_sizes(&cfg, &body, &cam), Err(Error::MissingReference(3))));
    }

    #[test]
    fn reference_views_show_the_body() {
        let cam = CameraModel::default();
        let body = BodyModel::build(SizeParams::default(), -250.0, -45.0).unwrap();
        let refs = references(&body, &cam);
        let width = |m: &SilhouetteMask| {
            let cols: Vec<usize> = (0..m.width()).filter(|&x| (0..m.height()).any(|y| m.get(x, y))).collect();
            cols.last().unwrap() - cols[0] + 1
        };
        let [front, side] = [0, 1].map(|i| width(&refs[i].mask));
        assert!(side < front, "side view is narrower");
        assert!(front > 150, "arms spread wide");
    }

    #[test]
    fn invalid_config() {
        let mut cfg = InitConfig::new(Vec::new());
        assert!(cfg.validate().is_err());
        cfg.m = 1;
        assert!(matches!(cfg.validate(), Err(Error::InvalidParameter { name: "M", .. })));
    }
}
