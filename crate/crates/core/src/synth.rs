//! Seeded synthetic cohorts with a planted latent risk that shifts both
//! patch features and gene vectors.

use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    Censor, Cohort, GeneGroups, PatchFeature, PatientRecord, Slide, SlideKind, SurvivalLabel, DEFAULT_BINS,
    DEFAULT_DIM, DEFAULT_GENE_GROUPS,
};
use crate::error::{Error, Result};
use crate::rng::{substream, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub min_slides: usize,
    pub max_slides: usize,
    pub patches_per_slide: usize,
    pub d: usize,
    pub num_gene_groups: usize,
    pub signal_strength: f64,
    pub censor_rate: f64,
    /// Multiplier on the latent score in the hazard rate, `rate = exp(gain·z)`.
    pub hazard_gain: f64,
    pub num_prototypes: usize,
    pub noise: f64,
    pub bins: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_patients: 60,
            min_slides: 1,
            max_slides: 3,
            patches_per_slide: 24,
            d: DEFAULT_DIM,
            num_gene_groups: DEFAULT_GENE_GROUPS.len(),
            signal_strength: 2.0,
            censor_rate: 0.2,
            hazard_gain: 5.0,
            num_prototypes: 4,
            noise: 1.0,
            bins: DEFAULT_BINS,
            folds: 5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_patients", self.n_patients),
            ("min_slides", self.min_slides),
            ("patches_per_slide", self.patches_per_slide),
            ("d", self.d),
            ("num_gene_groups", self.num_gene_groups),
            ("num_prototypes", self.num_prototypes),
            ("bins", self.bins),
            ("folds", self.folds),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.max_slides < self.min_slides {
            return Err(Error::InvalidArgument("max_slides must be at least min_slides".into()));
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return Err(Error::InvalidArgument("signal_strength must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.censor_rate) {
            return Err(Error::InvalidArgument("censor_rate must lie in [0, 1)".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite() && self.hazard_gain.is_finite()) {
            return Err(Error::InvalidArgument("noise and hazard_gain must be finite, noise non-negative".into()));
        }
        if self.folds > self.n_patients {
            return Err(Error::InvalidArgument("more folds than patients".into()));
        }
        Ok(())
    }

    /// Raw length of gene group `w` (groups deliberately differ in size).
    pub fn gene_len(&self, w: usize) -> usize {
        6 + 2 * w
    }
}

fn gaussian_vec(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit_vec(rng: &mut Rng, len: usize) -> Vec<f64> {
    let mut v = gaussian_vec(rng, len);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// The cohort plus the planted latent score of every patient.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort {
    pub cohort: Cohort,
    pub latent: Vec<f64>,
}

pub fn generate(config: &SynthConfig) -> Result<SynthCohort> {
    config.validate()?;
    let d = config.d;
    let mut shared = substream(config.seed, "data", 0);
    let prototypes: Vec<Vec<f64>> = (0..config.num_prototypes).map(|_| gaussian_vec(&mut shared, d)).collect();
    let path_dir = unit_vec(&mut shared, d);
    let style_dir = unit_vec(&mut shared, d);
    let gene_dirs: Vec<Vec<f64>> = (0..config.num_gene_groups)
        .map(|w| unit_vec(&mut shared, config.gene_len(w)))
        .collect();
    let group_names: Vec<String> = (0..config.num_gene_groups)
        .map(|w| {
            DEFAULT_GENE_GROUPS
                .get(w)
                .map_or_else(|| format!("group_{w}"), |s| s.to_string())
        })
        .collect();

    let noise = Normal::new(0.0, config.noise).expect("validated noise");
    let side = (config.patches_per_slide as f64).sqrt().ceil() as usize;
    let mut patients = Vec::with_capacity(config.n_patients);
    let mut latent = Vec::with_capacity(config.n_patients);
    let mut times = Vec::with_capacity(config.n_patients);
    let mut censors = Vec::with_capacity(config.n_patients);

    for i in 0..config.n_patients {
        let mut rng = substream(config.seed, "data", 1 + i as u64);
        let z: f64 = rng.sample(StandardNormal);
        let shift = z * config.signal_strength;

        let num_slides = rng.random_range(config.min_slides..=config.max_slides);
        let mut slides = Vec::with_capacity(num_slides);
        for s in 0..num_slides {
            let kind = if s % 2 == 0 { SlideKind::Ffpe } else { SlideKind::Ff };
            let style = if kind == SlideKind::Ff { 0.5 } else { 0.0 };
            let patches = (0..config.patches_per_slide)
                .map(|p| {
                    let proto = &prototypes[rng.random_range(0..prototypes.len())];
                    let feature = (0..d)
                        .map(|j| proto[j] + shift * path_dir[j] + style * style_dir[j] + noise.sample(&mut rng))
                        .collect();
                    let coord = (
                        (p % side) as f64 + rng.random_range(-0.25..0.25),
                        (p / side) as f64 + rng.random_range(-0.25..0.25),
                    );
                    PatchFeature { feature, coord }
                })
                .collect();
            slides.push(Slide {
                slide_id: format!("P{i:04}-S{s}"),
                kind,
                patches,
            });
        }

        let groups = gene_dirs
            .iter()
            .map(|dir| dir.iter().map(|u| shift * u + noise.sample(&mut rng)).collect())
            .collect();

        let rate = (config.hazard_gain * z).exp();
        let event_time = Exp::new(rate).expect("positive rate").sample(&mut rng) * 12.0;
        let (time, censor) = if rng.random::<f64>() < config.censor_rate {
            (event_time * rng.random::<f64>(), Censor::Censored)
        } else {
            (event_time, Censor::Event)
        };
        latent.push(z);
        times.push(time);
        censors.push(censor);
        patients.push(PatientRecord {
            patient_id: format!("P{i:04}"),
            slides,
            genes: Some(GeneGroups {
                groups,
                group_names: group_names.clone(),
            }),
            label: SurvivalLabel { time, censor, bin: 0 },
        });
    }

    let mut cohort = Cohort {
        patients,
        d,
        bin_edges: Vec::new(),
        folds: Vec::new(),
        num_folds: 0,
    };
    cohort.rebin(config.bins)?;
    cohort.assign_folds(config.folds, config.seed)?;
    Ok(SynthCohort { cohort, latent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::validate_cohort;

    #[test]
    fn no_censoring_means_all_events() {
        let cfg = SynthConfig {
            censor_rate: 0.0,
            n_patients: 20,
            ..Default::default()
        };
        let s = generate(&cfg).unwrap();
        assert!(s.cohort.patients.iter().all(|p| p.label.censor == Censor::Event));
    }

    #[test]
    fn generated_cohort_validates() {
        let s = generate(&SynthConfig::default()).unwrap();
        assert!(validate_cohort(&s.cohort).is_empty());
    }

    #[test]
    fn censor_rate_one_rejected() {
        let cfg = SynthConfig {
            censor_rate: 1.0,
            ..Default::default()
        };
        assert!(matches!(generate(&cfg), Err(Error::InvalidArgument(_))));
    }
}
