//! Method registry: names, tuning and fitting.

use cde_core::dgp::SyntheticDgp;
use cde_core::flexcode::{fit_flexcode, fit_flexzboost, FlexBackend};
use cde_core::neural::{catmlp_fit, mdn_fit, CatMlpConfig, MdnConfig, TrainConfig};
use cde_core::parametric::{
    fit_gamma_glm, fit_gauss_hetero, fit_gauss_homo, fit_lognormal, fit_student_t, RidgeConfig,
};
use cde_core::quantile_tree::fit_quantile_tree;
use cde_core::tree::{derive_seed, GbtParams};
use cde_core::{ConditionalDensity, Dataset, EvalGrid};

use crate::error::{HarnessError, Result};
use crate::tuning::{tune, Hyper, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Family {
    LinearGaussHomo,
    LinearGaussHetero,
    StudentT,
    LogNormalHomo,
    LogNormalHetero,
    GammaGlm,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::LinearGaussHomo,
        Family::LinearGaussHetero,
        Family::StudentT,
        Family::LogNormalHomo,
        Family::LogNormalHetero,
        Family::GammaGlm,
    ];

    fn name(self) -> &'static str {
        match self {
            Family::LinearGaussHomo => "LinearGauss-Homo",
            Family::LinearGaussHetero => "LinearGauss-Hetero",
            Family::StudentT => "Student-t",
            Family::LogNormalHomo => "LogNormal-Homo",
            Family::LogNormalHetero => "LogNormal-Hetero",
            Family::GammaGlm => "Gamma-GLM",
        }
    }

    fn fit(self, ds: &Dataset, ridge: Option<&RidgeConfig>) -> Result<Box<dyn ConditionalDensity>> {
        Ok(match self {
            Family::LinearGaussHomo => Box::new(fit_gauss_homo(ds, ridge)?),
            Family::LinearGaussHetero => Box::new(fit_gauss_hetero(ds, ridge)?),
            Family::StudentT => Box::new(fit_student_t(ds, ridge)?),
            Family::LogNormalHomo => Box::new(fit_lognormal(ds, false, ridge)?),
            Family::LogNormalHetero => Box::new(fit_lognormal(ds, true, ridge)?),
            Family::GammaGlm => Box::new(fit_gamma_glm(ds, ridge)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Parametric { family: Family, ridge: bool },
    FlexCodeRf,
    FlexZBoost,
    QuantileTree,
    Mdn,
    CatMlp,
    /// The true density; only defined on synthetic datasets.
    Oracle,
    /// Always fails. Exercises failure handling in reports.
    FaultInjection,
}

/// A fitted model and the hyperparameters it was fitted with.
pub struct Fitted {
    pub model: Box<dyn ConditionalDensity>,
    pub hyper: Hyper,
}

impl Method {
    pub fn all() -> Vec<Method> {
        let mut out: Vec<Method> = Family::ALL
            .iter()
            .flat_map(|&family| [Method::Parametric { family, ridge: false }, Method::Parametric { family, ridge: true }])
            .collect();
        out.extend([
            Method::FlexCodeRf,
            Method::FlexZBoost,
            Method::QuantileTree,
            Method::Mdn,
            Method::CatMlp,
            Method::Oracle,
            Method::FaultInjection,
        ]);
        out
    }

    pub fn name(&self) -> String {
        match self {
            Method::Parametric { family, ridge: false } => family.name().to_string(),
            Method::Parametric { family, ridge: true } => format!("{}-Ridge", family.name()),
            Method::FlexCodeRf => "FlexCode-RF".into(),
            Method::FlexZBoost => "FlexZBoost".into(),
            Method::QuantileTree => "Quantile-Tree".into(),
            Method::Mdn => "MDN".into(),
            Method::CatMlp => "CatMLP".into(),
            Method::Oracle => "Oracle".into(),
            Method::FaultInjection => "FaultInjection".into(),
        }
    }

    pub fn by_name(name: &str) -> Result<Method> {
        Method::all().into_iter().find(|m| m.name() == name).ok_or_else(|| {
            let known: Vec<String> = Method::all().iter().map(Method::name).collect();
            HarnessError::invalid(format!("unknown method {name:?}; known: {}", known.join(", ")))
        })
    }

    /// Search space for methods tuned by the harness.
    pub fn search_space(&self) -> Option<SearchSpace> {
        match self {
            Method::Mdn => Some(SearchSpace::mdn()),
            Method::CatMlp => Some(SearchSpace::catmlp()),
            Method::QuantileTree => Some(SearchSpace::quantile_tree()),
            _ => None,
        }
    }

    /// Tunes if the method has a search space, then fits on all of `train`.
    /// `dgp` is the generating process when the dataset is synthetic.
    pub fn fit(&self, train: &Dataset, grid: &EvalGrid, seed: u64, dgp: Option<&SyntheticDgp>) -> Result<Fitted> {
        let hyper = match self.search_space() {
            Some(space) => {
                let method = *self;
                tune(&space, train, grid, derive_seed(seed, 1), move |ds, h, s| method.fit_with(ds, h, s, None))?
            }
            None => Hyper::new(),
        };
        let fit_seed = derive_seed(seed, 2);
        // FlexCode selects its own expansion size and sharpening by CV; report them.
        let flex = match self {
            Method::FlexCodeRf => Some(fit_flexcode(train, FlexBackend::forest(), fit_seed)?),
            Method::FlexZBoost => Some(fit_flexzboost(train, fit_seed)?),
            _ => None,
        };
        if let Some(f) = flex {
            let hyper = Hyper::from([("n_terms".to_string(), f.n_terms() as f64), ("alpha".to_string(), f.alpha())]);
            return Ok(Fitted { model: Box::new(f), hyper });
        }
        let model = self.fit_with(train, &hyper, fit_seed, dgp)?;
        Ok(Fitted { model, hyper })
    }

    /// One fit with fixed hyperparameters (ignored by untuned methods).
    pub fn fit_with(
        &self,
        ds: &Dataset,
        hyper: &Hyper,
        seed: u64,
        dgp: Option<&SyntheticDgp>,
    ) -> Result<Box<dyn ConditionalDensity>> {
        let get = |k: &str| {
            hyper.get(k).copied().ok_or_else(|| HarnessError::invalid(format!("{}: missing hyperparameter {k:?}", self.name())))
        };
        let train_cfg = || -> Result<TrainConfig> {
            Ok(TrainConfig {
                learning_rate: get("learning_rate")?,
                max_epochs: get("epochs")? as usize,
                seed,
                ..TrainConfig::default()
            })
        };
        Ok(match self {
            Method::Parametric { family, ridge } => {
                let cfg = RidgeConfig::default();
                family.fit(ds, ridge.then_some(&cfg))?
            }
            Method::FlexCodeRf => Box::new(fit_flexcode(ds, FlexBackend::forest(), seed)?),
            Method::FlexZBoost => Box::new(fit_flexzboost(ds, seed)?),
            Method::QuantileTree => {
                let params = GbtParams {
                    rounds: get("rounds")? as usize,
                    max_depth: get("max_depth")? as usize,
                    learning_rate: get("learning_rate")?,
                    ..GbtParams::default()
                };
                Box::new(fit_quantile_tree(ds, params, seed)?)
            }
            Method::Mdn => Box::new(mdn_fit(
                ds,
                &MdnConfig { components: get("components")? as usize, hidden: get("hidden")? as usize, train: train_cfg()? },
            )?),
            Method::CatMlp => Box::new(catmlp_fit(
                ds,
                &CatMlpConfig { n_bins: get("n_bins")? as usize, hidden: get("hidden")? as usize, train: train_cfg()? },
            )?),
            Method::Oracle => match dgp {
                Some(d) if d.dim() == ds.d() => Box::new(d.oracle()),
                Some(_) => return Err(HarnessError::invalid("Oracle: feature count does not match the process")),
                None => return Err(HarnessError::invalid("Oracle is only defined on synthetic datasets")),
            },
            Method::FaultInjection => return Err(HarnessError::invalid("FaultInjection: deliberate failure")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip_and_are_unique() {
        let all = Method::all();
        assert_eq!(all.len(), 19);
        let mut names: Vec<String> = all.iter().map(Method::name).collect();
        for (m, n) in all.iter().zip(&names) {
            assert_eq!(Method::by_name(n).unwrap(), *m);
        }
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 19);
        assert!(names.contains(&"Gamma-GLM-Ridge".to_string()));
        assert!(Method::by_name("TabPFN").is_err());
    }

    #[test]
    fn oracle_needs_a_process() {
        let dgp = SyntheticDgp::hetero_gaussian();
        let ds = dgp.simulate(100, 1).unwrap();
        let grid = cde_core::make_eval_grid(&ds.response).unwrap();
        assert!(Method::Oracle.fit(&ds, &grid, 0, None).is_err());
        assert!(Method::Oracle.fit(&ds, &grid, 0, Some(&dgp)).is_ok());
        assert!(Method::Oracle.fit(&ds, &grid, 0, Some(&SyntheticDgp::Bimodal)).is_err());
        assert!(Method::FaultInjection.fit(&ds, &grid, 0, None).is_err());
    }

    #[test]
    fn tuned_methods_record_their_choice() {
        let dgp = SyntheticDgp::Bimodal;
        let ds = dgp.simulate(150, 2).unwrap();
        let grid = cde_core::make_eval_grid(&ds.response).unwrap();
        let f = Method::QuantileTree.fit(&ds, &grid, 4, None).unwrap();
        let space = SearchSpace::quantile_tree();
        for (k, vals) in &space.axes {
            assert!(vals.contains(&f.hyper[*k]));
        }
        let again = Method::QuantileTree.fit(&ds, &grid, 4, None).unwrap();
        assert_eq!(f.hyper, again.hyper);
        let flex = Method::FlexCodeRf.fit(&ds, &grid, 4, None).unwrap();
        assert_eq!(flex.hyper["alpha"], 1.0);
        assert!(flex.hyper["n_terms"] >= 1.0);
        assert!(Method::Parametric { family: Family::StudentT, ridge: true }.fit(&ds, &grid, 4, None).unwrap().hyper.is_empty());
    }
}
