//! Quality predictor: lp-norm multiple kernel learning regression.
//!
//! The model is an epsilon-insensitive support vector regressor over a
//! non-negatively weighted sum of base kernels. Training alternates between
//! an SMO solve of the SVR dual at fixed kernel weights ([`svr`]) and the
//! closed-form lp-norm weight update ([`semkl::update_weights`]).
//!
//! ```
//! use sprayq_core::{Dataset, Hyperparams, KernelBank, KernelSpec, semkl};
//!
//! let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 4.0]).collect();
//! let y: Vec<f64> = x.iter().map(|r| (r[0]).sin()).collect();
//! let data = Dataset::new(vec!["x".into()], x, y).unwrap();
//! let bank = KernelBank::new(vec![KernelSpec::Linear, KernelSpec::Gaussian { sigma2: 0.25 }]).unwrap();
//! let model = semkl::train(&data, &bank, &Hyperparams::new(10.0, 2.0)).unwrap();
//! let f = model.predict(&[1.0]).unwrap();
//! assert!((f - 1f64.sin()).abs() < 0.2);
//! ```

pub mod dataset;
pub mod error;
pub mod kernels;
pub mod model_selection;
pub mod semkl;
pub mod standardize;
pub mod svr;
pub mod target;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use kernels::{KernelBank, KernelSpec, KernelWeights};
pub use model_selection::{CvReport, GridSpec};
pub use semkl::{Hyperparams, SemklModel};
pub use standardize::Standardizer;
pub use svr::{SvrProblem, SvrSolution};
pub use target::{QualityTarget, TargetGroup};
