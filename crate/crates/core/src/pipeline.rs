//! Collect, regress and build in one call.

use crate::dataset::{CollectionOptions, Dataset};
use crate::error::Result;
use crate::kernel::KernelSpec;
use crate::regress::{fit_dataset, LocalEstimate};
use crate::surrogate::{build_kedmd, BilinearSurrogate};
use crate::system::{ControlAffineSystem, SamplingConfig};

#[derive(Debug, Clone)]
pub struct Fitted {
    pub dataset: Dataset,
    pub estimates: Vec<LocalEstimate>,
    pub surrogate: BilinearSurrogate,
}

/// Fit a surrogate to an existing dataset.
pub fn fit(dataset: Dataset) -> Result<Fitted> {
    let estimates = fit_dataset(&dataset)?;
    let surrogate = build_kedmd(&dataset.centers.points, &estimates, &dataset.kernel)?;
    Ok(Fitted {
        dataset,
        estimates,
        surrogate,
    })
}

/// Generate a dataset and fit a surrogate to it.
pub fn collect_and_fit(
    system: &ControlAffineSystem,
    kernel: KernelSpec,
    sampling: SamplingConfig,
    opts: CollectionOptions,
) -> Result<Fitted> {
    fit(Dataset::generate(system, kernel, sampling, opts)?)
}
