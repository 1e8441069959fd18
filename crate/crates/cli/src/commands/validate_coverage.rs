//! `conformal-box validate-coverage`: run the synthetic Monte Carlo harness
//! and write its report.

use conformal_box_core::{
    monte_carlo_coverage, Error, GeneratorConfig, MonteCarloConfig, ResampleScheme, Result,
};

use crate::args::ValidateCoverageArgs;
use crate::commands::write_json_file;

pub fn run(args: &ValidateCoverageArgs) -> Result<()> {
    let mut generator = match &args.gen_config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str::<GeneratorConfig>(&text).map_err(|e| Error::Json {
                path: path.clone(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?
        }
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = args.seed {
        generator.noise.seed = seed;
    }

    let config = MonteCarloConfig {
        generator,
        alpha: args.alpha,
        mode: args.mode.into(),
        repetitions: args.repetitions,
        cal_fraction: args.cal_fraction,
        iou_threshold: args.iou_threshold,
        scheme: if args.resplit {
            ResampleScheme::ResplitFixed
        } else {
            ResampleScheme::FreshDataset
        },
    };
    let report = monte_carlo_coverage(&config)?;
    write_json_file(&args.out, &report)?;
    log::info!(
        "{} repetitions at alpha {}: mean coverage {:.4} (std {:.4}, stretch {:.3}, \
         {} unbounded / {} empty excluded) -> {}",
        report.repetitions,
        report.alpha,
        report.mean_coverage,
        report.std_coverage,
        report.mean_stretch,
        report.n_excluded_unbounded,
        report.n_excluded_empty,
        args.out.display()
    );
    Ok(())
}
