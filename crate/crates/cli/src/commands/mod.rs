//! The five pipeline commands.

pub mod calibrate;
pub mod conformalize;
pub mod evaluate;
pub mod render;
pub mod validate_coverage;

use std::path::{Path, PathBuf};

use conformal_box_core::{
    split, DetectionDataset, Error, LoadOptions, MatchReport, Result, ScoreMode, SplitLabel,
};

use crate::args::{DataArgs, SplitArgs, SubsetArg};

pub(crate) fn load_options(data: &DataArgs) -> LoadOptions {
    LoadOptions {
        category_id: data.category,
        score_floor: data.score_floor,
    }
}

/// Loads the dataset and, when `--split` is given, reduces it to the
/// requested subset (or the command's default subset).
pub(crate) fn load_selected(
    data: &DataArgs,
    split_args: &SplitArgs,
    default_subset: SubsetArg,
    seed: u64,
) -> Result<DetectionDataset> {
    let dataset = conformal_box_core::load_dataset(&data.gt, &data.pred, &load_options(data))?;
    match split_args.split {
        None => {
            if split_args.subset.is_some() {
                return Err(Error::InvalidArgument(
                    "--subset requires --split".to_string(),
                ));
            }
            Ok(dataset)
        }
        Some(sizes) => {
            let subset = split_args.subset.unwrap_or(default_subset);
            let (validation, calibration, test) = split(&dataset, sizes, seed)?;
            let selected = match SplitLabel::from(subset) {
                SplitLabel::Validation => validation,
                SplitLabel::Calibration => calibration,
                SplitLabel::Test => test,
            };
            log::info!(
                "selected the {} subset: {} of {} images",
                label_name(subset),
                selected.n_images(),
                dataset.n_images()
            );
            Ok(selected)
        }
    }
}

fn label_name(subset: SubsetArg) -> &'static str {
    match subset {
        SubsetArg::Validation => "validation",
        SubsetArg::Calibration => "calibration",
        SubsetArg::Test => "test",
    }
}

/// `margins.json` + additive -> `margins.additive.json`.
pub(crate) fn mode_suffixed_path(path: &Path, mode: ScoreMode) -> PathBuf {
    match path.extension() {
        Some(ext) => path.with_extension(format!("{mode}.{}", ext.to_string_lossy())),
        None => path.with_extension(mode.to_string()),
    }
}

pub(crate) fn write_json_file<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub(crate) fn write_text_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub(crate) fn dump_match_reports(path: &Path, reports: &[MatchReport]) -> Result<()> {
    write_json_file(path, reports)
}
