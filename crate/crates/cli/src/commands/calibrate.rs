//! `conformal-box calibrate`: pair the calibration data and write margins.

use conformal_box_core::{calibrate, match_dataset, pooled_pairs, stats, Error, Result};

use crate::args::{CalibrateArgs, SubsetArg};
use crate::commands::{dump_match_reports, load_selected, mode_suffixed_path};

pub fn run(args: &CalibrateArgs) -> Result<()> {
    let dataset = load_selected(&args.data, &args.split, SubsetArg::Calibration, args.seed)?;
    let reports = match_dataset(&dataset, args.iou_threshold);
    let match_stats = stats(&reports);
    log::info!(
        "paired {} true positives ({} false positives, {} false negatives) on {} images",
        match_stats.true_positives,
        match_stats.false_positives,
        match_stats.false_negatives,
        dataset.n_images()
    );
    if let Some(path) = &args.dump_matches {
        dump_match_reports(path, &reports)?;
    }

    let pairs = pooled_pairs(&reports);
    let multiple = args.mode.modes().len() > 1;
    for mode in args.mode.modes() {
        let margins = calibrate(&pairs, args.alpha, mode, args.iou_threshold)?;
        let Some(q) = margins.q else {
            return Err(Error::UnboundedMargins {
                n_box: margins.n_box,
                alpha: margins.alpha,
            });
        };
        let out = if multiple {
            mode_suffixed_path(&args.out, mode)
        } else {
            args.out.clone()
        };
        margins.save(&out)?;
        log::info!(
            "{mode}: n_box = {}, q = ({:.6}, {:.6}, {:.6}, {:.6}) -> {}",
            margins.n_box,
            q.x_min,
            q.y_min,
            q.x_max,
            q.y_max,
            out.display()
        );
    }
    Ok(())
}
