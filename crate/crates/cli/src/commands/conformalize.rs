//! `conformal-box conformalize`: apply margins to every detection and emit
//! the enlarged boxes as COCO results JSON, preserving image ids and scores.

use conformal_box_core::{
    conformalize, load_dataset, save_detection_results, BBox, Error, MarginSet, Result, ScoreMode,
};

use crate::args::ConformalizeArgs;
use crate::commands::load_options;

pub fn run(args: &ConformalizeArgs) -> Result<()> {
    let margins = MarginSet::load(&args.margins)?;
    if let Some(requested) = args.mode {
        let requested = ScoreMode::from(requested);
        if requested != margins.mode {
            return Err(Error::ModeMismatch {
                margins_mode: margins.mode.to_string(),
                requested: requested.to_string(),
            });
        }
    }
    // Surface unbounded margins before touching any detection.
    margins.quantiles()?;

    let dataset = load_dataset(&args.data.gt, &args.data.pred, &load_options(&args.data))?;
    let mut entries: Vec<(u64, BBox, f64)> = Vec::with_capacity(dataset.n_detections());
    for record in &dataset.records {
        let frame = record.ground_truth.frame();
        let frame = args.clamp.then_some(&frame);
        for det in &record.predictions.detections {
            let conformal = conformalize(&det.bbox, &margins, frame)?;
            entries.push((record.ground_truth.image_id, conformal, det.score));
        }
    }
    save_detection_results(&args.out, &entries)?;
    log::info!(
        "conformalized {} detections ({} mode, clamp {}) -> {}",
        entries.len(),
        margins.mode,
        if args.clamp { "on" } else { "off" },
        args.out.display()
    );
    Ok(())
}
