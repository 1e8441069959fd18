//! `conformal-box render`: one SVG overlay per image.

use std::path::Path;

use conformal_box_core::{conformalize, load_dataset, BBox, Error, MarginSet, Result};

use crate::args::RenderArgs;
use crate::commands::{load_options, write_text_file};
use crate::overlay::render_svg;

pub fn run(args: &RenderArgs) -> Result<()> {
    let margins = MarginSet::load(&args.margins)?;
    margins.quantiles()?;
    let dataset = load_dataset(&args.data.gt, &args.data.pred, &load_options(&args.data))?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::Io {
        path: args.out_dir.clone(),
        source: e,
    })?;

    let mut rendered = 0usize;
    for record in &dataset.records {
        let gt = &record.ground_truth;
        let frame = gt.frame();
        let clamp_frame = args.clamp.then_some(&frame);

        let predictions: Vec<BBox> = record
            .predictions
            .detections
            .iter()
            .map(|d| d.bbox)
            .collect();
        let conformals: Vec<BBox> = record
            .predictions
            .detections
            .iter()
            .map(|d| conformalize(&d.bbox, &margins, clamp_frame))
            .collect::<Result<_>>()?;

        let href = args.images.as_ref().and_then(|dir| {
            let path = dir.join(&gt.file_name);
            if gt.file_name.is_empty() || !path.is_file() {
                log::warn!(
                    "image {} for id {} not found; rendering a blank frame",
                    path.display(),
                    gt.image_id
                );
                None
            } else {
                Some(path.to_string_lossy().into_owned())
            }
        });

        let svg = render_svg(
            gt.image_width,
            gt.image_height,
            href.as_deref(),
            &gt.boxes,
            &predictions,
            &conformals,
        );
        let out = args.out_dir.join(output_name(&gt.file_name, gt.image_id));
        write_text_file(&out, &svg)?;
        rendered += 1;
    }
    log::info!(
        "rendered {rendered} overlays into {}",
        args.out_dir.display()
    );
    Ok(())
}

fn output_name(file_name: &str, image_id: u64) -> String {
    let stem = Path::new(file_name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if stem.is_empty() {
        format!("image_{image_id}.svg")
    } else {
        format!("{stem}.svg")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_names_fall_back_to_image_id() {
        assert_eq!(output_name("frames/a01.png", 3), "a01.svg");
        assert_eq!(output_name("", 3), "image_3.svg");
    }
}
