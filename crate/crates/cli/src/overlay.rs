//! SVG overlays: prediction (blue), conformalized box (green), ground truth
//! (red), drawn over the raster image when one is available and over a blank
//! frame otherwise. Pure text emission — no image decoding involved.

use conformal_box_core::BBox;

const PREDICTION_COLOR: &str = "blue";
const CONFORMAL_COLOR: &str = "green";
const TRUTH_COLOR: &str = "red";
const STROKE_WIDTH: f64 = 2.0;

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

fn push_rects(svg: &mut String, boxes: &[BBox], color: &str) {
    for b in boxes {
        svg.push_str(&format!(
            "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" \
             stroke=\"{color}\" stroke-width=\"{STROKE_WIDTH}\"/>\n",
            b.x_min,
            b.y_min,
            b.width(),
            b.height(),
        ));
    }
}

/// Builds one overlay document. Conformal boxes are drawn first (largest),
/// then predictions, then truths, so every outline stays visible.
pub fn render_svg(
    width: u32,
    height: u32,
    image_href: Option<&str>,
    truths: &[BBox],
    predictions: &[BBox],
    conformals: &[BBox],
) -> String {
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    );
    match image_href {
        Some(href) => svg.push_str(&format!(
            "  <image href=\"{}\" x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\"/>\n",
            xml_escape(href)
        )),
        None => svg.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"),
    }
    push_rects(&mut svg, conformals, CONFORMAL_COLOR);
    push_rects(&mut svg, predictions, PREDICTION_COLOR);
    push_rects(&mut svg, truths, TRUTH_COLOR);
    svg.push_str("</svg>\n");
    svg
}
