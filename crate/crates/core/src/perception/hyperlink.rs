//! Bound correction for widgets whose clickable target is an inline hyperlink.
//!
//! The hierarchy reports the whole paragraph as the widget's bounds, so a tap
//! on its center misses the link. The screenshot is used to locate the link
//! text, a detector finds text lines inside those areas and a recognizer reads
//! them back.

use std::sync::Arc;

use thiserror::Error;

use super::screenshot::grouped_boxes;
use super::{
    extract_link_regions, filter_widgets, parse_view_hierarchy, BinaryMask, GuiState,
    LinkDetectionConfig, PerceptionError, Rect, RgbImage, WidgetNode,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct PluginError(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextRegion {
    pub bounds: Rect,
    pub recognized_text: String,
}

/// Finds text-line boxes in `image`, restricted to pixels set in `mask`.
/// Returned regions carry no text yet.
pub trait TextDetector: Send + Sync {
    fn detect(&self, image: &RgbImage, mask: &BinaryMask) -> Result<Vec<TextRegion>, PluginError>;
}

/// Reads the text inside `region`. An empty string means "nothing recognised".
pub trait TextRecognizer: Send + Sync {
    fn recognize(&self, image: &RgbImage, region: &Rect) -> Result<String, PluginError>;
}

/// Returns a fixed list of regions regardless of input.
#[derive(Debug, Clone, Default)]
pub struct MockTextDetector {
    pub regions: Vec<Rect>,
    pub failure: Option<String>,
}

impl MockTextDetector {
    pub fn new(regions: Vec<Rect>) -> Self {
        Self { regions, failure: None }
    }

    pub fn failing(msg: impl Into<String>) -> Self {
        Self { regions: Vec::new(), failure: Some(msg.into()) }
    }
}

impl TextDetector for MockTextDetector {
    fn detect(&self, _: &RgbImage, _: &BinaryMask) -> Result<Vec<TextRegion>, PluginError> {
        if let Some(msg) = &self.failure {
            return Err(PluginError(msg.clone()));
        }
        Ok(self
            .regions
            .iter()
            .map(|r| TextRegion { bounds: *r, recognized_text: String::new() })
            .collect())
    }
}

/// Model-free detector: every connected blob of the mask is one text line.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaskRegionDetector;

impl TextDetector for MaskRegionDetector {
    fn detect(&self, _: &RgbImage, mask: &BinaryMask) -> Result<Vec<TextRegion>, PluginError> {
        let mut boxes = grouped_boxes(mask, mask);
        boxes.sort_by_key(|b| (b.y1, b.x1));
        Ok(boxes
            .into_iter()
            .map(|bounds| TextRegion { bounds, recognized_text: String::new() })
            .collect())
    }
}

/// Answers with the text of the configured region that best overlaps the query.
#[derive(Debug, Clone, Default)]
pub struct MockTextRecognizer {
    pub entries: Vec<(Rect, String)>,
    pub default_text: String,
    pub failure: Option<String>,
}

impl MockTextRecognizer {
    pub fn new(entries: Vec<(Rect, String)>) -> Self {
        Self { entries, ..Default::default() }
    }

    /// Same answer for every region.
    pub fn constant(text: impl Into<String>) -> Self {
        Self { default_text: text.into(), ..Default::default() }
    }

    pub fn failing(msg: impl Into<String>) -> Self {
        Self { failure: Some(msg.into()), ..Default::default() }
    }
}

impl TextRecognizer for MockTextRecognizer {
    fn recognize(&self, _: &RgbImage, region: &Rect) -> Result<String, PluginError> {
        if let Some(msg) = &self.failure {
            return Err(PluginError(msg.clone()));
        }
        let best = self
            .entries
            .iter()
            .map(|(r, t)| (r.iou(region), t))
            .filter(|(iou, _)| *iou > 0.0)
            .fold(None::<(f64, &String)>, |acc, cur| match acc {
                Some(a) if a.0 >= cur.0 => Some(a),
                _ => Some(cur),
            });
        Ok(best.map_or_else(|| self.default_text.clone(), |(_, t)| t.clone()))
    }
}

fn refine_with_regions(
    widget: &WidgetNode,
    image: &RgbImage,
    link_regions: &[Rect],
    detector: &dyn TextDetector,
    recognizer: &dyn TextRecognizer,
) -> Result<WidgetNode, PerceptionError> {
    let mut mask = BinaryMask::new(image.width(), image.height());
    for r in link_regions.iter().filter_map(|r| r.intersection(&widget.bounds)) {
        mask.fill_rect(r);
    }
    let mut masked = image.clone();
    for y in 0..image.height() {
        for x in 0..image.width() {
            if !mask.get(x, y) {
                masked.put(x, y, [0, 0, 0]);
            }
        }
    }
    let regions = detector
        .detect(&masked, &mask)
        .map_err(|e| PerceptionError::DetectorFailure(e.0))?;
    let image_bounds = image.bounds();
    // first region wins ties
    let best = regions
        .iter()
        .filter_map(|r| r.bounds.intersection(&image_bounds))
        .fold(None::<Rect>, |acc, r| match acc {
            Some(a) if a.width() >= r.width() => Some(a),
            _ => Some(r),
        });
    let Some(best) = best else {
        return Ok(widget.clone());
    };
    let text = recognizer
        .recognize(&masked, &best)
        .map_err(|e| PerceptionError::RecognizerFailure(e.0))?;
    let mut out = widget.clone();
    out.bounds = best;
    if !text.is_empty() {
        out.text = text.clone();
        out.content_desc = text;
    }
    Ok(out)
}

/// Replaces a hyperlink widget's bounds (and text) with the widest link-text
/// line found inside it. The widget is returned unchanged when nothing is found.
pub fn refine_hyperlink_widget(
    widget: &WidgetNode,
    image: &RgbImage,
    config: &LinkDetectionConfig,
    detector: &dyn TextDetector,
    recognizer: &dyn TextRecognizer,
) -> Result<WidgetNode, PerceptionError> {
    let regions = extract_link_regions(image, config);
    refine_with_regions(widget, image, &regions, detector, recognizer)
}

/// Full observation-to-state pipeline.
#[derive(Clone, Default)]
pub struct Perceiver {
    config: LinkDetectionConfig,
    plugins: Option<(Arc<dyn TextDetector>, Arc<dyn TextRecognizer>)>,
}

impl Perceiver {
    /// Hierarchy only; screenshots are ignored.
    pub fn text_only() -> Self {
        Self::default()
    }

    pub fn with_plugins(
        config: LinkDetectionConfig,
        detector: Arc<dyn TextDetector>,
        recognizer: Arc<dyn TextRecognizer>,
    ) -> Self {
        Self { config, plugins: Some((detector, recognizer)) }
    }

    /// Link refinement with mask components as text regions. Widget text is
    /// kept as dumped since no recognizer is attached.
    pub fn with_link_refinement(config: LinkDetectionConfig) -> Self {
        Self::with_plugins(config, Arc::new(MaskRegionDetector), Arc::new(MockTextRecognizer::constant("")))
    }

    pub fn config(&self) -> &LinkDetectionConfig {
        &self.config
    }

    /// Parses and filters `xml`; with a screenshot and plug-ins configured,
    /// clickable widgets overlapping link-coloured text get refined bounds.
    pub fn perceive(&self, xml: &str, screenshot: Option<&RgbImage>) -> Result<GuiState, PerceptionError> {
        let mut widgets = filter_widgets(&parse_view_hierarchy(xml)?);
        if let (Some(image), Some((detector, recognizer))) = (screenshot, &self.plugins) {
            let regions = extract_link_regions(image, &self.config);
            if !regions.is_empty() {
                for w in widgets.iter_mut() {
                    if w.clickable && regions.iter().any(|r| r.intersects(&w.bounds)) {
                        *w = refine_with_regions(w, image, &regions, detector.as_ref(), recognizer.as_ref())?;
                    }
                }
            }
        }
        Ok(GuiState::new(widgets))
    }
}

impl std::fmt::Debug for Perceiver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Perceiver")
            .field("config", &self.config)
            .field("plugins", &self.plugins.is_some())
            .finish()
    }
}
