//! Turns device observations into the compact textual state handed to agents.
//!
//! The view hierarchy comes from `uiautomator dump`. Only nodes that carry
//! text or a content description survive filtering, and each survivor is
//! rendered as a single `<node ... node/>` line with seven attributes.

mod geometry;
mod hyperlink;
mod screenshot;

pub use geometry::Rect;
pub use hyperlink::{
    refine_hyperlink_widget, MaskRegionDetector, MockTextDetector, TextRegion,
    MockTextRecognizer, Perceiver, PluginError, TextDetector, TextRecognizer,
};
pub use screenshot::{
    binarize_by_hsv_distance, box_blur, dilate, extract_link_regions, hue_distance, BinaryMask, Hsv,
    HsvTolerance, LinkDetectionConfig, RgbImage,
};

use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PerceptionError {
    #[error("malformed view hierarchy: {0}")]
    MalformedXml(String),
    #[error("text detector failed: {0}")]
    DetectorFailure(String),
    #[error("text recognizer failed: {0}")]
    RecognizerFailure(String),
    #[error("malformed state line {line}: {reason}")]
    MalformedStateLine { line: usize, reason: String },
}

/// A `<node>` element as it appears in the dump, before filtering.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawNode {
    pub widget_class: String,
    pub resource_id: String,
    pub content_desc: String,
    pub text: String,
    pub clickable: bool,
    pub scrollable: bool,
    pub bounds: Rect,
}

/// A filtered widget as seen by the agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidgetNode {
    pub widget_class: String,
    pub resource_id: String,
    #[serde(default)]
    pub content_desc: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub clickable: bool,
    #[serde(default)]
    pub scrollable: bool,
    pub bounds: Rect,
}

impl From<WidgetNode> for RawNode {
    fn from(w: WidgetNode) -> Self {
        RawNode {
            widget_class: w.widget_class,
            resource_id: w.resource_id,
            content_desc: w.content_desc,
            text: w.text,
            clickable: w.clickable,
            scrollable: w.scrollable,
            bounds: w.bounds,
        }
    }
}

/// The observation `s` given to agents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuiState {
    widgets: Vec<WidgetNode>,
    serialized: String,
}

impl GuiState {
    pub fn new(widgets: Vec<WidgetNode>) -> Self {
        let serialized = serialize_state(&widgets);
        Self { widgets, serialized }
    }

    /// Parses and filters a uiautomator dump in one go.
    pub fn from_xml(xml: &str) -> Result<Self, PerceptionError> {
        Ok(Self::new(filter_widgets(&parse_view_hierarchy(xml)?)))
    }

    pub fn widgets(&self) -> &[WidgetNode] {
        &self.widgets
    }

    pub fn serialized(&self) -> &str {
        &self.serialized
    }

    pub fn find(&self, resource_id: &str) -> Option<&WidgetNode> {
        self.widgets.iter().find(|w| w.resource_id == resource_id)
    }

    /// Hex SHA-256 of the serialized state.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.serialized.as_bytes()))
    }
}

fn parse_bool(v: &str) -> bool {
    v.eq_ignore_ascii_case("true")
}

pub fn parse_view_hierarchy(xml: &str) -> Result<Vec<RawNode>, PerceptionError> {
    let doc = roxmltree::Document::parse(xml)
        .map_err(|e| PerceptionError::MalformedXml(e.to_string()))?;
    doc.descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == "node")
        .map(|n| {
            let attr = |name: &str| n.attribute(name).unwrap_or("").to_string();
            let bounds = match n.attribute("bounds") {
                None | Some("") => Rect::default(),
                Some(b) => Rect::parse_bounds(b).ok_or_else(|| {
                    PerceptionError::MalformedXml(format!("bad bounds attribute {b:?}"))
                })?,
            };
            Ok(RawNode {
                widget_class: attr("class"),
                resource_id: attr("resource-id"),
                content_desc: attr("content-desc"),
                text: attr("text"),
                clickable: parse_bool(&attr("clickable")),
                scrollable: parse_bool(&attr("scrollable")),
                bounds,
            })
        })
        .collect()
}

/// Keeps nodes with text or a content description, mocking empty resource ids
/// as `mock_id_<k>` where `k` counts mocked nodes from zero. A candidate id
/// that collides with a real id in the same list is skipped.
pub fn filter_widgets(raw: &[RawNode]) -> Vec<WidgetNode> {
    let taken: HashSet<&str> = raw
        .iter()
        .map(|n| n.resource_id.as_str())
        .filter(|r| !r.is_empty())
        .collect();
    let mut next_mock = 0usize;
    raw.iter()
        .filter(|n| !(n.text.is_empty() && n.content_desc.is_empty()))
        .map(|n| {
            let resource_id = if n.resource_id.is_empty() {
                loop {
                    let candidate = format!("mock_id_{next_mock}");
                    next_mock += 1;
                    if !taken.contains(candidate.as_str()) {
                        break candidate;
                    }
                }
            } else {
                n.resource_id.clone()
            };
            WidgetNode {
                widget_class: n.widget_class.clone(),
                resource_id,
                content_desc: n.content_desc.clone(),
                text: n.text.clone(),
                clickable: n.clickable,
                scrollable: n.scrollable,
                bounds: n.bounds,
            }
        })
        .collect()
}

pub(crate) fn escape_attr(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_attr(value: &str) -> Result<String, String> {
    let mut out = String::with_capacity(value.len());
    let mut rest = value;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let end = tail.find(';').ok_or_else(|| format!("unterminated entity in {value:?}"))?;
        let entity = &tail[1..end];
        let ch = match entity {
            "amp" => '&',
            "lt" => '<',
            "gt" => '>',
            "quot" => '"',
            "apos" => '\'',
            e if e.starts_with('#') => e[1..]
                .parse::<u32>()
                .ok()
                .and_then(char::from_u32)
                .ok_or_else(|| format!("bad character reference &{e};"))?,
            e => return Err(format!("unknown entity &{e};")),
        };
        out.push(ch);
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

pub fn serialize_widget(w: &WidgetNode) -> String {
    format!(
        r#"<node class="{}" resource-id="{}" clickable="{}" scrollable="{}" content-desc="{}" text="{}" bounds="{}" node/>"#,
        escape_attr(&w.widget_class),
        escape_attr(&w.resource_id),
        w.clickable,
        w.scrollable,
        escape_attr(&w.content_desc),
        escape_attr(&w.text),
        w.bounds.to_bounds_string(),
    )
}

pub fn serialize_state(widgets: &[WidgetNode]) -> String {
    widgets
        .iter()
        .map(serialize_widget)
        .collect::<Vec<_>>()
        .join("\n")
}

fn state_line_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"^<node class="([^"]*)" resource-id="([^"]*)" clickable="(true|false)" scrollable="(true|false)" content-desc="([^"]*)" text="([^"]*)" bounds="([^"]*)" node/>$"#,
        )
        .expect("state line pattern")
    })
}

/// Inverse of [`serialize_state`].
pub fn parse_serialized_state(text: &str) -> Result<Vec<WidgetNode>, PerceptionError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split('\n')
        .enumerate()
        .map(|(i, line)| {
            let bad = |reason: String| PerceptionError::MalformedStateLine { line: i + 1, reason };
            let caps = state_line_regex()
                .captures(line)
                .ok_or_else(|| bad("does not match the node line grammar".into()))?;
            let field = |k: usize| unescape_attr(&caps[k]).map_err(bad);
            Ok(WidgetNode {
                widget_class: field(1)?,
                resource_id: field(2)?,
                clickable: &caps[3] == "true",
                scrollable: &caps[4] == "true",
                content_desc: field(5)?,
                text: field(6)?,
                bounds: Rect::parse_bounds(&caps[7])
                    .ok_or_else(|| bad(format!("bad bounds {:?}", &caps[7])))?,
            })
        })
        .collect()
}
